//! The deduplicated, evidence-tagged candidate pool.
//!
//! Candidates from the crash stack, sanitizer stacks, dynamic traces,
//! and the static dataflow export are fused by (function, file) key:
//! tag sets union, per-tag metadata merges, traversal signals keep the
//! componentwise best. Consolidation filters then drop functions that
//! cannot plausibly be the defect site (harness entry points, C runtime
//! helpers, test and fuzzer directories).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::callgraph::{Access, AnchorSignals};

/// The six evidence tags: which collection step contributed a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceTag {
    CrashStack,
    CallTrace,
    AllocStack,
    FreeStack,
    ObjectOrigin,
    VarDep,
}

impl EvidenceTag {
    pub const ALL: [EvidenceTag; 6] = [
        EvidenceTag::CrashStack,
        EvidenceTag::CallTrace,
        EvidenceTag::AllocStack,
        EvidenceTag::FreeStack,
        EvidenceTag::ObjectOrigin,
        EvidenceTag::VarDep,
    ];
}

/// Per-tag metadata carried by a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagMeta {
    /// Occurrence fraction over the trace family (CallTrace).
    Fraction(f64),
    /// Frame ordinal on the contributing stack (stack-derived tags).
    Ordinal(usize),
    /// Variable access kind (VarDep).
    Access(Access),
}

/// One pool candidate: a function with its fused evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoiCandidate {
    pub function: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub tags: BTreeSet<EvidenceTag>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<EvidenceTag, TagMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<AnchorSignals>,
}

impl FoiCandidate {
    /// A candidate with one tag and optional metadata for it.
    pub fn tagged(
        function: impl Into<String>,
        file: Option<String>,
        tag: EvidenceTag,
        meta: Option<TagMeta>,
    ) -> Self {
        let mut metas = BTreeMap::new();
        if let Some(m) = meta {
            metas.insert(tag, m);
        }
        FoiCandidate {
            function: function.into(),
            file,
            tags: BTreeSet::from([tag]),
            meta: metas,
            signals: None,
        }
    }

    /// Tags non-empty, metadata keys a subset of the tags.
    pub fn is_well_formed(&self) -> bool {
        !self.tags.is_empty() && self.meta.keys().all(|t| self.tags.contains(t))
    }

    /// CallTrace occurrence fraction, defaulting to 1.0 when the tag is
    /// present without recorded metadata.
    pub fn trace_fraction(&self) -> Option<f64> {
        if !self.tags.contains(&EvidenceTag::CallTrace) {
            return None;
        }
        match self.meta.get(&EvidenceTag::CallTrace) {
            Some(TagMeta::Fraction(f)) => Some(*f),
            _ => Some(1.0),
        }
    }
}

fn merge_meta(into: &mut BTreeMap<EvidenceTag, TagMeta>, tag: EvidenceTag, meta: TagMeta) {
    match (into.get(&tag).copied(), meta) {
        (None, m) => {
            into.insert(tag, m);
        }
        (Some(TagMeta::Fraction(a)), TagMeta::Fraction(b)) => {
            into.insert(tag, TagMeta::Fraction(a.max(b)));
        }
        (Some(TagMeta::Ordinal(a)), TagMeta::Ordinal(b)) => {
            into.insert(tag, TagMeta::Ordinal(a.min(b)));
        }
        (Some(TagMeta::Access(a)), TagMeta::Access(b)) => {
            // writes dominate reads so the merge is order-independent
            into.insert(tag, TagMeta::Access(a.max(b)));
        }
        // mismatched shapes: first writer wins
        (Some(_), _) => {}
    }
}

fn fuse_into(record: &mut FoiCandidate, cand: &FoiCandidate) {
    record.tags.extend(cand.tags.iter().copied());
    for (tag, meta) in &cand.meta {
        merge_meta(&mut record.meta, *tag, *meta);
    }
    record.signals = match (record.signals, cand.signals) {
        (Some(a), Some(b)) => Some(a.merge(b)),
        (a, b) => a.or(b),
    };
    if record.file.is_none() {
        record.file = cand.file.clone();
    }
}

/// Fuse candidate lists into one pool.
///
/// The fusion key is (function, file) with an absent file acting as a
/// wildcard: a record missing file information fuses with the first
/// same-symbol record in appearance order, and adopts its file. Output
/// order is stable by first appearance.
pub fn merge_pool(sources: &[Vec<FoiCandidate>]) -> Vec<FoiCandidate> {
    let mut pool: Vec<FoiCandidate> = Vec::new();
    for cand in sources.iter().flatten() {
        let slot = pool.iter_mut().find(|record| {
            record.function == cand.function
                && (record.file.is_none() || cand.file.is_none() || record.file == cand.file)
        });
        match slot {
            Some(record) => fuse_into(record, cand),
            None => pool.push(cand.clone()),
        }
    }
    pool
}

/// Consolidation filter policy: exact symbols, symbol prefixes, and
/// path substrings marking test or fuzzer code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterPolicy {
    pub symbol_denylist: BTreeSet<String>,
    pub prefix_denylist: Vec<String>,
    pub path_patterns: Vec<String>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            symbol_denylist: [
                "main", "memcpy", "memmove", "memset", "malloc", "calloc", "realloc", "free",
                "strlen", "strcpy", "strncpy",
            ]
            .into_iter()
            .map(str::to_string)
            .collect(),
            prefix_denylist: [
                "LLVMFuzzer",
                "__asan_",
                "__sanitizer_",
                "operator new",
                "operator delete",
            ]
            .into_iter()
            .map(str::to_string)
            .collect(),
            path_patterns: ["/test", "/tests", "/fuzz", "/fuzzer", "/oss-fuzz"]
                .into_iter()
                .map(str::to_string)
                .collect(),
        }
    }
}

impl FilterPolicy {
    pub fn excludes(&self, candidate: &FoiCandidate) -> bool {
        if self.symbol_denylist.contains(&candidate.function) {
            return true;
        }
        if self
            .prefix_denylist
            .iter()
            .any(|p| candidate.function.starts_with(p))
        {
            return true;
        }
        if let Some(file) = &candidate.file {
            if self.path_patterns.iter().any(|p| file.contains(p)) {
                return true;
            }
        }
        false
    }
}

/// Drop candidates matching the policy, preserving survivor order.
pub fn filter_pool(pool: &[FoiCandidate], policy: &FilterPolicy) -> Vec<FoiCandidate> {
    pool.iter()
        .filter(|c| !policy.excludes(c))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(function: &str, file: Option<&str>, tags: &[EvidenceTag]) -> FoiCandidate {
        FoiCandidate {
            function: function.into(),
            file: file.map(str::to_string),
            tags: tags.iter().copied().collect(),
            meta: BTreeMap::new(),
            signals: None,
        }
    }

    #[test]
    fn equal_keys_fuse_with_tag_union() {
        let merged = merge_pool(&[
            vec![cand("f", Some("a.c"), &[EvidenceTag::CrashStack])],
            vec![cand("f", Some("a.c"), &[EvidenceTag::FreeStack])],
        ]);
        assert_eq!(merged.len(), 1);
        assert_eq!(
            merged[0].tags,
            BTreeSet::from([EvidenceTag::CrashStack, EvidenceTag::FreeStack])
        );
    }

    #[test]
    fn disjoint_candidates_concatenate_in_order() {
        let merged = merge_pool(&[
            vec![cand("f", Some("a.c"), &[EvidenceTag::CrashStack])],
            vec![cand("g", Some("b.c"), &[EvidenceTag::VarDep])],
        ]);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].function, "f");
        assert_eq!(merged[1].function, "g");
    }

    #[test]
    fn fusion_is_idempotent() {
        let p = vec![
            cand("f", Some("a.c"), &[EvidenceTag::CrashStack]),
            cand("g", None, &[EvidenceTag::CallTrace]),
        ];
        assert_eq!(merge_pool(&[p.clone(), p.clone()]), merge_pool(&[p]));
    }

    #[test]
    fn wildcard_file_fuses_and_adopts_the_concrete_file() {
        // trace candidates often lack file information
        let merged = merge_pool(&[
            vec![cand("f", None, &[EvidenceTag::CallTrace])],
            vec![cand("f", Some("a.c"), &[EvidenceTag::CrashStack])],
        ]);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].file.as_deref(), Some("a.c"));
        assert_eq!(merged[0].tags.len(), 2);

        // a wildcard record fuses with the first matching record in
        // appearance order when one symbol spans two files
        let merged = merge_pool(&[
            vec![
                cand("f", Some("a.c"), &[EvidenceTag::CrashStack]),
                cand("f", Some("b.c"), &[EvidenceTag::AllocStack]),
            ],
            vec![cand("f", None, &[EvidenceTag::CallTrace])],
        ]);
        assert_eq!(merged.len(), 2);
        assert!(merged[0].tags.contains(&EvidenceTag::CallTrace));
        assert!(!merged[1].tags.contains(&EvidenceTag::CallTrace));
    }

    #[test]
    fn static_twins_do_not_fuse() {
        let merged = merge_pool(&[
            vec![cand("helper", Some("a.c"), &[EvidenceTag::CrashStack])],
            vec![cand("helper", Some("b.c"), &[EvidenceTag::VarDep])],
        ]);
        assert_eq!(merged.len(), 2);
    }

    #[test]
    fn meta_merges_per_tag() {
        let mut a = cand("f", Some("a.c"), &[EvidenceTag::CallTrace, EvidenceTag::CrashStack]);
        a.meta.insert(EvidenceTag::CallTrace, TagMeta::Fraction(0.4));
        a.meta.insert(EvidenceTag::CrashStack, TagMeta::Ordinal(3));
        let mut b = cand("f", Some("a.c"), &[EvidenceTag::CallTrace, EvidenceTag::CrashStack]);
        b.meta.insert(EvidenceTag::CallTrace, TagMeta::Fraction(0.9));
        b.meta.insert(EvidenceTag::CrashStack, TagMeta::Ordinal(1));

        let merged = merge_pool(&[vec![a], vec![b]]);
        assert_eq!(merged.len(), 1);
        assert_eq!(
            merged[0].meta.get(&EvidenceTag::CallTrace),
            Some(&TagMeta::Fraction(0.9))
        );
        assert_eq!(
            merged[0].meta.get(&EvidenceTag::CrashStack),
            Some(&TagMeta::Ordinal(1))
        );
        assert!(merged[0].is_well_formed());
    }

    #[test]
    fn signals_merge_componentwise() {
        let mut a = cand("f", Some("a.c"), &[EvidenceTag::CrashStack]);
        a.signals = Some(AnchorSignals { anchors_count: 1, edge_hits: 4, min_depth: 2 });
        let mut b = cand("f", Some("a.c"), &[EvidenceTag::VarDep]);
        b.signals = Some(AnchorSignals { anchors_count: 3, edge_hits: 1, min_depth: 5 });
        let merged = merge_pool(&[vec![a], vec![b]]);
        assert_eq!(
            merged[0].signals,
            Some(AnchorSignals { anchors_count: 3, edge_hits: 4, min_depth: 2 })
        );
    }

    #[test]
    fn default_filters_drop_the_named_exclusions() {
        let policy = FilterPolicy::default();
        let pool = vec![
            cand("LLVMFuzzerTestOneInput", Some("fuzz/harness.c"), &[EvidenceTag::CrashStack]),
            cand("memcpy", None, &[EvidenceTag::CrashStack]),
            cand("main", Some("src/main.c"), &[EvidenceTag::CrashStack]),
            cand("do_close", Some("src/session.c"), &[EvidenceTag::CrashStack]),
            cand("run_case", Some("src/tests/driver.c"), &[EvidenceTag::CallTrace]),
            cand("__asan_report_load8", None, &[EvidenceTag::CrashStack]),
        ];
        let kept = filter_pool(&pool, &policy);
        let names: Vec<_> = kept.iter().map(|c| c.function.as_str()).collect();
        assert_eq!(names, vec!["do_close"]);
    }

    #[test]
    fn filter_is_idempotent_and_path_clean() {
        let policy = FilterPolicy::default();
        let pool = vec![
            cand("a", Some("/src/x.c"), &[EvidenceTag::CrashStack]),
            cand("b", Some("/src/fuzz/x.c"), &[EvidenceTag::CrashStack]),
        ];
        let once = filter_pool(&pool, &policy);
        let twice = filter_pool(&once, &policy);
        assert_eq!(once, twice);
        for c in &once {
            if let Some(file) = &c.file {
                assert!(!policy.path_patterns.iter().any(|p| file.contains(p)));
            }
        }
    }
}
