//! Evidence-weighted candidate scoring and the diversity rerank.
//!
//! Tags are partitioned into evidence families. Within a family the
//! active tag weights aggregate with an ordered-weighted average: the
//! strongest weight counts fully, every further weight is discounted by
//! α, and the sum saturates at the family cap
//!
//! ```text
//! s_f = min(c_f, w_(1) + α · Σ_{i≥2} w_(i))
//! ```
//!
//! Family scores combine across families with a noisy-OR
//!
//! ```text
//! s = 1 − Π_f (1 − s_f)
//! ```
//!
//! so breadth of independent evidence outranks depth within one family:
//! two families at caps c₁, c₂ give 1 − (1−c₁)(1−c₂) > max(c₁, c₂).
//! Tag weights are conditioned on the crash class; the CallTrace weight
//! is pre-multiplied by the function's occurrence fraction over the
//! variant family, which down-weights functions seen only in a minority
//! of traces.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::{EvidenceTag, FoiCandidate};
use crate::report::CrashClass;

/// One evidence family: a cell of the tag partition with its cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceFamily {
    pub family_id: String,
    pub member_tags: BTreeSet<EvidenceTag>,
    /// Family cap c_f, strictly inside (0, 1).
    pub cap: f64,
}

/// The family partition of the six tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyTaxonomy {
    pub families: Vec<EvidenceFamily>,
}

/// Crash-class-conditioned tag weights plus the OWA discount α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub alpha: f64,
    pub weights: BTreeMap<CrashClass, BTreeMap<EvidenceTag, f64>>,
}

/// Full ranking configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    pub taxonomy: FamilyTaxonomy,
    pub weights: WeightTable,
    pub top_k: usize,
    pub rerank_head: usize,
}

/// A candidate with its family scores and combined score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub candidate: FoiCandidate,
    pub family_scores: BTreeMap<String, f64>,
    pub score: f64,
}

const ALL_CLASSES: [CrashClass; 5] = [
    CrashClass::Spatial,
    CrashClass::Uaf,
    CrashClass::Npd,
    CrashClass::Num,
    CrashClass::Other,
];

impl Default for RankingConfig {
    fn default() -> Self {
        let taxonomy = FamilyTaxonomy {
            families: vec![
                EvidenceFamily {
                    family_id: "crash".into(),
                    member_tags: BTreeSet::from([EvidenceTag::CrashStack]),
                    cap: 0.97,
                },
                EvidenceFamily {
                    family_id: "alloc".into(),
                    member_tags: BTreeSet::from([
                        EvidenceTag::AllocStack,
                        EvidenceTag::FreeStack,
                        EvidenceTag::ObjectOrigin,
                    ]),
                    cap: 0.95,
                },
                EvidenceFamily {
                    family_id: "trace".into(),
                    member_tags: BTreeSet::from([EvidenceTag::CallTrace]),
                    cap: 0.80,
                },
                EvidenceFamily {
                    family_id: "dataflow".into(),
                    member_tags: BTreeSet::from([EvidenceTag::VarDep]),
                    cap: 0.85,
                },
            ],
        };
        let mut weights = BTreeMap::new();
        for class in ALL_CLASSES {
            let mut table = BTreeMap::new();
            table.insert(
                EvidenceTag::CrashStack,
                if class == CrashClass::Npd { 0.92 } else { 0.85 },
            );
            table.insert(EvidenceTag::AllocStack, 0.65);
            table.insert(EvidenceTag::ObjectOrigin, 0.55);
            table.insert(EvidenceTag::CallTrace, 0.45);
            table.insert(EvidenceTag::VarDep, 0.60);
            table.insert(
                EvidenceTag::FreeStack,
                if class == CrashClass::Uaf { 0.90 } else { 0.50 },
            );
            weights.insert(class, table);
        }
        RankingConfig {
            taxonomy,
            weights: WeightTable { alpha: 0.25, weights },
            top_k: 20,
            rerank_head: 10,
        }
    }
}

impl RankingConfig {
    /// Check every structural invariant: the families partition the six
    /// tags, caps sit strictly inside (0,1), α in [0,1), every
    /// (class, tag) pair has a weight in [0,1], rerank_head ≤ top_k.
    pub fn validate(&self) -> Result<()> {
        let mut covered = BTreeSet::new();
        for family in &self.taxonomy.families {
            if !(family.cap > 0.0 && family.cap < 1.0) {
                return Err(Error::Domain(format!(
                    "family `{}` cap {} outside (0,1)",
                    family.family_id, family.cap
                )));
            }
            for tag in &family.member_tags {
                if !covered.insert(*tag) {
                    return Err(Error::Domain(format!(
                        "tag {tag:?} appears in more than one family"
                    )));
                }
            }
        }
        if covered.len() != EvidenceTag::ALL.len() {
            return Err(Error::Domain("families do not cover all six tags".into()));
        }
        if !(0.0..1.0).contains(&self.weights.alpha) {
            return Err(Error::Domain(format!("alpha {} outside [0,1)", self.weights.alpha)));
        }
        for class in ALL_CLASSES {
            let table = self
                .weights
                .weights
                .get(&class)
                .ok_or_else(|| Error::Domain(format!("no weight table for class {class:?}")))?;
            for tag in EvidenceTag::ALL {
                let w = table
                    .get(&tag)
                    .ok_or_else(|| Error::Domain(format!("no weight for ({class:?}, {tag:?})")))?;
                if !(0.0..=1.0).contains(w) {
                    return Err(Error::Domain(format!(
                        "weight {w} for ({class:?}, {tag:?}) outside [0,1]"
                    )));
                }
            }
        }
        if self.rerank_head > self.top_k {
            return Err(Error::Domain(format!(
                "rerank_head {} exceeds top_k {}",
                self.rerank_head, self.top_k
            )));
        }
        Ok(())
    }
}

/// OWA family score: sort weights descending and return
/// min(cap, w_(1) + α·Σ_{i≥2} w_(i)). An empty multiset scores 0.
pub fn family_score(active_weights: &[f64], alpha: f64, cap: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha {alpha} outside [0,1)")));
    }
    if !(cap > 0.0 && cap < 1.0) {
        return Err(Error::Domain(format!("cap {cap} outside (0,1)")));
    }
    for w in active_weights {
        if !(0.0..=1.0).contains(w) {
            return Err(Error::Domain(format!("weight {w} outside [0,1]")));
        }
    }
    if active_weights.is_empty() {
        return Ok(0.0);
    }
    let mut sorted = active_weights.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let rest: f64 = sorted[1..].iter().sum();
    Ok(cap.min(sorted[0] + alpha * rest))
}

/// Noisy-OR combination across families: 1 − Π (1 − s_f).
pub fn combine_score(family_scores: &[f64]) -> Result<f64> {
    let mut survive = 1.0;
    for s in family_scores {
        if !(0.0..1.0).contains(s) {
            return Err(Error::Domain(format!("family score {s} outside [0,1)")));
        }
        survive *= 1.0 - s;
    }
    Ok(1.0 - survive)
}

/// Score one candidate under the crash class.
pub fn score_candidate(
    candidate: &FoiCandidate,
    crash_class: CrashClass,
    config: &RankingConfig,
) -> Result<ScoredCandidate> {
    let table = config
        .weights
        .weights
        .get(&crash_class)
        .ok_or_else(|| Error::Domain(format!("no weight table for class {crash_class:?}")))?;
    let mut family_scores = BTreeMap::new();
    let mut active = Vec::new();
    for family in &config.taxonomy.families {
        let mut weights = Vec::new();
        for tag in &family.member_tags {
            if !candidate.tags.contains(tag) {
                continue;
            }
            let mut w = *table
                .get(tag)
                .ok_or_else(|| Error::Domain(format!("no weight for ({crash_class:?}, {tag:?})")))?;
            if *tag == EvidenceTag::CallTrace {
                let fraction = candidate.trace_fraction().unwrap_or(1.0);
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(Error::Domain(format!(
                        "occurrence fraction {fraction} outside [0,1]"
                    )));
                }
                w *= fraction;
            }
            weights.push(w);
        }
        if weights.is_empty() {
            continue;
        }
        let s = family_score(&weights, config.weights.alpha, family.cap)?;
        family_scores.insert(family.family_id.clone(), s);
        active.push(s);
    }
    let score = combine_score(&active)?;
    Ok(ScoredCandidate {
        candidate: candidate.clone(),
        family_scores,
        score,
    })
}

fn by_rank(a: &ScoredCandidate, b: &ScoredCandidate) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.candidate.tags.len().cmp(&a.candidate.tags.len()))
        .then_with(|| a.candidate.function.cmp(&b.candidate.function))
        .then_with(|| a.candidate.file.cmp(&b.candidate.file))
}

/// Sort by score and rerank the tail for file diversity.
///
/// The first `rerank_head` entries stay in pure score order. The tail
/// is rebuilt greedily: each step takes the best-scored remaining
/// candidate from a file not yet represented in the output, falling
/// back to pure score once every remaining file is represented.
/// Candidates without file information share one bucket. Output is
/// truncated to `top_k`.
pub fn rank_and_diversify(scored: &[ScoredCandidate], config: &RankingConfig) -> Vec<ScoredCandidate> {
    let mut sorted: Vec<ScoredCandidate> = scored.to_vec();
    sorted.sort_by(by_rank);

    let head_len = config.rerank_head.min(sorted.len());
    let mut out: Vec<ScoredCandidate> = sorted[..head_len].to_vec();
    let mut remaining: Vec<ScoredCandidate> = sorted[head_len..].to_vec();
    let mut represented: BTreeSet<Option<String>> =
        out.iter().map(|c| c.candidate.file.clone()).collect();

    while out.len() < config.top_k && !remaining.is_empty() {
        let fresh = remaining
            .iter()
            .position(|c| !represented.contains(&c.candidate.file));
        let idx = fresh.unwrap_or(0);
        let chosen = remaining.remove(idx);
        represented.insert(chosen.candidate.file.clone());
        out.push(chosen);
    }
    out
}
