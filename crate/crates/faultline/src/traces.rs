//! Crash-variant families and per-variant function-entry traces.
//!
//! A family is the set of inputs derived from one PoC that still crash
//! with the same bug. Each variant contributes one execution trace (the
//! functions entered on the path to the crash); occurrence statistics
//! over the family down-weight functions that appear only in a minority
//! of traces.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{classify_crash, parse_report, CrashClass};

/// One crash-exploration variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashVariant {
    pub id: String,
    pub input_ref: PathBuf,
    /// Replay confirmed the variant still crashes. Only crashing
    /// variants contribute traces to the pool.
    pub crashes: bool,
}

/// One function-entry record of a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub function: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

/// Ordered function entries of one variant up to its crash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub variant_id: String,
    pub frames: Vec<TraceFrame>,
}

/// Per-function occurrence counts over a trace family.
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceStats {
    counts: BTreeMap<String, usize>,
    files: BTreeMap<String, String>,
    total: usize,
}

impl OccurrenceStats {
    /// Number of traces containing the function.
    pub fn appears_in(&self, function: &str) -> usize {
        self.counts.get(function).copied().unwrap_or(0)
    }

    /// appears_in / total traces, in (0, 1] for present functions.
    pub fn fraction(&self, function: &str) -> f64 {
        self.appears_in(function) as f64 / self.total as f64
    }

    pub fn total_traces(&self) -> usize {
        self.total
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, usize)> {
        self.counts.iter().map(|(f, c)| (f.as_str(), *c))
    }

    /// First file recorded for the function across the family, if any.
    pub fn file_of(&self, function: &str) -> Option<&str> {
        self.files.get(function).map(String::as_str)
    }
}

/// Parse one trace record. Consecutive duplicate entries collapse to
/// one: re-entry within a loop is not evidence multiplicity.
pub fn parse_trace(doc: &str) -> Result<ExecutionTrace> {
    let raw: ExecutionTrace = serde_json::from_str(doc)?;
    let mut frames: Vec<TraceFrame> = Vec::with_capacity(raw.frames.len());
    for frame in raw.frames {
        if frame.function.is_empty() {
            return Err(Error::Schema {
                index: frames.len(),
                reason: "trace frame has an empty function".into(),
            });
        }
        if frames.last() != Some(&frame) {
            frames.push(frame);
        }
    }
    Ok(ExecutionTrace {
        variant_id: raw.variant_id,
        frames,
    })
}

/// Load a newline-delimited trace file (one record per variant).
/// Duplicate variant ids are rejected.
pub fn load_traces(text: &str) -> Result<Vec<ExecutionTrace>> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let trace = parse_trace(line).map_err(|e| match e {
            Error::Json(inner) => Error::Schema {
                index: i,
                reason: inner.to_string(),
            },
            other => other,
        })?;
        if !ids.insert(trace.variant_id.clone()) {
            return Err(Error::Schema {
                index: i,
                reason: format!("duplicate variant_id `{}`", trace.variant_id),
            });
        }
        out.push(trace);
    }
    Ok(out)
}

/// Occurrence statistics over a family. Each function counts once per
/// trace (set semantics); fractions are against the total trace count.
pub fn family_stats(traces: &[ExecutionTrace]) -> Result<OccurrenceStats> {
    if traces.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    for trace in traces {
        let mut seen = BTreeSet::new();
        for frame in &trace.frames {
            if seen.insert(frame.function.as_str()) {
                *counts.entry(frame.function.clone()).or_default() += 1;
            }
            if let Some(file) = &frame.file {
                // smallest path wins so the hint is order-insensitive
                files
                    .entry(frame.function.clone())
                    .and_modify(|f| {
                        if file < f {
                            *f = file.clone();
                        }
                    })
                    .or_insert_with(|| file.clone());
            }
        }
    }
    Ok(OccurrenceStats {
        counts,
        files,
        total: traces.len(),
    })
}

/// Fuzzer backend contract: explore around a seed input and return the
/// variants confirmed to still crash.
pub trait FuzzerAdapter {
    fn explore(&self, seed_input: &Path, budget: Duration) -> Result<Vec<CrashVariant>>;
}

/// Run crash exploration. A zero budget degenerates to the seed-only
/// family without consulting the backend.
pub fn run_crash_exploration(
    adapter: &dyn FuzzerAdapter,
    seed_input: &Path,
    budget: Duration,
) -> Result<Vec<CrashVariant>> {
    if budget.is_zero() {
        return Ok(vec![CrashVariant {
            id: "seed".into(),
            input_ref: seed_input.to_path_buf(),
            crashes: true,
        }]);
    }
    adapter.explore(seed_input, budget)
}

/// Stub backend: replays a recorded directory of `{input, trace,
/// report}` triples, one subdirectory per variant.
pub struct StubFuzzer {
    dir: PathBuf,
}

impl StubFuzzer {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        StubFuzzer { dir: dir.into() }
    }

    /// Variant subdirectories in name order.
    fn variant_dirs(&self) -> Result<Vec<PathBuf>> {
        let mut dirs = Vec::new();
        for entry in std::fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.is_dir() {
                dirs.push(path);
            }
        }
        dirs.sort();
        Ok(dirs)
    }

    /// Crashing variants whose replay report matches the seed's crash
    /// class, with their parsed traces. Exploration occasionally
    /// produces inputs that trigger a different bug; those traces are
    /// excluded entirely.
    pub fn collect_family(
        &self,
        seed_class: CrashClass,
    ) -> Result<(Vec<CrashVariant>, Vec<ExecutionTrace>)> {
        let mut variants = Vec::new();
        let mut traces = Vec::new();
        for dir in self.variant_dirs()? {
            let id = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let report_text = std::fs::read_to_string(dir.join("report"))?;
            let crashes = match parse_report(&report_text) {
                Ok(report) => {
                    if classify_crash(&report.bug_label) != seed_class {
                        continue;
                    }
                    true
                }
                Err(_) => false,
            };
            if !crashes {
                continue;
            }
            let trace_text = std::fs::read_to_string(dir.join("trace"))?;
            let mut trace = parse_trace(trace_text.trim())?;
            trace.variant_id = id.clone();
            variants.push(CrashVariant {
                id,
                input_ref: dir.join("input"),
                crashes: true,
            });
            traces.push(trace);
        }
        Ok((variants, traces))
    }
}

impl FuzzerAdapter for StubFuzzer {
    fn explore(&self, _seed_input: &Path, _budget: Duration) -> Result<Vec<CrashVariant>> {
        let mut variants = Vec::new();
        for dir in self.variant_dirs()? {
            let report_text = std::fs::read_to_string(dir.join("report"))
                .map_err(|e| Error::Adapter(format!("variant {}: {e}", dir.display())))?;
            if parse_report(&report_text).is_ok() {
                variants.push(CrashVariant {
                    id: dir
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    input_ref: dir.join("input"),
                    crashes: true,
                });
            }
        }
        Ok(variants)
    }
}

/// Real backend: a command template receiving seed path, output
/// directory, and budget seconds. Never exercised by the test suite.
pub struct CommandFuzzer {
    pub template: String,
    pub output_dir: PathBuf,
}

impl FuzzerAdapter for CommandFuzzer {
    fn explore(&self, seed_input: &Path, budget: Duration) -> Result<Vec<CrashVariant>> {
        let cmd = self
            .template
            .replace("{seed}", &seed_input.display().to_string())
            .replace("{out_dir}", &self.output_dir.display().to_string())
            .replace("{budget_secs}", &budget.as_secs().to_string());
        let output = std::process::Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .output()
            .map_err(|e| Error::Adapter(format!("fuzzer command failed to start: {e}")))?;
        if !output.status.success() {
            return Err(Error::Adapter(format!(
                "fuzzer command exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr)
            )));
        }
        StubFuzzer::new(&self.output_dir).explore(seed_input, budget)
    }
}

/// Default exploration budget for the real backend: 12 hours per bug.
/// Tests use seconds.
pub const DEFAULT_FUZZ_BUDGET: Duration = Duration::from_secs(12 * 60 * 60);

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(id: &str, functions: &[&str]) -> ExecutionTrace {
        ExecutionTrace {
            variant_id: id.into(),
            frames: functions
                .iter()
                .map(|f| TraceFrame {
                    function: f.to_string(),
                    file: None,
                })
                .collect(),
        }
    }

    #[test]
    fn parse_preserves_order_and_collapses_runs() {
        let t = parse_trace(
            r#"{"variant_id":"v1","frames":[{"function":"a"},{"function":"b"},{"function":"c"}]}"#,
        )
        .unwrap();
        assert_eq!(t.frames.len(), 3);
        assert_eq!(t.frames[0].function, "a");

        let t = parse_trace(
            r#"{"variant_id":"v2","frames":[{"function":"a"},{"function":"a"},{"function":"a"},{"function":"b"}]}"#,
        )
        .unwrap();
        let names: Vec<_> = t.frames.iter().map(|f| f.function.as_str()).collect();
        assert_eq!(names, vec!["a", "b"]);
        // non-consecutive repeats survive
        let t = parse_trace(
            r#"{"variant_id":"v3","frames":[{"function":"a"},{"function":"b"},{"function":"a"}]}"#,
        )
        .unwrap();
        assert_eq!(t.frames.len(), 3);
    }

    #[test]
    fn no_identical_consecutive_frames_after_parse() {
        let t = parse_trace(
            r#"{"variant_id":"v","frames":[{"function":"a","file":"x.c"},{"function":"a","file":"x.c"},{"function":"a","file":"y.c"}]}"#,
        )
        .unwrap();
        for pair in t.frames.windows(2) {
            assert_ne!(pair[0], pair[1]);
        }
    }

    #[test]
    fn large_trace_parses_quickly() {
        let frames: Vec<String> = (0..1000)
            .map(|i| format!(r#"{{"function":"fn_{}"}}"#, i % 50))
            .collect();
        let doc = format!(r#"{{"variant_id":"big","frames":[{}]}}"#, frames.join(","));
        let start = std::time::Instant::now();
        let t = parse_trace(&doc).unwrap();
        assert!(!t.frames.is_empty());
        assert!(start.elapsed() < Duration::from_millis(50));
    }

    #[test]
    fn family_stats_counts_once_per_trace() {
        let stats = family_stats(&[trace("1", &["f", "f", "g"])]).unwrap();
        assert_eq!(stats.fraction("f"), 1.0);
        assert_eq!(stats.appears_in("f"), 1);

        let traces = vec![
            trace("1", &["f", "g"]),
            trace("2", &["f"]),
            trace("3", &["f", "h"]),
            trace("4", &["g"]),
        ];
        let stats = family_stats(&traces).unwrap();
        assert_eq!(stats.fraction("f"), 0.75);
        assert_eq!(stats.fraction("g"), 0.5);
        assert_eq!(stats.fraction("h"), 0.25);
        assert_eq!(stats.total_traces(), 4);
    }

    #[test]
    fn family_stats_is_permutation_invariant() {
        let mut traces = vec![
            trace("1", &["f", "g"]),
            trace("2", &["g", "h"]),
            trace("3", &["f"]),
        ];
        let forward = family_stats(&traces).unwrap();
        traces.reverse();
        let backward = family_stats(&traces).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn empty_family_is_an_error() {
        match family_stats(&[]) {
            Err(Error::EmptyFamily) => {}
            other => panic!("expected empty family error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_variant_ids_are_rejected() {
        let text = concat!(
            r#"{"variant_id":"v1","frames":[{"function":"a"}]}"#,
            "\n",
            r#"{"variant_id":"v1","frames":[{"function":"b"}]}"#,
            "\n"
        );
        assert!(load_traces(text).is_err());
    }

    #[test]
    fn zero_budget_returns_seed_only_family() {
        struct Failing;
        impl FuzzerAdapter for Failing {
            fn explore(&self, _: &Path, _: Duration) -> Result<Vec<CrashVariant>> {
                panic!("backend must not be consulted at zero budget")
            }
        }
        let variants =
            run_crash_exploration(&Failing, Path::new("/tmp/poc"), Duration::ZERO).unwrap();
        assert_eq!(variants.len(), 1);
        assert_eq!(variants[0].id, "seed");
        assert!(variants[0].crashes);
    }

    #[test]
    fn default_budget_is_twelve_hours() {
        assert_eq!(DEFAULT_FUZZ_BUDGET, Duration::from_secs(43_200));
    }
}
