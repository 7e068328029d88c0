//! Run the full collection-and-ranking pipeline over the use-after-free
//! fixture set: first the report alone, then with traces, call graph,
//! and dataflow evidence fused in.
//!
//! Run with `cargo run --example rank_candidates`.

use std::path::Path;

use faultline::callgraph::{DataflowDoc, GraphDoc};
use faultline::config::PipelineConfig;
use faultline::pipeline::run_rank;
use faultline::ranking::ScoredCandidate;
use faultline::report::parse_report;
use faultline::traces::load_traces;

fn fixture(rel: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel);
    std::fs::read_to_string(path).expect("fixture")
}

fn show(ranked: &[ScoredCandidate]) {
    for (i, scored) in ranked.iter().enumerate() {
        let tags: Vec<String> = scored
            .candidate
            .tags
            .iter()
            .map(|tag| format!("{tag:?}"))
            .collect();
        println!(
            "  {:>2}. {:<18} {:<15} score {:.4}  [{}]",
            i + 1,
            scored.candidate.function,
            scored.candidate.file.as_deref().unwrap_or("-"),
            scored.score,
            tags.join(", ")
        );
    }
}

fn main() {
    let report = parse_report(&fixture("reports/uaf.txt")).unwrap();
    let config = PipelineConfig::default();

    // Report-only: the candidates carry stack evidence alone.
    // `do_close` sits on the crash, free, and allocation stacks at
    // once, and its score composes exactly as in the scoring
    // walkthrough example.
    let artifacts = run_rank(&report, None, None, None, &config).unwrap();
    println!(
        "report only ({} candidates after filtering):",
        artifacts.pool.len()
    );
    show(&artifacts.ranked);
    println!();

    // Full evidence: trace fractions, traversal signals, and dataflow
    // dependencies join the pool. New functions appear (e.g. ones only
    // seen in traces), and shared-evidence candidates gain score.
    let traces = load_traces(&fixture("traces/uaf.jsonl")).unwrap();
    let graph: GraphDoc = serde_json::from_str(&fixture("callgraph/small.json")).unwrap();
    let dataflow: DataflowDoc = serde_json::from_str(&fixture("dataflow/export.json")).unwrap();
    let artifacts = run_rank(
        &report,
        Some(&traces),
        Some(&graph),
        Some(&dataflow),
        &config,
    )
    .unwrap();
    println!(
        "full evidence ({} candidates after filtering):",
        artifacts.pool.len()
    );
    show(&artifacts.ranked);
    if !artifacts.unresolved_anchors.is_empty() {
        println!("unresolved anchors: {:?}", artifacts.unresolved_anchors);
    }
}
