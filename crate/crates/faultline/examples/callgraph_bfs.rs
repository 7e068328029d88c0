//! Walk the static call graph outward from the crash-report anchors and
//! print the traversal signals that later feed candidate ordering.
//!
//! Run with `cargo run --example callgraph_bfs`.

use std::path::Path;

use faultline::callgraph::{bfs_candidates, load_graph, widen_and_merge, GraphDoc};
use faultline::config::BfsConfig;
use faultline::report::{anchors_from_report, parse_report};

fn fixture(rel: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel);
    std::fs::read_to_string(path).expect("fixture")
}

fn main() {
    let doc: GraphDoc = serde_json::from_str(&fixture("callgraph/small.json")).unwrap();
    let graph = load_graph(&doc).unwrap();
    println!(
        "graph: {} nodes, {} edges",
        graph.node_count(),
        graph.edge_count()
    );

    let report = parse_report(&fixture("reports/uaf.txt")).unwrap();
    let bfs = BfsConfig::default();
    let anchors = anchors_from_report(&report, bfs.anchor_limit);
    println!("anchors from the report (crash, alloc, free stack functions): {anchors:?}");
    println!();

    let outcome = bfs_candidates(&graph, &anchors, bfs.depth_limit, bfs.cap).unwrap();
    if !outcome.unresolved.is_empty() {
        println!("anchors not in the graph: {:?}", outcome.unresolved);
    }

    println!("{:<18} {:<15} {:>7} {:>9} {:>9}", "function", "file", "anchors", "edge_hits", "min_depth");
    for candidate in &outcome.candidates {
        println!(
            "{:<18} {:<15} {:>7} {:>9} {:>9}",
            candidate.function,
            candidate.file.as_deref().unwrap_or("-"),
            candidate.signals.anchors_count,
            candidate.signals.edge_hits,
            candidate.signals.min_depth
        );
    }
    println!();

    // With fewer candidates than min_count the traversal widens: the
    // anchor set grows to every reported stack function and the two
    // passes merge, keeping the componentwise-best signals.
    let widened = widen_and_merge(
        &graph,
        &report,
        &outcome,
        bfs.min_count,
        bfs.depth_limit,
        bfs.cap,
    )
    .unwrap();
    println!(
        "after widening (min_count {}): {} candidates, first = {}",
        bfs.min_count,
        widened.candidates.len(),
        widened.candidates[0].function
    );
}
