//! Static call-graph model, anchor-based bounded bidirectional BFS, and
//! ingestion of externally produced dataflow candidates.
//!
//! The traversal walks upstream (to callers) and downstream (to callees)
//! from each anchor up to a depth limit and tracks three signals per
//! discovered function: how many anchors reach it, how many call edges
//! land on it during the traversal, and its shortest distance from any
//! anchor. Candidates are ranked lexicographically by
//! ⟨−anchors_count, −edge_hits, min_depth⟩.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::SanitizerReport;

/// One node of the call-graph interchange document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub symbol: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

/// One directed caller→callee edge record. Multi-edges are allowed and
/// represent distinct call sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub caller: String,
    pub callee: String,
}

/// Call-graph interchange document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDoc {
    pub schema_version: u32,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<EdgeRecord>,
}

/// Validated immutable call graph.
#[derive(Debug, Clone)]
pub struct CallGraph {
    nodes: Vec<GraphNode>,
    by_symbol: HashMap<String, Vec<usize>>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    /// Edge records as (caller index, callee index), multiplicity kept.
    edges: Vec<(usize, usize)>,
}

/// Traversal signals for one discovered function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSignals {
    /// Number of anchors from which the function is reachable.
    pub anchors_count: usize,
    /// Call edges landing on the function during the traversal, plus one
    /// seed hit when the function is itself an anchor.
    pub edge_hits: usize,
    /// Shortest anchor-to-function distance in edges.
    pub min_depth: usize,
}

impl AnchorSignals {
    /// Componentwise-best merge: max counts, min depth.
    pub fn merge(self, other: AnchorSignals) -> AnchorSignals {
        AnchorSignals {
            anchors_count: self.anchors_count.max(other.anchors_count),
            edge_hits: self.edge_hits.max(other.edge_hits),
            min_depth: self.min_depth.min(other.min_depth),
        }
    }
}

/// One ranked traversal candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfsCandidate {
    pub function: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub signals: AnchorSignals,
}

/// Traversal result: ranked candidates plus anchors that did not resolve
/// to any node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfsOutcome {
    pub candidates: Vec<BfsCandidate>,
    pub unresolved: Vec<String>,
}

/// Validate a graph document. Rejects duplicate node ids, repeated
/// (symbol, file) pairs, and dangling edges.
pub fn load_graph(doc: &GraphDoc) -> Result<CallGraph> {
    let mut by_id: HashMap<&str, usize> = HashMap::new();
    let mut by_symbol: HashMap<String, Vec<usize>> = HashMap::new();
    let mut seen_pairs: HashMap<(&str, Option<&str>), usize> = HashMap::new();
    for (i, node) in doc.nodes.iter().enumerate() {
        if node.id.is_empty() || node.symbol.is_empty() {
            return Err(Error::Schema {
                index: i,
                reason: "node id and symbol must be non-empty".into(),
            });
        }
        if by_id.insert(&node.id, i).is_some() {
            return Err(Error::Schema {
                index: i,
                reason: format!("duplicate node id `{}`", node.id),
            });
        }
        let pair = (node.symbol.as_str(), node.file.as_deref());
        if seen_pairs.insert(pair, i).is_some() {
            return Err(Error::Schema {
                index: i,
                reason: format!(
                    "repeated (symbol, file) pair (`{}`, {:?})",
                    node.symbol, node.file
                ),
            });
        }
        by_symbol.entry(node.symbol.clone()).or_default().push(i);
    }
    let mut out_adj = vec![Vec::new(); doc.nodes.len()];
    let mut in_adj = vec![Vec::new(); doc.nodes.len()];
    let mut edges = Vec::with_capacity(doc.edges.len());
    for (i, edge) in doc.edges.iter().enumerate() {
        let caller = *by_id.get(edge.caller.as_str()).ok_or_else(|| Error::Schema {
            index: i,
            reason: format!("edge caller `{}` is not a node", edge.caller),
        })?;
        let callee = *by_id.get(edge.callee.as_str()).ok_or_else(|| Error::Schema {
            index: i,
            reason: format!("edge callee `{}` is not a node", edge.callee),
        })?;
        out_adj[caller].push(callee);
        in_adj[callee].push(caller);
        edges.push((caller, callee));
    }
    Ok(CallGraph {
        nodes: doc.nodes.clone(),
        by_symbol,
        out_adj,
        in_adj,
        edges,
    })
}

impl CallGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Node indices carrying the given symbol.
    pub fn resolve_symbol(&self, symbol: &str) -> &[usize] {
        self.by_symbol.get(symbol).map(Vec::as_slice).unwrap_or(&[])
    }

    fn bounded_bfs(&self, sources: &[usize], adj: &[Vec<usize>], limit: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.nodes.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s].is_none() {
                dist[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            if d == limit {
                continue;
            }
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

fn min_opt(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Ranking comparator: anchors_count desc, edge_hits desc, min_depth asc,
/// then symbol and file ascending for determinism.
pub fn compare_candidates(a: &BfsCandidate, b: &BfsCandidate) -> Ordering {
    b.signals
        .anchors_count
        .cmp(&a.signals.anchors_count)
        .then(b.signals.edge_hits.cmp(&a.signals.edge_hits))
        .then(a.signals.min_depth.cmp(&b.signals.min_depth))
        .then_with(|| a.function.cmp(&b.function))
        .then_with(|| a.file.cmp(&b.file))
}

/// Bounded bidirectional traversal from the anchor symbols.
///
/// Anchors that resolve to no node are skipped and reported in
/// [`BfsOutcome::unresolved`]; when none resolves the traversal fails
/// with [`Error::EmptyAnchorSet`]. Output is sorted by
/// [`compare_candidates`] and truncated to `cap`.
pub fn bfs_candidates(
    graph: &CallGraph,
    anchors: &[String],
    depth_limit: usize,
    cap: usize,
) -> Result<BfsOutcome> {
    let mut seen = Vec::new();
    let mut resolved: Vec<&str> = Vec::new();
    let mut unresolved = Vec::new();
    for anchor in anchors {
        if seen.contains(anchor) {
            continue;
        }
        seen.push(anchor.clone());
        if graph.resolve_symbol(anchor).is_empty() {
            unresolved.push(anchor.clone());
        } else {
            resolved.push(anchor);
        }
    }
    if resolved.is_empty() {
        return Err(Error::EmptyAnchorSet);
    }

    let n = graph.node_count();
    let mut anchors_count = vec![0usize; n];
    let mut best_depth: Vec<Option<usize>> = vec![None; n];
    let mut min_down: Vec<Option<usize>> = vec![None; n];
    let mut min_up: Vec<Option<usize>> = vec![None; n];
    let mut is_anchor_node = vec![false; n];

    for anchor in &resolved {
        let sources = graph.resolve_symbol(anchor);
        for &s in sources {
            is_anchor_node[s] = true;
        }
        let down = graph.bounded_bfs(sources, &graph.out_adj, depth_limit);
        let up = graph.bounded_bfs(sources, &graph.in_adj, depth_limit);
        for v in 0..n {
            let here = min_opt(down[v], up[v]);
            if here.is_some() {
                anchors_count[v] += 1;
            }
            best_depth[v] = min_opt(best_depth[v], here);
            min_down[v] = min_opt(min_down[v], down[v]);
            min_up[v] = min_opt(min_up[v], up[v]);
        }
    }

    let mut edge_hits = vec![0usize; n];
    for &(caller, callee) in &graph.edges {
        if matches!(min_down[caller], Some(d) if d < depth_limit) {
            edge_hits[callee] += 1;
        }
        if matches!(min_up[callee], Some(d) if d < depth_limit) {
            edge_hits[caller] += 1;
        }
    }

    let mut candidates = Vec::new();
    for v in 0..n {
        if anchors_count[v] == 0 {
            continue;
        }
        let node = &graph.nodes[v];
        candidates.push(BfsCandidate {
            function: node.symbol.clone(),
            file: node.file.clone(),
            signals: AnchorSignals {
                anchors_count: anchors_count[v],
                edge_hits: edge_hits[v] + usize::from(is_anchor_node[v]),
                min_depth: best_depth[v].unwrap(),
            },
        });
    }
    candidates.sort_by(compare_candidates);
    candidates.truncate(cap);
    Ok(BfsOutcome { candidates, unresolved })
}

/// Widening pass: when the previous traversal returned fewer than
/// `min_count` candidates, re-run it with the anchor set extended to all
/// crash-, allocation-, and free-stack functions and merge the results,
/// keeping the componentwise-best signals per function.
pub fn widen_and_merge(
    graph: &CallGraph,
    report: &SanitizerReport,
    previous: &BfsOutcome,
    min_count: usize,
    depth_limit: usize,
    cap: usize,
) -> Result<BfsOutcome> {
    if previous.candidates.len() >= min_count {
        return Ok(previous.clone());
    }
    let mut extended: Vec<String> = Vec::new();
    for frame in report
        .crash_stack
        .iter()
        .chain(&report.alloc_stack)
        .chain(&report.free_stack)
    {
        if !extended.contains(&frame.function) {
            extended.push(frame.function.clone());
        }
    }
    let widened = bfs_candidates(graph, &extended, depth_limit, cap)?;

    let mut merged: Vec<BfsCandidate> = Vec::new();
    let mut index: BTreeMap<(String, Option<String>), usize> = BTreeMap::new();
    for cand in previous.candidates.iter().chain(&widened.candidates) {
        let key = (cand.function.clone(), cand.file.clone());
        match index.get(&key) {
            Some(&i) => {
                merged[i].signals = merged[i].signals.merge(cand.signals);
            }
            None => {
                index.insert(key, merged.len());
                merged.push(cand.clone());
            }
        }
    }
    merged.sort_by(compare_candidates);
    merged.truncate(cap);
    Ok(BfsOutcome {
        candidates: merged,
        unresolved: widened.unresolved,
    })
}

/// Variable access kind reported by the dataflow export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    Read,
    Write,
}

/// One function named by the dataflow export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataflowEntry {
    pub symbol: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub access: Access,
}

/// Dataflow-export interchange document: functions reading or writing
/// variables that flow into the crash-line variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataflowDoc {
    pub schema_version: u32,
    pub crash_function: String,
    pub functions: Vec<DataflowEntry>,
}

/// Validate a dataflow export against the crash function named by the
/// report. Entries naming the crash function itself are kept; they fuse
/// with the crash-stack tag downstream.
pub fn ingest_dataflow_candidates(doc: &DataflowDoc, crash_function: &str) -> Result<Vec<DataflowEntry>> {
    if doc.crash_function != crash_function {
        return Err(Error::Schema {
            index: 0,
            reason: format!(
                "dataflow export targets `{}` but the report crashes in `{}`",
                doc.crash_function, crash_function
            ),
        });
    }
    for (i, entry) in doc.functions.iter().enumerate() {
        if entry.symbol.is_empty() {
            return Err(Error::Schema {
                index: i,
                reason: "dataflow entry has an empty symbol".into(),
            });
        }
    }
    Ok(doc.functions.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interchange::SCHEMA_VERSION;

    fn doc(nodes: &[(&str, &str, Option<&str>)], edges: &[(&str, &str)]) -> GraphDoc {
        GraphDoc {
            schema_version: SCHEMA_VERSION,
            nodes: nodes
                .iter()
                .map(|(id, symbol, file)| GraphNode {
                    id: id.to_string(),
                    symbol: symbol.to_string(),
                    file: file.map(str::to_string),
                })
                .collect(),
            edges: edges
                .iter()
                .map(|(caller, callee)| EdgeRecord {
                    caller: caller.to_string(),
                    callee: callee.to_string(),
                })
                .collect(),
        }
    }

    fn symbols(outcome: &BfsOutcome) -> Vec<&str> {
        outcome.candidates.iter().map(|c| c.function.as_str()).collect()
    }

    #[test]
    fn load_validates_counts_and_rejects_dangling_edges() {
        let g = load_graph(&doc(
            &[("1", "a", None), ("2", "b", None)],
            &[("1", "2")],
        ))
        .unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);

        let bad = load_graph(&doc(&[("1", "a", None)], &[("1", "ghost")]));
        match bad {
            Err(Error::Schema { index, .. }) => assert_eq!(index, 0),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_duplicate_ids_and_pairs() {
        assert!(load_graph(&doc(&[("1", "a", None), ("1", "b", None)], &[])).is_err());
        assert!(load_graph(&doc(
            &[("1", "a", Some("x.c")), ("2", "a", Some("x.c"))],
            &[]
        ))
        .is_err());
        // static twins in different files are fine
        assert!(load_graph(&doc(
            &[("1", "a", Some("x.c")), ("2", "a", Some("y.c"))],
            &[]
        ))
        .is_ok());
    }

    #[test]
    fn chain_orders_by_depth() {
        let g = load_graph(&doc(
            &[("1", "a", None), ("2", "b", None), ("3", "c", None)],
            &[("1", "2"), ("2", "3")],
        ))
        .unwrap();
        let out = bfs_candidates(&g, &["a".into()], 2, 300).unwrap();
        assert_eq!(symbols(&out), vec!["a", "b", "c"]);
        let sig: Vec<_> = out.candidates.iter().map(|c| c.signals).collect();
        assert_eq!(sig[0], AnchorSignals { anchors_count: 1, edge_hits: 1, min_depth: 0 });
        assert_eq!(sig[1], AnchorSignals { anchors_count: 1, edge_hits: 1, min_depth: 1 });
        assert_eq!(sig[2], AnchorSignals { anchors_count: 1, edge_hits: 1, min_depth: 2 });
    }

    #[test]
    fn shared_callee_outranks_single_anchor_callee() {
        // anchors x and y both call f; g is called only by x
        let g = load_graph(&doc(
            &[
                ("1", "x", None),
                ("2", "y", None),
                ("3", "f", None),
                ("4", "g", None),
            ],
            &[("1", "3"), ("2", "3"), ("1", "4")],
        ))
        .unwrap();
        let out = bfs_candidates(&g, &["x".into(), "y".into()], 3, 300).unwrap();
        let f = out.candidates.iter().find(|c| c.function == "f").unwrap();
        let gc = out.candidates.iter().find(|c| c.function == "g").unwrap();
        assert_eq!(f.signals.anchors_count, 2);
        assert_eq!(gc.signals.anchors_count, 1);
        let pos = |name: &str| symbols(&out).iter().position(|s| *s == name).unwrap();
        assert!(pos("f") < pos("g"));
    }

    #[test]
    fn upstream_leaf_caller_gets_an_edge_hit() {
        // f calls the anchor a; f is discovered upstream and must carry
        // at least one edge hit despite having no incoming edges
        let g = load_graph(&doc(&[("1", "f", None), ("2", "a", None)], &[("1", "2")])).unwrap();
        let out = bfs_candidates(&g, &["a".into()], 2, 300).unwrap();
        let f = out.candidates.iter().find(|c| c.function == "f").unwrap();
        assert_eq!(f.signals, AnchorSignals { anchors_count: 1, edge_hits: 1, min_depth: 1 });
    }

    #[test]
    fn depth_limit_bounds_discovery() {
        let g = load_graph(&doc(
            &[("1", "a", None), ("2", "b", None), ("3", "c", None)],
            &[("1", "2"), ("2", "3")],
        ))
        .unwrap();
        let out = bfs_candidates(&g, &["a".into()], 1, 300).unwrap();
        assert_eq!(symbols(&out), vec!["a", "b"]);
        assert!(out.candidates.iter().all(|c| c.signals.min_depth <= 1));
    }

    #[test]
    fn unresolved_anchors_are_reported() {
        let g = load_graph(&doc(&[("1", "a", None)], &[])).unwrap();
        let out = bfs_candidates(&g, &["ghost".into(), "a".into()], 2, 300).unwrap();
        assert_eq!(out.unresolved, vec!["ghost"]);
        match bfs_candidates(&g, &["ghost".into()], 2, 300) {
            Err(Error::EmptyAnchorSet) => {}
            other => panic!("expected empty anchor set, got {other:?}"),
        }
    }

    #[test]
    fn cap_truncates() {
        let g = load_graph(&doc(
            &[("1", "a", None), ("2", "b", None), ("3", "c", None)],
            &[("1", "2"), ("1", "3")],
        ))
        .unwrap();
        let out = bfs_candidates(&g, &["a".into()], 2, 2).unwrap();
        assert_eq!(out.candidates.len(), 2);
    }

    #[test]
    fn widen_merges_componentwise_best() {
        use crate::report::parse_report;
        let text = "\
==3==ERROR: AddressSanitizer: heap-use-after-free on address 0x50
    #0 0x1 in a /p/a.c:1
freed by thread T0 here:
    #0 0x2 in d /p/d.c:1
previously allocated by thread T0 here:
    #0 0x3 in e /p/e.c:1
";
        let report = parse_report(text).unwrap();
        let g = load_graph(&doc(
            &[
                ("1", "a", Some("/p/a.c")),
                ("2", "b", None),
                ("3", "d", Some("/p/d.c")),
                ("4", "e", Some("/p/e.c")),
            ],
            &[("1", "2"), ("3", "2"), ("4", "3")],
        ))
        .unwrap();
        let narrow = bfs_candidates(&g, &["a".into()], 2, 300).unwrap();
        assert_eq!(symbols(&narrow), vec!["a", "b"]);

        // |previous| >= min_count leaves the list untouched
        let same = widen_and_merge(&g, &report, &narrow, 2, 2, 300).unwrap();
        assert_eq!(same, narrow);

        let widened = widen_and_merge(&g, &report, &narrow, 10, 2, 300).unwrap();
        // superset of the narrow run
        for cand in &narrow.candidates {
            assert!(widened.candidates.iter().any(|c| c.function == cand.function));
        }
        // b is now reached from three anchors (a, d downstream; e via d)
        let b = widened.candidates.iter().find(|c| c.function == "b").unwrap();
        assert_eq!(b.signals.anchors_count, 3);
        // merged signals keep the componentwise best
        assert!(widened
            .candidates
            .iter()
            .all(|c| c.signals.anchors_count >= 1 && c.signals.min_depth <= 2));
    }

    #[test]
    fn dataflow_ingestion_validates_and_passes_through() {
        let doc = DataflowDoc {
            schema_version: SCHEMA_VERSION,
            crash_function: "do_copy".into(),
            functions: vec![
                DataflowEntry { symbol: "parse_header".into(), file: Some("src/parse.c".into()), access: Access::Write },
                DataflowEntry { symbol: "do_copy".into(), file: Some("src/copy.c".into()), access: Access::Read },
            ],
        };
        let entries = ingest_dataflow_candidates(&doc, "do_copy").unwrap();
        assert_eq!(entries.len(), 2);
        // the crash function itself is retained, not filtered here
        assert!(entries.iter().any(|e| e.symbol == "do_copy"));
        assert!(ingest_dataflow_candidates(&doc, "other").is_err());

        let empty = DataflowDoc {
            schema_version: SCHEMA_VERSION,
            crash_function: "do_copy".into(),
            functions: vec![],
        };
        assert!(ingest_dataflow_candidates(&empty, "do_copy").unwrap().is_empty());
    }
}
