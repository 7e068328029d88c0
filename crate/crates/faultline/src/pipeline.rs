//! Stage wiring: evidence collection into the FoI pool, ranking, and
//! the end-to-end repair driver.

use std::path::{Path, PathBuf};

use crate::callgraph::{
    bfs_candidates, ingest_dataflow_candidates, load_graph, widen_and_merge, BfsOutcome,
    DataflowDoc, GraphDoc,
};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::pool::{filter_pool, merge_pool, EvidenceTag, FoiCandidate, TagMeta};
use crate::ranking::{rank_and_diversify, score_candidate, ScoredCandidate};
use crate::repair::{
    assemble_prompt, excerpt_for, run_agent, run_fuzz_oracle, tier1_classify, FunctionIndex,
    LlmAdapter, OutcomeClass, PatchArtifact, PatchOutcome, RcaEntry, ShellOracle, StageReport,
    ToolSurface, Transcript, VerifierResult, WorkingCopy,
};
use crate::report::{anchors_from_report, SanitizerReport, StackFrame};
use crate::traces::{family_stats, ExecutionTrace, OccurrenceStats};

const EXCERPT_LINES: usize = 40;

fn frames_to_candidates(frames: &[StackFrame], tag: EvidenceTag) -> Vec<FoiCandidate> {
    frames
        .iter()
        .map(|frame| {
            FoiCandidate::tagged(
                frame.function.clone(),
                frame.file.clone(),
                tag,
                Some(TagMeta::Ordinal(frame.ordinal as usize)),
            )
        })
        .collect()
}

/// Evidence source lists from the parsed report, one per stack section.
pub fn report_sources(report: &SanitizerReport) -> Vec<Vec<FoiCandidate>> {
    vec![
        frames_to_candidates(&report.crash_stack, EvidenceTag::CrashStack),
        frames_to_candidates(&report.alloc_stack, EvidenceTag::AllocStack),
        frames_to_candidates(&report.free_stack, EvidenceTag::FreeStack),
        frames_to_candidates(&report.object_origin, EvidenceTag::ObjectOrigin),
    ]
}

/// Call-trace candidates with per-function occurrence fractions.
pub fn trace_candidates(stats: &OccurrenceStats) -> Vec<FoiCandidate> {
    stats
        .functions()
        .map(|(function, _)| {
            FoiCandidate::tagged(
                function.to_string(),
                stats.file_of(function).map(str::to_string),
                EvidenceTag::CallTrace,
                Some(TagMeta::Fraction(stats.fraction(function))),
            )
        })
        .collect()
}

/// Variable-dependency candidates from the dataflow export.
pub fn dataflow_candidates(doc: &DataflowDoc, crash_function: &str) -> Result<Vec<FoiCandidate>> {
    Ok(ingest_dataflow_candidates(doc, crash_function)?
        .into_iter()
        .map(|entry| {
            FoiCandidate::tagged(
                entry.symbol,
                entry.file,
                EvidenceTag::VarDep,
                Some(TagMeta::Access(entry.access)),
            )
        })
        .collect())
}

/// Attach traversal signals to pool candidates that the BFS also
/// discovered. Graph-only functions carry no evidence tag and do not
/// enter the pool; they only decorate what the collectors produced.
pub fn decorate_with_signals(pool: &mut [FoiCandidate], bfs: &BfsOutcome) {
    for candidate in pool.iter_mut() {
        let hit = bfs.candidates.iter().find(|c| {
            c.function == candidate.function
                && match (&c.file, &candidate.file) {
                    (Some(a), Some(b)) => a == b,
                    _ => true,
                }
        });
        if let Some(hit) = hit {
            candidate.signals = Some(match candidate.signals {
                Some(existing) => existing.merge(hit.signals),
                None => hit.signals,
            });
        }
    }
}

/// Output of the ranking pipeline.
#[derive(Debug, Clone)]
pub struct RankArtifacts {
    /// Merged, filtered FoI pool before scoring.
    pub pool: Vec<FoiCandidate>,
    /// Diversified top-k list.
    pub ranked: Vec<ScoredCandidate>,
    /// Report anchors absent from the call graph.
    pub unresolved_anchors: Vec<String>,
}

/// Stage 1 + Stage 2: collect evidence, merge and filter the pool,
/// score per crash class, and produce the diversified top-k ranking.
/// The report is mandatory; each other input is optional and its
/// absence simply narrows the evidence.
pub fn run_rank(
    report: &SanitizerReport,
    traces: Option<&[ExecutionTrace]>,
    graph: Option<&GraphDoc>,
    dataflow: Option<&DataflowDoc>,
    config: &PipelineConfig,
) -> Result<RankArtifacts> {
    config.ranking.validate()?;
    let mut sources = report_sources(report);
    if let Some(traces) = traces {
        if !traces.is_empty() {
            let stats = family_stats(traces)?;
            sources.push(trace_candidates(&stats));
        }
    }
    if let Some(doc) = dataflow {
        let crash_function = report
            .crash_stack
            .first()
            .map(|frame| frame.function.as_str())
            .ok_or_else(|| Error::Domain("report has no crash frame".into()))?;
        sources.push(dataflow_candidates(doc, crash_function)?);
    }
    let mut pool = merge_pool(&sources);

    let mut unresolved_anchors = Vec::new();
    if let Some(doc) = graph {
        let graph = load_graph(doc)?;
        let anchors = anchors_from_report(report, config.bfs.anchor_limit);
        let outcome = bfs_candidates(&graph, &anchors, config.bfs.depth_limit, config.bfs.cap)?;
        let outcome = widen_and_merge(
            &graph,
            report,
            &outcome,
            config.bfs.min_count,
            config.bfs.depth_limit,
            config.bfs.cap,
        )?;
        decorate_with_signals(&mut pool, &outcome);
        unresolved_anchors = outcome.unresolved;
    }

    let pool = filter_pool(&pool, &config.filter);
    let scored: Vec<ScoredCandidate> = pool
        .iter()
        .map(|candidate| score_candidate(candidate, report.crash_class, &config.ranking))
        .collect::<Result<_>>()?;
    let ranked = rank_and_diversify(&scored, &config.ranking);
    Ok(RankArtifacts { pool, ranked, unresolved_anchors })
}

/// Everything a finished repair run leaves behind.
#[derive(Debug)]
pub struct RepairArtifacts {
    pub outcome: PatchOutcome,
    pub patch: Option<PatchArtifact>,
    pub transcript: Transcript,
}

/// Crash-variant inputs recorded under a variants directory (one
/// subdirectory per variant, each holding an `input` file), used by the
/// tier-1 fuzz oracle.
pub fn variant_inputs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut inputs = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let input = path.join("input");
        if path.is_dir() && input.is_file() {
            inputs.push(input);
        }
    }
    inputs.sort();
    Ok(inputs)
}

/// Stage 3 driver: stamp a fresh working copy of `project` into
/// `work_dir`, run the agent over it, then classify the result under
/// the tier-1 oracles (the fuzz-variant oracle runs once, after the
/// loop).
#[allow(clippy::too_many_arguments)]
pub fn run_repair(
    project: &Path,
    work_dir: &Path,
    report: &SanitizerReport,
    ranked: &[ScoredCandidate],
    poc: Option<&Path>,
    variants: &[PathBuf],
    llm: &mut dyn LlmAdapter,
    config: &PipelineConfig,
) -> Result<RepairArtifacts> {
    std::fs::create_dir_all(work_dir)?;
    crate::repair::copy_tree(project, work_dir)?;
    let mut copy = WorkingCopy::new(work_dir)?;
    let index = FunctionIndex::build(&copy)?;

    let entries: Vec<RcaEntry> = ranked
        .iter()
        .take(config.run.top_k_context)
        .enumerate()
        .map(|(i, scored)| RcaEntry {
            rank: i + 1,
            scored: scored.clone(),
            excerpt: excerpt_for(
                &index,
                &scored.candidate.function,
                scored.candidate.file.as_deref(),
                EXCERPT_LINES,
            ),
        })
        .collect();
    let prompt = assemble_prompt(&report.raw_text, &entries)?;

    let oracle = ShellOracle::new(config.run.oracle.clone());
    let mut surface = ToolSurface::new(
        &mut copy,
        &oracle,
        &config.run,
        poc.map(Path::to_path_buf),
        index,
        entries,
    );
    let run = run_agent(llm, &mut surface, &config.run, prompt)?;
    let last_verify = surface.last_verifier().cloned();

    let outcome = match &run.patch {
        Some(_) => {
            let verify = last_verify.expect("a patch implies a recorded all-pass validation");
            let fuzz = run_fuzz_oracle(&oracle, copy.root(), variants)?;
            let class = tier1_classify(&verify, fuzz.status);
            PatchOutcome { class, verify, fuzz }
        }
        None => {
            let verify = last_verify
                .unwrap_or_else(|| VerifierResult::all_skipped("validate_patch never ran"));
            PatchOutcome {
                class: OutcomeClass::NoPatch,
                verify,
                fuzz: StageReport::skipped("skipped: no patch to fuzz"),
            }
        }
    };
    Ok(RepairArtifacts { outcome, patch: run.patch, transcript: run.transcript })
}
