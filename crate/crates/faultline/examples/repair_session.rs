//! Drive a complete repair session in-process over the bundled
//! mini-project: rank the recorded evidence, hand the ranked list to a
//! scripted agent, and verify the patch with the compile / replay /
//! test / fuzz oracles.
//!
//! Run with `cargo run --example repair_session`.

use std::path::Path;

use faultline::callgraph::{DataflowDoc, GraphDoc};
use faultline::config::PipelineConfig;
use faultline::pipeline::{run_rank, run_repair, variant_inputs};
use faultline::repair::ScriptedLlm;
use faultline::report::parse_report;
use faultline::traces::load_traces;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_project");
    let config = PipelineConfig::load(&root.join("config.json")).unwrap();

    // Stage 1 + 2 over the recorded evidence.
    let report = parse_report(
        &std::fs::read_to_string(config.paths.report.as_ref().unwrap()).unwrap(),
    )
    .unwrap();
    let traces = load_traces(
        &std::fs::read_to_string(config.paths.traces.as_ref().unwrap()).unwrap(),
    )
    .unwrap();
    let graph: GraphDoc = serde_json::from_str(
        &std::fs::read_to_string(config.paths.callgraph.as_ref().unwrap()).unwrap(),
    )
    .unwrap();
    let dataflow: DataflowDoc = serde_json::from_str(
        &std::fs::read_to_string(config.paths.dataflow.as_ref().unwrap()).unwrap(),
    )
    .unwrap();
    let ranked = run_rank(&report, Some(&traces), Some(&graph), Some(&dataflow), &config).unwrap();
    println!("ranked candidates handed to the agent:");
    for (i, scored) in ranked.ranked.iter().enumerate() {
        println!(
            "  {}. {} ({}) score {:.4}",
            i + 1,
            scored.candidate.function,
            scored.candidate.file.as_deref().unwrap_or("-"),
            scored.score
        );
    }
    println!();

    // Stage 3: a scripted language model replays a recorded decision
    // sequence (inspect the ranking, view a function, edit, validate).
    let mut llm = ScriptedLlm::load(config.adapters.mock_decisions.as_ref().unwrap()).unwrap();
    let variants = variant_inputs(config.paths.variants.as_ref().unwrap()).unwrap();

    let work = std::env::temp_dir().join(format!("faultline-example-{}", std::process::id()));
    if work.exists() {
        std::fs::remove_dir_all(&work).unwrap();
    }
    let artifacts = run_repair(
        config.paths.project.as_ref().unwrap(),
        &work,
        &report,
        &ranked.ranked,
        config.paths.poc.as_deref(),
        &variants,
        &mut llm,
        &config,
    )
    .unwrap();

    println!(
        "outcome: {:?} after {} turns",
        artifacts.outcome.class,
        artifacts.transcript.turns.len()
    );
    println!("oracle evidence:");
    println!("  compile: {:?}", artifacts.outcome.verify.compile.status);
    println!("  replay:  {:?}", artifacts.outcome.verify.poc_replay.status);
    println!("  tests:   {:?}", artifacts.outcome.verify.tests.status);
    println!("  fuzz:    {:?} ({})", artifacts.outcome.fuzz.status, artifacts.outcome.fuzz.output.trim());
    println!();
    if let Some(patch) = &artifacts.patch {
        println!("patch over baseline {}:", patch.baseline_id);
        print!("{}", patch.diff);
    }

    std::fs::remove_dir_all(&work).ok();
}
