//! Thin command-line front end over the library pipeline.
//!
//! Exit codes: 0 success, 1 pipeline-ran-but-negative-outcome (repair
//! without a plausible patch), 2 input or configuration error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use faultline::assessment::{stats_report, RatingStore, StatsReport};
use faultline::callgraph::{DataflowDoc, GraphDoc};
use faultline::config::{FuzzerKind, LlmKind, PipelineConfig};
use faultline::interchange::{
    read_doc, write_doc, OutcomeDoc, PoolDoc, RankedDoc, ReportDoc, SCHEMA_VERSION,
};
use faultline::pipeline::{run_rank, run_repair, variant_inputs, RankArtifacts};
use faultline::repair::{HttpLlm, LlmAdapter, OutcomeClass, ScriptedLlm};
use faultline::report::{parse_report, SanitizerReport};
use faultline::traces::{load_traces, ExecutionTrace};
use faultline::{Error, Result};

#[derive(Parser)]
#[command(
    name = "faultline",
    version,
    about = "Crash-evidence fault localization and agentic patch orchestration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a sanitizer crash report into its interchange document.
    ParseReport(ParseReportArgs),
    /// Collect evidence, merge the FoI pool, and emit the ranked list.
    Rank(PipelineArgs),
    /// Run the agentic repair loop and classify the outcome.
    Repair(PipelineArgs),
    /// Agreement and sign-test statistics over a ratings store.
    Stats(StatsArgs),
}

#[derive(Args)]
struct ParseReportArgs {
    /// Sanitizer report text file.
    #[arg(long)]
    report: PathBuf,
    /// Output directory (prints to stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LlmFlag {
    Real,
    Mock,
}

#[derive(Clone, Copy, ValueEnum)]
enum FuzzerFlag {
    Real,
    Stub,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline configuration file; flags below override its paths.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sanitizer report text file.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Execution-trace family (JSON lines).
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Static call-graph document.
    #[arg(long)]
    callgraph: Option<PathBuf>,
    /// Dataflow export document.
    #[arg(long)]
    dataflow: Option<PathBuf>,
    /// Project source tree (repair only).
    #[arg(long)]
    project: Option<PathBuf>,
    /// Crashing proof-of-concept input (repair only).
    #[arg(long)]
    poc: Option<PathBuf>,
    /// Language-model adapter selection.
    #[arg(long, value_enum)]
    adapter_llm: Option<LlmFlag>,
    /// Fuzzer adapter selection.
    #[arg(long, value_enum)]
    adapter_fuzzer: Option<FuzzerFlag>,
    /// Run seed (recorded in artifacts; anonymization and sampling).
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact output directory.
    #[arg(long, default_value = "faultline-out")]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Append-only ratings store (JSON lines).
    ratings: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::ParseReport(args) => cmd_parse_report(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Repair(args) => cmd_repair(args),
        Command::Stats(args) => cmd_stats(args),
    }
}

fn cmd_parse_report(args: ParseReportArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.report)?;
    let report = parse_report(&text)?;
    let doc = ReportDoc::new(report);
    match args.out {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("report.json");
            write_doc(&path, &doc)?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", faultline::interchange::render_doc(&doc)?),
    }
    Ok(0)
}

/// Merge CLI flags over the loaded (or default) configuration.
fn effective_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let overrides = [
        (&args.report, &mut config.paths.report),
        (&args.traces, &mut config.paths.traces),
        (&args.callgraph, &mut config.paths.callgraph),
        (&args.dataflow, &mut config.paths.dataflow),
        (&args.project, &mut config.paths.project),
        (&args.poc, &mut config.paths.poc),
    ];
    for (flag, slot) in overrides {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    if let Some(flag) = args.adapter_llm {
        config.adapters.llm = match flag {
            LlmFlag::Real => LlmKind::Real,
            LlmFlag::Mock => LlmKind::Mock,
        };
    }
    if let Some(flag) = args.adapter_fuzzer {
        config.adapters.fuzzer = match flag {
            FuzzerFlag::Real => FuzzerKind::Real,
            FuzzerFlag::Stub => FuzzerKind::Stub,
        };
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

struct RankInputs {
    report: SanitizerReport,
    traces: Option<Vec<ExecutionTrace>>,
    graph: Option<GraphDoc>,
    dataflow: Option<DataflowDoc>,
}

fn load_rank_inputs(config: &PipelineConfig) -> Result<RankInputs> {
    let report_path = config
        .paths
        .report
        .as_ref()
        .ok_or_else(|| Error::Domain("a --report path is required".into()))?;
    let report = parse_report(&std::fs::read_to_string(report_path)?)?;
    let traces = match &config.paths.traces {
        Some(path) => Some(load_traces(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    let graph = match &config.paths.callgraph {
        Some(path) => Some(read_doc::<GraphDoc>(path)?),
        None => None,
    };
    let dataflow = match &config.paths.dataflow {
        Some(path) => Some(read_doc::<DataflowDoc>(path)?),
        None => None,
    };
    Ok(RankInputs { report, traces, graph, dataflow })
}

fn rank_with(config: &PipelineConfig, inputs: &RankInputs) -> Result<RankArtifacts> {
    run_rank(
        &inputs.report,
        inputs.traces.as_deref(),
        inputs.graph.as_ref(),
        inputs.dataflow.as_ref(),
        config,
    )
}

fn write_rank_artifacts(out: &Path, artifacts: &RankArtifacts) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_doc(
        &out.join("pool.json"),
        &PoolDoc { schema_version: SCHEMA_VERSION, candidates: artifacts.pool.clone() },
    )?;
    write_doc(&out.join("ranked.json"), &RankedDoc::from_scored(&artifacts.ranked))?;
    Ok(())
}

fn cmd_rank(args: PipelineArgs) -> Result<i32> {
    let config = effective_config(&args)?;
    let inputs = load_rank_inputs(&config)?;
    let artifacts = rank_with(&config, &inputs)?;
    write_rank_artifacts(&args.out, &artifacts)?;
    for (i, scored) in artifacts.ranked.iter().enumerate() {
        println!(
            "{:>3}  {:<30} {:<24} {:.4}",
            i + 1,
            scored.candidate.function,
            scored.candidate.file.as_deref().unwrap_or("-"),
            scored.score
        );
    }
    if !artifacts.unresolved_anchors.is_empty() {
        eprintln!("unresolved anchors: {}", artifacts.unresolved_anchors.join(", "));
    }
    println!("wrote {}", args.out.join("ranked.json").display());
    Ok(0)
}

fn cmd_repair(args: PipelineArgs) -> Result<i32> {
    let config = effective_config(&args)?;
    let inputs = load_rank_inputs(&config)?;
    let artifacts = rank_with(&config, &inputs)?;
    write_rank_artifacts(&args.out, &artifacts)?;

    let project = config
        .paths
        .project
        .as_ref()
        .ok_or_else(|| Error::Domain("repair requires a --project source tree".into()))?;
    if !project.is_dir() {
        return Err(Error::Domain(format!(
            "project tree {} does not exist",
            project.display()
        )));
    }
    if let Some(poc) = &config.paths.poc {
        if !poc.is_file() {
            return Err(Error::Domain(format!(
                "poc input {} does not exist",
                poc.display()
            )));
        }
    }

    let mut llm: Box<dyn LlmAdapter> = match config.adapters.llm {
        LlmKind::Mock => {
            let decisions = config.adapters.mock_decisions.as_ref().ok_or_else(|| {
                Error::Domain("mock llm adapter requires mock_decisions in the config".into())
            })?;
            Box::new(ScriptedLlm::load(decisions)?)
        }
        LlmKind::Real => Box::new(HttpLlm {
            endpoint: config
                .adapters
                .llm_endpoint
                .clone()
                .ok_or_else(|| Error::Domain("real llm adapter requires llm_endpoint".into()))?,
            model: config.adapters.llm_model.clone().unwrap_or_else(|| "default".into()),
            key_env: config.adapters.llm_key_env.clone(),
        }),
    };

    let variants: Vec<PathBuf> = match (config.adapters.fuzzer, &config.paths.variants) {
        (FuzzerKind::Stub, Some(dir)) => variant_inputs(dir)?,
        (FuzzerKind::Stub, None) => Vec::new(),
        (FuzzerKind::Real, _) => {
            let template = config.adapters.fuzzer_command.clone().ok_or_else(|| {
                Error::Domain("real fuzzer adapter requires fuzzer_command".into())
            })?;
            let poc = config.paths.poc.as_ref().ok_or_else(|| {
                Error::Domain("crash exploration requires a --poc input".into())
            })?;
            let fuzzer = faultline::traces::CommandFuzzer {
                template,
                output_dir: args.out.join("exploration"),
            };
            faultline::traces::run_crash_exploration(
                &fuzzer,
                poc,
                std::time::Duration::from_secs(config.run.oracle.fuzz_budget_secs),
            )?
            .into_iter()
            .filter(|v| v.crashes)
            .map(|v| v.input_ref)
            .collect()
        }
    };

    let work_dir = args.out.join("work");
    if work_dir.exists() {
        std::fs::remove_dir_all(&work_dir)?;
    }
    let repair = run_repair(
        project,
        &work_dir,
        &inputs.report,
        &artifacts.ranked,
        config.paths.poc.as_deref(),
        &variants,
        llm.as_mut(),
        &config,
    )?;

    std::fs::write(
        args.out.join("transcript.json"),
        serde_json::to_string_pretty(&repair.transcript)? + "\n",
    )?;
    if let Some(patch) = &repair.patch {
        std::fs::write(args.out.join("patch.diff"), &patch.diff)?;
    }
    let outcome_doc = OutcomeDoc {
        schema_version: SCHEMA_VERSION,
        class: repair.outcome.class,
        verify: repair.outcome.verify.clone(),
        fuzz: repair.outcome.fuzz.clone(),
        turns: repair.transcript.turns.len(),
        approx_tokens: repair.transcript.approx_tokens,
        files_changed: repair.patch.as_ref().map(|p| p.files_changed.clone()).unwrap_or_default(),
    };
    write_doc(&args.out.join("outcome.json"), &outcome_doc)?;

    println!(
        "outcome: {:?} after {} turns (artifacts in {})",
        repair.outcome.class,
        repair.transcript.turns.len(),
        args.out.display()
    );
    Ok(if repair.outcome.class == OutcomeClass::PlausiblePatch { 0 } else { 1 })
}

fn render_stats(report: &StatsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<32} {:<8} {:>8} {:>8} {:>8}\n",
        "label (positive class)", "tool", "prev(+)", "agree", "kappa"
    ));
    for row in &report.rows {
        let tool = row.tool.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        let prev = row
            .stats
            .prevalence_positive
            .map(|p| format!("{p:.3}"))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<32} {:<8} {:>8} {:>8.3} {:>8.3}\n",
            row.label, tool, prev, row.stats.raw_agreement, row.stats.kappa
        ));
    }
    if let Some(verdicts) = &report.verdicts {
        out.push_str(&format!(
            "\npairwise verdicts: tool_a wins {} | tool_b wins {} | ties {}\n",
            verdicts.wins_a, verdicts.wins_b, verdicts.ties
        ));
        if let Some(sign) = &verdicts.sign_test {
            out.push_str(&format!(
                "sign test over {} decisive pairs: p = {:.4}, win-rate {:.1}%, 95% CI ({:.1}%, {:.1}%)\n",
                sign.decisive,
                sign.p_value,
                sign.win_rate * 100.0,
                sign.ci_low * 100.0,
                sign.ci_high * 100.0
            ));
        }
    }
    out
}

fn cmd_stats(args: StatsArgs) -> Result<i32> {
    let store = RatingStore::load(&args.ratings)?;
    let report = stats_report(&store)?;
    print!("{}", render_stats(&report));
    Ok(0)
}
