//! Stage 3: the agentic repair loop and its tier-1 outcome ladder.

pub mod agent;
pub mod prompt;
pub mod tools;
pub mod verifier;
pub mod worktree;

use serde::{Deserialize, Serialize};

pub use agent::{
    chat_messages, run_agent, Decision, HttpLlm, LlmAdapter, PatchArtifact, RepeatingLlm,
    RunOutcome, ScriptedLlm, Transcript, TurnRecord,
};
pub use prompt::{assemble_prompt, render_detail, render_summary, RcaEntry, PROMPT_TEMPLATE};
pub use tools::{excerpt_for, render_verifier, FunctionIndex, FunctionInfo, ToolCall, ToolSurface};
pub use verifier::{
    run_fuzz_oracle, run_verifier, Oracle, ScriptedOracle, ShellOracle, StageReport, StageStatus,
    VerifierResult,
};
pub use worktree::{apply_diff, copy_tree, EditRecord, SubstitutionOutcome, WorkingCopy};

/// Tier-1 outcome ladder, ordered weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    NoPatch,
    PartialPatch,
    PlausiblePatch,
}

/// Final classified outcome with the oracle evidence behind it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchOutcome {
    pub class: OutcomeClass,
    pub verify: VerifierResult,
    pub fuzz: StageReport,
}

/// Classify under the progressively stricter oracles: any compile /
/// replay / test shortfall means no patch; all three passing earns at
/// least a partial patch; clearing the fuzz-variant oracle as well
/// makes it plausible. A skipped fuzz stage is fail-safe: the stricter
/// oracle was not exercised, so the patch stays partial.
pub fn tier1_classify(verify: &VerifierResult, fuzz: StageStatus) -> OutcomeClass {
    if !verify.all_pass() {
        return OutcomeClass::NoPatch;
    }
    match fuzz {
        StageStatus::Pass => OutcomeClass::PlausiblePatch,
        StageStatus::Fail | StageStatus::Skipped => OutcomeClass::PartialPatch,
    }
}
