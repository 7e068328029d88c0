//! The agentic repair loop: turn-capped tool-calling conversation over
//! the tool surface, with scripted and HTTP language-model adapters.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::repair::tools::{ToolCall, ToolSurface};

/// One model turn: either a structured tool call or free text. Free
/// text never triggers a tool; only the structured form does.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Decision {
    Call(ToolCall),
    Text { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: usize,
    pub decision: Decision,
    /// Tool output returned to the model; absent for text turns.
    pub reply: Option<String>,
}

/// Full record of a run. Carries no wall-clock data, so two identical
/// runs produce byte-identical transcripts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub prompt: String,
    pub turns: Vec<TurnRecord>,
    /// Rough cost proxy: total conversation characters / 4.
    pub approx_tokens: usize,
    pub aborted: Option<String>,
}

/// Unified diff of the working copy against its baseline at the moment
/// the verifier first reported all checks passing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchArtifact {
    pub diff: String,
    pub baseline_id: String,
    pub files_changed: Vec<String>,
}

impl PatchArtifact {
    fn from_diff(diff: String, baseline_id: String) -> PatchArtifact {
        let files_changed = diff
            .lines()
            .filter_map(|line| line.strip_prefix("diff --git a/"))
            .filter_map(|rest| rest.split(" b/").next())
            .map(str::to_string)
            .collect();
        PatchArtifact { diff, baseline_id, files_changed }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub patch: Option<PatchArtifact>,
    pub transcript: Transcript,
}

/// Chat-with-tool-calls contract. The adapter sees the transcript so
/// far and produces the next decision.
pub trait LlmAdapter {
    fn next_turn(&mut self, transcript: &Transcript) -> Result<Decision>;
}

/// Replays a recorded decision list; exhausting the script is an
/// adapter error so a broken fixture can never loop silently.
#[derive(Debug, Clone)]
pub struct ScriptedLlm {
    decisions: VecDeque<Decision>,
}

impl ScriptedLlm {
    pub fn from_decisions(decisions: Vec<Decision>) -> ScriptedLlm {
        ScriptedLlm { decisions: decisions.into() }
    }

    /// Load a JSON array of decisions.
    pub fn load(path: &Path) -> Result<ScriptedLlm> {
        let text = std::fs::read_to_string(path)?;
        let decisions: Vec<Decision> = serde_json::from_str(&text)?;
        Ok(ScriptedLlm::from_decisions(decisions))
    }
}

impl LlmAdapter for ScriptedLlm {
    fn next_turn(&mut self, _transcript: &Transcript) -> Result<Decision> {
        self.decisions
            .pop_front()
            .ok_or_else(|| Error::Adapter("scripted decision list exhausted".into()))
    }
}

/// Emits the same decision every turn (useful for exercising the turn
/// cap).
#[derive(Debug, Clone)]
pub struct RepeatingLlm {
    pub decision: Decision,
}

impl LlmAdapter for RepeatingLlm {
    fn next_turn(&mut self, _transcript: &Transcript) -> Result<Decision> {
        Ok(self.decision.clone())
    }
}

/// Transcript rendered as chat messages for an HTTP chat-completions
/// endpoint: system prompt, then alternating assistant decisions and
/// user tool results.
pub fn chat_messages(transcript: &Transcript) -> Vec<serde_json::Value> {
    let mut messages = vec![serde_json::json!({
        "role": "system",
        "content": transcript.prompt,
    })];
    for turn in &transcript.turns {
        let decision = serde_json::to_string(&turn.decision).expect("decision serializes");
        messages.push(serde_json::json!({"role": "assistant", "content": decision}));
        let reply = turn.reply.as_deref().unwrap_or("(no tool executed)");
        messages.push(serde_json::json!({"role": "user", "content": reply}));
    }
    messages
}

/// Real language-model adapter speaking an OpenAI-style chat API. The
/// model is instructed (by the system prompt) to answer with one
/// decision object per turn; non-JSON replies count as free text.
#[derive(Debug, Clone)]
pub struct HttpLlm {
    pub endpoint: String,
    pub model: String,
    pub key_env: String,
}

impl LlmAdapter for HttpLlm {
    fn next_turn(&mut self, transcript: &Transcript) -> Result<Decision> {
        let key = std::env::var(&self.key_env).map_err(|_| {
            Error::Adapter(format!("credential variable {} is not set", self.key_env))
        })?;
        let body = serde_json::json!({
            "model": self.model,
            "messages": chat_messages(transcript),
        });
        let response = ureq::post(&self.endpoint)
            .set("Authorization", &format!("Bearer {key}"))
            .send_json(body)
            .map_err(|err| Error::Adapter(format!("llm request failed: {err}")))?;
        let payload: serde_json::Value = response
            .into_json()
            .map_err(|err| Error::Adapter(format!("llm response was not json: {err}")))?;
        let content = payload["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| Error::Adapter("llm response carried no message content".into()))?;
        Ok(serde_json::from_str::<Decision>(content)
            .unwrap_or(Decision::Text { text: content.to_string() }))
    }
}

/// Drive the conversation until the first all-pass validation, an
/// adapter error, or the turn cap. The transcript is always returned,
/// even for aborted runs.
pub fn run_agent(
    llm: &mut dyn LlmAdapter,
    surface: &mut ToolSurface<'_>,
    config: &RunConfig,
    prompt: String,
) -> Result<RunOutcome> {
    config.validate()?;
    let mut chars = prompt.len();
    let mut transcript =
        Transcript { prompt, turns: Vec::new(), approx_tokens: 0, aborted: None };
    let mut patch = None;

    for turn in 1..=config.turn_cap {
        let decision = match llm.next_turn(&transcript) {
            Ok(decision) => decision,
            Err(err) => {
                transcript.aborted = Some(format!("adapter: {err}"));
                break;
            }
        };
        match decision {
            Decision::Text { text } => {
                chars += text.len();
                transcript.turns.push(TurnRecord {
                    turn,
                    decision: Decision::Text { text },
                    reply: None,
                });
            }
            Decision::Call(call) => {
                chars += call.name().len();
                let reply = match surface.dispatch(turn, &call) {
                    Ok(reply) => reply,
                    Err(err) => {
                        transcript.turns.push(TurnRecord {
                            turn,
                            decision: Decision::Call(call),
                            reply: Some(format!("run aborted: {err}")),
                        });
                        transcript.aborted = Some(err.to_string());
                        break;
                    }
                };
                chars += reply.text.len();
                let done = reply.all_checks_passed;
                transcript.turns.push(TurnRecord {
                    turn,
                    decision: Decision::Call(call),
                    reply: Some(reply.text),
                });
                if done {
                    let copy = surface.working_copy();
                    let diff = copy.diff()?;
                    patch = Some(PatchArtifact::from_diff(diff, copy.baseline_id().to_string()));
                    break;
                }
            }
        }
    }

    transcript.approx_tokens = chars / 4;
    Ok(RunOutcome { patch, transcript })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::OracleCommands;
    use crate::pool::{EvidenceTag, FoiCandidate};
    use crate::ranking::{score_candidate, RankingConfig};
    use crate::repair::prompt::RcaEntry;
    use crate::repair::tools::FunctionIndex;
    use crate::repair::verifier::ShellOracle;
    use crate::repair::worktree::WorkingCopy;
    use crate::report::CrashClass;

    fn project() -> (tempfile::TempDir, WorkingCopy, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src");
        std::fs::create_dir_all(&src).unwrap();
        std::fs::write(
            src.join("main.c"),
            "int check(int len) {\n    return len;\n}\n",
        )
        .unwrap();
        let poc = dir.path().join("poc");
        std::fs::write(&poc, b"crash-input").unwrap();
        let copy = WorkingCopy::new(&src).unwrap();
        (dir, copy, poc)
    }

    fn rca_fixture() -> Vec<RcaEntry> {
        let candidate = FoiCandidate::tagged(
            "check",
            Some("main.c".to_string()),
            EvidenceTag::CrashStack,
            None,
        );
        let scored =
            score_candidate(&candidate, CrashClass::Spatial, &RankingConfig::default()).unwrap();
        vec![RcaEntry { rank: 1, scored, excerpt: None }]
    }

    fn passing_oracle() -> ShellOracle {
        ShellOracle::new(OracleCommands {
            compile: "true".into(),
            replay: "true".into(),
            tests: "true".into(),
            stage_timeout_secs: 5,
            fuzz_budget_secs: 1,
        })
    }

    fn run_script(
        copy: &mut WorkingCopy,
        poc: &Path,
        decisions: Vec<Decision>,
        config: &RunConfig,
    ) -> RunOutcome {
        let oracle = passing_oracle();
        let index = FunctionIndex::build(copy).unwrap();
        let mut surface =
            ToolSurface::new(copy, &oracle, config, Some(poc.to_path_buf()), index, rca_fixture());
        let mut llm = ScriptedLlm::from_decisions(decisions);
        run_agent(&mut llm, &mut surface, config, "prompt".into()).unwrap()
    }

    #[test]
    fn scripted_run_emits_a_patch_and_stops_immediately() {
        let (_dir, mut copy, poc) = project();
        let decisions = vec![
            Decision::Call(ToolCall::EditFile {
                path: "main.c".into(),
                old_text: "return len;".into(),
                new_text: "return len > 0 ? len : 0;".into(),
            }),
            Decision::Call(ToolCall::ValidatePatch),
            // Never reached: the run terminates on the all-pass above.
            Decision::Call(ToolCall::RevertEdits),
        ];
        let outcome = run_script(&mut copy, &poc, decisions, &RunConfig::default());
        assert_eq!(outcome.transcript.turns.len(), 2);
        assert!(outcome.transcript.aborted.is_none());
        let patch = outcome.patch.expect("patch emitted");
        assert_eq!(patch.files_changed, vec!["main.c".to_string()]);
        assert!(patch.diff.contains("+    return len > 0 ? len : 0;"));
        assert!(outcome.transcript.approx_tokens > 0);
    }

    #[test]
    fn turn_cap_exhaustion_emits_no_patch() {
        let (_dir, mut copy, poc) = project();
        let config = RunConfig { turn_cap: 5, ..RunConfig::default() };
        let oracle = passing_oracle();
        let index = FunctionIndex::build(&copy).unwrap();
        let mut surface =
            ToolSurface::new(&mut copy, &oracle, &config, Some(poc), index, rca_fixture());
        let mut llm = RepeatingLlm {
            decision: Decision::Text { text: "thinking about the bug".into() },
        };
        let outcome = run_agent(&mut llm, &mut surface, &config, "prompt".into()).unwrap();
        assert!(outcome.patch.is_none());
        assert_eq!(outcome.transcript.turns.len(), 5);
        assert!(outcome.transcript.aborted.is_none());
    }

    #[test]
    fn adapter_exhaustion_aborts_but_keeps_the_transcript() {
        let (_dir, mut copy, poc) = project();
        let decisions = vec![Decision::Text { text: "only one turn scripted".into() }];
        let outcome = run_script(&mut copy, &poc, decisions, &RunConfig::default());
        assert!(outcome.patch.is_none());
        assert_eq!(outcome.transcript.turns.len(), 1);
        let aborted = outcome.transcript.aborted.expect("aborted");
        assert!(aborted.contains("exhausted"));
    }

    #[test]
    fn identical_runs_produce_identical_transcripts() {
        let decisions = vec![
            Decision::Call(ToolCall::ViewFunction { name: "check".into() }),
            Decision::Call(ToolCall::ValidatePatch),
        ];
        let (_dir_a, mut copy_a, poc_a) = project();
        let (_dir_b, mut copy_b, poc_b) = project();
        let first = run_script(&mut copy_a, &poc_a, decisions.clone(), &RunConfig::default());
        let second = run_script(&mut copy_b, &poc_b, decisions, &RunConfig::default());
        assert_eq!(first.transcript, second.transcript);
        assert_eq!(
            first.patch.map(|p| p.diff),
            second.patch.map(|p| p.diff)
        );
    }

    #[test]
    fn decisions_round_trip_their_wire_format() {
        let call: Decision =
            serde_json::from_str(r#"{"tool":"view_function","args":{"name":"check"}}"#).unwrap();
        assert_eq!(call, Decision::Call(ToolCall::ViewFunction { name: "check".into() }));

        let text: Decision = serde_json::from_str(r#"{"text":"hello"}"#).unwrap();
        assert_eq!(text, Decision::Text { text: "hello".into() });

        let json = serde_json::to_string(&text).unwrap();
        assert_eq!(serde_json::from_str::<Decision>(&json).unwrap(), text);
    }

    #[test]
    fn chat_messages_alternate_roles() {
        let transcript = Transcript {
            prompt: "system prompt".into(),
            turns: vec![TurnRecord {
                turn: 1,
                decision: Decision::Call(ToolCall::ValidatePatch),
                reply: Some("compile: PASS".into()),
            }],
            approx_tokens: 0,
            aborted: None,
        };
        let messages = chat_messages(&transcript);
        assert_eq!(messages.len(), 3);
        assert_eq!(messages[0]["role"], "system");
        assert_eq!(messages[1]["role"], "assistant");
        assert!(messages[1]["content"].as_str().unwrap().contains("validate_patch"));
        assert_eq!(messages[2]["role"], "user");
    }
}
