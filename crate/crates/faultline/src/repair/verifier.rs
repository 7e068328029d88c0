//! Three-check patch verifier (compile, PoC replay, test suite) plus
//! the post-hoc fuzz-variant oracle, with shell-command and scripted
//! backends.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::OracleCommands;
use crate::error::{Error, Result};

/// Stage outcome, ordered worst-to-best so classification monotonicity
/// can be phrased as "a later variant never downgrades the class".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Fail,
    Skipped,
    Pass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub status: StageStatus,
    pub output: String,
}

impl StageReport {
    pub fn pass(output: impl Into<String>) -> StageReport {
        StageReport { status: StageStatus::Pass, output: output.into() }
    }

    pub fn fail(output: impl Into<String>) -> StageReport {
        StageReport { status: StageStatus::Fail, output: output.into() }
    }

    pub fn skipped(output: impl Into<String>) -> StageReport {
        StageReport { status: StageStatus::Skipped, output: output.into() }
    }
}

/// Outcome of the three ordered checks. A failing stage short-circuits
/// the later ones to `Skipped`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierResult {
    pub compile: StageReport,
    pub poc_replay: StageReport,
    pub tests: StageReport,
}

impl VerifierResult {
    pub fn all_pass(&self) -> bool {
        self.compile.status == StageStatus::Pass
            && self.poc_replay.status == StageStatus::Pass
            && self.tests.status == StageStatus::Pass
    }

    pub fn all_skipped(reason: &str) -> VerifierResult {
        VerifierResult {
            compile: StageReport::skipped(reason),
            poc_replay: StageReport::skipped(reason),
            tests: StageReport::skipped(reason),
        }
    }
}

/// Verification backend. `replay` runs one input; the fuzz oracle
/// reuses it across every recorded crash variant.
pub trait Oracle {
    fn compile(&self, root: &Path) -> Result<StageReport>;
    fn replay(&self, root: &Path, input: &Path) -> Result<StageReport>;
    fn tests(&self, root: &Path) -> Result<StageReport>;
}

/// Run the three checks in order with short-circuiting. A missing PoC
/// skips replay without failing it, but the result then cannot be
/// all-pass.
pub fn run_verifier(oracle: &dyn Oracle, root: &Path, poc: Option<&Path>) -> Result<VerifierResult> {
    let compile = oracle.compile(root)?;
    if compile.status != StageStatus::Pass {
        let skip = "skipped: compile did not pass";
        return Ok(VerifierResult {
            compile,
            poc_replay: StageReport::skipped(skip),
            tests: StageReport::skipped(skip),
        });
    }
    let poc_replay = match poc {
        Some(input) => oracle.replay(root, input)?,
        None => StageReport::skipped("skipped: no poc input configured"),
    };
    if poc_replay.status == StageStatus::Fail {
        return Ok(VerifierResult {
            compile,
            poc_replay,
            tests: StageReport::skipped("skipped: poc replay failed"),
        });
    }
    let tests = oracle.tests(root)?;
    Ok(VerifierResult { compile, poc_replay, tests })
}

/// Replay every recorded crash-variant input; the patch passes only if
/// all of them run sanitizer-clean. No variants means the stricter
/// oracle could not be exercised.
pub fn run_fuzz_oracle(oracle: &dyn Oracle, root: &Path, variants: &[PathBuf]) -> Result<StageReport> {
    if variants.is_empty() {
        return Ok(StageReport::skipped("skipped: no crash variants recorded"));
    }
    for input in variants {
        let report = oracle.replay(root, input)?;
        if report.status != StageStatus::Pass {
            return Ok(StageReport::fail(format!(
                "variant {} still crashes:\n{}",
                input.display(),
                report.output
            )));
        }
    }
    Ok(StageReport::pass(format!("{} variant inputs replayed clean", variants.len())))
}

/// Sanitizer failure markers searched for in replay output.
fn has_sanitizer_marker(output: &str) -> bool {
    let marker = regex::Regex::new(r"(ERROR|SUMMARY):\s*\w*Sanitizer").expect("static regex");
    marker.is_match(output) || output.contains("AddressSanitizer:")
}

/// Shell-command oracle. Templates may reference `{root}` and
/// `{poc_path}`; commands run through `sh -c` inside the working copy.
#[derive(Debug, Clone)]
pub struct ShellOracle {
    commands: OracleCommands,
}

impl ShellOracle {
    pub fn new(commands: OracleCommands) -> ShellOracle {
        ShellOracle { commands }
    }

    fn run(&self, stage: &str, template: &str, root: &Path, poc: Option<&Path>) -> Result<(bool, String)> {
        if template.trim().is_empty() {
            return Err(Error::Domain(format!("no {stage} command configured")));
        }
        let mut command_line = template.replace("{root}", &root.display().to_string());
        if let Some(poc) = poc {
            command_line = command_line.replace("{poc_path}", &poc.display().to_string());
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&command_line)
            .current_dir(root)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|err| Error::Domain(format!("spawn {stage} oracle: {err}")))?;
        let deadline = Instant::now() + Duration::from_secs(self.commands.stage_timeout_secs);
        loop {
            if child.try_wait()?.is_some() {
                break;
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::OracleTimeout { stage: stage.to_string() });
            }
            std::thread::sleep(Duration::from_millis(5));
        }
        let output = child.wait_with_output()?;
        let mut merged = String::from_utf8_lossy(&output.stdout).into_owned();
        merged.push_str(&String::from_utf8_lossy(&output.stderr));
        Ok((output.status.success(), merged))
    }
}

impl Oracle for ShellOracle {
    fn compile(&self, root: &Path) -> Result<StageReport> {
        let (ok, output) = self.run("compile", &self.commands.compile, root, None)?;
        Ok(if ok { StageReport::pass(output) } else { StageReport::fail(output) })
    }

    /// Replay passes iff the output is free of sanitizer error markers.
    /// A non-zero exit with clean output still passes: graceful input
    /// rejection fixes the crash.
    fn replay(&self, root: &Path, input: &Path) -> Result<StageReport> {
        let (_ok, output) = self.run("poc_replay", &self.commands.replay, root, Some(input))?;
        Ok(if has_sanitizer_marker(&output) {
            StageReport::fail(output)
        } else {
            StageReport::pass(output)
        })
    }

    fn tests(&self, root: &Path) -> Result<StageReport> {
        let (ok, output) = self.run("tests", &self.commands.tests, root, None)?;
        Ok(if ok { StageReport::pass(output) } else { StageReport::fail(output) })
    }
}

/// Fixed-outcome oracle for unit tests of the verifier and classifier.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    pub compile: StageStatus,
    pub replay: StageStatus,
    pub tests: StageStatus,
}

impl Oracle for ScriptedOracle {
    fn compile(&self, _root: &Path) -> Result<StageReport> {
        Ok(StageReport { status: self.compile, output: "scripted".into() })
    }

    fn replay(&self, _root: &Path, _input: &Path) -> Result<StageReport> {
        Ok(StageReport { status: self.replay, output: "scripted".into() })
    }

    fn tests(&self, _root: &Path) -> Result<StageReport> {
        Ok(StageReport { status: self.tests, output: "scripted".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted(compile: StageStatus, replay: StageStatus, tests: StageStatus) -> ScriptedOracle {
        ScriptedOracle { compile, replay, tests }
    }

    #[test]
    fn verifier_short_circuits_after_a_failure() {
        let root = Path::new(".");
        let poc = PathBuf::from("poc");

        let all = run_verifier(
            &scripted(StageStatus::Pass, StageStatus::Pass, StageStatus::Pass),
            root,
            Some(&poc),
        )
        .unwrap();
        assert!(all.all_pass());

        let broken_compile = run_verifier(
            &scripted(StageStatus::Fail, StageStatus::Pass, StageStatus::Pass),
            root,
            Some(&poc),
        )
        .unwrap();
        assert_eq!(broken_compile.compile.status, StageStatus::Fail);
        assert_eq!(broken_compile.poc_replay.status, StageStatus::Skipped);
        assert_eq!(broken_compile.tests.status, StageStatus::Skipped);

        let crashing_replay = run_verifier(
            &scripted(StageStatus::Pass, StageStatus::Fail, StageStatus::Pass),
            root,
            Some(&poc),
        )
        .unwrap();
        assert_eq!(crashing_replay.tests.status, StageStatus::Skipped);

        let no_poc = run_verifier(
            &scripted(StageStatus::Pass, StageStatus::Pass, StageStatus::Pass),
            root,
            None,
        )
        .unwrap();
        assert_eq!(no_poc.poc_replay.status, StageStatus::Skipped);
        assert_eq!(no_poc.tests.status, StageStatus::Pass);
        assert!(!no_poc.all_pass());
    }

    #[test]
    fn shell_oracle_reads_exit_codes_and_markers() {
        let dir = tempfile::tempdir().unwrap();
        let poc = dir.path().join("poc.bin");
        std::fs::write(&poc, b"x").unwrap();
        let oracle = ShellOracle::new(OracleCommands {
            compile: "true".into(),
            replay: "cat {poc_path} >/dev/null && echo rejected input && exit 3".into(),
            tests: "echo one test && false".into(),
            stage_timeout_secs: 5,
            fuzz_budget_secs: 1,
        });

        let result = run_verifier(&oracle, dir.path(), Some(&poc)).unwrap();
        assert_eq!(result.compile.status, StageStatus::Pass);
        // Non-zero exit but no sanitizer marker: the crash is fixed.
        assert_eq!(result.poc_replay.status, StageStatus::Pass);
        assert!(result.poc_replay.output.contains("rejected input"));
        assert_eq!(result.tests.status, StageStatus::Fail);
        assert!(result.tests.output.contains("one test"));

        let crashing = ShellOracle::new(OracleCommands {
            compile: "true".into(),
            replay: "echo ==123==ERROR: AddressSanitizer: heap-use-after-free; exit 1".into(),
            tests: "true".into(),
            stage_timeout_secs: 5,
            fuzz_budget_secs: 1,
        });
        let result = run_verifier(&crashing, dir.path(), Some(&poc)).unwrap();
        assert_eq!(result.poc_replay.status, StageStatus::Fail);
    }

    #[test]
    fn shell_oracle_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let oracle = ShellOracle::new(OracleCommands {
            compile: "sleep 30".into(),
            replay: "true".into(),
            tests: "true".into(),
            stage_timeout_secs: 1,
            fuzz_budget_secs: 1,
        });
        let started = Instant::now();
        let err = oracle.compile(dir.path()).unwrap_err();
        assert!(matches!(err, Error::OracleTimeout { ref stage } if stage == "compile"));
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn fuzz_oracle_requires_every_variant_clean() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("v1.bin");
        let bad = dir.path().join("v2.bin");
        std::fs::write(&good, b"ok").unwrap();
        std::fs::write(&bad, b"crash").unwrap();
        let oracle = ShellOracle::new(OracleCommands {
            compile: "true".into(),
            replay: "grep -q crash {poc_path} && echo ERROR: AddressSanitizer: SEGV; true".into(),
            tests: "true".into(),
            stage_timeout_secs: 5,
            fuzz_budget_secs: 1,
        });

        let clean = run_fuzz_oracle(&oracle, dir.path(), &[good.clone()]).unwrap();
        assert_eq!(clean.status, StageStatus::Pass);

        let dirty = run_fuzz_oracle(&oracle, dir.path(), &[good, bad]).unwrap();
        assert_eq!(dirty.status, StageStatus::Fail);
        assert!(dirty.output.contains("v2.bin"));

        let none = run_fuzz_oracle(&oracle, dir.path(), &[]).unwrap();
        assert_eq!(none.status, StageStatus::Skipped);
    }

    #[test]
    fn stage_status_orders_worst_to_best() {
        assert!(StageStatus::Fail < StageStatus::Skipped);
        assert!(StageStatus::Skipped < StageStatus::Pass);
    }
}
