//! Pipeline configuration: input paths, stage parameters, adapter
//! selections, and oracle command templates.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::FilterPolicy;
use crate::ranking::RankingConfig;

/// Input artifact locations. Only the report is mandatory for ranking;
/// each absent optional input narrows the evidence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub report: Option<PathBuf>,
    pub traces: Option<PathBuf>,
    pub callgraph: Option<PathBuf>,
    pub dataflow: Option<PathBuf>,
    pub project: Option<PathBuf>,
    pub poc: Option<PathBuf>,
    /// Directory of recorded `{input, trace, report}` variant triples.
    pub variants: Option<PathBuf>,
}

impl PathsConfig {
    fn resolve_one(base: &Path, path: &mut Option<PathBuf>) {
        if let Some(p) = path {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }

    /// Resolve relative paths against the directory of the config file.
    pub fn resolve(&mut self, base: &Path) {
        Self::resolve_one(base, &mut self.report);
        Self::resolve_one(base, &mut self.traces);
        Self::resolve_one(base, &mut self.callgraph);
        Self::resolve_one(base, &mut self.dataflow);
        Self::resolve_one(base, &mut self.project);
        Self::resolve_one(base, &mut self.poc);
        Self::resolve_one(base, &mut self.variants);
    }
}

/// Traversal parameters for the call-graph stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BfsConfig {
    pub depth_limit: usize,
    pub cap: usize,
    /// Widening threshold: re-run with all stack anchors when the first
    /// pass yields fewer candidates.
    pub min_count: usize,
    /// Anchor budget taken from the report.
    pub anchor_limit: usize,
}

impl Default for BfsConfig {
    fn default() -> Self {
        BfsConfig {
            depth_limit: 6,
            cap: 300,
            min_count: 30,
            anchor_limit: 10,
        }
    }
}

/// Oracle command templates. `{root}` expands to the working-copy root
/// and `{poc_path}` to the crashing input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleCommands {
    pub compile: String,
    pub replay: String,
    pub tests: String,
    /// Per-stage wall-clock limit.
    pub stage_timeout_secs: u64,
    /// Fuzz-variant oracle budget. The real backend defaults to 12
    /// hours; tests use seconds.
    pub fuzz_budget_secs: u64,
}

impl Default for OracleCommands {
    fn default() -> Self {
        OracleCommands {
            compile: String::new(),
            replay: String::new(),
            tests: String::new(),
            stage_timeout_secs: 300,
            fuzz_budget_secs: 12 * 60 * 60,
        }
    }
}

/// Repair-loop parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub turn_cap: usize,
    /// Ranked candidates included in the prompt.
    pub top_k_context: usize,
    pub protected_paths: Vec<String>,
    pub oracle: OracleCommands,
    /// Server-side rate limit: validate_patch at most once per this
    /// many turns.
    pub validate_min_interval: usize,
}

/// Build and test infrastructure the agent must never edit.
pub fn default_protected_paths() -> Vec<String> {
    [
        "build.sh",
        "afl_build.sh",
        "test.sh",
        "exp.sh",
        "CMakeLists.txt",
        "Makefile",
        "configure",
        "meson.build",
        "CMakeCache.txt",
        "CMakeFiles/",
    ]
    .into_iter()
    .map(str::to_string)
    .collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            turn_cap: 150,
            top_k_context: 20,
            protected_paths: default_protected_paths(),
            oracle: OracleCommands::default(),
            validate_min_interval: 2,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.turn_cap == 0 {
            return Err(Error::Domain("turn_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Adapter selection for pluggable external tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FuzzerKind {
    Real,
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    Real,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterConfig {
    pub fuzzer: FuzzerKind,
    pub llm: LlmKind,
    /// Scripted decision list for the mock language model.
    pub mock_decisions: Option<PathBuf>,
    /// Real language-model endpoint; the credential comes from the
    /// environment variable named in `llm_key_env`.
    pub llm_endpoint: Option<String>,
    pub llm_model: Option<String>,
    pub llm_key_env: String,
    /// Command template for the real fuzzer backend.
    pub fuzzer_command: Option<String>,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            fuzzer: FuzzerKind::Stub,
            llm: LlmKind::Mock,
            mock_decisions: None,
            llm_endpoint: None,
            llm_model: None,
            llm_key_env: "FAULTLINE_LLM_KEY".into(),
            fuzzer_command: None,
        }
    }
}

/// Top-level pipeline configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub paths: PathsConfig,
    pub bfs: BfsConfig,
    pub filter: FilterPolicy,
    pub ranking: RankingConfig,
    pub run: RunConfig,
    pub adapters: AdapterConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: crate::interchange::SCHEMA_VERSION,
            paths: PathsConfig::default(),
            bfs: BfsConfig::default(),
            filter: FilterPolicy::default(),
            ranking: RankingConfig::default(),
            run: RunConfig::default(),
            adapters: AdapterConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Load from a JSON file, resolving relative paths against the
    /// config file's directory. The base is absolutized first so the
    /// resolved paths survive later working-directory changes (oracle
    /// commands run inside the working copy).
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut config: PipelineConfig = serde_json::from_str(&text)?;
        if config.schema_version != crate::interchange::SCHEMA_VERSION {
            return Err(Error::Schema {
                index: 0,
                reason: format!("unsupported schema_version {}", config.schema_version),
            });
        }
        let base = std::fs::canonicalize(path)?
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        config.paths.resolve(&base);
        if let Some(p) = &mut config.adapters.mock_decisions {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.ranking.validate()?;
        self.run.validate()?;
        if self.bfs.depth_limit == 0 || self.bfs.cap == 0 {
            return Err(Error::Domain("bfs depth_limit and cap must be positive".into()));
        }
        if self.adapters.llm == LlmKind::Mock
            && self.paths.project.is_some()
            && self.adapters.mock_decisions.is_none()
        {
            return Err(Error::Domain(
                "mock llm adapter requires a mock_decisions fixture path".into(),
            ));
        }
        if self.adapters.llm == LlmKind::Real && self.adapters.llm_endpoint.is_none() {
            return Err(Error::Domain("real llm adapter requires llm_endpoint".into()));
        }
        if self.adapters.fuzzer == FuzzerKind::Real && self.adapters.fuzzer_command.is_none() {
            return Err(Error::Domain("real fuzzer adapter requires fuzzer_command".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_the_documented_values() {
        let config = PipelineConfig::default();
        config.validate().unwrap();
        assert_eq!(config.bfs.depth_limit, 6);
        assert_eq!(config.bfs.cap, 300);
        assert_eq!(config.bfs.min_count, 30);
        assert_eq!(config.bfs.anchor_limit, 10);
        assert_eq!(config.run.turn_cap, 150);
        assert_eq!(config.run.top_k_context, 20);
        assert_eq!(config.run.validate_min_interval, 2);
        assert_eq!(config.run.oracle.fuzz_budget_secs, 43_200);
        assert_eq!(config.ranking.top_k, 20);
        assert_eq!(config.ranking.rerank_head, 10);
        assert!(config.run.protected_paths.contains(&"build.sh".to_string()));
        assert!(config.run.protected_paths.contains(&"CMakeFiles/".to_string()));
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let config: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(config.schema_version, crate::interchange::SCHEMA_VERSION);
        assert_eq!(config.run.turn_cap, 150);
    }

    #[test]
    fn relative_paths_resolve_against_the_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"paths": {"report": "report.txt"}}"#).unwrap();
        let config = PipelineConfig::load(&path).unwrap();
        assert_eq!(config.paths.report.as_deref(), Some(dir.path().join("report.txt").as_path()));
    }

    #[test]
    fn real_adapters_require_their_settings() {
        let mut config = PipelineConfig::default();
        config.adapters.llm = LlmKind::Real;
        assert!(config.validate().is_err());

        let mut config = PipelineConfig::default();
        config.adapters.fuzzer = FuzzerKind::Real;
        assert!(config.validate().is_err());
    }
}
