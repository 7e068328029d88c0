//! Versioned JSON interchange documents shared by all pipeline stages.
//!
//! Every single-document format carries a `schema_version` field that is
//! validated on read. Trace families and the ratings store are
//! newline-delimited record streams instead (see [`crate::traces`] and
//! [`crate::assessment`]).

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::callgraph::{DataflowDoc, GraphDoc};
use crate::error::{Error, Result};
use crate::pool::{EvidenceTag, FoiCandidate};
use crate::ranking::ScoredCandidate;
use crate::report::SanitizerReport;

pub const SCHEMA_VERSION: u32 = 1;

/// Documents that carry a schema version.
pub trait VersionedDoc {
    fn schema_version(&self) -> u32;
}

/// Parsed-report document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDoc {
    pub schema_version: u32,
    pub report: SanitizerReport,
}

/// Candidate-pool document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolDoc {
    pub schema_version: u32,
    pub candidates: Vec<FoiCandidate>,
}

/// One entry of the ranked output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub function: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub score: f64,
    pub family_scores: BTreeMap<String, f64>,
    pub tags: Vec<EvidenceTag>,
}

/// Ranked-candidates document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedDoc {
    pub schema_version: u32,
    pub entries: Vec<RankedEntry>,
}

/// Final repair-run outcome document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeDoc {
    pub schema_version: u32,
    pub class: crate::repair::OutcomeClass,
    pub verify: crate::repair::VerifierResult,
    pub fuzz: crate::repair::StageReport,
    pub turns: usize,
    pub approx_tokens: usize,
    pub files_changed: Vec<String>,
}

impl VersionedDoc for ReportDoc {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}
impl VersionedDoc for OutcomeDoc {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}
impl VersionedDoc for PoolDoc {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}
impl VersionedDoc for RankedDoc {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}
impl VersionedDoc for GraphDoc {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}
impl VersionedDoc for DataflowDoc {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}

impl ReportDoc {
    pub fn new(report: SanitizerReport) -> Self {
        ReportDoc { schema_version: SCHEMA_VERSION, report }
    }
}

impl RankedDoc {
    pub fn from_scored(ranked: &[ScoredCandidate]) -> Self {
        RankedDoc {
            schema_version: SCHEMA_VERSION,
            entries: ranked
                .iter()
                .enumerate()
                .map(|(i, s)| RankedEntry {
                    rank: i + 1,
                    function: s.candidate.function.clone(),
                    file: s.candidate.file.clone(),
                    score: s.score,
                    family_scores: s.family_scores.clone(),
                    tags: s.candidate.tags.iter().copied().collect(),
                })
                .collect(),
        }
    }
}

/// Parse a versioned document from a string.
pub fn parse_doc<T: DeserializeOwned + VersionedDoc>(text: &str) -> Result<T> {
    let doc: T = serde_json::from_str(text)?;
    if doc.schema_version() != SCHEMA_VERSION {
        return Err(Error::Schema {
            index: 0,
            reason: format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                doc.schema_version()
            ),
        });
    }
    Ok(doc)
}

/// Read a versioned document from a file.
pub fn read_doc<T: DeserializeOwned + VersionedDoc>(path: &Path) -> Result<T> {
    parse_doc(&std::fs::read_to_string(path)?)
}

/// Serialize a document to pretty JSON, re-validating the version.
pub fn render_doc<T: Serialize + VersionedDoc>(doc: &T) -> Result<String> {
    if doc.schema_version() != SCHEMA_VERSION {
        return Err(Error::Schema {
            index: 0,
            reason: format!(
                "refusing to write schema_version {} (expected {SCHEMA_VERSION})",
                doc.schema_version()
            ),
        });
    }
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    Ok(text)
}

/// Write a versioned document to a file.
pub fn write_doc<T: Serialize + VersionedDoc>(path: &Path, doc: &T) -> Result<()> {
    std::fs::write(path, render_doc(doc)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::parse_report;

    const REPORT: &str = "\
==5==ERROR: AddressSanitizer: heap-buffer-overflow on address 0x60 at pc 0x1
    #0 0x10 in do_copy /src/copy.c:12:5
    #1 0x20 in main /src/main.c:33
";

    #[test]
    fn report_doc_round_trips() {
        let report = parse_report(REPORT).unwrap();
        let doc = ReportDoc::new(report.clone());
        let text = render_doc(&doc).unwrap();
        let back: ReportDoc = parse_doc(&text).unwrap();
        assert_eq!(back.report, report);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let report = parse_report(REPORT).unwrap();
        let mut doc = ReportDoc::new(report);
        doc.schema_version = 99;
        let text = serde_json::to_string(&doc).unwrap();
        assert!(parse_doc::<ReportDoc>(&text).is_err());
        assert!(render_doc(&doc).is_err());
    }
}
