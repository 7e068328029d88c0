//! Agent prompt assembly over the versioned prompt-template asset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::ScoredCandidate;

/// The versioned system-prompt template. Shipped byte-identical as
/// `assets/prompt_template.txt`; the two placeholders are substituted
/// by [`assemble_prompt`].
pub const PROMPT_TEMPLATE: &str = include_str!("../../assets/prompt_template.txt");

const CRASH_REPORT_SLOT: &str = "{crash_report}";
const RCA_SUMMARY_SLOT: &str = "{rca_summary}";

/// One ranked root-cause-analysis entry as surfaced to the agent: the
/// scored candidate plus an optional source excerpt from the working
/// copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaEntry {
    pub rank: usize,
    pub scored: ScoredCandidate,
    pub excerpt: Option<String>,
}

fn render_tags(entry: &RcaEntry) -> String {
    entry
        .scored
        .candidate
        .tags
        .iter()
        .map(|tag| serde_json::to_value(tag).expect("tag serializes").as_str().unwrap().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Compact per-entry block used for the `{rca_summary}` slot.
pub fn render_summary(entries: &[RcaEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        let file = entry.scored.candidate.file.as_deref().unwrap_or("<unknown file>");
        out.push_str(&format!(
            "[{}] {} ({}) score={:.4} tags={}\n",
            entry.rank,
            entry.scored.candidate.function,
            file,
            entry.scored.score,
            render_tags(entry)
        ));
        if let Some(excerpt) = &entry.excerpt {
            for line in excerpt.lines() {
                out.push_str("    ");
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    out
}

/// Expanded single-entry view backing the `get_rca_results` tool.
pub fn render_detail(entry: &RcaEntry) -> String {
    let file = entry.scored.candidate.file.as_deref().unwrap_or("<unknown file>");
    let mut out = format!(
        "rank {} | {} ({})\nscore: {:.6}\ntags: {}\n",
        entry.rank, entry.scored.candidate.function, file, entry.scored.score, render_tags(entry)
    );
    if !entry.scored.family_scores.is_empty() {
        out.push_str("family scores:\n");
        for (family, score) in &entry.scored.family_scores {
            out.push_str(&format!("  {family}: {score:.6}\n"));
        }
    }
    match &entry.excerpt {
        Some(excerpt) => {
            out.push_str("source:\n");
            out.push_str(excerpt);
            if !excerpt.ends_with('\n') {
                out.push('\n');
            }
        }
        None => out.push_str("source: <not found in working copy>\n"),
    }
    out
}

/// Substitute the crash report and rendered top-K summary into the
/// template. The ranked list must be non-empty and the template must
/// still carry both placeholders.
pub fn assemble_prompt(report_text: &str, entries: &[RcaEntry]) -> Result<String> {
    if entries.is_empty() {
        return Err(Error::Template("rca entry list is empty".into()));
    }
    for slot in [CRASH_REPORT_SLOT, RCA_SUMMARY_SLOT] {
        if !PROMPT_TEMPLATE.contains(slot) {
            return Err(Error::Template(format!("template placeholder {slot} is missing")));
        }
    }
    Ok(PROMPT_TEMPLATE
        .replacen(CRASH_REPORT_SLOT, report_text, 1)
        .replacen(RCA_SUMMARY_SLOT, &render_summary(entries), 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::{EvidenceTag, FoiCandidate};
    use crate::ranking::{score_candidate, RankingConfig};
    use crate::report::CrashClass;

    fn entry(rank: usize, function: &str, file: &str, tag: EvidenceTag) -> RcaEntry {
        let candidate = FoiCandidate::tagged(function, Some(file.to_string()), tag, None);
        let scored =
            score_candidate(&candidate, CrashClass::Uaf, &RankingConfig::default()).unwrap();
        RcaEntry { rank, scored, excerpt: None }
    }

    #[test]
    fn prompt_substitutes_report_and_all_entries() {
        let entries = vec![
            entry(1, "do_close", "src/session.c", EvidenceTag::CrashStack),
            entry(2, "pool_new", "src/pool.c", EvidenceTag::AllocStack),
            entry(3, "session_teardown", "src/session.c", EvidenceTag::FreeStack),
        ];
        let prompt = assemble_prompt("==1==ERROR: AddressSanitizer: heap-use-after-free", &entries)
            .unwrap();
        assert!(prompt.contains("==1==ERROR: AddressSanitizer: heap-use-after-free"));
        for name in ["do_close", "pool_new", "session_teardown"] {
            assert!(prompt.contains(name), "missing {name}");
        }
        assert!(prompt.contains("Fix Quality Hierarchy"));
        assert!(!prompt.contains(CRASH_REPORT_SLOT));
        assert!(!prompt.contains(RCA_SUMMARY_SLOT));
    }

    #[test]
    fn empty_rca_is_a_template_error() {
        assert!(matches!(assemble_prompt("report", &[]), Err(Error::Template(_))));
    }

    #[test]
    fn summary_lists_rank_file_score_and_tags() {
        let mut first = entry(1, "do_close", "src/session.c", EvidenceTag::CrashStack);
        first.excerpt = Some("void do_close(void) {\n}".into());
        let text = render_summary(&[first.clone()]);
        assert!(text.contains("[1] do_close (src/session.c)"));
        assert!(text.contains("tags=crash_stack"));
        assert!(text.contains("    void do_close(void) {"));

        let detail = render_detail(&first);
        assert!(detail.contains("rank 1"));
        assert!(detail.contains("family scores:"));
        assert!(detail.contains("source:"));
    }
}
