//! Compute the tier-2 patch-quality statistics over a blinded ratings
//! store, and demonstrate the sealed anonymization protocol.
//!
//! Run with `cargo run --example rater_stats`.

use std::path::Path;

use faultline::assessment::{
    stats_report, QualityVote, RatingProtocol, RatingRecord, RatingStore, ToolAlias,
};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/ratings/store.jsonl");
    let store = RatingStore::load(&path).unwrap();
    let report = stats_report(&store).unwrap();

    println!(
        "{:<32} {:<7} {:>8} {:>8} {:>8}",
        "label (positive class)", "tool", "prev(+)", "agree", "kappa"
    );
    for row in &report.rows {
        let tool = row
            .tool
            .map(|alias| alias.to_string())
            .unwrap_or_else(|| "-".into());
        let prev = row
            .stats
            .prevalence_positive
            .map(|p| format!("{p:.3}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<32} {:<7} {:>8} {:>8.3} {:>8.3}",
            row.label, tool, prev, row.stats.raw_agreement, row.stats.kappa
        );
    }
    println!();

    if let Some(verdicts) = &report.verdicts {
        println!(
            "pairwise verdicts: tool_a wins {} | tool_b wins {} | ties {}",
            verdicts.wins_a, verdicts.wins_b, verdicts.ties
        );
        if let Some(test) = &verdicts.sign_test {
            println!(
                "sign test over {} decisive pairs: p = {:.4}, win-rate {:.1}%, 95% CI ({:.1}%, {:.1}%)",
                test.decisive,
                test.p_value,
                100.0 * test.win_rate,
                100.0 * test.ci_low,
                100.0 * test.ci_high
            );
        }
    }
    println!();

    // The anonymization protocol:2 raters x 1 bug x 2 aliases must all
    // be submitted before the alias map unseals.
    let mut protocol =
        RatingProtocol::new(("toolx", "tooly"), 42, &["r1", "r2"], &["bug-7"]).unwrap();
    let rating = |rater: &str, alias| RatingRecord {
        rater: rater.into(),
        bug: "bug-7".into(),
        tool_alias: alias,
        quality: QualityVote::Abstain,
        has_unrelated_changes: false,
        strategy: None,
        justification: "cannot assess without the build".into(),
    };
    protocol.submit(&rating("r1", ToolAlias::ToolA)).unwrap();
    protocol.submit(&rating("r1", ToolAlias::ToolB)).unwrap();
    protocol.submit(&rating("r2", ToolAlias::ToolA)).unwrap();
    match protocol.unseal() {
        Ok(_) => println!("unsealed early (should not happen)"),
        Err(err) => println!("mid-study unseal refused: {err}"),
    }
    protocol.submit(&rating("r2", ToolAlias::ToolB)).unwrap();
    let map = protocol.unseal().unwrap();
    println!("complete, alias map: {map:?}");
    println!("protocol log tail: {:?}", protocol.log().last().unwrap());
}
