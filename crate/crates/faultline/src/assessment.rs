//! Tier-2 patch-quality assessment: rating records, anonymized pairwise
//! verdicts, majority vote, Fleiss's kappa, raw agreement, prevalence,
//! and the exact sign test with a Wald win-rate interval.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One rater's vote on a single patch. Abstentions are first-class: they
/// form their own agreement category but are excluded from prevalence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityVote {
    RootCauseFix,
    SymptomFix,
    Abstain,
}

/// Final per-patch label after majority vote. Abstain cannot win a
/// majority, so the final label is two-valued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityLabel {
    RootCauseFix,
    SymptomFix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootCauseStrategy {
    BoundCheck,
    ApiContract,
    SizeArithmetic,
    ControlFlowFix,
    OwnershipRepair,
    InvariantValidation,
    StateSync,
    TypeRepresentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymptomStrategy {
    CrashSiteGuard,
    DownstreamGuard,
    ValueMasking,
    CorruptStateTolerance,
    TriggerBlock,
    IncompleteCoverage,
    LifetimeMasking,
    WrongLocation,
    IneffectiveGuard,
}

/// Strategy label drawn from whichever vocabulary matches the quality
/// vote. The two vocabularies are disjoint, so the untagged encoding is
/// unambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Strategy {
    RootCause(RootCauseStrategy),
    Symptom(SymptomStrategy),
}

/// Anonymized tool identity as shown to raters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolAlias {
    ToolA,
    ToolB,
}

impl fmt::Display for ToolAlias {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToolAlias::ToolA => write!(f, "tool_a"),
            ToolAlias::ToolB => write!(f, "tool_b"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    ToolA,
    ToolB,
    Tie,
}

/// One rater's labels for one (bug, tool) patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater: String,
    pub bug: String,
    pub tool_alias: ToolAlias,
    pub quality: QualityVote,
    pub has_unrelated_changes: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub justification: String,
}

impl RatingRecord {
    /// The strategy vocabulary must match the quality vote, and an
    /// abstention carries no strategy.
    pub fn validate(&self) -> Result<()> {
        match (self.quality, self.strategy) {
            (_, None) => Ok(()),
            (QualityVote::RootCauseFix, Some(Strategy::RootCause(_))) => Ok(()),
            (QualityVote::SymptomFix, Some(Strategy::Symptom(_))) => Ok(()),
            (QualityVote::Abstain, Some(_)) => Err(Error::Protocol(format!(
                "rating {}/{}: abstention cannot carry a strategy",
                self.rater, self.bug
            ))),
            _ => Err(Error::Protocol(format!(
                "rating {}/{}: strategy vocabulary does not match the quality label",
                self.rater, self.bug
            ))),
        }
    }
}

/// One rater's pairwise preference on a bug where both tools produced a
/// plausible patch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub bug: String,
    pub rater: String,
    pub winner: Winner,
}

/// Append-only store line: either a rating or a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoreRecord {
    Rating(RatingRecord),
    Verdict(PairVerdict),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingStore {
    pub ratings: Vec<RatingRecord>,
    pub verdicts: Vec<PairVerdict>,
}

impl RatingStore {
    pub fn parse(text: &str) -> Result<RatingStore> {
        let mut store = RatingStore::default();
        for (index, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: StoreRecord =
                serde_json::from_str(line).map_err(|err| Error::Schema {
                    index,
                    reason: err.to_string(),
                })?;
            match record {
                StoreRecord::Rating(rating) => {
                    rating.validate()?;
                    store.ratings.push(rating);
                }
                StoreRecord::Verdict(verdict) => store.verdicts.push(verdict),
            }
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<RatingStore> {
        RatingStore::parse(&std::fs::read_to_string(path)?)
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty() && self.verdicts.is_empty()
    }
}

/// Agreement statistics for one label. `prevalence_positive` is absent
/// for the pairwise winner label, which has no designated positive
/// class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub prevalence_positive: Option<f64>,
    pub raw_agreement: f64,
    pub kappa: f64,
}

/// Majority vote over an odd panel for one (bug, tool) patch. The
/// winning label must hold strictly more than half the votes, and an
/// abstention plurality cannot produce a final label.
pub fn majority_vote(ratings: &[RatingRecord]) -> Result<QualityLabel> {
    if ratings.len() < 3 || ratings.len() % 2 == 0 {
        return Err(Error::Protocol(format!(
            "majority vote needs an odd panel of at least 3 ratings, got {}",
            ratings.len()
        )));
    }
    let key = (&ratings[0].bug, ratings[0].tool_alias);
    let mut raters = BTreeSet::new();
    let mut root_cause = 0usize;
    let mut symptom = 0usize;
    for rating in ratings {
        rating.validate()?;
        if (&rating.bug, rating.tool_alias) != key {
            return Err(Error::Protocol(
                "majority vote mixes ratings for different patches".into(),
            ));
        }
        if !raters.insert(&rating.rater) {
            return Err(Error::Protocol(format!(
                "duplicate rating from {} for {}",
                rating.rater, rating.bug
            )));
        }
        match rating.quality {
            QualityVote::RootCauseFix => root_cause += 1,
            QualityVote::SymptomFix => symptom += 1,
            QualityVote::Abstain => {}
        }
    }
    let half = ratings.len() / 2;
    if root_cause > half {
        Ok(QualityLabel::RootCauseFix)
    } else if symptom > half {
        Ok(QualityLabel::SymptomFix)
    } else {
        Err(Error::Protocol(format!(
            "no quality label holds a majority for {}",
            ratings[0].bug
        )))
    }
}

/// Fleiss's chance-corrected agreement over an items-by-categories count
/// table. Every row must sum to `raters`.
pub fn fleiss_kappa(matrix: &[Vec<usize>], raters: usize) -> Result<f64> {
    if matrix.is_empty() {
        return Err(Error::Protocol("kappa needs at least one item".into()));
    }
    if raters < 2 {
        return Err(Error::Domain("kappa needs at least 2 raters per item".into()));
    }
    let categories = matrix[0].len();
    if categories < 2 {
        return Err(Error::Domain("kappa needs at least 2 categories".into()));
    }
    let items = matrix.len() as f64;
    let n = raters as f64;
    let mut mean_item_agreement = 0.0;
    let mut column_totals = vec![0usize; categories];
    for row in matrix {
        if row.len() != categories {
            return Err(Error::Domain("ragged kappa table".into()));
        }
        if row.iter().sum::<usize>() != raters {
            return Err(Error::Domain(format!(
                "kappa row does not sum to the rater count {raters}"
            )));
        }
        let squares: usize = row.iter().map(|&c| c * c).sum();
        mean_item_agreement += (squares as f64 - n) / (n * (n - 1.0));
        for (total, &count) in column_totals.iter_mut().zip(row) {
            *total += count;
        }
    }
    mean_item_agreement /= items;
    let chance: f64 = column_totals
        .iter()
        .map(|&total| {
            let p = total as f64 / (items * n);
            p * p
        })
        .sum();
    if chance >= 1.0 {
        return Err(Error::Degenerate);
    }
    Ok((mean_item_agreement - chance) / (1.0 - chance))
}

/// Fleiss's kappa from a labels table (rows are items, columns raters),
/// tallying observed labels into categories.
pub fn kappa_from_labels<L: Ord + Clone>(items: &[Vec<L>]) -> Result<f64> {
    let raters = items.first().map(Vec::len).unwrap_or(0);
    let mut categories = BTreeSet::new();
    for row in items {
        categories.extend(row.iter().cloned());
    }
    let order: Vec<L> = categories.into_iter().collect();
    if order.len() < 2 {
        // A single observed category means chance agreement is 1.
        return Err(Error::Degenerate);
    }
    let matrix: Vec<Vec<usize>> = items
        .iter()
        .map(|row| {
            let mut counts = vec![0usize; order.len()];
            for label in row {
                let slot = order.iter().position(|c| c == label).expect("tallied");
                counts[slot] += 1;
            }
            counts
        })
        .collect();
    fleiss_kappa(&matrix, raters)
}

/// Mean pairwise observed agreement over a labels table (rows items,
/// columns raters).
pub fn raw_agreement<L: PartialEq>(items: &[Vec<L>]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::Protocol("raw agreement over an empty item set".into()));
    }
    let raters = items[0].len();
    if raters < 2 {
        return Err(Error::Domain("raw agreement needs at least 2 raters".into()));
    }
    let mut pair_sum = 0.0;
    let mut pairs = 0usize;
    for a in 0..raters {
        for b in a + 1..raters {
            let agreeing = items
                .iter()
                .map(|row| {
                    if row.len() != raters {
                        return Err(Error::Domain("ragged agreement table".into()));
                    }
                    Ok(usize::from(row[a] == row[b]))
                })
                .sum::<Result<usize>>()?;
            pair_sum += agreeing as f64 / items.len() as f64;
            pairs += 1;
        }
    }
    Ok(pair_sum / pairs as f64)
}

/// Fraction of root-cause votes among non-abstaining votes.
pub fn prevalence_positive(votes: &[QualityVote]) -> Result<f64> {
    let mut positive = 0usize;
    let mut decided = 0usize;
    for vote in votes {
        match vote {
            QualityVote::RootCauseFix => {
                positive += 1;
                decided += 1;
            }
            QualityVote::SymptomFix => decided += 1,
            QualityVote::Abstain => {}
        }
    }
    if decided == 0 {
        return Err(Error::Degenerate);
    }
    Ok(positive as f64 / decided as f64)
}

/// Exact two-sided binomial sign test plus the Wald win-rate interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins_a: usize,
    pub wins_b: usize,
    pub decisive: usize,
    pub p_value: f64,
    pub win_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// p = min(1, 2 * P(X <= min(a,b))) for X ~ Binomial(a+b, 1/2), with the
/// tail accumulated through the multiplicative pmf recurrence.
pub fn pairwise_sign_test(wins_a: usize, wins_b: usize) -> Result<SignTest> {
    let decisive = wins_a + wins_b;
    if decisive == 0 {
        return Err(Error::Domain("sign test needs at least one decisive pair".into()));
    }
    let n = decisive as f64;
    let k = wins_a.min(wins_b);
    let mut pmf = 0.5f64.powi(decisive as i32);
    let mut tail = pmf;
    for i in 0..k {
        pmf *= (n - i as f64) / (i as f64 + 1.0);
        tail += pmf;
    }
    let p_value = (2.0 * tail).min(1.0);
    let win_rate = wins_a as f64 / n;
    let half_width = 1.96 * (win_rate * (1.0 - win_rate) / n).sqrt();
    Ok(SignTest {
        wins_a,
        wins_b,
        decisive,
        p_value,
        win_rate,
        ci_low: (win_rate - half_width).max(0.0),
        ci_high: (win_rate + half_width).min(1.0),
    })
}

/// Majority-final quality label and unrelated-change flag for one patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalLabel {
    pub quality: QualityLabel,
    pub has_unrelated_changes: bool,
}

/// Lexicographic rubric, correctness first: a root-cause fix beats a
/// symptom fix outright. Equal labels are a human judgment; without a
/// recorded tiebreak the comparison cannot be decided automatically.
pub fn rubric_compare(
    final_a: FinalLabel,
    final_b: FinalLabel,
    human_tiebreak: Option<Winner>,
) -> Result<Winner> {
    match (final_a.quality, final_b.quality) {
        (QualityLabel::RootCauseFix, QualityLabel::SymptomFix) => Ok(Winner::ToolA),
        (QualityLabel::SymptomFix, QualityLabel::RootCauseFix) => Ok(Winner::ToolB),
        _ => human_tiebreak.ok_or(Error::MissingTiebreak),
    }
}

/// Per-bug winner from an odd panel of verdicts; a three-way split has
/// no majority and is a protocol error.
pub fn majority_winner(verdicts: &[PairVerdict]) -> Result<Winner> {
    if verdicts.len() < 3 || verdicts.len() % 2 == 0 {
        return Err(Error::Protocol(format!(
            "winner vote needs an odd panel of at least 3 verdicts, got {}",
            verdicts.len()
        )));
    }
    let bug = &verdicts[0].bug;
    let mut counts: BTreeMap<Winner, usize> = BTreeMap::new();
    let mut raters = BTreeSet::new();
    for verdict in verdicts {
        if &verdict.bug != bug {
            return Err(Error::Protocol("winner vote mixes verdicts for different bugs".into()));
        }
        if !raters.insert(&verdict.rater) {
            return Err(Error::Protocol(format!(
                "duplicate verdict from {} for {bug}",
                verdict.rater
            )));
        }
        *counts.entry(verdict.winner).or_default() += 1;
    }
    let half = verdicts.len() / 2;
    counts
        .into_iter()
        .find(|&(_, count)| count > half)
        .map(|(winner, _)| winner)
        .ok_or_else(|| Error::Protocol(format!("no majority winner for {bug}")))
}

/// Aggregate verdict summary: per-bug majority winners, tallied, with
/// the sign test over the decisive bugs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    pub sign_test: Option<SignTest>,
}

pub fn summarize_verdicts(verdicts: &[PairVerdict]) -> Result<VerdictSummary> {
    let mut by_bug: BTreeMap<&str, Vec<PairVerdict>> = BTreeMap::new();
    for verdict in verdicts {
        by_bug.entry(&verdict.bug).or_default().push(verdict.clone());
    }
    let mut wins_a = 0usize;
    let mut wins_b = 0usize;
    let mut ties = 0usize;
    for panel in by_bug.values() {
        match majority_winner(panel)? {
            Winner::ToolA => wins_a += 1,
            Winner::ToolB => wins_b += 1,
            Winner::Tie => ties += 1,
        }
    }
    let sign_test = if wins_a + wins_b > 0 {
        Some(pairwise_sign_test(wins_a, wins_b)?)
    } else {
        None
    };
    Ok(VerdictSummary { wins_a, wins_b, ties, sign_test })
}

/// One row of the agreement report (a label, optionally per tool).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub label: String,
    pub tool: Option<ToolAlias>,
    pub stats: AgreementStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub rows: Vec<StatsRow>,
    pub verdicts: Option<VerdictSummary>,
}

fn rating_items<T, F>(ratings: &[RatingRecord], alias: ToolAlias, f: F) -> Result<Vec<Vec<T>>>
where
    F: Fn(&RatingRecord) -> T,
{
    let mut by_bug: BTreeMap<&str, Vec<T>> = BTreeMap::new();
    for rating in ratings.iter().filter(|r| r.tool_alias == alias) {
        by_bug.entry(&rating.bug).or_default().push(f(rating));
    }
    let items: Vec<Vec<T>> = by_bug.into_values().collect();
    if let Some(first) = items.first() {
        let width = first.len();
        if width < 2 || items.iter().any(|row| row.len() != width) {
            return Err(Error::Protocol(format!(
                "tool {alias} needs the same panel of at least 2 raters on every bug"
            )));
        }
    }
    Ok(items)
}

/// Build the per-label agreement table plus the pairwise summary from a
/// ratings store.
pub fn stats_report(store: &RatingStore) -> Result<StatsReport> {
    if store.is_empty() {
        return Err(Error::Protocol("empty ratings store".into()));
    }
    let mut rows = Vec::new();
    for alias in [ToolAlias::ToolA, ToolAlias::ToolB] {
        let quality = rating_items(store.ratings.as_slice(), alias, |r| r.quality)?;
        if quality.is_empty() {
            continue;
        }
        let votes: Vec<QualityVote> = quality.iter().flatten().copied().collect();
        rows.push(StatsRow {
            label: "patch_quality(root_cause_fix)".into(),
            tool: Some(alias),
            stats: AgreementStats {
                prevalence_positive: Some(prevalence_positive(&votes)?),
                raw_agreement: raw_agreement(&quality)?,
                kappa: kappa_from_labels(&quality)?,
            },
        });
        let flags = rating_items(store.ratings.as_slice(), alias, |r| r.has_unrelated_changes)?;
        let positives = flags.iter().flatten().filter(|&&f| f).count();
        let total: usize = flags.iter().map(Vec::len).sum();
        rows.push(StatsRow {
            label: "unrelated_change(true)".into(),
            tool: Some(alias),
            stats: AgreementStats {
                prevalence_positive: Some(positives as f64 / total as f64),
                raw_agreement: raw_agreement(&flags)?,
                kappa: kappa_from_labels(&flags)?,
            },
        });
    }
    let verdicts = if store.verdicts.is_empty() {
        None
    } else {
        let mut by_bug: BTreeMap<&str, Vec<Winner>> = BTreeMap::new();
        for verdict in &store.verdicts {
            by_bug.entry(&verdict.bug).or_default().push(verdict.winner);
        }
        let items: Vec<Vec<Winner>> = by_bug.into_values().collect();
        let width = items[0].len();
        if width < 2 || items.iter().any(|row| row.len() != width) {
            return Err(Error::Protocol(
                "winner label needs the same panel of at least 2 raters on every bug".into(),
            ));
        }
        rows.push(StatsRow {
            label: "winner(pairwise)".into(),
            tool: None,
            stats: AgreementStats {
                prevalence_positive: None,
                raw_agreement: raw_agreement(&items)?,
                kappa: kappa_from_labels(&items)?,
            },
        });
        Some(summarize_verdicts(&store.verdicts)?)
    };
    Ok(StatsReport { rows, verdicts })
}

/// Deterministic seeded bijection from the two real tool names onto
/// `tool_a` / `tool_b`. The orientation comes from a hash of the seed
/// and the (order-insensitive) name pair.
#[derive(Debug, Clone)]
pub struct AliasAssignment {
    tool_a: String,
    tool_b: String,
}

impl AliasAssignment {
    pub fn new(first: &str, second: &str, seed: u64) -> Result<AliasAssignment> {
        if first == second || first.is_empty() || second.is_empty() {
            return Err(Error::Domain("anonymization needs two distinct tool names".into()));
        }
        let (low, high) = if first <= second { (first, second) } else { (second, first) };
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update([0x1f]);
        hasher.update(low.as_bytes());
        hasher.update([0x1f]);
        hasher.update(high.as_bytes());
        let digest = hasher.finalize();
        let (tool_a, tool_b) = if digest[0] & 1 == 0 { (low, high) } else { (high, low) };
        Ok(AliasAssignment { tool_a: tool_a.into(), tool_b: tool_b.into() })
    }

    pub fn alias_of(&self, name: &str) -> Option<ToolAlias> {
        if name == self.tool_a {
            Some(ToolAlias::ToolA)
        } else if name == self.tool_b {
            Some(ToolAlias::ToolB)
        } else {
            None
        }
    }

    fn name_of(&self, alias: ToolAlias) -> &str {
        match alias {
            ToolAlias::ToolA => &self.tool_a,
            ToolAlias::ToolB => &self.tool_b,
        }
    }
}

/// Rating-session state machine. The alias-to-tool map stays sealed
/// until every expected rating has been submitted; unsealing is logged.
#[derive(Debug)]
pub struct RatingProtocol {
    assignment: AliasAssignment,
    expected: BTreeSet<(String, String, ToolAlias)>,
    received: BTreeSet<(String, String, ToolAlias)>,
    log: Vec<String>,
}

impl RatingProtocol {
    pub fn new(
        tools: (&str, &str),
        seed: u64,
        raters: &[&str],
        bugs: &[&str],
    ) -> Result<RatingProtocol> {
        let assignment = AliasAssignment::new(tools.0, tools.1, seed)?;
        let mut expected = BTreeSet::new();
        for rater in raters {
            for bug in bugs {
                for alias in [ToolAlias::ToolA, ToolAlias::ToolB] {
                    expected.insert((rater.to_string(), bug.to_string(), alias));
                }
            }
        }
        if expected.is_empty() {
            return Err(Error::Protocol("rating roster is empty".into()));
        }
        Ok(RatingProtocol { assignment, expected, received: BTreeSet::new(), log: Vec::new() })
    }

    pub fn submit(&mut self, rating: &RatingRecord) -> Result<()> {
        rating.validate()?;
        let key = (rating.rater.clone(), rating.bug.clone(), rating.tool_alias);
        if !self.expected.contains(&key) {
            return Err(Error::Protocol(format!(
                "rating {}/{} is not on the roster",
                rating.rater, rating.bug
            )));
        }
        if !self.received.insert(key) {
            return Err(Error::Protocol(format!(
                "duplicate rating {}/{}/{}",
                rating.rater, rating.bug, rating.tool_alias
            )));
        }
        self.log.push(format!(
            "rating {}/{}/{} recorded ({}/{})",
            rating.rater,
            rating.bug,
            rating.tool_alias,
            self.received.len(),
            self.expected.len()
        ));
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.received.len() == self.expected.len()
    }

    /// Reveal the alias map. Refused while any expected rating is
    /// outstanding, so raters can never learn tool identities mid-study.
    pub fn unseal(&mut self) -> Result<BTreeMap<ToolAlias, String>> {
        if !self.is_complete() {
            return Err(Error::Protocol(format!(
                "unseal refused: {} of {} ratings outstanding",
                self.expected.len() - self.received.len(),
                self.expected.len()
            )));
        }
        self.log.push(format!(
            "alias map unsealed after {} ratings",
            self.received.len()
        ));
        Ok([ToolAlias::ToolA, ToolAlias::ToolB]
            .into_iter()
            .map(|alias| (alias, self.assignment.name_of(alias).to_string()))
            .collect())
    }

    pub fn log(&self) -> &[String] {
        &self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rating(rater: &str, quality: QualityVote) -> RatingRecord {
        RatingRecord {
            rater: rater.into(),
            bug: "bug-1".into(),
            tool_alias: ToolAlias::ToolA,
            quality,
            has_unrelated_changes: false,
            strategy: None,
            justification: String::new(),
        }
    }

    #[test]
    fn strategy_vocabulary_must_match_quality() {
        let mut record = rating("r1", QualityVote::RootCauseFix);
        record.strategy = Some(Strategy::RootCause(RootCauseStrategy::BoundCheck));
        record.validate().unwrap();

        record.strategy = Some(Strategy::Symptom(SymptomStrategy::CrashSiteGuard));
        assert!(record.validate().is_err());

        record.quality = QualityVote::Abstain;
        record.strategy = Some(Strategy::Symptom(SymptomStrategy::CrashSiteGuard));
        assert!(record.validate().is_err());

        let json = serde_json::to_string(&Strategy::Symptom(SymptomStrategy::LifetimeMasking))
            .unwrap();
        assert_eq!(json, "\"lifetime_masking\"");
        let back: Strategy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Strategy::Symptom(SymptomStrategy::LifetimeMasking));
    }

    #[test]
    fn majority_vote_follows_the_panel() {
        let two_of_three = vec![
            rating("r1", QualityVote::RootCauseFix),
            rating("r2", QualityVote::RootCauseFix),
            rating("r3", QualityVote::SymptomFix),
        ];
        assert_eq!(majority_vote(&two_of_three).unwrap(), QualityLabel::RootCauseFix);

        let unanimous = vec![
            rating("r1", QualityVote::SymptomFix),
            rating("r2", QualityVote::SymptomFix),
            rating("r3", QualityVote::SymptomFix),
        ];
        assert_eq!(majority_vote(&unanimous).unwrap(), QualityLabel::SymptomFix);

        let mut reversed = unanimous.clone();
        reversed.reverse();
        assert_eq!(majority_vote(&reversed).unwrap(), majority_vote(&unanimous).unwrap());

        assert!(majority_vote(&two_of_three[..2]).is_err());

        let abstain_plurality = vec![
            rating("r1", QualityVote::Abstain),
            rating("r2", QualityVote::Abstain),
            rating("r3", QualityVote::RootCauseFix),
        ];
        assert!(majority_vote(&abstain_plurality).is_err());
    }

    #[test]
    fn fleiss_kappa_matches_the_hand_case() {
        let matrix = vec![vec![2, 1], vec![1, 2]];
        let kappa = fleiss_kappa(&matrix, 3).unwrap();
        assert!((kappa - (-1.0 / 3.0)).abs() < 1e-12, "kappa = {kappa}");
    }

    #[test]
    fn unanimous_items_in_varying_categories_score_one() {
        let mut matrix = Vec::new();
        for i in 0..10 {
            let mut row = vec![0, 0, 0];
            row[i % 3] = 3;
            matrix.push(row);
        }
        let kappa = fleiss_kappa(&matrix, 3).unwrap();
        assert!((kappa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_rejects_degenerate_and_malformed_tables() {
        assert!(matches!(
            fleiss_kappa(&[vec![3, 0], vec![3, 0]], 3),
            Err(Error::Degenerate)
        ));
        assert!(fleiss_kappa(&[vec![2, 2]], 3).is_err());
        assert!(fleiss_kappa(&[vec![1, 0]], 1).is_err());
        assert!(fleiss_kappa(&[vec![3]], 3).is_err());
        assert!(fleiss_kappa(&[], 3).is_err());
    }

    #[test]
    fn kappa_is_invariant_under_category_relabeling() {
        let matrix = vec![vec![2, 1, 0], vec![0, 2, 1], vec![1, 1, 1], vec![3, 0, 0]];
        let swapped: Vec<Vec<usize>> =
            matrix.iter().map(|row| vec![row[2], row[0], row[1]]).collect();
        let a = fleiss_kappa(&matrix, 3).unwrap();
        let b = fleiss_kappa(&swapped, 3).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn raw_agreement_examples() {
        let identical = vec![vec![1, 1], vec![2, 2], vec![3, 3]];
        assert_eq!(raw_agreement(&identical).unwrap(), 1.0);

        // Three raters, the third disagreeing with both others on every
        // item: pairwise agreements 1, 0, 0.
        let table: Vec<Vec<u8>> = (0..10).map(|_| vec![1, 1, 2]).collect();
        let agree = raw_agreement(&table).unwrap();
        assert!((agree - 1.0 / 3.0).abs() < 1e-12);

        assert!(raw_agreement::<u8>(&[]).is_err());
        assert!(raw_agreement(&[vec![1]]).is_err());
    }

    #[test]
    fn prevalence_skips_abstentions() {
        let votes = [
            QualityVote::RootCauseFix,
            QualityVote::RootCauseFix,
            QualityVote::SymptomFix,
            QualityVote::Abstain,
        ];
        assert!((prevalence_positive(&votes).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(prevalence_positive(&[QualityVote::Abstain]).is_err());
    }

    #[test]
    fn sign_test_reproduces_the_reference_cases() {
        let test = pairwise_sign_test(68, 39).unwrap();
        assert!(test.p_value > 0.0060 && test.p_value < 0.0070, "p = {}", test.p_value);
        assert!((test.win_rate - 0.636).abs() < 0.001);
        assert!((test.ci_low - 0.544).abs() < 0.001);
        assert!((test.ci_high - 0.727).abs() < 0.001);

        let shutout = pairwise_sign_test(10, 0).unwrap();
        assert!((shutout.p_value - 2.0 * 0.5f64.powi(10)).abs() < 1e-15);

        let split = pairwise_sign_test(5, 5).unwrap();
        assert_eq!(split.p_value, 1.0);

        assert!(pairwise_sign_test(0, 0).is_err());
    }

    #[test]
    fn sign_test_is_symmetric() {
        let ab = pairwise_sign_test(17, 6).unwrap();
        let ba = pairwise_sign_test(6, 17).unwrap();
        assert!((ab.p_value - ba.p_value).abs() < 1e-15);
        assert!((ab.win_rate - (1.0 - ba.win_rate)).abs() < 1e-15);
    }

    #[test]
    fn rubric_ranks_correctness_first() {
        let rc = FinalLabel { quality: QualityLabel::RootCauseFix, has_unrelated_changes: false };
        let sf = FinalLabel { quality: QualityLabel::SymptomFix, has_unrelated_changes: false };

        assert_eq!(rubric_compare(rc, sf, None).unwrap(), Winner::ToolA);
        assert_eq!(rubric_compare(sf, rc, None).unwrap(), Winner::ToolB);
        // The correctness stratum is decisive even when a human verdict
        // disagrees.
        assert_eq!(rubric_compare(rc, sf, Some(Winner::ToolB)).unwrap(), Winner::ToolA);
        assert_eq!(rubric_compare(rc, rc, Some(Winner::ToolB)).unwrap(), Winner::ToolB);
        assert!(matches!(rubric_compare(sf, sf, None), Err(Error::MissingTiebreak)));
    }

    #[test]
    fn verdict_summary_counts_majorities() {
        let mut verdicts = Vec::new();
        for (bug, winner) in [("b1", Winner::ToolA), ("b2", Winner::ToolB), ("b3", Winner::Tie)] {
            for rater in ["r1", "r2", "r3"] {
                verdicts.push(PairVerdict { bug: bug.into(), rater: rater.into(), winner });
            }
        }
        // One split decision still resolved by 2-of-3.
        for (rater, winner) in [("r1", Winner::ToolA), ("r2", Winner::ToolA), ("r3", Winner::Tie)] {
            verdicts.push(PairVerdict { bug: "b4".into(), rater: rater.into(), winner });
        }
        let summary = summarize_verdicts(&verdicts).unwrap();
        assert_eq!((summary.wins_a, summary.wins_b, summary.ties), (2, 1, 1));
        let sign = summary.sign_test.unwrap();
        assert_eq!(sign.decisive, 3);

        let split = vec![
            PairVerdict { bug: "b9".into(), rater: "r1".into(), winner: Winner::ToolA },
            PairVerdict { bug: "b9".into(), rater: "r2".into(), winner: Winner::ToolB },
            PairVerdict { bug: "b9".into(), rater: "r3".into(), winner: Winner::Tie },
        ];
        assert!(summarize_verdicts(&split).is_err());
    }

    #[test]
    fn store_round_trips_and_flags_bad_lines() {
        let text = concat!(
            r#"{"kind":"rating","rater":"r1","bug":"b1","tool_alias":"tool_a","quality":"root_cause_fix","has_unrelated_changes":false,"strategy":"bound_check","justification":"adds the missing length check"}"#,
            "\n",
            r#"{"kind":"verdict","bug":"b1","rater":"r1","winner":"tool_a"}"#,
            "\n",
        );
        let store = RatingStore::parse(text).unwrap();
        assert_eq!(store.ratings.len(), 1);
        assert_eq!(store.verdicts.len(), 1);
        assert_eq!(
            store.ratings[0].strategy,
            Some(Strategy::RootCause(RootCauseStrategy::BoundCheck))
        );

        let err = RatingStore::parse("{\"kind\":\"rating\"}\n").unwrap_err();
        assert!(matches!(err, Error::Schema { index: 0, .. }));
    }

    #[test]
    fn stats_report_covers_labels_and_verdicts() {
        let mut text = String::new();
        let votes = ["root_cause_fix", "root_cause_fix", "symptom_fix"];
        for bug in ["b1", "b2"] {
            for (rater, vote) in ["r1", "r2", "r3"].iter().zip(votes) {
                text.push_str(&format!(
                    "{{\"kind\":\"rating\",\"rater\":\"{rater}\",\"bug\":\"{bug}\",\"tool_alias\":\"tool_a\",\"quality\":\"{vote}\",\"has_unrelated_changes\":{}}}\n",
                    bug == "b2"
                ));
                let winner = if bug == "b1" { "tool_a" } else { "tool_b" };
                text.push_str(&format!(
                    "{{\"kind\":\"verdict\",\"bug\":\"{bug}\",\"rater\":\"{rater}\",\"winner\":\"{winner}\"}}\n"
                ));
            }
        }
        let store = RatingStore::parse(&text).unwrap();
        let report = stats_report(&store).unwrap();
        assert_eq!(report.rows.len(), 3);
        let quality = &report.rows[0];
        assert_eq!(quality.tool, Some(ToolAlias::ToolA));
        assert!((quality.stats.prevalence_positive.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let winner = report.rows.last().unwrap();
        assert_eq!(winner.tool, None);
        assert_eq!(winner.stats.prevalence_positive, None);
        let verdicts = report.verdicts.unwrap();
        assert_eq!((verdicts.wins_a, verdicts.wins_b, verdicts.ties), (1, 1, 0));
        assert!(stats_report(&RatingStore::default()).is_err());
    }

    #[test]
    fn anonymization_is_deterministic_and_covers_both_orientations() {
        let one = AliasAssignment::new("left", "right", 7).unwrap();
        let two = AliasAssignment::new("right", "left", 7).unwrap();
        assert_eq!(one.alias_of("left"), two.alias_of("left"));
        assert_eq!(one.alias_of("nope"), None);

        let mut saw_a = false;
        let mut saw_b = false;
        for seed in 0..64 {
            match AliasAssignment::new("left", "right", seed).unwrap().alias_of("left").unwrap() {
                ToolAlias::ToolA => saw_a = true,
                ToolAlias::ToolB => saw_b = true,
            }
        }
        assert!(saw_a && saw_b, "orientation never flips across seeds");
        assert!(AliasAssignment::new("same", "same", 0).is_err());
    }

    #[test]
    fn unseal_waits_for_a_complete_roster() {
        let mut protocol =
            RatingProtocol::new(("left", "right"), 3, &["r1"], &["b1"]).unwrap();
        assert!(protocol.unseal().is_err());

        let alias_of_left = protocol.assignment.alias_of("left").unwrap();
        for alias in [ToolAlias::ToolA, ToolAlias::ToolB] {
            let record = RatingRecord {
                rater: "r1".into(),
                bug: "b1".into(),
                tool_alias: alias,
                quality: QualityVote::RootCauseFix,
                has_unrelated_changes: false,
                strategy: None,
                justification: String::new(),
            };
            protocol.submit(&record).unwrap();
            assert!(protocol.submit(&record).is_err(), "duplicate accepted");
        }
        assert!(protocol.is_complete());
        let map = protocol.unseal().unwrap();
        assert_eq!(map[&alias_of_left], "left");
        assert!(protocol.log().iter().any(|line| line.contains("unsealed")));

        let stranger = RatingRecord {
            rater: "r9".into(),
            bug: "b1".into(),
            tool_alias: ToolAlias::ToolA,
            quality: QualityVote::SymptomFix,
            has_unrelated_changes: false,
            strategy: None,
            justification: String::new(),
        };
        assert!(protocol.submit(&stranger).is_err());
    }
}
