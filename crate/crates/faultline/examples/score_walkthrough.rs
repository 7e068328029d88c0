//! Walk through the evidence-weighted scoring arithmetic by hand on a
//! use-after-free candidate, then confirm `score_candidate` agrees.
//!
//! The score for one candidate is built in two steps:
//!
//! 1. Per evidence family, an ordered-weighted average of the active
//!    tag weights, capped by the family cap:
//!    `s_f = min(c_f, w_(1) + alpha * sum(w_(2..)))`.
//! 2. Across families, a noisy-OR: `s = 1 - prod(1 - s_f)`.
//!
//! Run with `cargo run --example score_walkthrough`.

use std::collections::BTreeSet;

use faultline::pool::{EvidenceTag, FoiCandidate};
use faultline::ranking::{combine_score, family_score, score_candidate, RankingConfig};
use faultline::report::CrashClass;

fn candidate(tags: &[EvidenceTag]) -> FoiCandidate {
    FoiCandidate {
        function: "do_close".into(),
        file: Some("/src/session.c".into()),
        tags: BTreeSet::from_iter(tags.iter().copied()),
        meta: Default::default(),
        signals: None,
    }
}

fn main() {
    let config = RankingConfig::default();
    let class = CrashClass::Uaf;
    println!("crash class: {class:?}, alpha = {}", config.weights.alpha);
    println!();

    // The crash frame function of a UAF also appears on the free and
    // allocation stacks. Three tags, two families.
    println!("candidate with CrashStack + FreeStack + AllocStack:");
    let crash = family_score(&[0.85], config.weights.alpha, 0.97).unwrap();
    println!("  crash family:  min(0.97, 0.85)                 = {crash}");
    let alloc = family_score(&[0.65, 0.90], config.weights.alpha, 0.95).unwrap();
    println!("  alloc family:  min(0.95, 0.90 + 0.25 * 0.65)   = {alloc}");
    let combined = combine_score(&[crash, alloc]).unwrap();
    println!("  noisy-OR:      1 - (1 - {crash}) * (1 - {alloc}) = {combined}");

    let scored = score_candidate(
        &candidate(&[
            EvidenceTag::CrashStack,
            EvidenceTag::FreeStack,
            EvidenceTag::AllocStack,
        ]),
        class,
        &config,
    )
    .unwrap();
    println!("  score_candidate agrees: {}", scored.score);
    assert_eq!(scored.score, combined);
    println!();

    // Dropping the crash-stack tag leaves the alloc family alone.
    let scored = score_candidate(
        &candidate(&[EvidenceTag::FreeStack, EvidenceTag::AllocStack]),
        class,
        &config,
    )
    .unwrap();
    println!("FreeStack + AllocStack only:        {}", scored.score);

    // A single crash-stack tag scores exactly its weight.
    let scored = score_candidate(&candidate(&[EvidenceTag::CrashStack]), class, &config).unwrap();
    println!("CrashStack only:                    {}", scored.score);
    println!();

    // Weights are crash-class conditioned: under an NPD the crash-stack
    // weight rises, and under a non-UAF class the free-stack weight
    // drops.
    let scored = score_candidate(&candidate(&[EvidenceTag::CrashStack]), CrashClass::Npd, &config)
        .unwrap();
    println!("CrashStack under Npd:               {}", scored.score);
    let scored = score_candidate(
        &candidate(&[EvidenceTag::FreeStack]),
        CrashClass::Spatial,
        &config,
    )
    .unwrap();
    println!("FreeStack under Spatial:            {}", scored.score);
}
