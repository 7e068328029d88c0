//! Fault localization and patch orchestration for sanitizer-reported crashes.
//!
//! The crate implements a three-stage pipeline:
//!
//! 1. **Collection** — parse an ASan-style crash report ([`report`]),
//!    ingest per-variant execution traces ([`traces`]), walk the static
//!    call graph outward from crash/alloc/free anchors ([`callgraph`]),
//!    and ingest externally produced dataflow candidates. Everything is
//!    fused into one deduplicated, evidence-tagged pool ([`pool`]).
//! 2. **Ranking** — score each candidate with an ordered-weighted average
//!    within each evidence family and a noisy-OR across families, then
//!    apply a file-level diversity rerank to the tail ([`ranking`]).
//! 3. **Repair** — hand the ranked list to a tool-calling agent over a
//!    baselined working copy, verify edits with compile / PoC-replay /
//!    test oracles, and classify the outcome ([`repair`]).
//!
//! Patch quality beyond the oracles is assessed with blinded human
//! ratings and the statistics over them — majority vote, Fleiss's kappa,
//! raw agreement, sign test and win-rate confidence interval
//! ([`assessment`]).
//!
//! Start with the `examples/` directory: each major capability has a
//! runnable walkthrough over the fixtures shipped in `fixtures/`.

pub mod assessment;
pub mod callgraph;
pub mod config;
pub mod error;
pub mod interchange;
pub mod pipeline;
pub mod pool;
pub mod ranking;
pub mod repair;
pub mod report;
pub mod traces;

pub use error::{Error, Result};
