//! Build occurrence statistics over a crash family's execution traces,
//! and collect a family from recorded fuzzer exploration output while
//! excluding variants that hit a different bug.
//!
//! Run with `cargo run --example trace_family`.

use std::path::Path;

use faultline::report::{classify_crash, parse_report};
use faultline::traces::{family_stats, load_traces, StubFuzzer};

fn fixture(rel: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn main() {
    // Occurrence fractions over a family of recorded traces. A function
    // seen in every trace is a stronger dynamic signal than one seen in
    // a single variant, so the fraction later discounts the CallTrace
    // evidence weight.
    let text = std::fs::read_to_string(fixture("traces/uaf.jsonl")).unwrap();
    let traces = load_traces(&text).unwrap();
    let stats = family_stats(&traces).unwrap();
    println!("{} traces in the family", stats.total_traces());
    let mut rows: Vec<(&str, usize)> = stats.functions().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    for (function, count) in rows {
        println!(
            "  {function:<18} seen in {count}/{} traces (fraction {:.2})",
            stats.total_traces(),
            stats.fraction(function)
        );
    }
    println!();

    // Collecting a family from exploration output. The seed crash is a
    // heap buffer overflow; variant v2 triggers a null dereference
    // instead, so it is dropped before any statistics are computed.
    let seed = parse_report(
        &std::fs::read_to_string(fixture("reports/heap_overflow.txt")).unwrap(),
    )
    .unwrap();
    let seed_class = classify_crash(&seed.bug_label);
    println!("seed bug: {} ({seed_class:?})", seed.bug_label);

    let fuzzer = StubFuzzer::new(fixture("exploration"));
    let (variants, family) = fuzzer.collect_family(seed_class).unwrap();
    println!(
        "exploration dir has v1, v2, v3; {} variants kept:",
        variants.len()
    );
    for variant in &variants {
        println!("  {} -> {}", variant.id, variant.input_ref.display());
    }

    let stats = family_stats(&family).unwrap();
    println!("family fractions over the kept traces:");
    let mut rows: Vec<(&str, usize)> = stats.functions().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    for (function, _) in rows {
        println!("  {function:<18} {:.2}", stats.fraction(function));
    }
}
