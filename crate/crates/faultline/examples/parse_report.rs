//! Parse sanitizer reports of every supported crash class and show the
//! extracted stacks, plus the rejection of a non-report input.
//!
//! Run with `cargo run --example parse_report`.

use std::path::Path;

use faultline::report::{parse_report, StackFrame};

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/reports")
        .join(name);
    std::fs::read_to_string(path).expect("report fixture")
}

fn show_stack(label: &str, stack: &[StackFrame]) {
    if stack.is_empty() {
        return;
    }
    println!("  {label}:");
    for frame in stack {
        let site = match (&frame.file, frame.line) {
            (Some(file), Some(line)) => format!("{file}:{line}"),
            (Some(file), None) => file.clone(),
            _ => "<no source>".into(),
        };
        println!("    #{} {} {}", frame.ordinal, frame.function, site);
    }
}

fn main() {
    for name in [
        "uaf.txt",
        "heap_overflow.txt",
        "npd.txt",
        "num.txt",
        "other.txt",
    ] {
        let report = parse_report(&fixture(name)).expect("well-formed fixture");
        println!(
            "{name}: {} -> crash class {:?}",
            report.bug_label, report.crash_class
        );
        show_stack("crash stack", &report.crash_stack);
        show_stack("freed by", &report.free_stack);
        show_stack("allocated by", &report.alloc_stack);
        show_stack("object origin", &report.object_origin);
        println!();
    }

    match parse_report(&fixture("malformed.txt")) {
        Ok(_) => println!("malformed.txt: unexpectedly parsed"),
        Err(err) => println!("malformed.txt: rejected as expected ({err})"),
    }
}
