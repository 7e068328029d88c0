//! Sanitizer crash-report parsing and crash classification.
//!
//! Accepts ASan-style plain-text reports: a header line carrying the bug
//! label, a crash stack, and optional allocation / free / object-origin
//! stacks. Frame lines have the shape
//! `#<n> 0x<hex> in <symbol> <file>:<line>[:<col>]` with tolerant
//! whitespace; unrecognized lines inside a section are skipped.

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One frame of a reported stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackFrame {
    /// 0-based frame index, unique and contiguous within one stack.
    pub ordinal: usize,
    pub function: String,
    pub file: Option<String>,
    pub line: Option<u32>,
}

/// The five crash classes used to condition evidence weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrashClass {
    /// Buffer overflows and out-of-bound accesses.
    Spatial,
    /// Use-after-free, double-free, invalid-free.
    Uaf,
    /// Null-pointer dereference.
    Npd,
    /// Divide-by-zero, integer overflow, invalid bit-shift.
    Num,
    /// Total catch-all; classification never fails.
    Other,
}

/// A parsed sanitizer report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanitizerReport {
    pub raw_text: String,
    /// Normalized sanitizer label, e.g. `heap-buffer-overflow`.
    pub bug_label: String,
    pub crash_class: CrashClass,
    pub crash_stack: Vec<StackFrame>,
    pub alloc_stack: Vec<StackFrame>,
    pub free_stack: Vec<StackFrame>,
    pub object_origin: Vec<StackFrame>,
}

/// Lowercase the label and fold spaces/underscores to hyphens.
pub fn normalize_label(label: &str) -> String {
    label
        .trim()
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '_' { '-' } else { c })
        .collect()
}

/// Map a sanitizer label onto a crash class. Total: unknown labels fall
/// through to [`CrashClass::Other`].
pub fn classify_crash(bug_label: &str) -> CrashClass {
    let l = normalize_label(bug_label);
    if l.contains("use-after-free")
        || l.contains("double-free")
        || l.contains("invalid-free")
        || l.contains("use-after-poison")
    {
        CrashClass::Uaf
    } else if l.contains("buffer-overflow")
        || l.contains("buffer-underflow")
        || l.contains("out-of-bound")
    {
        CrashClass::Spatial
    } else if l.contains("null") {
        CrashClass::Npd
    } else if l.contains("divide-by-zero")
        || l.contains("division-by-zero")
        || l.contains("integer-overflow")
        || l.contains("shift")
        || l.contains("fpe")
    {
        CrashClass::Num
    } else {
        CrashClass::Other
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Crash,
    Alloc,
    Free,
    Origin,
    Done,
}

/// Parse a plain-text sanitizer report.
///
/// Returns [`Error::Parse`] with the byte offset just past the last
/// successfully parsed line when no crash stack can be located.
pub fn parse_report(text: &str) -> Result<SanitizerReport> {
    let frame_re = Regex::new(r"^\s*#(\d+)\s+0x[0-9a-fA-F]+\s+in\s+(\S+)\s*(.*)$").unwrap();
    let header_re = Regex::new(r"^==\d+==\s*ERROR:\s*\S*Sanitizer:?\s*(.*)$").unwrap();
    let summary_re = Regex::new(r"^SUMMARY:\s*\S*Sanitizer:?\s*(\S+)").unwrap();

    let mut label = String::new();
    let mut summary_label = String::new();
    let mut section = Section::Preamble;
    let mut crash = Vec::new();
    let mut alloc = Vec::new();
    let mut free = Vec::new();
    let mut origin = Vec::new();
    let mut parsed_to = 0usize;
    let mut offset = 0usize;

    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let line = line.strip_suffix('\n').unwrap_or(line);
        let line = line.strip_suffix('\r').unwrap_or(line);

        if let Some(cap) = header_re.captures(line) {
            if label.is_empty() {
                label = extract_label(&cap[1]);
            }
            section = Section::Crash;
            parsed_to = start + line.len();
            continue;
        }
        if let Some(cap) = summary_re.captures(line) {
            summary_label = normalize_label(&cap[1]);
            section = Section::Done;
            parsed_to = start + line.len();
            continue;
        }
        if line.contains("allocated by thread") {
            section = Section::Alloc;
            parsed_to = start + line.len();
            continue;
        }
        if line.contains("freed by thread") {
            section = Section::Free;
            parsed_to = start + line.len();
            continue;
        }
        if line.contains("is located in stack of thread") {
            section = Section::Origin;
            parsed_to = start + line.len();
            continue;
        }
        if let Some(cap) = frame_re.captures(line) {
            let ordinal: usize = cap[1].parse().unwrap_or(usize::MAX);
            let (file, line_no) = parse_location(&cap[3]);
            let frame = StackFrame {
                ordinal,
                function: cap[2].to_string(),
                file,
                line: line_no,
            };
            let stack = match section {
                Section::Crash => Some(&mut crash),
                Section::Alloc => Some(&mut alloc),
                Section::Free => Some(&mut free),
                Section::Origin => Some(&mut origin),
                Section::Preamble | Section::Done => None,
            };
            if let Some(stack) = stack {
                if frame.ordinal == stack.len() {
                    stack.push(frame);
                    parsed_to = start + line.len();
                }
            }
        }
    }

    if crash.is_empty() {
        return Err(Error::Parse { offset: parsed_to });
    }
    if label.is_empty() {
        label = summary_label;
    }
    let crash_class = classify_crash(&label);
    Ok(SanitizerReport {
        raw_text: text.to_string(),
        bug_label: label,
        crash_class,
        crash_stack: crash,
        alloc_stack: alloc,
        free_stack: free,
        object_origin: origin,
    })
}

/// Ordered anchor symbols for the call-graph traversal: crash-stack
/// functions outward from the crash frame, then allocation frames for
/// spatial and temporal bugs, then free frames for use-after-free.
/// Duplicates keep their first occurrence; at most `limit` symbols.
pub fn anchors_from_report(report: &SanitizerReport, limit: usize) -> Vec<String> {
    let mut ordered: Vec<&[StackFrame]> = vec![&report.crash_stack];
    if matches!(report.crash_class, CrashClass::Spatial | CrashClass::Uaf) {
        ordered.push(&report.alloc_stack);
    }
    if report.crash_class == CrashClass::Uaf {
        ordered.push(&report.free_stack);
    }
    let mut out: Vec<String> = Vec::new();
    for stack in ordered {
        for frame in stack {
            if out.len() == limit {
                return out;
            }
            if !out.iter().any(|f| *f == frame.function) {
                out.push(frame.function.clone());
            }
        }
    }
    out
}

fn extract_label(rest: &str) -> String {
    let mut cut = rest.len();
    for marker in [" on address", " on unknown address", " at pc", " on 0x", ": ("] {
        if let Some(pos) = rest.find(marker) {
            cut = cut.min(pos);
        }
    }
    normalize_label(rest[..cut].trim_end_matches(':'))
}

fn parse_location(rest: &str) -> (Option<String>, Option<u32>) {
    let token = rest.split_whitespace().next().unwrap_or("");
    if token.is_empty() || token.starts_with('(') {
        return (None, None);
    }
    let parts: Vec<&str> = token.split(':').collect();
    if parts.len() >= 3 {
        if let (Ok(line), Ok(_col)) = (
            parts[parts.len() - 2].parse::<u32>(),
            parts[parts.len() - 1].parse::<u32>(),
        ) {
            return (Some(parts[..parts.len() - 2].join(":")), Some(line));
        }
    }
    if parts.len() >= 2 {
        if let Ok(line) = parts[parts.len() - 1].parse::<u32>() {
            return (Some(parts[..parts.len() - 1].join(":")), Some(line));
        }
    }
    (Some(token.to_string()), None)
}
