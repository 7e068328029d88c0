//! The eight-tool surface exposed to the repair agent, backed by a
//! lightweight C function index over the working copy.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::repair::prompt::{render_detail, RcaEntry};
use crate::repair::verifier::{run_verifier, Oracle, StageStatus, VerifierResult};
use crate::repair::worktree::{SubstitutionOutcome, WorkingCopy};

const C_EXTENSIONS: [&str; 6] = ["c", "h", "cc", "cpp", "cxx", "hpp"];
const KEYWORDS: [&str; 10] =
    ["if", "else", "for", "while", "switch", "return", "sizeof", "do", "case", "defined"];
const MAX_READ_LINES: usize = 400;
const MAX_SEARCH_HITS: usize = 50;

/// One indexed function definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionInfo {
    pub name: String,
    pub file: String,
    pub start_line: usize,
    pub end_line: usize,
    pub source: String,
    pub callees: Vec<String>,
    pub globals_used: Vec<String>,
}

/// Regex-based index of file-scope C function definitions and globals.
/// Deliberately heuristic: the raw-text search fallback covers misses.
#[derive(Debug, Default)]
pub struct FunctionIndex {
    functions: Vec<FunctionInfo>,
    by_name: BTreeMap<String, Vec<usize>>,
}

/// Blank out comment and string-literal interiors, preserving byte
/// offsets, so brace matching never trips over quoted braces.
fn mask_code(text: &str) -> String {
    #[derive(PartialEq)]
    enum State {
        Code,
        Line,
        Block,
        Str,
        Chr,
    }
    let mut state = State::Code;
    let mut out: Vec<u8> = Vec::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let next = bytes.get(i + 1).copied();
        match state {
            State::Code => match (b, next) {
                (b'/', Some(b'/')) => {
                    state = State::Line;
                    out.extend([b' ', b' ']);
                    i += 2;
                    continue;
                }
                (b'/', Some(b'*')) => {
                    state = State::Block;
                    out.extend([b' ', b' ']);
                    i += 2;
                    continue;
                }
                (b'"', _) => {
                    state = State::Str;
                    out.push(b'"');
                }
                (b'\'', _) => {
                    state = State::Chr;
                    out.push(b'\'');
                }
                _ => out.push(b),
            },
            State::Line => {
                if b == b'\n' {
                    state = State::Code;
                    out.push(b'\n');
                } else {
                    out.push(b' ');
                }
            }
            State::Block => {
                if b == b'*' && next == Some(b'/') {
                    state = State::Code;
                    out.extend([b' ', b' ']);
                    i += 2;
                    continue;
                }
                out.push(if b == b'\n' { b'\n' } else { b' ' });
            }
            State::Str => match (b, next) {
                (b'\\', Some(_)) => {
                    out.extend([b' ', b' ']);
                    i += 2;
                    continue;
                }
                (b'"', _) => {
                    state = State::Code;
                    out.push(b'"');
                }
                _ => out.push(if b == b'\n' { b'\n' } else { b' ' }),
            },
            State::Chr => match (b, next) {
                (b'\\', Some(_)) => {
                    out.extend([b' ', b' ']);
                    i += 2;
                    continue;
                }
                (b'\'', _) => {
                    state = State::Code;
                    out.push(b'\'');
                }
                _ => out.push(if b == b'\n' { b'\n' } else { b' ' }),
            },
        }
        i += 1;
    }
    String::from_utf8(out).expect("masking preserves utf-8 structure")
}

fn matching_delim(masked: &[u8], open_at: usize, open: u8, close: u8) -> Option<usize> {
    let mut depth = 0usize;
    for (i, &b) in masked.iter().enumerate().skip(open_at) {
        if b == open {
            depth += 1;
        } else if b == close {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset].bytes().filter(|&b| b == b'\n').count() + 1
}

fn index_file(file: &str, text: &str, functions: &mut Vec<FunctionInfo>) {
    let masked = mask_code(text);
    let masked_bytes = masked.as_bytes();
    // A definition candidate starts at column 0 with an identifier and
    // reaches an identifier followed by '(' without hitting a
    // terminator first.
    let head = regex::Regex::new(r"(?m)^[A-Za-z_][^;{}#]*?([A-Za-z_][A-Za-z0-9_]*)\s*\(")
        .expect("static regex");
    let ident = regex::Regex::new(r"[A-Za-z_][A-Za-z0-9_]*").expect("static regex");

    let mut body_ranges: Vec<(usize, usize)> = Vec::new();
    for caps in head.captures_iter(&masked) {
        let name = caps.get(1).expect("group").as_str().to_string();
        if KEYWORDS.contains(&name.as_str()) {
            continue;
        }
        let whole = caps.get(0).expect("match");
        // Skip matches inside an already-recorded function body.
        if body_ranges.iter().any(|&(s, e)| whole.start() >= s && whole.start() < e) {
            continue;
        }
        let paren_open = whole.end() - 1;
        let Some(paren_close) = matching_delim(masked_bytes, paren_open, b'(', b')') else {
            continue;
        };
        let mut cursor = paren_close + 1;
        while cursor < masked_bytes.len() && masked_bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        if masked_bytes.get(cursor) != Some(&b'{') {
            continue;
        }
        let Some(body_close) = matching_delim(masked_bytes, cursor, b'{', b'}') else {
            continue;
        };
        body_ranges.push((whole.start(), body_close + 1));

        let body_masked = &masked[cursor..=body_close];
        let mut callees = BTreeSet::new();
        let mut search_from = 0;
        while let Some(m) = ident.find_at(body_masked, search_from) {
            let after = body_masked[m.end()..].trim_start();
            let word = m.as_str();
            if after.starts_with('(') && !KEYWORDS.contains(&word) && word != name {
                callees.insert(word.to_string());
            }
            search_from = m.end();
        }
        functions.push(FunctionInfo {
            name,
            file: file.to_string(),
            start_line: line_of(text, whole.start()),
            end_line: line_of(text, body_close),
            source: text[whole.start()..=body_close].to_string(),
            callees: callees.into_iter().collect(),
            globals_used: Vec::new(),
        });
    }

    // File-scope globals: simple declarations outside every body.
    let mut scope_only = masked.clone().into_bytes();
    for &(start, end) in &body_ranges {
        for b in &mut scope_only[start..end] {
            if *b != b'\n' {
                *b = b' ';
            }
        }
    }
    let scope_only = String::from_utf8(scope_only).expect("mask keeps utf-8");
    let global = regex::Regex::new(
        r"(?m)^(?:static\s+|extern\s+|const\s+|unsigned\s+|volatile\s+)*[A-Za-z_][A-Za-z0-9_]*[A-Za-z0-9_\s\*]*?\b([A-Za-z_][A-Za-z0-9_]*)\s*(?:\[[^\]]*\])?\s*(?:=[^;]*)?;",
    )
    .expect("static regex");
    let mut globals = BTreeSet::new();
    for caps in global.captures_iter(&scope_only) {
        let whole = caps.get(0).expect("match").as_str();
        if whole.contains('(') || whole.starts_with("typedef") || whole.starts_with("struct ") {
            continue;
        }
        globals.insert(caps.get(1).expect("group").as_str().to_string());
    }
    if globals.is_empty() {
        return;
    }
    for info in functions.iter_mut().filter(|f| f.file == file) {
        let body = &info.source;
        info.globals_used = globals
            .iter()
            .filter(|g| {
                let pattern = format!(r"\b{}\b", regex::escape(g));
                regex::Regex::new(&pattern).map(|re| re.is_match(body)).unwrap_or(false)
            })
            .cloned()
            .collect();
    }
}

impl FunctionIndex {
    pub fn build(copy: &WorkingCopy) -> Result<FunctionIndex> {
        let mut functions = Vec::new();
        let paths: Vec<String> = copy
            .tracked_paths()
            .filter(|p| {
                PathBuf::from(p)
                    .extension()
                    .and_then(|e| e.to_str())
                    .map(|e| C_EXTENSIONS.contains(&e))
                    .unwrap_or(false)
            })
            .map(str::to_string)
            .collect();
        for path in paths {
            match copy.read_text(&path) {
                Ok(text) => index_file(&path, &text, &mut functions),
                // A tracked source file deleted mid-run simply drops
                // out of the index.
                Err(Error::Io(_)) => continue,
                Err(err) => return Err(err),
            }
        }
        let mut by_name: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, info) in functions.iter().enumerate() {
            by_name.entry(info.name.clone()).or_default().push(i);
        }
        Ok(FunctionIndex { functions, by_name })
    }

    pub fn lookup(&self, name: &str) -> Vec<&FunctionInfo> {
        self.by_name
            .get(name)
            .map(|ids| ids.iter().map(|&i| &self.functions[i]).collect())
            .unwrap_or_default()
    }

    pub fn functions(&self) -> &[FunctionInfo] {
        &self.functions
    }

    pub fn in_file(&self, file: &str) -> Vec<&FunctionInfo> {
        self.functions.iter().filter(|f| f.file == file).collect()
    }
}

/// Source excerpt for a ranked candidate, truncated for prompt use.
pub fn excerpt_for(
    index: &FunctionIndex,
    function: &str,
    file: Option<&str>,
    max_lines: usize,
) -> Option<String> {
    let hits = index.lookup(function);
    let info = match file {
        Some(file) => hits.iter().find(|f| f.file == file).or(hits.first())?,
        None => hits.first()?,
    };
    let lines: Vec<&str> = info.source.lines().collect();
    if lines.len() <= max_lines {
        Some(info.source.clone())
    } else {
        let mut out = lines[..max_lines].join("\n");
        out.push_str(&format!("\n... ({} more lines)", lines.len() - max_lines));
        Some(out)
    }
}

/// Structured tool call. Free-text invocations are rejected at the
/// protocol layer; only these eight calls exist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tool", content = "args", rename_all = "snake_case")]
pub enum ToolCall {
    ViewFunction {
        name: String,
    },
    ReadSourceFile {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end: Option<usize>,
    },
    SearchFunctions {
        pattern: String,
    },
    ListFunctionsInFile {
        path: String,
    },
    GetRcaResults {
        index: usize,
    },
    EditFile {
        path: String,
        old_text: String,
        new_text: String,
    },
    RevertEdits,
    ValidatePatch,
}

impl ToolCall {
    pub fn name(&self) -> &'static str {
        match self {
            ToolCall::ViewFunction { .. } => "view_function",
            ToolCall::ReadSourceFile { .. } => "read_source_file",
            ToolCall::SearchFunctions { .. } => "search_functions",
            ToolCall::ListFunctionsInFile { .. } => "list_functions_in_file",
            ToolCall::GetRcaResults { .. } => "get_rca_results",
            ToolCall::EditFile { .. } => "edit_file",
            ToolCall::RevertEdits => "revert_edits",
            ToolCall::ValidatePatch => "validate_patch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolReply {
    pub text: String,
    pub all_checks_passed: bool,
}

impl ToolReply {
    fn text(text: impl Into<String>) -> ToolReply {
        ToolReply { text: text.into(), all_checks_passed: false }
    }
}

fn is_protected(rel: &str, protected: &[String]) -> bool {
    let components: Vec<&str> = rel.split('/').filter(|c| !c.is_empty() && *c != ".").collect();
    let basename = components.last().copied().unwrap_or(rel);
    protected.iter().any(|entry| {
        if let Some(dir) = entry.strip_suffix('/') {
            components.contains(&dir)
        } else {
            rel == entry || basename == entry
        }
    })
}

/// The tool surface bound to one working copy, one oracle, and one
/// ranked-candidate list.
pub struct ToolSurface<'a> {
    copy: &'a mut WorkingCopy,
    oracle: &'a dyn Oracle,
    config: &'a RunConfig,
    poc: Option<PathBuf>,
    index: FunctionIndex,
    rca: Vec<RcaEntry>,
    last_validate_turn: Option<usize>,
    last_verifier: Option<VerifierResult>,
}

impl<'a> ToolSurface<'a> {
    pub fn new(
        copy: &'a mut WorkingCopy,
        oracle: &'a dyn Oracle,
        config: &'a RunConfig,
        poc: Option<PathBuf>,
        index: FunctionIndex,
        rca: Vec<RcaEntry>,
    ) -> ToolSurface<'a> {
        ToolSurface {
            copy,
            oracle,
            config,
            poc,
            index,
            rca,
            last_validate_turn: None,
            last_verifier: None,
        }
    }

    pub fn rca(&self) -> &[RcaEntry] {
        &self.rca
    }

    pub fn index(&self) -> &FunctionIndex {
        &self.index
    }

    pub fn last_verifier(&self) -> Option<&VerifierResult> {
        self.last_verifier.as_ref()
    }

    pub fn working_copy(&mut self) -> &mut WorkingCopy {
        self.copy
    }

    fn refresh_index(&mut self) -> Result<()> {
        self.index = FunctionIndex::build(self.copy)?;
        Ok(())
    }

    /// Execute one tool call. Agent-recoverable problems (bad paths,
    /// protected files, no-match edits) come back as reply text;
    /// infrastructure failures (oracle timeout/misconfiguration)
    /// propagate as errors.
    pub fn dispatch(&mut self, turn: usize, call: &ToolCall) -> Result<ToolReply> {
        match call {
            ToolCall::ViewFunction { name } => {
                let hits = self.index.lookup(name);
                if hits.is_empty() {
                    return Ok(ToolReply::text(format!(
                        "function '{name}' not found in the index; try search_functions or read_source_file"
                    )));
                }
                let mut out = String::new();
                for info in hits {
                    out.push_str(&format!(
                        "function {} ({}:{}-{})\n{}\n",
                        info.name, info.file, info.start_line, info.end_line, info.source
                    ));
                    if !out.ends_with('\n') {
                        out.push('\n');
                    }
                    out.push_str(&format!("callees: {}\n", info.callees.join(", ")));
                    out.push_str(&format!("globals used: {}\n", info.globals_used.join(", ")));
                }
                Ok(ToolReply::text(out))
            }
            ToolCall::ReadSourceFile { path, start, end } => {
                let text = match self.copy.read_text(path) {
                    Ok(text) => text,
                    Err(err) => return Ok(ToolReply::text(format!("cannot read {path}: {err}"))),
                };
                let lines: Vec<&str> = text.lines().collect();
                if lines.is_empty() {
                    return Ok(ToolReply::text(format!("{path} is empty")));
                }
                let from = start.unwrap_or(1).max(1);
                let to = end.unwrap_or(lines.len()).min(lines.len());
                if from > to {
                    return Ok(ToolReply::text(format!(
                        "requested range {from}..{to} is empty; {path} has {} lines",
                        lines.len()
                    )));
                }
                let mut out = String::new();
                let mut shown = 0;
                for (number, line) in lines.iter().enumerate().take(to).skip(from - 1) {
                    if shown == MAX_READ_LINES {
                        out.push_str(&format!("... truncated at {MAX_READ_LINES} lines\n"));
                        break;
                    }
                    out.push_str(&format!("{}| {}\n", number + 1, line));
                    shown += 1;
                }
                Ok(ToolReply::text(out))
            }
            ToolCall::SearchFunctions { pattern } => {
                if pattern.is_empty() {
                    return Ok(ToolReply::text("empty search pattern"));
                }
                let name_hits: Vec<String> = self
                    .index
                    .functions()
                    .iter()
                    .filter(|f| f.name.contains(pattern.as_str()))
                    .map(|f| format!("{} ({}:{}-{})", f.name, f.file, f.start_line, f.end_line))
                    .collect();
                if !name_hits.is_empty() {
                    return Ok(ToolReply::text(name_hits.join("\n") + "\n"));
                }
                // Index miss: fall back to raw source-text search.
                let mut text_hits = Vec::new();
                'files: for path in self.copy.tracked_paths().map(str::to_string).collect::<Vec<_>>() {
                    let Ok(text) = self.copy.read_text(&path) else { continue };
                    for (number, line) in text.lines().enumerate() {
                        if line.contains(pattern.as_str()) {
                            text_hits.push(format!("{path}:{}: {}", number + 1, line.trim_end()));
                            if text_hits.len() == MAX_SEARCH_HITS {
                                text_hits.push("... more matches truncated".into());
                                break 'files;
                            }
                        }
                    }
                }
                if text_hits.is_empty() {
                    Ok(ToolReply::text(format!("no matches for '{pattern}'")))
                } else {
                    Ok(ToolReply::text(format!(
                        "no function names match; raw text matches:\n{}\n",
                        text_hits.join("\n")
                    )))
                }
            }
            ToolCall::ListFunctionsInFile { path } => {
                let normalized = match self.copy.normalize(path) {
                    Ok(normalized) => normalized,
                    Err(err) => return Ok(ToolReply::text(format!("cannot list {path}: {err}"))),
                };
                let names: Vec<String> = self
                    .index
                    .in_file(&normalized)
                    .iter()
                    .map(|f| format!("{} ({}-{})", f.name, f.start_line, f.end_line))
                    .collect();
                if names.is_empty() {
                    Ok(ToolReply::text(format!("no indexed functions in {normalized}")))
                } else {
                    Ok(ToolReply::text(names.join("\n") + "\n"))
                }
            }
            ToolCall::GetRcaResults { index } => {
                if *index == 0 || *index > self.rca.len() {
                    return Ok(ToolReply::text(format!(
                        "rca index {index} out of range; valid indices are 1..={}",
                        self.rca.len()
                    )));
                }
                Ok(ToolReply::text(render_detail(&self.rca[index - 1])))
            }
            ToolCall::EditFile { path, old_text, new_text } => {
                let normalized = match self.copy.normalize(path) {
                    Ok(normalized) => normalized,
                    Err(err) => return Ok(ToolReply::text(format!("cannot edit {path}: {err}"))),
                };
                if is_protected(&normalized, &self.config.protected_paths) {
                    return Ok(ToolReply::text(format!(
                        "REFUSED: {normalized} is protected build/test infrastructure and must never be edited"
                    )));
                }
                match self.copy.apply_substitution(&normalized, old_text, new_text) {
                    Ok(SubstitutionOutcome::Applied) => {
                        self.refresh_index()?;
                        Ok(ToolReply::text(format!(
                            "edit applied to {normalized} ({} edits so far)",
                            self.copy.edits().len()
                        )))
                    }
                    Ok(SubstitutionOutcome::NoMatch) => Ok(ToolReply::text(format!(
                        "NO MATCH: old_text was not found in {normalized}; copy the text precisely from read_source_file output"
                    ))),
                    Ok(SubstitutionOutcome::Ambiguous { occurrences }) => {
                        Ok(ToolReply::text(format!(
                            "AMBIGUOUS: old_text occurs {occurrences} times in {normalized}; include more surrounding context (no edit applied)"
                        )))
                    }
                    Err(Error::Io(err)) => {
                        Ok(ToolReply::text(format!("cannot edit {normalized}: {err}")))
                    }
                    Err(Error::Domain(reason)) => {
                        Ok(ToolReply::text(format!("cannot edit {normalized}: {reason}")))
                    }
                    Err(err) => Err(err),
                }
            }
            ToolCall::RevertEdits => {
                self.copy.revert()?;
                self.refresh_index()?;
                Ok(ToolReply::text(format!(
                    "working copy restored to baseline {}",
                    self.copy.baseline_id()
                )))
            }
            ToolCall::ValidatePatch => {
                if let Some(last) = self.last_validate_turn {
                    if turn.saturating_sub(last) < self.config.validate_min_interval {
                        return Ok(ToolReply::text(format!(
                            "validate_patch is rate-limited to once per {} turns; batch further edits before re-validating",
                            self.config.validate_min_interval
                        )));
                    }
                }
                self.last_validate_turn = Some(turn);
                let result = run_verifier(self.oracle, self.copy.root(), self.poc.as_deref())?;
                let reply = render_verifier(&result);
                let all = result.all_pass();
                self.last_verifier = Some(result);
                Ok(ToolReply { text: reply, all_checks_passed: all })
            }
        }
    }
}

fn tail(text: &str, max: usize) -> &str {
    if text.len() <= max {
        text
    } else {
        let cut = text.len() - max;
        let boundary = text[cut..].find('\n').map(|i| cut + i + 1).unwrap_or(cut);
        &text[boundary..]
    }
}

fn render_stage(name: &str, report: &crate::repair::verifier::StageReport) -> String {
    let status = match report.status {
        StageStatus::Pass => "PASS",
        StageStatus::Fail => "FAIL",
        StageStatus::Skipped => "SKIPPED",
    };
    let mut line = format!("{name}: {status}\n");
    if report.status != StageStatus::Pass && !report.output.trim().is_empty() {
        line.push_str(tail(report.output.trim_end(), 2000));
        line.push('\n');
    }
    line
}

/// Render a verifier result for the agent; the all-pass sentinel line
/// matches the prompt's termination instruction verbatim.
pub fn render_verifier(result: &VerifierResult) -> String {
    let mut out = String::new();
    out.push_str(&render_stage("compile", &result.compile));
    out.push_str(&render_stage("poc_replay", &result.poc_replay));
    out.push_str(&render_stage("tests", &result.tests));
    if result.all_pass() {
        out.push_str("ALL CHECKS PASSED\n");
    }
    out
}
