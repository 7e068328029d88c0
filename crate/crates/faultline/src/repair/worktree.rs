//! Baselined working copy: snapshot, exact-substitution edits, revert,
//! and unified-diff round trips.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One applied substitution, in application order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRecord {
    pub path: String,
    pub old_text: String,
    pub new_text: String,
}

/// Result of an attempted substitution. `NoMatch` and `Ambiguous` leave
/// the file untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubstitutionOutcome {
    Applied,
    NoMatch,
    Ambiguous { occurrences: usize },
}

/// A project directory with an in-process baseline snapshot. The
/// baseline tracks every file present at construction; diffs and
/// digests cover tracked files only, so oracle build artifacts dropped
/// into the tree never pollute the patch.
#[derive(Debug)]
pub struct WorkingCopy {
    root: PathBuf,
    baseline: BTreeMap<String, Vec<u8>>,
    baseline_id: String,
    edits: Vec<EditRecord>,
}

fn digest_of(files: &BTreeMap<String, Vec<u8>>) -> String {
    let mut hasher = Sha256::new();
    for (path, bytes) in files {
        hasher.update(path.as_bytes());
        hasher.update([0x00]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    format!("{:x}", hasher.finalize())
}

fn snapshot(root: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|err| Error::Domain(format!("walk {}: {err}", root.display())))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .map_err(|_| Error::PathEscape(entry.path().to_path_buf()))?
            .to_string_lossy()
            .into_owned();
        files.insert(rel, std::fs::read(entry.path())?);
    }
    Ok(files)
}

/// Recursively copy a directory tree (used to stamp out fresh working
/// copies from fixture projects).
pub fn copy_tree(src: &Path, dst: &Path) -> Result<()> {
    for entry in walkdir::WalkDir::new(src).sort_by_file_name() {
        let entry = entry.map_err(|err| Error::Domain(format!("walk {}: {err}", src.display())))?;
        let rel = entry
            .path()
            .strip_prefix(src)
            .map_err(|_| Error::PathEscape(entry.path().to_path_buf()))?;
        let target = dst.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target)?;
        } else if entry.file_type().is_file() {
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::copy(entry.path(), &target)?;
            // Preserve the executable bit so fixture oracle scripts
            // stay runnable in the copy.
            let perm = entry.metadata().map(|m| m.permissions());
            if let Ok(perm) = perm {
                std::fs::set_permissions(&target, perm)?;
            }
        }
    }
    Ok(())
}

impl WorkingCopy {
    /// Snapshot `root` as the baseline.
    pub fn new(root: &Path) -> Result<WorkingCopy> {
        let root = root
            .canonicalize()
            .map_err(|_| Error::Domain(format!("working-copy root {} not found", root.display())))?;
        let baseline = snapshot(&root)?;
        if baseline.is_empty() {
            return Err(Error::Domain(format!("working-copy root {} is empty", root.display())));
        }
        let baseline_id = digest_of(&baseline);
        Ok(WorkingCopy { root, baseline, baseline_id, edits: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn baseline_id(&self) -> &str {
        &self.baseline_id
    }

    pub fn edits(&self) -> &[EditRecord] {
        &self.edits
    }

    pub fn tracked_paths(&self) -> impl Iterator<Item = &str> {
        self.baseline.keys().map(String::as_str)
    }

    /// Validate a workspace-relative path and resolve it under the
    /// root. Absolute paths and any `..` component are rejected.
    pub fn resolve(&self, rel: &str) -> Result<PathBuf> {
        let path = Path::new(rel);
        if rel.is_empty() || path.is_absolute() {
            return Err(Error::PathEscape(path.to_path_buf()));
        }
        for component in path.components() {
            match component {
                Component::Normal(_) | Component::CurDir => {}
                _ => return Err(Error::PathEscape(path.to_path_buf())),
            }
        }
        Ok(self.root.join(path))
    }

    /// Normalized relative form of a path accepted by [`resolve`],
    /// with any leading `./` components removed.
    pub fn normalize(&self, rel: &str) -> Result<String> {
        let resolved = self.resolve(rel)?;
        Ok(resolved
            .strip_prefix(&self.root)
            .expect("resolved under root")
            .to_string_lossy()
            .into_owned())
    }

    pub fn read_text(&self, rel: &str) -> Result<String> {
        let path = self.resolve(rel)?;
        Ok(std::fs::read_to_string(path)?)
    }

    /// Replace `old_text` with `new_text` iff it occurs exactly once.
    /// Never applies a partial edit.
    pub fn apply_substitution(
        &mut self,
        rel: &str,
        old_text: &str,
        new_text: &str,
    ) -> Result<SubstitutionOutcome> {
        if old_text.is_empty() {
            return Err(Error::Domain("old_text must not be empty".into()));
        }
        let normalized = self.normalize(rel)?;
        let path = self.resolve(rel)?;
        let content = std::fs::read_to_string(&path)?;
        let occurrences = content.matches(old_text).count();
        match occurrences {
            0 => Ok(SubstitutionOutcome::NoMatch),
            1 => {
                let updated = content.replacen(old_text, new_text, 1);
                std::fs::write(&path, updated)?;
                self.edits.push(EditRecord {
                    path: normalized,
                    old_text: old_text.to_string(),
                    new_text: new_text.to_string(),
                });
                Ok(SubstitutionOutcome::Applied)
            }
            _ => Ok(SubstitutionOutcome::Ambiguous { occurrences }),
        }
    }

    /// Restore every tracked file to its baseline bytes and remove
    /// untracked leftovers (oracle build artifacts, stray outputs).
    pub fn revert(&mut self) -> Result<()> {
        let current = snapshot(&self.root)?;
        for rel in current.keys() {
            if !self.baseline.contains_key(rel) {
                std::fs::remove_file(self.root.join(rel))?;
            }
        }
        for (rel, bytes) in &self.baseline {
            let path = self.root.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        // Drop directories created since the baseline; remove_dir only
        // succeeds when empty, so tracked content is safe.
        let mut dirs: Vec<PathBuf> = walkdir::WalkDir::new(&self.root)
            .into_iter()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_dir() && e.path() != self.root)
            .map(|e| e.path().to_path_buf())
            .collect();
        dirs.sort_by_key(|p| std::cmp::Reverse(p.components().count()));
        for dir in dirs {
            let _ = std::fs::remove_dir(dir);
        }
        self.edits.clear();
        Ok(())
    }

    /// Digest of the current content of tracked files. Equal to
    /// `baseline_id` exactly when the copy is byte-identical to the
    /// baseline.
    pub fn tracked_digest(&self) -> Result<String> {
        let mut files = BTreeMap::new();
        for (rel, _) in &self.baseline {
            let path = self.root.join(rel);
            let bytes = if path.is_file() { std::fs::read(path)? } else { Vec::new() };
            files.insert(rel.clone(), bytes);
        }
        Ok(digest_of(&files))
    }

    pub fn is_clean(&self) -> Result<bool> {
        Ok(self.tracked_digest()? == self.baseline_id)
    }

    /// Unified diff of tracked files against the baseline. Each changed
    /// file is introduced by a `diff --git` marker line; body lines are
    /// always prefixed by ` `, `+`, `-`, `@`, or `\`, so the marker is
    /// unambiguous when splitting the diff back into file sections.
    pub fn diff(&self) -> Result<String> {
        let mut out = String::new();
        for (rel, baseline_bytes) in &self.baseline {
            let path = self.root.join(rel);
            let current = if path.is_file() { std::fs::read(&path)? } else { Vec::new() };
            if &current == baseline_bytes {
                continue;
            }
            let old = String::from_utf8_lossy(baseline_bytes);
            let new = String::from_utf8_lossy(&current);
            let patch = diffy::create_patch(&old, &new).to_string();
            let body = patch
                .splitn(3, '\n')
                .nth(2)
                .unwrap_or("")
                .to_string();
            out.push_str(&format!(
                "diff --git a/{rel} b/{rel}\n--- a/{rel}\n+++ b/{rel}\n{body}"
            ));
        }
        Ok(out)
    }
}

/// Split a multi-file diff into per-file sections at lines starting
/// with the `diff --git` marker. Body lines always carry a one-byte
/// prefix, so only section headers can start with `diff`.
fn split_sections(diff: &str) -> Vec<&str> {
    let mut starts: Vec<usize> = Vec::new();
    let mut offset = 0;
    for line in diff.split_inclusive('\n') {
        if line.starts_with("diff --git ") {
            starts.push(offset);
        }
        offset += line.len();
    }
    let mut sections = Vec::new();
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(diff.len());
        sections.push(&diff[start..end]);
    }
    sections
}

/// Apply a multi-file unified diff produced by [`WorkingCopy::diff`] to
/// a baseline directory.
pub fn apply_diff(root: &Path, diff: &str) -> Result<()> {
    if diff.trim().is_empty() {
        return Ok(());
    }
    let sections = split_sections(diff);
    if sections.is_empty() {
        return Err(Error::Domain("diff has no file sections".into()));
    }
    for section in sections {
        let (header, patch_text) = section
            .split_once('\n')
            .ok_or_else(|| Error::Domain("truncated diff section".into()))?;
        let rel = header
            .strip_prefix("diff --git ")
            .and_then(|rest| rest.split_whitespace().next())
            .and_then(|token| token.strip_prefix("a/"))
            .ok_or_else(|| Error::Domain(format!("unrecognized diff header {header:?}")))?;
        let patch = diffy::Patch::from_str(patch_text)
            .map_err(|err| Error::Domain(format!("parse diff for {rel}: {err}")))?;
        let target = root.join(rel);
        let base = if target.is_file() {
            std::fs::read_to_string(&target)?
        } else {
            String::new()
        };
        let applied = diffy::apply(&base, &patch)
            .map_err(|err| Error::Domain(format!("apply diff to {rel}: {err}")))?;
        if let Some(parent) = target.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(target, applied)?;
    }
    Ok(())
}
