//! Textual patch application and the filter applied to synthesized hunks.

use super::{Hunk, Patch};
use crate::intent::fingerprint;
use crate::lang::lexer::PATCH_MARKER;
use crate::lang::{nodes, parse_named, LangError, Program};
use similar::{capture_diff_slices, Algorithm, DiffOp};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("hunk {hunk}: original text not found")]
    OriginalNotFound { hunk: usize },
    #[error("hunk {hunk}: original text occurs {count} times")]
    AmbiguousOriginal { hunk: usize, count: usize },
    #[error("patched file does not parse: {0}")]
    ReparseFailure(LangError),
}

fn lines(s: &str) -> Vec<&str> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split('\n').collect()
    }
}

/// Replaces one hunk, matching whole lines.
pub fn apply_hunk(source: &str, hunk: &Hunk, index: usize) -> Result<String, PatchError> {
    let src: Vec<&str> = source.split('\n').collect();
    let orig = lines(&hunk.original);
    if orig.is_empty() || orig.len() > src.len() {
        return Err(PatchError::OriginalNotFound { hunk: index });
    }
    let hits: Vec<usize> = (0..=src.len() - orig.len()).filter(|&i| src[i..i + orig.len()] == orig[..]).collect();
    match hits.as_slice() {
        [] => Err(PatchError::OriginalNotFound { hunk: index }),
        [at] => {
            let mut out: Vec<&str> = src[..*at].to_vec();
            out.extend(lines(&hunk.patched));
            out.extend(&src[at + orig.len()..]);
            Ok(out.join("\n"))
        }
        many => Err(PatchError::AmbiguousOriginal { hunk: index, count: many.len() }),
    }
}

/// Applies hunks in order without reparsing.
pub fn apply_text(source: &str, patch: &Patch) -> Result<String, PatchError> {
    let mut text = source.to_string();
    for (i, h) in patch.hunks.iter().enumerate() {
        text = apply_hunk(&text, h, i + 1)?;
    }
    Ok(text)
}

/// Applies every hunk and checks that the result still parses.
pub fn apply_patch(source: &str, patch: &Patch, name: &str) -> Result<(String, Program), PatchError> {
    let text = apply_text(source, patch)?;
    let prog = parse_named(&text, name).map_err(PatchError::ReparseFailure)?;
    Ok((text, prog))
}

fn same_file(a: &str, b: &str) -> bool {
    let base = |s: &str| s.rsplit('/').next().unwrap_or(s).to_string();
    a == b || base(a) == base(b)
}

/// Fingerprints of every trusted node, with multiplicity.
pub fn frozen_nodes(p: &Program) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for n in nodes(p).iter().filter(|n| n.trust().trusted) {
        *out.entry(fingerprint(n)).or_insert(0) += 1;
    }
    out
}

/// Checks a synthesized patch against the file it targets. Returns the
/// patched text and program, or the reason the patch is dropped.
pub fn check_patch(source: &str, before: &Program, filename: &str, patch: &Patch) -> Result<(String, Program), String> {
    for (i, h) in patch.hunks.iter().enumerate() {
        let n = i + 1;
        if !same_file(&h.file, filename) {
            return Err(format!("hunk {n}: targets '{}' instead of '{filename}'", h.file));
        }
        let old = lines(&h.original);
        let new = lines(&h.patched);
        for op in capture_diff_slices(Algorithm::Myers, &old, &new) {
            let (removed, added) = match op {
                DiffOp::Equal { .. } => continue,
                DiffOp::Delete { old_index, old_len, .. } => (old_index..old_index + old_len, 0..0),
                DiffOp::Insert { new_index, new_len, .. } => (0..0, new_index..new_index + new_len),
                DiffOp::Replace { old_index, old_len, new_index, new_len } => {
                    (old_index..old_index + old_len, new_index..new_index + new_len)
                }
            };
            if let Some(l) = old[removed].iter().find(|l| l.contains("{:trusted}")) {
                return Err(format!("hunk {n}: modifies trusted line '{}'", l.trim()));
            }
            if let Some(l) = new[added].iter().find(|l| !l.trim_end().ends_with(PATCH_MARKER)) {
                return Err(format!("hunk {n}: patched line '{}' lacks the patch marker", l.trim()));
            }
        }
    }
    let (text, after) = apply_patch(source, patch, filename).map_err(|e| e.to_string())?;
    let post = frozen_nodes_all(&after);
    for (fp, count) in frozen_nodes(before) {
        if post.get(&fp).copied().unwrap_or(0) < count {
            return Err("modifies a node inside a trusted method".to_string());
        }
    }
    Ok((text, after))
}

fn frozen_nodes_all(p: &Program) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for n in nodes(p).iter() {
        *out.entry(fingerprint(n)).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hunk(original: &str, patched: &str) -> Hunk {
        Hunk { file: "f.mvl".into(), original: original.into(), patched: patched.into() }
    }

    fn patch(hunks: Vec<Hunk>) -> Patch {
        Patch { hunks, synthesizer_id: "t".into(), campaign: 0 }
    }

    #[test]
    fn empty_patch_is_identity() {
        assert_eq!(apply_text("a\nb\n", &patch(vec![])).unwrap(), "a\nb\n");
    }

    #[test]
    fn overlapping_hunks_fail() {
        let p = patch(vec![hunk("b", "c // pr {:trusted}"), hunk("b", "d")]);
        assert_eq!(apply_text("a\nb\n", &p), Err(PatchError::OriginalNotFound { hunk: 2 }));
    }

    #[test]
    fn ambiguous_original() {
        let p = patch(vec![hunk("}", "")]);
        assert_eq!(apply_text("}\n}\n", &p), Err(PatchError::AmbiguousOriginal { hunk: 1, count: 2 }));
    }

    #[test]
    fn deletion_removes_lines() {
        let p = patch(vec![hunk("b", "")]);
        assert_eq!(apply_text("a\nb\nc\n", &p).unwrap(), "a\nc\n");
    }
}
