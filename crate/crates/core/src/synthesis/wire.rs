//! The `# modification N` patch exchange format.

use super::Hunk;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("modification {index}: missing {tag}")]
    MissingTag { index: usize, tag: &'static str },
}

/// Renders hunks as numbered modification blocks.
pub fn render(hunks: &[Hunk]) -> String {
    let blocks: Vec<String> = hunks
        .iter()
        .enumerate()
        .map(|(i, h)| {
            format!(
                "# modification {}\n<file>{}</file>\n<original>\n{}\n</original>\n<patched>\n{}\n</patched>\n",
                i + 1,
                h.file,
                h.original,
                h.patched
            )
        })
        .collect();
    blocks.join("\n")
}

fn strip_one(s: &str) -> &str {
    let s = s.strip_prefix('\n').unwrap_or(s);
    s.strip_suffix('\n').unwrap_or(s)
}

fn between<'a>(text: &'a str, from: usize, open: &str, close: &str) -> Option<(&'a str, usize)> {
    let start = text[from..].find(open)? + from + open.len();
    let end = text[start..].find(close)? + start;
    Some((&text[start..end], end + close.len()))
}

/// Parses every `<file>/<original>/<patched>` triple in `text`. Prose
/// around the blocks is ignored.
pub fn parse(text: &str) -> Result<Vec<Hunk>, WireError> {
    let mut hunks = Vec::new();
    let mut pos = 0;
    while let Some((file, after)) = between(text, pos, "<file>", "</file>") {
        let index = hunks.len() + 1;
        let (original, after) =
            between(text, after, "<original>", "</original>").ok_or(WireError::MissingTag { index, tag: "<original>" })?;
        let (patched, after) =
            between(text, after, "<patched>", "</patched>").ok_or(WireError::MissingTag { index, tag: "<patched>" })?;
        hunks.push(Hunk {
            file: file.trim().to_string(),
            original: strip_one(original).to_string(),
            patched: strip_one(patched).to_string(),
        });
        pos = after;
    }
    Ok(hunks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let hunks = vec![
            Hunk { file: "a.mvl".into(), original: "  x := 1;\n\n  y := 2;".into(), patched: "  x := 2; // pr {:trusted}".into() },
            Hunk { file: "a.mvl".into(), original: "  assert b;".into(), patched: String::new() },
        ];
        assert_eq!(parse(&render(&hunks)).unwrap(), hunks);
    }

    #[test]
    fn prose_is_ignored() {
        let text = "Because the index may be negative.\n\n# modification 1\n<file>f.mvl</file>\n<original>\na\n</original>\n<patched>\nb // pr {:trusted}\n</patched>\nDone.";
        let h = parse(text).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].patched, "b // pr {:trusted}");
    }

    #[test]
    fn missing_patched_is_an_error() {
        let text = "<file>f</file><original>\na\n</original>";
        assert!(matches!(parse(text), Err(WireError::MissingTag { tag: "<patched>", .. })));
    }
}
