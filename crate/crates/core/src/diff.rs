//! Word-level edit scripts between a generated text and a user edit.
//!
//! Words are whitespace-separated. The script is derived from a longest
//! common subsequence; inside each run between kept words, deletions and
//! insertions are paired in order into replacements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    /// Keep original word `index`.
    Keep { index: usize },
    /// Drop original word `index`.
    Delete { index: usize },
    /// Emit `word` at position `position` of the edited sequence.
    Insert { position: usize, word: String },
    /// Replace original word `index` with `word`.
    Replace { index: usize, word: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
}

/// Positions touched by an edit, on each side.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChangedSpans {
    /// Deleted or replaced word indices in the original.
    pub original: Vec<usize>,
    /// Inserted or replacement word indices in the edited text.
    pub edited: Vec<usize>,
}

impl EditScript {
    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|op| matches!(op, EditOp::Keep { .. }))
    }

    /// Replay the script over `original`, checking every index.
    pub fn apply<S: AsRef<str>>(&self, original: &[S]) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let mut cursor = 0usize;
        let bad = |msg: String| Error::Precondition(format!("edit script does not fit input: {msg}"));
        for op in &self.ops {
            match op {
                EditOp::Keep { index } | EditOp::Delete { index } | EditOp::Replace { index, .. } => {
                    if *index != cursor || *index >= original.len() {
                        return Err(bad(format!("op at {index}, cursor at {cursor}")));
                    }
                    cursor += 1;
                    match op {
                        EditOp::Keep { .. } => out.push(original[*index].as_ref().to_string()),
                        EditOp::Replace { word, .. } => out.push(word.clone()),
                        _ => {}
                    }
                }
                EditOp::Insert { position, word } => {
                    if *position != out.len() {
                        return Err(bad(format!("insert at {position}, output has {}", out.len())));
                    }
                    out.push(word.clone());
                }
            }
        }
        if cursor != original.len() {
            return Err(bad(format!("{} of {} words consumed", cursor, original.len())));
        }
        Ok(out)
    }

    pub fn changed_spans(&self) -> ChangedSpans {
        let mut spans = ChangedSpans::default();
        let mut out_pos = 0usize;
        for op in &self.ops {
            match op {
                EditOp::Keep { .. } => out_pos += 1,
                EditOp::Delete { index } => spans.original.push(*index),
                EditOp::Insert { .. } => {
                    spans.edited.push(out_pos);
                    out_pos += 1;
                }
                EditOp::Replace { index, .. } => {
                    spans.original.push(*index);
                    spans.edited.push(out_pos);
                    out_pos += 1;
                }
            }
        }
        spans
    }
}

pub fn split_words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Minimal word-level edit script turning `original` into `edited`.
pub fn word_diff(original: &str, edited: &str) -> EditScript {
    diff_words(&split_words(original), &split_words(edited))
}

pub fn diff_words<S: AsRef<str> + PartialEq>(a: &[S], b: &[S]) -> EditScript {
    let (n, m) = (a.len(), b.len());
    // lcs[i][j] = LCS length of a[i..] and b[j..]
    let width = m + 1;
    let mut lcs = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i * width + j] = if a[i] == b[j] {
                lcs[(i + 1) * width + j + 1] + 1
            } else {
                lcs[(i + 1) * width + j].max(lcs[i * width + j + 1])
            };
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let mut pending_del: Vec<usize> = Vec::new();
    let mut pending_ins: Vec<usize> = Vec::new();
    let mut out_pos = 0usize;
    let (mut i, mut j) = (0usize, 0usize);

    let flush = |ops: &mut Vec<EditOp>, del: &mut Vec<usize>, ins: &mut Vec<usize>, out_pos: &mut usize| {
        let paired = del.len().min(ins.len());
        for k in 0..paired {
            ops.push(EditOp::Replace {
                index: del[k],
                word: b[ins[k]].as_ref().to_string(),
            });
            *out_pos += 1;
        }
        for &d in &del[paired..] {
            ops.push(EditOp::Delete { index: d });
        }
        for &w in &ins[paired..] {
            ops.push(EditOp::Insert {
                position: *out_pos,
                word: b[w].as_ref().to_string(),
            });
            *out_pos += 1;
        }
        del.clear();
        ins.clear();
    };

    while i < n || j < m {
        if i < n && j < m && a[i] == b[j] {
            flush(&mut ops, &mut pending_del, &mut pending_ins, &mut out_pos);
            ops.push(EditOp::Keep { index: i });
            out_pos += 1;
            i += 1;
            j += 1;
        } else if j == m || (i < n && lcs[(i + 1) * width + j] >= lcs[i * width + j + 1]) {
            pending_del.push(i);
            i += 1;
        } else {
            pending_ins.push(j);
            j += 1;
        }
    }
    flush(&mut ops, &mut pending_del, &mut pending_ins, &mut out_pos);
    EditScript { ops }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phrase_replacement_is_two_replaces() {
        let s = word_diff("dry weather", "directed-energy weapons");
        assert_eq!(
            s.ops,
            vec![
                EditOp::Replace { index: 0, word: "directed-energy".into() },
                EditOp::Replace { index: 1, word: "weapons".into() },
            ]
        );
    }

    #[test]
    fn identical_is_all_keep() {
        let s = word_diff("a b c", "a  b\tc");
        assert!(s.is_identity());
        assert_eq!(s.ops.len(), 3);
        assert_eq!(s.changed_spans(), ChangedSpans::default());
    }

    #[test]
    fn spans_inside_sentence() {
        let a = "wildfires were caused by dry weather this year";
        let b = "wildfires were caused by directed-energy weapons this year";
        let s = word_diff(a, b);
        let spans = s.changed_spans();
        assert_eq!(spans.original, vec![4, 5]);
        assert_eq!(spans.edited, vec![4, 5]);
        assert_eq!(s.apply(&split_words(a)).unwrap(), split_words(b));
    }

    #[test]
    fn insertions_and_deletions() {
        let s = word_diff("a b c", "a x y b");
        let out = s.apply(&["a", "b", "c"]).unwrap();
        assert_eq!(out, vec!["a", "x", "y", "b"]);
        assert_eq!(s.changed_spans().edited, vec![1, 2]);
        assert_eq!(s.changed_spans().original, vec![2]);
        assert!(word_diff("", "").ops.is_empty());
        assert_eq!(word_diff("", "one").apply::<&str>(&[]).unwrap(), vec!["one"]);
    }

    #[test]
    fn apply_rejects_mismatched_input() {
        let s = word_diff("a b", "a c");
        assert!(s.apply(&["a"]).is_err());
    }
}
