use std::ops::Range;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::{EmbedError, WordpieceRecord, CONTINUATION_PREFIX, UNK_TOKEN};

const SKIPPED: [&str; 3] = ["[CLS]", "[SEP]", "[PAD]"];

/// For every parser token (1-based), the contiguous wordpiece range covering it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordAlignment {
    ranges: Vec<Range<usize>>,
}

impl WordAlignment {
    pub fn from_ranges(ranges: Vec<Range<usize>>) -> Self {
        Self { ranges }
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Piece range of the 1-based parser token `index`.
    pub fn pieces_for(&self, index: usize) -> Option<Range<usize>> {
        index.checked_sub(1).and_then(|k| self.ranges.get(k)).cloned()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }
}

/// Lowercased, with combining marks removed after canonical decomposition,
/// the way uncased wordpiece vocabularies fold their input.
fn normalize(s: &str) -> Vec<char> {
    s.nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Aligns parser tokens to the wordpieces of the same sentence.
pub fn align_words<S: AsRef<str>>(
    tokens: &[S],
    pieces: &[WordpieceRecord],
) -> Result<WordAlignment, EmbedError> {
    let texts: Vec<&str> = pieces.iter().map(|p| p.text.as_str()).collect();
    align_texts(tokens, &texts)
}

/// Greedy left-to-right character tiling. Comparison ignores case, accents
/// and the `##` prefix; `[UNK]` swallows the rest of the current token;
/// `[CLS]`, `[SEP]` and `[PAD]` are skipped between tokens.
pub fn align_texts<S: AsRef<str>, P: AsRef<str>>(
    tokens: &[S],
    pieces: &[P],
) -> Result<WordAlignment, EmbedError> {
    let norm: Vec<Vec<char>> = tokens.iter().map(|t| normalize(t.as_ref())).collect();
    let fail = |t: usize, reason: String| EmbedError::AlignmentFailure {
        index: t + 1,
        form: tokens
            .get(t)
            .or(tokens.last())
            .map(|s| s.as_ref().to_string())
            .unwrap_or_default(),
        reason,
    };

    let mut ranges = Vec::with_capacity(tokens.len());
    let mut t = 0;
    let mut offset = 0;
    let mut start = 0;

    for (p, piece) in pieces.iter().enumerate() {
        let piece = piece.as_ref();
        if SKIPPED.contains(&piece) {
            if offset > 0 {
                return Err(fail(t, format!("special piece {piece} inside a word")));
            }
            continue;
        }
        if t >= norm.len() {
            return Err(fail(t, format!("piece {p} ({piece:?}) left over after the last token")));
        }
        if offset == 0 {
            start = p;
        }
        let word = &norm[t];
        if piece == UNK_TOKEN {
            offset = word.len();
        } else {
            let chars = normalize(piece.strip_prefix(CONTINUATION_PREFIX).unwrap_or(piece));
            if chars.is_empty() {
                return Err(fail(t, format!("piece {p} is empty after stripping")));
            }
            if !word[offset..].starts_with(&chars) {
                return Err(fail(
                    t,
                    format!("piece {p} ({piece:?}) does not continue the token at character {offset}"),
                ));
            }
            offset += chars.len();
        }
        if offset == word.len() {
            ranges.push(start..p + 1);
            t += 1;
            offset = 0;
        }
    }

    if t < norm.len() {
        return Err(fail(t, "wordpieces exhausted before the token was covered".into()));
    }
    Ok(WordAlignment { ranges })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accents_fold_like_uncased_vocabularies() {
        let a = align_texts(&["après", "Éte"], &["apres", "et", "##é"]).unwrap();
        assert_eq!(a.ranges(), &[0..1, 1..3]);
    }

    #[test]
    fn milktea() {
        let a = align_texts(&["milktea"], &["milk", "##tea"]).unwrap();
        assert_eq!(a.pieces_for(1), Some(0..2));
    }

    #[test]
    fn one_to_one_is_identity() {
        let toks = ["Le", "chat", "court"];
        let a = align_texts(&toks, &toks).unwrap();
        assert_eq!(a.ranges(), &[0..1, 1..2, 2..3]);
    }

    /// All 2-token splits of "abc" against its 3-piece split: the expected
    /// ranges come from enumerating every piece boundary and keeping the one
    /// whose pieces spell both tokens.
    #[test]
    fn exhaustive_abc_two_tokens_three_pieces() {
        let word = "abc";
        for cut in 1..word.len() {
            let (t1, t2) = word.split_at(cut);
            let pieces: Vec<String> = word
                .chars()
                .enumerate()
                .map(|(i, c)| if i == 0 || i == cut { c.to_string() } else { format!("##{c}") })
                .collect();
            let spell = |r: Range<usize>| -> String {
                pieces[r].iter().map(|p| p.trim_start_matches("##")).collect()
            };
            let matches: Vec<usize> = (1..pieces.len())
                .filter(|&b| spell(0..b) == t1 && spell(b..pieces.len()) == t2)
                .collect();
            assert_eq!(matches.len(), 1);
            let b = matches[0];
            let got = align_texts(&[t1, t2], &pieces).unwrap();
            assert_eq!(got.ranges(), &[0..b, b..3], "cut at {cut}");
        }
        let got = align_texts(&["ab", "c"], &["a", "##b", "c"]).unwrap();
        assert_eq!(got.pieces_for(1), Some(0..2));
        assert_eq!(got.pieces_for(2), Some(2..3));
    }

    #[test]
    fn case_insensitive_and_special_pieces() {
        let a = align_texts(&["Paris", "Rocks"], &["[CLS]", "paris", "ROCK", "##s", "[SEP]"]).unwrap();
        assert_eq!(a.ranges(), &[1..2, 2..4]);
    }

    #[test]
    fn unk_consumes_token() {
        let a = align_texts(&["a", "☃☃", "b"], &["a", "[UNK]", "b"]).unwrap();
        assert_eq!(a.ranges(), &[0..1, 1..2, 2..3]);
        let a = align_texts(&["x☃"], &["x", "[UNK]"]).unwrap();
        assert_eq!(a.ranges().to_vec(), vec![0..2]);
    }

    #[test]
    fn mismatch_reports_token() {
        match align_texts(&["do", "n't"], &["don", "'", "t"]).unwrap_err() {
            EmbedError::AlignmentFailure { index, form, .. } => {
                assert_eq!(index, 1);
                assert_eq!(form, "do");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn leftover_and_exhausted() {
        assert!(matches!(
            align_texts(&["ab"], &["ab", "c"]),
            Err(EmbedError::AlignmentFailure { index: 2, .. })
        ));
        assert!(matches!(
            align_texts(&["ab", "c"], &["ab"]),
            Err(EmbedError::AlignmentFailure { index: 2, .. })
        ));
    }
}
