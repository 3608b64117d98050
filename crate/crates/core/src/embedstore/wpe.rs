//! WPE-v1 text interchange format.
//!
//! ```text
//! === <sentence_id> dim=<d> pieces=<k>
//! <piece_text>\t<f1> <f2> ... <fd>      (k lines)
//! [SEP]\t<f1> ... <fd>
//! ```
//!
//! Floats are written with nine significant digits, which round-trips every
//! `f32` exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::{EmbedError, SentenceEmbeddings, WordpieceRecord, SEP_TOKEN};

const HEADER: &str = "===";

fn write_row(out: &mut String, text: &str, vector: &[f32]) {
    out.push_str(text);
    out.push('\t');
    for (i, v) in vector.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:.8e}");
    }
    out.push('\n');
}

pub fn to_wpe_string(sentences: &[SentenceEmbeddings]) -> String {
    let mut out = String::new();
    for s in sentences {
        let _ = writeln!(out, "{HEADER} {} dim={} pieces={}", s.id, s.dim(), s.pieces().len());
        for p in s.pieces() {
            debug_assert!(!p.text.contains(['\t', '\n']));
            write_row(&mut out, &p.text, &p.vector);
        }
        write_row(&mut out, SEP_TOKEN, s.sep_vector());
    }
    out
}

pub fn write_embedding_file(path: impl AsRef<Path>, sentences: &[SentenceEmbeddings]) -> Result<(), EmbedError> {
    let path = path.as_ref();
    std::fs::write(path, to_wpe_string(sentences)).map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<Vec<SentenceEmbeddings>, EmbedError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_wpe(&text)
}

fn parse_header(line: &str, line_no: usize) -> Result<(String, usize, usize), EmbedError> {
    let bad = |reason: &str| EmbedError::BadHeader {
        line: line_no,
        reason: reason.to_string(),
    };
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    if fields.len() != 4 || fields[0] != HEADER {
        return Err(bad("expected `=== <id> dim=<d> pieces=<k>`"));
    }
    let dim = fields[2]
        .strip_prefix("dim=")
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| bad("bad dim field"))?;
    let pieces = fields[3]
        .strip_prefix("pieces=")
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| bad("bad pieces field"))?;
    if dim == 0 {
        return Err(bad("dim must be positive"));
    }
    Ok((fields[1].to_string(), dim, pieces))
}

fn parse_row(line: &str, line_no: usize, dim: usize) -> Result<(String, Vec<f32>), EmbedError> {
    let (text, rest) = line.split_once('\t').ok_or_else(|| EmbedError::BadHeader {
        line: line_no,
        reason: "expected `<piece>\\t<floats>` row".into(),
    })?;
    let vector = rest
        .split_ascii_whitespace()
        .map(|v| {
            v.parse::<f32>().map_err(|_| EmbedError::FloatParseError {
                line: line_no,
                value: v.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if vector.len() != dim {
        return Err(EmbedError::DimensionMismatch {
            expected: dim,
            found: vector.len(),
        });
    }
    Ok((text.to_string(), vector))
}

fn is_header(line: &str) -> bool {
    line.starts_with(HEADER) && !line.contains('\t')
}

pub fn parse_wpe(text: &str) -> Result<Vec<SentenceEmbeddings>, EmbedError> {
    let mut out = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    while let Some((line_no, line)) = lines.next() {
        let (id, dim, count) = parse_header(line, line_no)?;
        let mut pieces = Vec::with_capacity(count);
        for _ in 0..count {
            match lines.next() {
                Some((n, l)) if !is_header(l) => {
                    let (text, vector) = parse_row(l, n, dim)?;
                    pieces.push(WordpieceRecord { text, vector });
                }
                _ => {
                    return Err(EmbedError::BadHeader {
                        line: line_no,
                        reason: format!("sentence {id} declares {count} pieces but has fewer"),
                    })
                }
            }
        }
        let sep = match lines.peek() {
            Some(&(n, l)) if l.starts_with(SEP_TOKEN) && l[SEP_TOKEN.len()..].starts_with('\t') => {
                lines.next();
                parse_row(l, n, dim)?.1
            }
            _ => return Err(EmbedError::MissingSepVector { line: line_no, id }),
        };
        out.push(SentenceEmbeddings::new(id, pieces, sep, dim)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SMALL: &str = "\
=== r1.s1 dim=4 pieces=2
milk\t1.00000000e0 2.00000000e0 3.00000000e0 4.00000000e0
##tea\t-1.00000000e0 0.00000000e0 5.00000000e-1 2.50000000e-1
[SEP]\t0.00000000e0 0.00000000e0 0.00000000e0 1.00000000e0
";

    #[test]
    fn reads_small_file() {
        let s = parse_wpe(SMALL).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].id, "r1.s1");
        assert_eq!(s[0].dim(), 4);
        assert_eq!(s[0].pieces().len(), 2);
        assert_eq!(s[0].pieces()[1].vector, vec![-1.0, 0.0, 0.5, 0.25]);
        assert_eq!(s[0].sep_vector(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(to_wpe_string(&s), SMALL);
    }

    #[test]
    fn empty_file() {
        assert!(parse_wpe("").unwrap().is_empty());
    }

    #[test]
    fn missing_sep() {
        let text = SMALL.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_wpe(&text), Err(EmbedError::MissingSepVector { .. })));
    }

    #[test]
    fn bad_header() {
        assert!(matches!(
            parse_wpe("=== r1 dim=x pieces=0\n"),
            Err(EmbedError::BadHeader { line: 1, .. })
        ));
        assert!(matches!(parse_wpe("hello\n"), Err(EmbedError::BadHeader { .. })));
    }

    #[test]
    fn bad_float_and_dimension() {
        let text = SMALL.replace("2.00000000e0", "two");
        assert!(matches!(
            parse_wpe(&text),
            Err(EmbedError::FloatParseError { line: 2, .. })
        ));
        let text = SMALL.replace(" 4.00000000e0", "");
        assert!(matches!(
            parse_wpe(&text),
            Err(EmbedError::DimensionMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn too_few_pieces() {
        let text = SMALL.replace("pieces=2", "pieces=3");
        assert!(parse_wpe(&text).is_err());
    }

    fn arb_f32() -> impl Strategy<Value = f32> {
        any::<u32>()
            .prop_map(f32::from_bits)
            .prop_filter("finite", |v| v.is_finite())
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            rows in prop::collection::vec(prop::collection::vec(arb_f32(), 3), 0..5),
            sep in prop::collection::vec(arb_f32(), 3),
        ) {
            let pieces = rows
                .into_iter()
                .enumerate()
                .map(|(i, v)| WordpieceRecord::new(if i == 0 { "w".to_string() } else { format!("##p{i}") }, v))
                .collect();
            let s = SentenceEmbeddings::new("x.s1", pieces, sep, 3).unwrap();
            let back = parse_wpe(&to_wpe_string(std::slice::from_ref(&s))).unwrap();
            prop_assert_eq!(back.len(), 1);
            let bits = |s: &SentenceEmbeddings| -> Vec<u32> {
                s.pieces().iter().flat_map(|p| p.vector.iter()).chain(s.sep_vector()).map(|v| v.to_bits()).collect()
            };
            prop_assert_eq!(bits(&back[0]), bits(&s));
            prop_assert_eq!(back[0].piece_texts(), s.piece_texts());
        }
    }
}
