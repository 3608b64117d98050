//! CoNLL-U dependency trees.
//!
//! Reads the ten-column, tab-separated format used by Universal Dependencies,
//! validates that every sentence is a single-rooted tree and answers the two
//! structural queries the feature composer needs: the head of a token and its
//! dependents. Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are
//! skipped. Only `ID`, `FORM`, `LEMMA`, `UPOS`, `HEAD` and `DEPREL` are kept;
//! the remaining columns are written back as `_`.

use std::fmt::Write as _;

use thiserror::Error;

/// Errors raised while reading or querying CoNLL-U data.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConlluError {
    #[error("line {line}: expected 10 tab-separated columns, found {found}")]
    MalformedRow { line: usize, found: usize },
    #[error("line {line}: cannot parse {column} value {value:?}")]
    BadField {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: head {head} of token {index} is outside [0, {len}]")]
    BadHeadIndex {
        line: usize,
        index: usize,
        head: usize,
        len: usize,
    },
    #[error("sentence starting at line {line}: head links of token {index} form a cycle")]
    CycleDetected { line: usize, index: usize },
    #[error("sentence starting at line {line}: {roots} tokens attach to the root")]
    MultipleRoots { line: usize, roots: usize },
    #[error("line {line}: token id {found} where {expected} was expected")]
    NonContiguousIds {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("token index {index} out of range for a sentence of {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },
}

/// One syntactic word of a parsed sentence. `index` is 1-based and `head` is
/// 0 for the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConlluToken {
    pub index: usize,
    pub form: String,
    pub lemma: Option<String>,
    pub upos: Option<String>,
    pub head: usize,
    pub deprel: String,
}

impl ConlluToken {
    pub fn new(index: usize, form: impl Into<String>, head: usize, deprel: impl Into<String>) -> Self {
        Self {
            index,
            form: form.into(),
            lemma: None,
            upos: None,
            head,
            deprel: deprel.into(),
        }
    }

    pub fn with_upos(mut self, upos: impl Into<String>) -> Self {
        self.upos = Some(upos.into());
        self
    }

    pub fn is_punct(&self) -> bool {
        self.upos.as_deref() == Some("PUNCT")
    }
}

/// A validated dependency tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencySentence {
    /// Value of the `# sent_id =` comment, if present.
    pub id: Option<String>,
    /// Value of the `# text =` comment, if present.
    pub text: Option<String>,
    tokens: Vec<ConlluToken>,
}

impl DependencySentence {
    /// Builds a sentence from tokens, checking ids, head ranges and the tree
    /// property.
    pub fn new(tokens: Vec<ConlluToken>) -> Result<Self, ConlluError> {
        validate(&tokens, 0, &[])?;
        Ok(Self {
            id: None,
            text: None,
            tokens,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn tokens(&self) -> &[ConlluToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    pub fn token(&self, index: usize) -> Result<&ConlluToken, ConlluError> {
        self.check_index(index)?;
        Ok(&self.tokens[index - 1])
    }

    /// Index of the token's head, or `None` when `index` is the root.
    pub fn head_of(&self, index: usize) -> Result<Option<usize>, ConlluError> {
        let head = self.token(index)?.head;
        Ok((head != 0).then_some(head))
    }

    /// All tokens whose head is `index`, in ascending order.
    pub fn dependents_of(&self, index: usize) -> Result<Vec<usize>, ConlluError> {
        self.check_index(index)?;
        Ok(self
            .tokens
            .iter()
            .filter(|t| t.head == index)
            .map(|t| t.index)
            .collect())
    }

    pub fn root(&self) -> Option<usize> {
        self.tokens.iter().find(|t| t.head == 0).map(|t| t.index)
    }

    fn check_index(&self, index: usize) -> Result<(), ConlluError> {
        if index == 0 || index > self.tokens.len() {
            return Err(ConlluError::IndexOutOfRange {
                index,
                len: self.tokens.len(),
            });
        }
        Ok(())
    }
}

/// `lines[k]` is the source line of `tokens[k]`; empty when built in memory.
fn validate(tokens: &[ConlluToken], start_line: usize, lines: &[usize]) -> Result<(), ConlluError> {
    let n = tokens.len();
    let line_of = |k: usize| lines.get(k).copied().unwrap_or(start_line);

    for (k, tok) in tokens.iter().enumerate() {
        if tok.index != k + 1 {
            return Err(ConlluError::NonContiguousIds {
                line: line_of(k),
                expected: k + 1,
                found: tok.index,
            });
        }
        if tok.head > n {
            return Err(ConlluError::BadHeadIndex {
                line: line_of(k),
                index: tok.index,
                head: tok.head,
                len: n,
            });
        }
    }

    let roots = tokens.iter().filter(|t| t.head == 0).count();
    if roots > 1 {
        return Err(ConlluError::MultipleRoots {
            line: start_line,
            roots,
        });
    }

    // Walking n head links from any token must hit the root.
    for tok in tokens {
        let mut cur = tok.index;
        let mut steps = 0;
        while cur != 0 {
            if steps > n {
                return Err(ConlluError::CycleDetected {
                    line: start_line,
                    index: tok.index,
                });
            }
            cur = tokens[cur - 1].head;
            steps += 1;
        }
    }
    Ok(())
}

fn optional(field: &str) -> Option<String> {
    (field != "_").then(|| field.to_string())
}

fn parse_usize(field: &str, line: usize, column: &'static str) -> Result<usize, ConlluError> {
    field.parse().map_err(|_| ConlluError::BadField {
        line,
        column,
        value: field.to_string(),
    })
}

struct Block {
    start_line: usize,
    id: Option<String>,
    text: Option<String>,
    tokens: Vec<ConlluToken>,
    lines: Vec<usize>,
}

impl Block {
    fn new(start_line: usize) -> Self {
        Self {
            start_line,
            id: None,
            text: None,
            tokens: Vec::new(),
            lines: Vec::new(),
        }
    }

    fn has_content(&self) -> bool {
        !self.tokens.is_empty() || self.id.is_some() || self.text.is_some()
    }

    fn finish(self) -> Result<DependencySentence, ConlluError> {
        validate(&self.tokens, self.start_line, &self.lines)?;
        Ok(DependencySentence {
            id: self.id,
            text: self.text,
            tokens: self.tokens,
        })
    }
}

/// Parses a CoNLL-U document into validated sentences.
pub fn parse_conllu(text: &str) -> Result<Vec<DependencySentence>, ConlluError> {
    let mut sentences = Vec::new();
    let mut block = Block::new(1);

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);

        if line.trim().is_empty() {
            if block.has_content() {
                sentences.push(std::mem::replace(&mut block, Block::new(line_no + 1)).finish()?);
            } else {
                block.start_line = line_no + 1;
            }
            continue;
        }

        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("sent_id") {
                if let Some(v) = v.trim_start().strip_prefix('=') {
                    block.id = Some(v.trim().to_string());
                }
            } else if let Some(v) = comment.strip_prefix("text") {
                if let Some(v) = v.trim_start().strip_prefix('=') {
                    block.text = Some(v.trim().to_string());
                }
            }
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(ConlluError::MalformedRow {
                line: line_no,
                found: cols.len(),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }

        let index = parse_usize(cols[0], line_no, "ID")?;
        let head = parse_usize(cols[6], line_no, "HEAD")?;
        block.tokens.push(ConlluToken {
            index,
            form: cols[1].to_string(),
            lemma: optional(cols[2]),
            upos: optional(cols[3]),
            head,
            deprel: cols[7].to_string(),
        });
        block.lines.push(line_no);
    }

    if block.has_content() {
        sentences.push(block.finish()?);
    }
    Ok(sentences)
}

/// Writes sentences back to CoNLL-U. Each sentence ends with a blank line.
pub fn serialize_conllu(sentences: &[DependencySentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        if let Some(id) = &s.id {
            let _ = writeln!(out, "# sent_id = {id}");
        }
        if let Some(text) = &s.text {
            let _ = writeln!(out, "# text = {text}");
        }
        for t in &s.tokens {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                t.index,
                t.form,
                t.lemma.as_deref().unwrap_or("_"),
                t.upos.as_deref().unwrap_or("_"),
                t.head,
                t.deprel
            );
        }
        out.push('\n');
    }
    out
}
