//! Text model files.
//!
//! ```text
//! depwsd-model v1
//! kind mlp
//! meta <key> <value>          (zero or more)
//! tensor <name> <rows> <cols>
//! <row of base-16 f64 bit patterns>   (rows lines)
//! ...
//! end
//! ```
//!
//! Values are stored as the hexadecimal IEEE-754 bit pattern so a reloaded
//! model is bit-identical to the one saved.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{ClassifyError, LogRegModel, MlpModel, Model};

const MAGIC: &str = "depwsd-model v1";

/// A model together with free-form metadata (feature variant, dimension...).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: Model,
    pub meta: BTreeMap<String, String>,
}

fn push_tensor(out: &mut String, name: &str, rows: usize, cols: usize, data: &[f64]) {
    let _ = writeln!(out, "tensor {name} {rows} {cols}");
    for row in data.chunks(cols.max(1)) {
        let line: Vec<String> = row.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn write_model(file: &ModelFile) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let kind = match &file.model {
        Model::LogReg(_) => "logreg",
        Model::Mlp(_) => "mlp",
    };
    let _ = writeln!(out, "kind {kind}");
    for (k, v) in &file.meta {
        debug_assert!(!k.contains(char::is_whitespace) && !v.contains('\n'));
        let _ = writeln!(out, "meta {k} {v}");
    }
    match &file.model {
        Model::LogReg(m) => {
            push_tensor(&mut out, "w", 1, m.w.len(), &m.w);
            push_tensor(&mut out, "b", 1, 1, &[m.b]);
            push_tensor(&mut out, "lambda", 1, 1, &[m.lambda]);
        }
        Model::Mlp(m) => {
            push_tensor(&mut out, "w1", m.hidden, m.input, &m.w1);
            push_tensor(&mut out, "b1", 1, m.hidden, &m.b1);
            push_tensor(&mut out, "w2", 2, m.hidden, &m.w2);
            push_tensor(&mut out, "b2", 1, 2, &m.b2);
        }
    }
    out.push_str("end\n");
    out
}

struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

struct Reader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<&'a str, ClassifyError> {
        match self.lines.next() {
            Some((k, l)) => {
                self.line = k + 1;
                Ok(l)
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, reason: &str) -> ClassifyError {
        ClassifyError::ModelFormat {
            line: self.line,
            reason: reason.to_string(),
        }
    }

    fn tensor(&mut self, name: &str) -> Result<Tensor, ClassifyError> {
        let header = self.next()?;
        let f: Vec<&str> = header.split(' ').collect();
        if f.len() != 4 || f[0] != "tensor" || f[1] != name {
            return Err(self.err(&format!("expected tensor {name}")));
        }
        let rows: usize = f[2].parse().map_err(|_| self.err("bad row count"))?;
        let cols: usize = f[3].parse().map_err(|_| self.err("bad column count"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next()?;
            let before = data.len();
            for h in line.split(' ').filter(|s| !s.is_empty()) {
                let bits = u64::from_str_radix(h, 16).map_err(|_| self.err("bad hex value"))?;
                data.push(f64::from_bits(bits));
            }
            if data.len() - before != cols {
                return Err(self.err(&format!("expected {cols} values")));
            }
        }
        Ok(Tensor { rows, cols, data })
    }
}

pub fn read_model(text: &str) -> Result<ModelFile, ClassifyError> {
    let mut r = Reader {
        lines: text.lines().enumerate().peekable(),
        line: 0,
    };
    if r.next()? != MAGIC {
        return Err(r.err("missing model header"));
    }
    let kind = r
        .next()?
        .strip_prefix("kind ")
        .ok_or_else(|| r.err("expected kind line"))?
        .to_string();

    let mut meta = BTreeMap::new();
    while let Some((_, l)) = r.lines.peek() {
        let Some(rest) = l.strip_prefix("meta ") else { break };
        let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
        meta.insert(k.to_string(), v.to_string());
        r.next()?;
    }

    let model = match kind.as_str() {
        "logreg" => {
            let w = r.tensor("w")?;
            let b = r.tensor("b")?;
            let lambda = r.tensor("lambda")?;
            if w.rows != 1 || b.data.len() != 1 || lambda.data.len() != 1 {
                return Err(r.err("bad logistic regression shapes"));
            }
            Model::LogReg(LogRegModel {
                w: w.data,
                b: b.data[0],
                lambda: lambda.data[0],
            })
        }
        "mlp" => {
            let w1 = r.tensor("w1")?;
            let b1 = r.tensor("b1")?;
            let w2 = r.tensor("w2")?;
            let b2 = r.tensor("b2")?;
            let (hidden, input) = (w1.rows, w1.cols);
            if b1.data.len() != hidden || (w2.rows, w2.cols) != (2, hidden) || b2.data.len() != 2 {
                return Err(r.err("inconsistent MLP shapes"));
            }
            Model::Mlp(MlpModel {
                input,
                hidden,
                w1: w1.data,
                b1: b1.data,
                w2: w2.data,
                b2: b2.data,
            })
        }
        other => return Err(r.err(&format!("unknown model kind {other:?}"))),
    };
    if r.next()? != "end" {
        return Err(r.err("expected end"));
    }
    Ok(ModelFile { model, meta })
}

pub fn save_model(path: impl AsRef<Path>, file: &ModelFile) -> Result<(), ClassifyError> {
    let path = path.as_ref();
    std::fs::write(path, write_model(file)).map_err(|source| ClassifyError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile, ClassifyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ClassifyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_model(&text)
}
