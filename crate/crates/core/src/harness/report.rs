use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ClassifierKind, HarnessError};
use crate::compose::{Aggregation, FeatureKind, Marker, Reduction, Variant};

/// Accuracy of one trained model on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub classifier: ClassifierKind,
    pub variant: Variant,
    /// Feature vector length.
    pub dimension: usize,
    pub train_size: usize,
    pub seed: u64,
    pub eval_set: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    /// Embedding width the features were built from.
    pub embed_dim: usize,
    pub hyperparameters: BTreeMap<String, String>,
    pub rows: Vec<ReportRow>,
    /// Logged, never written, so that reports stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Markdown,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Tsv => "tsv",
            ReportFormat::Markdown => "md",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(ReportFormat::Tsv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            _ => Err(HarnessError::Config(format!("unknown report format {s:?}"))),
        }
    }
}

/// `concat+sum/amp=1`: the variant tag without its marker.
fn features_tag(v: &Variant) -> String {
    format!("{}/amp={}", v.kind, v.amplify)
}

fn embedding_label(v: &Variant) -> String {
    let base = match v.kind {
        FeatureKind::Baseline => "Baseline".to_string(),
        FeatureKind::Syntactic { reduction, aggregation } => {
            let agg = match aggregation {
                Aggregation::Sum => "sum",
                Aggregation::Average => "average",
            };
            match reduction {
                Reduction::Concat => match aggregation {
                    Aggregation::Sum => "Sum".to_string(),
                    Aggregation::Average => "Average".to_string(),
                },
                Reduction::HeadOnly => "Head-only".to_string(),
                Reduction::Elementwise => format!("Element-wise mult. ({agg})"),
            }
        }
    };
    if v.amplify == 1.0 {
        base
    } else {
        format!("{base}, target ×{}", v.amplify)
    }
}

fn marker_label(m: Marker) -> &'static str {
    match m {
        Marker::Sep => "[SEP]",
        Marker::None => "None",
        Marker::Scalar => "9999",
    }
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn percent(acc: f64) -> String {
    format!("{:.2}%", acc * 100.0)
}

fn render_tsv(report: &ExperimentReport) -> String {
    let mut out = String::from("classifier\tvariant\tmarker\tdimension\ttrain_size\tseed\teval_set\taccuracy\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
            r.classifier,
            features_tag(&r.variant),
            r.variant.marker,
            r.dimension,
            r.train_size,
            r.seed,
            r.eval_set,
            r.accuracy
        );
    }
    out
}

/// Classifier, evaluation set, training size and seed.
type GroupKey<'a> = (ClassifierKind, &'a str, usize, u64);

/// Rows grouped by everything except the feature variant, in first-seen order.
fn groups(rows: &[ReportRow]) -> Vec<(GroupKey<'_>, Vec<&ReportRow>)> {
    let mut out: Vec<(GroupKey<'_>, Vec<&ReportRow>)> = Vec::new();
    for r in rows {
        let key = (r.classifier, r.eval_set.as_str(), r.train_size, r.seed);
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => out.push((key, vec![r])),
        }
    }
    out
}

fn render_markdown(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", report.name);
    let _ = writeln!(out, "Embedding width: {}\n", report.embed_dim);

    for ((classifier, set, n, seed), rows) in groups(&report.rows) {
        let _ = writeln!(
            out,
            "## {}, {set} set, {} training pairs, seed {seed}\n",
            classifier.to_string().to_uppercase(),
            thousands(n)
        );
        out.push_str("| Embedding | Boundary marker | Embed. Size | Test Acc. |\n");
        out.push_str("|---|---|---:|---:|\n");
        let best = rows.iter().map(|r| r.accuracy).fold(f64::NEG_INFINITY, f64::max);
        // bold the best entry only when there is something to compare it with
        let compare = rows.len() > 1;
        for r in rows {
            let acc = percent(r.accuracy);
            let acc = if compare && r.accuracy == best {
                format!("**{acc}**")
            } else {
                acc
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {acc} |",
                embedding_label(&r.variant),
                marker_label(r.variant.marker),
                thousands(r.dimension)
            );
        }
        out.push('\n');
    }

    let sizes: Vec<usize> = dedup(report.rows.iter().map(|r| r.train_size));
    if sizes.len() > 1 {
        render_curve(&mut out, report, &sizes);
    }

    out.push_str("## Settings\n\n");
    for (k, v) in &report.hyperparameters {
        let _ = writeln!(out, "- {k}: {v}");
    }
    out
}

fn dedup<T: PartialEq>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Accuracy against training size, one column per model.
fn render_curve(out: &mut String, report: &ExperimentReport, sizes: &[usize]) {
    let sets = dedup(report.rows.iter().map(|r| r.eval_set.as_str()));
    let seeds = dedup(report.rows.iter().map(|r| r.seed));
    let models = dedup(report.rows.iter().map(|r| (r.classifier, r.variant.to_string())));
    for set in &sets {
        for &seed in &seeds {
            let _ = writeln!(out, "## Test accuracy vs. training size, {set} set, seed {seed}\n");
            out.push_str("| Training size |");
            for (c, v) in &models {
                let _ = write!(out, " {} {v} |", c.to_string().to_uppercase());
            }
            out.push_str("\n|---:|");
            out.push_str(&"---:|".repeat(models.len()));
            out.push('\n');
            for &n in sizes {
                let _ = write!(out, "| {} |", thousands(n));
                for (c, v) in &models {
                    let cell = report.rows.iter().find(|r| {
                        r.eval_set == *set
                            && r.seed == seed
                            && r.train_size == n
                            && r.classifier == *c
                            && r.variant.to_string() == *v
                    });
                    match cell {
                        Some(r) => {
                            let _ = write!(out, " {} |", percent(r.accuracy));
                        }
                        None => out.push_str(" |"),
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => render_tsv(report),
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
            s.push('\n');
            s
        }
    }
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    std::fs::write(path, render_report(report, format)).map_err(|e| HarnessError::io(path, e))
}
