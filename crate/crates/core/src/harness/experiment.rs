use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{labels, preprocess, Artifacts, ExperimentReport, HarnessError, PairRecord, PreprocessOptions, ReportRow};
use crate::classify::{evaluate, lr_train, mlp_train, ClassifyError, Model, TrainConfig};
use crate::compose::{Aggregation, FeatureKind, Marker, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lr,
    Mlp,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Lr => "lr",
            ClassifierKind::Mlp => "mlp",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logreg" | "logistic" => Ok(ClassifierKind::Lr),
            "mlp" => Ok(ClassifierKind::Mlp),
            _ => Err(HarnessError::Config(format!("unknown classifier {s:?} (expected lr or mlp)"))),
        }
    }
}

/// One classifier/feature combination of an experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub classifier: ClassifierKind,
    pub variant: Variant,
}

impl Cell {
    pub fn new(classifier: ClassifierKind, kind: FeatureKind, marker: Marker) -> Self {
        Self {
            classifier,
            variant: Variant::new(kind, marker),
        }
    }
}

/// Built-in experiment matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plan {
    /// LR; baseline, sum and average with the separator marker.
    Table2,
    /// LR; as `Table2` without a marker.
    Table3,
    /// LR; baseline under all three markers.
    Table4,
    /// MLP; baseline and sum under all three markers.
    Table5,
    /// MLP; sum, head-only and element-wise, no marker.
    Table6,
    /// MLP; sum with and without doubling the target slot.
    Table7,
    /// MLP; sum, no marker, scored on every evaluation set.
    Table8,
    /// MLP; baseline and sum over training sizes 1,000..=8,000.
    Fig2,
}

impl Plan {
    pub const ALL: [Plan; 8] = [
        Plan::Table2,
        Plan::Table3,
        Plan::Table4,
        Plan::Table5,
        Plan::Table6,
        Plan::Table7,
        Plan::Table8,
        Plan::Fig2,
    ];

    pub fn cells(self) -> Vec<Cell> {
        use ClassifierKind::{Lr, Mlp};
        let base = FeatureKind::Baseline;
        let sum = FeatureKind::concat(Aggregation::Sum);
        let avg = FeatureKind::concat(Aggregation::Average);
        match self {
            Plan::Table2 => [base, sum, avg].map(|k| Cell::new(Lr, k, Marker::Sep)).to_vec(),
            Plan::Table3 => [base, sum, avg].map(|k| Cell::new(Lr, k, Marker::None)).to_vec(),
            Plan::Table4 => Marker::ALL.map(|m| Cell::new(Lr, base, m)).to_vec(),
            Plan::Table5 => [base, sum]
                .iter()
                .flat_map(|&k| Marker::ALL.map(|m| Cell::new(Mlp, k, m)))
                .collect(),
            Plan::Table6 => [sum, FeatureKind::head_only(), FeatureKind::elementwise(Aggregation::Sum)]
                .map(|k| Cell::new(Mlp, k, Marker::None))
                .to_vec(),
            Plan::Table7 => {
                let plain = Cell::new(Mlp, sum, Marker::None);
                let doubled = Cell {
                    variant: plain.variant.amplified(2.0),
                    ..plain
                };
                vec![plain, doubled]
            }
            Plan::Table8 => vec![Cell::new(Mlp, sum, Marker::None)],
            Plan::Fig2 => [base, sum].map(|k| Cell::new(Mlp, k, Marker::None)).to_vec(),
        }
    }

    /// Training sizes; `None` means "all training pairs".
    pub fn train_sizes(self) -> Option<Vec<usize>> {
        match self {
            Plan::Fig2 => Some((1000..=8000).step_by(500).collect()),
            _ => None,
        }
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plan::Table2 => "table2",
            Plan::Table3 => "table3",
            Plan::Table4 => "table4",
            Plan::Table5 => "table5",
            Plan::Table6 => "table6",
            Plan::Table7 => "table7",
            Plan::Table8 => "table8",
            Plan::Fig2 => "fig2",
        })
    }
}

impl FromStr for Plan {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Plan::ALL
            .into_iter()
            .find(|p| p.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| HarnessError::Config(format!("unknown plan {s:?}")))
    }
}

/// A named, labelled evaluation set.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub name: String,
    pub records: Vec<PairRecord>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub cells: Vec<Cell>,
    pub train: Vec<PairRecord>,
    pub eval: Vec<EvalSet>,
    /// Each cell trains on the first `n` training pairs for every `n` here.
    pub train_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub lr: TrainConfig,
    /// Logistic-regression penalty; `None` uses `1 / n` for `n` training
    /// pairs, the scaling under which a mean loss matches a summed loss with
    /// unit cost.
    pub lr_l2: Option<f64>,
    pub mlp: TrainConfig,
    pub preprocess: PreprocessOptions,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, cells: Vec<Cell>, train: Vec<PairRecord>, eval: Vec<EvalSet>) -> Self {
        let n = train.len();
        Self {
            name: name.into(),
            cells,
            train,
            eval,
            train_sizes: vec![n],
            seeds: vec![0],
            lr: TrainConfig::logreg(),
            lr_l2: None,
            mlp: TrainConfig::mlp(),
            preprocess: PreprocessOptions::default(),
        }
    }

    /// Training configuration of one run.
    pub fn config_for(&self, classifier: ClassifierKind, train_size: usize, seed: u64) -> TrainConfig {
        match classifier {
            ClassifierKind::Lr => TrainConfig {
                l2: self.lr_l2.unwrap_or(1.0 / train_size as f64),
                ..self.lr.clone()
            }
            .with_seed(seed),
            ClassifierKind::Mlp => self.mlp.clone().with_seed(seed),
        }
    }

    fn hyperparameters(&self) -> BTreeMap<String, String> {
        let mut h = BTreeMap::new();
        let classifiers: BTreeSet<ClassifierKind> = self.cells.iter().map(|c| c.classifier).collect();
        if classifiers.contains(&ClassifierKind::Lr) {
            let l2 = self.lr_l2.map_or("1/train_size".to_string(), |v| v.to_string());
            h.insert("lr.l2".into(), l2);
            h.insert("lr.max_iterations".into(), self.lr.max_epochs.to_string());
            h.insert("lr.tolerance".into(), self.lr.tolerance.to_string());
            h.insert("lr.solver".into(), "preconditioned gradient descent, backtracking".into());
        }
        if classifiers.contains(&ClassifierKind::Mlp) {
            let m = &self.mlp;
            h.insert("mlp.learning_rate".into(), m.learning_rate.to_string());
            h.insert("mlp.momentum".into(), m.momentum.to_string());
            h.insert("mlp.batch_size".into(), m.batch_size.to_string());
            h.insert("mlp.max_epochs".into(), m.max_epochs.to_string());
            h.insert("mlp.patience".into(), m.patience.to_string());
            h.insert(
                "mlp.early_stopping".into(),
                format!(
                    "{}% of the training pairs held out; evaluation sets unused",
                    m.validation_fraction * 100.0
                ),
            );
            h.insert(
                "mlp.hidden".into(),
                m.hidden
                    .map_or("input width".into(), |w| format!("{w} (reduced from the input width)")),
            );
        }
        h.insert(
            "dependent_filter".into(),
            format!("{:?}", self.preprocess.filter).to_lowercase(),
        );
        h
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.cells.is_empty() {
            return Err(HarnessError::Config("experiment has no cells".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("experiment has no seeds".into()));
        }
        if self.eval.is_empty() {
            return Err(HarnessError::Config("experiment has no evaluation set".into()));
        }
        if self.train_sizes.is_empty() {
            return Err(HarnessError::InsufficientData("no training sizes given".into()));
        }
        for &n in &self.train_sizes {
            if n == 0 || n > self.train.len() {
                return Err(HarnessError::InsufficientData(format!(
                    "training size {n} requested but {} training pairs are available",
                    self.train.len()
                )));
            }
        }
        let train_ids: BTreeSet<&str> = self.train.iter().map(|r| r.id.as_str()).collect();
        for set in &self.eval {
            if set.records.is_empty() {
                return Err(HarnessError::InsufficientData(format!("evaluation set {} is empty", set.name)));
            }
            if let Some(r) = set.records.iter().find(|r| train_ids.contains(r.id.as_str())) {
                return Err(HarnessError::OverlappingSplits { id: r.id.clone() });
            }
        }
        Ok(())
    }
}

pub fn train_model<X: AsRef<[f64]>>(
    classifier: ClassifierKind,
    xs: &[X],
    ys: &[u8],
    cfg: &TrainConfig,
) -> Result<Model, ClassifyError> {
    Ok(match classifier {
        ClassifierKind::Lr => Model::LogReg(lr_train(xs, ys, cfg)?),
        ClassifierKind::Mlp => Model::Mlp(mlp_train(xs, ys, cfg)?),
    })
}

/// Trains every cell at every training size and seed, and scores each model
/// on every evaluation set. Rows come out in cell, size, seed, set order.
pub fn run_experiment(spec: &ExperimentSpec, artifacts: &Artifacts) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let started = Instant::now();
    let train_y = labels(&spec.train)?;
    let eval_y = spec
        .eval
        .iter()
        .map(|s| labels(&s.records))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut embed_dim = 0;
    for cell in &spec.cells {
        let train_x = preprocess(&spec.train, artifacts, cell.variant, &spec.preprocess)?;
        let eval_x = spec
            .eval
            .iter()
            .map(|s| preprocess(&s.records, artifacts, cell.variant, &spec.preprocess))
            .collect::<Result<Vec<_>, _>>()?;
        let dimension = train_x.dim();
        embed_dim = train_x.embed_dim;
        if let Some(bad) = eval_x.iter().find(|m| m.dim() != dimension) {
            return Err(HarnessError::DimensionMismatch {
                what: format!("evaluation features for {}", cell.variant),
                found: bad.embed_dim,
                expected: train_x.embed_dim,
            });
        }
        for &n in &spec.train_sizes {
            for &seed in &spec.seeds {
                let cfg = spec.config_for(cell.classifier, n, seed);
                let t = Instant::now();
                let model = train_model(cell.classifier, &train_x.rows[..n], &train_y[..n], &cfg)?;
                log::info!(
                    "{} {} n={n} seed={seed}: trained in {:.2?}",
                    cell.classifier,
                    cell.variant,
                    t.elapsed()
                );
                for ((set, x), y) in spec.eval.iter().zip(&eval_x).zip(&eval_y) {
                    let accuracy = evaluate(&model, &x.rows, y)?;
                    log::info!("  {}: accuracy {accuracy:.4}", set.name);
                    rows.push(ReportRow {
                        classifier: cell.classifier,
                        variant: cell.variant,
                        dimension,
                        train_size: n,
                        seed,
                        eval_set: set.name.clone(),
                        accuracy,
                    });
                }
            }
        }
    }
    let wall_time = started.elapsed();
    log::info!("experiment {} finished in {wall_time:.2?}", spec.name);
    Ok(ExperimentReport {
        name: spec.name.clone(),
        embed_dim,
        hyperparameters: spec.hyperparameters(),
        rows,
        wall_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_shapes() {
        assert_eq!(Plan::Table2.cells().len(), 3);
        assert_eq!(Plan::Table5.cells().len(), 6);
        assert!(Plan::Table4.cells().iter().all(|c| c.variant.kind == FeatureKind::Baseline));
        assert!(Plan::Table3.cells().iter().all(|c| c.classifier == ClassifierKind::Lr));
        assert!(Plan::Table6.cells().iter().all(|c| c.variant.marker == Marker::None));
        let t7 = Plan::Table7.cells();
        assert_eq!(t7[0].variant.expected_dim(768), t7[1].variant.expected_dim(768));
        assert_eq!(t7[1].variant.amplify, 2.0);
        let sizes = Plan::Fig2.train_sizes().unwrap();
        assert_eq!(sizes.len(), 15);
        assert_eq!((sizes[0], sizes[14]), (1000, 8000));
        assert!(sizes.windows(2).all(|w| w[1] - w[0] == 500));
    }

    #[test]
    fn dims_at_768() {
        let dims = |p: Plan| p.cells().iter().map(|c| c.variant.expected_dim(768)).collect::<Vec<_>>();
        assert_eq!(dims(Plan::Table2), [2304, 5376, 5376]);
        assert_eq!(dims(Plan::Table3), [1536, 4608, 4608]);
        assert_eq!(dims(Plan::Table4), [2304, 1536, 1537]);
        assert_eq!(dims(Plan::Table6), [4608, 3072, 1536]);
    }

    #[test]
    fn plan_names_round_trip() {
        for p in Plan::ALL {
            assert_eq!(p.to_string().parse::<Plan>().unwrap(), p);
        }
        assert!("table9".parse::<Plan>().is_err());
        assert_eq!("LogReg".parse::<ClassifierKind>().unwrap(), ClassifierKind::Lr);
    }

    #[test]
    fn lr_penalty_scales_with_train_size() {
        let spec = ExperimentSpec::new("x", Plan::Table2.cells(), vec![], vec![]);
        assert_eq!(spec.config_for(ClassifierKind::Lr, 8000, 3).l2, 1.0 / 8000.0);
        assert_eq!(spec.config_for(ClassifierKind::Lr, 8000, 3).seed, 3);
        let fixed = ExperimentSpec {
            lr_l2: Some(0.5),
            ..spec
        };
        assert_eq!(fixed.config_for(ClassifierKind::Lr, 10, 0).l2, 0.5);
    }

    #[test]
    fn empty_sizes_rejected() {
        let mut spec = ExperimentSpec::new("x", Plan::Table2.cells(), vec![], vec![]);
        spec.eval = vec![EvalSet {
            name: "dev".into(),
            records: vec![],
        }];
        spec.train_sizes.clear();
        assert!(matches!(
            run_experiment(&spec, &Artifacts::default()),
            Err(HarnessError::InsufficientData(_))
        ));
    }
}
