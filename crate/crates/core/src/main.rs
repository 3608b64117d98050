use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use depwsd::classify::{evaluate, load_model, save_model, Classifier, ModelFile, TrainConfig};
use depwsd::compose::{DependentFilter, FeatureKind, Marker, Variant};
use depwsd::harness::{
    emit_report, generate_corpus, labels, load_dataset, preprocess, render_report, run_experiment, train_model,
    Artifacts, Cell, ClassifierKind, ConfigFile, EvalSet, ExperimentReport, ExperimentSpec, HarnessError,
    PairRecord, Plan, PreprocessOptions, ReportFormat, SynthOptions, TrainSection,
};

/// Syntax-augmented word sense disambiguation over sentence pairs.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each may also come from `--config`.
#[derive(Args)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// JSON-lines dataset (training data for `train` and `experiment`).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Directory of *.wpe embedding files.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Directory of *.conllu parse files.
    #[arg(long, global = true)]
    parses: Option<PathBuf>,
    /// Feature kind (baseline, concat+sum, concat+average, head_only,
    /// elementwise+sum, ...) or a full tag such as concat+sum/none/amp=2.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Boundary marker: sep, none or scalar.
    #[arg(long, global = true)]
    marker: Option<String>,
    /// lr or mlp.
    #[arg(long, global = true)]
    classifier: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Expected embedding width.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Feature cache directory.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Drop punctuation dependents from the dependent slot.
    #[arg(long, global = true)]
    no_punct_dependents: bool,
}

#[derive(Args, Default)]
struct TrainFlags {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// L2 strength; logistic regression defaults to 1/n.
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    /// MLP hidden width (defaults to the input width).
    #[arg(long)]
    hidden: Option<usize>,
}

impl TrainFlags {
    fn section(&self, classifier: Option<String>, seed: Option<u64>) -> TrainSection {
        TrainSection {
            classifier,
            seed,
            seeds: None,
            train_sizes: None,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            tolerance: self.tolerance,
            l2: self.l2,
            momentum: self.momentum,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            hidden: self.hidden,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build (or reuse) cached feature vectors for a dataset.
    Preprocess,
    /// Train one classifier and save it to --out.
    Train {
        #[command(flatten)]
        flags: TrainFlags,
        /// Use only the first N training pairs.
        #[arg(long)]
        train_size: Option<usize>,
    },
    /// Score a saved model on --data.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Run an experiment matrix and write report.{tsv,md,json} to --out.
    Experiment {
        /// table2 ... table8, fig2 or custom (uses --variant/--marker/--classifier).
        #[arg(long, default_value = "custom")]
        plan: String,
        /// Evaluation set (the development set).
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Additional cross-lingual evaluation set.
        #[arg(long)]
        cross: Option<PathBuf>,
        /// Comma-separated training sizes.
        #[arg(long, value_delimiter = ',')]
        train_sizes: Option<Vec<usize>>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Generate a synthetic corpus with planted senses under --out.
    Synth {
        #[arg(long)]
        train_pairs: Option<usize>,
        #[arg(long)]
        dev_pairs: Option<usize>,
        /// Number of ambiguous lemmas (1 to 24).
        #[arg(long)]
        lemmas: Option<usize>,
    },
    /// Re-render a report.json as tsv, markdown or json.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: String,
    },
}

/// Flag values with config-file values filled in.
struct Settings {
    common: Common,
    config: ConfigFile,
}

fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}

impl Settings {
    fn data(&self) -> Option<PathBuf> {
        pick(&self.common.data, &self.config.data.train)
    }

    fn require(value: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
        value.ok_or_else(|| anyhow!(HarnessError::Config(format!("--{flag} is required"))))
    }

    fn artifacts(&self, records: &[&[PairRecord]]) -> Result<Artifacts> {
        let emb = Self::require(pick(&self.common.embeddings, &self.config.data.embeddings), "embeddings")?;
        let parses = Self::require(pick(&self.common.parses, &self.config.data.parses), "parses")?;
        let wanted: BTreeSet<String> = records
            .iter()
            .flat_map(|rs| rs.iter())
            .flat_map(|r| [r.sentence_id(1), r.sentence_id(2)])
            .collect();
        Ok(Artifacts::load(&emb, &parses, Some(&wanted))?)
    }

    fn preprocess_options(&self) -> PreprocessOptions {
        let filter = if self.common.no_punct_dependents {
            DependentFilter::NoPunct
        } else {
            self.config.features.dependent_filter.unwrap_or_default()
        };
        PreprocessOptions {
            cache_dir: pick(&self.common.cache_dir, &self.config.data.cache_dir),
            dim: pick(&self.common.dim, &self.config.features.dim),
            filter,
        }
    }

    fn variant(&self) -> Result<Variant> {
        let tag = pick(&self.common.variant, &self.config.features.variant).unwrap_or_else(|| "concat+sum".into());
        let marker = pick(&self.common.marker, &self.config.features.marker);
        let mut variant = if tag.contains('/') {
            tag.parse::<Variant>()?
        } else {
            Variant::new(tag.parse::<FeatureKind>()?, Marker::None)
        };
        if let Some(m) = marker {
            variant.marker = m.parse()?;
        }
        Ok(variant)
    }

    fn classifier(&self, train: &TrainSection) -> Result<ClassifierKind> {
        Ok(train.classifier.as_deref().unwrap_or("mlp").parse()?)
    }
}

fn base_config(kind: ClassifierKind) -> TrainConfig {
    match kind {
        ClassifierKind::Lr => TrainConfig::logreg(),
        ClassifierKind::Mlp => TrainConfig::mlp(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_preprocess(s: &Settings) -> Result<()> {
    let data = Settings::require(s.data(), "data")?;
    let records = load_dataset(&data)?;
    let artifacts = s.artifacts(&[&records])?;
    let m = preprocess(&records, &artifacts, s.variant()?, &s.preprocess_options())?;
    println!(
        "{} vectors of length {} for {}{}",
        m.rows.len(),
        m.dim(),
        m.variant,
        match (&m.cache_path, m.cache_hit) {
            (Some(p), true) => format!(" (cache hit: {})", p.display()),
            (Some(p), false) => format!(" (cached to {})", p.display()),
            (None, _) => String::new(),
        }
    );
    Ok(())
}

fn cmd_train(s: &Settings, flags: &TrainFlags, train_size: Option<usize>) -> Result<()> {
    let train = flags.section(s.common.classifier.clone(), s.common.seed).or(&s.config.train);
    let kind = s.classifier(&train)?;
    let data = Settings::require(s.data(), "data")?;
    let out = Settings::require(pick(&s.common.out, &s.config.data.out), "out")?;
    let records = load_dataset(&data)?;
    let n = train_size.unwrap_or(records.len());
    if n == 0 || n > records.len() {
        bail!(HarnessError::InsufficientData(format!(
            "training size {n} requested but {} pairs are available",
            records.len()
        )));
    }
    let records = &records[..n];
    let artifacts = s.artifacts(&[records])?;
    let variant = s.variant()?;
    let m = preprocess(records, &artifacts, variant, &s.preprocess_options())?;
    let ys = labels(records)?;
    let mut cfg = train.apply(base_config(kind));
    cfg.l2 = match (kind, train.l2) {
        (_, Some(l2)) => l2,
        (ClassifierKind::Lr, None) => 1.0 / n as f64,
        (ClassifierKind::Mlp, None) => cfg.l2,
    };
    let model = train_model(kind, &m.rows, &ys, &cfg)?;
    let accuracy = evaluate(&model, &m.rows, &ys)?;
    let meta = BTreeMap::from([
        ("classifier".to_string(), kind.to_string()),
        ("variant".to_string(), variant.to_string()),
        ("embed_dim".to_string(), m.embed_dim.to_string()),
        ("dependent_filter".to_string(), format!("{:?}", s.preprocess_options().filter)),
        ("seed".to_string(), cfg.seed.to_string()),
        ("train_size".to_string(), n.to_string()),
    ]);
    save_model(&out, &ModelFile { model, meta })?;
    println!("trained {kind} on {n} pairs ({}), training accuracy {accuracy:.4}", variant);
    println!("model written to {}", out.display());
    Ok(())
}

fn cmd_evaluate(s: &Settings, model_path: &Path) -> Result<()> {
    let file = load_model(model_path)?;
    let stored: Variant = file
        .meta
        .get("variant")
        .ok_or_else(|| anyhow!("{} has no variant metadata", model_path.display()))?
        .parse()?;
    if s.common.variant.is_some() || s.common.marker.is_some() {
        let asked = s.variant()?;
        if asked != stored {
            bail!(HarnessError::Config(format!(
                "model was trained on {stored} features, not {asked}"
            )));
        }
    }
    let mut opts = s.preprocess_options();
    if file.meta.get("dependent_filter").map(String::as_str) == Some("NoPunct") {
        opts.filter = DependentFilter::NoPunct;
    }
    let data = Settings::require(s.data(), "data")?;
    let records = load_dataset(&data)?;
    let artifacts = s.artifacts(&[&records])?;
    let m = preprocess(&records, &artifacts, stored, &opts)?;
    if let Some(out) = pick(&s.common.out, &s.config.data.out) {
        let mut text = String::from("id\tprob_same\tprediction\n");
        for (id, x) in m.ids.iter().zip(&m.rows) {
            let p = file.model.prob_positive(x.values())?;
            let label = if file.model.predict(x.values())? == 1 { "T" } else { "F" };
            text.push_str(&format!("{id}\t{p:.6}\t{label}\n"));
        }
        write_text(&out, &text)?;
    }
    match labels(&records) {
        Ok(ys) => println!("accuracy {:.4} on {} pairs", evaluate(&file.model, &m.rows, &ys)?, ys.len()),
        Err(_) => println!("{} pairs scored (unlabelled)", records.len()),
    }
    Ok(())
}

fn cmd_experiment(
    s: &Settings,
    plan: &str,
    dev: &Option<PathBuf>,
    cross: &Option<PathBuf>,
    train_sizes: &Option<Vec<usize>>,
    seeds: &Option<Vec<u64>>,
    flags: &TrainFlags,
) -> Result<()> {
    let mut train = flags.section(s.common.classifier.clone(), s.common.seed).or(&s.config.train);
    if train_sizes.is_some() {
        train.train_sizes = train_sizes.clone();
    }
    if seeds.is_some() {
        train.seeds = seeds.clone();
    }
    let plan = if plan == "custom" { None } else { Some(plan.parse::<Plan>()?) };
    let cells = match plan {
        Some(p) => p.cells(),
        None => vec![Cell {
            classifier: s.classifier(&train)?,
            variant: s.variant()?,
        }],
    };

    let data = Settings::require(s.data(), "data")?;
    let dev = Settings::require(pick(dev, &s.config.data.dev), "dev")?;
    let cross = pick(cross, &s.config.data.cross);
    let out = Settings::require(pick(&s.common.out, &s.config.data.out), "out")?;
    if plan == Some(Plan::Table8) && cross.is_none() {
        bail!(HarnessError::Config("table8 needs a cross-lingual set (--cross)".into()));
    }

    let train_records = load_dataset(&data)?;
    let mut eval = vec![EvalSet {
        name: "dev".into(),
        records: load_dataset(&dev)?,
    }];
    if let Some(path) = cross {
        eval.push(EvalSet {
            name: "cross".into(),
            records: load_dataset(&path)?,
        });
    }
    let mut all: Vec<&[PairRecord]> = vec![&train_records];
    all.extend(eval.iter().map(|e| e.records.as_slice()));
    let artifacts = s.artifacts(&all)?;

    let name = plan.map_or("custom".to_string(), |p| p.to_string());
    let mut spec = ExperimentSpec::new(name, cells, train_records, eval);
    if let Some(sizes) = train.train_sizes.clone().or_else(|| plan.and_then(Plan::train_sizes)) {
        spec.train_sizes = sizes;
    }
    spec.seeds = match (&train.seeds, train.seed) {
        (Some(list), _) => list.clone(),
        (None, Some(seed)) => vec![seed],
        (None, None) => vec![0],
    };
    spec.lr = train.apply(TrainConfig::logreg());
    spec.lr_l2 = train.l2;
    spec.mlp = train.apply(TrainConfig::mlp());
    if let Some(l2) = train.l2 {
        spec.mlp.l2 = l2;
    }
    spec.preprocess = s.preprocess_options();

    let report = run_experiment(&spec, &artifacts)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for format in [ReportFormat::Tsv, ReportFormat::Markdown, ReportFormat::Json] {
        let path = out.join(format!("report.{}", format.extension()));
        emit_report(&report, format, &path)?;
    }
    print!("{}", render_report(&report, ReportFormat::Tsv));
    log::info!("reports written to {}", out.display());
    Ok(())
}

fn cmd_synth(s: &Settings, train_pairs: Option<usize>, dev_pairs: Option<usize>, lemmas: Option<usize>) -> Result<()> {
    let c = &s.config.synth;
    let d = SynthOptions::default();
    let opts = SynthOptions {
        train_pairs: train_pairs.or(c.train_pairs).unwrap_or(d.train_pairs),
        dev_pairs: dev_pairs.or(c.dev_pairs).unwrap_or(d.dev_pairs),
        dim: s.common.dim.or(c.dim).unwrap_or(d.dim),
        lemmas: lemmas.or(c.lemmas).unwrap_or(d.lemmas),
        seed: s.common.seed.or(c.seed).unwrap_or(d.seed),
    };
    let out = Settings::require(pick(&s.common.out, &s.config.data.out), "out")?;
    let summary = generate_corpus(&opts, &out)?;
    println!(
        "{} train and {} dev pairs ({} labelled T) written to {}",
        summary.train_pairs,
        summary.dev_pairs,
        summary.positives,
        out.display()
    );
    Ok(())
}

fn cmd_report(s: &Settings, input: &Path, format: &str) -> Result<()> {
    let format: ReportFormat = format.parse()?;
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let report: ExperimentReport =
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", input.display())))?;
    match &s.common.out {
        Some(out) => emit_report(&report, format, out)?,
        None => print!("{}", render_report(&report, format)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let s = Settings {
        common: cli.common,
        config,
    };
    match &cli.command {
        Command::Preprocess => cmd_preprocess(&s),
        Command::Train { flags, train_size } => cmd_train(&s, flags, *train_size),
        Command::Evaluate { model } => cmd_evaluate(&s, model),
        Command::Experiment {
            plan,
            dev,
            cross,
            train_sizes,
            seeds,
            flags,
        } => cmd_experiment(&s, plan, dev, cross, train_sizes, seeds, flags),
        Command::Synth {
            train_pairs,
            dev_pairs,
            lemmas,
        } => cmd_synth(&s, *train_pairs, *dev_pairs, *lemmas),
        Command::Report { input, format } => cmd_report(&s, input, format),
    }
}

/// `{"error": kind, "message": text}` on stderr.
fn report_error(err: &anyhow::Error) {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<HarnessError>().map(HarnessError::kind))
        .or_else(|| {
            err.chain()
                .find_map(|e| e.downcast_ref::<depwsd::classify::ClassifyError>())
                .map(|_| "Classify")
        })
        .or_else(|| {
            err.chain()
                .find_map(|e| e.downcast_ref::<depwsd::compose::ComposeError>())
                .map(|_| "Compose")
        })
        .unwrap_or("Error");
    // library errors already print their sources; skip repeats
    let mut message = String::new();
    for part in err.chain().map(ToString::to_string) {
        if !message.ends_with(&part) {
            if !message.is_empty() {
                message.push_str(": ");
            }
            message.push_str(&part);
        }
    }
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report_error(&err);
            ExitCode::FAILURE
        }
    }
}
