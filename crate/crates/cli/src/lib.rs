// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end: fitting, scoring, evaluation and grid search
//! over long-format CSV data.

pub mod config;
pub mod data;
pub mod error;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use kvnorm::pipeline::{grid_search, run_one_vs_rest, FamilyChoice, Preprocessor};
use kvnorm::selftest::{self, Tolerances};
use kvnorm::variance_model::ModelFile;
use kvnorm::{Error, KernelFamily, ScoreMethod, ScorerConfig, VarianceModel};

pub use config::RunConfig;
pub use data::{read_dataset, Dataset};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "kvnorm", version, about = "Variance-norm anomaly scores for multivariate time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub train: Option<PathBuf>,
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON summary file for `eval`.
    #[arg(long, global = true)]
    pub summary: Option<PathBuf>,
    /// Overrides the grid seed and the randomized-signature seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub method: Option<ScoreMethod>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub normal_class: Option<String>,
    #[arg(long, global = true)]
    pub family: Option<FamilyChoice>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fit a model on a corpus and save it.
    Fit,
    /// Score every series of a data set against a saved model.
    Score,
    /// One-vs-rest evaluation with a grid search per class.
    Eval,
    /// Cross-validated grid search for one normal class.
    Gridsearch,
    /// Check the numerical core against its reference implementations.
    Selftest,
}

struct Ctx {
    cli: Cli,
    cfg: RunConfig,
}

impl Ctx {
    fn path(&self, flag: &Option<PathBuf>, cfg: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        flag.clone()
            .or_else(|| cfg.clone())
            .ok_or_else(|| CliError::config(key, format!("missing; pass --{key} or set paths.{key}")))
    }

    fn method(&self) -> ScoreMethod {
        self.cli.method.or(self.cfg.method).unwrap_or(ScoreMethod::Mahalanobis)
    }

    fn family(&self) -> Result<FamilyChoice, CliError> {
        self.cli
            .family
            .or(self.cfg.family)
            .ok_or_else(|| CliError::config("family", "missing; pass --family or set family"))
    }

    fn normal_class(&self) -> Option<String> {
        self.cli.normal_class.clone().or_else(|| self.cfg.normal_class.clone())
    }

    fn seed(&self) -> Option<u64> {
        self.cli.seed.or(self.cfg.seed)
    }

    fn grid(&self) -> kvnorm::pipeline::GridSpec {
        let mut grid = self.cfg.grid.clone();
        if let Some(s) = self.seed() {
            grid.seed = s;
        }
        grid
    }

    fn emit(&self, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
        match &self.cli.out {
            Some(p) => write_file(p, text),
            None => write_out(stdout, text),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_out(stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

/// Runs one command, writing results to `stdout` unless `--out` is given.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(a) = cli.alpha {
        cfg.alpha = Some(a);
        cfg.validate()?;
    }
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    if threads > 0 {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let ctx = Ctx { cli, cfg };
    match ctx.cli.command {
        Command::Fit => fit(&ctx, stdout),
        Command::Score => score(&ctx, stdout),
        Command::Eval => eval(&ctx, stdout),
        Command::Gridsearch => gridsearch(&ctx, stdout),
        Command::Selftest => run_selftest(&ctx, stdout),
    }
}

fn fit(ctx: &Ctx, stdout: &mut dyn Write) -> Result<(), CliError> {
    let data_path = ctx.path(&ctx.cli.data, &ctx.cfg.paths.data, "data")?;
    let model_path = ctx.path(&ctx.cli.model, &ctx.cfg.paths.model, "model")?;
    let mut spec = ctx
        .cfg
        .kernel
        .clone()
        .ok_or_else(|| CliError::config("kernel", "missing [kernel] table"))?;
    if let (KernelFamily::RandomizedSignature(r), Some(s)) = (&mut spec.kernel, ctx.seed()) {
        r.seed = s;
    }
    let data = read_dataset(&data_path)?;
    let corpus: Vec<_> = match ctx.normal_class() {
        Some(class) => {
            let picked: Vec<_> = data
                .series
                .iter()
                .zip(&data.labels)
                .filter(|(_, l)| **l == class)
                .map(|(s, _)| s.clone())
                .collect();
            if picked.is_empty() {
                return Err(CliError::config("normal_class", format!("no series labelled {class:?}")));
            }
            picked
        }
        None => data.series,
    };
    let (pre, corpus) = match ctx.cfg.preprocessing {
        Some(pc) => {
            let pre = Preprocessor::fit(pc, &corpus)?;
            let out = pre.apply_all(&corpus)?;
            (Some(pre), out)
        }
        None => (None, corpus),
    };
    let model = VarianceModel::fit(corpus, spec, ctx.cfg.fit)?;
    let summary = fit_summary(&model);
    ModelFile::new(model, pre).save(&model_path)?;
    ctx.emit(&summary, stdout)
}

fn fit_summary(model: &VarianceModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "kernel: {}", model.kernel_spec().family_name());
    let _ = writeln!(s, "corpus size: {}", model.len());
    let _ = writeln!(s, "retained eigenpairs: {}", model.retained());
    let top: Vec<String> = model.eigenvalues().iter().take(5).map(|l| format!("{l:.6e}")).collect();
    let _ = writeln!(s, "leading eigenvalues: {}", top.join(" "));
    s
}

fn score(ctx: &Ctx, stdout: &mut dyn Write) -> Result<(), CliError> {
    let data_path = ctx.path(&ctx.cli.data, &ctx.cfg.paths.data, "data")?;
    let model_path = ctx.path(&ctx.cli.model, &ctx.cfg.paths.model, "model")?;
    let file = ModelFile::load(&model_path)?;
    let data = read_dataset(&data_path)?;
    let expected = match &file.preprocessing {
        Some(p) => p.input_dim(),
        None => file.model.dim(),
    };
    if data.dim != expected {
        return Err(CliError::Parse {
            path: data_path,
            line: Some(1),
            msg: format!("model expects {expected} channels, data has {}", data.dim),
        });
    }
    let series = match &file.preprocessing {
        Some(p) => p.apply_all(&data.series)?,
        None => data.series,
    };
    let cfg = ScorerConfig::new(ctx.method(), ctx.cfg.alpha.unwrap_or(0.0));
    cfg.validate()?;
    let scores = file.model.score_many(&cfg, &series)?;
    let mut out = String::from("series_id,score\n");
    for (id, s) in data.ids.iter().zip(scores) {
        let _ = writeln!(out, "{id},{s:?}");
    }
    ctx.emit(&out, stdout)
}

fn eval(ctx: &Ctx, stdout: &mut dyn Write) -> Result<(), CliError> {
    let train = read_dataset(&ctx.path(&ctx.cli.train, &ctx.cfg.paths.train, "train")?)?;
    let test = read_dataset(&ctx.path(&ctx.cli.test, &ctx.cfg.paths.test, "test")?)?;
    if train.dim != test.dim {
        return Err(Error::DimensionMismatch { expected: train.dim, found: test.dim }.into());
    }
    let report = run_one_vs_rest(&train.into_labeled(), &test.into_labeled(), &ctx.grid(), ctx.method(), ctx.family()?)?;
    ctx.emit(&report.to_text(), stdout)?;
    if let Some(p) = ctx.cli.summary.as_ref().or(ctx.cfg.paths.summary.as_ref()) {
        write_file(p, &report.to_json())?;
    }
    if report.is_partial() {
        let failed = report.stats.failed_classes;
        return Err(CliError::Partial(format!("{failed} of {} classes failed", report.stats.classes)));
    }
    Ok(())
}

fn gridsearch(ctx: &Ctx, stdout: &mut dyn Write) -> Result<(), CliError> {
    let path = match (&ctx.cli.data, &ctx.cli.train) {
        (Some(p), _) | (None, Some(p)) => p.clone(),
        (None, None) => ctx.path(&ctx.cfg.paths.data, &ctx.cfg.paths.train, "data")?,
    };
    let class = ctx
        .normal_class()
        .ok_or_else(|| CliError::config("normal_class", "missing; pass --normal-class or set normal_class"))?;
    let train = read_dataset(&path)?.into_labeled();
    let result = grid_search(&train, &class, &ctx.grid(), ctx.method(), ctx.family()?)?;
    let mut json = serde_json::to_string_pretty(&result).map_err(|e| CliError::Failed(e.to_string()))?;
    json.push('\n');
    ctx.emit(&json, stdout)
}

fn run_selftest(ctx: &Ctx, stdout: &mut dyn Write) -> Result<(), CliError> {
    let results = selftest::run(&Tolerances::default());
    ctx.emit(&selftest::render(&results), stdout)?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("self-test failed: {}", failed.join(", "))))
    }
}
