//! Command-line pipeline: corpus generation, prior fitting, observation
//! tuning, evaluation and reports.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::agents::AgentKind;
use crate::config::{streams, ExperimentConfig};
use crate::corpus::{Corpus, Split};
use crate::error::{Error, Result};
use crate::eval::{self, EvalProtocol};
use crate::model::learn::{collect_prior_samples, fit_prior_mle, tune_psi_obs};
use crate::model::SemanticModel;

#[derive(Debug, Parser)]
#[command(name = "leaps", version, about = "Semantic-graph planning experiments in generated houses")]
pub struct Cli {
    /// Experiment seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train/valid/test house corpora.
    GenHouses,
    /// Fit the prior from random explorations of the training corpus.
    FitPrior {
        /// Training corpus (default: <out>/train.jsonl).
        #[arg(long)]
        train: Option<PathBuf>,
        /// Output model (default: <out>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Choose the observation parameters on the validation corpus.
    TuneObs {
        /// Model to tune, rewritten in place (default: <out>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Validation corpus (default: <out>/valid.jsonl).
        #[arg(long)]
        valid: Option<PathBuf>,
    },
    /// Evaluate every configured agent on the test corpus.
    Eval {
        /// Model (default: <out>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Test corpus (default: <out>/test.jsonl).
        #[arg(long)]
        test: Option<PathBuf>,
        /// Write decision-window traces of the first N episodes to <out>/traces.jsonl.
        #[arg(long, default_value_t = 0)]
        traces: usize,
    },
    /// Render a report CSV as tables and plot-ready CSVs.
    Report {
        /// Report CSV (default: <out>/report.csv).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also print the prior's ranked neighbor table for this model.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

/// Map an error to the process exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Unsatisfiable(_) => 2,
        _ => 1,
    }
}

/// Parse `argv` and run; returns the exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::config("--jobs", "must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| Error::config("--jobs", e.to_string()))?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    pool.install(|| dispatch(&cli, &config))
}

fn dispatch(cli: &Cli, config: &ExperimentConfig) -> Result<()> {
    let out = cli.out.as_path();
    let or_out = |p: &Option<PathBuf>, name: &str| p.clone().unwrap_or_else(|| out.join(name));
    match &cli.command {
        Command::GenHouses => gen_houses(config, out),
        Command::FitPrior { train, model } => fit_prior(config, &or_out(train, "train.jsonl"), &or_out(model, "model.json")),
        Command::TuneObs { model, valid } => tune_obs(config, &or_out(model, "model.json"), &or_out(valid, "valid.jsonl")),
        Command::Eval { model, test, traces } => {
            run_eval(config, &or_out(model, "model.json"), &or_out(test, "test.jsonl"), out, *traces)
        }
        Command::Report { report, model } => run_report(&or_out(report, "report.csv"), model.as_deref(), out),
    }
}

pub fn gen_houses(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let seed = crate::derive_seed(config.seed, streams::CORPUS);
    for split in Split::ALL {
        let count = match split {
            Split::Train => config.splits.train,
            Split::Valid => config.splits.valid,
            Split::Test => config.splits.test,
        };
        let path = out.join(format!("{}.jsonl", split.as_str()));
        Corpus::generate(&config.generator, split, count, seed)?.save(&path)?;
        println!("wrote {} houses to {}", count, path.display());
    }
    Ok(())
}

fn load_corpus(config: &ExperimentConfig, path: &Path) -> Result<Corpus> {
    let corpus = Corpus::load(path)?;
    let vocab = config.generator.vocabulary()?;
    if corpus.header.generator.vocabulary()? != vocab {
        return Err(Error::config(
            "generator",
            format!("{} was generated with a different signal vocabulary", path.display()),
        ));
    }
    Ok(corpus)
}

pub fn fit_prior(config: &ExperimentConfig, train: &Path, model_path: &Path) -> Result<()> {
    let corpus = load_corpus(config, train)?;
    let vocab = config.generator.vocabulary()?;
    let tally = collect_prior_samples(
        &vocab,
        &corpus.houses,
        &config.prior_sampling(),
        crate::derive_seed(config.seed, streams::PRIOR),
    )?;
    let fit = fit_prior_mle(&vocab, &tally, config.prior.alpha)?;
    let model = SemanticModel::from_fit(vocab, fit, config.prior.psi_obs_0, config.prior.psi_obs_1)?;
    model.save(model_path)?;
    println!("wrote {} ({} parameters)", model_path.display(), model.parameter_count());
    print!("{}", eval::PriorRow::table(&eval::report_prior(&model)));
    Ok(())
}

pub fn tune_obs(config: &ExperimentConfig, model_path: &Path, valid: &Path) -> Result<()> {
    let model = SemanticModel::load(model_path)?;
    let corpus = load_corpus(config, valid)?;
    let protocol = EvalProtocol {
        base_episodes: config.tune.episodes,
        stratum_floor: 0,
        ..config.protocol.clone()
    };
    let episodes = eval::build_protocol(&corpus.houses, &protocol, crate::derive_seed(config.seed, streams::TUNE))?;
    let agent = config.agent(AgentKind::Leaps, config.tune.horizon);
    let outcome = tune_psi_obs(&config.psi_obs_grid, &model, &corpus.houses, &episodes, &agent)?;
    for (o0, o1, rate) in &outcome.scores {
        println!("psi_obs_0 = {o0:<8} psi_obs_1 = {o1:<8} success = {rate:.4}");
    }
    let (o0, o1) = outcome.best;
    model.with_obs(o0, o1)?.save(model_path)?;
    println!("selected psi_obs_0 = {o0}, psi_obs_1 = {o1}; updated {}", model_path.display());
    Ok(())
}

pub fn run_eval(config: &ExperimentConfig, model_path: &Path, test: &Path, out: &Path, traces: usize) -> Result<()> {
    let model = Arc::new(SemanticModel::load(model_path)?);
    if model.vocab() != &config.generator.vocabulary()? {
        return Err(Error::config("generator", "model vocabulary differs from the configured generator"));
    }
    let corpus = load_corpus(config, test)?;
    let seed = crate::derive_seed(config.seed, streams::EVAL);
    let episodes = eval::build_protocol(&corpus.houses, &config.protocol, seed)?;
    let settings = config.agent(AgentKind::Leaps, config.tune.horizon);
    let report = eval::evaluate(&model, &corpus.houses, &episodes, &config.protocol, &settings)?;
    let report_path = out.join("report.csv");
    report.write_csv(&report_path)?;
    report.write_improvements_csv(&out.join("improvements.csv"))?;
    let summary = eval::summary_table(&report);
    let summary_path = out.join("summary.txt");
    std::fs::write(&summary_path, &summary).map_err(|e| Error::io(&summary_path, e))?;
    if traces > 0 {
        let path = out.join("traces.jsonl");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        eval::write_traces(&mut w, &model, &corpus.houses, &episodes, &config.protocol, &settings, traces)?;
        std::io::Write::flush(&mut w).map_err(|e| Error::io(&path, e))?;
    }
    print!("{summary}");
    println!("{} episodes; wrote {}", episodes.len(), report_path.display());
    Ok(())
}

pub fn run_report(report_path: &Path, model: Option<&Path>, out: &Path) -> Result<()> {
    let report = eval::read_report_csv(report_path)?;
    eval::write_plot_csvs(&report, out)?;
    print!("{}", eval::summary_table(&report));
    if let Some(p) = model {
        let model = SemanticModel::load(p)?;
        print!("{}", eval::PriorRow::table(&eval::report_prior(&model)));
    }
    Ok(())
}
