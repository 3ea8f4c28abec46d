//! Command-line workflows: `train`, `evaluate`, `predict`, `ablate` and
//! `gradcheck`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric error, 4 verification failure. Failures print one line
//! `error [module]: cause` to stderr. Output files are written to a temporary
//! file and renamed into place only on success.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::autodiff::OpKind;
use crate::data::{read_conll_file, read_tokens, ColumnSpec, Corpus, Split};
use crate::error::{Error, Result};
use crate::eval::{format_table, Metric, TableRow};
use crate::model::{toy_gradcheck, write_atomic, Model, OutputMode};
use crate::trainer::{evaluate_model, run_seeds, RunConfig, SeedReport, SeedRun};

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "seqlabel", version, about = "BiLSTM sequence labeling with an auxiliary language-modeling objective")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model per seed and keep the best dev epoch of each.
    Train(RunArgs),
    /// Score a saved model on labeled data.
    Evaluate(EvalArgs),
    /// Tag a file of tokens with a saved model.
    Predict(PredictArgs),
    /// Compare baseline, +dropout and +LM objective systems.
    Ablate(RunArgs),
    /// Finite-difference check of every gradient on a toy model.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML file with run settings; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Model output path (`<path>.seed<N>` when several seeds run).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Line-delimited JSON records (training history, per-seed scores).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    no_char: bool,
    #[arg(long)]
    no_dropout: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Labeled data to score.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the report as one JSON line to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Tokens in the first column; other columns are ignored.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tagged output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    let p = path
        .as_deref()
        .ok_or_else(|| Error::Usage(format!("--{flag} is required")))?;
    if !p.is_file() {
        return Err(Error::Usage(format!("--{flag} {} is not a readable file", p.display())));
    }
    Ok(p)
}

fn require_output<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Usage(format!("--{flag} is required")))
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            require(path, "config")?;
            RunConfig::from_file(p)
        }
        None => Ok(RunConfig::default()),
    }
}

impl RunArgs {
    /// Config file values with command-line overrides applied.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = load_config(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(m) = self.metric {
            cfg.dev_metric = m;
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        if self.no_char {
            cfg.use_char = false;
        }
        if self.no_dropout {
            cfg.use_dropout = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn columns(cfg: &RunConfig) -> ColumnSpec {
    ColumnSpec {
        token_column: cfg.token_column,
        label_column: cfg.label_column,
        scheme: cfg.tag_scheme,
    }
}

struct Data {
    train: Corpus,
    dev: Corpus,
    test: Option<Corpus>,
}

fn read_data(args: &RunArgs, cfg: &RunConfig) -> Result<Data> {
    let train = require(&args.train, "train")?;
    let dev = require(&args.dev, "dev")?;
    let test = match &args.test {
        Some(_) => Some(require(&args.test, "test")?),
        None => None,
    };
    let cols = columns(cfg);
    Ok(Data {
        train: read_conll_file(train, cols, Split::Train)?,
        dev: read_conll_file(dev, cols, Split::Dev)?,
        test: test.map(|p| read_conll_file(p, cols, Split::Test)).transpose()?,
    })
}

fn seed_model_path(base: &Path, seed: u64, n_seeds: usize) -> PathBuf {
    if n_seeds == 1 {
        return base.to_path_buf();
    }
    let mut s = base.as_os_str().to_owned();
    s.push(format!(".seed{seed}"));
    PathBuf::from(s)
}

fn history_text(runs: &[SeedRun], system: Option<&str>) -> String {
    runs.iter()
        .map(|r| r.outcome.history.to_jsonl_tagged(system))
        .collect()
}

fn score_table(cfg: &RunConfig, rows: &[(&str, &SeedReport)]) -> String {
    let rows: Vec<TableRow<'_>> = rows
        .iter()
        .map(|(system, report)| {
            let mut cells = vec![("dev", report.mean_dev)];
            if let Some(t) = report.mean_test {
                cells.push(("test", t));
            }
            TableRow { system, cells }
        })
        .collect();
    format_table(cfg.dev_metric, &rows)
}

fn cmd_train(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = args.resolve()?;
    let model_path = require_output(&args.model, "model")?;
    let data = read_data(args, &cfg)?;
    let (report, runs) = run_seeds(&cfg, &data.train, &data.dev, data.test.as_ref())?;

    let mut records = history_text(&runs, None);
    records.push_str(&report.to_jsonl(None));
    let history_path = match &args.out {
        Some(p) => p.clone(),
        None => {
            let mut s = model_path.as_os_str().to_owned();
            s.push(".history.jsonl");
            PathBuf::from(s)
        }
    };
    for run in &runs {
        run.outcome
            .model
            .save(&seed_model_path(model_path, run.seed, runs.len()))?;
    }
    write_atomic(&history_path, records.as_bytes())?;

    let _ = write!(out, "{}", report.to_jsonl(None));
    let _ = write!(out, "{}", score_table(&cfg, &[("model", &report)]));
    Ok(())
}

fn cmd_evaluate(args: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let model_path = require(&args.model, "model")?;
    let data_path = require(&args.test, "test")?;
    let cfg = load_config(&args.config)?;
    let model = Model::load(model_path)?;
    let metric = args.metric.unwrap_or(model.metric);
    if metric != model.metric {
        let _ = writeln!(
            err,
            "warning: evaluating with {metric} but the model was selected on {}",
            model.metric
        );
    }
    let mut corpus = read_conll_file(data_path, columns(&cfg), Split::Test)?;
    model.vocab.encode_corpus(&mut corpus)?;
    let score = evaluate_model(&model, &corpus, metric)?;
    let line = serde_json::json!({ "metric": metric.to_string(), "score": score }).to_string();
    if let Some(p) = &args.out {
        write_atomic(p, format!("{line}\n").as_bytes())?;
    }
    let _ = writeln!(out, "{line}");
    let mean = crate::eval::mean_score(&[score]);
    let _ = write!(
        out,
        "{}",
        format_table(
            metric,
            &[TableRow {
                system: "model",
                cells: vec![("test", mean)]
            }]
        )
    );
    Ok(())
}

fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model_path = require(&args.model, "model")?;
    let data_path = require(&args.test, "test")?;
    let cfg = load_config(&args.config)?;
    let model = Model::load(model_path)?;
    let file = std::fs::File::open(data_path).map_err(|e| Error::io(data_path, e))?;
    let sentences = read_tokens(std::io::BufReader::new(file), cfg.token_column)?;
    let mut text = String::new();
    for tokens in &sentences {
        let labels = model.tag(tokens)?;
        for (t, l) in tokens.iter().zip(labels) {
            text.push_str(&t.surface);
            text.push(' ');
            text.push_str(&l);
            text.push('\n');
        }
        text.push('\n');
    }
    match &args.out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => {
            let _ = write!(out, "{text}");
        }
    }
    Ok(())
}

/// The three compared systems: no dropout and no LM objective, dropout
/// only, and dropout with the configured `γ`.
pub fn ablation_configs(cfg: &RunConfig) -> [(&'static str, RunConfig); 3] {
    [
        (
            "baseline",
            RunConfig {
                use_dropout: false,
                gamma: 0.0,
                ..cfg.clone()
            },
        ),
        (
            "+dropout",
            RunConfig {
                use_dropout: true,
                gamma: 0.0,
                ..cfg.clone()
            },
        ),
        (
            "+LMcost",
            RunConfig {
                use_dropout: true,
                ..cfg.clone()
            },
        ),
    ]
}

fn cmd_ablate(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = args.resolve()?;
    let curves_path = require_output(&args.out, "out")?;
    let data = read_data(args, &cfg)?;
    let mut reports = Vec::new();
    let mut records = String::new();
    for (system, sys_cfg) in ablation_configs(&cfg) {
        let (report, runs) = run_seeds(&sys_cfg, &data.train, &data.dev, data.test.as_ref())?;
        records.push_str(&history_text(&runs, Some(system)));
        records.push_str(&report.to_jsonl(Some(system)));
        reports.push((system, report));
    }
    write_atomic(curves_path, records.as_bytes())?;
    let rows: Vec<(&str, &SeedReport)> = reports.iter().map(|(s, r)| (*s, r)).collect();
    let _ = write!(out, "{}", score_table(&cfg, &rows));
    Ok(())
}

fn parse_op(name: &str) -> Result<OpKind> {
    const KINDS: [OpKind; 17] = [
        OpKind::Input,
        OpKind::Param,
        OpKind::MatMul,
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Concat,
        OpKind::Tanh,
        OpKind::Sigmoid,
        OpKind::LogSoftmax,
        OpKind::LogSumExp,
        OpKind::Gather,
        OpKind::Scale,
        OpKind::Sum,
        OpKind::AddN,
        OpKind::AddColumn,
        OpKind::LogSumExpCols,
    ];
    KINDS
        .into_iter()
        .find(|k| format!("{k:?}").eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Usage(format!("unknown operation '{name}'")))
}

/// Parameter group: the tensor name up to its first dot.
fn group_of(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}

fn cmd_gradcheck(args: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let fault = args.inject_fault.as_deref().map(parse_op).transpose()?;
    let mut failing = Vec::new();
    for mode in [OutputMode::Softmax, OutputMode::Crf] {
        for gamma in [0.0, 0.1] {
            let report = toy_gradcheck(mode, gamma, fault)?;
            let mut groups: Vec<(&str, f64)> = Vec::new();
            for p in &report.per_param {
                let g = group_of(&p.name);
                match groups.iter_mut().find(|(n, _)| *n == g) {
                    Some((_, e)) => *e = e.max(p.max_rel_error),
                    None => groups.push((g, p.max_rel_error)),
                }
            }
            let mode_name = match mode {
                OutputMode::Softmax => "softmax",
                OutputMode::Crf => "crf",
            };
            for (g, e) in groups {
                let ok = e < GRADCHECK_TOLERANCE;
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::json!({ "mode": mode_name, "gamma": gamma, "group": g, "max_rel_error": e, "pass": ok })
                );
                if !ok {
                    failing.push(format!("{mode_name}/gamma={gamma}/{g}"));
                }
            }
        }
    }
    if failing.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(format!(
            "relative error above {GRADCHECK_TOLERANCE:e} in {}",
            failing.join(", ")
        )))
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let first = text.lines().next().unwrap_or("invalid arguments");
                let first = first.trim_start_matches("error: ");
                let _ = writeln!(err, "error [cli]: {first}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out, err),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Ablate(a) => cmd_ablate(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error [{}]: {}", e.module(), e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}
