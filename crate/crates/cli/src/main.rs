//! Command-line front end for the detection pipeline:
//! simulate -> extract-features -> train -> predict -> evaluate -> sweep.
//!
//! Exit codes: 0 success, 2 usage or I/O failure, 3 numerical failure.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use psmdetect::action_log::{load_action_log, CorpusIndex};
use psmdetect::error::Error;
use psmdetect::eval::{self, EvalParams, LabeledExample};
use psmdetect::lapsvm::{GraphSpec, GraphWeighting, KernelSpec, LapSvmModel};
use psmdetect::synth::{self, SynthConfig};
use psmdetect::timedecay::{
    extract_features, read_feature_csv, write_feature_csv, DecayConfig, DEFAULT_DELTA,
};

#[derive(Parser)]
#[command(name = "psmdetect", version, about = "Detect pathogenic users from retweet cascades")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic action log with planted pathogenic users.
    Simulate(SimulateArgs),
    /// Compute time-decayed causality features from an action log.
    ExtractFeatures(ExtractArgs),
    /// Train a model from features and labels.
    Train(TrainArgs),
    /// Score a feature CSV with a trained model.
    Predict(PredictArgs),
    /// Split, train and report F1/precision/recall on the test split.
    Evaluate(EvaluateArgs),
    /// Evaluate across a grid of unlabeled fractions.
    Sweep(SweepArgs),
}

/// Flags shared by the learning commands; a config file (flat key=value
/// lines) supplies defaults, flags override.
#[derive(Args, Clone)]
struct LearnOpts {
    /// Config file with key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cl: Option<f64>,
    #[arg(long)]
    cr: Option<f64>,
    /// `linear` or `gaussian:<gamma>`.
    #[arg(long)]
    kernel: Option<String>,
    /// `heat`, `heat:<bandwidth>` or `raw`.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    unlabeled_frac: Option<f64>,
    #[arg(long)]
    split_frac: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    psm_frac: Option<f64>,
    #[arg(long)]
    messages: Option<usize>,
    #[arg(long)]
    viral_frac: Option<f64>,
    /// Viral cascade size range, `min:max`.
    #[arg(long)]
    viral_size: Option<String>,
    /// Normal cascade size range, `min:max`.
    #[arg(long)]
    normal_size: Option<String>,
    #[arg(long)]
    horizon: Option<i64>,
    #[arg(long)]
    early_bias: Option<f64>,
    /// Output action-log CSV.
    #[arg(long)]
    out: PathBuf,
    /// Output truth CSV.
    #[arg(long)]
    truth_out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input action-log CSV.
    #[arg(long)]
    input: PathBuf,
    /// Output feature CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    theta: Option<usize>,
    #[arg(long)]
    phi: Option<f64>,
    /// Interval start; defaults to the earliest action time.
    #[arg(long)]
    t0: Option<i64>,
    /// Interval end; defaults to the latest action time.
    #[arg(long)]
    t: Option<i64>,
    #[arg(long)]
    delta: Option<i64>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    learn: LearnOpts,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Output CSV `user,score,label`; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    learn: LearnOpts,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    learn: LearnOpts,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Comma-separated unlabeled fractions; default 0.1,0.2,0.3,0.4,0.5.
    #[arg(long)]
    fractions: Option<String>,
    /// Output CSV `fraction,f1`; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::ExtractFeatures(a) => cmd_extract(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Header { .. } | Error::InvalidArgument(_) | Error::ModelFormat(_)
        | Error::Json(_) | Error::EmptyCorpus => 2,
        Error::IllConditioned { .. } | Error::NonConvergence { .. } | Error::Internal(_) => 3,
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<HashMap<String, String>, Error> {
    let mut map = HashMap::new();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)?;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("config line {}: expected key=value", ln + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

fn cfg_parse<T: std::str::FromStr>(
    cfg: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, Error> {
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| {
            Error::InvalidArgument(format!("config key `{key}`: cannot parse `{v}`"))
        }),
    }
}

fn parse_kernel(s: &str) -> Result<KernelSpec, Error> {
    if s == "linear" {
        return Ok(KernelSpec::Linear);
    }
    if let Some(g) = s.strip_prefix("gaussian:") {
        let gamma: f64 = g
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad gamma `{g}`")))?;
        return Ok(KernelSpec::Gaussian { gamma });
    }
    Err(Error::InvalidArgument(format!(
        "unknown kernel `{s}` (use `linear` or `gaussian:<gamma>`)"
    )))
}

fn parse_graph(s: &str, knn: Option<usize>) -> Result<GraphSpec, Error> {
    let mut spec = GraphSpec::default();
    if let Some(k) = knn {
        spec.knn = Some(k);
    }
    if s == "heat" {
        return Ok(spec);
    }
    if let Some(b) = s.strip_prefix("heat:") {
        spec.bandwidth = Some(
            b.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad bandwidth `{b}`")))?,
        );
        return Ok(spec);
    }
    if s == "raw" {
        spec.weighting = GraphWeighting::RawDistance;
        return Ok(spec);
    }
    Err(Error::InvalidArgument(format!(
        "unknown graph spec `{s}` (use `heat`, `heat:<bandwidth>` or `raw`)"
    )))
}

fn parse_range(s: &str) -> Result<(usize, usize), Error> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("bad range `{s}`, expected min:max")))?;
    let lo = lo
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad range `{s}`")))?;
    let hi = hi
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad range `{s}`")))?;
    Ok((lo, hi))
}

impl LearnOpts {
    fn params(&self) -> Result<EvalParams, Error> {
        let cfg = load_config(&self.config)?;
        let mut p = EvalParams::default();
        if let Some(seed) = self.seed.or(cfg_parse(&cfg, "seed")?) {
            p.seed = seed;
        }
        if let Some(cl) = self.cl.or(cfg_parse(&cfg, "cl")?) {
            p.c_l = cl;
        }
        if let Some(cr) = self.cr.or(cfg_parse(&cfg, "cr")?) {
            p.c_r = cr;
        }
        let kernel = self.kernel.clone().or_else(|| cfg.get("kernel").cloned());
        if let Some(k) = kernel {
            p.kernel = parse_kernel(&k)?;
        }
        let knn = self.knn.or(cfg_parse(&cfg, "knn")?);
        let graph = self.graph.clone().or_else(|| cfg.get("graph").cloned());
        p.graph = parse_graph(graph.as_deref().unwrap_or("heat"), knn)?;
        if let Some(f) = self.unlabeled_frac.or(cfg_parse(&cfg, "unlabeled_frac")?) {
            p.unlabeled_fraction = f;
        }
        if let Some(f) = self.split_frac.or(cfg_parse(&cfg, "split_frac")?) {
            p.train_fraction = f;
        }
        Ok(p)
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Error> {
    let cfg = load_config(&a.config)?;
    let viral_size = match a.viral_size.or_else(|| cfg.get("viral_size").cloned()) {
        Some(s) => parse_range(&s)?,
        None => (60, 120),
    };
    let normal_size = match a.normal_size.or_else(|| cfg.get("normal_size").cloned()) {
        Some(s) => parse_range(&s)?,
        None => (5, 40),
    };
    let sc = SynthConfig {
        seed: a.seed.or(cfg_parse(&cfg, "seed")?).unwrap_or(7),
        n_users: a.users.or(cfg_parse(&cfg, "users")?).unwrap_or(1000),
        psm_fraction: a.psm_frac.or(cfg_parse(&cfg, "psm_frac")?).unwrap_or(0.24),
        n_messages: a.messages.or(cfg_parse(&cfg, "messages")?).unwrap_or(2000),
        viral_fraction: a
            .viral_frac
            .or(cfg_parse(&cfg, "viral_frac")?)
            .unwrap_or(0.19),
        viral_size_range: viral_size,
        normal_size_range: normal_size,
        horizon: a
            .horizon
            .or(cfg_parse(&cfg, "horizon")?)
            .unwrap_or(8 * DEFAULT_DELTA),
        early_bias: a.early_bias.or(cfg_parse(&cfg, "early_bias")?).unwrap_or(6.0),
    };
    let (records, truth) = synth::generate(&sc)?;
    synth::write_action_csv(File::create(&a.out)?, &records)?;
    synth::write_truth_csv(File::create(&a.truth_out)?, &truth)?;
    println!(
        "wrote {} actions over {} messages ({} users, {} psm) to {}",
        records.len(),
        sc.n_messages,
        sc.n_users,
        sc.psm_count(),
        a.out.display()
    );
    Ok(())
}

fn cmd_extract(a: ExtractArgs) -> Result<(), Error> {
    let cfg = load_config(&a.config)?;
    let theta = a.theta.or(cfg_parse(&cfg, "theta")?).unwrap_or(100);
    let phi = a.phi.or(cfg_parse(&cfg, "phi")?).unwrap_or(0.5);
    let report = load_action_log(File::open(&a.input)?)?;
    if report.skipped > 0 {
        eprintln!("skipped {} malformed rows", report.skipped);
    }
    let index = CorpusIndex::build(&report.records, theta, phi)?;
    let t_min = report.records.iter().map(|r| r.time).min().unwrap_or(0);
    let t_max = report.records.iter().map(|r| r.time).max().unwrap_or(0);
    let t0 = a.t0.or(cfg_parse(&cfg, "t0")?).unwrap_or(t_min);
    let t = a.t.or(cfg_parse(&cfg, "t")?).unwrap_or(t_max);
    let delta = a
        .delta
        .or(cfg_parse(&cfg, "delta")?)
        .unwrap_or(DEFAULT_DELTA);
    let decay = match a.sigma.or(cfg_parse(&cfg, "sigma")?) {
        Some(s) => DecayConfig::new(t0, t, delta, s)?,
        None => DecayConfig::with_default_sigma(t0, t, delta)?,
    };
    let users = index.users();
    let features = extract_features(&index, &decay, &users)?;
    write_feature_csv(File::create(&a.out)?, &features)?;
    println!("wrote {} feature rows to {}", features.len(), a.out.display());
    Ok(())
}

fn load_examples(features: &PathBuf, truth: &PathBuf) -> Result<Vec<LabeledExample>, Error> {
    let feats = read_feature_csv(File::open(features)?)?;
    let truth = synth::read_truth_csv(File::open(truth)?)?;
    eval::join_features_with_truth(&feats, &truth)
}

fn cmd_train(a: TrainArgs) -> Result<(), Error> {
    let mut params = a.learn.params()?;
    params.train_fraction = 1.0; // train on everything; no test split here
    let examples = load_examples(&a.features, &a.truth)?;
    let split = eval::split_and_mask(&examples, &params)?;
    let model = psmdetect::lapsvm::train(
        &split.train_set,
        &params.kernel,
        &params.graph,
        params.c_l,
        params.c_r,
    )?;
    model.save(File::create(&a.model)?)?;
    println!(
        "trained on l={} labeled, u={} unlabeled; model written to {}",
        split.train_set.l(),
        split.train_set.u(),
        a.model.display()
    );
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<(), Error> {
    let model = LapSvmModel::load(File::open(&a.model)?)?;
    let feats = read_feature_csv(File::open(&a.features)?)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    writeln!(out, "user,score,label")?;
    for f in &feats {
        let (score, label) = model.predict(&f.xi);
        writeln!(
            out,
            "{},{:.16e},{}",
            f.user,
            score,
            if label > 0 { "psm" } else { "normal" }
        )?;
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), Error> {
    let params = a.learn.params()?;
    let examples = load_examples(&a.features, &a.truth)?;
    let ev = eval::evaluate(&examples, &params)?;
    let m = &ev.metrics;
    // machine-readable block
    println!("f1={:.6}", m.f1());
    println!("precision={:.6}", m.precision());
    println!("recall={:.6}", m.recall());
    println!("tp={} fp={} fn={} tn={}", m.tp, m.fp, m.fn_, m.tn);
    println!("labeled={} unlabeled={} test={}", ev.l, ev.u, ev.n_test);
    // human table
    println!();
    println!("{:<12} {:>10}", "metric", "value");
    println!("{:<12} {:>10.4}", "precision", m.precision());
    println!("{:<12} {:>10.4}", "recall", m.recall());
    println!("{:<12} {:>10.4}", "f1", m.f1());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Error> {
    let params = a.learn.params()?;
    let fractions: Vec<f64> = match &a.fractions {
        Some(s) => s
            .split(',')
            .map(|f| {
                f.trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad fraction `{f}`")))
            })
            .collect::<Result<_, _>>()?,
        None => eval::DEFAULT_SWEEP.to_vec(),
    };
    let examples = load_examples(&a.features, &a.truth)?;
    let rows = eval::sweep(&examples, &params, &fractions)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    writeln!(out, "fraction,f1")?;
    for (frac, m) in rows {
        writeln!(out, "{},{:.6}", frac, m.f1())?;
    }
    Ok(())
}
