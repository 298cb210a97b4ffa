//! The `wicnode` command line.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure,
//! 3 failed certification.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conelab::{cone_scan, scan_to_csv, scan_to_svg, ConeError, GridAxis, ScanConfig};
use crate::densela::{LinalgError, PNorm};
use crate::expkit::{
    gen_opinion_dataset, gen_opinion_system, gen_toy_pairs, ExpError, OpinionSystem, PairDataset, SystemJson,
    ToyMode,
};
use crate::lipnet::NetError;
use crate::odeint::{contraction_monitor, fmt17, rollout, OdeError, MONITOR_STEPS};
use crate::plot::phase_portrait;
use crate::trainer::{train, TrainConfig, TrainError};
use crate::wicfield::{certify_wic, decompose, CertReport, FieldError, SamplingBox, VectorField, WicField, Weighting};

/// Self-certification sample count for trained fields.
pub const TRAIN_CERT_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
            CliError::Certification(_) => 3,
        }
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::Singular { .. } | LinalgError::IterationLimit(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Linalg(l) => l.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Linalg(l) => l.into(),
            FieldError::Net(n) => n.into(),
            FieldError::NonFiniteJacobian(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::BlowUp { .. } => CliError::Numerical(e.to_string()),
            OdeError::InvalidArgument(_) => CliError::Input(e.to_string()),
        }
    }
}

impl From<ExpError> for CliError {
    fn from(e: ExpError) -> Self {
        match e {
            ExpError::Linalg(l) => l.into(),
            ExpError::Ode(o) => o.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Field(f) => f.into(),
            TrainError::Net(n) => n.into(),
            TrainError::Ode(o) => o.into(),
            TrainError::Safety { .. } => CliError::Certification(e.to_string()),
            TrainError::NonFiniteGradient { .. } | TrainError::NonFiniteLoss { .. } => {
                CliError::Numerical(e.to_string())
            }
            TrainError::InvalidConfig(_) | TrainError::Data(_) => CliError::Input(e.to_string()),
        }
    }
}

impl From<ConeError> for CliError {
    fn from(e: ConeError) -> Self {
        match e {
            ConeError::Linalg(l) => l.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wicnode", version, about = "Contracting neural ODEs: certify, train, and explore")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sampled contraction certificate of a field or opinion system.
    Certify(CertifyArgs),
    /// Splits a field into −γ·x plus a residual map.
    Decompose(DecomposeArgs),
    /// Trains a contracting field on endpoint pairs.
    Train(TrainArgs),
    /// Rollout CSV plus a two-trajectory contraction monitor.
    Simulate(SimulateArgs),
    /// Classifies a grid of (trace, determinant) cells.
    ConeScan(ConeScanArgs),
    /// Writes datasets (and the opinion system) as JSON.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Field JSON as written by `train`.
    #[arg(long, conflicts_with = "system", required_unless_present = "system")]
    pub field: Option<PathBuf>,
    /// Opinion system JSON as written by `gen-data`.
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Sampling {
    /// Norm index (1, 2 or inf); defaults to the field's own.
    #[arg(long, value_parser = parse_p)]
    pub p: Option<PNorm>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Half-width of the sampling box around the origin.
    #[arg(long = "box", default_value_t = 10.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub sampling: Sampling,
    /// Largest sampled measure still reported as contracting.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub sampling: Sampling,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training config JSON, optionally with a `data` section.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training pairs JSON; generated from the config otherwise.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: Source,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x0: Vec<f64>,
    /// Second initial state for the contraction monitor.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x1: Option<Vec<f64>>,
    #[arg(long = "T", default_value_t = 2.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = MONITOR_STEPS)]
    pub n_steps: usize,
    #[arg(long, value_parser = parse_p)]
    pub p: Option<PNorm>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ConeScanArgs {
    /// Trace axis as start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub tau: GridAxis,
    /// Determinant axis as start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: GridAxis,
    #[arg(long, value_parser = parse_p, default_value = "1")]
    pub p: PNorm,
    /// Witness check on every n-th cell per axis.
    #[arg(long, default_value_t = 4)]
    pub stride: usize,
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Toy,
    Opinion,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: DataKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training pairs (default 20 toy, 100 opinion).
    #[arg(long)]
    pub n: Option<usize>,
    /// Opinion test pairs.
    #[arg(long, default_value_t = 50)]
    pub n_test: usize,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Toy pairs from the spiral flow or drawn independently.
    #[arg(long, default_value = "ground-truth-flow")]
    pub mode: ToyModeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToyModeArg {
    GroundTruthFlow,
    RandomPairs,
}

impl From<ToyModeArg> for ToyMode {
    fn from(m: ToyModeArg) -> Self {
        match m {
            ToyModeArg::GroundTruthFlow => ToyMode::GroundTruthFlow,
            ToyModeArg::RandomPairs => ToyMode::RandomPairs,
        }
    }
}

fn parse_p(s: &str) -> Result<PNorm, String> {
    s.parse::<PNorm>().map_err(|e| e.to_string())
}

/// Where `train` gets its pairs when `--data` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Toy {
        #[serde(default = "default_toy_n")]
        n: usize,
        #[serde(default = "default_toy_mode")]
        mode: ToyMode,
    },
    Opinion {
        #[serde(default = "default_opinion_train")]
        n_train: usize,
        #[serde(default = "default_opinion_test")]
        n_test: usize,
    },
}

fn default_toy_n() -> usize {
    20
}
fn default_toy_mode() -> ToyMode {
    ToyMode::GroundTruthFlow
}
fn default_opinion_train() -> usize {
    100
}
fn default_opinion_test() -> usize {
    50
}

/// Contents of the `--config` file for `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    #[serde(default)]
    pub data: Option<DataSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub wall_time_s: f64,
    pub exit_code: i32,
}

struct Outputs {
    files: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, path: &Path, contents: &str) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
        }
        fs::write(path, contents).map_err(|source| CliError::Io { path: path.into(), source })?;
        self.files.push(path.to_path_buf());
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

enum Loaded {
    Field(WicField),
    System(OpinionSystem),
}

impl Loaded {
    fn load(src: &Source) -> Result<Self, CliError> {
        match (&src.field, &src.system) {
            (Some(f), _) => Ok(Loaded::Field(WicField::from_json_str(&read(f)?)?)),
            (None, Some(s)) => {
                let j: SystemJson = serde_json::from_str(&read(s)?).map_err(|e| CliError::Input(e.to_string()))?;
                Ok(Loaded::System(OpinionSystem::from_json(&j)?))
            }
            (None, None) => Err(CliError::Usage("one of --field or --system is required".into())),
        }
    }

    fn field(&self) -> &(dyn VectorField + Sync) {
        match self {
            Loaded::Field(f) => f,
            Loaded::System(s) => s,
        }
    }

    fn default_p(&self) -> PNorm {
        match self {
            Loaded::Field(f) => f.p(),
            Loaded::System(_) => PNorm::Inf,
        }
    }

    fn weight(&self) -> Option<crate::densela::DenseMatrix> {
        match self {
            Loaded::Field(f) if !matches!(f.weighting(), Weighting::Identity) => Some(f.weight_matrix()),
            _ => None,
        }
    }
}

#[derive(Debug, Serialize)]
struct CertifyOutput<'a> {
    #[serde(flatten)]
    report: &'a CertReport,
    radius: f64,
    tol: f64,
    contracting: bool,
}

fn cmd_certify(a: &CertifyArgs, out: &mut Outputs) -> Result<(), CliError> {
    let src = Loaded::load(&a.source)?;
    let p = a.sampling.p.unwrap_or(src.default_p());
    let w = src.weight();
    let report = certify_wic(src.field(), p, w.as_ref(), SamplingBox::new(a.sampling.radius), a.sampling.samples, a.sampling.seed)?;
    let contracting = report.contracting(a.tol);
    let text = json(&CertifyOutput { report: &report, radius: a.sampling.radius, tol: a.tol, contracting });
    print!("{text}");
    if let Some(dir) = &a.out {
        out.write(&dir.join("certificate.json"), &text)?;
    }
    if !contracting {
        return Err(CliError::Certification(format!("max sampled μ = {:e} > {:e}", report.max_mu, a.tol)));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct DecomposeOutput {
    gamma: f64,
    max_residual_norm: f64,
    p: PNorm,
    n_samples: usize,
    radius: f64,
    kind: &'static str,
}

fn cmd_decompose(a: &DecomposeArgs, out: &mut Outputs) -> Result<(), CliError> {
    let src = Loaded::load(&a.source)?;
    let p = a.sampling.p.unwrap_or(src.default_p());
    if a.sampling.samples == 0 {
        return Err(CliError::Input("--samples must be at least 1".into()));
    }
    let d = decompose(src.field(), p, SamplingBox::new(a.sampling.radius), a.sampling.samples, a.sampling.seed)?;
    let text = json(&DecomposeOutput {
        gamma: d.gamma,
        max_residual_norm: d.max_residual_norm,
        p,
        n_samples: d.n_samples,
        radius: a.sampling.radius,
        kind: "sampled decomposition",
    });
    print!("{text}");
    if let Some(dir) = &a.out {
        out.write(&dir.join("decomposition.json"), &text)?;
    }
    Ok(())
}

fn load_pairs(path: &Path) -> Result<PairDataset, CliError> {
    Ok(PairDataset::from_json_str(&read(path)?)?)
}

fn cmd_train(a: &TrainArgs, out: &mut Outputs) -> Result<u64, CliError> {
    let mut rc: RunConfig = serde_json::from_str(&read(&a.config)?).map_err(|e| CliError::Input(format!("config: {e}")))?;
    if let Some(s) = a.seed {
        rc.train.seed = s;
    }
    let cfg = rc.train;
    cfg.validate()?;
    let (train_set, test_set) = match (&a.data, rc.data) {
        (Some(d), _) => (load_pairs(d)?, a.test.as_deref().map(load_pairs).transpose()?),
        (None, Some(DataSpec::Opinion { n_train, n_test })) => {
            let sys = gen_opinion_system(cfg.seed);
            let (tr, te) = gen_opinion_dataset(&sys, n_train, n_test, cfg.horizon, cfg.seed)?;
            out.write(&a.out.join("system.json"), &json(&sys.to_json()))?;
            (tr, Some(te))
        }
        (None, spec) => {
            let (n, mode) = match spec {
                Some(DataSpec::Toy { n, mode }) => (n, mode),
                _ => (default_toy_n(), default_toy_mode()),
            };
            (gen_toy_pairs(cfg.seed, n, mode, cfg.horizon)?, None)
        }
    };
    if (train_set.horizon - cfg.horizon).abs() > 1e-12 {
        return Err(CliError::Input(format!("dataset T = {} but config T = {}", train_set.horizon, cfg.horizon)));
    }
    out.write(&a.out.join("train_data.json"), &train_set.to_json_string())?;
    if let Some(t) = &test_set {
        out.write(&a.out.join("test_data.json"), &t.to_json_string())?;
    }

    let history = train(&cfg, &train_set, test_set.as_ref())?;
    out.write(&a.out.join("history.csv"), &history.to_csv())?;
    out.write(&a.out.join("field.json"), &history.field.to_json_string())?;

    let pairs: Vec<(Vec<f64>, Vec<f64>)> =
        train_set.pairs.iter().map(|(x0, xt)| (x0.to_vec(), xt.to_vec())).collect();
    let starts: Vec<Vec<f64>> = if train_set.dim() == 2 {
        let r = pairs.iter().flat_map(|(a, _)| a.iter().map(|v| v.abs())).fold(1.0, f64::max);
        (0..=6).flat_map(|i| (0..=6).map(move |j| (i, j))).filter(|&(i, j)| i == 0 || j == 0 || i == 6 || j == 6)
            .map(|(i, j)| vec![-r + 2.0 * r * i as f64 / 6.0, -r + 2.0 * r * j as f64 / 6.0])
            .collect()
    } else {
        pairs.iter().map(|p| p.0.clone()).collect()
    };
    let svg = phase_portrait(&history.field, &starts, 3.0 * cfg.horizon, MONITOR_STEPS, &pairs);
    out.write(&a.out.join("portrait.svg"), &svg)?;

    let report = history.field.certify(SamplingBox::new(cfg.safety_box), TRAIN_CERT_SAMPLES, cfg.seed)?;
    let bound = -cfg.epsilon + crate::trainer::SAFETY_TOL;
    let contracting = report.contracting(bound);
    out.write(
        &a.out.join("certificate.json"),
        &json(&CertifyOutput { report: &report, radius: cfg.safety_box, tol: bound, contracting }),
    )?;
    println!(
        "train loss {:.6e} -> {:.6e}; test loss {}; max sampled μ = {:.3e}",
        history.initial_train_loss().unwrap_or(f64::NAN),
        history.final_train_loss().unwrap_or(f64::NAN),
        match (history.initial_test_loss(), history.final_test_loss()) {
            (Some(a), Some(b)) => format!("{a:.6e} -> {b:.6e}"),
            _ => "n/a".into(),
        },
        report.max_mu
    );
    if !contracting {
        return Err(CliError::Certification(format!("trained field: μ = {:e} > {:e}", report.max_mu, bound)));
    }
    Ok(cfg.seed)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut Outputs) -> Result<(), CliError> {
    let src = Loaded::load(&a.source)?;
    let f = src.field();
    if a.x0.len() != f.dim() {
        return Err(CliError::Input(format!("--x0 has {} entries, field dimension is {}", a.x0.len(), f.dim())));
    }
    let traj = rollout(f, &a.x0, a.horizon, a.n_steps)?;
    out.write(&a.out.join("trajectory.csv"), &traj.to_csv())?;
    if let Some(x1) = &a.x1 {
        if x1.len() != f.dim() {
            return Err(CliError::Input(format!("--x1 has {} entries, field dimension is {}", x1.len(), f.dim())));
        }
        let w = src.weight();
        let p = a.p.unwrap_or(src.default_p());
        let d = contraction_monitor(f, &a.x0, x1, p, w.as_ref(), a.horizon, a.n_steps)?;
        let mut csv = String::from("t,distance\n");
        for (k, v) in d.iter().enumerate() {
            csv.push_str(&format!("{},{}\n", fmt17(traj.times()[k]), fmt17(*v)));
        }
        out.write(&a.out.join("monitor.csv"), &csv)?;
        let worst = d.windows(2).map(|w| w[1] / w[0]).filter(|r| r.is_finite()).fold(0.0, f64::max);
        println!("distance {:.6e} -> {:.6e}; largest step ratio {worst:.12}", d[0], d[d.len() - 1]);
    }
    Ok(())
}

fn cmd_cone_scan(a: &ConeScanArgs, out: &mut Outputs) -> Result<(), CliError> {
    let cfg = ScanConfig { tau: a.tau, delta: a.delta, p: a.p, stride: a.stride, search_budget: a.budget, seed: a.seed };
    let cells = cone_scan(&cfg)?;
    out.write(&a.out, &scan_to_csv(&cells))?;
    if let Some(svg) = &a.svg {
        out.write(svg, &scan_to_svg(&cells, &cfg))?;
    }
    let checked: Vec<bool> = cells.iter().filter_map(|c| c.agrees).collect();
    let agree = checked.iter().filter(|a| **a).count();
    println!("{} cells; witness checks agree on {agree}/{}", cells.len(), checked.len());
    if agree != checked.len() {
        return Err(CliError::Certification(format!("{} disagreeing cells", checked.len() - agree)));
    }
    Ok(())
}

fn cmd_gen_data(a: &GenDataArgs, out: &mut Outputs) -> Result<(), CliError> {
    match a.kind {
        DataKind::Toy => {
            let ds = gen_toy_pairs(a.seed, a.n.unwrap_or(20), a.mode.into(), a.horizon.unwrap_or(1.0))?;
            out.write(&a.out.join("train.json"), &ds.to_json_string())?;
        }
        DataKind::Opinion => {
            let sys = gen_opinion_system(a.seed);
            let (tr, te) = gen_opinion_dataset(&sys, a.n.unwrap_or(100), a.n_test, a.horizon.unwrap_or(2.0), a.seed)?;
            out.write(&a.out.join("system.json"), &json(&sys.to_json()))?;
            out.write(&a.out.join("train.json"), &tr.to_json_string())?;
            out.write(&a.out.join("test.json"), &te.to_json_string())?;
        }
    }
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("WICNODE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Runs the parsed command and returns its exit code, writing a manifest
/// whenever an output location was given.
pub fn execute(cli: &Cli, args: Vec<String>) -> i32 {
    configure_threads();
    let start = Instant::now();
    let mut outputs = Outputs { files: Vec::new() };
    let (name, manifest_path, config, mut seed) = match &cli.command {
        Command::Certify(a) => ("certify", a.out.as_ref().map(|d| d.join("manifest.json")), None, a.sampling.seed),
        Command::Decompose(a) => ("decompose", a.out.as_ref().map(|d| d.join("manifest.json")), None, a.sampling.seed),
        Command::Train(a) => ("train", Some(a.out.join("manifest.json")), Some(a.config.clone()), a.seed.unwrap_or(0)),
        Command::Simulate(a) => ("simulate", Some(a.out.join("manifest.json")), None, a.seed),
        Command::ConeScan(a) => {
            let mut m = a.out.clone().into_os_string();
            m.push(".manifest.json");
            ("cone-scan", Some(PathBuf::from(m)), None, a.seed)
        }
        Command::GenData(a) => ("gen-data", Some(a.out.join("manifest.json")), None, a.seed),
    };
    let result = match &cli.command {
        Command::Certify(a) => cmd_certify(a, &mut outputs),
        Command::Decompose(a) => cmd_decompose(a, &mut outputs),
        Command::Train(a) => cmd_train(a, &mut outputs).map(|s| seed = s),
        Command::Simulate(a) => cmd_simulate(a, &mut outputs),
        Command::ConeScan(a) => cmd_cone_scan(a, &mut outputs),
        Command::GenData(a) => cmd_gen_data(a, &mut outputs),
    };
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("wicnode {name}: {e}");
            e.exit_code()
        }
    };
    if let Some(path) = manifest_path {
        let out = match &cli.command {
            Command::ConeScan(a) => a.out.clone(),
            _ => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        let manifest = RunManifest {
            command: name.into(),
            args,
            config,
            seed,
            out,
            outputs: outputs.files.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time_s: start.elapsed().as_secs_f64(),
            exit_code: code,
        };
        if let Err(e) = outputs.write(&path, &json(&manifest)) {
            eprintln!("wicnode {name}: {e}");
            return if code == 0 { 1 } else { code };
        }
    }
    code
}

/// Parses `argv` (program name first) and runs it.
pub fn run<I: IntoIterator<Item = OsString>>(argv: I) -> i32 {
    let argv: Vec<OsString> = argv.into_iter().collect();
    match Cli::try_parse_from(&argv) {
        Ok(cli) => execute(&cli, argv.iter().map(|a| a.to_string_lossy().into_owned()).collect()),
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
