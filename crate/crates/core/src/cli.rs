//! Command-line front end: JSON scenario configs in, CSV and JSON reports out.
//!
//! Exit codes: 0 ok, 1 output failure, 2 config error, 3 numeric divergence,
//! 4 measurement on a decohered party without `--override-theorem1`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{DecayTarget, GammaProfile, LocalChannel, LocalMapSpec};
use crate::correlations::{correlation_sample, CorrelationSettings};
use crate::dynamics::{GadScenario, MasterEqSpec, TimeOperator, Trajectory};
use crate::error::{Error, Result};
use crate::nonmarkov::{
    degree_for_measures, evaluate_measure, InitialStateLabel, InitialStateSet, Measure, NonMarkovResult, NonMarkovSettings, Scenario, TimeGrid,
};
use crate::qmath::{embed_local, pauli, ComplexMatrix, ToleranceConfig, C64};
use crate::states::{make_bell, make_ghz, make_x_state, DensityOperator, XStateParams, MAX_QUBITS};

/// Current config schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub parties: usize,
    pub initial_state: InitialStateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<LocalChannel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gad: Option<GadConfig>,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub correlations: CorrelationConfig,
    #[serde(default)]
    pub nonmarkov: NonMarkovConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateConfig {
    /// X state with parameters [c1, c2, c3, c4, c5].
    X { params: [f64; 5] },
    Bell { index: usize },
    Ghz,
    /// Density matrix rows; `imag` defaults to zero.
    Matrix {
        real: Vec<Vec<f64>>,
        #[serde(default)]
        imag: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GadConfig {
    pub epsilon: f64,
    pub eta: f64,
    pub v: f64,
    #[serde(default = "one")]
    pub rate_scale: f64,
    #[serde(default = "relax_to_one")]
    pub target: DecayTarget,
}

fn one() -> f64 {
    1.0
}

fn relax_to_one() -> DecayTarget {
    DecayTarget::One
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorMethod {
    /// Closed-form local maps sampled on the grid.
    #[default]
    Exact,
    /// RK4 on the equivalent master equation.
    Master,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default)]
    pub method: IntegratorMethod,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationConfig {
    #[serde(flatten)]
    pub settings: CorrelationSettings,
    #[serde(default = "all_measures")]
    pub emit: Vec<Measure>,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        CorrelationConfig {
            settings: CorrelationSettings::default(),
            emit: all_measures(),
        }
    }
}

fn all_measures() -> Vec<Measure> {
    Measure::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonMarkovConfig {
    #[serde(default = "total_only")]
    pub measures: Vec<Measure>,
    #[serde(default)]
    pub state_set: StateSetConfig,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

impl Default for NonMarkovConfig {
    fn default() -> Self {
        NonMarkovConfig {
            measures: total_only(),
            state_set: StateSetConfig::default(),
            floor: default_floor(),
        }
    }
}

fn total_only() -> Vec<Measure> {
    vec![Measure::T]
}

fn default_floor() -> f64 {
    ToleranceConfig::default().increment_floor
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSetConfig {
    /// Just the configured initial state.
    #[default]
    Initial,
    BellQuartet,
    /// `seed` falls back to the top-level seed.
    RandomX {
        count: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    OptimalClassical,
}

/// Parameters `sweep` may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    V,
    Epsilon,
    Eta,
    Alpha,
    Omega,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "v" => Ok(SweepParam::V),
            "epsilon" => Ok(SweepParam::Epsilon),
            "eta" => Ok(SweepParam::Eta),
            "alpha" => Ok(SweepParam::Alpha),
            "omega" => Ok(SweepParam::Omega),
            other => Err(Error::config("param", format!("unknown sweep parameter `{other}` (v, epsilon, eta, alpha, omega)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::V => "v",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Eta => "eta",
            SweepParam::Alpha => "alpha",
            SweepParam::Omega => "omega",
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::config("schema", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        if !(1..=MAX_QUBITS).contains(&self.parties) {
            return Err(Error::config("parties", format!("must lie in 1..={MAX_QUBITS}")));
        }
        match (&self.channels, &self.gad) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::config("channels", "exactly one of `channels` and `gad` must be present"));
            }
            (Some(ch), None) => {
                if ch.len() != self.parties {
                    return Err(Error::config("channels", format!("{} entries for {} parties", ch.len(), self.parties)));
                }
                for (i, c) in ch.iter().enumerate() {
                    c.validate().map_err(|e| Error::config(format!("channels[{i}]"), e.to_string()))?;
                }
            }
            (None, Some(g)) => {
                if self.parties != 2 {
                    return Err(Error::config("gad", "the fluctuating bath acts on exactly 2 parties"));
                }
                g.scenario().validate().map_err(|e| Error::config("gad", e.to_string()))?;
                if self.integrator.method == IntegratorMethod::Master {
                    return Err(Error::config("integrator.method", "`gad` always integrates its rate equations"));
                }
            }
        }
        self.initial_density().map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config("initial_state", other.to_string()),
        })?;
        if !(self.integrator.dt > 0.0 && self.integrator.dt.is_finite()) {
            return Err(Error::config("integrator.dt", "must be positive"));
        }
        if !(self.integrator.t_max >= self.integrator.dt && self.integrator.t_max.is_finite()) {
            return Err(Error::config("integrator.t_max", "must be finite and at least dt"));
        }
        if self.integrator.sample_stride == 0 {
            return Err(Error::config("integrator.sample_stride", "must be positive"));
        }
        self.correlations
            .settings
            .validate(self.parties)
            .map_err(|e| Error::config("correlations", e.to_string()))?;
        if self.correlations.emit.is_empty() {
            return Err(Error::config("correlations.emit", "empty"));
        }
        if self.nonmarkov.measures.is_empty() {
            return Err(Error::config("nonmarkov.measures", "empty"));
        }
        if !(self.nonmarkov.floor >= 0.0) {
            return Err(Error::config("nonmarkov.floor", "must be nonnegative"));
        }
        match self.nonmarkov.state_set {
            StateSetConfig::BellQuartet | StateSetConfig::RandomX { .. } | StateSetConfig::OptimalClassical if self.parties != 2 => {
                Err(Error::config("nonmarkov.state_set", "this family holds two-qubit states"))
            }
            StateSetConfig::RandomX { count: 0, .. } => Err(Error::config("nonmarkov.state_set.count", "must be positive")),
            _ => Ok(()),
        }
    }

    pub fn initial_density(&self) -> Result<DensityOperator> {
        let rho = match &self.initial_state {
            InitialStateConfig::X { params } => make_x_state(XStateParams::from_array(*params))?,
            InitialStateConfig::Bell { index } => make_bell(*index)?,
            InitialStateConfig::Ghz => make_ghz(self.parties)?,
            InitialStateConfig::Matrix { real, imag } => {
                let re = ComplexMatrix::from_real_rows(real)?;
                let m = match imag {
                    None => re,
                    Some(im) => {
                        let im = ComplexMatrix::from_real_rows(im)?;
                        if im.dim() != re.dim() {
                            return Err(Error::config("initial_state.imag", "shape differs from `real`"));
                        }
                        ComplexMatrix::from_fn(re.dim(), |i, j| C64::new(re[(i, j)].re, im[(i, j)].re))
                    }
                };
                DensityOperator::qubits(m)?
            }
        };
        if rho.n_parties() != self.parties {
            return Err(Error::config(
                "initial_state",
                format!("state has {} parties, config declares {}", rho.n_parties(), self.parties),
            ));
        }
        Ok(rho)
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            t_max: self.integrator.t_max,
            dt: self.integrator.dt,
            sample_stride: self.integrator.sample_stride,
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        if let Some(g) = &self.gad {
            return Ok(Scenario::Gad(g.scenario()));
        }
        let channels = self.channels.clone().unwrap_or_default();
        let spec = LocalMapSpec::new(channels.clone())?;
        Ok(match self.integrator.method {
            IntegratorMethod::Exact => Scenario::LocalMaps(spec),
            IntegratorMethod::Master => Scenario::Master {
                spec: master_equation_for(&channels)?,
                decohered: spec.decohered_parties(),
            },
        })
    }

    pub fn nonmarkov_settings(&self, override_theorem1: bool) -> NonMarkovSettings {
        NonMarkovSettings {
            grid: self.grid(),
            correlations: self.correlations.settings.clone(),
            floor: self.nonmarkov.floor,
            override_theorem1,
        }
    }

    pub fn state_set(&self) -> Result<InitialStateSet> {
        Ok(match self.nonmarkov.state_set {
            StateSetConfig::Initial => InitialStateSet::ExplicitList(vec![(
                InitialStateLabel {
                    description: "initial".into(),
                    x_params: match self.initial_state {
                        InitialStateConfig::X { params } => Some(XStateParams::from_array(params)),
                        _ => None,
                    },
                },
                self.initial_density()?,
            )]),
            StateSetConfig::BellQuartet => InitialStateSet::BellQuartet,
            StateSetConfig::RandomX { count, seed } => InitialStateSet::RandomXStates {
                count,
                seed: seed.unwrap_or(self.seed),
            },
            StateSetConfig::OptimalClassical => InitialStateSet::OptimalClassical,
        })
    }

    /// Copy of the config with one sweep parameter replaced.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        match param {
            SweepParam::V | SweepParam::Epsilon | SweepParam::Eta => {
                let g = cfg
                    .gad
                    .as_mut()
                    .ok_or_else(|| Error::config("param", format!("`{}` needs a `gad` block", param.name())))?;
                match param {
                    SweepParam::V => g.v = value,
                    SweepParam::Epsilon => g.epsilon = value,
                    _ => g.eta = value,
                }
            }
            SweepParam::Alpha | SweepParam::Omega => {
                let mut hit = false;
                for ch in cfg.channels.iter_mut().flatten() {
                    if let LocalChannel::Dephasing { profile } | LocalChannel::AmplitudeDamping { profile, .. } = ch {
                        if let GammaProfile::Cosine { alpha, omega, .. } = profile {
                            if param == SweepParam::Alpha {
                                *alpha = value;
                            } else {
                                *omega = value;
                            }
                            hit = true;
                        }
                    }
                }
                if !hit {
                    return Err(Error::config("param", format!("`{}` needs a cosine rate profile", param.name())));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl GadConfig {
    pub fn scenario(&self) -> GadScenario {
        GadScenario {
            rate_scale: self.rate_scale,
            target: self.target,
            ..GadScenario::new(self.epsilon, self.eta, self.v)
        }
    }
}

/// Lindblad form of a product of local channels: σ₃ jumps for dephasing,
/// the decay jump for amplitude damping, each with its own rate profile.
pub fn master_equation_for(channels: &[LocalChannel]) -> Result<MasterEqSpec> {
    let dims = vec![2; channels.len()];
    let mut spec = MasterEqSpec::new(1 << channels.len());
    for (party, ch) in channels.iter().enumerate() {
        let (op, profile) = match ch {
            LocalChannel::Identity => continue,
            LocalChannel::Dephasing { profile } => (pauli(3), profile),
            LocalChannel::AmplitudeDamping { profile, target } => (target.jump(), profile),
        };
        spec = spec.with_jump(TimeOperator::Constant(embed_local(&op, party, &dims)?), profile.clone());
    }
    Ok(spec)
}

fn fmt_num(x: f64) -> String {
    format!("{x:.8e}")
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn emitted(cfg: &ScenarioConfig) -> Vec<Measure> {
    // fixed Q, C, T column order
    Measure::ALL.into_iter().filter(|m| cfg.correlations.emit.contains(m)).collect()
}

/// Trajectory CSV: time, requested correlations, trace deviation, smallest eigenvalue.
///
/// Aborts with a divergence error when a sample leaves the state space.
pub fn simulate(cfg: &ScenarioConfig) -> Result<String> {
    let scenario = cfg.scenario()?;
    let traj = scenario.trajectory(&cfg.initial_density()?, &cfg.grid())?;
    check_rows(&traj)?;
    let measures = emitted(cfg);
    let rows: Vec<Vec<String>> = traj
        .times
        .par_iter()
        .zip(&traj.states)
        .zip(&traj.diagnostics)
        .map(|((&t, rho), d)| {
            let mut row = vec![fmt_num(t)];
            for &m in &measures {
                row.push(fmt_num(evaluate_measure(rho, m, &cfg.correlations.settings)?));
            }
            row.push(fmt_num(d.trace_deviation));
            row.push(fmt_num(d.min_eigenvalue));
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut header = vec![if cfg.gad.is_some() { "tau" } else { "t" }.to_string()];
    header.extend(measures.iter().map(|m| m.name().to_string()));
    header.extend(["trace_dev".to_string(), "min_eig".to_string()]);
    csv_text(&header, &rows)
}

fn check_rows(traj: &Trajectory) -> Result<()> {
    let tol = ToleranceConfig::default();
    for (&t, d) in traj.times.iter().zip(&traj.diagnostics) {
        if d.trace_deviation > tol.trace_tol {
            return Err(Error::IntegrationDiverged {
                t,
                reason: format!("trace deviation {:e}", d.trace_deviation),
            });
        }
        if !(d.min_eigenvalue >= -10.0 * tol.positivity_tol) {
            return Err(Error::IntegrationDiverged {
                t,
                reason: format!("state left the positive cone (eigenvalue {:e})", d.min_eigenvalue),
            });
        }
    }
    Ok(())
}

/// Q, C and T of the configured initial state.
pub fn correlations(cfg: &ScenarioConfig) -> Result<String> {
    let rho = cfg.initial_density()?;
    let s = correlation_sample(&rho, &cfg.correlations.settings, 0.0)?;
    let mut header: Vec<String> = ["Q", "C", "T", "method"].map(String::from).to_vec();
    let method = serde_json::to_value(s.method)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    let mut row = vec![fmt_num(s.q), fmt_num(s.c), fmt_num(s.total), method];
    for d in &s.optimal_directions {
        let (qt, qp) = d.quantum.angles();
        let (ct, cp) = d.classical.angles();
        for (name, v) in [("q_theta", qt), ("q_phi", qp), ("c_theta", ct), ("c_phi", cp)] {
            header.push(format!("{name}_{}", d.party));
            row.push(fmt_num(v));
        }
    }
    csv_text(&header, &[row])
}

/// Structured output of `nonmarkov`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub override_theorem1: bool,
    pub results: Vec<MeasureReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureReport {
    pub measure: Measure,
    #[serde(flatten)]
    pub result: NonMarkovResult,
}

pub fn nonmarkov(cfg: &ScenarioConfig, override_theorem1: bool) -> Result<RunReport> {
    let results = degree_for_measures(
        &cfg.scenario()?,
        &cfg.nonmarkov.measures,
        &cfg.state_set()?,
        &cfg.nonmarkov_settings(override_theorem1),
    )?;
    Ok(RunReport {
        config: cfg.clone(),
        override_theorem1,
        results: cfg
            .nonmarkov
            .measures
            .iter()
            .zip(results)
            .map(|(&measure, result)| MeasureReport { measure, result })
            .collect(),
    })
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable summary.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            let res = &r.result;
            out.push_str(&format!("N_{} >= {:.8e}\n", r.measure.name(), res.n_value));
            if let Some(best) = &res.best_initial_state {
                out.push_str(&format!("  best initial state: {}", best.description));
                if let Some(p) = best.x_params {
                    out.push_str(&format!(" {:?}", p.to_array()));
                }
                out.push('\n');
            }
            if res.rising_intervals.is_empty() {
                out.push_str("  rising intervals: none\n");
            }
            for (a, b) in &res.rising_intervals {
                out.push_str(&format!("  rising interval: [{a:.6}, {b:.6}]\n"));
            }
            let d = &res.diagnostics;
            out.push_str(&format!(
                "  max trace deviation {:.3e}, min eigenvalue {:.3e}, non-CP samples {}\n",
                d.max_trace_deviation, d.min_eigenvalue, d.non_cp_samples
            ));
            for w in &res.warnings {
                out.push_str(&format!("  warning: {w}\n"));
            }
        }
        out
    }
}

/// One row per value, in input order.
pub fn sweep(cfg: &ScenarioConfig, param: SweepParam, values: &[f64], override_theorem1: bool) -> Result<String> {
    let measures = cfg.nonmarkov.measures.clone();
    let rows: Vec<Vec<String>> = values
        .par_iter()
        .map(|&x| {
            let report = nonmarkov(&cfg.with_param(param, x)?, override_theorem1)?;
            let mut row = vec![fmt_num(x)];
            for r in &report.results {
                row.push(fmt_num(r.result.n_value));
                row.push(r.result.rising_intervals.len().to_string());
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut header = vec![param.name().to_string()];
    for m in &measures {
        header.push(format!("N_{}", m.name()));
        header.push(format!("intervals_{}", m.name()));
    }
    csv_text(&header, &rows)
}

pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::config("values", format!("`{s}` is not a number"))))
        .collect()
}

#[derive(Debug, Parser)]
#[command(name = "qnmk", version, about = "Correlation dynamics and non-Markovianity of few-qubit open systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Allow Q or C on parties that decohere.
    #[arg(long = "override-theorem1")]
    override_theorem1: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate and write the correlation trajectory as CSV.
    Simulate(Common),
    /// Q, C and T of the initial state.
    Correlations(Common),
    /// Degree of non-Markovianity (lower bound over the configured state family).
    Nonmarkov(Common),
    /// N for each value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        /// Comma-separated list; may be empty.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::IntegrationDiverged { .. } => 3,
        Error::Theorem1Violation { .. } => 4,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("QNMK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config("QNMK_THREADS", format!("`{raw}` is not a positive integer")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(c) => write_out(c.out.as_deref(), &simulate(&load(&c)?)?),
        Command::Correlations(c) => write_out(c.out.as_deref(), &correlations(&load(&c)?)?),
        Command::Nonmarkov(c) => {
            let started = Instant::now();
            let report = nonmarkov(&load(&c)?, c.override_theorem1)?;
            match c.out.as_deref() {
                Some(p) => {
                    write_out(Some(p), &report.to_json())?;
                    print!("{}", report.text());
                }
                None => print!("{}", report.text()),
            }
            eprintln!("wall time {:.3} s", started.elapsed().as_secs_f64());
            Ok(())
        }
        Command::Sweep { common, param, values } => {
            let param = SweepParam::parse(&param)?;
            let values = parse_values(&values)?;
            let cfg = load(&common)?;
            write_out(common.out.as_deref(), &sweep(&cfg, param, &values, common.override_theorem1)?)
        }
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEPHASING: &str = r#"{
        "schema": 1,
        "parties": 2,
        "initial_state": {"type": "bell", "index": 0},
        "channels": [{"type": "identity"}, {"type": "dephasing", "profile": {"kind": "constant", "gamma": 0.1}}],
        "integrator": {"dt": 0.01, "t_max": 1.0, "sample_stride": 10},
        "correlations": {"measured_parties": [0], "emit": ["Q", "T"]},
        "nonmarkov": {"measures": ["Q", "T"], "state_set": {"kind": "bell_quartet"}}
    }"#;

    #[test]
    fn parses_and_simulates() {
        let cfg = ScenarioConfig::from_json(DEPHASING).unwrap();
        let csv = simulate(&cfg).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,Q,T,trace_dev,min_eig");
        assert_eq!(lines.len(), 12);
        let q_end: f64 = lines[11].split(',').nth(1).unwrap().parse().unwrap();
        assert!((q_end - (-0.2f64).exp()).abs() < 1e-8);
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn config_errors_name_the_field() {
        let bad = DEPHASING.replace("\"dt\": 0.01", "\"dt\": \"x\"");
        match ScenarioConfig::from_json(&bad).unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "integrator.dt"),
            e => panic!("{e:?}"),
        }
        let bad = DEPHASING.replace("\"schema\": 1", "\"schema\": 7");
        assert!(matches!(ScenarioConfig::from_json(&bad), Err(Error::Config { field, .. }) if field == "schema"));
        let bad = DEPHASING.replace("\"parties\": 2", "\"parties\": 3");
        assert!(matches!(ScenarioConfig::from_json(&bad), Err(Error::Config { field, .. }) if field == "channels"));
    }

    #[test]
    fn sweep_keeps_order_and_handles_empty_lists() {
        let cfg = ScenarioConfig::from_json(DEPHASING).unwrap();
        assert!(SweepParam::parse("beta").is_err());
        assert!(sweep(&cfg, SweepParam::Alpha, &[0.1], false).is_err());
        assert_eq!(sweep(&cfg, SweepParam::V, &[], false).unwrap(), "v,N_Q,intervals_Q,N_T,intervals_T\n");
        assert_eq!(parse_values(" 1, 2.5 ,").unwrap(), vec![1.0, 2.5]);
        assert!(parse_values("1,a").is_err());
    }

    #[test]
    fn master_path_matches_exact_path() {
        let cfg = ScenarioConfig::from_json(DEPHASING).unwrap();
        let mut master = cfg.clone();
        master.integrator.method = IntegratorMethod::Master;
        let a = cfg.scenario().unwrap().trajectory(&cfg.initial_density().unwrap(), &cfg.grid()).unwrap();
        let b = master.scenario().unwrap().trajectory(&cfg.initial_density().unwrap(), &cfg.grid()).unwrap();
        assert!(a.sup_distance(&b) < 1e-9);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::config("x", "y")), 2);
        assert_eq!(exit_code(&Error::IntegrationDiverged { t: 0.0, reason: String::new() }), 3);
        assert_eq!(exit_code(&Error::Theorem1Violation { parties: vec![0] }), 4);
    }
}
