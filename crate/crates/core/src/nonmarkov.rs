//! Degree of non-Markovianity as the accumulated positive variation of a
//! correlation measure along a trajectory, maximized over a declared family
//! of initial states. The maximum over a restricted family is a lower bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{dephasing_factor, theorem1_applicable, GammaProfile, LocalMapSpec};
use crate::correlations::{classical_correlation, quantum_correlation, x_formula_values, CorrelationSettings};
use crate::dynamics::{integrate_master, integrate_rate_equations, sample_local_maps, GadScenario, MasterEqSpec, Trajectory};
use crate::error::{Error, Result};
use crate::qmath::{trace_norm_unchecked, ToleranceConfig};
use crate::states::{make_bell, make_x_state, marginal_product, x_params_of_matrix, BlochDirection, DensityOperator, MeasurementSpec, XStateParams};

/// One point F(t) of a correlation time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub t: f64,
    pub value: f64,
}

/// Which correlation measure drives N_F.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    Q,
    C,
    T,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Q, Measure::C, Measure::T];

    pub fn needs_measurement(self) -> bool {
        !matches!(self, Measure::T)
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Q => "Q",
            Measure::C => "C",
            Measure::T => "T",
        }
    }
}

/// Description of an initial state in a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialStateLabel {
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_params: Option<XStateParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateValue {
    pub state: InitialStateLabel,
    pub n_value: f64,
    pub rising_intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonMarkovResult {
    pub n_value: f64,
    pub rising_intervals: Vec<(f64, f64)>,
    pub best_initial_state: Option<InitialStateLabel>,
    pub per_state_values: Vec<StateValue>,
    pub warnings: Vec<String>,
    pub diagnostics: DiagnosticsSummary,
}

/// Worst sample health over every trajectory behind a result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsSummary {
    pub max_trace_deviation: f64,
    pub min_eigenvalue: f64,
    /// Samples produced by a map outside the CPTP range.
    pub non_cp_samples: usize,
}

impl Default for DiagnosticsSummary {
    fn default() -> Self {
        DiagnosticsSummary {
            max_trace_deviation: 0.0,
            min_eigenvalue: f64::INFINITY,
            non_cp_samples: 0,
        }
    }
}

impl DiagnosticsSummary {
    pub fn of(traj: &Trajectory) -> Self {
        DiagnosticsSummary {
            max_trace_deviation: traj.max_trace_deviation(),
            min_eigenvalue: traj.min_eigenvalue(),
            non_cp_samples: traj.diagnostics.iter().filter(|d| !d.completely_positive).count(),
        }
    }

    fn merge(self, other: Self) -> Self {
        DiagnosticsSummary {
            max_trace_deviation: self.max_trace_deviation.max(other.max_trace_deviation),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
            non_cp_samples: self.non_cp_samples + other.non_cp_samples,
        }
    }
}

/// Maximal runs of consecutive increments above `floor`, as (start, end) sample times.
pub fn rising_intervals(series: &[SeriesSample], floor: f64) -> Vec<(f64, f64)> {
    rising_runs(series, floor)
        .into_iter()
        .map(|(a, b)| (series[a].t, series[b].t))
        .collect()
}

fn rising_runs(series: &[SeriesSample], floor: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for k in 1..series.len() {
        if series[k].value - series[k - 1].value > floor {
            start.get_or_insert(k - 1);
        } else if let Some(s) = start.take() {
            runs.push((s, k - 1));
        }
    }
    if let Some(s) = start {
        runs.push((s, series.len() - 1));
    }
    runs
}

/// Σ [F(end) - F(start)] over the rising intervals of a single series.
pub fn accumulate_n(series: &[SeriesSample], floor: f64) -> NonMarkovResult {
    let runs = rising_runs(series, floor);
    // + 0.0 turns the -0.0 of an empty sum into 0.0
    let n_value = runs.iter().map(|&(a, b)| series[b].value - series[a].value).sum::<f64>() + 0.0;
    NonMarkovResult {
        n_value,
        rising_intervals: runs.iter().map(|&(a, b)| (series[a].t, series[b].t)).collect(),
        best_initial_state: None,
        per_state_values: Vec::new(),
        warnings: Vec::new(),
        diagnostics: DiagnosticsSummary::default(),
    }
}

/// Family of initial states over which N is maximized.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialStateSet {
    BellQuartet,
    RandomXStates { count: usize, seed: u64 },
    /// The X state with c₁ = 1 and all other parameters zero.
    OptimalClassical,
    ExplicitList(Vec<(InitialStateLabel, DensityOperator)>),
}

impl InitialStateSet {
    pub fn members(&self) -> Result<Vec<(InitialStateLabel, DensityOperator)>> {
        let x_member = |description: String, p: XStateParams| -> Result<(InitialStateLabel, DensityOperator)> {
            Ok((
                InitialStateLabel {
                    description,
                    x_params: Some(p),
                },
                make_x_state(p)?,
            ))
        };
        match self {
            InitialStateSet::BellQuartet => (0..4)
                .map(|i| {
                    let rho = make_bell(i)?;
                    let p = x_params_of_matrix(rho.matrix())?;
                    Ok((
                        InitialStateLabel {
                            description: ["phi+", "phi-", "psi+", "psi-"][i].to_string(),
                            x_params: Some(p),
                        },
                        rho,
                    ))
                })
                .collect(),
            InitialStateSet::RandomXStates { count, seed } => {
                if *count == 0 {
                    return Err(Error::OutOfRange {
                        what: "random state count",
                        value: "0".into(),
                    });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|i| x_member(format!("random x state {i}"), XStateParams::random(&mut rng)))
                    .collect()
            }
            InitialStateSet::OptimalClassical => {
                Ok(vec![x_member("optimal classical".into(), XStateParams::new(1.0, 0.0, 0.0, 0.0, 0.0))?])
            }
            InitialStateSet::ExplicitList(states) => {
                if states.is_empty() {
                    return Err(Error::InvalidParameter("empty initial state list".into()));
                }
                Ok(states.clone())
            }
        }
    }
}

/// Time grid shared by all trajectory kinds (τ units for the fluctuating bath).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
}

fn default_stride() -> usize {
    1
}

impl TimeGrid {
    pub fn new(t_max: f64, dt: f64) -> Self {
        TimeGrid {
            t_max,
            dt,
            sample_stride: 1,
        }
    }
}

/// Open-system evolution that produces a trajectory from an initial state.
#[derive(Debug, Clone)]
pub enum Scenario {
    /// Exact product of local maps.
    LocalMaps(LocalMapSpec),
    /// RK4 master equation; `decohered` lists the parties its jumps act on.
    Master { spec: MasterEqSpec, decohered: Vec<usize> },
    /// Two-qubit fluctuating bath via Lindblad rate equations.
    Gad(GadScenario),
}

impl Scenario {
    pub fn trajectory(&self, rho0: &DensityOperator, grid: &TimeGrid) -> Result<Trajectory> {
        match self {
            Scenario::LocalMaps(spec) => {
                if spec.n_parties() != rho0.n_parties() {
                    return Err(Error::DimensionMismatch {
                        expected: spec.n_parties(),
                        got: rho0.n_parties(),
                    });
                }
                sample_local_maps(spec, rho0, grid.t_max, grid.dt, grid.sample_stride)
            }
            Scenario::Master { spec, .. } => integrate_master(spec, rho0, grid.t_max, grid.dt, grid.sample_stride),
            Scenario::Gad(sc) => integrate_rate_equations(sc, rho0, grid.t_max, grid.dt, grid.sample_stride),
        }
    }

    pub fn decohered_parties(&self) -> Vec<usize> {
        match self {
            Scenario::LocalMaps(spec) => spec.decohered_parties(),
            Scenario::Master { decohered, .. } => decohered.clone(),
            Scenario::Gad(sc) => sc.local_map_spec().decohered_parties(),
        }
    }

    /// Measured parties that also decohere.
    fn theorem1_violations(&self, measured: &[usize], n_parties: usize) -> Result<Vec<usize>> {
        let local = match self {
            Scenario::LocalMaps(spec) => Some(spec.clone()),
            Scenario::Gad(sc) => Some(sc.local_map_spec()),
            Scenario::Master { .. } => None,
        };
        match local {
            Some(spec) => {
                let dirs: Vec<_> = measured.iter().map(|&p| (p, BlochDirection::Z)).collect();
                let m = MeasurementSpec::on(n_parties, &dirs)?;
                Ok(theorem1_applicable(&spec, &m)?.violations)
            }
            None => {
                let decohered = self.decohered_parties();
                let mut v: Vec<usize> = measured.iter().copied().filter(|p| decohered.contains(p)).collect();
                v.sort_unstable();
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonMarkovSettings {
    pub grid: TimeGrid,
    pub correlations: CorrelationSettings,
    pub floor: f64,
    /// Evaluate Q or C even when a measured party decoheres.
    pub override_theorem1: bool,
}

impl NonMarkovSettings {
    pub fn new(grid: TimeGrid) -> Self {
        NonMarkovSettings {
            grid,
            correlations: CorrelationSettings::default(),
            floor: ToleranceConfig::default().increment_floor,
            override_theorem1: false,
        }
    }

    pub fn measuring(mut self, parties: &[usize]) -> Self {
        self.correlations.measured_parties = parties.to_vec();
        self
    }
}

/// F(ρ) for one operator. Operators outside the state space are accepted.
pub fn evaluate_measure(rho: &DensityOperator, measure: Measure, s: &CorrelationSettings) -> Result<f64> {
    match measure {
        Measure::T => Ok(trace_norm_unchecked(&(rho.matrix() - marginal_product(rho).matrix()))),
        _ => {
            let x = if rho.party_dims() == [2, 2] && s.measured_parties.len() == 1 {
                x_params_of_matrix(rho.matrix()).ok()
            } else {
                None
            };
            match (x, measure) {
                (Some(p), Measure::C) => Ok(x_formula_values(p, s.measured_parties[0])?.1),
                (Some(p), _) => match x_formula_values(p, s.measured_parties[0])?.0 {
                    Some(q) => Ok(q),
                    None => Ok(quantum_correlation(rho, s)?.value),
                },
                (None, Measure::C) => Ok(classical_correlation(rho, s)?.value),
                (None, _) => Ok(quantum_correlation(rho, s)?.value),
            }
        }
    }
}

/// F sampled along a trajectory.
pub fn measure_series(traj: &Trajectory, measure: Measure, s: &CorrelationSettings) -> Result<Vec<SeriesSample>> {
    traj.times
        .par_iter()
        .zip(&traj.states)
        .map(|(&t, rho)| Ok(SeriesSample { t, value: evaluate_measure(rho, measure, s)? }))
        .collect()
}

/// N_F maximized over the initial states of `states`, a lower bound on the
/// unrestricted maximum.
pub fn degree_of_nonmarkovianity(
    scenario: &Scenario,
    measure: Measure,
    states: &InitialStateSet,
    settings: &NonMarkovSettings,
) -> Result<NonMarkovResult> {
    Ok(degree_for_measures(scenario, &[measure], states, settings)?.remove(0))
}

/// Like [`degree_of_nonmarkovianity`] for several measures at once; each
/// trajectory is integrated a single time. Results follow `measures` order.
pub fn degree_for_measures(
    scenario: &Scenario,
    measures: &[Measure],
    states: &InitialStateSet,
    settings: &NonMarkovSettings,
) -> Result<Vec<NonMarkovResult>> {
    if !(settings.floor >= 0.0) {
        return Err(Error::OutOfRange {
            what: "increment floor",
            value: settings.floor.to_string(),
        });
    }
    if measures.is_empty() {
        return Err(Error::InvalidParameter("no correlation measure requested".into()));
    }
    let members = states.members()?;
    let n_parties = members[0].1.n_parties();
    let mut warnings = vec![Vec::new(); measures.len()];
    if measures.iter().any(|m| m.needs_measurement()) {
        settings.correlations.validate(n_parties)?;
        let violations = scenario.theorem1_violations(&settings.correlations.measured_parties, n_parties)?;
        if !violations.is_empty() {
            if !settings.override_theorem1 {
                return Err(Error::Theorem1Violation { parties: violations });
            }
            for (m, w) in measures.iter().zip(&mut warnings) {
                if m.needs_measurement() {
                    w.push(format!(
                        "measured parties {violations:?} decohere; N_{} is not guaranteed to vanish for divisible maps",
                        m.name()
                    ));
                }
            }
        }
    }

    // per state: one StateValue per measure, plus the non-CP sample count
    let per_state: Vec<(Vec<StateValue>, DiagnosticsSummary)> = members
        .par_iter()
        .map(|(label, rho0)| {
            let traj = scenario.trajectory(rho0, &settings.grid)?;
            let summary = DiagnosticsSummary::of(&traj);
            let values = measures
                .iter()
                .map(|&m| {
                    let r = accumulate_n(&measure_series(&traj, m, &settings.correlations)?, settings.floor);
                    Ok(StateValue {
                        state: label.clone(),
                        n_value: r.n_value,
                        rising_intervals: r.rising_intervals,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((values, summary))
        })
        .collect::<Result<_>>()?;

    let cp_warnings: Vec<String> = per_state
        .iter()
        .filter(|(_, d)| d.non_cp_samples > 0)
        .map(|(v, d)| {
            format!(
                "{}: {} samples lie where the map from 0 to t is not completely positive",
                v[0].state.description, d.non_cp_samples
            )
        })
        .collect();
    let diagnostics = per_state
        .iter()
        .fold(DiagnosticsSummary::default(), |acc, (_, d)| acc.merge(*d));

    Ok(measures
        .iter()
        .enumerate()
        .zip(warnings)
        .map(|((k, _), mut warnings)| {
            let per_state_values: Vec<StateValue> = per_state.iter().map(|(v, _)| v[k].clone()).collect();
            let mut best = 0;
            for (i, v) in per_state_values.iter().enumerate() {
                if v.n_value > per_state_values[best].n_value {
                    best = i;
                }
            }
            warnings.extend(cp_warnings.iter().cloned());
            NonMarkovResult {
                n_value: per_state_values[best].n_value,
                rising_intervals: per_state_values[best].rising_intervals.clone(),
                best_initial_state: Some(per_state_values[best].state.clone()),
                per_state_values,
                warnings,
                diagnostics,
            }
        })
        .collect())
}

/// N = -2 ∫_{γ<0} γ(t) f(t) dt for pure dephasing with factor f = exp(-2∫γ).
pub fn analytic_dephasing_n(g: &GammaProfile, t_max: f64) -> Result<f64> {
    g.validate()?;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::OutOfRange {
            what: "t_max",
            value: t_max.to_string(),
        });
    }
    let integrand = |t: f64| -2.0 * g.rate(t) * dephasing_factor(g, t);
    let n: f64 = g
        .negative_intervals(t_max)
        .into_iter()
        .map(|(a, b)| adaptive_simpson(&integrand, a, b, 1e-12))
        .sum();
    Ok(n + 0.0)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::LocalChannel;
    use crate::dynamics::GadScenario;
    use std::f64::consts::PI;

    fn series(ts: &[f64], f: impl Fn(f64) -> f64) -> Vec<SeriesSample> {
        ts.iter().map(|&t| SeriesSample { t, value: f(t) }).collect()
    }

    fn grid(n: usize, t_max: f64) -> Vec<f64> {
        (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
    }

    /// f(b) - f(a) summed over the intervals where γ < 0.
    fn exact_n(g: &GammaProfile, t_max: f64) -> f64 {
        g.negative_intervals(t_max)
            .iter()
            .map(|&(a, b)| dephasing_factor(g, b) - dephasing_factor(g, a))
            .sum()
    }

    #[test]
    fn rising_interval_examples() {
        let ts = grid(1000, 2.0 * PI);
        assert!(rising_intervals(&series(&ts, |t| -t), 1e-10).is_empty());
        assert!(rising_intervals(&series(&ts, |_| 0.3), 1e-10).is_empty());
        let r = rising_intervals(&series(&ts, |t| (-0.5 * t.sin()).exp()), 1e-10);
        assert_eq!(r.len(), 1);
        assert!((r[0].0 - PI / 2.0).abs() < 1e-2 && (r[0].1 - 1.5 * PI).abs() < 1e-2, "{r:?}");
        assert!(rising_intervals(&series(&[0.0], |t| t), 0.0).is_empty());
        assert!(rising_intervals(&[], 0.0).is_empty());
    }

    #[test]
    fn accumulate_examples() {
        let ts = grid(6284, 2.0 * PI);
        let r = accumulate_n(&series(&ts, |t| (-0.5 * t.sin()).exp()), 1e-10);
        assert!((r.n_value - 2.0 * 0.5f64.sinh()).abs() < 1e-3);
        let sum: f64 = r.rising_intervals.iter().map(|&(a, b)| (-0.5 * b.sin()).exp() - (-0.5 * a.sin()).exp()).sum();
        assert!((sum - r.n_value).abs() < 1e-12);
        assert_eq!(accumulate_n(&series(&ts, |_| 1.0), 1e-10).n_value, 0.0);
        // a run that reaches the last sample
        let r = accumulate_n(&series(&grid(10, 1.0), |t| t), 0.0);
        assert_eq!(r.rising_intervals, vec![(0.0, 1.0)]);
        assert!((r.n_value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_examples() {
        let g = GammaProfile::cosine(0.25, 1.0, 0.0);
        let one = analytic_dephasing_n(&g, 2.0 * PI).unwrap();
        assert!((one - 2.0 * 0.5f64.sinh()).abs() < 1e-8 * one);
        let two = analytic_dephasing_n(&g, 4.0 * PI).unwrap();
        assert!((two - 4.0 * 0.5f64.sinh()).abs() < 1e-8 * two);
        assert_eq!(analytic_dephasing_n(&GammaProfile::constant(0.3), 5.0).unwrap(), 0.0);
        assert!(analytic_dephasing_n(&g, 0.0).is_err());
    }

    #[test]
    fn analytic_matches_antiderivative_oracle() {
        let profiles = [
            GammaProfile::cosine(0.7, 1.3, 0.2),
            GammaProfile::cosine(0.1, 3.0, -0.05),
            GammaProfile::Piecewise {
                breakpoints: vec![0.0, 1.0, 2.5],
                values: vec![0.4, -0.3, 0.1],
            },
        ];
        for g in &profiles {
            let n = analytic_dephasing_n(g, 9.0).unwrap();
            let oracle = exact_n(g, 9.0);
            assert!((n - oracle).abs() <= 1e-8 * oracle.max(1e-300), "{g:?}: {n} vs {oracle}");
        }
    }

    fn ancilla_scenario(g: GammaProfile) -> Scenario {
        Scenario::LocalMaps(LocalMapSpec::new(vec![LocalChannel::Identity, LocalChannel::Dephasing { profile: g }]).unwrap())
    }

    #[test]
    fn bell_quartet_under_cosine_dephasing() {
        let sc = ancilla_scenario(GammaProfile::cosine(0.25, 1.0, 0.0));
        let s = NonMarkovSettings::new(TimeGrid::new(2.0 * PI, 1e-3));
        let target = 2.0 * 0.5f64.sinh();
        for m in [Measure::Q, Measure::T] {
            let r = degree_of_nonmarkovianity(&sc, m, &InitialStateSet::BellQuartet, &s).unwrap();
            assert!((r.n_value - target).abs() < 1e-3, "{m:?}: {}", r.n_value);
            assert_eq!(r.per_state_values.len(), 4);
            assert_eq!(r.rising_intervals.len(), 1);
        }
        let r = degree_of_nonmarkovianity(&sc, Measure::C, &InitialStateSet::OptimalClassical, &s).unwrap();
        assert!((r.n_value - target).abs() < 1e-3);
    }

    #[test]
    fn divisible_dephasing_gives_zero() {
        let sc = ancilla_scenario(GammaProfile::constant(0.2));
        let s = NonMarkovSettings::new(TimeGrid::new(5.0, 1e-2));
        for m in Measure::ALL {
            let r = degree_of_nonmarkovianity(&sc, m, &InitialStateSet::RandomXStates { count: 5, seed: 3 }, &s).unwrap();
            assert!(r.n_value <= 1e-10, "{m:?}: {}", r.n_value);
            assert!(r.warnings.is_empty());
        }
    }

    #[test]
    fn theorem1_gate() {
        let sc = Scenario::Gad(GadScenario::new(0.92, 0.5, 1.0));
        let mut s = NonMarkovSettings::new(TimeGrid::new(1.0, 1e-2));
        let err = degree_of_nonmarkovianity(&sc, Measure::Q, &InitialStateSet::BellQuartet, &s).unwrap_err();
        assert_eq!(err, Error::Theorem1Violation { parties: vec![0] });
        assert!(degree_of_nonmarkovianity(&sc, Measure::T, &InitialStateSet::BellQuartet, &s).is_ok());
        s.override_theorem1 = true;
        let r = degree_of_nonmarkovianity(&sc, Measure::Q, &InitialStateSet::BellQuartet, &s).unwrap();
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn random_family_is_seeded() {
        let a = InitialStateSet::RandomXStates { count: 3, seed: 9 }.members().unwrap();
        let b = InitialStateSet::RandomXStates { count: 3, seed: 9 }.members().unwrap();
        assert_eq!(a, b);
        assert!(InitialStateSet::RandomXStates { count: 0, seed: 9 }.members().is_err());
        assert!(InitialStateSet::ExplicitList(vec![]).members().is_err());
    }
}
