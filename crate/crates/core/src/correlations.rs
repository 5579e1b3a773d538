//! Trace-distance quantum (Q), classical (C) and total (T) correlations.
//!
//! With K(ρ, σ) = tr|ρ - σ| (no factor ½):
//!
//! * `Q(ρ) = min_M K[ρ, Mρ]`
//! * `C(ρ) = max_M K[Mρ, Mπ_ρ]`
//! * `T(ρ) = K[ρ, π_ρ]`
//!
//! where M ranges over local projective measurements on the measured parties
//! and π_ρ is the product of single-party marginals. The generic path scans a
//! (θ, φ) grid on the projective hemisphere of each measured party and then
//! polishes the best point with coordinate-wise golden-section searches.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{embed_local, pauli, trace_norm_hermitian, trace_norm_unchecked, ComplexMatrix, C64, ONE};
use crate::states::{make_x_state, marginal_product, x_params_of_matrix, BlochDirection, DensityOperator, XStateParams, MAX_QUBITS};

/// Grid points above which the scan runs in parallel.
const PARALLEL_GRID: usize = 4096;
/// Golden-section bracket width at which a line search stops.
const LINE_TOL: f64 = 1e-10;
/// Closed-form Q is abandoned below this denominator.
const DEGENERATE_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationSettings {
    /// Parties (0-based) measured by M.
    pub measured_parties: Vec<usize>,
    pub n_theta: usize,
    pub n_phi: usize,
    pub refine_tol: f64,
    pub refine_max_iter: usize,
}

impl Default for CorrelationSettings {
    fn default() -> Self {
        CorrelationSettings {
            measured_parties: vec![0],
            n_theta: 32,
            n_phi: 64,
            refine_tol: 1e-6,
            refine_max_iter: 200,
        }
    }
}

impl CorrelationSettings {
    pub fn measuring(parties: &[usize]) -> Self {
        CorrelationSettings {
            measured_parties: parties.to_vec(),
            ..Default::default()
        }
    }

    pub fn with_grid(mut self, n_theta: usize, n_phi: usize) -> Self {
        self.n_theta = n_theta;
        self.n_phi = n_phi;
        self
    }

    pub fn validate(&self, n_parties: usize) -> Result<()> {
        if self.measured_parties.is_empty() {
            return Err(Error::InvalidParameter("no measured parties".into()));
        }
        let mut seen = self.measured_parties.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.measured_parties.len() {
            return Err(Error::InvalidParameter("measured parties repeat".into()));
        }
        if let Some(&p) = self.measured_parties.iter().find(|&&p| p >= n_parties) {
            return Err(Error::InvalidParty {
                index: p,
                parties: n_parties,
            });
        }
        if self.n_theta < 8 || self.n_phi < 16 {
            return Err(Error::OutOfRange {
                what: "measurement grid",
                value: format!("{}x{}", self.n_theta, self.n_phi),
            });
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::OutOfRange {
                what: "refine_tol",
                value: self.refine_tol.to_string(),
            });
        }
        Ok(())
    }
}

/// How a sample was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    BruteForce,
    /// Closed forms for C and T, brute force for a degenerate Q.
    Fallback,
}

/// Optimal directions for one measured party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartyDirections {
    pub party: usize,
    /// Minimizer for Q.
    pub quantum: BlochDirection,
    /// Maximizer for C.
    pub classical: BlochDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSample {
    pub t: f64,
    pub q: f64,
    pub c: f64,
    pub total: f64,
    pub optimal_directions: Vec<PartyDirections>,
    pub method: Method,
}

/// Result of a measurement optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub value: f64,
    /// One canonical direction per measured party, in `measured_parties` order.
    pub directions: Vec<BlochDirection>,
}

/// tr|ρ - σ|
pub fn k_trace(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    trace_norm_hermitian(&(rho.matrix() - sigma.matrix()))
}

/// T(ρ) = K[ρ, π_ρ]
pub fn total_correlation(rho: &DensityOperator) -> Result<f64> {
    k_trace(rho, &marginal_product(rho))
}

/// Q(ρ) = min over local projective measurements of K[ρ, Mρ].
pub fn quantum_correlation(rho: &DensityOperator, s: &CorrelationSettings) -> Result<Optimized> {
    s.validate(rho.n_parties())?;
    let obj = MeasurementObjective::new(rho.matrix().clone(), rho.party_dims(), &s.measured_parties, Kind::Quantum)?;
    Ok(optimize(&obj, s, Sense::Minimize))
}

/// C(ρ) = max over local projective measurements of K[Mρ, Mπ_ρ].
pub fn classical_correlation(rho: &DensityOperator, s: &CorrelationSettings) -> Result<Optimized> {
    s.validate(rho.n_parties())?;
    let diff = rho.matrix() - marginal_product(rho).matrix();
    let obj = MeasurementObjective::new(diff, rho.party_dims(), &s.measured_parties, Kind::Classical)?;
    Ok(optimize(&obj, s, Sense::Maximize))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// ‖X - M X‖₁ with X = ρ
    Quantum,
    /// ‖M X‖₁ with X = ρ - π_ρ
    Classical,
}

struct MeasurementObjective {
    target: ComplexMatrix,
    /// Embedded (σ₁, σ₂, σ₃) for each measured party.
    paulis: Vec<[ComplexMatrix; 3]>,
    kind: Kind,
}

impl MeasurementObjective {
    fn new(target: ComplexMatrix, party_dims: &[usize], measured: &[usize], kind: Kind) -> Result<Self> {
        if party_dims.iter().any(|&d| d != 2) {
            return Err(Error::InvalidParameter("measurements are defined for qubits only".into()));
        }
        let paulis = measured
            .iter()
            .map(|&p| {
                Ok([
                    embed_local(&pauli(1), p, party_dims)?,
                    embed_local(&pauli(2), p, party_dims)?,
                    embed_local(&pauli(3), p, party_dims)?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MeasurementObjective { target, paulis, kind })
    }

    fn eval(&self, dirs: &[BlochDirection]) -> f64 {
        let mut m = self.target.clone();
        for (dir, [sx, sy, sz]) in dirs.iter().zip(&self.paulis) {
            let [x, y, z] = dir.components();
            let mut s = sx.scale_real(x);
            s.add_scaled_assign(C64::new(y, 0.0), sy);
            s.add_scaled_assign(C64::new(z, 0.0), sz);
            let sms = s.matmul(&m).matmul(&s);
            m.add_scaled_assign(ONE, &sms);
            m = m.scale_real(0.5);
        }
        match self.kind {
            Kind::Quantum => trace_norm_unchecked(&(&self.target - &m)),
            Kind::Classical => trace_norm_unchecked(&m),
        }
    }

    fn eval_angles(&self, x: &[f64]) -> f64 {
        self.eval(&angles_to_dirs(x))
    }
}

fn angles_to_dirs(x: &[f64]) -> Vec<BlochDirection> {
    x.chunks(2).map(|a| BlochDirection::from_angles(a[0], a[1])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Minimize => a < b,
            Sense::Maximize => a > b,
        }
    }
}

/// Grid points on the hemisphere θ ∈ [0, π/2], φ ∈ [0, 2π); the pole appears once.
fn hemisphere_grid(n_theta: usize, n_phi: usize) -> Vec<(f64, f64)> {
    let d_theta = FRAC_PI_2 / (n_theta - 1) as f64;
    let d_phi = 2.0 * PI / n_phi as f64;
    let mut pts = vec![(0.0, 0.0)];
    for i in 1..n_theta {
        for j in 0..n_phi {
            pts.push((i as f64 * d_theta, j as f64 * d_phi));
        }
    }
    pts
}

fn optimize(obj: &MeasurementObjective, s: &CorrelationSettings, sense: Sense) -> Optimized {
    let k = obj.paulis.len();
    let grid = hemisphere_grid(s.n_theta, s.n_phi);
    let g = grid.len();
    let total = g.pow(k as u32);
    let point = |mut idx: usize| -> Vec<f64> {
        let mut x = vec![0.0; 2 * k];
        for p in (0..k).rev() {
            let (th, ph) = grid[idx % g];
            x[2 * p] = th;
            x[2 * p + 1] = ph;
            idx /= g;
        }
        x
    };
    let values: Vec<f64> = if total > PARALLEL_GRID {
        (0..total).into_par_iter().map(|i| obj.eval_angles(&point(i))).collect()
    } else {
        (0..total).map(|i| obj.eval_angles(&point(i))).collect()
    };
    // first index wins ties, so the scan is deterministic
    let mut best_i = 0;
    for (i, &v) in values.iter().enumerate() {
        if sense.better(v, values[best_i]) {
            best_i = i;
        }
    }
    let mut x = point(best_i);
    let mut best = values[best_i];

    let steps = [FRAC_PI_2 / (s.n_theta - 1) as f64, 2.0 * PI / s.n_phi as f64];
    for _ in 0..s.refine_max_iter {
        let before = best;
        for c in 0..2 * k {
            let h = steps[c % 2];
            let (xc, vc) = golden_line(obj, &x, c, h, sense);
            if sense.better(vc, best) {
                x[c] = xc;
                best = vc;
            }
        }
        if (before - best).abs() < s.refine_tol {
            break;
        }
    }
    // coordinate searches stall on the kinks of the trace norm; a restarted
    // simplex finishes the job
    let mut scale = 0.5;
    for _ in 0..6 {
        let simplex_steps: Vec<f64> = (0..2 * k).map(|c| scale * steps[c % 2]).collect();
        let (xn, vn) = nelder_mead(obj, &x, &simplex_steps, sense);
        let gain = match sense {
            Sense::Minimize => best - vn,
            Sense::Maximize => vn - best,
        };
        if gain > 0.0 {
            x = xn;
            best = vn;
        }
        if gain <= 1e-15 {
            break;
        }
        scale *= 0.5;
    }
    Optimized {
        value: best,
        directions: angles_to_dirs(&x).iter().map(BlochDirection::canonical).collect(),
    }
}

/// Nelder-Mead from `x0` with an axis-aligned initial simplex.
fn nelder_mead(obj: &MeasurementObjective, x0: &[f64], steps: &[f64], sense: Sense) -> (Vec<f64>, f64) {
    let f = |x: &[f64]| -> f64 {
        let v = obj.eval_angles(x);
        match sense {
            Sense::Minimize => v,
            Sense::Maximize => -v,
        }
    };
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for (i, h) in steps.iter().enumerate() {
        let mut p = x0.to_vec();
        p[i] += h;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    for _ in 0..400 * n {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let diameter = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < LINE_TOL || vals[n] - vals[0] < 1e-16 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let toward = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (w - c)).collect() };
        let reflected = toward(-1.0);
        let fr = f(&reflected);
        if fr < vals[0] {
            let expanded = toward(-2.0);
            let fe = f(&expanded);
            (pts[n], vals[n]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < vals[n - 1] {
            (pts[n], vals[n]) = (reflected, fr);
        } else {
            let contracted = if fr < vals[n] { toward(-0.5) } else { toward(0.5) };
            let fc = f(&contracted);
            if fc < vals[n].min(fr) {
                (pts[n], vals[n]) = (contracted, fc);
            } else {
                for i in 1..=n {
                    pts[i] = pts[i].iter().zip(&pts[0]).map(|(p, b)| b + 0.5 * (p - b)).collect();
                    vals[i] = f(&pts[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    let v = match sense {
        Sense::Minimize => vals[best],
        Sense::Maximize => -vals[best],
    };
    (pts[best].clone(), v)
}

/// Golden-section search along coordinate `c` on [x_c - h, x_c + h].
fn golden_line(obj: &MeasurementObjective, x: &[f64], c: usize, h: f64, sense: Sense) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut probe = x.to_vec();
    let mut f = |v: f64| -> f64 {
        probe[c] = v;
        let val = obj.eval_angles(&probe);
        match sense {
            Sense::Minimize => val,
            Sense::Maximize => -val,
        }
    };
    let (mut a, mut b) = (x[c] - h, x[c] + h);
    let mut p = b - inv_phi * (b - a);
    let mut q = a + inv_phi * (b - a);
    let mut fp = f(p);
    let mut fq = f(q);
    while b - a > LINE_TOL {
        if fp < fq {
            b = q;
            q = p;
            fq = fp;
            p = b - inv_phi * (b - a);
            fp = f(p);
        } else {
            a = p;
            p = q;
            fp = fq;
            q = a + inv_phi * (b - a);
            fq = f(q);
        }
    }
    let (xm, fm) = if fp < fq { (p, fp) } else { (q, fq) };
    let val = match sense {
        Sense::Minimize => fm,
        Sense::Maximize => -fm,
    };
    (xm, val)
}

/// Closed-form trace-norm correlations of an X state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XClosedForms {
    pub q: f64,
    pub c: f64,
    pub total: f64,
    /// Set when the Q denominator vanished and Q came from the optimizer.
    pub fallback: bool,
}

/// Q, C and T of an X state with one measured qubit (0 or 1).
pub fn x_closed_forms(p: XStateParams, measured_party: usize) -> Result<XClosedForms> {
    x_closed_forms_with(p, measured_party, &CorrelationSettings::measuring(&[measured_party]))
}

pub fn x_closed_forms_with(p: XStateParams, measured_party: usize, fallback: &CorrelationSettings) -> Result<XClosedForms> {
    p.validate()?;
    let (q, c, total) = match x_formula_values(p, measured_party)? {
        (Some(q), c, t) => return Ok(XClosedForms { q, c, total: t, fallback: false }),
        (None, c, t) => (None::<f64>, c, t),
    };
    debug_assert!(q.is_none());
    let rho = make_x_state(p)?;
    let mut settings = fallback.clone();
    settings.measured_parties = vec![measured_party];
    let q = quantum_correlation(&rho, &settings)?.value;
    Ok(XClosedForms {
        q,
        c,
        total,
        fallback: true,
    })
}

/// Formula values without validation; Q is `None` when its denominator is degenerate.
pub(crate) fn x_formula_values(p: XStateParams, measured_party: usize) -> Result<(Option<f64>, f64, f64)> {
    let p = match measured_party {
        0 => p,
        1 => p.swapped(),
        _ => {
            return Err(Error::InvalidParty {
                index: measured_party,
                parties: 2,
            })
        }
    };
    let XStateParams { c1, c2, c3, c4, c5 } = p;
    let c3_eff = c3 - c4 * c5;
    let classical = c1.abs().max(c2.abs()).max(c3_eff.abs());
    let total = classical.max(0.5 * (c1.abs() + c2.abs() + c3_eff.abs()));

    let caux = (c1 * c1).max(c2 * c2);
    let daux = (c1 * c1).min(c2 * c2);
    let aaux = (c3 * c3).max(daux + c5 * c5);
    let baux = caux.min(c3 * c3);
    let denom = aaux + caux - baux - daux;
    let q = if denom <= DEGENERATE_DENOMINATOR {
        None
    } else {
        Some(((aaux * caux - baux * daux) / denom).max(0.0).sqrt())
    };
    Ok((q, classical, total))
}

/// Closed-form T of an n-qubit GHZ state whose coherence is scaled by f.
pub fn ghz_total(n: usize, f: f64) -> Result<f64> {
    if !(2..=MAX_QUBITS).contains(&n) {
        return Err(Error::OutOfRange {
            what: "GHZ qubit count",
            value: n.to_string(),
        });
    }
    if !(f >= 0.0 && f.is_finite()) {
        return Err(Error::OutOfRange {
            what: "GHZ coherence factor",
            value: f.to_string(),
        });
    }
    let base = 1.0 - 2f64.powi(1 - n as i32);
    Ok(base + base.max(f))
}

/// Q, C and T at one time point. Two-qubit X states with a single measured
/// party use the closed forms; everything else goes through the optimizer.
///
/// Operators outside the state space (non-CP transients) are accepted: the
/// measures are evaluated on the matrix as given.
pub fn correlation_sample(rho: &DensityOperator, s: &CorrelationSettings, t: f64) -> Result<CorrelationSample> {
    s.validate(rho.n_parties())?;
    let x_params = if rho.party_dims() == [2, 2] && s.measured_parties.len() == 1 {
        x_params_of_matrix(rho.matrix()).ok()
    } else {
        None
    };
    if let Some(p) = x_params {
        let party = s.measured_parties[0];
        let (q, c, total) = x_formula_values(p, party)?;
        let classical_dir = classical_axis(p, party);
        let (q, quantum_dir, method) = match q {
            Some(q) => (q, best_axis(rho, party, Kind::Quantum)?, Method::ClosedForm),
            None => {
                let opt = quantum_correlation(rho, s)?;
                (opt.value, opt.directions[0], Method::Fallback)
            }
        };
        return Ok(CorrelationSample {
            t,
            q,
            c,
            total,
            optimal_directions: vec![PartyDirections {
                party,
                quantum: quantum_dir,
                classical: classical_dir,
            }],
            method,
        });
    }

    let q = quantum_correlation(rho, s)?;
    let c = classical_correlation(rho, s)?;
    let total = trace_norm_unchecked(&(rho.matrix() - marginal_product(rho).matrix()));
    Ok(CorrelationSample {
        t,
        q: q.value,
        c: c.value,
        total,
        optimal_directions: s
            .measured_parties
            .iter()
            .zip(q.directions.iter().zip(&c.directions))
            .map(|(&party, (&quantum, &classical))| PartyDirections {
                party,
                quantum,
                classical,
            })
            .collect(),
        method: Method::BruteForce,
    })
}

/// Axis attaining max{|c1|, |c2|, |c3 - c4 c5|}.
fn classical_axis(p: XStateParams, party: usize) -> BlochDirection {
    let p = if party == 1 { p.swapped() } else { p };
    let c3_eff = p.c3 - p.c4 * p.c5;
    let v = [p.c1.abs(), p.c2.abs(), c3_eff.abs()];
    let axes = [BlochDirection::X, BlochDirection::Y, BlochDirection::Z];
    let mut best = 0;
    for i in 1..3 {
        if v[i] > v[best] {
            best = i;
        }
    }
    axes[best]
}

/// Coordinate axis minimizing the Q objective (X states are optimized on an axis).
fn best_axis(rho: &DensityOperator, party: usize, kind: Kind) -> Result<BlochDirection> {
    let obj = MeasurementObjective::new(rho.matrix().clone(), rho.party_dims(), &[party], kind)?;
    let axes = [BlochDirection::Z, BlochDirection::X, BlochDirection::Y];
    let mut best = (f64::INFINITY, BlochDirection::Z);
    for a in axes {
        let v = obj.eval(&[a]);
        if v < best.0 - 1e-14 {
            best = (v, a);
        }
    }
    Ok(best.1)
}
