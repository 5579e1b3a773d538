//! Fixed-step RK4 integration of time-local master equations and of the
//! Lindblad rate equations for a bath with two configurational states.

use std::fmt;
use std::sync::Arc;

use crate::channels::{apply_local_maps, DecayTarget, GammaProfile, LocalChannel, LocalMapSpec};
use crate::error::{Error, Result};
use crate::qmath::{embed_local, hermitian_eigenvalues, ComplexMatrix, ToleranceConfig, C64, I, ONE};
use crate::states::{qubit_count, DensityOperator};

/// An operator that may depend on time.
#[derive(Clone)]
pub enum TimeOperator {
    Constant(ComplexMatrix),
    Function(Arc<dyn Fn(f64) -> ComplexMatrix + Send + Sync>),
}

impl TimeOperator {
    pub fn at(&self, t: f64) -> ComplexMatrix {
        match self {
            TimeOperator::Constant(m) => m.clone(),
            TimeOperator::Function(f) => f(t),
        }
    }
}

impl fmt::Debug for TimeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeOperator::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            TimeOperator::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct JumpTerm {
    pub operator: TimeOperator,
    pub rate: GammaProfile,
}

/// dρ/dt = -i[H(t), ρ] + Σᵢ γᵢ(t) (AᵢρAᵢ† - ½{Aᵢ†Aᵢ, ρ})
#[derive(Debug, Clone)]
pub struct MasterEqSpec {
    pub dim: usize,
    pub hamiltonian: TimeOperator,
    pub jumps: Vec<JumpTerm>,
}

impl MasterEqSpec {
    pub fn new(dim: usize) -> Self {
        MasterEqSpec {
            dim,
            hamiltonian: TimeOperator::Constant(ComplexMatrix::zeros(dim)),
            jumps: Vec::new(),
        }
    }

    pub fn with_hamiltonian(mut self, h: TimeOperator) -> Self {
        self.hamiltonian = h;
        self
    }

    pub fn with_jump(mut self, operator: TimeOperator, rate: GammaProfile) -> Self {
        self.jumps.push(JumpTerm { operator, rate });
        self
    }

    /// A = σ₃ on each listed party with its own rate profile.
    pub fn local_dephasing(n_qubits: usize, profiles: &[(usize, GammaProfile)]) -> Result<Self> {
        let dims = vec![2; n_qubits];
        let mut spec = Self::new(1 << n_qubits);
        for (party, g) in profiles {
            let a = embed_local(&crate::qmath::pauli(3), *party, &dims)?;
            spec = spec.with_jump(TimeOperator::Constant(a), g.clone());
        }
        Ok(spec)
    }

    /// Amplitude damping on every qubit at the same rate.
    pub fn local_amplitude_damping(n_qubits: usize, rate: GammaProfile, target: DecayTarget) -> Result<Self> {
        let dims = vec![2; n_qubits];
        let mut spec = Self::new(1 << n_qubits);
        for party in 0..n_qubits {
            let a = embed_local(&target.jump(), party, &dims)?;
            spec = spec.with_jump(TimeOperator::Constant(a), rate.clone());
        }
        Ok(spec)
    }

    /// Checks operator dimensions and Hermiticity of H at `t`.
    pub fn validate_at(&self, t: f64) -> Result<()> {
        let h = self.hamiltonian.at(t);
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: h.dim(),
            });
        }
        let deviation = h.hermiticity_deviation();
        if deviation > ToleranceConfig::default().hermiticity_tol {
            return Err(Error::HermiticityViolated { deviation });
        }
        for j in &self.jumps {
            let a = j.operator.at(t);
            if a.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: a.dim(),
                });
            }
            j.rate.validate()?;
        }
        Ok(())
    }

    fn apply_unchecked(&self, t: f64, rho: &ComplexMatrix) -> ComplexMatrix {
        let h = self.hamiltonian.at(t);
        let mut out = h.commutator(rho).scale(-I);
        for j in &self.jumps {
            let gamma = j.rate.rate(t);
            if gamma == 0.0 {
                continue;
            }
            let a = j.operator.at(t);
            out.add_scaled_assign(C64::new(gamma, 0.0), &lindblad_term(&a, rho));
        }
        out
    }
}

/// AρA† - ½{A†A, ρ}
fn lindblad_term(a: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let ad = a.adjoint();
    let ada = ad.matmul(a);
    let mut out = a.matmul(rho).matmul(&ad);
    out.add_scaled_assign(C64::new(-0.5, 0.0), &ada.anticommutator(rho));
    out
}

/// Evaluates the generator 𝓛_t ρ. Negative rates are used as given.
pub fn lindblad_generator_apply(spec: &MasterEqSpec, t: f64, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho.dim() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            got: rho.dim(),
        });
    }
    spec.validate_at(t)?;
    Ok(spec.apply_unchecked(t, rho))
}

/// Unit-rate amplitude-damping dissipator on one qubit, decaying toward |0>.
pub fn ad_dissipator(rho: &ComplexMatrix, party: usize) -> Result<ComplexMatrix> {
    ad_dissipator_towards(rho, party, DecayTarget::Zero)
}

pub fn ad_dissipator_towards(rho: &ComplexMatrix, party: usize, target: DecayTarget) -> Result<ComplexMatrix> {
    let n = qubit_count(rho.dim())?;
    let j = embed_local(&target.jump(), party, &vec![2; n])?;
    Ok(lindblad_term(&j, rho))
}

/// Per-sample health record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDiagnostics {
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
    /// False for samples produced by a map outside the CPTP range.
    pub completely_positive: bool,
}

impl SampleDiagnostics {
    fn of(m: &ComplexMatrix, completely_positive: bool) -> Self {
        let tr = m.trace();
        SampleDiagnostics {
            trace_deviation: ((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt(),
            min_eigenvalue: hermitian_eigenvalues(&m.hermitian_part()).map(|v| v[0]).unwrap_or(f64::NAN),
            completely_positive,
        }
    }
}

/// Sampled evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityOperator>,
    /// (ρ₁, ρ₂) per sample for rate-equation runs.
    pub auxiliary: Option<Vec<[ComplexMatrix; 2]>>,
    pub diagnostics: Vec<SampleDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_trace_deviation(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.trace_deviation).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// Configurational probabilities P_R = tr ρ_R per sample.
    pub fn config_probabilities(&self) -> Option<Vec<(f64, f64)>> {
        self.auxiliary
            .as_ref()
            .map(|aux| aux.iter().map(|[a, b]| (a.trace().re, b.trace().re)).collect())
    }

    /// Largest entrywise difference between two trajectories sampled on the same grid.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.len(), other.len(), "trajectories sampled on different grids");
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.matrix().max_abs_diff(b.matrix()))
            .fold(0.0, f64::max)
    }
}

/// Step plan shared by the integrators: the final step is shortened so that
/// the last sample lands exactly on `t_max`.
struct StepPlan {
    dt: f64,
    t_max: f64,
    n_steps: usize,
    stride: usize,
}

impl StepPlan {
    fn new(t_max: f64, dt: f64, stride: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::OutOfRange {
                what: "dt",
                value: dt.to_string(),
            });
        }
        if !(t_max >= dt && t_max.is_finite()) {
            return Err(Error::OutOfRange {
                what: "t_max",
                value: t_max.to_string(),
            });
        }
        if stride == 0 {
            return Err(Error::OutOfRange {
                what: "sample_stride",
                value: "0".into(),
            });
        }
        let n_steps = ((t_max / dt) - 1e-9).ceil().max(1.0) as usize;
        Ok(StepPlan {
            dt,
            t_max,
            n_steps,
            stride,
        })
    }

    fn time(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.t_max
        } else {
            k as f64 * self.dt
        }
    }

    fn is_sample(&self, k: usize) -> bool {
        k.is_multiple_of(self.stride) || k == self.n_steps
    }
}

/// Classical RK4 on a tuple of matrices.
fn rk4_step<F>(f: &F, t: f64, h: f64, y: &[ComplexMatrix]) -> Vec<ComplexMatrix>
where
    F: Fn(f64, &[ComplexMatrix]) -> Vec<ComplexMatrix>,
{
    let axpy = |y: &[ComplexMatrix], k: &[ComplexMatrix], s: f64| -> Vec<ComplexMatrix> {
        y.iter()
            .zip(k)
            .map(|(a, b)| {
                let mut out = a.clone();
                out.add_scaled_assign(C64::new(s, 0.0), b);
                out
            })
            .collect()
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &axpy(y, &k2, 0.5 * h));
    let k4 = f(t + h, &axpy(y, &k3, h));
    y.iter()
        .enumerate()
        .map(|(i, a)| {
            let mut out = a.clone();
            for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
                out.add_scaled_assign(C64::new(w * h / 6.0, 0.0), &k[i]);
            }
            out
        })
        .collect()
}

fn check_sample(t: f64, d: &SampleDiagnostics, tol: &ToleranceConfig) -> Result<()> {
    if !(d.trace_deviation <= tol.trace_tol) {
        return Err(Error::IntegrationDiverged {
            t,
            reason: format!("trace drift {:e}", d.trace_deviation),
        });
    }
    if !(d.min_eigenvalue >= -10.0 * tol.positivity_tol) {
        return Err(Error::IntegrationDiverged {
            t,
            reason: format!("min eigenvalue {:e}", d.min_eigenvalue),
        });
    }
    Ok(())
}

/// Integrates the master equation from ρ0 with fixed-step RK4. No
/// renormalization is applied; the run aborts when the trace drifts past
/// `trace_tol` or an eigenvalue drops below `-10·positivity_tol`.
pub fn integrate_master(
    spec: &MasterEqSpec,
    rho0: &DensityOperator,
    t_max: f64,
    dt: f64,
    sample_stride: usize,
) -> Result<Trajectory> {
    let plan = StepPlan::new(t_max, dt, sample_stride)?;
    if rho0.dim() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            got: rho0.dim(),
        });
    }
    spec.validate_at(0.0)?;
    let tol = ToleranceConfig::default();
    let rhs = |t: f64, y: &[ComplexMatrix]| vec![spec.apply_unchecked(t, &y[0])];

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        auxiliary: None,
        diagnostics: Vec::new(),
    };
    let mut y = vec![rho0.matrix().clone()];
    for k in 0..=plan.n_steps {
        let t = plan.time(k);
        if plan.is_sample(k) {
            spec.validate_at(t)?;
            let d = SampleDiagnostics::of(&y[0], true);
            check_sample(t, &d, &tol)?;
            traj.times.push(t);
            traj.states.push(rho0.with_matrix(y[0].clone()));
            traj.diagnostics.push(d);
        }
        if k < plan.n_steps {
            let h = plan.time(k + 1) - t;
            y = rk4_step(&rhs, t, h, &y);
        }
    }
    Ok(traj)
}

/// Two-configuration fluctuating bath acting on two qubits.
///
/// Rates follow from the dimensionless parameters: γ̄₁ = ε·s, γ̄₂ = (1-ε)·s,
/// φ₁₂ = η·v·s, φ₂₁ = (1-η)·v·s with s = `rate_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct GadScenario {
    pub epsilon: f64,
    pub eta: f64,
    pub v: f64,
    pub rate_scale: f64,
    /// H₁, H₂ (zero when `None`).
    pub hamiltonians: Option<[ComplexMatrix; 2]>,
    /// (P₁(0), P₂(0)); defaults to the stationary pair (η, 1-η).
    pub initial_config_probs: Option<(f64, f64)>,
    /// Pole the qubits relax to. Defaults to |1⟩, the σ₃ = -1 level, so that
    /// σ₃ = +1 plays the excited state.
    pub target: DecayTarget,
}

impl GadScenario {
    pub fn new(epsilon: f64, eta: f64, v: f64) -> Self {
        GadScenario {
            epsilon,
            eta,
            v,
            rate_scale: 1.0,
            hamiltonians: None,
            initial_config_probs: None,
            target: DecayTarget::One,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let range = |what: &'static str, v: f64, ok: bool| -> Result<()> {
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(Error::OutOfRange {
                    what,
                    value: v.to_string(),
                })
            }
        };
        range("epsilon", self.epsilon, (0.0..=1.0).contains(&self.epsilon))?;
        range("eta", self.eta, (0.0..=1.0).contains(&self.eta))?;
        range("v", self.v, self.v >= 0.0)?;
        range("rate_scale", self.rate_scale, self.rate_scale > 0.0)?;
        let (p1, p2) = self.initial_probs();
        range("initial_config_probs", p1, p1 >= 0.0 && p2 >= 0.0 && ((p1 + p2) - 1.0).abs() <= 1e-12)?;
        if let Some(hs) = &self.hamiltonians {
            for h in hs {
                if h.dim() != 4 {
                    return Err(Error::DimensionMismatch { expected: 4, got: h.dim() });
                }
                let deviation = h.hermiticity_deviation();
                if deviation > ToleranceConfig::default().hermiticity_tol {
                    return Err(Error::HermiticityViolated { deviation });
                }
            }
        }
        Ok(())
    }

    /// (γ̄₁, γ̄₂)
    pub fn decay_rates(&self) -> (f64, f64) {
        (self.epsilon * self.rate_scale, (1.0 - self.epsilon) * self.rate_scale)
    }

    /// (φ₁₂, φ₂₁)
    pub fn switching_rates(&self) -> (f64, f64) {
        (
            self.eta * self.v * self.rate_scale,
            (1.0 - self.eta) * self.v * self.rate_scale,
        )
    }

    pub fn initial_probs(&self) -> (f64, f64) {
        self.initial_config_probs.unwrap_or((self.eta, 1.0 - self.eta))
    }

    /// ηγ̄₁ + (1-η)γ̄₂, the decay rate seen in the fast-fluctuation limit.
    pub fn averaged_rate(&self) -> f64 {
        let (g1, g2) = self.decay_rates();
        self.eta * g1 + (1.0 - self.eta) * g2
    }

    /// Both qubits decohere; the per-party channel records the averaged rate
    /// (in τ units) and is used to classify which parties are decohered.
    pub fn local_map_spec(&self) -> LocalMapSpec {
        let channel = LocalChannel::AmplitudeDamping {
            profile: GammaProfile::constant(self.averaged_rate() / self.rate_scale),
            target: self.target,
        };
        LocalMapSpec {
            channels: vec![channel.clone(), channel],
        }
    }
}

/// Precomputed J, J†J for one embedded jump.
struct Dissipator {
    j: ComplexMatrix,
    jd: ComplexMatrix,
    jdj: ComplexMatrix,
}

impl Dissipator {
    fn new(j: ComplexMatrix) -> Self {
        let jd = j.adjoint();
        let jdj = jd.matmul(&j);
        Dissipator { j, jd, jdj }
    }

    fn add_to(&self, out: &mut ComplexMatrix, rate: f64, rho: &ComplexMatrix) {
        out.add_scaled_assign(C64::new(rate, 0.0), &self.j.matmul(rho).matmul(&self.jd));
        out.add_scaled_assign(C64::new(-0.5 * rate, 0.0), &self.jdj.anticommutator(rho));
    }
}

/// Evolves (ρ₁, ρ₂) with
///
/// dρ₁/dτ = -i[H₁,ρ₁] + γ̄₁(𝓛^A + 𝓛^B)ρ₁ - φ₂₁ρ₁ + φ₁₂ρ₂
/// dρ₂/dτ = -i[H₂,ρ₂] + γ̄₂(𝓛^A + 𝓛^B)ρ₂ - φ₁₂ρ₂ + φ₂₁ρ₁
///
/// in units of τ = rate_scale·t (so `t_max` and `dt` are τ values), starting
/// from ρ_R(0) = P_R(0)·ρ0. Returns ρ = ρ₁ + ρ₂ per sample.
pub fn integrate_rate_equations(
    sc: &GadScenario,
    rho0: &DensityOperator,
    t_max: f64,
    dt: f64,
    sample_stride: usize,
) -> Result<Trajectory> {
    sc.validate()?;
    if rho0.party_dims() != [2, 2] {
        return Err(Error::BadFactorization {
            party_dims: rho0.party_dims().to_vec(),
            dim: rho0.dim(),
        });
    }
    let plan = StepPlan::new(t_max, dt, sample_stride)?;
    let tol = ToleranceConfig::default();

    let s = sc.rate_scale;
    let (g1, g2) = sc.decay_rates();
    let (phi12, phi21) = sc.switching_rates();
    let (g1, g2, phi12, phi21) = (g1 / s, g2 / s, phi12 / s, phi21 / s);
    let hs = sc
        .hamiltonians
        .clone()
        .map(|[a, b]| [a.scale_real(1.0 / s), b.scale_real(1.0 / s)]);
    let dims = [2usize, 2];
    let dissipators: Vec<Dissipator> = (0..2)
        .map(|p| Dissipator::new(embed_local(&sc.target.jump(), p, &dims).expect("two qubits")))
        .collect();

    let rhs = |_t: f64, y: &[ComplexMatrix]| -> Vec<ComplexMatrix> {
        let (r1, r2) = (&y[0], &y[1]);
        let mut d1 = r1.scale_real(-phi21);
        d1.add_scaled_assign(C64::new(phi12, 0.0), r2);
        let mut d2 = r2.scale_real(-phi12);
        d2.add_scaled_assign(C64::new(phi21, 0.0), r1);
        for dis in &dissipators {
            dis.add_to(&mut d1, g1, r1);
            dis.add_to(&mut d2, g2, r2);
        }
        if let Some([h1, h2]) = &hs {
            d1.add_scaled_assign(-I, &h1.commutator(r1));
            d2.add_scaled_assign(-I, &h2.commutator(r2));
        }
        vec![d1, d2]
    };

    let (p1, p2) = sc.initial_probs();
    let mut y = vec![rho0.matrix().scale_real(p1), rho0.matrix().scale_real(p2)];
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        auxiliary: Some(Vec::new()),
        diagnostics: Vec::new(),
    };
    for k in 0..=plan.n_steps {
        let t = plan.time(k);
        if plan.is_sample(k) {
            let mut total = y[0].clone();
            total.add_scaled_assign(ONE, &y[1]);
            let d = SampleDiagnostics::of(&total, true);
            check_sample(t, &d, &tol)?;
            traj.times.push(t);
            traj.states.push(rho0.with_matrix(total));
            traj.diagnostics.push(d);
            if let Some(aux) = traj.auxiliary.as_mut() {
                aux.push([y[0].clone(), y[1].clone()]);
            }
        }
        if k < plan.n_steps {
            let h = plan.time(k + 1) - t;
            y = rk4_step(&rhs, t, h, &y);
        }
    }
    Ok(traj)
}

/// Samples the exact local map Φ_t ρ0 on the integrator grid. Samples where
/// the map is outside the CPTP range are kept and flagged, not rejected.
pub fn sample_local_maps(
    spec: &LocalMapSpec,
    rho0: &DensityOperator,
    t_max: f64,
    dt: f64,
    sample_stride: usize,
) -> Result<Trajectory> {
    let plan = StepPlan::new(t_max, dt, sample_stride)?;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        auxiliary: None,
        diagnostics: Vec::new(),
    };
    for k in (0..=plan.n_steps).filter(|&k| plan.is_sample(k)) {
        let t = plan.time(k);
        let out = apply_local_maps(rho0, spec, t)?;
        traj.diagnostics
            .push(SampleDiagnostics::of(out.state.matrix(), out.completely_positive));
        traj.times.push(t);
        traj.states.push(out.state);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{dephasing_factor, x_params_under_dephasing};
    use crate::qmath::pauli;
    use crate::states::{make_x_state, random_density, XStateParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit(entries: [[f64; 2]; 2]) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[entries[0].to_vec(), entries[1].to_vec()]).unwrap()
    }

    #[test]
    fn empty_generator_is_zero() {
        let spec = MasterEqSpec::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rho = random_density(&mut rng, 2);
        let out = lindblad_generator_apply(&spec, 0.3, rho.matrix()).unwrap();
        assert_eq!(out, ComplexMatrix::zeros(4));
    }

    #[test]
    fn dephasing_generator_coherence_rate() {
        let g0 = 0.37;
        let spec = MasterEqSpec::new(2).with_jump(TimeOperator::Constant(pauli(3)), GammaProfile::constant(g0));
        let rho = qubit([[0.6, 0.2], [0.2, 0.4]]);
        let out = lindblad_generator_apply(&spec, 0.0, &rho).unwrap();
        assert!((out[(0, 1)].re - (-2.0 * g0 * 0.2)).abs() < 1e-15);
        assert!(out[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn generator_output_traceless_and_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_density(&mut rng, 2).into_matrix();
        let spec = MasterEqSpec::local_amplitude_damping(2, GammaProfile::constant(0.7), DecayTarget::Zero)
            .unwrap()
            .with_hamiltonian(TimeOperator::Constant(h))
            .with_jump(
                TimeOperator::Constant(embed_local(&pauli(3), 0, &[2, 2]).unwrap()),
                GammaProfile::cosine(0.5, 1.0, -0.1),
            );
        for k in 0..100 {
            let rho = random_density(&mut rng, 2);
            let out = lindblad_generator_apply(&spec, k as f64 * 0.1, rho.matrix()).unwrap();
            assert!(out.trace().norm() < 1e-12);
            assert!(out.hermiticity_deviation() < 1e-12);
        }
    }

    #[test]
    fn generator_dimension_mismatch() {
        let spec = MasterEqSpec::new(4);
        assert!(matches!(
            lindblad_generator_apply(&spec, 0.0, &ComplexMatrix::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ad_dissipator_examples() {
        let ground = qubit([[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(ad_dissipator(&ground, 0).unwrap(), ComplexMatrix::zeros(2));
        let excited = qubit([[0.0, 0.0], [0.0, 1.0]]);
        assert_eq!(ad_dissipator(&excited, 0).unwrap(), ComplexMatrix::from_real_diag(&[1.0, -1.0]));
        let coh = qubit([[0.5, 0.3], [0.3, 0.5]]);
        let out = ad_dissipator(&coh, 0).unwrap();
        assert!((out[(0, 1)].re + 0.15).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_density(&mut rng, 2);
        assert!(ad_dissipator(rho.matrix(), 1).unwrap().trace().norm() < 1e-15);
        assert!(ad_dissipator(rho.matrix(), 2).is_err());
    }

    #[test]
    fn master_dephasing_matches_exact_map() {
        // γ(t) = 0.3 + 0.5 cos(t) changes sign but keeps ∫γ ≥ 0, so f ≤ 1
        let g = GammaProfile::cosine(0.5, 1.0, 0.3);
        let spec = MasterEqSpec::local_dephasing(2, &[(0, g.clone()), (1, g.clone())]).unwrap();
        let p = XStateParams::new(0.2, -0.2, 0.6, 0.5, 0.7);
        let rho0 = make_x_state(p).unwrap();
        let traj = integrate_master(&spec, &rho0, 6.0, 1e-3, 100).unwrap();
        let mut worst: f64 = 0.0;
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let f = dephasing_factor(&g, *t).powi(2);
            let exact = make_x_state(x_params_under_dephasing(p, f).unwrap()).unwrap();
            worst = worst.max(s.matrix().max_abs_diff(exact.matrix()));
        }
        assert!(worst <= 1e-8, "sup-norm {worst:e}");
    }

    #[test]
    fn master_trivial_dynamics_is_constant() {
        let spec = MasterEqSpec::local_dephasing(2, &[(0, GammaProfile::constant(0.0))]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho0 = random_density(&mut rng, 2);
        let traj = integrate_master(&spec, &rho0, 1.0, 0.01, 10).unwrap();
        assert_eq!(traj.len(), 11);
        for s in &traj.states {
            assert!(s.matrix().max_abs_diff(rho0.matrix()) < 1e-15);
        }
    }

    #[test]
    fn master_single_qubit_decay() {
        let g = 0.8;
        let spec = MasterEqSpec::local_amplitude_damping(1, GammaProfile::constant(g), DecayTarget::Zero).unwrap();
        let rho0 = DensityOperator::qubits(ComplexMatrix::from_real_diag(&[0.0, 1.0])).unwrap();
        let traj = integrate_master(&spec, &rho0, 5.0, 1e-3, 250).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert!((s.matrix()[(1, 1)].re - (-g * t).exp()).abs() <= 1e-8);
        }
        assert!((traj.times.last().unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn master_aborts_on_non_cp_evolution() {
        // negative rate from t = 0 drives coherences past the state space
        let spec = MasterEqSpec::local_dephasing(2, &[(0, GammaProfile::constant(-0.5))]).unwrap();
        let rho0 = crate::states::make_bell(0).unwrap();
        match integrate_master(&spec, &rho0, 2.0, 1e-3, 10) {
            Err(Error::IntegrationDiverged { t, reason }) => {
                assert!(t > 0.0 && t < 0.1, "{t}");
                assert!(reason.contains("eigenvalue"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn integrator_argument_checks() {
        let spec = MasterEqSpec::new(4);
        let rho0 = crate::states::make_bell(0).unwrap();
        assert!(integrate_master(&spec, &rho0, 1.0, 0.0, 1).is_err());
        assert!(integrate_master(&spec, &rho0, 1e-4, 1e-3, 1).is_err());
        assert!(integrate_master(&spec, &rho0, 1.0, 1e-2, 0).is_err());
        assert!(integrate_master(&MasterEqSpec::new(2), &rho0, 1.0, 1e-2, 1).is_err());
    }

    #[test]
    fn gad_derived_rates() {
        let mut sc = GadScenario::new(0.92, 0.5, 0.05);
        sc.rate_scale = 2.0;
        let (g1, g2) = sc.decay_rates();
        assert!((g1 - 1.84).abs() < 1e-15 && (g2 - 0.16).abs() < 1e-14);
        let (p12, p21) = sc.switching_rates();
        assert!((p12 - 0.05).abs() < 1e-15 && (p21 - 0.05).abs() < 1e-15);
        assert_eq!(sc.initial_probs(), (0.5, 0.5));
        assert!(GadScenario::new(1.2, 0.5, 1.0).validate().is_err());
        assert!(GadScenario::new(0.5, 0.5, -1.0).validate().is_err());
        let mut bad = GadScenario::new(0.5, 0.5, 1.0);
        bad.initial_config_probs = Some((0.6, 0.6));
        assert!(bad.validate().is_err());
    }

    fn fig2_state() -> DensityOperator {
        make_x_state(XStateParams::new(0.2, -0.2, 0.6, 0.5, 0.7)).unwrap()
    }

    #[test]
    fn frozen_bath_equals_single_configuration() {
        let mut sc = GadScenario::new(0.92, 0.5, 0.0);
        sc.initial_config_probs = Some((1.0, 0.0));
        let rho0 = fig2_state();
        let traj = integrate_rate_equations(&sc, &rho0, 5.0, 1e-3, 50).unwrap();
        let spec = MasterEqSpec::local_amplitude_damping(2, GammaProfile::constant(0.92), DecayTarget::One).unwrap();
        let plain = integrate_master(&spec, &rho0, 5.0, 1e-3, 50).unwrap();
        assert!(traj.sup_distance(&plain) < 1e-12);
    }

    #[test]
    fn rate_equation_probabilities_conserved() {
        let sc = GadScenario::new(0.92, 0.3, 0.05);
        let traj = integrate_rate_equations(&sc, &fig2_state(), 10.0, 1e-3, 100).unwrap();
        for (p1, p2) in traj.config_probabilities().unwrap() {
            assert!((p1 + p2 - 1.0).abs() <= 1e-8);
            assert!((-1e-8..=1.0 + 1e-8).contains(&p1));
        }
        assert!(traj.max_trace_deviation() <= 1e-8);
        assert!(traj.min_eigenvalue() >= -1e-8);
    }

    #[test]
    fn rate_equations_relax_nonstationary_bath() {
        let mut sc = GadScenario::new(0.7, 0.25, 2.0);
        sc.initial_config_probs = Some((1.0, 0.0));
        let traj = integrate_rate_equations(&sc, &fig2_state(), 8.0, 1e-3, 100).unwrap();
        let probs = traj.config_probabilities().unwrap();
        // P₁(τ) = η + (1-η) e^{-vτ}
        for (t, (p1, _)) in traj.times.iter().zip(probs) {
            let expected = 0.25 + 0.75 * (-2.0 * t).exp();
            assert!((p1 - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn hamiltonians_enter_rate_equations() {
        let mut sc = GadScenario::new(0.6, 0.5, 1.0);
        let h = embed_local(&pauli(3), 0, &[2, 2]).unwrap();
        sc.hamiltonians = Some([h.clone(), h]);
        let rho0 = crate::states::make_bell(0).unwrap();
        let with_h = integrate_rate_equations(&sc, &rho0, 1.0, 1e-3, 1000).unwrap();
        sc.hamiltonians = None;
        let without = integrate_rate_equations(&sc, &rho0, 1.0, 1e-3, 1000).unwrap();
        // a z rotation only changes the phase of the |00><11| coherence
        let a = with_h.states.last().unwrap().matrix()[(0, 3)];
        let b = without.states.last().unwrap().matrix()[(0, 3)];
        assert!((a.norm() - b.norm()).abs() < 1e-10);
        assert!((a - b).norm() > 1e-3);
    }

    #[test]
    fn exact_map_sampling_flags_non_cp() {
        let g = GammaProfile::cosine(0.25, 1.0, 0.0);
        let spec = LocalMapSpec::dephasing_on(2, &[1], &g).unwrap();
        let traj = sample_local_maps(&spec, &crate::states::make_bell(0).unwrap(), 2.0 * std::f64::consts::PI, 1e-2, 10).unwrap();
        assert!(traj.diagnostics.iter().any(|d| !d.completely_positive));
        assert!(traj.max_trace_deviation() < 1e-14);
    }
}
