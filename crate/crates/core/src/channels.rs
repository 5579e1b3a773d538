//! Decoherence-rate profiles and local single-qubit channels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{ComplexMatrix, C64};
use crate::states::{DensityOperator, MeasurementSpec, PartyMeasurement, XStateParams};

/// Time-dependent relaxation rate γ(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaProfile {
    Constant {
        gamma: f64,
    },
    /// γ(t) = offset + alpha·cos(omega·t)
    Cosine {
        alpha: f64,
        omega: f64,
        #[serde(default)]
        offset: f64,
    },
    /// γ(t) = values[i] on [breakpoints[i], breakpoints[i+1]); the last value
    /// extends forever and γ = 0 before the first breakpoint.
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl GammaProfile {
    pub fn constant(gamma: f64) -> Self {
        GammaProfile::Constant { gamma }
    }

    pub fn cosine(alpha: f64, omega: f64, offset: f64) -> Self {
        GammaProfile::Cosine { alpha, omega, offset }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("gamma profile: {msg}")));
        match self {
            GammaProfile::Constant { gamma } if !gamma.is_finite() => bad("non-finite rate"),
            GammaProfile::Cosine { alpha, omega, offset } => {
                if !(alpha.is_finite() && offset.is_finite()) {
                    bad("non-finite parameter")
                } else if !(*omega > 0.0 && omega.is_finite()) {
                    bad("omega must be positive")
                } else {
                    Ok(())
                }
            }
            GammaProfile::Piecewise { breakpoints, values } => {
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    bad("breakpoints and values must be nonempty and of equal length")
                } else if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
                    bad("breakpoints must be strictly increasing")
                } else if breakpoints.iter().chain(values).any(|v| !v.is_finite()) {
                    bad("non-finite entry")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match self {
            GammaProfile::Constant { gamma } => *gamma,
            GammaProfile::Cosine { alpha, omega, offset } => offset + alpha * (omega * t).cos(),
            GammaProfile::Piecewise { breakpoints, values } => {
                match breakpoints.iter().rposition(|&b| b <= t) {
                    Some(i) => values[i],
                    None => 0.0,
                }
            }
        }
    }

    /// ∫₀ᵗ γ(τ) dτ in closed form.
    pub fn integrated_rate(&self, t: f64) -> f64 {
        match self {
            GammaProfile::Constant { gamma } => gamma * t,
            GammaProfile::Cosine { alpha, omega, offset } => offset * t + alpha * (omega * t).sin() / omega,
            GammaProfile::Piecewise { breakpoints, values } => {
                let mut acc = 0.0;
                for (i, (&b, &v)) in breakpoints.iter().zip(values).enumerate() {
                    let lo = b.max(0.0);
                    let hi = breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
                    if hi > lo {
                        acc += v * (hi - lo);
                    }
                }
                acc
            }
        }
    }

    /// Maximal subintervals of [0, t_max] on which γ(t) < 0, in time order.
    pub fn negative_intervals(&self, t_max: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        match self {
            GammaProfile::Constant { gamma } => {
                if *gamma < 0.0 && t_max > 0.0 {
                    out.push((0.0, t_max));
                }
            }
            GammaProfile::Cosine { alpha, omega, offset } => {
                if *alpha == 0.0 || offset.abs() >= alpha.abs() {
                    // sign never changes
                    if offset + alpha.abs() < 0.0 && t_max > 0.0 {
                        out.push((0.0, t_max));
                    }
                    return out;
                }
                // cos(u) < r when alpha > 0, cos(u) > r when alpha < 0, with r = -offset/alpha
                let r = -offset / alpha;
                let a = r.acos();
                let (lo, hi) = if *alpha > 0.0 { (a, 2.0 * PI - a) } else { (-a, a) };
                let u_max = omega * t_max;
                let k_min = ((0.0 - hi) / (2.0 * PI)).floor() as i64;
                let k_max = (u_max / (2.0 * PI)).ceil() as i64;
                for k in k_min..=k_max {
                    let shift = 2.0 * PI * k as f64;
                    let s = ((lo + shift) / omega).max(0.0);
                    let e = ((hi + shift) / omega).min(t_max);
                    if e > s {
                        out.push((s, e));
                    }
                }
            }
            GammaProfile::Piecewise { breakpoints, values } => {
                for (i, (&b, &v)) in breakpoints.iter().zip(values).enumerate() {
                    let s = b.max(0.0);
                    let e = breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t_max);
                    if v < 0.0 && e > s {
                        match out.last_mut() {
                            Some(last) if last.1 == s => last.1 = e,
                            _ => out.push((s, e)),
                        }
                    }
                }
            }
        }
        out
    }

    /// True when γ(t) ≥ 0 on all of [0, t_max].
    pub fn is_nonnegative_on(&self, t_max: f64) -> bool {
        self.negative_intervals(t_max).is_empty()
    }
}

pub fn integrated_rate(g: &GammaProfile, t: f64) -> f64 {
    g.integrated_rate(t)
}

/// f(t) = exp(-2 ∫₀ᵗ γ).
pub fn dephasing_factor(g: &GammaProfile, t: f64) -> f64 {
    (-2.0 * g.integrated_rate(t)).exp()
}

/// Result of a local map; `completely_positive` is false when the map
/// parameters left the CPTP range (e.g. f > 1 during a non-divisible stretch).
#[derive(Debug, Clone, PartialEq)]
pub struct MapOutput {
    pub state: DensityOperator,
    pub completely_positive: bool,
}

fn qubit_party(rho: &DensityOperator, party: usize) -> Result<usize> {
    let n = rho.n_parties();
    if party >= n {
        return Err(Error::InvalidParty { index: party, parties: n });
    }
    if rho.party_dims()[party] != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: rho.party_dims()[party],
        });
    }
    // stride of this party's index in the full basis
    Ok(rho.party_dims()[party + 1..].iter().product())
}

fn check_factor(f: f64, what: &'static str) -> Result<()> {
    if !(f >= 0.0 && f.is_finite()) {
        return Err(Error::OutOfRange {
            what,
            value: f.to_string(),
        });
    }
    Ok(())
}

/// ρ -> (1+f)/2 ρ + (1-f)/2 σ₃ρσ₃ on one qubit: coherences in that qubit's
/// σ₃ basis are scaled by f.
pub fn apply_dephasing(rho: &DensityOperator, party: usize, f: f64) -> Result<MapOutput> {
    check_factor(f, "dephasing factor")?;
    let stride = qubit_party(rho, party)?;
    let mut m = rho.matrix().clone();
    let d = m.dim();
    for i in 0..d {
        for j in 0..d {
            if (i / stride) % 2 != (j / stride) % 2 {
                m[(i, j)] *= f;
            }
        }
    }
    Ok(MapOutput {
        state: rho.with_matrix(m),
        completely_positive: f <= 1.0,
    })
}

/// Direction of amplitude-damping decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayTarget {
    /// Jump operator |0><1|.
    #[default]
    Zero,
    /// Jump operator |1><0|.
    One,
}

impl DecayTarget {
    /// 2×2 jump operator.
    pub fn jump(self) -> ComplexMatrix {
        let mut j = ComplexMatrix::zeros(2);
        match self {
            DecayTarget::Zero => j[(0, 1)] = C64::new(1.0, 0.0),
            DecayTarget::One => j[(1, 0)] = C64::new(1.0, 0.0),
        }
        j
    }
}

/// Amplitude damping on one qubit with population survival `s = exp(-∫γ)`:
/// K₀ρK₀† + (1-s) JρJ† with K₀ = diag(1, √s) in the decaying frame. Applied
/// linearly (and flagged) when s > 1.
pub fn apply_amplitude_damping(rho: &DensityOperator, party: usize, survival: f64, target: DecayTarget) -> Result<MapOutput> {
    check_factor(survival, "amplitude-damping survival")?;
    let stride = qubit_party(rho, party)?;
    let src = rho.matrix();
    let d = src.dim();
    let excited_bit = match target {
        DecayTarget::Zero => 1,
        DecayTarget::One => 0,
    };
    let sq = survival.sqrt();
    let bit = |i: usize| (i / stride) % 2;
    let mut out = ComplexMatrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let scale = match (bit(i) == excited_bit, bit(j) == excited_bit) {
                (true, true) => survival,
                (false, false) => 1.0,
                _ => sq,
            };
            out[(i, j)] += src[(i, j)] * scale;
            if bit(i) == excited_bit && bit(j) == excited_bit {
                // feed the decayed population into the target level
                let (ti, tj) = (flip(i, stride), flip(j, stride));
                out[(ti, tj)] += src[(i, j)] * (1.0 - survival);
            }
        }
    }
    Ok(MapOutput {
        state: rho.with_matrix(out),
        completely_positive: survival <= 1.0,
    })
}

#[inline]
fn flip(i: usize, stride: usize) -> usize {
    i ^ stride
}

/// Effective dephasing acting on X-state parameters: (c₁f, c₂f, c₃, c₄, c₅).
pub fn x_params_under_dephasing(p: XStateParams, f_eff: f64) -> Result<XStateParams> {
    check_factor(f_eff, "effective dephasing factor")?;
    let out = XStateParams {
        c1: p.c1 * f_eff,
        c2: p.c2 * f_eff,
        ..p
    };
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LocalChannel {
    Identity,
    Dephasing { profile: GammaProfile },
    AmplitudeDamping {
        profile: GammaProfile,
        #[serde(default)]
        target: DecayTarget,
    },
}

impl LocalChannel {
    pub fn is_identity(&self) -> bool {
        matches!(self, LocalChannel::Identity)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LocalChannel::Identity => Ok(()),
            LocalChannel::Dephasing { profile } | LocalChannel::AmplitudeDamping { profile, .. } => profile.validate(),
        }
    }
}

/// Φ = Φ₀ ⊗ Φ₁ ⊗ ... (one channel per party).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocalMapSpec {
    pub channels: Vec<LocalChannel>,
}

impl LocalMapSpec {
    pub fn new(channels: Vec<LocalChannel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidParameter("local map needs at least one party".into()));
        }
        for c in &channels {
            c.validate()?;
        }
        Ok(LocalMapSpec { channels })
    }

    pub fn identity(n: usize) -> Self {
        LocalMapSpec {
            channels: vec![LocalChannel::Identity; n],
        }
    }

    /// Dephasing with `profile` on the listed parties, identity elsewhere.
    pub fn dephasing_on(n: usize, parties: &[usize], profile: &GammaProfile) -> Result<Self> {
        let mut spec = Self::identity(n);
        for &p in parties {
            if p >= n {
                return Err(Error::InvalidParty { index: p, parties: n });
            }
            spec.channels[p] = LocalChannel::Dephasing {
                profile: profile.clone(),
            };
        }
        Self::new(spec.channels)
    }

    pub fn n_parties(&self) -> usize {
        self.channels.len()
    }

    pub fn decohered_parties(&self) -> Vec<usize> {
        (0..self.channels.len())
            .filter(|&i| !self.channels[i].is_identity())
            .collect()
    }

    /// True when every profile is nonnegative on [0, t_max].
    pub fn is_divisible_on(&self, t_max: f64) -> bool {
        self.channels.iter().all(|c| match c {
            LocalChannel::Identity => true,
            LocalChannel::Dephasing { profile } | LocalChannel::AmplitudeDamping { profile, .. } => {
                profile.is_nonnegative_on(t_max)
            }
        })
    }
}

/// Applies every party's channel at time `t` (maps from time 0).
pub fn apply_local_maps(rho: &DensityOperator, spec: &LocalMapSpec, t: f64) -> Result<MapOutput> {
    if spec.n_parties() != rho.n_parties() {
        return Err(Error::DimensionMismatch {
            expected: rho.n_parties(),
            got: spec.n_parties(),
        });
    }
    let mut out = MapOutput {
        state: rho.clone(),
        completely_positive: true,
    };
    for (party, channel) in spec.channels.iter().enumerate() {
        let step = match channel {
            LocalChannel::Identity => continue,
            LocalChannel::Dephasing { profile } => apply_dephasing(&out.state, party, dephasing_factor(profile, t))?,
            LocalChannel::AmplitudeDamping { profile, target } => {
                let survival = (-profile.integrated_rate(t)).exp();
                apply_amplitude_damping(&out.state, party, survival, *target)?
            }
        };
        out = MapOutput {
            state: step.state,
            completely_positive: out.completely_positive && step.completely_positive,
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Theorem1Check {
    pub ok: bool,
    pub violations: Vec<usize>,
}

/// Correlation-based quantifiers built from measurements are only monotone
/// when every decohered party is left unmeasured.
pub fn theorem1_applicable(spec: &LocalMapSpec, m: &MeasurementSpec) -> Result<Theorem1Check> {
    if spec.n_parties() != m.parties.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.n_parties(),
            got: m.parties.len(),
        });
    }
    let violations: Vec<usize> = spec
        .channels
        .iter()
        .zip(&m.parties)
        .enumerate()
        .filter(|(_, (c, pm))| !c.is_identity() && matches!(pm, PartyMeasurement::Projective(_)))
        .map(|(i, _)| i)
        .collect();
    Ok(Theorem1Check {
        ok: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{partial_trace, trace_norm_hermitian};
    use crate::states::{extract_x_params, make_bell, make_x_state, random_density, BlochDirection};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn integrated_rate_examples() {
        assert!(close(integrated_rate(&GammaProfile::constant(0.3), 2.0), 0.6, 1e-15));
        assert!(close(integrated_rate(&GammaProfile::cosine(0.25, 1.0, 0.0), FRAC_PI_2), 0.25, 1e-15));
        let pw = GammaProfile::Piecewise {
            breakpoints: vec![0.0, 1.0],
            values: vec![1.0, -0.5],
        };
        assert!(close(integrated_rate(&pw, 2.0), 0.5, 1e-15));
        assert!(close(integrated_rate(&pw, 0.5), 0.5, 1e-15));
    }

    #[test]
    fn dephasing_factor_examples() {
        let g = GammaProfile::constant(0.2);
        assert!(close(dephasing_factor(&g, 1.5), (-0.6f64).exp(), 1e-15));
        let cos = GammaProfile::cosine(0.25, 1.0, 0.0);
        assert!(close(dephasing_factor(&cos, 1.5 * PI), 1.648721, 1e-6));
        assert_eq!(dephasing_factor(&cos, 0.0), 1.0);
    }

    #[test]
    fn profile_validation() {
        assert!(GammaProfile::cosine(0.1, 0.0, 0.0).validate().is_err());
        let pw = GammaProfile::Piecewise {
            breakpoints: vec![0.0, 0.0],
            values: vec![1.0, 2.0],
        };
        assert!(pw.validate().is_err());
        assert!(GammaProfile::constant(-0.3).validate().is_ok());
    }

    #[test]
    fn profile_json_form() {
        let g: GammaProfile =
            serde_json::from_str(r#"{"kind":"cosine","alpha":0.25,"omega":1.0,"offset":0.0}"#).unwrap();
        assert_eq!(g, GammaProfile::cosine(0.25, 1.0, 0.0));
        let c: GammaProfile = serde_json::from_str(r#"{"kind":"constant","gamma":0.3}"#).unwrap();
        assert_eq!(c, GammaProfile::constant(0.3));
        let p: GammaProfile =
            serde_json::from_str(r#"{"kind":"piecewise","breakpoints":[0,1],"values":[1.0,-0.5]}"#).unwrap();
        assert!(matches!(p, GammaProfile::Piecewise { .. }));
    }

    #[test]
    fn negative_intervals_cosine() {
        let g = GammaProfile::cosine(0.25, 1.0, 0.0);
        let iv = g.negative_intervals(2.0 * PI);
        assert_eq!(iv.len(), 1);
        assert!(close(iv[0].0, FRAC_PI_2, 1e-12) && close(iv[0].1, 1.5 * PI, 1e-12));
        assert_eq!(g.negative_intervals(4.0 * PI).len(), 2);

        let neg = GammaProfile::cosine(-0.25, 2.0, 0.0);
        let iv = neg.negative_intervals(PI);
        assert!(close(iv[0].0, 0.0, 1e-15) && close(iv[0].1, PI / 4.0, 1e-12));
        assert!(close(iv[1].0, 3.0 * PI / 4.0, 1e-12) && close(iv[1].1, PI, 1e-12));

        // sampling cross-check with an offset
        let off = GammaProfile::cosine(0.5, 1.3, 0.2);
        let iv = off.negative_intervals(20.0);
        for k in 0..20000 {
            let t = k as f64 * 1e-3;
            let inside = iv.iter().any(|&(a, b)| t > a && t < b);
            let r = off.rate(t);
            if r.abs() > 1e-9 {
                assert_eq!(inside, r < 0.0, "t = {t}");
            }
        }
        assert!(GammaProfile::cosine(0.2, 1.0, 0.3).negative_intervals(10.0).is_empty());
        assert_eq!(GammaProfile::constant(-1.0).negative_intervals(3.0), vec![(0.0, 3.0)]);
    }

    #[test]
    fn dephasing_examples() {
        let bell = make_bell(0).unwrap();
        assert_eq!(apply_dephasing(&bell, 0, 1.0).unwrap().state, bell);

        let f = 0.37;
        let out = apply_dephasing(&bell, 0, f).unwrap();
        assert!(out.completely_positive);
        let p = extract_x_params(&out.state).unwrap();
        for (a, b) in p.to_array().iter().zip([f, -f, 1.0, 0.0, 0.0]) {
            assert!(close(*a, b, 1e-15));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&mut rng, 2);
        let full = apply_dephasing(&rho, 1, 0.0).unwrap().state;
        for i in 0..4 {
            for j in 0..4 {
                if (i % 2) != (j % 2) {
                    assert_eq!(full.matrix()[(i, j)].norm(), 0.0);
                } else {
                    assert_eq!(full.matrix()[(i, j)], rho.matrix()[(i, j)]);
                }
            }
        }
        assert!(apply_dephasing(&rho, 0, -0.1).is_err());
        assert!(!apply_dephasing(&rho, 0, 1.2).unwrap().completely_positive);
        assert!(apply_dephasing(&rho, 2, 0.5).is_err());
    }

    #[test]
    fn x_params_dephasing_examples() {
        let bell = XStateParams::new(1.0, -1.0, 1.0, 0.0, 0.0);
        assert_eq!(x_params_under_dephasing(bell, 0.5).unwrap().to_array(), [0.5, -0.5, 1.0, 0.0, 0.0]);
        let fig2 = XStateParams::new(0.2, -0.2, 0.6, 0.5, 0.7);
        assert_eq!(x_params_under_dephasing(fig2, 1.0).unwrap(), fig2);
        let out = x_params_under_dephasing(fig2, 0.5).unwrap().to_array();
        for (a, b) in out.iter().zip([0.1, -0.1, 0.6, 0.5, 0.7]) {
            assert!(close(*a, b, 1e-15));
        }
        // f > 1 pushes the Bell parameters outside the state space
        assert!(matches!(
            x_params_under_dephasing(bell, 1.5),
            Err(Error::PositivityViolated { .. })
        ));
    }

    #[test]
    fn local_maps_examples() {
        let bell = make_bell(0).unwrap();
        assert_eq!(apply_local_maps(&bell, &LocalMapSpec::identity(2), 3.0).unwrap().state, bell);

        // f1 = f2 = 0.8 via a constant profile: exp(-2 γ t) = 0.8
        let gamma = -(0.8f64).ln() / 2.0;
        let spec = LocalMapSpec::dephasing_on(2, &[0, 1], &GammaProfile::constant(gamma)).unwrap();
        let out = apply_local_maps(&bell, &spec, 1.0).unwrap();
        let p = extract_x_params(&out.state).unwrap();
        for (a, b) in p.to_array().iter().zip([0.64, -0.64, 1.0, 0.0, 0.0]) {
            assert!(close(*a, b, 1e-14));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(&mut rng, 2);
        let spec = LocalMapSpec::dephasing_on(2, &[0], &GammaProfile::constant(0.4)).unwrap();
        let out = apply_local_maps(&rho, &spec, 2.0).unwrap();
        let before = partial_trace(rho.matrix(), &[2, 2], &[1]).unwrap();
        let after = partial_trace(out.state.matrix(), &[2, 2], &[1]).unwrap();
        assert!(before.max_abs_diff(&after) < 1e-15);
    }

    #[test]
    fn composition_and_effective_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rho = random_density(&mut rng, 2);
            let (fa, fb) = (0.3 + 0.6 * rand::Rng::gen::<f64>(&mut rng), 0.9);
            let two = apply_dephasing(&apply_dephasing(&rho, 1, fa).unwrap().state, 1, fb).unwrap();
            let one = apply_dephasing(&rho, 1, fa * fb).unwrap();
            assert!(two.state.matrix().max_abs_diff(one.state.matrix()) < 1e-12);
        }
        let p = XStateParams::new(0.2, -0.2, 0.6, 0.5, 0.7);
        let rho = make_x_state(p).unwrap();
        let both = apply_dephasing(&apply_dephasing(&rho, 0, 0.7).unwrap().state, 1, 0.6).unwrap();
        let eff = make_x_state(x_params_under_dephasing(p, 0.42).unwrap()).unwrap();
        assert!(both.state.matrix().max_abs_diff(eff.matrix()) < 1e-12);
    }

    #[test]
    fn amplitude_damping_matches_population_decay() {
        let excited = DensityOperator::qubits(ComplexMatrix::from_real_diag(&[0.0, 1.0])).unwrap();
        let out = apply_amplitude_damping(&excited, 0, 0.3, DecayTarget::Zero).unwrap();
        assert!(out.state.matrix().max_abs_diff(&ComplexMatrix::from_real_diag(&[0.7, 0.3])) < 1e-15);
        let ground = DensityOperator::qubits(ComplexMatrix::from_real_diag(&[1.0, 0.0])).unwrap();
        let out = apply_amplitude_damping(&ground, 0, 0.3, DecayTarget::One).unwrap();
        assert!(out.state.matrix().max_abs_diff(&ComplexMatrix::from_real_diag(&[0.3, 0.7])) < 1e-15);

        // two-qubit check against explicit Kraus operators on party 1
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_density(&mut rng, 2);
        let s: f64 = 0.45;
        let id = ComplexMatrix::identity(2);
        let k0 = crate::qmath::kron(&id, &ComplexMatrix::from_real_diag(&[1.0, s.sqrt()]));
        let k1 = crate::qmath::kron(&id, &DecayTarget::Zero.jump().scale_real((1.0 - s).sqrt()));
        let kraus = &k0.matmul(rho.matrix()).matmul(&k0.adjoint()) + &k1.matmul(rho.matrix()).matmul(&k1.adjoint());
        let out = apply_amplitude_damping(&rho, 1, s, DecayTarget::Zero).unwrap();
        assert!(out.state.matrix().max_abs_diff(&kraus) < 1e-15);
    }

    #[test]
    fn contractivity_and_trace_preservation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for k in 0..200 {
            let rho = random_density(&mut rng, 2);
            let sigma = random_density(&mut rng, 2);
            let f = rand::Rng::gen_range(&mut rng, 0.0..=1.0);
            let party = k % 2;
            let before = trace_norm_hermitian(&(rho.matrix() - sigma.matrix())).unwrap();
            let (a, b) = if k % 3 == 0 {
                (
                    apply_amplitude_damping(&rho, party, f, DecayTarget::Zero).unwrap().state,
                    apply_amplitude_damping(&sigma, party, f, DecayTarget::Zero).unwrap().state,
                )
            } else {
                (
                    apply_dephasing(&rho, party, f).unwrap().state,
                    apply_dephasing(&sigma, party, f).unwrap().state,
                )
            };
            let after = trace_norm_hermitian(&(a.matrix() - b.matrix())).unwrap();
            assert!(after <= before + 1e-10);
            assert!((a.matrix().trace().re - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn theorem1_examples() {
        let g = GammaProfile::constant(0.1);
        let on_1 = LocalMapSpec::dephasing_on(2, &[1], &g).unwrap();
        let m0 = MeasurementSpec::on(2, &[(0, BlochDirection::Z)]).unwrap();
        assert!(theorem1_applicable(&on_1, &m0).unwrap().ok);

        let on_0 = LocalMapSpec::dephasing_on(2, &[0], &g).unwrap();
        let check = theorem1_applicable(&on_0, &m0).unwrap();
        assert!(!check.ok);
        assert_eq!(check.violations, vec![0]);

        // both parties dephased, rewritten as one effective channel on party 1
        let g_eff = GammaProfile::constant(0.2);
        let eff = LocalMapSpec::dephasing_on(2, &[1], &g_eff).unwrap();
        assert!(theorem1_applicable(&eff, &m0).unwrap().ok);
    }
}
