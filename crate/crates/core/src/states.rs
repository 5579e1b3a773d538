//! Density operators and the state families used throughout the crate.
//!
//! Computational basis: `|0>` is the +1 eigenvector of σ₃. Party 0 is the
//! slowest tensor index, so for two qubits the basis order is
//! `|00>, |01>, |10>, |11>` with the left digit belonging to party 0.
//!
//! X-state parameters use `c_i = tr[ρ σ_i⊗σ_i]` for i = 1..3,
//! `c4 = tr[ρ I⊗σ₃]` and `c5 = tr[ρ σ₃⊗I]`. The Bell states carry:
//!
//! | index | state | (c1, c2, c3) |
//! |-------|-------|--------------|
//! | 0 | Φ⁺ = (|00>+|11>)/√2 | ( 1, -1,  1) |
//! | 1 | Φ⁻ = (|00>-|11>)/√2 | (-1,  1,  1) |
//! | 2 | Ψ⁺ = (|01>+|10>)/√2 | ( 1,  1, -1) |
//! | 3 | Ψ⁻ = (|01>-|10>)/√2 | (-1, -1, -1) |

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{
    embed_local, hermitian_eigenvalues, kron, kron_all, partial_trace, pauli, ComplexMatrix,
    ToleranceConfig, C64, ONE, ZERO,
};

/// A positive, unit-trace Hermitian operator together with its party structure.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    party_dims: Vec<usize>,
}

impl DensityOperator {
    /// Validating constructor (default tolerances).
    pub fn new(matrix: ComplexMatrix, party_dims: Vec<usize>) -> Result<Self> {
        let rho = Self::new_unchecked(matrix, party_dims)?;
        rho.check(&ToleranceConfig::default())?;
        Ok(rho)
    }

    /// Checks only the factorization. Used for intermediate operators that are
    /// allowed to leave the state space (non-CP transients, integrator stages).
    pub fn new_unchecked(matrix: ComplexMatrix, party_dims: Vec<usize>) -> Result<Self> {
        let prod: usize = party_dims.iter().product();
        if party_dims.is_empty() || party_dims.contains(&0) || prod != matrix.dim() {
            return Err(Error::BadFactorization {
                party_dims,
                dim: matrix.dim(),
            });
        }
        Ok(DensityOperator { matrix, party_dims })
    }

    pub fn qubits(matrix: ComplexMatrix) -> Result<Self> {
        let n = qubit_count(matrix.dim())?;
        Self::new(matrix, vec![2; n])
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn party_dims(&self) -> &[usize] {
        &self.party_dims
    }

    pub fn n_parties(&self) -> usize {
        self.party_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Same party structure, new matrix (unchecked).
    pub(crate) fn with_matrix(&self, matrix: ComplexMatrix) -> DensityOperator {
        debug_assert_eq!(matrix.dim(), self.dim());
        DensityOperator {
            matrix,
            party_dims: self.party_dims.clone(),
        }
    }

    /// U ρ U†
    pub fn conjugate(&self, u: &ComplexMatrix) -> DensityOperator {
        self.with_matrix(u.matmul(&self.matrix).matmul(&u.adjoint()))
    }

    /// Applies one unitary per party, U₀ ⊗ U₁ ⊗ ...
    pub fn apply_local_unitaries(&self, unitaries: &[ComplexMatrix]) -> Result<DensityOperator> {
        if unitaries.len() != self.n_parties() {
            return Err(Error::DimensionMismatch {
                expected: self.n_parties(),
                got: unitaries.len(),
            });
        }
        Ok(self.conjugate(&kron_all(unitaries)))
    }

    fn check(&self, tol: &ToleranceConfig) -> Result<()> {
        let d = validate_density(self);
        if d.hermiticity_deviation > tol.hermiticity_tol {
            return Err(Error::HermiticityViolated {
                deviation: d.hermiticity_deviation,
            });
        }
        if d.trace_deviation > tol.trace_tol {
            return Err(Error::TraceViolated {
                deviation: d.trace_deviation,
            });
        }
        if d.min_eigenvalue < -tol.positivity_tol {
            return Err(Error::PositivityViolated {
                eigenvalue: d.min_eigenvalue,
            });
        }
        Ok(())
    }
}

pub(crate) fn qubit_count(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::BadFactorization {
            party_dims: vec![2],
            dim,
        });
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Diagnostics reported by [`validate_density`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityDiagnostics {
    pub hermiticity_deviation: f64,
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
    pub purity: f64,
}

impl DensityDiagnostics {
    pub fn is_valid(&self, tol: &ToleranceConfig) -> bool {
        self.hermiticity_deviation <= tol.hermiticity_tol
            && self.trace_deviation <= tol.trace_tol
            && self.min_eigenvalue >= -tol.positivity_tol
    }
}

pub fn validate_density(rho: &DensityOperator) -> DensityDiagnostics {
    let m = rho.matrix();
    let hermiticity_deviation = m.hermiticity_deviation();
    let tr = m.trace();
    let trace_deviation = ((tr.re - 1.0).powi(2) + tr.im.powi(2)).sqrt();
    // eigenvalues of the Hermitian part; hermiticity is reported separately
    let min_eigenvalue = hermitian_eigenvalues(&m.hermitian_part())
        .map(|v| v[0])
        .unwrap_or(f64::NAN);
    DensityDiagnostics {
        hermiticity_deviation,
        trace_deviation,
        min_eigenvalue,
        purity: rho.purity(),
    }
}

/// The five real parameters of a two-qubit X state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XStateParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl XStateParams {
    pub const fn new(c1: f64, c2: f64, c3: f64, c4: f64, c5: f64) -> Self {
        XStateParams { c1, c2, c3, c4, c5 }
    }

    pub fn from_array(c: [f64; 5]) -> Self {
        Self::new(c[0], c[1], c[2], c[3], c[4])
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.c1, self.c2, self.c3, self.c4, self.c5]
    }

    /// ¼[I⊗I + Σ cᵢ σᵢ⊗σᵢ + c₄ I⊗σ₃ + c₅ σ₃⊗I], built without validation.
    pub fn matrix(&self) -> ComplexMatrix {
        let XStateParams { c1, c2, c3, c4, c5 } = *self;
        let mut m = ComplexMatrix::from_real_diag(&[
            (1.0 + c3 + c4 + c5) / 4.0,
            (1.0 - c3 - c4 + c5) / 4.0,
            (1.0 - c3 + c4 - c5) / 4.0,
            (1.0 + c3 - c4 - c5) / 4.0,
        ]);
        let outer = C64::new((c1 - c2) / 4.0, 0.0);
        let inner = C64::new((c1 + c2) / 4.0, 0.0);
        m[(0, 3)] = outer;
        m[(3, 0)] = outer;
        m[(1, 2)] = inner;
        m[(2, 1)] = inner;
        m
    }

    /// Smallest eigenvalue of the X matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix()).expect("X matrix is symmetric")[0]
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.to_array();
        if let Some(bad) = c.iter().find(|v| !v.is_finite()) {
            return Err(Error::OutOfRange {
                what: "X-state parameter",
                value: bad.to_string(),
            });
        }
        let min = self.min_eigenvalue();
        if min < -ToleranceConfig::default().positivity_tol {
            return Err(Error::PositivityViolated { eigenvalue: min });
        }
        Ok(())
    }

    /// Exchange the roles of the two qubits (c4 <-> c5).
    pub fn swapped(self) -> Self {
        XStateParams {
            c4: self.c5,
            c5: self.c4,
            ..self
        }
    }

    /// Uniform rejection sampling of a physical X state.
    pub fn random(rng: &mut impl Rng) -> Self {
        loop {
            let p = XStateParams::new(
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
            );
            if p.min_eigenvalue() >= 0.0 {
                return p;
            }
        }
    }
}

/// Random full-rank qubit state G G† / tr(G G†) with uniform entries in G.
pub fn random_density(rng: &mut impl Rng, n_qubits: usize) -> DensityOperator {
    let d = 1 << n_qubits;
    let g = ComplexMatrix::from_fn(d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    DensityOperator {
        matrix: m.scale_real(1.0 / tr).hermitian_part(),
        party_dims: vec![2; n_qubits],
    }
}

pub fn make_x_state(p: XStateParams) -> Result<DensityOperator> {
    p.validate()?;
    DensityOperator::new(p.matrix(), vec![2, 2])
}

/// tr[ρ σ_a ⊗ σ_b] for a two-qubit operator.
pub fn pauli_expectation(rho: &ComplexMatrix, a: usize, b: usize) -> f64 {
    let p = kron(&pauli(a), &pauli(b));
    let n = rho.dim();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += rho[(i, j)] * p[(j, i)];
        }
    }
    acc.re
}

pub fn extract_x_params(rho: &DensityOperator) -> Result<XStateParams> {
    if rho.party_dims() != [2, 2] {
        return Err(Error::BadFactorization {
            party_dims: rho.party_dims().to_vec(),
            dim: rho.dim(),
        });
    }
    x_params_of_matrix(rho.matrix())
}

pub(crate) fn x_params_of_matrix(m: &ComplexMatrix) -> Result<XStateParams> {
    const X_TERMS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (3, 3), (0, 3), (3, 0)];
    let mut max_deviation: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            if !X_TERMS.contains(&(a, b)) {
                max_deviation = max_deviation.max(pauli_expectation(m, a, b).abs());
            }
        }
    }
    // imaginary trace parts hide in the identity term
    max_deviation = max_deviation.max(m.trace().im.abs());
    if max_deviation > 1e-10 {
        return Err(Error::NotXForm { max_deviation });
    }
    Ok(XStateParams::new(
        pauli_expectation(m, 1, 1),
        pauli_expectation(m, 2, 2),
        pauli_expectation(m, 3, 3),
        pauli_expectation(m, 0, 3),
        pauli_expectation(m, 3, 0),
    ))
}

/// Bell state by index (see the module table for sign conventions).
pub fn make_bell(index: usize) -> Result<DensityOperator> {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let psi = match index {
        0 => [s, ZERO, ZERO, s],
        1 => [s, ZERO, ZERO, -s],
        2 => [ZERO, s, s, ZERO],
        3 => [ZERO, s, -s, ZERO],
        _ => {
            return Err(Error::OutOfRange {
                what: "Bell index",
                value: index.to_string(),
            })
        }
    };
    DensityOperator::new(ComplexMatrix::outer(&psi), vec![2, 2])
}

pub const MAX_QUBITS: usize = 6;

/// n-qubit GHZ state (|0..0> + |1..1>)/√2, 2 ≤ n ≤ 6.
pub fn make_ghz(n: usize) -> Result<DensityOperator> {
    if !(2..=MAX_QUBITS).contains(&n) {
        return Err(Error::OutOfRange {
            what: "GHZ qubit count",
            value: n.to_string(),
        });
    }
    let dim = 1 << n;
    let mut m = ComplexMatrix::zeros(dim);
    for &i in &[0, dim - 1] {
        for &j in &[0, dim - 1] {
            m[(i, j)] = C64::new(0.5, 0.0);
        }
    }
    DensityOperator::new(m, vec![2; n])
}

/// π_ρ: tensor product of all single-party marginals.
pub fn marginal_product(rho: &DensityOperator) -> DensityOperator {
    let dims = rho.party_dims();
    let marginals: Vec<ComplexMatrix> = (0..dims.len())
        .map(|p| partial_trace(rho.matrix(), dims, &[p]).expect("factorization checked on construction"))
        .collect();
    rho.with_matrix(kron_all(&marginals))
}

/// Unit vector on the Bloch sphere labelling the projector pair ½(I ± n·σ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochDirection([f64; 3]);

impl BlochDirection {
    pub const X: BlochDirection = BlochDirection([1.0, 0.0, 0.0]);
    pub const Y: BlochDirection = BlochDirection([0.0, 1.0, 0.0]);
    pub const Z: BlochDirection = BlochDirection([0.0, 0.0, 1.0]);

    /// Normalizes a nonzero vector.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !(norm > 1e-12) || !norm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Bloch direction ({x}, {y}, {z}) has no direction"
            )));
        }
        Ok(BlochDirection([x / norm, y / norm, z / norm]))
    }

    pub fn from_angles(theta: f64, phi: f64) -> Self {
        BlochDirection([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()])
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    /// (θ, φ) with θ ∈ [0, π], φ ∈ [0, 2π).
    pub fn angles(&self) -> (f64, f64) {
        let [x, y, z] = self.0;
        let theta = z.clamp(-1.0, 1.0).acos();
        let phi = y.atan2(x).rem_euclid(2.0 * PI);
        (theta, phi)
    }

    /// The projector pair is invariant under n -> -n; pick the representative
    /// with polar angle in [0, π/2] (and φ ∈ [0, π) on the equator).
    pub fn canonical(&self) -> Self {
        let [x, y, z] = self.0;
        let flip = if z.abs() > 1e-15 {
            z < 0.0
        } else {
            let (_, phi) = self.angles();
            phi >= PI
        };
        if flip {
            BlochDirection([-x, -y, -z])
        } else {
            *self
        }
    }

    pub fn polar_in_hemisphere(&self) -> bool {
        self.canonical().angles().0 <= FRAC_PI_2 + 1e-15
    }

    /// n·σ
    pub fn pauli_operator(&self) -> ComplexMatrix {
        let [x, y, z] = self.0;
        let mut m = pauli(1).scale_real(x);
        m.add_scaled_assign(C64::new(y, 0.0), &pauli(2));
        m.add_scaled_assign(C64::new(z, 0.0), &pauli(3));
        m
    }

    /// ½(I + sign·n·σ)
    pub fn projector(&self, sign: f64) -> ComplexMatrix {
        let mut m = ComplexMatrix::identity(2).scale_real(0.5);
        m.add_scaled_assign(C64::new(0.5 * sign, 0.0), &self.pauli_operator());
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PartyMeasurement {
    Unmeasured,
    Projective(BlochDirection),
}

/// Local projective measurement map M = M₀ ⊗ M₁ ⊗ ...
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSpec {
    pub parties: Vec<PartyMeasurement>,
}

impl MeasurementSpec {
    pub fn unmeasured(n: usize) -> Self {
        MeasurementSpec {
            parties: vec![PartyMeasurement::Unmeasured; n],
        }
    }

    /// Measure the listed parties along the given directions.
    pub fn on(n: usize, measured: &[(usize, BlochDirection)]) -> Result<Self> {
        let mut spec = Self::unmeasured(n);
        for &(p, dir) in measured {
            if p >= n {
                return Err(Error::InvalidParty { index: p, parties: n });
            }
            spec.parties[p] = PartyMeasurement::Projective(dir);
        }
        Ok(spec)
    }

    pub fn measured_parties(&self) -> Vec<usize> {
        self.parties
            .iter()
            .enumerate()
            .filter(|(_, m)| matches!(m, PartyMeasurement::Projective(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// All product projectors P_k (identity on unmeasured parties).
    pub fn projectors(&self) -> Vec<ComplexMatrix> {
        let mut out = vec![ComplexMatrix::identity(1)];
        for m in &self.parties {
            let local: Vec<ComplexMatrix> = match m {
                PartyMeasurement::Unmeasured => vec![ComplexMatrix::identity(2)],
                PartyMeasurement::Projective(d) => vec![d.projector(1.0), d.projector(-1.0)],
            };
            out = out
                .iter()
                .flat_map(|acc| local.iter().map(move |l| kron(acc, l)))
                .collect();
        }
        out
    }
}

/// Applies Σ_k P_k ρ P_k.
///
/// For a single qubit, P₊ρP₊ + P₋ρP₋ = ½(ρ + SρS) with S = n·σ; measured
/// parties are processed one at a time since the local maps commute.
pub fn apply_projective_measurement(rho: &DensityOperator, m: &MeasurementSpec) -> Result<DensityOperator> {
    Ok(rho.with_matrix(measure_matrix(rho.matrix(), rho.party_dims(), m)?))
}

pub(crate) fn measure_matrix(
    rho: &ComplexMatrix,
    party_dims: &[usize],
    m: &MeasurementSpec,
) -> Result<ComplexMatrix> {
    if m.parties.len() != party_dims.len() {
        return Err(Error::DimensionMismatch {
            expected: party_dims.len(),
            got: m.parties.len(),
        });
    }
    let mut out = rho.clone();
    for (p, pm) in m.parties.iter().enumerate() {
        if let PartyMeasurement::Projective(dir) = pm {
            let s = embed_local(&dir.pauli_operator(), p, party_dims)?;
            let sms = s.matmul(&out).matmul(&s);
            let mut next = out;
            next.add_scaled_assign(ONE, &sms);
            out = next.scale_real(0.5);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::trace_norm_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FIG2: XStateParams = XStateParams::new(0.2, -0.2, 0.6, 0.5, 0.7);

    #[test]
    fn x_state_maximally_mixed() {
        let rho = make_x_state(XStateParams::new(0.0, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert!(rho
            .matrix()
            .max_abs_diff(&ComplexMatrix::identity(4).scale_real(0.25))
            < 1e-15);
    }

    #[test]
    fn x_state_bell_parameters_give_pure_phi_plus() {
        let rho = make_x_state(XStateParams::new(1.0, -1.0, 1.0, 0.0, 0.0)).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-14);
        assert!(rho.matrix().max_abs_diff(make_bell(0).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn x_state_fig2_entries() {
        let m = make_x_state(FIG2).unwrap().into_matrix();
        // party 0 slow: |01> carries (1 - c3 - c4 + c5)/4
        let diag = m.diagonal_real();
        let expected = [0.7, 0.15, 0.05, 0.1];
        for (a, b) in diag.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{diag:?}");
        }
        assert!((m[(0, 3)].re - 0.1).abs() < 1e-15);
        assert!((m[(3, 0)].re - 0.1).abs() < 1e-15);
        assert!(m[(1, 2)].norm() < 1e-15);
    }

    #[test]
    fn x_state_positivity_error_reports_eigenvalue() {
        match make_x_state(XStateParams::new(1.0, 1.0, 1.0, 0.0, 0.0)) {
            Err(Error::PositivityViolated { eigenvalue }) => assert!((eigenvalue + 0.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extract_examples() {
        let mixed = DensityOperator::qubits(ComplexMatrix::identity(4).scale_real(0.25)).unwrap();
        assert_eq!(extract_x_params(&mixed).unwrap().to_array(), [0.0; 5]);
        let p = extract_x_params(&make_bell(0).unwrap()).unwrap();
        for (a, b) in p.to_array().iter().zip([1.0, -1.0, 1.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn extract_rejects_non_x_state() {
        let s = FRAC_1_SQRT_2;
        let plus_zero = ComplexMatrix::outer(&[C64::new(s, 0.0), ZERO, C64::new(s, 0.0), ZERO]);
        let rho = DensityOperator::qubits(plus_zero).unwrap();
        assert!(matches!(extract_x_params(&rho), Err(Error::NotXForm { .. })));
    }

    #[test]
    fn bell_quartet_parameters() {
        let expected = [
            [1.0, -1.0, 1.0],
            [-1.0, 1.0, 1.0],
            [1.0, 1.0, -1.0],
            [-1.0, -1.0, -1.0],
        ];
        for (i, e) in expected.iter().enumerate() {
            let rho = make_bell(i).unwrap();
            assert!((rho.purity() - 1.0).abs() < 1e-14);
            let p = extract_x_params(&rho).unwrap();
            assert!((p.c1 - e[0]).abs() < 1e-14);
            assert!((p.c2 - e[1]).abs() < 1e-14);
            assert!((p.c3 - e[2]).abs() < 1e-14);
            assert!(p.c4.abs() < 1e-14 && p.c5.abs() < 1e-14);
        }
        assert!(make_bell(4).is_err());
    }

    #[test]
    fn ghz_examples() {
        assert!(make_ghz(2).unwrap().matrix().max_abs_diff(make_bell(0).unwrap().matrix()) < 1e-15);
        let g = make_ghz(3).unwrap();
        let nonzero: Vec<(usize, usize)> = (0..8)
            .flat_map(|i| (0..8).map(move |j| (i, j)))
            .filter(|&(i, j)| g.matrix()[(i, j)].norm() > 0.0)
            .collect();
        assert_eq!(nonzero, vec![(0, 0), (0, 7), (7, 0), (7, 7)]);
        assert!((g.purity() - 1.0).abs() < 1e-15);
        for p in 0..3 {
            let m = partial_trace(g.matrix(), g.party_dims(), &[p]).unwrap();
            assert!(m.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
        }
        assert!(make_ghz(1).is_err());
        assert!(make_ghz(7).is_err());
    }

    #[test]
    fn marginal_product_examples() {
        let pi = marginal_product(&make_bell(0).unwrap());
        assert!(pi.matrix().max_abs_diff(&ComplexMatrix::identity(4).scale_real(0.25)) < 1e-15);
        for n in 2..=5 {
            let pi = marginal_product(&make_ghz(n).unwrap());
            let d = 1 << n;
            assert!(pi.matrix().max_abs_diff(&ComplexMatrix::identity(d).scale_real(1.0 / d as f64)) < 1e-15);
        }
        let a = ComplexMatrix::from_real_rows(&[vec![0.6, 0.1], vec![0.1, 0.4]]).unwrap();
        let b = ComplexMatrix::from_real_diag(&[0.9, 0.1]);
        let prod = DensityOperator::qubits(kron(&a, &b)).unwrap();
        assert!(marginal_product(&prod).matrix().max_abs_diff(prod.matrix()) < 1e-15);
    }

    #[test]
    fn measurement_examples() {
        let bell = make_bell(0).unwrap();
        let same = apply_projective_measurement(&bell, &MeasurementSpec::unmeasured(2)).unwrap();
        assert_eq!(same, bell);

        let m = MeasurementSpec::on(2, &[(0, BlochDirection::Z)]).unwrap();
        let out = apply_projective_measurement(&bell, &m).unwrap();
        assert!(out.matrix().max_abs_diff(&ComplexMatrix::from_real_diag(&[0.5, 0.0, 0.0, 0.5])) < 1e-15);

        let dir = BlochDirection::new(0.3, -0.5, 0.8).unwrap();
        let m = MeasurementSpec::on(2, &[(0, dir), (1, BlochDirection::X)]).unwrap();
        let rho = make_x_state(FIG2).unwrap();
        let once = apply_projective_measurement(&rho, &m).unwrap();
        let twice = apply_projective_measurement(&once, &m).unwrap();
        assert!(once.matrix().max_abs_diff(twice.matrix()) < 1e-12);
    }

    #[test]
    fn measurement_matches_projector_sum() {
        let dir = BlochDirection::new(-0.2, 0.7, 0.4).unwrap();
        let m = MeasurementSpec::on(2, &[(1, dir)]).unwrap();
        let rho = make_x_state(FIG2).unwrap();
        let direct = m
            .projectors()
            .iter()
            .fold(ComplexMatrix::zeros(4), |acc, p| &acc + &p.matmul(rho.matrix()).matmul(p));
        let fast = apply_projective_measurement(&rho, &m).unwrap();
        assert!(direct.max_abs_diff(fast.matrix()) < 1e-15);
    }

    #[test]
    fn measured_state_commutes_with_projectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let rho = make_x_state(XStateParams::random(&mut rng)).unwrap();
            let d0 = BlochDirection::new(rng.gen(), rng.gen(), rng.gen::<f64>() - 0.5).unwrap();
            let m = MeasurementSpec::on(2, &[(0, d0)]).unwrap();
            let out = apply_projective_measurement(&rho, &m).unwrap();
            for p in m.projectors() {
                let comm = p.commutator(out.matrix());
                // [P, Mρ] is anti-Hermitian; i[P, Mρ] is Hermitian
                let h = comm.scale(C64::new(0.0, 1.0));
                assert!(trace_norm_hermitian(&h).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn canonical_direction_in_upper_hemisphere() {
        let d = BlochDirection::new(0.1, 0.2, -0.9).unwrap().canonical();
        assert!(d.components()[2] > 0.0);
        let e = BlochDirection::new(-1.0, 0.0, 0.0).unwrap().canonical();
        assert_eq!(e, BlochDirection::X);
        assert!(BlochDirection::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn diagnostics_examples() {
        let mixed = DensityOperator::qubits(ComplexMatrix::identity(4).scale_real(0.25)).unwrap();
        let d = validate_density(&mixed);
        assert_eq!(d.trace_deviation, 0.0);
        assert!((d.min_eigenvalue - 0.25).abs() < 1e-15);
        assert!((d.purity - 0.25).abs() < 1e-15);
        assert!((validate_density(&make_bell(0).unwrap()).purity - 1.0).abs() < 1e-14);
        let fig2 = validate_density(&make_x_state(FIG2).unwrap());
        assert!(fig2.min_eigenvalue >= 0.0);
        // blocks (0.7, 0.1; off 0.1) and (0.15, 0.05; off 0): smallest is 0.05
        assert!((fig2.min_eigenvalue - 0.05).abs() < 1e-14);
    }

    #[test]
    fn constructors_pass_validation() {
        let tol = ToleranceConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            assert!(validate_density(&make_x_state(XStateParams::random(&mut rng)).unwrap()).is_valid(&tol));
        }
        for n in 2..=6 {
            assert!(validate_density(&make_ghz(n).unwrap()).is_valid(&tol));
        }
        for i in 0..4 {
            assert!(validate_density(&make_bell(i).unwrap()).is_valid(&tol));
        }
    }
}
