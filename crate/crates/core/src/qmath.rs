//! Dense complex matrix kernel.
//!
//! Matrices are small (at most 64×64, six qubits) and stored row-major.
//! Tensor products use the convention that party 0 is the slowest-varying
//! index: in `kron(a, b)` the row index is `i_a * dim_b + i_b`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

const MAX_JACOBI_SWEEPS: usize = 100;

/// Numerical tolerances shared by the validation routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub hermiticity_tol: f64,
    pub positivity_tol: f64,
    pub trace_tol: f64,
    pub increment_floor: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            hermiticity_tol: 1e-10,
            positivity_tol: 1e-9,
            trace_tol: 1e-8,
            increment_floor: 1e-10,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("hermiticity_tol", self.hermiticity_tol),
            ("positivity_tol", self.positivity_tol),
            ("trace_tol", self.trace_tol),
            ("increment_floor", self.increment_floor),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange {
                    what: name,
                    value: v.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Square complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        ComplexMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = C64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries; fails unless `entries.len()` is a square.
    pub fn from_row_major(entries: Vec<C64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != entries.len() {
            return Err(Error::InvalidParameter(format!(
                "{} entries do not form a square matrix",
                entries.len()
            )));
        }
        Ok(ComplexMatrix { dim, data: entries })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("rows do not form a square matrix".into()));
        }
        Ok(Self::from_fn(dim, |i, j| C64::new(rows[i][j], 0.0)))
    }

    /// Projector |psi><psi| from a state vector (not normalized here).
    pub fn outer(psi: &[C64]) -> Self {
        Self::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn add_scaled_assign(&mut self, s: C64, other: &ComplexMatrix) {
        assert_eq!(self.dim, other.dim);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        ComplexMatrix { dim: n, data: out }
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &ComplexMatrix) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    /// `{self, other}`
    pub fn anticommutator(&self, other: &ComplexMatrix) -> Self {
        &self.matmul(other) + &other.matmul(self)
    }

    /// max |M_ij - conj(M_ji)|
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// (M + M^dagger) / 2
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Pauli matrix by index: 0 = identity, 1 = x, 2 = y, 3 = z.
pub fn pauli(k: usize) -> ComplexMatrix {
    let e = |a: C64, b: C64, c: C64, d: C64| ComplexMatrix {
        dim: 2,
        data: vec![a, b, c, d],
    };
    match k {
        0 => e(ONE, ZERO, ZERO, ONE),
        1 => e(ZERO, ONE, ONE, ZERO),
        2 => e(ZERO, -I, I, ZERO),
        3 => e(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index {k} out of range"),
    }
}

/// Kronecker product with `a` as the slow index.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (da, db) = (a.dim, b.dim);
    let d = da * db;
    let mut out = ComplexMatrix::zeros(d);
    for ia in 0..da {
        for ja in 0..da {
            let x = a[(ia, ja)];
            if x == ZERO {
                continue;
            }
            for ib in 0..db {
                for jb in 0..db {
                    out[(ia * db + ib, ja * db + jb)] = x * b[(ib, jb)];
                }
            }
        }
    }
    out
}

pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    let mut it = factors.into_iter();
    let first = it.next().expect("kron_all needs at least one factor").clone();
    it.fold(first, |acc, m| kron(&acc, m))
}

/// Lifts a single-party operator to the full space: I ⊗ .. ⊗ op ⊗ .. ⊗ I.
pub fn embed_local(op: &ComplexMatrix, party: usize, party_dims: &[usize]) -> Result<ComplexMatrix> {
    if party >= party_dims.len() {
        return Err(Error::InvalidParty {
            index: party,
            parties: party_dims.len(),
        });
    }
    if op.dim != party_dims[party] {
        return Err(Error::DimensionMismatch {
            expected: party_dims[party],
            got: op.dim,
        });
    }
    let left: usize = party_dims[..party].iter().product();
    let right: usize = party_dims[party + 1..].iter().product();
    let mut m = op.clone();
    if left > 1 {
        m = kron(&ComplexMatrix::identity(left), &m);
    }
    if right > 1 {
        m = kron(&m, &ComplexMatrix::identity(right));
    }
    Ok(m)
}

fn check_factorization(dim: usize, party_dims: &[usize]) -> Result<()> {
    let prod: usize = party_dims.iter().product();
    if party_dims.is_empty() || party_dims.contains(&0) || prod != dim {
        return Err(Error::BadFactorization {
            party_dims: party_dims.to_vec(),
            dim,
        });
    }
    Ok(())
}

/// Reduced matrix over the `keep` parties (0-based), in their original order.
pub fn partial_trace(m: &ComplexMatrix, party_dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    check_factorization(m.dim, party_dims)?;
    let n = party_dims.len();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() {
        return Err(Error::InvalidParameter("partial_trace: keep set is empty".into()));
    }
    if let Some(&bad) = kept.iter().find(|&&p| p >= n) {
        return Err(Error::InvalidParty { index: bad, parties: n });
    }
    let is_kept: Vec<bool> = (0..n).map(|p| kept.contains(&p)).collect();

    // digit decomposition helpers
    let digits = |mut idx: usize| -> Vec<usize> {
        let mut d = vec![0; n];
        for p in (0..n).rev() {
            d[p] = idx % party_dims[p];
            idx /= party_dims[p];
        }
        d
    };
    let split = |idx: usize| -> (usize, usize) {
        let d = digits(idx);
        let (mut k, mut t) = (0usize, 0usize);
        for p in 0..n {
            if is_kept[p] {
                k = k * party_dims[p] + d[p];
            } else {
                t = t * party_dims[p] + d[p];
            }
        }
        (k, t)
    };

    let red_dim: usize = kept.iter().map(|&p| party_dims[p]).product();
    let parts: Vec<(usize, usize)> = (0..m.dim).map(split).collect();
    let mut out = ComplexMatrix::zeros(red_dim);
    for i in 0..m.dim {
        let (ki, ti) = parts[i];
        for j in 0..m.dim {
            let (kj, tj) = parts[j];
            if ti == tj {
                out[(ki, kj)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    let tol = ToleranceConfig::default().hermiticity_tol;
    let deviation = m.hermiticity_deviation();
    if !(deviation <= tol) {
        return Err(Error::HermiticityViolated { deviation });
    }
    Ok(())
}

/// Cyclic complex Jacobi diagonalization of a Hermitian matrix.
///
/// Returns unsorted eigenvalues and, when requested, the eigenvector matrix
/// (eigenvectors as columns).
fn jacobi(m: &ComplexMatrix, want_vectors: bool) -> (Vec<f64>, Option<ComplexMatrix>) {
    let n = m.dim;
    let mut a = m.hermitian_part();
    let mut v = want_vectors.then(|| ComplexMatrix::identity(n));
    if n == 1 {
        return (vec![a[(0, 0)].re], v);
    }
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0;
        let mut total = 0.0;
        for p in 0..n {
            total += a[(p, p)].norm_sqr();
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        total += 2.0 * off;
        if off == 0.0 || off <= 1e-32 * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let abs = apq.norm();
                if abs == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase = apq / abs;
                let theta = (aqq - app) / (2.0 * abs);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, e^{-i phi}) * [[c, s], [-s, c]] restricted to (p, q)
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(app - t * abs, 0.0);
                a[(q, q)] = C64::new(aqq + t * abs, 0.0);
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * g_pp + vkq * g_qp;
                        v[(k, q)] = vkp * g_pq + vkq * g_qq;
                    }
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)].re).collect(), v)
}

/// Real eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    let (mut vals, _) = jacobi(m, false);
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Eigenvalues (ascending) and matching eigenvectors stored as columns.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    check_hermitian(m)?;
    let (vals, vecs) = jacobi(m, true);
    let vecs = vecs.expect("vectors requested");
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let sorted_vals = order.iter().map(|&k| vals[k]).collect();
    let sorted_vecs = ComplexMatrix::from_fn(m.dim, |i, j| vecs[(i, order[j])]);
    Ok((sorted_vals, sorted_vecs))
}

/// Schatten-1 norm of a Hermitian matrix: the sum of absolute eigenvalues.
pub fn trace_norm_hermitian(m: &ComplexMatrix) -> Result<f64> {
    check_hermitian(m)?;
    let (vals, _) = jacobi(m, false);
    let max = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max <= 1e-12 {
        return Ok(0.0);
    }
    Ok(vals.iter().map(|v| v.abs()).sum())
}

/// Trace norm without the Hermiticity check; the Hermitian part is used.
pub(crate) fn trace_norm_unchecked(m: &ComplexMatrix) -> f64 {
    let (vals, _) = jacobi(m, false);
    vals.iter().map(|v| v.abs()).sum()
}

/// exp(-i * scale * H) for Hermitian `h`.
pub fn unitary_from_hermitian(h: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    let (vals, vecs) = hermitian_eigen(h)?;
    let n = h.dim;
    let phases: Vec<C64> = vals.iter().map(|&l| (-I * (l * scale)).exp()).collect();
    Ok(ComplexMatrix::from_fn(n, |i, j| {
        (0..n).map(|k| vecs[(i, k)] * phases[k] * vecs[(j, k)].conj()).sum()
    }))
}
