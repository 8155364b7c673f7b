//! Hermitian and positive semidefinite matrices.
//!
//! Everything in the crate that is an effect, a state or the value of a
//! quantum random variable is a [`HermitianMatrix`]. The spectral machinery
//! here (cyclic Jacobi, functional calculus, generalized inverse, geometric
//! mean) is what the probability layers are built on.

use std::fmt;

use crate::error::{QprobError, Result};
use crate::matrix::{Matrix, C64, ZERO};

/// Numerical tolerances shared across the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Relative eigenvalue cutoff for rank decisions (`λ > rank_rel · λ_max`).
    pub rank_rel: f64,
    /// Residual bound for theorem verification.
    pub residual: f64,
    /// Regularization ladder used when probing the singular geometric mean.
    pub gm_eps_ladder: Vec<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rank_rel: 1e-10, residual: 1e-8, gm_eps_ladder: vec![1e-4, 1e-6, 1e-8] }
    }
}

impl Tolerances {
    pub fn with_residual(residual: f64) -> Self {
        Self { residual, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.rank_rel) || !positive(self.residual) {
            return Err(QprobError::Precondition("tolerances must be finite and strictly positive".into()));
        }
        if self.gm_eps_ladder.is_empty() || !self.gm_eps_ladder.iter().all(|&e| positive(e)) {
            return Err(QprobError::Precondition(
                "geometric-mean ladder must be nonempty and strictly positive".into(),
            ));
        }
        if self.gm_eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(QprobError::Precondition("geometric-mean ladder must be strictly decreasing".into()));
        }
        Ok(())
    }
}

/// Closed real interval `[lo, hi]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
    pub const NONNEGATIVE: Interval = Interval { lo: 0.0, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lo - slack && x <= self.hi + slack
    }

    fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }
}

/// A complex Hermitian matrix. Symmetry is exact: the constructor
/// symmetrizes, and every operation that returns one re-symmetrizes.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: Matrix,
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian{:?}", self.inner)
    }
}

/// Returns `(M + M^†) / 2`.
pub fn hermitize(m: &Matrix) -> Result<HermitianMatrix> {
    let n = m.dim();
    if n == 0 {
        return Err(QprobError::Dimension("matrix must be at least 1x1".into()));
    }
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(QprobError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(HermitianMatrix::symmetrized(m))
}

impl HermitianMatrix {
    /// Symmetrizes without validation; internal results are finite by construction.
    pub(crate) fn symmetrized(m: &Matrix) -> Self {
        let n = m.dim();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            out[(i, i)] = C64::new(m[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                out[(i, j)] = z;
                out[(j, i)] = z.conj();
            }
        }
        Self { inner: out }
    }

    /// Hermitian matrix from nested rows; errors on ragged or non-finite input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        hermitize(&Matrix::from_rows(rows)?)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        hermitize(&Matrix::from_real_rows(rows)?)
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "empty diagonal");
        Self { inner: Matrix::from_real_diag(diag) }
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: Matrix::identity(n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { inner: Matrix::zeros(n) }
    }

    pub fn scalar(n: usize, s: f64) -> Self {
        Self { inner: Matrix::identity(n).scale_real(s) }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace().re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    pub fn dist(&self, other: &HermitianMatrix) -> f64 {
        self.inner.dist(&other.inner)
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        Self { inner: &self.inner + &other.inner }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        Self { inner: &self.inner - &other.inner }
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        Self { inner: self.inner.scale_real(s) }
    }

    pub fn add_assign(&mut self, other: &HermitianMatrix) {
        self.inner += &other.inner;
    }

    /// Plain (generally non-Hermitian) product.
    pub fn mul(&self, other: &HermitianMatrix) -> Matrix {
        &self.inner * &other.inner
    }

    /// `s · self · s` for Hermitian `s`, re-symmetrized.
    pub fn sandwich(&self, s: &HermitianMatrix) -> HermitianMatrix {
        Self::symmetrized(&(&(&s.inner * &self.inner) * &s.inner))
    }

    /// `m · self · m^†` for an arbitrary `m`, re-symmetrized.
    pub fn congruence(&self, m: &Matrix) -> HermitianMatrix {
        Self::symmetrized(&m.sandwich(&self.inner))
    }

    /// Whether the two matrices commute within `tol` in Frobenius norm.
    pub fn commutes_with(&self, other: &HermitianMatrix, tol: f64) -> bool {
        self.mul(other).dist(&other.mul(self)) <= tol
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_norm(&self) -> Result<f64> {
        let dec = spectral_decompose(self)?;
        Ok(dec.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*spectral_decompose(self)?.eigenvalues.last().expect("dim >= 1"))
    }
}

/// Eigen-decomposition `A = U diag(λ) U^†` with `λ` sorted descending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Unitary whose columns are the eigenvectors.
    pub eigenvectors: Matrix,
    pub source_dim: usize,
}

impl SpectralDecomposition {
    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max)
    }

    /// `U diag(f(λ)) U^†`.
    pub fn rebuild_with(&self, values: &[f64]) -> HermitianMatrix {
        let n = self.source_dim;
        let u = &self.eigenvectors;
        let mut out = Matrix::zeros(n);
        for (k, &v) in values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for i in 0..n {
                let uik = u[(i, k)] * v;
                for j in 0..n {
                    out[(i, j)] += uik * u[(j, k)].conj();
                }
            }
        }
        HermitianMatrix::symmetrized(&out)
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.rebuild_with(&self.eigenvalues)
    }

    /// Spectral projections grouped by eigenvalue (within `group_tol`),
    /// in descending eigenvalue order.
    pub fn projections(&self, group_tol: f64) -> Vec<(f64, HermitianMatrix)> {
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            match groups.last_mut() {
                Some((rep, idx)) if (*rep - l).abs() <= group_tol => idx.push(k),
                _ => groups.push((l, vec![k])),
            }
        }
        groups
            .into_iter()
            .map(|(l, idx)| {
                let mask: Vec<f64> = (0..self.source_dim).map(|k| if idx.contains(&k) { 1.0 } else { 0.0 }).collect();
                (l, self.rebuild_with(&mask))
            })
            .collect()
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_THRESHOLD: f64 = 1e-14;

/// Cyclic complex Jacobi eigensolver.
pub fn spectral_decompose(a: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let n = a.dim();
    let mut m = a.matrix().clone();
    let mut u = Matrix::identity(n);
    let norm = m.frobenius_norm();
    let threshold = JACOBI_REL_THRESHOLD * norm;

    let off_norm = |m: &Matrix| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = norm == 0.0 || n == 1;
    let mut sweeps = 0;
    while !converged {
        if off_norm(&m) <= threshold {
            converged = true;
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            break;
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                rotate(&mut m, &mut u, p, q);
            }
        }
    }
    if !converged {
        return Err(QprobError::Convergence {
            what: "Jacobi eigensolver",
            detail: format!(
                "off-diagonal norm {:e} after {sweeps} sweeps (threshold {:e}, dim {n})",
                off_norm(&m),
                threshold
            ),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = Matrix::zeros(n);
    for (k, &src) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, k)] = u[(i, src)];
        }
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors, source_dim: n })
}

/// One Jacobi rotation annihilating entry `(p, q)`.
///
/// The phase of `a_pq` is first rotated away, then the real symmetric 2x2
/// rotation is applied; the combined unitary acts on columns/rows `p, q`.
fn rotate(m: &mut Matrix, u: &mut Matrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let w = apq / r;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta.is_infinite() { 0.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let wc = w.conj();

    // J = [[c, s], [-s·conj(w), c·conj(w)]] on (p, q)
    let j_pp = C64::new(c, 0.0);
    let j_pq = C64::new(s, 0.0);
    let j_qp = -wc * s;
    let j_qq = wc * c;

    let n = m.dim();
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * j_pp + akq * j_qp;
        m[(k, q)] = akp * j_pq + akq * j_qq;
    }
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = j_pp.conj() * apk + j_qp.conj() * aqk;
        m[(q, k)] = j_pq.conj() * apk + j_qq.conj() * aqk;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);

    for k in 0..n {
        let ukp = u[(k, p)];
        let ukq = u[(k, q)];
        u[(k, p)] = ukp * j_pp + ukq * j_qp;
        u[(k, q)] = ukp * j_pq + ukq * j_qq;
    }
}

/// `f(A)` via the spectral theorem. Eigenvalues within `rank_rel · ||A||`
/// of the domain are clamped onto it; anything further out is an error.
pub fn apply_spectral_function<F: Fn(f64) -> f64>(
    a: &HermitianMatrix,
    f: F,
    domain: Interval,
    tol: &Tolerances,
) -> Result<HermitianMatrix> {
    let dec = spectral_decompose(a)?;
    apply_to_decomposition(&dec, f, domain, tol)
}

fn apply_to_decomposition<F: Fn(f64) -> f64>(
    dec: &SpectralDecomposition,
    f: F,
    domain: Interval,
    tol: &Tolerances,
) -> Result<HermitianMatrix> {
    let slack = tol.rank_rel * dec.max_abs_eigenvalue();
    let mut values = Vec::with_capacity(dec.eigenvalues.len());
    for &l in &dec.eigenvalues {
        if !domain.contains(l, slack) {
            return Err(QprobError::Domain { eigenvalue: l, lo: domain.lo, hi: domain.hi });
        }
        values.push(f(domain.clamp(l)));
    }
    Ok(dec.rebuild_with(&values))
}

fn check_psd(dec: &SpectralDecomposition, tol: &Tolerances) -> Result<()> {
    let threshold = tol.rank_rel * dec.max_abs_eigenvalue();
    let min = *dec.eigenvalues.last().expect("dim >= 1");
    if min < -threshold {
        return Err(QprobError::NotPsd { min_eigenvalue: min, threshold });
    }
    Ok(())
}

/// Positive square root. Small negative eigenvalues are clamped to zero.
pub fn psd_sqrt(a: &HermitianMatrix, tol: &Tolerances) -> Result<HermitianMatrix> {
    let dec = spectral_decompose(a)?;
    check_psd(&dec, tol)?;
    apply_to_decomposition(&dec, f64::sqrt, Interval::NONNEGATIVE, tol)
}

/// Cutoff below which an eigenvalue of a PSD matrix counts as zero.
fn rank_cutoff(dec: &SpectralDecomposition, tol: &Tolerances) -> f64 {
    tol.rank_rel * dec.eigenvalues.first().copied().unwrap_or(0.0).max(0.0)
}

/// Spectral inverse on the support, zero on the kernel. Zero maps to zero.
pub fn generalized_inverse(a: &HermitianMatrix, tol: &Tolerances) -> Result<HermitianMatrix> {
    let dec = spectral_decompose(a)?;
    check_psd(&dec, tol)?;
    Ok(support_power(&dec, tol, -1.0))
}

/// Projection onto the range of a PSD matrix.
pub fn support_projection(a: &HermitianMatrix, tol: &Tolerances) -> Result<HermitianMatrix> {
    let dec = spectral_decompose(a)?;
    check_psd(&dec, tol)?;
    Ok(support_power(&dec, tol, 0.0))
}

/// `Σ_{λ > cutoff} λ^p P_λ`; with `p = 0` this is the support projection.
fn support_power(dec: &SpectralDecomposition, tol: &Tolerances, p: f64) -> HermitianMatrix {
    support_power_above(dec, rank_cutoff(dec, tol), p)
}

/// [`support_power`] with an explicit absolute cutoff.
fn support_power_above(dec: &SpectralDecomposition, cutoff: f64, p: f64) -> HermitianMatrix {
    let values: Vec<f64> =
        dec.eigenvalues.iter().map(|&l| if l > cutoff && l > 0.0 { l.powf(p) } else { 0.0 }).collect();
    dec.rebuild_with(&values)
}

/// Square root together with the generalized inverse square root, from one
/// decomposition.
pub fn psd_sqrt_and_inv_sqrt(a: &HermitianMatrix, tol: &Tolerances) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let dec = spectral_decompose(a)?;
    check_psd(&dec, tol)?;
    let root = apply_to_decomposition(&dec, f64::sqrt, Interval::NONNEGATIVE, tol)?;
    Ok((root, support_power(&dec, tol, -0.5)))
}

/// Clamp tiny negative eigenvalues of a PSD-in-theory result to zero.
pub fn clamp_psd(a: &HermitianMatrix, tol: &Tolerances) -> Result<HermitianMatrix> {
    let dec = spectral_decompose(a)?;
    check_psd(&dec, tol)?;
    let values: Vec<f64> = dec.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    Ok(dec.rebuild_with(&values))
}

/// Square root of a matrix that is PSD by construction; all negative
/// eigenvalues are roundoff and are clamped without a check.
fn sqrt_clamped(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let dec = spectral_decompose(a)?;
    let values: Vec<f64> = dec.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(dec.rebuild_with(&values))
}

fn clamp_unchecked(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let dec = spectral_decompose(a)?;
    let values: Vec<f64> = dec.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    Ok(dec.rebuild_with(&values))
}

/// Whether `min eig(a) > rank_rel · scale`.
fn is_invertible(dec: &SpectralDecomposition, scale: f64, tol: &Tolerances) -> bool {
    *dec.eigenvalues.last().expect("dim >= 1") > tol.rank_rel * scale
}

/// `a^{1/2} (a^{-1/2} b a^{-1/2})^{1/2} a^{1/2}`, using generalized inverses
/// for `a^{-1/2}`. Exact for invertible `a`, and for singular `a` whenever
/// `b` is supported inside the range of `a`.
fn gm_formula(a_dec: &SpectralDecomposition, b: &HermitianMatrix, tol: &Tolerances) -> Result<HermitianMatrix> {
    let root = apply_to_decomposition(a_dec, f64::sqrt, Interval::NONNEGATIVE, tol)?;
    let inv_root = support_power(a_dec, tol, -0.5);
    let inner = b.sandwich(&inv_root);
    let inner_root = sqrt_clamped(&inner)?;
    clamp_unchecked(&inner_root.sandwich(&root))
}

fn check_same_dim(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(QprobError::Dimension(format!("operands have dimensions {} and {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Operator geometric mean `a # b` of two PSD matrices.
///
/// If either operand is invertible the closed form is evaluated directly
/// (using `a # b = b # a` when only `b` is). When both are singular the
/// regularized limit is evaluated exactly: `a # b` equals `a # s`, where `s`
/// is the shorted operator of `b` onto the range of `a`,
/// `s = P b P - P b (Q b Q)^+ b P` with `P` the support projection of `a`
/// and `Q = 1 - P`. [`eps_ladder`] exposes the regularized iterates for
/// cross-checking.
pub fn geometric_mean(a: &HermitianMatrix, b: &HermitianMatrix, tol: &Tolerances) -> Result<HermitianMatrix> {
    check_same_dim(a, b)?;
    let a_dec = spectral_decompose(a)?;
    let b_dec = spectral_decompose(b)?;
    check_psd(&a_dec, tol)?;
    check_psd(&b_dec, tol)?;
    let scale = a_dec.max_abs_eigenvalue().max(b_dec.max_abs_eigenvalue());
    if scale == 0.0 {
        return Ok(HermitianMatrix::zeros(a.dim()));
    }
    if is_invertible(&a_dec, scale, tol) {
        return gm_formula(&a_dec, b, tol);
    }
    if is_invertible(&b_dec, scale, tol) {
        return gm_formula(&b_dec, a, tol);
    }

    let n = a.dim();
    let p = support_power(&a_dec, tol, 0.0);
    let q = HermitianMatrix::identity(n).sub(&p);
    let b_kernel = b.sandwich(&q);
    let b_kernel_dec = spectral_decompose(&b_kernel)?;
    // the compression can be pure roundoff (e.g. b = a), so rank decisions
    // use the operands' scale rather than its own largest eigenvalue
    let b_kernel_pinv = support_power_above(&b_kernel_dec, tol.rank_rel * scale, -1.0);
    // P b (Q b Q)^+ b P
    let pb = p.mul(b);
    let correction = HermitianMatrix::symmetrized(&(&(&pb * b_kernel_pinv.matrix()) * &pb.adjoint()));
    let shorted = clamp_unchecked(&b.sandwich(&p).sub(&correction))?;
    gm_formula(&a_dec, &shorted, tol)
}

/// `(a + ε 1) # (b + ε 1)`.
pub fn regularized_geometric_mean(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    eps: f64,
    tol: &Tolerances,
) -> Result<HermitianMatrix> {
    check_same_dim(a, b)?;
    let shift = HermitianMatrix::scalar(a.dim(), eps);
    let a_dec = spectral_decompose(&a.add(&shift))?;
    check_psd(&a_dec, tol)?;
    gm_formula(&a_dec, &b.add(&shift), tol)
}

/// Iterates of the regularized geometric mean down the tolerance ladder.
#[derive(Debug, Clone)]
pub struct LadderReport {
    pub eps: Vec<f64>,
    pub values: Vec<HermitianMatrix>,
    /// Frobenius gaps between consecutive iterates.
    pub gaps: Vec<f64>,
}

impl LadderReport {
    pub fn last(&self) -> &HermitianMatrix {
        self.values.last().expect("ladder is nonempty")
    }
}

/// Walks `tol.gm_eps_ladder` and requires the last two iterates to agree
/// within `10 · tol.residual`.
pub fn eps_ladder(a: &HermitianMatrix, b: &HermitianMatrix, tol: &Tolerances) -> Result<LadderReport> {
    tol.validate()?;
    let mut values = Vec::with_capacity(tol.gm_eps_ladder.len());
    for &eps in &tol.gm_eps_ladder {
        values.push(regularized_geometric_mean(a, b, eps, tol)?);
    }
    let gaps: Vec<f64> = values.windows(2).map(|w| w[0].dist(&w[1])).collect();
    let last_gap = gaps.last().copied().unwrap_or(0.0);
    if last_gap > 10.0 * tol.residual {
        return Err(QprobError::Convergence {
            what: "geometric-mean regularization ladder",
            detail: format!("last gap {last_gap:e} exceeds {:e}", 10.0 * tol.residual),
        });
    }
    Ok(LadderReport { eps: tol.gm_eps_ladder.clone(), values, gaps })
}

/// `a ⪯ b` in the Loewner order, i.e. `min eig(b - a) ≥ -slack`.
pub fn loewner_leq(a: &HermitianMatrix, b: &HermitianMatrix, slack: f64) -> Result<bool> {
    check_same_dim(a, b)?;
    Ok(b.sub(a).min_eigenvalue()? >= -slack)
}
