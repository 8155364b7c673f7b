//! Quantum random variables and the quantum expectation.
//!
//! For a POVM with atoms `h_j` the expectation of `ψ` is the symmetrized
//! average `Σ_j h_j^{1/2} ψ(x_j) h_j^{1/2}`. Viewed as a map on constant
//! random variables it is a unital quantum channel `E_ν`; this module also
//! carries the matrix representation of that channel, its Choi matrix,
//! fixed-point algebra and Cesàro ergodic projection.

use crate::error::{QprobError, Result};
use crate::herm::{
    apply_spectral_function, spectral_decompose, HermitianMatrix, Interval, SpectralDecomposition, Tolerances,
};
use crate::matrix::{Matrix, C64};
use crate::measure::{dnu_dmu, induced_mu, Partition, QuantumMeasure, SampleSpace};

/// Hermitian-valued function on a finite sample space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumRandomVariable {
    space: SampleSpace,
    dim: usize,
    values: Vec<HermitianMatrix>,
}

impl QuantumRandomVariable {
    pub fn new(space: SampleSpace, values: Vec<HermitianMatrix>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(QprobError::Dimension(format!("{} values for {} sample points", values.len(), space.len())));
        }
        let dim = values[0].dim();
        if let Some(bad) = values.iter().position(|v| v.dim() != dim) {
            return Err(QprobError::Dimension(format!(
                "value at {:?} has dimension {}, expected {dim}",
                space.label(bad),
                values[bad].dim()
            )));
        }
        Ok(Self { space, dim, values })
    }

    pub(crate) fn from_parts(space: SampleSpace, dim: usize, values: Vec<HermitianMatrix>) -> Self {
        debug_assert_eq!(values.len(), space.len());
        Self { space, dim, values }
    }

    pub fn constant(space: SampleSpace, value: HermitianMatrix) -> Self {
        let dim = value.dim();
        let values = vec![value; space.len()];
        Self { space, dim, values }
    }

    /// Block-constant variable taking `block_values[b]` on block `b`.
    pub fn from_blocks(space: SampleSpace, partition: &Partition, block_values: &[HermitianMatrix]) -> Result<Self> {
        if partition.num_points() != space.len() || block_values.len() != partition.num_blocks() {
            return Err(QprobError::Dimension("block values do not match the partition".into()));
        }
        let values = partition.block_of().into_iter().map(|b| block_values[b].clone()).collect();
        Self::new(space, values)
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> &HermitianMatrix {
        &self.values[i]
    }

    pub fn values(&self) -> &[HermitianMatrix] {
        &self.values
    }

    /// Pointwise map.
    pub fn try_map<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&HermitianMatrix) -> Result<HermitianMatrix>,
    {
        let values = self.values.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.space.clone(), values)
    }

    /// `a ψ₁ + b ψ₂` pointwise.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x.scale(a).add(&y.scale(b))).collect();
        Ok(Self::from_parts(self.space.clone(), self.dim, values))
    }

    /// Same variable with points reordered (`perm[k]` becomes point `k`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let space = SampleSpace::new(perm.iter().map(|&i| self.space.label(i).to_string()))?;
        Self::new(space, perm.iter().map(|&i| self.values[i].clone()).collect())
    }

    /// Every value PSD within `rank_rel` slack.
    pub fn is_psd_valued(&self, tol: &Tolerances) -> Result<bool> {
        for v in &self.values {
            let dec = spectral_decompose(v)?;
            let min = *dec.eigenvalues.last().expect("dim >= 1");
            if min < -tol.rank_rel * dec.max_abs_eigenvalue() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.space != other.space {
            return Err(QprobError::Dimension("random variables live on different spaces or dimensions".into()));
        }
        Ok(())
    }

    pub(crate) fn check_against(&self, nu: &QuantumMeasure) -> Result<()> {
        if self.dim != nu.dim() {
            return Err(QprobError::Dimension(format!(
                "random variable has dimension {}, measure {}",
                self.dim,
                nu.dim()
            )));
        }
        if &self.space != nu.space() {
            return Err(QprobError::Dimension("random variable and measure live on different sample spaces".into()));
        }
        Ok(())
    }
}

/// Positive trace-one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(matrix: HermitianMatrix, tol: &Tolerances) -> Result<Self> {
        if (matrix.trace() - 1.0).abs() > tol.residual {
            return Err(QprobError::Precondition(format!("density matrix has trace {}", matrix.trace())));
        }
        let min = matrix.min_eigenvalue()?;
        if min < -tol.rank_rel {
            return Err(QprobError::NotPsd { min_eigenvalue: min, threshold: tol.rank_rel });
        }
        Ok(Self(matrix))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(HermitianMatrix::scalar(d, 1.0 / d as f64))
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.0
    }
}

/// `E_ν[ψ] = Σ_j h_j^{1/2} ψ(x_j) h_j^{1/2}`.
pub fn expectation(psi: &QuantumRandomVariable, nu: &QuantumMeasure) -> Result<HermitianMatrix> {
    integral_over(psi, nu, &(0..nu.len()).collect::<Vec<_>>())
}

/// `∫_E ψ dν` over the points listed in `indices`.
pub fn integral_over(psi: &QuantumRandomVariable, nu: &QuantumMeasure, indices: &[usize]) -> Result<HermitianMatrix> {
    psi.check_against(nu)?;
    let mut acc = Matrix::zeros(nu.dim());
    for &i in indices {
        if i >= nu.len() {
            return Err(QprobError::Index(format!("point index {i} out of range for {} points", nu.len())));
        }
        let r = nu.sqrt_atom(i);
        acc += &(&(r.matrix() * psi.value(i).matrix()) * r.matrix());
    }
    Ok(HermitianMatrix::symmetrized(&acc))
}

/// `Σ_j h_j^{1/2} T_j h_j^{1/2}` for arbitrary (not necessarily Hermitian)
/// operator values `T_j`.
pub fn expectation_of_operators(values: &[Matrix], nu: &QuantumMeasure) -> Result<Matrix> {
    if values.len() != nu.len() {
        return Err(QprobError::Dimension(format!("{} values for {} sample points", values.len(), nu.len())));
    }
    let mut acc = Matrix::zeros(nu.dim());
    for (i, t) in values.iter().enumerate() {
        if t.dim() != nu.dim() {
            return Err(QprobError::Dimension("operator value has the wrong dimension".into()));
        }
        let r = nu.sqrt_atom(i);
        acc += &(&(r.matrix() * t) * r.matrix());
    }
    Ok(acc)
}

/// Scalar-side evaluation of `tr(ρ E_ν[ψ])` through the induced classical
/// measure: `Σ_x μ(x) tr(ρ D(x)^{1/2} ψ(x) D(x)^{1/2})` with `D = dν/dμ`.
pub fn pairing_oracle(
    psi: &QuantumRandomVariable,
    nu: &QuantumMeasure,
    rho: &DensityMatrix,
    tol: &Tolerances,
) -> Result<f64> {
    psi.check_against(nu)?;
    let mu = induced_mu(nu);
    let density = dnu_dmu(nu);
    let mut total = 0.0;
    for i in 0..nu.len() {
        if mu.weights[i] == 0.0 {
            continue;
        }
        let root = crate::herm::psd_sqrt(density.value(i), tol)?;
        let integrand = psi.value(i).sandwich(&root);
        total += mu.weights[i] * rho.matrix().mul(&integrand).trace().re;
    }
    Ok(total)
}

/// Whether `ψ` is constant (within `tol.residual` in Frobenius norm) on
/// every block of `partition`.
pub fn is_measurable(psi: &QuantumRandomVariable, partition: &Partition, tol: &Tolerances) -> Result<bool> {
    if partition.num_points() != psi.len() {
        return Err(QprobError::InvalidPartition(format!(
            "partition covers {} points, variable has {}",
            partition.num_points(),
            psi.len()
        )));
    }
    Ok(partition.blocks().iter().all(|b| {
        let first = psi.value(b[0]);
        b.iter().all(|&i| psi.value(i).dist(first) <= tol.residual)
    }))
}

/// Pushforward of `ν` under `ψ`: a finitely supported POVM on operator space.
#[derive(Debug, Clone)]
pub struct Law {
    /// Distinct values of `ψ` (first representative of each fiber).
    pub support: Vec<HermitianMatrix>,
    /// `m_i = ν(ψ^{-1}(a_i))`.
    pub masses: Vec<HermitianMatrix>,
    /// Sample points in each fiber.
    pub fibers: Vec<Vec<usize>>,
    pub grouping_tol: f64,
}

impl Law {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Every fiber is a single point.
    pub fn is_injective(&self) -> bool {
        self.fibers.iter().all(|f| f.len() == 1)
    }

    /// Induced scalar law `ℓ(a_i) = tr(m_i)/d`.
    pub fn scalar_masses(&self) -> Vec<f64> {
        self.masses.iter().map(|m| m.trace() / m.dim() as f64).collect()
    }

    pub fn total_mass(&self) -> HermitianMatrix {
        let mut s = HermitianMatrix::zeros(self.masses[0].dim());
        for m in &self.masses {
            s.add_assign(m);
        }
        s
    }
}

pub const DEFAULT_GROUPING_TOL: f64 = 1e-9;

/// Groups sample points by value of `ψ` and sums the atoms over each fiber.
pub fn law(psi: &QuantumRandomVariable, nu: &QuantumMeasure, grouping_tol: f64) -> Result<Law> {
    psi.check_against(nu)?;
    let mut support: Vec<HermitianMatrix> = Vec::new();
    let mut fibers: Vec<Vec<usize>> = Vec::new();
    for (i, v) in psi.values().iter().enumerate() {
        match support.iter().position(|a| a.dist(v) <= grouping_tol) {
            Some(g) => fibers[g].push(i),
            None => {
                support.push(v.clone());
                fibers.push(vec![i]);
            }
        }
    }
    let masses = fibers.iter().map(|f| nu.mass(f)).collect::<Result<Vec<_>>>()?;
    Ok(Law { support, masses, fibers, grouping_tol })
}

/// `∫ a dm(a) = Σ_i m_i^{1/2} a_i m_i^{1/2}`.
pub fn expectation_via_law(law: &Law, tol: &Tolerances) -> Result<HermitianMatrix> {
    let d = law
        .support
        .first()
        .map(|a| a.dim())
        .ok_or_else(|| QprobError::InvalidMeasure("law has empty support".into()))?;
    let mut acc = HermitianMatrix::zeros(d);
    for (a, m) in law.support.iter().zip(&law.masses) {
        let root = crate::herm::psd_sqrt(m, tol)?;
        acc.add_assign(&a.sandwich(&root));
    }
    Ok(acc)
}

/// `E_ν(z) = Σ_j h_j^{1/2} z h_j^{1/2}`, the expectation of the constant `z`.
pub fn channel_apply(nu: &QuantumMeasure, z: &Matrix) -> Result<Matrix> {
    nu.require_probability()?;
    if z.dim() != nu.dim() {
        return Err(QprobError::Dimension("operand has the wrong dimension".into()));
    }
    let mut acc = Matrix::zeros(nu.dim());
    for i in 0..nu.len() {
        let r = nu.sqrt_atom(i).matrix();
        acc += &(&(r * z) * r);
    }
    Ok(acc)
}

/// Linear map on `d x d` matrices, stored as a `d² x d²` matrix acting on
/// row-major vectorizations.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSuperMap {
    dim: usize,
    action: Matrix,
}

impl LinearSuperMap {
    pub fn new(dim: usize, action: Matrix) -> Result<Self> {
        if action.dim() != dim * dim {
            return Err(QprobError::Dimension(format!(
                "super-map on {dim}x{dim} matrices needs a {0}x{0} action",
                dim * dim
            )));
        }
        Ok(Self { dim, action })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, action: Matrix::identity(dim * dim) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn action(&self) -> &Matrix {
        &self.action
    }

    pub fn apply(&self, z: &Matrix) -> Matrix {
        let v = self.action.mul_vec(&z.vectorize());
        Matrix::unvectorize(self.dim, &v).expect("dimension fixed by construction")
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &LinearSuperMap) -> LinearSuperMap {
        LinearSuperMap { dim: self.dim, action: &self.action * &other.action }
    }

    pub fn dist(&self, other: &LinearSuperMap) -> f64 {
        self.action.dist(&other.action)
    }
}

/// Matrix of `z ↦ E_ν(z)`: `Σ_j h_j^{1/2} ⊗ (h_j^{1/2})^T`.
pub fn channel_as_supermap(nu: &QuantumMeasure) -> Result<LinearSuperMap> {
    nu.require_probability()?;
    let d = nu.dim();
    let mut action = Matrix::zeros(d * d);
    for i in 0..nu.len() {
        let r = nu.sqrt_atom(i).matrix();
        action += &r.kron(&r.transpose());
    }
    LinearSuperMap::new(d, action)
}

/// Choi matrix `Σ_{ij} e_ij ⊗ E_ν(e_ij)`.
pub fn choi_matrix(nu: &QuantumMeasure) -> Result<HermitianMatrix> {
    nu.require_probability()?;
    let d = nu.dim();
    let mut choi = Matrix::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut e = Matrix::zeros(d);
            e[(i, j)] = C64::new(1.0, 0.0);
            let image = channel_apply(nu, &e)?;
            for k in 0..d {
                for l in 0..d {
                    choi[(i * d + k, j * d + l)] = image[(k, l)];
                }
            }
        }
    }
    Ok(HermitianMatrix::symmetrized(&choi))
}

/// Hilbert-Schmidt orthonormal Hermitian basis of `{z : E_ν(z) = z}`.
///
/// `E_ν` is selfadjoint for the Hilbert-Schmidt inner product, so the
/// supermap is a Hermitian matrix and its singular values are the absolute
/// eigenvalues; the fixed space is the eigenspace of `1` (eigenvalues of
/// `S - 1` below `rank_rel · max(1, ||S - 1||)` in magnitude).
pub fn fixed_points(nu: &QuantumMeasure, tol: &Tolerances) -> Result<Vec<HermitianMatrix>> {
    let map = channel_as_supermap(nu)?;
    let d = nu.dim();
    let shifted = HermitianMatrix::symmetrized(&(map.action() - &Matrix::identity(d * d)));
    let dec = spectral_decompose(&shifted)?;
    let cutoff = tol.rank_rel * dec.max_abs_eigenvalue().max(1.0);
    let null: Vec<usize> = (0..d * d).filter(|&k| dec.eigenvalues[k].abs() <= cutoff).collect();
    Ok(hermitian_basis_of_span(&dec, &null, d))
}

/// Orthonormal Hermitian basis for the span of the selected eigenvectors,
/// assuming that span is closed under adjoints.
fn hermitian_basis_of_span(dec: &SpectralDecomposition, cols: &[usize], d: usize) -> Vec<HermitianMatrix> {
    let mut candidates = Vec::with_capacity(2 * cols.len());
    for &k in cols {
        let v: Vec<C64> = (0..d * d).map(|r| dec.eigenvectors[(r, k)]).collect();
        let f = Matrix::from_vec(d, v).expect("square");
        let fa = f.adjoint();
        candidates.push(HermitianMatrix::symmetrized(&(&f + &fa).scale_real(0.5)));
        let skew = (&f - &fa).scale(C64::new(0.0, -0.5));
        candidates.push(HermitianMatrix::symmetrized(&skew));
    }
    let mut basis: Vec<HermitianMatrix> = Vec::with_capacity(cols.len());
    for c in candidates {
        if basis.len() == cols.len() {
            break;
        }
        let mut v = c;
        for _ in 0..2 {
            for b in &basis {
                let proj = b.matrix().hs_inner(v.matrix()).re;
                v = v.sub(&b.scale(proj));
            }
        }
        let norm = v.frobenius_norm();
        if norm > 1e-6 {
            basis.push(v.scale(1.0 / norm));
        }
    }
    basis
}

/// Result of the Cesàro averaging.
#[derive(Debug, Clone)]
pub struct CesaroProjection {
    pub map: LinearSuperMap,
    /// Averaging length `N` of the returned iterate.
    pub terms: u64,
    /// `||A_N - A_{N/2}||_F` at termination.
    pub last_gap: f64,
}

/// Limit of `A_N = (1/N) Σ_{j<N} E_ν^j`, taken along `N = 2^k` with
/// `A_{2N} = (A_N + E_ν^N A_N)/2` until successive iterates agree within
/// `tol.residual` in Frobenius norm.
///
/// The supermap is Hermitian, so the recurrence runs in its eigenbasis.
/// Eigenvalues within roundoff of `±1` are snapped to `±1`: a unit
/// eigenvalue computed as `1 ± ε` drifts like `(1 ± ε)^N`, and that drift
/// overtakes the `1/N` convergence of the other modes near `N ~ ε^{-1/2}`,
/// i.e. right at the default `1e-8` residual.
pub fn cesaro_projection(nu: &QuantumMeasure, max_terms: u64, tol: &Tolerances) -> Result<CesaroProjection> {
    let e = channel_as_supermap(nu)?;
    let d = nu.dim();
    let dec = spectral_decompose(&HermitianMatrix::symmetrized(e.action()))?;
    let lambda: Vec<f64> = dec
        .eigenvalues
        .iter()
        .map(|&l| if (l.abs() - 1.0).abs() <= UNIT_SNAP { l.signum() } else { l.clamp(-1.0, 1.0) })
        .collect();
    let mut power = lambda.clone();
    let mut average = vec![1.0; lambda.len()];
    let mut terms: u64 = 1;
    let mut last_gap = f64::INFINITY;
    while terms <= max_terms {
        let next: Vec<f64> = average.iter().zip(&power).map(|(a, p)| 0.5 * a * (1.0 + p)).collect();
        last_gap = next.iter().zip(&average).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        average = next;
        terms *= 2;
        if last_gap <= tol.residual {
            let action = dec.rebuild_with(&average).into_matrix();
            return Ok(CesaroProjection { map: LinearSuperMap::new(d, action)?, terms, last_gap });
        }
        power.iter_mut().for_each(|p| *p *= *p);
    }
    Err(QprobError::Convergence {
        what: "Cesàro average",
        detail: format!("gap {last_gap:e} after {terms} terms (tolerance {:e})", tol.residual),
    })
}

pub const DEFAULT_CESARO_MAX_TERMS: u64 = 1 << 52;

/// Roundoff scale for eigenvalues of a norm-one supermap.
const UNIT_SNAP: f64 = 64.0 * f64::EPSILON;

/// Catalog of operator convex functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorConvex {
    /// `t²` on ℝ.
    Square,
    /// `1/t` on (0, ∞).
    Inverse,
    /// `-log t` on (0, ∞).
    NegLog,
    /// `t log t` on (0, ∞).
    EntropyKernel,
}

impl OperatorConvex {
    pub const ALL: [OperatorConvex; 4] =
        [OperatorConvex::Square, OperatorConvex::Inverse, OperatorConvex::NegLog, OperatorConvex::EntropyKernel];

    pub fn name(self) -> &'static str {
        match self {
            OperatorConvex::Square => "square",
            OperatorConvex::Inverse => "inverse",
            OperatorConvex::NegLog => "neglog",
            OperatorConvex::EntropyKernel => "xlogx",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn eval(self, t: f64) -> f64 {
        match self {
            OperatorConvex::Square => t * t,
            OperatorConvex::Inverse => 1.0 / t,
            OperatorConvex::NegLog => -t.ln(),
            OperatorConvex::EntropyKernel => t * t.ln(),
        }
    }

    /// Whether the closed interval lies inside the natural domain.
    pub fn admits(self, interval: Interval) -> bool {
        interval.lo <= interval.hi
            && match self {
                OperatorConvex::Square => true,
                _ => interval.lo > 0.0,
            }
    }

    /// `ϑ(a)` for `a` with spectrum in `interval`.
    pub fn apply(self, a: &HermitianMatrix, interval: Interval, tol: &Tolerances) -> Result<HermitianMatrix> {
        if !self.admits(interval) {
            return Err(QprobError::Precondition(format!(
                "interval [{}, {}] is not inside the domain of {}",
                interval.lo,
                interval.hi,
                self.name()
            )));
        }
        apply_spectral_function(a, |t| self.eval(t), interval, tol)
    }
}

/// `E_ν[ϑ∘ψ] - ϑ(E_ν[ψ])`; operator convexity predicts a PSD result.
pub fn jensen_gap(
    psi: &QuantumRandomVariable,
    nu: &QuantumMeasure,
    f: OperatorConvex,
    interval: Interval,
    tol: &Tolerances,
) -> Result<HermitianMatrix> {
    nu.require_probability()?;
    let transformed = psi.try_map(|v| f.apply(v, interval, tol))?;
    let lhs = expectation(&transformed, nu)?;
    let rhs = f.apply(&expectation(psi, nu)?, interval, tol)?;
    Ok(lhs.sub(&rhs))
}
