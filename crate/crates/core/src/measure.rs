//! Finite sample spaces, partitions and operator-valued measures.
//!
//! A sub-σ-algebra of the power set of a finite space is always generated
//! by a partition, so [`Partition`] stands in for it throughout.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{QprobError, Result};
use crate::herm::{psd_sqrt, spectral_decompose, support_projection, HermitianMatrix, Tolerances};
use crate::qrv::QuantumRandomVariable;
use crate::random::{gaussian_matrix, random_unitary, rng_from_seed};

/// Labelled finite sample space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSpace {
    labels: Vec<String>,
}

impl SampleSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(QprobError::Dimension("sample space must have at least one point".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(QprobError::Dimension(format!("duplicate sample point label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// Points labelled `x1, ..., xn`.
    pub fn indexed(n: usize) -> Self {
        assert!(n >= 1, "sample space must have at least one point");
        Self { labels: (1..=n).map(|i| format!("x{i}")).collect() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Partition of `{0, .., n-1}` into nonempty disjoint blocks.
///
/// Blocks are kept in a canonical order (each block sorted, blocks ordered
/// by their smallest element).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in &blocks {
            if b.is_empty() {
                return Err(QprobError::InvalidPartition("empty block".into()));
            }
            for &i in b {
                if i >= n {
                    return Err(QprobError::InvalidPartition(format!("index {i} out of range for {n} points")));
                }
                if seen[i] {
                    return Err(QprobError::InvalidPartition(format!("index {i} in two blocks")));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(QprobError::InvalidPartition(format!("index {missing} not covered")));
        }
        let mut blocks = blocks;
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    /// Partition from blocks of labels.
    pub fn from_labels(space: &SampleSpace, blocks: &[Vec<String>]) -> Result<Self> {
        let idx = blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|l| {
                        space
                            .index_of(l)
                            .ok_or_else(|| QprobError::InvalidPartition(format!("unknown point label {l:?}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(space.len(), idx)
    }

    /// The single block `{X}`.
    pub fn trivial(n: usize) -> Self {
        Self { n, blocks: vec![(0..n).collect()] }
    }

    /// All singletons.
    pub fn discrete(n: usize) -> Self {
        Self { n, blocks: (0..n).map(|i| vec![i]).collect() }
    }

    pub fn num_points(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `block_of()[i]` is the block containing point `i`.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                out[i] = b;
            }
        }
        out
    }

    /// Label for the quotient point representing block `b`.
    pub fn block_label(&self, space: &SampleSpace, b: usize) -> String {
        let names: Vec<&str> = self.blocks[b].iter().map(|&i| space.label(i)).collect();
        format!("{{{}}}", names.join(","))
    }
}

/// Operator-valued measure on a finite space: one PSD atom per point.
#[derive(Debug, Clone)]
pub struct QuantumMeasure {
    space: SampleSpace,
    dim: usize,
    atoms: Vec<HermitianMatrix>,
    sqrt_atoms: Vec<HermitianMatrix>,
    is_probability: bool,
}

/// Diagnostic report for a candidate POVM.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Minimum eigenvalue of each atom.
    pub atom_min_eigenvalues: Vec<f64>,
    /// Indices of atoms that fail the PSD test.
    pub non_psd_atoms: Vec<usize>,
    /// Indices of atoms that are zero (spectral norm below the rank cutoff).
    pub zero_atoms: Vec<usize>,
    /// `||Σ atoms - 1||_F`.
    pub identity_deviation: f64,
    /// Largest additivity defect over sampled disjoint subset pairs.
    pub additivity_defect: f64,
    pub total_is_zero: bool,
    pub is_povm: bool,
    pub is_probability: bool,
}

/// Checks the POVM axioms on a list of atoms.
pub fn validate_atoms(atoms: &[HermitianMatrix], tol: &Tolerances) -> Result<ValidationReport> {
    let dim = atoms
        .first()
        .map(|a| a.dim())
        .ok_or_else(|| QprobError::InvalidMeasure("a measure needs at least one atom".into()))?;
    if let Some(bad) = atoms.iter().position(|a| a.dim() != dim) {
        return Err(QprobError::Dimension(format!("atom {bad} has dimension {}, expected {dim}", atoms[bad].dim())));
    }
    let mut total = HermitianMatrix::zeros(dim);
    for a in atoms {
        total.add_assign(a);
    }
    let total_norm = total.spectral_norm()?;
    let scale = atoms.iter().map(|a| a.frobenius_norm()).fold(total_norm, f64::max);
    let mut atom_min_eigenvalues = Vec::with_capacity(atoms.len());
    let mut non_psd_atoms = Vec::new();
    let mut zero_atoms = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        let dec = spectral_decompose(a)?;
        let min = *dec.eigenvalues.last().expect("dim >= 1");
        let max_abs = dec.max_abs_eigenvalue();
        atom_min_eigenvalues.push(min);
        if min < -tol.rank_rel * scale {
            non_psd_atoms.push(i);
        }
        if max_abs <= tol.rank_rel * scale {
            zero_atoms.push(i);
        }
    }
    let identity_deviation = total.dist(&HermitianMatrix::identity(dim));
    let total_is_zero = total_norm <= tol.rank_rel * scale || total_norm == 0.0;

    // Finite additivity on a deterministic sample of disjoint subset pairs.
    // Sums are taken in different association orders so the check is not vacuous.
    let n = atoms.len();
    let mut additivity_defect: f64 = 0.0;
    let mut rng = rng_from_seed(0x5eed ^ n as u64);
    for _ in 0..8.min(1 << n.min(6)) {
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..3u8)).collect();
        let sum_where = |pred: &dyn Fn(u8) -> bool| {
            let mut s = HermitianMatrix::zeros(dim);
            for (a, &l) in atoms.iter().zip(&labels) {
                if pred(l) {
                    s.add_assign(a);
                }
            }
            s
        };
        let e = sum_where(&|l| l == 0);
        let f = sum_where(&|l| l == 1);
        let union = sum_where(&|l| l <= 1);
        additivity_defect = additivity_defect.max(union.dist(&e.add(&f)));
    }

    let is_povm = non_psd_atoms.is_empty() && !total_is_zero;
    Ok(ValidationReport {
        atom_min_eigenvalues,
        non_psd_atoms,
        zero_atoms,
        identity_deviation,
        additivity_defect,
        total_is_zero,
        is_povm,
        is_probability: is_povm && identity_deviation <= tol.residual,
    })
}

impl QuantumMeasure {
    /// Builds a measure; fails if an atom is not PSD or the total mass is zero.
    pub fn new(space: SampleSpace, atoms: Vec<HermitianMatrix>, tol: &Tolerances) -> Result<Self> {
        if atoms.len() != space.len() {
            return Err(QprobError::Dimension(format!("{} atoms for {} sample points", atoms.len(), space.len())));
        }
        let report = validate_atoms(&atoms, tol)?;
        if let Some(&bad) = report.non_psd_atoms.first() {
            return Err(QprobError::InvalidMeasure(format!(
                "atom {:?} is not positive semidefinite (min eigenvalue {:e})",
                space.label(bad),
                report.atom_min_eigenvalues[bad]
            )));
        }
        if report.total_is_zero {
            return Err(QprobError::InvalidMeasure("total mass is zero".into()));
        }
        let dim = atoms[0].dim();
        let sqrt_atoms = atoms.iter().map(|a| psd_sqrt(a, tol)).collect::<Result<Vec<_>>>()?;
        Ok(Self { space, dim, atoms, sqrt_atoms, is_probability: report.is_probability })
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_probability(&self) -> bool {
        self.is_probability
    }

    pub fn atoms(&self) -> &[HermitianMatrix] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &HermitianMatrix {
        &self.atoms[i]
    }

    /// Cached positive square root of atom `i`.
    pub fn sqrt_atom(&self, i: usize) -> &HermitianMatrix {
        &self.sqrt_atoms[i]
    }

    /// `ν(E) = Σ_{x ∈ E} ν({x})`.
    pub fn mass(&self, indices: &[usize]) -> Result<HermitianMatrix> {
        let mut s = HermitianMatrix::zeros(self.dim);
        for &i in indices {
            let a = self
                .atoms
                .get(i)
                .ok_or_else(|| QprobError::Index(format!("point index {i} out of range for {} points", self.len())))?;
            s.add_assign(a);
        }
        Ok(s)
    }

    /// `ν(X)`.
    pub fn total(&self) -> HermitianMatrix {
        let mut s = HermitianMatrix::zeros(self.dim);
        for a in &self.atoms {
            s.add_assign(a);
        }
        s
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<ValidationReport> {
        validate_atoms(&self.atoms, tol)
    }

    /// Same measure with the points reordered: point `k` of the result is
    /// point `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize], tol: &Tolerances) -> Result<Self> {
        let space = SampleSpace::new(perm.iter().map(|&i| self.space.label(i).to_string()))?;
        Self::new(space, perm.iter().map(|&i| self.atoms[i].clone()).collect(), tol)
    }

    pub(crate) fn check_compatible(&self, other: &QuantumMeasure) -> Result<()> {
        if self.dim != other.dim {
            return Err(QprobError::Dimension(format!("measures act on dimensions {} and {}", self.dim, other.dim)));
        }
        if self.space != other.space {
            return Err(QprobError::Dimension("measures live on different sample spaces".into()));
        }
        Ok(())
    }

    pub(crate) fn require_probability(&self) -> Result<()> {
        if !self.is_probability {
            return Err(QprobError::Precondition("a probability measure (ν(X) = 1) is required".into()));
        }
        Ok(())
    }
}

/// Scalar measure on a finite space.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMeasure {
    pub space: SampleSpace,
    pub weights: Vec<f64>,
}

impl ClassicalMeasure {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `μ(x) = tr(ν({x})) / d`.
pub fn induced_mu(nu: &QuantumMeasure) -> ClassicalMeasure {
    let d = nu.dim() as f64;
    ClassicalMeasure {
        space: nu.space().clone(),
        weights: nu.atoms().iter().map(|a| (a.trace() / d).max(0.0)).collect(),
    }
}

/// `dν/dμ(x) = d · ν({x}) / tr(ν({x}))`, zero where the trace vanishes.
pub fn dnu_dmu(nu: &QuantumMeasure) -> QuantumRandomVariable {
    let d = nu.dim() as f64;
    let values = nu
        .atoms()
        .iter()
        .map(|a| {
            let t = a.trace();
            if t > 0.0 {
                a.scale(d / t)
            } else {
                HermitianMatrix::zeros(nu.dim())
            }
        })
        .collect();
    QuantumRandomVariable::from_parts(nu.space().clone(), nu.dim(), values)
}

/// Restriction of `ν` to the σ-algebra generated by `partition`, as a
/// measure on the quotient space whose points are the blocks.
pub fn restrict(nu: &QuantumMeasure, partition: &Partition, tol: &Tolerances) -> Result<QuantumMeasure> {
    if partition.num_points() != nu.len() {
        return Err(QprobError::InvalidPartition(format!(
            "partition covers {} points, measure has {}",
            partition.num_points(),
            nu.len()
        )));
    }
    let space = quotient_space(nu.space(), partition);
    let atoms = partition.blocks().iter().map(|b| nu.mass(b)).collect::<Result<Vec<_>>>()?;
    QuantumMeasure::new(space, atoms, tol)
}

/// Sample space whose points are the blocks of `partition`.
pub fn quotient_space(space: &SampleSpace, partition: &Partition) -> SampleSpace {
    SampleSpace { labels: (0..partition.num_blocks()).map(|b| partition.block_label(space, b)).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuityMode {
    /// Atoms that vanish for the reference measure vanish for the other.
    Weak,
    /// Additionally, every atom's support sits inside the reference atom's support.
    Strong,
}

/// Points at which `nu2 ≪ nu1` fails in the given mode.
pub fn continuity_violations(
    nu2: &QuantumMeasure,
    nu1: &QuantumMeasure,
    mode: ContinuityMode,
    tol: &Tolerances,
) -> Result<Vec<usize>> {
    nu1.check_compatible(nu2)?;
    let cutoff1 = tol.rank_rel * nu1.total().spectral_norm()?;
    let cutoff2 = tol.rank_rel * nu2.total().spectral_norm()?;
    let mut bad = Vec::new();
    for i in 0..nu1.len() {
        let (h1, h2) = (nu1.atom(i), nu2.atom(i));
        let zero1 = h1.spectral_norm()? <= cutoff1;
        let zero2 = h2.spectral_norm()? <= cutoff2;
        if zero1 {
            if !zero2 {
                bad.push(i);
            }
            continue;
        }
        if mode == ContinuityMode::Strong && !zero2 {
            let q1 = support_projection(h1, tol)?;
            let q2 = support_projection(h2, tol)?;
            if q2.sandwich(&q1).dist(&q2) > tol.residual {
                bad.push(i);
            }
        }
    }
    Ok(bad)
}

/// Whether `nu2 ≪ nu1`.
pub fn is_abs_continuous(
    nu2: &QuantumMeasure,
    nu1: &QuantumMeasure,
    mode: ContinuityMode,
    tol: &Tolerances,
) -> Result<bool> {
    Ok(continuity_violations(nu2, nu1, mode, tol)?.is_empty())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovmOptions {
    pub ridge: f64,
}

impl Default for PovmOptions {
    fn default() -> Self {
        Self { ridge: 1e-3 }
    }
}

/// Random probability POVM: `h_j = S^{-1/2} G_j S^{-1/2}` with
/// `G_j = A_j A_j^† + ridge · 1` and `S = Σ G_j`.
pub fn random_povm(space: SampleSpace, d: usize, seed: u64, options: PovmOptions) -> Result<QuantumMeasure> {
    if d == 0 {
        return Err(QprobError::Dimension("dimension must be at least 1".into()));
    }
    let tol = Tolerances::default();
    let mut rng = rng_from_seed(seed);
    let gs: Vec<HermitianMatrix> = (0..space.len())
        .map(|_| {
            let a = gaussian_matrix(&mut rng, d);
            HermitianMatrix::symmetrized(&(&a * &a.adjoint())).add(&HermitianMatrix::scalar(d, options.ridge))
        })
        .collect();
    normalize_to_probability(space, gs, &tol)
}

/// Random probability POVM whose atoms all commute: diagonal in one random
/// basis, with Dirichlet-like weights per diagonal slot.
pub fn random_commuting_povm(space: SampleSpace, d: usize, seed: u64) -> Result<QuantumMeasure> {
    let tol = Tolerances::default();
    let mut rng = rng_from_seed(seed);
    let u = random_unitary(&mut rng, d);
    let n = space.len();
    let mut diag = vec![vec![0.0; d]; n];
    for k in 0..d {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        for (dg, wj) in diag.iter_mut().zip(&w) {
            dg[k] = wj / s;
        }
    }
    let atoms = diag.iter().map(|dg| HermitianMatrix::from_real_diag(dg).congruence(&u)).collect();
    QuantumMeasure::new(space, atoms, &tol)
}

/// `h_j = S^{-1/2} G_j S^{-1/2}` with `S = Σ G_j`.
pub fn normalize_to_probability(
    space: SampleSpace,
    gs: Vec<HermitianMatrix>,
    tol: &Tolerances,
) -> Result<QuantumMeasure> {
    let d = gs.first().map(|g| g.dim()).unwrap_or(1);
    let mut s = HermitianMatrix::zeros(d);
    for g in &gs {
        s.add_assign(g);
    }
    let (_, s_inv_sqrt) = crate::herm::psd_sqrt_and_inv_sqrt(&s, tol)?;
    let atoms = gs.iter().map(|g| g.sandwich(&s_inv_sqrt)).collect();
    QuantumMeasure::new(space, atoms, tol)
}

/// Random partition of `n` points into exactly `num_blocks` nonempty blocks.
pub fn random_partition(n: usize, seed: u64, num_blocks: usize) -> Result<Partition> {
    if num_blocks == 0 || num_blocks > n {
        return Err(QprobError::InvalidPartition(format!("cannot split {n} points into {num_blocks} blocks")));
    }
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut blocks: Vec<Vec<usize>> = order[..num_blocks].iter().map(|&i| vec![i]).collect();
    for &i in &order[num_blocks..] {
        blocks[rng.random_range(0..num_blocks)].push(i);
    }
    Partition::new(n, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn diag(v: &[f64]) -> HermitianMatrix {
        HermitianMatrix::from_real_diag(v)
    }

    fn measure(atoms: Vec<HermitianMatrix>) -> QuantumMeasure {
        QuantumMeasure::new(SampleSpace::indexed(atoms.len()), atoms, &tol()).unwrap()
    }

    #[test]
    fn sample_space_rules() {
        assert!(SampleSpace::new(Vec::<String>::new()).is_err());
        assert!(SampleSpace::new(["a", "a"]).is_err());
        let s = SampleSpace::new(["a", "b"]).unwrap();
        assert_eq!(s.index_of("b"), Some(1));
    }

    #[test]
    fn partition_rules() {
        assert!(Partition::new(3, vec![vec![0], vec![1]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::new(2, vec![vec![0], vec![], vec![1]]).is_err());
        let p = Partition::new(3, vec![vec![2, 1], vec![0]]).unwrap();
        assert_eq!(p.blocks(), &[vec![0], vec![1, 2]]);
        assert_eq!(p.block_of(), vec![0, 1, 1]);
    }

    #[test]
    fn validate_examples() {
        let r = validate_atoms(&[HermitianMatrix::identity(2)], &tol()).unwrap();
        assert!(r.is_probability);
        let r = validate_atoms(&[diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], &tol()).unwrap();
        assert!(r.is_probability);
        assert_eq!(r.additivity_defect, 0.0);
        let r = validate_atoms(&[diag(&[1.0, 0.0]), diag(&[1.0, 0.0])], &tol()).unwrap();
        assert!(r.is_povm && !r.is_probability);
        assert!((r.identity_deviation - 2f64.sqrt()).abs() < 1e-15);
        let r = validate_atoms(&[diag(&[1.0, -0.5]), diag(&[0.0, 1.5])], &tol()).unwrap();
        assert_eq!(r.non_psd_atoms, vec![0]);
        assert!(!r.is_povm);
        let r = validate_atoms(&[diag(&[0.0, 0.0]), diag(&[1.0, 1.0])], &tol()).unwrap();
        assert_eq!(r.zero_atoms, vec![0]);
    }

    #[test]
    fn zero_total_rejected() {
        let err = QuantumMeasure::new(SampleSpace::indexed(1), vec![diag(&[0.0, 0.0])], &tol());
        assert!(matches!(err, Err(QprobError::InvalidMeasure(_))));
    }

    #[test]
    fn induced_mu_examples() {
        let nu = measure(vec![diag(&[0.3]), diag(&[0.7])]);
        assert_eq!(induced_mu(&nu).weights, vec![0.3, 0.7]);
        let nu = measure(vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])]);
        assert_eq!(induced_mu(&nu).weights, vec![0.5, 0.5]);
        let nu = random_povm(SampleSpace::indexed(5), 3, 9, PovmOptions::default()).unwrap();
        assert!((induced_mu(&nu).total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dnu_dmu_examples() {
        let nu = measure(vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])]);
        let rn = dnu_dmu(&nu);
        assert_eq!(rn.value(0), &diag(&[2.0, 0.0]));
        assert_eq!(rn.value(1), &diag(&[0.0, 2.0]));
        // μ(x) · dν/dμ(x) reproduces the atom
        let mu = induced_mu(&nu);
        for i in 0..2 {
            assert!(rn.value(i).scale(mu.weights[i]).dist(nu.atom(i)) < 1e-15);
        }
        let flat = measure(vec![HermitianMatrix::scalar(2, 0.25); 4]);
        for v in dnu_dmu(&flat).values() {
            assert!(v.dist(&HermitianMatrix::identity(2)) < 1e-15);
        }
        let classical = measure(vec![diag(&[0.2]), diag(&[0.0]), diag(&[0.8])]);
        let rn = dnu_dmu(&classical);
        assert_eq!(rn.value(0), &diag(&[1.0]));
        assert_eq!(rn.value(1), &diag(&[0.0]));
    }

    #[test]
    fn restrict_examples() {
        let nu = random_povm(SampleSpace::indexed(4), 2, 1, PovmOptions::default()).unwrap();
        let trivial = restrict(&nu, &Partition::trivial(4), &tol()).unwrap();
        assert_eq!(trivial.len(), 1);
        assert!(trivial.atom(0).dist(&HermitianMatrix::identity(2)) < 1e-12);

        let discrete = restrict(&nu, &Partition::discrete(4), &tol()).unwrap();
        for i in 0..4 {
            assert_eq!(discrete.atom(i), nu.atom(i));
        }

        let two = Partition::new(4, vec![vec![0], vec![1, 2, 3]]).unwrap();
        let r = restrict(&nu, &two, &tol()).unwrap();
        assert_eq!(r.atom(0), nu.atom(0));
        let complement = HermitianMatrix::identity(2).sub(nu.atom(0));
        assert!(r.atom(1).dist(&complement) < 1e-12);
        assert_eq!(r.space().label(1), "{x2,x3,x4}");

        // induced μ of the restriction is the block sum of μ
        let mu = induced_mu(&nu);
        let mu_r = induced_mu(&r);
        assert!((mu_r.weights[1] - (mu.weights[1] + mu.weights[2] + mu.weights[3])).abs() < 1e-12);
    }

    #[test]
    fn continuity_examples() {
        let nu = random_povm(SampleSpace::indexed(3), 2, 4, PovmOptions::default()).unwrap();
        for mode in [ContinuityMode::Weak, ContinuityMode::Strong] {
            assert!(is_abs_continuous(&nu, &nu, mode, &tol()).unwrap());
        }
        let nu1 = measure(vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])]);
        let nu2 = measure(vec![diag(&[0.5, 0.5]), diag(&[0.5, 0.5])]);
        assert!(is_abs_continuous(&nu2, &nu1, ContinuityMode::Weak, &tol()).unwrap());
        assert!(!is_abs_continuous(&nu2, &nu1, ContinuityMode::Strong, &tol()).unwrap());
        assert_eq!(continuity_violations(&nu2, &nu1, ContinuityMode::Strong, &tol()).unwrap(), vec![0, 1]);

        let nu1 = measure(vec![diag(&[0.0, 0.0]), diag(&[1.0, 1.0])]);
        let nu2 = measure(vec![diag(&[0.0, 0.0]), diag(&[1.0, 1.0])]);
        assert!(is_abs_continuous(&nu2, &nu1, ContinuityMode::Weak, &tol()).unwrap());
        let nu3 = measure(vec![diag(&[0.1, 0.0]), diag(&[0.9, 1.0])]);
        assert!(!is_abs_continuous(&nu3, &nu1, ContinuityMode::Weak, &tol()).unwrap());

        let other = measure(vec![diag(&[1.0])]);
        assert!(is_abs_continuous(&other, &nu1, ContinuityMode::Weak, &tol()).is_err());
    }

    #[test]
    fn random_povm_contract() {
        let space = SampleSpace::indexed(6);
        let a = random_povm(space.clone(), 3, 42, PovmOptions::default()).unwrap();
        let b = random_povm(space.clone(), 3, 42, PovmOptions::default()).unwrap();
        assert_eq!(a.atoms(), b.atoms());
        assert!(a.is_probability());
        assert!(a.total().dist(&HermitianMatrix::identity(3)) < 1e-8);
        for h in a.atoms() {
            assert!(h.min_eigenvalue().unwrap() > 0.0);
        }
        let single = random_povm(SampleSpace::indexed(1), 3, 5, PovmOptions { ridge: 0.0 }).unwrap();
        assert!(single.atom(0).dist(&HermitianMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn random_partition_contract() {
        assert_eq!(random_partition(5, 1, 1).unwrap(), Partition::trivial(5));
        assert_eq!(random_partition(5, 1, 5).unwrap(), Partition::discrete(5));
        assert!(random_partition(5, 1, 0).is_err());
        assert!(random_partition(5, 1, 6).is_err());
        let p = random_partition(3, 17, 2).unwrap();
        assert_eq!(p, random_partition(3, 17, 2).unwrap());
        assert_eq!(p.num_blocks(), 2);
    }

    #[test]
    fn commuting_povm_commutes() {
        let nu = random_commuting_povm(SampleSpace::indexed(4), 3, 2).unwrap();
        assert!(nu.is_probability());
        for a in nu.atoms() {
            for b in nu.atoms() {
                assert!(a.commutes_with(b, 1e-13));
            }
        }
    }
}
