//! Radon-Nikodým derivatives, the ⊠ product, and residual checks for the
//! change-of-measure, chain-rule and change-of-variables identities.

use crate::error::{QprobError, Result};
use crate::herm::{generalized_inverse, geometric_mean, psd_sqrt, psd_sqrt_and_inv_sqrt, HermitianMatrix, Tolerances};
use crate::measure::{continuity_violations, dnu_dmu, induced_mu, ContinuityMode, QuantumMeasure};
use crate::qrv::{expectation, expectation_via_law, law, QuantumRandomVariable};

/// The reference measure `ν₁` of a ⊠ product together with its cached
/// density `dν₁/dμ₁`.
#[derive(Debug, Clone)]
pub struct RNContext {
    base_measure: QuantumMeasure,
    dnu1_dmu1: QuantumRandomVariable,
    tol: Tolerances,
}

impl RNContext {
    pub fn new(base_measure: QuantumMeasure, tol: Tolerances) -> Self {
        let dnu1_dmu1 = dnu_dmu(&base_measure);
        Self { base_measure, dnu1_dmu1, tol }
    }

    pub fn base_measure(&self) -> &QuantumMeasure {
        &self.base_measure
    }

    pub fn dnu1_dmu1(&self) -> &QuantumRandomVariable {
        &self.dnu1_dmu1
    }

    pub fn tol(&self) -> &Tolerances {
        &self.tol
    }
}

/// `dν₂/dν₁`, atomwise `h₁^{-1/2} h₂ h₁^{-1/2}` with generalized inverses.
///
/// Requires strong absolute continuity `ν₂ ≪ ν₁`.
pub fn rn_derivative(nu2: &QuantumMeasure, nu1: &QuantumMeasure, tol: &Tolerances) -> Result<QuantumRandomVariable> {
    let bad = continuity_violations(nu2, nu1, ContinuityMode::Strong, tol)?;
    if !bad.is_empty() {
        let labels: Vec<&str> = bad.iter().map(|&i| nu1.space().label(i)).collect();
        return Err(QprobError::Precondition(format!("not strongly absolutely continuous at {}", labels.join(", "))));
    }
    rn_derivative_unchecked(nu2, nu1, tol)
}

/// The atomwise formula of [`rn_derivative`] without the continuity check.
pub fn rn_derivative_unchecked(
    nu2: &QuantumMeasure,
    nu1: &QuantumMeasure,
    tol: &Tolerances,
) -> Result<QuantumRandomVariable> {
    nu1.check_compatible(nu2)?;
    let values = (0..nu1.len())
        .map(|i| {
            let (_, inv_sqrt) = psd_sqrt_and_inv_sqrt(nu1.atom(i), tol)?;
            Ok(nu2.atom(i).sandwich(&inv_sqrt))
        })
        .collect::<Result<Vec<_>>>()?;
    QuantumRandomVariable::new(nu1.space().clone(), values)
}

/// `dν₂/dν₁` assembled from induced measures and densities:
/// `(dμ₂/dμ₁) · (dν₁/dμ₁)^{-1/2} (dν₂/dμ₂) (dν₁/dμ₁)^{-1/2}`.
///
/// Algebraically equal to [`rn_derivative`]; kept as an independent
/// cross-check.
pub fn rn_derivative_assembled(
    nu2: &QuantumMeasure,
    nu1: &QuantumMeasure,
    tol: &Tolerances,
) -> Result<QuantumRandomVariable> {
    nu1.check_compatible(nu2)?;
    let (mu1, mu2) = (induced_mu(nu1), induced_mu(nu2));
    let (d1, d2) = (dnu_dmu(nu1), dnu_dmu(nu2));
    let values = (0..nu1.len())
        .map(|i| {
            if mu1.weights[i] == 0.0 {
                return Ok(HermitianMatrix::zeros(nu1.dim()));
            }
            let ratio = mu2.weights[i] / mu1.weights[i];
            let (_, inv_sqrt) = psd_sqrt_and_inv_sqrt(d1.value(i), tol)?;
            Ok(d2.value(i).sandwich(&inv_sqrt).scale(ratio))
        })
        .collect::<Result<Vec<_>>>()?;
    QuantumRandomVariable::new(nu1.space().clone(), values)
}

/// Outcome of a continuity check in one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityCheck {
    pub holds: bool,
    pub violations: Vec<usize>,
}

/// How well `h₁^{1/2} φ h₁^{1/2}` reproduces `h₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnReport {
    /// `||h₁^{1/2} φ h₁^{1/2} - h₂||_F` per atom.
    pub atom_residuals: Vec<f64>,
    pub max_residual: f64,
    pub weak: ContinuityCheck,
    pub strong: ContinuityCheck,
    /// Weakly but not strongly continuous: `φ` is still computed but
    /// need not reproduce `ν₂`.
    pub flagged: bool,
}

/// Residual of the reproduction property `ν₂(E) = ∫_E φ dν₁`, checked on atoms.
pub fn verify_rn(nu2: &QuantumMeasure, nu1: &QuantumMeasure, tol: &Tolerances) -> Result<RnReport> {
    let weak_bad = continuity_violations(nu2, nu1, ContinuityMode::Weak, tol)?;
    let strong_bad = continuity_violations(nu2, nu1, ContinuityMode::Strong, tol)?;
    let phi = rn_derivative_unchecked(nu2, nu1, tol)?;
    let atom_residuals = (0..nu1.len())
        .map(|i| {
            let root = psd_sqrt(nu1.atom(i), tol)?;
            Ok(phi.value(i).sandwich(&root).dist(nu2.atom(i)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_residual = atom_residuals.iter().copied().fold(0.0, f64::max);
    let flagged = weak_bad.is_empty() && !strong_bad.is_empty();
    Ok(RnReport {
        atom_residuals,
        max_residual,
        weak: ContinuityCheck { holds: weak_bad.is_empty(), violations: weak_bad },
        strong: ContinuityCheck { holds: strong_bad.is_empty(), violations: strong_bad },
        flagged,
    })
}

/// `ψ ⊠ φ = G D^{1/2} ψ D^{1/2} G` with `D = dν₁/dμ₁` from the context and
/// `G = D^{-1} # φ`.
pub fn boxtimes(
    psi: &QuantumRandomVariable,
    phi: &QuantumRandomVariable,
    ctx: &RNContext,
) -> Result<QuantumRandomVariable> {
    psi.check_same_shape(phi)?;
    psi.check_against(ctx.base_measure())?;
    let tol = ctx.tol();
    let values = (0..psi.len())
        .map(|i| {
            let d = ctx.dnu1_dmu1().value(i);
            let g = geometric_mean(&generalized_inverse(d, tol)?, phi.value(i), tol)?;
            let root = psd_sqrt(d, tol)?;
            let g_root = g.mul(&root);
            Ok(HermitianMatrix::symmetrized(&g_root.sandwich(psi.value(i).matrix())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantumRandomVariable::from_parts(psi.space().clone(), psi.dim(), values))
}

fn require_invertible_atoms(nu: &QuantumMeasure, name: &str, tol: &Tolerances) -> Result<()> {
    let scale = nu.total().spectral_norm()?;
    for (i, a) in nu.atoms().iter().enumerate() {
        if a.min_eigenvalue()? <= tol.rank_rel * scale {
            return Err(QprobError::Precondition(format!("{name} has a singular atom at {}", nu.space().label(i))));
        }
    }
    Ok(())
}

fn max_pointwise_dist(a: &QuantumRandomVariable, b: &QuantumRandomVariable) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x.dist(y)).fold(0.0, f64::max)
}

/// `||E_{ν₂}[ψ] - E_{ν₁}[ψ ⊠ dν₂/dν₁]||_F`.
pub fn change_of_measure_residual(
    psi: &QuantumRandomVariable,
    nu2: &QuantumMeasure,
    nu1: &QuantumMeasure,
    tol: &Tolerances,
) -> Result<f64> {
    require_invertible_atoms(nu1, "ν₁", tol)?;
    let phi = rn_derivative(nu2, nu1, tol)?;
    let ctx = RNContext::new(nu1.clone(), tol.clone());
    let lhs = expectation(psi, nu2)?;
    let rhs = expectation(&boxtimes(psi, &phi, &ctx)?, nu1)?;
    Ok(lhs.dist(&rhs))
}

/// `max_x ||(dν₁/dν₂ ⊠ dν₂/dν₃)(x) - dν₁/dν₃(x)||_F`, ⊠ taken in the `ν₃` context.
pub fn chain_rule_residual(
    nu1: &QuantumMeasure,
    nu2: &QuantumMeasure,
    nu3: &QuantumMeasure,
    tol: &Tolerances,
) -> Result<f64> {
    require_invertible_atoms(nu2, "ν₂", tol)?;
    require_invertible_atoms(nu3, "ν₃", tol)?;
    let d12 = rn_derivative(nu1, nu2, tol)?;
    let d23 = rn_derivative(nu2, nu3, tol)?;
    let d13 = rn_derivative(nu1, nu3, tol)?;
    let product = boxtimes(&d12, &d23, &RNContext::new(nu3.clone(), tol.clone()))?;
    Ok(max_pointwise_dist(&product, &d13))
}

/// Larger of `max_x ||dν₁/dν₂ ⊠ dν₂/dν₁ - 1||_F` (context `ν₁`) and the
/// version with the roles of `ν₁`, `ν₂` swapped.
pub fn inverse_residual(nu1: &QuantumMeasure, nu2: &QuantumMeasure, tol: &Tolerances) -> Result<f64> {
    require_invertible_atoms(nu1, "ν₁", tol)?;
    require_invertible_atoms(nu2, "ν₂", tol)?;
    let d12 = rn_derivative(nu1, nu2, tol)?;
    let d21 = rn_derivative(nu2, nu1, tol)?;
    let ones = QuantumRandomVariable::constant(nu1.space().clone(), HermitianMatrix::identity(nu1.dim()));
    let forward = boxtimes(&d12, &d21, &RNContext::new(nu1.clone(), tol.clone()))?;
    let backward = boxtimes(&d21, &d12, &RNContext::new(nu2.clone(), tol.clone()))?;
    Ok(max_pointwise_dist(&forward, &ones).max(max_pointwise_dist(&backward, &ones)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeOfVariablesReport {
    /// Whether `ψ` separated every sample point at the grouping tolerance.
    pub injective: bool,
    pub residual: f64,
}

/// `||E_ν[ψ] - ∫ a dm(a)||_F` with `m` the law of `ψ`.
pub fn change_of_variables_residual(
    psi: &QuantumRandomVariable,
    nu: &QuantumMeasure,
    grouping_tol: f64,
    tol: &Tolerances,
) -> Result<ChangeOfVariablesReport> {
    let m = law(psi, nu, grouping_tol)?;
    let residual = expectation(psi, nu)?.dist(&expectation_via_law(&m, tol)?);
    Ok(ChangeOfVariablesReport { injective: m.is_injective(), residual })
}
