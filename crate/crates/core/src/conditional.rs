//! Quantum conditional expectation with respect to a partition, Bayes' rule
//! and the conditional Jensen inequality.
//!
//! On a block `B` with mass `H_B = ν(B)` the conditional expectation is the
//! quantum weighted average
//! `φ_B = H_B^{-1/2} [Σ_{x∈B} h_x^{1/2} ψ(x) h_x^{1/2}] H_B^{-1/2}`,
//! i.e. the Radon-Nikodým derivative of `ν̃(B) = ∫_B ψ dν` with respect to
//! the restricted measure `ν′ = ν|_F`.

use crate::calculus::{boxtimes, rn_derivative, RNContext};
use crate::error::{QprobError, Result};
use crate::herm::{psd_sqrt, psd_sqrt_and_inv_sqrt, HermitianMatrix, Interval, Tolerances};
use crate::measure::{restrict, Partition, QuantumMeasure};
use crate::qrv::{expectation, integral_over, OperatorConvex, QuantumRandomVariable};

#[derive(Debug, Clone)]
pub struct ConditionalResult {
    /// Block-constant conditional expectation on the original space.
    pub phi: QuantumRandomVariable,
    pub partition: Partition,
    /// `ν′`: one atom per block.
    pub nu_restricted: QuantumMeasure,
    /// `ν̃(B) = ∫_B ψ dν`, one entry per block.
    pub nu_tilde: Vec<HermitianMatrix>,
    /// `φ_B` per block.
    pub block_values: Vec<HermitianMatrix>,
    /// Blocks with `ν(B) = 0`, where `φ` is set to zero.
    pub zero_mass_blocks: Vec<usize>,
}

impl ConditionalResult {
    /// `φ` as a variable on the block space of `nu_restricted`.
    pub fn on_blocks(&self) -> QuantumRandomVariable {
        QuantumRandomVariable::new(self.nu_restricted.space().clone(), self.block_values.clone())
            .expect("one value per block")
    }
}

/// `QCE_ν[ψ | F]`.
///
/// Requires a probability measure, PSD-valued `ψ`, and `E_ν[ψ] ≠ 0`.
pub fn cond_expectation(
    psi: &QuantumRandomVariable,
    nu: &QuantumMeasure,
    partition: &Partition,
    tol: &Tolerances,
) -> Result<ConditionalResult> {
    if !psi.is_psd_valued(tol)? {
        return Err(QprobError::Precondition("conditioned variable is not PSD-valued".into()));
    }
    psi.check_against(nu)?;
    let e = expectation(psi, nu)?;
    let scale = psi.values().iter().map(|v| v.frobenius_norm()).fold(0.0, f64::max);
    if e.frobenius_norm() <= tol.rank_rel * scale || scale == 0.0 {
        return Err(QprobError::Precondition("expectation of the conditioned variable is zero".into()));
    }
    cond_expectation_hermitian(psi, nu, partition, tol)
}

/// The block formula of [`cond_expectation`] for any Hermitian-valued `ψ`.
///
/// The formula is linear in `ψ`, so this is the linear extension of the
/// conditional expectation beyond PSD-valued variables.
pub fn cond_expectation_hermitian(
    psi: &QuantumRandomVariable,
    nu: &QuantumMeasure,
    partition: &Partition,
    tol: &Tolerances,
) -> Result<ConditionalResult> {
    nu.require_probability()?;
    psi.check_against(nu)?;
    let nu_restricted = restrict(nu, partition, tol)?;
    let scale = nu.total().spectral_norm()?;
    let mut nu_tilde = Vec::with_capacity(partition.num_blocks());
    let mut block_values = Vec::with_capacity(partition.num_blocks());
    let mut zero_mass_blocks = Vec::new();
    for (b, block) in partition.blocks().iter().enumerate() {
        let t = integral_over(psi, nu, block)?;
        let h = nu_restricted.atom(b);
        if h.spectral_norm()? <= tol.rank_rel * scale {
            zero_mass_blocks.push(b);
            block_values.push(HermitianMatrix::zeros(nu.dim()));
        } else {
            let (_, inv_sqrt) = psd_sqrt_and_inv_sqrt(h, tol)?;
            block_values.push(t.sandwich(&inv_sqrt));
        }
        nu_tilde.push(t);
    }
    let phi = QuantumRandomVariable::from_blocks(psi.space().clone(), partition, &block_values)?;
    Ok(ConditionalResult { phi, partition: partition.clone(), nu_restricted, nu_tilde, block_values, zero_mass_blocks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefiningPropertyMode {
    /// Integrate `φ` against `ν′ = ν|_F`.
    Restricted,
    /// Integrate `φ` against the original `ν`.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefiningPropertyReport {
    pub mode: DefiningPropertyMode,
    pub block_residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Per block, the mismatch between `∫_B φ` and `∫_B ψ dν`.
pub fn verify_defining_property(
    result: &ConditionalResult,
    psi: &QuantumRandomVariable,
    nu: &QuantumMeasure,
    mode: DefiningPropertyMode,
    tol: &Tolerances,
) -> Result<DefiningPropertyReport> {
    let mut block_residuals = Vec::with_capacity(result.partition.num_blocks());
    for (b, block) in result.partition.blocks().iter().enumerate() {
        let target = integral_over(psi, nu, block)?;
        let lhs = match mode {
            DefiningPropertyMode::Restricted => {
                let root = psd_sqrt(result.nu_restricted.atom(b), tol)?;
                result.block_values[b].sandwich(&root)
            }
            DefiningPropertyMode::Full => integral_over(&result.phi, nu, block)?,
        };
        block_residuals.push(lhs.dist(&target));
    }
    let max_residual = block_residuals.iter().copied().fold(0.0, f64::max);
    Ok(DefiningPropertyReport { mode, block_residuals, max_residual })
}

/// `||E_ν[ψ] - Σ_B ν(B)^{1/2} φ_B ν(B)^{1/2}||_F`.
pub fn tower_residual(result: &ConditionalResult, psi: &QuantumRandomVariable, nu: &QuantumMeasure) -> Result<f64> {
    let lhs = expectation(psi, nu)?;
    let rhs = expectation(&result.on_blocks(), &result.nu_restricted)?;
    Ok(lhs.dist(&rhs))
}

/// Pointwise max of `||QCE[c₁ψ₁ + c₂ψ₂] - c₁ QCE[ψ₁] - c₂ QCE[ψ₂]||_F` for
/// real scalar coefficients.
pub fn linearity_residual(
    psi1: &QuantumRandomVariable,
    psi2: &QuantumRandomVariable,
    c1: f64,
    c2: f64,
    nu: &QuantumMeasure,
    partition: &Partition,
    tol: &Tolerances,
) -> Result<f64> {
    let combined = psi1.linear_combination(c1, psi2, c2)?;
    let lhs = cond_expectation_hermitian(&combined, nu, partition, tol)?.phi;
    let a = cond_expectation_hermitian(psi1, nu, partition, tol)?.phi;
    let b = cond_expectation_hermitian(psi2, nu, partition, tol)?.phi;
    let rhs = a.linear_combination(c1, &b, c2)?;
    Ok(lhs.values().iter().zip(rhs.values()).map(|(x, y)| x.dist(y)).fold(0.0, f64::max))
}

/// Quantum Bayes' rule, block by block:
/// `QCE_{ν₂}[ψ|F] ⊠ dν₂′/dν₁′` (context `ν₁′`) against
/// `QCE_{ν₁}[ψ ⊠ dν₂/dν₁ | F]` (inner ⊠ in context `ν₁`).
///
/// `E_{ν₁}[dν₂/dν₁ | F]` is taken as `dν₂′/dν₁′` for the restricted measures.
pub fn bayes_residual(
    psi: &QuantumRandomVariable,
    nu1: &QuantumMeasure,
    nu2: &QuantumMeasure,
    partition: &Partition,
    tol: &Tolerances,
) -> Result<f64> {
    let nu1r = restrict(nu1, partition, tol)?;
    let nu2r = restrict(nu2, partition, tol)?;

    let qce2 = cond_expectation(psi, nu2, partition, tol)?;
    let ratio_r = rn_derivative(&nu2r, &nu1r, tol)?;
    let lhs = boxtimes(&qce2.on_blocks(), &ratio_r, &RNContext::new(nu1r, tol.clone()))?;

    let ratio = rn_derivative(nu2, nu1, tol)?;
    let weighted = boxtimes(psi, &ratio, &RNContext::new(nu1.clone(), tol.clone()))?;
    let rhs = cond_expectation(&weighted, nu1, partition, tol)?;

    Ok(lhs.values().iter().zip(&rhs.block_values).map(|(x, y)| x.dist(y)).fold(0.0, f64::max))
}

/// Per block, `QCE_ν[ϑ∘ψ|F](B) - ϑ(QCE_ν[ψ|F](B))`; conditional Jensen
/// predicts every entry is PSD.
pub fn cond_jensen_gap(
    psi: &QuantumRandomVariable,
    nu: &QuantumMeasure,
    partition: &Partition,
    f: OperatorConvex,
    interval: Interval,
    tol: &Tolerances,
) -> Result<Vec<HermitianMatrix>> {
    let transformed = psi.try_map(|v| f.apply(v, interval, tol))?;
    let lhs = cond_expectation_hermitian(&transformed, nu, partition, tol)?;
    let inner = cond_expectation_hermitian(psi, nu, partition, tol)?;
    lhs.block_values
        .iter()
        .zip(&inner.block_values)
        .enumerate()
        .filter(|(b, _)| !inner.zero_mass_blocks.contains(b))
        .map(|(_, (l, r))| Ok(l.sub(&f.apply(r, interval, tol)?)))
        .collect()
}

/// `||E_ν[E_ν[z]] - E_ν[z]||_F` for a constant `z`. Nonzero in general:
/// `E_ν` is not idempotent on constants.
pub fn idempotence_defect(nu: &QuantumMeasure, z: &HermitianMatrix) -> Result<f64> {
    let once = expectation(&QuantumRandomVariable::constant(nu.space().clone(), z.clone()), nu)?;
    let twice = expectation(&QuantumRandomVariable::constant(nu.space().clone(), once.clone()), nu)?;
    Ok(twice.dist(&once))
}
