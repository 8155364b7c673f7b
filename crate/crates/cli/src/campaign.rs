//! Seeded theorem-verification campaigns.
//!
//! Every trial draws its own generator from `derive_seed(seed, trial)`, so
//! the per-trial results do not depend on scheduling and a parallel run
//! reports exactly what a serial one does.

use std::ops::RangeInclusive;
use std::time::Instant;

use clap::ValueEnum;
use qprob::calculus::{
    chain_rule_residual, change_of_measure_residual, change_of_variables_residual, inverse_residual, verify_rn,
};
use qprob::conditional::{bayes_residual, cond_jensen_gap};
use qprob::herm::support_projection;
use qprob::measure::{random_commuting_povm, random_partition, random_povm, PovmOptions};
use qprob::qrv::{
    cesaro_projection, channel_apply, channel_as_supermap, choi_matrix, fixed_points, jensen_gap, OperatorConvex,
    DEFAULT_CESARO_MAX_TERMS, DEFAULT_GROUPING_TOL,
};
use qprob::random::{
    derive_seed, gaussian_matrix, random_hermitian, random_hermitian_in, random_psd, random_unitary, rng_from_seed,
    SeededRng,
};
use qprob::{
    HermitianMatrix, Interval, QprobError, QuantumMeasure, QuantumRandomVariable, Result, SampleSpace, Tolerances,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{MAX_DIM, MAX_POINTS};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    ChangeOfMeasure,
    ChainRule,
    Inverse,
    ChangeOfVariables,
    Bayes,
    Jensen,
    CondJensen,
    Channel,
    Rn,
    Cesaro,
}

impl Theorem {
    pub const ALL: [Theorem; 10] = [
        Theorem::ChangeOfMeasure,
        Theorem::ChainRule,
        Theorem::Inverse,
        Theorem::ChangeOfVariables,
        Theorem::Bayes,
        Theorem::Jensen,
        Theorem::CondJensen,
        Theorem::Channel,
        Theorem::Rn,
        Theorem::Cesaro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::ChangeOfMeasure => "change-of-measure",
            Theorem::ChainRule => "chain-rule",
            Theorem::Inverse => "inverse",
            Theorem::ChangeOfVariables => "change-of-variables",
            Theorem::Bayes => "bayes",
            Theorem::Jensen => "jensen",
            Theorem::CondJensen => "cond-jensen",
            Theorem::Channel => "channel",
            Theorem::Rn => "rn",
            Theorem::Cesaro => "cesaro",
        }
    }

    /// What the per-trial residual measures.
    pub fn residual_meaning(self) -> &'static str {
        match self {
            Theorem::ChangeOfMeasure => "||E_nu2[psi] - E_nu1[psi ⊠ dnu2/dnu1]||_F",
            Theorem::ChainRule => "max_x ||(dnu1/dnu2 ⊠ dnu2/dnu3)(x) - dnu1/dnu3(x)||_F",
            Theorem::Inverse => "max_x ||dnu1/dnu2 ⊠ dnu2/dnu1 - 1||_F, both orders",
            Theorem::ChangeOfVariables => "||E_nu[psi] - integral of a against the law of psi||_F",
            Theorem::Bayes => "max over blocks of the Bayes-rule defect, Frobenius",
            Theorem::Jensen => "max(0, -min eigenvalue of E[f(psi)] - f(E[psi])) over the function catalog",
            Theorem::CondJensen => "max(0, -min eigenvalue of the conditional Jensen gap) over blocks and functions",
            Theorem::Channel => "max(-min eigenvalue of the Choi matrix, |tr E(z) - tr z| over 10 random z)",
            Theorem::Rn => "max_x ||h1^{1/2} (dnu2/dnu1) h1^{1/2} - h2||_F under strong continuity",
            Theorem::Cesaro => "max(||P∘P - P||_F, ||E∘P - P||_F, max_f ||P(f) - f||_F over fixed points f)",
        }
    }

    /// Sizes drawn per trial when `--dim` / `--points` are not given.
    fn default_dims(self) -> RangeInclusive<usize> {
        match self {
            Theorem::Bayes | Theorem::Channel | Theorem::Cesaro => 1..=4,
            Theorem::Jensen | Theorem::CondJensen => 1..=5,
            _ => 1..=6,
        }
    }

    fn default_points(self) -> RangeInclusive<usize> {
        match self {
            Theorem::Bayes => 3..=6,
            Theorem::Channel | Theorem::Cesaro | Theorem::Rn | Theorem::ChangeOfVariables => 1..=8,
            _ => 2..=8,
        }
    }

    fn min_points(self) -> usize {
        match self {
            // needs a partition with 1 < blocks < n
            Theorem::Bayes => 3,
            _ => 1,
        }
    }

    fn trial(self, rng: &mut SeededRng, d: usize, n: usize, tol: &Tolerances) -> Result<f64> {
        match self {
            Theorem::ChangeOfMeasure => {
                let (nu1, nu2) = (povm(rng, n, d)?, povm(rng, n, d)?);
                change_of_measure_residual(&hermitian_qrv(rng, n, d), &nu2, &nu1, tol)
            }
            Theorem::ChainRule => {
                let (nu1, nu2, nu3) = (povm(rng, n, d)?, povm(rng, n, d)?, povm(rng, n, d)?);
                chain_rule_residual(&nu1, &nu2, &nu3, tol)
            }
            Theorem::Inverse => inverse_residual(&povm(rng, n, d)?, &povm(rng, n, d)?, tol),
            Theorem::ChangeOfVariables => change_of_variables_trial(rng, n, d, tol),
            Theorem::Bayes => {
                let (nu1, nu2) = (povm(rng, n, d)?, povm(rng, n, d)?);
                let psi = psd_qrv(rng, n, d);
                let f = random_partition(n, rng.random(), rng.random_range(2..n))?;
                bayes_residual(&psi, &nu1, &nu2, &f, tol)
            }
            Theorem::Jensen | Theorem::CondJensen => jensen_trial(self == Theorem::CondJensen, rng, n, d, tol),
            Theorem::Channel => {
                let nu = povm(rng, n, d)?;
                let mut worst = -choi_matrix(&nu)?.min_eigenvalue()?;
                for _ in 0..10 {
                    let z = gaussian_matrix(rng, d);
                    worst = worst.max((channel_apply(&nu, &z)?.trace() - z.trace()).norm());
                }
                Ok(worst.max(0.0))
            }
            Theorem::Rn => rn_trial(rng, n, d, tol),
            Theorem::Cesaro => {
                let nu = if rng.random_bool(0.5) {
                    povm(rng, n, d)?
                } else {
                    random_commuting_povm(SampleSpace::indexed(n), d, rng.random())?
                };
                let p = cesaro_projection(&nu, DEFAULT_CESARO_MAX_TERMS, tol)?;
                let e = channel_as_supermap(&nu)?;
                let idempotence = p.map.compose(&p.map).dist(&p.map);
                let into = e.compose(&p.map).dist(&p.map);
                let onto = fixed_points(&nu, tol)?
                    .iter()
                    .map(|f| p.map.apply(f.matrix()).dist(f.matrix()))
                    .fold(0.0, f64::max);
                Ok(idempotence.max(into).max(onto))
            }
        }
    }
}

fn povm(rng: &mut SeededRng, n: usize, d: usize) -> Result<QuantumMeasure> {
    random_povm(SampleSpace::indexed(n), d, rng.random(), PovmOptions::default())
}

fn hermitian_qrv(rng: &mut SeededRng, n: usize, d: usize) -> QuantumRandomVariable {
    QuantumRandomVariable::new(SampleSpace::indexed(n), (0..n).map(|_| random_hermitian(rng, d)).collect())
        .expect("one value per point")
}

fn psd_qrv(rng: &mut SeededRng, n: usize, d: usize) -> QuantumRandomVariable {
    QuantumRandomVariable::new(SampleSpace::indexed(n), (0..n).map(|_| random_psd(rng, d, 0.01)).collect())
        .expect("one value per point")
}

/// Half the trials use a non-injective `ψ`: a random set of at least two
/// points shares one scalar value `c·1`, where the law formula still applies.
fn change_of_variables_trial(rng: &mut SeededRng, n: usize, d: usize, tol: &Tolerances) -> Result<f64> {
    let nu = povm(rng, n, d)?;
    let mut values: Vec<HermitianMatrix> = (0..n).map(|_| random_hermitian(rng, d)).collect();
    if n >= 2 && rng.random_bool(0.5) {
        let shared = HermitianMatrix::scalar(d, rng.random_range(-2.0..2.0));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        for &i in &order[..rng.random_range(2..=n)] {
            values[i] = shared.clone();
        }
    }
    let psi = QuantumRandomVariable::new(SampleSpace::indexed(n), values)?;
    Ok(change_of_variables_residual(&psi, &nu, DEFAULT_GROUPING_TOL, tol)?.residual)
}

fn jensen_trial(conditional: bool, rng: &mut SeededRng, n: usize, d: usize, tol: &Tolerances) -> Result<f64> {
    let positive = Interval::new(0.05, 4.0);
    let nu = povm(rng, n, d)?;
    let f = random_partition(n, rng.random(), rng.random_range(1..=n))?;
    let mut worst: f64 = 0.0;
    for g in OperatorConvex::ALL {
        let (psi, interval) = match g {
            OperatorConvex::Square => (hermitian_qrv(rng, n, d), Interval::REAL_LINE),
            _ => (
                QuantumRandomVariable::new(
                    SampleSpace::indexed(n),
                    (0..n).map(|_| random_hermitian_in(rng, d, positive)).collect(),
                )?,
                positive,
            ),
        };
        let gaps = if conditional {
            cond_jensen_gap(&psi, &nu, &f, g, interval, tol)?
        } else {
            vec![jensen_gap(&psi, &nu, g, interval, tol)?]
        };
        for gap in gaps {
            worst = worst.max(-gap.min_eigenvalue()?);
        }
    }
    Ok(worst)
}

/// Half the trials use invertible atoms; the rest use singular `ν₁` atoms
/// of random rank with each `ν₂` atom compressed into the matching support.
fn rn_trial(rng: &mut SeededRng, n: usize, d: usize, tol: &Tolerances) -> Result<f64> {
    let (nu1, nu2) = if rng.random_bool(0.5) {
        (povm(rng, n, d)?, povm(rng, n, d)?)
    } else {
        let mut a1 = Vec::with_capacity(n);
        let mut a2 = Vec::with_capacity(n);
        for _ in 0..n {
            let rank = rng.random_range(1..=d);
            let u = random_unitary(rng, d);
            let vals: Vec<f64> = (0..d).map(|k| if k < rank { rng.random_range(0.1..1.0) } else { 0.0 }).collect();
            let h1 = HermitianMatrix::from_real_diag(&vals).congruence(&u);
            let q = support_projection(&h1, tol)?;
            a1.push(h1);
            a2.push(random_psd(rng, d, 0.0).sandwich(&q));
        }
        let s = SampleSpace::indexed(n);
        (QuantumMeasure::new(s.clone(), a1, tol)?, QuantumMeasure::new(s, a2, tol)?)
    };
    let report = verify_rn(&nu2, &nu1, tol)?;
    if !report.strong.holds {
        return Err(QprobError::Precondition("generated pair is not strongly continuous".into()));
    }
    Ok(report.max_residual)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub theorem: Theorem,
    pub trials: u64,
    pub seed: u64,
    pub dim: Option<usize>,
    pub points: Option<usize>,
    /// Pass threshold for the per-trial residual.
    pub tol: f64,
    /// Worker threads; `None` uses rayon's default pool.
    pub threads: Option<usize>,
}

impl CampaignConfig {
    pub fn new(theorem: Theorem, trials: u64, seed: u64) -> Self {
        Self { theorem, trials, seed, dim: None, points: None, tol: 1e-8, threads: None }
    }

    pub fn check(&self) -> CliResult<()> {
        if self.trials == 0 {
            return Err(CliError::Usage("--trials must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(CliError::Usage(format!("tolerance must be positive and finite, got {}", self.tol)));
        }
        if let Some(d) = self.dim {
            if !(1..=MAX_DIM).contains(&d) {
                return Err(CliError::Usage(format!("--dim must be between 1 and {MAX_DIM}, got {d}")));
            }
        }
        if let Some(n) = self.points {
            let min = self.theorem.min_points();
            if !(min..=MAX_POINTS).contains(&n) {
                return Err(CliError::Usage(format!(
                    "--points for {} must be between {min} and {MAX_POINTS}, got {n}",
                    self.theorem.name()
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub dim: usize,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRange {
    pub campaign_seed: u64,
    pub first_trial: u64,
    pub last_trial: u64,
    pub derivation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema_version: u32,
    pub campaign: String,
    pub residual: String,
    pub tool_version: String,
    pub seed_range: SeedRange,
    pub trials: u64,
    pub dim: Option<usize>,
    pub points: Option<usize>,
    pub tolerance: f64,
    pub completed: u64,
    pub errored: u64,
    pub max_residual: Option<f64>,
    pub mean_residual: Option<f64>,
    /// Every trial completed and `max_residual <= tolerance`.
    pub pass: bool,
    pub wall_time_seconds: f64,
    pub results: Vec<TrialRecord>,
}

impl CampaignReport {
    pub fn summary(&self) -> String {
        let fmt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3e}"));
        format!(
            "{}: {} trials ({} errored), max residual {}, mean {}, tolerance {:e}: {}",
            self.campaign,
            self.trials,
            self.errored,
            fmt(self.max_residual),
            fmt(self.mean_residual),
            self.tolerance,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        s.push('\n');
        s
    }
}

fn run_trial(cfg: &CampaignConfig, kernel_tol: &Tolerances, trial: u64) -> TrialRecord {
    let seed = derive_seed(cfg.seed, trial);
    let mut rng = rng_from_seed(seed);
    let th = cfg.theorem;
    let dim = cfg.dim.unwrap_or_else(|| rng.random_range(th.default_dims()));
    let points = cfg.points.unwrap_or_else(|| rng.random_range(th.default_points()));
    let (residual, error) = match th.trial(&mut rng, dim, points, kernel_tol) {
        Ok(r) if r.is_finite() => (Some(r), None),
        Ok(r) => (None, Some(format!("non-finite residual {r}"))),
        Err(e) => (None, Some(e.to_string())),
    };
    TrialRecord { trial, seed, dim, points, residual, error }
}

pub fn run_campaign(cfg: &CampaignConfig) -> CliResult<CampaignReport> {
    cfg.check()?;
    let start = Instant::now();
    // The kernel's own cutoffs stay at their defaults; `cfg.tol` only judges residuals.
    let kernel_tol = Tolerances::default();
    let run =
        || -> Vec<TrialRecord> { (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, &kernel_tol, t)).collect() };
    let results = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(run),
        None => run(),
    };

    let residuals: Vec<f64> = results.iter().filter_map(|r| r.residual).collect();
    let errored = results.iter().filter(|r| r.error.is_some()).count() as u64;
    let max_residual = residuals.iter().copied().reduce(f64::max);
    let mean_residual = (!residuals.is_empty()).then(|| residuals.iter().sum::<f64>() / residuals.len() as f64);
    let pass = errored == 0 && max_residual.is_some_and(|m| m <= cfg.tol);
    Ok(CampaignReport {
        schema_version: SCHEMA_VERSION,
        campaign: cfg.theorem.name().into(),
        residual: cfg.theorem.residual_meaning().into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed_range: SeedRange {
            campaign_seed: cfg.seed,
            first_trial: 0,
            last_trial: cfg.trials - 1,
            derivation: "trial seed = derive_seed(campaign_seed, trial)".into(),
        },
        trials: cfg.trials,
        dim: cfg.dim,
        points: cfg.points,
        tolerance: cfg.tol,
        completed: residuals.len() as u64,
        errored,
        max_residual,
        mean_residual,
        pass,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        results,
    })
}
