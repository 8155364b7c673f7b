//! Single computations on an instance. Each returns the JSON printed to stdout.

use std::collections::BTreeMap;

use qprob::calculus::{boxtimes, rn_derivative};
use qprob::conditional::cond_expectation;
use qprob::measure::{continuity_violations, random_partition, random_povm, ContinuityMode, PovmOptions};
use qprob::qrv::{expectation, law};
use qprob::random::{random_psd, rng_from_seed};
use qprob::{HermitianMatrix, QuantumRandomVariable, RNContext, SampleSpace, Tolerances};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::instance::{matrix_to_json, Instance, InstanceFile};

/// Largest supported Hilbert-space dimension and sample-space size.
pub const MAX_DIM: usize = 8;
pub const MAX_POINTS: usize = 10;

fn matrix(h: &HermitianMatrix) -> Value {
    json!(matrix_to_json(h.matrix()))
}

fn per_point(psi: &QuantumRandomVariable) -> Value {
    let map: BTreeMap<&str, Value> =
        psi.space().labels().iter().zip(psi.values()).map(|(l, v)| (l.as_str(), matrix(v))).collect();
    json!(map)
}

fn labels(space: &SampleSpace, indices: &[usize]) -> Vec<String> {
    indices.iter().map(|&i| space.label(i).to_owned()).collect()
}

pub fn expect(inst: &Instance, measure: &str, qrv: &str) -> CliResult<Value> {
    Ok(matrix(&expectation(inst.qrv(qrv)?, inst.measure(measure)?)?))
}

/// `dν_num/dν_den`, one matrix per point.
pub fn rnderiv(inst: &Instance, num: &str, den: &str, tol: &Tolerances) -> CliResult<Value> {
    Ok(per_point(&rn_derivative(inst.measure(num)?, inst.measure(den)?, tol)?))
}

/// Second factor of a ⊠ product: a stored variable or a derivative computed on the fly.
pub enum Factor<'a> {
    Qrv(&'a str),
    DerivativeOf(&'a str),
}

/// `ψ ⊠ φ` in the context of `measure`. With [`Factor::DerivativeOf`]`(ν₂)`,
/// `φ = dν₂/dν` for the context measure `ν`.
pub fn boxtimes_cmd(
    inst: &Instance,
    qrv: &str,
    factor: Factor<'_>,
    measure: &str,
    tol: &Tolerances,
) -> CliResult<Value> {
    let psi = inst.qrv(qrv)?;
    let nu = inst.measure(measure)?;
    let phi = match factor {
        Factor::Qrv(name) => inst.qrv(name)?.clone(),
        Factor::DerivativeOf(num) => rn_derivative(inst.measure(num)?, nu, tol)?,
    };
    let ctx = RNContext::new(nu.clone(), tol.clone());
    Ok(per_point(&boxtimes(psi, &phi, &ctx)?))
}

pub fn condexp(inst: &Instance, measure: &str, qrv: &str, partition: &str, tol: &Tolerances) -> CliResult<Value> {
    let f = inst.partition(partition)?;
    let r = cond_expectation(inst.qrv(qrv)?, inst.measure(measure)?, f, tol)?;
    let blocks: Vec<Value> = f
        .blocks()
        .iter()
        .enumerate()
        .map(|(b, block)| {
            json!({
                "points": labels(&inst.space, block),
                "value": matrix(&r.block_values[b]),
                "zero_mass": r.zero_mass_blocks.contains(&b),
            })
        })
        .collect();
    Ok(json!({ "blocks": blocks, "phi": per_point(&r.phi) }))
}

pub fn law_cmd(inst: &Instance, measure: &str, qrv: &str, grouping_tol: f64) -> CliResult<Value> {
    let m = law(inst.qrv(qrv)?, inst.measure(measure)?, grouping_tol)?;
    let atoms: Vec<Value> = (0..m.len())
        .map(|k| {
            json!({
                "value": matrix(&m.support[k]),
                "mass": matrix(&m.masses[k]),
                "points": labels(&inst.space, &m.fibers[k]),
            })
        })
        .collect();
    Ok(json!({ "injective": m.is_injective(), "atoms": atoms }))
}

/// Summary of an instance that already passed parsing: per-measure POVM
/// diagnostics, pairwise absolute continuity, and which variables are PSD.
pub fn validate(inst: &Instance, tol: &Tolerances) -> CliResult<Value> {
    let mut measures = serde_json::Map::new();
    for (name, nu) in &inst.measures {
        let report = nu.validate(tol)?;
        measures.insert(
            name.clone(),
            json!({
                "probability": report.is_probability,
                "identity_deviation": report.identity_deviation,
                "min_eigenvalue": report.atom_min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min),
                "zero_atoms": labels(&inst.space, &report.zero_atoms),
            }),
        );
    }
    let mut continuity = Vec::new();
    for (a, nu_a) in &inst.measures {
        for (b, nu_b) in &inst.measures {
            if a == b {
                continue;
            }
            let weak = continuity_violations(nu_a, nu_b, ContinuityMode::Weak, tol)?;
            let strong = continuity_violations(nu_a, nu_b, ContinuityMode::Strong, tol)?;
            continuity.push(json!({
                "measure": a,
                "reference": b,
                "weak": weak.is_empty(),
                "strong": strong.is_empty(),
                "strong_violations": labels(&inst.space, &strong),
            }));
        }
    }
    let mut qrvs = serde_json::Map::new();
    for (name, psi) in &inst.qrvs {
        qrvs.insert(name.clone(), json!({ "psd": psi.is_psd_valued(tol)? }));
    }
    let partitions: BTreeMap<&str, usize> = inst.partitions.iter().map(|(k, f)| (k.as_str(), f.num_blocks())).collect();
    Ok(json!({
        "dim": inst.dim,
        "points": inst.space.len(),
        "measures": measures,
        "continuity": continuity,
        "qrvs": qrvs,
        "partitions": partitions,
        "warnings": inst.warnings,
    }))
}

pub fn check_sizes(dim: usize, points: usize) -> CliResult<()> {
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(CliError::Usage(format!("--dim must be between 1 and {MAX_DIM}, got {dim}")));
    }
    if !(1..=MAX_POINTS).contains(&points) {
        return Err(CliError::Usage(format!("--points must be between 1 and {MAX_POINTS}, got {points}")));
    }
    Ok(())
}

/// Random instance: probability measures `nu1`, `nu2` with invertible atoms
/// (hence mutually strongly continuous), a PSD variable `psi`, and a
/// partition `F`. Fully determined by `seed`.
pub fn generate(dim: usize, points: usize, seed: u64) -> CliResult<InstanceFile> {
    check_sizes(dim, points)?;
    let tol = Tolerances::default();
    let mut rng = rng_from_seed(seed);
    let space = SampleSpace::indexed(points);
    let nu1 = random_povm(space.clone(), dim, rng.random(), PovmOptions::default())?;
    let nu2 = random_povm(space.clone(), dim, rng.random(), PovmOptions::default())?;
    let psi =
        QuantumRandomVariable::new(space.clone(), (0..points).map(|_| random_psd(&mut rng, dim, 0.05)).collect())?;
    let blocks = rng.random_range(1..=points);
    let f = random_partition(points, rng.random(), blocks)?;
    let inst = Instance {
        space,
        dim,
        measures: BTreeMap::from([("nu1".into(), nu1), ("nu2".into(), nu2)]),
        qrvs: BTreeMap::from([("psi".into(), psi)]),
        partitions: BTreeMap::from([("F".into(), f)]),
        warnings: Vec::new(),
    };
    debug_assert!(Instance::from_file(&inst.to_file(), false, &tol).is_ok());
    Ok(inst.to_file())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instances_are_valid_and_reproducible() {
        let tol = Tolerances::default();
        for seed in 0..20 {
            let file = generate(3, 5, seed).unwrap();
            assert_eq!(file.to_json(), generate(3, 5, seed).unwrap().to_json());
            let inst = Instance::from_file(&file, false, &tol).unwrap();
            let (nu1, nu2) = (inst.measure("nu1").unwrap(), inst.measure("nu2").unwrap());
            assert!(nu1.is_probability() && nu2.is_probability());
            for (a, b) in [(nu1, nu2), (nu2, nu1)] {
                assert!(continuity_violations(a, b, ContinuityMode::Strong, &tol).unwrap().is_empty());
            }
            assert!(inst.qrv("psi").unwrap().is_psd_valued(&tol).unwrap());
        }
        assert_ne!(generate(3, 5, 1).unwrap(), generate(3, 5, 2).unwrap());
    }

    #[test]
    fn sizes_are_bounded() {
        assert_eq!(generate(0, 3, 1).unwrap_err().exit_code(), 2);
        assert_eq!(generate(2, MAX_POINTS + 1, 1).unwrap_err().exit_code(), 2);
    }
}
