//! Acceptance campaigns. Runs without the libtest harness so that every
//! criterion prints its PASS/FAIL line; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use qprob::calculus::{
    boxtimes, chain_rule_residual, change_of_measure_residual, inverse_residual, rn_derivative,
    rn_derivative_assembled, verify_rn,
};
use qprob::conditional::{bayes_residual, cond_expectation, cond_jensen_gap};
use qprob::herm::{geometric_mean, psd_sqrt, psd_sqrt_and_inv_sqrt, regularized_geometric_mean, support_projection};
use qprob::measure::{random_partition, random_povm, restrict, PovmOptions};
use qprob::qrv::{
    cesaro_projection, channel_apply, channel_as_supermap, choi_matrix, expectation, fixed_points, integral_over,
    jensen_gap, pairing_oracle, OperatorConvex, DEFAULT_CESARO_MAX_TERMS,
};
use qprob::random::{
    derive_seed, gaussian_matrix, random_density, random_hermitian, random_hermitian_in, random_psd, random_unitary,
    rng_from_seed, SeededRng,
};
use qprob::*;

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    summary: String,
}

type Criterion = (&'static str, fn() -> Outcome);

/// Largest value seen, with a count of trials that errored instead of
/// producing a value.
#[derive(Default)]
struct Tally {
    max: f64,
    errors: usize,
    first_error: Option<String>,
}

impl Tally {
    fn record(&mut self, r: Result<f64>) {
        match r {
            Ok(v) if v.is_nan() => self.fail("NaN residual".into()),
            Ok(v) => self.max = self.max.max(v),
            Err(e) => self.fail(e.to_string()),
        }
    }

    fn fail(&mut self, msg: String) {
        self.errors += 1;
        self.first_error.get_or_insert(msg);
    }

    fn ok(&self, bound: f64) -> bool {
        self.errors == 0 && self.max <= bound
    }

    fn describe(&self) -> String {
        match &self.first_error {
            None => format!("{:.2e}", self.max),
            Some(e) => format!("{:.2e}, {} errored (first: {e})", self.max, self.errors),
        }
    }
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn trial_rng(criterion: u64, trial: u64) -> SeededRng {
    rng_from_seed(derive_seed(SEED ^ (criterion << 48), trial))
}

fn povm(rng: &mut SeededRng, n: usize, d: usize) -> QuantumMeasure {
    random_povm(SampleSpace::indexed(n), d, rng.random(), PovmOptions::default()).unwrap()
}

fn hermitian_qrv(rng: &mut SeededRng, n: usize, d: usize) -> QuantumRandomVariable {
    QuantumRandomVariable::new(SampleSpace::indexed(n), (0..n).map(|_| random_hermitian(rng, d)).collect()).unwrap()
}

fn psd_qrv(rng: &mut SeededRng, n: usize, d: usize) -> QuantumRandomVariable {
    QuantumRandomVariable::new(SampleSpace::indexed(n), (0..n).map(|_| random_psd(rng, d, 0.01)).collect()).unwrap()
}

fn secs(t: Duration) -> String {
    format!("{:.1}s", t.as_secs_f64())
}

fn definition_consistency() -> Outcome {
    let start = Instant::now();
    let mut tally = Tally::default();
    for trial in 0..1000 {
        let mut rng = trial_rng(1, trial);
        let d = rng.random_range(1..=8);
        let n = rng.random_range(1..=10);
        let nu = povm(&mut rng, n, d);
        let psi = hermitian_qrv(&mut rng, n, d);
        let e = expectation(&psi, &nu).unwrap();
        for _ in 0..100 {
            let rho = DensityMatrix::new(random_density(&mut rng, d), &tol()).unwrap();
            let direct = rho.matrix().mul(&e).trace().re;
            tally.record(pairing_oracle(&psi, &nu, &rho, &tol()).map(|v| (v - direct).abs()));
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: tally.ok(1e-8) && elapsed < Duration::from_secs(30),
        summary: format!(
            "definition consistency: max |tr(ρE) - oracle| = {} over 1000 instances x 100 states ({}, target < 30s)",
            tally.describe(),
            secs(elapsed)
        ),
    }
}

fn scalar(m: &HermitianMatrix) -> f64 {
    m.get(0, 0).re
}

fn classical_reduction() -> Outcome {
    let mut tally = Tally::default();
    for trial in 0..1000 {
        let mut rng = trial_rng(2, trial);
        let n = rng.random_range(3..=10);
        let nu1 = povm(&mut rng, n, 1);
        let nu2 = povm(&mut rng, n, 1);
        let p: Vec<f64> = nu1.atoms().iter().map(scalar).collect();
        let q: Vec<f64> = nu2.atoms().iter().map(scalar).collect();
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let psi = QuantumRandomVariable::new(
            SampleSpace::indexed(n),
            xs.iter().map(|&x| HermitianMatrix::from_real_diag(&[x])).collect(),
        )
        .unwrap();

        let classical_mean: f64 = p.iter().zip(&xs).map(|(a, b)| a * b).sum();
        tally.record(expectation(&psi, &nu1).map(|e| (scalar(&e) - classical_mean).abs()));

        let rn = rn_derivative(&nu2, &nu1, &tol());
        tally.record(rn.as_ref().map_err(Clone::clone).map(|r| {
            (0..n).map(|i| (scalar(r.value(i)) - q[i] / p[i]).abs() / (q[i] / p[i]).max(1.0)).fold(0.0, f64::max)
        }));

        if let Ok(rn) = &rn {
            let ctx = RNContext::new(nu1.clone(), tol());
            tally.record(boxtimes(&psi, rn, &ctx).map(|b| {
                (0..n)
                    .map(|i| {
                        let expected = xs[i] * q[i] / p[i];
                        (scalar(b.value(i)) - expected).abs() / expected.abs().max(1.0)
                    })
                    .fold(0.0, f64::max)
            }));
        }

        let blocks = rng.random_range(2..n);
        let f = random_partition(n, rng.random(), blocks).unwrap();
        tally.record(cond_expectation(&psi, &nu1, &f, &tol()).map(|r| {
            let mut worst: f64 = 0.0;
            for (b, block) in f.blocks().iter().enumerate() {
                let mass: f64 = block.iter().map(|&i| p[i]).sum();
                let avg: f64 = block.iter().map(|&i| p[i] * xs[i]).sum::<f64>() / mass;
                worst = worst.max((scalar(&r.block_values[b]) - avg).abs());
            }
            worst
        }));

        tally.record(bayes_residual(&psi, &nu1, &nu2, &f, &tol()));
    }
    Outcome {
        pass: tally.ok(1e-12),
        summary: format!(
            "classical reduction (d = 1): max deviation from scalar formulas = {} over 1000 instances",
            tally.describe()
        ),
    }
}

fn change_of_measure() -> Outcome {
    let start = Instant::now();
    let mut tally = Tally::default();
    for trial in 0..1000 {
        let mut rng = trial_rng(3, trial);
        let d = rng.random_range(2..=6);
        let n = rng.random_range(2..=8);
        let nu1 = povm(&mut rng, n, d);
        let nu2 = povm(&mut rng, n, d);
        let psi = hermitian_qrv(&mut rng, n, d);
        tally.record(change_of_measure_residual(&psi, &nu2, &nu1, &tol()));
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: tally.ok(1e-8) && elapsed < Duration::from_secs(60),
        summary: format!(
            "change of measure: max residual = {} over 1000 pairs ({}, target < 60s)",
            tally.describe(),
            secs(elapsed)
        ),
    }
}

fn chain_rule() -> Outcome {
    let mut chain = Tally::default();
    let mut inverse = Tally::default();
    for trial in 0..1000 {
        let mut rng = trial_rng(4, trial);
        let d = rng.random_range(2..=6);
        let n = rng.random_range(2..=8);
        let nu1 = povm(&mut rng, n, d);
        let nu2 = povm(&mut rng, n, d);
        let nu3 = povm(&mut rng, n, d);
        chain.record(chain_rule_residual(&nu1, &nu2, &nu3, &tol()));
        inverse.record(inverse_residual(&nu1, &nu2, &tol()));
    }
    Outcome {
        pass: chain.ok(1e-8) && inverse.ok(1e-8),
        summary: format!(
            "chain rule / inverse: max residuals = {} / {} over 1000 triples",
            chain.describe(),
            inverse.describe()
        ),
    }
}

fn bayes() -> Outcome {
    let start = Instant::now();
    let mut tally = Tally::default();
    for trial in 0..1000 {
        let mut rng = trial_rng(5, trial);
        let d = rng.random_range(1..=4);
        let n = rng.random_range(3..=6);
        let nu1 = povm(&mut rng, n, d);
        let nu2 = povm(&mut rng, n, d);
        let psi = psd_qrv(&mut rng, n, d);
        let blocks = rng.random_range(2..n);
        let f = random_partition(n, rng.random(), blocks).unwrap();
        tally.record(bayes_residual(&psi, &nu1, &nu2, &f, &tol()));
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: tally.ok(1e-8) && elapsed < Duration::from_secs(120),
        summary: format!(
            "Bayes' rule: max residual = {} over 1000 instances ({}, target < 120s)",
            tally.describe(),
            secs(elapsed)
        ),
    }
}

fn jensen() -> Outcome {
    // tracks the most negative eigenvalue of any gap, as a positive number
    let mut plain = Tally::default();
    let mut conditional = Tally::default();
    let positive = Interval::new(0.05, 4.0);
    for trial in 0..1000 {
        let mut rng = trial_rng(6, trial);
        let d = rng.random_range(1..=5);
        let n = rng.random_range(2..=8);
        let nu = povm(&mut rng, n, d);
        let blocks = rng.random_range(1..=n);
        let f = random_partition(n, rng.random(), blocks).unwrap();
        for g in OperatorConvex::ALL {
            let (psi, interval) = match g {
                OperatorConvex::Square => (hermitian_qrv(&mut rng, n, d), Interval::REAL_LINE),
                _ => (
                    QuantumRandomVariable::new(
                        SampleSpace::indexed(n),
                        (0..n).map(|_| random_hermitian_in(&mut rng, d, positive)).collect(),
                    )
                    .unwrap(),
                    positive,
                ),
            };
            plain.record(jensen_gap(&psi, &nu, g, interval, &tol()).and_then(|gap| Ok(-gap.min_eigenvalue()?)));
            conditional.record(cond_jensen_gap(&psi, &nu, &f, g, interval, &tol()).and_then(|gaps| {
                gaps.iter().try_fold(f64::NEG_INFINITY, |acc, gap| Ok(acc.max(-gap.min_eigenvalue()?)))
            }));
        }
    }
    Outcome {
        pass: plain.ok(1e-8) && conditional.ok(1e-8),
        summary: format!(
            "Jensen / conditional Jensen: most negative gap eigenvalue = -({}) / -({}) over 1000 instances x 4 functions",
            plain.describe(),
            conditional.describe()
        ),
    }
}

fn channel_structure() -> Outcome {
    let mut choi = Tally::default();
    let mut trace = Tally::default();
    let mut idempotence = Tally::default();
    let mut range = Tally::default();
    for trial in 0..200 {
        let mut rng = trial_rng(7, trial);
        let d = rng.random_range(1..=4);
        let n = rng.random_range(1..=6);
        let nu = if trial % 2 == 0 {
            povm(&mut rng, n, d)
        } else {
            qprob::measure::random_commuting_povm(SampleSpace::indexed(n), d, rng.random()).unwrap()
        };
        choi.record(choi_matrix(&nu).and_then(|c| Ok(-c.min_eigenvalue()?)));
        for _ in 0..100 {
            let z = gaussian_matrix(&mut rng, d);
            trace.record(channel_apply(&nu, &z).map(|e| (e.trace() - z.trace()).norm()));
        }
        match (cesaro_projection(&nu, DEFAULT_CESARO_MAX_TERMS, &tol()), fixed_points(&nu, &tol())) {
            (Ok(p), Ok(fixed)) => {
                idempotence.record(Ok(p.map.compose(&p.map).dist(&p.map)));
                let e = channel_as_supermap(&nu).unwrap();
                // range ⊆ fixed points, and every fixed point is reproduced
                let into = e.compose(&p.map).dist(&p.map);
                let onto = fixed.iter().map(|f| p.map.apply(f.matrix()).dist(f.matrix())).fold(0.0, f64::max);
                range.record(Ok(into.max(onto)));
            }
            (Err(e), _) | (_, Err(e)) => idempotence.record(Err(e)),
        }
    }
    Outcome {
        pass: choi.ok(1e-8) && trace.ok(1e-10) && idempotence.ok(1e-7) && range.ok(1e-7),
        summary: format!(
            "channel structure: Choi min eig >= -({}), trace defect {}, Cesàro idempotence {}, range vs fixed points {} over 200 instances",
            choi.describe(),
            trace.describe(),
            idempotence.describe(),
            range.describe()
        ),
    }
}

fn worked_example() -> Outcome {
    let mut closed = Tally::default();
    let mut assembled = Tally::default();
    for trial in 0..1000 {
        let mut rng = trial_rng(8, trial);
        let d = rng.random_range(1..=6);
        let n = rng.random_range(2..=10);
        let nu = povm(&mut rng, n, d);
        let psi = psd_qrv(&mut rng, n, d);
        let f = Partition::new(n, vec![vec![0], (1..n).collect()]).unwrap();
        let r = match cond_expectation(&psi, &nu, &f, &tol()) {
            Ok(r) => r,
            Err(e) => {
                closed.fail(e.to_string());
                continue;
            }
        };

        // (Σ_{j≥2} h_j)^{-1/2} Σ_{j≥2} h_j^{1/2} ψ(x_j) h_j^{1/2} (Σ_{j≥2} h_j)^{-1/2}
        let mut s = HermitianMatrix::zeros(d);
        let mut t = HermitianMatrix::zeros(d);
        for j in 1..n {
            s.add_assign(nu.atom(j));
            let root = psd_sqrt(nu.atom(j), &tol()).unwrap();
            t.add_assign(&psi.value(j).sandwich(&root));
        }
        let (_, s_inv_sqrt) = psd_sqrt_and_inv_sqrt(&s, &tol()).unwrap();
        let rest = t.sandwich(&s_inv_sqrt);
        let scale = 1.0 + psi.values().iter().map(|v| v.frobenius_norm()).fold(0.0, f64::max);
        let mut worst = r.phi.value(0).dist(psi.value(0));
        for k in 1..n {
            worst = worst.max(r.phi.value(k).dist(&rest));
        }
        closed.record(Ok(worst / scale));

        // dν̃/dν′ on the two-point block space from the three-factor formula
        let nu_prime = restrict(&nu, &f, &tol()).unwrap();
        let tilde_atoms = vec![
            integral_over(&psi, &nu, &[0]).unwrap(),
            integral_over(&psi, &nu, &(1..n).collect::<Vec<_>>()).unwrap(),
        ];
        assembled.record(
            QuantumMeasure::new(nu_prime.space().clone(), tilde_atoms, &tol())
                .and_then(|tilde| rn_derivative_assembled(&tilde, &nu_prime, &tol()))
                .map(|rn| (0..2).map(|b| rn.value(b).dist(&r.block_values[b])).fold(0.0, f64::max) / scale),
        );
    }
    Outcome {
        pass: closed.ok(1e-10) && assembled.ok(1e-8),
        summary: format!(
            "two-block worked example: vs closed form {}, vs assembled dν̃/dν′ {} over 1000 instances (relative to 1 + max‖ψ‖)",
            closed.describe(),
            assembled.describe()
        ),
    }
}

fn rn_reproduction() -> Outcome {
    let mut tally = Tally::default();
    for trial in 0..1000 {
        let mut rng = trial_rng(9, trial);
        let d = rng.random_range(1..=6);
        let n = rng.random_range(1..=8);
        let (nu1, nu2) = if trial % 2 == 0 {
            (povm(&mut rng, n, d), povm(&mut rng, n, d))
        } else {
            // singular atoms, ν₂ supported inside ν₁ atom by atom
            let mut a1 = Vec::with_capacity(n);
            let mut a2 = Vec::with_capacity(n);
            for _ in 0..n {
                let rank = rng.random_range(1..=d);
                let u = random_unitary(&mut rng, d);
                let vals: Vec<f64> = (0..d).map(|k| if k < rank { rng.random_range(0.1..1.0) } else { 0.0 }).collect();
                let h1 = HermitianMatrix::from_real_diag(&vals).congruence(&u);
                let q = support_projection(&h1, &tol()).unwrap();
                a1.push(h1);
                a2.push(random_psd(&mut rng, d, 0.0).sandwich(&q));
            }
            let s = SampleSpace::indexed(n);
            (QuantumMeasure::new(s.clone(), a1, &tol()).unwrap(), QuantumMeasure::new(s, a2, &tol()).unwrap())
        };
        tally.record(verify_rn(&nu2, &nu1, &tol()).and_then(|r| {
            if r.strong.holds {
                Ok(r.max_residual)
            } else {
                Err(QprobError::Precondition("generator produced a non-strongly-continuous pair".into()))
            }
        }));
    }
    let diag = HermitianMatrix::from_real_diag;
    let s = SampleSpace::indexed(2);
    let nu1 = QuantumMeasure::new(s.clone(), vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], &tol()).unwrap();
    let nu2 = QuantumMeasure::new(s, vec![diag(&[0.5, 0.5]), diag(&[0.5, 0.5])], &tol()).unwrap();
    let counter = verify_rn(&nu2, &nu1, &tol()).unwrap();
    Outcome {
        pass: tally.ok(1e-8) && counter.max_residual >= 0.4 && counter.flagged,
        summary: format!(
            "RN reproduction: max residual = {} over 1000 strongly continuous pairs; weak-only counterexample residual {:.3} (flagged: {})",
            tally.describe(),
            counter.max_residual,
            counter.flagged
        ),
    }
}

fn geometric_mean_kernel() -> Outcome {
    let mut self_mean = Tally::default();
    let mut unit = Tally::default();
    let mut commuting = Tally::default();
    let mut geo2 = Tally::default();
    let mut ladder = Tally::default();
    let rel = |a: &HermitianMatrix, b: &HermitianMatrix| a.dist(b) / (1.0 + b.frobenius_norm());
    for trial in 0..1000 {
        let mut rng = trial_rng(10, trial);
        let d = rng.random_range(1..=6);
        let singular = trial % 2 == 1;
        let make = |rng: &mut SeededRng| {
            if singular {
                let rank = rng.random_range(0..d.max(1));
                let u = random_unitary(rng, d);
                let vals: Vec<f64> = (0..d).map(|k| if k < rank { rng.random_range(0.0..3.0) } else { 0.0 }).collect();
                HermitianMatrix::from_real_diag(&vals).congruence(&u)
            } else {
                random_psd(rng, d, 0.05)
            }
        };
        let a = make(&mut rng);
        let b = make(&mut rng);

        self_mean.record(geometric_mean(&a, &a, &tol()).map(|m| rel(&m, &a)));
        unit.record(
            geometric_mean(&HermitianMatrix::identity(d), &b, &tol()).and_then(|m| Ok(rel(&m, &psd_sqrt(&b, &tol())?))),
        );

        let u = random_unitary(&mut rng, d);
        let da: Vec<f64> = (0..d).map(|k| if singular && k == 0 { 0.0 } else { rng.random_range(0.0..3.0) }).collect();
        let db: Vec<f64> =
            (0..d).map(|k| if singular && k == d - 1 { 0.0 } else { rng.random_range(0.0..3.0) }).collect();
        let ca = HermitianMatrix::from_real_diag(&da).congruence(&u);
        let cb = HermitianMatrix::from_real_diag(&db).congruence(&u);
        let expected: Vec<f64> = da.iter().zip(&db).map(|(x, y)| (x * y).sqrt()).collect();
        let expected = HermitianMatrix::from_real_diag(&expected).congruence(&u);
        commuting.record(geometric_mean(&ca, &cb, &tol()).map(|m| rel(&m, &expected)));

        if !singular {
            let ra = psd_sqrt(&a, &tol()).unwrap();
            let lhs = psd_sqrt(&b.sandwich(&ra), &tol()).unwrap();
            geo2.record(
                qprob::herm::generalized_inverse(&a, &tol())
                    .and_then(|inv| geometric_mean(&inv, &b, &tol()))
                    .map(|m| rel(&m.sandwich(&ra), &lhs)),
            );
            let last_eps = *tol().gm_eps_ladder.last().unwrap();
            ladder.record(
                regularized_geometric_mean(&a, &b, last_eps, &tol())
                    .and_then(|reg| Ok(rel(&reg, &geometric_mean(&a, &b, &tol())?))),
            );
        }
    }
    Outcome {
        pass: [&self_mean, &unit, &commuting, &geo2, &ladder].iter().all(|t| t.ok(1e-7)),
        summary: format!(
            "geometric mean: a#a {}, 1#b {}, commuting {}, geo2 identity {}, ε-ladder {} over 1000 pairs (relative to 1 + ‖expected‖)",
            self_mean.describe(),
            unit.describe(),
            commuting.describe(),
            geo2.describe(),
            ladder.describe()
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1", definition_consistency),
        ("2", classical_reduction),
        ("3", change_of_measure),
        ("4", chain_rule),
        ("5", bayes),
        ("6", jensen),
        ("7", channel_structure),
        ("8", worked_example),
        ("9", rn_reproduction),
        ("10", geometric_mean_kernel),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (id, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let outcome = run();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id:>2}: {}", outcome.summary);
        if !outcome.pass {
            failures += 1;
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion(s) failed");
        ExitCode::FAILURE
    }
}
