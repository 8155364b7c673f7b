//! Seeded random instances. Every generator takes an explicit RNG or seed;
//! there is no global RNG state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::herm::{HermitianMatrix, Interval};
use crate::matrix::{Matrix, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a campaign seed and a trial index into an independent trial seed
/// (splitmix64 finalizer), so serial and parallel runs see the same seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard complex Gaussian: `E|z|^2 = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Matrix {
    let data = (0..d * d).map(|_| complex_gaussian(rng)).collect();
    Matrix::from_vec(d, data).expect("square by construction")
}

/// Haar-ish unitary from Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Matrix {
    loop {
        let g = gaussian_matrix(rng, d);
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
        let mut degenerate = false;
        for j in 0..d {
            let mut v: Vec<C64> = (0..d).map(|i| g[(i, j)]).collect();
            for _ in 0..2 {
                for c in &cols {
                    let proj: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (vi, ci) in v.iter_mut().zip(c) {
                        *vi -= proj * ci;
                    }
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                degenerate = true;
                break;
            }
            cols.push(v.into_iter().map(|z| z / norm).collect());
        }
        if degenerate {
            continue;
        }
        let mut u = Matrix::zeros(d);
        for (j, c) in cols.iter().enumerate() {
            for (i, z) in c.iter().enumerate() {
                u[(i, j)] = *z;
            }
        }
        return u;
    }
}

/// `A A^† + ridge · 1` with Gaussian `A`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, d: usize, ridge: f64) -> HermitianMatrix {
    let a = gaussian_matrix(rng, d);
    let g = HermitianMatrix::symmetrized(&(&a * &a.adjoint()));
    g.add(&HermitianMatrix::scalar(d, ridge))
}

/// `U diag(λ) U^†` with eigenvalues uniform in `[interval.lo, interval.hi]`.
pub fn random_hermitian_in<R: Rng + ?Sized>(rng: &mut R, d: usize, interval: Interval) -> HermitianMatrix {
    let u = random_unitary(rng, d);
    let eig: Vec<f64> = (0..d).map(|_| rng.random_range(interval.lo..=interval.hi)).collect();
    HermitianMatrix::from_real_diag(&eig).congruence(&u)
}

/// Gaussian Hermitian matrix `(G + G^†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> HermitianMatrix {
    HermitianMatrix::symmetrized(&gaussian_matrix(rng, d))
}

/// Full-rank density matrix `G G^† / tr(G G^†)`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> HermitianMatrix {
    let g = random_psd(rng, d, 0.0);
    let t = g.trace();
    g.scale(1.0 / t)
}
