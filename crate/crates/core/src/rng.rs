//! Deterministic random instances.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ncmat::MatElem;
use crate::scalar::{lit, Real};

pub type LabRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut LabRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn uniform(rng: &mut LabRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Standard complex Gaussian, `E|z|² = 1`.
pub fn cnormal<T: Real>(rng: &mut LabRng) -> Complex<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex::new(lit(normal(rng) * s), lit(normal(rng) * s))
}

pub fn gaussian_matrix<T: Real>(rng: &mut LabRng, n: usize) -> MatElem<T> {
    MatElem::from_fn(n, |_, _| cnormal(rng))
}

pub fn random_hermitian<T: Real>(rng: &mut LabRng, n: usize) -> MatElem<T> {
    gaussian_matrix::<T>(rng, n).hermitian_part()
}

/// `g g* / n` for a Gaussian `g`; full rank almost surely.
pub fn random_psd<T: Real>(rng: &mut LabRng, n: usize) -> MatElem<T> {
    let g = gaussian_matrix::<T>(rng, n);
    g.matmul(&g.adjoint()).scale_real(lit(1.0 / n as f64))
}

/// PSD matrix of random rank `1..=n`.
pub fn random_psd_low_rank<T: Real>(rng: &mut LabRng, n: usize, rank: usize) -> MatElem<T> {
    let mut acc = MatElem::<T>::zeros(n);
    for _ in 0..rank {
        let v: Vec<Complex<T>> = (0..n).map(|_| cnormal(rng)).collect();
        let outer = MatElem::from_fn(n, |i, j| v[i] * v[j].conj());
        acc = acc.add(&outer);
    }
    acc
}

pub fn random_unitary<T: Real>(rng: &mut LabRng, n: usize) -> MatElem<T> {
    let g = gaussian_matrix::<T>(rng, n);
    g.polar_decompose().expect("finite gaussian").0
}

pub fn rademacher(rng: &mut LabRng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}
