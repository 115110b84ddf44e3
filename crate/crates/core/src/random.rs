//! Seeded random states and operators.
//!
//! Each draw is indexed: `rng_for(seed, k)` gives the k-th independent stream,
//! so sweeps produce the same numbers regardless of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, CMatrix, CVector, Operator, StateVector};

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_complex<R: Rng>(rng: &mut R) -> num_complex::Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im)
}

/// Haar-random pure state (normalized complex Gaussian vector).
pub fn haar_state<R: Rng>(dim: usize, rng: &mut R) -> StateVector {
    loop {
        let v = CVector::from_fn(dim, |_, _| gaussian_complex(rng));
        if let Ok(s) = StateVector::normalized(v) {
            return s;
        }
    }
}

/// Random Hermitian operator with entries of order one (GUE-like).
pub fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> Operator {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let h = (&g + g.adjoint()) * c(0.5, 0.0);
    Operator::from_matrix(h).expect("finite square")
}

/// Random complex matrix, not Hermitian in general.
pub fn random_matrix<R: Rng>(dim: usize, rng: &mut R) -> Operator {
    Operator::from_matrix(CMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng)))
        .expect("finite square")
}

/// Haar-random unitary from the QR decomposition of a Gaussian matrix.
pub fn haar_unitary<R: Rng>(dim: usize, rng: &mut R) -> Operator {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for z in q.column_mut(k).iter_mut() {
            *z *= phase;
        }
    }
    Operator::from_matrix(q).expect("finite square")
}
