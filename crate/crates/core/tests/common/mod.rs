#![allow(dead_code)]

use cgeig_core::dense::DenseMatrix;
use cgeig_core::linops::{HermitianOperator, HermitianPencil};
use cgeig_core::precond::Preconditioner;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `BᵀB/n + shift·I` with Gaussian `B`.
pub fn random_spd(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
    let b = DenseMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let mut s = b.adjoint().matmul(&b).scaled(1.0 / n as f64);
    for i in 0..n {
        s[(i, i)] += shift;
    }
    s.hermitize();
    s
}

pub fn random_pencil(n: usize, rng: &mut ChaCha8Rng) -> HermitianPencil<f64> {
    let shift = rng.random_range(0.05..1.0);
    let a = HermitianOperator::from_dense(random_spd(n, shift, rng)).unwrap();
    let m = HermitianOperator::from_dense(random_spd(n, 1.0, rng)).unwrap();
    HermitianPencil::new(a, m).unwrap()
}

pub fn random_precond(n: usize, rng: &mut ChaCha8Rng) -> Preconditioner<f64> {
    let shift = rng.random_range(0.1..2.0);
    Preconditioner::from_dense(random_spd(n, shift, rng)).unwrap()
}
