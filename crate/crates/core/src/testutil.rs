use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::{center_standardize, Dataset, Scaling};

pub fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
}

/// Centered random regression problem with a dense true coefficient.
pub fn random_problem(n: usize, p: usize, q: usize, seed: u64) -> Dataset {
    let x = gaussian(n, p, seed);
    let beta = gaussian(p, q, seed ^ 0x5eed);
    let y = &x * beta + gaussian(n, q, seed.wrapping_add(77)) * 0.5;
    center_standardize(&Dataset::new(x, y).unwrap(), Scaling::Center).unwrap()
}

/// Orthonormal n x k matrix whose columns are orthogonal to the ones
/// vector.
pub fn centered_orthonormal(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut g = gaussian(n, k, seed);
    for mut c in g.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    g.qr().q()
}

pub fn orthogonal(p: usize, seed: u64) -> DMatrix<f64> {
    gaussian(p, p, seed).qr().q()
}
