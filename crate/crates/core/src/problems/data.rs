use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifolds::random_spd_matrix;
use crate::rng::{derive_seed, seeded};

use super::SrwdData;

/// `n` SPD matrices with spectra drawn uniformly from `[mu0, mu1]` and
/// random orthogonal eigenbases.
pub fn random_spd_dataset(n: usize, d: usize, mu0: f64, mu1: f64, seed: u64) -> Result<Vec<Mat>> {
    if !(mu0 > 0.0) || !(mu1 >= mu0) || !mu1.is_finite() {
        return Err(Error::InvalidConfig(format!("spectrum [{mu0}, {mu1}] is not a positive interval")));
    }
    Ok((0..n)
        .map(|i| random_spd_matrix(d, mu0, mu1, derive_seed(seed, i as u64)))
        .collect())
}

/// Source points uniform on `[-1, 1]^d`; targets are an independent uniform
/// draw pushed through `T(x) = x + 2 sign(x) ⊙ (e₁ + … + e_k)`.
///
/// The returned data uses uniform weights, `r = k` and `eps = 0.2`.
pub fn fragmented_hypercube(n: usize, d: usize, k: usize, seed: u64) -> Result<SrwdData> {
    if k == 0 || k > d {
        return Err(Error::InvalidConfig(format!("fragmentation k = {k} must lie in 1..={d}")));
    }
    let mut rng = seeded(seed);
    let mut draw = || Mat::from_fn(n, d, |_, _| rng.random_range(-1.0..=1.0));
    let xs = draw();
    let mut ys = draw();
    for i in 0..n {
        for j in 0..k {
            let v = ys[(i, j)];
            ys[(i, j)] = v + 2.0 * sign(v);
        }
    }
    SrwdData::uniform(xs, ys, k, 0.2)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
