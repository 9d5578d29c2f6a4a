//! Seeded generators for test fixtures: random states, unitaries and priors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::{c, complete_orthonormal, orthonormalize_against, ComplexMatrix, C64};
use crate::statemodel::DensityMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random density matrix of the given rank (Wishart construction).
pub fn density<R: Rng>(rng: &mut R, dim: usize, rank: usize) -> DensityMatrix {
    let g = gaussian_matrix(rng, dim, rank.min(dim));
    let rho = &g * &g.adjoint();
    let t = rho.trace().re;
    DensityMatrix::new_unchecked(rho.scale(1.0 / t).hermitian_part())
}

/// Random normalized pure state.
pub fn pure_state<R: Rng>(rng: &mut R, dim: usize) -> Vec<C64> {
    let v = gaussian_matrix(rng, dim, 1).column(0);
    let n = crate::numerics::norm_sqr(&v).sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// Haar-ish random unitary via Gram-Schmidt on a complex Gaussian matrix.
pub fn unitary<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = gaussian_matrix(rng, n, n);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for j in 0..n {
        if let Some(v) = orthonormalize_against(&g.column(j), &cols, 1e-8) {
            cols.push(v);
        }
    }
    let order: Vec<usize> = (0..n).collect();
    let cols = complete_orthonormal(cols, n, &order);
    ComplexMatrix::from_columns(n, &cols).expect("finite columns")
}

/// Two priors `(eta, 1 - eta)` with `eta` uniform in `[lo, 1 - lo]`.
pub fn priors_pair<R: Rng>(rng: &mut R, lo: f64) -> (f64, f64) {
    let eta = rng.gen_range(lo..1.0 - lo);
    (eta, 1.0 - eta)
}
