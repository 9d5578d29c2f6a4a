//! Canonical vectors of two density matrices.
//!
//! For ensembles `Psi1`, `Psi2` of `rho1`, `rho2` the cross Gram block
//! `A = Psi1^dagger Psi2` has an SVD `A = U diag(f) V^dagger`. Rotating the
//! ensembles to `R = Psi1 U` and `S = Psi2 V` leaves the states unchanged and
//! makes the only nonzero cross overlaps `<r_m|s_m> = f_m`. The singular
//! values sum to the Uhlmann fidelity.

use crate::error::{Error, Result};
use crate::gram::{apply_unitary_freedom, build_block_gram, BlockGram};
use crate::numerics::{matrix_sqrt_psd, norm_sqr, re, svd, ComplexMatrix};
use crate::statemodel::{
    spectral_ensemble, support_projector_of, validate_density, DensityMatrix, Ensemble, UDProblem,
    DEFAULT_RANK_TOL,
};

/// Simultaneous decomposition of two states.
#[derive(Debug, Clone)]
pub struct CanonicalPair {
    /// Columns `|r_m>`; `sum |r_m><r_m| = rho1`.
    pub r_vectors: ComplexMatrix,
    /// Columns `|s_n>`; `sum |s_n><s_n| = rho2`.
    pub s_vectors: ComplexMatrix,
    /// Singular values of the cross Gram block, descending.
    pub f: Vec<f64>,
    /// Number of `f_m` above the rank tolerance.
    pub t: usize,
    /// Squared norms `<r_m|r_m>`.
    pub r_norms: Vec<f64>,
    /// Squared norms `<s_n|s_n>`.
    pub s_norms: Vec<f64>,
    /// Paired vectors `r_1..r_t` with their components along
    /// `supp(rho1) ∩ supp(rho2)^⊥` removed.
    pub reduced_r: ComplexMatrix,
    pub reduced_s: ComplexMatrix,
    /// `Tr(P_K1 rho1)` with `K1` the part of `supp(rho1)` orthogonal to `rho2`.
    pub orthogonal_mass1: f64,
    pub orthogonal_mass2: f64,
}

impl CanonicalPair {
    pub fn fidelity(&self) -> f64 {
        self.f.iter().sum()
    }

    /// `R^dagger S`; diagonal with entries `f_m` up to rounding.
    pub fn cross_overlaps(&self) -> ComplexMatrix {
        &self.r_vectors.adjoint() * &self.s_vectors
    }

    /// Squared norms of the reduced paired vectors.
    pub fn reduced_norms(&self) -> (Vec<f64>, Vec<f64>) {
        let norms = |m: &ComplexMatrix| (0..m.cols()).map(|j| norm_sqr(&m.column(j))).collect();
        (norms(&self.reduced_r), norms(&self.reduced_s))
    }
}

/// Canonical quantities recoverable from a two-block Gram matrix alone.
#[derive(Debug, Clone)]
pub struct GramCanonical {
    pub f: Vec<f64>,
    pub t: usize,
    pub r_norms: Vec<f64>,
    pub s_norms: Vec<f64>,
}

impl GramCanonical {
    pub fn fidelity(&self) -> f64 {
        self.f.iter().sum()
    }
}

/// Rotations `(U, V, f)` diagonalizing the cross block of a two-block Gram.
fn cross_svd(x: &BlockGram) -> Result<(ComplexMatrix, ComplexMatrix, Vec<f64>)> {
    if x.num_blocks() != 2 {
        return Err(Error::PartitionMismatch(format!(
            "canonical vectors need exactly two states, got {}",
            x.num_blocks()
        )));
    }
    let s = svd(&x.block(0, 1))?;
    Ok((s.left, s.right, s.singulars))
}

fn count_paired(f: &[f64]) -> usize {
    f.iter().filter(|&&v| v > DEFAULT_RANK_TOL).count()
}

/// Canonical singular values and norms of a two-state Gram matrix expressed
/// in any ensemble basis.
pub fn gram_canonical(x: &BlockGram) -> Result<GramCanonical> {
    let (u, v, f) = cross_svd(x)?;
    let x11 = &(&u.adjoint() * &x.block(0, 0)) * &u;
    let x22 = &(&v.adjoint() * &x.block(1, 1)) * &v;
    Ok(GramCanonical {
        t: count_paired(&f),
        r_norms: (0..x11.rows()).map(|i| x11[(i, i)].re).collect(),
        s_norms: (0..x22.rows()).map(|i| x22[(i, i)].re).collect(),
        f,
    })
}

/// The Gram matrix rotated into the canonical basis, where the cross block
/// is `diag(f)`, together with its canonical data.
pub fn canonical_gram(x: &BlockGram) -> Result<(BlockGram, GramCanonical)> {
    let (u, v, _) = cross_svd(x)?;
    let rotated = apply_unitary_freedom(x, &[u.adjoint(), v.adjoint()])?;
    Ok((rotated, gram_canonical(x)?))
}

/// Canonical vectors from two generating ensembles.
pub fn canonical_from_ensembles(e1: &Ensemble, e2: &Ensemble) -> Result<CanonicalPair> {
    let x = build_block_gram(&[e1.clone(), e2.clone()])?;
    let (u, v, f) = cross_svd(&x)?;
    let r_vectors = e1.matrix() * &u;
    let s_vectors = e2.matrix() * &v;
    let t = count_paired(&f);
    let col_norms =
        |m: &ComplexMatrix| -> Vec<f64> { (0..m.cols()).map(|j| norm_sqr(&m.column(j))).collect() };
    let r_norms = col_norms(&r_vectors);
    let s_norms = col_norms(&s_vectors);

    let (reduced_r, orthogonal_mass1) = project_out_unpaired(&r_vectors, t, e1)?;
    let (reduced_s, orthogonal_mass2) = project_out_unpaired(&s_vectors, t, e2)?;

    Ok(CanonicalPair {
        r_vectors,
        s_vectors,
        f,
        t,
        r_norms,
        s_norms,
        reduced_r,
        reduced_s,
        orthogonal_mass1,
        orthogonal_mass2,
    })
}

/// Removes from the first `t` columns their components in the span of the
/// remaining (unpaired) columns. Unpaired canonical vectors are orthogonal to
/// the other state's support, so this span is exactly the part of the
/// support that can be identified with certainty.
fn project_out_unpaired(
    vectors: &ComplexMatrix,
    t: usize,
    ens: &Ensemble,
) -> Result<(ComplexMatrix, f64)> {
    let d = vectors.rows();
    let unpaired: Vec<usize> = (t..vectors.cols()).collect();
    let paired: Vec<usize> = (0..t).collect();
    let head = vectors.select_columns(&paired);
    if unpaired.is_empty() {
        return Ok((head, 0.0));
    }
    let tail = vectors.select_columns(&unpaired);
    let proj = support_projector_of(&(&tail * &tail.adjoint()).hermitian_part())?;
    let complement = &ComplexMatrix::identity(d) - &proj;
    let mass = (&proj * &ens.density_matrix()).trace().re;
    Ok((&complement * &head, mass))
}

/// Canonical pair built from the spectral ensembles of two states.
pub fn canonical_pair(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<CanonicalPair> {
    check_same_dim(rho1, rho2)?;
    let e1 = spectral_ensemble(rho1, DEFAULT_RANK_TOL)?;
    let e2 = spectral_ensemble(rho2, DEFAULT_RANK_TOL)?;
    canonical_from_ensembles(&e1, &e2)
}

fn check_same_dim(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<()> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "states of dimension {} and {}",
            rho1.dim(),
            rho2.dim()
        )));
    }
    Ok(())
}

/// Fidelity as the sum of canonical singular values.
pub fn fidelity(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    Ok(canonical_pair(rho1, rho2)?.fidelity())
}

/// `Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))` evaluated with matrix square roots.
pub fn fidelity_via_sqrt(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho1, rho2)?;
    let s1 = matrix_sqrt_psd(rho1.matrix())?;
    let inner = (&(&s1 * rho2.matrix()) * &s1).hermitian_part();
    Ok(matrix_sqrt_psd(&inner)?.trace().re)
}

/// The `2t x 2t` Gram matrix of the reduced paired vectors: Gram blocks of
/// `{r_m}` and `{s_m}` on the diagonal, `diag(f_1..f_t)` off the diagonal.
pub fn reduced_gram(pair: &CanonicalPair) -> Result<BlockGram> {
    let t = pair.t;
    if t == 0 {
        return Err(Error::EmptyReduction);
    }
    let r = &pair.reduced_r;
    let s = &pair.reduced_s;
    let mut m = ComplexMatrix::zeros(2 * t, 2 * t);
    m.set_block(0, 0, &(&r.adjoint() * r));
    m.set_block(t, t, &(&s.adjoint() * s));
    for i in 0..t {
        m[(i, t + i)] = re(pair.f[i]);
        m[(t + i, i)] = re(pair.f[i]);
    }
    BlockGram::new(vec![t, t], m.hermitian_part())
}

/// Split of a two-state problem into a certainly-identified part and a
/// reduced problem on the paired canonical vectors.
#[derive(Debug, Clone)]
pub struct TwoStateReduction {
    pub pair: CanonicalPair,
    /// Success probability collected from components orthogonal to the other
    /// state's support.
    pub leftover: f64,
    /// Normalizations `N1`, `N2` of the reduced states.
    pub norms: (f64, f64),
    /// `eta1 N1 + eta2 N2`; the reduced problem's optimum is scaled by this.
    pub weight: f64,
    /// Reduced states `rho_k' = sum_{m<=t} |r_m'><r_m'| / N_k` with priors
    /// proportional to `eta_k N_k`; `None` when `t = 0`.
    pub reduced: Option<UDProblem>,
}

impl TwoStateReduction {
    /// Full success probability from the reduced problem's optimum.
    pub fn lift(&self, reduced_optimum: f64) -> f64 {
        self.leftover + self.weight * reduced_optimum
    }
}

pub fn reduce_two_state_problem(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    eta1: f64,
    eta2: f64,
) -> Result<TwoStateReduction> {
    crate::statemodel::check_priors(&[eta1, eta2])?;
    let pair = canonical_pair(rho1, rho2)?;
    let n1 = 1.0 - pair.orthogonal_mass1;
    let n2 = 1.0 - pair.orthogonal_mass2;
    let leftover = eta1 * pair.orthogonal_mass1 + eta2 * pair.orthogonal_mass2;
    if pair.t == 0 {
        return Ok(TwoStateReduction {
            pair,
            leftover: 1.0,
            norms: (0.0, 0.0),
            weight: 0.0,
            reduced: None,
        });
    }
    let state = |v: &ComplexMatrix, n: f64| -> Result<DensityMatrix> {
        validate_density(&(v * &v.adjoint()).scale(1.0 / n).hermitian_part())
    };
    let r1 = state(&pair.reduced_r, n1)?;
    let r2 = state(&pair.reduced_s, n2)?;
    let weight = eta1 * n1 + eta2 * n2;
    let p1 = eta1 * n1 / weight;
    let reduced = UDProblem::new(vec![r1, r2], vec![p1, 1.0 - p1])?;
    Ok(TwoStateReduction {
        pair,
        leftover,
        norms: (n1, n2),
        weight,
        reduced: Some(reduced),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::numerics::{c, C64};
    use approx::assert_abs_diff_eq;

    fn ket(v: &[f64]) -> Vec<C64> {
        v.iter().map(|x| re(*x)).collect()
    }

    #[test]
    fn orthogonal_pure_states_have_no_pairs() {
        let a = DensityMatrix::pure(&ket(&[1.0, 0.0])).unwrap();
        let b = DensityMatrix::pure(&ket(&[0.0, 1.0])).unwrap();
        let p = canonical_pair(&a, &b).unwrap();
        assert_eq!(p.t, 0);
        assert_abs_diff_eq!(p.fidelity(), 0.0, epsilon = 1e-15);
        assert!(matches!(reduced_gram(&p), Err(Error::EmptyReduction)));

        let red = reduce_two_state_problem(&a, &b, 0.3, 0.7).unwrap();
        assert!(red.reduced.is_none());
        assert_abs_diff_eq!(red.leftover, 1.0);
    }

    #[test]
    fn identical_pure_states() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::pure(&ket(&[s, s])).unwrap();
        let p = canonical_pair(&plus, &plus).unwrap();
        assert_eq!(p.t, 1);
        assert_abs_diff_eq!(p.f[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.r_norms[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.s_norms[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fidelity(&plus, &plus).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_two_example_pair() {
        let (rho1, rho2) = fixtures::rank_two_pair(0.4, 0.6).unwrap();
        let p = canonical_pair(&rho1, &rho2).unwrap();
        assert_eq!(p.t, 2);
        assert_abs_diff_eq!(p.f[0], 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(p.f[1], 0.2, epsilon = 1e-14);
        for m in 0..2 {
            assert_abs_diff_eq!(p.r_norms[m], 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(p.s_norms[m], 0.5, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(fidelity(&rho1, &rho2).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(
            fidelity_via_sqrt(&rho1, &rho2).unwrap(),
            0.5,
            epsilon = 1e-12
        );

        let g = reduced_gram(&p).unwrap();
        assert_eq!(g.blocks(), &[2, 2]);
        let expected = ComplexMatrix::from_real_rows(&[
            &[0.5, 0.0, 0.3, 0.0],
            &[0.0, 0.5, 0.0, 0.2],
            &[0.3, 0.0, 0.5, 0.0],
            &[0.0, 0.2, 0.0, 0.5],
        ]);
        assert!((g.matrix() - &expected).max_abs() < 1e-14);
    }

    #[test]
    fn pure_pair_reduced_gram() {
        let cval = 0.35;
        let a = DensityMatrix::pure(&ket(&[1.0, 0.0])).unwrap();
        let b = DensityMatrix::pure(&ket(&[cval, (1.0 - cval * cval).sqrt()])).unwrap();
        let g = reduced_gram(&canonical_pair(&a, &b).unwrap()).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[&[1.0, cval], &[cval, 1.0]]);
        assert!((g.matrix() - &expected).max_abs() < 1e-14);
    }

    #[test]
    fn fidelity_extremes() {
        let a = DensityMatrix::pure(&ket(&[1.0, 0.0, 0.0])).unwrap();
        let b = DensityMatrix::pure(&ket(&[0.0, 0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(fidelity(&a, &b).unwrap(), 0.0, epsilon = 1e-15);
        let mut rng = crate::random::rng(5);
        let rho = crate::random::density(&mut rng, 3, 3);
        assert_abs_diff_eq!(fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn full_overlap_has_no_leftover() {
        let mut rng = crate::random::rng(8);
        let r1 = crate::random::density(&mut rng, 3, 3);
        let r2 = crate::random::density(&mut rng, 3, 3);
        let red = reduce_two_state_problem(&r1, &r2, 0.5, 0.5).unwrap();
        assert_eq!(red.pair.t, 3);
        assert_abs_diff_eq!(red.leftover, 0.0, epsilon = 1e-14);
        let reduced = red.reduced.unwrap();
        assert!((reduced.states()[0].matrix() - r1.matrix()).max_abs() < 1e-12);
    }

    #[test]
    fn pure_versus_mixed_leftover() {
        // rho1 = |0><0|, rho2 = (|0><0| + |1><1|)/2: t = 1, N1 = 1, N2 = 1/2
        let a = DensityMatrix::pure(&ket(&[1.0, 0.0])).unwrap();
        let b = validate_density(&ComplexMatrix::diag_real(&[0.5, 0.5])).unwrap();
        let (eta1, eta2) = (0.4, 0.6);
        let red = reduce_two_state_problem(&a, &b, eta1, eta2).unwrap();
        assert_eq!(red.pair.t, 1);
        assert_abs_diff_eq!(red.norms.0, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(red.norms.1, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(red.leftover, eta2 / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn canonical_invariants_complex_states() {
        let mut rng = crate::random::rng(21);
        let r1 = crate::random::density(&mut rng, 4, 3);
        let r2 = crate::random::density(&mut rng, 4, 2);
        let p = canonical_pair(&r1, &r2).unwrap();
        let cross = p.cross_overlaps();
        for i in 0..cross.rows() {
            for j in 0..cross.cols() {
                let target = if i == j { p.f[i] } else { 0.0 };
                assert!((cross[(i, j)] - c(target, 0.0)).norm() < 1e-12);
            }
        }
        let regen = &p.r_vectors * &p.r_vectors.adjoint();
        assert!((&regen - r1.matrix()).max_abs() < 1e-12);
        for m in 0..p.t {
            assert!(p.f[m] <= (p.r_norms[m] * p.s_norms[m]).sqrt() + 1e-12);
        }
    }
}
