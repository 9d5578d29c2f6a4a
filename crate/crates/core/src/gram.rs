//! Block Gram matrices of ensembles and quasi-diagonal success blocks.
//!
//! Rows and columns are ordered by state index first and ensemble index
//! second, so block `(k, l)` of a [`BlockGram`] holds the overlaps
//! `<psi_m^(k)|psi_n^(l)>`.

use crate::error::{Error, Result};
use crate::numerics::{hermitian_eig, ComplexMatrix};
use crate::statemodel::Ensemble;

/// Tolerance for unitarity checks on rotations.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGram {
    blocks: Vec<usize>,
    mat: ComplexMatrix,
}

impl BlockGram {
    /// Wraps a Hermitian matrix with the given block partition.
    pub fn new(blocks: Vec<usize>, mat: ComplexMatrix) -> Result<Self> {
        let n: usize = blocks.iter().sum();
        if !mat.is_square() || mat.rows() != n {
            return Err(Error::PartitionMismatch(format!(
                "partition {blocks:?} does not match a {}x{} matrix",
                mat.rows(),
                mat.cols()
            )));
        }
        let residual = mat.hermitian_residual();
        if residual > 1e-10 * mat.max_abs().max(1.0) {
            return Err(Error::NonHermitian { residual });
        }
        Ok(Self {
            blocks,
            mat: mat.hermitian_part(),
        })
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    /// Row offset of block `k`.
    pub fn offset(&self, k: usize) -> usize {
        self.blocks[..k].iter().sum()
    }

    pub fn block(&self, k: usize, l: usize) -> ComplexMatrix {
        self.mat.block(
            self.offset(k),
            self.offset(l),
            self.blocks[k],
            self.blocks[l],
        )
    }

    /// `sum_k eta_k Tr(X_kk)`: the success probability of perfect
    /// discrimination, 1 for normalized states.
    pub fn weighted_mass(&self, priors: &[f64]) -> f64 {
        priors
            .iter()
            .enumerate()
            .map(|(k, eta)| eta * self.block(k, k).trace().re)
            .sum()
    }
}

/// Block-diagonal Hermitian matrix aligned with a [`BlockGram`] partition.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiDiagonal {
    blocks: Vec<ComplexMatrix>,
}

impl QuasiDiagonal {
    pub fn new(blocks: Vec<ComplexMatrix>) -> Result<Self> {
        for (k, b) in blocks.iter().enumerate() {
            if !b.is_square() {
                return Err(Error::PartitionMismatch(format!("block {k} is not square")));
            }
            if !b.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { blocks })
    }

    pub fn zeros(partition: &[usize]) -> Self {
        Self {
            blocks: partition
                .iter()
                .map(|&n| ComplexMatrix::zeros(n, n))
                .collect(),
        }
    }

    /// Diagonal blocks of a block Gram matrix.
    pub fn diagonal_of(x: &BlockGram) -> Self {
        Self {
            blocks: (0..x.num_blocks()).map(|k| x.block(k, k)).collect(),
        }
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ComplexMatrix] {
        &mut self.blocks
    }

    pub fn partition(&self) -> Vec<usize> {
        self.blocks.iter().map(ComplexMatrix::rows).collect()
    }

    pub fn to_full(&self) -> ComplexMatrix {
        ComplexMatrix::block_diag(&self.blocks)
    }

    /// Block traces `Tr(Y_kk)`.
    pub fn traces(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace().re).collect()
    }

    pub fn objective(&self, priors: &[f64]) -> f64 {
        self.traces().iter().zip(priors).map(|(t, e)| t * e).sum()
    }

    /// Smallest eigenvalue over all blocks (`+inf` when every block is empty).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for b in &self.blocks {
            if b.rows() > 0 {
                worst = worst.min(hermitian_eig(&b.hermitian_part())?.min_value());
            }
        }
        Ok(worst)
    }
}

/// Gram matrix of the concatenated ensembles.
pub fn build_block_gram(ensembles: &[Ensemble]) -> Result<BlockGram> {
    let dim = ensembles.first().map_or(0, Ensemble::dim);
    if let Some(k) = ensembles.iter().position(|e| e.dim() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "ensemble {k} lives in dimension {}, expected {dim}",
            ensembles[k].dim()
        )));
    }
    let parts: Vec<&ComplexMatrix> = ensembles.iter().map(Ensemble::matrix).collect();
    let psi = ComplexMatrix::hstack(&parts)?;
    let gram = (&psi.adjoint() * &psi).hermitian_part();
    BlockGram::new(ensembles.iter().map(Ensemble::len).collect(), gram)
}

/// Applies per-block unitaries: block `(k, l)` becomes `U_k X_kl U_l^dagger`.
pub fn apply_unitary_freedom(x: &BlockGram, rotations: &[ComplexMatrix]) -> Result<BlockGram> {
    if rotations.len() != x.num_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "{} rotations for {} blocks",
            rotations.len(),
            x.num_blocks()
        )));
    }
    for (k, u) in rotations.iter().enumerate() {
        if !u.is_square() || u.rows() != x.blocks()[k] {
            return Err(Error::DimensionMismatch(format!(
                "rotation {k} is {}x{}, block has size {}",
                u.rows(),
                u.cols(),
                x.blocks()[k]
            )));
        }
        let residual = (&u.adjoint() * u).identity_residual();
        if residual > UNITARY_TOL {
            return Err(Error::NotUnitary { index: k, residual });
        }
    }
    let u = ComplexMatrix::block_diag(rotations);
    let rotated = &(&u * x.matrix()) * &u.adjoint();
    BlockGram::new(x.blocks().to_vec(), rotated.hermitian_part())
}

/// `B = X - diag(Y)`; the caller decides whether `B` is PSD.
pub fn residual(x: &BlockGram, y: &QuasiDiagonal) -> Result<ComplexMatrix> {
    if y.partition() != x.blocks() {
        return Err(Error::PartitionMismatch(format!(
            "Y blocks {:?} vs X blocks {:?}",
            y.partition(),
            x.blocks()
        )));
    }
    Ok(x.matrix() - &y.to_full())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, min_eigenvalue, re};
    use crate::random;
    use approx::assert_abs_diff_eq;

    fn ens(vectors: &[Vec<crate::numerics::C64>]) -> Ensemble {
        Ensemble::from_vectors(vectors[0].len(), vectors).unwrap()
    }

    #[test]
    fn build_examples() {
        let g = build_block_gram(&[ens(&[vec![re(1.0), re(0.0)]])]).unwrap();
        assert_eq!(g.dim(), 1);
        assert_abs_diff_eq!(g.matrix()[(0, 0)].re, 1.0);

        let g = build_block_gram(&[
            ens(&[vec![re(1.0), re(0.0)]]),
            ens(&[vec![re(0.0), re(1.0)]]),
        ])
        .unwrap();
        assert!(g.matrix().identity_residual() < 1e-15);

        // overlap c = 0.3 + 0.4i
        let cval = c(0.3, 0.4);
        let s = (1.0 - cval.norm_sqr()).sqrt();
        let g =
            build_block_gram(&[ens(&[vec![re(1.0), re(0.0)]]), ens(&[vec![cval, re(s)]])]).unwrap();
        assert_abs_diff_eq!((g.matrix()[(0, 1)] - cval).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            (g.matrix()[(1, 0)] - cval.conj()).norm(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(g.matrix()[(1, 1)].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn build_rejects_mixed_dimensions() {
        let r = build_block_gram(&[ens(&[vec![re(1.0)]]), ens(&[vec![re(1.0), re(0.0)]])]);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn unitary_freedom_examples() {
        let mut rng = random::rng(11);
        let e1 = Ensemble::new(random::gaussian_matrix(&mut rng, 4, 2));
        let e2 = Ensemble::new(random::gaussian_matrix(&mut rng, 4, 2));
        let x = build_block_gram(&[e1, e2]).unwrap();

        let same = apply_unitary_freedom(
            &x,
            &[ComplexMatrix::identity(2), ComplexMatrix::identity(2)],
        )
        .unwrap();
        assert!((same.matrix() - x.matrix()).max_abs() < 1e-14);

        let u1 = random::unitary(&mut rng, 2);
        let u2 = random::unitary(&mut rng, 2);
        let rotated = apply_unitary_freedom(&x, &[u1, u2]).unwrap();
        let before = hermitian_eig(x.matrix()).unwrap().values;
        let after = hermitian_eig(rotated.matrix()).unwrap().values;
        for (a, b) in before.iter().zip(&after) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for k in 0..2 {
            assert_abs_diff_eq!(
                x.block(k, k).trace().re,
                rotated.block(k, k).trace().re,
                epsilon = 1e-12
            );
        }
    }

    fn phase(t: f64) -> crate::numerics::C64 {
        c(t.cos(), t.sin())
    }

    #[test]
    fn unitary_freedom_phases_keep_diagonal() {
        let x = BlockGram::new(
            vec![1, 1],
            ComplexMatrix::from_rows(&[vec![re(1.0), c(0.2, 0.1)], vec![c(0.2, -0.1), re(1.0)]])
                .unwrap(),
        )
        .unwrap();
        let p1 = ComplexMatrix::from_rows(&[vec![phase(0.7)]]).unwrap();
        let p2 = ComplexMatrix::from_rows(&[vec![phase(-1.3)]]).unwrap();
        let y = apply_unitary_freedom(&x, &[p1, p2]).unwrap();
        assert_abs_diff_eq!(y.matrix()[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.matrix()[(1, 1)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            y.matrix()[(0, 1)].norm(),
            x.matrix()[(0, 1)].norm(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn unitary_freedom_rejects_non_unitary() {
        let x = BlockGram::new(vec![1, 1], ComplexMatrix::identity(2)).unwrap();
        let r = apply_unitary_freedom(
            &x,
            &[ComplexMatrix::identity(1), ComplexMatrix::diag_real(&[2.0])],
        );
        assert!(matches!(r, Err(Error::NotUnitary { index: 1, .. })));
        let r = apply_unitary_freedom(&x, &[ComplexMatrix::identity(1)]);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn residual_examples() {
        let cval = 0.5;
        let x = BlockGram::new(
            vec![1, 1],
            ComplexMatrix::from_real_rows(&[&[1.0, cval], &[cval, 1.0]]),
        )
        .unwrap();
        let b = residual(&x, &QuasiDiagonal::zeros(&[1, 1])).unwrap();
        assert_eq!(&b, x.matrix());

        let y = QuasiDiagonal::new(vec![
            ComplexMatrix::diag_real(&[1.0 - cval]),
            ComplexMatrix::diag_real(&[1.0 - cval]),
        ])
        .unwrap();
        let b = residual(&x, &y).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[&[cval, cval], &[cval, cval]]);
        assert!((&b - &expected).max_abs() < 1e-15);
        assert_abs_diff_eq!(min_eigenvalue(&b).unwrap(), 0.0, epsilon = 1e-15);

        let blockdiag = BlockGram::new(vec![1, 1], ComplexMatrix::diag_real(&[0.3, 0.7])).unwrap();
        let b = residual(&blockdiag, &QuasiDiagonal::diagonal_of(&blockdiag)).unwrap();
        assert_eq!(b.max_abs(), 0.0);

        let mismatched = QuasiDiagonal::zeros(&[2]);
        assert!(matches!(
            residual(&x, &mismatched),
            Err(Error::PartitionMismatch(_))
        ));
    }
}
