//! Unitary realization of an unambiguous discrimination strategy.
//!
//! A feasible `Y` splits the Gram matrix as `X = Y + B`. Factoring both parts
//! gives success vectors `phi` (Gram `Y`, one orthogonal sector per state) and
//! failure vectors `beta` (Gram `B`). Because inner products agree, the map
//! `psi (x) |0> -> phi + beta` is an isometry on the span of the inputs and is
//! completed to a unitary `U` on `C^d (x) C^e`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gram::{residual, BlockGram, QuasiDiagonal};
use crate::numerics::{complete_orthonormal, hermitian_eig, re, ComplexMatrix, C64};
use crate::statemodel::{DensityMatrix, Ensemble};

/// Tolerance for the Gram identity `Psi^dagger Psi = X` of the inputs.
const INPUT_GRAM_TOL: f64 = 1e-8;
/// Smallest admissible eigenvalue of `Y` and `X - Y`, relative to `||X||`.
const FACTOR_NEG_TOL: f64 = 1e-8;
/// Eigenvalues below this fraction of the largest are dropped when factoring.
const FACTOR_KEEP_TOL: f64 = 1e-13;
/// Every residual of a passing [`OutputReport`] stays below this.
pub const REALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Realization {
    /// Input vectors as columns, `d x n`, ordered block by block.
    pub input: ComplexMatrix,
    /// Block sizes of the inputs.
    pub partition: Vec<usize>,
    /// Success vectors in the output space `C^N`, one column per input.
    pub phi: ComplexMatrix,
    /// Failure vectors in `C^N`.
    pub beta: ComplexMatrix,
    /// Unitary on `C^N`, `N = input_dim * ancilla_dim`.
    pub u: ComplexMatrix,
    pub input_dim: usize,
    pub ancilla_dim: usize,
    /// `(offset, len)` of each state's success coordinates in `C^N`.
    pub success_sectors: Vec<(usize, usize)>,
    pub failure_sector: (usize, usize),
    /// The matrices the realization was built from.
    pub x: ComplexMatrix,
    pub y: QuasiDiagonal,
}

impl Realization {
    pub fn output_dim(&self) -> usize {
        self.input_dim * self.ancilla_dim
    }

    /// Embedding `|i> -> |i>|0>` of the input space, `N x d`.
    pub fn embedding(&self) -> ComplexMatrix {
        let mut j = ComplexMatrix::zeros(self.output_dim(), self.input_dim);
        for i in 0..self.input_dim {
            j[(i * self.ancilla_dim, i)] = re(1.0);
        }
        j
    }

    /// Projector onto state `k`'s success coordinates.
    pub fn success_projector(&self, k: usize) -> ComplexMatrix {
        let (off, len) = self.success_sectors[k];
        let mut p = ComplexMatrix::zeros(self.output_dim(), self.output_dim());
        for i in off..off + len {
            p[(i, i)] = re(1.0);
        }
        p
    }
}

/// `H = L L^dagger`, keeping eigenvalues above `FACTOR_KEEP_TOL * max`.
fn factor(h: &ComplexMatrix, floor: f64, what: &str) -> Result<ComplexMatrix> {
    if h.rows() == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }
    let eig = hermitian_eig(&h.hermitian_part())?;
    if eig.min_value() < floor {
        return Err(Error::InfeasiblePair(format!(
            "{what} has eigenvalue {:e}",
            eig.min_value()
        )));
    }
    let keep = eig.significant(FACTOR_KEEP_TOL);
    let mut l = ComplexMatrix::zeros(h.rows(), keep.len());
    for (dst, &i) in keep.iter().enumerate() {
        let s = eig.values[i].sqrt();
        for r in 0..h.rows() {
            l[(r, dst)] = eig.vectors[(r, i)] * s;
        }
    }
    Ok(l)
}

/// Builds output vectors and a unitary realizing `Y` for the given inputs.
pub fn realize(x: &BlockGram, y: &QuasiDiagonal, inputs: &[Ensemble]) -> Result<Realization> {
    if inputs.len() != x.num_blocks()
        || inputs
            .iter()
            .map(Ensemble::len)
            .ne(x.blocks().iter().copied())
    {
        return Err(Error::PartitionMismatch(format!(
            "ensemble sizes {:?} vs Gram blocks {:?}",
            inputs.iter().map(Ensemble::len).collect::<Vec<_>>(),
            x.blocks()
        )));
    }
    let b = residual(x, y)?;
    let d = inputs.first().map_or(0, Ensemble::dim);
    let parts: Vec<&ComplexMatrix> = inputs.iter().map(Ensemble::matrix).collect();
    let input = ComplexMatrix::hstack(&parts)?;
    let gram_err = (&(&input.adjoint() * &input) - x.matrix()).max_abs();
    if gram_err > INPUT_GRAM_TOL {
        return Err(Error::InvalidProblem(format!(
            "input vectors reproduce X only to {gram_err:e}"
        )));
    }

    let x_eig = hermitian_eig(x.matrix())?;
    let floor = -FACTOR_NEG_TOL * x_eig.spectral_norm().max(1.0);
    let y_factors = y
        .blocks()
        .iter()
        .enumerate()
        .map(|(k, yk)| factor(yk, floor, &format!("Y block {k}")))
        .collect::<Result<Vec<_>>>()?;
    let b_factor = factor(&b, floor, "X - Y")?;

    let success_len: usize = y_factors.iter().map(ComplexMatrix::cols).sum();
    let fail_len = b_factor.cols();
    let ancilla_dim = ((success_len + fail_len).div_ceil(d.max(1))).max(1);
    let big_n = d * ancilla_dim;

    let n = x.dim();
    let mut phi = ComplexMatrix::zeros(big_n, n);
    let mut success_sectors = Vec::with_capacity(y_factors.len());
    let mut row = 0;
    for (k, lk) in y_factors.iter().enumerate() {
        let col0 = x.offset(k);
        // phi_m = row m of L, conjugated: Gram(phi) = L L^dagger = Y_k.
        for m in 0..lk.rows() {
            for j in 0..lk.cols() {
                phi[(row + j, col0 + m)] = lk[(m, j)].conj();
            }
        }
        success_sectors.push((row, lk.cols()));
        row += lk.cols();
    }
    let failure_sector = (row, fail_len);
    let mut beta = ComplexMatrix::zeros(big_n, n);
    for m in 0..n {
        for j in 0..fail_len {
            beta[(row + j, m)] = b_factor[(m, j)].conj();
        }
    }

    // Orthonormal frames for the input span and its image.
    let range = x_eig.significant(1e-12);
    let scale_cols = |m: &ComplexMatrix| -> Vec<Vec<C64>> {
        range
            .iter()
            .map(|&i| {
                let v = x_eig.vectors.column(i);
                let s = 1.0 / x_eig.values[i].sqrt();
                m.mul_vec(&v).into_iter().map(|z| z * s).collect()
            })
            .collect()
    };
    let mut jmat = ComplexMatrix::zeros(big_n, d);
    for i in 0..d {
        jmat[(i * ancilla_dim, i)] = re(1.0);
    }
    let q_in = scale_cols(&(&jmat * &input));
    let q_out = scale_cols(&(&phi + &beta));

    let in_order: Vec<usize> = (0..big_n).collect();
    let out_order: Vec<usize> = (row..big_n).chain(0..row).collect();
    let full_in =
        ComplexMatrix::from_columns(big_n, &complete_orthonormal(q_in, big_n, &in_order))?;
    let full_out =
        ComplexMatrix::from_columns(big_n, &complete_orthonormal(q_out, big_n, &out_order))?;
    let u = &full_out * &full_in.adjoint();

    Ok(Realization {
        input,
        partition: x.blocks().to_vec(),
        phi,
        beta,
        u,
        input_dim: d,
        ancilla_dim,
        success_sectors,
        failure_sector,
        x: x.matrix().clone(),
        y: y.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputReport {
    /// Largest `|<phi^(k)|phi^(l)>|` over `k != l`.
    pub max_cross_overlap: f64,
    /// `max |U^dagger U - I|`.
    pub unitarity_residual: f64,
    /// `max |Gram(phi) - Y|`.
    pub phi_gram_residual: f64,
    /// `max |Gram(beta) - (X - Y)|`.
    pub beta_gram_residual: f64,
    /// `max |Gram(phi) + Gram(beta) - X|`.
    pub round_trip_residual: f64,
    /// `max |U (psi (x) |0>) - (phi + beta)|`.
    pub map_residual: f64,
    pub pass: bool,
}

pub fn verify_outputs(real: &Realization) -> OutputReport {
    let gram_phi = &real.phi.adjoint() * &real.phi;
    let gram_beta = &real.beta.adjoint() * &real.beta;
    let y_full = real.y.to_full();

    let mut max_cross_overlap: f64 = 0.0;
    let mut off = 0;
    let bounds: Vec<(usize, usize)> = real
        .partition
        .iter()
        .map(|&len| {
            let b = (off, off + len);
            off += len;
            b
        })
        .collect();
    for (k, &(a0, a1)) in bounds.iter().enumerate() {
        for &(b0, b1) in &bounds[k + 1..] {
            for i in a0..a1 {
                for j in b0..b1 {
                    max_cross_overlap = max_cross_overlap.max(gram_phi[(i, j)].norm());
                }
            }
        }
    }
    let unitarity_residual = (&real.u.adjoint() * &real.u).identity_residual();
    let phi_gram_residual = (&gram_phi - &y_full).max_abs();
    let beta_gram_residual = (&gram_beta - &(&real.x - &y_full)).max_abs();
    let round_trip_residual = (&(&gram_phi + &gram_beta) - &real.x).max_abs();
    let mapped = &(&real.u * &real.embedding()) * &real.input;
    let map_residual = (&mapped - &(&real.phi + &real.beta)).max_abs();
    let pass = [
        max_cross_overlap,
        unitarity_residual,
        phi_gram_residual,
        beta_gram_residual,
        round_trip_residual,
        map_residual,
    ]
    .iter()
    .all(|&v| v <= REALIZATION_TOL);
    OutputReport {
        max_cross_overlap,
        unitarity_residual,
        phi_gram_residual,
        beta_gram_residual,
        round_trip_residual,
        map_residual,
        pass,
    }
}

/// Measurement on the input space; `elements[0]` is the inconclusive outcome.
#[derive(Debug, Clone)]
pub struct Povm {
    pub elements: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn completeness_residual(&self) -> f64 {
        let dim = self.elements.first().map_or(0, ComplexMatrix::rows);
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for e in &self.elements {
            sum = &sum + e;
        }
        sum.identity_residual()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for e in &self.elements {
            worst = worst.min(hermitian_eig(&e.hermitian_part())?.min_value());
        }
        Ok(worst)
    }

    /// `Tr(E_k rho_l)` for conclusive outcomes `k` (rows) and states `l`.
    pub fn detection_matrix(&self, states: &[DensityMatrix]) -> Vec<Vec<f64>> {
        self.elements[1..]
            .iter()
            .map(|e| states.iter().map(|s| (e * s.matrix()).trace().re).collect())
            .collect()
    }

    /// `sum_k eta_k Tr(E_k rho_k)`.
    pub fn success_probability(&self, states: &[DensityMatrix], priors: &[f64]) -> f64 {
        let d = self.detection_matrix(states);
        priors
            .iter()
            .enumerate()
            .map(|(k, eta)| eta * d[k][k])
            .sum()
    }

    /// Largest `|Tr(E_k rho_l)|` with `k != l`.
    pub fn max_false_detection(&self, states: &[DensityMatrix]) -> f64 {
        let d = self.detection_matrix(states);
        let mut worst: f64 = 0.0;
        for (k, row) in d.iter().enumerate() {
            for (l, v) in row.iter().enumerate() {
                if k != l {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }
}

/// `E_k = M_k^dagger M_k` with `M_k = Pi_k U J`, and `E_0 = I - sum_k E_k`.
pub fn extract_povm(real: &Realization) -> Result<Povm> {
    let uj = &real.u * &real.embedding();
    let mut elements = Vec::with_capacity(real.success_sectors.len() + 1);
    let mut total = ComplexMatrix::zeros(real.input_dim, real.input_dim);
    for k in 0..real.success_sectors.len() {
        let mk = &real.success_projector(k) * &uj;
        let ek = (&mk.adjoint() * &mk).hermitian_part();
        total = &total + &ek;
        elements.push(ek);
    }
    let e0 = (&ComplexMatrix::identity(real.input_dim) - &total).hermitian_part();
    elements.insert(0, e0);
    let povm = Povm { elements };
    let residual = povm.completeness_residual();
    let min_eig = povm.min_eigenvalue()?;
    if residual > REALIZATION_TOL || min_eig < -1e-9 {
        return Err(Error::CompletenessViolation {
            residual: residual.max(-min_eig),
        });
    }
    Ok(povm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::build_block_gram;
    use crate::numerics::norm_sqr;
    use approx::assert_abs_diff_eq;

    fn pure_pair(cval: f64) -> (Vec<Ensemble>, BlockGram) {
        let s = (1.0 - cval * cval).sqrt();
        let e1 = Ensemble::from_vectors(2, &[vec![re(1.0), re(0.0)]]).unwrap();
        let e2 = Ensemble::from_vectors(2, &[vec![re(cval), re(s)]]).unwrap();
        let x = build_block_gram(&[e1.clone(), e2.clone()]).unwrap();
        (vec![e1, e2], x)
    }

    fn diag_y(a: f64, b: f64) -> QuasiDiagonal {
        QuasiDiagonal::new(vec![
            ComplexMatrix::diag_real(&[a]),
            ComplexMatrix::diag_real(&[b]),
        ])
        .unwrap()
    }

    #[test]
    fn always_fail_strategy() {
        let (ens, x) = pure_pair(0.5);
        let real = realize(&x, &QuasiDiagonal::zeros(&[1, 1]), &ens).unwrap();
        assert_eq!(real.phi.max_abs(), 0.0);
        let report = verify_outputs(&real);
        assert!(report.pass, "{report:?}");
        let povm = extract_povm(&real).unwrap();
        assert_abs_diff_eq!(povm.elements[0].identity_residual(), 0.0, epsilon = 1e-10);
        assert!(povm.elements[1].max_abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_relabels() {
        let (ens, x) = pure_pair(0.0);
        let real = realize(&x, &diag_y(1.0, 1.0), &ens).unwrap();
        assert_eq!(real.beta.max_abs(), 0.0);
        assert!(verify_outputs(&real).pass);
        let povm = extract_povm(&real).unwrap();
        assert!(povm.elements[0].max_abs() < 1e-10);
        assert_abs_diff_eq!(povm.elements[1][(0, 0)].re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(povm.elements[2][(1, 1)].re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn overlapping_pair_half_success() {
        let (ens, x) = pure_pair(0.5);
        let real = realize(&x, &diag_y(0.5, 0.5), &ens).unwrap();
        assert!(verify_outputs(&real).pass);
        assert_abs_diff_eq!(norm_sqr(&real.phi.column(0)), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(norm_sqr(&real.phi.column(1)), 0.5, epsilon = 1e-12);
        // beta vectors are parallel: |<b1|b2>| = |b1| |b2|
        let b1 = real.beta.column(0);
        let b2 = real.beta.column(1);
        let overlap = crate::numerics::inner(&b1, &b2).norm();
        assert_abs_diff_eq!(
            overlap,
            (norm_sqr(&b1) * norm_sqr(&b2)).sqrt(),
            epsilon = 1e-12
        );

        let povm = extract_povm(&real).unwrap();
        let states: Vec<DensityMatrix> = ens
            .iter()
            .map(|e| DensityMatrix::new_unchecked(e.density_matrix()))
            .collect();
        let det = povm.detection_matrix(&states);
        assert!(det[0][1].abs() <= 1e-8);
        assert_abs_diff_eq!(det[0][0], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn infeasible_y_is_rejected() {
        let (ens, x) = pure_pair(0.5);
        assert!(matches!(
            realize(&x, &diag_y(0.9, 0.9), &ens),
            Err(Error::InfeasiblePair(_))
        ));
    }

    #[test]
    fn perturbed_unitary_is_flagged() {
        let (ens, x) = pure_pair(0.5);
        let mut real = realize(&x, &diag_y(0.5, 0.5), &ens).unwrap();
        real.u[(0, 0)] += re(1e-3);
        let report = verify_outputs(&real);
        assert!(!report.pass);
        assert!(report.unitarity_residual > 1e-4);
    }
}
