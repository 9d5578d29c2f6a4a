//! Density matrices, generating ensembles and supports.

use crate::error::{DensityViolation, Error, Result};
use crate::numerics::{hermitian_eig, svd, ComplexMatrix, C64, HERMITIAN_TOL};

/// Tolerance for the unit-trace and PSD checks on density matrices.
pub const DENSITY_TOL: f64 = 1e-10;
/// Eigenvalues below this fraction of the largest are dropped from ensembles
/// and supports.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Principal-angle threshold: singular values of `P1 P2` above `1 - 1e-8`
/// count as shared directions.
pub const INTERSECTION_TOL: f64 = 1e-8;

/// Hermitian, PSD, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Wraps a matrix that the caller guarantees is a valid state.
    pub fn new_unchecked(mat: ComplexMatrix) -> Self {
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    /// Pure state `|v><v|` of a normalized vector.
    pub fn pure(v: &[C64]) -> Result<Self> {
        let m = ComplexMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj());
        validate_density(&m)
    }

    /// Uniform mixture `(1/k) sum |v_i><v_i|` of normalized vectors.
    pub fn uniform_mixture(vectors: &[Vec<C64>]) -> Result<Self> {
        let k = vectors.len() as f64;
        let dim = vectors.first().map_or(0, Vec::len);
        let scaled: Vec<Vec<C64>> = vectors
            .iter()
            .map(|v| v.iter().map(|z| z / k.sqrt()).collect())
            .collect();
        validate_density(&Ensemble::from_vectors(dim, &scaled)?.density_matrix())
    }
}

/// Checks every density-matrix invariant and reports all violations at once.
pub fn validate_density(mat: &ComplexMatrix) -> Result<DensityMatrix> {
    if !mat.is_finite() {
        return Err(Error::NonFinite);
    }
    if !mat.is_square() {
        return Err(Error::InvalidDensity {
            violations: vec![DensityViolation::NotSquare {
                rows: mat.rows(),
                cols: mat.cols(),
            }],
        });
    }
    let mut violations = Vec::new();
    let residual = mat.hermitian_residual();
    if residual > HERMITIAN_TOL {
        violations.push(DensityViolation::NonHermitian { residual });
    }
    let herm = mat.hermitian_part();
    let trace = herm.trace().re;
    if (trace - 1.0).abs() > DENSITY_TOL {
        violations.push(DensityViolation::TraceNotOne { trace });
    }
    let min_eigenvalue = hermitian_eig(&herm)?.min_value();
    if min_eigenvalue < -DENSITY_TOL {
        violations.push(DensityViolation::NotPsd { min_eigenvalue });
    }
    if violations.is_empty() {
        Ok(DensityMatrix { mat: herm })
    } else {
        Err(Error::InvalidDensity { violations })
    }
}

/// Ordered family of unnormalized vectors; column `m` is `|psi_m>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    vectors: ComplexMatrix,
}

impl Ensemble {
    pub fn new(vectors: ComplexMatrix) -> Self {
        Self { vectors }
    }

    pub fn from_vectors(dim: usize, vectors: &[Vec<C64>]) -> Result<Self> {
        Ok(Self {
            vectors: ComplexMatrix::from_columns(dim, vectors)?,
        })
    }

    /// Validates that the vectors generate a density matrix and are linearly
    /// independent.
    pub fn checked(dim: usize, vectors: &[Vec<C64>]) -> Result<(Self, DensityMatrix)> {
        let ens = Self::from_vectors(dim, vectors)?;
        let rho = validate_density(&ens.density_matrix())?;
        let gram = &ens.vectors.adjoint() * &ens.vectors;
        let eig = hermitian_eig(&gram)?;
        if eig.significant(DEFAULT_RANK_TOL).len() < ens.len() {
            return Err(Error::InvalidProblem(
                "ensemble vectors are linearly dependent".into(),
            ));
        }
        Ok((ens, rho))
    }

    pub fn dim(&self) -> usize {
        self.vectors.rows()
    }

    pub fn len(&self) -> usize {
        self.vectors.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vector(&self, m: usize) -> Vec<C64> {
        self.vectors.column(m)
    }

    /// Vectors as columns of a `dim x len` matrix.
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.vectors
    }

    /// `sum_m |psi_m><psi_m|`.
    pub fn density_matrix(&self) -> ComplexMatrix {
        (&self.vectors * &self.vectors.adjoint()).hermitian_part()
    }
}

/// Eigen-ensemble `sqrt(lambda_i) |v_i>`, largest eigenvalue first, with
/// eigenvalues below `rank_tol * max` dropped.
pub fn spectral_ensemble(rho: &DensityMatrix, rank_tol: f64) -> Result<Ensemble> {
    let eig = hermitian_eig(rho.matrix())?;
    let keep = eig.significant(rank_tol);
    let mut vectors = ComplexMatrix::zeros(rho.dim(), keep.len());
    for (dst, &i) in keep.iter().enumerate() {
        let s = eig.values[i].sqrt();
        for r in 0..rho.dim() {
            vectors[(r, dst)] = eig.vectors[(r, i)] * s;
        }
    }
    Ok(Ensemble { vectors })
}

/// Orthogonal projector onto the support of a PSD matrix.
pub fn support_projector_of(mat: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(mat)?;
    let keep = eig.significant(DEFAULT_RANK_TOL);
    let basis = eig.vectors.select_columns(&keep);
    Ok((&basis * &basis.adjoint()).hermitian_part())
}

pub fn support_projector(rho: &DensityMatrix) -> Result<ComplexMatrix> {
    support_projector_of(rho.matrix())
}

/// Dimension of `supp(rho1) ∩ supp(rho2)` from the principal angles between
/// the two supports.
pub fn support_intersection_dim(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<usize> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "states of dimension {} and {}",
            rho1.dim(),
            rho2.dim()
        )));
    }
    let p1 = support_projector(rho1)?;
    let p2 = support_projector(rho2)?;
    let s = svd(&(&p1 * &p2))?;
    Ok(s.singulars
        .iter()
        .filter(|&&v| v >= 1.0 - INTERSECTION_TOL)
        .count())
}

/// States with prior probabilities.
#[derive(Debug, Clone)]
pub struct UDProblem {
    states: Vec<DensityMatrix>,
    priors: Vec<f64>,
}

impl UDProblem {
    pub fn new(states: Vec<DensityMatrix>, priors: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidProblem("no states".into()));
        }
        if states.len() != priors.len() {
            return Err(Error::InvalidPriors(format!(
                "{} priors for {} states",
                priors.len(),
                states.len()
            )));
        }
        check_priors(&priors)?;
        let dim = states[0].dim();
        if let Some(bad) = states.iter().position(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "state {bad} has dimension {}, expected {dim}",
                states[bad].dim()
            )));
        }
        Ok(Self { states, priors })
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn spectral_ensembles(&self) -> Result<Vec<Ensemble>> {
        self.states
            .iter()
            .map(|s| spectral_ensemble(s, DEFAULT_RANK_TOL))
            .collect()
    }
}

pub fn check_priors(priors: &[f64]) -> Result<()> {
    if let Some(p) = priors.iter().find(|p| !p.is_finite() || **p <= 0.0) {
        return Err(Error::InvalidPriors(format!("prior {p} is not positive")));
    }
    let sum: f64 = priors.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidPriors(format!("priors sum to {sum}, not 1")));
    }
    Ok(())
}
