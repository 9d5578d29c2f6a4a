//! Versioned JSON problem and result files. Complex numbers are `[re, im]`.

use serde::{Deserialize, Serialize};

use crate::bounds::total_upper_bound_gram;
use crate::canonical::gram_canonical;
use crate::error::{Error, Result};
use crate::gram::{build_block_gram, BlockGram, QuasiDiagonal};
use crate::numerics::{c, ComplexMatrix};
use crate::sdp::{SdpProblem, SolveOptions, Status, UDSolution};
use crate::statemodel::{
    spectral_ensemble, validate_density, DensityMatrix, Ensemble, UDProblem, DEFAULT_RANK_TOL,
};

pub const FORMAT_VERSION: u32 = 1;

pub type Pair = [f64; 2];
/// Row-major matrix of `[re, im]` pairs.
pub type MatrixRepr = Vec<Vec<Pair>>;

pub fn to_repr(m: &ComplexMatrix) -> MatrixRepr {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

pub fn from_repr(rows: &MatrixRepr) -> Result<ComplexMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    ComplexMatrix::new(n, m, rows.iter().flatten().map(|p| c(p[0], p[1])).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum StateSpec {
    /// Dense density matrix.
    Density(MatrixRepr),
    /// Vectors `|psi_m>` with `rho = sum_m |psi_m><psi_m|`.
    Ensemble(Vec<Vec<Pair>>),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub states: Vec<StateSpec>,
    pub priors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<FileOptions>,
}

/// A validated problem with the ensembles its Gram matrix is built from.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: UDProblem,
    /// Given ensembles as-is; density matrices use their spectral ensemble.
    pub ensembles: Vec<Ensemble>,
    pub options: SolveOptions,
}

impl LoadedProblem {
    pub fn gram(&self) -> Result<BlockGram> {
        build_block_gram(&self.ensembles)
    }
}

fn field(path: String, e: Error) -> Error {
    Error::InvalidProblem(format!("{path}: {e}"))
}

impl ProblemFile {
    pub fn from_states(states: &[DensityMatrix], priors: &[f64]) -> Self {
        Self {
            version: FORMAT_VERSION,
            states: states
                .iter()
                .map(|s| StateSpec::Density(to_repr(s.matrix())))
                .collect(),
            priors: priors.to_vec(),
            options: None,
        }
    }

    pub fn load(self) -> Result<LoadedProblem> {
        if self.version != FORMAT_VERSION {
            return Err(Error::InvalidProblem(format!(
                "version: unsupported {} (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        let mut states = Vec::with_capacity(self.states.len());
        let mut ensembles = Vec::with_capacity(self.states.len());
        for (k, spec) in self.states.iter().enumerate() {
            match spec {
                StateSpec::Density(rows) => {
                    let path = || format!("states[{k}].density");
                    let m = from_repr(rows).map_err(|e| field(path(), e))?;
                    let rho = validate_density(&m).map_err(|e| field(path(), e))?;
                    ensembles.push(
                        spectral_ensemble(&rho, DEFAULT_RANK_TOL).map_err(|e| field(path(), e))?,
                    );
                    states.push(rho);
                }
                StateSpec::Ensemble(vectors) => {
                    let path = || format!("states[{k}].ensemble");
                    let dim = vectors.first().map_or(0, Vec::len);
                    let vs: Vec<Vec<_>> = vectors
                        .iter()
                        .map(|v| v.iter().map(|p| c(p[0], p[1])).collect())
                        .collect();
                    let (e, rho) = Ensemble::checked(dim, &vs).map_err(|e| field(path(), e))?;
                    ensembles.push(e);
                    states.push(rho);
                }
            }
        }
        let problem =
            UDProblem::new(states, self.priors.clone()).map_err(|e| field("priors".into(), e))?;
        let mut options = SolveOptions::default();
        if let Some(o) = &self.options {
            if let Some(t) = o.tol {
                options.tol = t;
            }
            if let Some(m) = o.max_iter {
                options.max_iter = m;
            }
        }
        Ok(LoadedProblem {
            problem,
            ensembles,
            options,
        })
    }
}

/// Parses a problem file; JSON errors carry line and column.
pub fn parse_problem(text: &str) -> std::result::Result<ProblemFile, serde_json::Error> {
    serde_json::from_str(text)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundSummary {
    pub fidelity: f64,
    pub paired_total: f64,
    pub unpaired_mass: f64,
    pub full_bound: f64,
    pub breakpoints: Vec<f64>,
    /// Active formula per canonical pair.
    pub regions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Residuals {
    pub min_eig_y: f64,
    pub min_eig_residual: f64,
    pub dual_gap: f64,
}

/// Result of a solve, also accepted back as a solution file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultRecord {
    pub version: u32,
    pub status: Status,
    pub p_star: f64,
    pub q_star: f64,
    /// `Tr(Y_kk) / Tr(X_kk)` per state.
    pub success_probabilities: Vec<f64>,
    /// Region shared by every canonical pair, `"mixed"` otherwise; two states only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundSummary>,
    pub residuals: Residuals,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    /// Blocks of `Y` in the ensemble basis of the problem file.
    pub y: Vec<MatrixRepr>,
}

/// Canonical-pair bound data for a two-block Gram matrix.
pub fn bound_summary(x: &BlockGram, priors: &[f64]) -> Result<Option<BoundSummary>> {
    if x.num_blocks() != 2 {
        return Ok(None);
    }
    let g = gram_canonical(x)?;
    if g.t == 0 {
        return Ok(Some(BoundSummary {
            fidelity: 0.0,
            paired_total: 0.0,
            unpaired_mass: x.weighted_mass(priors),
            full_bound: x.weighted_mass(priors),
            breakpoints: Vec::new(),
            regions: Vec::new(),
        }));
    }
    let rep = total_upper_bound_gram(priors[0], priors[1], &g)?;
    Ok(Some(BoundSummary {
        fidelity: g.fidelity(),
        paired_total: rep.total,
        unpaired_mass: rep.unpaired_mass,
        full_bound: rep.full_bound,
        breakpoints: rep.breakpoints.clone(),
        regions: rep
            .per_pair
            .iter()
            .map(|p| p.region.id().to_string())
            .collect(),
    }))
}

impl ResultRecord {
    pub fn new(p: &SdpProblem, sol: &UDSolution, wall_time_ms: Option<f64>) -> Result<Self> {
        let x = p.x();
        let bounds = bound_summary(x, p.priors())?;
        let region = bounds.as_ref().and_then(|b| {
            let first = b.regions.first()?;
            Some(if b.regions.iter().all(|r| r == first) {
                first.clone()
            } else {
                "mixed".to_string()
            })
        });
        let success_probabilities = sol
            .y
            .traces()
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let total = x.block(k, k).trace().re;
                if total > 0.0 {
                    t / total
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            version: FORMAT_VERSION,
            status: sol.status,
            p_star: sol.p_star,
            q_star: sol.q_star,
            success_probabilities,
            region,
            bounds,
            residuals: Residuals {
                min_eig_y: sol.min_eig_y,
                min_eig_residual: sol.min_eig_residual,
                dual_gap: sol.dual_gap,
            },
            iterations: sol.iterations,
            wall_time_ms,
            y: sol.y.blocks().iter().map(to_repr).collect(),
        })
    }

    /// Rebuilds the solution for certification.
    pub fn to_solution(&self, x: &BlockGram) -> Result<UDSolution> {
        let y = QuasiDiagonal::new(self.y.iter().map(from_repr).collect::<Result<Vec<_>>>()?)?;
        if y.partition() != x.blocks() {
            return Err(Error::PartitionMismatch(format!(
                "solution blocks {:?} vs problem blocks {:?}",
                y.partition(),
                x.blocks()
            )));
        }
        Ok(UDSolution {
            q_star: self.q_star,
            p_star: self.p_star,
            dual_bound: self.p_star + self.residuals.dual_gap,
            dual_gap: self.residuals.dual_gap,
            status: self.status,
            iterations: self.iterations,
            min_eig_y: self.residuals.min_eig_y,
            min_eig_residual: self.residuals.min_eig_residual,
            y,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::pure_pair;

    #[test]
    fn problem_round_trip() {
        let (a, b) = pure_pair(0.5).unwrap();
        let file = ProblemFile::from_states(&[a, b], &[0.5, 0.5]);
        let text = serde_json::to_string(&file).unwrap();
        let back = parse_problem(&text).unwrap();
        assert_eq!(back, file);
        let loaded = back.load().unwrap();
        assert_eq!(loaded.ensembles.len(), 2);
        assert_eq!(loaded.gram().unwrap().blocks(), &[1, 1]);
    }

    #[test]
    fn ensemble_states_are_accepted() {
        let text = r#"{"version": 1,
            "states": [{"ensemble": [[[1,0],[0,0]]]}, {"ensemble": [[[0,0],[1,0]]]}],
            "priors": [0.5, 0.5], "options": {"tol": 1e-9}}"#;
        let loaded = parse_problem(text).unwrap().load().unwrap();
        assert_eq!(loaded.options.tol, 1e-9);
        assert_eq!(loaded.options.max_iter, 500);
    }

    #[test]
    fn errors_name_the_field() {
        let text = r#"{"version": 1, "states": [{"density": [[[2,0]]]}], "priors": [1.0]}"#;
        let err = parse_problem(text).unwrap().load().unwrap_err().to_string();
        assert!(err.contains("states[0].density"), "{err}");

        let bad = parse_problem("{\n \"version\": 1,\n \"states\": [}\n");
        let e = bad.unwrap_err();
        assert_eq!(e.line(), 3);

        assert!(parse_problem(r#"{"version":1,"states":[],"priors":[],"extra":1}"#).is_err());
    }

    #[test]
    fn version_is_checked() {
        let text = r#"{"version": 2, "states": [{"density": [[[1,0]]]}], "priors": [1.0]}"#;
        let err = parse_problem(text).unwrap().load().unwrap_err().to_string();
        assert!(err.contains("version"));
    }
}
