//! The optimal success probability as a semidefinite program:
//!
//! maximize `sum_k eta_k Tr(Y_kk)` over quasi-diagonal `Y`
//! subject to `Y >= 0` and `X - Y >= 0`.
//!
//! Solved with a primal log-det barrier path-following method. A kernel
//! vector `v` of `X` forces `Y v = 0`, so the problem is first restricted to
//! the range of `X` and each block of `Y` to the complement of the kernel's
//! block components. The restricted problem has a strict interior.

use serde::{Deserialize, Serialize};

use crate::bounds::total_upper_bound_gram;
use crate::canonical::gram_canonical;
use crate::error::{Error, Result};
use crate::gram::{build_block_gram, residual, BlockGram, QuasiDiagonal};
use crate::numerics::{c, hermitian_eig, hpd_inverse_logdet, re, solve_real, ComplexMatrix, C64};
use crate::statemodel::{check_priors, UDProblem};

/// Relative eigenvalue cut separating the range of `X` from its kernel.
const RANGE_TOL: f64 = 1e-9;
/// Squared block component below which a kernel vector is ignored in a block.
const KERNEL_COMPONENT_TOL: f64 = 1e-10;
/// Newton-decrement targets `lambda^2 / 2` while following the path and at
/// the final barrier weight, where the dual certificate is read off.
const CENTERING_TOL: f64 = 1e-10;
const FINAL_CENTERING_TOL: f64 = 1e-18;
const MAX_CENTERING_STEPS: usize = 50;
/// Acceptance thresholds for an `Optimal` status.
pub const PSD_ACCEPT: f64 = 1e-8;
pub const GAP_ACCEPT: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct SdpProblem {
    x: BlockGram,
    priors: Vec<f64>,
}

impl SdpProblem {
    pub fn x(&self) -> &BlockGram {
        &self.x
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Real parameters of a general quasi-diagonal `Y`: `sum_k n_k^2`.
    pub fn param_count(&self) -> usize {
        self.x.blocks().iter().map(|n| n * n).sum()
    }
}

pub fn formulate(x: BlockGram, priors: &[f64]) -> Result<SdpProblem> {
    if priors.len() != x.num_blocks() {
        return Err(Error::PartitionMismatch(format!(
            "{} priors for {} blocks",
            priors.len(),
            x.num_blocks()
        )));
    }
    check_priors(priors)?;
    Ok(SdpProblem {
        x,
        priors: priors.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target for the barrier gap bound `m * mu`.
    pub tol: f64,
    /// Cap on the total number of Newton steps.
    pub max_iter: usize,
    /// Factor applied to `mu` after each centering.
    pub barrier_shrink: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            barrier_shrink: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    NumericalLimit,
}

#[derive(Debug, Clone)]
pub struct UDSolution {
    pub y: QuasiDiagonal,
    pub p_star: f64,
    /// `sum_k eta_k Tr(X_kk) - P*`; equals `1 - P*` for normalized states.
    pub q_star: f64,
    /// Objective of the dual certificate; an upper bound on the optimum.
    pub dual_bound: f64,
    pub dual_gap: f64,
    pub status: Status,
    /// Newton steps taken.
    pub iterations: usize,
    pub min_eig_y: f64,
    pub min_eig_residual: f64,
}

/// Nonzero entries `(row, col, value)` of one basis matrix.
type BasisElem = Vec<(usize, usize, C64)>;

/// Hermitian basis: `e_pp`, then `e_pq + e_qp` and `i(e_pq - e_qp)` for `p < q`.
fn hermitian_basis(w: usize) -> Vec<BasisElem> {
    let mut out: Vec<BasisElem> = (0..w).map(|p| vec![(p, p, re(1.0))]).collect();
    for p in 0..w {
        for q in p + 1..w {
            out.push(vec![(p, q, re(1.0)), (q, p, re(1.0))]);
            out.push(vec![(p, q, c(0.0, 1.0)), (q, p, c(0.0, -1.0))]);
        }
    }
    out
}

/// `Tr(E A)`.
fn tr_ea(e: &BasisElem, a: &ComplexMatrix) -> f64 {
    e.iter().map(|&(i, j, v)| (v * a[(j, i)]).re).sum()
}

/// `Re Tr(E_i A E_j B)`.
fn tr_eaeb(ei: &BasisElem, a: &ComplexMatrix, ej: &BasisElem, b: &ComplexMatrix) -> f64 {
    let mut s = re(0.0);
    for &(p, q, alpha) in ei {
        for &(r, t, beta) in ej {
            s += alpha * a[(q, r)] * beta * b[(t, p)];
        }
    }
    s.re
}

fn assemble(e: &[BasisElem], theta: &[f64], w: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(w, w);
    for (elem, &th) in e.iter().zip(theta) {
        for &(i, j, v) in elem {
            m[(i, j)] += v * th;
        }
    }
    m
}

/// The problem restricted to the range of `X`.
struct Restricted {
    /// Eigenvalues of `X` on its range; the restricted `X` is `diag(lambda)`.
    lambda: Vec<f64>,
    /// Orthonormal columns spanning the allowed support of each block of `Y`.
    w: Vec<ComplexMatrix>,
    /// `W_k^dagger R_k`, mapping the range coordinates into block `k`.
    m: Vec<ComplexMatrix>,
    basis: Vec<Vec<BasisElem>>,
    priors: Vec<f64>,
}

impl Restricted {
    fn new(x: &BlockGram, priors: &[f64]) -> Result<Self> {
        let eig = hermitian_eig(x.matrix())?;
        let keep = eig.significant(RANGE_TOL);
        let kernel: Vec<usize> = (0..x.dim()).filter(|i| !keep.contains(i)).collect();
        let r = eig.vectors.select_columns(&keep);
        let k = eig.vectors.select_columns(&kernel);
        let lambda = keep.iter().map(|&i| eig.values[i]).collect();

        let mut w = Vec::new();
        let mut m = Vec::new();
        for (b, &nb) in x.blocks().iter().enumerate() {
            let off = x.offset(b);
            let wk = if kernel.is_empty() {
                ComplexMatrix::identity(nb)
            } else {
                let kb = k.block(off, 0, nb, kernel.len());
                let e = hermitian_eig(&(&kb * &kb.adjoint()))?;
                let free: Vec<usize> = (0..nb)
                    .filter(|&i| e.values[i] <= KERNEL_COMPONENT_TOL)
                    .collect();
                e.vectors.select_columns(&free)
            };
            let rk = r.block(off, 0, nb, keep.len());
            m.push(&wk.adjoint() * &rk);
            w.push(wk);
        }
        let basis = w.iter().map(|wk| hermitian_basis(wk.cols())).collect();
        Ok(Self {
            lambda,
            w,
            m,
            basis,
            priors: priors.to_vec(),
        })
    }

    fn range_dim(&self) -> usize {
        self.lambda.len()
    }

    fn n_params(&self) -> usize {
        self.basis.iter().map(Vec::len).sum()
    }

    /// Barrier parameter `sum_k w_k + r`.
    fn barrier_degree(&self) -> usize {
        self.w.iter().map(ComplexMatrix::cols).sum::<usize>() + self.range_dim()
    }

    /// `diag(lambda) - sum_k M_k^dagger Yhat_k M_k`.
    fn slack(&self, yhat: &[ComplexMatrix]) -> ComplexMatrix {
        let mut s = ComplexMatrix::diag_real(&self.lambda);
        for (mk, yk) in self.m.iter().zip(yhat) {
            if yk.rows() > 0 {
                s = &s - &(&(&mk.adjoint() * yk) * mk);
            }
        }
        s.hermitian_part()
    }

    /// Inverses and log-determinants of every cone, or `None` off the interior.
    fn evaluate(&self, yhat: &[ComplexMatrix]) -> Option<Interior> {
        let mut y_inv = Vec::with_capacity(yhat.len());
        let mut logdet = 0.0;
        for yk in yhat {
            if yk.rows() == 0 {
                y_inv.push(ComplexMatrix::zeros(0, 0));
                continue;
            }
            let (inv, ld) = hpd_inverse_logdet(yk)?;
            y_inv.push(inv);
            logdet += ld;
        }
        let (s_inv, ld) = hpd_inverse_logdet(&self.slack(yhat))?;
        Some(Interior {
            y_inv,
            s_inv,
            logdet: logdet + ld,
        })
    }

    fn linear(&self, yhat: &[ComplexMatrix]) -> f64 {
        yhat.iter()
            .zip(&self.priors)
            .map(|(y, eta)| eta * y.trace().re)
            .sum()
    }

    fn barrier(&self, t: f64, yhat: &[ComplexMatrix]) -> Option<f64> {
        let it = self.evaluate(yhat)?;
        Some(-t * self.linear(yhat) - it.logdet)
    }

    /// Gradient and Hessian of the barrier function in basis coordinates.
    fn derivatives(&self, t: f64, it: &Interior) -> (Vec<f64>, Vec<f64>) {
        let np = self.n_params();
        let nb = self.w.len();
        let mut t_blocks: Vec<Vec<ComplexMatrix>> = Vec::with_capacity(nb);
        for k in 0..nb {
            let left = &self.m[k] * &it.s_inv;
            t_blocks.push((0..nb).map(|l| &left * &self.m[l].adjoint()).collect());
        }
        let offsets: Vec<usize> = self
            .basis
            .iter()
            .scan(0, |acc, b| {
                let o = *acc;
                *acc += b.len();
                Some(o)
            })
            .collect();

        let mut g = vec![0.0; np];
        let mut h = vec![0.0; np * np];
        for k in 0..nb {
            for (i, ei) in self.basis[k].iter().enumerate() {
                let gi = offsets[k] + i;
                let tr_e = ei
                    .iter()
                    .filter(|(p, q, _)| p == q)
                    .map(|e| e.2.re)
                    .sum::<f64>();
                g[gi] = -t * self.priors[k] * tr_e - tr_ea(ei, &it.y_inv[k])
                    + tr_ea(ei, &t_blocks[k][k]);
                for l in 0..nb {
                    for (j, ej) in self.basis[l].iter().enumerate() {
                        let gj = offsets[l] + j;
                        if gj < gi {
                            continue;
                        }
                        let mut v = tr_eaeb(ei, &t_blocks[k][l], ej, &t_blocks[l][k]);
                        if k == l {
                            v += tr_eaeb(ei, &it.y_inv[k], ej, &it.y_inv[k]);
                        }
                        h[gi * np + gj] = v;
                        h[gj * np + gi] = v;
                    }
                }
            }
        }
        (g, h)
    }

    fn step(&self, yhat: &[ComplexMatrix], delta: &[f64], alpha: f64) -> Vec<ComplexMatrix> {
        let mut off = 0;
        yhat.iter()
            .zip(&self.basis)
            .map(|(yk, b)| {
                let d = assemble(b, &delta[off..off + b.len()], yk.rows());
                off += b.len();
                (yk + &d.scale(alpha)).hermitian_part()
            })
            .collect()
    }

    fn lift(&self, yhat: &[ComplexMatrix]) -> Result<QuasiDiagonal> {
        QuasiDiagonal::new(
            self.w
                .iter()
                .zip(yhat)
                .map(|(wk, yk)| (&(wk * yk) * &wk.adjoint()).hermitian_part())
                .collect(),
        )
    }

    /// Dual objective of a certificate built from the slack at `yhat`.
    ///
    /// `Z = mu (S^-1 + S^-1 G(D) S^-1)` with `D` the Newton step at weight
    /// `1/mu` (the slack inverse linearized one step ahead), then shifted by
    /// the smallest `delta I` making `Z >= 0` and `M_k Z M_k^dagger >= eta_k I`.
    fn dual_bound(&self, mu: f64, yhat: &[ComplexMatrix], it: &Interior) -> Result<f64> {
        let r = self.range_dim();
        let (g, h) = self.derivatives(1.0 / mu, it);
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut z = it.s_inv.clone();
        if let Some(delta) = solve_real(&h, &neg_g) {
            let stepped = self.step(yhat, &delta, 1.0);
            let mut gd = ComplexMatrix::zeros(r, r);
            for ((mk, new), old) in self.m.iter().zip(&stepped).zip(yhat) {
                if old.rows() > 0 {
                    gd = &gd + &(&(&mk.adjoint() * &(new - old)) * mk);
                }
            }
            z = &z + &(&(&it.s_inv * &gd) * &it.s_inv);
        }
        let z = z.scale(mu).hermitian_part();

        let mut shift = (-hermitian_eig(&z)?.min_value()).max(0.0);
        for (k, mk) in self.m.iter().enumerate() {
            if mk.rows() == 0 {
                continue;
            }
            let mut a = &(mk * &z) * &mk.adjoint();
            for i in 0..a.rows() {
                a[(i, i)] -= re(self.priors[k]);
            }
            let deficit = -hermitian_eig(&a.hermitian_part())?.min_value();
            if deficit > 0.0 {
                let lift = hermitian_eig(&(mk * &mk.adjoint()).hermitian_part())?.min_value();
                if lift <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                shift = shift.max(deficit / lift * (1.0 + 1e-12));
            }
        }
        Ok((0..r)
            .map(|i| (z[(i, i)].re + shift) * self.lambda[i])
            .sum())
    }
}

struct Interior {
    y_inv: Vec<ComplexMatrix>,
    s_inv: ComplexMatrix,
    logdet: f64,
}

fn psd_scale(x: &BlockGram) -> Result<(f64, f64)> {
    let e = hermitian_eig(x.matrix())?;
    Ok((e.min_value(), e.spectral_norm().max(1.0)))
}

/// Solves the optimization for the block Gram matrix in `p`.
pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> Result<UDSolution> {
    if opts.tol.is_nan()
        || opts.tol <= 0.0
        || !(opts.barrier_shrink > 0.0 && opts.barrier_shrink < 1.0)
    {
        return Err(Error::InvalidProblem(format!(
            "need tol > 0 and barrier_shrink in (0, 1), got {} and {}",
            opts.tol, opts.barrier_shrink
        )));
    }
    let x = &p.x;
    let mass = x.weighted_mass(&p.priors);
    let (min_x, scale) = psd_scale(x)?;
    if min_x < -RANGE_TOL * scale {
        return Ok(UDSolution {
            y: QuasiDiagonal::zeros(x.blocks()),
            p_star: 0.0,
            q_star: mass,
            dual_bound: f64::INFINITY,
            dual_gap: f64::INFINITY,
            status: Status::Infeasible,
            iterations: 0,
            min_eig_y: 0.0,
            min_eig_residual: min_x,
        });
    }

    let red = Restricted::new(x, &p.priors)?;
    if red.n_params() == 0 {
        return finish(p, &red, &[], 0.0, 0, true);
    }

    let mut yhat: Vec<ComplexMatrix> = Vec::new();
    let mut eps = 0.1;
    for _ in 0..80 {
        yhat = red
            .w
            .iter()
            .enumerate()
            .map(|(k, wk)| {
                (&(&wk.adjoint() * &x.block(k, k)) * wk)
                    .scale(eps)
                    .hermitian_part()
            })
            .collect();
        if red.evaluate(&yhat).is_some() {
            break;
        }
        eps *= 0.5;
    }
    if red.evaluate(&yhat).is_none() {
        return Err(Error::NoConvergence {
            algorithm: "barrier initialization",
            sweeps: 80,
        });
    }

    let degree = red.barrier_degree() as f64;
    let mut mu = 1.0;
    let mut iterations = 0;
    let mut within_budget = true;
    'outer: loop {
        let t = 1.0 / mu;
        let last = degree * mu < opts.tol;
        let target = if last {
            FINAL_CENTERING_TOL
        } else {
            CENTERING_TOL
        };
        let mut previous = f64::INFINITY;
        for _ in 0..MAX_CENTERING_STEPS {
            if iterations >= opts.max_iter {
                within_budget = false;
                break 'outer;
            }
            let Some(it) = red.evaluate(&yhat) else { break };
            let (g, h) = red.derivatives(t, &it);
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(delta) = solve_real(&h, &neg_g) else {
                break;
            };
            let dec2: f64 = neg_g.iter().zip(&delta).map(|(a, b)| a * b).sum();
            iterations += 1;
            // Below 1e-8 a decrement that stops shrinking is rounding noise.
            if dec2 / 2.0 <= target || !dec2.is_finite() || (dec2 < 1e-8 && dec2 > 0.5 * previous) {
                break;
            }
            previous = dec2;
            let dec = dec2.max(0.0).sqrt();
            let mut alpha = if dec > 0.25 { 1.0 / (1.0 + dec) } else { 1.0 };
            let current = red.barrier(t, &yhat).unwrap_or(f64::INFINITY);
            let mut moved = false;
            while alpha > 1e-12 {
                let trial = red.step(&yhat, &delta, alpha);
                if let Some(v) = red.barrier(t, &trial) {
                    if v <= current + 1e-12 * current.abs().max(1.0) {
                        yhat = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if last {
            break;
        }
        mu *= opts.barrier_shrink;
    }
    finish(p, &red, &yhat, mu, iterations, within_budget)
}

fn finish(
    p: &SdpProblem,
    red: &Restricted,
    yhat: &[ComplexMatrix],
    mu: f64,
    iterations: usize,
    within_budget: bool,
) -> Result<UDSolution> {
    let x = &p.x;
    let y = if yhat.is_empty() {
        QuasiDiagonal::zeros(x.blocks())
    } else {
        red.lift(yhat)?
    };
    let p_star = y.objective(&p.priors);
    let dual_bound = if yhat.is_empty() {
        0.0
    } else {
        match red.evaluate(yhat) {
            Some(it) => red.dual_bound(mu, yhat, &it)?,
            None => f64::INFINITY,
        }
    };
    let dual_gap = dual_bound - p_star;
    let min_eig_y = match y.min_eigenvalue()? {
        v if v.is_finite() => v,
        _ => 0.0,
    };
    let min_eig_residual = hermitian_eig(&residual(x, &y)?.hermitian_part())?.min_value();
    let optimal = within_budget
        && dual_gap <= GAP_ACCEPT * p_star.max(1.0)
        && min_eig_y >= -PSD_ACCEPT
        && min_eig_residual >= -PSD_ACCEPT;
    Ok(UDSolution {
        q_star: x.weighted_mass(&p.priors) - p_star,
        y,
        p_star,
        dual_bound,
        dual_gap,
        status: if optimal {
            Status::Optimal
        } else {
            Status::NumericalLimit
        },
        iterations,
        min_eig_y,
        min_eig_residual,
    })
}

/// Builds the Gram matrix of the states' spectral ensembles and solves.
pub fn solve_states(problem: &UDProblem, opts: &SolveOptions) -> Result<(SdpProblem, UDSolution)> {
    let x = build_block_gram(&problem.spectral_ensembles()?)?;
    let p = formulate(x, problem.priors())?;
    let sol = solve(&p, opts)?;
    Ok((p, sol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Feasibility {
    Feasible {
        min_eig_y: f64,
        min_eig_residual: f64,
    },
    /// Smallest eigenvalue over `Y` and `X - Y`.
    Infeasible { min_eig: f64 },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Whether `Y >= 0` and `X - Y >= 0`, each to `-1e-9 * max(1, ||X||)`.
pub fn feasibility(x: &BlockGram, y: &QuasiDiagonal) -> Result<Feasibility> {
    let b = residual(x, y)?;
    let (_, scale) = psd_scale(x)?;
    let min_y = match y.min_eigenvalue()? {
        v if v.is_finite() => v,
        _ => 0.0,
    };
    let min_b = hermitian_eig(&b.hermitian_part())?.min_value();
    let floor = -RANGE_TOL * scale;
    if min_y >= floor && min_b >= floor {
        Ok(Feasibility::Feasible {
            min_eig_y: min_y,
            min_eig_residual: min_b,
        })
    } else {
        Ok(Feasibility::Infeasible {
            min_eig: min_y.min(min_b),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub objective: f64,
    /// Canonical-pair bound, for two-state problems.
    pub upper_bound: Option<f64>,
    pub checks: Vec<Check>,
}

/// Recomputes the cone residuals and the objective of `sol` from scratch and,
/// for two states, compares the objective with the canonical-pair bound.
/// Failed checks are reported, not raised; see [`certify`].
pub fn certificate(p: &SdpProblem, sol: &UDSolution) -> Result<CertificateReport> {
    let x = &p.x;
    if sol.y.partition() != x.blocks() {
        return Err(Error::PartitionMismatch(format!(
            "solution blocks {:?} vs problem blocks {:?}",
            sol.y.partition(),
            x.blocks()
        )));
    }
    let objective = sol.y.objective(&p.priors);
    let tol_p = sol.p_star.max(1.0);
    let min_y = match sol.y.min_eigenvalue()? {
        v if v.is_finite() => v,
        _ => 0.0,
    };
    let min_b = hermitian_eig(&residual(x, &sol.y)?.hermitian_part())?.min_value();
    let mass = x.weighted_mass(&p.priors);
    let mut checks = vec![
        Check {
            name: "psd(Y)",
            value: min_y,
            limit: -PSD_ACCEPT,
            pass: min_y >= -PSD_ACCEPT,
        },
        Check {
            name: "psd(X-Y)",
            value: min_b,
            limit: -PSD_ACCEPT,
            pass: min_b >= -PSD_ACCEPT,
        },
        Check {
            name: "objective",
            value: (objective - sol.p_star).abs(),
            limit: 1e-9 * tol_p,
            pass: (objective - sol.p_star).abs() <= 1e-9 * tol_p,
        },
        Check {
            name: "dual-gap",
            value: sol.dual_gap,
            limit: GAP_ACCEPT * tol_p,
            pass: sol.dual_gap <= GAP_ACCEPT * tol_p,
        },
        Check {
            name: "mass",
            value: objective - mass,
            limit: 1e-8,
            pass: objective - mass <= 1e-8,
        },
    ];
    let mut upper_bound = None;
    if x.num_blocks() == 2 {
        let g = gram_canonical(x)?;
        let bound = if g.t == 0 {
            mass
        } else {
            total_upper_bound_gram(p.priors[0], p.priors[1], &g)?.full_bound
        };
        upper_bound = Some(bound);
        checks.push(Check {
            name: "upper-bound",
            value: objective - bound,
            limit: 1e-8,
            pass: objective - bound <= 1e-8,
        });
    }
    Ok(CertificateReport {
        objective,
        upper_bound,
        checks,
    })
}

/// [`certificate`] that fails unless every check passes and the solver
/// reported an optimum.
pub fn certify(p: &SdpProblem, sol: &UDSolution) -> Result<CertificateReport> {
    let report = certificate(p, sol)?;
    let mut failures = Vec::new();
    if sol.status != Status::Optimal {
        failures.push(format!("status: {:?} is not Optimal", sol.status));
    }
    failures.extend(
        report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{}: {:e} violates limit {:e}", c.name, c.value, c.limit)),
    );
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(Error::CertificationFailed(failures))
    }
}
