//! Prior-ratio sweeps: the rank-2 comparison table and scans of a two-state
//! problem over `eta1`.

use serde::Serialize;

use crate::bounds::{
    breakpoints, priors_from_ratio, table1_bounds, total_upper_bound, RankTwoAngles, Region,
};
use crate::canonical::canonical_pair;
use crate::error::{Error, Result};
use crate::fixtures::rank_two_pair;
use crate::sdp::{solve_states, SolveOptions, Status};
use crate::statemodel::{DensityMatrix, UDProblem};

/// Ratios `x` spread over the five regions of the rank-2 family.
///
/// The axis `[0, cos1, cos2, 1/cos2, 1/cos1, 2/cos1]` is split into its
/// nonempty intervals; each gets an equal share of points (earlier intervals
/// take the remainder) placed at cell midpoints, so every point is interior
/// and the sequence is strictly increasing.
pub fn table1_grid(angles: RankTwoAngles, grid_size: usize) -> Result<Vec<f64>> {
    if grid_size < 5 {
        return Err(Error::InvalidProblem(format!(
            "grid size must be at least 5, got {grid_size}"
        )));
    }
    let [b1, b2, b3, b4] = angles.boundaries();
    let edges = [0.0, b1, b2, b3, b4, 2.0 / angles.cos1];
    let spans: Vec<(f64, f64)> = edges
        .windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|(a, b)| b > a)
        .collect();
    let base = grid_size / spans.len();
    let extra = grid_size % spans.len();
    let mut xs = Vec::with_capacity(grid_size);
    for (i, (a, b)) in spans.iter().enumerate() {
        let n = base + usize::from(i < extra);
        xs.extend((0..n).map(|j| a + (b - a) * (j as f64 + 0.5) / n as f64));
    }
    Ok(xs)
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub x: f64,
    pub eta1: f64,
    pub region: u8,
    pub p: f64,
    pub p_ra: f64,
    pub p_ru: f64,
    /// Optimum of the full problem; `None` when the solve was skipped.
    pub p_sdp: Option<f64>,
    pub status: Option<Status>,
}

/// The comparison table, optionally with a full solve per row.
pub fn table1(
    angles: RankTwoAngles,
    grid_size: usize,
    opts: Option<&SolveOptions>,
) -> Result<Vec<Table1Row>> {
    let (rho1, rho2) = rank_two_pair(angles.cos1, angles.cos2)?;
    table1_grid(angles, grid_size)?
        .into_iter()
        .map(|x| {
            let e = table1_bounds(angles, x)?;
            let (p_sdp, status) = match opts {
                Some(o) => {
                    let problem =
                        UDProblem::new(vec![rho1.clone(), rho2.clone()], vec![e.eta1, e.eta2])?;
                    let (_, sol) = solve_states(&problem, o)?;
                    (Some(sol.p_star), Some(sol.status))
                }
                None => (None, None),
            };
            Ok(Table1Row {
                x,
                eta1: e.eta1,
                region: e.region,
                p: e.p,
                p_ra: e.p_ra,
                p_ru: e.p_ru,
                p_sdp,
                status,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub eta1: f64,
    pub x: f64,
    pub p_star: f64,
    pub status: Status,
    /// Canonical-pair bound on the full problem.
    pub bound: f64,
    /// Index of the interval between consecutive breakpoints containing `x`.
    pub interval: usize,
    /// Active formula for each canonical pair.
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    /// Breakpoints on the ratio axis `x = sqrt(eta1/eta2)`.
    pub breakpoints: Vec<f64>,
    /// The same breakpoints as values of `eta1`.
    pub breakpoints_eta1: Vec<f64>,
    /// Number of intervals the breakpoints cut the axis into.
    pub intervals: usize,
    pub rows: Vec<ScanRow>,
}

/// Evenly spaced interior priors `eta1 = i / (n + 1)`, `i = 1..=n`.
pub fn eta_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

/// Solves a two-state problem at each `eta1` and annotates the bound regions.
pub fn scan(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    etas: &[f64],
    opts: &SolveOptions,
) -> Result<ScanReport> {
    let pair = canonical_pair(rho1, rho2)?;
    let bps = breakpoints(&pair);
    let rows = etas
        .iter()
        .map(|&eta1| {
            let eta2 = 1.0 - eta1;
            let problem = UDProblem::new(vec![rho1.clone(), rho2.clone()], vec![eta1, eta2])?;
            let (_, sol) = solve_states(&problem, opts)?;
            let x = (eta1 / eta2).sqrt();
            let (bound, regions) = if pair.t == 0 {
                (1.0, Vec::new())
            } else {
                let rep = total_upper_bound(eta1, eta2, &pair)?;
                (
                    rep.full_bound,
                    rep.per_pair.iter().map(|p| p.region).collect(),
                )
            };
            Ok(ScanRow {
                eta1,
                x,
                p_star: sol.p_star,
                status: sol.status,
                bound,
                interval: bps.iter().filter(|&&b| b < x).count(),
                regions,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanReport {
        breakpoints_eta1: bps.iter().map(|&x| priors_from_ratio(x).0).collect(),
        intervals: bps.len() + 1,
        breakpoints: bps,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::pure_pair;

    #[test]
    fn grid_spans_all_regions() {
        let a = RankTwoAngles::from_cosines(0.4, 0.6).unwrap();
        let xs = table1_grid(a, 50).unwrap();
        assert_eq!(xs.len(), 50);
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        let mut seen = [false; 5];
        for x in &xs {
            seen[a.region(*x) as usize - 1] = true;
        }
        assert!(seen.iter().all(|s| *s));
        assert!(table1_grid(a, 4).is_err());
    }

    #[test]
    fn equal_cosines_collapse_regions() {
        let a = RankTwoAngles::from_cosines(0.5, 0.5).unwrap();
        let rows = table1(a, 9, None).unwrap();
        assert_eq!(rows.len(), 9);
        for r in rows {
            assert!((r.p - r.p_ra).abs() < 1e-12 && (r.p - r.p_ru).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_region_counts() {
        let opts = SolveOptions::default();
        let (a, b) = pure_pair(0.5).unwrap();
        assert_eq!(scan(&a, &b, &[0.5], &opts).unwrap().intervals, 3);
        let (a, b) = rank_two_pair(0.4, 0.6).unwrap();
        assert_eq!(scan(&a, &b, &[0.5], &opts).unwrap().intervals, 5);
        let (a, b) = pure_pair(0.0).unwrap();
        let rep = scan(&a, &b, &[0.3], &opts).unwrap();
        assert_eq!(rep.intervals, 1);
        assert!((rep.rows[0].p_star - 1.0).abs() < 1e-7);
    }
}
