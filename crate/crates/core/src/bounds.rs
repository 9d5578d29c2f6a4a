//! Closed-form upper bounds on the optimal success probability of two states.
//!
//! Each canonical pair `(r_m, s_m, f_m)` contributes at most `P_m^max`, which
//! depends on where `x = sqrt(eta1 / eta2)` falls relative to the breakpoints
//! `f_m / r_m` and `s_m / f_m`.

use serde::Serialize;

use crate::canonical::{CanonicalPair, GramCanonical};
use crate::error::{Error, Result};
use crate::numerics::{hermitian_eig, ComplexMatrix};

/// Which of the three per-pair formulas is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// `x <= f/r`: `eta2 (s - f^2/r)`.
    Low,
    /// `f/r <= x <= s/f`: `eta1 r + eta2 s - 2 sqrt(eta1 eta2) f`.
    Middle,
    /// `x >= s/f`: `eta1 (r - f^2/s)`.
    High,
}

impl Region {
    pub fn id(self) -> &'static str {
        match self {
            Region::Low => "low",
            Region::Middle => "middle",
            Region::High => "high",
        }
    }
}

/// One interval of the prior-ratio axis for a single pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionBound {
    pub lo: f64,
    /// May be `+inf`.
    pub hi: f64,
    pub region: Region,
}

/// The three intervals of a pair; they tile `[0, inf)`.
pub fn pair_regions(r: f64, s: f64, f: f64) -> [RegionBound; 3] {
    let (a, b) = if f > 0.0 {
        (f / r, s / f)
    } else {
        (0.0, f64::INFINITY)
    };
    [
        RegionBound {
            lo: 0.0,
            hi: a,
            region: Region::Low,
        },
        RegionBound {
            lo: a,
            hi: b,
            region: Region::Middle,
        },
        RegionBound {
            lo: b,
            hi: f64::INFINITY,
            region: Region::High,
        },
    ]
}

const BREAKPOINT_RTOL: f64 = 1e-12;

fn check_pair_priors(eta1: f64, eta2: f64) -> Result<()> {
    if !(eta1 > 0.0 && eta2 > 0.0) || (eta1 + eta2 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidPriors(format!(
            "need eta1, eta2 > 0 with eta1 + eta2 = 1, got ({eta1}, {eta2})"
        )));
    }
    Ok(())
}

/// Maximal `eta1 y + eta2 z` subject to
/// `[[r - y, f], [f, s - z]] >= 0`, `y, z >= 0`.
///
/// At a breakpoint both adjacent formulas agree and the middle region is
/// reported.
pub fn pair_bound(eta1: f64, eta2: f64, r: f64, s: f64, f: f64) -> Result<(Region, f64)> {
    check_pair_priors(eta1, eta2)?;
    if !(r > 0.0 && s > 0.0) || f.is_nan() || f < 0.0 {
        return Err(Error::InvalidProblem(format!(
            "pair needs r, s > 0 and f >= 0, got r={r}, s={s}, f={f}"
        )));
    }
    let limit = (r * s).sqrt();
    if f > limit + 1e-12 {
        return Err(Error::InvalidOverlap { f, limit });
    }
    let x = (eta1 / eta2).sqrt();
    let middle = eta1 * r + eta2 * s - 2.0 * (eta1 * eta2).sqrt() * f;
    if f == 0.0 {
        return Ok((Region::Middle, middle));
    }
    // ratios within a relative 1e-12 of a breakpoint count as on it
    if x < f / r * (1.0 - BREAKPOINT_RTOL) {
        Ok((Region::Low, eta2 * (s - f * f / r)))
    } else if x > s / f * (1.0 + BREAKPOINT_RTOL) {
        Ok((Region::High, eta1 * (r - f * f / s)))
    } else {
        Ok((Region::Middle, middle))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairBound {
    pub m: usize,
    pub r: f64,
    pub s: f64,
    pub f: f64,
    pub region: Region,
    pub value: f64,
}

/// Bounds from the analytic comparison columns (only for the rank-2 family).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Comparison {
    pub p_ra: f64,
    pub p_ru: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub eta1: f64,
    pub eta2: f64,
    pub per_pair: Vec<PairBound>,
    /// `sum_m P_m^max` over the paired vectors.
    pub total: f64,
    /// `eta1 sum_{m>t} r_m + eta2 sum_{n>t} s_n`: mass of unpaired vectors.
    pub unpaired_mass: f64,
    /// `total + unpaired_mass`; bounds the optimum of the full problem.
    pub full_bound: f64,
    /// Sorted distinct values of `f_m/r_m` and `s_m/f_m`.
    pub breakpoints: Vec<f64>,
    pub comparison: Option<Comparison>,
}

impl BoundReport {
    pub fn all_middle(&self) -> bool {
        self.per_pair.iter().all(|p| p.region == Region::Middle)
    }
}

fn report_from(
    eta1: f64,
    eta2: f64,
    f: &[f64],
    t: usize,
    r_norms: &[f64],
    s_norms: &[f64],
) -> Result<BoundReport> {
    if t == 0 {
        return Err(Error::EmptyReduction);
    }
    let per_pair = (0..t)
        .map(|m| {
            let (region, value) = pair_bound(eta1, eta2, r_norms[m], s_norms[m], f[m])?;
            Ok(PairBound {
                m,
                r: r_norms[m],
                s: s_norms[m],
                f: f[m],
                region,
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total = per_pair.iter().map(|p| p.value).sum();
    let unpaired_mass = eta1 * r_norms[t..].iter().fold(0.0, |a, b| a + b)
        + eta2 * s_norms[t..].iter().fold(0.0, |a, b| a + b);
    let raw: Vec<f64> = per_pair
        .iter()
        .flat_map(|p| [p.f / p.r, p.s / p.f])
        .collect();
    Ok(BoundReport {
        eta1,
        eta2,
        total,
        unpaired_mass,
        full_bound: total + unpaired_mass,
        breakpoints: distinct_sorted(raw),
        per_pair,
        comparison: None,
    })
}

/// Sorted values with near-duplicates (relative 1e-12) merged.
pub fn distinct_sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
    values
}

/// Per-pair bounds summed over the paired canonical vectors.
pub fn total_upper_bound(eta1: f64, eta2: f64, pair: &CanonicalPair) -> Result<BoundReport> {
    report_from(eta1, eta2, &pair.f, pair.t, &pair.r_norms, &pair.s_norms)
}

/// Same as [`total_upper_bound`] from Gram-level canonical data.
pub fn total_upper_bound_gram(eta1: f64, eta2: f64, g: &GramCanonical) -> Result<BoundReport> {
    report_from(eta1, eta2, &g.f, g.t, &g.r_norms, &g.s_norms)
}

/// Breakpoints of the prior-ratio axis for a canonical pair, independent of
/// the priors; `len() + 1` regions.
pub fn breakpoints(pair: &CanonicalPair) -> Vec<f64> {
    distinct_sorted(
        (0..pair.t)
            .flat_map(|m| [pair.f[m] / pair.r_norms[m], pair.s_norms[m] / pair.f[m]])
            .collect(),
    )
}

/// Row of the rank-2 comparison table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Table1Entry {
    pub x: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// 1..=5 along increasing `x`.
    pub region: u8,
    pub p: f64,
    pub p_ra: f64,
    pub p_ru: f64,
}

/// Validated cosines `0 < cos1 <= cos2 < 1` of the rank-2 family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTwoAngles {
    pub cos1: f64,
    pub cos2: f64,
}

impl RankTwoAngles {
    pub fn from_cosines(cos1: f64, cos2: f64) -> Result<Self> {
        if !(cos1 > 0.0 && cos1 <= cos2 && cos2 < 1.0) {
            return Err(Error::InvalidAngles { cos1, cos2 });
        }
        Ok(Self { cos1, cos2 })
    }

    pub fn from_angles(theta1: f64, theta2: f64) -> Result<Self> {
        Self::from_cosines(theta1.cos(), theta2.cos())
    }

    pub fn fidelity(&self) -> f64 {
        0.5 * (self.cos1 + self.cos2)
    }

    /// `(cos1^2 + cos2^2) / (cos1 + cos2)`.
    pub fn ra1(&self) -> f64 {
        (self.cos1.powi(2) + self.cos2.powi(2)) / (self.cos1 + self.cos2)
    }

    pub fn ra2(&self) -> f64 {
        1.0 / self.ra1()
    }

    /// Region boundaries `cos1, cos2, 1/cos2, 1/cos1`.
    pub fn boundaries(&self) -> [f64; 4] {
        [self.cos1, self.cos2, 1.0 / self.cos2, 1.0 / self.cos1]
    }

    /// Region 1..=5 of `x`; boundary points go to the region nearer the middle.
    pub fn region(&self, x: f64) -> u8 {
        let [b1, b2, b3, b4] = self.boundaries();
        if x < b1 {
            1
        } else if x < b2 {
            2
        } else if x <= b3 {
            3
        } else if x <= b4 {
            4
        } else {
            5
        }
    }
}

/// Priors `(eta1, eta2)` with `sqrt(eta1/eta2) = x`.
pub fn priors_from_ratio(x: f64) -> (f64, f64) {
    let eta2 = 1.0 / (1.0 + x * x);
    (1.0 - eta2, eta2)
}

/// Bound `P` and the two comparison columns for the rank-2 family at ratio
/// `x = sqrt(eta1/eta2)`.
pub fn table1_bounds(angles: RankTwoAngles, x: f64) -> Result<Table1Entry> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidProblem(format!(
            "ratio x = {x} must be finite and >= 0"
        )));
    }
    let RankTwoAngles { cos1: c1, cos2: c2 } = angles;
    let (eta1, eta2) = priors_from_ratio(x);
    let g = x / (1.0 + x * x);
    let fid = angles.fidelity();
    let sum_sq = c1 * c1 + c2 * c2;
    let sin_sq = 2.0 - sum_sq;
    let region = angles.region(x);
    let p = match region {
        1 => 0.5 * eta2 * sin_sq,
        2 => 0.5 - g * c1 + 0.5 * eta2 * (1.0 - c2 * c2),
        3 => 1.0 - 2.0 * g * fid,
        4 => 0.5 - g * c1 + 0.5 * eta1 * (1.0 - c2 * c2),
        _ => 0.5 * eta1 * sin_sq,
    };
    let mismatch = (c1 - c2).powi(2) / sum_sq;
    let p_ra = if x < angles.ra1() {
        0.5 * eta2 * sin_sq + 0.5 * eta1 * mismatch
    } else if x <= angles.ra2() {
        1.0 - 2.0 * g * fid
    } else {
        0.5 * eta1 * sin_sq + 0.5 * eta2 * mismatch
    };
    let p_ru = if x < fid {
        eta2 * (1.0 - fid * fid)
    } else if x <= 1.0 / fid {
        1.0 - 2.0 * g * fid
    } else {
        eta1 * (1.0 - fid * fid)
    };
    Ok(Table1Entry {
        x,
        eta1,
        eta2,
        region,
        p,
        p_ra,
        p_ru,
    })
}

/// `P_Ra - P` on `[cos1, Ra1]` written as the quadratic
/// `eta2/2 [2 x cos1 - cos1^2 - 2 x^2 cos1 cos2 / (cos1^2 + cos2^2)]`.
pub fn raynal_gap_quadratic(angles: RankTwoAngles, x: f64) -> f64 {
    let RankTwoAngles { cos1: c1, cos2: c2 } = angles;
    let (_, eta2) = priors_from_ratio(x);
    0.5 * eta2 * (2.0 * x * c1 - c1 * c1 - 2.0 * x * x * c1 * c2 / (c1 * c1 + c2 * c2))
}

/// Trace inequality for a PSD matrix with a two-block partition.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CauchySchwarzGap {
    /// `sqrt(Tr B11 Tr B22)`.
    pub lhs: f64,
    /// `|Tr B12|` (sum of the diagonal of the off-diagonal block).
    pub rhs: f64,
    /// `lhs >= F - 1e-8` when a fidelity was supplied.
    pub exceeds_fidelity: Option<bool>,
}

pub fn cauchy_schwarz_gap(
    b: &ComplexMatrix,
    partition: (usize, usize),
    fidelity: Option<f64>,
) -> Result<CauchySchwarzGap> {
    let (n1, n2) = partition;
    if !b.is_square() || b.rows() != n1 + n2 {
        return Err(Error::PartitionMismatch(format!(
            "partition ({n1}, {n2}) for a {}x{} matrix",
            b.rows(),
            b.cols()
        )));
    }
    let eig = hermitian_eig(&b.hermitian_part())?;
    if eig.min_value() < -1e-9 * eig.spectral_norm().max(1.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min_value(),
        });
    }
    let t11 = b.block(0, 0, n1, n1).trace().re.max(0.0);
    let t22 = b.block(n1, n1, n2, n2).trace().re.max(0.0);
    let lhs = (t11 * t22).sqrt();
    let rhs = b.block(0, n1, n1, n2).trace().norm();
    Ok(CauchySchwarzGap {
        lhs,
        rhs,
        exceeds_fidelity: fidelity.map(|fid| lhs >= fid - 1e-8),
    })
}
