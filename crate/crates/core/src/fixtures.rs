//! Named state families used by the examples, CLI and tests.

use crate::error::{Error, Result};
use crate::numerics::{re, C64};
use crate::statemodel::DensityMatrix;

/// Pure states `|0>` and `c|0> + sqrt(1-c^2)|1>` with real overlap `c`.
pub fn pure_pair(overlap: f64) -> Result<(DensityMatrix, DensityMatrix)> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::InvalidProblem(format!(
            "overlap {overlap} outside [0, 1]"
        )));
    }
    let a = DensityMatrix::pure(&[re(1.0), re(0.0)])?;
    let b = DensityMatrix::pure(&[re(overlap), re((1.0 - overlap * overlap).sqrt())])?;
    Ok((a, b))
}

/// Two rank-2 states in dimension 4,
/// `rho1 = (|r1><r1| + |r2><r2|)/2`, `rho2 = (|s1><s1| + |s2><s2|)/2`,
/// with `<r1|s1> = cos1`, `<r2|s2> = cos2` and every other overlap zero.
pub fn rank_two_pair(cos1: f64, cos2: f64) -> Result<(DensityMatrix, DensityMatrix)> {
    for v in [cos1, cos2] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidAngles { cos1, cos2 });
        }
    }
    let basis = |i: usize| -> Vec<C64> {
        let mut v = vec![re(0.0); 4];
        v[i] = re(1.0);
        v
    };
    let tilt = |cosv: f64, a: usize, b: usize| -> Vec<C64> {
        let mut v = vec![re(0.0); 4];
        v[a] = re(cosv);
        v[b] = re((1.0 - cosv * cosv).sqrt());
        v
    };
    let rho1 = DensityMatrix::uniform_mixture(&[basis(0), basis(1)])?;
    let rho2 = DensityMatrix::uniform_mixture(&[tilt(cos1, 0, 2), tilt(cos2, 1, 3)])?;
    Ok((rho1, rho2))
}
