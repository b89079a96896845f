//! Riesz bounds of finite families and the predicates built on them.
//!
//! For a finite family the optimal constants in
//! `A^2 sum |a_i|^2 <= ||sum a_i f_i||^2 <= B^2 sum |a_i|^2`
//! are the square roots of the extreme eigenvalues of the Gram matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram, hermitian_eig_bounds, projection_residual, VectorFamily};

/// Slack applied to both ends of `[1 - eps, 1 + eps]`.
pub const EPS_RIESZ_TOL: f64 = 1e-9;

/// Gram eigenvalues at or below this fraction of the largest are treated as zero.
const ZERO_EIG_REL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszBounds {
    pub lower: f64,
    pub upper: f64,
}

impl RieszBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower <= upper && upper.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Riesz bounds must satisfy 0 < A <= B, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `B / A`.
    pub fn condition(&self) -> f64 {
        self.upper / self.lower
    }
}

/// Square roots of the extreme Gram eigenvalues; `(0, B)` when rank deficient.
fn raw_bounds(family: &VectorFamily) -> (f64, f64) {
    let (lo, hi) = hermitian_eig_bounds(&gram(family)).expect("Gram matrices are Hermitian");
    let upper = hi.max(0.0).sqrt();
    if lo <= ZERO_EIG_REL * hi {
        (0.0, upper)
    } else {
        (lo.sqrt(), upper)
    }
}

pub fn riesz_bounds(family: &VectorFamily) -> Result<RieszBounds> {
    match raw_bounds(family) {
        (lower, upper) if lower > 0.0 => Ok(RieszBounds { lower, upper }),
        _ => Err(Error::ZeroLowerBound),
    }
}

/// Outcome of an ε-Riesz test on one family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsRieszCheck {
    pub pass: bool,
    pub lower: f64,
    pub upper: f64,
}

impl EpsRieszCheck {
    /// Smallest distance to the edge of `[1 - eps, 1 + eps]`; negative on failure.
    pub fn margin(&self, epsilon: f64) -> f64 {
        (self.lower - (1.0 - epsilon)).min((1.0 + epsilon) - self.upper)
    }
}

/// Whether the family is an ε-Riesz basic sequence, with the achieved bounds.
///
/// A rank-deficient family is reported as failing with lower bound 0.
pub fn is_eps_riesz(family: &VectorFamily, epsilon: f64) -> Result<EpsRieszCheck> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    family.require_unit_norm()?;
    let (lower, upper) = raw_bounds(family);
    let pass = lower >= 1.0 - epsilon - EPS_RIESZ_TOL && upper <= 1.0 + epsilon + EPS_RIESZ_TOL;
    Ok(EpsRieszCheck { pass: pass && lower > 0.0, lower, upper })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsRieszBlock {
    pub id: usize,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsRieszReport {
    pub epsilon: f64,
    pub blocks: Vec<EpsRieszBlock>,
}

impl EpsRieszReport {
    /// Checks every listed block of `family`. Block ids are 1-based.
    pub fn evaluate(family: &VectorFamily, blocks: &[Vec<usize>], epsilon: f64) -> Result<Self> {
        let mut out = Vec::with_capacity(blocks.len());
        for (j, block) in blocks.iter().enumerate() {
            let check = is_eps_riesz(&family.subfamily(block)?, epsilon)?;
            out.push(EpsRieszBlock { id: j + 1, lower: check.lower, upper: check.upper, pass: check.pass });
        }
        Ok(Self { epsilon, blocks: out })
    }

    pub fn all_pass(&self) -> bool {
        self.blocks.iter().all(|b| b.pass)
    }
}

/// `||P_i f_i||` for every `i`; the family is ε-minimal iff all are `<= eps`.
pub fn eps_minimality_values(family: &VectorFamily) -> Result<Vec<f64>> {
    (0..family.len()).map(|i| projection_residual(family, i)).collect()
}

pub fn is_eps_minimal(family: &VectorFamily, epsilon: f64) -> Result<bool> {
    Ok(eps_minimality_values(family)?.into_iter().all(|v| v <= epsilon))
}
