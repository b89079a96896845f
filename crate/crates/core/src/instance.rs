//! Seeded test-instance generation.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha
//! 0.9) sampled through `rand_distr::StandardNormal` and `rand`'s uniform
//! `f64` in `[0, 1)`. Draw order is part of the format: changing it changes
//! every generated family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt, operator_norm, Matrix, Scalar, Vector, VectorFamily};
use crate::riesz::riesz_bounds;

pub const GENERATOR: &str = "ChaCha8Rng::seed_from_u64 (rand_chacha 0.9); StandardNormal (rand_distr 0.5); uniform f64 in [0,1) (rand 0.9)";
pub const MAX_ATTEMPTS: usize = 1000;

/// Relative slack on the condition target, for rounding only.
const CONDITION_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Orthonormal,
    PerturbedOrthonormal,
    RandomRiesz,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub kind: InstanceKind,
    pub n: usize,
    pub condition_target: f64,
    pub seed: u64,
}

/// `n` unit vectors in dimension `n` with `B / A <= condition_target`.
pub fn generate(spec: &InstanceSpec) -> Result<VectorFamily> {
    if spec.n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(spec.condition_target >= 1.0 && spec.condition_target.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "condition target must be >= 1, got {}",
            spec.condition_target
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        InstanceKind::Orthonormal => Ok(VectorFamily::standard_basis(spec.n)),
        InstanceKind::PerturbedOrthonormal => perturbed_orthonormal(&mut rng, spec.n, spec.condition_target),
        InstanceKind::RandomRiesz => random_riesz(&mut rng, spec.n, spec.condition_target),
    }
}

/// Member `seed` of the reference corpus: sizes 8 through 16, nearly
/// orthonormal families with `B / A` up to 1.5 and generic ones up to 4,
/// cycling with the seed.
pub fn corpus_spec(seed: u64) -> InstanceSpec {
    let n = 8 + (seed % 9) as usize;
    let (kind, condition_target) = match seed % 8 {
        k @ 0..=4 => (InstanceKind::PerturbedOrthonormal, [1.02, 1.05, 1.1, 1.2, 1.5][k as usize]),
        k => (InstanceKind::RandomRiesz, [2.0, 3.0, 4.0][(k - 5) as usize]),
    };
    InstanceSpec { kind, n, condition_target, seed }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    Matrix::from_fn(n, n, |_, _| Scalar::new(rng.sample(StandardNormal), 0.0))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Result<Matrix> {
    let g = gaussian_matrix(rng, n);
    let (q, _) = gram_schmidt(&VectorFamily::from_columns(&g)?)?;
    Ok(q.to_matrix())
}

fn within_target(family: &VectorFamily, target: f64) -> bool {
    riesz_bounds(family).is_ok_and(|b| b.condition() <= target * (1.0 + CONDITION_SLACK))
}

/// `I + t E` with `||E|| = 1`, columns renormalized. `t` starts at
/// `(c - 1) / (c + 1)` and shrinks by 10% after each rejected draw.
fn perturbed_orthonormal(rng: &mut ChaCha8Rng, n: usize, target: f64) -> Result<VectorFamily> {
    if target == 1.0 {
        return Ok(VectorFamily::standard_basis(n));
    }
    let mut t = (target - 1.0) / (target + 1.0);
    for _ in 0..MAX_ATTEMPTS {
        let e = gaussian_matrix(rng, n);
        let scale = t / operator_norm(&e);
        let x = Matrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            Scalar::new(id, 0.0) + e[(i, j)] * scale
        });
        if let Ok(family) = VectorFamily::from_columns(&x).and_then(|f| f.normalized()) {
            if within_target(&family, target) {
                return Ok(family);
            }
        }
        t *= 0.9;
    }
    Err(Error::UnreachableCondition { target, attempts: MAX_ATTEMPTS })
}

/// `U diag(s) V^T` with random orthogonal `U`, `V` and `s_i = rho^{u_i}`,
/// `rho ~ U[1, target]`, `u_i ~ U[0, 1)`; columns renormalized, rejected
/// while the condition exceeds the target.
fn random_riesz(rng: &mut ChaCha8Rng, n: usize, target: f64) -> Result<VectorFamily> {
    for _ in 0..MAX_ATTEMPTS {
        let u = random_orthogonal(rng, n)?;
        let v = random_orthogonal(rng, n)?;
        let rho = 1.0 + (target - 1.0) * rng.random::<f64>();
        let s: Vec<f64> = (0..n).map(|_| rho.powf(rng.random::<f64>())).collect();
        let x = Matrix::from_fn(n, n, |i, j| (0..n).map(|k| u[(i, k)] * s[k] * v[(j, k)]).sum());
        let columns: Vec<Vector> = (0..n).map(|j| x.column(j)).collect();
        if let Ok(family) = VectorFamily::new(columns).and_then(|f| f.normalized()) {
            if within_target(&family, target) {
                return Ok(family);
            }
        }
    }
    Err(Error::UnreachableCondition { target, attempts: MAX_ATTEMPTS })
}
