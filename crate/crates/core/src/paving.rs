//! Diagonal compressions, paving norms and paving search.
//!
//! A paving of a zero-diagonal `T` is a partition `{A_j}` with
//! `||Q_{A_j} T Q_{A_j}|| <= eps ||T||` for every block. Two searches are
//! provided: an exhaustive one for small `n` that returns the fewest blocks,
//! and an iterative-deepening local search for larger inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{operator_norm, Matrix, Scalar};
use crate::partition::Partition;

/// Diagonal entries up to this modulus count as zero.
pub const DIAGONAL_TOL: f64 = 1e-14;
/// Slack on the paving inequality.
pub const PAVING_TOL: f64 = 1e-9;
/// Largest `n` accepted by the exhaustive search.
pub const EXHAUSTIVE_PAVING_LIMIT: usize = 12;

const SCORE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PavingMethod {
    BruteForce,
    Heuristic,
}

/// How the per-block norms are compared with `epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `||Q_A T Q_A|| <= epsilon * ||T||`
    Relative,
    /// `||Q_A T Q_A|| <= epsilon`
    Absolute,
}

impl TargetKind {
    pub fn threshold(self, epsilon: f64, reference_norm: f64) -> f64 {
        match self {
            TargetKind::Relative => epsilon * reference_norm,
            TargetKind::Absolute => epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PavingCertificate {
    pub epsilon: f64,
    pub target: TargetKind,
    pub reference_norm: f64,
    pub threshold: f64,
    pub partition: Partition,
    pub block_norms: Vec<f64>,
    pub pass: bool,
    pub method: PavingMethod,
    /// The paved matrix, embedded so the certificate can be re-checked alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Matrix>,
}

impl PavingCertificate {
    /// Measures `partition` against `t` and records whether it paves.
    pub fn evaluate(
        t: &Matrix,
        partition: Partition,
        epsilon: f64,
        target: TargetKind,
        method: PavingMethod,
    ) -> Result<Self> {
        let reference_norm = operator_norm(t);
        let threshold = target.threshold(epsilon, reference_norm);
        let (max_norm, block_norms) = paving_norm(t, &partition)?;
        Ok(Self {
            epsilon,
            target,
            reference_norm,
            threshold,
            partition,
            block_norms,
            pass: max_norm <= threshold + PAVING_TOL,
            method,
            matrix: None,
        })
    }

    pub fn max_block_norm(&self) -> f64 {
        self.block_norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn with_matrix(mut self, t: &Matrix) -> Self {
        self.matrix = Some(t.clone());
        self
    }
}

/// `T - D(T)`: diagonal set to exactly zero, everything else untouched.
pub fn strip_diagonal(t: &Matrix) -> Result<Matrix> {
    if !t.is_square() {
        return Err(Error::NotSquare { rows: t.rows(), cols: t.cols() });
    }
    let mut out = t.clone();
    for i in 0..t.rows() {
        out[(i, i)] = Scalar::new(0.0, 0.0);
    }
    Ok(out)
}

/// `Q_A T Q_A` as a full `n x n` matrix.
pub fn compress(t: &Matrix, block: &[usize]) -> Result<Matrix> {
    if !t.is_square() {
        return Err(Error::NotSquare { rows: t.rows(), cols: t.cols() });
    }
    let n = t.rows();
    let mut keep = vec![false; n];
    for &i in block {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, size: n });
        }
        keep[i] = true;
    }
    Ok(Matrix::from_fn(n, n, |i, j| if keep[i] && keep[j] { t[(i, j)] } else { Scalar::new(0.0, 0.0) }))
}

/// Per-block compression norms and their maximum.
pub fn paving_norm(t: &Matrix, p: &Partition) -> Result<(f64, Vec<f64>)> {
    if !t.is_square() {
        return Err(Error::NotSquare { rows: t.rows(), cols: t.cols() });
    }
    if p.n() != t.rows() {
        return Err(Error::SizeMismatch(format!(
            "partition of {} indices against a {}x{} matrix",
            p.n(),
            t.rows(),
            t.cols()
        )));
    }
    let mut per_block = Vec::with_capacity(p.num_blocks());
    for block in p.blocks() {
        per_block.push(operator_norm(&compress(t, &block)?));
    }
    let max = per_block.iter().copied().fold(0.0, f64::max);
    Ok((max, per_block))
}

fn require_zero_diagonal(t: &Matrix) -> Result<()> {
    if !t.is_square() {
        return Err(Error::NotSquare { rows: t.rows(), cols: t.cols() });
    }
    for i in 0..t.rows() {
        let modulus = t[(i, i)].norm();
        if modulus > DIAGONAL_TOL {
            return Err(Error::NonzeroDiagonal { index: i + 1, modulus });
        }
    }
    Ok(())
}

/// Fewest blocks `r <= r_max` paving `t` at `||Q T Q|| <= eps ||T||`.
///
/// Among partitions with that many blocks the lexicographically smallest
/// assignment is returned. `None` when no `r <= r_max` works.
pub fn brute_force_paving(t: &Matrix, epsilon: f64, r_max: usize) -> Result<Option<PavingCertificate>> {
    brute_force_paving_with(t, epsilon, TargetKind::Relative, r_max)
}

pub fn brute_force_paving_with(
    t: &Matrix,
    epsilon: f64,
    target: TargetKind,
    r_max: usize,
) -> Result<Option<PavingCertificate>> {
    require_zero_diagonal(t)?;
    let n = t.rows();
    if n > EXHAUSTIVE_PAVING_LIMIT {
        return Err(Error::InstanceTooLarge { n, limit: EXHAUSTIVE_PAVING_LIMIT });
    }
    if r_max == 0 {
        return Err(Error::InvalidParameter("r_max must be at least 1".into()));
    }
    let limit = target.threshold(epsilon, operator_norm(t)) + PAVING_TOL;
    for r in 1..=r_max {
        if let Some(p) = exhaustive_paving(t, r, limit) {
            return PavingCertificate::evaluate(t, p, epsilon, target, PavingMethod::BruteForce).map(Some);
        }
    }
    Ok(None)
}

fn block_norm(t: &Matrix, block: &[usize]) -> f64 {
    if block.len() < 2 {
        // zero diagonal
        return 0.0;
    }
    operator_norm(&t.principal_submatrix(block))
}

/// First restricted-growth assignment into at most `r` blocks whose blocks
/// all have norm `<= limit`. Block norms only grow as indices are added, so
/// an over-limit partial block prunes its whole subtree.
fn exhaustive_paving(t: &Matrix, r: usize, limit: f64) -> Option<Partition> {
    struct Search<'a> {
        t: &'a Matrix,
        r: usize,
        limit: f64,
        assign: Vec<usize>,
        blocks: Vec<Vec<usize>>,
    }

    impl Search<'_> {
        fn descend(&mut self, i: usize, used: usize) -> bool {
            if i == self.assign.len() {
                return true;
            }
            for b in 0..(used + 1).min(self.r) {
                self.blocks[b].push(i);
                if block_norm(self.t, &self.blocks[b]) <= self.limit {
                    self.assign[i] = b;
                    if self.descend(i + 1, used.max(b + 1)) {
                        return true;
                    }
                }
                self.blocks[b].pop();
            }
            false
        }
    }

    let n = t.rows();
    let mut search = Search { t, r, limit, assign: vec![0; n], blocks: vec![Vec::new(); r] };
    if search.descend(0, 0) {
        let used = search.assign.iter().max().map_or(1, |m| m + 1);
        Some(Partition::from_assignment(search.assign, used).expect("labels below used"))
    } else {
        None
    }
}

/// Paving by iterative deepening on `r = 1, 2, 4, ...` (capped at `n`).
///
/// For each `r` a local search moves single indices between blocks to lower
/// the largest block norm, breaking ties by the sum of squared block norms.
/// The first `r` whose local optimum satisfies the target is returned; `r = n`
/// (singletons, all norms zero) always does.
pub fn heuristic_paving(t: &Matrix, epsilon: f64) -> Result<PavingCertificate> {
    heuristic_paving_with(t, epsilon, TargetKind::Relative)
}

pub fn heuristic_paving_with(t: &Matrix, epsilon: f64, target: TargetKind) -> Result<PavingCertificate> {
    require_zero_diagonal(t)?;
    let n = t.rows();
    let limit = target.threshold(epsilon, operator_norm(t)) + PAVING_TOL;
    let mut r = 1;
    loop {
        let r_eff = r.min(n);
        let (p, worst) = min_max_local_search(t, r_eff, limit);
        if worst <= limit || r_eff == n {
            return PavingCertificate::evaluate(t, p, epsilon, target, PavingMethod::Heuristic);
        }
        r *= 2;
    }
}

#[derive(Clone, Copy)]
struct Score {
    max: f64,
    sum_sq: f64,
}

impl Score {
    fn of(norms: &[f64]) -> Self {
        Score {
            max: norms.iter().copied().fold(0.0, f64::max),
            sum_sq: norms.iter().map(|x| x * x).sum(),
        }
    }

    fn better_than(&self, other: &Score) -> bool {
        self.max < other.max - SCORE_TOL
            || (self.max <= other.max + SCORE_TOL && self.sum_sq < other.sum_sq - SCORE_TOL)
    }
}

fn min_max_local_search(t: &Matrix, r: usize, limit: f64) -> (Partition, f64) {
    let n = t.rows();
    let mut p = Partition::round_robin(n, r);
    let mut blocks = p.blocks();
    let mut norms: Vec<f64> = blocks.iter().map(|b| block_norm(t, b)).collect();
    let mut score = Score::of(&norms);
    let max_passes = 50 * n.max(1);
    for _ in 0..max_passes {
        if score.max <= limit {
            break;
        }
        let mut improved = false;
        for i in 0..n {
            let from = p.block_of(i);
            for to in (0..r).filter(|&b| b != from) {
                let shrunk: Vec<usize> = blocks[from].iter().copied().filter(|&x| x != i).collect();
                let mut grown = blocks[to].clone();
                let pos = grown.partition_point(|&x| x < i);
                grown.insert(pos, i);
                let mut trial = norms.clone();
                trial[from] = block_norm(t, &shrunk);
                trial[to] = block_norm(t, &grown);
                let trial_score = Score::of(&trial);
                if trial_score.better_than(&score) {
                    p.set(i, to);
                    blocks[from] = shrunk;
                    blocks[to] = grown;
                    norms = trial;
                    score = trial_score;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (p, score.max)
}
