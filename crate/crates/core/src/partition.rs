//! Labeled set partitions and the within-block correlation objective.
//!
//! The objective of a partition `{A_j}` against a Gram matrix `g` is
//! `sum_j sum_{i in A_j} sum_{l in A_j, l != i} |g(i, l)|^2`. A partition is
//! *Step-1 certified* when no single index can lower it by changing blocks,
//! which is the same as: for every `i` in `A_j` and every other block `A_k`,
//! `sum_{l in A_j, l != i} |g(i, l)|^2 <= sum_{l in A_k} |g(i, l)|^2`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, HERMITIAN_TOL};

/// A move is applied only when it lowers the objective by more than this.
pub const MOVE_THRESHOLD: f64 = 1e-15;
/// Slack for the Step-1 inequality at the output of the local search.
pub const STEP_ONE_TOL: f64 = 1e-10;
/// Largest instance accepted by [`brute_force_min_partition`].
pub const EXHAUSTIVE_PARTITION_LIMIT: usize = 14;

const TIE_TOL: f64 = 1e-12;

/// Assignment of `0..n` to labels `0..num_blocks`. Blocks may be empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    num_blocks: usize,
}

impl Partition {
    pub fn from_assignment(assignment: Vec<usize>, num_blocks: usize) -> Result<Self> {
        if num_blocks == 0 {
            return Err(Error::InvalidPartition("at least one block is required".into()));
        }
        if let Some(&bad) = assignment.iter().find(|&&b| b >= num_blocks) {
            return Err(Error::InvalidPartition(format!("label {bad} with only {num_blocks} blocks")));
        }
        Ok(Self { assignment, num_blocks })
    }

    /// Builds a partition of `0..n` from explicit 0-based blocks.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidPartition("at least one block is required".into()));
        }
        let mut assignment = vec![usize::MAX; n];
        for (j, block) in blocks.iter().enumerate() {
            for &i in block {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, size: n });
                }
                if assignment[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("index {} appears twice", i + 1)));
                }
                assignment[i] = j;
            }
        }
        if let Some(missing) = assignment.iter().position(|&b| b == usize::MAX) {
            return Err(Error::InvalidPartition(format!("index {} is not covered", missing + 1)));
        }
        Ok(Self { assignment, num_blocks: blocks.len() })
    }

    /// `i -> i mod r`.
    pub fn round_robin(n: usize, r: usize) -> Self {
        assert!(r >= 1, "round robin needs at least one block");
        Self { assignment: (0..n).map(|i| i % r).collect(), num_blocks: r }
    }

    pub fn single_block(n: usize) -> Self {
        Self { assignment: vec![0; n], num_blocks: 1 }
    }

    pub fn singletons(n: usize) -> Self {
        Self { assignment: (0..n).collect(), num_blocks: n.max(1) }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// Blocks in label order, members ascending. Empty blocks are kept.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks];
        for (i, &b) in self.assignment.iter().enumerate() {
            out[b].push(i);
        }
        out
    }

    pub fn nonempty_blocks(&self) -> usize {
        self.blocks().iter().filter(|b| !b.is_empty()).count()
    }

    /// True when every block of `self` lies inside a single block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.n() == coarser.n()
            && self.blocks().iter().all(|block| {
                block.windows(2).all(|w| coarser.block_of(w[0]) == coarser.block_of(w[1]))
            })
    }

    pub(crate) fn set(&mut self, i: usize, label: usize) {
        self.assignment[i] = label;
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionJson {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let blocks = self.blocks().into_iter().map(|b| b.into_iter().map(|i| i + 1).collect()).collect();
        PartitionJson { n: self.n(), blocks }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = PartitionJson::deserialize(deserializer)?;
        let mut blocks = Vec::with_capacity(raw.blocks.len());
        for block in raw.blocks {
            let mut zero_based = Vec::with_capacity(block.len());
            for i in block {
                if i == 0 {
                    return Err(D::Error::custom("partition indices are 1-based"));
                }
                zero_based.push(i - 1);
            }
            blocks.push(zero_based);
        }
        Partition::from_blocks(raw.n, &blocks).map_err(D::Error::custom)
    }
}

/// One applied single-index move. Index and labels are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub index: usize,
    pub from: usize,
    pub to: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchTrace {
    pub initial_objective: f64,
    pub moves: Vec<Move>,
    pub final_objective: f64,
}

impl LocalSearchTrace {
    pub fn move_count(&self) -> usize {
        self.moves.len()
    }
}

fn check_inputs(g: &Matrix, p: &Partition) -> Result<()> {
    if !g.is_square() {
        return Err(Error::NotSquare { rows: g.rows(), cols: g.cols() });
    }
    if g.rows() != p.n() {
        return Err(Error::SizeMismatch(format!(
            "partition of {} indices against a {}x{} matrix",
            p.n(),
            g.rows(),
            g.cols()
        )));
    }
    Ok(())
}

fn check_gram(g: &Matrix) -> Result<()> {
    if !g.is_square() {
        return Err(Error::NotSquare { rows: g.rows(), cols: g.cols() });
    }
    let dev = g.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

fn squared_moduli(g: &Matrix) -> Vec<f64> {
    g.data().iter().map(|z| z.norm_sqr()).collect()
}

pub fn partition_objective(g: &Matrix, p: &Partition) -> Result<f64> {
    check_inputs(g, p)?;
    let k = g.rows();
    let mut total = 0.0;
    for i in 0..k {
        for l in 0..k {
            if l != i && p.block_of(i) == p.block_of(l) {
                total += g[(i, l)].norm_sqr();
            }
        }
    }
    Ok(total)
}

/// `sums[i * r + b] = sum_{l in A_b, l != i} |g(i, l)|^2`.
fn label_sums(w: &[f64], p: &Partition) -> Vec<f64> {
    let k = p.n();
    let r = p.num_blocks();
    let mut sums = vec![0.0; k * r];
    for i in 0..k {
        for l in 0..k {
            if l != i {
                sums[i * r + p.block_of(l)] += w[i * k + l];
            }
        }
    }
    sums
}

/// Worst slack of the Step-1 inequality over all `(j, i, k)` with `k != j`.
///
/// `None` when the partition has a single block (no inequality to check).
pub fn step_one_margin(g: &Matrix, p: &Partition) -> Result<Option<f64>> {
    check_inputs(g, p)?;
    let r = p.num_blocks();
    if r < 2 {
        return Ok(None);
    }
    let sums = label_sums(&squared_moduli(g), p);
    let mut worst = f64::INFINITY;
    for i in 0..p.n() {
        let own = p.block_of(i);
        let within = sums[i * r + own];
        for b in (0..r).filter(|&b| b != own) {
            worst = worst.min(sums[i * r + b] - within);
        }
    }
    Ok(Some(if worst.is_finite() { worst } else { 0.0 }))
}

/// `max_i sum_{l in A_j(i), l != i} |g(i, l)|^2`.
pub fn worst_within_sum(g: &Matrix, p: &Partition) -> Result<f64> {
    check_inputs(g, p)?;
    let r = p.num_blocks();
    let sums = label_sums(&squared_moduli(g), p);
    Ok((0..p.n()).map(|i| sums[i * r + p.block_of(i)]).fold(0.0, f64::max))
}

/// Single-index improvement search for the within-block objective.
///
/// Indices are scanned in increasing order and target blocks in increasing
/// label order; the first move that lowers the objective by more than
/// [`MOVE_THRESHOLD`] is applied and the scan restarts. The default start is
/// the round-robin assignment.
pub fn hkw_local_search(
    g: &Matrix,
    r: usize,
    initial: Option<&Partition>,
) -> Result<(Partition, LocalSearchTrace)> {
    check_gram(g)?;
    if r == 0 {
        return Err(Error::InvalidParameter("r must be at least 1".into()));
    }
    let k = g.rows();
    let mut p = match initial {
        Some(p) => {
            check_inputs(g, p)?;
            if p.num_blocks() != r {
                return Err(Error::SizeMismatch(format!(
                    "initial partition has {} blocks, expected {r}",
                    p.num_blocks()
                )));
            }
            p.clone()
        }
        None => Partition::round_robin(k, r),
    };
    let w = squared_moduli(g);
    let initial_objective = partition_objective(g, &p)?;
    let mut moves = Vec::new();
    let cap = move_cap(k, r);
    'search: while moves.len() < cap {
        let sums = label_sums(&w, &p);
        for i in 0..k {
            let from = p.block_of(i);
            let within = sums[i * r + from];
            for to in (0..r).filter(|&b| b != from) {
                let delta = 2.0 * (sums[i * r + to] - within);
                if delta < -MOVE_THRESHOLD {
                    p.set(i, to);
                    moves.push(Move { index: i + 1, from: from + 1, to: to + 1, delta });
                    continue 'search;
                }
            }
        }
        break;
    }
    let final_objective = partition_objective(g, &p)?;
    Ok((p, LocalSearchTrace { initial_objective, moves, final_objective }))
}

/// Coarse upper bound on the number of moves: `C(k, 2) * r * k`.
pub fn move_cap(k: usize, r: usize) -> usize {
    (k * k.saturating_sub(1) / 2).max(1) * r * k.max(1)
}

/// Global minimizer of the objective over all assignments into `r` labeled
/// blocks; ties go to the lexicographically smallest assignment vector.
///
/// Only restricted-growth assignments are enumerated: relabeling blocks by
/// first occurrence never increases an assignment lexicographically, so the
/// smallest optimal assignment is always one of them.
pub fn brute_force_min_partition(g: &Matrix, r: usize) -> Result<Partition> {
    check_gram(g)?;
    if r == 0 {
        return Err(Error::InvalidParameter("r must be at least 1".into()));
    }
    let k = g.rows();
    if k > EXHAUSTIVE_PARTITION_LIMIT {
        return Err(Error::InstanceTooLarge { n: k, limit: EXHAUSTIVE_PARTITION_LIMIT });
    }
    let mut search = MinSearch {
        w: squared_moduli(g),
        k,
        r,
        assign: vec![0; k],
        best: f64::INFINITY,
        best_assign: vec![0; k],
    };
    search.descend(0, 0, 0.0);
    Partition::from_assignment(search.best_assign, r)
}

struct MinSearch {
    w: Vec<f64>,
    k: usize,
    r: usize,
    assign: Vec<usize>,
    best: f64,
    best_assign: Vec<usize>,
}

impl MinSearch {
    fn descend(&mut self, i: usize, used: usize, partial: f64) {
        if partial >= self.best - TIE_TOL || self.best == 0.0 {
            return;
        }
        if i == self.k {
            self.best = partial;
            self.best_assign.copy_from_slice(&self.assign);
            return;
        }
        for b in 0..(used + 1).min(self.r) {
            let cost: f64 = (0..i)
                .filter(|&l| self.assign[l] == b)
                .map(|l| self.w[i * self.k + l] + self.w[l * self.k + i])
                .sum();
            self.assign[i] = b;
            self.descend(i + 1, used.max(b + 1), partial + cost);
        }
    }
}
