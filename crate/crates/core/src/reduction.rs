//! From a unit-norm Riesz basis to an ε-Riesz partition through triangular
//! paving, with every intermediate inequality recorded as a margin.
//!
//! Stages, in order:
//!
//! 1. Riesz bounds `(A, B)` and `r = ceil(2 B^4 / (A^4 eps))`.
//! 2. A locally minimal partition of the Gram matrix into `r` blocks.
//! 3. Within-block correlation sums against `B^2 / r`.
//! 4. Projection residuals `||P f_i||^2` against `B^4 / (A^4 r)`.
//! 5. Gram-Schmidt per block; diagonal `|K(m,m)|^2` against `1 - eps/2`.
//! 6. Paving of the strictly lower part `M` of each `K` at absolute target
//!    `eps/2`, refinement of the partition, and a direct ε-Riesz check of
//!    every final block from its Gram eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram, gram_schmidt, operator_norm, projection_residual, Matrix, Scalar, VectorFamily};
use crate::partition::{hkw_local_search, partition_objective, step_one_margin, worst_within_sum, Partition, STEP_ONE_TOL};
use crate::paving::{
    brute_force_paving_with, heuristic_paving_with, PavingCertificate, TargetKind, EXHAUSTIVE_PAVING_LIMIT,
};
use crate::riesz::{riesz_bounds, EpsRieszReport, RieszBounds, is_eps_riesz};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Slack on `|K(m,m)|^2 >= 1 - eps/2` inside [`triangularize_block`].
pub const STEP_FOUR_TOL: f64 = 1e-9;
/// Slack on `||M|| <= B + 1`.
pub const M_NORM_TOL: f64 = 1e-9;

pub const REPORT_KIND: &str = "reduction_report";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PavingStrategy {
    Exhaustive,
    Heuristic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub epsilon: f64,
    pub paving: PavingStrategy,
    pub r_override: Option<u64>,
    pub tolerance: f64,
}

impl ReductionConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        let cfg = Self { epsilon, paving: PavingStrategy::Exhaustive, r_override: None, tolerance: DEFAULT_TOLERANCE };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_paving(mut self, paving: PavingStrategy) -> Self {
        self.paving = paving;
        self
    }

    pub fn with_r_override(mut self, r: Option<u64>) -> Self {
        self.r_override = r;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.r_override == Some(0) {
            return Err(Error::InvalidParameter("r override must be positive".into()));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid tolerance {}", self.tolerance)));
        }
        Ok(())
    }
}

/// `1 - B^4 / (A^4 r) >= 1 - eps/2`, evaluated in double precision as written.
pub fn r_satisfies(bounds: RieszBounds, epsilon: f64, r: u64) -> bool {
    r > 0 && 1.0 - projection_bound(bounds, r) >= 1.0 - epsilon / 2.0
}

/// Smallest `r` with `B^4 / (A^4 r) <= eps/2`.
///
/// The ceiling of `2 B^4 / (A^4 eps)` is corrected by re-testing the
/// inequality on both sides, so rounding in the quotient cannot shift it.
pub fn choose_r(bounds: RieszBounds, epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let ratio = bounds.condition().powi(4);
    let estimate = (2.0 * ratio / epsilon).ceil();
    if !(estimate.is_finite() && estimate < 1e15) {
        return Err(Error::InvalidParameter(format!("r = {estimate} is out of range")));
    }
    let mut r = (estimate as u64).max(1);
    while !r_satisfies(bounds, epsilon, r) {
        r += 1;
    }
    while r > 1 && r_satisfies(bounds, epsilon, r - 1) {
        r -= 1;
    }
    Ok(r)
}

/// `B^2 / r`.
pub fn correlation_bound(bounds: RieszBounds, r: u64) -> f64 {
    bounds.upper.powi(2) / r as f64
}

/// `B^4 / (A^4 r)`.
pub fn projection_bound(bounds: RieszBounds, r: u64) -> f64 {
    bounds.upper.powi(4) / (bounds.lower.powi(4) * r as f64)
}

fn require_step_one(g: &Matrix, p: &Partition) -> Result<()> {
    match step_one_margin(g, p)? {
        Some(m) if m < -STEP_ONE_TOL => Err(Error::NotStepOneCertified(m)),
        _ => Ok(()),
    }
}

/// `B^2 / r - max_i sum_{l in A_j(i), l != i} |g(i, l)|^2`.
pub fn verify_step2(g: &Matrix, p: &Partition, bounds: RieszBounds, r: u64) -> Result<f64> {
    require_step_one(g, p)?;
    Ok(correlation_bound(bounds, r) - worst_within_sum(g, p)?)
}

/// Largest `||P_ij f_i||^2` over all blocks, projecting inside each block.
pub fn worst_block_projection(family: &VectorFamily, p: &Partition) -> Result<f64> {
    let mut worst = 0.0_f64;
    for block in p.blocks().into_iter().filter(|b| b.len() > 1) {
        let sub = family.subfamily(&block)?;
        for i in 0..sub.len() {
            worst = worst.max(projection_residual(&sub, i)?.powi(2));
        }
    }
    Ok(worst)
}

/// `B^4 / (A^4 r) - max ||P_ij f_i||^2`.
pub fn verify_step3(family: &VectorFamily, p: &Partition, bounds: RieszBounds, r: u64) -> Result<f64> {
    if p.n() != family.len() {
        return Err(Error::SizeMismatch(format!("partition of {} indices for {} vectors", p.n(), family.len())));
    }
    require_step_one(&gram(family), p)?;
    Ok(projection_bound(bounds, r) - worst_block_projection(family, p)?)
}

/// Gram-Schmidt output of one block.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangularBlockData {
    /// 0-based indices into the full family, in block order.
    pub indices: Vec<usize>,
    pub ortho: VectorFamily,
    /// `K(m, l) = <f_{i_m}, e_{i_l}>`, lower triangular.
    pub k: Matrix,
    /// `K` with its diagonal zeroed: strictly lower triangular.
    pub m: Matrix,
    pub m_norm: f64,
}

impl TriangularBlockData {
    /// `min_m |K(m, m)|^2`.
    pub fn min_diagonal_sq(&self) -> f64 {
        (0..self.k.rows()).map(|i| self.k[(i, i)].norm_sqr()).fold(f64::INFINITY, f64::min)
    }
}

/// Gram-Schmidt of the block subfamily without the diagonal check.
pub fn triangularize_unchecked(family: &VectorFamily, block: &[usize]) -> Result<TriangularBlockData> {
    let sub = family.subfamily(block)?;
    let (ortho, k) = gram_schmidt(&sub)?;
    let mut m = k.clone();
    for i in 0..m.rows() {
        m[(i, i)] = Scalar::new(0.0, 0.0);
    }
    let m_norm = operator_norm(&m);
    Ok(TriangularBlockData { indices: block.to_vec(), ortho, k, m, m_norm })
}

/// Gram-Schmidt of one block, failing when some `|K(m,m)|^2 < 1 - eps/2`.
///
/// The paved matrix is the strictly lower part of `K` itself rather than its
/// adjoint; a paving of one is a paving of the other with equal block norms.
pub fn triangularize_block(family: &VectorFamily, block: &[usize], epsilon: f64) -> Result<TriangularBlockData> {
    let data = triangularize_unchecked(family, block)?;
    let required = 1.0 - epsilon / 2.0;
    for position in 0..data.k.rows() {
        let achieved = data.k[(position, position)].norm_sqr();
        if achieved < required - STEP_FOUR_TOL {
            return Err(Error::StepFourFailure { position, achieved, required });
        }
    }
    Ok(data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub n: usize,
    pub dim: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub epsilon: f64,
    pub tolerance: f64,
    pub paving: PavingStrategy,
    pub r_override: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step1Section {
    pub partition: Partition,
    pub objective: f64,
    pub margin: Option<f64>,
    pub moves: usize,
    pub pass: bool,
}

/// One inequality `achieved <= bound` (or `>=` for the diagonal check).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: f64,
    pub achieved: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSection {
    pub id: usize,
    /// 1-based indices into the input family.
    pub indices: Vec<usize>,
    pub min_diagonal_sq: f64,
    pub m_norm: f64,
    pub m_norm_bound: f64,
    pub m_norm_pass: bool,
    pub paving: Option<PavingCertificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub kind: String,
    pub input: InputSummary,
    pub family: VectorFamily,
    pub r_theoretical: Option<u64>,
    pub r_effective: Option<usize>,
    pub step1: Option<Step1Section>,
    pub step2: Option<BoundCheck>,
    pub step3: Option<BoundCheck>,
    pub step4: Option<BoundCheck>,
    pub blocks: Vec<BlockSection>,
    pub final_partition: Option<Partition>,
    pub final_check: Option<EpsRieszReport>,
    pub final_margin: Option<f64>,
    /// `r_effective * max_j L_j`.
    pub total_blocks_bound: Option<usize>,
    pub final_block_count: Option<usize>,
    pub stage_error: Option<StageError>,
    pub pass: bool,
}

impl ReductionReport {
    fn fail(&mut self, stage: &str, err: impl std::fmt::Display) {
        self.stage_error = Some(StageError { stage: stage.to_string(), message: err.to_string() });
        self.pass = false;
    }

    /// Every recorded margin and flag, ignoring the stored `pass`.
    pub fn recompute_pass(&self) -> bool {
        let tol = self.input.tolerance;
        let bound_ok = |b: &Option<BoundCheck>| b.as_ref().is_some_and(|b| b.margin >= -tol);
        self.stage_error.is_none()
            && self.step1.as_ref().is_some_and(|s| s.margin.is_none_or(|m| m >= -tol))
            && bound_ok(&self.step2)
            && bound_ok(&self.step3)
            && bound_ok(&self.step4)
            && self.blocks.iter().all(|b| b.m_norm_pass && b.paving.as_ref().is_some_and(|p| p.pass))
            && self.final_margin.is_some_and(|m| m >= -tol)
    }
}

/// Final blocks from per-block pavings, in Step-1 block order then paving order.
pub fn refine(step1: &Partition, pavings: &[(Vec<usize>, Partition)]) -> Result<Partition> {
    let mut blocks = Vec::new();
    for (indices, paving) in pavings {
        for local in paving.blocks().into_iter().filter(|b| !b.is_empty()) {
            blocks.push(local.into_iter().map(|l| indices[l]).collect::<Vec<_>>());
        }
    }
    let refined = Partition::from_blocks(step1.n(), &blocks)?;
    if !refined.refines(step1) {
        return Err(Error::InvalidPartition("refinement leaves a Step-1 block".into()));
    }
    Ok(refined)
}

fn pave_block(m: &Matrix, epsilon: f64, strategy: PavingStrategy) -> Result<PavingCertificate> {
    let target = epsilon / 2.0;
    match strategy {
        PavingStrategy::Exhaustive => {
            if m.rows() > EXHAUSTIVE_PAVING_LIMIT {
                return Err(Error::InvalidParameter(format!(
                    "block of size {} exceeds the exhaustive paving limit {}; rerun with heuristic paving",
                    m.rows(),
                    EXHAUSTIVE_PAVING_LIMIT
                )));
            }
            // singletons always pave a zero-diagonal matrix
            brute_force_paving_with(m, target, TargetKind::Absolute, m.rows())?
                .ok_or_else(|| Error::InvalidParameter("no paving found up to singletons".into()))
        }
        PavingStrategy::Heuristic => heuristic_paving_with(m, target, TargetKind::Absolute),
    }
}

/// Runs every stage and records its margin. Stage failures are captured in
/// [`ReductionReport::stage_error`] instead of being returned.
pub fn run_reduction(family: &VectorFamily, config: &ReductionConfig) -> ReductionReport {
    let n = family.len();
    let mut report = ReductionReport {
        kind: REPORT_KIND.to_string(),
        input: InputSummary {
            n,
            dim: family.dim(),
            lower: None,
            upper: None,
            epsilon: config.epsilon,
            tolerance: config.tolerance,
            paving: config.paving,
            r_override: config.r_override,
        },
        family: family.clone(),
        r_theoretical: None,
        r_effective: None,
        step1: None,
        step2: None,
        step3: None,
        step4: None,
        blocks: Vec::new(),
        final_partition: None,
        final_check: None,
        final_margin: None,
        total_blocks_bound: None,
        final_block_count: None,
        stage_error: None,
        pass: false,
    };
    if let Err(e) = config.validate().and_then(|_| family.require_unit_norm()) {
        report.fail("input", e);
        return report;
    }
    let tol = config.tolerance;
    let epsilon = config.epsilon;

    let bounds = match riesz_bounds(family) {
        Ok(b) => b,
        Err(e) => {
            report.fail("riesz_bounds", e);
            return report;
        }
    };
    report.input.lower = Some(bounds.lower);
    report.input.upper = Some(bounds.upper);

    let r = match config.r_override.map_or_else(|| choose_r(bounds, epsilon), Ok) {
        Ok(r) => r,
        Err(e) => {
            report.fail("choose_r", e);
            return report;
        }
    };
    let r_eff = r.min(n as u64) as usize;
    report.r_theoretical = Some(r);
    report.r_effective = Some(r_eff);

    let g = gram(family);
    let step1 = hkw_local_search(&g, r_eff, None).and_then(|(p, trace)| {
        let margin = step_one_margin(&g, &p)?;
        let objective = partition_objective(&g, &p)?;
        Ok(Step1Section { pass: margin.is_none_or(|m| m >= -tol), partition: p, objective, margin, moves: trace.move_count() })
    });
    let step1 = match step1 {
        Ok(s) => s,
        Err(e) => {
            report.fail("step1", e);
            return report;
        }
    };
    let partition = step1.partition.clone();
    report.step1 = Some(step1);

    match verify_step2(&g, &partition, bounds, r) {
        Ok(margin) => {
            let bound = correlation_bound(bounds, r);
            report.step2 = Some(BoundCheck { bound, achieved: bound - margin, margin, pass: margin >= -tol });
        }
        Err(e) => {
            report.fail("step2", e);
            return report;
        }
    }
    match verify_step3(family, &partition, bounds, r) {
        Ok(margin) => {
            let bound = projection_bound(bounds, r);
            report.step3 = Some(BoundCheck { bound, achieved: bound - margin, margin, pass: margin >= -tol });
        }
        Err(e) => {
            report.fail("step3", e);
            return report;
        }
    }

    let mut tri = Vec::new();
    for (label, block) in partition.blocks().into_iter().enumerate() {
        if block.is_empty() {
            continue;
        }
        match triangularize_unchecked(family, &block) {
            Ok(data) => tri.push((label, data)),
            Err(e) => {
                report.fail("step4", e);
                return report;
            }
        }
    }
    let diag_bound = 1.0 - epsilon / 2.0;
    let min_diag = tri.iter().map(|(_, d)| d.min_diagonal_sq()).fold(f64::INFINITY, f64::min);
    let step4_margin = min_diag - diag_bound;
    report.step4 = Some(BoundCheck { bound: diag_bound, achieved: min_diag, margin: step4_margin, pass: step4_margin >= -tol });

    let m_bound = bounds.upper + 1.0;
    let mut pavings = Vec::new();
    let mut paving_error = None;
    for (label, data) in &tri {
        let cert = match pave_block(&data.m, epsilon, config.paving) {
            Ok(c) => Some(c),
            Err(e) => {
                paving_error.get_or_insert(e);
                None
            }
        };
        if let Some(c) = &cert {
            pavings.push((data.indices.clone(), c.partition.clone()));
        }
        report.blocks.push(BlockSection {
            id: label + 1,
            indices: data.indices.iter().map(|i| i + 1).collect(),
            min_diagonal_sq: data.min_diagonal_sq(),
            m_norm: data.m_norm,
            m_norm_bound: m_bound,
            m_norm_pass: data.m_norm <= m_bound + M_NORM_TOL,
            paving: cert,
        });
    }
    if let Some(e) = paving_error {
        report.fail("paving", e);
        return report;
    }

    let refined = match refine(&partition, &pavings) {
        Ok(p) => p,
        Err(e) => {
            report.fail("refine", e);
            return report;
        }
    };
    let max_l = pavings.iter().map(|(_, p)| p.nonempty_blocks()).max().unwrap_or(1);
    report.total_blocks_bound = Some(r_eff * max_l);
    report.final_block_count = Some(refined.nonempty_blocks());

    match EpsRieszReport::evaluate(family, &refined.blocks(), epsilon) {
        Ok(check) => {
            let margin = check
                .blocks
                .iter()
                .map(|b| (b.lower - (1.0 - epsilon)).min((1.0 + epsilon) - b.upper))
                .fold(f64::INFINITY, f64::min);
            report.final_margin = Some(margin);
            report.final_check = Some(check);
        }
        Err(e) => {
            report.fail("final_check", e);
            return report;
        }
    }
    report.final_partition = Some(refined);
    report.pass = report.recompute_pass();
    report
}

/// Re-checks one final block from raw vectors.
pub fn final_block_is_eps_riesz(family: &VectorFamily, block: &[usize], epsilon: f64) -> Result<bool> {
    Ok(is_eps_riesz(&family.subfamily(block)?, epsilon)?.pass)
}
