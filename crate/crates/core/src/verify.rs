//! Independent re-checking of reports and paving certificates.
//!
//! Verification never re-runs a search. It takes the partitions a file
//! claims, recomputes every norm, bound and margin from the raw vectors or
//! matrix embedded in the file, and lists each disagreement.

use crate::error::{Error, Result};
use crate::linalg::{gram, Matrix};
use crate::partition::{partition_objective, step_one_margin, worst_within_sum, Partition};
use crate::paving::{paving_norm, PavingCertificate, TargetKind, PAVING_TOL};
use crate::linalg::operator_norm;
use crate::reduction::{
    choose_r, correlation_bound, projection_bound, refine, triangularize_unchecked, worst_block_projection,
    ReductionReport, M_NORM_TOL, REPORT_KIND,
};
use crate::riesz::{is_eps_riesz, riesz_bounds};

#[derive(Clone, Debug, PartialEq)]
pub struct Discrepancy {
    pub field: String,
    pub claimed: String,
    pub recomputed: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyOutcome {
    pub checked: usize,
    pub discrepancies: Vec<Discrepancy>,
    pub claimed_pass: bool,
}

impl VerifyOutcome {
    /// Every recomputed value agrees with the file.
    pub fn consistent(&self) -> bool {
        self.discrepancies.is_empty()
    }

    /// Consistent, and the file claims a pass.
    pub fn certified_pass(&self) -> bool {
        self.consistent() && self.claimed_pass
    }

    fn num(&mut self, field: impl Into<String>, claimed: f64, recomputed: f64, tol: f64) {
        self.checked += 1;
        let scale = 1.0_f64.max(claimed.abs()).max(recomputed.abs());
        let diff = (claimed - recomputed).abs();
        if diff.is_nan() || diff > tol * scale {
            self.push(field, claimed, recomputed);
        }
    }

    fn opt_num(&mut self, field: &str, claimed: Option<f64>, recomputed: Option<f64>, tol: f64) {
        match (claimed, recomputed) {
            (Some(a), Some(b)) => self.num(field, a, b, tol),
            (None, None) => self.checked += 1,
            (a, b) => self.push(field, format!("{a:?}"), format!("{b:?}")),
        }
    }

    fn same<T: PartialEq + std::fmt::Debug>(&mut self, field: impl Into<String>, claimed: T, recomputed: T) {
        self.checked += 1;
        if claimed != recomputed {
            self.push(field, format!("{claimed:?}"), format!("{recomputed:?}"));
        }
    }

    fn push(&mut self, field: impl Into<String>, claimed: impl ToString, recomputed: impl ToString) {
        self.discrepancies.push(Discrepancy {
            field: field.into(),
            claimed: claimed.to_string(),
            recomputed: recomputed.to_string(),
        });
    }
}

/// Re-checks a paving certificate against `matrix`.
pub fn verify_certificate(cert: &PavingCertificate, matrix: &Matrix, tol: f64) -> Result<VerifyOutcome> {
    let mut out = VerifyOutcome { claimed_pass: cert.pass, ..Default::default() };
    check_certificate(&mut out, "certificate", cert, matrix, tol)?;
    Ok(out)
}

fn check_certificate(
    out: &mut VerifyOutcome,
    prefix: &str,
    cert: &PavingCertificate,
    matrix: &Matrix,
    tol: f64,
) -> Result<()> {
    if cert.partition.n() != matrix.rows() || !matrix.is_square() {
        out.push(format!("{prefix}.partition.n"), cert.partition.n(), matrix.rows());
        return Ok(());
    }
    let reference = operator_norm(matrix);
    out.num(format!("{prefix}.reference_norm"), cert.reference_norm, reference, tol);
    let threshold = cert.target.threshold(cert.epsilon, reference);
    out.num(format!("{prefix}.threshold"), cert.threshold, threshold, tol);
    let (max, per_block) = paving_norm(matrix, &cert.partition)?;
    out.same(format!("{prefix}.block_norms.len"), cert.block_norms.len(), per_block.len());
    for (j, (a, b)) in cert.block_norms.iter().zip(&per_block).enumerate() {
        out.num(format!("{prefix}.block_norms[{}]", j + 1), *a, *b, tol);
    }
    out.same(format!("{prefix}.pass"), cert.pass, max <= threshold + PAVING_TOL);
    Ok(())
}

/// Re-checks every section of a reduction report from its embedded family.
pub fn verify_report(report: &ReductionReport, tol: f64) -> Result<VerifyOutcome> {
    if report.kind != REPORT_KIND {
        return Err(Error::Malformed(format!("expected kind {REPORT_KIND:?}, found {:?}", report.kind)));
    }
    let mut out = VerifyOutcome { claimed_pass: report.pass, ..Default::default() };
    let family = &report.family;
    let input = &report.input;
    let epsilon = input.epsilon;
    out.same("input.n", input.n, family.len());
    out.same("input.dim", input.dim, family.dim());

    let bounds = riesz_bounds(family).ok();
    out.opt_num("input.lower", input.lower, bounds.map(|b| b.lower), tol);
    out.opt_num("input.upper", input.upper, bounds.map(|b| b.upper), tol);
    let Some(bounds) = bounds else {
        out.same("pass", report.pass, false);
        return Ok(out);
    };
    let r = match input.r_override {
        Some(r) => r,
        None => choose_r(bounds, epsilon)?,
    };
    out.same("r_theoretical", report.r_theoretical, Some(r));
    let r_eff = r.min(family.len() as u64) as usize;
    out.same("r_effective", report.r_effective, Some(r_eff));

    let g = gram(family);
    let mut recomputed_pass = report.stage_error.is_none();
    let Some(step1) = &report.step1 else {
        out.same("pass", report.pass, false);
        return Ok(out);
    };
    let partition = &step1.partition;
    if partition.n() != family.len() {
        out.push("step1.partition.n", partition.n(), family.len());
        return Ok(out);
    }
    out.same("step1.partition.num_blocks", partition.num_blocks(), r_eff);
    out.num("step1.objective", step1.objective, partition_objective(&g, partition)?, tol);
    let margin = step_one_margin(&g, partition)?;
    out.opt_num("step1.margin", step1.margin, margin, tol);
    let step1_pass = margin.is_none_or(|m| m >= -input.tolerance);
    out.same("step1.pass", step1.pass, step1_pass);
    recomputed_pass &= step1_pass;

    let mut bound_section = |name: &str, claimed: &Option<crate::reduction::BoundCheck>, bound: f64, achieved: f64, margin: f64| {
        match claimed {
            Some(c) => {
                out.num(format!("{name}.bound"), c.bound, bound, tol);
                out.num(format!("{name}.achieved"), c.achieved, achieved, tol);
                out.num(format!("{name}.margin"), c.margin, margin, tol);
                out.same(format!("{name}.pass"), c.pass, margin >= -input.tolerance);
            }
            None => out.push(name, "missing", "present"),
        }
        margin >= -input.tolerance
    };

    let b2 = correlation_bound(bounds, r);
    let within = worst_within_sum(&g, partition)?;
    recomputed_pass &= bound_section("step2", &report.step2, b2, within, b2 - within);
    let b3 = projection_bound(bounds, r);
    let proj = worst_block_projection(family, partition)?;
    recomputed_pass &= bound_section("step3", &report.step3, b3, proj, b3 - proj);

    let mut tri = Vec::new();
    for (label, block) in partition.blocks().into_iter().enumerate() {
        if !block.is_empty() {
            tri.push((label, triangularize_unchecked(family, &block)?));
        }
    }
    let b4 = 1.0 - epsilon / 2.0;
    let min_diag = tri.iter().map(|(_, d)| d.min_diagonal_sq()).fold(f64::INFINITY, f64::min);
    recomputed_pass &= bound_section("step4", &report.step4, b4, min_diag, min_diag - b4);

    out.same("blocks.len", report.blocks.len(), tri.len());
    let mut pavings = Vec::new();
    for (section, (label, data)) in report.blocks.iter().zip(&tri) {
        let name = format!("blocks[{}]", label + 1);
        out.same(format!("{name}.id"), section.id, label + 1);
        out.same(
            format!("{name}.indices"),
            section.indices.clone(),
            data.indices.iter().map(|i| i + 1).collect::<Vec<_>>(),
        );
        out.num(format!("{name}.min_diagonal_sq"), section.min_diagonal_sq, data.min_diagonal_sq(), tol);
        out.num(format!("{name}.m_norm"), section.m_norm, data.m_norm, tol);
        out.num(format!("{name}.m_norm_bound"), section.m_norm_bound, bounds.upper + 1.0, tol);
        let m_pass = data.m_norm <= bounds.upper + 1.0 + M_NORM_TOL;
        out.same(format!("{name}.m_norm_pass"), section.m_norm_pass, m_pass);
        recomputed_pass &= m_pass;
        match &section.paving {
            Some(cert) => {
                out.same(format!("{name}.paving.target"), cert.target, TargetKind::Absolute);
                out.num(format!("{name}.paving.epsilon"), cert.epsilon, epsilon / 2.0, tol);
                check_certificate(&mut out, &format!("{name}.paving"), cert, &data.m, tol)?;
                let (max, _) = paving_norm(&data.m, &cert.partition)?;
                recomputed_pass &= max <= epsilon / 2.0 + PAVING_TOL;
                pavings.push((data.indices.clone(), cert.partition.clone()));
            }
            None => recomputed_pass = false,
        }
    }

    match (&report.final_partition, refine(partition, &pavings)) {
        (Some(claimed), Ok(refined)) => {
            out.same("final_partition", claimed, &refined);
            out.same("final_block_count", report.final_block_count, Some(refined.nonempty_blocks()));
            let max_l = pavings.iter().map(|(_, p)| p.nonempty_blocks()).max().unwrap_or(1);
            out.same("total_blocks_bound", report.total_blocks_bound, Some(r_eff * max_l));
            let final_margin = check_final_blocks(&mut out, report, &refined, tol)?;
            recomputed_pass &= final_margin >= -input.tolerance;
        }
        (None, _) => recomputed_pass = false,
        (Some(_), Err(e)) => {
            out.push("final_partition", "refinement", e);
            recomputed_pass = false;
        }
    }
    out.same("pass", report.pass, recomputed_pass);
    Ok(out)
}

fn check_final_blocks(
    out: &mut VerifyOutcome,
    report: &ReductionReport,
    refined: &Partition,
    tol: f64,
) -> Result<f64> {
    let epsilon = report.input.epsilon;
    let blocks = refined.blocks();
    let Some(claimed) = &report.final_check else {
        out.push("final_check", "missing", "present");
        return Ok(f64::NEG_INFINITY);
    };
    out.num("final_check.epsilon", claimed.epsilon, epsilon, tol);
    out.same("final_check.blocks.len", claimed.blocks.len(), blocks.len());
    let mut margin = f64::INFINITY;
    for (j, (c, block)) in claimed.blocks.iter().zip(&blocks).enumerate() {
        let check = is_eps_riesz(&report.family.subfamily(block)?, epsilon)?;
        out.same(format!("final_check.blocks[{}].id", j + 1), c.id, j + 1);
        out.num(format!("final_check.blocks[{}].lower", j + 1), c.lower, check.lower, tol);
        out.num(format!("final_check.blocks[{}].upper", j + 1), c.upper, check.upper, tol);
        out.same(format!("final_check.blocks[{}].pass", j + 1), c.pass, check.pass);
        margin = margin.min(check.margin(epsilon));
    }
    out.opt_num("final_margin", report.final_margin, Some(margin), tol);
    Ok(margin)
}
