//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the terminal; exits nonzero if any
//! criterion fails.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use tripave_core::linalg::{gram, gram_schmidt, hermitian_eig_bounds, operator_norm, Matrix, Scalar, Vector};
use tripave_core::partition::{brute_force_min_partition, hkw_local_search, partition_objective, Partition};
use tripave_core::paving::brute_force_paving;
use tripave_core::reduction::{
    choose_r, projection_bound, run_reduction, triangularize_block, verify_step2, verify_step3, PavingStrategy,
    ReductionConfig,
};
use tripave_core::riesz::{eps_minimality_values, riesz_bounds, RieszBounds};
use tripave_core::VectorFamily;

const CORPUS: u64 = 100;
const EPSILONS: [f64; 2] = [0.25, 0.5];

struct Check {
    failures: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { failures: Vec::new() }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok && self.failures.len() < 5 {
            self.failures.push(what());
        } else if !ok {
            self.failures.push(String::new());
        }
    }
}

struct Line {
    id: u32,
    name: &'static str,
    detail: String,
    elapsed: Duration,
    limit: Option<Duration>,
    check: Check,
}

impl Line {
    fn passed(&self) -> bool {
        self.check.failures.is_empty() && self.limit.is_none_or(|l| self.elapsed <= l)
    }

    fn print(&self) {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let limit = self.limit.map_or(String::new(), |l| format!(" (limit {} s)", l.as_secs()));
        println!(
            "{status} criterion {}: {} | {} | {:.2} s{limit}",
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        );
        for f in self.check.failures.iter().filter(|f| !f.is_empty()) {
            println!("       {f}");
        }
        if self.check.failures.len() > 5 {
            println!("       ... {} failures in total", self.check.failures.len());
        }
    }
}

fn timed(
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    body: impl FnOnce(&mut Check) -> String,
) -> Line {
    let mut check = Check::new();
    let start = Instant::now();
    let detail = body(&mut check);
    Line { id, name, detail, elapsed: start.elapsed(), limit, check }
}

/// Within-block correlation of `i` against block `b`.
fn correlation(g: &Matrix, p: &Partition, i: usize, b: usize) -> f64 {
    (0..g.rows()).filter(|&l| l != i && p.block_of(l) == b).map(|l| g[(i, l)].norm_sqr()).sum()
}

/// Seeded Gram matrices, sizes 4 to 16, mixing real and complex and
/// dimensions at or below the count.
fn seeded_gram(seed: u64) -> (Matrix, usize) {
    let n = 4 + (seed % 13) as usize;
    let r = 2 + (seed % 3) as usize;
    let mut g = rng(10_000 + seed);
    let dim = 2 + (seed as usize / 3) % (n - 1);
    (gram(&random_unit_family(&mut g, dim, n, seed.is_multiple_of(4))), r)
}

fn criterion_1() -> Line {
    timed(1, "Step-1 soundness of local search", Some(Duration::from_secs(10)), |c| {
        let mut worst = f64::INFINITY;
        let count = 240;
        for seed in 0..count {
            let (g, r) = seeded_gram(seed);
            let (p, _) = hkw_local_search(&g, r, None).unwrap();
            for i in 0..g.rows() {
                let own = correlation(&g, &p, i, p.block_of(i));
                for k in (0..r).filter(|&k| k != p.block_of(i)) {
                    let margin = correlation(&g, &p, i, k) - own;
                    worst = worst.min(margin);
                    c.expect(margin >= -1e-10, || format!("seed {seed} i {i} k {k}: margin {margin:e}"));
                }
            }
        }
        format!("{count} Gram matrices, n in [4,16], r in [2,4], worst margin {worst:.3e} (tol -1e-10)")
    })
}

fn two_pair_gram() -> Matrix {
    Matrix::from_fn(4, 4, |i, j| {
        let v = if i == j {
            1.0
        } else if i / 2 == j / 2 {
            0.9
        } else {
            0.1
        };
        Scalar::new(v, 0.0)
    })
}

fn criterion_2() -> Line {
    timed(2, "exhaustive partition oracle vs local search", Some(Duration::from_secs(60)), |c| {
        let count = 120;
        let mut strict = 0;
        for seed in 0..count {
            let n = 3 + (seed % 8) as usize;
            let r = 2 + (seed % 3) as usize;
            let mut g = rng(20_000 + seed);
            let gm = gram(&random_unit_family(&mut g, (n / 2).max(2), n, seed % 3 == 0));
            let best = partition_objective(&gm, &brute_force_min_partition(&gm, r).unwrap()).unwrap();
            let (_, trace) = hkw_local_search(&gm, r, None).unwrap();
            c.expect(best <= trace.final_objective + 1e-12, || {
                format!("seed {seed}: exhaustive {best:e} above local {:e}", trace.final_objective)
            });
            if best < trace.final_objective - 1e-12 {
                strict += 1;
            }
        }
        let g = two_pair_gram();
        let exact = partition_objective(&g, &brute_force_min_partition(&g, 2).unwrap()).unwrap();
        let (_, trace) = hkw_local_search(&g, 2, None).unwrap();
        c.expect((exact - trace.final_objective).abs() <= 1e-12, || {
            format!("two-pair: exhaustive {exact} vs local {}", trace.final_objective)
        });
        format!(
            "{count} instances n <= 10 (local search strictly worse on {strict}); two-pair objective {exact:.4} both ways"
        )
    })
}

/// Step-1 partition of the corpus member at `eps`, with its bounds and `r`.
fn step_one(fam: &VectorFamily, eps: f64) -> (RieszBounds, u64, Partition) {
    let b = riesz_bounds(fam).unwrap();
    let r = choose_r(b, eps).unwrap();
    let r_eff = r.min(fam.len() as u64) as usize;
    let (p, _) = hkw_local_search(&gram(fam), r_eff, None).unwrap();
    (b, r, p)
}

fn criterion_3() -> Line {
    timed(3, "Step-2 and Step-3 bounds", None, |c| {
        let (mut w2, mut w3) = (f64::INFINITY, f64::INFINITY);
        let mut nontrivial = 0;
        for seed in 0..CORPUS {
            let fam = corpus_family(seed);
            let g = gram(&fam);
            for eps in EPSILONS {
                let (b, r, p) = step_one(&fam, eps);
                if p.num_blocks() < fam.len() {
                    nontrivial += 1;
                }
                let m2 = verify_step2(&g, &p, b, r).unwrap();
                let m3 = verify_step3(&fam, &p, b, r).unwrap();
                // independent recomputation: direct sums and QR projections
                let mut within = 0.0_f64;
                let mut proj = 0.0_f64;
                for i in 0..fam.len() {
                    within = within.max(correlation(&g, &p, i, p.block_of(i)));
                    let others: Vec<&Vector> =
                        (0..fam.len()).filter(|&l| l != i && p.block_of(l) == p.block_of(i)).map(|l| fam.get(l)).collect();
                    proj = proj.max(projection_sq(&others, fam.get(i)));
                }
                let o2 = b.upper.powi(2) / r as f64 - within;
                let o3 = projection_bound(b, r) - proj;
                w2 = w2.min(o2);
                w3 = w3.min(o3);
                c.expect(m2 >= -1e-8 && o2 >= -1e-8, || format!("seed {seed} eps {eps}: step 2 margin {m2:e} / {o2:e}"));
                c.expect(m3 >= -1e-8 && o3 >= -1e-8, || format!("seed {seed} eps {eps}: step 3 margin {m3:e} / {o3:e}"));
                c.expect((m2 - o2).abs() <= 1e-10 && (m3 - o3).abs() <= 1e-8, || {
                    format!("seed {seed} eps {eps}: library and oracle margins differ")
                });
            }
        }
        format!(
            "{} runs ({nontrivial} with r < n), worst step-2 margin {w2:.3e}, worst step-3 margin {w3:.3e} (tol -1e-8)",
            CORPUS as usize * EPSILONS.len()
        )
    })
}

fn criterion_4() -> Line {
    timed(4, "Step-4 diagonal and Step-5 norm structure", None, |c| {
        let (mut worst_diag, mut worst_norm) = (f64::INFINITY, f64::INFINITY);
        let mut blocks = 0;
        for seed in 0..CORPUS {
            let fam = corpus_family(seed);
            for eps in EPSILONS {
                let (b, _, p) = step_one(&fam, eps);
                for block in p.blocks().into_iter().filter(|b| !b.is_empty()) {
                    blocks += 1;
                    let data = match triangularize_block(&fam, &block, eps) {
                        Ok(d) => d,
                        Err(e) => {
                            c.expect(false, || format!("seed {seed} eps {eps}: {e}"));
                            continue;
                        }
                    };
                    let d = data.min_diagonal_sq() - (1.0 - eps / 2.0);
                    let m_norm = svd_norm(&data.m);
                    let nm = b.upper + 1.0 - m_norm;
                    worst_diag = worst_diag.min(d);
                    worst_norm = worst_norm.min(nm);
                    c.expect(d >= -1e-8, || format!("seed {seed} eps {eps}: |K(m,m)|^2 margin {d:e}"));
                    c.expect(nm >= -1e-9, || format!("seed {seed} eps {eps}: ||M|| margin {nm:e}"));
                    c.expect((m_norm - data.m_norm).abs() <= 1e-8, || format!("seed {seed}: m_norm off the SVD"));
                }
            }
        }
        format!("{blocks} blocks, worst diagonal margin {worst_diag:.3e} (tol -1e-8), worst B+1-||M|| {worst_norm:.3e} (tol -1e-9)")
    })
}

fn criterion_5() -> Line {
    timed(5, "end-to-end reduction with exhaustive paving", Some(Duration::from_secs(300)), |c| {
        let mut passes = 0;
        let mut final_blocks = 0;
        let mut worst = f64::INFINITY;
        for seed in 0..CORPUS {
            let fam = corpus_family(seed);
            for eps in EPSILONS {
                let cfg = ReductionConfig::new(eps).unwrap().with_paving(PavingStrategy::Exhaustive);
                let report = run_reduction(&fam, &cfg);
                if report.pass {
                    passes += 1;
                }
                c.expect(report.pass, || format!("seed {seed} eps {eps}: {:?}", report.stage_error));
                let Some(partition) = &report.final_partition else { continue };
                for block in partition.blocks().into_iter().filter(|b| !b.is_empty()) {
                    final_blocks += 1;
                    let e = eigh(&gram(&fam.subfamily(&block).unwrap()));
                    let lower = e[0].max(0.0).sqrt() - (1.0 - eps);
                    let upper = (1.0 + eps) - e[e.len() - 1].sqrt();
                    worst = worst.min(lower).min(upper);
                    c.expect(lower >= -1e-8 && upper >= -1e-8, || {
                        format!("seed {seed} eps {eps}: block {block:?} margins {lower:e}, {upper:e}")
                    });
                }
            }
        }
        let runs = CORPUS as usize * EPSILONS.len();
        format!("{passes}/{runs} reports pass; {final_blocks} final blocks re-verified, worst eps-Riesz margin {worst:.3e} (tol -1e-8)")
    })
}

/// Fewest feasible blocks by subset dynamic programming over SVD norms.
fn oracle_min_blocks(t: &Matrix, limit: f64) -> usize {
    let n = t.rows();
    let full = (1usize << n) - 1;
    let feasible: Vec<bool> = (0..=full)
        .map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            idx.len() < 2 || svd_norm(&t.principal_submatrix(&idx)) <= limit
        })
        .collect();
    let mut cover = vec![usize::MAX; full + 1];
    cover[0] = 0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let mut sub = mask;
        while sub > 0 {
            if sub & low != 0 && feasible[sub] && cover[mask ^ sub] != usize::MAX {
                cover[mask] = cover[mask].min(cover[mask ^ sub] + 1);
            }
            sub = (sub - 1) & mask;
        }
    }
    cover[full]
}

fn criterion_6() -> Line {
    timed(6, "paving oracle agreement", None, |c| {
        let count = 50;
        let mut histogram = [0usize; 9];
        for seed in 0..count {
            let n = 3 + (seed % 6) as usize;
            let t = random_zero_diagonal(&mut rng(30_000 + seed), n);
            let oracle = oracle_min_blocks(&t, 0.5 * svd_norm(&t) + 1e-9);
            let ours = brute_force_paving(&t, 0.5, n).unwrap().map(|c| c.partition.num_blocks());
            histogram[oracle] += 1;
            c.expect(ours == Some(oracle), || format!("seed {seed} n {n}: ours {ours:?} vs oracle {oracle}"));
        }
        let swap = Matrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let r = brute_force_paving(&swap, 0.5, 2).unwrap().map(|c| c.partition.num_blocks());
        c.expect(r == Some(2), || format!("swap matrix: r = {r:?}"));
        let spread: Vec<String> =
            histogram.iter().enumerate().filter(|(_, &k)| k > 0).map(|(r, k)| format!("r={r}: {k}")).collect();
        format!("{count} matrices n <= 8 at eps 0.5 ({}); swap matrix r = 2", spread.join(", "))
    })
}

fn criterion_7() -> Line {
    timed(7, "numerical kernels against dense decompositions", None, |c| {
        let (mut norm_err, mut eig_err, mut gs_err) = (0.0_f64, 0.0_f64, 0.0_f64);
        for seed in 0..100_u64 {
            let mut g = rng(40_000 + seed);
            let rows = 1 + (seed as usize * 7) % 20;
            let cols = 1 + (seed as usize * 11) % 20;
            let m = random_matrix(&mut g, rows, cols, seed % 2 == 1);
            let e = (operator_norm(&m) - svd_norm(&m)).abs();
            norm_err = norm_err.max(e);
            c.expect(e <= 1e-8, || format!("seed {seed} {rows}x{cols}: norm error {e:e}"));

            let n = 1 + (seed as usize) % 20;
            let a = random_matrix(&mut g, n, n, seed % 3 != 0);
            let h = Matrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
            let (lo, hi) = hermitian_eig_bounds(&h).unwrap();
            let oracle = eigh(&h);
            let e = (lo - oracle[0]).abs().max((hi - oracle[n - 1]).abs());
            eig_err = eig_err.max(e);
            c.expect(e <= 1e-8, || format!("seed {seed} n {n}: eigenvalue error {e:e}"));

            let fam = random_unit_family(&mut g, n, n, seed % 2 == 0);
            if let Ok((ortho, k)) = gram_schmidt(&fam) {
                for i in 0..n {
                    let mut rebuilt = vec![Scalar::new(0.0, 0.0); n];
                    for l in 0..=i {
                        for (x, y) in rebuilt.iter_mut().zip(ortho.get(l).entries()) {
                            *x += k[(i, l)] * y;
                        }
                    }
                    let e = Vector::new(rebuilt).unwrap().sub(fam.get(i)).norm();
                    gs_err = gs_err.max(e);
                    c.expect(e <= 1e-9, || format!("seed {seed} vector {i}: reconstruction error {e:e}"));
                }
            }
        }
        format!(
            "100 seeds up to 20x20: max norm error {norm_err:.2e}, max eigenvalue error {eig_err:.2e} (tol 1e-8), max reconstruction error {gs_err:.2e} (tol 1e-9)"
        )
    })
}

fn criterion_8() -> Line {
    timed(8, "eps-minimality after Steps 1-3", None, |c| {
        let mut worst = f64::INFINITY;
        for seed in 0..CORPUS {
            let fam = corpus_family(seed);
            for eps in EPSILONS {
                let (b, r, p) = step_one(&fam, eps);
                let bound = projection_bound(b, r).sqrt();
                for block in p.blocks().into_iter().filter(|b| !b.is_empty()) {
                    let values = eps_minimality_values(&fam.subfamily(&block).unwrap()).unwrap();
                    let max = values.iter().copied().fold(0.0, f64::max);
                    worst = worst.min(bound - max);
                    c.expect(max <= bound + 1e-8, || format!("seed {seed} eps {eps}: {max:e} above {bound:e}"));
                }
            }
        }
        format!("{} runs, worst margin to sqrt(B^4/(A^4 r)) {worst:.3e} (tol -1e-8)", CORPUS as usize * EPSILONS.len())
    })
}

fn criterion_9() -> Line {
    timed(9, "determinism and verification through the CLI", None, |c| {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        for path in [&a, &b] {
            let out = run(&["reduce", "--seed", "7", "--n", "12", "--epsilon", "0.5", "--out", path.to_str().unwrap()]);
            c.expect(out.status.code() == Some(0), || format!("reduce exit {:?}", out.status.code()));
        }
        let same = fs::read(&a).unwrap() == fs::read(&b).unwrap();
        c.expect(same, || "repeated reduce produced different bodies".into());

        let mut verified = 0;
        for seed in 0..CORPUS {
            for eps in EPSILONS {
                let path = dir.path().join(format!("corpus-{seed}-{eps}.json"));
                let mut args = vec!["reduce".to_string(), "--epsilon".into(), eps.to_string()];
                args.extend(corpus_args(seed));
                args.extend(["--out".to_string(), path.to_str().unwrap().to_string()]);
                let args: Vec<&str> = args.iter().map(String::as_str).collect();
                let out = run(&args);
                c.expect(out.status.code() == Some(0), || format!("seed {seed} eps {eps}: reduce exit {:?}", out.status.code()));
                let out = run(&["verify", path.to_str().unwrap()]);
                if out.status.code() == Some(0) {
                    verified += 1;
                }
                c.expect(out.status.code() == Some(0), || {
                    format!("seed {seed} eps {eps}: verify exit {:?}\n{}", out.status.code(), String::from_utf8_lossy(&out.stdout))
                });
            }
        }
        let tamper = run(&["verify", fixture("tampered_report.json").to_str().unwrap()]);
        c.expect(tamper.status.code() == Some(1), || format!("tamper fixture: exit {:?}", tamper.status.code()));
        format!(
            "repeated reduce byte-identical: {same}; verify exit 0 on {verified}/{} corpus reports; tamper fixture exit {:?}",
            CORPUS as usize * EPSILONS.len(),
            tamper.status.code()
        )
    })
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let criteria: [fn() -> Line; 9] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
    ];
    let mut failed = 0;
    for criterion in criteria {
        let line = criterion();
        line.print();
        if !line.passed() {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
