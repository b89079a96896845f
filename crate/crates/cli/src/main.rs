//! `tripave`: generate Riesz families, run the paving reduction, pave
//! matrices and re-verify the resulting reports and certificates.

mod manifest;

use std::fmt::{self, Display, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use tripave_core::instance::{self, InstanceKind, InstanceSpec};
use tripave_core::linalg::{family_from_gram, gram};
use tripave_core::partition::{hkw_local_search, partition_objective, step_one_margin};
use tripave_core::paving::{brute_force_paving, heuristic_paving, strip_diagonal, DIAGONAL_TOL, EXHAUSTIVE_PAVING_LIMIT};
use tripave_core::reduction::{choose_r, run_reduction, DEFAULT_TOLERANCE, REPORT_KIND};
use tripave_core::riesz::riesz_bounds;
use tripave_core::verify::{verify_certificate, verify_report, VerifyOutcome};
use tripave_core::{Matrix, PavingCertificate, PavingStrategy, ReductionConfig, ReductionReport, VectorFamily};

use manifest::{manifest_path, now, sha256_hex, InputRecord, RunManifest};

#[derive(Parser, Serialize)]
#[command(name = "tripave", version)]
#[command(about = "Riesz-basis partitions through triangular matrix pavings, with re-checkable reports")]
struct Cli {
    /// Seed for generated instances
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Absolute tolerance on margins; relative tolerance when verifying
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,

    /// Print JSON on standard output instead of a summary
    #[arg(long, global = true)]
    json: bool,

    /// Write the JSON result here, plus `<path>.manifest.json`
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Generate a seeded unit-norm family (vectors as matrix columns)
    Generate {
        #[command(flatten)]
        generator: GeneratorArgs,
    },
    /// Run the full reduction and emit a report
    Reduce {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = Paving::Exhaustive)]
        paving: Paving,
        /// Use this r instead of the one derived from the Riesz bounds
        #[arg(long)]
        r_override: Option<u64>,
    },
    /// Pave a square matrix: blocks with ||Q T Q|| <= epsilon ||T||
    Pave {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = Paving::Exhaustive)]
        method: Paving,
        /// Zero the diagonal first instead of refusing the matrix
        #[arg(long)]
        strip_diagonal: bool,
        /// Largest block count tried by the exhaustive search (default: n)
        #[arg(long)]
        r_max: Option<usize>,
    },
    /// Correlation-minimizing partition of a family into r blocks
    Partition {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, conflicts_with = "epsilon", required_unless_present = "epsilon")]
        r: Option<usize>,
        /// Derive r from the Riesz bounds as the reduction does
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Recompute every value in a report or paving certificate
    Verify { file: PathBuf },
    /// Riesz bounds of a family
    Bounds {
        #[command(flatten)]
        family: FamilyArgs,
    },
}

#[derive(Args, Serialize)]
struct GeneratorArgs {
    #[arg(long, value_enum, default_value_t = Kind::RandomRiesz)]
    kind: Kind,
    #[arg(long)]
    n: Option<usize>,
    /// Upper limit on B / A
    #[arg(long, default_value_t = 2.0)]
    condition: f64,
}

#[derive(Args, Serialize)]
struct FamilyArgs {
    /// Family file (vectors as columns); overrides the generator flags
    #[arg(long, conflicts_with = "gram_file")]
    input: Option<PathBuf>,
    /// Gram matrix file; a family with this Gram matrix is used
    #[arg(long)]
    gram_file: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    #[value(name = "orthonormal")]
    Orthonormal,
    #[value(name = "perturbed_orthonormal", alias = "perturbed-orthonormal")]
    PerturbedOrthonormal,
    #[value(name = "random_riesz", alias = "random-riesz")]
    RandomRiesz,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Paving {
    Exhaustive,
    Heuristic,
}

/// Exit 2: usage or input problems.
#[derive(Debug)]
struct InputError(String);

impl Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn input_err(e: impl Display) -> InputError {
    InputError(e.to_string())
}

type CliResult<T> = Result<T, InputError>;

/// What a command produced, before it is written anywhere.
struct Outcome {
    body: Value,
    summary: Option<String>,
    code: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = now();
    let mut inputs = Vec::new();
    let result = match &cli.command {
        Command::Generate { generator } => cmd_generate(&cli, generator, &mut inputs),
        Command::Reduce { family, epsilon, paving, r_override } => {
            cmd_reduce(&cli, family, *epsilon, *paving, *r_override, &mut inputs)
        }
        Command::Pave { matrix, epsilon, method, strip_diagonal, r_max } => {
            cmd_pave(matrix, *epsilon, *method, *strip_diagonal, *r_max, &mut inputs)
        }
        Command::Partition { family, r, epsilon } => cmd_partition(&cli, family, *r, *epsilon, &mut inputs),
        Command::Verify { file } => cmd_verify(&cli, file, &mut inputs),
        Command::Bounds { family } => cmd_bounds(&cli, family, &mut inputs),
    };
    let outcome = match result.and_then(|o| emit(&cli, o, inputs, started)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    ExitCode::from(outcome)
}

fn emit(cli: &Cli, outcome: Outcome, inputs: Vec<InputRecord>, started: f64) -> CliResult<u8> {
    let mut body = serde_json::to_string_pretty(&outcome.body).map_err(input_err)?;
    body.push('\n');
    if let Some(out) = &cli.out {
        fs::write(out, &body).map_err(|e| InputError(format!("cannot write {}: {e}", out.display())))?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command_name(&cli.command).to_string(),
            config: serde_json::to_value(cli).map_err(input_err)?,
            generator: instance::GENERATOR,
            inputs,
            started_at: started,
            finished_at: now(),
            outputs: vec![out.clone()],
        };
        let path = manifest_path(out);
        let text = serde_json::to_string_pretty(&manifest).map_err(input_err)? + "\n";
        fs::write(&path, text).map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))?;
    }
    match (&outcome.summary, cli.json, &cli.out) {
        (Some(summary), false, _) => print!("{summary}"),
        (_, true, _) | (None, false, None) => print!("{body}"),
        (None, false, Some(out)) => println!("wrote {}", out.display()),
    }
    Ok(outcome.code)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Generate { .. } => "generate",
        Command::Reduce { .. } => "reduce",
        Command::Pave { .. } => "pave",
        Command::Partition { .. } => "partition",
        Command::Verify { .. } => "verify",
        Command::Bounds { .. } => "bounds",
    }
}

fn read_file(path: &Path, inputs: &mut Vec<InputRecord>) -> CliResult<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    inputs.push(InputRecord { source: path.display().to_string(), sha256: sha256_hex(&bytes) });
    Ok(bytes)
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> CliResult<T> {
    serde_json::from_slice(bytes).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn generate(cli: &Cli, args: &GeneratorArgs, inputs: &mut Vec<InputRecord>) -> CliResult<VectorFamily> {
    let n = args.n.ok_or_else(|| InputError("--n is required unless a family file is given".into()))?;
    let kind = match args.kind {
        Kind::Orthonormal => InstanceKind::Orthonormal,
        Kind::PerturbedOrthonormal => InstanceKind::PerturbedOrthonormal,
        Kind::RandomRiesz => InstanceKind::RandomRiesz,
    };
    let family =
        instance::generate(&InstanceSpec { kind, n, condition_target: args.condition, seed: cli.seed }).map_err(input_err)?;
    let canonical = serde_json::to_vec(&family).map_err(input_err)?;
    inputs.push(InputRecord { source: "generated".into(), sha256: sha256_hex(&canonical) });
    Ok(family)
}

fn load_family(cli: &Cli, args: &FamilyArgs, inputs: &mut Vec<InputRecord>) -> CliResult<VectorFamily> {
    if let Some(path) = &args.input {
        let bytes = read_file(path, inputs)?;
        return parse_json(path, &bytes);
    }
    if let Some(path) = &args.gram_file {
        let bytes = read_file(path, inputs)?;
        let g: Matrix = parse_json(path, &bytes)?;
        return family_from_gram(&g).map_err(|e| InputError(format!("{}: {e}", path.display())));
    }
    generate(cli, &args.generator, inputs)
}

fn to_value(v: &impl Serialize) -> CliResult<Value> {
    serde_json::to_value(v).map_err(input_err)
}

fn cmd_generate(cli: &Cli, args: &GeneratorArgs, inputs: &mut Vec<InputRecord>) -> CliResult<Outcome> {
    let family = generate(cli, args, inputs)?;
    Ok(Outcome { body: to_value(&family)?, summary: None, code: 0 })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

fn reduce_summary(report: &ReductionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "pass: {}", report.pass);
    let _ = writeln!(
        s,
        "n = {}, dim = {}, epsilon = {}, A = {}, B = {}",
        report.input.n,
        report.input.dim,
        report.input.epsilon,
        fmt_opt(report.input.lower),
        fmt_opt(report.input.upper)
    );
    if let (Some(r), Some(r_eff)) = (report.r_theoretical, report.r_effective) {
        let _ = writeln!(s, "r = {r} (effective {r_eff})");
    }
    let _ = writeln!(s, "step 1 margin: {}", fmt_opt(report.step1.as_ref().and_then(|x| x.margin)));
    for (name, check) in [("step 2", &report.step2), ("step 3", &report.step3), ("step 4", &report.step4)] {
        let _ = writeln!(s, "{name} margin: {}", fmt_opt(check.as_ref().map(|c| c.margin)));
    }
    if let (Some(count), Some(bound)) = (report.final_block_count, report.total_blocks_bound) {
        let _ = writeln!(s, "final blocks: {count} (r * max L = {bound})");
    }
    let _ = writeln!(s, "final margin: {}", fmt_opt(report.final_margin));
    if let Some(e) = &report.stage_error {
        let _ = writeln!(s, "failed at {}: {}", e.stage, e.message);
    }
    s
}

fn cmd_reduce(
    cli: &Cli,
    family: &FamilyArgs,
    epsilon: f64,
    paving: Paving,
    r_override: Option<u64>,
    inputs: &mut Vec<InputRecord>,
) -> CliResult<Outcome> {
    let fam = load_family(cli, family, inputs)?;
    let strategy = match paving {
        Paving::Exhaustive => PavingStrategy::Exhaustive,
        Paving::Heuristic => PavingStrategy::Heuristic,
    };
    let config = ReductionConfig::new(epsilon)
        .map_err(input_err)?
        .with_paving(strategy)
        .with_r_override(r_override)
        .with_tolerance(cli.tolerance);
    config.validate().map_err(input_err)?;
    let report = run_reduction(&fam, &config);
    let code = match &report.stage_error {
        None if report.pass => 0,
        Some(e) if matches!(e.stage.as_str(), "input" | "riesz_bounds" | "choose_r") => 2,
        _ => 1,
    };
    Ok(Outcome { body: to_value(&report)?, summary: Some(reduce_summary(&report)), code })
}

fn cmd_pave(
    path: &Path,
    epsilon: f64,
    method: Paving,
    strip: bool,
    r_max: Option<usize>,
    inputs: &mut Vec<InputRecord>,
) -> CliResult<Outcome> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(InputError(format!("epsilon must be positive, got {epsilon}")));
    }
    let bytes = read_file(path, inputs)?;
    let mut t: Matrix = parse_json(path, &bytes)?;
    if !t.is_square() {
        return Err(InputError(format!("{}: matrix is {}x{}, not square", path.display(), t.rows(), t.cols())));
    }
    let nonzero = (0..t.rows()).find(|&i| t[(i, i)].norm() > DIAGONAL_TOL);
    match (nonzero, strip) {
        (Some(i), false) => {
            return Err(InputError(format!(
                "diagonal entry {} is nonzero; pass --strip-diagonal to pave T - D(T)",
                i + 1
            )))
        }
        (_, true) => t = strip_diagonal(&t).map_err(input_err)?,
        (None, false) => {}
    }
    let cert = match method {
        Paving::Exhaustive => {
            if t.rows() > EXHAUSTIVE_PAVING_LIMIT {
                return Err(InputError(format!(
                    "exhaustive paving is limited to n <= {EXHAUSTIVE_PAVING_LIMIT}; use --method heuristic"
                )));
            }
            let r_max = r_max.unwrap_or(t.rows()).max(1);
            match brute_force_paving(&t, epsilon, r_max).map_err(input_err)? {
                Some(c) => c,
                None => {
                    let body = json!({ "pass": false, "epsilon": epsilon, "r_max": r_max });
                    let summary = format!("pass: false\nno paving with at most {r_max} blocks\n");
                    return Ok(Outcome { body, summary: Some(summary), code: 1 });
                }
            }
        }
        Paving::Heuristic => heuristic_paving(&t, epsilon).map_err(input_err)?,
    };
    let cert = cert.with_matrix(&t);
    let summary = pave_summary(&cert);
    let code = if cert.pass { 0 } else { 1 };
    Ok(Outcome { body: to_value(&cert)?, summary: Some(summary), code })
}

fn pave_summary(cert: &PavingCertificate) -> String {
    let blocks: Vec<String> = cert
        .partition
        .blocks()
        .iter()
        .map(|b| format!("{{{}}}", b.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")))
        .collect();
    format!(
        "pass: {}\nblocks: {} {}\nmax block norm: {:.6e} (threshold {:.6e}, ||T|| = {:.6e})\n",
        cert.pass,
        cert.partition.num_blocks(),
        blocks.join(" "),
        cert.max_block_norm(),
        cert.threshold,
        cert.reference_norm
    )
}

fn cmd_partition(
    cli: &Cli,
    family: &FamilyArgs,
    r: Option<usize>,
    epsilon: Option<f64>,
    inputs: &mut Vec<InputRecord>,
) -> CliResult<Outcome> {
    let fam = load_family(cli, family, inputs)?;
    let r = match (r, epsilon) {
        (Some(r), _) => r,
        (None, Some(eps)) => {
            let bounds = riesz_bounds(&fam).map_err(input_err)?;
            choose_r(bounds, eps).map_err(input_err)?.min(fam.len() as u64) as usize
        }
        (None, None) => return Err(InputError("one of --r or --epsilon is required".into())),
    };
    let g = gram(&fam);
    let (p, trace) = hkw_local_search(&g, r, None).map_err(input_err)?;
    let margin = step_one_margin(&g, &p).map_err(input_err)?;
    let objective = partition_objective(&g, &p).map_err(input_err)?;
    let pass = margin.is_none_or(|m| m >= -cli.tolerance);
    let body = json!({
        "r": r,
        "partition": p,
        "objective": objective,
        "margin": margin,
        "pass": pass,
        "trace": trace,
    });
    let summary =
        format!("pass: {pass}\nr = {r}, objective = {objective:.6e}, margin = {}, moves = {}\n", fmt_opt(margin), trace.move_count());
    Ok(Outcome { body, summary: Some(summary), code: if pass { 0 } else { 1 } })
}

fn cmd_bounds(cli: &Cli, family: &FamilyArgs, inputs: &mut Vec<InputRecord>) -> CliResult<Outcome> {
    let fam = load_family(cli, family, inputs)?;
    let b = riesz_bounds(&fam).map_err(input_err)?;
    let body = json!({ "n": fam.len(), "dim": fam.dim(), "lower": b.lower, "upper": b.upper, "condition": b.condition() });
    let summary = format!("A = {:.12e}\nB = {:.12e}\nB / A = {:.12e}\n", b.lower, b.upper, b.condition());
    Ok(Outcome { body, summary: Some(summary), code: 0 })
}

fn cmd_verify(cli: &Cli, path: &Path, inputs: &mut Vec<InputRecord>) -> CliResult<Outcome> {
    let bytes = read_file(path, inputs)?;
    let value: Value = parse_json(path, &bytes)?;
    let (what, outcome) = if value.get("kind").and_then(Value::as_str) == Some(REPORT_KIND) {
        let report: ReductionReport =
            serde_json::from_value(value).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        ("report", verify_report(&report, cli.tolerance).map_err(input_err)?)
    } else if value.get("block_norms").is_some() {
        let cert: PavingCertificate =
            serde_json::from_value(value).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        let matrix = cert
            .matrix
            .clone()
            .ok_or_else(|| InputError(format!("{}: certificate does not embed its matrix", path.display())))?;
        ("certificate", verify_certificate(&cert, &matrix, cli.tolerance).map_err(input_err)?)
    } else {
        return Err(InputError(format!("{}: neither a reduction report nor a paving certificate", path.display())));
    };
    Ok(verify_outcome(what, &outcome))
}

fn verify_outcome(what: &str, outcome: &VerifyOutcome) -> Outcome {
    let code = if outcome.certified_pass() { 0 } else { 1 };
    let discrepancies: Vec<Value> = outcome
        .discrepancies
        .iter()
        .map(|d| json!({ "field": d.field, "claimed": d.claimed, "recomputed": d.recomputed }))
        .collect();
    let body = json!({
        "kind": what,
        "checked": outcome.checked,
        "consistent": outcome.consistent(),
        "claimed_pass": outcome.claimed_pass,
        "discrepancies": discrepancies,
    });
    let mut s = format!(
        "{what}: {} values rechecked, {} discrepancies, claimed pass: {}\n",
        outcome.checked,
        outcome.discrepancies.len(),
        outcome.claimed_pass
    );
    for d in &outcome.discrepancies {
        let _ = writeln!(s, "  {}: claimed {}, recomputed {}", d.field, d.claimed, d.recomputed);
    }
    Outcome { body, summary: Some(s), code }
}
