#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tripave_core::instance::{corpus_spec, generate, InstanceKind, InstanceSpec};
use tripave_core::{Matrix, Scalar, Vector, VectorFamily};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tripave"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn tripave")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, complex: bool) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let re = gaussian(rng);
        let im = if complex { gaussian(rng) } else { 0.0 };
        Scalar::new(re, im)
    })
}

pub fn random_zero_diagonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut m = random_matrix(rng, n, n, false);
    for i in 0..n {
        m[(i, i)] = Scalar::new(0.0, 0.0);
    }
    m
}

pub fn random_unit_family(rng: &mut ChaCha8Rng, dim: usize, count: usize, complex: bool) -> VectorFamily {
    let vectors = (0..count)
        .map(|_| {
            let v: Vec<Scalar> = (0..dim)
                .map(|_| Scalar::new(gaussian(rng), if complex { gaussian(rng) } else { 0.0 }))
                .collect();
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            Vector::new(v.into_iter().map(|z| z / n).collect()).unwrap()
        })
        .collect();
    VectorFamily::new(vectors).unwrap()
}

pub fn to_na(m: &Matrix) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Largest singular value from nalgebra's SVD.
pub fn svd_norm(m: &Matrix) -> f64 {
    to_na(m).svd(false, false).singular_values.iter().copied().fold(0.0, f64::max)
}

/// Ascending eigenvalues from nalgebra's Hermitian eigensolver.
pub fn eigh(m: &Matrix) -> Vec<f64> {
    let mut e: Vec<f64> = to_na(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// `||P f||^2` for `P` the orthogonal projection onto the span of `others`.
pub fn projection_sq(others: &[&Vector], f: &Vector) -> f64 {
    if others.is_empty() {
        return 0.0;
    }
    let dim = f.len();
    let a = DMatrix::from_fn(dim, others.len(), |i, j| others[j].entries()[i]);
    let q = a.qr().q();
    let x = DMatrix::from_fn(dim, 1, |i, _| f.entries()[i]);
    (q.adjoint() * x).iter().map(|z| z.norm_sqr()).sum()
}

/// Every assignment of `k` indices to `r` labels, in lexicographic order.
pub fn all_assignments(k: usize, r: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = (r as u64).pow(k as u32);
    (0..total).map(move |mut code| {
        let mut a = vec![0; k];
        for slot in a.iter_mut().rev() {
            *slot = (code % r as u64) as usize;
            code /= r as u64;
        }
        a
    })
}

pub fn corpus_family(seed: u64) -> VectorFamily {
    generate(&corpus_spec(seed)).unwrap()
}

/// Generator flags reproducing corpus member `seed` through the CLI.
pub fn corpus_args(seed: u64) -> Vec<String> {
    let InstanceSpec { kind, n, condition_target, seed } = corpus_spec(seed);
    let kind = match kind {
        InstanceKind::Orthonormal => "orthonormal",
        InstanceKind::PerturbedOrthonormal => "perturbed_orthonormal",
        InstanceKind::RandomRiesz => "random_riesz",
    };
    ["--kind", kind, "--n", &n.to_string(), "--condition", &condition_target.to_string(), "--seed", &seed.to_string()]
        .iter()
        .map(|s| s.to_string())
        .collect()
}
