#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tripave_core::{Matrix, Scalar, Vector, VectorFamily};

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

pub fn inner(x: &[Scalar], y: &[Scalar]) -> Scalar {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
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
    use tripave_core::instance::{corpus_spec, generate};
    generate(&corpus_spec(seed)).unwrap()
}
