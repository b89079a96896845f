//! Dense small-scale linear algebra over complex scalars.
//!
//! Everything here works on row-major `Complex64` storage. Real inputs are
//! stored with zero imaginary parts; no separate real path exists, so real
//! and complex inputs go through the same arithmetic.
//!
//! The inner product is linear in the first argument:
//! `<x, y> = sum_k x_k * conj(y_k)`.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Scalar = Complex64;

/// Tolerance for the Hermitian flag.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Numerical rank cutoff, relative to the largest column norm.
pub const RANK_TOL: f64 = 1e-10;
/// Tolerance for the unit-norm flag of a family.
pub const UNIT_NORM_TOL: f64 = 1e-10;

const POWER_REL_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    entries: Vec<Scalar>,
}

impl Vector {
    pub fn new(entries: Vec<Scalar>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("vector"));
        }
        if let Some(pos) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { entries })
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| Scalar::new(x, 0.0)).collect())
    }

    /// The `i`-th standard basis vector of length `n` (0-based).
    pub fn basis(n: usize, i: usize) -> Self {
        let mut entries = vec![Scalar::new(0.0, 0.0); n];
        entries[i] = Scalar::new(1.0, 0.0);
        Self { entries }
    }

    pub(crate) fn from_raw(entries: Vec<Scalar>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.entries
    }

    pub fn inner(&self, other: &Vector) -> Scalar {
        inner(&self.entries, &other.entries)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, c: Scalar) -> Vector {
        Vector::from_raw(self.entries.iter().map(|&z| z * c).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector::from_raw(self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect())
    }
}

pub(crate) fn inner(x: &[Scalar], y: &[Scalar]) -> Scalar {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

fn norm_of(x: &[Scalar]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Scalar>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("matrix"));
        }
        if data.len() != rows * cols {
            return Err(Error::SizeMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| Scalar::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Scalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Scalar::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { Scalar::new(1.0, 0.0) } else { Scalar::new(0.0, 0.0) })
    }

    /// Matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vector]) -> Result<Self> {
        let first = columns.first().ok_or(Error::Empty("column list"))?;
        let rows = first.len();
        for c in columns {
            if c.len() != rows {
                return Err(Error::InconsistentDimension { expected: rows, found: c.len() });
            }
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j].entries[i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Scalar] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector::from_raw((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn adjoint(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::SizeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Scalar::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn mul_slice(&self, x: &[Scalar]) -> Vec<Scalar> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub(crate) fn adjoint_mul_slice(&self, y: &[Scalar]) -> Vec<Scalar> {
        let mut out = vec![Scalar::new(0.0, 0.0); self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * yi;
            }
        }
        out
    }

    /// Largest `|a(i,j) - conj(a(j,i))|`; infinite for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation() <= HERMITIAN_TOL
    }

    /// Exact zeros on and above the diagonal.
    pub fn is_lower_triangular_zero_diag(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (i..self.cols).all(|j| self[(i, j)] == Scalar::new(0.0, 0.0)))
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// The `|idx| x |idx|` submatrix on rows and columns `idx`, in the given order.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), idx.len(), |a, b| self[(idx[a], idx[b])])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Scalar;

    fn index(&self, (i, j): (usize, usize)) -> &Scalar {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Scalar {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixData {
    Real(Vec<f64>),
    Complex(Vec<[f64; 2]>),
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    complex: bool,
    data: MatrixData,
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let complex = !self.is_real();
        let data = if complex {
            MatrixData::Complex(self.data.iter().map(|z| [z.re, z.im]).collect())
        } else {
            MatrixData::Real(self.data.iter().map(|z| z.re).collect())
        };
        MatrixJson { rows: self.rows, cols: self.cols, complex, data }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = MatrixJson::deserialize(deserializer)?;
        let data: Vec<Scalar> = match (raw.complex, raw.data) {
            (false, MatrixData::Real(v)) => v.into_iter().map(|x| Scalar::new(x, 0.0)).collect(),
            (true, MatrixData::Complex(v)) => v.into_iter().map(|[re, im]| Scalar::new(re, im)).collect(),
            // an empty list parses as real
            (true, MatrixData::Real(v)) if v.is_empty() => Vec::new(),
            (flag, _) => {
                return Err(D::Error::custom(format!("data layout does not match \"complex\": {flag}")))
            }
        };
        Matrix::new(raw.rows, raw.cols, data).map_err(D::Error::custom)
    }
}

/// An ordered family of vectors sharing one ambient dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFamily {
    vectors: Vec<Vector>,
    dim: usize,
    unit_norm: bool,
}

impl VectorFamily {
    pub fn new(vectors: Vec<Vector>) -> Result<Self> {
        let dim = vectors.first().ok_or(Error::Empty("vector family"))?.len();
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::InconsistentDimension { expected: dim, found: v.len() });
            }
        }
        let unit_norm = vectors.iter().all(|v| (v.norm() - 1.0).abs() <= UNIT_NORM_TOL);
        Ok(Self { vectors, dim, unit_norm })
    }

    /// Family made of the columns of `m`.
    pub fn from_columns(m: &Matrix) -> Result<Self> {
        Self::new((0..m.cols()).map(|j| m.column(j)).collect())
    }

    pub fn standard_basis(n: usize) -> Self {
        Self::new((0..n).map(|i| Vector::basis(n, i)).collect()).expect("n >= 1")
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_columns(&self.vectors).expect("family is nonempty and consistent")
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_unit_norm(&self) -> bool {
        self.unit_norm
    }

    pub fn vectors(&self) -> &[Vector] {
        &self.vectors
    }

    pub fn get(&self, i: usize) -> &Vector {
        &self.vectors[i]
    }

    /// Fails with [`Error::NotUnitNorm`] naming the worst vector.
    pub fn require_unit_norm(&self) -> Result<()> {
        if self.unit_norm {
            return Ok(());
        }
        let (index, norm) = self
            .vectors
            .iter()
            .map(Vector::norm)
            .enumerate()
            .max_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
            .expect("nonempty");
        Err(Error::NotUnitNorm { index, norm })
    }

    pub fn subfamily(&self, idx: &[usize]) -> Result<VectorFamily> {
        let mut out = Vec::with_capacity(idx.len());
        for &i in idx {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange { index: i, size: self.len() });
            }
            out.push(self.vectors[i].clone());
        }
        VectorFamily::new(out)
    }

    pub fn scaled(&self, c: f64) -> VectorFamily {
        VectorFamily::new(self.vectors.iter().map(|v| v.scaled(Scalar::new(c, 0.0))).collect())
            .expect("same shape")
    }

    /// Rescales every vector to unit norm.
    pub fn normalized(&self) -> Result<VectorFamily> {
        let mut out = Vec::with_capacity(self.len());
        for (i, v) in self.vectors.iter().enumerate() {
            let n = v.norm();
            if n == 0.0 {
                return Err(Error::RankDeficient(i));
            }
            out.push(v.scaled(Scalar::new(1.0 / n, 0.0)));
        }
        VectorFamily::new(out)
    }
}

impl Serialize for VectorFamily {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_matrix().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VectorFamily {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let m = Matrix::deserialize(deserializer)?;
        VectorFamily::from_columns(&m).map_err(D::Error::custom)
    }
}

/// Gram matrix `G(i, j) = <f_i, f_j>`, Hermitian by construction.
pub fn gram(family: &VectorFamily) -> Matrix {
    let k = family.len();
    let mut g = Matrix::zeros(k, k);
    for i in 0..k {
        g[(i, i)] = Scalar::new(family.get(i).norm_sqr(), 0.0);
        for j in (i + 1)..k {
            let z = family.get(i).inner(family.get(j));
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
        }
    }
    g
}

/// Spectral norm by power iteration on `M* M`.
///
/// Two deterministic starts are run: the normalized all-ones vector and a
/// perturbed copy of it. The larger estimate is returned, which covers the
/// case where the first start is orthogonal to the top singular subspace.
pub fn operator_norm(m: &Matrix) -> f64 {
    if m.max_abs() == 0.0 {
        return 0.0;
    }
    let n = m.cols();
    let ones = vec![Scalar::new(1.0, 0.0); n];
    // fractional parts of multiples of the golden ratio
    let perturbed: Vec<Scalar> = (0..n)
        .map(|i| {
            let t = ((i + 1) as f64 * 0.618_033_988_749_894_9).fract();
            Scalar::new(0.5 + t, 0.25 - 0.5 * t)
        })
        .collect();
    power_iteration(m, ones).max(power_iteration(m, perturbed))
}

fn power_iteration(m: &Matrix, mut x: Vec<Scalar>) -> f64 {
    let nx = norm_of(&x);
    x.iter_mut().for_each(|z| *z /= nx);
    let mut estimate = 0.0_f64;
    for _ in 0..POWER_MAX_ITER {
        let y = m.mul_slice(&x);
        let rayleigh = y.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let z = m.adjoint_mul_slice(&y);
        let nz = norm_of(&z);
        if nz == 0.0 {
            // x landed in the kernel
            return rayleigh.sqrt();
        }
        let prev = estimate;
        estimate = rayleigh;
        x = z.into_iter().map(|v| v / nz).collect();
        if (estimate - prev).abs() <= POWER_REL_TOL * estimate {
            break;
        }
    }
    let y = m.mul_slice(&x);
    norm_of(&y).max(estimate.sqrt())
}

/// All eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    // Real symmetric embedding [[Re, -Im], [Im, Re]]: every eigenvalue of m
    // appears twice.
    let n = m.rows();
    let size = 2 * n;
    let mut a = vec![0.0; size * size];
    for i in 0..n {
        for j in 0..n {
            // symmetrize to remove the admitted deviation
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            a[i * size + j] = z.re;
            a[(i + n) * size + (j + n)] = z.re;
            a[i * size + (j + n)] = -z.im;
            a[(i + n) * size + j] = z.im;
        }
    }
    let mut eig = jacobi_eigenvalues(a, size);
    eig.sort_by(f64::total_cmp);
    Ok(eig.into_iter().step_by(2).collect())
}

/// Smallest and largest eigenvalue of a Hermitian matrix.
pub fn hermitian_eig_bounds(m: &Matrix) -> Result<(f64, f64)> {
    let eig = hermitian_eigenvalues(m)?;
    Ok((eig[0], eig[eig.len() - 1]))
}

/// Cyclic Jacobi rotations on a real symmetric `n x n` matrix (row-major).
fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if total == 0.0 {
        return vec![0.0; n];
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q] * a[p * n + q])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-16 * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// Returns the orthonormal family `e` and the lower-triangular coefficient
/// matrix `K` with `K(m, l) = <f_m, e_l>`, so that `f_m = sum_{l <= m} K(m, l) e_l`.
/// The diagonal of `K` is real and positive.
pub fn gram_schmidt(family: &VectorFamily) -> Result<(VectorFamily, Matrix)> {
    let k = family.len();
    let max_norm = family.vectors().iter().map(Vector::norm).fold(0.0, f64::max);
    let cutoff = RANK_TOL * max_norm;
    let mut basis: Vec<Vec<Scalar>> = Vec::with_capacity(k);
    let mut coeffs = Matrix::zeros(k, k);
    for m in 0..k {
        let mut v = family.get(m).entries().to_vec();
        for _pass in 0..2 {
            for (l, e) in basis.iter().enumerate() {
                let c = inner(&v, e);
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= c * ei;
                }
                coeffs[(m, l)] += c;
            }
        }
        let nv = norm_of(&v);
        if nv <= cutoff || nv == 0.0 {
            return Err(Error::RankDeficient(m));
        }
        v.iter_mut().for_each(|z| *z /= nv);
        coeffs[(m, m)] = Scalar::new(nv, 0.0);
        basis.push(v);
    }
    let ortho = VectorFamily::new(basis.into_iter().map(Vector::from_raw).collect())?;
    Ok((ortho, coeffs))
}

/// `||P f_i||` where `P` projects onto the span of the other vectors.
///
/// Computed as the norm of the least-squares fit of `f_i` by the others,
/// using Householder QR with column pivoting; rank-deficient complements
/// are handled by the pivoting cutoff.
pub fn projection_residual(family: &VectorFamily, i: usize) -> Result<f64> {
    if i >= family.len() {
        return Err(Error::IndexOutOfRange { index: i, size: family.len() });
    }
    let target = family.get(i);
    let mut cols: Vec<Vec<Scalar>> = family
        .vectors()
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, v)| v.entries().to_vec())
        .collect();
    let max_norm = cols.iter().map(|c| norm_of(c)).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Ok(0.0);
    }
    let n = family.dim();
    let mut b = target.entries().to_vec();
    let mut rank = 0;
    for step in 0..n.min(cols.len()) {
        let (pivot, pnorm) = (step..cols.len())
            .map(|c| (c, norm_of(&cols[c][step..])))
            .fold((step, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pnorm <= RANK_TOL * max_norm {
            break;
        }
        cols.swap(step, pivot);
        let x0 = cols[step][step];
        let phase = if x0.norm() == 0.0 { Scalar::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * pnorm;
        let mut v: Vec<Scalar> = cols[step][step..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        rank += 1;
        if vv == 0.0 {
            continue;
        }
        let reflect = |y: &mut [Scalar]| {
            let w: Scalar = v.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
            let f = w * (2.0 / vv);
            for (yi, vi) in y.iter_mut().zip(&v) {
                *yi -= f * vi;
            }
        };
        for col in cols.iter_mut().skip(step) {
            reflect(&mut col[step..]);
        }
        reflect(&mut b[step..]);
    }
    let fit = norm_of(&b[..rank]);
    Ok(fit.min(target.norm()))
}

/// A family whose Gram matrix is `g`, via Cholesky of `conj(g)`.
pub fn family_from_gram(g: &Matrix) -> Result<VectorFamily> {
    if !g.is_square() {
        return Err(Error::NotSquare { rows: g.rows(), cols: g.cols() });
    }
    let dev = g.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let n = g.rows();
    let target = Matrix::from_fn(n, n, |i, j| g[(i, j)].conj());
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = target[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = Scalar::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = target[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    VectorFamily::from_columns(&l.adjoint())
}
