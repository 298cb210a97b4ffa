//! Dense real vectors and matrices with the induced norms and matrix
//! measures (logarithmic norms) used throughout the crate.
//!
//! Every public constructor rejects NaN and infinite entries, so the
//! kernels below can assume finite data.

use std::fmt;
use std::ops::{Deref, Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Power iteration: relative change tolerance on the Rayleigh quotient.
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 10_000;
/// Cyclic Jacobi: off-diagonal Frobenius tolerance.
const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-12;
/// Largest admitted 1-norm condition estimate for [`invert`].
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },
    #[error("power iteration did not converge within {0} iterations")]
    IterationLimit(usize),
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },
}

fn shape_err(expected: impl Into<String>, actual: impl Into<String>) -> LinalgError {
    LinalgError::Shape {
        expected: expected.into(),
        actual: actual.into(),
    }
}

fn check_finite(data: &[f64]) -> Result<(), LinalgError> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(LinalgError::InvalidInput(format!(
            "non-finite entry {} at index {i}",
            data[i]
        ))),
        None => Ok(()),
    }
}

/// Selects one of the three induced norms supported by the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PNorm {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Inf,
}

impl PNorm {
    /// Norm of a plain vector.
    pub fn vector_norm(self, v: &[f64]) -> f64 {
        match self {
            PNorm::One => v.iter().map(|x| x.abs()).sum(),
            PNorm::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            PNorm::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PNorm::One => "1",
            PNorm::Two => "2",
            PNorm::Inf => "inf",
        })
    }
}

impl std::str::FromStr for PNorm {
    type Err = LinalgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "one" => Ok(PNorm::One),
            "2" | "two" => Ok(PNorm::Two),
            "inf" | "infinity" | "∞" => Ok(PNorm::Inf),
            other => Err(LinalgError::InvalidInput(format!("unknown norm `{other}`"))),
        }
    }
}

/// Finite real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self, LinalgError> {
        check_finite(&entries)?;
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Wraps entries the caller has already checked (or produced from
    /// finite data by bounded arithmetic).
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        Self(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self, p: PNorm) -> f64 {
        p.vector_norm(&self.0)
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = LinalgError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

/// Finite real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(shape_err(
                format!("{} entries for {rows}x{cols}", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(shape_err(format!("{cols} columns"), format!("{} columns", bad.len())));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, alpha: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = alpha;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Result<Self, LinalgError> {
        check_finite(d)?;
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        Ok(m)
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self::from_raw(self.cols, self.rows, t)
    }

    /// `y = A x`; panics on dimension mismatch.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `y = Aᵀ x`; panics on dimension mismatch.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec_transpose dimension mismatch");
        let mut y = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
        y
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(shape_err(
                format!("{} rows on the right factor", self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let (n, m) = (self.rows, other.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for (k, a) in self.row(i).iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Self::from_raw(n, m, out))
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &DenseMatrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseMatrix, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(shape_err(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    pub fn scale(&self, alpha: f64) -> DenseMatrix {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|a| alpha * a).collect())
    }

    /// `A + αI` for square `A`.
    pub fn shift_diagonal(&self, alpha: f64) -> DenseMatrix {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m.data[i * self.cols + i] += alpha;
        }
        m
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Max absolute column sum; one row-major pass.
    pub fn norm1(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols.max(1)).take(self.rows) {
            for (s, a) in sums.iter_mut().zip(row) {
                *s += a.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues of a real 2x2 matrix: either two real values (`im1 = im2 = 0`)
/// or a conjugate pair with `im1 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPair {
    pub re1: f64,
    pub im1: f64,
    pub re2: f64,
    pub im2: f64,
}

impl ComplexPair {
    pub fn real(a: f64, b: f64) -> Self {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        Self { re1: hi, im1: 0.0, re2: lo, im2: 0.0 }
    }

    pub fn conjugate(re: f64, im: f64) -> Self {
        let im = im.abs();
        Self { re1: re, im1: im, re2: re, im2: -im }
    }

    pub fn is_real(&self) -> bool {
        self.im1 == 0.0 && self.im2 == 0.0
    }

    pub fn max_real_part(&self) -> f64 {
        self.re1.max(self.re2)
    }
}

/// Induced operator norm. `p = 2` runs power iteration on `AᵀA`.
pub fn induced_norm(a: &DenseMatrix, p: PNorm) -> Result<f64, LinalgError> {
    check_finite(a.as_slice())?;
    match p {
        PNorm::One => Ok(a.norm1()),
        PNorm::Inf => Ok(a.norm_inf()),
        PNorm::Two => spectral_norm(a),
    }
}

fn spectral_norm(a: &DenseMatrix) -> Result<f64, LinalgError> {
    if a.as_slice().iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let n = a.cols();
    // Irrational-ish start vector keeps us off structured null spaces.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    normalize2(&mut v);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = a.matvec_transpose(&a.matvec(&v));
        let next: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum();
        let norm_w = PNorm::Two.vector_norm(&w);
        if norm_w == 0.0 {
            // Start vector hit the null space of AᵀA; perturb and continue.
            v.iter_mut().enumerate().for_each(|(i, x)| *x += (i as f64 + 1.0).sin());
            normalize2(&mut v);
            continue;
        }
        v = w.into_iter().map(|x| x / norm_w).collect();
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            return Ok(next.max(0.0).sqrt());
        }
        lambda = next;
    }
    Err(LinalgError::IterationLimit(POWER_MAX_ITERS))
}

fn normalize2(v: &mut [f64]) {
    let n = PNorm::Two.vector_norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Matrix measure (logarithmic norm) of a square matrix.
pub fn matrix_measure(a: &DenseMatrix, p: PNorm) -> Result<f64, LinalgError> {
    if !a.is_square() {
        return Err(shape_err("square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    check_finite(a.as_slice())?;
    let n = a.rows();
    match p {
        PNorm::One => {
            let mut sums = vec![0.0; n];
            for i in 0..n {
                for (j, (s, v)) in sums.iter_mut().zip(a.row(i)).enumerate() {
                    *s += if i == j { *v } else { v.abs() };
                }
            }
            Ok(sums.into_iter().fold(f64::NEG_INFINITY, f64::max))
        }
        PNorm::Inf => Ok((0..n)
            .map(|i| {
                a.row(i)
                    .iter()
                    .enumerate()
                    .map(|(j, v)| if i == j { *v } else { v.abs() })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)),
        PNorm::Two => {
            let at = a.transpose();
            let sym = DenseMatrix::from_raw(
                n,
                n,
                a.as_slice().iter().zip(at.as_slice()).map(|(x, y)| 0.5 * (x + y)).collect(),
            );
            symmetric_lambda_max(&sym)
        }
    }
}

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_lambda_max(s: &DenseMatrix) -> Result<f64, LinalgError> {
    if !s.is_square() {
        return Err(shape_err("square matrix", format!("{}x{}", s.rows(), s.cols())));
    }
    check_finite(s.as_slice())?;
    let n = s.rows();
    if n == 0 {
        return Err(LinalgError::InvalidInput("empty matrix".into()));
    }
    let scale = s.as_slice().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in i + 1..n {
            if (s[(i, j)] - s[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(LinalgError::InvalidInput(format!(
                    "matrix not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let mut a = s.clone();
    let off = |a: &DenseMatrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += a[(i, j)] * a[(i, j)];
                }
            }
        }
        acc.sqrt()
    };
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }
    Ok((0..n).map(|i| a[(i, i)]).fold(f64::NEG_INFINITY, f64::max))
}

/// Roots of `λ² − τλ + δ` for a 2x2 matrix.
pub fn eig2x2(a: &DenseMatrix) -> Result<ComplexPair, LinalgError> {
    if a.rows() != 2 || a.cols() != 2 {
        return Err(shape_err("2x2 matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let tau = p + s;
    // τ² − 4δ rewritten to avoid cancellation.
    let disc = (p - s) * (p - s) + 4.0 * q * r;
    if disc >= 0.0 {
        let root = disc.sqrt();
        let big = if tau >= 0.0 { 0.5 * (tau + root) } else { 0.5 * (tau - root) };
        let det = p * s - q * r;
        let small = if big != 0.0 { det / big } else { 0.0 };
        Ok(ComplexPair::real(big, small))
    } else {
        Ok(ComplexPair::conjugate(0.5 * tau, 0.5 * (-disc).sqrt()))
    }
}

/// LU factorization with partial pivoting; returns the packed factors,
/// the row permutation and the permutation sign.
fn lu(a: &DenseMatrix) -> Option<(DenseMatrix, Vec<usize>, f64)> {
    let n = a.rows();
    let mut m = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, m[(i, k)].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == 0.0 {
            return None;
        }
        if piv != k {
            for j in 0..n {
                m.data.swap(k * n + j, piv * n + j);
            }
            perm.swap(k, piv);
            sign = -sign;
        }
        let d = m[(k, k)];
        for i in k + 1..n {
            let l = m[(i, k)] / d;
            m[(i, k)] = l;
            if l != 0.0 {
                for j in k + 1..n {
                    let u = m[(k, j)];
                    m[(i, j)] -= l * u;
                }
            }
        }
    }
    Some((m, perm, sign))
}

pub fn determinant(a: &DenseMatrix) -> Result<f64, LinalgError> {
    if !a.is_square() {
        return Err(shape_err("square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    Ok(match lu(a) {
        None => 0.0,
        Some((m, _, sign)) => (0..a.rows()).fold(sign, |acc, i| acc * m[(i, i)]),
    })
}

/// Inverse by partial-pivot LU. Rejects matrices whose 1-norm condition
/// estimate reaches [`MAX_CONDITION`].
pub fn invert(w: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if !w.is_square() {
        return Err(shape_err("square matrix", format!("{}x{}", w.rows(), w.cols())));
    }
    check_finite(w.as_slice())?;
    let n = w.rows();
    let (m, perm, _) = lu(w).ok_or(LinalgError::Singular { condition: f64::INFINITY })?;
    let mut inv = DenseMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        // Solve L U x = P e_j.
        for i in 0..n {
            col[i] = if perm[i] == j { 1.0 } else { 0.0 };
        }
        for i in 0..n {
            let mut acc = col[i];
            for k in 0..i {
                acc -= m[(i, k)] * col[k];
            }
            col[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = col[i];
            for k in i + 1..n {
                acc -= m[(i, k)] * col[k];
            }
            col[i] = acc / m[(i, i)];
        }
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    let condition = w.norm1() * inv.norm1();
    if !condition.is_finite() || condition >= MAX_CONDITION {
        return Err(LinalgError::Singular { condition });
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
        DenseMatrix::new(n, n, (0..n * n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    /// Sampling oracle: sup of ‖Ax‖/‖x‖ over random directions and signed
    /// basis vectors.
    fn sampled_norm(a: &DenseMatrix, p: PNorm, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
        let n = a.cols();
        let mut best = 0.0_f64;
        let mut probe = |x: &[f64]| {
            let r = p.vector_norm(&a.matvec(x)) / p.vector_norm(x);
            best = best.max(r);
        };
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            probe(&e);
        }
        if p == PNorm::Inf {
            for mask in 0..(1usize << n) {
                let x: Vec<f64> =
                    (0..n).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
                probe(&x);
            }
        }
        for _ in 0..samples {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            probe(&x);
        }
        best
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseVector::new(vec![f64::INFINITY]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn identity_norms_are_one() {
        let eye = DenseMatrix::identity(3);
        for p in [PNorm::One, PNorm::Two, PNorm::Inf] {
            assert!((induced_norm(&eye, p).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn induced_norms_match_sampling_oracle() {
        let a = m(&[&[1.0, -2.0], &[3.0, 4.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s1 = sampled_norm(&a, PNorm::One, 100_000, &mut rng);
        let sinf = sampled_norm(&a, PNorm::Inf, 100_000, &mut rng);
        // Oracle maxima: 6 at e_2 for p=1, 7 at (1, 1) for p=∞.
        assert_eq!(s1, 6.0);
        assert_eq!(sinf, 7.0);
        assert_eq!(induced_norm(&a, PNorm::One).unwrap(), 6.0);
        assert_eq!(induced_norm(&a, PNorm::Inf).unwrap(), 7.0);
    }

    #[test]
    fn spectral_norm_matches_closed_form() {
        // σ_max of [[1,-2],[3,4]]: eigenvalues of AᵀA = [[10,10],[10,20]] → 15 ± 5√5.
        let a = m(&[&[1.0, -2.0], &[3.0, 4.0]]);
        let expected = (15.0 + 5.0 * 5f64.sqrt()).sqrt();
        assert!((induced_norm(&a, PNorm::Two).unwrap() - expected).abs() < 1e-9);
        // AᵀA null space contains the all-ones direction.
        let b = m(&[&[1.0, -1.0], &[1.0, -1.0]]);
        assert!((induced_norm(&b, PNorm::Two).unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(induced_norm(&DenseMatrix::zeros(3, 2), PNorm::Two).unwrap(), 0.0);
    }

    #[test]
    fn measure_examples() {
        let a = m(&[&[-2.0, 1.0], &[0.0, -3.0]]);
        assert_eq!(matrix_measure(&a, PNorm::One).unwrap(), -2.0);
        assert_eq!(matrix_measure(&a, PNorm::Inf).unwrap(), -1.0);
        for p in [PNorm::One, PNorm::Two, PNorm::Inf] {
            let s = DenseMatrix::scaled_identity(3, -3.0);
            assert!((matrix_measure(&s, p).unwrap() + 3.0).abs() < 1e-12);
        }
        assert!(matrix_measure(&DenseMatrix::zeros(2, 3), PNorm::One).is_err());
    }

    #[test]
    fn measure_matches_definitional_limit() {
        let h = 1e-6;
        let a = m(&[&[-2.0, 1.0], &[0.0, -3.0]]);
        for p in [PNorm::One, PNorm::Inf] {
            let ih = a.scale(h).shift_diagonal(1.0);
            let limit = (induced_norm(&ih, p).unwrap() - 1.0) / h;
            assert!((limit - matrix_measure(&a, p).unwrap()).abs() < 1e-5);
        }
    }

    #[test]
    fn jacobi_examples() {
        let d = DenseMatrix::diag(&[1.0, 5.0, -2.0]).unwrap();
        assert_eq!(symmetric_lambda_max(&d).unwrap(), 5.0);
        let swap = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!((symmetric_lambda_max(&swap).unwrap() - 1.0).abs() < 1e-13);
        // Roots of λ² − 4λ + 3: 1 and 3.
        let s = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!((symmetric_lambda_max(&s).unwrap() - 3.0).abs() < 1e-13);
        assert!(symmetric_lambda_max(&m(&[&[0.0, 1.0], &[0.0, 0.0]])).is_err());
    }

    #[test]
    fn eig2x2_examples() {
        let a = m(&[&[-1.0, 0.5], &[-0.5, -1.0]]);
        let e = eig2x2(&a).unwrap();
        assert_eq!((e.re1, e.im1, e.re2, e.im2), (-1.0, 0.5, -1.0, -0.5));
        // Residual of λ² − τλ + δ at λ = re + i·im.
        let (tau, delta) = (-2.0, 1.25);
        let (re, im) = (e.re1, e.im1);
        let res_re = re * re - im * im - tau * re + delta;
        let res_im = 2.0 * re * im - tau * im;
        assert!(res_re.abs() < 1e-14 && res_im.abs() < 1e-14);

        let rot = eig2x2(&m(&[&[0.0, 1.0], &[-1.0, 0.0]])).unwrap();
        assert_eq!((rot.re1, rot.im1, rot.im2), (0.0, 1.0, -1.0));
        let d = eig2x2(&DenseMatrix::diag(&[-2.0, -3.0]).unwrap()).unwrap();
        assert_eq!((d.re1, d.re2), (-2.0, -3.0));
        assert!(d.is_real());
        assert!(eig2x2(&DenseMatrix::identity(3)).is_err());
    }

    #[test]
    fn invert_examples() {
        assert_eq!(invert(&DenseMatrix::identity(3)).unwrap(), DenseMatrix::identity(3));
        let d = invert(&DenseMatrix::diag(&[2.0, 4.0]).unwrap()).unwrap();
        assert_eq!(d, DenseMatrix::diag(&[0.5, 0.25]).unwrap());
        let u = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let ui = invert(&u).unwrap();
        assert_eq!(ui, m(&[&[1.0, -1.0], &[0.0, 1.0]]));
        assert_eq!(u.matmul(&ui).unwrap(), DenseMatrix::identity(2));
        assert!(matches!(
            invert(&m(&[&[1.0, 2.0], &[2.0, 4.0]])),
            Err(LinalgError::Singular { .. })
        ));
        assert!(invert(&m(&[&[1.0, 0.0], &[0.0, 1e-13]])).is_err());
    }

    #[test]
    fn invert_residual_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..7 {
            let a = random_matrix(&mut rng, n);
            if let Ok(ai) = invert(&a) {
                let r = a.matmul(&ai).unwrap().sub(&DenseMatrix::identity(n)).unwrap();
                assert!(r.norm_inf() <= 1e-10);
            }
        }
    }

    #[test]
    fn determinant_matches_hand_values() {
        assert_eq!(determinant(&m(&[&[1.0, -2.0], &[3.0, 4.0]])).unwrap(), 10.0);
        assert_eq!(determinant(&m(&[&[1.0, 2.0], &[2.0, 4.0]])).unwrap(), 0.0);
        let p = m(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 2.0]]);
        assert_eq!(determinant(&p).unwrap(), -2.0);
    }

    #[test]
    fn norm_one_is_transpose_of_norm_inf() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = DenseMatrix::new(3, 5, (0..15).map(|_| rng.random_range(-2.0..2.0)).collect())
                .unwrap();
            assert_eq!(
                induced_norm(&a, PNorm::One).unwrap(),
                induced_norm(&a.transpose(), PNorm::Inf).unwrap()
            );
        }
    }

    #[test]
    fn pnorm_parses_and_prints() {
        for p in [PNorm::One, PNorm::Two, PNorm::Inf] {
            assert_eq!(p.to_string().parse::<PNorm>().unwrap(), p);
        }
        assert!("3".parse::<PNorm>().is_err());
    }
}
