//! Dense vectors and row-major matrices.
//!
//! Only the operations the solvers need: products with `A` and `Aᵀ`, a few
//! BLAS-1 style helpers, and a power-iteration estimate of `‖A‖²₂`.
//!
//! Matrices and vectors are read from and written to plain CSV: one matrix row
//! per line, comma separated, no header. A vector is a single-column CSV.

use std::io::{Read, Write};
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

/// Relative change at which power iteration stops.
pub const POWER_TOL: f64 = 1e-10;
/// Iteration cap for power iteration.
pub const POWER_MAX_ITERS: usize = 10_000;
/// Multiplier applied to the power-iteration estimate before it is used as a
/// Lipschitz constant. Power iteration converges from below.
pub const SAFETY_FACTOR: f64 = 1.001;

/// A non-empty vector of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { index });
        }
        Ok(Self(entries))
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "vector length must be at least 1");
        Self(vec![0.0; len])
    }

    /// Wraps entries produced by arithmetic on valid vectors. Callers that can
    /// overflow must check [`Vector::is_finite`].
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        Self(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self - other`.
    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        check_len(self.len(), other.len())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// `self + scale * dir`.
    pub fn add_scaled(&self, scale: f64, dir: &Vector) -> Result<Vector> {
        check_len(self.len(), dir.len())?;
        Ok(Self(
            self.0
                .iter()
                .zip(&dir.0)
                .map(|(a, d)| a + scale * d)
                .collect(),
        ))
    }

    pub fn scaled(&self, scale: f64) -> Vector {
        Self(self.0.iter().map(|v| scale * v).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Row-major dense matrix of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        check_len(rows * cols, data.len())?;
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n);
        for row in rows {
            check_len(n, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), n, data)
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in d.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self::new(n, n, data).expect("diagonal entries must be finite and non-empty")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Returns a copy with columns reordered so that new column `j` is old
    /// column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        check_len(self.cols, perm.len())?;
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(perm.iter().map(|&j| row[j]));
        }
        Self::new(self.rows, self.cols, data)
    }

    /// `A x`.
    pub fn matvec(&self, x: &Vector) -> Result<Vector> {
        check_len(self.cols, x.len())?;
        let out = (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x.as_slice())
                    .map(|(a, v)| a * v)
                    .sum()
            })
            .collect();
        Ok(Vector::from_raw(out))
    }

    /// `Aᵀ r`.
    pub fn transpose_matvec(&self, r: &Vector) -> Result<Vector> {
        check_len(self.rows, r.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, ri) in r.as_slice().iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * ri;
            }
        }
        Ok(Vector::from_raw(out))
    }
}

/// Estimates `‖A‖²₂ = λ_max(AᵀA)` by power iteration on `AᵀA`.
///
/// Runs from the normalized all-ones vector and from a fixed pseudo-random
/// vector and returns the larger Rayleigh quotient, so a start that happens
/// to be orthogonal to the leading eigenvector cannot hide it. The raw
/// estimate is returned; see [`SAFETY_FACTOR`]. A zero matrix gives 0.
pub fn spectral_norm_sq(a: &DenseMatrix, tol: f64, max_iters: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(crate::error::invalid("tol", "must be positive"));
    }
    if max_iters == 0 {
        return Err(crate::error::invalid("max_iters", "must be at least 1"));
    }
    let n = a.cols();
    let ones = vec![1.0; n];
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x05ee_d0fa_11);
    let scrambled: Vec<f64> = (0..n)
        .map(|_| crate::instance::unit_f64(rng.next_u64()) - 0.5)
        .collect();

    let mut best: f64 = 0.0;
    for start in [ones, scrambled] {
        best = best.max(power_iteration(a, start, tol, max_iters)?);
    }
    Ok(best)
}

fn power_iteration(a: &DenseMatrix, start: Vec<f64>, tol: f64, max_iters: usize) -> Result<f64> {
    let mut v = Vector::from_raw(start);
    let norm = v.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    v = v.scaled(1.0 / norm);

    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let av = a.matvec(&v)?;
        let rayleigh = av.norm_sq();
        let w = a.transpose_matvec(&av)?;
        let w_norm = w.norm();
        if w_norm == 0.0 {
            return Ok(0.0);
        }
        let done = estimate > 0.0 && (rayleigh - estimate).abs() <= tol * rayleigh;
        estimate = rayleigh;
        if done {
            break;
        }
        v = w.scaled(1.0 / w_norm);
    }
    Ok(estimate)
}

fn parse_rows(reader: impl Read) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|e| Error::Parse {
                    line: line + 1,
                    message: format!("`{field}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix_csv(reader: impl Read) -> Result<DenseMatrix> {
    DenseMatrix::from_rows(&parse_rows(reader)?)
}

pub fn read_vector_csv(reader: impl Read) -> Result<Vector> {
    let rows = parse_rows(reader)?;
    let mut entries = Vec::with_capacity(rows.len());
    for (line, row) in rows.into_iter().enumerate() {
        if row.len() != 1 {
            return Err(Error::Parse {
                line: line + 1,
                message: format!("expected a single column, found {}", row.len()),
            });
        }
        entries.push(row[0]);
    }
    Vector::new(entries)
}

pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    read_matrix_csv(std::fs::File::open(path)?)
}

pub fn load_vector(path: &Path) -> Result<Vector> {
    read_vector_csv(std::fs::File::open(path)?)
}

// `{}` on f64 prints the shortest decimal that parses back to the same value.
pub fn write_matrix_csv(a: &DenseMatrix, mut w: impl Write) -> Result<()> {
    for i in 0..a.rows() {
        let line: Vec<String> = a.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_vector_csv(x: &Vector, mut w: impl Write) -> Result<()> {
    for v in x.as_slice() {
        writeln!(w, "{v}")?;
    }
    Ok(())
}
