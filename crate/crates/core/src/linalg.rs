//! Dense vector/matrix primitives, top-k magnitude selection and support-set
//! algebra.
//!
//! Everything here is immutable after construction and all operations are
//! pure functions, so values can be shared freely across threads.

use crate::error::{IhtError, Result};
use crate::rng::RngStream;
use rand::Rng;
use std::fmt;

/// A p-dimensional real parameter or gradient vector. Entries are finite by
/// construction: NaN/Inf are rejected once here instead of in every
/// operation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    values: Vec<f64>,
}

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IhtError::NonFinite {
                context: "DenseVector::new",
            });
        }
        Ok(DenseVector { values })
    }

    pub fn zeros(p: usize) -> Self {
        DenseVector {
            values: vec![0.0; p],
        }
    }

    /// Unit basis vector `e_i`.
    pub fn basis(p: usize, i: usize) -> Self {
        let mut values = vec![0.0; p];
        values[i] = 1.0;
        DenseVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        dot(&self.values, &other.values)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.values, &self.values)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn num_nonzeros(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// Smallest absolute value among nonzero entries.
    pub fn min_nonzero_abs(&self) -> Result<f64> {
        self.values
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| v.abs())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
            .ok_or(IhtError::AllZero)
    }

    /// Support of the nonzero entries.
    pub fn support(&self) -> SupportSet {
        SupportSet {
            indices: (0..self.dim()).filter(|&i| self.values[i] != 0.0).collect(),
        }
    }

    /// `self - step * dir`, the gradient-step combination used everywhere.
    pub fn step(&self, step: f64, dir: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.dim(), dir.dim());
        DenseVector {
            values: self
                .values
                .iter()
                .zip(&dir.values)
                .map(|(w, g)| w - step * g)
                .collect(),
        }
    }

    pub fn add_scaled(&self, scale: f64, other: &DenseVector) -> DenseVector {
        self.step(-scale, other)
    }

    pub fn scale(&self, s: f64) -> DenseVector {
        DenseVector {
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &DenseVector) -> DenseVector {
        self.step(1.0, other)
    }

    /// Copy of `self` zeroed outside `keep`.
    pub fn masked(&self, keep: &SupportSet) -> DenseVector {
        let mut values = vec![0.0; self.dim()];
        for &i in keep.iter() {
            values[i] = self.values[i];
        }
        DenseVector { values }
    }

    /// Internal fast path: wrap values that are known finite.
    pub(crate) fn from_parts(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        DenseVector { values }
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl fmt::Display for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// A sorted, duplicate-free set of coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    /// Build from arbitrary indices; sorts and removes duplicates.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SupportSet { indices }
    }

    pub fn empty() -> Self {
        SupportSet {
            indices: Vec::new(),
        }
    }

    pub fn full(p: usize) -> Self {
        SupportSet {
            indices: (0..p).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.indices.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    pub fn intersection_len(&self, other: &SupportSet) -> usize {
        // both sides sorted: merge walk
        let (mut i, mut j, mut count) = (0, 0, 0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        count
    }

    pub fn union_len(&self, other: &SupportSet) -> usize {
        self.len() + other.len() - self.intersection_len(other)
    }
}

/// Row-major dense matrix with n rows and p columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n_rows * n_cols {
            return Err(IhtError::DimensionMismatch {
                context: "DenseMatrix::new",
                expected: n_rows * n_cols,
                got: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(IhtError::NonFinite {
                context: "DenseMatrix::new",
            });
        }
        Ok(DenseMatrix {
            n_rows,
            n_cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(IhtError::DimensionMismatch {
                    context: "DenseMatrix::from_rows",
                    expected: n_cols,
                    got: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        DenseMatrix::new(n_rows, n_cols, entries)
    }

    pub fn identity(p: usize) -> Self {
        let mut entries = vec![0.0; p * p];
        for i in 0..p {
            entries[i * p + i] = 1.0;
        }
        DenseMatrix {
            n_rows: p,
            n_cols: p,
            entries,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_cols + j]
    }

    /// `X v` for a p-vector v; returns an n-vector.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n_cols);
        (0..self.n_rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `X^T u` for an n-vector u; returns a p-vector.
    pub fn matvec_t(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.n_rows);
        let mut out = vec![0.0; self.n_cols];
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(self.row(i)) {
                *o += ui * x;
            }
        }
        out
    }

    /// New matrix keeping only the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<DenseMatrix> {
        for &c in cols {
            if c >= self.n_cols {
                return Err(IhtError::SupportOutOfRange {
                    index: c,
                    p: self.n_cols,
                });
            }
        }
        let mut entries = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            entries.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(DenseMatrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            entries,
        })
    }

    /// Gram matrix `X^T X` (p x p).
    pub fn gram(&self) -> DenseMatrix {
        let p = self.n_cols;
        let mut entries = vec![0.0; p * p];
        for i in 0..self.n_rows {
            let row = self.row(i);
            for a in 0..p {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                let base = a * p;
                for (b, rb) in row.iter().enumerate() {
                    entries[base + b] += ra * rb;
                }
            }
        }
        DenseMatrix {
            n_rows: p,
            n_cols: p,
            entries,
        }
    }

    pub fn max_row_norm(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| dot(self.row(i), self.row(i)).sqrt())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hard-thresholding operator `H_k`: keeps the k largest-magnitude entries
/// and zeroes the rest. Ties are broken by lowest index so runs are
/// reproducible. Zero entries never enter the support; `k >= p` returns the
/// vector unchanged and `k = 0` the zero vector.
pub fn hard_threshold(w: &DenseVector, k: usize) -> (DenseVector, SupportSet) {
    let p = w.dim();
    let k = k.min(p);
    let mut order: Vec<usize> = (0..p).filter(|&i| w[i] != 0.0).collect();
    order.sort_by(|&a, &b| {
        w[b].abs()
            .partial_cmp(&w[a].abs())
            .expect("finite by construction")
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order.sort_unstable();
    let mut values = vec![0.0; p];
    for &i in &order {
        values[i] = w[i];
    }
    (DenseVector::from_parts(values), SupportSet { indices: order })
}

/// Hard-thresholding stability margin: `|[w]_(k)| - |[w]_(k+1)|`, the gap
/// between the k-th and (k+1)-th largest absolute values. `w` keeps a stable
/// top-k support under any perturbation of inf-norm below half this value.
pub fn thresholding_margin(w: &DenseVector, k: usize) -> Result<f64> {
    let p = w.dim();
    if k == 0 || k >= p {
        return Err(IhtError::MarginUndefined { k, p });
    }
    let mut mags: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("finite by construction"));
    Ok(mags[k - 1] - mags[k])
}

/// Largest eigenvalue of a symmetric positive semidefinite operator given by
/// its action `apply(v, out)`, estimated by power iteration from a fixed
/// pseudorandom start. Stops once the eigenpair residual drops below
/// `tol * lambda` and the estimate has stabilized.
pub fn top_eigenvalue<F>(apply: F, dim: usize, tol: f64) -> Result<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    if dim == 0 || tol <= 0.0 {
        return Err(IhtError::InvalidConfig(
            "top_eigenvalue needs dim >= 1 and tol > 0".into(),
        ));
    }
    const MAX_ITERS: usize = 50_000;
    let mut rng = RngStream::root(0x7091_u64).child(dim as u64).rng();
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let norm = dot(&v, &v).sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    let mut z = vec![0.0; dim];
    let mut lambda = 0.0;
    for iter in 0..MAX_ITERS {
        apply(&v, &mut z);
        let new_lambda = dot(&v, &z);
        if !new_lambda.is_finite() {
            return Err(IhtError::NonFinite {
                context: "top_eigenvalue operator output",
            });
        }
        let mut residual_sq = 0.0;
        for (zi, vi) in z.iter().zip(&v) {
            let r = zi - new_lambda * vi;
            residual_sq += r * r;
        }
        let scale = new_lambda.abs().max(f64::MIN_POSITIVE);
        let stable = (new_lambda - lambda).abs() <= tol * scale;
        lambda = new_lambda;
        if residual_sq.sqrt() <= tol * scale && (stable || iter > 0) {
            return Ok(lambda);
        }
        let zn = dot(&z, &z).sqrt();
        if zn == 0.0 {
            // operator annihilated the iterate: eigenvalue 0 along this - and,
            // since PSD operators contract nothing upward from a generic
            // start, globally
            return Ok(0.0);
        }
        for (vi, zi) in v.iter_mut().zip(&z) {
            *vi = zi / zn;
        }
    }
    Err(IhtError::PowerIterationNoConvergence {
        iterations: MAX_ITERS,
        last_estimate: lambda,
    })
}

/// All eigenvalues of a small symmetric matrix by the cyclic Jacobi method.
/// Intended for the restricted Gram blocks (k x k with k at most a few
/// hundred), not for large systems.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    if m.n_rows() != m.n_cols() {
        return Err(IhtError::DimensionMismatch {
            context: "symmetric_eigenvalues",
            expected: m.n_rows(),
            got: m.n_cols(),
        });
    }
    let n = m.n_rows();
    let mut a = m.entries.clone();
    let idx = |i: usize, j: usize| i * n + j;
    let off_diag_sq = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[idx(i, j)] * a[idx(i, j)];
            }
        }
        s
    };
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        if off_diag_sq(&a).sqrt() <= 1e-14 * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[idx(q, q)] - a[idx(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[idx(r, p)];
                    let arq = a[idx(r, q)];
                    a[idx(r, p)] = c * arp - s * arq;
                    a[idx(r, q)] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[idx(p, r)];
                    let aqr = a[idx(q, r)];
                    a[idx(p, r)] = c * apr - s * aqr;
                    a[idx(q, r)] = s * apr + c * aqr;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[idx(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(eigs)
}

/// Cholesky factorization of a symmetric positive definite matrix, returning
/// the lower factor as packed row-major data. Fails on non-positive pivots.
pub(crate) fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for t in 0..j {
                s -= l[i * n + t] * l[j * n + t];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(IhtError::SingularSystem);
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solve `A x = b` given the Cholesky factor L of A.
pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for t in 0..i {
            s -= l[i * n + t] * y[t];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for t in (i + 1)..n {
            s -= l[t * n + i] * x[t];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solve the SPD system `A x = b` by Cholesky factorization.
pub fn solve_spd(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.n_rows() != a.n_cols() || a.n_rows() != b.len() {
        return Err(IhtError::DimensionMismatch {
            context: "solve_spd",
            expected: a.n_rows(),
            got: b.len(),
        });
    }
    let l = cholesky(&a.entries, a.n_rows())?;
    Ok(cholesky_solve(&l, a.n_rows(), b))
}
