//! Sparse storage and linear solves.
//!
//! Operators are assembled from `(row, col, value)` triplets into compressed rows.
//! The implicit time step solves with one fixed matrix many times, so the default solver
//! factors once: a banded LU with partial pivoting (row-major unknown ordering keeps the
//! bandwidth at `N + 1` for the 9-point stencil and `2N` with second-order upwinding).
//! BiCGSTAB is available for systems whose band would not fit in memory.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Boundary contributions, one entry per unknown.
pub type BoundaryVector = Vec<f64>;

/// Compressed-row sparse matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates triplets; duplicates are summed on [`TripletBuilder::build`].
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, triplets: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.triplets.push((row, col, value));
    }

    pub fn extend_from(&mut self, op: &SparseOperator, scale: f64) {
        for (r, c, v) in op.iter() {
            self.triplets.push((r, c, scale * v));
        }
    }

    pub fn build(self) -> Result<SparseOperator> {
        assemble(self.rows, self.cols, self.triplets)
    }
}

/// Builds an operator from triplets, summing duplicates.
pub fn assemble(
    rows: usize,
    cols: usize,
    triplets: impl IntoIterator<Item = (usize, usize, f64)>,
) -> Result<SparseOperator> {
    let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
    if let Some(&(row, col, _)) = t.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
        return Err(Error::TripletOutOfRange { row, col, rows, cols });
    }
    // Stable sort keeps the summation order of duplicates equal to insertion order.
    t.sort_by_key(|&(r, c, _)| (r, c));

    let mut row_ptr = vec![0usize; rows + 1];
    let mut col_idx = Vec::with_capacity(t.len());
    let mut values: Vec<f64> = Vec::with_capacity(t.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in t {
        if last == Some((r, c)) {
            *values.last_mut().unwrap() += v;
        } else {
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
    }
    for r in 0..rows {
        row_ptr[r + 1] += row_ptr[r];
    }
    Ok(SparseOperator { rows, cols, row_ptr, col_idx, values })
}

impl SparseOperator {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of one row as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Entry `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: x.len() });
        }
        Ok((0..self.rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect())
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Multiplies row `r` by `scale[r]`.
    pub fn scale_rows(&self, scale: &[f64]) -> Result<Self> {
        if scale.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, got: scale.len() });
        }
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in out.row_ptr[r]..out.row_ptr[r + 1] {
                out.values[k] *= scale[r];
            }
        }
        Ok(out)
    }

    /// `sum_k coef_k * op_k` over operators of equal shape.
    pub fn linear_combination(terms: &[(f64, &SparseOperator)]) -> Result<Self> {
        let (rows, cols) = match terms.first() {
            Some((_, op)) => (op.rows, op.cols),
            None => return Err(Error::DimensionMismatch { expected: 1, got: 0 }),
        };
        let mut b = TripletBuilder::new(rows, cols);
        for (coef, op) in terms {
            if op.rows != rows || op.cols != cols {
                return Err(Error::DimensionMismatch { expected: rows, got: op.rows });
            }
            b.extend_from(op, *coef);
        }
        b.build()
    }

    /// Lower and upper bandwidth of the stored pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        self.iter().fold((0, 0), |(kl, ku), (r, c, _)| if c < r { (kl.max(r - c), ku) } else { (kl, ku.max(c - r)) })
    }

    /// Sparsity dump: one `row col value` line per stored entry.
    pub fn to_triples_text(&self) -> String {
        let mut out = String::new();
        for (r, c, v) in self.iter() {
            let _ = writeln!(out, "{r} {c} {v:.17e}");
        }
        out
    }
}

/// Which linear solver backs [`Factorization`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Banded LU unless the band would exceed [`AUTO_BAND_LIMIT`] entries.
    #[default]
    Auto,
    BandedLu,
    BiCgStab,
}

/// Band storage above this many `f64`s switches `Auto` to BiCGSTAB (about 2 GB).
pub const AUTO_BAND_LIMIT: usize = 1 << 28;

/// LU factorization of a banded matrix with partial pivoting (LINPACK `gbfa` layout:
/// multipliers are kept per elimination step, so later row swaps never touch them).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    // row r holds columns r - kl ..= r + kl + ku of the factor U (and scratch left of r)
    band: Vec<f64>,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(op: &SparseOperator) -> Result<Self> {
        if op.rows != op.cols {
            return Err(Error::DimensionMismatch { expected: op.rows, got: op.cols });
        }
        let n = op.rows;
        let (kl, ku) = op.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for (r, c, v) in op.iter() {
            band[r * width + (c + kl - r)] = v;
        }
        let mut multipliers = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0usize; n];

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            // pivot search in column k
            let mut p = k;
            let mut best = band[k * width + kl].abs();
            for r in k + 1..=last_row {
                let v = band[r * width + (k + kl - r)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            pivots[k] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularMatrix { row: k });
            }
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    band.swap(k * width + (c + kl - k), p * width + (c + kl - p));
                }
            }
            let pivot = band[k * width + kl];
            for r in k + 1..=last_row {
                let m = band[r * width + (k + kl - r)] / pivot;
                multipliers[k * kl + (r - k - 1)] = m;
                band[r * width + (k + kl - r)] = 0.0;
                if m != 0.0 {
                    for c in k + 1..=last_col {
                        band[r * width + (c + kl - r)] -= m * band[k * width + (c + kl - k)];
                    }
                }
            }
        }
        Ok(Self { n, kl, width, band, multipliers, pivots })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let (n, kl, width) = (self.n, self.kl, self.width);
        if rhs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
        }
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                x[r] -= self.multipliers[k * kl + (r - k - 1)] * xk;
            }
        }
        let reach = width - kl - 1;
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=(k + reach).min(n - 1) {
                s -= self.band[k * width + (c + kl - k)] * x[c];
            }
            x[k] = s / self.band[k * width + kl];
        }
        Ok(x)
    }
}

/// Jacobi-preconditioned BiCGSTAB.
#[derive(Debug, Clone)]
pub struct BiCgStab {
    op: SparseOperator,
    inv_diag: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl BiCgStab {
    pub fn new(op: &SparseOperator) -> Result<Self> {
        if op.rows != op.cols {
            return Err(Error::DimensionMismatch { expected: op.rows, got: op.cols });
        }
        let inv_diag = (0..op.rows)
            .map(|r| {
                let d = op.get(r, r);
                if d != 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::SingularMatrix { row: r })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { op: op.clone(), inv_diag, tol: 1e-12, max_iter: 10_000 })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.op.rows;
        if rhs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let norm = |a: &[f64]| dot(a, a).sqrt();
        let precond = |v: &[f64]| v.iter().zip(&self.inv_diag).map(|(a, d)| a * d).collect::<Vec<_>>();

        let bnorm = norm(rhs);
        let mut x = precond(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let ax = self.op.matvec(&x)?;
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let r0 = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        for _ in 0..self.max_iter {
            if norm(&r) <= self.tol * bnorm {
                return Ok(x);
            }
            let rho_new = dot(&r0, &r);
            if rho_new == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for k in 0..n {
                p[k] = r[k] + beta * (p[k] - omega * v[k]);
            }
            let phat = precond(&p);
            v = self.op.matvec(&phat)?;
            alpha = rho / dot(&r0, &v);
            let s: Vec<f64> = r.iter().zip(&v).map(|(a, b)| a - alpha * b).collect();
            if norm(&s) <= self.tol * bnorm {
                for k in 0..n {
                    x[k] += alpha * phat[k];
                }
                return Ok(x);
            }
            let shat = precond(&s);
            let t = self.op.matvec(&shat)?;
            omega = dot(&t, &s) / dot(&t, &t);
            for k in 0..n {
                x[k] += alpha * phat[k] + omega * shat[k];
                r[k] = s[k] - omega * t[k];
            }
            if omega == 0.0 {
                break;
            }
        }
        let ax = self.op.matvec(&x)?;
        let res = rhs.iter().zip(&ax).map(|(b, a)| (b - a).abs()).fold(0.0, f64::max);
        Err(Error::SolveFailed { residual: res, bound: self.tol * bnorm })
    }
}

/// A reusable solver for one fixed operator.
#[derive(Debug, Clone)]
pub enum Factorization {
    Lu(BandedLu),
    Krylov(BiCgStab),
}

impl Factorization {
    pub fn new(op: &SparseOperator, kind: SolverKind) -> Result<Self> {
        match kind {
            SolverKind::BandedLu => Ok(Self::Lu(BandedLu::factor(op)?)),
            SolverKind::BiCgStab => Ok(Self::Krylov(BiCgStab::new(op)?)),
            SolverKind::Auto => {
                let (kl, ku) = op.bandwidth();
                if op.rows.saturating_mul(3 * kl + ku + 1) <= AUTO_BAND_LIMIT {
                    Ok(Self::Lu(BandedLu::factor(op)?))
                } else {
                    Ok(Self::Krylov(BiCgStab::new(op)?))
                }
            }
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Lu(lu) => lu.solve(rhs),
            Self::Krylov(k) => k.solve(rhs),
        }
    }
}

/// `||op x - rhs||_inf` and the acceptance bound `1e-10 (||op|| ||x|| + ||rhs||)`.
pub fn residual_check(op: &SparseOperator, x: &[f64], rhs: &[f64]) -> Result<(f64, f64)> {
    let ax = op.matvec(x)?;
    let res = ax.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let bn = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok((res, 1e-10 * (op.norm_inf() * xn + bn)))
}

/// One-shot solve with residual verification.
pub fn solve(op: &SparseOperator, rhs: &[f64]) -> Result<Vec<f64>> {
    let x = Factorization::new(op, SolverKind::Auto)?.solve(rhs)?;
    let (residual, bound) = residual_check(op, &x, rhs)?;
    if residual > bound || !residual.is_finite() {
        return Err(Error::SolveFailed { residual, bound });
    }
    Ok(x)
}
