//! Small linear-algebra kit: row-sparse matrices and banded direct solvers.
//!
//! Dense factorizations go through `nalgebra`; the banded solvers exist because
//! the grid and ring-ordered mesh systems are narrow-banded and large.

use crate::scalar::Scalar;
use std::collections::BTreeMap;

/// Row-compressed sparse matrix with sorted, duplicate-free rows.
#[derive(Clone, Debug, Default)]
pub struct SparseRows {
    pub ncols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let rows = rows.into_iter().map(normalize_row).collect();
        Self { ncols, rows }
    }

    pub fn identity(n: usize) -> Self {
        Self { ncols: n, rows: (0..n).map(|i| vec![(i, 1.0)]).collect() }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// `self * other`.
    pub fn compose(&self, other: &SparseRows) -> SparseRows {
        assert_eq!(self.ncols, other.nrows());
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                for &(k, a) in row {
                    for &(j, b) in &other.rows[k] {
                        *acc.entry(j).or_insert(0.0) += a * b;
                    }
                }
                acc.into_iter().filter(|&(_, v)| v != 0.0).collect()
            })
            .collect();
        SparseRows { ncols: other.ncols, rows }
    }

    pub fn transpose(&self) -> SparseRows {
        let mut rows = vec![Vec::new(); self.ncols];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                rows[j].push((i, v));
            }
        }
        SparseRows { ncols: self.nrows(), rows }
    }

    pub fn apply<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        self.rows
            .iter()
            .map(|row| {
                let mut s = T::zero();
                for &(j, v) in row {
                    s += x[j] * v;
                }
                s
            })
            .collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows(), self.ncols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        m
    }
}

fn normalize_row(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (j, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

/// General banded matrix, LU with partial pivoting (LAPACK `gbtf2` layout).
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    factored: bool,
}

impl BandedLu {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ab: vec![0.0; ldab * n], ipiv: vec![0; n], factored: false }
    }

    #[inline]
    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        j * self.ldab() + self.kl + self.ku + i - j
    }

    /// Adds `v` at `(i, j)`; panics when the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(!self.factored);
        assert!(j <= i + self.ku && i <= j + self.kl, "entry ({i},{j}) outside band");
        let p = self.pos(i, j);
        self.ab[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i + self.ku || i > j + self.kl {
            return 0.0;
        }
        self.ab[self.pos(i, j)]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored);
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.ab[self.pos(i, j)] * x[j];
            }
        }
        y
    }

    /// In-place factorization. Returns `false` on an exactly zero pivot.
    pub fn factor(&mut self) -> bool {
        let n = self.n;
        let kl = self.kl;
        let kv = self.ku + self.kl;
        let ldab = self.ldab();
        let mut ju = 0usize;
        let mut ok = true;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let base = j * ldab + kv;
            let mut jp = 0;
            let mut best = self.ab[base].abs();
            for r in 1..=km {
                let v = self.ab[base + r].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 {
                ok = false;
                continue;
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = c * ldab + kv + j - c;
                    let b = c * ldab + kv + j + jp - c;
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[base];
            for r in 1..=km {
                self.ab[base + r] /= piv;
            }
            for c in (j + 1)..=ju {
                let ujc = self.ab[c * ldab + kv + j - c];
                if ujc == 0.0 {
                    continue;
                }
                for r in 1..=km {
                    let l = self.ab[base + r];
                    self.ab[c * ldab + kv + j + r - c] -= l * ujc;
                }
            }
        }
        self.factored = true;
        ok
    }

    pub fn solve(&self, b: &mut [f64]) {
        assert!(self.factored);
        let n = self.n;
        let kv = self.ku + self.kl;
        let ldab = self.ldab();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let bj = b[j];
            for r in 1..=km {
                b[j + r] -= self.ab[j * ldab + kv + r] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[j * ldab + kv];
            let bj = b[j];
            let lo = j.saturating_sub(kv);
            for i in lo..j {
                b[i] -= self.ab[j * ldab + kv + i - j] * bj;
            }
        }
    }
}

/// Symmetric banded matrix (lower band stored) with Cholesky factorization.
#[derive(Clone, Debug)]
pub struct BandedSpd {
    n: usize,
    b: usize,
    a: Vec<f64>,
    factored: bool,
}

impl BandedSpd {
    pub fn zeros(n: usize, b: usize) -> Self {
        Self { n, b, a: vec![0.0; n * (b + 1)], factored: false }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        i * (self.b + 1) + j + self.b - i
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(!self.factored);
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.b, "entry ({i},{j}) outside band {}", self.b);
        let p = self.pos(i, j);
        self.a[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.b {
            return 0.0;
        }
        self.a[self.pos(i, j)]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.b);
            for j in lo..i {
                let v = self.a[self.pos(i, j)];
                y[i] += v * x[j];
                y[j] += v * x[i];
            }
            y[i] += self.a[self.pos(i, i)] * x[i];
        }
        y
    }

    /// `self + s * other`, same band.
    pub fn axpy(&self, s: f64, other: &BandedSpd) -> BandedSpd {
        assert_eq!((self.n, self.b), (other.n, other.b));
        let a = self.a.iter().zip(&other.a).map(|(x, y)| x + s * y).collect();
        BandedSpd { n: self.n, b: self.b, a, factored: false }
    }

    /// Cholesky in place; `false` if the matrix is not positive definite.
    pub fn factor(&mut self) -> bool {
        let (n, b) = (self.n, self.b);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut s = self.a[self.pos(i, j)];
                let klo = lo.max(j.saturating_sub(b));
                for k in klo..j {
                    s -= self.a[self.pos(i, k)] * self.a[self.pos(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return false;
                    }
                    let p = self.pos(i, i);
                    self.a[p] = s.sqrt();
                } else {
                    let p = self.pos(i, j);
                    self.a[p] = s / self.a[self.pos(j, j)];
                }
            }
        }
        self.factored = true;
        true
    }

    pub fn solve(&self, x: &mut [f64]) {
        assert!(self.factored);
        let (n, b) = (self.n, self.b);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut s = x[i];
            for k in lo..i {
                s -= self.a[self.pos(i, k)] * x[k];
            }
            x[i] = s / self.a[self.pos(i, i)];
        }
        for i in (0..n).rev() {
            x[i] /= self.a[self.pos(i, i)];
            let xi = x[i];
            let lo = i.saturating_sub(b);
            for k in lo..i {
                x[k] -= self.a[self.pos(i, k)] * xi;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
