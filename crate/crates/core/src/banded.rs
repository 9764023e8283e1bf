//! Band matrices and a partially pivoted band LU.
//!
//! The scheme's Jacobian, with node-major `(U, V, R)` ordering and the
//! boundary rows placed at the first and last node, has two sub-diagonals
//! and three super-diagonals regardless of `N`, so every linear solve in the
//! Newton and Levenberg-Marquardt iterations is `O(N)`.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored row-wise:
/// row `i` keeps columns `i - kl ..= i + ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.offset(i, j)]
        } else {
            0.0
        }
    }

    /// Sets entry `(i, j)`. Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.offset(i, j);
        self.data[k] = value;
    }

    /// Mutable access to the stored bands of all rows as one flat slice.
    pub(crate) fn rows_mut(&mut self) -> (&mut [f64], usize) {
        let w = self.width();
        (&mut self.data, w)
    }

    /// Column range stored for row `i`, clipped to the matrix.
    #[inline]
    fn row_cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row_cols(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `y = Aᵀ x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in self.row_cols(i) {
                y[j] += self.get(i, j) * x[i];
            }
        }
        y
    }

    /// `AᵀA`, a symmetric band matrix with half-bandwidth `kl + ku`.
    pub fn gram(&self) -> BandMatrix {
        let hb = self.kl + self.ku;
        let mut out = BandMatrix::zeros(self.n, hb, hb);
        for i in 0..self.n {
            let cols = self.row_cols(i);
            for j in cols.clone() {
                let aij = self.get(i, j);
                if aij == 0.0 {
                    continue;
                }
                for k in cols.clone() {
                    let k_off = out.offset(j, k);
                    out.data[k_off] += aij * self.get(i, k);
                }
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn add_to_diagonal(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.n);
        for (i, di) in d.iter().enumerate() {
            let k = self.offset(i, i);
            self.data[k] += di;
        }
    }

    /// Max-abs of any stored entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Dense row-major copy, mostly for tests and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Band LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }
}

/// `PA = LU` for a band matrix. Row interchanges widen the upper band of
/// `U` to `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// Upper bandwidth of U (`kl + ku`).
    ku: usize,
    /// Row `i` stores columns `i - kl ..= i + ku` (multipliers below the
    /// diagonal, U on and above it).
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    fn factor(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.kl + a.ku;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
            piv: vec![0; n],
        };
        for i in 0..n {
            for j in a.row_cols(i) {
                let k = lu.at(i, j);
                lu.data[k] = a.get(i, j);
            }
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = lu.data[lu.at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            lu.piv[k] = p;
            let last_col = (k + ku).min(n - 1);
            if p != k {
                // row p's entries extend at most to p + a.ku <= k + ku
                for j in k..=last_col {
                    let (x, y) = (lu.at(k, j), lu.at(p, j));
                    lu.data.swap(x, y);
                }
            }
            let pivot = lu.data[lu.at(k, k)];
            for i in k + 1..=last_row {
                let ik = lu.at(i, k);
                let m = lu.data[ik] / pivot;
                lu.data[ik] = m;
                if m == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let kj = lu.data[lu.at(k, j)];
                    let ij = lu.at(i, j);
                    lu.data[ij] -= m * kj;
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.data[self.at(i, k)] * xk;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + self.ku).min(n - 1) {
                s -= self.data[self.at(i, j)] * x[j];
            }
            x[i] = s / self.data[self.at(i, i)];
        }
        x
    }
}
