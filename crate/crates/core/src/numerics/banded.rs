//! Banded LU factorization with partial pivoting.
//!
//! Rows are stored densely over columns `i - kl ..= i + ku + kl`; the extra
//! `kl` upper diagonals absorb fill from row interchanges.

use super::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    pub row: usize,
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self, SingularPivot> {
        assert_eq!(a.nrows(), a.ncols(), "banded LU needs a square matrix");
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut data = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                data[i * width + (j + kl - i)] += v;
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data,
            piv: vec![0; n],
        };
        lu.eliminate(scale)?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self, scale: f64) -> Result<(), SingularPivot> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + self.kl;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.piv[k] = p;
            if best <= 1e-14 * scale {
                return Err(SingularPivot { row: k });
            }
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            let row_k = self.idx(k, k);
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                let len = last_col - k;
                // rows k and i are both contiguous over columns k+1..=last_col
                let (head, tail) = self.data.split_at_mut(ik);
                let src = &head[row_k + 1..row_k + 1 + len];
                for (t, s) in tail[1..1 + len].iter_mut().zip(src) {
                    *t -= l * s;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Overwrite `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.data[self.idx(i, k)] * bk;
                }
            }
        }
        let reach = self.ku + self.kl;
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
    }

    /// Overwrite `b` with `A^{-T} b`.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let reach = self.ku + self.kl;
        // U^T y = b
        for k in 0..n {
            let yk = b[k] / self.data[self.idx(k, k)];
            b[k] = yk;
            if yk != 0.0 {
                for j in k + 1..=(k + reach).min(n - 1) {
                    b[j] -= self.data[self.idx(k, j)] * yk;
                }
            }
        }
        // L^T and the row interchanges, in reverse
        for k in (0..n).rev() {
            let mut s = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                s -= self.data[self.idx(i, k)] * b[i];
            }
            b[k] = s;
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_transpose_in_place(&mut x);
        x
    }
}
