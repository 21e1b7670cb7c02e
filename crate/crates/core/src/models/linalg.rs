//! Row-major dense matrices with the handful of products the models need.

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · rhs` where `rhs` is a `self.cols × n` row-major slice.
    pub fn matmul(&self, rhs: &[f64], n: usize) -> Matrix {
        debug_assert_eq!(rhs.len(), self.cols * n);
        let mut out = Matrix::zeros(self.rows, n);
        for i in 0..self.rows {
            let o = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (dst, &b) in o.iter_mut().zip(&rhs[k * n..(k + 1) * n]) {
                    *dst += a * b;
                }
            }
        }
        out
    }

    /// `self · rhsᵀ` where `rhs` is `n × self.cols` row-major.
    pub fn matmul_t(&self, rhs: &[f64], n: usize) -> Matrix {
        debug_assert_eq!(rhs.len(), self.cols * n);
        let k = self.cols;
        let mut out = Matrix::zeros(self.rows, n);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..n {
                out.data[i * n + j] = dot(a, &rhs[j * k..(j + 1) * k]);
            }
        }
        out
    }

    /// Accumulates `selfᵀ · rhs` into `acc` (`self.cols × rhs.cols`).
    pub fn add_t_matmul_into(&self, rhs: &Matrix, acc: &mut [f64]) {
        debug_assert_eq!(self.rows, rhs.rows);
        debug_assert_eq!(acc.len(), self.cols * rhs.cols);
        let n = rhs.cols;
        for r in 0..self.rows {
            let b = rhs.row(r);
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (dst, &bv) in acc[k * n..(k + 1) * n].iter_mut().zip(b) {
                    *dst += a * bv;
                }
            }
        }
    }

    pub fn add_row_vector(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for r in 0..self.rows {
            for (x, b) in self.row_mut(r).iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    /// Accumulates the column sums into `acc`.
    pub fn add_col_sums_into(&self, acc: &mut [f64]) {
        for r in 0..self.rows {
            for (a, x) in acc.iter_mut().zip(self.row(r)) {
                *a += x;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Rows permuted so that `out.row(i) == self.row(perm[i])`.
    pub fn permute_rows(&self, perm: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for (i, &p) in perm.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(p));
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `v · W` for a `v.len() × n` matrix `w`.
pub fn vec_matmul(v: &[f64], w: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(w.len(), v.len() * n);
    let mut out = vec![0.0; n];
    for (k, &a) in v.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, &b) in out.iter_mut().zip(&w[k * n..(k + 1) * n]) {
            *o += a * b;
        }
    }
    out
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_naive() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = vec![1.0, 0.0, -1.0, 2.0, 0.5, 1.0];
        let c = a.matmul(&b, 2);
        assert_eq!(c.data, vec![1.0 - 2.0 + 1.5, 4.0 + 3.0, 4.0 - 5.0 + 3.0, 10.0 + 6.0]);
        let bt = Matrix::from_vec(2, 3, vec![1.0, -1.0, 0.5, 0.0, 2.0, 1.0]);
        assert_eq!(a.matmul_t(&bt.data, 2).data, c.data);
        let mut acc = vec![0.0; 9];
        a.add_t_matmul_into(&a, &mut acc);
        assert_eq!(acc[0], 1.0 + 16.0);
        assert_eq!(acc[5], 2.0 * 3.0 + 5.0 * 6.0);
        assert_eq!(vec_matmul(&[1.0, 1.0], &a.data, 3), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, -1000.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        let u = softmax(&[3.0, 3.0, 3.0]);
        assert!(u.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }
}
