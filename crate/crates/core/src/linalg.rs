//! Small dense linear algebra: column-pivoted Householder QR and the solves
//! built on it. Matrices here are at most a few dozen columns wide, so the
//! straightforward O(mn²) algorithm is all that is needed.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::scalar::Scalar;

/// Relative threshold on |R_kk| / |R_00| below which a column is treated as dependent.
pub fn rank_tolerance<T: Scalar>() -> T {
    T::epsilon().sqrt() * T::lit(1e-2)
}

/// Column-pivoted Householder QR of an m×n matrix, m ≥ n.
#[derive(Debug, Clone)]
pub struct PivotedQr<T> {
    r: Array2<T>,
    reflectors: Vec<(Array1<T>, T)>,
    perm: Vec<usize>,
    rows: usize,
    cols: usize,
}

impl<T: Scalar> PivotedQr<T> {
    pub fn new(a: ArrayView2<'_, T>) -> Self {
        let (rows, cols) = a.dim();
        let mut work = a.to_owned();
        let mut perm: Vec<usize> = (0..cols).collect();
        let steps = rows.min(cols);
        let mut reflectors = Vec::with_capacity(steps);

        for k in 0..steps {
            // Pick the remaining column with the largest trailing norm.
            let mut best = k;
            let mut best_norm = T::neg_infinity();
            for j in k..cols {
                let norm: T = work.slice(s![k.., j]).iter().map(|&x| x * x).sum();
                if norm > best_norm {
                    best_norm = norm;
                    best = j;
                }
            }
            if best != k {
                for i in 0..rows {
                    work.swap((i, k), (i, best));
                }
                perm.swap(k, best);
            }

            let x = work.slice(s![k.., k]).to_owned();
            let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm == T::zero() {
                reflectors.push((Array1::zeros(rows - k), T::zero()));
                continue;
            }
            let alpha = if x[0] > T::zero() { -norm } else { norm };
            let mut v = x;
            v[0] = v[0] - alpha;
            let vtv: T = v.iter().map(|&e| e * e).sum();
            let tau = if vtv == T::zero() {
                T::zero()
            } else {
                T::lit(2.0) / vtv
            };

            for j in k..cols {
                let mut col = work.slice_mut(s![k.., j]);
                let dot: T = v.iter().zip(col.iter()).map(|(&a, &b)| a * b).sum();
                let f = tau * dot;
                col.zip_mut_with(&v, |c, &vi| *c = *c - f * vi);
            }
            work[(k, k)] = alpha;
            for i in (k + 1)..rows {
                work[(i, k)] = T::zero();
            }
            reflectors.push((v, tau));
        }

        let r = work.slice(s![..steps, ..]).to_owned();
        PivotedQr {
            r,
            reflectors,
            perm,
            rows,
            cols,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Absolute values of the diagonal of R, in pivot order (non-increasing up to rounding).
    pub fn diag_abs(&self) -> Vec<T> {
        (0..self.r.nrows()).map(|k| self.r[(k, k)].abs()).collect()
    }

    pub fn rank_with(&self, rel_tol: T) -> usize {
        let d = self.diag_abs();
        let Some(&lead) = d.first() else { return 0 };
        if lead == T::zero() {
            return 0;
        }
        d.iter().take_while(|&&x| x > rel_tol * lead).count()
    }

    pub fn rank(&self) -> usize {
        self.rank_with(rank_tolerance())
    }

    pub fn is_full_rank(&self) -> bool {
        self.rows >= self.cols && self.rank() == self.cols
    }

    fn apply_qt(&self, b: &mut Array1<T>) {
        for (k, (v, tau)) in self.reflectors.iter().enumerate() {
            let mut seg = b.slice_mut(s![k..]);
            let dot: T = v.iter().zip(seg.iter()).map(|(&a, &b)| a * b).sum();
            let f = *tau * dot;
            seg.zip_mut_with(v, |x, &vi| *x = *x - f * vi);
        }
    }

    /// Least-squares solution of `A x ≈ b`. Assumes full column rank.
    pub fn solve(&self, b: ArrayView1<'_, T>) -> Array1<T> {
        assert_eq!(b.len(), self.rows, "right-hand side length mismatch");
        let mut qtb = b.to_owned();
        self.apply_qt(&mut qtb);
        let n = self.cols;
        let mut y = Array1::<T>::zeros(n);
        for k in (0..n).rev() {
            let mut acc = qtb[k];
            for j in (k + 1)..n {
                acc = acc - self.r[(k, j)] * y[j];
            }
            y[k] = acc / self.r[(k, k)];
        }
        let mut x = Array1::<T>::zeros(n);
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    pub fn solve_matrix(&self, b: ArrayView2<'_, T>) -> Array2<T> {
        let mut out = Array2::<T>::zeros((self.cols, b.ncols()));
        for (j, col) in b.axis_iter(Axis(1)).enumerate() {
            out.column_mut(j).assign(&self.solve(col));
        }
        out
    }

    /// Inverse of a square, full-rank matrix.
    pub fn inverse(&self) -> Array2<T> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        self.solve_matrix(Array2::<T>::eye(self.rows).view())
    }
}

pub fn norm_1<T: Scalar>(a: ArrayView2<'_, T>) -> T {
    a.axis_iter(Axis(1))
        .map(|c| c.iter().map(|x| x.abs()).sum::<T>())
        .fold(T::zero(), T::max)
}

/// 1-norm condition number of a square matrix; infinite when numerically singular.
pub fn condition_number<T: Scalar>(a: ArrayView2<'_, T>) -> T {
    let qr = PivotedQr::new(a);
    if !qr.is_full_rank() {
        return T::infinity();
    }
    let inv = qr.inverse();
    let c = norm_1(a) * norm_1(inv.view());
    if c.is_finite() {
        c
    } else {
        T::infinity()
    }
}

/// Rescales rows and columns to unit max-abs entries so the condition number
/// reflects near-dependence rather than covariate units.
pub fn equilibrate<T: Scalar>(a: ArrayView2<'_, T>) -> Array2<T> {
    let mut out = a.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let m = row.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        if m > T::zero() {
            row.mapv_inplace(|x| x / m);
        }
    }
    for mut col in out.axis_iter_mut(Axis(1)) {
        let m = col.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        if m > T::zero() {
            col.mapv_inplace(|x| x / m);
        }
    }
    out
}

/// `Σ_i w_i x_i x_i'` over the rows of `x`.
pub fn weighted_gram<T: Scalar>(x: ArrayView2<'_, T>, w: ArrayView1<'_, T>) -> Array2<T> {
    let scaled = &x * &w.insert_axis(Axis(1));
    scaled.t().dot(&x)
}
