//! Householder QR with column pivoting.
//!
//! Used for every least-squares and square solve in the crate. Rank is the
//! number of leading diagonal entries of `R` whose magnitude exceeds
//! [`RANK_TOL`] times `|R[0,0]|`.

use nalgebra::{DMatrix, DVector};

/// Relative pivot threshold below which a column is treated as dependent.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// `R` on and above the diagonal, Householder vectors (unit leading
    /// entry implied) below it.
    qr: DMatrix<f64>,
    coeffs: Vec<f64>,
    /// `perm[k]` is the original column stored at position `k`.
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn new(mut a: DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let steps = m.min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut coeffs = vec![0.0; steps];
        let mut norms: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();

        for k in 0..steps {
            let mut best = k;
            for j in k + 1..n {
                if norms[j] > norms[best] {
                    best = j;
                }
            }
            if best != k {
                a.swap_columns(k, best);
                perm.swap(k, best);
                norms.swap(k, best);
            }

            let alpha = a.view((k, k), (m - k, 1)).norm();
            if alpha == 0.0 {
                coeffs[k] = 0.0;
                continue;
            }
            let x0 = a[(k, k)];
            let r = if x0 >= 0.0 { -alpha } else { alpha };
            let v0 = x0 - r;
            let mut vnorm2 = 1.0;
            for i in k + 1..m {
                a[(i, k)] /= v0;
                vnorm2 += a[(i, k)] * a[(i, k)];
            }
            let beta = 2.0 / vnorm2;
            coeffs[k] = beta;
            a[(k, k)] = r;

            for j in k + 1..n {
                let mut s = a[(k, j)];
                for i in k + 1..m {
                    s += a[(i, k)] * a[(i, j)];
                }
                s *= beta;
                a[(k, j)] -= s;
                for i in k + 1..m {
                    let vi = a[(i, k)];
                    a[(i, j)] -= s * vi;
                }
                // trailing norms are recomputed exactly; the columns are few
                norms[j] = a.view((k + 1, j), (m - k - 1, 1)).norm_squared();
            }
        }

        let r00 = if steps > 0 { a[(0, 0)].abs() } else { 0.0 };
        let rank = if r00 == 0.0 || !r00.is_finite() {
            0
        } else {
            (0..steps)
                .take_while(|&k| {
                    let d = a[(k, k)].abs();
                    d.is_finite() && d > RANK_TOL * r00
                })
                .count()
        };
        Self {
            qr: a,
            coeffs,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ncols(&self) -> usize {
        self.qr.ncols()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.qr.ncols()
    }

    /// Least-squares solution of `A x ≈ b`; `None` unless `A` has full column rank.
    pub fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        let (m, n) = self.qr.shape();
        assert_eq!(b.len(), m, "right-hand side length");
        if !self.is_full_rank() {
            return None;
        }
        let mut qtb = b.clone();
        for k in 0..m.min(n) {
            let beta = self.coeffs[k];
            if beta == 0.0 {
                continue;
            }
            let mut s = qtb[k];
            for i in k + 1..m {
                s += self.qr[(i, k)] * qtb[i];
            }
            s *= beta;
            qtb[k] -= s;
            for i in k + 1..m {
                qtb[i] -= s * self.qr[(i, k)];
            }
        }
        let mut y = DVector::zeros(n);
        for k in (0..n).rev() {
            let mut s = qtb[k];
            for j in k + 1..n {
                s -= self.qr[(k, j)] * y[j];
            }
            y[k] = s / self.qr[(k, k)];
        }
        let mut x = DVector::zeros(n);
        for (k, &col) in self.perm.iter().enumerate() {
            x[col] = y[k];
        }
        Some(x)
    }
}

/// Rank of `a` under the crate-wide pivot threshold.
pub fn rank(a: &DMatrix<f64>) -> usize {
    PivotedQr::new(a.clone()).rank()
}
