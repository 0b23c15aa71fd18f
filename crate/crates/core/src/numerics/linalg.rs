use crate::error::{Error, Result};

/// Pivots below `-NEG_PIVOT_TOL * max diagonal` are rejected.
const NEG_PIVOT_TOL: f64 = 1e-6;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has length {} in a {n}x{n} matrix",
                    row.len()
                )));
            }
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Sets (i,j) and (j,i).
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.set(i, j, v);
        self.set(j, i, v);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            (0..i).all(|j| {
                let (a, b) = (self.get(i, j), self.get(j, i));
                (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
            })
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// L Lᵀ for `self = L`.
    pub fn mul_transpose_self(&self) -> SquareMatrix {
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                out.set_sym(i, j, s);
            }
        }
        out
    }

    /// `out = self · z`.
    #[inline]
    pub fn mul_vec(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert!(z.len() >= n && out.len() >= n);
        for (i, o) in out[..n].iter_mut().enumerate() {
            *o = self.row(i).iter().zip(&z[..n]).map(|(a, b)| a * b).sum();
        }
    }
}

/// Factor `B` with `B Bᵀ ≈ S` of a symmetric, nearly positive semidefinite
/// matrix, by Cholesky with diagonal pivoting.
///
/// Gram matrices of exponentials with nearby rates are numerically rank
/// deficient; without pivoting, rounding in the tiny trailing pivots is
/// amplified row after row. Here the largest remaining pivot is always taken
/// first and elimination stops once every remaining pivot is below
/// `n ε · max diag`, which leaves the unresolved directions at zero variance.
/// `B` is the row-permuted lower factor, so it is lower triangular only when
/// no interchange was needed. A remaining pivot below `-1e-6 · max diag` is
/// reported as [`Error::NotPsd`].
pub fn psd_factorize(s: &SquareMatrix) -> Result<SquareMatrix> {
    let n = s.dim();
    let max_diag = (0..n).map(|i| s.get(i, i)).fold(0.0f64, f64::max);
    let floor = n as f64 * f64::EPSILON * max_diag;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut pivots: Vec<f64> = (0..n).map(|i| s.get(i, i)).collect();
    // lower factor in pivoted order
    let mut l = SquareMatrix::zeros(n);
    for j in 0..n {
        let (worst, &lowest) = pivots[j..]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty remainder");
        if lowest < -NEG_PIVOT_TOL * max_diag {
            return Err(Error::NotPsd {
                pivot: lowest,
                row: perm[j + worst],
            });
        }
        // first maximal entry, so ties keep the natural order
        let mut q = j;
        for i in j + 1..n {
            if pivots[i] > pivots[q] {
                q = i;
            }
        }
        let d = pivots[q];
        if d <= floor {
            break;
        }
        perm.swap(j, q);
        pivots.swap(j, q);
        for c in 0..j {
            let (a, b) = (l.get(j, c), l.get(q, c));
            l.set(j, c, b);
            l.set(q, c, a);
        }
        let ljj = d.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let dot: f64 = l.row(i)[..j]
                .iter()
                .zip(&l.row(j)[..j])
                .map(|(a, b)| a * b)
                .sum();
            let v = (s.get(perm[i], perm[j]) - dot) / ljj;
            l.set(i, j, v);
            pivots[i] -= v * v;
        }
    }
    let mut b = SquareMatrix::zeros(n);
    for (i, &p) in perm.iter().enumerate() {
        for c in 0..n {
            b.set(p, c, l.get(i, c));
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor() {
        let l = psd_factorize(&SquareMatrix::identity(3)).unwrap();
        assert_eq!(l, SquareMatrix::identity(3));
    }

    #[test]
    fn hand_checked_2x2() {
        let s = SquareMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 2.0]]).unwrap();
        let l = psd_factorize(&s).unwrap();
        assert_eq!(
            l,
            SquareMatrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]).unwrap()
        );
    }

    #[test]
    fn rank_deficient_is_clipped() {
        // rank one: v vᵀ with v = (1, 2, 3)
        let v = [1.0, 2.0, 3.0];
        let rows: Vec<Vec<f64>> = v
            .iter()
            .map(|a| v.iter().map(|b| a * b).collect())
            .collect();
        let s = SquareMatrix::from_rows(&rows).unwrap();
        let l = psd_factorize(&s).unwrap();
        assert_eq!(l.get(1, 1), 0.0);
        assert_eq!(l.get(2, 2), 0.0);
        let mut diff = l.mul_transpose_self();
        for i in 0..3 {
            for j in 0..3 {
                diff.set(i, j, diff.get(i, j) - s.get(i, j));
            }
        }
        assert!(diff.frobenius_norm() <= 1e-12 * s.frobenius_norm());
    }

    #[test]
    fn indefinite_rejected() {
        let s = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            psd_factorize(&s),
            Err(Error::NotPsd { row: 1, .. })
        ));
    }

    #[test]
    fn mul_vec_matches_hand_product() {
        let l = SquareMatrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 3.0]]).unwrap();
        let mut out = [0.0; 2];
        l.mul_vec(&[1.0, -1.0], &mut out);
        assert_eq!(out, [2.0, -2.0]);
    }
}
