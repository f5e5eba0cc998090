//! Small dense-band linear solvers.

use crate::error::{Error, Result};
use crate::num::Real;

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Storage leaves room for the `kl` extra super-diagonals produced by row
/// interchanges, so [`BandedMatrix::solve`] pivots without reallocating.
#[derive(Clone, Debug)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku, "({i}, {j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` to entry `(i, j)`; the entry must lie inside the declared band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    /// Gaussian elimination with partial pivoting; consumes the matrix.
    pub fn solve(mut self, mut rhs: Vec<T>) -> Result<Vec<T>> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::InvalidInput(format!(
                "right-hand side has length {}, expected {n}",
                rhs.len()
            )));
        }
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);

            let mut pivot = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::SingularSystem(k));
            }
            if pivot != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(pivot, j));
                    self.data.swap(a, b);
                }
                rhs.swap(k, pivot);
            }

            let diag = self.data[self.idx(k, k)];
            let row_k = self.idx(k, k);
            for r in k + 1..=last_row {
                let rk = self.idx(r, k);
                let factor = self.data[rk] / diag;
                if factor == T::zero() {
                    continue;
                }
                self.data[rk] = T::zero();
                let row_r = self.idx(r, k);
                for off in 1..=(last_col - k) {
                    let v = self.data[row_k + off];
                    if v != T::zero() {
                        self.data[row_r + off] = self.data[row_r + off] - factor * v;
                    }
                }
                rhs[r] = rhs[r] - factor * rhs[k];
            }
        }

        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let row_k = self.idx(k, k);
            let mut acc = rhs[k];
            for off in 1..=(last_col - k) {
                acc = acc - self.data[row_k + off] * rhs[k + off];
            }
            rhs[k] = acc / self.data[row_k];
        }
        Ok(rhs)
    }
}

/// Thomas algorithm for a tridiagonal system.
///
/// `lower[i]` multiplies `x[i]` in row `i + 1`, `upper[i]` multiplies `x[i + 1]` in row `i`.
/// No pivoting: intended for diagonally dominant systems.
pub fn solve_tridiagonal<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if n == 0 || lower.len() + 1 != n || upper.len() + 1 != n || rhs.len() != n {
        return Err(Error::InvalidInput("inconsistent tridiagonal dimensions".into()));
    }
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut denom = diag[0];
    if denom == T::zero() {
        return Err(Error::SingularSystem(0));
    }
    if n > 1 {
        c[0] = upper[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i - 1] * c[i - 1];
        if denom == T::zero() {
            return Err(Error::SingularSystem(i));
        }
        if i + 1 < n {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - c[i] * d[i + 1];
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(a, x)| a * x).sum()).collect()
    }

    #[test]
    fn needs_pivoting() {
        // zero leading diagonal forces a row swap
        let mut m = BandedMatrix::zeros(3, 1, 1);
        let dense = [[0.0, 2.0, 0.0], [1.0, 1.0, 1.0], [0.0, 3.0, 4.0]];
        for i in 0..3 {
            for j in 0..3 {
                if dense[i][j] != 0.0 {
                    m.add(i, j, dense[i][j]);
                }
            }
        }
        let x: Vec<f64> = m.solve(vec![2.0, 3.0, 7.0]).unwrap();
        for (xi, ei) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((xi - ei).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let mut m = BandedMatrix::<f64>::zeros(2, 1, 1);
        m.add(0, 0, 1.0);
        m.add(0, 1, 1.0);
        m.add(1, 0, 1.0);
        m.add(1, 1, 1.0);
        assert!(matches!(m.solve(vec![1.0, 2.0]), Err(Error::SingularSystem(1))));
    }

    #[test]
    fn tridiagonal_small() {
        let x: Vec<f64> = solve_tridiagonal(&[-1.0, -1.0], &[2.0, 2.0, 2.0], &[-1.0, -1.0], &[1.0, 0.0, 1.0]).unwrap();
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn banded_matches_residual(n in 3usize..40, kl in 0usize..4, ku in 0usize..4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut dense = vec![vec![0.0; n]; n];
            let mut m = BandedMatrix::zeros(n, kl, ku);
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let mut v: f64 = rng.random_range(-1.0..1.0);
                    if i == j { v += (kl + ku + 1) as f64 * v.signum(); }
                    dense[i][j] = v;
                    m.add(i, j, v);
                }
            }
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.5).collect();
            let b = dense_mul(&dense, &x_true);
            if let Ok(x) = m.solve(b) {
                for (a, e) in x.iter().zip(&x_true) {
                    prop_assert!((a - e).abs() < 1e-8 * (1.0 + e.abs()), "{a} vs {e}");
                }
            }
        }
    }
}
