use crate::error::{Error, Result};
use crate::num::Real;

/// Discrete-ordinate directions on [-1, 1], sorted ascending, with weights summing to 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature<T> {
    mu: Vec<T>,
    w: Vec<T>,
}

impl<T: Real> Quadrature<T> {
    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Index of the first direction with positive cosine.
    pub fn first_positive(&self) -> usize {
        self.mu.partition_point(|&m| m < T::zero())
    }

    /// `Σ w μ^k`.
    pub fn moment(&self, k: i32) -> T {
        self.mu
            .iter()
            .zip(&self.w)
            .map(|(&m, &w)| w * m.powi(k))
            .sum()
    }

    /// `Σ w f` for per-direction values.
    #[inline]
    pub fn integrate(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.w.len());
        let mut acc = T::zero();
        for (&w, &v) in self.w.iter().zip(values) {
            acc = acc + w * v;
        }
        acc
    }
}

/// Evaluates `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    let mut p_prev = T::one();
    let mut p = x;
    for k in 2..=n {
        let kf = T::lit(k as f64);
        let next = ((T::lit(2.0) * kf - T::one()) * x * p - (kf - T::one()) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let nf = T::lit(n as f64);
    let dp = nf * (x * p - p_prev) / (x * x - T::one());
    (p, dp)
}

/// Nodes (ascending) and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration from the Tricomi-style initial guess, for any `n >= 1`.
pub fn legendre_rule<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let tol = T::lit(4.0) * T::epsilon();
    let half = n.div_ceil(2);
    for i in 0..half {
        let guess = std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5);
        let mut x = T::lit(guess.cos());
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= tol {
                let (_, d) = legendre(n, x);
                dp = d;
                break;
            }
        }
        // Odd rules have a node exactly at the origin.
        if n % 2 == 1 && i == half - 1 {
            x = T::zero();
            dp = legendre(n, x).1;
        }
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped onto `(a, b)`.
pub fn legendre_rule_on<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let (x, w) = legendre_rule::<T>(n);
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    (
        x.into_iter().map(|xi| mid + half * xi).collect(),
        w.into_iter().map(|wi| wi * half).collect(),
    )
}

/// S_N quadrature: the `n`-point Gauss-Legendre set, `n` even in `2..=128`.
pub fn gauss_legendre<T: Real>(n: usize) -> Result<Quadrature<T>> {
    if !(2..=128).contains(&n) || !n.is_multiple_of(2) {
        return Err(Error::QuadratureOrder(n));
    }
    let (mu, w) = legendre_rule(n);
    Ok(Quadrature { mu, w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn two_point_rule() {
        let q = gauss_legendre::<f64>(2).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert_relative_eq!(q.mu()[0], -r, epsilon = 1e-15);
        assert_relative_eq!(q.mu()[1], r, epsilon = 1e-15);
        assert_relative_eq!(q.weights()[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(q.weights()[1], 1.0, epsilon = 1e-15);
        assert!(legendre(2, q.mu()[1]).0.abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_orders() {
        for n in [0, 1, 3, 17, 130] {
            assert!(matches!(gauss_legendre::<f64>(n), Err(Error::QuadratureOrder(_))));
        }
    }

    #[test]
    fn s16_moments() {
        let q = gauss_legendre::<f64>(16).unwrap();
        assert_relative_eq!(q.moment(0), 2.0, epsilon = 1e-14);
        assert_relative_eq!(q.moment(2), 2.0 / 3.0, epsilon = 1e-14);
        assert!((q.moment(4) - 0.4).abs() < 1e-13);
        // exact through degree 31
        assert!((q.moment(30) - 2.0 / 31.0).abs() < 1e-13);
        assert_eq!(q.first_positive(), 8);
    }

    #[test]
    fn nodes_are_roots() {
        for n in [2usize, 4, 8, 16, 32, 64, 128] {
            let q = gauss_legendre::<f64>(n).unwrap();
            for &m in q.mu() {
                let (p, dp) = legendre(n, m);
                assert!(p.abs() < 1e-14 * dp.abs().max(1.0), "n={n} mu={m} p={p}");
            }
            assert!(q.mu().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn single_precision_rule() {
        let q = gauss_legendre::<f32>(16).unwrap();
        assert!((q.moment(0) - 2.0).abs() < 1e-5);
        assert!((q.moment(2) - 2.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn odd_rule_on_interval() {
        let (x, w) = legendre_rule_on::<f64>(5, 0.0, 1.0);
        assert_relative_eq!(x[2], 0.5, epsilon = 1e-15);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(integral, 1.0 / 9.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn invariants_hold_for_every_even_order(half in 1usize..=64) {
            let n = 2 * half;
            let q = gauss_legendre::<f64>(n).unwrap();
            prop_assert!((q.moment(0) - 2.0).abs() < 1e-12);
            for i in 0..n {
                prop_assert_eq!(q.mu()[i], -q.mu()[n - 1 - i]);
                prop_assert_eq!(q.weights()[i], q.weights()[n - 1 - i]);
                prop_assert!(q.weights()[i] > 0.0);
                prop_assert!(q.mu()[i] != 0.0 && q.mu()[i].abs() < 1.0);
            }
            if n >= 4 {
                prop_assert!((q.moment(2) - 2.0 / 3.0).abs() < 1e-12);
            }
        }
    }
}
