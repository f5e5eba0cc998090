//! Asymptotic diffusion limits with extrapolated-endpoint boundary conditions.
//!
//! All three limits share `-D Φ'' + <Σa> Φ = <Q>` on `(-X-d, X+d)` with
//! `Φ(±(X+d)) = 0`, `D = β/(3<Σt>)` and `d = 2D`. Atomic mix and the adjusted
//! model have β = 1; the standard LP model has β > 1 whenever Σt1 ≠ Σt2.

use std::fmt::Write as _;

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::mixing::{volume_average, AveragedSpec, MaterialSpec, MixingStats};
use crate::num::Real;
use crate::sn::{fmt17, legendre_rule_on, FluxField, ModelTag};

fn check_materials<T: Real>(m1: &MaterialSpec<T>, m2: &MaterialSpec<T>) -> Result<()> {
    if m1.sigma_t == T::zero() && m2.sigma_t == T::zero() {
        return Err(Error::InvalidInput("both materials are void".into()));
    }
    Ok(())
}

/// Angular weight whose `3μ²` moment gives β.
pub fn alpha<T: Real>(mu: T, m1: &MaterialSpec<T>, m2: &MaterialSpec<T>, stats: &MixingStats<T>, eta: T) -> Result<T> {
    check_materials(m1, m2)?;
    if !(mu > T::zero() && mu <= T::one()) {
        return Err(Error::InvalidInput(format!("alpha needs mu in (0, 1], got {mu}")));
    }
    let (l1, l2) = (stats.lambda1(), stats.lambda2());
    let (p1, p2) = stats.volume_fractions();
    let (t1, t2) = (m1.sigma_t, m2.sigma_t);
    let mean_t = p1 * t1 + p2 * t2;
    let streaming = eta * (l1 * t1 + l2 * t2) * mu;
    let num = l1 * l2 * mean_t * (p1 * t2 + p2 * t1) + streaming;
    let den = l1 * l2 * t1 * t2 + streaming;
    if den == T::zero() {
        return Err(Error::InvalidInput("alpha denominator vanishes".into()));
    }
    Ok(num / den)
}

/// `β = ∫_0^1 3μ² α(μ) dμ`, by Gauss-Legendre with node doubling until the change is below 1e-10.
pub fn beta<T: Real>(m1: &MaterialSpec<T>, m2: &MaterialSpec<T>, stats: &MixingStats<T>, eta: T) -> Result<T> {
    check_materials(m1, m2)?;
    if !(eta > T::zero()) {
        return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
    }
    let integrate = |n: usize| -> Result<T> {
        let (x, w) = legendre_rule_on(n, T::zero(), T::one());
        let mut acc = T::zero();
        for (&mu, &wi) in x.iter().zip(&w) {
            acc = acc + wi * T::lit(3.0) * mu * mu * alpha(mu, m1, m2, stats, eta)?;
        }
        Ok(acc)
    };
    let tol = T::lit(1e-10).max(T::lit(16.0) * T::epsilon());
    let mut n = 8;
    let mut prev = integrate(n)?;
    while n < 8192 {
        n *= 2;
        let next = integrate(n)?;
        if (next - prev).abs() < tol {
            return Ok(next);
        }
        prev = next;
    }
    warn!("beta quadrature not settled at {n} nodes");
    Ok(prev)
}

/// `-D Φ'' + σa Φ = q` on `[-(X+d), X+d]` with zero endpoint values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionProblem<T> {
    pub diffusion_coefficient: T,
    pub sigma_a: T,
    pub q: T,
    pub half_width: T,
    pub extrapolation: T,
    pub beta: T,
    pub tag: ModelTag,
}

impl<T: Real> DiffusionProblem<T> {
    /// Diffusion problem with coefficient `β/(3<Σt>)` and extrapolation distance `2β/(3<Σt>)`.
    pub fn with_beta(avg: &AveragedSpec<T>, half_width: T, beta: T, tag: ModelTag) -> Result<Self> {
        if !(avg.sigma_t > T::zero()) {
            return Err(Error::InvalidInput("volume-averaged sigma_t must be positive".into()));
        }
        if !(beta > T::zero()) || !(half_width > T::zero()) {
            return Err(Error::InvalidInput(format!("beta {beta} and half width {half_width} must be positive")));
        }
        let d = beta / (T::lit(3.0) * avg.sigma_t);
        Ok(Self {
            diffusion_coefficient: d,
            sigma_a: avg.sigma_a,
            q: avg.q,
            half_width,
            extrapolation: T::lit(2.0) * d,
            beta,
            tag,
        })
    }

    pub fn atomic_mix(avg: &AveragedSpec<T>, half_width: T) -> Result<Self> {
        Self::with_beta(avg, half_width, T::one(), ModelTag::DiffusionAm)
    }

    /// The adjusted model's limit: same operator as atomic mix.
    pub fn adjusted(avg: &AveragedSpec<T>, half_width: T) -> Result<Self> {
        Self::with_beta(avg, half_width, T::one(), ModelTag::DiffusionAlp)
    }

    /// Standard LP limit, β evaluated at η = 1.
    pub fn standard_lp(m1: &MaterialSpec<T>, m2: &MaterialSpec<T>, stats: &MixingStats<T>, half_width: T) -> Result<Self> {
        let b = beta(m1, m2, stats, T::one())?;
        Self::with_beta(&volume_average(m1, m2, stats), half_width, b, ModelTag::DiffusionLp)
    }

    /// Half-length of the extended domain, `X + d`.
    pub fn extended_half_width(&self) -> T {
        self.half_width + self.extrapolation
    }

    pub fn kappa(&self) -> T {
        (self.sigma_a / self.diffusion_coefficient).sqrt()
    }

    /// Plain-text audit of the coefficients.
    pub fn coefficients_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model_tag={}", self.tag);
        let _ = writeln!(s, "beta={}", fmt17(self.beta));
        let _ = writeln!(s, "diffusion_coefficient={}", fmt17(self.diffusion_coefficient));
        let _ = writeln!(s, "kappa={}", fmt17(self.kappa()));
        let _ = writeln!(s, "extrapolation_distance={}", fmt17(self.extrapolation));
        let _ = writeln!(s, "sigma_a={}", fmt17(self.sigma_a));
        let _ = writeln!(s, "q={}", fmt17(self.q));
        let _ = writeln!(s, "half_width={}", fmt17(self.half_width));
        s
    }
}

/// Closed-form solution `Φ(x) = (q/σa) [1 - cosh(κx)/cosh(κ(X+d))]`.
#[derive(Clone, Copy, Debug)]
pub struct AnalyticDiffusion<T> {
    pub problem: DiffusionProblem<T>,
    pub kappa: T,
}

impl<T: Real> AnalyticDiffusion<T> {
    /// `cosh(κx)/cosh(κL)` without overflow for large κL.
    fn cosh_ratio(&self, x: T) -> T {
        let l = self.problem.extended_half_width();
        let ax = x.abs();
        let two = T::lit(2.0);
        (self.kappa * (ax - l)).exp() * (T::one() + (-two * self.kappa * ax).exp()) / (T::one() + (-two * self.kappa * l).exp())
    }

    pub fn value(&self, x: T) -> T {
        self.problem.q / self.problem.sigma_a * (T::one() - self.cosh_ratio(x))
    }

    pub fn second_derivative(&self, x: T) -> T {
        -self.problem.q / self.problem.sigma_a * self.kappa * self.kappa * self.cosh_ratio(x)
    }

    /// `-D Φ'' + σa Φ - q` at `x`.
    pub fn residual(&self, x: T) -> T {
        let p = &self.problem;
        -p.diffusion_coefficient * self.second_derivative(x) + p.sigma_a * self.value(x) - p.q
    }

    pub fn value_at_origin(&self) -> T {
        self.value(T::zero())
    }

    /// Point values at the centres of the given cells.
    pub fn sample(&self, edges: &[T]) -> FluxField<T> {
        let scalar_flux = edges
            .windows(2)
            .map(|e| self.value((e[0] + e[1]) / T::lit(2.0)))
            .collect();
        FluxField {
            edges: edges.to_vec(),
            scalar_flux,
            angular_flux: None,
            n_directions: 0,
            tag: self.problem.tag,
            iterations: 0,
            residual: T::zero(),
            negative_flux_count: 0,
            outflow: (T::zero(), T::zero()),
        }
    }
}

pub fn solve_diffusion_analytic<T: Real>(p: &DiffusionProblem<T>) -> Result<AnalyticDiffusion<T>> {
    if !(p.sigma_a > T::zero()) {
        return Err(Error::InvalidInput(
            "analytic diffusion solution needs positive absorption".into(),
        ));
    }
    Ok(AnalyticDiffusion {
        problem: *p,
        kappa: p.kappa(),
    })
}

/// Finite-difference solution on uniform nodes, endpoints included.
#[derive(Clone, Debug)]
pub struct FdSolution<T> {
    pub nodes: Vec<T>,
    pub values: Vec<T>,
    pub tag: ModelTag,
}

impl<T: Real> FdSolution<T> {
    /// Interior nodes as centres of their dual cells.
    pub fn to_flux_field(&self) -> FluxField<T> {
        let n = self.nodes.len();
        let h = self.nodes[1] - self.nodes[0];
        let half = h / T::lit(2.0);
        let mut edges: Vec<T> = self.nodes[1..n - 1].iter().map(|&x| x - half).collect();
        edges.push(self.nodes[n - 2] + half);
        FluxField {
            edges,
            scalar_flux: self.values[1..n - 1].to_vec(),
            angular_flux: None,
            n_directions: 0,
            tag: self.tag,
            iterations: 0,
            residual: T::zero(),
            negative_flux_count: 0,
            outflow: (T::zero(), T::zero()),
        }
    }

    pub fn value_at_origin(&self) -> T {
        let k = self.nodes.partition_point(|&x| x < T::zero());
        if self.nodes[k] == T::zero() || k == 0 {
            self.values[k]
        } else {
            (self.values[k - 1] + self.values[k]) / T::lit(2.0)
        }
    }
}

/// Second-order central differences on `n_cells` uniform intervals, solved by the Thomas algorithm.
pub fn solve_diffusion_fd<T: Real>(p: &DiffusionProblem<T>, n_cells: usize) -> Result<FdSolution<T>> {
    if n_cells < 10 {
        return Err(Error::InvalidInput(format!("need at least 10 cells, got {n_cells}")));
    }
    let l = p.extended_half_width();
    let h = T::lit(2.0) * l / T::lit(n_cells as f64);
    let nodes: Vec<T> = (0..=n_cells)
        .map(|j| {
            if j == n_cells {
                l
            } else if 2 * j == n_cells {
                T::zero()
            } else {
                -l + h * T::lit(j as f64)
            }
        })
        .collect();
    let interior = n_cells - 1;
    let off = -p.diffusion_coefficient / (h * h);
    let diag = vec![T::lit(2.0) * p.diffusion_coefficient / (h * h) + p.sigma_a; interior];
    let lower = vec![off; interior - 1];
    let upper = vec![off; interior - 1];
    let rhs = vec![p.q; interior];
    let inner = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut values = Vec::with_capacity(n_cells + 1);
    values.push(T::zero());
    values.extend(inner);
    values.push(T::zero());
    Ok(FdSolution {
        nodes,
        values,
        tag: p.tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn set_b(m: f64) -> (MaterialSpec<f64>, MaterialSpec<f64>, MixingStats<f64>) {
        (
            MaterialSpec::new(1.0, 1.0 - 0.1 / (m * m), 0.2 / (m * m)).unwrap(),
            MaterialSpec::void(),
            MixingStats::new(1.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn alpha_set_b_closed_form() {
        let (m1, m2, stats) = set_b(20.0);
        for mu in [0.01, 0.1, 0.37, 0.9, 1.0] {
            assert_relative_eq!(alpha(mu, &m1, &m2, &stats, 1.0).unwrap(), 1.0 + 0.25 / mu, max_relative = 1e-14);
        }
        assert!(alpha(0.0, &m1, &m2, &stats, 1.0).is_err());
        assert!(alpha(-0.5, &m1, &m2, &stats, 1.0).is_err());
    }

    #[test]
    fn alpha_is_one_for_equal_totals() {
        let m1 = MaterialSpec::new(0.8, 0.2, 0.0).unwrap();
        let m2 = MaterialSpec::new(0.8, 0.7, 0.0).unwrap();
        let stats = MixingStats::new(0.3, 2.0).unwrap();
        for mu in [0.05, 0.5, 1.0] {
            assert_relative_eq!(alpha(mu, &m1, &m2, &stats, 3.0).unwrap(), 1.0, epsilon = 1e-15);
        }
        assert_relative_eq!(beta(&m1, &m2, &stats, 1.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn alpha_exceeds_one_when_totals_differ() {
        let m1 = MaterialSpec::new(1.0, 0.9, 0.0).unwrap();
        let m2 = MaterialSpec::new(0.3, 0.0, 0.0).unwrap();
        for (l1, l2) in [(1.0, 0.5), (1.0, 1.0), (0.5, 1.0)] {
            let stats = MixingStats::new(l1, l2).unwrap();
            for k in 1..=100 {
                let mu = k as f64 / 100.0;
                assert!(alpha(mu, &m1, &m2, &stats, 1.0).unwrap() > 1.0);
            }
        }
    }

    #[test]
    fn beta_set_b() {
        let (m1, m2, stats) = set_b(20.0);
        assert_relative_eq!(beta(&m1, &m2, &stats, 1.0).unwrap(), 1.375, epsilon = 1e-10);
        let eta = 4000f64.sqrt();
        let b = beta(&m1, &m2, &stats, eta).unwrap();
        assert!(b - 1.0 < 0.375 / 50.0);
        assert_relative_eq!(b, 1.0 + 0.375 / eta, epsilon = 1e-10);
    }

    #[test]
    fn analytic_set_b_values() {
        let (m1, m2, stats) = set_b(20.0);
        let avg = volume_average(&m1, &m2, &stats);
        let am = solve_diffusion_analytic(&DiffusionProblem::atomic_mix(&avg, 20.0).unwrap()).unwrap();
        assert!((am.value_at_origin() - 0.0824).abs() < 5e-5, "{}", am.value_at_origin());
        let lp = solve_diffusion_analytic(&DiffusionProblem::standard_lp(&m1, &m2, &stats, 20.0).unwrap()).unwrap();
        assert!((lp.value_at_origin() - 0.0633).abs() < 5e-5, "{}", lp.value_at_origin());
        let l = am.problem.extended_half_width();
        assert!(am.value(l).abs() < 1e-15 && am.value(-l).abs() < 1e-15);
        for k in 0..100 {
            let x = -l + 2.0 * l * k as f64 / 99.0;
            assert!(am.residual(x).abs() < 1e-12 * avg.q);
            assert!(lp.residual(x).abs() < 1e-12 * avg.q);
        }
    }

    #[test]
    fn zero_source_and_zero_absorption() {
        let avg = AveragedSpec { sigma_t: 1.0, sigma_s: 0.9, sigma_a: 0.1, q: 0.0 };
        let sol = solve_diffusion_analytic(&DiffusionProblem::atomic_mix(&avg, 5.0).unwrap()).unwrap();
        assert_eq!(sol.value(1.3), 0.0);
        let fd = solve_diffusion_fd(&DiffusionProblem::atomic_mix(&avg, 5.0).unwrap(), 20).unwrap();
        assert!(fd.values.iter().all(|&v| v == 0.0));
        let none = AveragedSpec { sigma_a: 0.0, sigma_s: 1.0, ..avg };
        assert!(solve_diffusion_analytic(&DiffusionProblem::atomic_mix(&none, 5.0).unwrap()).is_err());
    }

    #[test]
    fn fd_is_symmetric_and_needs_cells() {
        let (m1, m2, stats) = set_b(20.0);
        let avg = volume_average(&m1, &m2, &stats);
        let p = DiffusionProblem::atomic_mix(&avg, 20.0).unwrap();
        assert!(solve_diffusion_fd(&p, 9).is_err());
        let fd = solve_diffusion_fd(&p, 400).unwrap();
        let n = fd.values.len();
        for j in 0..n {
            let gap = (fd.values[j] - fd.values[n - 1 - j]).abs();
            assert!(gap <= 1e-12 * fd.values[n / 2], "{gap:e}");
        }
        let field = fd.to_flux_field();
        assert_eq!(field.value_at_origin(), fd.values[200]);
    }

    #[test]
    fn coefficient_report_lists_everything() {
        let (m1, m2, stats) = set_b(20.0);
        let r = DiffusionProblem::standard_lp(&m1, &m2, &stats, 20.0).unwrap().coefficients_report();
        for key in ["beta=", "diffusion_coefficient=", "kappa=", "extrapolation_distance="] {
            assert!(r.contains(key));
        }
    }
}
