//! Ensemble-averaged benchmark: solve many sampled realizations, average their
//! scalar fluxes on a fixed grid, stop once the confidence interval at the
//! origin is tight enough.

use std::io::Write;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::mixing::{sample_realization, MaterialSpec, MixingStats};
use crate::num::Real;
use crate::sn::{fmt17, gauss_legendre, solve, value_at, Mesh, Scheme, SolveOptions};

/// Uniform cells over `[-X, X]`; an even count puts an edge at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportingGrid<T> {
    edges: Vec<T>,
}

impl<T: Real> ReportingGrid<T> {
    pub fn uniform(half_width: T, cells: usize) -> Result<Self> {
        if cells == 0 || !cells.is_multiple_of(2) || !(half_width > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "grid needs a positive even cell count and width (cells={cells}, X={half_width})"
            )));
        }
        let h = T::lit(2.0) * half_width / T::lit(cells as f64);
        let edges = (0..=cells)
            .map(|k| {
                if 2 * k == cells {
                    T::zero()
                } else if k == cells {
                    half_width
                } else {
                    -half_width + h * T::lit(k as f64)
                }
            })
            .collect();
        Ok(Self { edges })
    }

    pub fn from_edges(edges: Vec<T>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("grid edges must be strictly increasing".into()));
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn centers(&self) -> Vec<T> {
        self.edges.windows(2).map(|e| (e[0] + e[1]) / T::lit(2.0)).collect()
    }
}

/// Volume-weighted average of a cell-wise field over each grid cell.
///
/// Grid cells extending past the field's support are averaged over the overlap only.
pub fn map_to_grid<T: Real>(field_edges: &[T], values: &[T], grid: &ReportingGrid<T>) -> Vec<T> {
    let ge = grid.edges();
    let mut out = vec![T::zero(); grid.len()];
    let mut j = 0;
    for (g, slot) in out.iter_mut().enumerate() {
        let (lo, hi) = (ge[g], ge[g + 1]);
        while j + 1 < field_edges.len() && field_edges[j + 1] <= lo {
            j += 1;
        }
        let mut acc = T::zero();
        let mut covered = T::zero();
        let mut k = j;
        while k < values.len() && field_edges[k] < hi {
            let a = field_edges[k].max(lo);
            let b = field_edges[k + 1].min(hi);
            if b > a {
                acc = acc + values[k] * (b - a);
                covered = covered + (b - a);
            }
            k += 1;
        }
        *slot = if covered > T::zero() { acc / covered } else { T::zero() };
    }
    out
}

/// One-pass (Welford) mean and variance of a vector-valued sample.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamingStats<T> {
    n: usize,
    mean: Vec<T>,
    m2: Vec<T>,
}

impl<T: Real> StreamingStats<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![T::zero(); dim],
            m2: vec![T::zero(); dim],
        }
    }

    pub fn push(&mut self, sample: &[T]) {
        assert_eq!(sample.len(), self.mean.len(), "sample dimension mismatch");
        self.n += 1;
        let n = T::lit(self.n as f64);
        for ((mean, m2), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let delta = x - *mean;
            *mean = *mean + delta / n;
            *m2 = *m2 + delta * (x - *mean);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> Vec<T> {
        if self.n < 2 {
            return vec![T::zero(); self.mean.len()];
        }
        let d = T::lit((self.n - 1) as f64);
        self.m2.iter().map(|&m| (m / d).max(T::zero())).collect()
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> Vec<T> {
        let n = T::lit(self.n.max(1) as f64);
        self.variance().into_iter().map(|v| (v / n).sqrt()).collect()
    }
}

/// Central-limit stopping rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// Target `z·s/(√n·mean)`.
    pub rel_halfwidth: f64,
    /// Two-sided confidence level, e.g. 0.95.
    pub confidence: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// Require the target at every grid point with positive mean, not only at x = 0.
    pub everywhere: bool,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            rel_halfwidth: 0.01,
            confidence: 0.95,
            n_min: 100,
            n_max: 200_000,
            everywhere: false,
        }
    }
}

impl StoppingRule {
    /// Standard normal quantile for the two-sided confidence level (1.96 at 95%).
    pub fn z(&self) -> f64 {
        Normal::standard().inverse_cdf(0.5 + self.confidence / 2.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_halfwidth > 0.0) || !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidInput(format!(
                "stopping rule needs a positive half-width and confidence in (0, 1): {self:?}"
            )));
        }
        if self.n_min < 2 || self.n_max < self.n_min {
            return Err(Error::InvalidInput(format!("need 2 <= n_min <= n_max: {self:?}")));
        }
        Ok(())
    }
}

/// Everything needed to run a benchmark ensemble.
#[derive(Clone, Debug)]
pub struct EnsembleConfig<T> {
    pub m1: MaterialSpec<T>,
    pub m2: MaterialSpec<T>,
    pub stats: MixingStats<T>,
    pub half_width: T,
    pub quad_order: usize,
    pub dx_max: T,
    pub scheme: Scheme,
    pub solve: SolveOptions<T>,
    pub base_seed: u64,
    pub grid_cells: usize,
    pub stopping: StoppingRule,
    /// Realizations dispatched per parallel round; the result does not depend on it.
    pub batch: usize,
}

/// Accumulated benchmark statistics.
#[derive(Clone, Debug)]
pub struct EnsembleStats<T> {
    pub grid: ReportingGrid<T>,
    pub field: StreamingStats<T>,
    /// Per-realization value at x = 0 (mean of the two grid cells meeting there).
    pub origin: StreamingStats<T>,
    pub n_realizations: usize,
    /// Achieved `z·s/(√n·mean)` at the origin.
    pub ci_relative_halfwidth: f64,
    pub converged: bool,
    pub wall_time_s: f64,
    pub z: f64,
}

impl<T: Real> EnsembleStats<T> {
    pub fn mean(&self) -> &[T] {
        self.field.mean()
    }

    pub fn value_at_origin(&self) -> T {
        self.origin.mean()[0]
    }

    /// Half-width of the confidence interval at the origin.
    pub fn origin_halfwidth(&self) -> T {
        T::lit(self.z) * self.origin.std_error()[0]
    }

    /// CSV `x,mean_flux,std_error,n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,mean_flux,std_error,n")?;
        let se = self.field.std_error();
        for ((x, m), s) in self.grid.centers().into_iter().zip(self.mean()).zip(&se) {
            writeln!(out, "{},{},{},{}", fmt17(x), fmt17(*m), fmt17(*s), self.n_realizations)?;
        }
        Ok(())
    }

    pub fn summary_line(&self) -> String {
        format!(
            "n_realizations={} ci_relative_halfwidth={:.6e} converged={} phi_origin={} wall_time_s={:.3}",
            self.n_realizations,
            self.ci_relative_halfwidth,
            self.converged,
            fmt17(self.value_at_origin()),
            self.wall_time_s
        )
    }
}

fn relative_halfwidth<T: Real>(z: f64, stats: &StreamingStats<T>) -> Vec<f64> {
    stats
        .mean()
        .iter()
        .zip(stats.std_error())
        .map(|(&m, s)| {
            let m = m.to_f64_lossy();
            if m > 0.0 {
                z * s.to_f64_lossy() / m
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Solves realization `index` and maps its scalar flux onto the grid.
pub fn realization_on_grid<T: Real>(
    cfg: &EnsembleConfig<T>,
    quad: &crate::sn::Quadrature<T>,
    grid: &ReportingGrid<T>,
    index: u64,
) -> Result<Vec<T>> {
    let r = sample_realization(&cfg.stats, T::lit(2.0) * cfg.half_width, cfg.base_seed, index)?;
    let mesh = Mesh::from_realization(&r, &cfg.m1, &cfg.m2, cfg.dx_max)?;
    let field = solve(&mesh, quad, cfg.scheme, &cfg.solve).map_err(|e| e.in_model(format!("realization {index}")))?;
    Ok(map_to_grid(&field.edges, &field.scalar_flux, grid))
}

/// Runs the benchmark until the stopping rule is met or `n_max` realizations are used.
///
/// Results are reduced in realization order, so the statistics are identical for
/// any `workers` count.
pub fn run_ensemble<T: Real>(cfg: &EnsembleConfig<T>, workers: usize) -> Result<EnsembleStats<T>> {
    cfg.stopping.validate()?;
    let start = Instant::now();
    let quad = gauss_legendre::<T>(cfg.quad_order)?;
    let grid = ReportingGrid::uniform(cfg.half_width, cfg.grid_cells)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let z = cfg.stopping.z();
    let mut field = StreamingStats::new(grid.len());
    let mut origin = StreamingStats::new(1);
    let batch = cfg.batch.max(1) as u64;
    let mut next: u64 = 0;
    let mut achieved = f64::INFINITY;
    let mut converged = false;

    'outer: while (next as usize) < cfg.stopping.n_max {
        let end = (next + batch).min(cfg.stopping.n_max as u64);
        let results: Vec<Vec<T>> = pool.install(|| {
            (next..end)
                .into_par_iter()
                .map(|k| realization_on_grid(cfg, &quad, &grid, k))
                .collect::<Result<Vec<_>>>()
        })?;
        next = end;
        for values in results {
            origin.push(&[value_at(grid.edges(), &values, T::zero())]);
            field.push(&values);
            if origin.count() < cfg.stopping.n_min {
                continue;
            }
            achieved = relative_halfwidth(z, &origin)[0];
            let mut done = achieved <= cfg.stopping.rel_halfwidth;
            if done && cfg.stopping.everywhere {
                done = relative_halfwidth(z, &field)
                    .into_iter()
                    .filter(|h| h.is_finite())
                    .all(|h| h <= cfg.stopping.rel_halfwidth);
            }
            if done {
                converged = true;
                break 'outer;
            }
        }
    }
    if origin.count() >= 2 {
        achieved = relative_halfwidth(z, &origin)[0];
    }
    if !converged {
        warn!(
            "ensemble stopped at n_max={} with relative half-width {achieved:.3e} (target {:.3e})",
            cfg.stopping.n_max, cfg.stopping.rel_halfwidth
        );
    }
    Ok(EnsembleStats {
        grid,
        n_realizations: origin.count(),
        field,
        origin,
        ci_relative_halfwidth: achieved,
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        z,
    })
}

/// `(model - benchmark) / benchmark` per grid point; `None` where the benchmark is not positive.
pub fn relative_error<T: Real>(model_on_grid: &[T], benchmark: &EnsembleStats<T>) -> Result<Vec<Option<T>>> {
    if model_on_grid.len() != benchmark.grid.len() {
        return Err(Error::InvalidInput(format!(
            "model has {} grid values, benchmark {}",
            model_on_grid.len(),
            benchmark.grid.len()
        )));
    }
    Ok(model_on_grid
        .iter()
        .zip(benchmark.mean())
        .map(|(&m, &b)| (b > T::zero()).then(|| (m - b) / b))
        .collect())
}

/// Relative error of two scalars, `None` when the reference is not positive.
pub fn relative_error_scalar<T: Real>(model: T, benchmark: T) -> Option<T> {
    (benchmark > T::zero()).then(|| (model - benchmark) / benchmark)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_mapping() {
        let grid = ReportingGrid::uniform(2.0f64, 8).unwrap();
        let values: Vec<f64> = (0..8).map(|k| (k as f64).powi(2)).collect();
        assert_eq!(map_to_grid(grid.edges(), &values, &grid), values);
    }

    #[test]
    fn constants_survive_mapping() {
        let grid = ReportingGrid::uniform(3.0f64, 10).unwrap();
        let edges: Vec<f64> = [-3.0, -2.2, -0.1, 0.0, 0.05, 1.9, 2.95, 3.0].to_vec();
        let values = vec![4.25; edges.len() - 1];
        for v in map_to_grid(&edges, &values, &grid) {
            assert!((v - 4.25).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_profile_maps_to_centres() {
        // cell averages of f(x) = 2x + 1 on an irregular refinement of the grid
        let grid = ReportingGrid::uniform(1.0f64, 20).unwrap();
        let mut edges = vec![-1.0];
        for (k, w) in grid.edges().windows(2).enumerate() {
            let parts = 1 + k % 4;
            let mut cuts: Vec<f64> = (1..parts).map(|p| w[0] + (w[1] - w[0]) * (p as f64 / parts as f64).powi(2)).collect();
            cuts.push(w[1]);
            edges.extend(cuts);
        }
        let values: Vec<f64> = edges.windows(2).map(|e| 2.0 * (e[0] + e[1]) / 2.0 + 1.0).collect();
        let mapped = map_to_grid(&edges, &values, &grid);
        for (c, v) in grid.centers().iter().zip(mapped) {
            assert!((v - (2.0 * c + 1.0)).abs() < 1e-12, "{v} vs {}", 2.0 * c + 1.0);
        }
    }

    #[test]
    fn z_at_95_percent() {
        assert!((StoppingRule::default().z() - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn relative_error_marks_undefined_points() {
        let grid = ReportingGrid::uniform(1.0f64, 2).unwrap();
        let mut field = StreamingStats::new(2);
        field.push(&[0.0, 2.0]);
        let bench = EnsembleStats {
            grid,
            field,
            origin: StreamingStats::new(1),
            n_realizations: 1,
            ci_relative_halfwidth: 0.0,
            converged: true,
            wall_time_s: 0.0,
            z: 1.96,
        };
        let err = relative_error(&[1.0, 2.5], &bench).unwrap();
        assert_eq!(err[0], None);
        assert!((err[1].unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(relative_error(&[2.0, 2.0], &bench).unwrap()[1], Some(0.0));
        assert!(relative_error(&[1.0], &bench).is_err());
    }

    proptest! {
        #[test]
        fn streaming_matches_two_pass(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..1000).map(|_| 5.0 + rng.random::<f64>() * 3.0).collect();
            let mut s = StreamingStats::new(1);
            for &x in &data {
                s.push(&[x]);
            }
            let mean = data.iter().sum::<f64>() / 1000.0;
            let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
            prop_assert!((s.mean()[0] - mean).abs() <= 1e-10 * mean);
            prop_assert!((s.variance()[0] - var).abs() <= 1e-10 * var);
        }
    }
}
