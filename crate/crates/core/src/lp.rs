//! Coupled two-material Levermore-Pomraning equations, standard and adjusted.
//!
//! Unknowns are the weighted fluxes `u_k = p_k Ψ_k`. Within each cell the two
//! materials exchange particles at rate `η|μ|/λ_k`; that exchange is solved
//! implicitly (a 2×2 system per cell and direction) during the sweep, and only
//! the scattering source is lagged between iterations.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::mixing::{eta_factor, volume_average, MaterialSpec, MixingStats};
use crate::num::{iteration_converged, relative_change, Real};
use crate::linalg::BandedMatrix;
use crate::sn::{fmt17, value_at, FluxField, Mesh, ModelTag, Quadrature, Scheme, SolveOptions};

/// Where the transition-length rescale came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaSource {
    /// η = 1, the standard model.
    Standard,
    /// η = sqrt(<Σt>/<Σa>).
    AbsorptionRatio,
    /// Caller-supplied value.
    User,
}

impl fmt::Display for EtaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EtaSource::Standard => "standard",
            EtaSource::AbsorptionRatio => "absorption-ratio",
            EtaSource::User => "user",
        })
    }
}

#[derive(Clone, Debug)]
pub struct LpProblem<T> {
    m1: MaterialSpec<T>,
    m2: MaterialSpec<T>,
    stats: MixingStats<T>,
    half_width: T,
    eta: T,
    eta_source: EtaSource,
    quad: Quadrature<T>,
    dx_max: T,
}

impl<T: Real> LpProblem<T> {
    /// Standard LP model (η = 1).
    pub fn standard(
        m1: MaterialSpec<T>,
        m2: MaterialSpec<T>,
        stats: MixingStats<T>,
        half_width: T,
        quad: Quadrature<T>,
        dx_max: T,
    ) -> Result<Self> {
        Self::build(m1, m2, stats, half_width, T::one(), EtaSource::Standard, quad, dx_max)
    }

    /// Adjusted model with η = sqrt(<Σt>/<Σa>).
    pub fn adjusted(
        m1: MaterialSpec<T>,
        m2: MaterialSpec<T>,
        stats: MixingStats<T>,
        half_width: T,
        quad: Quadrature<T>,
        dx_max: T,
    ) -> Result<Self> {
        let eta = eta_factor(&volume_average(&m1, &m2, &stats))?;
        Self::build(m1, m2, stats, half_width, eta, EtaSource::AbsorptionRatio, quad, dx_max)
    }

    /// Arbitrary positive η.
    pub fn with_eta(
        m1: MaterialSpec<T>,
        m2: MaterialSpec<T>,
        stats: MixingStats<T>,
        half_width: T,
        eta: T,
        quad: Quadrature<T>,
        dx_max: T,
    ) -> Result<Self> {
        Self::build(m1, m2, stats, half_width, eta, EtaSource::User, quad, dx_max)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        m1: MaterialSpec<T>,
        m2: MaterialSpec<T>,
        stats: MixingStats<T>,
        half_width: T,
        eta: T,
        eta_source: EtaSource,
        quad: Quadrature<T>,
        dx_max: T,
    ) -> Result<Self> {
        m1.validate()?;
        m2.validate()?;
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
        }
        if !(half_width > T::zero()) || !(dx_max > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "half width {half_width} and dx_max {dx_max} must be positive"
            )));
        }
        Ok(Self {
            m1,
            m2,
            stats,
            half_width,
            eta,
            eta_source,
            quad,
            dx_max,
        })
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn eta_source(&self) -> EtaSource {
        self.eta_source
    }

    pub fn materials(&self) -> (&MaterialSpec<T>, &MaterialSpec<T>) {
        (&self.m1, &self.m2)
    }

    pub fn stats(&self) -> &MixingStats<T> {
        &self.stats
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn quadrature(&self) -> &Quadrature<T> {
        &self.quad
    }

    pub fn tag(&self) -> ModelTag {
        match self.eta_source {
            EtaSource::Standard => ModelTag::Lp,
            _ => ModelTag::Alp,
        }
    }

    /// Uniform mesh with an even number of cells, so the origin is an edge.
    pub fn mesh(&self) -> Result<Mesh<T>> {
        Mesh::homogeneous(&MaterialSpec::void(), self.half_width, self.dx_max)
    }
}

/// Converged LP/ALP solution.
#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub edges: Vec<T>,
    /// `p1 φ1 + p2 φ2` per cell.
    pub mean_scalar_flux: Vec<T>,
    pub phi1: Vec<T>,
    pub phi2: Vec<T>,
    /// Per-material angular fluxes Ψ_k, `cell * n_directions + direction`, when requested.
    pub angular: Option<(Vec<T>, Vec<T>)>,
    pub n_directions: usize,
    pub volume_fractions: (T, T),
    pub eta: T,
    pub eta_source: EtaSource,
    pub tag: ModelTag,
    pub iterations: usize,
    pub residual: T,
    pub negative_flux_count: usize,
    /// Combined outflow currents (left, right) of both components.
    pub outflow: (T, T),
}

impl<T: Real> LpSolution<T> {
    pub fn value_at_origin(&self) -> T {
        value_at(&self.edges, &self.mean_scalar_flux, T::zero())
    }

    pub fn to_flux_field(&self) -> FluxField<T> {
        FluxField {
            edges: self.edges.clone(),
            scalar_flux: self.mean_scalar_flux.clone(),
            angular_flux: None,
            n_directions: self.n_directions,
            tag: self.tag,
            iterations: self.iterations,
            residual: self.residual,
            negative_flux_count: self.negative_flux_count,
            outflow: self.outflow,
        }
    }

    /// CSV `x,mean_scalar_flux,phi1,phi2`, preceded by a comment line with the tag and η.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# model_tag={} eta={} eta_source={}",
            self.tag,
            fmt17(self.eta),
            self.eta_source
        )?;
        writeln!(out, "x,mean_scalar_flux,phi1,phi2")?;
        for (i, e) in self.edges.windows(2).enumerate() {
            let x = (e[0] + e[1]) / T::lit(2.0);
            writeln!(
                out,
                "{},{},{},{}",
                fmt17(x),
                fmt17(self.mean_scalar_flux[i]),
                fmt17(self.phi1[i]),
                fmt17(self.phi2[i])
            )?;
        }
        Ok(())
    }
}

/// Output of [`lp_sweep`]: cell-centred Ψ_1 and Ψ_2 (not weighted by p_k).
#[derive(Clone, Debug)]
pub struct LpSweep<T> {
    pub psi1: Vec<T>,
    pub psi2: Vec<T>,
    pub negative_count: usize,
}

#[derive(Default)]
struct Tally<T> {
    left: T,
    right: T,
    negative: usize,
}

/// Per-direction constants of the coupled sweep.
struct Coupled<T> {
    sigma_t: [T; 2],
    transfer: [T; 2],
}

impl<T: Real> Coupled<T> {
    fn new(problem: &LpProblem<T>) -> Self {
        Self {
            sigma_t: [problem.m1.sigma_t, problem.m2.sigma_t],
            transfer: [
                problem.eta / problem.stats.lambda1(),
                problem.eta / problem.stats.lambda2(),
            ],
        }
    }
}

/// Core sweep over weighted fluxes `u_k = p_k Ψ_k`.
///
/// `emission[k][i]` is the isotropic weighted source density of material k in
/// cell i (`Σs_k p_k φ_k + p_k Q_k`). Overwrites `scalar[k]` with `Σ w u_k`.
fn coupled_kernel<T: Real>(
    problem: &LpProblem<T>,
    mesh: &Mesh<T>,
    emission: [&[T]; 2],
    scalar: [&mut [T]; 2],
    mut angular: Option<[&mut [T]; 2]>,
) -> Result<Tally<T>> {
    let quad = &problem.quad;
    let nd = quad.len();
    let n = mesh.len();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let consts = Coupled::new(problem);
    let edges = mesh.edges();
    let [s1, s2] = scalar;
    s1.iter_mut().for_each(|v| *v = T::zero());
    s2.iter_mut().for_each(|v| *v = T::zero());
    let mut tally = Tally::default();

    for d in 0..nd {
        let mu = quad.mu()[d];
        let w = quad.weights()[d];
        let amu = mu.abs();
        let c1 = consts.transfer[0] * amu;
        let c2 = consts.transfer[1] * amu;
        let mut u_in = [T::zero(); 2];
        let forward = mu > T::zero();
        for step in 0..n {
            let i = if forward { step } else { n - 1 - step };
            let a2 = two * amu / (edges[i + 1] - edges[i]);
            let diag1 = a2 + consts.sigma_t[0] + c1;
            let diag2 = a2 + consts.sigma_t[1] + c2;
            let det = diag1 * diag2 - c1 * c2;
            if !(det != T::zero()) || !det.is_finite() {
                return Err(Error::SingularBlock {
                    cell: i,
                    direction: d,
                    det: det.to_f64_lossy(),
                });
            }
            let b1 = half * emission[0][i] + a2 * u_in[0];
            let b2 = half * emission[1][i] + a2 * u_in[1];
            let avg1 = (b1 * diag2 + c2 * b2) / det;
            let avg2 = (diag1 * b2 + c1 * b1) / det;
            let out1 = two * avg1 - u_in[0];
            let out2 = two * avg2 - u_in[1];
            if avg1 < T::zero() || avg2 < T::zero() || out1 < T::zero() || out2 < T::zero() {
                tally.negative += 1;
            }
            s1[i] = s1[i] + w * avg1;
            s2[i] = s2[i] + w * avg2;
            if let Some([a1, a2]) = angular.as_mut() {
                a1[i * nd + d] = avg1;
                a2[i * nd + d] = avg2;
            }
            u_in = [out1, out2];
        }
        let out = w * amu * (u_in[0] + u_in[1]);
        if forward {
            tally.right = tally.right + out;
        } else {
            tally.left = tally.left + out;
        }
    }
    Ok(tally)
}

/// One coupled sweep with vacuum inflow for both material fluxes.
///
/// `emissions` are the weighted isotropic sources `Σs_k p_k φ_k + p_k Q_k` per cell.
pub fn lp_sweep<T: Real>(problem: &LpProblem<T>, emissions: (&[T], &[T])) -> Result<LpSweep<T>> {
    let mesh = problem.mesh()?;
    lp_sweep_on(problem, &mesh, emissions)
}

fn lp_sweep_on<T: Real>(problem: &LpProblem<T>, mesh: &Mesh<T>, emissions: (&[T], &[T])) -> Result<LpSweep<T>> {
    let n = mesh.len();
    if emissions.0.len() != n || emissions.1.len() != n {
        return Err(Error::InvalidInput(format!("emissions must have {n} entries")));
    }
    let nd = problem.quad.len();
    let mut u1 = vec![T::zero(); n * nd];
    let mut u2 = vec![T::zero(); n * nd];
    let mut s1 = vec![T::zero(); n];
    let mut s2 = vec![T::zero(); n];
    let tally = coupled_kernel(
        problem,
        mesh,
        [emissions.0, emissions.1],
        [&mut s1, &mut s2],
        Some([&mut u1, &mut u2]),
    )?;
    let (p1, p2) = problem.stats.volume_fractions();
    Ok(LpSweep {
        psi1: u1.into_iter().map(|u| u / p1).collect(),
        psi2: u2.into_iter().map(|u| u / p2).collect(),
        negative_count: tally.negative,
    })
}

/// Source iteration on the two scattering sources.
///
/// Converged when the pointwise relative change of both component scalar
/// fluxes, and the error it implies at the observed contraction rate, drop below `tol`.
pub fn solve_lp<T: Real>(problem: &LpProblem<T>, tol: T, max_iters: usize, keep_angular: bool) -> Result<LpSolution<T>> {
    let mesh = problem.mesh()?;
    let n = mesh.len();
    let nd = problem.quad.len();
    let (p1, p2) = problem.stats.volume_fractions();
    let (m1, m2) = (problem.m1, problem.m2);
    let fixed = [p1 * m1.q, p2 * m2.q];
    let scatter = [m1.sigma_s, m2.sigma_s];
    let scattering = scatter.iter().any(|&s| s > T::zero());

    let mut em1 = vec![fixed[0]; n];
    let mut em2 = vec![fixed[1]; n];
    let mut u1 = vec![T::zero(); n];
    let mut u2 = vec![T::zero(); n];
    let mut next1 = vec![T::zero(); n];
    let mut next2 = vec![T::zero(); n];
    let mut history = Vec::new();

    for iter in 1..=max_iters.max(1) {
        let tally = coupled_kernel(problem, &mesh, [&em1, &em2], [&mut next1, &mut next2], None)?;
        let residual = if scattering {
            u1.iter()
                .zip(&next1)
                .chain(u2.iter().zip(&next2))
                .map(|(&old, &new)| relative_change(new, old))
                .fold(T::zero(), T::max)
        } else {
            T::zero()
        };
        std::mem::swap(&mut u1, &mut next1);
        std::mem::swap(&mut u2, &mut next2);
        history.push(residual.to_f64_lossy());

        if !scattering || iteration_converged(&history, tol.to_f64_lossy()) {
            let mut negative = tally.negative;
            let angular = if keep_angular {
                let sweep = lp_sweep_on(problem, &mesh, (&em1, &em2))?;
                negative = sweep.negative_count;
                Some((sweep.psi1, sweep.psi2))
            } else {
                None
            };
            let mean = u1.iter().zip(&u2).map(|(&a, &b)| a + b).collect();
            return Ok(LpSolution {
                edges: mesh.edges().to_vec(),
                mean_scalar_flux: mean,
                phi1: u1.iter().map(|&u| u / p1).collect(),
                phi2: u2.iter().map(|&u| u / p2).collect(),
                angular,
                n_directions: nd,
                volume_fractions: (p1, p2),
                eta: problem.eta,
                eta_source: problem.eta_source,
                tag: problem.tag(),
                iterations: iter,
                residual,
                negative_flux_count: negative,
                outflow: (tally.left, tally.right),
            });
        }

        for i in 0..n {
            em1[i] = scatter[0] * u1[i] + fixed[0];
            em2[i] = scatter[1] * u2[i] + fixed[1];
        }
    }

    let residual = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NotConverged {
        iterations: max_iters,
        residual,
        residual_history: history,
        last_scalar_flux: u1.iter().zip(&u2).map(|(&a, &b)| (a + b).to_f64_lossy()).collect(),
    })
}

/// Solves the coupled equations in one banded elimination, without lagging scattering.
///
/// Reaches the same discrete fixed point as [`solve_lp`]; `iterations` is reported as 1.
pub fn solve_lp_direct<T: Real>(problem: &LpProblem<T>, keep_angular: bool) -> Result<LpSolution<T>> {
    let mesh = problem.mesh()?;
    let n = mesh.len();
    let quad = &problem.quad;
    let nd = quad.len();
    let half = quad.first_positive();
    let (mu, w) = (quad.mu(), quad.weights());
    let (p1, p2) = problem.stats.volume_fractions();
    let sigma_t = [problem.m1.sigma_t, problem.m2.sigma_t];
    let sigma_s = [problem.m1.sigma_s, problem.m2.sigma_s];
    let fixed = [p1 * problem.m1.q, p2 * problem.m2.q];
    let transfer = Coupled::new(problem).transfer;
    let two = T::lit(2.0);
    let four = T::lit(4.0);

    // Unknown (edge e, direction d, material k) sits at (e * nd + d) * 2 + k.
    let block = 2 * nd;
    let var = |e: usize, d: usize, k: usize| (e * nd + d) * 2 + k;
    let dim = (n + 1) * block;
    let band = 3 * nd - 1;
    let mut a = BandedMatrix::zeros(dim, band, band);
    let mut rhs = vec![T::zero(); dim];

    for d in half..nd {
        for k in 0..2 {
            a.add(2 * (d - half) + k, var(0, d, k), T::one());
        }
    }
    for i in 0..n {
        let h = mesh.width(i);
        for d in 0..nd {
            let amu = mu[d].abs();
            for k in 0..2 {
                let o = 1 - k;
                let row = 2 * half + i * block + 2 * d + k;
                let own = h * (sigma_t[k] + transfer[k] * amu) / two;
                let cross = -h * transfer[o] * amu / two;
                let scatter = sigma_s[k] * h / four;
                if scatter != T::zero() {
                    for m in 0..nd {
                        a.add(row, var(i, m, k), -scatter * w[m]);
                        a.add(row, var(i + 1, m, k), -scatter * w[m]);
                    }
                }
                a.add(row, var(i, d, k), own - mu[d]);
                a.add(row, var(i + 1, d, k), own + mu[d]);
                a.add(row, var(i, d, o), cross);
                a.add(row, var(i + 1, d, o), cross);
                rhs[row] = fixed[k] * h / two;
            }
        }
    }
    for d in 0..half {
        for k in 0..2 {
            a.add(2 * half + n * block + 2 * d + k, var(n, d, k), T::one());
        }
    }

    let edge_u = a.solve(rhs)?;

    let mut u = [vec![T::zero(); n], vec![T::zero(); n]];
    let mut angular = keep_angular.then(|| (vec![T::zero(); n * nd], vec![T::zero(); n * nd]));
    let mut negative = 0;
    for i in 0..n {
        for d in 0..nd {
            let mut bad = false;
            for (k, uk) in u.iter_mut().enumerate() {
                let (l, r) = (edge_u[var(i, d, k)], edge_u[var(i + 1, d, k)]);
                let center = (l + r) / two;
                bad |= center < T::zero() || l < T::zero() || r < T::zero();
                uk[i] = uk[i] + w[d] * center;
                if let Some((a1, a2)) = angular.as_mut() {
                    let p = if k == 0 { p1 } else { p2 };
                    [a1, a2][k][i * nd + d] = center / p;
                }
            }
            if bad {
                negative += 1;
            }
        }
    }
    let outflow = |e: usize, d: usize| w[d] * mu[d].abs() * (edge_u[var(e, d, 0)] + edge_u[var(e, d, 1)]);
    let left = (0..half).map(|d| outflow(0, d)).sum();
    let right = (half..nd).map(|d| outflow(n, d)).sum();
    let [u1, u2] = u;
    Ok(LpSolution {
        edges: mesh.edges().to_vec(),
        mean_scalar_flux: u1.iter().zip(&u2).map(|(&a, &b)| a + b).collect(),
        phi1: u1.iter().map(|&v| v / p1).collect(),
        phi2: u2.iter().map(|&v| v / p2).collect(),
        angular,
        n_directions: nd,
        volume_fractions: (p1, p2),
        eta: problem.eta,
        eta_source: problem.eta_source,
        tag: problem.tag(),
        iterations: 1,
        residual: T::zero(),
        negative_flux_count: negative,
        outflow: (left, right),
    })
}

/// Dispatches to [`solve_lp`] or [`solve_lp_direct`].
pub fn solve_lp_with<T: Real>(problem: &LpProblem<T>, scheme: Scheme, opts: &SolveOptions<T>) -> Result<LpSolution<T>> {
    match scheme {
        Scheme::SourceIteration => solve_lp(problem, opts.tol, opts.max_iters, opts.keep_angular),
        Scheme::Direct => solve_lp_direct(problem, opts.keep_angular),
    }
}

/// Particle balance of an LP solution summed over both components.
pub fn lp_balance<T: Real>(problem: &LpProblem<T>, sol: &LpSolution<T>) -> crate::sn::Balance<T> {
    let (p1, p2) = sol.volume_fractions;
    let (m1, m2) = problem.materials();
    let mut absorption = T::zero();
    let mut source = T::zero();
    for (i, e) in sol.edges.windows(2).enumerate() {
        let h = e[1] - e[0];
        absorption = absorption + (m1.sigma_a() * p1 * sol.phi1[i] + m2.sigma_a() * p2 * sol.phi2[i]) * h;
        source = source + (p1 * m1.q + p2 * m2.q) * h;
    }
    crate::sn::Balance {
        absorption,
        leakage: sol.outflow.0 + sol.outflow.1,
        source,
    }
}
