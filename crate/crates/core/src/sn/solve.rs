use crate::error::{Error, Result};
use crate::num::{iteration_converged, relative_change, Real};

use super::flux::{FluxField, ModelTag};
use super::mesh::Mesh;
use super::quadrature::Quadrature;
use super::sweep::sweep_kernel;

/// Convergence controls for source iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions<T> {
    /// Bound on the pointwise relative change of the scalar flux between iterations,
    /// and on the remaining error extrapolated from the contraction rate.
    pub tol: T,
    pub max_iters: usize,
    /// Keep the cell-centred angular flux in the result.
    pub keep_angular: bool,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            max_iters: 100_000,
            keep_angular: false,
        }
    }
}

pub(crate) fn check_scattering<T: Real>(mesh: &Mesh<T>) -> Result<()> {
    for (i, c) in mesh.cells().iter().enumerate() {
        if c.sigma_s > c.sigma_t || c.sigma_s < T::zero() || c.sigma_t < T::zero() {
            return Err(Error::InvalidInput(format!(
                "cell {i}: sigma_s={} sigma_t={} (scattering ratio must be in [0, 1])",
                c.sigma_s, c.sigma_t
            )));
        }
    }
    Ok(())
}

pub(crate) fn default_tag<T: Real>(mesh: &Mesh<T>) -> ModelTag {
    if mesh.cells().iter().any(|c| c.material.is_some()) {
        ModelTag::BenchmarkRealization
    } else {
        ModelTag::AtomicMix
    }
}

/// Solves the fixed-source slab problem by unaccelerated source iteration.
///
/// Starts from zero flux. A problem without scattering is finished after the first sweep.
pub fn solve_fixed_source<T: Real>(
    mesh: &Mesh<T>,
    quad: &Quadrature<T>,
    opts: &SolveOptions<T>,
) -> Result<FluxField<T>> {
    check_scattering(mesh)?;
    let n = mesh.len();
    let nd = quad.len();
    let mut phi = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let mut emission: Vec<T> = mesh.cells().iter().map(|c| c.q).collect();
    let mut history = Vec::new();
    let scattering = mesh.has_scattering();

    for iter in 1..=opts.max_iters.max(1) {
        let tally = sweep_kernel(mesh, quad, &emission, &mut next, None, None);
        let residual = if scattering {
            phi.iter()
                .zip(&next)
                .map(|(&old, &new)| relative_change(new, old))
                .fold(T::zero(), T::max)
        } else {
            T::zero()
        };
        std::mem::swap(&mut phi, &mut next);
        history.push(residual.to_f64_lossy());

        if !scattering || iteration_converged(&history, opts.tol.to_f64_lossy()) {
            let mut negative = tally.negative_count;
            let angular = if opts.keep_angular {
                // one more sweep with the same emission to recover the angular flux of `phi`
                let mut psi = vec![T::zero(); n * nd];
                let t = sweep_kernel(mesh, quad, &emission, &mut next, Some(&mut psi), None);
                negative = t.negative_count;
                Some(psi)
            } else {
                None
            };
            return Ok(FluxField {
                edges: mesh.edges().to_vec(),
                scalar_flux: phi,
                angular_flux: angular,
                n_directions: nd,
                tag: default_tag(mesh),
                iterations: iter,
                residual,
                negative_flux_count: negative,
                outflow: (tally.outflow_left, tally.outflow_right),
            });
        }

        for ((e, c), &p) in emission.iter_mut().zip(mesh.cells()).zip(&phi) {
            *e = c.sigma_s * p + c.q;
        }
    }

    let residual = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        residual,
        residual_history: history,
        last_scalar_flux: phi.iter().map(|p| p.to_f64_lossy()).collect(),
    })
}
