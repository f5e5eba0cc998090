use crate::error::{Error, Result};
use crate::num::Real;

use super::mesh::Mesh;
use super::quadrature::Quadrature;

/// Result of one transport sweep.
#[derive(Clone, Debug)]
pub struct SweepResult<T> {
    /// Cell-centred angular flux, `cell * n_directions + direction`.
    pub psi: Vec<T>,
    /// Angular flux at x = -X and x = +X for each direction.
    pub boundary: (Vec<T>, Vec<T>),
    pub negative_count: usize,
}

/// Totals from a sweep that only accumulates the scalar flux.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct SweepTally<T> {
    pub outflow_left: T,
    pub outflow_right: T,
    pub negative_count: usize,
}

/// Diamond-difference sweep with vacuum inflow for an isotropic emission density.
///
/// `emission[i]` is the total isotropic source in cell `i` (scattering plus
/// fixed source); each direction receives half of it.
pub fn sweep<T: Real>(mesh: &Mesh<T>, quad: &Quadrature<T>, emission: &[T]) -> Result<SweepResult<T>> {
    check_emission(mesh, emission)?;
    let nd = quad.len();
    let mut psi = vec![T::zero(); mesh.len() * nd];
    let mut scalar = vec![T::zero(); mesh.len()];
    let mut left = vec![T::zero(); nd];
    let mut right = vec![T::zero(); nd];
    let tally = sweep_kernel(mesh, quad, emission, &mut scalar, Some(&mut psi), Some((&mut left, &mut right)));
    Ok(SweepResult {
        psi,
        boundary: (left, right),
        negative_count: tally.negative_count,
    })
}

pub(crate) fn check_emission<T: Real>(mesh: &Mesh<T>, emission: &[T]) -> Result<()> {
    if emission.len() != mesh.len() {
        return Err(Error::InvalidInput(format!(
            "emission has {} entries for {} cells",
            emission.len(),
            mesh.len()
        )));
    }
    Ok(())
}

/// Sweeps every direction, overwriting `scalar` with `Σ w ψ`.
///
/// Directions are reduced in quadrature order so the result is bitwise reproducible.
pub(crate) fn sweep_kernel<T: Real>(
    mesh: &Mesh<T>,
    quad: &Quadrature<T>,
    emission: &[T],
    scalar: &mut [T],
    mut angular: Option<&mut [T]>,
    mut boundary: Option<(&mut [T], &mut [T])>,
) -> SweepTally<T> {
    let nd = quad.len();
    let n = mesh.len();
    let half = T::lit(0.5);
    let edges = mesh.edges();
    let cells = mesh.cells();
    scalar.iter_mut().for_each(|s| *s = T::zero());
    let mut tally = SweepTally::default();

    for d in 0..nd {
        let mu = quad.mu()[d];
        let w = quad.weights()[d];
        let amu = mu.abs();
        let mut psi_in = T::zero();
        let mut visit = |i: usize, psi_in: &mut T| {
            let h = edges[i + 1] - edges[i];
            let a = amu / h;
            let st = cells[i].sigma_t * half;
            let out = ((a - st) * *psi_in + half * emission[i]) / (a + st);
            let center = half * (*psi_in + out);
            if out < T::zero() || center < T::zero() {
                tally.negative_count += 1;
            }
            scalar[i] = scalar[i] + w * center;
            if let Some(ang) = angular.as_deref_mut() {
                ang[i * nd + d] = center;
            }
            *psi_in = out;
        };
        if mu > T::zero() {
            for i in 0..n {
                visit(i, &mut psi_in);
            }
            tally.outflow_right = tally.outflow_right + w * amu * psi_in;
            if let Some((l, r)) = boundary.as_mut() {
                l[d] = T::zero();
                r[d] = psi_in;
            }
        } else {
            for i in (0..n).rev() {
                visit(i, &mut psi_in);
            }
            tally.outflow_left = tally.outflow_left + w * amu * psi_in;
            if let Some((l, r)) = boundary.as_mut() {
                l[d] = psi_in;
                r[d] = T::zero();
            }
        }
    }
    tally
}
