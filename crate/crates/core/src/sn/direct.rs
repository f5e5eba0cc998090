use crate::error::Result;
use crate::linalg::BandedMatrix;
use crate::num::Real;

use super::flux::FluxField;
use super::mesh::Mesh;
use super::quadrature::Quadrature;
use super::solve::{check_scattering, default_tag};
use super::sweep::sweep_kernel;

/// Solves the diamond-difference discrete-ordinates equations in one banded elimination.
///
/// Unknowns are the edge angular fluxes. The result is the fixed point source
/// iteration converges to, without the iteration; `iterations` is reported as 1.
pub fn solve_direct<T: Real>(mesh: &Mesh<T>, quad: &Quadrature<T>, keep_angular: bool) -> Result<FluxField<T>> {
    check_scattering(mesh)?;
    let n = mesh.len();
    let nd = quad.len();
    let half = quad.first_positive();
    let mu = quad.mu();
    let w = quad.weights();

    if !mesh.has_scattering() {
        let emission: Vec<T> = mesh.cells().iter().map(|c| c.q).collect();
        let mut phi = vec![T::zero(); n];
        let mut psi = keep_angular.then(|| vec![T::zero(); n * nd]);
        let tally = sweep_kernel(mesh, quad, &emission, &mut phi, psi.as_deref_mut(), None);
        return Ok(FluxField {
            edges: mesh.edges().to_vec(),
            scalar_flux: phi,
            angular_flux: psi,
            n_directions: nd,
            tag: default_tag(mesh),
            iterations: 1,
            residual: T::zero(),
            negative_flux_count: tally.negative_count,
            outflow: (tally.outflow_left, tally.outflow_right),
        });
    }

    // Rows: `half` left inflow conditions, nd balance equations per cell, then the right inflow conditions.
    let dim = (n + 1) * nd;
    let band = nd + half - 1;
    let mut a = BandedMatrix::zeros(dim, band, band);
    let mut rhs = vec![T::zero(); dim];
    let two = T::lit(2.0);
    let four = T::lit(4.0);

    for d in half..nd {
        a.add(d - half, d, T::one());
    }
    for (i, cell) in mesh.cells().iter().enumerate() {
        let h = mesh.width(i);
        let removal = cell.sigma_t * h / two;
        let scatter = cell.sigma_s * h / four;
        let left = i * nd;
        let right = (i + 1) * nd;
        for d in 0..nd {
            let row = half + i * nd + d;
            for m in 0..nd {
                let c = -scatter * w[m];
                if c != T::zero() {
                    a.add(row, left + m, c);
                    a.add(row, right + m, c);
                }
            }
            a.add(row, left + d, removal - mu[d]);
            a.add(row, right + d, removal + mu[d]);
            rhs[row] = cell.q * h / two;
        }
    }
    for d in 0..half {
        a.add(half + n * nd + d, n * nd + d, T::one());
    }

    let edge_psi = a.solve(rhs)?;

    let mut phi = vec![T::zero(); n];
    let mut psi = keep_angular.then(|| vec![T::zero(); n * nd]);
    let mut negative = 0;
    for i in 0..n {
        let mut acc = T::zero();
        for d in 0..nd {
            let l = edge_psi[i * nd + d];
            let r = edge_psi[(i + 1) * nd + d];
            let center = (l + r) / two;
            if center < T::zero() || (mu[d] > T::zero() && r < T::zero()) || (mu[d] < T::zero() && l < T::zero()) {
                negative += 1;
            }
            acc = acc + w[d] * center;
            if let Some(p) = psi.as_mut() {
                p[i * nd + d] = center;
            }
        }
        phi[i] = acc;
    }
    let outflow_left = (0..half).map(|d| w[d] * mu[d].abs() * edge_psi[d]).sum();
    let outflow_right = (half..nd).map(|d| w[d] * mu[d] * edge_psi[n * nd + d]).sum();

    Ok(FluxField {
        edges: mesh.edges().to_vec(),
        scalar_flux: phi,
        angular_flux: psi,
        n_directions: nd,
        tag: default_tag(mesh),
        iterations: 1,
        residual: T::zero(),
        negative_flux_count: negative,
        outflow: (outflow_left, outflow_right),
    })
}
