//! Discrete-ordinates machinery for the 1-D slab: quadrature, meshing,
//! diamond-difference sweeps and fixed-source solves.

mod direct;
mod flux;
mod mesh;
mod quadrature;
mod solve;
mod sweep;

pub use direct::solve_direct;
pub use flux::{fmt17, value_at, FluxField, ModelTag};
pub use mesh::{Cell, Layer, Mesh};
pub use quadrature::{gauss_legendre, legendre, legendre_rule, legendre_rule_on, Quadrature};
pub use solve::{solve_fixed_source, SolveOptions};
pub use sweep::{sweep, SweepResult};

use crate::error::Result;
use crate::num::Real;

/// How a fixed-source problem is solved. Both schemes target the same discrete equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    SourceIteration,
    Direct,
}

/// Dispatches to [`solve_fixed_source`] or [`solve_direct`].
pub fn solve<T: Real>(mesh: &Mesh<T>, quad: &Quadrature<T>, scheme: Scheme, opts: &SolveOptions<T>) -> Result<FluxField<T>> {
    match scheme {
        Scheme::SourceIteration => solve_fixed_source(mesh, quad, opts),
        Scheme::Direct => solve_direct(mesh, quad, opts.keep_angular),
    }
}

/// Particle bookkeeping of a converged solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Balance<T> {
    pub absorption: T,
    pub leakage: T,
    pub source: T,
}

impl<T: Real> Balance<T> {
    /// `|absorption + leakage - source| / source`.
    pub fn relative_defect(&self) -> T {
        ((self.absorption + self.leakage) - self.source).abs() / self.source
    }
}

pub fn balance<T: Real>(mesh: &Mesh<T>, field: &FluxField<T>) -> Balance<T> {
    let mut absorption = T::zero();
    let mut source = T::zero();
    for (i, c) in mesh.cells().iter().enumerate() {
        let h = mesh.width(i);
        absorption = absorption + c.sigma_a() * field.scalar_flux[i] * h;
        source = source + c.q * h;
    }
    Balance {
        absorption,
        leakage: field.leakage(),
        source,
    }
}
