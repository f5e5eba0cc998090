use log::warn;

use crate::error::{Error, Result};
use crate::mixing::{Material, MaterialSpec, Realization};
use crate::num::Real;

/// Piecewise-constant data of one mesh cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell<T> {
    /// `None` for homogenized (volume-averaged) data.
    pub material: Option<Material>,
    pub sigma_t: T,
    pub sigma_s: T,
    pub q: T,
}

impl<T: Real> Cell<T> {
    pub fn from_spec(material: Option<Material>, spec: &MaterialSpec<T>) -> Self {
        Self {
            material,
            sigma_t: spec.sigma_t,
            sigma_s: spec.sigma_s,
            q: spec.q,
        }
    }

    pub fn sigma_a(&self) -> T {
        self.sigma_t - self.sigma_s
    }
}

/// Spatial mesh of `[-X, X]`. The origin is always a cell edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<T> {
    edges: Vec<T>,
    cells: Vec<Cell<T>>,
}

/// A homogeneous layer before subdivision.
#[derive(Clone, Copy, Debug)]
pub struct Layer<T> {
    pub cell: Cell<T>,
    pub width: T,
}

impl<T: Real> Mesh<T> {
    /// Subdivides consecutive layers spanning `[-W/2, W/2]` into equal cells of width at most `dx_max`.
    ///
    /// Layer interfaces and the origin become cell edges. Slivers narrower than
    /// `1e-12 X` are absorbed into a neighbouring layer.
    pub fn from_layers(layers: &[Layer<T>], dx_max: T) -> Result<Self> {
        if !(dx_max > T::zero()) || !dx_max.is_finite() {
            return Err(Error::InvalidMesh(format!("dx_max must be positive, got {dx_max}")));
        }
        if layers.is_empty() {
            return Err(Error::InvalidMesh("no layers".into()));
        }
        let total: T = layers.iter().map(|l| l.width).sum();
        let half = total / T::lit(2.0);

        // Breakpoints of the layer structure with the origin inserted.
        let mut pieces: Vec<(T, T, Cell<T>)> = Vec::with_capacity(layers.len() + 1);
        let mut left = -half;
        for (i, layer) in layers.iter().enumerate() {
            let right = if i + 1 == layers.len() { half } else { left + layer.width };
            if left < T::zero() && right > T::zero() {
                pieces.push((left, T::zero(), layer.cell));
                pieces.push((T::zero(), right, layer.cell));
            } else {
                pieces.push((left, right, layer.cell));
            }
            left = right;
        }

        let sliver = T::lit(1e-12) * half;
        let mut merged: Vec<(T, T, Cell<T>)> = Vec::with_capacity(pieces.len());
        let mut pending_left: Option<T> = None;
        for (l, r, cell) in pieces {
            let l = pending_left.take().unwrap_or(l);
            if r - l < sliver {
                // Keep the origin edge: a sliver ending at 0 goes to the left, one starting at 0 to the right.
                if let Some(prev) = merged.last_mut().filter(|p| p.1 != T::zero() || r == T::zero()) {
                    warn!("merging degenerate layer [{l}, {r}] into its left neighbour");
                    prev.1 = r;
                } else {
                    warn!("merging degenerate layer [{l}, {r}] into its right neighbour");
                    pending_left = Some(l);
                }
                continue;
            }
            merged.push((l, r, cell));
        }
        if let Some(l) = pending_left {
            match merged.last_mut() {
                Some(prev) => prev.1 = half.max(prev.1),
                None => merged.push((l, half, layers[0].cell)),
            }
        }

        let mut edges = vec![merged[0].0];
        let mut cells = Vec::new();
        for (l, r, cell) in merged {
            let n = ((r - l) / dx_max).ceil().to_usize().unwrap_or(1).max(1);
            let h = (r - l) / T::lit(n as f64);
            for j in 1..n {
                edges.push(l + h * T::lit(j as f64));
            }
            edges.push(r);
            cells.extend(std::iter::repeat_n(cell, n));
        }
        Ok(Self { edges, cells })
    }

    /// Mesh of one sampled realization.
    pub fn from_realization(
        realization: &Realization<T>,
        m1: &MaterialSpec<T>,
        m2: &MaterialSpec<T>,
        dx_max: T,
    ) -> Result<Self> {
        let layers: Vec<Layer<T>> = realization
            .segments()
            .iter()
            .map(|s| {
                let spec = match s.material {
                    Material::One => m1,
                    Material::Two => m2,
                };
                Layer {
                    cell: Cell::from_spec(Some(s.material), spec),
                    width: s.width,
                }
            })
            .collect();
        Self::from_layers(&layers, dx_max)
    }

    /// Uniform mesh of a homogeneous slab `[-X, X]` with an equal cell count on each side of 0.
    pub fn homogeneous(spec: &MaterialSpec<T>, half_width: T, dx_max: T) -> Result<Self> {
        if !(half_width > T::zero()) {
            return Err(Error::InvalidMesh(format!("half width must be positive, got {half_width}")));
        }
        let layer = Layer {
            cell: Cell::from_spec(None, spec),
            width: half_width,
        };
        Self::from_layers(&[layer, layer], dx_max)
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn cells(&self) -> &[Cell<T>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn width(&self, i: usize) -> T {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn centers(&self) -> Vec<T> {
        self.edges
            .windows(2)
            .map(|e| (e[0] + e[1]) / T::lit(2.0))
            .collect()
    }

    pub fn half_width(&self) -> T {
        self.edges[self.edges.len() - 1]
    }

    pub fn has_scattering(&self) -> bool {
        self.cells.iter().any(|c| c.sigma_s > T::zero())
    }

    /// Largest cell width.
    pub fn max_width(&self) -> T {
        (0..self.len()).map(|i| self.width(i)).fold(T::zero(), T::max)
    }
}
