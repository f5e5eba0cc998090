use std::fmt;
use std::io::Write;

use crate::error::Result;
use crate::num::Real;

/// Which model produced a flux profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelTag {
    BenchmarkRealization,
    BenchmarkEnsemble,
    AtomicMix,
    Lp,
    Alp,
    DiffusionAm,
    DiffusionLp,
    DiffusionAlp,
}

impl ModelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::BenchmarkRealization => "benchmark-realization",
            ModelTag::BenchmarkEnsemble => "benchmark-ensemble",
            ModelTag::AtomicMix => "atomic-mix",
            ModelTag::Lp => "LP",
            ModelTag::Alp => "ALP",
            ModelTag::DiffusionAm => "diffusion-AM",
            ModelTag::DiffusionLp => "diffusion-LP",
            ModelTag::DiffusionAlp => "diffusion-ALP",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scalar flux on a 1-D mesh, one value per cell.
#[derive(Clone, Debug)]
pub struct FluxField<T> {
    pub edges: Vec<T>,
    pub scalar_flux: Vec<T>,
    /// Cell-centred angular flux, laid out `cell * n_directions + direction`.
    pub angular_flux: Option<Vec<T>>,
    pub n_directions: usize,
    pub tag: ModelTag,
    pub iterations: usize,
    pub residual: T,
    pub negative_flux_count: usize,
    /// Outflow currents through the left and right boundaries.
    pub outflow: (T, T),
}

impl<T: Real> FluxField<T> {
    pub fn centers(&self) -> Vec<T> {
        self.edges
            .windows(2)
            .map(|e| (e[0] + e[1]) / T::lit(2.0))
            .collect()
    }

    /// Flux at x = 0: mean of the two cells sharing an edge at the origin,
    /// otherwise the value of the cell containing it.
    pub fn value_at_origin(&self) -> T {
        value_at(&self.edges, &self.scalar_flux, T::zero())
    }

    pub fn leakage(&self) -> T {
        self.outflow.0 + self.outflow.1
    }

    /// CSV with a `# model_tag=...` line, then `x,scalar_flux` rows at cell centres.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# model_tag={}", self.tag)?;
        writeln!(out, "x,scalar_flux")?;
        for (x, phi) in self.centers().into_iter().zip(&self.scalar_flux) {
            writeln!(out, "{},{}", fmt17(x), fmt17(*phi))?;
        }
        Ok(())
    }
}

/// Fixed 17-significant-digit scientific formatting used by every CSV writer.
pub fn fmt17<T: Real>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

/// Value of a cell-wise field at `x`, averaging the two neighbours when `x` is an edge.
pub fn value_at<T: Real>(edges: &[T], values: &[T], x: T) -> T {
    let n = values.len();
    if let Some(k) = edges.iter().position(|&e| e == x) {
        if k > 0 && k < n {
            return (values[k - 1] + values[k]) / T::lit(2.0);
        }
        return values[k.min(n - 1)];
    }
    let k = edges.partition_point(|&e| e < x).clamp(1, n) - 1;
    values[k]
}
