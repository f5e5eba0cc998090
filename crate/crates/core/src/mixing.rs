//! Materials, Markovian mixing statistics and slab realizations.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::num::Real;

/// Cross sections and isotropic source of one material.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialSpec<T> {
    pub sigma_t: T,
    pub sigma_s: T,
    pub q: T,
}

impl<T: Real> MaterialSpec<T> {
    pub fn new(sigma_t: T, sigma_s: T, q: T) -> Result<Self> {
        let spec = Self {
            sigma_t,
            sigma_s,
            q,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A void: no interaction and no source.
    pub fn void() -> Self {
        Self {
            sigma_t: T::zero(),
            sigma_s: T::zero(),
            q: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.sigma_t.is_finite() && self.sigma_s.is_finite() && self.q.is_finite();
        if !finite {
            return Err(Error::InvalidMaterial("non-finite value".into()));
        }
        if self.sigma_t < T::zero() || self.sigma_s < T::zero() || self.q < T::zero() {
            return Err(Error::InvalidMaterial(format!(
                "negative data (sigma_t={}, sigma_s={}, q={})",
                self.sigma_t, self.sigma_s, self.q
            )));
        }
        if self.sigma_s > self.sigma_t {
            return Err(Error::InvalidMaterial(format!(
                "sigma_s={} exceeds sigma_t={}",
                self.sigma_s, self.sigma_t
            )));
        }
        Ok(())
    }

    pub fn sigma_a(&self) -> T {
        self.sigma_t - self.sigma_s
    }
}

/// Material label of a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Material {
    One,
    Two,
}

impl Material {
    pub fn other(self) -> Self {
        match self {
            Material::One => Material::Two,
            Material::Two => Material::One,
        }
    }

    /// 1 or 2.
    pub fn index(self) -> u8 {
        match self {
            Material::One => 1,
            Material::Two => 2,
        }
    }

    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            1 => Some(Material::One),
            2 => Some(Material::Two),
            _ => None,
        }
    }
}

/// Mean layer widths of a binary Markovian mixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixingStats<T> {
    lambda1: T,
    lambda2: T,
}

impl<T: Real> MixingStats<T> {
    pub fn new(lambda1: T, lambda2: T) -> Result<Self> {
        let ok = |l: T| l.is_finite() && l > T::zero();
        if !ok(lambda1) || !ok(lambda2) {
            return Err(Error::InvalidMixing(format!(
                "mean widths must be positive and finite (lambda1={lambda1}, lambda2={lambda2})"
            )));
        }
        Ok(Self { lambda1, lambda2 })
    }

    pub fn lambda1(&self) -> T {
        self.lambda1
    }

    pub fn lambda2(&self) -> T {
        self.lambda2
    }

    pub fn lambda(&self, material: Material) -> T {
        match material {
            Material::One => self.lambda1,
            Material::Two => self.lambda2,
        }
    }

    /// Probability of finding each material at a point.
    pub fn volume_fractions(&self) -> (T, T) {
        let total = self.lambda1 + self.lambda2;
        let p1 = self.lambda1 / total;
        (p1, T::one() - p1)
    }

    pub fn volume_fraction(&self, material: Material) -> T {
        let (p1, p2) = self.volume_fractions();
        match material {
            Material::One => p1,
            Material::Two => p2,
        }
    }
}

/// Free-function form of [`MixingStats::volume_fractions`].
pub fn volume_fractions<T: Real>(stats: &MixingStats<T>) -> (T, T) {
    stats.volume_fractions()
}

/// Volume-averaged (atomic mix) data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragedSpec<T> {
    pub sigma_t: T,
    pub sigma_s: T,
    pub sigma_a: T,
    pub q: T,
}

impl<T: Real> AveragedSpec<T> {
    pub fn as_material(&self) -> MaterialSpec<T> {
        MaterialSpec {
            sigma_t: self.sigma_t,
            sigma_s: self.sigma_s,
            q: self.q,
        }
    }
}

pub fn volume_average<T: Real>(
    m1: &MaterialSpec<T>,
    m2: &MaterialSpec<T>,
    stats: &MixingStats<T>,
) -> AveragedSpec<T> {
    let (p1, p2) = stats.volume_fractions();
    let sigma_t = p1 * m1.sigma_t + p2 * m2.sigma_t;
    let sigma_s = p1 * m1.sigma_s + p2 * m2.sigma_s;
    AveragedSpec {
        sigma_t,
        sigma_s,
        sigma_a: sigma_t - sigma_s,
        q: p1 * m1.q + p2 * m2.q,
    }
}

/// Transition-function rescale `sqrt(<Σt>/<Σa>)`.
///
/// Equals one for a pure absorber. Refuses zero absorption.
pub fn eta_factor<T: Real>(avg: &AveragedSpec<T>) -> Result<T> {
    if avg.sigma_a <= T::zero() {
        return Err(Error::ZeroAbsorption);
    }
    Ok((avg.sigma_t / avg.sigma_a).sqrt())
}

/// Default mesh bound: optical thickness at most 0.1 in the densest material and
/// at most a tenth of the shorter mean layer width.
pub fn default_dx_max<T: Real>(m1: &MaterialSpec<T>, m2: &MaterialSpec<T>, stats: &MixingStats<T>) -> T {
    let tenth = T::lit(0.1);
    let geometric = tenth * stats.lambda1().min(stats.lambda2());
    let densest = m1.sigma_t.max(m2.sigma_t);
    if densest > T::zero() {
        geometric.min(tenth / densest)
    } else {
        geometric
    }
}

/// One layer of a realization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment<T> {
    pub material: Material,
    pub width: T,
}

/// One sampled alternating-layer configuration of the slab `[-X, X]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization<T> {
    segments: Vec<Segment<T>>,
    total_width: T,
}

impl<T: Real> Realization<T> {
    /// Builds a realization from explicit layers, checking alternation and positivity.
    pub fn from_segments(segments: Vec<Segment<T>>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("realization has no layers".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.width > T::zero()) || !s.width.is_finite() {
                return Err(Error::InvalidInput(format!("layer {i} has width {}", s.width)));
            }
        }
        if segments.windows(2).any(|w| w[0].material == w[1].material) {
            return Err(Error::InvalidInput(
                "consecutive layers share a material".into(),
            ));
        }
        let total_width = segments.iter().map(|s| s.width).sum();
        Ok(Self {
            segments,
            total_width,
        })
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn total_width(&self) -> T {
        self.total_width
    }

    pub fn half_width(&self) -> T {
        self.total_width / T::lit(2.0)
    }

    /// Total width occupied by `material`.
    pub fn material_width(&self, material: Material) -> T {
        self.segments
            .iter()
            .filter(|s| s.material == material)
            .map(|s| s.width)
            .sum()
    }

    /// Plain-text form: one `material_index width` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            let _ = writeln!(out, "{} {:.16e}", s.material.index(), s.width.to_f64_lossy());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let mut parts = line.split_whitespace();
            let (Some(idx), Some(width), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(format!("expected `index width`, got `{line}`")));
            };
            let material = idx
                .parse::<u8>()
                .ok()
                .and_then(Material::from_index)
                .ok_or_else(|| parse_err(format!("bad material index `{idx}`")))?;
            let width: f64 = width
                .parse()
                .map_err(|e| parse_err(format!("bad width `{width}`: {e}")))?;
            segments.push(Segment {
                material,
                width: T::lit(width),
            });
        }
        Self::from_segments(segments)
    }
}

/// Generator for realization `index` of an ensemble seeded with `base_seed`.
///
/// ChaCha8 keyed by `base_seed`, with `index` selecting the stream, so each
/// realization is reproducible independently of sampling order.
pub fn realization_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// Samples the layer structure of a slab of width `total_width`.
///
/// The first layer's material is drawn with probability p_i, widths are
/// exponential with mean lambda_i, and the last layer is clipped at the
/// right boundary.
pub fn sample_realization<T: Real>(
    stats: &MixingStats<T>,
    total_width: T,
    base_seed: u64,
    index: u64,
) -> Result<Realization<T>> {
    let mut rng = realization_rng(base_seed, index);
    sample_realization_with(stats, total_width, &mut rng)
}

pub fn sample_realization_with<T: Real, R: Rng + ?Sized>(
    stats: &MixingStats<T>,
    total_width: T,
    rng: &mut R,
) -> Result<Realization<T>> {
    if !(total_width > T::zero()) || !total_width.is_finite() {
        return Err(Error::InvalidInput(format!(
            "total width must be positive, got {total_width}"
        )));
    }
    let rate = |m: Material| {
        let lambda = stats.lambda(m).to_f64_lossy();
        Exp::new(1.0 / lambda).expect("positive rate")
    };
    let dists = [rate(Material::One), rate(Material::Two)];
    let p1 = stats.volume_fractions().0.to_f64_lossy();

    let mut material = if rng.random::<f64>() < p1 {
        Material::One
    } else {
        Material::Two
    };
    let mut segments = Vec::new();
    let mut position = T::zero();
    loop {
        let dist = &dists[(material.index() - 1) as usize];
        let width = loop {
            let w = T::lit(dist.sample(rng));
            if w > T::zero() {
                break w;
            }
        };
        if position + width >= total_width {
            segments.push(Segment {
                material,
                width: total_width - position,
            });
            break;
        }
        segments.push(Segment { material, width });
        position = position + width;
        material = material.other();
    }
    Ok(Realization {
        segments,
        total_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn set_b_m20() -> (MaterialSpec<f64>, MaterialSpec<f64>, MixingStats<f64>) {
        let m = 20.0f64;
        let m1 = MaterialSpec::new(1.0, 1.0 - 0.1 / (m * m), 0.2 / (m * m)).unwrap();
        (m1, MaterialSpec::void(), MixingStats::new(1.0, 1.0).unwrap())
    }

    #[test]
    fn volume_fractions_of_table_sets() {
        let (p1, p2) = MixingStats::new(1.0, 1.0).unwrap().volume_fractions();
        assert_eq!((p1, p2), (0.5, 0.5));
        let (p1, p2) = MixingStats::new(1.0, 0.5).unwrap().volume_fractions();
        assert_relative_eq!(p1, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(p2, 1.0 / 3.0, epsilon = 1e-15);
        let (p1, p2) = MixingStats::new(0.5, 1.0).unwrap().volume_fractions();
        assert_relative_eq!(p1, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(p2, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(MixingStats::new(0.0, 1.0).is_err());
        assert!(MixingStats::new(1.0, -2.0).is_err());
        assert!(MaterialSpec::new(1.0, 1.5, 0.0).is_err());
        assert!(MaterialSpec::new(-1.0, 0.0, 0.0).is_err());
        assert!(MaterialSpec::new(1.0, 0.5, -0.1).is_err());
    }

    #[test]
    fn averages_set_b() {
        let (m1, m2, stats) = set_b_m20();
        let avg = volume_average(&m1, &m2, &stats);
        assert_relative_eq!(avg.sigma_t, 0.5, epsilon = 1e-15);
        assert_relative_eq!(avg.sigma_a, 1.25e-4, max_relative = 1e-10);
        assert_relative_eq!(avg.q, 2.5e-4, max_relative = 1e-12);
        let eta = eta_factor(&avg).unwrap();
        assert_relative_eq!(eta, 4000f64.sqrt(), max_relative = 1e-9);
        assert_relative_eq!(eta, 63.2456, epsilon = 1e-4);
    }

    #[test]
    fn averages_set_a_and_identity() {
        let m1 = MaterialSpec::new(1.0, 0.9, 0.3).unwrap();
        let avg = volume_average(&m1, &MaterialSpec::void(), &MixingStats::new(1.0, 0.5).unwrap());
        assert_relative_eq!(avg.sigma_t, 2.0 / 3.0, epsilon = 1e-15);
        let same = volume_average(&m1, &m1, &MixingStats::new(0.7, 1.9).unwrap());
        assert_relative_eq!(same.sigma_t, 1.0, epsilon = 1e-15);
        assert_relative_eq!(same.sigma_s, 0.9, epsilon = 1e-15);
        assert_relative_eq!(same.q, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn eta_values() {
        let pure = AveragedSpec {
            sigma_t: 0.5,
            sigma_s: 0.0,
            sigma_a: 0.5,
            q: 0.1,
        };
        assert_eq!(eta_factor(&pure).unwrap(), 1.0);
        let m1 = MaterialSpec::new(1.0, 0.99, 0.2).unwrap();
        let avg = volume_average(&m1, &MaterialSpec::void(), &MixingStats::new(1.0, 1.0).unwrap());
        assert_relative_eq!(eta_factor(&avg).unwrap(), 10.0, max_relative = 1e-12);
        let no_abs = AveragedSpec {
            sigma_t: 0.5,
            sigma_s: 0.5,
            sigma_a: 0.0,
            q: 0.1,
        };
        assert!(matches!(eta_factor(&no_abs), Err(Error::ZeroAbsorption)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let stats = MixingStats::new(1.0, 0.5).unwrap();
        let a = sample_realization(&stats, 40.0f64, 7, 3).unwrap();
        let b = sample_realization(&stats, 40.0f64, 7, 3).unwrap();
        let c = sample_realization(&stats, 40.0f64, 7, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let stats = MixingStats::new(1.0, 1.0).unwrap();
        let r = sample_realization(&stats, 40.0f64, 11, 0).unwrap();
        let back = Realization::<f64>::from_text(&r.to_text()).unwrap();
        assert_eq!(back.segments(), r.segments());
    }

    #[test]
    fn text_parse_errors() {
        assert!(Realization::<f64>::from_text("3 1.0\n").is_err());
        assert!(Realization::<f64>::from_text("1 1.0\n1 2.0\n").is_err());
        assert!(Realization::<f64>::from_text("1 abc\n").is_err());
        assert!(Realization::<f64>::from_text("").is_err());
    }

    #[test]
    fn exponential_mean_width() {
        let stats = MixingStats::new(1.0, 1.0).unwrap();
        let (mut sum, mut count, mut segments) = (0.0, 0usize, 0usize);
        let n = 10_000;
        for k in 0..n {
            let r = sample_realization(&stats, 40.0f64, 2024, k).unwrap();
            let segs = r.segments();
            segments += segs.len();
            for s in &segs[..segs.len() - 1] {
                if s.material == Material::One {
                    sum += s.width;
                    count += 1;
                }
            }
        }
        let mean = sum / count as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean width {mean}");
        let per = segments as f64 / n as f64;
        // 40 unit-mean layers plus the one clipped at the boundary.
        assert!((per - 41.0).abs() < 1.0, "segments per realization {per}");
    }

    #[test]
    fn empirical_volume_fraction_set_a() {
        let stats = MixingStats::new(1.0, 0.5).unwrap();
        let n = 10_000;
        let fracs: Vec<f64> = (0..n)
            .map(|k| {
                let r = sample_realization(&stats, 30.0f64, 99, k).unwrap();
                r.material_width(Material::One) / r.total_width()
            })
            .collect();
        let mean = fracs.iter().sum::<f64>() / n as f64;
        let var = fracs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - 2.0 / 3.0).abs() < 0.02 * 2.0 / 3.0);
        assert!((mean - 2.0 / 3.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    proptest! {
        #[test]
        fn realization_invariants(seed in any::<u64>(), l1 in 0.05f64..3.0, l2 in 0.05f64..3.0, width in 0.1f64..80.0) {
            let stats = MixingStats::new(l1, l2).unwrap();
            let r = sample_realization(&stats, width, seed, 0).unwrap();
            let segs = r.segments();
            prop_assert!(segs.iter().all(|s| s.width > 0.0));
            prop_assert!(segs.windows(2).all(|w| w[0].material != w[1].material));
            let sum: f64 = segs.iter().map(|s| s.width).sum();
            prop_assert!((sum - width).abs() <= 4.0 * f64::EPSILON * width);
            prop_assert_eq!(r.total_width(), width);
        }

        #[test]
        fn eta_is_scale_invariant(t in 0.01f64..10.0, frac in 0.001f64..1.0, k in 0.001f64..1000.0) {
            let a = AveragedSpec { sigma_t: t, sigma_s: t * (1.0 - frac), sigma_a: t * frac, q: 0.0 };
            let b = AveragedSpec { sigma_t: k * t, sigma_s: k * t * (1.0 - frac), sigma_a: k * t * frac, q: 0.0 };
            let (ea, eb) = (eta_factor(&a).unwrap(), eta_factor(&b).unwrap());
            prop_assert!((ea - eb).abs() <= 1e-12 * ea);
            prop_assert!(ea >= 1.0);
        }
    }
}
