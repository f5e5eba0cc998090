//! Problem registry, model orchestration and table/figure output.
//!
//! Works in `f64`; the numerical modules stay generic.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::diffusion::{solve_diffusion_analytic, AnalyticDiffusion, DiffusionProblem};
use crate::ensemble::{
    map_to_grid, relative_error, relative_error_scalar, run_ensemble, EnsembleConfig, EnsembleStats, ReportingGrid,
    StoppingRule,
};
use crate::error::{Error, Result};
use crate::lp::{solve_lp_with, LpProblem, LpSolution};
use crate::mixing::{default_dx_max, volume_average, AveragedSpec, MaterialSpec, MixingStats};
use crate::sn::{fmt17, gauss_legendre, solve, value_at, FluxField, Mesh, ModelTag, Quadrature, Scheme, SolveOptions};

/// The six standard problem families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemSet {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl ProblemSet {
    pub const ALL: [ProblemSet; 6] = [Self::A, Self::B, Self::C, Self::D, Self::E, Self::F];

    pub fn is_diffusive(self) -> bool {
        matches!(self, Self::A | Self::B | Self::C)
    }

    /// Mean layer widths (λ1, λ2).
    pub fn lambdas(self) -> (f64, f64) {
        match self {
            Self::A => (1.0, 0.5),
            Self::C => (0.5, 1.0),
            _ => (1.0, 1.0),
        }
    }

    /// Scattering cross sections of material 1 for the three choices of a non-diffusive set.
    pub fn sigma_s1_choices(self) -> Option<[f64; 3]> {
        match self {
            Self::D => Some([0.99, 0.95, 0.9]),
            Self::E => Some([0.7, 0.5, 0.3]),
            Self::F => Some([0.1, 0.05, 0.0]),
            _ => None,
        }
    }

    /// Figure numbers: transport vs diffusion (A-C), transport vs benchmark (A-C), error profiles (D-F).
    pub fn figure(self, kind: FigureKind) -> Option<u32> {
        let k = match self {
            Self::A | Self::D => 0,
            Self::B | Self::E => 1,
            Self::C | Self::F => 2,
        };
        match (kind, self.is_diffusive()) {
            (FigureKind::Convergence, true) => Some(2 + k),
            (FigureKind::Benchmark, true) => Some(5 + k),
            (FigureKind::ErrorProfile, false) => Some(8 + k),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureKind {
    Convergence,
    Benchmark,
    ErrorProfile,
}

impl fmt::Display for ProblemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ProblemSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            "F" => Ok(Self::F),
            other => Err(Error::InvalidInput(format!("unknown problem set {other:?} (expected A-F)"))),
        }
    }
}

/// Which member of a set: layer count `M` for A-C, scattering choice 1-3 for D-F.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SetParam {
    Layers(u32),
    Choice(usize),
}

/// Numerical settings shared by every model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Knobs {
    pub quad_order: usize,
    /// Defaults to [`default_dx_max`] of the problem.
    pub dx_max: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub scheme: Scheme,
    pub base_seed: u64,
    pub grid_cells: usize,
    pub stopping: StoppingRule,
    pub batch: usize,
    pub workers: usize,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            quad_order: 16,
            dx_max: None,
            tol: 1e-8,
            max_iters: 100_000,
            scheme: Scheme::Direct,
            base_seed: 20_130_401,
            grid_cells: 200,
            stopping: StoppingRule::default(),
            batch: 64,
            workers: 1,
        }
    }
}

/// Two materials of a user-defined problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomProblem {
    pub sigma_t1: f64,
    pub sigma_s1: f64,
    pub q1: f64,
    #[serde(default)]
    pub sigma_t2: f64,
    #[serde(default)]
    pub sigma_s2: f64,
    #[serde(default)]
    pub q2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub half_width: f64,
}

/// Fully scaled problem ready for every model.
#[derive(Clone, Debug)]
pub struct ProblemConfig {
    pub set: Option<ProblemSet>,
    pub param: Option<SetParam>,
    pub m1: MaterialSpec<f64>,
    pub m2: MaterialSpec<f64>,
    pub stats: MixingStats<f64>,
    pub half_width: f64,
    pub knobs: Knobs,
}

/// Builds a standard problem. A-C take `Layers(M)`, D-F take `Choice(1..=3)`.
pub fn resolve_problem(set: ProblemSet, param: SetParam) -> Result<ProblemConfig> {
    let (l1, l2) = set.lambdas();
    let stats = MixingStats::new(l1, l2)?;
    let (m1, half_width) = match (set.sigma_s1_choices(), param) {
        (None, SetParam::Layers(m)) if m > 0 => {
            let m2 = f64::from(m) * f64::from(m);
            let sigma_t = 1.0;
            let sigma_a = 0.1 / m2;
            (MaterialSpec::new(sigma_t, sigma_t - sigma_a, 0.2 / m2)?, (l1 + l2) * f64::from(m) / 2.0)
        }
        (Some(choices), SetParam::Choice(c)) if (1..=3).contains(&c) => {
            (MaterialSpec::new(1.0, choices[c - 1], 0.2)?, 20.0)
        }
        _ => {
            return Err(Error::InvalidInput(format!(
                "set {set} does not accept {param:?} (A-C need M > 0, D-F a choice 1-3)"
            )))
        }
    };
    Ok(ProblemConfig {
        set: Some(set),
        param: Some(param),
        m1,
        m2: MaterialSpec::void(),
        stats,
        half_width,
        knobs: Knobs::default(),
    })
}

pub fn resolve_custom(p: &CustomProblem) -> Result<ProblemConfig> {
    if !(p.half_width > 0.0) {
        return Err(Error::InvalidInput(format!("half width must be positive, got {}", p.half_width)));
    }
    Ok(ProblemConfig {
        set: None,
        param: None,
        m1: MaterialSpec::new(p.sigma_t1, p.sigma_s1, p.q1)?,
        m2: MaterialSpec::new(p.sigma_t2, p.sigma_s2, p.q2)?,
        stats: MixingStats::new(p.lambda1, p.lambda2)?,
        half_width: p.half_width,
        knobs: Knobs::default(),
    })
}

impl ProblemConfig {
    pub fn with_knobs(mut self, knobs: Knobs) -> Self {
        self.knobs = knobs;
        self
    }

    pub fn label(&self) -> String {
        match (self.set, self.param) {
            (Some(s), Some(SetParam::Layers(m))) => format!("{s} M={m}"),
            (Some(s), Some(SetParam::Choice(_))) => format!("{s} sigma_s1={}", self.m1.sigma_s),
            _ => "custom".to_string(),
        }
    }

    /// File-name friendly label, e.g. `B_M20` or `D_ss0.99`.
    pub fn slug(&self) -> String {
        match (self.set, self.param) {
            (Some(s), Some(SetParam::Layers(m))) => format!("{s}_M{m}"),
            (Some(s), Some(SetParam::Choice(_))) => format!("{s}_ss{}", self.m1.sigma_s),
            _ => "custom".to_string(),
        }
    }

    pub fn is_diffusive(&self) -> bool {
        self.set.is_some_and(ProblemSet::is_diffusive)
    }

    pub fn dx_max(&self) -> f64 {
        self.knobs
            .dx_max
            .unwrap_or_else(|| default_dx_max(&self.m1, &self.m2, &self.stats))
    }

    pub fn average(&self) -> AveragedSpec<f64> {
        volume_average(&self.m1, &self.m2, &self.stats)
    }

    pub fn quadrature(&self) -> Result<Quadrature<f64>> {
        gauss_legendre(self.knobs.quad_order)
    }

    pub fn solve_options(&self) -> SolveOptions<f64> {
        SolveOptions {
            tol: self.knobs.tol,
            max_iters: self.knobs.max_iters,
            keep_angular: false,
        }
    }

    pub fn grid(&self) -> Result<ReportingGrid<f64>> {
        ReportingGrid::uniform(self.half_width, self.knobs.grid_cells)
    }

    pub fn ensemble_config(&self) -> EnsembleConfig<f64> {
        EnsembleConfig {
            m1: self.m1,
            m2: self.m2,
            stats: self.stats,
            half_width: self.half_width,
            quad_order: self.knobs.quad_order,
            dx_max: self.dx_max(),
            scheme: self.knobs.scheme,
            solve: self.solve_options(),
            base_seed: self.knobs.base_seed,
            grid_cells: self.knobs.grid_cells,
            stopping: self.knobs.stopping,
            batch: self.knobs.batch,
        }
    }
}

/// Models selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Benchmark,
    Lp,
    Alp,
    Am,
    DiffAm,
    DiffLp,
    DiffAlp,
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "benchmark" => Self::Benchmark,
            "lp" => Self::Lp,
            "alp" => Self::Alp,
            "am" => Self::Am,
            "diff-am" => Self::DiffAm,
            "diff-lp" => Self::DiffLp,
            "diff-alp" => Self::DiffAlp,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown model {other:?} (benchmark, lp, alp, am, diff-am, diff-lp, diff-alp)"
                )))
            }
        })
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Benchmark => "benchmark",
            Self::Lp => "lp",
            Self::Alp => "alp",
            Self::Am => "am",
            Self::DiffAm => "diff-am",
            Self::DiffLp => "diff-lp",
            Self::DiffAlp => "diff-alp",
        })
    }
}

/// Result of one model run.
#[derive(Clone, Debug)]
pub enum ModelOutput {
    Benchmark(EnsembleStats<f64>),
    Lp(LpSolution<f64>),
    Transport(FluxField<f64>),
    Diffusion {
        solution: AnalyticDiffusion<f64>,
        /// Cells on which the profile is reported.
        edges: Vec<f64>,
    },
}

impl ModelOutput {
    pub fn tag(&self) -> ModelTag {
        match self {
            Self::Benchmark(_) => ModelTag::BenchmarkEnsemble,
            Self::Lp(s) => s.tag,
            Self::Transport(f) => f.tag,
            Self::Diffusion { solution, .. } => solution.problem.tag,
        }
    }

    pub fn value_at_origin(&self) -> f64 {
        match self {
            Self::Benchmark(s) => s.value_at_origin(),
            Self::Lp(s) => s.value_at_origin(),
            Self::Transport(f) => f.value_at_origin(),
            Self::Diffusion { solution, .. } => solution.value_at_origin(),
        }
    }

    /// Scalar flux averaged onto the reporting grid (diffusion: sampled at cell centres).
    pub fn on_grid(&self, grid: &ReportingGrid<f64>) -> Vec<f64> {
        match self {
            Self::Benchmark(s) if s.grid == *grid => s.mean().to_vec(),
            Self::Benchmark(s) => map_to_grid(s.grid.edges(), s.mean(), grid),
            Self::Lp(s) => map_to_grid(&s.edges, &s.mean_scalar_flux, grid),
            Self::Transport(f) => map_to_grid(&f.edges, &f.scalar_flux, grid),
            Self::Diffusion { solution, .. } => grid.centers().into_iter().map(|x| solution.value(x)).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self {
            Self::Benchmark(s) => s.write_csv(out),
            Self::Lp(s) => s.write_csv(out),
            Self::Transport(f) => f.write_csv(out),
            Self::Diffusion { solution, edges } => {
                for line in solution.problem.coefficients_report().lines() {
                    writeln!(out, "# {line}")?;
                }
                writeln!(out, "x,scalar_flux")?;
                for e in edges.windows(2) {
                    let x = (e[0] + e[1]) / 2.0;
                    writeln!(out, "{},{}", fmt17(x), fmt17(solution.value(x)))?;
                }
                Ok(())
            }
        }
    }
}

/// Runs one model. `eta` overrides the transition rescale of `lp`/`alp`.
pub fn solve_model(cfg: &ProblemConfig, model: Model, eta: Option<f64>) -> Result<ModelOutput> {
    let name = model.to_string();
    solve_model_inner(cfg, model, eta).map_err(|e| e.in_model(name))
}

fn solve_model_inner(cfg: &ProblemConfig, model: Model, eta: Option<f64>) -> Result<ModelOutput> {
    let dx = cfg.dx_max();
    let x = cfg.half_width;
    let lp_problem = |adjusted: bool| -> Result<LpProblem<f64>> {
        let quad = cfg.quadrature()?;
        match eta {
            Some(e) => LpProblem::with_eta(cfg.m1, cfg.m2, cfg.stats, x, e, quad, dx),
            None if adjusted => LpProblem::adjusted(cfg.m1, cfg.m2, cfg.stats, x, quad, dx),
            None => LpProblem::standard(cfg.m1, cfg.m2, cfg.stats, x, quad, dx),
        }
    };
    let diffusion = |p: DiffusionProblem<f64>| -> Result<ModelOutput> {
        let mesh = Mesh::homogeneous(&MaterialSpec::void(), x, dx)?;
        Ok(ModelOutput::Diffusion {
            solution: solve_diffusion_analytic(&p)?,
            edges: mesh.edges().to_vec(),
        })
    };
    match model {
        Model::Benchmark => Ok(ModelOutput::Benchmark(run_ensemble(
            &cfg.ensemble_config(),
            cfg.knobs.workers,
        )?)),
        Model::Lp | Model::Alp => {
            let p = lp_problem(model == Model::Alp)?;
            Ok(ModelOutput::Lp(solve_lp_with(&p, cfg.knobs.scheme, &cfg.solve_options())?))
        }
        Model::Am => {
            let mesh = Mesh::homogeneous(&cfg.average().as_material(), x, dx)?;
            let mut field = solve(&mesh, &cfg.quadrature()?, cfg.knobs.scheme, &cfg.solve_options())?;
            field.tag = ModelTag::AtomicMix;
            Ok(ModelOutput::Transport(field))
        }
        Model::DiffAm => diffusion(DiffusionProblem::atomic_mix(&cfg.average(), x)?),
        Model::DiffAlp => diffusion(DiffusionProblem::adjusted(&cfg.average(), x)?),
        Model::DiffLp => diffusion(DiffusionProblem::standard_lp(&cfg.m1, &cfg.m2, &cfg.stats, x)?),
    }
}

/// All models of one table entry.
#[derive(Clone, Debug)]
pub struct ModelRow {
    pub label: String,
    pub set: Option<ProblemSet>,
    pub param: Option<SetParam>,
    pub sigma_s1: f64,
    pub grid: ReportingGrid<f64>,
    pub benchmark: Option<EnsembleStats<f64>>,
    pub lp: ModelOutput,
    pub alp: ModelOutput,
    pub am: ModelOutput,
    /// Diffusion limits (LP, ALP) for diffusive sets.
    pub diffusion: Option<(ModelOutput, ModelOutput)>,
}

impl ModelRow {
    pub fn phi_benchmark(&self) -> Option<f64> {
        self.benchmark.as_ref().map(EnsembleStats::value_at_origin)
    }

    pub fn error_at_origin(&self, model: &ModelOutput) -> Option<f64> {
        relative_error_scalar(model.value_at_origin(), self.phi_benchmark()?)
    }

    pub fn err_lp(&self) -> Option<f64> {
        self.error_at_origin(&self.lp)
    }

    pub fn err_alp(&self) -> Option<f64> {
        self.error_at_origin(&self.alp)
    }

    pub fn err_am(&self) -> Option<f64> {
        self.error_at_origin(&self.am)
    }

    /// Relative error profile of a model on the reporting grid.
    pub fn error_profile(&self, model: &ModelOutput) -> Option<Vec<Option<f64>>> {
        let b = self.benchmark.as_ref()?;
        relative_error(&model.on_grid(&self.grid), b).ok()
    }
}

/// Benchmark (optional), LP, ALP and atomic mix; diffusion limits for diffusive sets.
pub fn run_models(cfg: &ProblemConfig, with_benchmark: bool) -> Result<ModelRow> {
    let label = cfg.label();
    info!("{label}: deterministic models");
    let lp = solve_model(cfg, Model::Lp, None)?;
    let alp = solve_model(cfg, Model::Alp, None)?;
    let am = solve_model(cfg, Model::Am, None)?;
    let diffusion = if cfg.is_diffusive() {
        Some((solve_model(cfg, Model::DiffLp, None)?, solve_model(cfg, Model::DiffAlp, None)?))
    } else {
        None
    };
    let benchmark = if with_benchmark {
        info!("{label}: benchmark ensemble");
        match solve_model(cfg, Model::Benchmark, None)? {
            ModelOutput::Benchmark(s) => {
                info!("{label}: {}", s.summary_line());
                Some(s)
            }
            _ => unreachable!("benchmark model returns ensemble statistics"),
        }
    } else {
        None
    };
    Ok(ModelRow {
        label,
        set: cfg.set,
        param: cfg.param,
        sigma_s1: cfg.m1.sigma_s,
        grid: cfg.grid()?,
        benchmark,
        lp,
        alp,
        am,
        diffusion,
    })
}

/// Round half to even at `decimals` places.
pub fn round_half_even(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round_ties_even() / scale
}

/// Decimal places printed for a flux entry: three from 10 upwards, four below.
pub fn printed_decimals(x: f64) -> usize {
    if x.abs() >= 10.0 {
        3
    } else {
        4
    }
}

fn printed(x: Option<f64>, decimals: usize) -> String {
    match x {
        Some(v) => format!("{:.*}", decimals, round_half_even(v, decimals as i32)),
        None => String::new(),
    }
}

fn printed_flux(x: Option<f64>) -> String {
    printed(x, x.map_or(4, printed_decimals))
}

fn printed_percent(x: Option<f64>) -> String {
    printed(x.map(|v| 100.0 * v), 2)
}

fn full(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Numerical settings and per-entry provenance written next to each table.
#[derive(Clone, Debug, Serialize)]
pub struct TableMetadata {
    pub quad_order: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub scheme: Scheme,
    pub base_seed: u64,
    pub grid_cells: usize,
    pub stopping: StoppingRule,
    pub entries: Vec<EntryMetadata>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntryMetadata {
    pub label: String,
    pub dx_max: f64,
    pub half_width: f64,
    pub eta_alp: f64,
    pub n_realizations: Option<usize>,
    pub ci_relative_halfwidth: Option<f64>,
    pub converged: Option<bool>,
    pub model_tags: Vec<String>,
}

impl TableMetadata {
    pub fn new(knobs: &Knobs) -> Self {
        Self {
            quad_order: knobs.quad_order,
            tol: knobs.tol,
            max_iters: knobs.max_iters,
            scheme: knobs.scheme,
            base_seed: knobs.base_seed,
            grid_cells: knobs.grid_cells,
            stopping: knobs.stopping,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, cfg: &ProblemConfig, row: &ModelRow) {
        let mut tags = vec![row.lp.tag(), row.alp.tag(), row.am.tag()];
        if let Some((a, b)) = &row.diffusion {
            tags.extend([a.tag(), b.tag()]);
        }
        if row.benchmark.is_some() {
            tags.push(ModelTag::BenchmarkEnsemble);
        }
        let eta = match &row.alp {
            ModelOutput::Lp(s) => s.eta,
            _ => f64::NAN,
        };
        self.entries.push(EntryMetadata {
            label: row.label.clone(),
            dx_max: cfg.dx_max(),
            half_width: cfg.half_width,
            eta_alp: eta,
            n_realizations: row.benchmark.as_ref().map(|b| b.n_realizations),
            ci_relative_halfwidth: row.benchmark.as_ref().map(|b| b.ci_relative_halfwidth),
            converged: row.benchmark.as_ref().map(|b| b.converged),
            model_tags: tags.into_iter().map(|t| t.to_string()).collect(),
        });
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }
}

fn write_two_column<W: Write>(mut out: W, header: &str, x: &[f64], y: &[f64]) -> Result<()> {
    writeln!(out, "{header}")?;
    for (a, b) in x.iter().zip(y) {
        writeln!(out, "{},{}", fmt17(*a), fmt17(*b))?;
    }
    Ok(())
}

fn write_profile(path: &Path, grid: &ReportingGrid<f64>, values: &[f64]) -> Result<()> {
    write_two_column(create(path)?, "x,scalar_flux", &grid.centers(), values)
}

/// `|Err|` against distance from the origin, averaging the two mirror-image cells.
pub fn folded_abs_error(grid: &ReportingGrid<f64>, err: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    let centers = grid.centers();
    let n = centers.len();
    let mut dist = Vec::new();
    let mut vals = Vec::new();
    for k in n / 2..n {
        let mirror = n - 1 - k;
        let pair: Vec<f64> = [err[k], err[mirror]].iter().flatten().map(|e| e.abs()).collect();
        if !pair.is_empty() {
            dist.push(centers[k].abs());
            vals.push(pair.iter().sum::<f64>() / pair.len() as f64);
        }
    }
    (dist, vals)
}

/// Diffusive table: `table2.csv` (full precision), `table2_rounded.csv`,
/// `table2_meta.json`, and benchmark-comparison profiles `fig5..7_M*_*.csv`.
pub fn write_table2(rows: &[(ProblemConfig, ModelRow)], knobs: &Knobs, out: &Path) -> Result<()> {
    let header = "set,M,phi_benchmark,phi_lp,phi_alp,err_lp,err_alp,ci_relative_halfwidth,n_realizations";
    let mut exact = create(&out.join("table2.csv"))?;
    let mut rounded = create(&out.join("table2_rounded.csv"))?;
    writeln!(exact, "{header}")?;
    writeln!(rounded, "set,M,phi_benchmark,phi_lp,phi_alp,err_lp_percent,err_alp_percent")?;
    let mut meta = TableMetadata::new(knobs);
    for (cfg, row) in rows {
        let set = row.set.map(|s| s.to_string()).unwrap_or_else(|| "custom".into());
        let m = match row.param {
            Some(SetParam::Layers(m)) => m.to_string(),
            _ => String::new(),
        };
        let b = row.benchmark.as_ref();
        writeln!(
            exact,
            "{set},{m},{},{},{},{},{},{},{}",
            full(row.phi_benchmark()),
            fmt17(row.lp.value_at_origin()),
            fmt17(row.alp.value_at_origin()),
            full(row.err_lp()),
            full(row.err_alp()),
            full(b.map(|b| b.ci_relative_halfwidth)),
            b.map(|b| b.n_realizations.to_string()).unwrap_or_default()
        )?;
        writeln!(
            rounded,
            "{set},{m},{},{},{},{},{}",
            printed(row.phi_benchmark(), 4),
            printed(Some(row.lp.value_at_origin()), 4),
            printed(Some(row.alp.value_at_origin()), 4),
            printed_percent(row.err_lp()),
            printed_percent(row.err_alp())
        )?;
        meta.push(cfg, row);
        if let (Some(fig), Some(b)) = (row.set.and_then(|s| s.figure(FigureKind::Benchmark)), b) {
            let stem = format!("fig{fig}_M{m}");
            write_profile(&out.join(format!("{stem}_benchmark.csv")), &row.grid, b.mean())?;
            write_profile(&out.join(format!("{stem}_lp.csv")), &row.grid, &row.lp.on_grid(&row.grid))?;
            write_profile(&out.join(format!("{stem}_alp.csv")), &row.grid, &row.alp.on_grid(&row.grid))?;
        }
    }
    exact.flush()?;
    rounded.flush()?;
    meta.write(&out.join("table2_meta.json"))
}

/// Non-diffusive table: `table4.csv`, `table4_rounded.csv`, `table4_meta.json`,
/// and folded error profiles `fig8..10_ss*_{lp,alp,am}.csv`.
pub fn write_table4(rows: &[(ProblemConfig, ModelRow)], knobs: &Knobs, out: &Path) -> Result<()> {
    let mut exact = create(&out.join("table4.csv"))?;
    let mut rounded = create(&out.join("table4_rounded.csv"))?;
    writeln!(
        exact,
        "set,sigma_s1,phi_benchmark,phi_lp,phi_alp,phi_am,err_lp,err_alp,err_am,ci_relative_halfwidth,n_realizations"
    )?;
    writeln!(
        rounded,
        "set,sigma_s1,phi_benchmark,phi_lp,phi_alp,phi_am,err_lp_percent,err_alp_percent,err_am_percent"
    )?;
    let mut meta = TableMetadata::new(knobs);
    for (cfg, row) in rows {
        let set = row.set.map(|s| s.to_string()).unwrap_or_else(|| "custom".into());
        let b = row.benchmark.as_ref();
        let (lp, alp, am) = (row.lp.value_at_origin(), row.alp.value_at_origin(), row.am.value_at_origin());
        writeln!(
            exact,
            "{set},{},{},{},{},{},{},{},{},{},{}",
            row.sigma_s1,
            full(row.phi_benchmark()),
            fmt17(lp),
            fmt17(alp),
            fmt17(am),
            full(row.err_lp()),
            full(row.err_alp()),
            full(row.err_am()),
            full(b.map(|b| b.ci_relative_halfwidth)),
            b.map(|b| b.n_realizations.to_string()).unwrap_or_default()
        )?;
        writeln!(
            rounded,
            "{set},{},{},{},{},{},{},{},{}",
            row.sigma_s1,
            printed_flux(row.phi_benchmark()),
            printed_flux(Some(lp)),
            printed_flux(Some(alp)),
            printed_flux(Some(am)),
            printed_percent(row.err_lp()),
            printed_percent(row.err_alp()),
            printed_percent(row.err_am())
        )?;
        meta.push(cfg, row);
        if let Some(fig) = row.set.and_then(|s| s.figure(FigureKind::ErrorProfile)) {
            for (name, model) in [("lp", &row.lp), ("alp", &row.alp), ("am", &row.am)] {
                if let Some(err) = row.error_profile(model) {
                    let (d, e) = folded_abs_error(&row.grid, &err);
                    let path = out.join(format!("fig{fig}_ss{}_{name}.csv", row.sigma_s1));
                    write_two_column(create(&path)?, "distance,abs_relative_error", &d, &e)?;
                }
            }
        }
    }
    exact.flush()?;
    rounded.flush()?;
    meta.write(&out.join("table4_meta.json"))
}

/// One row of the transport-versus-diffusion study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub m: u32,
    pub lp_transport: f64,
    pub lp_diffusion: f64,
    pub alp_transport: f64,
    pub alp_diffusion: f64,
}

impl ConvergencePoint {
    pub fn lp_gap(&self) -> f64 {
        (self.lp_transport - self.lp_diffusion).abs() / self.lp_diffusion
    }

    pub fn alp_gap(&self) -> f64 {
        (self.alp_transport - self.alp_diffusion).abs() / self.alp_diffusion
    }
}

/// LP/ALP transport against their diffusion limits for each `M` of a diffusive set.
///
/// With `out`, writes `converge.csv` and profiles `fig2..4_M*_{lp,alp,diff_lp,diff_alp}.csv`.
pub fn convergence_study(set: ProblemSet, ms: &[u32], knobs: &Knobs, out: Option<&Path>) -> Result<Vec<ConvergencePoint>> {
    if !set.is_diffusive() {
        return Err(Error::InvalidInput(format!("set {set} is not diffusive")));
    }
    let mut points = Vec::new();
    for &m in ms {
        let cfg = resolve_problem(set, SetParam::Layers(m))?.with_knobs(*knobs);
        let lp = solve_model(&cfg, Model::Lp, None)?;
        let alp = solve_model(&cfg, Model::Alp, None)?;
        let dlp = solve_model(&cfg, Model::DiffLp, None)?;
        let dalp = solve_model(&cfg, Model::DiffAlp, None)?;
        let point = ConvergencePoint {
            m,
            lp_transport: lp.value_at_origin(),
            lp_diffusion: dlp.value_at_origin(),
            alp_transport: alp.value_at_origin(),
            alp_diffusion: dalp.value_at_origin(),
        };
        info!("{set} M={m}: LP gap {:.3e}, ALP gap {:.3e}", point.lp_gap(), point.alp_gap());
        points.push(point);
        if let (Some(dir), Some(fig)) = (out, set.figure(FigureKind::Convergence)) {
            let grid = cfg.grid()?;
            for (name, model) in [("lp", &lp), ("alp", &alp), ("diff_lp", &dlp), ("diff_alp", &dalp)] {
                write_profile(&dir.join(format!("fig{fig}_M{m}_{name}.csv")), &grid, &model.on_grid(&grid))?;
            }
        }
    }
    if let Some(dir) = out {
        let mut csv = create(&dir.join("converge.csv"))?;
        writeln!(csv, "set,M,lp_transport,lp_diffusion,lp_gap,alp_transport,alp_diffusion,alp_gap")?;
        for p in &points {
            writeln!(
                csv,
                "{set},{},{},{},{},{},{},{}",
                p.m,
                fmt17(p.lp_transport),
                fmt17(p.lp_diffusion),
                fmt17(p.lp_gap()),
                fmt17(p.alp_transport),
                fmt17(p.alp_diffusion),
                fmt17(p.alp_gap())
            )?;
        }
        csv.flush()?;
    }
    Ok(points)
}

/// Writes a single model's output as `<model>.csv` (plus `summary.txt` for the benchmark).
pub fn write_model_output(output: &ModelOutput, model: Model, out: &Path) -> Result<()> {
    let mut csv = create(&out.join(format!("{model}.csv")))?;
    output.write_csv(&mut csv)?;
    csv.flush()?;
    if let ModelOutput::Benchmark(stats) = output {
        let mut s = create(&out.join("summary.txt"))?;
        writeln!(s, "{}", stats.summary_line())?;
        s.flush()?;
    }
    Ok(())
}

/// Value reported in the tables at x = 0 for a grid-mapped profile.
pub fn grid_value_at_origin(grid: &ReportingGrid<f64>, values: &[f64]) -> f64 {
    value_at(grid.edges(), values, 0.0)
}

/// A scalar or a list in a JSON config (`"M": 20` or `"M": [20, 40]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(x) => vec![x.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

/// JSON run configuration. Keys mirror the command-line flags; flags override it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub set: Option<String>,
    pub sets: Option<OneOrMany<String>>,
    #[serde(rename = "M")]
    pub m: Option<OneOrMany<u32>>,
    pub choice: Option<OneOrMany<usize>>,
    pub model: Option<String>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub dx_max: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub quad: Option<usize>,
    pub scheme: Option<Scheme>,
    pub ci: Option<f64>,
    pub confidence: Option<f64>,
    pub min_n: Option<usize>,
    pub max_n: Option<usize>,
    pub ci_everywhere: Option<bool>,
    pub workers: Option<usize>,
    pub batch: Option<usize>,
    pub grid_cells: Option<usize>,
    pub no_benchmark: Option<bool>,
    pub out: Option<String>,
    pub custom: Option<CustomProblem>,
}

macro_rules! take_over {
    ($self:ident, $other:ident; $($field:ident),*) => {
        $( if $other.$field.is_some() { $self.$field = $other.$field; } )*
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: RunConfig) -> Self {
        take_over!(self, other; set, sets, m, choice, model, eta, seed, dx_max, tol, max_iters, quad, scheme,
            ci, confidence, min_n, max_n, ci_everywhere, workers, batch, grid_cells, no_benchmark, out, custom);
        self
    }

    /// Defaults with every given field applied.
    pub fn knobs(&self) -> Knobs {
        let mut k = Knobs::default();
        if let Some(v) = self.quad {
            k.quad_order = v;
        }
        if self.dx_max.is_some() {
            k.dx_max = self.dx_max;
        }
        if let Some(v) = self.tol {
            k.tol = v;
        }
        if let Some(v) = self.max_iters {
            k.max_iters = v;
        }
        if let Some(v) = self.scheme {
            k.scheme = v;
        }
        if let Some(v) = self.seed {
            k.base_seed = v;
        }
        if let Some(v) = self.grid_cells {
            k.grid_cells = v;
        }
        if let Some(v) = self.batch {
            k.batch = v;
        }
        if let Some(v) = self.workers {
            k.workers = v;
        }
        let s = &mut k.stopping;
        if let Some(v) = self.ci {
            s.rel_halfwidth = v;
        }
        if let Some(v) = self.confidence {
            s.confidence = v;
        }
        if let Some(v) = self.min_n {
            s.n_min = v;
        }
        if let Some(v) = self.max_n {
            s.n_max = v;
        }
        if let Some(v) = self.ci_everywhere {
            s.everywhere = v;
        }
        k
    }

    /// The single problem named by `set` plus `M` or `choice`, or `custom`.
    pub fn problem(&self) -> Result<ProblemConfig> {
        let cfg = match (&self.custom, &self.set) {
            (Some(c), None) => resolve_custom(c)?,
            (Some(_), Some(_)) => return Err(Error::InvalidInput("give either set or custom, not both".into())),
            (None, None) => return Err(Error::InvalidInput("no problem set given".into())),
            (None, Some(name)) if name.eq_ignore_ascii_case("custom") => {
                return Err(Error::InvalidInput("set \"custom\" needs a custom block in the config file".into()))
            }
            (None, Some(name)) => {
                let set: ProblemSet = name.parse()?;
                let param = if set.is_diffusive() {
                    let m = self.m.as_ref().map(OneOrMany::to_vec).unwrap_or_default();
                    match m.as_slice() {
                        [m] => SetParam::Layers(*m),
                        _ => return Err(Error::InvalidInput(format!("set {set} needs exactly one M"))),
                    }
                } else {
                    let c = self.choice.as_ref().map(OneOrMany::to_vec).unwrap_or_default();
                    match c.as_slice() {
                        [c] => SetParam::Choice(*c),
                        _ => return Err(Error::InvalidInput(format!("set {set} needs exactly one choice"))),
                    }
                };
                resolve_problem(set, param)?
            }
        };
        Ok(cfg.with_knobs(self.knobs()))
    }

    pub fn problem_sets(&self, default: &[ProblemSet]) -> Result<Vec<ProblemSet>> {
        match &self.sets {
            Some(list) => list
                .to_vec()
                .iter()
                .flat_map(|s| s.split(',').map(str::to_string).collect::<Vec<_>>())
                .map(|s| s.parse())
                .collect(),
            None => Ok(default.to_vec()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diffusive_scaling() {
        let cfg = resolve_problem(ProblemSet::B, SetParam::Layers(20)).unwrap();
        assert!((cfg.m1.sigma_a() - 2.5e-4).abs() < 1e-15);
        assert!((cfg.m1.q - 5.0e-4).abs() < 1e-18);
        assert_eq!(cfg.half_width, 20.0);
        assert!((cfg.average().q - 2.5e-4).abs() < 1e-18);
        let a = resolve_problem(ProblemSet::A, SetParam::Layers(40)).unwrap();
        assert_eq!(a.half_width, 30.0);
        assert_eq!(a.stats.lambda2(), 0.5);
    }

    #[test]
    fn non_diffusive_choices() {
        let d = resolve_problem(ProblemSet::D, SetParam::Choice(1)).unwrap();
        assert_eq!((d.m1.sigma_t, d.m1.sigma_s, d.m1.q, d.half_width), (1.0, 0.99, 0.2, 20.0));
        let f = resolve_problem(ProblemSet::F, SetParam::Choice(3)).unwrap();
        assert_eq!(f.m1.sigma_s, 0.0);
        assert_eq!(crate::mixing::eta_factor(&f.average()).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(resolve_problem(ProblemSet::B, SetParam::Layers(0)).is_err());
        assert!(resolve_problem(ProblemSet::B, SetParam::Choice(1)).is_err());
        assert!(resolve_problem(ProblemSet::E, SetParam::Choice(4)).is_err());
        assert!("G".parse::<ProblemSet>().is_err());
        assert!("diff".parse::<Model>().is_err());
    }

    #[test]
    fn model_names_round_trip() {
        for m in [
            Model::Benchmark,
            Model::Lp,
            Model::Alp,
            Model::Am,
            Model::DiffAm,
            Model::DiffLp,
            Model::DiffAlp,
        ] {
            assert_eq!(m.to_string().parse::<Model>().unwrap(), m);
        }
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(0.08165, 4), 0.0816);
        assert_eq!(round_half_even(0.08175, 4), 0.0818);
        assert_eq!(round_half_even(-0.12685, 4), -0.1268);
        assert_eq!(printed_flux(Some(13.3964)), "13.396");
        assert_eq!(printed_flux(Some(3.80504)), "3.8050");
        assert_eq!(printed_percent(Some(-0.2520)), "-25.20");
    }

    #[test]
    fn config_flags_override_file() {
        let file = RunConfig::from_json(r#"{"set": "B", "M": [20, 40], "tol": 1e-9, "ci": 0.02, "scheme": "source-iteration"}"#)
            .unwrap();
        assert_eq!(file.m.as_ref().unwrap().to_vec(), vec![20, 40]);
        let flags = RunConfig {
            m: Some(OneOrMany::One(60)),
            ..Default::default()
        };
        let merged = file.merge(flags);
        let cfg = merged.problem().unwrap();
        assert_eq!(cfg.half_width, 60.0);
        assert_eq!(cfg.knobs.tol, 1e-9);
        assert_eq!(cfg.knobs.stopping.rel_halfwidth, 0.02);
        assert_eq!(cfg.knobs.scheme, Scheme::SourceIteration);
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn custom_problem_from_json() {
        let rc = RunConfig::from_json(
            r#"{"custom": {"sigma_t1": 2.0, "sigma_s1": 0.5, "q1": 1.0, "lambda1": 0.3, "lambda2": 0.9, "half_width": 4.0}}"#,
        )
        .unwrap();
        let cfg = rc.problem().unwrap();
        assert_eq!(cfg.label(), "custom");
        assert_eq!(cfg.m2, MaterialSpec::void());
        assert!(!cfg.is_diffusive());
    }

    #[test]
    fn folding_averages_mirror_cells() {
        let grid = ReportingGrid::uniform(2.0, 4).unwrap();
        let err = [Some(-0.4), Some(0.1), None, Some(0.2)];
        let (d, e) = folded_abs_error(&grid, &err);
        assert_eq!(d, vec![0.5, 1.5]);
        assert!((e[0] - 0.1).abs() < 1e-15);
        assert!((e[1] - 0.3).abs() < 1e-15);
    }
}
