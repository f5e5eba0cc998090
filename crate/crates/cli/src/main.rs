use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use stochslab::report::{
    convergence_study, resolve_problem, run_models, solve_model, write_model_output, write_table2, write_table4, Model,
    OneOrMany, ProblemSet, RunConfig, SetParam,
};
use stochslab::sn::Scheme;

/// Benchmarks and reduced models for particle transport in binary Markovian slabs.
#[derive(Parser, Debug)]
#[command(name = "stochslab", version)]
struct Cli {
    /// JSON file with keys mirroring the flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one model on one problem.
    Solve(SolveArgs),
    /// Diffusive table: benchmark, LP and ALP at x = 0.
    Table2(TableArgs),
    /// Non-diffusive table: benchmark, LP, ALP and atomic mix at x = 0.
    Table4(TableArgs),
    /// LP and ALP transport against their diffusion limits for increasing M.
    Converge(ConvergeArgs),
    /// Benchmark ensemble only.
    Ensemble(EnsembleArgs),
}

#[derive(Args, Debug, Default)]
struct Numerics {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dx_max: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Gauss-Legendre order (even).
    #[arg(long)]
    quad: Option<usize>,
    /// `direct` (banded elimination) or `source-iteration`.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    #[arg(long)]
    grid_cells: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct Stopping {
    /// Target relative half-width of the confidence interval at x = 0.
    #[arg(long)]
    ci: Option<f64>,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    min_n: Option<usize>,
    #[arg(long)]
    max_n: Option<usize>,
    /// Require the target at every grid point.
    #[arg(long)]
    ci_everywhere: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    set: Option<String>,
    #[arg(long = "M")]
    m: Option<u32>,
    /// Scattering choice 1-3 for sets D-F.
    #[arg(long)]
    choice: Option<usize>,
    /// benchmark, lp, alp, am, diff-am, diff-lp or diff-alp.
    #[arg(long)]
    model: Option<String>,
    /// Transition rescale for lp/alp.
    #[arg(long)]
    eta: Option<f64>,
    #[command(flatten)]
    numerics: Numerics,
    #[command(flatten)]
    stopping: Stopping,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[arg(long, value_delimiter = ',')]
    sets: Option<Vec<String>>,
    #[arg(long = "M", value_delimiter = ',')]
    m: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    choice: Option<Vec<usize>>,
    /// Skip the ensemble benchmark (deterministic columns only).
    #[arg(long)]
    no_benchmark: bool,
    #[command(flatten)]
    numerics: Numerics,
    #[command(flatten)]
    stopping: Stopping,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[arg(long)]
    set: Option<String>,
    #[arg(long = "M", value_delimiter = ',')]
    m: Option<Vec<u32>>,
    #[command(flatten)]
    numerics: Numerics,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[arg(long)]
    set: Option<String>,
    #[arg(long = "M")]
    m: Option<u32>,
    #[arg(long)]
    choice: Option<usize>,
    #[command(flatten)]
    numerics: Numerics,
    #[command(flatten)]
    stopping: Stopping,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    match s {
        "direct" => Ok(Scheme::Direct),
        "source-iteration" | "si" => Ok(Scheme::SourceIteration),
        other => Err(format!("unknown scheme {other:?} (direct, source-iteration)")),
    }
}

fn path_string(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.to_string_lossy().into_owned())
}

impl Numerics {
    fn apply(self, rc: &mut RunConfig) {
        rc.seed = self.seed;
        rc.dx_max = self.dx_max;
        rc.tol = self.tol;
        rc.max_iters = self.max_iters;
        rc.quad = self.quad;
        rc.scheme = self.scheme;
        rc.grid_cells = self.grid_cells;
    }
}

impl Stopping {
    fn apply(self, rc: &mut RunConfig) {
        rc.ci = self.ci;
        rc.confidence = self.confidence;
        rc.min_n = self.min_n;
        rc.max_n = self.max_n;
        rc.ci_everywhere = self.ci_everywhere.then_some(true);
        rc.workers = self.workers;
        rc.batch = self.batch;
    }
}

/// Flags as a config layer, so they can be laid over the file.
fn flags(command: Command) -> (&'static str, RunConfig) {
    let mut rc = RunConfig::default();
    let name = match command {
        Command::Solve(a) => {
            rc.set = a.set;
            rc.m = a.m.map(OneOrMany::One);
            rc.choice = a.choice.map(OneOrMany::One);
            rc.model = a.model;
            rc.eta = a.eta;
            rc.out = path_string(a.out);
            a.numerics.apply(&mut rc);
            a.stopping.apply(&mut rc);
            "solve"
        }
        Command::Table2(a) => {
            table_flags(a, &mut rc);
            "table2"
        }
        Command::Table4(a) => {
            table_flags(a, &mut rc);
            "table4"
        }
        Command::Converge(a) => {
            rc.set = a.set;
            rc.m = a.m.map(OneOrMany::Many);
            rc.out = path_string(a.out);
            a.numerics.apply(&mut rc);
            "converge"
        }
        Command::Ensemble(a) => {
            rc.set = a.set;
            rc.m = a.m.map(OneOrMany::One);
            rc.choice = a.choice.map(OneOrMany::One);
            rc.out = path_string(a.out);
            a.numerics.apply(&mut rc);
            a.stopping.apply(&mut rc);
            "ensemble"
        }
    };
    (name, rc)
}

fn table_flags(a: TableArgs, rc: &mut RunConfig) {
    rc.sets = a.sets.map(OneOrMany::Many);
    rc.m = a.m.map(OneOrMany::Many);
    rc.choice = a.choice.map(OneOrMany::Many);
    rc.no_benchmark = a.no_benchmark.then_some(true);
    rc.out = path_string(a.out);
    a.numerics.apply(rc);
    a.stopping.apply(rc);
}

fn out_dir(rc: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(rc.out.as_deref().context("--out is required")?);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn run(name: &str, rc: RunConfig) -> Result<()> {
    let out = out_dir(&rc)?;
    match name {
        "solve" => {
            let model: Model = rc.model.as_deref().context("--model is required")?.parse()?;
            let cfg = rc.problem()?;
            info!("{}: {model}", cfg.label());
            let output = solve_model(&cfg, model, rc.eta)?;
            write_model_output(&output, model, &out)?;
            println!("{} {model} phi(0)={:.6e}", cfg.label(), output.value_at_origin());
        }
        "ensemble" => {
            let cfg = rc.problem()?;
            let output = solve_model(&cfg, Model::Benchmark, None)?;
            write_model_output(&output, Model::Benchmark, &out)?;
            if let stochslab::report::ModelOutput::Benchmark(stats) = &output {
                println!("{} {}", cfg.label(), stats.summary_line());
            }
        }
        "table2" => {
            let sets = rc.problem_sets(&[ProblemSet::A, ProblemSet::B, ProblemSet::C])?;
            let ms = rc.m.as_ref().map(OneOrMany::to_vec).unwrap_or_else(|| vec![20, 40, 60]);
            let knobs = rc.knobs();
            let mut rows = Vec::new();
            for set in sets {
                if !set.is_diffusive() {
                    bail!("table2 covers the diffusive sets A-C, got {set}");
                }
                for &m in &ms {
                    let cfg = resolve_problem(set, SetParam::Layers(m))?.with_knobs(knobs);
                    let row = run_models(&cfg, !rc.no_benchmark.unwrap_or(false))?;
                    rows.push((cfg, row));
                }
            }
            write_table2(&rows, &knobs, &out)?;
            print_file(&out.join("table2_rounded.csv"))?;
        }
        "table4" => {
            let sets = rc.problem_sets(&[ProblemSet::D, ProblemSet::E, ProblemSet::F])?;
            let choices = rc.choice.as_ref().map(OneOrMany::to_vec).unwrap_or_else(|| vec![1, 2, 3]);
            let knobs = rc.knobs();
            let mut rows = Vec::new();
            for set in sets {
                if set.is_diffusive() {
                    bail!("table4 covers the non-diffusive sets D-F, got {set}");
                }
                for &c in &choices {
                    let cfg = resolve_problem(set, SetParam::Choice(c))?.with_knobs(knobs);
                    let row = run_models(&cfg, !rc.no_benchmark.unwrap_or(false))?;
                    rows.push((cfg, row));
                }
            }
            write_table4(&rows, &knobs, &out)?;
            print_file(&out.join("table4_rounded.csv"))?;
        }
        "converge" => {
            let set: ProblemSet = rc.set.as_deref().unwrap_or("B").parse()?;
            let ms = rc.m.as_ref().map(OneOrMany::to_vec).unwrap_or_else(|| vec![20, 40, 60]);
            convergence_study(set, &ms, &rc.knobs(), Some(&out))?;
            print_file(&out.join("converge.csv"))?;
        }
        other => unreachable!("unknown command {other}"),
    }
    Ok(())
}

fn print_file(path: &Path) -> Result<()> {
    print!("{}", std::fs::read_to_string(path)?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(path) => RunConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    let (name, flag_layer) = flags(cli.command);
    run(name, file.merge(flag_layer))
}
