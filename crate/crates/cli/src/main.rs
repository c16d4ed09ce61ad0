use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use enclosure_fem::assembly::MaterialCoefficients;
use enclosure_fem::benchmarks::{convergence_study, pollution_demo};
use enclosure_fem::enclosure::{
    nearest_bounds, run_on_mesh, sweep_t, Backend, BoundOptions, ProcedureOptions, Side,
    SweepTarget, Termination,
};
use enclosure_fem::mesh::{DomainKind, DomainSpec, Mesh};
use enclosure_fem::{assemble, build_space, generate, io, validate};

const EXIT_MODULE_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "enclosure-fem",
    version,
    about = "Certified eigenfrequency enclosures for 2D Maxwell cavities"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "ENCLOSURE_FEM_THREADS")]
    threads: Option<usize>,

    /// Directory for all output files.
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,

    /// Replay a run from its config echo file instead of parsing a command.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

/// Everything needed to reproduce a run; written next to the outputs.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
struct RunConfig {
    command: Command,
    output_dir: PathBuf,
    threads: Option<usize>,
}

#[derive(Subcommand, Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Run the enclosure procedure on a window (t_up, t_low).
    Enclose(EncloseArgs),
    /// Bound of one eigenvalue at several shifts on a fixed mesh.
    Sweep(SweepArgs),
    /// Enclosure widths on nested refinements and the fitted order.
    Converge(ConvergeArgs),
    /// Compare plain Galerkin eigenvalues with certified enclosures.
    Demo(DemoArgs),
    /// Generate (and optionally validate) a mesh.
    Mesh(MeshArgs),
    /// Write an approximate eigenfield as legacy VTK.
    ExportField(ExportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Enclose(_) => "enclose",
            Command::Sweep(_) => "sweep",
            Command::Converge(_) => "converge",
            Command::Demo(_) => "demo",
            Command::Mesh(_) => "mesh",
            Command::ExportField(_) => "export-field",
        }
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct DomainArgs {
    #[arg(long, default_value = "square")]
    domain: DomainKind,
    /// Cells per pi (square) or per pi/2 (other domains).
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Grade toward the singular point with this local size factor.
    #[arg(long, value_parser = unit_factor)]
    grade: Option<f64>,
    /// Grading point `x,y` (default: the domain's singular point).
    #[arg(long, value_parser = point, requires = "grade")]
    grade_point: Option<[f64; 2]>,
    /// Random displacement of interior vertices, as a fraction of the grid
    /// spacing.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform refinements of the generated mesh before use.
    #[arg(long, default_value_t = 0)]
    refine: usize,
}

impl DomainArgs {
    fn spec(&self) -> DomainSpec {
        let mut s = DomainSpec::new(self.domain, self.n);
        if let Some(rf) = self.grade {
            s = s.graded(self.grade_point.unwrap_or(self.domain.singular_point()), rf);
        }
        if self.jitter > 0.0 {
            s = s.with_jitter(self.jitter, self.seed);
        }
        s
    }

    fn mesh(&self) -> anyhow::Result<Mesh> {
        let mut m = generate(&self.spec())?;
        for _ in 0..self.refine {
            m = enclosure_fem::refine_uniform(&m);
        }
        Ok(m)
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct SolverArgs {
    /// Polynomial order of the Lagrange elements.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=5))]
    r: u8,
    #[arg(long, default_value = "auto")]
    backend: Backend,
    /// Largest dimension accepted by the dense solver.
    #[arg(long, default_value_t = 8000)]
    dense_cap: usize,
}

impl SolverArgs {
    fn bounds(&self) -> BoundOptions {
        BoundOptions {
            backend: self.backend,
            dense_cap: self.dense_cap,
            ..Default::default()
        }
    }

    fn procedure(&self) -> ProcedureOptions {
        ProcedureOptions {
            bounds: self.bounds(),
            ..Default::default()
        }
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct EncloseArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_parser = positive)]
    t_up: f64,
    #[arg(long, value_parser = positive)]
    t_low: f64,
    #[arg(long, default_value_t = 1e-2, value_parser = positive, allow_hyphen_values = true)]
    delta: f64,
    /// Maximum number of uniform refinements.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..))]
    budget: u32,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct SweepArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    side: Side,
    /// Track the j-th eigenfrequency from the bottom.
    #[arg(long, conflicts_with = "l")]
    j: Option<usize>,
    /// Track the l-th bound outward from each shift.
    #[arg(long)]
    l: Option<usize>,
    /// Comma-separated shifts.
    #[arg(long, value_delimiter = ',', required = true, value_parser = positive)]
    t: Vec<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct ConvergeArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_parser = positive)]
    t_up: f64,
    #[arg(long, value_parser = positive)]
    t_low: f64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(3..))]
    levels: u32,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct DemoArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Window `a,b`.
    #[arg(long, value_parser = window)]
    window: [f64; 2],
    #[arg(long, default_value_t = 1e-2, value_parser = positive, allow_hyphen_values = true)]
    delta: f64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    budget: u32,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct MeshArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Check all mesh invariants and write the report.
    #[arg(long)]
    validate: bool,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct ExportArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Export the mode-th eigenfield above the shift.
    #[arg(long, default_value_t = 1)]
    mode: usize,
    /// Shift below the exported eigenfrequency.
    #[arg(long, default_value_t = 0.3, value_parser = positive)]
    t: f64,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be a positive number, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn unit_factor(s: &str) -> Result<f64, String> {
    let v = positive(s)?;
    if v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1], got {v}"))
    }
}

fn pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got {s:?}"));
    }
    let a = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok([a, b])
}

fn point(s: &str) -> Result<[f64; 2], String> {
    pair(s)
}

fn window(s: &str) -> Result<[f64; 2], String> {
    let [a, b] = pair(s)?;
    if 0.0 < a && a < b && b.is_finite() {
        Ok([a, b])
    } else {
        Err(format!("need 0 < a < b, got ({a}, {b})"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match (cli.config, cli.command) {
        (Some(_), Some(_)) => {
            eprintln!("error: --config replays a saved run and takes no subcommand");
            return ExitCode::from(EXIT_USAGE);
        }
        (Some(path), None) => match io::read_json::<RunConfig>(&path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
        },
        (None, Some(command)) => RunConfig {
            command,
            output_dir: cli.output_dir,
            threads: cli.threads,
        },
        (None, None) => {
            eprintln!("error: a subcommand or --config is required (see --help)");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(n) = config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match run(&config) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_MODULE_ERROR)
        }
    }
}

fn run(config: &RunConfig) -> anyhow::Result<u8> {
    let out = &config.output_dir;
    let name = config.command.name();
    io::write_json(out.join(format!("{name}.config.json")), config)?;
    match &config.command {
        Command::Enclose(a) => enclose(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Converge(a) => converge(a, out),
        Command::Demo(a) => demo(a, out),
        Command::Mesh(a) => mesh(a, out),
        Command::ExportField(a) => export_field(a, out),
    }
}

fn check_window(t_up: f64, t_low: f64) -> anyhow::Result<()> {
    if t_up >= t_low {
        bail!("need t_up < t_low, got ({t_up}, {t_low})");
    }
    Ok(())
}

fn enclose(a: &EncloseArgs, out: &Path) -> anyhow::Result<u8> {
    check_window(a.t_up, a.t_low)?;
    let spec = a.domain.spec();
    let mat = MaterialCoefficients::for_domain(a.domain.domain);
    let mesh = a.domain.mesh()?;
    let mut report = run_on_mesh(
        mesh,
        &mat,
        a.solver.r as usize,
        a.t_up,
        a.t_low,
        a.delta,
        a.budget as usize,
        &a.solver.procedure(),
    )?;
    report.domain = Some(spec);
    let (json, csv) = io::write_report(out.join("enclose"), &report)?;
    for n in &report.nudges {
        eprintln!(
            "nudged {} shift on level {}: {} -> {}",
            n.side, n.level, n.from, n.to
        );
    }
    for it in &report.iterations {
        println!(
            "level {}  h {:.4e}  dofs {}  m_up {}  m_low {}",
            it.level, it.h, it.n_dofs, it.m_up, it.m_low
        );
    }
    for e in &report.enclosures {
        println!(
            "j {}  [{:.12}, {:.12}]  width {:.3e}  {}",
            e.j,
            e.lower,
            e.upper,
            e.width,
            if e.converged { "converged" } else { "open" }
        );
    }
    println!(
        "{}; wrote {} and {}",
        status(report.terminated),
        json.display(),
        csv.display()
    );
    Ok(match report.terminated {
        Termination::Converged => 0,
        Termination::BudgetExhausted => EXIT_BUDGET,
    })
}

fn status(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::BudgetExhausted => "budget exhausted",
    }
}

fn sweep(a: &SweepArgs, out: &Path) -> anyhow::Result<u8> {
    let target = match (a.j, a.l) {
        (Some(j), None) if j >= 1 => SweepTarget::Eigenvalue(j),
        (None, Some(l)) if l >= 1 => SweepTarget::Adjacent(l),
        _ => bail!("give exactly one of --j and --l, at least 1"),
    };
    let mat = MaterialCoefficients::for_domain(a.domain.domain);
    let fm = assemble(build_space(a.domain.mesh()?, a.solver.r as usize)?, &mat)?;
    let rows = sweep_t(&fm, target, a.side, &a.t, &a.solver.bounds());
    let csv = io::sweep_csv(&rows);
    let path = out.join("sweep.csv");
    io::write_text(&path, &csv)?;
    print!("{csv}");
    println!("dofs {}; wrote {}", fm.n(), path.display());
    Ok(0)
}

fn converge(a: &ConvergeArgs, out: &Path) -> anyhow::Result<u8> {
    check_window(a.t_up, a.t_low)?;
    if a.domain.refine > 0 {
        bail!("--refine is not supported by converge; raise --n instead");
    }
    let mat = MaterialCoefficients::for_domain(a.domain.domain);
    let study = convergence_study(
        &a.domain.spec(),
        &mat,
        a.solver.r as usize,
        a.levels as usize,
        a.t_up,
        a.t_low,
        &a.solver.bounds(),
    )?;
    io::write_json(out.join("converge.json"), &study)?;
    let csv = io::convergence_csv(&study);
    io::write_text(out.join("converge.csv"), &csv)?;
    io::write_text(out.join("converge.dat"), &io::convergence_gnuplot(&study))?;
    print!("{csv}");
    for (j, s) in study.slopes.iter().enumerate() {
        match s {
            Some(s) => println!("slope j={}: {s:.3}", j + 1),
            None => println!("slope j={}: n/a", j + 1),
        }
    }
    Ok(0)
}

fn demo(a: &DemoArgs, out: &Path) -> anyhow::Result<u8> {
    if a.domain.refine > 0 {
        bail!("--refine is not supported by demo; raise --n instead");
    }
    let mat = MaterialCoefficients::for_domain(a.domain.domain);
    let rep = pollution_demo(
        &a.domain.spec(),
        &mat,
        a.solver.r as usize,
        (a.window[0], a.window[1]),
        a.delta,
        a.budget as usize,
        &a.solver.procedure(),
    )?;
    io::write_json(out.join("demo.json"), &rep)?;
    let csv = io::pollution_csv(&rep);
    io::write_text(out.join("demo.csv"), &csv)?;
    for e in &rep.certified.enclosures {
        println!("enclosure {}  [{:.10}, {:.10}]", e.j, e.lower, e.upper);
    }
    print!("{csv}");
    println!(
        "{} naive values, {} spurious, {} enclosures without a naive value ({})",
        rep.naive.len(),
        rep.spurious_count(),
        rep.missing.len(),
        status(rep.certified.terminated)
    );
    Ok(0)
}

fn mesh(a: &MeshArgs, out: &Path) -> anyhow::Result<u8> {
    let m = a.domain.mesh()?;
    let path = out.join("mesh.json");
    io::write_mesh_json(&path, &m)?;
    println!(
        "{} vertices, {} triangles, {} crack node pairs, h_max {:.6e}; wrote {}",
        m.n_vertices(),
        m.n_triangles(),
        m.crack_pairs().len(),
        m.h_max(),
        path.display()
    );
    if a.validate {
        let report = validate(&m);
        io::write_json(out.join("mesh_report.json"), &report)?;
        println!("{report}");
        if !report.all_passed() {
            return Ok(EXIT_MODULE_ERROR);
        }
    }
    Ok(0)
}

fn export_field(a: &ExportArgs, out: &Path) -> anyhow::Result<u8> {
    if a.mode == 0 {
        bail!("--mode counts from 1");
    }
    let mat = MaterialCoefficients::for_domain(a.domain.domain);
    let space = std::sync::Arc::new(build_space(a.domain.mesh()?, a.solver.r as usize)?);
    let fm = assemble(space.clone(), &mat)?;
    let b = nearest_bounds(&fm, a.t, Side::Upper, a.mode, &a.solver.bounds())?;
    let k = a.mode - 1;
    let Some(x) = b.vectors.get(k) else {
        bail!("only {} eigenpairs above t = {}", b.len(), a.t);
    };
    let title = format!("{} mode {} rho {:.12}", a.domain.domain, a.mode, b.rho[k]);
    let grid = io::field_grid(&space, x, &title);
    let path = out.join("field.vtk");
    io::write_vtk(&path, &grid).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "mode {} upper bound {:.12}; wrote {}",
        a.mode,
        b.rho[k],
        path.display()
    );
    Ok(0)
}
