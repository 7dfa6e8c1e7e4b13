use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use asi_imex::catalog::{get_scheme, BUILTINS, CATALOG};
use asi_imex::experiments::{self, parse_grid, ridge_locus, ConvergenceReport, InitialCondition, ProblemId, SweepConfig, TestProblem};
use asi_imex::integrator::{JacobianMode, StepperConfig, DEFAULT_SPOT_CHECK_SEED};
use asi_imex::monotonicity::{self, RkTableau};
use asi_imex::order::{check_order, DEFAULT_ORDER_TOL};
use asi_imex::stability::{self, Mode, Window};
use asi_imex::{svg, ButcherDoubleTableau};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

mod reproduce;

#[derive(Debug, Parser, Serialize, Deserialize)]
#[command(name = "asi-imex", version, about = "ASI-SSP IMEX Runge-Kutta analysis and convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Catalog queries.
    Schemes {
        #[command(subcommand)]
        action: SchemesAction,
    },
    /// Exact order-condition residuals.
    OrderCheck(OrderArgs),
    /// Linear stability region scan.
    Stability(StabilityArgs),
    /// Absolute-monotonicity radii.
    Monotonicity(MonotonicityArgs),
    /// Convergence sweep over the (ε, Δt) plane.
    Converge(ConvergeArgs),
    /// Every published check plus the convergence figures, with a pass/fail table.
    ReproduceAll(ReproduceArgs),
    /// Re-runs the command recorded in a `run-config.json`.
    Replay {
        config: PathBuf,
    },
}

#[derive(Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SchemesAction {
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct OutArgs {
    /// Output directory.
    #[arg(long, env = "ASI_IMEX_OUT", default_value = "results")]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct OrderArgs {
    /// Catalog name or path to a tableau JSON file.
    #[arg(long)]
    scheme: String,
    #[arg(long, default_value_t = DEFAULT_ORDER_TOL)]
    tol: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Explicit,
    Imex,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Explicit => Mode::Explicit,
            ModeArg::Imex => Mode::Imex,
        }
    }
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct StabilityArgs {
    #[arg(long)]
    scheme: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Imex)]
    mode: ModeArg,
    /// Cells per axis.
    #[arg(long, default_value_t = stability::DEFAULT_RESOLUTION)]
    resolution: usize,
    /// re_min,re_max,im_min,im_max
    #[arg(long, default_value = "-10,4,-10,10")]
    window: String,
    /// Write the stability grid as CSV.
    #[arg(long)]
    csv: bool,
    /// Write the boundary as SVG.
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct MonotonicityArgs {
    #[arg(long)]
    scheme: String,
    #[arg(long, default_value_t = 0.0)]
    r2: f64,
    #[arg(long, default_value_t = monotonicity::DEFAULT_R_MAX)]
    r_max: f64,
    #[arg(long, default_value_t = monotonicity::DEFAULT_RADIUS_TOL)]
    tol: f64,
    /// Also report the conditions at this r₁.
    #[arg(long)]
    at: Option<f64>,
    /// Write the JSON result into this directory as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum JacobianArg {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct SolverArgs {
    #[arg(long, default_value_t = experiments::DEFAULT_DT_REF)]
    dt_ref: f64,
    /// Final time; defaults to 5 for pareschi and 0.5 for vanderpol.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = StepperConfig::default().rtol)]
    rtol: f64,
    #[arg(long, default_value_t = StepperConfig::default().atol)]
    atol: f64,
    #[arg(long, default_value_t = StepperConfig::default().max_iterations)]
    max_iterations: usize,
    #[arg(long, value_enum, default_value_t = JacobianArg::Analytic)]
    jacobian: JacobianArg,
    #[arg(long, default_value_t = experiments::ERROR_FLOOR)]
    error_floor: f64,
    #[arg(long, default_value_t = experiments::R2_THRESHOLD)]
    r2_threshold: f64,
    /// Reference cache directory; defaults to `<out>/cache`.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Seed of the stiff-mask spot check.
    #[arg(long, default_value_t = DEFAULT_SPOT_CHECK_SEED)]
    seed: u64,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct ConvergeArgs {
    #[arg(long)]
    scheme: String,
    #[arg(long)]
    problem: String,
    #[arg(long, default_value = "equilibrium")]
    ic: String,
    /// Comma list; `log:LO:HI:N` expands to N points per decade.
    #[arg(long, default_value = "0,log:1e-8:1:5")]
    eps_grid: String,
    #[arg(long, default_value = "log:1e-4:1:10")]
    dt_grid: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Serialize, Deserialize)]
struct ReproduceArgs {
    #[arg(long, default_value = "0,log:1e-8:1:5")]
    eps_grid: String,
    #[arg(long, default_value = "log:1e-4:1:10")]
    dt_grid: String,
    /// Skip the convergence figures.
    #[arg(long)]
    no_sweeps: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    out: OutArgs,
}

fn load_scheme(name: &str) -> Result<ButcherDoubleTableau> {
    let path = Path::new(name);
    if name.ends_with(".json") && path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {name}"))?;
        return Ok(ButcherDoubleTableau::from_json(&text)?);
    }
    Ok(get_scheme(name)?)
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '-' => c,
            '\'' => 'p',
            _ => '_',
        })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

fn json_pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn prepare_out(dir: &Path, cli: &Cli) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("run-config.json"), json_pretty(cli)?)?;
    Ok(())
}

fn parse_window(text: &str) -> Result<Window> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad window {text:?}"))?;
    let [re_min, re_max, im_min, im_max] = v[..] else {
        bail!("window needs four numbers, got {text:?}");
    };
    let w = Window {
        re_min,
        re_max,
        im_min,
        im_max,
    };
    w.check()?;
    Ok(w)
}

impl SolverArgs {
    fn sweep_config(&self, eps_grid: &str, dt_grid: &str, out: &Path) -> Result<SweepConfig> {
        let stepper = StepperConfig {
            rtol: self.rtol,
            atol: self.atol,
            max_iterations: self.max_iterations,
            jacobian: match self.jacobian {
                JacobianArg::Analytic => JacobianMode::Analytic,
                JacobianArg::FiniteDifference => JacobianMode::FiniteDifference,
            },
            ..StepperConfig::default()
        };
        stepper.check()?;
        Ok(SweepConfig {
            eps_grid: parse_grid(eps_grid)?,
            dt_grid: parse_grid(dt_grid)?,
            t_end: self.t_end,
            dt_ref: self.dt_ref,
            stepper,
            error_floor: self.error_floor,
            r2_threshold: self.r2_threshold,
            cache_dir: Some(self.cache_dir.clone().unwrap_or_else(|| out.join("cache"))),
            seed: self.seed,
        })
    }
}

fn schemes_list(json: bool) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        name: String,
        stages: usize,
        design_order: u8,
        form: &'static str,
        builtin: bool,
    }
    let mut rows = Vec::new();
    for (name, builtin) in CATALOG.iter().map(|n| (n, false)).chain(BUILTINS.iter().map(|n| (n, true))) {
        let t = get_scheme(name)?;
        rows.push(Row {
            name: name.to_string(),
            stages: t.stages(),
            design_order: t.design_order(),
            form: if t.is_asi() { "asi" } else { "standard" },
            builtin,
        });
    }
    let mut stdout = std::io::stdout().lock();
    if json {
        write!(stdout, "{}", json_pretty(&rows)?)?;
    } else {
        writeln!(stdout, "{:<24} {:>6} {:>5} {:<8}", "name", "stages", "order", "form")?;
        for r in &rows {
            writeln!(stdout, "{:<24} {:>6} {:>5} {:<8}", r.name, r.stages, r.design_order, r.form)?;
        }
    }
    Ok(())
}

fn order_check(args: &OrderArgs) -> Result<()> {
    let t = load_scheme(&args.scheme)?;
    let report = check_order(&t, args.tol);
    let mut stdout = std::io::stdout().lock();
    if args.json {
        write!(stdout, "{}", json_pretty(&report)?)?;
        return Ok(());
    }
    writeln!(stdout, "{}: attained order {} (design {})", report.scheme, report.attained_order, t.design_order())?;
    writeln!(stdout, "{:<28} {:>5} {:<9} {:>24}", "condition", "order", "kind", "residual")?;
    for c in &report.conditions {
        let kind = serde_json::to_value(c.kind)?;
        writeln!(stdout, "{:<28} {:>5} {:<9} {:>24.16e}", c.label, c.order, kind.as_str().unwrap_or(""), c.residual)?;
    }
    Ok(())
}

fn stability_cmd(args: &StabilityArgs, cli: &Cli) -> Result<()> {
    let t = load_scheme(&args.scheme)?;
    let window = parse_window(&args.window)?;
    let mode = Mode::from(args.mode);
    let region = stability::analyze(&t, mode, window, args.resolution)?;
    let dir = &args.out.out;
    prepare_out(dir, cli)?;
    let stem = format!("{}_{}", slug(t.name()), mode.label());
    fs::write(dir.join(format!("{stem}.json")), json_pretty(&region)?)?;
    let both = !args.csv && !args.svg;
    if args.csv || both {
        let mut buf = Vec::new();
        region.write_csv(&mut buf)?;
        fs::write(dir.join(format!("{stem}.csv")), buf)?;
    }
    if args.svg || both {
        let (explicit, imex) = match mode {
            Mode::Explicit => (Some(&region), None),
            Mode::Imex => (None, Some(&region)),
        };
        fs::write(dir.join(format!("{stem}.svg")), svg::region_svg(t.name(), explicit, imex))?;
    }
    for w in &region.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} {}: area {:.16e}, imaginary-axis half-length {:.16e}",
        t.name(),
        mode.label(),
        region.area,
        region.imaginary_axis_half_length.unwrap_or(0.0)
    );
    Ok(())
}

fn monotonicity_cmd(args: &MonotonicityArgs, cli: &Cli) -> Result<()> {
    #[derive(Serialize)]
    struct Out {
        scheme: String,
        r2: f64,
        radius_r1: monotonicity::RadiusResult,
        explicit_part: monotonicity::RadiusResult,
        implicit_part: monotonicity::RadiusResult,
        point: Option<monotonicity::MonotonicityResult>,
    }
    let t = load_scheme(&args.scheme)?;
    if !(args.r2 >= 0.0 && args.r_max > 0.0 && args.tol > 0.0) {
        bail!("r2 must be nonnegative, r_max and tol positive");
    }
    let out = Out {
        scheme: t.name().to_string(),
        r2: args.r2,
        radius_r1: monotonicity::radius_r1(&t, args.r2, args.r_max, args.tol),
        explicit_part: monotonicity::ssp_radius_single(&RkTableau::explicit_of(&t), args.r_max, args.tol),
        implicit_part: monotonicity::ssp_radius_single(&RkTableau::implicit_of(&t), args.r_max, args.tol),
        point: args.at.map(|r1| monotonicity::is_abs_monotonic(&t, r1, args.r2)),
    };
    let text = json_pretty(&out)?;
    if let Some(dir) = &args.out {
        prepare_out(dir, cli)?;
        fs::write(dir.join(format!("{}_monotonicity.json", slug(t.name()))), &text)?;
    }
    print!("{text}");
    Ok(())
}

fn write_report(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    let stem = format!("{}_{}", slug(&report.scheme), report.problem.label());
    let mut surface = Vec::new();
    report.write_surface_csv(&mut surface)?;
    fs::write(dir.join(format!("{stem}_surface.csv")), surface)?;
    let mut rates = Vec::new();
    report.write_rates_csv(&mut rates)?;
    fs::write(dir.join(format!("{stem}_rates.csv")), rates)?;
    fs::write(dir.join(format!("{stem}_rates.svg")), report.rates_svg())?;
    for (c, name) in ["x", "y"].iter().enumerate() {
        fs::write(dir.join(format!("{stem}_errors_{name}.svg")), report.errors_svg(c))?;
        fs::write(dir.join(format!("{stem}_surface_{name}.svg")), report.surface_svg(c))?;
    }
    let ridge: Vec<_> = (0..2).map(|c| ridge_locus(report, c)).collect();
    fs::write(dir.join(format!("{stem}_ridge.json")), json_pretty(&ridge)?)?;
    fs::write(dir.join(format!("{stem}_meta.json")), json_pretty(&report.meta)?)?;
    Ok(())
}

fn converge_cmd(args: &ConvergeArgs, cli: &Cli) -> Result<bool> {
    let t = load_scheme(&args.scheme)?;
    let problem = TestProblem::new(args.problem.parse::<ProblemId>()?, args.ic.parse::<InitialCondition>()?);
    let dir = &args.out.out;
    let cfg = args.solver.sweep_config(&args.eps_grid, &args.dt_grid, dir)?;
    prepare_out(dir, cli)?;
    let report = experiments::sweep(&t, problem, &cfg)?;
    write_report(&report, dir)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{:>24} {:>10} {:>10} {:>7} {:>7}", "eps", "rate_x", "rate_y", "r2_x", "r2_y")?;
    for row in &report.rates {
        writeln!(
            stdout,
            "{:>24.16e} {:>10.4} {:>10.4} {:>7.4} {:>7.4}",
            row.eps, row.fits[0].rate, row.fits[1].rate, row.fits[0].r_squared, row.fits[1].r_squared
        )?;
    }
    let failures: Vec<_> = report.failures().collect();
    for c in &failures {
        eprintln!(
            "cell eps={:.16e} dt={:.16e}: {}",
            c.eps,
            c.dt,
            c.failure.as_deref().unwrap_or("")
        );
    }
    Ok(failures.is_empty())
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Schemes {
            action: SchemesAction::List { json },
        } => schemes_list(*json).map(|_| true),
        Command::OrderCheck(a) => order_check(a).map(|_| true),
        Command::Stability(a) => stability_cmd(a, cli).map(|_| true),
        Command::Monotonicity(a) => monotonicity_cmd(a, cli).map(|_| true),
        Command::Converge(a) => converge_cmd(a, cli),
        Command::Replay { config } => {
            let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
            let recorded: Cli = serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            if matches!(recorded.command, Command::Replay { .. }) {
                bail!("a replay config cannot point at another replay");
            }
            run(&recorded)
        }
        Command::ReproduceAll(a) => {
            let dir = &a.out.out;
            let cfg = a.solver.sweep_config(&a.eps_grid, &a.dt_grid, dir)?;
            prepare_out(dir, cli)?;
            reproduce::run(&cfg, dir, !a.no_sweeps)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            let summary = serde_json::json!({
                "status": "error",
                "message": e.to_string(),
                "causes": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            eprintln!("{summary}");
            ExitCode::FAILURE
        }
    }
}
