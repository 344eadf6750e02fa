use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use qrhd::complexity::{kinetic_norm_bound, kinetic_operator, potential_max, query_count, ComplexityInputs, TimeSource};
use qrhd::config::{bundled, ExperimentConfig};
use qrhd::evolve::{evolve, init_state, write_frames, write_trace_csv, EvolutionTrace};
use qrhd::geometry::check::run_checks;
use qrhd::geometry::{Domain, MetricChart, Pole};
use qrhd::semiclassical::{convergence_bound, default_ode_step, run_appendix_c_study, StudyConfig};
use qrhd::{Error, Result};

const OUT_ENV: &str = "QRHD_OUT_DIR";

#[derive(Parser)]
#[command(name = "qrhd", version, about = "Quantum Riemannian Hamiltonian descent experiments")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config and the environment.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Seed overriding the one in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Schrödinger evolution experiment on every chart of a config.
    Evolve(ConfigSource),
    /// Random-instance study of the semiclassical convergence time.
    Semiclassical(StudyArgs),
    /// Print the critically damped lower bound on the convergence time.
    Bound(BoundArgs),
    /// Estimate query counts for every chart of an evolution config.
    Complexity(ComplexityArgs),
    /// Check a chart's geometry against finite-difference oracles.
    GeometryCheck(GeometryArgs),
}

#[derive(Args)]
struct ConfigSource {
    /// TOML experiment file.
    #[arg(long, conflicts_with = "builtin")]
    config: Option<PathBuf>,
    /// Bundled experiment: flat_demo or sphere_demo.
    #[arg(long)]
    builtin: Option<String>,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.builtin) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(name)) => match bundled::by_name(name) {
                Some(text) if !name.starts_with("study") => ExperimentConfig::from_toml(text),
                _ => Err(Error::Config(format!("no bundled evolution config named {name}"))),
            },
            (None, None) => Err(Error::Config("pass --config PATH or --builtin NAME".into())),
        }
    }
}

#[derive(Args)]
struct StudyArgs {
    /// TOML study file; command-line values take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Comma-separated friction rates.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long)]
    instances: Option<usize>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 0.01)]
    epsilon_star: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    lambda_eff: f64,
}

#[derive(Args)]
struct ComplexityArgs {
    #[command(flatten)]
    source: ConfigSource,
    /// Target simulation precision.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Failure probability.
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    /// Evolution time; defaults to the schedule's end time.
    #[arg(long)]
    t_total: Option<f64>,
    #[arg(long, value_enum, default_value_t = TimeKind::Measured)]
    t_source: TimeKind,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimeKind {
    Measured,
    Bound,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChartChoice {
    Flat,
    Constant,
    Sphere,
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long, value_enum)]
    kind: ChartChoice,
    /// Chart dimension of flat charts.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Constant metric, rows separated by ';' and entries by ','.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long, default_value = "north")]
    pole: String,
    /// Dimension of the space the sphere is embedded in.
    #[arg(long, default_value_t = 3)]
    ambient_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Half-width of the chart box.
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return report(&Error::Config(format!("cannot start {n} threads: {e}")));
        }
    }
    let outcome = match &cli.command {
        Command::Evolve(source) => cmd_evolve(&cli, source),
        Command::Semiclassical(args) => cmd_semiclassical(&cli, args),
        Command::Bound(args) => cmd_bound(args),
        Command::Complexity(args) => cmd_complexity(&cli, args),
        Command::GeometryCheck(args) => cmd_geometry_check(&cli, args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> ExitCode {
    eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
    ExitCode::from(if e.is_config() { 2 } else { 3 })
}

fn output_dir(cli: &Cli, configured: Option<&Path>, fallback: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| configured.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("out").join(fallback))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct ChartSummary {
    label: String,
    initial_position: Vec<f64>,
    final_position: Vec<f64>,
    final_ambient_position: Option<Vec<f64>>,
    max_norm_drift: f64,
    /// First time `|⟨x⟩ − x_min| ≤ 0.05 |⟨x⟩(0) − x_min|` for flat potentials
    /// minimised at the origin.
    t_conv_5pct: Option<f64>,
    steps: usize,
    mean_solver_iterations: f64,
}

fn summarize(label: &str, trace: &EvolutionTrace) -> ChartSummary {
    let zero = vec![0.0; trace.mean_position.first().map_or(0, Vec::len)];
    let iterations = &trace.solver_iterations;
    ChartSummary {
        label: label.to_string(),
        initial_position: trace.mean_position.first().cloned().unwrap_or_default(),
        final_position: trace.final_position().map(<[f64]>::to_vec).unwrap_or_default(),
        final_ambient_position: trace.ambient_position.as_ref().and_then(|a| a.last().cloned()),
        max_norm_drift: trace.max_norm_drift(),
        t_conv_5pct: trace.first_time_within(&zero, 0.05),
        steps: iterations.len(),
        mean_solver_iterations: iterations.iter().sum::<usize>() as f64 / iterations.len().max(1) as f64,
    }
}

fn cmd_evolve(cli: &Cli, source: &ConfigSource) -> Result<ExitCode> {
    let mut config = source.load()?;
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    let out = output_dir(cli, config.output.as_deref(), &config.name);
    config.output = Some(out.clone());
    let config = config.effective()?;
    config.validate()?;
    let schedule = config.schedule.build()?;
    let options = config.evolve_options();

    let mut results = Vec::new();
    for prepared in config.prepare()? {
        let started = Instant::now();
        let psi = init_state(&prepared.grid, &prepared.chart, &config.initial)?;
        let trace = evolve(&prepared.chart, &prepared.grid, &prepared.potential, &schedule, &psi, &options)?;
        eprintln!(
            "{}: {} steps in {:.1} s, norm drift {:.2e}",
            prepared.label,
            trace.solver_iterations.len(),
            started.elapsed().as_secs_f64(),
            trace.max_norm_drift()
        );
        results.push((prepared, trace));
    }

    // Outputs are written only once every run has succeeded.
    std::fs::create_dir_all(&out)?;
    let mut summaries = Vec::new();
    for (prepared, trace) in &results {
        let dir = out.join(&prepared.label);
        std::fs::create_dir_all(&dir)?;
        write_trace_csv(trace, &dir.join("trace.csv"))?;
        write_frames(trace, &prepared.grid, &dir.join("frames"))?;
        summaries.push(summarize(&prepared.label, trace));
    }
    write_json(
        &out.join("metadata.json"),
        &json!({
            "command": "evolve",
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "charts": summaries,
        }),
    )?;
    println!("{}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_semiclassical(cli: &Cli, args: &StudyArgs) -> Result<ExitCode> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<StudyConfig>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => StudyConfig::new(5, vec![0.1, 1.0, 5.0], 100, 42),
    };
    if let Some(dim) = args.dim {
        config.dim = dim;
    }
    if let Some(gammas) = &args.gammas {
        config.gammas = gammas.clone();
    }
    if let Some(instances) = args.instances {
        config.instances = instances;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if config.dim < 2 || config.instances == 0 || config.gammas.is_empty() || config.gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Config("need dim >= 2, instances >= 1 and positive gammas".into()));
    }
    let out = output_dir(cli, None, &format!("study_n{}", config.dim));
    let report = run_appendix_c_study(&config)?;
    report.write(&out)?;
    let horizons: Vec<_> = config
        .gammas
        .iter()
        .map(|&g| json!({ "gamma": g, "t_end": config.horizon(g), "dt": config.dt.unwrap_or_else(|| default_ode_step(g)) }))
        .collect();
    write_json(
        &out.join("metadata.json"),
        &json!({
            "command": "semiclassical",
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "effective_windows": horizons,
            "bound": report.bound,
            "gamma_opt": report.gamma_opt,
            "converged": report.converged,
            "not_converged": report.not_converged,
            "excluded": report.excluded,
            "fraction_satisfied": report.fraction_satisfied,
            "min_ratio_to_bound": report.min_ratio_to_bound,
        }),
    )?;
    println!(
        "bound {:.4}; {} converged, {} not converged, {} excluded; satisfied fraction {:.3}; min t*/bound {}",
        report.bound,
        report.converged,
        report.not_converged,
        report.excluded,
        report.fraction_satisfied,
        report.min_ratio_to_bound.map_or("n/a".to_string(), |r| format!("{r:.3}"))
    );
    println!("{}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_bound(args: &BoundArgs) -> Result<ExitCode> {
    let (t_bound, gamma_opt) = convergence_bound(args.lambda_eff, args.eta, args.mass, args.epsilon_star)?;
    println!(
        "{}",
        json!({
            "epsilon_star": args.epsilon_star,
            "eta": args.eta,
            "mass": args.mass,
            "lambda_eff": args.lambda_eff,
            "t_bound": t_bound,
            "gamma_opt": gamma_opt,
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_complexity(cli: &Cli, args: &ComplexityArgs) -> Result<ExitCode> {
    let config = args.source.load()?.effective()?;
    let schedule = config.schedule.build()?;
    let t_total = args.t_total.unwrap_or(schedule.t_end());
    let t_source = match args.t_source {
        TimeKind::Measured => TimeSource::Measured,
        TimeKind::Bound => TimeSource::Bound,
    };
    let mut charts = Vec::new();
    for prepared in config.prepare()? {
        let kinetic = kinetic_operator(&prepared.chart, &prepared.grid, config.mass)?;
        let inputs = ComplexityInputs {
            alpha_h: kinetic_norm_bound(&prepared.chart, &prepared.grid, config.mass, &schedule)?,
            v_max: potential_max(&prepared.potential, &prepared.grid)?,
            schedule: schedule.clone(),
            t_total,
            sparsity: kinetic.max_row_nnz(),
            epsilon: args.epsilon,
            delta: args.delta,
            t_source,
        };
        charts.push(json!({ "label": prepared.label, "report": query_count(&inputs)? }));
    }
    let ratio = match charts.as_slice() {
        [first, second] => Some(
            second["report"]["n_query_total"].as_f64().unwrap_or(f64::NAN)
                / first["report"]["n_query_total"].as_f64().unwrap_or(f64::NAN),
        ),
        _ => None,
    };
    let out = output_dir(cli, config.output.as_deref(), &format!("{}_complexity", config.name));
    std::fs::create_dir_all(&out)?;
    let path = out.join("report.json");
    write_json(
        &path,
        &json!({
            "command": "complexity",
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "charts": charts,
            "total_ratio_second_over_first": ratio,
        }),
    )?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn parse_metric(text: &str) -> Result<nalgebra::DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| row.split(',').map(|v| v.trim().parse::<f64>()).collect())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad metric entry: {e}")))?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("metric must be square".into()));
    }
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn cmd_geometry_check(cli: &Cli, args: &GeometryArgs) -> Result<ExitCode> {
    let as_config = |e: Error| Error::Config(e.to_string());
    let chart = match args.kind {
        ChartChoice::Flat => MetricChart::flat(args.dim, Domain::symmetric(args.dim, args.half_width)),
        ChartChoice::Constant => {
            let metric = parse_metric(args.metric.as_deref().unwrap_or("1,0;0,1"))?;
            let n = metric.nrows();
            MetricChart::constant(metric, Domain::symmetric(n, args.half_width))
        }
        ChartChoice::Sphere => {
            let pole = match args.pole.as_str() {
                "north" => Pole::North,
                "south" => Pole::South,
                other => return Err(Error::Config(format!("pole must be north or south, got {other}"))),
            };
            MetricChart::sphere_on(
                pole,
                args.ambient_dim,
                args.radius,
                Domain::symmetric(args.ambient_dim.saturating_sub(1), args.half_width),
            )
        }
    }
    .map_err(as_config)?;
    let rows = run_checks(&chart, args.samples, cli.seed.unwrap_or(0))?;
    println!("{:<24} {:>12} {:>12}  result", "check", "worst", "tolerance");
    for row in &rows {
        println!(
            "{:<24} {:>12.3e} {:>12.3e}  {}",
            row.name,
            row.worst,
            row.tolerance,
            if row.passed { "pass" } else { "FAIL" }
        );
    }
    Ok(if rows.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}
