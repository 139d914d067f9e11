use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use conformal_sphere::conformal::volume;
use conformal_sphere::mean::{constants, MeanTarget};
use conformal_sphere::report::SeriesKind;
use conformal_sphere::scenarios::{ScenarioRegistry, ScenarioSpec};
use conformal_sphere::sphere::sphere_volume_constant;
use conformal_sphere::suites::{
    emit_plots, read_series, run_suite, write_bundle, SuiteContext, SuiteRegistry, SuiteRun,
};

#[derive(Parser)]
#[command(
    name = "csphere",
    version,
    about = "Batch verification of conformal metrics on the round sphere"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write a report bundle.
    Verify(VerifyArgs),
    /// Print the dimension constants used by the mean inequalities.
    Constants {
        #[arg(long, default_value_t = 3)]
        n: usize,
    },
    /// Print a resolved scenario and optionally write its sampled factors.
    ScenarioDump {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value_t = Format::Toml)]
        format: Format,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// Directory for `scenario.toml` and `factors.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG plots from a report bundle's series.
    Plot {
        /// Bundle directory written by `verify`.
        #[arg(long)]
        input: PathBuf,
        /// phi-profile, tau-scan or convergence; repeatable, all when omitted.
        #[arg(long = "kind")]
        kinds: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List registered suites and scenario families.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Toml,
    Json,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario family name.
    #[arg(long)]
    scenario: Option<String>,
    /// TOML/JSON run config or scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Sequence length J.
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    suite: Option<String>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    probes: Option<usize>,
    /// Finite-difference step.
    #[arg(long)]
    h: Option<f64>,
    /// Tolerance override CHECK=VALUE; repeatable.
    #[arg(long = "tol")]
    tol: Vec<String>,
    /// Mean-value target: u, power-u or f.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

/// Library contract errors and bad input exit with 2, failed checks with 1.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Verify(args) => verify(args),
        Command::Constants { n } => {
            let c = constants(n)?;
            let value = serde_json::json!({
                "n": n,
                "omega_n": sphere_volume_constant(n),
                "drift": c,
            });
            println!("{}", serde_json::to_string_pretty(&value)?);
            Ok(true)
        }
        Command::ScenarioDump {
            scenario,
            format,
            resolution,
            samples,
            out,
        } => scenario_dump(scenario, format, resolution, samples, out.as_deref()),
        Command::Plot { input, kinds, out } => {
            let kinds = kinds
                .iter()
                .map(|k| SeriesKind::parse(k))
                .collect::<Result<Vec<_>, _>>()?;
            let series = read_series(&input).with_context(|| format!("reading series from {}", input.display()))?;
            let written = emit_plots(&series, &kinds, out.as_deref().unwrap_or(&input))?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::List => {
            let suites = SuiteRegistry::default();
            let scenarios = ScenarioRegistry::default();
            println!("suites: all, {}", suites.names().collect::<Vec<_>>().join(", "));
            println!("scenarios: {}", scenarios.names().collect::<Vec<_>>().join(", "));
            Ok(true)
        }
    }
}

/// A config file may hold a full run or only a scenario.
fn load_config(path: &Path) -> anyhow::Result<SuiteRun> {
    match SuiteRun::from_path(path) {
        Ok(run) => Ok(run),
        Err(run_err) => match ScenarioSpec::from_path(path) {
            Ok(spec) => Ok(SuiteRun::new("all", spec)),
            Err(_) => Err(run_err).with_context(|| format!("reading config {}", path.display())),
        },
    }
}

fn base_run(a: &ScenarioArgs) -> anyhow::Result<SuiteRun> {
    let mut run = match &a.config {
        Some(p) => load_config(p)?,
        None => SuiteRun::new("all", ScenarioSpec::new("round", 3)),
    };
    if let Some(name) = &a.scenario {
        if a.config.is_some() && *name != run.scenario.name {
            bail!(
                "--scenario {name} conflicts with the config's scenario '{}'",
                run.scenario.name
            );
        }
        run.scenario.name = name.clone();
    }
    if let Some(n) = a.n {
        run.scenario.n = n;
    }
    if let Some(l) = a.lambda {
        run.scenario.lambda = Some(l);
    }
    if let Some(j) = a.length {
        run.scenario.length = Some(j);
    }
    if let Some(seed) = a.seed {
        run.seed = seed;
        run.scenario.seed = seed;
    }
    Ok(run)
}

fn verify(args: VerifyArgs) -> anyhow::Result<bool> {
    if let Some(j) = args.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    let mut run = base_run(&args.scenario)?;
    if let Some(s) = args.suite {
        run.suite = s;
    }
    if args.samples.is_some() {
        run.samples = args.samples;
    }
    if args.resolution.is_some() {
        run.resolution = args.resolution;
    }
    if let Some(p) = args.probes {
        run.probes = p;
    }
    if let Some(h) = args.h {
        run.h = h;
    }
    for t in &args.tol {
        let (name, value) = t
            .split_once('=')
            .with_context(|| format!("--tol expects CHECK=VALUE, got '{t}'"))?;
        let v: f64 = value.parse().with_context(|| format!("bad tolerance '{value}'"))?;
        run.tolerances.insert(name.to_string(), v);
    }
    if let Some(t) = &args.target {
        run.target = Some(match t.as_str() {
            "u" => MeanTarget::U,
            "power-u" => MeanTarget::PowerU,
            "f" => MeanTarget::F,
            _ => bail!("unknown target '{t}' (expected u, power-u or f)"),
        });
    }
    let bundle = run_suite(&run, &SuiteRegistry::default(), &ScenarioRegistry::default())?;
    for s in &bundle.report.sections {
        let passed = s.records.iter().filter(|r| r.passed()).count();
        println!("{:<16} {passed}/{} checks passed", s.suite, s.records.len());
        for why in &s.skipped {
            println!("{:<16} skipped: {why}", "");
        }
    }
    for (suite, r) in bundle.report.failed_records() {
        println!(
            "FAIL {suite}/{}: {} {} {} (slack {:.3e}, tolerance {:.3e}) [{}]",
            r.check,
            r.lhs,
            serde_json::to_value(r.relation)?.as_str().unwrap_or("?"),
            r.rhs,
            r.slack,
            r.tolerance,
            r.anchor
        );
    }
    if let Some(dir) = &args.out {
        write_bundle(&bundle, dir)?;
        println!("report written to {}", dir.join("report.json").display());
    }
    Ok(bundle.report.passed)
}

fn scenario_dump(
    a: ScenarioArgs,
    format: Format,
    resolution: Option<usize>,
    samples: Option<usize>,
    out: Option<&Path>,
) -> anyhow::Result<bool> {
    let mut run = base_run(&a)?;
    run.resolution = resolution;
    run.samples = samples;
    let ctx = SuiteContext::new(run, &ScenarioRegistry::default())?;
    let spec = &ctx.scenario.spec;
    let text = match format {
        Format::Toml => spec.to_toml()?,
        Format::Json => serde_json::to_string_pretty(spec)? + "\n",
    };
    print!("{text}");
    for (j, cf) in ctx.scenario.factors.iter().enumerate() {
        println!("# j={} Vol_g = {:.9e}", j + 1, volume(cf, &ctx.sampling));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("scenario.toml"), spec.to_toml()?)?;
        let mut w = csv::Writer::from_path(dir.join("factors.csv"))?;
        let n = ctx.n();
        let mut header: Vec<String> = (1..=n + 1).map(|i| format!("x{i}")).collect();
        header.push("weight".into());
        header.extend((1..=ctx.scenario.len()).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for (i, p) in ctx.sampling.points().enumerate() {
            let mut row: Vec<String> = p.iter().map(|v| format!("{v:.12e}")).collect();
            row.push(format!("{:.12e}", ctx.sampling.weights()[i]));
            row.extend(ctx.scenario.factors.iter().map(|cf| format!("{:.12e}", cf.f().eval(p))));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(true)
}
