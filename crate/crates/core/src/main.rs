use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fitted_mpfa::cli::{dump_surface, emit, preset, price_check, run_experiment, to_csv, ExperimentConfig};
use fitted_mpfa::timestepper::Scheme;
use fitted_mpfa::Result;

#[derive(Parser)]
#[command(name = "fitted-mpfa", about = "Finite-volume pricing of the two-asset max-call", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Built-in configuration (table1..table5, fig1..fig3).
    #[arg(long)]
    preset: Option<String>,
    /// `key = value` config file applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scheme, or a comma-separated list for `solve`.
    #[arg(long)]
    scheme: Option<String>,
    /// Interior cells per axis, or a comma-separated list for `solve`.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    dtau: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, e.g. `--set velocity=midpoint`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run schemes over grid sizes and write the error table as CSV.
    Solve(Common),
    /// Write `x y numeric analytic` over all cell centers for one scheme and size.
    Dump(Common),
    /// Compare the closed-form price with Monte Carlo at one spot pair.
    Price {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
    },
}

fn config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.preset {
        Some(name) => preset(name)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &c.config {
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
    }
    for (key, value) in [("scheme", c.scheme.clone()), ("n", c.n.clone())] {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if let Some(t) = c.theta {
        cfg.theta = t;
    }
    if let Some(d) = c.dtau {
        cfg.dtau = d;
    }
    for kv in &c.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| fitted_mpfa::Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn single(cfg: &ExperimentConfig) -> Result<(Scheme, usize)> {
    match (cfg.schemes.as_slice(), cfg.ns.as_slice()) {
        ([s], [n]) => Ok((*s, *n)),
        _ => Err(fitted_mpfa::Error::Config("`dump` needs exactly one scheme and one N".into())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(c) => config(c).and_then(|cfg| {
            let rows = run_experiment(&cfg)?;
            emit(cfg.out.as_ref(), &to_csv(&cfg, &rows)?)
        }),
        Command::Dump(c) => config(c).and_then(|cfg| {
            let (scheme, n) = single(&cfg)?;
            emit(cfg.out.as_ref(), &dump_surface(&cfg, scheme, n)?)
        }),
        Command::Price { common, x, y } => config(common).and_then(|cfg| {
            let (exact, mc, se) = price_check(&cfg, *x, *y)?;
            let z = (exact - mc) / se;
            emit(cfg.out.as_ref(), &format!("closed_form={exact:.10} mc={mc:.10} se={se:.3e} z={z:.3}\n"))
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
