//! Experiment driver: configuration, presets, error tables and surface dumps.
//!
//! Configuration is a flat `key = value` file; `#` starts a comment. Later assignments win, so
//! a preset can be loaded first and then overridden by a file and by command-line flags.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use crate::analytic::{mc_price, rainbow_price, AnalyticVariant};
use crate::error::{Error, Result};
use crate::error_metrics::{rel_l2_error, ErrorReport};
use crate::grid::{build_graded, build_uniform, TensorGrid};
use crate::linalg::SolverKind;
use crate::model::{ModelParams, VelocityPoint};
use crate::timestepper::{
    run, ExactBoundary, GridFunction, HomogeneousAxes, RunConfig, RunOutput, Scheme, ThetaScheme,
};
use crate::upwind::{UpwindForm, UpwindOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    Uniform,
    Graded { focus: f64, strength: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryKind {
    #[default]
    Exact,
    HomogeneousAxes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub ns: Vec<usize>,
    pub x_max: f64,
    pub y_max: f64,
    pub params: ModelParams,
    pub theta: f64,
    pub dtau: f64,
    pub grid: GridKind,
    pub upwind: UpwindOptions,
    pub variant: AnalyticVariant,
    pub boundary: BoundaryKind,
    pub solver: SolverKind,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub mc_paths: usize,
    /// When false the `seconds` column is written as 0 so reruns are byte-identical.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        preset("table1").expect("built-in preset")
    }
}

/// Named configurations for the published tables and figures.
pub const PRESETS: [&str; 8] = ["table1", "table2", "table3", "table4", "table5", "fig1", "fig2", "fig3"];

fn base(params: ModelParams, x_max: f64, ns: Vec<usize>, dtau: f64) -> ExperimentConfig {
    ExperimentConfig {
        schemes: vec![Scheme::MpfaUp1],
        ns,
        x_max,
        y_max: x_max,
        params,
        theta: 0.5,
        dtau,
        grid: GridKind::Uniform,
        upwind: UpwindOptions::default(),
        variant: AnalyticVariant::Standard,
        boundary: BoundaryKind::Exact,
        solver: SolverKind::Auto,
        out: None,
        seed: 20_240_607,
        mc_paths: 1_000_000,
        record_timing: true,
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let equity = |r: f64, maturity: f64| ModelParams { sigma1: 0.3, sigma2: 0.3, rho: 0.5, r, strike: 100.0, maturity };
    let unit = ModelParams { sigma1: 1.0, sigma2: 1.0, rho: 0.3, r: 0.5, strike: 1.0, maturity: 2.0 };
    Ok(match name {
        "table1" => base(equity(0.1, 1.0 / 6.0), 300.0, vec![50, 70, 85, 100, 150], 0.01),
        "table2" => base(equity(0.08, 1.0 / 6.0), 300.0, vec![50, 100, 150], 0.01),
        "table3" => base(equity(0.0, 1.0 / 6.0), 300.0, vec![100, 150], 0.01),
        "table4" => base(unit, 4.0, vec![50, 100], 0.01),
        "table5" => base(unit, 4.0, vec![50, 100], 0.1),
        "fig1" | "fig2" | "fig3" => {
            let mut c = base(equity(0.03, 1.0 / 12.0), 300.0, vec![50], 0.01);
            c.schemes = match name {
                "fig1" => vec![Scheme::MpfaUp1],
                "fig2" => vec![Scheme::MpfaUp2],
                _ => vec![Scheme::FittedMpfaUp1],
            };
            c
        }
        _ => return Err(Error::Config(format!("unknown preset `{name}` (known: {})", PRESETS.join(", ")))),
    })
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|s| parse(key, s.trim())).collect()
}

impl ExperimentConfig {
    /// Applies one assignment. `preset` replaces the whole configuration.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (key, value) = (key.trim(), value.trim());
        match key {
            "preset" => *self = preset(value)?,
            "scheme" | "schemes" => self.schemes = value.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?,
            "n" | "ns" => self.ns = parse_list(key, value)?,
            "x_max" => self.x_max = parse(key, value)?,
            "y_max" => self.y_max = parse(key, value)?,
            "sigma1" => self.params.sigma1 = parse(key, value)?,
            "sigma2" => self.params.sigma2 = parse(key, value)?,
            "rho" => self.params.rho = parse(key, value)?,
            "r" => self.params.r = parse(key, value)?,
            "strike" | "k" => self.params.strike = parse(key, value)?,
            "maturity" | "t" => self.params.maturity = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "dtau" => self.dtau = parse(key, value)?,
            "grid" => {
                self.grid = match value {
                    "uniform" => GridKind::Uniform,
                    "graded" => match self.grid {
                        g @ GridKind::Graded { .. } => g,
                        GridKind::Uniform => GridKind::Graded { focus: self.params.strike, strength: 1.0 },
                    },
                    _ => return Err(Error::Config(format!("`grid`: expected uniform or graded, got `{value}`"))),
                }
            }
            "focus" | "strength" => {
                let v: f64 = parse(key, value)?;
                let (mut focus, mut strength) = match self.grid {
                    GridKind::Graded { focus, strength } => (focus, strength),
                    GridKind::Uniform => (self.params.strike, 1.0),
                };
                if key == "focus" {
                    focus = v;
                } else {
                    strength = v;
                }
                self.grid = GridKind::Graded { focus, strength };
            }
            "upwind_form" => {
                self.upwind.form = match value {
                    "donor" => UpwindForm::Donor,
                    "literal" => UpwindForm::Literal,
                    _ => return Err(Error::Config(format!("`upwind_form`: expected donor or literal, got `{value}`"))),
                }
            }
            "velocity" => {
                self.upwind.velocity = match value {
                    "shifted" => VelocityPoint::Shifted,
                    "midpoint" => VelocityPoint::Midpoint,
                    _ => return Err(Error::Config(format!("`velocity`: expected shifted or midpoint, got `{value}`"))),
                }
            }
            "analytic" => {
                self.variant = match value {
                    "standard" => AnalyticVariant::Standard,
                    "as-printed" => AnalyticVariant::AsPrinted,
                    _ => {
                        return Err(Error::Config(format!(
                            "`analytic`: expected standard or as-printed, got `{value}`"
                        )))
                    }
                }
            }
            "boundary" => {
                self.boundary = match value {
                    "exact" => BoundaryKind::Exact,
                    "homogeneous-axes" => BoundaryKind::HomogeneousAxes,
                    _ => {
                        return Err(Error::Config(format!(
                            "`boundary`: expected exact or homogeneous-axes, got `{value}`"
                        )))
                    }
                }
            }
            "solver" => {
                self.solver = match value {
                    "auto" => SolverKind::Auto,
                    "lu" => SolverKind::BandedLu,
                    "bicgstab" => SolverKind::BiCgStab,
                    _ => return Err(Error::Config(format!("`solver`: expected auto, lu or bicgstab, got `{value}`"))),
                }
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            "mc_paths" => self.mc_paths = parse(key, value)?,
            "record_timing" => self.record_timing = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of a config text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Parses a config text on top of the default configuration.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.schemes.is_empty() {
            return Err(Error::Config("`scheme`: at least one scheme required".into()));
        }
        if self.ns.is_empty() || self.ns.iter().any(|&n| n < 3) {
            return Err(Error::Config("`n`: need a non-empty list of sizes >= 3".into()));
        }
        if !(self.x_max > 0.0 && self.y_max > 0.0) {
            return Err(Error::Config("`x_max`, `y_max`: must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("`theta`: must lie in [0, 1], got {}", self.theta)));
        }
        if !(self.dtau > 0.0) {
            return Err(Error::Config("`dtau`: must be positive".into()));
        }
        if let GridKind::Graded { focus, strength } = self.grid {
            if !(focus > 0.0 && focus < self.x_max.min(self.y_max)) {
                return Err(Error::Config(format!("`focus`: must lie inside the domain, got {focus}")));
            }
            if !(strength >= 0.0) {
                return Err(Error::Config("`strength`: must be non-negative".into()));
            }
        }
        if self.mc_paths < 1000 {
            return Err(Error::Config("`mc_paths`: need at least 1000".into()));
        }
        Ok(())
    }

    pub fn build_grid(&self, n: usize) -> Result<TensorGrid> {
        match self.grid {
            GridKind::Uniform => TensorGrid::new(build_uniform(n, self.x_max)?, build_uniform(n, self.y_max)?),
            GridKind::Graded { focus, strength } => TensorGrid::new(
                build_graded(n, self.x_max, focus, strength)?,
                build_graded(n, self.y_max, focus, strength)?,
            ),
        }
    }

    pub fn run_config(&self, scheme: Scheme) -> Result<RunConfig> {
        Ok(RunConfig {
            scheme,
            time: ThetaScheme::new(self.theta, self.dtau, self.params.maturity)?,
            upwind: self.upwind,
            solver: self.solver,
        })
    }
}

/// Numeric and closed-form prices on one grid.
#[derive(Debug, Clone)]
pub struct Solved {
    pub grid: TensorGrid,
    pub output: RunOutput,
    pub analytic: GridFunction,
    pub seconds: f64,
}

/// Runs one scheme at one grid size.
pub fn solve_one(cfg: &ExperimentConfig, scheme: Scheme, n: usize) -> Result<Solved> {
    cfg.validate()?;
    let grid = cfg.build_grid(n)?;
    let run_cfg = cfg.run_config(scheme)?;
    let start = Instant::now();
    let output = match cfg.boundary {
        BoundaryKind::Exact => {
            run(&run_cfg, &grid, &cfg.params, &ExactBoundary { params: cfg.params, variant: cfg.variant })?
        }
        BoundaryKind::HomogeneousAxes => {
            run(&run_cfg, &grid, &cfg.params, &HomogeneousAxes { params: cfg.params, variant: cfg.variant })?
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let p = cfg.params;
    let analytic = GridFunction::from_fn(&grid, |x, y| rainbow_price(&p, x, y, p.maturity, cfg.variant));
    Ok(Solved { grid, output, analytic, seconds })
}

/// One error report per `(scheme, N)`, schemes outermost.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ErrorReport>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        for &n in &cfg.ns {
            let s = solve_one(cfg, scheme, n)?;
            let mut rep = rel_l2_error(&s.output.solution.values, &s.analytic.values, &s.grid)?;
            rep.scheme = scheme.name().to_string();
            rep.seconds = if cfg.record_timing { s.seconds } else { 0.0 };
            rows.push(rep);
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "scheme,N,theta,dtau,rel_l2,max_abs,seconds";

/// Error table as CSV; `dtau` is the step actually taken.
pub fn to_csv(cfg: &ExperimentConfig, rows: &[ErrorReport]) -> Result<String> {
    let dtau = ThetaScheme::new(cfg.theta, cfg.dtau, cfg.params.maturity)?.dtau;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.10e},{:.10e},{:.10e},{:.3}",
            r.scheme, r.n, cfg.theta, dtau, r.rel_l2, r.max_abs, r.seconds
        );
    }
    Ok(out)
}

/// `x y numeric analytic` rows over all cell centers.
pub fn dump_surface(cfg: &ExperimentConfig, scheme: Scheme, n: usize) -> Result<String> {
    let s = solve_one(cfg, scheme, n)?;
    let mut out = String::new();
    for (((x, y), u), a) in s.grid.centers().zip(&s.output.solution.values).zip(&s.analytic.values) {
        let _ = writeln!(out, "{x:.10e} {y:.10e} {u:.10e} {a:.10e}");
    }
    Ok(out)
}

/// Closed form against Monte Carlo at one spot pair: `(closed form, mc, standard error)`.
pub fn price_check(cfg: &ExperimentConfig, x: f64, y: f64) -> Result<(f64, f64, f64)> {
    cfg.params.validate()?;
    let p = cfg.params;
    let exact = rainbow_price(&p, x, y, p.maturity, cfg.variant);
    let (mc, se) = mc_price(&p, x, y, cfg.mc_paths, cfg.seed)?;
    Ok((exact, mc, se))
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
