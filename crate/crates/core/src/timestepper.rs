//! Semi-discrete system and θ-method time integration.
//!
//! After spatial assembly every cell satisfies `meas dU/dtau = row(U) + lambda meas U`, i.e.
//! `dU/dtau = A U + B g(tau)` with `g` the Dirichlet values on the boundary nodes.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::analytic::{payoff as max_payoff, rainbow_price, AnalyticVariant};
use crate::error::{Error, Result};
use crate::fitted::assemble_fitted;
use crate::grid::TensorGrid;
use crate::linalg::{Factorization, SolverKind, SparseOperator, TripletBuilder};
use crate::model::ModelParams;
use crate::mpfa::SkipFaces;
use crate::mpfa::{assemble_diffusion, LinearSystem};
use crate::upwind::{assemble_upwind, UpwindOptions, UpwindOrder};

/// Spatial discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    MpfaUp1,
    MpfaUp2,
    FittedMpfaUp1,
    FittedMpfaUp2,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::MpfaUp1, Scheme::MpfaUp2, Scheme::FittedMpfaUp1, Scheme::FittedMpfaUp2];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::MpfaUp1 => "mpfa-up1",
            Scheme::MpfaUp2 => "mpfa-up2",
            Scheme::FittedMpfaUp1 => "fitted-mpfa-up1",
            Scheme::FittedMpfaUp2 => "fitted-mpfa-up2",
        }
    }

    pub fn order(&self) -> UpwindOrder {
        match self {
            Scheme::MpfaUp1 | Scheme::FittedMpfaUp1 => UpwindOrder::First,
            Scheme::MpfaUp2 | Scheme::FittedMpfaUp2 => UpwindOrder::Second,
        }
    }

    pub fn is_fitted(&self) -> bool {
        matches!(self, Scheme::FittedMpfaUp1 | Scheme::FittedMpfaUp2)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown scheme `{s}` (expected one of mpfa-up1, mpfa-up2, fitted-mpfa-up1, fitted-mpfa-up2)"
            ))
        })
    }
}

/// Diffusion plus convection fluxes of a scheme, without the reaction term.
pub fn assemble_scheme(
    scheme: Scheme,
    grid: &TensorGrid,
    params: &ModelParams,
    opts: UpwindOptions,
) -> Result<LinearSystem> {
    if scheme.is_fitted() {
        assemble_fitted(grid, params, opts, scheme.order())
    } else {
        let diffusion = assemble_diffusion(grid, params)?;
        let convection = assemble_upwind(grid, params, opts, scheme.order(), SkipFaces::default())?;
        LinearSystem::sum(&[&diffusion, &convection])
    }
}

/// `dU/dtau = a U + coupling g(tau)`.
#[derive(Debug, Clone)]
pub struct SemiDiscrete {
    pub a: SparseOperator,
    pub coupling: SparseOperator,
}

impl SemiDiscrete {
    pub fn new(scheme: Scheme, grid: &TensorGrid, params: &ModelParams, opts: UpwindOptions) -> Result<Self> {
        let sys = assemble_scheme(scheme, grid, params, opts)?;
        Self::from_fluxes(grid, &sys, params.coefficients().lambda)
    }

    /// Adds the reaction `lambda meas` and divides each row by its cell measure.
    pub fn from_fluxes(grid: &TensorGrid, fluxes: &LinearSystem, lambda: f64) -> Result<Self> {
        let meas = grid.measures();
        let mut b = TripletBuilder::new(fluxes.dim(), fluxes.dim());
        b.extend_from(&fluxes.op, 1.0);
        for (k, m) in meas.iter().enumerate() {
            b.push(k, k, lambda * m);
        }
        let inv: Vec<f64> = meas.iter().map(|m| 1.0 / m).collect();
        Ok(Self { a: b.build()?.scale_rows(&inv)?, coupling: fluxes.coupling.scale_rows(&inv)? })
    }

    /// Forcing `F(tau)` for boundary node values `g`.
    pub fn forcing(&self, node_values: &[f64]) -> Result<Vec<f64>> {
        self.coupling.matvec(node_values)
    }
}

/// θ-method configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaScheme {
    pub theta: f64,
    pub dtau: f64,
    pub n_steps: usize,
}

impl ThetaScheme {
    /// Smallest step count with `dtau <= dtau_max`, then `dtau = maturity / n_steps` exactly.
    pub fn new(theta: f64, dtau_max: f64, maturity: f64) -> Result<Self> {
        if !(dtau_max > 0.0 && maturity > 0.0) {
            return Err(Error::InvalidParameter { name: "dtau", reason: "step and maturity must be positive".into() });
        }
        let n_steps = ((maturity / dtau_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self::with_steps(theta, n_steps, maturity)
    }

    pub fn with_steps(theta: f64, n_steps: usize, maturity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter { name: "theta", reason: format!("must lie in [0, 1], got {theta}") });
        }
        if n_steps == 0 || !(maturity > 0.0) {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                reason: "need at least one step over a positive horizon".into(),
            });
        }
        Ok(Self { theta, dtau: maturity / n_steps as f64, n_steps })
    }
}

/// Values on interior cell centers in unknown order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub n: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn from_fn(grid: &TensorGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { n: grid.n(), values: grid.centers().map(|(x, y)| f(x, y)).collect() }
    }

    /// Value at interior cell `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i - 1) * self.n + (j - 1)]
    }

    /// `x y value` lines over all cell centers.
    pub fn to_surface_text(&self, grid: &TensorGrid) -> String {
        let mut out = String::new();
        for ((x, y), v) in grid.centers().zip(&self.values) {
            let _ = writeln!(out, "{x:.10e} {y:.10e} {v:.10e}");
        }
        out
    }
}

/// Max-call payoff.
pub fn payoff(x: f64, y: f64, strike: f64) -> f64 {
    max_payoff(x, y, strike)
}

/// Dirichlet data on the boundary nodes.
pub trait BoundaryProvider {
    /// Value at node `(x, y)` with time to maturity `tau`.
    fn value(&self, x: f64, y: f64, tau: f64) -> f64;

    /// Values indexed by [`TensorGrid::node_index`]; interior entries are zero.
    fn node_values(&self, grid: &TensorGrid, tau: f64) -> Vec<f64> {
        let n = grid.n();
        let mut g = vec![0.0; grid.node_count()];
        for i in 0..=n + 1 {
            for j in 0..=n + 1 {
                if !grid.is_interior(i, j) {
                    g[grid.node_index(i, j)] = self.value(grid.axis_x.node(i), grid.axis_y.node(j), tau);
                }
            }
        }
        g
    }
}

/// Closed-form price on the whole boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactBoundary {
    pub params: ModelParams,
    pub variant: AnalyticVariant,
}

impl BoundaryProvider for ExactBoundary {
    fn value(&self, x: f64, y: f64, tau: f64) -> f64 {
        rainbow_price(&self.params, x, y, tau, self.variant)
    }
}

/// Zero on both axes, closed-form price on the far edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousAxes {
    pub params: ModelParams,
    pub variant: AnalyticVariant,
}

impl BoundaryProvider for HomogeneousAxes {
    fn value(&self, x: f64, y: f64, tau: f64) -> f64 {
        if x == 0.0 || y == 0.0 {
            0.0
        } else {
            rainbow_price(&self.params, x, y, tau, self.variant)
        }
    }
}

/// Reusable θ-step for a fixed operator: the implicit matrix is factored once.
#[derive(Debug, Clone)]
pub struct ThetaStepper {
    theta: f64,
    dtau: f64,
    implicit: SparseOperator,
    explicit: SparseOperator,
    solver: Factorization,
}

impl ThetaStepper {
    pub fn new(scheme: &ThetaScheme, a: &SparseOperator, solver: SolverKind) -> Result<Self> {
        let id = SparseOperator::identity(a.rows());
        let ThetaScheme { theta, dtau, .. } = *scheme;
        let implicit = SparseOperator::linear_combination(&[(1.0, &id), (-theta * dtau, a)])?;
        let explicit = SparseOperator::linear_combination(&[(1.0, &id), ((1.0 - theta) * dtau, a)])?;
        let solver = Factorization::new(&implicit, solver)?;
        Ok(Self { theta, dtau, implicit, explicit, solver })
    }

    /// One step; returns `U^{n+1}` and the residual of the implicit solve.
    pub fn step(&self, un: &[f64], f_n: &[f64], f_n1: &[f64]) -> Result<(Vec<f64>, f64)> {
        let mut rhs = self.explicit.matvec(un)?;
        for k in 0..rhs.len() {
            rhs[k] += self.dtau * (self.theta * f_n1[k] + (1.0 - self.theta) * f_n[k]);
        }
        let x = self.solver.solve(&rhs)?;
        let (res, _) = crate::linalg::residual_check(&self.implicit, &x, &rhs)?;
        Ok((x, res))
    }
}

/// One θ-step from scratch.
pub fn step(scheme: &ThetaScheme, a: &SparseOperator, un: &[f64], f_n: &[f64], f_n1: &[f64]) -> Result<Vec<f64>> {
    Ok(ThetaStepper::new(scheme, a, SolverKind::Auto)?.step(un, f_n, f_n1)?.0)
}

/// Per-step monitoring data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub tau: f64,
    pub residual: f64,
    pub min: f64,
    pub max: f64,
    /// Solution left `[min data - tol, max data + tol]`, `tol = 1e-6 K`.
    pub range_violation: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub solution: GridFunction,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Everything [`run`] needs besides the grid and boundary data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub time: ThetaScheme,
    pub upwind: UpwindOptions,
    pub solver: SolverKind,
}

/// Integrates from the payoff at `tau = 0` to `tau = T`.
pub fn run(cfg: &RunConfig, grid: &TensorGrid, params: &ModelParams, bc: &impl BoundaryProvider) -> Result<RunOutput> {
    params.validate()?;
    let sys = SemiDiscrete::new(cfg.scheme, grid, params, cfg.upwind)?;
    integrate(&sys, &cfg.time, cfg.solver, grid, params.strike, bc)
}

/// Time loop for an assembled semi-discrete system.
pub fn integrate(
    sys: &SemiDiscrete,
    time: &ThetaScheme,
    solver: SolverKind,
    grid: &TensorGrid,
    strike: f64,
    bc: &impl BoundaryProvider,
) -> Result<RunOutput> {
    let stepper = ThetaStepper::new(time, &sys.a, solver)?;
    let mut u = GridFunction::from_fn(grid, |x, y| payoff(x, y, strike));
    let tol = 1e-6 * strike;
    let boundary_range = |g: &[f64]| {
        let n = grid.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=n + 1 {
            for j in 0..=n + 1 {
                if !grid.is_interior(i, j) {
                    let v = g[grid.node_index(i, j)];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    };
    let payoff_min = u.values.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut g_prev = bc.node_values(grid, 0.0);
    let mut f_prev = sys.forcing(&g_prev)?;
    let mut diagnostics = Vec::with_capacity(time.n_steps);
    for n in 0..time.n_steps {
        let tau = (n + 1) as f64 * time.dtau;
        let g = bc.node_values(grid, tau);
        let f = sys.forcing(&g)?;
        let (next, residual) =
            stepper.step(&u.values, &f_prev, &f).map_err(|e| Error::StepFailed { step: n + 1, source: Box::new(e) })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepFailed {
                step: n + 1,
                source: Box::new(Error::SolveFailed { residual: f64::NAN, bound: 0.0 }),
            });
        }
        let min = next.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (b_lo, b_hi) = boundary_range(&g);
        let (p_lo, p_hi) = boundary_range(&g_prev);
        let lo = payoff_min.min(b_lo).min(p_lo);
        let hi = b_hi.max(p_hi);
        diagnostics.push(StepDiagnostics {
            step: n + 1,
            tau,
            residual,
            min,
            max,
            range_violation: min < lo - tol || max > hi + tol,
        });
        u.values = next;
        g_prev = g;
        f_prev = f;
    }
    Ok(RunOutput { solution: u, diagnostics })
}
