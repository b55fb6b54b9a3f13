//! Convection operators for `div(f U)`.
//!
//! The first-order scheme integrates `f U . n` over each face and picks the face value by the
//! sign of the face velocity: a positive velocity takes the value of the cell on the low side,
//! a negative one the value on the high side. The second-order scheme integrates the expanded
//! form `f . grad U + (div f) U` with one-sided three-point derivatives on interior rows and
//! falls back to the first-order row on the ring of cells touching the boundary.

use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use crate::model::{ModelParams, VelocityPoint};
use crate::mpfa::{LinearSystem, SkipFaces, StencilBuilder};

/// One-sided first-derivative weights on three nodes: `a` on the far node, `b` on the near
/// node, `c` on the node itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivStencil3 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl DerivStencil3 {
    /// Derivative estimate from values at the node, the near node and the far node.
    pub fn apply(&self, own: f64, near: f64, far: f64) -> f64 {
        self.c * own + self.b * near + self.a * far
    }
}

/// Weights for nodes at offsets `0`, `h1` and `h1 + h2` from the evaluation point.
pub fn deriv_coeffs_3pt(h1: f64, h2: f64) -> Result<DerivStencil3> {
    if !(h1 > 0.0 && h2 > 0.0 && h1.is_finite() && h2.is_finite()) {
        return Err(Error::InvalidGrid(format!("stencil spacings must be positive, got {h1} and {h2}")));
    }
    let a = -h1 / (h2 * (h1 + h2));
    let b = (h1 + h2) / (h1 * h2);
    Ok(DerivStencil3 { a, b, c: -(a + b) })
}

/// How the first-order face flux weights the selected value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpwindForm {
    /// Face flux `|face| * max(f, 0) * U` (resp. `min`).
    #[default]
    Donor,
    /// Face flux `|face| * f * max(f, 0) * U`: the velocity appears twice.
    Literal,
}

/// Flags of the first-order scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UpwindOptions {
    pub form: UpwindForm,
    pub velocity: VelocityPoint,
}

/// Which convection scheme to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpwindOrder {
    #[default]
    First,
    Second,
}

/// First-order upwind operator; row `(i, j)` is the net outward convective flux of cell `(i, j)`.
pub fn assemble_upwind1(grid: &TensorGrid, params: &ModelParams, opts: UpwindOptions) -> Result<LinearSystem> {
    let mut sb = StencilBuilder::new(grid);
    add_upwind1(&mut sb, grid, params, opts, SkipFaces::default(), |_, _| true);
    sb.finish()
}

/// Second-order upwind operator. Needs `N >= 4`.
pub fn assemble_upwind2(grid: &TensorGrid, params: &ModelParams, opts: UpwindOptions) -> Result<LinearSystem> {
    assemble_upwind(grid, params, opts, UpwindOrder::Second, SkipFaces::default())
}

pub(crate) fn assemble_upwind(
    grid: &TensorGrid,
    params: &ModelParams,
    opts: UpwindOptions,
    order: UpwindOrder,
    skip: SkipFaces,
) -> Result<LinearSystem> {
    let n = grid.n();
    let mut sb = StencilBuilder::new(grid);
    match order {
        UpwindOrder::First => add_upwind1(&mut sb, grid, params, opts, skip, |_, _| true),
        UpwindOrder::Second => {
            if n < 4 {
                return Err(Error::InvalidGrid(format!("second-order upwinding needs N >= 4, got {n}")));
            }
            let ring = |i: usize, j: usize| i == 1 || j == 1 || i == n || j == n;
            add_upwind1(&mut sb, grid, params, opts, skip, ring);
            add_upwind2_interior(&mut sb, grid, params)?;
        }
    }
    sb.finish()
}

fn face_weight(form: UpwindForm, f: f64) -> f64 {
    match form {
        UpwindForm::Donor => 1.0,
        UpwindForm::Literal => f,
    }
}

fn add_upwind1(
    sb: &mut StencilBuilder<'_>,
    grid: &TensorGrid,
    params: &ModelParams,
    opts: UpwindOptions,
    skip: SkipFaces,
    rows: impl Fn(usize, usize) -> bool,
) {
    let n = grid.n();
    let coef = params.coefficients();
    let (ax, ay) = (&grid.axis_x, &grid.axis_y);
    let face_point = |axis: &crate::grid::Axis1D, k: usize| match opts.velocity {
        VelocityPoint::Shifted => axis.node(k + 1),
        VelocityPoint::Midpoint => axis.face_hi(k),
    };
    let keep =
        |cell: (usize, usize), skipped: bool| grid.is_interior(cell.0, cell.1) && !skipped && rows(cell.0, cell.1);

    // vertical faces between (k, j) and (k + 1, j)
    for k in 0..=n {
        let f = coef.p_coef * face_point(ax, k);
        let s = face_weight(opts.form, f);
        for j in 1..=n {
            let len = ay.width(j);
            let (lo, hi) = ((k, j), (k + 1, j));
            let c_lo = len * s * f.max(0.0);
            let c_hi = len * s * f.min(0.0);
            if keep(lo, false) {
                sb.add(lo, lo, c_lo);
                sb.add(lo, hi, c_hi);
            }
            if keep(hi, skip.first_column_west && hi.0 == 1) {
                sb.add(hi, lo, -c_lo);
                sb.add(hi, hi, -c_hi);
            }
        }
    }
    // horizontal faces between (i, k) and (i, k + 1)
    for k in 0..=n {
        let f = coef.q_coef * face_point(ay, k);
        let s = face_weight(opts.form, f);
        for i in 1..=n {
            let len = ax.width(i);
            let (lo, hi) = ((i, k), (i, k + 1));
            let c_lo = len * s * f.max(0.0);
            let c_hi = len * s * f.min(0.0);
            if keep(lo, false) {
                sb.add(lo, lo, c_lo);
                sb.add(lo, hi, c_hi);
            }
            if keep(hi, skip.first_row_south && hi.1 == 1) {
                sb.add(hi, lo, -c_lo);
                sb.add(hi, hi, -c_hi);
            }
        }
    }
}

// Rows 2..=N-1 in both directions: meas * (p x_i D_x U + q y_j D_y U + omega U).
fn add_upwind2_interior(sb: &mut StencilBuilder<'_>, grid: &TensorGrid, params: &ModelParams) -> Result<()> {
    let n = grid.n();
    let coef = params.coefficients();
    let (ax, ay) = (&grid.axis_x, &grid.axis_y);
    for i in 2..n {
        for j in 2..n {
            let meas = ax.width(i) * ay.width(j);
            let row = (i, j);
            sb.add(row, row, meas * coef.omega);

            let vx = coef.p_coef * ax.node(i);
            if vx > 0.0 {
                let st = deriv_coeffs_3pt(ax.spacing(i), ax.spacing(i + 1))?;
                sb.add(row, (i, j), meas * vx * st.c);
                sb.add(row, (i + 1, j), meas * vx * st.b);
                sb.add(row, (i + 2, j), meas * vx * st.a);
            } else if vx < 0.0 {
                let st = deriv_coeffs_3pt(ax.spacing(i - 1), ax.spacing(i - 2))?;
                sb.add(row, (i, j), -meas * vx * st.c);
                sb.add(row, (i - 1, j), -meas * vx * st.b);
                sb.add(row, (i - 2, j), -meas * vx * st.a);
            }

            let vy = coef.q_coef * ay.node(j);
            if vy > 0.0 {
                let st = deriv_coeffs_3pt(ay.spacing(j), ay.spacing(j + 1))?;
                sb.add(row, (i, j), meas * vy * st.c);
                sb.add(row, (i, j + 1), meas * vy * st.b);
                sb.add(row, (i, j + 2), meas * vy * st.a);
            } else if vy < 0.0 {
                let st = deriv_coeffs_3pt(ay.spacing(j - 1), ay.spacing(j - 2))?;
                sb.add(row, (i, j), -meas * vy * st.c);
                sb.add(row, (i, j - 1), -meas * vy * st.b);
                sb.add(row, (i, j - 2), -meas * vy * st.a);
            }
        }
    }
    Ok(())
}
