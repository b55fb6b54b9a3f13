//! Fitted-MPFA operator.
//!
//! Cells in the first column and first row have one face on the degenerate strip next to an
//! axis, where the diffusion tensor vanishes. There the total flux `(M grad U + f U) . n` is
//! replaced by the fitted flux: the one-dimensional part along the normal is solved exactly on
//! `[0, y_1]` (resp. `[0, x_1]`) and the cross-derivative part is differenced along the face.
//! All other faces keep their MPFA and upwind fluxes.

use crate::error::Result;
use crate::grid::TensorGrid;
use crate::linalg::TripletBuilder;
use crate::model::ModelParams;
use crate::mpfa::{assemble_diffusion_with, LinearSystem, SkipFaces};
use crate::upwind::{assemble_upwind, UpwindOptions, UpwindOrder};

/// Flux through one degenerate face in the direction of increasing coordinate:
/// `own * U_owner + neighbor * U_next + axis * U_axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedFluxCoeffs {
    /// Owner cell.
    pub own: f64,
    /// Next cell along the face (`(i + 1, 1)` for a south face, `(1, j + 1)` for a west face).
    pub neighbor: f64,
    /// Dirichlet value on the axis.
    pub axis: f64,
}

fn fitted_flux(first_node: f64, width: f64, diff: f64, conv: f64, cross: f64) -> FittedFluxCoeffs {
    FittedFluxCoeffs {
        own: 0.5 * first_node * (0.5 * width * (diff + conv) - cross),
        neighbor: 0.5 * cross * first_node,
        axis: -0.25 * first_node * width * (diff - conv),
    }
}

/// Flux through the south face of cell `(i, 1)`.
pub fn fitted_south_flux(grid: &TensorGrid, params: &ModelParams, i: usize) -> Result<FittedFluxCoeffs> {
    grid.check_interior(i, 1)?;
    let c = params.coefficients();
    Ok(fitted_flux(
        grid.axis_y.node(1),
        grid.axis_x.width(i),
        0.5 * params.sigma2 * params.sigma2,
        c.q_coef,
        0.5 * params.covariance() * grid.axis_x.node(i),
    ))
}

/// Flux through the west face of cell `(1, j)`.
pub fn fitted_west_flux(grid: &TensorGrid, params: &ModelParams, j: usize) -> Result<FittedFluxCoeffs> {
    grid.check_interior(1, j)?;
    let c = params.coefficients();
    Ok(fitted_flux(
        grid.axis_x.node(1),
        grid.axis_y.width(j),
        0.5 * params.sigma1 * params.sigma1,
        c.p_coef,
        0.5 * params.covariance() * grid.axis_y.node(j),
    ))
}

/// MPFA plus upwind operator with fitted fluxes on the faces next to the axes.
pub fn assemble_fitted(
    grid: &TensorGrid,
    params: &ModelParams,
    opts: UpwindOptions,
    order: UpwindOrder,
) -> Result<LinearSystem> {
    let skip = SkipFaces { first_column_west: true, first_row_south: true };
    let diffusion = assemble_diffusion_with(grid, params, skip)?;
    let convection = assemble_upwind(grid, params, opts, order, skip)?;

    let n = grid.n();
    let mut op = TripletBuilder::new(grid.unknowns(), grid.unknowns());
    let mut coupling = TripletBuilder::new(grid.unknowns(), grid.node_count());
    for part in [&diffusion, &convection] {
        op.extend_from(&part.op, 1.0);
        coupling.extend_from(&part.coupling, 1.0);
    }
    let mut add = |row: (usize, usize), col: (usize, usize), v: f64| {
        let r = grid.unknown_index(row.0, row.1);
        if grid.is_interior(col.0, col.1) {
            op.push(r, grid.unknown_index(col.0, col.1), v);
        } else {
            coupling.push(r, grid.node_index(col.0, col.1), v);
        }
    };
    // the outward normal of these faces points towards the axis, hence the minus sign
    for i in 1..=n {
        let f = fitted_south_flux(grid, params, i)?;
        add((i, 1), (i, 1), -f.own);
        add((i, 1), (i + 1, 1), -f.neighbor);
        add((i, 1), (i, 0), -f.axis);
    }
    for j in 1..=n {
        let f = fitted_west_flux(grid, params, j)?;
        add((1, j), (1, j), -f.own);
        add((1, j), (1, j + 1), -f.neighbor);
        add((1, j), (0, j), -f.axis);
    }
    Ok(LinearSystem { op: op.build()?, coupling: coupling.build()? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpfa::assemble_diffusion;

    fn params() -> ModelParams {
        ModelParams { sigma1: 0.3, sigma2: 0.3, rho: 0.5, r: 0.1, strike: 100.0, maturity: 1.0 / 6.0 }
    }

    #[test]
    fn uncorrelated_has_no_neighbor_term() {
        let g = TensorGrid::uniform(6, 300.0, 300.0).unwrap();
        let p = ModelParams { rho: 0.0, ..params() };
        assert_eq!(fitted_south_flux(&g, &p, 3).unwrap().neighbor, 0.0);
        assert_eq!(fitted_west_flux(&g, &p, 3).unwrap().neighbor, 0.0);
    }

    #[test]
    fn axis_term_vanishes_when_diffusion_matches_convection() {
        let g = TensorGrid::uniform(6, 300.0, 300.0).unwrap();
        // q = sigma2^2 / 2  <=>  r = 1.5 sigma2^2 + cov / 2
        let p = ModelParams { r: 1.5 * 0.09 + 0.5 * 0.045, ..params() };
        let scale = g.axis_y.node(1) * g.axis_x.width(2) * 0.045;
        for f in [fitted_south_flux(&g, &p, 2).unwrap(), fitted_west_flux(&g, &p, 2).unwrap()] {
            assert!(f.axis.abs() < 1e-14 * scale);
        }
    }

    #[test]
    fn swapping_axes_swaps_faces() {
        let g = TensorGrid::uniform(6, 300.0, 300.0).unwrap();
        let p = ModelParams { sigma1: 0.2, sigma2: 0.45, ..params() };
        let q = ModelParams { sigma1: 0.45, sigma2: 0.2, ..params() };
        for k in 1..=6 {
            assert_eq!(fitted_south_flux(&g, &p, k).unwrap(), fitted_west_flux(&g, &q, k).unwrap());
        }
    }

    #[test]
    fn index_range_checked() {
        let g = TensorGrid::uniform(6, 300.0, 300.0).unwrap();
        assert!(fitted_south_flux(&g, &params(), 0).is_err());
        assert!(fitted_west_flux(&g, &params(), 7).is_err());
    }

    #[test]
    fn only_axis_rows_change() {
        let g = TensorGrid::uniform(6, 300.0, 300.0).unwrap();
        let p = params();
        let opts = UpwindOptions::default();
        let fitted = assemble_fitted(&g, &p, opts, UpwindOrder::First).unwrap();
        let plain = LinearSystem::sum(&[
            &assemble_diffusion(&g, &p).unwrap(),
            &crate::upwind::assemble_upwind1(&g, &p, opts).unwrap(),
        ])
        .unwrap();
        for i in 1..=6 {
            for j in 1..=6 {
                let r = g.unknown_index(i, j);
                let a: Vec<_> = fitted.op.row(r).chain(fitted.coupling.row(r)).collect();
                let b: Vec<_> = plain.op.row(r).chain(plain.coupling.row(r)).collect();
                let same = a.len() == b.len()
                    && a.iter().zip(&b).all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= 1e-13 * y.1.abs().max(1.0));
                assert_eq!(same, i >= 2 && j >= 2, "row ({i}, {j})");
            }
        }
    }
}
