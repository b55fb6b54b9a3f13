//! MPFA O-method diffusion operator.
//!
//! Every mesh vertex `(x_{I-1/2}, y_{J-1/2})`, `I, J` in `1..=N+1`, owns an interaction volume
//! `[x_{I-1}, x_I] x [y_{J-1}, y_J]` spanning four cells, numbered
//!
//! ```text
//!   3 (I-1, J)    4 (I, J)
//!   1 (I-1, J-1)  2 (I, J-1)
//! ```
//!
//! Inside it the solution is piecewise linear on one triangle per cell, built from the cell
//! center and two continuity points on the cell's faces. Requiring the normal flux to match
//! across the four half-edges eliminates the continuity-point values and leaves a 4x4
//! transmissibility `T` mapping the four cell values to the four half-edge fluxes.
//!
//! Half-edge `p` runs from a "minus" cell to a "plus" cell along the normal `n_p`:
//! 1: 1 -> 2 (+x), 2: 3 -> 4 (+x), 3: 1 -> 3 (+y), 4: 2 -> 4 (+y).

use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use crate::linalg::{BoundaryVector, SparseOperator, TripletBuilder};
use crate::model::{cell_tensor, ModelParams, Tensor2};

type Point = [f64; 2];

/// `(minus cell, plus cell)` of each half-edge.
const EDGE_CELLS: [(usize, usize); 4] = [(0, 1), (2, 3), (0, 2), (1, 3)];
/// Continuity points touching each cell.
const CELL_POINTS: [(usize, usize); 4] = [(0, 2), (0, 3), (1, 2), (1, 3)];
/// Cell offsets `(di, dj)` relative to `(I - 1, J - 1)`.
const CELL_OFFSETS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

/// Threshold on the 1-norm condition estimate of the local continuity matrix.
pub const MAX_LOCAL_CONDITION: f64 = 1e14;

/// Gradient weights of the linear interpolant on a triangle: `grad = sum_k w[k] * value_k`.
pub fn triangle_gradient_weights(vertices: [Point; 3]) -> Result<[Point; 3]> {
    let [p0, p1, p2] = vertices;
    let area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let xs = [p0[0], p1[0], p2[0]];
    let ys = [p0[1], p1[1], p2[1]];
    let extent = |v: [f64; 3]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
    let scale = extent(xs).max(extent(ys));
    if !(area2.abs() > 1e-14 * scale * scale) {
        return Err(Error::DegenerateTriangle { area: 0.5 * area2.abs() });
    }
    let w = |a: Point, b: Point| [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
    Ok([w(p1, p2), w(p2, p0), w(p0, p1)])
}

/// Gradient of the linear function taking `values` at `vertices`.
pub fn triangle_gradient(vertices: [Point; 3], values: [f64; 3]) -> Result<Point> {
    let w = triangle_gradient_weights(vertices)?;
    Ok([
        w[0][0] * values[0] + w[1][0] * values[1] + w[2][0] * values[2],
        w[0][1] * values[0] + w[1][1] * values[1] + w[2][1] * values[2],
    ])
}

/// Geometry of one interaction volume.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGeometry {
    /// Cell centers in local numbering.
    pub centers: [Point; 4],
    /// Continuity points: 1 and 2 on the vertical faces, 3 and 4 on the horizontal faces.
    pub continuity_points: [Point; 4],
    /// Half-edge lengths.
    pub half_edges: [f64; 4],
    /// Unit normals of the half-edges, pointing from the minus to the plus cell.
    pub normals: [Point; 4],
}

impl LocalGeometry {
    /// Interaction volume with corner nodes `xs[0], xs[2]` and vertex `xs[1]` (likewise in y).
    pub fn rectangle(xs: [f64; 3], ys: [f64; 3]) -> Self {
        let [x0, xm, x1] = xs;
        let [y0, ym, y1] = ys;
        Self {
            centers: [[x0, y0], [x1, y0], [x0, y1], [x1, y1]],
            continuity_points: [[xm, y0], [xm, y1], [x0, ym], [x1, ym]],
            half_edges: [ym - y0, y1 - ym, xm - x0, x1 - xm],
            normals: [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]],
        }
    }

    /// Interaction volume around vertex `(I, J)`, `1 <= I, J <= N + 1`.
    pub fn from_grid(grid: &TensorGrid, vi: usize, vj: usize) -> Self {
        let (ax, ay) = (&grid.axis_x, &grid.axis_y);
        Self::rectangle([ax.node(vi - 1), ax.face_lo(vi), ax.node(vi)], [ay.node(vj - 1), ay.face_lo(vj), ay.node(vj)])
    }

    fn triangle(&self, cell: usize) -> [Point; 3] {
        let (a, b) = CELL_POINTS[cell];
        [self.centers[cell], self.continuity_points[a], self.continuity_points[b]]
    }
}

/// Local flux map of one interaction volume.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTransmissibility {
    /// `fluxes = matrix * cell_values`.
    pub matrix: [[f64; 4]; 4],
    /// Eliminated continuity-point values, `edge_values = edge_map * cell_values`.
    pub edge_map: [[f64; 4]; 4],
    /// One-sided flux coefficients from the plus cell: on continuity points and on cell values.
    plus_points: [[f64; 4]; 4],
    plus_cells: [[f64; 4]; 4],
    /// Condition estimate of the continuity matrix.
    pub condition: f64,
}

impl LocalTransmissibility {
    pub fn fluxes(&self, u: [f64; 4]) -> [f64; 4] {
        mat_vec(&self.matrix, u)
    }

    pub fn edge_values(&self, u: [f64; 4]) -> [f64; 4] {
        mat_vec(&self.edge_map, u)
    }

    /// Half-edge fluxes re-evaluated from the plus side with the eliminated edge values.
    pub fn plus_side_fluxes(&self, u: [f64; 4]) -> [f64; 4] {
        let v = self.edge_values(u);
        let a = mat_vec(&self.plus_points, v);
        let b = mat_vec(&self.plus_cells, u);
        [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
    }
}

fn mat_vec(m: &[[f64; 4]; 4], v: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(&v).map(|(a, b)| a * b).sum();
    }
    out
}

/// Transmissibility of one interaction volume with cell tensors in local numbering.
/// Singularities are reported against vertex `(0, 0)`; see [`assemble_diffusion`] for context.
pub fn local_transmissibility(geom: &LocalGeometry, tensors: &[Tensor2; 4]) -> Result<LocalTransmissibility> {
    local_transmissibility_at(geom, tensors, (0, 0))
}

fn local_transmissibility_at(
    geom: &LocalGeometry,
    tensors: &[Tensor2; 4],
    vertex: (usize, usize),
) -> Result<LocalTransmissibility> {
    let mut weights = [[[0.0; 2]; 3]; 4];
    for (cell, w) in weights.iter_mut().enumerate() {
        *w = triangle_gradient_weights(geom.triangle(cell))?;
    }
    // one-sided flux of cell `cell` through half-edge `p`: (own value, point a, point b)
    let one_sided = |cell: usize, p: usize| -> [f64; 3] {
        let mn = tensors[cell].apply(geom.normals[p]);
        let g = geom.half_edges[p];
        let w = &weights[cell];
        [
            g * (mn[0] * w[0][0] + mn[1] * w[0][1]),
            g * (mn[0] * w[1][0] + mn[1] * w[1][1]),
            g * (mn[0] * w[2][0] + mn[1] * w[2][1]),
        ]
    };

    let mut a = [[0.0; 4]; 4];
    let mut b = [[0.0; 4]; 4];
    let mut c = [[0.0; 4]; 4];
    let mut f = [[0.0; 4]; 4];
    let mut plus_points = [[0.0; 4]; 4];
    let mut plus_cells = [[0.0; 4]; 4];
    for (p, &(km, kp)) in EDGE_CELLS.iter().enumerate() {
        let gm = one_sided(km, p);
        let gp = one_sided(kp, p);
        let (ma, mb) = CELL_POINTS[km];
        let (pa, pb) = CELL_POINTS[kp];
        a[p][ma] += gm[1];
        a[p][mb] += gm[2];
        a[p][pa] -= gp[1];
        a[p][pb] -= gp[2];
        b[p][km] -= gm[0];
        b[p][kp] += gp[0];
        c[p][ma] += gm[1];
        c[p][mb] += gm[2];
        f[p][km] += gm[0];
        plus_points[p][pa] += gp[1];
        plus_points[p][pb] += gp[2];
        plus_cells[p][kp] += gp[0];
    }

    let inv =
        invert4(&a).ok_or(Error::SingularInteractionVolume { i: vertex.0, j: vertex.1, condition: f64::INFINITY })?;
    let condition = norm1(&a) * norm1(&inv);
    if !(condition <= MAX_LOCAL_CONDITION) {
        return Err(Error::SingularInteractionVolume { i: vertex.0, j: vertex.1, condition });
    }
    let edge_map = mat_mul(&inv, &b);
    let cv = mat_mul(&c, &edge_map);
    let mut matrix = [[0.0; 4]; 4];
    for p in 0..4 {
        for k in 0..4 {
            matrix[p][k] = cv[p][k] + f[p][k];
        }
    }
    Ok(LocalTransmissibility { matrix, edge_map, plus_points, plus_cells, condition })
}

fn mat_mul(x: &[[f64; 4]; 4], y: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    out
}

fn norm1(m: &[[f64; 4]; 4]) -> f64 {
    (0..4).map(|j| (0..4).map(|i| m[i][j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

// Gauss-Jordan with partial pivoting.
fn invert4(m: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut a = *m;
    let mut inv = [[0.0; 4]; 4];
    for (k, row) in inv.iter_mut().enumerate() {
        row[k] = 1.0;
    }
    for col in 0..4 {
        let piv = (col..4).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for k in 0..4 {
            a[col][k] /= d;
            inv[col][k] /= d;
        }
        for r in 0..4 {
            if r != col && a[r][col] != 0.0 {
                let m = a[r][col];
                for k in 0..4 {
                    a[r][k] -= m * a[col][k];
                    inv[r][k] -= m * inv[col][k];
                }
            }
        }
    }
    Some(inv)
}

/// Cell-wise diffusion tensor, defined on boundary half-cells as well.
pub trait TensorField {
    fn tensor(&self, grid: &TensorGrid, i: usize, j: usize) -> Tensor2;
}

/// Black-Scholes tensor averaged over each cell.
impl TensorField for ModelParams {
    fn tensor(&self, grid: &TensorGrid, i: usize, j: usize) -> Tensor2 {
        cell_tensor(self, grid, i, j)
    }
}

/// The same tensor on every cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformTensor(pub Tensor2);

impl TensorField for UniformTensor {
    fn tensor(&self, _: &TensorGrid, _: usize, _: usize) -> Tensor2 {
        self.0
    }
}

/// Assembled operator split into unknown and boundary-node columns:
/// `row(U) = op * U + coupling * g`, with `g` indexed by [`TensorGrid::node_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub op: SparseOperator,
    pub coupling: SparseOperator,
}

impl LinearSystem {
    /// Boundary contribution `coupling * g` for node values `g`.
    pub fn boundary_vector(&self, node_values: &[f64]) -> Result<BoundaryVector> {
        self.coupling.matvec(node_values)
    }

    /// Entry-wise sum of systems on the same grid.
    pub fn sum(parts: &[&LinearSystem]) -> Result<LinearSystem> {
        let ops: Vec<(f64, &SparseOperator)> = parts.iter().map(|s| (1.0, &s.op)).collect();
        let cps: Vec<(f64, &SparseOperator)> = parts.iter().map(|s| (1.0, &s.coupling)).collect();
        Ok(LinearSystem {
            op: SparseOperator::linear_combination(&ops)?,
            coupling: SparseOperator::linear_combination(&cps)?,
        })
    }

    /// Number of interior unknowns.
    pub fn dim(&self) -> usize {
        self.op.rows()
    }
}

/// Routes stencil entries either to the unknown columns or to the boundary coupling.
pub(crate) struct StencilBuilder<'g> {
    grid: &'g TensorGrid,
    op: TripletBuilder,
    coupling: TripletBuilder,
}

impl<'g> StencilBuilder<'g> {
    pub(crate) fn new(grid: &'g TensorGrid) -> Self {
        let n2 = grid.unknowns();
        Self { grid, op: TripletBuilder::new(n2, n2), coupling: TripletBuilder::new(n2, grid.node_count()) }
    }

    /// Adds `value * U(col)` to the row of interior cell `row`.
    pub(crate) fn add(&mut self, row: (usize, usize), col: (usize, usize), value: f64) {
        if value == 0.0 {
            return;
        }
        let r = self.grid.unknown_index(row.0, row.1);
        if self.grid.is_interior(col.0, col.1) {
            self.op.push(r, self.grid.unknown_index(col.0, col.1), value);
        } else {
            self.coupling.push(r, self.grid.node_index(col.0, col.1), value);
        }
    }

    pub(crate) fn finish(self) -> Result<LinearSystem> {
        Ok(LinearSystem { op: self.op.build()?, coupling: self.coupling.build()? })
    }
}

/// Faces whose MPFA flux is left out of the assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SkipFaces {
    /// West faces of the first column, `i = 1`.
    pub first_column_west: bool,
    /// South faces of the first row, `j = 1`.
    pub first_row_south: bool,
}

/// MPFA diffusion operator for the averaged Black-Scholes tensor.
pub fn assemble_diffusion(grid: &TensorGrid, params: &ModelParams) -> Result<LinearSystem> {
    assemble_diffusion_with(grid, params, SkipFaces::default())
}

/// MPFA operator for any tensor field. Row `(i, j)` is the net outward flux
/// `sum_faces int (M grad U) . n` through the boundary of cell `(i, j)`.
pub fn assemble_diffusion_with(grid: &TensorGrid, field: &impl TensorField, skip: SkipFaces) -> Result<LinearSystem> {
    let n = grid.n();
    let mut sb = StencilBuilder::new(grid);
    for vi in 1..=n + 1 {
        for vj in 1..=n + 1 {
            let cells = CELL_OFFSETS.map(|(di, dj)| (vi - 1 + di, vj - 1 + dj));
            let tensors = cells.map(|(i, j)| field.tensor(grid, i, j));
            let geom = LocalGeometry::from_grid(grid, vi, vj);
            let t = local_transmissibility_at(&geom, &tensors, (vi, vj))?;
            for (p, &(km, kp)) in EDGE_CELLS.iter().enumerate() {
                let horizontal = p < 2;
                let minus = cells[km];
                let plus = cells[kp];
                let skip_plus = if horizontal {
                    skip.first_column_west && plus.0 == 1
                } else {
                    skip.first_row_south && plus.1 == 1
                };
                for (k, &col) in cells.iter().enumerate() {
                    let coef = t.matrix[p][k];
                    if grid.is_interior(minus.0, minus.1) {
                        sb.add(minus, col, coef);
                    }
                    if grid.is_interior(plus.0, plus.1) && !skip_plus {
                        sb.add(plus, col, -coef);
                    }
                }
            }
        }
    }
    sb.finish()
}
