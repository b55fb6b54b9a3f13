//! Truncated tensor-product mesh.
//!
//! An axis with `N` interior cells carries `N + 2` nodes `x_0 = 0 < x_1 < ... < x_{N+1} = x_max`.
//! Nodes `1..=N` are cell centers, nodes `0` and `N + 1` are Dirichlet boundary nodes.
//! Cell faces sit halfway between consecutive nodes, and the two outermost "faces" are
//! pinned to the boundary nodes, `x_{-1/2} = x_0` and `x_{N+3/2} = x_{N+1}`. This gives the
//! boundary nodes half-cells of their own, which the MPFA interaction volumes along the
//! boundary need for their tensor averages.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One axis of the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis1D {
    nodes: Vec<f64>,
    // faces[k] = x_{k - 1/2}, k = 0..=N+2
    faces: Vec<f64>,
}

impl Axis1D {
    /// Builds an axis from the full node list `x_0..=x_{N+1}`.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 5 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 interior cells, got {}",
                nodes.len().saturating_sub(2)
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("first node must be 0, got {}", nodes[0])));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("non-finite node".into()));
        }
        if let Some(k) = nodes.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!("nodes not strictly increasing at index {}", k + 1)));
        }
        let last = *nodes.last().unwrap();
        let mut faces = Vec::with_capacity(nodes.len() + 1);
        faces.push(0.0);
        faces.extend(nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        faces.push(last);
        Ok(Self { nodes, faces })
    }

    /// Number of interior cells `N`.
    pub fn n(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn x_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Node `x_i`, `i` in `0..=N+1`.
    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Lower face `x_{i-1/2}` of cell `i`, `i` in `0..=N+1`.
    pub fn face_lo(&self, i: usize) -> f64 {
        self.faces[i]
    }

    /// Upper face `x_{i+1/2}` of cell `i`, `i` in `0..=N+1`.
    pub fn face_hi(&self, i: usize) -> f64 {
        self.faces[i + 1]
    }

    /// Cell width `h_i = x_{i+1/2} - x_{i-1/2}`. Defined for the boundary half-cells too.
    pub fn width(&self, i: usize) -> f64 {
        self.faces[i + 1] - self.faces[i]
    }

    /// Distance between node `i` and node `i + 1`.
    pub fn spacing(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    /// Plain-text node list, one `index value` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, x) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{k} {x:.17e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let bad = || Error::InvalidGrid(format!("line {}: expected `index value`", lineno + 1));
            let idx: usize = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let x: f64 = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if idx != nodes.len() {
                return Err(Error::InvalidGrid(format!("line {}: index {idx} out of sequence", lineno + 1)));
            }
            nodes.push(x);
        }
        Self::from_nodes(nodes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// `N` interior cells with equally spaced nodes on `[0, x_max]`.
pub fn build_uniform(n_cells: usize, x_max: f64) -> Result<Axis1D> {
    check_size(n_cells, x_max)?;
    let d = x_max / (n_cells + 1) as f64;
    let mut nodes: Vec<f64> = (0..=n_cells + 1).map(|k| k as f64 * d).collect();
    nodes[n_cells + 1] = x_max;
    Axis1D::from_nodes(nodes)
}

/// Locally refined axis: node spacing grows linearly with the distance to the nearest of
/// `0` and `focus`, so the coarsest spacing is `1 + strength` times the finest.
/// `strength = 0` is exactly [`build_uniform`].
pub fn build_graded(n_cells: usize, x_max: f64, focus: f64, strength: f64) -> Result<Axis1D> {
    check_size(n_cells, x_max)?;
    if !(focus > 0.0 && focus < x_max) {
        return Err(Error::InvalidParameter { name: "focus", reason: format!("{focus} not inside (0, {x_max})") });
    }
    if !(strength >= 0.0 && strength.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "strength",
            reason: format!("{strength} must be finite and >= 0"),
        });
    }
    if strength == 0.0 {
        return build_uniform(n_cells, x_max);
    }

    let density = GradedDensity::new(x_max, focus, strength);
    let total = density.cumulative(x_max);
    let intervals = n_cells + 1;
    let mut nodes = Vec::with_capacity(intervals + 1);
    nodes.push(0.0);
    for k in 1..intervals {
        let target = total * k as f64 / intervals as f64;
        nodes.push(density.invert(target, x_max));
    }
    nodes.push(x_max);
    Axis1D::from_nodes(nodes)
}

fn check_size(n_cells: usize, x_max: f64) -> Result<()> {
    if n_cells < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 interior cells, got {n_cells}")));
    }
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err(Error::InvalidParameter { name: "x_max", reason: format!("{x_max} must be positive") });
    }
    Ok(())
}

// Node density 1 / g(x) with g(x) = 1 + c * dist(x, {0, focus}). Nodes equidistribute
// the integral of the density, so local spacing is proportional to g.
struct GradedDensity {
    focus: f64,
    c: f64,
}

impl GradedDensity {
    fn new(x_max: f64, focus: f64, strength: f64) -> Self {
        let dmax = (0.5 * focus).max(x_max - focus);
        Self { focus, c: strength / dmax }
    }

    // integral of 1 / (1 + c t) for t from 0 to s
    fn ramp(&self, s: f64) -> f64 {
        (self.c * s).ln_1p() / self.c
    }

    fn cumulative(&self, x: f64) -> f64 {
        let half = 0.5 * self.focus;
        if x <= half {
            self.ramp(x)
        } else if x <= self.focus {
            2.0 * self.ramp(half) - self.ramp(self.focus - x)
        } else {
            2.0 * self.ramp(half) + self.ramp(x - self.focus)
        }
    }

    fn invert(&self, target: f64, x_max: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, x_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cumulative(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * x_max {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Tensor product of two axes. Cell `(i, j)` is `[x_{i-1/2}, x_{i+1/2}] x [y_{j-1/2}, y_{j+1/2}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    pub axis_x: Axis1D,
    pub axis_y: Axis1D,
}

impl TensorGrid {
    pub fn new(axis_x: Axis1D, axis_y: Axis1D) -> Result<Self> {
        if axis_x.n() != axis_y.n() {
            return Err(Error::InvalidGrid(format!(
                "axes must have the same cell count, got {} and {}",
                axis_x.n(),
                axis_y.n()
            )));
        }
        Ok(Self { axis_x, axis_y })
    }

    pub fn uniform(n_cells: usize, x_max: f64, y_max: f64) -> Result<Self> {
        Self::new(build_uniform(n_cells, x_max)?, build_uniform(n_cells, y_max)?)
    }

    /// Interior cells per axis.
    pub fn n(&self) -> usize {
        self.axis_x.n()
    }

    /// Number of unknowns `N^2`.
    pub fn unknowns(&self) -> usize {
        self.n() * self.n()
    }

    /// Row-major unknown index of interior cell `(i, j)`, both 1-based: `j` runs fastest.
    pub fn unknown_index(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.n() + (j - 1)
    }

    /// Index of node `(i, j)` over the full `(N+2) x (N+2)` node set, boundary included.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * (self.n() + 2) + j
    }

    pub fn node_count(&self) -> usize {
        (self.n() + 2) * (self.n() + 2)
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        let n = self.n();
        (1..=n).contains(&i) && (1..=n).contains(&j)
    }

    /// Measure `h_i l_j` of interior cell `(i, j)`.
    pub fn cell_measure(&self, i: usize, j: usize) -> Result<f64> {
        self.check_interior(i, j)?;
        Ok(self.axis_x.width(i) * self.axis_y.width(j))
    }

    pub(crate) fn check_interior(&self, i: usize, j: usize) -> Result<()> {
        if self.is_interior(i, j) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { i, j, n: self.n() })
        }
    }

    /// Cell measures in unknown order.
    pub fn measures(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n);
        for i in 1..=n {
            for j in 1..=n {
                out.push(self.axis_x.width(i) * self.axis_y.width(j));
            }
        }
        out
    }

    /// Cell-center coordinates in unknown order.
    pub fn centers(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.n();
        (1..=n).flat_map(move |i| (1..=n).map(move |j| (self.axis_x.node(i), self.axis_y.node(j))))
    }
}

/// Free-function form of [`TensorGrid::cell_measure`].
pub fn cell_measure(grid: &TensorGrid, i: usize, j: usize) -> Result<f64> {
    grid.cell_measure(i, j)
}
