//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use fitted_mpfa::grid::{build_graded, build_uniform};
use fitted_mpfa::linalg::SparseOperator;
use fitted_mpfa::{ModelParams, TensorGrid};
use nalgebra::{DMatrix, DVector};

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol.max(1e-15 * v.abs()) || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Kronrod quadrature with absolute tolerance `tol`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    adapt(&mut f, a, b, tol, 30)
}

/// [`integrate`] over the pieces of `[a, b]` cut at `breaks`; for integrands with kinks.
pub fn integrate_pieces(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|t| *t > a && *t < b).collect();
    cuts.sort_by(f64::total_cmp);
    let mut lo = a;
    let mut total = 0.0;
    for hi in cuts.into_iter().chain([b]) {
        total += adapt(&mut f, lo, hi, tol, 30);
        lo = hi;
    }
    total
}

const LOWER: f64 = -12.0;

/// `P(X < a, Y < b)` by nested quadrature of the bivariate density.
pub fn bvn_reference(a: f64, b: f64, rho: f64) -> f64 {
    let a = a.min(-LOWER);
    let b = b.min(-LOWER);
    let s2 = 1.0 - rho * rho;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s2.sqrt());
    integrate(
        |x| integrate(|y| norm * (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * s2)).exp(), LOWER, b, 1e-17),
        LOWER,
        a,
        1e-16,
    )
}

/// Standard normal CDF from the density alone.
pub fn normal_reference(a: f64) -> f64 {
    let c = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    integrate(|x| c * (-0.5 * x * x).exp(), LOWER, a.min(-LOWER), 1e-17)
}

pub fn to_dense(op: &SparseOperator) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(op.rows(), op.cols());
    for (r, c, v) in op.iter() {
        m[(r, c)] += v;
    }
    m
}

pub fn from_dense(m: &DMatrix<f64>) -> SparseOperator {
    let mut t = Vec::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)] != 0.0 {
                t.push((r, c, m[(r, c)]));
            }
        }
    }
    fitted_mpfa::linalg::assemble(m.nrows(), m.ncols(), t).unwrap()
}

pub fn dense_solve(op: &SparseOperator, rhs: &[f64]) -> Vec<f64> {
    let x = to_dense(op).lu().solve(&DVector::from_column_slice(rhs)).expect("nonsingular");
    x.as_slice().to_vec()
}

pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.exp()
}

/// Five-point scheme for `div(grad U)`: each face couples the two adjacent nodes with weight
/// `face length / node distance`. Returns dense `(op, coupling)`.
pub fn tpfa_identity(grid: &TensorGrid) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = grid.n();
    let mut op = DMatrix::zeros(n * n, n * n);
    let mut cp = DMatrix::zeros(n * n, grid.node_count());
    let (ax, ay) = (&grid.axis_x, &grid.axis_y);
    for i in 1..=n {
        for j in 1..=n {
            let r = grid.unknown_index(i, j);
            let faces = [
                ((i + 1, j), ay.width(j) / (ax.node(i + 1) - ax.node(i))),
                ((i - 1, j), ay.width(j) / (ax.node(i) - ax.node(i - 1))),
                ((i, j + 1), ax.width(i) / (ay.node(j + 1) - ay.node(j))),
                ((i, j - 1), ax.width(i) / (ay.node(j) - ay.node(j - 1))),
            ];
            for ((ni, nj), w) in faces {
                op[(r, r)] -= w;
                if grid.is_interior(ni, nj) {
                    op[(r, grid.unknown_index(ni, nj))] += w;
                } else {
                    cp[(r, grid.node_index(ni, nj))] += w;
                }
            }
        }
    }
    (op, cp)
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Cell average of `f` over `[x0, x1] x [y0, y1]` by 5x5 Gauss-Legendre.
pub fn cell_average(f: impl Fn(f64, f64) -> f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (cx, hx, cy, hy) = (0.5 * (x0 + x1), 0.5 * (x1 - x0), 0.5 * (y0 + y1), 0.5 * (y1 - y0));
    let mut s = 0.0;
    for (u, wu) in GL5 {
        for (v, wv) in GL5 {
            s += wu * wv * f(cx + hx * u, cy + hy * v);
        }
    }
    s / 4.0
}

/// Pointwise Black-Scholes diffusion tensor `(m11, m12, m22)`.
pub fn bs_tensor(p: &ModelParams, x: f64, y: f64) -> [f64; 3] {
    [0.5 * p.sigma1 * p.sigma1 * x * x, 0.5 * p.rho * p.sigma1 * p.sigma2 * x * y, 0.5 * p.sigma2 * p.sigma2 * y * y]
}

/// Both grid kinds at size `n` on `[0, x_max]^2`.
pub fn grids(n: usize, x_max: f64) -> Vec<TensorGrid> {
    let u = build_uniform(n, x_max).unwrap();
    let g = build_graded(n, x_max, x_max / 3.0, 2.0).unwrap();
    vec![TensorGrid::new(u.clone(), u).unwrap(), TensorGrid::new(g.clone(), g).unwrap()]
}

pub fn equity(r: f64) -> ModelParams {
    ModelParams { sigma1: 0.3, sigma2: 0.3, rho: 0.5, r, strike: 100.0, maturity: 1.0 / 6.0 }
}
