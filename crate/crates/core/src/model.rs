//! Market parameters and the coefficients of the divergence-form PDE
//!
//! `U_tau = div(M grad U) + div(f U) + lambda U`
//!
//! with `M = 1/2 [[s1^2 x^2, rho s1 s2 x y], [rho s1 s2 x y, s2^2 y^2]]`,
//! `f = (p x, q y)` and constant `lambda`.

use crate::error::{Error, Result};
use crate::grid::TensorGrid;

/// Symmetric 2x2 tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl Tensor2 {
    pub const IDENTITY: Tensor2 = Tensor2 { m11: 1.0, m12: 0.0, m22: 1.0 };

    pub fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Self { m11, m12, m22 }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.m11 * v[0] + self.m12 * v[1], self.m12 * v[0] + self.m22 * v[1]]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.m11 + self.m22);
        let rad = (0.25 * (self.m11 - self.m22).powi(2) + self.m12 * self.m12).sqrt();
        [mean - rad, mean + rad]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub r: f64,
    pub strike: f64,
    pub maturity: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return bad("sigma1", "must be positive");
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad("sigma2", "must be positive");
        }
        if !(self.rho.abs() < 1.0) {
            return bad("rho", "must satisfy |rho| < 1");
        }
        if !self.r.is_finite() {
            return bad("r", "must be finite");
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return bad("strike", "must be positive");
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return bad("maturity", "must be positive");
        }
        Ok(())
    }

    /// `rho * sigma1 * sigma2`
    pub fn covariance(&self) -> f64 {
        self.rho * self.sigma1 * self.sigma2
    }

    pub fn coefficients(&self) -> PdeCoefficients {
        PdeCoefficients::new(self)
    }
}

/// Constant coefficients of the divergence form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCoefficients {
    /// Reaction coefficient.
    pub lambda: f64,
    /// Slope of the x-velocity, `f_x = p_coef * x`.
    pub p_coef: f64,
    /// Slope of the y-velocity, `f_y = q_coef * y`.
    pub q_coef: f64,
    /// `div f = p_coef + q_coef`.
    pub omega: f64,
}

impl PdeCoefficients {
    pub fn new(params: &ModelParams) -> Self {
        let ModelParams { sigma1, sigma2, r, .. } = *params;
        let cov = params.covariance();
        let p_coef = r - sigma1 * sigma1 - 0.5 * cov;
        let q_coef = r - sigma2 * sigma2 - 0.5 * cov;
        Self {
            lambda: -3.0 * r + sigma1 * sigma1 + sigma2 * sigma2 + cov,
            p_coef,
            q_coef,
            omega: 2.0 * r - sigma1 * sigma1 - sigma2 * sigma2 - cov,
        }
    }
}

/// Where the first-order face velocity is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VelocityPoint {
    /// Face `i + 1/2` uses the velocity at node `x_{i+1}`.
    #[default]
    Shifted,
    /// Face `i + 1/2` uses the velocity at the face itself.
    Midpoint,
}

/// Velocity field `f(x, y)`.
pub fn velocity(params: &ModelParams, x: f64, y: f64) -> [f64; 2] {
    let c = params.coefficients();
    [c.p_coef * x, c.q_coef * y]
}

/// Exact average of `M` over the rectangle `[x0, x1] x [y0, y1]`.
pub fn tensor_average(params: &ModelParams, x0: f64, x1: f64, y0: f64, y1: f64) -> Tensor2 {
    let s1 = params.sigma1 * params.sigma1;
    let s2 = params.sigma2 * params.sigma2;
    Tensor2 {
        m11: s1 / 6.0 * (x1.powi(3) - x0.powi(3)) / (x1 - x0),
        m12: params.covariance() / 8.0 * (x1 + x0) * (y1 + y0),
        m22: s2 / 6.0 * (y1.powi(3) - y0.powi(3)) / (y1 - y0),
    }
}

/// Cell average `M^{ij}` of the diffusion tensor for interior cell `(i, j)`.
pub fn averaged_tensor(params: &ModelParams, grid: &TensorGrid, i: usize, j: usize) -> Result<Tensor2> {
    grid.check_interior(i, j)?;
    Ok(cell_tensor(params, grid, i, j))
}

// Also valid for the boundary half-cells (i or j in {0, N+1}).
pub(crate) fn cell_tensor(params: &ModelParams, grid: &TensorGrid, i: usize, j: usize) -> Tensor2 {
    let (ax, ay) = (&grid.axis_x, &grid.axis_y);
    tensor_average(params, ax.face_lo(i), ax.face_hi(i), ay.face_lo(j), ay.face_hi(j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_uniform, Axis1D};

    fn params() -> ModelParams {
        ModelParams { sigma1: 0.3, sigma2: 0.3, rho: 0.5, r: 0.1, strike: 100.0, maturity: 1.0 / 6.0 }
    }

    #[test]
    fn velocity_slope_value() {
        let c = params().coefficients();
        assert!((c.p_coef - (-0.0125)).abs() < 1e-15);
        assert_eq!(velocity(&params(), 0.0, 0.0), [0.0, 0.0]);
    }

    #[test]
    fn lambda_and_omega_relations() {
        let c = params().coefficients();
        assert!((c.omega - (c.p_coef + c.q_coef)).abs() < 1e-15);
        // lambda = -(omega + r)
        assert!((c.lambda + c.omega + 0.1).abs() < 1e-15);
    }

    #[test]
    fn m11_on_unit_cell() {
        let p = ModelParams { sigma1: 1.0, ..params() };
        let t = tensor_average(&p, 0.0, 1.0, 2.0, 3.0);
        assert!((t.m11 - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn zero_correlation_has_no_cross_term() {
        let p = ModelParams { rho: 0.0, ..params() };
        let g = TensorGrid::new(build_uniform(5, 10.0).unwrap(), build_uniform(5, 10.0).unwrap()).unwrap();
        let t = averaged_tensor(&p, &g, 2, 3).unwrap();
        assert_eq!(t.m12, 0.0);
        assert!(averaged_tensor(&p, &g, 0, 3).is_err());
        assert!(averaged_tensor(&p, &g, 6, 3).is_err());
    }

    #[test]
    fn boundary_half_cell_tensor_is_definite() {
        let ax = Axis1D::from_nodes(vec![0.0, 1.0, 2.5, 3.0, 4.0]).unwrap();
        let g = TensorGrid::new(ax.clone(), ax).unwrap();
        let t = cell_tensor(&params(), &g, 0, 0);
        assert!(t.eigenvalues()[0] > 0.0);
    }

    #[test]
    fn validation() {
        assert!(params().validate().is_ok());
        assert!(ModelParams { rho: 1.0, ..params() }.validate().is_err());
        assert!(ModelParams { sigma2: 0.0, ..params() }.validate().is_err());
        assert!(ModelParams { maturity: 0.0, ..params() }.validate().is_err());
    }
}
