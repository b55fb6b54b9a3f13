//! Closed-form price of the European call on the maximum of two assets, and a Monte Carlo
//! estimate of the same price.

use libm::erfc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::ModelParams;

const FRAC_1_2PI: f64 = 1.0 / (2.0 * std::f64::consts::PI);
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

// Gauss-Legendre nodes on [-1, 0] and weights, 6, 12 and 20 points (half of each rule).
#[allow(clippy::excessive_precision)]
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];
#[allow(clippy::excessive_precision)]
const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];
#[allow(clippy::excessive_precision)]
const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Query for [`bvn_cdf`]: `P(X < a, Y < b)` for standard normals with correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvnQuery {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
}

/// Bivariate standard normal CDF `P(X < a, Y < b)`.
pub fn bvn_cdf(q: BvnQuery) -> f64 {
    let BvnQuery { a, b, rho } = q;
    if a.is_nan() || b.is_nan() || rho.is_nan() {
        return f64::NAN;
    }
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return 0.0;
    }
    if a == f64::INFINITY {
        return norm_cdf(b);
    }
    if b == f64::INFINITY {
        return norm_cdf(a);
    }
    if rho >= 1.0 {
        return norm_cdf(a.min(b));
    }
    if rho <= -1.0 {
        return (norm_cdf(a) - norm_cdf(-b)).max(0.0);
    }
    upper_orthant(-a, -b, rho).clamp(0.0, 1.0)
}

/// `P(X > h, Y > k)`, Drezner-Wesolowsky with Genz's refinements for `|r|` near 1.
fn upper_orthant(h: f64, k: f64, r: f64) -> f64 {
    let quad: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        if r != 0.0 {
            let hs = 0.5 * (h * h + k * k);
            let asr = 0.5 * r.asin();
            for &(w, x) in quad {
                for s in [-1.0, 1.0] {
                    let sn = (asr * (s * x + 1.0)).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr * FRAC_1_2PI;
        }
        return bvn + norm_cdf(-h) * norm_cdf(-k);
    }

    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -0.5 * (b_s / a_s + hk);
        if asr > -100.0 {
            bvn = a * asr.exp() * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if -hk < 100.0 {
            let b = b_s.sqrt();
            bvn -= (-0.5 * hk).exp() * SQRT_2PI * norm_cdf(-b / a) * b * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a *= 0.5;
        for &(w, x) in quad {
            for s in [-1.0, 1.0] {
                let xs = (a * (s * x + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let asr = -0.5 * (b_s / xs + hk);
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn * FRAC_1_2PI;
    }
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        bvn = -bvn;
        if k > h {
            if h < 0.0 {
                bvn += norm_cdf(k) - norm_cdf(h);
            } else {
                bvn += norm_cdf(-h) - norm_cdf(-k);
            }
        }
        bvn
    }
}

/// Black-Scholes call with time to maturity `tau`.
pub fn bs_call(spot: f64, strike: f64, r: f64, sigma: f64, tau: f64) -> f64 {
    let disc = (-r * tau).exp();
    if spot <= 0.0 {
        return 0.0;
    }
    let vol = sigma * tau.sqrt();
    if tau <= 0.0 || vol <= 0.0 {
        return (spot - strike * disc).max(0.0);
    }
    let d1 = ((spot / strike).ln() + (r + 0.5 * sigma * sigma) * tau) / vol;
    spot * norm_cdf(d1) - strike * disc * norm_cdf(d1 - vol)
}

/// Terminal payoff of the max-call.
pub fn payoff(x: f64, y: f64, strike: f64) -> f64 {
    (x.max(y) - strike).max(0.0)
}

/// How the two asset legs of the closed form are discounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnalyticVariant {
    /// Cost of carry equal to the rate: asset legs undiscounted.
    #[default]
    Standard,
    /// Asset legs multiplied by `exp(-r tau)`.
    AsPrinted,
}

/// Spot prices plus model; the price is taken at the model maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticInputs {
    pub x: f64,
    pub y: f64,
    pub params: ModelParams,
}

/// Closed-form max-call price at the configured maturity.
pub fn rainbow_max_call(inp: &AnalyticInputs, variant: AnalyticVariant) -> Result<f64> {
    let t = inp.params.maturity;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter { name: "maturity", reason: "must be positive".into() });
    }
    Ok(rainbow_price(&inp.params, inp.x, inp.y, t, variant))
}

/// Max-call price with time to maturity `tau`; the payoff for `tau <= 0`.
pub fn rainbow_price(params: &ModelParams, x: f64, y: f64, tau: f64, variant: AnalyticVariant) -> f64 {
    let ModelParams { sigma1: s1, sigma2: s2, rho, r, strike, .. } = *params;
    if tau <= 0.0 {
        return payoff(x, y, strike);
    }
    if x <= 0.0 {
        return bs_call(y, strike, r, s2, tau);
    }
    if y <= 0.0 {
        return bs_call(x, strike, r, s1, tau);
    }
    let sig = (s1 * s1 + s2 * s2 - 2.0 * rho * s1 * s2).max(0.0).sqrt();
    let st = tau.sqrt();
    if sig * st < 1e-12 {
        return bs_call(x.max(y), strike, r, s1, tau);
    }
    let d = ((x / y).ln() + 0.5 * sig * sig * tau) / (sig * st);
    let y1 = ((x / strike).ln() + (r + 0.5 * s1 * s1) * tau) / (s1 * st);
    let y2 = ((y / strike).ln() + (r + 0.5 * s2 * s2) * tau) / (s2 * st);
    let rho1 = ((s1 - rho * s2) / sig).clamp(-1.0, 1.0);
    let rho2 = ((s2 - rho * s1) / sig).clamp(-1.0, 1.0);
    let m = |a, b, rho| bvn_cdf(BvnQuery { a, b, rho });
    let leg = match variant {
        AnalyticVariant::Standard => 1.0,
        AnalyticVariant::AsPrinted => (-r * tau).exp(),
    };
    leg * (x * m(y1, d, rho1) + y * m(y2, -d + sig * st, rho2))
        - strike * (-r * tau).exp() * (1.0 - m(-y1 + s1 * st, -y2 + s2 * st, rho))
}

/// Monte Carlo price and standard error from exact terminal sampling.
///
/// Path `k` draws two independent normals in sequence from one ChaCha8 stream seeded by `seed`.
pub fn mc_price(params: &ModelParams, x: f64, y: f64, n_paths: usize, seed: u64) -> Result<(f64, f64)> {
    if n_paths < 1000 {
        return Err(Error::InvalidParameter { name: "n_paths", reason: format!("need at least 1000, got {n_paths}") });
    }
    let ModelParams { sigma1: s1, sigma2: s2, rho, r, strike, maturity: t } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let st = t.sqrt();
    let drift1 = (r - 0.5 * s1 * s1) * t;
    let drift2 = (r - 0.5 * s2 * s2) * t;
    let comp = (1.0 - rho * rho).max(0.0).sqrt();
    let disc = (-r * t).exp();
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 0..n_paths {
        let z1: f64 = rng.sample(StandardNormal);
        let w: f64 = rng.sample(StandardNormal);
        let z2 = rho * z1 + comp * w;
        let xt = x * (drift1 + s1 * st * z1).exp();
        let yt = y * (drift2 + s2 * st * z2).exp();
        let v = disc * payoff(xt, yt, strike);
        // Welford update
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (n_paths - 1) as f64;
    Ok((mean, (var / n_paths as f64).sqrt()))
}
