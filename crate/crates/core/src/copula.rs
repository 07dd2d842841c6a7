//! Bivariate Gaussian and Clayton copulas parameterized through Kendall's tau.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::stats::{norm_cdf, norm_quantile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Gaussian,
    Clayton,
}

impl CopulaFamily {
    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::Clayton => "clayton",
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(CopulaFamily::Gaussian),
            "clayton" => Ok(CopulaFamily::Clayton),
            other => Err(Error::Data(format!("unknown copula family `{other}`"))),
        }
    }
}

/// A copula family with its parameter: the correlation `ρ ∈ (−1, 1)` for
/// the Gaussian family, `θ > 0` for Clayton.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CopulaParam {
    family: CopulaFamily,
    theta: f64,
}

/// Largest double below one; samples are kept strictly inside `(0, 1)`.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

fn open_unit(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, ONE_MINUS)
}

impl CopulaParam {
    pub fn new(family: CopulaFamily, theta: f64) -> Result<Self> {
        let ok = match family {
            CopulaFamily::Gaussian => theta.abs() < 1.0,
            CopulaFamily::Clayton => theta > 0.0 && theta.is_finite(),
        };
        if !ok {
            return Err(contract(format!("invalid {family} parameter {theta}")));
        }
        Ok(Self { family, theta })
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Population Kendall's tau.
    pub fn kendall_tau(&self) -> f64 {
        match self.family {
            CopulaFamily::Gaussian => 2.0 / PI * self.theta.asin(),
            CopulaFamily::Clayton => self.theta / (self.theta + 2.0),
        }
    }

    /// One draw `(u₁, u₂) ∈ (0, 1)²`.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        match self.family {
            CopulaFamily::Gaussian => {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let rho = self.theta;
                let w = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
                [open_unit(norm_cdf(z1)), open_unit(norm_cdf(w))]
            }
            CopulaFamily::Clayton => {
                let u1: f64 = Open01.sample(rng);
                let v: f64 = Open01.sample(rng);
                [u1, clayton_conditional_inverse(self.theta, u1, v)]
            }
        }
    }

    /// Copula CDF `C(u₁, u₂)`.
    pub fn cdf(&self, u1: f64, u2: f64) -> f64 {
        if u1 <= 0.0 || u2 <= 0.0 {
            return 0.0;
        }
        match self.family {
            CopulaFamily::Clayton => {
                let t = self.theta;
                (u1.powf(-t) + u2.powf(-t) - 1.0).powf(-1.0 / t)
            }
            CopulaFamily::Gaussian => bivariate_normal_cdf(
                norm_quantile(u1.min(1.0)),
                norm_quantile(u2.min(1.0)),
                self.theta,
            ),
        }
    }

    /// Log copula density at a point of `(0, 1)²`.
    pub fn log_density(&self, u1: f64, u2: f64) -> f64 {
        match self.family {
            CopulaFamily::Gaussian => {
                gaussian_log_density(self.theta, norm_quantile(u1), norm_quantile(u2))
            }
            CopulaFamily::Clayton => clayton_log_density(self.theta, u1.ln(), u2.ln()),
        }
    }
}

/// Log density of the Gaussian copula in terms of normal scores.
pub(crate) fn gaussian_log_density(rho: f64, z1: f64, z2: f64) -> f64 {
    let s = 1.0 - rho * rho;
    -0.5 * s.ln() - (rho * rho * (z1 * z1 + z2 * z2) - 2.0 * rho * z1 * z2) / (2.0 * s)
}

/// Log density of the Clayton copula in terms of `ln u₁`, `ln u₂`.
pub(crate) fn clayton_log_density(theta: f64, ln_u1: f64, ln_u2: f64) -> f64 {
    let (a, b) = (-theta * ln_u1, -theta * ln_u2);
    let m = a.max(b);
    // ln(u₁^{-θ} + u₂^{-θ} − 1), scaled to avoid overflow
    let ln_sum = m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln();
    theta.ln_1p() - (1.0 + theta) * (ln_u1 + ln_u2) - (2.0 + 1.0 / theta) * ln_sum
}

/// `u₂ = ((v^{−θ/(1+θ)} − 1) u₁^{−θ} + 1)^{−1/θ}`, evaluated in log space.
pub(crate) fn clayton_conditional_inverse(theta: f64, u1: f64, v: f64) -> f64 {
    let a = (-theta / (1.0 + theta) * v.ln()).exp_m1();
    if a <= 0.0 {
        return ONE_MINUS;
    }
    let lt = a.ln() - theta * u1.ln();
    let l1p = if lt > 30.0 {
        lt + (-lt).exp().ln_1p()
    } else {
        lt.exp().ln_1p()
    };
    open_unit((-l1p / theta).exp())
}

/// `P(Z₁ ≤ a, Z₂ ≤ b)` for standard normals with correlation `rho`, by
/// Gauss–Legendre integration of Plackett's identity
/// `∂Φ₂/∂ρ = φ₂(a, b; ρ)`.
fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return 0.0;
    }
    if a == f64::INFINITY {
        return norm_cdf(b);
    }
    if b == f64::INFINITY {
        return norm_cdf(a);
    }
    let (nodes, weights) = gauss_legendre(64);
    let base = norm_cdf(a) * norm_cdf(b);
    let integral: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(&t, &w)| {
            let r = rho * t;
            let s = 1.0 - r * r;
            w * (-(a * a - 2.0 * r * a * b + b * b) / (2.0 * s)).exp() / (2.0 * PI * s.sqrt())
        })
        .sum();
    (base + rho * integral).clamp(0.0, 1.0)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub(crate) fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Newton iteration on P_m from the Chebyshev-like initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Copula parameter with the given Kendall's tau: `ρ = sin(πτ/2)` for the
/// Gaussian family, `θ = 2τ/(1 − τ)` for Clayton.
pub fn tau_to_param(family: CopulaFamily, tau: f64) -> Result<CopulaParam> {
    match family {
        CopulaFamily::Gaussian if tau.abs() < 1.0 => {
            CopulaParam::new(family, (PI * tau / 2.0).sin())
        }
        CopulaFamily::Clayton if tau > 0.0 && tau < 1.0 => {
            CopulaParam::new(family, 2.0 * tau / (1.0 - tau))
        }
        _ => Err(contract(format!(
            "tau {tau} outside the admissible range of the {family} family"
        ))),
    }
}

/// Population Spearman's rho `12 ∫∫ C(u, v) du dv − 3`.
pub fn spearman_of(param: &CopulaParam) -> f64 {
    match param.family {
        CopulaFamily::Gaussian => 6.0 / PI * (param.theta / 2.0).asin(),
        CopulaFamily::Clayton => {
            let (nodes, weights) = gauss_legendre(64);
            let mut acc = 0.0;
            for (&u, &wu) in nodes.iter().zip(&weights) {
                for (&v, &wv) in nodes.iter().zip(&weights) {
                    acc += wu * wv * param.cdf(u, v);
                }
            }
            12.0 * acc - 3.0
        }
    }
}
