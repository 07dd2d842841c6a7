//! Compactly supported smoothing kernels on `[-1, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Univariate kernel family. Both are symmetric, Lipschitz probability
/// densities supported on `[-1, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSpec {
    /// `K(u) = (15/16)(1 - u²)²`
    #[default]
    Quartic,
    /// `K(u) = (3/4)(1 - u²)`
    Epanechnikov,
}

impl KernelSpec {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        if !(u.abs() <= 1.0) {
            return 0.0;
        }
        let s = 1.0 - u * u;
        match self {
            KernelSpec::Quartic => 15.0 / 16.0 * s * s,
            KernelSpec::Epanechnikov => 0.75 * s,
        }
    }

    /// Antiderivative `∫_{-∞}^u K(s) ds`, in `[0, 1]`.
    pub fn integrated(self, u: f64) -> f64 {
        if u <= -1.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let v = match self {
            KernelSpec::Quartic => {
                0.5 + 15.0 / 16.0 * (u - 2.0 * u.powi(3) / 3.0 + u.powi(5) / 5.0)
            }
            KernelSpec::Epanechnikov => 0.5 + 0.75 * (u - u.powi(3) / 3.0),
        };
        v.clamp(0.0, 1.0)
    }

    /// A Lipschitz constant of the kernel on the real line.
    pub fn lipschitz(self) -> f64 {
        match self {
            KernelSpec::Quartic => 15.0 / 8.0,
            KernelSpec::Epanechnikov => 1.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelSpec::Quartic => "quartic",
            KernelSpec::Epanechnikov => "epanechnikov",
        }
    }

    /// `∏ₖ K(zₖ/h)` without the `h^{-r}` normalization. Returns zero as soon
    /// as one coordinate leaves the support.
    #[inline]
    pub(crate) fn product_unnormalized(self, z: &[f64], inv_h: f64) -> f64 {
        let mut w = 1.0;
        for &zk in z {
            let u = zk * inv_h;
            if !(u.abs() < 1.0) {
                return 0.0;
            }
            w *= self.eval(u);
        }
        w
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quartic" | "biweight" => Ok(KernelSpec::Quartic),
            "epanechnikov" => Ok(KernelSpec::Epanechnikov),
            other => Err(Error::Data(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Product kernel `K_h(z) = h^{-r} ∏ₖ K(zₖ/h)` for `z ∈ ℝʳ`.
pub fn product_kernel(spec: KernelSpec, z: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(contract("bandwidth must be positive"));
    }
    let w = spec.product_unnormalized(z, 1.0 / h);
    if w == 0.0 {
        return Ok(0.0);
    }
    Ok(w * h.powi(-(z.len() as i32)))
}
