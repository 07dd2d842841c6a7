//! Pseudo-observations `Ûᵢ = (F̂₁(Yᵢ₁ | Xᵢ), F̂₂(Yᵢ₂ | Xᵢ))` under three
//! regimes for the conditional margins.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataset::{oracle_mean_y1, oracle_mean_y2, Dataset};
use crate::error::{contract, Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{weighted_ls, DenseMatrix, Ridge, SubspaceBasis};
use crate::local_linear::{clamp_unit, smoothed_indicators, CdfBandwidths, LocalSmoother};
use crate::measures::PseudoResponses;
use crate::opg::{adaptive_opg, default_schedule, trimming_from_quantiles, OpgOptions};
use crate::stats::norm_cdf;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum MarginMode {
    /// True uniforms stored with simulated data.
    Known,
    /// Gaussian location model on the true feature sets.
    Parametric,
    /// Marginal OPG followed by a smoothed conditional CDF.
    Nonparametric,
}

impl MarginMode {
    pub const ALL: [MarginMode; 3] = [
        MarginMode::Known,
        MarginMode::Parametric,
        MarginMode::Nonparametric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MarginMode::Known => "known",
            MarginMode::Parametric => "parametric",
            MarginMode::Nonparametric => "nonparametric",
        }
    }
}

impl fmt::Display for MarginMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MarginMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Data(format!("unknown margin mode `{s}`")))
    }
}

/// Fitted description of the two conditional margins.
#[derive(Clone, Debug, PartialEq)]
pub enum MarginModel {
    Known,
    /// Intercept and slopes on `(x₄², x₅²)` for `Y₁` and `(x₂, x₄²)` for
    /// `Y₂`; the noise scale is fixed at one.
    Parametric {
        coefficients: [[f64; 3]; 2],
    },
    Nonparametric {
        bases: [SubspaceBasis; 2],
        bandwidths: CdfBandwidths,
        /// Observations whose CDF neighbourhood stayed degenerate after
        /// widening and fell back to the unconditional smoothed CDF.
        fallback_points: usize,
    },
}

impl MarginModel {
    pub fn mode(&self) -> MarginMode {
        match self {
            MarginModel::Known => MarginMode::Known,
            MarginModel::Parametric { .. } => MarginMode::Parametric,
            MarginModel::Nonparametric { .. } => MarginMode::Nonparametric,
        }
    }
}

/// Exact conditional probability-integral transform of one observation
/// under the simulation model.
pub fn oracle_pit(x: &[f64], y: [f64; 2]) -> [f64; 2] {
    [
        norm_cdf(y[0] - oracle_mean_y1(x)),
        norm_cdf(y[1] - oracle_mean_y2(x)),
    ]
}

/// The stored true uniforms; only available for simulated data.
pub fn margins_known(data: &Dataset) -> Result<Vec<[f64; 2]>> {
    data.u_true.clone().ok_or_else(|| {
        Error::Unsupported("known margins need stored true uniforms (u1,u2 columns)".into())
    })
}

fn parametric_features(x: &[f64]) -> [[f64; 3]; 2] {
    [[1.0, x[3] * x[3], x[4] * x[4]], [1.0, x[1], x[3] * x[3]]]
}

/// Least-squares fit of each response on its true features, the Gaussian
/// location MLE with unit noise scale; `Ûᵢⱼ = Φ(Yᵢⱼ − μ̂ⱼ(Xᵢ))`.
pub fn margins_parametric(data: &Dataset) -> Result<(MarginModel, Vec<[f64; 2]>)> {
    let n = data.n();
    if data.p() < 5 {
        return Err(Error::Unsupported(
            "parametric margins need at least 5 covariates".into(),
        ));
    }
    let features: Vec<[[f64; 3]; 2]> = (0..n).map(|i| parametric_features(data.x.row(i))).collect();
    let ones = vec![1.0; n];
    let mut coefficients = [[0.0; 3]; 2];
    for (j, coef) in coefficients.iter_mut().enumerate() {
        let design = DenseMatrix::from_fn(n, 3, |i, k| features[i][j][k]);
        let beta = weighted_ls(&design, &data.response(j), &ones, Ridge::Auto)?;
        coef.copy_from_slice(&beta);
    }
    let u = (0..n)
        .map(|i| {
            let mut out = [0.0; 2];
            for j in 0..2 {
                let mu: f64 = features[i][j]
                    .iter()
                    .zip(&coefficients[j])
                    .map(|(f, b)| f * b)
                    .sum();
                out[j] = clamp_unit(norm_cdf(data.y[i][j] - mu), n);
            }
            out
        })
        .collect();
    Ok((MarginModel::Parametric { coefficients }, u))
}

/// Settings of the nonparametric margin estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonparametricMargins {
    /// Dimension of each marginal mean subspace.
    pub d_margin: usize,
    pub kernel: KernelSpec,
    pub trim_quantile: f64,
    pub opts: OpgOptions,
    /// Defaults to `h = n^{-1/4}`, `b = n^{-1/2}`.
    pub bandwidths: Option<CdfBandwidths>,
}

impl Default for NonparametricMargins {
    fn default() -> Self {
        Self {
            d_margin: 2,
            kernel: KernelSpec::Quartic,
            trim_quantile: 0.05,
            opts: OpgOptions::default(),
            bandwidths: None,
        }
    }
}

/// Per response: adaptive OPG on `Yⱼ` for the marginal subspace, then the
/// smoothed conditional CDF evaluated at each observation's own `(Yᵢⱼ, Xᵢ)`
/// (all `n` points used, no leave-one-out).
pub fn margins_nonparametric(
    data: &Dataset,
    settings: &NonparametricMargins,
) -> Result<(MarginModel, Vec<[f64; 2]>)> {
    let (n, p) = (data.n(), data.p());
    if settings.d_margin == 0 || settings.d_margin > p {
        return Err(contract(format!(
            "margin dimension {} outside 1..={p}",
            settings.d_margin
        )));
    }
    let bw = settings
        .bandwidths
        .unwrap_or_else(|| CdfBandwidths::undersmoothed(n));
    if !(bw.h > 0.0 && bw.b > 0.0) {
        return Err(contract("bandwidths must be positive"));
    }
    let schedule = default_schedule(n, p, settings.d_margin)?;
    let trim = trimming_from_quantiles(&data.x, settings.trim_quantile)?;
    let opts = OpgOptions {
        kernel: settings.kernel,
        ..settings.opts
    };

    let mut u = vec![[0.0; 2]; n];
    let mut bases = Vec::with_capacity(2);
    let mut fallback_points = 0;
    for j in 0..2 {
        let y = data.response(j);
        let pseudo = PseudoResponses::single(format!("y{}", j + 1), y.clone());
        let fit = adaptive_opg(&data.x, &pseudo, settings.d_margin, &schedule, &trim, &opts)?;
        let smoother = LocalSmoother::new(&data.x, fit.basis.matrix(), settings.kernel)?;
        let values: Vec<Result<Option<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let targets = smoothed_indicators(y[i], &y, bw.b, settings.kernel);
                match smoother.fit_at_sample_widening(i, bw.h, &[&targets]) {
                    Ok(mut f) => Ok(Some(f.pop().unwrap().value)),
                    Err(Error::DegenerateNeighborhood { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        for (i, v) in values.into_iter().enumerate() {
            let value = match v? {
                Some(v) => v,
                None => {
                    fallback_points += 1;
                    smoothed_indicators(y[i], &y, bw.b, settings.kernel)
                        .iter()
                        .sum::<f64>()
                        / n as f64
                }
            };
            u[i][j] = clamp_unit(value, n);
        }
        bases.push(fit.basis);
    }
    let bases: [SubspaceBasis; 2] = bases.try_into().unwrap();
    Ok((
        MarginModel::Nonparametric {
            bases,
            bandwidths: bw,
            fallback_points,
        },
        u,
    ))
}
