//! End-to-end estimation on one dataset: margins, pseudo-responses, then one
//! of the subspace estimators.

use std::fmt;
use std::str::FromStr;

use crate::copula::CopulaFamily;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::SubspaceBasis;
use crate::local_linear::CdfBandwidths;
use crate::margins::{
    margins_known, margins_nonparametric, margins_parametric, MarginMode, MarginModel,
    NonparametricMargins,
};
use crate::measures::{build_pseudo_responses, Grid, MeasureKind};
use crate::opg::{
    adaptive_opg, default_schedule, opg_single_pass, trimming_from_quantiles, BandwidthSchedule,
    OpgOptions,
};
use crate::sim::fit_parametric_baseline;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Likelihood fit in the correctly specified copula model.
    Par,
    /// A single OPG pass.
    Opg1,
    /// Adaptive OPG.
    Opga,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Par, Method::Opg1, Method::Opga];

    pub fn name(self) -> &'static str {
        match self {
            Method::Par => "par",
            Method::Opg1 => "opg1",
            Method::Opga => "opga",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Data(format!("unknown method `{s}`")))
    }
}

/// Hyperparameters shared by every estimator; `None` means the default for
/// the data at hand.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSettings {
    pub kernel: KernelSpec,
    /// Per-coordinate quantile defining the trimming box; 0 keeps every point.
    pub trim_quantile: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub h0: Option<f64>,
    pub rho: Option<f64>,
    pub h_inf: Option<f64>,
    /// Dimension of the marginal subspaces for nonparametric margins.
    pub margin_dim: usize,
    pub cdf_h: Option<f64>,
    pub cdf_b: Option<f64>,
    /// Grid for the grid-based measures; defaults to the measure's own.
    pub grid: Option<Grid>,
    pub par_max_iter: usize,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        let opts = OpgOptions::default();
        Self {
            kernel: KernelSpec::Quartic,
            trim_quantile: 0.05,
            tol: opts.tol,
            max_iter: opts.max_iter,
            h0: None,
            rho: None,
            h_inf: None,
            margin_dim: 2,
            cdf_h: None,
            cdf_b: None,
            grid: None,
            par_max_iter: 200,
        }
    }
}

impl EstimatorSettings {
    pub fn schedule(&self, n: usize, p: usize, d: usize) -> Result<BandwidthSchedule> {
        let base = default_schedule(n, p, d)?;
        let h_inf = self.h_inf.unwrap_or(base.h_inf);
        let h0 = self.h0.unwrap_or(base.h0.max(h_inf));
        BandwidthSchedule::new(h0, self.rho.unwrap_or(base.rho), h_inf)
    }

    pub fn opg_options(&self) -> OpgOptions {
        OpgOptions {
            kernel: self.kernel,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    fn cdf_bandwidths(&self, n: usize) -> CdfBandwidths {
        let base = CdfBandwidths::undersmoothed(n);
        CdfBandwidths {
            h: self.cdf_h.unwrap_or(base.h),
            b: self.cdf_b.unwrap_or(base.b),
        }
    }
}

/// Pseudo-observations under the chosen margin regime.
pub fn pseudo_observations(
    data: &Dataset,
    mode: MarginMode,
    settings: &EstimatorSettings,
) -> Result<(MarginModel, Vec<[f64; 2]>)> {
    match mode {
        MarginMode::Known => Ok((MarginModel::Known, margins_known(data)?)),
        MarginMode::Parametric => margins_parametric(data),
        MarginMode::Nonparametric => margins_nonparametric(
            data,
            &NonparametricMargins {
                d_margin: settings.margin_dim,
                kernel: settings.kernel,
                trim_quantile: settings.trim_quantile,
                opts: settings.opg_options(),
                bandwidths: Some(settings.cdf_bandwidths(data.n())),
            },
        ),
    }
}

/// What to estimate and how.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateRequest {
    pub d: usize,
    pub measure: MeasureKind,
    pub margins: MarginMode,
    pub method: Method,
    /// Copula family and signal strength; needed only by [`Method::Par`].
    pub model: Option<(CopulaFamily, f64)>,
}

#[derive(Clone, Debug)]
pub struct Estimate {
    pub basis: SubspaceBasis,
    /// Spectrum of the final OPG matrix (empty for the likelihood baseline).
    pub eigenvalues: Vec<f64>,
    pub iterations: usize,
    /// Final bandwidth (NaN for the likelihood baseline).
    pub h_final: f64,
    pub converged: bool,
    pub trimmed_fraction: f64,
    pub excluded_points: usize,
    pub margin_fallback_points: usize,
}

impl Estimate {
    /// Diagnostic labels, empty for a clean run.
    pub fn flags(&self) -> Vec<String> {
        let mut flags = Vec::new();
        if !self.converged {
            flags.push("not_converged".to_string());
        }
        if self.excluded_points > 0 {
            flags.push(format!("excluded={}", self.excluded_points));
        }
        if self.margin_fallback_points > 0 {
            flags.push(format!("margin_fallback={}", self.margin_fallback_points));
        }
        flags
    }
}

pub fn estimate(
    data: &Dataset,
    request: &EstimateRequest,
    settings: &EstimatorSettings,
) -> Result<Estimate> {
    let (n, p) = (data.n(), data.p());
    if request.d == 0 || request.d > p {
        return Err(Error::Contract(format!(
            "subspace dimension {} outside 1..={p}",
            request.d
        )));
    }
    let (model, u) = pseudo_observations(data, request.margins, settings)?;
    let margin_fallback_points = match model {
        MarginModel::Nonparametric {
            fallback_points, ..
        } => fallback_points,
        _ => 0,
    };
    if request.method == Method::Par {
        let (family, alpha) = request.model.ok_or_else(|| {
            Error::Unsupported("the likelihood baseline needs the copula family and alpha".into())
        })?;
        let start = SubspaceBasis::coordinate(p, &(0..request.d).collect::<Vec<_>>())?;
        let fit =
            fit_parametric_baseline(&data.x, &u, family, alpha, &start, settings.par_max_iter)?;
        return Ok(Estimate {
            basis: fit.basis,
            eigenvalues: Vec::new(),
            iterations: fit.iterations,
            h_final: f64::NAN,
            converged: fit.converged,
            trimmed_fraction: 0.0,
            excluded_points: 0,
            margin_fallback_points,
        });
    }
    let default_grid = request.measure.default_grid();
    let grid = settings.grid.as_ref().or(default_grid.as_ref());
    let pseudo = build_pseudo_responses(
        request.measure,
        &u,
        grid.filter(|_| request.measure.needs_grid()),
    )?;
    let schedule = settings.schedule(n, p, request.d)?;
    let trim = trimming_from_quantiles(&data.x, settings.trim_quantile)?;
    let fit = match request.method {
        Method::Opga => adaptive_opg(
            &data.x,
            &pseudo,
            request.d,
            &schedule,
            &trim,
            &settings.opg_options(),
        )?,
        Method::Opg1 => opg_single_pass(
            &data.x,
            &pseudo,
            request.d,
            &schedule,
            &trim,
            settings.kernel,
        )?,
        Method::Par => unreachable!(),
    };
    Ok(Estimate {
        basis: fit.basis,
        eigenvalues: fit.eigen.eigenvalues,
        iterations: fit.iterations,
        h_final: fit.h_final,
        converged: fit.converged,
        trimmed_fraction: fit.trimmed_fraction,
        excluded_points: fit.excluded_points,
        margin_fallback_points,
    })
}
