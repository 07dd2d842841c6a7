//! Local-linear kernel regression with kernel weights computed in a
//! projected coordinate system, and the smoothed conditional CDF built on it.
//!
//! At a point `x` the fit minimizes
//!
//! ```text
//! Σᵢ { tᵢ − a − bᵀ(Xᵢ − x) }² K_h(Bᵀ(Xᵢ − x))
//! ```
//!
//! over the intercept `a` (the fitted value) and the slope `b` (the gradient
//! estimate). The projection `B` only enters the weights; the regression is
//! always on all `p` covariates.

use crate::error::{contract, Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{DenseMatrix, NormalEquations, Ridge};

/// Number of bandwidth doublings tried before a neighbourhood is declared
/// unrecoverable.
pub const MAX_BANDWIDTH_DOUBLINGS: usize = 3;

/// Fitted value and gradient at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalLinearFit {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Observations that received positive kernel weight.
    pub effective_n: usize,
}

/// The projection `B` (p×r) and bandwidth `h` used inside the kernel weight.
#[derive(Clone, Debug)]
pub struct ProjectionContext {
    basis: DenseMatrix,
    h: f64,
}

impl ProjectionContext {
    pub fn new(basis: DenseMatrix, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(contract("bandwidth must be positive and finite"));
        }
        if basis.cols() > basis.rows() {
            return Err(contract("projection may not have more columns than rows"));
        }
        Ok(Self { basis, h })
    }

    /// Full-dimensional weights, `B = I`.
    pub fn identity(p: usize, h: f64) -> Result<Self> {
        Self::new(DenseMatrix::identity(p), h)
    }

    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }
}

/// Covariates together with their projections `XB`, so that repeated fits
/// under one projection only pay `O(r)` per weight.
pub(crate) struct LocalSmoother<'a> {
    data: &'a DenseMatrix,
    projected: DenseMatrix,
    spec: KernelSpec,
}

impl<'a> LocalSmoother<'a> {
    pub(crate) fn new(
        data: &'a DenseMatrix,
        basis: &DenseMatrix,
        spec: KernelSpec,
    ) -> Result<Self> {
        if basis.rows() != data.cols() {
            return Err(contract(format!(
                "projection has {} rows but covariates have {} columns",
                basis.rows(),
                data.cols()
            )));
        }
        let projected = data.matmul(basis)?;
        Ok(Self {
            data,
            projected,
            spec,
        })
    }

    fn project(&self, x: &[f64], basis: &DenseMatrix) -> Vec<f64> {
        (0..basis.cols())
            .map(|k| (0..x.len()).map(|j| x[j] * basis[(j, k)]).sum())
            .collect()
    }

    /// Local-linear fits of several target vectors at `x`, whose projection
    /// is `x_proj`, with bandwidth `h`.
    pub(crate) fn fit(
        &self,
        x: &[f64],
        x_proj: &[f64],
        h: f64,
        targets: &[&[f64]],
    ) -> Result<Vec<LocalLinearFit>> {
        let p = self.data.cols();
        let n = self.data.rows();
        let inv_h = 1.0 / h;
        let mut ne = NormalEquations::new(p + 1, targets.len());
        let mut z = vec![0.0; x_proj.len()];
        let mut row = vec![1.0; p + 1];
        for i in 0..n {
            for (zk, (&a, &b)) in z.iter_mut().zip(self.projected.row(i).iter().zip(x_proj)) {
                *zk = a - b;
            }
            let w = self.spec.product_unnormalized(&z, inv_h);
            if w == 0.0 {
                continue;
            }
            for (r, (&xi, &x0)) in row[1..].iter_mut().zip(self.data.row(i).iter().zip(x)) {
                *r = xi - x0;
            }
            ne.add(&row, w, targets.iter().map(|t| t[i]));
        }
        if ne.effective_n() < p + 1 {
            return Err(Error::DegenerateNeighborhood {
                effective_n: ne.effective_n(),
                required: p + 1,
            });
        }
        let effective_n = ne.effective_n();
        Ok(ne
            .solve(Ridge::Auto)?
            .into_iter()
            .map(|coef| LocalLinearFit {
                value: coef[0],
                gradient: coef[1..].to_vec(),
                effective_n,
            })
            .collect())
    }

    /// Fit at sample point `i`, doubling the bandwidth up to
    /// [`MAX_BANDWIDTH_DOUBLINGS`] times when the neighbourhood is degenerate.
    pub(crate) fn fit_at_sample_widening(
        &self,
        i: usize,
        h: f64,
        targets: &[&[f64]],
    ) -> Result<Vec<LocalLinearFit>> {
        let x = self.data.row(i);
        let x_proj = self.projected.row(i);
        let mut h = h;
        let mut last = None;
        for _ in 0..=MAX_BANDWIDTH_DOUBLINGS {
            match self.fit(x, x_proj, h, targets) {
                Err(e @ Error::DegenerateNeighborhood { .. }) => {
                    last = Some(e);
                    h *= 2.0;
                }
                other => return other,
            }
        }
        Err(last.unwrap())
    }

    pub(crate) fn fit_at_point(
        &self,
        x: &[f64],
        basis: &DenseMatrix,
        h: f64,
        targets: &[&[f64]],
    ) -> Result<Vec<LocalLinearFit>> {
        let x_proj = self.project(x, basis);
        self.fit(x, &x_proj, h, targets)
    }
}

fn check_point(x: &[f64], data: &DenseMatrix, n_targets: usize) -> Result<()> {
    if x.len() != data.cols() {
        return Err(contract(format!(
            "point has dimension {}, covariates have {}",
            x.len(),
            data.cols()
        )));
    }
    if n_targets != data.rows() {
        return Err(contract("one target per observation required"));
    }
    Ok(())
}

/// Local-linear estimate of `E(t | X = x)` and its gradient.
pub fn ll_fit(
    x: &[f64],
    data: &DenseMatrix,
    targets: &[f64],
    ctx: &ProjectionContext,
    spec: KernelSpec,
) -> Result<LocalLinearFit> {
    check_point(x, data, targets.len())?;
    let smoother = LocalSmoother::new(data, &ctx.basis, spec)?;
    Ok(smoother
        .fit_at_point(x, &ctx.basis, ctx.h, &[targets])?
        .pop()
        .unwrap())
}

/// Bandwidths of the smoothed conditional CDF estimator: `h` for the
/// covariates, `b` for the response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdfBandwidths {
    pub h: f64,
    pub b: f64,
}

impl CdfBandwidths {
    /// `h = n^{-1/4}`, `b = n^{-1/2}`.
    pub fn undersmoothed(n: usize) -> Self {
        let n = n as f64;
        Self {
            h: n.powf(-0.25),
            b: n.powf(-0.5),
        }
    }

    fn validate(self) -> Result<()> {
        if !(self.h > 0.0 && self.b > 0.0) {
            return Err(contract("bandwidths must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn clamp_unit(v: f64, n: usize) -> f64 {
    let eps = 1.0 / (n as f64 + 1.0);
    v.clamp(eps, 1.0 - eps)
}

/// Smoothed indicator targets `∫_{-∞}^y K_b(s − Yᵢ) ds`.
pub(crate) fn smoothed_indicators(y: f64, responses: &[f64], b: f64, spec: KernelSpec) -> Vec<f64> {
    responses
        .iter()
        .map(|&yi| spec.integrated((y - yi) / b))
        .collect()
}

/// Estimate of `F(y | X = x)`: the intercept of a local-linear fit of the
/// smoothed indicators, clamped to `[1/(n+1), 1 − 1/(n+1)]`.
pub fn smoothed_cdf_fit(
    y: f64,
    x: &[f64],
    data: &DenseMatrix,
    responses: &[f64],
    basis: &DenseMatrix,
    bw: CdfBandwidths,
    spec: KernelSpec,
) -> Result<f64> {
    bw.validate()?;
    check_point(x, data, responses.len())?;
    let smoother = LocalSmoother::new(data, basis, spec)?;
    let targets = smoothed_indicators(y, responses, bw.b, spec);
    let fit = smoother
        .fit_at_point(x, basis, bw.h, &[&targets])?
        .pop()
        .unwrap();
    Ok(clamp_unit(fit.value, data.rows()))
}

/// [`smoothed_cdf_fit`] over a grid of `y` values (sorted ascending),
/// rearranged by a running maximum so the curve is nondecreasing.
pub fn smoothed_cdf_curve(
    ys: &[f64],
    x: &[f64],
    data: &DenseMatrix,
    responses: &[f64],
    basis: &DenseMatrix,
    bw: CdfBandwidths,
    spec: KernelSpec,
) -> Result<Vec<f64>> {
    bw.validate()?;
    check_point(x, data, responses.len())?;
    if ys.windows(2).any(|w| w[0] > w[1]) {
        return Err(contract("evaluation grid must be sorted"));
    }
    let smoother = LocalSmoother::new(data, basis, spec)?;
    let target_sets: Vec<Vec<f64>> = ys
        .iter()
        .map(|&y| smoothed_indicators(y, responses, bw.b, spec))
        .collect();
    let refs: Vec<&[f64]> = target_sets.iter().map(Vec::as_slice).collect();
    let fits = smoother.fit_at_point(x, basis, bw.h, &refs)?;
    let mut running = f64::NEG_INFINITY;
    Ok(fits
        .into_iter()
        .map(|f| {
            running = running.max(clamp_unit(f.value, data.rows()));
            running
        })
        .collect())
}
