//! Outer-product-of-gradients (OPG) estimation of a central mean subspace
//! spanned by a family of regression targets, in single-pass and adaptive
//! form.
//!
//! The OPG matrix averages `∇m̂_g(Xᵢ) ∇m̂_g(Xᵢ)ᵀ` over the sample points in a
//! trimming box and over every target `g`; its leading eigenvectors estimate
//! the subspace. The adaptive variant repeats the estimate with kernel
//! weights measured in the coordinates `B̂ = V̂ diag(s(Λ̂))` of the previous
//! iterate, while the bandwidth shrinks geometrically from `h₀` to `h_∞`.
//! Directions with small eigenvalues get small scale factors, so the kernel
//! is effectively wide along them and the local fits average over far more
//! points than a full `p`-dimensional neighbourhood would contain.

use rayon::prelude::*;

use crate::error::{contract, Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{eig_sym, subspace_distance, DenseMatrix, EigenDecomposition, SubspaceBasis};
use crate::local_linear::{LocalSmoother, ProjectionContext};
use crate::measures::PseudoResponses;

/// Geometric bandwidth schedule `h_t = max(ρ h_{t−1}, h_∞)` starting at `h₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandwidthSchedule {
    pub h0: f64,
    pub rho: f64,
    pub h_inf: f64,
}

impl BandwidthSchedule {
    pub fn new(h0: f64, rho: f64, h_inf: f64) -> Result<Self> {
        if !(h_inf > 0.0 && h0 >= h_inf && h0.is_finite()) {
            return Err(contract("bandwidths must satisfy h0 >= h_inf > 0"));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(contract("rho must lie in (0, 1)"));
        }
        Ok(Self { h0, rho, h_inf })
    }

    pub fn next(&self, h: f64) -> f64 {
        (self.rho * h).max(self.h_inf)
    }
}

/// `h₀ = n^{-1/(6+p)}`, `ρ = n^{-1/(12+2p)}`, `h_∞ = n^{-1/(4+d)}`.
pub fn default_schedule(n: usize, p: usize, d: usize) -> Result<BandwidthSchedule> {
    if n < 2 || d == 0 || d > p {
        return Err(contract("default schedule needs n >= 2 and 1 <= d <= p"));
    }
    let n = n as f64;
    let (p, d) = (p as f64, d as f64);
    let h0 = n.powf(-1.0 / (6.0 + p));
    let rho = n.powf(-1.0 / (12.0 + 2.0 * p));
    let h_inf = n.powf(-1.0 / (4.0 + d));
    // For tiny p relative to d the formulas can put h_inf above h0.
    BandwidthSchedule::new(h0.max(h_inf), rho, h_inf)
}

/// Axis-aligned box restricting which sample points enter the OPG average.
#[derive(Clone, Debug, PartialEq)]
pub struct TrimmingSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TrimmingSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(contract("trimming bounds must have equal, positive length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(contract("trimming bounds must satisfy lower < upper"));
        }
        Ok(Self { lower, upper })
    }

    /// No trimming at all.
    pub fn unbounded(p: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; p],
            upper: vec![f64::INFINITY; p],
        }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| l <= v && v <= u)
    }
}

/// Linear-interpolation quantile of sorted data (the "type 7" definition).
pub(crate) fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-coordinate box between the empirical `q` and `1 − q` quantiles.
/// `q = 0` gives the sample bounding box.
pub fn trimming_from_quantiles(x: &DenseMatrix, q: f64) -> Result<TrimmingSet> {
    if !(0.0..0.5).contains(&q) {
        return Err(contract("trimming quantile must lie in [0, 0.5)"));
    }
    let (lower, upper) = (0..x.cols())
        .map(|j| {
            let mut col = x.column(j);
            col.sort_by(f64::total_cmp);
            (sorted_quantile(&col, q), sorted_quantile(&col, 1.0 - q))
        })
        .unzip();
    TrimmingSet::new(lower, upper)
}

/// OPG matrix together with bookkeeping about which points contributed.
#[derive(Clone, Debug)]
pub struct OpgMatrix {
    pub delta: DenseMatrix,
    /// Points inside the trimming set with a usable local fit.
    pub used: usize,
    /// Points inside the trimming set whose neighbourhood stayed degenerate
    /// after widening.
    pub excluded: usize,
    /// Points outside the trimming set.
    pub trimmed: usize,
}

/// `Δ̂ = Σ_g n⁻¹ Σᵢ ∇m̂_g(Xᵢ) ∇m̂_g(Xᵢ)ᵀ 1(Xᵢ ∈ D)`.
///
/// Fits run in parallel; the sum is accumulated in observation order so the
/// result does not depend on the thread count.
pub fn opg_matrix(
    x: &DenseMatrix,
    pseudo: &PseudoResponses,
    ctx: &ProjectionContext,
    trim: &TrimmingSet,
    spec: KernelSpec,
) -> Result<OpgMatrix> {
    let (n, p) = (x.rows(), x.cols());
    if pseudo.is_empty() {
        return Err(contract("at least one target vector is required"));
    }
    if pseudo.len_obs() != n {
        return Err(contract("one pseudo-response per observation required"));
    }
    if trim.dim() != p {
        return Err(contract("trimming set dimension does not match covariates"));
    }
    let smoother = LocalSmoother::new(x, ctx.basis(), spec)?;
    let targets: Vec<&[f64]> = pseudo.targets().iter().map(Vec::as_slice).collect();
    let inside: Vec<usize> = (0..n).filter(|&i| trim.contains(x.row(i))).collect();
    let fits: Vec<_> = inside
        .par_iter()
        .map(|&i| smoother.fit_at_sample_widening(i, ctx.bandwidth(), &targets))
        .collect();

    let mut acc = vec![0.0; p * p];
    let (mut used, mut excluded) = (0, 0);
    for fit in fits {
        match fit {
            Ok(per_target) => {
                used += 1;
                for f in &per_target {
                    let g = &f.gradient;
                    for a in 0..p {
                        let ga = g[a];
                        for b in a..p {
                            acc[a * p + b] += ga * g[b];
                        }
                    }
                }
            }
            Err(Error::DegenerateNeighborhood { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::EstimationFailed(format!(
            "no usable local fit ({} points trimmed, {excluded} degenerate)",
            n - inside.len()
        )));
    }
    let inv_n = 1.0 / n as f64;
    let delta = DenseMatrix::from_fn(p, p, |a, b| {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        acc[a * p + b] * inv_n
    });
    Ok(OpgMatrix {
        delta,
        used,
        excluded,
        trimmed: n - inside.len(),
    })
}

/// Stabilizing scale factors `s_j = λ̃_j (1/2 + 1/(2 Σₖ λ̃ₖ))` of the
/// eigenvalues `λ̃ = λ / max λ`, clipped at zero. Rescaling to a unit top
/// eigenvalue keeps the weights independent of the scale of the targets, so
/// the leading direction is smoothed with a bandwidth between `h` and `2h`.
/// Returns all zeros when the spectrum vanishes.
pub fn stabilizer(eigenvalues: &[f64]) -> Vec<f64> {
    let top = eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) || !top.is_finite() {
        return vec![0.0; eigenvalues.len()];
    }
    let scaled: Vec<f64> = eigenvalues.iter().map(|l| l.max(0.0) / top).collect();
    let factor = 0.5 + 0.5 / scaled.iter().sum::<f64>();
    scaled.iter().map(|l| l * factor).collect()
}

/// Iteration controls of the adaptive procedure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpgOptions {
    pub kernel: KernelSpec,
    pub max_iter: usize,
    /// Convergence threshold on the distance between consecutive top-d bases.
    pub tol: f64,
}

impl Default for OpgOptions {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Quartic,
            max_iter: 50,
            tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OpgResult {
    /// OPG matrix of the final iteration.
    pub delta: DenseMatrix,
    pub eigen: EigenDecomposition,
    /// Leading `d` eigenvectors of `delta`.
    pub basis: SubspaceBasis,
    pub iterations: usize,
    pub h_final: f64,
    /// Share of observations outside the trimming set.
    pub trimmed_fraction: f64,
    /// Points dropped in the final iteration for degenerate neighbourhoods.
    pub excluded_points: usize,
    /// False when the iteration stopped at `max_iter` (or on a vanishing
    /// spectrum) without meeting the stopping rule.
    pub converged: bool,
}

fn check_dims(x: &DenseMatrix, d: usize) -> Result<()> {
    if d == 0 || d > x.cols() {
        return Err(contract(format!(
            "subspace dimension {d} outside 1..={}",
            x.cols()
        )));
    }
    Ok(())
}

fn top_basis(eigen: &EigenDecomposition, d: usize) -> Result<SubspaceBasis> {
    SubspaceBasis::from_orthonormal(eigen.eigenvectors.leading_columns(d))
}

/// Adaptive OPG: start from `B̂ = I` at `h₀`, then re-estimate with
/// `B̂ = V̂ diag(s(Λ̂))` and `h_t = max(ρ h_{t−1}, h_∞)` until the bandwidth
/// has reached `h_∞` and consecutive top-`d` bases are within `tol`, or
/// `max_iter` iterations have run.
pub fn adaptive_opg(
    x: &DenseMatrix,
    pseudo: &PseudoResponses,
    d: usize,
    schedule: &BandwidthSchedule,
    trim: &TrimmingSet,
    opts: &OpgOptions,
) -> Result<OpgResult> {
    check_dims(x, d)?;
    if opts.max_iter == 0 {
        return Err(contract("max_iter must be at least 1"));
    }
    let p = x.cols();
    let mut weights_basis = DenseMatrix::identity(p);
    let mut h = schedule.h0;
    let mut previous: Option<SubspaceBasis> = None;
    let mut iteration = 0;
    loop {
        iteration += 1;
        let ctx = ProjectionContext::new(weights_basis, h)?;
        let m = opg_matrix(x, pseudo, &ctx, trim, opts.kernel)?;
        let eigen = eig_sym(&m.delta)?;
        let basis = top_basis(&eigen, d)?;

        let settled = match &previous {
            Some(prev) => h == schedule.h_inf && subspace_distance(prev, &basis)? < opts.tol,
            None => false,
        };
        let scales = stabilizer(&eigen.eigenvalues);
        let vanished = scales.iter().all(|s| *s == 0.0);
        if settled || vanished || iteration >= opts.max_iter {
            return Ok(OpgResult {
                delta: m.delta,
                eigen,
                basis,
                iterations: iteration,
                h_final: h,
                trimmed_fraction: m.trimmed as f64 / x.rows() as f64,
                excluded_points: m.excluded,
                converged: settled,
            });
        }
        weights_basis = eigen.eigenvectors.scale_columns(&scales);
        previous = Some(basis);
        h = schedule.next(h);
    }
}

/// One OPG pass with `B = I` at `h₀`.
pub fn opg_single_pass(
    x: &DenseMatrix,
    pseudo: &PseudoResponses,
    d: usize,
    schedule: &BandwidthSchedule,
    trim: &TrimmingSet,
    kernel: KernelSpec,
) -> Result<OpgResult> {
    check_dims(x, d)?;
    let ctx = ProjectionContext::identity(x.cols(), schedule.h0)?;
    let m = opg_matrix(x, pseudo, &ctx, trim, kernel)?;
    let eigen = eig_sym(&m.delta)?;
    let basis = top_basis(&eigen, d)?;
    Ok(OpgResult {
        delta: m.delta,
        eigen,
        basis,
        iterations: 1,
        h_final: schedule.h0,
        trimmed_fraction: m.trimmed as f64 / x.rows() as f64,
        excluded_points: m.excluded,
        converged: true,
    })
}
