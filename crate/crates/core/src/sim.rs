//! Simulation model, ground-truth subspaces, the likelihood baseline and a
//! single Monte Carlo replicate.
//!
//! `X ~ N(0, ½I + ½𝟙𝟙ᵀ)`, `τ(x) = ½ + (2/5) ∏_{j≤d} tanh(α xⱼ)`,
//! `(U₁, U₂) | X ~ C_{τ(X)}`, `Y₁ = X₄²/5 + X₅²/5 + Φ⁻¹(U₁)` and
//! `Y₂ = −X₂ − X₄²/5 + Φ⁻¹(U₂)`.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::copula::{clayton_log_density, gaussian_log_density, tau_to_param, CopulaFamily};
use crate::dataset::{oracle_mean_y1, oracle_mean_y2, Dataset};
use crate::error::{contract, Error, Result};
use crate::linalg::{gram_schmidt, subspace_distance, DenseMatrix, SubspaceBasis};
use crate::margins::MarginMode;
use crate::measures::MeasureKind;
use crate::pipeline::{estimate, EstimateRequest, EstimatorSettings, Method};
use crate::stats::norm_quantile;

/// Parameters of the data-generating process.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Design {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub alpha: f64,
    pub copula: CopulaFamily,
}

impl Design {
    pub fn new(n: usize, p: usize, d: usize, alpha: f64, copula: CopulaFamily) -> Result<Self> {
        let design = Self {
            n,
            p,
            d,
            alpha,
            copula,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(contract("n must be at least 2"));
        }
        if self.p < 5 {
            return Err(contract("the responses use x5, so p must be at least 5"));
        }
        if self.d == 0 || self.d > self.p {
            return Err(contract(format!(
                "d = {} must lie in 1..={}",
                self.d, self.p
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(contract("alpha must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// `τ(x) = ½ + (2/5) ∏_{j≤d} tanh(α xⱼ)`.
pub fn tau_link(x: &[f64], alpha: f64, d: usize) -> f64 {
    0.5 + 0.4 * x[..d].iter().map(|&v| (alpha * v).tanh()).product::<f64>()
}

/// Draws one dataset, storing the true uniforms.
pub fn generate<R: Rng + ?Sized>(design: &Design, rng: &mut R) -> Dataset {
    let (n, p) = (design.n, design.p);
    let mut xs = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut row = vec![0.0; p];
    for _ in 0..n {
        let z0: f64 = StandardNormal.sample(rng);
        for v in row.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = (z0 + z) * std::f64::consts::FRAC_1_SQRT_2;
        }
        let tau = tau_link(&row, design.alpha, design.d);
        let pair = tau_to_param(design.copula, tau)
            .expect("link stays inside (0.1, 0.9)")
            .sample_pair(rng);
        y.push([
            oracle_mean_y1(&row) + norm_quantile(pair[0]),
            oracle_mean_y2(&row) + norm_quantile(pair[1]),
        ]);
        u.push(pair);
        xs.extend_from_slice(&row);
    }
    let x = DenseMatrix::from_row_major(n, p, xs).unwrap();
    Dataset::new(x, y, Some(u)).unwrap()
}

/// Draws one dataset from a `ChaCha8` stream seeded with `seed`.
pub fn generate_seeded(design: &Design, seed: u64) -> Dataset {
    generate(design, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Central copula subspace `span(e₁, …, e_d)`.
pub fn copula_truth(p: usize, d: usize) -> Result<SubspaceBasis> {
    SubspaceBasis::coordinate(p, &(0..d).collect::<Vec<_>>())
}

/// Marginal central subspaces `span(e₄, e₅)` and `span(e₂, e₄)`.
pub fn margin_truths(p: usize) -> Result<[SubspaceBasis; 2]> {
    Ok([
        SubspaceBasis::coordinate(p, &[3, 4])?,
        SubspaceBasis::coordinate(p, &[1, 3])?,
    ])
}

/// Mean copula log-likelihood as a function of the index matrix `B`, with
/// the link form and `α` known.
pub(crate) struct ParametricObjective<'a> {
    x: &'a DenseMatrix,
    family: CopulaFamily,
    alpha: f64,
    /// Normal scores (Gaussian) or logs (Clayton) of the pseudo-observations.
    s: Vec<[f64; 2]>,
}

impl<'a> ParametricObjective<'a> {
    pub(crate) fn new(
        x: &'a DenseMatrix,
        u: &[[f64; 2]],
        family: CopulaFamily,
        alpha: f64,
    ) -> Result<Self> {
        if u.len() != x.rows() {
            return Err(contract("one pseudo-observation per row required"));
        }
        if u.iter().flatten().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(contract("pseudo-observations must lie in (0, 1)"));
        }
        let s = u
            .iter()
            .map(|&[a, b]| match family {
                CopulaFamily::Gaussian => [norm_quantile(a), norm_quantile(b)],
                CopulaFamily::Clayton => [a.ln(), b.ln()],
            })
            .collect();
        Ok(Self {
            x,
            family,
            alpha,
            s,
        })
    }

    /// Log density at observation `i` and its derivative in `τ`.
    fn loglik_dtau(&self, i: usize, tau: f64) -> (f64, f64) {
        let [s1, s2] = self.s[i];
        match self.family {
            CopulaFamily::Gaussian => {
                let rho = (PI * tau / 2.0).sin();
                let drho = PI / 2.0 * (PI * tau / 2.0).cos();
                let (a, b) = (s1 * s1 + s2 * s2, s1 * s2);
                let q = 1.0 - rho * rho;
                let dl =
                    rho / q - ((rho * a - b) * q + rho * (rho * rho * a - 2.0 * rho * b)) / (q * q);
                (gaussian_log_density(rho, s1, s2), dl * drho)
            }
            CopulaFamily::Clayton => {
                let theta = 2.0 * tau / (1.0 - tau);
                let dtheta = 2.0 / ((1.0 - tau) * (1.0 - tau));
                let (a, b) = (-theta * s1, -theta * s2);
                let m = a.max(b);
                let (ea, eb) = ((a - m).exp(), (b - m).exp());
                let denom = ea + eb - (-m).exp();
                let ln_sum = m + denom.ln();
                let dln_sum = (-s1 * ea - s2 * eb) / denom;
                let dl = 1.0 / (1.0 + theta) - (s1 + s2) + ln_sum / (theta * theta)
                    - (2.0 + 1.0 / theta) * dln_sum;
                (clayton_log_density(theta, s1, s2), dl * dtheta)
            }
        }
    }

    fn index(&self, i: usize, b: &DenseMatrix) -> Vec<f64> {
        let x = self.x.row(i);
        (0..b.cols())
            .map(|k| (0..x.len()).map(|j| x[j] * b[(j, k)]).sum())
            .collect()
    }

    pub(crate) fn value(&self, b: &DenseMatrix) -> f64 {
        let n = self.x.rows();
        (0..n)
            .map(|i| {
                let s = self.index(i, b);
                self.loglik_dtau(i, tau_link(&s, self.alpha, s.len())).0
            })
            .sum::<f64>()
            / n as f64
    }

    /// Euclidean gradient in `B`.
    pub(crate) fn gradient(&self, b: &DenseMatrix) -> DenseMatrix {
        let (n, p, d) = (self.x.rows(), self.x.cols(), b.cols());
        let mut g = DenseMatrix::zeros(p, d);
        for i in 0..n {
            let s = self.index(i, b);
            let t: Vec<f64> = s.iter().map(|&v| (self.alpha * v).tanh()).collect();
            let (_, dl) = self.loglik_dtau(i, tau_link(&s, self.alpha, d));
            let x = self.x.row(i);
            for k in 0..d {
                let others: f64 = (0..d).filter(|&m| m != k).map(|m| t[m]).product();
                let dtau = 0.4 * self.alpha * (1.0 - t[k] * t[k]) * others;
                let c = dl * dtau;
                for j in 0..p {
                    g[(j, k)] += c * x[j];
                }
            }
        }
        g.scaled(1.0 / n as f64)
    }
}

/// Projection of `g` onto the tangent space of the Stiefel manifold at `b`.
pub(crate) fn stiefel_tangent(b: &DenseMatrix, g: &DenseMatrix) -> DenseMatrix {
    let btg = b.transpose().matmul(g).unwrap();
    let sym = DenseMatrix::from_fn(btg.rows(), btg.cols(), |i, j| {
        0.5 * (btg[(i, j)] + btg[(j, i)])
    });
    g.sub(&b.matmul(&sym).unwrap()).unwrap()
}

fn frobenius(m: &DenseMatrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct ParametricFit {
    pub basis: SubspaceBasis,
    pub loglik: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out before the Riemannian
    /// gradient fell below tolerance; the best iterate is returned anyway.
    pub converged: bool,
}

const PAR_GRAD_TOL: f64 = 1e-6;

/// Likelihood fit of `B` in the correctly specified copula model: Riemannian
/// gradient ascent on the Stiefel manifold with Armijo backtracking and a
/// QR retraction, started at `start`.
pub fn fit_parametric_baseline(
    x: &DenseMatrix,
    u: &[[f64; 2]],
    family: CopulaFamily,
    alpha: f64,
    start: &SubspaceBasis,
    max_iter: usize,
) -> Result<ParametricFit> {
    if start.ambient_dim() != x.cols() {
        return Err(contract(
            "starting basis does not match covariate dimension",
        ));
    }
    let objective = ParametricObjective::new(x, u, family, alpha)?;
    let mut b = start.matrix().clone();
    let mut f = objective.value(&b);
    if !f.is_finite() {
        return Err(Error::EstimationFailed(
            "log-likelihood is not finite at the start".into(),
        ));
    }
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let r = stiefel_tangent(&b, &objective.gradient(&b));
        let gnorm2 = frobenius(&r).powi(2);
        if gnorm2.sqrt() < PAR_GRAD_TOL {
            converged = true;
            break;
        }
        let mut accepted = false;
        while step > 1e-14 {
            let trial = gram_schmidt(&b.sub(&r.scaled(-step))?)?;
            let ft = objective.value(&trial);
            if ft.is_finite() && ft >= f + 1e-4 * step * gnorm2 {
                b = trial;
                f = ft;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No ascent is possible along the gradient at machine precision.
            converged = gnorm2.sqrt() < 1e-4;
            break;
        }
    }
    Ok(ParametricFit {
        basis: SubspaceBasis::from_orthonormal(b)?,
        loglik: f,
        iterations,
        converged,
    })
}

/// Seed of one replicate, a SHA-256 digest of the master seed, the
/// data-generating fields and the replicate index. Methods, measures and
/// margin modes sharing a design therefore see identical data.
pub fn derive_seed(master_seed: u64, design: &Design, replicate: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(b"depsub-replicate-v1");
    h.update(master_seed.to_le_bytes());
    h.update((design.n as u64).to_le_bytes());
    h.update((design.p as u64).to_le_bytes());
    h.update((design.d as u64).to_le_bytes());
    h.update(design.alpha.to_bits().to_le_bytes());
    h.update(design.copula.name().as_bytes());
    h.update((replicate as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// One cell of the simulation grid.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scenario {
    pub design: Design,
    pub measure: MeasureKind,
    pub margins: MarginMode,
    pub method: Method,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRecord {
    /// Distance to the true copula subspace, NaN when estimation failed.
    pub error: f64,
    pub runtime_seconds: f64,
    pub iterations: usize,
    pub h_final: f64,
    pub flags: Vec<String>,
    pub seed: u64,
}

impl ReplicateRecord {
    pub fn failed(&self) -> bool {
        self.error.is_nan()
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Contract(_) => "contract",
        Error::DegenerateNeighborhood { .. } => "degenerate",
        Error::EstimationFailed(_) => "estimation",
        Error::Unsupported(_) => "unsupported",
        Error::Data(_) => "data",
    }
}

/// Generates the replicate's data, estimates the copula subspace and
/// measures the error. Failures yield a NaN error and a `failed:` flag
/// rather than an `Err`.
pub fn run_replicate(
    scenario: &Scenario,
    replicate: usize,
    master_seed: u64,
    settings: &EstimatorSettings,
) -> Result<ReplicateRecord> {
    scenario.design.validate()?;
    let design = &scenario.design;
    let seed = derive_seed(master_seed, design, replicate);
    let data = generate_seeded(design, seed);
    let truth = copula_truth(design.p, design.d)?;
    let request = EstimateRequest {
        d: design.d,
        measure: scenario.measure,
        margins: scenario.margins,
        method: scenario.method,
        model: Some((design.copula, design.alpha)),
    };
    let started = Instant::now();
    let outcome = estimate(&data, &request, settings);
    let runtime_seconds = started.elapsed().as_secs_f64();
    Ok(match outcome {
        Ok(est) => ReplicateRecord {
            error: subspace_distance(&est.basis, &truth)?,
            runtime_seconds,
            iterations: est.iterations,
            h_final: est.h_final,
            flags: est.flags(),
            seed,
        },
        Err(e) => ReplicateRecord {
            error: f64::NAN,
            runtime_seconds,
            iterations: 0,
            h_final: f64::NAN,
            flags: vec![format!("failed:{}", error_kind(&e))],
            seed,
        },
    })
}
