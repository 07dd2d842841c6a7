//! Estimation of central dependence subspaces: the linear reductions of the
//! covariates that carry a conditional association measure (Spearman's rho,
//! Blomqvist's beta, ...) between two responses.
//!
//! Pseudo-observations `Û` from estimated conditional margins are turned into
//! pseudo-responses `g(Û₁, Û₂)` whose conditional mean is the measure; the
//! outer product of local-linear gradients of these responses (OPG),
//! optionally iterated with shrinking bandwidths, then estimates the subspace.
//!
//! ```
//! use depsub::{copula_truth, estimate, generate, subspace_distance, CopulaFamily, Design,
//!              EstimateRequest, EstimatorSettings, MarginMode, MeasureKind, Method};
//! use rand::SeedableRng;
//!
//! let design = Design::new(400, 5, 1, 1.5, CopulaFamily::Gaussian)?;
//! let data = generate(&design, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
//! let request = EstimateRequest {
//!     d: 1,
//!     measure: MeasureKind::Spearman,
//!     margins: MarginMode::Known,
//!     method: Method::Opga,
//!     model: None,
//! };
//! let est = estimate(&data, &request, &EstimatorSettings::default())?;
//! let err = subspace_distance(&est.basis, &copula_truth(5, 1)?)?;
//! assert!((0.0..=1.0).contains(&err));
//! # Ok::<(), depsub::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod copula;
pub mod dataset;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod local_linear;
pub mod margins;
pub mod measures;
pub mod opg;
pub mod pipeline;
pub mod sim;
pub mod stats;
pub mod study;

pub use copula::{spearman_of, tau_to_param, CopulaFamily, CopulaParam};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use kernels::{product_kernel, KernelSpec};
pub use linalg::{
    eig_sym, pinv_sym, subspace_distance, weighted_ls, DenseMatrix, EigenDecomposition, Ridge,
    SubspaceBasis,
};
pub use local_linear::{
    ll_fit, smoothed_cdf_curve, smoothed_cdf_fit, CdfBandwidths, LocalLinearFit, ProjectionContext,
};
pub use margins::{
    margins_known, margins_nonparametric, margins_parametric, MarginMode, MarginModel,
    NonparametricMargins,
};
pub use measures::{build_pseudo_responses, Grid, MeasureKind, PseudoResponses};
pub use opg::{
    adaptive_opg, default_schedule, opg_matrix, opg_single_pass, trimming_from_quantiles,
    BandwidthSchedule, OpgOptions, OpgResult, TrimmingSet,
};
pub use pipeline::{
    estimate, pseudo_observations, Estimate, EstimateRequest, EstimatorSettings, Method,
};
pub use sim::{
    copula_truth, fit_parametric_baseline, generate, generate_seeded, margin_truths, run_replicate,
    tau_link, Design, ReplicateRecord, Scenario,
};
