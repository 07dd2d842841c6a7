//! Pseudo-responses: functions of the conditional probability-integral
//! transforms `(U₁, U₂)` whose conditional means are dependence measures of
//! the conditional copula.
//!
//! Regressing `g(Û₁, Û₂)` on `X` turns the subspace of a dependence measure
//! into a central mean subspace, which the OPG machinery can estimate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::stats::norm_quantile;

/// `12 (u₁ − ½)(u₂ − ½)`; conditional mean is Spearman's rho.
#[inline]
pub fn g_spearman(u1: f64, u2: f64) -> f64 {
    12.0 * (u1 - 0.5) * (u2 - 0.5)
}

/// `1 − 4·1(u₁ ≤ ½, u₂ ≤ ½)`, taking values in `{−3, 1}`.
#[inline]
pub fn g_blomqvist(u1: f64, u2: f64) -> f64 {
    if u1 <= 0.5 && u2 <= 0.5 {
        -3.0
    } else {
        1.0
    }
}

/// `2(|u₁ + u₂ − 1| − |u₁ − u₂|)`; conditional mean is Gini's gamma.
#[inline]
pub fn g_gini(u1: f64, u2: f64) -> f64 {
    2.0 * ((u1 + u2 - 1.0).abs() - (u1 - u2).abs())
}

/// `Φ⁻¹(u₁) Φ⁻¹(u₂)`; conditional mean is van der Waerden's coefficient.
/// Both arguments must lie strictly inside `(0, 1)`.
pub fn g_waerden(u1: f64, u2: f64) -> Result<f64> {
    if !(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0) {
        return Err(contract(format!(
            "van der Waerden scores need (u1, u2) in (0,1)², got ({u1}, {u2})"
        )));
    }
    Ok(norm_quantile(u1) * norm_quantile(u2))
}

/// Kendall concordance kernel `4·1(u₁ ≤ ū₁, u₂ ≤ ū₂) − 1` for a pair of
/// conditionally independent copies.
#[inline]
pub fn g_tau_kernel(u1: f64, u2: f64, ub1: f64, ub2: f64) -> f64 {
    if u1 <= ub1 && u2 <= ub2 {
        3.0
    } else {
        -1.0
    }
}

/// Which pseudo-response family to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Spearman,
    Blomqvist,
    Gini,
    Waerden,
    /// Indicators `1(U ≤ u)` over a grid of points `u`.
    IndicatorGrid,
    /// Mixed moments `U₁^{k₁} U₂^{k₂}` over exponent pairs with `k₁, k₂ ≥ 1`.
    MomentGrid,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 6] = [
        MeasureKind::Spearman,
        MeasureKind::Blomqvist,
        MeasureKind::Gini,
        MeasureKind::Waerden,
        MeasureKind::IndicatorGrid,
        MeasureKind::MomentGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Spearman => "spearman",
            MeasureKind::Blomqvist => "blomqvist",
            MeasureKind::Gini => "gini",
            MeasureKind::Waerden => "waerden",
            MeasureKind::IndicatorGrid => "indicator_grid",
            MeasureKind::MomentGrid => "moment_grid",
        }
    }

    pub fn needs_grid(self) -> bool {
        matches!(self, MeasureKind::IndicatorGrid | MeasureKind::MomentGrid)
    }

    /// The default grid for grid kinds: the interior lattice
    /// `{¼, ½, ¾}²` for indicators and `{(1,1), (1,2), (2,1), (2,2)}` for moments.
    pub fn default_grid(self) -> Option<Grid> {
        match self {
            MeasureKind::IndicatorGrid => {
                let levels = [0.25, 0.5, 0.75];
                Some(Grid::Points(
                    levels
                        .iter()
                        .flat_map(|&a| levels.iter().map(move |&b| [a, b]))
                        .collect(),
                ))
            }
            MeasureKind::MomentGrid => Some(Grid::Exponents(vec![[1, 1], [1, 2], [2, 1], [2, 2]])),
            _ => None,
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        MeasureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Data(format!("unknown measure `{s}`")))
    }
}

/// Grid parameterizing the function families.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    Points(Vec<[f64; 2]>),
    Exponents(Vec<[u32; 2]>),
}

/// One target vector per function `g`, each with one value per observation.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoResponses {
    labels: Vec<String>,
    targets: Vec<Vec<f64>>,
}

impl PseudoResponses {
    pub fn new(labels: Vec<String>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != targets.len() {
            return Err(contract("one label per target vector required"));
        }
        if let Some(first) = targets.first() {
            if targets.iter().any(|t| t.len() != first.len()) {
                return Err(contract("target vectors differ in length"));
            }
        }
        if targets.iter().flatten().any(|v| !v.is_finite()) {
            return Err(contract("pseudo-responses must be finite"));
        }
        Ok(Self { labels, targets })
    }

    pub fn single(label: impl Into<String>, targets: Vec<f64>) -> Self {
        Self::new(vec![label.into()], vec![targets]).expect("single finite target vector")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    /// Number of functions `g`.
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Number of observations.
    pub fn len_obs(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    /// Applies `v ↦ a + b·v` to every target.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self {
            labels: self.labels.clone(),
            targets: self
                .targets
                .iter()
                .map(|t| t.iter().map(|v| a + b * v).collect())
                .collect(),
        }
    }
}

/// Evaluates the chosen family on pseudo-observations `u`.
pub fn build_pseudo_responses(
    kind: MeasureKind,
    u: &[[f64; 2]],
    grid: Option<&Grid>,
) -> Result<PseudoResponses> {
    let single = |f: fn(f64, f64) -> f64| {
        PseudoResponses::new(
            vec![kind.name().into()],
            vec![u.iter().map(|p| f(p[0], p[1])).collect()],
        )
    };
    match kind {
        MeasureKind::Spearman => single(g_spearman),
        MeasureKind::Blomqvist => single(g_blomqvist),
        MeasureKind::Gini => single(g_gini),
        MeasureKind::Waerden => {
            let t = u
                .iter()
                .map(|p| g_waerden(p[0], p[1]))
                .collect::<Result<Vec<_>>>()?;
            PseudoResponses::new(vec![kind.name().into()], vec![t])
        }
        MeasureKind::IndicatorGrid => match grid {
            Some(Grid::Points(points)) if !points.is_empty() => {
                let labels = points
                    .iter()
                    .map(|g| format!("ind({},{})", g[0], g[1]))
                    .collect();
                let targets = points
                    .iter()
                    .map(|g| {
                        u.iter()
                            .map(|p| {
                                if p[0] <= g[0] && p[1] <= g[1] {
                                    1.0
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect();
                PseudoResponses::new(labels, targets)
            }
            Some(Grid::Points(_)) | None => {
                Err(contract("indicator grid needs at least one point"))
            }
            Some(Grid::Exponents(_)) => Err(contract("indicator grid needs points, not exponents")),
        },
        MeasureKind::MomentGrid => match grid {
            Some(Grid::Exponents(exps)) if !exps.is_empty() => {
                if exps.iter().any(|k| k[0] == 0 || k[1] == 0) {
                    return Err(contract("moment exponents must both be at least 1"));
                }
                let labels = exps
                    .iter()
                    .map(|k| format!("mom({},{})", k[0], k[1]))
                    .collect();
                let targets = exps
                    .iter()
                    .map(|k| {
                        u.iter()
                            .map(|p| p[0].powi(k[0] as i32) * p[1].powi(k[1] as i32))
                            .collect()
                    })
                    .collect();
                PseudoResponses::new(labels, targets)
            }
            Some(Grid::Exponents(_)) | None => {
                Err(contract("moment grid needs at least one exponent pair"))
            }
            Some(Grid::Points(_)) => Err(contract("moment grid needs exponent pairs, not points")),
        },
    }
}
