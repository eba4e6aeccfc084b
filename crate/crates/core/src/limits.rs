//! Regime maps, normalizations and reference distributions for coherence.
//!
//! Logarithms are natural throughout; `loglog_p` is `ln(ln p)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coherence::{CoherenceResult, StatisticKind};
use crate::error::{Error, Result};
use crate::special::{chisq1_log_sf, chisq1_sf};

/// Smallest dimension for which the normalizations are defined
/// (`ln ln p > 0` and `4 ln p - ln ln p > 0`).
pub const MIN_NORMALIZED_P: usize = 8;

/// Tail-exponent regime of the entry distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRegime {
    /// `0 < alpha <= 1`: no skewness correction.
    Low,
    /// `1 < alpha <= 4/3`: subtract the skewness correction `c_{n,p}`.
    Mid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub n: usize,
    pub p: usize,
    pub alpha_regime: AlphaRegime,
    pub kappa: f64,
}

impl RegimeParams {
    pub fn new(n: usize, p: usize, alpha_regime: AlphaRegime, kappa: f64) -> Result<Self> {
        if n < 2 || p < MIN_NORMALIZED_P {
            return Err(Error::InvalidDimensions {
                n,
                p,
                reason: format!("normalized statistics need n >= 2 and p >= {MIN_NORMALIZED_P}"),
            });
        }
        if !kappa.is_finite() {
            return Err(Error::param("kappa", kappa, "must be finite"));
        }
        Ok(Self {
            n,
            p,
            alpha_regime,
            kappa,
        })
    }

    pub fn low(n: usize, p: usize) -> Result<Self> {
        Self::new(n, p, AlphaRegime::Low, 0.0)
    }

    pub fn log_p(&self) -> f64 {
        (self.p as f64).ln()
    }

    pub fn loglog_p(&self) -> f64 {
        self.log_p().ln()
    }

    /// `c_{n,p} = (8 kappa^2 / 3) n^{-1/2} (ln p)^{3/2}` in the mid regime,
    /// zero otherwise.
    pub fn correction(&self) -> f64 {
        match self.alpha_regime {
            AlphaRegime::Low => 0.0,
            AlphaRegime::Mid => skewness_correction(self.kappa, self.n as f64, self.log_p()),
        }
    }

    /// Centering of `n L^2`: `4 ln p - ln ln p + c_{n,p}`.
    pub fn centering(&self) -> f64 {
        4.0 * self.log_p() - self.loglog_p() + self.correction()
    }

    /// Same regime with the skewness correction switched off.
    pub fn uncorrected(&self) -> Self {
        Self {
            alpha_regime: AlphaRegime::Low,
            ..*self
        }
    }
}

/// `(8 kappa^2 / 3) n^{-1/2} (ln p)^{3/2}`, taking `ln p` directly.
pub fn skewness_correction(kappa: f64, n: f64, log_p: f64) -> f64 {
    (8.0 * kappa * kappa / 3.0) * n.powf(-0.5) * log_p.powf(1.5)
}

/// `beta = alpha / (4 - alpha)`.
pub fn beta_of_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::param("alpha", alpha, "must lie in (0, 2]"));
    }
    Ok(alpha / (4.0 - alpha))
}

/// `alpha = 4 beta / (1 + beta)`, the inverse of [`beta_of_alpha`].
pub fn alpha_of_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param("beta", beta, "must lie in (0, 1]"));
    }
    Ok(4.0 * beta / (1.0 + beta))
}

/// `W = n L^2 - 4 ln p + ln ln p - c_{n,p}`.
pub fn normalize_w(l: f64, regime: &RegimeParams) -> Result<f64> {
    if l.is_nan() || l < 0.0 {
        return Err(Error::param("L", l, "statistic must be >= 0"));
    }
    Ok(regime.n as f64 * l * l - regime.centering())
}

/// The `L >= 0` whose normalization is `w` (0 when `w` is below the
/// normalization of `L = 0`).
pub fn coherence_for_w(w: f64, regime: &RegimeParams) -> f64 {
    ((w + regime.centering()) / regime.n as f64).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizedStat {
    pub w: f64,
    pub source_kind: StatisticKind,
    pub regime: RegimeParams,
}

impl NormalizedStat {
    pub fn new(result: &CoherenceResult, regime: &RegimeParams) -> Result<Self> {
        Ok(Self {
            w: normalize_w(result.value, regime)?,
            source_kind: result.kind,
            regime: *regime,
        })
    }
}

const INV_SQRT_8PI: f64 = 0.199_471_140_200_716_34;

/// Type-I extreme-value CDF `exp(-(8 pi)^{-1/2} e^{-y/2})`.
pub fn gumbel_cdf(y: f64) -> f64 {
    (-INV_SQRT_8PI * (-0.5 * y).exp()).exp()
}

/// `1 - gumbel_cdf(y)` without cancellation.
pub fn gumbel_sf(y: f64) -> f64 {
    -(-INV_SQRT_8PI * (-0.5 * y).exp()).exp_m1()
}

/// Inverse of [`gumbel_cdf`]: `-2 ln(-sqrt(8 pi) ln q)`.
pub fn gumbel_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", q, "must lie in (0, 1)"));
    }
    Ok(-2.0 * (-(8.0 * PI).sqrt() * q.ln()).ln())
}

/// Number of pairs `N` in the intermediate approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCountMode {
    /// `p (p - 1) / 2`.
    Exact,
    /// `p^2 / 2`.
    Squared,
}

impl PairCountMode {
    pub fn count(&self, p: usize) -> f64 {
        let p = p as f64;
        match self {
            PairCountMode::Exact => p * (p - 1.0) / 2.0,
            PairCountMode::Squared => p * p / 2.0,
        }
    }
}

/// `ln(N P(chi2_1 >= 4 ln p - ln ln p + y + c_{n,p}))`.
fn intermediate_log_lambda(y: f64, regime: &RegimeParams, mode: PairCountMode) -> Result<f64> {
    let arg = regime.centering() + y;
    if arg.is_nan() || arg <= 0.0 {
        return Err(Error::param(
            "y",
            y,
            "chi-square argument 4 ln p - ln ln p + y (+ c_np) must be positive",
        ));
    }
    Ok(mode.count(regime.p).ln() + chisq1_log_sf(arg)?)
}

/// Finite-`p` approximation to the law of `W`:
/// `exp(-N P(chi2_1 >= 4 ln p - ln ln p + y + c_{n,p}))`. The mid-regime
/// shift by `c_{n,p}` makes this approximate the same `W` as
/// [`normalize_w`]; use [`RegimeParams::uncorrected`] to drop it.
pub fn intermediate_cdf(y: f64, regime: &RegimeParams, mode: PairCountMode) -> Result<f64> {
    Ok((-intermediate_log_lambda(y, regime, mode)?.exp()).exp())
}

/// `1 - intermediate_cdf`.
pub fn intermediate_sf(y: f64, regime: &RegimeParams, mode: PairCountMode) -> Result<f64> {
    Ok(-(-intermediate_log_lambda(y, regime, mode)?.exp()).exp_m1())
}

/// Upper-tail probability of `n L^2 = t` under the raw intermediate law
/// `exp(-N P(chi2_1 >= t))`, clipped to `[0, 1]`.
pub fn intermediate_p_value(t: f64, p: usize, mode: PairCountMode) -> Result<f64> {
    let lambda = mode.count(p) * chisq1_sf(t)?;
    Ok((-(-lambda).exp_m1()).clamp(0.0, 1.0))
}

/// Band-width exponent `(2 delta - delta^2) / (4 - 2 delta + delta^2)`.
pub fn epsilon_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("delta", delta, "must lie in (0, 1]"));
    }
    let d2 = delta * delta;
    Ok((2.0 * delta - d2) / (4.0 - 2.0 * delta + d2))
}

/// Indices having a strongly correlated partner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaSet {
    /// One-based.
    pub indices: Vec<usize>,
    /// `|Gamma| / p`.
    pub fraction: f64,
}

/// `{ i : |r_ij| > 1 - delta for some j != i }` for a row-major `p x p`
/// population correlation matrix.
pub fn gamma_set(r: &[f64], p: usize, delta: f64) -> Result<GammaSet> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", delta, "must lie in (0, 1)"));
    }
    validate_correlation(r, p)?;
    let threshold = 1.0 - delta;
    let indices: Vec<usize> = (0..p)
        .filter(|&i| (0..p).any(|j| j != i && r[i * p + j].abs() > threshold))
        .map(|i| i + 1)
        .collect();
    let fraction = indices.len() as f64 / p as f64;
    Ok(GammaSet { indices, fraction })
}

fn validate_correlation(r: &[f64], p: usize) -> Result<()> {
    if p == 0 || r.len() != p * p {
        return Err(Error::MalformedCorrelation(format!(
            "expected {} entries for p={p}, got {}",
            p * p,
            r.len()
        )));
    }
    for i in 0..p {
        if r[i * p + i] != 1.0 {
            return Err(Error::MalformedCorrelation(format!(
                "diagonal entry {} is {}, expected 1",
                i + 1,
                r[i * p + i]
            )));
        }
        for j in 0..p {
            let v = r[i * p + j];
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::MalformedCorrelation(format!(
                    "entry ({}, {}) = {v} outside [-1, 1]",
                    i + 1,
                    j + 1
                )));
            }
            if (v - r[j * p + i]).abs() > 1e-12 {
                return Err(Error::MalformedCorrelation(format!(
                    "not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

/// Limit of `L_n` for Gaussian entries when `ln p / n -> gamma`.
pub fn dense_regime_limit(gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::param("gamma", gamma, "must be positive"));
    }
    Ok((-(-4.0 * gamma).exp_m1()).sqrt())
}

/// One plotting row: `y`, the limit CDF and the intermediate CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub y: f64,
    pub gumbel: f64,
    pub intermediate: f64,
}

pub fn distribution_table(
    grid: &[f64],
    regime: &RegimeParams,
    mode: PairCountMode,
) -> Result<Vec<TableRow>> {
    if grid.is_empty() {
        return Err(Error::param("grid", 0.0, "grid must be nonempty"));
    }
    grid.iter()
        .map(|&y| {
            if !y.is_finite() {
                return Err(Error::param("y", y, "grid points must be finite"));
            }
            Ok(TableRow {
                y,
                gumbel: gumbel_cdf(y),
                intermediate: intermediate_cdf(y, regime, mode)?,
            })
        })
        .collect()
}
