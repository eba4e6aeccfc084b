//! Independence and m-dependence tests built on coherence, and the
//! mutual-incoherence sparsity certificate.
//!
//! Reports express the critical value on the scale of the coherence itself,
//! so `statistic` is the same number whichever calibration is used and
//! `decision == Reject` exactly when `statistic >= critical_value`.

use serde::{Deserialize, Serialize};

use crate::coherence::{CoherenceResult, Kernel, KnownMoments, StatisticKind};
use crate::error::{Error, Result};
use crate::limits::{
    coherence_for_w, epsilon_delta, gamma_set, gumbel_quantile, gumbel_sf, intermediate_p_value,
    normalize_w, PairCountMode, RegimeParams,
};
use crate::matgen::DataMatrix;
use crate::special::chisq1_sf_inv;

/// Above this fraction of strongly correlated indices the population
/// correlation matrix is flagged as violating the sparse-Gamma assumption.
pub const GAMMA_FRACTION_WARNING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    /// Against the type-I extreme-value limit of `W`.
    ExtremeLimit,
    /// Against `exp(-N P(chi2_1 >= n L^2))`.
    #[default]
    Intermediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Retain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub statistic_kind: StatisticKind,
    pub statistic: f64,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub level: f64,
    pub method: CalibrationMethod,
    /// Smallest coherence value that is rejected.
    pub critical_value: f64,
    pub p_value: f64,
    pub decision: Decision,
    /// One-based argmax pair of the statistic.
    pub pair: (usize, usize),
    /// `W` (or `W_{n,m}`) under `regime`.
    pub normalized: f64,
    pub regime: RegimeParams,
    /// Pair count used by the intermediate calibration.
    pub pair_count: PairCountMode,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TestReport {
    pub fn rejected(&self) -> bool {
        self.decision == Decision::Reject
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::param("level", level, "must lie in (0, 1)"))
    }
}

fn check_regime(x: &DataMatrix, regime: &RegimeParams) -> Result<()> {
    if regime.n != x.n() || regime.p != x.p() {
        return Err(Error::RegimeMismatch {
            regime_n: regime.n,
            regime_p: regime.p,
            n: x.n(),
            p: x.p(),
        });
    }
    Ok(())
}

/// Critical coherence for the given calibration.
pub fn critical_coherence(
    level: f64,
    method: CalibrationMethod,
    regime: &RegimeParams,
    pair_count: PairCountMode,
) -> Result<f64> {
    check_level(level)?;
    match method {
        CalibrationMethod::Intermediate => {
            // N P(chi2_1 >= z) = -ln(1 - level)
            let tail = -(-level).ln_1p() / pair_count.count(regime.p);
            let z = chisq1_sf_inv(tail)?;
            Ok((z / regime.n as f64).sqrt())
        }
        CalibrationMethod::ExtremeLimit => {
            let q = gumbel_quantile(1.0 - level)?;
            Ok(coherence_for_w(q, regime))
        }
    }
}

/// Calibrates an already computed statistic. Shared by both tests and by
/// the Monte Carlo harness.
pub fn calibrate(
    result: &CoherenceResult,
    level: f64,
    method: CalibrationMethod,
    regime: &RegimeParams,
    pair_count: PairCountMode,
) -> Result<TestReport> {
    let critical_value = critical_coherence(level, method, regime, pair_count)?;
    let statistic = result.value;
    let normalized = normalize_w(statistic, regime)?;
    let p_value = match method {
        CalibrationMethod::Intermediate => intermediate_p_value(
            regime.n as f64 * statistic * statistic,
            regime.p,
            pair_count,
        )?,
        CalibrationMethod::ExtremeLimit => gumbel_sf(normalized).clamp(0.0, 1.0),
    };
    let decision = if statistic >= critical_value {
        Decision::Reject
    } else {
        Decision::Retain
    };
    Ok(TestReport {
        statistic_kind: result.kind,
        statistic,
        n: regime.n,
        p: regime.p,
        m: result.mask_gap,
        level,
        method,
        critical_value,
        p_value,
        decision,
        pair: result.pair,
        normalized,
        regime: *regime,
        pair_count,
        warnings: Vec::new(),
    })
}

/// Tests mutual independence of the `p` variables with `L_n`.
pub fn independence_test(
    x: &DataMatrix,
    level: f64,
    method: CalibrationMethod,
    regime: &RegimeParams,
) -> Result<TestReport> {
    check_level(level)?;
    check_regime(x, regime)?;
    let result = Kernel::default().statistic(x, StatisticKind::Ln, None)?;
    calibrate(&result, level, method, regime, PairCountMode::Exact)
}

/// Tests `H0: x_i, x_j independent whenever |i - j| >= m` with `L_{n,m}`.
pub fn m_dependence_test(
    x: &DataMatrix,
    m: usize,
    level: f64,
    method: CalibrationMethod,
    regime: &RegimeParams,
    pair_count: PairCountMode,
) -> Result<TestReport> {
    check_level(level)?;
    check_regime(x, regime)?;
    let result = Kernel::default().statistic(x, StatisticKind::Lnm(m), None)?;
    calibrate(&result, level, method, regime, pair_count)
}

/// Checks the band conditions against a user-supplied population
/// correlation matrix and returns human-readable warnings.
pub fn band_assumption_warnings(r: &[f64], p: usize, m: usize, delta: f64) -> Result<Vec<String>> {
    let gamma = gamma_set(r, p, delta)?;
    let eps = epsilon_delta(delta)?;
    let mut warnings = Vec::new();
    if gamma.fraction > GAMMA_FRACTION_WARNING {
        warnings.push(format!(
            "{} of {p} variables have a partner with |r| > {}; the limit law assumes this set is small",
            gamma.indices.len(),
            1.0 - delta
        ));
    }
    let bound = (p as f64).powf(eps);
    if m as f64 >= bound {
        warnings.push(format!(
            "band width m={m} is not small against p^eps_delta = {bound:.3} (eps_delta = {eps:.4})"
        ));
    }
    Ok(warnings)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MipCertificate {
    /// `L_tilde`.
    pub coherence: f64,
    pub pair: (usize, usize),
    /// Largest `k >= 0` with `(2k - 1) L_tilde < 1`; `None` when the
    /// coherence is zero and every `k` qualifies.
    pub k_max: Option<u64>,
    /// `floor(sqrt(n / ln p) / 4)`.
    pub k_rule_of_thumb: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requested_k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satisfied: Option<bool>,
}

fn mip_holds(k: u64, l: f64) -> bool {
    (2.0 * k as f64 - 1.0) * l < 1.0
}

/// Largest sparsity `k >= 1` with `(2k - 1) l < 1`, or 0 when none.
pub fn mip_k_max(l: f64) -> Option<u64> {
    if l <= 0.0 {
        return None;
    }
    if l >= 1.0 {
        return Some(0);
    }
    let guess = ((1.0 / l + 1.0) / 2.0).ceil() - 1.0;
    let mut k = guess.max(0.0) as u64;
    // Settle rounding in 1/l against the inequality itself.
    while mip_holds(k + 1, l) {
        k += 1;
    }
    while k > 0 && !mip_holds(k, l) {
        k -= 1;
    }
    Some(k)
}

/// `floor(sqrt(n / ln p) / 4)`.
pub fn rule_of_thumb_sparsity(n: usize, log_p: f64) -> u64 {
    ((n as f64 / log_p).sqrt() / 4.0).floor() as u64
}

pub fn mip_certificate(
    x: &DataMatrix,
    mu: f64,
    requested_k: Option<u64>,
) -> Result<MipCertificate> {
    let result = Kernel::default().statistic(
        x,
        StatisticKind::LTilde,
        Some(KnownMoments { mu, sigma: 1.0 }),
    )?;
    let l = result.value;
    Ok(MipCertificate {
        coherence: l,
        pair: result.pair,
        k_max: mip_k_max(l),
        k_rule_of_thumb: rule_of_thumb_sparsity(x.n(), (x.p() as f64).ln()),
        requested_k,
        satisfied: requested_k.map(|k| mip_holds(k, l)),
    })
}
