//! Reproducible replication engine for the coherence limit laws.
//!
//! Replication `r` draws its matrix from `child_seed(master_seed, r)` and
//! results are stored by index, so the samples are a pure function of the
//! plan whatever the worker count or scheduling.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coherence::{CoherenceResult, Kernel, KnownMoments, StatisticKind};
use crate::error::{Error, Result};
use crate::hypothesis::{independence_test, m_dependence_test, CalibrationMethod};
use crate::limits::{gumbel_cdf, intermediate_cdf, normalize_w, PairCountMode, RegimeParams};
use crate::matgen::{sample_m_dependent, DataMatrix, DistributionSpec};
use crate::rng::{child_seed, stream_rng};

/// What each stored sample is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleScale {
    /// The coherence statistic itself.
    Raw,
    /// `W = n L^2 - 4 ln p + ln ln p - c_{n,p}`.
    Normalized,
    /// `sqrt(n / ln p) L`.
    Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationPlan {
    pub spec: DistributionSpec,
    pub n: usize,
    pub p: usize,
    /// Moving-average order of the row design; `None` for i.i.d. entries.
    pub m: Option<usize>,
    pub statistic: StatisticKind,
    pub scale: SampleScale,
    pub regime: RegimeParams,
    pub replications: usize,
    pub master_seed: u64,
    /// Pair count of the intermediate reference; defaults to `p^2 / 2` for
    /// `L_nm` and `p (p - 1) / 2` otherwise.
    pub pair_count: PairCountMode,
    pub lln_epsilons: Vec<f64>,
}

impl SimulationPlan {
    /// I.i.d. plan in the low regime with `kappa` taken from `spec` (0 when
    /// undefined).
    pub fn new(
        spec: DistributionSpec,
        n: usize,
        p: usize,
        statistic: StatisticKind,
        replications: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let kappa = spec.standardized_moments().map(|m| m.2).unwrap_or(0.0);
        let regime = RegimeParams::new(n, p, crate::limits::AlphaRegime::Low, kappa)?;
        let pair_count = match statistic {
            StatisticKind::Lnm(_) => PairCountMode::Squared,
            _ => PairCountMode::Exact,
        };
        let plan = Self {
            spec,
            n,
            p,
            m: None,
            statistic,
            scale: SampleScale::Raw,
            regime,
            replications,
            master_seed,
            pair_count,
            lln_epsilons: vec![0.1, 0.2, 0.5],
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_design_m(mut self, m: usize) -> Result<Self> {
        self.m = Some(m);
        self.validate()?;
        Ok(self)
    }

    pub fn with_scale(mut self, scale: SampleScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_regime(mut self, regime: RegimeParams) -> Result<Self> {
        self.regime = regime;
        self.validate()?;
        Ok(self)
    }

    pub fn with_pair_count(mut self, mode: PairCountMode) -> Self {
        self.pair_count = mode;
        self
    }

    pub fn with_lln_epsilons(mut self, eps: Vec<f64>) -> Result<Self> {
        self.lln_epsilons = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.replications == 0 {
            return Err(Error::param(
                "replications",
                0.0,
                "need at least one replication",
            ));
        }
        if self.regime.n != self.n || self.regime.p != self.p {
            return Err(Error::RegimeMismatch {
                regime_n: self.regime.n,
                regime_p: self.regime.p,
                n: self.n,
                p: self.p,
            });
        }
        if let Some(m) = self.m {
            if m == 0 || m >= self.p {
                return Err(Error::MaskOutOfRange { m, p: self.p });
            }
        }
        let gap = self.statistic.mask_gap();
        if gap == 0 || gap >= self.p {
            return Err(Error::MaskOutOfRange { m: gap, p: self.p });
        }
        if let Some(&e) = self.lln_epsilons.iter().find(|e| e.is_nan() || **e <= 0.0) {
            return Err(Error::param("epsilon", e, "must be positive"));
        }
        Ok(())
    }

    fn known_moments(&self) -> Result<Option<KnownMoments>> {
        if !self.statistic.needs_known_moments() {
            return Ok(None);
        }
        let (mu, sigma, _) = match self.spec.standardized_moments() {
            Ok(m) => m,
            // Mean and variance exist even when the third moment does not.
            Err(Error::UndefinedMoment(_)) => (self.spec.location, self.spec.scale, f64::NAN),
            Err(e) => return Err(e),
        };
        Ok(Some(KnownMoments { mu, sigma }))
    }

    /// Data matrix of replication `index`.
    pub fn replication_matrix(&self, index: usize) -> Result<DataMatrix> {
        let seed = child_seed(self.master_seed, index as u64);
        sample_m_dependent(&self.spec, self.n, self.p, self.m.unwrap_or(1), seed)
    }

    pub fn scaled(&self, l: f64) -> f64 {
        (self.n as f64 / (self.p as f64).ln()).sqrt() * l
    }

    fn to_scale(&self, l: f64) -> Result<f64> {
        match self.scale {
            SampleScale::Raw => Ok(l),
            SampleScale::Normalized => normalize_w(l, &self.regime),
            SampleScale::Scaled => Ok(self.scaled(l)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LlnFraction {
    pub epsilon: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSummary {
    pub plan: SimulationPlan,
    /// Per replication, on `plan.scale`.
    pub samples: Vec<f64>,
    /// Ascending copy of `samples`.
    #[serde(skip)]
    pub sorted: Vec<f64>,
    /// Raw coherence per replication.
    #[serde(skip)]
    pub coherence: Vec<f64>,
    /// KS distance of `W` to the extreme-value limit.
    pub ks_vs_gumbel: f64,
    /// KS distance of `W` to the intermediate approximation.
    pub ks_vs_intermediate: f64,
    pub lln_fraction: Vec<LlnFraction>,
    pub mean: f64,
    pub median: f64,
}

impl EmpiricalSummary {
    /// Normalized statistics `W`, ascending, under `regime`.
    pub fn sorted_w(&self, regime: &RegimeParams) -> Result<Vec<f64>> {
        let mut w = self
            .coherence
            .iter()
            .map(|&l| normalize_w(l, regime))
            .collect::<Result<Vec<_>>>()?;
        w.sort_by(f64::total_cmp);
        Ok(w)
    }

    pub fn fraction_for(&self, epsilon: f64) -> f64 {
        lln_fraction(&self.plan, &self.coherence, epsilon)
    }
}

/// Statistic of every replication, in index order.
pub fn replicate_statistic(plan: &SimulationPlan) -> Result<Vec<CoherenceResult>> {
    plan.validate()?;
    let known = plan.known_moments()?;
    let kernel = Kernel::default();
    (0..plan.replications)
        .into_par_iter()
        .map(|r| {
            plan.replication_matrix(r)
                .and_then(|x| kernel.statistic(&x, plan.statistic, known))
                .map_err(|e| Error::Replication {
                    index: r,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Runs the plan on the current rayon pool.
pub fn run_replications(plan: &SimulationPlan) -> Result<EmpiricalSummary> {
    let results = replicate_statistic(plan)?;
    let coherence: Vec<f64> = results.iter().map(|r| r.value).collect();
    summarize(plan, coherence)
}

/// Runs the plan on a dedicated pool of `workers` threads.
pub fn run_replications_with_workers(
    plan: &SimulationPlan,
    workers: usize,
) -> Result<EmpiricalSummary> {
    with_workers(workers, || run_replications(plan))
}

pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    pool.install(f)
}

fn summarize(plan: &SimulationPlan, coherence: Vec<f64>) -> Result<EmpiricalSummary> {
    let samples = coherence
        .iter()
        .map(|&l| plan.to_scale(l))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);

    let regime = plan.regime;
    let mut w: Vec<f64> = coherence
        .iter()
        .map(|&l| normalize_w(l, &regime))
        .collect::<Result<_>>()?;
    w.sort_by(f64::total_cmp);
    let ks_vs_gumbel = ks_distance(&w, gumbel_cdf)?;
    let ks_vs_intermediate = ks_distance(&w, |y| {
        intermediate_cdf(y, &regime, plan.pair_count).unwrap_or(0.0)
    })?;

    let lln = plan
        .lln_epsilons
        .iter()
        .map(|&epsilon| LlnFraction {
            epsilon,
            fraction: lln_fraction(plan, &coherence, epsilon),
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let median = median_sorted(&sorted);
    Ok(EmpiricalSummary {
        plan: plan.clone(),
        samples,
        sorted,
        coherence,
        ks_vs_gumbel,
        ks_vs_intermediate,
        lln_fraction: lln,
        mean,
        median,
    })
}

pub fn median_sorted(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

/// Kolmogorov-Smirnov distance between the ECDF of ascending `sorted` and
/// `cdf`.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::param("samples", 0.0, "need at least one sample"));
    }
    let r = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        let f = cdf(s);
        let upper = (k + 1) as f64 / r;
        let lower = k as f64 / r;
        d = d.max((upper - f).abs()).max((lower - f).abs());
    }
    Ok(d)
}

/// Bootstrap standard error of the KS distance: resample `samples` with
/// replacement `draws` times from stream `seed`.
pub fn ks_bootstrap_se(
    samples: &[f64],
    cdf: impl Fn(f64) -> f64 + Sync,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if samples.is_empty() || draws < 2 {
        return Err(Error::param(
            "draws",
            draws as f64,
            "need samples and at least two draws",
        ));
    }
    let k = samples.len();
    let stats: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let mut res: Vec<f64> = (0..k).map(|_| samples[rng.random_range(0..k)]).collect();
            res.sort_by(f64::total_cmp);
            ks_distance(&res, &cdf)
        })
        .collect::<Result<_>>()?;
    let mean = stats.iter().sum::<f64>() / draws as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    Ok(var.sqrt())
}

/// Fraction of replications with `sqrt(n / ln p) L` in `[2 - eps, 2 + eps]`.
pub fn lln_fraction(plan: &SimulationPlan, coherence: &[f64], epsilon: f64) -> f64 {
    if coherence.is_empty() {
        return 0.0;
    }
    let inside = coherence
        .iter()
        .filter(|&&l| (plan.scaled(l) - 2.0).abs() <= epsilon)
        .count();
    inside as f64 / coherence.len() as f64
}

/// Runs the plan and reports the fraction of scaled statistics within
/// `epsilon` of 2.
pub fn lln_check(plan: &SimulationPlan, epsilon: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::param("epsilon", epsilon, "must be positive"));
    }
    let results = replicate_statistic(plan)?;
    let l: Vec<f64> = results.iter().map(|r| r.value).collect();
    Ok(lln_fraction(plan, &l, epsilon))
}

/// Fraction of replications rejected by the matching test: the
/// independence test for `L_n`, the m-dependence test for `L_nm`.
pub fn rejection_rate(plan: &SimulationPlan, level: f64, method: CalibrationMethod) -> Result<f64> {
    plan.validate()?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param("level", level, "must lie in (0, 1)"));
    }
    let rejected: Vec<bool> = (0..plan.replications)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<bool> {
                let x = plan.replication_matrix(r)?;
                let report = match plan.statistic {
                    StatisticKind::Ln => independence_test(&x, level, method, &plan.regime)?,
                    StatisticKind::Lnm(m) => {
                        m_dependence_test(&x, m, level, method, &plan.regime, plan.pair_count)?
                    }
                    other => {
                        return Err(Error::param(
                            "statistic",
                            other.mask_gap() as f64,
                            "tests are defined for L_n and L_nm only",
                        ))
                    }
                };
                Ok(report.rejected())
            };
            run().map_err(|e| Error::Replication {
                index: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(rejected.iter().filter(|&&b| b).count() as f64 / rejected.len() as f64)
}

/// Rejection rate of a plan that generates under the null hypothesis.
pub fn empirical_size(plan: &SimulationPlan, level: f64, method: CalibrationMethod) -> Result<f64> {
    let tested = plan.statistic.mask_gap();
    if plan.m.unwrap_or(1) > tested {
        return Err(Error::param(
            "m",
            plan.m.unwrap_or(1) as f64,
            "design order exceeds the tested gap, so the null hypothesis is false",
        ));
    }
    rejection_rate(plan, level, method)
}
