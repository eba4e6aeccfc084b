//! Data matrices and the entry distributions used to simulate them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, COLUMN_BLOCK};

/// Entry law before location/scale. Every family is standardized to mean 0
/// and variance 1 when sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionFamily {
    Gaussian,
    /// `Exp(1) - 1`.
    CenteredExponential,
    /// Density proportional to `exp(-|x|^a)`, `0 < a <= 2`.
    SymmetricWeibull {
        a: f64,
    },
    /// Standardized Bernoulli(q).
    TwoPointSkewed {
        q: f64,
    },
    /// Student-t with `nu > 2` degrees of freedom.
    StudentT {
        nu: f64,
    },
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub family: DistributionFamily,
    pub location: f64,
    pub scale: f64,
}

impl DistributionSpec {
    pub fn new(family: DistributionFamily, location: f64, scale: f64) -> Result<Self> {
        let spec = Self {
            family,
            location,
            scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Mean 0, variance 1.
    pub fn standard(family: DistributionFamily) -> Result<Self> {
        Self::new(family, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.location.is_finite() {
            return Err(Error::param("location", self.location, "must be finite"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::param(
                "scale",
                self.scale,
                "must be positive and finite",
            ));
        }
        match self.family {
            DistributionFamily::SymmetricWeibull { a } if !(a > 0.0 && a <= 2.0) => {
                Err(Error::param("a", a, "tail exponent must lie in (0, 2]"))
            }
            DistributionFamily::TwoPointSkewed { q } if !(q > 0.0 && q < 1.0) => Err(Error::param(
                "q",
                q,
                "success probability must lie in (0, 1)",
            )),
            DistributionFamily::StudentT { nu } if !(nu > 2.0 && nu.is_finite()) => {
                Err(Error::param("nu", nu, "degrees of freedom must exceed 2"))
            }
            _ => Ok(()),
        }
    }

    /// `(mu, sigma, kappa)`: mean, standard deviation and standardized third
    /// central moment.
    pub fn standardized_moments(&self) -> Result<(f64, f64, f64)> {
        self.validate()?;
        let kappa = match self.family {
            DistributionFamily::Gaussian
            | DistributionFamily::SymmetricWeibull { .. }
            | DistributionFamily::Rademacher => 0.0,
            DistributionFamily::CenteredExponential => 2.0,
            DistributionFamily::TwoPointSkewed { q } => (1.0 - 2.0 * q) / (q * (1.0 - q)).sqrt(),
            DistributionFamily::StudentT { nu } => {
                if nu > 3.0 {
                    0.0
                } else {
                    return Err(Error::UndefinedMoment(format!(
                        "student_t with nu={nu} (third moment needs nu > 3)"
                    )));
                }
            }
        };
        Ok((self.location, self.scale, kappa))
    }

    /// Largest `alpha` for which `E exp(t0 |x|^alpha) < infinity` holds for
    /// some `t0 > 0`, capped at 2. `None` when it fails for every
    /// `alpha > 0`.
    pub fn max_tail_exponent(&self) -> Option<f64> {
        match self.family {
            DistributionFamily::Gaussian
            | DistributionFamily::TwoPointSkewed { .. }
            | DistributionFamily::Rademacher => Some(2.0),
            DistributionFamily::CenteredExponential => Some(1.0),
            DistributionFamily::SymmetricWeibull { a } => Some(a),
            DistributionFamily::StudentT { .. } => None,
        }
    }

    pub fn satisfies_exponential_moment(&self, alpha: f64) -> bool {
        alpha > 0.0 && self.max_tail_exponent().is_some_and(|max| alpha <= max)
    }

    fn sampler(&self) -> Result<StandardSampler> {
        self.validate()?;
        Ok(match self.family {
            DistributionFamily::Gaussian => StandardSampler::Gaussian,
            DistributionFamily::CenteredExponential => StandardSampler::CenteredExponential,
            DistributionFamily::SymmetricWeibull { a } => {
                // |X|^a ~ Gamma(1/a, 1), E X^2 = Gamma(3/a) / Gamma(1/a).
                let var = (libm::lgamma(3.0 / a) - libm::lgamma(1.0 / a)).exp();
                let gamma = Gamma::new(1.0 / a, 1.0)
                    .map_err(|_| Error::param("a", a, "tail exponent must lie in (0, 2]"))?;
                StandardSampler::Weibull {
                    gamma,
                    inv_a: 1.0 / a,
                    inv_sd: 1.0 / var.sqrt(),
                }
            }
            DistributionFamily::TwoPointSkewed { q } => {
                let sd = (q * (1.0 - q)).sqrt();
                StandardSampler::TwoPoint {
                    q,
                    hi: (1.0 - q) / sd,
                    lo: -q / sd,
                }
            }
            DistributionFamily::StudentT { nu } => StandardSampler::StudentT {
                dist: StudentT::new(nu)
                    .map_err(|_| Error::param("nu", nu, "degrees of freedom must exceed 2"))?,
                inv_sd: ((nu - 2.0) / nu).sqrt(),
            },
            DistributionFamily::Rademacher => StandardSampler::Rademacher,
        })
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            DistributionFamily::Gaussian => write!(f, "gaussian"),
            DistributionFamily::CenteredExponential => write!(f, "exponential"),
            DistributionFamily::SymmetricWeibull { a } => write!(f, "weibull:{a}"),
            DistributionFamily::TwoPointSkewed { q } => write!(f, "two-point:{q}"),
            DistributionFamily::StudentT { nu } => write!(f, "t:{nu}"),
            DistributionFamily::Rademacher => write!(f, "rademacher"),
        }?;
        if self.location != 0.0 || self.scale != 1.0 {
            write!(f, "@{},{}", self.location, self.scale)?;
        }
        Ok(())
    }
}

/// Parses `family[:param][@location,scale]`, e.g. `gaussian`, `t:5`,
/// `two-point:0.2`, `weibull:0.8@1,2`.
impl FromStr for DistributionSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (body, affine) = match s.split_once('@') {
            Some((b, a)) => (b, Some(a)),
            None => (s, None),
        };
        let (name, param) = match body.split_once(':') {
            Some((n, v)) => {
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad parameter '{v}' in distribution '{s}'"))?;
                (n.trim(), Some(v))
            }
            None => (body.trim(), None),
        };
        let need = |what: &str| param.ok_or_else(|| format!("distribution '{name}' needs :{what}"));
        let family = match name.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => DistributionFamily::Gaussian,
            "exponential" | "exp" | "centered_exponential" => {
                DistributionFamily::CenteredExponential
            }
            "weibull" | "symmetric_weibull" => {
                DistributionFamily::SymmetricWeibull { a: need("a")? }
            }
            "two-point" | "two_point" | "two_point_skewed" => {
                DistributionFamily::TwoPointSkewed { q: need("q")? }
            }
            "t" | "student_t" => DistributionFamily::StudentT { nu: need("nu")? },
            "rademacher" => DistributionFamily::Rademacher,
            other => return Err(format!("unknown distribution family '{other}'")),
        };
        let (location, scale) = match affine {
            None => (0.0, 1.0),
            Some(a) => {
                let (l, sc) = a
                    .split_once(',')
                    .ok_or_else(|| format!("expected '@location,scale' in '{s}'"))?;
                let l = l
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad location '{l}'"))?;
                let sc = sc.trim().parse().map_err(|_| format!("bad scale '{sc}'"))?;
                (l, sc)
            }
        };
        DistributionSpec::new(family, location, scale).map_err(|e| e.to_string())
    }
}

enum StandardSampler {
    Gaussian,
    CenteredExponential,
    Weibull {
        gamma: Gamma<f64>,
        inv_a: f64,
        inv_sd: f64,
    },
    TwoPoint {
        q: f64,
        hi: f64,
        lo: f64,
    },
    StudentT {
        dist: StudentT<f64>,
        inv_sd: f64,
    },
    Rademacher,
}

impl StandardSampler {
    #[inline]
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            StandardSampler::Gaussian => StandardNormal.sample(rng),
            StandardSampler::CenteredExponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            StandardSampler::Weibull {
                gamma,
                inv_a,
                inv_sd,
            } => {
                let magnitude = gamma.sample(rng).powf(*inv_a) * inv_sd;
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            StandardSampler::TwoPoint { q, hi, lo } => {
                if rng.random::<f64>() < *q {
                    *hi
                } else {
                    *lo
                }
            }
            StandardSampler::StudentT { dist, inv_sd } => dist.sample(rng) * inv_sd,
            StandardSampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// An `n x p` real matrix stored row-major: rows are observations, columns
/// are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    entries: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, entries: Vec<f64>) -> Result<Self> {
        check_dims(n, p)?;
        if entries.len() != n * p {
            return Err(Error::InvalidDimensions {
                n,
                p,
                reason: format!("expected {} entries, got {}", n * p, entries.len()),
            });
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDimensions {
                n,
                p,
                reason: format!("entry ({}, {}) is not finite", pos / p + 1, pos % p + 1),
            });
        }
        Ok(Self { n, p, entries })
    }

    /// Builds a matrix from `p` columns of equal length `n`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidDimensions {
                n,
                p,
                reason: "columns have unequal lengths".into(),
            });
        }
        let mut entries = vec![0.0; n * p];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                entries[i * p + j] = v;
            }
        }
        Self::new(n, p, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Zero-based access.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.p + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.p..(row + 1) * self.p]
    }

    /// Zero-based column copy.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, col)).collect()
    }

    /// Applies `f` to every entry of column `col` (zero-based).
    pub fn map_column(mut self, col: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        for i in 0..self.n {
            let idx = i * self.p + col;
            self.entries[idx] = f(self.entries[idx]);
        }
        Self::new(self.n, self.p, self.entries)
    }

    /// Reorders columns so that new column `k` is old column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.p, "permutation length must equal p");
        let mut entries = Vec::with_capacity(self.entries.len());
        for i in 0..self.n {
            let row = self.row(i);
            entries.extend(perm.iter().map(|&k| row[k]));
        }
        Self {
            n: self.n,
            p: self.p,
            entries,
        }
    }
}

fn check_dims(n: usize, p: usize) -> Result<()> {
    if n < 2 || p < 2 {
        return Err(Error::InvalidDimensions {
            n,
            p,
            reason: "need n >= 2 and p >= 2".into(),
        });
    }
    Ok(())
}

/// Standardized draws for `cols` columns of length `n`, column-major. Block
/// `b` of [`COLUMN_BLOCK`] columns is drawn from stream `b` of `seed`.
fn standard_columns(sampler: &StandardSampler, n: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; n * cols];
    out.par_chunks_mut(n * COLUMN_BLOCK)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = stream_rng(seed, block as u64);
            for v in chunk.iter_mut() {
                *v = sampler.draw(&mut rng);
            }
        });
    out
}

/// `n x p` matrix of i.i.d. draws from `spec`. A pure function of the
/// arguments; the thread count does not affect the output.
pub fn sample_matrix(spec: &DistributionSpec, n: usize, p: usize, seed: u64) -> Result<DataMatrix> {
    sample_m_dependent(spec, n, p, 1, seed)
}

/// `n x p` matrix with i.i.d. rows, each an equal-weight moving average of
/// `m` consecutive innovations drawn from `spec`:
/// `x_j = mu + sigma * m^{-1/2} * sum_{l<m} z_{j+l}`. Columns at distance
/// `d` have correlation `max(0, m - d) / m`. With `m = 1` the output is
/// identical to [`sample_matrix`].
pub fn sample_m_dependent(
    spec: &DistributionSpec,
    n: usize,
    p: usize,
    m: usize,
    seed: u64,
) -> Result<DataMatrix> {
    check_dims(n, p)?;
    if m == 0 || m >= p {
        return Err(Error::MaskOutOfRange { m, p });
    }
    let sampler = spec.sampler()?;
    let width = p + m - 1;
    let innovations = standard_columns(&sampler, n, width, seed);
    let weight = spec.scale / (m as f64).sqrt();
    let mut entries = vec![0.0; n * p];
    entries.par_chunks_mut(p).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for l in 0..m {
                acc += innovations[(j + l) * n + i];
            }
            *out = spec.location + weight * acc;
        }
    });
    DataMatrix::new(n, p, entries)
}

/// Population correlation matrix (row-major `p x p`) of the moving-average
/// design of [`sample_m_dependent`]: `r_ij = max(0, m - |i - j|) / m`.
pub fn moving_average_correlation(p: usize, m: usize) -> Result<Vec<f64>> {
    if m == 0 || m >= p {
        return Err(Error::MaskOutOfRange { m, p });
    }
    let mut r = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            r[i * p + j] = m.saturating_sub(i.abs_diff(j)) as f64 / m as f64;
        }
    }
    Ok(r)
}
