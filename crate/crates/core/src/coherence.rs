//! Pearson correlations and coherence statistics.
//!
//! All statistics share one kernel: every column is centered and scaled
//! once into a column-major buffer, then inner products between columns are
//! evaluated tile by tile and folded into a masked running maximum. The
//! `p x p` correlation matrix is only built by [`correlation_matrix`].

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matgen::DataMatrix;

pub const DEFAULT_TILE_WIDTH: usize = 256;

/// Default cap on `p` for [`correlation_matrix`].
pub const DEFAULT_DUMP_CAP: usize = 2000;

const LANES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum StatisticKind {
    /// Sample-correlation coherence.
    #[serde(rename = "L_n")]
    Ln,
    /// Centered at a known mean.
    #[serde(rename = "L_tilde")]
    LTilde,
    /// Centered and scaled by known mean and variance.
    #[serde(rename = "L_0")]
    L0,
    /// Sample correlations restricted to pairs with `j - i >= m`.
    #[serde(rename = "L_nm")]
    Lnm(usize),
}

impl StatisticKind {
    pub fn name(&self) -> &'static str {
        match self {
            StatisticKind::Ln => "L_n",
            StatisticKind::LTilde => "L_tilde",
            StatisticKind::L0 => "L_0",
            StatisticKind::Lnm(_) => "L_nm",
        }
    }

    pub fn mask_gap(&self) -> usize {
        match self {
            StatisticKind::Lnm(m) => *m,
            _ => 1,
        }
    }

    pub fn needs_known_moments(&self) -> bool {
        matches!(self, StatisticKind::LTilde | StatisticKind::L0)
    }

    /// Whether values are bounded by 1 (everything except `L_0`).
    pub fn is_bounded(&self) -> bool {
        !matches!(self, StatisticKind::L0)
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticKind::Lnm(m) => write!(f, "L_nm(m={m})"),
            other => f.write_str(other.name()),
        }
    }
}

impl Serialize for StatisticKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Which known-moment statistic [`coherence_known_moments`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownMomentKind {
    Tilde,
    Zero,
}

impl From<KnownMomentKind> for StatisticKind {
    fn from(k: KnownMomentKind) -> Self {
        match k {
            KnownMomentKind::Tilde => StatisticKind::LTilde,
            KnownMomentKind::Zero => StatisticKind::L0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceResult {
    pub kind: StatisticKind,
    pub value: f64,
    /// One-based `(i, j)` with `i < j`.
    pub pair: (usize, usize),
    pub mask_gap: usize,
}

/// Population mean and standard deviation used by `L_tilde` and `L_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownMoments {
    pub mu: f64,
    pub sigma: f64,
}

/// Running maximum with lexicographic tie-breaking. Zero-based indices.
#[derive(Debug, Clone, Copy)]
struct Best {
    value: f64,
    i: usize,
    j: usize,
}

impl Best {
    const NONE: Best = Best {
        value: f64::NEG_INFINITY,
        i: usize::MAX,
        j: usize::MAX,
    };

    #[inline]
    fn offer(&mut self, value: f64, i: usize, j: usize) {
        if value > self.value || (value == self.value && (i, j) < (self.i, self.j)) {
            *self = Best { value, i, j };
        }
    }

    fn merge(mut self, other: Best) -> Best {
        self.offer(other.value, other.i, other.j);
        self
    }
}

/// Fixed pairwise reduction of the lane accumulators.
#[inline(always)]
fn combine(acc: &[f64; LANES]) -> f64 {
    (acc[0] + acc[2]) + (acc[1] + acc[3])
}

/// Sum with `LANES` independent accumulators.
#[inline]
fn lane_sum(xs: &[f64]) -> f64 {
    let mut acc = [0.0; LANES];
    let chunks = xs.chunks_exact(LANES);
    let tail = chunks.remainder();
    for c in chunks {
        for l in 0..LANES {
            acc[l] += c[l];
        }
    }
    let mut s = combine(&acc);
    for &v in tail {
        s += v;
    }
    s
}

/// Inner product; the reference order every kernel path must reproduce
/// bit for bit.
#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; LANES];
    let ac = a.chunks_exact(LANES);
    let bc = b.chunks_exact(LANES);
    let (at, bt) = (ac.remainder(), bc.remainder());
    for (x, y) in ac.zip(bc) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = combine(&acc);
    for (x, y) in at.iter().zip(bt) {
        s += x * y;
    }
    s
}

/// Four inner products of `a` against `b0..b3`, each bitwise equal to
/// [`dot`].
#[inline(always)]
fn dot4(a: &[f64], b0: &[f64], b1: &[f64], b2: &[f64], b3: &[f64]) -> [f64; 4] {
    let mut acc = [[0.0; LANES]; 4];
    let chunks = a
        .chunks_exact(LANES)
        .zip(b0.chunks_exact(LANES))
        .zip(b1.chunks_exact(LANES))
        .zip(b2.chunks_exact(LANES))
        .zip(b3.chunks_exact(LANES));
    for ((((x, y0), y1), y2), y3) in chunks {
        for l in 0..LANES {
            acc[0][l] += x[l] * y0[l];
            acc[1][l] += x[l] * y1[l];
            acc[2][l] += x[l] * y2[l];
            acc[3][l] += x[l] * y3[l];
        }
    }
    let tail = a.len() / LANES * LANES;
    let bs = [b0, b1, b2, b3];
    let mut out = [0.0; 4];
    for c in 0..4 {
        let mut s = combine(&acc[c]);
        for (x, y) in a[tail..].iter().zip(&bs[c][tail..]) {
            s += x * y;
        }
        out[c] = s;
    }
    out
}

/// Correlations within rounding of 1 (identical or affinely related
/// columns) are reported as exactly 1.
#[inline]
fn snap_unit(v: f64) -> f64 {
    if v >= 1.0 - UNIT_SNAP {
        1.0
    } else {
        v
    }
}

const UNIT_SNAP: f64 = 8.0 * f64::EPSILON;

/// Inner products of `a0, a1` against `b0..b3`, each bitwise equal to
/// [`dot`].
#[inline(always)]
fn dot2x4(a0: &[f64], a1: &[f64], b: [&[f64]; 4]) -> [[f64; 4]; 2] {
    let mut acc = [[[0.0; LANES]; 4]; 2];
    let chunks = a0
        .chunks_exact(LANES)
        .zip(a1.chunks_exact(LANES))
        .zip(b[0].chunks_exact(LANES))
        .zip(b[1].chunks_exact(LANES))
        .zip(b[2].chunks_exact(LANES))
        .zip(b[3].chunks_exact(LANES));
    for (((((x0, x1), y0), y1), y2), y3) in chunks {
        for l in 0..LANES {
            acc[0][0][l] += x0[l] * y0[l];
            acc[0][1][l] += x0[l] * y1[l];
            acc[0][2][l] += x0[l] * y2[l];
            acc[0][3][l] += x0[l] * y3[l];
            acc[1][0][l] += x1[l] * y0[l];
            acc[1][1][l] += x1[l] * y1[l];
            acc[1][2][l] += x1[l] * y2[l];
            acc[1][3][l] += x1[l] * y3[l];
        }
    }
    let tail = a0.len() / LANES * LANES;
    let a = [a0, a1];
    let mut out = [[0.0; 4]; 2];
    for r in 0..2 {
        for c in 0..4 {
            let mut s = combine(&acc[r][c]);
            for (x, y) in a[r][tail..].iter().zip(&b[c][tail..]) {
                s += x * y;
            }
            out[r][c] = s;
        }
    }
    out
}

/// Column-major buffer of centered, scaled columns.
struct Standardized {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Standardized {
    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }
}

fn standardize(
    x: &DataMatrix,
    known: Option<(KnownMoments, StatisticKind)>,
) -> Result<Standardized> {
    let (n, p) = (x.n(), x.p());
    let mut data = vec![0.0; n * p];
    data.par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(j, col)| -> Result<()> {
            for (i, v) in col.iter_mut().enumerate() {
                *v = x.get(i, j);
            }
            let first = col[0];
            let constant = col.iter().all(|&v| v == first);
            let center = match known {
                Some((m, _)) => m.mu,
                None => {
                    if constant {
                        return Err(Error::DegenerateColumn { column: j + 1 });
                    }
                    let mean = lane_sum(col) / n as f64;
                    // Second pass removes the rounding error of the first.
                    let resid = col.iter().map(|v| v - mean).sum::<f64>() / n as f64;
                    mean + resid
                }
            };
            for v in col.iter_mut() {
                *v -= center;
            }
            let scale = match known {
                Some((m, StatisticKind::L0)) => 1.0 / ((n as f64).sqrt() * m.sigma),
                _ => {
                    let norm = dot(col, col).sqrt();
                    if norm == 0.0 || !norm.is_finite() {
                        return Err(Error::DegenerateColumn { column: j + 1 });
                    }
                    1.0 / norm
                }
            };
            for v in col.iter_mut() {
                *v *= scale;
            }
            Ok(())
        })?;
    Ok(Standardized { n, p, data })
}

/// Masked maximum of `|<z_i, z_j>|` over `j - i >= gap`, tile by tile.
fn masked_max(z: &Standardized, gap: usize, tile: usize) -> Best {
    let tiles = z.p.div_ceil(tile);
    let pairs: Vec<(usize, usize)> = (0..tiles)
        .flat_map(|a| (a..tiles).map(move |b| (a, b)))
        .collect();
    let avx2 = has_avx2();
    pairs
        .into_par_iter()
        .map(|(ta, tb)| {
            if avx2 {
                #[cfg(target_arch = "x86_64")]
                // SAFETY: AVX2 support was detected at runtime.
                return unsafe { tile_max_avx2(z, gap, tile, ta, tb) };
            }
            tile_max(z, gap, tile, ta, tb)
        })
        .reduce(|| Best::NONE, Best::merge)
}

fn has_avx2() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::is_x86_feature_detected!("avx2")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

// Same code compiled with wider vectors. No FMA is enabled, so every
// product and sum rounds exactly as in the portable path.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn tile_max_avx2(z: &Standardized, gap: usize, tile: usize, ta: usize, tb: usize) -> Best {
    tile_max(z, gap, tile, ta, tb)
}

/// Tile `(ta, tb)` of the upper triangle.
#[inline(always)]
fn tile_max(z: &Standardized, gap: usize, tile: usize, ta: usize, tb: usize) -> Best {
    let p = z.p;
    let mut best = Best::NONE;
    let row_end = ((ta + 1) * tile).min(p);
    let col_begin = tb * tile;
    let cols_end = ((tb + 1) * tile).min(p);
    let mut i = ta * tile;
    // Row pairs share the column range starting at the later row's bound.
    while i + 2 <= row_end {
        let start0 = col_begin.max(i + gap);
        let start1 = col_begin.max(i + 1 + gap);
        let (z0, z1) = (z.col(i), z.col(i + 1));
        if start0 < start1 && start0 < cols_end {
            best.offer(dot(z0, z.col(start0)).abs(), i, start0);
        }
        let mut j = start1;
        while j + 4 <= cols_end {
            let cols = [z.col(j), z.col(j + 1), z.col(j + 2), z.col(j + 3)];
            let d = dot2x4(z0, z1, cols);
            for (c, (a, b)) in d[0].iter().zip(&d[1]).enumerate() {
                best.offer(a.abs(), i, j + c);
                best.offer(b.abs(), i + 1, j + c);
            }
            j += 4;
        }
        while j < cols_end {
            let zj = z.col(j);
            best.offer(dot(z0, zj).abs(), i, j);
            best.offer(dot(z1, zj).abs(), i + 1, j);
            j += 1;
        }
        i += 2;
    }
    if i < row_end {
        let zi = z.col(i);
        let mut j = col_begin.max(i + gap);
        while j + 4 <= cols_end {
            let d = dot4(zi, z.col(j), z.col(j + 1), z.col(j + 2), z.col(j + 3));
            for (c, v) in d.iter().enumerate() {
                best.offer(v.abs(), i, j + c);
            }
            j += 4;
        }
        while j < cols_end {
            best.offer(dot(zi, z.col(j)).abs(), i, j);
            j += 1;
        }
    }
    best
}

/// Coherence computation with a configurable tile width.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    tile_width: usize,
}

impl Default for Kernel {
    fn default() -> Self {
        Self {
            tile_width: DEFAULT_TILE_WIDTH,
        }
    }
}

impl Kernel {
    pub fn with_tile_width(tile_width: usize) -> Self {
        Self {
            tile_width: tile_width.max(1),
        }
    }

    pub fn tile_width(&self) -> usize {
        self.tile_width
    }

    /// Evaluates `kind` on `x`. `known` is required for `L_tilde` and
    /// `L_0` and ignored otherwise.
    pub fn statistic(
        &self,
        x: &DataMatrix,
        kind: StatisticKind,
        known: Option<KnownMoments>,
    ) -> Result<CoherenceResult> {
        let p = x.p();
        let gap = kind.mask_gap();
        if gap == 0 || gap >= p {
            return Err(Error::MaskOutOfRange { m: gap, p });
        }
        let known = if kind.needs_known_moments() {
            let m = known.ok_or(Error::param(
                "sigma",
                f64::NAN,
                "known mean and standard deviation required",
            ))?;
            if !m.mu.is_finite() {
                return Err(Error::param("mu", m.mu, "must be finite"));
            }
            if !(m.sigma > 0.0 && m.sigma.is_finite()) {
                return Err(Error::param(
                    "sigma",
                    m.sigma,
                    "must be positive and finite",
                ));
            }
            Some((m, kind))
        } else {
            None
        };
        let z = standardize(x, known)?;
        let best = masked_max(&z, gap, self.tile_width);
        let value = if kind.is_bounded() {
            snap_unit(best.value)
        } else {
            best.value
        };
        Ok(CoherenceResult {
            kind,
            value,
            pair: (best.i + 1, best.j + 1),
            mask_gap: gap,
        })
    }
}

/// `L_n`: largest `|rho_ij|` over `i < j`.
pub fn coherence(x: &DataMatrix) -> Result<CoherenceResult> {
    Kernel::default().statistic(x, StatisticKind::Ln, None)
}

/// `L_tilde` or `L_0` with population mean `mu` and standard deviation
/// `sigma`.
pub fn coherence_known_moments(
    x: &DataMatrix,
    mu: f64,
    sigma: f64,
    kind: KnownMomentKind,
) -> Result<CoherenceResult> {
    Kernel::default().statistic(x, kind.into(), Some(KnownMoments { mu, sigma }))
}

/// `L_{n,m}`: largest `|rho_ij|` over `j - i >= m`.
pub fn m_coherence(x: &DataMatrix, m: usize) -> Result<CoherenceResult> {
    Kernel::default().statistic(x, StatisticKind::Lnm(m), None)
}

/// Sample correlation of one-based columns `i` and `j`.
pub fn pearson_corr(x: &DataMatrix, i: usize, j: usize) -> Result<f64> {
    let p = x.p();
    for idx in [i, j] {
        if idx == 0 || idx > p {
            return Err(Error::param(
                "column",
                idx as f64,
                "index out of range 1..=p",
            ));
        }
    }
    let cols = [i - 1, j - 1];
    let sub = DataMatrix::from_columns(&[x.column(cols[0]), x.column(cols[1])])?;
    let z = standardize(&sub, None).map_err(|e| match e {
        Error::DegenerateColumn { column } => Error::DegenerateColumn {
            column: cols[column - 1] + 1,
        },
        other => other,
    })?;
    if i == j {
        return Ok(1.0);
    }
    let r = dot(z.col(0), z.col(1));
    Ok(snap_unit(r.abs()).copysign(r))
}

/// Full `p x p` sample correlation matrix, row-major. Refuses `p > cap`.
pub fn correlation_matrix(x: &DataMatrix, cap: usize) -> Result<Vec<f64>> {
    let p = x.p();
    if p > cap {
        return Err(Error::InvalidDimensions {
            n: x.n(),
            p,
            reason: format!("correlation dump limited to p <= {cap}"),
        });
    }
    let z = standardize(x, None)?;
    let mut r = vec![0.0; p * p];
    r.par_chunks_mut(p).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j {
                1.0
            } else {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                let v = dot(z.col(a), z.col(b));
                snap_unit(v.abs()).copysign(v)
            };
        }
    });
    Ok(r)
}
