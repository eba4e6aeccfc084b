//! Independent oracles shared by the integration tests. Nothing here calls
//! into the coherence kernel.
#![allow(dead_code)]

use coherence_core::DataMatrix;

/// Direct evaluation of the sample correlation of zero-based columns.
pub fn naive_rho(x: &DataMatrix, i: usize, j: usize) -> f64 {
    let n = x.n();
    let mi = (0..n).map(|k| x.get(k, i)).sum::<f64>() / n as f64;
    let mj = (0..n).map(|k| x.get(k, j)).sum::<f64>() / n as f64;
    let (mut num, mut si, mut sj) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let a = x.get(k, i) - mi;
        let b = x.get(k, j) - mj;
        num += a * b;
        si += a * a;
        sj += b * b;
    }
    num / (si.sqrt() * sj.sqrt())
}

pub fn naive_tilde(x: &DataMatrix, mu: f64, i: usize, j: usize) -> f64 {
    let (mut num, mut si, mut sj) = (0.0, 0.0, 0.0);
    for k in 0..x.n() {
        let a = x.get(k, i) - mu;
        let b = x.get(k, j) - mu;
        num += a * b;
        si += a * a;
        sj += b * b;
    }
    num / (si * sj).sqrt()
}

pub fn naive_zero(x: &DataMatrix, mu: f64, sigma: f64, i: usize, j: usize) -> f64 {
    let mut num = 0.0;
    for k in 0..x.n() {
        num += (x.get(k, i) - mu) * (x.get(k, j) - mu);
    }
    num / (x.n() as f64 * sigma * sigma)
}

/// Max of `|f(i, j)|` over `j - i >= gap` with lexicographic tie-break;
/// returns the value and the one-based pair.
pub fn brute_max(p: usize, gap: usize, f: impl Fn(usize, usize) -> f64) -> (f64, (usize, usize)) {
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for i in 0..p {
        for j in (i + gap)..p {
            let v = f(i, j).abs();
            if v > best.0 {
                best = (v, (i + 1, j + 1));
            }
        }
    }
    best
}

/// Composite Simpson rule for `P(chi2_1 >= y) = 2 * int_{sqrt y}^inf phi`.
pub fn chisq1_sf_quadrature(y: f64) -> f64 {
    let a = y.sqrt();
    let b = a + 14.0;
    let steps = 40_000;
    let h = (b - a) / steps as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(a) + phi(b);
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * phi(a + k as f64 * h);
    }
    2.0 * s * h / 3.0
}

/// `Phi(x) = 1/2 + phi(x) * sum_k x^{2k+1} / (2k+1)!!`, summed until the
/// terms vanish.
pub fn normal_cdf_series(x: f64) -> f64 {
    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    while term.abs() > 1e-17 * sum.abs() {
        term *= x * x / (2.0 * k + 1.0);
        sum += term;
        k += 1.0;
    }
    0.5 + phi * sum
}

/// Small deterministic generator for test inputs.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn matrix(&mut self, n: usize, p: usize) -> DataMatrix {
        let entries = (0..n * p).map(|_| 4.0 * self.uniform() - 1.5).collect();
        DataMatrix::new(n, p, entries).unwrap()
    }
}
