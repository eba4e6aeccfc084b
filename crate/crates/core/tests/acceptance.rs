//! Acceptance suite: one line per criterion, nonzero exit if any blocking
//! criterion fails. Run with `cargo test -p coherence-core --test acceptance`.

mod common;

use std::time::Instant;

use coherence_core::coherence::{Kernel, KnownMoments};
use coherence_core::hypothesis::CalibrationMethod;
use coherence_core::io::write_samples_csv;
use coherence_core::limits::{
    dense_regime_limit, gumbel_cdf, gumbel_quantile, PairCountMode, RegimeParams,
};
use coherence_core::montecarlo::{
    empirical_size, ks_bootstrap_se, ks_distance, rejection_rate, run_replications,
    run_replications_with_workers, SampleScale, SimulationPlan,
};
use coherence_core::special::{chisq1_log_sf, chisq1_sf, chisq1_sf_inv};
use coherence_core::{AlphaRegime, DistributionFamily, DistributionSpec, StatisticKind};
use common::{brute_max, chisq1_sf_quadrature, naive_rho, naive_tilde, naive_zero, SplitMix};

// Tolerances and thresholds, fixed before any run.
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_BUDGET_SECS: f64 = 5.0;
const LLN_EPSILON: f64 = 0.2;
const LLN_MIN_FRACTION: f64 = 0.95;
const KS_INTERMEDIATE_MAX: f64 = 0.05;
const KS_GUMBEL_MAX: f64 = 0.15;
const CORRECTION_MARGIN_SE: f64 = 2.0;
const BOOTSTRAP_DRAWS: usize = 400;
const DENSE_TOL: f64 = 0.05;
const SIZE_BAND: (f64, f64) = (0.03, 0.08);
const BAND_KS_MAX: f64 = 0.07;
const BAND_SIZE_BAND: (f64, f64) = (0.02, 0.09);
const BAND_MIN_POWER: f64 = 0.9;
const SF_ABS_TOL: f64 = 1e-10;
const ROUND_TRIP_REL_TOL: f64 = 1e-9;
const NECESSITY_MEDIAN_MIN: f64 = 2.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn spec(family: DistributionFamily) -> DistributionSpec {
    DistributionSpec::standard(family).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.range(3, 50);
        let p = rng.range(2, 30);
        let x = rng.matrix(n, p);
        let mu = rng.uniform() - 0.5;
        let sigma = 0.5 + rng.uniform();
        let m = rng.range(1, p - 1);
        let tile = rng.range(1, 32);
        let kernel = Kernel::with_tile_width(tile);
        let known = Some(KnownMoments { mu, sigma });
        let checks = [
            (
                kernel.statistic(&x, StatisticKind::Ln, None).unwrap().value,
                brute_max(p, 1, |i, j| naive_rho(&x, i, j)).0,
            ),
            (
                kernel
                    .statistic(&x, StatisticKind::LTilde, known)
                    .unwrap()
                    .value,
                brute_max(p, 1, |i, j| naive_tilde(&x, mu, i, j)).0,
            ),
            (
                kernel
                    .statistic(&x, StatisticKind::L0, known)
                    .unwrap()
                    .value,
                brute_max(p, 1, |i, j| naive_zero(&x, mu, sigma, i, j)).0,
            ),
            (
                kernel
                    .statistic(&x, StatisticKind::Lnm(m), None)
                    .unwrap()
                    .value,
                brute_max(p, m, |i, j| naive_rho(&x, i, j)).0,
            ),
        ];
        for (got, want) in checks {
            worst = worst.max((got - want).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= ORACLE_TOL && secs < ORACLE_BUDGET_SECS,
        format!("max |tiled - naive| = {worst:.2e} (<= {ORACLE_TOL:e}), {secs:.2} s (< {ORACLE_BUDGET_SECS} s)"),
    )
}

fn law_of_large_numbers() -> Outcome {
    let plan = SimulationPlan::new(
        spec(DistributionFamily::Gaussian),
        2000,
        500,
        StatisticKind::Ln,
        200,
        0xA11CE,
    )
    .unwrap()
    .with_scale(SampleScale::Scaled);
    let summary = run_replications(&plan).unwrap();
    let fraction = summary.fraction_for(LLN_EPSILON);
    outcome(
        fraction >= LLN_MIN_FRACTION,
        format!(
            "fraction of sqrt(n/log p) L_n in [1.8, 2.2] = {fraction:.3} (>= {LLN_MIN_FRACTION}), median {:.4}",
            summary.median
        ),
    )
}

fn limiting_distribution() -> Outcome {
    let plan = SimulationPlan::new(
        spec(DistributionFamily::Gaussian),
        400,
        200,
        StatisticKind::Ln,
        2000,
        0xB0B,
    )
    .unwrap()
    .with_scale(SampleScale::Normalized);
    let s = run_replications(&plan).unwrap();
    outcome(
        s.ks_vs_intermediate <= KS_INTERMEDIATE_MAX && s.ks_vs_gumbel <= KS_GUMBEL_MAX,
        format!(
            "KS(W_n, intermediate) = {:.4} (<= {KS_INTERMEDIATE_MAX}), KS(W_n, F_Y) = {:.4} (<= {KS_GUMBEL_MAX})",
            s.ks_vs_intermediate, s.ks_vs_gumbel
        ),
    )
}

fn skewness_correction() -> Outcome {
    let family = DistributionFamily::TwoPointSkewed { q: 0.2 };
    let kappa = spec(family).standardized_moments().unwrap().2;
    let mid = RegimeParams::new(400, 200, AlphaRegime::Mid, kappa).unwrap();
    let plan = SimulationPlan::new(spec(family), 400, 200, StatisticKind::Ln, 2000, 0xC0FFEE)
        .unwrap()
        .with_regime(mid)
        .unwrap();
    let s = run_replications(&plan).unwrap();
    let corrected = s.sorted_w(&mid).unwrap();
    let uncorrected = s.sorted_w(&mid.uncorrected()).unwrap();
    let ks_c = ks_distance(&corrected, gumbel_cdf).unwrap();
    let ks_u = ks_distance(&uncorrected, gumbel_cdf).unwrap();
    let se_c = ks_bootstrap_se(&corrected, gumbel_cdf, BOOTSTRAP_DRAWS, 1).unwrap();
    let se_u = ks_bootstrap_se(&uncorrected, gumbel_cdf, BOOTSTRAP_DRAWS, 2).unwrap();
    let se = se_c.max(se_u);
    outcome(
        ks_u - ks_c >= CORRECTION_MARGIN_SE * se,
        format!(
            "KS with c_np = {ks_c:.4}, without = {ks_u:.4}, margin {:.4} >= {CORRECTION_MARGIN_SE} x SE {se:.4} (kappa = {kappa})",
            ks_u - ks_c
        ),
    )
}

fn dense_regime() -> Outcome {
    let plan = SimulationPlan::new(
        spec(DistributionFamily::Gaussian),
        60,
        403,
        StatisticKind::Ln,
        200,
        0xD,
    )
    .unwrap();
    let s = run_replications(&plan).unwrap();
    let gamma = (403f64).ln() / 60.0;
    let target = dense_regime_limit(0.1).unwrap();
    outcome(
        (s.median - target).abs() <= DENSE_TOL,
        format!(
            "median L_n = {:.4}, target sqrt(1 - e^-0.4) = {target:.6} +/- {DENSE_TOL} (log p / n = {gamma:.4})",
            s.median
        ),
    )
}

fn test_calibration() -> Outcome {
    let plan = SimulationPlan::new(
        spec(DistributionFamily::Gaussian),
        400,
        100,
        StatisticKind::Ln,
        1000,
        0xE,
    )
    .unwrap();
    let size = empirical_size(&plan, 0.05, CalibrationMethod::Intermediate).unwrap();
    outcome(
        (SIZE_BAND.0..=SIZE_BAND.1).contains(&size),
        format!(
            "empirical size at level 0.05 = {size:.3} (in [{}, {}])",
            SIZE_BAND.0, SIZE_BAND.1
        ),
    )
}

fn m_dependence() -> Outcome {
    let g = spec(DistributionFamily::Gaussian);
    let null = SimulationPlan::new(g, 400, 200, StatisticKind::Lnm(3), 500, 0xF)
        .unwrap()
        .with_design_m(3)
        .unwrap()
        .with_scale(SampleScale::Normalized);
    assert_eq!(null.pair_count, PairCountMode::Squared);
    let s = run_replications(&null).unwrap();
    let size = empirical_size(&null, 0.05, CalibrationMethod::Intermediate).unwrap();
    let alt = SimulationPlan::new(g, 400, 200, StatisticKind::Lnm(2), 500, 0xF0)
        .unwrap()
        .with_design_m(3)
        .unwrap();
    let power = rejection_rate(&alt, 0.05, CalibrationMethod::Intermediate).unwrap();
    outcome(
        s.ks_vs_intermediate <= BAND_KS_MAX
            && (BAND_SIZE_BAND.0..=BAND_SIZE_BAND.1).contains(&size)
            && power >= BAND_MIN_POWER,
        format!(
            "KS(W_nm, intermediate p^2/2) = {:.4} (<= {BAND_KS_MAX}), size = {size:.3} (in [{}, {}]), power at m=2 = {power:.3} (>= {BAND_MIN_POWER})",
            s.ks_vs_intermediate, BAND_SIZE_BAND.0, BAND_SIZE_BAND.1
        ),
    )
}

fn special_functions() -> Outcome {
    let mut sf_err: f64 = 0.0;
    for k in 0..=4000 {
        let y = k as f64 * 0.01;
        sf_err = sf_err.max((chisq1_sf(y).unwrap() - chisq1_sf_quadrature(y)).abs());
    }
    let mut rt_err: f64 = 0.0;
    let mut q = 1e-10;
    while q <= 1.0 - 1e-10 {
        let back = chisq1_sf(chisq1_sf_inv(q).unwrap()).unwrap();
        rt_err = rt_err.max(((back - q) / q).abs());
        let back = gumbel_cdf(gumbel_quantile(q).unwrap());
        rt_err = rt_err.max(((back - q) / q).abs());
        q = if q < 0.5 {
            q * 1.2
        } else {
            1.0 - (1.0 - q) / 1.2
        };
    }
    let mut monotone = true;
    let mut prev = 0.0;
    let mut y = 0.0;
    while y <= 1e6 {
        let v = chisq1_log_sf(y).unwrap();
        monotone &= v.is_finite() && v <= prev;
        prev = v;
        y = if y < 1.0 { y + 0.01 } else { y * 1.001 };
    }
    let at_max = chisq1_log_sf(1e6).unwrap();
    monotone &= at_max.is_finite();
    outcome(
        sf_err <= SF_ABS_TOL && rt_err <= ROUND_TRIP_REL_TOL && monotone,
        format!(
            "max |sf - quadrature| = {sf_err:.2e}, max round-trip rel err = {rt_err:.2e}, log-sf finite+monotone to 1e6: {monotone} (ln sf(1e6) = {at_max:.6e})"
        ),
    )
}

fn necessity_probe() -> Outcome {
    let t3 = spec(DistributionFamily::StudentT { nu: 3.0 });
    let plan = SimulationPlan::new(t3, 200, 5000, StatisticKind::Ln, 100, 0x7)
        .unwrap()
        .with_scale(SampleScale::Scaled)
        .with_lln_epsilons(vec![0.5])
        .unwrap();
    let s = run_replications(&plan).unwrap();
    let fraction = s.fraction_for(0.5);
    outcome(
        s.median > NECESSITY_MEDIAN_MIN,
        format!(
            "student_t(3): median sqrt(n/log p) L_n = {:.4} (> {NECESSITY_MEDIAN_MIN}), fraction in [1.5, 2.5] = {fraction:.2}",
            s.median
        ),
    )
}

fn determinism() -> Outcome {
    let family = DistributionFamily::CenteredExponential;
    let plans = [
        SimulationPlan::new(spec(family), 50, 120, StatisticKind::Ln, 24, 99).unwrap(),
        SimulationPlan::new(
            spec(DistributionFamily::Gaussian),
            40,
            90,
            StatisticKind::Lnm(3),
            16,
            5,
        )
        .unwrap()
        .with_design_m(3)
        .unwrap()
        .with_scale(SampleScale::Normalized),
    ];
    let mut identical = true;
    for plan in &plans {
        let files: Vec<Vec<u8>> = [1, 4, 8]
            .into_iter()
            .map(|w| {
                let s = run_replications_with_workers(plan, w).unwrap();
                let mut buf = Vec::new();
                write_samples_csv(&s.samples, &mut buf).unwrap();
                buf
            })
            .collect();
        identical &= files.windows(2).all(|w| w[0] == w[1]);
    }
    outcome(
        identical,
        "samples files byte-identical for workers {1, 4, 8}".into(),
    )
}

type Criterion = (&'static str, bool, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", true, oracle_equivalence),
        ("law of large numbers", true, law_of_large_numbers),
        (
            "limiting distribution (low regime)",
            true,
            limiting_distribution,
        ),
        (
            "skewness correction (mid regime)",
            true,
            skewness_correction,
        ),
        ("dense-regime limit", true, dense_regime),
        ("independence test calibration", true, test_calibration),
        ("m-dependence test", true, m_dependence),
        ("special functions", true, special_functions),
        ("necessity probe (diagnostic)", false, necessity_probe),
        ("determinism", true, determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (idx, (name, blocking, run)) in criteria.iter().enumerate() {
        let id = idx + 1;
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.contains(f.as_str()) || *f == id.to_string())
        {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let status = match (o.pass, blocking) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        if !o.pass && *blocking {
            failed += 1;
        }
        println!(
            "[{status}] {id:>2}. {name}: {} [{:.1} s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} blocking criterion(s) failed");
        std::process::exit(1);
    }
}
