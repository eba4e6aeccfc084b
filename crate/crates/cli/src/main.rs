use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coherence_core::coherence::{correlation_matrix, Kernel, KnownMoments, DEFAULT_DUMP_CAP};
use coherence_core::hypothesis::{
    band_assumption_warnings, independence_test, m_dependence_test, mip_certificate,
};
use coherence_core::io::{
    read_matrix, write_binary, write_correlation_csv, write_csv, write_samples_csv, write_table_csv,
};
use coherence_core::limits::distribution_table;
use coherence_core::matgen::{sample_m_dependent, sample_matrix};
use coherence_core::montecarlo::{run_replications, with_workers, SampleScale, SimulationPlan};
use coherence_core::{
    AlphaRegime, CalibrationMethod, DistributionSpec, Error, PairCountMode, RegimeParams,
    StatisticKind,
};
use serde::Serialize;

const EXIT_REJECT: u8 = 10;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "coherence",
    version,
    about = "Coherence statistics of large random matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a coherence statistic of a data matrix.
    Coherence(CoherenceArgs),
    /// Test independence (or m-dependence) of the columns.
    Test(TestArgs),
    /// Monte Carlo replications of a statistic.
    Simulate(SimulateArgs),
    /// Mutual-incoherence sparsity certificate.
    Mip(MipArgs),
    /// Tabulate the limit and intermediate distribution functions.
    DistTables(TableArgs),
    /// Write a random data matrix.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    #[value(name = "L_n", alias = "ln")]
    Ln,
    #[value(name = "L_tilde", alias = "tilde")]
    Tilde,
    #[value(name = "L_0", alias = "zero")]
    Zero,
    #[value(name = "L_nm", alias = "lnm")]
    Nm,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Extreme,
    Intermediate,
}

impl From<MethodArg> for CalibrationMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Extreme => CalibrationMethod::ExtremeLimit,
            MethodArg::Intermediate => CalibrationMethod::Intermediate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Low,
    Mid,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairCountArg {
    Exact,
    Squared,
}

impl From<PairCountArg> for PairCountMode {
    fn from(m: PairCountArg) -> Self {
        match m {
            PairCountArg::Exact => PairCountMode::Exact,
            PairCountArg::Squared => PairCountMode::Squared,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    /// The coherence value itself.
    #[value(name = "Ln", alias = "raw")]
    Raw,
    /// `n L^2 - 4 ln p + ln ln p - c_{n,p}`.
    #[value(name = "W", alias = "w")]
    W,
    /// `sqrt(n / ln p) L`.
    Scaled,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Binary,
}

#[derive(Args)]
struct RegimeFlags {
    #[arg(long, value_enum, default_value = "low")]
    regime: RegimeArg,
    /// Skewness used by the mid-regime correction.
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
}

impl RegimeFlags {
    fn params(&self, n: usize, p: usize) -> Result<RegimeParams, Error> {
        let regime = match self.regime {
            RegimeArg::Low => AlphaRegime::Low,
            RegimeArg::Mid => AlphaRegime::Mid,
        };
        RegimeParams::new(n, p, regime, self.kappa)
    }
}

#[derive(Args)]
struct CoherenceArgs {
    /// CSV or binary matrix, rows are observations.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "L_n")]
    kind: KindArg,
    /// Minimum index distance for `L_nm`; implies `--kind L_nm`.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Also write the sample correlation matrix as CSV.
    #[arg(long)]
    dump_correlation: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DUMP_CAP)]
    dump_cap: usize,
    #[arg(long, env = "COHERENCE_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args)]
struct TestArgs {
    input: PathBuf,
    /// Test m-dependence instead of independence.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, value_enum, default_value = "intermediate")]
    method: MethodArg,
    #[command(flatten)]
    regime: RegimeFlags,
    /// Pair count of the intermediate calibration for the m-dependence test.
    #[arg(long, value_enum, default_value = "squared")]
    pair_count: PairCountArg,
    /// Flag sample correlations above `1 - delta` in the m-dependence test.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, env = "COHERENCE_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Entry distribution, e.g. `gaussian`, `two-point:0.2`, `t:3@0,2`.
    #[arg(long)]
    dist: DistributionSpec,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    /// Moving-average row design of order m, tested with `L_nm`.
    #[arg(long)]
    m: Option<usize>,
    /// Minimum index distance of `L_nm`; defaults to `--m`.
    #[arg(long)]
    gap: Option<usize>,
    #[arg(long = "R", alias = "replications")]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "Ln")]
    stat: StatArg,
    /// Statistic for i.i.d. designs; known moments come from `--dist`.
    #[arg(long, value_enum, default_value = "L_n")]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "low")]
    regime: RegimeArg,
    /// Defaults to the skewness of `--dist`.
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, value_enum)]
    pair_count: Option<PairCountArg>,
    #[arg(long, env = "COHERENCE_WORKERS")]
    workers: Option<usize>,
    /// Write `replication,value` rows here.
    #[arg(long)]
    samples: Option<PathBuf>,
}

#[derive(Args)]
struct MipArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long)]
    k: Option<u64>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[command(flatten)]
    regime: RegimeFlags,
    /// Comma-separated y values.
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    #[arg(long, value_enum, default_value = "exact")]
    pair_count: PairCountArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    dist: DistributionSpec,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Serialize)]
struct CoherenceReport {
    kind: StatisticKind,
    value: f64,
    pair: (usize, usize),
    n: usize,
    p: usize,
    m: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Coherence(a) => cmd_coherence(a),
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Mip(a) => cmd_mip(a),
        Command::DistTables(a) => cmd_dist_tables(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn in_pool<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T, Error> + Send,
) -> Result<T, CliError> {
    Ok(match workers {
        Some(w) if w > 0 => with_workers(w, f)?,
        _ => f()?,
    })
}

fn statistic_kind(kind: KindArg, m: Option<usize>) -> Result<StatisticKind, CliError> {
    match (kind, m) {
        (KindArg::Ln, None) => Ok(StatisticKind::Ln),
        (KindArg::Ln | KindArg::Nm, Some(m)) => Ok(StatisticKind::Lnm(m)),
        (KindArg::Nm, None) => usage("L_nm needs --m"),
        (KindArg::Tilde, None) => Ok(StatisticKind::LTilde),
        (KindArg::Zero, None) => Ok(StatisticKind::L0),
        (_, Some(_)) => usage("--m applies to L_n and L_nm only"),
    }
}

fn cmd_coherence(a: CoherenceArgs) -> Result<u8, CliError> {
    let x = read_matrix(&a.input)?;
    let kind = statistic_kind(a.kind, a.m)?;
    let known = match kind {
        StatisticKind::LTilde | StatisticKind::L0 => {
            let Some(mu) = a.mu else {
                return usage("known-mean statistics need --mu");
            };
            let sigma = match (kind, a.sigma) {
                (_, Some(s)) => s,
                (StatisticKind::LTilde, None) => 1.0,
                _ => return usage("L_0 needs --sigma"),
            };
            Some(KnownMoments { mu, sigma })
        }
        _ => None,
    };
    let result = in_pool(a.workers, || Kernel::default().statistic(&x, kind, known))?;
    if let Some(path) = &a.dump_correlation {
        let r = correlation_matrix(&x, a.dump_cap)?;
        write_correlation_csv(&r, x.p(), create(path)?)?;
    }
    print_json(&CoherenceReport {
        kind: result.kind,
        value: result.value,
        pair: result.pair,
        n: x.n(),
        p: x.p(),
        m: result.mask_gap,
    })?;
    Ok(0)
}

fn cmd_test(a: TestArgs) -> Result<u8, CliError> {
    let x = read_matrix(&a.input)?;
    let regime = a.regime.params(x.n(), x.p())?;
    let method = a.method.into();
    let report = in_pool(a.workers, || match a.m {
        None => independence_test(&x, a.level, method, &regime),
        Some(m) => {
            let mut report =
                m_dependence_test(&x, m, a.level, method, &regime, a.pair_count.into())?;
            if let Some(delta) = a.delta {
                let r = correlation_matrix(&x, x.p())?;
                report.warnings = band_assumption_warnings(&r, x.p(), m, delta)?;
            }
            Ok(report)
        }
    })?;
    print_json(&report)?;
    Ok(if report.rejected() { EXIT_REJECT } else { 0 })
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8, CliError> {
    let gap = a.gap.or(a.m);
    let kind = statistic_kind(a.kind, gap)?;
    let mut plan = SimulationPlan::new(a.dist, a.n, a.p, kind, a.replications, a.seed)?;
    if let Some(m) = a.m {
        plan = plan.with_design_m(m)?;
    }
    let kappa = match a.kappa {
        Some(k) => k,
        None => plan.regime.kappa,
    };
    let regime = RegimeFlags {
        regime: a.regime,
        kappa,
    };
    plan = plan.with_regime(regime.params(a.n, a.p)?)?;
    if let Some(mode) = a.pair_count {
        plan = plan.with_pair_count(mode.into());
    }
    plan = plan.with_scale(match a.stat {
        StatArg::Raw => SampleScale::Raw,
        StatArg::W => SampleScale::Normalized,
        StatArg::Scaled => SampleScale::Scaled,
    });
    let summary = in_pool(a.workers, || run_replications(&plan))?;
    if let Some(path) = &a.samples {
        let mut w = create(path)?;
        write_samples_csv(&summary.samples, &mut w)?;
        w.flush()?;
    }
    print_json(&summary)?;
    Ok(0)
}

fn cmd_mip(a: MipArgs) -> Result<u8, CliError> {
    let x = read_matrix(&a.input)?;
    print_json(&mip_certificate(&x, a.mu, a.k)?)?;
    Ok(0)
}

fn parse_grid(grid: &str) -> Result<Vec<f64>, CliError> {
    grid.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("grid value '{s}' is not a number")))
        })
        .collect()
}

fn cmd_dist_tables(a: TableArgs) -> Result<u8, CliError> {
    let regime = a.regime.params(a.n, a.p)?;
    let rows = distribution_table(&parse_grid(&a.grid)?, &regime, a.pair_count.into())?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            write_table_csv(&rows, &mut w)?;
            w.flush()?;
        }
        None => write_table_csv(&rows, io::stdout().lock())?,
    }
    Ok(0)
}

fn cmd_generate(a: GenerateArgs) -> Result<u8, CliError> {
    let x = match a.m {
        Some(m) => sample_m_dependent(&a.dist, a.n, a.p, m, a.seed)?,
        None => sample_matrix(&a.dist, a.n, a.p, a.seed)?,
    };
    let mut w = create(&a.out)?;
    match a.format {
        FormatArg::Csv => write_csv(&x, &mut w)?,
        FormatArg::Binary => write_binary(&x, &mut w)?,
    }
    w.flush()?;
    Ok(0)
}
