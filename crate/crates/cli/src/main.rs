//! `mfdfa`: multifractal analysis of price and return series.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{Days, NaiveDate};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use multifractal::correlation::{autocorrelation, classify_decay, tail_exponent};
use multifractal::dataio::{convert_currency, ingest_csv, series_to_csv};
use multifractal::mfdfa::{fit_hurst, fluctuation_surface, q_range, GridSpec, ScaleRange};
use multifractal::pipeline::{
    load_returns, run_pipeline, InputKind, InputSpec, OutputFormat, PipelineConfig, RatesSpec,
};
use multifractal::series::{normalize_returns, profile, TimeSeries};
use multifractal::spectrum::{fit_spectrum, legendre_transform, SpectrumFit};
use multifractal::synth::{generate, GeneratorKind, GeneratorSpec};
use multifractal::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(
    name = "mfdfa",
    version,
    about = "Multifractal detrended fluctuation analysis"
)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: returns, extrema sequences, MF-DFA, spectra, surrogates.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic series as CSV.
    Synth(SynthArgs),
    /// Autocorrelation, decay law and tail exponent of the returns.
    Acf(AcfArgs),
    /// Fluctuation functions and generalized Hurst exponents of the returns.
    Mfdfa(StageArgs),
    /// Singularity spectrum and complexity parameters of the returns.
    Spectrum(StageArgs),
    /// Convert prices with a daily exchange-rate series.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "date")]
    date_col: String,
    /// Read values only; the input has no date column.
    #[arg(long, conflicts_with = "rates")]
    no_dates: bool,
    /// Value column: prices, or returns with `--returns`.
    #[arg(long, default_value = "price")]
    price_col: String,
    /// The value column already holds returns.
    #[arg(long)]
    returns: bool,
    /// Exchange rates to multiply prices by, joined on date.
    #[arg(long)]
    rates: Option<PathBuf>,
    #[arg(long, default_value = "rate")]
    rate_col: String,
}

impl InputArgs {
    fn spec(&self) -> InputSpec {
        InputSpec {
            path: self.input.clone(),
            date_column: (!self.no_dates).then(|| self.date_col.clone()),
            value_column: self.price_col.clone(),
            kind: if self.returns {
                InputKind::Returns
            } else {
                InputKind::Prices
            },
            rates: self.rates.clone().map(|path| RatesSpec {
                path,
                column: self.rate_col.clone(),
            }),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Spacing {
    Log,
    Dyadic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fit {
    Quadratic,
    Quartic,
}

impl From<Fit> for SpectrumFit {
    fn from(f: Fit) -> Self {
        match f {
            Fit::Quadratic => SpectrumFit::Quadratic,
            Fit::Quartic => SpectrumFit::Quartic,
        }
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    q_min: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    q_max: f64,
    #[arg(long, default_value_t = 0.5)]
    q_step: f64,
    /// Smallest scale [default: max(6, order + 2)].
    #[arg(long)]
    s_min: Option<usize>,
    /// Largest scale [default: N / 5].
    #[arg(long)]
    s_max: Option<usize>,
    /// Detrending polynomial order.
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Scale placement between the bounds.
    #[arg(long, value_enum, default_value_t = Spacing::Log)]
    scales: Spacing,
    /// Fit region `lo:hi`; repeatable [default: the whole scale range].
    #[arg(long, value_parser = parse_range)]
    region: Vec<ScaleRange>,
    /// Polynomial fitted to the singularity spectrum.
    #[arg(long, value_enum, default_value_t = Fit::Quartic)]
    fit: Fit,
}

impl GridArgs {
    fn apply(&self, c: &mut PipelineConfig) {
        c.q_min = self.q_min;
        c.q_max = self.q_max;
        c.q_step = self.q_step;
        c.scale_min = self.s_min;
        c.scale_max = self.s_max;
        c.detrend_order = self.order;
        c.scale_spacing = match self.scales {
            Spacing::Log => multifractal::mfdfa::ScaleSpacing::Log,
            Spacing::Dyadic => multifractal::mfdfa::ScaleSpacing::Dyadic,
        };
        c.regions = self.region.clone();
        c.spectrum_fit = self.fit.into();
    }
}

fn parse_range(s: &str) -> std::result::Result<ScaleRange, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Extrema window length R; repeatable.
    #[arg(long = "window", default_values_t = [5usize, 10])]
    windows: Vec<usize>,
    /// Scale bounds `lo:hi` for extrema sequences, clamped to a quarter of
    /// each sequence.
    #[arg(long, value_parser = parse_range, default_value = "5:75")]
    extrema_scales: ScaleRange,
    /// Fit region for extrema sequences; repeatable.
    #[arg(long, value_parser = parse_range)]
    extrema_region: Vec<ScaleRange>,
    /// Shuffled surrogates per series.
    #[arg(long, default_value_t = 1)]
    shuffles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    acf: AcfOptions,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct AcfOptions {
    /// Largest autocorrelation lag [default: min(100, (N - 1) / 2)].
    #[arg(long)]
    max_lag: Option<usize>,
    /// Lags `lo:hi` used to classify the decay.
    #[arg(long, value_parser = parse_range, default_value = "1:30")]
    acf_fit: ScaleRange,
    /// Fraction of largest magnitudes used for the tail exponent.
    #[arg(long, default_value_t = 0.05)]
    tail_fraction: f64,
}

#[derive(Args)]
struct AcfArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    acf: AcfOptions,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StageArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Gaussian,
    Ar1,
    Fgn,
    Cascade,
    Pareto,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: Generator,
    #[arg(long)]
    length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// AR(1) coefficient.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    phi: f64,
    /// Hurst exponent of fractional Gaussian noise.
    #[arg(long, default_value_t = 0.7)]
    hurst: f64,
    /// Binomial cascade weight.
    #[arg(long, default_value_t = 0.6)]
    a: f64,
    /// Pareto tail exponent.
    #[arg(long, default_value_t = 3.0)]
    zeta: f64,
    /// Multiply every value by this factor.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Emit a price path `p0 * exp(cumsum)` instead of the values.
    #[arg(long)]
    prices: bool,
    #[arg(long, default_value_t = 100.0)]
    start_price: f64,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "date")]
    date_col: String,
    #[arg(long, default_value = "price")]
    price_col: String,
    #[arg(long)]
    rates: PathBuf,
    #[arg(long, default_value = "rate")]
    rate_col: String,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// First date of synthetic series.
const SYNTH_START: NaiveDate = match NaiveDate::from_ymd_opt(2000, 1, 3) {
    Some(d) => d,
    None => panic!("valid date"),
};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numerical => 4,
            })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Analyze(a) => analyze(a),
        Command::Synth(a) => synth(a),
        Command::Acf(a) => acf(a),
        Command::Mfdfa(a) => stage(a, false),
        Command::Spectrum(a) => stage(a, true),
        Command::Convert(a) => convert(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &serde_json::Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let mut c = PipelineConfig::new(a.input.spec());
    a.grid.apply(&mut c);
    c.extrema_windows = a.windows;
    c.extrema_scale_min = a.extrema_scales.lo;
    c.extrema_scale_max = a.extrema_scales.hi;
    c.extrema_regions = a.extrema_region;
    c.shuffles = a.shuffles;
    c.seed = a.seed;
    c.acf_max_lag = a.acf.max_lag;
    c.acf_fit = a.acf.acf_fit;
    c.tail_fraction = a.acf.tail_fraction;
    c.output.dir = Some(a.out.clone());
    c.output.format = match a.format {
        Format::Json => OutputFormat::Json,
        Format::Csv => OutputFormat::Csv,
    };
    let report = run_pipeline(&c)?;
    print!("{}", report.table.render());
    log::info!("report written to {}", a.out.display());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let kind = match a.kind {
        Generator::Gaussian => GeneratorKind::GaussianWhite,
        Generator::Ar1 => GeneratorKind::Ar1 { phi: a.phi },
        Generator::Fgn => GeneratorKind::Fgn { hurst: a.hurst },
        Generator::Cascade => GeneratorKind::BinomialCascade { a: a.a },
        Generator::Pareto => GeneratorKind::Pareto { zeta: a.zeta },
    };
    if !(a.scale.is_finite() && a.scale != 0.0) || a.start_price.is_nan() || a.start_price <= 0.0 {
        return Err(Error::Config(
            "scale must be finite and non-zero, start price positive".into(),
        ));
    }
    let series = generate(&GeneratorSpec::new(kind, a.length, a.seed))?;
    let values: Vec<f64> = series.values().iter().map(|v| v * a.scale).collect();
    let (values, header) = if a.prices {
        let mut acc = 0.0;
        let path = std::iter::once(a.start_price)
            .chain(values.iter().map(|v| {
                acc += v;
                a.start_price * acc.exp()
            }))
            .collect();
        (path, "price")
    } else {
        (values, "value")
    };
    let dates = (0..values.len() as u64)
        .map(|i| {
            SYNTH_START
                .checked_add_days(Days::new(i))
                .expect("date in range")
        })
        .collect();
    let out = TimeSeries::with_dates(values, dates)?;
    emit(a.out.as_deref(), &series_to_csv(&out, header))
}

fn acf(a: AcfArgs) -> Result<()> {
    let loaded = load_returns(&a.input.spec())?;
    let normalized = normalize_returns(&loaded.returns)?;
    let max_lag = a
        .acf
        .max_lag
        .unwrap_or(100)
        .min(normalized.len().saturating_sub(1) / 2);
    let acf = autocorrelation(&normalized, max_lag)?;
    let decay = classify_decay(&acf, a.acf.acf_fit.lo..=a.acf.acf_fit.hi.min(max_lag));
    let tail = tail_exponent(&loaded.returns, a.acf.tail_fraction)?;
    let v =
        json!({ "input_sha256": loaded.input_sha256, "acf": acf, "decay": decay, "tail": tail });
    emit(a.out.as_deref(), &to_json(&v)?)
}

fn stage(a: StageArgs, with_spectrum: bool) -> Result<()> {
    let loaded = load_returns(&a.input.spec())?;
    let normalized = normalize_returns(&loaded.returns)?;
    let n = normalized.len();
    let g = &a.grid;
    let q = q_range(g.q_min, g.q_max, g.q_step)?;
    let s_min = g.s_min.unwrap_or(6.max(g.order + 2));
    let s_max = g.s_max.unwrap_or(n / 5);
    let mut c = PipelineConfig::new(a.input.spec());
    g.apply(&mut c);
    let grid = GridSpec::with_spacing(q, s_min, s_max, g.order, c.scale_spacing)?;
    let surface = fluctuation_surface(&profile(&normalized)?, &grid)?;
    let regions = if g.region.is_empty() {
        vec![ScaleRange::new(s_min, s_max)]
    } else {
        g.region.clone()
    };
    let mut results = Vec::new();
    for r in regions {
        let hurst = fit_hurst(&surface, r)?;
        let mut entry = json!({ "region": r.to_string(), "hurst": hurst });
        if with_spectrum {
            let spectrum = legendre_transform(&hurst)?;
            let params = match fit_spectrum(&spectrum, c.spectrum_fit) {
                Ok(p) => json!(p),
                Err(Error::WidthUndefined { reason, alpha0, .. }) => {
                    json!({ "status": "undefined", "reason": reason, "alpha0": alpha0 })
                }
                Err(e) => return Err(e),
            };
            entry["spectrum"] = json!(spectrum);
            entry["params"] = params;
        }
        results.push(entry);
    }
    let mut v = json!({ "input_sha256": loaded.input_sha256, "regions": results });
    if !with_spectrum {
        v["surface"] = json!(surface);
    }
    emit(a.out.as_deref(), &to_json(&v)?)
}

fn convert(a: ConvertArgs) -> Result<()> {
    let prices = ingest_csv(&a.input, Some(&a.date_col), &a.price_col, true)?;
    let rates = ingest_csv(&a.rates, Some(&a.date_col), &a.rate_col, true)?;
    let (converted, join) = convert_currency(&prices, &rates)?;
    eprintln!(
        "matched {} days; dropped {} prices and {} rates without a counterpart",
        join.matched, join.unmatched_prices, join.unmatched_rates
    );
    emit(a.out.as_deref(), &series_to_csv(&converted, "price"))
}
