//! End-to-end analysis: ingest, returns, extrema sequences, correlations,
//! MF-DFA per scale region, singularity spectra, shuffled surrogates and the
//! complexity table.
//!
//! Everything is computed in memory first; files are written only after the
//! whole report exists, so a failing stage leaves no partial output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::correlation::{
    autocorrelation, classify_decay, tail_exponent, AutocorrelationResult, DecayClassification,
    TailEstimate, DEFAULT_TAIL_FRACTION,
};
use crate::dataio::{convert_currency, file_digest, ingest_csv, JoinReport};
use crate::error::{Error, Result};
use crate::mfdfa::{
    fit_hurst, fluctuation_surface, hurst_from_slopes, q_range, FluctuationSurface, GridSpec,
    HurstSpectrum, ScaleRange, ScaleSpacing,
};
use crate::series::{
    extrema_sequence, log_returns, normalize_returns, profile, shuffle, ExtremaKind, TimeSeries,
};
use crate::spectrum::{
    compare_surrogate, fit_spectrum, legendre_transform, ComplexityParams,
    MultifractalityAttribution, SingularitySpectrum, SpectrumFit, SurrogateInput,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Prices; log returns are taken.
    Prices,
    /// Already returns; used as given.
    Returns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesSpec {
    pub path: PathBuf,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: PathBuf,
    /// `None` reads values only, without dates.
    pub date_column: Option<String>,
    pub value_column: String,
    pub kind: InputKind,
    /// Exchange rates applied to prices before returns are taken.
    pub rates: Option<RatesSpec>,
}

impl InputSpec {
    pub fn prices(path: impl Into<PathBuf>) -> Self {
        InputSpec {
            path: path.into(),
            date_column: Some("date".into()),
            value_column: "price".into(),
            kind: InputKind::Prices,
            rates: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// `report.json` and `table.txt`.
    #[default]
    Json,
    /// As `Json`, plus one flat CSV per plot.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    /// Nothing is written when absent.
    pub dir: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: InputSpec,
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub detrend_order: usize,
    /// Defaults to `max(6, m + 2)`.
    pub scale_min: Option<usize>,
    /// Defaults to `N / 5`.
    pub scale_max: Option<usize>,
    pub scale_spacing: ScaleSpacing,
    /// Fit regions for the return series; empty means the full scale range.
    pub regions: Vec<ScaleRange>,
    /// Window lengths `R` of the extrema sequences.
    pub extrema_windows: Vec<usize>,
    pub extrema_scale_min: usize,
    /// Clamped to a quarter of each extrema sequence length.
    pub extrema_scale_max: usize,
    /// Fit regions for extrema sequences; empty means their full scale range.
    pub extrema_regions: Vec<ScaleRange>,
    pub shuffles: usize,
    pub seed: u64,
    /// Defaults to `min(100, (N - 1) / 2)`.
    pub acf_max_lag: Option<usize>,
    /// Lags used to classify the autocorrelation decay.
    pub acf_fit: ScaleRange,
    pub tail_fraction: f64,
    pub spectrum_fit: SpectrumFit,
    #[serde(skip)]
    pub output: OutputSpec,
}

impl PipelineConfig {
    pub fn new(input: InputSpec) -> Self {
        PipelineConfig {
            input,
            q_min: -10.0,
            q_max: 10.0,
            q_step: 0.5,
            detrend_order: 2,
            scale_min: None,
            scale_max: None,
            scale_spacing: ScaleSpacing::Log,
            regions: Vec::new(),
            extrema_windows: vec![5, 10],
            extrema_scale_min: 5,
            extrema_scale_max: 75,
            extrema_regions: Vec::new(),
            shuffles: 1,
            seed: 0,
            acf_max_lag: None,
            acf_fit: ScaleRange::new(1, 30),
            tail_fraction: DEFAULT_TAIL_FRACTION,
            spectrum_fit: SpectrumFit::Quartic,
            output: OutputSpec::default(),
        }
    }

    /// Checks everything that does not depend on the data length.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        q_range(self.q_min, self.q_max, self.q_step)?;
        if self.detrend_order == 0 {
            return bad("detrend order must be at least 1".into());
        }
        let floor = self.detrend_order + 2;
        if let Some(s) = self.scale_min.filter(|&s| s < floor) {
            return bad(format!("minimum scale {s} below m + 2 = {floor}"));
        }
        if let (Some(lo), Some(hi)) = (self.scale_min, self.scale_max) {
            if hi < lo {
                return bad(format!("scale bounds {lo}..{hi} are empty"));
            }
        }
        if self.extrema_scale_max < self.extrema_scale_min.max(floor) {
            return bad(format!(
                "extrema scale bounds {}..{} are empty for m = {}",
                self.extrema_scale_min, self.extrema_scale_max, self.detrend_order
            ));
        }
        for r in self.regions.iter().chain(&self.extrema_regions) {
            if r.lo == 0 || r.hi <= r.lo {
                return bad(format!("scale region {r} is empty"));
            }
        }
        if let Some(&w) = self.extrema_windows.iter().find(|&&w| w < 2) {
            return bad(format!("extrema window {w} must be at least 2"));
        }
        if self.acf_fit.lo == 0 || self.acf_fit.hi < self.acf_fit.lo {
            return bad(format!("autocorrelation fit lags {} invalid", self.acf_fit));
        }
        if self.acf_max_lag == Some(0) {
            return bad("autocorrelation max lag must be positive".into());
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 0.5) {
            return bad(format!(
                "tail fraction {} outside (0, 0.5]",
                self.tail_fraction
            ));
        }
        Ok(())
    }
}

/// Seed of shuffle `k` of series `series_index`, derived from the base seed
/// by SplitMix64 so that every surrogate draws an independent stream.
pub fn derive_seed(base: u64, series_index: usize, k: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let stream = ((series_index as u64) << 32) | k as u64;
    splitmix(base ^ splitmix(stream))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub input_sha256: Option<String>,
    pub rates_sha256: Option<String>,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub label: String,
    pub observations: usize,
    pub returns: usize,
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
    pub join: Option<JoinReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SeriesKind {
    Total,
    Maxima { window: usize },
    Minima { window: usize },
}

/// Complexity parameters, or the reason they could not be determined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome {
    Fitted(ComplexityParams),
    Undefined { reason: String, alpha0: Option<f64> },
}

impl FitOutcome {
    pub fn params(&self) -> Option<&ComplexityParams> {
        match self {
            FitOutcome::Fitted(p) => Some(p),
            FitOutcome::Undefined { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionResult {
    pub hurst: HurstSpectrum,
    pub spectrum: SingularitySpectrum,
    pub params: FitOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateResult {
    pub seed: u64,
    pub result: RegionResult,
    pub comparison: MultifractalityAttribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAnalysis {
    pub name: String,
    pub range: ScaleRange,
    pub original: RegionResult,
    pub surrogates: Vec<SurrogateResult>,
    /// Original against the surrogate-averaged `h(q)`.
    pub attribution: Option<MultifractalityAttribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededSurface {
    pub seed: u64,
    pub surface: FluctuationSurface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesAnalysis {
    pub key: String,
    pub label: String,
    pub kind: SeriesKind,
    pub length: usize,
    pub acf: AutocorrelationResult,
    pub decay: DecayClassification,
    pub surface: FluctuationSurface,
    pub surrogate_surfaces: Vec<SeededSurface>,
    pub regions: Vec<RegionAnalysis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TableCell {
    pub alpha0: Option<f64>,
    pub width: Option<f64>,
    pub r: Option<f64>,
}

impl TableCell {
    fn from_outcome(o: &FitOutcome) -> Self {
        match o {
            FitOutcome::Fitted(p) => TableCell {
                alpha0: Some(p.alpha0),
                width: Some(p.width),
                r: Some(p.r),
            },
            FitOutcome::Undefined { alpha0, .. } => TableCell {
                alpha0: *alpha0,
                width: None,
                r: None,
            },
        }
    }

    fn mean(cells: &[TableCell]) -> Self {
        let avg = |get: fn(&TableCell) -> Option<f64>| {
            let v: Vec<f64> = cells.iter().filter_map(get).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        TableCell {
            alpha0: avg(|c| c.alpha0),
            width: avg(|c| c.width),
            r: avg(|c| c.r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub series: String,
    pub region: ScaleRange,
    pub original: TableCell,
    pub shuffled: Vec<TableCell>,
    /// Mean over the shuffles where each value is defined.
    pub shuffled_mean: TableCell,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexityTable {
    pub rows: Vec<TableRow>,
}

impl ComplexityTable {
    /// Fixed-width text rendering; shuffled columns carry a `*`.
    pub fn render(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(0)
            .max("Series".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>8} {:>8} {:>8}  {:>8} {:>8} {:>8}",
            "Series", "alpha0", "W", "r", "alpha0*", "W*", "r*"
        );
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        for row in &self.rows {
            let (o, s) = (&row.original, &row.shuffled_mean);
            let _ = writeln!(
                out,
                "{:<width$}  {:>8} {:>8} {:>8}  {:>8} {:>8} {:>8}",
                row.label,
                cell(o.alpha0),
                cell(o.width),
                cell(o.r),
                cell(s.alpha0),
                cell(s.width),
                cell(s.r)
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "label,series,region,alpha0,width,r,alpha0_shuffled,width_shuffled,r_shuffled\n",
        );
        let cell = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for row in &self.rows {
            let (o, s) = (&row.original, &row.shuffled_mean);
            let _ = writeln!(
                out,
                "\"{}\",{},{},{},{},{},{},{},{}",
                row.label,
                row.series,
                row.region,
                cell(o.alpha0),
                cell(o.width),
                cell(o.r),
                cell(s.alpha0),
                cell(s.width),
                cell(s.r)
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub provenance: Provenance,
    pub input: InputSummary,
    pub tail: TailEstimate,
    pub series: Vec<SeriesAnalysis>,
    pub table: ComplexityTable,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn series(&self, key: &str) -> Option<&SeriesAnalysis> {
        self.series.iter().find(|s| s.key == key)
    }
}

/// A return series read from an [`InputSpec`], with what was learned on
/// the way.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedInput {
    pub returns: TimeSeries,
    pub observations: usize,
    pub join: Option<JoinReport>,
    pub input_sha256: String,
    pub rates_sha256: Option<String>,
}

/// Ingests the input (and rates, if any) and produces the return series.
pub fn load_returns(spec: &InputSpec) -> Result<LoadedInput> {
    let input_sha256 = file_digest(&spec.path).map_err(|e| e.at_stage("ingest"))?;
    let positive = spec.kind == InputKind::Prices;
    let raw = ingest_csv(
        &spec.path,
        spec.date_column.as_deref(),
        &spec.value_column,
        positive,
    )
    .map_err(|e| e.at_stage("ingest"))?;
    let observations = raw.len();

    let (raw, join, rates_sha256) = match &spec.rates {
        Some(rates) => {
            if spec.kind != InputKind::Prices {
                return Err(Error::Config("rates apply to price input only".into()));
            }
            let digest = file_digest(&rates.path).map_err(|e| e.at_stage("ingest"))?;
            let r = ingest_csv(
                &rates.path,
                spec.date_column.as_deref(),
                &rates.column,
                true,
            )
            .map_err(|e| e.at_stage("ingest"))?;
            let (converted, join) =
                convert_currency(&raw, &r).map_err(|e| e.at_stage("convert"))?;
            info!(
                "currency conversion matched {} days ({} prices, {} rates unmatched)",
                join.matched, join.unmatched_prices, join.unmatched_rates
            );
            (converted, Some(join), Some(digest))
        }
        None => (raw, None, None),
    };
    let returns = match spec.kind {
        InputKind::Prices => log_returns(&raw).map_err(|e| e.at_stage("returns"))?,
        InputKind::Returns => raw,
    };
    Ok(LoadedInput {
        returns,
        observations,
        join,
        input_sha256,
        rates_sha256,
    })
}

/// Runs the whole pipeline described by `config` and, when an output
/// directory is configured, writes the report files.
pub fn run_pipeline(config: &PipelineConfig) -> Result<AnalysisReport> {
    config.validate()?;
    let loaded = load_returns(&config.input)?;
    let provenance = Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        input_sha256: Some(loaded.input_sha256),
        rates_sha256: loaded.rates_sha256,
        config: config.clone(),
    };
    let mut report = analyze_returns(&loaded.returns, config, provenance)?;
    report.input.observations = loaded.observations;
    report.input.join = loaded.join;
    if let Some(dir) = &config.output.dir {
        write_report(&report, dir, config.output.format)?;
    }
    Ok(report)
}

/// The analysis part of [`run_pipeline`], starting from a return series.
pub fn analyze_returns(
    returns: &TimeSeries,
    config: &PipelineConfig,
    provenance: Provenance,
) -> Result<AnalysisReport> {
    config.validate()?;
    let normalized = normalize_returns(returns).map_err(|e| e.at_stage("normalize"))?;
    let n = normalized.len();
    let tail = tail_exponent(returns, config.tail_fraction).map_err(|e| e.at_stage("tail"))?;

    let q_values = q_range(config.q_min, config.q_max, config.q_step)?;
    let m = config.detrend_order;
    let s_min = config.scale_min.unwrap_or(6.max(m + 2));
    let s_max = config.scale_max.unwrap_or(n / 5);
    if 4 * s_max > n {
        return Err(Error::Config(format!(
            "maximum scale {s_max} exceeds N/4 for N = {n}"
        )));
    }
    let total_grid =
        GridSpec::with_spacing(q_values.clone(), s_min, s_max, m, config.scale_spacing)
            .map_err(|e| e.at_stage("mfdfa"))?;
    let total_regions = regions_or_full(&config.regions, s_min, s_max);

    let mut jobs: Vec<(
        String,
        String,
        SeriesKind,
        TimeSeries,
        GridSpec,
        Vec<ScaleRange>,
    )> = vec![(
        "total".into(),
        "Total".into(),
        SeriesKind::Total,
        normalized.clone(),
        total_grid,
        total_regions,
    )];
    for &w in &config.extrema_windows {
        for kind in [ExtremaKind::Maxima, ExtremaKind::Minima] {
            let seq = extrema_sequence(&normalized, w, kind)
                .map_err(|e| e.at_stage("extrema"))?
                .to_series();
            let len = seq.len();
            let lo = config.extrema_scale_min.max(m + 2);
            let hi = config.extrema_scale_max.min(len / 4);
            if hi < lo {
                return Err(Error::Stage {
                    stage: "extrema".into(),
                    source: Box::new(Error::TooShort { len, min: 4 * lo }),
                });
            }
            let grid = GridSpec::with_spacing(q_values.clone(), lo, hi, m, config.scale_spacing)
                .map_err(|e| e.at_stage("mfdfa"))?;
            let regions = regions_or_full(&config.extrema_regions, lo, hi);
            let (key, label, sk) = match kind {
                ExtremaKind::Maxima => (
                    format!("maxima_r{w}"),
                    format!("Seq. maxima (R={w})"),
                    SeriesKind::Maxima { window: w },
                ),
                ExtremaKind::Minima => (
                    format!("minima_r{w}"),
                    format!("Seq. minima (R={w})"),
                    SeriesKind::Minima { window: w },
                ),
            };
            jobs.push((key, label, sk, seq, grid, regions));
        }
    }

    let mut warnings = Vec::new();
    let mut analyses = Vec::with_capacity(jobs.len());
    for (index, (key, label, kind, series, grid, regions)) in jobs.into_iter().enumerate() {
        let a = analyze_series(
            index,
            key,
            label,
            kind,
            &series,
            &grid,
            &regions,
            config,
            &mut warnings,
        )?;
        analyses.push(a);
    }
    let table = build_table(&analyses);
    let dates = normalized.dates();
    Ok(AnalysisReport {
        provenance,
        input: InputSummary {
            label: returns.label().to_string(),
            observations: returns.len(),
            returns: n,
            first_date: dates.and_then(|d| d.first().copied()),
            last_date: dates.and_then(|d| d.last().copied()),
            join: None,
        },
        tail,
        series: analyses,
        table,
        warnings,
    })
}

fn regions_or_full(regions: &[ScaleRange], lo: usize, hi: usize) -> Vec<ScaleRange> {
    if regions.is_empty() {
        vec![ScaleRange::new(lo, hi)]
    } else {
        regions.to_vec()
    }
}

fn roman(mut n: usize) -> String {
    const DIGITS: [(usize, &str); 13] = [
        (1000, "M"),
        (900, "CM"),
        (500, "D"),
        (400, "CD"),
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let mut out = String::new();
    for (v, s) in DIGITS {
        while n >= v {
            out.push_str(s);
            n -= v;
        }
    }
    out
}

fn surface_of(series: &TimeSeries, grid: &GridSpec) -> Result<FluctuationSurface> {
    let prof = profile(series).map_err(|e| e.at_stage("mfdfa"))?;
    fluctuation_surface(&prof, grid).map_err(|e| e.at_stage("mfdfa"))
}

fn region_result(
    surface: &FluctuationSurface,
    range: ScaleRange,
    fit: SpectrumFit,
) -> Result<RegionResult> {
    let hurst = fit_hurst(surface, range).map_err(|e| e.at_stage("hurst"))?;
    let spectrum = legendre_transform(&hurst).map_err(|e| e.at_stage("legendre"))?;
    let params = match fit_spectrum(&spectrum, fit) {
        Ok(p) => FitOutcome::Fitted(p),
        Err(Error::WidthUndefined { reason, alpha0, .. }) => FitOutcome::Undefined {
            reason,
            alpha0: Some(alpha0),
        },
        Err(e @ Error::InsufficientData(_)) => FitOutcome::Undefined {
            reason: e.to_string(),
            alpha0: None,
        },
        Err(e) => return Err(e.at_stage("spectrum-fit")),
    };
    Ok(RegionResult {
        hurst,
        spectrum,
        params,
    })
}

fn note_degenerate(warnings: &mut Vec<String>, what: &str, surface: &FluctuationSurface) {
    if surface.degenerate.is_empty() {
        return;
    }
    let mut scales: Vec<usize> = surface.degenerate.iter().map(|c| c.scale).collect();
    scales.dedup();
    let msg = format!("{what}: zero-variance segments, q <= 0 cells flagged at scales {scales:?}");
    warn!("{msg}");
    warnings.push(msg);
}

#[allow(clippy::too_many_arguments)]
fn analyze_series(
    index: usize,
    key: String,
    label: String,
    kind: SeriesKind,
    series: &TimeSeries,
    grid: &GridSpec,
    regions: &[ScaleRange],
    config: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<SeriesAnalysis> {
    let n = series.len();
    let max_lag = config
        .acf_max_lag
        .unwrap_or(100)
        .min(n.saturating_sub(1) / 2);
    let acf = autocorrelation(series, max_lag).map_err(|e| e.at_stage("acf"))?;
    let fit_hi = config.acf_fit.hi.min(max_lag);
    let decay = classify_decay(&acf, config.acf_fit.lo..=fit_hi);

    let surface = surface_of(series, grid)?;
    note_degenerate(warnings, &key, &surface);
    let surrogate_surfaces = (0..config.shuffles)
        .map(|k| {
            let seed = derive_seed(config.seed, index, k);
            let surface = surface_of(&shuffle(series, seed), grid)?;
            note_degenerate(warnings, &format!("{key} shuffle {k}"), &surface);
            Ok(SeededSurface { seed, surface })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut region_analyses = Vec::with_capacity(regions.len());
    for (ri, &range) in regions.iter().enumerate() {
        let original = region_result(&surface, range, config.spectrum_fit)?;
        let mut surrogates = Vec::with_capacity(surrogate_surfaces.len());
        for s in &surrogate_surfaces {
            let result = region_result(&s.surface, range, config.spectrum_fit)?;
            let comparison = compare_surrogate(
                SurrogateInput {
                    hurst: &original.hurst,
                    params: original.params.params(),
                },
                SurrogateInput {
                    hurst: &result.hurst,
                    params: result.params.params(),
                },
            )
            .map_err(|e| e.at_stage("surrogate"))?;
            surrogates.push(SurrogateResult {
                seed: s.seed,
                result,
                comparison,
            });
        }
        let attribution = averaged_attribution(&original, &surrogates)?;
        for (what, r) in std::iter::once(("original".to_string(), &original)).chain(
            surrogates
                .iter()
                .enumerate()
                .map(|(k, s)| (format!("shuffle {k}"), &s.result)),
        ) {
            let flagged = r.spectrum.non_monotone.iter().filter(|&&b| b).count();
            if flagged > 0 {
                warnings.push(format!(
                    "{key} {what} region {range}: {flagged} non-monotone alpha points excluded from the fit"
                ));
            }
            if let FitOutcome::Undefined { reason, .. } = &r.params {
                warnings.push(format!("{key} {what} region {range}: {reason}"));
            }
        }
        region_analyses.push(RegionAnalysis {
            name: roman(ri + 1),
            range,
            original,
            surrogates,
            attribution,
        });
    }
    Ok(SeriesAnalysis {
        key,
        label,
        kind,
        length: n,
        acf,
        decay,
        surface,
        surrogate_surfaces,
        regions: region_analyses,
    })
}

fn averaged_attribution(
    original: &RegionResult,
    surrogates: &[SurrogateResult],
) -> Result<Option<MultifractalityAttribution>> {
    let Some(first) = surrogates.first() else {
        return Ok(None);
    };
    let k = surrogates.len() as f64;
    let base = &first.result.hurst;
    let mean = |get: fn(&HurstSpectrum) -> &Vec<f64>| -> Vec<f64> {
        (0..base.q_values.len())
            .map(|i| {
                surrogates
                    .iter()
                    .map(|s| get(&s.result.hurst)[i])
                    .sum::<f64>()
                    / k
            })
            .collect()
    };
    let averaged = hurst_from_slopes(
        base.q_values.clone(),
        mean(|h| &h.h),
        mean(|h| &h.stderr),
        base.fit_range,
        base.scales_used.clone(),
    );
    let single = surrogates.len() == 1;
    compare_surrogate(
        SurrogateInput {
            hurst: &original.hurst,
            params: original.params.params(),
        },
        SurrogateInput {
            hurst: &averaged,
            params: if single {
                first.result.params.params()
            } else {
                None
            },
        },
    )
    .map(Some)
    .map_err(|e| e.at_stage("surrogate"))
}

fn build_table(analyses: &[SeriesAnalysis]) -> ComplexityTable {
    let mut rows = Vec::new();
    for a in analyses {
        let multi = a.regions.len() > 1;
        for region in &a.regions {
            let label = match (a.kind, multi) {
                (SeriesKind::Total, _) => format!("Total (Region {})", region.name),
                (_, false) => a.label.clone(),
                (_, true) => format!("{}, Region {})", a.label.trim_end_matches(')'), region.name),
            };
            let shuffled: Vec<TableCell> = region
                .surrogates
                .iter()
                .map(|s| TableCell::from_outcome(&s.result.params))
                .collect();
            rows.push(TableRow {
                label,
                series: a.key.clone(),
                region: region.range,
                original: TableCell::from_outcome(&region.original.params),
                shuffled_mean: TableCell::mean(&shuffled),
                shuffled,
            });
        }
    }
    ComplexityTable { rows }
}

/// Serialized files of a report as `(file name, contents)`, in write order.
pub fn report_files(
    report: &AnalysisReport,
    format: OutputFormat,
) -> Result<Vec<(String, String)>> {
    let mut files = vec![
        (
            "report.json".to_string(),
            serde_json::to_string_pretty(report)? + "\n",
        ),
        ("table.txt".to_string(), report.table.render()),
    ];
    if format == OutputFormat::Csv {
        files.push(("table.csv".into(), report.table.to_csv()));
        for a in &report.series {
            files.push((format!("{}.acf.csv", a.key), acf_csv(&a.acf)));
            files.push((format!("{}.surface.csv", a.key), surface_csv(&a.surface)));
            for (k, s) in a.surrogate_surfaces.iter().enumerate() {
                files.push((
                    format!("{}.shuffle{k}.surface.csv", a.key),
                    surface_csv(&s.surface),
                ));
            }
            for (ri, region) in a.regions.iter().enumerate() {
                let stem = format!("{}.region{}", a.key, ri + 1);
                push_region_csvs(&mut files, &stem, &region.original);
                for (k, s) in region.surrogates.iter().enumerate() {
                    push_region_csvs(&mut files, &format!("{stem}.shuffle{k}"), &s.result);
                }
            }
        }
    }
    Ok(files)
}

fn push_region_csvs(files: &mut Vec<(String, String)>, stem: &str, r: &RegionResult) {
    let hs = &r.hurst;
    let mut hurst = String::from("q,h,stderr\n");
    let mut tau = String::from("q,tau\n");
    for i in 0..hs.q_values.len() {
        let _ = writeln!(hurst, "{},{},{}", hs.q_values[i], hs.h[i], hs.stderr[i]);
        let _ = writeln!(tau, "{},{}", hs.q_values[i], hs.tau[i]);
    }
    let mut spectrum = String::from("alpha,f\n");
    for (a, f) in r.spectrum.alpha.iter().zip(&r.spectrum.f) {
        let _ = writeln!(spectrum, "{a},{f}");
    }
    files.push((format!("{stem}.hurst.csv"), hurst));
    files.push((format!("{stem}.tau.csv"), tau));
    files.push((format!("{stem}.spectrum.csv"), spectrum));
}

fn acf_csv(acf: &AutocorrelationResult) -> String {
    let mut out = String::from("lag,c\n");
    for (l, c) in acf.lags.iter().zip(&acf.values) {
        let _ = writeln!(out, "{l},{c}");
    }
    out
}

fn surface_csv(surface: &FluctuationSurface) -> String {
    let mut out = String::from("s,q,F\n");
    for (si, s) in surface.grid.scales.iter().enumerate() {
        for (qi, q) in surface.grid.q_values.iter().enumerate() {
            let _ = writeln!(out, "{s},{q},{}", surface.get(qi, si));
        }
    }
    out
}

/// Writes the report files into `dir`, creating it if needed.
pub fn write_report(
    report: &AnalysisReport,
    dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    let files = report_files(report, format)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    files
        .into_iter()
        .map(|(name, contents)| {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
