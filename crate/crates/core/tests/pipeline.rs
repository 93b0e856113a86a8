use std::fs;
use std::path::{Path, PathBuf};

use multifractal::dataio::{ingest_csv, series_to_csv, write_series_csv};
use multifractal::mfdfa::{ScaleRange, ScaleSpacing};
use multifractal::pipeline::{
    derive_seed, run_pipeline, write_report, FitOutcome, InputKind, InputSpec, OutputFormat,
    PipelineConfig, RatesSpec,
};
use multifractal::series::{log_returns, shuffle, TimeSeries};
use multifractal::synth::{generate, GeneratorKind, GeneratorSpec};
use multifractal::{Error, ErrorClass};

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/sample_prices.csv")
}

fn returns_config(path: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::new(InputSpec {
        path: path.to_path_buf(),
        date_column: None,
        value_column: "value".into(),
        kind: InputKind::Returns,
        rates: None,
    });
    c.q_min = -5.0;
    c.q_max = 5.0;
    c
}

fn write_values(dir: &Path, name: &str, values: &[f64]) -> PathBuf {
    let path = dir.join(name);
    write_series_csv(&path, &TimeSeries::new(values.to_vec()).unwrap(), "value").unwrap();
    path
}

#[test]
fn bundled_sample_round_trips_bit_identically() {
    let text = fs::read_to_string(sample()).unwrap();
    let prices = ingest_csv(&sample(), Some("date"), "price", true).unwrap();
    assert_eq!(prices.len(), 4001);
    assert_eq!(series_to_csv(&prices, "price"), text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.csv");
    write_series_csv(&path, &prices, "price").unwrap();
    let back = ingest_csv(&path, Some("date"), "price", true).unwrap();
    assert!(back
        .values()
        .iter()
        .zip(prices.values())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(back.dates(), prices.dates());
}

#[test]
fn cascade_report_matches_closed_form() {
    let a = 0.6;
    let n = 1 << 14;
    let measure = generate(&GeneratorSpec::new(
        GeneratorKind::BinomialCascade { a },
        n,
        0,
    ))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write_values(dir.path(), "cascade.csv", measure.values());
    let mut c = returns_config(&path);
    c.scale_min = Some(8);
    c.scale_max = Some(n / 4);
    c.scale_spacing = ScaleSpacing::Dyadic;
    c.extrema_windows = vec![];
    c.shuffles = 0;
    let report = run_pipeline(&c).unwrap();
    let hs = &report.series("total").unwrap().regions[0].original.hurst;
    for (&q, &h) in hs.q_values.iter().zip(&hs.h) {
        if q == 0.0 {
            continue;
        }
        let exact = 1.0 / q - (a.powf(q) + (1.0 - a).powf(q)).ln() / (q * 2f64.ln());
        assert!((h - exact).abs() < 0.05, "q = {q}: {h} vs {exact}");
    }
    assert_eq!(report.table.rows.len(), 1);
    assert!(report.table.rows[0].shuffled.is_empty());
}

#[test]
fn white_noise_extrema_stay_uncorrelated() {
    // Below s ~ 10 order-2 detrending biases h upward on any white noise, so
    // the fit starts at 10 and the noise itself is the reference.
    let dir = tempfile::tempdir().unwrap();
    let (mut maxima, mut plain) = (0.0, 0.0);
    for seed in 0..4 {
        let x = generate(&GeneratorSpec::new(
            GeneratorKind::GaussianWhite,
            1 << 15,
            seed,
        ))
        .unwrap();
        let path = write_values(dir.path(), &format!("noise{seed}.csv"), x.values());
        let mut c = returns_config(&path);
        c.extrema_windows = vec![5];
        c.extrema_regions = vec![ScaleRange::new(10, 75)];
        c.regions = vec![ScaleRange::new(10, 75)];
        c.shuffles = 0;
        let report = run_pipeline(&c).unwrap();
        let h2 = |key: &str| {
            report.series(key).unwrap().regions[0]
                .original
                .hurst
                .h_at(2.0)
                .unwrap()
        };
        maxima += h2("maxima_r5") / 4.0;
        plain += h2("total") / 4.0;
    }
    assert!((maxima - 0.5).abs() < 0.05, "maxima h(2) = {maxima}");
    assert!(
        (maxima - plain).abs() < 0.03,
        "maxima {maxima} vs noise {plain}"
    );
}

#[test]
fn shuffled_input_equals_shuffle_stage() {
    let dir = tempfile::tempdir().unwrap();
    let x = generate(&GeneratorSpec::new(
        GeneratorKind::Fgn { hurst: 0.7 },
        4096,
        5,
    ))
    .unwrap();
    let orig = write_values(dir.path(), "orig.csv", x.values());
    let mut c = returns_config(&orig);
    c.extrema_windows = vec![];
    c.seed = 99;
    let with_stage = run_pipeline(&c).unwrap();

    let pre = shuffle(&x, derive_seed(99, 0, 0));
    let shuffled = write_values(dir.path(), "shuffled.csv", pre.values());
    let mut c2 = returns_config(&shuffled);
    c2.extrema_windows = vec![];
    c2.shuffles = 0;
    let direct = run_pipeline(&c2).unwrap();

    let a = &with_stage.series("total").unwrap().regions[0].surrogates[0]
        .result
        .hurst;
    let b = &direct.series("total").unwrap().regions[0].original.hurst;
    for (x, y) in a.h.iter().zip(&b.h) {
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn table_has_one_row_per_series_and_region() {
    let mut c = PipelineConfig::new(InputSpec::prices(sample()));
    c.regions = vec![
        ScaleRange::new(10, 60),
        ScaleRange::new(60, 300),
        ScaleRange::new(300, 800),
    ];
    c.extrema_windows = vec![3, 7, 12];
    c.extrema_regions = vec![ScaleRange::new(5, 30), ScaleRange::new(20, 75)];
    c.shuffles = 2;
    let report = run_pipeline(&c).unwrap();
    let labels: Vec<&str> = report.table.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels.len(), 3 + 3 * 2 * 2);
    assert_eq!(
        labels[..3],
        [
            "Total (Region I)",
            "Total (Region II)",
            "Total (Region III)"
        ]
    );
    assert_eq!(labels[3], "Seq. maxima (R=3, Region I)");
    assert_eq!(labels[6], "Seq. minima (R=3, Region II)");
    assert!(report.table.rows.iter().all(|r| r.shuffled.len() == 2));
    let seeds: Vec<u64> = report.series("total").unwrap().regions[0]
        .surrogates
        .iter()
        .map(|s| s.seed)
        .collect();
    assert_eq!(seeds, [derive_seed(0, 0, 0), derive_seed(0, 0, 1)]);
    // Every table cell traces back to the spectrum fit it summarizes.
    let total = report.series("total").unwrap();
    if let FitOutcome::Fitted(p) = &total.regions[1].original.params {
        assert_eq!(report.table.rows[1].original.width, Some(p.width));
    }
}

#[test]
fn report_carries_provenance() {
    let c = PipelineConfig::new(InputSpec::prices(sample()));
    let report = run_pipeline(&c).unwrap();
    let p = &report.provenance;
    assert_eq!(p.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(p.input_sha256.as_deref().map(str::len), Some(64));
    assert_eq!(p.config, c);
    assert_eq!(report.input.observations, 4001);
    assert_eq!(report.input.returns, 4000);
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(
        json["series"][0]["regions"][0]["original"]["hurst"]["fit_range"]["lo"],
        6
    );
    assert!(json["series"][0]["surface"]["grid"]["scales"].is_array());
}

#[test]
fn emitted_files_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = PipelineConfig::new(InputSpec::prices(sample()));
    c.seed = 17;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    c.output.dir = Some(a.clone());
    c.output.format = OutputFormat::Csv;
    let report = run_pipeline(&c).unwrap();
    let written = write_report(&report, &b, OutputFormat::Csv).unwrap();
    assert!(written.len() > 10);
    for path in &written {
        let name = path.file_name().unwrap();
        assert_eq!(
            fs::read(path).unwrap(),
            fs::read(a.join(name)).unwrap(),
            "{name:?}"
        );
    }
    let surface = fs::read_to_string(b.join("total.surface.csv")).unwrap();
    assert!(surface.starts_with("s,q,F\n"));
    assert!(fs::read_to_string(b.join("total.region1.hurst.csv"))
        .unwrap()
        .starts_with("q,h,stderr\n"));
    assert!(fs::read_to_string(b.join("total.region1.spectrum.csv"))
        .unwrap()
        .starts_with("alpha,f\n"));
    assert!(b.join("minima_r10.region1.shuffle0.tau.csv").exists());
}

#[test]
fn failing_stage_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut c = PipelineConfig::new(InputSpec::prices(sample()));
    c.regions = vec![ScaleRange::new(7, 8)];
    c.output.dir = Some(out.clone());
    match run_pipeline(&c) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "hurst"),
        other => panic!("{other:?}"),
    }
    assert!(!out.exists());

    c.scale_max = Some(2000);
    let e = run_pipeline(&c).unwrap_err();
    assert_eq!(e.class(), ErrorClass::Config);
    assert!(!out.exists());
}

#[test]
fn ingest_errors_name_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "date,price\n2010-01-05,1\n2010-01-04,2\n").unwrap();
    let e = run_pipeline(&PipelineConfig::new(InputSpec::prices(&path))).unwrap_err();
    assert_eq!(e.class(), ErrorClass::Data);
    assert!(
        e.to_string().contains("ingest") && e.to_string().contains("row 3"),
        "{e}"
    );
}

#[test]
fn converted_prices_feed_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let prices = ingest_csv(&sample(), Some("date"), "price", true).unwrap();
    // Constant rate on every other day: returns become two-day returns.
    let dates: Vec<_> = prices.dates().unwrap().iter().step_by(2).copied().collect();
    let rates = TimeSeries::with_dates(vec![2.0; dates.len()], dates).unwrap();
    let rates_path = dir.path().join("rates.csv");
    write_series_csv(&rates_path, &rates, "rate").unwrap();

    let mut spec = InputSpec::prices(sample());
    spec.rates = Some(RatesSpec {
        path: rates_path,
        column: "rate".into(),
    });
    let mut c = PipelineConfig::new(spec);
    c.extrema_windows = vec![5];
    let report = run_pipeline(&c).unwrap();
    let join = report.input.join.unwrap();
    assert_eq!(join.matched, 2001);
    assert_eq!(join.unmatched_prices, 2000);
    assert_eq!(report.input.returns, 2000);
    assert!(report.provenance.rates_sha256.is_some());

    let every_other: Vec<f64> = prices.values().iter().step_by(2).map(|p| p * 2.0).collect();
    let expected = log_returns(&TimeSeries::new(every_other).unwrap()).unwrap();
    assert_eq!(report.series("total").unwrap().length, expected.len());
}
