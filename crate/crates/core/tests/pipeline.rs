use chrono::NaiveDate;
use ndarray::{array, Array2};
use varx_core::design::{build_design, DesignOptions, Lags, Source};
use varx_core::evaluation::{rmse, rolling_test_forecast, run_variants, select_exogenous, EvaluationConfig, Scale};
use varx_core::ingestion::{
    aggregate_to_regions, build_exogenous, companion_spectral_radius, generate_synthetic_varx, parse_weekly_csv,
    write_weekly_csv, CsvSchema, ExogenousKind, RegionMap, SyntheticSpec, CENSUS_REGIONS,
};
use varx_core::model::{ExogenousPolicy, Variant, VarxModel};
use varx_core::timeseries::{seasonal_difference, MultivariateSeries};
use varx_core::VarxError;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 1, 5).unwrap()
}

#[test]
fn rmse_of_constant_miss() {
    let p = MultivariateSeries::from_rows(vec!["r"], start(), &[vec![0.0, 0.0]]).unwrap();
    let a = MultivariateSeries::from_rows(vec!["r"], start(), &[vec![3.0, 4.0]]).unwrap();
    assert!((rmse(&p, &a).unwrap()[0] - 12.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(rmse(&a, &a).unwrap()[0], 0.0);
    let other = MultivariateSeries::from_rows(vec!["q"], start(), &[vec![3.0, 4.0]]).unwrap();
    assert!(matches!(rmse(&p, &other), Err(VarxError::IndexMismatch(_))));
}

#[test]
fn zero_model_predicts_its_means() {
    let model = VarxModel::from_coefficients(
        vec![Array2::zeros((2, 2))],
        vec![],
        vec!["a".into(), "b".into()],
        vec![],
        Variant::D,
    )
    .unwrap()
    .with_means(array![1.5, -2.0], array![0.3, 0.7])
    .unwrap();
    let y = MultivariateSeries::from_rows(vec!["a", "b"], start(), &[vec![9.0, 1.0, 5.0, 2.0], vec![0.0, 4.0, 8.0, 3.0]])
        .unwrap();
    let f = rolling_test_forecast(&model, &y, None, &y.index().slice(1..4)).unwrap();
    for col in f.values().columns() {
        assert_eq!(col.to_vec(), vec![1.5, -2.0]);
    }
}

#[test]
fn true_model_forecasts_noise_free_data() {
    let d = generate_synthetic_varx(&SyntheticSpec {
        noise_std: 0.0,
        seed: 11,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let model = VarxModel::from_coefficients(
        d.theta.clone(),
        d.beta.clone(),
        d.y.labels().to_vec(),
        d.x.labels().to_vec(),
        Variant::C,
    )
    .unwrap();
    let test = d.y.index().slice(120..178);
    let f = rolling_test_forecast(&model, &d.y, Some(&d.x), &test).unwrap();
    let actual = d.y.restrict_to(&test).unwrap();
    let worst = (&f.values() - &actual.values()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-8, "{worst}");

    // one-step and h=1 agree, and h=2 is the recursion of one-step forecasts
    let hist = d.y.values().slice_move(ndarray::s![.., ..150]);
    let xh = d.x.values().slice_move(ndarray::s![.., ..150]);
    let one = model.forecast_one_step(hist, Some(xh)).unwrap();
    let h = model.forecast_h_step(hist, Some(xh), 2, &ExogenousPolicy::HoldLast).unwrap();
    assert_eq!(h.column(0), one);
}

#[test]
fn variant_designs_hold_only_their_kind() {
    let d = generate_synthetic_varx(&SyntheticSpec::default()).unwrap();
    for (variant, kind) in [(Variant::A, ExogenousKind::Url), (Variant::B, ExogenousKind::Query)] {
        let x = select_exogenous(&d.x, variant).unwrap().unwrap();
        let problem = build_design(&d.y, Some(&x), Lags::new(2, 1), DesignOptions::centered()).unwrap();
        let layout = problem.layout().unwrap();
        let mut exogenous_columns = 0;
        for j in 0..problem.n_columns() {
            let (source, _, idx) = layout.column(j).unwrap();
            if source == Source::Exogenous {
                exogenous_columns += 1;
                assert_eq!(ExogenousKind::of_label(&problem.exogenous_labels()[idx]), Some(kind));
            }
        }
        assert_eq!(exogenous_columns, 9);
        assert_eq!(problem.n_columns(), 9 * 2 + 9);
    }
}

#[test]
fn report_rows_follow_census_order() {
    let d = generate_synthetic_varx(&SyntheticSpec {
        weeks: 160,
        seed: 2,
        ..SyntheticSpec::default()
    })
    .unwrap();
    // shuffle the response rows; the report must still list divisions canonically
    let mut reversed: Vec<&str> = CENSUS_REGIONS.to_vec();
    reversed.reverse();
    let y = d.y.select(&reversed).unwrap();
    let config = EvaluationConfig {
        grid_size: 6,
        ..EvaluationConfig::default()
    };
    let report = run_variants(&y, Some(&d.x), &[Variant::D, Variant::A], &config).unwrap();
    let csv = report.to_csv(Scale::Diff).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "region,A,D");
    for (line, region) in lines[1..].iter().zip(CENSUS_REGIONS) {
        assert!(line.starts_with(&format!("{region},")), "{line}");
    }
    assert_eq!(lines.len(), 10);
    let json = report.to_json(Scale::Level, serde_json::json!({"seed": 2}));
    assert_eq!(json["variants"]["A"]["rmse"].as_object().unwrap().len(), 9);
    assert_eq!(json["config"]["seed"], 2);
}

#[test]
fn csv_to_regions_to_signals() {
    let claims = "week,series,value\n\
        2014-01-04,CA,10\n2014-01-04,WA,5\n2014-01-04,NY,7\n\
        2014-01-11,CA,12\n2014-01-11,WA,6\n2014-01-11,NY,8\n";
    let states = parse_weekly_csv(claims.as_bytes(), &CsvSchema::default()).unwrap();
    let regions = aggregate_to_regions(&states, &RegionMap::census_default()).unwrap();
    assert_eq!(regions.row("Pacific").unwrap().to_vec(), vec![15.0, 18.0]);
    assert_eq!(regions.row("Mid-Atlantic").unwrap().to_vec(), vec![7.0, 8.0]);
    // totals are preserved
    let state_sum: f64 = states.values().sum();
    assert_eq!(regions.values().sum(), state_sum);

    // one state per division with count c and total e*c gives constant -1 after normalization
    let one_per_region = ["NY", "VT", "OH", "IA", "TX", "AL", "UT", "WA", "FL"];
    let counts: Vec<Vec<f64>> = (0..9).map(|i| vec![10.0 + i as f64; 3]).collect();
    let totals: Vec<Vec<f64>> = counts
        .iter()
        .map(|r| r.iter().map(|c| std::f64::consts::E * (c + 0.5)).collect())
        .collect();
    let q = MultivariateSeries::from_rows(one_per_region.to_vec(), start(), &counts).unwrap();
    let t = MultivariateSeries::from_rows(CENSUS_REGIONS.to_vec(), start(), &totals).unwrap();
    let x = build_exogenous(&q, &q, &t, &RegionMap::census_default(), 0.5).unwrap();
    assert_eq!(x.n_series(), 18);
    assert!(x.values().iter().all(|v| (v + 1.0).abs() < 1e-12));
    assert_eq!(x.labels()[0], "Mid-Atlantic:query");
    assert_eq!(x.labels()[9], "Mid-Atlantic:url");
}

#[test]
fn synthetic_bundle_properties() {
    let spec = SyntheticSpec {
        seed: 31,
        ..SyntheticSpec::default()
    };
    let d = generate_synthetic_varx(&spec).unwrap();
    assert_eq!(d.y.values().dim(), (9, 178));
    assert_eq!(d.x.values().dim(), (18, 178));
    assert!((companion_spectral_radius(&d.theta) - spec.spectral_radius).abs() < 1e-9);
    assert_eq!(generate_synthetic_varx(&spec).unwrap().y, d.y);

    let mut buf = Vec::new();
    write_weekly_csv(&d.y, &mut buf).unwrap();
    let back = parse_weekly_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
    assert_eq!(back, d.y);

    let (diff, _) = seasonal_difference(&d.y, 52).unwrap();
    assert_eq!(diff.len(), 178 - 52);
    assert!(matches!(
        generate_synthetic_varx(&SyntheticSpec {
            sparsity: 0.0,
            ..spec
        }),
        Err(VarxError::InvalidSpec(_))
    ));
}

#[test]
fn saved_model_reproduces_evaluation_forecasts() {
    let d = generate_synthetic_varx(&SyntheticSpec {
        weeks: 150,
        seed: 5,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let config = EvaluationConfig {
        grid_size: 5,
        ..EvaluationConfig::default()
    };
    let report = run_variants(&d.y, Some(&d.x), &[Variant::B], &config).unwrap();
    let outcome = report.outcome(Variant::B).unwrap();
    let loaded = VarxModel::from_json(&outcome.model.to_json(serde_json::Value::Null).unwrap()).unwrap();
    let (dy, _) = seasonal_difference(&d.y, 52).unwrap();
    let (dx, _) = seasonal_difference(&d.x, 52).unwrap();
    let xb = select_exogenous(&dx, Variant::B).unwrap().unwrap();
    let again = rolling_test_forecast(&loaded, &dy, Some(&xb), outcome.predicted.index()).unwrap();
    assert_eq!(again, outcome.predicted);
}
