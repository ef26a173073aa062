use importcast::disaggregate::{annual_to_quarterly, Method};
use importcast::ingest::{parse_annual_csv, write_annual_csv, AnnualSeries};
use importcast::scaling::ScalerParams;
use importcast::training::{train, TrainConfig};
use importcast::windowing::{make_windows, train_point_count};
use proptest::prelude::*;

fn annual_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![Just(0.0), 0.0..1e3, 1e9..1e13],
        2..40,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn quarterly_means_reproduce_annual(values in annual_values()) {
        let series = AnnualSeries::new("TST", 1970, values.clone()).unwrap();
        for method in [Method::Smooth, Method::Flat] {
            let q = annual_to_quarterly(&series, method).unwrap();
            prop_assert_eq!(q.len(), 4 * values.len());
            for (year, (mean, a)) in q.year_means().iter().zip(&values).enumerate() {
                prop_assert!((mean - a).abs() <= 1e-9 * a.abs().max(1.0), "{method:?} year {year}: {mean} vs {a}");
            }
            let peak = values.iter().cloned().fold(0.0, f64::max);
            prop_assert!(q.values.iter().all(|&v| v >= 0.0 && v <= 2.0 * peak + 1e-9));
        }
    }

    #[test]
    fn ingest_ignores_row_order(values in prop::collection::vec(1.0..1e12f64, 1..20), rotate in 0usize..40) {
        let a = AnnualSeries::new("AAA", 1990, values.clone()).unwrap();
        let b = AnnualSeries::new("BBB", 2000, values.iter().rev().cloned().collect()).unwrap();
        let text = write_annual_csv(&[a.clone(), b.clone()]);
        let mut lines: Vec<&str> = text.lines().skip(1).collect();
        let k = rotate % lines.len();
        lines.rotate_left(k);
        lines.reverse();
        let shuffled = format!("country,year,value\n{}\n", lines.join("\n"));
        prop_assert_eq!(parse_annual_csv(&shuffled).unwrap(), vec![a, b]);
    }

    #[test]
    fn train_split_scaling_uses_train_points_only(values in prop::collection::vec(1.0..1e6f64, 12..60), lookback in 1usize..5) {
        let count = train_point_count(values.len(), lookback);
        let scaler = ScalerParams::fit(&values[..count]);
        prop_assume!(scaler.is_ok());
        let scaler = scaler.unwrap();
        let normalized = scaler.transform_all(&values);
        let ds = make_windows(&normalized, lookback).unwrap();
        let train = ds.train();
        for (w, t) in train.inputs.iter().zip(train.targets) {
            prop_assert!(w.iter().chain([t]).all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        }
    }
}

#[test]
fn ingest_round_trip_is_exact() {
    let series = vec![
        AnnualSeries::new("IRN", 1970, vec![1.5e9, 2.25e9, 0.0, 3.0000000000000004e9]).unwrap(),
        AnnualSeries::new("USA", 1970, vec![6.0e10, 1e-300, 7.123456789012345e11, 1.0]).unwrap(),
    ];
    assert_eq!(parse_annual_csv(&write_annual_csv(&series)).unwrap(), series);
}

fn sine_dataset() -> importcast::windowing::WindowedDataset {
    let series: Vec<f64> = (0..80).map(|i| 0.5 + 0.4 * (i as f64 * 0.3).sin()).collect();
    make_windows(&series, 4).unwrap()
}

#[test]
fn training_is_deterministic() {
    let config = TrainConfig {
        hidden_sizes: vec![5, 5],
        epochs: 15,
        ..TrainConfig::default()
    };
    let ds = sine_dataset();
    let a = train(&ds, &config).unwrap();
    let b = train(&ds, &config).unwrap();
    assert_eq!(a, b);
    let other = train(&ds, &TrainConfig { seed: 43, ..config }).unwrap();
    assert_ne!(a.best_params, other.best_params);
}

#[test]
fn constant_target_improves_quickly() {
    let ds = make_windows(&[0.6; 60], 4).unwrap();
    let config = TrainConfig {
        hidden_sizes: vec![4],
        epochs: 10,
        ..TrainConfig::default()
    };
    let trace = train(&ds, &config).unwrap();
    assert!(trace.epochs[9].train_mse < trace.epochs[0].train_mse, "{:?}", trace.epochs);
}
