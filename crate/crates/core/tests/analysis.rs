use std::f64::consts::PI;

use nvtrap::analysis::{
    distribution_stats, extract_ratios, fit_lorentzian, lof_filter, lof_scores, standardize, welch,
    AnalysisConfig, LofConfig, WelchConfig,
};
use nvtrap::brownian::{
    drag_coefficient, simulate_stationary, simulate_trace, AnomalyStep, FluidEnvironment,
    Integrator, SimulationConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};

const RADIUS: f64 = 75e-9;

fn kappa_for(f_c: f64) -> f64 {
    2.0 * PI * drag_coefficient(RADIUS, &FluidEnvironment::default()).unwrap() * f_c
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sample_variance(x: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_integrates_to_the_variance(seed in any::<u64>(), segments in 30usize..62, memory in 0.0f64..0.9, scale in 1e-9f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = segments * 16384;
        let mut x = Vec::with_capacity(n);
        let mut state = 0.0;
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            state = memory * state + z;
            x.push(scale * state);
        }
        let psd = welch(&x, 1e-5, &WelchConfig::default()).unwrap();
        let var = sample_variance(&x);
        prop_assert!((psd.total_power() / var - 1.0).abs() < 0.01, "{} vs {}", psd.total_power(), var);
    }

    #[test]
    fn lof_is_invariant_under_axis_scaling(seed in any::<u64>(), sx in 1e-6f64..1e6, sy in 1e-6f64..1e6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<[f64; 2]> = (0..60).map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect();
        let scaled: Vec<[f64; 2]> = points.iter().map(|p| [p[0] * sx + 3.0, p[1] * sy - 7.0]).collect();
        let a = lof_scores(&standardize(&points), 6).unwrap();
        let b = lof_scores(&standardize(&scaled), 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6 * x.abs().max(1.0));
        }
    }

    #[test]
    fn statistics_ignore_sample_order(values in prop::collection::vec(-1e3f64..1e3, 3..200), seed in any::<u64>()) {
        let mut shuffled = values.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let (a, b) = (distribution_stats(&values).unwrap(), distribution_stats(&shuffled).unwrap());
        prop_assert!((a.mean - b.mean).abs() <= 1e-9 * a.mean.abs().max(1.0));
        if a.skewness.is_finite() {
            prop_assert!((a.skewness - b.skewness).abs() <= 1e-6 * a.skewness.abs().max(1.0));
        }
    }
}

#[test]
fn median_fit_is_unbiased() {
    let env = FluidEnvironment::default();
    let config = SimulationConfig {
        integrator: Integrator::ExactOu,
        ..SimulationConfig::default()
    };
    for truth in [100.0, 400.0, 1000.0] {
        let fits: Vec<f64> = (0..50)
            .map(|seed| {
                let x = simulate_stationary(
                    kappa_for(truth),
                    1_000_000,
                    RADIUS,
                    &env,
                    &config,
                    1000 + seed,
                )
                .unwrap();
                fit_lorentzian(&welch(&x, config.dt, &WelchConfig::default()).unwrap())
                    .unwrap()
                    .f_c
            })
            .collect();
        let m = median(fits);
        assert!(((m - truth) / truth).abs() < 0.02, "{truth} Hz: median {m}");
    }
}

#[test]
fn exponential_sample_has_skewness_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let exp = Exp::new(1.0).unwrap();
    let x: Vec<f64> = (0..100_000).map(|_| rng.sample(exp)).collect();
    let stats = distribution_stats(&x).unwrap();
    assert!(
        (stats.skewness / 2.0 - 1.0).abs() < 0.05,
        "{}",
        stats.skewness
    );
}

#[test]
fn ratios_recovered_from_simulated_acquisition() {
    let env = FluidEnvironment::default();
    let (k660, kb, kref, kr) = (
        kappa_for(200.0),
        kappa_for(150.0),
        kappa_for(200.0),
        kappa_for(250.0),
    );
    let config = SimulationConfig {
        integrator: Integrator::ExactOu,
        ..SimulationConfig::default()
    };
    let mut blue = Vec::new();
    let mut red = Vec::new();
    for seed in 0..8 {
        let acq = simulate_trace(
            [k660, k660 + kb, k660 + kref, k660 + kr, k660],
            RADIUS,
            &env,
            &config,
            seed,
        )
        .unwrap();
        let sample = extract_ratios(&acq, &AnalysisConfig::default()).unwrap();
        assert!(sample.accepted());
        blue.push(sample.r_blue);
        red.push(sample.r_red);
    }
    let (mb, mr) = (median(blue), median(red));
    assert!((mb / (kb / kref) - 1.0).abs() < 0.07, "{mb}");
    assert!((mr / (kr / kref) - 1.0).abs() < 0.07, "{mr}");
}

#[test]
fn ten_percent_rule_flags_stiffness_steps() {
    let env = FluidEnvironment::default();
    let k660 = kappa_for(200.0);
    let kappas = [
        k660,
        k660 + kappa_for(150.0),
        k660 + kappa_for(200.0),
        k660 + kappa_for(250.0),
        k660,
    ];
    for (factor, rejected) in [(1.0, false), (1.3, true), (1.5, true)] {
        let config = SimulationConfig {
            integrator: Integrator::ExactOu,
            anomaly: (factor > 1.0).then_some(AnomalyStep { time: 25.0, factor }),
            ..SimulationConfig::default()
        };
        let acq = simulate_trace(kappas, RADIUS, &env, &config, 42).unwrap();
        let sample = extract_ratios(&acq, &AnalysisConfig::default()).unwrap();
        assert_eq!(!sample.accepted(), rejected, "factor {factor}: {sample:?}");
    }
}

#[test]
fn planted_outliers_are_removed() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut points: Vec<[f64; 2]> = (0..300)
        .map(|_| {
            [
                1.0 + 0.05 * rng.sample::<f64, _>(StandardNormal),
                0.9 + 0.05 * rng.sample::<f64, _>(StandardNormal),
            ]
        })
        .collect();
    let clean = points.len();
    for i in 0..5 {
        let p = points[i * 37];
        points.push([p[0] * 100.0, p[1] * 100.0]);
    }
    let result = lof_filter(&points, &LofConfig::default()).unwrap();
    assert!(result.keep[clean..].iter().all(|k| !k));
    assert!(result.keep[..clean].iter().filter(|k| !**k).count() <= clean / 100);
}
