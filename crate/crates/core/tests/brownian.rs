use std::f64::consts::PI;

use nvtrap::analysis::{fit_lorentzian, welch, WelchConfig};
use nvtrap::brownian::{
    corner_frequency_truth, drag_coefficient, equipartition_spread, simulate_stationary,
    simulate_trace, FluidEnvironment, Integrator, RestoringConvention, SimulationConfig,
};

const RADIUS: f64 = 75e-9;

fn kappa_for(f_c: f64) -> f64 {
    2.0 * PI * drag_coefficient(RADIUS, &FluidEnvironment::default()).unwrap() * f_c
}

fn variance(x: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

#[test]
fn stationary_variance_matches_ornstein_uhlenbeck() {
    let env = FluidEnvironment::default();
    let kappa = kappa_for(400.0);
    for (convention, integrator) in [
        (RestoringConvention::Kappa, Integrator::EulerMaruyama),
        (RestoringConvention::TwiceKappa, Integrator::ExactOu),
    ] {
        let config = SimulationConfig {
            convention,
            integrator,
            ..SimulationConfig::default()
        };
        let x = simulate_stationary(kappa, 1_000_000, RADIUS, &env, &config, 3).unwrap();
        let expected = equipartition_spread(kappa, &env, convention).powi(2);
        let measured = variance(&x);
        assert!(
            ((measured - expected) / expected).abs() < 0.03,
            "{convention:?}: {measured:e} vs {expected:e}"
        );
    }
}

#[test]
fn autocorrelation_time_matches_drag_over_restoring_constant() {
    let env = FluidEnvironment::default();
    let beta = drag_coefficient(RADIUS, &env).unwrap();
    let kappa = kappa_for(400.0);
    let config = SimulationConfig::default();
    let x = simulate_stationary(kappa, 1_000_000, RADIUS, &env, &config, 4).unwrap();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let lag = 10;
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let c_lag: f64 = x
        .windows(lag + 1)
        .map(|w| (w[0] - mean) * (w[lag] - mean))
        .sum();
    let tau = -(lag as f64) * config.dt / (c_lag / c0).ln();
    let expected = beta / RestoringConvention::Kappa.restoring_constant(kappa);
    assert!(
        ((tau - expected) / expected).abs() < 0.05,
        "{tau:e} vs {expected:e}"
    );
}

#[test]
fn clean_trace_passes_the_stationarity_check() {
    let env = FluidEnvironment::default();
    let k660 = kappa_for(200.0);
    let kappas = [
        k660,
        k660 + kappa_for(180.0),
        k660 + kappa_for(200.0),
        k660 + kappa_for(220.0),
        k660,
    ];
    let acq = simulate_trace(kappas, RADIUS, &env, &SimulationConfig::default(), 5).unwrap();
    assert_eq!(acq.segments.len(), 5);
    assert_eq!(acq.samples.len(), 5 * 1_000_000);
    let first = variance(acq.segment_samples(0));
    let last = variance(acq.segment_samples(4));
    assert!(
        ((last - first) / first).abs() < 0.10,
        "{first:e} vs {last:e}"
    );
    let middle = variance(acq.segment_samples(2));
    assert!(middle < first);
}

#[test]
fn fitted_corner_frequency_tracks_truth() {
    let env = FluidEnvironment::default();
    let beta = drag_coefficient(RADIUS, &env).unwrap();
    let kappa = kappa_for(400.0);
    let truth = corner_frequency_truth(kappa, beta);
    let config = SimulationConfig::default();
    let fits: Vec<f64> = (0..50)
        .map(|seed| {
            let x =
                simulate_stationary(kappa, 1_000_000, RADIUS, &env, &config, 100 + seed).unwrap();
            fit_lorentzian(&welch(&x, config.dt, &WelchConfig::default()).unwrap())
                .unwrap()
                .f_c
        })
        .collect();
    let mean = fits.iter().sum::<f64>() / fits.len() as f64;
    assert!(((mean - truth) / truth).abs() < 0.05, "{mean} vs {truth}");
}

#[test]
fn exact_and_euler_updates_agree_at_small_steps() {
    let env = FluidEnvironment::default();
    let kappa = kappa_for(100.0);
    let var = |integrator| {
        let config = SimulationConfig {
            integrator,
            ..SimulationConfig::default()
        };
        variance(&simulate_stationary(kappa, 1_000_000, RADIUS, &env, &config, 9).unwrap())
    };
    let (em, exact) = (var(Integrator::EulerMaruyama), var(Integrator::ExactOu));
    assert!(((em - exact) / exact).abs() < 0.03);
}
