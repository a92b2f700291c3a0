mod common;

use common::{
    max_difference, propagate_to_steady, random_physical_drive, random_unit_drive,
    two_level_sigma_plus_re,
};
use nvtrap::collective::{
    build_liouvillian, coarse_grain, domain_drive, domain_stiffness, exact_stiffness,
    extrapolate_stiffness, mean_occupied_domain_size, smallest_singular_values, steady_state,
    steady_state_dense, CollectiveConfig, CollectiveDomain, DomainDrive, Nanodiamond,
    SteadyStateChecks, StiffnessTable, TableSpec, DEFAULT_DOMAIN_CAP,
};
use nvtrap::quantum::{bloch_steady_state, rabi_frequency, zpl_dipole_moment, NvPhotophysics};
use nvtrap::trap::{independent_quantum_stiffness, BeamConfig};
use nvtrap::units;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_level_phys() -> NvPhotophysics {
    let d = NvPhotophysics::default();
    NvPhotophysics::from_total_rate(
        d.gamma_total(),
        1.0,
        d.gamma_ph,
        d.gamma_c,
        d.omega0,
        d.n_host,
    )
    .unwrap()
}

/// Center Rabi frequency of the default beam at `wavelength_nm`.
fn beam_rabi(phys: &NvPhotophysics, wavelength_nm: f64) -> (f64, f64, f64) {
    let beam = BeamConfig::default().with_wavelength(units::nm(wavelength_nm));
    let field = beam.drive_field();
    (
        field.omega,
        rabi_frequency(zpl_dipole_moment(phys), &field),
        field.w0,
    )
}

#[test]
fn null_space_state_matches_time_propagation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=10 {
        for _ in 0..10 {
            let drive = random_unit_drive(&mut rng);
            let l = build_liouvillian(n, drive, DEFAULT_DOMAIN_CAP).unwrap();
            let ss = steady_state(&l, &SteadyStateChecks::default()).unwrap();
            let propagated = propagate_to_steady(&l);
            let diff = max_difference(&ss.rho, &propagated);
            assert!(diff < 1e-8, "n = {n}, {drive:?}: {diff:e}");
        }
    }
}

#[test]
fn banded_and_dense_solvers_agree() {
    let phys = NvPhotophysics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in [3, 9, 20] {
        let drive = random_physical_drive(&mut rng, &phys);
        let l = build_liouvillian(n, drive, DEFAULT_DOMAIN_CAP).unwrap();
        let banded = steady_state(&l, &SteadyStateChecks::default()).unwrap();
        let dense = steady_state_dense(&l, &SteadyStateChecks::default()).unwrap();
        assert!(max_difference(&banded.rho, &dense.rho) < 1e-9);
    }
}

#[test]
fn single_spin_matches_two_level_solution() {
    let phys = two_level_phys();
    let config = CollectiveConfig::default();
    let gamma = phys.gamma_transverse();
    for (detune, s) in [(-3.0, 0.5), (-0.4, 4.0), (0.7, 9.0), (2.5, 0.01)] {
        let delta = detune * gamma;
        let rabi = (s * phys.gamma_total() * gamma * (1.0 + detune * detune)).sqrt();
        let drive = domain_drive(&phys, delta, rabi, &config);
        let l = build_liouvillian(1, drive, DEFAULT_DOMAIN_CAP).unwrap();
        let sigma = steady_state(&l, &config.checks)
            .unwrap()
            .sigma_plus_expect
            .re;

        let closed_form = two_level_sigma_plus_re(delta, rabi, phys.gamma_total(), phys.gamma_c);
        assert!(
            (sigma - closed_form).abs() <= 1e-10 * closed_form.abs(),
            "{sigma} vs {closed_form}"
        );

        let bloch = bloch_steady_state(&phys, phys.omega0 + delta, rabi).unwrap();
        assert!((sigma + bloch.coherence.re).abs() <= 1e-10 * sigma.abs());
    }
}

#[test]
fn single_spin_stiffness_matches_independent_emitter() {
    let phys = two_level_phys();
    let config = CollectiveConfig::default();
    for wavelength in [631.0, 637.5, 639.5, 646.0] {
        let beam = BeamConfig::default().with_wavelength(units::nm(wavelength));
        let nd = Nanodiamond {
            radius: 75e-9,
            n_nv: 1,
            zpl_center: phys.omega0,
            zpl_sigma: 0.0,
        };
        let independent = independent_quantum_stiffness(&nd, &phys, &beam);
        let domain = CollectiveDomain {
            index: 0,
            omega_i: phys.omega0,
            n_coop: 1.0,
        };
        let collective = domain_stiffness(&domain, &phys, &beam.drive_field(), &config).unwrap();
        assert!(
            ((collective - independent) / independent).abs() < 1e-8,
            "{wavelength} nm: {collective} vs {independent}"
        );
    }
}

#[test]
fn kernel_is_one_dimensional() {
    let phys = NvPhotophysics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in [1, 2, 5, 10, 20, 40] {
        for _ in 0..20 {
            let drive = random_physical_drive(&mut rng, &phys);
            let l = build_liouvillian(n, drive, DEFAULT_DOMAIN_CAP).unwrap();
            let (s1, s2) = smallest_singular_values(&l).unwrap();
            assert!(s1 / s2 < 1e-6, "n = {n}: {s1:e} / {s2:e}");
        }
    }
}

#[test]
fn steady_states_are_physical_density_operators() {
    let phys = NvPhotophysics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for draw in 0..200 {
        let n = 1 + draw % 40;
        let drive = random_physical_drive(&mut rng, &phys);
        let l = build_liouvillian(n, drive, DEFAULT_DOMAIN_CAP).unwrap();
        let ss = steady_state(&l, &SteadyStateChecks::default()).unwrap();
        assert!(ss.hermiticity_error() < 1e-10);
        assert!(ss.min_eigenvalue() > -1e-9);
        assert!(ss.populations.iter().all(|&p| p > -1e-10));
        assert!((ss.populations.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn domain_stiffness_is_odd_in_detuning() {
    let phys = NvPhotophysics::default();
    let config = CollectiveConfig::default();
    let (_, rabi, w0) = beam_rabi(&phys, 639.13);
    for n in [2, 10, 40] {
        for detune in [0.3, 1.7, 4.0] {
            let delta = detune * phys.gamma_transverse();
            let red = exact_stiffness(n, domain_drive(&phys, -delta, rabi, &config), w0, &config)
                .unwrap();
            let blue =
                exact_stiffness(n, domain_drive(&phys, delta, rabi, &config), w0, &config).unwrap();
            assert!(red > 0.0);
            assert!(
                (red + blue).abs() <= 1e-8 * red.abs(),
                "n = {n}: {red} vs {blue}"
            );
        }
    }
}

#[test]
fn extrapolation_is_continuous_with_exact_range() {
    let phys = NvPhotophysics::default();
    let config = CollectiveConfig::default();
    let (omega, rabi, w0) = beam_rabi(&phys, 637.0);
    let drive = domain_drive(&phys, omega - phys.omega0, rabi, &config);
    let exact = |n: usize| exact_stiffness(n, drive, w0, &config).unwrap();
    let samples: Vec<(f64, f64)> = config
        .fit_grid()
        .iter()
        .map(|&n| (n as f64, exact(n)))
        .collect();

    let below: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.0 < 80.0).collect();
    let at_edge = extrapolate_stiffness(&below, 80.0, &config).unwrap();
    assert!(((at_edge - exact(80)) / exact(80)).abs() < 0.02);

    for n in [100, 140] {
        let continued = extrapolate_stiffness(&samples, n as f64, &config).unwrap();
        let truth = exact(n);
        assert!(
            ((continued - truth) / truth).abs() < 0.02,
            "n = {n}: {continued} vs {truth}"
        );
    }

    let domain = |n: f64| CollectiveDomain {
        index: 0,
        omega_i: phys.omega0,
        n_coop: n,
    };
    let field = BeamConfig::default()
        .with_wavelength(units::nm(637.0))
        .drive_field();
    let k = |n: f64| domain_stiffness(&domain(n), &phys, &field, &config).unwrap();
    let inner_step = k(80.0) - k(79.0);
    let outer_step = k(81.0) - k(80.0);
    assert!(
        ((outer_step - inner_step) / inner_step).abs() < 0.05,
        "{inner_step} vs {outer_step}"
    );
}

#[test]
fn table_reproduces_exact_solves() {
    let phys = NvPhotophysics::default();
    let config = CollectiveConfig {
        n_exact: 16,
        sample_grid: vec![1, 2, 4, 8, 12, 16],
        fit_min_n: 2,
        ..CollectiveConfig::default()
    };
    let (_, rabi, _) = beam_rabi(&phys, 639.13);
    let gamma = phys.gamma_transverse();
    let spec = TableSpec {
        n_grid: vec![1, 2, 3, 4, 6, 8, 12, 16],
        detuning_max: 6.0 * gamma,
        asinh_step: 0.1,
        rabi_min: 0.8 * rabi,
        rabi_max: 1.2 * rabi,
        rabi_nodes: 3,
    };
    let table = StiffnessTable::build(&phys, &spec, &config).unwrap();
    for n in [1, 3, 5, 7, 10, 14] {
        for detune in [-4.3, -0.77, 0.21, 2.9] {
            for r in [0.85, 1.0, 1.13] {
                let drive = DomainDrive {
                    detuning: detune * gamma,
                    ..domain_drive(&phys, 0.0, r * rabi, &config)
                };
                let l = build_liouvillian(n, drive, DEFAULT_DOMAIN_CAP).unwrap();
                let exact = steady_state(&l, &config.checks)
                    .unwrap()
                    .sigma_plus_expect
                    .re;
                let approx = table.sigma_plus_re(n, drive.detuning, drive.rabi).unwrap();
                assert!(
                    ((approx - exact) / exact).abs() < 5e-3,
                    "n = {n}, Δ/γ = {detune}, Ω ratio {r}: {approx} vs {exact}"
                );
            }
        }
    }
}

#[test]
fn default_crystal_has_domains_of_about_ninety_five() {
    let phys = NvPhotophysics::default();
    let nd = Nanodiamond {
        radius: 75e-9,
        n_nv: 9500,
        zpl_center: phys.omega0,
        zpl_sigma: units::wavelength_width_to_angular(units::nm(1.82), units::nm(639.08)),
    };
    let domains = coarse_grain(&nd, units::angular(100.0 * units::GHZ)).unwrap();
    let mean = mean_occupied_domain_size(&domains);
    assert!((mean - 95.0).abs() <= 10.0, "{mean}");
}
