#![allow(dead_code)]

use nalgebra::DVector;
use num_complex::Complex64;
use nvtrap::collective::{DomainDrive, Liouvillian};
use nvtrap::quantum::NvPhotophysics;
use rand::Rng;

/// Density vector reached from the collective ground state after long-time
/// propagation with exp(A·t), by repeated squaring of a short-time
/// propagator until the state stops moving.
pub fn propagate_to_steady(l: &Liouvillian) -> Vec<Complex64> {
    let a = l.to_dense();
    let d = l.n() + 1;
    let norm = a.iter().map(|v| v.norm()).fold(0.0, f64::max) * a.nrows() as f64;
    let mut step = (a / Complex64::new(norm, 0.0)).exp();
    let mut rho = DVector::<Complex64>::zeros(step.nrows());
    rho[0] = Complex64::new(1.0, 0.0);
    // Round-off leaves the stationary eigenvalue at 1 − O(ε); dividing by the
    // trace keeps repeated squaring from draining it.
    let unit_trace = |v: DVector<Complex64>| {
        let trace: Complex64 = (0..d).map(|k| v[k * d + k]).sum();
        v / trace
    };
    let mut previous = unit_trace(&step * &rho);
    for _ in 0..80 {
        step = &step * &step;
        let next = unit_trace(&step * &rho);
        let moved = (&next - &previous)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        previous = next;
        if moved < 1e-14 {
            break;
        }
    }
    previous.iter().copied().collect()
}

pub fn max_difference(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Random drive in units of the default single-emitter rates: |Δ| ≤ 5γ,
/// saturation up to 10.
pub fn random_physical_drive<R: Rng>(rng: &mut R, phys: &NvPhotophysics) -> DomainDrive {
    let gamma_bare = phys.gamma_total();
    let gamma = phys.gamma_transverse();
    let detuning = gamma * rng.random_range(-5.0..5.0);
    let s: f64 = rng.random_range(0.01..10.0);
    DomainDrive {
        detuning,
        rabi: (s * gamma_bare * gamma * (1.0 + (detuning / gamma).powi(2))).sqrt(),
        gamma_bare,
        gamma_collective: 2.0 * phys.gamma_c,
    }
}

/// Random drive with all rates of order one, where the dynamics are not
/// stiff and long-time propagation is cheap.
pub fn random_unit_drive<R: Rng>(rng: &mut R) -> DomainDrive {
    DomainDrive {
        detuning: rng.random_range(-5.0..5.0),
        rabi: rng.random_range(0.05..5.0),
        gamma_bare: rng.random_range(0.2..2.0),
        gamma_collective: rng.random_range(0.0..2.0),
    }
}

/// Re⟨σ⁺⟩ of a driven two-level emitter with decay Γ and coherence decay
/// γ = Γ/2 + γ_c, from the closed-form optical Bloch solution.
pub fn two_level_sigma_plus_re(detuning: f64, rabi: f64, gamma_bare: f64, gamma_c: f64) -> f64 {
    let gamma = gamma_bare / 2.0 + gamma_c;
    let lorentz = gamma * gamma + detuning * detuning;
    let a = rabi * rabi * gamma / (2.0 * gamma_bare * lorentz);
    -(rabi / 2.0) * detuning / lorentz / (1.0 + 2.0 * a)
}
