//! Steady states of vectorised Liouvillians.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::dicke::{DickeOperators, Liouvillian};
use crate::linalg::BandedMatrix;
use crate::{Error, Result};

/// Tolerances applied to every returned steady state.
#[derive(Clone, Copy, Debug)]
pub struct SteadyStateChecks {
    /// Relative residual |Aρ⃗| / |A| bound.
    pub residual: f64,
    /// Most negative eigenvalue tolerated in the reconstructed ρ.
    pub positivity: f64,
    /// Smallest pivot ratio of the pinned system before the kernel is deemed
    /// degenerate.
    pub pivot_ratio: f64,
    /// Whether to diagonalise ρ for the positivity check.
    pub check_positivity: bool,
}

impl Default for SteadyStateChecks {
    fn default() -> Self {
        Self {
            residual: 1e-9,
            positivity: 1e-9,
            pivot_ratio: 1e-14,
            check_positivity: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CollectiveSteadyState {
    pub n: usize,
    /// ⟨Σ⁺⟩ = Tr[S⁺ρ].
    pub sigma_plus_expect: Complex64,
    /// Diagonal of ρ over |J, M = −J..J⟩.
    pub populations: Vec<f64>,
    /// Row-stacked density operator.
    pub rho: Vec<Complex64>,
}

impl CollectiveSteadyState {
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.rho[r * d + c])
    }

    /// max |ρ − ρ†|.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                worst = worst.max((self.rho[r * d + c] - self.rho[c * d + r].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.density_matrix();
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Mean excitation number ⟨S^z⟩ + J.
    pub fn mean_excitations(&self) -> f64 {
        self.populations
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }
}

fn expectation_sigma_plus(n: usize, rho: &[Complex64]) -> Complex64 {
    // Tr[S⁺ρ] = Σ_k ⟨k+1|S⁺|k⟩ ρ[k][k+1]
    let ops = DickeOperators::new(n);
    let d = n + 1;
    ops.sp
        .entries
        .iter()
        .map(|&(row, col, v)| rho[col * d + row] * v)
        .sum()
}

fn finish(
    l: &Liouvillian,
    rho: Vec<Complex64>,
    checks: &SteadyStateChecks,
) -> Result<CollectiveSteadyState> {
    let n = l.n();
    let d = n + 1;
    let norm = l.matrix().norm();
    let residual = l
        .apply(&rho)
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let limit = checks.residual * norm;
    if !(residual <= limit) {
        return Err(Error::Residual { residual, limit });
    }
    let populations: Vec<f64> = (0..d).map(|k| rho[k * d + k].re).collect();
    let state = CollectiveSteadyState {
        n,
        sigma_plus_expect: expectation_sigma_plus(n, &rho),
        populations,
        rho,
    };
    if checks.check_positivity {
        let min_eigenvalue = state.min_eigenvalue();
        if min_eigenvalue < -checks.positivity {
            return Err(Error::Positivity { min_eigenvalue });
        }
    }
    Ok(state)
}

/// Unique trace-one element of ker A.
///
/// The population equation of |J,−J⟩ is linearly dependent on the others
/// (the generator is trace preserving), so it is replaced by the condition
/// ρ[0][0] = 1; the solution is then rescaled to unit trace. This is the
/// augmented system {Aρ⃗ = 0, Tr ρ = 1} with the trace row brought into a
/// form that keeps the band structure. The ground state population of a
/// decaying Dicke ladder is strictly positive, so the pinning is legitimate.
pub fn steady_state(l: &Liouvillian, checks: &SteadyStateChecks) -> Result<CollectiveSteadyState> {
    let dim = l.dim();
    let mut m: BandedMatrix = l.matrix().clone();
    let scale = m.max_abs();
    if scale > 0.0 {
        m.scale(1.0 / scale);
    }
    m.set_unit_row(0);
    let lu = m.factor()?;
    if lu.pivot_ratio() < checks.pivot_ratio {
        return Err(Error::NullSpace {
            ratio: lu.pivot_ratio(),
            limit: checks.pivot_ratio,
        });
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
    rhs[0] = Complex64::new(1.0, 0.0);
    let mut rho = lu.solve(&rhs);
    let d = l.n() + 1;
    let trace: Complex64 = (0..d).map(|k| rho[k * d + k]).sum();
    if !(trace.norm() > 0.0 && trace.norm().is_finite()) {
        return Err(Error::Singular { pivot: 0 });
    }
    for v in &mut rho {
        *v /= trace;
    }
    finish(l, rho, checks)
}

/// Dense reference path: replaces the first row of A by the trace functional
/// and solves with full-pivot-free dense LU. Only sensible for small domains.
pub fn steady_state_dense(
    l: &Liouvillian,
    checks: &SteadyStateChecks,
) -> Result<CollectiveSteadyState> {
    let dim = l.dim();
    let d = l.n() + 1;
    let mut a = l.to_dense();
    let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        a /= Complex64::new(scale, 0.0);
    }
    for col in 0..dim {
        a[(0, col)] = Complex64::new(0.0, 0.0);
    }
    for k in 0..d {
        a[(0, k * d + k)] = Complex64::new(1.0, 0.0);
    }
    let mut b = DVector::zeros(dim);
    b[0] = Complex64::new(1.0, 0.0);
    let x = a.lu().solve(&b).ok_or(Error::Singular { pivot: 0 })?;
    finish(l, x.iter().copied().collect(), checks)
}

/// The two smallest singular values (s₁ ≤ s₂) of A, from block inverse
/// iteration on AᴴA + μ with a Rayleigh–Ritz step on A itself.
///
/// A one-dimensional kernel shows up as s₁/s₂ ≪ 1.
pub fn smallest_singular_values(l: &Liouvillian) -> Result<(f64, f64)> {
    let mut a = l.matrix().clone();
    let scale = a.max_abs();
    a.scale(1.0 / scale);
    let dim = a.dim();
    let block = 3.min(dim);
    let mut gram = a.gram();
    gram.add_diagonal(1e-13);
    let lu = gram.factor()?;

    let mut basis: Vec<Vec<Complex64>> = (0..block)
        .map(|b| {
            (0..dim)
                .map(|i| {
                    let t = (i * (b + 3) + 7 * b + 1) as f64;
                    Complex64::new((t * 0.618).sin(), (t * 0.377).cos())
                })
                .collect()
        })
        .collect();
    let mut previous = (f64::NAN, f64::NAN);
    let mut values = (0.0, 0.0);
    for _ in 0..60 {
        for v in basis.iter_mut() {
            *v = lu.solve(v);
        }
        orthonormalise(&mut basis);
        // Rayleigh–Ritz on A restricted to the subspace: singular values of
        // A·V (dim × block).
        let columns: Vec<Vec<Complex64>> = basis.iter().map(|v| a.mul_vec(v)).collect();
        let av = DMatrix::from_fn(dim, block, |i, j| columns[j][i]);
        let qr = av.clone().qr();
        let r = qr.r();
        let svd = r.svd(false, true);
        let mut s: Vec<(f64, usize)> = svd
            .singular_values
            .iter()
            .copied()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        s.sort_by(|x, y| x.0.total_cmp(&y.0));
        values = (
            s[0].0 * scale,
            s.get(1).map_or(f64::INFINITY, |v| v.0) * scale,
        );
        // Rotate the basis onto the Ritz vectors.
        let vt = svd.v_t.expect("requested");
        let rotated: Vec<Vec<Complex64>> = s
            .iter()
            .map(|&(_, idx)| {
                (0..dim)
                    .map(|i| (0..block).map(|j| basis[j][i] * vt[(idx, j)].conj()).sum())
                    .collect()
            })
            .collect();
        basis = rotated;
        if (values.1 - previous.1).abs() <= 1e-10 * values.1 {
            break;
        }
        previous = values;
    }
    Ok(values)
}

fn orthonormalise(basis: &mut [Vec<Complex64>]) {
    for j in 0..basis.len() {
        for i in 0..j {
            let proj: Complex64 = basis[i]
                .iter()
                .zip(&basis[j])
                .map(|(a, b)| a.conj() * b)
                .sum();
            let (head, tail) = basis.split_at_mut(j);
            for (t, h) in tail[0].iter_mut().zip(&head[i]) {
                *t -= proj * h;
            }
        }
        let norm = basis[j].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for v in basis[j].iter_mut() {
            *v /= norm;
        }
    }
}
