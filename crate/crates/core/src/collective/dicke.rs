//! Collective spin operators in the maximal-J Dicke basis and the vectorised
//! Liouvillian of a driven, decaying, collectively dephased sub-domain.
//!
//! Basis ordering: index `k` is |J, M = k − J⟩, so index 0 is the collective
//! ground state |J, −J⟩. Density operators are vectorised by stacking rows,
//! ρ[r][c] ↦ ρ⃗[r·(n+1) + c], which gives vec(XρY) = (X ⊗ Yᵀ)·ρ⃗.

use num_complex::Complex64;

use crate::linalg::BandedMatrix;
use crate::{Error, Result};

/// Largest domain the exact solver accepts unless configured otherwise.
pub const DEFAULT_DOMAIN_CAP: usize = 400;

/// Sparse (n+1)×(n+1) operator as (row, col, value) triplets.
#[derive(Clone, Debug, Default)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseOp {
    fn identity(dim: usize) -> Self {
        Self {
            dim,
            entries: (0..dim).map(|i| (i, i, 1.0)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, j, v)| (j, i, v)).collect(),
        }
    }

    pub fn matmul(&self, other: &SparseOp) -> SparseOp {
        let mut dense = vec![0.0; self.dim * self.dim];
        for &(i, k, a) in &self.entries {
            for &(k2, j, b) in &other.entries {
                if k == k2 {
                    dense[i * self.dim + j] += a * b;
                }
            }
        }
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(idx, &v)| (idx / self.dim, idx % self.dim, v))
            .collect();
        SparseOp {
            dim: self.dim,
            entries,
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }
}

/// Collective operators S^z, S^+ and S^- for `n` spins with J = n/2.
#[derive(Clone, Debug)]
pub struct DickeOperators {
    pub n: usize,
    pub sz: SparseOp,
    pub sp: SparseOp,
    pub sm: SparseOp,
}

impl DickeOperators {
    pub fn new(n: usize) -> Self {
        let dim = n + 1;
        let j = n as f64 / 2.0;
        let m = |k: usize| k as f64 - j;
        let sz = SparseOp {
            dim,
            entries: (0..dim)
                .filter(|&k| m(k) != 0.0)
                .map(|k| (k, k, m(k)))
                .collect(),
        };
        // S⁺|J,M⟩ = √(J(J+1) − M(M+1)) |J,M+1⟩
        let sp = SparseOp {
            dim,
            entries: (0..n)
                .map(|k| (k + 1, k, (j * (j + 1.0) - m(k) * (m(k) + 1.0)).sqrt()))
                .collect(),
        };
        let sm = sp.transpose();
        Self { n, sz, sp, sm }
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }
}

/// Parameters of one driven sub-domain; all rates angular.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainDrive {
    /// ω − ω_i.
    pub detuning: f64,
    pub rabi: f64,
    /// Single-spin decay rate feeding the collective S⁻ channel.
    pub gamma_bare: f64,
    /// Rate of the collective S^z dephasing channel.
    pub gamma_collective: f64,
}

/// Vectorised Liouvillian A with dρ⃗/dt = A·ρ⃗, stored on its band.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    n: usize,
    drive: DomainDrive,
    matrix: BandedMatrix,
}

impl Liouvillian {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn drive(&self) -> DomainDrive {
        self.drive
    }

    pub fn dim(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn matrix(&self) -> &BandedMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> BandedMatrix {
        self.matrix
    }

    pub fn apply(&self, rho: &[Complex64]) -> Vec<Complex64> {
        self.matrix.mul_vec(rho)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        self.matrix.to_dense()
    }
}

/// Accumulates `coeff · (a ⊗ b)` into the banded superoperator.
fn add_kron(target: &mut BandedMatrix, coeff: Complex64, a: &SparseOp, b: &SparseOp) {
    let d = b.dim;
    for &(i, j, av) in &a.entries {
        for &(k, l, bv) in &b.entries {
            target.add(i * d + k, j * d + l, coeff * (av * bv));
        }
    }
}

/// Builds
///
/// A = iΔ(S^z⊗1 − 1⊗S^z) + i(Ω/2)((S⁻+S⁺)⊗1 − 1⊗(S⁻+S⁺))
///     − (Γ/2)(S⁺S⁻⊗1 + 1⊗S⁺S⁻ − 2S⁻⊗S⁻)
///     − (γ_c/2)((S^z)²⊗1 + 1⊗(S^z)² − 2S^z⊗S^z)
///
/// for `n` spins. With row stacking this generates
/// dρ/dt = −i[H, ρ] + Γ·D[S⁻]ρ + γ_c·D[S^z]ρ for H = −ΔS^z − (Ω/2)(S⁺ + S⁻).
/// The sign of the drive term only fixes the phase convention of ⟨S⁺⟩; see
/// [`super::domain_stiffness`].
pub fn build_liouvillian(n: usize, drive: DomainDrive, cap: usize) -> Result<Liouvillian> {
    if n == 0 {
        return Err(Error::invalid(
            "n",
            "a Dicke domain needs at least one spin",
        ));
    }
    if n > cap {
        return Err(Error::DomainTooLarge { n, cap });
    }
    for (name, v) in [
        ("gamma_bare", drive.gamma_bare),
        ("gamma_collective", drive.gamma_collective),
        ("rabi", drive.rabi),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(
                name,
                "rates must be finite and non-negative",
            ));
        }
    }
    if !drive.detuning.is_finite() {
        return Err(Error::invalid("detuning", "must be finite"));
    }

    let ops = DickeOperators::new(n);
    let dim = ops.dim();
    let id = SparseOp::identity(dim);
    // Operators enter as X ⊗ 1 and 1 ⊗ Xᵀ; every collective operator here is
    // real, and Sᶻ, S⁺S⁻ and S⁺ + S⁻ are symmetric.
    let sx2 = SparseOp {
        dim,
        entries: ops
            .sp
            .entries
            .iter()
            .chain(&ops.sm.entries)
            .copied()
            .collect(),
    };
    let spsm = ops.sp.matmul(&ops.sm);
    let sz2 = ops.sz.matmul(&ops.sz);

    let band = dim + 1;
    let mut a = BandedMatrix::zeros(dim * dim, band, band);
    let i = Complex64::new(0.0, 1.0);
    let re = |v: f64| Complex64::new(v, 0.0);

    let coh = i * drive.detuning;
    add_kron(&mut a, coh, &ops.sz, &id);
    add_kron(&mut a, -coh, &id, &ops.sz.transpose());

    let rabi = i * (drive.rabi / 2.0);
    add_kron(&mut a, rabi, &sx2, &id);
    add_kron(&mut a, -rabi, &id, &sx2.transpose());

    let g = drive.gamma_bare / 2.0;
    add_kron(&mut a, re(-g), &spsm, &id);
    add_kron(&mut a, re(-g), &id, &spsm.transpose());
    // S⁻ ρ S⁺ ↦ S⁻ ⊗ (S⁺)ᵀ = S⁻ ⊗ S⁻
    add_kron(&mut a, re(2.0 * g), &ops.sm, &ops.sp.transpose());

    let c = drive.gamma_collective / 2.0;
    add_kron(&mut a, re(-c), &sz2, &id);
    add_kron(&mut a, re(-c), &id, &sz2.transpose());
    add_kron(&mut a, re(2.0 * c), &ops.sz, &ops.sz.transpose());

    Ok(Liouvillian {
        n,
        drive,
        matrix: a,
    })
}
