//! Banded complex linear algebra.
//!
//! Vectorised Dicke Liouvillians are block-banded: with row stacking every
//! element ρ[r][c] only couples to ρ[r±1][c], ρ[r][c±1] and ρ[r+1][c+1], so a
//! matrix of dimension (n+1)² has bandwidth n+2. LU with partial pivoting on
//! the band costs O(D·b²) instead of O(D³), which is what makes n = 80
//! domains cheap.

use num_complex::Complex64;

use crate::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals.
///
/// Rows are stored contiguously. Row `i` holds columns
/// `i - kl ..= i + ku + kl`; the extra `kl` columns on the right absorb the
/// fill produced by row interchanges during factorisation.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![Complex64::new(0.0, 0.0); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[self.offset(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Adds `value` at (i, j). Panics if (i, j) lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: Complex64) {
        assert!(
            i < self.n && j < self.n && self.in_band(i, j),
            "entry ({i}, {j}) outside band (kl={}, ku={})",
            self.kl,
            self.ku
        );
        let k = self.offset(i, j);
        self.data[k] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        assert!(i < self.n && j < self.n && self.in_band(i, j));
        let k = self.offset(i, j);
        self.data[k] = value;
    }

    /// Replaces row `i` by the unit row e_iᵀ.
    pub fn set_unit_row(&mut self, i: usize) {
        let start = i * self.width;
        for v in &mut self.data[start..start + self.width] {
            *v = Complex64::new(0.0, 0.0);
        }
        self.set(i, i, Complex64::new(1.0, 0.0));
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.offset(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Aᴴ·x.
    pub fn adjoint_mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                y[j] += self.data[self.offset(i, j)].conj() * x[i];
            }
        }
        y
    }

    /// AᴴA as a banded matrix (bandwidth kl + ku on both sides).
    pub fn gram(&self) -> BandedMatrix {
        let b = self.kl + self.ku;
        let mut g = BandedMatrix::zeros(self.n, b, b);
        for k in 0..self.n {
            let lo = k.saturating_sub(self.kl);
            let hi = (k + self.ku).min(self.n - 1);
            for i in lo..=hi {
                let aki = self.data[self.offset(k, i)].conj();
                if aki == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in lo..=hi {
                    let akj = self.data[self.offset(k, j)];
                    let o = g.offset(i, j);
                    g.data[o] += aki * akj;
                }
            }
        }
        g
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        for i in 0..self.n {
            let o = self.offset(i, i);
            self.data[o] += shift;
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// LU factorisation with partial pivoting, consuming the matrix.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        let mut pivots = vec![0usize; n];
        let mut lower = vec![Complex64::new(0.0, 0.0); n * kl.max(1)];
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.offset(k, k)].norm();
            for i in k + 1..=last_row {
                let v = self.data[self.offset(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular { pivot: k });
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.offset(k, j);
                    let b = self.offset(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.offset(k, k)];
            let inv = pivot.inv();
            let row_k = k * w + kl;
            for i in k + 1..=last_row {
                let ik = self.offset(i, k);
                let factor = self.data[ik] * inv;
                lower[k * kl.max(1) + (i - k - 1)] = factor;
                self.data[ik] = Complex64::new(0.0, 0.0);
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let len = last_col - k;
                let row_i = i * w + (k + 1 + kl - i);
                let (src, dst) = if row_i > row_k {
                    let (a, b) = self.data.split_at_mut(row_i);
                    (&a[row_k + 1..row_k + 1 + len], &mut b[..len])
                } else {
                    unreachable!("band rows are stored in increasing order")
                };
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= factor * s;
                }
            }
        }
        Ok(BandedLu {
            u: self,
            lower,
            pivots,
            min_pivot,
            max_pivot,
        })
    }
}

/// Result of [`BandedMatrix::factor`].
#[derive(Clone, Debug)]
pub struct BandedLu {
    u: BandedMatrix,
    lower: Vec<Complex64>,
    pivots: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl BandedLu {
    /// Ratio of smallest to largest pivot magnitude; a cheap rank indicator.
    pub fn pivot_ratio(&self) -> f64 {
        self.min_pivot / self.max_pivot
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let (n, kl, ku) = (self.u.n, self.u.kl, self.u.ku);
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            let last_row = (k + kl).min(n - 1);
            for i in k + 1..=last_row {
                x[i] -= self.lower[k * kl.max(1) + (i - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + kl + ku).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=last_col {
                s -= self.u.data[self.u.offset(k, j)] * x[j];
            }
            x[k] = s / self.u.data[self.u.offset(k, k)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> BandedMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = BandedMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                m.add(
                    i,
                    j,
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                );
            }
        }
        m
    }

    #[test]
    fn solve_matches_dense_lu() {
        for (n, kl, ku, seed) in [(30, 3, 4, 1), (50, 7, 2, 2), (12, 0, 5, 3), (40, 6, 0, 4)] {
            let m = random_banded(n, kl, ku, seed);
            let dense = m.to_dense();
            let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
            let x = m.factor().unwrap().solve(&b);
            let r = &dense * nalgebra::DVector::from_vec(x) - nalgebra::DVector::from_vec(b);
            assert!(r.norm() < 1e-9, "residual {}", r.norm());
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut m = BandedMatrix::zeros(3, 1, 1);
        m.add(0, 1, Complex64::new(1.0, 0.0));
        m.add(1, 0, Complex64::new(1.0, 0.0));
        m.add(1, 2, Complex64::new(2.0, 0.0));
        m.add(2, 1, Complex64::new(3.0, 0.0));
        m.add(2, 2, Complex64::new(1.0, 0.0));
        let dense = m.to_dense();
        let b = vec![Complex64::new(1.0, 0.0); 3];
        let x = m.factor().unwrap().solve(&b);
        let r = &dense * nalgebra::DVector::from_vec(x) - nalgebra::DVector::from_vec(b);
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandedMatrix::zeros(4, 1, 1);
        assert!(matches!(m.factor(), Err(Error::Singular { pivot: 0 })));
    }

    #[test]
    fn gram_and_products_match_dense() {
        let m = random_banded(20, 3, 2, 9);
        let d = m.to_dense();
        let g = m.gram().to_dense();
        assert!((g - d.adjoint() * &d).norm() < 1e-12);
        let x: Vec<Complex64> = (0..20).map(|i| Complex64::new(1.0, i as f64)).collect();
        let y = m.adjoint_mul_vec(&x);
        let yd = d.adjoint() * nalgebra::DVector::from_vec(x);
        for (a, b) in y.iter().zip(yd.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
