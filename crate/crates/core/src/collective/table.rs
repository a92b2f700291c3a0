//! Tabulated surrogate for Re⟨Σ⁺⟩ over detuning, Rabi frequency and domain
//! size, for sweeps that would otherwise repeat thousands of exact solves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coarse::{coarse_grain, CollectiveDomain, Nanodiamond};
use super::stiffness::{
    bracket, domain_drive, sigma_plus_re, stiffness_from_sigma, CollectiveConfig,
};
use crate::quantum::{rabi_frequency, zpl_dipole_moment, DriveField, NvPhotophysics};
use crate::{Error, Result};

/// Layout of a [`StiffnessTable`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableSpec {
    /// Domain sizes solved exactly; the extrapolation grid of the
    /// [`CollectiveConfig`] is merged in.
    pub n_grid: Vec<usize>,
    /// Largest |Δ| covered.
    pub detuning_max: f64,
    /// Node spacing in u = asinh(Δ/γ).
    pub asinh_step: f64,
    pub rabi_min: f64,
    pub rabi_max: f64,
    /// 1 (only when `rabi_min == rabi_max`) or 3.
    pub rabi_nodes: usize,
}

impl Default for TableSpec {
    fn default() -> Self {
        Self {
            n_grid: vec![1, 2, 3, 4, 6, 8, 12, 16, 20, 24, 32, 40, 48, 56, 64, 72, 80],
            detuning_max: 1e14,
            asinh_step: 0.1,
            rabi_min: 0.0,
            rabi_max: 0.0,
            rabi_nodes: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StiffnessTable {
    gamma_bare: f64,
    gamma_collective: f64,
    /// γ used for the asinh detuning map.
    detuning_scale: f64,
    asinh_step: f64,
    detuning_count: usize,
    rabi_nodes: Vec<f64>,
    n_grid: Vec<usize>,
    config: CollectiveConfig,
    /// Re⟨Σ⁺⟩ indexed [rabi][detuning][n].
    values: Vec<f64>,
}

impl StiffnessTable {
    pub fn build(
        phys: &NvPhotophysics,
        spec: &TableSpec,
        config: &CollectiveConfig,
    ) -> Result<Self> {
        config.validate()?;
        if !(spec.asinh_step > 0.0 && spec.detuning_max > 0.0) {
            return Err(Error::invalid(
                "table",
                "detuning range and step must be positive",
            ));
        }
        if !(spec.rabi_min > 0.0 && spec.rabi_max >= spec.rabi_min) {
            return Err(Error::invalid("table", "needs 0 < rabi_min <= rabi_max"));
        }
        let rabi_nodes = match spec.rabi_nodes {
            1 if spec.rabi_max == spec.rabi_min => vec![spec.rabi_min],
            3 => {
                let mid = 0.5 * (spec.rabi_min + spec.rabi_max);
                if spec.rabi_max == spec.rabi_min {
                    vec![spec.rabi_min]
                } else {
                    vec![spec.rabi_min, mid, spec.rabi_max]
                }
            }
            _ => {
                return Err(Error::invalid(
                    "rabi_nodes",
                    "must be 3, or 1 for a single Rabi frequency",
                ))
            }
        };
        let mut n_grid: Vec<usize> = spec
            .n_grid
            .iter()
            .chain(&config.sample_grid)
            .copied()
            .collect();
        n_grid.sort_unstable();
        n_grid.dedup();
        if n_grid.first() != Some(&1) || n_grid.last() != Some(&config.n_exact) {
            return Err(Error::invalid(
                "n_grid",
                "must start at 1 and end at n_exact",
            ));
        }

        let scale = phys.gamma_transverse();
        let detuning_count =
            ((spec.detuning_max / scale).asinh() / spec.asinh_step).ceil() as usize + 2;
        let probe = domain_drive(phys, 0.0, 0.0, config);
        let cells: Vec<(usize, usize)> = (0..rabi_nodes.len())
            .flat_map(|r| (0..=detuning_count).map(move |j| (r, j)))
            .collect();
        let rows = cells
            .par_iter()
            .map(|&(r, j)| {
                if j == 0 {
                    return Ok(vec![0.0; n_grid.len()]);
                }
                let detuning = scale * (j as f64 * spec.asinh_step).sinh();
                let drive = domain_drive(phys, detuning, rabi_nodes[r], config);
                n_grid
                    .iter()
                    .map(|&n| sigma_plus_re(n, drive, config))
                    .collect()
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        log::debug!(
            "stiffness table: {} Rabi x {} detuning x {} sizes",
            rabi_nodes.len(),
            detuning_count + 1,
            n_grid.len()
        );

        Ok(Self {
            gamma_bare: probe.gamma_bare,
            gamma_collective: probe.gamma_collective,
            detuning_scale: scale,
            asinh_step: spec.asinh_step,
            detuning_count,
            rabi_nodes,
            config: config.clone(),
            n_grid,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n_exact(&self) -> usize {
        self.config.n_exact
    }

    pub fn detuning_max(&self) -> f64 {
        self.detuning_scale * ((self.detuning_count - 2) as f64 * self.asinh_step).sinh()
    }

    fn matches(&self, phys: &NvPhotophysics, config: &CollectiveConfig) -> Result<()> {
        let drive = domain_drive(phys, 0.0, 0.0, config);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if close(drive.gamma_bare, self.gamma_bare)
            && close(drive.gamma_collective, self.gamma_collective)
        {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "stiffness table was built for different decay rates".into(),
            ))
        }
    }

    fn value(&self, r: usize, j: i64, g: usize) -> f64 {
        let stride = self.n_grid.len();
        let v =
            self.values[(r * (self.detuning_count + 1) + j.unsigned_abs() as usize) * stride + g];
        if j < 0 {
            -v
        } else {
            v
        }
    }

    /// Cubic Lagrange interpolation in u = asinh(Δ/γ), odd in Δ.
    fn along_detuning(&self, r: usize, g: usize, detuning: f64) -> Result<f64> {
        let u = (detuning / self.detuning_scale).asinh() / self.asinh_step;
        let m = self.detuning_count as i64;
        if u.abs() > (m - 2) as f64 {
            return Err(Error::invalid("detuning", "outside the tabulated range"));
        }
        let base = u.floor() as i64 - 1;
        let nodes = [base, base + 1, base + 2, base + 3];
        let mut total = 0.0;
        for (a, &ja) in nodes.iter().enumerate() {
            let mut w = 1.0;
            for (b, &jb) in nodes.iter().enumerate() {
                if a != b {
                    w *= (u - jb as f64) / (ja - jb) as f64;
                }
            }
            total += w * self.value(r, ja, g);
        }
        Ok(total)
    }

    fn at_grid(&self, g: usize, detuning: f64, rabi: f64) -> Result<f64> {
        let nodes = &self.rabi_nodes;
        let lo = nodes[0];
        let hi = nodes[nodes.len() - 1];
        let slack = 1e-9 * hi;
        if rabi < lo - slack || rabi > hi + slack {
            return Err(Error::invalid("rabi", "outside the tabulated range"));
        }
        if nodes.len() == 1 {
            return self.along_detuning(0, g, detuning);
        }
        let mut total = 0.0;
        for a in 0..nodes.len() {
            let mut w = 1.0;
            for b in 0..nodes.len() {
                if a != b {
                    w *= (rabi - nodes[b]) / (nodes[a] - nodes[b]);
                }
            }
            total += w * self.along_detuning(a, g, detuning)?;
        }
        Ok(total)
    }

    /// Surrogate Re⟨Σ⁺⟩ for an integer domain size.
    pub fn sigma_plus_re(&self, n: usize, detuning: f64, rabi: f64) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        if n > self.config.n_exact {
            let samples = self
                .config
                .fit_grid()
                .iter()
                .map(|&m| Ok((m as f64, self.sigma_plus_re(m, detuning, rabi)?)))
                .collect::<Result<Vec<_>>>()?;
            return Ok(self.config.extrapolant(&samples)?.eval(n as f64));
        }
        if let Ok(g) = self.n_grid.binary_search(&n) {
            return self.at_grid(g, detuning, rabi);
        }
        // Per-spin value Re⟨Σ⁺⟩/n varies smoothly in ln n; interpolate it
        // with a monotone cubic.
        let xs: Vec<f64> = self.n_grid.iter().map(|&m| (m as f64).ln()).collect();
        let ys = self
            .n_grid
            .iter()
            .enumerate()
            .map(|(g, &m)| Ok(self.at_grid(g, detuning, rabi)? / m as f64))
            .collect::<Result<Vec<f64>>>()?;
        Ok(n as f64 * pchip(&xs, &ys, (n as f64).ln()))
    }

    /// Surrogate for [`super::domain_stiffness`].
    pub fn domain_stiffness(
        &self,
        domain: &CollectiveDomain,
        phys: &NvPhotophysics,
        field: &DriveField,
        config: &CollectiveConfig,
    ) -> Result<f64> {
        self.matches(phys, config)?;
        if !(domain.n_coop >= 0.0) {
            return Err(Error::invalid("n_coop", "must be non-negative"));
        }
        let rabi = rabi_frequency(zpl_dipole_moment(phys), &field.at(0.0));
        let detuning = field.omega - domain.omega_i;
        bracket(domain.n_coop, |k| {
            Ok(stiffness_from_sigma(
                rabi,
                field.w0,
                self.sigma_plus_re(k, detuning, rabi)?,
            ))
        })
    }

    /// Surrogate for [`super::ensemble_quantum_stiffness`].
    pub fn ensemble_quantum_stiffness(
        &self,
        nd: &Nanodiamond,
        phys: &NvPhotophysics,
        field: &DriveField,
        grain_width: f64,
        config: &CollectiveConfig,
    ) -> Result<f64> {
        let phys = phys.with_omega0(nd.zpl_center);
        coarse_grain(nd, grain_width)?
            .iter()
            .map(|d| self.domain_stiffness(d, &phys, field, config))
            .sum()
    }
}

/// Piecewise cubic Hermite interpolation with Fritsch–Carlson slopes.
/// `xs` strictly increasing; `x` clamped to the data range.
pub(crate) fn pchip(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return ys[0];
    }
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    let mut slope = vec![0.0; n];
    if n == 2 {
        slope = vec![delta[0]; 2];
    } else {
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slope[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        slope[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        slope[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }
    let x = x.clamp(xs[0], xs[n - 1]);
    let i = match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => return ys[i],
        Err(i) => i - 1,
    };
    let t = (x - xs[i]) / h[i];
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * ys[i]
        + (t3 - 2.0 * t2 + t) * h[i] * slope[i]
        + (-2.0 * t3 + 3.0 * t2) * ys[i + 1]
        + (t3 - t2) * h[i] * slope[i + 1]
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}
