use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LofConfig {
    pub k: usize,
    pub threshold: f64,
    /// Scale each axis to unit variance before measuring distances.
    pub standardize: bool,
}

impl Default for LofConfig {
    fn default() -> Self {
        Self {
            k: 6,
            threshold: 5.7,
            standardize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LofResult {
    pub scores: Vec<f64>,
    pub keep: Vec<bool>,
}

impl LofResult {
    pub fn removed(&self) -> usize {
        self.keep.iter().filter(|k| !**k).count()
    }
}

/// Centres each axis and divides it by its standard deviation; constant axes
/// are only centred.
pub fn standardize(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = points.len() as f64;
    let mut out = points.to_vec();
    for axis in 0..2 {
        let mean = points.iter().map(|p| p[axis]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for (o, p) in out.iter_mut().zip(points) {
            o[axis] = (p[axis] - mean) / sd;
        }
    }
    out
}

/// Added to mean reachability distances so coincident points keep a finite
/// density.
const DUPLICATE_FLOOR: f64 = 1e-10;

struct Neighbourhood {
    /// Indices and distances of the k-distance neighbourhood, ties included.
    members: Vec<(usize, f64)>,
    k_distance: f64,
}

fn neighbourhood(points: &[[f64; 2]], i: usize, k: usize) -> Neighbourhood {
    let p = points[i];
    let mut dist: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, q)| (j, ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()))
        .collect();
    dist.select_nth_unstable_by(k - 1, |a, b| a.1.total_cmp(&b.1));
    let k_distance = dist[..k].iter().map(|d| d.1).fold(0.0, f64::max);
    let mut members: Vec<(usize, f64)> = dist.into_iter().filter(|d| d.1 <= k_distance).collect();
    members.sort_by_key(|m| m.0);
    Neighbourhood {
        members,
        k_distance,
    }
}

/// Local outlier factor of every point for neighbourhood size `k`.
pub fn lof_scores(points: &[[f64; 2]], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("k", "must be positive"));
    }
    if points.len() < k + 1 {
        return Err(Error::InsufficientData(format!(
            "LOF with k = {k} needs at least {} points, got {}",
            k + 1,
            points.len()
        )));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("points", "coordinates must be finite"));
    }
    let hoods: Vec<Neighbourhood> = (0..points.len())
        .into_par_iter()
        .map(|i| neighbourhood(points, i, k))
        .collect();
    let lrd: Vec<f64> = hoods
        .iter()
        .map(|h| {
            let reach: f64 = h
                .members
                .iter()
                .map(|&(j, d)| d.max(hoods[j].k_distance))
                .sum::<f64>()
                / h.members.len() as f64;
            1.0 / (reach + DUPLICATE_FLOOR)
        })
        .collect();
    Ok(hoods
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let total: f64 = h.members.iter().map(|&(j, _)| lrd[j] / lrd[i]).sum();
            total / h.members.len() as f64
        })
        .collect())
}

/// Removes points whose LOF exceeds the threshold.
pub fn lof_filter(points: &[[f64; 2]], config: &LofConfig) -> Result<LofResult> {
    let scaled = if config.standardize {
        standardize(points)
    } else {
        points.to_vec()
    };
    let scores = lof_scores(&scaled, config.k)?;
    let keep = scores.iter().map(|&s| !(s > config.threshold)).collect();
    Ok(LofResult { scores, keep })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<[f64; 2]> {
        (0..15)
            .flat_map(|i| (0..15).map(move |j| [i as f64, j as f64]))
            .collect()
    }

    #[test]
    fn uniform_grid_keeps_everything() {
        let res = lof_filter(&grid(), &LofConfig::default()).unwrap();
        assert_eq!(res.removed(), 0);
        let interior = 7 * 15 + 7;
        assert!((res.scores[interior] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_point_is_removed() {
        let mut pts = grid();
        pts.push([700.0, 7.0]);
        let res = lof_filter(&pts, &LofConfig::default()).unwrap();
        assert!(!res.keep[pts.len() - 1]);
        assert_eq!(res.removed(), 1);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![[0.0, 0.0]; 6];
        assert!(matches!(
            lof_scores(&pts, 6),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn duplicates_are_not_outliers() {
        let mut pts = vec![[1.0, 1.0]; 10];
        pts.extend(grid());
        let res = lof_filter(&pts, &LofConfig::default()).unwrap();
        assert!(res.scores.iter().all(|s| s.is_finite()));
        assert!(res.keep[..10].iter().all(|k| *k));
    }
}
