use crate::error::{precondition, usage, Error, Result};
use crate::fields::GridMeasure;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// `N` pairwise distinct points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleConfig {
    pub d: usize,
    points: Vec<f64>,
    min_gap: f64,
}

impl ParticleConfig {
    pub fn new(d: usize, points: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return usage(format!("particle dimension {d} outside 1..=3"));
        }
        if points.is_empty() || points.len() % d != 0 {
            return usage(format!("{} coordinates do not form points in R^{d}", points.len()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite particle coordinate".into()));
        }
        let mut cfg = Self { d, points, min_gap: f64::INFINITY };
        let gaps = cfg.nearest_gaps();
        cfg.min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        if cfg.len() > 1 && !(cfg.min_gap > 0.0) {
            return precondition("particle configuration has coincident points");
        }
        Ok(cfg)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return usage("particle rows have inconsistent lengths");
        }
        Self::new(d, rows.concat())
    }

    /// `n` iid draws from the piecewise-constant density of `mu`: a node is
    /// picked with probability `w_b`, then a uniform point in its cell.
    pub fn sample_iid<R: Rng + ?Sized>(mu: &GridMeasure, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return usage("cannot sample zero particles");
        }
        let spec = *mu.spec();
        let weights = mu.weights();
        let pick = WeightedIndex::new(&weights)
            .map_err(|e| Error::Data(format!("density cannot be sampled: {e}")))?;
        let h = spec.h();
        let mut pts = Vec::with_capacity(n * spec.d);
        for _ in 0..n {
            let node = spec.point(pick.sample(rng));
            for c in node.iter().take(spec.d) {
                pts.push(c + h * (rng.random::<f64>() - 0.5));
            }
        }
        Self::new(spec.d, pts)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.points
    }

    /// Minimal pairwise distance (`inf` for a single point).
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// `min_{j != i} |x_i - x_j|` for every `i`.
    pub fn nearest_gaps(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = self.point(i);
                let mut best = f64::INFINITY;
                for j in 0..n {
                    if j != i {
                        best = best.min(dist(xi, self.point(j)));
                    }
                }
                best
            })
            .collect()
    }

    /// Largest sup-norm coordinate.
    pub fn max_abs_coord(&self) -> f64 {
        self.points.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
    }

    /// Configuration translated by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        let d = self.d;
        let pts = self.points.iter().enumerate().map(|(k, v)| v + shift[k % d]).collect();
        Self::new(d, pts)
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_coincident_points() {
        let err = ParticleConfig::new(1, vec![0.1, 0.3, 0.1]).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn gaps() {
        let x = ParticleConfig::new(1, vec![0.0, 0.4, 1.0]).unwrap();
        let g = x.nearest_gaps();
        assert!((g[0] - 0.4).abs() < 1e-15 && (g[2] - 0.6).abs() < 1e-15);
        assert!((x.min_gap() - 0.4).abs() < 1e-15);
    }
}
