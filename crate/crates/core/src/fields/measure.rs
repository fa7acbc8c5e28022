use super::grid::{GridField, GridSpec};
use super::norms::lp_norm;
use crate::error::{usage, Error, Result};

/// Absolutely continuous measure given by a density on a grid.
#[derive(Debug, Clone)]
pub struct GridMeasure {
    pub density: GridField,
    pub mass: f64,
    /// Largest Euclidean node radius carrying non-negligible density.
    pub support_radius: f64,
}

impl GridMeasure {
    /// Wraps a nonnegative scalar density, checking that it has unit mass.
    pub fn probability(density: GridField) -> Result<Self> {
        let m = Self::signed(density)?;
        let top = m.density.max_abs();
        if m.density.values().iter().any(|&v| v < -1e-12 * top.max(1.0)) {
            return Err(Error::Data("probability density has negative values".into()));
        }
        if (m.mass - 1.0).abs() > 1e-10 {
            return Err(Error::Data(format!("measure has mass {} instead of 1", m.mass)));
        }
        Ok(m)
    }

    /// Rescales a nonnegative density to unit mass.
    pub fn normalized(density: GridField) -> Result<Self> {
        let mass = Self::signed(density.clone())?.mass;
        if !(mass > 0.0) {
            return Err(Error::Degenerate("density has no positive mass".into()));
        }
        Self::probability(density.scaled(1.0 / mass))
    }

    /// Probability measure from an unnormalized density function.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::normalized(GridField::from_fn(spec, f)?)
    }

    /// Signed measure without mass or sign checks.
    pub fn signed(density: GridField) -> Result<Self> {
        if density.ncomp != 1 {
            return usage("a measure density must be scalar");
        }
        let mass = density.integral(0);
        let spec = density.spec;
        let top = density.max_abs();
        let mut radius: f64 = 0.0;
        for (i, &v) in density.values().iter().enumerate() {
            if v.abs() > 1e-12 * top {
                let x = spec.point(i);
                radius = radius.max(x[..spec.d].iter().map(|c| c * c).sum::<f64>().sqrt());
            }
        }
        Ok(Self { density, mass, support_radius: radius })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.density.spec
    }

    /// Largest sup-norm node coordinate carrying density above `rel * max`.
    pub fn support_half_width(&self, rel: f64) -> f64 {
        let spec = self.spec();
        let top = self.density.max_abs();
        let mut w: f64 = 0.0;
        for (i, &v) in self.density.values().iter().enumerate() {
            if v.abs() > rel * top {
                let x = spec.point(i);
                w = w.max(x[..spec.d].iter().fold(0.0, |a: f64, c| a.max(c.abs())));
            }
        }
        w
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.density, p)
    }

    /// Node weights `mu_b h^d`.
    pub fn weights(&self) -> Vec<f64> {
        let cell = self.spec().cell();
        self.density.values().iter().map(|v| v * cell).collect()
    }

    /// `∫ |x - x0|^r dmu`.
    pub fn moment(&self, x0: &[f64], r: f64) -> f64 {
        let spec = self.spec();
        let cell = spec.cell();
        crate::numeric::neumaier_sum(self.density.values().iter().enumerate().map(|(i, &v)| {
            let x = spec.point(i);
            let dist2: f64 = (0..spec.d).map(|k| (x[k] - x0[k]).powi(2)).sum();
            v * dist2.sqrt().powf(r) * cell
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_and_checks() {
        let spec = GridSpec::new(1, 64, 4.0).unwrap();
        let m = GridMeasure::from_fn(spec, |x| (-x[0] * x[0] * 8.0).exp()).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-14);
        let bad = GridField::from_fn(spec, |x| x[0]).unwrap();
        assert!(GridMeasure::probability(bad).is_err());
        let half = GridField::from_fn(spec, |x| if x[0].abs() < 0.5 { 0.5 } else { 0.0 }).unwrap();
        assert!(matches!(GridMeasure::probability(half), Err(Error::Data(_))));
    }
}
