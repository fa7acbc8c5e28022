use crate::energy::quadrature::field_self_energy;
use crate::energy::unrenormalized_commutator;
use crate::error::{usage, Error, Result};
use crate::fields::{bmo_seminorm, fd_partial, is_zero_mean, GridField, GridSpec};
use crate::kernel::RieszParams;
use rand::Rng;
use serde::Serialize;

/// `|∬ (v(x) - v(y)) / (x - y) f(x) g(y)| / (||v'||_BMO ||f||_{H^{-1/2}} ||g||_{H^{-1/2}})`
/// on a one-dimensional grid.
///
/// `v'` is the fourth-order finite difference of `v`; an affine `v` gives 0.
pub fn bmo_hilbert_check(v: &GridField, f: &GridField, g: &GridField) -> Result<f64> {
    let spec = v.spec;
    if spec.d != 1 {
        return usage(format!("the Hilbert-transform check is one-dimensional, got d = {}", spec.d));
    }
    if !(is_zero_mean(f) && is_zero_mean(g)) {
        return Err(Error::Precondition("f and g must have zero mean".into()));
    }
    let params = RieszParams::new(1, 0.0)?;
    let numerator = unrenormalized_commutator(f, g, v, params)?.abs();
    let dv: Vec<f64> = (0..spec.n).map(|i| fd_partial(&spec, v.values(), i, 0)).collect();
    let slope_scale = dv.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let bmo = bmo_seminorm(&GridField::from_values(spec, 1, dv)?);
    let f_norm = (field_self_energy(f, &params) / params.c_ds).sqrt();
    let g_norm = (field_self_energy(g, &params) / params.c_ds).sqrt();
    let scale = f_norm * g_norm;
    if bmo <= 1e-12 * slope_scale.max(1.0) {
        if numerator <= 1e-10 * slope_scale.max(1.0) * scale {
            return Ok(0.0);
        }
        return Err(Error::Degenerate(format!(
            "v' has vanishing oscillation but the commutator is {numerator:.3e}"
        )));
    }
    if !(scale > 0.0) {
        return Err(Error::Degenerate("f or g has zero energy".into()));
    }
    Ok(numerator / (bmo * scale))
}

/// Family of the derivative `v'` in a random sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BmoFamily {
    /// `v' = sign(x - c)`.
    Step,
    /// `v' = log |x - c|`.
    Log,
    /// `v' = tanh((x - c) / w)`.
    Smooth,
}

#[derive(Debug, Clone, Serialize)]
pub struct HilbertBatch {
    pub ratios: Vec<f64>,
    pub families: Vec<BmoFamily>,
    pub max_ratio: f64,
}

impl HilbertBatch {
    /// Largest ratio among the first `m` samples.
    pub fn max_over_first(&self, m: usize) -> f64 {
        self.ratios[..m.min(self.ratios.len())].iter().cloned().fold(0.0, f64::max)
    }
}

fn bump(x: f64, c: f64, w: f64) -> f64 {
    let t = (x - c) / w;
    if t.abs() < 1.0 {
        (1.0 - t * t).powi(4)
    } else {
        0.0
    }
}

/// Zero-mean pair of bumps with equal and opposite mass inside `[-1, 1]`.
fn random_dipole<R: Rng + ?Sized>(spec: GridSpec, rng: &mut R) -> Result<GridField> {
    let w1 = rng.random_range(0.1..0.4);
    let w2 = rng.random_range(0.1..0.4);
    let c1 = rng.random_range(-1.0 + w1..1.0 - w1);
    let c2 = rng.random_range(-1.0 + w2..1.0 - w2);
    let raw1 = GridField::from_fn(spec, |x| bump(x[0], c1, w1))?;
    let raw2 = GridField::from_fn(spec, |x| bump(x[0], c2, w2))?;
    let ratio = raw1.integral(0) / raw2.integral(0);
    raw1.axpy(-ratio, &raw2)
}

fn random_velocity<R: Rng + ?Sized>(spec: GridSpec, family: BmoFamily, rng: &mut R) -> Result<GridField> {
    let c: f64 = rng.random_range(-1.0..1.0);
    let a: f64 = rng.random_range(0.5..2.0);
    match family {
        BmoFamily::Step => GridField::from_fn(spec, |x| a * (x[0] - c).abs()),
        BmoFamily::Log => GridField::from_fn(spec, |x| {
            let z = x[0] - c;
            if z == 0.0 {
                0.0
            } else {
                a * z * (z.abs().ln() - 1.0)
            }
        }),
        BmoFamily::Smooth => {
            let w: f64 = rng.random_range(0.02..0.5);
            GridField::from_fn(spec, |x| {
                let u = ((x[0] - c) / w).abs();
                a * w * (u + (-2.0 * u).exp().ln_1p() - std::f64::consts::LN_2)
            })
        }
    }
}

/// [`bmo_hilbert_check`] over `samples` random triples, cycling through the
/// step, log and smooth families for `v'`.
pub fn bmo_hilbert_batch<R: Rng + ?Sized>(
    spec: GridSpec,
    samples: usize,
    rng: &mut R,
) -> Result<HilbertBatch> {
    if spec.d != 1 {
        return usage("the Hilbert-transform batch is one-dimensional");
    }
    if samples == 0 {
        return usage("at least one sample is required");
    }
    if spec.active_half_width() <= 1.0 {
        return usage("data lives in [-1, 1]; the grid's active region is too small");
    }
    let cycle = [BmoFamily::Step, BmoFamily::Log, BmoFamily::Smooth];
    let mut ratios = Vec::with_capacity(samples);
    let mut families = Vec::with_capacity(samples);
    for i in 0..samples {
        let family = cycle[i % 3];
        let v = random_velocity(spec, family, rng)?;
        let f = random_dipole(spec, rng)?;
        let g = random_dipole(spec, rng)?;
        ratios.push(bmo_hilbert_check(&v, &f, &g)?);
        families.push(family);
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(HilbertBatch { ratios, families, max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeds;

    #[test]
    fn affine_velocity_gives_zero() {
        let spec = GridSpec::new(1, 512, 8.0).unwrap();
        let mut rng = Seeds::new(2).stream("affine");
        let f = random_dipole(spec, &mut rng).unwrap();
        let g = random_dipole(spec, &mut rng).unwrap();
        let v = GridField::from_fn(spec, |x| 3.0 * x[0] - 1.0).unwrap();
        assert_eq!(bmo_hilbert_check(&v, &f, &g).unwrap(), 0.0);
    }

    #[test]
    fn higher_dimensions_are_rejected() {
        let spec = GridSpec::new(2, 16, 8.0).unwrap();
        let mut rng = Seeds::new(2).stream("d2");
        assert!(matches!(bmo_hilbert_batch(spec, 3, &mut rng), Err(Error::Usage(_))));
    }
}
