use super::RatioReport;
use crate::energy::quadrature::{field_self_energy, unit_cell_power_average};
use crate::energy::unrenormalized_commutator;
use crate::error::{Error, Result};
use crate::fields::spectral::{convolve_nodes, wrapped_kernel_spectrum};
use crate::fields::{
    bmo_seminorm, is_zero_mean, mollify, smooth_step, smooth_step_derivative, sobolev_seminorm,
    GridField, GridSpec, MollifierSpec,
};
use crate::kernel::RieszParams;
use crate::numeric::{gauss_legendre, Neumaier};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Box side of the rescaled grid; the seed lives in `B(0, 1/4)`.
const RESCALED_BOX: f64 = 1.0;
/// Mollification scale of the rescaled field (`eps = r / 16` physically).
const RESCALED_EPSILON: f64 = 1.0 / 16.0;
/// Box side of the grid carrying the physical field, supported in `B(0, 1/2)`.
const PHYSICAL_BOX: f64 = 1.25;
const ORIGIN_REFINEMENT: usize = 12;
const MIN_CELLS_ACROSS: f64 = 16.0;

/// Cut-off equal to 1 on `B(0, 1/4)` and 0 outside `B(0, 1/2)`.
fn cutoff(rho: f64) -> f64 {
    smooth_step(4.0 * rho - 1.0)
}

fn cutoff_derivative(rho: f64) -> f64 {
    4.0 * smooth_step_derivative(4.0 * rho - 1.0)
}

/// `log log(1/rho)`.
fn loglog(rho: f64) -> f64 {
    (-rho.ln()).ln()
}

/// Average of `f` over the cube of side `h` centred at `c`, refining
/// dyadically around the origin where `f` may be singular.
fn cell_average(d: usize, c: &[f64], h: f64, f: &dyn Fn(&[f64]) -> f64, depth: usize) -> f64 {
    let touches_origin = c[..d].iter().all(|x| x.abs() <= 0.5 * h * (1.0 + 1e-12));
    if touches_origin && depth > 0 {
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut sub = [0.0; 3];
            for k in 0..d {
                let sign = if corner >> k & 1 == 1 { 1.0 } else { -1.0 };
                sub[k] = c[k] + sign * 0.25 * h;
            }
            acc += cell_average(d, &sub, 0.5 * h, f, depth - 1);
        }
        return acc / (1usize << d) as f64;
    }
    let (gx, gw) = gauss_legendre(3);
    let mut acc = 0.0;
    let points = 3usize.pow(d as u32);
    for t in 0..points {
        let mut y = [0.0; 3];
        let mut w = 1.0;
        let mut r = t;
        for k in 0..d {
            let j = r % 3;
            r /= 3;
            y[k] = c[k] + 0.5 * h * gx[j];
            w *= 0.5 * gw[j];
        }
        acc += w * f(&y[..d]);
    }
    acc
}

/// Seed profile: a product of identical zero-mean one-dimensional bumps
/// (stretched along the first axis when `s = 0`, where symmetric seeds give
/// a vanishing resonant integral).
fn seed_profile(spec: &GridSpec, params: &RieszParams) -> Result<(GridField, f64)> {
    let d = spec.d;
    let a = 0.98 * 0.25 / (d as f64).sqrt();
    let stretch = if params.is_log() && d > 1 { 0.5 } else { 1.0 };
    let make = |width: f64| -> Vec<f64> {
        let base: Vec<f64> = (0..spec.n)
            .map(|j| {
                let t = spec.coord(j) / width;
                if t.abs() < 1.0 {
                    (1.0 - t * t).powi(4)
                } else {
                    0.0
                }
            })
            .collect();
        let m0: f64 = base.iter().sum();
        let m2: f64 = base.iter().enumerate().map(|(j, b)| b * spec.coord(j).powi(2)).sum();
        let c = m0 / m2;
        base.iter().enumerate().map(|(j, b)| b * (1.0 - c * spec.coord(j).powi(2))).collect()
    };
    let first = make(a * stretch);
    let rest = make(a);
    let values = (0..spec.len())
        .map(|i| {
            let ix = spec.unravel(i);
            (1..d).fold(first[ix[0]], |acc, k| acc * rest[ix[k]])
        })
        .collect();
    Ok((GridField::from_values(*spec, 1, values)?, a))
}

/// The `log log` counterexample at scale `r`, in rescaled coordinates
/// `x -> r x` so that the seed occupies a fixed grid.
#[derive(Debug, Clone)]
pub struct Cef1Instance {
    pub params: RieszParams,
    pub r: f64,
    /// Grid carrying the seed `f` (so that `f_r(x) = r^{-d} f(x / r)`).
    pub spec: GridSpec,
    pub f: GridField,
    /// `∬ |(x - y)^1|^2 / |x - y|^{s+2} f(x) f(y)`.
    pub seed_integral: f64,
    /// Nodes per axis of the grid carrying the physical field.
    pub physical_n: usize,
}

impl Cef1Instance {
    pub fn new(params: RieszParams, r: f64) -> Result<Self> {
        let n = if params.d == 3 { 64 } else { 256 };
        Self::with_grid(params, r, n, 64)
    }

    pub fn with_grid(params: RieszParams, r: f64, n: usize, physical_n: usize) -> Result<Self> {
        if params.d == 1 && params.is_log() {
            return Err(Error::Usage("the construction excludes (d, s) = (1, 0)".into()));
        }
        if !(r > 0.0 && r <= 0.1) {
            return Err(Error::Usage(format!("scale r = {r} must lie in (0, 0.1]")));
        }
        let spec = GridSpec::new(params.d, n, RESCALED_BOX)?;
        let (f, a) = seed_profile(&spec, &params)?;
        let across = 2.0 * a / spec.h();
        if across < MIN_CELLS_ACROSS {
            return Err(Error::Resolution(format!(
                "{across:.1} cells across the support of f_r; need {MIN_CELLS_ACROSS}"
            )));
        }
        MollifierSpec::new(RESCALED_EPSILON)?.check(&spec)?;
        if !is_zero_mean(&f) {
            return Err(Error::Degenerate("seed profile is not zero-mean".into()));
        }
        let ones = vec![1.0; spec.len()];
        let seed_integral = weighted_resonant(&f, &ones, &params);
        let scale = field_self_energy(&f.with_values(1, f.values().iter().map(|v| v.abs()).collect())?, &params).abs();
        if !(seed_integral.abs() > 1e-9 * scale) {
            return Err(Error::Degenerate(format!(
                "seed integral {seed_integral:.3e} vanishes to working precision"
            )));
        }
        if params.s != 0.0 && seed_integral * params.s <= 0.0 {
            return Err(Error::Degenerate(format!(
                "seed integral {seed_integral:.3e} has the wrong sign for s = {}",
                params.s
            )));
        }
        Ok(Self { params, r, spec, f, seed_integral, physical_n })
    }

    /// Rescaled field `v(r x) / r`, first component only nonzero.
    pub fn rescaled_velocity(&self) -> Result<GridField> {
        let d = self.spec.d;
        let r = self.r;
        GridField::vector_from_fn(self.spec, d, |x, out| {
            out.iter_mut().for_each(|o| *o = 0.0);
            let rho = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            if rho > 0.0 && r * rho < 0.5 {
                out[0] = -x[0] * loglog(r * rho) * cutoff(r * rho);
            }
        })
    }
}

/// `h^{2d} sum_a f_a w_a (K * f)_a` with `K(z) = z_1^2 |z|^{-s-2}` and its cell
/// average at the origin.
fn weighted_resonant(f: &GridField, w: &[f64], params: &RieszParams) -> f64 {
    let spec = f.spec;
    let d = spec.d;
    let s = params.s;
    let k0 = spec.h().powf(-s) * unit_cell_power_average(d, s) / d as f64;
    let kernel = wrapped_kernel_spectrum(&spec, |z| {
        let r2: f64 = z.iter().map(|c| c * c).sum();
        if r2 == 0.0 {
            k0
        } else {
            z[0] * z[0] * r2.powf(-0.5 * s - 1.0)
        }
    });
    let kf = convolve_nodes(&spec, &kernel, f.values());
    let mut acc = Neumaier::new();
    for i in 0..spec.len() {
        acc.add(f.values()[i] * w[i] * kf[i]);
    }
    acc.total() * spec.cell() * spec.cell()
}

/// Norms of the physical field entering the denominator.
#[derive(Debug, Clone, Serialize)]
pub struct Cef1VelocityNorms {
    pub n: usize,
    /// Dyadic BMO seminorm of the cell averages of `grad v`.
    pub bmo: f64,
    /// Largest cell average of `|grad v|`.
    pub grad_inf: f64,
    /// `|| |D|^{(d-s)/2} v ||_{L^{2d/(d-s-2)}}` when `s < d - 2`.
    pub sub_coulomb: Option<f64>,
}

/// `grad v` for `v_1 = -x_1 log log(1/|x|) chi(|x|)`: the first row.
fn gradient_row(x: &[f64], out: &mut [f64]) {
    let rho = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    out.iter_mut().for_each(|o| *o = 0.0);
    if rho == 0.0 || rho >= 0.5 {
        return;
    }
    let lam = loglog(rho);
    let dlam = 1.0 / (rho * rho.ln());
    let chi = cutoff(rho);
    let dchi = cutoff_derivative(rho);
    for (j, o) in out.iter_mut().enumerate() {
        let delta = if j == 0 { 1.0 } else { 0.0 };
        *o = -delta * lam * chi - x[0] * (dlam * chi + lam * dchi) * x[j] / rho;
    }
}

/// Norms of the physical field on a grid with `n` nodes per axis. Cell
/// averages are used since `grad v` is unbounded at the origin.
pub fn cef1_velocity_norms(params: &RieszParams, n: usize) -> Result<Cef1VelocityNorms> {
    let d = params.d;
    let spec = GridSpec::new(d, n, PHYSICAL_BOX)?;
    let h = spec.h();
    let len = spec.len();
    let rows: Vec<Vec<f64>> = (0..len)
        .into_par_iter()
        .map(|i| {
            let c = spec.point(i);
            let rho = c[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            if rho > 0.5 + h * (d as f64).sqrt() {
                return vec![0.0; d];
            }
            (0..d)
                .map(|j| {
                    let comp = |y: &[f64]| {
                        let mut row = [0.0; 3];
                        gradient_row(y, &mut row[..d]);
                        row[j]
                    };
                    cell_average(d, &c[..d], h, &comp, ORIGIN_REFINEMENT)
                })
                .collect()
        })
        .collect();
    let mut values = vec![0.0; d * len];
    for (i, row) in rows.iter().enumerate() {
        for j in 0..d {
            values[j * len + i] = row[j];
        }
    }
    let grad = GridField::from_values(spec, d, values)?;
    let grad_inf = grad.pointwise_norms().into_iter().fold(0.0, f64::max);
    let bmo = bmo_seminorm(&grad);
    let sub_coulomb = if params.s < d as f64 - 2.0 {
        let v = GridField::vector_from_fn(spec, d, |x, out| {
            out.iter_mut().for_each(|o| *o = 0.0);
            let rho = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            if rho > 0.0 && rho < 0.5 {
                out[0] = -x[0] * loglog(rho) * cutoff(rho);
            }
        })?;
        let p = 2.0 * d as f64 / (d as f64 - params.s - 2.0);
        Some(sobolev_seminorm(&v, 0.5 * (d as f64 - params.s), p)?)
    } else {
        None
    };
    Ok(Cef1VelocityNorms { n, bmo, grad_inf, sub_coulomb })
}

/// Ratio of the commutator to `(||grad v||_BMO + ...) ||f_r||^2` at scale `r`,
/// with the resonant part and the remainder reported separately.
pub fn cef1_ratio(inst: &Cef1Instance) -> Result<RatioReport> {
    let params = inst.params;
    let spec = inst.spec;
    let d = spec.d;
    let r = inst.r;
    let rs = r.powf(-params.s);

    let v = inst.rescaled_velocity()?;
    let v_eps = mollify(&v, &MollifierSpec::new(RESCALED_EPSILON)?)?;
    let numerator = rs * unrenormalized_commutator(&inst.f, &inst.f, &v_eps, params)?;

    let h = spec.h();
    let weight: Vec<f64> = (0..spec.len())
        .map(|i| {
            let x = spec.point(i);
            let rho = x[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
            if rho == 0.0 {
                let f = |y: &[f64]| loglog(r * y.iter().map(|c| c * c).sum::<f64>().sqrt());
                cell_average(d, &x[..d], h, &f, ORIGIN_REFINEMENT)
            } else {
                loglog(r * rho)
            }
        })
        .collect();
    let resonant = rs * weighted_resonant(&inst.f, &weight, &params);
    let off_resonant = numerator - resonant;

    let norms = cef1_velocity_norms(&params, inst.physical_n)?;
    let f_norm2 = field_self_energy(&inst.f, &params) / params.c_ds;
    let f_r_norm2 = rs * f_norm2;
    let velocity = norms.bmo + norms.sub_coulomb.unwrap_or(0.0);
    let denominator = velocity * f_r_norm2;
    if !(denominator > 0.0) {
        return Err(Error::Degenerate(format!("denominator {denominator:.3e} is not positive")));
    }
    let ll = loglog(r);
    let diagnostics = BTreeMap::from([
        ("bmo".to_string(), norms.bmo),
        ("sub_coulomb".to_string(), norms.sub_coulomb.unwrap_or(0.0)),
        ("f_norm2".to_string(), f_norm2),
        ("f_r_norm2".to_string(), f_r_norm2),
        ("seed_integral".to_string(), inst.seed_integral),
        ("normalized_resonant".to_string(), resonant / (rs * ll)),
        ("loglog_inv_r".to_string(), ll),
        ("epsilon".to_string(), RESCALED_EPSILON * r),
    ]);
    Ok(RatioReport {
        scale: r,
        numerator,
        denominator,
        ratio: numerator.abs() / denominator,
        resonant,
        off_resonant,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_average_of_smooth_function() {
        let f = |y: &[f64]| y[0] * y[0] + y[1];
        let avg = cell_average(2, &[0.0, 0.0], 0.2, &f, 4);
        assert!((avg - 0.04 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(0.2), 1.0);
        assert_eq!(cutoff(0.6), 0.0);
        let (a, b) = (cutoff(0.37 + 1e-6), cutoff(0.37 - 1e-6));
        assert!(((a - b) / 2e-6 - cutoff_derivative(0.37)).abs() < 1e-6);
    }

    #[test]
    fn log_case_in_one_dimension_is_rejected() {
        let p = RieszParams::new(1, 0.0).unwrap();
        assert!(matches!(Cef1Instance::new(p, 0.01), Err(Error::Usage(_))));
    }
}
