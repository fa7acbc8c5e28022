use super::quadrature::flux_average;
use crate::error::{precondition, usage, Result};
use crate::fields::spectral::{convolve_nodes, multiply_component, wrapped_kernel_spectrum};
use crate::fields::{fd_partial, is_zero_mean, GridField};
use crate::kernel::{AdmissiblePotential, RieszParams};
use crate::numeric::Neumaier;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

fn check_inputs(f: &GridField, g: &GridField, v: &GridField) -> Result<()> {
    let spec = f.spec;
    if g.spec != spec || v.spec != spec {
        return usage("commutator inputs live on different grids");
    }
    if f.ncomp != 1 || g.ncomp != 1 {
        return usage("f and g must be scalar fields");
    }
    if v.ncomp != spec.d {
        return usage(format!("velocity has {} components, expected {}", v.ncomp, spec.d));
    }
    Ok(())
}

fn support_half_width(f: &GridField) -> f64 {
    let spec = f.spec;
    let top = f.max_abs();
    let mut w: f64 = 0.0;
    for (i, &val) in f.values().iter().enumerate() {
        if val.abs() > 1e-12 * top {
            let x = spec.point(i);
            w = w.max(x[..spec.d].iter().fold(0.0, |a: f64, c| a.max(c.abs())));
        }
    }
    w
}

/// `∫ f v . (K * g) + ∫ g v . (K * f)` given a routine producing `K_k * w`.
fn desymmetrized(
    f: &GridField,
    g: &GridField,
    v: &GridField,
    conv: impl Fn(usize, &[f64]) -> Vec<f64>,
) -> f64 {
    let d = f.spec.d;
    let mut acc = Neumaier::new();
    for k in 0..d {
        let vk = v.component(k);
        let kg = conv(k, g.values());
        let kf = conv(k, f.values());
        for i in 0..f.spec.len() {
            acc.add(vk[i] * (f.values()[i] * kg[i] + g.values()[i] * kf[i]));
        }
    }
    acc.total()
}

/// `∬ (v(x) - v(y)) . grad g(x - y) f(x) g(y) dx dy` for compactly
/// supported data, by linear convolution with the sampled kernel gradient.
///
/// The node quadrature adds the self-cell term
/// `(e0 / d) ∫ div v f g h^d` with `e0` the cell average of `z . grad g`.
pub fn unrenormalized_commutator(
    f: &GridField,
    g_fn: &GridField,
    v: &GridField,
    params: RieszParams,
) -> Result<f64> {
    check_inputs(f, g_fn, v)?;
    let spec = f.spec;
    if spec.d != params.d {
        return usage("grid and kernel dimensions differ");
    }
    if params.s <= 0.0 && !(is_zero_mean(f) && is_zero_mean(g_fn)) {
        return precondition("f and g must have zero mean for s <= 0");
    }
    let limit = spec.active_half_width();
    if support_half_width(f) >= limit || support_half_width(g_fn) >= limit {
        return precondition(format!("f and g must be supported in |x|_inf < {limit}"));
    }
    let grads: Vec<Vec<Complex64>> = (0..spec.d)
        .map(|k| {
            wrapped_kernel_spectrum(&spec, |z| {
                let r2: f64 = z.iter().map(|c| c * c).sum();
                if r2 == 0.0 {
                    0.0
                } else {
                    params.grad_factor_r2(r2) * z[k]
                }
            })
        })
        .collect();
    let cell = spec.cell();
    let off = desymmetrized(f, g_fn, v, |k, w| convolve_nodes(&spec, &grads[k], w));
    let e0 = flux_average(&params, spec.h());
    let mut diag = Neumaier::new();
    for i in 0..spec.len() {
        let fg = f.values()[i] * g_fn.values()[i];
        if fg != 0.0 {
            let div: f64 = (0..spec.d).map(|k| fd_partial(&spec, v.component(k), i, k)).sum();
            diag.add(fg * div);
        }
    }
    Ok(cell * cell * off + cell * cell * e0 / spec.d as f64 * diag.total())
}

/// Periodic counterpart on the torus of side `L`: `grad g * f` is applied
/// as the multiplier `2 pi i xi g^_t(xi)` with the zero mode excluded.
pub fn unrenormalized_commutator_periodic(
    f: &GridField,
    g_fn: &GridField,
    v: &GridField,
    pot: &AdmissiblePotential,
) -> Result<f64> {
    check_inputs(f, g_fn, v)?;
    let spec = f.spec;
    let tiny = pot.symbol_t(1e-9 / spec.l);
    let singular = !tiny.is_finite() || tiny > 1e6 * pot.symbol_t(1.0 / spec.l).abs();
    if singular && !(is_zero_mean(f) && is_zero_mean(g_fn)) {
        return precondition("f and g must have zero mean for a symbol singular at 0");
    }
    let symbol: Vec<f64> = (0..spec.len())
        .map(|i| {
            if i == 0 || spec.is_nyquist(i) {
                0.0
            } else {
                let xi = spec.xi(i);
                pot.symbol_t(xi[..spec.d].iter().map(|c| c * c).sum::<f64>().sqrt())
            }
        })
        .collect();
    let conv = |k: usize, w: &[f64]| -> Vec<f64> {
        let field = GridField::from_values(spec, 1, w.to_vec()).expect("finite input");
        multiply_component(&field, 0, |xi, i| Complex64::new(0.0, 2.0 * PI * xi[k] * symbol[i]))
            .into_iter()
            .map(|z| z.re)
            .collect()
    };
    Ok(spec.cell() * desymmetrized(f, g_fn, v, conv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;

    fn bump(spec: GridSpec, c: f64, w: f64) -> GridField {
        GridField::from_fn(spec, |x| {
            let t = (x[0] - c) / w;
            if t.abs() < 1.0 {
                (1.0 - t * t).powi(4)
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn constant_velocity_and_same_density_vanish() {
        let spec = GridSpec::new(1, 64, 4.0).unwrap();
        let f = bump(spec, -0.2, 0.5).axpy(-1.0, &bump(spec, 0.3, 0.5)).unwrap();
        let v = GridField::from_fn(spec, |_| 2.0).unwrap();
        let p = RieszParams::new(1, -1.0).unwrap();
        assert!(unrenormalized_commutator(&f, &f, &v, p).unwrap().abs() < 1e-14);
    }

    #[test]
    fn nonzero_mean_rejected_for_log() {
        let spec = GridSpec::new(1, 64, 4.0).unwrap();
        let f = bump(spec, 0.0, 0.5);
        let v = GridField::from_fn(spec, |x| x[0]).unwrap();
        let p = RieszParams::new(1, 0.0).unwrap();
        assert!(matches!(
            unrenormalized_commutator(&f, &f, &v, p),
            Err(crate::Error::Precondition(_))
        ));
    }
}
