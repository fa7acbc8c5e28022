use super::grid::GridField;
use super::mollify::shift_directions;
use super::spectral::{multiply_component, spectral_jacobian, xi_norm};
use crate::error::{precondition, usage, Error, Result};
use crate::kernel::AdmissiblePotential;
use crate::numeric::neumaier_sum;
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

/// Discrete `L^p` norm of the pointwise Euclidean magnitude, `p` in `[1, inf]`.
pub fn lp_norm(field: &GridField, p: f64) -> f64 {
    lp_of_norms(&field.pointwise_norms(), field.spec.cell(), p)
}

fn lp_of_norms(norms: &[f64], cell: f64, p: f64) -> f64 {
    if p.is_infinite() {
        norms.iter().cloned().fold(0.0, f64::max)
    } else {
        (neumaier_sum(norms.iter().map(|v| v.powf(p))) * cell).powf(1.0 / p)
    }
}

pub(crate) fn is_zero_mean(field: &GridField) -> bool {
    (0..field.ncomp).all(|c| {
        let mass = field.integral(c);
        let abs = neumaier_sum(field.component(c).iter().map(|v| v.abs())) * field.spec.cell();
        mass.abs() <= 1e-10 * abs.max(f64::MIN_POSITIVE)
    })
}

/// `|| m(|D|) f ||_{L^p}` for a real radial multiplier `m(|xi|)`, with the
/// zero mode multiplied by `m0`.
pub fn multiplier_lp_norm(
    field: &GridField,
    m: impl Fn(f64) -> f64,
    m0: f64,
    p: f64,
) -> Result<f64> {
    if !(p >= 1.0) {
        return usage(format!("exponent p = {p} must lie in [1, inf]"));
    }
    let spec = field.spec;
    let len = spec.len();
    let mult = |i: usize| if i == 0 { m0 } else { m(xi_norm(&spec, i)) };
    if p == 2.0 {
        let mut terms = Vec::with_capacity(field.ncomp * len);
        for c in 0..field.ncomp {
            let s = &field.spectrum()[c * len..(c + 1) * len];
            for i in 0..len {
                let w = mult(i);
                terms.push(w * w * s[i].norm_sqr());
            }
        }
        return Ok((neumaier_sum(terms) * spec.cell() / len as f64).sqrt());
    }
    let mut norms2 = vec![0.0; len];
    for c in 0..field.ncomp {
        let out = multiply_component(field, c, |_, i| Complex64::new(mult(i), 0.0));
        for i in 0..len {
            norms2[i] += out[i].re * out[i].re;
        }
    }
    let norms: Vec<f64> = norms2.into_iter().map(f64::sqrt).collect();
    Ok(lp_of_norms(&norms, spec.cell(), p))
}

/// `|| |D|^order f ||_{L^p}` with `|D|` the multiplier `2 pi |xi|`.
pub fn sobolev_seminorm(field: &GridField, order: f64, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return usage(format!("exponent p = {p} must lie in (1, inf]"));
    }
    if order < 0.0 && !is_zero_mean(field) {
        return precondition("negative-order seminorm of a field with nonzero mean");
    }
    let m0 = if order == 0.0 { 1.0 } else { 0.0 };
    multiplier_lp_norm(field, |r| (2.0 * PI * r).powf(order), m0, p)
}

/// Energy seminorm `sqrt( ∫ g_t^(xi) |f^(xi)|^2 dxi )` as a Fourier sum on
/// the periodic box, zero mode excluded.
pub fn energy_seminorm(field: &GridField, pot: &AdmissiblePotential) -> Result<f64> {
    let spec = field.spec;
    let tiny = pot.symbol_t(1e-9 / spec.l);
    let diverges = !tiny.is_finite() || tiny > 1e6 * pot.symbol_t(1.0 / spec.l).abs();
    if diverges && !is_zero_mean(field) {
        return precondition("energy seminorm needs a zero-mean field for a symbol singular at 0");
    }
    let len = spec.len();
    let mut terms = Vec::with_capacity(len * field.ncomp);
    for i in 1..len {
        let w = pot.symbol_t(xi_norm(&spec, i));
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Data(format!("symbol value {w} is not a nonnegative number")));
        }
        for c in 0..field.ncomp {
            terms.push(w * field.spectrum()[c * len + i].norm_sqr());
        }
    }
    let cell = spec.cell();
    Ok((neumaier_sum(terms) * cell * cell / spec.l.powi(spec.d as i32)).sqrt())
}

/// Homogeneous Hölder-Zygmund seminorm from second differences.
///
/// For `theta` in `(0, 1]` this is the maximum over grid shifts `h` along
/// axes and diagonals with `|h| <= L/4` of
/// `max_x |f(x+h) + f(x-h) - 2 f(x)| / |h|^theta`, restricted to nodes with
/// both neighbours inside the grid. For `theta` in `(1, 2]` it is the same
/// quantity of order `theta - 1` applied to the spectral Jacobian.
pub fn holder_zygmund_seminorm(field: &GridField, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return usage(format!("Hölder exponent theta = {theta} must be positive"));
    }
    if theta > 2.0 {
        return usage(format!("Hölder exponent theta = {theta} exceeds 2"));
    }
    if theta > 1.0 {
        let jac = spectral_jacobian(field)?;
        return holder_zygmund_seminorm(&jac, theta - 1.0);
    }
    let spec = field.spec;
    let n = spec.n as i64;
    let h = spec.h();
    let d = spec.d;
    let mut best = 0.0f64;
    for dir in shift_directions(d) {
        let dn = (dir.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
        let max_step = ((spec.n as f64) / (4.0 * dn)).floor() as i64;
        for step in 1..=max_step {
            let off: Vec<i64> = dir[..d].iter().map(|v| v * step).collect();
            let len_h = step as f64 * dn * h;
            let denom = len_h.powf(theta);
            let mut local = 0.0f64;
            for idx in 0..spec.len() {
                let ix = spec.unravel(idx);
                let mut plus = [0usize; 3];
                let mut minus = [0usize; 3];
                let mut inside = true;
                for k in 0..d {
                    let p = ix[k] as i64 + off[k];
                    let m = ix[k] as i64 - off[k];
                    if p < 0 || p >= n || m < 0 || m >= n {
                        inside = false;
                        break;
                    }
                    plus[k] = p as usize;
                    minus[k] = m as usize;
                }
                if !inside {
                    continue;
                }
                let ip = spec.ravel(&plus);
                let im = spec.ravel(&minus);
                let mut s2 = 0.0;
                for c in 0..field.ncomp {
                    let v = field.component(c);
                    let dd = v[ip] + v[im] - 2.0 * v[idx];
                    s2 += dd * dd;
                }
                local = local.max(s2.sqrt());
            }
            best = best.max(local / denom);
        }
    }
    Ok(best)
}

/// Dyadic BMO seminorm: the maximum over dyadic subcubes with at least two
/// cells per side of `(1/|Q|) ∫_Q |f - avg_Q f|`.
pub fn bmo_seminorm(field: &GridField) -> f64 {
    let spec = field.spec;
    let d = spec.d;
    let n = spec.n;
    let nc = field.ncomp;
    let mut best = 0.0f64;
    let mut side = 2;
    while side <= n {
        let per_axis = n / side;
        let cubes = per_axis.pow(d as u32);
        let cells = side.pow(d as u32);
        let mut members = Vec::with_capacity(cells);
        for q in 0..cubes {
            let mut base = [0usize; 3];
            let mut r = q;
            for k in (0..d).rev() {
                base[k] = (r % per_axis) * side;
                r /= per_axis;
            }
            members.clear();
            for t in 0..cells {
                let mut ix = [0usize; 3];
                let mut r = t;
                for k in (0..d).rev() {
                    ix[k] = base[k] + r % side;
                    r /= side;
                }
                members.push(spec.ravel(&ix));
            }
            let mut avg = [0.0f64; 9];
            for c in 0..nc {
                let v = field.component(c);
                avg[c] = members.iter().map(|&i| v[i]).sum::<f64>() / cells as f64;
            }
            let mut osc = 0.0;
            for &i in &members {
                let mut s2 = 0.0;
                for c in 0..nc {
                    let dv = field.component(c)[i] - avg[c];
                    s2 += dv * dv;
                }
                osc += s2.sqrt();
            }
            best = best.max(osc / cells as f64);
        }
        side *= 2;
    }
    best
}
