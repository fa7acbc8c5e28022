use super::grid::{GridField, GridSpec};
use super::norms::holder_zygmund_seminorm;
use super::spectral::{convolve_nodes, spectral_partial, wrapped_kernel_spectrum};
use crate::error::{usage, Error, Result};
use crate::numeric::{gauss_legendre, loglog_slope, spread_ratio};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::OnceLock;

const PLATEAU: f64 = 0.25;

fn psi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step from 1 at `t <= 0` to 0 at `t >= 1`.
pub(crate) fn smooth_step(t: f64) -> f64 {
    let a = psi(1.0 - t);
    let b = psi(t);
    a / (a + b)
}

/// Derivative of [`smooth_step`].
pub(crate) fn smooth_step_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let (a, b) = (psi(1.0 - t), psi(t));
    let da = -a / ((1.0 - t) * (1.0 - t));
    let db = b / (t * t);
    (da * b - a * db) / ((a + b) * (a + b))
}

fn profile_with(r: f64, outer: f64) -> f64 {
    if r <= PLATEAU {
        1.0
    } else if r >= outer {
        0.0
    } else {
        smooth_step((r - PLATEAU) / (outer - PLATEAU))
    }
}

fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

fn profile_mass(d: usize, outer: f64) -> f64 {
    let (x, w) = gauss_legendre(64);
    let plateau = sphere_area(d) * PLATEAU.powi(d as i32) / d as f64;
    let half = 0.5 * (outer - PLATEAU);
    let mid = 0.5 * (outer + PLATEAU);
    let shell: f64 = x
        .iter()
        .zip(&w)
        .map(|(&t, &wt)| {
            let r = mid + half * t;
            wt * half * r.powi(d as i32 - 1) * profile_with(r, outer)
        })
        .sum();
    plateau + sphere_area(d) * shell
}

/// Outer radius at which the radial bump has unit mass.
fn outer_radius(d: usize) -> f64 {
    static CACHE: OnceLock<[f64; 3]> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut out = [0.0; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let (mut lo, mut hi) = (PLATEAU + 1e-9, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if profile_mass(k + 1, mid) < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            *slot = 0.5 * (lo + hi);
        }
        out
    })[d - 1]
}

/// The fixed even bump `chi`: radial, equal to 1 on `B(0, 1/4)`, smoothly
/// decreasing to 0 before the unit sphere, with unit integral.
pub fn chi(d: usize, r: f64) -> f64 {
    profile_with(r, outer_radius(d))
}

/// Radius of the support of `chi` in dimension `d`.
pub fn chi_support(d: usize) -> f64 {
    outer_radius(d)
}

/// Mollification at scale `epsilon`: `chi_eps(x) = eps^{-d} chi(x / eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MollifierSpec {
    pub epsilon: f64,
}

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return usage(format!("mollifier scale {epsilon} must be positive"));
        }
        Ok(Self { epsilon })
    }

    pub(crate) fn check(&self, spec: &GridSpec) -> Result<()> {
        if self.epsilon < 2.0 * spec.h() * (1.0 - 1e-12) {
            return Err(Error::Resolution(format!(
                "mollifier scale {} is below twice the grid spacing {}",
                self.epsilon,
                spec.h()
            )));
        }
        if self.epsilon * chi_support(spec.d) >= 0.5 * spec.l {
            return usage(format!("mollifier scale {} does not fit in the box", self.epsilon));
        }
        Ok(())
    }
}

/// Componentwise convolution with `chi_eps`. The sampled kernel is
/// renormalized to unit discrete mass.
pub fn mollify(v: &GridField, m: &MollifierSpec) -> Result<GridField> {
    let spec = v.spec;
    m.check(&spec)?;
    let d = spec.d;
    let eps = m.epsilon;
    let raw = |z: &[f64]| chi(d, z.iter().map(|c| c * c).sum::<f64>().sqrt() / eps);
    let mut kernel = wrapped_kernel_spectrum(&spec, raw);
    let total = kernel[0].re;
    kernel.iter_mut().for_each(|z| *z /= total);
    let len = spec.len();
    let mut values = Vec::with_capacity(v.ncomp * len);
    for c in 0..v.ncomp {
        values.extend(convolve_nodes(&spec, &kernel, v.component(c)));
    }
    v.with_values(v.ncomp, values)
}

/// All `k`-th order partial derivatives, taken spectrally.
pub fn derivatives(v: &GridField, k: usize) -> Result<GridField> {
    let mut cur = v.clone();
    for _ in 0..k {
        let d = cur.spec.d;
        let mut values = Vec::with_capacity(cur.ncomp * d * cur.spec.len());
        for c in 0..cur.ncomp {
            for j in 0..d {
                values.extend(spectral_partial(&cur, c, j));
            }
        }
        cur = cur.with_values(cur.ncomp * d, values)?;
    }
    Ok(cur)
}

/// Modulus of continuity `omega(delta) = max_{|h| <= delta} |f(x+h) - f(x)|`
/// over axis and diagonal grid shifts.
pub fn modulus_of_continuity(f: &GridField, delta: f64) -> f64 {
    let spec = f.spec;
    let d = spec.d;
    let n = spec.n as i64;
    let h = spec.h();
    let mut best: f64 = 0.0;
    for dir in shift_directions(d) {
        let dn = dir[..d].iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        let steps = ((delta / (h * dn)) + 1e-9).floor() as i64;
        for step in 1..=steps.min(n - 1) {
            for idx in 0..spec.len() {
                let ix = spec.unravel(idx);
                let mut jx = [0usize; 3];
                let mut ok = true;
                for a in 0..d {
                    let q = ix[a] as i64 + dir[a] * step;
                    if q < 0 || q >= n {
                        ok = false;
                        break;
                    }
                    jx[a] = q as usize;
                }
                if !ok {
                    continue;
                }
                let j = spec.ravel(&jx);
                let mut s2 = 0.0;
                for c in 0..f.ncomp {
                    let dv = f.component(c)[j] - f.component(c)[idx];
                    s2 += dv * dv;
                }
                best = best.max(s2.sqrt());
            }
        }
    }
    best
}

pub(crate) fn shift_directions(d: usize) -> Vec<[i64; 3]> {
    let mut dirs = Vec::new();
    let range = |k: usize| if k < d { -1..=1 } else { 0..=0 };
    for a in range(0) {
        for b in range(1) {
            for c in range(2) {
                let v = [a, b, c];
                if v.iter().find(|&&x| x != 0) == Some(&1) {
                    dirs.push(v);
                }
            }
        }
    }
    dirs
}

/// Rate diagnostics of `v_eps -> v` over a dyadic list of scales.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub epsilons: Vec<f64>,
    /// `||D^k v - D^k v_eps||_inf` over interior nodes.
    pub sup_error: Vec<f64>,
    /// `sup_error / eps^a`.
    pub holder_rate: Vec<f64>,
    /// `|D^k v - D^k v_eps|_{C^b} / eps^{a-b}`.
    pub cb_rate: Vec<f64>,
    /// `sup_error / omega_k(2 eps)`.
    pub modulus_rate: Vec<f64>,
    /// `||D^k v_eps||_inf eps / omega_{k-1}(2 eps)`, present for `k >= 1`.
    pub derivative_rate: Option<Vec<f64>>,
    pub holder_spread: f64,
    pub cb_spread: f64,
    pub modulus_spread: f64,
    pub derivative_spread: Option<f64>,
    /// Log-log slope of `sup_error` against `eps`.
    pub fitted_order: f64,
}

fn interior_max(f: &GridField, margin: f64) -> f64 {
    let spec = f.spec;
    let lim = 0.5 * spec.l - margin;
    let norms = f.pointwise_norms();
    let mut best: f64 = 0.0;
    for (i, &v) in norms.iter().enumerate() {
        let x = spec.point(i);
        if x[..spec.d].iter().all(|c| c.abs() <= lim && *c < 0.5 * spec.l - spec.h() - margin) {
            best = best.max(v);
        }
    }
    best
}

/// Mollification error rates with the `C^b` rate taken at `b = a / 2`.
pub fn mollification_rates(
    v: &GridField,
    m_list: &[MollifierSpec],
    a: f64,
    k: usize,
) -> Result<RateReport> {
    mollification_rates_with(v, m_list, a, 0.5 * a, k)
}

/// Mollification error rates for an explicit `b` in `(0, a)`.
///
/// Sup-type errors are measured on nodes at least one kernel radius away
/// from the box edge, so non-periodic data is not polluted by wrap-around.
pub fn mollification_rates_with(
    v: &GridField,
    m_list: &[MollifierSpec],
    a: f64,
    b: f64,
    k: usize,
) -> Result<RateReport> {
    if m_list.len() < 3 {
        return usage(format!("need at least 3 mollifier scales, got {}", m_list.len()));
    }
    if !(a > 0.0 && a <= 1.0) {
        return usage(format!("rate exponent a = {a} must lie in (0, 1]"));
    }
    if !(b > 0.0 && b < a) {
        return usage(format!("Hölder exponent b = {b} must lie in (0, a)"));
    }
    for w in m_list.windows(2) {
        let r = w[0].epsilon / w[1].epsilon;
        if !((r - 2.0).abs() < 1e-9 || (r - 0.5).abs() < 1e-9) {
            return usage("mollifier scales must form a dyadic sequence");
        }
    }
    let spec = v.spec;
    let dk = derivatives(v, k)?;
    let lower = if k >= 1 { Some(derivatives(v, k - 1)?) } else { None };
    let mut rep = RateReport {
        k,
        a,
        b,
        epsilons: Vec::new(),
        sup_error: Vec::new(),
        holder_rate: Vec::new(),
        cb_rate: Vec::new(),
        modulus_rate: Vec::new(),
        derivative_rate: lower.as_ref().map(|_| Vec::new()),
        holder_spread: 0.0,
        cb_spread: 0.0,
        modulus_spread: 0.0,
        derivative_spread: None,
        fitted_order: 0.0,
    };
    for m in m_list {
        let eps = m.epsilon;
        let dk_eps = derivatives(&mollify(v, m)?, k)?;
        let diff = dk.axpy(-1.0, &dk_eps)?;
        let margin = eps * chi_support(spec.d) + 2.0 * spec.h();
        let err = interior_max(&diff, margin);
        rep.epsilons.push(eps);
        rep.sup_error.push(err);
        rep.holder_rate.push(err / eps.powf(a));
        rep.cb_rate.push(holder_zygmund_seminorm(&diff, b)? / eps.powf(a - b));
        rep.modulus_rate.push(err / modulus_of_continuity(&dk, 2.0 * eps));
        if let (Some(low), Some(out)) = (&lower, rep.derivative_rate.as_mut()) {
            out.push(interior_max(&dk_eps, margin) * eps / modulus_of_continuity(low, 2.0 * eps));
        }
    }
    rep.holder_spread = spread_ratio(&rep.holder_rate);
    rep.cb_spread = spread_ratio(&rep.cb_rate);
    rep.modulus_spread = spread_ratio(&rep.modulus_rate);
    rep.derivative_spread = rep.derivative_rate.as_deref().map(spread_ratio);
    rep.fitted_order = loglog_slope(&rep.epsilons, &rep.sup_error);
    if !rep.fitted_order.is_finite() && rep.sup_error.iter().all(|&e| e == 0.0) {
        rep.fitted_order = f64::INFINITY;
    }
    if rep.sup_error.iter().any(|e| !e.is_finite()) {
        return Err(Error::Data("non-finite mollification error".into()));
    }
    Ok(rep)
}
