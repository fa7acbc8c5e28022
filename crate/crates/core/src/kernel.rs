//! Log/Riesz interaction kernels and admissible potentials.
//!
//! The kernel family is
//!
//! ```text
//! g(x) = |x|^{-s} / s      (s != 0)
//! g(x) = -log |x|          (s == 0)
//! ```
//!
//! for `-2 < s < d`. Fourier transforms use the convention
//! `f^(xi) = ∫ f(x) e^{-2 pi i xi.x} dx`, in which the symbol of `g` is
//! `c_ds (2 pi |xi|)^{s-d}` away from the origin.
//!
//! The normalizing constant comes from the Gamma-function formula for the
//! Riesz transform pair,
//!
//! ```text
//! g^(xi) = C |xi|^{s-d},   C = (1/s) pi^{s-d/2} Gamma((d-s)/2) / Gamma(s/2),
//! ```
//!
//! analytically continued to `-2 < s < 0` and to its `s -> 0` limit
//! `C = pi^{-d/2} Gamma(d/2) / 2`. Then `c_ds = (2 pi)^{d-s} C`.

use crate::error::{precondition, usage, Error, Result};
use crate::numeric::neumaier_sum;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Radii and frequencies below this are rejected.
pub const MIN_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RieszParams {
    pub d: usize,
    pub s: f64,
    pub c_ds: f64,
}

impl RieszParams {
    pub fn new(d: usize, s: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return usage(format!("dimension d = {d} outside the supported range 1 <= d <= 3"));
        }
        if !(s > -2.0 && s < d as f64) || !s.is_finite() {
            return usage(format!("exponent s = {s} violates -2 < s < d (d = {d})"));
        }
        let c_ds = (2.0 * PI).powf(d as f64 - s) * symbol_prefactor(d, s);
        Ok(Self { d, s, c_ds })
    }

    /// Prefactor `C` with `g^(xi) = C |xi|^{s-d}`.
    pub fn symbol_prefactor(&self) -> f64 {
        symbol_prefactor(self.d, self.s)
    }

    pub fn is_log(&self) -> bool {
        self.s == 0.0
    }

    /// `0 <= s < d`.
    pub fn is_singular(&self) -> bool {
        self.s >= 0.0
    }

    /// `g` as a function of the squared radius. No domain checks.
    #[inline]
    pub fn g_r2(&self, r2: f64) -> f64 {
        if self.s == 0.0 {
            -0.5 * r2.ln()
        } else {
            r2.powf(-0.5 * self.s) / self.s
        }
    }

    /// Scalar `c` with `grad g(z) = c z`, as a function of `|z|^2`.
    #[inline]
    pub fn grad_factor_r2(&self, r2: f64) -> f64 {
        -r2.powf(-0.5 * self.s - 1.0)
    }

    /// `z . grad g(z)` as a function of `|z|^2`; equals `-|z|^{-s}`.
    #[inline]
    pub fn radial_flux_r2(&self, r2: f64) -> f64 {
        -r2.powf(-0.5 * self.s)
    }

    /// `n`-th derivative of `t -> g(z + t u)` at `t = 0`, i.e.
    /// `grad^{(n)} g(z) : u^{(n)}`. Exact for every order by Taylor-mode
    /// propagation through `q(t) = |z + t u|^2`.
    pub fn directional_derivative(&self, z: &[f64], u: &[f64], n: usize) -> f64 {
        let a0: f64 = z.iter().map(|v| v * v).sum();
        let a1: f64 = 2.0 * z.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        let a2: f64 = u.iter().map(|v| v * v).sum();
        let a = [a0, a1, a2];
        let coef = |j: usize| if j <= 2 { a[j] } else { 0.0 };
        let mut c = vec![0.0; n + 1];
        if self.s == 0.0 {
            // l = log q, q l' = q'
            c[0] = a0.ln();
            for k in 1..=n {
                let mut acc = coef(k);
                for j in 1..k {
                    acc -= (j as f64 / k as f64) * c[j] * coef(k - j);
                }
                c[k] = acc / a0;
            }
            for v in c.iter_mut() {
                *v *= -0.5;
            }
        } else {
            // p = q^alpha, k a0 p_k = sum_j ((alpha + 1) j - k) a_j p_{k-j}
            let alpha = -0.5 * self.s;
            c[0] = a0.powf(alpha);
            for k in 1..=n {
                let mut acc = 0.0;
                for j in 1..=k.min(2) {
                    acc += ((alpha + 1.0) * j as f64 - k as f64) * coef(j) * c[k - j];
                }
                c[k] = acc / (k as f64 * a0);
            }
            for v in c.iter_mut() {
                *v /= self.s;
            }
        }
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        c[n] * fact
    }
}

impl fmt::Display for RieszParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(d = {}, s = {})", self.d, self.s)
    }
}

fn symbol_prefactor(d: usize, s: f64) -> f64 {
    let df = d as f64;
    if s == 0.0 {
        0.5 * PI.powf(-0.5 * df) * gamma(0.5 * df)
    } else {
        PI.powf(s - 0.5 * df) * gamma(0.5 * (df - s)) / (s * gamma(0.5 * s))
    }
}

/// `g(r)` for `r > 0`.
pub fn riesz_potential(params: &RieszParams, r: f64) -> Result<f64> {
    if !(r >= MIN_SCALE) {
        return Err(Error::Domain(format!(
            "radius {r} below {MIN_SCALE}: self-interaction is infinite"
        )));
    }
    Ok(params.g_r2(r * r))
}

/// `grad g(x) = -|x|^{-s-2} x` for `x != 0`.
pub fn riesz_gradient(params: &RieszParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.d {
        return usage(format!("point has {} coordinates, expected d = {}", x.len(), params.d));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if !(r2.sqrt() >= MIN_SCALE) {
        return Err(Error::Domain("gradient requested at the origin".into()));
    }
    let c = params.grad_factor_r2(r2);
    Ok(x.iter().map(|v| c * v).collect())
}

/// `g^(rho) = c_ds (2 pi rho)^{s-d}` for `rho > 0`.
pub fn riesz_fourier_symbol(params: &RieszParams, rho: f64) -> Result<f64> {
    if !(rho >= MIN_SCALE) {
        return Err(Error::Domain(format!(
            "frequency {rho} below {MIN_SCALE}: the zero mode is never evaluated"
        )));
    }
    Ok(params.c_ds * (2.0 * PI * rho).powf(params.s - params.d as f64))
}

/// Structural properties an admissible potential declares about itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PotentialTags {
    pub smooth_off_origin: bool,
    pub radial: bool,
    pub cpd: bool,
    pub symbol_nonincreasing: bool,
}

type Radial = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial interaction potential given by its profile and Fourier symbol.
#[derive(Clone)]
pub struct AdmissiblePotential {
    pub d: usize,
    pub name: String,
    profile: Radial,
    symbol: Radial,
    gradient: Radial,
    log_symbol: Option<Radial>,
    pub t_scale: f64,
    pub tags: PotentialTags,
}

impl fmt::Debug for AdmissiblePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdmissiblePotential")
            .field("d", &self.d)
            .field("name", &self.name)
            .field("t_scale", &self.t_scale)
            .field("tags", &self.tags)
            .finish()
    }
}

impl AdmissiblePotential {
    /// Potential from callbacks. `gradient` is the radial derivative `g'(r)`.
    pub fn from_fns(
        d: usize,
        name: impl Into<String>,
        profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64) -> f64 + Send + Sync + 'static,
        symbol: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tags: PotentialTags,
    ) -> Self {
        Self {
            d,
            name: name.into(),
            profile: Arc::new(profile),
            symbol: Arc::new(symbol),
            gradient: Arc::new(gradient),
            log_symbol: None,
            t_scale: 1.0,
            tags,
        }
    }

    pub fn riesz(params: RieszParams) -> Self {
        let p = params;
        let q = params;
        let w = params;
        Self::from_fns(
            params.d,
            format!("riesz{params}"),
            move |r| p.g_r2(r * r),
            move |r| q.grad_factor_r2(r * r) * r,
            move |rho| w.c_ds * (2.0 * PI * rho).powf(w.s - w.d as f64),
            PotentialTags {
                smooth_off_origin: true,
                radial: true,
                cpd: true,
                symbol_nonincreasing: true,
            },
        )
    }

    /// Potential with symbol `exp(-rho^2)`; its profile is
    /// `pi^{d/2} exp(-pi^2 r^2)`.
    pub fn gaussian(d: usize) -> Self {
        let c = PI.powf(0.5 * d as f64);
        Self::from_fns(
            d,
            "gaussian",
            move |r| c * (-PI * PI * r * r).exp(),
            move |r| -2.0 * PI * PI * r * c * (-PI * PI * r * r).exp(),
            |rho| (-rho * rho).exp(),
            PotentialTags {
                smooth_off_origin: true,
                radial: true,
                cpd: true,
                symbol_nonincreasing: true,
            },
        )
        .with_log_symbol(|rho| -rho * rho)
    }

    /// Attaches `log g^(rho)` for use where the symbol underflows.
    pub fn with_log_symbol(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.log_symbol = Some(Arc::new(f));
        self
    }

    pub fn with_t(mut self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return usage(format!("dilation t = {t} must be positive"));
        }
        self.t_scale = t;
        Ok(self)
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.profile)(r)
    }

    pub fn radial_derivative(&self, r: f64) -> f64 {
        (self.gradient)(r)
    }

    pub fn symbol(&self, rho: f64) -> f64 {
        (self.symbol)(rho)
    }

    /// Profile of `g_t(x) = g(x / t)`.
    pub fn eval_t(&self, r: f64) -> f64 {
        self.eval(r / self.t_scale)
    }

    /// Symbol of `g_t`: `t^d g^(t rho)`.
    pub fn symbol_t(&self, rho: f64) -> f64 {
        self.t_scale.powi(self.d as i32) * self.symbol(self.t_scale * rho)
    }

    /// `log` of the symbol of `g_t`.
    pub fn log_symbol_t(&self, rho: f64) -> f64 {
        let t = self.t_scale;
        let inner = match &self.log_symbol {
            Some(f) => f(t * rho),
            None => self.symbol(t * rho).ln(),
        };
        self.d as f64 * t.ln() + inner
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    /// Smallest normalized quadratic energy over the random zero-mass trials.
    pub cpd_min_energy: f64,
    pub cpd_ok: bool,
    pub symbol_nonnegative: bool,
    pub symbol_nonincreasing: bool,
    /// last/first of `r^2 g^(r)` over the grid.
    pub decay_trend: f64,
    /// last/first of `sqrt(g^(t r)) sup_{[r-1, r+1]} sigma`.
    pub sigma_trend: f64,
    /// Derivative variant, reported for `p < 2`.
    pub sigma_derivative_trend: Option<f64>,
}

/// Options for [`admissible_check`].
#[derive(Debug, Clone, Copy)]
pub struct CpdTrials {
    pub trials: usize,
    pub atoms: usize,
    pub tolerance: f64,
}

impl Default for CpdTrials {
    fn default() -> Self {
        Self { trials: 64, atoms: 12, tolerance: 1e-10 }
    }
}

/// Empirical admissibility diagnostics on a finite radial grid.
///
/// The conditional-positivity trial draws zero-mass signed atomic measures
/// in the unit ball. Kernels that are infinite at the origin get a
/// regularized self-energy `w_i^2 g(delta)` with `delta` a quarter of the
/// minimal atom spacing, i.e. each atom is treated as smeared at scale
/// `delta`.
pub fn admissible_check<R: Rng + ?Sized>(
    pot: &AdmissiblePotential,
    sigma: &dyn Fn(f64) -> f64,
    p: f64,
    grid: &[f64],
    trials: CpdTrials,
    rng: &mut R,
) -> Result<AdmissibilityReport> {
    if grid.is_empty() {
        return usage("empty frequency grid");
    }
    if grid.len() < 8 {
        return usage(format!("frequency grid has {} radii, need at least 8", grid.len()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] <= 0.0 {
        return precondition("frequency grid must be positive and strictly increasing");
    }
    if !(p >= 1.0) {
        return usage(format!("exponent p = {p} must lie in [1, inf]"));
    }

    let sym: Vec<f64> = grid.iter().map(|&r| pot.symbol(r)).collect();
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("symbol returned a non-finite value".into()));
    }
    let symbol_nonnegative = sym.iter().all(|&v| v >= 0.0);
    let symbol_nonincreasing = sym.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14));

    let decay: Vec<f64> = grid.iter().zip(&sym).map(|(r, g)| r * r * g).collect();
    let decay_trend = decay[decay.len() - 1] / decay[0];

    let sup_on = |f: &dyn Fn(f64) -> f64, r: f64| {
        let lo = (r - 1.0).max(MIN_SCALE);
        (0..=32)
            .map(|k| f(lo + (r + 1.0 - lo) * k as f64 / 32.0).abs())
            .fold(0.0, f64::max)
    };
    let shell = |r: f64| pot.symbol_t(r).max(0.0).sqrt();
    let first = grid[0];
    let last = grid[grid.len() - 1];
    let sigma_trend = (shell(last) * sup_on(sigma, last)) / (shell(first) * sup_on(sigma, first));
    let sigma_derivative_trend = if p < 2.0 {
        let dsig = |r: f64| {
            let h = 1e-5 * r.max(1.0);
            (sigma(r + h) - sigma((r - h).max(MIN_SCALE))) / (r + h - (r - h).max(MIN_SCALE))
        };
        let a = sup_on(&dsig, first).max(sup_on(sigma, first));
        let b = sup_on(&dsig, last).max(sup_on(sigma, last));
        Some((shell(last) * b) / (shell(first) * a))
    } else {
        None
    };

    let d = pot.d;
    let mut cpd_min = f64::INFINITY;
    for _ in 0..trials.trials {
        let m = trials.atoms;
        let mut pts = vec![0.0f64; m * d];
        for v in pts.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut w: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let mean = w.iter().sum::<f64>() / m as f64;
        w.iter_mut().for_each(|x| *x -= mean);
        let scale: f64 = w.iter().map(|x| x * x).sum();
        let dist = |i: usize, j: usize| -> f64 {
            (0..d).map(|k| (pts[i * d + k] - pts[j * d + k]).powi(2)).sum::<f64>().sqrt()
        };
        let mut min_sep = f64::INFINITY;
        for i in 0..m {
            for j in 0..i {
                min_sep = min_sep.min(dist(i, j));
            }
        }
        let g0 = pot.eval(0.0);
        let self_value = if g0.is_finite() { g0 } else { pot.eval(0.25 * min_sep) };
        let mut terms = Vec::with_capacity(m * m);
        for i in 0..m {
            terms.push(w[i] * w[i] * self_value);
            for j in 0..i {
                terms.push(2.0 * w[i] * w[j] * pot.eval(dist(i, j)));
            }
        }
        let e = neumaier_sum(terms) / scale;
        cpd_min = cpd_min.min(e);
    }

    Ok(AdmissibilityReport {
        cpd_min_energy: cpd_min,
        cpd_ok: cpd_min >= -trials.tolerance,
        symbol_nonnegative,
        symbol_nonincreasing,
        decay_trend,
        sigma_trend,
        sigma_derivative_trend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(d: usize, s: f64) -> RieszParams {
        RieszParams::new(d, s).unwrap()
    }

    #[test]
    fn potential_examples() {
        assert!((riesz_potential(&p(3, 1.0), 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(riesz_potential(&p(1, 0.0), 1.0).unwrap(), 0.0);
        assert!((riesz_potential(&p(2, -1.0), 4.0).unwrap() + 4.0).abs() < 1e-15);
    }

    #[test]
    fn potential_rejects_nonpositive_radius() {
        assert!(matches!(riesz_potential(&p(1, 0.5), 0.0), Err(Error::Domain(_))));
        assert!(matches!(riesz_potential(&p(1, 0.5), 1e-13), Err(Error::Domain(_))));
        assert!(matches!(riesz_gradient(&p(2, 0.5), &[0.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(riesz_fourier_symbol(&p(2, 0.5), 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn params_reject_out_of_range() {
        assert!(RieszParams::new(2, 2.0).unwrap_err().is_usage());
        assert!(RieszParams::new(2, -2.0).unwrap_err().is_usage());
        assert!(RieszParams::new(4, 1.0).unwrap_err().is_usage());
    }

    #[test]
    fn gradient_examples() {
        let g = riesz_gradient(&p(2, 0.0), &[1.0, 0.0]).unwrap();
        assert_eq!(g, vec![-1.0, 0.0]);
    }

    #[test]
    fn coulomb_and_log_constants() {
        // 1/|x| in d = 3 has symbol 1/(pi |xi|^2).
        assert!((p(3, 1.0).symbol_prefactor() - 1.0 / PI).abs() < 1e-14);
        // -log|x| in d = 1 has symbol 1/(2|xi|).
        assert!((p(1, 0.0).symbol_prefactor() - 0.5).abs() < 1e-14);
        // -|x| in d = 1 has symbol 1/(2 pi^2 xi^2).
        assert!((p(1, -1.0).symbol_prefactor() - 0.5 / (PI * PI)).abs() < 1e-14);
        // -log|x| in d = 2 is 2 pi times the Newtonian kernel.
        assert!((p(2, 0.0).c_ds - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn constants_stay_positive_on_the_continuation() {
        for d in 1..=3 {
            let mut s = -1.95;
            while s < d as f64 {
                assert!(p(d, s).c_ds > 0.0, "d={d} s={s}");
                s += 0.05;
            }
        }
    }

    #[test]
    fn log_constant_is_the_limit() {
        for d in 1..=3 {
            let c0 = p(d, 0.0).symbol_prefactor();
            let cp = p(d, 1e-7).symbol_prefactor();
            let cm = p(d, -1e-7).symbol_prefactor();
            assert!((cp - c0).abs() < 1e-6 * c0 && (cm - c0).abs() < 1e-6 * c0);
        }
    }

    #[test]
    fn directional_derivatives_match_closed_forms() {
        let q = p(3, 0.7);
        let z = [0.3, -0.2, 0.5];
        let u = [0.1, 0.4, -0.3];
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let g0 = q.directional_derivative(&z, &u, 0);
        assert!((g0 - q.g_r2(r2)).abs() < 1e-14);
        let grad = riesz_gradient(&q, &z).unwrap();
        let g1 = q.directional_derivative(&z, &u, 1);
        let dot: f64 = grad.iter().zip(&u).map(|(a, b)| a * b).sum();
        assert!((g1 - dot).abs() < 1e-13);
        // Hessian of r^{-s}/s: -r^{-s-2}(I - (s+2) z z^T / r^2).
        let rs = r2.powf(-0.5 * q.s - 1.0);
        let zu: f64 = z.iter().zip(&u).map(|(a, b)| a * b).sum();
        let uu: f64 = u.iter().map(|v| v * v).sum();
        let h = -rs * (uu - (q.s + 2.0) * zu * zu / r2);
        let g2 = q.directional_derivative(&z, &u, 2);
        assert!((g2 - h).abs() < 1e-12 * h.abs().max(1.0));
    }

    #[test]
    fn log_directional_derivatives_match_finite_differences() {
        let q = p(2, 0.0);
        let z = [0.4, 0.1];
        let u = [0.2, -0.3];
        let f = |t: f64| q.g_r2((z[0] + t * u[0]).powi(2) + (z[1] + t * u[1]).powi(2));
        let h = 1e-3;
        let fd3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h);
        let g3 = q.directional_derivative(&z, &u, 3);
        assert!((g3 - fd3).abs() < 1e-4 * g3.abs());
    }

    #[test]
    fn gaussian_profile_matches_symbol_normalization() {
        // g(0) = ∫ g^ dxi.
        let pot = AdmissiblePotential::gaussian(1);
        assert!((pot.eval(0.0) - PI.sqrt()).abs() < 1e-14);
        let t = pot.clone().with_t(2.0).unwrap();
        assert!((t.symbol_t(1.5) - 2.0 * (-9.0f64).exp()).abs() < 1e-15);
    }
}
