use super::modulated::EnergyReport;
use super::particles::{dist, ParticleConfig};
use super::quadrature::{pair_sum, EnergyContext};
use crate::error::{usage, Result};
use crate::fields::{GridMeasure, GridSpec};
use crate::kernel::RieszParams;
use crate::numeric::{gauss_legendre, Neumaier};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// Upper frequency of the one-dimensional spectral energy quadrature.
const SPECTRAL_CUTOFF: f64 = 1.0e4;
const PANEL: f64 = 0.1;
const PANEL_ORDER: usize = 8;
/// Geometric refinement levels of the first panel.
const FIRST_PANEL_LEVELS: usize = 40;

#[inline]
fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - (PI * t).powi(2) / 6.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// Fourier transform (`e^{-2 pi i xi x}`) of the piecewise-constant density
/// of a one-dimensional measure, at a single frequency.
fn density_transform_1d(spec: &GridSpec, weights: &[f64], lo: usize, hi: usize, xi: f64) -> Complex64 {
    let h = spec.h();
    let step = Complex64::from_polar(1.0, -2.0 * PI * xi * h);
    let mut ph = Complex64::from_polar(1.0, -2.0 * PI * xi * spec.coord(lo));
    let mut acc = Complex64::new(0.0, 0.0);
    for &w in &weights[lo..=hi] {
        acc += w * ph;
        ph *= step;
    }
    acc * sinc(xi * h)
}

fn empirical_transform(x: &ParticleConfig, xi: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..x.len() {
        let phase: f64 = x.point(i).iter().zip(xi).map(|(a, b)| a * b).sum();
        acc += Complex64::from_polar(1.0, -2.0 * PI * phase);
    }
    acc / x.len() as f64
}

/// Quadrature nodes covering `[0, K]`: the first panel refined
/// geometrically towards the origin, uniform panels afterwards.
fn frequency_rule() -> Vec<(f64, f64)> {
    let (gx, gw) = gauss_legendre(PANEL_ORDER);
    let mut edges = vec![0.0];
    for k in (0..FIRST_PANEL_LEVELS).rev() {
        edges.push(PANEL * 0.5f64.powi(k as i32));
    }
    let panels = (SPECTRAL_CUTOFF / PANEL).round() as usize;
    for k in 2..=panels {
        edges.push(k as f64 * PANEL);
    }
    let mut out = Vec::with_capacity(edges.len() * PANEL_ORDER);
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (x, w) in gx.iter().zip(&gw) {
            out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
        }
    }
    out
}

/// `||mu_N - mu||^2` in `H^{-s'}`-type norms computed in Fourier space.
#[derive(Debug, Clone, Serialize)]
pub struct MmdIdentity {
    /// `∫ |2 pi xi|^{s-d} |mu_N^ - mu^|^2 dxi`.
    pub homogeneous_norm2: f64,
    /// `(c_ds / 2) * homogeneous_norm2`, the energy seen from Fourier space.
    pub spectral_energy: f64,
    /// `|F_N - spectral_energy| / |F_N|`.
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub r: f64,
    #[serde(rename = "F_N")]
    pub f_n: f64,
    /// `||mu_N - mu||^2_{H^{-r/2}}` on the grid frequency lattice.
    pub h_neg_norm2: f64,
    pub lambda: f64,
    pub mu_lp: f64,
    pub p: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub d: usize,
    /// Whether the length scale satisfies `lambda <= 1`.
    pub lambda_ok: bool,
    /// Present for `-2 < s < 0`, `d = 1`.
    pub mmd: Option<MmdIdentity>,
}

impl CoercivityReport {
    /// The small-scale correction in the singular bound with constant `c`.
    fn correction(&self, g_lambda: f64, c: f64) -> f64 {
        let nf = self.n as f64;
        let tail = c * self.mu_lp * self.lambda.powf(lambda_power(self.d, self.p, self.s));
        if self.s == 0.0 {
            (g_lambda + c) / (2.0 * nf) + tail
        } else {
            c * g_lambda / (2.0 * nf) + tail
        }
    }

    /// Right-hand side of the singular coercivity bound with constant `c`
    /// (`None` when `s < 0`).
    pub fn coer1_rhs(&self, c: f64) -> Option<f64> {
        if self.s < 0.0 {
            return None;
        }
        let params = RieszParams::new(self.d, self.s).ok()?;
        let g_lambda = params.g_r2(self.lambda * self.lambda);
        Some(c * (self.f_n + self.correction(g_lambda, c)))
    }
}

fn lambda_power(d: usize, p: f64, s: f64) -> f64 {
    if p.is_infinite() {
        d as f64 - s
    } else {
        d as f64 * (p - 1.0) / p - s
    }
}

/// `sum_xi (1 + |xi|^2)^{-r/2} |mu_N^ - mu^|^2 / L^d` over the lattice of grid
/// frequencies, with `mu` read as a piecewise-constant density.
fn lattice_negative_norm(x: &ParticleConfig, mu: &GridMeasure, r: f64) -> f64 {
    let spec = *mu.spec();
    let d = spec.d;
    let n = spec.n;
    let h = spec.h();
    let hat = mu.density.spectrum();
    let cell = spec.cell();
    // Per-particle, per-axis phasors e^{-2 pi i xi_m x_k}.
    let phasors: Vec<Vec<Complex64>> = (0..x.len())
        .map(|i| {
            let p = x.point(i);
            let mut out = Vec::with_capacity(d * n);
            for &c in p.iter().take(d) {
                for m in 0..n {
                    out.push(Complex64::from_polar(1.0, -2.0 * PI * spec.freq(m) * c));
                }
            }
            out
        })
        .collect();
    let nf = x.len() as f64;
    let terms: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let ix = spec.unravel(idx);
            let xi = spec.xi(idx);
            let mut factor = Complex64::new(cell, 0.0);
            for k in 0..d {
                let sign = if spec.signed_index(ix[k]).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                factor *= sign * sinc(xi[k] * h);
            }
            let m_hat = hat[idx] * factor;
            let mut e = Complex64::new(0.0, 0.0);
            for ph in &phasors {
                let mut z = Complex64::new(1.0, 0.0);
                for k in 0..d {
                    z *= ph[k * n + ix[k]];
                }
                e += z;
            }
            let diff = e / nf - m_hat;
            let xi2: f64 = xi[..d].iter().map(|v| v * v).sum();
            (1.0 + xi2).powf(-0.5 * r) * diff.norm_sqr()
        })
        .collect();
    let mut acc = Neumaier::new();
    terms.into_iter().for_each(|t| acc.add(t));
    acc.total() / spec.l.powi(d as i32)
}

/// `∫ |2 pi xi|^{s-1} |mu_N^ - mu^|^2 dxi` on the line.
fn spectral_homogeneous_norm_1d(x: &ParticleConfig, mu: &GridMeasure, s: f64) -> f64 {
    let spec = *mu.spec();
    let weights = mu.weights();
    let lo = weights.iter().position(|&w| w != 0.0).unwrap_or(0);
    let hi = weights.iter().rposition(|&w| w != 0.0).unwrap_or(0);
    let rule = frequency_rule();
    let parts: Vec<f64> = rule
        .par_chunks(4096)
        .map(|chunk| {
            let mut acc = Neumaier::new();
            for &(xi, w) in chunk {
                let diff = empirical_transform(x, &[xi]) - density_transform_1d(&spec, &weights, lo, hi, xi);
                acc.add(w * (2.0 * PI * xi).powf(s - 1.0) * diff.norm_sqr());
            }
            acc.total()
        })
        .collect();
    let mut acc = Neumaier::new();
    parts.into_iter().for_each(|t| acc.add(t));
    // Beyond the cutoff |mu_N^ - mu^|^2 averages to 1/N.
    let k = SPECTRAL_CUTOFF;
    let tail = (2.0 * PI).powf(s - 1.0) * k.powf(s) / (-s) / x.len() as f64;
    2.0 * (acc.total() + tail)
}

/// Coercivity diagnostics for the modulated energy.
pub fn coercivity_report(
    x: &ParticleConfig,
    mu: &GridMeasure,
    r: f64,
    params: RieszParams,
) -> Result<CoercivityReport> {
    let d = params.d;
    if !(r > d as f64) {
        return usage(format!("Sobolev index r = {r} must exceed d = {d}"));
    }
    let ctx = EnergyContext::new(mu, params)?;
    let rep = ctx.energy(x)?;
    let h_neg_norm2 = lattice_negative_norm(x, mu, r);
    let mmd = (params.s < 0.0 && d == 1).then(|| {
        let norm2 = spectral_homogeneous_norm_1d(x, mu, params.s);
        let spectral_energy = 0.5 * params.c_ds * norm2;
        MmdIdentity {
            homogeneous_norm2: norm2,
            spectral_energy,
            rel_error: (rep.f_n - spectral_energy).abs() / rep.f_n.abs(),
        }
    });
    Ok(CoercivityReport {
        r,
        f_n: rep.f_n,
        h_neg_norm2,
        lambda: rep.lambda,
        mu_lp: ctx.mu_lp,
        p: ctx.p,
        n: rep.n,
        s: params.s,
        d,
        lambda_ok: rep.lambda <= 1.0,
        mmd,
    })
}

/// Both sides of the small-scale interaction bounds at scale `eta`.
#[derive(Debug, Clone, Serialize)]
pub struct SmallScaleReport {
    pub eta: f64,
    #[serde(rename = "F_N")]
    pub f_n: f64,
    pub lambda: f64,
    /// `(1/2N^2) sum_i g(4 r_i)`, or `g(4 r_i / eta)` when `s = 0`.
    pub nn_sum: f64,
    /// `(1/2N^2) sum_{i != j, |x_i - x_j| <= eta} |x_i - x_j|^{-s}`, or
    /// `-log(|x_i - x_j| / eta)` when `s = 0`; divide by `C` for the bound.
    pub close_pair_sum: f64,
    pub close_pairs: usize,
    #[serde(rename = "N")]
    pub n: usize,
    s: f64,
    d: usize,
    mu_lp: f64,
    p: f64,
    g_eta: f64,
}

impl SmallScaleReport {
    /// Left-hand side shared by both bounds, with constant `c`.
    pub fn lhs(&self, c: f64) -> f64 {
        let nf = self.n as f64;
        let corr = if self.s == 0.0 {
            (self.g_eta + c) / (2.0 * nf)
        } else {
            c * self.g_eta / (2.0 * nf)
        };
        self.f_n + corr + c * self.mu_lp * self.eta.powf(lambda_power(self.d, self.p, self.s))
    }

    /// Whether the nearest-neighbour and close-pair bounds hold with `c`.
    pub fn holds(&self, c: f64) -> (bool, bool) {
        let lhs = self.lhs(c);
        (lhs >= self.nn_sum, lhs >= self.close_pair_sum / c)
    }
}

/// Small-scale interaction diagnostics for `0 <= s < d`, `eta <= lambda`.
pub fn smallscale_report(
    x: &ParticleConfig,
    mu: &GridMeasure,
    eta: f64,
    params: RieszParams,
) -> Result<SmallScaleReport> {
    if params.s < 0.0 {
        return usage("small-scale bounds need s >= 0");
    }
    let ctx = EnergyContext::new(mu, params)?;
    let rep: EnergyReport = ctx.energy(x)?;
    if !(eta > 0.0 && eta <= rep.lambda) {
        return usage(format!("eta = {eta} must lie in (0, lambda = {}]", rep.lambda));
    }
    let nf = x.len() as f64;
    let log = params.is_log();
    let nn = rep.r.iter().map(|&r| {
        let t = if log { 4.0 * r / eta } else { 4.0 * r };
        params.g_r2(t * t)
    });
    let nn_sum = crate::numeric::neumaier_sum(nn) / (2.0 * nf * nf);
    let count = pair_sum(x, |i, j| f64::from(u8::from(dist(x.point(i), x.point(j)) <= eta)));
    let close = pair_sum(x, |i, j| {
        let r = dist(x.point(i), x.point(j));
        if r > eta {
            0.0
        } else if log {
            -(r / eta).ln()
        } else {
            r.powf(-params.s)
        }
    });
    Ok(SmallScaleReport {
        eta,
        f_n: rep.f_n,
        lambda: rep.lambda,
        nn_sum,
        close_pair_sum: close / (2.0 * nf * nf),
        close_pairs: count as usize,
        n: x.len(),
        s: params.s,
        d: params.d,
        mu_lp: ctx.mu_lp,
        p: ctx.p,
        g_eta: params.g_r2(eta * eta),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub lhs: f64,
    pub rhs_shape: f64,
    pub ratio: f64,
    #[serde(rename = "F_N")]
    pub f_n: f64,
}

/// `∫ |x - x0|^r d(mu_N - mu)` against `(1 + ||mu||_1)^{1 - 2r/|s|} F_N^{r/|s|}`.
pub fn moment_bound(
    x: &ParticleConfig,
    mu: &GridMeasure,
    r: f64,
    x0: &[f64],
    params: RieszParams,
) -> Result<MomentReport> {
    let s = params.s;
    if !(s > -2.0 && s < 0.0) {
        return usage(format!("moment control needs -2 < s < 0, got {s}"));
    }
    let a = s.abs();
    if !(r > 0.0 && r < 0.5 * a) {
        return usage(format!("moment order r = {r} must lie in (0, |s|/2 = {})", 0.5 * a));
    }
    if x0.len() != params.d {
        return usage("base point has the wrong dimension");
    }
    let rep = EnergyContext::new(mu, params)?.energy(x)?;
    let emp = crate::numeric::neumaier_sum((0..x.len()).map(|i| dist(x.point(i), x0).powf(r)))
        / x.len() as f64;
    let lhs = emp - mu.moment(x0, r);
    let l1 = mu.lp_norm(1.0);
    let rhs_shape = (1.0 + l1).powf(1.0 - 2.0 * r / a) * rep.f_n.max(0.0).powf(r / a);
    Ok(MomentReport { lhs, rhs_shape, ratio: lhs / rhs_shape, f_n: rep.f_n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_is_smooth_at_zero() {
        assert!((sinc(1e-9) - 1.0).abs() < 1e-15);
        assert!((sinc(0.5) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn frequency_rule_integrates_polynomials() {
        let rule = frequency_rule();
        let total = crate::numeric::neumaier_sum(rule.iter().map(|(_, w)| *w));
        assert!((total - SPECTRAL_CUTOFF).abs() < 1e-8);
        let sq: f64 = rule.iter().filter(|(x, _)| *x < 1.0).map(|(x, w)| x.sqrt() * w).sum();
        assert!((sq - 2.0 / 3.0).abs() < 1e-6);
    }
}
