use super::RatioReport;
use crate::error::{usage, Error, Result};
use crate::fields::spectral::fft_nd;
use crate::fields::{lp_norm, smooth_step, GridField, GridSpec};
use crate::kernel::AdmissiblePotential;
use crate::numeric::Neumaier;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Radial profile of the shell bumps: 1 on `|xi| <= 1/8`, 0 for `|xi| >= 1/4`.
pub fn phi_hat(rho: f64) -> f64 {
    smooth_step(8.0 * rho - 1.0)
}

fn shifted(xi: &[f64], shift: f64) -> f64 {
    let r2: f64 = xi.iter().enumerate().map(|(j, &c)| if j == 0 { (c + shift).powi(2) } else { c * c }).sum();
    phi_hat(r2.sqrt())
}

/// Which of the three shell functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shell {
    /// First component of `v`, at frequency `k`.
    V,
    /// `f`, at frequency `k + 1`.
    F,
    /// `g`, at frequency `1`.
    G,
}

/// Frequency-shell data `v`, `f`, `g` for a potential and dilation `t`.
#[derive(Debug, Clone)]
pub struct Cef2Instance {
    pub pot: AdmissiblePotential,
    pub t: f64,
    pub k: f64,
    pub spec: GridSpec,
    pub v: GridField,
    pub f: GridField,
    pub g: GridField,
}

impl Cef2Instance {
    /// One-dimensional instance on `L = 32`, `n = 4096`.
    pub fn new(pot: AdmissiblePotential, t: f64, k: f64) -> Result<Self> {
        let spec = GridSpec::new(pot.d, 4096, 32.0)?;
        Self::on_grid(pot, t, k, spec)
    }

    pub fn on_grid(pot: AdmissiblePotential, t: f64, k: f64, spec: GridSpec) -> Result<Self> {
        if !(k > 2.0) || !k.is_finite() {
            return usage(format!("shell frequency k = {k} must exceed 2"));
        }
        if spec.d != pot.d {
            return usage("grid and potential dimensions differ");
        }
        let pot = pot.with_t(t)?;
        let top_bin = (k + 1.25) * spec.l;
        if top_bin + 2.0 >= (spec.n / 2) as f64 {
            return Err(Error::Resolution(format!(
                "shell reaches bin {top_bin:.0}, within 2 bins of Nyquist {}",
                spec.n / 2
            )));
        }
        let mut inst = Self {
            pot,
            t,
            k,
            spec,
            v: GridField::zeros(spec, spec.d),
            f: GridField::zeros(spec, 1),
            g: GridField::zeros(spec, 1),
        };
        let len = spec.len();
        let mut v = vec![0.0; spec.d * len];
        v[..len].copy_from_slice(&inst.physical(|xi| inst.spectrum(Shell::V, xi))?);
        inst.v = GridField::from_values(spec, spec.d, v)?;
        inst.f = GridField::from_values(spec, 1, inst.physical(|xi| inst.spectrum(Shell::F, xi))?)?;
        inst.g = GridField::from_values(spec, 1, inst.physical(|xi| inst.spectrum(Shell::G, xi))?)?;
        Ok(inst)
    }

    /// Continuous Fourier transform of a shell function at `xi`.
    pub fn spectrum(&self, which: Shell, xi: &[f64]) -> Complex64 {
        let k = self.k;
        match which {
            Shell::V => Complex64::new(0.0, shifted(xi, k) - shifted(xi, -k)),
            Shell::F => Complex64::new(shifted(xi, k + 1.0) + shifted(xi, -(k + 1.0)), 0.0),
            Shell::G => Complex64::new(shifted(xi, 1.0) + shifted(xi, -1.0), 0.0),
        }
    }

    /// Node values of the function with continuous transform `s(xi)`,
    /// by a truncated inverse Fourier sum.
    fn physical(&self, s: impl Fn(&[f64]) -> Complex64) -> Result<Vec<f64>> {
        let spec = self.spec;
        let d = spec.d;
        let mut data: Vec<Complex64> = (0..spec.len())
            .map(|i| {
                let ix = spec.unravel(i);
                let parity: usize = ix[..d].iter().sum();
                let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
                s(&spec.xi(i)[..d]) * sign
            })
            .collect();
        fft_nd(&spec, &mut data, true);
        let scale = 1.0 / spec.cell();
        let top = data.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let imag = data.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if imag > 1e-12 * top.max(f64::MIN_POSITIVE) {
            return Err(Error::Data(format!("non-Hermitian spectrum: imaginary residue {imag:.3e}")));
        }
        Ok(data.into_iter().map(|z| z.re * scale).collect())
    }

    /// `log ||w||_{g_t}` from the continuous transform of a shell function.
    pub fn log_energy_norm(&self, which: Shell) -> f64 {
        let spec = self.spec;
        let d = spec.d;
        let terms: Vec<f64> = (1..spec.len())
            .filter_map(|i| {
                let xi = spec.xi(i);
                let a = self.spectrum(which, &xi[..d]).norm_sqr();
                if a == 0.0 {
                    return None;
                }
                let rho = xi[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
                Some(self.pot.log_symbol_t(rho) + a.ln())
            })
            .collect();
        0.5 * (log_sum_exp(&terms) - d as f64 * spec.l.ln())
    }

    /// `∫ w1 (d_1 g * w2) w3` with `d_1 g *` applied as `2 pi i xi_1 g^(xi)`.
    fn transport_integral(&self, w2: Shell, w3: &GridField) -> Result<f64> {
        let spec = self.spec;
        let d = spec.d;
        let conv = self.physical(|xi| {
            let rho = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
            if rho == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            self.spectrum(w2, xi) * Complex64::new(0.0, 2.0 * PI * xi[0] * self.pot.symbol(rho))
        })?;
        let _ = d;
        let v1 = self.v.component(0);
        let mut acc = Neumaier::new();
        for i in 0..spec.len() {
            acc.add(v1[i] * conv[i] * w3.values()[i]);
        }
        Ok(acc.total() * spec.cell())
    }

    /// `||grad v||_inf` from the spectral derivatives of `v_1`.
    pub fn grad_v_inf(&self) -> Result<f64> {
        let spec = self.spec;
        let d = spec.d;
        let mut norms2 = vec![0.0; spec.len()];
        for j in 0..d {
            let dj = self.physical(|xi| {
                self.spectrum(Shell::V, xi) * Complex64::new(0.0, 2.0 * PI * xi[j])
            })?;
            norms2.iter_mut().zip(dj).for_each(|(n, x)| *n += x * x);
        }
        Ok(norms2.into_iter().fold(0.0, f64::max).sqrt())
    }

    /// `log || sigma(|D|) v ||_{L^p}` for `sigma = exp(log_sigma)`.
    pub fn log_sigma_norm(&self, log_sigma: &dyn Fn(f64) -> f64, p: f64) -> Result<f64> {
        let spec = self.spec;
        let d = spec.d;
        let rho_of = |xi: &[f64]| xi.iter().map(|c| c * c).sum::<f64>().sqrt();
        let top = (0..spec.len())
            .filter(|&i| self.spectrum(Shell::V, &spec.xi(i)[..d]).norm_sqr() > 0.0)
            .map(|i| log_sigma(rho_of(&spec.xi(i)[..d])))
            .fold(f64::NEG_INFINITY, f64::max);
        let scaled = self.physical(|xi| {
            let s = self.spectrum(Shell::V, xi);
            if s.norm_sqr() == 0.0 {
                s
            } else {
                s * (log_sigma(rho_of(xi)) - top).exp()
            }
        })?;
        let len = spec.len();
        let mut values = vec![0.0; d * len];
        values[..len].copy_from_slice(&scaled);
        let field = GridField::from_values(spec, d, values)?;
        Ok(top + lp_norm(&field, p).ln())
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if !m.is_finite() {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Commutator of the shell data against `(||grad v||_inf + ||sigma(|D|) v||_{L^p})
/// ||f||_{g_t} ||g||_{g_t}`, where `log_sigma` is `log sigma(|xi|)`.
///
/// Norms are combined in log space so that rapidly decaying symbols do not
/// underflow; `diagnostics["log_ratio"]` carries the exact logarithm.
pub fn cef2_ratio(inst: &Cef2Instance, log_sigma: &dyn Fn(f64) -> f64, p: f64) -> Result<RatioReport> {
    if !(p >= 1.0) {
        return usage(format!("exponent p = {p} must lie in [1, inf]"));
    }
    let off_resonant = inst.transport_integral(Shell::F, &inst.g)?;
    let resonant = inst.transport_integral(Shell::G, &inst.f)?;
    let numerator = off_resonant + resonant;
    let grad_v_inf = inst.grad_v_inf()?;
    let log_sigma_norm = inst.log_sigma_norm(log_sigma, p)?;
    let log_f = inst.log_energy_norm(Shell::F);
    let log_g = inst.log_energy_norm(Shell::G);
    let log_denominator = log_add_exp(grad_v_inf.ln(), log_sigma_norm) + log_f + log_g;
    if !log_denominator.is_finite() {
        return Err(Error::Degenerate(format!("log denominator {log_denominator} is not finite")));
    }
    let log_ratio = numerator.abs().ln() - log_denominator;
    let k = inst.k;
    let diagnostics = BTreeMap::from([
        ("k_ghat_k".to_string(), k * inst.pot.symbol(k)),
        ("ghat_2".to_string(), inst.pot.symbol(2.0)),
        ("grad_v_inf".to_string(), grad_v_inf),
        ("log_sigma_norm".to_string(), log_sigma_norm),
        ("log_f_norm".to_string(), log_f),
        ("log_g_norm".to_string(), log_g),
        ("log_denominator".to_string(), log_denominator),
        ("log_ratio".to_string(), log_ratio),
    ]);
    Ok(RatioReport {
        scale: k,
        numerator,
        denominator: log_denominator.exp(),
        ratio: log_ratio.exp(),
        resonant,
        off_resonant,
        diagnostics,
    })
}

/// Regularity scales for `sigma`, applied to `|xi|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CorollaryVariant {
    /// `sigma = rho^{a/2}` in `L^{2d/(a-2)}`.
    Power { a: f64 },
    /// `sigma = (1 + rho^2)^{n/2}` in `L^1`.
    Bessel { n: f64 },
    /// `sigma = exp(b rho^m)` in `L^1`, for symbols bounded by `exp(-c rho^m)`.
    Exp { b: f64, m: f64, c: f64 },
}

impl CorollaryVariant {
    pub fn log_sigma(&self, rho: f64) -> f64 {
        match *self {
            Self::Power { a } => 0.5 * a * rho.ln(),
            Self::Bessel { n } => 0.5 * n * (1.0 + rho * rho).ln(),
            Self::Exp { b, m, .. } => b * rho.powf(m),
        }
    }

    pub fn exponent(&self, d: usize) -> Result<f64> {
        match *self {
            Self::Power { a } => {
                let p = 2.0 * d as f64 / (a - 2.0);
                if !(a > 2.0) || p < 1.0 {
                    return usage(format!("power variant needs 2 < a <= 2 + 2d, got a = {a}"));
                }
                Ok(p)
            }
            _ => Ok(1.0),
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        if let Self::Exp { b, m, c } = *self {
            if !(m > 0.0 && c > 0.0) {
                return usage(format!("exp variant needs m, c > 0, got m = {m}, c = {c}"));
            }
            let limit = 0.5 * c * t.powf(m);
            if b >= limit {
                return usage(format!("exp variant needs b < c t^m / 2 = {limit}, got b = {b}"));
            }
        }
        Ok(())
    }
}

/// [`cef2_ratio`] with the multiplier and exponent of a regularity scale.
pub fn corollary_variants(inst: &Cef2Instance, variant: &CorollaryVariant) -> Result<RatioReport> {
    variant.check(inst.t)?;
    let p = variant.exponent(inst.spec.d)?;
    cef2_ratio(inst, &|rho| variant.log_sigma(rho), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::RieszParams;

    fn riesz() -> AdmissiblePotential {
        AdmissiblePotential::riesz(RieszParams::new(1, -1.5).unwrap())
    }

    #[test]
    fn shell_fields_match_closed_forms() {
        let inst = Cef2Instance::new(riesz(), 1.0, 5.0).unwrap();
        let spec = inst.spec;
        let phi = inst.physical(|xi| Complex64::new(phi_hat(xi[0].abs()), 0.0)).unwrap();
        for i in (0..spec.n).step_by(97) {
            let x = spec.coord(i);
            let v = 2.0 * phi[i] * (2.0 * PI * 5.0 * x).sin();
            let f = 2.0 * phi[i] * (2.0 * PI * 6.0 * x).cos();
            assert!((inst.v.values()[i] - v).abs() < 1e-12);
            assert!((inst.f.values()[i] - f).abs() < 1e-12);
        }
    }

    #[test]
    fn small_and_aliased_shells_are_rejected() {
        assert!(matches!(Cef2Instance::new(riesz(), 1.0, 2.0), Err(Error::Usage(_))));
        assert!(matches!(Cef2Instance::new(riesz(), 1.0, 63.0), Err(Error::Resolution(_))));
    }

    #[test]
    fn exp_variant_hypothesis() {
        let inst = Cef2Instance::new(AdmissiblePotential::gaussian(1), 1.0, 4.0).unwrap();
        let bad = CorollaryVariant::Exp { b: 0.5, m: 2.0, c: 1.0 };
        assert!(matches!(corollary_variants(&inst, &bad), Err(Error::Usage(_))));
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
