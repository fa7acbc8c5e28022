//! Node quadrature for interaction integrals against a grid density.
//!
//! The density is represented by node weights `w_b = mu_b h^d`. Node-node
//! interactions use the kernel sampled at node differences, except at the
//! origin where the kernel is replaced by its average over one grid cell.

use super::particles::ParticleConfig;
use crate::error::{precondition, usage, Error, Result};
use crate::fields::spectral::{convolve_nodes, wrapped_kernel_spectrum};
use crate::fields::{GridField, GridMeasure, GridSpec, Stencil};
use crate::kernel::RieszParams;
use crate::numeric::{gauss_legendre, Neumaier};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use std::sync::OnceLock;

const FACE_ORDER: usize = 24;

/// Points and weights of a tensor Gauss-Legendre rule on `[-1/2, 1/2]^m`.
fn face_rule(m: usize) -> Vec<([f64; 2], f64)> {
    let (x, w) = gauss_legendre(FACE_ORDER);
    match m {
        0 => vec![([0.0; 2], 1.0)],
        1 => x.iter().zip(&w).map(|(&a, &wa)| ([0.5 * a, 0.0], 0.5 * wa)).collect(),
        _ => {
            let mut out = Vec::with_capacity(FACE_ORDER * FACE_ORDER);
            for (&a, &wa) in x.iter().zip(&w) {
                for (&b, &wb) in x.iter().zip(&w) {
                    out.push(([0.5 * a, 0.5 * b], 0.25 * wa * wb));
                }
            }
            out
        }
    }
}

/// Calls `f(y, weight)` at the quadrature nodes of every face of the unit
/// cube `[-1/2, 1/2]^d`.
fn for_each_face_point(d: usize, mut f: impl FnMut(&[f64], f64)) {
    let rule = face_rule(d - 1);
    for axis in 0..d {
        for side in [-0.5, 0.5] {
            for (t, w) in &rule {
                let mut y = [0.0; 3];
                let mut k = 0;
                for a in 0..d {
                    if a == axis {
                        y[a] = side;
                    } else {
                        y[a] = t[k];
                        k += 1;
                    }
                }
                f(&y[..d], *w);
            }
        }
    }
}

/// Average over `[-1/2, 1/2]^d` of a function homogeneous of degree
/// `-sigma` (`sigma < d`), via the pyramid decomposition of the cube.
pub(crate) fn unit_cell_average_homogeneous(
    d: usize,
    sigma: f64,
    f: impl Fn(&[f64]) -> f64,
) -> f64 {
    let mut acc = Neumaier::new();
    for_each_face_point(d, |y, w| acc.add(w * f(y)));
    0.5 * acc.total() / (d as f64 - sigma)
}

/// Average of `|y|^{-sigma}` over the unit cube.
pub(crate) fn unit_cell_power_average(d: usize, sigma: f64) -> f64 {
    unit_cell_average_homogeneous(d, sigma, |y| norm(y).powf(-sigma))
}

/// Average of `-log |y|` over the unit cube.
pub(crate) fn unit_cell_log_average(d: usize) -> f64 {
    let df = d as f64;
    let mut acc = Neumaier::new();
    for_each_face_point(d, |y, w| acc.add(w * (1.0 / (df * df) - norm(y).ln() / df)));
    0.5 * acc.total()
}

#[inline]
fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cell average of `g` over `[-h/2, h/2]^d`.
pub(crate) fn self_value(params: &RieszParams, h: f64) -> f64 {
    if params.is_log() {
        -h.ln() + unit_cell_log_average(params.d)
    } else {
        h.powf(-params.s) * unit_cell_power_average(params.d, params.s) / params.s
    }
}

/// Cell average of `z . grad g(z) = -|z|^{-s}` over `[-h/2, h/2]^d`.
pub(crate) fn flux_average(params: &RieszParams, h: f64) -> f64 {
    if params.is_log() {
        -1.0
    } else {
        -h.powf(-params.s) * unit_cell_power_average(params.d, params.s)
    }
}

/// Cell average of `grad^n g(z) : (J z)^n` for a matrix `J` (row-major).
pub(crate) fn directional_cell_average(params: &RieszParams, h: f64, jac: &[f64], n: usize) -> f64 {
    let d = params.d;
    let f = |y: &[f64]| {
        let mut u = [0.0; 3];
        for a in 0..d {
            u[a] = (0..d).map(|b| jac[a * d + b] * y[b]).sum();
        }
        params.directional_derivative(y, &u[..d], n)
    };
    // grad^n g is homogeneous of degree -s-n and (J z)^n of degree n.
    h.powf(-params.s) * unit_cell_average_homogeneous(d, params.s, f)
}

/// Pair sum `sum_{i != j} k(x_i, x_j)` in a fixed order: rows in parallel,
/// each row compensated, rows merged sequentially.
pub(crate) fn pair_sum<F>(x: &ParticleConfig, k: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let n = x.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = Neumaier::new();
            for j in 0..n {
                if j != i {
                    acc.add(k(i, j));
                }
            }
            acc.total()
        })
        .collect();
    let mut acc = Neumaier::new();
    rows.into_iter().for_each(|r| acc.add(r));
    acc.total()
}

/// `∬ g(x - y) f(x) f(y) dx dy` for a compactly supported scalar field,
/// with the self-cell term replaced by the cell average of `g`.
pub(crate) fn field_self_energy(f: &GridField, params: &RieszParams) -> f64 {
    let spec = f.spec;
    let g0 = self_value(params, spec.h());
    let kernel = wrapped_kernel_spectrum(&spec, |z| {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            g0
        } else {
            params.g_r2(r2)
        }
    });
    let pot = convolve_nodes(&spec, &kernel, f.values());
    let mut acc = Neumaier::new();
    for (a, b) in f.values().iter().zip(&pot) {
        acc.add(a * b);
    }
    acc.total() * spec.cell() * spec.cell()
}

/// Cached quantities that depend on `(mu, params)` only.
#[derive(Debug)]
pub struct EnergyContext {
    pub params: RieszParams,
    pub spec: GridSpec,
    /// Node weights `mu_b h^d`.
    pub weights: Vec<f64>,
    /// Nodes carrying nonzero weight.
    pub support: Vec<usize>,
    pub support_half_width: f64,
    /// `||mu||_{L^p}` and the exponent used for the length scales.
    pub mu_lp: f64,
    pub p: f64,
    pub(crate) e0: f64,
    grad_hat: OnceLock<Vec<Vec<Complex64>>>,
    /// Potential `sum_b G(x_a - x_b) w_b` at every node.
    pub potential: Vec<f64>,
    /// `sum_a w_a potential_a`.
    pub mm: f64,
}

impl EnergyContext {
    /// Builds the context with `lambda` measured in `L^inf`.
    pub fn new(mu: &GridMeasure, params: RieszParams) -> Result<Self> {
        Self::with_exponent(mu, params, f64::INFINITY)
    }

    pub fn with_exponent(mu: &GridMeasure, params: RieszParams, p: f64) -> Result<Self> {
        let spec = *mu.spec();
        if spec.d != params.d {
            return usage(format!("measure lives in d = {}, kernel in d = {}", spec.d, params.d));
        }
        if !(p >= 1.0) {
            return usage(format!("exponent p = {p} must lie in [1, inf]"));
        }
        if (mu.mass - 1.0).abs() > 1e-10 {
            return Err(Error::Data(format!("measure has mass {} instead of 1", mu.mass)));
        }
        let hw = mu.support_half_width(1e-12);
        if hw >= spec.active_half_width() {
            return precondition(format!(
                "density support half-width {hw} reaches the padding limit {}",
                spec.active_half_width()
            ));
        }
        let h = spec.h();
        let g0 = self_value(&params, h);
        let e0 = flux_average(&params, h);
        let g_hat = wrapped_kernel_spectrum(&spec, |z| {
            let r2: f64 = z.iter().map(|v| v * v).sum();
            if r2 == 0.0 {
                g0
            } else {
                params.g_r2(r2)
            }
        });
        let weights = mu.weights();
        let support = (0..weights.len()).filter(|&i| weights[i] != 0.0).collect();
        let potential = convolve_nodes(&spec, &g_hat, &weights);
        let mut acc = Neumaier::new();
        for (w, h) in weights.iter().zip(&potential) {
            acc.add(w * h);
        }
        Ok(Self {
            params,
            spec,
            weights,
            support,
            support_half_width: hw,
            mu_lp: mu.lp_norm(p),
            p,
            e0,
            grad_hat: OnceLock::new(),
            potential,
            mm: acc.total(),
        })
    }

    /// Spectra of the sampled gradient components, with value 0 at the origin.
    pub(crate) fn grad_hat(&self) -> &[Vec<Complex64>] {
        self.grad_hat.get_or_init(|| {
            let params = self.params;
            (0..self.spec.d)
                .map(|k| {
                    wrapped_kernel_spectrum(&self.spec, |z| {
                        let r2: f64 = z.iter().map(|v| v * v).sum();
                        if r2 == 0.0 {
                            0.0
                        } else {
                            params.grad_factor_r2(r2) * z[k]
                        }
                    })
                })
                .collect()
        })
    }

    /// Checks that particles are far enough inside the box for both the
    /// interpolation stencil and minimal-image node differences.
    pub fn check_particles(&self, x: &ParticleConfig) -> Result<()> {
        if x.d != self.spec.d {
            return usage(format!("particles live in d = {}, grid in d = {}", x.d, self.spec.d));
        }
        let limit = 0.5 * self.spec.l - self.support_half_width - 2.0 * self.spec.h();
        let reach = x.max_abs_coord();
        if reach >= limit {
            return precondition(format!(
                "particle coordinate {reach} exceeds the admissible window {limit}"
            ));
        }
        Ok(())
    }

    /// Interpolation stencils at every particle.
    pub(crate) fn stencils(&self, x: &ParticleConfig) -> Result<Vec<Stencil>> {
        (0..x.len()).map(|i| Stencil::new(&self.spec, x.point(i))).collect()
    }

    /// `(1/N) sum_i I[field](x_i)`.
    pub(crate) fn particle_mean(&self, stencils: &[Stencil], field: &[f64]) -> f64 {
        let mut acc = Neumaier::new();
        for st in stencils {
            acc.add(st.apply(&self.spec, field));
        }
        acc.total() / stencils.len() as f64
    }

    /// `(1/N) sum_b ...` with weights: `sum_a w_a field_a`.
    pub(crate) fn weighted_sum(&self, field: &[f64]) -> f64 {
        let mut acc = Neumaier::new();
        for &a in &self.support {
            acc.add(self.weights[a] * field[a]);
        }
        acc.total()
    }

    pub(crate) fn convolve(&self, kernel: &[Complex64], w: &[f64]) -> Vec<f64> {
        convolve_nodes(&self.spec, kernel, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_cell_averages() {
        // ∫_{-1/2}^{1/2} |y|^{-s} dy = 2^{s} / (1 - s).
        for s in [-1.5, -0.5, 0.3, 0.9] {
            let exact = 2f64.powf(s) / (1.0 - s);
            assert!((unit_cell_power_average(1, s) - exact).abs() < 1e-14);
        }
        assert!((unit_cell_log_average(1) - (1.0 + 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn square_average_of_r2_is_one_sixth() {
        let v = unit_cell_power_average(2, -2.0);
        assert!((v - 1.0 / 6.0).abs() < 1e-13);
        let v3 = unit_cell_power_average(3, -2.0);
        assert!((v3 - 0.25).abs() < 1e-13);
    }

    #[test]
    fn log_average_matches_midpoint_rule_in_2d() {
        let m = 2000;
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let x = (i as f64 + 0.5) / m as f64 - 0.5;
                let y = (j as f64 + 0.5) / m as f64 - 0.5;
                acc -= 0.5 * (x * x + y * y).ln();
            }
        }
        acc /= (m * m) as f64;
        assert!((unit_cell_log_average(2) - acc).abs() < 1e-5);
    }

    #[test]
    fn directional_average_reduces_to_flux_for_identity() {
        let p = RieszParams::new(2, 0.7).unwrap();
        let id = [1.0, 0.0, 0.0, 1.0];
        let a = directional_cell_average(&p, 0.1, &id, 1);
        assert!((a - flux_average(&p, 0.1)).abs() < 1e-12 * a.abs());
    }
}
