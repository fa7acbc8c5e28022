use super::particles::ParticleConfig;
use super::quadrature::{directional_cell_average, pair_sum, EnergyContext};
use crate::error::{usage, Result};
use crate::fields::{fd_partial, mollify, GridField, GridMeasure, MollifierSpec};
use crate::kernel::RieszParams;
use crate::numeric::Neumaier;
use rayon::prelude::*;
use serde::Serialize;

/// Modulated energy and its three-term breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "F_N")]
    pub f_n: f64,
    /// `(1/N^2) sum_{i != j} g(x_i - x_j)`.
    pub pp: f64,
    /// `(1/N) sum_i (g * mu)(x_i)`.
    pub cross: f64,
    /// `∬ g dmu dmu`.
    pub mm: f64,
    pub lambda: f64,
    /// Present for `s > -1` only.
    pub kappa: Option<f64>,
    pub r: Vec<f64>,
    pub min_gap: f64,
    /// Exponent of the density norm entering `lambda`, `kappa`.
    pub p: f64,
}

/// Commutator functional of order `n`.
#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    pub n: usize,
    #[serde(rename = "A_n")]
    pub a_n: f64,
    pub pp: f64,
    pub cross: f64,
    pub mm: f64,
    pub warnings: Vec<String>,
}

/// Modulated energy with `lambda` measured in `L^inf`.
pub fn modulated_energy(
    x: &ParticleConfig,
    mu: &GridMeasure,
    params: RieszParams,
) -> Result<EnergyReport> {
    EnergyContext::new(mu, params)?.energy(x)
}

/// Commutator `A_n` with the context built on the fly.
pub fn commutator_an(
    x: &ParticleConfig,
    mu: &GridMeasure,
    v: &GridField,
    n: usize,
    params: RieszParams,
) -> Result<CommutatorReport> {
    EnergyContext::new(mu, params)?.commutator(x, v, n)
}

impl EnergyContext {
    /// `F_N = (pp - 2 cross + mm) / 2`.
    pub fn energy(&self, x: &ParticleConfig) -> Result<EnergyReport> {
        self.check_particles(x)?;
        let params = self.params;
        let nf = x.len() as f64;
        let pp = pair_sum(x, |i, j| {
            params.g_r2(super::particles::dist2(x.point(i), x.point(j)))
        }) / (nf * nf);
        let stencils = self.stencils(x)?;
        let cross = self.particle_mean(&stencils, &self.potential);
        let f_n = 0.5 * (pp - 2.0 * cross + self.mm);
        let d = params.d as f64;
        let lambda = (nf * self.mu_lp).powf(-1.0 / d);
        let kappa = (params.s > -1.0).then(|| (nf.powf(1.0 / (params.s + 1.0)) * self.mu_lp).powf(-1.0 / d));
        let r = x.nearest_gaps().into_iter().map(|g| 0.25 * g.min(lambda)).collect();
        Ok(EnergyReport {
            n: x.len(),
            f_n,
            pp,
            cross,
            mm: self.mm,
            lambda,
            kappa,
            r,
            min_gap: x.min_gap(),
            p: self.p,
        })
    }

    fn check_velocity(&self, v: &GridField) -> Result<()> {
        if v.spec != self.spec {
            return usage("velocity field lives on a different grid than the measure");
        }
        if v.ncomp != self.spec.d {
            return usage(format!("velocity field has {} components, expected {}", v.ncomp, self.spec.d));
        }
        Ok(())
    }

    /// `A_n[X, mu, v] = ∬_{x != y} grad^n g(x - y) : (v(x) - v(y))^n d(mu_N - mu)^2`.
    pub fn commutator(&self, x: &ParticleConfig, v: &GridField, n: usize) -> Result<CommutatorReport> {
        if n == 0 {
            return usage("commutator order must be at least 1");
        }
        self.check_velocity(v)?;
        self.check_particles(x)?;
        let d = self.spec.d;
        let mut warnings = Vec::new();
        if n >= 3 && self.params.s > d as f64 - 1.0 {
            warnings.push(format!(
                "order {n} with s = {} close to d = {d}: node quadrature of |x|^(-s-{n}) kernels is inaccurate",
                self.params.s
            ));
        }
        let stencils = self.stencils(x)?;
        let vx: Vec<f64> = (0..x.len())
            .flat_map(|i| {
                let st = &stencils[i];
                (0..d).map(move |c| st.apply(&self.spec, v.component(c)))
            })
            .collect();
        let params = self.params;
        let nf = x.len() as f64;
        let pp = pair_sum(x, |i, j| {
            let mut z = [0.0; 3];
            let mut u = [0.0; 3];
            for k in 0..d {
                z[k] = x.point(i)[k] - x.point(j)[k];
                u[k] = vx[i * d + k] - vx[j * d + k];
            }
            params.directional_derivative(&z[..d], &u[..d], n)
        }) / (nf * nf);
        let (cross, mm) = if n == 1 {
            let q = self.first_order_field(v);
            (self.particle_mean(&stencils, &q), self.weighted_sum(&q))
        } else {
            self.higher_order_terms(x, v, &vx, n)
        };
        Ok(CommutatorReport { n, a_n: pp - 2.0 * cross + mm, pp, cross, mm, warnings })
    }

    /// Node field `Q_a = sum_b w_b (v_a - v_b) . grad G(x_a - x_b)` plus the
    /// self-cell term `(e0 / d) div v_a w_a`.
    fn first_order_field(&self, v: &GridField) -> Vec<f64> {
        let d = self.spec.d;
        let len = self.spec.len();
        let grads = self.grad_hat();
        let mut q = vec![0.0; len];
        for k in 0..d {
            let vk = v.component(k);
            let a = self.convolve(&grads[k], &self.weights);
            let vw: Vec<f64> = vk.iter().zip(&self.weights).map(|(x, w)| x * w).collect();
            let b = self.convolve(&grads[k], &vw);
            for i in 0..len {
                q[i] += vk[i] * a[i] - b[i];
            }
        }
        let scale = self.e0 / d as f64;
        for &a in &self.support {
            let div: f64 = (0..d).map(|k| fd_partial(&self.spec, v.component(k), a, k)).sum();
            q[a] += scale * div * self.weights[a];
        }
        q
    }

    fn jacobian_at(&self, v: &GridField, a: usize) -> [f64; 9] {
        let d = self.spec.d;
        let mut jac = [0.0; 9];
        for c in 0..d {
            for k in 0..d {
                jac[c * d + k] = fd_partial(&self.spec, v.component(c), a, k);
            }
        }
        jac
    }

    /// Direct node sums for `n >= 2`.
    fn higher_order_terms(&self, x: &ParticleConfig, v: &GridField, vx: &[f64], n: usize) -> (f64, f64) {
        let d = self.spec.d;
        let spec = self.spec;
        let params = self.params;
        let h = spec.h();
        let supp = &self.support;
        let diag: Vec<f64> = supp
            .par_iter()
            .map(|&a| directional_cell_average(&params, h, &self.jacobian_at(v, a), n))
            .collect();
        let node = |a: usize| spec.point(a);
        let vnode = |a: usize, c: usize| v.component(c)[a];
        let mm_rows: Vec<f64> = (0..supp.len())
            .into_par_iter()
            .map(|ia| {
                let a = supp[ia];
                let xa = node(a);
                let mut acc = Neumaier::new();
                acc.add(self.weights[a] * diag[ia]);
                for &b in supp {
                    if b == a {
                        continue;
                    }
                    let xb = node(b);
                    let mut z = [0.0; 3];
                    let mut u = [0.0; 3];
                    for k in 0..d {
                        z[k] = xa[k] - xb[k];
                        u[k] = vnode(a, k) - vnode(b, k);
                    }
                    acc.add(self.weights[b] * params.directional_derivative(&z[..d], &u[..d], n));
                }
                self.weights[a] * acc.total()
            })
            .collect();
        let mut mm = Neumaier::new();
        mm_rows.into_iter().for_each(|r| mm.add(r));
        let cross_rows: Vec<f64> = (0..x.len())
            .into_par_iter()
            .map(|i| {
                let xi = x.point(i);
                let mut acc = Neumaier::new();
                for (ib, &b) in supp.iter().enumerate() {
                    let xb = node(b);
                    let mut z = [0.0; 3];
                    let mut u = [0.0; 3];
                    let mut r2 = 0.0;
                    for k in 0..d {
                        z[k] = xi[k] - xb[k];
                        u[k] = vx[i * d + k] - vnode(b, k);
                        r2 += z[k] * z[k];
                    }
                    let kv = if r2 < 1e-24 * h * h {
                        diag[ib]
                    } else {
                        params.directional_derivative(&z[..d], &u[..d], n)
                    };
                    acc.add(self.weights[b] * kv);
                }
                acc.total()
            })
            .collect();
        let mut cross = Neumaier::new();
        cross_rows.into_iter().for_each(|r| cross.add(r));
        (cross.total() / x.len() as f64, mm.total())
    }
}

/// `A_1[v] = A_1[v_eps] + A_1[v - v_eps]` with the error part split into
/// its particle-particle, cross and measure-measure terms.
#[derive(Debug, Clone, Serialize)]
pub struct MollifiedSplit {
    pub epsilon: f64,
    pub a1_total: f64,
    pub a1_smooth: f64,
    pub a1_error: f64,
    /// `(1/N^2) sum_{i != j} k_{v - v_eps}(x_i, x_j)`.
    pub term1: f64,
    /// `-2 (1/N) sum_i ∫ k_{v - v_eps}(x_i, y) dmu(y)`.
    pub term2: f64,
    /// `∬ k_{v - v_eps} dmu dmu`.
    pub term3: f64,
}

pub fn mollified_split(
    x: &ParticleConfig,
    mu: &GridMeasure,
    v: &GridField,
    m: &MollifierSpec,
    params: RieszParams,
) -> Result<MollifiedSplit> {
    let ctx = EnergyContext::new(mu, params)?;
    ctx.mollified_split(x, v, m)
}

impl EnergyContext {
    pub fn mollified_split(&self, x: &ParticleConfig, v: &GridField, m: &MollifierSpec) -> Result<MollifiedSplit> {
        let v_eps = mollify(v, m)?;
        let rough = v.axpy(-1.0, &v_eps)?;
        let total = self.commutator(x, v, 1)?;
        let smooth = self.commutator(x, &v_eps, 1)?;
        let err = self.commutator(x, &rough, 1)?;
        Ok(MollifiedSplit {
            epsilon: m.epsilon,
            a1_total: total.a_n,
            a1_smooth: smooth.a_n,
            a1_error: err.a_n,
            term1: err.pp,
            term2: -2.0 * err.cross,
            term3: err.mm,
        })
    }
}

/// `(1/N^2) sum_{i != j} |x_i - x_j|^{-s-1}`, the pair sum controlling the
/// particle-particle part of the mollification error.
pub fn term1_reference(x: &ParticleConfig, s: f64) -> f64 {
    let nf = x.len() as f64;
    pair_sum(x, |i, j| super::particles::dist(x.point(i), x.point(j)).powf(-s - 1.0)) / (nf * nf)
}
