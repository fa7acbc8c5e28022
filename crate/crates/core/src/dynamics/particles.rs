use super::setup::SimSetup;
use crate::energy::ParticleConfig;
use crate::error::{usage, Error, Result};
use crate::kernel::RieszParams;
use crate::numeric::Neumaier;
use rayon::prelude::*;
use serde::Serialize;

/// Snapshots of a particle run.
#[derive(Debug, Clone, Serialize)]
pub struct ParticleTrajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<ParticleConfig>,
}

impl ParticleTrajectory {
    pub fn last(&self) -> &ParticleConfig {
        self.snapshots.last().expect("a trajectory holds the initial snapshot")
    }
}

/// `(1/N^2) sum_{i < j} g(x_i - x_j)`.
pub fn interaction_energy(x: &ParticleConfig, params: &RieszParams) -> f64 {
    let n = x.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = Neumaier::new();
            for j in i + 1..n {
                let r2: f64 = x.point(i).iter().zip(x.point(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                acc.add(params.g_r2(r2));
            }
            acc.total()
        })
        .collect();
    let mut acc = Neumaier::new();
    rows.into_iter().for_each(|r| acc.add(r));
    acc.total() / (n * n) as f64
}

/// `r2^e`, through square roots and an integer power when `4e` is an integer.
#[derive(Debug, Clone, Copy)]
enum R2Power {
    Quarter(i32),
    General(f64),
}

impl R2Power {
    fn new(e: f64) -> Self {
        let k = 4.0 * e;
        if k == k.round() && k.abs() < 64.0 {
            Self::Quarter(k as i32)
        } else {
            Self::General(e)
        }
    }

    #[inline]
    fn eval(self, r2: f64) -> f64 {
        match self {
            Self::Quarter(k) => r2.sqrt().sqrt().powi(k),
            Self::General(e) => r2.powf(e),
        }
    }
}

/// Right-hand side of the particle system at time `t`.
pub(crate) fn particle_velocity(setup: &SimSetup, t: f64, pts: &[f64]) -> Result<Vec<f64>> {
    let d = setup.params.d;
    let n = pts.len() / d;
    let power = R2Power::new(-0.5 * setup.params.s - 1.0);
    let interacting = setup.interacting();
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &pts[i * d..(i + 1) * d];
            let mut force = [0.0; 3];
            if interacting {
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let mut z = [0.0; 3];
                    let mut r2 = 0.0;
                    for k in 0..d {
                        z[k] = xi[k] - pts[j * d + k];
                        r2 += z[k] * z[k];
                    }
                    let f = -power.eval(r2);
                    for k in 0..d {
                        force[k] += f * z[k];
                    }
                }
            }
            let mut out = vec![0.0; d];
            let scaled: Vec<f64> = force[..d].iter().map(|v| v / n as f64).collect();
            setup.apply_m(&scaled, &mut out);
            let mut ext = [0.0; 3];
            setup.external.eval(t, xi, &mut ext[..d])?;
            for k in 0..d {
                out[k] -= ext[k];
            }
            Ok(out)
        })
        .collect();
    let mut vel = Vec::with_capacity(n * d);
    for r in rows {
        vel.extend(r?);
    }
    if vel.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite particle velocity at t = {t}")));
    }
    Ok(vel)
}

/// Closest pair `(distance, i, j)`.
pub(crate) fn closest_pair(pts: &[f64], d: usize) -> (f64, usize, usize) {
    let n = pts.len() / d;
    let (r2, i, j) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::INFINITY, i, i);
            for j in i + 1..n {
                let r2: f64 = (0..d).map(|k| (pts[i * d + k] - pts[j * d + k]).powi(2)).sum();
                if r2 < best.0 {
                    best = (r2, i, j);
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, 0, 0),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) { b } else { a },
        );
    (r2.sqrt(), i, j)
}

pub(crate) fn check_collision(pts: &[f64], d: usize, t: f64, floor: f64) -> Result<()> {
    if pts.len() / d < 2 {
        return Ok(());
    }
    let (gap, i, j) = closest_pair(pts, d);
    if gap < floor {
        return Err(Error::Collision { t, i, j, floor });
    }
    Ok(())
}

/// Upper bound on `h * stiffness` for one substep.
const STIFFNESS_LIMIT: f64 = 1.0;
/// Largest fraction of any pairwise gap that may close in one substep.
const APPROACH_LIMIT: f64 = 0.25;
const MAX_SUBSTEPS: usize = 1 << 20;

/// Returns `max_i (|M| / N) sum_j max(1, |s + 1|) |x_i - x_j|^{-s-2}`, a
/// bound on the Lipschitz constant of the interaction velocity at `x`, and
/// `min_{i != j} |x_i - x_j| / |v_i - v_j|`.
fn time_scales(setup: &SimSetup, x: &[f64], v: &[f64]) -> (f64, f64) {
    let d = setup.params.d;
    let n = x.len() / d;
    let s = setup.params.s;
    let m_norm = setup.m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = m_norm * (s + 1.0).abs().max(1.0) / n as f64;
    let power = R2Power::new(-0.5 * s - 1.0);
    let (top, approach) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            let mut approach = f64::INFINITY;
            for j in (0..n).filter(|&j| j != i) {
                let r2: f64 = (0..d).map(|k| (x[i * d + k] - x[j * d + k]).powi(2)).sum();
                let w2: f64 = (0..d).map(|k| (v[i * d + k] - v[j * d + k]).powi(2)).sum();
                acc += power.eval(r2);
                if w2 > 0.0 {
                    approach = approach.min((r2 / w2).sqrt());
                }
            }
            (acc, approach)
        })
        .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    (scale * top, approach)
}

fn rk4_from(setup: &SimSetup, t: f64, pts: &[f64], h: f64, k1: Vec<f64>) -> Result<Vec<f64>> {
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { pts.iter().zip(k).map(|(x, v)| x + a * v).collect() };
    let k2 = particle_velocity(setup, t + 0.5 * h, &axpy(0.5 * h, &k1))?;
    let k3 = particle_velocity(setup, t + 0.5 * h, &axpy(0.5 * h, &k2))?;
    let k4 = particle_velocity(setup, t + h, &axpy(h, &k3))?;
    Ok((0..pts.len())
        .map(|k| pts[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]))
        .collect())
}

/// Advances by `dt` with classical RK4, split into substeps short enough
/// that `h * stiffness <= STIFFNESS_LIMIT` and no pair closes more than
/// `APPROACH_LIMIT` of its gap. Collisions are checked after every substep.
pub(crate) fn rk4_step(setup: &SimSetup, t0: f64, pts: &[f64], dt: f64) -> Result<Vec<f64>> {
    let d = setup.params.d;
    let end = t0 + dt;
    let mut t = t0;
    let mut x = pts.to_vec();
    for _ in 0..MAX_SUBSTEPS {
        let k1 = particle_velocity(setup, t, &x)?;
        let rest = end - t;
        let mut h = rest;
        let interacting = setup.interacting() && x.len() >= 2 * d;
        if interacting {
            let (stiff, approach) = time_scales(setup, &x, &k1);
            h = h.min(STIFFNESS_LIMIT / stiff).min(APPROACH_LIMIT * approach);
        }
        x = rk4_from(setup, t, &x, h, k1)?;
        let done = h == rest;
        t = if done { end } else { t + h };
        if interacting {
            check_collision(&x, d, t, setup.collision_floor)?;
        }
        if done {
            return Ok(x);
        }
    }
    Err(Error::Data(format!("more than {MAX_SUBSTEPS} substeps needed near t = {t0}")))
}

/// Integrates the particle system with RK4, halting at the first collision.
pub fn simulate_particles(x0: &ParticleConfig, setup: &SimSetup) -> Result<ParticleTrajectory> {
    let d = setup.params.d;
    if x0.d != d {
        return usage(format!("particles live in d = {}, setup in d = {d}", x0.d));
    }
    check_collision(x0.coords(), d, 0.0, setup.collision_floor)?;
    let (steps, dt) = setup.steps();
    let mut pts = x0.coords().to_vec();
    let mut times = vec![0.0];
    let mut snapshots = vec![x0.clone()];
    for k in 0..steps {
        let t = k as f64 * dt;
        pts = rk4_step(setup, t, &pts, dt)?;
        let t_next = (k + 1) as f64 * dt;
        check_collision(&pts, d, t_next, setup.collision_floor)?;
        if (k + 1) % setup.stride == 0 || k + 1 == steps {
            times.push(t_next);
            snapshots.push(ParticleConfig::new(d, pts.clone())?);
        }
    }
    Ok(ParticleTrajectory { times, snapshots })
}
