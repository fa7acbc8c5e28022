use super::setup::{External, SimSetup};
use crate::error::{usage, Error, Result};
use crate::fields::spectral::{convolve_nodes, fft_nd, wrapped_kernel_spectrum};
use crate::fields::{smooth_step, GridField, GridMeasure, GridSpec};
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

const CFL_LIMIT: f64 = 0.5;
const NEGATIVE_TOLERANCE: f64 = 1e-6;

/// Outer edge of the velocity taper as a fraction of the box.
const TAPER_EDGE: f64 = 0.45;

/// Cutoff equal to 1 on the active region and 0 beyond `TAPER_EDGE * L`.
fn taper(spec: &GridSpec) -> Vec<f64> {
    let a = spec.active_half_width();
    let b = TAPER_EDGE * spec.l;
    (0..spec.len())
        .map(|i| {
            let x = spec.point(i);
            x[..spec.d].iter().map(|c| smooth_step((c.abs() - a) / (b - a))).product()
        })
        .collect()
}

/// Snapshots of a mean-field run.
#[derive(Debug, Clone)]
pub struct MeanFieldTrajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<GridMeasure>,
    pub warnings: Vec<String>,
    pub hyperviscosity: f64,
}

impl MeanFieldTrajectory {
    pub fn last(&self) -> &GridMeasure {
        self.snapshots.last().expect("a trajectory holds the initial snapshot")
    }
}

/// Pseudo-spectral transport solver on a fixed grid.
///
/// The interaction velocity `M grad g * mu` is a linear convolution of the
/// node weights with the sampled kernel gradient; the flux divergence is
/// spectral with the 2/3 rule. The velocity is tapered to zero between the
/// active region and the box edge, where the linear convolution wraps.
pub struct MeanFieldSolver<'a> {
    pub setup: &'a SimSetup,
    pub spec: GridSpec,
    grad_hat: Vec<Vec<Complex64>>,
    external: Option<Vec<f64>>,
    chi: Vec<f64>,
}

impl<'a> MeanFieldSolver<'a> {
    pub fn new(setup: &'a SimSetup, spec: GridSpec) -> Result<Self> {
        let d = setup.params.d;
        if spec.d != d {
            return usage(format!("grid lives in d = {}, setup in d = {d}", spec.d));
        }
        let params = setup.params;
        let grad_hat = if setup.interacting() {
            (0..d)
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
                .collect()
        } else {
            Vec::new()
        };
        let external = match &setup.external {
            External::Zero => None,
            External::Constant(c) => {
                let len = spec.len();
                Some((0..d).flat_map(|k| std::iter::repeat(c[k]).take(len)).collect())
            }
            External::Grid(g) if g.spec == spec => Some(g.values().to_vec()),
            _ => None,
        };
        Ok(Self { setup, spec, grad_hat, external, chi: taper(&spec) })
    }

    /// Tapered `u = M grad g * mu - V^t` at every node, component-major.
    pub fn velocity(&self, t: f64, rho: &[f64]) -> Result<Vec<f64>> {
        let spec = self.spec;
        let d = spec.d;
        let len = spec.len();
        let mut u = vec![0.0; d * len];
        if !self.grad_hat.is_empty() {
            let w: Vec<f64> = rho.iter().map(|v| v * spec.cell()).collect();
            let conv: Vec<Vec<f64>> = self.grad_hat.iter().map(|k| convolve_nodes(&spec, k, &w)).collect();
            let mut z = vec![0.0; d];
            let mut mz = vec![0.0; d];
            for i in 0..len {
                for k in 0..d {
                    z[k] = conv[k][i];
                }
                self.setup.apply_m(&z, &mut mz);
                for k in 0..d {
                    u[k * len + i] = mz[k];
                }
            }
        }
        match (&self.external, &self.setup.external) {
            (Some(v), _) => u.iter_mut().zip(v).for_each(|(a, b)| *a -= b),
            (None, External::Zero) => {}
            (None, ext) => {
                let mut out = vec![0.0; d];
                for i in 0..len {
                    ext.eval(t, &spec.point(i)[..d], &mut out)?;
                    for k in 0..d {
                        u[k * len + i] -= out[k];
                    }
                }
            }
        }
        for (k, v) in u.iter_mut().enumerate() {
            *v *= self.chi[k % len];
        }
        Ok(u)
    }

    fn dealiased(&self, i: usize) -> bool {
        let spec = self.spec;
        let ix = spec.unravel(i);
        let cut = spec.n as i64 / 3;
        ix[..spec.d].iter().all(|&m| spec.signed_index(m).abs() <= cut)
    }

    /// `d_t rho = -div(rho u) - nu |D|^4 rho`.
    pub fn rhs(&self, t: f64, rho: &[f64]) -> Result<Vec<f64>> {
        let spec = self.spec;
        let d = spec.d;
        let len = spec.len();
        let u = self.velocity(t, rho)?;
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        for k in 0..d {
            let mut flux: Vec<Complex64> =
                (0..len).map(|i| Complex64::new(rho[i] * u[k * len + i], 0.0)).collect();
            fft_nd(&spec, &mut flux, false);
            for i in 0..len {
                if self.dealiased(i) {
                    acc[i] -= flux[i] * Complex64::new(0.0, 2.0 * PI * spec.xi(i)[k]);
                }
            }
        }
        let nu = self.setup.hyperviscosity;
        if nu > 0.0 {
            let mut r: Vec<Complex64> = rho.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft_nd(&spec, &mut r, false);
            for i in 0..len {
                let xi2: f64 = spec.xi(i)[..d].iter().map(|c| c * c).sum();
                acc[i] -= r[i] * nu * (2.0 * PI).powi(4) * xi2 * xi2;
            }
        }
        fft_nd(&spec, &mut acc, true);
        Ok(acc.into_iter().map(|z| z.re).collect())
    }

    pub fn rk4_step(&self, t: f64, rho: &[f64], dt: f64) -> Result<Vec<f64>> {
        let axpy = |a: f64, k: &[f64]| -> Vec<f64> { rho.iter().zip(k).map(|(x, v)| x + a * v).collect() };
        let k1 = self.rhs(t, rho)?;
        let k2 = self.rhs(t + 0.5 * dt, &axpy(0.5 * dt, &k1))?;
        let k3 = self.rhs(t + 0.5 * dt, &axpy(0.5 * dt, &k2))?;
        let k4 = self.rhs(t + dt, &axpy(dt, &k3))?;
        let out: Vec<f64> = (0..rho.len())
            .map(|k| rho[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]))
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite density after step at t = {t}")));
        }
        Ok(out)
    }

    /// `max |u| dt / h` over the region where data may live.
    pub fn cfl(&self, t: f64, rho: &[f64], dt: f64) -> Result<f64> {
        let spec = self.spec;
        let d = spec.d;
        let len = spec.len();
        let u = self.velocity(t, rho)?;
        let limit = spec.active_half_width();
        let mut top: f64 = 0.0;
        for i in 0..len {
            let x = spec.point(i);
            if x[..d].iter().all(|c| c.abs() <= limit) {
                let speed: f64 = (0..d).map(|k| u[k * len + i].powi(2)).sum::<f64>().sqrt();
                top = top.max(speed);
            }
        }
        Ok(top * dt / spec.h())
    }

    pub fn velocity_field(&self, t: f64, rho: &[f64]) -> Result<GridField> {
        GridField::from_values(self.spec, self.spec.d, self.velocity(t, rho)?)
    }
}

/// Integrates the mean-field equation with RK4 in time.
pub fn solve_meanfield(mu0: &GridMeasure, setup: &SimSetup) -> Result<MeanFieldTrajectory> {
    let spec = *mu0.spec();
    let solver = MeanFieldSolver::new(setup, spec)?;
    let (steps, dt) = setup.steps();
    let mut rho = mu0.density.values().to_vec();
    let cfl = solver.cfl(0.0, &rho, dt)?;
    if cfl > CFL_LIMIT {
        return usage(format!("CFL number {cfl:.3} exceeds {CFL_LIMIT}; reduce dt or refine less"));
    }
    let mut warnings = Vec::new();
    if setup.hyperviscosity > 0.0 {
        warnings.push(format!("hyperviscosity nu = {} enabled", setup.hyperviscosity));
    }
    let mut times = vec![0.0];
    let mut snapshots = vec![mu0.clone()];
    let mut warned = false;
    for k in 0..steps {
        let t = k as f64 * dt;
        rho = solver.rk4_step(t, &rho, dt)?;
        let top = rho.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let low = rho.iter().cloned().fold(f64::INFINITY, f64::min);
        if !warned && low < -NEGATIVE_TOLERANCE * top {
            warnings.push(format!("negative density {low:.3e} at t = {:.6}", t + dt));
            warned = true;
        }
        if (k + 1) % setup.stride == 0 || k + 1 == steps {
            times.push((k + 1) as f64 * dt);
            snapshots.push(GridMeasure::signed(GridField::from_values(spec, 1, rho.clone())?)?);
        }
    }
    Ok(MeanFieldTrajectory { times, snapshots, warnings, hyperviscosity: setup.hyperviscosity })
}
