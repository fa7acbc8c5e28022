use super::meanfield::MeanFieldSolver;
use super::mfbound::MfBound;
use super::particles::{check_collision, rk4_step};
use super::setup::SimSetup;
use crate::energy::{EnergyContext, ParticleConfig};
use crate::error::{usage, Result};
use crate::fields::{
    holder_zygmund_seminorm, lp_norm, sobolev_seminorm, GridField, GridMeasure, GridSpec,
};
use crate::kernel::RieszParams;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Exponents of the norm series recorded along a coupled run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConfig {
    /// Integrability of the critical Sobolev norm `W^{d/p+1,p}` of `u`.
    pub p: f64,
    /// Lebesgue exponent for `mu`.
    pub q: f64,
    /// Moment parameter for `-1 < s < 0`.
    pub vartheta: f64,
}

impl NormConfig {
    /// `p = q = 2` and `vartheta = 3|s|/4`.
    pub fn for_params(params: &RieszParams) -> Self {
        Self { p: 2.0, q: 2.0, vartheta: 0.75 * params.s.abs() }
    }

    fn validate(&self, params: &RieszParams) -> Result<()> {
        let d = params.d as f64;
        let s = params.s;
        if !(self.p > 1.0) {
            return usage(format!("p = {} must exceed 1", self.p));
        }
        if s > -1.0 && d - s - 1.0 > 0.0 && !(self.q > d / (d - s - 1.0)) {
            return usage(format!("q = {} must exceed d/(d-s-1) = {}", self.q, d / (d - s - 1.0)));
        }
        if !(self.q >= 1.0) {
            return usage(format!("q = {} must be at least 1", self.q));
        }
        if s > -1.0 && s < 0.0 && !(self.vartheta > 0.5 * s.abs() && self.vartheta < s.abs()) {
            return usage(format!("vartheta = {} must lie in (|s|/2, |s|)", self.vartheta));
        }
        Ok(())
    }

    /// Exponent of the moment `∫|x|^r dmu` used by the nonsingular regimes.
    pub fn moment_exponent(&self, s: f64) -> Option<f64> {
        if s <= -1.0 {
            Some(s.abs() - 1.0)
        } else if s < 0.0 {
            Some(s.abs() - self.vartheta)
        } else {
            None
        }
    }
}

/// One reported stride of a coupled run.
#[derive(Debug, Clone, Serialize)]
pub struct CoupledRow {
    pub t: f64,
    #[serde(rename = "F_N")]
    pub f_n: f64,
    #[serde(rename = "A_1")]
    pub a_1: f64,
    pub lambda: f64,
    pub kappa: Option<f64>,
    pub min_gap: f64,
    /// `||u||_{W^{d/p+1,p}}`.
    pub u_w: f64,
    /// `||u||_{C^1}` (Zygmund).
    pub u_c1: f64,
    /// `|| |D|^{(d-s)/2} u ||_{L^{2d/(d-s-2)}}` for `s < d - 2`.
    pub u_sub: Option<f64>,
    pub mu_lq: f64,
    pub mu_linf: f64,
    /// `||mu||_{C^{s+2-d}}` for `s >= d - 1`.
    pub mu_holder: Option<f64>,
    pub moment: Option<f64>,
    pub mass: f64,
    /// `∫|mu|` outside the active window, dropped before the energy report.
    pub outside_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoupledRun {
    pub n: usize,
    pub params: RieszParams,
    pub norms: NormConfig,
    pub rows: Vec<CoupledRow>,
    pub warnings: Vec<String>,
}

impl CoupledRun {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }
}

fn report(
    t: f64,
    x: &ParticleConfig,
    rho: &[f64],
    u: GridField,
    params: RieszParams,
    norms: &NormConfig,
) -> Result<CoupledRow> {
    let spec = u.spec;
    let d = params.d as f64;
    let s = params.s;
    let mass = GridMeasure::signed(GridField::from_values(spec, 1, rho.to_vec())?)?.mass;
    let (mu, outside_mass) = windowed(spec, rho)?;
    let ctx = EnergyContext::new(&mu, params)?;
    let energy = ctx.energy(x)?;
    let comm = ctx.commutator(x, &u, 1)?;
    let u_sub = if s < d - 2.0 {
        Some(sobolev_seminorm(&u, 0.5 * (d - s), 2.0 * d / (d - s - 2.0))?)
    } else {
        None
    };
    let mu_holder =
        if s >= d - 1.0 { Some(holder_zygmund_seminorm(&mu.density, s + 2.0 - d)?) } else { None };
    Ok(CoupledRow {
        t,
        f_n: energy.f_n,
        a_1: comm.a_n,
        lambda: energy.lambda,
        kappa: energy.kappa,
        min_gap: energy.min_gap,
        u_w: sobolev_seminorm(&u, d / norms.p + 1.0, norms.p)?,
        u_c1: holder_zygmund_seminorm(&u, 1.0)?,
        u_sub,
        mu_lq: lp_norm(&mu.density, norms.q),
        mu_linf: lp_norm(&mu.density, f64::INFINITY),
        mu_holder,
        moment: norms.moment_exponent(s).map(|r| mu.moment(&[0.0; 3][..spec.d], r)),
        mass,
        outside_mass,
    })
}

/// Restricts a solver state to the active window and rescales it to unit
/// mass. Spectral ripples from steep fronts otherwise reach the padding.
fn windowed(spec: GridSpec, rho: &[f64]) -> Result<(GridMeasure, f64)> {
    let limit = spec.active_half_width() - 0.5 * spec.h();
    let mut outside = 0.0;
    let values: Vec<f64> = rho
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = spec.point(i);
            if x[..spec.d].iter().all(|c| c.abs() < limit) {
                v
            } else {
                outside += v.abs() * spec.cell();
                0.0
            }
        })
        .collect();
    let field = GridField::from_values(spec, 1, values)?;
    let mass = field.integral(0);
    Ok((GridMeasure::signed(field.scaled(1.0 / mass))?, outside))
}

/// Co-advances the particle system and the mean-field equation on one clock
/// and records energies, commutators and norms every `report_stride` steps.
///
/// Particles feel the exact pairwise forces; the commutator and the norms
/// use the solver's grid velocity `u^t = M grad g * mu^t - V^t`.
pub fn coupled_run(
    x0: &ParticleConfig,
    mu0: &GridMeasure,
    setup: &SimSetup,
    report_stride: usize,
    norms: NormConfig,
) -> Result<CoupledRun> {
    let params = setup.params;
    let d = params.d;
    if x0.d != d {
        return usage(format!("particles live in d = {}, setup in d = {d}", x0.d));
    }
    if report_stride == 0 {
        return usage("report stride must be positive");
    }
    norms.validate(&params)?;
    let spec = *mu0.spec();
    let solver = MeanFieldSolver::new(setup, spec)?;
    let (steps, dt) = setup.steps();
    check_collision(x0.coords(), d, 0.0, setup.collision_floor)?;
    let mut rho = mu0.density.values().to_vec();
    let cfl = solver.cfl(0.0, &rho, dt)?;
    if cfl > 0.5 {
        return usage(format!("CFL number {cfl:.3} exceeds 0.5; reduce dt"));
    }
    let mut pts = x0.coords().to_vec();
    let mut warnings = Vec::new();
    if setup.hyperviscosity > 0.0 {
        warnings.push(format!("hyperviscosity nu = {} enabled", setup.hyperviscosity));
    }
    let u0 = solver.velocity_field(0.0, &rho)?;
    let mut rows = vec![report(0.0, x0, &rho, u0, params, &norms)?];
    for k in 0..steps {
        let t = k as f64 * dt;
        let t_next = (k + 1) as f64 * dt;
        pts = rk4_step(setup, t, &pts, dt)?;
        check_collision(&pts, d, t_next, setup.collision_floor)?;
        rho = solver.rk4_step(t, &rho, dt)?;
        if (k + 1) % report_stride == 0 || k + 1 == steps {
            let x = ParticleConfig::new(d, pts.clone())?;
            let u = solver.velocity_field(t_next, &rho)?;
            rows.push(report(t_next, &x, &rho, u, params, &norms)?);
        }
    }
    let drift = rows.iter().map(|r| (r.mass - rows[0].mass).abs()).fold(0.0, f64::max);
    if drift > 1e-10 * setup.t_end.max(1.0) {
        warnings.push(format!("mass drift {drift:.3e} exceeds 1e-10 per unit time"));
    }
    let outside = rows.iter().map(|r| r.outside_mass).fold(0.0, f64::max);
    if outside > 1e-12 {
        warnings.push(format!("up to {outside:.3e} of mass left the active window and was dropped"));
    }
    Ok(CoupledRun { n: x0.len(), params, norms, rows, warnings })
}

pub const TRAJECTORY_COLUMNS: [&str; 10] =
    ["t", "F_N", "A_1", "lambda", "kappa", "min_gap", "u_W_norm", "u_C1_norm", "bound", "verdict_flag"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Writes the trajectory CSV; `bound` and `verdict_flag` are empty without
/// an audit.
pub fn write_trajectory_csv(path: &Path, run: &CoupledRun, audit: Option<&MfBound>) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", TRAJECTORY_COLUMNS.join(","))?;
    for (k, r) in run.rows.iter().enumerate() {
        let (bound, flag) = match audit {
            Some(a) => (format!("{:.16e}", a.bound[k]), u8::from(a.holds[k]).to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{},{}",
            r.t,
            r.f_n,
            r.a_1,
            r.lambda,
            opt(r.kappa),
            r.min_gap,
            r.u_w,
            r.u_c1,
            bound,
            flag
        )?;
    }
    out.flush()
}
