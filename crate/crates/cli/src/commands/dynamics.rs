use super::Run;
use crate::error::CliResult;
use crate::output::{num, opt, Table};
use mfcomm::dynamics::{
    coupled_run, fit_bound_constant, gronwall_bound, interaction_energy, mf_bound_trajectory, simulate_particles,
    write_trajectory_csv, CoupledRun, External, GronwallInput, MfBoundParams, NormConfig, SimSetup, FIT_MARGIN,
};
use mfcomm::energy::{BoundConstants, ParticleConfig};
use mfcomm::fields::GridMeasure;
use mfcomm::RieszParams;
use serde_json::json;

pub fn gronwall(run: &mut Run) -> CliResult<()> {
    let a = run.cfg.f64_or("experiment", "a", 2.0)?;
    let c1 = run.cfg.f64_or("experiment", "c1", 1.0)?;
    let c2 = run.cfg.f64_or("experiment", "c2", 0.0)?;
    let x0 = run.cfg.f64_or("experiment", "x0", 1.0)?;
    let horizon = run.cfg.positive_or("experiment", "horizon", 1.0)?;
    let steps = run.cfg.usize_or("experiment", "steps", 1000)?;
    if steps == 0 {
        return Err(run.cfg.error("`experiment.steps` violates steps >= 1"));
    }
    run.ready()?;

    let out = gronwall_bound(&GronwallInput::constant(a, c1, c2, x0, horizon, steps))?;
    let mut table = Table::new(&["t", "bound"]);
    for (t, b) in out.t.iter().zip(&out.bound) {
        table.push(vec![num(*t), num(*b)]);
    }
    run.out.write_csv("gronwall.csv", &table)?;
    run.summary.result("t_star", out.t_star);
    run.summary.result("final_bound", out.bound.last());
    run.summary.result("samples", out.t.len());
    Ok(())
}

/// `mobility_matrix` (row-major, `d x d`) or one of the named mobilities.
fn mobility(run: &mut Run, d: usize) -> CliResult<Vec<f64>> {
    if let Some(m) = run.cfg.f64_list_opt("experiment", "mobility_matrix")? {
        if m.len() != d * d {
            return Err(run.cfg.error(format!("`experiment.mobility_matrix` needs {} entries, got {}", d * d, m.len())));
        }
        return Ok(m);
    }
    let kind = run.cfg.choice_or("experiment", "mobility", &["gradient", "attractive", "hamiltonian", "none"], "gradient")?;
    let diag = |v: f64| (0..d * d).map(|k| if k % (d + 1) == 0 { v } else { 0.0 }).collect::<Vec<_>>();
    Ok(match kind.as_str() {
        "gradient" => diag(-1.0),
        "attractive" => diag(1.0),
        "none" => diag(0.0),
        _ if d == 2 => vec![0.0, 1.0, -1.0, 0.0],
        _ => return Err(run.cfg.error("`experiment.mobility` = \"hamiltonian\" needs d = 2")),
    })
}

/// Time stepping keys shared by `simulate` and `coupled`.
fn setup(run: &mut Run, params: RieszParams, dt: f64, t_end: f64, floor: f64) -> CliResult<SimSetup> {
    let d = params.d;
    let m = mobility(run, d)?;
    let dt = run.cfg.positive_or("experiment", "dt", dt)?;
    let t_end = run.cfg.positive_or("experiment", "t_end", t_end)?;
    let floor = run.cfg.positive_or("experiment", "collision_floor", floor)?;
    let mut setup = SimSetup::new(params, m, dt, t_end, floor)?;
    if let Some(drift) = run.cfg.f64_list_opt("experiment", "drift")? {
        setup = setup.with_external(External::Constant(drift))?;
    }
    Ok(setup)
}

fn iid(run: &Run, mu: &GridMeasure, n: usize, label: &str, index: u64) -> CliResult<ParticleConfig> {
    Ok(ParticleConfig::sample_iid(mu, n, &mut run.seeds.stream_indexed(label, index))?)
}

pub fn simulate(run: &mut Run) -> CliResult<()> {
    let params = run.cfg.kernel()?;
    let d = params.d;
    let x0 = match run.cfg.f64_rows_opt("experiment", "positions", d)? {
        Some(rows) => ParticleConfig::from_rows(&rows)?,
        None => {
            let n = run.cfg.usize_req("experiment", "N")?;
            let spec = run.cfg.grid(d)?;
            let mu = run.cfg.measure(spec)?;
            iid(run, &mu, n, "particles", 0)?
        }
    };
    if x0.len() < 2 {
        return Err(run.cfg.error("a simulation needs at least 2 particles"));
    }
    let stride = run.cfg.usize_or("experiment", "stride", 10)?;
    let setup = setup(run, params, 0.01, 1.0, 1e-9)?.with_stride(stride)?;
    run.ready()?;

    let traj = simulate_particles(&x0, &setup)?;
    let mut coords: Vec<String> = vec!["t".into(), "i".into()];
    coords.extend((1..=d).map(|k| format!("x{k}")));
    let mut particles = Table::new(&coords.iter().map(String::as_str).collect::<Vec<_>>());
    let mut energy = Table::new(&["t", "interaction_energy", "min_gap"]);
    for (t, x) in traj.times.iter().zip(&traj.snapshots) {
        for i in 0..x.len() {
            let mut row = vec![num(*t), i.to_string()];
            row.extend(x.point(i).iter().map(|&c| num(c)));
            particles.push(row);
        }
        energy.push(vec![num(*t), num(interaction_energy(x, &params)), num(x.min_gap())]);
    }
    run.out.write_csv("particles.csv", &particles)?;
    run.out.write_csv("energy.csv", &energy)?;
    run.summary.result("N", x0.len());
    run.summary.result("steps", setup.steps().0);
    run.summary.result("dt", setup.steps().1);
    run.summary.result("snapshots", traj.times.len());
    run.summary.result("final_min_gap", traj.last().min_gap());
    Ok(())
}

fn norms_table(run: &CoupledRun) -> Table {
    let mut t = Table::new(&[
        "t", "u_sub_norm", "mu_Lq_norm", "mu_Linf_norm", "mu_holder_norm", "moment", "mass", "outside_mass",
    ]);
    for r in &run.rows {
        t.push(vec![
            num(r.t),
            opt(r.u_sub),
            num(r.mu_lq),
            num(r.mu_linf),
            opt(r.mu_holder),
            opt(r.moment),
            num(r.mass),
            num(r.outside_mass),
        ]);
    }
    t
}

pub fn coupled(run: &mut Run) -> CliResult<()> {
    let params = run.cfg.kernel()?;
    let spec = run.cfg.grid(params.d)?;
    let mu0 = run.cfg.measure(spec)?;
    let n = run.cfg.usize_req("experiment", "N")?;
    let setup = setup(run, params, 1.0 / 256.0, 0.5, 1e-12)?;
    let nu = run.cfg.f64_or("experiment", "hyperviscosity", 0.0)?;
    let setup = setup.with_hyperviscosity(nu)?;
    let default_stride = ((1.0 / (32.0 * setup.dt)).round() as usize).max(1);
    let stride = run.cfg.usize_or("experiment", "report_stride", default_stride)?;
    let defaults = NormConfig::for_params(&params);
    let norms = NormConfig {
        p: run.cfg.f64_or("experiment", "p", defaults.p)?,
        q: run.cfg.f64_or("experiment", "q", defaults.q)?,
        vartheta: run.cfg.f64_or("experiment", "vartheta", defaults.vartheta)?,
    };
    let mut audit = run.cfg.bool_or("experiment", "audit", params.s != 0.0)?;
    if audit && params.s == 0.0 {
        run.warn("the mean-field bound excludes s = 0; audit disabled");
        audit = false;
    }
    let mfp = if audit {
        let consts = BoundConstants {
            c: run.cfg.f64_or("experiment", "c", 1.0)?,
            c_q: run.cfg.f64_or("experiment", "c_q", 1.0)?,
            c_vartheta: run.cfg.f64_or("experiment", "c_vartheta", 1.0)?,
            vartheta_prime: run.cfg.f64_or("experiment", "vartheta_prime", 0.5 * norms.vartheta)?,
            p: norms.p,
            q: norms.q,
            vartheta: norms.vartheta,
            ..BoundConstants::default()
        };
        let alpha = run.cfg.positive_or("experiment", "alpha", 0.5)?;
        let delta = run.cfg.positive_or("experiment", "delta", 1.0)?;
        let c_p = run.cfg.f64_opt("experiment", "c_p")?;
        let calibration = run.cfg.usize_or("experiment", "calibration_runs", 3)?;
        if c_p.is_none() && calibration == 0 {
            return Err(run.cfg.error("either `experiment.c_p` or calibration_runs >= 1 is required for the audit"));
        }
        Some((MfBoundParams::new(&params, alpha, delta, consts)?, c_p, calibration))
    } else {
        None
    };
    run.ready()?;

    let x0 = iid(run, &mu0, n, "coupled/particles", 0)?;
    let main = coupled_run(&x0, &mu0, &setup, stride, norms)?;
    run.summary.warnings.extend(main.warnings.iter().cloned());
    let bound = match mfp {
        Some((mut mfp, c_p, calibration)) => {
            match c_p {
                Some(c) => mfp.consts.c_p = c,
                None => {
                    let runs = (0..calibration as u64)
                        .map(|k| coupled_run(&iid(run, &mu0, n, "coupled/calibration", k)?, &mu0, &setup, stride, norms).map_err(Into::into))
                        .collect::<CliResult<Vec<_>>>()?;
                    mfp.consts.c_p = fit_bound_constant(&runs, &mfp)?;
                    run.summary.fitted("c_p_margin", FIT_MARGIN);
                    run.summary.fitted("calibration_runs", calibration);
                }
            }
            let b = mf_bound_trajectory(&main, &mfp)?;
            run.summary.fitted("c_p", mfp.consts.c_p);
            run.summary.fitted("constants", mfp.consts);
            run.summary.result("epsilon", b.epsilon);
            run.summary.result("regime", b.regime);
            run.summary.result("script_E0", b.e0);
            run.summary.result("verdict", b.verdict);
            run.summary.result("alpha", mfp.alpha);
            run.summary.result("delta", mfp.delta);
            Some(b)
        }
        None => None,
    };
    run.out.write_with("trajectory.csv", |p| write_trajectory_csv(p, &main, bound.as_ref()))?;
    run.out.write_csv("coupled_norms.csv", &norms_table(&main))?;
    run.summary.result("N", n);
    run.summary.result("report_stride", stride);
    run.summary.result("rows", main.rows.len());
    run.summary.result("norms", json!({ "p": norms.p, "q": norms.q, "vartheta": norms.vartheta }));
    run.summary.result("final_F_N", main.rows.last().map(|r| r.f_n));
    Ok(())
}
