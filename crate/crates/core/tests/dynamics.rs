use mfcomm::dynamics::{
    coupled_run, fit_bound_constant, gronwall_bound, interaction_energy, mf_bound_trajectory, simulate_particles,
    solve_meanfield, CoupledRun, External, GronwallInput, MfBoundParams, NormConfig, SimSetup,
};
use mfcomm::energy::{BoundConstants, ParticleConfig};
use mfcomm::fields::{GridField, GridMeasure, GridSpec};
use mfcomm::rng::Seeds;
use mfcomm::{Error, RieszParams};
use rand::Rng;
use statrs::function::erf::erf_inv;

fn params(d: usize, s: f64) -> RieszParams {
    RieszParams::new(d, s).unwrap()
}

fn gaussian_measure(spec: GridSpec, sigma: f64) -> GridMeasure {
    GridMeasure::from_fn(spec, |x| (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * sigma * sigma)).exp()).unwrap()
}

fn spread_points(d: usize, n: usize, half: f64, rng: &mut impl Rng) -> ParticleConfig {
    let pts = (0..n * d).map(|_| half * (2.0 * rng.random::<f64>() - 1.0)).collect();
    ParticleConfig::new(d, pts).unwrap()
}

#[test]
fn two_body_gap_grows_linearly() {
    let setup = SimSetup::gradient_flow(params(1, -1.0), 1e-3, 0.1, 1e-6).unwrap();
    let x0 = ParticleConfig::new(1, vec![-0.1, 0.15]).unwrap();
    let traj = simulate_particles(&x0, &setup).unwrap();
    for (t, x) in traj.times.iter().zip(&traj.snapshots) {
        let gap = x.point(1)[0] - x.point(0)[0];
        assert!((gap - (0.25 + t)).abs() < 1e-6, "t={t}: gap {gap}");
        assert!((x.point(0)[0] + x.point(1)[0] - 0.05).abs() < 1e-12);
    }
}

#[test]
fn antisymmetric_mobility_conserves_center_and_energy() {
    let p = params(2, 0.5);
    let setup = SimSetup::new(p, vec![0.0, 1.0, -1.0, 0.0], 1e-3, 0.2, 1e-6).unwrap();
    let pts = (0..8)
        .flat_map(|k| {
            let a = k as f64 * std::f64::consts::PI / 4.0;
            let r = if k % 2 == 0 { 0.8 } else { 0.5 };
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let x0 = ParticleConfig::new(2, pts).unwrap();
    let traj = simulate_particles(&x0, &setup).unwrap();
    let center = |x: &ParticleConfig| -> [f64; 2] {
        let mut c = [0.0; 2];
        for i in 0..x.len() {
            c[0] += x.point(i)[0];
            c[1] += x.point(i)[1];
        }
        c
    };
    let c0 = center(&x0);
    let e0 = interaction_energy(&x0, &p);
    for x in &traj.snapshots {
        let c = center(x);
        assert!((c[0] - c0[0]).abs() < 1e-10 && (c[1] - c0[1]).abs() < 1e-10);
        let drift = (interaction_energy(x, &p) - e0).abs();
        assert!(drift < 1e-8 * setup.t_end, "{drift:e}");
    }
}

#[test]
fn constant_drift_translates_exactly() {
    let p = params(2, 0.5);
    let setup = SimSetup::new(p, vec![0.0; 4], 0.01, 0.5, 1e-6)
        .unwrap()
        .with_external(External::Constant(vec![0.3, -0.7]))
        .unwrap();
    let x0 = spread_points(2, 5, 1.0, &mut Seeds::new(5).stream("drift"));
    let x = simulate_particles(&x0, &setup).unwrap();
    let last = x.last();
    for i in 0..5 {
        assert!((last.point(i)[0] - (x0.point(i)[0] - 0.15)).abs() < 1e-13);
        assert!((last.point(i)[1] - (x0.point(i)[1] + 0.35)).abs() < 1e-13);
    }
}

#[test]
fn gradient_flow_dissipates_energy() {
    for (d, s) in [(1, -1.5), (2, 0.5), (2, 1.0)] {
        let p = params(d, s);
        let setup = SimSetup::gradient_flow(p, 1e-3, 0.1, 1e-6).unwrap();
        let x0 = spread_points(d, 12, 1.0, &mut Seeds::new(6).stream_indexed("dissipation", d as u64));
        let traj = simulate_particles(&x0, &setup).unwrap();
        let energies: Vec<f64> = traj.snapshots.iter().map(|x| interaction_energy(x, &p)).collect();
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "d={d} s={s}: {} -> {}", w[0], w[1]);
        }
        assert!(energies.last().unwrap() < &energies[0]);
    }
}

#[test]
fn rk4_error_shrinks_sixteenfold() {
    let p = params(2, 0.5);
    let x0 = ParticleConfig::new(2, vec![0.0, 0.0, 0.6, 0.1, -0.2, 0.5]).unwrap();
    let endpoint = |dt: f64| {
        let setup = SimSetup::gradient_flow(p, dt, 0.4, 1e-6).unwrap();
        simulate_particles(&x0, &setup).unwrap().last().coords().to_vec()
    };
    let reference = endpoint(1e-4);
    let err = |dt: f64| {
        endpoint(dt).iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(0.04), err(0.02), err(0.01));
    for factor in [e1 / e2, e2 / e3] {
        assert!((12.0..=20.0).contains(&factor), "{e1} {e2} {e3}");
    }
}

#[test]
fn collision_halts_with_pair_and_time() {
    let setup = SimSetup::new(params(1, -1.0), vec![1.0], 1e-3, 0.1, 0.01).unwrap();
    let x0 = ParticleConfig::new(1, vec![0.0, 0.05]).unwrap();
    match simulate_particles(&x0, &setup) {
        Err(Error::Collision { t, i, j, floor }) => {
            assert_eq!((i, j), (0, 1));
            assert_eq!(floor, 0.01);
            assert!((t - 0.04).abs() < 2e-3, "t = {t}");
        }
        other => panic!("expected a collision, got {other:?}"),
    }
    let bad = ParticleConfig::new(1, vec![0.0, 0.005]).unwrap();
    assert!(matches!(simulate_particles(&bad, &setup), Err(Error::Collision { .. })));
}

#[test]
fn singular_attraction_is_caught_before_the_pair_crosses() {
    let (s, r0, floor) = (0.5, 0.2, 1e-3);
    let setup = SimSetup::new(params(1, s), vec![1.0], 1e-2, 1.0, floor).unwrap();
    let x0 = ParticleConfig::new(1, vec![-0.5 * r0, 0.5 * r0]).unwrap();
    let lo = (r0.powf(s + 2.0) - floor.powf(s + 2.0)) / (s + 2.0);
    let hi = r0.powf(s + 2.0) / (s + 2.0);
    match simulate_particles(&x0, &setup) {
        Err(Error::Collision { t, i, j, .. }) => {
            assert_eq!((i, j), (0, 1));
            assert!(t >= lo * (1.0 - 1e-3) && t <= hi, "t = {t} outside [{lo}, {hi}]");
        }
        other => panic!("expected a collision, got {other:?}"),
    }
}

#[test]
fn setup_rejects_bad_inputs() {
    let p = params(1, 0.5);
    assert!(SimSetup::new(p, vec![1.0, 0.0], 0.1, 1.0, 0.1).is_err());
    assert!(SimSetup::new(p, vec![1.0], 0.0, 1.0, 0.1).is_err());
    assert!(SimSetup::new(p, vec![1.0], 0.1, 0.05, 0.1).is_err());
    assert!(SimSetup::new(p, vec![1.0], 0.1, 1.0, 0.0).is_err());
    let s = SimSetup::new(p, vec![1.0], 0.1, 1.0, 0.1).unwrap();
    assert!(s.clone().with_external(External::Constant(vec![1.0, 2.0])).is_err());
    assert!(s.clone().with_stride(0).is_err());
    assert!(s.with_hyperviscosity(-1.0).is_err());
}

#[test]
fn meanfield_without_velocity_is_stationary() {
    let spec = GridSpec::new(2, 64, 8.0).unwrap();
    let mu0 = gaussian_measure(spec, 0.3);
    let setup = SimSetup::new(params(2, 0.5), vec![0.0; 4], 0.01, 0.2, 1e-6).unwrap();
    let traj = solve_meanfield(&mu0, &setup).unwrap();
    for mu in &traj.snapshots {
        let diff = mu.density.axpy(-1.0, &mu0.density).unwrap().max_abs();
        assert!(diff < 1e-12 * mu0.density.max_abs());
    }
}

#[test]
fn meanfield_constant_drift_translates() {
    let spec = GridSpec::new(1, 512, 16.0).unwrap();
    let sigma = 0.4;
    let mu0 = gaussian_measure(spec, sigma);
    let c = 0.8;
    let setup = SimSetup::new(params(1, 0.5), vec![0.0], 0.01, 0.5, 1e-6)
        .unwrap()
        .with_external(External::Constant(vec![c]))
        .unwrap();
    let traj = solve_meanfield(&mu0, &setup).unwrap();
    let t = *traj.times.last().unwrap();
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let exact = GridField::from_fn(spec, |x| norm * (-(x[0] + c * t).powi(2) / (2.0 * sigma * sigma)).exp()).unwrap();
    let err = traj.last().density.axpy(-1.0, &exact).unwrap().max_abs();
    assert!(err < 1e-8, "{err}");
}

#[test]
fn meanfield_conserves_mass_and_center() {
    let spec = GridSpec::new(1, 1024, 16.0).unwrap();
    let mu0 = gaussian_measure(spec, 0.3);
    let setup = SimSetup::gradient_flow(params(1, -1.5), 1.0 / 256.0, 0.5, 1e-6).unwrap().with_stride(16).unwrap();
    let traj = solve_meanfield(&mu0, &setup).unwrap();
    assert!(traj.warnings.is_empty(), "{:?}", traj.warnings);
    for mu in &traj.snapshots {
        assert!((mu.mass - 1.0).abs() <= 1e-10 * setup.t_end);
        let first = mu.density.values().iter().enumerate().map(|(i, v)| v * spec.point(i)[0]).sum::<f64>() * spec.cell();
        assert!(first.abs() < 1e-8);
    }
    assert!(traj.last().moment(&[0.0], 2.0) > mu0.moment(&[0.0], 2.0));
}

#[test]
fn meanfield_rejects_cfl_violation() {
    let spec = GridSpec::new(1, 1024, 16.0).unwrap();
    let mu0 = gaussian_measure(spec, 0.3);
    let setup = SimSetup::gradient_flow(params(1, -1.0), 0.05, 0.5, 1e-6).unwrap();
    assert!(matches!(solve_meanfield(&mu0, &setup), Err(Error::Usage(_))));
}

fn normal_quantile(p: f64, sigma: f64) -> f64 {
    sigma * std::f64::consts::SQRT_2 * erf_inv(2.0 * p - 1.0)
}

#[test]
fn particles_and_meanfield_agree_on_second_moment() {
    let sigma = 0.3;
    let n = 4096;
    let pts: Vec<f64> = (0..n).map(|i| normal_quantile((i as f64 + 0.5) / n as f64, sigma)).collect();
    let x0 = ParticleConfig::new(1, pts).unwrap();
    let spec = GridSpec::new(1, 1024, 16.0).unwrap();
    let mu0 = gaussian_measure(spec, sigma);
    let p = params(1, -1.0);
    let particles = simulate_particles(&x0, &SimSetup::gradient_flow(p, 1.0 / 64.0, 0.5, 1e-9).unwrap()).unwrap();
    let pde = solve_meanfield(&mu0, &SimSetup::gradient_flow(p, 1.0 / 256.0, 0.5, 1e-9).unwrap()).unwrap();
    let m_particles = particles.last().coords().iter().map(|x| x * x).sum::<f64>() / n as f64;
    let m_pde = pde.last().moment(&[0.0], 2.0);
    assert!(m_pde > 2.0 * sigma * sigma, "the flow should spread: {m_pde}");
    assert!((m_particles - m_pde).abs() <= 0.02 * m_pde, "{m_particles} vs {m_pde}");
}

#[test]
fn gronwall_closed_forms() {
    let riccati = gronwall_bound(&GronwallInput::constant(2.0, 1.0, 0.0, 1.0, 1.5, 1500)).unwrap();
    assert!((riccati.t_star.unwrap() - 1.0).abs() < 1e-8);
    assert!(riccati.t.last().unwrap() < &1.0);
    for (t, b) in riccati.t.iter().zip(&riccati.bound) {
        assert!((b - 1.0 / (1.0 - t)).abs() <= 1e-8 * b, "t={t}");
    }
    let sub = gronwall_bound(&GronwallInput::constant(0.5, 1.0, 0.0, 0.0, 2.0, 200)).unwrap();
    assert!(sub.t_star.is_none());
    for (t, b) in sub.t.iter().zip(&sub.bound) {
        assert!((b.sqrt() - t / 2.0).abs() < 1e-8);
    }
}

/// RK4 solution of `x' = C1 x^a + C2 x` on a fine grid.
fn integrate_equality(a: f64, c1: impl Fn(f64) -> f64, c2: impl Fn(f64) -> f64, x0: f64, t: &[f64]) -> Vec<f64> {
    let f = |s: f64, x: f64| c1(s) * x.powf(a) + c2(s) * x;
    let mut x = x0;
    let mut out = vec![x0];
    for w in t.windows(2) {
        let (s, h) = (w[0], w[1] - w[0]);
        let k1 = f(s, x);
        let k2 = f(s + h / 2.0, x + h / 2.0 * k1);
        let k3 = f(s + h / 2.0, x + h / 2.0 * k2);
        let k4 = f(s + h, x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(x);
    }
    out
}

#[test]
fn gronwall_is_sharp_for_the_equality_case() {
    let c1 = |t: f64| 1.0 + 0.5 * t.sin();
    let c2 = |t: f64| 0.3 + 0.2 * t.cos();
    let steps = 100_000;
    let horizon = 1.0;
    let t: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
    for (a, x0) in [(1.5, 0.5), (0.5, 0.2), (0.0, 1.0), (1.0, 0.7), (3.0, 0.4)] {
        let inp = GronwallInput { a, t: t.clone(), c1: t.iter().map(|&s| c1(s)).collect(), c2: t.iter().map(|&s| c2(s)).collect(), x0 };
        let out = gronwall_bound(&inp).unwrap();
        let exact = integrate_equality(a, c1, c2, x0, &t);
        for (k, b) in out.bound.iter().enumerate() {
            assert!((b - exact[k]).abs() <= 1e-6 * exact[k].max(1.0), "a={a} t={}: {b} vs {}", t[k], exact[k]);
        }
    }
}

fn blob_run(s: f64, n: usize, seed: u64, m: Vec<f64>, dt: f64, t_end: f64) -> CoupledRun {
    let p = params(1, s);
    let spec = GridSpec::new(1, 1024, 16.0).unwrap();
    let mu0 = gaussian_measure(spec, 0.3);
    let x0 = ParticleConfig::sample_iid(&mu0, n, &mut Seeds::new(seed).stream("coupled")).unwrap();
    let setup = SimSetup::new(p, m, dt, t_end, 1e-12).unwrap();
    coupled_run(&x0, &mu0, &setup, (1.0 / (32.0 * dt)).round() as usize, NormConfig::for_params(&p)).unwrap()
}

#[test]
fn coupled_run_without_dynamics_is_constant() {
    let run = blob_run(-1.5, 128, 1, vec![0.0], 1.0 / 256.0, 0.125);
    let first = &run.rows[0];
    for r in &run.rows {
        for (a, b) in [(r.f_n, first.f_n), (r.a_1, first.a_1), (r.u_w, first.u_w), (r.u_c1, first.u_c1), (r.mu_lq, first.mu_lq)] {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300), "{a} vs {b}");
        }
        assert_eq!(r.min_gap, first.min_gap);
    }
}

#[test]
fn coupled_gradient_flow_energy_trends_down() {
    let run = blob_run(0.5, 256, 2, vec![-1.0], 1.0 / 1024.0, 0.5);
    let f: Vec<f64> = run.rows.iter().map(|r| r.f_n).collect();
    let below = f[1..].iter().filter(|&&v| v < f[0]).count();
    assert!(*f.last().unwrap() < 1.5 * f[0], "{f:?}");
    assert!(below as f64 >= 0.8 * (f.len() - 1) as f64, "{f:?}");
}

#[test]
fn meanfield_bound_audit_in_the_nonsingular_regime() {
    let p = params(1, -1.5);
    let consts = BoundConstants { p: 2.0, q: 2.0, ..BoundConstants::default() };
    let mut mfp = MfBoundParams::new(&p, 0.5, 1.0, consts).unwrap();
    let calibration: Vec<CoupledRun> = (0..2).map(|k| blob_run(-1.5, 256, 100 + k, vec![-1.0], 1.0 / 256.0, 0.25)).collect();
    mfp.consts.c_p = fit_bound_constant(&calibration, &mfp).unwrap();
    for k in 0..3 {
        let run = blob_run(-1.5, 256, 200 + k, vec![-1.0], 1.0 / 256.0, 0.25);
        let audit = mf_bound_trajectory(&run, &mfp).unwrap();
        assert_eq!(audit.epsilon, 256f64.powf(-0.5));
        assert!(audit.e0 >= run.rows[0].f_n);
        assert!(audit.verdict, "seed {k}: {:?} vs {:?}", audit.script_e, audit.bound);
    }
}

#[test]
fn meanfield_bound_rejects_log_kernel_and_mismatched_norms() {
    assert!(MfBoundParams::new(&params(2, 0.0), 0.5, 1.0, BoundConstants::default()).is_err());
    let p = params(1, -1.5);
    let run = blob_run(-1.5, 64, 3, vec![-1.0], 1.0 / 256.0, 0.05);
    let consts = BoundConstants { p: 3.0, q: 2.0, ..BoundConstants::default() };
    let mfp = MfBoundParams::new(&p, 0.5, 1.0, consts).unwrap();
    assert!(matches!(mf_bound_trajectory(&run, &mfp), Err(Error::Usage(_))));
}
