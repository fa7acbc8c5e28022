use mfcomm::energy::{
    coercivity_report, moment_bound, smallscale_report, unrenormalized_commutator, EnergyContext,
    ParticleConfig,
};
use mfcomm::fields::{GridField, GridMeasure, GridSpec};
use mfcomm::rng::Seeds;
use mfcomm::{Error, RieszParams};
use rand::Rng;

fn bump_measure(spec: GridSpec, radius: f64) -> GridMeasure {
    GridMeasure::from_fn(spec, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum::<f64>() / (radius * radius);
        if r2 < 1.0 {
            (1.0 - r2).powi(4)
        } else {
            0.0
        }
    })
    .unwrap()
}

fn uniform_particles(d: usize, n: usize, half: f64, rng: &mut impl Rng) -> ParticleConfig {
    let pts = (0..n * d).map(|_| half * (2.0 * rng.random::<f64>() - 1.0)).collect();
    ParticleConfig::new(d, pts).unwrap()
}

#[test]
fn identity_transport_law() {
    let seeds = Seeds::new(11);
    for d in [1usize, 2] {
        let n = if d == 1 { 256 } else { 32 };
        let spec = GridSpec::new(d, n, 4.0).unwrap();
        let mu = bump_measure(spec, 0.7);
        let id = GridField::identity(spec);
        for s in [-1.5, -1.0, 0.5, 1.0].into_iter().filter(|&s| s < d as f64) {
            let params = RieszParams::new(d, s).unwrap();
            let ctx = EnergyContext::new(&mu, params).unwrap();
            let mut rng = seeds.stream_indexed("identity", (d * 10) as u64);
            for _ in 0..3 {
                let x = uniform_particles(d, 50, 0.8, &mut rng);
                let f = ctx.energy(&x).unwrap().f_n;
                let a = ctx.commutator(&x, &id, 1).unwrap().a_n;
                let res = (a + 2.0 * s * f).abs();
                assert!(res <= 1e-10 * (a.abs() + f.abs()), "d={d} s={s}: {a} vs {f}");
            }
        }
    }
}

#[test]
fn log_identity_is_one_over_n() {
    let spec = GridSpec::new(2, 32, 4.0).unwrap();
    let mu = bump_measure(spec, 0.7);
    let params = RieszParams::new(2, 0.0).unwrap();
    let ctx = EnergyContext::new(&mu, params).unwrap();
    let mut rng = Seeds::new(3).stream("log");
    for n in [4usize, 64] {
        let x = uniform_particles(2, n, 0.8, &mut rng);
        let a = ctx.commutator(&x, &GridField::identity(spec), 1).unwrap().a_n;
        assert!((a - 1.0 / n as f64).abs() < 1e-12, "{a}");
    }
}

/// Direct `O(n^2)` evaluation with the closed-form 1-d self-cell average.
fn direct_commutator(spec: GridSpec, f: &[f64], g: &[f64], v: &[f64], div: &[f64], s: f64) -> f64 {
    let h = spec.h();
    let n = spec.n;
    let mut off = 0.0;
    for a in 0..n {
        for b in 0..n {
            if a != b && f[a] * g[b] != 0.0 {
                let z = spec.coord(a) - spec.coord(b);
                let grad = -z.abs().powf(-s - 2.0) * z;
                off += (v[a] - v[b]) * grad * f[a] * g[b];
            }
        }
    }
    let e0 = -h.powf(-s) * 2f64.powf(s) / (1.0 - s);
    let diag: f64 = (0..n).map(|a| f[a] * g[a] * div[a]).sum();
    h * h * (off + e0 * diag)
}

#[test]
fn unrenormalized_commutator_matches_direct_sum() {
    let spec = GridSpec::new(1, 64, 4.0).unwrap();
    let mut rng = Seeds::new(5).stream("bilinear");
    for s in [0.5, -0.5] {
        for _ in 0..4 {
            let c: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
            let bump = |x: f64, m: f64, w: f64| {
                let t = (x - m) / w;
                if t.abs() < 1.0 { (1.0 - t * t).powi(6) } else { 0.0 }
            };
            let ff = |x: &[f64]| bump(x[0], c[0], 0.4) - bump(x[0], -c[0], 0.4) + c[1] * (bump(x[0], 0.5, 0.3) - bump(x[0], -0.5, 0.3));
            let gf = |x: &[f64]| bump(x[0], c[2], 0.3) - bump(x[0], -c[2], 0.3);
            let f = GridField::from_fn(spec, ff).unwrap();
            let g = GridField::from_fn(spec, gf).unwrap();
            let k = 1.0 + c[3];
            let v = GridField::from_fn(spec, |x| (k * x[0]).sin()).unwrap();
            let vv = v.values();
            let h = spec.h();
            let div: Vec<f64> = (0..spec.n)
                .map(|a| {
                    if a < 2 || a + 2 >= spec.n {
                        0.0
                    } else {
                        (-vv[a + 2] + 8.0 * vv[a + 1] - 8.0 * vv[a - 1] + vv[a - 2]) / (12.0 * h)
                    }
                })
                .collect();
            let params = RieszParams::new(1, s).unwrap();
            let lib = unrenormalized_commutator(&f, &g, &v, params).unwrap();
            let oracle = direct_commutator(spec, f.values(), g.values(), v.values(), &div, s);
            assert!((lib - oracle).abs() <= 1e-6 * oracle.abs(), "s={s}: {lib} vs {oracle}");
        }
    }
}

#[test]
fn mmd_identity_in_one_dimension() {
    let spec = GridSpec::new(1, 4096, 4.0).unwrap();
    let mu = bump_measure(spec, 0.7);
    let mut rng = Seeds::new(9).stream("mmd");
    let x = ParticleConfig::sample_iid(&mu, 128, &mut rng).unwrap();
    let rep = coercivity_report(&x, &mu, 1.5, RieszParams::new(1, -1.0).unwrap()).unwrap();
    let mmd = rep.mmd.unwrap();
    assert!(mmd.rel_error <= 1e-4, "{} vs {}", rep.f_n, mmd.spectral_energy);
    assert!(rep.h_neg_norm2 > 0.0);
}

#[test]
fn coercivity_rejects_small_r_and_handles_one_particle() {
    let spec = GridSpec::new(1, 256, 4.0).unwrap();
    let mu = bump_measure(spec, 0.7);
    let x = ParticleConfig::new(1, vec![0.0]).unwrap();
    let p = RieszParams::new(1, 0.5).unwrap();
    assert!(matches!(coercivity_report(&x, &mu, 1.0, p), Err(Error::Usage(_))));
    let rep = coercivity_report(&x, &mu, 2.0, p).unwrap();
    assert!(rep.f_n.is_finite() && rep.h_neg_norm2.is_finite());
    assert!(rep.coer1_rhs(1.0).unwrap().is_finite());
}

#[test]
fn small_scale_sums() {
    let spec = GridSpec::new(1, 256, 4.0).unwrap();
    let mu = bump_measure(spec, 0.7);
    let params = RieszParams::new(1, 0.5).unwrap();
    let lattice = ParticleConfig::new(1, (0..8).map(|k| -0.7 + 0.2 * k as f64).collect()).unwrap();
    let lambda = EnergyContext::new(&mu, params).unwrap().energy(&lattice).unwrap().lambda;
    let rep = smallscale_report(&lattice, &mu, 0.5 * lambda, params).unwrap();
    assert_eq!(rep.close_pairs, 0);
    assert_eq!(rep.close_pair_sum, 0.0);
    assert!(matches!(
        smallscale_report(&lattice, &mu, 2.0 * lambda, params),
        Err(Error::Usage(_))
    ));

    let mut pts: Vec<f64> = (0..8).map(|k| -0.7 + 0.2 * k as f64).collect();
    pts.push(0.1 + 1e-3);
    let x = ParticleConfig::new(1, pts).unwrap();
    let p1 = RieszParams::new(1, 1.0 - 1e-9).unwrap();
    let lam = EnergyContext::new(&mu, p1).unwrap().energy(&x).unwrap().lambda;
    let rep = smallscale_report(&x, &mu, 0.01f64.min(lam), p1).unwrap();
    let expect = 2.0 * 1e-3f64.powf(-p1.s) / (2.0 * 81.0);
    assert!((rep.close_pair_sum - expect).abs() < 1e-6 * expect);

    let log = RieszParams::new(1, 0.0).unwrap();
    let lam = EnergyContext::new(&mu, log).unwrap().energy(&x).unwrap().lambda;
    let rep = smallscale_report(&x, &mu, lam, log).unwrap();
    assert!(rep.close_pairs > 0 && rep.close_pair_sum > 0.0);
}

#[test]
fn moment_bound_checks_order() {
    let spec = GridSpec::new(1, 256, 4.0).unwrap();
    let mu = bump_measure(spec, 0.7);
    let params = RieszParams::new(1, -1.0).unwrap();
    let mut rng = Seeds::new(1).stream("moments");
    let x = ParticleConfig::sample_iid(&mu, 128, &mut rng).unwrap();
    assert!(matches!(moment_bound(&x, &mu, 0.5, &[0.0], params), Err(Error::Usage(_))));
    let rep = moment_bound(&x, &mu, 0.25, &[0.0], params).unwrap();
    assert!(rep.rhs_shape > 0.0 && rep.ratio.is_finite());
}
