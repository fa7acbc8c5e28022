use mfcomm::counterexamples::{
    bmo_hilbert_batch, bmo_hilbert_check, cef1_ratio, cef1_velocity_norms, cef2_ratio,
    corollary_variants, phi_hat, Cef1Instance, Cef2Instance, CorollaryVariant, RatioSweep, Shell,
};
use mfcomm::fields::spectral::forward;
use mfcomm::fields::{GridField, GridSpec};
use mfcomm::rng::Seeds;
use mfcomm::{AdmissiblePotential, Error, RieszParams};
use std::f64::consts::PI;

#[test]
fn cef1_ratio_grows_as_scale_shrinks() {
    let params = RieszParams::new(3, 1.0).unwrap();
    let reports: Vec<_> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&r| cef1_ratio(&Cef1Instance::new(params, r).unwrap()).unwrap())
        .collect();
    let bmo: Vec<f64> = reports.iter().map(|r| r.diagnostic("bmo").unwrap()).collect();
    let spread = bmo.iter().cloned().fold(0.0, f64::max) / bmo.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread <= 1.3, "{bmo:?}");
    let norm: Vec<f64> = reports.iter().map(|r| r.diagnostic("normalized_resonant").unwrap()).collect();
    assert!(((norm[2] - norm[1]) / norm[1]).abs() <= 0.15, "{norm:?}");
    for r in &reports {
        assert!(r.denominator > 0.0);
        assert!((r.resonant + r.off_resonant - r.numerator).abs() <= 1e-12 * r.numerator.abs());
    }
    assert!(RatioSweep::new(reports).unwrap().increasing);
}

#[test]
fn cef1_rejects_excluded_and_unresolved_cases() {
    let log1 = RieszParams::new(1, 0.0).unwrap();
    assert!(matches!(Cef1Instance::new(log1, 1e-2), Err(Error::Usage(_))));
    let p = RieszParams::new(2, 0.5).unwrap();
    assert!(matches!(Cef1Instance::with_grid(p, 1e-2, 32, 32), Err(Error::Resolution(_))));
    assert!(matches!(Cef1Instance::new(p, 0.5), Err(Error::Usage(_))));
}

/// `∫ |2 pi xi|^{s-1} |f_r^(xi)|^2 dxi` with `f_r^` evaluated as the
/// trigonometric sum of the rescaled nodes, by Gauss-Legendre panels.
fn spectral_norm2(nodes: &[(f64, f64)], s: f64, xi_max: f64) -> f64 {
    let gl = [
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
        (0.0, 0.568_888_888_888_888_9),
        (0.538_469_310_105_683, 0.478_628_670_499_366_5),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let transform = |xi: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for &(x, w) in nodes {
            let (sn, cs) = (2.0 * PI * xi * x).sin_cos();
            re += w * cs;
            im -= w * sn;
        }
        re * re + im * im
    };
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut width = xi_max * 1e-6;
    while lo < xi_max {
        let hi = (lo + width).min(xi_max);
        for &(t, w) in &gl {
            let xi = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
            total += 0.5 * (hi - lo) * w * (2.0 * PI * xi).powf(s - 1.0) * transform(xi);
        }
        lo = hi;
        width = (width * 1.5).min(xi_max / 2000.0);
    }
    2.0 * total
}

#[test]
fn rescaled_seed_norm_scales_like_r_to_minus_s() {
    let s = -0.5;
    let params = RieszParams::new(1, s).unwrap();
    for r in [1e-2, 1e-3] {
        let inst = Cef1Instance::new(params, r).unwrap();
        let rep = cef1_ratio(&inst).unwrap();
        let h = inst.spec.h();
        let nodes: Vec<(f64, f64)> = (0..inst.spec.n)
            .filter(|&j| inst.f.values()[j] != 0.0)
            .map(|j| (r * inst.spec.coord(j), inst.f.values()[j] * h))
            .collect();
        let oracle = spectral_norm2(&nodes, s, 0.5 / (r * h));
        let lib = rep.diagnostic("f_r_norm2").unwrap();
        assert!((lib - oracle).abs() <= 0.01 * oracle, "r={r}: {lib} vs {oracle}");
    }
}

#[test]
fn cef1_velocity_bmo_is_stable_under_refinement() {
    let params = RieszParams::new(3, 1.0).unwrap();
    let coarse = cef1_velocity_norms(&params, 64).unwrap();
    let fine = cef1_velocity_norms(&params, 128).unwrap();
    let q = fine.bmo / coarse.bmo;
    assert!(q <= 1.3 && q >= 1.0 / 1.3, "{coarse:?} {fine:?}");
    assert!(fine.grad_inf > coarse.grad_inf);
    let sub = cef1_velocity_norms(&RieszParams::new(3, -0.5).unwrap(), 32).unwrap();
    assert!(sub.sub_coulomb.unwrap() > 0.0);
}

fn riesz_sub_coulomb() -> AdmissiblePotential {
    AdmissiblePotential::riesz(RieszParams::new(1, -1.5).unwrap())
}

#[test]
fn cef2_growth_and_resonance_bounds() {
    let power = CorollaryVariant::Power { a: 2.2 };
    let calib = corollary_variants(&Cef2Instance::new(riesz_sub_coulomb(), 1.0, 5.0).unwrap(), &power).unwrap();
    let c_hat = calib.resonant / calib.diagnostic("ghat_2").unwrap();
    let reports: Vec<_> = [8.0, 16.0, 32.0]
        .iter()
        .map(|&k| corollary_variants(&Cef2Instance::new(riesz_sub_coulomb(), 1.0, k).unwrap(), &power).unwrap())
        .collect();
    let expected = 2f64.powf((1.0 + 1.5) / 2.0 - 1.0);
    let growth = reports[1].ratio / reports[0].ratio;
    assert!((growth / expected - 1.0).abs() <= 0.25, "{growth} vs {expected}");
    let c_off: Vec<f64> = reports.iter().map(|r| r.off_resonant.abs() / r.diagnostic("k_ghat_k").unwrap()).collect();
    let spread = c_off.iter().cloned().fold(0.0, f64::max) / c_off.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread <= 2.0, "{c_off:?}");
    for r in &reports {
        assert!(r.resonant >= 0.5 * r.diagnostic("ghat_2").unwrap() * c_hat);
        assert!(r.denominator > 0.0);
    }
}

/// `L^d sum_{m1 + m2 + m3 = 0} a(m1) b(m2) c(m3) / L^{3d}` over the nonzero bins.
fn triple_shell(l: f64, a: &[(i64, (f64, f64))], b: &[(i64, (f64, f64))], c: &std::collections::HashMap<i64, (f64, f64)>) -> f64 {
    let mut total = 0.0;
    for &(m1, (ar, ai)) in a {
        for &(m2, (br, bi)) in b {
            if let Some(&(cr, ci)) = c.get(&(-m1 - m2)) {
                let (pr, pi) = (ar * br - ai * bi, ar * bi + ai * br);
                total += pr * cr - pi * ci;
            }
        }
    }
    total / (l * l)
}

#[test]
fn cef2_integrals_match_direct_triple_shell_sums() {
    let pot = riesz_sub_coulomb();
    for k in [3.5, 8.0, 16.0] {
        let inst = Cef2Instance::new(pot.clone(), 1.0, k).unwrap();
        let l = inst.spec.l;
        let n = inst.spec.n as i64;
        let bins = |which: Shell, deriv: bool| -> Vec<(i64, (f64, f64))> {
            (-n / 2 + 1..n / 2)
                .filter_map(|m| {
                    let xi = m as f64 / l;
                    let z = inst.spectrum(which, &[xi]);
                    if z.norm_sqr() == 0.0 {
                        return None;
                    }
                    let (mut re, mut im) = (z.re, z.im);
                    if deriv {
                        let w = 2.0 * PI * xi * pot.symbol(xi.abs());
                        (re, im) = (-im * w, re * w);
                    }
                    Some((m, (re, im)))
                })
                .collect()
        };
        let v = bins(Shell::V, false);
        let f = bins(Shell::F, false);
        let g = bins(Shell::G, false);
        let df = bins(Shell::F, true);
        let dg = bins(Shell::G, true);
        let off = triple_shell(l, &v, &df, &g.iter().cloned().collect());
        let res = triple_shell(l, &v, &dg, &f.iter().cloned().collect());
        let rep = cef2_ratio(&inst, &|_| 0.0, 2.0).unwrap();
        assert!((rep.off_resonant - off).abs() <= 1e-8 * off.abs(), "k={k}: {} vs {off}", rep.off_resonant);
        assert!((rep.resonant - res).abs() <= 1e-8 * res.abs(), "k={k}: {} vs {res}", rep.resonant);
    }
}

#[test]
fn cef2_velocity_lives_on_its_shell() {
    let k = 6.0;
    let inst = Cef2Instance::new(riesz_sub_coulomb(), 1.0, k).unwrap();
    let spec = inst.spec;
    let spectrum = forward(&inst.v);
    let top = spectrum.data[..spec.len()].iter().map(|z| z.norm()).fold(0.0, f64::max);
    for m in 0..spec.n {
        let xi = spec.freq(m).abs();
        if xi < k - 1.0 || xi > k + 1.0 {
            assert!(spectrum.data[m].norm() <= 1e-12 * top, "bin {m}");
        }
    }
    assert_eq!(phi_hat(0.1), 1.0);
    assert_eq!(phi_hat(0.25), 0.0);
    for w in [&inst.f, &inst.g] {
        assert!(w.integral(0).abs() < 1e-12);
    }
}

#[test]
fn corollary_variants_behave() {
    let gauss = AdmissiblePotential::gaussian(1);
    let bessel: Vec<f64> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&k| {
            let inst = Cef2Instance::new(gauss.clone(), 1.0, k).unwrap();
            corollary_variants(&inst, &CorollaryVariant::Bessel { n: 4.0 }).unwrap().ratio
        })
        .collect();
    assert!(bessel.windows(2).all(|w| w[1] > w[0]), "{bessel:?}");

    let boundary: Vec<f64> = [8.0, 16.0, 32.0]
        .iter()
        .map(|&k| {
            let inst = Cef2Instance::new(riesz_sub_coulomb(), 1.0, k).unwrap();
            corollary_variants(&inst, &CorollaryVariant::Power { a: 2.5 }).unwrap().ratio
        })
        .collect();
    assert!(boundary.windows(2).all(|w| w[1] / w[0] <= 1.3), "{boundary:?}");

    let inst = Cef2Instance::new(gauss.clone(), 1.0, 16.0).unwrap();
    let rep = corollary_variants(&inst, &CorollaryVariant::Exp { b: 0.4999, m: 2.0, c: 1.0 }).unwrap();
    assert!(rep.ratio.is_finite() && rep.diagnostic("log_ratio").unwrap().is_finite());
    let bad = CorollaryVariant::Exp { b: 0.5, m: 2.0, c: 1.0 };
    assert!(matches!(corollary_variants(&inst, &bad), Err(Error::Usage(_))));
}

#[test]
fn hilbert_ratio_is_resolution_stable() {
    let ratio = |n: usize| {
        let spec = GridSpec::new(1, n, 8.0).unwrap();
        let bump = |x: f64, c: f64| {
            let t = (x - c) / 0.3;
            if t.abs() < 1.0 { (1.0 - t * t).powi(4) } else { 0.0 }
        };
        let dipole = |a: f64, b: f64| {
            let p = GridField::from_fn(spec, |x| bump(x[0], a)).unwrap();
            let q = GridField::from_fn(spec, |x| bump(x[0], b)).unwrap();
            p.axpy(-p.integral(0) / q.integral(0), &q).unwrap()
        };
        let (f, g) = (dipole(-0.4, 0.5), dipole(0.2, -0.6));
        let v = GridField::from_fn(spec, |x| (x[0] - 0.1).abs()).unwrap();
        bmo_hilbert_check(&v, &f, &g).unwrap()
    };
    let (a, b) = (ratio(512), ratio(1024));
    assert!(a > 0.0 && b > 0.0 && (a / b).max(b / a) <= 1.5, "{a} {b}");
}

#[test]
fn hilbert_batch_stays_bounded_across_resolutions() {
    let maxima: Vec<f64> = [1024usize, 2048]
        .iter()
        .map(|&n| {
            let spec = GridSpec::new(1, n, 8.0).unwrap();
            bmo_hilbert_batch(spec, 60, &mut Seeds::new(4).stream("hilbert")).unwrap().max_ratio
        })
        .collect();
    assert!(maxima.iter().all(|m| m.is_finite() && *m > 0.0));
    assert!((maxima[1] / maxima[0] - 1.0).abs() <= 0.1, "{maxima:?}");
    let spec = GridSpec::new(2, 16, 8.0).unwrap();
    let z = GridField::zeros(spec, 1);
    assert!(matches!(bmo_hilbert_check(&GridField::zeros(spec, 2), &z, &z), Err(Error::Usage(_))));
}
