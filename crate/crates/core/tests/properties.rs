use mfcomm::energy::{EnergyContext, ParticleConfig};
use mfcomm::fields::{GridField, GridMeasure, GridSpec};
use mfcomm::RieszParams;
use proptest::prelude::*;

fn bump(spec: GridSpec, center: f64, radius: f64) -> GridMeasure {
    GridMeasure::from_fn(spec, |x| {
        let r2: f64 = x.iter().map(|c| (c - center) * (c - center)).sum::<f64>() / (radius * radius);
        if r2 < 1.0 {
            (1.0 - r2).powi(4)
        } else {
            0.0
        }
    })
    .unwrap()
}

fn spec(d: usize) -> GridSpec {
    GridSpec::new(d, if d == 1 { 256 } else { 32 }, 4.0).unwrap()
}

fn points(d: usize) -> impl Strategy<Value = ParticleConfig> {
    prop::collection::vec(-0.8f64..0.8, 8 * d..=40 * d).prop_map(move |mut v| {
        v.truncate(v.len() / d * d);
        ParticleConfig::new(d, v).unwrap()
    })
}

fn exponent(d: usize) -> impl Strategy<Value = f64> {
    prop::sample::select(vec![-1.5, -1.0, -0.5, 0.5, 1.0]).prop_filter("s < d", move |&s| s < d as f64)
}

fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nonsingular_energy_is_nonnegative(
        (d, x) in (1usize..=2).prop_flat_map(|d| (Just(d), points(d))),
        s in prop::sample::select(vec![-1.9, -1.5, -1.0, -0.5, -0.1]),
    ) {
        let ctx = EnergyContext::new(&bump(spec(d), 0.0, 0.7), RieszParams::new(d, s).unwrap()).unwrap();
        let e = ctx.energy(&x).unwrap();
        let scale = e.pp.abs() + e.cross.abs() + e.mm.abs();
        prop_assert!(e.f_n >= -1e-12 * scale, "F_N = {} at scale {}", e.f_n, scale);
    }

    #[test]
    fn first_commutator_is_linear_in_the_field(x in points(1), s in exponent(1), a in -2.0f64..2.0, w in 0.5f64..3.0) {
        let sp = spec(1);
        let ctx = EnergyContext::new(&bump(sp, 0.0, 0.7), RieszParams::new(1, s).unwrap()).unwrap();
        let v = GridField::from_fn(sp, |x| (w * x[0]).sin()).unwrap();
        let u = GridField::from_fn(sp, |x| x[0] * x[0]).unwrap();
        let av = ctx.commutator(&x, &v, 1).unwrap().a_n;
        let au = ctx.commutator(&x, &u, 1).unwrap().a_n;
        let combo = ctx.commutator(&x, &v.scaled(a).axpy(1.0, &u).unwrap(), 1).unwrap().a_n;
        prop_assert!(close(combo, a * av + au, a.abs() * av.abs() + au.abs(), 1e-10), "{combo} vs {}", a * av + au);
    }

    #[test]
    fn energy_is_translation_invariant(x in points(1), s in exponent(1), k in -8i32..=8) {
        let sp = spec(1);
        let shift = k as f64 * sp.h();
        let p = RieszParams::new(1, s).unwrap();
        let here = EnergyContext::new(&bump(sp, 0.0, 0.7), p).unwrap().energy(&x).unwrap();
        let moved = x.translated(&[shift]).unwrap();
        let there = EnergyContext::new(&bump(sp, shift, 0.7), p).unwrap().energy(&moved).unwrap();
        let scale = here.pp.abs() + here.cross.abs() + here.mm.abs();
        prop_assert!(close(here.f_n, there.f_n, scale, 1e-9), "{} vs {}", here.f_n, there.f_n);
    }

    #[test]
    fn particle_order_does_not_matter(x in points(2), s in exponent(2), seed in any::<u64>()) {
        let sp = spec(2);
        let ctx = EnergyContext::new(&bump(sp, 0.0, 0.7), RieszParams::new(2, s).unwrap()).unwrap();
        let n = x.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut state = seed | 1;
        for i in (1..n).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            order.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let rows: Vec<Vec<f64>> = order.iter().map(|&i| x.point(i).to_vec()).collect();
        let y = ParticleConfig::from_rows(&rows).unwrap();
        let v = GridField::vector_from_fn(sp, 2, |p, out| {
            out[0] = p[1].sin();
            out[1] = p[0] * p[1];
        })
        .unwrap();
        let (ex, ey) = (ctx.energy(&x).unwrap(), ctx.energy(&y).unwrap());
        let (cx, cy) = (ctx.commutator(&x, &v, 1).unwrap(), ctx.commutator(&y, &v, 1).unwrap());
        prop_assert!(close(ex.f_n, ey.f_n, ex.pp.abs() + ex.cross.abs() + ex.mm.abs(), 1e-12));
        prop_assert!(close(cx.a_n, cy.a_n, cx.pp.abs() + cx.cross.abs() + cx.mm.abs(), 1e-12));
        prop_assert_eq!(ex.min_gap, ey.min_gap);
    }
}
