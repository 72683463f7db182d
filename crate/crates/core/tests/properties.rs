use std::f64::consts::PI;

use conewalk::reference::bessel::bessel_i;
use conewalk::reference::{entrance_law_density, radial_transition_cdf};
use conewalk::stats::{jitter, ks_one_sample, parse_horizons, tv_distance};
use conewalk::walk::survival_curve_exact;
use conewalk::{rng, ConeKind, ConeSpec, Point, StepDistribution};
use proptest::prelude::*;
use rand::Rng;

fn cone_strategy() -> impl Strategy<Value = ConeSpec> {
    prop_oneof![
        Just(ConeKind::HalfLine),
        (1usize..5).prop_map(ConeKind::HalfSpace),
        (1usize..5).prop_map(ConeKind::Orthant),
        (0.1f64..6.2).prop_map(ConeKind::Wedge2D),
        (2usize..5).prop_map(ConeKind::WeylA),
        (2usize..5).prop_map(ConeKind::WeylB),
    ]
    .prop_map(|k| ConeSpec::new(k).unwrap())
}

/// Maps an arbitrary vector into the cone.
fn place(cone: &ConeSpec, raw: &[f64]) -> Vec<f64> {
    let d = cone.dimension();
    let mut x = raw[..d].to_vec();
    match cone.kind() {
        ConeKind::HalfLine | ConeKind::HalfSpace(_) => x[d - 1] = x[d - 1].abs() + 0.01,
        ConeKind::Orthant(_) => x.iter_mut().for_each(|v| *v = v.abs() + 0.01),
        ConeKind::Wedge2D(alpha) => {
            let r = 0.1 + raw[0].abs();
            let theta = alpha * (0.01 + 0.98 * (raw[1].abs() / 5.0).min(1.0));
            x = vec![r * theta.cos(), r * theta.sin()];
        }
        ConeKind::WeylA(_) => {
            x.sort_by(f64::total_cmp);
            x.iter_mut()
                .enumerate()
                .for_each(|(i, v)| *v += 0.01 * i as f64);
        }
        ConeKind::WeylB(_) => {
            x.iter_mut().for_each(|v| *v = v.abs());
            x.sort_by(f64::total_cmp);
            x.iter_mut()
                .enumerate()
                .for_each(|(i, v)| *v += 0.01 * (i + 1) as f64);
        }
    }
    x
}

/// A cone together with a point inside it.
fn cone_and_point() -> impl Strategy<Value = (ConeSpec, Vec<f64>)> {
    (cone_strategy(), prop::collection::vec(-5.0f64..5.0, 4))
        .prop_map(|(c, raw)| {
            let x = place(&c, &raw);
            (c, x)
        })
        .prop_filter("away from the boundary", |(c, x)| {
            c.dist_to_boundary(x).unwrap() > 1e-3
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn u_is_homogeneous((cone, x) in cone_and_point(), c in prop::sample::select(vec![0.5, 2.0, 7.0])) {
        let p = cone.exponent();
        let u = cone.u_value(&x).unwrap();
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let uc = cone.u_value(&cx).unwrap();
        let scale = c.powf(p) * u;
        prop_assert!((uc - scale).abs() <= 1e-9 * scale.abs().max(1.0));
    }

    #[test]
    fn u_is_positive_exactly_inside(cone in cone_strategy(), raw in prop::collection::vec(-5.0f64..5.0, 4)) {
        let x = &raw[..cone.dimension()];
        let inside = cone.contains(x).unwrap();
        let u = cone.u_value(x).unwrap();
        prop_assert_eq!(inside, u > 0.0);
        if !inside {
            prop_assert_eq!(cone.dist_to_boundary(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn balls_of_boundary_radius_stay_inside((cone, x) in cone_and_point(), dir in prop::collection::vec(-1.0f64..1.0, 4)) {
        let d = cone.dimension();
        let dir = &dir[..d];
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let r = cone.dist_to_boundary(&x).unwrap();
        let y: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + 0.99 * r * b / norm).collect();
        prop_assert!(cone.contains(&y).unwrap());
    }

    #[test]
    fn quarter_plane_encodings_agree(x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        let w = ConeSpec::new(ConeKind::Wedge2D(PI / 2.0)).unwrap();
        let p = [x, y];
        prop_assert_eq!(q.contains(&p).unwrap(), w.contains(&p).unwrap());
        let (a, b) = (q.u_value(&p).unwrap(), w.u_value(&p).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        prop_assert_eq!(q.exponent(), w.exponent());
    }

    #[test]
    fn wedge_boundary_vanishes(alpha in 0.1f64..6.2, r in 0.01f64..50.0) {
        let w = ConeSpec::new(ConeKind::Wedge2D(alpha)).unwrap();
        for theta in [0.0, alpha] {
            let p = [r * theta.cos(), r * theta.sin()];
            prop_assert!(w.u_value(&p).unwrap().abs() < 1e-12 * r.powf(PI / alpha).max(1.0));
        }
    }

    #[test]
    fn lambda_matches_exponent(cone in cone_strategy()) {
        let d = cone.dimension() as f64;
        let p = cone.exponent();
        match cone.lambda1() {
            Ok(l) => prop_assert_eq!(l, p * (p + d - 2.0)),
            Err(_) => prop_assert_eq!(cone.dimension(), 1),
        }
        prop_assert_eq!(cone.radial_law().degrees, 2.0 * p + d);
    }

    #[test]
    fn bridge_survival_is_a_probability((cone, a) in cone_and_point(), shift in prop::collection::vec(-0.2f64..0.2, 4), h in 1e-4f64..1.0) {
        let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
        prop_assume!(cone.contains(&b).unwrap());
        let p = cone.bridge_survival(&a, &b, h);
        prop_assert!((0.0..=1.0).contains(&p));
        // A shorter bridge is less likely to wander out.
        prop_assert!(cone.bridge_survival(&a, &b, h / 2.0) >= p - 1e-15);
    }

    #[test]
    fn cone_strings_round_trip(cone in cone_strategy()) {
        let back: ConeSpec = cone.to_string().parse().unwrap();
        prop_assert_eq!(back.kind(), cone.kind());
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), idx in any::<u64>()) {
        let a: Vec<u64> = (0..8).map({ let mut r = rng::stream(seed, idx); move |_| r.random() }).collect();
        let b: Vec<u64> = (0..8).map({ let mut r = rng::stream(seed, idx); move |_| r.random() }).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn jitter_stays_in_cell(z in prop::collection::vec(-100i64..100, 1..4), seed in any::<u64>()) {
        let spacing: Vec<i64> = z.iter().enumerate().map(|(i, _)| 1 + i as i64).collect();
        let mut v: Vec<f64> = z.iter().map(|&c| c as f64).collect();
        jitter(&mut v, &spacing, &mut rng::stream(seed, 0));
        for ((after, before), s) in v.iter().zip(&z).zip(&spacing) {
            prop_assert!((after - *before as f64).abs() <= *s as f64 / 2.0);
        }
    }

    #[test]
    fn tv_is_a_metric_value(p in prop::collection::vec(0.0f64..1.0, 1..6), q in prop::collection::vec(0.0f64..1.0, 1..6)) {
        let norm = |v: &[f64]| -> Vec<(usize, f64)> {
            let s: f64 = v.iter().sum::<f64>().max(1e-12);
            v.iter().enumerate().map(|(i, x)| (i, x / s)).collect()
        };
        let (a, b) = (norm(&p), norm(&q));
        let ab = tv_distance(&a, &b).unwrap();
        let ba = tv_distance(&b, &a).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-15);
        prop_assert!(tv_distance(&a, &a).unwrap() < 1e-15);
    }

    #[test]
    fn horizon_grids_are_sorted_and_bounded(a in 1usize..500, span in 1usize..5000, k in 2usize..20) {
        let b = a + span;
        for spec in [format!("{a}:{b}:{k}"), format!("{a}:{b}:log{k}"), format!("{a}:{b}")] {
            let h = parse_horizons(&spec).unwrap();
            prop_assert_eq!(h[0], a);
            prop_assert_eq!(*h.last().unwrap(), b);
            prop_assert!(h.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn transition_cdf_is_monotone(delta in 1.5f64..12.0, h in 0.05f64..3.0, r1 in 0.0f64..4.0, a in 0.0f64..6.0, b in 0.0f64..6.0) {
        let law = conewalk::RadialLaw::new(delta).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let fl = radial_transition_cdf(&law, h, r1, lo).unwrap();
        let fh = radial_transition_cdf(&law, h, r1, hi).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&fl));
        prop_assert!(fh >= fl - 1e-12);
    }

    #[test]
    fn bessel_i_recurrence(nu in 0.0f64..20.0, z in 0.05f64..60.0) {
        // I_{ν-1}(z) - I_{ν+1}(z) = (2ν/z) I_ν(z).
        let nu = nu + 1.0;
        let lhs = bessel_i(nu - 1.0, z) - bessel_i(nu + 1.0, z);
        let rhs = 2.0 * nu / z * bessel_i(nu, z);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn survival_curves_decrease(x in 1i64..6, y in 1i64..6) {
        let q = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        let curve = survival_curve_exact(&q, &StepDistribution::rademacher(2), &Point::new(vec![x as f64, y as f64]), 60).unwrap();
        prop_assert_eq!(curve[0], 1.0);
        prop_assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        prop_assert!(curve.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn lattice_laws_are_normalised(d in 1usize..4) {
        for dist in [StepDistribution::rademacher(d), StepDistribution::five_point(d)] {
            let r = dist.check_normalisation(0, 0);
            prop_assert!(r.exact && r.pass);
        }
    }

    #[test]
    fn ks_statistic_is_bounded(seed in any::<u64>(), n in 10usize..300) {
        let mut g = rng::stream(seed, 0);
        let xs: Vec<f64> = (0..n).map(|_| g.random::<f64>()).collect();
        let ks = ks_one_sample(&xs, |v| v.clamp(0.0, 1.0), 0.01).unwrap();
        prop_assert!((0.0..=1.0).contains(&ks.statistic));
    }

    #[test]
    fn entrance_density_scales(t in 0.1f64..4.0, r in 0.01f64..5.0) {
        let c = ConeSpec::new(ConeKind::Orthant(2)).unwrap();
        let a = entrance_law_density(&c, t, r).unwrap();
        let b = entrance_law_density(&c, 1.0, r / t.sqrt()).unwrap() / t.sqrt();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }
}
