use flowperiod::detect::DetectorConfig;
use flowperiod::domain::Point;
use flowperiod::flow::FlowSpec;
use flowperiod::gallery::{gallery_get, GalleryEntry, GalleryParams};
use flowperiod::grid::{Grid, GridAxis};
use flowperiod::pfunc::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

fn r2(x: &[f64]) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

fn seifert() -> &'static (GalleryEntry, PeriodFunctionField) {
    static CELL: OnceLock<(GalleryEntry, PeriodFunctionField)> = OnceLock::new();
    CELL.get_or_init(|| {
        let e = gallery_get("seifert", &GalleryParams::k(3)).unwrap();
        let grid = Grid::over_domain(&e.domain, 16, |x| r2(x) <= 0.81);
        let field = build_period_field(&e.flow, &grid, &FieldConfig::with_detector(e.detector.clone())).unwrap();
        (e, field)
    })
}

fn c0() -> &'static (GalleryEntry, PeriodFunctionField) {
    static CELL: OnceLock<(GalleryEntry, PeriodFunctionField)> = OnceLock::new();
    CELL.get_or_init(|| {
        let e = gallery_get("c0_disk", &GalleryParams::default()).unwrap();
        let grid = Grid::over_domain(&e.domain, 256, |x| r2(x) <= 0.9);
        let field = build_period_field(&e.flow, &grid, &FieldConfig::with_detector(e.detector.clone())).unwrap();
        (e, field)
    })
}

fn annulus(inner: f64, n: usize) -> (GalleryEntry, PeriodFunctionField) {
    let e = gallery_get("c_inf_disk", &GalleryParams::default()).unwrap();
    let grid = Grid::over_domain(&e.domain, n, |x| (inner * inner..=1.0).contains(&r2(x)));
    let field = build_period_field(&e.flow, &grid, &FieldConfig::with_detector(e.detector.clone())).unwrap();
    (e, field)
}

#[test]
fn seifert_field_is_constant_with_multiplier_on_the_central_orbit() {
    let (_, f) = seifert();
    assert_eq!(f.outcome, FieldOutcome::Generated);
    for i in 0..f.len() {
        let x = f.grid.point(i);
        assert!((f.theta[i] - 3.0).abs() < 1e-6, "{x:?}: {}", f.theta[i]);
        let central = r2(x) == 0.0;
        assert_eq!(f.multiplier[i], if central { 3 } else { 1 }, "{x:?}");
        assert_eq!(f.dense_mask[i], !central, "{x:?}");
        assert!(f.residual[i] < 1e-6);
    }
}

#[test]
fn c0_field_is_the_squared_radius() {
    let (_, f) = c0();
    for i in 0..f.len() {
        let x = f.grid.point(i);
        if f.is_fixed(i) {
            assert!(r2(x) < 1e-12);
            assert!(f.theta[i] < 1e-4, "θ(0) = {}", f.theta[i]);
        } else {
            assert!((f.theta[i] - r2(x)).abs() < 1e-4, "{x:?}: {}", f.theta[i]);
        }
    }
}

#[test]
fn c_inf_annulus_field_is_the_inverse_squared_radius() {
    let (_, f) = annulus(0.2, 64);
    assert_eq!(f.outcome, FieldOutcome::Generated);
    for i in 0..f.len() {
        let expect = 1.0 / r2(f.grid.point(i));
        assert!((f.theta[i] / expect - 1.0).abs() < 1e-4, "{:?}", f.grid.point(i));
    }
}

#[test]
fn c_inf_full_disk_forces_the_zero_field() {
    let e = gallery_get("c_inf_disk", &GalleryParams::default()).unwrap();
    let grid = Grid::over_domain(&e.domain, 16, |x| r2(x) <= 0.25);
    let det = e.detector.clone().with_horizon(2000.0);
    let f = build_period_field(&e.flow, &grid, &FieldConfig::with_detector(det)).unwrap();
    assert!(f.is_zero(), "{:?}", f.notes);
}

#[test]
fn saddle_has_the_zero_field() {
    let e = gallery_get("saddle", &GalleryParams::default()).unwrap();
    let grid = Grid::over_domain(&flowperiod::domain::Domain::cube(2, 0.5), 10, |_| true);
    let f = build_period_field(&e.flow, &grid, &FieldConfig::with_detector(e.detector.clone())).unwrap();
    assert_eq!(f.outcome, FieldOutcome::NoPeriodicPoints);
    assert!(f.is_zero());
}

#[test]
fn verify_examples() {
    let (e, f) = seifert();
    let pts: Vec<Point> = f.grid.points().to_vec();
    let three = verify_p_function(&e.flow, &pts, &|_| 3.0, 1e-6);
    assert!(three.passed && three.max_residual < 1e-8);
    let zero = verify_p_function(&e.flow, &pts, &|_| 0.0, 1e-6);
    assert_eq!(zero.max_residual, 0.0);

    let one = verify_p_function(&e.flow, &pts, &|_| 1.0, 1e-6);
    assert!(!one.passed);
    for (x, r) in pts.iter().zip(&one.residuals) {
        // one unit of time turns the disk by a third: chord 2|z|sin(π/3)
        let chord = 2.0 * r2(x).sqrt() * (TAU / 6.0).sin();
        assert!((r.unwrap() - chord).abs() < 1e-9, "{x:?}");
        assert_eq!(r.unwrap() > 1e-6, r2(x) > 0.0);
    }
}

#[test]
fn field_invariants() {
    for f in [&seifert().1, &c0().1] {
        for i in 0..f.len() {
            assert!(f.theta[i] >= 0.0);
            if let Some(p) = f.period(i) {
                let m = f.multiplier[i] as f64;
                assert!((f.theta[i] - m * p).abs() <= 1e-6 * f.theta[i]);
            }
        }
    }
}

#[test]
fn sum_and_difference_of_period_functions_are_period_functions() {
    let (e, f) = seifert();
    let pts: Vec<Point> = f.samples(300).into_iter().map(|(p, _)| p).collect();
    let f = Arc::new(f.clone());
    let g = f.clone();
    let mu1 = move |x: &[f64]| f.theta_nearest(x).unwrap();
    let mu2 = move |x: &[f64]| 2.0 * g.theta_nearest(x).unwrap();
    assert!(verify_p_function(&e.flow, &pts, &|x| mu1(x) + mu2(x), 1e-6).passed);
    assert!(verify_p_function(&e.flow, &pts, &|x| mu1(x) - mu2(x), 1e-6).passed);
}

#[test]
fn regularity_examples() {
    let (e, f) = seifert();
    let cfg = FieldConfig::with_detector(e.detector.clone());
    assert!(check_regularity(&e.flow, f, &cfg).regular);

    let (e, f) = annulus(0.5, 16);
    let rep = check_regularity(&e.flow, &f, &FieldConfig::with_detector(e.detector.clone()));
    assert!(rep.regular && rep.checked > 0, "{rep:?}");
}

#[test]
fn two_sector_function_is_a_period_function_but_not_regular() {
    let (e, _) = c0();
    let (m, n) = (1.0, 2.0);
    // two triangles meeting at the origin, opening left and right
    let in_v2 = |x: &[f64]| x[0].abs() <= 1.0 && x[1].abs() <= 0.5 * x[0].abs();
    let mu = move |x: &[f64]| if x[0] <= 0.0 { -m * r2(x) } else { n * r2(x) };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pts = Vec::new();
    while pts.len() < 100 {
        let x = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)];
        if in_v2(&x) && r2(&x) > 1e-4 && r2(&x) < 1.0 {
            pts.push(Point(x));
        }
    }
    assert!(verify_p_function(&e.flow, &pts, &mu, 1e-6).passed);
    let rep = check_orbit_constancy(&e.flow, &pts, &mu, &in_v2, 16, 1e-3);
    assert!(!rep.regular);
    let w = &rep.witnesses[0];
    assert!((r2(&w.x) - r2(&w.y)).abs() < 1e-9, "witness pair lies on one circle");
    assert!(w.x[0] * w.y[0] < 0.0, "witness pair crosses the sectors");
}

#[test]
fn extension_to_a_smaller_circle() {
    let (e, f) = annulus(0.5, 32);
    let targets = vec![Point(vec![0.25, 0.0]), Point(vec![0.0, -0.25])];
    let err = extend_period_function(&e.flow, &f, &targets, &e.detector, &ExtendConfig::default());
    assert!(matches!(err, Err(FieldError::NotInSaturation(_))));

    let cfg = ExtendConfig { allow_continuation: true, ..Default::default() };
    for ext in extend_period_function(&e.flow, &f, &targets, &e.detector, &cfg).unwrap() {
        assert_eq!(ext.route, ExtensionRoute::Continuation);
        assert!((ext.value - 16.0).abs() < 1e-3, "{}", ext.value);
        assert!(ext.residual < 1e-6);
    }

    let inside = vec![Point(vec![0.7, 0.0])];
    let ext = extend_period_function(&e.flow, &f, &inside, &e.detector, &cfg).unwrap();
    assert_eq!(ext[0].route, ExtensionRoute::InSet);
    assert!((ext[0].value - 1.0 / 0.49).abs() < 1e-6);
}

#[test]
fn seifert_extension_from_a_slab_to_the_whole_torus() {
    let e = gallery_get("seifert", &GalleryParams::k(3)).unwrap();
    let axes = vec![GridAxis::closed(-0.8, 0.8, 8), GridAxis::closed(-0.8, 0.8, 8), GridAxis::closed(0.0, 0.4, 8)];
    let grid = Grid::new(&e.domain, axes, |x| r2(x) <= 0.64);
    let f = build_period_field(&e.flow, &grid, &FieldConfig::with_detector(e.detector.clone())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let targets: Vec<Point> = (0..50)
        .map(|_| {
            let r = rng.gen_range(0.0..0.6f64);
            let a = rng.gen_range(0.0..TAU);
            Point(vec![r * a.cos(), r * a.sin(), rng.gen_range(0.0..1.0)])
        })
        .collect();
    for ext in extend_period_function(&e.flow, &f, &targets, &e.detector, &ExtendConfig::default()).unwrap() {
        assert!((ext.value - 3.0).abs() < 1e-6, "{:?}", ext.target);
        assert!(ext.residual < 1e-6);
    }
}

#[test]
fn zp_examples_on_the_seifert_torus() {
    let (e, f) = seifert();
    let samples = f.samples(400);
    let r3 = zp_divisibility_test(&e.flow, &samples, 3, 1e-6);
    assert!(r3.max_pth_iterate_displacement < 1e-8 && !r3.divisible);
    let r2_ = zp_divisibility_test(&e.flow, &samples, 2, 1e-6);
    assert!(r2_.max_pth_iterate_displacement < 1e-8 && !r2_.divisible);
    for (x, t) in samples.iter().take(20) {
        let d = e.flow.evaluate(x, t / 2.0).unwrap();
        let want = [-x[0], -x[1], (x[2] + 0.5).rem_euclid(1.0)];
        assert!(e.flow.distance(&d, &want) < 1e-9);
    }
    let doubled = f.scaled(&e.flow, 2.0).samples(400);
    assert!(zp_divisibility_test(&e.flow, &doubled, 2, 1e-6).divisible);
}

#[test]
fn generator_from_six_theta() {
    let (e, f) = seifert();
    let cfg = FieldConfig::with_detector(e.detector.clone().with_horizon(20.0));
    let six = f.scaled(&e.flow, 6.0);
    let rep = detect_generator(&e.flow, &six, 7, 200, &cfg);
    assert_eq!(rep.group, GroupKind::Multiples);
    let mut div = rep.divisions.clone();
    div.sort();
    assert_eq!(div, vec![2, 3]);
    assert!(rep.generator.theta.iter().all(|t| (t - 3.0).abs() < 1e-9));
    assert_eq!(rep.tested_primes, vec![2, 3, 5, 7]);
    for t in &rep.final_tests {
        assert!(!t.divisible && t.max_pth_iterate_displacement < 1e-5, "{t:?}");
    }
}

#[test]
fn generator_of_zero_field_is_trivial() {
    let e = gallery_get("saddle", &GalleryParams::default()).unwrap();
    let grid = Grid::over_domain(&flowperiod::domain::Domain::cube(2, 0.5), 6, |_| true);
    let cfg = FieldConfig::with_detector(e.detector.clone());
    let f = build_period_field(&e.flow, &grid, &cfg).unwrap();
    assert_eq!(detect_generator(&e.flow, &f, 7, 100, &cfg).group, GroupKind::Trivial);
}

#[test]
fn c0_field_is_irreducible_and_vanishes_at_the_origin() {
    let (e, f) = c0();
    let cfg = FieldConfig::with_detector(e.detector.clone());
    let rep = detect_generator(&e.flow, f, 7, 300, &cfg);
    assert!(rep.divisions.is_empty());
    assert!(rep.final_tests.iter().all(|t| !t.divisible && t.max_pth_iterate_displacement < 1e-5));
    let origin = f.grid.nearest(&[0.0, 0.0]).unwrap();
    assert!(rep.generator.theta[origin] < 1e-4);
}

#[test]
fn generator_is_positive_for_smooth_flows_with_periodic_points() {
    let rot = gallery_get("rotation", &GalleryParams::beta(2.0)).unwrap();
    let grid = Grid::over_domain(&flowperiod::domain::Domain::cube(2, 0.5), 12, |_| true);
    let cfg = FieldConfig::with_detector(rot.detector.clone());
    let f = build_period_field(&rot.flow, &grid, &cfg).unwrap();
    let g = detect_generator(&rot.flow, &f, 7, 100, &cfg).generator;
    assert!(g.theta.iter().all(|&t| t > 1e-9 && (t - TAU / 2.0).abs() < 1e-6));

    let (e, f) = seifert();
    let g = detect_generator(&e.flow, f, 7, 100, &FieldConfig::with_detector(e.detector.clone())).generator;
    assert!(g.theta.iter().all(|&t| t > 1e-9));
}

#[test]
fn zero_at_one_non_fixed_point_means_zero_on_the_component() {
    let (_, f) = seifert();
    let comps = f.grid.components(|i| !f.is_fixed(i));
    for comp in comps {
        let any_zero = comp.iter().any(|&i| f.theta[i] == 0.0);
        assert!(!any_zero || comp.iter().all(|&i| f.theta[i] == 0.0));
    }
}

#[test]
fn circle_actions_have_unit_period_and_the_same_orbits() {
    let (e, f) = seifert();
    let theta: ThetaFn = Arc::new(|_: &[f64]| 3.0);
    let pts: Vec<Point> = f.samples(500).into_iter().map(|(p, _)| p).collect();
    let b = circle_action(&e.flow, theta, &pts, 1e-8).unwrap();
    assert!(pts.iter().all(|x| b.unit_time_residual(x) < 1e-8));

    let rigid = |x: &[f64], t: f64| {
        let (s, c) = (TAU * t).sin_cos();
        [c * x[0] - s * x[1], s * x[0] + c * x[1]]
    };
    let c_inf = gallery_get("c_inf_disk", &GalleryParams::default()).unwrap();
    let c_0 = gallery_get("c0_disk", &GalleryParams::default()).unwrap();
    let inv: ThetaFn = Arc::new(|x: &[f64]| if r2(x) == 0.0 { 0.0 } else { 1.0 / r2(x) });
    let sq: ThetaFn = Arc::new(|x: &[f64]| r2(x));
    for (flow, theta) in [(&c_inf.flow, inv), (&c_0.flow, sq)] {
        let x = [0.6, 0.3];
        let b = circle_action(flow, theta, &[Point(x.to_vec())], 1e-8).unwrap();
        for t in [0.1, 0.37, 0.5, 0.9] {
            let y = b.flow.evaluate(&x, t).unwrap();
            assert!(flow.distance(&y, &rigid(&x, t)) < 1e-9);
        }
        assert!(b.unit_time_residual(&x) < 1e-9);
        assert!(b.orbit_hausdorff(&x, 2000) < 1e-3);
    }
}

#[test]
fn circle_action_rejects_zero_off_fixed_points() {
    let e = gallery_get("c0_disk", &GalleryParams::default()).unwrap();
    let theta: ThetaFn = Arc::new(|_: &[f64]| 0.0);
    let err = circle_action(&e.flow, theta, &[Point(vec![0.5, 0.0])], 1e-8).err().unwrap();
    assert!(matches!(err, FieldError::FieldVanishesOffFix(_)));
}

#[test]
fn conditions_examples() {
    let c_0 = gallery_get("c0_disk", &GalleryParams::default()).unwrap();
    let origin = vec![Point(vec![0.0, 0.0])];
    let cfg = ConditionConfig { detector: c_0.detector.clone(), ..Default::default() };
    let sq: ThetaFn = Arc::new(|x: &[f64]| r2(x));
    let rep = probe_conditions(&c_0.flow, &sq, &[], &origin, Alpha::new(1, 2), &cfg);
    assert!(rep.cond_c_alpha[0].continuous);
    for (r, w) in &rep.cond_c_alpha[0].modulus {
        assert!((w - r).abs() < 1e-9, "d(z) = -z keeps the radius");
    }
    assert!(rep.cond_d_alpha[0].pth_power_identity, "{:?}", rep.cond_d_alpha);
    assert!(rep.cond_b[0].regular);
    assert!(rep.cond_e[0].holds && rep.cond_e[0].constant <= 1.0 + 1e-6);

    let (s, f) = seifert();
    let samples: Vec<Point> = f.samples(100).into_iter().map(|(p, _)| p).collect();
    let three: ThetaFn = Arc::new(|_: &[f64]| 3.0);
    let cfg = ConditionConfig { detector: s.detector.clone(), ..Default::default() };
    let rep = probe_conditions(&s.flow, &three, &samples, &[], Alpha::new(1, 3), &cfg);
    assert!(rep.cond_a.holds);
    assert!((rep.cond_a.bound - 3.0).abs() < 1e-6);

    let c_inf = gallery_get("c_inf_disk", &GalleryParams::default()).unwrap();
    let inv: ThetaFn = Arc::new(|x: &[f64]| if r2(x) == 0.0 { 0.0 } else { 1.0 / r2(x) });
    let cfg = ConditionConfig { detector: c_inf.detector.clone().with_horizon(1000.0), ..Default::default() };
    let rep = probe_conditions(&c_inf.flow, &inv, &[], &origin, Alpha::new(1, 2), &cfg);
    assert!(!rep.cond_a.holds, "{:?}", rep.cond_a);
    let sup = &rep.cond_a.sup_by_radius;
    assert!(sup.windows(2).all(|w| w[1].1 > w[0].1));
}

#[test]
fn field_csv_columns() {
    let (_, f) = annulus(0.5, 8);
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x1,x2,per,theta,multiplier,dense_mask,residual");
    assert_eq!(text.lines().count(), f.len() + 1);
}

#[test]
fn inconsistent_neighbours_are_reported() {
    // rotation whose period drops from 1 to 1/1.4 at radius 0.5: no integer repair fits
    let domain = flowperiod::domain::Domain::cube(2, 1.0);
    let map: flowperiod::flow::FlowMap = Arc::new(|x: &[f64], t: f64| {
        let w = if r2(x) < 0.25 { 1.0 } else { 1.4 };
        let (s, c) = (TAU * w * t).sin_cos();
        Ok(vec![c * x[0] - s * x[1], s * x[0] + c * x[1]])
    });
    let flow = FlowSpec::closed_form("jump", domain.clone(), flowperiod::flow::Smoothness::C0, map, None);
    let grid = Grid::over_domain(&domain, 10, |x| (0.04..=0.81).contains(&r2(x)));
    let det = DetectorConfig { horizon: 3.0, scan_step: Some(1e-3), ..Default::default() };
    let res = build_period_field(&flow, &grid, &FieldConfig::with_detector(det));
    let err = res.err();
    assert!(matches!(err, Some(FieldError::InconsistentRepair { .. })), "{err:?}");
}
