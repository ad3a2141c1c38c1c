use flowperiod::domain::Domain;
use flowperiod::flow::{FlowSpec, PolynomialField, Smoothness};
use flowperiod::gallery::{gallery_get, GalleryParams};
use flowperiod::linearization::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::sync::Arc;

fn cfg() -> LinearizationConfig {
    LinearizationConfig::default()
}

fn poly(dim: usize, comps: &[&str]) -> FlowSpec {
    let pf = PolynomialField::parse(dim, comps).unwrap();
    FlowSpec::vector_field("p", Domain::cube(dim, 2.0), Smoothness::Cinf, Arc::new(pf)).unwrap()
}

fn labels(mut blocks: Vec<JordanBlock>) -> Vec<String> {
    blocks.sort_by(|a, b| a.label().cmp(&b.label()));
    blocks.iter().map(|b| b.label()).collect()
}

#[test]
fn jacobian_examples() {
    let ham = gallery_get("hamiltonian_even", &GalleryParams::b(2)).unwrap();
    let j = jacobian_at(&ham.flow, &[0.0, 0.0], &cfg()).unwrap();
    assert_eq!(j.matrix, DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 0.0, 0.0]));

    let rot = poly(2, &["-6.283185307179586*y", "6.283185307179586*x"]);
    let j = jacobian_at(&rot, &[0.0, 0.0], &cfg()).unwrap();
    assert_eq!(j.method, JacobianMethod::Analytic);
    assert!((j.matrix.clone() - DMatrix::from_row_slice(2, 2, &[0.0, -TAU, TAU, 0.0])).abs().max() < 1e-15);

    let zero = poly(3, &["0", "0", "0"]);
    assert_eq!(jacobian_at(&zero, &[0.1, 0.2, 0.3], &cfg()).unwrap().matrix, DMatrix::zeros(3, 3));
}

#[test]
fn analytic_and_finite_difference_jacobians_agree() {
    let fields: [(usize, &[&str]); 4] = [
        (2, &["-2*y", "4*x^3"]),
        (2, &["x", "-y"]),
        (3, &["x^2*y + y^2", "z - x*z", "3*x*y*z - 1"]),
        (4, &["y", "0", "-w", "z"]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (dim, comps) in fields {
        let pf = PolynomialField::parse(dim, comps).unwrap();
        let analytic = FlowSpec::vector_field("a", Domain::cube(dim, 2.0), Smoothness::Cinf, Arc::new(pf.clone())).unwrap();
        for _ in 0..10 {
            let z: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let exact = jacobian_at(&analytic, &z, &cfg()).unwrap().matrix;
            let fd = central_difference(&pf, &z, 1e-4);
            let rel = (&exact - &fd).abs().max() / exact.abs().max().max(1.0);
            assert!(rel < 1e-6, "{comps:?} at {z:?}: {rel}");
        }
    }
}

fn central_difference(pf: &PolynomialField, z: &[f64], h: f64) -> DMatrix<f64> {
    use flowperiod::flow::VectorField;
    let n = z.len();
    let mut j = DMatrix::zeros(n, n);
    let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
    for c in 0..n {
        let mut a = z.to_vec();
        let mut b = z.to_vec();
        a[c] += h;
        b[c] -= h;
        pf.eval(&a, &mut fp);
        pf.eval(&b, &mut fm);
        for r in 0..n {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

#[test]
fn real_jordan_examples() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 0.0, 0.0]);
    assert_eq!(labels(real_jordan_classify(&a, &cfg()).unwrap().blocks), vec!["J2(0)"]);

    let b = real_jordan_matrix(&[JordanBlock::complex(0.0, 1.0, 1), JordanBlock::complex(0.0, 2.0, 1)]);
    let got = real_jordan_classify(&b, &cfg()).unwrap().blocks;
    assert_eq!(got.len(), 2);
    assert!(got.iter().all(|k| k.size == 1));

    let c = DMatrix::from_row_slice(4, 4, &[0., 1., 0., 0., 0., 0., 0., 0., 0., 0., 0., -1., 0., 0., 1., 0.]);
    let lp = real_jordan_classify(&c, &cfg()).unwrap();
    assert!(lp.blocks.contains(&JordanBlock::real(0.0, 2)));
    assert!(lp.blocks.iter().any(|k| k.size == 1 && matches!(k.kind, BlockKind::Complex { b, .. } if (b - 1.0).abs() < 1e-9)));
}

#[test]
fn fixed_point_trichotomy_on_gallery_flows() {
    let saddle = gallery_get("saddle", &GalleryParams::default()).unwrap();
    let s = classify_fixed_point(&saddle.flow, &[0.0, 0.0], &cfg());
    assert_eq!(s.verdict, Verdict::HyperbolicPart);
    let ev: Vec<f64> = s.linear_part.unwrap().eigenvalues.iter().map(|z| z.re).collect();
    assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);

    let ham = gallery_get("hamiltonian_even", &GalleryParams::b(2)).unwrap();
    let h = classify_fixed_point(&ham.flow, &[0.0, 0.0], &cfg());
    assert_eq!(h.verdict, Verdict::DegenerateBlock);
    assert_eq!(h.linear_part.unwrap().blocks, vec![JordanBlock::real(0.0, 2)]);

    let rot = gallery_get("rotation", &GalleryParams::beta(3.0)).unwrap();
    let r = classify_fixed_point(&rot.flow, &[0.0, 0.0], &cfg());
    assert_eq!(r.verdict, Verdict::PeriodicType);
    let lp = r.linear_part.unwrap();
    assert_eq!(lp.blocks.len(), 1);
    assert!(matches!(lp.blocks[0].kind, BlockKind::Complex { a, b } if a.abs() < 1e-12 && (b - 3.0).abs() < 1e-9));

    let zero = poly(2, &["x^2", "y^3"]);
    assert_eq!(classify_fixed_point(&zero, &[0.0, 0.0], &cfg()).verdict, Verdict::ZeroLinearPart);
}

#[test]
fn located_fixed_points_of_the_saddle_and_rotation() {
    for name in ["saddle", "rotation"] {
        let e = gallery_get(name, &GalleryParams::default()).unwrap();
        let grid = flowperiod::grid::Grid::over_domain(&Domain::cube(2, 1.0), 9, |_| true);
        let zs = locate_fixed_points(&e.flow, &grid, 1e-10, &cfg());
        assert_eq!(zs.len(), 1, "{name}: {zs:?}");
        assert!(zs[0].norm() < 1e-10);
    }
}

#[test]
fn gamma_examples() {
    let radii = [0.4, 0.2, 0.1, 0.05];
    let rot = poly(2, &["-6.283185307179586*y", "6.283185307179586*x"]);
    let g = gamma_estimate(&rot, &[0.0, 0.0], 1.0, &radii, &cfg(), &GammaConfig::default());
    for p in &g.curve {
        assert!((p.gamma - TAU).abs() < 1e-6, "{p:?}");
    }

    let zero = poly(2, &["0", "0"]);
    let g = gamma_estimate(&zero, &[0.0, 0.0], 1.0, &radii, &cfg(), &GammaConfig::default());
    assert!(g.curve.iter().all(|p| p.gamma == 0.0));

    let ham = gallery_get("hamiltonian_even", &GalleryParams::b(2)).unwrap();
    let g = gamma_estimate(&ham.flow, &[0.0, 0.0], 5.0, &radii, &cfg(), &GammaConfig::default());
    let max = g.curve.iter().map(|p| p.gamma).fold(0.0, f64::max);
    assert!(max.is_finite() && max < 10.0, "{:?}", g.curve);
    assert!(g.quadratic.rejected_components.contains(&0), "{:?}", g.quadratic);
}

#[test]
fn blowup_examples() {
    let ham = gallery_get("hamiltonian_even", &GalleryParams::b(2)).unwrap();
    let rep = period_blowup_probe(&ham.flow, &[0.0, 0.0], &SampleRegion::Cone { epsilon: 0.5 }, &[0.5, 0.25, 0.125], 6.0, &ham.detector);
    assert!(rep.strictly_increasing && rep.blowup_observed, "{rep:?}");
    // along the axis the orbit through (r, 0) has period ∮ on x^4 + y^2 = r^4, which scales as 1/r
    let axis: Vec<f64> = rep.rows.iter().map(|r| r.axis_period.unwrap()).collect();
    let oracle = 2.0 * hamiltonian_period_oracle();
    for (r, p) in [0.5, 0.25, 0.125].iter().zip(&axis) {
        assert!((p - oracle / r).abs() < 1e-5 * p, "r={r}: {p} vs {}", oracle / r);
    }

    let flat = gallery_get("flat_circle", &GalleryParams::default()).unwrap();
    let rep = period_blowup_probe(&flat.flow, &[0.0; 4], &SampleRegion::Subspace { coords: vec![2, 3] }, &[0.5, 0.1], 1e3, &flat.detector);
    for row in &rep.rows {
        assert!((row.min_period.unwrap() - TAU).abs() < 1e-5);
    }

    let saddle = gallery_get("saddle", &GalleryParams::default()).unwrap();
    let rep = period_blowup_probe(&saddle.flow, &[0.0, 0.0], &SampleRegion::Cone { epsilon: 0.5 }, &[0.5, 0.1], 10.0, &saddle.detector);
    assert!(rep.rows.iter().all(|r| r.periodic == 0 && r.non_returning > 0), "{rep:?}");
}

/// Period of the orbit through (1, 0) of ẋ = -2y, ẏ = 4x³, by quadrature of
/// dt = dx / |ẋ| over the upper half of x⁴ + y² = 1.
fn hamiltonian_period_oracle() -> f64 {
    // substitute x = 1 - s² to remove the endpoint singularity at x = 1;
    // the endpoint at x = -1 is symmetric, so integrate over [0, 1] and double
    let n = 200_000;
    let f = |x: f64| 1.0 / (2.0 * (1.0 - x.powi(4)).sqrt());
    let g = |s: f64| {
        let x = 1.0 - s * s;
        if s == 0.0 {
            // 1 - x^4 ≈ 4 s², so f(x)·2s → 1/2
            0.5
        } else {
            f(x) * 2.0 * s
        }
    };
    let smax = 1.0f64;
    let h = smax / n as f64;
    let mut acc = g(0.0) + g(smax);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    // ∫_0^1 dx/|ẋ| for the upper half, doubled for x ∈ [-1, 0]
    2.0 * acc * h / 3.0
}

fn similarity_case() -> impl Strategy<Value = (Vec<JordanBlock>, Vec<f64>)> {
    let block = prop_oneof![
        (-8i32..=8).prop_map(|k| JordanBlock::real(k as f64 / 4.0, 1)),
        (1usize..=3).prop_map(|q| JordanBlock::real(0.0, q)),
        (2i32..=12, 1usize..=2).prop_map(|(k, q)| JordanBlock::complex(0.0, k as f64 / 4.0, q)),
    ];
    prop::collection::vec(block, 1..=3).prop_flat_map(|bs| {
        let n: usize = bs.iter().map(|b| b.dim()).sum();
        (Just(bs), prop::collection::vec(-1.0..1.0f64, n * n))
    })
}

fn separated(blocks: &[JordanBlock]) -> bool {
    let ev: Vec<(f64, f64)> = blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Real { lambda } => (lambda, 0.0),
            BlockKind::Complex { a, b } => (a, b),
        })
        .collect();
    let scale = ev.iter().map(|(a, b)| a.hypot(*b)).fold(1.0, f64::max);
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            let d = (ev[i].0 - ev[j].0).hypot(ev[i].1 - ev[j].1);
            if d < 1e-9 && blocks[i].size == blocks[j].size {
                continue;
            }
            if d < 0.1 * scale {
                return false;
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn block_structure_is_similarity_invariant((blocks, noise) in similarity_case()) {
        prop_assume!(separated(&blocks));
        let j = real_jordan_matrix(&blocks);
        let n = j.nrows();
        let p = DMatrix::identity(n, n) + DMatrix::from_row_slice(n, n, &noise) * 0.3;
        let sv = p.clone().singular_values();
        let cond = sv.max() / sv.min();
        prop_assume!(cond < 100.0);
        let a = &p * &j * p.try_inverse().unwrap();
        let lp = real_jordan_classify(&a, &cfg()).unwrap();
        prop_assert_eq!(signature(&lp.blocks), signature(&blocks));
    }
}

/// Blocks as (size, re, im) rounded to 1e-5, sorted.
fn signature(blocks: &[JordanBlock]) -> Vec<(usize, i64, i64)> {
    let r = |v: f64| (v * 1e5).round() as i64;
    let mut out: Vec<_> = blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Real { lambda } => (b.size, r(lambda), 0),
            BlockKind::Complex { a, b: im } => (b.size, r(a), r(im)),
        })
        .collect();
    out.sort();
    out
}
