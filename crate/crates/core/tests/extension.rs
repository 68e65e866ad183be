//! Ruling and Kähler-extension behaviour on sampled and synthetic points.

use kahler_core::extension::{
    build_extension, minimal_case_diagnostics, minimality_condition, ruling_residual, solve_ruling,
    synthetic_minimal_point, verify_kahler, verify_kahler_with, AdaptedPoint, PatchGrid, RulingField,
};
use kahler_core::immersion::{ModelSpec, SampledPoint};
use kahler_core::linalg::{standard_complex_structure, RMat, RVec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL_ALG: f64 = 1e-9;
const TOL_GEO: f64 = 1e-4;

fn product_center() -> RVec {
    RVec::from_fn(10, |i, _| 0.015 * (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 })
}

fn minimal_point(seed: u64) -> AdaptedPoint {
    synthetic_minimal_point(5, seed, 2, C64::new(0.0, 0.0)).unwrap()
}

/// Rewrites the ruling blocks of the connection so that `(v1, v2)` solves the ruling system.
fn with_ruling(point: &SampledPoint, v1: &RVec, v2: &RVec) -> SampledPoint {
    let mut out = point.clone();
    for (u, m) in out.normal_connection.iter_mut().enumerate() {
        for (i, v) in [(0usize, v1), (1, v2)] {
            for j in 0..2 {
                let val = -(&point.shape_forms[j] * v)[u];
                m[(j, 2 + i)] = val;
                m[(2 + i, j)] = -val;
            }
        }
    }
    out
}

#[test]
fn product_patch_is_kahler_and_corruption_is_detected() {
    let model = ModelSpec::product_hypersurface(5, 1).build().unwrap();
    let center = product_center();
    let field = RulingField::new(&model, &center, 1e-3, TOL_ALG, TOL_GEO).unwrap();
    let grid = PatchGrid { center: center.clone(), axis_a: 0, axis_b: 5, count: 5, spacing: 0.02, t_count: 5 };
    let patch = build_extension(&field, grid, 0.1).unwrap();
    assert!(patch.factorization <= 1e-14, "factorization {:e}", patch.factorization);
    assert!(patch.tangent_angle <= 1e-8, "tangent angle {:e}", patch.tangent_angle);
    assert!(patch.max_condition <= 1e3);
    let clean = verify_kahler(&field, &patch).unwrap();
    assert!(clean.residual1 <= 10.0 * TOL_GEO, "{clean:?}");
    assert!(clean.residual2 <= 1e-10, "{clean:?}");
    assert!(clean.developability <= 1e-4, "{clean:?}");
    let corrupted = verify_kahler_with(&field, &patch, 0.1).unwrap();
    assert!(corrupted.residual1 > 0.01, "{corrupted:?}");
}

#[test]
fn ruling_is_gauge_invariant() {
    let adapted = minimal_point(3);
    let ruling = solve_ruling(&adapted.point, TOL_ALG, TOL_GEO).unwrap();
    assert!(ruling.gauge_space.dim() > 0, "synthetic minimal points have a nontrivial gauge space");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for g in &ruling.gauge_space.basis {
        let c: f64 = rng.gen_range(-2.0..2.0);
        let r = ruling_residual(&adapted.point, &(&ruling.v1 + g * c), &(&ruling.v2 - g * c));
        assert!(r <= 1e-10, "gauge shift changed the residual to {r:e}");
    }
    // The canonical gauge is the minimum-norm one.
    for g in &ruling.gauge_space.basis {
        assert!(ruling.v1.dot(g).abs() <= 1e-10 && ruling.v2.dot(g).abs() <= 1e-10);
    }
}

#[test]
fn ruling_rotates_with_the_complex_frame() {
    let adapted = minimal_point(5);
    let base = solve_ruling(&adapted.point, TOL_ALG, TOL_GEO).unwrap();
    for theta in [0.3_f64, 1.1, -2.0] {
        let (c, s) = (theta.cos(), theta.sin());
        let mut q = RMat::identity(4, 4);
        q[(2, 2)] = c;
        q[(3, 2)] = s;
        q[(2, 3)] = -s;
        q[(3, 3)] = c;
        let rotated = adapted.point.rotate_normal(&q);
        let r = solve_ruling(&rotated, TOL_ALG, TOL_GEO).unwrap();
        assert!((&r.v1 - (&base.v1 * c + &base.v2 * s)).norm() <= 1e-9);
        assert!((&r.v2 - (&base.v2 * c - &base.v1 * s)).norm() <= 1e-9);
        assert!((&r.eta1 - (&base.eta1 * c + &base.eta2 * s)).norm() <= 1e-9);
    }
}

#[test]
fn structure_residual_grows_linearly_with_connection_error() {
    let adapted = minimal_point(7);
    let clean = minimal_case_diagnostics(&adapted, TOL_ALG).unwrap();
    assert!(clean.wedge_residual <= 1e-12 && clean.sigma_w_residual <= 1e-12, "{clean:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let noise: Vec<[f64; 4]> = (0..adapted.point.normal_connection.len())
        .map(|_| [0; 4].map(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    let perturbed = |eps: f64| {
        let mut a = adapted.clone();
        for (m, nz) in a.point.normal_connection.iter_mut().zip(&noise) {
            for (k, (al, col)) in [(0usize, 2usize), (0, 3), (1, 2), (1, 3)].into_iter().enumerate() {
                m[(al, col)] += eps * nz[k];
                m[(col, al)] -= eps * nz[k];
            }
        }
        minimal_case_diagnostics(&a, TOL_ALG).unwrap().wedge_residual
    };
    let (r1, r2, r4) = (perturbed(1e-4), perturbed(2e-4), perturbed(4e-4));
    assert!(r1 > 1e-8, "perturbation not detected: {r1:e}");
    for ratio in [r2 / r1, r4 / r2] {
        assert!((ratio - 2.0).abs() < 0.05, "nonlinear growth: {r1:e} {r2:e} {r4:e}");
    }
}

#[test]
fn minimality_condition_holds_for_the_canonical_ruling() {
    for seed in 0..5 {
        let adapted = minimal_point(seed);
        let r = solve_ruling(&adapted.point, TOL_ALG, TOL_GEO).unwrap();
        let cond = minimality_condition(&adapted.point, &r.v1, &r.v2, TOL_GEO).unwrap();
        assert!(cond.holds, "seed {seed}: {cond:?}");
    }
}

/// A ruling shifted by a non-gauge vector `g` with `A(Jg) ≠ 0` violates the minimality condition.
#[test]
fn minimality_condition_fails_for_a_non_gauge_shift() {
    let adapted = minimal_point(2);
    let n = adapted.point.n();
    let base = solve_ruling(&adapted.point, TOL_ALG, TOL_GEO).unwrap();
    let mut g = RVec::zeros(2 * n);
    g[0] = 0.5;
    let jg = standard_complex_structure(n) * &g;
    let ajg = (&adapted.point.shape_forms[0] * &jg).norm() + (&adapted.point.shape_forms[1] * &jg).norm();
    assert!(ajg > 0.1, "shift must be visible to the shape forms");
    let v1 = &base.v1 + &g;
    let shifted = with_ruling(&adapted.point, &v1, &base.v2);
    let r = solve_ruling(&shifted, TOL_ALG, TOL_GEO).unwrap();
    assert!(r.residual <= 1e-10);
    let cond = minimality_condition(&shifted, &r.v1, &r.v2, TOL_GEO).unwrap();
    assert!(!cond.holds && cond.norm > 0.1, "{cond:?}");
}

#[test]
fn holomorphic_patch_is_kahler() {
    let model = ModelSpec::holo_graph(5, 2).build().unwrap();
    let center = RVec::from_fn(10, |i, _| 0.03 * (i as f64 + 1.0));
    let field = RulingField::new(&model, &center, 1e-3, TOL_ALG, TOL_GEO).unwrap();
    let grid = PatchGrid { center, axis_a: 0, axis_b: 5, count: 5, spacing: 0.02, t_count: 5 };
    let patch = build_extension(&field, grid, 0.1).unwrap();
    let rep = verify_kahler(&field, &patch).unwrap();
    assert!(rep.residual1 <= 10.0 * TOL_GEO && rep.residual2 <= 1e-10, "{rep:?}");
}
