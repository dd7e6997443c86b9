use std::f64::consts::PI;

use ks_radial::families::{random_nonnegative, seeded_rng, SmoothProfile};
use ks_radial::grid::{build_grid, lp_norm, RadialField};
use ks_radial::linear::*;
use ks_radial::semigroup::build_spectral;

#[test]
fn eigenmode_source_reproduces_mode() {
    let grid = build_grid(2, 1.0, 200, 50.0).unwrap();
    let op = build_spectral(&grid, 8).unwrap();
    let lam = op.eigenvalues()[1];
    let phi = RadialField::new(grid.clone(), op.mode(1).to_vec()).unwrap();
    let sol = solve_elliptic(&phi.scale(lam)).unwrap();
    assert!(sol.v.max_diff(&phi) < 1e-8, "{}", sol.v.max_diff(&phi));
}

#[test]
fn elliptic_solve_is_linear() {
    let grid = build_grid(3, 1.0, 150, 20.0).unwrap();
    let mut rng = seeded_rng(11);
    for _ in 0..5 {
        let g1 = SmoothProfile::random(&mut rng).sample(&grid).unwrap();
        let g2 = SmoothProfile::random(&mut rng).sample(&grid).unwrap();
        let v1 = solve_elliptic(&g1).unwrap();
        let v2 = solve_elliptic(&g2).unwrap();
        let v12 = solve_elliptic(&g1.add(&g2)).unwrap();
        assert!(v12.v.max_diff(&v1.v.add(&v2.v)) < 1e-10);
        for s in [&v1, &v2, &v12] {
            assert!(s.residual_norm <= 1e-10 * (1.0 + s.g.max_abs()));
        }
    }
}

#[test]
fn elliptic_comparison_principle() {
    let grid = build_grid(2, 1.0, 120, 30.0).unwrap();
    let mut rng = seeded_rng(3);
    for _ in 0..20 {
        let g1 = SmoothProfile::random(&mut rng).sample(&grid).unwrap();
        let bump = random_nonnegative(&grid, 2.0, &mut rng);
        let g2 = g1.add(&bump);
        let v1 = solve_elliptic(&g1).unwrap().v;
        let v2 = solve_elliptic(&g2).unwrap().v;
        for (a, b) in v1.values().iter().zip(v2.values()) {
            assert!(a <= b);
        }
    }
}

#[test]
fn delta_v_bound_singular_source() {
    let grid = build_grid(2, 1.0, 400, 50.0).unwrap();
    let g = RadialField::from_singular_fn(&grid, |r| r.powf(-0.5)).unwrap();
    let sol = solve_elliptic(&g).unwrap();
    let chk = check_delta_v_bound(&sol, 2.0).unwrap();
    assert!(chk.pass, "{chk:?}");
}

#[test]
fn delta_v_bound_random_suite() {
    let mut rng = seeded_rng(2024);
    let mut passes = 0;
    for case in 0..50 {
        let n = if case % 2 == 0 { 2 } else { 3 };
        let q = [1.0, 2.0, n as f64][case % 3];
        let grid = build_grid(n, 1.0, 400, 50.0).unwrap();
        let g = SmoothProfile::random(&mut rng).sample(&grid).unwrap();
        let chk = check_delta_v_bound(&solve_elliptic(&g).unwrap(), q).unwrap();
        if chk.pass {
            passes += 1;
        }
    }
    assert_eq!(passes, 50);
}

#[test]
fn radial_gradient_envelope_singular_2d() {
    let (n, q) = (2usize, 1.0);
    let grid = build_grid(n, 1.0, 400, 50.0).unwrap();
    let g = RadialField::from_singular_fn(&grid, |r| r.powf(-(n as f64) / q + 0.1)).unwrap();
    let m = lp_norm(&g, q).unwrap();
    let chk = check_radial_gradient_bound(&solve_elliptic(&g).unwrap(), q, m).unwrap();
    assert!(chk.pass, "{chk:?}");
}

#[test]
fn radial_gradient_envelope_gaussian_3d() {
    let grid = build_grid(3, 1.0, 400, 50.0).unwrap();
    let g = RadialField::from_fn(&grid, |r| 10.0 * (-(r * r) / 0.01).exp()).unwrap();
    let m = lp_norm(&g, 2.0).unwrap();
    let chk = check_radial_gradient_bound(&solve_elliptic(&g).unwrap(), 2.0, m).unwrap();
    assert!(chk.pass);
    assert!(chk.max_violation_ratio < 1.0, "{chk:?}");
}

#[test]
fn constant_data_decays_exponentially() {
    let grid = build_grid(2, 1.0, 100, 10.0).unwrap();
    let c = 3.0;
    let stepper = ParabolicStepper::new(&grid, TimeScheme::CrankNicolson);
    let zero = RadialField::zeros(&grid);
    let mut s = ParabolicState::new(RadialField::constant(&grid, c).unwrap(), 1.0).unwrap();
    for _ in 0..100 {
        s = stepper.step(&s, &zero, &zero, 1e-2).unwrap();
    }
    assert!((s.t - 1.0).abs() < 1e-12);
    for &v in s.v.values() {
        assert!((v - c / 1f64.exp()).abs() <= 1e-4 * c);
    }
}

#[test]
fn constant_source_attracts() {
    let grid = build_grid(2, 1.0, 100, 10.0).unwrap();
    let c = 2.0;
    let g = RadialField::constant(&grid, c).unwrap();
    let v0 = RadialField::from_fn(&grid, |r| c + (PI * r).cos()).unwrap();
    let w0 = v0.max_diff(&g);
    let stepper = ParabolicStepper::new(&grid, TimeScheme::CrankNicolson);
    let traj = integrate_parabolic(
        &stepper,
        ParabolicState::new(v0, 1.0).unwrap(),
        &|_| Ok(g.clone()),
        1e-2,
        10.0,
        1000,
    )
    .unwrap();
    let last = traj.last().unwrap();
    assert!((last.t - 10.0).abs() < 1e-9);
    assert!(last.v.max_diff(&g) <= (-10f64).exp() * w0 * (1.0 + 1e-3));
}

#[test]
fn long_time_limit_is_elliptic_solution() {
    let grid = build_grid(3, 1.0, 120, 20.0).unwrap();
    let g = RadialField::from_fn(&grid, |r| 4.0 * (-(r * r) / 0.04).exp()).unwrap();
    let target = solve_elliptic(&g).unwrap().v;
    let stepper = ParabolicStepper::new(&grid, TimeScheme::CrankNicolson);
    let traj = integrate_parabolic(
        &stepper,
        ParabolicState::new(RadialField::zeros(&grid), 1.0).unwrap(),
        &|_| Ok(g.clone()),
        2e-2,
        30.0,
        10_000,
    )
    .unwrap();
    assert!(traj.last().unwrap().v.max_diff(&target) <= 1e-6);
}

#[test]
fn nonnegative_data_stay_nonnegative() {
    let grid = build_grid(2, 1.0, 80, 50.0).unwrap();
    let mut rng = seeded_rng(5);
    let stepper = ParabolicStepper::new(&grid, TimeScheme::CrankNicolson);
    for _ in 0..10 {
        let g = random_nonnegative(&grid, 3.0, &mut rng);
        let mut s = ParabolicState::new(random_nonnegative(&grid, 1.0, &mut rng), 1.0).unwrap();
        for _ in 0..50 {
            s = stepper.step(&s, &g, &g, 0.05).unwrap();
            assert!(s.v.min() >= -1e-12);
        }
    }
}

#[test]
fn max_norm_does_not_grow_without_source() {
    let grid = build_grid(3, 1.0, 80, 20.0).unwrap();
    let mut rng = seeded_rng(9);
    let zero = RadialField::zeros(&grid);
    // rough data: implicit Euler is max-norm contractive for any step
    let ie = ParabolicStepper::new(&grid, TimeScheme::ImplicitEuler);
    for _ in 0..10 {
        let mut s = ParabolicState::new(random_nonnegative(&grid, 1.0, &mut rng), 1.0).unwrap();
        let mut prev = s.v.max_abs();
        for _ in 0..40 {
            s = ie.step(&s, &zero, &zero, 0.05).unwrap();
            assert!(s.v.max_abs() <= prev * (1.0 + 1e-14));
            prev = s.v.max_abs();
        }
    }
    // well-resolved data with Crank–Nicolson; steep bumps excite stiff modes
    // that CN damps only weakly
    let cn = ParabolicStepper::new(&grid, TimeScheme::CrankNicolson);
    for _ in 0..10 {
        let mut p = SmoothProfile::random(&mut rng);
        p.bump_height = 0.0;
        let mut s = ParabolicState::new(p.sample(&grid).unwrap(), 1.0).unwrap();
        let mut prev = s.v.max_abs();
        for _ in 0..40 {
            s = cn.step(&s, &zero, &zero, 0.01).unwrap();
            assert!(s.v.max_abs() <= prev * (1.0 + 1e-12), "{} > {}", s.v.max_abs(), prev);
            prev = s.v.max_abs();
        }
    }
}

#[test]
fn tau_rescaling_matches_unit_tau() {
    let grid = build_grid(2, 1.0, 64, 10.0).unwrap();
    let g = RadialField::from_fn(&grid, |r| (-(r * r) / 0.1).exp()).unwrap();
    let v0 = RadialField::from_fn(&grid, |r| 1.0 + (PI * r).cos()).unwrap();
    let stepper = ParabolicStepper::new(&grid, TimeScheme::CrankNicolson);
    let mut a = ParabolicState::new(v0.clone(), 1.0).unwrap();
    let mut b = ParabolicState::new(v0, 2.0).unwrap();
    for _ in 0..50 {
        a = stepper.step(&a, &g, &g, 0.01).unwrap();
        b = stepper.step(&b, &g, &g, 0.02).unwrap();
    }
    assert!((b.t - 2.0 * a.t).abs() < 1e-12);
    assert!((b.internal_time() - a.internal_time()).abs() < 1e-12);
    assert!(a.v.max_diff(&b.v) < 1e-12);
}

fn w1p_run(cells: usize, dt: f64) -> Vec<ParabolicState> {
    let (n, q) = (2usize, 1.25);
    let grid = build_grid(n, 1.0, cells, 50.0).unwrap();
    let g = RadialField::from_singular_fn(&grid, |r| r.powf(-(n as f64) / q + 0.1)).unwrap();
    let v0 = RadialField::from_fn(&grid, |r| 1.0 + 0.5 * (PI * r).cos()).unwrap();
    let stepper = ParabolicStepper::new(&grid, TimeScheme::CrankNicolson);
    integrate_parabolic(
        &stepper,
        ParabolicState::new(v0, 1.0).unwrap(),
        &|_| Ok(g.clone()),
        dt,
        2.0,
        10,
    )
    .unwrap()
}

#[test]
fn w1p_bound_is_mesh_stable() {
    let coarse = w1p_run(200, 0.01);
    let fine = w1p_run(400, 0.005);
    let rep = verify_w1p_bound(&[&coarse, &fine], 1.5, 1.25, (0.0, 2.0)).unwrap();
    assert!(rep.sup_per_level.iter().all(|s| s.is_finite() && *s > 0.0));
    assert!(rep.mesh_stability.unwrap() < 0.2, "{rep:?}");
}

#[test]
fn w1p_trivial_run_is_zero() {
    let grid = build_grid(2, 1.0, 64, 10.0).unwrap();
    let zero = RadialField::zeros(&grid);
    let stepper = ParabolicStepper::new(&grid, TimeScheme::CrankNicolson);
    let traj = integrate_parabolic(
        &stepper,
        ParabolicState::new(RadialField::constant(&grid, 2.0).unwrap(), 1.0).unwrap(),
        &|_| Ok(zero.clone()),
        0.05,
        1.0,
        1,
    )
    .unwrap();
    let rep = verify_w1p_bound(&[&traj], 1.5, 1.25, (0.0, 1.0)).unwrap();
    assert!(rep.sup_per_level[0] < 1e-9);
}
