use std::sync::Arc;

use proptest::prelude::*;
use tubeflow_core::asym1d::*;
use tubeflow_core::femcore::mesh_domain;
use tubeflow_core::geometry::Point;
use tubeflow_core::stokes2d::solve_network_flow;
use tubeflow_core::transport2d::TransportParams;
use tubeflow_core::tubegraph::*;
use tubeflow_core::Error;

fn channel(eps: f64, q0: f64, q1: f64, amplitude: f64) -> TubeGraph {
    build_graph(&straight_channel(eps, 1.0, 1.0, q0, q1, amplitude * eps / 6.0)).unwrap()
}

fn leading(g: &TubeGraph, kappa: f64, beta: f64) -> Edge1DSolution {
    let flow = solve_network_flow(g, 1.0).unwrap();
    solve_leading(g, &flow, &TransportParams::new(kappa, beta), Settings1D::default()).unwrap()
}

#[test]
fn mean_velocity_examples() {
    assert!((mean_velocity(1.0, 1.0) - 1.0 / 6.0).abs() < 1e-15);
    // midpoint rule on the paper profile
    let n = 100_000;
    let q: f64 = (0..n).map(|i| -0.5 + (i as f64 + 0.5) / n as f64).map(|x| (0.25 - x * x) / n as f64).sum();
    assert!((q - 1.0 / 6.0).abs() < 1e-9);
    assert!(mean_velocity(1e-9, 3.0) < 1e-26);
    assert_eq!(mean_velocity(0.7, 0.0), 0.0);
}

#[test]
fn pure_diffusion_is_linear() {
    let g = channel(0.05, 1.0, 0.5, 0.0);
    let s = leading(&g, 1.0, 0.0);
    for (i, x) in s.grids[0].points().iter().enumerate() {
        assert!((s.profiles[0][0][i] - (1.0 - 0.5 * x)).abs() < 1e-10);
    }
    assert!((s.end_derivatives[0][0][0] + 0.5).abs() < 1e-10);
    assert!((s.end_derivatives[0][0][1] - 0.5).abs() < 1e-10);
}

/// Closed form on `[0, 1]` of `-a c'' + v c' - r c = 0`, `c(0) = 1`, `c(1) = 0.5`.
fn closed_form(a: f64, v: f64, r: f64) -> impl Fn(f64) -> f64 {
    let disc = v * v - 4.0 * a * r;
    let basis: Box<dyn Fn(f64) -> (f64, f64)> = if disc > 0.0 {
        let (r1, r2) = ((v + disc.sqrt()) / (2.0 * a), (v - disc.sqrt()) / (2.0 * a));
        Box::new(move |x| ((r1 * (x - 1.0)).exp(), (r2 * x).exp()))
    } else {
        let (s, w) = (v / (2.0 * a), (-disc).sqrt() / (2.0 * a));
        Box::new(move |x| ((s * x).exp() * (w * x).cos(), (s * x).exp() * (w * x).sin()))
    };
    let (p0, q0) = basis(0.0);
    let (p1, q1) = basis(1.0);
    let det = p0 * q1 - p1 * q0;
    let c1 = (1.0 * q1 - 0.5 * q0) / det;
    let c2 = (p0 * 0.5 - p1 * 1.0) / det;
    move |x| {
        let (p, q) = basis(x);
        c1 * p + c2 * q
    }
}

#[test]
fn constant_coefficients_match_characteristic_roots() {
    for (kappa, beta, amp) in [(1.0, 0.4, 1.0), (0.3, -0.4, 2.0), (0.05, 0.0, 1.0), (0.1, -1.0, -3.0)] {
        let g = channel(0.05, 1.0, 0.5, amp);
        let s = leading(&g, kappa, beta);
        let c = s.coefficients[0];
        assert!((c.v - amp / 6.0).abs() < 1e-12);
        let exact = closed_form(c.a, c.v, c.r);
        for (i, x) in s.grids[0].points().iter().enumerate() {
            assert!((s.profiles[0][0][i] - exact(*x)).abs() < 1e-8, "kappa {kappa} beta {beta} at {x}");
        }
    }
}

#[test]
fn symmetric_y_without_flow_is_constant() {
    let g = build_graph(&bifurcation(0.05, 1.0, 1.0, 0.8, [1.0, 0.7, 0.7], 0.7, 0.7, 0.0)).unwrap();
    let s = leading(&g, 0.5, 0.0);
    assert!((s.nodal[0][1] - 0.7).abs() < 1e-10);
    assert!(s.kirchhoff[1].abs() <= 1e-10);
}

#[test]
fn kirchhoff_and_total_flux_balance_at_junction() {
    let g = build_graph(&bifurcation(0.05, 1.0, 1.0, 0.8, [1.0, 0.7, 0.5], 1.0, 0.5, 0.05 / 6.0)).unwrap();
    let flow = solve_network_flow(&g, 1.0).unwrap();
    let s = solve_leading(&g, &flow, &TransportParams::new(0.2, 0.4), Settings1D::default()).unwrap();
    assert!(s.kirchhoff[1].abs() <= 1e-10, "{}", s.kirchhoff[1]);
    // diffusive + convective outflow (away from the node) balances
    let node = 1;
    let mut total = 0.0;
    let mut scale = 0.0;
    for inc in g.incident(node) {
        let e = inc.edge;
        let c = s.coefficients[e];
        let (slot, sign) = match inc.end {
            End::Start => (0, 1.0),
            End::Finish => (1, -1.0),
        };
        let diffusive = -c.a * s.end_derivatives[0][e][slot];
        let convective = sign * c.v * s.nodal[0][node];
        total += diffusive + convective;
        scale += diffusive.abs() + convective.abs();
    }
    assert!(total.abs() <= 1e-10 * scale.max(1.0), "{total}");
}

#[test]
fn orientation_reversal_keeps_profiles() {
    let fwd = channel(0.05, 1.0, 0.5, 1.5);
    let mut spec = fwd.to_spec(0.05);
    let e = &mut spec.edges[0];
    std::mem::swap(&mut e.from, &mut e.to);
    let rev = build_graph(&spec).unwrap();
    let a = leading(&fwd, 0.2, 0.4);
    let b = leading(&rev, 0.2, 0.4);
    let n = a.grids[0].n;
    for i in 0..=n {
        assert!((a.profiles[0][0][i] - b.profiles[0][0][n - i]).abs() < 1e-12);
    }
    // away-from-node derivatives swap ends, raw derivatives flip sign
    assert!((a.end_derivatives[0][0][0] - b.end_derivatives[0][0][1]).abs() < 1e-9);
    assert!((a.end_derivatives[0][0][1] - b.end_derivatives[0][0][0]).abs() < 1e-9);
}

#[test]
fn fitting_keeps_convection_dominated_profiles_monotone() {
    let g = channel(0.05, 1.0, 0.5, 60.0);
    let flow = solve_network_flow(&g, 1.0).unwrap();
    let p = TransportParams::new(1e-3, 0.0);
    let coarse = |f| solve_leading(&g, &flow, &p, Settings1D { n_per_edge: 64, fitting: f }).unwrap();
    let fit = coarse(Fitting::Auto);
    assert!(fit.fitted[0] && fit.peclet_warning());
    assert!(fit.profiles[0][0].iter().all(|&v| (0.5 - 1e-12..=1.0 + 1e-12).contains(&v)));
    let plain = coarse(Fitting::Never);
    assert!(plain.profiles[0][0].iter().any(|&v| !(0.5..=1.0).contains(&v)));
}

#[test]
fn corrector_structure() {
    let g = channel(0.05, 1.0, 0.5, 1.0);
    let s = leading(&g, 0.5, 0.4);
    let c = corrector_recursion(&g, &s, 3).unwrap();
    assert!(c.tilde[0].is_zero() && c.tilde[1].is_zero());
    assert_eq!(c.tilde[2].degree(1e-12), Some(4));
    // degree 2j is the bound; the recursion never exceeds it
    for (j, t) in c.tilde.iter().enumerate() {
        assert!(t.degree(1e-12).map_or(true, |d| d <= 2 * j));
        assert_eq!(t.coeffs[0][0].len(), 2 * j + 1);
        for i in 0..=s.grids[0].n {
            assert!(t.mean(0, i, 1.0).abs() < 1e-12);
        }
    }
    assert!(c.solvability_defect < 1e-8);
    assert!(matches!(corrector_recursion(&g, &s, 4), Err(Error::OrderUnsupported { .. })));
}

#[test]
fn transverse_neumann_data_hold() {
    let g = channel(0.05, 1.0, 0.5, 1.0);
    let s = leading(&g, 0.5, 0.4);
    let c = corrector_recursion(&g, &s, 2).unwrap();
    let t2 = &c.tilde[2];
    for i in (0..=s.grids[0].n).step_by(37) {
        let d = poly::derivative(&t2.coeffs[0][i]);
        let c0 = s.profiles[0][0][i];
        assert!((0.5 * poly::eval(&d, 0.5) - 0.4 * c0).abs() < 1e-10);
        assert!((-0.5 * poly::eval(&d, -0.5) - 0.4 * c0).abs() < 1e-10);
    }
}

#[test]
fn wall_corrector_examples() {
    let z = wall_corrector(&[0.0; 3], &[0.0; 3], 1.0, 1.0, 1.0);
    assert!(z.iter().flatten().all(|&c| c == 0.0));
    let one = wall_corrector(&[1.0], &[1.0], 1.0, 1.0, 1.0);
    let d = poly::derivative(&one[0]);
    assert_eq!(poly::eval(&d, 0.5), 1.0);
    assert_eq!(poly::eval(&d, -0.5), -1.0);
    // symmetric traces give an even corrector (odd derivative)
    assert_eq!(one[0][1], 0.0);
    assert_eq!(one[0][3], 0.0);
}

proptest! {
    #[test]
    fn wall_corrector_neumann_identity(top in -3.0..3.0f64, bottom in -3.0..3.0f64, theta in 0.1..1.0f64,
                                       kappa in 0.05..5.0f64, beta in -2.0..2.0f64) {
        let w = wall_corrector(&[top], &[bottom], theta, kappa, beta);
        let d = poly::derivative(&w[0]);
        let h = 0.5 * theta;
        let scale = 1.0 + (beta * top).abs() + (beta * bottom).abs();
        prop_assert!((kappa * poly::eval(&d, h) - beta * top).abs() < 1e-12 * scale);
        prop_assert!((kappa * poly::eval(&d, -h) + beta * bottom).abs() < 1e-12 * scale);
    }

    #[test]
    fn cutoff_is_a_smooth_step(t in -4.0..4.0f64) {
        let r = cutoff(t);
        prop_assert!((0.0..=1.0).contains(&r));
        if t.abs() <= 1.0 { prop_assert_eq!(r, 0.0); }
        if t.abs() >= 2.0 { prop_assert_eq!(r, 1.0); }
        prop_assert_eq!(r, cutoff(-t));
    }
}

#[test]
fn leading_reconstruction_is_transversally_constant() {
    let g = channel(0.05, 1.0, 0.5, 1.0);
    let d = instantiate_domain(&g).unwrap();
    let s = leading(&g, 0.5, 0.0);
    let a = AsymptoticAnsatz::build(&g, &s, 0).unwrap();
    let mesh = Arc::new(mesh_domain(&d, 0.05 / 4.0).unwrap());
    let f = reconstruct_2d(&a, &d, &mesh, &[]).unwrap();
    for i in 0..mesh.n_p2() {
        let x = mesh.p2_node(i).x;
        assert!((f.values[i] - s.value(0, 0, x)).abs() < 1e-12);
    }
    assert!(matches!(a.value(&d, &[], Point::new(0.5, 1.0)), Err(Error::UncoveredPoint { .. })));
}

fn residual(eps: f64, k: usize) -> ResidualReport {
    let g = channel(eps, 1.0, 0.5, 1.0);
    let s = leading(&g, 0.5, 0.4);
    ansatz_residual(&AsymptoticAnsatz::build(&g, &s, k).unwrap())
}

/// Every wall flux term of order `j` is balanced by `c̃ⱼ₊₂` or by the wall
/// corrector, and the corrector vanishes on both walls, so the Robin defect
/// is zero up to rounding for every ε (in particular `O(ε^{k+2})`).
#[test]
fn robin_defect_vanishes_for_every_epsilon() {
    for eps in [0.1, 0.05, 0.025] {
        let r = residual(eps, 2);
        assert!(r.robin < 1e-13, "eps {eps}: {}", r.robin);
    }
}

#[test]
fn interior_residual_decreases_with_order() {
    let r: Vec<f64> = (0..=2).map(|k| residual(0.05, k).interior).collect();
    assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
    let (a, b) = (residual(0.1, 2), residual(0.05, 2));
    assert!(b.interior_scaled <= 1.5 * a.interior_scaled, "{} {}", a.interior_scaled, b.interior_scaled);
}

#[test]
fn trivial_residual_for_linear_profile() {
    let g = channel(0.05, 1.0, 0.5, 0.0);
    let s = leading(&g, 1.0, 0.0);
    let r = ansatz_residual(&AsymptoticAnsatz::build(&g, &s, 0).unwrap());
    assert!(r.interior <= 1e-8, "{}", r.interior);
}
