use std::sync::Arc;

use tubeflow_core::femcore::meshing::{mesh_pieces, Face, Piece, RectPiece};
use tubeflow_core::femcore::{mesh_domain, Family, Field, Locator, Mesh};
use tubeflow_core::geometry::Point;
use tubeflow_core::stokes2d::{port_poiseuille_bcs, solve_network_flow, solve_stokes, ViscosityField};
use tubeflow_core::transport2d::*;
use tubeflow_core::tubegraph::*;

const EPS: f64 = 0.05;

fn channel(flux: f64) -> (TubeGraph, PolygonalDomain) {
    let g = build_graph(&straight_channel(EPS, 1.0, 1.0, 1.0, 0.5, flux)).unwrap();
    let d = instantiate_domain(&g).unwrap();
    (g, d)
}

fn ports() -> Vec<(BoundaryTag, f64)> {
    vec![(BoundaryTag::Port(0), 1.0), (BoundaryTag::Port(1), 0.5)]
}

#[test]
fn pure_diffusion_is_linear() {
    let (g, d) = channel(0.0);
    let mesh = Arc::new(mesh_domain(&d, EPS / 4.0).unwrap());
    let sol = solve_transport(&mesh, &g, &TransportParams::new(1.0, 0.0), Velocity::Zero, &ports()).unwrap();
    for i in 0..mesh.n_p2() {
        let p = mesh.p2_node(i);
        assert!((sol.concentration.values[i] - (1.0 - 0.5 * p.x)).abs() < 1e-10);
    }
    let avg = cross_section_average(&sol.concentration, &sol.locator, &g, &d.trims, 0, &[0.0, 0.3, 1.0]).unwrap();
    for (s, a) in [0.0, 0.3, 1.0].iter().zip(&avg) {
        assert!((a - (1.0 - 0.5 * s)).abs() < 1e-10);
    }
    // outflow through the exit equals inflow through the entrance
    assert!(sol.conservation_defect() < 1e-10);
    let flux = total_flux_density(&sol, &TransportParams::new(1.0, 0.0), Velocity::Zero);
    for i in 0..mesh.n_p2() {
        assert!((flux.values[i] - 0.5).abs() < 1e-9);
    }
}

#[test]
fn cross_section_averages_of_simple_fields() {
    let (g, d) = channel(0.0);
    let mesh = Arc::new(mesh_domain(&d, EPS / 4.0).unwrap());
    let loc = Locator::new(&mesh);
    let c3 = Field::interpolate(mesh.clone(), Family::P2, |_| 3.0);
    let y = Field::interpolate(mesh.clone(), Family::P2, |p| p.y);
    let s = [0.1, 0.5, 0.77];
    for v in cross_section_average(&c3, &loc, &g, &d.trims, 0, &s).unwrap() {
        assert!((v - 3.0).abs() < 1e-13);
    }
    for v in cross_section_average(&y, &loc, &g, &d.trims, 0, &s).unwrap() {
        assert!(v.abs() < 1e-15);
    }
    assert!(cross_section_average(&c3, &loc, &g, &d.trims, 0, &[1.5]).is_err());
}

#[test]
fn constant_field_flux_is_the_velocity() {
    let (g, d) = channel(EPS / 6.0);
    let flow = solve_network_flow(&g, 1.0).unwrap();
    let mesh = Arc::new(mesh_domain(&d, EPS / 4.0).unwrap());
    let st = solve_stokes(&mesh, &ViscosityField::constant(1.0), &port_poiseuille_bcs(&g, &flow), None).unwrap();
    let params = TransportParams::new(1.0, 0.0);
    let two = vec![(BoundaryTag::Port(0), 1.0), (BoundaryTag::Port(1), 1.0)];
    let sol = solve_transport(&mesh, &g, &params, Velocity::Field(&st.velocity), &two).unwrap();
    let f = total_flux_density(&sol, &params, Velocity::Field(&st.velocity));
    for i in 0..f.values.len() {
        assert!((f.values[i] - st.velocity.values[i]).abs() < 1e-9);
    }
}

fn poiseuille_run(kappa: f64, beta: f64) -> (TubeGraph, Arc<Mesh>, TransportSolution, Field) {
    let (g, d) = channel(EPS / 6.0);
    let flow = solve_network_flow(&g, 1.0).unwrap();
    let mesh = Arc::new(mesh_domain(&d, EPS / 4.0).unwrap());
    let st = solve_stokes(&mesh, &ViscosityField::constant(1.0), &port_poiseuille_bcs(&g, &flow), None).unwrap();
    let params = TransportParams::new(kappa, beta);
    let sol = solve_transport(&mesh, &g, &params, Velocity::Field(&st.velocity), &ports()).unwrap();
    (g, mesh, sol, st.velocity)
}

#[test]
fn conservation_audit_with_sorption_and_flow() {
    for beta in [0.4, -0.4] {
        let (_, _, sol, _) = poiseuille_run(0.1, beta);
        assert!(sol.conservation_defect() < 1e-6, "beta {beta}: {}", sol.conservation_defect());
        // Poiseuille is reproduced exactly, so nothing is created by div V
        assert!(sol.divergence_source.abs() < 1e-12, "{}", sol.divergence_source);
    }
}

#[test]
fn conservation_audit_at_a_junction_counts_discrete_divergence() {
    let g = build_graph(&bifurcation(EPS, 1.0, 1.0, std::f64::consts::FRAC_PI_4, [1.0, 0.7, 0.7], 1.0, 0.5, EPS)).unwrap();
    let d = instantiate_domain(&g).unwrap();
    let flow = solve_network_flow(&g, 1.0).unwrap();
    let mesh = Arc::new(mesh_domain(&d, 0.7 * EPS / 4.0).unwrap());
    let st = solve_stokes(&mesh, &ViscosityField::constant(1.0), &port_poiseuille_bcs(&g, &flow), None).unwrap();
    let ports: Vec<_> = g.ports().map(|n| (BoundaryTag::Port(n), g.port_data(n).unwrap().0)).collect();
    let sol = solve_transport(&mesh, &g, &TransportParams::new(0.1, 0.4), Velocity::Field(&st.velocity), &ports).unwrap();
    assert!(sol.divergence_source != 0.0);
    assert!(sol.conservation_defect() < 1e-10, "{}", sol.conservation_defect());
}

#[test]
fn robin_sign_removes_mass_for_negative_beta() {
    let (_, _, sol, _) = poiseuille_run(0.1, -0.4);
    assert!(sol.wall_sorption <= 0.0);
}

#[test]
fn maximum_principle_without_sources_and_sorption() {
    let (_, _, sol, _) = poiseuille_run(0.05, 0.0);
    assert!(!sol.peclet_warning);
    for v in &sol.concentration.values {
        assert!(*v >= 0.5 - 1e-8 && *v <= 1.0 + 1e-8, "{v}");
    }
}

/// Exact solution `f(x) = sin(πx) + x` of `-κ f'' + f' = g` in a unit square
/// with uniform unit velocity, no-flux walls and Dirichlet ends.
fn manufactured_error(h: f64) -> f64 {
    let g = build_graph(&straight_channel(EPS, 1.0, 1.0, 0.0, 1.0, 0.0)).unwrap();
    let piece = Piece::Rect(RectPiece {
        rect: EdgeRect { edge: 0, start: 0.0, end: 1.0, half_width: 0.5 },
        start_face: Face::Tagged(BoundaryTag::Port(0)),
        end_face: Face::Tagged(BoundaryTag::Port(1)),
        breaks: vec![],
        grading: None,
    });
    let mesh = Arc::new(mesh_pieces(&g, &[piece], h).unwrap());
    let pi = std::f64::consts::PI;
    let kappa = 0.5;
    let params = TransportParams::new(kappa, 0.0)
        .with_source(Arc::new(move |_, s| kappa * pi * pi * (pi * s).sin() + pi * (pi * s).cos() + 1.0));
    let v = |_: Point| Point::new(1.0, 0.0);
    let sol = solve_transport(&mesh, &g, &params, Velocity::Analytic(&v), &[(BoundaryTag::Port(0), 0.0), (BoundaryTag::Port(1), 1.0)])
        .unwrap();
    sol.concentration.integrate(|p, c, _| (c[0] - (pi * p.x).sin() - p.x).powi(2)).sqrt()
}

#[test]
fn manufactured_solution_converges_at_third_order() {
    let hs = [0.25, 0.125, 0.0625];
    let e: Vec<f64> = hs.iter().map(|&h| manufactured_error(h)).collect();
    let slope = ((e[0] / e[2]).ln()) / ((hs[0] / hs[2]).ln());
    assert!((slope - 3.0).abs() <= 0.3, "slope {slope} from {e:?}");
}
