use std::sync::Arc;

use tubeflow_core::asym1d::{solve_leading, Fitting, Settings1D};
use tubeflow_core::femcore::mesh_domain;
use tubeflow_core::geometry::Point;
use tubeflow_core::mapdd::*;
use tubeflow_core::stokes2d::*;
use tubeflow_core::transport2d::*;
use tubeflow_core::tubegraph::*;
use tubeflow_core::Error;

struct Setup {
    graph: TubeGraph,
    domain: PolygonalDomain,
    flow: NetworkFlow,
    velocity: CompositeVelocity,
}

fn setup(spec: &GraphSpec, k: f64, ports: bool, h: f64) -> Setup {
    let graph = build_graph(spec).unwrap();
    let domain = instantiate_domain(&graph).unwrap();
    let dec = decompose_mapdd(&domain, k, ports).unwrap();
    let space = Arc::new(HybridSpace::new(&domain, &dec, MapddSettings::new(h)).unwrap());
    let flow = solve_network_flow(&graph, 1.0).unwrap();
    let velocity = composite_velocity(&space, &flow, &ViscosityField::from_graph(&graph, 1.0)).unwrap();
    Setup { graph, domain, flow, velocity }
}

fn ports_of(g: &TubeGraph) -> Vec<(BoundaryTag, f64)> {
    g.ports().map(|n| (BoundaryTag::Port(n), g.port_data(n).unwrap().0)).collect()
}

fn stenosed(eps: f64, inflow: f64) -> GraphSpec {
    let mut spec = straight_channel(eps, 1.0, 1.0, 1.0, 0.5, inflow);
    spec.edges[0].stenoses.push(StenosisMarker {
        s: 0.5,
        viscosity: RadialBump { amplitude: 1.0, radius: 1.0 },
        diffusivity: RadialBump { amplitude: 0.5, radius: 1.0 },
        velocity: RadialBump::zero(),
    });
    spec
}

fn y(eps: f64, inflow: f64) -> GraphSpec {
    bifurcation(eps, 1.0, 1.0, std::f64::consts::FRAC_PI_4, [1.0, 0.7, 0.7], 1.0, 0.5, inflow)
}

#[test]
fn composite_velocity_is_poiseuille_in_a_plain_channel() {
    let s = setup(&straight_channel(0.05, 1.0, 1.0, 1.0, 0.5, 0.02), 1.0, true, 0.05 / 6.0);
    assert_eq!(s.velocity.zone_fields.len(), 2);
    let p = Poiseuille::with_flux(0.02, 1.0, 0.05);
    for i in 0..=50 {
        for j in 0..=6 {
            let x = Point::new(i as f64 / 50.0, -0.025 + 0.05 * j as f64 / 6.0);
            let v = s.velocity.at(x);
            assert!((v.x - p.velocity(x.y)).abs() <= 1e-9 * p.velocity(0.0).abs(), "{x:?}");
            assert!(v.y.abs() <= 1e-9 * p.velocity(0.0).abs());
        }
    }
}

#[test]
fn composite_velocity_carries_the_edge_fluxes_through_cut_lines() {
    let s = setup(&y(0.05, 0.05), 1.0, false, 0.035 / 4.0);
    let space = &s.velocity.space;
    let z = space.decomposition.zone_of_feature(Feature::Node(1)).unwrap();
    for &c in &space.decomposition.zones[z].cuts {
        let cut = space.decomposition.cuts[c];
        let out = boundary_flux(&s.velocity.zone_fields[z], BoundaryTag::CutLine(c));
        // outward from the zone is along the edge when the zone lies before the cut
        let along = if cut.zone_before { out } else { -out };
        let q = s.flow.flux[cut.edge];
        assert!((along - q).abs() <= 1e-8 * q.abs(), "cut {c}: {along} vs {q}");
    }
}

#[test]
fn composite_velocity_vanishes_without_flow() {
    let s = setup(&y(0.05, 0.0), 1.0, true, 0.035 / 4.0);
    for f in &s.velocity.zone_fields {
        assert!(f.max_abs() == 0.0);
    }
    assert_eq!(s.velocity.at(Point::new(-0.5, 0.0)), Point::default());
}

#[test]
fn composite_velocity_rejects_unbalanced_flow() {
    let graph = build_graph(&y(0.05, 0.05)).unwrap();
    let domain = instantiate_domain(&graph).unwrap();
    let dec = decompose_mapdd(&domain, 1.0, false).unwrap();
    let space = Arc::new(HybridSpace::new(&domain, &dec, MapddSettings::new(0.035 / 4.0)).unwrap());
    let mut flow = solve_network_flow(&graph, 1.0).unwrap();
    flow.flux[1] *= 1.1;
    let r = composite_velocity(&space, &flow, &ViscosityField::constant(1.0));
    assert!(matches!(r, Err(Error::IncompatibleFlux { .. })));
}

#[test]
fn constraint_table_covers_every_cut_line_once() {
    let s = setup(&stenosed(0.05, 0.02), 1.0, true, 0.05 / 4.0);
    let space = &s.velocity.space;
    for (z, zone) in space.decomposition.zones.iter().enumerate() {
        for &c in &zone.cuts {
            for d in space.zone_meshes[z].tagged_p2(BoundaryTag::CutLine(c)) {
                assert_eq!(space.constraints.get(&(z, d)), Some(&c));
            }
        }
    }
    let total: usize = space
        .decomposition
        .zones
        .iter()
        .enumerate()
        .map(|(z, zone)| zone.cuts.iter().map(|&c| space.zone_meshes[z].tagged_p2(BoundaryTag::CutLine(c)).len()).sum::<usize>())
        .sum();
    assert_eq!(total, space.constraints.len());
}

#[test]
fn skeleton_only_channel_matches_the_network_solve() {
    let spec = straight_channel(0.05, 1.0, 1.0, 1.0, 0.5, 0.02);
    let s = setup(&spec, 1.0, false, 0.05 / 4.0);
    assert!(s.velocity.space.decomposition.zones.is_empty());
    let params = TransportParams::new(0.5, 0.4);
    let n = 64;
    let graph = &s.graph;
    let space = HybridSpace::new(&s.domain, &s.velocity.space.decomposition, MapddSettings { h: 0.0125, h1d: Some(1.0 / n as f64) }).unwrap();
    let vel = CompositeVelocity { space: Arc::new(space), ..s.velocity.clone() };
    let hybrid = solve_mapdd_transport(&vel, &params, &ports_of(graph)).unwrap();
    let one_d = solve_leading(graph, &s.flow, &params, Settings1D { n_per_edge: n, fitting: Fitting::Never }).unwrap();
    for (i, &x) in one_d.grids[0].points().iter().enumerate() {
        let avg = hybrid.average(0, x).unwrap();
        assert!((avg - one_d.profiles[0][0][i]).abs() < 1e-8, "x = {x}");
    }
}

#[test]
fn pure_diffusion_is_reproduced_exactly_with_port_zones() {
    let s = setup(&straight_channel(0.05, 1.0, 1.0, 1.0, 0.5, 0.0), 1.0, true, 0.05 / 4.0);
    let params = TransportParams::new(1.0, 0.0);
    let hybrid = solve_mapdd_transport(&s.velocity, &params, &ports_of(&s.graph)).unwrap();
    for i in 0..=40 {
        for t in [-0.02, 0.0, 0.025] {
            let x = Point::new(i as f64 / 40.0, t);
            assert!((hybrid.value(x).unwrap() - (1.0 - 0.5 * x.x)).abs() < 1e-10);
        }
    }
    let mesh = Arc::new(mesh_domain(&s.domain, 0.0125).unwrap());
    let full = solve_transport(&mesh, &s.graph, &params, Velocity::Zero, &ports_of(&s.graph)).unwrap();
    let r = mapdd_error_report(&hybrid, &full).unwrap();
    assert!(r.h1_relative < 1e-8, "{r:?}");
}

#[test]
fn zero_data_gives_zero() {
    let s = setup(&y(0.05, 0.05), 1.0, true, 0.035 / 4.0);
    let ports: Vec<_> = s.graph.ports().map(|n| (BoundaryTag::Port(n), 0.0)).collect();
    let h = solve_mapdd_transport(&s.velocity, &TransportParams::new(1.0, 0.4), &ports).unwrap();
    assert!(h.zones.iter().all(|f| f.max_abs() == 0.0));
    assert!(h.segments.iter().all(|p| p.values.iter().all(|&v| v == 0.0)));
}

#[test]
fn hybrid_conserves_mass_on_a_bifurcation() {
    let s = setup(&y(0.05, 0.05), 1.0, true, 0.035 / 4.0);
    let mut params = TransportParams::new(0.5, 0.4);
    params.source = Some(Arc::new(|e, x| if e == 0 && (0.3..0.6).contains(&x) { 1.0 } else { 0.0 }));
    let h = solve_mapdd_transport(&s.velocity, &params, &ports_of(&s.graph)).unwrap();
    assert!(h.conservation_defect() <= 1e-6, "defect {}", h.conservation_defect());
    assert!(h.source_total > 0.0);
}

#[test]
fn hybrid_conserves_mass_with_an_exact_velocity() {
    let s = setup(&straight_channel(0.05, 1.0, 1.0, 1.0, 0.5, 0.02), 1.0, true, 0.05 / 4.0);
    let h = solve_mapdd_transport(&s.velocity, &TransportParams::new(0.5, -0.4), &ports_of(&s.graph)).unwrap();
    assert!(h.divergence_source.abs() < 1e-12);
    assert!(h.conservation_defect() <= 1e-6);
}

#[test]
fn hybrid_is_single_valued_on_cut_lines() {
    let s = setup(&stenosed(0.05, 0.02), 1.0, false, 0.05 / 4.0);
    let h = solve_mapdd_transport(&s.velocity, &TransportParams::new(1.0, 0.4), &ports_of(&s.graph)).unwrap();
    let space = &h.space;
    for cut in &space.decomposition.cuts {
        let seg = &h.segments[cut.segment];
        let end = if cut.zone_before { seg.values[0] } else { *seg.values.last().unwrap() };
        for d in space.zone_meshes[cut.zone].tagged_p2(BoundaryTag::CutLine(cut.id)) {
            assert_eq!(h.zones[cut.zone].values[d], end);
        }
    }
}

#[test]
fn error_report_of_a_solution_against_itself_is_zero() {
    let s = setup(&stenosed(0.05, 0.02), 1.0, false, 0.05 / 4.0);
    let h = solve_mapdd_transport(&s.velocity, &TransportParams::new(1.0, 0.4), &ports_of(&s.graph)).unwrap();
    let mesh = mesh_domain(&s.domain, 0.0125).unwrap();
    let [l2, h1, n0, _] = difference_norms(&mesh, &h, &h).unwrap();
    assert_eq!((l2, h1), (0.0, 0.0));
    assert!(n0 > 0.0);
}

#[test]
fn error_report_rejects_a_different_domain() {
    let s = setup(&stenosed(0.05, 0.02), 1.0, false, 0.05 / 4.0);
    let params = TransportParams::new(1.0, 0.0);
    let h = solve_mapdd_transport(&s.velocity, &params, &ports_of(&s.graph)).unwrap();
    let other = build_graph(&straight_channel(0.05, 1.2, 1.0, 1.0, 0.5, 0.0)).unwrap();
    let d = instantiate_domain(&other).unwrap();
    let mesh = Arc::new(mesh_domain(&d, 0.0125).unwrap());
    let full = solve_transport(&mesh, &other, &params, Velocity::Zero, &ports_of(&other)).unwrap();
    assert!(matches!(mapdd_error_report(&h, &full), Err(Error::SetupMismatch(_))));
}

#[test]
fn stenosed_channel_hybrid_is_close_to_the_full_solve() {
    let s = setup(&stenosed(0.05, 0.02), 1.0, false, 0.05 / 4.0);
    let params = TransportParams::new(1.0, 0.4).with_graph_perturbations(&s.graph);
    let h = solve_mapdd_transport(&s.velocity, &params, &ports_of(&s.graph)).unwrap();
    let mesh = Arc::new(mesh_domain(&s.domain, 0.0125).unwrap());
    let v = |x: Point| s.velocity.at(x);
    let full = solve_transport(&mesh, &s.graph, &params, Velocity::Analytic(&v), &ports_of(&s.graph)).unwrap();
    let r = mapdd_error_report(&h, &full).unwrap();
    assert!(r.h1_relative <= 0.02, "{r:?}");
    assert!(r.dof_hybrid < r.dof_full);
}

#[test]
fn larger_zoom_zones_do_not_increase_the_error() {
    let mut last = f64::INFINITY;
    for k in [0.5, 1.0, 2.0] {
        let s = setup(&stenosed(0.05, 0.02), k, false, 0.05 / 4.0);
        let params = TransportParams::new(1.0, 0.4).with_graph_perturbations(&s.graph);
        let h = solve_mapdd_transport(&s.velocity, &params, &ports_of(&s.graph)).unwrap();
        let mesh = Arc::new(mesh_domain(&s.domain, 0.0125).unwrap());
        let v = |x: Point| s.velocity.at(x);
        let full = solve_transport(&mesh, &s.graph, &params, Velocity::Analytic(&v), &ports_of(&s.graph)).unwrap();
        let e = mapdd_error_report(&h, &full).unwrap().h1_broken;
        assert!(e <= last, "K = {k}: {e} after {last}");
        last = e;
    }
}
