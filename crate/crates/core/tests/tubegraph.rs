use tubeflow_core::geometry::Point;
use tubeflow_core::tubegraph::*;
use tubeflow_core::Error;

fn y_graph(eps: f64) -> TubeGraph {
    build_graph(&bifurcation(eps, 1.0, 1.0, core::f64::consts::FRAC_PI_4, [1.0, 0.7, 0.7], 1.0, 0.5, 1.0)).unwrap()
}

fn stenosed_channel(eps: f64) -> TubeGraph {
    let mut spec = straight_channel(eps, 1.0, 1.0, 1.0, 0.5, 1.0);
    spec.edges[0].stenoses.push(StenosisMarker {
        s: 0.5,
        viscosity: RadialBump { amplitude: 1.0, radius: 1.0 },
        diffusivity: RadialBump { amplitude: 0.5, radius: 1.0 },
        velocity: RadialBump::zero(),
    });
    build_graph(&spec).unwrap()
}

#[test]
fn straight_channel_is_a_rectangle_with_two_ports() {
    let g = build_graph(&straight_channel(0.05, 1.0, 1.0, 1.0, 0.5, 1.0)).unwrap();
    let d = instantiate_domain(&g).unwrap();
    assert_eq!(d.rects.len(), 1);
    assert!(d.junctions.is_empty());
    let c = d.rects[0].corners(&g);
    assert_eq!(c[0], Point::new(0.0, -0.025));
    assert_eq!(c[2], Point::new(1.0, 0.025));
    assert!((d.boundary_length(BoundaryTag::Port(0)) - 0.05).abs() < 1e-15);
    assert!((d.boundary_length(BoundaryTag::Port(1)) - 0.05).abs() < 1e-15);
    assert!((d.area() - 0.05).abs() < 1e-15);
    assert_eq!(d.loops().unwrap().len(), 1);
}

#[test]
fn y_domain_has_three_rectangles_and_one_junction() {
    let g = y_graph(0.05);
    let d = instantiate_domain(&g).unwrap();
    assert_eq!(d.rects.len(), 3);
    assert_eq!(d.junctions.len(), 1);
    // 6 long walls + 3 junction walls + 3 ports
    assert_eq!(d.boundary.len(), 12);
    let ports = d.boundary.iter().filter(|p| matches!(p.tag, BoundaryTag::Port(_))).count();
    assert_eq!(ports, 3);
    assert_eq!(d.loops().unwrap().len(), 1);
    let additive = d.area();
    let enclosed = d.boundary_area();
    assert!((additive - enclosed).abs() <= 1e-12 * additive, "{additive} vs {enclosed}");
}

#[test]
fn area_additivity_matches_trimmed_rectangles() {
    let g = y_graph(0.05);
    let d = instantiate_domain(&g).unwrap();
    let rect_sum: f64 = g
        .edges
        .iter()
        .map(|e| e.theta * g.epsilon * (e.length - d.trims[e.from] - d.trims[e.to]))
        .sum();
    let total = rect_sum + d.junctions.iter().map(|j| j.area()).sum::<f64>();
    assert!((total - d.boundary_area()).abs() <= 1e-12 * total);
}

#[test]
fn instantiation_is_bitwise_deterministic() {
    let a = instantiate_domain(&y_graph(0.05)).unwrap();
    let b = instantiate_domain(&y_graph(0.05)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn halving_epsilon_halves_transverse_dimensions() {
    let a = instantiate_domain(&y_graph(0.05)).unwrap();
    let b = instantiate_domain(&y_graph(0.025)).unwrap();
    for (ra, rb) in a.rects.iter().zip(&b.rects) {
        assert!((ra.half_width - 2.0 * rb.half_width).abs() < 1e-15);
    }
    for n in 0..a.graph.nodes.len() {
        assert_eq!(a.graph.nodes[n].position, b.graph.nodes[n].position);
        assert!((a.trims[n] - 2.0 * b.trims[n]).abs() < 1e-12);
    }
}

#[test]
fn stenosis_near_node_is_rejected() {
    let mut spec = straight_channel(0.05, 1.0, 1.0, 1.0, 0.5, 1.0);
    spec.edges[0].stenoses.push(StenosisMarker {
        s: 0.05,
        viscosity: RadialBump::zero(),
        diffusivity: RadialBump::zero(),
        velocity: RadialBump::zero(),
    });
    assert!(matches!(build_graph(&spec), Err(Error::StenosisTooCloseToNode { edge: 0, .. })));
}

#[test]
fn invalid_graphs_name_the_offender() {
    let mut spec = straight_channel(0.05, 1.0, 1.0, 1.0, 0.5, 1.0);
    spec.edges[0].theta = 1.5;
    assert_eq!(build_graph(&spec), Err(Error::ThicknessOutOfRange { edge: 0, theta: 1.5 }));

    let mut spec = straight_channel(0.05, 1.0, 1.0, 1.0, 0.5, 1.0);
    spec.nodes.push(NodeSpec { id: 7, position: Point::new(5.0, 5.0), kind: NodeKind::Dead });
    assert_eq!(build_graph(&spec), Err(Error::DisconnectedGraph { unreachable_node: 7 }));

    let mut spec = y_graph(0.05).to_spec(0.05);
    spec.nodes[1].kind = NodeKind::EntranceExit { q: 1.0, inflow: 0.0 };
    assert_eq!(build_graph(&spec), Err(Error::NonSolitaryPort { node: 1, degree: 3 }));

    let spec = straight_channel(0.0, 1.0, 1.0, 1.0, 0.5, 1.0);
    assert!(matches!(build_graph(&spec), Err(Error::InvalidGraph(_))));
}

#[test]
fn too_wide_channels_overlap() {
    let spec = bifurcation(0.05, 1.0, 1.0, 0.02, [1.0, 1.0, 1.0], 1.0, 0.5, 1.0);
    let g = build_graph(&spec).unwrap();
    assert!(matches!(instantiate_domain(&g), Err(Error::OverlapError { .. })));
}

#[test]
fn mapdd_delta_examples() {
    let g = stenosed_channel(0.05);
    let d = instantiate_domain(&g).unwrap();
    match decompose_mapdd(&d, 6.0, false) {
        Err(Error::ZoomOverlap { first, second }) => {
            assert!(first.contains("node") || second.contains("node"));
            assert!(first.contains("stenosis") || second.contains("stenosis"));
        }
        other => panic!("expected ZoomOverlap, got {other:?}"),
    }
    let dec = decompose_mapdd(&d, 1.0, false).unwrap();
    let delta = 0.05 * 0.05f64.ln().abs();
    assert!((dec.delta - delta).abs() < 1e-15);
    assert!((dec.delta - 0.1498).abs() < 1e-4);
    assert_eq!(dec.zones.len(), 1);
    assert_eq!(dec.zones[0].rects[0].start, 0.5 - delta);
    assert_eq!(dec.skeleton.len(), 2);
    assert_eq!(dec.cuts.len(), 2);
    assert!(decompose_mapdd(&d, 0.0, false).is_err());
}

#[test]
fn mapdd_partition_covers_the_domain_once() {
    let g = y_graph(0.05);
    let d = instantiate_domain(&g).unwrap();
    let dec = decompose_mapdd(&d, 1.0, true).unwrap();
    assert_eq!(dec.zones.len(), 4);
    for (e, edge) in g.edges.iter().enumerate() {
        for k in 0..=400 {
            let s = edge.length * k as f64 / 400.0;
            let in_zones = dec.zones.iter().filter(|z| z.rects.iter().any(|r| r.edge == e && s >= r.start && s <= r.end)).count();
            let in_skel = dec.skeleton.iter().filter(|seg| seg.edge == e && s > seg.a && s < seg.b).count();
            let in_junction = s < d.trims[edge.from] || s > edge.length - d.trims[edge.to];
            assert_eq!(in_zones + in_skel + in_junction as usize, 1, "edge {e} s={s}");
        }
    }
    for c in &dec.cuts {
        let seg = &dec.skeleton[c.segment];
        assert!(c.offset == seg.a || c.offset == seg.b);
    }
}
