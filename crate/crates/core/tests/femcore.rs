use std::sync::Arc;

use tubeflow_core::femcore::assemble::{assemble_scalar, ScalarForm};
use tubeflow_core::femcore::meshing::{mesh_pieces, Face, Piece, RectPiece};
use tubeflow_core::femcore::{mesh_domain, Family, Field, Locator, Mesh, SparseSystem};
use tubeflow_core::geometry::Point;
use tubeflow_core::tubegraph::*;
use tubeflow_core::Error;

fn channel(eps: f64) -> PolygonalDomain {
    instantiate_domain(&build_graph(&straight_channel(eps, 1.0, 1.0, 1.0, 0.5, 1.0)).unwrap()).unwrap()
}

fn y_domain(eps: f64) -> PolygonalDomain {
    let spec = bifurcation(eps, 1.0, 1.0, std::f64::consts::FRAC_PI_4, [1.0, 0.7, 0.7], 1.0, 0.5, 1.0);
    instantiate_domain(&build_graph(&spec).unwrap()).unwrap()
}

/// Unit square as a single channel edge of length 1 and width 1 (ε = 0.5, θ = 1
/// would be too wide for the graph checks, so the rectangle is built directly).
fn unit_square(h: f64) -> Mesh {
    let g = build_graph(&straight_channel(0.05, 1.0, 1.0, 0.0, 0.0, 0.0)).unwrap();
    let piece = Piece::Rect(RectPiece {
        rect: EdgeRect { edge: 0, start: 0.0, end: 1.0, half_width: 0.5 },
        start_face: Face::Tagged(BoundaryTag::Port(0)),
        end_face: Face::Tagged(BoundaryTag::Port(1)),
        breaks: vec![],
        grading: None,
    });
    mesh_pieces(&g, &[piece], h).unwrap()
}

#[test]
fn channel_mesh_has_four_layers() {
    let m = mesh_domain(&channel(0.05), 0.0125).unwrap();
    let mut ys: Vec<f64> = m.vertices.iter().filter(|p| p.x == 0.0).map(|p| p.y).collect();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(ys.len() - 1 >= 4);
    assert!((m.area() - 0.05).abs() < 1e-14);
    assert!(m.min_angle_deg() >= 20.0);
}

#[test]
fn coarse_mesh_is_rejected() {
    assert!(matches!(mesh_domain(&channel(0.05), 0.05), Err(Error::TooCoarse { .. })));
}

#[test]
fn y_mesh_is_conforming_and_fully_tagged() {
    let d = y_domain(0.05);
    let m = mesh_domain(&d, 0.01).unwrap();
    assert!(m.min_angle_deg() >= 20.0, "worst angle {}", m.min_angle_deg());
    assert!((m.area() - d.area()).abs() < 1e-12 * d.area());
    let tags = m.tags();
    for t in [BoundaryTag::LateralWall, BoundaryTag::Port(0), BoundaryTag::Port(2), BoundaryTag::Port(3)] {
        assert!(tags.contains(&t), "missing {t:?}");
    }
    for t in [BoundaryTag::Port(0), BoundaryTag::Port(2), BoundaryTag::Port(3), BoundaryTag::LateralWall] {
        let expected = d.boundary_length(t);
        assert!((m.boundary_length(t) - expected).abs() < 1e-12, "{t:?}");
    }
    // Euler characteristic of a disc: V - E + T = 1
    let chi = m.n_vertices() as i64 - m.edges.len() as i64 + m.n_triangles() as i64;
    assert_eq!(chi, 1);
}

#[test]
fn mass_stiffness_and_boundary_mass() {
    let m = unit_square(0.1);
    let form = ScalarForm { reaction: Some(Box::new(|_, _| 1.0)), ..Default::default() };
    for fam in [Family::P1, Family::P2] {
        let (a, _) = assemble_scalar(&m, fam, &form).unwrap();
        let total: f64 = a.values.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    let form = ScalarForm { diffusion: Some(Box::new(|_, _| 1.0)), ..Default::default() };
    let (k, _) = assemble_scalar(&m, Family::P2, &form).unwrap();
    let kc = k.matvec(&vec![1.0; m.n_p2()]);
    assert!(kc.iter().all(|v| v.abs() < 1e-12));
    for i in 0..k.n_rows {
        for (j, v) in k.row(i) {
            assert!((v - k.get(j, i)).abs() < 1e-14 * v.abs().max(1.0));
        }
    }
    let form = ScalarForm { robin: vec![(BoundaryTag::LateralWall, 1.0)], ..Default::default() };
    let (b, _) = assemble_scalar(&m, Family::P2, &form).unwrap();
    assert!((b.values.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    let form = ScalarForm { robin: vec![(BoundaryTag::CutLine(3), 1.0)], ..Default::default() };
    assert!(matches!(assemble_scalar(&m, Family::P2, &form), Err(Error::UnknownTag(_))));
}

/// −Δu = f on the unit square (shifted to y ∈ (−½, ½)) with u = sin(πx) cos(πy).
fn poisson_error(h: f64, fam: Family) -> f64 {
    let mesh = Arc::new(unit_square(h));
    let pi = std::f64::consts::PI;
    let exact = move |p: Point| (pi * p.x).sin() * (pi * p.y).cos();
    let form = ScalarForm {
        diffusion: Some(Box::new(|_, _| 1.0)),
        source: Some(Box::new(move |p, _| 2.0 * pi * pi * exact(p))),
        ..Default::default()
    };
    let (a, b) = assemble_scalar(&mesh, fam, &form).unwrap();
    let mut sys = SparseSystem::new(a, b);
    let nodes: Vec<Point> = match fam {
        Family::P1 => mesh.vertices.clone(),
        _ => mesh.p2_nodes(),
    };
    for be in &mesh.boundary {
        let (dofs, n) = tubeflow_core::femcore::assemble::boundary_dofs(&mesh, fam, be);
        for &d in &dofs[..n] {
            sys.fix(d, exact(nodes[d])).unwrap();
        }
    }
    let u = Field::new(mesh.clone(), fam, sys.solve().unwrap()).unwrap();
    u.integrate(|p, v, _| (v[0] - exact(p)).powi(2)).sqrt()
}

fn slope(hs: &[f64], errs: &[f64]) -> f64 {
    let n = hs.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

#[test]
fn poisson_convergence_orders() {
    let hs = [0.125, 0.0625, 0.03125];
    let e1: Vec<f64> = hs.iter().map(|&h| poisson_error(h, Family::P1)).collect();
    let e2: Vec<f64> = hs.iter().map(|&h| poisson_error(h, Family::P2)).collect();
    let (s1, s2) = (slope(&hs, &e1), slope(&hs, &e2));
    assert!((s1 - 2.0).abs() <= 0.3, "P1 slope {s1}");
    assert!((s2 - 3.0).abs() <= 0.3, "P2 slope {s2}");
}

#[test]
fn locator_finds_points_and_rejects_outside() {
    let mesh = Arc::new(mesh_domain(&y_domain(0.05), 0.01).unwrap());
    let loc = Locator::new(&mesh);
    let f = Field::interpolate(mesh.clone(), Family::P2, |p| 1.0 + p.x - 2.0 * p.y);
    for p in [Point::new(-0.5, 0.01), Point::new(0.0, 0.0), Point::new(0.5, 0.5)] {
        let v = f.eval(&loc, p).unwrap();
        assert!((v - (1.0 + p.x - 2.0 * p.y)).abs() < 1e-12);
    }
    assert!(f.eval(&loc, Point::new(0.0, 0.3)).is_none());
}
