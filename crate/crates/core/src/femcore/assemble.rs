//! Element loops for scalar second-order forms.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::basis::{p2_gradients, p2_line_values, p2_values, TriGeom};
use super::field::Family;
use super::mesh::Mesh;
use super::quadrature::{gauss3, triangle_degree5};
use super::sparse::{CsrMatrix, TripletBuilder};
use crate::geometry::Point;
use crate::tubegraph::BoundaryTag;
use crate::{Error, Result};

pub type ScalarFn<'a> = Box<dyn Fn(Point, usize) -> f64 + 'a>;
pub type VectorFn<'a> = Box<dyn Fn(Point, usize) -> Point + 'a>;
pub type TraceFn<'a> = Box<dyn Fn(Point) -> f64 + 'a>;

/// Scalar convection-diffusion-reaction form
/// `∫ k ∇c·∇v + (b·∇c) v + r c v + Σ_tag ∫ α c v ds`
/// with load `∫ f v + F·∇v + Σ_tag ∫ h v ds`. Coefficients receive the
/// physical point and the triangle index.
#[derive(Default)]
pub struct ScalarForm<'a> {
    pub diffusion: Option<ScalarFn<'a>>,
    pub convection: Option<VectorFn<'a>>,
    pub reaction: Option<ScalarFn<'a>>,
    pub source: Option<ScalarFn<'a>>,
    pub flux_source: Option<VectorFn<'a>>,
    pub robin: Vec<(BoundaryTag, f64)>,
    pub neumann: Vec<(BoundaryTag, TraceFn<'a>)>,
}

/// Local basis values and gradients at a quadrature point.
pub struct Local {
    pub n: usize,
    pub phi: [f64; 6],
    pub grad: [Point; 6],
}

pub fn local_basis(family: Family, geom: &TriGeom, bary: [f64; 3]) -> Local {
    match family {
        Family::P1 => {
            let mut phi = [0.0; 6];
            let mut grad = [Point::default(); 6];
            phi[..3].copy_from_slice(&bary);
            grad[..3].copy_from_slice(&geom.grad_bary);
            Local { n: 3, phi, grad }
        }
        _ => Local { n: 6, phi: p2_values(bary), grad: p2_gradients(geom, bary) },
    }
}

pub fn element_dofs(mesh: &Mesh, family: Family, t: usize) -> ([usize; 6], usize) {
    match family {
        Family::P1 => {
            let v = mesh.triangles[t];
            ([v[0], v[1], v[2], 0, 0, 0], 3)
        }
        _ => (mesh.p2_dofs(t), 6),
    }
}

/// Boundary dofs of a boundary edge in edge-parameter order (start, end,
/// midpoint for P2) and their count.
pub fn boundary_dofs(mesh: &Mesh, family: Family, b: &super::mesh::BoundaryEdge) -> ([usize; 3], usize) {
    match family {
        Family::P1 => ([b.v[0], b.v[1], 0], 2),
        _ => (mesh.boundary_p2(b), 3),
    }
}

pub fn boundary_values(family: Family, t: f64) -> [f64; 3] {
    match family {
        Family::P1 => [1.0 - t, t, 0.0],
        _ => p2_line_values(t),
    }
}

fn check_tags(mesh: &Mesh, tags: impl Iterator<Item = BoundaryTag>) -> Result<()> {
    let present = mesh.tags();
    for t in tags {
        if !present.contains(&t) {
            return Err(Error::UnknownTag(format!("{t:?}")));
        }
    }
    Ok(())
}

/// Assembles the matrix and load vector of a scalar form.
pub fn assemble_scalar(mesh: &Mesh, family: Family, form: &ScalarForm) -> Result<(CsrMatrix, Vec<f64>)> {
    check_tags(mesh, form.robin.iter().map(|r| r.0).chain(form.neumann.iter().map(|r| r.0)))?;
    let n = family.n_dofs(mesh);
    let mut tb = TripletBuilder::new(n, n);
    let mut rhs = vec![0.0; n];
    let rule = triangle_degree5();
    for t in 0..mesh.n_triangles() {
        let g = mesh.geom(t);
        let (dofs, nl) = element_dofs(mesh, family, t);
        let mut ke = [[0.0; 6]; 6];
        let mut fe = [0.0; 6];
        for q in &rule {
            let x = g.point(q.bary);
            let w = g.area * q.weight;
            let loc = local_basis(family, &g, q.bary);
            let k = form.diffusion.as_ref().map_or(0.0, |f| f(x, t));
            let b = form.convection.as_ref().map(|f| f(x, t));
            let r = form.reaction.as_ref().map_or(0.0, |f| f(x, t));
            let f = form.source.as_ref().map_or(0.0, |f| f(x, t));
            let ff = form.flux_source.as_ref().map(|f| f(x, t));
            for i in 0..nl {
                fe[i] += w * (f * loc.phi[i] + ff.map_or(0.0, |v| v.dot(loc.grad[i])));
                for j in 0..nl {
                    let mut a = k * loc.grad[j].dot(loc.grad[i]) + r * loc.phi[j] * loc.phi[i];
                    if let Some(b) = b {
                        a += b.dot(loc.grad[j]) * loc.phi[i];
                    }
                    ke[i][j] += w * a;
                }
            }
        }
        for i in 0..nl {
            rhs[dofs[i]] += fe[i];
            for j in 0..nl {
                tb.add(dofs[i], dofs[j], ke[i][j]);
            }
        }
    }
    let g3 = gauss3();
    for be in &mesh.boundary {
        let alpha: f64 = form.robin.iter().filter(|r| r.0 == be.tag).map(|r| r.1).sum();
        let loads: Vec<&TraceFn> = form.neumann.iter().filter(|r| r.0 == be.tag).map(|r| &r.1).collect();
        if alpha == 0.0 && loads.is_empty() {
            continue;
        }
        let (a, b) = (mesh.vertices[be.v[0]], mesh.vertices[be.v[1]]);
        let len = a.dist(b);
        let (dofs, nl) = boundary_dofs(mesh, family, be);
        for &(s, w) in &g3 {
            let phi = boundary_values(family, s);
            let x = a.lerp(b, s);
            let h: f64 = loads.iter().map(|f| f(x)).sum();
            for i in 0..nl {
                rhs[dofs[i]] += w * len * h * phi[i];
                if alpha != 0.0 {
                    for j in 0..nl {
                        tb.add(dofs[i], dofs[j], w * len * alpha * phi[i] * phi[j]);
                    }
                }
            }
        }
    }
    Ok((tb.build(), rhs))
}
