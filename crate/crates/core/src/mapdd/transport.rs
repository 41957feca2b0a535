//! The constrained hybrid transport system.

use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::{CompositeVelocity, HybridSpace, Layout, Location};
use crate::asym1d::network::{edge_system, EdgeCoefficients};
use crate::asym1d::EdgeGrid;
use crate::femcore::assemble::{assemble_scalar, ScalarForm};
use crate::femcore::basis::p2_line_values;
use crate::femcore::quadrature::{gauss3, triangle_degree5};
use crate::femcore::{Family, Field, SparseSystem, TripletBuilder};
use crate::geometry::Point;
use crate::stokes2d::outward_normal;
use crate::transport2d::{peclet, TransportParams, Velocity};
use crate::tubegraph::{BoundaryTag, SegmentEnd};
use crate::{Error, Result};

/// Reduced profile `c̄` on one skeleton segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentProfile {
    pub edge: usize,
    /// Axial offsets of the grid points along the edge.
    pub s: Vec<f64>,
    pub values: Vec<f64>,
}

impl SegmentProfile {
    /// P2 interpolant and its derivative at offset `s`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let n = self.s.len() - 1;
        let (a, b) = (self.s[0], self.s[n]);
        let big = 2.0 * (b - a) / n as f64;
        let el = (((s - a) / big).floor().max(0.0) as usize).min(n / 2 - 1);
        let x = ((s - self.s[2 * el]) / big).clamp(0.0, 1.0);
        let v = &self.values[2 * el..2 * el + 3];
        let phi = [(1.0 - x) * (1.0 - 2.0 * x), 4.0 * x * (1.0 - x), x * (2.0 * x - 1.0)];
        let dphi = [4.0 * x - 3.0, 4.0 - 8.0 * x, 4.0 * x - 1.0];
        let val = (0..3).map(|k| phi[k] * v[k]).sum();
        let der = (0..3).map(|k| dphi[k] * v[k]).sum::<f64>() / big;
        (val, der)
    }
}

#[derive(Debug, Clone)]
pub struct HybridSolution {
    pub space: Arc<HybridSpace>,
    /// Concentration on each zoom zone mesh.
    pub zones: Vec<Field>,
    pub segments: Vec<SegmentProfile>,
    /// Unknowns after merging identified DOFs (Dirichlet values included).
    pub n_dofs: usize,
    /// Outward total flux through each port.
    pub port_fluxes: Vec<(BoundaryTag, f64)>,
    /// Wall uptake `εβ∮c` over zone walls plus `ε∫2βc̄` on the skeleton.
    pub wall_sorption: f64,
    pub source_total: f64,
    /// `∫ c div V` over the zones (nonzero for a Taylor–Hood velocity).
    pub divergence_source: f64,
    pub peclet_max: f64,
}

impl HybridSolution {
    /// Value and gradient at a physical point.
    pub fn sample(&self, x: Point) -> Option<(f64, Point)> {
        match self.space.place(x)? {
            Location::Zone(z) => {
                let f = &self.zones[z];
                let (t, bary) = self.space.zone_locators[z].locate(&f.mesh, x)?;
                Some((f.value_in(t, bary, 0), f.gradient_in(t, bary, 0)))
            }
            Location::Skeleton { segment, s, .. } => {
                let p = &self.segments[segment];
                let (v, d) = p.eval(s);
                Some((v, self.space.domain.graph.edges[p.edge].dir * d))
            }
        }
    }

    pub fn value(&self, x: Point) -> Option<f64> {
        self.sample(x).map(|s| s.0)
    }

    /// Cross-sectional average at offset `s` of `edge`.
    pub fn average(&self, edge: usize, s: f64) -> Result<f64> {
        let g = &self.space.domain.graph;
        let w = 0.5 * g.width(edge);
        let pieces = 8;
        let mut sum = 0.0;
        for k in 0..pieces {
            let dt = 2.0 * w / pieces as f64;
            for (x, wq) in gauss3() {
                let p = g.point_at(edge, s, -w + dt * (k as f64 + x));
                let v = self.value(p).ok_or(Error::OutsideChannel { edge: g.edges[edge].id, position: s })?;
                sum += wq * dt * v;
            }
        }
        Ok(sum / (2.0 * w))
    }

    /// Relative mismatch of `Σ port outflow = ∫g + wall uptake + ∫c div V`.
    pub fn conservation_defect(&self) -> f64 {
        let out: f64 = self.port_fluxes.iter().map(|p| p.1).sum();
        let scale = self.port_fluxes.iter().map(|p| p.1.abs()).sum::<f64>()
            + self.wall_sorption.abs()
            + self.source_total.abs()
            + self.divergence_source.abs();
        (out - self.source_total - self.wall_sorption - self.divergence_source).abs() / scale.max(f64::MIN_POSITIVE)
    }
}

/// Assembles and solves the hybrid system: the 2D transport form on every
/// zone, `ε ∫ (ϰθ c̄'v̄' + ⟨V⟩ c̄'v̄ - 2β c̄v̄ - θ g v̄)` on every skeleton
/// segment, with each cut-line trace DOF identified to the segment end value
/// and Dirichlet data on the listed ports.
pub fn solve_mapdd_transport(
    velocity: &CompositeVelocity,
    params: &TransportParams,
    port_values: &[(BoundaryTag, f64)],
) -> Result<HybridSolution> {
    let space = &velocity.space;
    let g = &space.domain.graph;
    let eps = g.epsilon;
    if !(params.lower_bound() > 0.0) {
        return Err(Error::InvalidInput(format!("diffusivity lower bound {} is not positive", params.lower_bound())));
    }
    let lay = Layout::new(space);
    let mut tb = TripletBuilder::new(lay.n, lay.n);
    let mut rhs = vec![0.0; lay.n];
    let mut peclet_max = 0.0f64;

    for (z, mesh) in space.zone_meshes.iter().enumerate() {
        let vel = Velocity::Field(&velocity.zone_fields[z]);
        let m = mesh.clone();
        let has_wall = mesh.tags().contains(&BoundaryTag::LateralWall);
        let form = ScalarForm {
            diffusion: Some(Box::new(|x, _| params.diffusivity_at(x))),
            convection: Some(Box::new(move |x, t| vel.at(&m, x, t))),
            source: params.source.as_ref().map(|_| -> crate::femcore::assemble::ScalarFn {
                Box::new(|x, t| params.source_at(g, x, mesh.regions[t]))
            }),
            robin: if has_wall && params.beta != 0.0 { vec![(BoundaryTag::LateralWall, -eps * params.beta)] } else { Vec::new() },
            ..Default::default()
        };
        let (a, b) = assemble_scalar(mesh, Family::P2, &form)?;
        let off = lay.zone_offsets[z];
        for i in 0..a.n_rows {
            for (j, v) in a.row(i) {
                tb.add(off + i, off + j, v);
            }
            rhs[off + i] += b[i];
        }
        peclet_max = peclet_max.max(peclet(mesh, params, vel));
    }

    let mut locals = Vec::with_capacity(space.grids.len());
    for (k, (seg, grid)) in space.decomposition.skeleton.iter().zip(&space.grids).enumerate() {
        let e = seg.edge;
        let theta = g.edges[e].theta;
        let c = EdgeCoefficients { a: eps * params.kappa * theta, v: velocity.fluxes[e], r: 2.0 * eps * params.beta };
        let f: Vec<f64> =
            grid.points().iter().map(|&x| params.source.as_ref().map_or(0.0, |src| eps * theta * src(e, seg.a + x))).collect();
        peclet_max = peclet_max.max(c.v.abs() * grid.h() / (2.0 * c.a));
        let (mat, r) = edge_system(c, *grid, &f, false);
        for &(i, j, v) in &mat {
            tb.add(lay.segment_dof(space, k, i), lay.segment_dof(space, k, j), v);
        }
        for &(i, v) in &r {
            rhs[lay.segment_dof(space, k, i)] += v;
        }
        locals.push(c);
    }

    let a = tb.build();
    let mut sys = SparseSystem::new(a.clone(), rhs.clone());
    for (&(z, d), &cut) in &space.constraints {
        let target = lay.cut_dof(cut).ok_or_else(|| Error::SetupMismatch(format!("cut line {cut} has no skeleton segment")))?;
        sys.identify(target, lay.zone_offsets[z] + d)?;
    }
    for &(tag, q) in port_values {
        let BoundaryTag::Port(node) = tag else {
            return Err(Error::UnknownTag(format!("{tag:?} is not a port")));
        };
        let mut found = false;
        for (z, mesh) in space.zone_meshes.iter().enumerate() {
            for d in mesh.tagged_p2(tag) {
                sys.fix(lay.zone_offsets[z] + d, q)?;
                found = true;
            }
        }
        if let Some(d) = lay.node_dof(node) {
            if g.is_port(node) {
                sys.fix(d, q)?;
                found = true;
            }
        }
        if !found {
            return Err(Error::UnknownTag(format!("{tag:?}")));
        }
    }
    let n_dofs = (0..lay.n).filter(|&i| sys_root_is_self(&sys, i)).count();
    let u = sys.solve()?;

    let residual: Vec<f64> = a.matvec(&u).iter().zip(&rhs).map(|(x, y)| x - y).collect();
    let zones: Vec<Field> = space
        .zone_meshes
        .iter()
        .enumerate()
        .map(|(z, m)| {
            let off = lay.zone_offsets[z];
            Field::new(m.clone(), Family::P2, u[off..off + m.n_p2()].to_vec())
        })
        .collect::<Result<_>>()?;
    let segments: Vec<SegmentProfile> = space
        .decomposition
        .skeleton
        .iter()
        .zip(&space.grids)
        .enumerate()
        .map(|(k, (seg, grid))| SegmentProfile {
            edge: seg.edge,
            s: grid.points().iter().map(|x| seg.a + x).collect(),
            values: (0..=grid.n).map(|i| u[lay.segment_dof(space, k, i)]).collect(),
        })
        .collect();

    // port fluxes: diffusive part from the residual, convective from c V·n
    let mut port_fluxes = Vec::new();
    for &(tag, _) in port_values {
        let BoundaryTag::Port(node) = tag else { continue };
        let mut flux = 0.0;
        for (z, mesh) in space.zone_meshes.iter().enumerate() {
            let off = lay.zone_offsets[z];
            for d in mesh.tagged_p2(tag) {
                flux -= residual[off + d];
            }
            for be in mesh.boundary.iter().filter(|b| b.tag == tag) {
                let (p, q) = (mesh.vertices[be.v[0]], mesh.vertices[be.v[1]]);
                let n = outward_normal(p, q);
                let dofs = mesh.boundary_p2(be);
                for (x, w) in gauss3() {
                    let phi = p2_line_values(x);
                    let c: f64 = (0..3).map(|k| phi[k] * zones[z].values[dofs[k]]).sum();
                    let v = Velocity::Field(&velocity.zone_fields[z]).at(mesh, p.lerp(q, x), be.triangle);
                    flux += w * p.dist(q) * c * v.dot(n);
                }
            }
        }
        if let Some(d) = lay.node_dof(node) {
            flux -= residual[d];
            for (k, seg) in space.decomposition.skeleton.iter().enumerate() {
                let q = velocity.fluxes[seg.edge];
                if seg.end_a == SegmentEnd::Node(node) {
                    flux -= q * segments[k].values[0];
                }
                if seg.end_b == SegmentEnd::Node(node) {
                    flux += q * segments[k].values[space.grids[k].n];
                }
            }
        }
        port_fluxes.push((tag, flux));
    }

    let mut wall = 0.0;
    let mut div = 0.0;
    for (z, mesh) in space.zone_meshes.iter().enumerate() {
        let c = &zones[z];
        for be in mesh.boundary.iter().filter(|b| b.tag == BoundaryTag::LateralWall) {
            let (p, q) = (mesh.vertices[be.v[0]], mesh.vertices[be.v[1]]);
            let d = mesh.boundary_p2(be);
            for (x, w) in gauss3() {
                let phi = p2_line_values(x);
                wall += w * p.dist(q) * (0..3).map(|k| phi[k] * c.values[d[k]]).sum::<f64>();
            }
        }
        let v = &velocity.zone_fields[z];
        for t in 0..mesh.n_triangles() {
            let geo = mesh.geom(t);
            for qp in triangle_degree5() {
                let dv = v.gradient_in(t, qp.bary, 0).x + v.gradient_in(t, qp.bary, 1).y;
                div += geo.area * qp.weight * dv * c.value_in(t, qp.bary, 0);
            }
        }
    }
    let mut wall_sorption = eps * params.beta * wall;
    for (k, grid) in space.grids.iter().enumerate() {
        wall_sorption += locals[k].r * integral_p2(grid, &segments[k].values);
    }
    Ok(HybridSolution {
        space: space.clone(),
        zones,
        segments,
        n_dofs,
        port_fluxes,
        wall_sorption,
        source_total: rhs.iter().sum(),
        divergence_source: div,
        peclet_max,
    })
}

fn sys_root_is_self(sys: &SparseSystem, i: usize) -> bool {
    sys.representative(i) == i
}

/// Exact integral of the P2 interpolant on a grid.
fn integral_p2(grid: &EdgeGrid, v: &[f64]) -> f64 {
    let big = 2.0 * grid.h();
    (0..grid.n / 2).map(|el| big / 6.0 * (v[2 * el] + 4.0 * v[2 * el + 1] + v[2 * el + 2])).sum()
}
