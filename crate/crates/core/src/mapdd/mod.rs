//! Hybrid 1D/2D solver: full 2D elements in zoom zones around junctions,
//! stenoses and (optionally) ports, reduced 1D elements on the skeleton in
//! between, glued by identifying every cut-line trace DOF with the 1D end
//! value.

mod report;
mod transport;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

pub use report::{difference_norms, mapdd_error_report, ConcentrationField, ErrorReport};
pub use transport::{solve_mapdd_transport, HybridSolution, SegmentProfile};

use crate::asym1d::EdgeGrid;
use crate::femcore::meshing::{mesh_pieces, Face, Piece, RectPiece};
use crate::femcore::{Field, Locator, Mesh};
use crate::geometry::Point;
use crate::stokes2d::{solve_stokes, NetworkFlow, Poiseuille, VelocityBc, ViscosityField};
use crate::tubegraph::{BoundaryTag, EdgeRect, Feature, MapddDecomposition, Owner, Placement, PolygonalDomain, SegmentEnd};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapddSettings {
    /// Element size in the zoom zones.
    pub h: f64,
    /// Grid spacing on skeleton segments; defaults to `h`.
    pub h1d: Option<f64>,
}

impl MapddSettings {
    pub fn new(h: f64) -> Self {
        Self { h, h1d: None }
    }
}

/// Meshes, grids and the cut-line constraint table of a decomposition.
#[derive(Debug, Clone)]
pub struct HybridSpace {
    pub domain: PolygonalDomain,
    pub decomposition: MapddDecomposition,
    pub zone_meshes: Vec<Arc<Mesh>>,
    pub zone_locators: Vec<Locator>,
    /// One grid per skeleton segment, on `[a, b]` shifted to start at 0.
    pub grids: Vec<EdgeGrid>,
    /// `(zone, zone DOF) -> cut id`; each 2D trace DOF maps to one cut.
    pub constraints: BTreeMap<(usize, usize), usize>,
    /// Reduction order of the cut-line trace space.
    pub order: usize,
}

fn end_face(domain: &PolygonalDomain, dec: &MapddDecomposition, rect: &EdgeRect, at_start: bool) -> Face {
    let g = &domain.graph;
    let offset = if at_start { rect.start } else { rect.end };
    let tol = 1e-9 * g.epsilon;
    if let Some(c) = dec.cuts.iter().find(|c| c.edge == rect.edge && (c.offset - offset).abs() <= tol) {
        return Face::Tagged(BoundaryTag::CutLine(c.id));
    }
    let e = &g.edges[rect.edge];
    let node = if at_start { e.from } else { e.to };
    if g.degree(node) > 1 {
        Face::Interior
    } else if g.is_port(node) {
        Face::Tagged(BoundaryTag::Port(node))
    } else {
        Face::Tagged(BoundaryTag::LateralWall)
    }
}

impl HybridSpace {
    /// Meshes every zone, grids every skeleton segment and builds the k = 0
    /// constraint table.
    pub fn new(domain: &PolygonalDomain, dec: &MapddDecomposition, settings: MapddSettings) -> Result<Self> {
        let g = &domain.graph;
        let mut zone_meshes = Vec::with_capacity(dec.zones.len());
        for zone in &dec.zones {
            let mut pieces: Vec<Piece> = zone
                .rects
                .iter()
                .map(|r| {
                    Piece::Rect(RectPiece {
                        rect: *r,
                        start_face: end_face(domain, dec, r, true),
                        end_face: end_face(domain, dec, r, false),
                        breaks: Vec::new(),
                        grading: None,
                    })
                })
                .collect();
            if let Some(node) = zone.junction {
                let j = domain.junction(node).ok_or_else(|| Error::SetupMismatch(format!("no junction polygon at node {node}")))?;
                pieces.push(Piece::Junction(j.clone()));
            }
            zone_meshes.push(Arc::new(mesh_pieces(g, &pieces, settings.h)?));
        }
        let h1d = settings.h1d.unwrap_or(settings.h);
        let grids = dec
            .skeleton
            .iter()
            .map(|s| {
                let len = s.b - s.a;
                let n = 2 * ((len / (2.0 * h1d) - 1e-9).ceil() as usize).max(1);
                EdgeGrid { length: len, n }
            })
            .collect();
        let mut constraints = BTreeMap::new();
        for (z, zone) in dec.zones.iter().enumerate() {
            for &cut in &zone.cuts {
                let dofs = zone_meshes[z].tagged_p2(BoundaryTag::CutLine(cut));
                if dofs.is_empty() {
                    return Err(Error::SetupMismatch(format!("cut line {cut} has no trace DOFs in zone {z}")));
                }
                for d in dofs {
                    if let Some(&other) = constraints.get(&(z, d)) {
                        if other != cut {
                            return Err(Error::ConstraintConflict { dof: d });
                        }
                    }
                    constraints.insert((z, d), cut);
                }
            }
        }
        let zone_locators = zone_meshes.iter().map(|m| Locator::new(m)).collect();
        Ok(Self { domain: domain.clone(), decomposition: dec.clone(), zone_meshes, zone_locators, grids, constraints, order: 0 })
    }

    /// Where a physical point lies: a zone, a skeleton segment (with its
    /// edge coordinates), or outside the domain.
    pub fn place(&self, x: Point) -> Option<Location> {
        match self.domain.locate(x)? {
            Owner::Node(n) => self.decomposition.zone_of_feature(Feature::Node(n)).map(Location::Zone),
            Owner::Edge(e) => {
                let (s, t) = self.domain.graph.local_coords(e, x);
                match self.decomposition.classify(e, s)? {
                    Placement::Zone(z) => Some(Location::Zone(z)),
                    Placement::Skeleton(k) => Some(Location::Skeleton { segment: k, s, t }),
                }
            }
        }
    }

    pub fn n_zone_dofs(&self) -> usize {
        self.zone_meshes.iter().map(|m| m.n_p2()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Zone(usize),
    Skeleton { segment: usize, s: f64, t: f64 },
}

/// Network Poiseuille flow on the skeleton and local Stokes solutions in the
/// zoom zones, matched exactly on cut lines.
#[derive(Debug, Clone)]
pub struct CompositeVelocity {
    pub space: Arc<HybridSpace>,
    pub profiles: Vec<Poiseuille>,
    pub fluxes: Vec<f64>,
    /// P2 velocity on each zone mesh.
    pub zone_fields: Vec<Field>,
}

impl CompositeVelocity {
    pub fn poiseuille(&self, edge: usize, t: f64) -> Point {
        self.space.domain.graph.edges[edge].dir * self.profiles[edge].velocity(t)
    }

    /// Velocity at a physical point (zero outside the domain).
    pub fn at(&self, x: Point) -> Point {
        match self.space.place(x) {
            Some(Location::Zone(z)) => {
                if let Some(v) = self.zone_fields[z].eval_vector(&self.space.zone_locators[z], x) {
                    return v;
                }
                // rounding at a zone boundary: fall back to the edge profile
                match self.space.domain.locate(x) {
                    Some(Owner::Edge(e)) => self.poiseuille(e, self.space.domain.graph.local_coords(e, x).1),
                    _ => Point::default(),
                }
            }
            Some(Location::Skeleton { segment, t, .. }) => self.poiseuille(self.space.decomposition.skeleton[segment].edge, t),
            None => Point::default(),
        }
    }
}

/// Builds the composite velocity: per-edge Poiseuille profiles carrying the
/// network fluxes, and a Taylor–Hood solve in every zone with those profiles
/// as Dirichlet data on its cut lines and ports.
pub fn composite_velocity(space: &Arc<HybridSpace>, flow: &NetworkFlow, viscosity: &ViscosityField) -> Result<CompositeVelocity> {
    let g = &space.domain.graph;
    if flow.flux.len() != g.edges.len() {
        return Err(Error::SetupMismatch(format!("{} fluxes for {} edges", flow.flux.len(), g.edges.len())));
    }
    let scale = flow.flux.iter().fold(0.0f64, |m, q| m.max(q.abs()));
    for r in flow.kirchhoff_residuals(g) {
        if r.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) && r != 0.0 {
            return Err(Error::IncompatibleFlux { net: r });
        }
    }
    let profiles: Vec<Poiseuille> =
        (0..g.edges.len()).map(|e| Poiseuille::with_flux(flow.flux[e], flow.mu, g.width(e))).collect();
    let mut zone_fields = Vec::with_capacity(space.zone_meshes.len());
    for mesh in &space.zone_meshes {
        let mut bcs: Vec<VelocityBc> = Vec::new();
        for tag in mesh.tags() {
            let edge = match tag {
                BoundaryTag::CutLine(c) => space.decomposition.cuts[c].edge,
                BoundaryTag::Port(n) => g.incident(n)[0].edge,
                _ => continue,
            };
            let (p, dir) = (profiles[edge], g.edges[edge].dir);
            bcs.push(VelocityBc { tag, profile: Box::new(move |x: Point| dir * p.velocity(g.local_coords(edge, x).1)) });
        }
        zone_fields.push(solve_stokes(mesh, viscosity, &bcs, None)?.velocity);
    }
    Ok(CompositeVelocity { space: space.clone(), profiles, fluxes: flow.flux.clone(), zone_fields })
}

/// Segment end DOF key used by the 1D layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EndKey {
    Node(usize),
    Cut(usize),
}

impl From<SegmentEnd> for EndKey {
    fn from(e: SegmentEnd) -> Self {
        match e {
            SegmentEnd::Node(n) => EndKey::Node(n),
            SegmentEnd::Cut(c) => EndKey::Cut(c),
        }
    }
}

/// Global DOF numbering: zone P2 DOFs, then segment end values, then
/// segment interior points.
#[derive(Debug, Clone)]
struct Layout {
    zone_offsets: Vec<usize>,
    ends: BTreeMap<EndKey, usize>,
    interior: Vec<usize>,
    n: usize,
}

impl Layout {
    fn new(space: &HybridSpace) -> Self {
        let mut next = 0;
        let mut zone_offsets = Vec::new();
        for m in &space.zone_meshes {
            zone_offsets.push(next);
            next += m.n_p2();
        }
        let mut ends = BTreeMap::new();
        for s in &space.decomposition.skeleton {
            for e in [s.end_a, s.end_b] {
                ends.entry(EndKey::from(e)).or_insert_with(|| {
                    next += 1;
                    next - 1
                });
            }
        }
        let mut interior = Vec::new();
        for g in &space.grids {
            interior.push(next);
            next += g.n - 1;
        }
        Self { zone_offsets, ends, interior, n: next }
    }

    fn segment_dof(&self, space: &HybridSpace, seg: usize, i: usize) -> usize {
        let s = &space.decomposition.skeleton[seg];
        let n = space.grids[seg].n;
        if i == 0 {
            self.ends[&EndKey::from(s.end_a)]
        } else if i == n {
            self.ends[&EndKey::from(s.end_b)]
        } else {
            self.interior[seg] + i - 1
        }
    }

    fn cut_dof(&self, cut: usize) -> Option<usize> {
        self.ends.get(&EndKey::Cut(cut)).copied()
    }

    fn node_dof(&self, node: usize) -> Option<usize> {
        self.ends.get(&EndKey::Node(node)).copied()
    }
}

