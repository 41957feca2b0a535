//! Tube-structure geometry: the metric graph, its physical 2D instantiation
//! as rectangles joined by junction polygons, and the zoom/skeleton partition
//! used by the hybrid solver.
//!
//! Nodes and edges are addressed by their index in the graph (the order of the
//! input description); the user-facing `id` is kept for reporting.

mod decompose;
mod domain;

pub use decompose::{decompose_mapdd, CutLine, Feature, MapddDecomposition, Placement, SegmentEnd, SkeletonSegment, ZoomZone};
pub use domain::{instantiate_domain, BoundaryPiece, BoundaryTag, EdgeRect, JunctionPolygon, Owner, PolygonalDomain};

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::geometry::{orient, Point};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Bifurcation,
    /// Port with prescribed concentration `q` and signed inflow flux
    /// (positive into the domain).
    EntranceExit { q: f64, inflow: f64 },
    /// Interior chain joint.
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub position: Point,
    pub kind: NodeKind,
}

/// Smooth radial bump `amplitude * b(|ξ| / radius)` with
/// `b(t) = exp(1 - 1/(1 - t²))` for `t < 1` and zero beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialBump {
    pub amplitude: f64,
    pub radius: f64,
}

impl RadialBump {
    pub fn zero() -> Self {
        Self { amplitude: 0.0, radius: 1.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    /// Value and gradient of the profile `b(|ξ|/r)` (without amplitude).
    fn shape(&self, xi: Point) -> (f64, Point) {
        let t2 = xi.dot(xi) / (self.radius * self.radius);
        if t2 >= 1.0 {
            return (0.0, Point::default());
        }
        let d = 1.0 - t2;
        let b = (1.0 - 1.0 / d).exp();
        // d b / d(t²) = -b / d², and ∇(t²) = 2ξ / r²
        let g = xi * (-2.0 * b / (d * d * self.radius * self.radius));
        (b, g)
    }

    pub fn value(&self, xi: Point) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        self.amplitude * self.shape(xi).0
    }

    pub fn gradient(&self, xi: Point) -> Point {
        if self.is_zero() {
            return Point::default();
        }
        self.shape(xi).1 * self.amplitude
    }

    /// Divergence-free field `amplitude * r * curl b(|ξ|/r)`, i.e.
    /// `(∂ψ/∂ξ₂, -∂ψ/∂ξ₁)` for the stream function `ψ = amplitude * r * b`.
    pub fn curl(&self, xi: Point) -> Point {
        if self.is_zero() {
            return Point::default();
        }
        let g = self.shape(xi).1 * (self.amplitude * self.radius);
        Point::new(g.y, -g.x)
    }

    /// Radius of the support in scaled coordinates (zero for a null bump).
    pub fn support(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.radius
        }
    }
}

/// Local perturbation of viscosity, diffusivity and velocity around a point
/// of an edge, expressed in the scaled variable `ξ = (x - x̄)/ε` in the edge
/// frame (ξ₁ along the edge, ξ₂ along its left normal).
#[derive(Debug, Clone, PartialEq)]
pub struct StenosisMarker {
    pub s: f64,
    pub viscosity: RadialBump,
    pub diffusivity: RadialBump,
    pub velocity: RadialBump,
}

impl StenosisMarker {
    pub fn support(&self) -> f64 {
        self.viscosity.support().max(self.diffusivity.support()).max(self.velocity.support())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub theta: f64,
    pub stenoses: Vec<StenosisMarker>,
    pub length: f64,
    /// Unit vector from `from` to `to`.
    pub dir: Point,
}

impl Edge {
    /// Left normal of the edge axis.
    pub fn normal(&self) -> Point {
        self.dir.perp()
    }
}

/// Input description of a tube graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub epsilon: f64,
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: usize,
    pub position: Point,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub theta: f64,
    pub stenoses: Vec<StenosisMarker>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Start,
    Finish,
}

/// An edge seen from one of its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub edge: usize,
    pub end: End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub epsilon: f64,
    incidence: Vec<Vec<Incidence>>,
}

/// Validates a graph description and builds the graph.
pub fn build_graph(spec: &GraphSpec) -> Result<TubeGraph> {
    let eps = spec.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidGraph(format!("epsilon {eps} is outside (0, 1)")));
    }
    if spec.nodes.is_empty() || spec.edges.is_empty() {
        return Err(Error::InvalidGraph("graph needs at least one edge".into()));
    }
    let mut nodes = Vec::with_capacity(spec.nodes.len());
    for (i, n) in spec.nodes.iter().enumerate() {
        if spec.nodes[..i].iter().any(|m| m.id == n.id) {
            return Err(Error::InvalidGraph(format!("duplicate node id {}", n.id)));
        }
        if !(n.position.x.is_finite() && n.position.y.is_finite()) {
            return Err(Error::InvalidGraph(format!("node {} has a non-finite position", n.id)));
        }
        if let NodeKind::EntranceExit { q, inflow } = n.kind {
            if !q.is_finite() || !inflow.is_finite() {
                return Err(Error::InvalidGraph(format!("node {} has non-finite port data", n.id)));
            }
        }
        nodes.push(Node { id: n.id, position: n.position, kind: n.kind });
    }
    let index_of = |id: usize| spec.nodes.iter().position(|n| n.id == id);
    let mut edges: Vec<Edge> = Vec::with_capacity(spec.edges.len());
    for (i, e) in spec.edges.iter().enumerate() {
        if spec.edges[..i].iter().any(|f| f.id == e.id) {
            return Err(Error::InvalidGraph(format!("duplicate edge id {}", e.id)));
        }
        let (Some(from), Some(to)) = (index_of(e.from), index_of(e.to)) else {
            return Err(Error::InvalidGraph(format!("edge {} references an unknown node", e.id)));
        };
        if from == to {
            return Err(Error::InvalidGraph(format!("edge {} is a loop", e.id)));
        }
        if edges.iter().any(|f| (f.from == from && f.to == to) || (f.from == to && f.to == from)) {
            return Err(Error::InvalidGraph(format!("edge {} duplicates another segment", e.id)));
        }
        if !(e.theta > 0.0 && e.theta <= 1.0) {
            return Err(Error::ThicknessOutOfRange { edge: e.id, theta: e.theta });
        }
        let d = nodes[to].position - nodes[from].position;
        let length = d.norm();
        if !(length >= 10.0 * eps) {
            return Err(Error::InvalidGraph(format!(
                "edge {} has length {length}, shorter than 10 epsilon",
                e.id
            )));
        }
        let min_distance = 2.0 * eps;
        for st in &e.stenoses {
            if !(st.s >= min_distance && st.s <= length - min_distance) {
                return Err(Error::StenosisTooCloseToNode { edge: e.id, position: st.s, min_distance });
            }
            for b in [st.viscosity, st.diffusivity, st.velocity] {
                if !(b.radius > 0.0 && b.radius <= 2.0) || !b.amplitude.is_finite() {
                    return Err(Error::InvalidGraph(format!(
                        "stenosis on edge {} has a perturbation with radius {} outside (0, 2]",
                        e.id, b.radius
                    )));
                }
            }
        }
        let mut stenoses = e.stenoses.clone();
        stenoses.sort_by(|a, b| a.s.partial_cmp(&b.s).unwrap());
        edges.push(Edge { id: e.id, from, to, theta: e.theta, stenoses, length, dir: d * (1.0 / length) });
    }
    for (i, a) in edges.iter().enumerate() {
        for b in &edges[i + 1..] {
            let shared = [a.from, a.to].iter().filter(|n| **n == b.from || **n == b.to).count();
            let (p, q) = (nodes[a.from].position, nodes[a.to].position);
            let (r, s) = (nodes[b.from].position, nodes[b.to].position);
            if shared == 0 && segments_intersect(p, q, r, s) {
                return Err(Error::InvalidGraph(format!("edges {} and {} cross", a.id, b.id)));
            }
            if shared == 1 {
                let (da, db) = (outward_from(a, b), outward_from(b, a));
                if da.cross(db).abs() < 1e-12 && da.dot(db) > 0.0 {
                    return Err(Error::InvalidGraph(format!("edges {} and {} overlap", a.id, b.id)));
                }
            }
        }
    }
    let mut incidence = vec![Vec::new(); nodes.len()];
    for (k, e) in edges.iter().enumerate() {
        incidence[e.from].push(Incidence { edge: k, end: End::Start });
        incidence[e.to].push(Incidence { edge: k, end: End::Finish });
    }
    let mut seen = vec![false; nodes.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(n) = queue.pop_front() {
        for inc in &incidence[n] {
            let m = edges[inc.edge].other(n);
            if !seen[m] {
                seen[m] = true;
                queue.push_back(m);
            }
        }
    }
    if let Some(n) = seen.iter().position(|s| !s) {
        return Err(Error::DisconnectedGraph { unreachable_node: nodes[n].id });
    }
    for (n, node) in nodes.iter().enumerate() {
        if matches!(node.kind, NodeKind::EntranceExit { .. }) && incidence[n].len() != 1 {
            return Err(Error::NonSolitaryPort { node: node.id, degree: incidence[n].len() });
        }
    }
    Ok(TubeGraph { nodes, edges, epsilon: eps, incidence })
}

/// Direction of `a` leaving the node it shares with `b`.
fn outward_from(a: &Edge, b: &Edge) -> Point {
    if a.from == b.from || a.from == b.to {
        a.dir
    } else {
        -a.dir
    }
}

fn segments_intersect(p: Point, q: Point, r: Point, s: Point) -> bool {
    let d1 = orient(p, q, r);
    let d2 = orient(p, q, s);
    let d3 = orient(r, s, p);
    let d4 = orient(r, s, q);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

impl Edge {
    pub fn other(&self, node: usize) -> usize {
        if self.from == node {
            self.to
        } else {
            self.from
        }
    }
}

impl TubeGraph {
    pub fn incident(&self, node: usize) -> &[Incidence] {
        &self.incidence[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.incidence[node].len()
    }

    pub fn width(&self, edge: usize) -> f64 {
        self.edges[edge].theta * self.epsilon
    }

    /// Physical point at axial offset `s` from the edge start and signed
    /// transverse offset `t` along the edge's left normal.
    pub fn point_at(&self, edge: usize, s: f64, t: f64) -> Point {
        let e = &self.edges[edge];
        self.nodes[e.from].position + e.dir * s + e.normal() * t
    }

    /// Edge-frame coordinates `(s, t)` of a physical point.
    pub fn local_coords(&self, edge: usize, p: Point) -> (f64, f64) {
        let e = &self.edges[edge];
        let d = p - self.nodes[e.from].position;
        (d.dot(e.dir), d.dot(e.normal()))
    }

    /// Unit vector along `edge` pointing away from the given end.
    pub fn outward(&self, inc: Incidence) -> Point {
        let d = self.edges[inc.edge].dir;
        match inc.end {
            End::Start => d,
            End::Finish => -d,
        }
    }

    /// Axial offset (from the edge start) of the point at distance `r` from
    /// the given end.
    pub fn offset_from_end(&self, inc: Incidence, r: f64) -> f64 {
        match inc.end {
            End::Start => r,
            End::Finish => self.edges[inc.edge].length - r,
        }
    }

    pub fn is_port(&self, node: usize) -> bool {
        matches!(self.nodes[node].kind, NodeKind::EntranceExit { .. })
    }

    pub fn ports(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&n| self.is_port(n))
    }

    /// Port data `(q, inflow)`, if `node` is a port.
    pub fn port_data(&self, node: usize) -> Option<(f64, f64)> {
        match self.nodes[node].kind {
            NodeKind::EntranceExit { q, inflow } => Some((q, inflow)),
            _ => None,
        }
    }

    /// Degree-2 node whose two edges continue each other in a straight line.
    pub fn is_straight_joint(&self, node: usize) -> bool {
        let inc = self.incident(node);
        inc.len() == 2 && {
            let (a, b) = (self.outward(inc[0]), self.outward(inc[1]));
            a.cross(b).abs() < 1e-12 && a.dot(b) < 0.0
        }
    }

    /// Whether the node is resolved by a junction polygon (bifurcations,
    /// bends and any node of degree ≥ 3).
    pub fn has_junction(&self, node: usize) -> bool {
        self.degree(node) >= 2 && !self.is_straight_joint(node)
    }

    pub fn node_index(&self, id: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn edge_index(&self, id: usize) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    /// Copy of the graph with all transverse dimensions scaled: the skeleton
    /// is unchanged, ε is replaced.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<TubeGraph> {
        build_graph(&self.to_spec(epsilon))
    }

    pub fn to_spec(&self, epsilon: f64) -> GraphSpec {
        GraphSpec {
            epsilon,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeSpec { id: n.id, position: n.position, kind: n.kind })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    id: e.id,
                    from: self.nodes[e.from].id,
                    to: self.nodes[e.to].id,
                    theta: e.theta,
                    stenoses: e.stenoses.clone(),
                })
                .collect(),
        }
    }
}

/// Single straight edge from (0,0) to (length,0) with ports at both ends.
pub fn straight_channel(epsilon: f64, length: f64, theta: f64, q0: f64, q1: f64, inflow: f64) -> GraphSpec {
    GraphSpec {
        epsilon,
        nodes: vec![
            NodeSpec { id: 0, position: Point::new(0.0, 0.0), kind: NodeKind::EntranceExit { q: q0, inflow } },
            NodeSpec {
                id: 1,
                position: Point::new(length, 0.0),
                kind: NodeKind::EntranceExit { q: q1, inflow: -inflow },
            },
        ],
        edges: vec![EdgeSpec { id: 0, from: 0, to: 1, theta, stenoses: Vec::new() }],
    }
}

/// One-bundle structure: inlet edge of length `inlet_len` along +x ending at
/// the bifurcation node at the origin, two arms of length `arm_len` at
/// `±half_angle`. Inflow is split evenly between the outlets.
#[allow(clippy::too_many_arguments)]
pub fn bifurcation(
    epsilon: f64,
    inlet_len: f64,
    arm_len: f64,
    half_angle: f64,
    thetas: [f64; 3],
    q_in: f64,
    q_out: f64,
    inflow: f64,
) -> GraphSpec {
    let (s, c) = half_angle.sin_cos();
    GraphSpec {
        epsilon,
        nodes: vec![
            NodeSpec { id: 0, position: Point::new(-inlet_len, 0.0), kind: NodeKind::EntranceExit { q: q_in, inflow } },
            NodeSpec { id: 1, position: Point::new(0.0, 0.0), kind: NodeKind::Bifurcation },
            NodeSpec {
                id: 2,
                position: Point::new(arm_len * c, arm_len * s),
                kind: NodeKind::EntranceExit { q: q_out, inflow: -0.5 * inflow },
            },
            NodeSpec {
                id: 3,
                position: Point::new(arm_len * c, -arm_len * s),
                kind: NodeKind::EntranceExit { q: q_out, inflow: -0.5 * inflow },
            },
        ],
        edges: vec![
            EdgeSpec { id: 0, from: 0, to: 1, theta: thetas[0], stenoses: Vec::new() },
            EdgeSpec { id: 1, from: 1, to: 2, theta: thetas[1], stenoses: Vec::new() },
            EdgeSpec { id: 2, from: 1, to: 3, theta: thetas[2], stenoses: Vec::new() },
        ],
    }
}
