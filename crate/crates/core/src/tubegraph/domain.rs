use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;


use super::{End, Incidence, TubeGraph};
use crate::geometry::{convex_overlap, point_in_polygon, polygon_area, Point};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    LateralWall,
    /// Entrance/exit boundary of the port node with this index.
    Port(usize),
    /// Interface between a zoom zone and a skeleton segment.
    CutLine(usize),
}

/// Graph entity a boundary piece or mesh region belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Owner {
    Edge(usize),
    Node(usize),
}

/// Oriented boundary segment with the domain on its left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPiece {
    pub a: Point,
    pub b: Point,
    pub tag: BoundaryTag,
    pub owner: Owner,
}

/// Channel rectangle of an edge between axial offsets `start` and `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRect {
    pub edge: usize,
    pub start: f64,
    pub end: f64,
    pub half_width: f64,
}

impl EdgeRect {
    pub fn corners(&self, g: &TubeGraph) -> [Point; 4] {
        let w = self.half_width;
        [
            g.point_at(self.edge, self.start, -w),
            g.point_at(self.edge, self.end, -w),
            g.point_at(self.edge, self.end, w),
            g.point_at(self.edge, self.start, w),
        ]
    }

    pub fn area(&self) -> f64 {
        2.0 * self.half_width * (self.end - self.start)
    }
}

/// Junction polygon around a node: for each incident branch (sorted
/// counterclockwise by direction) the right and left corners of its end
/// face, so `vertices[2i]..vertices[2i+1]` is the face of `branches[i]` and
/// `vertices[2i+1]..vertices[2i+2]` a wall.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionPolygon {
    pub node: usize,
    /// Distance from the node to every end face.
    pub trim: f64,
    pub branches: Vec<Incidence>,
    pub vertices: Vec<Point>,
}

impl JunctionPolygon {
    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }
}

/// Physical 2D tube domain built from a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalDomain {
    pub graph: TubeGraph,
    /// Distance from each node to the end faces of its incident rectangles.
    pub trims: Vec<f64>,
    pub rects: Vec<EdgeRect>,
    pub junctions: Vec<JunctionPolygon>,
    pub boundary: Vec<BoundaryPiece>,
}

pub fn instantiate_domain(graph: &TubeGraph) -> Result<PolygonalDomain> {
    let n_nodes = graph.nodes.len();
    let mut trims = vec![0.0; n_nodes];
    let mut junctions = Vec::new();
    for node in 0..n_nodes {
        if graph.has_junction(node) {
            let (r, branches) = junction_trim(graph, node)?;
            trims[node] = r;
            let mut vertices = Vec::with_capacity(2 * branches.len());
            for &inc in &branches {
                let w = 0.5 * graph.width(inc.edge);
                vertices.push(face_point(graph, inc, r, -w));
                vertices.push(face_point(graph, inc, r, w));
            }
            junctions.push(JunctionPolygon { node, trim: r, branches, vertices });
        }
    }
    let rects: Vec<EdgeRect> = graph
        .edges
        .iter()
        .enumerate()
        .map(|(k, e)| EdgeRect {
            edge: k,
            start: trims[e.from],
            end: e.length - trims[e.to],
            half_width: 0.5 * graph.width(k),
        })
        .collect();
    let tol = 1e-9 * graph.epsilon;
    for (i, a) in rects.iter().enumerate() {
        if a.end - a.start <= tol {
            return Err(Error::OverlapError {
                first: edge_label(graph, a.edge),
                second: String::from("its own end junctions"),
            });
        }
        let ca = a.corners(graph);
        for b in &rects[i + 1..] {
            if convex_overlap(&ca, &b.corners(graph), tol) {
                return Err(Error::OverlapError { first: edge_label(graph, a.edge), second: edge_label(graph, b.edge) });
            }
        }
    }
    let boundary = boundary_pieces(graph, &rects, &junctions);
    let domain = PolygonalDomain { graph: graph.clone(), trims, rects, junctions, boundary };
    domain.loops()?;
    Ok(domain)
}

fn edge_label(g: &TubeGraph, edge: usize) -> String {
    format!("edge {}", g.edges[edge].id)
}

/// Point on the end face of `inc` at distance `r` from its node, at signed
/// offset `u` along the left normal of the outward direction.
pub(crate) fn face_point(g: &TubeGraph, inc: Incidence, r: f64, u: f64) -> Point {
    let t = match inc.end {
        End::Start => u,
        End::Finish => -u,
    };
    g.point_at(inc.edge, g.offset_from_end(inc, r), t)
}

/// Smallest trim distance (on a geometric ladder starting at half the widest
/// incident channel) such that the incident rectangles keep a clearance of a
/// tenth of the narrowest width and no end face is hidden behind another.
fn junction_trim(g: &TubeGraph, node: usize) -> Result<(f64, Vec<Incidence>)> {
    let mut branches: Vec<Incidence> = g.incident(node).to_vec();
    branches.sort_by(|a, b| g.outward(*a).angle().partial_cmp(&g.outward(*b).angle()).unwrap());
    let widths: Vec<f64> = branches.iter().map(|inc| g.width(inc.edge)).collect();
    let w_max = widths.iter().cloned().fold(0.0, f64::max);
    let w_min = widths.iter().cloned().fold(f64::INFINITY, f64::min);
    let len_min = branches.iter().map(|inc| g.edges[inc.edge].length).fold(f64::INFINITY, f64::min);
    let margin = 0.1 * w_min;
    let mut r = 0.5 * w_max;
    let mut culprit = (branches[0].edge, branches[1].edge);
    while r < 0.45 * len_min {
        match junction_conflict(g, &branches, r, margin, len_min) {
            None => return Ok((r, branches)),
            Some(pair) => culprit = pair,
        }
        r *= 1.05;
    }
    Err(Error::OverlapError { first: edge_label(g, culprit.0), second: edge_label(g, culprit.1) })
}

fn junction_conflict(g: &TubeGraph, branches: &[Incidence], r: f64, margin: f64, len_min: f64) -> Option<(usize, usize)> {
    let far = 0.5 * len_min;
    let rect = |inc: Incidence| {
        let w = 0.5 * g.width(inc.edge);
        [face_point(g, inc, r, -w), face_point(g, inc, far, -w), face_point(g, inc, far, w), face_point(g, inc, r, w)]
    };
    let node = g.nodes[if branches[0].end == End::Start {
        g.edges[branches[0].edge].from
    } else {
        g.edges[branches[0].edge].to
    }]
    .position;
    for (i, &a) in branches.iter().enumerate() {
        let ra = rect(a);
        let oa = g.outward(a);
        for (j, &b) in branches.iter().enumerate() {
            if i == j {
                continue;
            }
            if j > i && convex_overlap(&ra, &rect(b), -margin) {
                return Some((a.edge, b.edge));
            }
            let wb = 0.5 * g.width(b.edge);
            for u in [-wb, wb] {
                if (face_point(g, b, r, u) - node).dot(oa) > r - margin {
                    return Some((a.edge, b.edge));
                }
            }
        }
    }
    let n = branches.len();
    let mut poly = Vec::with_capacity(2 * n);
    for &inc in branches {
        let w = 0.5 * g.width(inc.edge);
        poly.push(face_point(g, inc, r, -w));
        poly.push(face_point(g, inc, r, w));
    }
    for k in 0..n {
        let wall = poly[(2 * k + 2) % (2 * n)] - poly[2 * k + 1];
        let face = poly[2 * k + 1] - poly[2 * k];
        if wall.norm() < margin || face.cross(wall) < 0.0 && n > 2 {
            return Some((branches[k].edge, branches[(k + 1) % n].edge));
        }
    }
    None
}

fn boundary_pieces(g: &TubeGraph, rects: &[EdgeRect], junctions: &[JunctionPolygon]) -> Vec<BoundaryPiece> {
    let mut out = Vec::new();
    for r in rects {
        let e = &g.edges[r.edge];
        let owner = Owner::Edge(r.edge);
        let w = r.half_width;
        let wall = BoundaryTag::LateralWall;
        out.push(BoundaryPiece { a: g.point_at(r.edge, r.start, -w), b: g.point_at(r.edge, r.end, -w), tag: wall, owner });
        out.push(BoundaryPiece { a: g.point_at(r.edge, r.end, w), b: g.point_at(r.edge, r.start, w), tag: wall, owner });
        for (node, s, sign) in [(e.from, r.start, 1.0), (e.to, r.end, -1.0)] {
            if g.degree(node) != 1 {
                continue;
            }
            let tag = if g.is_port(node) { BoundaryTag::Port(node) } else { BoundaryTag::LateralWall };
            out.push(BoundaryPiece {
                a: g.point_at(r.edge, s, sign * w),
                b: g.point_at(r.edge, s, -sign * w),
                tag,
                owner: Owner::Node(node),
            });
        }
    }
    for j in junctions {
        let n = j.vertices.len();
        for k in 0..j.branches.len() {
            out.push(BoundaryPiece {
                a: j.vertices[2 * k + 1],
                b: j.vertices[(2 * k + 2) % n],
                tag: BoundaryTag::LateralWall,
                owner: Owner::Node(j.node),
            });
        }
    }
    out
}

fn key(p: Point) -> (u64, u64) {
    (p.x.to_bits(), p.y.to_bits())
}

impl PolygonalDomain {
    pub fn epsilon(&self) -> f64 {
        self.graph.epsilon
    }

    pub fn area(&self) -> f64 {
        self.rects.iter().map(EdgeRect::area).sum::<f64>() + self.junctions.iter().map(JunctionPolygon::area).sum::<f64>()
    }

    /// Boundary pieces chained into closed loops (indices into `boundary`).
    pub fn loops(&self) -> Result<Vec<Vec<usize>>> {
        let mut by_start = alloc::collections::BTreeMap::new();
        for (i, p) in self.boundary.iter().enumerate() {
            if by_start.insert(key(p.a), i).is_some() {
                return Err(Error::InvalidGraph("boundary has a branching vertex".into()));
            }
        }
        let mut used = vec![false; self.boundary.len()];
        let mut loops = Vec::new();
        for start in 0..self.boundary.len() {
            if used[start] {
                continue;
            }
            let mut cur = start;
            let mut lp = Vec::new();
            loop {
                used[cur] = true;
                lp.push(cur);
                match by_start.get(&key(self.boundary[cur].b)) {
                    Some(&next) if next == start => break,
                    Some(&next) if !used[next] => cur = next,
                    _ => return Err(Error::InvalidGraph("boundary is not closed".into())),
                }
            }
            loops.push(lp);
        }
        Ok(loops)
    }

    /// Signed area enclosed by the boundary loops.
    pub fn boundary_area(&self) -> f64 {
        0.5 * self.boundary.iter().map(|p| p.a.cross(p.b)).sum::<f64>()
    }

    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        self.boundary.iter().filter(|p| p.tag == tag).map(|p| p.a.dist(p.b)).sum()
    }

    /// Owner of the piece of the domain containing `p`, if any.
    pub fn locate(&self, p: Point) -> Option<Owner> {
        for r in &self.rects {
            let (s, t) = self.graph.local_coords(r.edge, p);
            let tol = 1e-12 * self.graph.epsilon;
            if s >= r.start - tol && s <= r.end + tol && t.abs() <= r.half_width + tol {
                return Some(Owner::Edge(r.edge));
            }
        }
        self.junctions.iter().find(|j| point_in_polygon(p, &j.vertices)).map(|j| Owner::Node(j.node))
    }

    pub fn junction(&self, node: usize) -> Option<&JunctionPolygon> {
        self.junctions.iter().find(|j| j.node == node)
    }
}
