use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use super::domain::{EdgeRect, PolygonalDomain};
use super::{End, Incidence, TubeGraph};
use crate::{Error, Result};

/// Structural feature that receives a zoom zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Node(usize),
    Stenosis { edge: usize, index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoomZone {
    pub feature: Feature,
    /// Channel parts of the zone (for a node: one per incident edge).
    pub rects: Vec<EdgeRect>,
    /// Junction polygon node, when the feature is a junction.
    pub junction: Option<usize>,
    pub cuts: Vec<usize>,
}

/// End of a skeleton segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentEnd {
    Cut(usize),
    /// A graph node (port, closed end or straight joint).
    Node(usize),
}

/// Reduced 1D part of an edge between axial offsets `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonSegment {
    pub edge: usize,
    pub a: f64,
    pub b: f64,
    pub end_a: SegmentEnd,
    pub end_b: SegmentEnd,
}

/// Transverse interface at axial `offset` of `edge`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutLine {
    pub id: usize,
    pub edge: usize,
    pub offset: f64,
    pub zone: usize,
    pub segment: usize,
    /// True when the zone lies at smaller offsets than the cut.
    pub zone_before: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapddDecomposition {
    pub k: f64,
    pub delta: f64,
    pub include_ports: bool,
    pub zones: Vec<ZoomZone>,
    pub skeleton: Vec<SkeletonSegment>,
    pub cuts: Vec<CutLine>,
}

/// Occupied interval of an edge, in axial offsets.
struct Interval {
    lo: f64,
    hi: f64,
    zone: Option<usize>,
    label: String,
}

/// Partitions the tube domain into zoom zones of half-size
/// `δ = K ε |ln ε|` around junctions, stenoses and (optionally) ports, and
/// skeleton segments covering the rest of every edge.
pub fn decompose_mapdd(domain: &PolygonalDomain, k: f64, include_ports: bool) -> Result<MapddDecomposition> {
    let g = &domain.graph;
    let eps = g.epsilon;
    let delta = k * eps * eps.ln().abs();
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!("zoom distance {delta} must be positive (K = {k})")));
    }
    let mut zones: Vec<ZoomZone> = Vec::new();
    let mut per_edge: Vec<Vec<Interval>> = (0..g.edges.len()).map(|_| Vec::new()).collect();
    for node in 0..g.nodes.len() {
        let junction = g.has_junction(node);
        let zoomed = junction || (include_ports && g.is_port(node));
        let label = node_label(g, node);
        let zone = if zoomed {
            let trim = domain.trims[node];
            if delta <= trim {
                return Err(Error::InvalidInput(format!(
                    "zoom distance {delta} does not reach past the junction of {label} (trim {trim})"
                )));
            }
            zones.push(ZoomZone {
                feature: Feature::Node(node),
                rects: Vec::new(),
                junction: junction.then_some(node),
                cuts: Vec::new(),
            });
            Some(zones.len() - 1)
        } else {
            None
        };
        for &inc in g.incident(node) {
            let reach = if zoomed { delta } else { 0.0 };
            let (lo, hi) = match inc.end {
                End::Start => (0.0, reach),
                End::Finish => (g.edges[inc.edge].length - reach, g.edges[inc.edge].length),
            };
            if let Some(z) = zone {
                let trim = domain.trims[node];
                let (start, end) = match inc.end {
                    End::Start => (trim, delta),
                    End::Finish => (g.edges[inc.edge].length - delta, g.edges[inc.edge].length - trim),
                };
                zones[z].rects.push(EdgeRect { edge: inc.edge, start, end, half_width: 0.5 * g.width(inc.edge) });
            }
            per_edge[inc.edge].push(Interval { lo, hi, zone, label: label.clone() });
        }
    }
    for (e, edge) in g.edges.iter().enumerate() {
        for (index, st) in edge.stenoses.iter().enumerate() {
            let label = format!("stenosis {index} of edge {}", edge.id);
            if delta <= st.support() * eps {
                return Err(Error::InvalidInput(format!(
                    "zoom distance {delta} does not contain the support of {label}"
                )));
            }
            zones.push(ZoomZone {
                feature: Feature::Stenosis { edge: e, index },
                rects: alloc::vec![EdgeRect { edge: e, start: st.s - delta, end: st.s + delta, half_width: 0.5 * g.width(e) }],
                junction: None,
                cuts: Vec::new(),
            });
            per_edge[e].push(Interval { lo: st.s - delta, hi: st.s + delta, zone: Some(zones.len() - 1), label });
        }
    }
    let mut skeleton = Vec::new();
    let mut cuts: Vec<CutLine> = Vec::new();
    for (e, list) in per_edge.iter_mut().enumerate() {
        list.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
        for w in list.windows(2) {
            let (p, q) = (&w[0], &w[1]);
            if !(p.hi + 2.0 * eps < q.lo) {
                return Err(Error::ZoomOverlap { first: p.label.clone(), second: q.label.clone() });
            }
        }
        let edge = &g.edges[e];
        for w in list.windows(2) {
            let (p, q) = (&w[0], &w[1]);
            let seg = skeleton.len();
            let mut end_for = |iv: &Interval, at: f64, zone_before: bool, node: usize| match iv.zone {
                Some(z) => {
                    let id = cuts.len();
                    cuts.push(CutLine { id, edge: e, offset: at, zone: z, segment: seg, zone_before });
                    zones[z].cuts.push(id);
                    SegmentEnd::Cut(id)
                }
                None => SegmentEnd::Node(node),
            };
            let end_a = end_for(p, p.hi, true, edge.from);
            let end_b = end_for(q, q.lo, false, edge.to);
            skeleton.push(SkeletonSegment { edge: e, a: p.hi, b: q.lo, end_a, end_b });
        }
    }
    Ok(MapddDecomposition { k, delta, include_ports, zones, skeleton, cuts })
}

fn node_label(g: &TubeGraph, node: usize) -> String {
    format!("node {}", g.nodes[node].id)
}

impl MapddDecomposition {
    /// Where a point given in edge coordinates `(edge, s)` falls: a zone index
    /// or a skeleton segment index.
    pub fn classify(&self, edge: usize, s: f64) -> Option<Placement> {
        for (z, zone) in self.zones.iter().enumerate() {
            if zone.rects.iter().any(|r| r.edge == edge && s >= r.start && s <= r.end) {
                return Some(Placement::Zone(z));
            }
        }
        self.skeleton
            .iter()
            .position(|seg| seg.edge == edge && s >= seg.a && s <= seg.b)
            .map(Placement::Skeleton)
    }

    pub fn zone_of_feature(&self, feature: Feature) -> Option<usize> {
        self.zones.iter().position(|z| z.feature == feature)
    }

    /// Incidence of a node zone's rectangle, seen from the node.
    pub fn rect_incidence(&self, g: &TubeGraph, zone: usize, rect: usize) -> Option<Incidence> {
        let Feature::Node(node) = self.zones[zone].feature else {
            return None;
        };
        let r = &self.zones[zone].rects[rect];
        g.incident(node).iter().copied().find(|inc| inc.edge == r.edge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Zone(usize),
    Skeleton(usize),
}
