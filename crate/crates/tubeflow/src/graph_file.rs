//! JSON description of a tube graph.
//!
//! ```json
//! {
//!   "epsilon": 0.05,
//!   "nodes": [
//!     {"id": 0, "x": 0.0, "y": 0.0, "kind": "entrance_exit", "q": 1.0, "inflow": 0.05},
//!     {"id": 1, "x": 1.0, "y": 0.0, "kind": "entrance_exit", "q": 0.5, "inflow": -0.05}
//!   ],
//!   "edges": [
//!     {"id": 0, "from": 0, "to": 1, "theta": 1.0,
//!      "stenoses": [{"s": 0.5, "m_amp": 1.0, "k_amp": 0.5, "v_amp": 0.0, "radius": 1.0}]}
//!   ]
//! }
//! ```
//!
//! `kind` is one of `bifurcation`, `entrance_exit` (requires `q` and the
//! signed `inflow`, positive into the domain) or `dead`. Unknown keys are
//! rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tubeflow_core::geometry::Point;
use tubeflow_core::tubegraph::{EdgeSpec, GraphSpec, NodeKind, NodeSpec, RadialBump, StenosisMarker};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub epsilon: f64,
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<EdgeEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindEntry {
    Bifurcation,
    EntranceExit,
    Dead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub kind: KindEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflow: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub theta: f64,
    #[serde(default)]
    pub stenoses: Vec<StenosisEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StenosisEntry {
    pub s: f64,
    pub m_amp: f64,
    pub k_amp: f64,
    pub v_amp: f64,
    pub radius: f64,
}

impl StenosisEntry {
    pub fn marker(&self) -> StenosisMarker {
        StenosisMarker {
            s: self.s,
            viscosity: RadialBump { amplitude: self.m_amp, radius: self.radius },
            diffusivity: RadialBump { amplitude: self.k_amp, radius: self.radius },
            velocity: RadialBump { amplitude: self.v_amp, radius: self.radius },
        }
    }
}

impl GraphFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })
    }

    pub fn to_spec(&self) -> Result<GraphSpec> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let kind = match (n.kind, n.q, n.inflow) {
                    (KindEntry::EntranceExit, Some(q), Some(inflow)) => NodeKind::EntranceExit { q, inflow },
                    (KindEntry::EntranceExit, _, _) => {
                        return Err(HarnessError::Config(format!("port node {} needs both q and inflow", n.id)))
                    }
                    (_, None, None) => {
                        if n.kind == KindEntry::Bifurcation {
                            NodeKind::Bifurcation
                        } else {
                            NodeKind::Dead
                        }
                    }
                    _ => return Err(HarnessError::Config(format!("node {} is not a port but carries q/inflow", n.id))),
                };
                Ok(NodeSpec { id: n.id, position: Point::new(n.x, n.y), kind })
            })
            .collect::<Result<Vec<_>>>()?;
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeSpec {
                id: e.id,
                from: e.from,
                to: e.to,
                theta: e.theta,
                stenoses: e.stenoses.iter().map(StenosisEntry::marker).collect(),
            })
            .collect();
        Ok(GraphSpec { epsilon: self.epsilon, nodes, edges })
    }

    /// Inverse of [`GraphFile::to_spec`]. Stenoses whose three bumps do not
    /// share one radius are written with the viscosity radius.
    pub fn from_spec(spec: &GraphSpec) -> Self {
        let nodes = spec
            .nodes
            .iter()
            .map(|n| {
                let (kind, q, inflow) = match n.kind {
                    NodeKind::Bifurcation => (KindEntry::Bifurcation, None, None),
                    NodeKind::Dead => (KindEntry::Dead, None, None),
                    NodeKind::EntranceExit { q, inflow } => (KindEntry::EntranceExit, Some(q), Some(inflow)),
                };
                NodeEntry { id: n.id, x: n.position.x, y: n.position.y, kind, q, inflow }
            })
            .collect();
        let edges = spec
            .edges
            .iter()
            .map(|e| EdgeEntry {
                id: e.id,
                from: e.from,
                to: e.to,
                theta: e.theta,
                stenoses: e
                    .stenoses
                    .iter()
                    .map(|s| StenosisEntry {
                        s: s.s,
                        m_amp: s.viscosity.amplitude,
                        k_amp: s.diffusivity.amplitude,
                        v_amp: s.velocity.amplitude,
                        radius: s.viscosity.radius,
                    })
                    .collect(),
            })
            .collect();
        GraphFile { epsilon: spec.epsilon, nodes, edges }
    }
}
