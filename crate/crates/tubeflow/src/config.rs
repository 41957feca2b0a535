//! Experiment configuration (JSON, unknown keys rejected).
//!
//! Every section except `scenario` is optional; defaults reproduce the
//! studies of the corresponding scenario. Sweep-valued fields that are left
//! out take the scenario default listed on [`Scenario::default_kappas`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tubeflow_core::tubegraph::{bifurcation, straight_channel, GraphSpec, NodeKind};

use crate::error::{HarnessError, Result};
use crate::graph_file::{GraphFile, StenosisEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    StraightChannel,
    Bifurcation,
    Convergence,
    Cells,
    Mapdd,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::StraightChannel => "straight_channel",
            Scenario::Bifurcation => "bifurcation",
            Scenario::Convergence => "convergence",
            Scenario::Cells => "cells",
            Scenario::Mapdd => "mapdd",
        }
    }

    pub fn default_kappas(self) -> Vec<f64> {
        match self {
            Scenario::StraightChannel => vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
            Scenario::Bifurcation => vec![0.1, 0.25, 1.0, 10.0],
            Scenario::Convergence => vec![0.1],
            Scenario::Cells | Scenario::Mapdd => vec![1.0],
        }
    }

    pub fn default_geometry(self) -> Geometry {
        match self {
            Scenario::Bifurcation => Geometry::Bifurcation(BifurcationGeometry::default()),
            Scenario::Cells => Geometry::Bifurcation(BifurcationGeometry { inlet_stenoses: vec![default_stenosis()], ..Default::default() }),
            Scenario::Mapdd => Geometry::StraightChannel(ChannelGeometry { stenoses: vec![default_stenosis()], ..Default::default() }),
            Scenario::StraightChannel | Scenario::Convergence => Geometry::StraightChannel(ChannelGeometry::default()),
        }
    }
}

pub fn default_stenosis() -> StenosisEntry {
    StenosisEntry { s: 0.5, m_amp: 1.0, k_amp: 0.5, v_amp: 0.0, radius: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub geometry: Option<Geometry>,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Output directory; relative paths resolve against the working directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    StraightChannel(ChannelGeometry),
    Bifurcation(BifurcationGeometry),
    Inline(GraphFile),
    /// Graph file path, relative to the configuration file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelGeometry {
    pub epsilon: f64,
    pub length: f64,
    pub theta: f64,
    pub stenoses: Vec<StenosisEntry>,
}

impl Default for ChannelGeometry {
    fn default() -> Self {
        Self { epsilon: 0.05, length: 1.0, theta: 1.0, stenoses: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BifurcationGeometry {
    pub epsilon: f64,
    pub inlet_length: f64,
    pub arm_length: f64,
    pub half_angle_deg: f64,
    pub thetas: [f64; 3],
    /// Stenoses placed on the inlet edge.
    pub inlet_stenoses: Vec<StenosisEntry>,
}

impl Default for BifurcationGeometry {
    fn default() -> Self {
        Self { epsilon: 0.05, inlet_length: 1.0, arm_length: 1.0, half_angle_deg: 45.0, thetas: [1.0, 0.7, 0.7], inlet_stenoses: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub mu: f64,
    /// Diffusivity sweep; `None` takes the scenario default.
    pub kappa: Option<Vec<f64>>,
    pub beta: f64,
    /// Port concentrations of the preset geometries.
    pub q_in: f64,
    pub q_out: f64,
    /// Mean inlet speed of the preset geometries (inflow flux `speed θ ε`).
    pub inlet_speed: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self { mu: 1.0, kappa: None, beta: 0.4, q_in: 1.0, q_out: 0.5, inlet_speed: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Target element size; `None` puts `layers` elements across the
    /// narrowest channel.
    pub h: Option<f64>,
    pub layers: usize,
    /// 1D intervals per edge (even).
    pub n_per_edge: usize,
    /// Zoom-zone factors `K` in `δ = K ε |ln ε|`.
    pub mapdd_k: Vec<f64>,
    pub mapdd_ports: bool,
    /// ε sweep of the convergence scenario.
    pub epsilons: Vec<f64>,
    /// Cross-section sample count per edge.
    pub samples: usize,
    /// Cell truncation length `L` and mesh size in ξ units.
    pub cell_length: f64,
    pub cell_h: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            h: None,
            layers: 8,
            n_per_edge: 512,
            mapdd_k: vec![1.0],
            mapdd_ports: false,
            epsilons: vec![0.1, 0.05, 0.025],
            samples: 201,
            cell_length: 12.0,
            cell_h: 1.0 / 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Agreement band as a fraction of the port concentration range
    /// (scenario default: 2% straight channel, 3% bifurcation).
    pub band: Option<f64>,
    /// The band is enforced for sweep points with `ϰ` at least this value
    /// (scenario default: 0.1 straight channel, 10 bifurcation).
    pub agree_from_kappa: Option<f64>,
    pub min_slope: f64,
    /// Largest admissible relative broken-H¹ hybrid error.
    pub mapdd_h1: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { band: None, agree_from_kappa: None, min_slope: 0.8, mapdd_h1: 0.02 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })?;
        if let Some(Geometry::File(p)) = &mut cfg.geometry {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_scenario(scenario: Scenario) -> Self {
        Self {
            scenario,
            geometry: None,
            physics: Physics::default(),
            numerics: Numerics::default(),
            tolerances: Tolerances::default(),
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let p = &self.physics;
        for (name, v) in [("mu", p.mu), ("beta", p.beta), ("q_in", p.q_in), ("q_out", p.q_out), ("inlet_speed", p.inlet_speed)] {
            if !v.is_finite() {
                return bad(format!("physics.{name} must be finite"));
            }
        }
        if !(p.mu > 0.0) {
            return bad("physics.mu must be positive".into());
        }
        let kappas = self.kappas();
        if kappas.is_empty() {
            return bad("physics.kappa sweep is empty".into());
        }
        if kappas.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return bad("physics.kappa values must be positive and finite".into());
        }
        let n = &self.numerics;
        if let Some(h) = n.h {
            if !(h.is_finite() && h > 0.0) {
                return bad("numerics.h must be positive".into());
            }
        }
        if n.layers < 3 {
            return bad("numerics.layers must be at least 3".into());
        }
        if n.n_per_edge < 2 || n.n_per_edge % 2 != 0 {
            return bad("numerics.n_per_edge must be even and at least 2".into());
        }
        if n.mapdd_k.is_empty() || n.mapdd_k.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return bad("numerics.mapdd_k must be a non-empty list of positive values".into());
        }
        if n.epsilons.is_empty() || n.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad("numerics.epsilons must be a non-empty list in (0, 1)".into());
        }
        if n.samples < 2 {
            return bad("numerics.samples must be at least 2".into());
        }
        if !(n.cell_length.is_finite() && n.cell_h > 0.0 && n.cell_h.is_finite()) {
            return bad("numerics.cell_length and cell_h must be positive".into());
        }
        if let Some(Geometry::File(path)) = &self.geometry {
            if !path.exists() {
                return bad(format!("geometry file {} does not exist", path.display()));
            }
        }
        Ok(())
    }

    pub fn kappas(&self) -> Vec<f64> {
        self.physics.kappa.clone().unwrap_or_else(|| self.scenario.default_kappas())
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry.clone().unwrap_or_else(|| self.scenario.default_geometry())
    }

    pub fn band(&self) -> f64 {
        self.tolerances.band.unwrap_or(if self.scenario == Scenario::Bifurcation { 0.03 } else { 0.02 })
    }

    pub fn agree_from_kappa(&self) -> f64 {
        self.tolerances.agree_from_kappa.unwrap_or(if self.scenario == Scenario::Bifurcation { 10.0 } else { 0.1 })
    }

    /// Graph description at the configured ε.
    pub fn graph_spec(&self) -> Result<GraphSpec> {
        self.geometry().spec(&self.physics, None)
    }

    /// Graph description at ε = `epsilon`; port inflows scale with ε so
    /// mean speeds stay fixed.
    pub fn graph_spec_at(&self, epsilon: f64) -> Result<GraphSpec> {
        self.geometry().spec(&self.physics, Some(epsilon))
    }

    pub fn element_size(&self, spec: &GraphSpec) -> f64 {
        self.numerics.h.unwrap_or_else(|| {
            let theta = spec.edges.iter().map(|e| e.theta).fold(f64::INFINITY, f64::min);
            theta * spec.epsilon / self.numerics.layers as f64
        })
    }
}

impl Geometry {
    pub fn spec(&self, physics: &Physics, epsilon: Option<f64>) -> Result<GraphSpec> {
        let spec = match self {
            Geometry::StraightChannel(c) => {
                let eps = epsilon.unwrap_or(c.epsilon);
                let mut spec = straight_channel(eps, c.length, c.theta, physics.q_in, physics.q_out, physics.inlet_speed * c.theta * eps);
                spec.edges[0].stenoses = c.stenoses.iter().map(StenosisEntry::marker).collect();
                spec
            }
            Geometry::Bifurcation(b) => {
                let eps = epsilon.unwrap_or(b.epsilon);
                let mut spec = bifurcation(
                    eps,
                    b.inlet_length,
                    b.arm_length,
                    b.half_angle_deg.to_radians(),
                    b.thetas,
                    physics.q_in,
                    physics.q_out,
                    physics.inlet_speed * b.thetas[0] * eps,
                );
                spec.edges[0].stenoses = b.inlet_stenoses.iter().map(StenosisEntry::marker).collect();
                spec
            }
            Geometry::Inline(g) => rescale(g.to_spec()?, epsilon),
            Geometry::File(path) => rescale(GraphFile::load(path)?.to_spec()?, epsilon),
        };
        Ok(spec)
    }
}

fn rescale(mut spec: GraphSpec, epsilon: Option<f64>) -> GraphSpec {
    if let Some(eps) = epsilon {
        let f = eps / spec.epsilon;
        for n in &mut spec.nodes {
            if let NodeKind::EntranceExit { inflow, .. } = &mut n.kind {
                *inflow *= f;
            }
        }
        spec.epsilon = eps;
    }
    spec
}
