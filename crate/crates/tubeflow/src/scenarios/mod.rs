//! Experiment scenarios. Each runner takes a validated configuration, writes
//! its artifacts and returns a [`RunReport`].

mod bifurcation;
mod cells;
mod convergence;
mod hybrid;
mod straight;

pub use bifurcation::run_bifurcation;
pub use cells::run_cells;
pub use convergence::{epsilon_sweep, run_convergence, EpsilonPoint};
pub use hybrid::{k_sweep, run_mapdd, KPoint};
pub use straight::{poiseuille_error, run_straight_channel};

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tubeflow_core::asym1d::{solve_leading, Edge1DSolution, Settings1D};
use tubeflow_core::femcore::{mesh_domain, Field, Mesh};
use tubeflow_core::mapdd::{
    composite_velocity, solve_mapdd_transport, CompositeVelocity, HybridSolution, HybridSpace, MapddSettings,
};
use tubeflow_core::stokes2d::{port_poiseuille_bcs, solve_network_flow, solve_stokes, NetworkFlow, StokesSolution, ViscosityField};
use tubeflow_core::transport2d::{
    cross_section_average, peclet, solve_transport, total_flux_density, TransportParams, TransportSolution, Velocity,
};
use tubeflow_core::tubegraph::{
    build_graph, decompose_mapdd, instantiate_domain, BoundaryTag, GraphSpec, PolygonalDomain, TubeGraph,
};

use crate::artifacts::Artifacts;
use crate::config::{ExperimentConfig, Scenario};
use crate::error::{Context, HarnessError, Result};
use crate::report::{ComparisonRow, RunReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Accept meshes whose cell Péclet number exceeds 2.
    pub allow_peclet: bool,
    /// Jitters interior cross-section sample positions (off by default).
    pub seed: Option<u64>,
}

pub fn run(cfg: &ExperimentConfig, opts: RunOptions, out: &Artifacts) -> Result<RunReport> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::StraightChannel => run_straight_channel(cfg, opts, out),
        Scenario::Bifurcation => run_bifurcation(cfg, opts, out),
        Scenario::Convergence => run_convergence(cfg, opts, out),
        Scenario::Cells => run_cells(cfg, opts, out),
        Scenario::Mapdd => run_mapdd(cfg, opts, out),
    }
}

/// Graph, domain, mesh and network flow of one geometry.
pub struct Setup {
    pub spec: GraphSpec,
    pub graph: TubeGraph,
    pub domain: PolygonalDomain,
    pub h: f64,
    pub mesh: Arc<Mesh>,
    pub flow: NetworkFlow,
    pub mu: f64,
}

impl Setup {
    pub fn new(spec: GraphSpec, h: f64, mu: f64) -> Result<Self> {
        let graph = build_graph(&spec).context(|| "graph".into())?;
        let domain = instantiate_domain(&graph).context(|| "domain".into())?;
        let mesh = Arc::new(mesh_domain(&domain, h).context(|| format!("mesh (h = {h})"))?);
        let flow = solve_network_flow(&graph, mu).context(|| "network flow".into())?;
        Ok(Self { spec, graph, domain, h, mesh, flow, mu })
    }

    pub fn from_config(cfg: &ExperimentConfig, spec: GraphSpec) -> Result<Self> {
        let h = cfg.element_size(&spec);
        Self::new(spec, h, cfg.physics.mu)
    }

    pub fn viscosity(&self) -> ViscosityField {
        ViscosityField::from_graph(&self.graph, self.mu)
    }

    pub fn stokes(&self) -> Result<StokesSolution> {
        solve_stokes(&self.mesh, &self.viscosity(), &port_poiseuille_bcs(&self.graph, &self.flow), None).context(|| "2D Stokes".into())
    }

    pub fn ports(&self) -> Vec<(BoundaryTag, f64)> {
        self.graph.ports().map(|n| (BoundaryTag::Port(n), self.graph.port_data(n).map_or(0.0, |d| d.0))).collect()
    }

    /// Spread of the port concentrations (1 when all ports agree).
    pub fn range(&self) -> f64 {
        let q: Vec<f64> = self.ports().iter().map(|p| p.1).collect();
        let r = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - q.iter().cloned().fold(f64::INFINITY, f64::min);
        if r > 0.0 {
            r
        } else {
            1.0
        }
    }

    pub fn inflow_scale(&self) -> f64 {
        self.flow.flux.iter().map(|q| q.abs()).fold(0.0, f64::max)
    }

    /// Axial sample offsets of every edge, covering the channel rectangle
    /// between junction polygons.
    pub fn samples(&self, n: usize, seed: Option<u64>) -> Vec<Vec<f64>> {
        let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
        (0..self.graph.edges.len())
            .map(|e| {
                let ed = &self.graph.edges[e];
                let (lo, hi) = (self.domain.trims[ed.from], ed.length - self.domain.trims[ed.to]);
                let step = (hi - lo) / (n - 1) as f64;
                (0..n)
                    .map(|i| {
                        let mut s = lo + step * i as f64;
                        if let (Some(r), true) = (rng.as_mut(), i > 0 && i + 1 < n) {
                            s += 0.25 * step * r.gen_range(-1.0..1.0);
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    }

    pub fn hybrid_velocity(&self, k: f64, include_ports: bool) -> Result<CompositeVelocity> {
        let dec = decompose_mapdd(&self.domain, k, include_ports).context(|| format!("decomposition (K = {k})"))?;
        let space = Arc::new(HybridSpace::new(&self.domain, &dec, MapddSettings::new(self.h)).context(|| format!("hybrid space (K = {k})"))?);
        composite_velocity(&space, &self.flow, &self.viscosity()).context(|| format!("composite velocity (K = {k})"))
    }
}

pub fn check_peclet(context: impl FnOnce() -> String, value: f64, opts: RunOptions) -> Result<()> {
    if value > 2.0 && !opts.allow_peclet {
        return Err(HarnessError::Peclet { context: context(), peclet: value });
    }
    Ok(())
}

pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

/// Sweep values as they appear in file names.
pub fn label(v: f64) -> String {
    format!("{v}")
}

/// Least-squares line `y = a x + b` and its coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let r2 = if syy > 0.0 { 1.0 - y.iter().zip(x).map(|(b0, a0)| (b0 - a * a0 - b).powi(2)).sum::<f64>() / syy } else { 1.0 };
    (a, b, r2)
}

/// Slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(HarnessError::SlopeUndefined(format!("{} sweep point(s)", x.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(HarnessError::SlopeUndefined("non-positive values cannot be fitted on a log scale".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly).0)
}

/// Largest difference and trapezoid L² norm of `a - b` on the offsets `s`.
pub fn profile_diff(s: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l2 = s.windows(2).zip(d.windows(2)).map(|(w, v)| 0.5 * (w[1] - w[0]) * (v[0] * v[0] + v[1] * v[1])).sum::<f64>();
    (max, l2.sqrt())
}

/// Transport solves of one diffusivity: 2D reference, 1D leading order and,
/// when a composite velocity is given, the hybrid model.
pub struct TransportPoint {
    pub kappa: f64,
    pub full: TransportSolution,
    pub flux_density: Field,
    pub leading: Edge1DSolution,
    pub hybrid: Option<HybridSolution>,
    /// `[edge][sample]` cross-section averages.
    pub avg_2d: Vec<Vec<f64>>,
    pub avg_1d: Vec<Vec<f64>>,
    pub avg_hybrid: Option<Vec<Vec<f64>>>,
    pub t_2d: f64,
    pub t_1d: f64,
    pub t_hybrid: f64,
}

pub struct PointInput<'a> {
    pub setup: &'a Setup,
    pub velocity: &'a Field,
    pub hybrid: Option<&'a CompositeVelocity>,
    pub samples: &'a [Vec<f64>],
    pub beta: f64,
    pub n_per_edge: usize,
    pub opts: RunOptions,
}

pub fn transport_point(input: &PointInput, kappa: f64) -> Result<TransportPoint> {
    let s = input.setup;
    let ctx = |what: &str| format!("{what} at kappa {kappa}");
    let params = TransportParams::new(kappa, input.beta).with_graph_perturbations(&s.graph);
    let vel = Velocity::Field(input.velocity);
    check_peclet(|| ctx("2D transport mesh"), peclet(&s.mesh, &params, vel), input.opts)?;
    let ports = s.ports();
    let (full, t_2d) = timed(|| solve_transport(&s.mesh, &s.graph, &params, vel, &ports));
    let full = full.context(|| ctx("2D transport"))?;
    let flux_density = total_flux_density(&full, &params, vel);
    let settings = Settings1D { n_per_edge: input.n_per_edge, ..Settings1D::default() };
    let (leading, t_1d) = timed(|| solve_leading(&s.graph, &s.flow, &params, settings));
    let leading = leading.context(|| ctx("1D leading order"))?;
    let (hybrid, t_hybrid) = match input.hybrid {
        Some(cv) => {
            let (h, t) = timed(|| solve_mapdd_transport(cv, &params, &ports));
            let h = h.context(|| ctx("hybrid transport"))?;
            check_peclet(|| ctx("hybrid zone mesh"), h.peclet_max, input.opts)?;
            (Some(h), t)
        }
        None => (None, 0.0),
    };
    let mut avg_2d = Vec::new();
    let mut avg_1d = Vec::new();
    let mut avg_hybrid = hybrid.as_ref().map(|_| Vec::new());
    for (e, samples) in input.samples.iter().enumerate() {
        avg_2d.push(
            cross_section_average(&full.concentration, &full.locator, &s.graph, &s.domain.trims, e, samples)
                .context(|| ctx("cross-section average"))?,
        );
        avg_1d.push(samples.iter().map(|&x| leading.value(0, e, x)).collect());
        if let (Some(h), Some(acc)) = (&hybrid, avg_hybrid.as_mut()) {
            let v = samples.iter().map(|&x| h.average(e, x)).collect::<tubeflow_core::Result<Vec<f64>>>();
            acc.push(v.context(|| ctx("hybrid average"))?);
        }
    }
    Ok(TransportPoint { kappa, full, flux_density, leading, hybrid, avg_2d, avg_1d, avg_hybrid, t_2d, t_1d, t_hybrid })
}

impl TransportPoint {
    /// Worst-edge maximum and network L² difference of `reduced` to the 2D
    /// averages.
    pub fn discrepancy(&self, samples: &[Vec<f64>], reduced: &[Vec<f64>]) -> (f64, f64) {
        let mut max: f64 = 0.0;
        let mut l2sq = 0.0;
        for (e, s) in samples.iter().enumerate() {
            let (m, l) = profile_diff(s, &self.avg_2d[e], &reduced[e]);
            max = max.max(m);
            l2sq += l * l;
        }
        (max, l2sq.sqrt())
    }

    pub fn rows(&self, setup: &Setup, samples: &[Vec<f64>], band: f64, agree_from: f64) -> Vec<ComparisonRow> {
        let range = setup.range();
        let checked = self.kappa >= agree_from;
        let dof_1d = self.leading.grids.iter().map(|g| g.n - 1).sum::<usize>() + setup.graph.nodes.len();
        let mut rows = Vec::new();
        let mut push = |method: &str, reduced: &[Vec<f64>], dof: usize, t: f64| {
            let (max, l2) = self.discrepancy(samples, reduced);
            rows.push(ComparisonRow {
                kappa: self.kappa,
                method: method.into(),
                max_diff: max,
                l2_diff: l2,
                relative_max: max / range,
                peclet_2d: self.full.peclet_max,
                dof_2d: setup.mesh.n_p2(),
                dof_reduced: dof,
                runtime_2d_s: self.t_2d,
                runtime_reduced_s: t,
                checked,
                within_band: max / range <= band,
            });
        };
        push("1d", &self.avg_1d, dof_1d, self.t_1d);
        if let (Some(h), Some(avg)) = (&self.hybrid, &self.avg_hybrid) {
            push("mapdd", avg, h.n_dofs, self.t_hybrid);
        }
        rows
    }

    /// Leading-order profile per edge on its grid and nodal summary.
    pub fn write_leading(&self, out: &Artifacts, graph: &TubeGraph) -> Result<()> {
        let k = label(self.kappa);
        for (e, grid) in self.leading.grids.iter().enumerate() {
            let pts = grid.points();
            let rows = pts.iter().zip(&self.leading.profiles[0][e]).map(|(x, c)| vec![*x, *c]);
            out.csv(&format!("leading_{k}_edge{e}.csv"), &["x1", "cbar0"], rows)?;
        }
        let summary = serde_json::json!({
            "kappa": self.kappa,
            "nodal": self.leading.nodal[0],
            "kirchhoff": self.leading.kirchhoff,
            "peclet": self.leading.peclet,
            "fitted": self.leading.fitted,
            "edges": graph.edges.iter().map(|e| e.id).collect::<Vec<_>>(),
        });
        out.json(&format!("leading_{k}.json"), &summary)?;
        Ok(())
    }
}
