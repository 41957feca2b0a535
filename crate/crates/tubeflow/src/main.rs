use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tubeflow::artifacts::Artifacts;
use tubeflow::config::{ExperimentConfig, Scenario};
use tubeflow::graph_file::GraphFile;
use tubeflow::scenarios::{run, RunOptions, Setup};
use tubeflow::{Result, RunReport};

/// Steady Stokes and convection-diffusion-sorption experiments on thin tube
/// networks. Exit status: 0 success, 2 tolerance failure, 1 error.
#[derive(Parser)]
#[command(name = "tubeflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory (default: the config's `output`, else out/<scenario>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Accept meshes whose cell Péclet number exceeds 2.
    #[arg(long, global = true)]
    allow_peclet: bool,
    /// Jitter interior sample positions with this seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a configuration with its diffusivity sweep replaced.
    Sweep {
        config: PathBuf,
        /// Comma-separated diffusivities.
        #[arg(long, value_delimiter = ',', required = true)]
        kappa: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// ε-convergence study (defaults when no configuration is given).
    Convergence {
        config: Option<PathBuf>,
        /// Comma-separated ε values.
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Boundary-layer cell problems (defaults when no configuration is given).
    Cells {
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Mesh a graph file and write it in the plain-text mesh format.
    ExportMesh {
        graph: PathBuf,
        /// Target element size (default: eight elements across the narrowest channel).
        #[arg(long)]
        h: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(report)) => {
            print_report(&report);
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                for f in report.failures() {
                    eprintln!("tolerance failure: {f}");
                }
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_or_default(config: Option<&Path>, scenario: Scenario) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::from_scenario(scenario),
    };
    cfg.scenario = scenario;
    Ok(cfg)
}

fn execute(command: Command) -> Result<Option<RunReport>> {
    let (cfg, common) = match command {
        Command::Run { config, common } => (ExperimentConfig::load(&config)?, common),
        Command::Sweep { config, kappa, common } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.physics.kappa = Some(kappa);
            (cfg, common)
        }
        Command::Convergence { config, epsilons, common } => {
            let mut cfg = load_or_default(config.as_deref(), Scenario::Convergence)?;
            if let Some(e) = epsilons {
                cfg.numerics.epsilons = e;
            }
            (cfg, common)
        }
        Command::Cells { config, common } => (load_or_default(config.as_deref(), Scenario::Cells)?, common),
        Command::ExportMesh { graph, h, common } => {
            export_mesh(&graph, h, common.out.unwrap_or_else(|| PathBuf::from("out/mesh")))?;
            return Ok(None);
        }
    };
    let dir = common.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| Path::new("out").join(cfg.scenario.name()));
    let out = Artifacts::create(&dir)?;
    let opts = RunOptions { allow_peclet: common.allow_peclet, seed: common.seed };
    let report = run(&cfg, opts, &out)?;
    out.json("report.json", &report)?;
    out.finish(&serde_json::json!({ "config": cfg, "seed": common.seed, "passed": report.passed() }))?;
    println!("artifacts: {}", dir.display());
    Ok(Some(report))
}

fn export_mesh(graph: &Path, h: Option<f64>, dir: PathBuf) -> Result<()> {
    let spec = GraphFile::load(graph)?.to_spec()?;
    let mut cfg = ExperimentConfig::from_scenario(Scenario::StraightChannel);
    cfg.numerics.h = h;
    cfg.validate()?;
    let setup = Setup::from_config(&cfg, spec)?;
    let out = Artifacts::create(&dir)?;
    out.mesh("mesh.txt", &setup.mesh)?;
    out.finish(&serde_json::json!({ "graph": graph, "h": setup.h, "vertices": setup.mesh.n_vertices(), "triangles": setup.mesh.n_triangles() }))?;
    println!("mesh: {} ({} triangles)", dir.join("mesh.txt").display(), setup.mesh.n_triangles());
    Ok(())
}

fn print_report(r: &RunReport) {
    println!("scenario {} ({:.2} s)", r.scenario, r.runtime_s);
    for row in &r.rows {
        println!(
            "  kappa {:<8} {:<6} max {:.4e} ({:.3}% of range){}",
            row.kappa,
            row.method,
            row.max_diff,
            100.0 * row.relative_max,
            if row.checked { if row.within_band { "  ok" } else { "  OUTSIDE BAND" } } else { "" }
        );
    }
    for c in &r.checks {
        println!("  {:<40} {:.6e} (limit {:.3e}) {}", c.name, c.value, c.limit, if c.pass { "ok" } else { "FAIL" });
    }
}

