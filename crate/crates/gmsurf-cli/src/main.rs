//! Command-line front end: mesh a PQR into an OFF surface, validate or
//! report metrics of an OFF, or extract a brute-force reference mesh.
//!
//! Exit codes: 0 success and clean, 2 validation defects found, 1
//! operational error.

use clap::{Args, Parser, Subcommand};
use gmsurf::meshkit::{full_report, read_off, write_off, MeshReport};
use gmsurf::molmodel::{parse_pqr, GaussianField, NeighborGrid};
use gmsurf::oracle::mc_reference;
use gmsurf::pipeline::{mesh_surface, MeshConfig, PipelineStats};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gmsurf",
    about = "Watertight manifold triangulation of Gaussian molecular surfaces",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FieldArgs {
    /// Input PQR file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Gaussian kernel decay rate D.
    #[arg(long, default_value_t = 1.0)]
    decay: f64,
    /// Level-set isovalue c.
    #[arg(long, default_value_t = 1.0)]
    isovalue: f64,
    /// Relative kernel truncation threshold.
    #[arg(long = "cutoff-eps", default_value_t = 1e-9)]
    cutoff_eps: f64,
    /// Worker threads (0 = all cores). Falls back to GMSURF_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
}

impl FieldArgs {
    fn validate(&self) -> Result<(), String> {
        if !(self.decay > 0.0) {
            return Err("--decay must be positive".into());
        }
        if !(self.isovalue > 0.0) {
            return Err("--isovalue must be positive".into());
        }
        if !(self.cutoff_eps > 0.0 && self.cutoff_eps <= 1e-4) {
            return Err("--cutoff-eps must be in (0, 1e-4]".into());
        }
        Ok(())
    }

    fn workers(&self) -> usize {
        self.workers
            .or_else(|| {
                std::env::var("GMSURF_WORKERS")
                    .ok()
                    .and_then(|v| v.parse().ok())
            })
            .unwrap_or(0)
    }

    fn load_field(&self) -> Result<GaussianField, String> {
        let text = fs::read_to_string(&self.input)
            .map_err(|e| format!("cannot read {}: {e}", self.input.display()))?;
        let atoms = parse_pqr(&text).map_err(|e| format!("{}: {e}", self.input.display()))?;
        Ok(GaussianField::new(atoms, self.decay, self.isovalue).with_cutoff(self.cutoff_eps))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Mesh the Gaussian surface of a PQR file into an OFF file.
    Mesh {
        #[command(flatten)]
        field: FieldArgs,
        /// Output OFF file.
        #[arg(long = "out")]
        output: PathBuf,
        /// Coefficient-decay stopping threshold (relative to the isovalue).
        #[arg(long, default_value_t = 1e-2)]
        tau: f64,
        /// Initial grid cube edge, Angstrom.
        #[arg(long, default_value_t = 4.0)]
        cell: f64,
        /// Maximum octree depth below the initial grid.
        #[arg(long = "max-depth", default_value_t = 8)]
        max_depth: u8,
    },
    /// Validate an OFF mesh (manifoldness + intersections) and print metrics.
    Check {
        /// Input OFF file.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print metrics of an OFF mesh without gating the exit code on defects.
    Stats {
        /// Input OFF file.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Dense marching-tetrahedra reference mesh (brute force).
    Oracle {
        #[command(flatten)]
        field: FieldArgs,
        /// Output OFF file.
        #[arg(long = "out")]
        output: PathBuf,
        /// Grid spacing, Angstrom.
        #[arg(long, default_value_t = 0.2)]
        spacing: f64,
        /// Dense grid node cap.
        #[arg(long = "max-grid-nodes", default_value_t = 200_000_000)]
        max_grid_nodes: usize,
    },
}

fn print_report(report: &MeshReport) {
    println!("non_manifold_edges={}", report.non_manifold_edges);
    println!("non_manifold_vertices={}", report.non_manifold_vertices);
    println!("intersecting_pairs={}", report.intersecting_pairs);
    println!("area={}", report.area);
    match report.volume {
        Some(v) => println!("volume={v}"),
        None => println!("volume=nan"),
    }
    println!("vertex_density={}", report.vertex_density);
    println!("euler_characteristic={}", report.euler_characteristic);
    println!("components={}", report.components);
}

fn print_stats(stats: &PipelineStats) {
    println!("atoms={}", stats.atoms);
    println!("cubes_visited={}", stats.cubes_visited);
    println!("leaves={}", stats.leaves);
    println!("forced_leaves={}", stats.forced_leaves);
    println!("resurrected_leaves={}", stats.resurrected_leaves);
    println!("patches={}", stats.patches);
    println!("vertices={}", stats.vertices);
    println!("triangles={}", stats.triangles);
    println!("cancelled_pillows={}", stats.cancelled_pillows);
    println!("max_leaf_diagonal={}", stats.max_leaf_diagonal);
    println!("time_grid_ms={:.3}", stats.time_grid_ms);
    println!("time_partition_ms={:.3}", stats.time_partition_ms);
    println!("time_contour_ms={:.3}", stats.time_contour_ms);
    println!("time_weld_ms={:.3}", stats.time_weld_ms);
    println!("time_validate_ms={:.3}", stats.time_validate_ms);
}

fn write_mesh(mesh: &gmsurf::TriangleMesh, path: &PathBuf) -> Result<(), String> {
    let file = fs::File::create(path)
        .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    let mut buf = std::io::BufWriter::new(file);
    write_off(mesh, &mut buf).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    buf.flush().map_err(|e| e.to_string())?;
    Ok(())
}

fn run() -> Result<bool, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Mesh {
            field,
            output,
            tau,
            cell,
            max_depth,
        } => {
            field.validate()?;
            if !(tau > 0.0) {
                return Err("--tau must be positive".into());
            }
            if !(cell > 0.0) {
                return Err("--cell must be positive".into());
            }
            let f = field.load_field()?;
            let cfg = MeshConfig {
                tau,
                cell,
                max_depth,
                workers: field.workers(),
                prefilter: true,
            };
            let out = mesh_surface(&f, &cfg).map_err(|e| e.to_string())?;
            write_mesh(&out.mesh, &output)?;
            eprintln!(
                "meshed {} atoms -> {} vertices, {} triangles -> {}",
                out.stats.atoms,
                out.stats.vertices,
                out.stats.triangles,
                output.display()
            );
            print_stats(&out.stats);
            print_report(&out.report);
            Ok(out.report.is_clean())
        }
        Command::Check { input } => {
            let text = fs::read_to_string(&input)
                .map_err(|e| format!("cannot read {}: {e}", input.display()))?;
            let mesh = read_off(&text).map_err(|e| format!("{}: {e}", input.display()))?;
            let report = full_report(&mesh);
            println!("vertices={}", mesh.vertices.len());
            println!("triangles={}", mesh.triangles.len());
            print_report(&report);
            Ok(report.is_clean())
        }
        Command::Stats { input } => {
            let text = fs::read_to_string(&input)
                .map_err(|e| format!("cannot read {}: {e}", input.display()))?;
            let mesh = read_off(&text).map_err(|e| format!("{}: {e}", input.display()))?;
            let report = full_report(&mesh);
            println!("vertices={}", mesh.vertices.len());
            println!("triangles={}", mesh.triangles.len());
            print_report(&report);
            Ok(true)
        }
        Command::Oracle {
            field,
            output,
            spacing,
            max_grid_nodes,
        } => {
            field.validate()?;
            if !(spacing > 0.0) {
                return Err("--spacing must be positive".into());
            }
            let f = field.load_field()?;
            let (work, scale) = if (f.decay - 1.0).abs() > 1e-12 {
                f.rescaled_to_unit_decay()
            } else {
                (f.clone(), 1.0)
            };
            let grid = NeighborGrid::build(&work);
            let mut mesh = gmsurf::exec::with_workers(field.workers(), || {
                mc_reference(&work, &grid, spacing * scale, max_grid_nodes)
            })
            .map_err(|e| e.to_string())?;
            if scale != 1.0 {
                for v in &mut mesh.vertices {
                    *v = *v / scale;
                }
            }
            write_mesh(&mesh, &output)?;
            eprintln!(
                "reference mesh: {} vertices, {} triangles -> {}",
                mesh.vertices.len(),
                mesh.triangles.len(),
                output.display()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
