//! End-to-end meshing pipeline: neighbor grid, adaptive partition, cell
//! contouring, weld, validation, metrics. Deterministic for any worker count.

use crate::contour::{contour_leafset, CellError};
use crate::exec::with_workers;
use crate::meshkit::{full_report, weld_with_stats, MeshReport, TriangleMesh, WeldError};
use crate::molmodel::{GaussianField, NeighborGrid};
use crate::partition::{initial_grid, refine, RefineParams};
use std::time::Instant;
use thiserror::Error;

/// Meshing parameters; defaults match the CLI defaults.
#[derive(Clone, Debug)]
pub struct MeshConfig {
    /// Coefficient-decay stopping threshold (relative to the isovalue).
    pub tau: f64,
    /// Initial grid cube edge, Angstrom.
    pub cell: f64,
    /// Maximum octree depth below the initial grid.
    pub max_depth: u8,
    /// Worker threads; 0 = library default. Ignored without `parallel`.
    pub workers: usize,
    /// Use the subdivided-parent bound to skip re-projection of clearly
    /// empty children.
    pub prefilter: bool,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            tau: 1e-2,
            cell: 4.0,
            max_depth: 8,
            workers: 0,
            prefilter: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("contouring failed in {count} cells; first: {first}")]
    Contour { count: usize, first: CellError },
    #[error(transparent)]
    Weld(#[from] WeldError),
}

/// Per-stage wall times and object counts.
#[derive(Clone, Debug, Default)]
pub struct PipelineStats {
    pub atoms: usize,
    pub cubes_visited: usize,
    pub leaves: usize,
    pub forced_leaves: usize,
    pub resurrected_leaves: usize,
    pub patches: usize,
    pub vertices: usize,
    pub triangles: usize,
    /// Coincident opposite-orientation triangle pairs cancelled at weld.
    pub cancelled_pillows: usize,
    pub time_grid_ms: f64,
    pub time_partition_ms: f64,
    pub time_contour_ms: f64,
    pub time_weld_ms: f64,
    pub time_validate_ms: f64,
    pub max_leaf_diagonal: f64,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub mesh: TriangleMesh,
    pub report: MeshReport,
    pub stats: PipelineStats,
}

/// Mesh the Gaussian surface of `field`. Fields with decay != 1 are handled
/// by scaling geometry by sqrt(decay), meshing at unit decay, and unscaling
/// the output vertices.
pub fn mesh_surface(field: &GaussianField, cfg: &MeshConfig) -> Result<PipelineOutput, PipelineError> {
    with_workers(cfg.workers, || mesh_surface_inner(field, cfg))
}

fn mesh_surface_inner(
    field: &GaussianField,
    cfg: &MeshConfig,
) -> Result<PipelineOutput, PipelineError> {
    let needs_rescale = (field.decay - 1.0).abs() > 1e-12;
    let (work_field, scale) = if needs_rescale {
        field.rescaled_to_unit_decay()
    } else {
        (field.clone(), 1.0)
    };
    let cell_edge = if needs_rescale {
        cfg.cell * scale
    } else {
        cfg.cell
    };

    let mut stats = PipelineStats {
        atoms: field.atoms.len(),
        ..Default::default()
    };

    let t0 = Instant::now();
    let grid = NeighborGrid::build(&work_field);
    let (frame, roots) = initial_grid(&work_field, &grid, cell_edge, cfg.max_depth);
    stats.time_grid_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let leafset = refine(
        &work_field,
        &grid,
        frame,
        roots,
        RefineParams {
            tau: cfg.tau,
            prefilter: cfg.prefilter,
        },
    );
    stats.time_partition_ms = t1.elapsed().as_secs_f64() * 1e3;
    stats.cubes_visited = leafset.cubes_visited;
    stats.leaves = leafset.leaves.len();
    stats.forced_leaves = leafset.forced_leaves.len();
    stats.resurrected_leaves = leafset.resurrected;
    stats.max_leaf_diagonal = leafset.max_leaf_diagonal() / scale;

    let t2 = Instant::now();
    let contour = contour_leafset(&leafset, work_field.isovalue);
    stats.time_contour_ms = t2.elapsed().as_secs_f64() * 1e3;
    stats.patches = contour.stats.patches;
    if !contour.errors.is_empty() {
        return Err(PipelineError::Contour {
            count: contour.errors.len(),
            first: contour.errors[0].clone(),
        });
    }

    let t3 = Instant::now();
    let (mut mesh, cancelled) = weld_with_stats(&contour)?;
    stats.cancelled_pillows = cancelled;
    if needs_rescale {
        for v in &mut mesh.vertices {
            *v = *v / scale;
        }
    }
    stats.time_weld_ms = t3.elapsed().as_secs_f64() * 1e3;
    stats.vertices = mesh.vertices.len();
    stats.triangles = mesh.triangles.len();

    let t4 = Instant::now();
    let report = full_report(&mesh);
    stats.time_validate_ms = t4.elapsed().as_secs_f64() * 1e3;

    Ok(PipelineOutput {
        mesh,
        report,
        stats,
    })
}
