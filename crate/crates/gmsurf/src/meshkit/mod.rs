//! Global mesh assembly and quality tooling: weld per-cell triangles by
//! provenance key, validate manifoldness and self-intersection, compute
//! area/volume/topology metrics, and read/write OFF files.

mod metrics;
mod off;
mod validate;
mod weld;

pub use metrics::{area, metrics, signed_volume, MetricsError};
pub use off::{read_off, write_off, write_off_string, OffError};
pub use validate::{check_intersections, check_manifold};
pub use weld::{weld, weld_with_stats, WeldError};

use crate::geom::Vec3;

/// Welded triangle mesh. Triangles are index triples with consistent outward
/// orientation (interior has field values above the isovalue).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| {
                [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                    .into_iter()
                    .map(|(a, b)| (a.min(b), a.max(b)))
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }
}

/// Validation and metric summary of a mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshReport {
    pub non_manifold_edges: usize,
    pub non_manifold_vertices: usize,
    pub intersecting_pairs: usize,
    /// Total surface area, square Angstrom.
    pub area: f64,
    /// Enclosed volume, cubic Angstrom; None when the mesh is not closed and
    /// consistently oriented.
    pub volume: Option<f64>,
    /// Vertices per square Angstrom.
    pub vertex_density: f64,
    pub euler_characteristic: i64,
    pub components: usize,
}

impl MeshReport {
    pub fn is_clean(&self) -> bool {
        self.non_manifold_edges == 0
            && self.non_manifold_vertices == 0
            && self.intersecting_pairs == 0
    }
}

/// Full validation + metrics pass over a mesh.
pub fn full_report(mesh: &TriangleMesh) -> MeshReport {
    let (nme, nmv) = check_manifold(mesh);
    let pairs = check_intersections(mesh);
    let mut report = metrics(mesh);
    report.non_manifold_edges = nme;
    report.non_manifold_vertices = nmv;
    report.intersecting_pairs = pairs;
    report
}
