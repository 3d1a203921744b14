//! Weld per-cell triangles into one global mesh by provenance key. Vertices
//! with equal keys merge exactly (no floating-point proximity matching), so
//! the result is deterministic and watertight by construction.

use super::TriangleMesh;
use crate::contour::{ContourOutput, VertexKey};
use crate::lattice::CellKey;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeldError {
    #[error("vertex {0:?} has no recorded position")]
    MissingPosition(VertexKey),
    #[error("duplicate triangle between cells {0:?} and {1:?}")]
    DuplicateTriangle(Option<CellKey>, Option<CellKey>),
    #[error("orientation conflict on a shared edge between cells {0:?} and {1:?}")]
    OrientationConflict(Option<CellKey>, Option<CellKey>),
}

/// Merge the contoured cells into a single indexed mesh. Zero-volume
/// "pillows" (the same triangle emitted with opposite orientations by the
/// two cells around a degenerate face bump) cancel; same-orientation
/// duplicates and directed-edge conflicts are errors.
pub fn weld(contour: &ContourOutput) -> Result<TriangleMesh, WeldError> {
    let (mesh, _) = weld_with_stats(contour)?;
    Ok(mesh)
}

/// Number of cancelled coincident triangle pairs alongside the mesh.
pub fn weld_with_stats(contour: &ContourOutput) -> Result<(TriangleMesh, usize), WeldError> {
    let mut ids: BTreeMap<VertexKey, u32> = BTreeMap::new();
    let mut vertices = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    let cell_of = |tri_idx: usize| -> Option<CellKey> {
        contour
            .triangle_cells
            .iter()
            .find(|(_, r)| r.contains(&tri_idx))
            .map(|(c, _)| *c)
    };

    for t in &contour.triangles {
        let mut tri = [0u32; 3];
        for (slot, key) in tri.iter_mut().zip(t.iter()) {
            let next = ids.len() as u32;
            let id = *ids.entry(*key).or_insert(next);
            if id == next {
                let pos = contour
                    .positions
                    .get(key)
                    .ok_or(WeldError::MissingPosition(*key))?;
                vertices.push(*pos);
            }
            *slot = id;
        }
        triangles.push(tri);
    }

    // group by sorted vertex set; opposite-orientation pairs cancel
    let parity = |t: &[u32; 3]| -> bool {
        // even permutation relative to sorted order
        let mut p = *t;
        let mut swaps = 0;
        for i in 0..2 {
            for j in 0..2 - i {
                if p[j] > p[j + 1] {
                    p.swap(j, j + 1);
                    swaps += 1;
                }
            }
        }
        swaps % 2 == 0
    };
    let mut groups: BTreeMap<[u32; 3], Vec<usize>> = BTreeMap::new();
    for (i, t) in triangles.iter().enumerate() {
        let mut k = *t;
        k.sort_unstable();
        groups.entry(k).or_default().push(i);
    }
    let mut drop = vec![false; triangles.len()];
    let mut cancelled = 0usize;
    for (_, g) in groups.iter() {
        match g.len() {
            1 => {}
            2 => {
                if parity(&triangles[g[0]]) != parity(&triangles[g[1]]) {
                    drop[g[0]] = true;
                    drop[g[1]] = true;
                    cancelled += 1;
                } else {
                    return Err(WeldError::DuplicateTriangle(cell_of(g[0]), cell_of(g[1])));
                }
            }
            _ => {
                return Err(WeldError::DuplicateTriangle(cell_of(g[0]), cell_of(g[1])));
            }
        }
    }

    // orientation check: no directed edge may appear twice
    let mut directed: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (i, t) in triangles.iter().enumerate() {
        if drop[i] {
            continue;
        }
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            if let Some(&j) = directed.get(&(a, b)) {
                return Err(WeldError::OrientationConflict(cell_of(j), cell_of(i)));
            }
            directed.insert((a, b), i);
        }
    }

    // compact: drop cancelled triangles and unreferenced vertices
    let kept: Vec<[u32; 3]> = triangles
        .iter()
        .enumerate()
        .filter(|(i, _)| !drop[*i])
        .map(|(_, t)| *t)
        .collect();
    let mut used = vec![false; vertices.len()];
    for t in &kept {
        for &v in t {
            used[v as usize] = true;
        }
    }
    let mut remap = vec![u32::MAX; vertices.len()];
    let mut mesh = TriangleMesh::default();
    for (i, v) in vertices.iter().enumerate() {
        if used[i] {
            remap[i] = mesh.vertices.len() as u32;
            mesh.vertices.push(*v);
        }
    }
    mesh.triangles = kept
        .into_iter()
        .map(|t| [remap[t[0] as usize], remap[t[1] as usize], remap[t[2] as usize]])
        .collect();

    Ok((mesh, cancelled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::lattice::NodeId;

    fn key(i: i64) -> VertexKey {
        VertexKey::Corner(NodeId(i, 0, 0))
    }

    fn output_with(tris: Vec<[VertexKey; 3]>) -> ContourOutput {
        let mut out = ContourOutput::default();
        for t in &tris {
            for k in t {
                if let VertexKey::Corner(NodeId(i, _, _)) = k {
                    out.positions.insert(*k, Vec3::new(*i as f64, 0.0, 0.0));
                }
            }
        }
        out.triangles = tris;
        out
    }

    #[test]
    fn weld_merges_shared_keys() {
        let out = output_with(vec![
            [key(0), key(1), key(2)],
            [key(2), key(1), key(3)],
        ]);
        let mesh = weld(&out).unwrap();
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.triangles.len(), 2);
    }

    #[test]
    fn weld_detects_orientation_conflict() {
        // second triangle repeats directed edge (0 -> 1)
        let out = output_with(vec![
            [key(0), key(1), key(2)],
            [key(0), key(1), key(3)],
        ]);
        assert!(matches!(
            weld(&out),
            Err(WeldError::OrientationConflict(_, _))
        ));
    }

    #[test]
    fn weld_detects_duplicates() {
        let out = output_with(vec![
            [key(0), key(1), key(2)],
            [key(1), key(2), key(0)],
        ]);
        assert!(matches!(weld(&out), Err(WeldError::DuplicateTriangle(_, _))));
    }
}
