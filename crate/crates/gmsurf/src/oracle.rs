//! Brute-force reference mesher and sampling utilities, independent of the
//! adaptive pipeline. The reference mesh marches tetrahedra on a Kuhn 6-tet
//! split of a dense uniform grid; the split is face-consistent across cubes,
//! so the result is watertight and manifold by construction for
//! non-degenerate samples (values equal to the isovalue are nudged).

use crate::exec::par_map;
use crate::geom::{Aabb, Vec3};
use crate::meshkit::TriangleMesh;
use crate::molmodel::{GaussianField, NeighborGrid};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dense grid would need {0} nodes (cap {1}); increase the spacing")]
    GridTooLarge(usize, usize),
}

/// Dense uniform sampling of the field.
#[derive(Clone, Debug)]
pub struct DenseGrid {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

impl DenseGrid {
    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(k * self.dims[1] + j) * self.dims[0] + i]
    }

    fn node_pos(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin
            + Vec3::new(
                i as f64 * self.spacing,
                j as f64 * self.spacing,
                k as f64 * self.spacing,
            )
    }

    /// Sample the truncated field over the padded influence bounding box.
    pub fn sample(
        field: &GaussianField,
        grid: &NeighborGrid,
        spacing: f64,
        max_nodes: usize,
    ) -> Result<DenseGrid, OracleError> {
        let mut bb = Aabb::empty();
        for (a, rho) in field.atoms.iter().zip(&grid.rho) {
            bb.include_ball(&a.center, *rho);
        }
        let bb = bb.padded(spacing);
        let ext = bb.extent();
        let dims = [
            (ext[0] / spacing).ceil() as usize + 2,
            (ext[1] / spacing).ceil() as usize + 2,
            (ext[2] / spacing).ceil() as usize + 2,
        ];
        let total = dims[0] * dims[1] * dims[2];
        if total > max_nodes {
            return Err(OracleError::GridTooLarge(total, max_nodes));
        }
        let origin = bb.min;
        // parallel by z slab
        let slabs: Vec<usize> = (0..dims[2]).collect();
        let c = field.isovalue;
        let planes = par_map(&slabs, |&k| {
            let mut plane = Vec::with_capacity(dims[0] * dims[1]);
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = origin
                        + Vec3::new(
                            i as f64 * spacing,
                            j as f64 * spacing,
                            k as f64 * spacing,
                        );
                    let mut v = crate::molmodel::eval_phi(field, grid, &p);
                    // nudge exact isovalue hits for watertight-by-cases
                    if (v - c).abs() < 1e-12 * c {
                        v = c + 2e-12 * c;
                    }
                    plane.push(v);
                }
            }
            plane
        });
        let mut values = Vec::with_capacity(total);
        for plane in planes {
            values.extend(plane);
        }
        Ok(DenseGrid {
            origin,
            spacing,
            dims,
            values,
        })
    }
}

/// Kuhn 6-tetrahedron split of the unit cube: monotone bit paths from corner
/// 0 to corner 7. The induced face diagonals agree between neighboring cubes.
const KUHN_TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Marching-tetrahedra reference mesh of the isosurface.
pub fn mc_reference(
    field: &GaussianField,
    grid: &NeighborGrid,
    spacing: f64,
    max_nodes: usize,
) -> Result<TriangleMesh, OracleError> {
    let dense = DenseGrid::sample(field, grid, spacing, max_nodes)?;
    Ok(extract(&dense, field.isovalue))
}

/// Extract the isosurface of a dense grid with marching tetrahedra.
pub fn extract(dense: &DenseGrid, c: f64) -> TriangleMesh {
    let [nx, ny, nz] = dense.dims;
    let node_id = |i: usize, j: usize, k: usize| -> u64 { ((k * ny + j) * nx + i) as u64 };
    let mut vert_ids: BTreeMap<(u64, u64), u32> = BTreeMap::new();
    let mut mesh = TriangleMesh::default();

    fn edge_vertex(
        mesh: &mut TriangleMesh,
        vert_ids: &mut BTreeMap<(u64, u64), u32>,
        corners: &[(u64, Vec3, f64); 4],
        c: f64,
        a: usize,
        b: usize,
    ) -> u32 {
        let (ia, pa, va) = corners[a];
        let (ib, pb, vb) = corners[b];
        let key = (ia.min(ib), ia.max(ib));
        if let Some(&id) = vert_ids.get(&key) {
            return id;
        }
        let t = (c - va) / (vb - va);
        let p = pa + (pb - pa) * t;
        let id = mesh.vertices.len() as u32;
        mesh.vertices.push(p);
        vert_ids.insert(key, id);
        id
    }

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                // cube corner order: bit 0 -> +x, bit 1 -> +y, bit 2 -> +z
                let cube: [(u64, Vec3, f64); 8] = std::array::from_fn(|bits| {
                    let ii = i + (bits & 1);
                    let jj = j + ((bits >> 1) & 1);
                    let kk = k + ((bits >> 2) & 1);
                    (
                        node_id(ii, jj, kk),
                        dense.node_pos(ii, jj, kk),
                        dense.at(ii, jj, kk),
                    )
                });
                if cube.iter().all(|&(_, _, v)| v > c) || cube.iter().all(|&(_, _, v)| v < c) {
                    continue;
                }
                for tet in &KUHN_TETS {
                    let corners: [(u64, Vec3, f64); 4] = std::array::from_fn(|x| cube[tet[x]]);
                    let inside: [bool; 4] = std::array::from_fn(|x| corners[x].2 > c);
                    let ins: Vec<usize> = (0..4).filter(|&x| inside[x]).collect();
                    let outs: Vec<usize> = (0..4).filter(|&x| !inside[x]).collect();
                    match ins.len() {
                        0 | 4 => {}
                        1 => {
                            let a = ins[0];
                            let v: Vec<u32> = outs
                                .iter()
                                .map(|&o| edge_vertex(&mut mesh, &mut vert_ids, &corners, c, a, o))
                                .collect();
                            mesh.triangles.push([v[0], v[1], v[2]]);
                        }
                        3 => {
                            let a = outs[0];
                            let v: Vec<u32> = ins
                                .iter()
                                .map(|&x| edge_vertex(&mut mesh, &mut vert_ids, &corners, c, a, x))
                                .collect();
                            mesh.triangles.push([v[0], v[1], v[2]]);
                        }
                        2 => {
                            let (a, b) = (ins[0], ins[1]);
                            let (p, q) = (outs[0], outs[1]);
                            let ap = edge_vertex(&mut mesh, &mut vert_ids, &corners, c, a, p);
                            let aq = edge_vertex(&mut mesh, &mut vert_ids, &corners, c, a, q);
                            let bp = edge_vertex(&mut mesh, &mut vert_ids, &corners, c, b, p);
                            let bq = edge_vertex(&mut mesh, &mut vert_ids, &corners, c, b, q);
                            mesh.triangles.push([ap, aq, bq]);
                            mesh.triangles.push([ap, bq, bp]);
                        }
                        _ => unreachable!(),
                    }
                }
            }
        }
    }

    // the case emission above is not orientation-consistent; fix each
    // triangle against the sampled gradient (outward = decreasing field)
    orient_outward(&mut mesh, dense);
    mesh
}

fn orient_outward(mesh: &mut TriangleMesh, dense: &DenseGrid) {
    let sample = |q: &Vec3| -> f64 {
        let lx = ((q[0] - dense.origin[0]) / dense.spacing)
            .clamp(0.0, (dense.dims[0] - 1) as f64 - 1e-9);
        let ly = ((q[1] - dense.origin[1]) / dense.spacing)
            .clamp(0.0, (dense.dims[1] - 1) as f64 - 1e-9);
        let lz = ((q[2] - dense.origin[2]) / dense.spacing)
            .clamp(0.0, (dense.dims[2] - 1) as f64 - 1e-9);
        let (i, j, k) = (lx as usize, ly as usize, lz as usize);
        let (fx, fy, fz) = (lx - i as f64, ly - j as f64, lz - k as f64);
        let mut acc = 0.0;
        for b in 0..8usize {
            let w = (if b & 1 == 1 { fx } else { 1.0 - fx })
                * (if b & 2 == 2 { fy } else { 1.0 - fy })
                * (if b & 4 == 4 { fz } else { 1.0 - fz });
            acc += w * dense.at(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1));
        }
        acc
    };
    let h = 0.5 * dense.spacing;
    for t in &mut mesh.triangles {
        let a = mesh.vertices[t[0] as usize];
        let b = mesh.vertices[t[1] as usize];
        let cc = mesh.vertices[t[2] as usize];
        let n = (b - a).cross(&(cc - a));
        let centroid = (a + b + cc) / 3.0;
        let grad = Vec3::new(
            sample(&(centroid + Vec3::new(h, 0.0, 0.0)))
                - sample(&(centroid - Vec3::new(h, 0.0, 0.0))),
            sample(&(centroid + Vec3::new(0.0, h, 0.0)))
                - sample(&(centroid - Vec3::new(0.0, h, 0.0))),
            sample(&(centroid + Vec3::new(0.0, 0.0, h)))
                - sample(&(centroid - Vec3::new(0.0, 0.0, h))),
        );
        if n.dot(&grad) > 0.0 {
            t.swap(1, 2);
        }
    }
}

/// Surface samples by bisection along deterministic rays (Fibonacci-sphere
/// directions) from atom centers. Returns the points (each with
/// |phi - c| <= 1e-10) and the number of rays that found no crossing.
pub fn surface_samples(
    field: &GaussianField,
    grid: &NeighborGrid,
    n: usize,
) -> (Vec<Vec3>, usize) {
    assert!(n > 0);
    let c = field.isovalue;
    let max_rho = grid.rho.iter().cloned().fold(0.0, f64::max);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let rays: Vec<(usize, Vec3)> = (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let th = golden * i as f64;
            (i % field.atoms.len(), Vec3::new(r * th.cos(), y, r * th.sin()))
        })
        .collect();
    let results = par_map(&rays, |(atom_idx, dir)| {
        let center = field.atoms[*atom_idx].center;
        let phi0 = crate::molmodel::eval_phi(field, grid, &center);
        if phi0 <= c {
            return None;
        }
        let mut lo = 0.0;
        let mut hi = max_rho * 2.0;
        if crate::molmodel::eval_phi(field, grid, &(center + *dir * hi)) >= c {
            return None;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if crate::molmodel::eval_phi(field, grid, &(center + *dir * mid)) >= c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = center + *dir * (0.5 * (lo + hi));
        let residual = (crate::molmodel::eval_phi(field, grid, &p) - c).abs();
        (residual <= 1e-10 * c.max(1.0)).then_some(p)
    });
    let mut out = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r {
            Some(p) => out.push(p),
            None => skipped += 1,
        }
    }
    (out, skipped)
}
