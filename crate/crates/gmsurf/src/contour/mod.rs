//! Cell contouring: turn the piecewise-trilinear leaf complex into per-cell
//! triangles that agree exactly on shared faces.
//!
//! The pipeline works off three canonical tables so that every shared entity
//! is computed once and consumed identically by all adjacent cells:
//!   1. an edge table of surface crossings per finest sub-edge,
//!   2. a face table of traced curve chains per canonical face (the coarser
//!      side's extent), including fold endpoints contributed by both sides
//!      and sagitta-refined midpoints,
//!   3. per-cell fold segments and critical points.
//! Each cell stitches its six faces' chains into closed loops, cuts them
//! along its fold chords, classifies the resulting patches with a rotation
//! system walk, and ear-clips each patch in the projection along its
//! monotone axis.

pub mod cell;
pub mod earclip;
pub mod face;
pub mod fold;

pub use fold::{critical_points, fold_segments, FoldSegment};

use crate::exec::par_map;
use crate::geom::Vec3;
use crate::lattice::{face_axes, CellKey, EdgeSeg, FaceKey, NodeId};
use crate::partition::{FaceRel, LeafSet};
use crate::polyfit::TrilinearCell;
use std::collections::BTreeMap;
use thiserror::Error;

/// Identity of a mesh vertex; equal keys weld to one vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum VertexKey {
    /// Lattice corner (snapped crossing).
    Corner(NodeId),
    /// Crossing on a finest sub-edge.
    EdgeCross(EdgeSeg),
    /// Fold-segment endpoint on a cell face.
    FoldEnd {
        cell: CellKey,
        axis: u8,
        idx: u8,
        hi: bool,
    },
    /// Degenerate face saddle (curve self-crossing on a face).
    FaceSaddle(FaceKey),
    /// Sagitta-refinement midpoint on a face curve arc.
    ArcMid { face: FaceKey, chain: u16, seg: u16 },
    /// Critical point interior to a cell.
    Crit { cell: CellKey, idx: u8 },
    /// Steiner point of a fallback fan triangulation.
    PatchPoint { cell: CellKey, idx: u16 },
}

/// One point on a face curve, in the face's canonical [-1,1]^2 frame.
#[derive(Clone, Debug)]
pub struct FacePoint {
    pub key: VertexKey,
    pub uv: [f64; 2],
    /// World position (canonical; all consumers reuse it).
    pub pos: Vec3,
    /// True for frame-edge crossings (chain endpoints).
    pub boundary: bool,
}

/// Per-cell contour failure; carries the cell id for diagnosis.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum CellError {
    #[error("cell {0:?}: open face-curve chain (parity violation)")]
    OpenChain(CellKey),
    #[error("cell {0:?}: face walk produced an inconsistent arrangement")]
    BadArrangement(CellKey),
    #[error("cell {0:?}: patch has no usable monotone axis")]
    NoMonotoneAxis(CellKey),
    #[error("cell {0:?}: patch boundary projects to a non-simple polygon")]
    NonSimplePatch(CellKey),
}

#[derive(Clone, Debug, Default)]
pub struct ContourStats {
    pub cells: usize,
    pub cells_with_surface: usize,
    pub patches: usize,
    pub fold_segments: usize,
    pub critical_points: usize,
    pub holed_patches: usize,
    pub degenerate_dropped: usize,
}

/// Everything the welder needs: triangles as vertex-key triples plus one
/// canonical world position per key.
#[derive(Clone, Debug, Default)]
pub struct ContourOutput {
    pub triangles: Vec<[VertexKey; 3]>,
    pub positions: BTreeMap<VertexKey, Vec3>,
    /// Which cell emitted which triangle range (for error attribution).
    pub triangle_cells: Vec<(CellKey, std::ops::Range<usize>)>,
    pub errors: Vec<CellError>,
    pub stats: ContourStats,
}

/// Fold data of one cell.
pub(crate) struct CellFolds {
    key: CellKey,
    folds: Vec<fold::FoldSegment>,
    criticals: Vec<Vec3>,
}

/// Crossing of one finest sub-edge.
#[derive(Clone, Debug)]
struct EdgeCrossing {
    key: VertexKey,
    /// Parameter along the sub-edge in [0,1].
    t: f64,
    pos: Vec3,
}

pub(crate) struct Tables {
    fold_data: Vec<CellFolds>,
    face_keys: Vec<FaceKey>,
    records: Vec<face::FaceRecord>,
}

impl Tables {
    fn record(&self, key: &FaceKey) -> &face::FaceRecord {
        let i = self
            .face_keys
            .binary_search(key)
            .expect("face record exists");
        &self.records[i]
    }
}

/// Map a cell-face point (cell-local face uv) into the canonical face frame.
fn to_canonical_uv(uv: [f64; 2], quad: Option<(usize, usize)>) -> [f64; 2] {
    match quad {
        None => uv,
        Some((qu, qv)) => [
            -1.0 + qu as f64 + 0.5 * (uv[0] + 1.0),
            -1.0 + qv as f64 + 0.5 * (uv[1] + 1.0),
        ],
    }
}

/// Canonical face of `cell`'s face (axis, positive): the coarser neighbor's
/// extent if that neighbor is coarser, else the cell's own extent. Also
/// returns the cell's quadrant within the canonical face when applicable.
pub(crate) fn canonical_face_of(
    set: &LeafSet,
    cell: &CellKey,
    axis: usize,
    positive: bool,
) -> (FaceKey, Option<(usize, usize)>) {
    let frame = &set.frame;
    let step = frame.step(cell.depth);
    let min = frame.cell_min_node(cell);
    let plane = min.coord(axis) + if positive { step } else { 0 };
    let (ua, va) = face_axes(axis);
    match set.face_rel(cell, axis, positive) {
        FaceRel::Coarser(owner) => {
            let ostep = frame.step(owner.depth);
            let omin = frame.cell_min_node(&owner);
            let u0 = omin.coord(ua);
            let v0 = omin.coord(va);
            let qu = ((min.coord(ua) - u0) / step) as usize;
            let qv = ((min.coord(va) - v0) / step) as usize;
            (
                FaceKey {
                    axis: axis as u8,
                    plane,
                    u0,
                    v0,
                    size: ostep,
                },
                Some((qu, qv)),
            )
        }
        _ => (
            FaceKey {
                axis: axis as u8,
                plane,
                u0: min.coord(ua),
                v0: min.coord(va),
                size: step,
            },
            None,
        ),
    }
}

/// World position of a uv point on a canonical face.
fn face_uv_to_world(set: &LeafSet, key: &FaceKey, uv: [f64; 2]) -> Vec3 {
    let frame = &set.frame;
    let (ua, va) = face_axes(key.axis as usize);
    let unit = frame.unit;
    let mut w = [0.0; 3];
    w[key.axis as usize] = frame.origin[key.axis as usize] + key.plane as f64 * unit;
    w[ua] = frame.origin[ua] + (key.u0 as f64 + 0.5 * (uv[0] + 1.0) * key.size as f64) * unit;
    w[va] = frame.origin[va] + (key.v0 as f64 + 0.5 * (uv[1] + 1.0) * key.size as f64) * unit;
    Vec3(w)
}

/// Corner values of a canonical face in (u,v) bit order.
fn face_corner_values(set: &LeafSet, key: &FaceKey) -> [f64; 4] {
    let (ua, va) = face_axes(key.axis as usize);
    let mut out = [0.0; 4];
    for (slot, val) in out.iter_mut().enumerate() {
        let mut n = [0i64; 3];
        n[key.axis as usize] = key.plane;
        n[ua] = key.u0 + ((slot & 1) as i64) * key.size;
        n[va] = key.v0 + (((slot >> 1) & 1) as i64) * key.size;
        let node = NodeId(n[0], n[1], n[2]);
        *val = *set
            .node_values
            .get(&node)
            .expect("face corner missing from node table");
    }
    out
}

/// Crossing of a finest sub-edge, if the endpoint classifications differ.
fn subedge_crossing(set: &LeafSet, seg: EdgeSeg, c: f64) -> Option<EdgeCrossing> {
    let a = seg.node;
    let b = seg.far_node();
    let va = *set.node_values.get(&a)?;
    let vb = *set.node_values.get(&b)?;
    if (va > c) == (vb > c) {
        return None;
    }
    let t = (c - va) / (vb - va);
    const SNAP: f64 = 1e-12;
    let (key, t) = if t <= SNAP {
        (VertexKey::Corner(a), 0.0)
    } else if t >= 1.0 - SNAP {
        (VertexKey::Corner(b), 1.0)
    } else {
        (VertexKey::EdgeCross(seg), t)
    };
    let pa = set.frame.node_pos(a);
    let pb = set.frame.node_pos(b);
    Some(EdgeCrossing {
        key,
        t,
        pos: pa + (pb - pa) * t,
    })
}

/// Split a lattice edge at any interior node present in the table (at most
/// the midpoint under 2:1 balance).
fn subedges_of(set: &LeafSet, axis: usize, from: NodeId, len: i64) -> Vec<EdgeSeg> {
    if len > 1 {
        let mid = from.offset(axis, len / 2);
        if set.node_values.contains_key(&mid) {
            return vec![
                EdgeSeg {
                    axis: axis as u8,
                    node: from,
                    len: len / 2,
                },
                EdgeSeg {
                    axis: axis as u8,
                    node: mid,
                    len: len / 2,
                },
            ];
        }
    }
    vec![EdgeSeg {
        axis: axis as u8,
        node: from,
        len,
    }]
}

pub(crate) fn build_tables(set: &LeafSet, isovalue: f64) -> Tables {
    let frame = &set.frame;
    let leaf_keys: Vec<CellKey> = set.leaves.iter().map(|l| l.key).collect();

    // ---- fold phase --------------------------------------------------------
    let fold_data: Vec<CellFolds> = par_map(&leaf_keys, |key| {
        let cell = set.leaf_cell(key);
        let mut folds = Vec::new();
        for axis in 0..3 {
            folds.extend(fold::fold_segments(&cell, axis, isovalue));
        }
        let criticals = fold::critical_points(&cell, &folds, isovalue);
        fold::attach_criticals(&mut folds, &criticals);
        CellFolds {
            key: *key,
            folds,
            criticals,
        }
    });

    // ---- edge table --------------------------------------------------------
    let mut segs: Vec<EdgeSeg> = Vec::new();
    for key in &leaf_keys {
        let step = frame.step(key.depth);
        let min = frame.cell_min_node(key);
        for axis in 0..3 {
            let (b, g) = fold::other_axes(axis);
            for sb in 0..2i64 {
                for sg in 0..2i64 {
                    let mut n = [min.0, min.1, min.2];
                    n[b] += sb * step;
                    n[g] += sg * step;
                    segs.extend(subedges_of(set, axis, NodeId(n[0], n[1], n[2]), step));
                }
            }
        }
    }
    segs.sort_unstable();
    segs.dedup();
    let crossings = par_map(&segs, |s| subedge_crossing(set, *s, isovalue));
    let edge_table: BTreeMap<EdgeSeg, EdgeCrossing> = segs
        .iter()
        .zip(crossings)
        .filter_map(|(s, c)| c.map(|c| (*s, c)))
        .collect();

    // ---- face table --------------------------------------------------------
    let mut face_keys: Vec<FaceKey> = Vec::new();
    for key in &leaf_keys {
        for axis in 0..3 {
            for positive in [false, true] {
                let (fk, _) = canonical_face_of(set, key, axis, positive);
                face_keys.push(fk);
            }
        }
    }
    face_keys.sort_unstable();
    face_keys.dedup();

    let mut fold_points: BTreeMap<FaceKey, Vec<FacePoint>> = BTreeMap::new();
    for cf in &fold_data {
        for (fi, f) in cf.folds.iter().enumerate() {
            for (ei, end) in f.ends.iter().enumerate() {
                let positive = ei == 1;
                let (fk, quad) = canonical_face_of(set, &cf.key, f.axis, positive);
                let uv = to_canonical_uv([f.fixed[0], f.fixed[1]], quad);
                let pos = frame.local_to_world(&cf.key, end);
                fold_points.entry(fk).or_default().push(FacePoint {
                    key: VertexKey::FoldEnd {
                        cell: cf.key,
                        axis: f.axis as u8,
                        idx: fi as u8,
                        hi: positive,
                    },
                    uv,
                    pos,
                    boundary: false,
                });
            }
        }
    }

    let empty: Vec<FacePoint> = Vec::new();
    let records: Vec<face::FaceRecord> = par_map(&face_keys, |fk| {
        let corner_vals = face_corner_values(set, fk);
        let mut points: Vec<FacePoint> = Vec::new();
        let (ua, va) = face_axes(fk.axis as usize);
        // frame-edge crossings: (axis along, fixed other coordinate)
        for (along, fixed_axis, fixed_at) in [
            (ua, va, fk.v0),
            (ua, va, fk.v0 + fk.size),
            (va, ua, fk.u0),
            (va, ua, fk.u0 + fk.size),
        ] {
            let mut n = [0i64; 3];
            n[fk.axis as usize] = fk.plane;
            n[fixed_axis] = fixed_at;
            n[along] = if along == ua { fk.u0 } else { fk.v0 };
            for seg in subedges_of(set, along, NodeId(n[0], n[1], n[2]), fk.size) {
                if let Some(cr) = edge_table.get(&seg) {
                    let lat = seg.node.coord(along) as f64 + cr.t * seg.len as f64;
                    let w_along = -1.0
                        + 2.0
                            * (lat
                                - (if along == ua { fk.u0 } else { fk.v0 }) as f64)
                            / fk.size as f64;
                    let w_fixed = -1.0
                        + 2.0
                            * ((fixed_at
                                - (if fixed_axis == ua { fk.u0 } else { fk.v0 }))
                                as f64)
                            / fk.size as f64;
                    let uv = if along == ua {
                        [w_along, w_fixed]
                    } else {
                        [w_fixed, w_along]
                    };
                    points.push(FacePoint {
                        key: cr.key,
                        uv,
                        pos: cr.pos,
                        boundary: true,
                    });
                }
            }
        }
        // seam crossings when the fine side subdivides this face
        if fk.size > 1 {
            let half = fk.size / 2;
            for (axis, u_lat, v_lat) in [
                (va, fk.u0 + half, fk.v0),
                (va, fk.u0 + half, fk.v0 + half),
                (ua, fk.u0, fk.v0 + half),
                (ua, fk.u0 + half, fk.v0 + half),
            ] {
                let mut n = [0i64; 3];
                n[fk.axis as usize] = fk.plane;
                n[ua] = u_lat;
                n[va] = v_lat;
                let seg = EdgeSeg {
                    axis: axis as u8,
                    node: NodeId(n[0], n[1], n[2]),
                    len: half,
                };
                if let Some(cr) = edge_table.get(&seg) {
                    let lat = seg.node.coord(axis) as f64 + cr.t * seg.len as f64;
                    let u = if axis == ua {
                        -1.0 + 2.0 * (lat - fk.u0 as f64) / fk.size as f64
                    } else {
                        -1.0 + 2.0 * ((u_lat - fk.u0) as f64) / fk.size as f64
                    };
                    let v = if axis == va {
                        -1.0 + 2.0 * (lat - fk.v0 as f64) / fk.size as f64
                    } else {
                        -1.0 + 2.0 * ((v_lat - fk.v0) as f64) / fk.size as f64
                    };
                    points.push(FacePoint {
                        key: cr.key,
                        uv: [u, v],
                        pos: cr.pos,
                        boundary: false,
                    });
                }
            }
        }
        points.extend(fold_points.get(fk).unwrap_or(&empty).iter().cloned());
        face::trace_face(*fk, corner_vals, points, isovalue, 0.05, &|uv| {
            face_uv_to_world(set, fk, uv)
        })
    });

    Tables {
        fold_data,
        face_keys,
        records,
    }
}

/// Assemble the contouring input of one cell from the canonical tables.
/// `leaf_idx` is the cell's position in the leaf order (fold data parallels
/// it).
pub(crate) fn build_cell_input_with(
    set: &LeafSet,
    tables: &Tables,
    isovalue: f64,
    key: &CellKey,
    leaf_idx: usize,
) -> cell::CellInput {
    let folds = &tables.fold_data[leaf_idx];
    debug_assert_eq!(folds.key, *key);
    let mut input = cell::CellInput {
        key: *key,
        cell: set.leaf_cell(key),
        isovalue,
        curve_edges: Vec::new(),
        folds: Vec::new(),
        criticals: folds.criticals.clone(),
    };
    for axis in 0..3 {
        for positive in [false, true] {
            let (fk, quad) = canonical_face_of(set, key, axis, positive);
            let record = tables.record(&fk);
            cell::collect_face_edges(record, quad, axis, positive, &mut input.curve_edges);
        }
    }
    for (fi, f) in folds.folds.iter().enumerate() {
        let mut ends = [VertexKey::Crit {
            cell: *key,
            idx: 0,
        }; 2];
        for ei in 0..2 {
            let positive = ei == 1;
            let (fk, _) = canonical_face_of(set, key, f.axis, positive);
            let record = tables.record(&fk);
            let orig = VertexKey::FoldEnd {
                cell: *key,
                axis: f.axis as u8,
                idx: fi as u8,
                hi: positive,
            };
            ends[ei] = record.resolve(orig);
        }
        input.folds.push(cell::FoldChord {
            axis: f.axis,
            ends,
            end_pos: f.ends,
            criticals: f.criticals.clone(),
        });
    }
    input
}

/// Standalone-path input builder (rebuilds the tables; used for single-cell
/// operations).
pub(crate) fn build_cell_input(set: &LeafSet, isovalue: f64, key: &CellKey) -> cell::CellInput {
    let tables = build_tables(set, isovalue);
    let idx = set
        .leaves
        .iter()
        .position(|l| l.key == *key)
        .expect("key is a leaf");
    build_cell_input_with(set, &tables, isovalue, key, idx)
}

/// Contour every leaf of the set at `isovalue`.
pub fn contour_leafset(set: &LeafSet, isovalue: f64) -> ContourOutput {
    let leaf_keys: Vec<CellKey> = set.leaves.iter().map(|l| l.key).collect();
    let tables = build_tables(set, isovalue);

    let indexed: Vec<(usize, CellKey)> = leaf_keys.iter().copied().enumerate().collect();
    let cell_results: Vec<Result<cell::CellResult, CellError>> = par_map(&indexed, |(i, key)| {
        let input = build_cell_input_with(set, &tables, isovalue, key, *i);
        cell::contour_cell(&input, &set.frame)
    });

    let mut out = ContourOutput {
        stats: ContourStats {
            cells: leaf_keys.len(),
            ..Default::default()
        },
        ..Default::default()
    };
    for r in &tables.records {
        for ch in &r.chains {
            for p in ch {
                out.positions.insert(p.key, p.pos);
            }
        }
    }
    for (key, res) in leaf_keys.iter().zip(cell_results) {
        match res {
            Ok(cr) => {
                if !cr.triangles.is_empty() {
                    out.stats.cells_with_surface += 1;
                }
                out.stats.patches += cr.patches;
                out.stats.holed_patches += cr.holed_patches;
                out.stats.degenerate_dropped += cr.degenerate_dropped;
                for (k, p) in cr.extra_positions {
                    out.positions.insert(k, p);
                }
                let start = out.triangles.len();
                out.triangles.extend(cr.triangles);
                if out.triangles.len() > start {
                    out.triangle_cells.push((*key, start..out.triangles.len()));
                }
            }
            Err(e) => out.errors.push(e),
        }
    }
    for cf in &tables.fold_data {
        out.stats.fold_segments += cf.folds.len();
        out.stats.critical_points += cf.criticals.len();
    }
    out
}

// ---------------------------------------------------------------------------
// Standalone single-cell API
// ---------------------------------------------------------------------------

/// A single-valued surface patch: boundary cycle, monotone axis, orientation.
#[derive(Clone, Debug)]
pub struct Patch {
    pub cycle: Vec<Vec3>,
    pub axis: usize,
    /// Sign of dg/daxis over the patch interior.
    pub orient: f64,
}

/// Full standalone contouring result for one cell in its local frame.
#[derive(Clone, Debug)]
pub struct CellContour {
    pub loops: Vec<Vec<Vec3>>,
    pub folds: Vec<FoldSegment>,
    pub criticals: Vec<Vec3>,
    pub patches: Vec<Patch>,
    /// Triangles as local-coordinate vertex triples, outward oriented.
    pub triangles: Vec<[Vec3; 3]>,
}

/// Contour one trilinear cell in isolation (no neighbors).
pub fn contour_cell_standalone(
    cell: &TrilinearCell,
    isovalue: f64,
) -> Result<CellContour, CellError> {
    let mini = LeafSet::single_cell(cell);
    let out = contour_leafset(&mini, isovalue);
    if let Some(e) = out.errors.first() {
        return Err(e.clone());
    }
    let key = CellKey {
        depth: 0,
        i: 0,
        j: 0,
        k: 0,
    };
    let tri_cell = mini.leaf_cell(&key);
    let mut folds = Vec::new();
    for axis in 0..3 {
        folds.extend(fold::fold_segments(&tri_cell, axis, isovalue));
    }
    let criticals = fold::critical_points(&tri_cell, &folds, isovalue);
    fold::attach_criticals(&mut folds, &criticals);

    let to_local = |w: &Vec3| mini.frame.world_to_local(&key, w);
    let triangles = out
        .triangles
        .iter()
        .map(|t| {
            [
                to_local(&out.positions[&t[0]]),
                to_local(&out.positions[&t[1]]),
                to_local(&out.positions[&t[2]]),
            ]
        })
        .collect();

    let (loops, patches) = cell::loops_and_patches(&mini, &key, isovalue)?;
    Ok(CellContour {
        loops,
        folds,
        criticals,
        patches,
        triangles,
    })
}

/// Intersections of the cell surface with the 12 cube edges (cell-local).
/// g restricted to an edge is affine, so each edge holds at most one point;
/// values equal to the isovalue count as outside (symbolic perturbation).
pub fn edge_intersections(cell: &TrilinearCell, isovalue: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    for axis in 0..3 {
        let (b, g) = fold::other_axes(axis);
        for sb in [-1.0, 1.0] {
            for sg in [-1.0, 1.0] {
                let mut p0 = [0.0; 3];
                p0[axis] = -1.0;
                p0[b] = sb;
                p0[g] = sg;
                let mut p1 = p0;
                p1[axis] = 1.0;
                let v0 = cell.eval(&Vec3(p0));
                let v1 = cell.eval(&Vec3(p1));
                if (v0 > isovalue) == (v1 > isovalue) {
                    continue;
                }
                let t = (isovalue - v0) / (v1 - v0);
                let mut p = p0;
                p[axis] = -1.0 + 2.0 * t;
                out.push(Vec3(p));
            }
        }
    }
    out
}

/// Closed face-curve loops of one isolated cell (cell-local vertex cycles).
pub fn trace_face_loops(
    cell: &TrilinearCell,
    isovalue: f64,
) -> Result<Vec<Vec<Vec3>>, CellError> {
    let mini = LeafSet::single_cell(cell);
    let key = CellKey {
        depth: 0,
        i: 0,
        j: 0,
        k: 0,
    };
    Ok(cell::loops_and_patches(&mini, &key, isovalue)?.0)
}

/// Single-valued patches of one isolated cell.
pub fn split_patches(cell: &TrilinearCell, isovalue: f64) -> Result<Vec<Patch>, CellError> {
    let mini = LeafSet::single_cell(cell);
    let key = CellKey {
        depth: 0,
        i: 0,
        j: 0,
        k: 0,
    };
    Ok(cell::loops_and_patches(&mini, &key, isovalue)?.1)
}

/// Triangulate one patch by ear clipping in its monotone-axis projection.
pub fn triangulate_patch(patch: &Patch) -> Vec<[Vec3; 3]> {
    let (b, g) = fold::other_axes(patch.axis);
    let pts2: Vec<[f64; 2]> = patch.cycle.iter().map(|p| [p[b], p[g]]).collect();
    let tris = earclip::triangulate(&pts2);
    tris.iter()
        .map(|t| [patch.cycle[t[0]], patch.cycle[t[1]], patch.cycle[t[2]]])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;
    use crate::synth::SplitMix;

    fn unit_bounds() -> Aabb {
        Aabb {
            min: Vec3::new(-1.0, -1.0, -1.0),
            max: Vec3::new(1.0, 1.0, 1.0),
        }
    }

    fn cell_from_fn(f: impl Fn(f64, f64, f64) -> f64) -> TrilinearCell {
        let mut corners = [0.0; 8];
        for (bits, c) in corners.iter_mut().enumerate() {
            let x = if bits & 1 == 1 { 1.0 } else { -1.0 };
            let y = if bits & 2 == 2 { 1.0 } else { -1.0 };
            let z = if bits & 4 == 4 { 1.0 } else { -1.0 };
            *c = f(x, y, z);
        }
        TrilinearCell::from_corners(corners, unit_bounds())
    }

    #[test]
    fn edge_intersections_plane() {
        // g = x, c = 0: midpoints of the 4 x-parallel edges
        let cell = cell_from_fn(|x, _, _| x);
        let pts = edge_intersections(&cell, 0.0);
        assert_eq!(pts.len(), 4);
        for p in &pts {
            assert!(p[0].abs() < 1e-14);
            assert!(p[1].abs() == 1.0 && p[2].abs() == 1.0);
        }
    }

    #[test]
    fn edge_intersections_saddle_edge() {
        // g = z - xy, c = 1, edge {y=1, z=1}: g = 1 - x on it -> point (0,1,1)
        let cell = cell_from_fn(|x, y, z| z - x * y);
        let pts = edge_intersections(&cell, 1.0);
        assert!(pts
            .iter()
            .any(|p| (*p - Vec3::new(0.0, 1.0, 1.0)).norm() < 1e-12));
    }

    #[test]
    fn edge_intersection_count_matches_sign_changes() {
        let mut rng = SplitMix::new(77);
        for _ in 0..200 {
            let mut corners = [0.0; 8];
            for c in &mut corners {
                *c = rng.uniform(-2.0, 2.0);
            }
            let cell = TrilinearCell::from_corners(corners, unit_bounds());
            let c = 0.1;
            let pts = edge_intersections(&cell, c);
            // oracle: count corner-sign changes along the 12 edges
            let mut count = 0;
            for axis in 0..3usize {
                for b0 in 0..2usize {
                    for b1 in 0..2usize {
                        let (lo_bits, hi_bits) = match axis {
                            0 => ((b0 << 1) | (b1 << 2), 1 | (b0 << 1) | (b1 << 2)),
                            1 => (b0 | (b1 << 2), 2 | b0 | (b1 << 2)),
                            _ => (b0 | (b1 << 1), 4 | b0 | (b1 << 1)),
                        };
                        if (corners[lo_bits] > c) != (corners[hi_bits] > c) {
                            count += 1;
                        }
                    }
                }
            }
            assert_eq!(pts.len(), count);
            for p in &pts {
                assert!((cell.eval(p) - c).abs() <= 1e-12 * 10.0);
            }
        }
    }

    #[test]
    fn plane_cell_single_loop_and_two_triangles() {
        let cell = cell_from_fn(|x, _, _| x);
        let loops = trace_face_loops(&cell, 0.0).unwrap();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].len(), 4);
        for p in &loops[0] {
            assert!(p[0].abs() < 1e-12);
        }
        let contour = contour_cell_standalone(&cell, 0.0).unwrap();
        assert_eq!(contour.patches.len(), 1);
        assert_eq!(contour.triangles.len(), 2);
        // outward orientation: normals along -grad g = (-1, 0, 0)
        for t in &contour.triangles {
            let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
            assert!(n[0] < 0.0, "normal {n:?} should point along -x");
        }
    }

    #[test]
    fn saddle_cell_four_patches() {
        let cell = cell_from_fn(|x, y, z| z - x * y);
        let contour = contour_cell_standalone(&cell, 0.0).unwrap();
        assert_eq!(contour.criticals.len(), 1);
        assert!(contour.criticals[0].norm() < 1e-10);
        assert_eq!(contour.folds.len(), 2);
        assert_eq!(contour.patches.len(), 4, "saddle splits into quadrants");
        assert_eq!(contour.triangles.len(), 8);
        // every vertex satisfies g = c
        for t in &contour.triangles {
            for v in t {
                assert!((cell.eval(v) - 0.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn random_cells_loops_close_and_patches_sign_constant() {
        let mut rng = SplitMix::new(3);
        let mut patch_total = 0;
        for _ in 0..300 {
            let mut corners = [0.0; 8];
            for c in &mut corners {
                *c = rng.uniform(-2.0, 2.0);
            }
            let cell = TrilinearCell::from_corners(corners, unit_bounds());
            let c = 0.1;
            let contour = match contour_cell_standalone(&cell, c) {
                Ok(ct) => ct,
                Err(e) => panic!("contour failed: {e}"),
            };
            patch_total += contour.patches.len();
            for patch in &contour.patches {
                assert!(patch.cycle.len() >= 3);
                // single-valuedness: dg/daxis has one sign over the cycle
                for p in &patch.cycle {
                    let b = cell.grad(p)[patch.axis];
                    assert!(
                        b * patch.orient > -1e-8,
                        "axis {} sign flip: {b} vs {}",
                        patch.axis,
                        patch.orient
                    );
                }
            }
            // all vertices on the surface
            for t in &contour.triangles {
                for v in t {
                    assert!((cell.eval(v) - c).abs() < 1e-9);
                }
            }
        }
        assert!(patch_total > 50);
    }

    #[test]
    fn triangulate_patch_covers_projection() {
        let cell = cell_from_fn(|x, y, z| z - x * y);
        let patches = split_patches(&cell, 0.0).unwrap();
        for patch in &patches {
            let tris = triangulate_patch(patch);
            assert_eq!(tris.len(), patch.cycle.len() - 2);
            let (b, g) = fold::other_axes(patch.axis);
            let poly: Vec<[f64; 2]> = patch.cycle.iter().map(|p| [p[b], p[g]]).collect();
            let poly_area = earclip::signed_area(&poly).abs();
            let tri_area: f64 = tris
                .iter()
                .map(|t| {
                    let u = [t[1][b] - t[0][b], t[1][g] - t[0][g]];
                    let v = [t[2][b] - t[0][b], t[2][g] - t[0][g]];
                    0.5 * (u[0] * v[1] - u[1] * v[0]).abs()
                })
                .sum();
            assert!((tri_area - poly_area).abs() < 1e-9);
        }
    }
}

/// Temporary debug hook: curve edges of one cell with surface-side flags.
pub fn debug_cell_edges(
    set: &LeafSet,
    isovalue: f64,
    key: &CellKey,
) -> Vec<(VertexKey, VertexKey, bool)> {
    let input = build_cell_input(set, isovalue, key);
    input
        .curve_edges
        .iter()
        .map(|e| (e.a.key, e.b.key, e.real_forward))
        .collect()
}
