//! Per-cell surface arrangement: stitch the six faces' curve chains and the
//! interior fold chords into a graph on the trilinear surface, walk its faces
//! with a rotation system, and ear-clip every patch in the projection along
//! its monotone axis.
//!
//! Every curve edge lies on a cube face, which gives a local orientation
//! test: the dart whose left side (gradient cross direction) points into the
//! cube bounds the real surface patch, the other dart bounds the outside.
//! Orbits made of real darts are patch boundaries; positively oriented ones
//! are outer cycles and negative ones are holes of their enclosing patch.

use super::earclip;
use super::face::FaceRecord;
use super::fold::other_axes;
use super::{CellError, Patch, VertexKey};
use crate::geom::Vec3;
use crate::lattice::{CellKey, GridFrame};
use crate::polyfit::TrilinearCell;
use std::collections::BTreeMap;

/// One endpoint of a curve edge handed to a cell.
#[derive(Clone, Debug)]
pub struct VertexRef {
    pub key: VertexKey,
    pub world: Vec3,
}

/// Curve edge on one of the cell's faces, with the surface-side dart
/// precomputed from the shared face bilinear (bit-identical for both cells).
#[derive(Clone, Debug)]
pub struct CurveEdge {
    pub a: VertexRef,
    pub b: VertexRef,
    /// The dart a->b bounds the surface patch of this cell.
    pub real_forward: bool,
}

/// Fold chord of a cell with face-resolved endpoint keys.
#[derive(Clone, Debug)]
pub struct FoldChord {
    pub axis: usize,
    pub ends: [VertexKey; 2],
    /// Local endpoint positions at axis = -1 / +1.
    pub end_pos: [Vec3; 2],
    /// Interior critical points, ordered along the axis.
    pub criticals: Vec<Vec3>,
}

#[derive(Clone, Debug)]
pub struct CellInput {
    pub key: CellKey,
    pub cell: TrilinearCell,
    pub isovalue: f64,
    pub curve_edges: Vec<CurveEdge>,
    pub folds: Vec<FoldChord>,
    /// All critical points of the cell (local), sorted.
    pub criticals: Vec<Vec3>,
}

#[derive(Clone, Debug, Default)]
pub struct CellResult {
    pub triangles: Vec<[VertexKey; 3]>,
    /// World positions for vertices this cell created (criticals, Steiner).
    pub extra_positions: Vec<(VertexKey, Vec3)>,
    pub patches: usize,
    pub holed_patches: usize,
    pub degenerate_dropped: usize,
}

/// Append the face record's curve edges that belong to this cell. `quad` is
/// the cell's quadrant within the canonical face (None = whole face).
///
/// The surface-side dart of each edge is the one with the h > c side of the
/// face on its left when the face is viewed from outside the cell; both
/// cells around a face see exactly opposite darts because the test is built
/// from the shared bilinear.
pub fn collect_face_edges(
    record: &FaceRecord,
    quad: Option<(usize, usize)>,
    face_axis: usize,
    face_positive: bool,
    out: &mut Vec<CurveEdge>,
) {
    // (e_u, e_v, e_axis) handedness per axis: (y,z,x) RH, (x,z,y) LH, (x,y,z) RH
    let handed = if face_axis == 1 { -1.0 } else { 1.0 };
    let viewer = if face_positive { 1.0 } else { -1.0 };
    let orient = handed * viewer;
    let [_, q, r, s] = record.coeffs;
    for chain in &record.chains {
        for pair in chain.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.key == b.key {
                continue;
            }
            let mu = 0.5 * (a.uv[0] + b.uv[0]);
            let mv = 0.5 * (a.uv[1] + b.uv[1]);
            if let Some((qu, qv)) = quad {
                let au = if mu <= 0.0 { 0 } else { 1 };
                let av = if mv <= 0.0 { 0 } else { 1 };
                if (au, av) != (qu, qv) {
                    continue;
                }
            }
            let t = [b.uv[0] - a.uv[0], b.uv[1] - a.uv[1]];
            // left of the dart in face coordinates, viewed from outside
            let left = if orient > 0.0 {
                [-t[1], t[0]]
            } else {
                [t[1], -t[0]]
            };
            let grad_h = [q + s * mv, r + s * mu];
            let side = grad_h[0] * left[0] + grad_h[1] * left[1];
            out.push(CurveEdge {
                a: VertexRef {
                    key: a.key,
                    world: a.pos,
                },
                b: VertexRef {
                    key: b.key,
                    world: b.pos,
                },
                real_forward: side > 0.0,
            });
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum EdgeKind {
    /// Curve edge; `real_forward` marks which dart bounds the surface.
    Curve { real_forward: bool },
    Fold { axis: u8 },
}

struct Graph {
    keys: Vec<VertexKey>,
    local: Vec<Vec3>,
    edges: Vec<(u32, u32, EdgeKind)>,
}

pub(crate) struct Arrangement {
    pub(crate) graph_keys: Vec<VertexKey>,
    pub(crate) graph_local: Vec<Vec3>,
    loops: Vec<Vec<u32>>,
    patches: Vec<PatchCand>,
    crit_world: Vec<(VertexKey, Vec3)>,
}

struct PatchCand {
    outer: Vec<u32>,
    holes: Vec<Vec<u32>>,
    axis: usize,
    sign: f64,
    /// No monotone axis found; triangulated by a Steiner fan.
    fallback: bool,
}

fn build_graph(
    input: &CellInput,
    frame: &GridFrame,
) -> Result<(Graph, Vec<(VertexKey, Vec3)>), CellError> {
    let mut byk: BTreeMap<VertexKey, u32> = BTreeMap::new();
    let mut keys = Vec::new();
    let mut local = Vec::new();
    fn intern(
        key: VertexKey,
        loc: Vec3,
        byk: &mut BTreeMap<VertexKey, u32>,
        keys: &mut Vec<VertexKey>,
        local: &mut Vec<Vec3>,
    ) -> u32 {
        *byk.entry(key).or_insert_with(|| {
            keys.push(key);
            local.push(loc);
            (keys.len() - 1) as u32
        })
    }

    let mut edges: Vec<(u32, u32, EdgeKind)> = Vec::new();
    for ce in &input.curve_edges {
        if ce.a.key == ce.b.key {
            continue;
        }
        let pa = frame.world_to_local(&input.key, &ce.a.world);
        let pb = frame.world_to_local(&input.key, &ce.b.world);
        let ia = intern(ce.a.key, pa, &mut byk, &mut keys, &mut local);
        let ib = intern(ce.b.key, pb, &mut byk, &mut keys, &mut local);
        let (lo, hi) = (ia.min(ib), ia.max(ib));
        let real_forward = if lo == ia {
            ce.real_forward
        } else {
            !ce.real_forward
        };
        edges.push((lo, hi, EdgeKind::Curve { real_forward }));
    }
    edges.sort_unstable_by_key(|e| (e.0, e.1));
    edges.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));

    // curve parity: every vertex must have even curve degree
    let mut deg = vec![0usize; keys.len()];
    for (a, b, _) in &edges {
        deg[*a as usize] += 1;
        deg[*b as usize] += 1;
    }
    if deg.iter().any(|d| d % 2 == 1) {
        return Err(CellError::OpenChain(input.key));
    }

    // critical-point vertices
    let mut crit_world = Vec::new();
    let mut crit_ids: Vec<u32> = Vec::new();
    for (ci, c) in input.criticals.iter().enumerate() {
        let key = VertexKey::Crit {
            cell: input.key,
            idx: ci as u8,
        };
        let id = intern(key, *c, &mut byk, &mut keys, &mut local);
        crit_ids.push(id);
        crit_world.push((key, frame.local_to_world(&input.key, c)));
    }

    // fold chords, subdivided at their criticals; folds whose endpoints did
    // not land on any face chain are dropped
    for f in &input.folds {
        if !byk.contains_key(&f.ends[0]) || !byk.contains_key(&f.ends[1]) {
            continue;
        }
        let mut path: Vec<u32> = Vec::with_capacity(f.criticals.len() + 2);
        path.push(byk[&f.ends[0]]);
        for c in &f.criticals {
            if c[f.axis].abs() > 1.0 - 1e-9 {
                continue;
            }
            if let Some(ci) = input
                .criticals
                .iter()
                .position(|p| (*p - *c).norm() < 1e-9)
            {
                path.push(crit_ids[ci]);
            }
        }
        path.push(byk[&f.ends[1]]);
        path.dedup();
        for pair in path.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b {
                continue;
            }
            edges.push((
                a.min(b),
                a.max(b),
                EdgeKind::Fold {
                    axis: f.axis as u8,
                },
            ));
        }
    }
    edges.sort_unstable_by_key(|e| (e.0, e.1));
    edges.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));

    Ok((Graph { keys, local, edges }, crit_world))
}

/// Gradient-based vertex normal with a deterministic fallback.
fn vertex_normal(cell: &TrilinearCell, p: &Vec3) -> Vec3 {
    let g = cell.grad(p);
    let n = g.norm();
    if n > 1e-12 {
        g / n
    } else {
        Vec3::new(
            0.57735026918962576,
            0.57735026918962576,
            0.57735026918962576,
        )
    }
}

/// Rotation system: darts leaving each vertex sorted counterclockwise around
/// the surface normal. Returns (rotation lists, dart position lookup).
fn rotation_system(
    graph_local: &[Vec3],
    edges: &[(u32, u32, EdgeKind)],
    cell: &TrilinearCell,
) -> (Vec<Vec<usize>>, Vec<usize>) {
    let nv = graph_local.len();
    let ne = edges.len();
    let tail = |d: usize| -> u32 {
        let (a, b, _) = edges[d / 2];
        if d % 2 == 0 {
            a
        } else {
            b
        }
    };
    let head = |d: usize| -> u32 {
        let (a, b, _) = edges[d / 2];
        if d % 2 == 0 {
            b
        } else {
            a
        }
    };
    let mut rot: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for d in 0..2 * ne {
        rot[tail(d) as usize].push(d);
    }
    for (vi, darts) in rot.iter_mut().enumerate() {
        let p = graph_local[vi];
        let n = vertex_normal(cell, &p);
        let mut k = 0;
        for a in 1..3 {
            if n[a].abs() < n[k].abs() {
                k = a;
            }
        }
        let mut e1 = Vec3::ZERO;
        e1.0[k] = 1.0;
        let e1 = (e1 - n * n[k]).normalized();
        let e2 = n.cross(&e1);
        let mut keyed: Vec<(f64, u64, usize)> = darts
            .iter()
            .map(|&d| {
                let q = graph_local[head(d) as usize] - p;
                let ang = q.dot(&e2).atan2(q.dot(&e1));
                (ang, head(d) as u64 * 2 + (d % 2) as u64, d)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        *darts = keyed.into_iter().map(|(_, _, d)| d).collect();
    }
    let mut pos_in_rot = vec![0usize; 2 * ne];
    for darts in &rot {
        for (i, &d) in darts.iter().enumerate() {
            pos_in_rot[d] = i;
        }
    }
    (rot, pos_in_rot)
}

struct Orbit {
    cycle: Vec<u32>,
    darts: Vec<usize>,
    newell_dot: f64,
    /// All curve darts bound the surface side.
    real: bool,
    all_fold: bool,
}

/// Walk all face orbits of the given edge set.
fn walk_orbits(
    graph_local: &[Vec3],
    edges: &[(u32, u32, EdgeKind)],
    cell: &TrilinearCell,
    key: &CellKey,
) -> Result<Vec<Orbit>, CellError> {
    let ne = edges.len();
    if ne == 0 {
        return Ok(Vec::new());
    }
    let (rot, pos_in_rot) = rotation_system(graph_local, edges, cell);
    let tail = |d: usize| -> u32 {
        let (a, b, _) = edges[d / 2];
        if d % 2 == 0 {
            a
        } else {
            b
        }
    };
    let next_dart = |d: usize| -> usize {
        let rev = d ^ 1;
        let v = tail(rev) as usize;
        let darts = &rot[v];
        let i = pos_in_rot[rev];
        darts[(i + darts.len() - 1) % darts.len()]
    };
    let mut visited = vec![false; 2 * ne];
    let mut orbits = Vec::new();
    for d0 in 0..2 * ne {
        if visited[d0] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut darts = Vec::new();
        let mut d = d0;
        let mut guard = 0;
        loop {
            visited[d] = true;
            cycle.push(tail(d));
            darts.push(d);
            d = next_dart(d);
            guard += 1;
            if d == d0 {
                break;
            }
            if guard > 2 * ne + 1 {
                return Err(CellError::BadArrangement(*key));
            }
        }
        let mut newell = Vec3::ZERO;
        let mut grad_sum = Vec3::ZERO;
        for i in 0..cycle.len() {
            let p = graph_local[cycle[i] as usize];
            let q = graph_local[cycle[(i + 1) % cycle.len()] as usize];
            newell = newell + p.cross(&q);
            grad_sum = grad_sum + cell.grad(&p);
        }
        let mut real_votes = 0usize;
        let mut bogus_votes = 0usize;
        let mut curve_darts = 0usize;
        for &d in &darts {
            if let EdgeKind::Curve { real_forward } = edges[d / 2].2 {
                curve_darts += 1;
                let forward = d % 2 == 0;
                if forward == real_forward {
                    real_votes += 1;
                } else {
                    bogus_votes += 1;
                }
            }
        }
        let real = if curve_darts == 0 {
            true
        } else if real_votes != bogus_votes {
            real_votes > bogus_votes
        } else {
            newell.dot(&grad_sum) > 0.0
        };
        orbits.push(Orbit {
            cycle,
            darts,
            newell_dot: newell.dot(&grad_sum),
            real,
            all_fold: curve_darts == 0,
        });
    }
    Ok(orbits)
}

pub(crate) fn build_arrangement(
    input: &CellInput,
    frame: &GridFrame,
) -> Result<Arrangement, CellError> {
    let (graph, crit_world) = build_graph(input, frame)?;
    if graph.edges.is_empty() {
        return Ok(Arrangement {
            graph_keys: graph.keys,
            graph_local: graph.local,
            loops: Vec::new(),
            patches: Vec::new(),
            crit_world,
        });
    }

    // loops: real orbits of the curve-only subgraph
    let curve_edges: Vec<(u32, u32, EdgeKind)> = graph
        .edges
        .iter()
        .filter(|e| matches!(e.2, EdgeKind::Curve { .. }))
        .copied()
        .collect();
    let loop_orbits = walk_orbits(&graph.local, &curve_edges, &input.cell, &input.key)?;
    let loops: Vec<Vec<u32>> = loop_orbits
        .into_iter()
        .filter(|o| o.real && !o.cycle.is_empty())
        .map(|o| o.cycle)
        .collect();

    // full arrangement
    let orbits = walk_orbits(&graph.local, &graph.edges, &input.cell, &input.key)?;
    let outer_idx: Vec<usize> = (0..orbits.len())
        .filter(|&i| orbits[i].real && (orbits[i].newell_dot > 0.0 || orbits[i].all_fold))
        .collect();
    let hole_idx: Vec<usize> = (0..orbits.len())
        .filter(|&i| {
            orbits[i].real && orbits[i].newell_dot <= 0.0 && !orbits[i].all_fold
        })
        .collect();

    let project = |cycle: &[u32], axis: usize| -> Vec<[f64; 2]> {
        let (b, g) = other_axes(axis);
        cycle
            .iter()
            .map(|&v| {
                let p = graph.local[v as usize];
                [p[b], p[g]]
            })
            .collect()
    };
    let point_in_poly = |poly: &[[f64; 2]], pt: [f64; 2]| -> bool {
        let mut inside = false;
        let n = poly.len();
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            if (a[1] > pt[1]) != (b[1] > pt[1]) {
                let x = a[0] + (pt[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if x > pt[0] {
                    inside = !inside;
                }
            }
        }
        inside
    };

    // attach hole cycles to the smallest containing outer cycle
    let mut hole_of: Vec<Option<usize>> = vec![None; orbits.len()];
    for &m in &hole_idx {
        let mut best: Option<(f64, usize)> = None;
        for &p in &outer_idx {
            let newell = {
                let mut n = Vec3::ZERO;
                for i in 0..orbits[p].cycle.len() {
                    let a = graph.local[orbits[p].cycle[i] as usize];
                    let b =
                        graph.local[orbits[p].cycle[(i + 1) % orbits[p].cycle.len()] as usize];
                    n = n + a.cross(&b);
                }
                n
            };
            let mut axis = 0;
            for a in 1..3 {
                if newell[a].abs() > newell[axis].abs() {
                    axis = a;
                }
            }
            let poly = project(&orbits[p].cycle, axis);
            let (b, g) = other_axes(axis);
            let q = graph.local[orbits[m].cycle[0] as usize];
            if point_in_poly(&poly, [q[b], q[g]]) {
                let area = earclip::signed_area(&poly).abs();
                if best.map_or(true, |(a, _)| area < a) {
                    best = Some((area, p));
                }
            }
        }
        if let Some((_, p)) = best {
            hole_of[m] = Some(p);
        }
    }

    let scale: f64 = input.cell.coeffs.iter().map(|v| v.abs()).sum::<f64>() + 1e-300;
    let mut patches = Vec::new();
    for &p in &outer_idx {
        let holes: Vec<Vec<u32>> = (0..orbits.len())
            .filter(|&m| hole_of[m] == Some(p))
            .map(|m| orbits[m].cycle.clone())
            .collect();
        let mut boundary_darts: Vec<usize> = orbits[p].darts.clone();
        for m in (0..orbits.len()).filter(|&m| hole_of[m] == Some(p)) {
            boundary_darts.extend(&orbits[m].darts);
        }
        // monotone axis: no boundary fold edge parallel to it, consistent
        // gradient-component sign over all boundary vertices
        let mut best: Option<(f64, usize, f64)> = None;
        for axis in 0..3usize {
            if boundary_darts.iter().any(|&d| {
                matches!(graph.edges[d / 2].2, EdgeKind::Fold { axis: fa } if fa == axis as u8)
            }) {
                continue;
            }
            let mut sign = 0.0f64;
            let mut min_abs = f64::INFINITY;
            let mut ok = true;
            for &d in &boundary_darts {
                let (a, b, _) = graph.edges[d / 2];
                let v = if d % 2 == 0 { a } else { b };
                let bv = input.cell.grad(&graph.local[v as usize])[axis];
                if bv.abs() <= 1e-9 * scale {
                    continue;
                }
                if sign == 0.0 {
                    sign = bv.signum();
                } else if sign != bv.signum() {
                    ok = false;
                    break;
                }
                min_abs = min_abs.min(bv.abs());
            }
            if ok && sign != 0.0 && min_abs.is_finite() && best.map_or(true, |(s, _, _)| min_abs > s)
            {
                best = Some((min_abs, axis, sign));
            }
        }
        match best {
            Some((_, axis, sign)) => patches.push(PatchCand {
                outer: orbits[p].cycle.clone(),
                holes,
                axis,
                sign,
                fallback: false,
            }),
            None => {
                if !holes.is_empty() {
                    return Err(CellError::NoMonotoneAxis(input.key));
                }
                let mut gsum = Vec3::ZERO;
                for &v in &orbits[p].cycle {
                    gsum = gsum + input.cell.grad(&graph.local[v as usize]);
                }
                let mut axis = 0;
                for a in 1..3 {
                    if gsum[a].abs() > gsum[axis].abs() {
                        axis = a;
                    }
                }
                patches.push(PatchCand {
                    outer: orbits[p].cycle.clone(),
                    holes: Vec::new(),
                    axis,
                    sign: if gsum[axis] >= 0.0 { 1.0 } else { -1.0 },
                    fallback: true,
                });
            }
        }
    }

    Ok(Arrangement {
        graph_keys: graph.keys,
        graph_local: graph.local,
        loops,
        patches,
        crit_world,
    })
}

/// Merge hole cycles into the outer cycle with bridge edges (duplicated in
/// both directions), producing one weakly simple polygon. Bridges respect
/// the forbidden-diagonal rule.
fn merge_holes(
    outer: &[u32],
    holes: &[Vec<u32>],
    pts: &dyn Fn(u32) -> [f64; 2],
    diagonal_forbidden: &dyn Fn(u32, u32) -> bool,
) -> Vec<u32> {
    let mut merged: Vec<u32> = outer.to_vec();
    let proper_cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]| -> bool {
        let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
            (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        };
        let d1 = orient(a, b, c);
        let d2 = orient(a, b, d);
        let d3 = orient(c, d, a);
        let d4 = orient(c, d, b);
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    };
    for hole in holes {
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (hi, &h) in hole.iter().enumerate() {
            for (oi, &o) in merged.iter().enumerate() {
                let ph = pts(h);
                let po = pts(o);
                let d2 = (ph[0] - po[0]).powi(2) + (ph[1] - po[1]).powi(2);
                cands.push((d2, hi, oi));
            }
        }
        cands.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        for (_, hi, oi) in cands {
            if diagonal_forbidden(hole[hi], merged[oi]) {
                continue;
            }
            let ph = pts(hole[hi]);
            let po = pts(merged[oi]);
            let mut blocked = false;
            let all_cycles: Vec<&[u32]> = std::iter::once(&merged[..])
                .chain(holes.iter().map(|h| &h[..]))
                .collect();
            'scan: for cyc in all_cycles {
                for i in 0..cyc.len() {
                    let a = pts(cyc[i]);
                    let b = pts(cyc[(i + 1) % cyc.len()]);
                    if proper_cross(po, ph, a, b) {
                        blocked = true;
                        break 'scan;
                    }
                }
            }
            if blocked {
                continue;
            }
            let mut spliced: Vec<u32> = Vec::with_capacity(merged.len() + hole.len() + 2);
            spliced.extend_from_slice(&merged[..=oi]);
            for j in 0..=hole.len() {
                spliced.push(hole[(hi + j) % hole.len()]);
            }
            spliced.push(merged[oi]);
            spliced.extend_from_slice(&merged[oi + 1..]);
            merged = spliced;
            break;
        }
    }
    merged
}

/// Contour one cell: build the arrangement and triangulate every patch with
/// outward (negative-gradient) orientation.
///
/// Diagonals between two vertices that both lie on one of the cell's LOWER
/// faces are never drawn: the neighbor across that face owns such chords, so
/// two cells can never emit the same interior diagonal.
pub fn contour_cell(input: &CellInput, frame: &GridFrame) -> Result<CellResult, CellError> {
    let arr = build_arrangement(input, frame)?;
    let mut res = CellResult {
        extra_positions: arr.crit_world.clone(),
        ..Default::default()
    };
    let mut steiner = 0u16;

    const PLANE_TOL: f64 = 1e-9;
    let diagonal_forbidden = |va: u32, vb: u32| -> bool {
        let p = arr.graph_local[va as usize];
        let q = arr.graph_local[vb as usize];
        for a in 0..3 {
            if (p[a] + 1.0).abs() <= PLANE_TOL && (q[a] + 1.0).abs() <= PLANE_TOL {
                return true;
            }
        }
        false
    };

    for patch in &arr.patches {
        res.patches += 1;
        if !patch.holes.is_empty() {
            res.holed_patches += 1;
        }
        let (b, g) = other_axes(patch.axis);
        let pt2 = |v: u32| -> [f64; 2] {
            let p = arr.graph_local[v as usize];
            [p[b], p[g]]
        };

        let cycle: Vec<u32> = if patch.holes.is_empty() {
            patch.outer.clone()
        } else {
            merge_holes(&patch.outer, &patch.holes, &pt2, &diagonal_forbidden)
        };
        if cycle.len() < 3 {
            res.degenerate_dropped += 1;
            continue;
        }

        // orbit cycles carry the surface on their left, so triangles that
        // follow the cycle order have normals along +grad; emit them
        // reversed for the outward convention
        let emit =
            |out: &mut Vec<[VertexKey; 3]>, tris: &[[u32; 3]], key: &dyn Fn(u32) -> VertexKey| {
                for t in tris {
                    out.push([key(t[2]), key(t[1]), key(t[0])]);
                }
            };

        // diagonal filter in merged-cycle index space
        let forbid_idx = |i: usize, j: usize| -> bool {
            let (va, vb) = (cycle[i], cycle[j]);
            va == vb || diagonal_forbidden(va, vb)
        };

        if !patch.fallback {
            let pts: Vec<[f64; 2]> = cycle.iter().map(|&v| pt2(v)).collect();
            if let Some(ear) = earclip::triangulate_avoiding(&pts, &forbid_idx) {
                let mut tris: Vec<[u32; 3]> = Vec::new();
                let mut degenerate = 0;
                for t in ear {
                    let (ia, ib, ic) = (cycle[t[0]], cycle[t[1]], cycle[t[2]]);
                    if ia == ib || ib == ic || ia == ic {
                        degenerate += 1;
                        continue;
                    }
                    tris.push([ia, ib, ic]);
                }
                res.degenerate_dropped += degenerate;
                let keyed = |v: u32| -> VertexKey { arr.graph_keys[v as usize] };
                emit(&mut res.triangles, &tris, &keyed);
                continue;
            }
        }

        // fan from a star-center boundary vertex (adds no vertex)
        if patch.holes.is_empty() {
            if let Some(fan) = star_center_fan(
                &cycle,
                &pt2,
                |v| arr.graph_local[v as usize],
                &diagonal_forbidden,
            ) {
                let keyed = |v: u32| -> VertexKey { arr.graph_keys[v as usize] };
                emit(&mut res.triangles, &fan, &keyed);
                continue;
            }
        }

        // last resort: boundary centroid Newton-projected onto the surface;
        // every diagonal then ends at a cell-private Steiner vertex
        let mut sp = Vec3::ZERO;
        for &v in &cycle {
            sp = sp + arr.graph_local[v as usize];
        }
        sp = sp / cycle.len() as f64;
        for _ in 0..40 {
            let gval = input.cell.eval(&sp) - input.isovalue;
            let gr = input.cell.grad(&sp);
            let n2 = gr.norm2();
            if n2 < 1e-18 || gval.abs() < 1e-14 {
                break;
            }
            sp = sp - gr * (gval / n2);
        }
        for a in 0..3 {
            sp.0[a] = sp.0[a].clamp(-1.0, 1.0);
        }
        let key = VertexKey::PatchPoint {
            cell: input.key,
            idx: steiner,
        };
        steiner += 1;
        res.extra_positions
            .push((key, frame.local_to_world(&input.key, &sp)));
        let sid = arr.graph_keys.len() as u32;
        let mut tris: Vec<[u32; 3]> = Vec::new();
        for i in 0..cycle.len() {
            let va = cycle[i];
            let vb = cycle[(i + 1) % cycle.len()];
            if va == vb {
                continue;
            }
            tris.push([sid, va, vb]);
        }
        let keyed = |v: u32| -> VertexKey {
            if v == sid {
                key
            } else {
                arr.graph_keys[v as usize]
            }
        };
        emit(&mut res.triangles, &tris, &keyed);
    }
    Ok(res)
}

/// Fan triangulation from a boundary vertex that sees the whole polygon.
/// Valid when every diagonal stays interior and no fan triangle degenerates
/// in 3D (axis-parallel fold edges may collapse in the projection, which is
/// fine as long as the 3D triangle is proper).
fn star_center_fan(
    cycle: &[u32],
    pt2: &dyn Fn(u32) -> [f64; 2],
    pt3: impl Fn(u32) -> Vec3,
    diagonal_forbidden: &dyn Fn(u32, u32) -> bool,
) -> Option<Vec<[u32; 3]>> {
    let n = cycle.len();
    if n < 3 {
        return None;
    }
    let pts: Vec<[f64; 2]> = cycle.iter().map(|&v| pt2(v)).collect();
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let proper_cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]| -> bool {
        orient(a, b, c) * orient(a, b, d) < 0.0 && orient(c, d, a) * orient(c, d, b) < 0.0
    };
    'cand: for s in 0..n {
        for k in 0..n {
            if k != s && (k + 1) % n != s && (s + 1) % n != k && diagonal_forbidden(cycle[s], cycle[k]) {
                continue 'cand;
            }
        }
        // diagonals from s to all non-adjacent vertices must be interior
        for k in 0..n {
            if k == s || (k + 1) % n == s || (s + 1) % n == k {
                continue;
            }
            for e in 0..n {
                let e2 = (e + 1) % n;
                if e == s || e2 == s || e == k || e2 == k {
                    continue;
                }
                if proper_cross(pts[s], pts[k], pts[e], pts[e2]) {
                    continue 'cand;
                }
            }
        }
        // fan triangles must be 3D-proper
        let mut fan = Vec::with_capacity(n - 2);
        for i in 0..n {
            let a = (s + 1 + i) % n;
            let b = (s + 2 + i) % n;
            if a == s || b == s {
                continue;
            }
            let pa = pt3(cycle[a]);
            let pb = pt3(cycle[b]);
            let ps = pt3(cycle[s]);
            let area2 = (pa - ps).cross(&(pb - ps)).norm();
            if area2 < 1e-14 {
                continue 'cand;
            }
            fan.push([cycle[s], cycle[a], cycle[b]]);
        }
        if fan.len() == n - 2 {
            return Some(fan);
        }
    }
    None
}

/// Loops and patches of a single-cell leaf set (standalone spec operations).
pub fn loops_and_patches(
    set: &crate::partition::LeafSet,
    key: &CellKey,
    isovalue: f64,
) -> Result<(Vec<Vec<Vec3>>, Vec<Patch>), CellError> {
    let input = super::build_cell_input(set, isovalue, key);
    let arr = build_arrangement(&input, &set.frame)?;
    let loops = arr
        .loops
        .iter()
        .map(|cycle| cycle.iter().map(|&v| arr.graph_local[v as usize]).collect())
        .collect();
    let patches = arr
        .patches
        .iter()
        .map(|p| Patch {
            cycle: p
                .outer
                .iter()
                .map(|&v| arr.graph_local[v as usize])
                .collect(),
            axis: p.axis,
            orient: p.sign,
        })
        .collect();
    Ok((loops, patches))
}
