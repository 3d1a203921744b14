//! Canonical per-face curve tracing. The restriction of a trilinear cell to
//! a face is bilinear; its level curve is a hyperbola (or a line, or two
//! crossing lines at a degenerate saddle). Points already on the curve
//! (frame-edge crossings, seam crossings, fold endpoints) are ordered along
//! each branch, arcs outside the face are discarded, and chord midpoints are
//! inserted where the curve sags away from the chord.

use super::{FacePoint, VertexKey};
use crate::geom::Vec3;
use crate::lattice::FaceKey;
use std::collections::BTreeMap;

/// Traced curve chains of one canonical face.
#[derive(Clone, Debug)]
pub struct FaceRecord {
    pub key: FaceKey,
    /// Bilinear coefficients h = p + q u + r v + s uv of the face.
    pub coeffs: [f64; 4],
    /// Ordered vertex chains; endpoints are frame-boundary points.
    pub chains: Vec<Vec<FacePoint>>,
    /// Coincident-point merges applied during tracing (original -> kept).
    pub merged: BTreeMap<VertexKey, VertexKey>,
}

impl FaceRecord {
    /// Canonical key after any coincident-point merge.
    pub fn resolve(&self, key: VertexKey) -> VertexKey {
        self.merged.get(&key).copied().unwrap_or(key)
    }
}

enum CurveShape {
    /// No curve on this face.
    Empty,
    /// q*u + r*v = c - p.
    Line { q: f64, r: f64 },
    /// (u - ua)(v - va) = k, k != 0.
    Hyperbola { ua: f64, va: f64, k: f64 },
    /// Two axis lines u = ua and v = va crossing at the saddle.
    DegenerateSaddle { ua: f64, va: f64 },
}

/// Trace the face curve through the supplied points.
pub fn trace_face(
    key: FaceKey,
    corner_vals: [f64; 4],
    mut points: Vec<FacePoint>,
    isovalue: f64,
    sagitta: f64,
    uv_to_world: &dyn Fn([f64; 2]) -> Vec3,
) -> FaceRecord {
    let [v00, v10, v01, v11] = corner_vals;
    let p = 0.25 * (v00 + v10 + v01 + v11);
    let q = 0.25 * (-v00 + v10 - v01 + v11);
    let r = 0.25 * (-v00 - v10 + v01 + v11);
    let s = 0.25 * (v00 - v10 - v01 + v11);
    let scale = (p - isovalue).abs() + q.abs() + r.abs() + s.abs() + 1e-300;

    // deduplicate by key and merge geometrically coincident points
    points.sort_by(|a, b| a.key.cmp(&b.key));
    points.dedup_by(|a, b| a.key == b.key);
    let mut merged = BTreeMap::new();
    let mut keep: Vec<FacePoint> = Vec::new();
    for fp in points.into_iter() {
        if let Some(existing) = keep.iter().find(|k| {
            (k.uv[0] - fp.uv[0]).abs() < 1e-10 && (k.uv[1] - fp.uv[1]).abs() < 1e-10
        }) {
            merged.insert(fp.key, existing.key);
        } else {
            keep.push(fp);
        }
    }
    let mut points = keep;

    let shape = if s.abs() <= 1e-13 * scale {
        if q.abs() + r.abs() <= 1e-13 * scale {
            CurveShape::Empty
        } else {
            CurveShape::Line { q, r }
        }
    } else {
        let ua = -r / s;
        let va = -q / s;
        let k = (isovalue - p) / s + (q * r) / (s * s);
        if k.abs() <= 1e-12 * (scale / s.abs()).max(1.0) {
            CurveShape::DegenerateSaddle { ua, va }
        } else {
            CurveShape::Hyperbola { ua, va, k }
        }
    };

    let mut record = FaceRecord {
        key,
        coeffs: [p, q, r, s],
        chains: Vec::new(),
        merged,
    };
    if matches!(shape, CurveShape::Empty) || points.is_empty() {
        return record;
    }

    // saddle vertex joins both degenerate branches
    if let CurveShape::DegenerateSaddle { ua, va } = shape {
        if ua.abs() < 1.0 - 1e-12 && va.abs() < 1.0 - 1e-12 {
            points.push(FacePoint {
                key: VertexKey::FaceSaddle(key),
                uv: [ua, va],
                pos: uv_to_world([ua, va]),
                boundary: false,
            });
        }
    }

    // assign points to branches
    let mut branches: Vec<Vec<FacePoint>> = Vec::new();
    match &shape {
        CurveShape::Line { .. } => branches.push(points),
        CurveShape::Hyperbola { ua, va, k } => {
            let mut neg = Vec::new();
            let mut pos = Vec::new();
            for fp in points {
                let s1 = fp.uv[0] - ua;
                let s2 = fp.uv[1] - va;
                let positive = if s1.abs() >= s2.abs() {
                    s1 >= 0.0
                } else {
                    (k.signum() * s2) >= 0.0
                };
                if positive {
                    pos.push(fp);
                } else {
                    neg.push(fp);
                }
            }
            branches.push(neg);
            branches.push(pos);
        }
        CurveShape::DegenerateSaddle { ua, va } => {
            let mut vert = Vec::new();
            let mut horiz = Vec::new();
            for fp in points {
                let on_vert = (fp.uv[0] - ua).abs() <= (fp.uv[1] - va).abs();
                if matches!(fp.key, VertexKey::FaceSaddle(_)) {
                    vert.push(fp.clone());
                    horiz.push(fp);
                } else if on_vert {
                    vert.push(fp);
                } else {
                    horiz.push(fp);
                }
            }
            branches.push(vert);
            branches.push(horiz);
        }
        CurveShape::Empty => {}
    }

    // curve point at primary coordinate w between two branch points
    let curve_point = |primary_u: bool, w: f64| -> Option<[f64; 2]> {
        match &shape {
            CurveShape::Line { q, r } => {
                // q*u + r*v = c - p
                if primary_u {
                    if r.abs() < 1e-300 {
                        return None;
                    }
                    Some([w, (isovalue - p - q * w) / r])
                } else {
                    if q.abs() < 1e-300 {
                        return None;
                    }
                    Some([(isovalue - p - r * w) / q, w])
                }
            }
            CurveShape::Hyperbola { ua, va, k } => {
                if primary_u {
                    let d = w - ua;
                    if d.abs() < 1e-300 {
                        return None;
                    }
                    Some([w, va + k / d])
                } else {
                    let d = w - va;
                    if d.abs() < 1e-300 {
                        return None;
                    }
                    Some([ua + k / d, w])
                }
            }
            CurveShape::DegenerateSaddle { ua, va } => {
                // branch-dependent; handled by passing the fixed coordinate
                if primary_u {
                    Some([w, *va])
                } else {
                    Some([*ua, w])
                }
            }
            CurveShape::Empty => None,
        }
    };

    for (bi, mut branch) in branches.into_iter().enumerate() {
        if branch.len() < 2 {
            continue;
        }
        // choose the better-spread primary coordinate; both are monotone
        let span = |sel: usize| -> f64 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for fp in &branch {
                lo = lo.min(fp.uv[sel]);
                hi = hi.max(fp.uv[sel]);
            }
            hi - lo
        };
        let primary_u = match &shape {
            CurveShape::DegenerateSaddle { .. } => bi == 1, // vert branch sorts by v
            _ => span(0) >= span(1),
        };
        let sel = if primary_u { 0 } else { 1 };
        branch.sort_by(|a, b| {
            a.uv[sel]
                .partial_cmp(&b.uv[sel])
                .unwrap()
                .then(a.uv[1 - sel].partial_cmp(&b.uv[1 - sel]).unwrap())
                .then(a.key.cmp(&b.key))
        });

        // arcs between consecutive points; keep those whose curve midpoint
        // stays on the face
        let mut chain: Vec<FacePoint> = Vec::new();
        let flush = |chain: &mut Vec<FacePoint>, record: &mut FaceRecord| {
            if chain.len() >= 2 {
                record.chains.push(std::mem::take(chain));
            } else {
                chain.clear();
            }
        };
        for i in 0..branch.len() - 1 {
            let a = &branch[i];
            let b = &branch[i + 1];
            let wm = 0.5 * (a.uv[sel] + b.uv[sel]);
            let inside = match curve_point(primary_u, wm) {
                Some(m) => m[0].abs() <= 1.0 && m[1].abs() <= 1.0,
                None => false,
            };
            if inside {
                if chain.is_empty() {
                    chain.push(a.clone());
                }
                chain.push(b.clone());
            } else {
                flush(&mut chain, &mut record);
            }
        }
        flush(&mut chain, &mut record);
    }

    // deterministic chain order, then sagitta refinement with stable ids
    record.chains.sort_by(|a, b| a[0].key.cmp(&b[0].key));
    let chains = std::mem::take(&mut record.chains);
    for (ci, ch) in chains.into_iter().enumerate() {
        let mut refined: Vec<FacePoint> = Vec::with_capacity(ch.len());
        for (si, pair) in ch.windows(2).enumerate() {
            let a = &pair[0];
            let b = &pair[1];
            if si == 0 {
                refined.push(a.clone());
            }
            // midpoint in the dominant coordinate of this arc
            let primary_u = (a.uv[0] - b.uv[0]).abs() >= (a.uv[1] - b.uv[1]).abs();
            let selp = if primary_u { 0 } else { 1 };
            let wm = 0.5 * (a.uv[selp] + b.uv[selp]);
            if let Some(m) = curve_point_for_arc(&shape, isovalue, p, primary_u, wm, a, b) {
                let chord = [b.uv[0] - a.uv[0], b.uv[1] - a.uv[1]];
                let len = (chord[0] * chord[0] + chord[1] * chord[1]).sqrt();
                if len > 1e-12 {
                    let dx = m[0] - a.uv[0];
                    let dy = m[1] - a.uv[1];
                    let sag = (dx * chord[1] - dy * chord[0]).abs() / len;
                    if sag > sagitta && m[0].abs() <= 1.0 && m[1].abs() <= 1.0 {
                        refined.push(FacePoint {
                            key: VertexKey::ArcMid {
                                face: key,
                                chain: ci as u16,
                                seg: si as u16,
                            },
                            uv: m,
                            pos: uv_to_world(m),
                            boundary: false,
                        });
                    }
                }
            }
            refined.push(b.clone());
        }
        record.chains.push(refined);
    }
    record
}

/// Curve point for sagitta refinement. For the degenerate saddle the arc lies
/// on one of the two lines, recovered from its endpoints.
fn curve_point_for_arc(
    shape: &CurveShape,
    isovalue: f64,
    p: f64,
    primary_u: bool,
    w: f64,
    a: &FacePoint,
    b: &FacePoint,
) -> Option<[f64; 2]> {
    match shape {
        CurveShape::Empty => None,
        CurveShape::Line { q, r } => {
            if primary_u {
                if r.abs() < 1e-300 {
                    None
                } else {
                    Some([w, (isovalue - p - q * w) / r])
                }
            } else if q.abs() < 1e-300 {
                None
            } else {
                Some([(isovalue - p - r * w) / q, w])
            }
        }
        CurveShape::Hyperbola { ua, va, k } => {
            if primary_u {
                let d = w - ua;
                (d.abs() > 1e-300).then(|| [w, va + k / d])
            } else {
                let d = w - va;
                (d.abs() > 1e-300).then(|| [ua + k / d, w])
            }
        }
        CurveShape::DegenerateSaddle { .. } => {
            // straight arc: chord midpoint lies on the line
            Some([0.5 * (a.uv[0] + b.uv[0]), 0.5 * (a.uv[1] + b.uv[1])])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::NodeId;

    fn fk() -> FaceKey {
        FaceKey {
            axis: 2,
            plane: 0,
            u0: 0,
            v0: 0,
            size: 2,
        }
    }

    fn fp(key: u8, uv: [f64; 2], boundary: bool) -> FacePoint {
        FacePoint {
            key: VertexKey::Corner(NodeId(key as i64, 0, 0)),
            uv,
            pos: Vec3::new(uv[0], uv[1], 0.0),
            boundary,
        }
    }

    #[test]
    fn line_curve_single_chain() {
        // h = u (corners -1,1,-1,1), c = 0: vertical line u = 0
        let rec = trace_face(
            fk(),
            [-1.0, 1.0, -1.0, 1.0],
            vec![fp(0, [0.0, -1.0], true), fp(1, [0.0, 1.0], true)],
            0.0,
            0.05,
            &|uv| Vec3::new(uv[0], uv[1], 0.0),
        );
        assert_eq!(rec.chains.len(), 1);
        assert_eq!(rec.chains[0].len(), 2);
    }

    #[test]
    fn hyperbola_orders_and_splits_branches() {
        // corners of h = u*v + 0.5 at (+-1, +-1): v00=1.5, v10=-0.5, v01=-0.5, v11=1.5
        // level c = 0.5: u*v = 0 -> degenerate saddle at origin; use c = 0.75:
        // u*v = 0.25, two branches
        let corner = [1.5, -0.5, -0.5, 1.5];
        // curve u*v = 0.25: branch points at the frame: u=1: v=0.25; v=1: u=0.25;
        // u=-1: v=-0.25; v=-1: u=-0.25
        let pts = vec![
            fp(0, [1.0, 0.25], true),
            fp(1, [0.25, 1.0], true),
            fp(2, [-1.0, -0.25], true),
            fp(3, [-0.25, -1.0], true),
        ];
        let rec = trace_face(fk(), corner, pts, 0.75, 1.0, &|uv| {
            Vec3::new(uv[0], uv[1], 0.0)
        });
        assert_eq!(rec.chains.len(), 2);
        for ch in &rec.chains {
            assert_eq!(ch.len(), 2);
            // both points on the same branch (u*v > 0)
            assert!(ch[0].uv[0] * ch[0].uv[1] > 0.0);
            assert!(ch[0].uv[0].signum() == ch[1].uv[0].signum());
        }
    }

    #[test]
    fn sagitta_midpoint_inserted() {
        // strongly curved branch: u*v = 0.25 with far-apart endpoints
        let corner = [1.5, -0.5, -0.5, 1.5];
        let pts = vec![fp(0, [1.0, 0.25], true), fp(1, [0.25, 1.0], true)];
        let rec = trace_face(fk(), corner, pts, 0.75, 0.05, &|uv| {
            Vec3::new(uv[0], uv[1], 0.0)
        });
        assert_eq!(rec.chains.len(), 1);
        let ch = &rec.chains[0];
        assert_eq!(ch.len(), 3, "expected one refinement midpoint");
        assert!(matches!(ch[1].key, VertexKey::ArcMid { .. }));
        // midpoint lies on the curve u*v = 0.25
        assert!((ch[1].uv[0] * ch[1].uv[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn outside_arc_discarded() {
        // curve u*v = 0.25 with all four frame crossings: the two arcs are in
        // separate quadrants; the "arc" connecting branches must not appear
        let corner = [1.5, -0.5, -0.5, 1.5];
        let pts = vec![
            fp(0, [1.0, 0.25], true),
            fp(1, [0.25, 1.0], true),
            fp(2, [-1.0, -0.25], true),
            fp(3, [-0.25, -1.0], true),
        ];
        let rec = trace_face(fk(), corner, pts, 0.75, 10.0, &|uv| {
            Vec3::new(uv[0], uv[1], 0.0)
        });
        let total: usize = rec.chains.iter().map(|c| c.len()).sum();
        assert_eq!(rec.chains.len(), 2);
        assert_eq!(total, 4);
    }

    #[test]
    fn coincident_points_merge() {
        let corner = [-1.0, 1.0, -1.0, 1.0];
        let a = fp(0, [0.0, -1.0], true);
        let mut b = fp(1, [0.0, -1.0], true);
        b.key = VertexKey::FaceSaddle(fk());
        let c = fp(2, [0.0, 1.0], true);
        let rec = trace_face(fk(), corner, vec![a, b, c], 0.0, 0.05, &|uv| {
            Vec3::new(uv[0], uv[1], 0.0)
        });
        assert_eq!(rec.chains.len(), 1);
        assert_eq!(rec.chains[0].len(), 2);
        // the saddle key was merged into the corner key
        let resolved = rec.resolve(VertexKey::FaceSaddle(fk()));
        assert!(matches!(resolved, VertexKey::Corner(_)));
    }
}
