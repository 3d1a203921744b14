//! Ear clipping triangulation of a simple 2D polygon.

/// Signed area of the polygon (positive = counterclockwise).
pub fn signed_area(pts: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for i in 0..pts.len() {
        let p = pts[i];
        let q = pts[(i + 1) % pts.len()];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

#[inline]
fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Is p strictly inside (or within eps of the boundary of) triangle abc?
fn blocks_ear(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2], eps: f64) -> bool {
    let d1 = cross(a, b, p);
    let d2 = cross(b, c, p);
    let d3 = cross(c, a, p);
    d1 >= -eps && d2 >= -eps && d3 >= -eps
}

/// Triangulate like [`triangulate`], but never create a diagonal for which
/// `forbidden` returns true (indices are into `pts`). Returns None when the
/// polygon cannot be finished under that constraint.
pub fn triangulate_avoiding(
    pts: &[[f64; 2]],
    forbidden: &dyn Fn(usize, usize) -> bool,
) -> Option<Vec<[usize; 3]>> {
    let n = pts.len();
    if n < 3 {
        return Some(Vec::new());
    }
    let ccw = signed_area(pts) >= 0.0;
    let mut idx: Vec<usize> = if ccw {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    };
    let scale = pts
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let eps_area = 1e-14 * scale * scale;

    let mut out = Vec::with_capacity(n - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for pass in 0..2 {
            for i in 0..m {
                let i0 = idx[i];
                let i1 = idx[(i + 1) % m];
                let i2 = idx[(i + 2) % m];
                if forbidden(i0, i2) {
                    continue;
                }
                let (a, b, c) = (pts[i0], pts[i1], pts[i2]);
                let area2 = cross(a, b, c);
                let convex_ok = if pass == 0 {
                    area2 > eps_area
                } else {
                    area2 >= -eps_area
                };
                if !convex_ok {
                    continue;
                }
                let mut blocked = false;
                for &j in &idx {
                    if j == i0 || j == i1 || j == i2 {
                        continue;
                    }
                    if blocks_ear(pts[j], a, b, c, eps_area) {
                        blocked = true;
                        break;
                    }
                }
                if blocked {
                    continue;
                }
                out.push([i0, i1, i2]);
                idx.remove((i + 1) % m);
                clipped = true;
                break;
            }
            if clipped {
                break;
            }
        }
        if !clipped {
            return None;
        }
    }
    // the last triangle introduces no new diagonal
    out.push([idx[0], idx[1], idx[2]]);
    if !ccw {
        for t in &mut out {
            t.swap(0, 2);
        }
    }
    Some(out)
}

/// Triangulate a simple polygon given as a vertex loop. Returns triangles as
/// index triples into `pts`, oriented like the input loop. Emits exactly
/// n - 2 triangles; strictly collinear "ears" are clipped last so no
/// zero-area triangle is produced unless the polygon itself is degenerate.
pub fn triangulate(pts: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let n = pts.len();
    if n < 3 {
        return Vec::new();
    }
    let ccw = signed_area(pts) >= 0.0;
    let mut idx: Vec<usize> = if ccw {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    };
    let scale = pts
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let eps_area = 1e-14 * scale * scale;

    let mut out = Vec::with_capacity(n - 2);
    let mut spins = 0usize;
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        // prefer strictly convex unblocked ears
        for pass in 0..2 {
            for i in 0..m {
                let i0 = idx[i];
                let i1 = idx[(i + 1) % m];
                let i2 = idx[(i + 2) % m];
                let (a, b, c) = (pts[i0], pts[i1], pts[i2]);
                let area2 = cross(a, b, c);
                let convex_ok = if pass == 0 {
                    area2 > eps_area
                } else {
                    area2 >= -eps_area // second pass tolerates collinear ears
                };
                if !convex_ok {
                    continue;
                }
                let mut blocked = false;
                for &j in &idx {
                    if j == i0 || j == i1 || j == i2 {
                        continue;
                    }
                    if blocks_ear(pts[j], a, b, c, eps_area) {
                        blocked = true;
                        break;
                    }
                }
                if blocked {
                    continue;
                }
                out.push([i0, i1, i2]);
                idx.remove((i + 1) % m);
                clipped = true;
                break;
            }
            if clipped {
                break;
            }
        }
        if !clipped {
            // degenerate polygon; fall back to a fan so every vertex is used
            spins += 1;
            if spins > 1 {
                for i in 1..idx.len() - 1 {
                    out.push([idx[0], idx[i], idx[i + 1]]);
                }
                idx.truncate(0);
                break;
            }
        }
    }
    if idx.len() == 3 {
        out.push([idx[0], idx[1], idx[2]]);
    }
    if !ccw {
        for t in &mut out {
            t.swap(0, 2);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SplitMix;

    fn poly_area(pts: &[[f64; 2]], tris: &[[usize; 3]]) -> f64 {
        tris.iter()
            .map(|t| 0.5 * cross(pts[t[0]], pts[t[1]], pts[t[2]]).abs())
            .sum()
    }

    #[test]
    fn triangle_is_itself() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let tris = triangulate(&pts);
        assert_eq!(tris, vec![[0, 1, 2]]);
    }

    #[test]
    fn convex_quad_two_triangles() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tris = triangulate(&pts);
        assert_eq!(tris.len(), 2);
        assert!((poly_area(&pts, &tris) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflex_polygon() {
        // arrowhead with a reflex vertex
        let pts = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [1.0, 0.5], [0.0, 2.0]];
        let tris = triangulate(&pts);
        assert_eq!(tris.len(), 3);
        let area = signed_area(&pts).abs();
        assert!((poly_area(&pts, &tris) - area).abs() < 1e-12);
    }

    #[test]
    fn clockwise_input_preserves_winding() {
        let pts = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        let tris = triangulate(&pts);
        assert_eq!(tris.len(), 2);
        for t in &tris {
            // winding of output matches the (clockwise) input
            assert!(cross(pts[t[0]], pts[t[1]], pts[t[2]]) < 0.0);
        }
    }

    #[test]
    fn random_star_polygons_area_bookkeeping() {
        let mut rng = SplitMix::new(8);
        for _ in 0..60 {
            let n = 5 + (rng.next_u64() % 10) as usize;
            let mut pts = Vec::with_capacity(n);
            for i in 0..n {
                let ang = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let r = rng.uniform(0.4, 1.0);
                pts.push([r * ang.cos(), r * ang.sin()]);
            }
            let tris = triangulate(&pts);
            assert_eq!(tris.len(), n - 2);
            for t in &tris {
                assert!(cross(pts[t[0]], pts[t[1]], pts[t[2]]).abs() > 1e-12);
            }
            let area = signed_area(&pts).abs();
            assert!(
                (poly_area(&pts, &tris) - area).abs() < 1e-9,
                "area mismatch"
            );
        }
    }

    #[test]
    fn collinear_interior_vertex_kept() {
        // vertex 1 lies on the segment 0-2; a valid triangulation still uses it
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]];
        let tris = triangulate(&pts);
        assert_eq!(tris.len(), 3);
        let used: std::collections::BTreeSet<usize> =
            tris.iter().flat_map(|t| t.iter().copied()).collect();
        assert_eq!(used.len(), 5);
        for t in &tris {
            assert!(cross(pts[t[0]], pts[t[1]], pts[t[2]]).abs() > 1e-12);
        }
    }
}
