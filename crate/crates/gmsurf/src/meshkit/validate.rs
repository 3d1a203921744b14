//! Mesh validation: manifoldness (every edge bounded by exactly two faces,
//! every vertex with one closed triangle fan) and self-intersection counting
//! via a spatial-hash broad phase and an exact triangle-triangle narrow
//! phase. Pairs sharing a vertex index are excluded.

use super::TriangleMesh;
use crate::exec::par_map;
use crate::geom::Vec3;
use std::collections::{BTreeMap, BTreeSet};

/// Count non-manifold edges (face degree != 2) and non-manifold vertices
/// (incident triangles do not form a single closed fan).
pub fn check_manifold(mesh: &TriangleMesh) -> (usize, usize) {
    let mut edge_deg: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *edge_deg.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let bad_edges = edge_deg.values().filter(|&&d| d != 2).count();

    // vertex fans: link edges (opposite edge of each incident triangle) must
    // form one closed cycle
    let mut incident: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for t in &mesh.triangles {
        incident.entry(t[0]).or_default().push((t[1], t[2]));
        incident.entry(t[1]).or_default().push((t[2], t[0]));
        incident.entry(t[2]).or_default().push((t[0], t[1]));
    }
    let mut bad_vertices = 0;
    for (_, link) in incident.iter() {
        // every link vertex must appear exactly twice (once as source, once
        // as target for an oriented manifold), and the link must be connected
        let mut deg: BTreeMap<u32, i32> = BTreeMap::new();
        let mut adj: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let mut ok = true;
        for &(a, b) in link {
            *deg.entry(a).or_insert(0) += 1;
            *deg.entry(b).or_insert(0) += 1;
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        if deg.values().any(|&d| d != 2) {
            ok = false;
        }
        if ok {
            // single cycle: BFS from any node must reach all
            let start = *deg.keys().next().unwrap();
            let mut seen = BTreeSet::new();
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                if seen.insert(v) {
                    for &w in &adj[&v] {
                        stack.push(w);
                    }
                }
            }
            if seen.len() != deg.len() {
                ok = false;
            }
        }
        if !ok {
            bad_vertices += 1;
        }
    }
    (bad_edges, bad_vertices)
}

/// Exact triangle-triangle intersection test (Moller-style interval test).
/// Strictly positive-measure contact; touching at shared coordinates is not
/// counted unless the triangles properly interpenetrate or overlap coplanar.
fn tri_tri_intersect(t1: &[Vec3; 3], t2: &[Vec3; 3]) -> bool {
    let n1 = (t1[1] - t1[0]).cross(&(t1[2] - t1[0]));
    let d1 = -n1.dot(&t1[0]);
    let dist2: Vec<f64> = t2.iter().map(|p| n1.dot(p) + d1).collect();
    let eps = 1e-12
        * n1.norm().max(1e-300)
        * t1.iter().chain(t2.iter()).fold(1.0f64, |m, p| m.max(p.norm()));
    if dist2.iter().all(|&d| d > eps) || dist2.iter().all(|&d| d < -eps) {
        return false;
    }
    let n2 = (t2[1] - t2[0]).cross(&(t2[2] - t2[0]));
    let d2 = -n2.dot(&t2[0]);
    let dist1: Vec<f64> = t1.iter().map(|p| n2.dot(p) + d2).collect();
    if dist1.iter().all(|&d| d > eps) || dist1.iter().all(|&d| d < -eps) {
        return false;
    }

    let coplanar = dist2.iter().all(|d| d.abs() <= eps) || dist1.iter().all(|d| d.abs() <= eps);
    if coplanar {
        return coplanar_overlap(t1, t2, &n1);
    }

    // interval overlap on the intersection line direction
    let dir = n1.cross(&n2);
    let interval = |t: &[Vec3; 3], dist: &[f64]| -> Option<(f64, f64)> {
        // projections of vertices onto dir
        let p: Vec<f64> = t.iter().map(|v| dir.dot(v)).collect();
        // find the vertex on its own side
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut found = false;
        for i in 0..3 {
            for j in (i + 1)..3 {
                if dist[i] * dist[j] < 0.0 {
                    let t_param = dist[i] / (dist[i] - dist[j]);
                    let x = p[i] + t_param * (p[j] - p[i]);
                    lo = lo.min(x);
                    hi = hi.max(x);
                    found = true;
                }
            }
            if dist[i].abs() <= eps {
                lo = lo.min(p[i]);
                hi = hi.max(p[i]);
                found = true;
            }
        }
        found.then_some((lo, hi))
    };
    match (interval(t1, &dist1), interval(t2, &dist2)) {
        (Some((a0, a1)), Some((b0, b1))) => {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            hi - lo > eps
        }
        _ => false,
    }
}

/// 2D overlap of coplanar triangles (projected along the dominant normal).
fn coplanar_overlap(t1: &[Vec3; 3], t2: &[Vec3; 3], n: &Vec3) -> bool {
    let mut axis = 0;
    for a in 1..3 {
        if n[a].abs() > n[axis].abs() {
            axis = a;
        }
    }
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let p1: Vec<[f64; 2]> = t1.iter().map(|p| [p[u], p[v]]).collect();
    let p2: Vec<[f64; 2]> = t2.iter().map(|p| [p[u], p[v]]).collect();
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    // proper edge crossings
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = (p1[i], p1[(i + 1) % 3]);
            let (c, d) = (p2[j], p2[(j + 1) % 3]);
            if orient(a, b, c) * orient(a, b, d) < 0.0 && orient(c, d, a) * orient(c, d, b) < 0.0 {
                return true;
            }
        }
    }
    // containment
    let inside = |p: [f64; 2], t: &[[f64; 2]]| -> bool {
        let s0 = orient(t[0], t[1], p);
        let s1 = orient(t[1], t[2], p);
        let s2 = orient(t[2], t[0], p);
        (s0 > 0.0 && s1 > 0.0 && s2 > 0.0) || (s0 < 0.0 && s1 < 0.0 && s2 < 0.0)
    };
    inside(p1[0], &p2) || inside(p2[0], &p1)
}

/// Count non-adjacent triangle pairs with positive-measure intersection.
pub fn check_intersections(mesh: &TriangleMesh) -> usize {
    if mesh.triangles.len() < 2 {
        return 0;
    }
    // broad phase: uniform hash over triangle bounding boxes
    let tri_box = |t: &[u32; 3]| -> (Vec3, Vec3) {
        let a = mesh.vertices[t[0] as usize];
        let b = mesh.vertices[t[1] as usize];
        let c = mesh.vertices[t[2] as usize];
        (a.min_with(&b).min_with(&c), a.max_with(&b).max_with(&c))
    };
    let mut mean_edge = 0.0;
    for t in &mesh.triangles {
        let (lo, hi) = tri_box(t);
        mean_edge += (hi - lo).norm();
    }
    mean_edge /= mesh.triangles.len() as f64;
    let cell = (mean_edge * 1.5).max(1e-6);

    let mut buckets: BTreeMap<(i64, i64, i64), Vec<u32>> = BTreeMap::new();
    for (i, t) in mesh.triangles.iter().enumerate() {
        let (lo, hi) = tri_box(t);
        let il = (lo[0] / cell).floor() as i64;
        let jl = (lo[1] / cell).floor() as i64;
        let kl = (lo[2] / cell).floor() as i64;
        let ih = (hi[0] / cell).floor() as i64;
        let jh = (hi[1] / cell).floor() as i64;
        let kh = (hi[2] / cell).floor() as i64;
        for x in il..=ih {
            for y in jl..=jh {
                for z in kl..=kh {
                    buckets.entry((x, y, z)).or_default().push(i as u32);
                }
            }
        }
    }
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for tris in buckets.values() {
        for i in 0..tris.len() {
            for j in (i + 1)..tris.len() {
                pairs.push((tris[i].min(tris[j]), tris[i].max(tris[j])));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    // exclude pairs sharing a vertex index
    pairs.retain(|(i, j)| {
        let a = mesh.triangles[*i as usize];
        let b = mesh.triangles[*j as usize];
        !a.iter().any(|v| b.contains(v))
    });

    let flags = par_map(&pairs, |(i, j)| {
        let ta = mesh.triangles[*i as usize];
        let tb = mesh.triangles[*j as usize];
        let t1 = [
            mesh.vertices[ta[0] as usize],
            mesh.vertices[ta[1] as usize],
            mesh.vertices[ta[2] as usize],
        ];
        let t2 = [
            mesh.vertices[tb[0] as usize],
            mesh.vertices[tb[1] as usize],
            mesh.vertices[tb[2] as usize],
        ];
        tri_tri_intersect(&t1, &t2)
    });
    flags.into_iter().filter(|&b| b).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetrahedron() -> TriangleMesh {
        TriangleMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            triangles: vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]],
        }
    }

    #[test]
    fn tetrahedron_is_clean() {
        let m = tetrahedron();
        assert_eq!(check_manifold(&m), (0, 0));
        assert_eq!(check_intersections(&m), 0);
    }

    #[test]
    fn three_triangles_sharing_an_edge() {
        let m = TriangleMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, -1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            triangles: vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]],
        };
        let (e, _) = check_manifold(&m);
        // edge (0,1) has degree 3; the other 6 edges are boundary (degree 1)
        assert_eq!(e, 7);
    }

    #[test]
    fn two_tets_glued_at_a_vertex() {
        let mut m = tetrahedron();
        let off = m.vertices.len() as u32;
        // mirror tetrahedron sharing vertex 0
        m.vertices.extend([
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
        ]);
        m.triangles.extend([
            [0, off, off + 1],
            [0, off + 1, off + 2],
            [0, off + 2, off],
            [off, off + 2, off + 1],
        ]);
        let (_, v) = check_manifold(&m);
        assert_eq!(v, 1, "shared apex has two fans");
    }

    #[test]
    fn interpenetrating_triangles_detected() {
        let m = TriangleMesh {
            vertices: vec![
                Vec3::new(-1.0, 0.0, -1.0),
                Vec3::new(1.0, 0.0, -1.0),
                Vec3::new(0.0, 0.0, 2.0),
                Vec3::new(0.0, -1.0, 0.0),
                Vec3::new(0.5, 1.0, 0.0),
                Vec3::new(-0.5, 1.0, 0.0),
            ],
            triangles: vec![[0, 1, 2], [3, 4, 5]],
        };
        assert_eq!(check_intersections(&m), 1);
    }

    #[test]
    fn disjoint_triangles_not_detected() {
        let m = TriangleMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 5.0),
                Vec3::new(1.0, 0.0, 5.0),
                Vec3::new(0.0, 1.0, 5.0),
            ],
            triangles: vec![[0, 1, 2], [3, 4, 5]],
        };
        assert_eq!(check_intersections(&m), 0);
    }

    #[test]
    fn adjacent_triangles_excluded() {
        let m = TriangleMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
            ],
            triangles: vec![[0, 1, 2], [1, 3, 2]],
        };
        assert_eq!(check_intersections(&m), 0);
    }
}
