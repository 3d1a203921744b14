//! Mesh metrics: area, enclosed volume, Euler characteristic, connected
//! components, vertex density.

use super::{MeshReport, TriangleMesh};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("volume requires a closed, consistently oriented mesh")]
    NotClosed,
}

/// Total triangle area.
pub fn area(mesh: &TriangleMesh) -> f64 {
    mesh.triangles
        .iter()
        .map(|t| {
            let a = mesh.vertices[t[0] as usize];
            let b = mesh.vertices[t[1] as usize];
            let c = mesh.vertices[t[2] as usize];
            0.5 * (b - a).cross(&(c - a)).norm()
        })
        .sum()
}

/// Enclosed volume via signed tetrahedra to the origin. Requires every
/// directed edge to appear exactly once in each direction (closed, oriented).
pub fn signed_volume(mesh: &TriangleMesh) -> Result<f64, MetricsError> {
    let mut directed: BTreeMap<(u32, u32), i32> = BTreeMap::new();
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *directed.entry((a.min(b), a.max(b))).or_insert(0) += if a < b { 1 } else { -1 };
        }
    }
    let closed = !mesh.triangles.is_empty()
        && directed.values().all(|&d| d == 0)
        && {
            let mut deg: BTreeMap<(u32, u32), u32> = BTreeMap::new();
            for t in &mesh.triangles {
                for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                    *deg.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                }
            }
            deg.values().all(|&d| d == 2)
        };
    if !closed {
        return Err(MetricsError::NotClosed);
    }
    let v: f64 = mesh
        .triangles
        .iter()
        .map(|t| {
            let a = mesh.vertices[t[0] as usize];
            let b = mesh.vertices[t[1] as usize];
            let c = mesh.vertices[t[2] as usize];
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum();
    Ok(v)
}

/// Connected components over shared vertices.
fn components(mesh: &TriangleMesh) -> usize {
    let n = mesh.vertices.len();
    if n == 0 {
        return 0;
    }
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], x: u32) -> u32 {
        let mut r = x;
        while parent[r as usize] != r {
            r = parent[r as usize];
        }
        let mut c = x;
        while parent[c as usize] != r {
            let next = parent[c as usize];
            parent[c as usize] = r;
            c = next;
        }
        r
    }
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2])] {
            let ra = find(&mut parent, a);
            let rb = find(&mut parent, b);
            if ra != rb {
                parent[ra as usize] = rb;
            }
        }
    }
    let mut used: Vec<bool> = vec![false; n];
    for t in &mesh.triangles {
        for &v in t {
            used[v as usize] = true;
        }
    }
    let mut roots: Vec<u32> = (0..n as u32)
        .filter(|&v| used[v as usize])
        .map(|v| find(&mut parent, v))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

/// Area, volume (when closed), Euler characteristic, components, density.
/// Validation counters are left at zero; see `full_report`.
pub fn metrics(mesh: &TriangleMesh) -> MeshReport {
    let area = area(mesh);
    let volume = signed_volume(mesh).ok().map(f64::abs);
    let v = mesh.vertices.len() as i64;
    let e = mesh.edge_count() as i64;
    let f = mesh.triangles.len() as i64;
    MeshReport {
        non_manifold_edges: 0,
        non_manifold_vertices: 0,
        intersecting_pairs: 0,
        area,
        volume,
        vertex_density: if area > 0.0 {
            mesh.vertices.len() as f64 / area
        } else {
            0.0
        },
        euler_characteristic: v - e + f,
        components: components(mesh),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    /// Regular tetrahedron with edge length 1.
    fn unit_tetrahedron() -> TriangleMesh {
        let s = 1.0 / 2f64.sqrt();
        let verts = [
            Vec3::new(1.0, 0.0, -s),
            Vec3::new(-1.0, 0.0, -s),
            Vec3::new(0.0, 1.0, s),
            Vec3::new(0.0, -1.0, s),
        ];
        // scale so edges are length 1 (current edge = 2)
        let verts: Vec<Vec3> = verts.iter().map(|v| *v * 0.5).collect();
        TriangleMesh {
            vertices: verts,
            triangles: vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        }
    }

    #[test]
    fn tetrahedron_closed_forms() {
        let m = unit_tetrahedron();
        // edge length check
        let e01 = m.vertices[0].dist(&m.vertices[1]);
        assert!((e01 - 1.0).abs() < 1e-12);
        assert!((area(&m) - 3f64.sqrt()).abs() < 1e-12);
        let vol = signed_volume(&m).unwrap().abs();
        assert!((vol - 2f64.sqrt() / 12.0).abs() < 1e-12, "vol = {vol}");
        let r = metrics(&m);
        assert_eq!(r.euler_characteristic, 2);
        assert_eq!(r.components, 1);
    }

    #[test]
    fn cube_surface_metrics() {
        // cube of side 2 centered at origin
        let mut verts = Vec::new();
        for bits in 0..8 {
            verts.push(Vec3::new(
                if bits & 1 == 1 { 1.0 } else { -1.0 },
                if bits & 2 == 2 { 1.0 } else { -1.0 },
                if bits & 4 == 4 { 1.0 } else { -1.0 },
            ));
        }
        // faces with outward orientation, two triangles each
        let quads: [[u32; 4]; 6] = [
            [0, 2, 3, 1], // z = -1, outward -z
            [4, 5, 7, 6], // z = +1
            [0, 1, 5, 4], // y = -1
            [2, 6, 7, 3], // y = +1
            [0, 4, 6, 2], // x = -1
            [1, 3, 7, 5], // x = +1
        ];
        let mut triangles = Vec::new();
        for q in quads {
            triangles.push([q[0], q[1], q[2]]);
            triangles.push([q[0], q[2], q[3]]);
        }
        let m = TriangleMesh {
            vertices: verts,
            triangles,
        };
        let r = metrics(&m);
        assert!((r.area - 24.0).abs() < 1e-12);
        assert!((r.volume.unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(r.euler_characteristic, 2);
    }

    #[test]
    fn open_mesh_has_no_volume() {
        let m = TriangleMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            triangles: vec![[0, 1, 2]],
        };
        assert_eq!(signed_volume(&m), Err(MetricsError::NotClosed));
        assert_eq!(metrics(&m).volume, None);
    }

    #[test]
    fn icosphere_approximates_sphere() {
        let m = icosphere(2.0, 4);
        let r = metrics(&m);
        let area_expect = 16.0 * std::f64::consts::PI;
        let vol_expect = 32.0 * std::f64::consts::PI / 3.0;
        assert!((r.area - area_expect).abs() / area_expect < 0.005);
        assert!((r.volume.unwrap() - vol_expect).abs() / vol_expect < 0.005);
        assert_eq!(r.euler_characteristic, 2);
        assert_eq!(r.components, 1);
        // discrete divergence identity: sum of area-weighted normals vanishes
        let mut s = Vec3::ZERO;
        for t in &m.triangles {
            let a = m.vertices[t[0] as usize];
            let b = m.vertices[t[1] as usize];
            let c = m.vertices[t[2] as usize];
            s = s + (b - a).cross(&(c - a)) * 0.5;
        }
        assert!(s.norm() < 1e-8 * r.area);
    }

    /// Icosphere test oracle: subdivided icosahedron projected to radius r.
    pub(crate) fn icosphere(radius: f64, subdiv: usize) -> TriangleMesh {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts = vec![
            Vec3::new(-1.0, phi, 0.0),
            Vec3::new(1.0, phi, 0.0),
            Vec3::new(-1.0, -phi, 0.0),
            Vec3::new(1.0, -phi, 0.0),
            Vec3::new(0.0, -1.0, phi),
            Vec3::new(0.0, 1.0, phi),
            Vec3::new(0.0, -1.0, -phi),
            Vec3::new(0.0, 1.0, -phi),
            Vec3::new(phi, 0.0, -1.0),
            Vec3::new(phi, 0.0, 1.0),
            Vec3::new(-phi, 0.0, -1.0),
            Vec3::new(-phi, 0.0, 1.0),
        ];
        let mut tris: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for v in &mut verts {
            *v = v.normalized() * radius;
        }
        for _ in 0..subdiv {
            let mut midcache: BTreeMap<(u32, u32), u32> = BTreeMap::new();
            let mut next = Vec::with_capacity(tris.len() * 4);
            for t in &tris {
                let mut mid = [0u32; 3];
                for (i, m) in mid.iter_mut().enumerate() {
                    let (a, b) = (t[i], t[(i + 1) % 3]);
                    let key = (a.min(b), a.max(b));
                    *m = *midcache.entry(key).or_insert_with(|| {
                        let p = ((verts[a as usize] + verts[b as usize]) * 0.5)
                            .normalized()
                            * radius;
                        verts.push(p);
                        (verts.len() - 1) as u32
                    });
                }
                next.push([t[0], mid[0], mid[2]]);
                next.push([t[1], mid[1], mid[0]]);
                next.push([t[2], mid[2], mid[1]]);
                next.push([mid[0], mid[1], mid[2]]);
            }
            tris = next;
        }
        TriangleMesh {
            vertices: verts,
            triangles: tris,
        }
    }
}
