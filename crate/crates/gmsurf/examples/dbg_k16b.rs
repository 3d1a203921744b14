use gmsurf::meshkit::*;
use gmsurf::*;

fn main() {
    let cluster = synth::blob(500, 5);
    let atoms = synth::replicate(&cluster, 16, 34.0);
    let field = GaussianField::new(atoms.clone(), 1.0, 1.0);
    let cfg = pipeline::MeshConfig { tau: 4e-2, ..Default::default() };
    let out = mesh_surface(&field, &cfg).unwrap();
    let mesh = &out.mesh;
    // brute-force find a few intersecting pairs (reuse validate via full scan on buckets)
    // simpler: iterate all pairs in a spatial hash like validate does, but print them
    let n = check_intersections(mesh);
    println!("pairs={n}");
    // locate pairs manually (slow but one-off): reuse same bucketing as validate? just scan subsets
    let tri = |i: usize| {
        let t = mesh.triangles[i];
        [
            mesh.vertices[t[0] as usize],
            mesh.vertices[t[1] as usize],
            mesh.vertices[t[2] as usize],
        ]
    };
    let boxes: Vec<_> = (0..mesh.triangles.len())
        .map(|i| {
            let t = tri(i);
            (
                t[0].min_with(&t[1]).min_with(&t[2]),
                t[0].max_with(&t[1]).max_with(&t[2]),
            )
        })
        .collect();
    let mut found = 0;
    'outer: for i in 0..mesh.triangles.len() {
        for j in (i + 1)..mesh.triangles.len() {
            let (alo, ahi) = boxes[i];
            let (blo, bhi) = boxes[j];
            if (0..3).any(|a| ahi[a] < blo[a] || bhi[a] < alo[a]) {
                continue;
            }
            let ta = mesh.triangles[i];
            let tb = mesh.triangles[j];
            if ta.iter().any(|v| tb.contains(v)) {
                continue;
            }
            // cheap area test via validate's public fn on a 2-triangle mesh
            let mini = TriangleMesh {
                vertices: vec![
                    tri(i)[0], tri(i)[1], tri(i)[2],
                    tri(j)[0], tri(j)[1], tri(j)[2],
                ],
                triangles: vec![[0, 1, 2], [3, 4, 5]],
            };
            if check_intersections(&mini) > 0 {
                println!("pair {i},{j}:");
                println!("  A {:?}", tri(i));
                println!("  B {:?}", tri(j));
                // triangle sizes
                let area = |t: [geom::Vec3; 3]| 0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm();
                println!("  areas {:.2e} {:.2e}", area(tri(i)), area(tri(j)));
                found += 1;
                if found >= 3 {
                    break 'outer;
                }
            }
        }
    }
}
