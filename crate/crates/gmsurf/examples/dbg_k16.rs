use gmsurf::*;

fn main() {
    let cluster = synth::blob(500, 5);
    let atoms = synth::replicate(&cluster, 16, 34.0);
    let field = GaussianField::new(atoms, 1.0, 1.0);
    let cfg = pipeline::MeshConfig { tau: 4e-2, ..Default::default() };
    let out = mesh_surface(&field, &cfg).unwrap();
    println!("defects: edges={} verts={} pairs={}",
        out.report.non_manifold_edges,
        out.report.non_manifold_vertices,
        out.report.intersecting_pairs);
    println!("euler={} comps={}", out.report.euler_characteristic, out.report.components);
    // find the offending edges
    use std::collections::BTreeMap;
    let mut deg: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for t in &out.mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *deg.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    for ((a, b), d) in deg.iter().filter(|(_, &d)| d != 2).take(8) {
        println!("edge {a}-{b} degree {d}: {:?} .. {:?}", out.mesh.vertices[*a as usize], out.mesh.vertices[*b as usize]);
    }
}
