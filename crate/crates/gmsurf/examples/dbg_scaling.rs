use gmsurf::*;
use std::time::Instant;

fn main() {
    let cluster = synth::blob(500, 5);
    let mut pts = Vec::new();
    for k in [1usize, 2, 4, 8, 16, 32, 64] {
        let atoms = synth::replicate(&cluster, k, 34.0);
        let field = GaussianField::new(atoms, 1.0, 1.0);
        let cfg = pipeline::MeshConfig { tau: 4e-2, ..Default::default() };
        let t = Instant::now();
        let out = mesh_surface(&field, &cfg).unwrap();
        let dt = t.elapsed().as_secs_f64();
        println!("k={k} atoms={} verts={} clean={} t={dt:.3}s", out.stats.atoms, out.stats.vertices, out.report.is_clean());
        pts.push(((out.stats.atoms as f64).ln(), dt.ln()));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    println!("log-log slope = {slope:.3}");
}
