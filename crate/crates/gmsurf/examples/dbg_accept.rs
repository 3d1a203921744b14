use gmsurf::meshkit::metrics;
use gmsurf::molmodel::*;
use gmsurf::oracle::*;
use gmsurf::*;

fn gly_like() -> Vec<Atom> {
    [
        (0.0, 0.0, 0.0, 1.55),
        (1.47, 0.0, 0.0, 1.70),
        (2.10, 1.30, 0.0, 1.70),
        (1.50, 2.35, 0.0, 1.52),
        (3.35, 1.40, 0.10, 1.52),
        (-0.50, -0.85, 0.20, 1.20),
        (1.80, -0.50, -0.85, 1.20),
    ]
    .iter()
    .map(|&(x, y, z, r)| Atom {
        center: geom::Vec3::new(x, y, z),
        radius: r,
        charge: 0.0,
    })
    .collect()
}

fn main() {
    // torus genus check
    let ring = GaussianField::new(synth::atom_ring(8, 3.0, 1.2), 1.0, 1.0);
    let g = NeighborGrid::build(&ring);
    let mc = mc_reference(&ring, &g, 0.15, 50_000_000).unwrap();
    let rm = metrics(&mc);
    println!("ring oracle: euler={} comps={}", rm.euler_characteristic, rm.components);
    let out = mesh_surface(&ring, &pipeline::MeshConfig { tau: 2.5e-3, ..Default::default() }).unwrap();
    println!("ring pipeline: euler={} comps={} defects clean={}", out.report.euler_characteristic, out.report.components, out.report.is_clean());

    // convergence sweep on GLY-like
    let gly = GaussianField::new(gly_like(), 1.0, 1.0);
    let gg = NeighborGrid::build(&gly);
    let omesh = mc_reference(&gly, &gg, 0.15, 50_000_000).unwrap();
    let om = metrics(&omesh);
    println!("gly oracle: area={:.3} vol={:.3}", om.area, om.volume.unwrap());
    let mut prev: Option<(f64, f64)> = None;
    for tau in [4e-2, 1e-2, 2.5e-3, 6e-4] {
        let out = mesh_surface(&gly, &pipeline::MeshConfig { tau, ..Default::default() }).unwrap();
        let (a, v) = (out.report.area, out.report.volume.unwrap());
        let d = prev.map(|(pa, pv)| ((a - pa).abs(), (v - pv).abs()));
        println!(
            "gly tau={tau:.0e}: area={a:.4} vol={v:.4} verts={} clean={} dA/dV={:?} vs oracle {:+.2}%/{:+.2}%",
            out.stats.vertices,
            out.report.is_clean(),
            d,
            100.0 * (a - om.area) / om.area,
            100.0 * (v - om.volume.unwrap()) / om.volume.unwrap()
        );
        prev = Some((a, v));
    }

    // residual criterion on 2-atom
    let f2 = GaussianField::new(synth::two_atoms(2.4), 1.0, 1.0);
    let g2 = NeighborGrid::build(&f2);
    for tau in [4e-2, 2e-2, 1e-2, 5e-3] {
        let out = mesh_surface(&f2, &pipeline::MeshConfig { tau, ..Default::default() }).unwrap();
        let mut rs: Vec<f64> = out
            .mesh
            .vertices
            .iter()
            .map(|p| {
                let (phi, grad) = eval_field(&f2, &g2, p);
                (phi - 1.0).abs() / grad.norm().max(1e-12)
            })
            .collect();
        rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let max = rs.last().unwrap();
        let median = rs[rs.len() / 2];
        let bound = 2.0 * out.stats.max_leaf_diagonal * tau.sqrt();
        println!(
            "2atom tau={tau:.0e}: max_resid={max:.5} median={median:.6} bound(2*diag*sqrt(tau))={bound:.5} ok={}",
            max <= &bound
        );
    }
}
