//! Deterministic synthetic molecules for tests and benchmarks.

use crate::geom::Vec3;
use crate::molmodel::Atom;

/// SplitMix64 PRNG; stable across platforms and runs.
#[derive(Clone, Debug)]
pub struct SplitMix {
    state: u64,
}

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

/// Single atom at the origin: the surface is the sphere |x| = r for D=1, c=1.
pub fn single_atom(radius: f64) -> Vec<Atom> {
    vec![Atom {
        center: Vec3::ZERO,
        radius,
        charge: 0.0,
    }]
}

/// Two atoms on the x axis, `gap` Angstrom between centers.
pub fn two_atoms(gap: f64) -> Vec<Atom> {
    vec![
        Atom {
            center: Vec3::new(-gap / 2.0, 0.0, 0.0),
            radius: 1.6,
            charge: 0.0,
        },
        Atom {
            center: Vec3::new(gap / 2.0, 0.0, 0.0),
            radius: 1.4,
            charge: 0.0,
        },
    ]
}

/// Ring of atoms in the xy plane; fused at c=1 it forms a genus-1 surface.
pub fn atom_ring(n: usize, ring_radius: f64, atom_radius: f64) -> Vec<Atom> {
    (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            Atom {
                center: Vec3::new(ring_radius * a.cos(), ring_radius * a.sin(), 0.0),
                radius: atom_radius,
                charge: 0.0,
            }
        })
        .collect()
}

/// Compact random blob of `n` atoms at protein-like density
/// (~0.06 atoms/A^3), radii 1.1-1.9 A. Deterministic in `seed`.
pub fn blob(n: usize, seed: u64) -> Vec<Atom> {
    let mut rng = SplitMix::new(seed);
    let volume = n as f64 / 0.06;
    let r_ball = (volume / (4.0 / 3.0 * std::f64::consts::PI)).cbrt();
    let mut atoms = Vec::with_capacity(n);
    while atoms.len() < n {
        let p = Vec3::new(
            rng.uniform(-r_ball, r_ball),
            rng.uniform(-r_ball, r_ball),
            rng.uniform(-r_ball, r_ball),
        );
        if p.norm() > r_ball {
            continue;
        }
        atoms.push(Atom {
            center: p,
            radius: rng.uniform(1.1, 1.9),
            charge: rng.uniform(-0.8, 0.8),
        });
    }
    atoms
}

/// Replicate a cluster on a cubic lattice with `spacing` between copies.
/// Copy count is `copies`; lattice dimensions are chosen as compact as
/// possible. Used for linear-scaling measurements.
pub fn replicate(cluster: &[Atom], copies: usize, spacing: f64) -> Vec<Atom> {
    let per_axis = (copies as f64).cbrt().ceil() as usize;
    let mut out = Vec::with_capacity(cluster.len() * copies);
    let mut placed = 0;
    'outer: for k in 0..per_axis {
        for j in 0..per_axis {
            for i in 0..per_axis {
                if placed == copies {
                    break 'outer;
                }
                let shift = Vec3::new(
                    i as f64 * spacing,
                    j as f64 * spacing,
                    k as f64 * spacing,
                );
                out.extend(cluster.iter().map(|a| Atom {
                    center: a.center + shift,
                    radius: a.radius,
                    charge: a.charge,
                }));
                placed += 1;
            }
        }
    }
    out
}

/// Render atoms as PQR text (one ATOM record per atom).
pub fn to_pqr(atoms: &[Atom]) -> String {
    let mut s = String::new();
    for (i, a) in atoms.iter().enumerate() {
        s.push_str(&format!(
            "ATOM {:6} C   UNK A {:4} {:12.6} {:12.6} {:12.6} {:8.4} {:7.4}\n",
            i + 1,
            i / 8 + 1,
            a.center[0],
            a.center[1],
            a.center[2],
            a.charge,
            a.radius
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_is_stable() {
        let mut r = SplitMix::new(42);
        let a = r.next_u64();
        let mut r2 = SplitMix::new(42);
        assert_eq!(a, r2.next_u64());
    }

    #[test]
    fn blob_is_deterministic_and_sized() {
        let a = blob(100, 1);
        let b = blob(100, 1);
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn replicate_counts() {
        let c = blob(10, 2);
        assert_eq!(replicate(&c, 5, 30.0).len(), 50);
    }

    #[test]
    fn pqr_roundtrip() {
        let atoms = blob(20, 3);
        let parsed = crate::molmodel::parse_pqr(&to_pqr(&atoms)).unwrap();
        assert_eq!(parsed.len(), atoms.len());
        for (a, b) in atoms.iter().zip(&parsed) {
            assert!((a.center - b.center).norm() < 1e-5);
            assert!((a.radius - b.radius).abs() < 1e-4);
        }
    }
}
