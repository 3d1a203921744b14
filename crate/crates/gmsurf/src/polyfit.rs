//! Per-cube degree-3 Legendre tensor approximation of the Gaussian field.
//!
//! For a cube and the atoms whose influence balls touch it, each atom factor
//! exp(-D(t - x_i)^2) is least-squares projected per axis onto L_0..L_3, then
//! corrected on the two highest modes so both interval endpoints are
//! reproduced exactly. The corrected per-axis coefficient vectors combine
//! into a 4x4x4 tensor; the tensor is evaluated with k-mode products and can
//! be collapsed to the trilinear interpolant of its corner values.

use crate::geom::{Aabb, Vec3};
use crate::molmodel::{GaussianField, NeighborGrid};
use thiserror::Error;

/// Legendre polynomials L_0..L_3 at t.
#[inline]
pub fn legendre4(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [1.0, t, 1.5 * t2 - 0.5, 2.5 * t2 * t - 1.5 * t]
}

/// Derivatives L_0'..L_3' at t.
#[inline]
pub fn legendre4_deriv(t: f64) -> [f64; 4] {
    [0.0, 1.0, 3.0 * t, 7.5 * t * t - 1.5]
}

/// 16-point Gauss-Legendre nodes (positive half) and weights on [-1,1].
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_440_2,
    0.281_603_550_779_258_913_2,
    0.458_016_777_657_227_386_3,
    0.617_876_244_402_643_748_4,
    0.755_404_408_355_003_033_9,
    0.865_631_202_387_831_743_9,
    0.944_575_023_073_232_576_1,
    0.989_400_934_991_649_932_6,
];
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_496_3,
    0.182_603_415_044_923_588_9,
    0.169_156_519_395_002_538_2,
    0.149_595_988_816_576_732_1,
    0.124_628_971_255_533_872_1,
    0.095_158_511_682_492_784_8,
    0.062_253_523_938_647_892_9,
    0.027_152_459_411_754_094_9,
];

/// Apply the 16-point rule to f on [-1,1].
pub fn gauss16(mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut s = 0.0;
    for i in 0..8 {
        s += GL16_W[i] * (f(GL16_X[i]) + f(-GL16_X[i]));
    }
    s
}

#[derive(Debug, Error)]
pub enum PolyfitError {
    #[error("degenerate interval [{0}, {1}]")]
    DegenerateInterval(f64, f64),
}

/// Corrected Legendre coefficients of one atom factor on one axis interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisCoeffs {
    pub c: [f64; 4],
}

impl AxisCoeffs {
    /// Evaluate at mapped coordinate s in [-1,1].
    pub fn eval(&self, s: f64) -> f64 {
        let l = legendre4(s);
        self.c.iter().zip(&l).map(|(a, b)| a * b).sum()
    }
}

/// Raw least-squares projection of `f` (given in interval coordinates) onto
/// L_0..L_3 over [a,b], including the (2j+1)/2 orthonormalization factor.
/// Test hook: any integrand can be projected, not just the Gaussian factor.
pub fn project_fn_raw(
    f: &dyn Fn(f64) -> f64,
    interval: [f64; 2],
) -> Result<[f64; 4], PolyfitError> {
    let [a, b] = interval;
    if !(b - a > 1e-12) {
        return Err(PolyfitError::DegenerateInterval(a, b));
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut c = [0.0; 4];
    for i in 0..8 {
        for s in [GL16_X[i], -GL16_X[i]] {
            let v = GL16_W[i] * f(mid + half * s);
            let l = legendre4(s);
            for (cj, lj) in c.iter_mut().zip(&l) {
                *cj += v * lj;
            }
        }
    }
    for (j, cj) in c.iter_mut().enumerate() {
        *cj *= (2 * j + 1) as f64 / 2.0;
    }
    Ok(c)
}

/// Add the two endpoint-correction terms (on L_2 and L_3) so the polynomial
/// matches `fa` at the left endpoint and `fb` at the right endpoint exactly.
pub fn correct_endpoints(mut c: [f64; 4], fa: f64, fb: f64) -> [f64; 4] {
    // L_j(1) = 1, L_j(-1) = (-1)^j
    let p_hi = c[0] + c[1] + c[2] + c[3];
    let p_lo = c[0] - c[1] + c[2] - c[3];
    let d_hi = fb - p_hi;
    let d_lo = fa - p_lo;
    c[2] += 0.5 * (d_hi + d_lo);
    c[3] += 0.5 * (d_hi - d_lo);
    c
}

/// Corrected projection of the atom factor exp(-decay*(t - atom_coord)^2)
/// over `interval`.
pub fn project_axis(
    atom_coord: f64,
    decay: f64,
    interval: [f64; 2],
) -> Result<AxisCoeffs, PolyfitError> {
    let f = move |t: f64| (-decay * (t - atom_coord) * (t - atom_coord)).exp();
    let raw = project_fn_raw(&f, interval)?;
    let c = correct_endpoints(raw, f(interval[0]), f(interval[1]));
    Ok(AxisCoeffs { c })
}

/// 4x4x4 Legendre coefficient tensor of the corrected cubic on one cube.
/// Index order is (x-mode, y-mode, z-mode).
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffTensor {
    pub data: [f64; 64],
    pub bounds: Aabb,
}

impl CoeffTensor {
    pub fn zero(bounds: Aabb) -> Self {
        CoeffTensor {
            data: [0.0; 64],
            bounds,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i << 4) | (j << 2) | k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i << 4) | (j << 2) | k] = v;
    }

    /// l1 norm of coefficients with any mode index >= 2; bounds the sup of
    /// what the trilinear collapse discards (|L_j| <= 1 on [-1,1]).
    pub fn high_order_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    if i.max(j).max(k) >= 2 {
                        s += self.get(i, j, k).abs();
                    }
                }
            }
        }
        s
    }
}

/// Build the coefficient tensor for `bounds` from all atoms whose influence
/// balls intersect the cube. Empty neighbor set yields the zero tensor.
pub fn assemble_tensor(field: &GaussianField, grid: &NeighborGrid, bounds: Aabb) -> CoeffTensor {
    let neighbors = grid.atoms_intersecting_box(field, &bounds);
    assemble_tensor_for(field, &neighbors, bounds)
}

/// Same, with the neighbor set supplied by the caller (ascending indices).
pub fn assemble_tensor_for(field: &GaussianField, neighbors: &[u32], bounds: Aabb) -> CoeffTensor {
    let mut t = CoeffTensor::zero(bounds);
    let ix = [bounds.min[0], bounds.max[0]];
    let iy = [bounds.min[1], bounds.max[1]];
    let iz = [bounds.min[2], bounds.max[2]];
    for &idx in neighbors {
        let a = &field.atoms[idx as usize];
        let scale = (field.decay * a.radius * a.radius).exp();
        let bx = project_axis(a.center[0], field.decay, ix).expect("nondegenerate cube");
        let by = project_axis(a.center[1], field.decay, iy).expect("nondegenerate cube");
        let bz = project_axis(a.center[2], field.decay, iz).expect("nondegenerate cube");
        for i in 0..4 {
            let sx = scale * bx.c[i];
            if sx == 0.0 {
                continue;
            }
            for j in 0..4 {
                let sxy = sx * by.c[j];
                for k in 0..4 {
                    t.data[(i << 4) | (j << 2) | k] += sxy * bz.c[k];
                }
            }
        }
    }
    t
}

/// Evaluate the tensor polynomial at a point in the cube's [-1,1]^3 frame
/// via successive mode contractions.
pub fn eval_tensor(t: &CoeffTensor, p_local: &Vec3) -> f64 {
    let lx = legendre4(p_local[0]);
    let ly = legendre4(p_local[1]);
    let lz = legendre4(p_local[2]);
    let mut acc = 0.0;
    for i in 0..4 {
        let mut row = 0.0;
        for j in 0..4 {
            let base = (i << 4) | (j << 2);
            let inner = t.data[base] * lz[0]
                + t.data[base + 1] * lz[1]
                + t.data[base + 2] * lz[2]
                + t.data[base + 3] * lz[3];
            row += ly[j] * inner;
        }
        acc += lx[i] * row;
    }
    acc
}

/// Gradient of the tensor polynomial in local coordinates.
pub fn eval_tensor_grad(t: &CoeffTensor, p_local: &Vec3) -> Vec3 {
    let l = [
        legendre4(p_local[0]),
        legendre4(p_local[1]),
        legendre4(p_local[2]),
    ];
    let d = [
        legendre4_deriv(p_local[0]),
        legendre4_deriv(p_local[1]),
        legendre4_deriv(p_local[2]),
    ];
    let mut g = [0.0; 3];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                let a = t.data[(i << 4) | (j << 2) | k];
                if a == 0.0 {
                    continue;
                }
                g[0] += a * d[0][i] * l[1][j] * l[2][k];
                g[1] += a * l[0][i] * d[1][j] * l[2][k];
                g[2] += a * l[0][i] * l[1][j] * d[2][k];
            }
        }
    }
    Vec3(g)
}

/// Trilinear interpolant on a cube: the 8 corner values (bit order
/// x + 2y + 4z) and the monomial coefficients of
/// g = a0 + a1 x + a2 y + a3 z + a4 xy + a5 xz + a6 yz + a7 xyz on [-1,1]^3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrilinearCell {
    pub corners: [f64; 8],
    pub coeffs: [f64; 8],
    pub bounds: Aabb,
}

impl TrilinearCell {
    /// Build from corner values; the monomial coefficients are the discrete
    /// Walsh transform of the corners, so corner reconstruction is exact.
    pub fn from_corners(corners: [f64; 8], bounds: Aabb) -> Self {
        let mut coeffs = [0.0; 8];
        for (bits, &v) in corners.iter().enumerate() {
            let sx = if bits & 1 == 1 { 1.0 } else { -1.0 };
            let sy = if bits & 2 == 2 { 1.0 } else { -1.0 };
            let sz = if bits & 4 == 4 { 1.0 } else { -1.0 };
            coeffs[0] += v;
            coeffs[1] += v * sx;
            coeffs[2] += v * sy;
            coeffs[3] += v * sz;
            coeffs[4] += v * sx * sy;
            coeffs[5] += v * sx * sz;
            coeffs[6] += v * sy * sz;
            coeffs[7] += v * sx * sy * sz;
        }
        for c in &mut coeffs {
            *c *= 0.125;
        }
        TrilinearCell {
            corners,
            coeffs,
            bounds,
        }
    }

    /// g at a point in [-1,1]^3.
    pub fn eval(&self, p: &Vec3) -> f64 {
        let [x, y, z] = p.0;
        let a = &self.coeffs;
        a[0] + a[1] * x
            + a[2] * y
            + a[3] * z
            + a[4] * x * y
            + a[5] * x * z
            + a[6] * y * z
            + a[7] * x * y * z
    }

    /// Gradient of g in local coordinates.
    pub fn grad(&self, p: &Vec3) -> Vec3 {
        let [x, y, z] = p.0;
        let a = &self.coeffs;
        Vec3([
            a[1] + a[4] * y + a[5] * z + a[7] * y * z,
            a[2] + a[4] * x + a[6] * z + a[7] * x * z,
            a[3] + a[5] * x + a[6] * y + a[7] * x * y,
        ])
    }
}

/// Collapse the final leaf tensor to the trilinear interpolant of its corner
/// values.
pub fn collapse_trilinear(t: &CoeffTensor) -> TrilinearCell {
    let mut corners = [0.0; 8];
    for (bits, c) in corners.iter_mut().enumerate() {
        let p = Vec3::new(
            if bits & 1 == 1 { 1.0 } else { -1.0 },
            if bits & 2 == 2 { 1.0 } else { -1.0 },
            if bits & 4 == 4 { 1.0 } else { -1.0 },
        );
        *c = eval_tensor(t, &p);
    }
    TrilinearCell::from_corners(corners, t.bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molmodel::Atom;
    use crate::synth::SplitMix;

    fn box3(lo: f64, hi: f64) -> Aabb {
        Aabb {
            min: Vec3::new(lo, lo, lo),
            max: Vec3::new(hi, hi, hi),
        }
    }

    #[test]
    fn gauss16_weights_and_degree() {
        assert!((gauss16(|_| 1.0) - 2.0).abs() < 1e-15);
        assert!((gauss16(|t| t * t) - 2.0 / 3.0).abs() < 1e-15);
        let t30 = gauss16(|t| t.powi(30));
        assert!((t30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn projection_reproduces_linear() {
        // f(t) = t on [-1,1] -> (0,1,0,0)
        let c = project_fn_raw(&|t| t, [-1.0, 1.0]).unwrap();
        assert!((c[0]).abs() < 1e-15);
        assert!((c[1] - 1.0).abs() < 1e-15);
        assert!((c[2]).abs() < 1e-15);
        assert!((c[3]).abs() < 1e-15);
    }

    #[test]
    fn projection_reproduces_cubics_exactly() {
        // any cubic is its own projection; correction terms vanish
        let f = |t: f64| 0.3 - 1.2 * t + 0.7 * t * t + 0.25 * t * t * t;
        let raw = project_fn_raw(&f, [2.0, 5.0]).unwrap();
        let c = correct_endpoints(raw, f(2.0), f(5.0));
        for (a, b) in raw.iter().zip(&c) {
            assert!((a - b).abs() < 1e-12);
        }
        let ax = AxisCoeffs { c };
        let mut rng = SplitMix::new(11);
        for _ in 0..30 {
            let s = rng.uniform(-1.0, 1.0);
            let t = 3.5 + 1.5 * s;
            assert!((ax.eval(s) - f(t)).abs() < 1e-11);
        }
    }

    #[test]
    fn raw_alpha0_matches_quadrature_oracle() {
        // x_i = 0, D = 1, [-1,1]: alpha_0 = 0.5 * integral of exp(-t^2)
        let raw = project_fn_raw(&|t| (-t * t).exp(), [-1.0, 1.0]).unwrap();
        // oracle: composite Simpson with 4000 panels
        let n = 4000;
        let h = 2.0 / n as f64;
        let f = |t: f64| (-t * t).exp();
        let mut simpson = f(-1.0) + f(1.0);
        for i in 1..n {
            let t = -1.0 + i as f64 * h;
            simpson += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
        }
        simpson *= h / 3.0;
        let oracle = 0.5 * simpson;
        assert!((raw[0] - oracle).abs() < 1e-12);
        assert!((raw[0] - 0.746_824_132_812_427).abs() < 1e-12);
        // erf cross-check
        let erf_val = 0.5 * std::f64::consts::PI.sqrt() * libm::erf(1.0);
        assert!((raw[0] - erf_val).abs() < 1e-13);
    }

    #[test]
    fn endpoint_exactness_holds_everywhere() {
        let mut rng = SplitMix::new(5);
        for _ in 0..200 {
            let xi = rng.uniform(-6.0, 6.0);
            let d = rng.uniform(0.3, 3.0);
            let a = rng.uniform(-5.0, 5.0);
            let b = a + rng.uniform(0.05, 4.0);
            let ax = project_axis(xi, d, [a, b]).unwrap();
            let fa = (-d * (a - xi) * (a - xi)).exp();
            let fb = (-d * (b - xi) * (b - xi)).exp();
            assert!((ax.eval(-1.0) - fa).abs() <= 1e-12 * fa.max(1.0));
            assert!((ax.eval(1.0) - fb).abs() <= 1e-12 * fb.max(1.0));
        }
    }

    #[test]
    fn degenerate_interval_rejected() {
        assert!(project_axis(0.0, 1.0, [1.0, 1.0]).is_err());
    }

    #[test]
    fn empty_neighbor_set_gives_zero_tensor() {
        let field = GaussianField::new(crate::synth::single_atom(2.0), 1.0, 1.0);
        let grid = NeighborGrid::build(&field);
        let t = assemble_tensor(&field, &grid, box3(50.0, 52.0));
        assert_eq!(t.data, [0.0; 64]);
        assert_eq!(eval_tensor(&t, &Vec3::ZERO), 0.0);
    }

    #[test]
    fn small_cube_tensor_tracks_field() {
        // one atom, cube centered on it, edge 0.5
        let field = GaussianField::new(crate::synth::single_atom(2.0), 1.0, 1.0);
        let grid = NeighborGrid::build(&field);
        let bounds = Aabb {
            min: Vec3::new(-0.25, -0.25, -0.25),
            max: Vec3::new(0.25, 0.25, 0.25),
        };
        let t = assemble_tensor(&field, &grid, bounds);
        let mut rng = SplitMix::new(9);
        for _ in 0..20 {
            let l = Vec3::new(
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
            );
            let w = Vec3::new(0.25 * l[0], 0.25 * l[1], 0.25 * l[2]);
            let (phi, _) = crate::molmodel::eval_field(&field, &grid, &w);
            let approx = eval_tensor(&t, &l);
            assert!(
                (approx - phi).abs() <= (1e-3 * phi.abs()).max(1e-6),
                "{approx} vs {phi}"
            );
        }
    }

    #[test]
    fn corner_evaluation_matches_truncated_field() {
        // 5-atom system; tight cutoff so truncation noise is << 1e-9
        let atoms = vec![
            Atom { center: Vec3::new(0.0, 0.0, 0.0), radius: 1.7, charge: 0.0 },
            Atom { center: Vec3::new(2.5, 0.3, -0.4), radius: 1.5, charge: 0.0 },
            Atom { center: Vec3::new(-1.5, 2.0, 0.6), radius: 1.3, charge: 0.0 },
            Atom { center: Vec3::new(0.5, -2.2, 1.2), radius: 1.8, charge: 0.0 },
            Atom { center: Vec3::new(1.0, 1.5, 2.0), radius: 1.2, charge: 0.0 },
        ];
        let field = GaussianField::new(atoms, 1.0, 1.0).with_cutoff(1e-13);
        let grid = NeighborGrid::build(&field);
        let bounds = box3(0.9, 2.1);
        let t = assemble_tensor(&field, &grid, bounds);
        for bits in 0..8usize {
            let l = Vec3::new(
                if bits & 1 == 1 { 1.0 } else { -1.0 },
                if bits & 2 == 2 { 1.0 } else { -1.0 },
                if bits & 4 == 4 { 1.0 } else { -1.0 },
            );
            let w = Vec3::new(
                if bits & 1 == 1 { 2.1 } else { 0.9 },
                if bits & 2 == 2 { 2.1 } else { 0.9 },
                if bits & 4 == 4 { 2.1 } else { 0.9 },
            );
            let (phi, _) = crate::molmodel::eval_field(&field, &grid, &w);
            let v = eval_tensor(&t, &l);
            assert!((v - phi).abs() <= 1e-9 * phi.abs().max(1e-3), "{v} vs {phi}");
        }
    }

    #[test]
    fn eval_tensor_basics_and_naive_oracle() {
        let mut t = CoeffTensor::zero(box3(-1.0, 1.0));
        t.set(0, 0, 0, 5.0);
        assert!((eval_tensor(&t, &Vec3::new(0.3, -0.7, 0.9)) - 5.0).abs() < 1e-15);
        let mut t2 = CoeffTensor::zero(box3(-1.0, 1.0));
        t2.set(1, 0, 0, 1.0);
        assert!((eval_tensor(&t2, &Vec3::new(0.42, -0.7, 0.9)) - 0.42).abs() < 1e-15);

        let mut rng = SplitMix::new(21);
        for _ in 0..20 {
            let mut t = CoeffTensor::zero(box3(-1.0, 1.0));
            for v in t.data.iter_mut() {
                *v = rng.uniform(-1.0, 1.0);
            }
            let p = Vec3::new(
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
            );
            // naive triple loop oracle
            let lx = legendre4(p[0]);
            let ly = legendre4(p[1]);
            let lz = legendre4(p[2]);
            let mut naive = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    for k in 0..4 {
                        naive += t.get(i, j, k) * lx[i] * ly[j] * lz[k];
                    }
                }
            }
            assert!((eval_tensor(&t, &p) - naive).abs() < 1e-13);
        }
    }

    #[test]
    fn tensor_gradient_matches_fd() {
        let mut rng = SplitMix::new(33);
        let mut t = CoeffTensor::zero(box3(-1.0, 1.0));
        for v in t.data.iter_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let p = Vec3::new(0.2, -0.4, 0.6);
        let g = eval_tensor_grad(&t, &p);
        let h = 1e-6;
        for axis in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi.0[axis] += h;
            lo.0[axis] -= h;
            let fd = (eval_tensor(&t, &hi) - eval_tensor(&t, &lo)) / (2.0 * h);
            assert!((g[axis] - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn collapse_constant_and_linear() {
        let mut t = CoeffTensor::zero(box3(-1.0, 1.0));
        t.set(0, 0, 0, 3.25);
        let cell = collapse_trilinear(&t);
        assert_eq!(cell.coeffs[0], 3.25);
        for a in &cell.coeffs[1..] {
            assert_eq!(*a, 0.0);
        }

        let mut t2 = CoeffTensor::zero(box3(-1.0, 1.0));
        t2.set(1, 0, 0, 1.0);
        let cell2 = collapse_trilinear(&t2);
        assert!((cell2.coeffs[1] - 1.0).abs() < 1e-15);
        let others: f64 = cell2
            .coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 1)
            .map(|(_, v)| v.abs())
            .sum();
        assert!(others < 1e-15);
    }

    #[test]
    fn collapse_corner_identity() {
        let mut rng = SplitMix::new(17);
        for _ in 0..20 {
            let mut corners = [0.0; 8];
            for c in &mut corners {
                *c = rng.uniform(-2.0, 2.0);
            }
            let cell = TrilinearCell::from_corners(corners, box3(-1.0, 1.0));
            for (bits, &v) in corners.iter().enumerate() {
                let p = Vec3::new(
                    if bits & 1 == 1 { 1.0 } else { -1.0 },
                    if bits & 2 == 2 { 1.0 } else { -1.0 },
                    if bits & 4 == 4 { 1.0 } else { -1.0 },
                );
                assert!((cell.eval(&p) - v).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn collapse_error_bounded_by_stopping_norm_on_leaf() {
        // 2-atom field; shrink a cube until the high-order norm is under
        // tau*c, then check the trilinear against the tensor on a dense grid.
        let field = GaussianField::new(crate::synth::two_atoms(2.4), 1.0, 1.0);
        let grid = NeighborGrid::build(&field);
        let tau = 1e-2;
        let mut lo = Vec3::new(1.3, 0.2, -0.4);
        let mut edge = 1.6;
        let mut tensor;
        loop {
            let b = Aabb {
                min: lo,
                max: lo + Vec3::new(edge, edge, edge),
            };
            tensor = assemble_tensor(&field, &grid, b);
            if tensor.high_order_norm() <= tau * field.isovalue {
                break;
            }
            edge *= 0.5;
            lo = lo + Vec3::new(edge * 0.5, edge * 0.5, edge * 0.5);
            assert!(edge > 1e-3, "failed to converge to a leaf");
        }
        let cell = collapse_trilinear(&tensor);
        let mut max_err: f64 = 0.0;
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    let p = Vec3::new(
                        -1.0 + 2.0 * i as f64 / 9.0,
                        -1.0 + 2.0 * j as f64 / 9.0,
                        -1.0 + 2.0 * k as f64 / 9.0,
                    );
                    max_err = max_err.max((cell.eval(&p) - eval_tensor(&tensor, &p)).abs());
                }
            }
        }
        assert!(
            max_err <= tau * field.isovalue,
            "max |g - P| = {max_err} vs tau*c = {tau}"
        );
    }

    #[test]
    fn adjacent_cubes_agree_on_shared_face() {
        // C0 claim: same-size x-adjacent cubes restrict identically on the
        // shared face, within 1e-9 relative.
        let field = GaussianField::new(crate::synth::two_atoms(2.8), 1.0, 1.0).with_cutoff(1e-12);
        let grid = NeighborGrid::build(&field);
        let e = 0.8;
        let left = Aabb {
            min: Vec3::new(0.4, -0.4, -0.4),
            max: Vec3::new(0.4 + e, 0.4, 0.4),
        };
        let right = Aabb {
            min: Vec3::new(0.4 + e, -0.4, -0.4),
            max: Vec3::new(0.4 + 2.0 * e, 0.4, 0.4),
        };
        let tl = assemble_tensor(&field, &grid, left);
        let tr = assemble_tensor(&field, &grid, right);
        let mut rng = SplitMix::new(77);
        for _ in 0..50 {
            let y = rng.uniform(-1.0, 1.0);
            let z = rng.uniform(-1.0, 1.0);
            let vl = eval_tensor(&tl, &Vec3::new(1.0, y, z));
            let vr = eval_tensor(&tr, &Vec3::new(-1.0, y, z));
            assert!(
                (vl - vr).abs() <= 1e-9 * vl.abs().max(1e-3),
                "{vl} vs {vr}"
            );
        }
    }
}
