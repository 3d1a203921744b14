//! Fold curves of a trilinear cell. Writing g = A(beta,gamma) + alpha *
//! B(beta,gamma) for an axis alpha, a fold is a solution of {A = c, B = 0}:
//! a straight segment parallel to alpha spanning the cube, lying entirely on
//! the surface. Folds of different axes meet at critical points.

use crate::geom::Vec3;
use crate::polyfit::TrilinearCell;

/// Straight fold segment parallel to `axis`.
#[derive(Clone, Debug)]
pub struct FoldSegment {
    pub axis: usize,
    /// The two fixed coordinates in the other axes, index order.
    pub fixed: [f64; 2],
    /// Local endpoints at axis = -1 and axis = +1.
    pub ends: [Vec3; 2],
    /// Interior critical points, ordered along the axis.
    pub criticals: Vec<Vec3>,
}

impl FoldSegment {
    fn point_at(&self, alpha: f64) -> Vec3 {
        let mut p = [0.0; 3];
        p[self.axis] = alpha;
        let (b, g) = other_axes(self.axis);
        p[b] = self.fixed[0];
        p[g] = self.fixed[1];
        Vec3(p)
    }
}

#[inline]
pub fn other_axes(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Coefficients of A - c and B as affine functions of beta with
/// gamma-dependent coefficients: A - c = p0 + p1 g + (q0 + q1 g) b,
/// B = r0 + r1 g + (s0 + s1 g) b.
fn axis_decomposition(cell: &TrilinearCell, axis: usize, c: f64) -> [f64; 8] {
    let a = &cell.coeffs;
    match axis {
        // g = (a0 + a2 y + a3 z + a6 yz) + x (a1 + a4 y + a5 z + a7 yz)
        0 => [
            a[0] - c,
            a[3],
            a[2],
            a[6],
            a[1],
            a[5],
            a[4],
            a[7],
        ],
        // g = (a0 + a1 x + a3 z + a5 xz) + y (a2 + a4 x + a6 z + a7 xz)
        1 => [
            a[0] - c,
            a[3],
            a[1],
            a[5],
            a[2],
            a[6],
            a[4],
            a[7],
        ],
        // g = (a0 + a1 x + a2 y + a4 xy) + z (a3 + a5 x + a6 y + a7 xy)
        _ => [
            a[0] - c,
            a[2],
            a[1],
            a[4],
            a[3],
            a[6],
            a[5],
            a[7],
        ],
    }
}

const CLIP: f64 = 1.0 - 1e-12;

/// Fold segments of `cell` parallel to `axis` for level `isovalue`.
/// Degenerate cases (g independent of the axis, fold families) yield none.
pub fn fold_segments(cell: &TrilinearCell, axis: usize, isovalue: f64) -> Vec<FoldSegment> {
    let [p0, p1, q0, q1, r0, r1, s0, s1] = axis_decomposition(cell, axis, isovalue);
    let scale: f64 = cell.coeffs.iter().map(|v| v.abs()).sum::<f64>() + isovalue.abs() + 1e-30;

    // g independent of axis: no folds
    if r0.abs() + r1.abs() + s0.abs() + s1.abs() <= 1e-13 * scale {
        return Vec::new();
    }

    // resultant of the two affines in beta: quadratic in gamma
    let c2 = p1 * s1 - q1 * r1;
    let c1 = p0 * s1 + p1 * s0 - q0 * r1 - q1 * r0;
    let c0 = p0 * s0 - q0 * r0;

    let mut roots: Vec<f64> = Vec::with_capacity(2);
    let qscale = c2.abs().max(c1.abs()).max(c0.abs()).max(1e-30);
    if c2.abs() <= 1e-13 * qscale {
        if c1.abs() > 1e-13 * qscale {
            roots.push(-c0 / c1);
        }
        // c2 ~ c1 ~ 0: either no solution or a degenerate family; skip
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (c1 + c1.signum() * sq);
            if q != 0.0 {
                roots.push(q / c2);
                roots.push(c0 / q);
            } else {
                roots.push(0.0);
            }
        }
    }
    roots.retain(|g| g.is_finite() && g.abs() <= CLIP);
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-10);

    let mut out = Vec::new();
    for gamma in roots {
        let qg = q0 + q1 * gamma;
        let sg = s0 + s1 * gamma;
        let pg = p0 + p1 * gamma;
        let rg = r0 + r1 * gamma;
        let mut beta = if qg.abs() >= sg.abs() {
            if qg.abs() <= 1e-13 * scale {
                continue; // degenerate family
            }
            -pg / qg
        } else {
            if sg.abs() <= 1e-13 * scale {
                continue;
            }
            -rg / sg
        };
        let mut gamma = gamma;
        // Newton polish on {A - c = 0, B = 0} in (beta, gamma)
        for _ in 0..2 {
            let f1 = (p0 + p1 * gamma) + (q0 + q1 * gamma) * beta;
            let f2 = (r0 + r1 * gamma) + (s0 + s1 * gamma) * beta;
            let j11 = q0 + q1 * gamma;
            let j12 = p1 + q1 * beta;
            let j21 = s0 + s1 * gamma;
            let j22 = r1 + s1 * beta;
            let det = j11 * j22 - j12 * j21;
            if det.abs() <= 1e-14 * scale * scale {
                break;
            }
            beta -= (f1 * j22 - f2 * j12) / det;
            gamma -= (f2 * j11 - f1 * j21) / det;
        }
        if !(beta.is_finite() && gamma.is_finite()) || beta.abs() > CLIP || gamma.abs() > CLIP {
            continue;
        }
        // residual check: every point of the segment must satisfy g = c and
        // dg/dalpha = 0
        let seg = FoldSegment {
            axis,
            fixed: [beta, gamma],
            ends: [Vec3::ZERO, Vec3::ZERO],
            criticals: Vec::new(),
        };
        let lo = seg.point_at(-1.0);
        let hi = seg.point_at(1.0);
        let ok = [lo, hi].iter().all(|p| {
            (cell.eval(p) - isovalue).abs() <= 1e-10 * scale
                && cell.grad(p)[axis].abs() <= 1e-10 * scale
        });
        if !ok {
            continue;
        }
        out.push(FoldSegment {
            ends: [lo, hi],
            ..seg
        });
    }
    // deterministic order
    out.sort_by(|a, b| {
        a.fixed
            .partial_cmp(&b.fixed)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out.dedup_by(|a, b| {
        (a.fixed[0] - b.fixed[0]).abs() < 1e-10 && (a.fixed[1] - b.fixed[1]).abs() < 1e-10
    });
    out
}

/// Pairwise intersections of fold segments of different axes. Each returned
/// point satisfies g = c and two vanishing partials to 1e-10.
pub fn critical_points(cell: &TrilinearCell, folds: &[FoldSegment], isovalue: f64) -> Vec<Vec3> {
    let scale: f64 = cell.coeffs.iter().map(|v| v.abs()).sum::<f64>() + isovalue.abs() + 1e-30;
    let tol_match = 1e-9;
    let mut pts: Vec<Vec3> = Vec::new();
    for (i, fa) in folds.iter().enumerate() {
        for fb in folds.iter().skip(i + 1) {
            if fa.axis == fb.axis {
                continue;
            }
            // the two folds fix complementary coordinates; they intersect
            // when their shared fixed coordinate agrees
            let mut coords = [f64::NAN; 3];
            let (ba, ga) = other_axes(fa.axis);
            let (bb, gb) = other_axes(fb.axis);
            coords[ba] = fa.fixed[0];
            coords[ga] = fa.fixed[1];
            let mut consistent = true;
            for (axis, v) in [(bb, fb.fixed[0]), (gb, fb.fixed[1])] {
                if coords[axis].is_nan() {
                    coords[axis] = v;
                } else if (coords[axis] - v).abs() <= tol_match {
                    coords[axis] = 0.5 * (coords[axis] + v);
                } else {
                    consistent = false;
                }
            }
            if !consistent || coords.iter().any(|v| v.is_nan() || v.abs() > 1.0) {
                continue;
            }
            let p = Vec3(coords);
            let g = cell.grad(&p);
            if (cell.eval(&p) - isovalue).abs() <= 1e-10 * scale
                && g[fa.axis].abs() <= 1e-10 * scale
                && g[fb.axis].abs() <= 1e-10 * scale
            {
                pts.push(p);
            }
        }
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-9);
    pts
}

/// Attach critical points to the folds they lie on, ordered along each fold.
pub fn attach_criticals(folds: &mut [FoldSegment], criticals: &[Vec3]) {
    for f in folds.iter_mut() {
        let (b, g) = other_axes(f.axis);
        let mut on: Vec<Vec3> = criticals
            .iter()
            .filter(|p| {
                (p[b] - f.fixed[0]).abs() < 1e-8 && (p[g] - f.fixed[1]).abs() < 1e-8
            })
            .copied()
            .collect();
        let axis = f.axis;
        on.sort_by(|x, y| x[axis].partial_cmp(&y[axis]).unwrap());
        f.criticals = on;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;
    use crate::synth::SplitMix;

    fn saddle_cell() -> TrilinearCell {
        // g = z - xy
        let mut corners = [0.0; 8];
        for (bits, c) in corners.iter_mut().enumerate() {
            let x = if bits & 1 == 1 { 1.0 } else { -1.0 };
            let y = if bits & 2 == 2 { 1.0 } else { -1.0 };
            let z = if bits & 4 == 4 { 1.0 } else { -1.0 };
            *c = z - x * y;
        }
        TrilinearCell::from_corners(
            corners,
            Aabb {
                min: Vec3::new(-1.0, -1.0, -1.0),
                max: Vec3::new(1.0, 1.0, 1.0),
            },
        )
    }

    #[test]
    fn saddle_folds() {
        let cell = saddle_cell();
        // axis x: A = z, B = -y -> segment {y=0, z=0}
        let fx = fold_segments(&cell, 0, 0.0);
        assert_eq!(fx.len(), 1);
        assert!(fx[0].fixed[0].abs() < 1e-12 && fx[0].fixed[1].abs() < 1e-12);
        assert!((fx[0].ends[0] - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((fx[0].ends[1] - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        // axis z: B = 1, never zero -> none
        let fz = fold_segments(&cell, 2, 0.0);
        assert!(fz.is_empty());
    }

    #[test]
    fn saddle_critical_point() {
        let cell = saddle_cell();
        let mut folds = fold_segments(&cell, 0, 0.0);
        folds.extend(fold_segments(&cell, 1, 0.0));
        folds.extend(fold_segments(&cell, 2, 0.0));
        let crits = critical_points(&cell, &folds, 0.0);
        assert_eq!(crits.len(), 1);
        assert!(crits[0].norm() < 1e-10);
    }

    #[test]
    fn no_folds_no_criticals() {
        // g = x: no folds at all
        let mut corners = [0.0; 8];
        for (bits, c) in corners.iter_mut().enumerate() {
            *c = if bits & 1 == 1 { 1.0 } else { -1.0 };
        }
        let cell = TrilinearCell::from_corners(
            corners,
            Aabb {
                min: Vec3::new(-1.0, -1.0, -1.0),
                max: Vec3::new(1.0, 1.0, 1.0),
            },
        );
        for axis in 0..3 {
            assert!(fold_segments(&cell, axis, 0.0).is_empty());
        }
        assert!(critical_points(&cell, &[], 0.0).is_empty());
    }

    #[test]
    fn random_cells_fold_residuals_and_completeness() {
        let mut rng = SplitMix::new(13);
        let bb = Aabb {
            min: Vec3::new(-1.0, -1.0, -1.0),
            max: Vec3::new(1.0, 1.0, 1.0),
        };
        for _ in 0..200 {
            let mut corners = [0.0; 8];
            for c in &mut corners {
                *c = rng.uniform(-2.0, 2.0);
            }
            let cell = TrilinearCell::from_corners(corners, bb);
            let c = 0.1;
            for axis in 0..3 {
                let folds = fold_segments(&cell, axis, c);
                for f in &folds {
                    for t in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                        let p = f.point_at(t);
                        assert!((cell.eval(&p) - c).abs() < 1e-10 * 10.0);
                        assert!(cell.grad(&p)[axis].abs() < 1e-10 * 10.0);
                    }
                }
                // completeness: brute-force bracketing on a dense gamma grid
                let [p0, p1, q0, q1, r0, r1, s0, s1] = axis_decomposition(&cell, axis, c);
                if r0.abs() + r1.abs() + s0.abs() + s1.abs() < 1e-12 {
                    continue;
                }
                let res = |g: f64| (p0 + p1 * g) * (s0 + s1 * g) - (q0 + q1 * g) * (r0 + r1 * g);
                let n = 4000;
                let mut prev = res(-1.0);
                for i in 1..=n {
                    let g = -1.0 + 2.0 * i as f64 / n as f64;
                    let cur = res(g);
                    if prev * cur < 0.0 {
                        // bracketed root; refine by bisection
                        let (mut lo, mut hi) = (g - 2.0 / n as f64, g);
                        for _ in 0..60 {
                            let mid = 0.5 * (lo + hi);
                            if res(lo) * res(mid) <= 0.0 {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                        let groot = 0.5 * (lo + hi);
                        let qg = q0 + q1 * groot;
                        let sg = s0 + s1 * groot;
                        let beta = if qg.abs() >= sg.abs() {
                            -(p0 + p1 * groot) / qg
                        } else {
                            -(r0 + r1 * groot) / sg
                        };
                        // only in-range, well-conditioned roots must be found
                        if beta.is_finite()
                            && beta.abs() <= 1.0 - 1e-6
                            && groot.abs() <= 1.0 - 1e-6
                            && qg.abs().max(sg.abs()) > 1e-6
                        {
                            let found = folds.iter().any(|f| {
                                (f.fixed[0] - beta).abs() < 1e-6
                                    && (f.fixed[1] - groot).abs() < 1e-6
                            });
                            assert!(
                                found,
                                "missed fold axis {axis} at ({beta}, {groot}); have {folds:?}"
                            );
                        }
                    }
                    prev = cur;
                }
            }
        }
    }

    #[test]
    fn random_criticals_satisfy_residuals() {
        let mut rng = SplitMix::new(29);
        let bb = Aabb {
            min: Vec3::new(-1.0, -1.0, -1.0),
            max: Vec3::new(1.0, 1.0, 1.0),
        };
        let mut total = 0;
        for _ in 0..300 {
            let mut corners = [0.0; 8];
            for c in &mut corners {
                *c = rng.uniform(-2.0, 2.0);
            }
            let cell = TrilinearCell::from_corners(corners, bb);
            let c = 0.05;
            let mut folds = Vec::new();
            for axis in 0..3 {
                folds.extend(fold_segments(&cell, axis, c));
            }
            let crits = critical_points(&cell, &folds, c);
            total += crits.len();
            for p in &crits {
                let grads = cell.grad(p);
                assert!((cell.eval(p) - c).abs() < 1e-9);
                // at least two partials vanish
                let mut small = 0;
                for a in 0..3 {
                    if grads[a].abs() < 1e-8 {
                        small += 1;
                    }
                }
                assert!(small >= 2, "grad {grads:?}");
            }
        }
        assert!(total > 0, "expected at least one critical point in corpus");
    }
}
