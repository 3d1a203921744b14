//! Certified lower/upper bounds of the tensor polynomial on its cube.
//!
//! The 4x4x4 coefficient tensor is unfolded to a 4x16 matrix (rows indexed by
//! the z mode, columns by x slow / y fast), SVD-truncated at 99% singular
//! value energy, each retained right singular vector is reshaped to 4x4 and
//! SVD-truncated again, and the discarded content becomes the residue tensor.
//! Each retained rank term is a product of three univariate cubics, bounded
//! by exact cubic range computation and interval products; the residue is
//! bounded by its l1 norm since |L_j| <= 1 on [-1,1]. A cube is kept iff
//! L <= c <= U.

use crate::polyfit::CoeffTensor;

/// Closed interval [lo, hi].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Interval product via the four endpoint products.
    pub fn mul(&self, o: &Interval) -> Interval {
        let a = self.lo * o.lo;
        let b = self.lo * o.hi;
        let c = self.hi * o.lo;
        let d = self.hi * o.hi;
        Interval {
            lo: a.min(b).min(c.min(d)),
            hi: a.max(b).max(c.max(d)),
        }
    }

    /// Scale by a nonnegative factor.
    pub fn scale(&self, s: f64) -> Interval {
        debug_assert!(s >= 0.0);
        Interval {
            lo: self.lo * s,
            hi: self.hi * s,
        }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval {
            lo: self.lo + o.lo,
            hi: self.hi + o.hi,
        }
    }
}

/// Exact range of the cubic with Legendre coefficients `coeffs` on [-1,1]:
/// endpoint values plus interior roots of the derivative quadratic, with a
/// tiny outward guard against floating-point rounding.
pub fn bound_poly1d(coeffs: &[f64; 4]) -> Interval {
    // monomial form: L2 = (3t^2-1)/2, L3 = (5t^3-3t)/2
    let p0 = coeffs[0] - 0.5 * coeffs[2];
    let p1 = coeffs[1] - 1.5 * coeffs[3];
    let p2 = 1.5 * coeffs[2];
    let p3 = 2.5 * coeffs[3];
    let eval = |t: f64| p0 + t * (p1 + t * (p2 + t * p3));

    let mut lo = eval(-1.0).min(eval(1.0));
    let mut hi = eval(-1.0).max(eval(1.0));

    // derivative: p1 + 2 p2 t + 3 p3 t^2
    let scale = p1.abs().max(p2.abs()).max(p3.abs()).max(1.0);
    let (qa, qb, qc) = (3.0 * p3, 2.0 * p2, p1);
    let mut consider = |t: f64| {
        if t > -1.0 && t < 1.0 {
            let v = eval(t);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    };
    if qa.abs() <= 1e-14 * scale {
        if qb.abs() > 1e-14 * scale {
            consider(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            if q != 0.0 {
                consider(q / qa);
                consider(qc / q);
            } else {
                consider(0.0);
            }
        }
    }

    let guard = 1e-14 * (coeffs.iter().map(|c| c.abs()).sum::<f64>() + 1.0);
    Interval {
        lo: lo - guard,
        hi: hi + guard,
    }
}

// ---------------------------------------------------------------------------
// Small SVD via cyclic Jacobi on A A^T (4x4 symmetric)
// ---------------------------------------------------------------------------

/// Eigen-decomposition of a symmetric 4x4 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues descending and the matching eigenvector columns.
fn sym_eigen4(mut m: [[f64; 4]; 4]) -> ([f64; 4], [[f64; 4]; 4]) {
    let mut v = [[0.0; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let norm: f64 = m
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(1e-300);
    for _sweep in 0..30 {
        let mut off = 0.0;
        for p in 0..4 {
            for q in (p + 1)..4 {
                off += m[p][q] * m[p][q];
            }
        }
        if off.sqrt() <= 1e-14 * norm {
            break;
        }
        for p in 0..4 {
            for q in (p + 1)..4 {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..4 {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for r in v.iter_mut() {
                    let (vp, vq) = (r[p], r[q]);
                    r[p] = c * vp - s * vq;
                    r[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| m[b][b].partial_cmp(&m[a][a]).unwrap());
    let mut vals = [0.0; 4];
    let mut vecs = [[0.0; 4]; 4];
    for (slot, &src) in order.iter().enumerate() {
        vals[slot] = m[src][src];
        for r in 0..4 {
            vecs[r][slot] = v[r][src];
        }
    }
    (vals, vecs)
}

/// Thin SVD of a 4xN matrix A = sum_i sigma_i u_i v_i^T via the eigenproblem
/// of A A^T. Rows of `v` corresponding to negligible singular values are
/// zeroed (their terms contribute nothing).
fn svd_rows<const N: usize>(a: &[[f64; N]; 4]) -> ([f64; 4], [[f64; 4]; 4], [[f64; N]; 4]) {
    let mut gram = [[0.0; 4]; 4];
    for p in 0..4 {
        for q in 0..4 {
            let mut s = 0.0;
            for c in 0..N {
                s += a[p][c] * a[q][c];
            }
            gram[p][q] = s;
        }
    }
    let (vals, u) = sym_eigen4(gram);
    let mut sigma = [0.0; 4];
    for (s, &l) in sigma.iter_mut().zip(&vals) {
        *s = l.max(0.0).sqrt();
    }
    let floor = sigma[0] * 1e-14;
    let mut v = [[0.0; N]; 4];
    for i in 0..4 {
        if sigma[i] > floor && sigma[i] > 0.0 {
            for c in 0..N {
                let mut s = 0.0;
                for r in 0..4 {
                    s += u[r][i] * a[r][c];
                }
                v[i][c] = s / sigma[i];
            }
        } else {
            sigma[i] = 0.0;
        }
    }
    (sigma, u, v)
}

/// Smallest prefix reaching `energy` of the singular value sum; 0 for an
/// all-zero spectrum.
fn energy_rank(sigma: &[f64; 4], energy: f64) -> usize {
    let total: f64 = sigma.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (i, s) in sigma.iter().enumerate() {
        acc += s;
        if acc >= energy * total {
            return i + 1;
        }
    }
    4
}

/// One inner rank term of the second-level split.
#[derive(Clone, Copy, Debug)]
pub struct SubTerm {
    pub d: f64,
    /// Acts on the x mode.
    pub w: [f64; 4],
    /// Acts on the y mode.
    pub z: [f64; 4],
}

/// One outer rank term: sigma * u (z mode) tensor (sum of subterms).
#[derive(Clone, Debug)]
pub struct RankTerm {
    pub sigma: f64,
    pub u: [f64; 4],
    pub subterms: Vec<SubTerm>,
}

/// Two-level SVD split: main part (rank terms) plus residue tensor.
#[derive(Clone, Debug)]
pub struct SvdSplit {
    pub terms: Vec<RankTerm>,
    pub residue: [f64; 64],
    /// Sum of all first-level singular values (for energy diagnostics).
    pub sigma_total: f64,
    /// Sum of retained first-level singular values.
    pub sigma_retained: f64,
}

/// Singular-value energy thresholds for the two truncation levels.
#[derive(Clone, Copy, Debug)]
pub struct SplitConfig {
    pub energy1: f64,
    pub energy2: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            energy1: 0.99,
            energy2: 0.99,
        }
    }
}

#[inline]
fn flat(i: usize, j: usize, k: usize) -> usize {
    (i << 4) | (j << 2) | k
}

/// Split with the default 0.99/0.99 energy thresholds.
pub fn svd_split(a: &CoeffTensor) -> SvdSplit {
    svd_split_with(a, SplitConfig::default())
}

/// Two-level split of the coefficient tensor.
///
/// Unfolding convention: row r of the 4x16 matrix is the slice with z-mode
/// index r; column (i*4 + j) holds the (x=i, y=j) entry. The 16-vector rows
/// reshape back to 4x4 with x slow, y fast, which is the inverse map.
pub fn svd_split_with(a: &CoeffTensor, cfg: SplitConfig) -> SvdSplit {
    let mut unfolded = [[0.0; 16]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                unfolded[k][i * 4 + j] = a.data[flat(i, j, k)];
            }
        }
    }
    let (sigma, u, v) = svd_rows(&unfolded);
    let rank = energy_rank(&sigma, cfg.energy1);
    let sigma_total: f64 = sigma.iter().sum();
    let sigma_retained: f64 = sigma[..rank].iter().sum();

    let mut terms = Vec::with_capacity(rank);
    for t in 0..rank {
        if sigma[t] <= 0.0 {
            continue;
        }
        let mut vmat = [[0.0; 4]; 4];
        for p in 0..4 {
            for q in 0..4 {
                vmat[p][q] = v[t][p * 4 + q];
            }
        }
        let (d, w, z) = svd_rows(&vmat);
        let sub_rank = energy_rank(&d, cfg.energy2);
        let mut subterms = Vec::with_capacity(sub_rank);
        for s in 0..sub_rank {
            if d[s] <= 0.0 {
                continue;
            }
            let mut wv = [0.0; 4];
            for (r, wr) in wv.iter_mut().enumerate() {
                *wr = w[r][s];
            }
            subterms.push(SubTerm {
                d: d[s],
                w: wv,
                z: z[s],
            });
        }
        let mut uv = [0.0; 4];
        for (r, ur) in uv.iter_mut().enumerate() {
            *ur = u[r][t];
        }
        terms.push(RankTerm {
            sigma: sigma[t],
            u: uv,
            subterms,
        });
    }

    let mut residue = a.data;
    for term in &terms {
        for sub in &term.subterms {
            for i in 0..4 {
                for j in 0..4 {
                    let wz = term.sigma * sub.d * sub.w[i] * sub.z[j];
                    if wz == 0.0 {
                        continue;
                    }
                    for k in 0..4 {
                        residue[flat(i, j, k)] -= wz * term.u[k];
                    }
                }
            }
        }
    }

    SvdSplit {
        terms,
        residue,
        sigma_total,
        sigma_retained,
    }
}

impl SvdSplit {
    /// Rebuild main part plus residue (identity with the input up to fp).
    pub fn reconstruct(&self) -> [f64; 64] {
        let mut out = self.residue;
        for term in &self.terms {
            for sub in &term.subterms {
                for i in 0..4 {
                    for j in 0..4 {
                        let wz = term.sigma * sub.d * sub.w[i] * sub.z[j];
                        if wz == 0.0 {
                            continue;
                        }
                        for k in 0..4 {
                            out[flat(i, j, k)] += wz * term.u[k];
                        }
                    }
                }
            }
        }
        out
    }

    pub fn residue_l1(&self) -> f64 {
        self.residue.iter().map(|r| r.abs()).sum()
    }
}

/// Certified range of the tensor polynomial on its cube: interval-propagated
/// main part plus the residue l1 norm.
pub fn bound_tensor(s: &SvdSplit) -> Interval {
    let mut main = Interval::point(0.0);
    for term in &s.terms {
        let mut inner = Interval::point(0.0);
        for sub in &term.subterms {
            let bw = bound_poly1d(&sub.w);
            let bz = bound_poly1d(&sub.z);
            inner = inner.add(&bw.mul(&bz).scale(sub.d));
        }
        let bu = bound_poly1d(&term.u);
        main = main.add(&bu.mul(&inner).scale(term.sigma));
    }
    let r = s.residue_l1();
    Interval {
        lo: main.lo - r,
        hi: main.hi + r,
    }
}

/// Surface-intersection test: true iff L <= c <= U.
pub fn cube_may_intersect(s: &SvdSplit, isovalue: f64) -> bool {
    bound_tensor(s).contains(isovalue)
}
