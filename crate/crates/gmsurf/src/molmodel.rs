//! Molecular model: PQR parsing, the Gaussian field, and the neighbor grid
//! that makes field evaluation local.
//!
//! The field is phi(x) = sum_i exp(-D * (|x - x_i|^2 - r_i^2)); the molecular
//! surface is the level set phi = c with interior phi > c.

use crate::geom::{Aabb, Vec3};
use std::collections::HashMap;
use thiserror::Error;

/// One atom record from a PQR file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    /// Center, Angstrom.
    pub center: Vec3,
    /// Radius r_i, Angstrom. Always > 0.
    pub radius: f64,
    /// Partial charge, e. Parsed but unused by meshing.
    pub charge: f64,
}

#[derive(Debug, Error)]
pub enum PqrError {
    #[error("line {line}: malformed numeric field {field:?}")]
    BadNumber { line: usize, field: String },
    #[error("line {line}: record has too few fields")]
    TooFewFields { line: usize },
    #[error("line {line}: rejected record, radius {radius} <= 0")]
    NonPositiveRadius { line: usize, radius: f64 },
    #[error("no ATOM/HETATM records found")]
    Empty,
}

/// Parse PQR text. Only ATOM/HETATM records are read; a record is tokenized
/// on whitespace, the last two tokens are charge and radius, and the three
/// tokens before them are x, y, z. This tolerates the optional chain-ID
/// column and other field-count variations seen in the wild.
pub fn parse_pqr(text: &str) -> Result<Vec<Atom>, PqrError> {
    let mut atoms = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let kind = tok.next().unwrap_or("");
        if kind != "ATOM" && kind != "HETATM" {
            continue;
        }
        let rest: Vec<&str> = tok.collect();
        if rest.len() < 5 {
            return Err(PqrError::TooFewFields { line: line_no });
        }
        let tail = &rest[rest.len() - 5..];
        let mut vals = [0.0f64; 5];
        for (v, field) in vals.iter_mut().zip(tail.iter()) {
            *v = field.parse().map_err(|_| PqrError::BadNumber {
                line: line_no,
                field: field.to_string(),
            })?;
        }
        let [x, y, z, charge, radius] = vals;
        if radius <= 0.0 {
            return Err(PqrError::NonPositiveRadius {
                line: line_no,
                radius,
            });
        }
        atoms.push(Atom {
            center: Vec3::new(x, y, z),
            radius,
            charge,
        });
    }
    if atoms.is_empty() {
        return Err(PqrError::Empty);
    }
    Ok(atoms)
}

/// The Gaussian field over an atom set.
#[derive(Clone, Debug)]
pub struct GaussianField {
    pub atoms: Vec<Atom>,
    /// Decay rate D of the Gaussian kernel. > 0.
    pub decay: f64,
    /// Isovalue c. > 0; interior is phi > c.
    pub isovalue: f64,
    /// Relative kernel-truncation threshold: an atom is ignored at points
    /// where its kernel is below `kernel_cutoff_eps * isovalue`.
    pub kernel_cutoff_eps: f64,
}

impl GaussianField {
    pub fn new(atoms: Vec<Atom>, decay: f64, isovalue: f64) -> Self {
        GaussianField {
            atoms,
            decay,
            isovalue,
            kernel_cutoff_eps: 1e-9,
        }
    }

    pub fn with_cutoff(mut self, eps: f64) -> Self {
        self.kernel_cutoff_eps = eps;
        self
    }

    /// Influence radius of atom i: exp(D*(r^2 - rho^2)) = eps*c at rho, so
    /// contributions beyond rho are below eps*c.
    pub fn influence_radius(&self, atom: &Atom) -> f64 {
        let ln_term = (1.0 / (self.kernel_cutoff_eps * self.isovalue)).ln() / self.decay;
        (atom.radius * atom.radius + ln_term.max(0.0)).sqrt()
    }

    /// Untruncated field value (reference path; O(N) per point).
    pub fn eval_full(&self, p: &Vec3) -> f64 {
        let mut phi = 0.0;
        for a in &self.atoms {
            phi += (-self.decay * (p.dist2(&a.center) - a.radius * a.radius)).exp();
        }
        phi
    }

    /// Untruncated gradient (reference path).
    pub fn grad_full(&self, p: &Vec3) -> Vec3 {
        let mut g = Vec3::ZERO;
        for a in &self.atoms {
            let d = *p - a.center;
            let w = (-self.decay * (d.norm2() - a.radius * a.radius)).exp();
            g = g + d * (-2.0 * self.decay * w);
        }
        g
    }

    /// Equivalent field with decay 1: centers and radii scaled by sqrt(D).
    /// Returns the field and the scale factor; mesh vertices produced in the
    /// scaled space must be divided by the factor.
    pub fn rescaled_to_unit_decay(&self) -> (GaussianField, f64) {
        let s = self.decay.sqrt();
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                center: a.center * s,
                radius: a.radius * s,
                charge: a.charge,
            })
            .collect();
        (
            GaussianField {
                atoms,
                decay: 1.0,
                isovalue: self.isovalue,
                kernel_cutoff_eps: self.kernel_cutoff_eps,
            },
            s,
        )
    }
}

/// Uniform spatial hash over atom influence balls. Immutable after build;
/// shared read-only by all workers.
#[derive(Clone, Debug)]
pub struct NeighborGrid {
    cell: f64,
    origin: Vec3,
    dims: [i64; 3],
    buckets: HashMap<(i64, i64, i64), Vec<u32>>,
    /// Influence radius per atom, Angstrom.
    pub rho: Vec<f64>,
}

impl NeighborGrid {
    pub fn build(field: &GaussianField) -> Self {
        let rho: Vec<f64> = field
            .atoms
            .iter()
            .map(|a| field.influence_radius(a))
            .collect();
        let max_rho = rho.iter().cloned().fold(1.0_f64, f64::max);
        let cell = max_rho;
        let mut bb = Aabb::empty();
        for (a, r) in field.atoms.iter().zip(&rho) {
            bb.include_ball(&a.center, *r);
        }
        let origin = bb.min;
        let ext = bb.extent();
        let dims = [
            (ext[0] / cell).ceil() as i64 + 1,
            (ext[1] / cell).ceil() as i64 + 1,
            (ext[2] / cell).ceil() as i64 + 1,
        ];
        let mut buckets: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (idx, (a, r)) in field.atoms.iter().zip(&rho).enumerate() {
            let lo = a.center - Vec3([*r, *r, *r]);
            let hi = a.center + Vec3([*r, *r, *r]);
            let (il, jl, kl) = Self::cell_of(&origin, cell, &lo);
            let (ih, jh, kh) = Self::cell_of(&origin, cell, &hi);
            for i in il..=ih {
                for j in jl..=jh {
                    for k in kl..=kh {
                        // only keep cells the ball actually touches
                        let cmin = Vec3([
                            origin[0] + i as f64 * cell,
                            origin[1] + j as f64 * cell,
                            origin[2] + k as f64 * cell,
                        ]);
                        let cbox = Aabb {
                            min: cmin,
                            max: cmin + Vec3([cell, cell, cell]),
                        };
                        if cbox.dist2_to_point(&a.center) <= r * r {
                            buckets.entry((i, j, k)).or_default().push(idx as u32);
                        }
                    }
                }
            }
        }
        for v in buckets.values_mut() {
            v.sort_unstable();
        }
        NeighborGrid {
            cell,
            origin,
            dims,
            buckets,
            rho,
        }
    }

    fn cell_of(origin: &Vec3, cell: f64, p: &Vec3) -> (i64, i64, i64) {
        (
            ((p[0] - origin[0]) / cell).floor() as i64,
            ((p[1] - origin[1]) / cell).floor() as i64,
            ((p[2] - origin[2]) / cell).floor() as i64,
        )
    }

    /// Indices of atoms whose influence ball contains `p`, ascending.
    pub fn atoms_near_point(&self, field: &GaussianField, p: &Vec3) -> Vec<u32> {
        let (i, j, k) = Self::cell_of(&self.origin, self.cell, p);
        let mut out = Vec::new();
        if let Some(b) = self.buckets.get(&(i, j, k)) {
            for &idx in b {
                let a = &field.atoms[idx as usize];
                let r = self.rho[idx as usize];
                if p.dist2(&a.center) <= r * r {
                    out.push(idx);
                }
            }
        }
        out
    }

    /// Indices of atoms whose influence ball intersects `bb`, ascending.
    pub fn atoms_intersecting_box(&self, field: &GaussianField, bb: &Aabb) -> Vec<u32> {
        let (il, jl, kl) = Self::cell_of(&self.origin, self.cell, &bb.min);
        let (ih, jh, kh) = Self::cell_of(&self.origin, self.cell, &bb.max);
        let mut out = Vec::new();
        for i in il..=ih.min(self.dims[0]) {
            for j in jl..=jh.min(self.dims[1]) {
                for k in kl..=kh.min(self.dims[2]) {
                    if let Some(b) = self.buckets.get(&(i, j, k)) {
                        for &idx in b {
                            let a = &field.atoms[idx as usize];
                            let r = self.rho[idx as usize];
                            if bb.dist2_to_point(&a.center) <= r * r {
                                out.push(idx);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Truncated field and analytic gradient at `p`, summed over atoms within
/// their influence radius of `p` in ascending index order (deterministic).
/// Truncation error is bounded by N * kernel_cutoff_eps * isovalue.
pub fn eval_field(field: &GaussianField, grid: &NeighborGrid, p: &Vec3) -> (f64, Vec3) {
    let mut phi = 0.0;
    let mut grad = Vec3::ZERO;
    for idx in grid.atoms_near_point(field, p) {
        let a = &field.atoms[idx as usize];
        let d = *p - a.center;
        let w = (-field.decay * (d.norm2() - a.radius * a.radius)).exp();
        phi += w;
        grad = grad + d * (-2.0 * field.decay * w);
    }
    (phi, grad)
}

/// Truncated field value only.
pub fn eval_phi(field: &GaussianField, grid: &NeighborGrid, p: &Vec3) -> f64 {
    let mut phi = 0.0;
    for idx in grid.atoms_near_point(field, p) {
        let a = &field.atoms[idx as usize];
        phi += (-field.decay * (p.dist2(&a.center) - a.radius * a.radius)).exp();
    }
    phi
}
