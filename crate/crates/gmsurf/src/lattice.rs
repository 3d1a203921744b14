//! Integer octree lattice: cell keys, node ids, and the single canonical
//! mapping from lattice coordinates to world coordinates.
//!
//! Everything the mesher shares across cells (corner values, edge crossings,
//! face records) is keyed on this lattice, so two cells referring to the same
//! geometric entity always agree bit-for-bit.

use crate::geom::{Aabb, Vec3};

/// Lattice point at the finest resolution (`max_depth`) of a [`GridFrame`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub i64, pub i64, pub i64);

impl NodeId {
    #[inline]
    pub fn offset(&self, axis: usize, d: i64) -> NodeId {
        let mut n = *self;
        match axis {
            0 => n.0 += d,
            1 => n.1 += d,
            _ => n.2 += d,
        }
        n
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i64 {
        match axis {
            0 => self.0,
            1 => self.1,
            _ => self.2,
        }
    }
}

/// Octree cell: depth plus lattice coordinates at that depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub depth: u8,
    pub i: i64,
    pub j: i64,
    pub k: i64,
}

impl CellKey {
    pub fn child(&self, octant: usize) -> CellKey {
        CellKey {
            depth: self.depth + 1,
            i: self.i * 2 + (octant & 1) as i64,
            j: self.j * 2 + ((octant >> 1) & 1) as i64,
            k: self.k * 2 + ((octant >> 2) & 1) as i64,
        }
    }

    pub fn parent(&self) -> Option<CellKey> {
        if self.depth == 0 {
            return None;
        }
        Some(CellKey {
            depth: self.depth - 1,
            i: self.i.div_euclid(2),
            j: self.j.div_euclid(2),
            k: self.k.div_euclid(2),
        })
    }

    /// Ancestor at `depth` (must be <= self.depth).
    pub fn ancestor(&self, depth: u8) -> CellKey {
        let shift = (self.depth - depth) as u32;
        CellKey {
            depth,
            i: self.i >> shift,
            j: self.j >> shift,
            k: self.k >> shift,
        }
    }

    pub fn offset(&self, di: i64, dj: i64, dk: i64) -> CellKey {
        CellKey {
            depth: self.depth,
            i: self.i + di,
            j: self.j + dj,
            k: self.k + dk,
        }
    }
}

/// Sub-edge of the leaf complex: axis-parallel segment between two lattice
/// nodes, `len` finest units long.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeSeg {
    pub axis: u8,
    pub node: NodeId,
    pub len: i64,
}

impl EdgeSeg {
    pub fn far_node(&self) -> NodeId {
        self.node.offset(self.axis as usize, self.len)
    }
}

/// Canonical face region (the coarser side's extent when depths differ).
/// `(u, v)` are the non-normal axes in index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceKey {
    pub axis: u8,
    pub plane: i64,
    pub u0: i64,
    pub v0: i64,
    pub size: i64,
}

pub fn face_axes(normal: usize) -> (usize, usize) {
    match normal {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Geometry of the root grid plus the canonical lattice->world mapping.
#[derive(Clone, Debug)]
pub struct GridFrame {
    pub origin: Vec3,
    /// Root cube edge length, Angstrom.
    pub root_edge: f64,
    /// Root grid cell counts per axis.
    pub counts: [i64; 3],
    pub max_depth: u8,
    /// World size of one finest lattice unit: root_edge / 2^max_depth.
    pub unit: f64,
}

impl GridFrame {
    pub fn new(origin: Vec3, root_edge: f64, counts: [i64; 3], max_depth: u8) -> Self {
        let unit = root_edge / (1i64 << max_depth) as f64;
        GridFrame {
            origin,
            root_edge,
            counts,
            max_depth,
            unit,
        }
    }

    /// Finest lattice units per cell edge at `depth`.
    #[inline]
    pub fn step(&self, depth: u8) -> i64 {
        1i64 << (self.max_depth - depth)
    }

    #[inline]
    pub fn cell_edge(&self, depth: u8) -> f64 {
        self.root_edge / (1i64 << depth) as f64
    }

    /// The one true lattice-node world position. Every shared coordinate in
    /// the pipeline flows through this function.
    #[inline]
    pub fn node_pos(&self, n: NodeId) -> Vec3 {
        Vec3([
            self.origin[0] + n.0 as f64 * self.unit,
            self.origin[1] + n.1 as f64 * self.unit,
            self.origin[2] + n.2 as f64 * self.unit,
        ])
    }

    /// Min-corner node of a cell.
    #[inline]
    pub fn cell_min_node(&self, c: &CellKey) -> NodeId {
        let s = self.step(c.depth);
        NodeId(c.i * s, c.j * s, c.k * s)
    }

    /// The 8 corner nodes of a cell in (x + 2y + 4z) bit order.
    pub fn cell_corner_nodes(&self, c: &CellKey) -> [NodeId; 8] {
        let s = self.step(c.depth);
        let m = self.cell_min_node(c);
        let mut out = [m; 8];
        for (bits, slot) in out.iter_mut().enumerate() {
            *slot = NodeId(
                m.0 + ((bits & 1) as i64) * s,
                m.1 + (((bits >> 1) & 1) as i64) * s,
                m.2 + (((bits >> 2) & 1) as i64) * s,
            );
        }
        out
    }

    pub fn cell_bounds(&self, c: &CellKey) -> Aabb {
        let lo = self.node_pos(self.cell_min_node(c));
        let s = self.step(c.depth);
        let hi = self.node_pos(NodeId(
            (c.i + 1) * s,
            (c.j + 1) * s,
            (c.k + 1) * s,
        ));
        Aabb { min: lo, max: hi }
    }

    pub fn in_root_grid(&self, c: &CellKey) -> bool {
        let root = c.ancestor(0);
        (0..3).all(|a| {
            let v = [root.i, root.j, root.k][a];
            v >= 0 && v < self.counts[a]
        })
    }

    /// Convert a world point inside a cell to the cell's [-1,1]^3 local frame.
    pub fn world_to_local(&self, c: &CellKey, p: &Vec3) -> Vec3 {
        let b = self.cell_bounds(c);
        let h = self.cell_edge(c.depth);
        Vec3([
            (2.0 * (p[0] - b.min[0]) / h) - 1.0,
            (2.0 * (p[1] - b.min[1]) / h) - 1.0,
            (2.0 * (p[2] - b.min[2]) / h) - 1.0,
        ])
    }

    pub fn local_to_world(&self, c: &CellKey, l: &Vec3) -> Vec3 {
        let b = self.cell_bounds(c);
        let h = self.cell_edge(c.depth);
        Vec3([
            b.min[0] + 0.5 * (l[0] + 1.0) * h,
            b.min[1] + 0.5 * (l[1] + 1.0) * h,
            b.min[2] + 0.5 * (l[2] + 1.0) * h,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> GridFrame {
        GridFrame::new(Vec3::new(-8.0, -8.0, -8.0), 4.0, [4, 4, 4], 4)
    }

    #[test]
    fn child_parent_roundtrip() {
        let c = CellKey {
            depth: 2,
            i: 3,
            j: 1,
            k: 2,
        };
        for o in 0..8 {
            assert_eq!(c.child(o).parent(), Some(c));
        }
    }

    #[test]
    fn corner_nodes_shared_across_depths() {
        let f = frame();
        let c = CellKey {
            depth: 1,
            i: 1,
            j: 0,
            k: 0,
        };
        // child 0 shares the parent's min corner node
        let child = c.child(0);
        assert_eq!(
            f.cell_corner_nodes(&c)[0],
            f.cell_corner_nodes(&child)[0]
        );
        // and node positions agree bitwise
        assert_eq!(
            f.node_pos(f.cell_corner_nodes(&c)[0]),
            f.node_pos(f.cell_corner_nodes(&child)[0])
        );
    }

    #[test]
    fn local_world_roundtrip() {
        let f = frame();
        let c = CellKey {
            depth: 3,
            i: 5,
            j: 2,
            k: 7,
        };
        let l = Vec3::new(0.25, -0.75, 1.0);
        let w = f.local_to_world(&c, &l);
        let l2 = f.world_to_local(&c, &w);
        assert!((l - l2).norm() < 1e-12);
    }
}
