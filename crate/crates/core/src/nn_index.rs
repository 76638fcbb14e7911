//! Exact nearest-neighbor search over complex vectors with a k-d tree.
//!
//! Complex `K`-vectors are embedded isometrically in `R^{2K}` (all real parts,
//! then all imaginary parts), so squared Euclidean distances are preserved.
//! Nodes split at the median of the coordinate with the widest spread; leaves
//! hold up to `leaf_size` points and are scanned exhaustively. Each split keeps
//! the largest coordinate on its left and the smallest on its right, which
//! gives exact pruning bounds even when coordinates repeat.
//!
//! Search is exact. Ties in distance resolve to the lowest point index.

use num_complex::Complex64;

use crate::codec::{ByteReader, ByteWriter};
use crate::{Error, Result};

pub const DEFAULT_LEAF_SIZE: usize = 16;

// Relative slack on pruning so rounding in the incremental bound never
// discards a point at exactly the current best distance.
const PRUNE_SLACK: f64 = 1e-12;

/// Embeds a complex vector as `[re_0, .., re_{K-1}, im_0, .., im_{K-1}]`.
pub fn embed(v: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() * 2);
    out.extend(v.iter().map(|z| z.re));
    out.extend(v.iter().map(|z| z.im));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    /// The left child is always the next node in the arena.
    Split {
        axis: u32,
        left_max: f64,
        right_min: f64,
        right: u32,
    },
}

/// Result of a nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Index of the point in the order it was given to [`NnIndex::build`].
    pub index: usize,
    pub dist_sq: f64,
}

/// Work done by one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes_visited: usize,
    pub points_checked: usize,
}

/// Static k-d tree over `Q` complex vectors of dimension `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct NnIndex {
    dim: usize,
    leaf_size: usize,
    // embedded points in tree order, row-major, `2K` values each
    points: Vec<f64>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

impl NnIndex {
    /// Builds the tree over `points`, a row-major `Q x K` complex array.
    pub fn build(points: &[Complex64], dim: usize) -> Result<Self> {
        Self::with_leaf_size(points, dim, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: &[Complex64], dim: usize, leaf_size: usize) -> Result<Self> {
        if dim == 0 || leaf_size == 0 {
            return Err(Error::InvalidArgument(
                "index dimension and leaf size must be positive".into(),
            ));
        }
        if points.is_empty() {
            return Err(Error::InvalidArgument("cannot index an empty point set".into()));
        }
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                what: "index point data",
                expected: (points.len() / dim + 1) * dim,
                actual: points.len(),
            });
        }
        let count = points.len() / dim;
        if count > u32::MAX as usize {
            return Err(Error::InvalidArgument("too many points to index".into()));
        }
        let raw: Vec<f64> = points.chunks_exact(dim).flat_map(embed).collect();
        let mut order: Vec<u32> = (0..count as u32).collect();
        let mut index = NnIndex {
            dim,
            leaf_size,
            points: Vec::with_capacity(raw.len()),
            ids: Vec::with_capacity(count),
            nodes: Vec::new(),
        };
        index.build_node(&raw, &mut order);
        Ok(index)
    }

    fn build_node(&mut self, raw: &[f64], order: &mut [u32]) -> u32 {
        let width = 2 * self.dim;
        let node_id = self.nodes.len() as u32;
        let coord = |id: u32, axis: usize| raw[id as usize * width + axis];

        let mut axis = 0;
        let mut spread = 0.0;
        if order.len() > self.leaf_size {
            for a in 0..width {
                let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &id| {
                    let v = coord(id, a);
                    (lo.min(v), hi.max(v))
                });
                if hi - lo > spread {
                    spread = hi - lo;
                    axis = a;
                }
            }
        }
        if order.len() <= self.leaf_size || spread <= 0.0 {
            let start = self.ids.len() as u32;
            for &id in order.iter() {
                self.ids.push(id);
                self.points
                    .extend_from_slice(&raw[id as usize * width..(id as usize + 1) * width]);
            }
            self.nodes.push(Node::Leaf {
                start,
                end: self.ids.len() as u32,
            });
            return node_id;
        }

        order.sort_unstable_by(|&a, &b| coord(a, axis).total_cmp(&coord(b, axis)).then(a.cmp(&b)));
        let mid = order.len() / 2;
        let left_max = coord(order[mid - 1], axis);
        let right_min = coord(order[mid], axis);
        self.nodes.push(Node::Split {
            axis: axis as u32,
            left_max,
            right_min,
            right: 0,
        });
        let (left, right) = order.split_at_mut(mid);
        self.build_node(raw, left);
        let right_id = self.build_node(raw, right);
        if let Node::Split { right, .. } = &mut self.nodes[node_id as usize] {
            *right = right_id;
        }
        node_id
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Complex dimension `K` of the indexed vectors.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of levels from the root to the deepest leaf (a lone leaf is depth 1).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 1,
                Node::Split { right, .. } => 1 + walk(nodes, id + 1).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// The stored point closest to `query`.
    pub fn nearest(&self, query: &[Complex64]) -> Result<Neighbor> {
        self.nearest_with_stats(query).map(|(n, _)| n)
    }

    pub fn nearest_with_stats(&self, query: &[Complex64]) -> Result<(Neighbor, SearchStats)> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "query dimension",
                expected: self.dim,
                actual: query.len(),
            });
        }
        let q = embed(query);
        let mut offsets = vec![0.0; q.len()];
        let mut best = Best {
            id: u32::MAX,
            dist_sq: f64::INFINITY,
        };
        let mut stats = SearchStats::default();
        self.search(0, &q, &mut offsets, 0.0, &mut best, &mut stats);
        Ok((
            Neighbor {
                index: best.id as usize,
                dist_sq: best.dist_sq,
            },
            stats,
        ))
    }

    fn search(
        &self,
        node: usize,
        query: &[f64],
        offsets: &mut [f64],
        bound: f64,
        best: &mut Best,
        stats: &mut SearchStats,
    ) {
        stats.nodes_visited += 1;
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                let width = query.len();
                for slot in start as usize..end as usize {
                    stats.points_checked += 1;
                    let point = &self.points[slot * width..(slot + 1) * width];
                    let mut d = 0.0;
                    for (a, b) in point.iter().zip(query) {
                        let diff = a - b;
                        d += diff * diff;
                        if d > best.dist_sq {
                            break;
                        }
                    }
                    let id = self.ids[slot];
                    if d < best.dist_sq || (d == best.dist_sq && id < best.id) {
                        *best = Best { id, dist_sq: d };
                    }
                }
            }
            Node::Split {
                axis,
                left_max,
                right_min,
                right,
            } => {
                let axis = axis as usize;
                let v = query[axis];
                let old = offsets[axis];
                let left_off = (v - left_max).max(0.0).max(old);
                let right_off = (right_min - v).max(0.0).max(old);
                let mut children = [(node + 1, left_off), (right as usize, right_off)];
                if right_off < left_off {
                    children.swap(0, 1);
                }
                for (child, off) in children {
                    let child_bound = bound - old * old + off * off;
                    if child_bound > best.dist_sq * (1.0 + PRUNE_SLACK) {
                        continue;
                    }
                    offsets[axis] = off;
                    self.search(child, query, offsets, child_bound, best, stats);
                    offsets[axis] = old;
                }
            }
        }
    }

    pub(crate) fn write(&self, w: &mut ByteWriter) {
        w.u64(self.dim as u64);
        w.u64(self.leaf_size as u64);
        w.u64(self.ids.len() as u64);
        w.u64(self.nodes.len() as u64);
        for &id in &self.ids {
            w.u32(id);
        }
        w.f64s(&self.points);
        for node in &self.nodes {
            match *node {
                Node::Leaf { start, end } => {
                    w.u32(0);
                    w.u32(start);
                    w.u32(end);
                    w.f64(0.0);
                    w.f64(0.0);
                }
                Node::Split {
                    axis,
                    left_max,
                    right_min,
                    right,
                } => {
                    w.u32(1);
                    w.u32(axis);
                    w.u32(right);
                    w.f64(left_max);
                    w.f64(right_min);
                }
            }
        }
    }

    /// Decodes an index and checks that its structure is self-consistent.
    pub(crate) fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let bad = |msg: &str| Error::ModelFormat(format!("index section: {msg}"));
        let dim = r.u64()? as usize;
        let leaf_size = r.u64()? as usize;
        let count = r.u64()? as usize;
        let node_count = r.u64()? as usize;
        if dim == 0 || leaf_size == 0 || count == 0 || node_count == 0 {
            return Err(bad("zero-sized field"));
        }
        let mut ids = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            ids.push(r.u32()?);
        }
        let width = dim.checked_mul(2).ok_or_else(|| bad("dimension overflow"))?;
        let points = r.f64s(count.checked_mul(width).ok_or_else(|| bad("size overflow"))?)?;
        let mut nodes = Vec::with_capacity(node_count.min(1 << 24));
        for _ in 0..node_count {
            let tag = r.u32()?;
            let a = r.u32()?;
            let b = r.u32()?;
            let x = r.f64()?;
            let y = r.f64()?;
            nodes.push(match tag {
                0 => Node::Leaf { start: a, end: b },
                1 => Node::Split {
                    axis: a,
                    left_max: x,
                    right_min: y,
                    right: b,
                },
                _ => return Err(bad("unknown node tag")),
            });
        }
        let mut seen = vec![false; count];
        for &id in &ids {
            match seen.get_mut(id as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(bad("point ids are not a permutation")),
            }
        }
        for (n, node) in nodes.iter().enumerate() {
            match *node {
                Node::Leaf { start, end } if start < end && end as usize <= count => {}
                Node::Split { axis, right, .. }
                    if (axis as usize) < width && right as usize > n + 1 && (right as usize) < node_count
                    && n + 1 < node_count => {}
                _ => return Err(bad("inconsistent node")),
            }
        }
        Ok(NnIndex {
            dim,
            leaf_size,
            points,
            ids,
            nodes,
        })
    }
}

struct Best {
    id: u32,
    dist_sq: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(q: usize, k: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..q * k)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    /// Brute-force oracle in complex arithmetic.
    fn linear_scan(points: &[Complex64], k: usize, query: &[Complex64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (q, p) in points.chunks_exact(k).enumerate() {
            let d: f64 = p.iter().zip(query).map(|(a, b)| (a - b).norm_sqr()).sum();
            if d < best.1 {
                best = (q, d);
            }
        }
        best.0
    }

    #[test]
    fn embedding_is_isometric() {
        let a = random_points(1, 9, 1);
        let b = random_points(1, 9, 2);
        let complex: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let real: f64 = embed(&a).iter().zip(embed(&b)).map(|(x, y)| (x - y).powi(2)).sum();
        assert!((complex - real).abs() <= 1e-15 * complex.max(1.0));
    }

    #[test]
    fn singleton() {
        let p = [Complex64::new(0.3, -0.2), Complex64::new(1.0, 0.0)];
        let index = NnIndex::build(&p, 2).unwrap();
        assert_eq!(index.depth(), 1);
        let n = index.nearest(&[Complex64::new(9.0, 9.0), Complex64::new(-3.0, 0.0)]).unwrap();
        assert_eq!(n.index, 0);
    }

    #[test]
    fn square_corners() {
        let corners = [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 1.0),
        ];
        let index = NnIndex::with_leaf_size(&corners, 1, 1).unwrap();
        assert!(index.depth() <= 3);
        for (q, c) in corners.iter().enumerate() {
            let n = index.nearest(std::slice::from_ref(c)).unwrap();
            assert_eq!((n.index, n.dist_sq), (q, 0.0));
        }
        assert_eq!(NnIndex::build(&corners, 1).unwrap().depth(), 1);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let pts = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0)];
        let origin = [Complex64::new(0.0, 0.0)];
        for leaf in 1..4 {
            let index = NnIndex::with_leaf_size(&pts, 1, leaf).unwrap();
            assert_eq!(index.nearest(&origin).unwrap().index, 0, "leaf {leaf}");
        }
        let reversed = [pts[2], pts[1], pts[0]];
        let index = NnIndex::with_leaf_size(&reversed, 1, 1).unwrap();
        assert_eq!(index.nearest(&origin).unwrap().index, 0);
        let midpoint = [Complex64::new(0.0, 0.0)];
        let pair = [Complex64::new(0.0, 2.0), Complex64::new(0.0, -2.0)];
        let index = NnIndex::with_leaf_size(&pair, 1, 1).unwrap();
        assert_eq!(index.nearest(&midpoint).unwrap().index, 0);
    }

    #[test]
    fn duplicate_points_terminate() {
        let pts = vec![Complex64::new(0.5, 0.5); 40];
        let index = NnIndex::with_leaf_size(&pts, 1, 2).unwrap();
        assert_eq!(index.nearest(&[Complex64::new(0.0, 0.0)]).unwrap().index, 0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(NnIndex::build(&[], 2).is_err());
        assert!(NnIndex::build(&random_points(3, 1, 0), 2).is_err());
        let index = NnIndex::build(&random_points(5, 2, 0), 2).unwrap();
        assert!(matches!(
            index.nearest(&random_points(1, 3, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn self_queries_on_large_set() {
        let k = 71;
        let points = random_points(2562, k, 5);
        let index = NnIndex::build(&points, k).unwrap();
        assert_eq!(index.len(), 2562);
        for q in (0..2562).step_by(13) {
            let n = index.nearest(&points[q * k..(q + 1) * k]).unwrap();
            assert_eq!((n.index, n.dist_sq), (q, 0.0));
        }
    }

    #[test]
    fn matches_linear_scan() {
        for (q, k) in [(1, 1), (2, 8), (10, 48), (2562, 1), (2562, 8)] {
            let points = random_points(q, k, (q * 31 + k) as u64);
            let index = NnIndex::build(&points, k).unwrap();
            for s in 0..200u64 {
                let query = random_points(1, k, 10_000 + s);
                assert_eq!(index.nearest(&query).unwrap().index, linear_scan(&points, k, &query));
            }
        }
    }

    #[test]
    fn serialization_round_trip() {
        let points = random_points(300, 4, 9);
        let index = NnIndex::with_leaf_size(&points, 4, 5).unwrap();
        let mut w = ByteWriter::default();
        index.write(&mut w);
        let mut r = ByteReader::new(&w.buf, "test");
        let back = NnIndex::read(&mut r).unwrap();
        assert!(r.is_empty());
        assert_eq!(back, index);
        // a truncated section fails cleanly
        let mut short = ByteReader::new(&w.buf[..w.buf.len() - 3], "test");
        assert!(NnIndex::read(&mut short).is_err());
    }

    #[test]
    fn build_is_deterministic() {
        let points = random_points(500, 6, 3);
        assert_eq!(NnIndex::build(&points, 6).unwrap(), NnIndex::build(&points, 6).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exact_on_random_sets(q in 1usize..300, k in 1usize..10, leaf in 1usize..20, seed in any::<u64>()) {
            let points = random_points(q, k, seed);
            let index = NnIndex::with_leaf_size(&points, k, leaf).unwrap();
            for s in 0..20u64 {
                let query = random_points(1, k, seed.wrapping_add(s + 1));
                let n = index.nearest(&query).unwrap();
                prop_assert_eq!(n.index, linear_scan(&points, k, &query));
            }
        }
    }
}
