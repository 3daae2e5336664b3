//! Exact Euclidean nearest-neighbor search with a balanced k-d tree.
//!
//! Split axes cycle with depth and every split is at the median, so the tree has
//! depth `O(log m)`. Ties between equidistant points resolve to the smaller
//! original index, which makes results identical to a linear scan.

use ndarray::Array2;

use crate::error::{Error, Result};

pub const DEFAULT_BUCKET: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Split {
        axis: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        start: usize,
        end: usize,
    },
}

/// Immutable after construction; queries take `&self` and may run concurrently.
#[derive(Clone, Debug)]
pub struct KdTree {
    dim: usize,
    /// Point coordinates reordered so each leaf is a contiguous block.
    data: Vec<f64>,
    /// Original row index of each reordered point.
    index: Vec<usize>,
    nodes: Vec<Node>,
}

/// Squared Euclidean distance; shared with tests so both paths round identically.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

impl KdTree {
    pub fn build(points: &Array2<f64>) -> Result<Self> {
        Self::with_bucket(points, DEFAULT_BUCKET)
    }

    pub fn with_bucket(points: &Array2<f64>, bucket: usize) -> Result<Self> {
        let (m, dim) = points.dim();
        if m == 0 {
            return Err(Error::Empty("k-d tree point set".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("points must have at least one coordinate".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("k-d tree points must be finite".into()));
        }
        let bucket = bucket.max(1);
        let mut order: Vec<usize> = (0..m).collect();
        let mut nodes = Vec::with_capacity(2 * m / bucket + 1);
        build_node(points, &mut order, 0, 0, bucket, &mut nodes);
        let mut data = Vec::with_capacity(m * dim);
        for &i in &order {
            data.extend(points.row(i).iter());
        }
        Ok(Self {
            dim,
            data,
            index: order,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Original indices held by each leaf, in tree order.
    pub fn leaves(&self) -> Vec<&[usize]> {
        self.nodes
            .iter()
            .filter_map(|n| match *n {
                Node::Leaf { start, end } => Some(&self.index[start..end]),
                Node::Split { .. } => None,
            })
            .collect()
    }

    /// `(index, distance)` of the closest stored point, smallest index on ties.
    pub fn nearest(&self, query: &[f64]) -> Result<(usize, f64)> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: query.len(),
            });
        }
        let mut best = Best {
            dist2: f64::INFINITY,
            index: usize::MAX,
        };
        let mut offsets = vec![0.0; self.dim];
        self.search(0, query, &mut offsets, &mut best);
        Ok((best.index, best.dist2.sqrt()))
    }

    /// `offsets[k]` is the gap between the query and the current cell along axis
    /// `k`; the sum of their squares, accumulated in axis order like
    /// [`squared_distance`], never exceeds the computed distance to a point in the
    /// cell, so pruning on it is exact.
    fn search(&self, node: usize, q: &[f64], offsets: &mut [f64], best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let p = &self.data[slot * self.dim..(slot + 1) * self.dim];
                    best.offer(squared_distance(p, q), self.index[slot]);
                }
            }
            Node::Split {
                axis,
                threshold,
                left,
                right,
            } => {
                let diff = q[axis] - threshold;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, offsets, best);
                let saved = offsets[axis];
                offsets[axis] = diff;
                let bound: f64 = offsets.iter().map(|o| o * o).sum();
                // `<=` keeps equidistant candidates reachable for the index tie-break
                if bound <= best.dist2 {
                    self.search(far, q, offsets, best);
                }
                offsets[axis] = saved;
            }
        }
    }
}

struct Best {
    dist2: f64,
    index: usize,
}

impl Best {
    #[inline]
    fn offer(&mut self, dist2: f64, index: usize) {
        if dist2 < self.dist2 || (dist2 == self.dist2 && index < self.index) {
            self.dist2 = dist2;
            self.index = index;
        }
    }
}

fn build_node(
    points: &Array2<f64>,
    order: &mut [usize],
    offset: usize,
    depth: usize,
    bucket: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    if order.len() <= bucket {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let axis = depth % points.ncols();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[[a, axis]]
            .total_cmp(&points[[b, axis]])
            .then(a.cmp(&b))
    });
    let threshold = points[[order[mid], axis]];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(points, lo, offset, depth + 1, bucket, nodes);
    let right = build_node(points, hi, offset + mid, depth + 1, bucket, nodes);
    nodes[id] = Node::Split {
        axis,
        threshold,
        left,
        right,
    };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;
    use rand::Rng;

    fn linear_scan(points: &Array2<f64>, q: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, row) in points.rows().into_iter().enumerate() {
            let d2 = squared_distance(row.as_slice().unwrap(), q);
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    fn random_points(seed: u64, m: usize, d: usize) -> Array2<f64> {
        let mut rng = seeded(seed, 0);
        Array2::from_shape_fn((m, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn single_point_tree() {
        let t = KdTree::build(&array![[1.0, 2.0]]).unwrap();
        assert_eq!(t.leaves().len(), 1);
        assert_eq!(t.nearest(&[0.0, 0.0]).unwrap().0, 0);
    }

    #[test]
    fn duplicates_query_to_zero() {
        let pts = Array2::from_elem((50, 3), 0.25);
        let t = KdTree::with_bucket(&pts, 4).unwrap();
        let (i, d) = t.nearest(&[0.25, 0.25, 0.25]).unwrap();
        assert_eq!((i, d), (0, 0.0));
    }

    #[test]
    fn inspection_and_tie_rule() {
        let t = KdTree::build(&array![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let (i, d) = t.nearest(&[0.1, 0.0]).unwrap();
        assert_eq!(i, 0);
        assert!((d - 0.1).abs() < 1e-15);
        assert_eq!(t.nearest(&[0.5, 0.5]).unwrap().0, 0);
    }

    #[test]
    fn tie_rule_survives_deep_trees() {
        // a grid has many exact ties; bucket 1 forces them across leaves
        let pts = Array2::from_shape_fn((64, 2), |(i, k)| if k == 0 { (i % 8) as f64 } else { (i / 8) as f64 });
        let t = KdTree::with_bucket(&pts, 1).unwrap();
        let mut rng = seeded(5, 0);
        for _ in 0..500 {
            let q = [rng.random_range(0..15) as f64 * 0.5, rng.random_range(0..15) as f64 * 0.5];
            assert_eq!(t.nearest(&q).unwrap(), linear_scan(&pts, &q));
        }
    }

    #[test]
    fn self_queries_in_64_dims() {
        let pts = random_points(1, 1000, 64);
        let t = KdTree::build(&pts).unwrap();
        for i in 0..1000 {
            let (j, d) = t.nearest(pts.row(i).as_slice().unwrap()).unwrap();
            assert_eq!((j, d), (i, 0.0));
        }
    }

    #[test]
    fn matches_linear_scan() {
        let pts = random_points(2, 1000, 64);
        let t = KdTree::build(&pts).unwrap();
        let queries = random_points(3, 200, 64);
        for q in queries.rows() {
            let q = q.as_slice().unwrap();
            assert_eq!(t.nearest(q).unwrap(), linear_scan(&pts, q));
        }
    }

    #[test]
    fn every_index_in_exactly_one_leaf() {
        let pts = random_points(4, 777, 5);
        let t = KdTree::with_bucket(&pts, 7).unwrap();
        let mut all: Vec<usize> = t.leaves().concat();
        all.sort_unstable();
        assert_eq!(all, (0..777).collect::<Vec<_>>());
        assert!(t.leaves().iter().all(|l| l.len() <= 7 && !l.is_empty()));
    }

    #[test]
    fn errors() {
        assert!(matches!(KdTree::build(&Array2::zeros((0, 3))), Err(Error::Empty(_))));
        let t = KdTree::build(&array![[0.0, 1.0]]).unwrap();
        assert!(matches!(t.nearest(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(KdTree::build(&array![[f64::NAN, 1.0]]).is_err());
    }

    #[test]
    fn concurrent_queries_agree() {
        let pts = random_points(6, 2000, 8);
        let t = KdTree::build(&pts).unwrap();
        let queries = random_points(7, 400, 8);
        let sequential: Vec<_> = queries.rows().into_iter().map(|q| t.nearest(q.as_slice().unwrap()).unwrap()).collect();
        let chunks: Vec<Vec<(usize, f64)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..4)
                .map(|c| {
                    let t = &t;
                    let queries = &queries;
                    s.spawn(move || {
                        (c * 100..(c + 1) * 100)
                            .map(|i| t.nearest(queries.row(i).as_slice().unwrap()).unwrap())
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(chunks.concat(), sequential);
    }
}
