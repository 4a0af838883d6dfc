//! Exact k-d tree over a point cloud snapshot.
//!
//! Results are ordered by `(distance, id)`, so equal distances resolve to the
//! lower point id and every query matches a brute-force scan exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::PointCloud;
use crate::vec3::{dist2, Vec3};

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Immutable spatial index; safe to share across threads for queries.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    points: Vec<Vec3>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

/// A query result: point id and Euclidean distance to the query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub dist: f64,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    d2: f64,
    id: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

impl SpatialIndex {
    pub fn new(pc: &PointCloud) -> Self {
        Self::from_points(pc.points())
    }

    /// Build directly from a slice of positions (ids are slice indices).
    pub fn from_points(points: &[Vec3]) -> Self {
        let mut index = SpatialIndex {
            points: points.to_vec(),
            ids: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: usize) -> Vec3 {
        self.points[id]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let slot = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return slot;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &id in &self.ids[start..end] {
            let p = self.points[id];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] == 0.0 {
            // all coincident
            self.nodes.push(Node::Leaf { start, end });
            return slot;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = self.points[self.ids[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[slot] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        slot
    }

    /// The `min(k, N)` nearest points to `q`, sorted by `(distance, id)`.
    pub fn knn(&self, q: Vec3, k: usize) -> Vec<Neighbor> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, q, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        out.into_iter()
            .map(|c| Neighbor {
                id: c.id,
                dist: c.d2.sqrt(),
            })
            .collect()
    }

    /// Ids of the `min(k, N)` nearest points, sorted by `(distance, id)`.
    pub fn knn_ids(&self, q: Vec3, k: usize) -> Vec<usize> {
        self.knn(q, k).into_iter().map(|n| n.id).collect()
    }

    fn knn_rec(&self, node: usize, q: Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.ids[start..end] {
                    let c = Candidate {
                        d2: dist2(self.points[id], q),
                        id,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, heap);
                let worst = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().unwrap().d2
                };
                if diff * diff <= worst {
                    self.knn_rec(far, q, k, heap);
                }
            }
        }
    }

    /// Nearest point as `(id, squared distance)`.
    pub fn nearest(&self, q: Vec3) -> (usize, f64) {
        let mut best = Candidate {
            d2: f64::INFINITY,
            id: usize::MAX,
        };
        self.nearest_rec(0, q, &mut best);
        (best.id, best.d2)
    }

    fn nearest_rec(&self, node: usize, q: Vec3, best: &mut Candidate) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.ids[start..end] {
                    let c = Candidate {
                        d2: dist2(self.points[id], q),
                        id,
                    };
                    if c < *best {
                        *best = c;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                if diff * diff <= best.d2 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// Number of points within Euclidean distance `r` of `q` (inclusive).
    pub fn count_within(&self, q: Vec3, r: f64) -> usize {
        let mut count = 0;
        self.radius_rec(0, q, r * r, &mut |_| count += 1);
        count
    }

    /// Ids within Euclidean distance `r` of `q` (inclusive), ascending.
    pub fn within_radius(&self, q: Vec3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_rec(0, q, r * r, &mut |id| out.push(id));
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: usize, q: Vec3, r2: f64, visit: &mut impl FnMut(usize)) {
        if self.points.is_empty() {
            return;
        }
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &id in &self.ids[start..end] {
                    if dist2(self.points[id], q) <= r2 {
                        visit(id);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, q, r2, visit);
                if diff * diff <= r2 {
                    self.radius_rec(far, q, r2, visit);
                }
            }
        }
    }
}

/// Build a spatial index over `pc`.
pub fn build_index(pc: &PointCloud) -> SpatialIndex {
    SpatialIndex::new(pc)
}
