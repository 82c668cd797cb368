//! Exact nearest-neighbour index over 3D points.
//!
//! A static kd-tree split at the median of the widest axis. Queries return the
//! same squared distance a brute-force scan would compute: every candidate
//! distance goes through [`squared_distance`] and pruning only discards
//! subtrees whose plane distance is no smaller than the current best.

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

const LEAF_SIZE: usize = 12;

#[inline]
pub fn squared_distance(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone)]
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

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3<f64>>,
    /// Original index of each reordered point.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Nearest point to a query: index into the indexed cloud and Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub index: usize,
    pub distance: f64,
}

impl KdTree {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::empty("cannot index an empty pointcloud"));
        }
        let mut items: Vec<(Point3<f64>, usize)> =
            cloud.points().iter().copied().zip(0..).collect();
        let mut nodes = Vec::with_capacity(2 * cloud.len() / LEAF_SIZE + 1);
        build_node(&mut items, 0, &mut nodes);
        let (points, order) = items.into_iter().unzip();
        Ok(Self {
            points,
            order,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, query: &Point3<f64>) -> Neighbour {
        let mut best = (f64::INFINITY, 0usize);
        self.search(0, query, &mut best);
        Neighbour {
            index: self.order[best.1],
            distance: best.0.sqrt(),
        }
    }

    /// Euclidean distance to the nearest indexed point.
    #[inline]
    pub fn nearest_distance(&self, query: &Point3<f64>) -> f64 {
        self.nearest(query).distance
    }

    fn search(&self, node: usize, q: &Point3<f64>, best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let d = squared_distance(&self.points[i], q);
                    if d < best.0 {
                        *best = (d, i);
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
                self.search(near, q, best);
                if diff * diff < best.0 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build_node(items: &mut [(Point3<f64>, usize)], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if items.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + items.len(),
        });
        return id;
    }
    let axis = widest_axis(items);
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]));
    let value = items[mid].0[axis];
    // Placeholder; children are pushed after this node.
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = items.split_at_mut(mid);
    let left = build_node(lo, offset, nodes);
    let right = build_node(hi, offset + mid, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

fn widest_axis(items: &[(Point3<f64>, usize)]) -> usize {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, _) in items {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0)
}
