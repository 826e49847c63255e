use nalgebra::Point3;

const LEAF_SIZE: usize = 8;

/// Static 3-d tree answering exact nearest-neighbor queries.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Point3<f64>>,
    nodes: Vec<KdNode>,
}

#[derive(Clone, Debug)]
enum KdNode {
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

impl KdTree {
    pub fn new(points: &[Point3<f64>]) -> Self {
        let mut pts = points.to_vec();
        let mut nodes = Vec::new();
        if !pts.is_empty() {
            let n = pts.len();
            build(&mut pts, 0, n, &mut nodes);
        }
        Self { points: pts, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance to the nearest stored point, `None` when empty.
    pub fn nearest_sq(&self, q: &Point3<f64>) -> Option<f64> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &Point3<f64>, best: &mut f64) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for p in &self.points[start..end] {
                    let d = (p - q).norm_squared();
                    if d < *best {
                        *best = d;
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(pts: &mut [Point3<f64>], start: usize, end: usize, nodes: &mut Vec<KdNode>) -> usize {
    let idx = nodes.len();
    let slice = &mut pts[start..end];
    if slice.len() <= LEAF_SIZE {
        nodes.push(KdNode::Leaf { start, end });
        return idx;
    }
    let mut lo = slice[0];
    let mut hi = slice[0];
    for p in slice.iter() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let extent = hi - lo;
    let axis = extent.imax();
    if extent[axis] == 0.0 {
        // all points coincide
        nodes.push(KdNode::Leaf { start, end });
        return idx;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let value = slice[mid][axis];
    nodes.push(KdNode::Leaf { start, end });
    let left = build(pts, start, start + mid, nodes);
    let right = build(pts, start + mid, end, nodes);
    nodes[idx] = KdNode::Split {
        axis,
        value,
        left,
        right,
    };
    idx
}
