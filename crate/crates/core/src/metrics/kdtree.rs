//! Static 3-d tree for exact nearest-neighbour queries.

/// Squared Euclidean distance; every search path uses this exact expression.
#[inline]
pub fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

const LEAF: usize = 8;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

pub struct KdTree {
    points: Vec<[f64; 3]>,
    root: Node,
}

impl KdTree {
    pub fn new(points: &[[f64; 3]]) -> Self {
        let mut points = points.to_vec();
        let n = points.len();
        let root = build(&mut points, 0, n);
        Self { points, root }
    }

    /// Squared distance from `q` to the nearest stored point, or `+∞` when
    /// the tree is empty.
    pub fn nearest_dist2(&self, q: &[f64; 3]) -> f64 {
        let mut best = f64::INFINITY;
        self.search(&self.root, q, &mut best);
        best
    }

    fn search(&self, node: &Node, q: &[f64; 3], best: &mut f64) {
        match node {
            Node::Leaf { start, end } => {
                for p in &self.points[*start..*end] {
                    let d = dist2(p, q);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(points: &mut [[f64; 3]], start: usize, end: usize) -> Node {
    if end - start <= LEAF {
        return Node::Leaf { start, end };
    }
    let slice = &mut points[start..end];
    let axis = (0..3)
        .max_by(|&a, &b| spread(slice, a).total_cmp(&spread(slice, b)))
        .unwrap_or(0);
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let value = slice[mid][axis];
    // left holds coordinates <= value, right holds >= value
    Node::Split {
        axis,
        value,
        left: Box::new(build(points, start, start + mid)),
        right: Box::new(build(points, start + mid, end)),
    }
}

fn spread(points: &[[f64; 3]], axis: usize) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p[axis]), hi.max(p[axis]))
    });
    hi - lo
}
