//! A k-d tree over a flat coordinate array with exact closed-ball queries.

use crate::simplex::dist_sq;

const LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Clone, Debug)]
pub(crate) struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub(crate) fn build(coords: Vec<f64>, dim: usize) -> Self {
        let n = coords.len().checked_div(dim).unwrap_or(0);
        let mut tree = KdTree { dim, coords, perm: (0..n).collect(), nodes: Vec::new() };
        if n > 0 {
            tree.build_node(0, n);
        }
        tree
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut axis = 0;
        let mut best = -1.0;
        for a in 0..self.dim {
            let (lo, hi) = self.perm[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let c = self.coords[i * self.dim + a];
                (lo.min(c), hi.max(c))
            });
            if hi - lo > best {
                best = hi - lo;
                axis = a;
            }
        }
        if best <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let (dim, coords) = (self.dim, &self.coords);
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coords[a * dim + axis].total_cmp(&coords[b * dim + axis]).then(a.cmp(&b))
        });
        let value = self.coords[self.perm[mid] * dim + axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Indices `i` with `|p_i - center|^2 <= radius^2`, in ascending order.
    pub(crate) fn within(&self, center: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() && radius >= 0.0 {
            self.within_node(0, center, radius, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_node(&self, id: usize, center: &[f64], r: f64, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[id] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    if dist_sq(self.point(i), center) <= r2 {
                        out.push(i);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                // pruning is conservative; membership is decided by the exact test above
                let slack = r * 1e-9 + 1e-300;
                let diff = center[axis] - value;
                if diff <= r + slack {
                    self.within_node(left, center, r, r2, out);
                }
                if -diff <= r + slack {
                    self.within_node(right, center, r, r2, out);
                }
            }
        }
    }

    /// Nearest index to `q` other than `exclude`; ties go to the lower index.
    pub(crate) fn nearest(&self, q: &[f64], exclude: Option<usize>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        if !self.nodes.is_empty() {
            self.nearest_node(0, q, exclude, &mut best);
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    fn nearest_node(&self, id: usize, q: &[f64], exclude: Option<usize>, best: &mut Option<(usize, f64)>) {
        match self.nodes[id] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let d2 = dist_sq(self.point(i), q);
                    let better = match *best {
                        None => true,
                        Some((bi, bd)) => d2 < bd || (d2 == bd && i < bi),
                    };
                    if better {
                        *best = Some((i, d2));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_node(near, q, exclude, best);
                let bound = diff * diff;
                if best.is_none_or(|(_, bd)| bound <= bd) {
                    self.nearest_node(far, q, exclude, best);
                }
            }
        }
    }
}
