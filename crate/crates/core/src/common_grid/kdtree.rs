//! Static 2-d tree for k-nearest-neighbour queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 2]>,
    /// Point indices arranged as an implicit balanced tree.
    order: Vec<usize>,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(&points, &mut order, 0);
        Self { points, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    /// The `k` nearest points as `(index, squared distance)`, nearest first.
    /// Equidistant points are ordered by index.
    pub fn nearest(&self, q: [f64; 2], k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(&self.order, 0, q, k, &mut heap);
        let mut out: Vec<(usize, f64)> = heap.into_iter().map(|c| (c.index, c.dist2)).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn search(&self, slice: &[usize], depth: usize, q: [f64; 2], k: usize, heap: &mut BinaryHeap<Candidate>) {
        if slice.is_empty() {
            return;
        }
        let axis = depth % 2;
        let mid = slice.len() / 2;
        let idx = slice[mid];
        let p = self.points[idx];
        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        let cand = Candidate { dist2: d2, index: idx };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().expect("heap is full") {
            heap.pop();
            heap.push(cand);
        }
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { (&slice[..mid], &slice[mid + 1..]) } else { (&slice[mid + 1..], &slice[..mid]) };
        self.search(near, depth + 1, q, k, heap);
        let worst = heap.peek().map_or(f64::INFINITY, |c| c.dist2);
        if heap.len() < k || diff * diff <= worst {
            self.search(far, depth + 1, q, k, heap);
        }
    }
}

fn build(points: &[[f64; 2]], slice: &mut [usize], depth: usize) {
    if slice.len() <= 1 {
        return;
    }
    let axis = depth % 2;
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    let (left, right) = slice.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[[f64; 2]], q: [f64; 2], k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> =
            points.iter().enumerate().map(|(i, p)| (i, (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))).collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    #[test]
    fn grid_with_ties() {
        let pts: Vec<[f64; 2]> = (0..5).flat_map(|i| (0..5).map(move |j| [i as f64, j as f64])).collect();
        let tree = KdTree::new(pts.clone());
        for k in [1, 4, 10, 25, 40] {
            assert_eq!(tree.nearest([2.0, 2.0], k), brute(&pts, [2.0, 2.0], k));
            assert_eq!(tree.nearest([0.5, 3.5], k), brute(&pts, [0.5, 3.5], k));
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..60),
            q in (-6.0f64..6.0, -6.0f64..6.0),
            k in 1usize..12,
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
            let tree = KdTree::new(pts.clone());
            let got: Vec<f64> = tree.nearest([q.0, q.1], k).iter().map(|c| c.1).collect();
            let want: Vec<f64> = brute(&pts, [q.0, q.1], k).iter().map(|c| c.1).collect();
            prop_assert_eq!(got, want);
        }
    }
}
