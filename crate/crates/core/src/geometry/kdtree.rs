use nalgebra::Point3;

use super::PointCloud;

const LEAF_SIZE: usize = 8;

/// Static k-d tree over `K`-dimensional points.
///
/// Nodes are stored implicitly: the median of every index range is the split
/// node, ranges of at most `LEAF_SIZE` points are scanned linearly. Ties on
/// distance resolve to the smallest original index, so results are identical
/// to a first-minimum linear scan.
#[derive(Debug, Clone)]
pub struct KdTree<const K: usize> {
    coords: Vec<[f64; K]>,
    ids: Vec<u32>,
    axes: Vec<u8>,
}

impl<const K: usize> KdTree<K> {
    pub fn new(points: impl IntoIterator<Item = [f64; K]>) -> Self {
        let mut items: Vec<([f64; K], u32)> = points
            .into_iter()
            .enumerate()
            .map(|(i, p)| (p, u32::try_from(i).expect("index fits in u32")))
            .collect();
        let mut axes = vec![0u8; items.len()];
        let cell = bounding_box(&items);
        build(&mut items, &mut axes, 0, cell);
        let (coords, ids) = items.into_iter().unzip();
        Self { coords, ids, axes }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Nearest point as `(original index, squared distance)`.
    pub fn nearest(&self, query: &[f64; K]) -> Option<(usize, f64)> {
        self.nearest_within(query, f64::INFINITY)
    }

    /// Nearest point whose squared distance is at most `max_dist_sq`.
    pub fn nearest_within(&self, query: &[f64; K], max_dist_sq: f64) -> Option<(usize, f64)> {
        let mut best = Best {
            id: u32::MAX,
            dist_sq: max_dist_sq,
        };
        self.search(query, 0, self.coords.len(), &mut best);
        (best.id != u32::MAX).then_some((best.id as usize, best.dist_sq))
    }

    fn search(&self, q: &[f64; K], lo: usize, hi: usize, best: &mut Best) {
        if hi - lo <= LEAF_SIZE {
            for slot in lo..hi {
                best.offer(self.ids[slot], dist_sq(q, &self.coords[slot]));
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = self.axes[mid] as usize;
        best.offer(self.ids[mid], dist_sq(q, &self.coords[mid]));
        let diff = q[axis] - self.coords[mid][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, best);
        if diff * diff <= best.dist_sq {
            self.search(q, far.0, far.1, best);
        }
    }
}

struct Best {
    id: u32,
    dist_sq: f64,
}

impl Best {
    #[inline]
    fn offer(&mut self, id: u32, d: f64) {
        if d < self.dist_sq || (d == self.dist_sq && id < self.id) {
            self.id = id;
            self.dist_sq = d;
        }
    }
}

#[inline]
fn dist_sq<const K: usize>(a: &[f64; K], b: &[f64; K]) -> f64 {
    let mut s = 0.0;
    for k in 0..K {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

/// Splits at the median along the widest side of `cell`, a box known to
/// contain every item. Child cells are the two halves of the parent.
fn build<const K: usize>(items: &mut [([f64; K], u32)], axes: &mut [u8], offset: usize, cell: [[f64; 2]; K]) {
    let n = items.len();
    if n <= LEAF_SIZE {
        return;
    }
    let axis = (0..K)
        .max_by(|&a, &b| {
            (cell[a][1] - cell[a][0])
                .total_cmp(&(cell[b][1] - cell[b][0]))
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    let mid = n / 2;
    items.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1)));
    axes[offset + mid] = axis as u8;
    let split = items[mid].0[axis];
    let (mut lower, mut upper) = (cell, cell);
    lower[axis][1] = split;
    upper[axis][0] = split;
    let (left, rest) = items.split_at_mut(mid);
    build(left, axes, offset, lower);
    build(&mut rest[1..], axes, offset + mid + 1, upper);
}

fn bounding_box<const K: usize>(items: &[([f64; K], u32)]) -> [[f64; 2]; K] {
    let mut cell = [[f64::INFINITY, f64::NEG_INFINITY]; K];
    for (p, _) in items {
        for k in 0..K {
            cell[k][0] = cell[k][0].min(p[k]);
            cell[k][1] = cell[k][1].max(p[k]);
        }
    }
    cell
}

/// Result of a single-nearest query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub point: Point3<f64>,
    pub dist_sq: f64,
}

/// Nearest-neighbor index over a 3D point cloud. Immutable after construction.
#[derive(Debug, Clone)]
pub struct NearestNeighborIndex {
    tree: KdTree<3>,
    points: Vec<Point3<f64>>,
}

impl NearestNeighborIndex {
    pub fn new(target: &PointCloud) -> Self {
        Self {
            tree: KdTree::new(target.iter().map(|p| [p.x, p.y, p.z])),
            points: target.points().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn nearest(&self, q: &Point3<f64>) -> Option<Neighbor> {
        self.nearest_within(q, f64::INFINITY)
    }

    /// Nearest target point no farther than `max_dist` (inclusive).
    pub fn nearest_within(&self, q: &Point3<f64>, max_dist: f64) -> Option<Neighbor> {
        self.tree
            .nearest_within(&[q.x, q.y, q.z], max_dist * max_dist)
            .map(|(index, dist_sq)| Neighbor {
                index,
                point: self.points[index],
                dist_sq,
            })
    }
}
