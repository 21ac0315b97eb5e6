//! Metric-space primitives: points, tie-break augmentation, and exact
//! k-NN queries over explicit sample pools.
//!
//! Two query paths are provided: a brute-force scan (the reference) and a
//! k-d tree. Both rank candidates by the same total order
//! `(distance, tie-break, pool index)` and return bit-identical neighbor
//! lists; the pruning in the tree is conservative under distance ties so
//! the tie-break coordinate always gets the final say.

use crate::error::Error;
use crate::Result;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A point of the instance space.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyPoint);
        }
        for (i, c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFiniteCoordinate { index: i });
            }
        }
        Ok(Point { coords })
    }

    /// 1-D convenience constructor.
    pub fn one_d(x: f64) -> Self {
        Point::new(vec![x]).expect("finite coordinate")
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coord(&self, axis: usize) -> f64 {
        self.coords[axis]
    }
}

/// A point carrying its tie-break draw from `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPoint {
    pub point: Point,
    pub tiebreak: f64,
}

impl AugmentedPoint {
    pub fn new(point: Point, tiebreak: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tiebreak) {
            return Err(Error::TieBreakOutOfRange { value: tiebreak });
        }
        Ok(AugmentedPoint { point, tiebreak })
    }
}

/// Which sampling phase produced a labeled sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// First-round i.i.d. draw from the data distribution.
    Round1,
    /// Second-round i.i.d. draw from the data distribution.
    Round2FromP,
    /// Second-round draw accepted by the rejection sampler.
    Round2Rejection,
}

/// An instance with its binary label, tie-break value and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub aug: AugmentedPoint,
    pub label: u8,
    pub provenance: Provenance,
}

impl LabeledSample {
    pub fn new(aug: AugmentedPoint, label: u8, provenance: Provenance) -> Result<Self> {
        if label > 1 {
            return Err(Error::NonBinaryLabel { value: label });
        }
        Ok(LabeledSample {
            aug,
            label,
            provenance,
        })
    }

    pub fn point(&self) -> &Point {
        &self.aug.point
    }

    pub fn tiebreak(&self) -> f64 {
        self.aug.tiebreak
    }
}

/// The metrics supported on R^d.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Linf,
    L2,
    L1,
}

impl Metric {
    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        Ok(self.distance_unchecked(a.coords(), b.coords()))
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Linf => {
                let mut acc = 0.0f64;
                for i in 0..a.len() {
                    let d = (a[i] - b[i]).abs();
                    if d > acc {
                        acc = d;
                    }
                }
                acc
            }
            Metric::L2 => {
                let mut acc = 0.0f64;
                for i in 0..a.len() {
                    let d = a[i] - b[i];
                    acc += d * d;
                }
                acc.sqrt()
            }
            Metric::L1 => {
                let mut acc = 0.0f64;
                for i in 0..a.len() {
                    acc += (a[i] - b[i]).abs();
                }
                acc
            }
        }
    }
}

/// One entry of a k-NN result: pool index plus realized distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Total order on candidate neighbors: distance, then tie-break, then pool
/// index. The index is unreachable in practice (tie-break draws are
/// distinct almost surely) but keeps the order total for duplicated
/// samples.
#[inline]
fn cmp_candidates(a: (f64, f64, usize), b: (f64, f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| a.1.total_cmp(&b.1))
        .then_with(|| a.2.cmp(&b.2))
}

/// Exact k-NN by full scan. Reference implementation for the k-d tree.
pub fn knn_query(
    metric: Metric,
    pool: &[LabeledSample],
    x: &Point,
    k: usize,
) -> Result<Vec<Neighbor>> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if k == 0 || k > pool.len() {
        return Err(Error::KTooLarge { k, pool: pool.len() });
    }
    let mut ranked: Vec<(f64, f64, usize)> = Vec::with_capacity(pool.len());
    for (i, s) in pool.iter().enumerate() {
        let d = metric.distance(x, s.point())?;
        ranked.push((d, s.tiebreak(), i));
    }
    ranked.sort_by(|a, b| cmp_candidates(*a, *b));
    Ok(ranked[..k]
        .iter()
        .map(|&(d, _, i)| Neighbor {
            index: i,
            distance: d,
        })
        .collect())
}

/// Closed-ball count by full scan: |{i : rho(center, X_i) <= radius}|.
pub fn count_within(
    metric: Metric,
    pool: &[LabeledSample],
    center: &Point,
    radius: f64,
) -> Result<usize> {
    let mut n = 0;
    for s in pool {
        if metric.distance(center, s.point())? <= radius {
            n += 1;
        }
    }
    Ok(n)
}

/// k-d tree over a sample pool.
///
/// Nodes live implicitly in `order`: the node of a subrange `[lo, hi)` is
/// the median slot, children are the two halves, and the split axis cycles
/// with depth. Works for all three metrics because the per-axis coordinate
/// gap lower-bounds each of them.
#[derive(Debug, Clone)]
struct KdTree {
    order: Vec<u32>,
    dim: usize,
}

impl KdTree {
    fn build(samples: &[LabeledSample], dim: usize) -> Self {
        let mut order: Vec<u32> = (0..samples.len() as u32).collect();
        if !order.is_empty() {
            Self::split(&mut order, samples, 0, dim);
        }
        KdTree { order, dim }
    }

    fn split(slice: &mut [u32], samples: &[LabeledSample], depth: usize, dim: usize) {
        if slice.len() <= 1 {
            return;
        }
        let axis = depth % dim;
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            let ca = samples[a as usize].point().coord(axis);
            let cb = samples[b as usize].point().coord(axis);
            ca.total_cmp(&cb).then_with(|| a.cmp(&b))
        });
        let (left, rest) = slice.split_at_mut(mid);
        Self::split(left, samples, depth + 1, dim);
        Self::split(&mut rest[1..], samples, depth + 1, dim);
    }
}

/// Heap entry for the query; max-heap keyed by the candidate total order.
#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    dist: f64,
    tiebreak: f64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_candidates(
            (self.dist, self.tiebreak, self.index),
            (other.dist, other.tiebreak, other.index),
        )
    }
}

/// An immutable sample pool with a spatial index.
///
/// Construction is single-threaded; queries are read-only and safe to run
/// concurrently.
#[derive(Debug, Clone)]
pub struct Pool {
    metric: Metric,
    samples: Vec<LabeledSample>,
    dim: usize,
    tree: KdTree,
}

impl Pool {
    pub fn new(metric: Metric, samples: Vec<LabeledSample>) -> Result<Self> {
        let dim = match samples.first() {
            Some(s) => s.point().dim(),
            None => 0,
        };
        for s in &samples {
            if s.point().dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.point().dim(),
                });
            }
        }
        let tree = KdTree::build(&samples, dim.max(1));
        Ok(Pool {
            metric,
            samples,
            dim,
            tree,
        })
    }

    pub fn empty(metric: Metric) -> Self {
        Pool::new(metric, Vec::new()).expect("empty pool always valid")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn sample(&self, index: usize) -> &LabeledSample {
        &self.samples[index]
    }

    fn check_query(&self, x: &Point) -> Result<()> {
        if !self.samples.is_empty() && x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// The k nearest samples to `x`, tie-broken, nearest first.
    ///
    /// Bit-identical to [`knn_query`] on the same pool.
    pub fn knn(&self, x: &Point, k: usize) -> Result<Vec<Neighbor>> {
        if self.samples.is_empty() {
            return Err(Error::EmptyPool);
        }
        if k == 0 || k > self.samples.len() {
            return Err(Error::KTooLarge {
                k,
                pool: self.samples.len(),
            });
        }
        self.check_query(x)?;
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k + 1);
        self.knn_recurse(x, k, 0, self.samples.len(), 0, &mut heap);
        let mut out: Vec<HeapEntry> = heap.into_vec();
        out.sort();
        Ok(out
            .into_iter()
            .map(|e| Neighbor {
                index: e.index,
                distance: e.dist,
            })
            .collect())
    }

    fn knn_recurse(
        &self,
        x: &Point,
        k: usize,
        lo: usize,
        hi: usize,
        depth: usize,
        heap: &mut BinaryHeap<HeapEntry>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.tree.order[mid] as usize;
        let s = &self.samples[idx];
        let d = self.metric.distance_unchecked(x.coords(), s.point().coords());
        let entry = HeapEntry {
            dist: d,
            tiebreak: s.tiebreak(),
            index: idx,
        };
        if heap.len() < k {
            heap.push(entry);
        } else if entry < *heap.peek().expect("heap nonempty") {
            heap.pop();
            heap.push(entry);
        }
        if hi - lo == 1 {
            return;
        }
        let axis = depth % self.tree.dim;
        let diff = x.coord(axis) - s.point().coord(axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_recurse(x, k, near.0, near.1, depth + 1, heap);
        // Visit the far side unless every point there is strictly worse
        // than the current k-th best; on exact distance ties the tie-break
        // can still win, so equality does not prune.
        let must_visit = heap.len() < k
            || diff.abs() <= heap.peek().expect("heap nonempty").dist;
        if must_visit {
            self.knn_recurse(x, k, far.0, far.1, depth + 1, heap);
        }
    }

    /// Closed-ball count around `center`; no tie-breaking involved.
    pub fn count_within(&self, center: &Point, radius: f64) -> Result<usize> {
        self.check_query(center)?;
        if radius < 0.0 || self.samples.is_empty() {
            return Ok(0);
        }
        let mut n = 0;
        self.count_recurse(center, radius, 0, self.samples.len(), 0, &mut n);
        Ok(n)
    }

    fn count_recurse(
        &self,
        center: &Point,
        radius: f64,
        lo: usize,
        hi: usize,
        depth: usize,
        n: &mut usize,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.tree.order[mid] as usize;
        let s = &self.samples[idx];
        if self
            .metric
            .distance_unchecked(center.coords(), s.point().coords())
            <= radius
        {
            *n += 1;
        }
        if hi - lo == 1 {
            return;
        }
        let axis = depth % self.tree.dim;
        let diff = center.coord(axis) - s.point().coord(axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.count_recurse(center, radius, near.0, near.1, depth + 1, n);
        if diff.abs() <= radius {
            self.count_recurse(center, radius, far.0, far.1, depth + 1, n);
        }
    }

    /// Distance from `x` to its tie-broken j-th nearest neighbor (1-based).
    pub fn kth_distance(&self, x: &Point, j: usize) -> Result<f64> {
        let nn = self.knn(x, j)?;
        Ok(nn[j - 1].distance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_at(coords: Vec<f64>, tiebreak: f64, label: u8) -> LabeledSample {
        LabeledSample::new(
            AugmentedPoint::new(Point::new(coords).unwrap(), tiebreak).unwrap(),
            label,
            Provenance::Round1,
        )
        .unwrap()
    }

    #[test]
    fn distance_linf_3_4() {
        let a = Point::new(vec![0.0, 0.0]).unwrap();
        let b = Point::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(Metric::Linf.distance(&a, &b).unwrap(), 4.0);
    }

    #[test]
    fn distance_l2_3_4_5_triangle() {
        let a = Point::new(vec![0.0, 0.0]).unwrap();
        let b = Point::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(Metric::L2.distance(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn distance_l1_identity() {
        let a = Point::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(Metric::L1.distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn distance_dimension_mismatch_errors() {
        let a = Point::new(vec![0.0]).unwrap();
        let b = Point::new(vec![0.0, 1.0]).unwrap();
        assert!(Metric::L2.distance(&a, &b).is_err());
    }

    #[test]
    fn point_rejects_nan() {
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(Point::new(vec![]).is_err());
    }

    #[test]
    fn augmentation_and_labels_are_validated() {
        let p = Point::one_d(0.5);
        assert!(AugmentedPoint::new(p.clone(), 1.5).is_err());
        assert!(AugmentedPoint::new(p.clone(), -0.1).is_err());
        let aug = AugmentedPoint::new(p, 0.5).unwrap();
        assert!(LabeledSample::new(aug, 2, Provenance::Round1).is_err());
    }

    #[test]
    fn knn_returns_nearest_in_order() {
        let pool = vec![
            sample_at(vec![0.3], 0.5, 0),
            sample_at(vec![0.1], 0.5, 1),
            sample_at(vec![0.2], 0.5, 0),
        ];
        let x = Point::one_d(0.0);
        let nn = knn_query(Metric::L2, &pool, &x, 2).unwrap();
        assert_eq!(nn[0].index, 1);
        assert_eq!(nn[1].index, 2);
        assert!(nn[0].distance <= nn[1].distance);
    }

    #[test]
    fn equidistant_neighbors_prefer_lower_tiebreak() {
        let pool = vec![
            sample_at(vec![1.0], 0.7, 0),
            sample_at(vec![-1.0], 0.2, 1),
        ];
        let x = Point::one_d(0.0);
        let nn = knn_query(Metric::L2, &pool, &x, 1).unwrap();
        assert_eq!(nn[0].index, 1);
    }

    #[test]
    fn knn_rejects_bad_k() {
        let pool = vec![sample_at(vec![0.0], 0.1, 0)];
        let x = Point::one_d(0.0);
        assert!(knn_query(Metric::L2, &pool, &x, 2).is_err());
        assert!(knn_query(Metric::L2, &[], &x, 1).is_err());
    }

    #[test]
    fn count_within_edges() {
        let pool = vec![
            sample_at(vec![0.1], 0.5, 0),
            sample_at(vec![0.9], 0.5, 1),
        ];
        let x = Point::one_d(0.5);
        assert_eq!(count_within(Metric::L2, &pool, &x, 0.0).unwrap(), 0);
        assert_eq!(count_within(Metric::L2, &pool, &x, 1.0).unwrap(), 2);
    }

    #[test]
    fn pool_matches_brute_force_on_permutations() {
        // Exhaustive over all permutations of an 8-point pool.
        let base: Vec<LabeledSample> = (0..8)
            .map(|i| sample_at(vec![(i as f64) * 0.1, (i as f64) * 0.07], 0.1 * i as f64, (i % 2) as u8))
            .collect();
        let x = Point::new(vec![0.33, 0.21]).unwrap();
        let reference = knn_query(Metric::Linf, &base, &x, 5).unwrap();
        let ref_keys: Vec<(f64, f64)> = reference
            .iter()
            .map(|n| (n.distance, base[n.index].tiebreak()))
            .collect();

        let mut perm: Vec<usize> = (0..8).collect();
        permute(&mut perm, 0, &mut |p| {
            let shuffled: Vec<LabeledSample> = p.iter().map(|&i| base[i].clone()).collect();
            let brute = knn_query(Metric::Linf, &shuffled, &x, 5).unwrap();
            let pool = Pool::new(Metric::Linf, shuffled.clone()).unwrap();
            let indexed = pool.knn(&x, 5).unwrap();
            assert_eq!(brute, indexed, "kd tree must match brute force");
            let keys: Vec<(f64, f64)> = brute
                .iter()
                .map(|n| (n.distance, shuffled[n.index].tiebreak()))
                .collect();
            assert_eq!(keys, ref_keys, "result invariant under permutation");
        });
    }

    fn permute(items: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
        if start == items.len() {
            f(items);
            return;
        }
        for i in start..items.len() {
            items.swap(start, i);
            permute(items, start + 1, f);
            items.swap(start, i);
        }
    }

    #[test]
    fn kth_distance_counts_consistent() {
        let pool: Vec<LabeledSample> = (0..50)
            .map(|i| sample_at(vec![(i as f64) / 50.0], (i as f64) / 100.0, 0))
            .collect();
        let p = Pool::new(Metric::L1, pool).unwrap();
        let x = Point::one_d(0.42);
        for j in 1..=10 {
            let d = p.kth_distance(&x, j).unwrap();
            assert!(p.count_within(&x, d).unwrap() >= j);
        }
    }
}
