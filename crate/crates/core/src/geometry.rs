//! Small geometric utilities shared across the pipeline: rigid transforms,
//! an exact k-d tree for nearest-neighbour queries, and seed derivation.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rigid motion in 3D: rotation followed by translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// self ∘ other: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle in degrees (axis-angle magnitude).
    pub fn rotation_angle_deg(&self) -> f64 {
        let tr = self.rotation.trace();
        let c = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }

    /// Check orthonormality and det = +1 within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let should_be_identity = self.rotation.transpose() * self.rotation;
        let dev = (should_be_identity - Matrix3::identity()).abs().max();
        if dev > tol {
            return Err(Error::Invariant(format!(
                "rotation not orthonormal (deviation {dev:.3e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > tol {
            return Err(Error::Invariant(format!(
                "rotation determinant {det} != +1"
            )));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Invariant("non-finite translation".into()));
        }
        Ok(())
    }
}

/// Least-squares rigid fit mapping `source` onto `target` (paired points),
/// closed form via SVD of the cross-covariance, reflection-corrected.
///
/// Errors with `DegenerateConfiguration` when the centered correspondence
/// set has rank < 3.
pub fn fit_rigid(source: &[Point3<f64>], target: &[Point3<f64>]) -> Result<RigidTransform> {
    assert_eq!(source.len(), target.len());
    let n = source.len();
    if n < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "only {n} correspondences"
        )));
    }
    let inv_n = 1.0 / n as f64;
    let cs: Vector3<f64> = source.iter().map(|p| p.coords).sum::<Vector3<f64>>() * inv_n;
    let ct: Vector3<f64> = target.iter().map(|p| p.coords).sum::<Vector3<f64>>() * inv_n;

    let mut cov = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        cov += (s.coords - cs) * (t.coords - ct).transpose();
    }

    // Rank check on the centered source spread, not just the cross-covariance:
    // collinear/coplanar correspondences do not pin down the rotation.
    let mut scatter = Matrix3::zeros();
    for s in source {
        let d = s.coords - cs;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|&&v| v > max_ev * 1e-12 && v > 1e-18)
        .count();
    if rank < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "correspondence set rank {rank} < 3"
        )));
    }

    let svd = cov.svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut r = vt.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut flip = Matrix3::identity();
        flip[(2, 2)] = -1.0;
        r = vt.transpose() * flip * u.transpose();
    }
    let t = ct - r * cs;
    Ok(RigidTransform {
        rotation: r,
        translation: t,
    })
}

/// Exact k-d tree over fixed-dimension points. Queries return true nearest
/// neighbours; no approximation.
pub struct KdTree<const K: usize> {
    points: Vec<[f64; K]>,
    /// Point indices arranged in kd order (median layout over ranges).
    order: Vec<u32>,
}

impl<const K: usize> KdTree<K> {
    pub fn build(points: Vec<[f64; K]>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let n = order.len();
        if n > 1 {
            build_range(&points, &mut order, 0);
        }
        KdTree { points, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64; K] {
        &self.points[index]
    }

    /// Index and squared distance of the nearest point to `query`.
    pub fn nearest(&self, query: &[f64; K]) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        if self.order.is_empty() {
            return None;
        }
        self.nearest_in(query, 0, self.order.len(), 0, &mut best);
        Some(best)
    }

    /// Up to `k` nearest points, closest first. Ties broken by smaller
    /// point index for determinism.
    pub fn knn(&self, query: &[f64; K], k: usize) -> Vec<(usize, f64)> {
        let mut heap: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        if k == 0 || self.order.is_empty() {
            return heap;
        }
        self.knn_in(query, 0, self.order.len(), 0, k, &mut heap);
        heap.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        heap
    }

    /// Like `knn`, but every point whose distance ties the k-th smallest
    /// (within a tiny relative tolerance absorbing rounding differences) is
    /// included, so the result is a function of geometry alone and does not
    /// depend on point insertion order or coordinate-frame rounding.
    pub fn knn_with_ties(&self, query: &[f64; K], k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.order.is_empty() {
            return Vec::new();
        }
        let mut candidates: Vec<(usize, f64)> = Vec::with_capacity(2 * k);
        self.knn_ties_in(query, 0, self.order.len(), 0, k, &mut candidates);
        candidates.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        candidates
    }

    #[allow(clippy::too_many_arguments)]
    fn knn_ties_in(
        &self,
        query: &[f64; K],
        lo: usize,
        hi: usize,
        depth: usize,
        k: usize,
        candidates: &mut Vec<(usize, f64)>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid] as usize;
        let d2 = dist2(&self.points[idx], query);
        push_candidate_with_ties(candidates, k, idx, d2);
        let axis = depth % K;
        let diff = query[axis] - self.points[idx][axis];
        let (first, second) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_ties_in(query, first.0, first.1, depth + 1, k, candidates);
        let worst = current_worst(candidates, k);
        if diff * diff <= worst {
            self.knn_ties_in(query, second.0, second.1, depth + 1, k, candidates);
        }
    }

    fn nearest_in(
        &self,
        query: &[f64; K],
        lo: usize,
        hi: usize,
        depth: usize,
        best: &mut (usize, f64),
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid] as usize;
        let d2 = dist2(&self.points[idx], query);
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        let axis = depth % K;
        let diff = query[axis] - self.points[idx][axis];
        let (first, second) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_in(query, first.0, first.1, depth + 1, best);
        if diff * diff <= best.1 {
            self.nearest_in(query, second.0, second.1, depth + 1, best);
        }
    }

    fn knn_in(
        &self,
        query: &[f64; K],
        lo: usize,
        hi: usize,
        depth: usize,
        k: usize,
        heap: &mut Vec<(usize, f64)>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid] as usize;
        let d2 = dist2(&self.points[idx], query);
        push_candidate(heap, k, idx, d2);
        let axis = depth % K;
        let diff = query[axis] - self.points[idx][axis];
        let (first, second) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_in(query, first.0, first.1, depth + 1, k, heap);
        let worst = current_worst(heap, k);
        if diff * diff <= worst {
            self.knn_in(query, second.0, second.1, depth + 1, k, heap);
        }
    }
}

fn dist2<const K: usize>(a: &[f64; K], b: &[f64; K]) -> f64 {
    let mut acc = 0.0;
    for i in 0..K {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

fn current_worst(heap: &[(usize, f64)], k: usize) -> f64 {
    if heap.len() < k {
        f64::INFINITY
    } else {
        heap.iter().map(|c| c.1).fold(0.0, f64::max)
    }
}

fn push_candidate(heap: &mut Vec<(usize, f64)>, k: usize, idx: usize, d2: f64) {
    heap.push((idx, d2));
    if heap.len() > k {
        // drop the worst (ties: larger index dropped first to keep smaller indices)
        let mut worst = 0;
        for i in 1..heap.len() {
            let (wi, wd) = heap[worst];
            let (ci, cd) = heap[i];
            if cd > wd || (cd == wd && ci > wi) {
                worst = i;
            }
        }
        heap.swap_remove(worst);
    }
}

/// Relative slack for recognizing equidistant candidates despite rounding.
const TIE_REL_EPS: f64 = 1e-9;

fn push_candidate_with_ties(heap: &mut Vec<(usize, f64)>, k: usize, idx: usize, d2: f64) {
    heap.push((idx, d2));
    if heap.len() > k {
        // keep everything no farther than the k-th smallest distance,
        // counting near-exact ties as equal
        heap.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        let cutoff = heap[k - 1].1 * (1.0 + TIE_REL_EPS);
        heap.retain(|c| c.1 <= cutoff);
    }
}

fn build_range<const K: usize>(points: &[[f64; K]], order: &mut [u32], depth: usize) {
    let n = order.len();
    if n <= 1 {
        return;
    }
    let axis = depth % K;
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let (left, rest) = order.split_at_mut(mid);
    build_range(points, left, depth + 1);
    build_range(points, &mut rest[1..], depth + 1);
}

/// splitmix64 finalizer; stable across runs and platforms.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over bytes; used to derive per-subject seeds from string ids.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Derive a child seed from a master seed and a stream label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    mix64(master ^ hash_bytes(label.as_bytes()))
}

/// Derive a child seed from a master seed and a stream index.
pub fn derive_seed_index(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index))
}
