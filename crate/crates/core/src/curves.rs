//! Radial-curve depth representation: a frontalized face is approximated by
//! `n_curves` rays emanating from the nosetip in the xy-plane, each sampled
//! at `n_points` radii. The depth (z relative to the nosetip z) at every
//! indexed point yields the flattened depth feature vector.

use std::fmt;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::KdTree;
use crate::mesh_io::Mesh;

pub const DEFAULT_N_CURVES: usize = 100;
pub const DEFAULT_N_POINTS: usize = 40;
pub const DEFAULT_R_MAX_MM: f64 = 80.0;

/// Local surface interpolation support: samples farther than this from any
/// vertex (in xy) are marked invalid and filled along the curve.
pub const SUPPORT_RADIUS_MM: f64 = 5.0;
const KNN: usize = 3;

/// Depth samples on the indexed radial curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthFeatureGrid {
    pub n_curves: usize,
    pub n_points: usize,
    /// Row-major: `depths[j * n_points + k]` is curve `j`, point `k`, in mm.
    pub depths: Vec<f64>,
    /// Curve angles in radians; uniform over [0, 2π).
    pub curve_angles: Vec<f64>,
    /// Sample radii in mm; uniform over (0, r_max].
    pub radii: Vec<f64>,
    /// Pre-interpolation support flags, row-major like `depths`.
    pub validity: Vec<bool>,
}

impl DepthFeatureGrid {
    pub fn depth(&self, curve: usize, point: usize) -> f64 {
        self.depths[curve * self.n_points + point]
    }

    pub fn validate(&self) -> Result<()> {
        if self.depths.len() != self.n_curves * self.n_points
            || self.validity.len() != self.depths.len()
            || self.curve_angles.len() != self.n_curves
            || self.radii.len() != self.n_points
        {
            return Err(Error::Invariant("depth grid shape mismatch".into()));
        }
        if self.depths.iter().any(|d| !d.is_finite()) {
            return Err(Error::Invariant("NaN depth in grid".into()));
        }
        Ok(())
    }
}

/// Fixed-length feature vector kinds. Depth/delta grids flatten curve-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Depth4000,
    Coord136,
    Dist2278,
    Delta4000,
    DeltaCoord136,
    DeltaDist2278,
}

impl FeatureKind {
    /// Fixed length for landmark kinds; depth kinds scale with grid shape.
    pub fn fixed_len(&self) -> Option<usize> {
        match self {
            FeatureKind::Coord136 | FeatureKind::DeltaCoord136 => Some(136),
            FeatureKind::Dist2278 | FeatureKind::DeltaDist2278 => Some(2278),
            FeatureKind::Depth4000 | FeatureKind::Delta4000 => None,
        }
    }

    pub fn delta_kind(&self) -> FeatureKind {
        match self {
            FeatureKind::Depth4000 | FeatureKind::Delta4000 => FeatureKind::Delta4000,
            FeatureKind::Coord136 | FeatureKind::DeltaCoord136 => FeatureKind::DeltaCoord136,
            FeatureKind::Dist2278 | FeatureKind::DeltaDist2278 => FeatureKind::DeltaDist2278,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Depth4000 => "Depth4000",
            FeatureKind::Coord136 => "Coord136",
            FeatureKind::Dist2278 => "Dist2278",
            FeatureKind::Delta4000 => "Delta4000",
            FeatureKind::DeltaCoord136 => "DeltaCoord136",
            FeatureKind::DeltaDist2278 => "DeltaDist2278",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub kind: FeatureKind,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, kind: FeatureKind) -> Result<Self> {
        if let Some(len) = kind.fixed_len() {
            if values.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    got: values.len(),
                });
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!("NaN in {kind} feature vector")));
        }
        Ok(FeatureVector { values, kind })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sample the mesh surface along radial curves around the nosetip.
///
/// For curve `j` (angle θ_j = 2πj/n_curves) and point `k` (radius
/// r_k = (k+1)·r_max/n_points) the depth is the inverse-distance-weighted
/// average z of the 3 nearest vertices in xy-projection within 5 mm, minus
/// the nosetip z. Unsupported cells are filled by linear interpolation along
/// the curve (nearest valid value past the ends).
pub fn extract_radial_curves(
    mesh: &Mesh,
    nosetip: &Point3<f64>,
    n_curves: usize,
    n_points: usize,
    r_max_mm: f64,
) -> Result<DepthFeatureGrid> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    assert!(n_curves >= 1 && n_points >= 1 && r_max_mm > 0.0);

    let tree = KdTree::build(mesh.vertices.iter().map(|p| [p.x, p.y]).collect());
    let curve_angles: Vec<f64> = (0..n_curves)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n_curves as f64)
        .collect();
    let radii: Vec<f64> = (0..n_points)
        .map(|k| (k + 1) as f64 * r_max_mm / n_points as f64)
        .collect();

    let support_r2 = SUPPORT_RADIUS_MM * SUPPORT_RADIUS_MM;
    let mut depths = vec![f64::NAN; n_curves * n_points];
    let mut validity = vec![false; n_curves * n_points];

    for (j, &theta) in curve_angles.iter().enumerate() {
        let (sin_t, cos_t) = theta.sin_cos();
        for (k, &r) in radii.iter().enumerate() {
            let q = [nosetip.x + r * cos_t, nosetip.y + r * sin_t];
            let candidates = tree.knn_with_ties(&q, KNN);
            let supported: Vec<(usize, f64)> = candidates
                .into_iter()
                .filter(|&(_, d2)| d2 <= support_r2)
                .collect();
            if supported.is_empty() {
                continue;
            }
            let cell = j * n_points + k;
            validity[cell] = true;
            // Exact hit dominates: avoid division by ~zero distance.
            if let Some(&(idx, _)) = supported.iter().find(|&&(_, d2)| d2 < 1e-18) {
                depths[cell] = mesh.vertices[idx].z - nosetip.z;
            } else {
                let mut num = 0.0;
                let mut den = 0.0;
                for &(idx, d2) in &supported {
                    let w = 1.0 / d2.sqrt();
                    num += w * mesh.vertices[idx].z;
                    den += w;
                }
                depths[cell] = num / den - nosetip.z;
            }
        }
        fill_curve(&mut depths[j * n_points..(j + 1) * n_points], j)?;
    }

    let grid = DepthFeatureGrid {
        n_curves,
        n_points,
        depths,
        curve_angles,
        radii,
        validity,
    };
    grid.validate()?;
    Ok(grid)
}

/// Linear interpolation across NaN runs; constant extension at the ends.
fn fill_curve(depths: &mut [f64], curve: usize) -> Result<()> {
    let valid: Vec<usize> = (0..depths.len()).filter(|&k| depths[k].is_finite()).collect();
    if valid.is_empty() {
        return Err(Error::AllInvalidCurve { curve });
    }
    for k in 0..depths.len() {
        if depths[k].is_finite() {
            continue;
        }
        let prev = valid.iter().rev().find(|&&v| v < k).copied();
        let next = valid.iter().find(|&&v| v > k).copied();
        depths[k] = match (prev, next) {
            (Some(a), Some(b)) => {
                let t = (k - a) as f64 / (b - a) as f64;
                depths[a] + t * (depths[b] - depths[a])
            }
            (Some(a), None) => depths[a],
            (None, Some(b)) => depths[b],
            (None, None) => unreachable!(),
        };
    }
    Ok(())
}

/// Row-major flatten (curve-major, then point index).
pub fn grid_to_vector(grid: &DepthFeatureGrid) -> Result<FeatureVector> {
    grid.validate()?;
    FeatureVector::new(grid.depths.clone(), FeatureKind::Depth4000)
}

/// Inverse of [`grid_to_vector`] given the grid shape; restores depths
/// exactly (angles/radii are recomputed, validity is all-true).
pub fn vector_to_grid(
    vector: &FeatureVector,
    n_curves: usize,
    n_points: usize,
    r_max_mm: f64,
) -> Result<DepthFeatureGrid> {
    if vector.values.len() != n_curves * n_points {
        return Err(Error::DimensionMismatch {
            expected: n_curves * n_points,
            got: vector.values.len(),
        });
    }
    Ok(DepthFeatureGrid {
        n_curves,
        n_points,
        depths: vector.values.clone(),
        curve_angles: (0..n_curves)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n_curves as f64)
            .collect(),
        radii: (0..n_points)
            .map(|k| (k + 1) as f64 * r_max_mm / n_points as f64)
            .collect(),
        validity: vec![true; n_curves * n_points],
    })
}
