//! Geometric preprocessing: hole filling, central face cropping, Laplacian
//! smoothing, nosetip localization and ICP-based frontalization.
//!
//! The pipeline order is fill → crop → smooth → frontalize.

use std::collections::BTreeMap;

use log::warn;
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_rigid, KdTree, RigidTransform};
use crate::mesh_io::{Mesh, MeshGrid};

/// Pipeline knobs. Defaults cover the central facial region of an adult
/// face in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub crop_radius_mm: f64,
    pub smooth_iterations: usize,
    pub smooth_lambda: f64,
    pub icp_max_iters: usize,
    pub icp_tol_mm: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            crop_radius_mm: 80.0,
            smooth_iterations: 10,
            smooth_lambda: 0.5,
            icp_max_iters: 60,
            icp_tol_mm: 1e-4,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crop_radius_mm <= 0.0 {
            return Err(Error::Config("crop_radius_mm must be positive".into()));
        }
        if !(0.0 < self.smooth_lambda && self.smooth_lambda < 1.0) {
            return Err(Error::Config("smooth_lambda must lie in (0,1)".into()));
        }
        if self.icp_max_iters == 0 {
            return Err(Error::Config("icp_max_iters must be positive".into()));
        }
        if self.icp_tol_mm <= 0.0 {
            return Err(Error::Config("icp_tol_mm must be positive".into()));
        }
        Ok(())
    }
}

/// Fill holes. On range grids a hole is an invalid interior cell; a cell is
/// filled with the average of its valid 4-neighbours once at least two are
/// valid, iterated to fixpoint. Face meshes get interior boundary loops
/// closed with a centroid fan. Originally valid vertices are never moved.
pub fn fill_holes(mesh: &Mesh) -> Result<Mesh> {
    if let Some(grid) = &mesh.grid {
        fill_grid_holes(mesh, grid)
    } else if !mesh.faces.is_empty() {
        fill_face_holes(mesh)
    } else {
        Err(Error::UnsupportedTopology(
            "point cloud without grid or faces".into(),
        ))
    }
}

fn fill_grid_holes(mesh: &Mesh, grid: &MeshGrid) -> Result<Mesh> {
    let (rows, cols) = (grid.rows, grid.cols);
    let mut pos: Vec<Option<Point3<f64>>> = grid
        .cells
        .iter()
        .map(|c| c.map(|i| mesh.vertices[i]))
        .collect();

    loop {
        let mut fills: Vec<(usize, Point3<f64>)> = Vec::new();
        for r in 1..rows.saturating_sub(1) {
            for c in 1..cols.saturating_sub(1) {
                let idx = r * cols + c;
                if pos[idx].is_some() {
                    continue;
                }
                let neighbors = [
                    pos[(r - 1) * cols + c],
                    pos[(r + 1) * cols + c],
                    pos[r * cols + c - 1],
                    pos[r * cols + c + 1],
                ];
                let valid: Vec<Point3<f64>> = neighbors.into_iter().flatten().collect();
                if valid.len() >= 2 {
                    let sum: Vector3<f64> = valid.iter().map(|p| p.coords).sum();
                    fills.push((idx, Point3::from(sum / valid.len() as f64)));
                }
            }
        }
        if fills.is_empty() {
            break;
        }
        for (idx, p) in fills {
            pos[idx] = Some(p);
        }
    }

    // Keep original vertices at their indices; append filled cells in
    // row-major order.
    let mut vertices = mesh.vertices.clone();
    let mut cells = grid.cells.clone();
    for (idx, cell) in cells.iter_mut().enumerate() {
        if cell.is_none() {
            if let Some(p) = pos[idx] {
                *cell = Some(vertices.len());
                vertices.push(p);
            }
        }
    }
    let out = Mesh {
        vertices,
        faces: mesh.faces.clone(),
        grid: Some(MeshGrid { rows, cols, cells }),
    };
    out.validate()?;
    Ok(out)
}

fn fill_face_holes(mesh: &Mesh) -> Result<Mesh> {
    // Boundary edges are incident to exactly one face.
    let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            *edge_count.entry(key).or_insert(0) += 1;
        }
    }
    let mut next: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&(a, b), &count) in &edge_count {
        if count == 1 {
            next.entry(a).or_default().push(b);
            next.entry(b).or_default().push(a);
        }
    }
    // Walk boundary loops.
    let mut visited: std::collections::BTreeSet<(usize, usize)> = Default::default();
    let mut loops: Vec<Vec<usize>> = Vec::new();
    for (&start, nbrs) in &next {
        for &second in nbrs {
            let key = (start.min(second), start.max(second));
            if visited.contains(&key) {
                continue;
            }
            let mut loop_vertices = vec![start];
            let mut prev = start;
            let mut cur = second;
            visited.insert(key);
            while cur != start {
                loop_vertices.push(cur);
                let candidates = &next[&cur];
                let Some(&nxt) = candidates.iter().find(|&&v| v != prev) else {
                    break; // open chain, not a loop
                };
                visited.insert((cur.min(nxt), cur.max(nxt)));
                prev = cur;
                cur = nxt;
            }
            if cur == start && loop_vertices.len() >= 3 {
                loops.push(loop_vertices);
            }
        }
    }
    if loops.len() <= 1 {
        return Ok(mesh.clone()); // only the outer boundary (or watertight)
    }
    // The loop with largest perimeter is the outer boundary; fill the rest.
    let perimeter = |l: &[usize]| -> f64 {
        l.iter()
            .zip(l.iter().cycle().skip(1))
            .map(|(&a, &b)| (mesh.vertices[a] - mesh.vertices[b]).norm())
            .sum()
    };
    let outer = loops
        .iter()
        .enumerate()
        .max_by(|a, b| perimeter(a.1).partial_cmp(&perimeter(b.1)).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut vertices = mesh.vertices.clone();
    let mut faces = mesh.faces.clone();
    for (i, l) in loops.iter().enumerate() {
        if i == outer {
            continue;
        }
        let sum: Vector3<f64> = l.iter().map(|&v| mesh.vertices[v].coords).sum();
        let centroid = Point3::from(sum / l.len() as f64);
        let center_idx = vertices.len();
        vertices.push(centroid);
        for k in 0..l.len() {
            faces.push([l[k], l[(k + 1) % l.len()], center_idx]);
        }
    }
    let out = Mesh {
        vertices,
        faces,
        grid: None,
    };
    out.validate()?;
    Ok(out)
}

/// Highest vertex inside the central cylinder (radius 40 mm around the
/// xy-centroid). Ties break to the smallest vertex index.
pub fn detect_nosetip(mesh: &Mesh) -> Result<Point3<f64>> {
    const CYLINDER_RADIUS_MM: f64 = 40.0;
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let n = mesh.vertices.len() as f64;
    let cx = mesh.vertices.iter().map(|v| v.x).sum::<f64>() / n;
    let cy = mesh.vertices.iter().map(|v| v.y).sum::<f64>() / n;
    let r2 = CYLINDER_RADIUS_MM * CYLINDER_RADIUS_MM;
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in mesh.vertices.iter().enumerate() {
        let dx = v.x - cx;
        let dy = v.y - cy;
        if dx * dx + dy * dy > r2 {
            continue;
        }
        match best {
            Some((_, bz)) if v.z <= bz => {}
            _ => best = Some((i, v.z)),
        }
    }
    best.map(|(i, _)| mesh.vertices[i])
        .ok_or_else(|| Error::EmptyResult("no vertex inside the central cylinder".into()))
}

/// Keep vertices with Euclidean distance ≤ `radius_mm` from `center`
/// (boundary inclusive). Faces touching a removed vertex are dropped;
/// reindexing preserves order.
pub fn crop_face(mesh: &Mesh, center: &Point3<f64>, radius_mm: f64) -> Result<Mesh> {
    if radius_mm <= 0.0 {
        return Err(Error::Config("crop radius must be positive".into()));
    }
    let r2 = radius_mm * radius_mm;
    let mut keep = vec![usize::MAX; mesh.vertices.len()];
    let mut vertices = Vec::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        if (v - center).norm_squared() <= r2 {
            keep[i] = vertices.len();
            vertices.push(*v);
        }
    }
    if vertices.is_empty() {
        return Err(Error::EmptyResult("no vertex within crop radius".into()));
    }
    let faces: Vec<[usize; 3]> = mesh
        .faces
        .iter()
        .filter(|f| f.iter().all(|&v| keep[v] != usize::MAX))
        .map(|f| [keep[f[0]], keep[f[1]], keep[f[2]]])
        .collect();
    let grid = mesh.grid.as_ref().map(|g| MeshGrid {
        rows: g.rows,
        cols: g.cols,
        cells: g
            .cells
            .iter()
            .map(|c| c.and_then(|i| (keep[i] != usize::MAX).then_some(keep[i])))
            .collect(),
    });
    let out = Mesh {
        vertices,
        faces,
        grid,
    };
    out.validate()?;
    Ok(out)
}

fn neighbor_lists(mesh: &Mesh) -> Result<Vec<Vec<usize>>> {
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); mesh.vertices.len()];
    if let Some(grid) = &mesh.grid {
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let Some(v) = grid.cell(r, c) else { continue };
                if r + 1 < grid.rows {
                    if let Some(u) = grid.cell(r + 1, c) {
                        nbrs[v].push(u);
                        nbrs[u].push(v);
                    }
                }
                if c + 1 < grid.cols {
                    if let Some(u) = grid.cell(r, c + 1) {
                        nbrs[v].push(u);
                        nbrs[u].push(v);
                    }
                }
            }
        }
    } else if !mesh.faces.is_empty() {
        let mut seen: std::collections::BTreeSet<(usize, usize)> = Default::default();
        for f in &mesh.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if seen.insert((a.min(b), a.max(b))) {
                    nbrs[a].push(b);
                    nbrs[b].push(a);
                }
            }
        }
    } else {
        return Err(Error::UnsupportedTopology(
            "smoothing needs grid or face connectivity".into(),
        ));
    }
    Ok(nbrs)
}

/// Synchronous umbrella Laplacian smoothing:
/// v ← v + λ·(mean(neighbours) − v), `iterations` times.
pub fn smooth(mesh: &Mesh, iterations: usize, lambda: f64) -> Result<Mesh> {
    if !(0.0 < lambda && lambda < 1.0) {
        return Err(Error::Config("lambda must lie in (0,1)".into()));
    }
    if iterations == 0 {
        return Ok(mesh.clone());
    }
    let nbrs = neighbor_lists(mesh)?;
    let mut cur = mesh.vertices.clone();
    let mut next = cur.clone();
    for _ in 0..iterations {
        for (i, list) in nbrs.iter().enumerate() {
            if list.is_empty() {
                next[i] = cur[i];
                continue;
            }
            let mean: Vector3<f64> =
                list.iter().map(|&j| cur[j].coords).sum::<Vector3<f64>>() / list.len() as f64;
            next[i] = Point3::from(cur[i].coords + lambda * (mean - cur[i].coords));
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(Mesh {
        vertices: cur,
        faces: mesh.faces.clone(),
        grid: mesh.grid.clone(),
    })
}

/// Point-to-point ICP against a template. Alternates exact nearest-neighbour
/// correspondence with a closed-form rigid fit; the recorded residual is the
/// post-fit RMS distance, which is non-increasing across iterations.
pub fn frontalize_icp(
    mesh: &Mesh,
    template: &Mesh,
    config: &PreprocessConfig,
) -> Result<(Mesh, RigidTransform, Vec<f64>)> {
    if mesh.is_empty() || template.is_empty() {
        return Err(Error::EmptyMesh);
    }
    config.validate()?;
    let tree = KdTree::build(template.vertices.iter().map(|p| [p.x, p.y, p.z]).collect());

    let mut transform = RigidTransform::identity();
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..config.icp_max_iters {
        let targets: Vec<Point3<f64>> = mesh
            .vertices
            .iter()
            .map(|p| {
                let q = transform.apply(p);
                let (idx, _) = tree.nearest(&[q.x, q.y, q.z]).expect("nonempty template");
                template.vertices[idx]
            })
            .collect();
        transform = fit_rigid(&mesh.vertices, &targets)?;
        let sum_sq: f64 = mesh
            .vertices
            .iter()
            .zip(&targets)
            .map(|(p, q)| (transform.apply(p) - q).norm_squared())
            .sum();
        let rms = (sum_sq / mesh.vertices.len() as f64).sqrt();
        let improved = history
            .last()
            .map(|prev| prev - rms >= config.icp_tol_mm)
            .unwrap_or(true);
        history.push(rms);
        if !improved {
            break;
        }
    }

    let vertices = mesh.vertices.iter().map(|p| transform.apply(p)).collect();
    let out = Mesh {
        vertices,
        faces: mesh.faces.clone(),
        grid: mesh.grid.clone(),
    };
    Ok((out, transform, history))
}

/// A scan after the full fill → crop → smooth → frontalize pipeline.
#[derive(Debug, Clone)]
pub struct PreprocessedScan {
    pub mesh: Mesh,
    pub nosetip: Point3<f64>,
    pub transform: RigidTransform,
    pub residual_history: Vec<f64>,
}

/// Run the full preprocessing pipeline against a nosetip-centered template.
pub fn preprocess_scan(
    mesh: &Mesh,
    template: &Mesh,
    config: &PreprocessConfig,
) -> Result<PreprocessedScan> {
    config.validate()?;
    let filled = match fill_holes(mesh) {
        Ok(m) => m,
        Err(Error::UnsupportedTopology(_)) => {
            warn!("mesh has no grid or faces; skipping hole filling");
            mesh.clone()
        }
        Err(e) => return Err(e),
    };
    let nosetip = detect_nosetip(&filled)?;
    let cropped = crop_face(&filled, &nosetip, config.crop_radius_mm)?;
    let smoothed = if cropped.grid.is_some() || !cropped.faces.is_empty() {
        smooth(&cropped, config.smooth_iterations, config.smooth_lambda)?
    } else {
        warn!("mesh has no connectivity; skipping smoothing");
        cropped
    };
    // Center at the nosetip so ICP starts near the template frame.
    let centered = Mesh {
        vertices: smoothed
            .vertices
            .iter()
            .map(|p| Point3::from(p.coords - nosetip.coords))
            .collect(),
        faces: smoothed.faces.clone(),
        grid: smoothed.grid.clone(),
    };
    let (frontal, icp_transform, residual_history) =
        frontalize_icp(&centered, template, config)?;
    let final_nosetip = detect_nosetip(&frontal)?;
    let centering = RigidTransform {
        rotation: nalgebra::Matrix3::identity(),
        translation: -nosetip.coords,
    };
    Ok(PreprocessedScan {
        mesh: frontal,
        nosetip: final_nosetip,
        transform: icp_transform.compose(&centering),
        residual_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Regular grid mesh with z given by `f(x, y)`; `pitch` mm spacing,
    /// extent [-half, half] in x and y.
    pub fn grid_mesh(half: f64, pitch: f64, f: impl Fn(f64, f64) -> f64) -> Mesh {
        let n = (2.0 * half / pitch).round() as usize + 1;
        let mut vertices = Vec::with_capacity(n * n);
        let mut cells = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let x = -half + c as f64 * pitch;
                let y = -half + r as f64 * pitch;
                cells.push(Some(vertices.len()));
                vertices.push(Point3::new(x, y, f(x, y)));
            }
        }
        Mesh {
            vertices,
            faces: Vec::new(),
            grid: Some(MeshGrid {
                rows: n,
                cols: n,
                cells,
            }),
        }
    }

    fn grid_mesh_with_holes(
        half: f64,
        pitch: f64,
        f: impl Fn(f64, f64) -> f64,
        holes: &[(usize, usize)],
    ) -> Mesh {
        let full = grid_mesh(half, pitch, f);
        let grid = full.grid.as_ref().unwrap();
        let mut vertices = Vec::new();
        let mut cells = Vec::with_capacity(grid.cells.len());
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                if holes.contains(&(r, c)) {
                    cells.push(None);
                } else {
                    let idx = grid.cell(r, c).unwrap();
                    cells.push(Some(vertices.len()));
                    vertices.push(full.vertices[idx]);
                }
            }
        }
        Mesh {
            vertices,
            faces: Vec::new(),
            grid: Some(MeshGrid {
                rows: grid.rows,
                cols: grid.cols,
                cells,
            }),
        }
    }

    #[test]
    fn fill_holes_noop_when_full() {
        let mesh = grid_mesh(2.0, 1.0, |x, y| x + y);
        let filled = fill_holes(&mesh).unwrap();
        assert_eq!(filled, mesh);
    }

    #[test]
    fn fill_holes_center_average() {
        let mesh = grid_mesh_with_holes(1.0, 1.0, |_, _| 5.0, &[(1, 1)]);
        let filled = fill_holes(&mesh).unwrap();
        let grid = filled.grid.as_ref().unwrap();
        let idx = grid.cell(1, 1).expect("filled");
        assert_abs_diff_eq!(filled.vertices[idx].z, 5.0, epsilon = 1e-12);
        assert_eq!(filled.vertices.len(), mesh.vertices.len() + 1);
    }

    #[test]
    fn fill_holes_plane_closed_under_averaging() {
        // 4x4 grid (half=1.5 at pitch 1), two interior holes on z = x + y.
        let mesh = grid_mesh_with_holes(1.5, 1.0, |x, y| x + y, &[(1, 1), (2, 2)]);
        let filled = fill_holes(&mesh).unwrap();
        let grid = filled.grid.as_ref().unwrap();
        for &(r, c) in &[(1usize, 1usize), (2, 2)] {
            let idx = grid.cell(r, c).expect("filled");
            let v = filled.vertices[idx];
            assert_abs_diff_eq!(v.z, v.x + v.y, epsilon = 1e-9);
        }
    }

    #[test]
    fn fill_holes_preserves_valid_vertices() {
        let mesh = grid_mesh_with_holes(2.0, 1.0, |x, y| (x * y).sin(), &[(2, 2), (2, 3)]);
        let filled = fill_holes(&mesh).unwrap();
        assert_eq!(&filled.vertices[..mesh.vertices.len()], &mesh.vertices[..]);
    }

    #[test]
    fn fill_holes_rejects_point_cloud() {
        let mesh = Mesh::from_vertices(vec![Point3::new(0.0, 0.0, 0.0)]);
        assert!(matches!(
            fill_holes(&mesh),
            Err(Error::UnsupportedTopology(_))
        ));
    }

    #[test]
    fn nosetip_hemisphere_peak() {
        let r = 50.0;
        let mesh = grid_mesh(30.0, 1.0, |x, y| (r * r - x * x - y * y).sqrt());
        let tip = detect_nosetip(&mesh).unwrap();
        assert_eq!(tip, Point3::new(0.0, 0.0, r));
    }

    #[test]
    fn nosetip_tie_breaks_to_smaller_index() {
        let mesh = Mesh::from_vertices(vec![
            Point3::new(1.0, 0.0, 3.0),
            Point3::new(-1.0, 0.0, 3.0),
            Point3::new(0.0, 1.0, 1.0),
        ]);
        let tip = detect_nosetip(&mesh).unwrap();
        assert_eq!(tip, Point3::new(1.0, 0.0, 3.0));
    }

    #[test]
    fn crop_boundary_inclusive() {
        let center = Point3::new(0.0, 0.0, 0.0);
        let mesh = Mesh::from_vertices(vec![
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(79.9, 0.0, 0.0),
            Point3::new(80.0, 0.0, 0.0),
            Point3::new(80.1, 0.0, 0.0),
        ]);
        let cropped = crop_face(&mesh, &center, 80.0).unwrap();
        assert_eq!(cropped.vertices.len(), 3);
        assert_eq!(cropped.vertices[2], Point3::new(80.0, 0.0, 0.0));
    }

    #[test]
    fn crop_matches_brute_force_and_is_idempotent() {
        let mesh = grid_mesh(10.0, 1.0, |_, _| 0.0);
        let center = Point3::new(0.0, 0.0, 0.0);
        let cropped = crop_face(&mesh, &center, 5.0).unwrap();
        let expected = mesh
            .vertices
            .iter()
            .filter(|v| (*v - center).norm() <= 5.0)
            .count();
        assert_eq!(cropped.vertices.len(), expected);
        let again = crop_face(&cropped, &center, 5.0).unwrap();
        assert_eq!(again.vertices, cropped.vertices);
    }

    #[test]
    fn smooth_identity_cases() {
        let mesh = grid_mesh(3.0, 1.0, |x, y| x * 0.5 - y);
        let zero_iter = smooth(&mesh, 0, 0.5).unwrap();
        assert_eq!(zero_iter, mesh);

        let flat = grid_mesh(3.0, 1.0, |_, _| 2.0);
        let smoothed = smooth(&flat, 25, 0.5).unwrap();
        for (a, b) in smoothed.vertices.iter().zip(&flat.vertices) {
            assert_abs_diff_eq!(a.z, b.z, epsilon = 1e-12);
        }
    }

    #[test]
    fn smooth_shrinks_perturbation_per_stencil() {
        let mut mesh = grid_mesh(3.0, 1.0, |_, _| 0.0);
        let grid = mesh.grid.clone().unwrap();
        let center = grid.cell(3, 3).unwrap();
        mesh.vertices[center].z += 1.0;
        let smoothed = smooth(&mesh, 1, 0.5).unwrap();
        // Direct stencil evaluation: center keeps (1 - lambda) of the bump.
        assert_abs_diff_eq!(smoothed.vertices[center].z, 0.5, epsilon = 1e-12);
        assert!(smoothed.vertices[center].z.abs() < 1.0);
    }

    #[test]
    fn icp_identity_when_already_aligned() {
        let r = 120.0;
        let mesh = grid_mesh(30.0, 2.0, |x, y| (r * r - x * x - y * y).sqrt() - r);
        let (aligned, transform, history) =
            frontalize_icp(&mesh, &mesh, &PreprocessConfig::default()).unwrap();
        assert!((transform.rotation - nalgebra::Matrix3::identity()).abs().max() < 1e-9);
        assert!(transform.translation.norm() < 1e-9);
        assert!(history[0] < 1e-9);
        assert_eq!(aligned.vertices.len(), mesh.vertices.len());
    }

    #[test]
    fn icp_recovers_planted_transform() {
        // Steep feature-rich surface with no local sliding symmetries; the
        // scan is a strict inner patch of the template, so every scan point
        // has an exact counterpart and the planted motion is the unique
        // zero-residual fit.
        let surf = |x: f64, y: f64| {
            25.0 * (x / 15.0).sin() * (y / 15.0).sin()
                + 18.0 * (x / 23.0).cos() * ((y + 11.0) / 19.0).sin()
        };
        let template = grid_mesh(80.0, 2.0, surf);
        let scan = grid_mesh(36.0, 2.0, surf);
        let angle = 10.0f64.to_radians();
        let rot = nalgebra::Matrix3::new(
            angle.cos(), 0.0, angle.sin(),
            0.0, 1.0, 0.0,
            -angle.sin(), 0.0, angle.cos(),
        );
        let planted = RigidTransform {
            rotation: rot,
            translation: Vector3::new(3.0, -2.0, 1.0),
        };
        let moved = Mesh::from_vertices(
            scan.vertices.iter().map(|p| planted.apply(p)).collect(),
        );
        let config = PreprocessConfig {
            icp_max_iters: 200,
            icp_tol_mm: 1e-9,
            ..Default::default()
        };
        let (_, recovered, history) = frontalize_icp(&moved, &template, &config).unwrap();
        let expected = planted.inverse();
        let rot_err = recovered
            .compose(&expected.inverse())
            .rotation_angle_deg();
        assert!(rot_err < 0.5, "rotation error {rot_err} deg");
        assert!((recovered.translation - expected.translation).norm() < 0.1);
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        recovered.validate(1e-9).unwrap();
    }
}
