//! Mesh, manifest and landmark file I/O.
//!
//! Supported mesh formats:
//! - `PLY_ASCII`: ascii PLY with float vertex properties and optional
//!   triangle faces.
//! - `XYZ`: one `x y z` line per vertex, no faces.
//! - `RANGE_GRID`: text range-scanner export. Header lines `rows=R` and
//!   `cols=C`, then R×C validity flags (0/1, row-major), then X, Y and Z
//!   blocks with one value per valid cell in row-major order.
//!
//! The dataset manifest is a CSV with fixed header
//! `scan_id,subject_id,gender,expression,ethnicity,age,mesh_path,landmarks_path`.
//! All numeric text is locale-independent decimal with `.` separator.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular range-grid structure attached to scanner meshes.
/// `cells[r * cols + c]` holds the vertex index of a valid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshGrid {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Option<usize>>,
}

impl MeshGrid {
    pub fn cell(&self, r: usize, c: usize) -> Option<usize> {
        self.cells[r * self.cols + c]
    }

    pub fn valid_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }
}

/// A 3D facial surface in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub grid: Option<MeshGrid>,
}

impl Mesh {
    pub fn from_vertices(vertices: Vec<Point3<f64>>) -> Self {
        Mesh {
            vertices,
            faces: Vec::new(),
            grid: None,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.coords.iter().all(|x| x.is_finite()) {
                return Err(Error::Invariant(format!("vertex {i} is not finite")));
            }
        }
        for (i, f) in self.faces.iter().enumerate() {
            for &idx in f {
                if idx >= self.vertices.len() {
                    return Err(Error::Invariant(format!(
                        "face {i} references vertex {idx} out of {}",
                        self.vertices.len()
                    )));
                }
            }
        }
        if let Some(grid) = &self.grid {
            if grid.cells.len() != grid.rows * grid.cols {
                return Err(Error::Invariant("grid cell count != rows*cols".into()));
            }
            if grid.valid_count() != self.vertices.len() {
                return Err(Error::Invariant(format!(
                    "grid valid cells {} != vertex count {}",
                    grid.valid_count(),
                    self.vertices.len()
                )));
            }
            for cell in grid.cells.iter().flatten() {
                if *cell >= self.vertices.len() {
                    return Err(Error::Invariant("grid cell index out of range".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    PlyAscii,
    Xyz,
    RangeGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Female => "Female",
            Gender::Male => "Male",
        })
    }
}

impl FromStr for Gender {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Female" => Ok(Gender::Female),
            "Male" => Ok(Gender::Male),
            other => Err(Error::UnknownLabel {
                field: "gender",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Expression {
    Neutral,
    Happy,
    Disgust,
    Surprise,
    Sad,
}

impl Expression {
    pub const ALL: [Expression; 5] = [
        Expression::Neutral,
        Expression::Happy,
        Expression::Disgust,
        Expression::Surprise,
        Expression::Sad,
    ];

    pub const NON_NEUTRAL: [Expression; 4] = [
        Expression::Happy,
        Expression::Disgust,
        Expression::Surprise,
        Expression::Sad,
    ];

    /// Two-letter axis label used in matrix tables.
    pub fn short(&self) -> &'static str {
        match self {
            Expression::Neutral => "NT",
            Expression::Happy => "HP",
            Expression::Disgust => "DI",
            Expression::Surprise => "SP",
            Expression::Sad => "SD",
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Expression::Neutral => "Neutral",
            Expression::Happy => "Happy",
            Expression::Disgust => "Disgust",
            Expression::Surprise => "Surprise",
            Expression::Sad => "Sad",
        })
    }
}

impl FromStr for Expression {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Neutral" => Ok(Expression::Neutral),
            "Happy" => Ok(Expression::Happy),
            "Disgust" => Ok(Expression::Disgust),
            "Surprise" => Ok(Expression::Surprise),
            "Sad" => Ok(Expression::Sad),
            other => Err(Error::UnknownLabel {
                field: "expression",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ethnicity {
    Asian,
    NonAsian,
}

impl fmt::Display for Ethnicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ethnicity::Asian => "Asian",
            Ethnicity::NonAsian => "NonAsian",
        })
    }
}

impl FromStr for Ethnicity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Asian" => Ok(Ethnicity::Asian),
            "NonAsian" => Ok(Ethnicity::NonAsian),
            other => Err(Error::UnknownLabel {
                field: "ethnicity",
                value: other.to_string(),
            }),
        }
    }
}

/// One scan's metadata row from the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub scan_id: String,
    pub subject_id: String,
    pub gender: Gender,
    pub expression: Expression,
    pub ethnicity: Ethnicity,
    pub age: u32,
    pub mesh_path: PathBuf,
    pub landmarks_path: Option<PathBuf>,
}

/// 68 ordered 2D landmark positions in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmarks68 {
    pub points: Vec<[f64; 2]>,
    pub nosetip_index: usize,
}

pub const LANDMARK_COUNT: usize = 68;
pub const DEFAULT_NOSETIP_INDEX: usize = 30;

pub const MANIFEST_HEADER: &str =
    "scan_id,subject_id,gender,expression,ethnicity,age,mesh_path,landmarks_path";

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Mesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mesh = match format {
        MeshFormat::PlyAscii => parse_ply_ascii(path, &text)?,
        MeshFormat::Xyz => parse_xyz(path, &text)?,
        MeshFormat::RangeGrid => parse_range_grid(path, &text)?,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Save a mesh. XYZ drops faces (with a warning); PLY keeps them.
/// Vertices are written in shortest round-trip decimal so that
/// `load(save(m))` reproduces coordinates bit-exactly.
pub fn save_mesh(mesh: &Mesh, path: &Path, format: MeshFormat) -> Result<()> {
    mesh.validate()?;
    let mut out = String::new();
    match format {
        MeshFormat::PlyAscii => format_ply_ascii(mesh, &mut out),
        MeshFormat::Xyz => {
            if !mesh.faces.is_empty() {
                warn!(
                    "saving mesh with {} faces as XYZ: faces dropped",
                    mesh.faces.len()
                );
            }
            for v in &mesh.vertices {
                out.push_str(&format!("{} {} {}\n", v.x, v.y, v.z));
            }
        }
        MeshFormat::RangeGrid => {
            return Err(Error::Config("RANGE_GRID is a read-only format".into()))
        }
    }
    write_atomic(path, out.as_bytes())
}

fn format_ply_ascii(mesh: &Mesh, out: &mut String) {
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", mesh.vertices.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    out.push_str(&format!("element face {}\n", mesh.faces.len()));
    out.push_str("property list uchar int vertex_indices\n");
    out.push_str("end_header\n");
    for v in &mesh.vertices {
        out.push_str(&format!("{} {} {}\n", v.x, v.y, v.z));
    }
    for f in &mesh.faces {
        out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
    file.write_all(bytes).map_err(|e| Error::io(path, e))?;
    file.flush().map_err(|e| Error::io(path, e))
}

fn parse_float(path: &Path, line_no: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(path, line_no, format!("bad number {tok:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            path,
            line_no,
            format!("non-finite number {tok:?}"),
        ));
    }
    Ok(v)
}

fn parse_xyz(path: &Path, text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 3 columns, got {}", toks.len()),
            ));
        }
        vertices.push(Point3::new(
            parse_float(path, i + 1, toks[0])?,
            parse_float(path, i + 1, toks[1])?,
            parse_float(path, i + 1, toks[2])?,
        ));
    }
    Ok(Mesh::from_vertices(vertices))
}

fn parse_ply_ascii(path: &Path, text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate();
    let (_, magic) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    if magic.trim() != "ply" {
        return Err(Error::parse(path, 1, "missing 'ply' magic"));
    }
    let mut n_vertices: Option<usize> = None;
    let mut n_faces: usize = 0;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current_element = String::new();
    let mut header_end = 0usize;
    for (i, raw) in lines.by_ref() {
        let line = raw.trim();
        if line == "end_header" {
            header_end = i + 1;
            break;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(Error::parse(path, i + 1, "only ascii PLY is supported"));
                }
            }
            Some("element") => {
                let name = *toks
                    .get(1)
                    .ok_or_else(|| Error::parse(path, i + 1, "element without name"))?;
                let count: usize = toks
                    .get(2)
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(path, i + 1, "element without count"))?;
                current_element = name.to_string();
                match name {
                    "vertex" => n_vertices = Some(count),
                    "face" => n_faces = count,
                    other => {
                        return Err(Error::parse(path, i + 1, format!("unsupported element {other}")))
                    }
                }
            }
            Some("property") => {
                if current_element == "vertex" && toks.len() == 3 {
                    vertex_props.push(toks[2].to_string());
                }
            }
            Some(other) => {
                return Err(Error::parse(path, i + 1, format!("unexpected header token {other}")))
            }
        }
    }
    if header_end == 0 {
        return Err(Error::parse(path, 1, "missing end_header"));
    }
    let n_vertices =
        n_vertices.ok_or_else(|| Error::parse(path, header_end, "no vertex element"))?;
    let ix = vertex_props.iter().position(|p| p == "x");
    let iy = vertex_props.iter().position(|p| p == "y");
    let iz = vertex_props.iter().position(|p| p == "z");
    let (ix, iy, iz) = match (ix, iy, iz) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::parse(path, header_end, "vertex element lacks x/y/z")),
    };

    let mut body = text.lines().enumerate().skip(header_end).filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty()
    });

    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (i, line) = body
            .next()
            .ok_or_else(|| Error::parse(path, header_end, "fewer vertex lines than declared"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < vertex_props.len() {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {} vertex columns", vertex_props.len()),
            ));
        }
        vertices.push(Point3::new(
            parse_float(path, i + 1, toks[ix])?,
            parse_float(path, i + 1, toks[iy])?,
            parse_float(path, i + 1, toks[iz])?,
        ));
    }
    let mut faces = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (i, line) = body
            .next()
            .ok_or_else(|| Error::parse(path, header_end, "fewer face lines than declared"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let count: usize = toks
            .first()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::parse(path, i + 1, "bad face count"))?;
        if count != 3 || toks.len() != 4 {
            return Err(Error::parse(path, i + 1, "only triangle faces are supported"));
        }
        let mut f = [0usize; 3];
        for (k, tok) in toks[1..4].iter().enumerate() {
            f[k] = tok
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad face index {tok:?}")))?;
        }
        faces.push(f);
    }
    Ok(Mesh {
        vertices,
        faces,
        grid: None,
    })
}

fn parse_range_grid(path: &Path, text: &str) -> Result<Mesh> {
    let mut lines = text.lines();
    let rows_line = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing rows= header"))?;
    let cols_line = lines
        .next()
        .ok_or_else(|| Error::parse(path, 2, "missing cols= header"))?;
    let rows: usize = rows_line
        .trim()
        .strip_prefix("rows=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "expected rows=R"))?;
    let cols: usize = cols_line
        .trim()
        .strip_prefix("cols=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(path, 2, "expected cols=C"))?;

    let rest: Vec<&str> = lines.flat_map(|l| l.split_whitespace()).collect();
    let n_cells = rows * cols;
    if rest.len() < n_cells {
        return Err(Error::parse(path, 3, "truncated flag block"));
    }
    let mut cells = Vec::with_capacity(n_cells);
    let mut n_valid = 0usize;
    for tok in &rest[..n_cells] {
        match *tok {
            "0" => cells.push(None),
            "1" => {
                cells.push(Some(n_valid));
                n_valid += 1;
            }
            other => return Err(Error::parse(path, 3, format!("bad flag {other:?}"))),
        }
    }
    let coords = &rest[n_cells..];
    if coords.len() != 3 * n_valid {
        return Err(Error::parse(
            path,
            3,
            format!("expected {} coordinates, got {}", 3 * n_valid, coords.len()),
        ));
    }
    let mut vertices = Vec::with_capacity(n_valid);
    for i in 0..n_valid {
        vertices.push(Point3::new(
            parse_float(path, 3, coords[i])?,
            parse_float(path, 3, coords[n_valid + i])?,
            parse_float(path, 3, coords[2 * n_valid + i])?,
        ));
    }
    Ok(Mesh {
        vertices,
        faces: Vec::new(),
        grid: Some(MeshGrid { rows, cols, cells }),
    })
}

/// Load and validate the dataset manifest.
pub fn load_manifest(path: &Path) -> Result<Vec<ScanRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?;
        let got = headers.iter().collect::<Vec<_>>().join(",");
        if got != MANIFEST_HEADER {
            return Err(Error::parse(
                path,
                1,
                format!("bad manifest header {got:?}"),
            ));
        }
    }
    let mut records = Vec::new();
    let mut seen: std::collections::BTreeSet<(String, Expression)> = Default::default();
    for (i, row) in reader.records().enumerate() {
        let line_no = i + 2;
        let row = row.map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if row.len() != 8 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 8 fields, got {}", row.len()),
            ));
        }
        let gender: Gender = row[2].parse()?;
        let expression: Expression = row[3].parse()?;
        let ethnicity: Ethnicity = row[4].parse()?;
        let age: u32 = row[5]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad age {:?}", &row[5])))?;
        if age > 40 {
            warn!(
                "scan {} has age {} > 40 (outside the studied population filter)",
                &row[0], age
            );
        }
        let record = ScanRecord {
            scan_id: row[0].to_string(),
            subject_id: row[1].to_string(),
            gender,
            expression,
            ethnicity,
            age,
            mesh_path: PathBuf::from(&row[6]),
            landmarks_path: if row[7].is_empty() {
                None
            } else {
                Some(PathBuf::from(&row[7]))
            },
        };
        if !seen.insert((record.subject_id.clone(), record.expression)) {
            return Err(Error::DuplicateScan {
                subject_id: record.subject_id,
                expression: record.expression.to_string(),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn save_manifest(records: &[ScanRecord], path: &Path) -> Result<()> {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.scan_id,
            r.subject_id,
            r.gender,
            r.expression,
            r.ethnicity,
            r.age,
            r.mesh_path.display(),
            r.landmarks_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Load 68 `x y` landmark lines.
pub fn load_landmarks(path: &Path) -> Result<Landmarks68> {
    load_landmarks_with_nosetip(path, DEFAULT_NOSETIP_INDEX)
}

pub fn load_landmarks_with_nosetip(path: &Path, nosetip_index: usize) -> Result<Landmarks68> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 2 columns, got {}", toks.len()),
            ));
        }
        points.push([
            parse_float(path, i + 1, toks[0])?,
            parse_float(path, i + 1, toks[1])?,
        ]);
    }
    if points.len() != LANDMARK_COUNT {
        return Err(Error::CountError(points.len()));
    }
    Ok(Landmarks68 {
        points,
        nosetip_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write_file(dir: &TempDir, name: &str, content: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn xyz_three_lines() {
        let dir = TempDir::new().unwrap();
        let path = write_file(&dir, "a.xyz", "0 0 0\n1 0 0\n0 1 0\n");
        let mesh = load_mesh(&path, MeshFormat::Xyz).unwrap();
        assert_eq!(mesh.vertices.len(), 3);
        assert!(mesh.faces.is_empty());
        assert_eq!(mesh.vertices[1], Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn range_grid_with_invalid_cell() {
        let dir = TempDir::new().unwrap();
        let path = write_file(
            &dir,
            "a.rg",
            "rows=2\ncols=2\n1 1\n1 0\n0 1 0\n0 0 1\n5 5 5\n",
        );
        let mesh = load_mesh(&path, MeshFormat::RangeGrid).unwrap();
        assert_eq!(mesh.vertices.len(), 3);
        let grid = mesh.grid.as_ref().unwrap();
        assert_eq!(grid.valid_count(), 3);
        assert_eq!(grid.cell(1, 1), None);
        assert_eq!(mesh.vertices[grid.cell(0, 1).unwrap()], Point3::new(1.0, 0.0, 5.0));
    }

    #[test]
    fn ply_header_body_mismatch() {
        let dir = TempDir::new().unwrap();
        let path = write_file(
            &dir,
            "a.ply",
            "ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n",
        );
        assert!(matches!(
            load_mesh(&path, MeshFormat::PlyAscii),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn ply_round_trip_bit_exact() {
        let dir = TempDir::new().unwrap();
        let mesh = Mesh {
            vertices: vec![
                Point3::new(0.1, -2.333333333333333, 7.0),
                Point3::new(1e-17, 80.00000001, -0.0),
                Point3::new(std::f64::consts::PI, 2.0f64.sqrt(), 1.0 / 3.0),
            ],
            faces: vec![[0, 1, 2]],
            grid: None,
        };
        let path = dir.path().join("rt.ply");
        save_mesh(&mesh, &path, MeshFormat::PlyAscii).unwrap();
        let back = load_mesh(&path, MeshFormat::PlyAscii).unwrap();
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.faces, mesh.faces);
    }

    #[test]
    fn xyz_drops_faces() {
        let dir = TempDir::new().unwrap();
        let mesh = Mesh {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            faces: vec![[0, 1, 2]],
            grid: None,
        };
        let path = dir.path().join("f.xyz");
        save_mesh(&mesh, &path, MeshFormat::Xyz).unwrap();
        let back = load_mesh(&path, MeshFormat::Xyz).unwrap();
        assert_eq!(back.vertices, mesh.vertices);
        assert!(back.faces.is_empty());
    }

    #[test]
    fn manifest_parse_and_duplicates() {
        let dir = TempDir::new().unwrap();
        let ok = write_file(
            &dir,
            "m.csv",
            "scan_id,subject_id,gender,expression,ethnicity,age,mesh_path,landmarks_path\n\
             s1,p1,Female,Neutral,Asian,25,p1_nt.ply,\n\
             s2,p2,Male,Happy,NonAsian,30,p2_hp.ply,p2_hp.lm\n",
        );
        let records = load_manifest(&ok).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].gender, Gender::Female);
        assert_eq!(records[1].landmarks_path.as_deref(), Some(Path::new("p2_hp.lm")));

        let dup = write_file(
            &dir,
            "dup.csv",
            "scan_id,subject_id,gender,expression,ethnicity,age,mesh_path,landmarks_path\n\
             s1,p1,Female,Happy,Asian,25,a.ply,\n\
             s2,p1,Female,Happy,Asian,25,b.ply,\n",
        );
        assert!(matches!(load_manifest(&dup), Err(Error::DuplicateScan { .. })));

        let bad = write_file(
            &dir,
            "bad.csv",
            "scan_id,subject_id,gender,expression,ethnicity,age,mesh_path,landmarks_path\n\
             s1,p1,Robot,Happy,Asian,25,a.ply,\n",
        );
        assert!(matches!(load_manifest(&bad), Err(Error::UnknownLabel { .. })));
    }

    #[test]
    fn landmarks_echo_and_count() {
        let dir = TempDir::new().unwrap();
        let mut content = String::new();
        for i in 0..68 {
            content.push_str(&format!("{i} 0\n"));
        }
        let path = write_file(&dir, "lm.txt", &content);
        let lm = load_landmarks(&path).unwrap();
        assert_eq!(lm.points.len(), 68);
        assert_eq!(lm.points[42], [42.0, 0.0]);
        assert_eq!(lm.nosetip_index, 30);

        let short = write_file(&dir, "short.txt", &content.lines().take(67).collect::<Vec<_>>().join("\n"));
        assert!(matches!(load_landmarks(&short), Err(Error::CountError(67))));

        let nan = write_file(&dir, "nan.txt", &content.replace("5 0", "nan 3"));
        assert!(matches!(load_landmarks(&nan), Err(Error::Parse { .. })));
    }
}
