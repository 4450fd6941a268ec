//! Human-readable artifacts: colormap images of feature grids and saliency
//! maps, accuracy tables and variance-spectrum tables.
//!
//! Images are binary PPM (P6): header `P6\n<width> <height>\n255\n`
//! followed by row-major RGB byte triples. Grid images unwrap the polar
//! representation to a rectangle: rows are curves ordered by angle, columns
//! are points ordered by radius.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EvalReport, ExpressionMatrix, HistogramSet};
use crate::mesh_io::{Expression, Gender, Mesh};
use crate::stats::{SignificanceMap, VarianceSpectrum};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples, `3 * width * height` bytes.
    pub pixels: Vec<u8>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize) -> ColorImage {
        ColorImage {
            width,
            height,
            pixels: vec![0; 3 * width * height],
        }
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Integer upscaling (each pixel becomes a `factor`×`factor` block).
    pub fn upscale(&self, factor: usize) -> ColorImage {
        let mut out = ColorImage::new(self.width * factor, self.height * factor);
        for y in 0..out.height {
            for x in 0..out.width {
                out.set(x, y, self.get(x / factor, y / factor));
            }
        }
        out
    }

    /// Write as binary PPM (P6).
    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut run = || -> std::io::Result<()> {
            write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
            w.write_all(&self.pixels)?;
            w.flush()
        };
        run().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    Grayscale,
    /// Black → red → yellow → white; every channel non-decreasing in value.
    Heat,
}

impl Palette {
    /// Color for `t` in [0, 1]. Monotone per channel in `t`.
    pub fn color(&self, t: f64) -> [u8; 3] {
        let t = t.clamp(0.0, 1.0);
        let byte = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        match self {
            Palette::Grayscale => {
                let g = byte(t);
                [g, g, g]
            }
            Palette::Heat => [byte(3.0 * t), byte(3.0 * t - 1.0), byte(3.0 * t - 2.0)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// Map the grid's own min/max to the palette endpoints.
    Auto,
    Fixed(f64, f64),
}

/// Render a row-major `rows`×`cols` grid of values as one pixel per cell.
pub fn render_grid(
    values: &[f64],
    rows: usize,
    cols: usize,
    palette: Palette,
    scale: Scale,
) -> Result<ColorImage> {
    if values.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            got: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(i / cols, i % cols));
    }
    let (lo, hi) = match scale {
        Scale::Fixed(lo, hi) => (lo, hi),
        Scale::Auto => (
            values.iter().cloned().fold(f64::INFINITY, f64::min),
            values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ),
    };
    let span = hi - lo;
    let mut image = ColorImage::new(cols, rows);
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
            image.set(c, r, palette.color(t));
        }
    }
    Ok(image)
}

pub const SIGNIFICANT_COLOR: [u8; 3] = [255, 0, 0];
pub const INSIGNIFICANT_COLOR: [u8; 3] = [200, 200, 200];

/// Red/gray mask image of a significance map at one alpha level.
pub fn render_significance(map: &SignificanceMap, alpha: f64) -> Result<ColorImage> {
    let mask = map.mask(alpha)?;
    let mut image = ColorImage::new(map.n_points, map.n_curves);
    for r in 0..map.n_curves {
        for c in 0..map.n_points {
            let color = if mask[r * map.n_points + c] {
                SIGNIFICANT_COLOR
            } else {
                INSIGNIFICANT_COLOR
            };
            image.set(c, r, color);
        }
    }
    Ok(image)
}

/// Export a mesh as PLY_ASCII with per-vertex colors (for painting saliency
/// or depth values back onto the face).
pub fn write_colored_ply(mesh: &Mesh, colors: &[[u8; 3]], path: &Path) -> Result<()> {
    if colors.len() != mesh.vertices.len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.vertices.len(),
            got: colors.len(),
        });
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut run = || -> std::io::Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", mesh.vertices.len())?;
        writeln!(w, "property double x")?;
        writeln!(w, "property double y")?;
        writeln!(w, "property double z")?;
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
        writeln!(w, "element face {}", mesh.faces.len())?;
        writeln!(w, "property list uchar int vertex_indices")?;
        writeln!(w, "end_header")?;
        for (v, c) in mesh.vertices.iter().zip(colors) {
            writeln!(w, "{} {} {} {} {} {}", v.x, v.y, v.z, c[0], c[1], c[2])?;
        }
        for f in &mesh.faces {
            writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
        }
        w.flush()
    };
    run().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn fmt_rate(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{:.4}", v)
    }
}

/// JSON mirror of the rate table rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub experiment: String,
    pub female_rate: f64,
    pub male_rate: f64,
    pub overall_rate: f64,
    pub n_scans: usize,
}

/// Write accuracy tables, the expression matrix and variance spectra as
/// CSV files with JSON mirrors. Output is byte-stable for identical inputs.
pub fn write_tables(
    reports: &BTreeMap<String, EvalReport>,
    matrix: Option<&ExpressionMatrix>,
    spectra: &[VarianceSpectrum],
    out_dir: &Path,
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    if !reports.is_empty() {
        let mut csv = String::from("experiment,female_rate,male_rate,overall_rate,n_scans\n");
        let mut rows = Vec::new();
        for (name, report) in reports {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                name,
                fmt_rate(report.rates.female_rate),
                fmt_rate(report.rates.male_rate),
                fmt_rate(report.rates.overall_rate),
                report.per_scan.len()
            ));
            rows.push(RateRow {
                experiment: name.clone(),
                female_rate: report.rates.female_rate,
                male_rate: report.rates.male_rate,
                overall_rate: report.rates.overall_rate,
                n_scans: report.per_scan.len(),
            });
        }
        write_text(&out_dir.join("rates.csv"), &csv)?;
        let json = serde_json::to_string_pretty(&rows).expect("rows serialize");
        write_text(&out_dir.join("rates.json"), &json)?;
    }

    if let Some(matrix) = matrix {
        let labels: Vec<&str> = matrix.expressions.iter().map(|e| e.short()).collect();
        let mut csv = format!("train\\test,{}\n", labels.join(","));
        for (i, label) in labels.iter().enumerate() {
            let row: Vec<String> = matrix.cells[i]
                .iter()
                .map(|c| format!("{:.4}", c.accuracy))
                .collect();
            csv.push_str(&format!("{},{}\n", label, row.join(",")));
        }
        csv.push_str(&format!(
            "# diagonal_mean,{:.4}\n# diagonal_scan_weighted_mean,{:.4}\n# off_diagonal_mean,{:.4}\n",
            matrix.diagonal_mean(),
            matrix.diagonal_scan_weighted_mean(),
            matrix.off_diagonal_mean()
        ));
        write_text(&out_dir.join("expression_matrix.csv"), &csv)?;
        let json = serde_json::to_string_pretty(matrix).expect("matrix serializes");
        write_text(&out_dir.join("expression_matrix.json"), &json)?;
    }

    for spectrum in spectra {
        let gender = spectrum.gender.map_or("all".to_string(), |g| g.to_string());
        let expr = spectrum
            .expression
            .map_or("all".to_string(), |e| e.short().to_string());
        let mut csv = String::from("component,explained_variance_ratio\n");
        for (i, r) in spectrum.ratios.iter().enumerate() {
            csv.push_str(&format!("{},{}\n", i + 1, r));
        }
        write_text(&out_dir.join(format!("variance_{gender}_{expr}.csv")), &csv)?;
    }
    Ok(())
}

/// One histogram CSV per non-neutral expression:
/// `bin_left,bin_right,count_neutral,count_expressive`.
pub fn write_histograms(set: &HistogramSet, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for pair in &set.pairs {
        let mut csv = String::from("bin_left,bin_right,count_neutral,count_expressive\n");
        for b in 0..set.bins {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                pair.edges[b], pair.edges[b + 1], pair.count_neutral[b], pair.count_expressive[b]
            ));
        }
        let name = format!("histogram_{}.csv", pair.expression.short());
        write_text(&out_dir.join(name), &csv)?;
    }
    Ok(())
}

/// Significance map CSV: one row per cell with t, p and per-alpha flags.
pub fn write_significance_csv(map: &SignificanceMap, path: &Path) -> Result<()> {
    let mut csv = String::from("curve,point,t,p");
    for alpha in &map.alphas {
        csv.push_str(&format!(",significant_{alpha}"));
    }
    csv.push('\n');
    for r in 0..map.n_curves {
        for c in 0..map.n_points {
            let cell = r * map.n_points + c;
            csv.push_str(&format!("{},{},{},{}", r, c, map.t_values[cell], map.p_values[cell]));
            for mask in &map.masks {
                csv.push_str(if mask[cell] { ",1" } else { ",0" });
            }
            csv.push('\n');
        }
    }
    write_text(path, &csv)
}

#[allow(unused)]
fn variance_filename(gender: Option<Gender>, expression: Option<Expression>) -> String {
    let g = gender.map_or("all".to_string(), |g| g.to_string());
    let e = expression.map_or("all".to_string(), |e| e.short().to_string());
    format!("variance_{g}_{e}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{saliency_map, DEFAULT_ALPHAS};

    #[test]
    fn constant_grid_renders_uniformly() {
        let values = vec![2.5; 12];
        let image = render_grid(&values, 3, 4, Palette::Grayscale, Scale::Auto).unwrap();
        let first = image.get(0, 0);
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(image.get(x, y), first);
            }
        }
    }

    #[test]
    fn endpoints_map_to_palette_extremes() {
        let values = vec![0.0, 0.5, 1.0, 0.25];
        let image = render_grid(&values, 1, 4, Palette::Grayscale, Scale::Auto).unwrap();
        assert_eq!(image.get(0, 0), [0, 0, 0]);
        assert_eq!(image.get(2, 0), [255, 255, 255]);
        let heat = render_grid(&values, 1, 4, Palette::Heat, Scale::Auto).unwrap();
        assert_eq!(heat.get(0, 0), [0, 0, 0]);
        assert_eq!(heat.get(2, 0), [255, 255, 255]);
    }

    #[test]
    fn palettes_are_monotone_per_channel() {
        for palette in [Palette::Grayscale, Palette::Heat] {
            let mut prev = palette.color(0.0);
            for i in 1..=100 {
                let c = palette.color(i as f64 / 100.0);
                for ch in 0..3 {
                    assert!(c[ch] >= prev[ch], "{palette:?} channel {ch} decreased");
                }
                prev = c;
            }
        }
    }

    #[test]
    fn non_finite_grid_rejected() {
        let values = vec![1.0, f64::NAN];
        assert!(matches!(
            render_grid(&values, 1, 2, Palette::Heat, Scale::Auto),
            Err(Error::NonFiniteInput(..))
        ));
    }

    fn tiny_map() -> SignificanceMap {
        let mut rows = Vec::new();
        for i in 0..8 {
            let gender = if i % 2 == 0 { Gender::Female } else { Gender::Male };
            let sign = if gender == Gender::Female { 1.0 } else { -1.0 };
            let values: Vec<f64> = (0..6)
                .map(|j| if j == 0 { sign * 5.0 + i as f64 * 0.01 } else { (i * 7 + j) as f64 % 3.0 })
                .collect();
            rows.push((gender, values));
        }
        let refs: Vec<(Gender, &[f64])> = rows.iter().map(|(g, v)| (*g, v.as_slice())).collect();
        saliency_map(&refs, 2, 3, &DEFAULT_ALPHAS).unwrap()
    }

    #[test]
    fn red_pixel_count_matches_mask() {
        let map = tiny_map();
        let image = render_significance(&map, 0.05).unwrap();
        let red = (0..map.n_curves * map.n_points)
            .filter(|&i| {
                let (y, x) = (i / map.n_points, i % map.n_points);
                image.get(x, y) == SIGNIFICANT_COLOR
            })
            .count();
        let expected = map.mask(0.05).unwrap().iter().filter(|&&m| m).count();
        assert_eq!(red, expected);
        assert!(matches!(
            render_significance(&map, 0.5),
            Err(Error::UnknownAlpha(_))
        ));
    }

    #[test]
    fn ppm_output_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let image = render_grid(&values, 4, 5, Palette::Heat, Scale::Auto).unwrap();
        let a = dir.path().join("a.ppm");
        let b = dir.path().join("b.ppm");
        image.write_ppm(&a).unwrap();
        image.write_ppm(&b).unwrap();
        let bytes_a = fs::read(&a).unwrap();
        assert_eq!(bytes_a, fs::read(&b).unwrap());
        assert!(bytes_a.starts_with(b"P6\n5 4\n255\n"));
        assert_eq!(bytes_a.len(), 11 + 3 * 20);
    }

    #[test]
    fn upscaling_preserves_blocks() {
        let values = vec![0.0, 1.0];
        let image = render_grid(&values, 1, 2, Palette::Grayscale, Scale::Auto).unwrap();
        let big = image.upscale(3);
        assert_eq!(big.width, 6);
        assert_eq!(big.height, 3);
        assert_eq!(big.get(2, 2), [0, 0, 0]);
        assert_eq!(big.get(3, 0), [255, 255, 255]);
    }

    #[test]
    fn tables_are_byte_stable() {
        use crate::eval::{loo_subject_cv, FeatureItem};
        use crate::learn::LearnParams;
        let items: Vec<FeatureItem> = (0..6)
            .map(|i| {
                let gender = if i % 2 == 0 { Gender::Female } else { Gender::Male };
                let sign = if gender == Gender::Female { 1.0 } else { -1.0 };
                FeatureItem {
                    scan_id: format!("t{i}"),
                    subject_id: format!("t{i}"),
                    gender,
                    expression: Expression::Neutral,
                    values: vec![sign * 2.0 + i as f64 * 0.1, 0.5],
                }
            })
            .collect();
        let report = loo_subject_cv(&items, &LearnParams::default(), 1).unwrap();
        let mut reports = BTreeMap::new();
        reports.insert("general_svm".to_string(), report);
        let dir = tempfile::tempdir().unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        write_tables(&reports, None, &[], &out_a).unwrap();
        write_tables(&reports, None, &[], &out_b).unwrap();
        let csv_a = fs::read(out_a.join("rates.csv")).unwrap();
        assert_eq!(csv_a, fs::read(out_b.join("rates.csv")).unwrap());
        let text = String::from_utf8(csv_a).unwrap();
        // header + one row, 5 columns
        let lines: Vec<&str> = text.trim().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 5);
    }

    #[test]
    fn colored_ply_writes_vertex_colors() {
        let mesh = Mesh {
            vertices: vec![
                nalgebra::Point3::new(0.0, 0.0, 0.0),
                nalgebra::Point3::new(1.0, 0.0, 0.0),
                nalgebra::Point3::new(0.0, 1.0, 0.0),
            ],
            faces: vec![[0, 1, 2]],
            grid: None,
        };
        let colors = vec![[255, 0, 0], [0, 255, 0], [0, 0, 255]];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        write_colored_ply(&mesh, &colors, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("property uchar red"));
        assert!(text.contains("0 0 0 255 0 0"));
        assert!(text.contains("3 0 1 2"));
    }
}
