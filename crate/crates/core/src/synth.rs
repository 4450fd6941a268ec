//! Synthetic 3D expressive-face corpus generator with plantable,
//! per-expression gender effect sizes.
//!
//! Faces are an analytic base shape (ellipsoidal dome with a nose bump)
//! sampled on a regular grid, plus a static gender morph field, a smooth
//! per-subject identity field, per-expression deformation bumps and sensor
//! noise. Everything is closed form, so downstream oracle tests can compare
//! pipeline output against the planted fields exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::derive_seed_index;
use crate::mesh_io::{
    save_manifest, save_mesh, Ethnicity, Expression, Gender, Mesh, MeshFormat, MeshGrid,
    ScanRecord,
};

fn bump(x: f64, y: f64, cx: f64, cy: f64, sigma: f64) -> f64 {
    let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Smooth unit-amplitude deformation fields in the face frame
/// (z offsets in mm per mm of amplitude), localized at the regions where
/// expressions act: mouth, cheeks, eyes, brow and nose bridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeformationField {
    Mouth,
    Cheeks,
    Eyes,
    Brow,
    Bridge,
}

impl DeformationField {
    pub const ALL: [DeformationField; 5] = [
        DeformationField::Mouth,
        DeformationField::Cheeks,
        DeformationField::Eyes,
        DeformationField::Brow,
        DeformationField::Bridge,
    ];

    /// Field value at (x, y) for unit amplitude.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            DeformationField::Mouth => bump(x, y, 0.0, -42.0, 12.0),
            DeformationField::Cheeks => {
                0.8 * (bump(x, y, 33.0, -18.0, 13.0) + bump(x, y, -33.0, -18.0, 13.0))
            }
            DeformationField::Eyes => {
                0.8 * (bump(x, y, 22.0, 16.0, 9.0) + bump(x, y, -22.0, 16.0, 9.0))
            }
            DeformationField::Brow => bump(x, y, 0.0, 28.0, 14.0),
            DeformationField::Bridge => bump(x, y, 0.0, 8.0, 10.0),
        }
    }

    /// The two fields after this one in `ALL` order (cyclic); used when a
    /// gender mixes several fields per expression.
    fn companions(&self) -> [DeformationField; 2] {
        let i = Self::ALL.iter().position(|f| f == self).unwrap();
        [Self::ALL[(i + 1) % 5], Self::ALL[(i + 2) % 5]]
    }
}

impl fmt::Display for DeformationField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Parameters of the analytic neutral face: an ellipsoidal dome plus a
/// gaussian nose ridge, sampled on a square grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseShape {
    pub half_extent_mm: f64,
    pub grid_pitch_mm: f64,
    pub dome_radius_mm: f64,
    pub dome_height_mm: f64,
    pub nose_amplitude_mm: f64,
    pub nose_center_y_mm: f64,
    pub nose_sigma_mm: f64,
}

impl Default for BaseShape {
    fn default() -> Self {
        BaseShape {
            half_extent_mm: 90.0,
            grid_pitch_mm: 2.5,
            dome_radius_mm: 120.0,
            dome_height_mm: 60.0,
            nose_amplitude_mm: 8.0,
            nose_center_y_mm: -15.0,
            nose_sigma_mm: 6.0,
        }
    }
}

impl BaseShape {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let r2 = (x * x + y * y) / (self.dome_radius_mm * self.dome_radius_mm);
        let dome = self.dome_height_mm * (1.0 - r2).max(0.0).sqrt();
        dome + self.nose_amplitude_mm * bump(x, y, 0.0, self.nose_center_y_mm, self.nose_sigma_mm)
    }
}

/// Static male/female morphology difference field (unit amplitude): raised
/// brow and cheekbones against a recessed jaw line.
pub fn gender_morph_field(x: f64, y: f64) -> f64 {
    bump(x, y, 0.0, 35.0, 15.0) - 0.7 * bump(x, y, 0.0, -65.0, 18.0)
        + 0.5 * (bump(x, y, 45.0, 5.0, 15.0) + bump(x, y, -45.0, 5.0, 15.0))
}

/// How one expression deforms the face, per gender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionEffect {
    pub field: DeformationField,
    pub male_amplitude_mm: f64,
    pub female_amplitude_mm: f64,
    /// When set, female subjects spread the deformation over this field and
    /// its two companions with per-subject random weights, instead of the
    /// single field used for males.
    pub female_mix: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    /// Fraction of female subjects.
    pub female_fraction: f64,
    pub base: BaseShape,
    /// mm scale of the static gender morph applied to every scan
    /// (+gap/2 for males, −gap/2 for females).
    pub gender_morph_gap_mm: f64,
    pub expression_effects: BTreeMap<Expression, ExpressionEffect>,
    /// RMS scale of the smooth per-subject identity field.
    pub subject_noise_mm: f64,
    /// Std-dev of i.i.d. per-vertex measurement noise, fresh per scan.
    pub sensor_noise_mm: f64,
    /// Per-scan amplitude jitter: multiplier uniform in [1−j, 1+j].
    pub amplitude_jitter: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 4 {
            return Err(Error::Config(format!(
                "n_subjects must be >= 4, got {}",
                self.n_subjects
            )));
        }
        if !(0.0..=1.0).contains(&self.female_fraction) {
            return Err(Error::Config("female_fraction must be in [0,1]".into()));
        }
        if self.base.grid_pitch_mm <= 0.0 || self.base.half_extent_mm <= 0.0 {
            return Err(Error::Config("grid pitch and extent must be positive".into()));
        }
        if self.gender_morph_gap_mm < 0.0
            || self.subject_noise_mm < 0.0
            || self.sensor_noise_mm < 0.0
        {
            return Err(Error::Config("scales must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter) {
            return Err(Error::Config("amplitude_jitter must be in [0,1)".into()));
        }
        for (expr, effect) in &self.expression_effects {
            if *expr == Expression::Neutral {
                return Err(Error::Config("no expression effect for Neutral".into()));
            }
            if effect.male_amplitude_mm < 0.0 || effect.female_amplitude_mm < 0.0 {
                return Err(Error::Config(format!("negative amplitude for {expr}")));
            }
        }
        Ok(())
    }
}

fn effect(
    field: DeformationField,
    male: f64,
    female: f64,
    female_mix: bool,
) -> ExpressionEffect {
    ExpressionEffect {
        field,
        male_amplitude_mm: male,
        female_amplitude_mm: female,
        female_mix,
    }
}

/// Default corpus profile: strong gendered Happy/Disgust deformations, weak
/// and gender-symmetric Surprise/Sad, male deformations along one dominant
/// field and female deformations mixed over three fields.
pub fn default_profile() -> SynthConfig {
    let mut effects = BTreeMap::new();
    effects.insert(Expression::Happy, effect(DeformationField::Mouth, 6.0, 2.5, true));
    effects.insert(Expression::Disgust, effect(DeformationField::Bridge, 4.0, 2.0, false));
    effects.insert(Expression::Surprise, effect(DeformationField::Eyes, 2.5, 2.5, false));
    effects.insert(Expression::Sad, effect(DeformationField::Brow, 2.0, 2.0, false));
    SynthConfig {
        n_subjects: 120,
        female_fraction: 0.44,
        base: BaseShape::default(),
        gender_morph_gap_mm: 0.15,
        expression_effects: effects,
        subject_noise_mm: 1.5,
        sensor_noise_mm: 0.05,
        amplitude_jitter: 0.7,
        seed: 7,
    }
}

/// Zero-signal profile: no gender morph, equal amplitudes, no mixing — the
/// genders are statistically indistinguishable.
pub fn null_profile() -> SynthConfig {
    let mut config = default_profile();
    config.gender_morph_gap_mm = 0.0;
    for effect in config.expression_effects.values_mut() {
        let amp = 0.5 * (effect.male_amplitude_mm + effect.female_amplitude_mm);
        effect.male_amplitude_mm = amp;
        effect.female_amplitude_mm = amp;
        effect.female_mix = false;
    }
    config
}

/// Planted deformation of one expressive scan: summed field weights in mm
/// (already including amplitude and jitter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedDeformation {
    pub weights: BTreeMap<DeformationField, f64>,
}

impl PlantedDeformation {
    /// Planted z offset at (x, y).
    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.weights.iter().map(|(f, w)| w * f.value(x, y)).sum()
    }
}

/// One generated scan with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticScan {
    pub record: ScanRecord,
    pub mesh: Mesh,
    /// Planted nosetip vertex position (grid vertex at the nose center).
    pub nosetip: Point3<f64>,
    /// Planted deformation; `None` for neutral scans.
    pub planted: Option<PlantedDeformation>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub config: SynthConfig,
    pub scans: Vec<SyntheticScan>,
    /// Canonical neutral face, used as the frontalization template.
    pub template: Mesh,
}

/// Serializable ground-truth record written next to the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub subjects: Vec<SubjectTruth>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectTruth {
    pub subject_id: String,
    pub gender: Gender,
    pub nosetip: [f64; 3],
    pub planted: BTreeMap<Expression, PlantedDeformation>,
}

/// Mesh the canonical (noise-free, genderless) neutral face; used as the
/// ICP template for synthetic runs.
pub fn canonical_template(base: &BaseShape) -> Mesh {
    grid_face(base, |x, y| base.height(x, y) - template_nosetip_z(base))
}

fn template_nosetip_z(base: &BaseShape) -> f64 {
    base.height(0.0, base.nose_center_y_mm)
}

fn grid_axis(base: &BaseShape) -> Vec<f64> {
    let n = (2.0 * base.half_extent_mm / base.grid_pitch_mm).round() as usize + 1;
    (0..n)
        .map(|i| -base.half_extent_mm + i as f64 * base.grid_pitch_mm)
        .collect()
}

fn grid_face(base: &BaseShape, z: impl Fn(f64, f64) -> f64) -> Mesh {
    let axis = grid_axis(base);
    let n = axis.len();
    let mut vertices = Vec::with_capacity(n * n);
    for &y in &axis {
        for &x in &axis {
            vertices.push(Point3::new(x, y, z(x, y)));
        }
    }
    let mut faces = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for r in 0..n - 1 {
        for c in 0..n - 1 {
            let a = r * n + c;
            let b = a + 1;
            let d = a + n;
            let e = d + 1;
            faces.push([a, b, e]);
            faces.push([a, e, d]);
        }
    }
    let grid = MeshGrid {
        rows: n,
        cols: n,
        cells: (0..n * n).map(Some).collect(),
    };
    Mesh {
        vertices,
        faces,
        grid: Some(grid),
    }
}

/// Smooth per-subject identity field: a handful of random gaussian bumps.
struct IdentityField {
    bumps: Vec<(f64, f64, f64, f64)>, // (cx, cy, sigma, amplitude)
}

impl IdentityField {
    fn sample(rng: &mut ChaCha8Rng, scale_mm: f64) -> IdentityField {
        let bumps = (0..6)
            .map(|_| {
                let angle = rng.gen::<f64>() * std::f64::consts::TAU;
                // bump centers stay off the nosetip region (annulus 25..70 mm)
                let radius = (625.0 + rng.gen::<f64>() * (4900.0 - 625.0)).sqrt();
                let sigma = rng.gen_range(12.0..28.0);
                let amplitude = rng.gen_range(-1.0..1.0) * scale_mm;
                (radius * angle.cos(), radius * angle.sin(), sigma, amplitude)
            })
            .collect();
        IdentityField { bumps }
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        self.bumps
            .iter()
            .map(|&(cx, cy, sigma, amp)| amp * bump(x, y, cx, cy, sigma))
            .sum()
    }
}

fn planted_for(
    effect: &ExpressionEffect,
    gender: Gender,
    rng: &mut ChaCha8Rng,
    jitter: f64,
) -> PlantedDeformation {
    let amplitude = match gender {
        Gender::Male => effect.male_amplitude_mm,
        Gender::Female => effect.female_amplitude_mm,
    } * rng.gen_range(1.0 - jitter..=1.0 + jitter);
    let mut weights = BTreeMap::new();
    if gender == Gender::Female && effect.female_mix {
        let [second, third] = effect.field.companions();
        let fields = [effect.field, second, third];
        let raw: Vec<f64> = fields.iter().map(|_| rng.gen_range(0.25..1.0)).collect();
        let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
        for (field, w) in fields.iter().zip(&raw) {
            weights.insert(*field, amplitude * w / norm);
        }
    } else {
        weights.insert(effect.field, amplitude);
    }
    PlantedDeformation { weights }
}

fn generate_subject(config: &SynthConfig, index: usize, gender: Gender) -> Vec<SyntheticScan> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_index(config.seed, index as u64));
    let subject_id = format!("subj{index:03}");
    let sign = if gender == Gender::Male { 0.5 } else { -0.5 };
    let identity = IdentityField::sample(&mut rng, config.subject_noise_mm);
    let neutral_z = move |b: &BaseShape, gap: f64, x: f64, y: f64, id: &IdentityField| {
        b.height(x, y) + sign * gap * gender_morph_field(x, y) + id.value(x, y)
    };
    // Deterministic, gender-symmetric demographics.
    let age = 18 + ((index * 7) % 23) as u32;
    let ethnicity = if index % 2 == 0 { Ethnicity::Asian } else { Ethnicity::NonAsian };
    let sensor = Normal::new(0.0, config.sensor_noise_mm.max(f64::MIN_POSITIVE)).unwrap();
    let noisy = config.sensor_noise_mm > 0.0;

    let nose_y = config.base.nose_center_y_mm;
    let mut scans = Vec::with_capacity(Expression::ALL.len());
    for &expression in &Expression::ALL {
        let planted = config
            .expression_effects
            .get(&expression)
            .map(|e| planted_for(e, gender, &mut rng, config.amplitude_jitter));
        let mut scan_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let surface = |x: f64, y: f64| {
            neutral_z(&config.base, config.gender_morph_gap_mm, x, y, &identity)
                + planted.as_ref().map_or(0.0, |p| p.value(x, y))
        };
        let mut mesh = grid_face(&config.base, &surface);
        if noisy {
            for v in &mut mesh.vertices {
                v.z += sensor.sample(&mut scan_rng);
            }
        }
        let scan_id = format!("{subject_id}_{}", expression.short());
        let record = ScanRecord {
            scan_id: scan_id.clone(),
            subject_id: subject_id.clone(),
            gender,
            expression,
            ethnicity,
            age,
            mesh_path: PathBuf::from(format!("meshes/{scan_id}.ply")),
            landmarks_path: None,
        };
        scans.push(SyntheticScan {
            record,
            nosetip: Point3::new(0.0, nose_y, surface(0.0, nose_y)),
            mesh,
            planted,
        });
    }
    scans
}

/// Generate the full corpus in memory. Subjects are independent jobs with
/// per-subject RNG streams, so parallel generation is schedule-independent.
pub fn synthesize_corpus(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let n_female = (config.n_subjects as f64 * config.female_fraction).round() as usize;
    let scans: Vec<SyntheticScan> = (0..config.n_subjects)
        .into_par_iter()
        .flat_map_iter(|i| {
            let gender = if i < n_female { Gender::Female } else { Gender::Male };
            generate_subject(config, i, gender)
        })
        .collect();
    Ok(SyntheticCorpus {
        config: config.clone(),
        template: canonical_template(&config.base),
        scans,
    })
}

/// Generate the corpus to disk: PLY meshes under `meshes/`, `manifest.csv`,
/// `template.ply` and `ground_truth.json`. Returns the manifest path.
pub fn generate_corpus(config: &SynthConfig, out_dir: &Path) -> Result<PathBuf> {
    let corpus = synthesize_corpus(config)?;
    let mesh_dir = out_dir.join("meshes");
    fs::create_dir_all(&mesh_dir).map_err(|e| Error::io(&mesh_dir, e))?;
    for scan in &corpus.scans {
        save_mesh(&scan.mesh, &out_dir.join(&scan.record.mesh_path), MeshFormat::PlyAscii)?;
    }
    save_mesh(&corpus.template, &out_dir.join("template.ply"), MeshFormat::PlyAscii)?;
    let manifest_path = out_dir.join("manifest.csv");
    let records: Vec<ScanRecord> = corpus.scans.iter().map(|s| s.record.clone()).collect();
    save_manifest(&records, &manifest_path)?;

    let mut subjects: Vec<SubjectTruth> = Vec::new();
    for scan in &corpus.scans {
        if subjects.last().map(|s| &s.subject_id) != Some(&scan.record.subject_id) {
            subjects.push(SubjectTruth {
                subject_id: scan.record.subject_id.clone(),
                gender: scan.record.gender,
                nosetip: [scan.nosetip.x, scan.nosetip.y, scan.nosetip.z],
                planted: BTreeMap::new(),
            });
        }
        if let Some(planted) = &scan.planted {
            subjects
                .last_mut()
                .unwrap()
                .planted
                .insert(scan.record.expression, planted.clone());
        }
    }
    let truth = GroundTruth {
        config: config.clone(),
        subjects,
    };
    let truth_path = out_dir.join("ground_truth.json");
    let json = serde_json::to_string_pretty(&truth).expect("ground truth serializes");
    fs::write(&truth_path, json).map_err(|e| Error::io(&truth_path, e))?;
    Ok(manifest_path)
}
