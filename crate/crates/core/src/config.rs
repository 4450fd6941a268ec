//! Flat plain-text run configuration.
//!
//! Grammar: one `key = value` pair per line; keys are dotted lowercase
//! paths (`preprocess.crop_radius_mm = 80`); `#` starts a comment; blank
//! lines are ignored. Unknown keys are errors, so typos fail fast.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curves::{DEFAULT_N_CURVES, DEFAULT_N_POINTS, DEFAULT_R_MAX_MM};
use crate::error::{Error, Result};
use crate::learn::{ClassifierKind, LearnParams};
use crate::mesh_io::Expression;
use crate::preprocess::PreprocessConfig;
use crate::synth::{default_profile, DeformationField, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub n_curves: usize,
    pub n_points: usize,
    pub r_max_mm: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            n_curves: DEFAULT_N_CURVES,
            n_points: DEFAULT_N_POINTS,
            r_max_mm: DEFAULT_R_MAX_MM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Feature CSV to render; defaults to the depth features in the
    /// output directory.
    pub features: Option<PathBuf>,
    /// Row to render; defaults to the first row.
    pub scan_id: Option<String>,
    pub palette: String,
    pub upscale: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            features: None,
            scan_id: None,
            palette: "heat".to_string(),
            upscale: 4,
        }
    }
}

/// Full run configuration: every module's parameters plus data paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preprocess: PreprocessConfig,
    pub curves: CurveConfig,
    pub learn: LearnParams,
    pub synth: SynthConfig,
    /// Dataset manifest; defaults to `<out>/manifest.csv`.
    pub manifest: Option<PathBuf>,
    /// Frontalization template mesh; defaults to the synthetic canonical
    /// face.
    pub template: Option<PathBuf>,
    pub render: RenderConfig,
    pub histogram_bins: usize,
    pub master_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preprocess: PreprocessConfig::default(),
            curves: CurveConfig::default(),
            learn: LearnParams::default(),
            synth: default_profile(),
            manifest: None,
            template: None,
            render: RenderConfig::default(),
            histogram_bins: crate::eval::DEFAULT_HISTOGRAM_BINS,
            master_seed: 7,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value for {key}: {value:?}")))
}

fn parse_field(key: &str, value: &str) -> Result<DeformationField> {
    for field in DeformationField::ALL {
        if field.to_string().eq_ignore_ascii_case(value) {
            return Ok(field);
        }
    }
    Err(Error::Config(format!("unknown deformation field for {key}: {value:?}")))
}

fn expression_by_name(name: &str) -> Option<Expression> {
    Expression::ALL
        .into_iter()
        .find(|e| e.to_string().eq_ignore_ascii_case(name))
}

impl RunConfig {
    /// Apply one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "preprocess.crop_radius_mm" => self.preprocess.crop_radius_mm = parse_value(key, value)?,
            "preprocess.smooth_iterations" => self.preprocess.smooth_iterations = parse_value(key, value)?,
            "preprocess.smooth_lambda" => self.preprocess.smooth_lambda = parse_value(key, value)?,
            "preprocess.icp_max_iters" => self.preprocess.icp_max_iters = parse_value(key, value)?,
            "preprocess.icp_tol_mm" => self.preprocess.icp_tol_mm = parse_value(key, value)?,
            "curves.n_curves" => self.curves.n_curves = parse_value(key, value)?,
            "curves.n_points" => self.curves.n_points = parse_value(key, value)?,
            "curves.r_max_mm" => self.curves.r_max_mm = parse_value(key, value)?,
            "learn.classifier" => {
                self.learn.classifier = match value {
                    "svm" => ClassifierKind::Svm,
                    "forest" => ClassifierKind::Forest,
                    other => {
                        return Err(Error::Config(format!(
                            "learn.classifier must be svm or forest, got {other:?}"
                        )))
                    }
                }
            }
            "learn.svm_c" => self.learn.svm_c = parse_value(key, value)?,
            "learn.svm_tol" => self.learn.svm_tol = parse_value(key, value)?,
            "learn.n_trees" => self.learn.n_trees = parse_value(key, value)?,
            "learn.min_leaf" => self.learn.min_leaf = parse_value(key, value)?,
            "synth.n_subjects" => self.synth.n_subjects = parse_value(key, value)?,
            "synth.female_fraction" => self.synth.female_fraction = parse_value(key, value)?,
            "synth.gender_morph_gap_mm" => self.synth.gender_morph_gap_mm = parse_value(key, value)?,
            "synth.subject_noise_mm" => self.synth.subject_noise_mm = parse_value(key, value)?,
            "synth.sensor_noise_mm" => self.synth.sensor_noise_mm = parse_value(key, value)?,
            "synth.amplitude_jitter" => self.synth.amplitude_jitter = parse_value(key, value)?,
            "synth.seed" => self.synth.seed = parse_value(key, value)?,
            "synth.base.half_extent_mm" => self.synth.base.half_extent_mm = parse_value(key, value)?,
            "synth.base.grid_pitch_mm" => self.synth.base.grid_pitch_mm = parse_value(key, value)?,
            "synth.base.dome_radius_mm" => self.synth.base.dome_radius_mm = parse_value(key, value)?,
            "synth.base.dome_height_mm" => self.synth.base.dome_height_mm = parse_value(key, value)?,
            "synth.base.nose_amplitude_mm" => self.synth.base.nose_amplitude_mm = parse_value(key, value)?,
            "synth.base.nose_center_y_mm" => self.synth.base.nose_center_y_mm = parse_value(key, value)?,
            "synth.base.nose_sigma_mm" => self.synth.base.nose_sigma_mm = parse_value(key, value)?,
            "data.manifest" => self.manifest = Some(PathBuf::from(value)),
            "data.template" => self.template = Some(PathBuf::from(value)),
            "render.features" => self.render.features = Some(PathBuf::from(value)),
            "render.scan_id" => self.render.scan_id = Some(value.to_string()),
            "render.palette" => self.render.palette = value.to_string(),
            "render.upscale" => self.render.upscale = parse_value(key, value)?,
            "eval.histogram_bins" => self.histogram_bins = parse_value(key, value)?,
            "run.master_seed" => self.master_seed = parse_value(key, value)?,
            _ => {
                // synth.effect.<expression>.<param>
                if let Some(rest) = key.strip_prefix("synth.effect.") {
                    return self.set_effect(key, rest, value);
                }
                return Err(Error::Config(format!("unknown config key {key:?}")));
            }
        }
        Ok(())
    }

    fn set_effect(&mut self, key: &str, rest: &str, value: &str) -> Result<()> {
        let (expr_name, param) = rest
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
        let expr = expression_by_name(expr_name)
            .ok_or_else(|| Error::Config(format!("unknown expression in {key:?}")))?;
        let effect = self.synth.expression_effects.entry(expr).or_insert_with(|| {
            crate::synth::ExpressionEffect {
                field: DeformationField::Mouth,
                male_amplitude_mm: 0.0,
                female_amplitude_mm: 0.0,
                female_mix: false,
            }
        });
        match param {
            "field" => effect.field = parse_field(key, value)?,
            "male_amplitude_mm" => effect.male_amplitude_mm = parse_value(key, value)?,
            "female_amplitude_mm" => effect.female_amplitude_mm = parse_value(key, value)?,
            "female_mix" => effect.female_mix = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parse a config file's overrides on top of the defaults.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key = value, got {raw:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.synth.validate()?;
        if self.curves.n_curves == 0 || self.curves.n_points == 0 || self.curves.r_max_mm <= 0.0 {
            return Err(Error::Config("curve parameters must be positive".into()));
        }
        if self.histogram_bins == 0 {
            return Err(Error::Config("eval.histogram_bins must be positive".into()));
        }
        if !matches!(self.render.palette.as_str(), "heat" | "grayscale") {
            return Err(Error::Config(format!(
                "render.palette must be heat or grayscale, got {:?}",
                self.render.palette
            )));
        }
        if self.render.upscale == 0 {
            return Err(Error::Config("render.upscale must be positive".into()));
        }
        Ok(())
    }
}
