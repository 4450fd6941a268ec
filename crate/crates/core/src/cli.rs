//! Command-line interface: `synth`, `features`, `eval`, `analyze` and
//! `render` subcommands driven by a flat key=value config file.
//!
//! Every command writes a `run.json` echoing the full configuration, the
//! master seed and the toolkit version. Outputs are deterministic for
//! identical config + seed, independent of `--jobs`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::curves::{extract_radial_curves, FeatureKind, FeatureVector, DEFAULT_N_CURVES, DEFAULT_N_POINTS};
use crate::error::{Error, Result};
use crate::eval::{
    decision_histograms, expression_based_eval, expression_specific_matrix, loo_subject_cv,
    EvalReport, FeatureItem,
};
use crate::features::{
    build_subject_pairs, expression_delta, landmark_coord_features, landmark_distance_features,
    read_feature_csv, write_feature_csv,
};
use crate::mesh_io::{
    load_landmarks, load_manifest, load_mesh, Mesh, MeshFormat, ScanRecord,
};
use crate::preprocess::preprocess_scan;
use crate::report::{
    render_grid, render_significance, write_histograms, write_significance_csv, write_tables,
    Palette, Scale,
};
use crate::stats::{demographic_balance, pca_explained_variance, saliency_map, DEFAULT_ALPHAS};
use crate::synth::{canonical_template, generate_corpus};

#[derive(Parser)]
#[command(name = "radialface", version, about = "3D face analysis toolkit")]
struct Cli {
    /// Plain-text key=value config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count; results are independent of this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Experiment {
    General,
    Matrix,
    ExpressionBased,
    Histograms,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Analysis {
    Ttest,
    Pca,
    Balance,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (meshes, manifest, ground truth).
    Synth,
    /// Preprocess scans and write feature CSVs.
    Features,
    /// Run an evaluation experiment and write reports.
    Eval {
        #[arg(long, value_enum)]
        experiment: Experiment,
    },
    /// Statistical analyses over delta features and the manifest.
    Analyze {
        #[arg(long, value_enum)]
        analysis: Analysis,
    },
    /// Render a feature grid as a PPM image.
    Render,
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

#[derive(Serialize)]
struct RunEcho<'a> {
    command: String,
    toolkit_version: &'static str,
    master_seed: u64,
    config: &'a RunConfig,
}

fn write_run_json(out: &Path, command: &str, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let echo = RunEcho {
        command: command.to_string(),
        toolkit_version: env!("CARGO_PKG_VERSION"),
        master_seed: config.master_seed,
        config,
    };
    let path = out.join("run.json");
    let json = serde_json::to_string_pretty(&echo).expect("config serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
        config.synth.seed = seed;
    }
    config.validate()?;
    let out = cli
        .out
        .clone()
        .ok_or_else(|| Error::Config("--out DIR is required".into()))?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    match cli.command {
        Command::Synth => {
            write_run_json(&out, "synth", &config)?;
            let manifest = generate_corpus(&config.synth, &out)?;
            info!("wrote corpus manifest {}", manifest.display());
            Ok(())
        }
        Command::Features => {
            write_run_json(&out, "features", &config)?;
            cmd_features(&config, &out)
        }
        Command::Eval { experiment } => {
            let name = match experiment {
                Experiment::General => "eval-general",
                Experiment::Matrix => "eval-matrix",
                Experiment::ExpressionBased => "eval-expression-based",
                Experiment::Histograms => "eval-histograms",
            };
            write_run_json(&out, name, &config)?;
            cmd_eval(&config, &out, experiment)
        }
        Command::Analyze { analysis } => {
            let name = match analysis {
                Analysis::Ttest => "analyze-ttest",
                Analysis::Pca => "analyze-pca",
                Analysis::Balance => "analyze-balance",
            };
            write_run_json(&out, name, &config)?;
            cmd_analyze(&config, &out, analysis)
        }
        Command::Render => {
            write_run_json(&out, "render", &config)?;
            cmd_render(&config, &out)
        }
    }
}

fn mesh_format_for(path: &Path) -> MeshFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("xyz") => MeshFormat::Xyz,
        Some("rg") | Some("grid") => MeshFormat::RangeGrid,
        _ => MeshFormat::PlyAscii,
    }
}

fn manifest_path(config: &RunConfig, out: &Path) -> PathBuf {
    config
        .manifest
        .clone()
        .unwrap_or_else(|| out.join("manifest.csv"))
}

/// Manifest mesh/landmark paths are relative to the manifest's directory.
fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn load_template(config: &RunConfig) -> Result<Mesh> {
    match &config.template {
        Some(path) => load_mesh(path, mesh_format_for(path)),
        None => Ok(canonical_template(&config.synth.base)),
    }
}

fn cmd_features(config: &RunConfig, out: &Path) -> Result<()> {
    let manifest = manifest_path(config, out);
    let records = load_manifest(&manifest)?;
    let base = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let template = load_template(config)?;
    let curve_cfg = &config.curves;

    let depth_rows: Result<Vec<(ScanRecord, Vec<f64>)>> = records
        .par_iter()
        .map(|record| {
            let mesh_path = resolve(&base, &record.mesh_path);
            let mesh = load_mesh(&mesh_path, mesh_format_for(&mesh_path))
                .map_err(|e| Error::Invariant(format!("scan {}: {e}", record.scan_id)))?;
            let scan = preprocess_scan(&mesh, &template, &config.preprocess)
                .map_err(|e| Error::Invariant(format!("scan {}: {e}", record.scan_id)))?;
            let grid = extract_radial_curves(
                &scan.mesh,
                &scan.nosetip,
                curve_cfg.n_curves,
                curve_cfg.n_points,
                curve_cfg.r_max_mm,
            )
            .map_err(|e| Error::Invariant(format!("scan {}: {e}", record.scan_id)))?;
            Ok((record.clone(), grid.depths))
        })
        .collect();
    let depth_rows = depth_rows?;
    let csv_rows: Vec<(String, &[f64])> = depth_rows
        .iter()
        .map(|(r, v)| (r.scan_id.clone(), v.as_slice()))
        .collect();
    write_feature_csv(&out.join("features_depth.csv"), &csv_rows)?;
    info!("wrote {} depth feature rows", csv_rows.len());

    if curve_cfg.n_curves * curve_cfg.n_points == DEFAULT_N_CURVES * DEFAULT_N_POINTS {
        let labeled: Vec<(ScanRecord, FeatureVector)> = depth_rows
            .iter()
            .map(|(r, v)| {
                Ok((r.clone(), FeatureVector::new(v.clone(), FeatureKind::Depth4000)?))
            })
            .collect::<Result<_>>()?;
        let pairs = build_subject_pairs(&labeled)?;
        let mut delta_rows: Vec<(String, Vec<f64>)> = Vec::new();
        for pair in &pairs {
            let delta = expression_delta(pair)?;
            delta_rows.push((pair.expressive.0.scan_id.clone(), delta.values));
        }
        let refs: Vec<(String, &[f64])> = delta_rows
            .iter()
            .map(|(id, v)| (id.clone(), v.as_slice()))
            .collect();
        write_feature_csv(&out.join("features_delta.csv"), &refs)?;
        info!("wrote {} delta feature rows", refs.len());
    } else {
        warn!(
            "curve grid {}x{} is non-standard; skipping delta features",
            curve_cfg.n_curves, curve_cfg.n_points
        );
    }

    let with_landmarks: Vec<&ScanRecord> = records
        .iter()
        .filter(|r| r.landmarks_path.is_some())
        .collect();
    if !with_landmarks.is_empty() {
        let mut coord_rows = Vec::new();
        let mut dist_rows = Vec::new();
        for record in with_landmarks {
            let path = resolve(&base, record.landmarks_path.as_ref().expect("filtered"));
            let landmarks = load_landmarks(&path)?;
            coord_rows.push((record.scan_id.clone(), landmark_coord_features(&landmarks)?.values));
            dist_rows.push((
                record.scan_id.clone(),
                landmark_distance_features(&landmarks)?.values,
            ));
        }
        let coords: Vec<(String, &[f64])> =
            coord_rows.iter().map(|(i, v)| (i.clone(), v.as_slice())).collect();
        let dists: Vec<(String, &[f64])> =
            dist_rows.iter().map(|(i, v)| (i.clone(), v.as_slice())).collect();
        write_feature_csv(&out.join("features_coord.csv"), &coords)?;
        write_feature_csv(&out.join("features_dist.csv"), &dists)?;
        info!("wrote {} landmark feature rows", coords.len());
    }
    Ok(())
}

/// Join feature CSV rows with manifest metadata into labeled items.
fn feature_items(csv_path: &Path, records: &[ScanRecord]) -> Result<Vec<FeatureItem>> {
    let by_scan: BTreeMap<&str, &ScanRecord> =
        records.iter().map(|r| (r.scan_id.as_str(), r)).collect();
    let rows = read_feature_csv(csv_path)?;
    if rows.is_empty() {
        return Err(Error::EmptyResult(format!(
            "no feature rows in {}",
            csv_path.display()
        )));
    }
    rows.into_iter()
        .map(|(scan_id, values)| {
            let record = by_scan.get(scan_id.as_str()).ok_or_else(|| {
                Error::Invariant(format!("feature row {scan_id} missing from manifest"))
            })?;
            Ok(FeatureItem {
                scan_id,
                subject_id: record.subject_id.clone(),
                gender: record.gender,
                expression: record.expression,
                values,
            })
        })
        .collect()
}

fn classifier_label(config: &RunConfig) -> &'static str {
    match config.learn.classifier {
        crate::learn::ClassifierKind::Svm => "svm",
        crate::learn::ClassifierKind::Forest => "forest",
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn cmd_eval(config: &RunConfig, out: &Path, experiment: Experiment) -> Result<()> {
    let manifest = manifest_path(config, out);
    let records = load_manifest(&manifest)?;
    let depth_csv = out.join("features_depth.csv");
    let delta_csv = out.join("features_delta.csv");

    match experiment {
        Experiment::General => {
            let items = feature_items(&depth_csv, &records)?;
            let report = loo_subject_cv(&items, &config.learn, config.master_seed)?;
            report.verify()?;
            info!("expression-general overall rate {:.4}", report.rates.overall_rate);
            write_json(&out.join("eval_general.json"), &report)?;
            let mut reports = BTreeMap::new();
            reports.insert(format!("general_{}", classifier_label(config)), report);
            write_tables(&reports, None, &[], out)
        }
        Experiment::Matrix => {
            let items = feature_items(&depth_csv, &records)?;
            let matrix = expression_specific_matrix(&items, &config.learn, config.master_seed)?;
            info!(
                "matrix diagonal mean {:.4}, off-diagonal mean {:.4}",
                matrix.diagonal_mean(),
                matrix.off_diagonal_mean()
            );
            write_tables(&BTreeMap::new(), Some(&matrix), &[], out)
        }
        Experiment::ExpressionBased => {
            let items = feature_items(&delta_csv, &records)?;
            let reports = expression_based_eval(&items, &config.learn, config.master_seed)?;
            for report in reports.values() {
                report.verify()?;
            }
            write_json(&out.join("eval_expression_based.json"), &reports)?;
            let named: BTreeMap<String, EvalReport> = reports
                .into_iter()
                .map(|(expr, report)| {
                    (
                        format!("expression_based_{}_{}", expr.short(), classifier_label(config)),
                        report,
                    )
                })
                .collect();
            write_tables(&named, None, &[], out)
        }
        Experiment::Histograms => {
            let items = feature_items(&depth_csv, &records)?;
            let report = loo_subject_cv(&items, &config.learn, config.master_seed)?;
            report.verify()?;
            let set = decision_histograms(&report, &records, config.histogram_bins)?;
            write_histograms(&set, out)
        }
    }
}

fn cmd_analyze(config: &RunConfig, out: &Path, analysis: Analysis) -> Result<()> {
    let manifest = manifest_path(config, out);
    let records = load_manifest(&manifest)?;
    match analysis {
        Analysis::Ttest => {
            let items = feature_items(&out.join("features_delta.csv"), &records)?;
            let labeled: Vec<(crate::mesh_io::Gender, &[f64])> =
                items.iter().map(|i| (i.gender, i.values.as_slice())).collect();
            let map = saliency_map(
                &labeled,
                config.curves.n_curves,
                config.curves.n_points,
                &DEFAULT_ALPHAS,
            )?;
            write_significance_csv(&map, &out.join("significance.csv"))?;
            for &alpha in &DEFAULT_ALPHAS {
                let image = render_significance(&map, alpha)?.upscale(config.render.upscale);
                image.write_ppm(&out.join(format!("significance_{alpha}.ppm")))?;
            }
            for &alpha in &DEFAULT_ALPHAS {
                info!("mask({alpha}) density {:.4}", map.mask_density(alpha)?);
            }
            Ok(())
        }
        Analysis::Pca => {
            let items = feature_items(&out.join("features_delta.csv"), &records)?;
            let mut groups: BTreeMap<_, Vec<Vec<f64>>> = BTreeMap::new();
            for item in &items {
                groups
                    .entry((item.gender, item.expression))
                    .or_default()
                    .push(item.values.clone());
            }
            let mut spectra = Vec::new();
            for ((gender, expression), rows) in &groups {
                let mut spectrum = pca_explained_variance(rows)?;
                spectrum.gender = Some(*gender);
                spectrum.expression = Some(*expression);
                info!(
                    "{gender}/{expression}: first component explains {:.4}",
                    spectrum.ratios[0]
                );
                spectra.push(spectrum);
            }
            write_tables(&BTreeMap::new(), None, &spectra, out)
        }
        Analysis::Balance => {
            let report = demographic_balance(&records)?;
            info!(
                "balance: age p = {:.4}, ethnicity p = {:.4}",
                report.age_p, report.ethnicity_p
            );
            write_json(&out.join("balance.json"), &report)?;
            let csv = format!(
                "metric,t,p\nage,{},{}\nethnicity,{},{}\n",
                report.age_t, report.age_p, report.ethnicity_t, report.ethnicity_p
            );
            fs::write(out.join("balance.csv"), csv).map_err(|e| Error::io(out, e))
        }
    }
}

fn cmd_render(config: &RunConfig, out: &Path) -> Result<()> {
    let csv_path = config
        .render
        .features
        .clone()
        .unwrap_or_else(|| out.join("features_depth.csv"));
    let rows = read_feature_csv(&csv_path)?;
    let (scan_id, values) = match &config.render.scan_id {
        Some(id) => rows
            .into_iter()
            .find(|(scan, _)| scan == id)
            .ok_or_else(|| Error::EmptyResult(format!("scan {id} not found")))?,
        None => rows
            .into_iter()
            .next()
            .ok_or_else(|| Error::EmptyResult("empty feature CSV".into()))?,
    };
    let n_points = config.curves.n_points;
    if values.len() % n_points != 0 {
        return Err(Error::DimensionMismatch {
            expected: n_points,
            got: values.len(),
        });
    }
    let rows_n = values.len() / n_points;
    let palette = if config.render.palette == "grayscale" {
        Palette::Grayscale
    } else {
        Palette::Heat
    };
    let image =
        render_grid(&values, rows_n, n_points, palette, Scale::Auto)?.upscale(config.render.upscale);
    let path = out.join(format!("render_{scan_id}.ppm"));
    image.write_ppm(&path)?;
    info!("wrote {}", path.display());
    Ok(())
}
