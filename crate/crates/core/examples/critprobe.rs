use radialface::curves::{extract_radial_curves, grid_to_vector};
use radialface::eval::{expression_based_eval, FeatureItem};
use radialface::features::{build_subject_pairs, expression_delta};
use radialface::learn::{ClassifierKind, LearnParams};
use radialface::mesh_io::{Expression, Gender};
use radialface::preprocess::{preprocess_scan, PreprocessConfig};
use radialface::stats::pca_explained_variance;
use radialface::synth::{default_profile, synthesize_corpus};
use rayon::prelude::*;

fn main() {
    let n_subjects: usize = std::env::args().nth(1).unwrap().parse().unwrap();
    let seeds: u64 = std::env::args().nth(2).unwrap().parse().unwrap();
    let gap: f64 = std::env::args().nth(3).unwrap().parse().unwrap();
    let noise: f64 = std::env::args().nth(4).unwrap().parse().unwrap();
    let subj: f64 = std::env::args().nth(5).unwrap().parse().unwrap();
    let jitter: f64 = std::env::args().nth(6).unwrap().parse().unwrap();
    let happy_amp: f64 = std::env::args()
        .nth(7)
        .map(|s| s.parse().unwrap())
        .unwrap_or(6.0);
    let do_eval: bool = std::env::args()
        .nth(8)
        .map(|s| s.parse().unwrap())
        .unwrap_or(true);
    let seed0: u64 = std::env::args()
        .nth(9)
        .map(|s| s.parse().unwrap())
        .unwrap_or(1000);
    for seed in 0..seeds {
        let t0 = std::time::Instant::now();
        let mut cfg = default_profile();
        cfg.n_subjects = n_subjects;
        cfg.seed = seed0 + seed;
        cfg.expression_effects
            .get_mut(&Expression::Happy)
            .unwrap()
            .male_amplitude_mm = happy_amp;
        cfg.gender_morph_gap_mm = gap;
        cfg.sensor_noise_mm = noise;
        cfg.subject_noise_mm = subj;
        cfg.amplitude_jitter = jitter;
        let corpus = synthesize_corpus(&cfg).unwrap();
        let pre_cfg = PreprocessConfig::default();
        let feats: Vec<_> = corpus
            .scans
            .par_iter()
            .map(|scan| {
                let pre = preprocess_scan(&scan.mesh, &corpus.template, &pre_cfg).unwrap();
                let grid =
                    extract_radial_curves(&pre.mesh, &pre.nosetip, 100, 40, 80.0).unwrap();
                (scan.record.clone(), grid_to_vector(&grid).unwrap())
            })
            .collect();
        let pairs = build_subject_pairs(&feats).unwrap();
        let items: Vec<FeatureItem> = pairs
            .iter()
            .map(|p| {
                let delta = expression_delta(p).unwrap();
                FeatureItem {
                    scan_id: p.expressive.0.scan_id.clone(),
                    subject_id: p.expressive.0.subject_id.clone(),
                    gender: p.expressive.0.gender,
                    expression: p.expressive.0.expression,
                    values: delta.values,
                }
            })
            .collect();
        let params = LearnParams {
            classifier: ClassifierKind::Svm,
            svm_tol: 1e-3,
            ..LearnParams::default()
        };
        print!("seed {seed}: ");
        if do_eval {
            let reports = expression_based_eval(&items, &params, 500 + seed).unwrap();
            for &e in &Expression::NON_NEUTRAL {
                print!("{}={:.3} ", e.short(), reports[&e].rates.overall_rate);
            }
        }
        for g in [Gender::Male, Gender::Female] {
            let rows: Vec<Vec<f64>> = items
                .iter()
                .filter(|i| i.expression == Expression::Happy && i.gender == g)
                .map(|i| i.values.clone())
                .collect();
            let spec = pca_explained_variance(&rows).unwrap();
            print!("pc1_{g:?}={:.3} ", spec.ratios[0]);
        }
        println!("total={:?}", t0.elapsed());
    }
}
