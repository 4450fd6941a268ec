//! Subject-independent evaluation protocols: expression-general
//! leave-one-subject-out cross-validation, the 5×5 expression-specific
//! train/test matrix, per-expression delta-feature evaluation and critical
//! value histograms.
//!
//! Folds run in parallel via rayon but are collected in sorted subject
//! order, so reports are identical regardless of worker count.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::derive_seed;
use crate::learn::{Decision, LearnParams, Model};
use crate::mesh_io::{Expression, Gender, ScanRecord};

/// One labeled feature row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureItem {
    pub scan_id: String,
    pub subject_id: String,
    pub gender: Gender,
    pub expression: Expression,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanDecision {
    pub scan_id: String,
    pub true_gender: Gender,
    pub decision: Decision,
}

impl ScanDecision {
    pub fn correct(&self) -> bool {
        self.decision.label == self.true_gender
    }
}

/// Classification rates as fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub female_rate: f64,
    pub male_rate: f64,
    pub overall_rate: f64,
}

impl Rates {
    pub fn from_decisions(per_scan: &[ScanDecision]) -> Rates {
        let rate = |gender: Option<Gender>| {
            let subset: Vec<&ScanDecision> = per_scan
                .iter()
                .filter(|d| gender.map_or(true, |g| d.true_gender == g))
                .collect();
            if subset.is_empty() {
                f64::NAN
            } else {
                subset.iter().filter(|d| d.correct()).count() as f64 / subset.len() as f64
            }
        };
        Rates {
            female_rate: rate(Some(Gender::Female)),
            male_rate: rate(Some(Gender::Male)),
            overall_rate: rate(None),
        }
    }
}

/// Experiment configuration echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfigEcho {
    pub params: LearnParams,
    pub master_seed: u64,
    pub n_subjects: usize,
    pub n_scans: usize,
}

/// Per-fold training-set subject lists, for protocol audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAudit {
    pub test_subject: String,
    pub train_subjects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_scan: Vec<ScanDecision>,
    pub rates: Rates,
    pub config: EvalConfigEcho,
    pub audit: Vec<FoldAudit>,
}

impl EvalReport {
    /// Protocol audit: every fold's training set excludes the held-out
    /// subject, and the stored rates equal rates recomputed from the
    /// per-scan decisions.
    pub fn verify(&self) -> Result<()> {
        for fold in &self.audit {
            if fold.train_subjects.contains(&fold.test_subject) {
                return Err(Error::Invariant(format!(
                    "fold for subject {} trains on itself",
                    fold.test_subject
                )));
            }
        }
        let recomputed = Rates::from_decisions(&self.per_scan);
        if recomputed != self.rates {
            return Err(Error::Invariant("stored rates differ from per-scan decisions".into()));
        }
        Ok(())
    }
}

fn to_training_set(items: &[&FeatureItem]) -> (Vec<Vec<f64>>, Vec<Gender>) {
    let x = items.iter().map(|i| i.values.clone()).collect();
    let y = items.iter().map(|i| i.gender).collect();
    (x, y)
}

fn check_both_genders(items: &[&FeatureItem], test_subject: &str) -> Result<()> {
    let females = items.iter().any(|i| i.gender == Gender::Female);
    let males = items.iter().any(|i| i.gender == Gender::Male);
    if females && males {
        Ok(())
    } else {
        Err(Error::SingleClassFold {
            subject_id: test_subject.to_string(),
        })
    }
}

fn sorted_subjects(items: &[FeatureItem]) -> Vec<String> {
    let set: BTreeSet<&str> = items.iter().map(|i| i.subject_id.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

/// Leave-one-subject-out cross-validation: one fold per subject, all of
/// that subject's scans are test items, per-fold seed derived from
/// (master_seed, subject_id).
pub fn loo_subject_cv(
    items: &[FeatureItem],
    params: &LearnParams,
    master_seed: u64,
) -> Result<EvalReport> {
    let subjects = sorted_subjects(items);
    if subjects.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            got: subjects.len(),
        });
    }
    let folds: Result<Vec<(Vec<ScanDecision>, FoldAudit)>> = subjects
        .par_iter()
        .map(|subject| {
            let train: Vec<&FeatureItem> =
                items.iter().filter(|i| &i.subject_id != subject).collect();
            let test: Vec<&FeatureItem> =
                items.iter().filter(|i| &i.subject_id == subject).collect();
            check_both_genders(&train, subject)?;
            let fold_seed = derive_seed(master_seed, subject);
            let (x, y) = to_training_set(&train);
            let model = Model::train(params, &x, &y, fold_seed)?;
            let decisions = test
                .iter()
                .map(|item| {
                    Ok(ScanDecision {
                        scan_id: item.scan_id.clone(),
                        true_gender: item.gender,
                        decision: model.decide(&item.values)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let train_subjects = sorted_subjects(
                &train.iter().map(|&i| i.clone()).collect::<Vec<_>>(),
            );
            Ok((
                decisions,
                FoldAudit {
                    test_subject: subject.clone(),
                    train_subjects,
                },
            ))
        })
        .collect();
    let folds = folds?;
    let mut per_scan = Vec::new();
    let mut audit = Vec::new();
    for (decisions, fold_audit) in folds {
        per_scan.extend(decisions);
        audit.push(fold_audit);
    }
    Ok(EvalReport {
        rates: Rates::from_decisions(&per_scan),
        config: EvalConfigEcho {
            params: params.clone(),
            master_seed,
            n_subjects: subjects.len(),
            n_scans: items.len(),
        },
        per_scan,
        audit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub accuracy: f64,
    pub n_test: usize,
}

/// 5×5 grid of accuracies indexed by (train expression, test expression).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionMatrix {
    pub expressions: Vec<Expression>,
    /// `cells[train][test]`.
    pub cells: Vec<Vec<MatrixCell>>,
    pub master_seed: u64,
}

impl ExpressionMatrix {
    pub fn cell(&self, train: Expression, test: Expression) -> MatrixCell {
        let ti = self.expressions.iter().position(|&e| e == train).unwrap();
        let si = self.expressions.iter().position(|&e| e == test).unwrap();
        self.cells[ti][si]
    }

    pub fn diagonal_mean(&self) -> f64 {
        let n = self.expressions.len();
        (0..n).map(|i| self.cells[i][i].accuracy).sum::<f64>() / n as f64
    }

    pub fn off_diagonal_mean(&self) -> f64 {
        let n = self.expressions.len();
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += self.cells[i][j].accuracy;
                    count += 1;
                }
            }
        }
        sum / count as f64
    }

    /// Diagonal summary weighted by per-cell test scan counts.
    pub fn diagonal_scan_weighted_mean(&self) -> f64 {
        let n = self.expressions.len();
        let total: usize = (0..n).map(|i| self.cells[i][i].n_test).sum();
        (0..n)
            .map(|i| self.cells[i][i].accuracy * self.cells[i][i].n_test as f64)
            .sum::<f64>()
            / total as f64
    }
}

/// Expression-specific train/test matrix. Every cell is subject
/// independent: a test scan's subject is always excluded from training,
/// so each cell reduces to predictions from models keyed by
/// (train expression, excluded subject). Those models are trained once and
/// shared across all test expressions.
pub fn expression_specific_matrix(
    items: &[FeatureItem],
    params: &LearnParams,
    master_seed: u64,
) -> Result<ExpressionMatrix> {
    let expressions = Expression::ALL.to_vec();
    let mut by_expr: BTreeMap<Expression, Vec<&FeatureItem>> = BTreeMap::new();
    for item in items {
        by_expr.entry(item.expression).or_default().push(item);
    }
    for &expr in &expressions {
        let subset = by_expr.get(&expr).map(Vec::as_slice).unwrap_or(&[]);
        if subset.is_empty() {
            return Err(Error::EmptyGroup(format!("no scans with expression {expr}")));
        }
        check_both_genders(subset, &format!("<expression {expr}>"))?;
    }
    let subjects = sorted_subjects(items);

    // One model per (train expression, excluded subject), in parallel.
    let jobs: Vec<(Expression, String)> = expressions
        .iter()
        .flat_map(|&e| subjects.iter().map(move |s| (e, s.clone())))
        .collect();
    let models: Result<Vec<Model>> = jobs
        .par_iter()
        .map(|(train_expr, subject)| {
            let train: Vec<&FeatureItem> = by_expr[train_expr]
                .iter()
                .filter(|i| &i.subject_id != subject)
                .cloned()
                .collect();
            check_both_genders(&train, subject)?;
            let fold_seed = derive_seed(derive_seed(master_seed, train_expr.short()), subject);
            let (x, y) = to_training_set(&train);
            Model::train(params, &x, &y, fold_seed)
        })
        .collect();
    let models = models?;
    let model_for = |train_expr: Expression, subject: &str| -> &Model {
        let ei = expressions.iter().position(|&e| e == train_expr).unwrap();
        let si = subjects.binary_search_by(|s| s.as_str().cmp(subject)).unwrap();
        &models[ei * subjects.len() + si]
    };

    let mut cells = Vec::with_capacity(expressions.len());
    for &train_expr in &expressions {
        let mut row = Vec::with_capacity(expressions.len());
        for &test_expr in &expressions {
            let test = &by_expr[&test_expr];
            let mut correct = 0usize;
            for item in test.iter() {
                let decision = model_for(train_expr, &item.subject_id).decide(&item.values)?;
                if decision.label == item.gender {
                    correct += 1;
                }
            }
            row.push(MatrixCell {
                accuracy: correct as f64 / test.len() as f64,
                n_test: test.len(),
            });
        }
        cells.push(row);
    }
    Ok(ExpressionMatrix {
        expressions,
        cells,
        master_seed,
    })
}

/// Independent subject-LOO runs per expression subset of delta features.
pub fn expression_based_eval(
    items: &[FeatureItem],
    params: &LearnParams,
    master_seed: u64,
) -> Result<BTreeMap<Expression, EvalReport>> {
    let mut by_expr: BTreeMap<Expression, Vec<FeatureItem>> = BTreeMap::new();
    for item in items {
        by_expr.entry(item.expression).or_default().push(item.clone());
    }
    by_expr
        .into_iter()
        .map(|(expr, subset)| {
            let seed = derive_seed(master_seed, expr.short());
            Ok((expr, loo_subject_cv(&subset, params, seed)?))
        })
        .collect()
}

/// Paired histograms of critical values for one non-neutral expression:
/// the expressive scans and the same subjects' neutral scans, binned over
/// the pooled value range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPair {
    pub expression: Expression,
    /// bins + 1 edges, uniform over the pooled min/max.
    pub edges: Vec<f64>,
    pub count_expressive: Vec<usize>,
    pub count_neutral: Vec<usize>,
    pub mean_expressive: f64,
    pub mean_neutral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSet {
    pub bins: usize,
    pub pairs: Vec<HistogramPair>,
}

pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let bin = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    counts
}

pub fn decision_histograms(
    report: &EvalReport,
    manifest: &[ScanRecord],
    bins: usize,
) -> Result<HistogramSet> {
    let by_scan: BTreeMap<&str, &ScanRecord> =
        manifest.iter().map(|r| (r.scan_id.as_str(), r)).collect();
    let mut pairs = Vec::new();
    for &expr in &Expression::NON_NEUTRAL {
        let mut expressive = Vec::new();
        let mut subjects = BTreeSet::new();
        for decision in &report.per_scan {
            let record = by_scan.get(decision.scan_id.as_str()).ok_or_else(|| {
                Error::Invariant(format!("scan {} missing from manifest", decision.scan_id))
            })?;
            if record.expression == expr {
                expressive.push(decision.decision.critical_value);
                subjects.insert(record.subject_id.as_str());
            }
        }
        let neutral: Vec<f64> = report
            .per_scan
            .iter()
            .filter(|d| {
                by_scan
                    .get(d.scan_id.as_str())
                    .map(|r| {
                        r.expression == Expression::Neutral
                            && subjects.contains(r.subject_id.as_str())
                    })
                    .unwrap_or(false)
            })
            .map(|d| d.decision.critical_value)
            .collect();
        if expressive.is_empty() || neutral.is_empty() {
            return Err(Error::EmptyGroup(format!(
                "histogram groups for expression {expr}"
            )));
        }
        let pooled = expressive.iter().chain(&neutral);
        let lo = pooled.clone().cloned().fold(f64::INFINITY, f64::min);
        let hi = pooled.cloned().fold(f64::NEG_INFINITY, f64::max);
        let edges: Vec<f64> = (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect();
        pairs.push(HistogramPair {
            expression: expr,
            edges,
            count_expressive: histogram(&expressive, lo, hi, bins),
            count_neutral: histogram(&neutral, lo, hi, bins),
            mean_expressive: expressive.iter().sum::<f64>() / expressive.len() as f64,
            mean_neutral: neutral.iter().sum::<f64>() / neutral.len() as f64,
        });
    }
    Ok(HistogramSet { bins, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::ClassifierKind;
    use crate::mesh_io::Ethnicity;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn svm_params() -> LearnParams {
        LearnParams {
            classifier: ClassifierKind::Svm,
            ..LearnParams::default()
        }
    }

    fn forest_params() -> LearnParams {
        LearnParams {
            classifier: ClassifierKind::Forest,
            n_trees: 25,
            ..LearnParams::default()
        }
    }

    /// Features where gender is a clean offset on the first coordinate.
    fn separable_items(n_subjects: usize, scans_per_subject: usize, seed: u64) -> Vec<FeatureItem> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut items = Vec::new();
        for s in 0..n_subjects {
            let gender = if s % 2 == 0 { Gender::Female } else { Gender::Male };
            let offset = if gender == Gender::Female { 4.0 } else { -4.0 };
            for k in 0..scans_per_subject {
                let expr = Expression::ALL[k % 5];
                items.push(FeatureItem {
                    scan_id: format!("s{s:03}_{k}"),
                    subject_id: format!("s{s:03}"),
                    gender,
                    expression: expr,
                    values: vec![offset + rng.gen::<f64>(), rng.gen::<f64>()],
                });
            }
        }
        items
    }

    fn noise_items(n_subjects: usize, seed: u64) -> Vec<FeatureItem> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut items = Vec::new();
        for s in 0..n_subjects {
            let gender = if s % 2 == 0 { Gender::Female } else { Gender::Male };
            items.push(FeatureItem {
                scan_id: format!("n{s:03}"),
                subject_id: format!("n{s:03}"),
                gender,
                expression: Expression::Neutral,
                values: (0..8).map(|_| rng.gen::<f64>()).collect(),
            });
        }
        items
    }

    #[test]
    fn separable_subjects_classify_perfectly() {
        // Enough subjects that every training fold keeps both genders well
        // represented; tiny imbalanced folds let bootstrap noise through.
        let items = separable_items(6, 3, 1);
        for params in [svm_params(), forest_params()] {
            let report = loo_subject_cv(&items, &params, 9).unwrap();
            assert_eq!(report.rates.overall_rate, 1.0);
            assert_eq!(report.per_scan.len(), items.len());
            report.verify().unwrap();
        }
    }

    #[test]
    fn noise_features_are_chance_level() {
        let mut rates = Vec::new();
        for seed in 0..10u64 {
            let items = noise_items(40, 1000 + seed);
            let report = loo_subject_cv(&items, &svm_params(), seed).unwrap();
            rates.push(report.rates.overall_rate);
        }
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        assert!((mean - 0.5).abs() < 0.12, "mean rate {mean}");
    }

    #[test]
    fn audit_excludes_test_subject() {
        let items = separable_items(6, 3, 2);
        let report = loo_subject_cv(&items, &svm_params(), 5).unwrap();
        assert_eq!(report.audit.len(), 6);
        for fold in &report.audit {
            assert!(!fold.train_subjects.contains(&fold.test_subject));
            assert_eq!(fold.train_subjects.len(), 5);
        }
    }

    #[test]
    fn single_gender_training_fold_errors() {
        // Two subjects: removing either leaves a single-gender training set.
        let items = separable_items(2, 2, 3);
        assert!(matches!(
            loo_subject_cv(&items, &svm_params(), 1),
            Err(Error::SingleClassFold { .. })
        ));
    }

    #[test]
    fn reports_deterministic_across_jobs() {
        let items = separable_items(8, 3, 4);
        let a = loo_subject_cv(&items, &forest_params(), 7).unwrap();
        let b = loo_subject_cv(&items, &forest_params(), 7).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| loo_subject_cv(&items, &forest_params(), 7)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn rates_recompute_exactly() {
        let items = noise_items(12, 8);
        let report = loo_subject_cv(&items, &svm_params(), 4).unwrap();
        assert_eq!(Rates::from_decisions(&report.per_scan), report.rates);
    }

    /// Per-expression signal directions: expression e separates genders on
    /// coordinate e only, so same-expression training should beat
    /// cross-expression training.
    fn expression_specific_items(n_subjects: usize, seed: u64) -> Vec<FeatureItem> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut items = Vec::new();
        for s in 0..n_subjects {
            let gender = if s % 2 == 0 { Gender::Female } else { Gender::Male };
            let sign = if gender == Gender::Female { 1.0 } else { -1.0 };
            for (e, &expr) in Expression::ALL.iter().enumerate() {
                let mut values: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 2.0).collect();
                values[e] += sign * 2.0;
                items.push(FeatureItem {
                    scan_id: format!("e{s:03}_{expr}"),
                    subject_id: format!("e{s:03}"),
                    gender,
                    expression: expr,
                    values,
                });
            }
        }
        items
    }

    #[test]
    fn matrix_diagonal_beats_off_diagonal_on_planted_signals() {
        let items = expression_specific_items(24, 11);
        let matrix = expression_specific_matrix(&items, &svm_params(), 3).unwrap();
        assert!(
            matrix.diagonal_mean() > matrix.off_diagonal_mean(),
            "diag {} vs off-diag {}",
            matrix.diagonal_mean(),
            matrix.off_diagonal_mean()
        );
        for &expr in &Expression::ALL {
            assert_eq!(matrix.cell(expr, expr).n_test, 24);
        }
    }

    #[test]
    fn matrix_cells_equal_when_expressions_identical() {
        // Same feature vector for every expression of a subject: all 25
        // cells should agree within LOO sampling noise.
        let mut spreads = Vec::new();
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
            let mut items = Vec::new();
            for s in 0..20 {
                let gender = if s % 2 == 0 { Gender::Female } else { Gender::Male };
                let sign = if gender == Gender::Female { 1.0 } else { -1.0 };
                let values: Vec<f64> = (0..4)
                    .map(|_| sign * 1.0 + (rng.gen::<f64>() - 0.5) * 4.0)
                    .collect();
                for &expr in &Expression::ALL {
                    items.push(FeatureItem {
                        scan_id: format!("i{s:03}_{expr}"),
                        subject_id: format!("i{s:03}"),
                        gender,
                        expression: expr,
                        values: values.clone(),
                    });
                }
            }
            let matrix = expression_specific_matrix(&items, &svm_params(), seed).unwrap();
            let accs: Vec<f64> = matrix
                .cells
                .iter()
                .flat_map(|row| row.iter().map(|c| c.accuracy))
                .collect();
            let lo = accs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            spreads.push(hi - lo);
        }
        let mean_spread = spreads.iter().sum::<f64>() / spreads.len() as f64;
        assert!(mean_spread < 0.05, "mean cell spread {mean_spread}");
    }

    #[test]
    fn expression_based_runs_are_independent_loos() {
        let items = separable_items(6, 5, 21);
        let map = expression_based_eval(&items, &svm_params(), 2).unwrap();
        assert_eq!(map.len(), 5);
        for report in map.values() {
            assert_eq!(report.rates.overall_rate, 1.0);
            report.verify().unwrap();
        }
    }

    fn manifest_for(items: &[FeatureItem]) -> Vec<ScanRecord> {
        items
            .iter()
            .map(|i| ScanRecord {
                scan_id: i.scan_id.clone(),
                subject_id: i.subject_id.clone(),
                gender: i.gender,
                expression: i.expression,
                ethnicity: Ethnicity::NonAsian,
                age: 25,
                mesh_path: format!("{}.ply", i.scan_id).into(),
                landmarks_path: None,
            })
            .collect()
    }

    #[test]
    fn histogram_counts_conserve_group_sizes() {
        let items = separable_items(8, 5, 31);
        let manifest = manifest_for(&items);
        let report = loo_subject_cv(&items, &svm_params(), 3).unwrap();
        let set = decision_histograms(&report, &manifest, DEFAULT_HISTOGRAM_BINS).unwrap();
        assert_eq!(set.pairs.len(), 4);
        for pair in &set.pairs {
            // Every subject has one scan per expression.
            let n_expr: usize = pair.count_expressive.iter().sum();
            let n_neutral: usize = pair.count_neutral.iter().sum();
            assert_eq!(n_expr, 8);
            assert_eq!(n_neutral, 8);
            assert_eq!(pair.edges.len(), DEFAULT_HISTOGRAM_BINS + 1);
        }
    }

    #[test]
    fn equal_critical_values_occupy_one_bin() {
        let items = separable_items(4, 5, 41);
        let manifest = manifest_for(&items);
        let mut report = loo_subject_cv(&items, &svm_params(), 3).unwrap();
        for d in &mut report.per_scan {
            d.decision.critical_value = 1.5;
        }
        report.rates = Rates::from_decisions(&report.per_scan);
        let set = decision_histograms(&report, &manifest, 20).unwrap();
        for pair in &set.pairs {
            assert_eq!(pair.count_expressive.iter().filter(|&&c| c > 0).count(), 1);
            assert_eq!(pair.count_neutral.iter().filter(|&&c| c > 0).count(), 1);
        }
    }

    #[test]
    fn female_shifted_expression_raises_histogram_mean() {
        // One expression pushes everyone's features toward Female
        // statistics; its expressive histogram mean critical value should
        // exceed the neutral one under the SVM sign convention.
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let mut items = Vec::new();
        for s in 0..16 {
            let gender = if s % 2 == 0 { Gender::Female } else { Gender::Male };
            let sign = if gender == Gender::Female { 1.0 } else { -1.0 };
            for &expr in &[Expression::Neutral, Expression::Happy] {
                let shift = if expr == Expression::Happy { 1.5 } else { 0.0 };
                items.push(FeatureItem {
                    scan_id: format!("h{s:03}_{expr}"),
                    subject_id: format!("h{s:03}"),
                    gender,
                    expression: expr,
                    values: vec![
                        sign * 1.0 + shift + rng.gen::<f64>() * 0.2,
                        rng.gen::<f64>(),
                    ],
                });
            }
        }
        let manifest = manifest_for(&items);
        let report = loo_subject_cv(&items, &svm_params(), 8).unwrap();
        let set = decision_histograms(&report, &manifest, 20);
        // Only Happy is present among non-neutral expressions, so the other
        // groups are empty.
        assert!(matches!(set, Err(Error::EmptyGroup(_))));
        // Restrict to the Happy pair directly.
        let happy: Vec<f64> = report
            .per_scan
            .iter()
            .filter(|d| d.scan_id.contains("Happy"))
            .map(|d| d.decision.critical_value)
            .collect();
        let neutral: Vec<f64> = report
            .per_scan
            .iter()
            .filter(|d| d.scan_id.contains("Neutral"))
            .map(|d| d.decision.critical_value)
            .collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&happy) > mean(&neutral));
    }
}
