//! Statistical analysis: Welch two-sample t-tests, per-cell saliency maps
//! over the feature grid, PCA explained-variance spectra and demographic
//! balance checks.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh_io::{Ethnicity, Expression, Gender, ScanRecord};

/// Standard significance levels used for saliency masks.
pub const DEFAULT_ALPHAS: [f64; 3] = [0.01, 0.05, 0.10];

fn mean_and_var(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test, two-tailed. Returns (t, p) where t is
/// signed as mean(a) − mean(b), so swapping the samples negates t and leaves
/// p unchanged.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            got: a.len().min(b.len()),
        });
    }
    let (ma, va) = mean_and_var(a);
    let (mb, vb) = mean_and_var(b);
    if va <= 0.0 && vb <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let se2 = va / na + vb / nb;
    let t = (ma - mb) / se2.sqrt();
    // Welch–Satterthwaite degrees of freedom.
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let p = student_t_two_tailed_p(t, df);
    Ok((t, p))
}

/// Two-tailed tail probability of Student's t with `df` degrees of freedom,
/// via the regularized incomplete beta function.
pub fn student_t_two_tailed_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    reg_inc_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// ln Γ(x), Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta function I_x(a, b) by continued fraction.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta (modified Lentz method).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Per-cell significance of the gender mean difference on delta features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMap {
    pub n_curves: usize,
    pub n_points: usize,
    /// Row-major like the depth grid; t signed as female − male.
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub alphas: Vec<f64>,
    /// `masks[a][cell]` = p_values\[cell\] < alphas\[a\].
    pub masks: Vec<Vec<bool>>,
}

impl SignificanceMap {
    pub fn mask(&self, alpha: f64) -> Result<&[bool]> {
        self.alphas
            .iter()
            .position(|&a| (a - alpha).abs() < 1e-12)
            .map(|i| self.masks[i].as_slice())
            .ok_or(Error::UnknownAlpha(alpha))
    }

    pub fn mask_density(&self, alpha: f64) -> Result<f64> {
        let mask = self.mask(alpha)?;
        Ok(mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64)
    }
}

/// Welch t-test per grid cell between female and male feature values.
/// Degenerate cells (constant in both groups) get t = 0, p = 1 and a logged
/// warning.
pub fn saliency_map(
    features: &[(Gender, &[f64])],
    n_curves: usize,
    n_points: usize,
    alphas: &[f64],
) -> Result<SignificanceMap> {
    let n_cells = n_curves * n_points;
    let females: Vec<&[f64]> = features
        .iter()
        .filter(|(g, _)| *g == Gender::Female)
        .map(|(_, v)| *v)
        .collect();
    let males: Vec<&[f64]> = features
        .iter()
        .filter(|(g, _)| *g == Gender::Male)
        .map(|(_, v)| *v)
        .collect();
    if females.len() < 2 || males.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            got: females.len().min(males.len()),
        });
    }
    for (_, row) in features {
        if row.len() != n_cells {
            return Err(Error::DimensionMismatch {
                expected: n_cells,
                got: row.len(),
            });
        }
    }
    let mut t_values = Vec::with_capacity(n_cells);
    let mut p_values = Vec::with_capacity(n_cells);
    let mut degenerate = 0usize;
    for cell in 0..n_cells {
        let a: Vec<f64> = females.iter().map(|r| r[cell]).collect();
        let b: Vec<f64> = males.iter().map(|r| r[cell]).collect();
        match welch_t_test(&a, &b) {
            Ok((t, p)) => {
                t_values.push(t);
                p_values.push(p);
            }
            Err(Error::DegenerateVariance) => {
                degenerate += 1;
                t_values.push(0.0);
                p_values.push(1.0);
            }
            Err(e) => return Err(e),
        }
    }
    if degenerate > 0 {
        warn!("saliency map: {degenerate} degenerate cells set to p = 1");
    }
    let masks: Vec<Vec<bool>> = alphas
        .iter()
        .map(|&alpha| p_values.iter().map(|&p| p < alpha).collect())
        .collect();
    Ok(SignificanceMap {
        n_curves,
        n_points,
        t_values,
        p_values,
        alphas: alphas.to_vec(),
        masks,
    })
}

/// Sorted eigenvalue fractions of the feature covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSpectrum {
    pub ratios: Vec<f64>,
    pub gender: Option<Gender>,
    pub expression: Option<Expression>,
}

/// Explained-variance ratios of the column-centered covariance of `x`
/// (rows = samples), truncated at rank min(n−1, d). Uses the Gram matrix
/// when n ≤ d, the direct d×d covariance otherwise.
pub fn pca_explained_variance(x: &[Vec<f64>]) -> Result<VarianceSpectrum> {
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    let d = x[0].len();
    let eigenvalues = if n <= d {
        pca_eigenvalues_gram(x)?
    } else {
        pca_eigenvalues_direct(x)?
    };
    ratios_from_eigenvalues(eigenvalues, n, d)
}

fn centered(x: &[Vec<f64>]) -> DMatrix<f64> {
    let n = x.len();
    let d = x[0].len();
    let mut m = DMatrix::from_fn(n, d, |i, j| x[i][j]);
    for j in 0..d {
        let mean = m.column(j).sum() / n as f64;
        for i in 0..n {
            m[(i, j)] -= mean;
        }
    }
    m
}

/// Nonzero covariance eigenvalues via the n×n Gram matrix Xc·Xcᵀ/(n−1).
pub fn pca_eigenvalues_gram(x: &[Vec<f64>]) -> Result<Vec<f64>> {
    let xc = centered(x);
    let n = x.len() as f64;
    let gram = &xc * xc.transpose() / (n - 1.0);
    Ok(gram.symmetric_eigen().eigenvalues.iter().cloned().collect())
}

/// Covariance eigenvalues via the direct d×d eigendecomposition.
pub fn pca_eigenvalues_direct(x: &[Vec<f64>]) -> Result<Vec<f64>> {
    let xc = centered(x);
    let n = x.len() as f64;
    let cov = xc.transpose() * &xc / (n - 1.0);
    Ok(cov.symmetric_eigen().eigenvalues.iter().cloned().collect())
}

fn ratios_from_eigenvalues(mut eigenvalues: Vec<f64>, n: usize, d: usize) -> Result<VarianceSpectrum> {
    for v in &mut eigenvalues {
        if *v < 0.0 {
            *v = 0.0; // numerical negatives from the eigensolver
        }
    }
    let trace: f64 = eigenvalues.iter().sum();
    if trace <= 1e-18 {
        return Err(Error::DegenerateData("zero total variance".into()));
    }
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eigenvalues.truncate((n - 1).min(d));
    let ratios: Vec<f64> = eigenvalues.iter().map(|&v| v / trace).collect();
    Ok(VarianceSpectrum {
        ratios,
        gender: None,
        expression: None,
    })
}

/// Demographic balance report: Welch t-tests of age and 0/1-coded ethnicity
/// between genders, computed over unique subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub n_female_subjects: usize,
    pub n_male_subjects: usize,
    pub age_t: f64,
    pub age_p: f64,
    pub ethnicity_t: f64,
    pub ethnicity_p: f64,
}

pub fn demographic_balance(manifest: &[ScanRecord]) -> Result<BalanceReport> {
    let mut seen: std::collections::BTreeSet<&str> = Default::default();
    let mut age = (Vec::new(), Vec::new());
    let mut eth = (Vec::new(), Vec::new());
    for record in manifest {
        if !seen.insert(record.subject_id.as_str()) {
            continue;
        }
        let (ages, eths) = match record.gender {
            Gender::Female => (&mut age.0, &mut eth.0),
            Gender::Male => (&mut age.1, &mut eth.1),
        };
        ages.push(record.age as f64);
        eths.push(if record.ethnicity == Ethnicity::Asian { 1.0 } else { 0.0 });
    }
    if age.0.len() < 2 || age.1.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            got: age.0.len().min(age.1.len()),
        });
    }
    let lenient = |r: Result<(f64, f64)>, what: &str| match r {
        Ok(tp) => Ok(tp),
        Err(Error::DegenerateVariance) => {
            warn!("demographic balance: {what} has zero variance in both groups; p = 1");
            Ok((0.0, 1.0))
        }
        Err(e) => Err(e),
    };
    let (age_t, age_p) = lenient(welch_t_test(&age.0, &age.1), "age")?;
    let (ethnicity_t, ethnicity_p) = lenient(welch_t_test(&eth.0, &eth.1), "ethnicity")?;
    Ok(BalanceReport {
        n_female_subjects: age.0.len(),
        n_male_subjects: age.1.len(),
        age_t,
        age_p,
        ethnicity_t,
        ethnicity_p,
    })
}
