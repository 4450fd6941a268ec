//! Linear-kernel SVM trained by dual coordinate descent on the L1-hinge
//! objective ½‖w‖² + C·Σ hinge(yᵢ(w·xᵢ+b)). The bias is handled as an
//! augmented constant-1 feature, so it is (mildly) regularized; the duality
//! gap is tracked on the augmented problem and training stops when
//! gap ≤ tol·max(1, primal).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Decision;
use crate::error::{Error, Result};
use crate::mesh_io::Gender;

const MAX_EPOCHS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmTrainingMeta {
    pub n_samples: usize,
    pub seed: u64,
    pub iterations: usize,
    pub final_objective: f64,
    pub duality_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub training_meta: SvmTrainingMeta,
}

fn label_sign(g: Gender) -> f64 {
    match g {
        Gender::Female => 1.0,
        Gender::Male => -1.0,
    }
}

fn check_training_input(x: &[Vec<f64>], y: &[Gender]) -> Result<usize> {
    if x.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: x.len() });
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("NaN in training features".into()));
        }
    }
    if y.iter().all(|&g| g == y[0]) {
        return Err(Error::SingleClass);
    }
    Ok(d)
}

/// Train on rows `x` with gender labels `y` (Female = +1, Male = −1).
/// Deterministic given (x, y, c, seed).
pub fn train_linear_svm(
    x: &[Vec<f64>],
    y: &[Gender],
    c: f64,
    seed: u64,
    tol: f64,
) -> Result<SvmModel> {
    let d = check_training_input(x, y)?;
    let n = x.len();
    let signs: Vec<f64> = y.iter().map(|&g| label_sign(g)).collect();

    // Coordinate descent runs on the augmented Gram matrix (bias folded in
    // as a constant-1 feature), so one update costs O(n) instead of O(d).
    let gram: Vec<Vec<f64>> = x
        .iter()
        .map(|xi| x.iter().map(|xj| dot(xi, xj) + 1.0).collect())
        .collect();

    let mut alpha = vec![0.0f64; n];
    // margins[j] = Σ_i α_i s_i Q̃_ij, the augmented decision value for row j.
    let mut margins = vec![0.0f64; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut epochs = 0usize;
    let mut gap = f64::INFINITY;
    let mut primal = f64::INFINITY;
    for epoch in 0..MAX_EPOCHS {
        epochs = epoch + 1;
        order.shuffle(&mut rng);
        for &i in &order {
            let yi = signs[i];
            let grad = yi * margins[i] - 1.0;
            let old = alpha[i];
            let new = (old - grad / gram[i][i]).clamp(0.0, c);
            let delta = new - old;
            if delta != 0.0 {
                alpha[i] = new;
                let step = delta * yi;
                for (m, q) in margins.iter_mut().zip(&gram[i]) {
                    *m += step * q;
                }
            }
        }
        // Refresh margins from scratch periodically to cap incremental
        // floating-point drift.
        if epoch % 64 == 63 {
            for j in 0..n {
                margins[j] = (0..n).map(|i| alpha[i] * signs[i] * gram[i][j]).sum();
            }
        }
        let w_sq: f64 = (0..n).map(|i| alpha[i] * signs[i] * margins[i]).sum();
        let hinge: f64 = margins
            .iter()
            .zip(&signs)
            .map(|(m, yi)| (1.0 - yi * m).max(0.0))
            .sum();
        primal = 0.5 * w_sq + c * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * w_sq;
        gap = primal - dual;
        if gap <= tol * primal.abs().max(1.0) {
            break;
        }
    }

    // Recover the explicit primal weights from the dual solution.
    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    for i in 0..n {
        if alpha[i] != 0.0 {
            let step = alpha[i] * signs[i];
            axpy(&mut w, step, &x[i]);
            b += step;
        }
    }

    Ok(SvmModel {
        weights: w,
        bias: b,
        c,
        training_meta: SvmTrainingMeta {
            n_samples: n,
            seed,
            iterations: epochs,
            final_objective: primal,
            duality_gap: gap,
        },
    })
}

impl SvmModel {
    /// Primal objective of this model on a training set.
    pub fn objective(&self, x: &[Vec<f64>], y: &[Gender]) -> f64 {
        let w_sq = dot(&self.weights, &self.weights) + self.bias * self.bias;
        let hinge: f64 = x
            .iter()
            .zip(y)
            .map(|(row, &g)| {
                (1.0 - label_sign(g) * (dot(&self.weights, row) + self.bias)).max(0.0)
            })
            .sum();
        0.5 * w_sq + self.c * hinge
    }

    /// Signed distance to the hyperplane, (w·x+b)/‖w‖; negative ⇒ Male.
    pub fn decide(&self, x: &[f64]) -> Result<Decision> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        let raw = dot(&self.weights, x) + self.bias;
        let norm = dot(&self.weights, &self.weights).sqrt();
        let distance = if norm > 0.0 { raw / norm } else { 0.0 };
        Ok(Decision::from_svm_distance(distance))
    }
}

/// Dot product with four independent accumulators so the compiler can keep
/// the reduction pipelined/vectorized; the summation order is fixed, so the
/// result is still deterministic.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(acc: &mut [f64], scale: f64, v: &[f64]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += scale * x;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(n_per_class: usize, gap: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Gender>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n_per_class {
            x.push(vec![gap + rng.gen::<f64>(), rng.gen::<f64>()]);
            y.push(Gender::Female);
            x.push(vec![-gap - rng.gen::<f64>(), rng.gen::<f64>()]);
            y.push(Gender::Male);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_train_to_full_accuracy() {
        let (x, y) = blobs(30, 1.0, 5);
        let model = train_linear_svm(&x, &y, 1.0, 0, 1e-6).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(row, &g)| model.decide(row).unwrap().label == g)
            .count();
        assert_eq!(correct, x.len());
    }

    #[test]
    fn symmetric_four_point_instance() {
        // {(−1,0),(−2,0)} Male and {(1,0),(2,0)} Female with large C:
        // boundary x = 0, equal margins at the inner points.
        let x = vec![
            vec![-1.0, 0.0],
            vec![-2.0, 0.0],
            vec![1.0, 0.0],
            vec![2.0, 0.0],
        ];
        let y = vec![Gender::Male, Gender::Male, Gender::Female, Gender::Female];
        let model = train_linear_svm(&x, &y, 1e4, 1, 1e-9).unwrap();
        let boundary = -model.bias / model.weights[0];
        assert!(boundary.abs() < 1e-3, "boundary at {boundary}");
        let inner_neg = (model.weights[0] * -1.0 + model.bias).abs();
        let inner_pos = (model.weights[0] * 1.0 + model.bias).abs();
        assert!((inner_neg - inner_pos).abs() < 1e-3);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let (x, y) = blobs(25, 0.2, 9);
        let a = train_linear_svm(&x, &y, 1.0, 42, 1e-8).unwrap();
        let b = train_linear_svm(&x, &y, 1.0, 42, 1e-8).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }

    #[test]
    fn objective_never_worse_than_trivial_model() {
        for seed in 0..5u64 {
            let (x, y) = blobs(20, 0.05, seed);
            let model = train_linear_svm(&x, &y, 1.0, seed, 1e-6).unwrap();
            let trivial = 1.0 * x.len() as f64; // w = 0, b = 0 → C·n
            assert!(model.objective(&x, &y) <= trivial + 1e-9);
        }
    }

    #[test]
    fn decide_conventions() {
        let model = SvmModel {
            weights: vec![1.0, 0.0],
            bias: 0.0,
            c: 1.0,
            training_meta: SvmTrainingMeta {
                n_samples: 0,
                seed: 0,
                iterations: 0,
                final_objective: 0.0,
                duality_gap: 0.0,
            },
        };
        let d = model.decide(&[-3.0, 7.0]).unwrap();
        assert_eq!(d.label, Gender::Male);
        assert_eq!(d.critical_value, -3.0);

        let zero = model.decide(&[0.0, 5.0]).unwrap();
        assert_eq!(zero.label, Gender::Female);
        assert_eq!(zero.critical_value, 0.0);

        // Scaling w and b jointly leaves the decision unchanged.
        let scaled = SvmModel {
            weights: vec![5.0, 0.0],
            bias: 0.0,
            ..model.clone()
        };
        assert_eq!(scaled.decide(&[-3.0, 7.0]).unwrap(), d);
    }

    #[test]
    fn rejects_single_class_and_dimension_mismatch() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            train_linear_svm(&x, &[Gender::Male, Gender::Male], 1.0, 0, 1e-6),
            Err(Error::SingleClass)
        ));
        let model = train_linear_svm(
            &x,
            &[Gender::Male, Gender::Female],
            1.0,
            0,
            1e-6,
        )
        .unwrap();
        assert!(matches!(
            model.decide(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn prediction_invariant_to_constant_zero_feature_column() {
        let (x, y) = blobs(20, 0.3, 13);
        let x_padded: Vec<Vec<f64>> = x
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.push(0.0);
                r
            })
            .collect();
        let base = train_linear_svm(&x, &y, 1.0, 3, 1e-9).unwrap();
        let padded = train_linear_svm(&x_padded, &y, 1.0, 3, 1e-9).unwrap();
        for (row, padded_row) in x.iter().zip(&x_padded) {
            let a = base.decide(row).unwrap();
            let b = padded.decide(padded_row).unwrap();
            assert_eq!(a.label, b.label);
            assert!((a.critical_value - b.critical_value).abs() < 1e-6);
        }
    }
}
