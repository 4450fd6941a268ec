//! Classifiers exposing their critical decision values: a linear-kernel SVM
//! (signed hyperplane distance) and a random forest (female-voting ratio).

pub mod forest;
pub mod svm;

use serde::{Deserialize, Serialize};

use crate::mesh_io::Gender;

pub use forest::{train_random_forest, ForestModel};
pub use svm::{train_linear_svm, SvmModel};

/// Classifier output. Conventions:
/// - SVM: critical value is the signed distance (w·x+b)/‖w‖; negative ⇒ Male,
///   zero ⇒ Female (documented tie-break).
/// - Forest: critical value is the female-voting ratio in [0,1]; below 0.5 ⇒
///   Male, exactly 0.5 ⇒ Female (documented tie-break).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: Gender,
    pub critical_value: f64,
}

impl Decision {
    pub fn from_svm_distance(distance: f64) -> Self {
        Decision {
            label: if distance < 0.0 { Gender::Male } else { Gender::Female },
            critical_value: distance,
        }
    }

    pub fn from_forest_ratio(ratio: f64) -> Self {
        Decision {
            label: if ratio < 0.5 { Gender::Male } else { Gender::Female },
            critical_value: ratio,
        }
    }
}

/// Which classifier an experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierKind {
    Svm,
    Forest,
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassifierKind::Svm => "SVM",
            ClassifierKind::Forest => "Forest",
        })
    }
}

/// Training hyperparameters shared by the evaluation harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnParams {
    pub classifier: ClassifierKind,
    pub svm_c: f64,
    pub svm_tol: f64,
    pub n_trees: usize,
    pub min_leaf: usize,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            classifier: ClassifierKind::Svm,
            svm_c: 1.0,
            svm_tol: 1e-6,
            n_trees: 100,
            min_leaf: 1,
        }
    }
}

/// A trained model of either kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Model {
    Svm(SvmModel),
    Forest(ForestModel),
}

impl Model {
    pub fn train(
        params: &LearnParams,
        x: &[Vec<f64>],
        y: &[Gender],
        seed: u64,
    ) -> crate::error::Result<Model> {
        match params.classifier {
            ClassifierKind::Svm => Ok(Model::Svm(train_linear_svm(
                x, y, params.svm_c, seed, params.svm_tol,
            )?)),
            ClassifierKind::Forest => Ok(Model::Forest(train_random_forest(
                x,
                y,
                params.n_trees,
                seed,
                None,
                params.min_leaf,
            )?)),
        }
    }

    pub fn decide(&self, x: &[f64]) -> crate::error::Result<Decision> {
        match self {
            Model::Svm(m) => m.decide(x),
            Model::Forest(m) => m.decide(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn svm_label_is_pure_function_of_critical_value(v in -1e3f64..1e3) {
            let d = Decision::from_svm_distance(v);
            prop_assert_eq!(d.critical_value, v);
            if v < 0.0 {
                prop_assert_eq!(d.label, Gender::Male);
            } else {
                prop_assert_eq!(d.label, Gender::Female);
            }
        }

        #[test]
        fn forest_label_is_pure_function_of_ratio(numer in 0usize..=100) {
            let r = numer as f64 / 100.0;
            let d = Decision::from_forest_ratio(r);
            if r < 0.5 {
                prop_assert_eq!(d.label, Gender::Male);
            } else {
                prop_assert_eq!(d.label, Gender::Female);
            }
        }
    }

    #[test]
    fn tie_breaks_are_female() {
        assert_eq!(Decision::from_svm_distance(0.0).label, Gender::Female);
        assert_eq!(Decision::from_forest_ratio(0.5).label, Gender::Female);
    }
}
