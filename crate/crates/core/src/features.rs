//! Expression-difference features and 2D landmark baseline features.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;

use crate::curves::{FeatureKind, FeatureVector};
use crate::error::{Error, Result};
use crate::mesh_io::{Expression, Landmarks68, ScanRecord};

/// A subject's neutral scan paired with one of their expressive scans.
#[derive(Debug, Clone)]
pub struct SubjectPair {
    pub neutral: (ScanRecord, FeatureVector),
    pub expressive: (ScanRecord, FeatureVector),
}

impl SubjectPair {
    pub fn new(
        neutral: (ScanRecord, FeatureVector),
        expressive: (ScanRecord, FeatureVector),
    ) -> Result<Self> {
        if neutral.0.subject_id != expressive.0.subject_id {
            return Err(Error::SubjectMismatch(
                neutral.0.subject_id,
                expressive.0.subject_id,
            ));
        }
        if neutral.0.expression != Expression::Neutral
            || expressive.0.expression == Expression::Neutral
        {
            return Err(Error::Invariant(
                "pair must be (neutral, non-neutral) for one subject".into(),
            ));
        }
        if neutral.1.kind != expressive.1.kind {
            return Err(Error::KindMismatch(
                neutral.1.kind.to_string(),
                expressive.1.kind.to_string(),
            ));
        }
        if neutral.1.len() != expressive.1.len() {
            return Err(Error::DimensionMismatch {
                expected: neutral.1.len(),
                got: expressive.1.len(),
            });
        }
        Ok(SubjectPair {
            neutral,
            expressive,
        })
    }
}

/// Element-wise expressive − neutral difference; the feature kind moves to
/// its delta counterpart.
pub fn expression_delta(pair: &SubjectPair) -> Result<FeatureVector> {
    let values: Vec<f64> = pair
        .expressive
        .1
        .values
        .iter()
        .zip(&pair.neutral.1.values)
        .map(|(e, n)| e - n)
        .collect();
    FeatureVector::new(values, pair.neutral.1.kind.delta_kind())
}

/// Nosetip-aligned landmark coordinates, flattened (x0,y0,…,x67,y67).
pub fn landmark_coord_features(lm: &Landmarks68) -> Result<FeatureVector> {
    let nose = lm.points[lm.nosetip_index];
    let mut values = Vec::with_capacity(lm.points.len() * 2);
    for p in &lm.points {
        values.push(p[0] - nose[0]);
        values.push(p[1] - nose[1]);
    }
    FeatureVector::new(values, FeatureKind::Coord136)
}

/// Euclidean distances over all unordered landmark pairs (i < j),
/// lexicographic order; 68·67/2 = 2278 values.
pub fn landmark_distance_features(lm: &Landmarks68) -> Result<FeatureVector> {
    let values = pairwise_distances(&lm.points);
    FeatureVector::new(values, FeatureKind::Dist2278)
}

pub(crate) fn pairwise_distances(points: &[[f64; 2]]) -> Vec<f64> {
    let n = points.len();
    let mut values = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            values.push((dx * dx + dy * dy).sqrt());
        }
    }
    values
}

/// Pair each subject's non-neutral scans with that subject's unique neutral
/// scan. Subjects without a neutral scan are skipped with a warning. Input
/// order of the expressive scans is preserved.
pub fn build_subject_pairs(
    scans: &[(ScanRecord, FeatureVector)],
) -> Result<Vec<SubjectPair>> {
    let mut neutral_by_subject: BTreeMap<&str, &(ScanRecord, FeatureVector)> = BTreeMap::new();
    for item in scans {
        if item.0.expression == Expression::Neutral {
            neutral_by_subject.insert(item.0.subject_id.as_str(), item);
        }
    }
    let mut pairs = Vec::new();
    let mut warned: std::collections::BTreeSet<&str> = Default::default();
    for item in scans {
        if item.0.expression == Expression::Neutral {
            continue;
        }
        match neutral_by_subject.get(item.0.subject_id.as_str()) {
            Some(neutral) => {
                pairs.push(SubjectPair::new((*neutral).clone(), item.clone())?);
            }
            None => {
                if warned.insert(item.0.subject_id.as_str()) {
                    warn!(
                        "subject {} has no neutral scan; excluded from delta features",
                        item.0.subject_id
                    );
                }
            }
        }
    }
    Ok(pairs)
}

/// Write feature rows as CSV: `scan_id` followed by values in index order,
/// shortest round-trip decimal.
pub fn write_feature_csv(path: &Path, rows: &[(String, &[f64])]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (scan_id, values) in rows {
        let mut line = String::with_capacity(values.len() * 12);
        line.push_str(scan_id);
        for v in *values {
            line.push(',');
            line.push_str(&format!("{v}"));
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let scan_id = fields
            .next()
            .ok_or_else(|| Error::parse(path, i + 1, "empty row"))?
            .to_string();
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad value {f:?}")))
            })
            .collect::<Result<_>>()?;
        rows.push((scan_id, values));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_io::{Ethnicity, Gender};
    use approx::assert_abs_diff_eq;
    use std::path::PathBuf;

    fn record(subject: &str, expression: Expression) -> ScanRecord {
        ScanRecord {
            scan_id: format!("{subject}_{expression}"),
            subject_id: subject.to_string(),
            gender: Gender::Female,
            expression,
            ethnicity: Ethnicity::Asian,
            age: 30,
            mesh_path: PathBuf::from("x.ply"),
            landmarks_path: None,
        }
    }

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector::new(values, FeatureKind::Depth4000).unwrap()
    }

    fn landmarks(f: impl Fn(usize) -> [f64; 2]) -> Landmarks68 {
        Landmarks68 {
            points: (0..68).map(f).collect(),
            nosetip_index: 30,
        }
    }

    #[test]
    fn delta_is_elementwise_difference() {
        let pair = SubjectPair::new(
            (record("p1", Expression::Neutral), fv(vec![1.0, 2.0, 3.0])),
            (record("p1", Expression::Happy), fv(vec![2.0, 4.0, 6.0])),
        )
        .unwrap();
        let delta = expression_delta(&pair).unwrap();
        assert_eq!(delta.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(delta.kind, FeatureKind::Delta4000);

        let self_pair = SubjectPair::new(
            (record("p1", Expression::Neutral), fv(vec![5.0, -1.0])),
            (record("p1", Expression::Sad), fv(vec![5.0, -1.0])),
        )
        .unwrap();
        assert!(expression_delta(&self_pair).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_plus_neutral_restores_expressive() {
        let neutral = fv(vec![0.25, -3.5, 10.0, 0.1]);
        let expressive = fv(vec![1.5, 2.5, -4.0, 0.1]);
        let pair = SubjectPair::new(
            (record("p2", Expression::Neutral), neutral.clone()),
            (record("p2", Expression::Disgust), expressive.clone()),
        )
        .unwrap();
        let delta = expression_delta(&pair).unwrap();
        for i in 0..neutral.len() {
            assert_eq!(delta.values[i] + neutral.values[i], expressive.values[i]);
        }
    }

    #[test]
    fn pair_rejects_mismatches() {
        assert!(matches!(
            SubjectPair::new(
                (record("p1", Expression::Neutral), fv(vec![1.0])),
                (record("p2", Expression::Happy), fv(vec![1.0])),
            ),
            Err(Error::SubjectMismatch(_, _))
        ));
        let coords =
            FeatureVector::new(vec![0.0; 136], FeatureKind::Coord136).unwrap();
        assert!(matches!(
            SubjectPair::new(
                (record("p1", Expression::Neutral), fv(vec![0.0; 136])),
                (record("p1", Expression::Happy), coords),
            ),
            Err(Error::KindMismatch(_, _))
        ));
    }

    #[test]
    fn coord_features_alignment_and_invariance() {
        let lm = landmarks(|i| [i as f64, 2.0 * i as f64]);
        let feats = landmark_coord_features(&lm).unwrap();
        assert_eq!(feats.len(), 136);
        assert_eq!(feats.values[60], 0.0);
        assert_eq!(feats.values[61], 0.0);

        let shifted = landmarks(|i| [i as f64 + 7.0, 2.0 * i as f64 - 3.0]);
        let shifted_feats = landmark_coord_features(&shifted).unwrap();
        assert_eq!(feats.values, shifted_feats.values);
    }

    #[test]
    fn distance_features_rigid_invariance() {
        let lm = landmarks(|i| [(i as f64 * 0.37).sin() * 40.0, (i as f64 * 0.71).cos() * 40.0]);
        let feats = landmark_distance_features(&lm).unwrap();
        assert_eq!(feats.len(), 2278);

        let angle = 30.0f64.to_radians();
        let rotated = landmarks(|i| {
            let p = lm.points[i];
            [
                p[0] * angle.cos() - p[1] * angle.sin() + 5.0,
                p[0] * angle.sin() + p[1] * angle.cos() - 2.0,
            ]
        });
        let rotated_feats = landmark_distance_features(&rotated).unwrap();
        for (a, b) in feats.values.iter().zip(&rotated_feats.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }

        let coincident = landmarks(|_| [3.0, 4.0]);
        let zeros = landmark_distance_features(&coincident).unwrap();
        assert!(zeros.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn small_pair_count_formula() {
        let points: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, 0.0]).collect();
        assert_eq!(pairwise_distances(&points).len(), 10);
        for l in 2..10 {
            let pts: Vec<[f64; 2]> = (0..l).map(|i| [i as f64, 1.0]).collect();
            assert_eq!(pairwise_distances(&pts).len(), l * (l - 1) / 2);
        }
    }

    #[test]
    fn pairing_skips_subjects_without_neutral() {
        let scans = vec![
            (record("p1", Expression::Neutral), fv(vec![0.0])),
            (record("p1", Expression::Happy), fv(vec![1.0])),
            (record("p1", Expression::Sad), fv(vec![2.0])),
            (record("p2", Expression::Happy), fv(vec![3.0])),
        ];
        let pairs = build_subject_pairs(&scans).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs.iter().all(|p| p.neutral.0.subject_id == "p1"));
    }

    #[test]
    fn feature_csv_round_trip() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("f.csv");
        let a = vec![0.1, -2.0, 1.0 / 3.0];
        let b = vec![5e-17, 80.0, 1.25];
        write_feature_csv(&path, &[("s1".into(), &a), ("s2".into(), &b)]).unwrap();
        let rows = read_feature_csv(&path).unwrap();
        assert_eq!(rows, vec![("s1".to_string(), a), ("s2".to_string(), b)]);
    }
}
