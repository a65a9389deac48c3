use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::svm::{train_svm, LinearSvm, SvmParams};
use super::{indicator_name, AnalyticsError, ClusterModel, FeatureMatrix};

/// Holdout accuracy an outcome model needs before it may recommend.
pub const CERTIFICATION_GATE: f64 = 0.90;
/// Share of each cluster held out from training.
pub const HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    pub cluster_index: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub holdout_accuracy: f64,
    pub certified: bool,
}

impl OutcomeModel {
    /// Uncertified until [`certify`] runs.
    pub fn new(cluster_index: usize, svm: LinearSvm) -> Self {
        Self {
            cluster_index,
            weights: svm.weights,
            bias: svm.bias,
            holdout_accuracy: 0.0,
            certified: false,
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }
}

/// Score `model` on held-out rows and apply the certification gate.
pub fn certify(
    mut model: OutcomeModel,
    x: &[Vec<f64>],
    y: &[bool],
) -> Result<OutcomeModel, AnalyticsError> {
    if x.is_empty() {
        return Err(AnalyticsError::EmptyHoldout);
    }
    if x.len() != y.len() {
        return Err(AnalyticsError::RowMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let hits = x
        .iter()
        .zip(y)
        .filter(|(xi, &yi)| (model.margin(xi) > 0.0) == yi)
        .count();
    model.holdout_accuracy = hits as f64 / x.len() as f64;
    model.certified = model.holdout_accuracy >= CERTIFICATION_GATE;
    Ok(model)
}

/// Deterministic train/holdout split of `members`: a seeded shuffle, then
/// the first `ceil(HOLDOUT_FRACTION * n)` rows are held out.
pub fn holdout_split(members: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = members.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let h = ((members.len() as f64) * HOLDOUT_FRACTION).ceil() as usize;
    let h = h.min(members.len().saturating_sub(1));
    let train = shuffled.split_off(h);
    (train, shuffled)
}

/// One SVM per cluster, trained on its members and certified on a
/// held-out share. A cluster whose training rows hold a single class, or
/// with fewer than two members, gets an uncertified zero model.
pub fn fit_outcome_models(
    m: &FeatureMatrix,
    labels: &[bool],
    clusters: &ClusterModel,
    params: &SvmParams,
) -> Result<Vec<OutcomeModel>, AnalyticsError> {
    if labels.len() != m.n() || clusters.assignments.len() != m.n() {
        return Err(AnalyticsError::RowMismatch {
            expected: m.n(),
            actual: labels.len().min(clusters.assignments.len()),
        });
    }
    let mut out = Vec::with_capacity(clusters.k);
    for (j, members) in clusters.members().into_iter().enumerate() {
        let cluster_seed = params.seed.wrapping_add(j as u64);
        let (train, hold) = holdout_split(&members, cluster_seed);
        let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
            (
                idx.iter().map(|&i| m.rows[i].clone()).collect(),
                idx.iter().map(|&i| labels[i]).collect(),
            )
        };
        let (tx, ty) = pick(&train);
        let (hx, hy) = pick(&hold);
        let svm_params = SvmParams {
            seed: cluster_seed,
            ..*params
        };
        let model = match train_svm(&tx, &ty, &svm_params) {
            Ok(svm) => certify(OutcomeModel::new(j, svm), &hx, &hy)?,
            // Also covers an empty training share.
            Err(AnalyticsError::SingleClass) => OutcomeModel::new(
                j,
                LinearSvm {
                    weights: vec![0.0; m.dims()],
                    bias: 0.0,
                },
            ),
            Err(e) => return Err(e),
        };
        out.push(model);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub patient_row_index: Option<usize>,
    pub cluster_index: usize,
    pub recommended_medication: String,
    pub score: f64,
}

/// Pick the candidate value of `medication` with the largest positive-outcome
/// margin under the patient's cluster model. Ties keep the earliest
/// candidate.
pub fn recommend(
    patient: &[f64],
    clusters: &ClusterModel,
    models: &[OutcomeModel],
    feature_names: &[String],
    medication: &str,
    candidates: &[&str],
) -> Result<Recommendation, AnalyticsError> {
    if candidates.is_empty() {
        return Err(AnalyticsError::NoCandidates);
    }
    if patient.len() != feature_names.len() {
        return Err(AnalyticsError::DimensionMismatch(
            feature_names.len(),
            patient.len(),
        ));
    }
    let (cluster, _) = clusters.nearest(patient)?;
    let model = models
        .iter()
        .find(|m| m.cluster_index == cluster)
        .filter(|m| m.certified)
        .ok_or(AnalyticsError::ModelNotCertified(cluster))?;
    if model.weights.len() != patient.len() {
        return Err(AnalyticsError::DimensionMismatch(
            model.weights.len(),
            patient.len(),
        ));
    }

    let prefix = format!("{medication}=");
    let indicator_cols: Vec<usize> = feature_names
        .iter()
        .enumerate()
        .filter(|(_, n)| n.starts_with(&prefix))
        .map(|(i, _)| i)
        .collect();
    if indicator_cols.is_empty() {
        return Err(AnalyticsError::UnknownColumn(medication.to_owned()));
    }

    let mut best: Option<(f64, &str)> = None;
    let mut x = patient.to_vec();
    for &cand in candidates {
        for &i in &indicator_cols {
            x[i] = 0.0;
        }
        let name = indicator_name(medication, cand);
        if let Some(i) = indicator_cols
            .iter()
            .copied()
            .find(|&i| feature_names[i] == name)
        {
            x[i] = 1.0;
        }
        let score = model.margin(&x);
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, cand));
        }
    }
    let (score, med) = best.expect("candidates is non-empty");
    Ok(Recommendation {
        patient_row_index: None,
        cluster_index: cluster,
        recommended_medication: med.to_owned(),
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::svm::toy;
    use proptest::prelude::*;

    fn model(weights: Vec<f64>, bias: f64) -> OutcomeModel {
        OutcomeModel {
            cluster_index: 0,
            weights,
            bias,
            holdout_accuracy: 1.0,
            certified: true,
        }
    }

    fn one_cluster(dims: usize) -> ClusterModel {
        ClusterModel {
            k: 1,
            centroids: vec![vec![0.0; dims]],
            assignments: vec![],
            inertia: 0.0,
            seed: 0,
            iterations_run: 0,
            inertia_history: vec![],
        }
    }

    fn names() -> Vec<String> {
        ["age", "insulin=Down", "insulin=Steady", "insulin=Up"]
            .map(String::from)
            .to_vec()
    }

    #[test]
    fn gate_boundaries() {
        let m = OutcomeModel::new(
            0,
            LinearSvm {
                weights: vec![1.0],
                bias: -0.5,
            },
        );
        // 9 of 10 right is exactly the gate.
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![if i < 5 { 1.0 } else { 0.0 }])
            .collect();
        let mut y: Vec<bool> = (0..10).map(|i| i < 5).collect();
        y[9] = true;
        let c = certify(m.clone(), &x, &y).unwrap();
        assert_eq!(c.holdout_accuracy, 0.9);
        assert!(c.certified);
        // 89 of 100 right falls short.
        let x: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![if i < 50 { 1.0 } else { 0.0 }])
            .collect();
        let y: Vec<bool> = (0..100).map(|i| (i < 50) != (i >= 89)).collect();
        let c = certify(m.clone(), &x, &y).unwrap();
        assert_eq!(c.holdout_accuracy, 0.89);
        assert!(!c.certified);
        assert!(matches!(
            certify(m, &[], &[]),
            Err(AnalyticsError::EmptyHoldout)
        ));
    }

    #[test]
    fn toy_set_certifies() {
        let (x, y) = toy::separable(42, 0.5);
        let (hx, hy) = toy::separable(43, 0.5);
        let svm = train_svm(&x, &y, &SvmParams::new(42)).unwrap();
        let c = certify(OutcomeModel::new(0, svm), &hx, &hy).unwrap();
        assert!(c.holdout_accuracy >= 0.9);
        assert!(c.certified);
    }

    #[test]
    fn single_candidate_wins() {
        let r = recommend(
            &[0.3, 0.0, 1.0, 0.0],
            &one_cluster(4),
            &[model(vec![0.0; 4], 1.0)],
            &names(),
            "insulin",
            &["Up"],
        )
        .unwrap();
        assert_eq!(r.recommended_medication, "Up");
    }

    #[test]
    fn linear_score_decides() {
        let m = model(vec![0.0, -1.0, 0.0, 1.0], 0.0);
        let r = recommend(
            &[0.3, 1.0, 0.0, 0.0],
            &one_cluster(4),
            &[m],
            &names(),
            "insulin",
            &["Down", "Up"],
        )
        .unwrap();
        assert_eq!(r.recommended_medication, "Up");
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn ties_keep_first() {
        let m = model(vec![0.0; 4], 0.5);
        let r = recommend(
            &[0.3, 1.0, 0.0, 0.0],
            &one_cluster(4),
            &[m],
            &names(),
            "insulin",
            &["Steady", "Up"],
        )
        .unwrap();
        assert_eq!(r.recommended_medication, "Steady");
    }

    #[test]
    fn refuses_uncertified_or_empty() {
        let mut m = model(vec![0.0; 4], 0.0);
        let p = [0.3, 1.0, 0.0, 0.0];
        assert!(matches!(
            recommend(&p, &one_cluster(4), &[m.clone()], &names(), "insulin", &[]),
            Err(AnalyticsError::NoCandidates)
        ));
        m.certified = false;
        assert!(matches!(
            recommend(&p, &one_cluster(4), &[m], &names(), "insulin", &["Up"]),
            Err(AnalyticsError::ModelNotCertified(0))
        ));
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let members: Vec<usize> = (100..137).collect();
        let (t, h) = holdout_split(&members, 5);
        assert_eq!(h.len(), 8);
        assert_eq!(t.len() + h.len(), members.len());
        assert!(h.iter().all(|i| !t.contains(i)));
        assert_eq!(holdout_split(&members, 5), (t, h));
    }

    proptest! {
        #[test]
        fn rescaling_keeps_argmax(
            w in prop::collection::vec(-3.0f64..3.0, 4),
            b in -1.0f64..1.0,
            scale in 0.01f64..100.0,
        ) {
            let p = [0.5, 0.0, 0.0, 1.0];
            let cands = ["Down", "Steady", "Up"];
            let a = recommend(&p, &one_cluster(4), &[model(w.clone(), b)], &names(), "insulin", &cands).unwrap();
            let ws: Vec<f64> = w.iter().map(|v| v * scale).collect();
            let s = recommend(&p, &one_cluster(4), &[model(ws, b * scale)], &names(), "insulin", &cands).unwrap();
            prop_assert_eq!(a.recommended_medication, s.recommended_medication);
        }
    }
}
