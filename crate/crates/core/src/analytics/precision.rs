use super::distance::squared_distance;
use super::{AnalyticsError, ClusterModel, FeatureMatrix};

/// Number of largest clusters a precision report covers.
pub const TOP_CLUSTERS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPrecision {
    pub cluster_index: usize,
    pub member_count: usize,
    pub d_value: f64,
}

/// Largest clusters first; equal sizes by cluster index.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionReport {
    pub rows: Vec<ClusterPrecision>,
}

/// Mean pairwise distance among `members`, divided by `sqrt(dims)`.
pub fn cluster_d(eval: &FeatureMatrix, members: &[usize]) -> Result<f64, AnalyticsError> {
    if members.len() < 2 {
        return Err(AnalyticsError::ClusterTooSmall(members.len()));
    }
    let mut sum = 0.0;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            sum += squared_distance(&eval.rows[i], &eval.rows[j]).sqrt();
        }
    }
    let pairs = (members.len() * (members.len() - 1) / 2) as f64;
    Ok(sum / pairs / (eval.dims().max(1) as f64).sqrt())
}

/// Score the clustering in `assignments` within `eval`, which may have more
/// features than the space the clusters were found in.
pub fn precision_of(
    assignments: &[usize],
    k: usize,
    eval: &FeatureMatrix,
) -> Result<PrecisionReport, AnalyticsError> {
    if assignments.len() != eval.n() {
        return Err(AnalyticsError::RowMismatch {
            expected: assignments.len(),
            actual: eval.n(),
        });
    }
    let mut members = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        members[a].push(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&j| (std::cmp::Reverse(members[j].len()), j));
    let rows = order
        .into_iter()
        .take(TOP_CLUSTERS)
        .map(|j| {
            Ok(ClusterPrecision {
                cluster_index: j,
                member_count: members[j].len(),
                d_value: cluster_d(eval, &members[j])?,
            })
        })
        .collect::<Result<_, AnalyticsError>>()?;
    Ok(PrecisionReport { rows })
}

pub fn cluster_precision(
    model: &ClusterModel,
    eval: &FeatureMatrix,
) -> Result<PrecisionReport, AnalyticsError> {
    precision_of(&model.assignments, model.k, eval)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn identical_points_score_zero() {
        let m = matrix(&[&[0.3, 0.3], &[0.3, 0.3], &[0.3, 0.3]]);
        assert_eq!(cluster_d(&m, &[0, 1, 2]).unwrap(), 0.0);
    }

    #[test]
    fn unit_diagonal() {
        let m = matrix(&[&[0.0, 0.0], &[1.0, 1.0]]);
        assert!((cluster_d(&m, &[0, 1]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn top_four_by_size() {
        let m = matrix(&[
            &[0.0],
            &[0.1],
            &[0.2],
            &[0.5],
            &[0.6],
            &[0.9],
            &[1.0],
            &[0.7],
            &[0.8],
            &[0.4],
            &[0.3],
        ]);
        // sizes: c0=6, c1=2, c2=2, c3=1; c3 lands in the top four.
        let a = [0, 0, 0, 1, 1, 2, 2, 3, 0, 0, 0];
        let err = precision_of(&a, 4, &m).unwrap_err();
        assert!(matches!(err, AnalyticsError::ClusterTooSmall(1)));
        let a = [0, 0, 0, 1, 1, 2, 2, 3, 4, 4, 3];
        let r = precision_of(&a, 5, &m).unwrap();
        let order: Vec<_> = r
            .rows
            .iter()
            .map(|c| (c.cluster_index, c.member_count))
            .collect();
        // c1..c4 all have two members; the lowest indices win.
        assert_eq!(order, [(0, 3), (1, 2), (2, 2), (3, 2)]);
    }

    #[test]
    fn row_mismatch() {
        let m = matrix(&[&[0.0], &[1.0]]);
        assert!(matches!(
            precision_of(&[0], 1, &m),
            Err(AnalyticsError::RowMismatch { .. })
        ));
    }
}
