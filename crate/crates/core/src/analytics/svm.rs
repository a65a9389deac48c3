use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::AnalyticsError;

pub const DEFAULT_LAMBDA: f64 = 1e-3;
pub const DEFAULT_EPOCHS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl SvmParams {
    pub fn new(seed: u64) -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            epochs: DEFAULT_EPOCHS,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    /// Signed distance-like score; positive means the positive class.
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.margin(x) > 0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sign(label: bool) -> f64 {
    if label {
        1.0
    } else {
        -1.0
    }
}

/// `lambda/2 * |w|^2 + mean(max(0, 1 - y (w.x + b)))`, bias unregularized.
pub fn objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[bool], lambda: f64) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - sign(yi) * (dot(w, xi) + b)).max(0.0))
        .sum();
    0.5 * lambda * dot(w, w) + hinge / x.len() as f64
}

/// Sub-gradient of [`objective`] with respect to `(w, b)`. Points exactly on
/// the margin contribute nothing.
pub fn objective_gradient(
    w: &[f64],
    b: f64,
    x: &[Vec<f64>],
    y: &[bool],
    lambda: f64,
) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut gw: Vec<f64> = w.iter().map(|wi| lambda * wi).collect();
    let mut gb = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let s = sign(yi);
        if s * (dot(w, xi) + b) < 1.0 {
            for (g, v) in gw.iter_mut().zip(xi) {
                *g -= s * v / n;
            }
            gb -= s / n;
        }
    }
    (gw, gb)
}

/// Linear soft-margin SVM by seeded stochastic sub-gradient descent with
/// step `1/(lambda t)`. Returns the epoch-end iterate with the lowest
/// objective.
pub fn train_svm(
    x: &[Vec<f64>],
    y: &[bool],
    params: &SvmParams,
) -> Result<LinearSvm, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::RowMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if !(params.lambda > 0.0) {
        return Err(AnalyticsError::InvalidParameter(format!(
            "lambda must be positive, got {}",
            params.lambda
        )));
    }
    if !y.iter().any(|&l| l) || y.iter().all(|&l| l) {
        return Err(AnalyticsError::SingleClass);
    }
    let dims = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != dims) {
        return Err(AnalyticsError::DimensionMismatch(dims, bad.len()));
    }

    let lambda = params.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut w = vec![0.0; dims];
    let mut b = 0.0;
    let mut best = (objective(&w, b, x, y, lambda), w.clone(), b);
    let mut t = 0u64;

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let s = sign(y[i]);
            let violated = s * (dot(&w, &x[i]) + b) < 1.0;
            let decay = 1.0 - eta * lambda;
            for wj in w.iter_mut() {
                *wj *= decay;
            }
            if violated {
                for (wj, v) in w.iter_mut().zip(&x[i]) {
                    *wj += eta * s * v;
                }
                b += eta * s;
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let scale = radius / norm;
                for wj in w.iter_mut() {
                    *wj *= scale;
                }
            }
        }
        let obj = objective(&w, b, x, y, lambda);
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
    }
    Ok(LinearSvm {
        weights: best.1,
        bias: best.2,
    })
}

#[cfg(test)]
pub(crate) mod toy {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 20 points in the unit square split by the line `x0 + x1 = 1`, each
    /// at least `margin` away from it along the normal.
    pub fn separable(seed: u64, margin: f64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        while x.len() < 20 {
            let p = vec![rng.random::<f64>() * 2.0, rng.random::<f64>() * 2.0];
            let signed = (p[0] + p[1] - 2.0) / 2f64.sqrt();
            if signed.abs() >= margin / 2.0 {
                y.push(signed > 0.0);
                x.push(p);
            }
        }
        (x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn accuracy(m: &LinearSvm, x: &[Vec<f64>], y: &[bool]) -> f64 {
        let hits = x
            .iter()
            .zip(y)
            .filter(|(xi, &yi)| m.predict(xi) == yi)
            .count();
        hits as f64 / x.len() as f64
    }

    #[test]
    fn separates_toy_set() {
        for seed in 0..5 {
            let (x, y) = toy::separable(seed, 0.5);
            let m = train_svm(&x, &y, &SvmParams::new(seed)).unwrap();
            assert_eq!(accuracy(&m, &x, &y), 1.0, "seed {seed}");
        }
    }

    #[test]
    fn scaling_features_keeps_predictions() {
        let (x, y) = toy::separable(3, 0.5);
        let x2: Vec<Vec<f64>> = x
            .iter()
            .map(|r| r.iter().map(|v| v * 2.0).collect())
            .collect();
        let a = train_svm(&x, &y, &SvmParams::new(1)).unwrap();
        let b = train_svm(&x2, &y, &SvmParams::new(1)).unwrap();
        assert_ne!(a.weights, b.weights);
        let pa: Vec<bool> = x.iter().map(|r| a.predict(r)).collect();
        let pb: Vec<bool> = x2.iter().map(|r| b.predict(r)).collect();
        assert_eq!(pa, pb);
    }

    #[test]
    fn one_class_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            train_svm(&x, &[true, true], &SvmParams::new(0)),
            Err(AnalyticsError::SingleClass)
        ));
        assert!(matches!(
            train_svm(&x, &[false, false], &SvmParams::new(0)),
            Err(AnalyticsError::SingleClass)
        ));
    }

    #[test]
    fn deterministic() {
        let (x, y) = toy::separable(9, 0.5);
        assert_eq!(
            train_svm(&x, &y, &SvmParams::new(4)).unwrap(),
            train_svm(&x, &y, &SvmParams::new(4)).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dims = rng.random_range(1..5);
            let n = rng.random_range(3..12);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let w: Vec<f64> = (0..dims).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = rng.random_range(-1.0..1.0);
            let lambda = 0.1;
            let h = 1e-6;
            // Skip points where a hinge sits within h of its kink.
            let kink = x.iter().zip(&y).any(|(xi, &yi)| (sign(yi) * (dot(&w, xi) + b) - 1.0).abs() < 1e-3);
            prop_assume!(!kink);
            let (gw, gb) = objective_gradient(&w, b, &x, &y, lambda);
            let rel = |a: f64, e: f64| (a - e).abs() / e.abs().max(1e-8).max(a.abs());
            for j in 0..dims {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                let fd = (objective(&wp, b, &x, &y, lambda) - objective(&wm, b, &x, &y, lambda)) / (2.0 * h);
                prop_assert!(rel(gw[j], fd) < 1e-4 || (gw[j] - fd).abs() < 1e-9, "w[{j}]: {} vs {fd}", gw[j]);
            }
            let fd = (objective(&w, b + h, &x, &y, lambda) - objective(&w, b - h, &x, &y, lambda)) / (2.0 * h);
            prop_assert!(rel(gb, fd) < 1e-4 || (gb - fd).abs() < 1e-9, "b: {gb} vs {fd}");
        }
    }
}
