//! Gaussian naive Bayes.
//!
//! Each class keeps its prior, per-feature mean and population variance. Every
//! variance is inflated by `1e-9 × (largest feature variance over the whole
//! training set)` so constant features do not produce zero variances.

use std::f64::consts::PI;

use super::LearnError;
use crate::streams::LabeledPoint;

pub const VAR_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub label: usize,
    pub prior: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Classes are kept in ascending label order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    classes: Vec<ClassStats>,
    n_features: usize,
}

impl GaussianNb {
    pub fn fit(points: &[&LabeledPoint]) -> Result<Self, LearnError> {
        let n_features = super::check_dims(points)?;
        let n = points.len() as f64;

        let overall_max_var = (0..n_features)
            .map(|f| variance(points.iter().map(|p| p.features[f])))
            .fold(0.0f64, f64::max);
        let mut epsilon = VAR_SMOOTHING * overall_max_var;
        if epsilon <= 0.0 {
            // All features constant across the frame.
            epsilon = VAR_SMOOTHING;
        }

        let mut labels: Vec<usize> = points.iter().map(|p| p.label).collect();
        labels.sort_unstable();
        labels.dedup();

        let classes = labels
            .into_iter()
            .map(|label| {
                let members: Vec<&LabeledPoint> =
                    points.iter().copied().filter(|p| p.label == label).collect();
                let mean = (0..n_features)
                    .map(|f| mean(members.iter().map(|p| p.features[f])))
                    .collect();
                let var = (0..n_features)
                    .map(|f| variance(members.iter().map(|p| p.features[f])) + epsilon)
                    .collect();
                ClassStats {
                    label,
                    prior: members.len() as f64 / n,
                    mean,
                    var,
                }
            })
            .collect();
        Ok(Self {
            classes,
            n_features,
        })
    }

    pub fn from_classes(classes: Vec<ClassStats>, n_features: usize) -> Result<Self, LearnError> {
        if classes.is_empty() {
            return Err(LearnError::InvalidModel("no classes".into()));
        }
        for c in &classes {
            if c.mean.len() != n_features || c.var.len() != n_features {
                return Err(LearnError::InvalidModel(format!(
                    "class {} has parameters for the wrong dimensionality",
                    c.label
                )));
            }
            if c.prior.is_nan() || c.prior <= 0.0 || c.prior > 1.0 || c.var.iter().any(|v| v.is_nan() || *v <= 0.0) {
                return Err(LearnError::InvalidModel(format!(
                    "class {} has a non-positive prior or variance",
                    c.label
                )));
            }
        }
        if classes.windows(2).any(|w| w[0].label >= w[1].label) {
            return Err(LearnError::InvalidModel("classes must be sorted and unique".into()));
        }
        Ok(Self {
            classes,
            n_features,
        })
    }

    pub fn classes(&self) -> &[ClassStats] {
        &self.classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Unnormalized log posterior of each class: log prior plus the sum of
    /// per-feature Gaussian log densities.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Vec<(usize, f64)> {
        self.classes
            .iter()
            .map(|c| {
                let ll: f64 = x
                    .iter()
                    .zip(c.mean.iter().zip(&c.var))
                    .map(|(xi, (m, v))| -0.5 * ((2.0 * PI * v).ln() + (xi - m) * (xi - m) / v))
                    .sum();
                (c.label, c.prior.ln() + ll)
            })
            .collect()
    }

    /// Class with the largest log posterior; ties go to the lowest label.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut best = (self.classes[0].label, f64::NEG_INFINITY);
        for (label, score) in self.joint_log_likelihood(x) {
            if score > best.1 {
                best = (label, score);
            }
        }
        best.0
    }
}

fn mean<I: Iterator<Item = f64>>(values: I) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Population variance (divides by n).
fn variance<I: Iterator<Item = f64> + Clone>(values: I) -> f64 {
    let m = mean(values.clone());
    mean(values.map(|v| (v - m) * (v - m)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(rows: &[(f64, usize)]) -> GaussianNb {
        let pts: Vec<LabeledPoint> = rows
            .iter()
            .enumerate()
            .map(|(i, &(x, l))| LabeledPoint::new(vec![x], l, i as u64))
            .collect();
        let refs: Vec<&LabeledPoint> = pts.iter().collect();
        GaussianNb::fit(&refs).unwrap()
    }

    #[test]
    fn symmetric_classes_split_at_zero() {
        // Means -1 and +1, equal spread and priors.
        let nb = fit(&[(-2.0, 0), (0.0, 0), (0.0, 1), (2.0, 1)]);
        assert_eq!(nb.classes()[0].mean, vec![-1.0]);
        assert_eq!(nb.classes()[1].mean, vec![1.0]);
        assert_eq!(nb.predict(&[-0.01]), 0);
        assert_eq!(nb.predict(&[0.01]), 1);
        assert_eq!(nb.predict(&[-5.0]), 0);
    }

    #[test]
    fn single_class_always_wins() {
        let nb = fit(&[(1.0, 3), (2.0, 3)]);
        for x in [-1e6, 0.0, 1.5, 1e6] {
            assert_eq!(nb.predict(&[x]), 3);
        }
    }

    #[test]
    fn constant_frame_does_not_blow_up() {
        let nb = fit(&[(1.0, 0), (1.0, 1), (1.0, 1)]);
        assert!(nb.classes().iter().all(|c| c.var[0] > 0.0));
        assert_eq!(nb.predict(&[1.0]), 1);
    }

    #[test]
    fn population_variance_plus_smoothing() {
        let nb = fit(&[(0.0, 0), (2.0, 0), (10.0, 1), (10.0, 1)]);
        // Overall variance of [0, 2, 10, 10] is 83 / 4.
        let eps = 1e-9 * 20.75;
        assert!((nb.classes()[0].var[0] - (1.0 + eps)).abs() < 1e-14);
        assert!((nb.classes()[1].var[0] - eps).abs() < 1e-20);
        assert_eq!(nb.classes()[0].prior, 0.5);
    }

    #[test]
    fn from_classes_rejects_bad_parameters() {
        let good = ClassStats { label: 0, prior: 1.0, mean: vec![0.0], var: vec![1.0] };
        assert!(GaussianNb::from_classes(vec![good.clone()], 1).is_ok());
        assert!(GaussianNb::from_classes(vec![], 1).is_err());
        assert!(GaussianNb::from_classes(vec![good.clone()], 2).is_err());
        let zero_var = ClassStats { var: vec![0.0], ..good.clone() };
        assert!(GaussianNb::from_classes(vec![zero_var], 1).is_err());
        assert!(GaussianNb::from_classes(vec![good.clone(), good], 1).is_err());
    }
}
