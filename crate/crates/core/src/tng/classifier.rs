use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::linalg::Matrix;
use crate::optim::{Adam, Batcher, GradientConfig};
use crate::scalar::Scalar;
use crate::sim::Observation;

/// Shared multiclass softmax over observation features; one output per
/// trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrajectoryClassifier<T> {
    /// `d × C`.
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
    pub featurizer_hash: String,
    /// Per-class accuracy on the training observations.
    #[serde(default)]
    pub train_accuracy: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification<T> {
    pub index: usize,
    /// `g`: 1 at `index`, 0 elsewhere.
    pub indicator: Vec<u8>,
    pub probabilities: Vec<T>,
}

/// Index of the largest value; the smaller index wins exact ties.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl<T: Scalar> TrajectoryClassifier<T> {
    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn logits(&self, features: &[T]) -> Result<Vec<T>> {
        if features.len() != self.feature_dim() {
            return Err(TngError::DimensionMismatch {
                expected: self.feature_dim(),
                got: features.len(),
            });
        }
        let mut z = self.bias.clone();
        for (i, &x) in features.iter().enumerate() {
            for (zc, &w) in z.iter_mut().zip(self.weights.row(i)) {
                *zc = *zc + x * w;
            }
        }
        Ok(z)
    }

    pub fn classify_logits(logits: &[T]) -> Classification<T> {
        let index = argmax(logits);
        let mut indicator = vec![0; logits.len()];
        indicator[index] = 1;
        Classification {
            index,
            indicator,
            probabilities: softmax(logits),
        }
    }
}

pub fn classify_trajectory<T: Scalar>(
    clf: &TrajectoryClassifier<T>,
    obs: &Observation<T>,
) -> Result<Classification<T>> {
    Ok(TrajectoryClassifier::classify_logits(
        &clf.logits(&obs.features)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct ClassifierConfig<T> {
    pub optimizer: GradientConfig<T>,
    /// L2 penalty on the weights.
    pub l2: T,
}

impl<T: Scalar> Default for ClassifierConfig<T> {
    fn default() -> Self {
        Self {
            optimizer: GradientConfig {
                rate: T::lit(0.1),
                steps: 2000,
                batch: 256,
                final_fraction: T::lit(0.05),
                trace_every: 50,
                seed: 0,
            },
            l2: T::lit(1e-4),
        }
    }
}

/// Fits the softmax head by minimising mean cross-entropy with Adam.
/// `per_class[i]` holds the training observations of trajectory `i`.
pub fn train_trajectory_classifier<T: Scalar>(
    per_class: &[Vec<Observation<T>>],
    featurizer_hash: &str,
    cfg: &ClassifierConfig<T>,
) -> Result<TrajectoryClassifier<T>> {
    cfg.optimizer.validate()?;
    if per_class.is_empty() {
        return Err(TngError::EmptyDataset(
            "classifier needs at least one class".into(),
        ));
    }
    if let Some(i) = per_class.iter().position(|c| c.is_empty()) {
        return Err(TngError::EmptyDataset(format!(
            "class {i} has no observations"
        )));
    }
    let c = per_class.len();
    let d = per_class[0][0].dim();
    let mut xs: Vec<&[T]> = Vec::new();
    let mut ys: Vec<usize> = Vec::new();
    for (k, obs) in per_class.iter().enumerate() {
        for o in obs {
            o.check_dim(d)?;
            xs.push(&o.features);
            ys.push(k);
        }
    }
    let mut clf = TrajectoryClassifier {
        weights: Matrix::zeros(d, c),
        bias: vec![T::zero(); c],
        featurizer_hash: featurizer_hash.to_string(),
        train_accuracy: Vec::new(),
    };
    if c > 1 {
        let n = xs.len();
        // parameters: weights row-major, then bias
        let mut params = vec![T::zero(); d * c + c];
        let mut grad = vec![T::zero(); d * c + c];
        let mut adam = Adam::new(params.len());
        let mut batcher = Batcher::new(n, cfg.optimizer.batch, cfg.optimizer.seed);
        for step in 0..cfg.optimizer.steps {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let batch = batcher.next_batch();
            let inv = T::one() / T::from_usize_lossy(batch.len());
            for &r in batch {
                let x = xs[r];
                let mut z = params[d * c..].to_vec();
                for (i, &xi) in x.iter().enumerate() {
                    for (k, zk) in z.iter_mut().enumerate() {
                        *zk = *zk + xi * params[i * c + k];
                    }
                }
                let mut p = softmax(&z);
                p[ys[r]] = p[ys[r]] - T::one();
                for (i, &xi) in x.iter().enumerate() {
                    for (k, &pk) in p.iter().enumerate() {
                        grad[i * c + k] = grad[i * c + k] + xi * pk * inv;
                    }
                }
                for (k, &pk) in p.iter().enumerate() {
                    grad[d * c + k] = grad[d * c + k] + pk * inv;
                }
            }
            for (g, &w) in grad[..d * c].iter_mut().zip(&params[..d * c]) {
                *g = *g + T::lit(2.0) * cfg.l2 * w;
            }
            adam.step(&mut params, &grad, cfg.optimizer.rate_at(step));
        }
        clf.weights = Matrix::from_vec(d, c, params[..d * c].to_vec())?;
        clf.bias = params[d * c..].to_vec();
    }
    let mut hits = vec![0usize; c];
    let mut totals = vec![0usize; c];
    for (x, &y) in xs.iter().zip(&ys) {
        totals[y] += 1;
        if argmax(&clf.logits(x)?) == y {
            hits[y] += 1;
        }
    }
    clf.train_accuracy = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| T::from_usize_lossy(h) / T::from_usize_lossy(t))
        .collect();
    Ok(clf)
}
