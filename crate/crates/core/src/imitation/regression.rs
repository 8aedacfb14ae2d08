//! Behaviour-cloning controller: a trainable head on top of the frozen
//! observation encoder, with outputs clipped to the command range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::imitation::dataset::Dataset;
use crate::imitation::ridge::{solve_closed_form, solve_gradient, LinearParams};
use crate::linalg::Matrix;
use crate::optim::{Adam, Batcher, GradientConfig};
use crate::policy::{Action, Policy};
use crate::scalar::Scalar;
use crate::sim::{MotorCommand, Observation, Pose};

/// One-hidden-layer tanh perceptron, `[d, hidden, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T> {
    pub layer_sizes: [usize; 3],
    /// hidden × d, then hidden biases, then 2 × hidden, then 2 output biases.
    pub params: Vec<T>,
}

impl<T: Scalar> Mlp<T> {
    pub fn param_count(sizes: [usize; 3]) -> usize {
        let [d, h, o] = sizes;
        h * d + h + o * h + o
    }

    pub fn init(sizes: [usize; 3], seed: u64) -> Self {
        let [d, h, o] = sizes;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(Self::param_count(sizes));
        let a1 = (6.0 / (d + h) as f64).sqrt();
        params.extend((0..h * d).map(|_| T::lit(rng.random_range(-a1..a1))));
        params.extend((0..h).map(|_| T::zero()));
        let a2 = (6.0 / (h + o) as f64).sqrt();
        params.extend((0..o * h).map(|_| T::lit(rng.random_range(-a2..a2))));
        params.extend((0..o).map(|_| T::zero()));
        Self {
            layer_sizes: sizes,
            params,
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let [d, h, o] = self.layer_sizes;
        (h * d, h * d + h, h * d + h + o * h)
    }

    /// Hidden activations and outputs.
    pub fn forward(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let [d, h, o] = self.layer_sizes;
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let hidden: Vec<T> = (0..h)
            .map(|j| {
                let w = &p[j * d..(j + 1) * d];
                (crate::linalg::dot(w, x) + p[b1 + j]).tanh()
            })
            .collect();
        let out = (0..o)
            .map(|c| crate::linalg::dot(&p[w2 + c * h..w2 + (c + 1) * h], &hidden) + p[b2 + c])
            .collect();
        (hidden, out)
    }

    /// Accumulates `scale · ∂||y − f(x)||²/∂θ` into `grad`.
    fn accumulate_grad(&self, x: &[T], y: &[T], scale: T, grad: &mut [T]) -> T {
        let [d, h, o] = self.layer_sizes;
        let (b1, w2, b2) = self.offsets();
        let (hidden, out) = self.forward(x);
        let two = T::lit(2.0);
        let mut sse = T::zero();
        let mut back = vec![T::zero(); h];
        for c in 0..o {
            let e = out[c] - y[c];
            sse = sse + e * e;
            let g = two * scale * e;
            grad[b2 + c] = grad[b2 + c] + g;
            for j in 0..h {
                grad[w2 + c * h + j] = grad[w2 + c * h + j] + g * hidden[j];
                back[j] = back[j] + g * self.params[w2 + c * h + j];
            }
        }
        for j in 0..h {
            let g = back[j] * (T::one() - hidden[j] * hidden[j]);
            grad[b1 + j] = grad[b1 + j] + g;
            for i in 0..d {
                grad[j * d + i] = grad[j * d + i] + g * x[i];
            }
        }
        sse
    }

    pub fn norm_sq(&self) -> T {
        self.params.iter().map(|&v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "type", rename_all = "kebab-case")]
pub enum Head<T> {
    Linear(LinearParams<T>),
    Mlp(Mlp<T>),
}

impl<T: Scalar> Head<T> {
    pub fn input_dim(&self) -> usize {
        match self {
            Head::Linear(p) => p.input_dim(),
            Head::Mlp(m) => m.layer_sizes[0],
        }
    }

    /// Raw (unclipped) two-channel output.
    pub fn raw(&self, x: &[T]) -> Result<[T; 2]> {
        if x.len() != self.input_dim() {
            return Err(TngError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let v = match self {
            Head::Linear(p) => p.predict(x)?,
            Head::Mlp(m) => m.forward(x).1,
        };
        Ok([v[0], v[1]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum HeadKind {
    Linear,
    Mlp { hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "kebab-case", tag = "kind")]
pub enum Optimizer<T> {
    ClosedForm,
    Gradient(GradientConfig<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct TrainConfig<T> {
    pub lambda: T,
    pub optimizer: Optimizer<T>,
    pub head: HeadKind,
    pub fit_bias: bool,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            lambda: T::lit(1e-2),
            optimizer: Optimizer::ClosedForm,
            head: HeadKind::Linear,
            fit_bias: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegressionController<T> {
    pub head: Head<T>,
    pub ridge_lambda: T,
    pub featurizer_hash: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_trace: Vec<T>,
}

impl<T: Scalar> RegressionController<T> {
    /// Head forward pass with each channel clipped to the command range.
    pub fn act(&self, obs: &Observation<T>) -> Result<MotorCommand<T>> {
        let [v, w] = self.head.raw(&obs.features)?;
        Ok(MotorCommand::new(v, w).clipped())
    }

    pub fn feature_dim(&self) -> usize {
        self.head.input_dim()
    }
}

pub fn regression_act<T: Scalar>(
    c: &RegressionController<T>,
    obs: &Observation<T>,
) -> Result<MotorCommand<T>> {
    c.act(obs)
}

impl<T: Scalar> Policy<T> for RegressionController<T> {
    fn act(&mut self, obs: &Observation<T>, _pose: &Pose<T>, _dt: T) -> Result<Action<T>> {
        RegressionController::act(self, obs).map(Action::Command)
    }
}

/// Fits a controller to `(observation, command)` pairs by minimising the
/// ridge objective.
pub fn train_regression<T: Scalar>(
    data: &Dataset<T>,
    featurizer_hash: &str,
    cfg: &TrainConfig<T>,
) -> Result<RegressionController<T>> {
    if data.is_empty() {
        return Err(TngError::EmptyDataset(
            "cannot train a controller on no samples".into(),
        ));
    }
    if !(cfg.lambda > T::zero()) {
        return Err(TngError::InvalidInput(format!(
            "ridge penalty must be > 0, got {}",
            cfg.lambda
        )));
    }
    let (x, y) = data.to_matrices()?;
    let (head, loss_trace) = match (cfg.head, cfg.optimizer) {
        (HeadKind::Linear, Optimizer::ClosedForm) => (
            Head::Linear(solve_closed_form(&x, &y, cfg.lambda, cfg.fit_bias)?),
            Vec::new(),
        ),
        (HeadKind::Linear, Optimizer::Gradient(g)) => {
            let (p, trace) = solve_gradient(&x, &y, cfg.lambda, cfg.fit_bias, &g)?;
            (Head::Linear(p), trace)
        }
        (HeadKind::Mlp { hidden }, opt) => {
            let g = match opt {
                Optimizer::Gradient(g) => g,
                // no closed form for the perceptron; fall back to Adam defaults
                Optimizer::ClosedForm => GradientConfig::default(),
            };
            let (m, trace) = train_mlp(&x, &y, hidden, cfg.lambda, &g)?;
            (Head::Mlp(m), trace)
        }
    };
    Ok(RegressionController {
        head,
        ridge_lambda: cfg.lambda,
        featurizer_hash: featurizer_hash.to_string(),
        loss_trace,
    })
}

fn mlp_objective<T: Scalar>(m: &Mlp<T>, x: &Matrix<T>, y: &Matrix<T>, lambda: T) -> T {
    let mut sse = T::zero();
    for r in 0..x.rows() {
        let (_, out) = m.forward(x.row(r));
        for (o, &t) in out.iter().zip(y.row(r)) {
            sse = sse + (*o - t) * (*o - t);
        }
    }
    sse + lambda * m.norm_sq()
}

fn train_mlp<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    hidden: usize,
    lambda: T,
    cfg: &GradientConfig<T>,
) -> Result<(Mlp<T>, Vec<T>)> {
    cfg.validate()?;
    if hidden == 0 {
        return Err(TngError::InvalidInput(
            "hidden layer needs at least one unit".into(),
        ));
    }
    let sizes = [x.cols(), hidden, y.cols()];
    let mut mlp = Mlp::init(sizes, cfg.seed);
    let mut adam = Adam::new(mlp.params.len());
    let mut batcher = Batcher::new(x.rows(), cfg.batch, cfg.seed ^ 0x5eed);
    let scale = T::from_usize_lossy(x.rows()) / T::from_usize_lossy(batcher.batch_size());
    let mut grad = vec![T::zero(); mlp.params.len()];
    let mut trace = Vec::new();
    let two = T::lit(2.0);
    for step in 0..cfg.steps {
        if step % cfg.trace_every() == 0 {
            trace.push(mlp_objective(&mlp, x, y, lambda));
        }
        for (g, &p) in grad.iter_mut().zip(&mlp.params) {
            *g = two * lambda * p;
        }
        let idx: Vec<usize> = batcher.next_batch().to_vec();
        for r in idx {
            mlp.accumulate_grad(x.row(r), y.row(r), scale, &mut grad);
        }
        let mut params = std::mem::take(&mut mlp.params);
        adam.step(&mut params, &grad, cfg.rate_at(step));
        mlp.params = params;
    }
    trace.push(mlp_objective(&mlp, x, y, lambda));
    Ok((mlp, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imitation::dataset::{DemoSample, Source};
    use proptest::prelude::*;

    fn linear(weights: Vec<f64>, bias: [f64; 2], d: usize) -> RegressionController<f64> {
        RegressionController {
            head: Head::Linear(LinearParams {
                weights: Matrix::from_vec(d, 2, weights).unwrap(),
                bias: bias.to_vec(),
            }),
            ridge_lambda: 1.0,
            featurizer_hash: "x".into(),
            loss_trace: vec![],
        }
    }

    #[test]
    fn zero_head_emits_zero() {
        let c = linear(vec![0.0; 6], [0.0, 0.0], 3);
        let out = c.act(&Observation::new(vec![1.0, -2.0, 3.0], 0.0)).unwrap();
        assert_eq!(out, MotorCommand::new(0.0, 0.0));
    }

    #[test]
    fn outputs_are_clipped() {
        let c = linear(vec![0.0; 2], [3.0, -2.0], 1);
        let out = c.act(&Observation::new(vec![0.7], 0.0)).unwrap();
        assert_eq!(out, MotorCommand::new(1.5, -1.5));
    }

    #[test]
    fn dimension_mismatch() {
        let c = linear(vec![0.0; 6], [0.0, 0.0], 3);
        assert!(matches!(
            c.act(&Observation::new(vec![1.0], 0.0)),
            Err(TngError::DimensionMismatch {
                expected: 3,
                got: 1
            })
        ));
    }

    proptest! {
        #[test]
        fn linear_head_matches_matrix_product(
            w in prop::collection::vec(-0.5f64..0.5, 8),
            b in prop::array::uniform2(-0.5f64..0.5),
            x in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let c = linear(w.clone(), b, 4);
            let out = c.act(&Observation::new(x.clone(), 0.0)).unwrap();
            let mut e = [b[0], b[1]];
            for i in 0..4 {
                e[0] += x[i] * w[2 * i];
                e[1] += x[i] * w[2 * i + 1];
            }
            prop_assert!((out.linear - e[0].clamp(-1.5, 1.5)).abs() < 1e-12);
            prop_assert!((out.angular - e[1].clamp(-1.5, 1.5)).abs() < 1e-12);
        }

        #[test]
        fn fuzzed_observations_stay_in_range(
            w in prop::collection::vec(-20.0f64..20.0, 6),
            x in prop::collection::vec(-100.0f64..100.0, 3),
        ) {
            let c = linear(w, [5.0, -5.0], 3);
            prop_assert!(c.act(&Observation::new(x, 0.0)).unwrap().within_limit());
        }
    }

    fn toy_dataset() -> Dataset<f64> {
        let mut d = Dataset::new();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            let x = vec![t.sin(), (3.0 * t).cos(), t];
            d.push(
                DemoSample {
                    observation: Observation::new(x.clone(), 0.0),
                    command: MotorCommand::new(0.5 * x[0], x[1] - 0.3 * x[2]),
                    pose: Pose::default(),
                    trajectory_id: 0,
                },
                Source::ExpertLap,
            );
        }
        d
    }

    #[test]
    fn mlp_head_learns_a_smooth_map() {
        let cfg = TrainConfig {
            lambda: 1e-4,
            optimizer: Optimizer::Gradient(GradientConfig {
                rate: 0.02,
                steps: 3000,
                ..GradientConfig::default()
            }),
            head: HeadKind::Mlp { hidden: 16 },
            fit_bias: true,
        };
        let c = train_regression(&toy_dataset(), "h", &cfg).unwrap();
        let first = c.loss_trace[0];
        let last = *c.loss_trace.last().unwrap();
        assert!(last < 0.02 * first, "{first} -> {last}");
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(
            train_regression(&Dataset::<f64>::new(), "h", &TrainConfig::default()),
            Err(TngError::EmptyDataset(_))
        ));
    }
}
