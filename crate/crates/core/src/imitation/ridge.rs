//! Multi-output ridge regression,
//! `min_θ Σ_i ||y_i − (Wᵀx_i + b)||² + λ(||W||² + ||b||²)`, solved exactly
//! through the regularised normal equations or iteratively with Adam.
//!
//! The bias is penalised along with the weights.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::linalg::Matrix;
use crate::optim::{Adam, Batcher, GradientConfig};
use crate::scalar::Scalar;

/// Weights (d × k) and bias (k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearParams<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> LinearParams<T> {
    pub fn zeros(d: usize, k: usize) -> Self {
        Self {
            weights: Matrix::zeros(d, k),
            bias: vec![T::zero(); k],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }

    /// `Wᵀx + b`.
    pub fn predict(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(TngError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut out = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.weights.row(i)) {
                *o = *o + xi * w;
            }
        }
        Ok(out)
    }

    pub fn norm_sq(&self) -> T {
        self.weights.frobenius_sq() + self.bias.iter().map(|&b| b * b).sum()
    }

    /// Flat parameter vector: weights row-major, then bias.
    pub fn flatten(&self) -> Vec<T> {
        let mut v = self.weights.as_slice().to_vec();
        v.extend_from_slice(&self.bias);
        v
    }
}

fn check_problem<T: Scalar>(x: &Matrix<T>, y: &Matrix<T>, lambda: T) -> Result<()> {
    if x.rows() == 0 {
        return Err(TngError::EmptyDataset(
            "ridge regression needs at least one sample".into(),
        ));
    }
    if x.rows() != y.rows() {
        return Err(TngError::DimensionMismatch {
            expected: x.rows(),
            got: y.rows(),
        });
    }
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(TngError::InvalidInput(format!(
            "ridge penalty must be > 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Value of the ridge objective at `params`.
pub fn ridge_objective<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    params: &LinearParams<T>,
    lambda: T,
) -> Result<T> {
    let mut sse = T::zero();
    for r in 0..x.rows() {
        let p = params.predict(x.row(r))?;
        for (pi, &yi) in p.iter().zip(y.row(r)) {
            let e = yi - *pi;
            sse = sse + e * e;
        }
    }
    Ok(sse + lambda * params.norm_sq())
}

/// Exact minimiser via Cholesky on `(X̃ᵀX̃ + λI) θ = X̃ᵀY`, where `X̃` carries a
/// trailing column of ones when `fit_bias` is set.
pub fn solve_closed_form<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    lambda: T,
    fit_bias: bool,
) -> Result<LinearParams<T>> {
    check_problem(x, y, lambda)?;
    let d = x.cols();
    let k = y.cols();
    let design = if fit_bias {
        let mut a = Matrix::zeros(x.rows(), d + 1);
        for r in 0..x.rows() {
            a.row_mut(r)[..d].copy_from_slice(x.row(r));
            a[(r, d)] = T::one();
        }
        a
    } else {
        x.clone()
    };
    let mut normal = design.gram();
    for i in 0..normal.rows() {
        normal[(i, i)] = normal[(i, i)] + lambda;
    }
    let rhs = design.t_matmul(y)?;
    let theta = normal.cholesky_solve(&rhs)?;
    let mut weights = Matrix::zeros(d, k);
    for i in 0..d {
        weights.row_mut(i).copy_from_slice(theta.row(i));
    }
    let bias = if fit_bias {
        theta.row(d).to_vec()
    } else {
        vec![T::zero(); k]
    };
    Ok(LinearParams { weights, bias })
}

/// Adam on the ridge objective. Minibatch gradients rescale the data term by
/// `n / batch` so they are unbiased. Returns the parameters and the full
/// training objective recorded every `trace_every` steps (plus the final one).
pub fn solve_gradient<T: Scalar>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    lambda: T,
    fit_bias: bool,
    cfg: &GradientConfig<T>,
) -> Result<(LinearParams<T>, Vec<T>)> {
    check_problem(x, y, lambda)?;
    cfg.validate()?;
    let (n, d, k) = (x.rows(), x.cols(), y.cols());
    let mut params = LinearParams::zeros(d, k);
    let mut theta = params.flatten();
    let mut grad = vec![T::zero(); theta.len()];
    let mut adam = Adam::new(theta.len());
    let mut batcher = Batcher::new(n, cfg.batch, cfg.seed);
    let scale = T::from_usize_lossy(n) / T::from_usize_lossy(batcher.batch_size());
    let two = T::lit(2.0);
    let mut trace = Vec::new();
    let mut resid = vec![T::zero(); k];
    for step in 0..cfg.steps {
        if step % cfg.trace_every() == 0 {
            trace.push(ridge_objective(x, y, &params, lambda)?);
        }
        for (g, &t) in grad.iter_mut().zip(&theta) {
            *g = two * lambda * t;
        }
        for &r in batcher.next_batch() {
            let row = x.row(r);
            for c in 0..k {
                resid[c] = params.bias[c] - y[(r, c)];
            }
            for (i, &xi) in row.iter().enumerate() {
                let w = params.weights.row(i);
                for c in 0..k {
                    resid[c] = resid[c] + xi * w[c];
                }
            }
            for (i, &xi) in row.iter().enumerate() {
                if xi == T::zero() {
                    continue;
                }
                for c in 0..k {
                    grad[i * k + c] = grad[i * k + c] + two * scale * xi * resid[c];
                }
            }
            if fit_bias {
                for c in 0..k {
                    grad[d * k + c] = grad[d * k + c] + two * scale * resid[c];
                }
            }
        }
        if !fit_bias {
            for c in 0..k {
                grad[d * k + c] = T::zero();
            }
        }
        adam.step(&mut theta, &grad, cfg.rate_at(step));
        params
            .weights
            .as_mut_slice()
            .copy_from_slice(&theta[..d * k]);
        params.bias.copy_from_slice(&theta[d * k..]);
    }
    trace.push(ridge_objective(x, y, &params, lambda)?);
    Ok((params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn column(v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn vanishing_penalty_fits_exactly() {
        let p =
            solve_closed_form(&column(&[1.0, 1.0]), &column(&[1.0, 1.0]), 1e-12, false).unwrap();
        assert!((p.weights[(0, 0)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unit_penalty_shrinks_to_two_thirds() {
        // w = Σxy / (Σx² + λ) = 2 / 3
        let p = solve_closed_form(&column(&[1.0, 1.0]), &column(&[1.0, 1.0]), 1.0, false).unwrap();
        assert!((p.weights[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.bias, vec![0.0]);
    }

    #[test]
    fn zero_penalty_is_rejected() {
        let r = solve_closed_form(&column(&[1.0, 1.0]), &column(&[1.0, 1.0]), 0.0, false);
        assert!(matches!(r, Err(TngError::InvalidInput(_))));
        let r = solve_gradient(
            &column(&[1.0]),
            &column(&[1.0]),
            0.0,
            true,
            &GradientConfig::default(),
        );
        assert!(r.is_err());
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Matrix<f64>, Matrix<f64>) {
        let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        (
            Matrix::from_vec(n, d, x).unwrap(),
            Matrix::from_vec(n, 2, y).unwrap(),
        )
    }

    #[test]
    fn huge_penalty_shrinks_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (x, y) = random_problem(&mut rng, 60, 8);
        let base = solve_closed_form(&x, &y, 1.0, true).unwrap();
        let big = solve_closed_form(&x, &y, 1e6, true).unwrap();
        assert!(big.norm_sq().sqrt() < 1e-3 * base.norm_sq().sqrt());
    }

    #[test]
    fn closed_form_beats_random_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, y) = random_problem(&mut rng, 80, 6);
        let best = solve_closed_form(&x, &y, 0.3, true).unwrap();
        let f0 = ridge_objective(&x, &y, &best, 0.3).unwrap();
        for _ in 0..100 {
            let mut p = best.clone();
            for w in p.weights.as_mut_slice() {
                *w += rng.random_range(-0.05..0.05);
            }
            for b in &mut p.bias {
                *b += rng.random_range(-0.05..0.05);
            }
            assert!(ridge_objective(&x, &y, &p, 0.3).unwrap() >= f0);
        }
    }

    #[test]
    fn full_batch_adam_loss_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (x, y) = random_problem(&mut rng, 100, 10);
        let cfg = GradientConfig {
            rate: 0.02,
            steps: 1500,
            ..GradientConfig::default()
        };
        let (_, trace) = solve_gradient(&x, &y, 0.5, true, &cfg).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn minibatch_adam_loss_trends_down() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (x, y) = random_problem(&mut rng, 120, 6);
        let cfg = GradientConfig {
            rate: 0.02,
            steps: 3000,
            batch: 16,
            seed: 3,
            ..GradientConfig::default()
        };
        let (p, trace) = solve_gradient(&x, &y, 0.5, true, &cfg).unwrap();
        let opt =
            ridge_objective(&x, &y, &solve_closed_form(&x, &y, 0.5, true).unwrap(), 0.5).unwrap();
        // batch noise allows small upticks, never a sustained climb
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 0.05 * opt);
        }
        let last = ridge_objective(&x, &y, &p, 0.5).unwrap();
        assert!(last < 1.01 * opt);
    }

    #[test]
    fn single_precision_solve() {
        let x = Matrix::from_vec(2, 1, vec![1.0f32, 1.0]).unwrap();
        let p = solve_closed_form(&x, &x, 1.0, false).unwrap();
        assert!((p.weights[(0, 0)] - 2.0 / 3.0).abs() < 1e-6);
    }
}
