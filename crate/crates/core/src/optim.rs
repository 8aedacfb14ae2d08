//! Adam first-order optimiser shared by every gradient-trained head.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct GradientConfig<T> {
    /// Initial learning rate.
    pub rate: T,
    pub steps: usize,
    /// Minibatch size; 0 means full batch.
    pub batch: usize,
    /// Learning rate at the last step as a fraction of `rate` (geometric decay).
    #[serde(default = "default_final_fraction")]
    pub final_fraction: T,
    /// Record the full training loss every this many steps.
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_final_fraction<T: Scalar>() -> T {
    T::lit(1e-2)
}

fn default_trace_every() -> usize {
    10
}

impl<T: Scalar> Default for GradientConfig<T> {
    fn default() -> Self {
        Self {
            rate: T::lit(0.01),
            steps: 2000,
            batch: 0,
            final_fraction: default_final_fraction(),
            trace_every: default_trace_every(),
            seed: 0,
        }
    }
}

impl<T: Scalar> GradientConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > T::zero()) || self.steps == 0 {
            return Err(TngError::InvalidInput(
                "gradient rate and steps must be positive".into(),
            ));
        }
        if !(self.final_fraction > T::zero()) || self.final_fraction > T::one() {
            return Err(TngError::InvalidInput(
                "final_fraction must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn rate_at(&self, step: usize) -> T {
        if self.steps <= 1 {
            return self.rate;
        }
        let frac = T::from_usize_lossy(step) / T::from_usize_lossy(self.steps - 1);
        self.rate * self.final_fraction.powf(frac)
    }

    pub fn trace_every(&self) -> usize {
        self.trace_every.max(1)
    }
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
    beta1: T,
    beta2: T,
    eps: T,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T], rate: T) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] = params[i] - rate * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Yields minibatch index sets for each step, reshuffling every epoch.
pub struct Batcher {
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl Batcher {
    pub fn new(n: usize, batch: usize, seed: u64) -> Self {
        let batch = if batch == 0 || batch > n { n } else { batch };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        if batch < n {
            order.shuffle(&mut rng);
        }
        Self {
            order,
            cursor: 0,
            batch,
            rng,
        }
    }

    pub fn is_full(&self) -> bool {
        self.batch == self.order.len()
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn next_batch(&mut self) -> &[usize] {
        if self.is_full() {
            return &self.order;
        }
        if self.cursor + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let s = self.cursor;
        self.cursor += self.batch;
        &self.order[s..s + self.batch]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimises_a_quadratic() {
        let mut p = vec![3.0f64, -2.0];
        let mut opt = Adam::new(2);
        let cfg = GradientConfig {
            rate: 0.1,
            steps: 3000,
            ..GradientConfig::default()
        };
        for s in 0..cfg.steps {
            let g = vec![2.0 * (p[0] - 1.0), 20.0 * (p[1] + 0.5)];
            opt.step(&mut p, &g, cfg.rate_at(s));
        }
        assert!((p[0] - 1.0).abs() < 1e-6 && (p[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn batches_cover_every_index_per_epoch() {
        let mut b = Batcher::new(10, 5, 4);
        let mut seen: Vec<usize> = b.next_batch().to_vec();
        seen.extend_from_slice(b.next_batch());
        seen.sort();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert!(Batcher::new(10, 0, 1).is_full());
    }

    #[test]
    fn schedule_endpoints() {
        let cfg = GradientConfig {
            rate: 0.5f64,
            steps: 11,
            final_fraction: 0.01,
            ..GradientConfig::default()
        };
        assert!((cfg.rate_at(0) - 0.5).abs() < 1e-15);
        assert!((cfg.rate_at(10) - 0.005).abs() < 1e-15);
    }
}
