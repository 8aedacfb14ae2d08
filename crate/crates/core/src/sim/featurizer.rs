//! Fixed synthetic observation encoder.
//!
//! An observation concatenates two blocks:
//!
//! * `ray_count` range readings to the arena walls at evenly spaced headings
//!   relative to the robot, encoded as `1 - d / max_range` (0 when nothing is in
//!   range);
//! * `feature_dim - ray_count` landmark channels. Each channel has a frozen,
//!   seed-drawn receptive field (preferred bearing, bearing selectivity,
//!   preferred range and preferred landmark signature) and sums the response of
//!   the nearest landmarks inside `max_range`.
//!
//! The seed fixes every receptive field, so two environments with the same
//! configuration encode poses identically. Gaussian noise of scale
//! `noise_sigma` is added per feature from a caller-owned stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, TngError};
use crate::scalar::Scalar;
use crate::sim::pose::Pose;

/// Landmarks beyond this many nearest neighbours are ignored.
pub const NEAREST_LANDMARKS: usize = 16;

const SIGNATURE_WIDTH: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeaturizerConfig<T> {
    pub seed: u64,
    pub feature_dim: usize,
    pub ray_count: usize,
    pub max_range: T,
    pub noise_sigma: T,
}

impl<T: Scalar> FeaturizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.ray_count == 0 || self.feature_dim <= self.ray_count {
            return Err(TngError::Validation(format!(
                "feature_dim ({}) must exceed ray_count ({}) and ray_count must be positive",
                self.feature_dim, self.ray_count
            )));
        }
        if !(self.max_range > T::zero()) || !self.max_range.is_finite() {
            return Err(TngError::Validation("max_range must be positive".into()));
        }
        if !(self.noise_sigma >= T::zero()) || !self.noise_sigma.is_finite() {
            return Err(TngError::Validation("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Short hex digest identifying the encoder (everything except the noise scale).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"tng-featurizer");
        h.update(self.seed.to_le_bytes());
        h.update((self.feature_dim as u64).to_le_bytes());
        h.update((self.ray_count as u64).to_le_bytes());
        h.update(self.max_range.to_f64_lossy().to_le_bytes());
        hex::encode(&h.finalize()[..8])
    }

    pub fn landmark_channels(&self) -> usize {
        self.feature_dim - self.ray_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Landmark<T> {
    pub x: T,
    pub y: T,
    pub signature: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Bounds<T> {
    pub min: [T; 2],
    pub max: [T; 2],
}

impl<T: Scalar> Bounds<T> {
    pub fn contains(&self, x: T, y: T) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    /// Distance from `(x, y)` along heading `h` to the boundary.
    pub fn ray_distance(&self, x: T, y: T, h: T) -> T {
        let (s, c) = h.sin_cos();
        let eps = T::lit(1e-12);
        let tx = if c > eps {
            (self.max[0] - x) / c
        } else if c < -eps {
            (self.min[0] - x) / c
        } else {
            T::infinity()
        };
        let ty = if s > eps {
            (self.max[1] - y) / s
        } else if s < -eps {
            (self.min[1] - y) / s
        } else {
            T::infinity()
        };
        tx.min(ty).max(T::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Channel<T> {
    bearing: T,
    selectivity: T,
    range_center: T,
    signature_center: T,
}

/// Frozen receptive fields drawn from the featurizer seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    config: FeaturizerConfig<T>,
    channels: Vec<Channel<T>>,
    range_width: T,
}

impl<T: Scalar> Encoder<T> {
    pub fn new(config: FeaturizerConfig<T>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let r = config.max_range.to_f64_lossy();
        let channels = (0..config.landmark_channels())
            .map(|_| Channel {
                bearing: T::lit(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)),
                selectivity: T::lit(rng.random_range(1.5..6.0)),
                range_center: T::lit(rng.random_range(0.0..r)),
                signature_center: T::lit(rng.random_range(0.0..1.0)),
            })
            .collect();
        Ok(Self {
            range_width: config.max_range / T::lit(3.0),
            config,
            channels,
        })
    }

    pub fn config(&self) -> &FeaturizerConfig<T> {
        &self.config
    }

    /// Noise-free features at `pose`.
    pub fn encode(&self, pose: &Pose<T>, bounds: &Bounds<T>, landmarks: &[Landmark<T>]) -> Vec<T> {
        let cfg = &self.config;
        let range = cfg.max_range;
        let mut out = Vec::with_capacity(cfg.feature_dim);
        let two_pi = T::PI() + T::PI();
        for k in 0..cfg.ray_count {
            let h =
                pose.theta + two_pi * T::from_usize_lossy(k) / T::from_usize_lossy(cfg.ray_count);
            let d = bounds.ray_distance(pose.x, pose.y, h).min(range);
            out.push(T::one() - d / range);
        }

        let mut near: Vec<(T, &Landmark<T>)> = landmarks
            .iter()
            .map(|l| ((l.x - pose.x).hypot(l.y - pose.y), l))
            .filter(|(d, _)| *d < range)
            .collect();
        near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        near.truncate(NEAREST_LANDMARKS);
        // (range, relative bearing, signature, taper) per visible landmark
        let seen: Vec<(T, T, T, T)> = near
            .iter()
            .map(|(d, l)| {
                let q = *d / range;
                let taper = (T::one() - q * q) * (T::one() - q * q);
                let bearing = (l.y - pose.y).atan2(l.x - pose.x) - pose.theta;
                (*d, bearing, l.signature, taper * l.signature)
            })
            .collect();
        let two = T::lit(2.0);
        let rw2 = two * self.range_width * self.range_width;
        let sw2 = T::lit(2.0 * SIGNATURE_WIDTH * SIGNATURE_WIDTH);
        for ch in &self.channels {
            let mut acc = T::zero();
            for &(d, bearing, sig, weight) in &seen {
                let dr = d - ch.range_center;
                let ds = sig - ch.signature_center;
                let tuning = (-(dr * dr) / rw2 - ds * ds / sw2
                    + ch.selectivity * ((bearing - ch.bearing).cos() - T::one()))
                .exp();
                acc = acc + weight * tuning;
            }
            out.push(acc);
        }
        out
    }
}

/// Seeded Gaussian stream used for observation noise. Cloning a stream and
/// replaying it reproduces the same draws.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn gaussian<T: Scalar>(&mut self) -> T {
        T::lit(self.rng.sample::<f64, _>(StandardNormal))
    }

    pub fn uniform<T: Scalar>(&mut self, lo: f64, hi: f64) -> T {
        T::lit(self.rng.random_range(lo..hi))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }
}

/// splitmix64 mixing of a base seed with a tag.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Encoded features at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Observation<T> {
    pub features: Vec<T>,
    pub timestamp: T,
}

impl<T: Scalar> Observation<T> {
    pub fn new(features: Vec<T>, timestamp: T) -> Self {
        Self {
            features,
            timestamp,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.features.len() != expected {
            return Err(TngError::DimensionMismatch {
                expected,
                got: self.features.len(),
            });
        }
        Ok(())
    }

    pub fn distance(&self, other: &Self) -> T {
        crate::linalg::sq_dist(&self.features, &other.features).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_distance_in_box() {
        let b = Bounds {
            min: [0.0f64, 0.0],
            max: [4.0, 2.0],
        };
        assert!((b.ray_distance(1.0, 1.0, 0.0) - 3.0).abs() < 1e-12);
        assert!((b.ray_distance(1.0, 1.0, std::f64::consts::PI) - 1.0).abs() < 1e-12);
        assert!((b.ray_distance(1.0, 1.0, std::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-12);
        let diag = b.ray_distance(1.0, 1.0, std::f64::consts::FRAC_PI_4);
        assert!((diag - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut c = FeaturizerConfig {
            seed: 1,
            feature_dim: 8,
            ray_count: 8,
            max_range: 2.0,
            noise_sigma: 0.0,
        };
        assert!(c.validate().is_err());
        c.feature_dim = 9;
        assert!(c.validate().is_ok());
        c.noise_sigma = -0.1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_noise_scale() {
        let a = FeaturizerConfig {
            seed: 7,
            feature_dim: 32,
            ray_count: 8,
            max_range: 2.5,
            noise_sigma: 0.0,
        };
        let mut b = a.clone();
        b.noise_sigma = 0.05;
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn seed_mixing_is_stable() {
        assert_eq!(derive_seed(1, 2), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 2), derive_seed(2, 1));
    }
}
