//! Few-shot place recognition by nearest-exemplar matching in feature space.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::linalg::sq_dist;
use crate::scalar::Scalar;
use crate::sim::{Environment, NoiseStream, Observation, Pose, Trajectory};

pub const MAX_EXEMPLARS: usize = 10;

/// Fires when the nearest stored exemplar lies within `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExemplarMatcher<T> {
    pub exemplars: Vec<Vec<T>>,
    pub threshold: T,
}

impl<T: Scalar> ExemplarMatcher<T> {
    /// Exact duplicate exemplars are dropped.
    pub fn new(exemplars: Vec<Vec<T>>, threshold: T) -> Result<Self> {
        if !(threshold > T::zero()) {
            return Err(TngError::InvalidInput(format!(
                "match threshold must be > 0, got {threshold}"
            )));
        }
        let mut unique: Vec<Vec<T>> = Vec::new();
        for e in exemplars {
            if !unique.contains(&e) {
                unique.push(e);
            }
        }
        if unique.is_empty() || unique.len() > MAX_EXEMPLARS {
            return Err(TngError::InvalidInput(format!(
                "need 1 to {MAX_EXEMPLARS} exemplars, got {}",
                unique.len()
            )));
        }
        let d = unique[0].len();
        if let Some(bad) = unique.iter().find(|e| e.len() != d) {
            return Err(TngError::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        Ok(Self {
            exemplars: unique,
            threshold,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.exemplars[0].len()
    }

    pub fn min_distance(&self, features: &[T]) -> Result<T> {
        if features.len() != self.feature_dim() {
            return Err(TngError::DimensionMismatch {
                expected: self.feature_dim(),
                got: features.len(),
            });
        }
        Ok(self
            .exemplars
            .iter()
            .map(|e| sq_dist(e, features))
            .fold(T::infinity(), T::min)
            .sqrt())
    }

    pub fn matches(&self, obs: &Observation<T>) -> Result<bool> {
        Ok(self.min_distance(&obs.features)? <= self.threshold)
    }
}

/// `h_ij`: recognises the place where the robot may leave trajectory `from`
/// for trajectory `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IntersectionClassifier<T> {
    /// Source and destination vertex indices.
    pub from: usize,
    pub to: usize,
    #[serde(flatten)]
    pub matcher: ExemplarMatcher<T>,
}

/// `r`: recognises the goal place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GoalReacher<T> {
    #[serde(flatten)]
    pub matcher: ExemplarMatcher<T>,
}

pub fn enroll_intersection<T: Scalar>(
    observations: &[Observation<T>],
    from: usize,
    to: usize,
    threshold: T,
) -> Result<IntersectionClassifier<T>> {
    if from == to {
        return Err(TngError::InvalidInput(
            "an intersection joins two different trajectories".into(),
        ));
    }
    Ok(IntersectionClassifier {
        from,
        to,
        matcher: ExemplarMatcher::new(
            observations.iter().map(|o| o.features.clone()).collect(),
            threshold,
        )?,
    })
}

pub fn detect_intersection<T: Scalar>(
    h: &IntersectionClassifier<T>,
    obs: &Observation<T>,
) -> Result<bool> {
    h.matcher.matches(obs)
}

pub fn enroll_goal<T: Scalar>(
    observations: &[Observation<T>],
    threshold: T,
) -> Result<GoalReacher<T>> {
    Ok(GoalReacher {
        matcher: ExemplarMatcher::new(
            observations.iter().map(|o| o.features.clone()).collect(),
            threshold,
        )?,
    })
}

pub fn goal_reached<T: Scalar>(r: &GoalReacher<T>, obs: &Observation<T>) -> Result<bool> {
    r.matcher.matches(obs)
}

/// How places are photographed when enrolling exemplars in a world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct EnrollConfig<T> {
    /// Arc spacing of the extra exemplars either side of the place.
    pub spread: T,
    /// Arc distance past the outermost exemplar at which matching should stop.
    pub window: T,
    /// Sideways offset from the path that should still match.
    pub lateral: T,
    /// Heading offset that should still match.
    pub yaw: T,
    /// Observations averaged per exemplar.
    pub captures: usize,
}

impl<T: Scalar> Default for EnrollConfig<T> {
    fn default() -> Self {
        Self {
            spread: T::lit(0.1),
            window: T::lit(0.05),
            lateral: T::lit(0.2),
            yaw: T::lit(0.1),
            captures: 8,
        }
    }
}

/// Mean of `captures` observations at `pose` and the summed per-feature
/// variance of those captures.
fn capture<T: Scalar>(
    env: &Environment<T>,
    pose: &Pose<T>,
    captures: usize,
    stream: &mut NoiseStream,
) -> (Vec<T>, T) {
    let k = captures.max(1);
    let shots: Vec<Vec<T>> = (0..k).map(|_| env.observe(pose, stream).features).collect();
    let n = T::from_usize_lossy(k);
    let mean: Vec<T> = (0..shots[0].len())
        .map(|i| shots.iter().map(|s| s[i]).sum::<T>() / n)
        .collect();
    let var = if k > 1 {
        shots.iter().map(|s| sq_dist(s, &mean)).sum::<T>() / T::from_usize_lossy(k - 1)
    } else {
        T::zero()
    };
    (mean, var)
}

/// Exemplars at each place (arc positions on `traj`, observed with the
/// trajectory's heading) plus `spread` either side.
///
/// The threshold is calibrated from probe poses `window` past the outer
/// exemplars and `lateral` / `yaw` off each exemplar: a place's reach is the
/// largest probe distance to its exemplars, with the noise of a single
/// observation added in quadrature, and the threshold is the smallest reach
/// over all places.
pub fn enroll_places<T: Scalar>(
    env: &Environment<T>,
    traj: &Trajectory<T>,
    arcs: &[T],
    cfg: &EnrollConfig<T>,
    stream: &mut NoiseStream,
) -> Result<(Vec<Observation<T>>, T)> {
    if arcs.is_empty() {
        return Err(TngError::InvalidInput("no places to enroll".into()));
    }
    let offsets: Vec<T> = if cfg.spread > T::zero() {
        vec![-cfg.spread, T::zero(), cfg.spread]
    } else {
        vec![T::zero()]
    };
    // keep within the exemplar budget by thinning places if needed
    let max_places = MAX_EXEMPLARS / offsets.len();
    let step = arcs.len().div_ceil(max_places);
    let mut exemplars = Vec::new();
    let mut threshold = T::infinity();
    for &a in arcs.iter().step_by(step) {
        let mut place = Vec::new();
        let mut var = T::zero();
        for &o in &offsets {
            let (mean, v) = capture(env, &traj.pose_at(a + o), cfg.captures, stream);
            var = var.max(v);
            place.push(mean);
        }
        let mut probes = vec![
            traj.pose_at(a + offsets[0] - cfg.window),
            traj.pose_at(a + offsets[offsets.len() - 1] + cfg.window),
        ];
        for &o in &offsets {
            let p = traj.pose_at(a + o);
            for sign in [-T::one(), T::one()] {
                probes.push(p.shifted(sign * cfg.lateral, T::zero()));
                probes.push(p.shifted(T::zero(), sign * cfg.yaw));
            }
        }
        let mut reach = T::zero();
        for probe in &probes {
            let (far, _) = capture(env, probe, cfg.captures, stream);
            let d = place
                .iter()
                .map(|e| sq_dist(e, &far))
                .fold(T::infinity(), T::min);
            // the probe's own noise is replaced by its expected contribution
            reach = reach.max((d + var).sqrt());
        }
        threshold = threshold.min(reach);
        exemplars.extend(place.into_iter().map(|m| Observation::new(m, T::zero())));
    }
    Ok((exemplars, threshold.max(T::lit(1e-9))))
}
