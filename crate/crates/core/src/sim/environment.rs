use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::scalar::Scalar;
use crate::sim::featurizer::{
    derive_seed, Bounds, Encoder, FeaturizerConfig, Landmark, NoiseStream, Observation,
};
use crate::sim::pose::Pose;
use crate::sim::trajectory::{Trajectory, TrajectoryId};

pub const ENV_FORMAT: &str = "tng-env/1";
/// Tolerance for a point to count as lying on a polyline.
pub const POLYLINE_TOLERANCE: f64 = 1e-6;
/// Crossings closer than this are reported once.
pub const INTERSECTION_DEDUP_RADIUS: f64 = 0.05;
/// Free space between the outermost geometry and the arena walls.
pub const ARENA_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Intersection<T> {
    pub from_trajectory: TrajectoryId,
    pub to_trajectory: TrajectoryId,
    pub point: [T; 2],
    pub from_arc: T,
    pub to_arc: T,
}

/// On-disk environment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct EnvironmentSpec<T> {
    pub format: String,
    pub trajectories: Vec<TrajectorySpec<T>>,
    #[serde(default)]
    pub landmarks: Vec<[T; 3]>,
    pub featurizer: FeaturizerConfig<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
    /// Directed crossings to drop, as `[from, to]` trajectory ids.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suppress: Vec<[TrajectoryId; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct TrajectorySpec<T> {
    pub id: TrajectoryId,
    #[serde(default)]
    pub name: String,
    pub closed: bool,
    pub waypoints: Vec<[T; 2]>,
}

impl<T: Scalar> EnvironmentSpec<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| TngError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if spec.format != ENV_FORMAT {
            return Err(TngError::Parse {
                location: "field `format`".into(),
                message: format!("expected \"{ENV_FORMAT}\", found \"{}\"", spec.format),
            });
        }
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("environment spec serialises")
    }
}

/// Immutable world: trajectories, their crossings, landmarks and the encoder.
#[derive(Debug, Clone)]
pub struct Environment<T> {
    pub trajectories: Vec<Trajectory<T>>,
    pub intersections: Vec<Intersection<T>>,
    pub landmarks: Vec<Landmark<T>>,
    pub featurizer: FeaturizerConfig<T>,
    pub noise_seed: u64,
    pub bounds: Bounds<T>,
    pub navigable: bool,
    suppress: Vec<[TrajectoryId; 2]>,
    encoder: Encoder<T>,
}

impl<T: Scalar> PartialEq for Environment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.trajectories == other.trajectories
            && self.intersections == other.intersections
            && self.landmarks == other.landmarks
            && self.featurizer == other.featurizer
            && self.noise_seed == other.noise_seed
            && self.suppress == other.suppress
    }
}

impl<T: Scalar> Environment<T> {
    pub fn build(spec: &EnvironmentSpec<T>) -> Result<Self> {
        if spec.trajectories.is_empty() {
            return Err(TngError::Validation(
                "environment has no trajectories".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for t in &spec.trajectories {
            if !seen.insert(t.id) {
                return Err(TngError::Validation(format!(
                    "duplicate trajectory id {}",
                    t.id
                )));
            }
        }
        let trajectories = spec
            .trajectories
            .iter()
            .map(|t| Trajectory::new(t.id, t.name.clone(), t.closed, t.waypoints.clone()))
            .collect::<Result<Vec<_>>>()?;
        for pair in &spec.suppress {
            if !seen.contains(&pair[0]) || !seen.contains(&pair[1]) {
                return Err(TngError::Validation(format!(
                    "suppressed crossing {pair:?} references an unknown trajectory"
                )));
            }
        }
        let landmarks: Vec<Landmark<T>> = spec
            .landmarks
            .iter()
            .map(|l| Landmark {
                x: l[0],
                y: l[1],
                signature: l[2],
            })
            .collect();
        if landmarks
            .iter()
            .any(|l| !(l.x.is_finite() && l.y.is_finite() && l.signature.is_finite()))
        {
            return Err(TngError::Validation("non-finite landmark".into()));
        }
        let encoder = Encoder::new(spec.featurizer.clone())?;
        let bounds = arena_bounds(&trajectories, &landmarks);
        let intersections = find_intersections(&trajectories, &spec.suppress);
        let navigable = strongly_connected(&trajectories, &intersections);
        Ok(Self {
            trajectories,
            intersections,
            landmarks,
            featurizer: spec.featurizer.clone(),
            noise_seed: spec
                .noise_seed
                .unwrap_or_else(|| derive_seed(spec.featurizer.seed, 0x6e6f697365)),
            bounds,
            navigable,
            suppress: spec.suppress.clone(),
            encoder,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::build(&EnvironmentSpec::from_json(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| TngError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_spec(&self) -> EnvironmentSpec<T> {
        EnvironmentSpec {
            format: ENV_FORMAT.into(),
            trajectories: self
                .trajectories
                .iter()
                .map(|t| TrajectorySpec {
                    id: t.id,
                    name: t.name.clone(),
                    closed: t.closed,
                    waypoints: t.waypoints.clone(),
                })
                .collect(),
            landmarks: self
                .landmarks
                .iter()
                .map(|l| [l.x, l.y, l.signature])
                .collect(),
            featurizer: self.featurizer.clone(),
            noise_seed: Some(self.noise_seed),
            suppress: self.suppress.clone(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.featurizer.feature_dim
    }

    pub fn index_of(&self, id: TrajectoryId) -> Option<usize> {
        self.trajectories.iter().position(|t| t.id == id)
    }

    pub fn trajectory(&self, id: TrajectoryId) -> Option<&Trajectory<T>> {
        self.trajectories.iter().find(|t| t.id == id)
    }

    /// Copy with a different observation noise scale.
    pub fn with_noise(&self, noise_sigma: T) -> Result<Self> {
        let mut spec = self.to_spec();
        spec.featurizer.noise_sigma = noise_sigma;
        Self::build(&spec)
    }

    /// Observation at `pose` with noise drawn from `stream`; timestamp 0.
    pub fn observe(&self, pose: &Pose<T>, stream: &mut NoiseStream) -> Observation<T> {
        let mut features = self.encoder.encode(pose, &self.bounds, &self.landmarks);
        let sigma = self.featurizer.noise_sigma;
        if sigma > T::zero() {
            for f in &mut features {
                *f = *f + sigma * stream.gaussian::<T>();
            }
        }
        Observation::new(features, T::zero())
    }

    pub fn in_bounds(&self, pose: &Pose<T>) -> bool {
        self.bounds.contains(pose.x, pose.y)
    }

    /// Directed crossings leaving trajectory `id`.
    pub fn crossings_from(&self, id: TrajectoryId) -> impl Iterator<Item = &Intersection<T>> {
        self.intersections
            .iter()
            .filter(move |i| i.from_trajectory == id)
    }
}

fn arena_bounds<T: Scalar>(trajectories: &[Trajectory<T>], landmarks: &[Landmark<T>]) -> Bounds<T> {
    let mut min = [T::infinity(); 2];
    let mut max = [T::neg_infinity(); 2];
    let points = trajectories
        .iter()
        .flat_map(|t| t.waypoints.iter().copied())
        .chain(landmarks.iter().map(|l| [l.x, l.y]));
    for p in points {
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let m = T::lit(ARENA_MARGIN);
    Bounds {
        min: [min[0] - m, min[1] - m],
        max: [max[0] + m, max[1] + m],
    }
}

fn cross2<T: Scalar>(a: [T; 2], b: [T; 2]) -> T {
    a[0] * b[1] - a[1] * b[0]
}

/// Crossing of segments `p0p1` and `q0q1` as `(point, t along p, u along q)`.
/// Parallel segments never cross.
pub(crate) fn segment_crossing<T: Scalar>(
    p0: [T; 2],
    p1: [T; 2],
    q0: [T; 2],
    q1: [T; 2],
) -> Option<([T; 2], T, T)> {
    let d1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let d2 = [q1[0] - q0[0], q1[1] - q0[1]];
    let denom = cross2(d1, d2);
    let l1 = d1[0].hypot(d1[1]);
    let l2 = d2[0].hypot(d2[1]);
    if denom.abs() <= T::lit(1e-12) * l1 * l2 {
        return None;
    }
    let w = [q0[0] - p0[0], q0[1] - p0[1]];
    let t = cross2(w, d2) / denom;
    let u = cross2(w, d1) / denom;
    let tol = T::lit(POLYLINE_TOLERANCE);
    let (tt, tu) = (tol / l1, tol / l2);
    if t < -tt || t > T::one() + tt || u < -tu || u > T::one() + tu {
        return None;
    }
    let t = t.clamp_to(T::zero(), T::one());
    let u = u.clamp_to(T::zero(), T::one());
    Some(([p0[0] + t * d1[0], p0[1] + t * d1[1]], t, u))
}

fn find_intersections<T: Scalar>(
    trajectories: &[Trajectory<T>],
    suppress: &[[TrajectoryId; 2]],
) -> Vec<Intersection<T>> {
    let dedup = T::lit(INTERSECTION_DEDUP_RADIUS);
    let mut out = Vec::new();
    for (ia, a) in trajectories.iter().enumerate() {
        for b in trajectories.iter().skip(ia + 1) {
            // (point, arc on a, arc on b)
            let mut crossings: Vec<([T; 2], T, T)> = Vec::new();
            for sa in 0..a.segment_count() {
                let (p0, p1, arc_a) = a.segment(sa);
                let la = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
                for sb in 0..b.segment_count() {
                    let (q0, q1, arc_b) = b.segment(sb);
                    let lb = (q1[0] - q0[0]).hypot(q1[1] - q0[1]);
                    if let Some((pt, t, u)) = segment_crossing(p0, p1, q0, q1) {
                        let dup = crossings
                            .iter()
                            .any(|(c, _, _)| (c[0] - pt[0]).hypot(c[1] - pt[1]) <= dedup);
                        if !dup {
                            crossings.push((
                                pt,
                                a.normalize_arc(arc_a + t * la),
                                b.normalize_arc(arc_b + u * lb),
                            ));
                        }
                    }
                }
            }
            for (pt, arc_a, arc_b) in crossings {
                if !suppress.contains(&[a.id, b.id]) {
                    out.push(Intersection {
                        from_trajectory: a.id,
                        to_trajectory: b.id,
                        point: pt,
                        from_arc: arc_a,
                        to_arc: arc_b,
                    });
                }
                if !suppress.contains(&[b.id, a.id]) {
                    out.push(Intersection {
                        from_trajectory: b.id,
                        to_trajectory: a.id,
                        point: pt,
                        from_arc: arc_b,
                        to_arc: arc_a,
                    });
                }
            }
        }
    }
    out
}

/// Strong connectivity of the directed trajectory graph induced by crossings.
pub fn strongly_connected<T: Scalar>(
    trajectories: &[Trajectory<T>],
    intersections: &[Intersection<T>],
) -> bool {
    let n = trajectories.len();
    let idx = |id: TrajectoryId| trajectories.iter().position(|t| t.id == id);
    let mut fwd = vec![Vec::new(); n];
    let mut rev = vec![Vec::new(); n];
    for i in intersections {
        if let (Some(a), Some(b)) = (idx(i.from_trajectory), idx(i.to_trajectory)) {
            fwd[a].push(b);
            rev[b].push(a);
        }
    }
    let reach_all = |adj: &Vec<Vec<usize>>| {
        let mut seen = vec![false; n];
        let mut q = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    n > 0 && reach_all(&fwd) && reach_all(&rev)
}
