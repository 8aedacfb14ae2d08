use serde::Serialize;

use crate::error::{Result, TngError};
use crate::scalar::{wrap_angle, Scalar};
use crate::sim::pose::Pose;

pub type TrajectoryId = u32;

/// Directed waypoint polyline. Closed trajectories wrap from the last waypoint
/// back to the first.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Trajectory<T> {
    pub id: TrajectoryId,
    pub name: String,
    pub closed: bool,
    pub waypoints: Vec<[T; 2]>,
    #[serde(skip)]
    cumulative: Vec<T>,
}

/// Result of projecting a pose onto a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossTrack<T> {
    pub distance: T,
    pub heading_error: T,
    pub arc_position: T,
    pub segment: usize,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(
        id: TrajectoryId,
        name: impl Into<String>,
        closed: bool,
        waypoints: Vec<[T; 2]>,
    ) -> Result<Self> {
        if waypoints.len() < 3 {
            return Err(TngError::Validation(format!(
                "trajectory {id} needs at least 3 waypoints, has {}",
                waypoints.len()
            )));
        }
        if waypoints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(TngError::Validation(format!(
                "trajectory {id} has non-finite waypoints"
            )));
        }
        let n = waypoints.len();
        let seg_count = if closed { n } else { n - 1 };
        let mut cumulative = Vec::with_capacity(seg_count + 1);
        cumulative.push(T::zero());
        for k in 0..seg_count {
            let a = waypoints[k];
            let b = waypoints[(k + 1) % n];
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            if len <= T::zero() {
                return Err(TngError::Validation(format!(
                    "trajectory {id} has repeated consecutive waypoints at index {k}"
                )));
            }
            cumulative.push(cumulative[k] + len);
        }
        Ok(Self {
            id,
            name: name.into(),
            closed,
            waypoints,
            cumulative,
        })
    }

    pub fn length(&self) -> T {
        *self.cumulative.last().expect("at least one segment")
    }

    pub fn segment_count(&self) -> usize {
        self.cumulative.len() - 1
    }

    /// Endpoints and starting arc of segment `k`.
    pub fn segment(&self, k: usize) -> ([T; 2], [T; 2], T) {
        let n = self.waypoints.len();
        (
            self.waypoints[k],
            self.waypoints[(k + 1) % n],
            self.cumulative[k],
        )
    }

    pub fn segment_heading(&self, k: usize) -> T {
        let (a, b, _) = self.segment(k);
        (b[1] - a[1]).atan2(b[0] - a[0])
    }

    /// Arc length of waypoint `k`.
    pub fn waypoint_arc(&self, k: usize) -> T {
        self.cumulative[k]
    }

    /// Wraps (closed) or clamps (open) an arc value into `[0, length]`.
    pub fn normalize_arc(&self, arc: T) -> T {
        let len = self.length();
        if self.closed {
            let r = arc % len;
            if r < T::zero() {
                r + len
            } else {
                r
            }
        } else {
            arc.clamp_to(T::zero(), len)
        }
    }

    /// Signed arc travelled from `from` to `to`; on closed loops the shorter way round.
    pub fn arc_delta(&self, from: T, to: T) -> T {
        let d = to - from;
        if !self.closed {
            return d;
        }
        let len = self.length();
        let half = len / T::lit(2.0);
        let mut w = d % len;
        if w > half {
            w = w - len;
        } else if w <= -half {
            w = w + len;
        }
        w
    }

    fn locate(&self, arc: T) -> usize {
        let arc = self.normalize_arc(arc);
        let seg = self.segment_count();
        // last segment whose start is <= arc
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&arc).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(seg - 1),
            Err(i) => (i.saturating_sub(1)).min(seg - 1),
        }
    }

    /// Point and tangent heading at an arc position.
    pub fn point_at(&self, arc: T) -> ([T; 2], T) {
        let arc = self.normalize_arc(arc);
        let k = self.locate(arc);
        let (a, b, start) = self.segment(k);
        let len = self.cumulative[k + 1] - start;
        let t = ((arc - start) / len).clamp_to(T::zero(), T::one());
        (
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
            self.segment_heading(k),
        )
    }

    /// Pose on the trajectory at `arc`, heading along the path.
    pub fn pose_at(&self, arc: T) -> Pose<T> {
        let (p, h) = self.point_at(arc);
        Pose::new(p[0], p[1], h)
    }

    /// Nearest point on the polyline: unsigned distance, heading error relative to
    /// the local tangent and the arc position of the foot point. Ties between
    /// equally near segments go to the one best aligned with the pose heading.
    pub fn cross_track(&self, pose: &Pose<T>) -> CrossTrack<T> {
        let tie = T::lit(1e-12);
        let mut best: Option<CrossTrack<T>> = None;
        for k in 0..self.segment_count() {
            let (a, b, start) = self.segment(k);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len2 = dx * dx + dy * dy;
            let t = (((pose.x - a[0]) * dx + (pose.y - a[1]) * dy) / len2)
                .clamp_to(T::zero(), T::one());
            let fx = a[0] + t * dx;
            let fy = a[1] + t * dy;
            let distance = (pose.x - fx).hypot(pose.y - fy);
            let heading_error = wrap_angle(pose.theta - dy.atan2(dx));
            let cand = CrossTrack {
                distance,
                heading_error,
                arc_position: self.normalize_arc(start + t * len2.sqrt()),
                segment: k,
            };
            best = match best {
                None => Some(cand),
                Some(cur) if cand.distance < cur.distance - tie => Some(cand),
                Some(cur)
                    if (cand.distance - cur.distance).abs() <= tie
                        && cand.heading_error.abs() < cur.heading_error.abs() =>
                {
                    Some(cand)
                }
                keep => keep,
            };
        }
        best.expect("trajectory has segments")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square() -> Trajectory<f64> {
        Trajectory::new(
            0,
            "square",
            true,
            vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]],
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(Trajectory::<f64>::new(1, "short", true, vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(
            Trajectory::new(1, "dup", false, vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).is_err()
        );
        assert!(
            Trajectory::new(1, "wrap", true, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]).is_err()
        );
        assert!(
            Trajectory::new(1, "open", false, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]).is_ok()
        );
    }

    #[test]
    fn lengths_and_points() {
        let t = square();
        assert_eq!(t.length(), 8.0);
        let (p, h) = t.point_at(3.0);
        assert_eq!(p, [2.0, 1.0]);
        assert!((h - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(t.point_at(9.0).0, [1.0, 0.0]);
        assert_eq!(t.arc_delta(7.5, 0.5), 1.0);
        assert_eq!(t.arc_delta(0.5, 7.5), -1.0);
    }

    #[test]
    fn on_waypoint_aligned() {
        let t = square();
        let ct = t.cross_track(&Pose::new(2.0, 0.0, std::f64::consts::FRAC_PI_2));
        assert_eq!(ct.distance, 0.0);
        assert_eq!(ct.heading_error, 0.0);
        assert_eq!(ct.arc_position, 2.0);
    }

    #[test]
    fn perpendicular_offset() {
        let t = square();
        let ct = t.cross_track(&Pose::new(0.7, 0.5, 0.0));
        assert!((ct.distance - 0.5).abs() < 1e-15);
        assert_eq!(ct.heading_error, 0.0);
        assert!((ct.arc_position - 0.7).abs() < 1e-15);
    }

    /// Minimum distance over samples every millimetre of the polyline, including
    /// every waypoint.
    fn dense_distance(t: &Trajectory<f64>, x: f64, y: f64) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..t.segment_count() {
            let (a, b, _) = t.segment(k);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let n = (len / 1e-3).ceil() as usize;
            for i in 0..=n {
                let s = i as f64 / n as f64;
                let px = a[0] + s * (b[0] - a[0]);
                let py = a[1] + s * (b[1] - a[1]);
                best = best.min(((x - px).powi(2) + (y - py).powi(2)).sqrt());
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn distance_matches_dense_sampling(arc in 0.0f64..8.0, off in 0.25f64..2.0, th in -3.0f64..3.0) {
            // outside the loop, so the true distance stays >= 0.25 and the
            // 1 mm sampling error stays below 1e-6
            let t = square();
            let (p, h) = t.point_at(arc);
            let (x, y) = (p[0] + off * h.sin(), p[1] - off * h.cos());
            let ct = t.cross_track(&Pose::new(x, y, th));
            prop_assert!((ct.distance - dense_distance(&t, x, y)).abs() < 1e-6);
        }

        #[test]
        fn zero_distance_iff_on_polyline(arc in 0.0f64..8.0, off in -1.0f64..1.0) {
            let t = square();
            let (p, h) = t.point_at(arc);
            let on = t.cross_track(&Pose::new(p[0], p[1], h));
            prop_assert!(on.distance < 1e-9);
            prop_assert!(on.heading_error.abs() < 1e-9);
            let q = Pose::new(p[0] - off * h.sin(), p[1] + off * h.cos(), h);
            let ct = t.cross_track(&q);
            if off.abs() > 1e-6 {
                prop_assert!(ct.distance > 1e-9);
            }
        }
    }
}
