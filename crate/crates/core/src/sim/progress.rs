use crate::scalar::Scalar;
use crate::sim::{Pose, Trajectory};

/// Unwrapped arc progress along one trajectory, for lap counting.
#[derive(Debug, Clone)]
pub struct ProgressTracker<T> {
    last_arc: T,
    progress: T,
}

impl<T: Scalar> ProgressTracker<T> {
    pub fn new(traj: &Trajectory<T>, pose: &Pose<T>) -> Self {
        Self {
            last_arc: traj.cross_track(pose).arc_position,
            progress: T::zero(),
        }
    }

    /// Advances with the pose's new foot point; returns total progress in metres.
    pub fn update(&mut self, traj: &Trajectory<T>, pose: &Pose<T>) -> T {
        let arc = traj.cross_track(pose).arc_position;
        self.progress = self.progress + traj.arc_delta(self.last_arc, arc);
        self.last_arc = arc;
        self.progress
    }

    pub fn progress(&self) -> T {
        self.progress
    }

    /// Completed laps (closed) or passes (open).
    pub fn laps(&self, traj: &Trajectory<T>) -> usize {
        let l = (self.progress / traj.length()).floor();
        if l <= T::zero() {
            0
        } else {
            l.to_usize().unwrap_or(0)
        }
    }
}
