//! Direction-of-movement controller: a ridge regressor predicts the horizontal
//! position of a target on a virtual image line, a PID loop steers to centre
//! it, and a feature-statistics confidence model makes it abstain on
//! unfamiliar input.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::imitation::ridge::solve_closed_form;
use crate::imitation::Dataset;
use crate::linalg::Matrix;
use crate::policy::{Action, Policy};
use crate::scalar::Scalar;
use crate::sim::{MotorCommand, Observation, Pose};

pub const DEFAULT_WIDTH: f64 = 896.0;
pub const DEFAULT_SHIFT: f64 = 150.0;
pub const DEFAULT_DEAD_BAND: f64 = 0.05;
pub const DEFAULT_CONFIDENCE_FLOOR: f64 = 0.3;
/// Confidence assigned to the least typical training observation.
pub const TRAINING_CONFIDENCE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DirectionLabel<T> {
    /// Target centre on the virtual image line, in pixels.
    pub x: T,
    pub confidence: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Steering {
    Left,
    None,
    Right,
}

/// Discretised turn direction of an expert command; `|angular| <= dead_band`
/// counts as straight.
pub fn steering_of<T: Scalar>(cmd: &MotorCommand<T>, dead_band: T) -> Steering {
    if cmd.angular.abs() <= dead_band {
        Steering::None
    } else if cmd.angular > T::zero() {
        Steering::Left
    } else {
        Steering::Right
    }
}

/// Training label for one expert command: centred when driving straight,
/// shifted by `shift` pixels towards the side the expert turns to.
pub fn label_direction<T: Scalar>(
    expert_cmd: &MotorCommand<T>,
    width: T,
    shift: T,
    dead_band: T,
) -> Result<DirectionLabel<T>> {
    if !(width > T::zero()) {
        return Err(TngError::InvalidInput(format!(
            "image width must be > 0, got {width}"
        )));
    }
    let c = width / T::lit(2.0);
    let x = match steering_of(expert_cmd, dead_band) {
        Steering::None => c,
        Steering::Left => c - shift,
        Steering::Right => c + shift,
    };
    Ok(DirectionLabel {
        x,
        confidence: T::one(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct DetectorConfig<T> {
    pub width: T,
    pub shift: T,
    pub dead_band: T,
    pub lambda: T,
    /// Lower bound on per-feature standard deviation in the confidence model.
    pub sigma_floor: T,
    /// Per-feature deviation, in standard deviations, ignored by the
    /// confidence model.
    pub tolerance: T,
}

impl<T: Scalar> Default for DetectorConfig<T> {
    fn default() -> Self {
        Self {
            width: T::lit(DEFAULT_WIDTH),
            shift: T::lit(DEFAULT_SHIFT),
            dead_band: T::lit(DEFAULT_DEAD_BAND),
            lambda: T::lit(1e-4),
            sigma_floor: T::lit(0.05),
            tolerance: T::zero(),
        }
    }
}

impl<T: Scalar> DetectorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > T::zero()) {
            return Err(TngError::InvalidInput("width must be > 0".into()));
        }
        if !(self.shift >= T::zero() && self.shift < self.width / T::lit(2.0)) {
            return Err(TngError::InvalidInput(format!(
                "shift must lie in [0, width/2), got {}",
                self.shift
            )));
        }
        if !(self.lambda > T::zero()) {
            return Err(TngError::InvalidInput("lambda must be > 0".into()));
        }
        if !(self.tolerance >= T::zero()) {
            return Err(TngError::InvalidInput("tolerance must be >= 0".into()));
        }
        if !(self.sigma_floor > T::zero()) {
            return Err(TngError::InvalidInput("sigma floor must be > 0".into()));
        }
        Ok(())
    }
}

/// Diagonal feature statistics. Each feature's z-score counts only beyond
/// `tolerance` standard deviations; distance is the root mean square of those
/// excesses divided by `scale`, and confidence is `exp(-d²/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConfidenceModel<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub tolerance: T,
    pub scale: T,
}

impl<T: Scalar> ConfidenceModel<T> {
    fn rms_z(&self, x: &[T]) -> T {
        let n = T::from_usize_lossy(x.len().max(1));
        let s: T = x
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((&v, &m), &s)| {
                let z = ((v - m).abs() / s - self.tolerance).max(T::zero());
                z * z
            })
            .sum();
        (s / n).sqrt()
    }

    pub fn distance(&self, x: &[T]) -> T {
        self.rms_z(x) / self.scale
    }

    pub fn confidence(&self, x: &[T]) -> T {
        let d = self.distance(x);
        (-(d * d) / T::lit(2.0)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DirectionDetector<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub confidence: ConfidenceModel<T>,
    pub width: T,
    pub shift: T,
    pub featurizer_hash: String,
}

/// Label balance of a detector's training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub left: usize,
    pub none: usize,
    pub right: usize,
}

impl ClassCounts {
    /// True unless all three steering classes are present.
    pub fn imbalanced(&self) -> bool {
        self.left == 0 || self.none == 0 || self.right == 0
    }
}

impl<T: Scalar> DirectionDetector<T> {
    pub fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    /// Unclamped regressor output.
    pub fn raw(&self, features: &[T]) -> Result<T> {
        if features.len() != self.weights.len() {
            return Err(TngError::DimensionMismatch {
                expected: self.weights.len(),
                got: features.len(),
            });
        }
        Ok(crate::linalg::dot(&self.weights, features) + self.bias)
    }
}

pub fn detect<T: Scalar>(
    d: &DirectionDetector<T>,
    obs: &Observation<T>,
) -> Result<DirectionLabel<T>> {
    let raw = d.raw(&obs.features)?;
    Ok(DirectionLabel {
        x: raw.max(T::zero()).min(d.width),
        confidence: d.confidence.confidence(&obs.features),
    })
}

/// Fits the direction regressor to expert-derived labels and calibrates the
/// confidence model so the least typical training observation scores
/// [`TRAINING_CONFIDENCE`].
pub fn train_detector<T: Scalar>(
    data: &Dataset<T>,
    featurizer_hash: &str,
    cfg: &DetectorConfig<T>,
) -> Result<(DirectionDetector<T>, ClassCounts)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(TngError::EmptyDataset(
            "cannot train a detector on no samples".into(),
        ));
    }
    let (x, _) = data.to_matrices()?;
    let mut counts = ClassCounts {
        left: 0,
        none: 0,
        right: 0,
    };
    let mut y = Vec::with_capacity(data.len());
    for s in data.samples() {
        match steering_of(&s.command, cfg.dead_band) {
            Steering::Left => counts.left += 1,
            Steering::None => counts.none += 1,
            Steering::Right => counts.right += 1,
        }
        y.push(label_direction(&s.command, cfg.width, cfg.shift, cfg.dead_band)?.x);
    }
    let y = Matrix::from_vec(data.len(), 1, y)?;
    let params = solve_closed_form(&x, &y, cfg.lambda, true)?;
    let d = x.cols();
    let n = T::from_usize_lossy(x.rows());
    let mut mean = vec![T::zero(); d];
    for r in 0..x.rows() {
        for (m, &v) in mean.iter_mut().zip(x.row(r)) {
            *m = *m + v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / n);
    let mut var = vec![T::zero(); d];
    for r in 0..x.rows() {
        for ((s, &v), &m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            *s = *s + (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|v| (v / n).sqrt().max(cfg.sigma_floor))
        .collect();
    let mut model = ConfidenceModel {
        mean,
        std,
        tolerance: cfg.tolerance,
        scale: T::one(),
    };
    let worst = (0..x.rows())
        .map(|r| model.rms_z(x.row(r)))
        .fold(T::zero(), T::max);
    // exp(-(worst/scale)²/2) = TRAINING_CONFIDENCE, but never sharper than
    // one standard deviation per unit distance
    let k = (T::lit(-2.0) * T::lit(TRAINING_CONFIDENCE).ln()).sqrt();
    model.scale = (worst / k).max(T::one());
    Ok((
        DirectionDetector {
            weights: (0..d).map(|i| params.weights[(i, 0)]).collect(),
            bias: params.bias[0],
            confidence: model,
            width: cfg.width,
            shift: cfg.shift,
            featurizer_hash: featurizer_hash.to_string(),
        },
        counts,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct PidGains<T> {
    pub kp: T,
    pub ki: T,
    pub kd: T,
    pub integral_limit: T,
    /// Weight of the previous derivative estimate in a first-order low-pass
    /// filter on the derivative term; 0 uses the raw difference.
    #[serde(default)]
    pub derivative_smoothing: T,
}

impl<T: Scalar> Default for PidGains<T> {
    fn default() -> Self {
        Self {
            kp: T::lit(0.01),
            ki: T::lit(0.001),
            kd: T::lit(0.005),
            integral_limit: T::lit(300.0),
            derivative_smoothing: T::lit(0.7),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PidState<T> {
    pub gains: PidGains<T>,
    pub integral: T,
    pub prev_error: Option<T>,
    #[serde(default)]
    pub derivative: T,
}

impl<T: Scalar> PidState<T> {
    pub fn new(gains: PidGains<T>) -> Result<Self> {
        if gains.kp < T::zero() || gains.ki < T::zero() || gains.kd < T::zero() {
            return Err(TngError::InvalidInput(
                "PID gains must be non-negative".into(),
            ));
        }
        if !(T::zero()..T::one()).contains(&gains.derivative_smoothing) {
            return Err(TngError::InvalidInput(
                "derivative smoothing must lie in [0, 1)".into(),
            ));
        }
        if !(gains.integral_limit >= T::zero()) {
            return Err(TngError::InvalidInput("integral limit must be >= 0".into()));
        }
        Ok(Self {
            gains,
            integral: T::zero(),
            prev_error: None,
            derivative: T::zero(),
        })
    }

    pub fn reset(&mut self) {
        self.integral = T::zero();
        self.prev_error = None;
        self.derivative = T::zero();
    }

    /// `u = -(kp·e + ki·∫e + kd·ė)` with the integral clamped to the limit and
    /// no derivative kick on the first call.
    pub fn step(&mut self, error: T, dt: T) -> Result<T> {
        if !(dt > T::zero()) {
            return Err(TngError::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        let g = &self.gains;
        self.integral = (self.integral + error * dt).clamp_to(-g.integral_limit, g.integral_limit);
        let raw = self.prev_error.map_or(T::zero(), |p| (error - p) / dt);
        let a = g.derivative_smoothing;
        self.derivative = a * self.derivative + (T::one() - a) * raw;
        self.prev_error = Some(error);
        Ok(-(g.kp * error + g.ki * self.integral + g.kd * self.derivative))
    }
}

pub fn pid_step<T: Scalar>(pid: &mut PidState<T>, error: T, dt: T) -> Result<T> {
    pid.step(error, dt)
}

/// Maps an observation (or, for oracle studies, a pose) to a direction label.
pub trait DirectionSource<T: Scalar> {
    fn direction(&self, obs: &Observation<T>, pose: &Pose<T>) -> Result<DirectionLabel<T>>;
    fn width(&self) -> T;
}

impl<T: Scalar> DirectionSource<T> for DirectionDetector<T> {
    fn direction(&self, obs: &Observation<T>, _pose: &Pose<T>) -> Result<DirectionLabel<T>> {
        detect(self, obs)
    }

    fn width(&self) -> T {
        self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar, D: Serialize + serde::de::DeserializeOwned")]
pub struct DetectionController<T, D = DirectionDetector<T>> {
    pub detector: D,
    pub pid: PidState<T>,
    pub cruise_speed: T,
    pub confidence_floor: T,
}

impl<T: Scalar, D: DirectionSource<T>> DetectionController<T, D> {
    pub fn new(
        detector: D,
        gains: PidGains<T>,
        cruise_speed: T,
        confidence_floor: T,
    ) -> Result<Self> {
        if !(cruise_speed > T::zero()) {
            return Err(TngError::InvalidInput("cruise speed must be > 0".into()));
        }
        if !(T::zero()..=T::one()).contains(&confidence_floor) {
            return Err(TngError::InvalidInput(
                "confidence floor must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            detector,
            pid: PidState::new(gains)?,
            cruise_speed,
            confidence_floor,
        })
    }

    /// Steers to centre the label; abstains below the confidence floor.
    pub fn act_on(&mut self, label: DirectionLabel<T>, dt: T) -> Result<Action<T>> {
        if label.confidence < self.confidence_floor {
            return Ok(Action::Abstain);
        }
        let half = self.detector.width() / T::lit(2.0);
        let e = label.x - half;
        let angular = self.pid.step(e, dt)?;
        let linear = self.cruise_speed * (T::one() - e.abs() / half).max(T::zero());
        Ok(Action::Command(
            MotorCommand::new(linear, angular).clipped(),
        ))
    }
}

pub fn detection_act<T: Scalar, D: DirectionSource<T>>(
    c: &mut DetectionController<T, D>,
    obs: &Observation<T>,
    pose: &Pose<T>,
    dt: T,
) -> Result<Action<T>> {
    Policy::act(c, obs, pose, dt)
}

impl<T: Scalar, D: DirectionSource<T>> Policy<T> for DetectionController<T, D> {
    fn act(&mut self, obs: &Observation<T>, pose: &Pose<T>, dt: T) -> Result<Action<T>> {
        let label = self.detector.direction(obs, pose)?;
        self.act_on(label, dt)
    }

    fn reset(&mut self) {
        self.pid.reset();
    }
}

/// Geometric stand-in for a perfect detector: pinhole projection of the
/// point `lookahead` metres ahead along the trajectory onto an image line of
/// `width` pixels with the given horizontal field of view.
#[derive(Debug, Clone)]
pub struct OracleDirection<T> {
    pub trajectory: crate::sim::Trajectory<T>,
    pub lookahead: T,
    pub width: T,
    pub fov: T,
}

impl<T: Scalar> DirectionSource<T> for OracleDirection<T> {
    fn direction(&self, _obs: &Observation<T>, pose: &Pose<T>) -> Result<DirectionLabel<T>> {
        let alpha =
            crate::imitation::expert::lookahead_bearing(pose, &self.trajectory, self.lookahead);
        let half = self.width / T::lit(2.0);
        let f = half / (self.fov / T::lit(2.0)).tan();
        // beyond the field of view the target pins to the image edge
        let lim = self.fov / T::lit(2.0);
        let x = half - f * alpha.clamp_to(-lim, lim).tan();
        Ok(DirectionLabel {
            x: x.max(T::zero()).min(self.width),
            confidence: T::one(),
        })
    }

    fn width(&self) -> T {
        self.width
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Trajectory;

    fn cmd(a: f64) -> MotorCommand<f64> {
        MotorCommand::new(0.5, a)
    }

    #[test]
    fn labels() {
        let l = |a| label_direction(&cmd(a), 896.0, 150.0, 0.05).unwrap().x;
        assert_eq!(l(0.0), 448.0);
        assert_eq!(l(0.4), 298.0);
        assert_eq!(l(-0.4), 598.0);
        assert_eq!(l(0.05), 448.0);
        assert_eq!(l(-0.05), 448.0);
        assert!(label_direction(&cmd(0.0), 0.0, 150.0, 0.05).is_err());
    }

    #[test]
    fn pid_examples() {
        let mut p = PidState::new(PidGains::default()).unwrap();
        assert_eq!(p.step(0.0, 0.1).unwrap(), 0.0);
        let mut p: PidState<f64> = PidState::new(PidGains {
            kp: 0.01,
            ki: 0.0,
            kd: 0.0,
            integral_limit: 100.0,
            derivative_smoothing: 0.0,
        })
        .unwrap();
        assert!((p.step(100.0, 0.1).unwrap() + 1.0).abs() < 1e-12);
        let mut p: PidState<f64> = PidState::new(PidGains {
            kp: 1.0,
            ki: 0.5,
            kd: 0.0,
            integral_limit: 100.0,
            derivative_smoothing: 0.0,
        })
        .unwrap();
        let mut u = 0.0f64;
        for _ in 0..3 {
            u = p.step(1.0, 1.0).unwrap();
        }
        assert!((u + 2.5).abs() < 1e-12);
    }

    fn detector(w: Vec<f64>, bias: f64) -> DirectionDetector<f64> {
        let d = w.len();
        DirectionDetector {
            weights: w,
            bias,
            confidence: ConfidenceModel {
                mean: vec![0.0; d],
                std: vec![1.0; d],
                tolerance: 3.0,
                scale: 1.0,
            },
            width: 896.0,
            shift: 150.0,
            featurizer_hash: String::new(),
        }
    }

    #[test]
    fn detect_clamps() {
        let d = detector(vec![0.0, 0.0], 448.0);
        let o = Observation::new(vec![3.0, -7.0], 0.0);
        assert_eq!(detect(&d, &o).unwrap().x, 448.0);
        let d = detector(vec![0.0, 0.0], -50.0);
        assert_eq!(detect(&d, &o).unwrap().x, 0.0);
        assert!(detect(&d, &Observation::new(vec![1.0], 0.0)).is_err());
    }

    #[test]
    fn act_examples() {
        let mut c =
            DetectionController::new(detector(vec![0.0], 448.0), PidGains::default(), 0.5, 0.3)
                .unwrap();
        let a = c
            .act_on(
                DirectionLabel {
                    x: 448.0,
                    confidence: 1.0,
                },
                0.1,
            )
            .unwrap();
        assert_eq!(a, Action::Command(MotorCommand::new(0.5, 0.0)));
        let a = c
            .act_on(
                DirectionLabel {
                    x: 448.0,
                    confidence: 0.0,
                },
                0.1,
            )
            .unwrap();
        assert!(a.is_abstain());
        c.reset();
        let a = c
            .act_on(
                DirectionLabel {
                    x: 896.0,
                    confidence: 1.0,
                },
                0.1,
            )
            .unwrap();
        let m = a.command();
        assert_eq!(m.linear, 0.0);
        assert!(m.angular < 0.0);
    }

    #[test]
    fn right_shifted_target_reduces_error_in_closed_loop() {
        // robot yawed left of a straight path sees the target to its right
        let t =
            Trajectory::new(0, "line", false, vec![[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]]).unwrap();
        let oracle = OracleDirection {
            trajectory: t,
            lookahead: 0.5,
            width: 896.0,
            fov: std::f64::consts::FRAC_PI_2,
        };
        let mut c = DetectionController::new(oracle, PidGains::default(), 0.5, 0.3).unwrap();
        let mut pose = Pose::new(1.0, 0.0, 0.3);
        let obs = Observation::new(vec![], 0.0);
        let e0 = c.detector.direction(&obs, &pose).unwrap().x - 448.0;
        assert!(e0 > 0.0);
        for _ in 0..5 {
            let a = Policy::act(&mut c, &obs, &pose, 0.1).unwrap();
            pose = crate::sim::step_unicycle(pose, a.command(), 0.1).unwrap();
        }
        let e1 = c.detector.direction(&obs, &pose).unwrap().x - 448.0;
        assert!(e1.abs() < e0.abs());
    }
}
