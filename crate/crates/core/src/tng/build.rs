//! End-to-end training of a navigation graph from a simulated environment.

use serde::{Deserialize, Serialize};

use crate::detection::{
    train_detector, DetectionController, DetectorConfig, PidGains, DEFAULT_CONFIDENCE_FLOOR,
};
use crate::error::{Result, TngError};
use crate::imitation::{
    augment_dataset, collect_demonstrations, dagger_iterate, junction_entries, train_regression,
    AugmentConfig, Dataset, ExpertConfig, TrainConfig,
};
use crate::scalar::Scalar;
use crate::sim::{derive_seed, Environment, NoiseStream, Observation, Pose, Trajectory};
use crate::tng::classifier::{train_trajectory_classifier, ClassifierConfig};
use crate::tng::exemplar::{enroll_intersection, enroll_places, EnrollConfig};
use crate::tng::graph::{edge_weight, Controller, Edge, TngGraph, Vertex, WeightMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    #[default]
    Regression,
    Detection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct PipelineConfig<T> {
    pub laps: usize,
    pub dt: T,
    pub expert: ExpertConfig<T>,
    pub augment: AugmentConfig<T>,
    /// Seconds of expert driving recorded from each crossing onto a trajectory.
    pub junction_duration: T,
    /// Arc offsets along the incoming trajectory at which those runs start.
    pub junction_offsets: Vec<T>,
    /// Times each junction sample is repeated in the training set.
    pub junction_repeat: usize,
    /// Aggregation rounds run after the first fit; each rolls the learner out
    /// over one lap and from every junction start, relabels with the expert
    /// and refits.
    pub dagger_rounds: usize,
    pub controller: ControllerKind,
    pub regression: TrainConfig<T>,
    pub detector: DetectorConfig<T>,
    pub pid: PidGains<T>,
    pub confidence_floor: T,
    pub classifier: ClassifierConfig<T>,
    /// Intersection enrollment; one exemplar per crossing by default.
    pub enroll: EnrollConfig<T>,
    pub weights: WeightMode,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            laps: 3,
            dt: T::lit(0.1),
            expert: ExpertConfig::default(),
            augment: AugmentConfig::default(),
            junction_duration: T::lit(3.0),
            junction_offsets: [-0.2, -0.1, 0.0, 0.1, 0.2].map(T::lit).to_vec(),
            junction_repeat: 3,
            dagger_rounds: 2,
            controller: ControllerKind::Regression,
            regression: TrainConfig {
                lambda: T::lit(1e-3),
                ..TrainConfig::default()
            },
            detector: DetectorConfig::default(),
            pid: PidGains::default(),
            confidence_floor: T::lit(DEFAULT_CONFIDENCE_FLOOR),
            classifier: ClassifierConfig::default(),
            enroll: EnrollConfig {
                spread: T::zero(),
                ..EnrollConfig::default()
            },
            weights: WeightMode::ArcLength,
        }
    }
}

/// Everything the pipeline produced, kept for inspection and file output.
#[derive(Debug, Clone)]
pub struct TrainedSystem<T> {
    pub graph: TngGraph<T>,
    /// Lap demonstrations per vertex.
    pub demonstrations: Vec<Dataset<T>>,
    /// Training set (laps, shifted copies, junction entries, aggregated
    /// rollouts) per vertex.
    pub training: Vec<Dataset<T>>,
}

/// Data gathered for one trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryData<T> {
    pub laps: Dataset<T>,
    /// Laps plus shifted copies; what the trajectory classifier sees.
    pub on_path: Dataset<T>,
    /// Everything the controller is fitted on.
    pub all: Dataset<T>,
}

/// Training set for one trajectory: expert laps plus shift augmentation and
/// junction entries.
pub fn trajectory_training_set<T: Scalar>(
    env: &Environment<T>,
    traj_index: usize,
    cfg: &PipelineConfig<T>,
    seed: u64,
) -> Result<TrajectoryData<T>> {
    let traj = &env.trajectories[traj_index];
    let tag = traj.id as u64;
    let laps = collect_demonstrations(
        env,
        traj.id,
        cfg.laps,
        cfg.dt,
        &cfg.expert,
        derive_seed(seed, 0x100 + tag),
    )?;
    if let Some(reason) = laps.aborted {
        return Err(TngError::Validation(format!(
            "expert failed on trajectory {}: {reason}",
            traj.id
        )));
    }
    let mut all = laps.dataset.clone();
    if cfg.augment.copies > 0 {
        let aug = augment_dataset(
            &laps.dataset,
            env,
            traj,
            &cfg.expert,
            &cfg.augment,
            derive_seed(seed, 0x200 + tag),
        )?;
        all.extend(&aug.dataset);
    }
    let on_path = all.clone();
    if cfg.junction_duration > T::zero() {
        let j = junction_entries(
            env,
            traj,
            &cfg.expert,
            cfg.dt,
            cfg.junction_duration,
            &cfg.junction_offsets,
            derive_seed(seed, 0x300 + tag),
        )?;
        for _ in 0..cfg.junction_repeat {
            all.extend(&j);
        }
    }
    Ok(TrajectoryData {
        laps: laps.dataset,
        on_path,
        all,
    })
}

/// Poses where the robot joins `traj` from a crossing trajectory, one per
/// crossing and junction offset.
pub fn junction_starts<T: Scalar>(
    env: &Environment<T>,
    traj: &Trajectory<T>,
    offsets: &[T],
) -> Vec<Pose<T>> {
    let mut out = Vec::new();
    for x in env
        .intersections
        .iter()
        .filter(|x| x.to_trajectory == traj.id)
    {
        if let Some(from) = env.trajectory(x.from_trajectory) {
            out.extend(offsets.iter().map(|&o| from.pose_at(x.from_arc + o)));
        }
    }
    out
}

/// Fits a controller on `data`, then runs `cfg.dagger_rounds` aggregation
/// rounds on trajectory `traj_index`.
pub fn train_with_aggregation<T: Scalar>(
    env: &Environment<T>,
    traj_index: usize,
    mut data: Dataset<T>,
    cfg: &PipelineConfig<T>,
    seed: u64,
) -> Result<(Controller<T>, Dataset<T>)> {
    let hash = env.featurizer.hash();
    let traj = &env.trajectories[traj_index];
    let mut controller = train_controller(&data, &hash, cfg)?;
    let lap_ticks = (traj.length() / (cfg.expert.cruise_speed * cfg.dt))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let entry_ticks = (cfg.junction_duration / cfg.dt)
        .ceil()
        .to_usize()
        .unwrap_or(0);
    let mut starts = vec![(None, lap_ticks)];
    if entry_ticks > 0 {
        starts.extend(
            junction_starts(env, traj, &cfg.junction_offsets)
                .into_iter()
                .map(|p| (Some(p), entry_ticks)),
        );
    }
    for round in 0..cfg.dagger_rounds {
        for (k, &(start, ticks)) in starts.iter().enumerate() {
            let s = derive_seed(seed, 0x600 + ((round as u64) << 16) + k as u64);
            data = dagger_iterate(
                &mut controller,
                env,
                traj.id,
                &data,
                ticks,
                round as u32 + 1,
                cfg.dt,
                &cfg.expert,
                start,
                s,
            )?
            .dataset;
        }
        controller = train_controller(&data, &hash, cfg)?;
    }
    Ok((controller, data))
}

pub fn train_controller<T: Scalar>(
    data: &Dataset<T>,
    hash: &str,
    cfg: &PipelineConfig<T>,
) -> Result<Controller<T>> {
    Ok(match cfg.controller {
        ControllerKind::Regression => {
            Controller::Regression(train_regression(data, hash, &cfg.regression)?)
        }
        ControllerKind::Detection => {
            let (det, _) = train_detector(data, hash, &cfg.detector)?;
            Controller::Detection(DetectionController::new(
                det,
                cfg.pid,
                cfg.expert.cruise_speed,
                cfg.confidence_floor,
            )?)
        }
    })
}

/// Enrolls one edge per ordered pair of crossing trajectories; its exemplars
/// cover every crossing point of the pair.
pub fn enroll_edges<T: Scalar>(
    env: &Environment<T>,
    cfg: &PipelineConfig<T>,
    seed: u64,
) -> Result<Vec<Edge<T>>> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for x in &env.intersections {
        let (Some(i), Some(j)) = (
            env.index_of(x.from_trajectory),
            env.index_of(x.to_trajectory),
        ) else {
            continue;
        };
        if !pairs.contains(&(i, j)) {
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    let mut edges = Vec::new();
    for (i, j) in pairs {
        let (from, to) = (env.trajectories[i].id, env.trajectories[j].id);
        let arcs: Vec<T> = env
            .crossings_from(from)
            .filter(|x| x.to_trajectory == to)
            .map(|x| x.from_arc)
            .collect();
        let mut stream = NoiseStream::new(derive_seed(seed, 0x400 + (i as u64) * 1024 + j as u64));
        let (exemplars, threshold) =
            enroll_places(env, &env.trajectories[i], &arcs, &cfg.enroll, &mut stream)?;
        edges.push(Edge {
            weight: edge_weight(env, from, to, cfg.weights)?,
            classifier: enroll_intersection(&exemplars, i, j, threshold)?,
        });
    }
    Ok(edges)
}

/// Collects, trains and enrolls every component of a navigation graph over
/// `env`; vertex `i` follows `env.trajectories[i]`.
pub fn train_system<T: Scalar>(
    env: &Environment<T>,
    cfg: &PipelineConfig<T>,
    seed: u64,
) -> Result<TrainedSystem<T>> {
    let hash = env.featurizer.hash();
    let mut vertices = Vec::new();
    let mut demonstrations = Vec::new();
    let mut training = Vec::new();
    let mut on_path = Vec::new();
    for k in 0..env.trajectories.len() {
        let d = trajectory_training_set(env, k, cfg, seed)?;
        let (controller, all) =
            train_with_aggregation(env, k, d.all, cfg, derive_seed(seed, k as u64))?;
        vertices.push(Vertex {
            trajectory: env.trajectories[k].id,
            controller,
        });
        demonstrations.push(d.laps);
        on_path.push(d.on_path);
        training.push(all);
    }
    let per_class: Vec<Vec<Observation<T>>> = on_path
        .iter()
        .map(|d| d.samples().iter().map(|s| s.observation.clone()).collect())
        .collect();
    let mut ccfg = cfg.classifier;
    ccfg.optimizer.seed = derive_seed(seed, 0x500);
    let classifier = train_trajectory_classifier(&per_class, &hash, &ccfg)?;
    let edges = enroll_edges(env, cfg, seed)?;
    Ok(TrainedSystem {
        graph: TngGraph::build(vertices, classifier, edges)?,
        demonstrations,
        training,
    })
}
