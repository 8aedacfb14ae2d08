use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::eval::episode::{Episode, EpisodeLog, Outcome};
use crate::eval::supervisor::SupervisorConfig;
use crate::scalar::Scalar;
use crate::sim::{derive_seed, Environment, NoiseStream, Pose};
use crate::tng::{
    enroll_goal, enroll_places, execute, identify_goal, localize, plan, EnrollConfig,
    ExecutiveConfig, TngGraph,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct NavigationConfig<T> {
    pub dt: T,
    pub supervisor: SupervisorConfig<T>,
    pub executive: ExecutiveConfig<T>,
    /// How the goal place is captured.
    pub goal: EnrollConfig<T>,
    /// Start and goal poses are drawn at least this far from any crossing.
    pub crossing_clearance: T,
    pub record_ticks: bool,
}

impl<T: Scalar> Default for NavigationConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(0.1),
            supervisor: SupervisorConfig::default(),
            executive: ExecutiveConfig::default(),
            goal: EnrollConfig {
                lateral: T::lit(0.1),
                ..EnrollConfig::default()
            },
            crossing_clearance: T::lit(0.6),
            record_ticks: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CellReport<T> {
    /// Source and destination vertex indices.
    pub src: usize,
    pub dst: usize,
    pub start: Pose<T>,
    pub goal: Pose<T>,
    /// Vertex the trajectory classifier placed the start observation on.
    pub localized: usize,
    /// Vertex the goal observation was attributed to.
    pub identified_goal: usize,
    pub planned: Vec<usize>,
    pub outcome: Outcome,
    /// `None` when the episode never ran.
    pub pa: Option<T>,
    pub distance: T,
    pub interventions: usize,
    pub switches: usize,
    pub total_time: T,
    /// Distance from the final pose to the sampled goal pose.
    pub goal_error: T,
    /// Set when the cell could not be planned.
    pub flag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<EpisodeLog<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MatrixReport<T> {
    pub size: usize,
    /// Row-major, diagonal omitted.
    pub cells: Vec<CellReport<T>>,
    /// `pa[i][j]`; `None` on the diagonal and for cells that never ran.
    pub pa: Vec<Vec<Option<T>>>,
    pub distance: Vec<Vec<Option<T>>>,
    pub mean_pa: T,
    pub total_distance: T,
    pub done: usize,
}

fn sample_pose<T: Scalar>(
    env: &Environment<T>,
    index: usize,
    clearance: T,
    rng: &mut ChaCha8Rng,
) -> Pose<T> {
    let traj = &env.trajectories[index];
    let id = traj.id;
    let points: Vec<[T; 2]> = env
        .intersections
        .iter()
        .filter(|x| x.from_trajectory == id || x.to_trajectory == id)
        .map(|x| x.point)
        .collect();
    let l = traj.length().to_f64_lossy();
    let mut pose = traj.pose_at(T::zero());
    for _ in 0..200 {
        pose = traj.pose_at(T::lit(rng.random_range(0.0..l)));
        let clear = points
            .iter()
            .all(|p| (p[0] - pose.x).hypot(p[1] - pose.y) >= clearance);
        if clear {
            break;
        }
    }
    pose
}

/// One navigation episode from a random pose on trajectory `src` to a random
/// goal on trajectory `dst` (indices into `env.trajectories`). The robot
/// localises itself and identifies the goal with the graph's classifiers.
pub fn run_navigation<T: Scalar>(
    tng: &TngGraph<T>,
    env: &Environment<T>,
    src: usize,
    dst: usize,
    cfg: &NavigationConfig<T>,
    seed: u64,
) -> Result<CellReport<T>> {
    let c = env.trajectories.len();
    if src >= c || dst >= c {
        return Err(TngError::InvalidInput(format!(
            "trajectory index out of range 0..{c}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = sample_pose(env, src, cfg.crossing_clearance, &mut rng);
    let goal_pose = sample_pose(env, dst, cfg.crossing_clearance, &mut rng);
    let mut stream = NoiseStream::new(derive_seed(seed, 1));
    let goal_obs = env.observe(&goal_pose, &mut stream);
    let start_obs = env.observe(&start, &mut stream);
    let goal_traj = &env.trajectories[dst];
    let goal_arc = goal_traj.cross_track(&goal_pose).arc_position;
    let (exemplars, threshold) =
        enroll_places(env, goal_traj, &[goal_arc], &cfg.goal, &mut stream)?;
    let reacher = enroll_goal(&exemplars, threshold)?;
    let localized = localize(tng, &start_obs)?.vertex;
    let identified_goal = identify_goal(tng, &goal_obs)?;
    let mut cell = CellReport {
        src,
        dst,
        start,
        goal: goal_pose,
        localized,
        identified_goal,
        planned: Vec::new(),
        outcome: Outcome::Failed("no-path".into()),
        pa: None,
        distance: T::zero(),
        interventions: 0,
        switches: 0,
        total_time: T::zero(),
        goal_error: (start.x - goal_pose.x).hypot(start.y - goal_pose.y),
        flag: None,
        log: None,
    };
    let route = match plan(tng, localized, identified_goal) {
        Ok(p) => p,
        Err(e @ TngError::NoPath { .. }) => {
            cell.flag = Some(e.to_string());
            return Ok(cell);
        }
        Err(e) => return Err(e),
    };
    cell.planned = route.vertices.clone();
    let src_traj = &env.trajectories[src];
    let mut episode = Episode::new(
        env,
        start,
        src_traj,
        cfg.supervisor,
        cfg.dt,
        derive_seed(seed, 2),
    )?;
    episode.record_ticks = cfg.record_ticks;
    let (log, _) = execute(tng, &route, episode, &reacher, &cfg.executive)?;
    cell.outcome = log.outcome.clone();
    cell.pa = if log.total_time > T::zero() {
        Some(log.percentage_autonomy()?)
    } else {
        Some(T::lit(100.0))
    };
    cell.distance = log.distance;
    cell.interventions = log.interventions.len();
    cell.switches = log.switches.len();
    cell.total_time = log.total_time;
    let end = log.final_pose;
    cell.goal_error = (end.x - goal_pose.x).hypot(end.y - goal_pose.y);
    if cfg.record_ticks {
        cell.log = Some(log);
    }
    Ok(cell)
}

/// Seed of cell `(src, dst)`, independent of evaluation order.
pub fn cell_seed(seed: u64, src: usize, dst: usize) -> u64 {
    derive_seed(seed, 0x6d00_0000 + ((src as u64) << 16) + dst as u64)
}

/// All ordered pairs of distinct trajectories. `jobs` worker threads run the
/// cells (0 picks the machine's parallelism); the report does not depend on it.
pub fn run_navigation_matrix<T: Scalar>(
    tng: &TngGraph<T>,
    env: &Environment<T>,
    cfg: &NavigationConfig<T>,
    seed: u64,
    jobs: usize,
) -> Result<MatrixReport<T>> {
    let c = env.trajectories.len();
    if c < 2 {
        return Err(TngError::InvalidInput(
            "navigation matrix needs at least two trajectories".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..c)
        .flat_map(|i| (0..c).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let run = |&(i, j): &(usize, usize)| run_navigation(tng, env, i, j, cfg, cell_seed(seed, i, j));
    let cells: Vec<CellReport<T>> = if jobs == 1 {
        pairs.iter().map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| TngError::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| pairs.par_iter().map(run).collect::<Result<_>>())?
    };
    Ok(assemble_matrix(c, cells))
}

pub fn assemble_matrix<T: Scalar>(c: usize, cells: Vec<CellReport<T>>) -> MatrixReport<T> {
    let mut pa = vec![vec![None; c]; c];
    let mut distance = vec![vec![None; c]; c];
    let mut sum = T::zero();
    let mut n = 0usize;
    let mut total_distance = T::zero();
    for cell in &cells {
        pa[cell.src][cell.dst] = cell.pa;
        if cell.pa.is_some() {
            distance[cell.src][cell.dst] = Some(cell.distance);
        }
        if let Some(p) = cell.pa {
            sum = sum + p;
            n += 1;
        }
        total_distance = total_distance + cell.distance;
    }
    MatrixReport {
        size: c,
        done: cells.iter().filter(|c| c.outcome.is_done()).count(),
        cells,
        pa,
        distance,
        mean_pa: if n > 0 {
            sum / T::from_usize_lossy(n)
        } else {
            T::zero()
        },
        total_distance,
    }
}
