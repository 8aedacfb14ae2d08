use serde::{Deserialize, Serialize};

use crate::error::{Result, TngError};
use crate::eval::{Episode, EpisodeLog, Outcome, SupervisorPhase, SwitchEvent};
use crate::policy::Policy;
use crate::scalar::Scalar;
use crate::sim::Trajectory;
use crate::tng::exemplar::{detect_intersection, goal_reached, GoalReacher};
use crate::tng::graph::{Controller, Plan, TngGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct ExecutiveConfig<T> {
    pub timeout: T,
    /// Minimum time between two switches.
    pub min_switch_interval: T,
}

impl<T: Scalar> Default for ExecutiveConfig<T> {
    fn default() -> Self {
        Self {
            timeout: T::lit(300.0),
            min_switch_interval: T::lit(2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "phase", content = "detail")]
pub enum ExecutivePhase {
    Following(usize),
    /// Transient: the tick on which edge `k` fired and the controller changed.
    Switching(usize),
    GoalSeeking,
    Done,
    Failed(String),
}

impl ExecutivePhase {
    pub fn label(&self) -> String {
        match self {
            ExecutivePhase::Following(v) => format!("following:{v}"),
            ExecutivePhase::Switching(k) => format!("switching:{k}"),
            ExecutivePhase::GoalSeeking => "goal-seeking".into(),
            ExecutivePhase::Done => "done".into(),
            ExecutivePhase::Failed(r) => format!("failed:{r}"),
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, ExecutivePhase::Done | ExecutivePhase::Failed(_))
    }
}

/// Switching state machine over one plan.
#[derive(Debug, Clone)]
pub struct ExecutiveState<T> {
    pub phase: ExecutivePhase,
    /// Number of plan edges already taken.
    pub cursor: usize,
    pub elapsed: T,
    pub events: Vec<String>,
    last_switch: Option<T>,
}

impl<T: Scalar> ExecutiveState<T> {
    pub fn new(plan: &Plan<T>) -> Self {
        let phase = if plan.edges.is_empty() {
            ExecutivePhase::GoalSeeking
        } else {
            ExecutivePhase::Following(plan.vertices[0])
        };
        Self {
            phase,
            cursor: 0,
            elapsed: T::zero(),
            events: Vec::new(),
            last_switch: None,
        }
    }

    pub fn vertex(&self, plan: &Plan<T>) -> usize {
        plan.vertices[self.cursor]
    }
}

fn trajectory_of<'e, T: Scalar>(
    ep: &Episode<'e, T>,
    tng: &TngGraph<T>,
    v: usize,
) -> Result<&'e Trajectory<T>> {
    let id = tng.vertices[v].trajectory;
    ep.env
        .trajectory(id)
        .ok_or_else(|| TngError::Validation(format!("vertex {v} follows unknown trajectory {id}")))
}

/// Runs the plan's controllers on the episode's world, switching when the next
/// planned intersection classifier fires, until the goal is recognised or the
/// timeout passes. The supervisor measures against the active vertex's
/// trajectory.
pub fn execute<T: Scalar>(
    tng: &TngGraph<T>,
    plan: &Plan<T>,
    mut episode: Episode<'_, T>,
    goal: &GoalReacher<T>,
    cfg: &ExecutiveConfig<T>,
) -> Result<(EpisodeLog<T>, ExecutiveState<T>)> {
    if plan.vertices.is_empty() || plan.vertices.len() != plan.edges.len() + 1 {
        return Err(TngError::InvalidInput("malformed plan".into()));
    }
    for (w, &k) in plan.vertices.windows(2).zip(&plan.edges) {
        let e = tng
            .edges
            .get(k)
            .ok_or_else(|| TngError::InvalidInput(format!("plan names missing edge {k}")))?;
        if (e.from(), e.to()) != (w[0], w[1]) {
            return Err(TngError::InvalidInput(format!(
                "plan edge {k} does not join {} -> {}",
                w[0], w[1]
            )));
        }
    }
    let mut state = ExecutiveState::new(plan);
    let mut vertex = state.vertex(plan);
    let mut traj = trajectory_of(&episode, tng, vertex)?;
    episode.retarget(traj);
    let mut controller: Controller<T> = tng.vertices[vertex].controller.clone();
    controller.reset();
    let dt = episode.dt;
    let eps = T::lit(1e-9);
    let outcome = loop {
        if episode.time() + eps >= cfg.timeout {
            break Outcome::Failed("timeout".into());
        }
        let obs = episode.observe();
        match state.phase {
            ExecutivePhase::GoalSeeking => {
                if goal_reached(goal, &obs)? {
                    state.phase = ExecutivePhase::Done;
                    episode.note("goal");
                    break Outcome::Done;
                }
            }
            _ => {
                let next = plan.edges[state.cursor];
                for (k, e) in tng.edges.iter().enumerate() {
                    if k != next && e.from() == vertex && detect_intersection(&e.classifier, &obs)?
                    {
                        episode.note(format!("unplanned-edge:{k}"));
                    }
                }
                let debounced = state
                    .last_switch
                    .is_none_or(|t| episode.time() - t + eps >= cfg.min_switch_interval);
                if debounced && detect_intersection(&tng.edges[next].classifier, &obs)? {
                    let from = vertex;
                    state.cursor += 1;
                    vertex = state.vertex(plan);
                    state.last_switch = Some(episode.time());
                    state.phase = ExecutivePhase::Switching(next);
                    episode.log.switches.push(SwitchEvent {
                        t: episode.time(),
                        from,
                        to: vertex,
                        pose: episode.pose(),
                    });
                    episode.note(format!("switch:{from}->{vertex}"));
                    traj = trajectory_of(&episode, tng, vertex)?;
                    episode.retarget(traj);
                    controller = tng.vertices[vertex].controller.clone();
                    controller.reset();
                }
            }
        }
        let action = controller.act(&obs, &episode.pose(), dt)?;
        let label = state.phase.label();
        let intervening_before = episode.supervisor.phase() == SupervisorPhase::Intervening;
        match episode.tick(traj, action, &label) {
            Ok(_) => {}
            Err(TngError::ExpertLost { .. }) => break Outcome::Failed("expert-lost".into()),
            Err(e) => return Err(e),
        }
        if intervening_before && episode.supervisor.phase() == SupervisorPhase::Nominal {
            // the human handed back; the controller restarts from a clean state
            controller.reset();
        }
        state.phase = match state.phase {
            ExecutivePhase::Switching(_) if state.cursor == plan.edges.len() => {
                ExecutivePhase::GoalSeeking
            }
            ExecutivePhase::Switching(_) => ExecutivePhase::Following(vertex),
            ref p => p.clone(),
        };
    };
    if let Outcome::Failed(r) = &outcome {
        state.phase = ExecutivePhase::Failed(r.clone());
    }
    state.elapsed = episode.time();
    state.events = episode
        .log
        .switches
        .iter()
        .map(|s| format!("switch {} -> {} at t={:.2}", s.from, s.to, s.t))
        .collect();
    Ok((episode.finish(outcome), state))
}
