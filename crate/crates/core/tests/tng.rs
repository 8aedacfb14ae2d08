use proptest::prelude::*;
use tng_core::bundled::{crossing_env, rings5_env};
use tng_core::eval::*;
use tng_core::sim::*;
use tng_core::tng::*;

struct Run {
    log: EpisodeLog<f64>,
    state: ExecutiveState<f64>,
    plan: Plan<f64>,
}

fn drive(
    sys: &TrainedSystem<f64>,
    env: &Environment<f64>,
    src: usize,
    start_arc: f64,
    dst: usize,
    goal_arc: f64,
) -> Run {
    let start = env.trajectories[src].pose_at(start_arc);
    let goal = env.trajectories[dst].pose_at(goal_arc);
    let mut stream = NoiseStream::new(3);
    let enroll = NavigationConfig::<f64>::default().goal;
    let (ex, thr) = enroll_places(
        env,
        &env.trajectories[dst],
        &[goal_arc],
        &enroll,
        &mut stream,
    )
    .unwrap();
    let reacher = enroll_goal(&ex, thr).unwrap();
    let from = localize(&sys.graph, &env.observe(&start, &mut stream))
        .unwrap()
        .vertex;
    let to = identify_goal(&sys.graph, &env.observe(&goal, &mut stream)).unwrap();
    assert_eq!((from, to), (src, dst));
    let plan = plan(&sys.graph, from, to).unwrap();
    let mut ep = Episode::new(
        env,
        start,
        &env.trajectories[src],
        SupervisorConfig::default(),
        0.1,
        5,
    )
    .unwrap();
    ep.record_ticks = true;
    let (log, state) =
        execute(&sys.graph, &plan, ep, &reacher, &ExecutiveConfig::default()).unwrap();
    Run { log, state, plan }
}

#[test]
fn one_crossing_gives_one_switch_there() {
    let env = Environment::build(&crossing_env::<f64>(0.0, 1)).unwrap();
    let sys = train_system(&env, &PipelineConfig::default(), 1).unwrap();
    for (src, dst) in [(0, 1), (1, 0)] {
        let r = drive(&sys, &env, src, 0.5, dst, 5.0);
        assert!(r.log.outcome.is_done(), "{:?}", r.log.outcome);
        assert_eq!(r.log.switches.len(), 1);
        assert_eq!(r.state.cursor, 1);
        let s = &r.log.switches[0];
        let x = env
            .intersections
            .iter()
            .find(|x| x.from_trajectory == env.trajectories[src].id)
            .unwrap();
        let arc = env.trajectories[src].cross_track(&s.pose).arc_position;
        assert!(
            (arc - x.from_arc).abs() <= 0.3,
            "switched at arc {arc}, crossing at {}",
            x.from_arc
        );
        // the planned edge's classifier fired on the switching tick
        let edge = &sys.graph.edges[r.plan.edges[0]];
        assert!(detect_intersection(
            &edge.classifier,
            &env.observe(&s.pose, &mut NoiseStream::new(0))
        )
        .unwrap());
    }
}

#[test]
fn same_trajectory_goal_needs_no_switch() {
    let env = Environment::build(&crossing_env::<f64>(0.0, 1)).unwrap();
    let sys = train_system(&env, &PipelineConfig::default(), 1).unwrap();
    let r = drive(&sys, &env, 0, 0.5, 0, 4.5);
    assert!(r.plan.edges.is_empty());
    assert!(r.log.outcome.is_done());
    assert!(r.log.switches.is_empty());
    assert!(r.log.ticks.iter().all(|t| t.phase == "goal-seeking"));
}

#[test]
fn noiseless_chain_switches_along_every_route() {
    let env = Environment::build(&rings5_env::<f64>(0.0, 1)).unwrap();
    let sys = train_system(&env, &PipelineConfig::default(), 1).unwrap();
    let cfg = NavigationConfig {
        record_ticks: true,
        ..Default::default()
    };
    let m = run_navigation_matrix(&sys.graph, &env, &cfg, 1, 0).unwrap();
    assert_eq!(m.cells.len(), 20);
    assert_eq!(m.done, 20);
    assert!(m.cells.iter().any(|c| c.planned.len() > 2));
    assert!((m.mean_pa - 100.0).abs() < 1e-9, "{}", m.mean_pa);
    for c in &m.cells {
        let log = c.log.as_ref().unwrap();
        assert_eq!(log.switches.len() + 1, c.planned.len());
        for (w, s) in c.planned.windows(2).zip(&log.switches) {
            assert_eq!((s.from, s.to), (w[0], w[1]));
        }
        for pair in log.switches.windows(2) {
            assert!(
                pair[1].t - pair[0].t
                    >= ExecutiveConfig::<f64>::default().min_switch_interval - 1e-9
            );
        }
    }
}

#[test]
fn graph_round_trips_and_validates() {
    let env = Environment::build(&crossing_env::<f64>(0.0, 1)).unwrap();
    let sys = train_system(&env, &PipelineConfig::default(), 1).unwrap();
    let g = &sys.graph;
    g.validate().unwrap();
    assert_eq!(g.vertices.len(), 2);
    assert_eq!(g.edges.len(), 2);
    assert!(g.edges.iter().all(|e| e.weight > 0.0));
    let back = TngGraph::<f64>::from_json(&g.to_json()).unwrap();
    assert_eq!(back.to_json(), g.to_json());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exactly_one_indicator_fires(logits in prop::collection::vec(-50.0f64..50.0, 1..12)) {
        let c = TrajectoryClassifier::classify_logits(&logits);
        prop_assert_eq!(c.indicator.iter().map(|&g| g as u32).sum::<u32>(), 1);
        prop_assert_eq!(c.indicator[c.index], 1);
        let s: f64 = c.probabilities.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-9);
        prop_assert!(logits.iter().all(|&z| z <= logits[c.index]));
    }
}
