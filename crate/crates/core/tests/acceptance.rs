//! End-to-end acceptance gate. Every criterion prints one PASS/FAIL line; the
//! test fails if any criterion does.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tng_core::bundled::{loop_env, rings5_env};
use tng_core::detection::*;
use tng_core::eval::*;
use tng_core::imitation::ridge::{solve_closed_form, solve_gradient};
use tng_core::imitation::*;
use tng_core::linalg::Matrix;
use tng_core::optim::GradientConfig;
use tng_core::policy::Policy;
use tng_core::sim::*;
use tng_core::tng::*;
use tng_core::TngError;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<usize>) -> usize {
    v.sort_unstable();
    v[v.len() / 2]
}

fn ridge_gradient_matches_closed_form() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(10..=200);
        let d = rng.random_range(1..=32);
        let lambda = rng.random_range(0.1..2.0);
        let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Matrix::from_vec(n, d, x).unwrap();
        let y = Matrix::from_vec(n, 2, y).unwrap();
        let exact = solve_closed_form(&x, &y, lambda, true).unwrap();
        let cfg = GradientConfig {
            rate: 0.05,
            steps: 4000,
            final_fraction: 1e-3,
            ..Default::default()
        };
        let (fit, _) = solve_gradient(&x, &y, lambda, true, &cfg).unwrap();
        let err = exact
            .flatten()
            .iter()
            .zip(fit.flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    let took = t0.elapsed();
    verdict(
        worst < 1e-4 && took < Duration::from_secs(10),
        format!("50 problems, worst parameter gap {worst:.2e}, {took:.1?}"),
    )
}

/// Cheapest path weight by enumerating every simple path.
fn brute_force(c: usize, edges: &[(usize, usize, f64)], src: usize, dst: usize) -> Option<f64> {
    fn walk(
        u: usize,
        dst: usize,
        acc: f64,
        seen: &mut [bool],
        edges: &[(usize, usize, f64)],
        best: &mut Option<f64>,
    ) {
        if u == dst {
            *best = Some(best.map_or(acc, |b| b.min(acc)));
            return;
        }
        for &(a, b, w) in edges {
            if a == u && !seen[b] {
                seen[b] = true;
                walk(b, dst, acc + w, seen, edges, best);
                seen[b] = false;
            }
        }
    }
    let mut seen = vec![false; c];
    seen[src] = true;
    let mut best = None;
    walk(src, dst, 0.0, &mut seen, edges, &mut best);
    best
}

fn planner_matches_enumeration() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    let mut reachable = 0;
    for _ in 0..500 {
        let c = rng.random_range(1..=8);
        let m = rng.random_range(0..=20);
        let edges: Vec<(usize, usize, f64)> = (0..m)
            .map(|_| {
                (
                    rng.random_range(0..c),
                    rng.random_range(0..c),
                    rng.random_range(0.01..10.0),
                )
            })
            .filter(|e| e.0 != e.1)
            .collect();
        let (src, dst) = (rng.random_range(0..c), rng.random_range(0..c));
        match (
            plan_edges(c, &edges, src, dst),
            brute_force(c, &edges, src, dst),
        ) {
            (Ok(p), Some(b)) => {
                reachable += 1;
                let sum: f64 = p.edges.iter().map(|&k| edges[k].2).sum();
                if (p.total_weight - b).abs() > 1e-9 * b.max(1.0)
                    || (sum - p.total_weight).abs() > 1e-9
                {
                    bad += 1;
                }
            }
            (Err(TngError::NoPath { .. }), None) => {}
            _ => bad += 1,
        }
    }
    let took = t0.elapsed();
    verdict(
        bad == 0 && took < Duration::from_secs(5),
        format!("500 graphs ({reachable} reachable), {bad} mismatches, {took:.1?}"),
    )
}

fn dense_distance(t: &Trajectory<f64>, x: f64, y: f64) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..t.segment_count() {
        let (a, b, _) = t.segment(k);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n = (len / 1e-3).ceil() as usize;
        for i in 0..=n {
            let s = i as f64 / n as f64;
            best = best.min((x - a[0] - s * (b[0] - a[0])).hypot(y - a[1] - s * (b[1] - a[1])));
        }
    }
    best
}

fn kinematics_and_pid_examples() -> Verdict {
    let mut notes = Vec::new();
    let p = step_unicycle(Pose::new(0.0, 0.0, 0.0), MotorCommand::new(1.0, 1.0), 1.0).unwrap();
    let arc = (p.x - 1f64.sin())
        .abs()
        .max((p.y - (1.0 - 1f64.cos())).abs())
        .max((p.theta - 1.0).abs());
    let arc_ok = arc < 1e-12;
    notes.push(format!("arc {arc:.1e}"));

    let env = Environment::build(&rings5_env::<f64>(0.0, 1)).unwrap();
    let t = &env.trajectories[0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..30 {
        // outward offsets keep the oracle's 1 mm sampling error below 1e-6
        let (q, h) = t.point_at(rng.random_range(0.0..t.length()));
        let off = rng.random_range(0.25..2.0);
        let (x, y) = (q[0] + off * h.sin(), q[1] - off * h.cos());
        let ct = t.cross_track(&Pose::new(x, y, 0.3));
        worst = worst.max((ct.distance - dense_distance(t, x, y)).abs());
    }
    let ct_ok = worst < 1e-6;
    notes.push(format!("cross-track {worst:.1e}"));

    let mut pid = PidState::new(PidGains {
        kp: 1.0,
        ki: 0.5,
        kd: 0.0,
        integral_limit: 100.0,
        derivative_smoothing: 0.0,
    })
    .unwrap();
    let mut u = 0.0f64;
    for _ in 0..3 {
        u = pid_step(&mut pid, 1.0, 1.0).unwrap();
    }
    let pid_ok = (u - (-(1.0 + 0.5 * 3.0))).abs() < 1e-12;
    notes.push(format!("pid u3 {u}"));
    verdict(arc_ok && ct_ok && pid_ok, notes.join(", "))
}

fn loop_training(env: &Environment<f64>, seed: u64) -> (Dataset<f64>, Dataset<f64>) {
    let traj = env.trajectories[0].clone();
    let ex = ExpertConfig::default();
    let laps = collect_demonstrations(env, 0, 3, 0.1, &ex, seed)
        .unwrap()
        .dataset;
    let aug = augment_dataset(&laps, env, &traj, &ex, &AugmentConfig::default(), seed).unwrap();
    let mut all = laps.clone();
    all.extend(&aug.dataset);
    (laps, all)
}

fn detection_controller(env: &Environment<f64>, data: &Dataset<f64>) -> DetectionController<f64> {
    let (det, _) =
        train_detector(data, &env.featurizer.hash(), &DetectorConfig::default()).unwrap();
    DetectionController::new(det, PidGains::default(), 0.5, DEFAULT_CONFIDENCE_FLOOR).unwrap()
}

fn noiseless_laps() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for seed in 1..=3u64 {
        let env = Environment::build(&loop_env(0.0, seed)).unwrap();
        let hash = env.featurizer.hash();
        for kind in ["regression", "detection"] {
            let t0 = Instant::now();
            let (_, data) = loop_training(&env, seed);
            let sup = SupervisorConfig::default();
            let lap = LapConfig::default();
            let r = if kind == "regression" {
                let mut c = train_regression(&data, &hash, &TrainConfig::default()).unwrap();
                run_lap_experiment(&mut c, &env, 0, &sup, &lap, seed).unwrap()
            } else {
                let mut c = detection_controller(&env, &data);
                run_lap_experiment(&mut c, &env, 0, &sup, &lap, seed).unwrap()
            };
            let took = t0.elapsed();
            pass &= r.pa >= 99.0 && r.laps_completed == 10 && took < Duration::from_secs(120);
            notes.push(format!("{kind}@{seed} {:.2}", r.pa));
        }
    }
    verdict(pass, format!("PA over 10 laps: {}", notes.join(", ")))
}

/// True once the robot is within 5 cm of the line and roughly aligned with
/// it inside 300 steps.
fn settles<P: Policy<f64>>(
    p: &mut P,
    env: &Environment<f64>,
    traj: &Trajectory<f64>,
    start: Pose<f64>,
) -> bool {
    let mut w = WorldState::new(start, 9);
    p.reset();
    for k in 0..300 {
        let ct = traj.cross_track(&w.pose);
        if k > 0 && ct.distance < 0.05 && ct.heading_error.abs() < 0.1 {
            return true;
        }
        let o = w.observe(env);
        let pose = w.pose;
        let a = p.act(&o, &pose, 0.1).unwrap();
        w.step(a.command(), 0.1).unwrap();
    }
    false
}

fn heading_recovery() -> Verdict {
    let offsets = [0.1, 0.2, 0.3, 0.4];
    let mut det_fail = 0;
    let mut starts = 0;
    let mut envelope = Vec::new();
    for seed in 1..=3u64 {
        let env = Environment::build(&loop_env(0.0, seed)).unwrap();
        let traj = env.trajectories[0].clone();
        let (laps, all) = loop_training(&env, seed);
        let mut det = detection_controller(&env, &all);
        let mut plain =
            train_regression(&laps, &env.featurizer.hash(), &TrainConfig::default()).unwrap();
        let mut reg_ok_up_to = 0.0;
        let mut still_ok = true;
        for &h in &offsets {
            let mut reg_all = true;
            for i in 0..8 {
                let p = traj.pose_at(traj.length() * i as f64 / 8.0);
                for s in [-1.0, 1.0] {
                    let start = Pose::new(p.x, p.y, p.theta + s * h);
                    starts += 1;
                    if !settles(&mut det, &env, &traj, start) {
                        det_fail += 1;
                    }
                    reg_all &= settles(&mut plain, &env, &traj, start);
                }
            }
            if reg_all && still_ok {
                reg_ok_up_to = h;
            } else {
                still_ok = false;
            }
        }
        envelope.push(reg_ok_up_to);
    }
    verdict(
        det_fail == 0,
        format!(
            "detection settled from {}/{starts} starts up to 0.4 rad; unaugmented regression envelope per seed {envelope:?} rad",
            starts - det_fail
        ),
    )
}

fn dagger_interventions() -> Verdict {
    let mut per_seed = Vec::new();
    for seed in 1..=5u64 {
        let env = Environment::build(&loop_env(0.05, seed)).unwrap();
        let base = collect_demonstrations(&env, 0, 3, 0.1, &ExpertConfig::default(), seed)
            .unwrap()
            .dataset;
        let study = run_dagger_study(&env, 0, &base, &DaggerConfig::default(), seed).unwrap();
        per_seed.push(
            study
                .iterations
                .iter()
                .map(|i| i.interventions)
                .collect::<Vec<_>>(),
        );
    }
    let medians: Vec<usize> = (0..per_seed[0].len())
        .map(|it| median(per_seed.iter().map(|s| s[it]).collect()))
        .collect();
    let pass = medians.len() == 4 && medians.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        pass,
        format!("median interventions per iteration {medians:?} (per seed {per_seed:?})"),
    )
}

fn navigation_matrix() -> Verdict {
    let t0 = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for noise in [0.0f64, 0.05] {
        let env = Environment::build(&rings5_env::<f64>(noise, 1)).unwrap();
        let sys = train_system(&env, &PipelineConfig::default(), 1).unwrap();
        let m =
            run_navigation_matrix(&sys.graph, &env, &NavigationConfig::default(), 1, 0).unwrap();
        let cells_ok = m.cells.len() == 20 && m.done == 20;
        let pa_ok = if noise == 0.0 {
            (m.mean_pa - 100.0).abs() < 1e-9
        } else {
            m.mean_pa >= 90.0
        };
        pass &= cells_ok && pa_ok;
        let worst_goal = m.cells.iter().map(|c| c.goal_error).fold(0.0, f64::max);
        notes.push(format!(
            "noise {noise}: {}/20 done, mean PA {:.2}, worst goal error {worst_goal:.2} m",
            m.done, m.mean_pa
        ));
    }
    let took = t0.elapsed();
    pass &= took < Duration::from_secs(600);
    verdict(pass, format!("{}; {took:.1?}", notes.join("; ")))
}

fn degradation() -> Verdict {
    let env = Environment::build(&loop_env(0.0, 1)).unwrap();
    let (_, data) = loop_training(&env, 1);
    let reg = Controller::Regression(
        train_regression(&data, &env.featurizer.hash(), &TrainConfig::default()).unwrap(),
    );
    let det = Controller::Detection(detection_controller(&env, &data));
    let controllers = vec![
        ("regression".to_string(), reg),
        ("detection".to_string(), det),
    ];
    let cfg = DegradationConfig::default();
    let a = run_degradation_study(&controllers, &env, 0, &cfg, 1, 1).unwrap();
    let b = run_degradation_study(&controllers, &env, 0, &cfg, 1, 0).unwrap();
    let same = a == b;
    let rows: Vec<String> = a
        .rows
        .iter()
        .map(|r| {
            let d: Vec<String> = r.delta.iter().map(|d| format!("{d:+.2}")).collect();
            format!("{} dPA [{}]", r.controller, d.join(", "))
        })
        .collect();
    let shape_ok = a.magnitudes == vec![0.0, 0.1, 0.2, 0.4] && a.rows.len() == 2;
    verdict(
        same && shape_ok,
        format!("{}; reproducible: {same}", rows.join("; ")),
    )
}

fn indicator_and_pa_fuzz() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad_indicator = 0;
    for _ in 0..10_000 {
        let c = rng.random_range(1..10);
        let d: usize = rng.random_range(1..8);
        let w: Vec<f64> = (0..d * c).map(|_| rng.random_range(-3.0..3.0)).collect();
        let clf = TrajectoryClassifier {
            weights: Matrix::from_vec(d, c, w).unwrap(),
            bias: (0..c).map(|_| rng.random_range(-1.0..1.0)).collect(),
            featurizer_hash: String::new(),
            train_accuracy: Vec::new(),
        };
        let obs = Observation::new((0..d).map(|_| rng.random_range(-5.0..5.0)).collect(), 0.0);
        let g = classify_trajectory(&clf, &obs).unwrap();
        let sum: u32 = g.indicator.iter().map(|&v| v as u32).sum();
        if sum != 1 || g.indicator[g.index] != 1 {
            bad_indicator += 1;
        }
    }
    let mut bad_pa = 0;
    for _ in 0..10_000 {
        let total: f64 = rng.random_range(1e-3..1e4);
        let human = total * rng.random_range(0.0..=1.0);
        let pa = percentage_autonomy(human, total).unwrap();
        let oracle = 100.0 * (1.0 - human / total);
        let ends = percentage_autonomy(0.0, total).unwrap() == 100.0
            && percentage_autonomy(total, total).unwrap() == 0.0;
        if !(0.0..=100.0).contains(&pa) || (pa - oracle).abs() > 1e-9 || !ends {
            bad_pa += 1;
        }
        if percentage_autonomy(total * 1.01 + 1e-6, total).is_ok()
            || percentage_autonomy(0.0, 0.0).is_ok()
        {
            bad_pa += 1;
        }
    }
    verdict(
        bad_indicator == 0 && bad_pa == 0,
        format!("indicator violations {bad_indicator}/10000, PA violations {bad_pa}/10000"),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        (
            "gradient ridge matches closed form",
            ridge_gradient_matches_closed_form,
        ),
        (
            "planner matches path enumeration",
            planner_matches_enumeration,
        ),
        (
            "kinematics, cross-track and PID examples",
            kinematics_and_pid_examples,
        ),
        ("noiseless lap autonomy", noiseless_laps),
        ("heading-offset recovery", heading_recovery),
        ("DAgger interventions non-increasing", dagger_interventions),
        ("five-trajectory navigation matrix", navigation_matrix),
        ("perturbation degradation", degradation),
        ("indicator and PA properties", indicator_and_pa_fuzz),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        // straight to the handle so the line shows up without --nocapture
        writeln!(
            std::io::stderr(),
            "criterion {}: {tag} {name}: {}",
            k + 1,
            o.detail
        )
        .unwrap();
        if !o.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
