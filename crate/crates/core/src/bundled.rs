//! Built-in environment layouts used by the CLI, the examples and the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;
use crate::sim::environment::{EnvironmentSpec, TrajectorySpec, ENV_FORMAT};
use crate::sim::FeaturizerConfig;

/// Named layouts understood by [`layout`].
pub const LAYOUTS: &[&str] = &["loop", "square", "crossing", "grid4", "rings5"];

pub fn default_featurizer<T: Scalar>(noise_sigma: T) -> FeaturizerConfig<T> {
    FeaturizerConfig {
        seed: 7,
        feature_dim: 128,
        ray_count: 16,
        max_range: T::lit(2.5),
        noise_sigma,
    }
}

fn pts<T: Scalar>(v: Vec<[f64; 2]>) -> Vec<[T; 2]> {
    v.into_iter().map(|[x, y]| [T::lit(x), T::lit(y)]).collect()
}

/// Counter-clockwise regular polygon approximating a circle, starting at the
/// bottom of the circle so the first segment heads in +x.
pub fn circle_waypoints(center: [f64; 2], radius: f64, sides: usize) -> Vec<[f64; 2]> {
    (0..sides)
        .map(|k| {
            let a = -std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU * k as f64 / sides as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}

/// Counter-clockwise rectangle with rounded corners, starting mid-way along the
/// bottom edge heading +x.
pub fn rounded_rect_waypoints(
    center: [f64; 2],
    width: f64,
    height: f64,
    radius: f64,
    per_corner: usize,
) -> Vec<[f64; 2]> {
    let (hw, hh) = (width / 2.0 - radius, height / 2.0 - radius);
    let corners = [
        ([hw, -hh], -std::f64::consts::FRAC_PI_2),
        ([hw, hh], 0.0),
        ([-hw, hh], std::f64::consts::FRAC_PI_2),
        ([-hw, -hh], std::f64::consts::PI),
    ];
    let mut out = vec![[center[0], center[1] - height / 2.0]];
    for (c, a0) in corners {
        for k in 0..=per_corner {
            let a = a0 + std::f64::consts::FRAC_PI_2 * k as f64 / per_corner as f64;
            out.push([
                center[0] + c[0] + radius * a.cos(),
                center[1] + c[1] + radius * a.sin(),
            ]);
        }
    }
    out
}

/// Rectangle corners, counter-clockwise from the middle of the bottom edge.
fn rect_waypoints(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<[f64; 2]> {
    vec![
        [(x0 + x1) / 2.0, y0],
        [x1, y0],
        [x1, y1],
        [x0, y1],
        [x0, y0],
    ]
}

fn scatter_landmarks<T: Scalar>(
    trajectories: &[TrajectorySpec<T>],
    density: f64,
    margin: f64,
    seed: u64,
) -> Vec<[T; 3]> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in trajectories.iter().flat_map(|t| t.waypoints.iter()) {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k].to_f64_lossy());
            hi[k] = hi[k].max(p[k].to_f64_lossy());
        }
    }
    let (x0, x1) = (lo[0] - margin, hi[0] + margin);
    let (y0, y1) = (lo[1] - margin, hi[1] + margin);
    let count = ((x1 - x0) * (y1 - y0) * density).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            [
                T::lit(rng.random_range(x0..x1)),
                T::lit(rng.random_range(y0..y1)),
                T::lit(rng.random_range(0.3..1.0)),
            ]
        })
        .collect()
}

fn traj<T: Scalar>(id: u32, name: &str, closed: bool, w: Vec<[f64; 2]>) -> TrajectorySpec<T> {
    TrajectorySpec {
        id,
        name: name.into(),
        closed,
        waypoints: pts(w),
    }
}

fn assemble<T: Scalar>(
    trajectories: Vec<TrajectorySpec<T>>,
    noise_sigma: T,
    seed: u64,
) -> EnvironmentSpec<T> {
    let landmarks = scatter_landmarks(&trajectories, 1.2, 0.8, seed);
    EnvironmentSpec {
        format: ENV_FORMAT.into(),
        trajectories,
        landmarks,
        featurizer: default_featurizer(noise_sigma),
        noise_seed: Some(crate::sim::derive_seed(seed, 0xe5)),
        suppress: Vec::new(),
    }
}

/// Single closed rounded-rectangle loop, 4 m × 3 m.
pub fn loop_env<T: Scalar>(noise_sigma: T, seed: u64) -> EnvironmentSpec<T> {
    let t = traj(
        0,
        "loop",
        true,
        rounded_rect_waypoints([0.0, 0.0], 4.0, 3.0, 0.7, 6),
    );
    assemble(vec![t], noise_sigma, seed)
}

/// Single closed 3 m square starting mid-way along its bottom edge.
pub fn square_env<T: Scalar>(noise_sigma: T, seed: u64) -> EnvironmentSpec<T> {
    let t = traj(0, "square", true, rect_waypoints(0.0, 0.0, 3.0, 3.0));
    assemble(vec![t], noise_sigma, seed)
}

/// Two straight open trajectories crossing once.
pub fn crossing_env<T: Scalar>(noise_sigma: T, seed: u64) -> EnvironmentSpec<T> {
    let a = traj(0, "east", false, vec![[-3.0, 0.2], [0.5, 0.2], [3.0, 0.2]]);
    let b = traj(
        1,
        "north",
        false,
        vec![[0.3, -3.0], [0.3, -0.7], [0.3, 3.0]],
    );
    assemble(vec![a, b], noise_sigma, seed)
}

/// Two horizontal and two vertical rectangular loops; every horizontal loop
/// crosses every vertical one four times.
pub fn grid4_env<T: Scalar>(noise_sigma: T, seed: u64) -> EnvironmentSpec<T> {
    let ts = vec![
        traj(0, "south", true, rect_waypoints(0.0, 0.8, 6.0, 2.2)),
        traj(1, "north", true, rect_waypoints(0.0, 3.8, 6.0, 5.2)),
        traj(2, "west", true, rect_waypoints(0.8, 0.0, 2.2, 6.0)),
        traj(3, "east", true, rect_waypoints(3.8, 0.0, 5.2, 6.0)),
    ];
    assemble(ts, noise_sigma, seed)
}

/// Five circular loops in a zig-zag chain; consecutive loops cross twice and
/// non-consecutive loops stay apart, so the crossing graph is a
/// bidirectional path.
pub fn rings5_env<T: Scalar>(noise_sigma: T, seed: u64) -> EnvironmentSpec<T> {
    let ts = (0..5)
        .map(|k| {
            let c = [1.8 * k as f64, if k % 2 == 1 { 0.9 } else { 0.0 }];
            traj(
                k as u32,
                &format!("ring{k}"),
                true,
                circle_waypoints(c, 1.5, 32),
            )
        })
        .collect();
    assemble(ts, noise_sigma, seed)
}

pub fn layout<T: Scalar>(name: &str, noise_sigma: T, seed: u64) -> Option<EnvironmentSpec<T>> {
    match name {
        "loop" => Some(loop_env(noise_sigma, seed)),
        "square" => Some(square_env(noise_sigma, seed)),
        "crossing" => Some(crossing_env(noise_sigma, seed)),
        "grid4" => Some(grid4_env(noise_sigma, seed)),
        "rings5" => Some(rings5_env(noise_sigma, seed)),
        _ => None,
    }
}
