use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::detection::DetectionController;
use crate::error::{Result, TngError};
use crate::imitation::RegressionController;
use crate::policy::{Action, Policy};
use crate::scalar::Scalar;
use crate::sim::{Environment, Observation, Pose, TrajectoryId};
use crate::tng::classifier::{classify_trajectory, TrajectoryClassifier};
use crate::tng::exemplar::{detect_intersection, IntersectionClassifier};

pub const GRAPH_FORMAT: &str = "tng-graph/1";

/// The trajectory-following controller attached to a vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "kind", rename_all = "kebab-case")]
pub enum Controller<T> {
    Regression(RegressionController<T>),
    Detection(DetectionController<T>),
}

impl<T: Scalar> Controller<T> {
    pub fn feature_dim(&self) -> usize {
        match self {
            Controller::Regression(c) => c.feature_dim(),
            Controller::Detection(c) => c.detector.feature_dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Controller::Regression(_) => "regression",
            Controller::Detection(_) => "detection",
        }
    }
}

impl<T: Scalar> Policy<T> for Controller<T> {
    fn act(&mut self, obs: &Observation<T>, pose: &Pose<T>, dt: T) -> Result<Action<T>> {
        match self {
            Controller::Regression(c) => Policy::act(c, obs, pose, dt),
            Controller::Detection(c) => Policy::act(c, obs, pose, dt),
        }
    }

    fn reset(&mut self) {
        match self {
            Controller::Regression(c) => Policy::reset(c),
            Controller::Detection(c) => Policy::reset(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Vertex<T> {
    pub trajectory: TrajectoryId,
    pub controller: Controller<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Edge<T> {
    /// Metres.
    pub weight: T,
    pub classifier: IntersectionClassifier<T>,
}

impl<T> Edge<T> {
    pub fn from(&self) -> usize {
        self.classifier.from
    }

    pub fn to(&self) -> usize {
        self.classifier.to
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TngGraph<T> {
    pub vertices: Vec<Vertex<T>>,
    pub edges: Vec<Edge<T>>,
    pub trajectory_classifier: TrajectoryClassifier<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reachability {
    /// `reachable[i][j]`: a directed path leads from `i` to `j`.
    pub reachable: Vec<Vec<bool>>,
    pub unreachable_pairs: Vec<(usize, usize)>,
    pub navigable: bool,
}

impl<T: Scalar> TngGraph<T> {
    pub fn build(
        vertices: Vec<Vertex<T>>,
        trajectory_classifier: TrajectoryClassifier<T>,
        edges: Vec<Edge<T>>,
    ) -> Result<Self> {
        let g = Self {
            vertices,
            edges,
            trajectory_classifier,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.vertices.len();
        if c == 0 {
            return Err(TngError::Validation("graph has no vertices".into()));
        }
        if self.trajectory_classifier.classes() != c {
            return Err(TngError::Validation(format!(
                "trajectory classifier has {} classes for {c} vertices",
                self.trajectory_classifier.classes()
            )));
        }
        let d = self.trajectory_classifier.feature_dim();
        for (i, v) in self.vertices.iter().enumerate() {
            if v.controller.feature_dim() != d {
                return Err(TngError::Validation(format!(
                    "vertex {i} controller expects {} features, classifier {d}",
                    v.controller.feature_dim()
                )));
            }
        }
        for (k, e) in self.edges.iter().enumerate() {
            if e.from() >= c || e.to() >= c {
                return Err(TngError::Validation(format!(
                    "edge {k} ({} -> {}) references a missing vertex",
                    e.from(),
                    e.to()
                )));
            }
            if e.from() == e.to() {
                return Err(TngError::Validation(format!("edge {k} is a self loop")));
            }
            if !(e.weight > T::zero()) || !e.weight.is_finite() {
                return Err(TngError::Validation(format!("edge {k} weight must be > 0")));
            }
            if e.classifier.matcher.feature_dim() != d {
                return Err(TngError::Validation(format!(
                    "edge {k} exemplars have {} features, classifier {d}",
                    e.classifier.matcher.feature_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn vertex_of(&self, traj: TrajectoryId) -> Option<usize> {
        self.vertices.iter().position(|v| v.trajectory == traj)
    }

    pub fn reachability(&self) -> Reachability {
        let c = self.vertices.len();
        let mut reachable = vec![vec![false; c]; c];
        for (s, row) in reachable.iter_mut().enumerate() {
            let mut stack = vec![s];
            row[s] = true;
            while let Some(u) = stack.pop() {
                for e in self.edges.iter().filter(|e| e.from() == u) {
                    if !row[e.to()] {
                        row[e.to()] = true;
                        stack.push(e.to());
                    }
                }
            }
        }
        let unreachable_pairs: Vec<_> = (0..c)
            .flat_map(|i| (0..c).map(move |j| (i, j)))
            .filter(|&(i, j)| !reachable[i][j])
            .collect();
        Reachability {
            navigable: unreachable_pairs.is_empty(),
            reachable,
            unreachable_pairs,
        }
    }

    pub fn to_json(&self) -> String {
        let doc = GraphFile {
            format: GRAPH_FORMAT.into(),
            graph: self.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("graph serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphFile<T> = serde_json::from_str(text).map_err(|e| TngError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if doc.format != GRAPH_FORMAT {
            return Err(TngError::Validation(format!(
                "expected format {GRAPH_FORMAT}, got {}",
                doc.format
            )));
        }
        doc.graph.validate()?;
        Ok(doc.graph)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct GraphFile<T> {
    format: String,
    #[serde(flatten)]
    graph: TngGraph<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub vertex: usize,
    /// Indices of every edge whose classifier fires.
    pub firing: Vec<usize>,
}

pub fn localize<T: Scalar>(tng: &TngGraph<T>, obs: &Observation<T>) -> Result<Localization> {
    let vertex = classify_trajectory(&tng.trajectory_classifier, obs)?.index;
    let mut firing = Vec::new();
    for (k, e) in tng.edges.iter().enumerate() {
        if detect_intersection(&e.classifier, obs)? {
            firing.push(k);
        }
    }
    Ok(Localization { vertex, firing })
}

pub fn identify_goal<T: Scalar>(tng: &TngGraph<T>, goal: &Observation<T>) -> Result<usize> {
    Ok(classify_trajectory(&tng.trajectory_classifier, goal)?.index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Plan<T> {
    pub vertices: Vec<usize>,
    /// Edge indices into the graph, one per hop.
    pub edges: Vec<usize>,
    pub total_weight: T,
}

#[derive(PartialEq)]
struct Entry<T>(T, usize);

impl<T: Scalar> Eq for Entry<T> {}

impl<T: Scalar> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Entry<T> {
    // min-heap on distance, then on vertex
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Distance from every vertex to `dst` over the directed edges.
fn distances_to<T: Scalar>(c: usize, edges: &[(usize, usize, T)], dst: usize) -> Vec<T> {
    let mut dist = vec![T::infinity(); c];
    dist[dst] = T::zero();
    let mut heap = BinaryHeap::new();
    heap.push(Entry(T::zero(), dst));
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(u, _, w) in edges.iter().filter(|e| e.1 == v) {
            let nd = d + w;
            if nd < dist[u] {
                dist[u] = nd;
                heap.push(Entry(nd, u));
            }
        }
    }
    dist
}

/// Shortest directed path by Dijkstra. Among equal-weight paths the
/// lexicographically smallest vertex sequence wins; parallel edges resolve to
/// the lighter, then the lower-indexed one.
pub fn plan_edges<T: Scalar>(
    c: usize,
    edges: &[(usize, usize, T)],
    src: usize,
    dst: usize,
) -> Result<Plan<T>> {
    if src >= c || dst >= c {
        return Err(TngError::InvalidInput(format!(
            "vertex out of range 0..{c}"
        )));
    }
    let dist = distances_to(c, edges, dst);
    if !dist[src].is_finite() {
        return Err(TngError::NoPath { from: src, to: dst });
    }
    let tol = |d: T| T::lit(1e-9) * d.abs().max(T::one());
    let mut plan = Plan {
        vertices: vec![src],
        edges: Vec::new(),
        total_weight: T::zero(),
    };
    let mut u = src;
    while u != dst {
        let mut best: Option<(usize, usize)> = None;
        for (k, &(a, b, w)) in edges.iter().enumerate() {
            if a != u || !dist[b].is_finite() || (w + dist[b] - dist[u]).abs() > tol(dist[u]) {
                continue;
            }
            let better = match best {
                None => true,
                Some((bk, bv)) => b < bv || (b == bv && w < edges[bk].2),
            };
            if better {
                best = Some((k, b));
            }
        }
        // tight edges strictly decrease the remaining distance, so this ends
        let (k, v) = best.expect("a tight edge leaves every vertex with a finite distance");
        plan.edges.push(k);
        plan.vertices.push(v);
        plan.total_weight = plan.total_weight + edges[k].2;
        u = v;
    }
    Ok(plan)
}

pub fn plan<T: Scalar>(tng: &TngGraph<T>, src: usize, dst: usize) -> Result<Plan<T>> {
    let edges: Vec<_> = tng
        .edges
        .iter()
        .map(|e| (e.from(), e.to(), e.weight))
        .collect();
    plan_edges(tng.vertices.len(), &edges, src, dst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Expected arc travelled on the source trajectory before its next
    /// crossing onto the destination, from a uniformly random position.
    #[default]
    ArcLength,
    HopCount,
}

/// Weight of the edge leaving trajectory `from` for `to`.
pub fn edge_weight<T: Scalar>(
    env: &Environment<T>,
    from: TrajectoryId,
    to: TrajectoryId,
    mode: WeightMode,
) -> Result<T> {
    let traj = env
        .trajectory(from)
        .ok_or_else(|| TngError::InvalidInput(format!("unknown trajectory {from}")))?;
    let mut arcs: Vec<T> = env
        .crossings_from(from)
        .filter(|x| x.to_trajectory == to)
        .map(|x| x.from_arc)
        .collect();
    if arcs.is_empty() {
        return Err(TngError::InvalidInput(format!(
            "no crossing from {from} to {to}"
        )));
    }
    if mode == WeightMode::HopCount {
        return Ok(T::one());
    }
    arcs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let half = T::lit(0.5);
    let w = if traj.closed {
        let l = traj.length();
        let mut s = T::zero();
        for (k, &a) in arcs.iter().enumerate() {
            let next = if k + 1 < arcs.len() {
                arcs[k + 1]
            } else {
                arcs[0] + l
            };
            let gap = next - a;
            s = s + half * gap * gap;
        }
        s / l
    } else {
        let last = *arcs.last().expect("non-empty");
        let mut prev = T::zero();
        let mut s = T::zero();
        for &a in &arcs {
            s = s + half * (a - prev) * (a - prev);
            prev = a;
        }
        if last > T::zero() {
            s / last
        } else {
            T::zero()
        }
    };
    Ok(w.max(T::lit(1e-3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive simple-path search.
    fn brute(c: usize, edges: &[(usize, usize, f64)], src: usize, dst: usize) -> Option<f64> {
        fn go(
            u: usize,
            dst: usize,
            acc: f64,
            seen: &mut Vec<bool>,
            edges: &[(usize, usize, f64)],
            best: &mut Option<f64>,
        ) {
            if u == dst {
                *best = Some(best.map_or(acc, |b: f64| b.min(acc)));
                return;
            }
            for &(a, b, w) in edges {
                if a == u && !seen[b] {
                    seen[b] = true;
                    go(b, dst, acc + w, seen, edges, best);
                    seen[b] = false;
                }
            }
        }
        let mut seen = vec![false; c];
        seen[src] = true;
        let mut best = None;
        go(src, dst, 0.0, &mut seen, edges, &mut best);
        best
    }

    fn graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>, usize, usize)> {
        (2usize..=8).prop_flat_map(|c| {
            (
                Just(c),
                proptest::collection::vec((0..c, 0..c, 0.1f64..10.0), 0..=20),
                0..c,
                0..c,
            )
        })
    }

    #[test]
    fn trivial_plans() {
        let p = plan_edges(2, &[(0, 1, 5.0)], 0, 1).unwrap();
        assert_eq!(p.vertices, vec![0, 1]);
        assert_eq!(p.total_weight, 5.0);
        let p = plan_edges(2, &[(0, 1, 5.0)], 1, 1).unwrap();
        assert!(p.edges.is_empty());
        assert_eq!(p.total_weight, 0.0);
        assert!(matches!(
            plan_edges(2, &[(0, 1, 5.0)], 1, 0),
            Err(TngError::NoPath { .. })
        ));
    }

    #[test]
    fn ties_prefer_smaller_sequences() {
        let e = [(0, 2, 1.0), (2, 3, 1.0), (0, 1, 1.0), (1, 3, 1.0)];
        assert_eq!(plan_edges(4, &e, 0, 3).unwrap().vertices, vec![0, 1, 3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn matches_exhaustive_search((c, edges, src, dst) in graph()) {
            let edges: Vec<_> = edges.into_iter().filter(|e| e.0 != e.1).collect();
            match (plan_edges(c, &edges, src, dst), brute(c, &edges, src, dst)) {
                (Ok(p), Some(b)) => {
                    prop_assert!((p.total_weight - b).abs() <= 1e-9 * b.max(1.0));
                    let sum: f64 = p.edges.iter().map(|&k| edges[k].2).sum();
                    prop_assert!((sum - p.total_weight).abs() < 1e-12);
                    for (w, &k) in p.vertices.windows(2).zip(&p.edges) {
                        prop_assert_eq!((edges[k].0, edges[k].1), (w[0], w[1]));
                    }
                }
                (Err(TngError::NoPath { .. }), None) => {}
                (r, b) => prop_assert!(false, "plan {:?} vs brute {:?}", r, b),
            }
        }

        #[test]
        fn scaling_weights_keeps_the_route((c, edges, src, dst) in graph(), k in 0.01f64..100.0) {
            let edges: Vec<_> = edges.into_iter().filter(|e| e.0 != e.1).collect();
            let scaled: Vec<_> = edges.iter().map(|&(a, b, w)| (a, b, w * k)).collect();
            if let Ok(p) = plan_edges(c, &edges, src, dst) {
                prop_assert_eq!(plan_edges(c, &scaled, src, dst).unwrap().vertices, p.vertices);
            }
        }
    }
}
