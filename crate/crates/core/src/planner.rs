//! Initial trajectories from shortest paths on a time-expanded grid graph.
//!
//! Layer 0 holds only the start, layer K only the goal, and every layer in
//! between holds all obstacle-free grid nodes. Edges join nodes of consecutive
//! layers that are at most `D_max` apart, including zero-length waiting edges.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{audit_p3, AuditReport};
use crate::error::{Error, Result};
use crate::scenario::{los_class, step_energy, Position, Scenario};
use crate::snrmodel::{rate_at, SnrModel};

/// Which edge cost produced an initial trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitLabel {
    /// Minimum motion energy.
    #[serde(rename = "ME")]
    MinEnergy,
    /// Maximum average rate.
    #[serde(rename = "MR")]
    MaxRate,
}

impl fmt::Display for InitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitLabel::MinEnergy => "ME",
            InitLabel::MaxRate => "MR",
        })
    }
}

/// Layered DAG in which the same node id may appear in several layers and the
/// incoming edges of a node are the same in every layer.
#[derive(Clone, Debug, Default)]
pub struct LayeredGraph {
    /// Node ids allowed in each layer, ascending.
    pub layers: Vec<Vec<usize>>,
    /// Incoming edges `(source, cost)` of each node, sorted by source.
    pub in_edges: Vec<Vec<(usize, f64)>>,
}

/// Exact minimum-cost path through all layers by dynamic programming.
/// Ties are broken towards the smaller predecessor index.
pub fn layered_shortest_path(g: &LayeredGraph) -> Result<(Vec<usize>, f64)> {
    let n = g.in_edges.len();
    if g.layers.is_empty() {
        return Err(Error::GraphInfeasible);
    }
    let mut cost = vec![f64::INFINITY; n];
    for &v in &g.layers[0] {
        cost[v] = 0.0;
    }
    let mut parents: Vec<Vec<u32>> = Vec::with_capacity(g.layers.len() - 1);
    for layer in &g.layers[1..] {
        let mut next = vec![f64::INFINITY; n];
        let mut parent = vec![u32::MAX; n];
        let best: Vec<(usize, f64, u32)> = layer
            .par_iter()
            .map(|&v| {
                let mut b = f64::INFINITY;
                let mut p = u32::MAX;
                for &(u, c) in &g.in_edges[v] {
                    let total = cost[u] + c;
                    if total < b {
                        b = total;
                        p = u as u32;
                    }
                }
                (v, b, p)
            })
            .collect();
        for (v, b, p) in best {
            next[v] = b;
            parent[v] = p;
        }
        cost = next;
        parents.push(parent);
    }
    let last = g.layers.last().expect("non-empty");
    let mut end = None;
    for &v in last {
        if cost[v].is_finite() && end.is_none_or(|(_, c)| cost[v] < c) {
            end = Some((v, cost[v]));
        }
    }
    let (mut v, total) = end.ok_or(Error::GraphInfeasible)?;
    let mut path = vec![v];
    for parent in parents.iter().rev() {
        v = parent[v] as usize;
        path.push(v);
    }
    path.reverse();
    Ok((path, total))
}

/// Grid graph over the workspace plus the exact start and goal positions.
#[derive(Clone, Debug)]
pub struct TimeExpandedGraph {
    pub nodes: Vec<Position>,
    pub start: usize,
    pub goal: usize,
    pub label: InitLabel,
    pub graph: LayeredGraph,
}

impl TimeExpandedGraph {
    pub fn max_edge_length(&self) -> f64 {
        self.graph
            .in_edges
            .iter()
            .enumerate()
            .flat_map(|(v, e)| e.iter().map(move |(u, _)| self.nodes[*u].distance(self.nodes[v])))
            .fold(0.0, f64::max)
    }
}

fn obstacle_free(q: Position, scenario: &Scenario) -> bool {
    scenario.obstacles.iter().all(|o| o.margin(q) >= scenario.d_s)
}

/// Builds the time-expanded graph with ME (step energy) or MR
/// (`r_cap - rate(destination)`) edge costs.
pub fn build_graph(
    scenario: &Scenario,
    model: &SnrModel,
    label: InitLabel,
    grid_spacing: f64,
) -> Result<TimeExpandedGraph> {
    if !(grid_spacing > 0.0) {
        return Err(Error::Domain(format!(
            "grid spacing must be positive, got {grid_spacing}"
        )));
    }
    if !obstacle_free(scenario.q_s, scenario) {
        return Err(Error::InfeasibleEndpoint("start"));
    }
    if !obstacle_free(scenario.q_d, scenario) {
        return Err(Error::InfeasibleEndpoint("goal"));
    }
    let ws = &scenario.workspace;
    // Lattice anchored at the workspace corner, so halving the spacing
    // yields a superset of nodes.
    let nx = (ws.width() / grid_spacing + 1e-9).floor() as usize + 1;
    let ny = (ws.height() / grid_spacing + 1e-9).floor() as usize + 1;
    let mut nodes = Vec::with_capacity(nx * ny + 2);
    for iy in 0..ny {
        for ix in 0..nx {
            let q = Position::new(ws.x_min + ix as f64 * grid_spacing, ws.y_min + iy as f64 * grid_spacing);
            if obstacle_free(q, scenario) {
                nodes.push(q);
            }
        }
    }
    let start = nodes.len();
    nodes.push(scenario.q_s);
    let goal = nodes.len();
    nodes.push(scenario.q_d);

    let node_cost: Vec<f64> = match label {
        InitLabel::MinEnergy => vec![0.0; nodes.len()],
        InitLabel::MaxRate => {
            let rates = nodes
                .par_iter()
                .map(|&q| rate_at(model, los_class(q, scenario), q, scenario))
                .collect::<Result<Vec<f64>>>()?;
            let cap = rates.iter().cloned().fold(0.0, f64::max);
            rates.iter().map(|r| cap - r).collect()
        }
    };

    let d_max = scenario.d_max();
    let reach = d_max + 1e-9;
    // Bucket nodes into cells of size d_max for neighbor search.
    let cell = |q: Position| {
        (
            ((q.x - ws.x_min) / d_max).floor() as i64,
            ((q.y - ws.y_min) / d_max).floor() as i64,
        )
    };
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
    for (i, &q) in nodes.iter().enumerate() {
        buckets.entry(cell(q)).or_default().push(i);
    }
    let in_edges: Vec<Vec<(usize, f64)>> = nodes
        .par_iter()
        .map(|&v| {
            let (cx, cy) = cell(v);
            let mut edges = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(b) = buckets.get(&(cx + dx, cy + dy)) {
                        for &u in b {
                            let len = nodes[u].distance(v);
                            if len <= reach {
                                let c = match label {
                                    InitLabel::MinEnergy => step_energy(len, scenario),
                                    InitLabel::MaxRate => 0.0,
                                };
                                edges.push((u, c));
                            }
                        }
                    }
                }
            }
            edges.sort_by_key(|e| e.0);
            edges
        })
        .collect();
    let in_edges = match label {
        InitLabel::MinEnergy => in_edges,
        InitLabel::MaxRate => in_edges
            .into_iter()
            .enumerate()
            .map(|(v, e)| e.into_iter().map(|(u, _)| (u, node_cost[v])).collect())
            .collect(),
    };
    let k = scenario.k_slots;
    let interior: Vec<usize> = (0..nodes.len()).collect();
    let mut layers = Vec::with_capacity(k + 1);
    layers.push(vec![start]);
    for _ in 1..k {
        layers.push(interior.clone());
    }
    layers.push(vec![goal]);
    Ok(TimeExpandedGraph {
        nodes,
        start,
        goal,
        label,
        graph: LayeredGraph { layers, in_edges },
    })
}

/// Minimum-cost K-step trajectory through the graph.
pub fn shortest_path(graph: &TimeExpandedGraph) -> Result<Vec<Position>> {
    let (path, _) = layered_shortest_path(&graph.graph)?;
    Ok(path.into_iter().map(|i| graph.nodes[i]).collect())
}

#[derive(Clone, Debug)]
pub struct CandidateReport {
    pub label: InitLabel,
    /// `None` when the graph has no start-to-goal path.
    pub trajectory: Option<Vec<Position>>,
    pub audit: Option<AuditReport>,
}

/// Outcome of the initial-solution selection.
#[derive(Clone, Debug)]
pub enum InitialSolution {
    Feasible {
        trajectory: Vec<Position>,
        label: InitLabel,
        candidates: Vec<CandidateReport>,
    },
    Infeasible {
        candidates: Vec<CandidateReport>,
    },
}

pub const DEFAULT_GRID_SPACING: f64 = 1.0;

/// Uses the ME trajectory when it satisfies every constraint of the original
/// problem, the MR trajectory otherwise, and reports infeasibility when
/// neither does.
pub fn select_initial(scenario: &Scenario, model: &SnrModel, grid_spacing: f64) -> Result<InitialSolution> {
    let mut candidates = Vec::new();
    for label in [InitLabel::MinEnergy, InitLabel::MaxRate] {
        let graph = build_graph(scenario, model, label, grid_spacing)?;
        let traj = match shortest_path(&graph) {
            Ok(t) => t,
            Err(Error::GraphInfeasible) => {
                candidates.push(CandidateReport {
                    label,
                    trajectory: None,
                    audit: None,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let audit = audit_p3(&traj, scenario, model);
        let ok = audit.feasible();
        candidates.push(CandidateReport {
            label,
            trajectory: Some(traj.clone()),
            audit: Some(audit),
        });
        if ok {
            return Ok(InitialSolution::Feasible {
                trajectory: traj,
                label,
                candidates,
            });
        }
    }
    Ok(InitialSolution::Infeasible { candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;
    use crate::snrmodel::SnrParams;

    fn open_scenario() -> Scenario {
        let mut s = ScenarioConfig::reference().build().unwrap();
        s.obstacles.clear();
        s.r_min = 0.0;
        s
    }

    fn model(s: &Scenario) -> SnrModel {
        SnrModel::uniform(
            SnrParams {
                a: 1e-6,
                b: 1e-6,
                c: 1e-6,
                nu: 2.0,
                mu: 2.0,
            },
            s,
        )
    }

    #[test]
    fn single_slot_path() {
        let mut s = open_scenario();
        s.k_slots = 1;
        s.q_s = Position::new(10.0, 10.0);
        s.q_d = Position::new(12.0, 11.0);
        let g = build_graph(&s, &model(&s), InitLabel::MinEnergy, 1.0).unwrap();
        assert_eq!(shortest_path(&g).unwrap(), vec![s.q_s, s.q_d]);
    }

    #[test]
    fn too_few_slots_is_infeasible() {
        let mut s = open_scenario();
        s.k_slots = 5;
        let g = build_graph(&s, &model(&s), InitLabel::MinEnergy, 1.0).unwrap();
        assert!(matches!(shortest_path(&g), Err(Error::GraphInfeasible)));
    }

    #[test]
    fn open_floor_me_path_is_nearly_straight() {
        let mut s = open_scenario();
        s.q_s = Position::new(10.0, 15.0);
        s.q_d = Position::new(40.0, 15.0);
        let g = build_graph(&s, &model(&s), InitLabel::MinEnergy, 1.0).unwrap();
        let path = shortest_path(&g).unwrap();
        assert!(path.iter().all(|q| (q.y - 15.0).abs() < 1e-12), "{path:?}");
        assert!(path.windows(2).all(|w| (w[1].x - w[0].x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn edges_respect_step_bound_and_nodes_clear_obstacles() {
        let s = ScenarioConfig::reference().build().unwrap();
        let g = build_graph(&s, &model(&s), InitLabel::MinEnergy, 1.0).unwrap();
        assert!(g.max_edge_length() <= s.d_max() + 1e-9);
        for q in &g.nodes {
            for o in &s.obstacles {
                assert!(o.margin(*q) >= s.d_s);
            }
        }
    }

    #[test]
    fn endpoint_inside_obstacle() {
        let mut s = ScenarioConfig::reference().build().unwrap();
        s.q_d = s.obstacles[0].center();
        assert!(matches!(
            build_graph(&s, &model(&s), InitLabel::MinEnergy, 1.0),
            Err(Error::InfeasibleEndpoint("goal"))
        ));
    }

    #[test]
    fn zero_rate_requirement_selects_me() {
        let s = open_scenario();
        match select_initial(&s, &model(&s), 1.0).unwrap() {
            InitialSolution::Feasible { label, .. } => assert_eq!(label, InitLabel::MinEnergy),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unreachable_rate_is_infeasible() {
        let s = open_scenario().with_r_min(1e15);
        assert!(matches!(
            select_initial(&s, &model(&s), 1.0).unwrap(),
            InitialSolution::Infeasible { .. }
        ));
    }
}
