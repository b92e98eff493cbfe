//! Initial trajectories from shortest paths on a time-expanded grid graph.

use thiserror::Error;

use crate::radiomap::{query_rate, RadioMap, RadioMapError};
use crate::rmap::Trajectory;
use crate::scenario::{Point, Scenario};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("grid step {step} m exceeds the per-slot reach {d_max} m")]
    StepTooLarge { step: f64, d_max: f64 },
    #[error("the {0} position violates the obstacle margin")]
    Blocked(&'static str),
    #[error("the goal cannot be reached within {k} slots")]
    NoPath { k: usize },
    #[error(
        "no feasible initial trajectory: ME reaches {rate_me:.4e} bit/s, MR reaches {rate_mr:.4e} bit/s, r_min = {r_min:.4e} bit/s"
    )]
    Infeasible { rate_me: f64, rate_mr: f64, r_min: f64 },
    #[error(transparent)]
    Map(#[from] RadioMapError),
}

/// Collision-free grid anchored at the start, plus the exact goal.
///
/// A node's neighbors are the nodes within one slot's reach among its eight
/// grid neighbors, itself (stay) and, for nodes near the goal, the goal.
#[derive(Debug, Clone)]
pub struct TimeExpandedGraph {
    pub nodes: Vec<Point>,
    pub neighbors: Vec<Vec<usize>>,
    /// Map rate at each node (bit/s).
    pub rates: Vec<f64>,
    pub start: usize,
    pub goal: usize,
    pub k: usize,
    pub step: f64,
}

impl TimeExpandedGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_len(&self, u: usize, v: usize) -> f64 {
        (self.nodes[u] - self.nodes[v]).norm()
    }
}

/// Grid columns/rows reachable from the anchor inside `[0, extent]`.
fn axis(anchor: f64, extent: f64, step: f64) -> (i64, i64) {
    let lo = -((anchor / step + 1e-9).floor() as i64);
    let hi = ((extent - anchor) / step + 1e-9).floor() as i64;
    (lo, hi)
}

pub fn build_graph(s: &Scenario, map: &RadioMap, grid_step_m: f64) -> Result<TimeExpandedGraph, GraphError> {
    let mut g = build_grid(s, grid_step_m)?;
    g.rates = g.nodes.iter().map(|q| query_rate(map, s, q)).collect::<Result<Vec<_>, _>>()?;
    Ok(g)
}

/// Graph geometry only; `rates` is left empty.
pub fn build_grid(s: &Scenario, grid_step_m: f64) -> Result<TimeExpandedGraph, GraphError> {
    let d_max = s.d_max();
    if !(grid_step_m > 0.0 && grid_step_m <= d_max) {
        return Err(GraphError::StepTooLarge { step: grid_step_m, d_max });
    }
    if s.collides(&s.q_s, s.d_s) {
        return Err(GraphError::Blocked("start"));
    }
    if s.collides(&s.q_d, s.d_s) {
        return Err(GraphError::Blocked("goal"));
    }
    let (x_lo, x_hi) = axis(s.q_s.x, s.area_width_m, grid_step_m);
    let (y_lo, y_hi) = axis(s.q_s.y, s.area_height_m, grid_step_m);
    let cols = (x_hi - x_lo + 1) as usize;
    let rows = (y_hi - y_lo + 1) as usize;

    let mut cell_node = vec![usize::MAX; cols * rows];
    let mut nodes = Vec::new();
    let mut start = usize::MAX;
    for r in 0..rows {
        for c in 0..cols {
            let p = Point::new(
                s.q_s.x + (x_lo + c as i64) as f64 * grid_step_m,
                s.q_s.y + (y_lo + r as i64) as f64 * grid_step_m,
            );
            if c as i64 + x_lo == 0 && r as i64 + y_lo == 0 {
                start = nodes.len();
                cell_node[r * cols + c] = nodes.len();
                nodes.push(s.q_s);
            } else if !s.collides(&p, s.d_s) {
                cell_node[r * cols + c] = nodes.len();
                nodes.push(p);
            }
        }
    }
    let grid_nodes = nodes.len();
    let goal = match nodes.iter().position(|p| *p == s.q_d) {
        Some(g) => g,
        None => {
            nodes.push(s.q_d);
            nodes.len() - 1
        }
    };

    let mut neighbors = vec![Vec::new(); nodes.len()];
    for r in 0..rows {
        for c in 0..cols {
            let u = cell_node[r * cols + c];
            if u == usize::MAX {
                continue;
            }
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr < 0 || cc < 0 || rr >= rows as i64 || cc >= cols as i64 {
                        continue;
                    }
                    let v = cell_node[rr as usize * cols + cc as usize];
                    if v != usize::MAX && (nodes[u] - nodes[v]).norm() <= d_max {
                        neighbors[u].push(v);
                    }
                }
            }
        }
    }
    if goal >= grid_nodes {
        neighbors[goal].push(goal);
        for u in 0..grid_nodes {
            if (nodes[u] - s.q_d).norm() <= d_max {
                neighbors[u].push(goal);
                neighbors[goal].push(u);
            }
        }
    }
    for n in &mut neighbors {
        n.sort_unstable();
        n.dedup();
    }
    Ok(TimeExpandedGraph { nodes, neighbors, rates: Vec::new(), start, goal, k: s.k, step: grid_step_m })
}

/// Fewest slots from start to goal on the default graph, if connected.
pub fn min_slots(s: &Scenario) -> Result<Option<usize>, GraphError> {
    let g = build_grid(s, s.d_max() / 2.0)?;
    let mut hops = vec![usize::MAX; g.node_count()];
    let mut queue = std::collections::VecDeque::from([g.start]);
    hops[g.start] = 0;
    while let Some(u) = queue.pop_front() {
        for &v in &g.neighbors[u] {
            if hops[v] == usize::MAX {
                hops[v] = hops[u] + 1;
                queue.push_back(v);
            }
        }
    }
    Ok((hops[g.goal] != usize::MAX).then_some(hops[g.goal]))
}

/// True iff the default graph has a start-goal path within K slots.
pub fn reachable(s: &Scenario) -> bool {
    matches!(min_slots(s), Ok(Some(h)) if h <= s.k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Minimum motion energy.
    MinEnergy,
    /// Maximum sum of map rates over the visited positions.
    MaxRate,
}

/// Layered shortest path from the start (layer 0) to the goal (layer K).
/// Returns the node sequence.
pub fn shortest_path(g: &TimeExpandedGraph, s: &Scenario, mode: InitMode) -> Result<Vec<usize>, GraphError> {
    let n = g.node_count();
    let r_ub = g.rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let node_cost = |v: usize| r_ub - g.rates[v];
    let edge_cost = |u: usize, v: usize| match mode {
        InitMode::MinEnergy => s.motion.slot_energy(g.edge_len(u, v), s.delta_t),
        InitMode::MaxRate => node_cost(v),
    };

    let mut cost = vec![f64::INFINITY; n];
    cost[g.start] = match mode {
        InitMode::MinEnergy => 0.0,
        InitMode::MaxRate => node_cost(g.start),
    };
    let mut pred = vec![vec![usize::MAX; n]; g.k + 1];
    for layer in 1..=g.k {
        let mut next = vec![f64::INFINITY; n];
        // neighbor lists are symmetric and sorted, so scanning them in order
        // keeps the smallest predecessor on ties
        for v in 0..n {
            for &u in &g.neighbors[v] {
                if cost[u].is_finite() {
                    let c = cost[u] + edge_cost(u, v);
                    if c < next[v] {
                        next[v] = c;
                        pred[layer][v] = u;
                    }
                }
            }
        }
        cost = next;
    }
    if !cost[g.goal].is_finite() {
        return Err(GraphError::NoPath { k: g.k });
    }
    let mut path = vec![g.goal; g.k + 1];
    for layer in (1..=g.k).rev() {
        path[layer - 1] = pred[layer][path[layer]];
    }
    debug_assert_eq!(path[0], g.start);
    Ok(path)
}

pub fn initial_solution(g: &TimeExpandedGraph, s: &Scenario, map: &RadioMap, mode: InitMode) -> Result<Trajectory, GraphError> {
    let path = shortest_path(g, s, mode)?;
    let mut positions: Vec<Point> = path.iter().map(|&v| g.nodes[v]).collect();
    positions[0] = s.q_s;
    positions[s.k] = s.q_d;
    let t = Trajectory::new(s, positions).with_map(s, map)?;
    debug_assert!(t.check(s).is_ok());
    Ok(t)
}

/// Which initial solution was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitChoice {
    MinEnergy,
    MaxRate,
}

impl std::fmt::Display for InitChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitChoice::MinEnergy => "ME",
            InitChoice::MaxRate => "MR",
        })
    }
}

/// ME if it meets `r_min` on the map, otherwise MR, otherwise infeasible.
pub fn select_initial(me: &Trajectory, mr: &Trajectory, r_min: f64) -> Result<(Trajectory, InitChoice), GraphError> {
    if me.avg_rate_map >= r_min {
        Ok((me.clone(), InitChoice::MinEnergy))
    } else if mr.avg_rate_map >= r_min {
        Ok((mr.clone(), InitChoice::MaxRate))
    } else {
        Err(GraphError::Infeasible { rate_me: me.avg_rate_map, rate_mr: mr.avg_rate_map, r_min })
    }
}

/// Builds the default graph and returns both initial solutions.
pub fn initial_pair(s: &Scenario, map: &RadioMap) -> Result<(Trajectory, Trajectory), GraphError> {
    let g = build_graph(s, map, s.d_max() / 2.0)?;
    Ok((initial_solution(&g, s, map, InitMode::MinEnergy)?, initial_solution(&g, s, map, InitMode::MaxRate)?))
}
