//! Comparison anchors: a rate-maximizing trajectory and the energy lower bound
//! without obstacles and rate target.

use thiserror::Error;

use crate::radiomap::{RadioMap, RadioMapError, SnrModel};
use crate::rmap::{avg_model_rate, candidate_positions, Goal, Lowering, RmapTrace, StopReason, TraceRecord, Trajectory};
use crate::scenario::Scenario;
use crate::socp::{self, SolveStatus};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("initial trajectory violates a motion constraint: {0}")]
    InvalidInitial(String),
    #[error("solver returned {0}")]
    Solver(SolveStatus),
    #[error(transparent)]
    Map(#[from] RadioMapError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxRateConfig {
    pub t_init: f64,
    pub epsilon: f64,
    pub n_it_max: usize,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for MaxRateConfig {
    fn default() -> Self {
        MaxRateConfig {
            t_init: 1.0,
            epsilon: 0.01,
            n_it_max: 100,
            solver_tol: socp::DEFAULT_TOL,
            solver_max_iter: socp::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaxRateResult {
    pub trajectory: Trajectory,
    pub trace: RmapTrace,
    /// Average model rate of the incumbent after each row of the trace.
    pub objective: Vec<f64>,
}

/// SCO on the average model rate with a fixed trust radius.
pub fn max_rate_trajectory(
    s: &Scenario,
    m: &SnrModel,
    map: &RadioMap,
    init: &Trajectory,
    cfg: &MaxRateConfig,
) -> Result<MaxRateResult, BaselineError> {
    init.check(s).map_err(BaselineError::InvalidInitial)?;
    let mut current = Trajectory::evaluate(s, m, map, init.positions.clone())?;
    let mut trust = vec![cfg.t_init; s.k + 1];
    trust[0] = 0.0;
    trust[s.k] = 0.0;
    let mut objective = vec![avg_model_rate(m, s, &current.positions)];
    let mut records = vec![TraceRecord {
        iteration: 0,
        energy: current.energy_j,
        accepted: true,
        shrunk_k: None,
        avg_rate_map: current.avg_rate_map,
        solver_status: "initial".into(),
    }];
    let mut stop = StopReason::MaxIterations;
    for j in 1..=cfg.n_it_max {
        let program = Lowering {
            s,
            energy: false,
            goal: Some((Goal::Rate, m)),
            incumbent: Some(&current.positions),
            trust: Some(&trust),
            obstacles: true,
        }
        .build();
        let res = socp::solve(&program, cfg.solver_tol, cfg.solver_max_iter);
        let prev = *objective.last().unwrap();
        let mut record = TraceRecord {
            iteration: j,
            energy: current.energy_j,
            accepted: false,
            shrunk_k: None,
            avg_rate_map: current.avg_rate_map,
            solver_status: res.status.to_string(),
        };
        if !res.status.has_solution() {
            records.push(record);
            objective.push(prev);
            if j == 1 {
                return Err(BaselineError::Solver(res.status));
            }
            stop = StopReason::NoDescent;
            break;
        }
        let cand = Trajectory::evaluate(s, m, map, candidate_positions(s, &res.x))?;
        let value = avg_model_rate(m, s, &cand.positions);
        if let Err(e) = cand.check(s) {
            log::debug!("max-rate iteration {j}: discarding candidate: {e}");
            record.solver_status = "constraint_violation".into();
        } else if value < prev {
            record.solver_status = "no_ascent".into();
        } else {
            current = cand;
            record.accepted = true;
            record.energy = current.energy_j;
            record.avg_rate_map = current.avg_rate_map;
            records.push(record);
            objective.push(value);
            if (value - prev) <= cfg.epsilon * prev.abs() {
                stop = StopReason::Converged;
                break;
            }
            continue;
        }
        records.push(record);
        objective.push(prev);
        stop = StopReason::NoDescent;
        break;
    }
    Ok(MaxRateResult { trajectory: current, trace: RmapTrace { records, stop }, objective })
}

/// Minimum energy over paths that respect only the endpoints and the
/// per-slot reach.
pub fn lower_bound(s: &Scenario, solver_tol: f64, solver_max_iter: usize) -> Result<(f64, Trajectory), BaselineError> {
    let program = Lowering { s, energy: true, goal: None, incumbent: None, trust: None, obstacles: false }.build();
    let res = socp::solve(&program, solver_tol, solver_max_iter);
    if !res.status.has_solution() {
        return Err(BaselineError::Solver(res.status));
    }
    let t = Trajectory::new(s, candidate_positions(s, &res.x));
    Ok((t.energy_j, t))
}
