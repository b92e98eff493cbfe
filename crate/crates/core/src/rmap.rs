//! Radio-map-assisted planning: successive convex optimization of the
//! trajectory energy under the fitted average-rate model, with every update
//! gated on the rate measured in the radio map.

use std::fmt;
use std::io::{Read, Write};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphinit::{initial_pair, select_initial, GraphError, InitChoice};
use crate::radiomap::{map_rates, model_snr, RadioMap, RadioMapError, SnrModel};
use crate::scenario::{MotionConstants, Point, Scenario};
use crate::socp::{self, ConeProgram, LinExpr};

#[derive(Debug, Error)]
pub enum RmapError {
    #[error("initial trajectory violates a motion constraint: {0}")]
    InvalidInitial(String),
    #[error("initial trajectory average map rate {avg_rate:.4e} bit/s is below r_min = {r_min:.4e} bit/s")]
    InitialInfeasible { avg_rate: f64, r_min: f64 },
    #[error(transparent)]
    Map(#[from] RadioMapError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Total motion energy of a position sequence.
pub fn motion_energy(positions: &[Point], motion: &MotionConstants, delta_t: f64) -> f64 {
    assert!(positions.len() >= 2, "a trajectory needs at least two positions");
    positions
        .windows(2)
        .map(|w| motion.slot_energy((w[1] - w[0]).norm(), delta_t))
        .sum()
}

/// Fitted-model rate at one position (bit/s).
pub fn model_rate(m: &SnrModel, s: &Scenario, q: &Point) -> f64 {
    let snr = model_snr(m, s.dist_irs(q), s.dist_ap(q), s.radio.p_t, s.radio.sigma2).expect("heights keep distances positive");
    s.radio.bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
}

/// Average model rate: the sum over all positions divided by the number of slots.
pub fn avg_model_rate(m: &SnrModel, s: &Scenario, positions: &[Point]) -> f64 {
    let k = (positions.len().max(2) - 1) as f64;
    positions.iter().map(|q| model_rate(m, s, q)).sum::<f64>() / k
}

fn check_distances(d_i: f64, d_a: f64) -> Result<(), RadioMapError> {
    if d_i > 0.0 && d_a > 0.0 {
        Ok(())
    } else {
        Err(RadioMapError::Domain { d_i, d_a })
    }
}

/// Pieces of the model: `(snr, dsnr/dd_i, dsnr/dd_a)` with `p_t / sigma^2` applied.
fn snr_parts(m: &SnrModel, d_i: f64, d_a: f64, scale: f64) -> (f64, f64, f64) {
    let (nu, mu) = (m.nu_hat, m.mu_hat);
    let ta = m.a_hat * d_i.powf(-nu);
    let tb = m.b_hat * d_i.powf(-nu / 2.0) * d_a.powf(-mu / 2.0);
    let tc = m.c_hat * d_a.powf(-mu);
    let snr = (ta + tb + tc) * scale;
    let s_i = (-nu * ta - nu / 2.0 * tb) / d_i * scale;
    let s_a = (-mu * tc - mu / 2.0 * tb) / d_a * scale;
    (snr, s_i, s_a)
}

/// Partial derivatives `(dr/dd_i, dr/dd_a)` of `log2(1 + SNR)`, i.e. of the
/// rate per hertz of bandwidth.
pub fn rate_gradient(m: &SnrModel, d_i: f64, d_a: f64, p_t: f64, sigma2: f64) -> Result<(f64, f64), RadioMapError> {
    check_distances(d_i, d_a)?;
    let (snr, s_i, s_a) = snr_parts(m, d_i, d_a, p_t / sigma2);
    let f = std::f64::consts::LN_2 * (1.0 + snr);
    Ok((s_i / f, s_a / f))
}

/// Hessian of `log2(1 + SNR)` in `(d_i, d_a)`.
pub fn rate_hessian(m: &SnrModel, d_i: f64, d_a: f64, p_t: f64, sigma2: f64) -> Result<Matrix2<f64>, RadioMapError> {
    check_distances(d_i, d_a)?;
    let scale = p_t / sigma2;
    let (nu, mu) = (m.nu_hat, m.mu_hat);
    let (snr, s_i, s_a) = snr_parts(m, d_i, d_a, scale);
    let ta = m.a_hat * d_i.powf(-nu);
    let tb = m.b_hat * d_i.powf(-nu / 2.0) * d_a.powf(-mu / 2.0);
    let tc = m.c_hat * d_a.powf(-mu);
    let s_ii = (nu * (nu + 1.0) * ta + nu / 2.0 * (nu / 2.0 + 1.0) * tb) / (d_i * d_i) * scale;
    let s_aa = (mu * (mu + 1.0) * tc + mu / 2.0 * (mu / 2.0 + 1.0) * tb) / (d_a * d_a) * scale;
    let s_ia = (nu / 2.0) * (mu / 2.0) * tb / (d_i * d_a) * scale;
    let ln2 = std::f64::consts::LN_2;
    let f = ln2 * (1.0 + snr);
    let f2 = f * f;
    let h_ii = (s_ii * f - ln2 * s_i * s_i) / f2;
    let h_aa = (s_aa * f - ln2 * s_a * s_a) / f2;
    let h_ia = (s_ia * f - ln2 * s_i * s_a) / f2;
    Ok(Matrix2::new(h_ii, h_ia, h_ia, h_aa))
}

/// First-order expansion of the per-position model rate in the two distances
/// around `q0`. All quantities are in bit/s.
#[derive(Debug, Clone, Copy)]
pub struct Linearization {
    pub r0: f64,
    pub d_i0: f64,
    pub d_a0: f64,
    /// `dr/dd_i` at the expansion point, never positive.
    pub g_i: f64,
    /// `dr/dd_a` at the expansion point, never positive.
    pub g_a: f64,
}

impl Linearization {
    pub fn at(m: &SnrModel, s: &Scenario, q0: &Point) -> Self {
        let (d_i0, d_a0) = (s.dist_irs(q0), s.dist_ap(q0));
        let (g_i, g_a) = rate_gradient(m, d_i0, d_a0, s.radio.p_t, s.radio.sigma2).expect("positive distances");
        let bw = s.radio.bandwidth_hz;
        Linearization { r0: model_rate(m, s, q0), d_i0, d_a0, g_i: g_i * bw, g_a: g_a * bw }
    }

    /// Surrogate rate at `q`; concave in `q` and below the model rate.
    pub fn eval(&self, s: &Scenario, q: &Point) -> f64 {
        self.r0 + self.g_i * (s.dist_irs(q) - self.d_i0) + self.g_a * (s.dist_ap(q) - self.d_a0)
    }

    /// Gradient of the surrogate with respect to the planar position.
    pub fn gradient_xy(&self, s: &Scenario, q: &Point) -> Point {
        (q - s.q_i) * (self.g_i / s.dist_irs(q)) + (q - s.q_a) * (self.g_a / s.dist_ap(q))
    }

    /// Hessian of the surrogate with respect to the planar position.
    pub fn hessian_xy(&self, s: &Scenario, q: &Point) -> Matrix2<f64> {
        let part = |g: f64, c: &Point, dz: f64| {
            let d = (q - c).norm_squared() + dz * dz;
            let d3 = d * d.sqrt();
            let (dx, dy) = (q.x - c.x, q.y - c.y);
            Matrix2::new(dy * dy + dz * dz, -dx * dy, -dx * dy, dx * dx + dz * dz) * (g / d3)
        };
        part(self.g_i, &s.q_i, s.z_r - s.z_i) + part(self.g_a, &s.q_a, s.z_r - s.z_a)
    }
}

/// Average surrogate rate of `positions` linearized at `expansion`.
pub fn avg_surrogate_rate(m: &SnrModel, s: &Scenario, expansion: &[Point], positions: &[Point]) -> f64 {
    assert_eq!(expansion.len(), positions.len());
    let k = (positions.len().max(2) - 1) as f64;
    expansion
        .iter()
        .zip(positions)
        .map(|(q0, q)| Linearization::at(m, s, q0).eval(s, q))
        .sum::<f64>()
        / k
}

/// Affine under-estimator of an obstacle's quadratic form around `q0`.
pub fn obstacle_linearization(o: &crate::scenario::Obstacle, q0: &Point, q: &Point) -> f64 {
    o.quad_form(q0) + o.quad_form_grad(q0).dot(&(q - q0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<Point>,
    pub energy_j: f64,
    /// Empty until a model is attached.
    pub rates_model: Vec<f64>,
    /// Empty until a map is attached.
    pub rates_map: Vec<f64>,
    /// `NaN` until a map is attached.
    pub avg_rate_map: f64,
}

impl Trajectory {
    pub fn new(s: &Scenario, positions: Vec<Point>) -> Self {
        let energy_j = motion_energy(&positions, &s.motion, s.delta_t);
        Trajectory { positions, energy_j, rates_model: Vec::new(), rates_map: Vec::new(), avg_rate_map: f64::NAN }
    }

    pub fn with_map(mut self, s: &Scenario, map: &RadioMap) -> Result<Self, RadioMapError> {
        self.rates_map = map_rates(map, s, &self.positions)?;
        self.avg_rate_map = self.rates_map.iter().sum::<f64>() / self.slots() as f64;
        Ok(self)
    }

    pub fn with_model(mut self, s: &Scenario, m: &SnrModel) -> Self {
        self.rates_model = self.positions.iter().map(|q| model_rate(m, s, q)).collect();
        self
    }

    pub fn evaluate(s: &Scenario, m: &SnrModel, map: &RadioMap, positions: Vec<Point>) -> Result<Self, RadioMapError> {
        Self::new(s, positions).with_model(s, m).with_map(s, map)
    }

    /// Number of slots `K`.
    pub fn slots(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn avg_rate_model(&self) -> f64 {
        self.rates_model.iter().sum::<f64>() / self.slots() as f64
    }

    pub fn step_lengths(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
    }

    /// Endpoints, per-slot distance and collision checks.
    pub fn check(&self, s: &Scenario) -> Result<(), String> {
        if self.positions.len() != s.k + 1 {
            return Err(format!("expected {} positions, got {}", s.k + 1, self.positions.len()));
        }
        if self.positions[0] != s.q_s {
            return Err("first position is not the start".into());
        }
        if self.positions[s.k] != s.q_d {
            return Err("last position is not the goal".into());
        }
        for (k, len) in self.step_lengths().iter().enumerate() {
            if *len > s.d_max() + 1e-9 {
                return Err(format!("slot {} moves {len:.9} m > {:.9} m", k + 1, s.d_max()));
            }
        }
        for (k, q) in self.positions.iter().enumerate() {
            if s.collides(q, s.d_s) {
                return Err(format!("position {k} ({:.4}, {:.4}) violates the obstacle margin", q.x, q.y));
            }
            if !s.contains(q) {
                return Err(format!("position {k} lies outside the area"));
            }
        }
        Ok(())
    }

    pub fn rows(&self, s: &Scenario) -> Vec<TrajectoryRow> {
        self.positions
            .iter()
            .enumerate()
            .map(|(k, q)| {
                let step = if k == 0 { 0.0 } else { (q - self.positions[k - 1]).norm() };
                TrajectoryRow {
                    k,
                    x: q.x,
                    y: q.y,
                    step_len: step,
                    slot_energy: if k == 0 { 0.0 } else { s.motion.slot_energy(step, s.delta_t) },
                    rate_model: self.rates_model.get(k).copied(),
                    rate_map: self.rates_map.get(k).copied(),
                }
            })
            .collect()
    }

    /// CSV with columns `k,x,y,step_len,slot_energy,rate_model,rate_map`;
    /// rate columns are empty when not attached.
    pub fn write_csv<W: Write>(&self, s: &Scenario, w: W) -> Result<(), csv::Error> {
        write_rows(w, &self.rows(s))
    }
}

/// One line of a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub k: usize,
    pub x: f64,
    pub y: f64,
    pub step_len: f64,
    pub slot_energy: f64,
    pub rate_model: Option<f64>,
    pub rate_map: Option<f64>,
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub fn read_trajectory_csv<R: Read>(r: R) -> Result<Vec<TrajectoryRow>, csv::Error> {
    read_rows(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionState {
    pub t: Vec<f64>,
    pub tau: f64,
}

impl TrustRegionState {
    pub fn uniform(k: usize, radius: f64, tau: f64) -> Self {
        TrustRegionState { t: vec![radius; k + 1], tau }
    }

    pub fn shrink(&mut self, k: usize) {
        self.t[k] *= self.tau;
    }

    pub fn max_radius(&self) -> f64 {
        self.t.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmapConfig {
    pub epsilon: f64,
    pub n_it_max: usize,
    pub tau: f64,
    pub t_init: f64,
    pub r_min: f64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for RmapConfig {
    fn default() -> Self {
        RmapConfig {
            epsilon: 0.01,
            n_it_max: 100,
            tau: 0.5,
            t_init: 1.0,
            r_min: 0.0,
            solver_tol: socp::DEFAULT_TOL,
            solver_max_iter: socp::DEFAULT_MAX_ITER,
        }
    }
}

impl RmapConfig {
    pub fn validate(&self) -> Result<(), RmapError> {
        if !(self.epsilon > 0.0) {
            return Err(RmapError::Config("epsilon must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(RmapError::Config("tau must lie in [0, 1)".into()));
        }
        if !(self.t_init > 0.0) {
            return Err(RmapError::Config("initial trust radius must be positive".into()));
        }
        if !(self.r_min >= 0.0) {
            return Err(RmapError::Config("r_min must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Trust radii below this are treated as pinned positions.
const PINNED: f64 = 1e-9;
/// Stop once every radius is below this.
const COLLAPSED: f64 = 1e-6;
/// Extra clearance asked from the solver so its tolerance cannot push a
/// point onto an obstacle or past the step limit.
const CLEARANCE: f64 = 1e-7;

/// What the convexified program optimizes.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Goal {
    /// Minimize energy subject to the surrogate average rate `>= r_min`.
    Energy { r_min: f64 },
    /// Maximize the surrogate average rate.
    Rate,
}

/// Variable layout: `x_k = 2k`, `y_k = 2k + 1` for `k = 0..=K`, followed by
/// auxiliaries.
pub fn p4_positions(x: &[f64], k: usize) -> Vec<Point> {
    (0..=k).map(|i| Point::new(x[2 * i], x[2 * i + 1])).collect()
}

pub(crate) struct Lowering<'a> {
    pub s: &'a Scenario,
    pub energy: bool,
    pub goal: Option<(Goal, &'a SnrModel)>,
    pub incumbent: Option<&'a [Point]>,
    pub trust: Option<&'a [f64]>,
    pub obstacles: bool,
}

impl Lowering<'_> {
    pub fn build(&self) -> ConeProgram {
        let s = self.s;
        let k = s.k;
        let xv = |i: usize| 2 * i;
        let yv = |i: usize| 2 * i + 1;
        let mut p = ConeProgram::new(2 * (k + 1));
        let d_max = s.d_max();
        if let (Some(q0), Some(trust)) = (self.incumbent, self.trust) {
            // stay inside the mapped area; only edges within reach get a bound,
            // inactive bounds slow the solver down
            for (i, q) in q0.iter().enumerate() {
                for (j, v, hi) in [(xv(i), q.x, s.area_width_m), (yv(i), q.y, s.area_height_m)] {
                    let lo = if v - trust[i] < CLEARANCE { CLEARANCE.min(v) } else { f64::NEG_INFINITY };
                    let up = if v + trust[i] > hi - CLEARANCE { (hi - CLEARANCE).max(v) } else { f64::INFINITY };
                    if lo.is_finite() || up.is_finite() {
                        p.set_bounds(j, lo, up);
                    }
                }
            }
        }

        p.add_eq(LinExpr::var(xv(0)).offset(-s.q_s.x));
        p.add_eq(LinExpr::var(yv(0)).offset(-s.q_s.y));
        p.add_eq(LinExpr::var(xv(k)).offset(-s.q_d.x));
        p.add_eq(LinExpr::var(yv(k)).offset(-s.q_d.y));

        let steps: Option<Vec<f64>> = self.incumbent.map(|q0| q0.windows(2).map(|w| (w[1] - w[0]).norm()).collect());
        if self.energy {
            p.objective_offset = k as f64 * s.motion.c3 * s.delta_t;
        }
        for i in 1..=k {
            let dx = || LinExpr::var(xv(i)).plus(xv(i - 1), -1.0);
            let dy = || LinExpr::var(yv(i)).plus(yv(i - 1), -1.0);
            let u = p.add_var();
            p.add_soc(vec![dx(), dy()], LinExpr::var(u));
            let limit = match &steps {
                Some(st) => (d_max - CLEARANCE).max(st[i - 1]),
                None => d_max,
            };
            p.set_bounds(u, f64::NEG_INFINITY, limit);
            if self.energy {
                let t = p.add_var();
                // ||d||^2 <= t as a rotated cone
                p.add_soc(
                    vec![
                        LinExpr::term(xv(i), 2.0).plus(xv(i - 1), -2.0),
                        LinExpr::term(yv(i), 2.0).plus(yv(i - 1), -2.0),
                        LinExpr::var(t).offset(-1.0),
                    ],
                    LinExpr::var(t).offset(1.0),
                );
                p.objective[t] = s.motion.c1 / s.delta_t;
                p.objective[u] = s.motion.c2;
            }
        }

        let interior = 1..k;
        if let (Some(q0), Some(trust)) = (self.incumbent, self.trust) {
            for i in interior.clone() {
                if trust[i] < PINNED {
                    p.add_eq(LinExpr::var(xv(i)).offset(-q0[i].x));
                    p.add_eq(LinExpr::var(yv(i)).offset(-q0[i].y));
                } else {
                    p.add_soc(
                        vec![LinExpr::var(xv(i)).offset(-q0[i].x), LinExpr::var(yv(i)).offset(-q0[i].y)],
                        LinExpr::constant(trust[i]),
                    );
                }
            }
        }

        if let (true, Some(q0)) = (self.obstacles, self.incumbent) {
            for i in interior.clone() {
                for o in &s.obstacles {
                    let f0 = o.quad_form(&q0[i]);
                    let g = o.quad_form_grad(&q0[i]);
                    let rhs = s.d_s + CLEARANCE.min((f0 - s.d_s).max(0.0));
                    // f0 + g . (q - q0) >= rhs
                    p.add_nonneg(
                        LinExpr::term(xv(i), g.x)
                            .plus(yv(i), g.y)
                            .offset(f0 - g.dot(&q0[i]) - rhs),
                    );
                }
            }
        }

        if let (Some((goal, m)), Some(q0)) = (self.goal, self.incumbent) {
            let bw = s.radio.bandwidth_hz;
            let mut weighted = LinExpr::constant(0.0);
            let mut budget = 0.0;
            for (i, q) in q0.iter().enumerate() {
                let lin = Linearization::at(m, s, q);
                budget += (lin.r0 - lin.g_i * lin.d_i0 - lin.g_a * lin.d_a0) / bw;
                for (g, c, dz) in [(lin.g_i, s.q_i, s.z_r - s.z_i), (lin.g_a, s.q_a, s.z_r - s.z_a)] {
                    let w = -g / bw;
                    if w <= 0.0 {
                        continue;
                    }
                    let d = p.add_var();
                    p.add_soc(
                        vec![
                            LinExpr::constant(dz),
                            LinExpr::var(xv(i)).offset(-c.x),
                            LinExpr::var(yv(i)).offset(-c.y),
                        ],
                        LinExpr::var(d),
                    );
                    weighted.terms.push((d, w));
                }
            }
            match goal {
                Goal::Energy { r_min } => {
                    // sum of weighted distances <= budget - K r_min / B_w
                    let mut e = weighted;
                    e.terms.iter_mut().for_each(|t| t.1 = -t.1);
                    e.constant = budget - k as f64 * r_min / bw;
                    p.add_nonneg(e);
                }
                Goal::Rate => {
                    // unit-scaled weights; the minimizer is unchanged
                    let top = weighted.terms.iter().map(|t| t.1).fold(0.0, f64::max);
                    for (j, w) in weighted.terms {
                        p.objective[j] += w / top;
                    }
                }
            }
        }
        p
    }
}

/// The convexified subproblem around `incumbent`.
///
/// If the incumbent's own model rate is below `r_min` the rate target is
/// lowered to that value, which keeps the incumbent feasible and asks the
/// solver not to lose model rate.
pub fn build_p4(s: &Scenario, m: &SnrModel, incumbent: &Trajectory, tr: &TrustRegionState, r_min: f64) -> ConeProgram {
    let own = avg_model_rate(m, s, &incumbent.positions);
    let r_eff = r_min.min(own);
    Lowering {
        s,
        energy: true,
        goal: Some((Goal::Energy { r_min: r_eff }, m)),
        incumbent: Some(&incumbent.positions),
        trust: Some(&tr.t),
        obstacles: true,
    }
    .build()
}

/// Rounds a solver result onto the exact endpoints.
pub(crate) fn candidate_positions(s: &Scenario, x: &[f64]) -> Vec<Point> {
    let mut q = p4_positions(x, s.k);
    q[0] = s.q_s;
    q[s.k] = s.q_d;
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    TrustRegionCollapsed,
    NoDescent,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max_iterations",
            StopReason::TrustRegionCollapsed => "trust_region_collapsed",
            StopReason::NoDescent => "no_descent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Incumbent energy after this iteration.
    pub energy: f64,
    pub accepted: bool,
    pub shrunk_k: Option<usize>,
    /// Incumbent average map rate after this iteration.
    pub avg_rate_map: f64,
    /// Solver outcome, or the reason a solved candidate was discarded.
    pub solver_status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmapTrace {
    /// Row 0 describes the initial trajectory.
    pub records: Vec<TraceRecord>,
    pub stop: StopReason,
}

impl RmapTrace {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Energies of the initial and every accepted iterate.
    pub fn accepted_energies(&self) -> Vec<f64> {
        self.records
            .iter()
            .enumerate()
            .filter(|(i, r)| *i == 0 || r.accepted)
            .map(|(_, r)| r.energy)
            .collect()
    }

    /// CSV with columns `iteration,energy,accepted,shrunk_k,avg_rate_map,solver_status`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        write_rows(w, &self.records)
    }
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<TraceRecord>, csv::Error> {
    read_rows(r)
}

/// Index of the largest drop `prev[k] - cand[k]`, smallest index on ties.
pub fn largest_drop(prev: &[f64], cand: &[f64]) -> usize {
    let mut best = 0;
    let mut best_drop = f64::NEG_INFINITY;
    for (k, (a, b)) in prev.iter().zip(cand).enumerate() {
        let d = a - b;
        if d > best_drop {
            best = k;
            best_drop = d;
        }
    }
    best
}

/// Interior position with the lowest value, smallest index on ties.
fn weakest_interior(rates: &[f64]) -> usize {
    let n = rates.len();
    let mut best = 1.min(n - 1);
    for k in 1..n.saturating_sub(1) {
        if rates[k] < rates[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub initial: Trajectory,
    pub choice: InitChoice,
    pub trajectory: Trajectory,
    pub trace: RmapTrace,
}

/// Graph initialization followed by [`run_rmap`].
pub fn plan(s: &Scenario, m: &SnrModel, map: &RadioMap, cfg: &RmapConfig) -> Result<Plan, RmapError> {
    cfg.validate()?;
    let (me, mr) = initial_pair(s, map)?;
    let (initial, choice) = select_initial(&me, &mr, cfg.r_min)?;
    let (trajectory, trace) = run_rmap(s, m, map, &initial, cfg)?;
    Ok(Plan { initial, choice, trajectory, trace })
}

/// Runs the radio-map-assisted SCO loop from a map-feasible `init`.
pub fn run_rmap(
    s: &Scenario,
    m: &SnrModel,
    map: &RadioMap,
    init: &Trajectory,
    cfg: &RmapConfig,
) -> Result<(Trajectory, RmapTrace), RmapError> {
    cfg.validate()?;
    init.check(s).map_err(RmapError::InvalidInitial)?;
    let mut current = Trajectory::evaluate(s, m, map, init.positions.clone())?;
    if current.avg_rate_map < cfg.r_min {
        return Err(RmapError::InitialInfeasible { avg_rate: current.avg_rate_map, r_min: cfg.r_min });
    }
    let mut tr = TrustRegionState::uniform(s.k, cfg.t_init, cfg.tau);
    // endpoints never move
    tr.t[0] = 0.0;
    tr.t[s.k] = 0.0;
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
        let program = build_p4(s, m, &current, &tr, cfg.r_min);
        let res = socp::solve(&program, cfg.solver_tol, cfg.solver_max_iter);
        let mut record = TraceRecord {
            iteration: j,
            energy: current.energy_j,
            accepted: false,
            shrunk_k: None,
            avg_rate_map: current.avg_rate_map,
            solver_status: res.status.to_string(),
        };

        let candidate = if res.status.has_solution() {
            let c = Trajectory::evaluate(s, m, map, candidate_positions(s, &res.x))?;
            match c.check(s) {
                Ok(()) => Some(c),
                Err(e) => {
                    log::debug!("iteration {j}: discarding candidate: {e}");
                    record.solver_status = "constraint_violation".into();
                    None
                }
            }
        } else {
            None
        };

        match candidate {
            None => {
                let k = weakest_interior(&current.rates_model);
                tr.shrink(k);
                record.shrunk_k = Some(k);
            }
            Some(c) if c.avg_rate_map < cfg.r_min => {
                let k = largest_drop(&current.rates_map, &c.rates_map);
                tr.shrink(k);
                record.shrunk_k = Some(k);
            }
            Some(c) if c.energy_j > current.energy_j => {
                // solver round-off only; keep the incumbent
                record.solver_status = "no_descent".into();
                records.push(record);
                stop = StopReason::NoDescent;
                break;
            }
            Some(c) => {
                let prev = current.energy_j;
                current = c;
                record.accepted = true;
                record.energy = current.energy_j;
                record.avg_rate_map = current.avg_rate_map;
                records.push(record);
                if prev > 0.0 && (prev - current.energy_j) / prev <= cfg.epsilon {
                    stop = StopReason::Converged;
                    break;
                }
                continue;
            }
        }
        records.push(record);
        if tr.max_radius() < COLLAPSED {
            stop = StopReason::TrustRegionCollapsed;
            break;
        }
    }
    Ok((current, RmapTrace { records, stop }))
}
