//! Scenario geometry, configuration loading and the geometric predicates
//! (collision, line of sight) shared by the rest of the crate.
//!
//! A scenario is a rectangular area `[0, width] x [0, height]` with an access
//! point (AP), an intelligent reflecting surface (IRS), a set of obstacles
//! modelled as vertical cylinders with elliptic bases, and a robot that must
//! travel from `start` to `goal` in `slots` time slots.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planar position in meters.
pub type Point = Vector2<f64>;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("goal unreachable: distance {distance:.4} m exceeds slots * max_speed * slot_duration = {budget:.4} m")]
    Unreachable { distance: f64, budget: f64 },
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Vertical cylinder with an elliptic base `{q : (q - c)^T P^-1 (q - c) <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub center: Point,
    shape: Matrix2<f64>,
    shape_inv: Matrix2<f64>,
    pub height: f64,
}

impl Obstacle {
    pub fn new(center: Point, shape: Matrix2<f64>, height: f64) -> Result<Self, ScenarioError> {
        if (shape[(0, 1)] - shape[(1, 0)]).abs() > 1e-12 * shape.norm().max(1.0) {
            return Err(invalid("obstacles.shape", "matrix must be symmetric"));
        }
        let eig = shape.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(invalid("obstacles.shape", "matrix must be positive definite"));
        }
        if !(height > 0.0) {
            return Err(invalid("obstacles.height", "must be > 0"));
        }
        let shape_inv = shape
            .try_inverse()
            .ok_or_else(|| invalid("obstacles.shape", "matrix is singular"))?;
        Ok(Self {
            center,
            shape,
            shape_inv,
            height,
        })
    }

    /// Ellipse with semi-axes `(a, b)` rotated counter-clockwise by `angle` radians.
    pub fn ellipse(center: Point, semi_axes: [f64; 2], angle: f64, height: f64) -> Result<Self, ScenarioError> {
        if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
            return Err(invalid("obstacles.semi_axes", "must be > 0"));
        }
        let (s, c) = angle.sin_cos();
        let rot = Matrix2::new(c, -s, s, c);
        let diag = Matrix2::new(semi_axes[0].powi(2), 0.0, 0.0, semi_axes[1].powi(2));
        let shape = rot * diag * rot.transpose();
        // symmetrize away rounding noise
        let shape = (shape + shape.transpose()) * 0.5;
        Self::new(center, shape, height)
    }

    pub fn shape(&self) -> &Matrix2<f64> {
        &self.shape
    }

    pub fn shape_inv(&self) -> &Matrix2<f64> {
        &self.shape_inv
    }

    /// `(q - c)^T P^-1 (q - c)`.
    pub fn quad_form(&self, q: &Point) -> f64 {
        let d = q - self.center;
        d.dot(&(self.shape_inv * d))
    }

    /// Gradient of [`Obstacle::quad_form`] at `q`: `2 P^-1 (q - c)`.
    pub fn quad_form_grad(&self, q: &Point) -> Point {
        2.0 * (self.shape_inv * (q - self.center))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConstants {
    /// J s / m^2
    pub c1: f64,
    /// J / m
    pub c2: f64,
    /// W
    pub c3: f64,
}

impl MotionConstants {
    /// Energy spent in one slot of length `dt` covering distance `step`.
    pub fn slot_energy(&self, step: f64, dt: f64) -> f64 {
        self.c1 * step * step / dt + self.c2 * step + self.c3 * dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioConstants {
    pub bandwidth_hz: f64,
    pub carrier_wavelength_m: f64,
    pub antenna_separation_m: f64,
    /// AP antenna count.
    pub n_ap: usize,
    /// IRS element count.
    pub m_irs: usize,
    /// Transmit power in W.
    pub p_t: f64,
    /// Noise power in W.
    pub sigma2: f64,
    /// Reference path loss at 1 m, dB (positive number = attenuation).
    pub rho_db: f64,
    /// Extra antenna gain applied to the robot-AP and robot-IRS links, dB.
    pub antenna_gain_db: f64,
    /// Reference path loss of the fixed IRS-AP line-of-sight link, dB.
    pub rho_ia_db: f64,
    pub nu_los: f64,
    pub nu_nlos: f64,
    pub mu_los: f64,
    pub mu_nlos: f64,
}

impl RadioConstants {
    /// Linear reference gain of the robot links (`rho` including antenna gain).
    pub fn rho(&self) -> f64 {
        db_to_linear(self.antenna_gain_db - self.rho_db)
    }

    /// Linear reference gain of the IRS-AP link.
    pub fn rho_ia(&self) -> f64 {
        db_to_linear(-self.rho_ia_db)
    }

    pub fn snr_scale(&self) -> f64 {
        self.p_t / self.sigma2
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub q_a: Point,
    pub q_i: Point,
    pub z_a: f64,
    pub z_i: f64,
    pub z_r: f64,
    pub obstacles: Vec<Obstacle>,
    pub motion: MotionConstants,
    pub radio: RadioConstants,
    pub q_s: Point,
    pub q_d: Point,
    /// Number of slots `K`; a trajectory has `K + 1` positions.
    pub k: usize,
    pub delta_t: f64,
    pub v_max: f64,
    pub d_s: f64,
}

impl Scenario {
    /// Maximum distance per slot.
    pub fn d_max(&self) -> f64 {
        self.v_max * self.delta_t
    }

    pub fn contains(&self, q: &Point) -> bool {
        q.x >= 0.0 && q.y >= 0.0 && q.x <= self.area_width_m && q.y <= self.area_height_m
    }

    /// 3D robot-IRS distance for the robot at `q`.
    pub fn dist_irs(&self, q: &Point) -> f64 {
        ((self.z_r - self.z_i).powi(2) + (q - self.q_i).norm_squared()).sqrt()
    }

    /// 3D robot-AP distance for the robot at `q`.
    pub fn dist_ap(&self, q: &Point) -> f64 {
        ((self.z_r - self.z_a).powi(2) + (q - self.q_a).norm_squared()).sqrt()
    }

    /// 3D IRS-AP distance.
    pub fn dist_irs_ap(&self) -> f64 {
        ((self.z_a - self.z_i).powi(2) + (self.q_a - self.q_i).norm_squared()).sqrt()
    }

    pub fn collides(&self, q: &Point, margin: f64) -> bool {
        collides(self, q, margin)
    }

    pub fn los_ap(&self, q: &Point) -> bool {
        is_los(self, q, self.z_r, &self.q_a, self.z_a)
    }

    pub fn los_irs(&self, q: &Point) -> bool {
        is_los(self, q, self.z_r, &self.q_i, self.z_i)
    }

    /// Re-check every invariant; used after programmatic edits (sweeps, tests).
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, "must be > 0"))
            }
        };
        pos("area.width", self.area_width_m)?;
        pos("area.height", self.area_height_m)?;
        pos("robot.max_speed", self.v_max)?;
        pos("robot.slot_duration", self.delta_t)?;
        if self.k < 1 {
            return Err(invalid("robot.slots", "must be >= 1"));
        }
        if !(self.d_s >= 1.0) {
            return Err(invalid("robot.safety_margin", "must be >= 1"));
        }
        let m = &self.motion;
        for (name, v) in [("motion.c1", m.c1), ("motion.c2", m.c2), ("motion.c3", m.c3)] {
            if !(v >= 0.0) {
                return Err(invalid(name, "must be >= 0"));
            }
        }
        let r = &self.radio;
        if r.n_ap < 1 {
            return Err(invalid("radio.ap_antennas", "must be >= 1"));
        }
        pos("radio.bandwidth_hz", r.bandwidth_hz)?;
        pos("radio.carrier_frequency_hz", r.carrier_wavelength_m)?;
        pos("radio.antenna_spacing_m", r.antenna_separation_m)?;
        pos("radio.tx_power_dbm", r.p_t)?;
        pos("radio.noise_power_dbm", r.sigma2)?;
        for (name, v) in [
            ("radio.nu_los", r.nu_los),
            ("radio.nu_nlos", r.nu_nlos),
            ("radio.mu_los", r.mu_los),
            ("radio.mu_nlos", r.mu_nlos),
        ] {
            if !(v >= 0.0) {
                return Err(invalid(name, "must be >= 0"));
            }
        }
        for (name, q) in [("robot.start", &self.q_s), ("robot.goal", &self.q_d)] {
            if !self.contains(q) {
                return Err(invalid(name, "outside the area"));
            }
            if self.collides(q, self.d_s) {
                return Err(invalid(name, "collides with an obstacle at the safety margin"));
            }
        }
        let distance = (self.q_d - self.q_s).norm();
        let budget = self.k as f64 * self.d_max();
        if distance > budget {
            return Err(ScenarioError::Unreachable { distance, budget });
        }
        Ok(())
    }
}

/// True iff `q` lies strictly inside some obstacle inflated by `margin`,
/// i.e. `(q - c)^T P^-1 (q - c) < margin`.
pub fn collides(s: &Scenario, q: &Point, margin: f64) -> bool {
    s.obstacles.iter().any(|o| o.quad_form(q) < margin)
}

/// Line-of-sight test between `(q, z_q)` and `(target, z_t)`.
///
/// The segment is blocked when it passes through the interior of an
/// obstacle cylinder (footprint quadratic form < 1, height in `[0, h]`).
/// Grazing contact is not a blockage.
pub fn is_los(s: &Scenario, q: &Point, z_q: f64, target: &Point, z_t: f64) -> bool {
    !s.obstacles
        .iter()
        .any(|o| segment_hits_cylinder(o, q, z_q, target, z_t))
}

fn segment_hits_cylinder(o: &Obstacle, q: &Point, z_q: f64, target: &Point, z_t: f64) -> bool {
    // parameter interval where the altitude is inside [0, height]
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let dz = z_t - z_q;
    if dz.abs() < 1e-15 {
        if z_q < 0.0 || z_q > o.height {
            return false;
        }
    } else {
        let t0 = (0.0 - z_q) / dz;
        let t1 = (o.height - z_q) / dz;
        lo = lo.max(t0.min(t1));
        hi = hi.min(t0.max(t1));
    }
    if lo >= hi {
        return false;
    }
    // footprint: a t^2 + b t + c < 0 with c = quad(q) - 1
    let d = target - q;
    let e = q - o.center;
    let pinv = o.shape_inv();
    let pd = pinv * d;
    let a = d.dot(&pd);
    let b = 2.0 * e.dot(&pd);
    let c = e.dot(&(pinv * e)) - 1.0;
    let (f_lo, f_hi) = if a < 1e-300 {
        // degenerate segment: a single point
        if c < 0.0 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            return false;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc <= 0.0 {
            return false;
        }
        let sq = disc.sqrt();
        // numerically stable roots
        let qq = -0.5 * (b + b.signum() * sq);
        let (r1, r2) = if qq == 0.0 { (-sq / (2.0 * a), sq / (2.0 * a)) } else { (qq / a, c / qq) };
        (r1.min(r2), r1.max(r2))
    };
    f_lo.max(lo) < f_hi.min(hi)
}

// ---------------------------------------------------------------------------
// configuration file

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    area: RawArea,
    ap: RawSite,
    irs: RawSite,
    robot: RawRobot,
    motion: MotionConstants,
    radio: RawRadio,
    #[serde(default)]
    obstacles: Vec<RawObstacle>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawArea {
    width: f64,
    height: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawSite {
    position: [f64; 2],
    height: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawRobot {
    start: [f64; 2],
    goal: [f64; 2],
    antenna_height: f64,
    slots: usize,
    slot_duration: f64,
    max_speed: f64,
    safety_margin: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawRadio {
    bandwidth_hz: f64,
    carrier_frequency_hz: f64,
    /// defaults to half a wavelength
    antenna_spacing_m: Option<f64>,
    ap_antennas: usize,
    irs_elements: usize,
    tx_power_dbm: f64,
    noise_power_dbm: f64,
    ref_path_loss_db: f64,
    #[serde(default)]
    antenna_gain_db: f64,
    /// defaults to `ref_path_loss_db`
    irs_ap_path_loss_db: Option<f64>,
    nu_los: f64,
    nu_nlos: f64,
    mu_los: f64,
    mu_nlos: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawObstacle {
    center: [f64; 2],
    height: f64,
    semi_axes: Option<[f64; 2]>,
    #[serde(default)]
    angle_deg: f64,
    shape: Option<[[f64; 2]; 2]>,
}

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Parse a TOML scenario description. See `configs/base.toml` for the schema.
pub fn load_scenario(config_text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawConfig = toml::from_str(config_text).map_err(|e| ScenarioError::Parse(e.to_string()))?;

    if !(raw.radio.carrier_frequency_hz > 0.0) {
        return Err(invalid("radio.carrier_frequency_hz", "must be > 0"));
    }
    let wavelength = SPEED_OF_LIGHT / raw.radio.carrier_frequency_hz;
    let radio = RadioConstants {
        bandwidth_hz: raw.radio.bandwidth_hz,
        carrier_wavelength_m: wavelength,
        antenna_separation_m: raw.radio.antenna_spacing_m.unwrap_or(wavelength / 2.0),
        n_ap: raw.radio.ap_antennas,
        m_irs: raw.radio.irs_elements,
        p_t: dbm_to_watt(raw.radio.tx_power_dbm),
        sigma2: dbm_to_watt(raw.radio.noise_power_dbm),
        rho_db: raw.radio.ref_path_loss_db,
        antenna_gain_db: raw.radio.antenna_gain_db,
        rho_ia_db: raw.radio.irs_ap_path_loss_db.unwrap_or(raw.radio.ref_path_loss_db),
        nu_los: raw.radio.nu_los,
        nu_nlos: raw.radio.nu_nlos,
        mu_los: raw.radio.mu_los,
        mu_nlos: raw.radio.mu_nlos,
    };

    let mut obstacles = Vec::with_capacity(raw.obstacles.len());
    for (idx, o) in raw.obstacles.iter().enumerate() {
        let center = Point::new(o.center[0], o.center[1]);
        let obstacle = match (o.shape, o.semi_axes) {
            (Some(p), None) => Obstacle::new(center, Matrix2::new(p[0][0], p[0][1], p[1][0], p[1][1]), o.height),
            (None, Some(ax)) => Obstacle::ellipse(center, ax, o.angle_deg.to_radians(), o.height),
            _ => Err(invalid("obstacles", "exactly one of `shape` or `semi_axes` is required")),
        };
        obstacles.push(obstacle.map_err(|e| match e {
            ScenarioError::Invalid { field, reason } => ScenarioError::Invalid {
                field: field.replacen("obstacles", &format!("obstacles[{idx}]"), 1),
                reason,
            },
            other => other,
        })?);
    }

    let scenario = Scenario {
        area_width_m: raw.area.width,
        area_height_m: raw.area.height,
        q_a: Point::new(raw.ap.position[0], raw.ap.position[1]),
        q_i: Point::new(raw.irs.position[0], raw.irs.position[1]),
        z_a: raw.ap.height,
        z_i: raw.irs.height,
        z_r: raw.robot.antenna_height,
        obstacles,
        motion: raw.motion,
        radio,
        q_s: Point::new(raw.robot.start[0], raw.robot.start[1]),
        q_d: Point::new(raw.robot.goal[0], raw.robot.goal[1]),
        k: raw.robot.slots,
        delta_t: raw.robot.slot_duration,
        v_max: raw.robot.max_speed,
        d_s: raw.robot.safety_margin,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario(&text)
}

/// Semi-axes and height of a 6 x 4 x 2 m obstacle.
pub const RANDOM_OBSTACLE: ([f64; 2], f64) = ([3.0, 2.0], 2.0);

/// Placement attempts per obstacle before giving up.
const PLACEMENT_ATTEMPTS: usize = 1000;

/// Replace the obstacles of `base` with `n` axis-aligned 6 x 4 x 2 m
/// cylinders at uniform random centers.
///
/// A placement is redrawn if the footprint leaves the area, if start or
/// goal fall inside the inflated obstacle, or if the goal is no longer
/// reachable within K slots on the planning grid.
pub fn with_random_obstacles(base: &Scenario, n: usize, seed: u64) -> Result<Scenario, ScenarioError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ([a, b], h) = RANDOM_OBSTACLE;
    if 2.0 * a > base.area_width_m || 2.0 * b > base.area_height_m {
        return Err(invalid("obstacles", "area too small for the obstacle footprint"));
    }
    let mut s = base.clone();
    s.obstacles.clear();
    if !crate::graphinit::reachable(&s) {
        return Err(invalid("obstacles", "goal unreachable even without obstacles"));
    }
    for idx in 0..n {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let c = Point::new(
                rng.random_range(a..=s.area_width_m - a),
                rng.random_range(b..=s.area_height_m - b),
            );
            let o = Obstacle::ellipse(c, [a, b], 0.0, h)?;
            if o.quad_form(&s.q_s) < s.d_s || o.quad_form(&s.q_d) < s.d_s {
                continue;
            }
            s.obstacles.push(o);
            if crate::graphinit::reachable(&s) {
                placed = true;
                break;
            }
            s.obstacles.pop();
        }
        if !placed {
            return Err(invalid("obstacles", format!("could not place obstacle {idx} after {PLACEMENT_ATTEMPTS} draws")));
        }
    }
    Ok(s)
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} m, {} obstacles, K={}, N={}, M={}",
            self.area_width_m,
            self.area_height_m,
            self.obstacles.len(),
            self.k,
            self.radio.n_ap,
            self.radio.m_irs
        )
    }
}
