//! Monte-Carlo radio map of the averaged optimal SNR and the parametric
//! distance model fitted to it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{optimal_beamforming, rate, sample_channel_with};
use crate::scenario::{Point, Scenario};

const MAGIC: &[u8; 8] = b"IRSRMAP\0";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RadioMapError {
    #[error("position ({x:.3}, {y:.3}) lies outside the mapped area")]
    OutOfArea { x: f64, y: f64 },
    #[error("distances must be positive (d_i = {d_i}, d_a = {d_a})")]
    Domain { d_i: f64, d_a: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("{path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("fit needs at least 5 cells with positive SNR, found {0}")]
    TooFewCells(usize),
}

/// Grid of cell-averaged optimal SNR values (linear) with LOS masks.
///
/// Cells are stored row-major with `x` varying fastest; cell `(ix, iy)` is
/// centered at `((ix + 0.5) dx, (iy + 0.5) dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub snr: Vec<f64>,
    pub los_ap: Vec<bool>,
    pub los_irs: Vec<bool>,
    pub samples_per_cell: u64,
    pub seed: u64,
}

impl RadioMap {
    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        Point::new((ix as f64 + 0.5) * self.dx, (iy as f64 + 0.5) * self.dy)
    }

    fn empty(s: &Scenario, nx: usize, ny: usize) -> Result<Self, RadioMapError> {
        if nx < 2 || ny < 2 {
            return Err(RadioMapError::Grid(format!("need at least 2x2 cells, got {nx}x{ny}")));
        }
        Ok(RadioMap {
            nx,
            ny,
            dx: s.area_width_m / nx as f64,
            dy: s.area_height_m / ny as f64,
            snr: Vec::new(),
            los_ap: Vec::new(),
            los_irs: Vec::new(),
            samples_per_cell: 0,
            seed: 0,
        })
    }

    fn fill_masks(&mut self, s: &Scenario) {
        let centers: Vec<Point> = (0..self.nx * self.ny)
            .map(|i| self.cell_center(i % self.nx, i / self.nx))
            .collect();
        self.los_ap = centers.iter().map(|q| s.los_ap(q)).collect();
        self.los_irs = centers.iter().map(|q| s.los_irs(q)).collect();
    }

    /// Map whose cells hold the fitted model evaluated at the cell centers,
    /// with the masks of the scenario geometry.
    pub fn from_model(s: &Scenario, nx: usize, ny: usize, m: &SnrModel) -> Result<Self, RadioMapError> {
        let mut map = Self::empty(s, nx, ny)?;
        map.fill_masks(s);
        let r = &s.radio;
        map.snr = (0..nx * ny)
            .map(|i| {
                let q = map.cell_center(i % nx, i / nx);
                model_snr(m, s.dist_irs(&q), s.dist_ap(&q), r.p_t, r.sigma2)
            })
            .collect::<Result<_, _>>()?;
        Ok(map)
    }

    /// Bilinear interpolation of the SNR grid, clamped to the outermost cell
    /// centers near the borders.
    pub fn query_snr(&self, q: &Point) -> Result<f64, RadioMapError> {
        let tol = 1e-9;
        if !(q.x >= -tol && q.y >= -tol && q.x <= self.width() + tol && q.y <= self.height() + tol) {
            return Err(RadioMapError::OutOfArea { x: q.x, y: q.y });
        }
        let u = (q.x / self.dx - 0.5).clamp(0.0, (self.nx - 1) as f64);
        let v = (q.y / self.dy - 0.5).clamp(0.0, (self.ny - 1) as f64);
        let i0 = (u.floor() as usize).min(self.nx - 2);
        let j0 = (v.floor() as usize).min(self.ny - 2);
        let (tu, tv) = (u - i0 as f64, v - j0 as f64);
        let g = |i, j| self.snr[self.index(i, j)];
        Ok((1.0 - tu) * (1.0 - tv) * g(i0, j0)
            + tu * (1.0 - tv) * g(i0 + 1, j0)
            + (1.0 - tu) * tv * g(i0, j0 + 1)
            + tu * tv * g(i0 + 1, j0 + 1))
    }

    /// Writes the binary map to `path` and a text description to `path.meta`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RadioMapError> {
        let path = path.as_ref();
        let io = |source| RadioMapError::Io { path: path.to_path_buf(), source };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let mut buf = Vec::with_capacity(64 + self.snr.len() * 10);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.nx as u32).to_le_bytes());
        buf.extend_from_slice(&(self.ny as u32).to_le_bytes());
        buf.extend_from_slice(&self.dx.to_le_bytes());
        buf.extend_from_slice(&self.dy.to_le_bytes());
        buf.extend_from_slice(&self.samples_per_cell.to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.snr {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend(self.los_ap.iter().map(|&b| b as u8));
        buf.extend(self.los_irs.iter().map(|&b| b as u8));
        w.write_all(&buf).map_err(io)?;
        w.flush().map_err(io)?;

        let meta_path = meta_path(path);
        let meta = format!(
            "format = \"irsplan radio map\"\nversion = {VERSION}\nnx = {}\nny = {}\ndx_m = {}\ndy_m = {}\n\
             samples_per_cell = {}\nseed = {}\nlayout = \"row-major f64 LE snr, then u8 los_ap, then u8 los_irs\"\n",
            self.nx, self.ny, self.dx, self.dy, self.samples_per_cell, self.seed
        );
        std::fs::write(&meta_path, meta).map_err(|source| RadioMapError::Io { path: meta_path, source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RadioMapError> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
            .map_err(|source| RadioMapError::Io { path: path.to_path_buf(), source })?;
        let bad = |reason: &str| RadioMapError::Format { path: path.to_path_buf(), reason: reason.to_string() };
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(8).ok_or_else(|| bad("truncated header"))? != MAGIC {
            return Err(bad("not a radio map file"));
        }
        let version = cur.u32().ok_or_else(|| bad("truncated header"))?;
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let nx = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let ny = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let dx = cur.f64().ok_or_else(|| bad("truncated header"))?;
        let dy = cur.f64().ok_or_else(|| bad("truncated header"))?;
        let samples_per_cell = cur.u64().ok_or_else(|| bad("truncated header"))?;
        let seed = cur.u64().ok_or_else(|| bad("truncated header"))?;
        if nx < 2 || ny < 2 || !(dx > 0.0) || !(dy > 0.0) {
            return Err(bad("invalid grid dimensions"));
        }
        let n = nx * ny;
        let snr = (0..n)
            .map(|_| cur.f64())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("truncated grid"))?;
        let los_ap = cur.take(n).ok_or_else(|| bad("truncated mask"))?.iter().map(|&b| b != 0).collect();
        let los_irs = cur.take(n).ok_or_else(|| bad("truncated mask"))?.iter().map(|&b| b != 0).collect();
        if cur.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(RadioMap { nx, ny, dx, dy, snr, los_ap, los_irs, samples_per_cell, seed })
    }

    /// One row per cell: `ix,iy,x,y,snr,snr_db,los_ap,los_irs`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["ix", "iy", "x", "y", "snr", "snr_db", "los_ap", "los_irs"])?;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = self.index(ix, iy);
                let c = self.cell_center(ix, iy);
                wr.write_record([
                    ix.to_string(),
                    iy.to_string(),
                    c.x.to_string(),
                    c.y.to_string(),
                    self.snr[i].to_string(),
                    (10.0 * self.snr[i].log10()).to_string(),
                    (self.los_ap[i] as u8).to_string(),
                    (self.los_irs[i] as u8).to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let out = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

/// Generator for cell `cell` of a map with master seed `seed`: the master
/// ChaCha key with the cell index as stream number.
pub fn cell_rng(seed: u64, cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell as u64);
    rng
}

/// Mean optimal SNR over `n_samples` channel draws at `q`.
pub fn cell_mean_snr(s: &Scenario, q: &Point, los_ap: bool, los_irs: bool, n_samples: u64, rng: &mut ChaCha8Rng) -> f64 {
    let mut acc = 0.0;
    for _ in 0..n_samples {
        let c = sample_channel_with(s, q, los_ap, los_irs, rng);
        // a zero effective channel has probability zero; count it as no signal
        acc += optimal_beamforming(&c).map(|b| b.snr).unwrap_or(0.0);
    }
    acc / n_samples as f64
}

pub fn generate_map(s: &Scenario, nx: usize, ny: usize, n_samples: u64, seed: u64) -> Result<RadioMap, RadioMapError> {
    if n_samples == 0 {
        return Err(RadioMapError::Grid("need at least one sample per cell".into()));
    }
    let mut map = RadioMap::empty(s, nx, ny)?;
    map.fill_masks(s);
    map.samples_per_cell = n_samples;
    map.seed = seed;
    map.snr = (0..nx * ny)
        .into_par_iter()
        .map(|i| {
            let q = map.cell_center(i % nx, i / nx);
            let mut rng = cell_rng(seed, i);
            cell_mean_snr(s, &q, map.los_ap[i], map.los_irs[i], n_samples, &mut rng)
        })
        .collect();
    Ok(map)
}

pub fn query_rate(map: &RadioMap, s: &Scenario, q: &Point) -> Result<f64, RadioMapError> {
    Ok(rate(map.query_snr(q)?, s.radio.bandwidth_hz))
}

/// Map rate at each position.
pub fn map_rates(map: &RadioMap, s: &Scenario, positions: &[Point]) -> Result<Vec<f64>, RadioMapError> {
    positions.iter().map(|q| query_rate(map, s, q)).collect()
}

/// Average map rate along a trajectory: the sum over all `K + 1` positions
/// divided by `K`.
pub fn avg_map_rate(map: &RadioMap, s: &Scenario, positions: &[Point]) -> Result<f64, RadioMapError> {
    let k = (positions.len().max(2) - 1) as f64;
    Ok(map_rates(map, s, positions)?.iter().sum::<f64>() / k)
}

/// Fitted gains and exponents of the three-term SNR model. The gains exclude
/// the `p_t / sigma^2` factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrModel {
    pub a_hat: f64,
    pub b_hat: f64,
    pub c_hat: f64,
    pub nu_hat: f64,
    pub mu_hat: f64,
    /// RMS residual of the fit in dB.
    #[serde(default)]
    pub fit_residual_db: f64,
    #[serde(default = "yes")]
    pub converged: bool,
}

fn yes() -> bool {
    true
}

impl SnrModel {
    pub fn new(a_hat: f64, b_hat: f64, c_hat: f64, nu_hat: f64, mu_hat: f64) -> Self {
        SnrModel { a_hat, b_hat, c_hat, nu_hat, mu_hat, fit_residual_db: 0.0, converged: true }
    }

    /// Model SNR without the transmit-power-to-noise factor.
    pub fn gain(&self, d_i: f64, d_a: f64) -> f64 {
        self.a_hat * d_i.powf(-self.nu_hat)
            + self.b_hat * d_i.powf(-self.nu_hat / 2.0) * d_a.powf(-self.mu_hat / 2.0)
            + self.c_hat * d_a.powf(-self.mu_hat)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain struct serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

pub fn model_snr(m: &SnrModel, d_i: f64, d_a: f64, p_t: f64, sigma2: f64) -> Result<f64, RadioMapError> {
    if !(d_i > 0.0 && d_a > 0.0) {
        return Err(RadioMapError::Domain { d_i, d_a });
    }
    Ok(m.gain(d_i, d_a) * p_t / sigma2)
}

const DB: f64 = 10.0 / std::f64::consts::LN_10;

struct FitData {
    ln_di: Vec<f64>,
    ln_da: Vec<f64>,
    /// Targets in dB, relative to the reference gain.
    y_db: Vec<f64>,
}

impl FitData {
    /// Residuals and Jacobian (row-major, 5 columns) at `p = [A, B, C, nu, mu]`.
    /// Returns `None` if the model is not positive at some cell.
    fn eval(&self, p: &[f64; 5], jac: Option<&mut Vec<f64>>) -> Option<Vec<f64>> {
        let [a, b, c, nu, mu] = *p;
        let mut r = Vec::with_capacity(self.y_db.len());
        let mut jrows = jac;
        if let Some(j) = jrows.as_deref_mut() {
            j.clear();
        }
        for i in 0..self.y_db.len() {
            let (li, la) = (self.ln_di[i], self.ln_da[i]);
            let ta = (-nu * li).exp();
            let tb = (-0.5 * (nu * li + mu * la)).exp();
            let tc = (-mu * la).exp();
            let f = a * ta + b * tb + c * tc;
            if !(f > 0.0) || !f.is_finite() {
                return None;
            }
            r.push(DB * f.ln() - self.y_db[i]);
            if let Some(j) = jrows.as_deref_mut() {
                let s = DB / f;
                j.extend_from_slice(&[
                    s * ta,
                    s * tb,
                    s * tc,
                    s * (-li * a * ta - 0.5 * li * b * tb),
                    s * (-la * c * tc - 0.5 * la * b * tb),
                ]);
            }
        }
        Some(r)
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

struct LmOutcome {
    p: [f64; 5],
    cost: f64,
    converged: bool,
}

/// Projected Levenberg-Marquardt with Marquardt diagonal scaling. Parameters
/// sitting on the zero bound with an outward-pointing gradient are frozen for
/// the step.
fn levenberg_marquardt(data: &FitData, p0: [f64; 5], max_iter: usize) -> Option<LmOutcome> {
    let mut p = p0;
    let mut jac = Vec::new();
    let mut r = data.eval(&p, Some(&mut jac))?;
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let n = r.len();
    for _ in 0..max_iter {
        let mut jtj = nalgebra::Matrix5::<f64>::zeros();
        let mut g = nalgebra::Vector5::<f64>::zeros();
        for i in 0..n {
            let row = nalgebra::Vector5::from_column_slice(&jac[5 * i..5 * i + 5]);
            jtj += row * row.transpose();
            g += row * r[i];
        }
        let free: Vec<bool> = (0..5).map(|k| !(p[k] <= 0.0 && g[k] > 0.0)).collect();
        let gnorm: f64 = (0..5).filter(|&k| free[k]).map(|k| (g[k] * p[k].abs().max(1e-300)).powi(2)).sum::<f64>().sqrt();
        if gnorm <= 1e-14 * cost.max(1e-300) || cost < 1e-28 * n as f64 {
            return Some(LmOutcome { p, cost, converged: true });
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut m = jtj;
            let mut rhs = -g;
            for k in 0..5 {
                if free[k] {
                    m[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
                } else {
                    for l in 0..5 {
                        m[(k, l)] = 0.0;
                        m[(l, k)] = 0.0;
                    }
                    m[(k, k)] = 1.0;
                    rhs[k] = 0.0;
                }
            }
            let step = match m.cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut trial = p;
            for k in 0..5 {
                trial[k] = (p[k] + step[k]).max(0.0);
            }
            if let Some(rt) = data.eval(&trial, None) {
                let ct = sum_sq(&rt);
                if ct < cost {
                    let rel = (cost - ct) / cost.max(1e-300);
                    let moved = (0..5).map(|k| (trial[k] - p[k]).abs() / p[k].abs().max(1e-12)).fold(0.0, f64::max);
                    p = trial;
                    r = data.eval(&p, Some(&mut jac))?;
                    cost = ct;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    if rel < 1e-15 || moved < 1e-13 {
                        return Some(LmOutcome { p, cost, converged: true });
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            // no descent direction left at machine precision
            return Some(LmOutcome { p, cost, converged: true });
        }
    }
    let _ = r;
    Some(LmOutcome { p, cost, converged: false })
}

/// Least-squares fit (in dB) of the three-term model to the map cells with
/// positive SNR, with all five parameters constrained to be nonnegative.
///
/// Runs eight deterministic starts and keeps the best. `converged` is false
/// if the best start hit the iteration cap.
pub fn fit_model(map: &RadioMap, s: &Scenario) -> Result<SnrModel, RadioMapError> {
    let scale = s.radio.snr_scale();
    let mut ln_di = Vec::new();
    let mut ln_da = Vec::new();
    let mut y = Vec::new();
    for iy in 0..map.ny {
        for ix in 0..map.nx {
            let v = map.snr[map.index(ix, iy)];
            if v > 0.0 && v.is_finite() {
                let q = map.cell_center(ix, iy);
                ln_di.push(s.dist_irs(&q).ln());
                ln_da.push(s.dist_ap(&q).ln());
                y.push(v / scale);
            }
        }
    }
    if y.len() < 5 {
        return Err(RadioMapError::TooFewCells(y.len()));
    }
    // normalizing by the geometric mean makes the fit invariant to a global
    // gain factor
    let ln_ref = y.iter().map(|v| v.ln()).sum::<f64>() / y.len() as f64;
    let g_ref = ln_ref.exp();
    let data = FitData {
        y_db: y.iter().map(|v| DB * (v.ln() - ln_ref)).collect(),
        ln_di,
        ln_da,
    };
    let ln_y: Vec<f64> = y.iter().map(|v| v.ln() - ln_ref).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let mut starts = Vec::new();
    for nu0 in [2.0, 4.5] {
        for mu0 in [2.0, 4.5] {
            // log-linear regression of a single dominant term
            let c0 = mean(&ln_y.iter().zip(&data.ln_da).map(|(l, d)| l + mu0 * d).collect::<Vec<_>>()).exp();
            let a0 = mean(&ln_y.iter().zip(&data.ln_di).map(|(l, d)| l + nu0 * d).collect::<Vec<_>>()).exp();
            starts.push([0.01 * a0, 0.1 * (0.01 * a0 * c0).sqrt(), c0, nu0, mu0]);
            starts.push([a0, 0.1 * (a0 * 0.01 * c0).sqrt(), 0.01 * c0, nu0, mu0]);
        }
    }
    let best = starts
        .iter()
        .filter_map(|p0| levenberg_marquardt(&data, *p0, 500))
        .fold(None::<LmOutcome>, |acc, o| match acc {
            Some(b) if b.cost <= o.cost => Some(b),
            _ => Some(o),
        })
        .ok_or(RadioMapError::TooFewCells(0))?;
    let p = best.p;
    let model = SnrModel {
        a_hat: p[0] * g_ref,
        b_hat: p[1] * g_ref,
        c_hat: p[2] * g_ref,
        nu_hat: p[3],
        mu_hat: p[4],
        fit_residual_db: (best.cost / data.y_db.len() as f64).sqrt(),
        converged: best.converged,
    };
    if !model.converged {
        log::warn!("radio map fit stopped at the iteration cap (rms {:.3} dB)", model.fit_residual_db);
    }
    Ok(model)
}
