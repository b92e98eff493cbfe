//! Stochastic mm-wave uplink channels and the closed-form joint AP/IRS
//! beamforming that maximizes the received SNR.
//!
//! The robot-IRS (`h_r`) and robot-AP (`h_d`) channels are i.i.d. Rayleigh
//! vectors scaled by a distance-based path loss. The IRS-AP channel `G` is the
//! rank-one line-of-sight matrix `sqrt(N M) * gamma * a * b^T` built from ULA
//! array responses.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scenario::{Point, Scenario};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("effective channel is identically zero")]
    Degenerate,
}

/// One channel realization for a robot position.
#[derive(Debug, Clone)]
pub struct ChannelSample {
    /// Robot-IRS channel including path loss, length `M`.
    pub h_r: Vec<Complex64>,
    /// Robot-AP channel including path loss, length `N`.
    pub h_d: Vec<Complex64>,
    /// IRS-AP channel, `M x N`, rank one.
    pub g: DMatrix<Complex64>,
    /// Small-scale fading parts (unit variance).
    pub h_r_tilde: Vec<Complex64>,
    pub h_d_tilde: Vec<Complex64>,
    /// Normalized IRS and AP array responses.
    pub a_irs: Vec<Complex64>,
    pub b_ap: Vec<Complex64>,
    /// `sqrt(rho_ia * d_ia^-2)`.
    pub gamma: f64,
    /// Linear reference gain of the robot links.
    pub rho: f64,
    pub d_i: f64,
    pub d_a: f64,
    pub nu: f64,
    pub mu: f64,
    /// `p_t / sigma^2`.
    pub snr_scale: f64,
}

impl ChannelSample {
    pub fn n_ap(&self) -> usize {
        self.h_d.len()
    }

    pub fn m_irs(&self) -> usize {
        self.h_r.len()
    }
}

#[derive(Debug, Clone)]
pub struct BeamformingSolution {
    /// Per-element phases of the normalized IRS matrix, radians in `[0, 2pi)`.
    pub phi: Vec<f64>,
    /// Common phase applied on top of `phi`.
    pub psi: f64,
    /// Unit-norm AP combiner.
    pub w: Vec<Complex64>,
    /// Linear SNR obtained with these choices.
    pub snr: f64,
}

impl BeamformingSolution {
    /// Absolute element phases `psi + phi_m`, wrapped to `[0, 2pi)`.
    pub fn element_phases(&self) -> Vec<f64> {
        self.phi.iter().map(|p| (p + self.psi).rem_euclid(TAU)).collect()
    }
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// ULA response `1/sqrt(n) [1, e^{-j k l c}, ..., e^{-j k l (n-1) c}]`
/// for direction cosine `c`.
pub fn array_response(n: usize, wavelength: f64, spacing: f64, cosine: f64) -> Vec<Complex64> {
    if n == 0 {
        return Vec::new();
    }
    let norm = 1.0 / (n as f64).sqrt();
    let k = 2.0 * PI / wavelength * spacing * cosine;
    (0..n)
        .map(|i| Complex64::from_polar(norm, -k * i as f64))
        .collect()
}

/// Horizontal unit axis of a wall-mounted ULA: parallel to the wall nearest to `p`.
fn array_axis(s: &Scenario, p: &Point) -> Point {
    let dx = p.x.min(s.area_width_m - p.x);
    let dy = p.y.min(s.area_height_m - p.y);
    if dy <= dx {
        Point::new(1.0, 0.0)
    } else {
        Point::new(0.0, 1.0)
    }
}

/// Cosine between a horizontal array axis and the 3D direction `from -> to`.
fn direction_cosine(axis: &Point, from: &Point, z_from: f64, to: &Point, z_to: f64) -> f64 {
    let d = to - from;
    let len = (d.norm_squared() + (z_to - z_from).powi(2)).sqrt();
    if len == 0.0 {
        0.0
    } else {
        axis.dot(&d) / len
    }
}

/// Draw one channel at `q` using a fresh generator seeded with `rng_seed`.
pub fn sample_channel(s: &Scenario, q: &Point, los_ap: bool, los_irs: bool, rng_seed: u64) -> ChannelSample {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_channel_with(s, q, los_ap, los_irs, &mut rng)
}

/// Same as [`sample_channel`] but drawing from a caller-owned generator.
/// The direct channel is always drawn first, so for a fixed stream the
/// direct part does not depend on `M`.
pub fn sample_channel_with(s: &Scenario, q: &Point, los_ap: bool, los_irs: bool, rng: &mut impl Rng) -> ChannelSample {
    let r = &s.radio;
    let (n, m) = (r.n_ap, r.m_irs);
    let nu = if los_irs { r.nu_los } else { r.nu_nlos };
    let mu = if los_ap { r.mu_los } else { r.mu_nlos };
    let d_i = s.dist_irs(q);
    let d_a = s.dist_ap(q);
    let rho = r.rho();

    let h_d_tilde: Vec<Complex64> = (0..n).map(|_| complex_gaussian(rng)).collect();
    let h_r_tilde: Vec<Complex64> = (0..m).map(|_| complex_gaussian(rng)).collect();

    let gain_r = (rho * d_i.powf(-nu)).sqrt();
    let gain_d = (rho * d_a.powf(-mu)).sqrt();
    let h_r = h_r_tilde.iter().map(|h| h * gain_r).collect();
    let h_d = h_d_tilde.iter().map(|h| h * gain_d).collect();

    let alpha = direction_cosine(&array_axis(s, &s.q_i), &s.q_i, s.z_i, q, s.z_r);
    let beta = direction_cosine(&array_axis(s, &s.q_a), &s.q_a, s.z_a, &s.q_i, s.z_i);
    let a_irs = array_response(m, r.carrier_wavelength_m, r.antenna_separation_m, alpha);
    let b_ap = array_response(n, r.carrier_wavelength_m, r.antenna_separation_m, beta);

    let d_ia = s.dist_irs_ap();
    let gamma = (r.rho_ia() / (d_ia * d_ia)).sqrt();
    let scale = ((n * m) as f64).sqrt() * gamma;
    let g = DMatrix::from_fn(m, n, |i, j| a_irs[i] * b_ap[j] * scale);

    ChannelSample {
        h_r,
        h_d,
        g,
        h_r_tilde,
        h_d_tilde,
        a_irs,
        b_ap,
        gamma,
        rho,
        d_i,
        d_a,
        nu,
        mu,
        snr_scale: r.snr_scale(),
    }
}

/// Effective uplink row vector `h_r^H diag(e^{j theta}) G + h_d^H`.
fn effective_channel(c: &ChannelSample, theta: &[f64]) -> Vec<Complex64> {
    let (m, n) = (c.m_irs(), c.n_ap());
    let mut v: Vec<Complex64> = c.h_d.iter().map(|h| h.conj()).collect();
    for i in 0..m {
        let coef = c.h_r[i].conj() * Complex64::from_polar(1.0, theta[i]);
        for (j, vj) in v.iter_mut().enumerate().take(n) {
            *vj += coef * c.g[(i, j)];
        }
    }
    v
}

/// Received SNR for arbitrary IRS phases `theta` (length `M`) and AP combiner `w`.
pub fn snr_with(c: &ChannelSample, theta: &[f64], w: &[Complex64]) -> f64 {
    assert_eq!(theta.len(), c.m_irs());
    assert_eq!(w.len(), c.n_ap());
    let v = effective_channel(c, theta);
    let y: Complex64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
    y.norm_sqr() * c.snr_scale
}

/// The three gains `(A, B, C)` of the optimal-SNR decomposition, such that
/// `SNR* = (A d_i^-nu + B d_i^-nu/2 d_a^-mu/2 + C d_a^-mu) p_t / sigma^2`.
pub fn optimal_snr_terms(c: &ChannelSample) -> (f64, f64, f64) {
    let n = c.n_ap() as f64;
    let l1: f64 = c.h_r_tilde.iter().map(|h| h.norm()).sum();
    let bh: Complex64 = c.b_ap.iter().zip(&c.h_d_tilde).map(|(b, h)| b * h).sum();
    let l2sq: f64 = c.h_d_tilde.iter().map(|h| h.norm_sqr()).sum();
    let a = n * c.rho * c.gamma * c.gamma * l1 * l1;
    let b = 2.0 * n.sqrt() * c.rho * c.gamma * l1 * bh.norm();
    let cc = c.rho * l2sq;
    (a, b, cc)
}

/// Optimal SNR through the three-term closed form (no beamformer is built).
pub fn optimal_snr_closed_form(c: &ChannelSample) -> f64 {
    let (a, b, cc) = optimal_snr_terms(c);
    (a * c.d_i.powf(-c.nu) + b * c.d_i.powf(-c.nu / 2.0) * c.d_a.powf(-c.mu / 2.0) + cc * c.d_a.powf(-c.mu))
        * c.snr_scale
}

/// Closed-form maximizer of the received SNR over IRS phases and AP combiner.
///
/// The IRS phases co-phase every reflected element, the common phase `psi`
/// aligns the reflected path with the direct one, and `w` is the matched
/// filter of the resulting effective channel.
pub fn optimal_beamforming(c: &ChannelSample) -> Result<BeamformingSolution, ChannelError> {
    let m = c.m_irs();
    let phi: Vec<f64> = (0..m)
        .map(|i| {
            let g = c.h_r_tilde[i].conj() * c.a_irs[i] * c.gamma;
            (-g.arg()).rem_euclid(TAU)
        })
        .collect();
    let psi = if m == 0 {
        0.0
    } else {
        let bh: Complex64 = c.b_ap.iter().zip(&c.h_d_tilde).map(|(b, h)| b * h).sum();
        (-bh.arg()).rem_euclid(TAU)
    };
    let theta: Vec<f64> = phi.iter().map(|p| p + psi).collect();
    let v = effective_channel(c, &theta);
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(ChannelError::Degenerate);
    }
    let w: Vec<Complex64> = v.iter().map(|x| x.conj() / norm).collect();
    let snr = snr_with(c, &theta, &w);
    Ok(BeamformingSolution { phi, psi, w, snr })
}

/// Shannon rate in bit/s.
pub fn rate(snr: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + snr).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::tests::base;

    fn with_sizes(n: usize, m: usize) -> Scenario {
        let mut s = base();
        s.radio.n_ap = n;
        s.radio.m_irs = m;
        s
    }

    #[test]
    fn same_seed_same_sample() {
        let s = base();
        let q = Point::new(12.0, 7.0);
        let a = sample_channel(&s, &q, true, false, 42);
        let b = sample_channel(&s, &q, true, false, 42);
        assert_eq!(a.h_r, b.h_r);
        assert_eq!(a.h_d, b.h_d);
        assert_eq!(a.g, b.g);
    }

    #[test]
    fn no_irs_degenerates_to_mrc() {
        let s = with_sizes(16, 0);
        let q = Point::new(12.0, 7.0);
        let c = sample_channel(&s, &q, true, true, 3);
        assert!(c.h_r.is_empty());
        assert_eq!(c.g.nrows(), 0);
        let bf = optimal_beamforming(&c).unwrap();
        let hd_norm = c.h_d.iter().map(|h| h.norm_sqr()).sum::<f64>().sqrt();
        for (w, h) in bf.w.iter().zip(&c.h_d) {
            assert!((w - h / hd_norm).norm() < 1e-14);
        }
        let l2: f64 = c.h_d_tilde.iter().map(|h| h.norm_sqr()).sum();
        let expected = s.radio.rho() * l2 * c.d_a.powf(-c.mu) * s.radio.snr_scale();
        assert!((bf.snr - expected).abs() <= 1e-10 * expected);
    }

    #[test]
    fn direct_channel_has_unit_variance() {
        let s = with_sizes(4, 0);
        let q = Point::new(20.0, 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trials = 100_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let c = sample_channel_with(&s, &q, true, true, &mut rng);
            acc += c.h_d_tilde.iter().map(|h| h.norm_sqr()).sum::<f64>() / 4.0;
        }
        let mean = acc / trials as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn irs_matrix_is_rank_one() {
        let s = with_sizes(4, 8);
        let c = sample_channel(&s, &Point::new(30.0, 12.0), true, true, 5);
        let sv = c.g.clone().svd(false, false).singular_values;
        assert!(sv[1] < 1e-10 * sv[0]);
    }

    #[test]
    fn combiner_is_unit_norm() {
        let s = with_sizes(16, 64);
        for seed in 0..20 {
            let c = sample_channel(&s, &Point::new(10.0 + seed as f64, 5.0), seed % 2 == 0, true, seed);
            let bf = optimal_beamforming(&c).unwrap();
            let n: f64 = bf.w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
            assert!(bf.snr >= 0.0);
            assert!(bf.phi.iter().all(|p| (0.0..TAU).contains(p)));
        }
    }

    #[test]
    fn closed_form_matches_direct_evaluation() {
        for (n, m) in [(1, 1), (2, 3), (16, 64), (4, 128)] {
            let s = with_sizes(n, m);
            for seed in 0..50u64 {
                let q = Point::new(5.0 + seed as f64 * 0.7, 3.0 + seed as f64 * 0.4);
                let c = sample_channel(&s, &q, seed % 3 != 0, seed % 2 == 0, seed);
                let direct = optimal_beamforming(&c).unwrap().snr;
                let closed = optimal_snr_closed_form(&c);
                assert!((direct - closed).abs() <= 1e-8 * closed, "n={n} m={m}: {direct} vs {closed}");
            }
        }
    }

    #[test]
    fn beats_exhaustive_phase_grid_two_elements() {
        let s = with_sizes(1, 2);
        let c = sample_channel(&s, &Point::new(20.0, 10.0), true, true, 99);
        let best = optimal_beamforming(&c).unwrap().snr;
        // N = 1: the combiner is a unit phase and does not change |y|
        let w = [Complex64::new(1.0, 0.0)];
        let steps = (TAU / 1e-3).ceil() as usize;
        let h0 = c.h_d[0].conj();
        let u: Vec<Complex64> = (0..2).map(|i| c.h_r[i].conj() * c.g[(i, 0)]).collect();
        let mut grid_max: f64 = 0.0;
        for a in 0..steps {
            let pa = h0 + u[0] * Complex64::from_polar(1.0, a as f64 * 1e-3);
            for b in 0..steps {
                let y = pa + u[1] * Complex64::from_polar(1.0, b as f64 * 1e-3);
                grid_max = grid_max.max(y.norm_sqr());
            }
        }
        let grid_max = grid_max * c.snr_scale;
        assert!(best >= grid_max * (1.0 - 1e-4), "{best} < {grid_max}");
        assert!(snr_with(&c, &optimal_beamforming(&c).unwrap().element_phases(), &w) <= best * (1.0 + 1e-12));
    }

    #[test]
    fn dominates_random_beamformers() {
        let s = with_sizes(4, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for seed in 0..100u64 {
            let q = Point::new(rng.random_range(1.0..49.0), rng.random_range(1.0..29.0));
            let c = sample_channel(&s, &q, rng.random(), rng.random(), seed);
            let best = optimal_beamforming(&c).unwrap().snr;
            for _ in 0..100 {
                let theta: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..TAU)).collect();
                let mut w: Vec<Complex64> = (0..4).map(|_| complex_gaussian(&mut rng)).collect();
                let nrm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                w.iter_mut().for_each(|x| *x /= nrm);
                assert!(snr_with(&c, &theta, &w) <= best * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn snr_scales_with_power() {
        let mut s = with_sizes(4, 16);
        let q = Point::new(18.0, 22.0);
        let a = optimal_beamforming(&sample_channel(&s, &q, true, true, 8)).unwrap().snr;
        s.radio.p_t *= 3.5;
        let b = optimal_beamforming(&sample_channel(&s, &q, true, true, 8)).unwrap().snr;
        assert!((b / a - 3.5).abs() < 1e-12);
    }

    #[test]
    fn shannon_rate_values() {
        assert_eq!(rate(0.0, 200e6), 0.0);
        assert_eq!(rate(1.0, 200e6), 2e8);
        assert_eq!(rate(3.0, 1.0), 2.0);
    }
}
