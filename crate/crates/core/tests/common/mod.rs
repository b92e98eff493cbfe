//! Helpers shared by the integration tests.
#![allow(dead_code)]

use irsplan::socp::{ConeProgram, LinExpr};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const BASE: &str = include_str!("../../../../configs/base.toml");

pub fn base() -> irsplan::scenario::Scenario {
    irsplan::scenario::load_scenario(BASE).unwrap()
}

/// A random bounded SOCP with a known strictly feasible point.
pub struct RandomSocp {
    pub program: ConeProgram,
    pub feasible: Vec<f64>,
}

pub fn random_socp(seed: u64, n: usize, n_cones: usize, n_eq: usize) -> RandomSocp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xf: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut p = ConeProgram::new(n);
    p.objective = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    // ball keeps the problem bounded
    let radius = xf.iter().map(|v| v * v).sum::<f64>().sqrt() + 1.0;
    p.add_soc((0..n).map(LinExpr::var).collect(), LinExpr::constant(radius));
    for _ in 0..n_cones {
        let dim = rng.random_range(1..=4);
        let mut lhs = Vec::new();
        for _ in 0..dim {
            let mut e = LinExpr::constant(rng.random_range(-1.0..1.0));
            for j in 0..n {
                if rng.random_bool(0.4) {
                    e.terms.push((j, rng.random_range(-1.0..1.0)));
                }
            }
            lhs.push(e);
        }
        let mut rhs = LinExpr::constant(0.0);
        for j in 0..n {
            if rng.random_bool(0.3) {
                rhs.terms.push((j, rng.random_range(-0.5..0.5)));
            }
        }
        let at = lhs.iter().map(|e| e.eval(&xf).powi(2)).sum::<f64>().sqrt();
        rhs.constant = at - rhs.eval(&xf) + rng.random_range(0.1..1.0);
        p.add_soc(lhs, rhs);
    }
    for _ in 0..n_eq {
        let mut e = LinExpr::constant(0.0);
        for j in 0..n {
            e.terms.push((j, rng.random_range(-1.0..1.0)));
        }
        e.constant = -e.eval(&xf);
        p.add_eq(e);
    }
    RandomSocp { program: p, feasible: xf }
}

fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let nx = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nx <= t {
        return;
    }
    if nx <= -t {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let a = (t + nx) / 2.0;
    v[0] = a;
    for x in &mut v[1..] {
        *x *= a / nx;
    }
}

/// First-order reference: ADMM on `min c'x + I_K(Mx + q)` over `{x : Ex = f}`.
/// Only handles cone constraints (no bounds, no linear rows).
pub fn admm_reference(p: &ConeProgram, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = p.n_vars;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut blocks = Vec::new();
    for c in &p.soc_constraints {
        let start = rows.len();
        for e in std::iter::once(&c.rhs).chain(&c.lhs) {
            let mut r = vec![0.0; n];
            for &(j, a) in &e.terms {
                r[j] += a;
            }
            rows.push((r, e.constant));
        }
        blocks.push(start..rows.len());
    }
    let m = rows.len();
    let mm = DMatrix::from_fn(m, n, |i, j| rows[i].0[j]);
    let q = DVector::from_iterator(m, rows.iter().map(|r| r.1));
    let ne = p.eq_constraints.len();
    let e = DMatrix::from_fn(ne, n, |i, j| p.eq_constraints[i].terms.iter().filter(|t| t.0 == j).map(|t| t.1).sum());
    let f = DVector::from_iterator(ne, p.eq_constraints.iter().map(|c| -c.constant));
    let c = DVector::from_column_slice(&p.objective);
    let rho = 1.0;
    let mut kkt = DMatrix::zeros(n + ne, n + ne);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(mm.transpose() * &mm * rho));
    kkt.view_mut((0, n), (n, ne)).copy_from(&e.transpose());
    kkt.view_mut((n, 0), (ne, n)).copy_from(&e);
    let lu = kkt.lu();
    let mut u = DVector::zeros(m);
    let mut w = DVector::zeros(m);
    let mut x = DVector::zeros(n);
    for _ in 0..max_iter {
        let target = &u - &w - &q;
        let mut rhs = DVector::zeros(n + ne);
        rhs.rows_mut(0, n).copy_from(&(mm.transpose() * target * rho - &c));
        rhs.rows_mut(n, ne).copy_from(&f);
        let sol = lu.solve(&rhs).unwrap();
        x = sol.rows(0, n).into_owned();
        let mxq = &mm * &x + &q;
        let mut v = &mxq + &w;
        for b in &blocks {
            project_soc(&mut v.as_mut_slice()[b.clone()]);
        }
        let du = (&v - &u).norm();
        u = v;
        let r = &mxq - &u;
        w += &r;
        if r.norm() <= tol && rho * (mm.transpose() * du).norm() <= tol {
            break;
        }
    }
    let xs: Vec<f64> = x.iter().copied().collect();
    let obj = p.objective_at(&xs);
    (xs, obj)
}

/// Worst cone violation and equality residual of `x`.
pub fn max_violation(p: &ConeProgram, x: &[f64]) -> f64 {
    let cones = p.soc_constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
    let eqs = p.eq_constraints.iter().map(|e| e.eval(x).abs()).fold(0.0, f64::max);
    let bounds = p
        .bounds
        .iter()
        .zip(x)
        .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0))
        .fold(0.0, f64::max);
    cones.max(eqs).max(bounds)
}

/// Fitted-model parameters in the range seen on real maps, with each gain
/// switched off now and then.
pub fn random_model(rng: &mut impl Rng) -> irsplan::radiomap::SnrModel {
    let mut gain = || if rng.random_bool(0.2) { 0.0 } else { 10f64.powf(rng.random_range(-3.0..2.0)) };
    let (a, b, c) = (gain(), gain(), gain());
    let c = if a + b + c == 0.0 { 1.0 } else { c };
    irsplan::radiomap::SnrModel::new(a, b, c, rng.random_range(1.5..8.0), rng.random_range(1.5..8.0))
}

/// `log2(1 + SNR)` of the three-term model, written out independently.
pub fn rate_per_hz(m: &irsplan::radiomap::SnrModel, d_i: f64, d_a: f64, scale: f64) -> f64 {
    let g = m.a_hat * d_i.powf(-m.nu_hat)
        + m.b_hat * (d_i.powf(-m.nu_hat) * d_a.powf(-m.mu_hat)).sqrt()
        + m.c_hat * d_a.powf(-m.mu_hat);
    (1.0 + g * scale).log2()
}

pub fn fd_gradient(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, hx: f64, hy: f64) -> [f64; 2] {
    [
        (f(x + hx, y) - f(x - hx, y)) / (2.0 * hx),
        (f(x, y + hy) - f(x, y - hy)) / (2.0 * hy),
    ]
}

/// Second-difference Hessian of `f`.
pub fn fd_hessian(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, hx: f64, hy: f64) -> nalgebra::Matrix2<f64> {
    let f0 = f(x, y);
    let xx = (f(x + hx, y) - 2.0 * f0 + f(x - hx, y)) / (hx * hx);
    let yy = (f(x, y + hy) - 2.0 * f0 + f(x, y - hy)) / (hy * hy);
    let xy = (f(x + hx, y + hy) - f(x + hx, y - hy) - f(x - hx, y + hy) + f(x - hx, y - hy)) / (4.0 * hx * hy);
    nalgebra::Matrix2::new(xx, xy, xy, yy)
}

/// Central differences of a gradient.
pub fn fd_jacobian(g: impl Fn(f64, f64) -> [f64; 2], x: f64, y: f64, hx: f64, hy: f64) -> nalgebra::Matrix2<f64> {
    let (gxp, gxm) = (g(x + hx, y), g(x - hx, y));
    let (gyp, gym) = (g(x, y + hy), g(x, y - hy));
    nalgebra::Matrix2::new(
        (gxp[0] - gxm[0]) / (2.0 * hx),
        (gyp[0] - gym[0]) / (2.0 * hy),
        (gxp[1] - gxm[1]) / (2.0 * hx),
        (gyp[1] - gym[1]) / (2.0 * hy),
    )
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn sym_eigen(h: &nalgebra::Matrix2<f64>) -> [f64; 2] {
    let s = 0.5 * (h + h.transpose());
    let mean = 0.5 * (s[(0, 0)] + s[(1, 1)]);
    let r = (0.25 * (s[(0, 0)] - s[(1, 1)]).powi(2) + s[(0, 1)].powi(2)).sqrt();
    [mean - r, mean + r]
}

/// Uniform position in the area that clears every obstacle margin.
pub fn free_position(rng: &mut impl Rng, s: &irsplan::scenario::Scenario) -> irsplan::scenario::Point {
    loop {
        let q = irsplan::scenario::Point::new(rng.random_range(0.0..s.area_width_m), rng.random_range(0.0..s.area_height_m));
        if !s.collides(&q, s.d_s) {
            return q;
        }
    }
}

/// Base scenario with random obstacles, a coarse map and its fitted model.
pub fn small_instance(
    seed: u64,
    m_irs: usize,
    n_obstacles: usize,
) -> (irsplan::scenario::Scenario, irsplan::radiomap::RadioMap, irsplan::radiomap::SnrModel) {
    let mut s = irsplan::scenario::with_random_obstacles(&base(), n_obstacles, seed).unwrap();
    s.radio.m_irs = m_irs;
    let map = irsplan::radiomap::generate_map(&s, 25, 15, 10, seed).unwrap();
    let model = irsplan::radiomap::fit_model(&map, &s).unwrap();
    (s, map, model)
}
