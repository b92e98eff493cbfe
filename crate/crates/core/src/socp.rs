//! Primal-dual interior-point solver for second-order cone programs.
//!
//! Problems are stated with sparse affine expressions and lowered to the
//! standard form
//!
//! ```text
//! minimize    c'x
//! subject to  A x = b
//!             G x + s = h,   s in R+^l x Q^{d1} x ... x Q^{dk}
//! ```
//!
//! which is solved through its homogeneous self-dual embedding with
//! Nesterov-Todd scaling and Mehrotra predictor-corrector steps. The
//! embedding yields infeasibility certificates when no solution exists.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};

/// `sum(coef * x[var]) + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(j: usize) -> Self {
        LinExpr { terms: vec![(j, 1.0)], constant: 0.0 }
    }

    pub fn term(j: usize, coef: f64) -> Self {
        LinExpr { terms: vec![(j, coef)], constant: 0.0 }
    }

    pub fn plus(mut self, j: usize, coef: f64) -> Self {
        self.terms.push((j, coef));
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }
}

/// `||lhs(x)||_2 <= rhs(x)`. An empty `lhs` is the linear inequality `rhs(x) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub lhs: Vec<LinExpr>,
    pub rhs: LinExpr,
}

impl SocConstraint {
    /// `||lhs|| - rhs`, nonpositive when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let n = self.lhs.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
        n - self.rhs.eval(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProgram {
    pub n_vars: usize,
    /// Linear objective coefficients, length `n_vars`.
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    /// Each expression must vanish.
    pub eq_constraints: Vec<LinExpr>,
    pub soc_constraints: Vec<SocConstraint>,
    /// Per-variable `(lower, upper)`, infinite for none. Empty means all free.
    pub bounds: Vec<(f64, f64)>,
}

impl ConeProgram {
    pub fn new(n_vars: usize) -> Self {
        ConeProgram {
            n_vars,
            objective: vec![0.0; n_vars],
            objective_offset: 0.0,
            eq_constraints: Vec::new(),
            soc_constraints: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn add_var(&mut self) -> usize {
        self.n_vars += 1;
        self.objective.push(0.0);
        if !self.bounds.is_empty() {
            self.bounds.push((f64::NEG_INFINITY, f64::INFINITY));
        }
        self.n_vars - 1
    }

    pub fn add_eq(&mut self, e: LinExpr) {
        self.eq_constraints.push(e);
    }

    pub fn add_soc(&mut self, lhs: Vec<LinExpr>, rhs: LinExpr) {
        self.soc_constraints.push(SocConstraint { lhs, rhs });
    }

    /// `e(x) >= 0`.
    pub fn add_nonneg(&mut self, e: LinExpr) {
        self.add_soc(Vec::new(), e);
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        if self.bounds.is_empty() {
            self.bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); self.n_vars];
        }
        self.bounds[j] = (lower, upper);
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    fn validate(&self) -> Result<(), String> {
        if self.n_vars == 0 {
            return Err("program has no variables".into());
        }
        if self.objective.len() != self.n_vars {
            return Err(format!("objective has {} entries for {} variables", self.objective.len(), self.n_vars));
        }
        if !self.bounds.is_empty() && self.bounds.len() != self.n_vars {
            return Err(format!("bounds have {} entries for {} variables", self.bounds.len(), self.n_vars));
        }
        let check = |e: &LinExpr| e.terms.iter().all(|&(j, a)| j < self.n_vars && a.is_finite()) && e.constant.is_finite();
        let ok = self.eq_constraints.iter().all(check)
            && self.soc_constraints.iter().all(|c| check(&c.rhs) && c.lhs.iter().all(check));
        if !ok {
            return Err("expression references an unknown variable or a non-finite value".into());
        }
        Ok(())
    }

    /// Line-oriented text form: `vars n`, `obj`, `eq`, `soc` and `bound`
    /// records; expressions are written as `constant j:coef j:coef ...` and
    /// the cone terms of a `soc` line are separated by `|` with the
    /// right-hand side first.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let expr = |e: &LinExpr| {
            let mut s = format!("{:e}", e.constant);
            for (j, a) in &e.terms {
                let _ = write!(s, " {j}:{a:e}");
            }
            s
        };
        let _ = writeln!(out, "vars {}", self.n_vars);
        let obj = LinExpr {
            terms: self.objective.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect(),
            constant: self.objective_offset,
        };
        let _ = writeln!(out, "obj {}", expr(&obj));
        for e in &self.eq_constraints {
            let _ = writeln!(out, "eq {}", expr(e));
        }
        for c in &self.soc_constraints {
            let mut line = format!("soc {}", expr(&c.rhs));
            for e in &c.lhs {
                let _ = write!(line, " | {}", expr(e));
            }
            let _ = writeln!(out, "{line}");
        }
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_finite() || hi.is_finite() {
                let _ = writeln!(out, "bound {j} {lo:e} {hi:e}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stalled short of the tolerance but within its square root (scaled by
    /// 0.1); the iterate is usable when the caller verifies it.
    Inaccurate,
    MaxIter,
}

impl SolveStatus {
    /// `Optimal` or `Inaccurate`.
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::MaxIter => "max_iter",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Multipliers of the equality constraints.
    pub y: Vec<f64>,
    /// Cone multipliers in standard-form order: linear rows first (linear
    /// constraints, then bounds), then the cone blocks.
    pub z: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Relative duality gap.
    pub gap: f64,
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

type SparseRow = Vec<(usize, f64)>;

struct StandardForm {
    n: usize,
    c: Vec<f64>,
    a: Vec<SparseRow>,
    b: Vec<f64>,
    g: Vec<SparseRow>,
    h: Vec<f64>,
    /// Number of orthant rows at the top of `g`.
    n_lin: usize,
    soc_dims: Vec<usize>,
}

impl StandardForm {
    fn from_program(p: &ConeProgram) -> Self {
        let neg = |e: &LinExpr| e.terms.iter().map(|&(j, a)| (j, -a)).collect::<SparseRow>();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for e in &p.eq_constraints {
            a.push(e.terms.clone());
            b.push(-e.constant);
        }
        let mut g = Vec::new();
        let mut h = Vec::new();
        for c in p.soc_constraints.iter().filter(|c| c.lhs.is_empty()) {
            g.push(neg(&c.rhs));
            h.push(c.rhs.constant);
        }
        for (j, &(lo, hi)) in p.bounds.iter().enumerate() {
            if lo.is_finite() {
                g.push(vec![(j, -1.0)]);
                h.push(-lo);
            }
            if hi.is_finite() {
                g.push(vec![(j, 1.0)]);
                h.push(hi);
            }
        }
        let n_lin = g.len();
        let mut soc_dims = Vec::new();
        for c in p.soc_constraints.iter().filter(|c| !c.lhs.is_empty()) {
            soc_dims.push(c.lhs.len() + 1);
            g.push(neg(&c.rhs));
            h.push(c.rhs.constant);
            for e in &c.lhs {
                g.push(neg(e));
                h.push(e.constant);
            }
        }
        StandardForm { n: p.n_vars, c: p.objective.clone(), a, b, g, h, n_lin, soc_dims }
    }

    fn m(&self) -> usize {
        self.g.len()
    }

    fn p(&self) -> usize {
        self.a.len()
    }

    fn degree(&self) -> usize {
        self.n_lin + self.soc_dims.len()
    }

    /// Start offsets of the cone blocks.
    fn soc_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut at = self.n_lin;
        self.soc_dims
            .iter()
            .map(|&d| {
                let r = at..at + d;
                at += d;
                r
            })
            .collect()
    }
}

fn mul_rows(rows: &[SparseRow], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().map(|&(j, a)| a * x[j]).sum()).collect()
}

fn mul_rows_t(rows: &[SparseRow], y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (r, &yi) in rows.iter().zip(y) {
        for &(j, a) in r {
            out[j] += a * yi;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `sqrt(v0^2 - ||v1||^2)` without cancellation.
fn soc_residual(v: &[f64]) -> f64 {
    let t = norm(&v[1..]);
    ((v[0] - t) * (v[0] + t)).max(f64::MIN_POSITIVE).sqrt()
}

/// Nesterov-Todd scaling of one second-order cone block.
struct SocScaling {
    eta: f64,
    wbar: Vec<f64>,
}

impl SocScaling {
    fn new(s: &[f64], z: &[f64]) -> Self {
        let sres = soc_residual(s);
        let zres = soc_residual(z);
        let sb: Vec<f64> = s.iter().map(|v| v / sres).collect();
        let zb: Vec<f64> = z.iter().map(|v| v / zres).collect();
        let gamma = ((1.0 + dot(&sb, &zb)) / 2.0).sqrt();
        let mut wbar = vec![(sb[0] + zb[0]) / (2.0 * gamma)];
        wbar.extend(sb[1..].iter().zip(&zb[1..]).map(|(a, b)| (a - b) / (2.0 * gamma)));
        SocScaling { eta: (sres / zres).sqrt(), wbar }
    }

    /// `W v` (or `W^{-1} v` with `inverse`).
    fn apply(&self, v: &[f64], inverse: bool) -> Vec<f64> {
        let (w0, w1) = (self.wbar[0], &self.wbar[1..]);
        let (sign, scale) = if inverse { (-1.0, 1.0 / self.eta) } else { (1.0, self.eta) };
        let w1v1 = dot(w1, &v[1..]);
        let mut out = Vec::with_capacity(v.len());
        out.push(scale * (w0 * v[0] + sign * w1v1));
        let coef = sign * v[0] + w1v1 / (1.0 + w0);
        out.extend(v[1..].iter().zip(w1).map(|(vi, wi)| scale * (vi + coef * wi)));
        out
    }

    /// Dense `W^{-2}`.
    fn inv_sq(&self) -> DMatrix<f64> {
        let d = self.wbar.len();
        let mut winv = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for k in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[k] = 1.0;
            let col = self.apply(&e, true);
            winv.column_mut(k).copy_from_slice(&col);
        }
        &winv * &winv
    }
}

struct Scaling {
    /// `sqrt(s / z)` for the orthant rows.
    lin: Vec<f64>,
    soc: Vec<SocScaling>,
}

struct Cones<'a> {
    n_lin: usize,
    ranges: &'a [std::ops::Range<usize>],
}

impl Cones<'_> {
    fn scaling(&self, s: &[f64], z: &[f64]) -> Scaling {
        Scaling {
            lin: (0..self.n_lin).map(|i| (s[i] / z[i]).sqrt()).collect(),
            soc: self.ranges.iter().map(|r| SocScaling::new(&s[r.clone()], &z[r.clone()])).collect(),
        }
    }

    fn apply(&self, w: &Scaling, v: &[f64], inverse: bool) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n_lin).map(|i| if inverse { v[i] / w.lin[i] } else { v[i] * w.lin[i] }).collect();
        for (r, sc) in self.ranges.iter().zip(&w.soc) {
            out.extend(sc.apply(&v[r.clone()], inverse));
        }
        out
    }

    /// Jordan product `u o v`.
    fn product(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n_lin).map(|i| u[i] * v[i]).collect();
        for r in self.ranges {
            let (u, v) = (&u[r.clone()], &v[r.clone()]);
            out.push(dot(u, v));
            out.extend(u[1..].iter().zip(&v[1..]).map(|(ui, vi)| u[0] * vi + v[0] * ui));
        }
        out
    }

    /// Solves `u o x = v` for `x`.
    fn divide(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n_lin).map(|i| v[i] / u[i]).collect();
        for r in self.ranges {
            let (u, v) = (&u[r.clone()], &v[r.clone()]);
            let t = norm(&u[1..]);
            let det = (u[0] - t) * (u[0] + t);
            let x0 = (u[0] * v[0] - dot(&u[1..], &v[1..])) / det;
            out.push(x0);
            out.extend(u[1..].iter().zip(&v[1..]).map(|(ui, vi)| (vi - x0 * ui) / u[0]));
        }
        out
    }

    fn add_identity(&self, v: &mut [f64], alpha: f64) {
        v[..self.n_lin].iter_mut().for_each(|x| *x += alpha);
        for r in self.ranges {
            v[r.start] += alpha;
        }
    }

    /// Smallest `alpha` with `v + alpha e` in the cone (negative if `v` is interior).
    fn interior_shift(&self, v: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for x in &v[..self.n_lin] {
            worst = worst.max(-x);
        }
        for r in self.ranges {
            let b = &v[r.clone()];
            worst = worst.max(norm(&b[1..]) - b[0]);
        }
        worst
    }

    /// Largest step `alpha` such that `x + alpha d` stays in the cone.
    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.n_lin {
            if d[i] < 0.0 {
                alpha = alpha.min(-x[i] / d[i]);
            }
        }
        for r in self.ranges {
            let (x, d) = (&x[r.clone()], &d[r.clone()]);
            if d[0] < 0.0 {
                alpha = alpha.min(-x[0] / d[0]);
            }
            let qa = d[0] * d[0] - dot(&d[1..], &d[1..]);
            let qb = 2.0 * (x[0] * d[0] - dot(&x[1..], &d[1..]));
            let qc = (x[0] * x[0] - dot(&x[1..], &x[1..])).max(0.0);
            for root in quadratic_roots(qa, qb, qc) {
                if root > 0.0 {
                    alpha = alpha.min(root);
                }
            }
        }
        alpha
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Factorization of the reduced Newton system
/// `[G' W^-2 G, A'; A, 0] [dx; dy] = [r1; r2]`.
struct Reduced<'a> {
    sf: &'a StandardForm,
    cones: &'a Cones<'a>,
    w: &'a Scaling,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> Reduced<'a> {
    fn new(sf: &'a StandardForm, cones: &'a Cones<'a>, w: &'a Scaling) -> Option<Self> {
        let (n, p) = (sf.n, sf.p());
        let mut mat = DMatrix::<f64>::zeros(n + p, n + p);
        for i in 0..sf.n_lin {
            let wi = 1.0 / (w.lin[i] * w.lin[i]);
            for &(j, a) in &sf.g[i] {
                for &(k, b) in &sf.g[i] {
                    mat[(j, k)] += wi * a * b;
                }
            }
        }
        for (r, sc) in cones.ranges.iter().zip(&w.soc) {
            let blk = sc.inv_sq();
            for (bi, gi) in r.clone().enumerate() {
                for (bk, gk) in r.clone().enumerate() {
                    let v = blk[(bi, bk)];
                    for &(j, a) in &sf.g[gi] {
                        for &(k, b) in &sf.g[gk] {
                            mat[(j, k)] += v * a * b;
                        }
                    }
                }
            }
        }
        for (i, row) in sf.a.iter().enumerate() {
            for &(j, a) in row {
                mat[(n + i, j)] += a;
                mat[(j, n + i)] += a;
            }
        }
        let maxdiag = (0..n).map(|j| mat[(j, j)].abs()).fold(1.0, f64::max);
        let delta = 1e-13 * maxdiag + 1e-11;
        let mut reg = mat;
        for j in 0..n {
            reg[(j, j)] += delta;
        }
        for i in 0..p {
            reg[(n + i, n + i)] -= delta;
        }
        let lu = reg.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Reduced { sf, cones, w, lu })
    }

    fn solve_once(&self, r1: &[f64], r2: &[f64], r3: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n, p) = (self.sf.n, self.sf.p());
        let t = self.w_inv_sq(r3);
        let gt = mul_rows_t(&self.sf.g, &t, n);
        let mut rhs = DVector::zeros(n + p);
        for j in 0..n {
            rhs[j] = r1[j] + gt[j];
        }
        for i in 0..p {
            rhs[n + i] = r2[i];
        }
        let sol = self.lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(n + p));
        let dx: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let dy: Vec<f64> = sol.rows(n, p).iter().copied().collect();
        let gdx = mul_rows(&self.sf.g, &dx);
        let diff: Vec<f64> = gdx.iter().zip(r3).map(|(a, b)| a - b).collect();
        (dx, dy, self.w_inv_sq(&diff))
    }

    fn w_inv_sq(&self, v: &[f64]) -> Vec<f64> {
        self.cones.apply(self.w, &self.cones.apply(self.w, v, true), true)
    }

    /// Solves `[0 A' G'; A 0 0; G 0 -W^2] [dx; dy; dz] = [r1; r2; r3]`,
    /// refining against the unreduced system.
    fn solve(&self, r1: &[f64], r2: &[f64], r3: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.sf.n;
        let (mut dx, mut dy, mut dz) = self.solve_once(r1, r2, r3);
        let scale = norm_inf(r1).max(norm_inf(r2)).max(norm_inf(r3)).max(1e-300);
        for _ in 0..4 {
            let aty = mul_rows_t(&self.sf.a, &dy, n);
            let gtz = mul_rows_t(&self.sf.g, &dz, n);
            let e1: Vec<f64> = (0..n).map(|j| r1[j] - aty[j] - gtz[j]).collect();
            let ax = mul_rows(&self.sf.a, &dx);
            let e2: Vec<f64> = r2.iter().zip(&ax).map(|(r, a)| r - a).collect();
            let gx = mul_rows(&self.sf.g, &dx);
            let w2z = self.cones.apply(self.w, &self.cones.apply(self.w, &dz, false), false);
            let e3: Vec<f64> = (0..r3.len()).map(|i| r3[i] - gx[i] + w2z[i]).collect();
            let err = norm_inf(&e1).max(norm_inf(&e2)).max(norm_inf(&e3));
            if err <= 1e-14 * scale {
                break;
            }
            let (cx, cy, cz) = self.solve_once(&e1, &e2, &e3);
            dx.iter_mut().zip(&cx).for_each(|(a, b)| *a += b);
            dy.iter_mut().zip(&cy).for_each(|(a, b)| *a += b);
            dz.iter_mut().zip(&cz).for_each(|(a, b)| *a += b);
        }
        (dx, dy, dz)
    }
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Best {
    merit: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    pres: f64,
    dres: f64,
    gap: f64,
}

/// Solves `p` to relative accuracy `tol` within `max_iter` Newton steps.
///
/// Panics if `p` references unknown variables or if `tol` or `max_iter` are
/// out of range.
pub fn solve(p: &ConeProgram, tol: f64, max_iter: usize) -> SolveResult {
    assert!(tol > 0.0 && tol <= 1e-2, "tolerance must lie in (0, 1e-2]");
    assert!(max_iter >= 1);
    if let Err(e) = p.validate() {
        panic!("malformed cone program: {e}");
    }
    let sf = StandardForm::from_program(p);
    let ranges = sf.soc_ranges();
    let cones = Cones { n_lin: sf.n_lin, ranges: &ranges };
    let (n, m, pe) = (sf.n, sf.m(), sf.p());

    let finish = |status, x: Vec<f64>, y, z, it, pres, dres, gap| SolveResult {
        objective_value: p.objective_at(&x),
        status,
        x,
        y,
        z,
        iterations: it,
        primal_residual: pres,
        dual_residual: dres,
        gap,
    };

    // Starting point from two least-squares problems with identity scaling.
    let ident = Scaling {
        lin: vec![1.0; sf.n_lin],
        soc: ranges
            .iter()
            .map(|r| {
                let mut wbar = vec![0.0; r.len()];
                wbar[0] = 1.0;
                SocScaling { eta: 1.0, wbar }
            })
            .collect(),
    };
    let Some(kkt0) = Reduced::new(&sf, &cones, &ident) else {
        return finish(SolveStatus::MaxIter, vec![0.0; n], vec![0.0; pe], vec![0.0; m], 0, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    };
    let (x0, _, zp) = kkt0.solve(&vec![0.0; n], &sf.b, &sf.h);
    let mut s0: Vec<f64> = zp.iter().map(|v| -v).collect();
    let shift = cones.interior_shift(&s0);
    if shift >= 0.0 {
        cones.add_identity(&mut s0, 1.0 + shift);
    }
    let neg_c: Vec<f64> = sf.c.iter().map(|v| -v).collect();
    let (_, y0, mut z0) = kkt0.solve(&neg_c, &vec![0.0; pe], &vec![0.0; m]);
    let shift = cones.interior_shift(&z0);
    if shift >= 0.0 {
        cones.add_identity(&mut z0, 1.0 + shift);
    }
    drop(kkt0);
    let mut it = Iterate { x: x0, y: y0, z: z0, s: s0, tau: 1.0, kappa: 1.0 };

    let bnorm = norm(&sf.b).max(1.0);
    let hnorm = norm(&sf.h).max(1.0);
    let cnorm = norm(&sf.c).max(1.0);
    let degree = sf.degree() as f64;
    let mut best: Option<Best> = None;

    for iter in 0..=max_iter {
        let ax = mul_rows(&sf.a, &it.x);
        let gx = mul_rows(&sf.g, &it.x);
        let aty = mul_rows_t(&sf.a, &it.y, n);
        let gtz = mul_rows_t(&sf.g, &it.z, n);
        let (cx, by, hz) = (dot(&sf.c, &it.x), dot(&sf.b, &it.y), dot(&sf.h, &it.z));

        // residuals of the embedding
        let r1: Vec<f64> = (0..n).map(|j| aty[j] + gtz[j] + sf.c[j] * it.tau).collect();
        let r2: Vec<f64> = (0..pe).map(|i| -ax[i] + sf.b[i] * it.tau).collect();
        let r3: Vec<f64> = (0..m).map(|i| -gx[i] + sf.h[i] * it.tau - it.s[i]).collect();
        let r4 = -cx - by - hz - it.kappa;

        // convergence tests on the de-homogenized point
        let tau = it.tau;
        let pres_eq = norm(&r2) / tau / bnorm;
        let pres_cone = norm(&r3) / tau / hnorm;
        let pres = pres_eq.max(pres_cone);
        let dres = norm(&r1) / tau / cnorm;
        let pcost = cx / tau;
        let dcost = -(by + hz) / tau;
        let gap_abs = dot(&it.s, &it.z) / (tau * tau);
        let relgap = gap_abs / pcost.abs().min(dcost.abs()).max(1.0);
        let merit = pres.max(dres).max(relgap);
        log::trace!("{iter:3} pres {pres:.2e} dres {dres:.2e} gap {relgap:.2e} tau {:.2e} kappa {:.2e}", it.tau, it.kappa);
        if merit.is_finite() && best.as_ref().is_none_or(|b| merit < b.merit) {
            best = Some(Best {
                merit,
                x: it.x.iter().map(|v| v / tau).collect(),
                y: it.y.iter().map(|v| v / tau).collect(),
                z: it.z.iter().map(|v| v / tau).collect(),
                pres,
                dres,
                gap: relgap,
            });
        }
        if pres <= tol && dres <= tol && relgap <= tol {
            let b = best.take().unwrap();
            return finish(SolveStatus::Optimal, b.x, b.y, b.z, iter, b.pres, b.dres, b.gap);
        }
        if it.kappa > it.tau {
            // certificates
            let bh = by + hz;
            if bh < 0.0 && norm(&(0..n).map(|j| aty[j] + gtz[j]).collect::<Vec<_>>()) / -bh <= tol {
                let scale = -bh;
                let y = it.y.iter().map(|v| v / scale).collect();
                let z = it.z.iter().map(|v| v / scale).collect();
                return finish(SolveStatus::Infeasible, vec![f64::NAN; n], y, z, iter, pres, dres, relgap);
            }
            if cx < 0.0 {
                let prim = norm(&ax).max(norm(&(0..m).map(|i| gx[i] + it.s[i]).collect::<Vec<_>>()));
                if prim / -cx <= tol {
                    let x = it.x.iter().map(|v| v / -cx).collect();
                    return finish(SolveStatus::Unbounded, x, vec![0.0; pe], vec![0.0; m], iter, pres, dres, relgap);
                }
            }
        }
        if iter == max_iter {
            break;
        }

        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (degree + 1.0);
        let w = cones.scaling(&it.s, &it.z);
        let lambda = cones.apply(&w, &it.z, false);
        let Some(kkt) = Reduced::new(&sf, &cones, &w) else { break };

        let neg_c: Vec<f64> = sf.c.iter().map(|v| -v).collect();
        let (x2, y2, z2) = kkt.solve(&neg_c, &sf.b, &sf.h);
        let cbh2 = dot(&sf.c, &x2) + dot(&sf.b, &y2) + dot(&sf.h, &z2);

        // one Newton direction for a given complementarity target
        let direction = |eta: f64, ds: &[f64], dkappa: f64| {
            let lds = cones.divide(&lambda, ds);
            let wlds = cones.apply(&w, &lds, false);
            let rx: Vec<f64> = r1.iter().map(|v| -eta * v).collect();
            let ry: Vec<f64> = r2.iter().map(|v| eta * v).collect();
            let rz: Vec<f64> = (0..m).map(|i| eta * r3[i] - wlds[i]).collect();
            let (x1, y1, z1) = kkt.solve(&rx, &ry, &rz);
            let cbh1 = dot(&sf.c, &x1) + dot(&sf.b, &y1) + dot(&sf.h, &z1);
            let dtau = (dkappa + it.tau * (-eta * r4 + cbh1)) / (it.kappa - it.tau * cbh2);
            let dx: Vec<f64> = (0..n).map(|j| x1[j] + dtau * x2[j]).collect();
            let dy: Vec<f64> = (0..pe).map(|i| y1[i] + dtau * y2[i]).collect();
            let dz: Vec<f64> = (0..m).map(|i| z1[i] + dtau * z2[i]).collect();
            let wdz = cones.apply(&w, &dz, false);
            let ds_: Vec<f64> = cones.apply(&w, &(0..m).map(|i| lds[i] - wdz[i]).collect::<Vec<_>>(), false);
            let dkap = (dkappa - it.kappa * dtau) / it.tau;
            (dx, dy, dz, ds_, dtau, dkap)
        };
        let step_to_boundary = |dz: &[f64], ds: &[f64], dtau: f64, dkap: f64| {
            let mut a = cones.max_step(&it.s, ds).min(cones.max_step(&it.z, dz));
            if dtau < 0.0 {
                a = a.min(-it.tau / dtau);
            }
            if dkap < 0.0 {
                a = a.min(-it.kappa / dkap);
            }
            a
        };

        // predictor
        let ll = cones.product(&lambda, &lambda);
        let ds_aff: Vec<f64> = ll.iter().map(|v| -v).collect();
        let (_, _, dz_a, ds_a, dtau_a, dkap_a) = direction(1.0, &ds_aff, -it.tau * it.kappa);
        let alpha_aff = step_to_boundary(&dz_a, &ds_a, dtau_a, dkap_a).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // corrector
        let corr = cones.product(&cones.apply(&w, &ds_a, true), &cones.apply(&w, &dz_a, false));
        let mut ds_c: Vec<f64> = (0..m).map(|i| -ll[i] - corr[i]).collect();
        cones.add_identity(&mut ds_c, sigma * mu);
        let dk_c = -it.tau * it.kappa - dtau_a * dkap_a + sigma * mu;
        let (dx, dy, dz, ds, dtau, dkap) = direction(1.0 - sigma, &ds_c, dk_c);
        let alpha = (0.99 * step_to_boundary(&dz, &ds, dtau, dkap)).min(1.0);
        if !(alpha > 1e-12) || !alpha.is_finite() {
            break;
        }
        for j in 0..n {
            it.x[j] += alpha * dx[j];
        }
        for i in 0..pe {
            it.y[i] += alpha * dy[i];
        }
        for i in 0..m {
            it.z[i] += alpha * dz[i];
            it.s[i] += alpha * ds[i];
        }
        it.tau += alpha * dtau;
        it.kappa += alpha * dkap;
        if !(it.tau > 0.0 && it.kappa > 0.0) || it.x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    let loose = 0.1 * tol.sqrt();
    match best {
        Some(b) if b.merit <= loose => finish(SolveStatus::Inaccurate, b.x, b.y, b.z, max_iter, b.pres, b.dres, b.gap),
        Some(b) => finish(SolveStatus::MaxIter, b.x, b.y, b.z, max_iter, b.pres, b.dres, b.gap),
        None => finish(SolveStatus::MaxIter, vec![0.0; n], vec![0.0; pe], vec![0.0; m], max_iter, f64::INFINITY, f64::INFINITY, f64::INFINITY),
    }
}

/// [`solve`] with the default tolerance and iteration cap.
pub fn solve_default(p: &ConeProgram) -> SolveResult {
    solve(p, DEFAULT_TOL, DEFAULT_MAX_ITER)
}
