//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if a criterion fails that is not listed in `KNOWN_RED`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{admm_reference, base, fd_hessian, fd_jacobian, free_position, max_violation, random_model, random_socp, sym_eigen};
use irsplan::baselines::{lower_bound, max_rate_trajectory, MaxRateConfig};
use irsplan::channel::{optimal_beamforming, optimal_snr_closed_form, sample_channel_with, ChannelSample};
use irsplan::graphinit::initial_pair;
use irsplan::radiomap::{fit_model, generate_map, RadioMap, SnrModel};
use irsplan::rmap::{model_rate, obstacle_linearization, plan, rate_gradient, rate_hessian, Linearization, RmapConfig, RmapTrace};
use irsplan::scenario::{Point, Scenario};
use irsplan::socp::{self, SolveStatus};

/// Criteria expected to fail at desk scale; see the decisions ledger.
const KNOWN_RED: &[usize] = &[9];

/// Desk-scale radio map.
const NX: usize = 50;
const NY: usize = 30;
const SAMPLES: u64 = 200;
const MAP_SEED: u64 = 7;

const GBPS: f64 = 1e9;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: usize, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

/// Everything criterion 6 needs from one planning run.
struct RunLog {
    label: String,
    trace: RmapTrace,
    r_min: f64,
    initial_rate: f64,
    final_rate: f64,
}

fn log_plan(runs: &mut Vec<RunLog>, label: String, p: &irsplan::rmap::Plan, r_min: f64) {
    runs.push(RunLog {
        label,
        trace: p.trace.clone(),
        r_min,
        initial_rate: p.initial.avg_rate_map,
        final_rate: p.trajectory.avg_rate_map,
    });
}

struct Instance {
    s: Scenario,
    map: RadioMap,
    model: SnrModel,
}

fn instance(mut s: Scenario, m_irs: usize) -> Instance {
    s.radio.m_irs = m_irs;
    let map = generate_map(&s, NX, NY, SAMPLES, MAP_SEED).unwrap();
    let model = fit_model(&map, &s).unwrap();
    Instance { s, map, model }
}

fn with_k(s: &Scenario, k: usize) -> Scenario {
    let mut s = s.clone();
    s.k = k;
    s.validate().unwrap();
    s
}

fn random_sizes(rng: &mut impl Rng, s: &Scenario, n_max: usize, m_max: usize) -> Scenario {
    let mut s = s.clone();
    s.radio.n_ap = rng.random_range(1..=n_max);
    s.radio.m_irs = rng.random_range(0..=m_max);
    s
}

fn random_channel(rng: &mut impl Rng, s: &Scenario) -> ChannelSample {
    let q = free_position(rng, s);
    let (los_ap, los_irs) = (rng.random_bool(0.5), rng.random_bool(0.5));
    sample_channel_with(s, &q, los_ap, los_irs, rng)
}

/// Exhaustive search over the reflected sum. With a rank-one IRS-AP
/// channel the effective channel is `conj(h_d) + beta z`, where `z` ranges
/// over `{sum_m u_m e^{j theta_m}}`: the annulus `r_lo <= |z| <= sum |u_m|`.
/// Its phase is scanned at 1e-3 rad and its modulus at 64 levels; the
/// combiner is the matched filter.
fn grid_optimum(c: &ChannelSample) -> f64 {
    let (m, n) = (c.m_irs(), c.n_ap());
    let hd: Vec<Complex64> = c.h_d.iter().map(|h| h.conj()).collect();
    if m == 0 {
        return hd.iter().map(|v| v.norm_sqr()).sum::<f64>() * c.snr_scale;
    }
    let beta: Vec<Complex64> = (0..n).map(|j| c.g[(0, j)] / c.g[(0, 0)]).collect();
    for i in 0..m {
        for j in 0..n {
            assert!((c.g[(i, j)] - c.g[(i, 0)] * beta[j]).norm() <= 1e-12 * c.g[(i, j)].norm().max(1e-300));
        }
    }
    let u: Vec<f64> = (0..m).map(|i| (c.h_r[i].conj() * c.g[(i, 0)]).norm()).collect();
    let r_hi: f64 = u.iter().sum();
    let r_lo = (2.0 * u.iter().copied().fold(0.0, f64::max) - r_hi).max(0.0);
    let steps = (TAU / 1e-3).ceil() as usize;
    let mut best: f64 = 0.0;
    for a in 0..steps {
        let dir = Complex64::from_polar(1.0, a as f64 * 1e-3);
        for l in 0..64 {
            let z = dir * (r_lo + (r_hi - r_lo) * l as f64 / 63.0);
            let p: f64 = hd.iter().zip(&beta).map(|(h, b)| (h + b * z).norm_sqr()).sum();
            best = best.max(p);
        }
    }
    best * c.snr_scale
}

fn c1_beamforming() -> Outcome {
    let t0 = Instant::now();
    let s = base();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let sc = random_sizes(&mut rng, &s, 2, 4);
        let c = random_channel(&mut rng, &sc);
        let closed = optimal_snr_closed_form(&c);
        let grid = grid_optimum(&c);
        worst = worst.min((closed - grid) / grid);
    }
    let el = t0.elapsed();
    outcome(
        1,
        "beamforming optimality",
        worst >= -1e-4 && el < Duration::from_secs(60),
        format!("min (closed - grid)/grid = {worst:.2e} (>= -1e-4), {:.1} s (< 60 s), 1000 channels", el.as_secs_f64()),
    )
}

fn c2_three_term() -> Outcome {
    let s = base();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let sc = random_sizes(&mut rng, &s, 16, 128);
        let c = random_channel(&mut rng, &sc);
        let direct = optimal_beamforming(&c).unwrap().snr;
        let closed = optimal_snr_closed_form(&c);
        worst = worst.max((direct - closed).abs() / closed);
    }
    outcome(2, "three-term SNR consistency", worst < 1e-8, format!("max rel error {worst:.2e} (< 1e-8), 10^4 instances"))
}

fn random_distances(rng: &mut impl Rng) -> (f64, f64) {
    (rng.random_range(2.0..60.0), rng.random_range(4.5..60.0))
}

fn c3_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let scale = 1e10;
    let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let m = random_model(&mut rng);
        let (d_i, d_a) = random_distances(&mut rng);
        let g = rate_gradient(&m, d_i, d_a, 1.0, 1.0 / scale).unwrap();
        let fd = common::fd_gradient(|x, y| common::rate_per_hz(&m, x, y, scale), d_i, d_a, 1e-6 * d_i, 1e-6 * d_a);
        let norm = g.0.hypot(g.1);
        worst_g = worst_g.max((g.0 - fd[0]).hypot(g.1 - fd[1]) / norm);
        let h = rate_hessian(&m, d_i, d_a, 1.0, 1.0 / scale).unwrap();
        let hfd = fd_jacobian(
            |x, y| {
                let g = rate_gradient(&m, x, y, 1.0, 1.0 / scale).unwrap();
                [g.0, g.1]
            },
            d_i,
            d_a,
            1e-6 * d_i,
            1e-6 * d_a,
        );
        worst_h = worst_h.max((h - hfd).norm() / h.norm());
    }
    outcome(
        3,
        "gradient correctness",
        worst_g <= 1e-5 && worst_h <= 1e-5,
        format!("max rel error gradient {worst_g:.2e}, second derivatives {worst_h:.2e} (<= 1e-5), 200 draws"),
    )
}

fn c4_curvature() -> Outcome {
    let s = base();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let scale = 1e10;
    let (mut psd, mut nsd, mut worst_cf): (f64, f64, f64) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for _ in 0..200 {
        let m = random_model(&mut rng);
        let (d_i, d_a) = random_distances(&mut rng);
        let h = fd_hessian(|x, y| common::rate_per_hz(&m, x, y, scale), d_i, d_a, 1e-3 * d_i, 1e-3 * d_a);
        let ev = sym_eigen(&h);
        psd = psd.min(ev[0] / ev[0].abs().max(ev[1].abs()));

        let q0 = free_position(&mut rng, &s);
        let lin = Linearization::at(&m, &s, &q0);
        let q = q0 + Point::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let f = |x: f64, y: f64| {
            let p = Point::new(x, y);
            lin.g_i * (s.dist_irs(&p) - lin.d_i0) + lin.g_a * (s.dist_ap(&p) - lin.d_a0)
        };
        let hq = fd_hessian(f, q.x, q.y, 1e-3, 1e-3);
        let evq = sym_eigen(&hq);
        let sc = evq[0].abs().max(evq[1].abs());
        if sc > 0.0 {
            nsd = nsd.max(evq[1] / sc);
        }
        let closed = lin.hessian_xy(&s, &q);
        if closed.norm() > 0.0 {
            worst_cf = worst_cf.max((closed - hq).norm() / closed.norm());
        }
    }
    outcome(
        4,
        "curvature signs",
        psd >= -1e-6 && nsd <= 1e-6 && worst_cf <= 1e-5,
        format!(
            "min eig/scale of rate Hessian {psd:.2e} (>= -1e-6), max eig/scale of surrogate Hessian {nsd:.2e} (<= 1e-6), \
             closed-form surrogate Hessian rel error {worst_cf:.2e} (<= 1e-5), 200 draws each"
        ),
    )
}

fn c5_surrogates() -> Outcome {
    let s = base();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut rate_excess = f64::NEG_INFINITY;
    let m = random_model(&mut rng);
    for i in 0..10_000 {
        let m = if i % 100 == 0 { random_model(&mut rng) } else { m };
        let q0 = free_position(&mut rng, &s);
        let t = rng.random_range(0.1..3.0);
        let q = q0 + Point::new(rng.random_range(-t..t), rng.random_range(-t..t));
        let sur = Linearization::at(&m, &s, &q0).eval(&s, &q);
        let model = model_rate(&m, &s, &q);
        rate_excess = rate_excess.max((sur - model) / model.max(1.0));
    }
    let mut ob_excess = f64::NEG_INFINITY;
    for i in 0..10_000 {
        let o = &s.obstacles[i % s.obstacles.len()];
        let q0 = Point::new(rng.random_range(0.0..50.0), rng.random_range(0.0..30.0));
        let q = Point::new(rng.random_range(0.0..50.0), rng.random_range(0.0..30.0));
        let lhs = o.quad_form(&q);
        ob_excess = ob_excess.max((obstacle_linearization(o, &q0, &q) - lhs) / lhs.max(1.0));
    }
    outcome(
        5,
        "surrogate soundness",
        rate_excess <= 1e-12 && ob_excess <= 1e-12,
        format!("max (surrogate - model)/model {rate_excess:.2e}, max (cut - quadratic) {ob_excess:.2e} (<= 1e-12), 10^4 points each"),
    )
}

fn c6_monotone(runs: &[RunLog]) -> Outcome {
    let mut bad = Vec::new();
    let mut steps = 0;
    for r in runs {
        let e = r.trace.accepted_energies();
        steps += e.len() - 1;
        if e.windows(2).any(|w| w[1] > w[0] + 1e-9) {
            bad.push(format!("{} energy", r.label));
        }
        if r.initial_rate >= r.r_min && r.final_rate < r.r_min {
            bad.push(format!("{} rate", r.label));
        }
    }
    outcome(
        6,
        "monotone energy, rate kept",
        bad.is_empty() && !runs.is_empty(),
        format!("{} runs, {steps} accepted steps, violations: {}", runs.len(), if bad.is_empty() { "none".into() } else { bad.join(", ") }),
    )
}

fn c7_bound() -> Outcome {
    let s = base();
    let len = (s.q_d - s.q_s).norm();
    let k = s.k as f64;
    let m = &s.motion;
    let closed = m.c1 * len * len / (k * s.delta_t) + m.c2 * len + k * m.c3 * s.delta_t;
    let (lb, _) = lower_bound(&s, socp::DEFAULT_TOL, socp::DEFAULT_MAX_ITER).unwrap();
    let rel = (lb - closed).abs() / closed;
    outcome(
        7,
        "lower-bound regression",
        rel <= 5e-3 && (closed - 1349.04).abs() < 0.01,
        format!("solver {lb:.3} J vs closed form {closed:.3} J, rel {rel:.1e} (<= 5e-3)"),
    )
}

fn c8_unconstrained(runs: &mut Vec<RunLog>) -> Outcome {
    let mut open = base();
    open.obstacles.clear();
    let inst = instance(open, 64);
    let (lb, _) = lower_bound(&inst.s, socp::DEFAULT_TOL, socp::DEFAULT_MAX_ITER).unwrap();
    let mut detail = Vec::new();
    let mut pass = false;
    for eps in [1e-3, 1e-2] {
        let cfg = RmapConfig { r_min: 0.0, epsilon: eps, ..RmapConfig::default() };
        let p = plan(&inst.s, &inst.model, &inst.map, &cfg).unwrap();
        let gap = (p.trajectory.energy_j - lb) / lb;
        let it = p.trace.iterations();
        if eps == 1e-3 {
            pass = gap <= 0.01 && it <= 10 && p.trace.stop == irsplan::rmap::StopReason::Converged;
        }
        detail.push(format!("eps {eps:e}: {:.1} J, {:.2}% above bound, {it} iterations ({})", p.trajectory.energy_j, 100.0 * gap, p.trace.stop));
        log_plan(runs, format!("open eps {eps:e}"), &p, 0.0);
    }
    outcome(8, "unconstrained RMAP", pass, format!("bound {lb:.1} J; {} (within 1%, <= 10 iterations at eps 1e-3)", detail.join("; ")))
}

struct Trends {
    e0_30: f64,
    e64_30: f64,
    e64_40: f64,
    maxrate_40: f64,
    maxrate_rate: f64,
}

fn c9_trends(b0: &Instance, b64: &Instance, runs: &mut Vec<RunLog>) -> Trends {
    let r = 2.0 * GBPS;
    let cfg = RmapConfig { r_min: r, ..RmapConfig::default() };
    let mut energy = |inst: &Instance, k: usize, label: &str| {
        let s = with_k(&inst.s, k);
        let p = plan(&s, &inst.model, &inst.map, &cfg).unwrap();
        log_plan(runs, label.to_string(), &p, r);
        p.trajectory.energy_j
    };
    let e0_30 = energy(b0, 30, "M=0 K=30 r=2.0");
    let e64_30 = energy(b64, 30, "M=64 K=30 r=2.0");
    let e64_40 = energy(b64, 40, "M=64 K=40 r=2.0");
    let s40 = with_k(&b64.s, 40);
    let (_, mr) = initial_pair(&s40, &b64.map).unwrap();
    let mx = max_rate_trajectory(&s40, &b64.model, &b64.map, &mr, &MaxRateConfig::default()).unwrap();
    Trends { e0_30, e64_30, e64_40, maxrate_40: mx.trajectory.energy_j, maxrate_rate: mx.trajectory.avg_rate_map }
}

fn c10_tau(b64: &Instance, runs: &mut Vec<RunLog>) -> Outcome {
    let r = 2.5 * GBPS;
    let mut res = BTreeMap::new();
    for (key, tau) in [("0", 0.0), ("0.75", 0.75)] {
        let cfg = RmapConfig { r_min: r, tau, ..RmapConfig::default() };
        let p = plan(&b64.s, &b64.model, &b64.map, &cfg).unwrap();
        let rejected = p.trace.records.iter().skip(1).filter(|x| !x.accepted).count();
        res.insert(key, (p.trace.iterations(), p.trajectory.energy_j, rejected, p.choice));
        log_plan(runs, format!("M=64 K=30 r=2.5 tau={tau}"), &p, r);
    }
    let (i0, e0, rej0, init) = res["0"];
    let (i75, e75, rej75, _) = res["0.75"];
    outcome(
        10,
        "tau trade-off",
        i0 <= i75 && e0 <= 1.05 * e75,
        format!(
            "{init} start; tau=0: {i0} iterations, {e0:.1} J, {rej0} rejected; tau=0.75: {i75} iterations, {e75:.1} J, {rej75} rejected"
        ),
    )
}

fn c11_socp() -> Outcome {
    let mut worst_obj: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    let mut worst_feas: f64 = 0.0;
    let mut not_optimal = 0;
    for seed in 0..100u64 {
        let inst = random_socp(10_000 + seed, 20, 12, 3);
        let r = socp::solve(&inst.program, 1e-8, socp::DEFAULT_MAX_ITER);
        if r.status != SolveStatus::Optimal {
            not_optimal += 1;
            continue;
        }
        worst_kkt = worst_kkt.max(r.primal_residual).max(r.dual_residual).max(r.gap);
        worst_feas = worst_feas.max(max_violation(&inst.program, &r.x));
        let (_, obj_ref) = admm_reference(&inst.program, 1e-9, 400_000);
        worst_obj = worst_obj.max((r.objective_value - obj_ref).abs() / obj_ref.abs().max(1.0));
    }
    outcome(
        11,
        "SOCP solver",
        not_optimal == 0 && worst_obj <= 1e-4 && worst_kkt <= 1e-8,
        format!(
            "100 instances, {not_optimal} not optimal, max rel objective gap to first-order reference {worst_obj:.1e} (<= 1e-4), \
             max KKT residual {worst_kkt:.1e} (<= 1e-8), max violation {worst_feas:.1e}"
        ),
    )
}

fn collect_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, out);
        } else {
            out.push(p);
        }
    }
}

fn c12_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_irsplan");
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/base.toml");
    let sc = scenario.to_str().unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["radiomap", "generate", "--scenario", sc, "--nx", "25", "--ny", "15", "--samples", "20", "--seed", "5", "--out", "map.bin", "--csv", "map.csv"],
        vec!["radiomap", "fit", "--scenario", sc, "--map", "map.bin", "--out", "model.toml"],
        vec!["plan", "--scenario", sc, "--map", "map.bin", "--model", "model.toml", "--rmin", "2e9", "--out-dir", "plan"],
        vec!["baseline", "--scenario", sc, "--map", "map.bin", "--model", "model.toml", "--K", "40", "--out-dir", "baseline"],
        vec!["bound", "--scenario", sc, "--out", "bound.csv"],
        vec![
            "sweep", "--scenario", sc, "--M", "0,16", "--K", "30,40", "--rmin", "1.5e9,2e9", "--seeds", "1,2", "--obstacles", "5",
            "--nx", "25", "--ny", "15", "--samples", "10", "--out-dir", "sweep",
        ],
    ];
    let mut failures = Vec::new();
    for rep in ["a", "b"] {
        let dir = tmp.path().join(rep);
        std::fs::create_dir_all(&dir).unwrap();
        for cmd in &commands {
            let out = Command::new(bin).args(cmd).current_dir(&dir).env_remove("IRSPLAN_OUT_DIR").output().unwrap();
            if !out.status.success() {
                failures.push(format!("{} exited {:?}", cmd[0], out.status.code()));
            }
        }
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    collect_files(&tmp.path().join("a"), &mut a);
    collect_files(&tmp.path().join("b"), &mut b);
    let rel = |root: &str, v: &[std::path::PathBuf]| -> Vec<std::path::PathBuf> {
        v.iter().map(|p| p.strip_prefix(tmp.path().join(root)).unwrap().to_path_buf()).collect()
    };
    if rel("a", &a) != rel("b", &b) {
        failures.push("different file sets".into());
    }
    let mut csvs = 0;
    for (pa, pb) in a.iter().zip(&b) {
        if pa.extension().is_some_and(|e| e == "csv") {
            csvs += 1;
        }
        if std::fs::read(pa).unwrap() != std::fs::read(pb).unwrap() {
            failures.push(format!("{} differs", pa.file_name().unwrap().to_string_lossy()));
        }
    }
    outcome(
        12,
        "determinism",
        failures.is_empty() && csvs > 0,
        format!(
            "6 commands run twice, {csvs} CSV files (plus map, model, SVG) compared byte for byte: {}",
            if failures.is_empty() { "identical".into() } else { failures.join(", ") }
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut results = vec![c1_beamforming(), c2_three_term(), c3_gradients(), c4_curvature(), c5_surrogates(), c7_bound()];
    let mut runs = Vec::new();
    results.push(c8_unconstrained(&mut runs));

    let b0 = instance(base(), 0);
    let b64 = instance(base(), 64);
    let tr = c9_trends(&b0, &b64, &mut runs);
    results.push(c10_tau(&b64, &mut runs));

    // extra runs on random layouts for the trace invariants
    for seed in 0..3u64 {
        let (s, map, model) = common::small_instance(seed, 64, 6);
        let (me, mr) = initial_pair(&s, &map).unwrap();
        let r_min = 0.5 * (me.avg_rate_map + mr.avg_rate_map);
        for tau in [0.0, 0.5, 0.75] {
            let p = plan(&s, &model, &map, &RmapConfig { r_min, tau, ..RmapConfig::default() }).unwrap();
            log_plan(&mut runs, format!("random {seed} tau={tau}"), &p, r_min);
        }
    }
    results.push(c6_monotone(&runs));
    results.push(c11_socp());
    results.push(c12_determinism());

    let total = start.elapsed();
    let gap = (tr.maxrate_40 - tr.e64_40) / tr.e64_40;
    let m_trend = tr.e64_30 <= tr.e0_30;
    let k_trend = tr.e64_40 <= tr.e64_30;
    let gap_ok = tr.e64_40 <= tr.maxrate_40 && gap >= 0.3 && tr.maxrate_rate >= 2.0 * GBPS;
    let time_ok = total < Duration::from_secs(15 * 60);
    results.push(outcome(
        9,
        "paper trends at desk scale",
        m_trend && k_trend && gap_ok && time_ok,
        format!(
            "E(M=64) {:.1} <= E(M=0) {:.1}: {}; E(K=40) {:.1} <= E(K=30) {:.1}: {}; K=40 RMAP {:.1} vs max-rate {:.1} J, gap {:.1}% (>= 30%): {}; \
             suite {:.0} s (< 900 s): {}",
            tr.e64_30,
            tr.e0_30,
            yes(m_trend),
            tr.e64_40,
            tr.e64_30,
            yes(k_trend),
            tr.e64_40,
            tr.maxrate_40,
            100.0 * gap,
            yes(gap_ok),
            total.as_secs_f64(),
            yes(time_ok)
        ),
    ));

    results.sort_by_key(|o| o.id);
    let mut unexpected = Vec::new();
    for o in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_RED.contains(&o.id) { " [known]" } else { "" };
        println!("criterion {:>2} {tag}{note} {}: {}", o.id, o.name, o.detail);
        if !o.pass && !KNOWN_RED.contains(&o.id) {
            unexpected.push(o.id);
        }
    }
    let passed = results.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria pass", results.len());
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}
