//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Parameters come from `configs/acceptance-suite.cfg`; the thresholds below
//! are pinned here so that editing the config cannot loosen them. Runs are
//! serialized so the runtime limits measure one experiment at a time.

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use ncflab_core::harness::{Experiment, ExperimentConfig, Outcome};

static SERIAL: Mutex<()> = Mutex::new(());

fn suite() -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance-suite.cfg");
    ExperimentConfig::load(&path).expect("acceptance config")
}

/// Runs experiment `id` from the suite; returns the outcome and seconds.
fn run(id: &str) -> (Experiment, Outcome, f64) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let cfg = suite();
    let (spec, exp) = cfg.validate().unwrap().into_iter().find(|(s, _)| s.id == id).unwrap_or_else(|| panic!("{id} not in suite"));
    let t0 = Instant::now();
    let out = exp.run(spec.seed.unwrap_or(cfg.seed)).unwrap();
    (exp, out, t0.elapsed().as_secs_f64())
}

fn metric(o: &Outcome, name: &str) -> f64 {
    o.get(name).unwrap_or_else(|| panic!("missing metric {name}"))
}

fn check(o: &Outcome, name: &str) -> bool {
    o.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("missing check {name}")).passed
}

fn report(n: u32, ok: bool, detail: String) {
    println!("criterion {n:>2}: {}  {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_quantum_torus_parseval_and_convergence() {
    let (exp, o, secs) = run("qt-riesz");
    let Experiment::QtRiesz(p) = exp else { unreachable!() };
    assert_eq!((p.theta.as_str(), p.seeds, p.spectrum_radius, p.lambda, p.r_start), ("1/5", 20, 10, 0.3, 16.0));
    let parseval = metric(&o, "parseval_residual");
    let routes = metric(&o, "direct_vs_fft_gap");
    let last = metric(&o, "final_error_max");
    let ok = parseval <= 1e-10 && routes <= 1e-10 && check(&o, "error_monotone") && last < 1e-12 && secs < 60.0;
    report(
        1,
        ok,
        format!("parseval {parseval:.2e} ≤ 1e-10, fft route gap {routes:.2e}, monotone {}, final error {last:.2e} < 1e-12, {secs:.1}s < 60s", check(&o, "error_monotone")),
    );
}

#[test]
fn criterion_02_transference_coherence() {
    let (exp, o, secs) = run("transference");
    let Experiment::Transference(p) = exp else { unreachable!() };
    assert_eq!(p.seeds, 10);
    assert_eq!(p.thetas, ["1/3", "1/5", "2/7"]);
    let r = metric(&o, "residual_max");
    report(2, r <= 1e-10 && secs < 60.0, format!("entrywise residual {r:.2e} ≤ 1e-10, {secs:.1}s < 60s"));
}

#[test]
fn criterion_03_kakeya_log_scaling() {
    let (exp, o, secs) = run("kakeya-scaling");
    let Experiment::KakeyaScaling(p) = exp else { unreachable!() };
    assert_eq!((p.n_list.as_slice(), p.grid), (&[8, 16, 32, 64, 128, 256][..], 1024));
    let r2 = metric(&o, "log_fit_r2");
    let spread = metric(&o, "increment_spread");
    let mut ok = r2 >= 0.95 && spread <= 2.0;
    let mut ratios = String::new();
    for n in &p.n_list {
        let r = metric(&o, &format!("ratio[N={n}]"));
        if *n >= 64 {
            ok &= r <= 0.5 * (*n as f64).sqrt();
        }
        ratios.push_str(&format!(" {n}:{r:.3}"));
    }
    report(3, ok, format!("R² {r2:.4} ≥ 0.95, increment spread {spread:.3} ≤ 2, ratios{ratios} (≤ 0.5√N from 64), {secs:.0}s"));
}

#[test]
fn criterion_04_overlap_audit() {
    let (exp, o, secs) = run("overlap");
    let Experiment::Overlap(p) = exp else { unreachable!() };
    assert_eq!((p.k_list.as_slice(), p.samples), (&[22, 24, 26][..], 10_000));
    let top = metric(&o, "max_count");
    let spread = metric(&o, "cross_k_spread");
    let per_k: Vec<String> = p
        .k_list
        .iter()
        .map(|k| format!("k={k}: {} pairs, max {}", metric(&o, &format!("admissible_pairs[k={k}]")), metric(&o, &format!("max_count[k={k}]"))))
        .collect();
    let ok = top <= 100.0 && spread <= 2.0;
    report(4, ok, format!("max count {top} ≤ 100, cross-k spread {spread} ≤ 2 [{}], {secs:.0}s", per_k.join("; ")));
}

#[test]
fn criterion_05_multiplier_sum() {
    let (exp, o, secs) = run("multiplier-sum");
    let Experiment::MultiplierSum(p) = exp else { unreachable!() };
    assert_eq!((p.m_list.as_slice(), p.samples), (&[4, 5, 6, 7, 8, 9, 10][..], 10_000));
    let spread = metric(&o, "cross_m_spread");
    let tail = metric(&o, "max_tail");
    let ok = check(&o, "finite") && spread <= 2.0 && tail < 1e-12 && secs < 300.0;
    report(5, ok, format!("finite sups, cross-m spread {spread:.3} ≤ 2, tail {tail:.1e} < 1e-12, {secs:.0}s < 300s"));
}

#[test]
fn criterion_06_kernel_uniformity() {
    let (exp, o, secs) = run("kernel-l1");
    let Experiment::KernelL1(p) = exp else { unreachable!() };
    assert_eq!(p.k_list, (6..=14).collect::<Vec<u32>>());
    assert_eq!(p.lambdas, vec![[0.1, 0.0], [0.5, 0.0], [0.5, 1.0]]);
    assert_eq!(p.envelope_tol, 1e-3);
    let spread = metric(&o, "l1_spread_max");
    let viol = metric(&o, "envelope_violations");
    report(6, spread <= 2.0 && viol == 0.0 && secs < 600.0, format!("L1 cross-k spread {spread:.3} ≤ 2, envelope violations {viol}, {secs:.0}s < 600s"));
}

#[test]
fn criterion_07_partition_exactness() {
    let (exp, o, secs) = run("partition");
    let Experiment::Partition(p) = exp else { unreachable!() };
    assert_eq!(p.points, 10_000);
    let a = metric(&o, "riesz_residual");
    let b = metric(&o, "piece_residual");
    report(7, a <= 1e-8 && b <= 1e-8, format!("symbol reconstruction {a:.2e}, piece sum {b:.2e} ≤ 1e-8, {secs:.1}s"));
}

#[test]
fn criterion_08_interpolation_constant() {
    let (exp, o, secs) = run("interp");
    let Experiment::Interp(p) = exp else { unreachable!() };
    assert_eq!(p.t_points, 99);
    let c = metric(&o, "constant_error");
    let e = metric(&o, "exponential_error");
    let oracle = metric(&o, "oracle_exponential_error");
    let sym = metric(&o, "symmetry_error");
    let ok = c <= 1e-6 && e <= 1e-6 && oracle <= 1e-6 && sym <= 1e-10 && secs < 60.0;
    report(8, ok, format!("constant {c:.1e}, exponential {e:.1e} (oracle {oracle:.1e}) ≤ 1e-6, symmetry {sym:.1e} ≤ 1e-10, {secs:.1}s"));
}

#[test]
fn criterion_09_inequality_fuzz() {
    let (exp, o, secs) = run("fuzz");
    let Experiment::Fuzz(p) = exp else { unreachable!() };
    assert_eq!((p.trials, p.dims.as_slice()), (10_000, &[2, 3, 4, 8][..]));
    let mut ok = true;
    let mut parts = Vec::new();
    for k in ["convexity", "trace-cs", "holder-sq", "monotone"] {
        assert!(p.kinds.iter().any(|x| x == k));
        let v = metric(&o, &format!("violations[{k}]"));
        ok &= v == 0.0;
        parts.push(format!("{k} {v}"));
    }
    let (lo, hi) = (metric(&o, "khintchine_lower"), metric(&o, "khintchine_upper"));
    ok &= lo.is_finite() && hi.is_finite() && lo > 0.0;
    report(9, ok, format!("violations: {}; Khintchine ratios [{lo:.3}, {hi:.3}], {secs:.0}s", parts.join(", ")));
}

#[test]
fn criterion_10_plancherel() {
    let (exp, o, secs) = run("plancherel");
    let Experiment::Plancherel(p) = exp else { unreachable!() };
    assert_eq!((p.grids.iter().max(), p.n), (Some(&256), 4));
    let (u, r, pair) = (metric(&o, "unitarity"), metric(&o, "round_trip"), metric(&o, "pairing"));
    report(10, u <= 1e-10 && r <= 1e-10 && pair <= 1e-10, format!("unitarity {u:.1e}, round trip {r:.1e}, pairing {pair:.1e} ≤ 1e-10, {secs:.1}s"));
}

#[test]
fn criterion_11_riesz_ratio_trend() {
    let (exp, o, secs) = run("riesz-grid");
    let Experiment::RieszGrid(p) = exp else { unreachable!() };
    assert_eq!((p.lambda, p.p, p.r_list.as_slice()), (0.25, 4.0, &[4.0, 8.0, 16.0, 32.0, 64.0][..]));
    let mom = metric(&o, "max_over_median");
    let inc = check(&o, "order0_strictly_increasing");
    let order0: Vec<String> = p.r_list.iter().map(|r| format!("{:.3}", metric(&o, &format!("focusing_order0[R={r}]")))).collect();
    report(11, mom <= 1.2 && inc, format!("max/median {mom:.3} ≤ 1.2; order-0 focusing {} strictly increasing: {inc}, {secs:.0}s", order0.join(" < ")));
}
