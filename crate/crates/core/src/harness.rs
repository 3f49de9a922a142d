//! Experiment harness: TOML configuration, a registry of experiments with
//! typed parameters, and CSV/JSON result records.
//!
//! ```toml
//! seed = 7
//! out_dir = "results"
//!
//! [[experiment]]
//! id = "kakeya-scaling"
//! [experiment.params]
//! n_list = [8, 16, 32]
//! grid = 256
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid, LabError, Result};
use crate::interp::{self, BoundaryMajorant};
use crate::kakeya::{self, FamilySpec};
use crate::multilab::{self, ScaledKernelGrid};
use crate::optorus::{self, Domain, FamilyKind, OpGrid};
use crate::qtorus::{random_poly, QTorusPoly, RationalAngle};
use crate::sqmax::{self, IneqKind};
use crate::{rng, stats};

/// Environment variable overriding the output root.
pub const OUT_ENV: &str = "NCFLAB_OUT";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// `"<experiment id>.<param>" = value`, merged into matching experiments.
    #[serde(default)]
    pub tolerances: BTreeMap<String, toml::Value>,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<ExperimentSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: toml::Table,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses every experiment so that bad ids or parameters surface before
    /// anything runs.
    pub fn validate(&self) -> Result<Vec<(ExperimentSpec, Experiment)>> {
        self.experiments
            .iter()
            .map(|spec| {
                let mut params = spec.params.clone();
                let prefix = format!("{}.", spec.id);
                for (k, v) in &self.tolerances {
                    if let Some(name) = k.strip_prefix(&prefix) {
                        params.insert(name.to_string(), v.clone());
                    }
                }
                Ok((spec.clone(), Experiment::parse(&spec.id, params)?))
            })
            .collect()
    }

    /// Output root: `NCFLAB_OUT`, else `out_dir`, else `ncflab-out`.
    pub fn output_root(&self) -> PathBuf {
        std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .or_else(|| self.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("ncflab-out"))
    }
}

/// One assertion on a measured value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `"<="`, `">="`, `"<"`, `"=="` or `"true"`.
    pub relation: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, relation: "<=".into(), passed: value <= limit }
    }

    pub fn below(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, relation: "<".into(), passed: value < limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, relation: ">=".into(), passed: value >= limit }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, limit: 1.0, relation: "true".into(), passed: ok }
    }
}

/// Measured values of one experiment.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Outcome {
    pub metrics: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub payload: Value,
}

impl Outcome {
    fn metric(&mut self, name: impl Into<String>, v: f64) {
        self.metrics.push((name.into(), v));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub label: Option<String>,
    pub params: Value,
    pub seed: u64,
    pub outcome: Outcome,
    pub passed: bool,
    pub wall_time_s: f64,
    pub version: String,
}

/// Long-format CSV row.
#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: &'a str,
    label: &'a str,
    seed: u64,
    metric: &'a str,
    value: f64,
    passed: bool,
    wall_time_s: f64,
    version: &'a str,
}

fn list_default<T: Clone>(v: &[T]) -> Vec<T> {
    v.to_vec()
}

fn cx(v: &[[f64; 2]]) -> Vec<Complex<f64>> {
    v.iter().map(|p| Complex::new(p[0], p[1])).collect()
}

macro_rules! params {
    ($name:ident { $($field:ident : $ty:ty = $default:expr),* $(,)? }) => {
        #[derive(Clone, Debug, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, default)]
        pub struct $name {
            $(pub $field: $ty,)*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $($field: $default,)* }
            }
        }
    };
}

params!(QtRieszParams {
    theta: String = "1/5".into(),
    seeds: u64 = 20,
    spectrum_radius: i64 = 10,
    lambda: f64 = 0.3,
    r_start: f64 = 16.0,
    r_factor: f64 = 4.0,
    max_steps: usize = 24,
    parseval_tol: f64 = 1e-10,
    error_floor: f64 = 1e-12,
});

params!(TransferenceParams {
    thetas: Vec<String> = vec!["1/3".into(), "1/5".into(), "2/7".into()],
    seeds: u64 = 10,
    spectrum_radius: i64 = 4,
    grid: usize = 32,
    radii: Vec<f64> = vec![2.5, 4.0, 6.0],
    lambda: [f64; 2] = [0.5, 0.0],
    tol: f64 = 1e-10,
});

params!(KakeyaScalingParams {
    n_list: Vec<u32> = vec![8, 16, 32, 64, 128, 256],
    family: String = "radial".into(),
    grid: usize = 1024,
    min_r2: f64 = 0.95,
    sqrt_factor: f64 = 0.5,
    sqrt_from: u32 = 64,
    max_increment_spread: f64 = 2.0,
});

params!(KakeyaKeyParams {
    m_list: Vec<u32> = vec![2, 3, 4, 5],
    family: String = "radial".into(),
    grid: usize = 256,
});

params!(SandwichParams { trials: usize = 12, grid: usize = 128 });

params!(OverlapParams {
    k_list: Vec<u32> = vec![22, 24, 26],
    samples: usize = 10_000,
    threshold: i64 = 1000,
    max_count: f64 = 100.0,
    max_spread: f64 = 2.0,
});

params!(MultiplierSumParams {
    m_list: Vec<u32> = (4..=10).collect(),
    samples: usize = 10_000,
    max_spread: f64 = 2.0,
    tail: f64 = 1e-12,
});

params!(KernelL1Params {
    k_list: Vec<u32> = (6..=14).collect(),
    lambdas: Vec<[f64; 2]> = vec![[0.1, 0.0], [0.5, 0.0], [0.5, 1.0]],
    max_spread: f64 = 2.0,
    envelope_tol: f64 = 1e-3,
});

params!(PartitionParams {
    points: usize = 10_000,
    k_list: Vec<u32> = (1..=14).collect(),
    lambdas: Vec<[f64; 2]> = vec![[0.1, 0.0], [0.5, 0.0], [0.5, 1.0], [1.5, -0.5]],
    tol: f64 = 1e-8,
});

params!(InterpParams {
    t_points: usize = 99,
    constant: f64 = 2.5,
    tol: f64 = 1e-6,
    symmetry_tol: f64 = 1e-10,
    m0: String = "poly:2:3".into(),
    m1: String = "gauss:1:1.5".into(),
});

params!(FuzzParams {
    kinds: Vec<String> = list_default(&["convexity", "trace-cs", "holder-sq", "monotone", "khintchine"].map(String::from)),
    trials: usize = 10_000,
    dims: Vec<usize> = vec![2, 3, 4, 8],
    khintchine_trials: usize = 2_000,
});

params!(PlancherelParams {
    grids: Vec<usize> = vec![16, 64, 256],
    n: usize = 4,
    seeds: u64 = 2,
    tol: f64 = 1e-10,
});

params!(RieszGridParams {
    lambda: f64 = 0.25,
    p: f64 = 4.0,
    r_list: Vec<f64> = vec![4.0, 8.0, 16.0, 32.0, 64.0],
    families: Vec<String> = list_default(&["focusing", "diagonal-embedding", "random-matrix", "smooth"].map(String::from)),
    grid: usize = 512,
    n: usize = 2,
    max_over_median: f64 = 1.2,
});

params!(RieszExponentParams {
    lambdas: Vec<f64> = vec![0.1, 0.25, 0.4, 0.5],
    eps: f64 = 0.05,
});

/// A registered experiment with validated parameters.
#[derive(Clone, Debug)]
pub enum Experiment {
    QtRiesz(QtRieszParams),
    Transference(TransferenceParams),
    KakeyaScaling(KakeyaScalingParams),
    KakeyaKey(KakeyaKeyParams),
    KakeyaSandwich(SandwichParams),
    Overlap(OverlapParams),
    MultiplierSum(MultiplierSumParams),
    KernelL1(KernelL1Params),
    Partition(PartitionParams),
    Interp(InterpParams),
    Fuzz(FuzzParams),
    Plancherel(PlancherelParams),
    RieszGrid(RieszGridParams),
    RieszExponents(RieszExponentParams),
}

pub const REGISTRY: [&str; 14] = [
    "qt-riesz",
    "transference",
    "kakeya-scaling",
    "kakeya-key",
    "kakeya-sandwich",
    "overlap",
    "multiplier-sum",
    "kernel-l1",
    "partition",
    "interp",
    "fuzz",
    "plancherel",
    "riesz-grid",
    "riesz-exponents",
];

fn typed<P: DeserializeOwned>(id: &str, t: toml::Table) -> Result<P> {
    toml::Value::Table(t).try_into().map_err(|e| LabError::Usage(format!("{id}: {e}")))
}

fn need(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        invalid(msg.to_string())
    }
}

impl Experiment {
    pub fn parse(id: &str, params: toml::Table) -> Result<Self> {
        let e = match id {
            "qt-riesz" => Self::QtRiesz(typed(id, params)?),
            "transference" => Self::Transference(typed(id, params)?),
            "kakeya-scaling" => Self::KakeyaScaling(typed(id, params)?),
            "kakeya-key" => Self::KakeyaKey(typed(id, params)?),
            "kakeya-sandwich" => Self::KakeyaSandwich(typed(id, params)?),
            "overlap" => Self::Overlap(typed(id, params)?),
            "multiplier-sum" => Self::MultiplierSum(typed(id, params)?),
            "kernel-l1" => Self::KernelL1(typed(id, params)?),
            "partition" => Self::Partition(typed(id, params)?),
            "interp" => Self::Interp(typed(id, params)?),
            "fuzz" => Self::Fuzz(typed(id, params)?),
            "plancherel" => Self::Plancherel(typed(id, params)?),
            "riesz-grid" => Self::RieszGrid(typed(id, params)?),
            "riesz-exponents" => Self::RieszExponents(typed(id, params)?),
            other => return Err(LabError::Usage(format!("unknown experiment '{other}'; known: {}", REGISTRY.join(", ")))),
        };
        e.validate()?;
        Ok(e)
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::QtRiesz(_) => "qt-riesz",
            Self::Transference(_) => "transference",
            Self::KakeyaScaling(_) => "kakeya-scaling",
            Self::KakeyaKey(_) => "kakeya-key",
            Self::KakeyaSandwich(_) => "kakeya-sandwich",
            Self::Overlap(_) => "overlap",
            Self::MultiplierSum(_) => "multiplier-sum",
            Self::KernelL1(_) => "kernel-l1",
            Self::Partition(_) => "partition",
            Self::Interp(_) => "interp",
            Self::Fuzz(_) => "fuzz",
            Self::Plancherel(_) => "plancherel",
            Self::RieszGrid(_) => "riesz-grid",
            Self::RieszExponents(_) => "riesz-exponents",
        }
    }

    /// Module preconditions, checked before any compute.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::QtRiesz(p) => {
                RationalAngle::parse(&p.theta)?;
                need(p.spectrum_radius >= 0 && p.r_start > 0.0 && p.r_factor > 1.0, "qt-riesz: bad radius schedule")?;
                need(p.lambda >= 0.0, "qt-riesz: lambda must be nonnegative")
            }
            Self::Transference(p) => {
                for t in &p.thetas {
                    RationalAngle::parse(t)?;
                }
                need(optorus::is_power_of_two(p.grid), "transference: grid must be a power of two")?;
                need(2 * p.spectrum_radius < p.grid as i64, "transference: spectrum does not fit the grid")?;
                need(p.lambda[0] >= 0.0 && p.radii.iter().all(|r| *r > 0.0), "transference: bad radius or order")
            }
            Self::KakeyaScaling(p) => {
                FamilySpec::parse(&p.family, p.grid)?;
                need(p.grid.is_power_of_two() && p.grid >= 16, "kakeya-scaling: grid must be a power of two ≥ 16")?;
                need(!p.n_list.is_empty() && p.n_list.iter().all(|&n| n >= 1 && (n as usize) <= p.grid / 2), "kakeya-scaling: N must lie in 1..=grid/2")
            }
            Self::KakeyaKey(p) => {
                FamilySpec::parse(&p.family, p.grid)?;
                need(p.m_list.iter().all(|&m| (1..=10).contains(&m) && (1usize << m) <= p.grid / 2), "kakeya-key: m out of range")
            }
            Self::KakeyaSandwich(p) => need(p.grid.is_power_of_two() && p.grid >= 64, "kakeya-sandwich: grid must be a power of two ≥ 64"),
            Self::Overlap(p) => need(!p.k_list.is_empty() && p.k_list.iter().all(|&k| k >= 2 && k <= 40), "overlap: k out of range"),
            Self::MultiplierSum(p) => need(!p.m_list.is_empty() && p.m_list.iter().all(|&m| (1..=16).contains(&m)), "multiplier-sum: m out of range"),
            Self::KernelL1(p) => {
                need(!p.k_list.is_empty() && p.k_list.iter().all(|&k| (1..=20).contains(&k)), "kernel-l1: k out of range")?;
                need(p.lambdas.iter().all(|l| l[0] > 0.0), "kernel-l1: Re λ must be positive")
            }
            Self::Partition(p) => need(p.k_list.iter().all(|&k| (1..=30).contains(&k)) && p.lambdas.iter().all(|l| l[0] >= 0.0), "partition: bad k or λ"),
            Self::Interp(p) => {
                BoundaryMajorant::parse(&p.m0)?;
                BoundaryMajorant::parse(&p.m1)?;
                need(p.t_points >= 3 && p.constant > 0.0, "interp: need at least 3 points and a positive constant")
            }
            Self::Fuzz(p) => {
                for k in &p.kinds {
                    IneqKind::parse(k)?;
                }
                need(!p.dims.is_empty() && !p.dims.contains(&0), "fuzz: dimensions must be positive")
            }
            Self::Plancherel(p) => need(p.grids.iter().all(|g| optorus::is_power_of_two(*g)) && p.n >= 1, "plancherel: grids must be powers of two"),
            Self::RieszGrid(p) => {
                for f in &p.families {
                    f.parse::<FamilyKind>()?;
                }
                need(optorus::is_power_of_two(p.grid) && p.p >= 1.0 && p.lambda >= 0.0, "riesz-grid: bad grid, p or λ")?;
                // the p-th power of a member must not alias: 4·(R + 3) < grid
                let rmax = p.r_list.iter().cloned().fold(0.0, f64::max);
                need(p.p.ceil() * (rmax + 3.0) < p.grid as f64, "riesz-grid: grid too small for the largest radius")
            }
            Self::RieszExponents(p) => {
                need(p.eps > 0.0 && p.eps < 0.5, "riesz-exponents: eps must lie in (0, 1/2)")?;
                need(p.lambdas.iter().all(|&l| l > p.eps && l <= 0.5), "riesz-exponents: λ must lie in (eps, 1/2]")
            }
        }
    }

    pub fn params_json(&self) -> Value {
        match self {
            Self::QtRiesz(p) => json!(p),
            Self::Transference(p) => json!(p),
            Self::KakeyaScaling(p) => json!(p),
            Self::KakeyaKey(p) => json!(p),
            Self::KakeyaSandwich(p) => json!(p),
            Self::Overlap(p) => json!(p),
            Self::MultiplierSum(p) => json!(p),
            Self::KernelL1(p) => json!(p),
            Self::Partition(p) => json!(p),
            Self::Interp(p) => json!(p),
            Self::Fuzz(p) => json!(p),
            Self::Plancherel(p) => json!(p),
            Self::RieszGrid(p) => json!(p),
            Self::RieszExponents(p) => json!(p),
        }
    }

    pub fn run(&self, seed: u64) -> Result<Outcome> {
        match self {
            Self::QtRiesz(p) => run_qt_riesz(p, seed),
            Self::Transference(p) => run_transference(p, seed),
            Self::KakeyaScaling(p) => run_kakeya_scaling(p),
            Self::KakeyaKey(p) => run_kakeya_key(p),
            Self::KakeyaSandwich(p) => run_sandwich(p, seed),
            Self::Overlap(p) => run_overlap(p, seed),
            Self::MultiplierSum(p) => run_multiplier_sum(p, seed),
            Self::KernelL1(p) => run_kernel_l1(p),
            Self::Partition(p) => run_partition(p, seed),
            Self::Interp(p) => run_interp(p),
            Self::Fuzz(p) => run_fuzz(p, seed),
            Self::Plancherel(p) => run_plancherel(p, seed),
            Self::RieszGrid(p) => run_riesz_grid(p, seed),
            Self::RieszExponents(p) => run_riesz_exponents(p),
        }
    }
}

/// Parseval for `lp_norm_qt` and convergence of `B_R^λ f → f` along a
/// geometric radius schedule, until the error drops below the floor.
pub fn run_qt_riesz(p: &QtRieszParams, seed: u64) -> Result<Outcome> {
    let angle = RationalAngle::parse(&p.theta)?;
    let lam = Complex::new(p.lambda, 0.0);
    let mut out = Outcome::default();
    let mut parseval: f64 = 0.0;
    let mut direct_gap: f64 = 0.0;
    let mut monotone = true;
    let mut worst_final: f64 = 0.0;
    let mut reached = true;
    let mut curves = Vec::new();
    for s in 0..p.seeds {
        let mut r = rng::seeded(seed.wrapping_add(s));
        let f = random_poly::<f64>(angle, p.spectrum_radius, &mut r);
        let m = 2 * f.support_diameter() as usize + 1;
        let direct = f.lp_norm_qt(2.0, m)?;
        parseval = parseval.max((direct - f.coeff_l2()).abs());
        direct_gap = direct_gap.max((f.lp_norm_qt_fft(2.0, m)? - direct).abs());
        let mut radius = p.r_start;
        let mut errs = Vec::new();
        for _ in 0..p.max_steps {
            let e = f.bochner_riesz_qt(radius, lam)?.sub(&f).lp_norm_qt_fft(2.0, m)?;
            errs.push((radius, e));
            if e < p.error_floor {
                break;
            }
            radius *= p.r_factor;
        }
        monotone &= errs.windows(2).all(|w| w[1].1 <= w[0].1);
        let last = errs.last().map(|x| x.1).unwrap_or(f64::INFINITY);
        reached &= last < p.error_floor;
        worst_final = worst_final.max(last);
        curves.push(errs);
    }
    out.metric("parseval_residual", parseval);
    out.metric("direct_vs_fft_gap", direct_gap);
    out.metric("final_error_max", worst_final);
    out.checks.push(Check::at_most("parseval_residual", parseval, p.parseval_tol));
    out.checks.push(Check::at_most("direct_vs_fft_gap", direct_gap, p.parseval_tol));
    out.checks.push(Check::holds("error_monotone", monotone));
    out.checks.push(Check::holds("error_reaches_floor", reached));
    out.payload = json!({ "curves": curves });
    Ok(out)
}

/// `B_R^λ` through the transferred grid against the coefficientwise mean.
pub fn run_transference(p: &TransferenceParams, seed: u64) -> Result<Outcome> {
    let lam = Complex::new(p.lambda[0], p.lambda[1]);
    let mut out = Outcome::default();
    let mut worst: f64 = 0.0;
    for t in &p.thetas {
        let angle = RationalAngle::parse(t)?;
        let mut w: f64 = 0.0;
        for s in 0..p.seeds {
            let mut r = rng::seeded(seed.wrapping_add(s));
            let f: QTorusPoly<f64> = random_poly(angle, p.spectrum_radius, &mut r);
            let grid = f.transfer_tilde(p.grid)?;
            for &radius in &p.radii {
                let via_grid = grid.bochner_riesz_grid(radius, lam)?;
                let direct = f.bochner_riesz_qt(radius, lam)?.transfer_tilde(p.grid)?;
                w = w.max(via_grid.max_abs_diff(&direct));
            }
        }
        out.metric(format!("residual[{t}]"), w);
        worst = worst.max(w);
    }
    out.metric("residual_max", worst);
    out.checks.push(Check::at_most("residual_max", worst, p.tol));
    Ok(out)
}

pub fn run_kakeya_scaling(p: &KakeyaScalingParams) -> Result<Outcome> {
    let fam = FamilySpec::parse(&p.family, p.grid)?;
    let rep = kakeya::kakeya_norm_scaling(&p.n_list, fam, p.grid)?;
    let mut out = Outcome::default();
    let mut sqrt_ok = true;
    let mut sqrt_margin = f64::INFINITY;
    for row in &rep.rows {
        out.metric(format!("ratio[N={}]", row.n), row.ratio);
        if row.n >= p.sqrt_from {
            let lim = p.sqrt_factor * (row.n as f64).sqrt();
            sqrt_ok &= row.ratio <= lim;
            sqrt_margin = sqrt_margin.min(lim - row.ratio);
        }
    }
    let spread = rep.increment_spread();
    out.metric("log_fit_slope", rep.log_fit.slope);
    out.metric("log_fit_r2", rep.log_fit.r2);
    out.metric("power_fit_exponent", rep.power_fit.slope);
    out.metric("increment_spread", spread);
    out.metric("sqrt_margin", sqrt_margin);
    out.checks.push(Check::at_least("log_fit_r2", rep.log_fit.r2, p.min_r2));
    out.checks.push(Check::holds("ratio_below_sqrt_bound", sqrt_ok));
    out.checks.push(Check::at_most("increment_spread", spread, p.max_increment_spread));
    out.payload = serde_json::to_value(&rep)?;
    Ok(out)
}

pub fn run_kakeya_key(p: &KakeyaKeyParams) -> Result<Outcome> {
    let fam = FamilySpec::parse(&p.family, p.grid)?;
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    for &m in &p.m_list {
        let row = kakeya::key_inequality_probe(m, fam, p.grid)?;
        out.metric(format!("lhs[m={m}]"), row.lhs);
        out.metric(format!("rhs[m={m}]"), row.rhs);
        rows.push(row);
    }
    out.payload = serde_json::to_value(&rows)?;
    Ok(out)
}

pub fn run_sandwich(p: &SandwichParams, seed: u64) -> Result<Outcome> {
    let rep = kakeya::sandwich_constants(p.trials, p.grid, seed)?;
    let mut out = Outcome::default();
    out.metric("lower", rep.lower);
    out.metric("upper", rep.upper);
    out.metric("domination", rep.domination);
    out.metric("lacunary", rep.lacunary);
    out.checks.push(Check::at_most("domination", rep.domination, 1.0 + 1e-9));
    out.payload = serde_json::to_value(&rep)?;
    Ok(out)
}

pub fn run_overlap(p: &OverlapParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut maxes = Vec::new();
    let mut audits = Vec::new();
    for &k in &p.k_list {
        let a = multilab::audit_overlap(k, p.samples, p.threshold, seed.wrapping_add(k as u64));
        out.metric(format!("admissible_pairs[k={k}]"), a.admissible_pairs as f64);
        out.metric(format!("max_count[k={k}]"), a.max_count as f64);
        out.metric(format!("mean_count[k={k}]"), a.mean_count);
        maxes.push(a.max_count as f64);
        audits.push(a);
    }
    let top = maxes.iter().cloned().fold(0.0, f64::max);
    let low = maxes.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if low > 0.0 { top / low } else { f64::INFINITY };
    out.metric("max_count", top);
    out.metric("cross_k_spread", spread);
    out.checks.push(Check::at_most("max_count", top, p.max_count));
    out.checks.push(Check::holds("every_level_has_admissible_pairs", audits.iter().all(|a| a.admissible_pairs > 0)));
    out.checks.push(Check::at_most("cross_k_spread", spread, p.max_spread));
    out.payload = serde_json::to_value(&audits)?;
    Ok(out)
}

pub fn run_multiplier_sum(p: &MultiplierSumParams, seed: u64) -> Result<Outcome> {
    let rows = multilab::audit_multiplier_sum(&p.m_list, p.samples, seed)?;
    let mut out = Outcome::default();
    let sups: Vec<f64> = rows.iter().map(|r| r.sup).collect();
    let tail = rows.iter().map(|r| r.max_tail).fold(0.0, f64::max);
    for r in &rows {
        out.metric(format!("sup[m={}]", r.m), r.sup);
    }
    let spread = stats::max_min_ratio(&sups);
    out.metric("cross_m_spread", spread);
    out.metric("max_tail", tail);
    out.checks.push(Check::holds("finite", sups.iter().all(|s| s.is_finite())));
    out.checks.push(Check::at_most("cross_m_spread", spread, p.max_spread));
    out.checks.push(Check::below("max_tail", tail, p.tail));
    out.payload = serde_json::to_value(&rows)?;
    Ok(out)
}

pub fn run_kernel_l1(p: &KernelL1Params) -> Result<Outcome> {
    let audit = multilab::audit_kernel_l1(&p.k_list, &cx(&p.lambdas), ScaledKernelGrid::default(), p.envelope_tol)?;
    let mut out = Outcome::default();
    let mut worst: f64 = 0.0;
    for (re, im, ratio) in &audit.l1_ratio {
        out.metric(format!("l1_spread[λ={re}+{im}i]"), *ratio);
        worst = worst.max(*ratio);
    }
    out.metric("l1_spread_max", worst);
    out.metric("envelope_violations", audit.envelope_violations as f64);
    out.checks.push(Check::at_most("l1_spread_max", worst, p.max_spread));
    out.checks.push(Check::at_most("envelope_violations", audit.envelope_violations as f64, 0.0));
    out.payload = serde_json::to_value(&audit)?;
    Ok(out)
}

pub fn run_partition(p: &PartitionParams, seed: u64) -> Result<Outcome> {
    let rep = multilab::audit_partition(p.points, &cx(&p.lambdas), &p.k_list, seed);
    let mut out = Outcome::default();
    out.metric("riesz_residual", rep.riesz_residual);
    out.metric("piece_residual", rep.piece_residual);
    out.checks.push(Check::at_most("riesz_residual", rep.riesz_residual, p.tol));
    out.checks.push(Check::at_most("piece_residual", rep.piece_residual, p.tol));
    Ok(out)
}

pub fn run_interp(p: &InterpParams) -> Result<Outcome> {
    let ts = interp::t_grid(p.t_points);
    let c = BoundaryMajorant::Constant { c: p.constant };
    let one = BoundaryMajorant::Constant { c: 1.0 };
    let e = BoundaryMajorant::Constant { c: std::f64::consts::E };
    let m0 = BoundaryMajorant::parse(&p.m0)?;
    let m1 = BoundaryMajorant::parse(&p.m1)?;
    let (mut const_err, mut exp_err, mut oracle_err, mut sym_err, mut cross): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut table = Vec::new();
    for &t in &ts {
        const_err = const_err.max((interp::interp_constant(&c, &c, t)?.value - p.constant).abs());
        exp_err = exp_err.max((interp::interp_constant(&one, &e, t)?.value - t.exp()).abs());
        oracle_err = oracle_err.max((interp::interp_constant_oracle(&one, &e, t)? - t.exp()).abs());
        let a = interp::interp_constant(&m0, &m1, t)?.value;
        let b = interp::interp_constant(&m1, &m0, 1.0 - t)?.value;
        sym_err = sym_err.max((a - b).abs() / a.abs().max(1.0));
        cross = cross.max((a / interp::interp_constant_oracle(&m0, &m1, t)? - 1.0).abs());
        table.push([t, a]);
    }
    let mut out = Outcome::default();
    out.metric("constant_error", const_err);
    out.metric("exponential_error", exp_err);
    out.metric("oracle_exponential_error", oracle_err);
    out.metric("symmetry_error", sym_err);
    out.metric("oracle_relative_gap", cross);
    out.checks.push(Check::at_most("constant_error", const_err, p.tol));
    out.checks.push(Check::at_most("exponential_error", exp_err, p.tol));
    out.checks.push(Check::at_most("oracle_exponential_error", oracle_err, p.tol));
    out.checks.push(Check::at_most("symmetry_error", sym_err, p.symmetry_tol));
    out.checks.push(Check::at_most("oracle_relative_gap", cross, p.tol));
    out.payload = json!({ "t_m": table });
    Ok(out)
}

pub fn run_fuzz(p: &FuzzParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut reports = Vec::new();
    for k in &p.kinds {
        let kind = IneqKind::parse(k)?;
        let trials = if kind == IneqKind::Khintchine { p.khintchine_trials } else { p.trials };
        let rep = sqmax::ineq_fuzz(kind, trials, seed, &p.dims)?;
        out.metric(format!("violations[{k}]"), rep.violations as f64);
        out.metric(format!("min_slack[{k}]"), rep.min_slack);
        if let Some((lo, hi)) = rep.ratio_range {
            out.metric("khintchine_lower", lo);
            out.metric("khintchine_upper", hi);
            out.checks.push(Check::holds("khintchine_constants_finite", lo.is_finite() && hi.is_finite() && lo > 0.0));
        } else {
            out.checks.push(Check::at_most(&format!("violations[{k}]"), rep.violations as f64, 0.0));
        }
        reports.push(rep);
    }
    out.payload = serde_json::to_value(&reports)?;
    Ok(out)
}

/// Unitarity and round trip of the entrywise DFT, and the pairing
/// `∫ τ(F G*) = Σ_m τ(F̂(m) Ĝ(m)*)`.
pub fn run_plancherel(p: &PlancherelParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let (mut unit, mut round, mut pair): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &g in &p.grids {
        for s in 0..p.seeds {
            let mut r = rng::seeded(seed.wrapping_add(s).wrapping_add(g as u64));
            let f = OpGrid::<f64>::from_fn(g, p.n, Domain::Torus, |_| rng::gaussian_matrix(&mut r, p.n))?;
            let h = OpGrid::<f64>::from_fn(g, p.n, Domain::Torus, |_| rng::gaussian_matrix(&mut r, p.n))?;
            let (fh, hh) = (f.op_fft(), h.op_fft());
            let nf = f.lp_norm_grid(2.0)?;
            unit = unit.max((fh.lp_norm_grid(2.0)? - nf).abs() / nf);
            round = round.max(fh.op_ifft().max_abs_diff(&f) / f.max_abs());
            let inner = |a: &OpGrid<f64>, b: &OpGrid<f64>| -> Complex<f64> {
                a.raw().iter().zip(b.raw()).map(|(x, y)| x * y.conj()).sum::<Complex<f64>>() / p.n as f64 * a.cell_area()
            };
            let lhs = inner(&f, &h);
            let rhs = inner(&fh, &hh);
            pair = pair.max((lhs - rhs).norm() / (nf * h.lp_norm_grid(2.0)?));
        }
    }
    out.metric("unitarity", unit);
    out.metric("round_trip", round);
    out.metric("pairing", pair);
    out.checks.push(Check::at_most("unitarity", unit, p.tol));
    out.checks.push(Check::at_most("round_trip", round, p.tol));
    out.checks.push(Check::at_most("pairing", pair, p.tol));
    Ok(out)
}

/// `L_p` ratio sweeps: the family sup at each radius for order `λ`, and the
/// focusing member at order 0.
pub fn run_riesz_grid(p: &RieszGridParams, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    let lam = Complex::new(p.lambda, 0.0);
    let mut sups = Vec::new();
    let mut rows = Vec::new();
    for &radius in &p.r_list {
        let mut best: f64 = 0.0;
        for (i, name) in p.families.iter().enumerate() {
            let kind: FamilyKind = name.parse()?;
            let f = optorus::family_member::<f64>(kind, p.grid, p.n, radius, seed.wrapping_add(i as u64))?;
            let rep = optorus::riesz_ratio_sweep(&[(name.clone(), f)], p.p, lam, &[radius])?;
            for row in rep.rows {
                best = best.max(row.ratio);
                rows.push(row);
            }
        }
        out.metric(format!("sup_ratio[R={radius}]"), best);
        sups.push(best);
    }
    let med = stats::median(&sups);
    let top = sups.iter().cloned().fold(0.0, f64::max);
    out.metric("max_over_median", top / med);
    out.checks.push(Check::at_most("max_over_median", top / med, p.max_over_median));
    let mut focus = Vec::new();
    for &radius in &p.r_list {
        let f = optorus::family_member::<f64>(FamilyKind::Focusing, p.grid, 1, radius, seed)?;
        let rep = optorus::riesz_ratio_sweep(&[("focusing".into(), f)], p.p, Complex::new(0.0, 0.0), &[radius])?;
        out.metric(format!("focusing_order0[R={radius}]"), rep.rows[0].ratio);
        focus.push(rep.rows[0].ratio);
    }
    out.checks.push(Check::holds("order0_strictly_increasing", focus.windows(2).all(|w| w[1] > w[0])));
    out.payload = json!({ "rows": rows, "order0": focus });
    Ok(out)
}

pub fn run_riesz_exponents(p: &RieszExponentParams) -> Result<Outcome> {
    let rows = interp::riesz_exponent_table(&p.lambdas, p.eps)?;
    let mut out = Outcome::default();
    for r in &rows {
        out.metric(format!("p[λ={}]", r.lambda), r.p);
        out.metric(format!("M[λ={}]", r.lambda), r.m_theta);
    }
    out.checks.push(Check::holds("inside_range", rows.iter().all(|r| r.in_range && r.m_theta.is_finite())));
    out.payload = serde_json::to_value(&rows)?;
    Ok(out)
}

/// Runs a single validated experiment and wraps the outcome in a record.
pub fn run_one(exp: &Experiment, label: Option<String>, seed: u64) -> Result<ResultRecord> {
    let t0 = Instant::now();
    let outcome = exp.run(seed)?;
    Ok(ResultRecord {
        experiment: exp.id().to_string(),
        label,
        params: exp.params_json(),
        seed,
        passed: outcome.passed(),
        outcome,
        wall_time_s: t0.elapsed().as_secs_f64(),
        version: VERSION.to_string(),
    })
}

/// Runs every experiment in order; the records keep configuration order.
pub fn run(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let validated = config.validate()?;
    validated
        .iter()
        .map(|(spec, exp)| run_one(exp, spec.label.clone(), spec.seed.unwrap_or(config.seed)))
        .collect()
}

pub fn records_csv(records: &[ResultRecord]) -> Result<String> {
    let rows: Vec<CsvRow> = records
        .iter()
        .flat_map(|r| {
            r.outcome.metrics.iter().map(move |(m, v)| CsvRow {
                experiment: &r.experiment,
                label: r.label.as_deref().unwrap_or(""),
                seed: r.seed,
                metric: m,
                value: *v,
                passed: r.passed,
                wall_time_s: r.wall_time_s,
                version: &r.version,
            })
        })
        .collect();
    crate::io::csv_string(&rows)
}

/// Writes `results.csv` and `results.json` under `dir`.
pub fn write_records(dir: &Path, records: &[ResultRecord]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), records_csv(records)?)?;
    std::fs::write(dir.join("results.json"), serde_json::to_string_pretty(records)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_runs_clean() {
        let cfg = ExperimentConfig::parse("seed = 3").unwrap();
        let recs = run(&cfg).unwrap();
        assert!(recs.is_empty());
        assert_eq!(records_csv(&recs).unwrap(), "");
    }

    #[test]
    fn unknown_experiment_and_bad_params_are_rejected() {
        let cfg = ExperimentConfig::parse("[[experiment]]\nid = \"nope\"").unwrap();
        assert!(matches!(cfg.validate(), Err(LabError::Usage(_))));
        let cfg = ExperimentConfig::parse("[[experiment]]\nid = \"plancherel\"\n[experiment.params]\ngrids = [12]").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("[[experiment]]\nid = \"fuzz\"\n[experiment.params]\ntypo = 1").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tolerance_overrides_merge() {
        let text = "[tolerances]\n\"plancherel.tol\" = 0.5\n[[experiment]]\nid = \"plancherel\"\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let v = cfg.validate().unwrap();
        match &v[0].1 {
            Experiment::Plancherel(p) => assert_eq!(p.tol, 0.5),
            _ => unreachable!(),
        }
    }

    #[test]
    fn small_runs_are_deterministic() {
        let text = r#"
seed = 5
[[experiment]]
id = "plancherel"
[experiment.params]
grids = [8]
n = 2
[[experiment]]
id = "fuzz"
[experiment.params]
trials = 50
khintchine_trials = 10
dims = [2]
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert!(a.iter().all(|r| r.passed));
        let strip = |rs: &[ResultRecord]| rs.iter().map(|r| r.outcome.metrics.clone()).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        let csv = records_csv(&a).unwrap();
        assert!(csv.starts_with("experiment,label,seed,metric,value,passed,wall_time_s,version\n"));
    }

    #[test]
    fn small_qt_and_transference() {
        let q = QtRieszParams { seeds: 2, spectrum_radius: 3, ..Default::default() };
        assert!(run_qt_riesz(&q, 1).unwrap().passed());
        let t = TransferenceParams { seeds: 2, spectrum_radius: 2, grid: 16, ..Default::default() };
        assert!(run_transference(&t, 1).unwrap().passed());
    }
}
