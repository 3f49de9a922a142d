//! Row and column square-function norms, equal-interval frequency
//! projections, two-sided estimates of the positive maximal norm
//! `inf{‖a‖_p : 0 ≤ x_n ≤ a}`, and randomized checks of the operator
//! inequalities used with them.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ncmat::{psd_leq, MatElem};
use crate::optorus::{signed_freq, OpGrid};
use crate::rng::{self, random_psd, random_psd_low_rank, LabRng};
use crate::scalar::{lit, to_f64, Real};

/// Finite sequence of matrices or of grids with a shared shape.
#[derive(Clone, Debug)]
pub enum OpSequence<T: Real> {
    Mats(Vec<MatElem<T>>),
    Grids(Vec<OpGrid<T>>),
}

impl<T: Real> OpSequence<T> {
    pub fn len(&self) -> usize {
        match self {
            Self::Mats(v) => v.len(),
            Self::Grids(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Mats(v) => {
                let Some(first) = v.first() else { return invalid("empty sequence") };
                if v.iter().any(|m| m.dim() != first.dim()) {
                    return invalid("sequence items differ in dimension");
                }
            }
            Self::Grids(v) => {
                let Some(first) = v.first() else { return invalid("empty sequence") };
                if v.iter().any(|m| m.side() != first.side() || m.mat_dim() != first.mat_dim() || m.domain() != first.domain()) {
                    return invalid("sequence items differ in shape");
                }
            }
        }
        Ok(())
    }

    fn square_norm(&self, p: f64, column: bool) -> Result<f64> {
        self.validate()?;
        let sq = |ms: &[MatElem<T>]| -> MatElem<T> {
            let n = ms[0].dim();
            let mut acc = MatElem::zeros(n);
            for m in ms {
                let t = if column { m.adjoint().matmul(m) } else { m.matmul(&m.adjoint()) };
                acc = acc.add(&t);
            }
            acc.hermitian_part()
        };
        match self {
            Self::Mats(v) => {
                let s = sq(v).mat_power(0.5)?;
                Ok(to_f64(s.schatten_norm(p)?))
            }
            Self::Grids(v) => {
                let first = &v[0];
                let g = first.side();
                let mut out = first.clone();
                for i1 in 0..g {
                    for i2 in 0..g {
                        let ms: Vec<MatElem<T>> = v.iter().map(|f| f.sample(i1, i2)).collect();
                        out.set_sample(i1, i2, &sq(&ms).mat_power(0.5)?);
                    }
                }
                out.lp_norm_grid(p)
            }
        }
    }

    /// `‖(Σ|f_j|²)^{1/2}‖_p`.
    pub fn col_sq_norm(&self, p: f64) -> Result<f64> {
        self.square_norm(p, true)
    }

    /// `‖(Σ|f_j^*|²)^{1/2}‖_p`.
    pub fn row_sq_norm(&self, p: f64) -> Result<f64> {
        self.square_norm(p, false)
    }

    pub fn rc_norm(&self, p: f64) -> Result<RcNorm> {
        let row = self.row_sq_norm(p)?;
        let col = self.col_sq_norm(p)?;
        Ok(if p >= 2.0 {
            RcNorm { value: row.max(col), row, col, exact: true }
        } else {
            RcNorm { value: row.min(col), row, col, exact: false }
        })
    }
}

/// The `rc` square norm. For `p ≥ 2` it is `max(row, col)`; for `p < 2` the
/// value is `min(row, col)`, an upper bound for the infimum over splittings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RcNorm {
    pub value: f64,
    pub row: f64,
    pub col: f64,
    /// False when `value` is only an upper bound.
    pub exact: bool,
}

/// `P_j F` for the indicator of the `j`-th interval of `len` consecutive
/// frequency indices along `ξ₂`, starting at `-g/2`. Interval length is
/// given in physical frequency units.
pub fn lp_projections<T: Real>(f: &OpGrid<T>, interval: f64) -> Result<Vec<OpGrid<T>>> {
    let g = f.side();
    let side = f.domain().side();
    let len_f = interval * side;
    let len = len_f.round() as usize;
    if len == 0 || (len_f - len as f64).abs() > 1e-9 || g % len != 0 {
        return invalid(format!("interval length {interval} does not divide the frequency window"));
    }
    let count = g / len;
    let base = -(g as i64 / 2);
    (0..count)
        .map(|j| {
            let lo = base + (j * len) as i64;
            let hi = lo + len as i64;
            let sym: Vec<Complex<f64>> = (0..g * g)
                .map(|idx| {
                    let k2 = signed_freq(idx % g, g);
                    if k2 >= lo && k2 < hi {
                        Complex::new(1.0, 0.0)
                    } else {
                        Complex::new(0.0, 0.0)
                    }
                })
                .collect();
            f.apply_symbol(&sym)
        })
        .collect()
}

/// `‖{P_j F}‖_{rc} / ‖F‖_p`.
pub fn projection_square_ratio<T: Real>(f: &OpGrid<T>, interval: f64, p: f64) -> Result<f64> {
    let parts = lp_projections(f, interval)?;
    let rc = OpSequence::Grids(parts).rc_norm(p)?;
    Ok(rc.value / f.lp_norm_grid(p)?)
}

/// Two-sided estimate of `‖sup_n x_n‖_p` for positive `x_n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxNormEstimate {
    /// Best dual pairing `Σ τ(x_n y_n)` with `y_n ≥ 0`, `‖Σ y_n‖_{p'} = 1`.
    pub lower: f64,
    /// `‖a‖_p` for a certified majorant `a ⪰ x_n`.
    pub upper: f64,
    pub majorant: MatElem<f64>,
    pub dual: Vec<MatElem<f64>>,
    /// Lower bound after each accepted ascent step.
    pub ascent: Vec<f64>,
}

fn positive_part(m: &MatElem<f64>) -> MatElem<f64> {
    m.hermitian_part().herm_fn(|v| v.max(0.0))
}

/// `a₀ = x_{σ(1)}`, `a_{i} = a_{i-1} + (x_{σ(i)} - a_{i-1})_+`; every step
/// keeps `a ⪰` the items seen so far.
fn accumulate_majorant(xs: &[MatElem<f64>], order: &[usize]) -> MatElem<f64> {
    let mut a = xs[order[0]].hermitian_part();
    for &i in &order[1..] {
        a = a.add(&positive_part(&xs[i].sub(&a)));
    }
    a.hermitian_part()
}

fn pairing_value(xs: &[MatElem<f64>], cs: &[MatElem<f64>], q: f64) -> Option<f64> {
    let n = xs[0].dim();
    let mut s = MatElem::zeros(n);
    let mut num = 0.0;
    for (x, c) in xs.iter().zip(cs) {
        let y = c.adjoint().matmul(c);
        num += x.matmul(&y).trace().re;
        s = s.add(&y);
    }
    let d = s.hermitian_part().schatten_norm(q).ok()?;
    (d > 0.0).then_some(num / d)
}

/// Lower and upper certificates for the positive maximal norm.
pub fn maxnorm_positive(xs: &[MatElem<f64>], p: f64, seed: u64) -> Result<MaxNormEstimate> {
    if xs.is_empty() {
        return invalid("empty sequence");
    }
    if !(p >= 1.0) || p.is_infinite() {
        return invalid("p must lie in [1, inf)");
    }
    let n = xs[0].dim();
    for x in xs {
        if x.dim() != n {
            return invalid("sequence items differ in dimension");
        }
        if x.self_adjoint_defect() > 1e-10 * x.max_abs().max(1.0) || x.min_eig() < -1e-10 * x.max_abs().max(1.0) {
            return invalid("maxnorm_positive expects positive semidefinite items");
        }
    }
    let mut r = rng::seeded(seed);
    // upper side: best of several accumulation orders
    let mut orders: Vec<Vec<usize>> = vec![(0..xs.len()).collect(), (0..xs.len()).rev().collect()];
    for _ in 0..6 {
        let mut o: Vec<usize> = (0..xs.len()).collect();
        for i in (1..o.len()).rev() {
            let j = (rng::uniform(&mut r, 0.0, (i + 1) as f64) as usize).min(i);
            o.swap(i, j);
        }
        orders.push(o);
    }
    let mut best: Option<(f64, MatElem<f64>)> = None;
    for o in &orders {
        let a = accumulate_majorant(xs, o);
        let v = a.schatten_norm(p)?;
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, a));
        }
    }
    let (mut upper, mut a) = best.expect("at least one order");
    // certify; shift by the most negative slack if rounding left any
    let mut mu: f64 = 0.0;
    for x in xs {
        mu = mu.max(-a.sub(x).hermitian_part().min_eig());
    }
    if mu > 0.0 {
        a = a.add(&MatElem::identity(n).scale_real(mu));
        upper = a.schatten_norm(p)?;
    }
    for x in xs {
        if !psd_leq(x, &a, 1e-12 * a.max_abs().max(1.0))? {
            return Err(crate::error::LabError::Internal("majorant certificate failed".into()));
        }
    }
    // lower side: seeded starts, then monotone ascent on y_n = c_n^* c_n
    let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    let qc = if q.is_infinite() { 64.0 } else { q };
    let e = a.eigh();
    let b_vals: Vec<f64> = e.values.iter().map(|v| v.max(0.0).powf(p - 1.0)).collect();
    let mut starts: Vec<Vec<MatElem<f64>>> = Vec::new();
    // argmax assignment in the eigenbasis of the majorant
    let mut assign: Vec<MatElem<f64>> = vec![MatElem::zeros(n); xs.len()];
    for i in 0..n {
        let v: Vec<Complex<f64>> = (0..n).map(|r| e.vectors.get(r, i)).collect();
        let mut bi = 0;
        let mut bv = f64::NEG_INFINITY;
        for (k, x) in xs.iter().enumerate() {
            let mut s = Complex::new(0.0, 0.0);
            for r1 in 0..n {
                for r2 in 0..n {
                    s += v[r1].conj() * x.get(r1, r2) * v[r2];
                }
            }
            if s.re > bv {
                bv = s.re;
                bi = k;
            }
        }
        let w = b_vals[i].sqrt();
        let row = MatElem::from_fn(n, |r1, r2| if r1 == 0 { v[r2].conj() * w } else { Complex::new(0.0, 0.0) });
        // accumulate rank one pieces as rows of c
        let cur = &assign[bi];
        let mut next = cur.clone();
        let slot = (0..n).find(|&rr| (0..n).all(|cc| cur.get(rr, cc).norm() == 0.0)).unwrap_or(0);
        for cc in 0..n {
            next.set(slot, cc, row.get(0, cc));
        }
        assign[bi] = next;
    }
    starts.push(assign);
    let bh = a.herm_fn(|v| v.max(0.0).powf((p - 1.0) / 2.0));
    starts.push(xs.iter().map(|_| bh.scale_real(1.0 / (xs.len() as f64).sqrt())).collect());
    for _ in 0..2 {
        starts.push(xs.iter().map(|_| rng::gaussian_matrix::<f64>(&mut r, n)).collect());
    }
    let mut best_lower = f64::NEG_INFINITY;
    let mut best_dual = Vec::new();
    let mut trace = Vec::new();
    for mut cs in starts {
        let Some(mut val) = pairing_value(xs, &cs, qc) else { continue };
        let mut step = 0.5;
        for _ in 0..60 {
            let mut s = MatElem::zeros(n);
            let mut num = 0.0;
            for (x, c) in xs.iter().zip(&cs) {
                let y = c.adjoint().matmul(c);
                num += x.matmul(&y).trace().re;
                s = s.add(&y);
            }
            let s = s.hermitian_part();
            let d = match s.schatten_norm(qc) {
                Ok(d) if d > 0.0 => d,
                _ => break,
            };
            let sp = s.herm_fn(|v| v.max(0.0).powf(qc - 1.0));
            let w = num * d.powf(-1.0 - qc);
            let scale = cs.iter().map(|c| c.frob_sq()).sum::<f64>().sqrt().max(1e-300);
            let grads: Vec<MatElem<f64>> = xs
                .iter()
                .zip(&cs)
                .map(|(x, c)| c.matmul(&x.scale_real(1.0 / d).sub(&sp.scale_real(w))))
                .collect();
            let gn = grads.iter().map(|g| g.frob_sq()).sum::<f64>().sqrt();
            if gn == 0.0 {
                break;
            }
            let mut accepted = false;
            while step > 1e-8 {
                let trial: Vec<MatElem<f64>> = cs.iter().zip(&grads).map(|(c, g)| c.add(&g.scale_real(step * scale / gn))).collect();
                if let Some(v) = pairing_value(xs, &trial, qc) {
                    if v > val {
                        val = v;
                        cs = trial;
                        accepted = true;
                        step *= 1.5;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            if val > best_lower {
                trace.push(val);
            }
        }
        if val > best_lower {
            best_lower = val;
            best_dual = cs.iter().map(|c| c.adjoint().matmul(c)).collect();
        }
    }
    let ascent = trace.iter().copied().scan(f64::NEG_INFINITY, |m, v| {
        *m = m.max(v);
        Some(*m)
    });
    let ascent: Vec<f64> = ascent.collect();
    let lower = best_lower.min(upper);
    Ok(MaxNormEstimate { lower, upper, majorant: a, dual: best_dual, ascent })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IneqKind {
    Convexity,
    TraceCs,
    HolderSq,
    Khintchine,
    Monotone,
}

impl IneqKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "convexity" => Self::Convexity,
            "trace-cs" => Self::TraceCs,
            "holder-sq" => Self::HolderSq,
            "khintchine" => Self::Khintchine,
            "monotone" => Self::Monotone,
            other => return invalid(format!("unknown inequality kind '{other}'")),
        })
    }

    pub fn all() -> [Self; 5] {
        [Self::Convexity, Self::TraceCs, Self::HolderSq, Self::Khintchine, Self::Monotone]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FuzzReport {
    pub kind: IneqKind,
    pub trials: usize,
    pub violations: usize,
    /// Smallest scaled slack `(rhs - lhs) / scale`.
    pub min_slack: f64,
    /// Instance attaining `min_slack`.
    pub worst: Option<serde_json::Value>,
    /// Khintchine only: extreme values of `E‖Σ ε_n x_n‖_p / ‖{x_n}‖_{rc}`.
    pub ratio_range: Option<(f64, f64)>,
}

/// Violation threshold on the scaled slack.
pub const FUZZ_TOL: f64 = crate::tolerances::FUZZ_SLACK;

fn mats_json(ms: &[MatElem<f64>]) -> serde_json::Value {
    serde_json::to_value(ms).unwrap_or(serde_json::Value::Null)
}

struct Trial {
    slack: f64,
    ratio: Option<f64>,
    instance: serde_json::Value,
}

fn random_matrix(r: &mut LabRng, n: usize) -> MatElem<f64> {
    let s = rng::uniform(r, 0.1, 3.0);
    rng::gaussian_matrix::<f64>(r, n).scale_real(s)
}

fn psd_slack(lhs: &MatElem<f64>, rhs: &MatElem<f64>) -> f64 {
    let scale = lhs.op_norm().max(rhs.op_norm()).max(1e-300);
    rhs.sub(lhs).hermitian_part().min_eig() / scale
}

fn scalar_slack(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / lhs.abs().max(rhs.abs()).max(1e-300)
}

/// `E‖Σ ε_n x_n‖_p^p` by enumeration (≤ 12 terms) or Monte Carlo.
fn rademacher_moment(xs: &[MatElem<f64>], p: f64, r: &mut LabRng) -> Result<f64> {
    let m = xs.len();
    let n = xs[0].dim();
    let eval = |signs: &dyn Fn(usize) -> f64| -> Result<f64> {
        let mut s = MatElem::zeros(n);
        for (i, x) in xs.iter().enumerate() {
            s = s.add(&x.scale_real(signs(i)));
        }
        Ok(s.schatten_norm(p)?.powf(p))
    };
    if m <= 12 {
        let mut acc = 0.0;
        for mask in 0u32..(1 << m) {
            acc += eval(&|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 })?;
        }
        Ok((acc / (1u64 << m) as f64).powf(1.0 / p))
    } else {
        let draws = 4096;
        let mut acc = 0.0;
        for _ in 0..draws {
            let s: Vec<f64> = (0..m).map(|_| rng::rademacher(r)).collect();
            acc += eval(&|i| s[i])?;
        }
        Ok((acc / draws as f64).powf(1.0 / p))
    }
}

fn one_trial(kind: IneqKind, n: usize, r: &mut LabRng) -> Result<Trial> {
    Ok(match kind {
        IneqKind::Convexity => {
            let m = 1 + (rng::uniform(r, 0.0, 6.0) as usize);
            let w: Vec<f64> = (0..m).map(|_| rng::uniform(r, 0.05, 1.0)).collect();
            let f: Vec<MatElem<f64>> = (0..m).map(|_| random_matrix(r, n)).collect();
            let g: Vec<Complex<f64>> = (0..m).map(|_| rng::cnormal::<f64>(r)).collect();
            let mut int_fg = MatElem::zeros(n);
            let mut int_f2 = MatElem::zeros(n);
            let mut int_g2 = 0.0;
            for i in 0..m {
                int_fg = int_fg.add(&f[i].scale(g[i] * w[i]));
                int_f2 = int_f2.add(&f[i].adjoint().matmul(&f[i]).scale_real(w[i]));
                int_g2 += g[i].norm_sqr() * w[i];
            }
            let lhs = int_fg.adjoint().matmul(&int_fg);
            let rhs = int_f2.scale_real(int_g2);
            Trial { slack: psd_slack(&lhs, &rhs), ratio: None, instance: mats_json(&f) }
        }
        IneqKind::TraceCs => {
            let a = random_matrix(r, n);
            let b = if rng::uniform(r, 0.0, 1.0) < 0.5 {
                random_psd::<f64>(r, n)
            } else {
                random_psd_low_rank::<f64>(r, n, 1.max(n / 2))
            };
            let tau = |m: &MatElem<f64>| m.trace();
            let lhs = tau(&a.matmul(&b)).norm_sqr();
            let rhs = tau(&a.abs().matmul(&b)).re * tau(&a.adjoint().abs().matmul(&b)).re;
            Trial { slack: scalar_slack(lhs, rhs), ratio: None, instance: mats_json(&[a, b]) }
        }
        IneqKind::HolderSq => {
            let m = 1 + (rng::uniform(r, 0.0, 5.0) as usize);
            let p = rng::uniform(r, 2.0, 8.0);
            let q = rng::uniform(r, 2.0, 8.0);
            let rr = 1.0 / (1.0 / p + 1.0 / q);
            let f: Vec<MatElem<f64>> = (0..m).map(|_| random_matrix(r, n)).collect();
            let g: Vec<MatElem<f64>> = (0..m).map(|_| random_matrix(r, n)).collect();
            let mut s = MatElem::zeros(n);
            for i in 0..m {
                s = s.add(&f[i].adjoint().matmul(&g[i]));
            }
            let lhs = s.schatten_norm(rr)?;
            let rhs = OpSequence::Mats(f.clone()).col_sq_norm(p)? * OpSequence::Mats(g.clone()).col_sq_norm(q)?;
            let mut all = f;
            all.extend(g);
            Trial { slack: scalar_slack(lhs, rhs), ratio: None, instance: mats_json(&all) }
        }
        IneqKind::Khintchine => {
            let m = 1 + (rng::uniform(r, 0.0, 8.0) as usize);
            let ps = [1.0, 1.5, 2.0, 3.0, 4.0];
            let p = ps[(rng::uniform(r, 0.0, ps.len() as f64) as usize).min(ps.len() - 1)];
            let xs: Vec<MatElem<f64>> = (0..m).map(|_| random_matrix(r, n)).collect();
            let lhs = rademacher_moment(&xs, p, r)?;
            let rc = OpSequence::Mats(xs.clone()).rc_norm(p)?;
            Trial { slack: 0.0, ratio: Some(lhs / rc.value), instance: mats_json(&xs) }
        }
        IneqKind::Monotone => {
            let a = random_psd::<f64>(r, n);
            let rank = 1 + (rng::uniform(r, 0.0, n as f64) as usize).min(n - 1);
            let b = a.add(&random_psd_low_rank::<f64>(r, n, rank));
            let p = rng::uniform(r, 1.0, 6.0);
            let alpha = rng::uniform(r, 0.05, 0.95);
            let s1 = scalar_slack(a.schatten_norm(p)?, b.schatten_norm(p)?);
            let s2 = psd_slack(&a.mat_power(alpha)?, &b.mat_power(alpha)?);
            Trial { slack: s1.min(s2), ratio: None, instance: mats_json(&[a, b]) }
        }
    })
}

/// Runs `trials` random instances of one inequality, with dimensions drawn
/// from `dims`.
pub fn ineq_fuzz(kind: IneqKind, trials: usize, seed: u64, dims: &[usize]) -> Result<FuzzReport> {
    if dims.is_empty() || dims.contains(&0) {
        return invalid("dimension list must be nonempty and positive");
    }
    let results: Result<Vec<Trial>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::seeded(seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let n = dims[t % dims.len()];
            one_trial(kind, n, &mut r)
        })
        .collect();
    let results = results?;
    let mut min_slack = f64::INFINITY;
    let mut worst = None;
    let mut violations = 0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for t in results {
        if t.slack < -FUZZ_TOL {
            violations += 1;
        }
        if t.slack < min_slack {
            min_slack = t.slack;
            worst = Some(t.instance);
        }
        if let Some(q) = t.ratio {
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    let ratio_range = (kind == IneqKind::Khintchine).then_some((lo, hi));
    Ok(FuzzReport { kind, trials, violations, min_slack, worst, ratio_range })
}

/// Scalar sup norm of commuting diagonal sequences, `‖max_n x_n‖_p`.
pub fn diagonal_sup_norm(xs: &[MatElem<f64>], p: f64) -> f64 {
    let n = xs[0].dim();
    let s: f64 = (0..n)
        .map(|i| xs.iter().map(|x| x.get(i, i).re).fold(f64::NEG_INFINITY, f64::max).powf(p))
        .sum();
    (s / n as f64).powf(1.0 / p)
}

/// Generic-scalar helper used by the grid layer: `‖Σ|f_j|²‖` at `p = 2`
/// must agree for rows and columns.
pub fn rc_collapse_defect<T: Real>(seq: &OpSequence<T>) -> Result<f64> {
    let r = seq.row_sq_norm(2.0)?;
    let c = seq.col_sq_norm(2.0)?;
    Ok((r - c).abs() / r.max(c).max(lit::<f64>(1e-300)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optorus::Domain;
    use crate::rng::random_hermitian;

    #[test]
    fn square_norm_examples() {
        let mut r = rng::seeded(1);
        let h = random_hermitian::<f64>(&mut r, 4);
        let s = OpSequence::Mats(vec![h.clone()]);
        let want = h.schatten_norm(3.0).unwrap();
        assert!((s.row_sq_norm(3.0).unwrap() - want).abs() < 1e-10);
        assert!((s.col_sq_norm(3.0).unwrap() - want).abs() < 1e-10);
        let sc = OpSequence::Mats(vec![MatElem::scalar(1, Complex::new(3.0, 0.0)), MatElem::scalar(1, Complex::new(0.0, 4.0))]);
        assert!((sc.row_sq_norm(1.5).unwrap() - 5.0).abs() < 1e-12);
        assert!((sc.col_sq_norm(1.5).unwrap() - 5.0).abs() < 1e-12);
        let seq = OpSequence::Mats((0..3).map(|_| rng::gaussian_matrix::<f64>(&mut r, 4)).collect());
        let (rw, cl) = (seq.row_sq_norm(4.0).unwrap(), seq.col_sq_norm(4.0).unwrap());
        assert!(rw.is_finite() && cl.is_finite() && (rw - cl).abs() > 0.0);
        assert!(rc_collapse_defect(&seq).unwrap() < 1e-10);
        assert!(!seq.rc_norm(1.5).unwrap().exact);
        assert!(OpSequence::<f64>::Mats(vec![]).row_sq_norm(2.0).is_err());
    }

    #[test]
    fn projections_partition() {
        let mut r = rng::seeded(2);
        let f = OpGrid::<f64>::from_fn(32, 2, Domain::Torus, |_| rng::gaussian_matrix(&mut r, 2)).unwrap();
        let parts = lp_projections(&f, 8.0).unwrap();
        assert_eq!(parts.len(), 4);
        let mut sum = parts[0].clone();
        for p in &parts[1..] {
            sum = sum.add(p);
        }
        assert!(sum.max_abs_diff(&f) < 1e-10);
        let e: f64 = parts.iter().map(|p| p.coeff_l2_norm().powi(2)).sum();
        assert!((e - f.coeff_l2_norm().powi(2)).abs() < 1e-10 * e);
        let again = lp_projections(&parts[1], 8.0).unwrap();
        assert!(again[1].max_abs_diff(&parts[1]) < 1e-12);
        assert!(again[2].max_abs() < 1e-12);
        assert!(lp_projections(&f, 5.0).is_err());
        let one = OpGrid::<f64>::from_scalar_fn(32, Domain::Torus, |x| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * 3.0 * x[1])).unwrap();
        let parts = lp_projections(&one, 8.0).unwrap();
        assert_eq!(parts.iter().filter(|p| p.max_abs() > 1e-9).count(), 1);
    }

    #[test]
    fn maxnorm_examples() {
        let mut r = rng::seeded(3);
        let a = random_psd::<f64>(&mut r, 3);
        let est = maxnorm_positive(&[a.clone(), a.clone(), a.clone()], 3.0, 1).unwrap();
        let want = a.schatten_norm(3.0).unwrap();
        assert!((est.upper - want).abs() < 1e-10 && (est.lower - want).abs() < 1e-8, "{} {} {want}", est.lower, est.upper);
        let diag: Vec<MatElem<f64>> = (0..4)
            .map(|_| MatElem::from_real_diag(&(0..5).map(|_| rng::uniform(&mut r, 0.0, 2.0)).collect::<Vec<_>>()))
            .collect();
        let est = maxnorm_positive(&diag, 2.5, 2).unwrap();
        let want = diagonal_sup_norm(&diag, 2.5);
        assert!((est.upper - want).abs() < 1e-8 && (est.lower - want).abs() < 1e-8, "{} {} {want}", est.lower, est.upper);
        let gen: Vec<MatElem<f64>> = (0..4).map(|_| random_psd(&mut r, 3)).collect();
        let est = maxnorm_positive(&gen, 2.0, 3).unwrap();
        assert!(est.lower <= est.upper + 1e-12);
        assert!(est.ascent.windows(2).all(|w| w[1] >= w[0]));
        let bad = MatElem::from_real_diag(&[1.0, -1.0]);
        assert!(maxnorm_positive(&[bad], 2.0, 0).is_err());
    }

    #[test]
    fn fuzz_smoke() {
        for kind in IneqKind::all() {
            let rep = ineq_fuzz(kind, 200, 5, &[1, 2, 3]).unwrap();
            assert_eq!(rep.violations, 0, "{kind:?} {}", rep.min_slack);
        }
        let k1 = ineq_fuzz(IneqKind::Khintchine, 1, 1, &[3]).unwrap();
        assert!(k1.ratio_range.is_some());
        assert!(IneqKind::parse("nope").is_err());
    }

    #[test]
    fn khintchine_single_term_is_exact() {
        let mut r = rng::seeded(6);
        let x = rng::gaussian_matrix::<f64>(&mut r, 3);
        for p in [1.0, 3.0] {
            let lhs = rademacher_moment(&[x.clone()], p, &mut r).unwrap();
            let rc = OpSequence::Mats(vec![x.clone()]).rc_norm(p).unwrap();
            assert!((lhs / rc.value - 1.0).abs() < 1e-12);
        }
    }
}
