//! Decomposition of the Bochner-Riesz symbol `(1 - |ξ|²)_+^λ` into a smooth
//! head `m₀₀`, dyadic annular pieces `m_k` and angular pieces `m_{k,l}`;
//! derivative and kernel verifiers, the strip assignment used for the
//! square-function step, the overlap auditor for the sets `Γ̃_{k,l} + Γ_{k,l'}`,
//! and the lacunary multiplier sum.
//!
//! Angular pieces use `n_k = ⌊2^{k/2}⌋` arcs so the periodized partition of
//! the circle is exact for odd `k` as well. Arc labels `l` are signed, with
//! the arc centred at angle `l / n_k` (in turns).

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::optorus::{signed_freq, Domain, OpGrid};
use crate::rng::{self, LabRng};
use crate::scalar::pow_complex;
use crate::tolerances::{PARTITION, SERIES_TAIL, SERIES_TERM};

type Cx = Complex<f64>;

fn flat_exp(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// C^∞ step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, `S(t) + S(1-t) = 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = flat_exp(t);
        a / (a + flat_exp(1.0 - t))
    }
}

/// The cutoffs `φ, ψ, ω`.
///
/// `χ(v)` is 1 for `v ≤ 1/2` and 0 for `v ≥ 5/8`; `ψ(v) = χ(v) - χ(2v)` so the
/// dyadic sum telescopes to `χ`, and `φ(t) = 1 - χ(1 - |t|)`. `ω` is the
/// difference of two shifted steps, which makes `Σ_l ω(x - l) = 1` exact.
#[derive(Clone, Copy, Debug, Default)]
pub struct CutoffSet;

impl CutoffSet {
    pub fn chi(&self, v: f64) -> f64 {
        1.0 - smooth_step((v - 0.5) * 8.0)
    }

    /// Supported in `[1/4, 5/8] ⊂ [1/8, 5/8]`.
    pub fn psi(&self, v: f64) -> f64 {
        if v <= 0.25 || v >= 0.625 {
            return 0.0;
        }
        self.chi(v) - self.chi(2.0 * v)
    }

    /// Even, supported in `[-1/2, 1/2]`.
    pub fn phi(&self, t: f64) -> f64 {
        let a = t.abs();
        if a >= 0.5 {
            0.0
        } else {
            1.0 - self.chi(1.0 - a)
        }
    }

    fn quarter_step(s: f64) -> f64 {
        smooth_step((s + 0.25) * 2.0)
    }

    /// 1 on `|u| < 1/4`, 0 on `|u| > 3/4`.
    pub fn omega(&self, u: f64) -> f64 {
        Self::quarter_step(u + 0.5) - Self::quarter_step(u - 0.5)
    }

    /// `Σ_j ω(u - j n)`.
    pub fn omega_periodic(&self, u: f64, n: f64) -> f64 {
        let r = u.rem_euclid(n);
        self.omega(r) + self.omega(r - n)
    }

    /// `|φ(t) + Σ_k ψ(2^k (1 - t)) - 1|` for `t ∈ [0, 1)`.
    pub fn radial_partition_residual(&self, t: f64) -> f64 {
        let v = 1.0 - t;
        let mut s = self.phi(t);
        let mut k = 0;
        let mut x = v;
        while x <= 0.625 && k < 1100 {
            s += self.psi(x);
            x *= 2.0;
            k += 1;
        }
        (s - 1.0).abs()
    }

    /// `|Σ_l ω(x - l) - 1|`.
    pub fn angular_partition_residual(&self, x: f64) -> f64 {
        let base = x.floor() as i64;
        let s: f64 = (base - 2..=base + 2).map(|l| self.omega(x - l as f64)).sum();
        (s - 1.0).abs()
    }
}

/// Builds the cutoffs and checks both partitions of unity on a test grid.
pub fn build_cutoffs() -> Result<CutoffSet> {
    let c = CutoffSet;
    let mut worst: f64 = 0.0;
    for i in 0..4000 {
        let t = i as f64 / 4000.0;
        worst = worst.max(c.radial_partition_residual(t));
        worst = worst.max(c.angular_partition_residual(-2.0 + 4.0 * t));
    }
    for k in 0..40 {
        worst = worst.max(c.radial_partition_residual(1.0 - 0.375 * 0.5f64.powi(k)));
    }
    if worst > PARTITION {
        return Err(LabError::Construction(format!("partition residual {worst:e} exceeds {PARTITION:e}")));
    }
    Ok(c)
}

/// `⌊2^{k/2}⌋`.
pub fn arc_count(k: u32) -> i64 {
    let p = 1u64 << k;
    let mut r = (p as f64).sqrt() as u64;
    while r * r > p {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= p {
        r += 1;
    }
    r as i64
}

/// `(1 - |ξ|²)_+^λ`.
pub fn riesz_symbol(xi: [f64; 2], lambda: Cx) -> Cx {
    pow_complex(1.0 - (xi[0] * xi[0] + xi[1] * xi[1]), lambda)
}

/// `m₀₀(ξ) = φ(|ξ|)(1 - |ξ|²)^λ`.
pub fn eval_m00(xi: [f64; 2], lambda: Cx) -> Cx {
    let r = xi[0].hypot(xi[1]);
    let p = CutoffSet.phi(r);
    if p == 0.0 {
        return Cx::new(0.0, 0.0);
    }
    pow_complex(1.0 - r * r, lambda) * p
}

/// Radial profile of `m_k` in the variable `s = 2^k(1 - r)`.
fn mk_profile(s: f64, k: u32, lambda: Cx) -> Cx {
    let ps = CutoffSet.psi(s);
    if ps == 0.0 {
        return Cx::new(0.0, 0.0);
    }
    let r = 1.0 - s * 0.5f64.powi(k as i32);
    pow_complex(s, lambda) * pow_complex(1.0 + r, lambda) * ps
}

/// `m_k(ξ) = (2^k(1-|ξ|))^λ ψ(2^k(1-|ξ|)) (1+|ξ|)^λ`.
pub fn eval_mk(xi: [f64; 2], k: u32, lambda: Cx) -> Cx {
    let r = xi[0].hypot(xi[1]);
    if r >= 1.0 {
        return Cx::new(0.0, 0.0);
    }
    let s = (1.0 - r) * 2f64.powi(k as i32);
    mk_profile(s, k, lambda)
}

/// `m₀₀(ξ) + Σ_k 2^{-kλ} m_k(ξ)`.
pub fn reconstruct_symbol(xi: [f64; 2], lambda: Cx) -> Cx {
    let r = xi[0].hypot(xi[1]);
    let mut acc = eval_m00(xi, lambda);
    if r >= 1.0 {
        return acc;
    }
    let v = 1.0 - r;
    let mut k = 0u32;
    while v * 2f64.powi(k as i32) <= 0.625 && k < 1100 {
        let w = (-(k as f64) * std::f64::consts::LN_2 * lambda).exp();
        acc += w * eval_mk(xi, k, lambda);
        k += 1;
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrant {
    /// `x > 0, |y| < |x|`.
    A,
    B,
    C,
    D,
    /// Meets a diagonal.
    E,
}

/// One angular piece `m_{k,l}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrolocalPiece {
    pub k: u32,
    pub l: i64,
    pub lambda: Cx,
}

/// Angle of `ξ` in turns, in `(-1/2, 1/2]`.
pub fn turns(xi: [f64; 2]) -> f64 {
    xi[1].atan2(xi[0]) / (2.0 * PI)
}

fn wrap_turns(t: f64) -> f64 {
    let r = t.rem_euclid(1.0);
    if r > 0.5 {
        r - 1.0
    } else {
        r
    }
}

impl MicrolocalPiece {
    pub fn new(k: u32, l: i64, lambda: Cx) -> Self {
        let n = arc_count(k);
        let mut l = l.rem_euclid(n);
        if 2 * l > n {
            l -= n;
        }
        Self { k, l, lambda }
    }

    pub fn n(&self) -> i64 {
        arc_count(self.k)
    }

    pub fn delta(&self) -> f64 {
        0.5f64.powi(self.k as i32)
    }

    /// Arc centre angle in turns.
    pub fn center_turns(&self) -> f64 {
        self.l as f64 / self.n() as f64
    }

    /// `v_l`.
    pub fn direction(&self) -> [f64; 2] {
        let a = 2.0 * PI * self.center_turns();
        [a.cos(), a.sin()]
    }

    pub fn radial_range(&self) -> (f64, f64) {
        (1.0 - 0.625 * self.delta(), 1.0 - 0.125 * self.delta())
    }

    /// Membership in `Γ_{k,l}`: radial band and `|θ - l/n| < 1/n`.
    pub fn in_arc(&self, xi: [f64; 2]) -> bool {
        let r = xi[0].hypot(xi[1]);
        let (r0, r1) = self.radial_range();
        if r < r0 || r > r1 {
            return false;
        }
        (wrap_turns(turns(xi) - self.center_turns())).abs() * (self.n() as f64) < 1.0
    }

    /// Which of the five regions the arc `Γ_{k,l}` falls in.
    pub fn quadrant(&self) -> Quadrant {
        let n = self.n() as f64;
        let c = self.center_turns();
        for (q, centre) in [(Quadrant::A, 0.0), (Quadrant::C, 0.25), (Quadrant::B, 0.5), (Quadrant::D, -0.25)] {
            if wrap_turns(c - centre).abs() + 1.0 / n <= 0.125 {
                return q;
            }
        }
        Quadrant::E
    }

    pub fn is_case_a(&self) -> bool {
        self.quadrant() == Quadrant::A
    }

    /// `m_{k,l}(ξ) = m_k(ξ) ω(n θ - l)`.
    pub fn eval(&self, xi: [f64; 2]) -> Cx {
        let mk = eval_mk(xi, self.k, self.lambda);
        if mk == Cx::new(0.0, 0.0) {
            return mk;
        }
        let n = self.n() as f64;
        mk * CutoffSet.omega_periodic(n * turns(xi) - self.l as f64, n)
    }

    /// Value in the scaled polar variables `s = 2^k(1-r)`, `u = nθ - l`.
    pub fn eval_scaled(&self, s: f64, u: f64) -> Cx {
        let w = CutoffSet.omega_periodic(u, self.n() as f64);
        if w == 0.0 {
            return Cx::new(0.0, 0.0);
        }
        mk_profile(s, self.k, self.lambda) * w
    }
}

/// Signed labels of the case-(a) arcs at level `k`.
pub fn case_a_labels(k: u32) -> Vec<i64> {
    let n = arc_count(k);
    let lim = n / 2;
    (-lim..=lim)
        .filter(|&l| {
            let p = MicrolocalPiece::new(k, l, Cx::new(0.0, 0.0));
            p.l == l && p.is_case_a()
        })
        .collect()
}

/// Labels of all `n_k` arcs at level `k`.
pub fn all_labels(k: u32) -> Vec<i64> {
    let n = arc_count(k);
    let mut v: Vec<i64> = (0..n).map(|l| if 2 * l > n { l - n } else { l }).collect();
    v.sort_unstable();
    v
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionReport {
    pub points: usize,
    /// `max |m₀₀ + Σ 2^{-kλ} m_k - (1-|ξ|²)_+^λ|`.
    pub riesz_residual: f64,
    /// `max |Σ_l m_{k,l} - m_k|`.
    pub piece_residual: f64,
}

/// Both partition identities at `points` random frequencies per `λ` and `k`.
pub fn audit_partition(points: usize, lambdas: &[Cx], ks: &[u32], seed: u64) -> PartitionReport {
    let mut rng = rng::seeded(seed);
    let mut riesz: f64 = 0.0;
    for &lam in lambdas {
        for _ in 0..points {
            let r = rng::uniform(&mut rng, 0.0, 1.2);
            let a = rng::uniform(&mut rng, 0.0, 2.0 * PI);
            let xi = [r * a.cos(), r * a.sin()];
            riesz = riesz.max((reconstruct_symbol(xi, lam) - riesz_symbol(xi, lam)).norm());
        }
    }
    let mut piece: f64 = 0.0;
    for &k in ks {
        let labels = all_labels(k);
        for &lam in lambdas {
            let pts: Vec<[f64; 2]> = (0..points)
                .map(|_| {
                    let s = rng::uniform(&mut rng, 0.2, 0.7);
                    let r = 1.0 - s * 0.5f64.powi(k as i32);
                    let a = rng::uniform(&mut rng, 0.0, 2.0 * PI);
                    [r * a.cos(), r * a.sin()]
                })
                .collect();
            let worst = pts
                .par_iter()
                .map(|&xi| {
                    let sum: Cx = labels.iter().map(|&l| MicrolocalPiece::new(k, l, lam).eval(xi)).sum();
                    (sum - eval_mk(xi, k, lam)).norm()
                })
                .reduce(|| 0.0, f64::max);
            piece = piece.max(worst);
        }
    }
    PartitionReport { points, riesz_residual: riesz, piece_residual: piece }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivRow {
    pub alpha: u32,
    pub beta: u32,
    /// `sup |∂_r^α ∂_θ^β m_{k,l}| / ((1+|λ|)^α 2^{kα} 2^{kβ/2})`.
    pub constant: f64,
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Central finite differences of `m_{k,l}` in polar variables, normalized.
///
/// Differences are taken in `s = 2^k(1-r)` and `u = nθ - l`, then rescaled by
/// the chain rule, which avoids cancellation in `r` near 1 for large `k`.
pub fn verify_deriv_bounds(piece: &MicrolocalPiece, max_order: u32) -> Result<Vec<DerivRow>> {
    if max_order > 4 {
        return invalid("finite differences are only reliable up to order 4");
    }
    let hs = 2e-3;
    let hu = 2e-3;
    if piece.delta() * hs < 64.0 * f64::EPSILON {
        return invalid(format!("radial step underflows at k = {}", piece.k));
    }
    let n = piece.n() as f64;
    let angle_scale = n / 2f64.powf(piece.k as f64 / 2.0);
    let lam_scale = 1.0 + piece.lambda.norm();
    let ss: Vec<f64> = (0..96).map(|i| 0.22 + 0.43 * i as f64 / 95.0).collect();
    let us: Vec<f64> = (0..48).map(|i| -0.8 + 1.6 * i as f64 / 47.0).collect();
    let mut rows = Vec::new();
    for alpha in 0..=max_order {
        for beta in 0..=(max_order - alpha) {
            let sup = ss
                .par_iter()
                .map(|&s| {
                    let mut best: f64 = 0.0;
                    for &u in &us {
                        let mut acc = Cx::new(0.0, 0.0);
                        for i in 0..=alpha {
                            let ds = (alpha as f64 / 2.0 - i as f64) * hs;
                            let ci = binom(alpha, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
                            for j in 0..=beta {
                                let du = (beta as f64 / 2.0 - j as f64) * hu;
                                let cj = binom(beta, j) * if j % 2 == 0 { 1.0 } else { -1.0 };
                                acc += piece.eval_scaled(s + ds, u + du) * (ci * cj);
                            }
                        }
                        let d = acc.norm() / (hs.powi(alpha as i32) * hu.powi(beta as i32));
                        best = best.max(d);
                    }
                    best
                })
                .reduce(|| 0.0, f64::max);
            rows.push(DerivRow {
                alpha,
                beta,
                constant: sup * angle_scale.powi(beta as i32) / lam_scale.powi(alpha as i32),
            });
        }
    }
    Ok(rows)
}

/// Grid for the kernel in the piece's own frame: `ξ = (1 - 2^{-k}η₁) v_l + 2^{-k/2} η₂ v_l^⊥`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScaledKernelGrid {
    pub g1: usize,
    pub g2: usize,
    pub eta1_min: f64,
    pub eta1_len: f64,
    pub eta2_len: f64,
}

impl Default for ScaledKernelGrid {
    fn default() -> Self {
        Self { g1: 1792, g2: 1536, eta1_min: -1.0, eta1_len: 14.0, eta2_len: 12.0 }
    }
}

/// Kernel of `m_{k,l}` in the scaled variables `y`, where
/// `x = 2^k y₁ v_l + 2^{k/2} y₂ v_l^⊥` and `K̃(y) = 2^{3k/2} |F⁻¹[m_{k,l}](x)|`.
#[derive(Clone, Debug)]
pub struct ScaledKernel {
    pub grid: ScaledKernelGrid,
    /// Row-major `g1 × g2` moduli, row index for `y₁`.
    pub modulus: Vec<f64>,
    /// `Σ K̃ Δy` (complex), equal to `m_{k,l}(0) = 0`.
    pub mass: Cx,
}

impl ScaledKernel {
    pub fn dy(&self) -> (f64, f64) {
        (1.0 / self.grid.eta1_len, 1.0 / self.grid.eta2_len)
    }

    pub fn y(&self, i1: usize, i2: usize) -> [f64; 2] {
        let (d1, d2) = self.dy();
        [signed_freq(i1, self.grid.g1) as f64 * d1, signed_freq(i2, self.grid.g2) as f64 * d2]
    }

    /// `∫ |F⁻¹[m_{k,l}]|`, scale invariant.
    pub fn l1(&self) -> f64 {
        let (d1, d2) = self.dy();
        self.modulus.iter().sum::<f64>() * d1 * d2
    }

    pub fn peak(&self) -> f64 {
        self.modulus.iter().copied().fold(0.0, f64::max)
    }

    /// `sup K̃(y)(1 + |y₁| + |y₂|)³`.
    pub fn envelope_constant(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i1 in 0..self.grid.g1 {
            for i2 in 0..self.grid.g2 {
                let y = self.y(i1, i2);
                let w = (1.0 + y[0].abs() + y[1].abs()).powi(3);
                best = best.max(self.modulus[i1 * self.grid.g2 + i2] * w);
            }
        }
        best
    }

    /// Points where `K̃(y) > c (1+|y₁|+|y₂|)^{-3} + tol · peak`.
    pub fn envelope_violations(&self, c: f64, tol: f64) -> usize {
        let slack = tol * self.peak();
        let mut count = 0;
        for i1 in 0..self.grid.g1 {
            for i2 in 0..self.grid.g2 {
                let y = self.y(i1, i2);
                let env = c / (1.0 + y[0].abs() + y[1].abs()).powi(3);
                if self.modulus[i1 * self.grid.g2 + i2] > env + slack {
                    count += 1;
                }
            }
        }
        count
    }

    /// Fraction of `∫|K̃|` carried by the outer eighth of the window on
    /// either axis; a periodization diagnostic.
    pub fn edge_fraction(&self) -> f64 {
        let (g1, g2) = (self.grid.g1 as i64, self.grid.g2 as i64);
        let mut edge = 0.0;
        let mut total = 0.0;
        for i1 in 0..self.grid.g1 {
            for i2 in 0..self.grid.g2 {
                let v = self.modulus[i1 * self.grid.g2 + i2];
                total += v;
                let p1 = signed_freq(i1, self.grid.g1).abs();
                let p2 = signed_freq(i2, self.grid.g2).abs();
                if p1 * 8 > g1 * 3 || p2 * 8 > g2 * 3 {
                    edge += v;
                }
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }
}

/// Evaluates the symbol on the frame-adapted grid and transforms it.
pub fn scaled_kernel(piece: &MicrolocalPiece, grid: ScaledKernelGrid) -> Result<ScaledKernel> {
    let ScaledKernelGrid { g1, g2, eta1_min, eta1_len, eta2_len } = grid;
    if g1 < 16 || g2 < 16 {
        return invalid("kernel grid too small");
    }
    let k = piece.k as i32;
    let d1 = eta1_len / g1 as f64;
    let d2 = eta2_len / g2 as f64;
    let v = piece.direction();
    let vp = [-v[1], v[0]];
    let a1 = 0.5f64.powi(k);
    let a2 = 0.5f64.powf(k as f64 / 2.0);
    let mut buf: Vec<Cx> = (0..g1 * g2)
        .into_par_iter()
        .map(|idx| {
            let (i1, i2) = (idx / g2, idx % g2);
            let e1 = eta1_min + i1 as f64 * d1;
            let e2 = -eta2_len / 2.0 + i2 as f64 * d2;
            let c1 = 1.0 - a1 * e1;
            let c2 = a2 * e2;
            piece.eval([c1 * v[0] + c2 * vp[0], c1 * v[1] + c2 * vp[1]])
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let f1 = planner.plan_fft_forward(g1);
    let f2 = planner.plan_fft_inverse(g2);
    buf.par_chunks_mut(g2).for_each(|row| f2.process(row));
    let mut col = vec![Cx::new(0.0, 0.0); g1];
    for i2 in 0..g2 {
        for i1 in 0..g1 {
            col[i1] = buf[i1 * g2 + i2];
        }
        f1.process(&mut col);
        for i1 in 0..g1 {
            buf[i1 * g2 + i2] = col[i1];
        }
    }
    let jac = d1 * d2;
    // restore the phases of the window offsets so that Σ K̃ Δy samples η = 0
    let (dy1, dy2) = (1.0 / eta1_len, 1.0 / eta2_len);
    let mut mass = Cx::new(0.0, 0.0);
    for i1 in 0..g1 {
        let y1 = signed_freq(i1, g1) as f64 * dy1;
        for i2 in 0..g2 {
            let y2 = signed_freq(i2, g2) as f64 * dy2;
            let ph = Cx::from_polar(1.0, -2.0 * PI * (y1 * eta1_min + y2 * eta2_len / 2.0));
            mass += buf[i1 * g2 + i2] * ph;
        }
    }
    mass *= jac * dy1 * dy2;
    let modulus = buf.iter().map(|z| z.norm() * jac).collect();
    Ok(ScaledKernel { grid, modulus, mass })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelRow {
    pub k: u32,
    pub l: i64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub l1: f64,
    /// `l1 / (1 + |λ|)³`.
    pub l1_normalized: f64,
    /// `sup K̃ (1+|y|₁)³ / (1+|λ|)³`.
    pub envelope: f64,
    pub edge_fraction: f64,
    pub mass: f64,
}

pub fn kernel_row(piece: &MicrolocalPiece, grid: ScaledKernelGrid) -> Result<(KernelRow, ScaledKernel)> {
    let ker = scaled_kernel(piece, grid)?;
    let s3 = (1.0 + piece.lambda.norm()).powi(3);
    let l1 = ker.l1();
    Ok((
        KernelRow {
            k: piece.k,
            l: piece.l,
            lambda_re: piece.lambda.re,
            lambda_im: piece.lambda.im,
            l1,
            l1_normalized: l1 / s3,
            envelope: ker.envelope_constant() / s3,
            edge_fraction: ker.edge_fraction(),
            mass: ker.mass.norm(),
        },
        ker,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelAudit {
    pub rows: Vec<KernelRow>,
    /// Per `λ`: max/min of the normalized `L_1` norms over all rows.
    pub l1_ratio: Vec<(f64, f64, f64)>,
    /// Envelope constant fixed at the smallest `k` (doubled).
    pub envelope_reference: Vec<f64>,
    pub envelope_violations: usize,
}

/// Normalized kernel `L_1` norms for all case-(a) arcs, and the decay
/// envelope with its constant pinned at the smallest `k`.
pub fn audit_kernel_l1(ks: &[u32], lambdas: &[Cx], grid: ScaledKernelGrid, envelope_tol: f64) -> Result<KernelAudit> {
    if ks.is_empty() {
        return invalid("empty k list");
    }
    let kmin = *ks.iter().min().expect("nonempty");
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    let mut refs = Vec::new();
    let mut violations = 0;
    for &lam in lambdas {
        let s3 = (1.0 + lam.norm()).powi(3);
        let (_, ref_ker) = kernel_row(&MicrolocalPiece::new(kmin, 0, lam), grid)?;
        let c_ref = 2.0 * ref_ker.envelope_constant();
        refs.push(c_ref / s3);
        let mut vals = Vec::new();
        for &k in ks {
            for l in case_a_labels(k) {
                let (row, ker) = kernel_row(&MicrolocalPiece::new(k, l, lam), grid)?;
                violations += ker.envelope_violations(c_ref, envelope_tol);
                vals.push(row.l1_normalized);
                rows.push(row);
            }
        }
        ratios.push((lam.re, lam.im, crate::stats::max_min_ratio(&vals)));
    }
    Ok(KernelAudit { rows, l1_ratio: ratios, envelope_reference: refs, envelope_violations: violations })
}

/// Kernel on a square periodized box by inverse DFT of the sampled symbol.
///
/// Requires frequency spacing `1/L ≤ 2^{-k}/8` and a window `G/L ≥ 2`.
pub fn kernel_mkl(piece: &MicrolocalPiece, g: usize, box_l: f64) -> Result<OpGrid<f64>> {
    if 1.0 / box_l > piece.delta() / 8.0 {
        return invalid(format!("box side {box_l} does not resolve 2^-{} features", piece.k));
    }
    if (g as f64) / box_l < 2.0 {
        return invalid("frequency window must cover the unit disc");
    }
    let mut grid = OpGrid::<f64>::zeros(g, 1, Domain::Box { l: box_l })?;
    let vals: Vec<Cx> = (0..g * g)
        .into_par_iter()
        .map(|idx| {
            let xi = [signed_freq(idx / g, g) as f64 / box_l, signed_freq(idx % g, g) as f64 / box_l];
            piece.eval(xi)
        })
        .collect();
    // inverse unitary DFT carries 1/g; the Riemann sum needs (1/L)² and the
    // sample at index j sits at x = -L/2 + jL/g, a sign (-1)^{j1+j2} shift.
    let mut buf = vals;
    crate::optorus::fft2_inplace(&mut buf, g, true);
    let scale = g as f64 / (box_l * box_l);
    for i1 in 0..g {
        for i2 in 0..g {
            let sgn = if (i1 + i2) % 2 == 0 { 1.0 } else { -1.0 };
            let z = buf[i1 * g + i2];
            buf[i1 * g + i2] = z * (scale * sgn);
        }
    }
    // undo the half-window index shift
    let mut out = vec![Cx::new(0.0, 0.0); g * g];
    for i1 in 0..g {
        for i2 in 0..g {
            out[((i1 + g / 2) % g) * g + (i2 + g / 2) % g] = buf[i1 * g + i2];
        }
    }
    grid.raw_mut().copy_from_slice(&out);
    Ok(grid)
}

/// `∫|K|` of a box kernel.
pub fn box_kernel_l1(k: &OpGrid<f64>) -> f64 {
    k.raw().iter().map(|z| z.norm()).sum::<f64>() * k.cell_area()
}

/// Demodulated kernel `F⁻¹[m_{k,l}(· + c)](x)` at arbitrary points by a
/// direct Riemann sum over a Cartesian frequency grid of step `h`.
fn demodulated_kernel_at(piece: &MicrolocalPiece, centre: [f64; 2], h: f64, points: &[[f64; 2]]) -> Vec<Cx> {
    let delta = piece.delta();
    let n = piece.n() as f64;
    let half_arc = 2.0 * PI * 0.8 / n;
    let reach = half_arc + delta;
    let m = (reach / h).ceil() as i64;
    let mut nodes: Vec<([f64; 2], Cx)> = Vec::new();
    for a in -m..=m {
        for b in -m..=m {
            let q = [a as f64 * h, b as f64 * h];
            let v = piece.eval([q[0] + centre[0], q[1] + centre[1]]);
            if v.norm() > 0.0 {
                nodes.push((q, v * (h * h)));
            }
        }
    }
    points
        .par_iter()
        .map(|x| {
            nodes
                .iter()
                .map(|(q, w)| *w * Cx::from_polar(1.0, 2.0 * PI * (x[0] * q[0] + x[1] * q[1])))
                .sum()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RotationReport {
    pub k: u32,
    pub l: i64,
    pub points: usize,
    /// `max |K_l(x) - K_0(Ax)| / max |K_0|` after demodulation.
    pub relative_residual: f64,
}

/// Checks `F⁻¹[m_{k,l}](x) = F⁻¹[m_{k,0}](x·v_l, x·v_l^⊥)` on random points,
/// each side computed on its own unrotated frequency grid.
pub fn rotation_identity_check(piece: &MicrolocalPiece, points: usize, seed: u64) -> RotationReport {
    let base = MicrolocalPiece::new(piece.k, 0, piece.lambda);
    let v = piece.direction();
    let vp = [-v[1], v[0]];
    let rc = 1.0 - 0.375 * piece.delta();
    let c_l = [rc * v[0], rc * v[1]];
    let c_0 = [rc, 0.0];
    let scale_long = 2f64.powi(piece.k as i32);
    let scale_short = 2f64.powf(piece.k as f64 / 2.0);
    let mut r = rng::seeded(seed);
    let ys: Vec<[f64; 2]> = (0..points)
        .map(|_| [rng::uniform(&mut r, -0.3, 0.3), rng::uniform(&mut r, -1.0, 1.0)])
        .collect();
    let rotated: Vec<[f64; 2]> = ys.iter().map(|y| [y[0] * scale_long, y[1] * scale_short]).collect();
    let xs: Vec<[f64; 2]> = rotated
        .iter()
        .map(|p| [p[0] * v[0] + p[1] * vp[0], p[0] * v[1] + p[1] * vp[1]])
        .collect();
    let h = piece.delta() / 24.0;
    let kl = demodulated_kernel_at(piece, c_l, h, &xs);
    let k0 = demodulated_kernel_at(&base, c_0, h, &rotated);
    let peak = demodulated_kernel_at(&base, c_0, h, &[[0.0, 0.0]])[0].norm().max(k0.iter().map(|z| z.norm()).fold(0.0, f64::max));
    let worst = kl.iter().zip(&k0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    RotationReport { k: piece.k, l: piece.l, points, relative_residual: worst / peak }
}

/// Strip `S_{k,σ,υ} = R × [(40σ+υ)w, (40σ+40+υ)w]`, `w = 2^{-k/2}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StripAssignment {
    pub sigma: i64,
    pub upsilon: i64,
    /// `υ + 1 ∈ {1, …, 40}`.
    pub subfamily: usize,
    pub strip: [f64; 2],
    /// Widened projection `J̃_{k,l}`.
    pub widened: [f64; 2],
    /// `ξ₂`-projection `J_{k,l}` of the arc.
    pub projection: [f64; 2],
}

/// Strip containing `J̃_{k,l}` for a case-(a) arc.
pub fn strip_assign(k: u32, l: i64) -> Result<StripAssignment> {
    let piece = MicrolocalPiece::new(k, l, Cx::new(0.0, 0.0));
    if !piece.is_case_a() {
        return invalid(format!("arc ({k}, {l}) is not in case (a)"));
    }
    let n = piece.n() as f64;
    let w = 0.5f64.powf(k as f64 / 2.0);
    let d = piece.delta();
    let centre = (1.0 - 0.375 * d) * (2.0 * PI * l as f64 / n).sin();
    let widened = [centre - 10.0 * w, centre + 10.0 * w];
    let lo_a = 2.0 * PI * (l as f64 - 1.0) / n;
    let hi_a = 2.0 * PI * (l as f64 + 1.0) / n;
    let (r0, r1) = piece.radial_range();
    let cands = [r0 * lo_a.sin(), r1 * lo_a.sin(), r0 * hi_a.sin(), r1 * hi_a.sin()];
    let projection = [
        cands.iter().copied().fold(f64::INFINITY, f64::min),
        cands.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ];
    let t0 = (widened[0] / w).floor() as i64 - 10;
    let sigma = t0.div_euclid(40);
    let upsilon = t0.rem_euclid(40);
    let strip = [t0 as f64 * w, (t0 + 40) as f64 * w];
    if !(strip[0] <= widened[0] && widened[1] <= strip[1]) {
        return Err(LabError::Internal(format!("no strip contains the widened projection of ({k}, {l})")));
    }
    if !(widened[0] <= projection[0] && projection[1] <= widened[1]) {
        return Err(LabError::Internal(format!("widened projection misses the arc ({k}, {l})")));
    }
    Ok(StripAssignment { sigma, upsilon, subfamily: upsilon as usize + 1, strip, widened, projection })
}

/// Strips per subfamily; within one subfamily all strips are distinct.
pub fn strip_subfamilies(k: u32) -> Result<Vec<Vec<(i64, StripAssignment)>>> {
    let mut fams: Vec<Vec<(i64, StripAssignment)>> = vec![Vec::new(); 40];
    for l in case_a_labels(k) {
        let s = strip_assign(k, l)?;
        fams[s.subfamily - 1].push((l, s));
    }
    for f in &fams {
        let mut sig: Vec<i64> = f.iter().map(|(_, s)| s.sigma).collect();
        sig.sort_unstable();
        let before = sig.len();
        sig.dedup();
        if sig.len() != before {
            return Err(LabError::Internal(format!("duplicate strip inside one subfamily at k = {k}")));
        }
    }
    Ok(fams)
}

/// Intersection points of `|z| = a` and `|z - ξ| = b` (either side of `ξ`).
fn circle_pair(xi: [f64; 2], d: f64, a: f64, b: f64) -> Option<[[f64; 2]; 2]> {
    let t = (a * a - b * b + d * d) / (2.0 * d);
    let h2 = a * a - t * t;
    if h2 < 0.0 {
        return None;
    }
    let h = h2.sqrt();
    let u = [xi[0] / d, xi[1] / d];
    let p = [-u[1], u[0]];
    Some([[t * u[0] + h * p[0], t * u[1] + h * p[1]], [t * u[0] - h * p[0], t * u[1] - h * p[1]]])
}

/// Separating-axis test of a convex polygon against the open rectangle
/// `(x0, x1) × (y0, y1)` inflated by `eps`.
fn polygon_meets_rect(poly: &[[f64; 2]], rect: [f64; 4], eps: f64) -> bool {
    let [x0, x1, y0, y1] = [rect[0] - eps, rect[1] + eps, rect[2] - eps, rect[3] + eps];
    let (mut pminx, mut pmaxx, mut pminy, mut pmaxy) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in poly {
        pminx = pminx.min(p[0]);
        pmaxx = pmaxx.max(p[0]);
        pminy = pminy.min(p[1]);
        pmaxy = pmaxy.max(p[1]);
    }
    if pmaxx <= x0 || pminx >= x1 || pmaxy <= y0 || pminy >= y1 {
        return false;
    }
    let corners = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
    let m = poly.len();
    for i in 0..m {
        let a = poly[i];
        let b = poly[(i + 1) % m];
        let nrm = [b[1] - a[1], a[0] - b[0]];
        let proj = |q: [f64; 2]| nrm[0] * q[0] + nrm[1] * q[1];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in poly {
            lo = lo.min(proj(*p));
            hi = hi.max(proj(*p));
        }
        let (mut rlo, mut rhi) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in corners {
            rlo = rlo.min(proj(c));
            rhi = rhi.max(proj(c));
        }
        if rhi <= lo || rlo >= hi {
            return false;
        }
    }
    true
}

fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Case-(a) pairs `(l, l')` with `|l - l'| > threshold` and
/// `ξ ∈ Γ̃_{k,l} + Γ_{k,l'}` (i.e. `ξ = b - a`, `a ∈ Γ_{k,l}`, `b ∈ Γ_{k,l'}`).
///
/// For such `ξ` the point `b` lies in the lens `A ∩ (ξ + A)` of two thin
/// annuli. Each lens is the image of `[r₀,r₁]²` under the circle-intersection
/// map; its corners are mapped to the angle pair `(arg b, arg(b - ξ))` and the
/// convex hull, inflated well beyond the second-order curvature error, is
/// tested against the arc rectangles. The inflation only adds pairs.
pub fn overlap_pairs(k: u32, xi: [f64; 2], threshold: i64) -> Vec<(i64, i64)> {
    let n = arc_count(k);
    let nf = n as f64;
    let delta = 0.5f64.powi(k as i32);
    let (r0, r1) = (1.0 - 0.625 * delta, 1.0 - 0.125 * delta);
    let lim = case_a_labels(k);
    let (lmin, lmax) = match (lim.first(), lim.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Vec::new(),
    };
    if lmax - lmin <= threshold {
        return Vec::new();
    }
    let d = xi[0].hypot(xi[1]);
    let sep = (threshold - 1).max(0) as f64 / nf;
    let d_min = 2.0 * r0 * (PI * sep.min(0.5)).sin();
    if d < d_min || d > 2.0 * r1 {
        return Vec::new();
    }
    let mut lens: [Vec<[f64; 2]>; 2] = [Vec::new(), Vec::new()];
    for &a in &[r0, r1] {
        for &b in &[r0, r1] {
            match circle_pair(xi, d, a, b) {
                Some(pts) => {
                    for (side, z) in pts.iter().enumerate() {
                        let alpha = turns(*z);
                        let beta = turns([z[0] - xi[0], z[1] - xi[1]]);
                        lens[side].push([alpha, beta]);
                    }
                }
                None => return Vec::new(),
            }
        }
    }
    let eps = 1e-6 / nf + 64.0 * delta * delta;
    let mut out = Vec::new();
    for poly in lens.iter() {
        // both angles must lie in the case-(a) window to matter
        let hull = convex_hull(poly.clone());
        let (mut amin, mut amax, mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            amin = amin.min(p[0]);
            amax = amax.max(p[0]);
            bmin = bmin.min(p[1]);
            bmax = bmax.max(p[1]);
        }
        if amax - amin > 0.25 || bmax - bmin > 0.25 {
            continue;
        }
        let lp_lo = ((amin - eps) * nf).floor() as i64 - 1;
        let lp_hi = ((amax + eps) * nf).ceil() as i64 + 1;
        let l_lo = ((bmin - eps) * nf).floor() as i64 - 1;
        let l_hi = ((bmax + eps) * nf).ceil() as i64 + 1;
        for lp in lp_lo.max(lmin)..=lp_hi.min(lmax) {
            for l in l_lo.max(lmin)..=l_hi.min(lmax) {
                if (l - lp).abs() <= threshold {
                    continue;
                }
                let rect = [(lp as f64 - 1.0) / nf, (lp as f64 + 1.0) / nf, (l as f64 - 1.0) / nf, (l as f64 + 1.0) / nf];
                if polygon_meets_rect(&hull, rect, eps) && !out.contains(&(l, lp)) {
                    out.push((l, lp));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn overlap_count(k: u32, xi: [f64; 2], threshold: i64) -> usize {
    overlap_pairs(k, xi, threshold).len()
}

/// Random point of `Γ_{k,l}`.
pub fn sample_arc(k: u32, l: i64, rng: &mut LabRng) -> [f64; 2] {
    let n = arc_count(k) as f64;
    let delta = 0.5f64.powi(k as i32);
    let r = rng::uniform(rng, 1.0 - 0.625 * delta, 1.0 - 0.125 * delta);
    let t = (l as f64 + rng::uniform(rng, -1.0, 1.0)) / n;
    let a = 2.0 * PI * t;
    [r * a.cos(), r * a.sin()]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverlapAudit {
    pub k: u32,
    pub threshold: i64,
    pub samples: usize,
    /// Number of admissible ordered pairs; zero means the audit is vacuous.
    pub admissible_pairs: usize,
    pub max_count: usize,
    pub mean_count: f64,
    /// Largest `max(|l - m|, |l' - m'|)` between pairs counted at one `ξ`.
    pub max_spread: i64,
}

/// Samples `ξ` from the sets `Γ_{l'} - Γ_l` of random admissible pairs (half
/// exactly, half uniformly in the rectangle `R(l', l)`) and counts overlaps.
pub fn audit_overlap(k: u32, samples: usize, threshold: i64, seed: u64) -> OverlapAudit {
    let labels = case_a_labels(k);
    let pairs: Vec<(i64, i64)> = labels
        .iter()
        .flat_map(|&l| labels.iter().filter(move |&&lp| (l - lp).abs() > threshold).map(move |&lp| (l, lp)))
        .collect();
    if pairs.is_empty() {
        return OverlapAudit { k, threshold, samples, admissible_pairs: 0, max_count: 0, mean_count: 0.0, max_spread: 0 };
    }
    let mut r = rng::seeded(seed);
    let xis: Vec<[f64; 2]> = (0..samples)
        .map(|i| {
            let (l, lp) = pairs[(r.random::<u64>() % pairs.len() as u64) as usize];
            if i % 2 == 0 {
                let a = sample_arc(k, l, &mut r);
                let b = sample_arc(k, lp, &mut r);
                [b[0] - a[0], b[1] - a[1]]
            } else {
                let w = geometry_rectangle(k, lp, l);
                let s = rng::uniform(&mut r, -1.0, 1.0) * w.half_length;
                let t = rng::uniform(&mut r, -1.0, 1.0) * w.half_width;
                [w.w[0] + s * w.axis[0] - t * w.axis[1], w.w[1] + s * w.axis[1] + t * w.axis[0]]
            }
        })
        .collect();
    let results: Vec<(usize, i64)> = xis
        .par_iter()
        .map(|&xi| {
            let ps = overlap_pairs(k, xi, threshold);
            let mut spread = 0;
            for a in &ps {
                for b in &ps {
                    spread = spread.max((a.0 - b.0).abs().max((a.1 - b.1).abs()));
                }
            }
            (ps.len(), spread)
        })
        .collect();
    let max_count = results.iter().map(|r| r.0).max().unwrap_or(0);
    let mean = results.iter().map(|r| r.0 as f64).sum::<f64>() / samples.max(1) as f64;
    let max_spread = results.iter().map(|r| r.1).max().unwrap_or(0);
    OverlapAudit { k, threshold, samples, admissible_pairs: pairs.len(), max_count, mean_count: mean, max_spread }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometryRect {
    /// `w(l,l') = e^{2πil/n} - e^{2πil'/n}`.
    pub w: [f64; 2],
    /// Unit vector along `w`.
    pub axis: [f64; 2],
    /// `100 δ^{1/2}`.
    pub half_length: f64,
    /// `90 |l - l'| δ`.
    pub half_width: f64,
}

pub fn geometry_rectangle(k: u32, l: i64, lp: i64) -> GeometryRect {
    let n = arc_count(k) as f64;
    let delta = 0.5f64.powi(k as i32);
    let a = 2.0 * PI * l as f64 / n;
    let b = 2.0 * PI * lp as f64 / n;
    let w = [a.cos() - b.cos(), a.sin() - b.sin()];
    let norm = w[0].hypot(w[1]);
    let axis = if norm > 0.0 { [w[0] / norm, w[1] / norm] } else { [1.0, 0.0] };
    GeometryRect { w, axis, half_length: 100.0 * delta.sqrt(), half_width: 90.0 * (l - lp).abs() as f64 * delta }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometryWitness {
    pub rect: GeometryRect,
    pub samples: usize,
    pub contained: usize,
    /// Largest normalized coordinate `max(|s|/half_length, |t|/half_width)`.
    pub max_extent: f64,
}

/// Samples `a - b` with `a ∈ Γ_l`, `b ∈ Γ_{l'}` and tests membership in `R(l,l')`.
pub fn geometry_witness(k: u32, l: i64, lp: i64, samples: usize, seed: u64) -> GeometryWitness {
    let rect = geometry_rectangle(k, l, lp);
    let mut r = rng::seeded(seed);
    let mut contained = 0;
    let mut ext: f64 = 0.0;
    for _ in 0..samples {
        let a = sample_arc(k, l, &mut r);
        let b = sample_arc(k, lp, &mut r);
        let e = [a[0] - b[0] - rect.w[0], a[1] - b[1] - rect.w[1]];
        let s = e[0] * rect.axis[0] + e[1] * rect.axis[1];
        let t = -e[0] * rect.axis[1] + e[1] * rect.axis[0];
        let m = if rect.half_width > 0.0 {
            (s.abs() / rect.half_length).max(t.abs() / rect.half_width)
        } else {
            f64::INFINITY
        };
        ext = ext.max(m);
        if m <= 1.0 {
            contained += 1;
        }
    }
    GeometryWitness { rect, samples, contained, max_extent: ext }
}

/// Even bump on the line: 1 on `|t| ≤ 1/2`, 0 on `|t| ≥ 3/2`, radially
/// decreasing, normalized to unit mass (its raw mass is exactly 2).
pub fn line_bump(t: f64) -> f64 {
    0.5 * (1.0 - smooth_step(t.abs() - 0.5))
}

/// Tabulated `ψ̂(s) = ∫ line_bump(t) e^{-2πist} dt` with Hermite
/// interpolation, plus constants for certified tail bounds.
pub struct BumpTransform {
    ds: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    smax: f64,
    /// `sup |ψ̂'| ≤ 2π ∫|t|ψ`.
    pub slope_bound: f64,
    /// `(n, ‖ψ^{(n)}‖₁)` upper estimates, `|ψ̂(s)| ≤ K_n / (2π|s|)^n`.
    pub derivative_norms: Vec<(i32, f64)>,
}

impl BumpTransform {
    fn build() -> Self {
        let dt = 1.0 / 4096.0;
        let half = 6144usize;
        let p = 1usize << 22;
        let mut a = vec![Cx::new(0.0, 0.0); p];
        let mut b = vec![Cx::new(0.0, 0.0); p];
        for j in 0..=half {
            let t = j as f64 * dt;
            let v = line_bump(t) * dt;
            a[j] = Cx::new(v, 0.0);
            b[j] = Cx::new(-2.0 * PI * t * v, 0.0);
            if j > 0 {
                a[p - j] = Cx::new(v, 0.0);
                b[p - j] = Cx::new(2.0 * PI * t * v, 0.0);
            }
        }
        let mut planner = FftPlanner::<f64>::new();
        let f = planner.plan_fft_forward(p);
        f.process(&mut a);
        f.process(&mut b);
        let ds = 1.0 / (p as f64 * dt);
        let smax = 256.0;
        let m = (smax / ds) as usize + 1;
        // ψ̂'(s) = ∫ (-2πit) ψ e^{-2πist}; with b holding -2πtψ this is i·b̂.
        let values: Vec<f64> = a[..m].iter().map(|z| z.re).collect();
        let slopes: Vec<f64> = b[..m].iter().map(|z| -z.im).collect();
        let slope_bound = 2.0 * PI * (0..=half).map(|j| 2.0 * j as f64 * dt * line_bump(j as f64 * dt) * dt).sum::<f64>();
        let derivative_norms = [2, 4, 6]
            .iter()
            .map(|&n| {
                let h = 1.0 / 128.0;
                let steps = (1.6 / h) as i64;
                let mut s = 0.0;
                for i in -steps..=steps {
                    let t = i as f64 * h;
                    let mut acc = 0.0;
                    for q in 0..=n {
                        let c = binom(n as u32, q as u32) * if q % 2 == 0 { 1.0 } else { -1.0 };
                        acc += c * line_bump(t + (n as f64 / 2.0 - q as f64) * h);
                    }
                    s += (acc / h.powi(n)).abs() * h;
                }
                (n, 2.0 * s)
            })
            .collect();
        Self { ds, values, slopes, smax, slope_bound, derivative_norms }
    }

    pub fn get() -> &'static BumpTransform {
        static CELL: OnceLock<BumpTransform> = OnceLock::new();
        CELL.get_or_init(Self::build)
    }

    pub fn smax(&self) -> f64 {
        self.smax
    }

    /// `ψ̂(s)`; zero beyond the table (see [`Self::bound`]).
    pub fn eval(&self, s: f64) -> f64 {
        let a = s.abs();
        if a >= self.smax {
            return 0.0;
        }
        let x = a / self.ds;
        let i = x.floor() as usize;
        let t = x - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.ds, self.slopes[i + 1] * self.ds);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1
    }

    /// Upper bound for `|ψ̂(s')|`, `|s'| ≥ |s|`.
    pub fn bound(&self, s: f64) -> f64 {
        let a = s.abs();
        let mut b: f64 = 1.0;
        for &(n, kn) in &self.derivative_norms {
            b = b.min(kn / (2.0 * PI * a).powi(n));
        }
        b
    }
}

/// `e_m^l = (1, l/2^m)` and `Γ_l = {ξ : |⟨ξ/|ξ|, e_m^l⟩| ≤ c 2^{-m}}`.
pub fn in_sector(m: u32, l: i64, xi: [f64; 2], c: f64) -> bool {
    let r = xi[0].hypot(xi[1]);
    if r == 0.0 {
        return true;
    }
    let e = [1.0, l as f64 / 2f64.powi(m as i32)];
    ((xi[0] * e[0] + xi[1] * e[1]) / r).abs() <= c * 0.5f64.powi(m as i32)
}

/// Sector constant; makes `Γ₁, …, Γ_{2^{m-1}-1}` pairwise disjoint.
pub const SECTOR_C: f64 = 0.25;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiplierSum {
    pub value: f64,
    /// Certified bound on everything left out (both `j` tails, table range).
    pub tail_bound: f64,
    pub j_range: (i32, i32),
}

/// `Σ_j Σ_{0≤l<2^{m-1}} |ψ̂(2^{j+m}⟨e^{2l+1},ξ⟩) - ψ̂(2^{j+m}⟨e^{2l},ξ⟩)|² χ_{Γ^c_{2l+1} ∩ Γ^c_{2l}}(ξ)`.
pub fn multiplier_sum_bound(m: u32, xi: [f64; 2]) -> Result<MultiplierSum> {
    if m < 2 {
        return invalid("multiplier sum needs m >= 2");
    }
    let r = xi[0].hypot(xi[1]);
    if !(r > 0.0) || !r.is_finite() {
        return invalid("ξ must be finite and nonzero");
    }
    let tf = BumpTransform::get();
    let half = 1i64 << (m - 1);
    let scale_m = 2f64.powi(m as i32);
    let active: Vec<(f64, f64)> = (0..half)
        .filter(|&l| !in_sector(m, 2 * l + 1, xi, SECTOR_C) && !in_sector(m, 2 * l, xi, SECTOR_C))
        .map(|l| {
            let e1 = xi[0] + xi[1] * (2 * l + 1) as f64 / scale_m;
            let e0 = xi[0] + xi[1] * (2 * l) as f64 / scale_m;
            (scale_m * e1, scale_m * e0)
        })
        .collect();
    let count = active.len() as f64;
    if active.is_empty() {
        return Ok(MultiplierSum { value: 0.0, tail_bound: 0.0, j_range: (0, 0) });
    }
    // low tail: |ψ̂(a) - ψ̂(b)| ≤ sup|ψ̂'| |a - b|, a - b = 2^j ξ₂
    let d1 = tf.slope_bound;
    let budget = SERIES_TAIL / 4.0;
    let mut j_lo = 0i32;
    while count * (d1 * xi[1].abs()).powi(2) * 4f64.powi(j_lo) / 3.0 > budget {
        j_lo -= 1;
    }
    // high tail: all arguments exceed 2^j c |ξ| in modulus
    let floor_s = SECTOR_C * r;
    let high = |j: i32| -> f64 {
        let mut s = 0.0;
        for jj in j..j + 200 {
            let b = tf.bound(2f64.powi(jj) * floor_s);
            let t = count * 4.0 * b * b;
            s += t;
            if t < 1e-300 {
                break;
            }
        }
        s
    };
    let mut j_hi = j_lo;
    while high(j_hi) > budget {
        j_hi += 1;
    }
    let mut value = 0.0;
    let mut table_err = 0.0;
    let mut j_end = j_hi;
    for j in j_lo..j_hi {
        let p = 2f64.powi(j);
        let mut term = 0.0;
        for &(a, b) in &active {
            let (sa, sb) = (p * a, p * b);
            let d = tf.eval(sa) - tf.eval(sb);
            term += d * d;
            // values beyond the table are read as 0; bound the error of the square
            let e: f64 = [sa, sb].iter().filter(|s| s.abs() >= tf.smax()).map(|&s| tf.bound(s)).sum();
            if e > 0.0 {
                table_err += e * (2.0 * d.abs() + e);
            }
        }
        value += term;
        if term < SERIES_TERM && p * floor_s > tf.smax() {
            j_end = j + 1;
            break;
        }
    }
    let low_tail = count * (d1 * xi[1].abs()).powi(2) * 4f64.powi(j_lo) / 3.0;
    Ok(MultiplierSum { value, tail_bound: low_tail + high(j_end) + table_err, j_range: (j_lo, j_end) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiplierSumRow {
    pub m: u32,
    pub sup: f64,
    pub max_tail: f64,
}

/// Sup of the multiplier sum over `samples` random unit `ξ`, per `m`.
pub fn audit_multiplier_sum(ms: &[u32], samples: usize, seed: u64) -> Result<Vec<MultiplierSumRow>> {
    let mut r = rng::seeded(seed);
    let xis: Vec<[f64; 2]> = (0..samples)
        .map(|_| {
            let a = rng::uniform(&mut r, 0.0, 2.0 * PI);
            [a.cos(), a.sin()]
        })
        .collect();
    let mut rows = Vec::new();
    for &m in ms {
        let res: Result<Vec<MultiplierSum>> = xis.par_iter().map(|&xi| multiplier_sum_bound(m, xi)).collect();
        let res = res?;
        rows.push(MultiplierSumRow {
            m,
            sup: res.iter().map(|s| s.value).fold(0.0, f64::max),
            max_tail: res.iter().map(|s| s.tail_bound).fold(0.0, f64::max),
        });
    }
    Ok(rows)
}

/// Checks pairwise disjointness of `Γ₁, …, Γ_{2^{m-1}-1}` through their
/// angular intervals.
pub fn sectors_disjoint(m: u32, c: f64) -> bool {
    let sm = 2f64.powi(m as i32);
    let count = (1i64 << (m - 1)) - 1;
    let mut iv: Vec<(f64, f64)> = (1..=count)
        .map(|l| {
            let e = [1.0, l as f64 / sm];
            let ne = e[0].hypot(e[1]);
            // ξ' ⟂ e direction, half opening asin(c 2^{-m} / |e|)
            let centre = e[1].atan2(e[0]) + PI / 2.0;
            let h = (c / sm / ne).asin();
            (centre - h, centre + h)
        })
        .collect();
    iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    iv.windows(2).all(|w| w[0].1 < w[1].0)
}
