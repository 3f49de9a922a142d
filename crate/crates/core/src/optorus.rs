//! Operator-valued functions sampled on `G × G` grids over the torus `[0,1)²`
//! or a periodized box `[-L/2, L/2)²`, with entrywise unitary DFT, scalar
//! Fourier multipliers, Bochner-Riesz means and `L_p(L_∞ ⊗ M_n)` norms.

use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::ncmat::{check_exponent, MatElem};
use crate::rng::{self, LabRng};
use crate::scalar::{lit, pow_complex, to_f64, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// `[0,1)²`, integer frequencies.
    Torus,
    /// `[-L/2, L/2)²` periodized, frequencies `k / L`.
    Box { l: f64 },
}

impl Domain {
    pub fn side(&self) -> f64 {
        match self {
            Domain::Torus => 1.0,
            Domain::Box { l } => *l,
        }
    }

    pub fn origin(&self) -> f64 {
        match self {
            Domain::Torus => 0.0,
            Domain::Box { l } => -l / 2.0,
        }
    }
}

/// `G × G` samples of `n × n` matrices. Storage is sample-major (row index
/// `i1` for the first coordinate), each sample row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct OpGrid<T: Real> {
    g: usize,
    n: usize,
    domain: Domain,
    data: Vec<C<T>>,
}

/// Scalar Fourier multiplier evaluated at physical frequencies.
#[derive(Clone)]
pub struct MultiplierFn {
    pub tag: String,
    f: Arc<dyn Fn([f64; 2]) -> Complex<f64> + Send + Sync>,
}

impl std::fmt::Debug for MultiplierFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MultiplierFn({})", self.tag)
    }
}

impl MultiplierFn {
    pub fn new(tag: impl Into<String>, f: impl Fn([f64; 2]) -> Complex<f64> + Send + Sync + 'static) -> Self {
        Self { tag: tag.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, xi: [f64; 2]) -> Complex<f64> {
        (self.f)(xi)
    }

    pub fn one() -> Self {
        Self::new("one", |_| Complex::new(1.0, 0.0))
    }

    /// `(1 - |ξ/R|²)_+^λ`.
    pub fn bochner_riesz(r: f64, lambda: Complex<f64>) -> Self {
        Self::new(format!("bochner-riesz(R={r},lambda={lambda})"), move |xi| {
            let s = (xi[0] * xi[0] + xi[1] * xi[1]) / (r * r);
            pow_complex(1.0 - s, lambda)
        })
    }

    /// `m(ξ / R)`.
    pub fn dilate(&self, r: f64) -> Self {
        let inner = self.clone();
        Self::new(format!("{}(./{r})", self.tag), move |xi| inner.eval([xi[0] / r, xi[1] / r]))
    }

    pub fn product(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(format!("{}*{}", self.tag, other.tag), move |xi| a.eval(xi) * b.eval(xi))
    }
}

pub fn is_power_of_two(g: usize) -> bool {
    g > 0 && g & (g - 1) == 0
}

/// Signed frequency of DFT index `k` on a grid of side `g`.
#[inline]
pub fn signed_freq(k: usize, g: usize) -> i64 {
    if k < g / 2 {
        k as i64
    } else {
        k as i64 - g as i64
    }
}

/// DFT index of a signed frequency.
#[inline]
pub fn freq_index(m: i64, g: usize) -> usize {
    m.rem_euclid(g as i64) as usize
}

/// In-place 2D DFT of a `g × g` row-major plane. The forward transform uses
/// `e^{-2πi k·j/g}`; both directions carry the unitary factor `1/g`.
pub fn fft2_inplace<T: Real>(buf: &mut [C<T>], g: usize, inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let fft = if inverse { planner.plan_fft_inverse(g) } else { planner.plan_fft_forward(g) };
    let mut scratch = vec![C::zero(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    transpose_square(buf, g);
    fft.process_with_scratch(buf, &mut scratch);
    transpose_square(buf, g);
    let s = lit::<T>(1.0 / g as f64);
    for z in buf.iter_mut() {
        *z = *z * s;
    }
}

pub(crate) fn transpose_square<T: Copy>(buf: &mut [T], g: usize) {
    const B: usize = 32;
    for bi in (0..g).step_by(B) {
        for bj in (bi..g).step_by(B) {
            for i in bi..(bi + B).min(g) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + B).min(g) {
                    buf.swap(i * g + j, j * g + i);
                }
            }
        }
    }
}

impl<T: Real> OpGrid<T> {
    pub fn zeros(g: usize, n: usize, domain: Domain) -> Result<Self> {
        if !is_power_of_two(g) {
            return invalid(format!("grid side {g} is not a power of two"));
        }
        if n == 0 {
            return invalid("matrix dimension must be positive");
        }
        if let Domain::Box { l } = domain {
            if !(l > 0.0 && l.is_finite()) {
                return invalid("box side must be positive");
            }
        }
        Ok(Self { g, n, domain, data: vec![C::zero(); g * g * n * n] })
    }

    pub fn from_raw(g: usize, n: usize, domain: Domain, data: Vec<C<T>>) -> Result<Self> {
        let mut out = Self::zeros(g, n, domain)?;
        if data.len() != out.data.len() {
            return invalid("payload length does not match header");
        }
        out.data = data;
        Ok(out)
    }

    /// Sample `f` at the grid points.
    pub fn from_fn(g: usize, n: usize, domain: Domain, mut f: impl FnMut([f64; 2]) -> MatElem<T>) -> Result<Self> {
        let mut out = Self::zeros(g, n, domain)?;
        for i1 in 0..g {
            for i2 in 0..g {
                let m = f(out.coords(i1, i2));
                if m.dim() != n {
                    return invalid("sample dimension mismatch");
                }
                out.set_sample(i1, i2, &m);
            }
        }
        Ok(out)
    }

    pub fn from_scalar_fn(g: usize, domain: Domain, mut f: impl FnMut([f64; 2]) -> C<T>) -> Result<Self> {
        let mut out = Self::zeros(g, 1, domain)?;
        for i1 in 0..g {
            for i2 in 0..g {
                let x = out.coords(i1, i2);
                out.data[i1 * g + i2] = f(x);
            }
        }
        Ok(out)
    }

    /// Constant grid.
    pub fn constant(g: usize, domain: Domain, value: &MatElem<T>) -> Result<Self> {
        Self::from_fn(g, value.dim(), domain, |_| value.clone())
    }

    pub fn side(&self) -> usize {
        self.g
    }

    pub fn mat_dim(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn raw(&self) -> &[C<T>] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    pub fn spacing(&self) -> f64 {
        self.domain.side() / self.g as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing().powi(2)
    }

    pub fn coords(&self, i1: usize, i2: usize) -> [f64; 2] {
        let h = self.spacing();
        let o = self.domain.origin();
        [o + i1 as f64 * h, o + i2 as f64 * h]
    }

    /// Physical frequency attached to DFT index `(k1, k2)`.
    pub fn frequency(&self, k1: usize, k2: usize) -> [f64; 2] {
        let l = self.domain.side();
        [signed_freq(k1, self.g) as f64 / l, signed_freq(k2, self.g) as f64 / l]
    }

    pub fn sample(&self, i1: usize, i2: usize) -> MatElem<T> {
        let nn = self.n * self.n;
        let off = (i1 * self.g + i2) * nn;
        MatElem::from_vec(self.n, self.data[off..off + nn].to_vec()).expect("consistent layout")
    }

    pub fn set_sample(&mut self, i1: usize, i2: usize, m: &MatElem<T>) {
        let nn = self.n * self.n;
        let off = (i1 * self.g + i2) * nn;
        self.data[off..off + nn].copy_from_slice(m.as_slice());
    }

    pub fn samples(&self) -> impl Iterator<Item = MatElem<T>> + '_ {
        let nn = self.n * self.n;
        self.data.chunks(nn).map(move |c| MatElem::from_vec(self.n, c.to_vec()).expect("consistent layout"))
    }

    pub fn map_samples(&self, f: impl Fn(&MatElem<T>) -> MatElem<T> + Sync) -> Self {
        let nn = self.n * self.n;
        let mut out = self.clone();
        out.data
            .par_chunks_mut(nn)
            .zip(self.data.par_chunks(nn))
            .for_each(|(dst, src)| {
                let m = f(&MatElem::from_vec(self.n, src.to_vec()).expect("consistent layout"));
                dst.copy_from_slice(m.as_slice());
            });
        out
    }

    /// Plane of matrix entry `(r, c)`.
    pub fn plane(&self, r: usize, c: usize) -> Vec<C<T>> {
        let nn = self.n * self.n;
        let idx = r * self.n + c;
        self.data.iter().skip(idx).step_by(nn).copied().collect()
    }

    fn write_plane(&mut self, r: usize, c: usize, plane: &[C<T>]) {
        let nn = self.n * self.n;
        let idx = r * self.n + c;
        for (s, &v) in plane.iter().enumerate() {
            self.data[s * nn + idx] = v;
        }
    }

    pub(crate) fn transform_planes(&self, f: impl Fn(&mut Vec<C<T>>) + Sync) -> Self {
        let n = self.n;
        let planes: Vec<Vec<C<T>>> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let mut p = self.plane(idx / n, idx % n);
                f(&mut p);
                p
            })
            .collect();
        let mut out = self.clone();
        for (idx, p) in planes.iter().enumerate() {
            out.write_plane(idx / n, idx % n, p);
        }
        out
    }

    /// Entrywise unitary DFT. The result keeps the domain metadata; sample
    /// `(k1, k2)` holds frequency [`Self::frequency`]`(k1, k2)`.
    pub fn op_fft(&self) -> Self {
        let g = self.g;
        self.transform_planes(|p| fft2_inplace(p, g, false))
    }

    pub fn op_ifft(&self) -> Self {
        let g = self.g;
        self.transform_planes(|p| fft2_inplace(p, g, true))
    }

    /// Multiplier values on the frequency grid.
    pub fn symbol_on_grid(&self, m: &MultiplierFn) -> Result<Vec<Complex<f64>>> {
        let g = self.g;
        let mut vals = Vec::with_capacity(g * g);
        for k1 in 0..g {
            for k2 in 0..g {
                let v = m.eval(self.frequency(k1, k2));
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return invalid(format!("multiplier {} is not finite on the grid", m.tag));
                }
                vals.push(v);
            }
        }
        Ok(vals)
    }

    /// `F̂(ξ) ↦ m(ξ) F̂(ξ)` on every matrix entry.
    pub fn apply_multiplier(&self, m: &MultiplierFn) -> Result<Self> {
        let sym = self.symbol_on_grid(m)?;
        self.apply_symbol(&sym)
    }

    pub fn apply_symbol(&self, sym: &[Complex<f64>]) -> Result<Self> {
        let g = self.g;
        if sym.len() != g * g {
            return invalid("symbol size mismatch");
        }
        let symt: Vec<C<T>> = sym.iter().map(|z| Complex::new(lit(z.re), lit(z.im))).collect();
        Ok(self.transform_planes(|p| {
            fft2_inplace(p, g, false);
            for (z, s) in p.iter_mut().zip(&symt) {
                *z = *z * *s;
            }
            fft2_inplace(p, g, true);
        }))
    }

    /// Bochner-Riesz mean `B_R^λ`.
    pub fn bochner_riesz_grid(&self, r: f64, lambda: Complex<f64>) -> Result<Self> {
        if !(r > 0.0) {
            return invalid("Bochner-Riesz radius must be positive");
        }
        if lambda.re < 0.0 {
            return invalid("Bochner-Riesz order needs Re λ >= 0");
        }
        self.apply_multiplier(&MultiplierFn::bochner_riesz(r, lambda))
    }

    /// `(Σ_x τ|F(x)|^p · cellArea)^{1/p}`; `p = ∞` gives the max operator norm.
    pub fn lp_norm_grid(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        let nn = self.n * self.n;
        if p.is_infinite() {
            let m = self
                .data
                .par_chunks(nn)
                .map(|c| {
                    if self.n == 1 {
                        to_f64(c[0].norm())
                    } else {
                        to_f64(MatElem::from_vec(self.n, c.to_vec()).expect("layout").op_norm())
                    }
                })
                .reduce(|| 0.0, f64::max);
            return Ok(m);
        }
        let sum: f64 = self
            .data
            .par_chunks(nn)
            .map(|c| {
                if self.n == 1 {
                    to_f64(c[0].norm()).powf(p)
                } else if p == 2.0 {
                    c.iter().map(|z| to_f64(z.norm_sqr())).sum::<f64>() / self.n as f64
                } else {
                    to_f64(MatElem::from_vec(self.n, c.to_vec()).expect("layout").schatten_pow(p))
                }
            })
            .sum();
        Ok((sum * self.cell_area()).powf(1.0 / p))
    }

    /// `L_2` norm computed from the unitary DFT coefficients.
    pub fn coeff_l2_norm(&self) -> f64 {
        let hat = self.op_fft();
        let s: f64 = hat.data.iter().map(|z| to_f64(z.norm_sqr())).sum::<f64>() / self.n as f64;
        (s * self.cell_area()).sqrt()
    }

    /// Matrix Fourier coefficient `∫ F(x) e^{-2πi m·x} dx` of a torus grid
    /// at integer frequency `m` (trapezoid rule, exact for band-limited grids).
    pub fn torus_coefficient(&self, m: [i64; 2]) -> Result<MatElem<T>> {
        if self.domain != Domain::Torus {
            return invalid("torus_coefficient needs a torus grid");
        }
        let g = self.g;
        let mut acc = vec![Complex::<f64>::zero(); self.n * self.n];
        for i1 in 0..g {
            for i2 in 0..g {
                let ph = -((m[0] * i1 as i64 + m[1] * i2 as i64).rem_euclid(g as i64) as f64) / g as f64;
                let e = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * ph);
                let off = (i1 * g + i2) * self.n * self.n;
                for (a, z) in acc.iter_mut().zip(&self.data[off..off + self.n * self.n]) {
                    *a += Complex::new(to_f64(z.re), to_f64(z.im)) * e;
                }
            }
        }
        let s = 1.0 / (g * g) as f64;
        MatElem::from_vec(self.n, acc.iter().map(|z| Complex::new(lit(z.re * s), lit(z.im * s))).collect())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| to_f64((*a - *b).norm())).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| to_f64(a.norm())).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = *a - *b;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = *a + *b;
        }
        out
    }

    pub fn scale(&self, s: C<T>) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = *a * s;
        }
        out
    }

    /// Entrywise adjoint of every sample.
    pub fn adjoint(&self) -> Self {
        self.map_samples(|m| m.adjoint())
    }

    /// Highest `|frequency|_∞` (in index units) carrying relative energy above `tol`.
    pub fn bandwidth(&self, tol: f64) -> i64 {
        let hat = self.op_fft();
        let g = self.g;
        let nn = self.n * self.n;
        let total: f64 = hat.data.iter().map(|z| to_f64(z.norm_sqr())).sum();
        let mut bw = 0;
        for k1 in 0..g {
            for k2 in 0..g {
                let off = (k1 * g + k2) * nn;
                let e: f64 = hat.data[off..off + nn].iter().map(|z| to_f64(z.norm_sqr())).sum();
                if e > tol * tol * total.max(f64::MIN_POSITIVE) {
                    bw = bw.max(signed_freq(k1, g).abs()).max(signed_freq(k2, g).abs());
                }
            }
        }
        bw
    }
}

/// One row of a ratio sweep.
#[derive(Clone, Debug, Serialize)]
pub struct RatioRow {
    pub family_id: String,
    pub r: f64,
    pub ratio: f64,
    pub error_norm: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepReport {
    pub rows: Vec<RatioRow>,
    pub warnings: Vec<String>,
}

/// `‖B_R^λ f‖_p / ‖f‖_p` and `‖B_R^λ f - f‖_p` for each member and radius.
pub fn riesz_ratio_sweep<T: Real>(
    family: &[(String, OpGrid<T>)],
    p: f64,
    lambda: Complex<f64>,
    radii: &[f64],
) -> Result<SweepReport> {
    let mut rep = SweepReport::default();
    for (id, f) in family {
        let nf = f.lp_norm_grid(p)?;
        if !(nf > 0.0) {
            rep.warnings.push(format!("member {id} has zero norm; skipped"));
            continue;
        }
        for &r in radii {
            let b = f.bochner_riesz_grid(r, lambda)?;
            let ratio = b.lp_norm_grid(p)? / nf;
            let err = b.sub(f).lp_norm_grid(p)?;
            rep.rows.push(RatioRow { family_id: id.clone(), r, ratio, error_norm: err });
        }
    }
    Ok(rep)
}

/// Applies `{m(k)}_{k ∈ Z²}` to a torus grid directly and through a periodized
/// box of `periods` unit cells, then compares on `[0,1)²`.
pub fn transference_check<T: Real>(m: &MultiplierFn, f: &OpGrid<T>, periods: usize) -> Result<f64> {
    if f.domain() != Domain::Torus {
        return invalid("transference_check expects a torus grid");
    }
    if !is_power_of_two(periods) {
        return invalid("number of periods must be a power of two");
    }
    let g = f.side();
    let bw = f.bandwidth(1e-10);
    if bw >= (g / 4) as i64 {
        return Err(LabError::InvalidInput(format!(
            "grid is not band-limited to half the window (bandwidth {bw}, side {g})"
        )));
    }
    let direct = f.apply_multiplier(m)?;

    let gb = g * periods;
    let l = periods as f64;
    let n = f.mat_dim();
    let mut boxed = OpGrid::<T>::zeros(gb, n, Domain::Box { l })?;
    // box sample j sits at -L/2 + j/G; its torus representative is (j - gb/2) mod g
    for j1 in 0..gb {
        for j2 in 0..gb {
            let t1 = (j1 + gb - gb / 2) % g;
            let t2 = (j2 + gb - gb / 2) % g;
            boxed.set_sample(j1, j2, &f.sample(t1, t2));
        }
    }
    let boxed = boxed.apply_multiplier(m)?;
    let mut worst = 0.0f64;
    for i1 in 0..g {
        for i2 in 0..g {
            let a = direct.sample(i1, i2);
            let b = boxed.sample(i1 + gb / 2, i2 + gb / 2);
            worst = worst.max(to_f64(a.sub(&b).max_abs()));
        }
    }
    Ok(worst)
}

/// Seeded members of the sweep families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Unimodular modes on the two width-2 lattice shells straddling `|m| = R`,
    /// signed so the shells cancel near the origin while the inner shell alone
    /// focuses.
    Focusing,
    /// Random matrix coefficients on a low-frequency disc.
    RandomMatrix,
    /// Scalar extremizer (focusing sum) placed on the diagonal of `M_n`.
    DiagonalEmbedding,
    /// Smooth low-frequency trigonometric polynomial.
    Smooth,
}

impl std::str::FromStr for FamilyKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "focusing" => Ok(Self::Focusing),
            "random-matrix" => Ok(Self::RandomMatrix),
            "diagonal-embedding" => Ok(Self::DiagonalEmbedding),
            "smooth" => Ok(Self::Smooth),
            _ => Err(LabError::Usage(format!("unknown family {s}"))),
        }
    }
}

/// Torus grid built from integer-frequency matrix coefficients.
pub fn grid_from_coeffs<T: Real>(g: usize, n: usize, coeffs: &[([i64; 2], MatElem<T>)]) -> Result<OpGrid<T>> {
    let mut hat = OpGrid::<T>::zeros(g, n, Domain::Torus)?;
    let scale = lit::<T>(g as f64);
    for (m, c) in coeffs {
        if m[0] < -(g as i64) / 2 || m[0] >= g as i64 / 2 || m[1] < -(g as i64) / 2 || m[1] >= g as i64 / 2 {
            return invalid(format!("frequency {m:?} outside the window of side {g}"));
        }
        let (k1, k2) = (freq_index(m[0], g), freq_index(m[1], g));
        let cur = hat.sample(k1, k2);
        hat.set_sample(k1, k2, &cur.add(&c.scale_real(scale)));
    }
    Ok(hat.op_ifft())
}

fn shell_focusing_coeffs(r: f64) -> Vec<([i64; 2], f64)> {
    const W: f64 = 2.0;
    let rr = (r + W).ceil() as i64 + 1;
    let mut out = Vec::new();
    for a in -rr..=rr {
        for b in -rr..=rr {
            let d = ((a * a + b * b) as f64).sqrt();
            if d > r - W && d <= r {
                out.push(([a, b], 1.0));
            } else if d > r && d <= r + W {
                out.push(([a, b], -1.0));
            }
        }
    }
    out
}

/// One family member for radius parameter `r` (ignored by R-independent kinds).
pub fn family_member<T: Real>(kind: FamilyKind, g: usize, n: usize, r: f64, seed: u64) -> Result<OpGrid<T>> {
    let mut rng: LabRng = rng::seeded(seed);
    match kind {
        FamilyKind::Focusing => {
            let coeffs: Vec<([i64; 2], MatElem<T>)> = shell_focusing_coeffs(r)
                .into_iter()
                .map(|(m, s)| (m, MatElem::scalar(n, Complex::new(lit(s), T::zero()))))
                .collect();
            grid_from_coeffs(g, n, &coeffs)
        }
        FamilyKind::DiagonalEmbedding => {
            let coeffs: Vec<([i64; 2], MatElem<T>)> = shell_focusing_coeffs(r)
                .into_iter()
                .map(|(m, s)| {
                    let d: Vec<T> = (0..n).map(|i| lit(s * (1.0 + i as f64) / n as f64)).collect();
                    (m, MatElem::from_real_diag(&d))
                })
                .collect();
            grid_from_coeffs(g, n, &coeffs)
        }
        FamilyKind::RandomMatrix => {
            let rad = (g / 8).max(1) as i64;
            let mut coeffs = Vec::new();
            for a in -rad..=rad {
                for b in -rad..=rad {
                    let d2 = (a * a + b * b) as f64;
                    if d2 <= (rad * rad) as f64 {
                        let w = 1.0 / (1.0 + d2).powf(0.75);
                        coeffs.push(([a, b], rng::gaussian_matrix::<T>(&mut rng, n).scale_real(lit(w))));
                    }
                }
            }
            grid_from_coeffs(g, n, &coeffs)
        }
        FamilyKind::Smooth => {
            let mut coeffs = Vec::new();
            for a in -3i64..=3 {
                for b in -3i64..=3 {
                    let w = (-((a * a + b * b) as f64) / 4.0).exp();
                    coeffs.push(([a, b], rng::gaussian_matrix::<T>(&mut rng, n).scale_real(lit(w))));
                }
            }
            grid_from_coeffs(g, n, &coeffs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_grid(g: usize, n: usize, seed: u64) -> OpGrid<f64> {
        let mut r = rng::seeded(seed);
        OpGrid::from_fn(g, n, Domain::Torus, |_| rng::gaussian_matrix(&mut r, n)).unwrap()
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(OpGrid::<f64>::zeros(12, 1, Domain::Torus).is_err());
    }

    #[test]
    fn delta_transforms_to_constant() {
        let mut f = OpGrid::<f64>::zeros(8, 2, Domain::Torus).unwrap();
        f.set_sample(0, 0, &MatElem::identity(2));
        let hat = f.op_fft();
        for s in hat.samples() {
            assert!(s.sub(&MatElem::identity(2).scale_real(1.0 / 8.0)).max_abs() < 1e-15);
        }
    }

    #[test]
    fn fft_unitary_and_roundtrip() {
        let f = rand_grid(64, 3, 1);
        let hat = f.op_fft();
        let a: f64 = f.raw().iter().map(|z| z.norm_sqr()).sum();
        let b: f64 = hat.raw().iter().map(|z| z.norm_sqr()).sum();
        assert!((a - b).abs() / a < 1e-10);
        assert!(hat.op_ifft().max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn multiplier_identity_and_mean() {
        let f = rand_grid(16, 2, 2);
        assert!(f.apply_multiplier(&MultiplierFn::one()).unwrap().max_abs_diff(&f) < 1e-12);
        let mean = f.torus_coefficient([0, 0]).unwrap();
        let delta0 = MultiplierFn::new("delta0", |xi| {
            if xi[0] == 0.0 && xi[1] == 0.0 {
                Complex::new(1.0, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        let out = f.apply_multiplier(&delta0).unwrap();
        for s in out.samples() {
            assert!(s.sub(&mean).max_abs() < 1e-12);
        }
    }

    #[test]
    fn multiplier_composition() {
        let f = rand_grid(32, 2, 3);
        let m1 = MultiplierFn::bochner_riesz(7.0, Complex::new(0.5, 0.0));
        let m2 = MultiplierFn::new("gauss", |xi| Complex::new((-(xi[0] * xi[0] + xi[1] * xi[1]) / 30.0).exp(), 0.1));
        let two = f.apply_multiplier(&m1).unwrap().apply_multiplier(&m2).unwrap();
        let one = f.apply_multiplier(&m1.product(&m2)).unwrap();
        assert!(two.max_abs_diff(&one) < 1e-10);
    }

    #[test]
    fn non_finite_multiplier_rejected() {
        let f = rand_grid(8, 1, 4);
        let bad = MultiplierFn::new("inf", |_| Complex::new(f64::INFINITY, 0.0));
        assert!(f.apply_multiplier(&bad).is_err());
    }

    #[test]
    fn riesz_single_mode_and_constant() {
        let g = 16;
        let c = MatElem::<f64>::from_real_diag(&[1.0, 2.0]);
        let f = OpGrid::constant(g, Domain::Torus, &c).unwrap();
        assert!(f.bochner_riesz_grid(3.0, Complex::new(0.7, 0.0)).unwrap().max_abs_diff(&f) < 1e-12);
        let mode = grid_from_coeffs(g, 2, &[([1, 0], c.clone())]).unwrap();
        let out = mode.bochner_riesz_grid(2.0, Complex::new(1.0, 0.0)).unwrap();
        assert!(out.max_abs_diff(&mode.scale(Complex::new(0.75, 0.0))) < 1e-12);
    }

    #[test]
    fn sharp_ball_truncation_oracle() {
        let g = 32;
        let mut r = rng::seeded(9);
        let mut coeffs = Vec::new();
        for a in -6i64..=6 {
            for b in -6i64..=6 {
                coeffs.push(([a, b], rng::gaussian_matrix::<f64>(&mut r, 2)));
            }
        }
        let f = grid_from_coeffs(g, 2, &coeffs).unwrap();
        // R² = 20.5 lies strictly between lattice shells
        let rad = 20.5f64.sqrt();
        let out = f.bochner_riesz_grid(rad, Complex::new(0.0, 0.0)).unwrap();
        let kept: Vec<_> = coeffs.iter().filter(|(m, _)| ((m[0] * m[0] + m[1] * m[1]) as f64) < 20.5).cloned().collect();
        let oracle = grid_from_coeffs(g, 2, &kept).unwrap();
        assert!(out.max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn norms_basic() {
        let id = OpGrid::constant(8, Domain::Torus, &MatElem::<f64>::identity(3)).unwrap();
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((id.lp_norm_grid(p).unwrap() - 1.0).abs() < 1e-12);
        }
        let vals: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = OpGrid::<f64>::from_scalar_fn(8, Domain::Torus, |x| {
            let i = (x[0] * 8.0).round() as usize * 8 + (x[1] * 8.0).round() as usize;
            Complex::new(vals[i], 0.0)
        })
        .unwrap();
        let oracle = (vals.iter().map(|v| v.abs().powi(3)).sum::<f64>() / 64.0).powf(1.0 / 3.0);
        assert!((s.lp_norm_grid(3.0).unwrap() - oracle).abs() < 1e-12);
        let f = rand_grid(16, 3, 5);
        assert!((f.lp_norm_grid(2.0).unwrap() - f.coeff_l2_norm()).abs() < 1e-10);
    }

    #[test]
    fn transference_trivial_and_riesz() {
        let mut r = rng::seeded(12);
        let mut coeffs = Vec::new();
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                coeffs.push(([a, b], rng::gaussian_matrix::<f64>(&mut r, 2)));
            }
        }
        let f = grid_from_coeffs(32, 2, &coeffs).unwrap();
        assert!(transference_check(&MultiplierFn::one(), &f, 2).unwrap() < 1e-12);
        let br = MultiplierFn::bochner_riesz(2.5, Complex::new(0.5, 0.3));
        assert!(transference_check(&br, &f, 4).unwrap() < 1e-8);
        let wide = rand_grid(16, 1, 7);
        assert!(transference_check(&br, &wide, 2).is_err());
    }

    #[test]
    fn dilation_matches_box_experiment() {
        let f = rand_grid(16, 2, 8);
        let m = MultiplierFn::bochner_riesz(1.0, Complex::new(0.5, 0.0));
        let r = 4.0;
        let torus = f.apply_multiplier(&m.dilate(r)).unwrap();
        let boxed = OpGrid::from_raw(16, 2, Domain::Box { l: r }, f.raw().to_vec()).unwrap();
        let boxed = boxed.apply_multiplier(&m).unwrap();
        assert!(torus.raw().iter().zip(boxed.raw()).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn p2_ratios_bounded() {
        let fam = vec![("a".to_string(), rand_grid(16, 2, 10)), ("z".to_string(), OpGrid::zeros(16, 2, Domain::Torus).unwrap())];
        let rep = riesz_ratio_sweep(&fam, 2.0, Complex::new(0.3, 1.0), &[2.0, 4.0, 8.0]).unwrap();
        assert_eq!(rep.warnings.len(), 1);
        assert!(rep.rows.iter().all(|r| r.ratio <= 1.0 + 1e-10));
    }
}
