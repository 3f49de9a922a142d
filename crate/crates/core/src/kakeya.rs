//! Directional and Kakeya averages on periodic grids, their smoothed and
//! lacunary variants, the scalar Kakeya maximal function and the experiments
//! built on it.
//!
//! Kernels live in pixel units: offset `d = (d₁, d₂)` is measured in grid
//! cells along the `i₁` and `i₂` axes, and an operator with kernel `w` acts as
//! `Kf(x) = Σ_d w_d f(x - d)` with periodic wrap.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::multilab::{in_sector, line_bump, BumpTransform, SECTOR_C};
use crate::ncmat::MatElem;
use crate::optorus::{fft2_inplace, signed_freq, transpose_square, Domain, OpGrid};
use crate::rng;
use crate::scalar::{lit, Real};
use crate::stats::{linear_fit, LinearFit};

/// Real periodic field in pixel units, row-major over `(i₁, i₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub g: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(g: usize) -> Self {
        Self { g, data: vec![0.0; g * g] }
    }

    /// `f(d₁, d₂)` at signed pixel offsets from the centre sample `(0, 0)`.
    pub fn from_offsets(g: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(g);
        for i1 in 0..g {
            for i2 in 0..g {
                out.data[i1 * g + i2] = f(signed_freq(i1, g) as f64, signed_freq(i2, g) as f64);
            }
        }
        out
    }

    pub fn at(&self, i1: i64, i2: i64) -> f64 {
        let g = self.g as i64;
        self.data[(i1.rem_euclid(g) * g + i2.rem_euclid(g)) as usize]
    }

    pub fn l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.data.iter().zip(&o.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Real part of the scalar grid; errors for matrix-valued grids.
    pub fn from_grid<T: Real>(f: &OpGrid<T>) -> Result<Self> {
        if f.mat_dim() != 1 {
            return invalid("scalar field expected (matrix dimension 1)");
        }
        Ok(Self { g: f.side(), data: f.raw().iter().map(|z| crate::scalar::to_f64(z.re)).collect() })
    }

    pub fn to_grid<T: Real>(&self, domain: Domain) -> Result<OpGrid<T>> {
        OpGrid::from_raw(self.g, 1, domain, self.data.iter().map(|&v| Complex::new(lit(v), T::zero())).collect())
    }

    /// Image under the dihedral element `e ∈ 0..8` acting on offsets about the centre.
    pub fn dihedral(&self, e: u8) -> Self {
        let g = self.g as i64;
        let mut out = Self::zeros(self.g);
        for i1 in 0..g {
            for i2 in 0..g {
                let (a, b) = dihedral_map(e, i1, i2);
                out.data[(i1 * g + i2) as usize] = self.at(a, b);
            }
        }
        out
    }

    pub fn is_dihedral_symmetric(&self) -> bool {
        (1..8).all(|e| self.dihedral(e) == *self)
    }
}

/// `x ↦ g x` for the eight symmetries of the square, on integer offsets.
pub fn dihedral_map(e: u8, a: i64, b: i64) -> (i64, i64) {
    match e {
        0 => (a, b),
        1 => (-a, b),
        2 => (a, -b),
        3 => (-a, -b),
        4 => (b, a),
        5 => (-b, a),
        6 => (b, -a),
        _ => (-b, -a),
    }
}

fn dihedral_inverse(e: u8) -> u8 {
    match e {
        5 => 6,
        6 => 5,
        x => x,
    }
}

fn dihedral_vec(e: u8, v: [f64; 2]) -> [f64; 2] {
    let [a, b] = v;
    match e {
        0 => [a, b],
        1 => [-a, b],
        2 => [a, -b],
        3 => [-a, -b],
        4 => [b, a],
        5 => [-b, a],
        6 => [b, -a],
        _ => [-b, -a],
    }
}

/// Positive convolution kernel with integer offsets.
#[derive(Clone, Debug, Default)]
pub struct SparseKernel {
    pub taps: Vec<(i64, i64, f64)>,
}

impl SparseKernel {
    pub fn mass(&self) -> f64 {
        self.taps.iter().map(|t| t.2).sum()
    }

    fn normalized(mut self) -> Self {
        let m = self.mass();
        for t in &mut self.taps {
            t.2 /= m;
        }
        self
    }

    fn from_map(map: std::collections::HashMap<(i64, i64), f64>) -> Self {
        let mut taps: Vec<(i64, i64, f64)> = map.into_iter().filter(|e| e.1 != 0.0).map(|((a, b), w)| (a, b, w)).collect();
        taps.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        Self { taps }
    }

    /// Bilinear splat of weighted points.
    pub fn splat(points: impl Iterator<Item = ([f64; 2], f64)>) -> Self {
        let mut map = std::collections::HashMap::new();
        for (p, w) in points {
            let (f1, f2) = (p[0].floor(), p[1].floor());
            let (t1, t2) = (p[0] - f1, p[1] - f2);
            let (a, b) = (f1 as i64, f2 as i64);
            for (da, db, ww) in [(0, 0, (1.0 - t1) * (1.0 - t2)), (1, 0, t1 * (1.0 - t2)), (0, 1, (1.0 - t1) * t2), (1, 1, t1 * t2)] {
                if ww > 0.0 {
                    *map.entry((a + da, b + db)).or_insert(0.0) += w * ww;
                }
            }
        }
        Self::from_map(map)
    }

    /// Direct periodic application.
    pub fn apply(&self, f: &Field) -> Field {
        let mut out = Field::zeros(f.g);
        out.data.par_chunks_mut(f.g).enumerate().for_each(|(i1, row)| {
            for (i2, v) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for &(a, b, w) in &self.taps {
                    acc += w * f.at(i1 as i64 - a, i2 as i64 - b);
                }
                *v = acc;
            }
        });
        out
    }

    /// Dense periodic image on a `g × g` grid.
    pub fn dense(&self, g: usize) -> Vec<f64> {
        let gi = g as i64;
        let mut out = vec![0.0; g * g];
        for &(a, b, w) in &self.taps {
            out[(a.rem_euclid(gi) * gi + b.rem_euclid(gi)) as usize] += w;
        }
        out
    }

    pub fn dihedral(&self, e: u8) -> Self {
        Self {
            taps: self
                .taps
                .iter()
                .map(|&(a, b, w)| {
                    let (x, y) = dihedral_map(e, a, b);
                    (x, y, w)
                })
                .collect(),
        }
    }
}

/// Periodic convolution of every matrix entry of `f` with a real kernel.
pub fn convolve_grid<T: Real>(f: &OpGrid<T>, k: &SparseKernel) -> OpGrid<T> {
    let g = f.side();
    let mut kh: Vec<Complex<T>> = k.dense(g).into_iter().map(|v| Complex::new(lit(v), T::zero())).collect();
    fft2_inplace(&mut kh, g, false);
    let s: T = lit(g as f64);
    f.transform_planes(|p| {
        fft2_inplace(p, g, false);
        for (z, w) in p.iter_mut().zip(&kh) {
            *z = *z * *w * s;
        }
        fft2_inplace(p, g, true);
    })
}

fn pixel_scale<T: Real>(f: &OpGrid<T>) -> f64 {
    1.0 / f.spacing()
}

/// Kernel of `M_h^e`: trapezoid nodes on `[-h, h]` (pixel units) spaced at
/// most a quarter cell, bilinearly splatted.
pub fn directional_kernel(e: [f64; 2], h: f64) -> Result<SparseKernel> {
    if !(h >= 1.0) {
        return invalid(format!("directional average at h = {h} cells is below grid resolution"));
    }
    let ne = e[0].hypot(e[1]);
    if !(ne > 0.0) {
        return invalid("direction must be nonzero");
    }
    let e = [e[0] / ne, e[1] / ne];
    let steps = (8.0 * h).ceil() as usize;
    let dt = 2.0 * h / steps as f64;
    let pts = (0..=steps).map(|i| {
        let t = -h + i as f64 * dt;
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 } * dt / (2.0 * h);
        ([e[0] * t, e[1] * t], w)
    });
    Ok(SparseKernel::splat(pts))
}

/// `M_h^e F(x) = (2h)^{-1} ∫_{-h}^{h} F(x - e y) dy` with `h` in physical units.
pub fn directional_avg<T: Real>(f: &OpGrid<T>, e: [f64; 2], h: f64) -> Result<OpGrid<T>> {
    let k = directional_kernel(e, h * pixel_scale(f))?;
    Ok(convolve_grid(f, &k))
}

/// Rectangle of eccentricity `n`, long axis along `(n, k)` (then mapped by
/// the dihedral element `octant`), short side `h` and long side `n·h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectSpec {
    pub n: u32,
    pub k: u32,
    pub h: f64,
    #[serde(default)]
    pub octant: u8,
}

impl RectSpec {
    pub fn new(n: u32, k: u32, h: f64) -> Self {
        Self { n, k, h, octant: 0 }
    }

    pub fn area(&self) -> f64 {
        self.n as f64 * self.h * self.h
    }

    pub fn long_side(&self) -> f64 {
        self.n as f64 * self.h
    }

    /// Unit vector along the long side.
    pub fn axis(&self) -> [f64; 2] {
        let u = [self.n as f64, self.k as f64];
        let nu = u[0].hypot(u[1]);
        dihedral_vec(self.octant, [u[0] / nu, u[1] / nu])
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k >= self.n.max(1) && !(self.n == 1 && self.k == 0) {
            return invalid(format!("direction index {} out of range for N = {}", self.k, self.n));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return invalid("rectangle scale must be positive");
        }
        Ok(())
    }
}

fn clip_half_plane(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    // keeps ⟨p, n⟩ ≤ c
    let mut out = Vec::with_capacity(poly.len() + 2);
    let m = poly.len();
    for i in 0..m {
        let a = poly[i];
        let b = poly[(i + 1) % m];
        let da = n[0] * a[0] + n[1] * a[1] - c;
        let db = n[0] * b[0] + n[1] * b[1] - c;
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn polygon_area(p: &[[f64; 2]]) -> f64 {
    let m = p.len();
    if m < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..m {
        let a = p[i];
        let b = p[(i + 1) % m];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s.abs()
}

/// Exact area of `[c - 1/2, c + 1/2]² ∩ {|⟨p,u⟩| ≤ a, |⟨p,u^⊥⟩| ≤ b}`.
fn cell_overlap(c: [f64; 2], u: [f64; 2], a: f64, b: f64) -> f64 {
    let up = [-u[1], u[0]];
    let s = c[0] * u[0] + c[1] * u[1];
    let t = c[0] * up[0] + c[1] * up[1];
    let ru = 0.5 * (u[0].abs() + u[1].abs());
    let rp = 0.5 * (up[0].abs() + up[1].abs());
    if s.abs() - ru >= a || t.abs() - rp >= b {
        return 0.0;
    }
    if s.abs() + ru <= a && t.abs() + rp <= b {
        return 1.0;
    }
    let mut poly = vec![
        [c[0] - 0.5, c[1] - 0.5],
        [c[0] + 0.5, c[1] - 0.5],
        [c[0] + 0.5, c[1] + 0.5],
        [c[0] - 0.5, c[1] + 0.5],
    ];
    for (n, lim) in [(u, a), ([-u[0], -u[1]], a), (up, b), ([-up[0], -up[1]], b)] {
        poly = clip_half_plane(&poly, n, lim);
        if poly.is_empty() {
            return 0.0;
        }
    }
    polygon_area(&poly)
}

/// Kernel of `K_R` for a rectangle in pixel units: area fraction of each cell
/// inside `R`. Exact for the piecewise-constant extension of the samples,
/// so rectangles thinner than a cell are allowed.
pub fn rect_kernel(rect: &RectSpec) -> Result<SparseKernel> {
    rect.validate()?;
    let u = rect.axis();
    let a = rect.long_side() / 2.0;
    let b = rect.h / 2.0;
    let ex = u[0].abs() * a + u[1].abs() * b + 1.0;
    let ey = u[1].abs() * a + u[0].abs() * b + 1.0;
    let (mx, my) = (ex.ceil() as i64, ey.ceil() as i64);
    let mut taps = Vec::new();
    for d1 in -mx..=mx {
        for d2 in -my..=my {
            let w = cell_overlap([d1 as f64, d2 as f64], u, a, b);
            if w > 0.0 {
                taps.push((d1, d2, w));
            }
        }
    }
    let area = rect.area();
    for t in &mut taps {
        t.2 /= area;
    }
    Ok(SparseKernel { taps })
}

/// Axis-aligned square kernel of side `s` centred at the origin.
pub fn cube_kernel(s: f64) -> Result<SparseKernel> {
    rect_kernel(&RectSpec::new(1, 0, s))
}

/// `K_R F(x) = |R|^{-1} ∫_R F(x - y) dy`, with `h` in physical units.
pub fn kakeya_avg<T: Real>(f: &OpGrid<T>, rect: &RectSpec) -> Result<OpGrid<T>> {
    let mut r = *rect;
    r.h *= pixel_scale(f);
    if r.long_side() > f.side() as f64 {
        return invalid("rectangle longer than the periodic grid");
    }
    Ok(convolve_grid(f, &rect_kernel(&r)?))
}

/// Node set for `t ↦ ψ_h(t)` on the support `|t| ≤ 3h/2`, as `(t, weight)`.
fn psi_nodes(h: f64, spacing: f64) -> Vec<(f64, f64)> {
    let steps = ((3.0 * h / spacing).ceil() as usize).max(8);
    let dt = 3.0 / steps as f64;
    (0..=steps)
        .filter_map(|i| {
            let tau = -1.5 + i as f64 * dt;
            let w = line_bump(tau) * dt;
            (w > 0.0).then_some((h * tau, w))
        })
        .collect()
}

/// Kernel of `M_h^{k,N} f(x) = ∫ f(x - u t) ψ_h(t) dt`, `u = (N, k)` in
/// pixel units, normalized to unit mass.
pub fn m_directional_kernel(k: u32, n: u32, h: f64) -> Result<SparseKernel> {
    if !(h > 0.0) || n == 0 {
        return invalid("scale and eccentricity must be positive");
    }
    let u = [n as f64, k as f64];
    let nu = u[0].hypot(u[1]);
    // node spacing in the t variable is chosen so the splat points are a
    // quarter cell apart; the τ-grid depends only on h|u| so dilated pairs
    // (h, u) and (h/2, 2u) produce identical node sets.
    let nodes = psi_nodes(h * nu, 0.25);
    let pts = nodes.into_iter().map(|(s, w)| {
        let t = s / nu;
        ([u[0] * t, u[1] * t], w)
    });
    Ok(SparseKernel::splat(pts).normalized())
}

/// Kernel of `A_h^{k,N} f(x) = ∫∫ f(x - u t - e₂ s) ψ_h(t) ψ_h(s) ds dt`.
pub fn smoothed_kernel(k: u32, n: u32, h: f64) -> Result<SparseKernel> {
    if !(h > 0.0) || n == 0 {
        return invalid("scale and eccentricity must be positive");
    }
    let u = [n as f64, k as f64];
    let nu = u[0].hypot(u[1]);
    let tn = psi_nodes(h * nu, 0.25);
    let sn = psi_nodes(h, 0.25);
    let pts = tn.iter().flat_map(|&(ts, wt)| {
        let t = ts / nu;
        sn.iter().map(move |&(s, ws)| ([u[0] * t, u[1] * t + s], wt * ws))
    });
    Ok(SparseKernel::splat(pts).normalized())
}

pub fn m_directional<T: Real>(f: &OpGrid<T>, k: u32, n: u32, h: f64) -> Result<OpGrid<T>> {
    Ok(convolve_grid(f, &m_directional_kernel(k, n, h * pixel_scale(f))?))
}

pub fn smoothed_avg<T: Real>(f: &OpGrid<T>, k: u32, n: u32, h: f64) -> Result<OpGrid<T>> {
    Ok(convolve_grid(f, &smoothed_kernel(k, n, h * pixel_scale(f))?))
}

/// Multiplier of `M_h^{k,N}` at `ξ` (cycles per pixel): `ψ̂(h⟨u, ξ⟩)`.
pub fn m_directional_symbol(k: u32, n: u32, h: f64, xi: [f64; 2]) -> f64 {
    BumpTransform::get().eval(h * (n as f64 * xi[0] + k as f64 * xi[1]))
}

/// Unnormalized 2D FFT with cached plans; the output of `forward` is
/// transposed, which `inverse` undoes.
pub struct Fft2F32 {
    g: usize,
    fwd: Arc<dyn Fft<f32>>,
    inv: Arc<dyn Fft<f32>>,
    scratch: Vec<Complex<f32>>,
}

impl Fft2F32 {
    pub fn new(g: usize) -> Self {
        let mut p = FftPlanner::<f32>::new();
        let fwd = p.plan_fft_forward(g);
        let inv = p.plan_fft_inverse(g);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self { g, fwd, inv, scratch: vec![Complex::new(0.0, 0.0); len] }
    }

    pub fn forward(&mut self, buf: &mut [Complex<f32>]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
        transpose_square(buf, self.g);
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex<f32>]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        transpose_square(buf, self.g);
        self.inv.process_with_scratch(buf, &mut self.scratch);
    }
}

/// Running pointwise maximum of `K * f` over a list of positive kernels,
/// processed two at a time as the real and imaginary parts of one transform.
pub fn max_over_kernels(f: &Field, kernels: &[SparseKernel]) -> Field {
    let g = f.g;
    let gi = g as i64;
    let mut eng = Fft2F32::new(g);
    let mut fh: Vec<Complex<f32>> = f.data.iter().map(|&v| Complex::new(v as f32, 0.0)).collect();
    eng.forward(&mut fh);
    let norm = 1.0 / (g * g) as f32;
    let mut best = vec![f32::NEG_INFINITY; g * g];
    let mut buf = vec![Complex::new(0.0f32, 0.0); g * g];
    for pair in kernels.chunks(2) {
        buf.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
        for &(a, b, w) in &pair[0].taps {
            buf[(a.rem_euclid(gi) * gi + b.rem_euclid(gi)) as usize].re += w as f32;
        }
        if let Some(k2) = pair.get(1) {
            for &(a, b, w) in &k2.taps {
                buf[(a.rem_euclid(gi) * gi + b.rem_euclid(gi)) as usize].im += w as f32;
            }
        }
        eng.forward(&mut buf);
        for (z, w) in buf.iter_mut().zip(&fh) {
            *z = *z * *w * norm;
        }
        eng.inverse(&mut buf);
        let two = pair.len() == 2;
        for (m, z) in best.iter_mut().zip(&buf) {
            let v = if two { z.re.max(z.im) } else { z.re };
            if v > *m {
                *m = v;
            }
        }
    }
    Field { g, data: best.into_iter().map(|v| v as f64).collect() }
}

/// `sup_{0≤k<N, h ∈ scales} K_R F` over the first-octant directions.
pub fn octant_maximal(f: &Field, n: u32, scales: &[f64]) -> Result<Field> {
    let mut ks = Vec::new();
    for k in 0..n {
        for &h in scales {
            ks.push(rect_kernel(&RectSpec::new(n, k, h))?);
        }
    }
    Ok(max_over_kernels(f, &ks))
}

/// Scalar Kakeya maximal function over all directions: the octant maximal
/// function of the eight dihedral images of `F`, mapped back.
pub fn scalar_maximal_field(f: &Field, n: u32, scales: &[f64]) -> Result<Field> {
    if scales.is_empty() {
        return invalid("empty scale set");
    }
    if scales.iter().any(|&h| h * n as f64 > f.g as f64) {
        return invalid("rectangle longer than the periodic grid");
    }
    let sym = f.is_dihedral_symmetric();
    let base = if sym { Some(octant_maximal(f, n, scales)?) } else { None };
    let mut out = Field { g: f.g, data: vec![f64::NEG_INFINITY; f.g * f.g] };
    for e in 0..8u8 {
        // sup over directions g·θ of K F = (octant sup of K applied to F∘g)∘g⁻¹
        let o = match &base {
            Some(b) => b.clone(),
            None => octant_maximal(&f.dihedral(e), n, scales)?,
        };
        let back = o.dihedral(dihedral_inverse(e));
        for (m, v) in out.data.iter_mut().zip(&back.data) {
            *m = m.max(*v);
        }
    }
    Ok(out)
}

/// Grid-level entry point; matrix-valued grids are rejected. Scales are
/// short sides in physical units.
pub fn scalar_maximal<T: Real>(f: &OpGrid<T>, n: u32, scales: &[f64]) -> Result<OpGrid<T>> {
    if f.mat_dim() > 1 {
        return invalid("the pointwise maximal function is only defined for scalar fields");
    }
    let px = pixel_scale(f);
    let field = Field::from_grid(f)?;
    if field.data.iter().any(|&v| v < 0.0) {
        return invalid("scalar maximal function expects a nonnegative field");
    }
    let sc: Vec<f64> = scales.iter().map(|h| h * px).collect();
    scalar_maximal_field(&field, n, &sc)?.to_grid(f.domain())
}

/// Dyadic short sides `2^s` (pixels) with `1 ≤ N·2^s ≤ g/2`.
pub fn dyadic_scales(n: u32, g: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = -(32 - n.leading_zeros() as i32);
    loop {
        let h = 2f64.powi(s);
        if h * n as f64 > g as f64 / 2.0 {
            break;
        }
        if h * n as f64 >= 1.0 {
            out.push(h);
        }
        s += 1;
    }
    out
}

/// Test families for the maximal experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `|x|^{-1}` on `r_out / N ≤ |x| ≤ r_out`.
    Radial { r_out: f64 },
    /// Indicator of a centred tube of the given length and width along `x₁`.
    Tube { length: f64, width: f64 },
    /// Union of `N` centred tubes of length `length` and width `length / N`
    /// at equally spaced angles.
    Star { length: f64 },
    Constant,
}

impl FamilySpec {
    pub fn parse(name: &str, g: usize) -> Result<Self> {
        let q = g as f64 / 4.0;
        Ok(match name {
            "radial" => Self::Radial { r_out: q },
            "tube" => Self::Tube { length: q, width: 2.0 },
            "star" => Self::Star { length: q },
            "constant" => Self::Constant,
            other => return invalid(format!("unknown family '{other}'")),
        })
    }

    pub fn field(&self, g: usize, n: u32) -> Field {
        match *self {
            Self::Radial { r_out } => {
                let r_in = r_out / n.max(1) as f64;
                Field::from_offsets(g, |a, b| {
                    let r = a.hypot(b);
                    if r >= r_in && r <= r_out {
                        1.0 / r
                    } else {
                        0.0
                    }
                })
            }
            Self::Tube { length, width } => {
                Field::from_offsets(g, |a, b| if a.abs() <= length / 2.0 && b.abs() <= width / 2.0 { 1.0 } else { 0.0 })
            }
            Self::Star { length } => {
                let w = (length / n.max(1) as f64).max(1.0);
                let m = n.max(1);
                Field::from_offsets(g, |a, b| {
                    for j in 0..m {
                        let th = std::f64::consts::PI * j as f64 / m as f64;
                        let (c, s) = (th.cos(), th.sin());
                        if (a * c + b * s).abs() <= length / 2.0 && (-a * s + b * c).abs() <= w / 2.0 {
                            return 1.0;
                        }
                    }
                    0.0
                })
            }
            Self::Constant => Field { g, data: vec![1.0; g * g] },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: u32,
    pub ratio: f64,
    pub trivial_margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// `ratio ≈ a + b log₂ N`.
    pub log_fit: LinearFit,
    /// `log ratio ≈ log a' + c log N`.
    pub power_fit: LinearFit,
    /// `ratio(N_{i+1}) - ratio(N_i)`.
    pub increments: Vec<f64>,
}

impl ScalingReport {
    /// Largest over smallest successive increment (∞ if one is nonpositive).
    pub fn increment_spread(&self) -> f64 {
        if self.increments.iter().any(|&d| d <= 0.0) {
            return f64::INFINITY;
        }
        crate::stats::max_min_ratio(&self.increments)
    }
}

/// `‖sup_R K_R f‖₂ / ‖f‖₂` for each `N`, with the fits.
pub fn kakeya_norm_scaling(ns: &[u32], family: FamilySpec, g: usize) -> Result<ScalingReport> {
    if !g.is_power_of_two() || g < 16 {
        return invalid("grid side must be a power of two ≥ 16");
    }
    let mut rows = Vec::new();
    for &n in ns {
        let f = family.field(g, n);
        let fl2 = f.l2();
        if fl2 == 0.0 {
            return invalid("family member vanishes on the grid");
        }
        let m = scalar_maximal_field(&f, n, &dyadic_scales(n, g))?;
        let ratio = m.l2() / fl2;
        rows.push(ScalingRow { n, ratio, trivial_margin: ratio / (n as f64).sqrt() });
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).log2()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let increments = y.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(ScalingReport { log_fit: linear_fit(&x, &y), power_fit: linear_fit(&lx, &ly), rows, increments })
}

/// Spectral evaluation of `sup_{k<N, j} M_{2^j}^{k,N} f` with segment lengths
/// `N 2^j` in `[1, g/2]`.
fn dyadic_directional_sup(fh: &[Complex<f64>], g: usize, n: u32) -> Field {
    let mut planner = FftPlanner::<f64>::new();
    let inv = planner.plan_fft_inverse(g);
    let mut scratch = vec![Complex::new(0.0, 0.0); inv.get_inplace_scratch_len()];
    let mut best = vec![f64::NEG_INFINITY; g * g];
    let freqs: Vec<f64> = (0..g).map(|i| signed_freq(i, g) as f64 / g as f64).collect();
    let scales = dyadic_scales(n, g);
    let mut buf = vec![Complex::new(0.0, 0.0); g * g];
    for k in 0..n {
        for &h in &scales {
            for i1 in 0..g {
                for i2 in 0..g {
                    let m = m_directional_symbol(k, n, h, [freqs[i1], freqs[i2]]);
                    buf[i1 * g + i2] = fh[i1 * g + i2] * m;
                }
            }
            inv.process_with_scratch(&mut buf, &mut scratch);
            transpose_square(&mut buf, g);
            inv.process_with_scratch(&mut buf, &mut scratch);
            transpose_square(&mut buf, g);
            let s = 1.0 / (g * g) as f64;
            for (b, z) in best.iter_mut().zip(&buf) {
                *b = b.max(z.re * s);
            }
        }
    }
    Field { g, data: best }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyInequalityRow {
    pub m: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Both sides of the induction step at `N = 2^m` (normalized by `‖f‖₂`).
pub fn key_inequality_probe(m: u32, family: FamilySpec, g: usize) -> Result<KeyInequalityRow> {
    if m == 0 || m > 10 {
        return invalid("m must lie in 1..=10");
    }
    if (1usize << m) > g / 2 {
        return invalid("grid too small for 2^m directions");
    }
    let f = family.field(g, 1 << m);
    let fl2 = f.l2();
    if fl2 == 0.0 {
        return invalid("family member vanishes on the grid");
    }
    let mut fh: Vec<Complex<f64>> = f.data.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(g);
    fwd.process(&mut fh);
    transpose_square(&mut fh, g);
    fwd.process(&mut fh);
    transpose_square(&mut fh, g);
    let lhs = dyadic_directional_sup(&fh, g, 1 << m).l2() / fl2;
    let rhs = dyadic_directional_sup(&fh, g, 1 << (m - 1)).l2() / fl2;
    Ok(KeyInequalityRow { m, lhs, rhs, gap: lhs - rhs })
}

/// Split `F = f_l + r_l` with `f̂_l = χ_{Γ_{2l+1} ∪ Γ_{2l}} F̂`, `0 ≤ l < 2^{m-1}`.
pub fn sector_split<T: Real>(f: &OpGrid<T>, m: u32) -> Result<Vec<(OpGrid<T>, OpGrid<T>)>> {
    if m < 1 {
        return invalid("m must be positive");
    }
    let g = f.side();
    if (g as f64) * SECTOR_C * 0.5f64.powi(m as i32) < 2.0 {
        return invalid(format!("grid of side {g} does not resolve sectors of width 2^-{m}"));
    }
    let fh = f.op_fft();
    let nn = f.mat_dim() * f.mat_dim();
    let mut out = Vec::new();
    for l in 0..(1i64 << (m - 1)) {
        let mut a = fh.clone();
        let mut b = fh.clone();
        for k1 in 0..g {
            for k2 in 0..g {
                let xi = fh.frequency(k1, k2);
                let inside = (xi[0] != 0.0 || xi[1] != 0.0)
                    && (in_sector(m, 2 * l + 1, xi, SECTOR_C) || in_sector(m, 2 * l, xi, SECTOR_C));
                let off = (k1 * g + k2) * nn;
                let zero = Complex::new(T::zero(), T::zero());
                let (dst, _) = if inside { (&mut b, ()) } else { (&mut a, ()) };
                for z in &mut dst.raw_mut()[off..off + nn] {
                    *z = zero;
                }
            }
        }
        out.push((a.op_ifft(), b.op_ifft()));
    }
    Ok(out)
}

/// Random positive (log-normal) field.
pub fn random_positive_field(g: usize, seed: u64) -> Field {
    let mut r = rng::seeded(seed);
    Field { g, data: (0..g * g).map(|_| rng::normal(&mut r).exp()).collect() }
}

fn fft_apply(f: &Field, k: &SparseKernel) -> Field {
    let g = f.g;
    let mut kh: Vec<Complex<f64>> = k.dense(g).into_iter().map(|v| Complex::new(v, 0.0)).collect();
    let mut fh: Vec<Complex<f64>> = f.data.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2_inplace(&mut kh, g, false);
    fft2_inplace(&mut fh, g, false);
    for (a, b) in fh.iter_mut().zip(&kh) {
        *a = *a * *b * g as f64;
    }
    fft2_inplace(&mut fh, g, true);
    Field { g, data: fh.iter().map(|z| z.re).collect() }
}

fn max_ratio(a: &Field, b: &Field) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| x / y).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub trials: usize,
    /// `max K_R F / A_h F`.
    pub lower: f64,
    /// `max A_h F / K_{R'} F`.
    pub upper: f64,
    /// `max K_R F / (|Q|/|R| · M_Q F)`, at most 1.
    pub domination: f64,
    /// `max M_h F / M_{2^j} F` for `2^{j-1} ≤ h < 2^j`.
    pub lacunary: f64,
}

/// Samplewise comparison constants on random positive fields.
///
/// For a rectangle `R` of short side `h_R`, `A_h` with
/// `h = h_R max(|u|/N, (N + k/N)/|u|)` is the smallest scale whose core
/// `{|t|, |s| ≤ h/2}` contains `R`; `R'` of short side `3h·max(1, (|u| + k/|u|)/N)`
/// contains the support of `A_h`.
pub fn sandwich_constants(trials: usize, g: usize, seed: u64) -> Result<SandwichReport> {
    let mut r = rng::seeded(seed);
    let mut rep = SandwichReport { trials, lower: 0.0, upper: 0.0, domination: 0.0, lacunary: 0.0 };
    for t in 0..trials {
        let n = [2u32, 4, 8][t % 3];
        let k = (rng::uniform(&mut r, 0.0, n as f64) as u32).min(n - 1);
        let hr = rng::uniform(&mut r, 0.75, 1.5);
        let f = random_positive_field(g, seed.wrapping_add(1 + t as u64));
        let rect = RectSpec::new(n, k, hr);
        let kr = fft_apply(&f, &rect_kernel(&rect)?);
        let nu = (n as f64).hypot(k as f64);
        let h = hr * (nu / n as f64).max((n as f64 + k as f64 / n as f64) / nu);
        let a = fft_apply(&f, &smoothed_kernel(k, n, h)?);
        let hp = 3.0 * h * (1.0f64).max((nu + k as f64 / nu) / n as f64);
        let kr2 = fft_apply(&f, &rect_kernel(&RectSpec::new(n, k, hp))?);
        rep.lower = rep.lower.max(max_ratio(&kr, &a));
        rep.upper = rep.upper.max(max_ratio(&a, &kr2));
        let u = rect.axis();
        let side = (u[0].abs() * rect.long_side() + u[1].abs() * rect.h).max(u[1].abs() * rect.long_side() + u[0].abs() * rect.h);
        let q = fft_apply(&f, &cube_kernel(side)?);
        let factor = side * side / rect.area();
        rep.domination = rep.domination.max(max_ratio(&kr, &Field { g, data: q.data.iter().map(|v| v * factor).collect() }));
        let j = rng::uniform(&mut r, 0.0, 2.0).floor() as i32;
        let hh = 2f64.powi(j) * rng::uniform(&mut r, 0.5, 1.0);
        let mh = fft_apply(&f, &m_directional_kernel(k, n, hh)?);
        let mj = fft_apply(&f, &m_directional_kernel(k, n, 2f64.powi(j))?);
        rep.lacunary = rep.lacunary.max(max_ratio(&mh, &mj));
    }
    Ok(rep)
}

/// `max |M_{2^{j+1}}^{l,2^{m-1}} f - M_{2^j}^{2l,2^m} f|` for both the space
/// kernels and the spectral multipliers.
pub fn dilation_residual(m: u32, l: u32, j: i32, f: &Field) -> Result<(f64, f64)> {
    if m < 1 || l >= (1 << (m - 1)) {
        return invalid("need 0 ≤ l < 2^{m-1}");
    }
    let a = m_directional_kernel(l, 1 << (m - 1), 2f64.powi(j + 1))?;
    let b = m_directional_kernel(2 * l, 1 << m, 2f64.powi(j))?;
    let space = fft_apply(f, &a).max_abs_diff(&fft_apply(f, &b));
    let g = f.g;
    let mut spec: f64 = 0.0;
    for i1 in 0..g {
        for i2 in 0..g {
            let xi = [signed_freq(i1, g) as f64 / g as f64, signed_freq(i2, g) as f64 / g as f64];
            let d = m_directional_symbol(l, 1 << (m - 1), 2f64.powi(j + 1), xi) - m_directional_symbol(2 * l, 1 << m, 2f64.powi(j), xi);
            spec = spec.max(d.abs());
        }
    }
    Ok((space, spec))
}

/// Checks a kernel is a positive unit-mass measure.
pub fn check_kernel(k: &SparseKernel) -> Result<()> {
    if k.taps.iter().any(|t| t.2 < 0.0) {
        return Err(LabError::Internal("negative kernel weight".into()));
    }
    if (k.mass() - 1.0).abs() > 1e-12 {
        return Err(LabError::Internal(format!("kernel mass {} differs from 1", k.mass())));
    }
    Ok(())
}

/// Matrix-valued constant field, for positivity and mass checks.
pub fn constant_grid<T: Real>(g: usize, value: &MatElem<T>) -> Result<OpGrid<T>> {
    OpGrid::constant(g, Domain::Torus, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::random_psd;

    #[test]
    fn rect_kernels_have_unit_mass() {
        for &(n, k, h) in &[(1, 0, 3.0), (8, 3, 0.3), (16, 15, 1.7), (256, 100, 0.01)] {
            let ker = rect_kernel(&RectSpec::new(n, k, h)).unwrap();
            check_kernel(&ker).unwrap();
        }
        check_kernel(&directional_kernel([0.6, 0.8], 3.3).unwrap()).unwrap();
        check_kernel(&smoothed_kernel(3, 8, 1.2).unwrap()).unwrap();
        check_kernel(&m_directional_kernel(3, 8, 0.7).unwrap()).unwrap();
        assert!(directional_kernel([1.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn constants_are_fixed() {
        let m = random_psd::<f64>(&mut rng::seeded(1), 2);
        let f = constant_grid(32, &m).unwrap();
        let scale = f.spacing();
        let outs = [
            directional_avg(&f, [0.6, 0.8], 2.0 * scale).unwrap(),
            kakeya_avg(&f, &RectSpec::new(4, 1, 1.5 * scale)).unwrap(),
            smoothed_avg(&f, 1, 4, 1.0 * scale).unwrap(),
            m_directional(&f, 1, 4, 1.0 * scale).unwrap(),
        ];
        for o in outs {
            assert!(o.max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn horizontal_mode_gets_sinc_factor() {
        let g = 256;
        let mm = 1.0;
        let f = OpGrid::<f64>::from_scalar_fn(g, Domain::Torus, |x| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * mm * x[0])).unwrap();
        let h = 4.0 / g as f64;
        let out = directional_avg(&f, [1.0, 0.0], h).unwrap();
        let a = 2.0 * std::f64::consts::PI * mm * h;
        let factor = a.sin() / a;
        // trapezoid and linear interpolation error ≤ (2πM/g)²/12
        let tol = (2.0 * std::f64::consts::PI * mm / g as f64).powi(2) / 12.0 + 1e-12;
        let want = f.scale(Complex::new(factor, 0.0));
        assert!(out.max_abs_diff(&want) < tol, "{}", out.max_abs_diff(&want));
    }

    #[test]
    fn averages_preserve_psd() {
        let mut r = rng::seeded(4);
        let f = OpGrid::<f64>::from_fn(16, 3, Domain::Torus, |_| random_psd(&mut r, 3)).unwrap();
        let sp = f.spacing();
        for out in [directional_avg(&f, [1.0, 2.0], 2.5 * sp).unwrap(), kakeya_avg(&f, &RectSpec::new(4, 2, 0.8 * sp)).unwrap()] {
            for s in out.samples() {
                assert!(s.hermitian_part().min_eig() >= -1e-10);
            }
        }
    }

    #[test]
    fn square_matches_box_blur_oracle() {
        let g = 32;
        let f = random_positive_field(g, 3);
        for &h in &[1.0, 2.0, 3.0, 2.5] {
            let k = rect_kernel(&RectSpec::new(1, 0, h)).unwrap();
            let out = fft_apply(&f, &k);
            // separable 1D overlaps of the cell [d - 1/2, d + 1/2] with [-h/2, h/2]
            let ov = |d: i64| ((d as f64 + 0.5).min(h / 2.0) - (d as f64 - 0.5).max(-h / 2.0)).max(0.0);
            let m = (h / 2.0).ceil() as i64 + 1;
            for i1 in 0..g as i64 {
                for i2 in 0..g as i64 {
                    let mut acc = 0.0;
                    for a in -m..=m {
                        for b in -m..=m {
                            acc += ov(a) * ov(b) * f.at(i1 - a, i2 - b);
                        }
                    }
                    acc /= h * h;
                    assert!((acc - out.at(i1, i2)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn thin_tube_average_on_core() {
        let g = 128;
        let f = FamilySpec::Tube { length: 60.0, width: 3.0 }.field(g, 1);
        let out = fft_apply(&f, &rect_kernel(&RectSpec::new(16, 0, 1.0)).unwrap());
        assert!((out.at(0, 0) - 1.0).abs() < 1e-12);
        assert!((out.at(20, 0) - 1.0).abs() < 1e-12);
        // straddling the tube end: area ratio (30.5 - 22 + 8) / 16
        let v = out.at(30, 0);
        let want = (30.5 - (30.0 - 8.0)) / 16.0;
        assert!((v - want).abs() < 1e-12, "{v} {want}");
    }

    #[test]
    fn maximal_n1_matches_dyadic_box_oracle() {
        let g = 64;
        let f = random_positive_field(g, 5);
        let scales = [1.0, 2.0, 4.0, 8.0];
        let m = scalar_maximal_field(&f, 1, &scales).unwrap();
        let mut oracle = Field { g, data: vec![0.0; g * g] };
        for &h in &scales {
            let b = fft_apply(&f, &cube_kernel(h).unwrap());
            for (o, v) in oracle.data.iter_mut().zip(&b.data) {
                *o = o.max(*v);
            }
        }
        assert!(m.max_abs_diff(&oracle) < 1e-4 * oracle.data.iter().cloned().fold(0.0, f64::max));
        let c = Field { g, data: vec![2.0; g * g] };
        let mc = scalar_maximal_field(&c, 4, &[1.0, 2.0]).unwrap();
        assert!(mc.data.iter().all(|v| (v - 2.0).abs() < 1e-5));
    }

    #[test]
    fn maximal_of_spike_decays_quadratically() {
        let g = 128;
        let f = Field::from_offsets(g, |a, b| if a == 0.0 && b == 0.0 { 1.0 } else { 0.0 });
        let m = scalar_maximal_field(&f, 4, &dyadic_scales(4, g)).unwrap();
        let r = m.at(8, 0) / m.at(16, 0);
        assert!(r > 2.0 && r < 8.0, "{r}");
        let mm = scalar_maximal::<f64>(&f.to_grid(Domain::Box { l: 128.0 }).unwrap(), 4, &[1.0]).unwrap();
        assert_eq!(mm.side(), g);
        let mat = OpGrid::<f64>::zeros(8, 2, Domain::Torus).unwrap();
        assert!(scalar_maximal(&mat, 4, &[1.0]).is_err());
    }

    #[test]
    fn general_field_uses_all_dihedral_images() {
        let g = 64;
        let f = Field::from_offsets(g, |a, b| if a == 5.0 && b == 0.0 { 1.0 } else { 0.0 });
        let m = scalar_maximal_field(&f, 4, &[1.0, 2.0]).unwrap();
        // rectangle along (0, 1) through the spike only exists after reflection
        assert!(m.at(5, 3) > 0.0);
        let fr = f.dihedral(4);
        let mr = scalar_maximal_field(&fr, 4, &[1.0, 2.0]).unwrap();
        assert!((mr.at(3, 5) - m.at(5, 3)).abs() < 1e-6);
    }

    #[test]
    fn key_inequality_examples() {
        let c = key_inequality_probe(1, FamilySpec::Constant, 32).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-10 && (c.rhs - 1.0).abs() < 1e-10 && c.gap.abs() < 1e-10);
        let r = key_inequality_probe(3, FamilySpec::Radial { r_out: 16.0 }, 64).unwrap();
        assert!(r.lhs >= r.rhs - 1e-12);
    }

    #[test]
    fn sector_split_energy() {
        let mut r = rng::seeded(8);
        let f = OpGrid::<f64>::from_scalar_fn(64, Domain::Torus, |_| Complex::new(rng::normal(&mut r), rng::normal(&mut r))).unwrap();
        let parts = sector_split(&f, 3).unwrap();
        let e = f.coeff_l2_norm();
        let mut s = 0.0;
        for (fl, rl) in &parts {
            let (a, b) = (fl.coeff_l2_norm(), rl.coeff_l2_norm());
            assert!((a * a + b * b - e * e).abs() < 1e-10 * e * e);
            s += a * a;
        }
        assert!(s <= e * e * (1.0 + 1e-12));
        assert!(sector_split(&f, 6).is_err());
        // single-sector field: one plane wave with frequency in Γ_1
        let one = OpGrid::<f64>::from_scalar_fn(64, Domain::Torus, |x| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * (-1.0 * x[0] + 8.0 * x[1]))).unwrap();
        let parts = sector_split(&one, 3).unwrap();
        let nonzero = parts.iter().filter(|(fl, _)| fl.coeff_l2_norm() > 1e-8).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn sandwich_and_dilation() {
        let rep = sandwich_constants(30, 64, 2).unwrap();
        assert!(rep.lower <= 8.0 && rep.upper <= 8.0, "{rep:?}");
        assert!(rep.domination <= 1.0 + 1e-9, "{rep:?}");
        assert!(rep.lacunary <= 4.0, "{rep:?}");
        let f = random_positive_field(64, 9);
        let (s, p) = dilation_residual(3, 2, -1, &f).unwrap();
        assert!(s < 1e-10 && p < 1e-10, "{s} {p}");
    }
}
