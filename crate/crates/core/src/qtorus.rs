//! Rational quantum torus `T²_θ`, `θ = p/q`: normally ordered polynomials
//! `Σ α_k U₁^{k₁} U₂^{k₂}`, the trace, Fourier coefficients, Bochner-Riesz
//! means, the automorphisms `π_x`, and `L_p` norms through the twisted
//! clock/shift representation `ρ_x(U₁) = e^{2πi x₁}·clock`, `ρ_x(U₂) = e^{2πi x₂}·shift`.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ncmat::{check_exponent, MatElem};
use crate::optorus::{Domain, OpGrid};
use crate::scalar::{expi2pi, lit, pow_complex, to_f64, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalAngle {
    p: i64,
    q: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl RationalAngle {
    /// Reduced fraction `p/q`, `q ≥ 1`.
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if q < 1 {
            return invalid(format!("denominator must be positive, got {q}"));
        }
        let d = gcd(p, q).max(1);
        Ok(Self { p: p / d, q: q / d })
    }

    /// Parses `"p/q"`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s.split_once('/').unwrap_or((s, "1"));
        let p = a.trim().parse::<i64>().map_err(|e| crate::LabError::Usage(format!("bad angle {s}: {e}")))?;
        let q = b.trim().parse::<i64>().map_err(|e| crate::LabError::Usage(format!("bad angle {s}: {e}")))?;
        Self::new(p, q)
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    /// `e^{2πi θ t}` for integer `t`, reduced mod `q` before evaluation.
    fn phase<T: Real>(&self, t: i64) -> C<T> {
        let r = (self.p * t).rem_euclid(self.q);
        expi2pi(r as f64 / self.q as f64)
    }
}

/// Clock and shift matrices of size `amp · q` realizing `U₁U₂ = e^{2πiθ}U₂U₁`.
/// `amp = 1` is the irreducible choice; larger `amp` gives the amplified
/// representation used as a cross-check.
pub fn clock_shift_amplified<T: Real>(angle: RationalAngle, amp: usize) -> (MatElem<T>, MatElem<T>) {
    let d = angle.q() as usize * amp.max(1);
    let clock = MatElem::from_fn(d, |i, j| if i == j { angle.phase(i as i64) } else { C::zero() });
    let shift = MatElem::from_fn(d, |i, j| if i == (j + 1) % d { C::one() } else { C::zero() });
    (clock, shift)
}

pub fn clock_shift_rep<T: Real>(angle: RationalAngle) -> (MatElem<T>, MatElem<T>) {
    clock_shift_amplified(angle, 1)
}

/// Matrix of `clock^{a} shift^{b}` in dimension `amp·q`:
/// column `j` maps to row `(j + b) mod d` with phase `e^{2πiθ a (j+b)}`.
pub fn monomial_matrix<T: Real>(angle: RationalAngle, k: [i64; 2], amp: usize) -> MatElem<T> {
    let d = (angle.q() as usize * amp.max(1)) as i64;
    let mut m = MatElem::zeros(d as usize);
    for j in 0..d {
        let row = (j + k[1]).rem_euclid(d);
        m.set(row as usize, j as usize, angle.phase(k[0] * row));
    }
    m
}

/// Finite sum `Σ α_k U^k`, `U^k = U₁^{k₁}U₂^{k₂}`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTorusPoly<T: Real> {
    angle: RationalAngle,
    coeffs: BTreeMap<[i64; 2], C<T>>,
}

impl<T: Real> QTorusPoly<T> {
    pub fn zero(angle: RationalAngle) -> Self {
        Self { angle, coeffs: BTreeMap::new() }
    }

    pub fn one(angle: RationalAngle) -> Self {
        Self::monomial(angle, [0, 0], C::one())
    }

    pub fn monomial(angle: RationalAngle, k: [i64; 2], c: C<T>) -> Self {
        let mut p = Self::zero(angle);
        p.coeffs.insert(k, c);
        p
    }

    pub fn from_coeffs(angle: RationalAngle, it: impl IntoIterator<Item = ([i64; 2], C<T>)>) -> Self {
        let mut p = Self::zero(angle);
        for (k, c) in it {
            p.add_term(k, c);
        }
        p
    }

    pub fn angle(&self) -> RationalAngle {
        self.angle
    }

    pub fn coeffs(&self) -> &BTreeMap<[i64; 2], C<T>> {
        &self.coeffs
    }

    pub fn coeff(&self, k: [i64; 2]) -> C<T> {
        self.coeffs.get(&k).copied().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, k: [i64; 2], c: C<T>) {
        let e = self.coeffs.entry(k).or_insert_with(C::zero);
        *e = *e + c;
    }

    /// `max_i (max k_i - min k_i)` over the support.
    pub fn support_diameter(&self) -> i64 {
        let mut d = 0;
        for i in 0..2 {
            let lo = self.coeffs.keys().map(|k| k[i]).min().unwrap_or(0);
            let hi = self.coeffs.keys().map(|k| k[i]).max().unwrap_or(0);
            d = d.max(hi - lo);
        }
        d
    }

    /// `max |k_i|` over the support.
    pub fn support_radius(&self) -> i64 {
        self.coeffs.keys().map(|k| k[0].abs().max(k[1].abs())).max().unwrap_or(0)
    }

    /// Phase of `U^a U^b = e^{-2πiθ a₂ b₁} U^{a+b}`.
    fn product_phase(&self, a: [i64; 2], b: [i64; 2]) -> C<T> {
        self.angle.phase(-a[1] * b[0])
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.angle, other.angle, "angle mismatch");
        let mut out = Self::zero(self.angle);
        for (&a, &ca) in &self.coeffs {
            for (&b, &cb) in &other.coeffs {
                out.add_term([a[0] + b[0], a[1] + b[1]], ca * cb * self.product_phase(a, b));
            }
        }
        out
    }

    /// `(U^k)* = e^{-2πiθ k₁k₂} U^{-k}`.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.angle);
        for (&k, &c) in &self.coeffs {
            out.add_term([-k[0], -k[1]], c.conj() * self.angle.phase(-k[0] * k[1]));
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, &c) in &other.coeffs {
            out.add_term(k, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, &c) in &other.coeffs {
            out.add_term(k, -c);
        }
        out
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self { angle: self.angle, coeffs: self.coeffs.iter().map(|(&k, &c)| (k, c * s)).collect() }
    }

    /// `τ(f) = α₀`.
    pub fn trace(&self) -> C<T> {
        self.coeff([0, 0])
    }

    /// `τ((U^m)* f)` evaluated through the product rules.
    pub fn fourier_coeff(&self, m: [i64; 2]) -> C<T> {
        let um = Self::monomial(self.angle, m, C::one());
        um.adjoint().mul(self).trace()
    }

    /// `(Σ |α_k|²)^{1/2}`.
    pub fn coeff_l2(&self) -> f64 {
        self.coeffs.values().map(|c| to_f64(c.norm_sqr())).sum::<f64>().sqrt()
    }

    /// Coefficients multiplied by `(1 - |m/R|²)_+^λ`.
    pub fn bochner_riesz_qt(&self, r: f64, lambda: Complex<f64>) -> Result<Self> {
        if !(r > 0.0) {
            return invalid("Bochner-Riesz radius must be positive");
        }
        if lambda.re < 0.0 {
            return invalid("Bochner-Riesz order needs Re λ >= 0");
        }
        let mut out = Self::zero(self.angle);
        for (&k, &c) in &self.coeffs {
            let s = ((k[0] * k[0] + k[1] * k[1]) as f64) / (r * r);
            let w = pow_complex(1.0 - s, lambda);
            if w.norm() > 0.0 {
                out.coeffs.insert(k, c * Complex::new(lit::<T>(w.re), lit::<T>(w.im)));
            }
        }
        Ok(out)
    }

    /// `α_k ↦ e^{2πi x·k} α_k`.
    pub fn pi_x(&self, x: [f64; 2]) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&k, &c)| (k, c * expi2pi::<T>(x[0] * k[0] as f64 + x[1] * k[1] as f64)))
            .collect();
        Self { angle: self.angle, coeffs }
    }

    /// `ρ_x(f)` in dimension `amp·q`.
    pub fn twisted_rep_amplified(&self, x: [f64; 2], amp: usize) -> MatElem<T> {
        let d = self.angle.q() as usize * amp.max(1);
        let mut out = MatElem::zeros(d);
        for (&k, &c) in &self.coeffs {
            let w = c * expi2pi::<T>(x[0] * k[0] as f64 + x[1] * k[1] as f64);
            let m = monomial_matrix::<T>(self.angle, k, amp);
            for (o, v) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
                *o = *o + *v * w;
            }
        }
        out
    }

    pub fn twisted_rep(&self, x: [f64; 2]) -> MatElem<T> {
        self.twisted_rep_amplified(x, 1)
    }

    /// `(Σ_{x ∈ M×M grid} τ_q|ρ_x(f)|^p / M²)^{1/p}`.
    pub fn lp_norm_qt(&self, p: f64, grid_m: usize) -> Result<f64> {
        self.lp_norm_qt_amplified(p, grid_m, 1)
    }

    pub fn lp_norm_qt_amplified(&self, p: f64, grid_m: usize, amp: usize) -> Result<f64> {
        check_exponent(p)?;
        let need = 2 * self.support_diameter() as usize + 1;
        if grid_m < need {
            return invalid(format!("grid {grid_m} too small; need at least {need}"));
        }
        let mm = grid_m as f64;
        let pts: Vec<(usize, usize)> = (0..grid_m).flat_map(|a| (0..grid_m).map(move |b| (a, b))).collect();
        if p.is_infinite() {
            let v = pts
                .par_iter()
                .map(|&(a, b)| to_f64(self.twisted_rep_amplified([a as f64 / mm, b as f64 / mm], amp).op_norm()))
                .reduce(|| 0.0, f64::max);
            return Ok(v);
        }
        let sum: f64 = pts
            .par_iter()
            .map(|&(a, b)| to_f64(self.twisted_rep_amplified([a as f64 / mm, b as f64 / mm], amp).schatten_pow(p)))
            .sum();
        Ok((sum / (mm * mm)).powf(1.0 / p))
    }

    /// Same quadrature as [`Self::lp_norm_qt`], with all samples `ρ_x(f)`
    /// produced at once by one inverse DFT per matrix entry.
    pub fn lp_norm_qt_fft(&self, p: f64, grid_m: usize) -> Result<f64> {
        check_exponent(p)?;
        let need = 2 * self.support_diameter() as usize + 1;
        if grid_m < need {
            return invalid(format!("grid {grid_m} too small; need at least {need}"));
        }
        let d = self.angle.q() as usize;
        let mm = grid_m as i64;
        let mut planes = vec![vec![C::<T>::zero(); grid_m * grid_m]; d * d];
        for (&k, &c) in &self.coeffs {
            let idx = (k[0].rem_euclid(mm) * mm + k[1].rem_euclid(mm)) as usize;
            for j in 0..d as i64 {
                let row = (j + k[1]).rem_euclid(d as i64);
                let slot = &mut planes[row as usize * d + j as usize][idx];
                *slot = *slot + c * self.angle.phase::<T>(k[0] * row);
            }
        }
        let scale = lit::<T>(grid_m as f64);
        planes.par_iter_mut().for_each(|pl| {
            crate::optorus::fft2_inplace(pl, grid_m, true);
            for z in pl.iter_mut() {
                *z = *z * scale;
            }
        });
        let samples = grid_m * grid_m;
        let at = |x: usize| MatElem::from_fn(d, |r, c| planes[r * d + c][x]);
        if p.is_infinite() {
            return Ok((0..samples).into_par_iter().map(|x| to_f64(at(x).op_norm())).reduce(|| 0.0, f64::max));
        }
        let sum: f64 = (0..samples)
            .into_par_iter()
            .map(|x| {
                if p == 2.0 {
                    (0..d * d).map(|e| to_f64(planes[e][x].norm_sqr())).sum::<f64>() / d as f64
                } else {
                    to_f64(at(x).schatten_pow(p))
                }
            })
            .sum();
        Ok((sum / samples as f64).powf(1.0 / p))
    }

    /// Norm at `grid_m` together with the change under doubling the grid.
    pub fn lp_norm_qt_refined(&self, p: f64, grid_m: usize) -> Result<(f64, f64)> {
        let a = self.lp_norm_qt(p, grid_m)?;
        let b = self.lp_norm_qt(p, 2 * grid_m)?;
        Ok((b, (b - a).abs()))
    }

    /// Grid `x ↦ ρ_0(π_x f)` on the torus; its `m`-th matrix Fourier
    /// coefficient is `α_m` times the matrix of `U^m`.
    pub fn transfer_tilde(&self, grid_g: usize) -> Result<OpGrid<T>> {
        let half = grid_g as i64 / 2;
        for k in self.coeffs.keys() {
            if k[0] < -half || k[0] >= half || k[1] < -half || k[1] >= half {
                return invalid(format!("frequency {k:?} outside the window of side {grid_g}"));
            }
        }
        let d = self.angle.q() as usize;
        let mut grid = OpGrid::<T>::zeros(grid_g, d, Domain::Torus)?;
        let monos: Vec<([i64; 2], C<T>, MatElem<T>)> =
            self.coeffs.iter().map(|(&k, &c)| (k, c, monomial_matrix::<T>(self.angle, k, 1))).collect();
        let g = grid_g as i64;
        for i1 in 0..grid_g {
            for i2 in 0..grid_g {
                let mut s = MatElem::zeros(d);
                for (k, c, m) in &monos {
                    let t = (k[0] * i1 as i64 + k[1] * i2 as i64).rem_euclid(g);
                    let w = *c * expi2pi::<T>(t as f64 / g as f64);
                    for (o, v) in s.as_mut_slice().iter_mut().zip(m.as_slice()) {
                        *o = *o + *v * w;
                    }
                }
                grid.set_sample(i1, i2, &s);
            }
        }
        Ok(grid)
    }

    /// Reads back `α_m` from a transferred grid: `α_m = τ(M(U^m)* Ĝ(m))`.
    pub fn pull_back(angle: RationalAngle, grid: &OpGrid<T>, support: &[[i64; 2]]) -> Result<Self> {
        let mut out = Self::zero(angle);
        for &m in support {
            let c = grid.torus_coefficient(m)?;
            let um = monomial_matrix::<T>(angle, m, 1);
            out.coeffs.insert(m, um.adjoint().matmul(&c).trace());
        }
        Ok(out)
    }
}

/// Random polynomial with coefficients on `[-rad, rad]²`.
pub fn random_poly<T: Real>(angle: RationalAngle, rad: i64, rng: &mut crate::rng::LabRng) -> QTorusPoly<T> {
    let mut p = QTorusPoly::zero(angle);
    for a in -rad..=rad {
        for b in -rad..=rad {
            p.add_term([a, b], crate::rng::cnormal(rng));
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn ang(p: i64, q: i64) -> RationalAngle {
        RationalAngle::new(p, q).unwrap()
    }

    #[test]
    fn half_angle_matrices() {
        let (u1, u2) = clock_shift_rep::<f64>(ang(1, 2));
        assert!(u1.sub(&MatElem::from_real_diag(&[1.0, -1.0])).max_abs() < 1e-15);
        let anti = MatElem::from_fn(2, |i, j| if i != j { C::one() } else { C::zero() });
        assert!(u2.sub(&anti).max_abs() < 1e-15);
        assert!(u1.matmul(&u2).add(&u2.matmul(&u1)).max_abs() < 1e-15);
    }

    #[test]
    fn zero_angle_commutes() {
        let (u1, u2) = clock_shift_rep::<f64>(ang(0, 1));
        assert_eq!(u1.dim(), 1);
        assert!(u1.matmul(&u2).sub(&u2.matmul(&u1)).max_abs() < 1e-15);
    }

    #[test]
    fn commutation_residuals() {
        for q in [3, 5, 7, 16, 64] {
            let a = ang(1, q);
            let (u1, u2) = clock_shift_rep::<f64>(a);
            let lhs = u1.matmul(&u2);
            let rhs = u2.matmul(&u1).scale(expi2pi(a.value()));
            assert!(lhs.sub(&rhs).op_norm() <= 1e-13, "q={q}");
        }
        let a = ang(1, 5);
        let (u1, u2) = clock_shift_rep::<f64>(a);
        assert!(u1.matmul(&u2).trace().norm() < 1e-15);
        for k1 in -4i64..=4 {
            for k2 in -4i64..=4 {
                if (k1, k2) != (0, 0) {
                    assert!(monomial_matrix::<f64>(a, [k1, k2], 1).trace().norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn monomials_match_matrix_powers() {
        let a = ang(2, 7);
        let (u1, u2) = clock_shift_rep::<f64>(a);
        let pow = |m: &MatElem<f64>, e: i64| {
            let base = if e < 0 { m.adjoint() } else { m.clone() };
            (0..e.abs()).fold(MatElem::identity(7), |acc, _| acc.matmul(&base))
        };
        for &(k1, k2) in &[(1, 0), (0, 1), (2, 3), (-1, 2), (-3, -4)] {
            let want = pow(&u1, k1).matmul(&pow(&u2, k2));
            assert!(monomial_matrix::<f64>(a, [k1, k2], 1).sub(&want).max_abs() < 1e-13);
        }
    }

    #[test]
    fn fourier_coefficient_examples() {
        let a = ang(1, 3);
        let f = QTorusPoly::<f64>::monomial(a, [1, 2], Complex::new(3.0, 0.0));
        assert!((f.fourier_coeff([1, 2]) - Complex::new(3.0, 0.0)).norm() < 1e-14);
        let g = QTorusPoly::<f64>::monomial(a, [1, 0], C::one());
        assert!(g.fourier_coeff([0, 1]).norm() < 1e-15);
        let mut r = rng::seeded(4);
        let h = random_poly::<f64>(ang(2, 7), 3, &mut r);
        for (&k, &c) in h.coeffs() {
            assert!((h.fourier_coeff(k) - c).norm() < 1e-13);
        }
    }

    #[test]
    fn twisted_rep_is_homomorphism() {
        let a = ang(2, 5);
        let mut r = rng::seeded(6);
        let f = random_poly::<f64>(a, 2, &mut r);
        let g = random_poly::<f64>(a, 2, &mut r);
        let x = [0.31, 0.77];
        let prod = f.mul(&g).twisted_rep(x);
        let direct = f.twisted_rep(x).matmul(&g.twisted_rep(x));
        assert!(prod.sub(&direct).max_abs() < 1e-11);
        let adj = f.adjoint().twisted_rep(x);
        assert!(adj.sub(&f.twisted_rep(x).adjoint()).max_abs() < 1e-12);
    }

    #[test]
    fn trace_axiom_by_quadrature() {
        let a = ang(1, 3);
        let one = QTorusPoly::<f64>::one(a);
        assert!(one.twisted_rep([0.2, 0.9]).sub(&MatElem::identity(3)).max_abs() < 1e-15);
        let f = QTorusPoly::<f64>::from_coeffs(a, [([0, 0], C::one()), ([3, 0], C::one())]);
        let m = 8;
        let mut acc = Complex::new(0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                acc += f.twisted_rep([i as f64 / m as f64, j as f64 / m as f64]).trace();
            }
        }
        assert!((acc / (m * m) as f64 - Complex::new(1.0, 0.0)).norm() < 1e-14);
        let u1 = QTorusPoly::<f64>::monomial(a, [1, 0], C::one());
        for x in [[0.0, 0.0], [0.3, 0.6]] {
            assert!(u1.twisted_rep(x).trace().norm() < 1e-15);
        }
    }

    #[test]
    fn riesz_examples() {
        let a = ang(1, 5);
        let one = QTorusPoly::<f64>::one(a);
        assert_eq!(one.bochner_riesz_qt(0.7, Complex::new(0.5, 0.0)).unwrap(), one);
        let u = QTorusPoly::<f64>::monomial(a, [1, 0], C::one());
        let b = u.bochner_riesz_qt(2.0, Complex::new(0.5, 0.0)).unwrap();
        assert!((b.coeff([1, 0]).re - 0.75f64.sqrt()).abs() < 1e-15);
        let mut r = rng::seeded(1);
        let f = random_poly::<f64>(a, 3, &mut r);
        let mut prev = f64::INFINITY;
        for rad in [5.0, 10.0, 20.0, 40.0, 80.0] {
            let d = f.bochner_riesz_qt(rad, Complex::new(0.3, 0.0)).unwrap().sub(&f).coeff_l2();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn riesz_preserves_self_adjointness() {
        let a = ang(2, 5);
        let mut r = rng::seeded(2);
        let g = random_poly::<f64>(a, 2, &mut r);
        let f = g.add(&g.adjoint());
        let b = f.bochner_riesz_qt(2.2, Complex::new(0.4, 0.0)).unwrap();
        let d = b.sub(&b.adjoint());
        assert!(d.coeffs().values().all(|c| c.norm() < 1e-13));
    }

    #[test]
    fn pi_x_examples() {
        let a = ang(1, 4);
        let mut r = rng::seeded(3);
        let f = random_poly::<f64>(a, 2, &mut r);
        assert_eq!(f.pi_x([0.0, 0.0]), f);
        let u = QTorusPoly::<f64>::monomial(a, [1, 1], C::one());
        assert!((u.pi_x([0.5, 0.5]).coeff([1, 1]) - C::one()).norm() < 1e-15);
        let px = f.pi_x([0.123, 0.456]);
        assert!((px.trace() - f.trace()).norm() < 1e-15);
        let n0 = f.lp_norm_qt(2.0, 9).unwrap();
        let n1 = px.lp_norm_qt(2.0, 9).unwrap();
        assert!((n0 - n1).abs() < 1e-12);
    }

    #[test]
    fn norm_examples() {
        let a = ang(1, 3);
        let c = QTorusPoly::<f64>::monomial(a, [0, 0], Complex::new(3.0, 4.0));
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            assert!((c.lp_norm_qt(p, 3).unwrap() - 5.0).abs() < 1e-12);
        }
        let f = QTorusPoly::<f64>::from_coeffs(a, [([1, 0], C::one()), ([0, 1], C::one())]);
        assert!((f.lp_norm_qt(2.0, 5).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(f.lp_norm_qt(2.0, 2).is_err());
    }

    #[test]
    fn fft_norm_matches_direct_quadrature() {
        let mut r = crate::rng::seeded(11);
        let a = RationalAngle::new(2, 7).unwrap();
        let f = random_poly::<f64>(a, 3, &mut r);
        for p in [1.0, 2.0, 3.0, 4.0, f64::INFINITY] {
            let direct = f.lp_norm_qt(p, 13).unwrap();
            let fast = f.lp_norm_qt_fft(p, 13).unwrap();
            assert!((direct - fast).abs() < 1e-10 * direct, "{p} {direct} {fast}");
        }
        assert!(f.lp_norm_qt_fft(2.0, 12).is_err());
    }

    #[test]
    fn p4_norm_stable_under_refinement_and_amplification() {
        let a = ang(1, 5);
        let mut r = rng::seeded(7);
        let f = random_poly::<f64>(a, 2, &mut r);
        let (v, delta) = f.lp_norm_qt_refined(4.0, 9).unwrap();
        assert!(delta < 1e-8, "delta={delta}");
        let amp = f.lp_norm_qt_amplified(4.0, 9, 3).unwrap();
        assert!((amp - v).abs() < 1e-10);
    }

    #[test]
    fn transfer_examples() {
        let a = ang(1, 3);
        let one = QTorusPoly::<f64>::one(a);
        let g = one.transfer_tilde(8).unwrap();
        for s in g.samples() {
            assert!(s.sub(&MatElem::identity(3)).max_abs() < 1e-15);
        }
        let u = QTorusPoly::<f64>::monomial(a, [1, 0], C::one());
        let g = u.transfer_tilde(8).unwrap();
        let hat = g.op_fft();
        let mut mass = vec![];
        for k1 in 0..8 {
            for k2 in 0..8 {
                mass.push(((k1, k2), hat.sample(k1, k2).frob_sq()));
            }
        }
        let total: f64 = mass.iter().map(|m| m.1).sum();
        let at = mass.iter().find(|m| m.0 == (1, 0)).unwrap().1;
        assert!((at - total).abs() < 1e-12 * total);
    }

    #[test]
    fn transfer_coefficients_and_pull_back() {
        let a = ang(2, 7);
        let mut r = rng::seeded(8);
        let f = random_poly::<f64>(a, 3, &mut r);
        let g = f.transfer_tilde(16).unwrap();
        for (&k, &c) in f.coeffs() {
            let want = monomial_matrix::<f64>(a, k, 1).scale(c);
            assert!(g.torus_coefficient(k).unwrap().sub(&want).max_abs() < 1e-12);
        }
        let support: Vec<[i64; 2]> = f.coeffs().keys().copied().collect();
        let back = QTorusPoly::pull_back(a, &g, &support).unwrap();
        for (&k, &c) in f.coeffs() {
            assert!((back.coeff(k) - c).norm() < 1e-12);
        }
        assert!(f.transfer_tilde(4).is_err());
    }
}
