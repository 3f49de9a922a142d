//! Finite trace algebra `M_n`: complex matrices with the normalized trace
//! `τ = Tr/n`, Schatten norms, the PSD order and polar decomposition.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{lit, Real, C};
use crate::tolerances;

/// An `n × n` complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatElem<T: Real> {
    n: usize,
    data: Vec<C<T>>,
}

/// Spectral decomposition of a self-adjoint matrix: `a = V diag(values) V*`,
/// eigenvalues ascending, eigenvectors in the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct Eigh<T: Real> {
    pub values: Vec<T>,
    pub vectors: MatElem<T>,
}

/// Schatten exponent, `p ∈ [1, ∞]`.
pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return invalid(format!("norm exponent must lie in [1, inf], got {p}"));
    }
    Ok(())
}

impl<T: Real> MatElem<T> {
    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "matrix dimension must be positive");
        Self { n, data: vec![C::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, C::one())
    }

    pub fn scalar(n: usize, c: C<T>) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = c;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_vec(n: usize, data: Vec<C<T>>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return invalid(format!("expected {} entries for n={n}, got {}", n * n, data.len()));
        }
        Ok(Self { n, data })
    }

    pub fn from_real_diag(d: &[T]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = Complex::new(x, T::zero());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C<T>) {
        self.data[i * self.n + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, c: C<T>) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&z| z * c).collect() }
    }

    pub fn scale_real(&self, c: T) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&z| z * c).collect() }
    }

    /// Normalized trace `Tr/n`.
    pub fn trace(&self) -> C<T> {
        self.raw_trace() / lit::<T>(self.n as f64)
    }

    pub fn raw_trace(&self) -> C<T> {
        (0..self.n).map(|i| self.get(i, i)).fold(C::zero(), |a, b| a + b)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// `Σ |x_ij|²`.
    pub fn frob_sq(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermitian_part(&self) -> Self {
        let half = lit::<T>(0.5);
        Self::from_fn(self.n, |i, j| (self.get(i, j) + self.get(j, i).conj()) * half)
    }

    /// `max |x - x*|` entrywise.
    pub fn self_adjoint_defect(&self) -> T {
        let mut d = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = vec![C::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    dst[j] = dst[j] + a * row[j];
                }
            }
        }
        Self { n, data: out }
    }

    /// `x* x`.
    pub fn gram(&self) -> Self {
        self.adjoint().matmul(self)
    }

    /// Eigen-decomposition of the self-adjoint part by cyclic complex Jacobi.
    pub fn eigh(&self) -> Eigh<T> {
        jacobi_eigh(&self.hermitian_part())
    }

    /// Smallest eigenvalue of the self-adjoint part.
    pub fn min_eig(&self) -> T {
        self.eigh().values[0]
    }

    /// Functional calculus `f(a)` on the self-adjoint part.
    pub fn herm_fn(&self, f: impl Fn(T) -> T) -> Self {
        let e = self.eigh();
        let vals: Vec<T> = e.values.iter().map(|&v| f(v)).collect();
        reassemble(&e.vectors, &vals)
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<T> {
        let mut s: Vec<T> = self.gram().eigh().values.iter().map(|&v| v.max(T::zero()).sqrt()).collect();
        s.reverse();
        s
    }

    /// `|x| = (x*x)^{1/2}`.
    pub fn abs(&self) -> Self {
        self.gram().herm_fn(|v| v.max(T::zero()).sqrt())
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> T {
        self.singular_values()[0]
    }

    /// `(τ|x|^p)^{1/p}`, or the operator norm for `p = ∞`.
    pub fn schatten_norm(&self, p: f64) -> Result<T> {
        check_exponent(p)?;
        if !self.is_finite() {
            return invalid("non-finite matrix entries");
        }
        let s = self.singular_values();
        if p.is_infinite() {
            return Ok(s[0]);
        }
        let pt = lit::<T>(p);
        let n = lit::<T>(self.n as f64);
        let smax = s[0];
        if smax == T::zero() {
            return Ok(T::zero());
        }
        // scale out the largest value to keep powers in range
        let sum: T = s.iter().map(|&v| (v / smax).powf(pt)).sum();
        Ok(smax * (sum / n).powf(T::one() / pt))
    }

    /// `τ|x|^p`, the unnormalized-by-root power used when norms are summed over grids.
    pub fn schatten_pow(&self, p: f64) -> T {
        let pt = lit::<T>(p);
        let s = self.singular_values();
        let sum: T = s.iter().map(|&v| v.powf(pt)).sum();
        sum / lit::<T>(self.n as f64)
    }

    /// Polar decomposition `x = u |x|` with `u` unitary.
    pub fn polar_decompose(&self) -> Result<(Self, Self)> {
        if !self.is_finite() {
            return invalid("non-finite matrix entries");
        }
        let n = self.n;
        let e = self.gram().eigh();
        let svals: Vec<T> = e.values.iter().map(|&v| v.max(T::zero()).sqrt()).collect();
        let m = reassemble(&e.vectors, &svals);
        let smax = svals.iter().copied().fold(T::zero(), T::max);
        let thr = smax * lit::<T>(n as f64) * T::epsilon() * lit::<T>(64.0);
        let col = |mat: &Self, j: usize| -> Vec<C<T>> { (0..n).map(|i| mat.get(i, j)).collect() };

        // left singular vectors for the nonzero part, then complete
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| svals[b].partial_cmp(&svals[a]).unwrap_or(std::cmp::Ordering::Equal));
        let mut lefts: Vec<Option<Vec<C<T>>>> = vec![None; n];
        let mut basis: Vec<Vec<C<T>>> = Vec::new();
        for &j in &order {
            if svals[j] > thr && smax > T::zero() {
                let v = col(&e.vectors, j);
                let mut u: Vec<C<T>> = (0..n)
                    .map(|i| (0..n).map(|k| self.get(i, k) * v[k]).fold(C::zero(), |a, b| a + b) / svals[j])
                    .collect();
                if let Some(w) = orthonormalize(&mut u, &basis) {
                    basis.push(w.clone());
                    lefts[j] = Some(w);
                }
            }
        }
        for &j in &order {
            if lefts[j].is_some() {
                continue;
            }
            let mut cands: Vec<Vec<C<T>>> = vec![col(&e.vectors, j)];
            for k in 0..n {
                let mut ek = vec![C::zero(); n];
                ek[k] = C::one();
                cands.push(ek);
            }
            for mut c in cands {
                if let Some(w) = orthonormalize(&mut c, &basis) {
                    basis.push(w.clone());
                    lefts[j] = Some(w);
                    break;
                }
            }
        }
        let mut u = Self::zeros(n);
        for j in 0..n {
            let uj = lefts[j].as_ref().expect("completion always succeeds");
            let vj = col(&e.vectors, j);
            for r in 0..n {
                for c in 0..n {
                    let cur = u.get(r, c);
                    u.set(r, c, cur + uj[r] * vj[c].conj());
                }
            }
        }
        Ok((u, m))
    }

    /// Functional-calculus power of a PSD matrix. Eigenvalues above
    /// `-1e-10 ||a||` are clipped to zero; anything lower is rejected.
    pub fn mat_power(&self, alpha: f64) -> Result<Self> {
        if !self.is_finite() {
            return invalid("non-finite matrix entries");
        }
        let scale = self.max_abs().max(T::min_positive_value());
        if self.self_adjoint_defect() > lit::<T>(tolerances::EIG_CLIP).max(T::tiny()) * scale.max(T::one()) {
            return invalid("mat_power expects a self-adjoint matrix");
        }
        let e = self.eigh();
        let norm = e.values.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        let floor = -lit::<T>(tolerances::EIG_CLIP).max(T::epsilon() * lit(16.0)) * norm;
        let a = lit::<T>(alpha);
        let mut vals = Vec::with_capacity(self.n);
        for &v in &e.values {
            if v < floor {
                return invalid(format!("negative eigenvalue {v} in mat_power"));
            }
            let v = v.max(T::zero());
            let w = if alpha == 0.0 {
                T::one()
            } else if v == T::zero() {
                if alpha < 0.0 {
                    return invalid("zero eigenvalue with negative exponent");
                }
                T::zero()
            } else {
                v.powf(a)
            };
            vals.push(w);
        }
        Ok(reassemble(&e.vectors, &vals))
    }
}

/// `a ⪯ b` up to `tol`: the smallest eigenvalue of `b - a` is at least `-tol`.
pub fn psd_leq<T: Real>(a: &MatElem<T>, b: &MatElem<T>, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return invalid("dimension mismatch in psd_leq");
    }
    let scale = a.max_abs().max(b.max_abs()).max(T::one());
    let allowed = lit::<T>(tol).max(T::tiny()) * scale;
    if a.self_adjoint_defect() > allowed || b.self_adjoint_defect() > allowed {
        return invalid("psd_leq expects self-adjoint arguments");
    }
    Ok(b.sub(a).min_eig() >= -lit::<T>(tol))
}

/// `V diag(vals) V*`.
pub fn reassemble<T: Real>(v: &MatElem<T>, vals: &[T]) -> MatElem<T> {
    let n = v.dim();
    let mut out = MatElem::zeros(n);
    for k in 0..n {
        let lam = vals[k];
        if lam == T::zero() {
            continue;
        }
        for i in 0..n {
            let vik = v.get(i, k) * lam;
            for j in 0..n {
                let cur = out.get(i, j);
                out.set(i, j, cur + vik * v.get(j, k).conj());
            }
        }
    }
    out
}

fn orthonormalize<T: Real>(u: &mut [C<T>], basis: &[Vec<C<T>>]) -> Option<Vec<C<T>>> {
    for _ in 0..2 {
        for b in basis {
            let dot = b.iter().zip(u.iter()).map(|(x, y)| x.conj() * y).fold(C::zero(), |a, z| a + z);
            for (ui, bi) in u.iter_mut().zip(b.iter()) {
                *ui = *ui - *bi * dot;
            }
        }
    }
    let nrm = u.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    if nrm < lit(1e-6) {
        return None;
    }
    Some(u.iter().map(|&z| z / nrm).collect())
}

fn jacobi_eigh<T: Real>(h: &MatElem<T>) -> Eigh<T> {
    let n = h.dim();
    let mut a = h.data.clone();
    let mut v = MatElem::<T>::identity(n).data;
    let scale = h.frob_sq().sqrt();
    let eps = T::epsilon();
    if scale > T::zero() {
        for _sweep in 0..64 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off + a[p * n + q].norm_sqr();
                }
            }
            if off.sqrt() <= eps * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    let mag = apq.norm();
                    if mag <= eps * eps * scale {
                        continue;
                    }
                    let phase = apq / mag;
                    let pc = phase.conj();
                    let app = a[p * n + p].re;
                    let aqq = a[q * n + q].re;
                    let theta = (aqq - app) / (lit::<T>(2.0) * mag);
                    let t = if theta >= T::zero() {
                        T::one() / (theta + (theta * theta + T::one()).sqrt())
                    } else {
                        -T::one() / (-theta + (theta * theta + T::one()).sqrt())
                    };
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = t * c;
                    for r in 0..n {
                        let x = a[r * n + p];
                        let y = a[r * n + q];
                        a[r * n + p] = x * c - y * pc * s;
                        a[r * n + q] = x * s + y * pc * c;
                    }
                    for col in 0..n {
                        let x = a[p * n + col];
                        let y = a[q * n + col];
                        a[p * n + col] = x * c - y * phase * s;
                        a[q * n + col] = x * s + y * phase * c;
                    }
                    for r in 0..n {
                        let x = v[r * n + p];
                        let y = v[r * n + q];
                        v[r * n + p] = x * c - y * pc * s;
                        v[r * n + q] = x * s + y * pc * c;
                    }
                    a[p * n + q] = C::zero();
                    a[q * n + p] = C::zero();
                    a[p * n + p] = Complex::new(a[p * n + p].re, T::zero());
                    a[q * n + q] = Complex::new(a[q * n + q].re, T::zero());
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i * n + i].re.partial_cmp(&a[j * n + j].re).unwrap_or(std::cmp::Ordering::Equal));
    let values = idx.iter().map(|&i| a[i * n + i].re).collect();
    let vectors = MatElem::from_fn(n, |r, c| v[r * n + idx[c]]);
    Eigh { values, vectors }
}

impl<T: Real> Add for &MatElem<T> {
    type Output = MatElem<T>;
    fn add(self, o: &MatElem<T>) -> MatElem<T> {
        assert_eq!(self.n, o.n, "dimension mismatch");
        MatElem { n: self.n, data: self.data.iter().zip(&o.data).map(|(&a, &b)| a + b).collect() }
    }
}

impl<T: Real> Sub for &MatElem<T> {
    type Output = MatElem<T>;
    fn sub(self, o: &MatElem<T>) -> MatElem<T> {
        assert_eq!(self.n, o.n, "dimension mismatch");
        MatElem { n: self.n, data: self.data.iter().zip(&o.data).map(|(&a, &b)| a - b).collect() }
    }
}

impl<T: Real> Mul for &MatElem<T> {
    type Output = MatElem<T>;
    fn mul(self, o: &MatElem<T>) -> MatElem<T> {
        self.matmul(o)
    }
}

impl<T: Real> Neg for &MatElem<T> {
    type Output = MatElem<T>;
    fn neg(self) -> MatElem<T> {
        self.scale_real(-T::one())
    }
}

impl<T: Real> MatElem<T> {
    pub fn add(&self, o: &Self) -> Self {
        self + o
    }
    pub fn sub(&self, o: &Self) -> Self {
        self - o
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, LabRng};

    fn m64(rows: &[&[(f64, f64)]]) -> MatElem<f64> {
        let n = rows.len();
        MatElem::from_fn(n, |i, j| Complex::new(rows[i][j].0, rows[i][j].1))
    }

    #[test]
    fn identity_norms() {
        for n in 1..5 {
            let id = MatElem::<f64>::identity(n);
            assert!((id.schatten_norm(2.0).unwrap() - 1.0).abs() < 1e-14);
            assert!((id.schatten_norm(f64::INFINITY).unwrap() - 1.0).abs() < 1e-14);
            assert!((id.trace().re - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn diag_three_four() {
        let d = MatElem::<f64>::from_real_diag(&[3.0, 4.0]);
        let v = d.schatten_norm(2.0).unwrap();
        assert!((v - (12.5f64).sqrt()).abs() < 1e-12);
        assert!((d.schatten_norm(f64::INFINITY).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn two_norm_matches_entry_sum() {
        let mut r = rng::seeded(11);
        let x = rng::gaussian_matrix::<f64>(&mut r, 4);
        let oracle = (x.as_slice().iter().map(|z| z.re * z.re + z.im * z.im).sum::<f64>()).sqrt() / 2.0;
        assert!((x.schatten_norm(2.0).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_exponent_and_nan() {
        let x = MatElem::<f64>::identity(2);
        assert!(x.schatten_norm(0.5).is_err());
        let y = MatElem::<f64>::scalar(2, Complex::new(f64::NAN, 0.0));
        assert!(y.schatten_norm(2.0).is_err());
    }

    #[test]
    fn eigh_reconstructs() {
        let mut r = rng::seeded(3);
        for n in [1, 2, 3, 5, 8] {
            let h = rng::gaussian_matrix::<f64>(&mut r, n).hermitian_part();
            let e = h.eigh();
            let back = reassemble(&e.vectors, &e.values);
            assert!(back.sub(&h).max_abs() < 1e-12, "n={n}");
            let vv = e.vectors.adjoint().matmul(&e.vectors);
            assert!(vv.sub(&MatElem::identity(n)).max_abs() < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn polar_examples() {
        let neg = MatElem::<f64>::scalar(1, Complex::new(-1.0, 0.0));
        let (u, m) = neg.polar_decompose().unwrap();
        assert!((u.get(0, 0).re + 1.0).abs() < 1e-14);
        assert!((m.get(0, 0).re - 1.0).abs() < 1e-14);

        let pos = m64(&[&[(2.0, 0.0), (0.5, 0.5)], &[(0.5, -0.5), (3.0, 0.0)]]);
        let (u, m) = pos.polar_decompose().unwrap();
        assert!(u.sub(&MatElem::identity(2)).max_abs() < 1e-12);
        assert!(m.sub(&pos).max_abs() < 1e-12);

        let mut r = rng::seeded(5);
        let x = rng::gaussian_matrix::<f64>(&mut r, 3);
        let (u, m) = x.polar_decompose().unwrap();
        assert!(u.matmul(&m).sub(&x).max_abs() < 1e-12);
        assert!(u.adjoint().matmul(&u).sub(&MatElem::identity(3)).max_abs() < 1e-12);
        assert!(m.min_eig() > -1e-12);
    }

    #[test]
    fn polar_rank_deficient() {
        let x = m64(&[&[(1.0, 0.0), (2.0, 0.0)], &[(2.0, 0.0), (4.0, 0.0)]]);
        let (u, m) = x.polar_decompose().unwrap();
        assert!(u.matmul(&m).sub(&x).max_abs() < 1e-12);
        let zero = MatElem::<f64>::zeros(3);
        let (u, m) = zero.polar_decompose().unwrap();
        assert!(u.matmul(&m).max_abs() < 1e-15);
    }

    #[test]
    fn psd_leq_examples() {
        let z = MatElem::<f64>::zeros(3);
        let id = MatElem::<f64>::identity(3);
        assert!(psd_leq(&z, &id, 0.0).unwrap());
        assert!(!psd_leq(&id, &z, 0.0).unwrap());
        let mut r = rng::seeded(8);
        let a = rng::random_psd::<f64>(&mut r, 4);
        let c = rng::gaussian_matrix::<f64>(&mut r, 4);
        let b = a.add(&c.gram());
        assert!(psd_leq(&a, &b, 1e-12).unwrap());
        let nh = m64(&[&[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]]);
        assert!(psd_leq(&nh, &MatElem::identity(2), 1e-12).is_err());
    }

    #[test]
    fn power_examples() {
        let id = MatElem::<f64>::identity(3);
        assert!(id.mat_power(0.5).unwrap().sub(&id).max_abs() < 1e-14);
        let d = MatElem::<f64>::from_real_diag(&[4.0, 9.0]);
        let r = d.mat_power(0.5).unwrap();
        assert!(r.sub(&MatElem::from_real_diag(&[2.0, 3.0])).max_abs() < 1e-12);
        let mut g = rng::seeded(2);
        let a = rng::random_psd::<f64>(&mut g, 5);
        assert!(a.mat_power(1.0).unwrap().sub(&a).max_abs() < 1e-12);
        let neg = MatElem::<f64>::from_real_diag(&[1.0, -0.1]);
        assert!(neg.mat_power(0.5).is_err());
    }

    #[test]
    fn single_precision_path() {
        let d = MatElem::<f32>::from_real_diag(&[3.0, 4.0]);
        let v = d.schatten_norm(2.0).unwrap();
        assert!((v - 12.5f32.sqrt()).abs() < 1e-5);
        let mut r: LabRng = rng::seeded(1);
        let x = rng::gaussian_matrix::<f32>(&mut r, 3);
        let (u, m) = x.polar_decompose().unwrap();
        assert!(u.matmul(&m).sub(&x).max_abs() < 1e-4);
    }
}
