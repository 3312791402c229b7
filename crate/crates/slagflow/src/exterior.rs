//! Constant-coefficient exterior forms on R^d with complex coefficients,
//! stored sparsely by the bitmask of the basis covectors dx^i.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    dim: usize,
    degree: usize,
    coeffs: BTreeMap<u32, Complex64>,
}

fn wedge_sign(a: u32, b: u32) -> f64 {
    // count pairs (i in a, j in b) with i > j
    let mut count = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        count += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    if count % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Form {
    pub fn zero(dim: usize, degree: usize) -> Self {
        assert!(dim <= 31);
        Form { dim, degree, coeffs: BTreeMap::new() }
    }

    pub fn scalar(dim: usize, c: Complex64) -> Self {
        let mut f = Form::zero(dim, 0);
        f.coeffs.insert(0, c);
        f
    }

    pub fn one_form(coeffs: &[Complex64]) -> Self {
        let mut f = Form::zero(coeffs.len(), 1);
        for (i, c) in coeffs.iter().enumerate() {
            if *c != Complex64::new(0.0, 0.0) {
                f.coeffs.insert(1 << i, *c);
            }
        }
        f
    }

    pub fn real_one_form(coeffs: &DVector<f64>) -> Self {
        let c: Vec<Complex64> = coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Form::one_form(&c)
    }

    /// The two-form with ω(e_a, e_b) = w[(a, b)] for an antisymmetric `w`.
    pub fn two_form(w: &DMatrix<Complex64>) -> Self {
        let d = w.nrows();
        let mut f = Form::zero(d, 2);
        for a in 0..d {
            for b in (a + 1)..d {
                let c = w[(a, b)];
                if c != Complex64::new(0.0, 0.0) {
                    f.coeffs.insert((1 << a) | (1 << b), c);
                }
            }
        }
        f
    }

    pub fn real_two_form(w: &DMatrix<f64>) -> Self {
        Form::two_form(&w.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeff(&self, mask: u32) -> Complex64 {
        self.coeffs.get(&mask).copied().unwrap_or_default()
    }

    /// Coefficient of dx^0 ∧ … ∧ dx^{d−1}.
    pub fn top_coeff(&self) -> Complex64 {
        self.coeff(((1u64 << self.dim) - 1) as u32)
    }

    pub fn wedge(&self, other: &Form) -> Form {
        assert_eq!(self.dim, other.dim);
        let mut out = Form::zero(self.dim, self.degree + other.degree);
        for (&a, &ca) in &self.coeffs {
            for (&b, &cb) in &other.coeffs {
                if a & b != 0 {
                    continue;
                }
                let e = out.coeffs.entry(a | b).or_default();
                *e += ca * cb * wedge_sign(a, b);
            }
        }
        out
    }

    pub fn power(&self, k: usize) -> Form {
        let mut out = Form::scalar(self.dim, Complex64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.wedge(self);
        }
        out
    }

    pub fn add(&self, other: &Form) -> Form {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.degree, other.degree);
        let mut out = self.clone();
        for (&m, &c) in &other.coeffs {
            *out.coeffs.entry(m).or_default() += c;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Form {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= s;
        }
        out
    }

    pub fn conj(&self) -> Form {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = c.conj();
        }
        out
    }

    pub fn re(&self) -> Form {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = Complex64::new(c.re, 0.0);
        }
        out
    }

    pub fn im(&self) -> Form {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = Complex64::new(c.im, 0.0);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Evaluate a k-form on k vectors.
    pub fn eval(&self, vectors: &[DVector<f64>]) -> Complex64 {
        assert_eq!(vectors.len(), self.degree);
        let k = self.degree;
        let mut total = Complex64::new(0.0, 0.0);
        for (&mask, &c) in &self.coeffs {
            let rows: Vec<usize> = (0..self.dim).filter(|i| mask & (1 << i) != 0).collect();
            let m = DMatrix::from_fn(k, k, |r, s| vectors[s][rows[r]]);
            total += c * m.determinant();
        }
        total
    }

    /// Matrix of a two-form, w[(a, b)] = ω(e_a, e_b).
    pub fn two_form_matrix(&self) -> DMatrix<Complex64> {
        assert_eq!(self.degree, 2);
        let mut w = DMatrix::zeros(self.dim, self.dim);
        for (&mask, &c) in &self.coeffs {
            let a = mask.trailing_zeros() as usize;
            let b = (31 - mask.leading_zeros()) as usize;
            w[(a, b)] = c;
            w[(b, a)] = -c;
        }
        w
    }

    /// Pull back along a linear map given as a d×d' matrix (columns are
    /// images of the new basis vectors).
    pub fn pullback(&self, m: &DMatrix<f64>) -> Form {
        assert_eq!(m.nrows(), self.dim);
        let d2 = m.ncols();
        let mut out = Form::zero(d2, self.degree);
        let k = self.degree;
        let masks: Vec<u32> = (0u32..(1u32 << d2)).filter(|x| x.count_ones() as usize == k).collect();
        for target in masks {
            let cols: Vec<DVector<f64>> =
                (0..d2).filter(|i| target & (1 << i) != 0).map(|i| m.column(i).into_owned()).collect();
            let v = self.eval(&cols);
            if v.norm() > 0.0 {
                out.coeffs.insert(target, v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn wedge_is_antisymmetric_on_one_forms() {
        let a = Form::one_form(&[c(1.0), c(2.0), c(0.0)]);
        let b = Form::one_form(&[c(0.0), c(1.0), c(3.0)]);
        let ab = a.wedge(&b);
        let ba = b.wedge(&a);
        assert_eq!(ab.add(&ba).max_abs(), 0.0);
        assert_eq!(a.wedge(&a).max_abs(), 0.0);
    }

    #[test]
    fn symplectic_power_on_r4() {
        let mut w = DMatrix::zeros(4, 4);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = -1.0;
        w[(2, 3)] = 1.0;
        w[(3, 2)] = -1.0;
        let om = Form::real_two_form(&w);
        // (dx0∧dx1 + dx2∧dx3)^2 = 2 dx0∧dx1∧dx2∧dx3
        assert!((om.power(2).top_coeff() - c(2.0)).norm() < 1e-14);
    }

    #[test]
    fn eval_matches_determinant() {
        let a = Form::one_form(&[c(1.0), c(0.0)]);
        let b = Form::one_form(&[c(0.0), c(1.0)]);
        let f = a.wedge(&b);
        let v = vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![3.0, 4.0])];
        assert!((f.eval(&v) - c(-2.0)).norm() < 1e-14);
    }

    #[test]
    fn two_form_matrix_roundtrip() {
        let w = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, -2.0, -1.0, 0.0, 3.0, 2.0, -3.0, 0.0]);
        let f = Form::real_two_form(&w);
        let back = f.two_form_matrix().map(|z| z.re);
        assert_eq!(back, w);
    }

    #[test]
    fn pullback_of_area_form_is_jacobian() {
        let a = Form::one_form(&[c(1.0), c(0.0)]).wedge(&Form::one_form(&[c(0.0), c(1.0)]));
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        assert!((a.pullback(&m).top_coeff() - c(6.0)).norm() < 1e-14);
    }
}
