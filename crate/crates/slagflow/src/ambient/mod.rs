//! Analytic ambient geometries evaluable pointwise: flat tori, the Calabi
//! model, its decaying perturbations, the cylindrical model and the
//! hyper-Kähler frame built from any complex surface field.
//!
//! Real coordinates are interleaved, `(Re Z^1, Im Z^1, …, Re Z^n, Im Z^n)`.
//! Metrics follow `g = Re(G_{αβ̄} dZ^α dZ̄^β)` with Kähler form
//! `ω = i G_{αβ̄} dZ^α ∧ dZ̄^β`, so `ω(X, Y) = 2 g(JX, Y)`.

mod calabi;
mod curvature;
mod cylinder;
mod flat;
mod hyperkahler;
pub mod spec_io;
mod synthetic;

pub use calabi::{Automorphy, CalabiField, CalabiModelSpec};
pub use curvature::{curvature_at, CurvatureReport, RiemannTensor};
pub use cylinder::{CylinderField, CylindricalModelSpec};
pub use flat::{FlatField, FlatTorusCY};
pub use hyperkahler::{
    hk_rotate, holomorphicity_residual, rotate_frame, twistor_form, twistor_structure, type_residual, HyperKahlerFrame,
    RotatedField,
};
pub use synthetic::{ProfileId, SyntheticTYField, SyntheticTYPerturbation};

use crate::exterior::Form;
use crate::Point;
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmbientError {
    #[error("point outside the working domain: {0}")]
    Domain(String),
    #[error("|ξ|_h = {0} is not below 1; the model has the wrong curvature sign there")]
    CurvatureSign(f64),
    #[error("invalid geometry: {0}")]
    InvalidSpec(String),
    #[error("perturbation amplitude too large: {0}")]
    Amplitude(String),
    #[error("finite-difference resolution failure: {0}")]
    Resolution(String),
    #[error("inconsistent structure: {0}")]
    Inconsistency(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Flat,
    Calabi,
    SyntheticTy,
    Cylindrical,
    Rotated,
}

/// Pointwise tensors of a Kähler (or parallel-compatible) structure.
#[derive(Clone, Debug)]
pub struct Frame {
    pub g: DMatrix<f64>,
    /// ω(e_a, e_b)
    pub omega: DMatrix<f64>,
    /// J as a matrix acting on tangent vectors.
    pub j: DMatrix<f64>,
    /// Holomorphic volume form.
    pub holo: Form,
}

impl Frame {
    pub fn omega_form(&self) -> Form {
        Form::real_two_form(&self.omega)
    }
}

/// Christoffel symbols Γ^a_{bc}.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    pub dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Christoffel { dim, data: vec![0.0; dim * dim * dim] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.dim + b) * self.dim + c] = v;
    }

    /// Γ(u, v)^a = Γ^a_{bc} u^b v^c
    pub fn apply(&self, u: &Point, v: &Point) -> Point {
        let d = self.dim;
        Point::from_fn(d, |a, _| {
            let mut s = 0.0;
            for b in 0..d {
                if u[b] == 0.0 {
                    continue;
                }
                for c in 0..d {
                    s += self.get(a, b, c) * u[b] * v[c];
                }
            }
            s
        })
    }

    pub fn from_metric_derivs(g: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Result<Self, AmbientError> {
        let d = g.nrows();
        let ginv = g.clone().try_inverse().ok_or_else(|| AmbientError::Inconsistency("singular metric".into()))?;
        let mut out = Christoffel::zeros(d);
        for b in 0..d {
            for c in b..d {
                // lowered Γ_{e b c} = ½(∂_b g_{ec} + ∂_c g_{eb} − ∂_e g_{bc})
                let low: Vec<f64> = (0..d).map(|e| 0.5 * (dg[b][(e, c)] + dg[c][(e, b)] - dg[e][(b, c)])).collect();
                for a in 0..d {
                    let v: f64 = (0..d).map(|e| ginv[(a, e)] * low[e]).sum();
                    out.set(a, b, c, v);
                    out.set(a, c, b, v);
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// An ambient structure evaluable at any point of its (universal-cover)
/// coordinate chart. Evaluators are pure, so concurrent use is safe.
pub trait MetricField: Send + Sync {
    fn kind(&self) -> FieldKind;

    fn complex_dim(&self) -> usize;

    fn real_dim(&self) -> usize {
        2 * self.complex_dim()
    }

    fn frame(&self, p: &Point) -> Result<Frame, AmbientError>;

    fn metric(&self, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        Ok(self.frame(p)?.g)
    }

    /// Local length scale used for finite-difference steps.
    fn injectivity_proxy(&self, _p: &Point) -> f64 {
        1.0
    }

    /// ℓ₀ where the field has a scale function.
    fn scale(&self, _p: &Point) -> Option<f64> {
        None
    }

    fn check_domain(&self, _p: &Point) -> Result<(), AmbientError> {
        Ok(())
    }

    /// ∂_c g for c = 0..d.
    fn metric_derivs(&self, p: &Point) -> Result<Vec<DMatrix<f64>>, AmbientError> {
        let h = 1e-3 * self.injectivity_proxy(p);
        (0..self.real_dim()).map(|c| richardson_derivative(|q| self.metric(q), p, c, h)).collect()
    }

    fn christoffel(&self, p: &Point) -> Result<Christoffel, AmbientError> {
        let g = self.metric(p)?;
        let dg = self.metric_derivs(p)?;
        Christoffel::from_metric_derivs(&g, &dg)
    }
}

impl<T: MetricField + ?Sized> MetricField for &T {
    fn kind(&self) -> FieldKind {
        (**self).kind()
    }
    fn complex_dim(&self) -> usize {
        (**self).complex_dim()
    }
    fn frame(&self, p: &Point) -> Result<Frame, AmbientError> {
        (**self).frame(p)
    }
    fn metric(&self, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        (**self).metric(p)
    }
    fn injectivity_proxy(&self, p: &Point) -> f64 {
        (**self).injectivity_proxy(p)
    }
    fn scale(&self, p: &Point) -> Option<f64> {
        (**self).scale(p)
    }
    fn check_domain(&self, p: &Point) -> Result<(), AmbientError> {
        (**self).check_domain(p)
    }
    fn metric_derivs(&self, p: &Point) -> Result<Vec<DMatrix<f64>>, AmbientError> {
        (**self).metric_derivs(p)
    }
    fn christoffel(&self, p: &Point) -> Result<Christoffel, AmbientError> {
        (**self).christoffel(p)
    }
}

/// Central difference along coordinate `dir` with one Richardson step:
/// (4 D(h/2) − D(h)) / 3.
pub fn richardson_derivative<F>(f: F, p: &Point, dir: usize, h: f64) -> Result<DMatrix<f64>, AmbientError>
where
    F: Fn(&Point) -> Result<DMatrix<f64>, AmbientError>,
{
    if !(h.is_finite() && h > 1e-12) {
        return Err(AmbientError::Resolution(format!("step {h:e} underflows")));
    }
    let central = |h: f64| -> Result<DMatrix<f64>, AmbientError> {
        let mut a = p.clone();
        let mut b = p.clone();
        a[dir] += h;
        b[dir] -= h;
        Ok((f(&a)? - f(&b)?) / (2.0 * h))
    };
    let d1 = central(h)?;
    let d2 = central(0.5 * h)?;
    Ok((d2 * 4.0 - d1) / 3.0)
}

/// Real metric and Kähler-form matrices of a Hermitian matrix G in
/// interleaved coordinates.
pub fn hermitian_to_real(gh: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = gh.nrows();
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        for b in 0..n {
            let (re, im) = (gh[(a, b)].re, gh[(a, b)].im);
            g[(2 * a, 2 * b)] = re;
            g[(2 * a + 1, 2 * b + 1)] = re;
            g[(2 * a, 2 * b + 1)] = im;
            g[(2 * a + 1, 2 * b)] = -im;
            w[(2 * a, 2 * b)] = -2.0 * im;
            w[(2 * a, 2 * b + 1)] = 2.0 * re;
            w[(2 * a + 1, 2 * b)] = -2.0 * re;
            w[(2 * a + 1, 2 * b + 1)] = -2.0 * im;
        }
    }
    (g, w)
}

/// Standard complex structure, J ∂_x = ∂_y.
pub fn standard_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        j[(2 * a + 1, 2 * a)] = 1.0;
        j[(2 * a, 2 * a + 1)] = -1.0;
    }
    j
}

/// dZ^α as a complex one-form in interleaved coordinates.
pub fn dz(n: usize, alpha: usize) -> Form {
    let mut c = vec![Complex64::new(0.0, 0.0); 2 * n];
    c[2 * alpha] = Complex64::new(1.0, 0.0);
    c[2 * alpha + 1] = Complex64::new(0.0, 1.0);
    Form::one_form(&c)
}

/// i^{n²}/2 · Ω∧Ω̄, the right side of the Monge–Ampère identity.
pub fn volume_rhs(holo: &Form, n: usize) -> Complex64 {
    let i_pow = Complex64::new(0.0, 1.0).powu((n * n) as u32);
    holo.wedge(&holo.conj()).top_coeff() * i_pow * 0.5
}

/// Relative residual of ω^n = i^{n²}/2 · Ω∧Ω̄ at a frame.
pub fn monge_ampere_residual(frame: &Frame, n: usize) -> f64 {
    let lhs = frame.omega_form().power(n).top_coeff();
    let rhs = volume_rhs(&frame.holo, n);
    (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE)
}

/// sup |g(JX, JY) − g(X, Y)| over basis vectors.
pub fn compatibility_residual(frame: &Frame) -> f64 {
    let d = &frame.j.transpose() * &frame.g * &frame.j - &frame.g;
    d.amax()
}

/// Largest entry modulus of a complex matrix.
pub fn cmax(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Is `m` symmetric positive definite (to rounding)?
pub fn is_spd(m: &DMatrix<f64>) -> bool {
    let asym = (m - m.transpose()).amax();
    asym <= 1e-10 * m.amax().max(1.0) && m.clone().cholesky().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_identity_gives_euclidean_pair() {
        let gh = DMatrix::identity(2, 2).map(|x: f64| Complex64::new(x, 0.0));
        let (g, w) = hermitian_to_real(&gh);
        assert_eq!(g, DMatrix::identity(4, 4));
        // ω = i dz∧dz̄ = 2 dx∧dy
        assert_eq!(w[(0, 1)], 2.0);
        assert_eq!(w[(2, 3)], 2.0);
        let j = standard_j(2);
        assert!(((j.transpose() * &g) * 2.0 - &w).amax() < 1e-15);
    }

    #[test]
    fn richardson_is_fourth_order_on_polynomials() {
        let f = |q: &Point| Ok(DMatrix::from_element(1, 1, q[0].powi(4)));
        let p = Point::from_vec(vec![1.3]);
        let d = richardson_derivative(f, &p, 0, 0.1).unwrap();
        assert!((d[(0, 0)] - 4.0 * 1.3f64.powi(3)).abs() < 1e-12);
    }
}
