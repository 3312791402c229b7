//! Moser transport of Lagrangians from a model symplectic form to a perturbed
//! one, with the metric-variation budget along the way.

mod certificate;
mod transport;

pub use certificate::{certify_bounded_geometry, Certificate, Clause};
pub use transport::{
    envelope, sandwich_check, transport, FlowTraceRow, PerturbationBudget, SandwichRow, TransportOptions,
    TransportResult,
};

use crate::ambient::{
    AmbientError, CalabiField, Christoffel, FieldKind, Frame, MetricField, SyntheticTYField, SyntheticTYPerturbation,
};
use crate::lagmesh::LagError;
use crate::Point;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoserError {
    #[error("ω_t is nearly degenerate at {point:?} (condition number {condition:e})")]
    Degenerate { point: Vec<f64>, condition: f64 },
    #[error("vertex {vertex} left the working domain at t = {t}: {reason}")]
    DomainEscape { vertex: usize, t: f64, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Ambient(#[from] AmbientError),
    #[error(transparent)]
    Mesh(#[from] LagError),
}

pub type Primitive = dyn Fn(&Point) -> Result<DVector<f64>, AmbientError> + Send + Sync;

/// (ω_mod, g_mod) and (ω′, g′) with a primitive dβ = ω′ − ω_mod.
#[derive(Clone)]
pub struct SymplecticPair {
    pub base: Arc<dyn MetricField>,
    pub target: Arc<dyn MetricField>,
    pub primitive: Arc<Primitive>,
}

impl std::fmt::Debug for SymplecticPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymplecticPair").field("base", &self.base.kind()).field("target", &self.target.kind()).finish()
    }
}

impl SymplecticPair {
    /// The Calabi model against its synthetic perturbation, with the stored
    /// exact primitive β = Φ*α − α.
    pub fn synthetic(calabi: CalabiField, pert: SyntheticTYPerturbation) -> Result<Self, AmbientError> {
        let target = Arc::new(SyntheticTYField::new(calabi.clone(), pert)?);
        let t2 = target.clone();
        Ok(SymplecticPair { base: Arc::new(calabi), target, primitive: Arc::new(move |p| t2.beta(p)) })
    }

    /// ω′ = ω_mod with β = 0.
    pub fn identity<F: MetricField + Clone + 'static>(field: F) -> Self {
        let d = field.real_dim();
        SymplecticPair {
            base: Arc::new(field.clone()),
            target: Arc::new(field),
            primitive: Arc::new(move |_| Ok(DVector::zeros(d))),
        }
    }

    pub fn real_dim(&self) -> usize {
        self.base.real_dim()
    }

    pub fn omega_t(&self, t: f64, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        Ok(self.base.frame(p)?.omega * (1.0 - t) + self.target.frame(p)?.omega * t)
    }

    pub fn metric_t(&self, t: f64, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        Ok(self.base.metric(p)? * (1.0 - t) + self.target.metric(p)? * t)
    }

    /// max |dβ − (ω′ − ω_mod)| at p, with dβ from fourth-order differences.
    pub fn primitive_residual(&self, p: &Point) -> Result<f64, AmbientError> {
        let d = self.real_dim();
        let h = 1e-3 * self.base.injectivity_proxy(p);
        let mut db = Vec::with_capacity(d);
        for c in 0..d {
            let at = |s: f64| -> Result<DVector<f64>, AmbientError> {
                let mut q = p.clone();
                q[c] += s;
                (self.primitive)(&q)
            };
            db.push((at(-2.0 * h)? - at(2.0 * h)? + (at(h)? - at(-h)?) * 8.0) / (12.0 * h));
        }
        let want = self.target.frame(p)?.omega - self.base.frame(p)?.omega;
        let scale = want.amax().max(1e-300);
        let dbeta = DMatrix::from_fn(d, d, |a, b| db[a][b] - db[b][a]);
        Ok((dbeta - &want).amax() / scale.max(self.base.frame(p)?.omega.amax() * 1e-8))
    }

    /// The interpolated structure at time t as an ambient field.
    pub fn at(&self, t: f64) -> InterpolatedField {
        InterpolatedField { pair: self.clone(), t }
    }
}

/// V_t with i_{V}ω_t = −β, i.e. W_t V = β for W_t = ω_t(e_a, e_b).
pub fn solve_moser_field(pair: &SymplecticPair, t: f64, p: &Point) -> Result<DVector<f64>, MoserError> {
    let w = pair.omega_t(t, p)?;
    let beta = (pair.primitive)(p)?;
    solve_skew(&w, &beta, p)
}

pub(crate) fn solve_skew(w: &DMatrix<f64>, beta: &DVector<f64>, p: &Point) -> Result<DVector<f64>, MoserError> {
    let sv = w.clone().singular_values();
    let condition = sv.max() / sv.min().max(1e-300);
    if condition > 1e12 {
        return Err(MoserError::Degenerate { point: p.as_slice().to_vec(), condition });
    }
    w.clone().lu().solve(beta).ok_or(MoserError::Degenerate { point: p.as_slice().to_vec(), condition })
}

/// (X, (1−t)ω_mod + tω′, (1−t)g_mod + tg′). J is taken from the base, and Ω
/// is interpolated linearly, so only ω_t and g_t are meaningful.
#[derive(Clone, Debug)]
pub struct InterpolatedField {
    pub pair: SymplecticPair,
    pub t: f64,
}

impl MetricField for InterpolatedField {
    fn kind(&self) -> FieldKind {
        if self.t == 0.0 {
            self.pair.base.kind()
        } else {
            self.pair.target.kind()
        }
    }
    fn complex_dim(&self) -> usize {
        self.pair.base.complex_dim()
    }
    fn frame(&self, p: &Point) -> Result<Frame, AmbientError> {
        let a = self.pair.base.frame(p)?;
        let b = self.pair.target.frame(p)?;
        let (s, t) = (1.0 - self.t, self.t);
        Ok(Frame {
            g: a.g * s + b.g * t,
            omega: a.omega * s + b.omega * t,
            j: a.j,
            holo: a.holo.scale(s.into()).add(&b.holo.scale(t.into())),
        })
    }
    fn metric(&self, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        self.pair.metric_t(self.t, p)
    }
    fn injectivity_proxy(&self, p: &Point) -> f64 {
        self.pair.base.injectivity_proxy(p)
    }
    fn scale(&self, p: &Point) -> Option<f64> {
        self.pair.base.scale(p)
    }
    fn check_domain(&self, p: &Point) -> Result<(), AmbientError> {
        self.pair.base.check_domain(p)?;
        self.pair.target.check_domain(p)
    }
    fn metric_derivs(&self, p: &Point) -> Result<Vec<DMatrix<f64>>, AmbientError> {
        if self.t == 0.0 {
            return self.pair.base.metric_derivs(p);
        }
        if self.t == 1.0 {
            return self.pair.target.metric_derivs(p);
        }
        let a = self.pair.base.metric_derivs(p)?;
        let b = self.pair.target.metric_derivs(p)?;
        Ok(a.into_iter().zip(b).map(|(x, y)| x * (1.0 - self.t) + y * self.t).collect())
    }
    fn christoffel(&self, p: &Point) -> Result<Christoffel, AmbientError> {
        if self.t == 0.0 {
            return self.pair.base.christoffel(p);
        }
        if self.t == 1.0 {
            return self.pair.target.christoffel(p);
        }
        Christoffel::from_metric_derivs(&self.metric(p)?, &self.metric_derivs(p)?)
    }
}

/// Primitive of a closed two-form η on a cylinder ℝ⁺_ℓ × Y decaying as
/// ℓ → ∞: β_a(ℓ, y) = −∫_ℓ^∞ η(∂_ℓ, ∂_a)(s, y) ds, β_ℓ = 0, by adaptive
/// Simpson quadrature on [ℓ, ℓ + cutoff].
pub fn cylinder_primitive<E>(eta: E, p: &Point, cutoff: f64, tol: f64) -> Result<DVector<f64>, AmbientError>
where
    E: Fn(&Point) -> Result<DMatrix<f64>, AmbientError>,
{
    let d = p.len();
    let integrand = |s: f64| -> Result<DVector<f64>, AmbientError> {
        let mut q = p.clone();
        q[0] = s;
        let e = eta(&q)?;
        Ok(DVector::from_fn(d, |a, _| e[(0, a)]))
    };
    let (a, b) = (p[0], p[0] + cutoff);
    let fa = integrand(a)?;
    let fb = integrand(b)?;
    let fm = integrand(0.5 * (a + b))?;
    let whole = (&fa + &fm * 4.0 + &fb) * ((b - a) / 6.0);
    let total = simpson(&integrand, a, b, fa, fm, fb, whole, tol, 40)?;
    let mut beta = -total;
    beta[0] = 0.0;
    Ok(beta)
}

#[allow(clippy::too_many_arguments)]
fn simpson<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: DVector<f64>,
    fm: DVector<f64>,
    fb: DVector<f64>,
    whole: DVector<f64>,
    tol: f64,
    depth: usize,
) -> Result<DVector<f64>, AmbientError>
where
    F: Fn(f64) -> Result<DVector<f64>, AmbientError>,
{
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m))?;
    let frm = f(0.5 * (m + b))?;
    let left = (&fa + &flm * 4.0 + &fm) * ((m - a) / 6.0);
    let right = (&fm + &frm * 4.0 + &fb) * ((b - m) / 6.0);
    let err = (&left + &right - &whole).amax();
    if depth == 0 || err <= 15.0 * tol {
        return Ok(&left + &right + (&left + &right - whole) / 15.0);
    }
    Ok(simpson(f, a, m, fa, flm, fm.clone(), left, 0.5 * tol, depth - 1)?
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{CalabiModelSpec, ProfileId};
    use num_complex::Complex64;
    use std::f64::consts::TAU;

    fn pair(amp: f64) -> SymplecticPair {
        let c = CalabiField::new(CalabiModelSpec::square(2, TAU).unwrap());
        SymplecticPair::synthetic(c, SyntheticTYPerturbation::new(amp, 0.1, ProfileId::Twist, 3)).unwrap()
    }

    #[test]
    fn zero_primitive_gives_zero_field() {
        let c = CalabiField::new(CalabiModelSpec::square(2, TAU).unwrap());
        let p = c.spec.point(&[Complex64::new(0.3, 0.2)], 0.5, 16.0);
        let pr = SymplecticPair::identity(c);
        assert_eq!(solve_moser_field(&pr, 0.4, &p).unwrap().amax(), 0.0);
    }

    #[test]
    fn moser_field_solves_the_contraction() {
        let pr = pair(0.05);
        let spec = CalabiModelSpec::square(2, TAU).unwrap();
        let l0: f64 = 2.5;
        let p = spec.point(&[Complex64::new(1.3, -0.4)], 2.0, l0.powi(4));
        for t in [0.0, 0.5, 1.0] {
            let v = solve_moser_field(&pr, t, &p).unwrap();
            let w = pr.omega_t(t, &p).unwrap();
            let beta = (pr.primitive)(&p).unwrap();
            // i_V ω_t = ω_t(V, ·) = Wᵀ V
            assert!((w.transpose() * &v + &beta).amax() < 1e-10 * beta.amax().max(1e-300));
            let g = pr.metric_t(t, &p).unwrap();
            let vn = v.dot(&(&g * &v)).sqrt();
            let bn = beta.dot(&(g.clone().try_inverse().unwrap() * &beta)).sqrt();
            assert!(vn <= 2.0 * bn);
        }
    }

    #[test]
    fn stored_primitive_differentiates_to_the_discrepancy() {
        let pr = pair(0.05);
        let spec = CalabiModelSpec::square(2, TAU).unwrap();
        let p = spec.point(&[Complex64::new(0.7, 0.9)], 1.0, 16.0);
        assert!(pr.primitive_residual(&p).unwrap() < 1e-8);
    }

    #[test]
    fn degenerate_form_is_reported() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1e-14, -1e-14, 0.0]).map(|x| x * 1.0);
        let mut w4 = DMatrix::zeros(4, 4);
        w4.view_mut((0, 0), (2, 2)).copy_from(&w);
        w4[(2, 3)] = 1.0;
        w4[(3, 2)] = -1.0;
        let r = solve_skew(&w4, &DVector::from_element(4, 1.0), &Point::zeros(4));
        assert!(matches!(r, Err(MoserError::Degenerate { .. })));
    }

    #[test]
    fn cylinder_primitive_recovers_a_decaying_form() {
        // η = d(e^{−ℓ} sin y dθ) on coordinates (ℓ, θ, x, y)
        let eta = |q: &Point| -> Result<DMatrix<f64>, AmbientError> {
            let mut e = DMatrix::zeros(4, 4);
            let (l, y) = (q[0], q[3]);
            e[(0, 1)] = -(-l).exp() * y.sin();
            e[(1, 0)] = -e[(0, 1)];
            e[(3, 1)] = (-l).exp() * y.cos();
            e[(1, 3)] = -e[(3, 1)];
            Ok(e)
        };
        let p = Point::from_vec(vec![1.5, 0.3, 0.2, 0.7]);
        let beta = cylinder_primitive(eta, &p, 60.0, 1e-12).unwrap();
        let want = (-1.5f64).exp() * 0.7f64.sin();
        assert!((beta[1] - want).abs() < 1e-10, "{} {}", beta[1], want);
        assert!(beta[2].abs() < 1e-12 && beta[3].abs() < 1e-12);
    }
}

#[cfg(test)]
mod model_tests;
