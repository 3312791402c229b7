//! The Calabi model on the punctured disk bundle of a polarizing line bundle
//! over a flat torus. On the universal cover the polarization has potential
//! φ(z) = κ|z|² and the fiber coordinate is ζ = log w = s + iθ, so that
//! −log|ξ|²_h = L = κ|z|² − 2s and the Kähler potential is
//! (n/(n+1)) L^{(n+1)/n}.

use super::{dz, hermitian_to_real, standard_j, volume_rhs, AmbientError, FieldKind, FlatTorusCY, Frame, MetricField};
use crate::exterior::Form;
use crate::Point;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CalabiModelSpec {
    pub total_complex_dim: usize,
    pub base: FlatTorusCY,
    pub hermitian_curvature: f64,
    /// Working annulus in ℓ₀.
    pub scale_window: (f64, f64),
}

impl CalabiModelSpec {
    pub fn new(base: FlatTorusCY, kappa: f64) -> Result<Self, AmbientError> {
        let m = base.complex_dim_base;
        if !(kappa > 0.0) {
            return Err(AmbientError::InvalidSpec("hermitian curvature must be positive".into()));
        }
        let target = DMatrix::identity(m, m).map(|x: f64| Complex64::new(kappa * x, 0.0));
        let mismatch = super::cmax(&(&base.kahler_matrix - target));
        if mismatch > 1e-12 * kappa {
            return Err(AmbientError::Inconsistency(format!(
                "curvature of h must equal ω_D: kahler matrix differs from κ·I by {mismatch:e}"
            )));
        }
        let window = if m == 1 { (1.2, 3.5) } else { (1.2, 3.0) };
        Ok(CalabiModelSpec { total_complex_dim: m + 1, base, hermitian_curvature: kappa, scale_window: window })
    }

    /// Square base torus of the given side with κ = 1, n = m + 1.
    pub fn square(n: usize, side: f64) -> Result<Self, AmbientError> {
        CalabiModelSpec::new(FlatTorusCY::square(n - 1, side, 1.0)?, 1.0)
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Self {
        self.scale_window = (lo, hi);
        self
    }

    pub fn base_dim(&self) -> usize {
        self.total_complex_dim - 1
    }

    /// Degree κ·Area/π of the polarization (complex dimension one base) and
    /// whether the factors of automorphy close up on the full lattice.
    pub fn polarization_degree(&self) -> (f64, bool) {
        let m = self.base_dim();
        let kappa = self.hermitian_curvature;
        let mut integral = true;
        for i in 0..2 * m {
            for j in 0..2 * m {
                let li = self.base.generator(i);
                let lj = self.base.generator(j);
                let ip: Complex64 = lj.iter().zip(&li).map(|(a, b)| a * b.conj()).sum();
                let q = kappa * ip.im / std::f64::consts::PI;
                if (q - q.round()).abs() > 1e-9 {
                    integral = false;
                }
            }
        }
        let area = self.base.lattice.determinant().abs();
        (kappa * area / std::f64::consts::PI, integral)
    }

    /// Factor of automorphy for the lattice vector with integer coordinates.
    pub fn automorphy(&self, coeffs: &[i64], chi_arg: f64) -> Automorphy {
        Automorphy { lambda: self.base.lattice_vector(coeffs), kappa: self.hermitian_curvature, chi_arg }
    }

    /// Point with base coordinate z, fiber angle θ and given L.
    pub fn point(&self, z: &[Complex64], theta: f64, l: f64) -> Point {
        let m = self.base_dim();
        let z2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        let mut p = Point::zeros(2 * m + 2);
        for a in 0..m {
            p[2 * a] = z[a].re;
            p[2 * a + 1] = z[a].im;
        }
        p[2 * m] = 0.5 * (self.hermitian_curvature * z2 - l);
        p[2 * m + 1] = theta;
        p
    }

    pub fn base_coords(&self, p: &Point) -> Vec<Complex64> {
        (0..self.base_dim()).map(|a| Complex64::new(p[2 * a], p[2 * a + 1])).collect()
    }

    /// L = −log|ξ|²_h
    pub fn log_norm(&self, p: &Point) -> f64 {
        let m = self.base_dim();
        let z2: f64 = (0..2 * m).map(|i| p[i] * p[i]).sum();
        self.hermitian_curvature * z2 - 2.0 * p[2 * m]
    }

    /// Random point with base coordinate in the fundamental domain and ℓ₀ in
    /// the working window.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Point {
        let m = self.base_dim();
        let n = self.total_complex_dim as f64;
        let t: Vec<f64> = (0..2 * m).map(|_| rng.gen::<f64>()).collect();
        let x = &self.base.lattice * DVector::from_vec(t);
        let z: Vec<Complex64> = (0..m).map(|a| Complex64::new(x[2 * a], x[2 * a + 1])).collect();
        let l0 = rng.gen_range(self.scale_window.0..self.scale_window.1);
        self.point(&z, rng.gen_range(0.0..std::f64::consts::TAU), l0.powf(2.0 * n))
    }
}

/// Deck transformation z ↦ z + λ, w ↦ e_λ(z)·w, with
/// e_λ(z) = χ(λ) exp(κ⟨z, λ⟩ + κ|λ|²/2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Automorphy {
    pub lambda: Vec<Complex64>,
    pub kappa: f64,
    pub chi_arg: f64,
}

impl Automorphy {
    pub fn apply(&self, p: &Point, sign: i32) -> Point {
        let m = self.lambda.len();
        let mut q = p.clone();
        let lam2: f64 = self.lambda.iter().map(|c| c.norm_sqr()).sum();
        let s = sign as f64;
        for _ in 0..sign.unsigned_abs() {
            let z: Vec<Complex64> = (0..m).map(|a| Complex64::new(q[2 * a], q[2 * a + 1])).collect();
            // forward uses ⟨z, λ⟩, inverse uses ⟨z − λ, λ⟩
            let zt: Vec<Complex64> =
                if sign > 0 { z.clone() } else { z.iter().zip(&self.lambda).map(|(a, b)| a - b).collect() };
            let ip: Complex64 = zt.iter().zip(&self.lambda).map(|(a, b)| a * b.conj()).sum();
            let shift = Complex64::new(self.kappa * (ip.re + 0.5 * lam2), self.kappa * ip.im + self.chi_arg);
            for a in 0..m {
                q[2 * a] += s * self.lambda[a].re;
                q[2 * a + 1] += s * self.lambda[a].im;
            }
            q[2 * m] += s * shift.re;
            q[2 * m + 1] += s * shift.im;
        }
        q
    }
}

#[derive(Clone, Debug)]
pub struct CalabiField {
    pub spec: CalabiModelSpec,
    holo_const: Complex64,
}

impl CalabiField {
    pub fn new(spec: CalabiModelSpec) -> Self {
        let mut f = CalabiField { spec, holo_const: Complex64::new(1.0, 0.0) };
        // fix |c| from the identity at one reference point; other points
        // then test that det G is constant.
        let n = f.spec.total_complex_dim;
        let z = vec![Complex64::new(0.0, 0.0); n - 1];
        let p = f.spec.point(&z, 0.0, 1.0);
        let fr = f.frame(&p).expect("reference point is in the domain");
        let lhs = fr.omega_form().power(n).top_coeff();
        let rhs = volume_rhs(&fr.holo, n);
        let ratio = (lhs / rhs).re;
        f.holo_const = Complex64::new(ratio.sqrt(), 0.0);
        f
    }

    fn l_of(&self, p: &Point) -> Result<f64, AmbientError> {
        let d = 2 * self.spec.total_complex_dim;
        if p.len() != d || p.iter().any(|x| !x.is_finite()) {
            return Err(AmbientError::Domain(format!("expected a finite point of dimension {d}")));
        }
        let l = self.spec.log_norm(p);
        if l <= 0.0 {
            return Err(AmbientError::CurvatureSign((-0.5 * l).exp()));
        }
        Ok(l)
    }

    /// The vector v_α = ∂_α L.
    fn v(&self, p: &Point) -> Vec<Complex64> {
        let m = self.spec.base_dim();
        let k = self.spec.hermitian_curvature;
        let mut v: Vec<Complex64> = (0..m).map(|a| Complex64::new(k * p[2 * a], -k * p[2 * a + 1])).collect();
        v.push(Complex64::new(-1.0, 0.0));
        v
    }

    fn coefficients(&self, l: f64) -> (f64, f64) {
        let n = self.spec.total_complex_dim as f64;
        ((1.0 / n) * l.powf(1.0 / n - 1.0), l.powf(1.0 / n))
    }

    pub fn hermitian(&self, p: &Point) -> Result<DMatrix<Complex64>, AmbientError> {
        let l = self.l_of(p)?;
        let n = self.spec.total_complex_dim;
        let (a, b) = self.coefficients(l);
        let v = self.v(p);
        let k = self.spec.hermitian_curvature;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let mut x = v[i] * v[j].conj() * a;
            if i == j && i < n - 1 {
                x += b * k;
            }
            x
        }))
    }

    /// Kähler potential Ψ
    pub fn potential(&self, p: &Point) -> Result<f64, AmbientError> {
        let n = self.spec.total_complex_dim as f64;
        Ok(n / (n + 1.0) * self.l_of(p)?.powf((n + 1.0) / n))
    }

    /// dL as a real covector.
    pub fn dl(&self, p: &Point) -> DVector<f64> {
        let m = self.spec.base_dim();
        let k = self.spec.hermitian_curvature;
        let mut d = DVector::zeros(2 * m + 2);
        for i in 0..2 * m {
            d[i] = 2.0 * k * p[i];
        }
        d[2 * m] = -2.0;
        d
    }

    /// Primitive α = ½ dᶜΨ of ω, with dᶜ = i(∂̄ − ∂).
    pub fn kahler_primitive(&self, p: &Point) -> Result<DVector<f64>, AmbientError> {
        let n = self.spec.total_complex_dim as f64;
        let dpsi = self.dl(p) * self.l_of(p)?.powf(1.0 / n);
        let j = standard_j(self.spec.total_complex_dim);
        Ok(-(j.transpose() * dpsi) * 0.5)
    }

    /// Hermitian norm |∂f|²_G of f = ℓ₀^{n+1}.
    pub fn scale_gradient_sq(&self, p: &Point) -> Result<f64, AmbientError> {
        let l = self.l_of(p)?;
        let n = self.spec.total_complex_dim as f64;
        let fprime = (n + 1.0) / (2.0 * n) * l.powf((n + 1.0) / (2.0 * n) - 1.0);
        let g = self.hermitian(p)?;
        let v = DVector::from_vec(self.v(p));
        let ginv = g.try_inverse().ok_or_else(|| AmbientError::Inconsistency("singular G".into()))?;
        let val = (v.adjoint() * ginv * &v)[(0, 0)];
        Ok(fprime * fprime * val.re)
    }

    /// Same quantity from central differences of f and the real metric:
    /// |∂f|²_G = ¼ |df|²_g.
    pub fn scale_gradient_sq_fd(&self, p: &Point, h: f64) -> Result<f64, AmbientError> {
        let n = self.spec.total_complex_dim as f64;
        let f = |q: &Point| -> Result<f64, AmbientError> { Ok(self.l_of(q)?.powf((n + 1.0) / (2.0 * n))) };
        let d = p.len();
        let mut df = DVector::zeros(d);
        for c in 0..d {
            let mut a = p.clone();
            let mut b = p.clone();
            a[c] += h;
            b[c] -= h;
            let mut a2 = p.clone();
            let mut b2 = p.clone();
            a2[c] += 2.0 * h;
            b2[c] -= 2.0 * h;
            df[c] = (8.0 * (f(&a)? - f(&b)?) - (f(&a2)? - f(&b2)?)) / (12.0 * h);
        }
        let g = self.metric(p)?;
        let ginv = g.try_inverse().ok_or_else(|| AmbientError::Inconsistency("singular metric".into()))?;
        Ok(0.25 * (df.transpose() * ginv * &df)[(0, 0)])
    }

    /// Length of the circle fiber through p, measured by quadrature of the
    /// metric along θ.
    pub fn fiber_length(&self, p: &Point, samples: usize) -> Result<f64, AmbientError> {
        let d = p.len();
        let mut e = DVector::zeros(d);
        e[d - 1] = 1.0;
        let mut total = 0.0;
        for k in 0..samples {
            let mut q = p.clone();
            q[d - 1] += std::f64::consts::TAU * k as f64 / samples as f64;
            let g = self.metric(&q)?;
            total += (e.transpose() * g * &e)[(0, 0)].sqrt();
        }
        Ok(total * std::f64::consts::TAU / samples as f64)
    }

    /// Residual of |ξ|_h under a deck transformation (relative in L).
    pub fn automorphy_residual(&self, deck: &Automorphy, p: &Point) -> f64 {
        let l0 = self.spec.log_norm(p);
        let l1 = self.spec.log_norm(&deck.apply(p, 1));
        ((l1 - l0) / l0.abs().max(1.0)).abs()
    }
}

impl MetricField for CalabiField {
    fn kind(&self) -> FieldKind {
        FieldKind::Calabi
    }

    fn complex_dim(&self) -> usize {
        self.spec.total_complex_dim
    }

    fn frame(&self, p: &Point) -> Result<Frame, AmbientError> {
        let n = self.spec.total_complex_dim;
        let gh = self.hermitian(p)?;
        let (g, omega) = hermitian_to_real(&gh);
        let holo = (0..n)
            .fold(Form::scalar(2 * n, Complex64::new(1.0, 0.0)), |f, a| f.wedge(&dz(n, a)))
            .scale(self.holo_const * self.spec.base.holvol_phase);
        Ok(Frame { g, omega, j: standard_j(n), holo })
    }

    fn metric(&self, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        Ok(hermitian_to_real(&self.hermitian(p)?).0)
    }

    fn injectivity_proxy(&self, p: &Point) -> f64 {
        self.scale(p).map(|l0| l0.powf(1.0 - self.spec.total_complex_dim as f64)).unwrap_or(1.0)
    }

    fn scale(&self, p: &Point) -> Option<f64> {
        let l = self.spec.log_norm(p);
        (l > 0.0).then(|| l.powf(0.5 / self.spec.total_complex_dim as f64))
    }

    fn check_domain(&self, p: &Point) -> Result<(), AmbientError> {
        self.l_of(p).map(|_| ())
    }

    fn metric_derivs(&self, p: &Point) -> Result<Vec<DMatrix<f64>>, AmbientError> {
        let l = self.l_of(p)?;
        let n = self.spec.total_complex_dim;
        let m = n - 1;
        let nf = n as f64;
        let k = self.spec.hermitian_curvature;
        let (a, _) = self.coefficients(l);
        let da = (1.0 / nf) * (1.0 / nf - 1.0) * l.powf(1.0 / nf - 2.0);
        let db = (1.0 / nf) * l.powf(1.0 / nf - 1.0);
        let v = self.v(p);
        let dl = self.dl(p);
        let mut out = Vec::with_capacity(2 * n);
        for c in 0..2 * n {
            let mut dv = vec![Complex64::new(0.0, 0.0); n];
            if c < 2 * m {
                let j = c / 2;
                dv[j] = if c % 2 == 0 { Complex64::new(k, 0.0) } else { Complex64::new(0.0, -k) };
            }
            let dg = DMatrix::from_fn(n, n, |i, j| {
                let mut x = v[i] * v[j].conj() * (da * dl[c]) + (dv[i] * v[j].conj() + v[i] * dv[j].conj()) * a;
                if i == j && i < m {
                    x += db * dl[c] * k;
                }
                x
            });
            out.push(hermitian_to_real(&dg).0);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{monge_ampere_residual, richardson_derivative, Christoffel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn model(n: usize) -> CalabiField {
        CalabiField::new(CalabiModelSpec::square(n, TAU).unwrap())
    }

    #[test]
    fn block_form_at_zero_base_point() {
        let f = model(2);
        let p = f.spec.point(&[Complex64::new(0.0, 0.0)], 0.3, 16.0);
        let g = f.metric(&p).unwrap();
        assert!((g[(2, 2)] - 0.125).abs() < 1e-15);
        assert!((g[(3, 3)] - 0.125).abs() < 1e-15);
        assert!((g[(0, 0)] - 4.0).abs() < 1e-15);
        assert!(g[(0, 2)].abs() < 1e-15 && g[(1, 3)].abs() < 1e-15);
    }

    #[test]
    fn curvature_mismatch_is_rejected() {
        let base = FlatTorusCY::square(1, TAU, 2.0).unwrap();
        assert!(matches!(CalabiModelSpec::new(base, 1.0), Err(AmbientError::Inconsistency(_))));
    }

    #[test]
    fn outside_unit_disk_bundle_is_a_sign_error() {
        let f = model(2);
        let p = f.spec.point(&[Complex64::new(0.1, 0.0)], 0.0, -1.0);
        assert!(matches!(f.frame(&p), Err(AmbientError::CurvatureSign(_))));
    }

    #[test]
    fn monge_ampere_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 3] {
            let f = model(n);
            for _ in 0..20 {
                let p = f.spec.sample_point(&mut rng);
                assert!(monge_ampere_residual(&f.frame(&p).unwrap(), n) < 1e-10);
            }
        }
    }

    #[test]
    fn scale_gradient_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (n, want) in [(2usize, 9.0 / 8.0), (3, 4.0 / 3.0)] {
            let f = model(n);
            for _ in 0..10 {
                let p = f.spec.sample_point(&mut rng);
                assert!((f.scale_gradient_sq(&p).unwrap() - want).abs() < 1e-12);
                assert!((f.scale_gradient_sq_fd(&p, 1e-3).unwrap() - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn analytic_metric_derivatives_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = model(3);
        let p = f.spec.sample_point(&mut rng);
        let an = f.metric_derivs(&p).unwrap();
        for c in 0..6 {
            let fd = richardson_derivative(|q| f.metric(q), &p, c, 1e-3).unwrap();
            assert!((&an[c] - fd).amax() < 1e-9, "direction {c}");
        }
    }

    #[test]
    fn primitive_differentiates_to_kahler_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = model(2);
        let p = f.spec.sample_point(&mut rng);
        let d = 4;
        let mut da = DMatrix::zeros(d, d);
        for c in 0..d {
            let col = richardson_derivative(
                |q| Ok(DMatrix::from_column_slice(d, 1, f.kahler_primitive(q)?.as_slice())),
                &p,
                c,
                1e-3,
            )
            .unwrap();
            for a in 0..d {
                da[(c, a)] = col[(a, 0)];
            }
        }
        // (dα)_{ca} = ∂_c α_a − ∂_a α_c
        let dalpha = &da - da.transpose();
        let w = f.frame(&p).unwrap().omega;
        assert!((dalpha - w).amax() < 1e-8);
    }

    #[test]
    fn deck_transformations_preserve_norm_and_metric() {
        let f = model(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let deck = f.spec.automorphy(&[1, 0], 0.4);
        let deck2 = f.spec.automorphy(&[0, 1], 0.0);
        for _ in 0..10 {
            let p = f.spec.sample_point(&mut rng);
            assert!(f.automorphy_residual(&deck, &p) < 1e-10);
            assert!(f.automorphy_residual(&deck2, &p) < 1e-10);
            let back = deck.apply(&deck.apply(&p, 1), -1);
            assert!((back - &p).amax() < 1e-10);
            let q = deck.apply(&p, 1);
            let num = DMatrix::from_fn(4, 4, |r, c| {
                let mut e = p.clone();
                e[c] += 1e-6;
                (deck.apply(&e, 1)[r] - q[r]) / 1e-6
            });
            let pulled = num.transpose() * f.metric(&q).unwrap() * &num;
            assert!((pulled - f.metric(&p).unwrap()).amax() < 1e-5);
        }
    }

    #[test]
    fn square_two_pi_base_is_not_integral() {
        let (d, integral) = CalabiModelSpec::square(2, TAU).unwrap().polarization_degree();
        assert!((d - 4.0 * PI).abs() < 1e-12);
        assert!(!integral);
        let base = FlatTorusCY::square(1, 1.0, PI).unwrap();
        let (d1, ok) = CalabiModelSpec::new(base, PI).unwrap().polarization_degree();
        assert!((d1 - 1.0).abs() < 1e-12 && ok);
    }

    #[test]
    fn christoffels_from_analytic_derivatives_are_symmetric() {
        let f = model(2);
        let p = f.spec.point(&[Complex64::new(0.4, 0.1)], 0.0, 16.0);
        let g = Christoffel::from_metric_derivs(&f.metric(&p).unwrap(), &f.metric_derivs(&p).unwrap()).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    assert_eq!(g.get(a, b, c), g.get(a, c, b));
                }
            }
        }
    }

    #[test]
    fn fiber_length_scales_with_the_injectivity_proxy() {
        for n in [2usize, 3] {
            let f = model(n);
            let z = vec![Complex64::new(0.3, 0.1); n - 1];
            for l0 in [1.2f64, 1.5] {
                let a = f.fiber_length(&f.spec.point(&z, 0.0, l0.powi(2 * n as i32)), 64).unwrap();
                let b = f.fiber_length(&f.spec.point(&z, 0.0, (2.0 * l0).powi(2 * n as i32)), 64).unwrap();
                assert!((b / a - 2f64.powi(1 - n as i32)).abs() < 1e-6);
            }
        }
    }
}
