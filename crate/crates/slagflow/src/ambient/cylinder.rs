//! The flat cylinder ℝ × S¹ × D with its product Calabi–Yau structure,
//! optionally divided by a free isometry ι of finite order.

use super::{dz, AmbientError, Christoffel, FieldKind, FlatTorusCY, Frame, MetricField};
use crate::exterior::Form;
use crate::Point;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CylindricalModelSpec {
    pub cross_section: FlatTorusCY,
    /// Period of the circle coordinate θ.
    pub circle_length: f64,
    pub isometry_order: usize,
    /// Base translation ι composes with θ ↦ θ + γ/m, in real coordinates of D.
    pub iota_shift: Vec<f64>,
}

impl CylindricalModelSpec {
    pub fn new(cross_section: FlatTorusCY, circle_length: f64, isometry_order: usize) -> Result<Self, AmbientError> {
        if !(circle_length > 0.0) || isometry_order == 0 {
            return Err(AmbientError::InvalidSpec("circle length and isometry order must be positive".into()));
        }
        let d = 2 * cross_section.complex_dim_base;
        let shift: Vec<f64> = (0..d).map(|i| cross_section.lattice[(i, 0)] / isometry_order as f64).collect();
        let shift = if isometry_order == 1 { vec![0.0; d] } else { shift };
        Ok(CylindricalModelSpec { cross_section, circle_length, isometry_order, iota_shift: shift })
    }

    pub fn complex_dim(&self) -> usize {
        self.cross_section.complex_dim_base + 1
    }

    /// ι acting on a point (ℓ, θ, x_D).
    pub fn iota(&self, p: &Point, sign: i32) -> Point {
        let mut q = p.clone();
        let s = sign as f64;
        q[1] += s * self.circle_length / self.isometry_order as f64;
        for (i, t) in self.iota_shift.iter().enumerate() {
            q[2 + i] += s * t;
        }
        q
    }
}

#[derive(Clone, Debug)]
pub struct CylinderField {
    pub spec: CylindricalModelSpec,
    frame: Frame,
}

impl CylinderField {
    pub fn new(spec: CylindricalModelSpec) -> Self {
        let n = spec.complex_dim();
        let m = n - 1;
        let (gd, wd) = spec.cross_section.metric_frame();
        let mut g = DMatrix::identity(2 * n, 2 * n);
        let mut omega = DMatrix::zeros(2 * n, 2 * n);
        omega[(0, 1)] = 1.0;
        omega[(1, 0)] = -1.0;
        for a in 0..2 * m {
            for b in 0..2 * m {
                g[(2 + a, 2 + b)] = gd[(a, b)];
                omega[(2 + a, 2 + b)] = wd[(a, b)];
            }
        }
        // Ω_∞ = c_n (dℓ + i dθ) ∧ Ω_D with c_n = √(n/2)
        let c_d = spec.cross_section.holo_modulus();
        let holo = (1..n)
            .fold(dz(n, 0), |f, a| f.wedge(&dz(n, a)))
            .scale(spec.cross_section.holvol_phase * c_d * (n as f64 / 2.0).sqrt());
        let frame = Frame { g, omega, j: super::standard_j(n), holo };
        CylinderField { spec, frame }
    }

    /// Invariance residual of ω_∞ and Ω_∞ under ι at p.
    pub fn iota_residual(&self, p: &Point) -> f64 {
        let q = self.spec.iota(p, 1);
        let d = p.len();
        // ι is a translation, so its differential is computed exactly from
        // images of p + e_c.
        let jac = DMatrix::from_fn(d, d, |r, c| {
            let mut e = p.clone();
            e[c] += 1.0;
            self.spec.iota(&e, 1)[r] - q[r]
        });
        let a = self.frame(&q).unwrap();
        let b = self.frame(p).unwrap();
        let w = jac.transpose() * &a.omega * &jac - &b.omega;
        let pulled: Form = a.holo.pullback(&jac);
        let h = pulled.add(&b.holo.scale(Complex64::new(-1.0, 0.0)));
        w.amax().max(h.max_abs())
    }
}

impl MetricField for CylinderField {
    fn kind(&self) -> FieldKind {
        FieldKind::Cylindrical
    }
    fn complex_dim(&self) -> usize {
        self.spec.complex_dim()
    }
    fn frame(&self, p: &Point) -> Result<Frame, AmbientError> {
        self.check_domain(p)?;
        Ok(self.frame.clone())
    }
    fn check_domain(&self, p: &Point) -> Result<(), AmbientError> {
        if p.len() != self.real_dim() {
            return Err(AmbientError::Domain("wrong point dimension".into()));
        }
        if !(p[0] > 0.0) {
            return Err(AmbientError::Domain(format!("cylinder coordinate ℓ = {} must be positive", p[0])));
        }
        Ok(())
    }
    fn metric_derivs(&self, _p: &Point) -> Result<Vec<DMatrix<f64>>, AmbientError> {
        let d = self.real_dim();
        Ok(vec![DMatrix::zeros(d, d); d])
    }
    fn christoffel(&self, _p: &Point) -> Result<Christoffel, AmbientError> {
        Ok(Christoffel::zeros(self.real_dim()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{compatibility_residual, monge_ampere_residual};
    use std::f64::consts::TAU;

    fn cyl(m: usize, order: usize) -> CylinderField {
        CylinderField::new(CylindricalModelSpec::new(FlatTorusCY::square(m, TAU, 1.0).unwrap(), TAU, order).unwrap())
    }

    #[test]
    fn identity_in_dimensions_two_and_three() {
        for m in [1, 2] {
            let f = cyl(m, 1);
            let mut p = Point::zeros(2 * m + 2);
            p[0] = 3.0;
            let fr = f.frame(&p).unwrap();
            assert!(monge_ampere_residual(&fr, m + 1) < 1e-12);
            assert!(compatibility_residual(&fr) < 1e-14);
        }
    }

    #[test]
    fn product_blocks() {
        let f = cyl(1, 1);
        let mut p = Point::zeros(4);
        p[0] = 1.0;
        let g = f.metric(&p).unwrap();
        assert_eq!(g, DMatrix::identity(4, 4));
        let mut q = p.clone();
        q[0] = 7.5;
        assert_eq!(f.metric(&q).unwrap(), g);
    }

    #[test]
    fn iota_preserves_forms() {
        let f = cyl(1, 3);
        let mut p = Point::zeros(4);
        p[0] = 2.0;
        p[2] = 0.4;
        assert!(f.iota_residual(&p) < 1e-12);
    }

    #[test]
    fn nonpositive_level_is_rejected() {
        let f = cyl(1, 1);
        assert!(f.frame(&Point::zeros(4)).is_err());
    }
}
