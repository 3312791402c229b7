//! Flat complex tori ℂ^m/Λ with constant Kähler and holomorphic volume forms.

use super::{dz, hermitian_to_real, standard_j, volume_rhs, AmbientError, Christoffel, FieldKind, Frame, MetricField};
use crate::exterior::Form;
use crate::Point;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FlatTorusCY {
    pub complex_dim_base: usize,
    /// Columns are lattice generators in interleaved real coordinates.
    pub lattice: DMatrix<f64>,
    pub kahler_matrix: DMatrix<Complex64>,
    pub holvol_phase: Complex64,
}

impl FlatTorusCY {
    pub fn new(
        lattice: DMatrix<f64>,
        kahler_matrix: DMatrix<Complex64>,
        holvol_phase: Complex64,
    ) -> Result<Self, AmbientError> {
        let m = kahler_matrix.nrows();
        if m == 0 || kahler_matrix.ncols() != m {
            return Err(AmbientError::InvalidSpec("kahler matrix must be square and nonempty".into()));
        }
        if lattice.nrows() != 2 * m || lattice.ncols() != 2 * m {
            return Err(AmbientError::InvalidSpec(format!("lattice must be {0}×{0}", 2 * m)));
        }
        let det = lattice.determinant();
        if det.abs() < 1e-12 * lattice.amax().powi(2 * m as i32).max(1e-300) {
            return Err(AmbientError::InvalidSpec("lattice generators are linearly dependent".into()));
        }
        let herm = super::cmax(&(&kahler_matrix - kahler_matrix.adjoint()));
        if herm > 1e-12 * super::cmax(&kahler_matrix) {
            return Err(AmbientError::InvalidSpec("kahler matrix is not Hermitian".into()));
        }
        let (g, _) = hermitian_to_real(&kahler_matrix);
        if g.cholesky().is_none() {
            return Err(AmbientError::InvalidSpec("kahler matrix is not positive definite".into()));
        }
        if (holvol_phase.norm() - 1.0).abs() > 1e-12 {
            return Err(AmbientError::InvalidSpec("holvol_phase must have modulus 1".into()));
        }
        Ok(FlatTorusCY { complex_dim_base: m, lattice, kahler_matrix, holvol_phase })
    }

    /// Square torus of the given side with kahler_matrix = κ·I.
    pub fn square(m: usize, side: f64, kappa: f64) -> Result<Self, AmbientError> {
        let k = DMatrix::identity(m, m).map(|x: f64| Complex64::new(kappa * x, 0.0));
        FlatTorusCY::new(DMatrix::identity(2 * m, 2 * m) * side, k, Complex64::new(1.0, 0.0))
    }

    /// Lattice generator `i` as a complex vector.
    pub fn generator(&self, i: usize) -> Vec<Complex64> {
        (0..self.complex_dim_base)
            .map(|a| Complex64::new(self.lattice[(2 * a, i)], self.lattice[(2 * a + 1, i)]))
            .collect()
    }

    /// Integer combination of the generators.
    pub fn lattice_vector(&self, coeffs: &[i64]) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.complex_dim_base];
        for (i, &c) in coeffs.iter().enumerate() {
            for (a, g) in self.generator(i).into_iter().enumerate() {
                v[a] += g * c as f64;
            }
        }
        v
    }

    /// Rotate Ω_D so that it is real on the real line spanned by `v`
    /// (complex dimension one).
    pub fn with_phase_for_direction(mut self, v: Complex64) -> Self {
        self.holvol_phase = v.conj() / v.norm();
        self
    }

    pub fn metric_frame(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        hermitian_to_real(&self.kahler_matrix)
    }

    /// |c| with Ω_D = c·dz^1∧…∧dz^m fixed by ω_D^m = i^{m²}/2 Ω_D∧Ω̄_D.
    pub fn holo_modulus(&self) -> f64 {
        let m = self.complex_dim_base;
        let (_, w) = self.metric_frame();
        let lhs = Form::real_two_form(&w).power(m).top_coeff();
        let unit = (0..m).fold(Form::scalar(2 * m, Complex64::new(1.0, 0.0)), |f, a| f.wedge(&dz(m, a)));
        let rhs = volume_rhs(&unit, m);
        (lhs / rhs).re.sqrt()
    }

    pub fn holo_form(&self) -> Form {
        let m = self.complex_dim_base;
        let unit = (0..m).fold(Form::scalar(2 * m, Complex64::new(1.0, 0.0)), |f, a| f.wedge(&dz(m, a)));
        unit.scale(self.holvol_phase * self.holo_modulus())
    }

    pub fn frame(&self) -> Frame {
        let (g, omega) = self.metric_frame();
        Frame { g, omega, j: standard_j(self.complex_dim_base), holo: self.holo_form() }
    }

    /// Relative residual of ω_D^m = i^{m²}/2 Ω_D∧Ω̄_D.
    pub fn normalization_residual(&self) -> f64 {
        super::monge_ampere_residual(&self.frame(), self.complex_dim_base)
    }

    /// Real area (volume) of a fundamental domain in the metric g_D.
    pub fn volume(&self) -> f64 {
        let (g, _) = self.metric_frame();
        self.lattice.determinant().abs() * g.determinant().sqrt()
    }
}

/// The flat torus used directly as an ambient Calabi–Yau.
#[derive(Clone, Debug)]
pub struct FlatField {
    pub torus: FlatTorusCY,
    frame: Frame,
}

impl FlatField {
    pub fn new(torus: FlatTorusCY) -> Self {
        let frame = torus.frame();
        FlatField { torus, frame }
    }

    /// Euclidean ℂ^m with g = dx² + dy² (side used only for deck maps).
    pub fn euclidean(m: usize, side: f64) -> Self {
        FlatField::new(FlatTorusCY::square(m, side, 1.0).expect("square torus is valid"))
    }
}

impl MetricField for FlatField {
    fn kind(&self) -> FieldKind {
        FieldKind::Flat
    }
    fn complex_dim(&self) -> usize {
        self.torus.complex_dim_base
    }
    fn frame(&self, _p: &Point) -> Result<Frame, AmbientError> {
        Ok(self.frame.clone())
    }
    fn metric(&self, _p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        Ok(self.frame.g.clone())
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

    #[test]
    fn normalization_holds_for_tilted_lattice() {
        let lat = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.2]);
        let k = DMatrix::from_element(1, 1, Complex64::new(2.5, 0.0));
        let t = FlatTorusCY::new(lat, k, Complex64::from_polar(1.0, 0.7)).unwrap();
        assert!(t.normalization_residual() < 1e-14);
    }

    #[test]
    fn normalization_holds_in_two_dimensions() {
        let k = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(2.0, 0.0), Complex64::new(0.3, 0.4), Complex64::new(0.3, -0.4), Complex64::new(1.5, 0.0)],
        );
        let t = FlatTorusCY::new(DMatrix::identity(4, 4), k, Complex64::new(1.0, 0.0)).unwrap();
        assert!(t.normalization_residual() < 1e-13);
    }

    #[test]
    fn rejects_dependent_generators() {
        let lat = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        let k = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        assert!(FlatTorusCY::new(lat, k, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn rejects_indefinite_kahler_matrix() {
        let k = DMatrix::from_element(1, 1, Complex64::new(-1.0, 0.0));
        assert!(FlatTorusCY::new(DMatrix::identity(2, 2), k, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn phase_makes_holomorphic_form_real_on_direction() {
        let v = Complex64::new(1.0, 2.0);
        let t = FlatTorusCY::square(1, 1.0, 1.0).unwrap().with_phase_for_direction(v);
        let val = t.holo_form().eval(&[Point::from_vec(vec![v.re, v.im])]);
        assert!(val.im.abs() < 1e-14 && val.re > 0.0);
    }

    #[test]
    fn square_torus_volume() {
        let t = FlatTorusCY::square(1, 2.0 * std::f64::consts::PI, 1.0).unwrap();
        assert!((t.volume() - 4.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }
}
