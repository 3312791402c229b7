//! Hyper-Kähler triple (Re Ω, ω, Im Ω) of a Calabi–Yau surface, its twistor
//! family and the hyper-Kähler rotation to the complex structure I.

use super::{AmbientError, FieldKind, Frame, MetricField};
use crate::exterior::Form;
use crate::Point;
use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct HyperKahlerFrame {
    /// (ω₁, ω₂, ω₃) = (Re Ω, ω, Im Ω) as matrices ω_i(e_a, e_b).
    pub triple: [DMatrix<f64>; 3],
    pub metric: DMatrix<f64>,
    /// (I, J, K) with ω₁ = 2g(I·,·), ω₂ = 2g(J·,·) and K = IJ, so that
    /// ω₃ = −2g(K·,·).
    pub complex_structures: [DMatrix<f64>; 3],
    pub holo: Form,
    pub omega: DMatrix<f64>,
}

fn structure_from_form(g: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    // ω(X,Y) = 2 Xᵀ Jᵀ g Y  ⇒  J = −½ g⁻¹ ω
    -(g.clone().try_inverse().expect("metric is invertible") * w) * 0.5
}

impl HyperKahlerFrame {
    pub fn from_frame(frame: &Frame) -> Result<Self, AmbientError> {
        if frame.g.nrows() != 4 {
            return Err(AmbientError::InvalidSpec("hyper-Kähler frames need complex dimension 2".into()));
        }
        let hm = frame.holo.two_form_matrix();
        let w1 = hm.map(|z| z.re);
        let w3 = hm.map(|z| z.im);
        let triple = [w1, frame.omega.clone(), w3];
        let cs = [
            structure_from_form(&frame.g, &triple[0]),
            structure_from_form(&frame.g, &triple[1]),
            -structure_from_form(&frame.g, &triple[2]),
        ];
        let hk = HyperKahlerFrame {
            triple,
            metric: frame.g.clone(),
            complex_structures: cs,
            holo: frame.holo.clone(),
            omega: frame.omega.clone(),
        };
        Ok(hk)
    }

    /// Q with ½ ω_i∧ω_j = Q_ij dVol_g.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        let vol = self.metric.determinant().sqrt() * self.orientation();
        DMatrix::from_fn(3, 3, |i, j| {
            0.5 * Form::real_two_form(&self.triple[i]).wedge(&Form::real_two_form(&self.triple[j])).top_coeff().re / vol
        })
    }

    /// Sign of ω² relative to the coordinate orientation.
    pub fn orientation(&self) -> f64 {
        Form::real_two_form(&self.omega).power(2).top_coeff().re.signum()
    }

    /// max over I², J², K², IJK of the distance to −1.
    pub fn quaternion_residual(&self) -> f64 {
        let [i, j, k] = &self.complex_structures;
        let id = DMatrix::<f64>::identity(4, 4);
        [i * i + &id, j * j + &id, k * k + &id, i * j * k + &id].iter().map(|m| m.amax()).fold(0.0, f64::max)
    }

    /// Hodge star of a two-form for g with the orientation of ω².
    pub fn hodge(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let g = &self.metric;
        let gi = g.clone().try_inverse().unwrap();
        let up = &gi * w * &gi;
        let s = g.determinant().sqrt() * self.orientation();
        let mut out = DMatrix::zeros(4, 4);
        for a in 0..4 {
            for b in 0..4 {
                let mut v = 0.0;
                for c in 0..4 {
                    for d in 0..4 {
                        v += 0.5 * up[(c, d)] * levi_civita([c, d, a, b]);
                    }
                }
                out[(a, b)] = s * v;
            }
        }
        out
    }

    pub fn self_duality_residual(&self) -> f64 {
        self.triple.iter().map(|w| (self.hodge(w) - w).amax() / w.amax().max(1e-300)).fold(0.0, f64::max)
    }
}

fn levi_civita(idx: [usize; 4]) -> f64 {
    let mut sign = 1.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if idx[i] == idx[j] {
                return 0.0;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Ω_ζ = Ω + 2ζω − ζ²Ω̄, which is decomposable for ω² = ½ Ω∧Ω̄.
pub fn twistor_form(frame: &HyperKahlerFrame, zeta: Complex64) -> Form {
    let w = Form::real_two_form(&frame.omega);
    frame.holo.add(&w.scale(zeta * 2.0)).add(&frame.holo.conj().scale(-zeta * zeta))
}

/// The complex structure for which Ω_ζ has type (2,0):
/// J_ζ = ((1 − |ζ|²) J − 2 Re ζ I + 2 Im ζ K) / (1 + |ζ|²).
pub fn twistor_structure(frame: &HyperKahlerFrame, zeta: Complex64) -> DMatrix<f64> {
    let [ci, cj, ck] = &frame.complex_structures;
    (cj * (1.0 - zeta.norm_sqr()) - ci * (2.0 * zeta.re) + ck * (2.0 * zeta.im)) / (1.0 + zeta.norm_sqr())
}

/// max over the matrix entries of |Ω(J·,·) − iΩ|.
pub fn type_residual(form: &Form, j: &DMatrix<f64>) -> f64 {
    let m = form.two_form_matrix();
    let jc = j.map(|x| Complex64::new(x, 0.0));
    let lhs = jc.transpose() * &m;
    (lhs - m * Complex64::new(0.0, 1.0)).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// (X, g, I) with ω_I = Re Ω and Ω_I = ω − i Im Ω.
pub struct RotatedField<F: MetricField> {
    pub inner: F,
}

pub fn hk_rotate<F: MetricField>(inner: F) -> Result<RotatedField<F>, AmbientError> {
    if inner.complex_dim() != 2 {
        return Err(AmbientError::InvalidSpec("hyper-Kähler rotation needs complex dimension 2".into()));
    }
    Ok(RotatedField { inner })
}

/// Rotate a single frame.
pub fn rotate_frame(frame: &Frame) -> Result<Frame, AmbientError> {
    let hk = HyperKahlerFrame::from_frame(frame)?;
    let q = hk.quaternion_residual();
    if q > 1e-8 {
        return Err(AmbientError::Inconsistency(format!("quaternion relations fail by {q:e}")));
    }
    let hm = frame.holo.two_form_matrix();
    let re = hm.map(|z| z.re);
    let im = hm.map(|z| z.im);
    let new_holo = DMatrix::from_fn(4, 4, |a, b| Complex64::new(frame.omega[(a, b)], -im[(a, b)]));
    Ok(Frame { g: frame.g.clone(), omega: re, j: hk.complex_structures[0].clone(), holo: Form::two_form(&new_holo) })
}

impl<F: MetricField> MetricField for RotatedField<F> {
    fn kind(&self) -> FieldKind {
        FieldKind::Rotated
    }
    fn complex_dim(&self) -> usize {
        2
    }
    fn frame(&self, p: &Point) -> Result<Frame, AmbientError> {
        rotate_frame(&self.inner.frame(p)?)
    }
    fn metric(&self, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        self.inner.metric(p)
    }
    fn injectivity_proxy(&self, p: &Point) -> f64 {
        self.inner.injectivity_proxy(p)
    }
    fn scale(&self, p: &Point) -> Option<f64> {
        self.inner.scale(p)
    }
    fn check_domain(&self, p: &Point) -> Result<(), AmbientError> {
        self.inner.check_domain(p)
    }
    fn metric_derivs(&self, p: &Point) -> Result<Vec<DMatrix<f64>>, AmbientError> {
        self.inner.metric_derivs(p)
    }
    fn christoffel(&self, p: &Point) -> Result<super::Christoffel, AmbientError> {
        self.inner.christoffel(p)
    }
}

/// How far the plane spanned by `tangents` is from being J-invariant:
/// sup_i |J T_i − proj(J T_i)|_g / |T_i|_g.
pub fn holomorphicity_residual(g: &DMatrix<f64>, j: &DMatrix<f64>, tangents: &[nalgebra::DVector<f64>]) -> f64 {
    let k = tangents.len();
    let t = DMatrix::from_fn(g.nrows(), k, |r, c| tangents[c][r]);
    let h = t.transpose() * g * &t;
    let hinv = match h.try_inverse() {
        Some(x) => x,
        None => return f64::INFINITY,
    };
    let mut worst = 0.0_f64;
    for v in tangents {
        let jv = j * v;
        let coeffs = &hinv * (t.transpose() * g * &jv);
        let r = &jv - &t * coeffs;
        let num = (r.transpose() * g * &r)[(0, 0)].max(0.0).sqrt();
        let den = (v.transpose() * g * v)[(0, 0)].sqrt();
        worst = worst.max(num / den);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{compatibility_residual, CalabiField, CalabiModelSpec, FlatField};
    use std::f64::consts::TAU;

    fn calabi_frame() -> Frame {
        let f = CalabiField::new(CalabiModelSpec::square(2, TAU).unwrap());
        let p = f.spec.point(&[Complex64::new(0.8, -0.3)], 1.0, 9.0);
        f.frame(&p).unwrap()
    }

    fn frames() -> Vec<Frame> {
        vec![FlatField::euclidean(2, 1.0).frame(&Point::zeros(4)).unwrap(), calabi_frame()]
    }

    #[test]
    fn triple_invariants() {
        for fr in frames() {
            let hk = HyperKahlerFrame::from_frame(&fr).unwrap();
            assert!(hk.quaternion_residual() < 1e-8, "{}", hk.quaternion_residual());
            assert!(hk.self_duality_residual() < 1e-8);
            let q = hk.q_matrix();
            assert!(q[(0, 0)] > 0.0);
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert!(q[(i, j)].abs() < 1e-10 * q[(0, 0)]);
                    } else {
                        assert!((q[(i, i)] - q[(0, 0)]).abs() < 1e-10 * q[(0, 0)]);
                    }
                }
            }
        }
    }

    #[test]
    fn twistor_at_zero_is_omega() {
        let hk = HyperKahlerFrame::from_frame(&calabi_frame()).unwrap();
        let diff = twistor_form(&hk, Complex64::new(0.0, 0.0)).add(&hk.holo.scale(Complex64::new(-1.0, 0.0)));
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn twistor_forms_are_decomposable_and_holomorphic() {
        for fr in frames() {
            let hk = HyperKahlerFrame::from_frame(&fr).unwrap();
            for z in [Complex64::new(0.5, 0.3), Complex64::new(-1.2, 0.1), Complex64::new(0.0, 2.0)] {
                let om = twistor_form(&hk, z);
                assert!(om.wedge(&om).max_abs() < 1e-8);
                assert!(type_residual(&om, &twistor_structure(&hk, z)) < 1e-8);
            }
        }
    }

    #[test]
    fn twistor_structures_square_to_minus_one() {
        let hk = HyperKahlerFrame::from_frame(&calabi_frame()).unwrap();
        for z in [Complex64::new(1.0, 0.0), Complex64::new(0.3, -0.7), Complex64::new(-2.0, 0.5)] {
            let j = twistor_structure(&hk, z);
            assert!((&j * &j + DMatrix::<f64>::identity(4, 4)).amax() < 1e-8);
        }
    }

    #[test]
    fn rotation_is_an_involution() {
        for fr in frames() {
            let once = rotate_frame(&fr).unwrap();
            assert!(compatibility_residual(&once) < 1e-10);
            let twice = rotate_frame(&once).unwrap();
            assert!((twice.omega - &fr.omega).amax() < 1e-10);
            assert!((twice.j - &fr.j).amax() < 1e-10);
            assert!(twice.holo.add(&fr.holo.scale(Complex64::new(-1.0, 0.0))).max_abs() < 1e-10);
        }
    }
}
