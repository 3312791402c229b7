//! Riemann tensor by Richardson-extrapolated differences of the Christoffel
//! symbols, and its covariant derivative by one further difference.

use super::{AmbientError, Christoffel, MetricField};
use crate::Point;
use nalgebra::DMatrix;

/// Fully lowered R_{abcd}.
#[derive(Clone, Debug)]
pub struct RiemannTensor {
    pub dim: usize,
    data: Vec<f64>,
}

impl RiemannTensor {
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim;
        self.data[((a * n + b) * n + c) * n + d]
    }

    /// R_{abcd} R^{abcd}
    pub fn norm_sq(&self, ginv: &DMatrix<f64>) -> f64 {
        let n = self.dim;
        let raised = raise_all(&self.data, n, ginv);
        self.data.iter().zip(&raised).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn raise_all(t: &[f64], n: usize, ginv: &DMatrix<f64>) -> Vec<f64> {
    // raise each of the four indices in turn
    let mut cur = t.to_vec();
    for slot in 0..4 {
        let mut next = vec![0.0; cur.len()];
        let stride = n.pow(3 - slot as u32);
        for idx in 0..cur.len() {
            let i = (idx / stride) % n;
            let base = idx - i * stride;
            let mut s = 0.0;
            for j in 0..n {
                s += ginv[(i, j)] * cur[base + j * stride];
            }
            next[idx] = s;
        }
        cur = next;
    }
    cur
}

#[derive(Clone, Debug)]
pub struct CurvatureReport {
    pub riemann: RiemannTensor,
    pub norm: f64,
    pub grad_norm: Option<f64>,
}

fn christoffel_derivs<F: MetricField + ?Sized>(field: &F, p: &Point, h: f64) -> Result<Vec<Christoffel>, AmbientError> {
    let d = field.real_dim();
    let mut out = Vec::with_capacity(d);
    for c in 0..d {
        let eval = |t: f64| -> Result<Christoffel, AmbientError> {
            let mut q = p.clone();
            q[c] += t;
            field.christoffel(&q)
        };
        let diff = |h: f64| -> Result<Vec<f64>, AmbientError> {
            let a = eval(h)?;
            let b = eval(-h)?;
            let mut v = vec![0.0; d * d * d];
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        v[(i * d + j) * d + k] = (a.get(i, j, k) - b.get(i, j, k)) / (2.0 * h);
                    }
                }
            }
            Ok(v)
        };
        let d1 = diff(h)?;
        let d2 = diff(0.5 * h)?;
        let mut g = Christoffel::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let idx = (i * d + j) * d + k;
                    g.set(i, j, k, (4.0 * d2[idx] - d1[idx]) / 3.0);
                }
            }
        }
        out.push(g);
    }
    Ok(out)
}

pub fn riemann<F: MetricField + ?Sized>(field: &F, p: &Point, h: f64) -> Result<RiemannTensor, AmbientError> {
    if !(h > 1e-10) {
        return Err(AmbientError::Resolution(format!("difference step {h:e} underflows near the domain boundary")));
    }
    let d = field.real_dim();
    let g = field.metric(p)?;
    let gam = field.christoffel(p)?;
    let dgam = christoffel_derivs(field, p, h)?;
    let mut up = vec![0.0; d * d * d * d];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    // R^a_{bce} = ∂_c Γ^a_{eb} − ∂_e Γ^a_{cb} + Γ^a_{cf}Γ^f_{eb} − Γ^a_{ef}Γ^f_{cb}
                    let mut v = dgam[c].get(a, e, b) - dgam[e].get(a, c, b);
                    for f in 0..d {
                        v += gam.get(a, c, f) * gam.get(f, e, b) - gam.get(a, e, f) * gam.get(f, c, b);
                    }
                    up[((a * d + b) * d + c) * d + e] = v;
                }
            }
        }
    }
    let mut low = vec![0.0; up.len()];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let mut v = 0.0;
                    for f in 0..d {
                        v += g[(a, f)] * up[((f * d + b) * d + c) * d + e];
                    }
                    low[((a * d + b) * d + c) * d + e] = v;
                }
            }
        }
    }
    Ok(RiemannTensor { dim: d, data: low })
}

/// Full Riemann tensor with |Rm| and, if requested, |∇Rm|. The difference
/// step is `rel_step` times the field's local injectivity proxy.
pub fn curvature_at<F: MetricField + ?Sized>(
    field: &F,
    p: &Point,
    rel_step: f64,
    with_gradient: bool,
) -> Result<CurvatureReport, AmbientError> {
    let h = rel_step * field.injectivity_proxy(p);
    let rm = riemann(field, p, h)?;
    let g = field.metric(p)?;
    let ginv = g.clone().try_inverse().ok_or_else(|| AmbientError::Inconsistency("singular metric".into()))?;
    let norm = rm.norm_sq(&ginv).max(0.0).sqrt();
    let grad_norm = if with_gradient {
        let d = field.real_dim();
        let gam = field.christoffel(p)?;
        let hh = 4.0 * h;
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(d);
        for e in 0..d {
            let central = |step: f64| -> Result<Vec<f64>, AmbientError> {
                let mut a = p.clone();
                let mut b = p.clone();
                a[e] += step;
                b[e] -= step;
                let ra = riemann(field, &a, h)?;
                let rb = riemann(field, &b, h)?;
                Ok(ra.data.iter().zip(&rb.data).map(|(x, y)| (x - y) / (2.0 * step)).collect())
            };
            let coarse = central(hh)?;
            let fine = central(0.5 * hh)?;
            let mut t: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            let mut corr = 0.0;
                            for f in 0..d {
                                corr += gam.get(f, e, i) * rm.get(f, j, k, l)
                                    + gam.get(f, e, j) * rm.get(i, f, k, l)
                                    + gam.get(f, e, k) * rm.get(i, j, f, l)
                                    + gam.get(f, e, l) * rm.get(i, j, k, f);
                            }
                            t[((i * d + j) * d + k) * d + l] -= corr;
                        }
                    }
                }
            }
            grads.push(t);
        }
        for e in 0..d {
            for e2 in 0..d {
                if ginv[(e, e2)] == 0.0 {
                    continue;
                }
                let raised = raise_all(&grads[e2], d, &ginv);
                total += ginv[(e, e2)] * grads[e].iter().zip(&raised).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Some(total.max(0.0).sqrt())
    } else {
        None
    };
    Ok(CurvatureReport { riemann: rm, norm, grad_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{AmbientError, FieldKind, FlatField, Frame};

    #[test]
    fn flat_torus_is_flat() {
        let f = FlatField::euclidean(2, 1.0);
        let r = curvature_at(&f, &Point::from_vec(vec![0.1, 0.2, 0.3, 0.4]), 1e-3, true).unwrap();
        assert!(r.norm < 1e-12);
        assert!(r.grad_norm.unwrap() < 1e-12);
    }

    /// Round 2-sphere of radius ρ in stereographic coordinates, paired as a
    /// fake complex dimension one field; |Rm| = 2/ρ² on a surface of
    /// constant curvature 1/ρ².
    struct Sphere(f64);
    impl MetricField for Sphere {
        fn kind(&self) -> FieldKind {
            FieldKind::Flat
        }
        fn complex_dim(&self) -> usize {
            1
        }
        fn frame(&self, p: &Point) -> Result<Frame, AmbientError> {
            let r2 = p[0] * p[0] + p[1] * p[1];
            let c = 4.0 * self.0 * self.0 / (1.0 + r2).powi(2);
            let g = DMatrix::identity(2, 2) * c;
            let f = FlatField::euclidean(1, 1.0).frame(p)?;
            Ok(Frame { g, ..f })
        }
    }

    #[test]
    fn sphere_curvature_norm() {
        let s = Sphere(2.0);
        let r = curvature_at(&s, &Point::from_vec(vec![0.3, -0.2]), 1e-2, true).unwrap();
        assert!((r.norm - 0.5).abs() < 1e-8, "{}", r.norm);
        assert!(r.grad_norm.unwrap() < 1e-5, "{}", r.grad_norm.unwrap());
    }

    #[test]
    fn tiny_step_is_a_resolution_error() {
        let s = Sphere(1.0);
        assert!(matches!(
            curvature_at(&s, &Point::from_vec(vec![0.0, 0.0]), 1e-14, false),
            Err(AmbientError::Resolution(_))
        ));
    }

    fn calabi_decay_slope(n: usize, scales: &[f64]) -> (f64, Vec<f64>) {
        use crate::ambient::{CalabiField, CalabiModelSpec};
        use num_complex::Complex64;
        let f = CalabiField::new(CalabiModelSpec::square(n, std::f64::consts::TAU).unwrap());
        let z = vec![Complex64::new(0.4, -0.3); n - 1];
        let norms: Vec<f64> = scales
            .iter()
            .map(|&l0: &f64| {
                let p = f.spec.point(&z, 0.7, l0.powi(2 * n as i32));
                curvature_at(&f, &p, 1e-3, false).unwrap().norm
            })
            .collect();
        let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
        let ys: Vec<f64> = norms.iter().map(|s| s.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        (slope, norms)
    }

    #[test]
    fn calabi_curvature_decays_like_a_power_of_the_scale() {
        let scales = [1.5, 2.0, 2.5, 3.0];
        let (slope, norms) = calabi_decay_slope(2, &scales);
        assert!(slope <= -2.0, "{slope}");
        let c: Vec<f64> = norms.iter().zip(&scales).map(|(r, l)| r * l.powi(6)).collect();
        let cmax = c.iter().cloned().fold(0.0, f64::max);
        assert!(c.iter().all(|x| (x - cmax).abs() < 1e-6 * cmax), "{c:?}");
        let (slope3, _) = calabi_decay_slope(3, &scales);
        assert!(slope3 <= -2.0, "{slope3}");
    }

    #[test]
    fn curvature_is_stable_under_step_change() {
        use crate::ambient::{CalabiField, CalabiModelSpec};
        use num_complex::Complex64;
        let f = CalabiField::new(CalabiModelSpec::square(2, std::f64::consts::TAU).unwrap());
        let p = f.spec.point(&[Complex64::new(0.2, 0.5)], 1.0, 16.0);
        let a = curvature_at(&f, &p, 1e-3, false).unwrap().norm;
        let b = curvature_at(&f, &p, 2e-3, false).unwrap().norm;
        assert!((a - b).abs() < 1e-8 * a, "{a} {b}");
    }
}
