//! First variation of the second fundamental form of a fixed mesh under a
//! family of ambient metrics, checked against its closed form.

use super::geometry::{normal_part, second_fundamental_with, vertex_jet};
use super::{ImmersedLagrangian, LagError};
use crate::ambient::{AmbientError, Christoffel, MetricField};
use crate::{par, Point};
use nalgebra::DMatrix;

/// t ↦ g(t) with spatial derivatives.
pub trait MetricFamily: Send + Sync {
    fn metric(&self, t: f64, p: &Point) -> Result<DMatrix<f64>, AmbientError>;
    fn metric_derivs(&self, t: f64, p: &Point) -> Result<Vec<DMatrix<f64>>, AmbientError>;
    fn christoffel(&self, t: f64, p: &Point) -> Result<Christoffel, AmbientError> {
        Christoffel::from_metric_derivs(&self.metric(t, p)?, &self.metric_derivs(t, p)?)
    }
}

pub struct StaticFamily<F>(pub F);

impl<F: MetricField> MetricFamily for StaticFamily<F> {
    fn metric(&self, _t: f64, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        self.0.metric(p)
    }
    fn metric_derivs(&self, _t: f64, p: &Point) -> Result<Vec<DMatrix<f64>>, AmbientError> {
        self.0.metric_derivs(p)
    }
}

/// g(t) = (1 + rate·t) g
pub struct ConformalFamily<F> {
    pub inner: F,
    pub rate: f64,
}

impl<F: MetricField> MetricFamily for ConformalFamily<F> {
    fn metric(&self, t: f64, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        Ok(self.inner.metric(p)? * (1.0 + self.rate * t))
    }
    fn metric_derivs(&self, t: f64, p: &Point) -> Result<Vec<DMatrix<f64>>, AmbientError> {
        Ok(self.inner.metric_derivs(p)?.into_iter().map(|d| d * (1.0 + self.rate * t)).collect())
    }
}

/// g(t) = (1 − t) g₀ + t g₁
pub struct InterpolatedFamily<F0, F1> {
    pub from: F0,
    pub to: F1,
}

impl<F0: MetricField, F1: MetricField> MetricFamily for InterpolatedFamily<F0, F1> {
    fn metric(&self, t: f64, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        Ok(self.from.metric(p)? * (1.0 - t) + self.to.metric(p)? * t)
    }
    fn metric_derivs(&self, t: f64, p: &Point) -> Result<Vec<DMatrix<f64>>, AmbientError> {
        let a = self.from.metric_derivs(p)?;
        let b = self.to.metric_derivs(p)?;
        Ok(a.into_iter().zip(b).map(|(x, y)| x * (1.0 - t) + y * t).collect())
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VariationReport {
    /// sup over vertices and (i, j) of |∇̄_t A_ij (differenced) − closed form|_g
    pub residual: f64,
    /// The same with the Christoffel-variation term doubled.
    pub residual_doubled: f64,
    /// sup |∇̄_t A_ij| for scale.
    pub magnitude: f64,
    /// sup of |∂_t|A|²| / (10(|∇ġ||A| + |ġ||A|²)) over vertices where the
    /// denominator is nonzero.
    pub bound_ratio: f64,
}

fn gnorm(g: &DMatrix<f64>, v: &Point) -> f64 {
    v.dot(&(g * v)).max(0.0).sqrt()
}

/// Closed form at one vertex:
/// ∇̄_t A_ij = N(Γ̇(∂_i, ∂_j)) + ½N(g⁻¹ġA_ij) − ½ h^{lm} ġ(A_ij, ∂_m) ∂_l,
/// Γ̇(X, Y) = ½g⁻¹(∇_X ġ(Y, ·) + ∇_Y ġ(X, ·) − ∇ġ(X, Y)).
pub fn second_fundamental_variation_check<M: MetricFamily + ?Sized>(
    lag: &ImmersedLagrangian,
    family: &M,
    t0: f64,
    dt: f64,
) -> Result<VariationReport, LagError> {
    let per = par::try_map_indexed(lag.len(), |v| -> Result<[f64; 4], LagError> {
        let (i, j) = lag.coords(v);
        let jet = vertex_jet(lag, i, j);
        let p = &jet.p;
        let d = p.len();
        let gm = family.metric(t0 - dt, p)?;
        let g0 = family.metric(t0, p)?;
        let gp = family.metric(t0 + dt, p)?;
        let gam0 = family.christoffel(t0, p)?;
        let am = second_fundamental_with(gm.clone(), &family.christoffel(t0 - dt, p)?, &jet, (i, j))?;
        let a0 = second_fundamental_with(g0.clone(), &gam0, &jet, (i, j))?;
        let ap = second_fundamental_with(gp.clone(), &family.christoffel(t0 + dt, p)?, &jet, (i, j))?;
        let gdot = (&gp - &gm) / (2.0 * dt);
        let dgm = family.metric_derivs(t0 - dt, p)?;
        let dgp = family.metric_derivs(t0 + dt, p)?;
        // ∇_k ġ_ab
        let mut cov = vec![DMatrix::<f64>::zeros(d, d); d];
        for k in 0..d {
            let dk = (&dgp[k] - &dgm[k]) / (2.0 * dt);
            for a in 0..d {
                for b in 0..d {
                    let mut s = dk[(a, b)];
                    for c in 0..d {
                        s -= gam0.get(c, k, a) * gdot[(c, b)] + gam0.get(c, k, b) * gdot[(a, c)];
                    }
                    cov[k][(a, b)] = s;
                }
            }
        }
        let ginv = g0.clone().try_inverse().ok_or_else(|| AmbientError::Inconsistency("singular metric".into()))?;
        let gamma_dot = |x: &Point, y: &Point| -> Point {
            let low = Point::from_fn(d, |e, _| {
                let mut s = 0.0;
                for k in 0..d {
                    for b in 0..d {
                        s += x[k] * y[b] * (cov[k][(b, e)] + cov[b][(k, e)] - cov[e][(k, b)]);
                    }
                }
                0.5 * s
            });
            &ginv * low
        };
        let t = &jet.t;
        let mut worst = [0.0f64; 3];
        for a in 0..2 {
            for b in 0..2 {
                let aij = &a0.a[a][b];
                let fd = (&ap.a[a][b] - &am.a[a][b]) / (2.0 * dt) + (&ginv * (&gdot * aij)) * 0.5;
                let gd = gamma_dot(&t[a], &t[b]);
                let mut rest = normal_part(&g0, &a0.hinv, t, &(&ginv * (&gdot * aij))) * 0.5;
                let c = [t[0].dot(&(&gdot * aij)), t[1].dot(&(&gdot * aij))];
                for l in 0..2 {
                    rest -= &t[l] * (0.5 * (a0.hinv[(l, 0)] * c[0] + a0.hinv[(l, 1)] * c[1]));
                }
                let n_gd = normal_part(&g0, &a0.hinv, t, &gd);
                let closed = &n_gd + &rest;
                let doubled = &n_gd * 2.0 + &rest;
                worst[0] = worst[0].max(gnorm(&g0, &(&fd - &closed)));
                worst[1] = worst[1].max(gnorm(&g0, &(&fd - &doubled)));
                worst[2] = worst[2].max(gnorm(&g0, &fd));
            }
        }
        // |∂_t|A|²| against 10(|∇ġ||A| + |ġ||A|²)
        let da2 = (ap.a_norm2 - am.a_norm2) / (2.0 * dt);
        let gd_norm = (&ginv * &gdot * &ginv * &gdot).trace().max(0.0).sqrt();
        let mut cov_norm2 = 0.0;
        for k in 0..d {
            for k2 in 0..d {
                let w = ginv[(k, k2)];
                if w == 0.0 {
                    continue;
                }
                cov_norm2 += w * (&ginv * &cov[k] * &ginv * &cov[k2]).trace();
            }
        }
        let an = a0.a_norm2.sqrt();
        let denom = 10.0 * (cov_norm2.max(0.0).sqrt() * an + gd_norm * an * an);
        let ratio = if denom > 1e-300 { da2.abs() / denom } else { 0.0 };
        Ok([worst[0], worst[1], worst[2], ratio])
    })?;
    let sup = |k: usize| per.iter().map(|x| x[k]).fold(0.0, f64::max);
    Ok(VariationReport { residual: sup(0), residual_doubled: sup(1), magnitude: sup(2), bound_ratio: sup(3) })
}
