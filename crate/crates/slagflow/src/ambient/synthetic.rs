//! Decaying perturbations of the Calabi model. The perturbed structure is
//! the pullback of the Calabi structure by Φ(p) = p + A e^{−δL} X(p), where
//! X is a lattice-periodic combination of ∂_s and ∂_θ. Because the linear
//! part of every deck map fixes ∂_s and ∂_θ, Φ commutes with the deck
//! group and the perturbed field descends. The symplectic discrepancy has
//! the exact primitive β = Φ*α − α with α = ½dᶜΨ.

use super::{AmbientError, CalabiField, Christoffel, FieldKind, Frame, MetricField};
use crate::Point;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileId {
    /// X = cos(k·x + φ₁) ∂_s + sin(k·x + φ₂) ∂_θ
    Twist,
    /// X = ∂_s
    Radial,
}

impl std::str::FromStr for ProfileId {
    type Err = AmbientError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "twist" => Ok(ProfileId::Twist),
            "radial" => Ok(ProfileId::Radial),
            other => Err(AmbientError::InvalidSpec(format!("unknown profile id {other:?} (known: twist, radial)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTYPerturbation {
    pub decay_rate: f64,
    pub amplitude: f64,
    pub profile: ProfileId,
    pub seed: u64,
}

impl SyntheticTYPerturbation {
    pub fn new(amplitude: f64, decay_rate: f64, profile: ProfileId, seed: u64) -> Self {
        SyntheticTYPerturbation { decay_rate, amplitude, profile, seed }
    }

    /// The declared bound A·e^{−δL}·(1 + 2nδ ℓ₀^{2n−1}|dℓ₀|)^k on
    /// |∇^k(g_pert − g_𝒞)|.
    pub fn envelope(&self, n: usize, l0: f64, grad_l0: f64, k: u32) -> f64 {
        let nf = n as f64;
        let base = self.amplitude.abs() * (-self.decay_rate * l0.powf(2.0 * nf)).exp();
        base * (1.0 + self.decay_rate * 2.0 * nf * l0.powf(2.0 * nf - 1.0) * grad_l0).powi(k as i32)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticTYField {
    pub calabi: CalabiField,
    pub pert: SyntheticTYPerturbation,
    wave: DVector<f64>,
    phases: (f64, f64),
}

impl SyntheticTYField {
    pub fn new(calabi: CalabiField, pert: SyntheticTYPerturbation) -> Result<Self, AmbientError> {
        if !(pert.decay_rate > 0.0) {
            return Err(AmbientError::InvalidSpec("decay rate must be positive".into()));
        }
        let m = calabi.spec.base_dim();
        let inv = calabi
            .spec
            .base
            .lattice
            .clone()
            .try_inverse()
            .ok_or_else(|| AmbientError::InvalidSpec("singular lattice".into()))?;
        let wave = inv.row(0).transpose() * std::f64::consts::TAU;
        debug_assert_eq!(wave.len(), 2 * m);
        let mut rng = ChaCha8Rng::seed_from_u64(pert.seed);
        let phases = if pert.seed == 0 {
            (0.0, 0.0)
        } else {
            (rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU))
        };
        let f = SyntheticTYField { calabi, pert, wave, phases };
        f.check_positivity()?;
        Ok(f)
    }

    fn m(&self) -> usize {
        self.calabi.spec.base_dim()
    }

    /// Components (X^s, X^θ) and their first and second derivatives of
    /// A e^{−δL} X, as (value, gradient, hessian) per component.
    fn displacement(&self, p: &Point) -> [(f64, DVector<f64>, DMatrix<f64>); 2] {
        let m = self.m();
        let d = 2 * m + 2;
        let delta = self.pert.decay_rate;
        let l = self.calabi.spec.log_norm(p);
        let h = self.pert.amplitude * (-delta * l).exp();
        let dl = self.calabi.dl(p);
        let mut ddl = DMatrix::zeros(d, d);
        for i in 0..2 * m {
            ddl[(i, i)] = 2.0 * self.calabi.spec.hermitian_curvature;
        }
        let mut k = DVector::zeros(d);
        for i in 0..2 * m {
            k[i] = self.wave[i];
        }
        let phase = (0..2 * m).map(|i| k[i] * p[i]).sum::<f64>();
        let comp = |val: f64, grad: DVector<f64>, hess: DMatrix<f64>| {
            // derivatives of h·c with h = A e^{−δL}
            let v = h * val;
            let gv = (&grad - &dl * (delta * val)) * h;
            let hv = (&hess - (&grad * dl.transpose() + &dl * grad.transpose()) * delta - &ddl * (delta * val)
                + &dl * dl.transpose() * (delta * delta * val))
                * h;
            (v, gv, hv)
        };
        match self.pert.profile {
            ProfileId::Twist => {
                let (a1, a2) = (phase + self.phases.0, phase + self.phases.1);
                let kk = &k * k.transpose();
                [comp(a1.cos(), &k * (-a1.sin()), &kk * (-a1.cos())), comp(a2.sin(), &k * a2.cos(), &kk * (-a2.sin()))]
            }
            ProfileId::Radial => {
                [comp(1.0, DVector::zeros(d), DMatrix::zeros(d, d)), (0.0, DVector::zeros(d), DMatrix::zeros(d, d))]
            }
        }
    }

    pub fn phi(&self, p: &Point) -> Point {
        let m = self.m();
        let [(xs, _, _), (xt, _, _)] = self.displacement(p);
        let mut q = p.clone();
        q[2 * m] += xs;
        q[2 * m + 1] += xt;
        q
    }

    /// Φ(p), DΦ(p), and ∂_b∂_c Φ^a for a ∈ {s, θ}.
    fn jet(&self, p: &Point) -> (Point, DMatrix<f64>, [DMatrix<f64>; 2]) {
        let m = self.m();
        let d = 2 * m + 2;
        let [(xs, gs, hs), (xt, gt, ht)] = self.displacement(p);
        let mut q = p.clone();
        q[2 * m] += xs;
        q[2 * m + 1] += xt;
        let mut jac = DMatrix::identity(d, d);
        for c in 0..d {
            jac[(2 * m, c)] += gs[c];
            jac[(2 * m + 1, c)] += gt[c];
        }
        (q, jac, [hs, ht])
    }

    /// β = Φ*α − α
    pub fn beta(&self, p: &Point) -> Result<DVector<f64>, AmbientError> {
        let (q, jac, _) = self.jet(p);
        let a_q = self.calabi.kahler_primitive(&q)?;
        let a_p = self.calabi.kahler_primitive(p)?;
        Ok(jac.transpose() * a_q - a_p)
    }

    /// ω_pert − ω_𝒞 at p.
    pub fn omega_discrepancy(&self, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        Ok(self.frame(p)?.omega - self.calabi.frame(p)?.omega)
    }

    fn check_positivity(&self) -> Result<(), AmbientError> {
        let spec = &self.calabi.spec;
        let m = spec.base_dim();
        let n = spec.total_complex_dim as f64;
        let (lo, hi) = spec.scale_window;
        for i in 0..8 {
            for j in 0..6 {
                let t = i as f64 / 8.0;
                let mut x = DVector::zeros(2 * m);
                x[0] = t;
                let xb = &spec.base.lattice * x;
                let z: Vec<_> = (0..m).map(|a| num_complex::Complex64::new(xb[2 * a], xb[2 * a + 1])).collect();
                let l0 = lo + (hi - lo) * j as f64 / 5.0;
                let p = spec.point(&z, 0.0, l0.powf(2.0 * n));
                let g = self.calabi.metric(&p)?;
                let gp = self
                    .metric(&p)
                    .map_err(|e| AmbientError::Amplitude(format!("perturbed metric undefined at ℓ₀ = {l0:.3}: {e}")))?;
                let ch = g.cholesky().ok_or_else(|| AmbientError::Inconsistency("Calabi metric not SPD".into()))?;
                let linv = ch.l().try_inverse().unwrap();
                let rel = &linv * gp * linv.transpose();
                let ev = rel.symmetric_eigenvalues();
                let (emin, emax) = (ev.min(), ev.max());
                if !(emin >= 0.5 && emax <= 2.0) {
                    return Err(AmbientError::Amplitude(format!(
                        "relative metric eigenvalues [{emin:.4}, {emax:.4}] leave [1/2, 2] at ℓ₀ = {l0:.3}, point {:?}",
                        p.as_slice()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Measured |∇^k(g_pert − g_𝒞)|_{g_𝒞} for k = 0, 1, 2, with ∇ the
    /// Levi-Civita connection of g_𝒞.
    pub fn deviation_norms(&self, p: &Point) -> Result<[f64; 3], AmbientError> {
        let diff = |q: &Point| -> Result<DMatrix<f64>, AmbientError> { Ok(self.metric(q)? - self.calabi.metric(q)?) };
        let d = p.len();
        let h = 1e-3 * self.calabi.injectivity_proxy(p);
        let cov1 = |q: &Point| -> Result<Vec<DMatrix<f64>>, AmbientError> {
            let dd = diff(q)?;
            let gam = self.calabi.christoffel(q)?;
            let mut out = Vec::with_capacity(d);
            for c in 0..d {
                let der = super::richardson_derivative(|r| diff(r), q, c, h)?;
                out.push(DMatrix::from_fn(d, d, |a, b| {
                    let mut v = der[(a, b)];
                    for e in 0..d {
                        v -= gam.get(e, c, a) * dd[(e, b)] + gam.get(e, c, b) * dd[(a, e)];
                    }
                    v
                }));
            }
            Ok(out)
        };
        let g = self.calabi.metric(p)?;
        let gi = g.clone().try_inverse().unwrap();
        let d0 = diff(p)?;
        let n0 = (&gi * &d0 * &gi * &d0).trace().max(0.0).sqrt();
        let t1 = cov1(p)?;
        let mut n1 = 0.0;
        for c in 0..d {
            for c2 in 0..d {
                n1 += gi[(c, c2)] * (&gi * &t1[c] * &gi * &t1[c2]).trace();
            }
        }
        // second covariant derivative: differentiate ∇D and correct all
        // three slots
        let gam = self.calabi.christoffel(p)?;
        let mut t2 = vec![vec![DMatrix::zeros(d, d); d]; d];
        let mut der: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(d);
        for e in 0..d {
            let mut a = p.clone();
            let mut b = p.clone();
            a[e] += h;
            b[e] -= h;
            let (ta, tb) = (cov1(&a)?, cov1(&b)?);
            der.push((0..d).map(|c| (&ta[c] - &tb[c]) / (2.0 * h)).collect());
        }
        for e in 0..d {
            for c in 0..d {
                t2[e][c] = DMatrix::from_fn(d, d, |a, b| {
                    let mut v = der[e][c][(a, b)];
                    for f in 0..d {
                        v -= gam.get(f, e, c) * t1[f][(a, b)]
                            + gam.get(f, e, a) * t1[c][(f, b)]
                            + gam.get(f, e, b) * t1[c][(a, f)];
                    }
                    v
                });
            }
        }
        let mut n2 = 0.0;
        for e in 0..d {
            for e2 in 0..d {
                for c in 0..d {
                    for c2 in 0..d {
                        let w = gi[(e, e2)] * gi[(c, c2)];
                        if w != 0.0 {
                            n2 += w * (&gi * &t2[e][c] * &gi * &t2[e2][c2]).trace();
                        }
                    }
                }
            }
        }
        Ok([n0, n1.max(0.0).sqrt(), n2.max(0.0).sqrt()])
    }
}

impl MetricField for SyntheticTYField {
    fn kind(&self) -> FieldKind {
        FieldKind::SyntheticTy
    }

    fn complex_dim(&self) -> usize {
        self.calabi.complex_dim()
    }

    fn frame(&self, p: &Point) -> Result<Frame, AmbientError> {
        let (q, jac, _) = self.jet(p);
        let f = self.calabi.frame(&q)?;
        let jinv = jac
            .clone()
            .try_inverse()
            .ok_or_else(|| AmbientError::Amplitude(format!("Φ is singular at {:?}", p.as_slice())))?;
        Ok(Frame {
            g: jac.transpose() * &f.g * &jac,
            omega: jac.transpose() * &f.omega * &jac,
            j: &jinv * &f.j * &jac,
            holo: f.holo.pullback(&jac),
        })
    }

    fn metric(&self, p: &Point) -> Result<DMatrix<f64>, AmbientError> {
        let (q, jac, _) = self.jet(p);
        Ok(jac.transpose() * self.calabi.metric(&q)? * &jac)
    }

    fn injectivity_proxy(&self, p: &Point) -> f64 {
        self.calabi.injectivity_proxy(p)
    }

    fn scale(&self, p: &Point) -> Option<f64> {
        self.calabi.scale(p)
    }

    fn check_domain(&self, p: &Point) -> Result<(), AmbientError> {
        self.calabi.check_domain(p)?;
        self.calabi.check_domain(&self.phi(p))
    }

    /// Γ' = DΦ⁻¹(Γ(Φp)(DΦ·, DΦ·) + D²Φ)
    fn christoffel(&self, p: &Point) -> Result<Christoffel, AmbientError> {
        let m = self.m();
        let d = 2 * m + 2;
        let (q, jac, hess) = self.jet(p);
        let gam = self.calabi.christoffel(&q)?;
        let jinv = jac.clone().try_inverse().ok_or_else(|| AmbientError::Amplitude("Φ is singular".into()))?;
        let mut out = Christoffel::zeros(d);
        for b in 0..d {
            for c in b..d {
                let u = jac.column(b).into_owned();
                let v = jac.column(c).into_owned();
                let mut w = gam.apply(&u, &v);
                w[2 * m] += hess[0][(b, c)];
                w[2 * m + 1] += hess[1][(b, c)];
                let r = &jinv * w;
                for a in 0..d {
                    out.set(a, b, c, r[a]);
                    out.set(a, c, b, r[a]);
                }
            }
        }
        Ok(out)
    }
}
