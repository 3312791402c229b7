//! Builders for the model special Lagrangians and for flat and graphical tori.

use super::{ConstructionTag, Deck, ImmersedLagrangian, LagError};
use crate::ambient::{CalabiModelSpec, CylindricalModelSpec, FlatTorusCY};
use crate::Point;
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlagModelSpec {
    /// |ξ|²_h on the model, in (0, 1).
    pub epsilon: f64,
    /// Integer coordinates of the class of N in the base lattice.
    pub slope: [i64; 2],
    pub resolution: [usize; 2],
    /// Amplitude c of the reparametrization
    /// (u₁, u₂) ↦ (u₁ + c·sin 2πu₁ cos 2πu₂ / 2π, u₂ + c·sin 2πu₂ cos 2πu₁ / 2π);
    /// 0 gives the uniform grid.
    #[serde(default)]
    pub warp: f64,
    /// Base point z₀ of the geodesic N.
    #[serde(default)]
    pub base_point: [f64; 2],
}

impl SlagModelSpec {
    pub fn new(epsilon: f64, slope: [i64; 2], resolution: [usize; 2]) -> Self {
        SlagModelSpec { epsilon, slope, resolution, warp: 0.0, base_point: [0.0, 0.0] }
    }

    pub fn with_warp(mut self, warp: f64) -> Self {
        self.warp = warp;
        self
    }

    /// −log ε
    pub fn level(&self) -> f64 {
        -self.epsilon.ln()
    }

    fn validate(&self) -> Result<(), LagError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(LagError::Precondition(format!("ε = {} is not in (0, 1)", self.epsilon)));
        }
        check_primitive(self.slope)?;
        if !(self.warp.abs() < 0.5) {
            return Err(LagError::Precondition("warp amplitude must be below 1/2".into()));
        }
        Ok(())
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn check_primitive(slope: [i64; 2]) -> Result<(), LagError> {
    if gcd(slope[0], slope[1]) != 1 {
        return Err(LagError::Precondition(format!("slope {slope:?} is not primitive")));
    }
    Ok(())
}

fn warped(u1: f64, u2: f64, c: f64) -> (f64, f64) {
    let (s1, c1) = (TAU * u1).sin_cos();
    let (s2, c2) = (TAU * u2).sin_cos();
    (u1 + c * s1 * c2 / TAU, u2 + c * s2 * c1 / TAU)
}

/// φ₀ = π/2 + arg Ω_D(λ): the phase of Ω on (∂_N, ∂_θ) for a lifted geodesic.
pub fn model_special_phase(base: &FlatTorusCY, lambda: Complex64) -> f64 {
    FRAC_PI_2 + (base.holvol_phase * lambda).arg()
}

/// M_ε: the circle bundle {|ξ|²_h = ε} over the closed geodesic N through z₀
/// in the class `slope`. Grid direction 0 runs along N, direction 1 around
/// the fiber.
pub fn build_model_slag(ambient: &CalabiModelSpec, spec: &SlagModelSpec) -> Result<ImmersedLagrangian, LagError> {
    spec.validate()?;
    if ambient.base_dim() != 1 {
        return Err(LagError::Precondition("model meshes are surfaces; the base must have complex dimension 1".into()));
    }
    let l = spec.level();
    let kappa = ambient.hermitian_curvature;
    let deck = ambient.automorphy(&spec.slope, 0.0);
    let lambda = deck.lambda[0];
    let z0 = Complex64::new(spec.base_point[0], spec.base_point[1]);
    // θ advance along N so that the lift closes under the deck map
    let psi = kappa * (z0 * lambda.conj()).im + deck.chi_arg;
    let [m1, m2] = spec.resolution;
    let at = |u1: f64, u2: f64| -> Point {
        let z = z0 + lambda * u1;
        ambient.point(&[z], TAU * u2 + psi * u1, l)
    };
    let positions: Vec<Point> = (0..m1 * m2)
        .map(|v| {
            let (i, j) = (v % m1, v / m1);
            let (u1, u2) = warped(i as f64 / m1 as f64, j as f64 / m2 as f64, spec.warp);
            at(u1, u2)
        })
        .collect();
    for u2 in [0.0, 0.37] {
        let closed = at(1.0, u2);
        let mapped = deck.apply(&at(0.0, u2), 1);
        let gap = (&closed - &mapped).amax();
        if gap > 1e-9 * (1.0 + closed.amax()) {
            return Err(LagError::Construction(format!(
                "circle lift does not close under the automorphy (gap {gap:e})"
            )));
        }
    }
    let decks = [Deck::Automorphy(deck), Deck::Translate(vec![0.0, 0.0, 0.0, TAU])];
    let mut lag = ImmersedLagrangian::new(
        spec.resolution,
        positions,
        decks,
        ConstructionTag::ModelMEps,
        model_special_phase(&ambient.base, lambda),
    )?;
    lag.h1_basis[0].label = "lifted N".into();
    lag.h1_basis[1].label = "fiber circle".into();
    Ok(lag)
}

/// M_ρ = {ℓ = ρ} × [0, γ/m] × N glued by ι, for a cross-section of complex
/// dimension one. Grid direction 0 runs along N, direction 1 along θ.
pub fn build_model_cyl_slag(
    ambient: &CylindricalModelSpec,
    rho: f64,
    slope: [i64; 2],
    resolution: [usize; 2],
) -> Result<ImmersedLagrangian, LagError> {
    check_primitive(slope)?;
    if !(rho > 0.0) {
        return Err(LagError::Precondition(format!("ρ = {rho} must be positive")));
    }
    let base = &ambient.cross_section;
    if base.complex_dim_base != 1 {
        return Err(LagError::Precondition("model meshes are surfaces; D must have complex dimension 1".into()));
    }
    let lambda = base.lattice_vector(&slope)[0];
    let shift = &ambient.iota_shift;
    let shift_c = Complex64::new(shift[0], shift[1]);
    if (shift_c * lambda.conj()).im.abs() > 1e-12 * (1.0 + shift_c.norm() * lambda.norm()) {
        return Err(LagError::Precondition("the base translation of ι must run along N".into()));
    }
    let step = ambient.circle_length / ambient.isometry_order as f64;
    let [m1, m2] = resolution;
    let positions: Vec<Point> = (0..m1 * m2)
        .map(|v| {
            let (u1, u2) = ((v % m1) as f64 / m1 as f64, (v / m1) as f64 / m2 as f64);
            let x = lambda * u1 + shift_c * u2;
            Point::from_vec(vec![rho, step * u2, x.re, x.im])
        })
        .collect();
    let decks =
        [Deck::Translate(vec![0.0, 0.0, lambda.re, lambda.im]), Deck::Translate(vec![0.0, step, shift[0], shift[1]])];
    let mut lag = ImmersedLagrangian::new(
        resolution,
        positions,
        decks,
        ConstructionTag::ModelMRho,
        model_special_phase(base, lambda),
    )?;
    lag.h1_basis[0].label = "N".into();
    lag.h1_basis[1].label = "ι-circle".into();
    Ok(lag)
}

/// Flat torus spanned by two lattice generators of a flat ℂ² torus.
pub fn build_flat_subtorus(
    base: &FlatTorusCY,
    generators: [usize; 2],
    resolution: [usize; 2],
) -> Result<ImmersedLagrangian, LagError> {
    if base.complex_dim_base != 2 {
        return Err(LagError::Precondition("flat sub-tori live in a complex two-torus".into()));
    }
    let v: [DVector<f64>; 2] = [base.lattice.column(generators[0]).into(), base.lattice.column(generators[1]).into()];
    let fr = base.frame();
    let w = v[0].dot(&(&fr.omega * &v[1]));
    if w.abs() > 1e-12 * v[0].norm() * v[1].norm() {
        return Err(LagError::Precondition(format!("generators {generators:?} do not span a Lagrangian plane")));
    }
    let [m1, m2] = resolution;
    let positions =
        (0..m1 * m2).map(|k| &v[0] * ((k % m1) as f64 / m1 as f64) + &v[1] * ((k / m1) as f64 / m2 as f64)).collect();
    let phase = fr.holo.eval(&[v[0].clone(), v[1].clone()]).arg();
    ImmersedLagrangian::new(
        resolution,
        positions,
        [Deck::Translate(v[0].as_slice().to_vec()), Deck::Translate(v[1].as_slice().to_vec())],
        ConstructionTag::Graph,
        phase,
    )
}

/// Fourier mode A·cos(2π(k·u) + φ) of a periodic potential on the square torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMode {
    pub k: [i64; 2],
    pub amplitude: f64,
    pub phase: f64,
}

/// The gradient graph y = ∇u(x) over the (x₁, x₂) plane of a square flat
/// ℂ² torus of side a, with u a finite Fourier sum.
pub fn build_graph(
    base: &FlatTorusCY,
    modes: &[GraphMode],
    resolution: [usize; 2],
) -> Result<ImmersedLagrangian, LagError> {
    if base.complex_dim_base != 2 {
        return Err(LagError::Precondition("graphs are taken over a complex two-torus".into()));
    }
    let a = base.lattice[(0, 0)];
    let square = (&base.lattice - nalgebra::DMatrix::identity(4, 4) * a).amax() < 1e-12 * a;
    if !square {
        return Err(LagError::Precondition("graph builder needs a square lattice".into()));
    }
    let [m1, m2] = resolution;
    let positions = (0..m1 * m2)
        .map(|v| {
            let (u1, u2) = ((v % m1) as f64 / m1 as f64, (v / m1) as f64 / m2 as f64);
            let mut grad = [0.0, 0.0];
            for md in modes {
                let arg = TAU * (md.k[0] as f64 * u1 + md.k[1] as f64 * u2) + md.phase;
                let s = -md.amplitude * arg.sin() * TAU / a;
                grad[0] += s * md.k[0] as f64;
                grad[1] += s * md.k[1] as f64;
            }
            Point::from_vec(vec![a * u1, grad[0], a * u2, grad[1]])
        })
        .collect();
    let fr = base.frame();
    let e = |i: usize| DVector::from_fn(4, |r, _| if r == i { 1.0 } else { 0.0 });
    let phase = fr.holo.eval(&[e(0), e(2)]).arg();
    ImmersedLagrangian::new(
        resolution,
        positions,
        [Deck::Translate(vec![a, 0.0, 0.0, 0.0]), Deck::Translate(vec![0.0, 0.0, a, 0.0])],
        ConstructionTag::Graph,
        phase,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_slope_is_not_primitive() {
        let c = CalabiModelSpec::square(2, TAU).unwrap();
        let r = build_model_slag(&c, &SlagModelSpec::new((-16.0f64).exp(), [0, 0], [8, 8]));
        assert!(matches!(r, Err(LagError::Precondition(_))));
        let r = build_model_slag(&c, &SlagModelSpec::new((-16.0f64).exp(), [2, 4], [8, 8]));
        assert!(matches!(r, Err(LagError::Precondition(_))));
    }

    #[test]
    fn model_lies_on_the_level_set() {
        let c = CalabiModelSpec::square(2, TAU).unwrap();
        let mut s = SlagModelSpec::new((-16.0f64).exp(), [1, 1], [12, 10]).with_warp(0.3);
        s.base_point = [0.4, -1.1];
        let lag = build_model_slag(&c, &s).unwrap();
        for i in -2..14 {
            for j in -2..12 {
                assert!((c.log_norm(&lag.lifted(i, j)) - 16.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn offset_base_point_still_closes() {
        let c = CalabiModelSpec::square(2, TAU).unwrap();
        let mut s = SlagModelSpec::new(0.01, [1, 0], [8, 8]);
        s.base_point = [0.3, 2.0];
        assert!(build_model_slag(&c, &s).is_ok());
    }

    #[test]
    fn non_lagrangian_generators_are_rejected() {
        let base = FlatTorusCY::square(2, 1.0, 1.0).unwrap();
        assert!(build_flat_subtorus(&base, [0, 1], [4, 4]).is_err());
        assert!(build_flat_subtorus(&base, [0, 2], [4, 4]).is_ok());
    }
}
