//! Fourth-order transport of mesh vertices and their tangent frames along
//! V_t, with the metric-variation budget.

use super::{solve_skew, MoserError, SymplecticPair};
use crate::ambient::{Christoffel, MetricField};
use crate::lagmesh::{measure, vertex_jet, ConstructionTag, EigenOptions, ImmersedLagrangian, MeasureOptions};
use crate::{par, Point};
use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    pub steps: usize,
    /// Number of intermediate snapshots, evenly spaced in t and ending at 1.
    pub snapshots: usize,
    /// Rerun at twice the steps and estimate the error of x_N as
    /// 16·max |x_N − x_{2N}| / 15.
    pub error_estimate: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { steps: 200, snapshots: 10, error_estimate: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTraceRow {
    pub t: f64,
    pub sup_v: f64,
    pub mu: f64,
    /// sup over vertices of |ω_t(T₁, T₂)| / |T₁||T₂| for the carried frames.
    pub omega_residual: f64,
    pub l0_min: f64,
    pub l0_max: f64,
    /// Σ √det(Tᵀ g_t T)·h₁h₂ over the carried frames.
    pub volume: f64,
}

/// ODE envelope f(t) = (−1 + (1 + √f₀) e^{ct/2})² of df/dt = c(√f + f).
pub fn envelope(f0: f64, c: f64, t: f64) -> f64 {
    (-1.0 + (1.0 + f0.max(0.0).sqrt()) * (0.5 * c * t).exp()).powi(2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBudget {
    /// (t, μ(t)) at every step.
    pub mu: Vec<(f64, f64)>,
    pub sup_grad_v: f64,
    /// Envelope rate c = 10·sup(|∇Q| + |Q|), set by the sandwich check.
    pub rate: Option<f64>,
    pub a_bound: Option<(f64, f64)>,
    pub h_bound: Option<(f64, f64)>,
    pub lambda_sandwich: Option<(f64, f64)>,
}

impl PerturbationBudget {
    pub fn mu_at(&self, t: f64) -> f64 {
        match self.mu.iter().position(|&(s, _)| s >= t - 1e-12) {
            Some(0) => self.mu[0].1,
            None => self.total_mu(),
            Some(k) => {
                let (t0, m0) = self.mu[k - 1];
                let (t1, m1) = self.mu[k];
                m0 + (m1 - m0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn total_mu(&self) -> f64 {
        self.mu.last().map(|m| m.1).unwrap_or(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct TransportResult {
    pub lag: ImmersedLagrangian,
    pub budget: PerturbationBudget,
    pub trace: Vec<FlowTraceRow>,
    pub snapshots: Vec<(f64, ImmersedLagrangian)>,
    /// Frames at t = 1, per vertex.
    pub tangents: Vec<[Point; 2]>,
    pub initial_residual: f64,
    /// ω′-residual of the carried frames at t = 1.
    pub final_residual: f64,
    /// max over vertices of |Δℓ₀^{n+1}| / ((n+1)∫|V|_{g_t} dt).
    pub scale_drift_ratio: f64,
    pub error_estimate: Option<f64>,
}

type State = (Point, [Point; 2]);

struct Sample {
    v: f64,
    mu_rate: f64,
    grad_v: f64,
    omega: f64,
    l0: f64,
    area: f64,
}

struct VertexRun {
    samples: Vec<Sample>,
    snaps: Vec<Point>,
    end: State,
    int_v: f64,
}

fn field_and_jacobian(pair: &SymplecticPair, t: f64, x: &Point) -> Result<(DVector<f64>, DMatrix<f64>), MoserError> {
    let d = x.len();
    let w = pair.omega_t(t, x)?;
    let v = solve_skew(&w, &(pair.primitive)(x)?, x)?;
    let h = 1e-5 * pair.base.injectivity_proxy(x);
    let mut dv = DMatrix::zeros(d, d);
    for c in 0..d {
        let mut a = x.clone();
        let mut b = x.clone();
        a[c] += h;
        b[c] -= h;
        let va = pair.omega_t(t, &a)?.lu().solve(&(pair.primitive)(&a)?);
        let vb = pair.omega_t(t, &b)?.lu().solve(&(pair.primitive)(&b)?);
        match (va, vb) {
            (Some(va), Some(vb)) => dv.set_column(c, &((va - vb) / (2.0 * h))),
            _ => return Err(MoserError::Degenerate { point: x.as_slice().to_vec(), condition: f64::INFINITY }),
        }
    }
    Ok((v, dv))
}

fn rhs(pair: &SymplecticPair, t: f64, s: &State) -> Result<State, MoserError> {
    let (v, dv) = field_and_jacobian(pair, t, &s.0)?;
    Ok((v, [&dv * &s.1[0], &dv * &s.1[1]]))
}

fn axpy(s: &State, k: &State, a: f64) -> State {
    (&s.0 + &k.0 * a, [&s.1[0] + &k.1[0] * a, &s.1[1] + &k.1[1] * a])
}

fn rk4(pair: &SymplecticPair, t: f64, dt: f64, s: &State) -> Result<State, MoserError> {
    let k1 = rhs(pair, t, s)?;
    let k2 = rhs(pair, t + 0.5 * dt, &axpy(s, &k1, 0.5 * dt))?;
    let k3 = rhs(pair, t + 0.5 * dt, &axpy(s, &k2, 0.5 * dt))?;
    let k4 = rhs(pair, t + dt, &axpy(s, &k3, dt))?;
    let mut out = s.clone();
    for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
        out = axpy(&out, k, dt * w / 6.0);
    }
    Ok(out)
}

/// Q = g′ − g_mod + L_V g_t at x, with the Lie derivative in coordinates.
pub(crate) fn variation_tensor(
    pair: &SymplecticPair,
    t: f64,
    x: &Point,
    v: &DVector<f64>,
    dv: &DMatrix<f64>,
    dg: &[DMatrix<f64>],
) -> Result<DMatrix<f64>, MoserError> {
    let g = pair.metric_t(t, x)?;
    let mut q = pair.target.metric(x)? - pair.base.metric(x)?;
    for (k, dgk) in dg.iter().enumerate() {
        q += dgk * v[k];
    }
    q += dv.transpose() * &g + &g * dv;
    Ok(q)
}

fn frame_norm(h: &Matrix2<f64>, m: &Matrix2<f64>) -> f64 {
    match h.try_inverse() {
        Some(hi) => (hi * m * hi * m).trace().max(0.0).sqrt(),
        None => f64::INFINITY,
    }
}

fn sample(pair: &SymplecticPair, t: f64, s: &State) -> Result<Sample, MoserError> {
    let x = &s.0;
    let field = pair.at(t);
    let (v, dv) = field_and_jacobian(pair, t, x)?;
    let g = pair.metric_t(t, x)?;
    let dg = field.metric_derivs(x)?;
    let q = variation_tensor(pair, t, x, &v, &dv, &dg)?;
    let tt = &s.1;
    let h = Matrix2::from_fn(|a, b| tt[a].dot(&(&g * &tt[b])));
    let hdot = Matrix2::from_fn(|a, b| tt[a].dot(&(&q * &tt[b])));
    let gam = Christoffel::from_metric_derivs(&g, &dg)?;
    let d = x.len();
    // ∇_j V^i = ∂_j V^i + Γ^i_{jk} V^k
    let cov = DMatrix::from_fn(d, d, |i, j| dv[(i, j)] + (0..d).map(|k| gam.get(i, j, k) * v[k]).sum::<f64>());
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or(MoserError::Degenerate { point: x.as_slice().to_vec(), condition: f64::INFINITY })?;
    let grad_v = (cov.transpose() * &g * &cov * &ginv).trace().max(0.0).sqrt();
    let w = pair.omega_t(t, x)?;
    let n1 = tt[0].dot(&(&g * &tt[0])).sqrt();
    let n2 = tt[1].dot(&(&g * &tt[1])).sqrt();
    Ok(Sample {
        v: v.dot(&(&g * &v)).max(0.0).sqrt(),
        mu_rate: frame_norm(&h, &hdot),
        grad_v,
        omega: tt[0].dot(&(&w * &tt[1])).abs() / (n1 * n2),
        l0: pair.base.scale(x).unwrap_or(f64::NAN),
        area: h.determinant().max(0.0).sqrt(),
    })
}

fn run_vertex(
    pair: &SymplecticPair,
    lag: &ImmersedLagrangian,
    vertex: usize,
    steps: usize,
    snap_steps: &[usize],
    with_samples: bool,
) -> Result<VertexRun, MoserError> {
    let (i, j) = lag.coords(vertex);
    let jet = vertex_jet(lag, i, j);
    let mut s: State = (jet.p, jet.t);
    let dt = 1.0 / steps as f64;
    let mut samples = Vec::with_capacity(if with_samples { steps + 1 } else { 0 });
    let mut snaps = Vec::with_capacity(snap_steps.len());
    let mut int_v = 0.0;
    let mut prev_v = None;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let escape = |reason: String| MoserError::DomainEscape { vertex, t, reason };
        if s.0.iter().chain(s.1[0].iter()).chain(s.1[1].iter()).any(|x| !x.is_finite()) {
            return Err(MoserError::DomainEscape {
                vertex,
                t,
                reason: "integrator produced a non-finite state".into(),
            });
        }
        pair.at(t).check_domain(&s.0).map_err(|e| escape(e.to_string()))?;
        if with_samples {
            let smp = sample(pair, t, &s)?;
            if let Some(pv) = prev_v {
                int_v += 0.5 * dt * (pv + smp.v);
            }
            prev_v = Some(smp.v);
            samples.push(smp);
        }
        if snap_steps.contains(&k) {
            snaps.push(s.0.clone());
        }
        if k < steps {
            s = rk4(pair, t, dt, &s)?;
        }
    }
    Ok(VertexRun { samples, snaps, end: s, int_v })
}

fn snapshot_steps(steps: usize, count: usize) -> Vec<usize> {
    (1..=count).map(|k| ((k * steps) as f64 / count as f64).round() as usize).collect()
}

fn moved(lag: &ImmersedLagrangian, positions: Vec<Point>) -> ImmersedLagrangian {
    ImmersedLagrangian { positions, ..lag.clone() }.with_tag(ConstructionTag::Transported)
}

/// Carries every vertex of `lag` and its central-difference frame along V_t
/// from t = 0 to t = 1 with classical RK4.
pub fn transport(
    pair: &SymplecticPair,
    lag: &ImmersedLagrangian,
    opts: &TransportOptions,
) -> Result<TransportResult, MoserError> {
    if opts.steps == 0 {
        return Err(MoserError::Precondition("transport needs at least one step".into()));
    }
    if lag.ambient_dim() != pair.real_dim() {
        return Err(MoserError::Precondition(format!(
            "mesh lives in dimension {} but the pair in {}",
            lag.ambient_dim(),
            pair.real_dim()
        )));
    }
    let snap_steps = snapshot_steps(opts.steps, opts.snapshots);
    let runs = par::try_map_indexed(lag.len(), |v| run_vertex(pair, lag, v, opts.steps, &snap_steps, true))?;
    let n = pair.base.complex_dim() as f64;
    let [h1, h2] = lag.spacing();
    let dt = 1.0 / opts.steps as f64;

    let mut trace = Vec::with_capacity(opts.steps + 1);
    let mut mu = Vec::with_capacity(opts.steps + 1);
    let mut acc = 0.0;
    let mut prev_rate = None;
    let mut sup_grad_v: f64 = 0.0;
    for k in 0..=opts.steps {
        let col = |f: &dyn Fn(&Sample) -> f64| runs.iter().map(|r| f(&r.samples[k])).collect::<Vec<f64>>();
        let rate = par::max_of(&col(&|s| s.mu_rate));
        if let Some(pr) = prev_rate {
            acc += 0.5 * dt * (pr + rate);
        }
        prev_rate = Some(rate);
        let t = k as f64 * dt;
        mu.push((t, acc));
        sup_grad_v = sup_grad_v.max(par::max_of(&col(&|s| s.grad_v)));
        let l0 = col(&|s| s.l0);
        trace.push(FlowTraceRow {
            t,
            sup_v: par::max_of(&col(&|s| s.v)),
            mu: acc,
            omega_residual: par::max_of(&col(&|s| s.omega)),
            l0_min: l0.iter().cloned().fold(f64::INFINITY, f64::min),
            l0_max: l0.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            volume: par::sum_of(&col(&|s| s.area)) * h1 * h2,
        });
    }

    let scale_drift_ratio = runs
        .iter()
        .map(|r| {
            let (a, b) = (r.samples[0].l0, r.samples[opts.steps].l0);
            let num = (b.powf(n + 1.0) - a.powf(n + 1.0)).abs();
            if num == 0.0 {
                0.0
            } else {
                num / ((n + 1.0) * r.int_v)
            }
        })
        .fold(0.0, f64::max);

    let snapshots = snap_steps
        .iter()
        .enumerate()
        .map(|(q, &k)| (k as f64 * dt, moved(lag, runs.iter().map(|r| r.snaps[q].clone()).collect())))
        .collect();
    let final_lag = moved(lag, runs.iter().map(|r| r.end.0.clone()).collect());

    let error_estimate = if opts.error_estimate {
        let fine = par::try_map_indexed(lag.len(), |v| run_vertex(pair, lag, v, 2 * opts.steps, &[], false))?;
        Some(runs.iter().zip(&fine).map(|(a, b)| (&a.end.0 - &b.end.0).amax()).fold(0.0, f64::max) * 16.0 / 15.0)
    } else {
        None
    };

    Ok(TransportResult {
        lag: final_lag,
        budget: PerturbationBudget { mu, sup_grad_v, rate: None, a_bound: None, h_bound: None, lambda_sandwich: None },
        initial_residual: trace[0].omega_residual,
        final_residual: trace[opts.steps].omega_residual,
        trace,
        snapshots,
        tangents: runs.into_iter().map(|r| r.end.1).collect(),
        scale_drift_ratio,
        error_estimate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub t: f64,
    pub mu: f64,
    pub a2: f64,
    pub a2_envelope: f64,
    pub h2: f64,
    pub h2_envelope: f64,
    pub lambda1: Option<f64>,
    pub lambda_bounds: Option<(f64, f64)>,
    pub log_volume_drift: f64,
    pub volume_bound: f64,
    pub pass: bool,
}

/// sup over vertices of |Q|_{g_t} + |∇Q|_{g_t}, with ∇Q from central
/// differences of Q and the Christoffel correction.
fn q_size(pair: &SymplecticPair, t: f64, x: &Point) -> Result<f64, MoserError> {
    let field = pair.at(t);
    let qat = |y: &Point| -> Result<DMatrix<f64>, MoserError> {
        let (v, dv) = field_and_jacobian(pair, t, y)?;
        variation_tensor(pair, t, y, &v, &dv, &field.metric_derivs(y)?)
    };
    let d = x.len();
    let g = pair.metric_t(t, x)?;
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or(MoserError::Degenerate { point: x.as_slice().to_vec(), condition: f64::INFINITY })?;
    let q = qat(x)?;
    let gam = field.christoffel(x)?;
    let h = 1e-3 * pair.base.injectivity_proxy(x);
    let mut grad2 = 0.0;
    let mut dq = Vec::with_capacity(d);
    for k in 0..d {
        let mut a = x.clone();
        let mut b = x.clone();
        a[k] += h;
        b[k] -= h;
        let mut nq = (qat(&a)? - qat(&b)?) / (2.0 * h);
        let corr = DMatrix::from_fn(d, d, |i, j| {
            (0..d).map(|l| gam.get(l, k, i) * q[(l, j)] + gam.get(l, k, j) * q[(i, l)]).sum::<f64>()
        });
        nq -= corr;
        dq.push(nq);
    }
    for k in 0..d {
        for k2 in 0..d {
            if ginv[(k, k2)] != 0.0 {
                grad2 += ginv[(k, k2)] * (&ginv * &dq[k] * &ginv * dq[k2].transpose()).trace();
            }
        }
    }
    let qn = (&ginv * &q * &ginv * &q).trace().max(0.0).sqrt();
    Ok(qn + grad2.max(0.0).sqrt())
}

/// Checks the λ₁ sandwich, the |A|², |H|² envelopes and the volume drift
/// at t = 0 and at every snapshot of `result`, against the interpolated
/// metrics. `eigen` of `None` skips λ₁.
pub fn sandwich_check(
    pair: &SymplecticPair,
    lag: &ImmersedLagrangian,
    result: &mut TransportResult,
    eigen: Option<EigenOptions>,
) -> Result<Vec<SandwichRow>, MoserError> {
    let mut stages = vec![(0.0, lag.clone())];
    stages.extend(result.snapshots.iter().cloned());
    let mut c: f64 = 0.0;
    for (t, snap) in &stages {
        let sizes = par::try_map_indexed(snap.len(), |v| q_size(pair, *t, &snap.positions[v]))?;
        c = c.max(par::max_of(&sizes));
    }
    let c = 10.0 * c;
    let opts = MeasureOptions { eigen, ..MeasureOptions::quick() };
    let reports = stages.iter().map(|(t, snap)| measure(&pair.at(*t), snap, &opts)).collect::<Result<Vec<_>, _>>()?;
    let r0 = &reports[0];
    let k = 2.0;
    let rows: Vec<SandwichRow> = stages
        .iter()
        .zip(&reports)
        .map(|((t, _), r)| {
            let mu = result.budget.mu_at(*t);
            let a2_envelope = envelope(r0.sup_a2, c, *t);
            let h2_envelope = envelope(r0.sup_h2, c, *t);
            let lambda_bounds = r0.lambda1.map(|l| ((-3.0 * mu).exp() * l, (3.0 * mu).exp() * l));
            let log_volume_drift = (r.volume / r0.volume).ln().abs();
            let volume_bound = 0.5 * k * mu;
            let lam_ok = match (r.lambda1, lambda_bounds) {
                (Some(l), Some((lo, hi))) => lo <= l && l <= hi,
                _ => true,
            };
            let tol = 1e-12;
            let pass = r.sup_a2 <= a2_envelope * (1.0 + tol)
                && r.sup_h2 <= h2_envelope * (1.0 + tol) + tol
                && lam_ok
                && log_volume_drift <= volume_bound + tol;
            SandwichRow {
                t: *t,
                mu,
                a2: r.sup_a2,
                a2_envelope,
                h2: r.sup_h2,
                h2_envelope,
                lambda1: r.lambda1,
                lambda_bounds,
                log_volume_drift,
                volume_bound,
                pass,
            }
        })
        .collect();
    result.budget.rate = Some(c);
    result.budget.a_bound = Some((r0.sup_a2, envelope(r0.sup_a2, c, 1.0)));
    result.budget.h_bound = Some((r0.sup_h2, envelope(r0.sup_h2, c, 1.0)));
    result.budget.lambda_sandwich = rows[0].lambda_bounds.map(|_| {
        let mu = result.budget.total_mu();
        let l = r0.lambda1.unwrap_or(0.0);
        ((-3.0 * mu).exp() * l, (3.0 * mu).exp() * l)
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_solves_its_ode() {
        let (f0, c) = (0.03, 2.0);
        for t in [0.1, 0.5, 1.0] {
            let h = 1e-5;
            let df = (envelope(f0, c, t + h) - envelope(f0, c, t - h)) / (2.0 * h);
            let f = envelope(f0, c, t);
            assert!((df - c * (f.sqrt() + f)).abs() < 1e-7 * df.abs().max(1.0));
        }
        assert!((envelope(f0, c, 0.0) - f0).abs() < 1e-15);
    }

    #[test]
    fn mu_interpolates_and_is_monotone() {
        let b = PerturbationBudget {
            mu: vec![(0.0, 0.0), (0.5, 0.1), (1.0, 0.3)],
            sup_grad_v: 0.0,
            rate: None,
            a_bound: None,
            h_bound: None,
            lambda_sandwich: None,
        };
        assert_eq!(b.mu_at(0.0), 0.0);
        assert!((b.mu_at(0.75) - 0.2).abs() < 1e-15);
        assert!((b.total_mu() - 0.3).abs() < 1e-15);
    }
}
