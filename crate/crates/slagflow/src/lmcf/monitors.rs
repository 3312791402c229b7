//! Checks run on a finished flow trace.

use super::{FlowSample, FlowTrace};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// a in ∫|H|² ≈ C e^{−a t}
    pub rate: f64,
    pub window: (f64, f64),
    /// RMS residual of the log-linear fit.
    pub residual: f64,
}

/// Least-squares fit of log ∫|H|² against t over the samples in `window`
/// (all samples if `None`); needs three positive samples.
pub fn fit_decay(trace: &FlowTrace, window: Option<(f64, f64)>) -> Option<DecayFit> {
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let pts: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .filter(|s| s.t >= lo && s.t <= hi && s.int_h2 > 1e-300)
        .map(|s| (s.t, s.int_h2.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt = pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    if stt == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>() / stt;
    let residual = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mt)).powi(2)).sum::<f64>() / n).sqrt();
    Some(DecayFit { rate: -slope, window: (pts[0].0, pts[pts.len() - 1].0), residual })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub pass: bool,
    /// min over pairs of (bound − quotient)/|right side|.
    pub worst_margin: f64,
    pub pairs_checked: usize,
    /// ∫|H|²(t) ≤ e^{−ε(t−t₀)}∫|H|²(t₀) over the longest window where
    /// λ₁ > ε and ε > 2 sup|A||H|, if such a window exists.
    pub window_claim: Option<bool>,
}

fn ah(s: &FlowSample) -> f64 {
    (s.sup_a2 * s.sup_h2).max(0.0).sqrt()
}

/// d/dt ∫|H|² ≤ −2(λ₁ − sup|A||H|)∫|H|² between consecutive samples, the
/// difference quotient compared with the right side at the earlier sample
/// plus `slack`·|right side| and an absolute `allowance`.
pub fn decay_monitor(trace: &FlowTrace, slack: f64, allowance: f64, eps: Option<f64>) -> DecayCheck {
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    let mut pass = true;
    for w in trace.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let Some(l1) = a.lambda1 else { continue };
        let dt = b.t - a.t;
        let q = (b.int_h2 - a.int_h2) / dt;
        let rhs = -2.0 * (l1 - ah(a)) * a.int_h2;
        let bound = rhs + slack * rhs.abs() + allowance;
        checked += 1;
        if q > bound {
            pass = false;
        }
        let scale = rhs.abs().max(allowance).max(1e-300);
        worst = worst.min((bound - q) / scale);
    }
    let window_claim = eps.and_then(|e| {
        let ok = |s: &FlowSample| s.lambda1.is_some_and(|l| l > e) && e > 2.0 * ah(s);
        let mut best: Option<(usize, usize)> = None;
        let mut start = None;
        for (k, s) in trace.samples.iter().enumerate() {
            match (ok(s), start) {
                (true, None) => start = Some(k),
                (false, Some(s0)) => {
                    if best.map_or(true, |(b0, b1)| k - 1 - s0 > b1 - b0) {
                        best = Some((s0, k - 1));
                    }
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s0) = start {
            let k = trace.samples.len() - 1;
            if best.map_or(true, |(b0, b1)| k - s0 > b1 - b0) {
                best = Some((s0, k));
            }
        }
        let (s0, s1) = best.filter(|(a, b)| b > a)?;
        let base = &trace.samples[s0];
        Some(
            trace.samples[s0..=s1]
                .iter()
                .all(|s| s.int_h2 <= (-e * (s.t - base.t)).exp() * base.int_h2 * (1.0 + slack) + allowance),
        )
    });
    DecayCheck { pass, worst_margin: worst, pairs_checked: checked, window_claim }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftCheck {
    pub lambda_ok: bool,
    pub noncollapse_ok: Option<bool>,
    pub scale_ok: Option<bool>,
    pub final_mu: f64,
    /// Largest |log λ₁(t) − log λ₁(0)| / 3μ(t) over samples with μ > 0.
    pub lambda_ratio: f64,
}

/// λ₁ sandwich, noncollapsing decay and scale drift along the flow. `n` is
/// the complex dimension of the ambient space.
pub fn drift_monitor(trace: &FlowTrace, kappa0: f64, n: usize, tol: f64) -> DriftCheck {
    let Some(first) = trace.samples.first() else {
        return DriftCheck { lambda_ok: true, noncollapse_ok: None, scale_ok: None, final_mu: 0.0, lambda_ratio: 0.0 };
    };
    let nf = n as f64;
    let mut lambda_ok = true;
    let mut ratio: f64 = 0.0;
    let mut nc_ok: Option<bool> = None;
    let mut scale_ok: Option<bool> = None;
    for s in &trace.samples {
        if let (Some(l0), Some(l)) = (first.lambda1, s.lambda1) {
            let dev = (l / l0).ln().abs();
            if dev > 3.0 * s.mu + tol {
                lambda_ok = false;
            }
            if s.mu > 0.0 {
                ratio = ratio.max(dev / (3.0 * s.mu));
            }
        }
        if let Some(k) = s.noncollapse {
            let ok = k >= kappa0 * (-(nf + 1.0) * s.mu).exp() - tol;
            nc_ok = Some(nc_ok.unwrap_or(true) && ok);
        }
        if let (Some(a0), Some(b0), Some(a), Some(b)) = (first.l0_min, first.l0_max, s.l0_min, s.l0_max) {
            let bound = (nf + 1.0) * s.int_sup_h + tol;
            let ok = (a.powf(nf + 1.0) - a0.powf(nf + 1.0)).abs() <= bound
                && (b.powf(nf + 1.0) - b0.powf(nf + 1.0)).abs() <= bound;
            scale_ok = Some(scale_ok.unwrap_or(true) && ok);
        }
    }
    let final_mu = trace.samples.last().map(|s| s.mu).unwrap_or(0.0);
    DriftCheck { lambda_ok, noncollapse_ok: nc_ok, scale_ok, final_mu, lambda_ratio: ratio }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingCheck {
    /// sup over samples of t·sup|∇A|²
    pub c1: f64,
    /// sup over samples of t²·sup|∇²A|²
    pub c2: f64,
    pub initial_grad_a2: f64,
    /// (t, t·sup|∇A|²) per sample.
    pub profile: Vec<(f64, f64)>,
}

/// Requires a trace sampled with derivative norms; samples past `t_max`
/// are ignored.
pub fn smoothing_monitor(trace: &FlowTrace, t_max: f64) -> Option<SmoothingCheck> {
    let first = trace.samples.first()?;
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    let mut profile = Vec::new();
    for s in trace.samples.iter().filter(|s| s.t <= t_max) {
        let g1 = s.grad_a2?;
        let g2 = s.grad2_a2?;
        c1 = c1.max(s.t * g1);
        c2 = c2.max(s.t * s.t * g2);
        profile.push((s.t, s.t * g1));
    }
    Some(SmoothingCheck { c1, c2, initial_grad_a2: first.grad_a2?, profile })
}
