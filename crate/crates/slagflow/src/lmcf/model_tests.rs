use super::*;
use crate::ambient::{FlatField, FlatTorusCY};
use crate::lagmesh::{build_graph, GraphMode};
use std::f64::consts::{FRAC_PI_2, TAU};

fn graph(res: [usize; 2], modes: &[GraphMode]) -> (FlatField, ImmersedLagrangian) {
    let base = FlatTorusCY::square(2, TAU, 1.0).unwrap();
    let lag = build_graph(&base, modes, res).unwrap();
    (FlatField::new(base), lag)
}

fn sine(amplitude: f64, k: i64) -> GraphMode {
    // u = amplitude·sin(k s₁)
    GraphMode { k: [k, 0], amplitude, phase: -FRAC_PI_2 }
}

#[test]
fn flat_subtorus_is_stationary() {
    let (f, lag) = graph([8, 8], &[]);
    let (next, dt) = lmcf_step(&f, &lag, 0.01).unwrap();
    assert_eq!(dt, 0.01);
    let moved = lag.positions.iter().zip(&next.positions).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    assert!(moved < 1e-10);
}

#[test]
fn model_special_lagrangian_barely_moves() {
    use crate::ambient::{CalabiField, CalabiModelSpec};
    use crate::lagmesh::{build_model_slag, SlagModelSpec};
    let spec = CalabiModelSpec::square(2, TAU).unwrap();
    let lag = build_model_slag(&spec, &SlagModelSpec::new((-16f64).exp(), [1, 0], [16, 4])).unwrap();
    let f = CalabiField::new(spec);
    let (next, dt) = lmcf_step(&f, &lag, 0.01).unwrap();
    let moved = lag.positions.iter().zip(&next.positions).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    assert!(moved / dt < 1e-8, "{moved:e}");
}

#[test]
fn graph_flow_decays_at_twice_the_first_eigenvalue() {
    let (f, lag) = graph([24, 24], &[sine(0.05, 1)]);
    let cfg = LmcfConfig { max_time: 1.5, monitor_stride: 25, ..Default::default() };
    let out = run_flow(&f, &lag, &cfg).unwrap();
    let fit = out.trace.fitted_decay.as_ref().unwrap();
    let l1 = out.trace.samples[0].lambda1.unwrap();
    assert!((l1 - 1.0).abs() < 0.02, "{l1}");
    assert!((fit.rate - 2.0 * l1).abs() < 0.1 * 2.0 * l1, "{fit:?}");
    let d = decay_monitor(&out.trace, 0.2, 0.0, Some(0.5));
    assert!(d.pass, "{d:?}");
    assert_eq!(d.window_claim, Some(true));
    for w in out.trace.samples.windows(2) {
        assert!(w[1].volume <= w[0].volume + 1e-8);
        let drop = w[0].volume - w[1].volume;
        let predicted = 0.5 * (w[0].int_h2 + w[1].int_h2) * (w[1].t - w[0].t);
        assert!((drop - predicted).abs() < 0.2 * predicted, "{drop} {predicted}");
    }
    let drift = drift_monitor(&out.trace, 0.0, 2, 1e-9);
    assert!(drift.lambda_ok);
    assert!(out.trace.samples.windows(2).all(|w| w[1].t > w[0].t));
}

#[test]
fn rough_data_is_smoothed() {
    let (f, lag) = graph([48, 4], &[sine(0.05, 1), sine(0.002, 8)]);
    let cfg = LmcfConfig { max_time: 0.2, monitor_stride: 4, eigen: false, smoothing: true, ..Default::default() };
    let out = run_flow(&f, &lag, &cfg).unwrap();
    let s = smoothing_monitor(&out.trace, 0.2).unwrap();
    let last = s.profile.last().unwrap().1;
    eprintln!("{s:?}");
    assert!(s.c1 < 0.1 * s.initial_grad_a2);
    assert!(last < s.c1);
}

#[test]
fn blowup_and_bad_configuration_are_reported() {
    let (f, lag) = graph([8, 8], &[sine(0.05, 1)]);
    let cfg = LmcfConfig { blowup_factor: 0.5, eigen: false, ..Default::default() };
    assert!(matches!(run_flow(&f, &lag, &cfg), Err(LmcfError::Singularity { .. })));
    let cfg = LmcfConfig { dt_policy: DtPolicy::Fixed(-1.0), ..Default::default() };
    assert!(matches!(run_flow(&f, &lag, &cfg), Err(LmcfError::Config(_))));
    let cfg = LmcfConfig { stop_h2: 0.0, ..Default::default() };
    assert!(matches!(cfg.validate(), Err(LmcfError::Config(_))));
}

#[test]
fn crushing_velocity_is_rejected_until_stiffness() {
    let (f, lag) = graph([8, 8], &[]);
    // neighbouring columns pushed toward each other
    let h: Vec<Point> = (0..lag.len())
        .map(|v| {
            let mut e = Point::zeros(4);
            e[0] = if lag.coords(v).0 % 2 == 0 { 1.0 } else { -1.0 };
            e
        })
        .collect();
    assert!(matches!(advance(&f, &lag, &h, 1e6, 0.0), Err(LmcfError::Stiffness { .. })));
    let (_, dt, rejections) = advance(&f, &lag, &h, 0.5, 0.0).unwrap();
    assert!(rejections > 0 && dt < 0.5);
}

#[test]
fn separated_meshes_have_positive_distance() {
    let (_, a) = graph([8, 8], &[]);
    let mut b = a.clone();
    for p in &mut b.positions {
        p[1] += 0.3;
    }
    assert!((mesh_separation(&a, &b) - 0.3).abs() < 1e-12);
    assert_eq!(mesh_separation(&a, &a), 0.0);
}

mod pipeline {
    use super::*;
    use crate::ambient::{CalabiField, CalabiModelSpec, ProfileId, SyntheticTYPerturbation};
    use crate::lagmesh::{build_model_slag, SlagModelSpec};
    use crate::moser::{transport, SymplecticPair, TransportOptions};

    /// Transported M_ε at scale K on an [m, 4] grid. The decay rate is
    /// δ₀(2/K)⁴ so that the perturbation seen by the torus does not depend
    /// on K.
    pub(super) fn transported(k: f64, m: usize) -> (SymplecticPair, ImmersedLagrangian) {
        let spec = CalabiModelSpec::square(2, TAU).unwrap();
        let lag = build_model_slag(&spec, &SlagModelSpec::new((-k.powi(4)).exp(), [1, 0], [m, 4])).unwrap();
        let pert = SyntheticTYPerturbation::new(0.05, 0.05 * (2.0 / k).powi(4), ProfileId::Twist, 11);
        let pair = SymplecticPair::synthetic(CalabiField::new(spec), pert).unwrap();
        let tr = transport(&pair, &lag, &TransportOptions { steps: 40, snapshots: 1, error_estimate: false }).unwrap();
        (pair, tr.lag)
    }

    fn flow(k: f64, m: usize, cfg: &LmcfConfig) -> FlowOutcome {
        let (pair, lag) = transported(k, m);
        run_flow(pair.target.as_ref(), &lag, cfg).unwrap()
    }

    #[test]
    fn synthetic_pipeline_converges_to_a_special_lagrangian() {
        let cfg = LmcfConfig { max_time: 40.0, monitor_stride: 10, ..Default::default() };
        let out = flow(2.0, 16, &cfg);
        assert!(out.verdict.converged);
        assert!(out.verdict.final_report.special_residual < 1e-4);
        assert!(out.verdict.limit_distance < 0.05, "{}", out.verdict.limit_distance);
        let fit = out.trace.fitted_decay.as_ref().unwrap();
        let l1 = out.trace.samples[0].lambda1.unwrap();
        assert!((fit.rate - 2.0 * l1).abs() < 0.1 * 2.0 * l1, "{fit:?}");
        let drift = drift_monitor(&out.trace, 0.0, 2, 1e-9);
        assert!(drift.lambda_ok && drift.scale_ok == Some(true));
        assert!(drift.final_mu < 2f64.ln() / 9.0, "{}", drift.final_mu);
        let d = decay_monitor(&out.trace, 0.2, 1e-14, None);
        assert!(d.pass, "{d:?}");
    }

    #[test]
    fn limits_refine_like_a_cauchy_sequence() {
        let cfg = LmcfConfig { max_time: 20.0, monitor_stride: 200, eigen: false, ..Default::default() };
        let lims: Vec<ImmersedLagrangian> = [8, 16, 32].iter().map(|&m| flow(2.0, m, &cfg).lag).collect();
        let dist = |a: &ImmersedLagrangian, b: &ImmersedLagrangian| {
            (0..a.len())
                .map(|v| {
                    let (i, j) = a.coords(v);
                    (&a.positions[v] - &b.positions[b.index(2 * i, j)]).amax()
                })
                .fold(0.0, f64::max)
        };
        let d1 = dist(&lims[0], &lims[1]);
        let d2 = dist(&lims[1], &lims[2]);
        assert!(d2 <= d1, "{d1:e} {d2:e}");
    }

    #[test]
    fn distinct_depths_flow_to_disjoint_limits() {
        let cfg = LmcfConfig { max_time: 20.0, monitor_stride: 200, eigen: false, ..Default::default() };
        let a = flow(2.0, 16, &cfg);
        let b = flow(2.2, 16, &cfg);
        let sep = mesh_separation(&a.lag, &b.lag);
        assert!(sep > 4.0 * a.verdict.limit_distance.max(b.verdict.limit_distance), "{sep}");
    }

    #[test]
    fn smoothing_bound_scales_like_inverse_square_of_k() {
        let cfg =
            LmcfConfig { max_time: 10.0, monitor_stride: 10, smoothing: true, eigen: false, ..Default::default() };
        let c = |k: f64| smoothing_monitor(&flow(k, 16, &cfg).trace, f64::INFINITY).unwrap().c1;
        let ratio = c(2.0) / c(4.0);
        assert!((1.0..=16.0).contains(&ratio), "{ratio}");
    }
}
