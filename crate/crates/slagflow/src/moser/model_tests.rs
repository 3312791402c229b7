use super::*;
use crate::ambient::{CalabiModelSpec, FlatTorusCY, ProfileId};
use crate::lagmesh::{build_model_slag, ImmersedLagrangian, SlagModelSpec};
use std::f64::consts::TAU;
use std::sync::OnceLock;

fn setup(side: f64, amp: f64, res: usize) -> (SymplecticPair, ImmersedLagrangian) {
    let spec = CalabiModelSpec::new(FlatTorusCY::square(1, side, 1.0).unwrap(), 1.0).unwrap();
    let lag = build_model_slag(&spec, &SlagModelSpec::new((-16f64).exp(), [1, 0], [res, res])).unwrap();
    let pair =
        SymplecticPair::synthetic(CalabiField::new(spec), SyntheticTYPerturbation::new(amp, 0.1, ProfileId::Twist, 11))
            .unwrap();
    (pair, lag)
}

fn run_16() -> &'static (SymplecticPair, ImmersedLagrangian, TransportResult) {
    static RUN: OnceLock<(SymplecticPair, ImmersedLagrangian, TransportResult)> = OnceLock::new();
    RUN.get_or_init(|| {
        let (pair, lag) = setup(TAU, 0.05, 16);
        let r = transport(&pair, &lag, &TransportOptions::default()).unwrap();
        (pair, lag, r)
    })
}

#[test]
fn zero_primitive_transport_is_the_identity() {
    let (_, lag) = setup(TAU, 0.0, 8);
    let pair = SymplecticPair::identity(CalabiField::new(CalabiModelSpec::square(2, TAU).unwrap()));
    let r = transport(&pair, &lag, &TransportOptions { steps: 20, snapshots: 2, error_estimate: true }).unwrap();
    assert_eq!(r.lag.positions, lag.positions);
    assert_eq!(r.budget.total_mu(), 0.0);
    assert_eq!(r.error_estimate, Some(0.0));
    assert_eq!(r.scale_drift_ratio, 0.0);
}

#[test]
fn transported_model_is_lagrangian_for_the_target() {
    let (_, _, r) = run_16();
    assert!(r.initial_residual < 1e-12);
    assert!(r.final_residual < 1e-6, "{:e}", r.final_residual);
    assert!(r.final_residual <= (10.0 * r.initial_residual).max(1e-9));
    assert!(r.trace.iter().all(|row| row.omega_residual < 1e-6));
    assert_eq!(r.trace.len(), 201);
    assert!(r.budget.mu.windows(2).all(|w| w[1].1 >= w[0].1));
}

#[test]
fn scale_drift_stays_within_its_bound() {
    let (_, _, r) = run_16();
    assert!(r.scale_drift_ratio <= 1.0, "{}", r.scale_drift_ratio);
    let k = 2.0;
    assert!(r.trace.iter().all(|row| row.l0_min >= 0.5 * k && row.l0_max <= 2.0 * k));
}

#[test]
fn integrator_converges_at_fourth_order() {
    let (pair, lag) = setup(TAU, 0.5, 6);
    let run =
        |s: usize| transport(&pair, &lag, &TransportOptions { steps: s, snapshots: 1, error_estimate: false }).unwrap();
    let reference = run(64).lag.positions;
    let errs: Vec<f64> = [1, 2, 4, 8]
        .iter()
        .map(|&s| run(s).lag.positions.iter().zip(&reference).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((3.5..4.5).contains(&order), "{errs:?}");
    }
    let est = transport(&pair, &lag, &TransportOptions { steps: 2, snapshots: 1, error_estimate: true })
        .unwrap()
        .error_estimate
        .unwrap();
    assert!(est > 0.5 * errs[1] && est < 1.5 * errs[1], "{est:e} vs {:e}", errs[1]);
}

#[test]
fn variation_sandwiches_hold_along_transport() {
    let (pair, lag) = setup(TAU, 0.05, 12);
    let mut r = transport(&pair, &lag, &TransportOptions { steps: 40, snapshots: 10, error_estimate: false }).unwrap();
    let rows = sandwich_check(&pair, &lag, &mut r, Some(crate::lagmesh::EigenOptions::default())).unwrap();
    assert_eq!(rows.len(), 11);
    for row in &rows {
        assert!(row.pass, "{row:?}");
    }
    let (lo, hi) = r.budget.lambda_sandwich.unwrap();
    let l1 = rows[10].lambda1.unwrap();
    assert!(lo <= l1 && l1 <= hi);
    assert!(r.budget.rate.unwrap() > 0.0);
}

#[test]
fn vertex_outside_the_domain_is_reported() {
    let (pair, mut lag) = setup(TAU, 0.05, 6);
    lag.positions[5][2] = 50.0;
    match transport(&pair, &lag, &TransportOptions { steps: 4, snapshots: 1, error_estimate: false }) {
        Err(MoserError::DomainEscape { vertex, .. }) => assert_eq!(vertex, 5),
        other => panic!("{other:?}"),
    }
}

#[test]
fn transported_model_has_bounded_geometry() {
    // Vol = 2π·a/√2 and λ₁ = (2π/a)²/K² on an a-square base, so C = 10
    // needs a in [1.99, 2.25].
    let (pair, lag) = setup(2.1, 0.0, 16);
    let r = transport(&pair, &lag, &TransportOptions { steps: 10, snapshots: 1, error_estimate: false }).unwrap();
    let (cert, report) = certify_bounded_geometry(pair.target.as_ref(), &r.lag, 10.0, 2.0, 0.01).unwrap();
    assert!(cert.pass(), "{cert:?}");
    let mut bad = report.clone();
    bad.sup_h2 = 2.0 * 10.0 * (-0.01f64 * 16.0).exp();
    let nc = crate::lagmesh::noncollapse_check(pair.target.as_ref(), &r.lag, 0.1, 0.05, 3).unwrap();
    let c2 = Certificate::from_report(&bad, &nc, 2, 10.0, 2.0, 0.01);
    assert_eq!(c2.failing(), vec![2]);
}

#[test]
fn four_is_too_small_a_constant_for_the_model() {
    let (pair, lag) = setup(2.1, 0.0, 16);
    let (cert, _) = certify_bounded_geometry(pair.base.as_ref(), &lag, 4.0, 2.0, 0.01).unwrap();
    assert!(!cert.pass());
    assert!(cert.failing().iter().all(|&i| i == 3 || i == 4), "{:?}", cert.failing());
}
