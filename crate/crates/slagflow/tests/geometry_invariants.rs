use num_complex::Complex64;
use proptest::prelude::*;
use slagflow::ambient::{monge_ampere_residual, CalabiField, CalabiModelSpec, MetricField};
use slagflow::lagmesh::{build_model_slag, measure, MeasureOptions, SlagModelSpec};
use slagflow::moser::{transport, SymplecticPair, TransportOptions};
use std::f64::consts::TAU;

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn calabi_metric_is_ricci_flat_everywhere(
        n in 2usize..=3,
        re in -3.0f64..3.0,
        im in -3.0f64..3.0,
        theta in 0.0f64..TAU,
        l0 in 1.0f64..6.0,
    ) {
        let f = CalabiField::new(CalabiModelSpec::square(n, TAU).unwrap());
        let p = f.spec.point(&vec![Complex64::new(re, im); n - 1], theta, l0.powi(2 * n as i32));
        prop_assert!(monge_ampere_residual(&f.frame(&p).unwrap(), n) < 1e-10);
        prop_assert!((f.scale_gradient_sq(&p).unwrap() - ((n + 1) * (n + 1)) as f64 / (4 * n) as f64).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    /// Warped meshes carry an O(h²) mean curvature; the volume and the
    /// Lagrangian trace do not see the warp.
    #[test]
    fn model_volume_is_level_independent_and_minimal(level in 9.0f64..49.0, warp in -0.3f64..0.3) {
        let spec = CalabiModelSpec::square(2, TAU).unwrap();
        let f = CalabiField::new(spec.clone());
        let lag = build_model_slag(&spec, &SlagModelSpec::new((-level).exp(), [1, 0], [32, 32]).with_warp(warp)).unwrap();
        let r = measure(&f, &lag, &MeasureOptions::quick()).unwrap();
        prop_assert!((r.volume - TAU * TAU / 2f64.sqrt()).abs() < 0.01 * r.volume);
        prop_assert!(r.sup_h2 < 1e-3);
        prop_assert!(r.trace_residual < 1e-10);
    }

    #[test]
    fn identity_pair_transports_exactly(level in 9.0f64..49.0, steps in 1usize..20) {
        let spec = CalabiModelSpec::square(2, TAU).unwrap();
        let lag = build_model_slag(&spec, &SlagModelSpec::new((-level).exp(), [1, 0], [6, 4])).unwrap();
        let r = transport(&SymplecticPair::identity(CalabiField::new(spec)), &lag, &TransportOptions { steps, snapshots: 1, error_estimate: false }).unwrap();
        prop_assert_eq!(r.lag.positions, lag.positions);
    }
}
