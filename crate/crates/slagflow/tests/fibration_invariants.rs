use proptest::prelude::*;
use slagflow::fibration::{
    classify_fiber, euler_from_incidence, fixture, kodaira_table, model_fibration, monodromy, parabolic_class,
    quad_form_analysis, KodairaType, Mat2, ModelFibrationOptions,
};

/// Words in S and T give every element of SL(2,Z).
fn sl2z() -> impl Strategy<Value = Mat2> {
    let s = Mat2::new(0, -1, 1, 0);
    prop::collection::vec((0..2u8, -2i64..=2), 0..6).prop_map(move |w| {
        w.into_iter().fold(Mat2::IDENTITY, |m, (g, k)| m * if g == 0 { s } else { Mat2::parabolic(k) })
    })
}

fn kodaira() -> impl Strategy<Value = KodairaType> {
    prop::sample::select(kodaira_table(9, 4))
}

proptest! {
    #[test]
    fn words_are_unimodular_with_inverses(a in sl2z(), b in sl2z()) {
        prop_assert_eq!(a.det(), 1);
        prop_assert_eq!((a * b).det(), a.det() * b.det());
        let ai = a.inverse().unwrap();
        prop_assert_eq!(a * ai, Mat2::IDENTITY);
        prop_assert_eq!(ai * a, Mat2::IDENTITY);
        prop_assert_eq!((a * b).inverse().unwrap(), b.inverse().unwrap() * ai);
    }

    #[test]
    fn conjugation_keeps_trace_and_parabolic_class(g in sl2z(), n in -12i64..=12) {
        let m = Mat2::parabolic(n).conjugate_by(&g);
        prop_assert_eq!(m.trace(), 2);
        let (k, h) = parabolic_class(&m).unwrap();
        prop_assert_eq!(k, n);
        prop_assert_eq!(Mat2::parabolic(k).conjugate_by(&h), m);
    }

    #[test]
    fn classification_ignores_component_order(t in kodaira(), seed in any::<u64>()) {
        let g = fixture(t);
        let mut perm: Vec<usize> = (0..g.len()).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let p = g.permuted(&perm);
        prop_assert_eq!(classify_fiber(&p).unwrap(), t);
        prop_assert_eq!(euler_from_incidence(&p), t.euler());
        let (a, b) = (quad_form_analysis(&g).unwrap(), quad_form_analysis(&p).unwrap());
        prop_assert_eq!(a.psd, b.psd);
        prop_assert_eq!(a.annihilator_rank, b.annihilator_rank);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn monodromy_is_basis_covariant(u in sl2z(), d in 1i64..=4) {
        let opts = ModelFibrationOptions { steps: 32, resolution: [24, 8], ..ModelFibrationOptions::default() };
        let fam = model_fibration(d, &opts).unwrap();
        let m = monodromy(&fam).unwrap().monodromy.matrix();
        prop_assert_eq!(m, Mat2::parabolic(d));
        let changed = monodromy(&fam.with_basis_change(u)).unwrap().monodromy.matrix();
        prop_assert_eq!(changed, u.inverse().unwrap() * m * u);
    }
}
