use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use qsu2::algebra::{GeneratorTable, Letter, NCPolynomial, NormalWord};
use qsu2::peterweyl::{HilbertVector, PWIndex, Truncation};
use qsu2::qarith::DeformationParameter;
use qsu2::spectral::{self, GrowthSeries};
use qsu2::summation::{CompensatedSum, LogSum};
use qsu2::HalfInteger;

fn table() -> &'static GeneratorTable {
    static T: OnceLock<GeneratorTable> = OnceLock::new();
    T.get_or_init(|| {
        GeneratorTable::new(DeformationParameter::new(1.2).unwrap(), Truncation::from_doubled(16).unwrap())
            .unwrap()
    })
}

fn low_words() -> &'static [NormalWord] {
    static W: OnceLock<Vec<NormalWord>> = OnceLock::new();
    W.get_or_init(|| NormalWord::all_up_to(2))
}

fn polynomial() -> impl Strategy<Value = NCPolynomial> {
    prop::collection::vec((any::<prop::sample::Index>(), -1.0..1.0f64, -1.0..1.0f64), 1..4).prop_map(|terms| {
        let words = low_words();
        let mut p = NCPolynomial::zero();
        for (k, re, im) in terms {
            p.add_term(words[k.index(words.len())], Complex64::new(re, im));
        }
        p
    })
}

fn vector(trunc: Truncation) -> impl Strategy<Value = HilbertVector> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), trunc.dim()).prop_map(move |c| {
        HilbertVector::from_coeffs(trunc, c.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap()
    })
}

fn letter() -> impl Strategy<Value = Letter> {
    prop::sample::select(Letter::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn position_roundtrip(lmax2 in 0i64..14, frac in 0.0..1.0f64) {
        let t = Truncation::from_doubled(lmax2).unwrap();
        let pos = ((t.dim() as f64) * frac) as usize % t.dim();
        let idx = t.index_at(pos);
        prop_assert!(idx.is_valid());
        prop_assert_eq!(t.position(idx), Some(pos));
        prop_assert!(PWIndex::new(idx.n, idx.i, idx.j).is_some());
    }

    #[test]
    fn adjoint_is_the_hermitian_transpose(l in letter(), x in vector(table().truncation()), y in vector(table().truncation())) {
        let a = table().letter_operator(l);
        let lhs = a.apply(&x).inner(&y);
        let rhs = x.inner(&a.adjoint().apply(&y));
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn compose_matches_sequential_application(l1 in letter(), l2 in letter(), x in vector(table().truncation())) {
        let (a, b) = (table().letter_operator(l1), table().letter_operator(l2));
        let lhs = a.compose(b).apply(&x);
        let mut diff = b.apply(&x);
        diff = a.apply(&diff);
        diff.axpy(Complex64::new(-1.0, 0.0), &lhs);
        prop_assert!(diff.norm() < 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn normal_ordering_is_associative(p in polynomial(), r in polynomial(), s in polynomial()) {
        let q = table().q();
        let left = p.mul(&r, q).mul(&s, q);
        let right = p.mul(&r.mul(&s, q), q);
        prop_assert!(left.max_abs_diff(&right) < 1e-10);
    }

    #[test]
    fn adjoint_reverses_products(p in polynomial(), r in polynomial()) {
        let q = table().q();
        let lhs = p.mul(&r, q).adjoint(q);
        let rhs = r.adjoint(q).mul(&p.adjoint(q), q);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        prop_assert!(p.adjoint(q).adjoint(q).max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn left_regular_action_is_multiplicative(p in polynomial(), r in polynomial()) {
        let t = table();
        let one = HilbertVector::basis(t.truncation(), PWIndex::from_doubled(0, 0, 0).unwrap()).unwrap();
        let lhs = t.apply_polynomial(&p.mul(&r, t.q()), &one);
        let mut diff = t.apply_polynomial(&p, &t.apply_polynomial(&r, &one));
        diff.axpy(Complex64::new(-1.0, 0.0), &lhs);
        prop_assert!(diff.norm() < 1e-10);
    }

    #[test]
    fn haar_state_is_positive(p in polynomial()) {
        let t = table();
        let v = t.haar_state(&p.adjoint(t.q()).mul(&p, t.q())).unwrap();
        prop_assert!(v.re > -1e-12);
        prop_assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn modular_property_on_polynomials(p in polynomial(), r in polynomial()) {
        let d = spectral::modular_check(&p, &r, table()).unwrap();
        prop_assert!(d < 1e-8, "defect {}", d);
    }

    #[test]
    fn heat_ratio_reproduces_haar_state(p in polynomial(), t in 0.5..3.0f64) {
        let table = table();
        let psi = table.haar_state(&p).unwrap();
        let r = spectral::haar_via_heat(&p, t, table).unwrap();
        prop_assert!((r.ratio() - psi).norm() < 1e-6 + r.tail_bound * 10.0);
    }

    #[test]
    fn heat_trace_forms_agree(t in 0.3..6.0f64, lmax2 in 16i64..40, q in 1.05..2.5f64) {
        let q = DeformationParameter::new(q).unwrap();
        let r = spectral::heat_trace(t, &q, &Truncation::from_doubled(lmax2).unwrap()).unwrap();
        let roundoff = 1e-13 * r.closed_sum;
        prop_assert!(r.operator_trace > 0.0 && r.operator_trace <= r.closed_sum + roundoff);
        prop_assert!(r.closed_sum - r.operator_trace <= r.tail_bound + roundoff);
    }

    #[test]
    fn growth_fit_recovers_lines(slope in -5.0..5.0f64, intercept in -10.0..10.0f64, n in 3usize..20) {
        let xs: Vec<f64> = (0..n).map(|k| 1.0 + k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + intercept).collect();
        let g = GrowthSeries::fit(xs, ys).unwrap();
        prop_assert!((g.slope - slope).abs() < 1e-9);
        prop_assert!((g.intercept - intercept).abs() < 1e-8);
        prop_assert!(g.residual < 1e-8);
    }

    #[test]
    fn log_sum_matches_direct_sum(logs in prop::collection::vec(-30.0..30.0f64, 1..40)) {
        let mut s = LogSum::new();
        logs.iter().for_each(|&x| s.add_log(x));
        let direct: CompensatedSum = logs.iter().map(|x| x.exp()).collect();
        prop_assert!((s.value() - direct.value()).abs() <= 1e-13 * direct.value());
        prop_assert!((s.ln() - direct.value().ln()).abs() < 1e-13);
    }

    #[test]
    fn log_sum_survives_extreme_exponents(base in 700.0..2000.0f64, n in 1usize..10) {
        let mut s = LogSum::new();
        (0..n).for_each(|_| s.add_log(base));
        prop_assert!((s.ln() - base - (n as f64).ln()).abs() < 1e-12 * base);
    }
}

#[test]
fn fixtures() {
    assert!(low_words().iter().all(|w| w.degree() <= 2));
    assert_eq!(table().truncation().lmax(), HalfInteger::from_int(8));
}
