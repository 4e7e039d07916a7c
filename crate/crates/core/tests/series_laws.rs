use num_bigint::BigInt;
use proptest::prelude::*;
use tautgw::series::SeriesJson;
use tautgw::{QSeries, Rational, Truncation, VarRegistry, Variable};

fn reg() -> VarRegistry {
    VarRegistry::new(vec![Variable::x(0, 0), Variable::x(1, 2), Variable::q(2)]).unwrap()
}

fn trunc() -> Truncation {
    Truncation::new(vec![3, 3, 2], Some(4))
}

fn series(constant: bool) -> impl Strategy<Value = QSeries> {
    let term = ((0u32..=3, 0u32..=3, 0u32..=2), -6i64..=6, 1i64..=4);
    prop::collection::vec(term, 0..8).prop_map(move |ts| {
        QSeries::from_terms(
            &reg(),
            &trunc(),
            ts.into_iter()
                .filter(|((a, b, c), _, _)| constant || a + b + c > 0)
                .map(|((a, b, c), n, d)| (vec![a, b, c], Rational::new(BigInt::from(n), BigInt::from(d)))),
        )
    })
}

proptest! {
    #[test]
    fn ring_axioms(a in series(true), b in series(true), c in series(true)) {
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
        prop_assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
        prop_assert_eq!(
            a.mul(&b.add(&c).unwrap()).unwrap(),
            a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap()
        );
        prop_assert!(a.sub(&a).unwrap().is_zero());
        prop_assert_eq!(a.mul(&QSeries::one(&reg(), &trunc())).unwrap(), a.clone());
    }

    #[test]
    fn leibniz(a in series(true), b in series(true), var in 0usize..2) {
        let lhs = a.mul(&b).unwrap().partial_derivative(var).unwrap();
        let low = lhs.truncation().clone();
        let da = a.partial_derivative(var).unwrap();
        let db = b.partial_derivative(var).unwrap();
        let ar = a.retruncate(&low).unwrap();
        let br = b.retruncate(&low).unwrap();
        let rhs = da.mul(&br).unwrap().add(&ar.mul(&db).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn q_log_derivative_is_a_derivation(a in series(true), b in series(true)) {
        let lhs = a.mul(&b).unwrap().q_log_derivative().unwrap();
        let rhs = a.q_log_derivative().unwrap().mul(&b).unwrap()
            .add(&a.mul(&b.q_log_derivative().unwrap()).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn exp_is_a_homomorphism(a in series(false), b in series(false)) {
        let lhs = a.add(&b).unwrap().exp().unwrap();
        let rhs = a.exp().unwrap().mul(&b.exp().unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn json_round_trip(a in series(true)) {
        let text = serde_json::to_string(&a.to_json()).unwrap();
        let back: SeriesJson = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(QSeries::from_json(&back).unwrap(), a);
    }
}

#[test]
fn exp_of_q_through_the_cap() {
    let q = QSeries::var(&reg(), &trunc(), 2);
    let e = q.exp().unwrap();
    assert_eq!(e.coefficient(&[0, 0, 2]).unwrap(), Rational::new(1.into(), 2.into()));
    assert_eq!(e.len(), 3);
}
