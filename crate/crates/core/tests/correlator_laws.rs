use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tautgw::rational::{int, rat};
use tautgw::trees::{kappa_boundary_presentation, psi_boundary_presentation};
use tautgw::verify::{insertions, random_admissible_keys, relation_checks};
use tautgw::{CorrelatorEngine, CorrelatorKey, Degree, MultiIndex, TargetModel};

fn engine(r: usize) -> CorrelatorEngine {
    CorrelatorEngine::new(Arc::new(TargetModel::projective_space(r)))
}

fn key(tau: &[(i32, usize, u32)], kappa: &[(i32, usize, u32)], d: u32) -> CorrelatorKey {
    CorrelatorKey::from_lists(tau, kappa, d).unwrap()
}

#[test]
fn known_values() {
    let e = engine(1);
    assert_eq!(e.evaluate(&key(&[(0, 1, 1)], &[], 1)).unwrap(), int(1));
    assert_eq!(e.evaluate(&key(&[], &[(0, 1, 2)], 2)).unwrap(), rat(1, 2));
    assert_eq!(e.evaluate(&key(&[], &[(0, 1, 4)], 3)).unwrap(), int(4));
    assert_eq!(e.evaluate(&key(&[(0, 0, 3)], &[(0, 0, 1)], 0)).unwrap(), int(0));
    // ψ on M_0,4 has degree one.
    assert_eq!(e.evaluate(&key(&[(1, 0, 1), (0, 1, 1), (0, 0, 2)], &[], 0)).unwrap(), int(1));
    let e = engine(2);
    assert_eq!(e.evaluate(&key(&[(0, 2, 5)], &[], 2)).unwrap(), int(1));
    assert_eq!(e.evaluate(&key(&[(0, 2, 8)], &[], 3)).unwrap(), int(12));
}

#[test]
fn kappa_zero_zero_on_three_points_of_p1() {
    let e = engine(1);
    let pres = kappa_boundary_presentation(e.target(), 3, Degree(1), 0, 0).unwrap();
    let ins = insertions(&[(1, 0, 1), (2, 0, 1), (3, 0, 1)]);
    let v = e.integrate_tree_sum(&pres, &ins, &MultiIndex::kappa()).unwrap();
    assert_eq!(v, int(1));
    assert_eq!(v, e.evaluate(&key(&[(0, 1, 3)], &[(0, 0, 1)], 1)).unwrap());
}

fn tau_of(ins: &[(u32, i32, usize)]) -> MultiIndex {
    let mut m = MultiIndex::tau();
    for &(_, a, al) in ins {
        m.add(a, al, 1);
    }
    m
}

// Classes at tails 1..n, chosen so that a given ψ or κ insertion makes the
// integrand top-degree.
fn fill(r: usize, n: u32, d: u32, extra: i64) -> Option<Vec<(u32, i32, usize)>> {
    let dim = r as i64 + n as i64 - 3 + d as i64 * (r as i64 + 1);
    let mut need = dim - extra;
    let mut out = Vec::new();
    for l in 1..=n {
        let c = need.clamp(0, r as i64);
        need -= c;
        out.push((l, 0, c as usize));
    }
    (need == 0).then_some(out)
}

#[test]
fn psi_presentation_integrates_to_the_correlator() {
    for r in 1..=2 {
        let e = engine(r);
        for n in 3..=5u32 {
            for d in 0..=2u32 {
                for a in 1..=2u32 {
                    let Some(ins) = fill(r, n, d, a as i64) else { continue };
                    let pres = psi_boundary_presentation(n, Degree(d), a).unwrap();
                    let via = e.integrate_tree_sum(&pres, &insertions(&ins), &MultiIndex::kappa()).unwrap();
                    let mut m = tau_of(&ins);
                    m.remove(0, ins[0].2).unwrap();
                    m.add(a as i32, ins[0].2, 1);
                    let k = CorrelatorKey::new(m, MultiIndex::kappa(), d).unwrap();
                    assert_eq!(via, e.evaluate(&k).unwrap(), "P^{r} ψ_1^{a} n={n} d={d}");
                }
            }
        }
    }
}

#[test]
fn kappa_presentation_integrates_to_the_correlator() {
    let mut checked = 0;
    for r in 1..=2 {
        let e = engine(r);
        for n in 2..=4u32 {
            for d in 0..=2u32 {
                if d == 0 && n < 3 {
                    continue;
                }
                for a in 0..=2i32 {
                    for al in 0..=r {
                        let Some(ins) = fill(r, n, d, a as i64 + al as i64) else { continue };
                        let pres = kappa_boundary_presentation(e.target(), n, Degree(d), a, al).unwrap();
                        let via = e.integrate_tree_sum(&pres, &insertions(&ins), &MultiIndex::kappa()).unwrap();
                        let k = CorrelatorKey::new(tau_of(&ins), MultiIndex::kappa().with(a, al), d).unwrap();
                        assert_eq!(via, e.evaluate(&k).unwrap(), "P^{r} κ_{a},{al} n={n} d={d}");
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relations_hold_on_random_keys(seed in any::<u64>(), r in 1usize..3) {
        let e = engine(r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in random_admissible_keys(&e, &mut rng, 6, 2) {
            for (label, l, rhs) in relation_checks(&e, &k).unwrap() {
                prop_assert_eq!(&l, &rhs, "{} {}", k, label);
            }
            prop_assert_eq!(e.evaluate(&k).unwrap(), e.evaluate_alt(&k).unwrap(), "{}", k);
        }
    }
}

#[test]
fn off_selection_is_zero_and_cheap() {
    let e = engine(2);
    let k = key(&[(0, 2, 3), (1, 1, 1)], &[(0, 1, 1)], 1);
    assert!(!e.selection(&k));
    let before = e.reductions();
    assert_eq!(e.evaluate(&k).unwrap(), int(0));
    assert!(e.reductions() - before <= 1);
}
