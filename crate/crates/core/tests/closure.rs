mod common;

use proptest::prelude::*;
use qcausal::ci::{all_triples, closure, compare_closures, implies, ClosureOrder};
use qcausal::distribution::OutcomeSpace;
use qcausal::{CiRelation, CiSet, JointDistribution, VarSet};

fn arb_set(n: usize) -> impl Strategy<Value = CiSet> {
    let universe = all_triples(VarSet::full(n));
    let k = universe.len();
    proptest::collection::vec(0..k, 0..6)
        .prop_map(move |picks| CiSet::from_relations(n, picks.into_iter().map(|i| universe[i])))
}

fn arb_sets() -> impl Strategy<Value = (CiSet, CiSet)> {
    (2usize..=5).prop_flat_map(|n| (arb_set(n), arb_set(n)))
}

/// Apply each axiom once to every pair of members.
fn one_step(s: &CiSet) -> Vec<CiRelation> {
    let mut out = Vec::new();
    for r in s {
        for (x, y) in [(r.x(), r.y()), (r.y(), r.x())] {
            for part in y.nonempty_subsets() {
                if part == y {
                    continue;
                }
                out.push(CiRelation::new(x, part, r.z()).unwrap());
                out.push(CiRelation::new(x, y.difference(part), r.z().union(part)).unwrap());
            }
            for q in s {
                for (qx, qy) in [(q.x(), q.y()), (q.y(), q.x())] {
                    // (x _||_ y | z w) and (x _||_ w | z) give (x _||_ y w | z)
                    if qx == x && qy.is_subset(r.z()) && q.z() == r.z().difference(qy) {
                        out.push(CiRelation::new(x, y.union(qy), q.z()).unwrap());
                    }
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(common::config(128))]

    #[test]
    fn closure_is_idempotent_and_extensive((s, _) in arb_sets()) {
        let c = closure(&s).unwrap();
        prop_assert!(s.is_subset(&c));
        prop_assert_eq!(closure(&c).unwrap(), c);
    }

    #[test]
    fn closure_is_monotone((s, t) in arb_sets()) {
        let union = CiSet::from_relations(s.n(), s.iter().chain(t.iter()).copied());
        let cu = closure(&union).unwrap();
        prop_assert!(closure(&s).unwrap().is_subset(&cu));
        prop_assert!(closure(&t).unwrap().is_subset(&cu));
    }

    #[test]
    fn closure_is_closed_under_every_axiom((s, _) in arb_sets()) {
        let c = closure(&s).unwrap();
        for r in one_step(&c) {
            prop_assert!(c.contains(&r), "{:?}", r);
        }
    }

    #[test]
    fn symmetry((s, _) in arb_sets()) {
        let c = closure(&s).unwrap();
        for r in &c {
            let swapped = CiRelation::new(r.y(), r.x(), r.z()).unwrap();
            prop_assert!(c.contains(&swapped));
            prop_assert!(implies(&s, &swapped).unwrap());
        }
    }

    #[test]
    fn comparison_is_consistent((s, t) in arb_sets()) {
        let (cs, ct) = (closure(&s).unwrap(), closure(&t).unwrap());
        let expected = match (ct.is_subset(&cs), cs.is_subset(&ct)) {
            (true, true) => ClosureOrder::Equal,
            (true, false) => ClosureOrder::AProper,
            (false, true) => ClosureOrder::BProper,
            (false, false) => ClosureOrder::Incomparable,
        };
        prop_assert_eq!(compare_closures(&s, &t).unwrap(), expected);
    }
}

#[test]
fn xor_shows_composition_is_not_derivable() {
    // X=0, W=1, Y=2 with Y = X xor W
    let space = OutcomeSpace::new(vec!["X".into(), "W".into(), "Y".into()], vec![2, 2, 2]).unwrap();
    let p = JointDistribution::from_fn(space, |v| if v[2] == v[0] ^ v[1] { 0.25 } else { 0.0 }).unwrap();
    let (x, w, y) = (VarSet::of(&[0]), VarSet::of(&[1]), VarSet::of(&[2]));
    assert!(p.is_ci(x, y, VarSet::EMPTY, 1e-12).unwrap());
    assert!(p.is_ci(w, y, VarSet::EMPTY, 1e-12).unwrap());
    assert!(!p.is_ci(x.union(w), y, VarSet::EMPTY, 1e-12).unwrap());
    let s = CiSet::from_relations(
        3,
        [
            CiRelation::new(x, y, VarSet::EMPTY).unwrap(),
            CiRelation::new(w, y, VarSet::EMPTY).unwrap(),
        ],
    );
    assert!(!implies(&s, &CiRelation::new(x.union(w), y, VarSet::EMPTY).unwrap()).unwrap());
    assert!(closure(&s).unwrap().is_subset(&p.all_ci(1e-12).unwrap()));
}
