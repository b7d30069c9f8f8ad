mod common;

use std::collections::BTreeSet;

use plausibility_mc::checker::{ck_at, eval, iterative_ck, Evaluator, Soundness};
use plausibility_mc::formula::{agent_list, parse, AgentId, Atom, Formula};
use plausibility_mc::lewis::{reason_event, ReasonOps};
use plausibility_mc::model::{Model, StateId, TableSelection};
use plausibility_mc::random::{declared_atoms, random_formula, random_model, rng, ModelShape};
use proptest::prelude::*;

fn agents() -> Vec<AgentId> {
    agent_list("R C").unwrap()
}

fn model_for(seed: u64) -> (Model, TableSelection) {
    random_model(&mut rng(seed), &agents(), &ModelShape::default())
}

fn arb_atom() -> impl Strategy<Value = Atom> {
    prop_oneof![Just(Atom::Top), (0u64..400).prop_map(Atom::Height)]
}

fn arb_agent() -> impl Strategy<Value = AgentId> {
    prop_oneof![Just("R"), Just("C"), Just("rho")].prop_map(|a| AgentId::new(a).unwrap())
}

/// Formulas whose nesting, and hence modal depth, is at most 6.
fn arb_formula() -> impl Strategy<Value = Formula> {
    arb_atom().prop_map(Formula::atom).prop_recursive(6, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
            (arb_agent(), inner.clone(), arb_atom()).prop_map(|(a, f, c)| Formula::reason(a, f, c)),
            (arb_agent(), inner).prop_map(|(a, f)| Formula::know(a, f)),
        ]
    })
}

fn set_of(ops: &ReasonOps, xs: &BTreeSet<StateId>) -> fixedbitset::FixedBitSet {
    ops.from_states(&xs.iter().copied().collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_then_parse_is_identity(phi in arb_formula()) {
        prop_assert!(phi.modal_depth() <= 6);
        let text = phi.to_string();
        prop_assert_eq!(parse(&text).unwrap(), phi, "{}", text);
    }

    #[test]
    fn evaluator_matches_naive_oracle(seed in any::<u64>(), fseed in any::<u64>()) {
        let (m, sel) = model_for(seed);
        let atoms = declared_atoms(&m);
        let mut r = rng(fseed);
        let mut ev = Evaluator::new(&m, &sel);
        for _ in 0..8 {
            let phi = random_formula(&mut r, &atoms, &agents(), 4);
            for w in m.state_ids() {
                let got = ev.check(&phi, w).unwrap();
                prop_assert_eq!(got.value, common::holds(&m, &sel, &phi, w), "{} at {}", phi, m.name(w));
                prop_assert_eq!(got.soundness, Soundness::Exact);
            }
        }
    }

    #[test]
    fn knowledge_axioms(seed in any::<u64>(), fseed in any::<u64>()) {
        let (m, sel) = model_for(seed);
        let atoms = declared_atoms(&m);
        let phi = random_formula(&mut rng(fseed), &atoms, &agents(), 2);
        for a in agents() {
            let k = Formula::know(a.clone(), phi.clone());
            let valid = [
                // factivity
                Formula::implies(k.clone(), phi.clone()),
                // positive and negative introspection
                Formula::implies(k.clone(), Formula::know(a.clone(), k.clone())),
                Formula::implies(Formula::not(k.clone()), Formula::know(a.clone(), Formula::not(k.clone()))),
                // duality of the diamond
                Formula::implies(Formula::diamond(a.clone(), phi.clone()), Formula::not(Formula::know(a.clone(), Formula::not(phi.clone())))),
            ];
            for f in &valid {
                for w in m.state_ids() {
                    prop_assert!(eval(&m, &sel, w, f).unwrap().value, "{} at {}", f, m.name(w));
                }
            }
        }
    }

    #[test]
    fn reason_axioms(seed in any::<u64>(), fseed in any::<u64>()) {
        let (m, sel) = model_for(seed);
        let atoms = declared_atoms(&m);
        let mut r = rng(fseed);
        let phi = random_formula(&mut r, &atoms, &agents(), 2);
        let psi = random_formula(&mut r, &atoms, &agents(), 2);
        for a in agents() {
            for &p in &atoms {
                let rp = |f: Formula| Formula::reason(a.clone(), f, p);
                let valid = [
                    // success
                    rp(Formula::atom(p)),
                    // consistency
                    Formula::not(rp(Formula::bottom())),
                    // conjunction
                    Formula::and(
                        Formula::implies(rp(Formula::and(phi.clone(), psi.clone())), Formula::and(rp(phi.clone()), rp(psi.clone()))),
                        Formula::implies(Formula::and(rp(phi.clone()), rp(psi.clone())), rp(Formula::and(phi.clone(), psi.clone()))),
                    ),
                ];
                for f in &valid {
                    for w in m.state_ids() {
                        prop_assert!(eval(&m, &sel, w, f).unwrap().value, "{} at {}", f, m.name(w));
                    }
                }
                let dual = Formula::dual_reason(a.clone(), phi.clone(), p);
                let neg = Formula::not(rp(Formula::not(phi.clone())));
                for w in m.state_ids() {
                    prop_assert_eq!(eval(&m, &sel, w, &dual).unwrap().value, eval(&m, &sel, w, &neg).unwrap().value);
                }
            }
        }
    }

    #[test]
    fn reason_event_is_monotone_and_matches_oracle(seed in any::<u64>(), e_mask in any::<u64>(), f_mask in any::<u64>()) {
        let (m, sel) = model_for(seed);
        let ops = ReasonOps::new(&m, &sel).unwrap();
        let e = ops.from_mask(e_mask & f_mask);
        let f = ops.from_mask(f_mask);
        for i in 0..2 {
            let re = reason_event(&m, &sel, i, &e).unwrap();
            let rf = reason_event(&m, &sel, i, &f).unwrap();
            prop_assert!(re.is_subset(&rf));
            let oracle_e: BTreeSet<StateId> = e.ones().map(StateId).collect();
            prop_assert_eq!(&re, &set_of(&ops, &common::reason_set(&m, &sel, i, &oracle_e)));
        }
    }

    #[test]
    fn common_knowledge_invariants(seed in any::<u64>(), fseed in any::<u64>()) {
        let (m, sel) = model_for(seed);
        let atoms = declared_atoms(&m);
        let phi = random_formula(&mut rng(fseed), &atoms, &agents(), 2);
        let mut ev = Evaluator::new(&m, &sel);
        for group in [vec![0], vec![1], vec![0, 1]] {
            let rep = iterative_ck(&mut ev, &group, &phi).unwrap();
            let members: BTreeSet<StateId> = rep.members().collect();
            prop_assert_eq!(&members, &common::common_knowledge(&m, &sel, &group, &phi));
            prop_assert!(members.is_subset(&common::extension(&m, &sel, &phi)));
            for &w in &members {
                for &i in &group {
                    prop_assert!(common::component(&m, i, w).is_subset(&members));
                }
            }
            for w in m.state_ids() {
                let at = ck_at(&mut ev, &group, &phi, w).unwrap();
                prop_assert_eq!((at.value, at.soundness), rep.verdicts[&w]);
                prop_assert_eq!(at.soundness, Soundness::Exact);
                if let (Some(first), Some(last)) = (at.refutation.first(), at.refutation.last()) {
                    prop_assert_eq!(*first, w);
                    prop_assert!(!common::holds(&m, &sel, &phi, *last));
                }
            }
        }
    }
}
