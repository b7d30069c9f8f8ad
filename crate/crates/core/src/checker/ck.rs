//! Iterative common knowledge.
//!
//! `CK_G φ` is the greatest fixed point of
//! `X ↦ ||φ|| ∩ ⋂_{i∈G} {w : [w]_i ⊆ X}`. [`iterative_ck`] iterates that
//! map over the whole structure; [`ck_at`] decides a single state by
//! searching the states reachable through `G`-components for a `¬φ` state.
//!
//! On a truncated structure a refutation is exact when the `¬φ` state it
//! reaches is an exact refutation (components only grow under untruncation,
//! so the path survives). Membership is exact only when no state reachable
//! from the member has an incomplete component or an inexact `φ` verdict.

use std::collections::{BTreeMap, HashMap, VecDeque};

use petgraph::unionfind::UnionFind;

use super::{CheckError, Evaluator, Soundness, Verdict};
use crate::formula::Formula;
use crate::structure::{EpistemicStructure, Selection};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CkReport<St: Ord> {
    /// Every state with its membership and the soundness of that verdict.
    pub verdicts: BTreeMap<St, (bool, Soundness)>,
    /// Applications of the fixed-point map until it stabilized.
    pub iterations: usize,
}

impl<St: Ord + Copy> CkReport<St> {
    pub fn contains(&self, s: St) -> bool {
        self.verdicts.get(&s).is_some_and(|v| v.0)
    }

    pub fn soundness(&self, s: St) -> Option<Soundness> {
        self.verdicts.get(&s).map(|v| v.1)
    }

    pub fn members(&self) -> impl Iterator<Item = St> + '_ {
        self.verdicts.iter().filter(|(_, v)| v.0).map(|(&s, _)| s)
    }

    pub fn len(&self) -> usize {
        self.members().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_group<S: EpistemicStructure>(st: &S, group: &[usize]) -> Result<(), CheckError> {
    match group.iter().find(|&&i| i >= st.agents().len()) {
        Some(i) => Err(CheckError::UnknownAgent(i.to_string())),
        None => Ok(()),
    }
}

/// The greatest fixed point over every state of the structure.
pub fn iterative_ck<S, F>(ev: &mut Evaluator<'_, S, F>, group: &[usize], phi: &Formula) -> Result<CkReport<S::State>, CheckError>
where
    S: EpistemicStructure,
    F: Selection<S::State>,
{
    let st = ev.structure();
    check_group(st, group)?;
    let node = ev.compile(phi)?;
    let states = st.states();
    let index: HashMap<S::State, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let n = states.len();

    let mut truth = Vec::with_capacity(n);
    for &s in &states {
        truth.push(ev.verdict(node, s)?);
    }
    // comps[g][s]: indices of [s]_{group[g]}
    let comps: Vec<Vec<Vec<usize>>> = group
        .iter()
        .map(|&i| {
            states
                .iter()
                .map(|&s| st.component(i, s).iter().map(|v| index[v]).collect())
                .collect()
        })
        .collect();

    let mut x: Vec<bool> = truth.iter().map(|v| v.value).collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let next: Vec<bool> = (0..n)
            .map(|s| truth[s].value && comps.iter().all(|c| c[s].iter().all(|&v| x[v])))
            .collect();
        if next == x {
            break;
        }
        x = next;
    }

    // Regions: classes of the equivalence generated by the group's components.
    let mut uf = UnionFind::<usize>::new(n);
    for c in &comps {
        for (s, members) in c.iter().enumerate() {
            for &v in members {
                uf.union(s, v);
            }
        }
    }
    let mut contaminated = HashMap::new();
    let mut refuted = HashMap::new();
    for (s, &state) in states.iter().enumerate() {
        let root = uf.find(s);
        let bad = !truth[s].exact || group.iter().any(|&i| !st.component_complete(i, state));
        *contaminated.entry(root).or_insert(false) |= bad;
        *refuted.entry(root).or_insert(false) |= !truth[s].value && truth[s].exact;
    }
    let verdicts = states
        .iter()
        .enumerate()
        .map(|(s, &state)| {
            let root = uf.find(s);
            let exact = if x[s] { !contaminated[&root] } else { refuted[&root] };
            (state, (x[s], Soundness::from_exact(exact)))
        })
        .collect();
    Ok(CkReport { verdicts, iterations })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CkAt<St> {
    pub value: bool,
    pub soundness: Soundness,
    /// For a refutation: states from `w` to a `¬φ` state, each in a group
    /// component of the previous one.
    pub refutation: Vec<St>,
    /// Number of states reachable from `w` through group components.
    pub region_size: usize,
}

/// Decides `CK_G φ` at `w` by exploring the states reachable from `w`.
pub fn ck_at<S, F>(ev: &mut Evaluator<'_, S, F>, group: &[usize], phi: &Formula, w: S::State) -> Result<CkAt<S::State>, CheckError>
where
    S: EpistemicStructure,
    F: Selection<S::State>,
{
    let st = ev.structure();
    check_group(st, group)?;
    let node = ev.compile(phi)?;
    let mut pred: HashMap<S::State, S::State> = HashMap::from([(w, w)]);
    let mut order = vec![w];
    let mut queue = VecDeque::from([w]);
    let mut contaminated = false;
    let mut exact_false = None;
    let mut any_false = None;
    while let Some(s) = queue.pop_front() {
        let Verdict { value, exact } = ev.verdict(node, s)?;
        contaminated |= !exact;
        if !value {
            any_false.get_or_insert(s);
            if exact && exact_false.is_none() {
                exact_false = Some(s);
            }
        }
        for &i in group {
            contaminated |= !st.component_complete(i, s);
            for v in st.component(i, s) {
                if let std::collections::hash_map::Entry::Vacant(e) = pred.entry(v) {
                    e.insert(s);
                    order.push(v);
                    queue.push_back(v);
                }
            }
        }
    }
    let region_size = order.len();
    let path_to = |end: S::State| {
        let mut path = vec![end];
        while *path.last().unwrap() != w {
            path.push(pred[path.last().unwrap()]);
        }
        path.reverse();
        path
    };
    Ok(match exact_false.or(any_false) {
        Some(end) => CkAt {
            value: false,
            soundness: Soundness::from_exact(exact_false.is_some()),
            refutation: path_to(end),
            region_size,
        },
        None => CkAt {
            value: true,
            soundness: Soundness::from_exact(!contaminated),
            refutation: Vec::new(),
            region_size,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::butterfly::{build_body, ButterflyParams, Flutter};
    use crate::formula::{agent_list, parse};
    use crate::model::TableSelection;

    #[test]
    fn globally_true_formula_on_body() {
        let agents = agent_list("R C").unwrap();
        let body = build_body(ButterflyParams::new(300, 50, 0).unwrap(), &agents).unwrap();
        // Treat the body as a finite model in its own right.
        let text = crate::model::save_model(&body, None).replace("frontier: w1 w2 w3 w4\n", "");
        let (m, _) = crate::model::load_model(&text).unwrap();
        let sel = TableSelection::new();
        let mut ev = Evaluator::new(&m, &sel);
        let phi = Formula::any_height([250, 300, 350]);
        let rep = iterative_ck(&mut ev, &[0, 1], &phi).unwrap();
        assert_eq!(rep.len(), 5);
        assert!(rep.verdicts.values().all(|v| v.1 == Soundness::Exact));
        let rep = iterative_ck(&mut ev, &[0, 1], &Formula::bottom()).unwrap();
        assert!(rep.is_empty());
    }

    #[test]
    fn above_threshold_is_not_common_knowledge() {
        let agents = agent_list("R C").unwrap();
        let f = Flutter::new(150, 450, 50, 6, &agents).unwrap();
        let mut ev = Evaluator::new(&f, &f);
        let phi = Formula::any_height(101..=f.max_height().unwrap());
        let w = f.center(300).unwrap();
        let at = ck_at(&mut ev, &[0, 1], &phi, w).unwrap();
        assert!(!at.value);
        assert_eq!(at.soundness, Soundness::Exact);
        assert_eq!(at.refutation.last().unwrap().value(), 100);

        let rep = iterative_ck(&mut ev, &[0, 1], &phi).unwrap();
        assert!(!rep.contains(w));
        assert_eq!(rep.soundness(w), Some(Soundness::Exact));
        // Both routes agree everywhere on a smaller flutter.
        let small = Flutter::new(140, 160, 50, 2, &agents).unwrap();
        let mut ev = Evaluator::new(&small, &small);
        let phi = parse("[140] | [190] | [90] | [150] | [200] | [100] | [160] | [110]").unwrap();
        let rep = iterative_ck(&mut ev, &[0, 1], &phi).unwrap();
        for s in small.states() {
            let at = ck_at(&mut ev, &[0, 1], &phi, s).unwrap();
            assert_eq!((at.value, at.soundness), rep.verdicts[&s], "{s}");
        }
    }
}
