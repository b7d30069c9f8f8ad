//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls the checker, the component or max-plausible helpers of
//! the library, or the butterfly builders. Only raw model data (state ids,
//! order pairs, heights, selection table) is read, apart from library
//! results that are being compared against the oracle.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use plausibility_mc::formula::{Atom, Formula};
use plausibility_mc::model::{Model, StateId, TableSelection};

fn le(m: &Model, i: usize, a: StateId, b: StateId) -> bool {
    m.order(i).less_eq(a, b)
}

/// `[w]_i` by breadth-first search over comparability.
pub fn component(m: &Model, i: usize, w: StateId) -> BTreeSet<StateId> {
    let mut seen = BTreeSet::from([w]);
    let mut queue = VecDeque::from([w]);
    while let Some(s) = queue.pop_front() {
        for v in m.state_ids() {
            if (le(m, i, s, v) || le(m, i, v, s)) && seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    seen
}

/// States of `xs` with nothing in `xs` strictly above them.
pub fn maximal(m: &Model, i: usize, xs: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    xs.iter()
        .copied()
        .filter(|&x| !xs.iter().any(|&y| le(m, i, x, y) && !le(m, i, y, x)))
        .collect()
}

pub fn atom_holds(m: &Model, a: Atom, w: StateId) -> bool {
    match a {
        Atom::Top => true,
        Atom::Height(n) => m.heights_at(w).contains(&n),
    }
}

pub fn agent_index(m: &Model, name: &str) -> usize {
    m.agents().iter().position(|a| a.as_str() == name).expect("agent of the model")
}

/// Direct recursion on the truth conditions, no memoization.
pub fn holds(m: &Model, sel: &TableSelection, phi: &Formula, w: StateId) -> bool {
    match phi {
        Formula::Atom(a) => atom_holds(m, *a, w),
        Formula::Not(f) => !holds(m, sel, f, w),
        Formula::And(l, r) => holds(m, sel, l, w) && holds(m, sel, r, w),
        Formula::Know { agent, body } => {
            let i = agent_index(m, agent.as_str());
            component(m, i, w).iter().all(|&v| holds(m, sel, body, v))
        }
        Formula::Reason { agent, body, cond } => {
            let i = agent_index(m, agent.as_str());
            let t = sel.get(*cond, w).expect("selection defined");
            let cond_states: BTreeSet<StateId> = component(m, i, t)
                .into_iter()
                .filter(|&v| atom_holds(m, *cond, v))
                .collect();
            maximal(m, i, &cond_states).iter().all(|&v| holds(m, sel, body, v))
        }
    }
}

/// Extension of `phi`.
pub fn extension(m: &Model, sel: &TableSelection, phi: &Formula) -> BTreeSet<StateId> {
    m.state_ids().filter(|&w| holds(m, sel, phi, w)).collect()
}

/// Common knowledge by iterating "everyone in the group knows" from the
/// extension of `phi` down to a fixed point.
pub fn common_knowledge(m: &Model, sel: &TableSelection, group: &[usize], phi: &Formula) -> BTreeSet<StateId> {
    let mut x = extension(m, sel, phi);
    loop {
        let next: BTreeSet<StateId> = x
            .iter()
            .copied()
            .filter(|&w| group.iter().all(|&i| component(m, i, w).is_subset(&x)))
            .collect();
        if next == x {
            return x;
        }
        x = next;
    }
}

/// `{w : max_i([f(true, w)]_i) ⊆ e}`.
pub fn reason_set(m: &Model, sel: &TableSelection, i: usize, e: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    m.state_ids()
        .filter(|&w| {
            let t = sel.get(Atom::Top, w).expect("selection defined for true");
            maximal(m, i, &component(m, i, t)).is_subset(e)
        })
        .collect()
}

/// A butterfly described by path names, built by direct recursion: the body
/// is `w0 = k`, `w1, w3 = k − m`, `w2, w4 = k + m`; every leaf of value `n`
/// at level `l` gets a `-` child of value `n − m` (when `n ≥ m`) and a `+`
/// child of value `n + m`.
#[derive(Debug, Clone)]
pub struct ReferenceButterfly {
    /// name → (value, level)
    pub states: BTreeMap<String, (u64, u32)>,
}

impl ReferenceButterfly {
    pub fn new(k: u64, m: u64, depth: u32) -> Self {
        let mut states = BTreeMap::new();
        states.insert("w0".to_string(), (k, 0));
        let mut frontier = Vec::new();
        for (name, v) in [("w1", k - m), ("w2", k + m), ("w3", k - m), ("w4", k + m)] {
            states.insert(name.to_string(), (v, 1));
            frontier.push((name.to_string(), v));
        }
        for level in 2..=depth + 1 {
            let mut next = Vec::new();
            for (name, v) in frontier {
                if v >= m {
                    next.push((format!("{name}-"), v - m));
                }
                next.push((format!("{name}+"), v + m));
            }
            for (name, v) in &next {
                states.insert(name.clone(), (*v, level));
            }
            frontier = next;
        }
        Self { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }
}

/// Parent of a path name and the agent relating the two.
fn parent_edge(name: &str) -> Option<(String, usize)> {
    match name {
        "w0" => None,
        "w1" | "w2" => Some(("w0".into(), 0)),
        "w3" | "w4" => Some(("w0".into(), 1)),
        _ => {
            let parent = &name[..name.len() - 1];
            let (_, parent_agent) = parent_edge(parent)?;
            Some((parent.to_string(), 1 - parent_agent))
        }
    }
}

/// Every structural property of one generated butterfly, as a list of
/// violations.
pub fn butterfly_violations(k: u64, m: u64, d: u32, model: &Model) -> Vec<String> {
    let mut out = Vec::new();
    let reference = ReferenceButterfly::new(k, m, d);
    let names: BTreeSet<&str> = model.state_ids().map(|s| model.name(s)).collect();
    let expected: BTreeSet<&str> = reference.states.keys().map(String::as_str).collect();
    if names != expected {
        out.push(format!("state names differ: {:?}", names.symmetric_difference(&expected).collect::<Vec<_>>()));
        return out;
    }
    for s in model.state_ids() {
        let (value, _) = reference.states[model.name(s)];
        if model.heights_at(s) != [value] {
            out.push(format!("{} has heights {:?}, expected [{value}]", model.name(s), model.heights_at(s)));
        }
    }
    // valuation partition
    let mut covered = BTreeSet::new();
    for h in model.heights() {
        for &s in model.extension(h) {
            if !covered.insert(s) {
                out.push(format!("{} has two heights", model.name(s)));
            }
        }
    }
    if covered.len() != model.len() {
        out.push("some state has no height".into());
    }
    for i in 0..2 {
        let order = model.order(i);
        for a in model.state_ids() {
            if !order.less_eq(a, a) {
                out.push(format!("agent {i} not reflexive at {}", model.name(a)));
            }
            for b in model.state_ids() {
                let edge = a != b && parent_edge(model.name(a)) == Some((model.name(b).to_string(), i));
                if order.less_eq(a, b) != (a == b || edge) {
                    out.push(format!("agent {i}: {} ≤ {} is {}", model.name(a), model.name(b), order.less_eq(a, b)));
                }
            }
            for (x, y) in order.pairs().filter(|&(x, _)| x == a) {
                for (_, z) in order.pairs().filter(|&(u, _)| u == y) {
                    if !order.less_eq(x, z) {
                        out.push(format!("agent {i} not transitive at {}", model.name(x)));
                    }
                }
            }
            let comp = component(model, i, a);
            if comp.len() > 3 {
                out.push(format!("[{}]_{i} has {} states", model.name(a), comp.len()));
            }
            let lib: BTreeSet<StateId> = model.epistemic_component(&model.agents()[i], a).unwrap().iter().copied().collect();
            if lib != comp {
                out.push(format!("component of {} for agent {i} differs from the oracle", model.name(a)));
            }
        }
    }
    // child arithmetic and the boundary rule
    for (name, &(value, level)) in &reference.states {
        if level == 0 || level > d {
            continue;
        }
        let minus = format!("{name}-");
        let plus = format!("{name}+");
        if model.state(&plus).ok().map(|s| model.heights_at(s).to_vec()) != Some(vec![value + m]) {
            out.push(format!("{plus} missing or mislabelled"));
        }
        match (value >= m, model.state(&minus).ok()) {
            (true, Some(s)) if model.heights_at(s) == [value - m] => {}
            (false, None) => {}
            _ => out.push(format!("{minus} violates the boundary rule")),
        }
    }
    let untruncated = k >= (u64::from(d) + 1) * m;
    let formula = 5 + 8 * ((1u64 << d) - 1);
    if untruncated && model.len() as u64 != formula {
        out.push(format!("{} states, recurrence gives {formula}", model.len()));
    }
    if !untruncated && model.len() as u64 >= formula {
        out.push(format!("boundary truncation should drop states, have {}", model.len()));
    }
    out
}
