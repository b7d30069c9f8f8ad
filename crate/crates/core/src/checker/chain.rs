//! Search for alternating `⟨K⟩`-chains.
//!
//! A chain of depth `r` from `w` is a sequence `w = s0, s1, …, sr` where
//! `s_{t}` lies in the component of `s_{t−1}` for the first agent when `t`
//! is odd and for the other agent when `t` is even. A target reached at
//! depth `r ≥ 1` means `⟨K_i⟩⟨K^{r−1}_j⟩target` holds at `w`; depth 0 means
//! `w` itself satisfies the target.

use std::collections::BTreeMap;

use super::CheckError;
use crate::formula::{expand_diamond_chain, AgentId, Atom, Formula};
use crate::structure::EpistemicStructure;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainWitness<St> {
    pub depth: usize,
    /// `s0 = w, …, s_depth`; the last state satisfies the target.
    pub states: Vec<St>,
}

/// The formula whose truth at `w` says a chain of exactly `depth` steps
/// reaches `target`.
pub fn chain_formula(first: &AgentId, depth: usize, target: Atom, agents: &[AgentId]) -> Result<Formula, CheckError> {
    if depth == 0 {
        return Ok(Formula::atom(target));
    }
    Ok(expand_diamond_chain(first, depth - 1, &Formula::atom(target), agents)?)
}

/// The least-depth chain from `w` to a `target` state with at most
/// `max_depth` steps, found by breadth-first search.
///
/// Each bound `b` is searched with states pruned when
/// [`min_steps_to`](EpistemicStructure::min_steps_to) shows they cannot
/// reach the target within `b` steps; bounds increase until a chain is
/// found, so the first chain found is a shortest one.
pub fn diamond_chain_search<S: EpistemicStructure>(
    st: &S,
    w: S::State,
    first: usize,
    target: Atom,
    max_depth: usize,
) -> Result<Option<ChainWitness<S::State>>, CheckError> {
    let n = st.agents().len();
    if n != 2 {
        return Err(CheckError::AgentCount { expected: 2, found: n });
    }
    if first >= n {
        return Err(CheckError::UnknownAgent(first.to_string()));
    }
    if st.satisfies(target, w) {
        return Ok(Some(ChainWitness {
            depth: 0,
            states: vec![w],
        }));
    }
    let lower = st.min_steps_to(w, target);
    if lower > max_depth {
        return Ok(None);
    }
    for bound in lower.max(1)..=max_depth {
        if let Some(found) = bounded_search(st, w, first, target, bound) {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

fn bounded_search<S: EpistemicStructure>(
    st: &S,
    w: S::State,
    first: usize,
    target: Atom,
    bound: usize,
) -> Option<ChainWitness<S::State>> {
    // layers[t][s] = predecessor of s in layer t−1
    let mut layers: Vec<BTreeMap<S::State, S::State>> = vec![BTreeMap::from([(w, w)])];
    for t in 1..=bound {
        let agent = if t % 2 == 1 { first } else { 1 - first };
        let mut next = BTreeMap::new();
        for &s in layers[t - 1].keys() {
            for v in st.component(agent, s) {
                if next.contains_key(&v) {
                    continue;
                }
                let h = st.min_steps_to(v, target);
                if h == usize::MAX || t + h > bound {
                    continue;
                }
                next.insert(v, s);
            }
        }
        if next.is_empty() {
            return None;
        }
        let hit = next.keys().copied().filter(|&v| st.satisfies(target, v)).min();
        layers.push(next);
        if let Some(end) = hit {
            let mut states = vec![end];
            for layer in layers[1..].iter().rev() {
                let prev = layer[states.last().unwrap()];
                states.push(prev);
            }
            states.reverse();
            return Some(ChainWitness { depth: t, states });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::butterfly::Flutter;
    use crate::checker::eval;
    use crate::formula::agent_list;

    fn flutter() -> Flutter {
        Flutter::new(0, 600, 50, 6, &agent_list("R C").unwrap()).unwrap()
    }

    #[test]
    fn reaches_fifty_in_five_steps() {
        let f = flutter();
        let w = f.center(300).unwrap();
        let found = diamond_chain_search(&f, w, 0, Atom::Height(50), 10).unwrap().unwrap();
        assert_eq!(found.depth, 5);
        let heights: Vec<u64> = found.states.iter().map(|s| s.value()).collect();
        assert_eq!(heights, [300, 250, 200, 150, 100, 50]);
        for (t, pair) in found.states.windows(2).enumerate() {
            assert!(f.component(t % 2, pair[0]).contains(&pair[1]));
        }
    }

    #[test]
    fn depth_zero_and_bounded_failure() {
        let f = flutter();
        let w = f.center(300).unwrap();
        let found = diamond_chain_search(&f, w, 0, Atom::Height(300), 3).unwrap().unwrap();
        assert_eq!(found.depth, 0);
        assert_eq!(diamond_chain_search(&f, w, 0, Atom::Height(50), 3).unwrap(), None);
        assert_eq!(diamond_chain_search(&f, w, 0, Atom::Height(275), 30).unwrap(), None);
    }

    #[test]
    fn agrees_with_chain_formula() {
        let agents = agent_list("R C").unwrap();
        let f = flutter();
        let w = f.center(300).unwrap();
        for target in [350, 250, 200, 400, 150] {
            for first in 0..2 {
                let found = diamond_chain_search(&f, w, first, Atom::Height(target), 6).unwrap().unwrap();
                for r in 0..=found.depth {
                    let phi = chain_formula(&agents[first], r, Atom::Height(target), &agents).unwrap();
                    let v = eval(&f, &f, w, &phi).unwrap().value;
                    assert_eq!(v, r == found.depth, "target {target} first {first} r {r}");
                }
            }
        }
    }
}
