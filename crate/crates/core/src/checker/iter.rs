//! Iterated reasons to believe by support-set propagation.
//!
//! With `T(X) = ⋃_{x∈X} ⋃_i max_{≤i}(||p|| ∩ [f(p,x)]_i)`, the formula
//! `r^n(φ|p)` holds at `w` iff `T^{n+1}({w}) ⊆ ||φ||`. The level-`n`
//! support set is `T^{n+1}({w})`; once two consecutive support sets agree
//! every later level repeats the same verdict.

use std::collections::BTreeSet;

use super::{CheckError, Evaluator, Soundness};
use crate::formula::{AgentId, Atom, Formula};
use crate::structure::{EpistemicStructure, Selection};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelReport<St> {
    /// States at which the level's innermost `R_i(φ|p)` bodies are read.
    pub support: Vec<St>,
    pub holds: bool,
    pub soundness: Soundness,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizationReport<St> {
    /// `r^n(body | cond)` in readable form.
    pub operator: String,
    pub depth_reached: usize,
    /// One entry per level `0..=depth_reached`.
    pub levels: Vec<LevelReport<St>>,
    /// First level whose support set equals the next level's.
    pub stabilized_at: Option<usize>,
}

impl<St> StabilizationReport<St> {
    pub fn stabilized(&self) -> bool {
        self.stabilized_at.is_some()
    }

    /// Every computed level holds and the support sets have stabilized, so
    /// the operator holds at every level.
    pub fn holds_for_all_levels(&self) -> bool {
        self.stabilized() && self.levels.iter().all(|l| l.holds)
    }

    /// Every computed level's verdict is exact.
    pub fn exact(&self) -> bool {
        self.levels.iter().all(|l| l.soundness.is_exact())
    }

    pub fn support_sets(&self) -> impl Iterator<Item = &[St]> {
        self.levels.iter().map(|l| l.support.as_slice())
    }
}

/// Computes `r^0(body|cond) … r^{depth_max}(body|cond)` at `w`.
pub fn eval_iter_reason<S, F>(
    ev: &mut Evaluator<'_, S, F>,
    w: S::State,
    depth_max: usize,
    body: &Formula,
    cond: Atom,
) -> Result<StabilizationReport<S::State>, CheckError>
where
    S: EpistemicStructure,
    F: Selection<S::State>,
{
    let st = ev.structure();
    let body_node = ev.compile(body)?;
    // Validates `cond` as well.
    ev.compile(&Formula::atom(cond))?;
    let agents = st.agents().len();

    let mut current: BTreeSet<S::State> = BTreeSet::from([w]);
    let mut levels = Vec::new();
    let mut stabilized_at = None;
    let mut previous: Option<BTreeSet<S::State>> = None;
    // Whether every support set so far is final.
    let mut paths_exact = true;
    for level in 0..=depth_max {
        let mut next = BTreeSet::new();
        for &x in &current {
            for i in 0..agents {
                let (support, complete) = ev.reason_support(i, cond, x)?;
                paths_exact &= complete;
                next.extend(support);
            }
        }
        let mut holds = true;
        let mut refuted_exactly = false;
        let mut body_exact = true;
        for &v in &next {
            let verdict = ev.verdict(body_node, v)?;
            if !verdict.value {
                holds = false;
                refuted_exactly |= verdict.exact;
            }
            body_exact &= verdict.exact;
        }
        let exact = paths_exact && if holds { body_exact } else { refuted_exactly };
        if stabilized_at.is_none() && previous.as_ref() == Some(&next) {
            stabilized_at = Some(level - 1);
        }
        levels.push(LevelReport {
            support: next.iter().copied().collect(),
            holds,
            soundness: Soundness::from_exact(exact),
        });
        previous = Some(next.clone());
        current = next;
    }
    Ok(StabilizationReport {
        operator: format!("r^n({body} || {cond})"),
        depth_reached: depth_max,
        levels,
        stabilized_at,
    })
}

/// `r^n(R_j([k]) | [k])` at `w`, i.e. iterated reasons to believe that `j`
/// has reason to believe `[k]`, conditional on `[k]`.
pub fn eval_counterfactual_iter<S, F>(
    ev: &mut Evaluator<'_, S, F>,
    w: S::State,
    depth_max: usize,
    k: u64,
    target_agent: &AgentId,
) -> Result<StabilizationReport<S::State>, CheckError>
where
    S: EpistemicStructure,
    F: Selection<S::State>,
{
    let body = Formula::reason_uncond(target_agent.clone(), Formula::height(k));
    eval_iter_reason(ev, w, depth_max, &body, Atom::Height(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::butterfly::Flutter;
    use crate::formula::{agent_list, expand_iter_reason};
    use crate::structure::SelectionError;

    fn setup() -> (Flutter, Vec<AgentId>) {
        let agents = agent_list("R C").unwrap();
        (Flutter::new(0, 600, 50, 6, &agents).unwrap(), agents)
    }

    #[test]
    fn disjunction_stabilizes_at_center() {
        let (f, agents) = setup();
        let mut ev = Evaluator::new(&f, &f);
        let w = f.center(300).unwrap();
        let body = Formula::any_height([250, 300, 350]);
        let rep = eval_iter_reason(&mut ev, w, 6, &body, Atom::Top).unwrap();
        assert!(rep.holds_for_all_levels());
        assert!(rep.exact());
        assert_eq!(rep.stabilized_at, Some(0));
        assert!(rep.support_sets().all(|s| s == [w]));
        for n in 0..4 {
            let phi = expand_iter_reason(n, &body, Atom::Top, &agents).unwrap();
            assert!(ev.check(&phi, w).unwrap().value);
        }
    }

    #[test]
    fn wrong_height_fails_at_level_zero() {
        let (f, _) = setup();
        let mut ev = Evaluator::new(&f, &f);
        let w = f.center(300).unwrap();
        let rep = eval_iter_reason(&mut ev, w, 3, &Formula::height(250), Atom::Top).unwrap();
        assert!(!rep.levels[0].holds);
        assert!(!rep.holds_for_all_levels());
    }

    #[test]
    fn counterfactual_moves_to_other_butterfly() {
        let (f, agents) = setup();
        let mut ev = Evaluator::new(&f, &f);
        let w = f.center(300).unwrap();
        let rep = eval_counterfactual_iter(&mut ev, w, 6, 200, &agents[1]).unwrap();
        assert!(rep.holds_for_all_levels());
        assert_eq!(rep.levels[0].support, [f.center(200).unwrap()]);
        assert_eq!(
            eval_counterfactual_iter(&mut ev, w, 6, 700, &agents[1]),
            Err(CheckError::Selection(SelectionError::MissingButterfly(700)))
        );
    }
}
