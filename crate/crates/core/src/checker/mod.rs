//! Evaluation of formulas against an [`EpistemicStructure`].
//!
//! Formulas are compiled into a hash-consed arena so that the large shared
//! expansions of `r^n` and diamond chains are evaluated once per state.
//! Every verdict carries an exactness flag: on a truncated structure a
//! verdict is exact when it cannot change by adding the missing states.
//! A result is reported [`Soundness::Exact`] when the tracked flag says so or
//! the formula's modal depth is within the structure's safe depth at the
//! evaluation state.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::formula::{Atom, Formula, FormulaError};
use crate::model::max_plausible;
use crate::structure::{EpistemicStructure, Selection, SelectionError};

mod chain;
mod ck;
mod iter;

pub use chain::{chain_formula, diamond_chain_search, ChainWitness};
pub use ck::{ck_at, iterative_ck, CkAt, CkReport};
pub use iter::{eval_counterfactual_iter, eval_iter_reason, LevelReport, StabilizationReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("formula mentions undeclared agent {0}")]
    UnknownAgent(String),
    #[error("formula mentions undeclared atom {0}")]
    UnknownAtom(Atom),
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("{0}")]
    Selection(#[from] SelectionError),
    #[error("operation needs exactly {expected} agents, structure has {found}")]
    AgentCount { expected: usize, found: usize },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Soundness {
    Exact,
    FrontierContaminated,
}

impl Soundness {
    pub fn from_exact(exact: bool) -> Self {
        if exact {
            Soundness::Exact
        } else {
            Soundness::FrontierContaminated
        }
    }

    pub fn is_exact(self) -> bool {
        self == Soundness::Exact
    }
}

impl fmt::Display for Soundness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Soundness::Exact => "exact",
            Soundness::FrontierContaminated => "frontier-contaminated",
        })
    }
}

/// A truth value and whether truncation could change it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub value: bool,
    pub exact: bool,
}

impl Verdict {
    fn exact(value: bool) -> Self {
        Self { value, exact: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult<St> {
    pub value: bool,
    pub soundness: Soundness,
    /// States explaining the verdict: the chain of a true diamond, or the
    /// offending state (followed by its own witnesses) of a failed box.
    pub trace: Vec<St>,
}

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    Atom(Atom),
    And(NodeId, NodeId),
    Not(NodeId),
    Reason { agent: usize, body: NodeId, cond: Atom },
    Know { agent: usize, body: NodeId },
}

/// Compiles and evaluates formulas over one structure and selection
/// function, memoizing modal subformulas per state.
pub struct Evaluator<'a, S: EpistemicStructure, F> {
    st: &'a S,
    sel: &'a F,
    nodes: Vec<Node>,
    ids: HashMap<Node, NodeId>,
    depth: Vec<usize>,
    memo: HashMap<(NodeId, S::State), Verdict>,
}

impl<'a, S, F> Evaluator<'a, S, F>
where
    S: EpistemicStructure,
    F: Selection<S::State>,
{
    pub fn new(st: &'a S, sel: &'a F) -> Self {
        Self {
            st,
            sel,
            nodes: Vec::new(),
            ids: HashMap::new(),
            depth: Vec::new(),
            memo: HashMap::new(),
        }
    }

    pub fn structure(&self) -> &'a S {
        self.st
    }

    pub fn selection(&self) -> &'a F {
        self.sel
    }

    /// Number of memoized `(subformula, state)` verdicts.
    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    fn intern(&mut self, node: Node, depth: usize) -> NodeId {
        if let Some(&id) = self.ids.get(&node) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(node);
        self.depth.push(depth);
        self.ids.insert(node, id);
        id
    }

    fn atom(&self, atom: Atom) -> Result<Atom, CheckError> {
        if self.st.declares_atom(atom) {
            Ok(atom)
        } else {
            Err(CheckError::UnknownAtom(atom))
        }
    }

    fn agent(&self, agent: &crate::formula::AgentId) -> Result<usize, CheckError> {
        self.st
            .agent_index(agent)
            .ok_or_else(|| CheckError::UnknownAgent(agent.to_string()))
    }

    /// Interns `phi`, checking that its agents and atoms are declared.
    pub fn compile(&mut self, phi: &Formula) -> Result<NodeId, CheckError> {
        Ok(match phi {
            Formula::Atom(a) => {
                let a = self.atom(*a)?;
                self.intern(Node::Atom(a), 0)
            }
            Formula::Not(f) => {
                let f = self.compile(f)?;
                let d = self.depth[f as usize];
                self.intern(Node::Not(f), d)
            }
            Formula::And(l, r) => {
                let l = self.compile(l)?;
                let r = self.compile(r)?;
                let d = self.depth[l as usize].max(self.depth[r as usize]);
                self.intern(Node::And(l, r), d)
            }
            Formula::Reason { agent, body, cond } => {
                let agent = self.agent(agent)?;
                let cond = self.atom(*cond)?;
                let body = self.compile(body)?;
                let d = self.depth[body as usize] + 1;
                self.intern(Node::Reason { agent, body, cond }, d)
            }
            Formula::Know { agent, body } => {
                let agent = self.agent(agent)?;
                let body = self.compile(body)?;
                let d = self.depth[body as usize] + 1;
                self.intern(Node::Know { agent, body }, d)
            }
        })
    }

    pub fn modal_depth(&self, node: NodeId) -> usize {
        self.depth[node as usize]
    }

    /// The max-plausible `cond`-states in the `agent`-component of
    /// `f(cond, w)`, and whether that set is final.
    pub fn reason_support(&self, agent: usize, cond: Atom, w: S::State) -> Result<(Vec<S::State>, bool), CheckError> {
        let t = self.sel.select(cond, w)?;
        let candidates: Vec<S::State> = self
            .st
            .component(agent, t)
            .into_iter()
            .filter(|&v| self.st.satisfies(cond, v))
            .collect();
        Ok((max_plausible(self.st, agent, &candidates), self.st.component_complete(agent, t)))
    }

    /// Evaluates a compiled node at `w`.
    pub fn verdict(&mut self, node: NodeId, w: S::State) -> Result<Verdict, CheckError> {
        match self.nodes[node as usize] {
            Node::Atom(a) => Ok(Verdict::exact(self.st.satisfies(a, w))),
            Node::Not(f) => {
                let v = self.verdict(f, w)?;
                Ok(Verdict {
                    value: !v.value,
                    exact: v.exact,
                })
            }
            Node::And(l, r) => {
                let lv = self.verdict(l, w)?;
                if !lv.value {
                    if lv.exact {
                        return Ok(lv);
                    }
                    // An exact refutation on the right settles the conjunction.
                    return Ok(match self.verdict(r, w) {
                        Ok(rv) if !rv.value && rv.exact => rv,
                        _ => lv,
                    });
                }
                let rv = self.verdict(r, w)?;
                Ok(if rv.value {
                    Verdict {
                        value: true,
                        exact: lv.exact && rv.exact,
                    }
                } else {
                    rv
                })
            }
            Node::Know { agent, body } => {
                if let Some(&v) = self.memo.get(&(node, w)) {
                    return Ok(v);
                }
                let members = self.st.component(agent, w);
                let complete = self.st.component_complete(agent, w);
                let v = self.all_of(body, &members, complete)?;
                self.memo.insert((node, w), v);
                Ok(v)
            }
            Node::Reason { agent, body, cond } => {
                if let Some(&v) = self.memo.get(&(node, w)) {
                    return Ok(v);
                }
                let (support, complete) = self.reason_support(agent, cond, w)?;
                let mut v = self.all_of(body, &support, complete)?;
                // Missing states could change which states are maximal.
                v.exact &= complete;
                self.memo.insert((node, w), v);
                Ok(v)
            }
        }
    }

    fn all_of(&mut self, body: NodeId, states: &[S::State], complete: bool) -> Result<Verdict, CheckError> {
        let mut value = true;
        let mut exact = complete;
        for &v in states {
            let bv = self.verdict(body, v)?;
            if !bv.value {
                if bv.exact {
                    return Ok(Verdict::exact(false));
                }
                value = false;
            }
            exact &= bv.exact;
        }
        Ok(Verdict {
            value,
            exact: if value { exact } else { false },
        })
    }

    fn first_with(&mut self, body: NodeId, states: &[S::State], want: bool) -> Result<Option<S::State>, CheckError> {
        for &v in states {
            if self.verdict(body, v)?.value == want {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    /// States explaining why `node` has value `want` at `w`.
    fn witness(&mut self, node: NodeId, w: S::State, want: bool, out: &mut Vec<S::State>) -> Result<(), CheckError> {
        match self.nodes[node as usize] {
            Node::Atom(_) => {}
            Node::Not(f) => self.witness(f, w, !want, out)?,
            Node::And(l, r) => {
                if !want {
                    let side = if self.verdict(l, w)?.value { r } else { l };
                    self.witness(side, w, false, out)?;
                }
            }
            Node::Know { agent, body } => {
                if !want {
                    let members = self.st.component(agent, w);
                    if let Some(v) = self.first_with(body, &members, false)? {
                        out.push(v);
                        self.witness(body, v, false, out)?;
                    }
                }
            }
            Node::Reason { agent, body, cond } => {
                if !want {
                    let (support, _) = self.reason_support(agent, cond, w)?;
                    if let Some(v) = self.first_with(body, &support, false)? {
                        out.push(v);
                        self.witness(body, v, false, out)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluates `phi` at `w` with soundness and witness trace.
    pub fn check(&mut self, phi: &Formula, w: S::State) -> Result<CheckResult<S::State>, CheckError> {
        let node = self.compile(phi)?;
        let v = self.verdict(node, w)?;
        let safe = self
            .st
            .safe_modal_depth(w)
            .is_some_and(|q| self.modal_depth(node) <= q);
        let mut trace = Vec::new();
        self.witness(node, w, v.value, &mut trace)?;
        Ok(CheckResult {
            value: v.value,
            soundness: Soundness::from_exact(v.exact || safe),
            trace,
        })
    }
}

/// One-shot evaluation of `phi` at `w`.
pub fn eval<S, F>(st: &S, sel: &F, w: S::State, phi: &Formula) -> Result<CheckResult<S::State>, CheckError>
where
    S: EpistemicStructure,
    F: Selection<S::State>,
{
    Evaluator::new(st, sel).check(phi, w)
}

/// The largest modal depth whose verdicts at `w` are guaranteed to survive
/// untruncation; zero when the structure gives no guarantee.
pub fn safe_modal_depth<S: EpistemicStructure>(st: &S, w: S::State) -> usize {
    st.safe_modal_depth(w).unwrap_or(0)
}

/// Resolves a state label, reporting unknown labels as errors.
pub fn resolve_state<S: EpistemicStructure>(st: &S, label: &str) -> Result<S::State, CheckError> {
    st.resolve(label)
        .ok_or_else(|| CheckError::UnknownState(label.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::butterfly::Flutter;
    use crate::formula::{agent_list, parse, AgentId};
    use crate::model::{load_model, NamedSelection};

    fn rc() -> Vec<AgentId> {
        agent_list("R C").unwrap()
    }

    fn flutter() -> Flutter {
        Flutter::new(0, 600, 50, 6, &rc()).unwrap()
    }

    #[test]
    fn key_fact_examples_at_center() {
        let f = flutter();
        let w = f.center(300).unwrap();
        let r = eval(&f, &f, w, &parse("K_R([250] | [300] | [350])").unwrap()).unwrap();
        assert!(r.value);
        assert_eq!(r.soundness, Soundness::Exact);
        assert!(eval(&f, &f, w, &parse("R_R([300] || true)").unwrap()).unwrap().value);

        let r = eval(&f, &f, w, &parse("K_R [300]").unwrap()).unwrap();
        assert!(!r.value);
        assert_eq!(r.trace, [f.resolve("b300:w1").unwrap()]);
    }

    #[test]
    fn diamond_trace_follows_chain() {
        let f = flutter();
        let w = f.center(300).unwrap();
        let r = eval(&f, &f, w, &parse("<K_R><K_C>[200]").unwrap()).unwrap();
        assert!(r.value);
        let labels: Vec<String> = r.trace.iter().map(|s| s.to_string()).collect();
        assert_eq!(labels, ["b300:w1", "b300:w1-"]);
    }

    #[test]
    fn unknown_agent_and_atom() {
        let f = flutter();
        let w = f.center(300).unwrap();
        assert_eq!(
            eval(&f, &f, w, &parse("K_D [300]").unwrap()),
            Err(CheckError::UnknownAgent("D".into()))
        );
        let (m, t) = load_model("agents: R\nstates: a\natom [1]: a\nselect true a: a\n").unwrap();
        let sel = NamedSelection { model: &m, table: &t };
        let a = m.state("a").unwrap();
        assert_eq!(
            eval(&m, &sel, a, &parse("[2]").unwrap()),
            Err(CheckError::UnknownAtom(Atom::Height(2)))
        );
        assert!(matches!(
            eval(&m, &sel, a, &parse("R_R([1] || [1])").unwrap()),
            Err(CheckError::Selection(SelectionError::MissingSelectionTarget { .. }))
        ));
        assert!(eval(&m, &sel, a, &parse("R_R([1])").unwrap()).unwrap().value);
    }

    #[test]
    fn missing_butterfly_propagates() {
        let f = flutter();
        let w = f.center(300).unwrap();
        assert_eq!(
            eval(&f, &f, w, &parse("R_R([700] || [700])").unwrap()),
            Err(CheckError::Selection(SelectionError::MissingButterfly(700)))
        );
    }

    #[test]
    fn frontier_contamination_is_reported() {
        let f = Flutter::new(0, 600, 50, 0, &rc()).unwrap();
        let leaf = f.resolve("b300:w1").unwrap();
        // w1's C-component would contain its missing children.
        let r = eval(&f, &f, leaf, &parse("K_C [250]").unwrap()).unwrap();
        assert!(r.value);
        assert_eq!(r.soundness, Soundness::FrontierContaminated);
        // Its R-component is complete and refutes the claim exactly.
        let r = eval(&f, &f, leaf, &parse("K_R [250]").unwrap()).unwrap();
        assert!(!r.value);
        assert_eq!(r.soundness, Soundness::Exact);
    }

    #[test]
    fn reason_reads_the_selected_component() {
        let text = "\
agents: R
states: a b c
atom [1]: a c
atom [2]: b
order R closure=auto: c<b
select [1] *: c
select true *: a
";
        let (m, t) = load_model(text).unwrap();
        let sel = NamedSelection { model: &m, table: &t };
        let a = m.state("a").unwrap();
        // f([1], a) = c, [c]_R = {b, c}, and c is the only [1]-state there.
        assert!(eval(&m, &sel, a, &parse("R_R([1] || [1])").unwrap()).unwrap().value);
        assert!(!eval(&m, &sel, a, &parse("R_R([2] || [1])").unwrap()).unwrap().value);
        // Unconditionally, a's own component {a} is used.
        assert!(eval(&m, &sel, a, &parse("R_R([1])").unwrap()).unwrap().value);
    }
}
