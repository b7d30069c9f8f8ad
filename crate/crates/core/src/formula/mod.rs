//! Syntax of the conditional reasons-to-believe / knowledge language.
//!
//! The core AST is deliberately minimal: atoms, `true`, conjunction,
//! negation, `R_i(φ | p)` with an atomic condition, and `K_i φ`. Everything
//! else (disjunction, implication, the duals, iterated reasons `r^n` and
//! alternating diamond chains) is sugar that is expanded when it is built or
//! parsed, so a single semantics serves every operator.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

mod parser;

pub use parser::{parse, FormulaParser, ParseError, ParseErrorKind};

/// Name of an agent. Nonempty and ASCII alphanumeric.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Result<Self, FormulaError> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(FormulaError::InvalidAgent(name));
        }
        Ok(AgentId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parses a whitespace or comma separated agent list such as `"R C"`.
pub fn agent_list(text: &str) -> Result<Vec<AgentId>, FormulaError> {
    let agents = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(AgentId::new)
        .collect::<Result<Vec<_>, _>>()?;
    let distinct: BTreeSet<_> = agents.iter().collect();
    if distinct.len() != agents.len() {
        return Err(FormulaError::DuplicateAgent);
    }
    Ok(agents)
}

/// Propositional letters: `⊤` or a height `[n]` in centimetres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Top,
    Height(u64),
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Top => f.write_str("true"),
            Atom::Height(n) => write!(f, "[{n}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Atom),
    And(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    /// `R_agent(body | cond)`; the condition is always an atom.
    Reason {
        agent: AgentId,
        body: Box<Formula>,
        cond: Atom,
    },
    Know {
        agent: AgentId,
        body: Box<Formula>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("invalid agent name {0:?} (expected nonempty alphanumeric)")]
    InvalidAgent(String),
    #[error("duplicate agent in agent set")]
    DuplicateAgent,
    #[error("agent set is empty")]
    NoAgents,
    #[error("alternating chains need exactly two agents, found {0}")]
    AgentSetSize(usize),
    #[error("agent {0} is not in the agent set")]
    UnknownAgent(AgentId),
}

impl Formula {
    pub fn atom(atom: Atom) -> Self {
        Formula::Atom(atom)
    }

    pub fn height(n: u64) -> Self {
        Formula::Atom(Atom::Height(n))
    }

    pub fn top() -> Self {
        Formula::Atom(Atom::Top)
    }

    /// `¬⊤`.
    pub fn bottom() -> Self {
        Formula::not(Formula::top())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    /// `φ ∨ ψ` as `¬(¬φ ∧ ¬ψ)`.
    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::not(Formula::and(Formula::not(l), Formula::not(r)))
    }

    /// `φ → ψ` as `¬(φ ∧ ¬ψ)`.
    pub fn implies(l: Formula, r: Formula) -> Self {
        Formula::not(Formula::and(l, Formula::not(r)))
    }

    pub fn reason(agent: AgentId, body: Formula, cond: Atom) -> Self {
        Formula::Reason {
            agent,
            body: Box::new(body),
            cond,
        }
    }

    /// Unconditional reason `R_i(φ)`, i.e. `R_i(φ | ⊤)`.
    pub fn reason_uncond(agent: AgentId, body: Formula) -> Self {
        Formula::reason(agent, body, Atom::Top)
    }

    pub fn know(agent: AgentId, body: Formula) -> Self {
        Formula::Know {
            agent,
            body: Box::new(body),
        }
    }

    /// `⟨K_i⟩φ` as `¬K_i¬φ`.
    pub fn diamond(agent: AgentId, body: Formula) -> Self {
        Formula::not(Formula::know(agent, Formula::not(body)))
    }

    /// `⟨R_i⟩(φ | p)` as `¬R_i(¬φ | p)`.
    pub fn dual_reason(agent: AgentId, body: Formula, cond: Atom) -> Self {
        Formula::not(Formula::reason(agent, Formula::not(body), cond))
    }

    /// Left-nested conjunction; `⊤` when empty.
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or_else(Formula::top)
    }

    /// Left-nested disjunction; `¬⊤` when empty.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or_else(Formula::bottom)
    }

    /// Disjunction of the height atoms in `heights`, nested as a balanced
    /// tree so that long disjunctions stay shallow.
    pub fn any_height(heights: impl IntoIterator<Item = u64>) -> Self {
        fn build(items: &[u64]) -> Formula {
            match items {
                [] => Formula::bottom(),
                [n] => Formula::height(*n),
                _ => {
                    let (l, r) = items.split_at(items.len() / 2);
                    Formula::or(build(l), build(r))
                }
            }
        }
        let items: Vec<u64> = heights.into_iter().collect();
        build(&items)
    }

    pub fn modal_depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(f) => f.modal_depth(),
            Formula::And(l, r) => l.modal_depth().max(r.modal_depth()),
            Formula::Reason { body, .. } | Formula::Know { body, .. } => 1 + body.modal_depth(),
        }
    }

    pub fn agents(&self) -> BTreeSet<AgentId> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Reason { agent, .. } | Formula::Know { agent, .. } => {
                out.insert(agent.clone());
            }
            _ => {}
        });
        out
    }

    /// Every atom occurring in the formula, conditions included.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Formula::Atom(a) => {
                out.insert(*a);
            }
            Formula::Reason { cond, .. } => {
                out.insert(*cond);
            }
            _ => {}
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self {
            Formula::Atom(_) => {}
            Formula::Not(x) => x.visit(f),
            Formula::And(l, r) => {
                l.visit(f);
                r.visit(f);
            }
            Formula::Reason { body, .. } | Formula::Know { body, .. } => body.visit(f),
        }
    }
}

/// Derived operators of the language, kept as data until expanded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DerivedForm {
    Or(Formula, Formula),
    Implies(Formula, Formula),
    ReasonUncond(AgentId, Formula),
    DiamondK(AgentId, Formula),
    DualReason(AgentId, Formula, Atom),
    IterReason {
        depth: usize,
        body: Formula,
        cond: Atom,
    },
    DiamondChain {
        first: AgentId,
        depth: usize,
        body: Formula,
    },
}

impl DerivedForm {
    /// Expands to a core formula. `agents` is the group used by the iterated
    /// operators.
    pub fn expand(self, agents: &[AgentId]) -> Result<Formula, FormulaError> {
        Ok(match self {
            DerivedForm::Or(l, r) => Formula::or(l, r),
            DerivedForm::Implies(l, r) => Formula::implies(l, r),
            DerivedForm::ReasonUncond(i, f) => Formula::reason_uncond(i, f),
            DerivedForm::DiamondK(i, f) => Formula::diamond(i, f),
            DerivedForm::DualReason(i, f, p) => Formula::dual_reason(i, f, p),
            DerivedForm::IterReason { depth, body, cond } => {
                expand_iter_reason(depth, &body, cond, agents)?
            }
            DerivedForm::DiamondChain { first, depth, body } => {
                expand_diamond_chain(&first, depth, &body, agents)?
            }
        })
    }
}

/// `r^0(φ|p) = ⋀_i R_i(φ|p)` and `r^{k+1}(φ|p) = ⋀_i R_i(r^k(φ|p) | p)`,
/// written out literally.
pub fn expand_iter_reason(
    depth: usize,
    body: &Formula,
    cond: Atom,
    agents: &[AgentId],
) -> Result<Formula, FormulaError> {
    if agents.is_empty() {
        return Err(FormulaError::NoAgents);
    }
    let level = |inner: &Formula| {
        Formula::conj(
            agents
                .iter()
                .map(|i| Formula::reason(i.clone(), inner.clone(), cond)),
        )
    };
    let mut current = level(body);
    for _ in 0..depth {
        current = level(&current);
    }
    Ok(current)
}

/// `⟨K^0_i⟩φ = ⟨K_i⟩φ` and `⟨K^{k+1}_i⟩φ = ⟨K_i⟩⟨K^k_j⟩φ` with `j` the
/// other agent of a two-agent set.
pub fn expand_diamond_chain(
    first: &AgentId,
    depth: usize,
    body: &Formula,
    agents: &[AgentId],
) -> Result<Formula, FormulaError> {
    let other = other_agent(first, agents)?;
    // The innermost diamond belongs to `first` when depth is even.
    let mut current = body.clone();
    for step in (0..=depth).rev() {
        let agent = if step % 2 == 0 { first } else { other };
        current = Formula::diamond(agent.clone(), current);
    }
    Ok(current)
}

/// The unique `j ≠ i` of a two-agent set.
pub fn other_agent<'a>(first: &AgentId, agents: &'a [AgentId]) -> Result<&'a AgentId, FormulaError> {
    if agents.len() != 2 {
        return Err(FormulaError::AgentSetSize(agents.len()));
    }
    if !agents.contains(first) {
        return Err(FormulaError::UnknownAgent(first.clone()));
    }
    Ok(agents.iter().find(|a| *a != first).expect("two distinct agents"))
}

// Printing. Binary connectives are always parenthesized so the output parses
// back to the same tree; `¬(¬φ∧¬ψ)`, `¬(φ∧¬ψ)` and `¬K_i¬φ` are shown with
// their sugar, which the parser expands to exactly those trees.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(inner) => match inner.as_ref() {
                Formula::And(l, r) => match (l.as_ref(), r.as_ref()) {
                    (Formula::Not(x), Formula::Not(y)) => write!(f, "({x} | {y})"),
                    (x, Formula::Not(y)) => write!(f, "({x} -> {y})"),
                    _ => write!(f, "!{inner}"),
                },
                Formula::Know { agent, body } => match body.as_ref() {
                    Formula::Not(x) => write!(f, "<K_{agent}>{x}"),
                    _ => write!(f, "!{inner}"),
                },
                _ => write!(f, "!{inner}"),
            },
            Formula::And(l, r) => write!(f, "({l} & {r})"),
            Formula::Reason { agent, body, cond } => write!(f, "R_{agent}({body} || {cond})"),
            Formula::Know { agent, body } => write!(f, "K_{agent} {body}"),
        }
    }
}
