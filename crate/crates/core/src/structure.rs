//! The interface the checker evaluates against.
//!
//! Both explicit [`Model`](crate::model::Model)s and rule-generated
//! [`Flutter`](crate::butterfly::Flutter)s implement it, so the truth
//! conditions are written once.

use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

use crate::formula::{AgentId, Atom};

/// A finite (possibly truncated) epistemic-plausibility structure.
///
/// Agents are addressed by their index in [`agents`](Self::agents).
pub trait EpistemicStructure {
    type State: Copy + Eq + Ord + Hash + Debug;

    fn agents(&self) -> &[AgentId];

    fn agent_index(&self, agent: &AgentId) -> Option<usize> {
        self.agents().iter().position(|a| a == agent)
    }

    /// `[s]_i`, sorted, always containing `s`.
    fn component(&self, agent: usize, s: Self::State) -> Vec<Self::State>;

    /// `a ≤_i b`.
    fn less_eq(&self, agent: usize, a: Self::State, b: Self::State) -> bool;

    fn strictly_less(&self, agent: usize, a: Self::State, b: Self::State) -> bool {
        self.less_eq(agent, a, b) && !self.less_eq(agent, b, a)
    }

    fn satisfies(&self, atom: Atom, s: Self::State) -> bool;

    /// Whether formulas may mention `atom`.
    fn declares_atom(&self, _atom: Atom) -> bool {
        true
    }

    /// False when `[s]_i` may lose members to truncation.
    fn component_complete(&self, _agent: usize, s: Self::State) -> bool {
        !self.is_frontier(s)
    }

    fn is_frontier(&self, _s: Self::State) -> bool {
        false
    }

    /// Largest modal depth whose verdicts at `s` are guaranteed to match the
    /// untruncated structure, when the structure knows one.
    fn safe_modal_depth(&self, _s: Self::State) -> Option<usize> {
        None
    }

    /// Lower bound on the number of `≈`-steps from `s` to any state
    /// satisfying `target`. Must never overestimate.
    fn min_steps_to(&self, _s: Self::State, _target: Atom) -> usize {
        0
    }

    fn label(&self, s: Self::State) -> String;

    /// The height atom of `s` when it has exactly one.
    fn height_of(&self, s: Self::State) -> Option<u64>;

    fn resolve(&self, label: &str) -> Option<Self::State>;

    /// Every state, in a deterministic order.
    fn states(&self) -> Vec<Self::State>;

    /// Largest height that occurs in the structure.
    fn max_height(&self) -> Option<u64>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("selection function has no target for ({atom}, {state})")]
    MissingSelectionTarget { atom: Atom, state: String },
    #[error("no butterfly centered on {0} in the flutter")]
    MissingButterfly(u64),
    #[error("selected state {target} does not satisfy {atom} (success postulate)")]
    SuccessViolation { atom: Atom, target: String },
}

/// A selection function `f : Prop × W → W`.
pub trait Selection<S> {
    fn select(&self, atom: Atom, w: S) -> Result<S, SelectionError>;
}
