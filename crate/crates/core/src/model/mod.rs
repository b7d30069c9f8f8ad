//! Explicit finite epistemic-plausibility models.
//!
//! A [`Model`] stores each agent's plausibility preorder closed under
//! reflexivity and transitivity, the valuation, the epistemic components
//! `[w]_i` and the set of frontier states. Models are immutable once built.
//!
//! `[w]_i` is the connected component of `w` in the comparability graph of
//! `≤_i`, i.e. the equivalence relation generated by comparability. Raw
//! comparability is not transitive in general; [`Model::comparability_gaps`]
//! lists the pairs where the two readings differ.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use petgraph::unionfind::UnionFind;
use thiserror::Error;

use crate::formula::{AgentId, Atom};
use crate::structure::{EpistemicStructure, Selection, SelectionError};

mod format;

pub use format::{load_model, save_model, to_dot, FormatError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("model has no states")]
    EmptyStates,
    #[error("model declares no agents")]
    NoAgents,
    #[error("duplicate state id {0}")]
    DuplicateState(String),
    #[error("duplicate agent {0}")]
    DuplicateAgent(AgentId),
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("unknown agent {0}")]
    UnknownAgent(String),
    #[error("order for {agent} is not reflexive at {state}")]
    NotReflexive { agent: AgentId, state: String },
    #[error("order for {agent} is not transitive via ({a}, {b}, {c})")]
    NotTransitive {
        agent: AgentId,
        a: String,
        b: String,
        c: String,
    },
    #[error("V(true) must be the whole state set")]
    TopNotTotal,
}

/// How the pairs given for an order are turned into a preorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Pairs are generators; the reflexive-transitive closure is taken.
    Auto,
    /// Pairs are the full relation and must already be a preorder.
    None,
}

/// A preorder `≤_i`, stored closed.
#[derive(Debug, Clone)]
pub struct PlausibilityOrder {
    agent: AgentId,
    /// `above[w]`: every `v` with `w ≤ v`, sorted.
    above: Vec<Vec<usize>>,
}

impl PlausibilityOrder {
    pub fn agent(&self) -> &AgentId {
        &self.agent
    }

    pub fn less_eq(&self, a: StateId, b: StateId) -> bool {
        self.above[a.0].binary_search(&b.0).is_ok()
    }

    pub fn strictly_less(&self, a: StateId, b: StateId) -> bool {
        self.less_eq(a, b) && !self.less_eq(b, a)
    }

    /// All pairs `(a, b)` with `a ≤ b`, reflexive ones included.
    pub fn pairs(&self) -> impl Iterator<Item = (StateId, StateId)> + '_ {
        self.above
            .iter()
            .enumerate()
            .flat_map(|(a, ups)| ups.iter().map(move |&b| (StateId(a), StateId(b))))
    }

    pub fn len(&self) -> usize {
        self.above.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.above.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Components {
    of: Vec<usize>,
    members: Vec<Vec<StateId>>,
}

#[derive(Debug, Clone)]
pub struct Model {
    agents: Vec<AgentId>,
    names: Vec<String>,
    index: HashMap<String, usize>,
    orders: Vec<PlausibilityOrder>,
    components: Vec<Components>,
    valuation: BTreeMap<u64, Vec<StateId>>,
    heights_at: Vec<Vec<u64>>,
    frontier: Vec<bool>,
}

/// Incremental construction of a [`Model`]; [`build`](Self::build) closes
/// and validates the orders.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    agents: Vec<AgentId>,
    names: Vec<String>,
    index: HashMap<String, usize>,
    heights: BTreeMap<u64, BTreeSet<usize>>,
    pairs: Vec<Vec<(usize, usize)>>,
    closure: Vec<Closure>,
    frontier: BTreeSet<usize>,
}

impl ModelBuilder {
    pub fn new(agents: Vec<AgentId>) -> Result<Self, ModelError> {
        if agents.is_empty() {
            return Err(ModelError::NoAgents);
        }
        for (i, a) in agents.iter().enumerate() {
            if agents[..i].contains(a) {
                return Err(ModelError::DuplicateAgent(a.clone()));
            }
        }
        let n = agents.len();
        Ok(ModelBuilder {
            agents,
            names: Vec::new(),
            index: HashMap::new(),
            heights: BTreeMap::new(),
            pairs: vec![Vec::new(); n],
            closure: vec![Closure::Auto; n],
            frontier: BTreeSet::new(),
        })
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn state(&mut self, name: impl Into<String>) -> Result<StateId, ModelError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(ModelError::DuplicateState(name));
        }
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        Ok(StateId(id))
    }

    pub fn lookup(&self, name: &str) -> Result<StateId, ModelError> {
        self.index
            .get(name)
            .map(|&i| StateId(i))
            .ok_or_else(|| ModelError::UnknownState(name.to_string()))
    }

    pub fn state_count(&self) -> usize {
        self.names.len()
    }

    fn agent_pos(&self, agent: &AgentId) -> Result<usize, ModelError> {
        self.agents
            .iter()
            .position(|a| a == agent)
            .ok_or_else(|| ModelError::UnknownAgent(agent.to_string()))
    }

    pub fn height(&mut self, n: u64, s: StateId) -> &mut Self {
        self.heights.entry(n).or_default().insert(s.0);
        self
    }

    /// Records `a ≤_agent b`.
    pub fn order_pair(&mut self, agent: &AgentId, a: StateId, b: StateId) -> Result<&mut Self, ModelError> {
        let i = self.agent_pos(agent)?;
        self.pairs[i].push((a.0, b.0));
        Ok(self)
    }

    pub fn closure(&mut self, agent: &AgentId, closure: Closure) -> Result<&mut Self, ModelError> {
        let i = self.agent_pos(agent)?;
        self.closure[i] = closure;
        Ok(self)
    }

    pub fn frontier(&mut self, s: StateId) -> &mut Self {
        self.frontier.insert(s.0);
        self
    }

    pub fn build(self) -> Result<Model, ModelError> {
        let n = self.names.len();
        if n == 0 {
            return Err(ModelError::EmptyStates);
        }
        let mut orders = Vec::with_capacity(self.agents.len());
        for (i, agent) in self.agents.iter().enumerate() {
            let above = match self.closure[i] {
                Closure::Auto => close(n, &self.pairs[i]),
                Closure::None => self.check_preorder(agent, &self.pairs[i])?,
            };
            orders.push(PlausibilityOrder {
                agent: agent.clone(),
                above,
            });
        }
        let components = orders.iter().map(|o| components_of(n, o)).collect();
        let mut heights_at = vec![Vec::new(); n];
        let mut valuation = BTreeMap::new();
        for (h, states) in &self.heights {
            for &s in states {
                heights_at[s].push(*h);
            }
            valuation.insert(*h, states.iter().map(|&s| StateId(s)).collect());
        }
        let mut frontier = vec![false; n];
        for &s in &self.frontier {
            frontier[s] = true;
        }
        Ok(Model {
            agents: self.agents,
            names: self.names,
            index: self.index,
            orders,
            components,
            valuation,
            heights_at,
            frontier,
        })
    }

    fn check_preorder(&self, agent: &AgentId, pairs: &[(usize, usize)]) -> Result<Vec<Vec<usize>>, ModelError> {
        let n = self.names.len();
        let mut above: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(a, b) in pairs {
            above[a].insert(b);
        }
        for (w, ups) in above.iter().enumerate() {
            if !ups.contains(&w) {
                return Err(ModelError::NotReflexive {
                    agent: agent.clone(),
                    state: self.names[w].clone(),
                });
            }
        }
        for (a, ups) in above.iter().enumerate() {
            for &b in ups {
                for &c in &above[b] {
                    if !ups.contains(&c) {
                        return Err(ModelError::NotTransitive {
                            agent: agent.clone(),
                            a: self.names[a].clone(),
                            b: self.names[b].clone(),
                            c: self.names[c].clone(),
                        });
                    }
                }
            }
        }
        Ok(above.into_iter().map(|s| s.into_iter().collect()).collect())
    }
}

/// Reflexive-transitive closure by a search from every state.
fn close(n: usize, pairs: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in pairs {
        succ[a].push(b);
    }
    let mut above = Vec::with_capacity(n);
    let mut seen = vec![usize::MAX; n];
    for start in 0..n {
        let mut reach = vec![start];
        seen[start] = start;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for &y in &succ[x] {
                if seen[y] != start {
                    seen[y] = start;
                    reach.push(y);
                    queue.push_back(y);
                }
            }
        }
        reach.sort_unstable();
        above.push(reach);
    }
    above
}

fn components_of(n: usize, order: &PlausibilityOrder) -> Components {
    let mut uf = UnionFind::<usize>::new(n);
    for (a, b) in order.pairs() {
        uf.union(a.0, b.0);
    }
    let labels = uf.into_labeling();
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut members: Vec<Vec<StateId>> = Vec::new();
    let mut of = vec![0; n];
    for (s, root) in labels.into_iter().enumerate() {
        let next = members.len();
        let c = *ids.entry(root).or_insert(next);
        if c == members.len() {
            members.push(Vec::new());
        }
        members[c].push(StateId(s));
        of[s] = c;
    }
    Components { of, members }
}

impl Model {
    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.names.len()).map(StateId)
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s.0]
    }

    pub fn state(&self, name: &str) -> Result<StateId, ModelError> {
        self.index
            .get(name)
            .map(|&i| StateId(i))
            .ok_or_else(|| ModelError::UnknownState(name.to_string()))
    }

    pub fn agent(&self, agent: &AgentId) -> Result<usize, ModelError> {
        self.agents
            .iter()
            .position(|a| a == agent)
            .ok_or_else(|| ModelError::UnknownAgent(agent.to_string()))
    }

    pub fn order(&self, agent: usize) -> &PlausibilityOrder {
        &self.orders[agent]
    }

    /// `[w]_agent`.
    pub fn epistemic_component(&self, agent: &AgentId, w: StateId) -> Result<&[StateId], ModelError> {
        let i = self.agent(agent)?;
        if w.0 >= self.len() {
            return Err(ModelError::UnknownState(w.to_string()));
        }
        Ok(self.component_slice(i, w))
    }

    fn component_slice(&self, agent: usize, w: StateId) -> &[StateId] {
        let comps = &self.components[agent];
        &comps.members[comps.of[w.0]]
    }

    /// `max_{≤_agent}(xs)`.
    pub fn max_plausible(&self, agent: &AgentId, xs: &[StateId]) -> Result<Vec<StateId>, ModelError> {
        let i = self.agent(agent)?;
        Ok(max_plausible(self, i, xs))
    }

    /// `V([n])`.
    pub fn extension(&self, n: u64) -> &[StateId] {
        self.valuation.get(&n).map_or(&[], Vec::as_slice)
    }

    pub fn heights(&self) -> impl Iterator<Item = u64> + '_ {
        self.valuation.keys().copied()
    }

    pub fn heights_at(&self, s: StateId) -> &[u64] {
        &self.heights_at[s.0]
    }

    pub fn is_frontier_state(&self, s: StateId) -> bool {
        self.frontier[s.0]
    }

    pub fn frontier_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.state_ids().filter(|s| self.frontier[s.0])
    }

    /// Pairs `(w, v)` in one `[·]_agent` component that are not directly
    /// comparable; these are where raw comparability and the generated
    /// equivalence disagree.
    pub fn comparability_gaps(&self, agent: usize) -> Vec<(StateId, StateId)> {
        let order = &self.orders[agent];
        let mut out = Vec::new();
        for members in &self.components[agent].members {
            for (x, &a) in members.iter().enumerate() {
                for &b in &members[x + 1..] {
                    if !order.less_eq(a, b) && !order.less_eq(b, a) {
                        out.push((a, b));
                    }
                }
            }
        }
        out
    }
}

/// `{w ∈ xs : no v ∈ xs with w <_agent v}`.
pub fn max_plausible<St: EpistemicStructure>(st: &St, agent: usize, xs: &[St::State]) -> Vec<St::State> {
    xs.iter()
        .copied()
        .filter(|&w| !xs.iter().any(|&v| st.strictly_less(agent, w, v)))
        .collect()
}

impl EpistemicStructure for Model {
    type State = StateId;

    fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    fn component(&self, agent: usize, s: StateId) -> Vec<StateId> {
        self.component_slice(agent, s).to_vec()
    }

    fn less_eq(&self, agent: usize, a: StateId, b: StateId) -> bool {
        self.orders[agent].less_eq(a, b)
    }

    fn satisfies(&self, atom: Atom, s: StateId) -> bool {
        match atom {
            Atom::Top => true,
            Atom::Height(n) => self.heights_at[s.0].contains(&n),
        }
    }

    fn declares_atom(&self, atom: Atom) -> bool {
        match atom {
            Atom::Top => true,
            Atom::Height(n) => self.valuation.contains_key(&n),
        }
    }

    fn is_frontier(&self, s: StateId) -> bool {
        self.frontier[s.0]
    }

    fn safe_modal_depth(&self, _s: StateId) -> Option<usize> {
        // Without frontier states the model is the whole structure.
        (!self.frontier.iter().any(|&f| f)).then_some(usize::MAX)
    }

    fn label(&self, s: StateId) -> String {
        self.names[s.0].clone()
    }

    fn height_of(&self, s: StateId) -> Option<u64> {
        match self.heights_at[s.0].as_slice() {
            [h] => Some(*h),
            _ => None,
        }
    }

    fn resolve(&self, label: &str) -> Option<StateId> {
        self.index.get(label).map(|&i| StateId(i))
    }

    fn states(&self) -> Vec<StateId> {
        self.state_ids().collect()
    }

    fn max_height(&self) -> Option<u64> {
        self.valuation.keys().next_back().copied()
    }
}

/// A selection function given by an explicit table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableSelection {
    table: BTreeMap<(Atom, StateId), StateId>,
}

impl TableSelection {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `f(atom, w) = target`, enforcing the success postulate.
    pub fn insert(&mut self, model: &Model, atom: Atom, w: StateId, target: StateId) -> Result<(), SelectionError> {
        if !model.satisfies(atom, target) {
            return Err(SelectionError::SuccessViolation {
                atom,
                target: model.name(target).to_string(),
            });
        }
        self.table.insert((atom, w), target);
        Ok(())
    }

    /// `f(atom, w) = target` for every `w`.
    pub fn insert_all(&mut self, model: &Model, atom: Atom, target: StateId) -> Result<(), SelectionError> {
        for w in model.state_ids() {
            self.insert(model, atom, w, target)?;
        }
        Ok(())
    }

    pub fn get(&self, atom: Atom, w: StateId) -> Option<StateId> {
        self.table.get(&(atom, w)).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Atom, StateId, StateId)> + '_ {
        self.table.iter().map(|(&(a, w), &t)| (a, w, t))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Re-checks the success postulate for every entry.
    pub fn verify(&self, model: &Model) -> Result<(), SelectionError> {
        for (atom, _, target) in self.entries() {
            if !model.satisfies(atom, target) {
                return Err(SelectionError::SuccessViolation {
                    atom,
                    target: model.name(target).to_string(),
                });
            }
        }
        Ok(())
    }
}

impl Selection<StateId> for TableSelection {
    fn select(&self, atom: Atom, w: StateId) -> Result<StateId, SelectionError> {
        self.get(atom, w)
            .ok_or_else(|| SelectionError::MissingSelectionTarget {
                atom,
                state: w.to_string(),
            })
    }
}

/// Wraps a table so that missing-target errors name states by their ids.
pub struct NamedSelection<'a> {
    pub model: &'a Model,
    pub table: &'a TableSelection,
}

impl Selection<StateId> for NamedSelection<'_> {
    fn select(&self, atom: Atom, w: StateId) -> Result<StateId, SelectionError> {
        self.table
            .get(atom, w)
            .ok_or_else(|| SelectionError::MissingSelectionTarget {
                atom,
                state: self.model.name(w).to_string(),
            })
    }
}
