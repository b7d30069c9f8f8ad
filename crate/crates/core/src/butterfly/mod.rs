//! Butterfly models and flutters.
//!
//! The body of the `k`-centered butterfly has a center `w0` of height `k`,
//! two states `w1 [k−m]`, `w2 [k+m]` below it for the first agent and two
//! states `w3 [k−m]`, `w4 [k+m]` below it for the second. Every wing level
//! gives each leaf `w` of height `n` a `[n−m]` child (omitted when `n−m < 0`)
//! and a `[n+m]` child, both below `w` for the agent that did *not* connect
//! `w` to its parent. A depth-`d` butterfly has wing levels `1..=d`; its
//! deepest states are flagged frontier.
//!
//! Explicit models are built by [`build_butterfly`]. [`Flutter`] represents
//! whole families of butterflies implicitly so that deep truncations stay
//! cheap.

use thiserror::Error;

use crate::formula::{AgentId, Atom};
use crate::model::{Closure, Model, ModelBuilder, ModelError, StateId, TableSelection};
use crate::structure::{EpistemicStructure, SelectionError};

mod flutter;

pub use flutter::{read_flutter_dir, write_flutter_dir, Flutter, FlutterState, SELECTION_RULE};

/// Largest depth accepted by [`build_butterfly`]; `5 + 8(2^16 − 1)` states.
pub const MAX_EXPLICIT_DEPTH: u32 = 16;

#[derive(Debug, Error)]
pub enum ButterflyError {
    #[error("butterfly needs k − m > 0 (k = {center}, m = {margin})")]
    NonPositiveBase { center: u64, margin: u64 },
    #[error("margin must be at least 1")]
    ZeroMargin,
    #[error("depth {depth} exceeds the supported maximum {max}")]
    DepthTooLarge { depth: u32, max: u32 },
    #[error("butterflies need exactly two agents, got {0}")]
    AgentCount(usize),
    #[error("empty center range [{lo}, {hi}]")]
    EmptyRange { lo: u64, hi: u64 },
    #[error("flutter has no butterfly centered on {0}")]
    NotInFlutter(u64),
    #[error("state {0} has no single height")]
    NoHeight(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ButterflyParams {
    pub center: u64,
    pub margin: u64,
    pub depth: u32,
}

impl ButterflyParams {
    pub fn new(center: u64, margin: u64, depth: u32) -> Result<Self, ButterflyError> {
        let params = Self {
            center,
            margin,
            depth,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ButterflyError> {
        if self.margin == 0 {
            return Err(ButterflyError::ZeroMargin);
        }
        if self.center <= self.margin {
            return Err(ButterflyError::NonPositiveBase {
                center: self.center,
                margin: self.margin,
            });
        }
        Ok(())
    }
}

fn check_agents(agents: &[AgentId]) -> Result<(), ButterflyError> {
    if agents.len() != 2 {
        return Err(ButterflyError::AgentCount(agents.len()));
    }
    Ok(())
}

/// The five-state body; the four non-center states are frontier.
pub fn build_body(params: ButterflyParams, agents: &[AgentId]) -> Result<Model, ButterflyError> {
    params.validate()?;
    check_agents(agents)?;
    let (k, m) = (params.center, params.margin);
    let mut b = ModelBuilder::new(agents.to_vec())?;
    let w: Vec<StateId> = (0..5)
        .map(|i| b.state(format!("w{i}")))
        .collect::<Result<_, _>>()?;
    b.height(k, w[0]);
    b.height(k - m, w[1]).height(k - m, w[3]);
    b.height(k + m, w[2]).height(k + m, w[4]);
    b.order_pair(&agents[0], w[1], w[0])?;
    b.order_pair(&agents[0], w[2], w[0])?;
    b.order_pair(&agents[1], w[3], w[0])?;
    b.order_pair(&agents[1], w[4], w[0])?;
    for &s in &w[1..] {
        b.frontier(s);
    }
    Ok(b.build()?)
}

/// The agent that relates `w` to a state strictly above it, when that agent
/// is unique and nothing lies strictly below `w` (an `i`-terminating state).
fn terminating_agent(below: &[Vec<bool>], above: &[Vec<bool>], w: StateId) -> Option<usize> {
    if below.iter().any(|b| b[w.0]) {
        return None;
    }
    let mut ups = above.iter().enumerate().filter(|(_, a)| a[w.0]);
    match (ups.next(), ups.next()) {
        (Some((i, _)), None) => Some(i),
        _ => None,
    }
}

/// Adds `levels` wing levels to a butterfly. Children are named after their
/// parent with a `-` or `+` suffix.
pub fn extend_wings(model: &Model, margin: u64, levels: u32) -> Result<Model, ButterflyError> {
    check_agents(model.agents())?;
    if margin == 0 {
        return Err(ButterflyError::ZeroMargin);
    }
    let mut current = model.clone();
    for _ in 0..levels {
        current = extend_once(&current, margin)?;
    }
    Ok(current)
}

fn extend_once(model: &Model, margin: u64) -> Result<Model, ButterflyError> {
    let agents = model.agents().to_vec();
    // below[i][w] / above[i][w]: something is strictly below / above w for i
    let mut below = vec![vec![false; model.len()]; agents.len()];
    let mut above = below.clone();
    for i in 0..agents.len() {
        for (a, b) in model.order(i).pairs() {
            if model.order(i).strictly_less(a, b) {
                below[i][b.0] = true;
                above[i][a.0] = true;
            }
        }
    }

    let mut b = ModelBuilder::new(agents.clone())?;
    for s in model.state_ids() {
        b.state(model.name(s))?;
        for &h in model.heights_at(s) {
            b.height(h, s);
        }
    }
    for (i, agent) in agents.iter().enumerate() {
        b.closure(agent, Closure::Auto)?;
        for (x, y) in model.order(i).pairs().filter(|(x, y)| x != y) {
            b.order_pair(agent, x, y)?;
        }
    }
    for w in model.state_ids() {
        let Some(i) = terminating_agent(&below, &above, w) else {
            continue;
        };
        let j = &agents[1 - i];
        let n = model
            .height_of(w)
            .ok_or_else(|| ButterflyError::NoHeight(model.name(w).to_string()))?;
        if let Some(lower) = n.checked_sub(margin) {
            let v = b.state(format!("{}-", model.name(w)))?;
            b.height(lower, v).frontier(v);
            b.order_pair(j, v, w)?;
        }
        let v = b.state(format!("{}+", model.name(w)))?;
        b.height(n + margin, v).frontier(v);
        b.order_pair(j, v, w)?;
    }
    Ok(b.build()?)
}

/// The body extended by `params.depth` wing levels.
pub fn build_butterfly(params: ButterflyParams, agents: &[AgentId]) -> Result<Model, ButterflyError> {
    if params.depth > MAX_EXPLICIT_DEPTH {
        return Err(ButterflyError::DepthTooLarge {
            depth: params.depth,
            max: MAX_EXPLICIT_DEPTH,
        });
    }
    let body = build_body(params, agents)?;
    extend_wings(&body, params.margin, params.depth)
}

/// The flutter's selection rule restricted to one butterfly: `f(true, w)`
/// and `f([center], w)` are the center `w0` for every `w`. No other
/// conditions are defined.
pub fn center_anchored_selection(model: &Model, center: u64) -> Result<TableSelection, SelectionError> {
    let w0 = model.state("w0").map_err(|_| SelectionError::MissingButterfly(center))?;
    let mut table = TableSelection::new();
    table.insert_all(model, Atom::Top, w0)?;
    table.insert_all(model, Atom::Height(center), w0)?;
    Ok(table)
}

/// `5 + 8(2^d − 1)`: the state count of a depth-`d` butterfly that never
/// reaches the `n − m < 0` boundary.
pub fn unbounded_state_count(depth: u32) -> u64 {
    5 + 8 * ((1u64 << depth) - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::agent_list;

    fn rc() -> Vec<AgentId> {
        agent_list("R C").unwrap()
    }

    fn names(m: &Model, ids: &[StateId]) -> Vec<String> {
        ids.iter().map(|&s| m.name(s).to_string()).collect()
    }

    #[test]
    fn body_structure() {
        let m = build_body(ButterflyParams::new(300, 50, 0).unwrap(), &rc()).unwrap();
        assert_eq!(m.len(), 5);
        assert_eq!(names(&m, m.extension(300)), ["w0"]);
        assert_eq!(names(&m, m.extension(250)), ["w1", "w3"]);
        assert_eq!(names(&m, m.extension(350)), ["w2", "w4"]);
        let w0 = m.state("w0").unwrap();
        let r = &rc()[0];
        assert_eq!(names(&m, m.epistemic_component(r, w0).unwrap()), ["w0", "w1", "w2"]);
        let w3 = m.state("w3").unwrap();
        assert_eq!(names(&m, m.epistemic_component(r, w3).unwrap()), ["w3"]);
        assert_eq!(m.frontier_states().count(), 4);
    }

    #[test]
    fn body_parameter_guards() {
        assert!(matches!(
            ButterflyParams::new(300, 300, 0),
            Err(ButterflyError::NonPositiveBase { .. })
        ));
        assert!(matches!(ButterflyParams::new(5, 0, 0), Err(ButterflyError::ZeroMargin)));
        let m = build_body(ButterflyParams::new(2, 1, 0).unwrap(), &rc()).unwrap();
        assert_eq!(m.heights().collect::<Vec<_>>(), [1, 2, 3]);
        let three = agent_list("R C D").unwrap();
        assert!(matches!(
            build_body(ButterflyParams::new(2, 1, 0).unwrap(), &three),
            Err(ButterflyError::AgentCount(3))
        ));
    }

    #[test]
    fn one_wing_level() {
        let m = build_butterfly(ButterflyParams::new(300, 50, 1).unwrap(), &rc()).unwrap();
        assert_eq!(m.len(), 13);
        let w1 = m.state("w1").unwrap();
        let minus = m.state("w1-").unwrap();
        let plus = m.state("w1+").unwrap();
        assert_eq!(m.heights_at(minus), [200]);
        assert_eq!(m.heights_at(plus), [300]);
        // w1 hangs below w0 for R, so its children hang below it for C.
        assert!(m.order(1).strictly_less(minus, w1));
        assert!(!m.order(0).less_eq(minus, w1));
        assert!(!m.is_frontier_state(w1));
        assert!(m.is_frontier_state(minus));
    }

    #[test]
    fn boundary_skips_negative_child() {
        // k = 2, m = 1: w1 has height 1, its child heights 0 and 2; the [0]
        // state only gets a [1] child.
        let m = build_butterfly(ButterflyParams::new(2, 1, 2).unwrap(), &rc()).unwrap();
        let zero = m.state("w1-").unwrap();
        assert_eq!(m.heights_at(zero), [0]);
        assert!(m.state("w1--").is_err());
        assert_eq!(m.heights_at(m.state("w1-+").unwrap()), [1]);
        assert!(m.len() < unbounded_state_count(2) as usize);
    }

    #[test]
    fn counts_follow_recurrence() {
        for d in 0..=4 {
            let m = build_butterfly(ButterflyParams::new(300, 50, d).unwrap(), &rc()).unwrap();
            assert_eq!(m.len() as u64, unbounded_state_count(d), "depth {d}");
        }
        assert!(matches!(
            build_butterfly(ButterflyParams::new(300, 50, 17).unwrap(), &rc()),
            Err(ButterflyError::DepthTooLarge { .. })
        ));
    }
}
