//! Lewis-style conditions for a basis event `A` and a target event `B`.
//!
//! Events are sets of states of an explicit model. The reason operator is
//! the unconditional one, `R_i(E) = {w : max_{≤i}([f(true, w)]_i) ⊆ E}`.
//!
//! * C1: `A ⊆ R_i(A)` for every `i`.
//! * C2: `R_i(A) ⊆ R_i(R_j(A))` for every `i, j`.
//! * C3: `R_i(A) ⊆ R_i(B)` for every `i`.
//! * C4: for every event `C` and agents `i, j`, if `R_i(A) ⊆ R_i(C)` then
//!   the conclusion `R_i((W ∖ R_j(A)) ∪ R_j(C))` must contain `R_i(A)`
//!   ([`C4Reading::Local`]) or be all of `W` ([`C4Reading::Global`]).
//!
//! C4 quantifies over all `2^|W|` events, so it is guarded by a size limit.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::checker::{CheckError, Evaluator};
use crate::formula::{AgentId, Atom, Formula};
use crate::random::{self, random_model, ModelShape};
use crate::model::{max_plausible, Model, StateId};
use crate::structure::{EpistemicStructure, Selection, SelectionError};

pub type Event = FixedBitSet;

pub const DEFAULT_MAX_STATES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LewisError {
    #[error("C4 enumerates 2^{states} events; the limit is {max} states")]
    TooLarge { states: usize, max: usize },
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("unknown state {0}")]
    UnknownState(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum C4Reading {
    #[default]
    Local,
    Global,
}

impl fmt::Display for C4Reading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            C4Reading::Local => "local",
            C4Reading::Global => "global",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::C1, Condition::C2, Condition::C3, Condition::C4];
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A state where a condition's inclusion fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub condition: Condition,
    pub state: StateId,
    pub agent_i: usize,
    /// The second agent, for C2 and C4.
    pub agent_j: Option<usize>,
    /// The event `C`, for C4.
    pub event: Option<Event>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LewisReport {
    /// Verdicts for the conditions that were checked.
    pub checked: Vec<Condition>,
    /// The least witness of each failed condition.
    pub violations: BTreeMap<Condition, Violation>,
    /// Events `C` enumerated for C4.
    pub c4_search_space: u64,
}

impl LewisReport {
    pub fn holds(&self, c: Condition) -> bool {
        self.checked.contains(&c) && !self.violations.contains_key(&c)
    }

    pub fn all_hold(&self) -> bool {
        Condition::ALL.iter().all(|&c| self.holds(c))
    }

    fn merge(&mut self, other: LewisReport) {
        self.checked.extend(other.checked);
        self.checked.sort();
        self.violations.extend(other.violations);
        self.c4_search_space += other.c4_search_space;
    }
}

/// The unconditional reason operator of one model and selection function,
/// with `max_{≤i}([f(true, w)]_i)` precomputed for every `i` and `w`.
#[derive(Debug, Clone)]
pub struct ReasonOps {
    n: usize,
    agents: usize,
    /// supports[i][w]
    supports: Vec<Vec<FixedBitSet>>,
}

impl ReasonOps {
    pub fn new(model: &Model, f: &impl Selection<StateId>) -> Result<Self, LewisError> {
        let n = model.len();
        let agents = model.agents().len();
        let mut supports = Vec::with_capacity(agents);
        for i in 0..agents {
            let mut per_state = Vec::with_capacity(n);
            for w in model.state_ids() {
                let t = f.select(Atom::Top, w)?;
                let mut set = FixedBitSet::with_capacity(n);
                for s in max_plausible(model, i, &model.component(i, t)) {
                    set.insert(s.0);
                }
                per_state.push(set);
            }
            supports.push(per_state);
        }
        Ok(Self { n, agents, supports })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn empty(&self) -> Event {
        FixedBitSet::with_capacity(self.n)
    }

    pub fn full(&self) -> Event {
        let mut e = self.empty();
        e.insert_range(..);
        e
    }

    pub fn complement(&self, e: &Event) -> Event {
        let mut c = e.clone();
        c.toggle_range(..);
        c
    }

    /// Event whose members are the set bits of `mask`.
    pub fn from_mask(&self, mask: u64) -> Event {
        let mut e = self.empty();
        for s in 0..self.n {
            if mask >> s & 1 == 1 {
                e.insert(s);
            }
        }
        e
    }

    pub fn from_states(&self, states: &[StateId]) -> Event {
        let mut e = self.empty();
        for s in states {
            e.insert(s.0);
        }
        e
    }

    /// `R_i(E)`.
    pub fn reason(&self, agent: usize, e: &Event) -> Event {
        let mut out = self.empty();
        for (w, support) in self.supports[agent].iter().enumerate() {
            if support.is_subset(e) {
                out.insert(w);
            }
        }
        out
    }

    /// `⋂_i R_i(E)`.
    pub fn everyone(&self, e: &Event) -> Event {
        let mut out = self.full();
        for i in 0..self.agents {
            out.intersect_with(&self.reason(i, e));
        }
        out
    }

    fn c4_conclusion(&self, i: usize, j: usize, ra_j: &Event, c: &Event) -> Event {
        let mut inner = self.complement(ra_j);
        inner.union_with(&self.reason(j, c));
        self.reason(i, &inner)
    }
}

/// `{w : max_{≤agent}([f(true, w)]_agent) ⊆ E}`.
pub fn reason_event(model: &Model, f: &impl Selection<StateId>, agent: usize, e: &Event) -> Result<Event, LewisError> {
    Ok(ReasonOps::new(model, f)?.reason(agent, e))
}

fn first_missing(sub: &Event, sup: &Event) -> Option<usize> {
    sub.difference(sup).next()
}

/// C1, C2 and C3.
pub fn check_c1_c3(ops: &ReasonOps, a: &Event, b: &Event) -> LewisReport {
    let mut report = LewisReport {
        checked: vec![Condition::C1, Condition::C2, Condition::C3],
        ..Default::default()
    };
    let ra: Vec<Event> = (0..ops.agents).map(|i| ops.reason(i, a)).collect();
    let mut record = |v: Violation| {
        report.violations.entry(v.condition).or_insert(v);
    };
    for (i, ra_i) in ra.iter().enumerate() {
        if let Some(w) = first_missing(a, ra_i) {
            record(Violation {
                condition: Condition::C1,
                state: StateId(w),
                agent_i: i,
                agent_j: None,
                event: None,
            });
        }
    }
    for i in 0..ops.agents {
        for j in 0..ops.agents {
            if let Some(w) = first_missing(&ra[i], &ops.reason(i, &ra[j])) {
                record(Violation {
                    condition: Condition::C2,
                    state: StateId(w),
                    agent_i: i,
                    agent_j: Some(j),
                    event: None,
                });
            }
        }
    }
    for (i, ra_i) in ra.iter().enumerate() {
        if let Some(w) = first_missing(ra_i, &ops.reason(i, b)) {
            record(Violation {
                condition: Condition::C3,
                state: StateId(w),
                agent_i: i,
                agent_j: None,
                event: None,
            });
        }
    }
    report
}

/// C4 over every event `C ⊆ W`, enumerated in increasing bitmask order.
pub fn check_c4(ops: &ReasonOps, a: &Event, reading: C4Reading, max_states: usize) -> Result<LewisReport, LewisError> {
    if ops.n > max_states.min(63) {
        return Err(LewisError::TooLarge {
            states: ops.n,
            max: max_states.min(63),
        });
    }
    let ra: Vec<Event> = (0..ops.agents).map(|i| ops.reason(i, a)).collect();
    let space = 1u64 << ops.n;
    let mut report = LewisReport {
        checked: vec![Condition::C4],
        c4_search_space: space,
        ..Default::default()
    };
    for mask in 0..space {
        let c = ops.from_mask(mask);
        for i in 0..ops.agents {
            if !ra[i].is_subset(&ops.reason(i, &c)) {
                continue;
            }
            for j in 0..ops.agents {
                let conclusion = ops.c4_conclusion(i, j, &ra[j], &c);
                let required = match reading {
                    C4Reading::Local => &ra[i],
                    C4Reading::Global => &ops.full(),
                };
                if let Some(w) = first_missing(required, &conclusion) {
                    report.violations.insert(
                        Condition::C4,
                        Violation {
                            condition: Condition::C4,
                            state: StateId(w),
                            agent_i: i,
                            agent_j: Some(j),
                            event: Some(c),
                        },
                    );
                    return Ok(report);
                }
            }
        }
    }
    Ok(report)
}

/// All four conditions.
pub fn check_conditions(
    ops: &ReasonOps,
    a: &Event,
    b: &Event,
    reading: C4Reading,
    max_states: usize,
) -> Result<LewisReport, LewisError> {
    let mut report = check_c1_c3(ops, a, b);
    report.merge(check_c4(ops, a, reading, max_states)?);
    Ok(report)
}

/// Recomputes the inclusion a violation claims to break.
pub fn replay(ops: &ReasonOps, a: &Event, b: &Event, reading: C4Reading, v: &Violation) -> bool {
    let w = v.state.0;
    let i = v.agent_i;
    let ra_i = ops.reason(i, a);
    match v.condition {
        Condition::C1 => a.contains(w) && !ra_i.contains(w),
        Condition::C2 => {
            let Some(j) = v.agent_j else { return false };
            ra_i.contains(w) && !ops.reason(i, &ops.reason(j, a)).contains(w)
        }
        Condition::C3 => ra_i.contains(w) && !ops.reason(i, b).contains(w),
        Condition::C4 => {
            let (Some(j), Some(c)) = (v.agent_j, v.event.as_ref()) else {
                return false;
            };
            let premise = ra_i.is_subset(&ops.reason(i, c));
            let mut inner = ops.complement(&ops.reason(j, a));
            inner.union_with(&ops.reason(j, c));
            let conclusion = ops.reason(i, &inner);
            let required = match reading {
                C4Reading::Local => ra_i.contains(w),
                C4Reading::Global => true,
            };
            premise && required && !conclusion.contains(w)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoremReport {
    pub conditions: LewisReport,
    /// `r^0(B), r^1(B), …` as events.
    pub levels: Vec<Event>,
    /// First level equal to its successor.
    pub stabilized_at: Option<usize>,
    /// First level not containing `A`, with a state of `A` missing from it.
    pub counterexample: Option<(usize, StateId)>,
}

impl TheoremReport {
    /// Whether the conditions hold but some level misses part of `A`.
    pub fn refutes_theorem(&self) -> bool {
        self.conditions.all_hold() && self.counterexample.is_some()
    }
}

/// Checks C1–C4 and whether `A ⊆ r^n(B)` for `n = 0..=depth_max`, where
/// `r^0(B) = ⋂_i R_i(B)` and `r^{n+1}(B) = ⋂_i R_i(r^n(B))`.
pub fn verify_lewis_theorem(
    ops: &ReasonOps,
    a: &Event,
    b: &Event,
    depth_max: usize,
    reading: C4Reading,
    max_states: usize,
) -> Result<TheoremReport, LewisError> {
    let conditions = check_conditions(ops, a, b, reading, max_states)?;
    Ok(theorem_levels(ops, a, b, depth_max, conditions))
}

/// The `r^n(B)` part of [`verify_lewis_theorem`] for already-checked
/// conditions.
pub fn theorem_levels(ops: &ReasonOps, a: &Event, b: &Event, depth_max: usize, conditions: LewisReport) -> TheoremReport {
    let mut levels = vec![ops.everyone(b)];
    let mut stabilized_at = None;
    for n in 1..=depth_max {
        let next = ops.everyone(&levels[n - 1]);
        if stabilized_at.is_none() && next == levels[n - 1] {
            stabilized_at = Some(n - 1);
        }
        levels.push(next);
    }
    let counterexample = levels
        .iter()
        .enumerate()
        .find_map(|(n, level)| first_missing(a, level).map(|w| (n, StateId(w))));
    TheoremReport {
        conditions,
        levels,
        stabilized_at,
        counterexample,
    }
}

/// Every distinct level `r^0(B), r^1(B), …`, stopping at the first level
/// that repeats an earlier one. Each level is a function of the previous one,
/// so the result contains every level for every `n`.
pub fn all_levels(ops: &ReasonOps, b: &Event) -> Vec<Event> {
    let mut seen = HashSet::new();
    let mut levels = Vec::new();
    let mut cur = ops.everyone(b);
    while seen.insert(cur.clone()) {
        let next = ops.everyone(&cur);
        levels.push(cur);
        cur = next;
    }
    levels
}

/// An `(A, B)` pair satisfying C1–C4 with some level missing part of `A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyCounterexample {
    pub model: usize,
    pub a: Event,
    pub b: Event,
    pub level: usize,
    pub state: StateId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyRun {
    pub seed: u64,
    pub models: usize,
    /// `(A, B)` pairs examined.
    pub pairs: u64,
    /// Pairs for which all four conditions hold.
    pub premises_held: u64,
    pub counterexamples: Vec<PropertyCounterexample>,
    pub violations_replayed: u64,
    pub replay_failures: u64,
    /// Models skipped by the size guard.
    pub skipped: usize,
}

impl PropertyRun {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty() && self.replay_failures == 0
    }
}

/// Random models with every `(A, B)` pair: checks that C1–C4 force
/// `A ⊆ r^n(B)` for all `n` and replays every failed condition's witness.
pub fn property_run(
    seed: u64,
    models: usize,
    shape: &ModelShape,
    reading: C4Reading,
    max_states: usize,
) -> Result<PropertyRun, LewisError> {
    let agents = vec![
        AgentId::new("R").expect("valid agent name"),
        AgentId::new("C").expect("valid agent name"),
    ];
    let mut rng = random::rng(seed);
    let mut run = PropertyRun {
        seed,
        models,
        ..Default::default()
    };
    for index in 0..models {
        let (model, sel) = random_model(&mut rng, &agents, shape);
        if model.len() > max_states.min(63) {
            run.skipped += 1;
            continue;
        }
        let ops = ReasonOps::new(&model, &sel)?;
        let space = 1u64 << ops.len();
        let events: Vec<Event> = (0..space).map(|m| ops.from_mask(m)).collect();
        let levels: Vec<Vec<Event>> = events.iter().map(|b| all_levels(&ops, b)).collect();
        for a in &events {
            let c4 = check_c4(&ops, a, reading, max_states)?;
            for (bi, b) in events.iter().enumerate() {
                run.pairs += 1;
                let mut report = check_c1_c3(&ops, a, b);
                report.merge(c4.clone());
                for v in report.violations.values() {
                    run.violations_replayed += 1;
                    if !replay(&ops, a, b, reading, v) {
                        run.replay_failures += 1;
                    }
                }
                if !report.all_hold() {
                    continue;
                }
                run.premises_held += 1;
                let missing = levels[bi]
                    .iter()
                    .enumerate()
                    .find_map(|(n, level)| first_missing(a, level).map(|w| (n, StateId(w))));
                if let Some((level, state)) = missing {
                    run.counterexamples.push(PropertyCounterexample {
                        model: index,
                        a: a.clone(),
                        b: b.clone(),
                        level,
                        state,
                    });
                }
            }
        }
    }
    Ok(run)
}

/// An event given by explicit states or by a formula's extension.
#[derive(Debug, Clone, PartialEq)]
pub enum EventSpec {
    States(Vec<String>),
    Formula(Formula),
}

impl EventSpec {
    pub fn resolve(&self, model: &Model, f: &impl Selection<StateId>, ops: &ReasonOps) -> Result<Event, LewisError> {
        match self {
            EventSpec::States(names) => {
                let ids = names
                    .iter()
                    .map(|n| model.state(n).map_err(|_| LewisError::UnknownState(n.clone())))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ops.from_states(&ids))
            }
            EventSpec::Formula(phi) => {
                let mut ev = Evaluator::new(model, f);
                let mut e = ops.empty();
                for w in model.state_ids() {
                    if ev.check(phi, w)?.value {
                        e.insert(w.0);
                    }
                }
                Ok(e)
            }
        }
    }
}

/// Names of an event's states, in state order.
pub fn event_names(model: &Model, e: &Event) -> Vec<String> {
    e.ones().map(|s| model.name(StateId(s)).to_string()).collect()
}
