//! Line-oriented text format for models and their selection tables.
//!
//! ```text
//! agents: R C
//! states: w0 w1 w2 w3 w4
//! atom [300]: w0
//! atom [250]: w1 w3
//! atom [350]: w2 w4
//! order R closure=auto: w1<w0 w2<w0
//! order C closure=auto: w3<w0 w4<w0
//! frontier: w1 w2 w3 w4
//! select [300] *: w0
//! select true w0: w0
//! ```
//!
//! `a<b` and `a<=b` both record `a ≤ b`. With `closure=none` the listed
//! pairs must already form a preorder (reflexive pairs included). `#` starts
//! a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Closure, Model, ModelBuilder, ModelError, StateId, TableSelection};
use crate::formula::{agent_list, AgentId, Atom};
use crate::structure::{EpistemicStructure, SelectionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Model { line: usize, source: ModelError },
    #[error("line {line}: {source}")]
    Selection { line: usize, source: SelectionError },
    #[error("{0}")]
    Invalid(ModelError),
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_atom(line: usize, text: &str) -> Result<Atom, FormatError> {
    if text == "true" {
        return Ok(Atom::Top);
    }
    text.strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .and_then(|t| t.parse().ok())
        .map(Atom::Height)
        .ok_or_else(|| syntax(line, format!("expected an atom, found {text:?}")))
}

struct PendingSelect {
    line: usize,
    atom: Atom,
    from: Option<String>,
    to: String,
}

/// Parses a model file into the model and its selection table.
pub fn load_model(text: &str) -> Result<(Model, TableSelection), FormatError> {
    let mut builder: Option<ModelBuilder> = None;
    let mut have_states = false;
    let mut top: Option<(usize, Vec<String>)> = None;
    let mut selects = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (head, rest) = content
            .split_once(':')
            .ok_or_else(|| syntax(line, "expected `<section>: <items>`"))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        let items: Vec<&str> = rest.split_whitespace().collect();
        let model_err = |source| FormatError::Model { line, source };

        if head == ["agents"] {
            if builder.is_some() {
                return Err(syntax(line, "duplicate `agents` section"));
            }
            let agents = agent_list(rest).map_err(|e| syntax(line, e.to_string()))?;
            builder = Some(ModelBuilder::new(agents).map_err(model_err)?);
            continue;
        }
        let b = builder
            .as_mut()
            .ok_or_else(|| syntax(line, "`agents` must come first"))?;
        match head.as_slice() {
            ["states"] => {
                if have_states {
                    return Err(syntax(line, "duplicate `states` section"));
                }
                if items.is_empty() {
                    return Err(FormatError::Model {
                        line,
                        source: ModelError::EmptyStates,
                    });
                }
                for s in items {
                    b.state(s).map_err(model_err)?;
                }
                have_states = true;
            }
            _ if !have_states => return Err(syntax(line, "`states` must precede other sections")),
            ["atom", atom] => match parse_atom(line, atom)? {
                Atom::Top => top = Some((line, items.iter().map(|s| s.to_string()).collect())),
                Atom::Height(n) => {
                    for s in items {
                        let id = b.lookup(s).map_err(model_err)?;
                        b.height(n, id);
                    }
                }
            },
            ["order", agent, flags @ ..] => {
                let agent = AgentId::new(*agent).map_err(|e| syntax(line, e.to_string()))?;
                let closure = match flags {
                    [] | ["closure=auto"] => Closure::Auto,
                    ["closure=none"] => Closure::None,
                    _ => return Err(syntax(line, "expected `closure=auto` or `closure=none`")),
                };
                b.closure(&agent, closure).map_err(model_err)?;
                for pair in items {
                    let (lo, hi) = pair
                        .split_once("<=")
                        .or_else(|| pair.split_once('<'))
                        .ok_or_else(|| syntax(line, format!("expected `a<b`, found {pair:?}")))?;
                    let lo = b.lookup(lo).map_err(model_err)?;
                    let hi = b.lookup(hi).map_err(model_err)?;
                    b.order_pair(&agent, lo, hi).map_err(model_err)?;
                }
            }
            ["frontier"] => {
                for s in items {
                    let id = b.lookup(s).map_err(model_err)?;
                    b.frontier(id);
                }
            }
            ["select", atom, from] => {
                let [to] = items.as_slice() else {
                    return Err(syntax(line, "a select row names exactly one target state"));
                };
                selects.push(PendingSelect {
                    line,
                    atom: parse_atom(line, atom)?,
                    from: (*from != "*").then(|| from.to_string()),
                    to: to.to_string(),
                });
            }
            _ => return Err(syntax(line, format!("unknown section {:?}", head.join(" ")))),
        }
    }

    let b = builder.ok_or_else(|| syntax(1, "missing `agents` section"))?;
    if !have_states {
        return Err(FormatError::Invalid(ModelError::EmptyStates));
    }
    if let Some((line, listed)) = top {
        let mut listed = listed;
        listed.sort();
        listed.dedup();
        if listed.len() != b.state_count() || listed.iter().any(|s| b.lookup(s).is_err()) {
            return Err(FormatError::Model {
                line,
                source: ModelError::TopNotTotal,
            });
        }
    }
    let model = b.build().map_err(FormatError::Invalid)?;

    let mut selection = TableSelection::new();
    for sel in selects {
        let err = |source| FormatError::Model {
            line: sel.line,
            source,
        };
        let target = model.state(&sel.to).map_err(err)?;
        let result = match &sel.from {
            None => selection.insert_all(&model, sel.atom, target),
            Some(from) => {
                let w = model.state(from).map_err(err)?;
                selection.insert(&model, sel.atom, w, target)
            }
        };
        result.map_err(|source| FormatError::Selection {
            line: sel.line,
            source,
        })?;
    }
    Ok((model, selection))
}

/// Writes a model (and optionally its selection table) in the file format.
/// Orders are written as generator pairs with `closure=auto`.
pub fn save_model(model: &Model, selection: Option<&TableSelection>) -> String {
    let mut out = String::new();
    let names = |ids: &mut dyn Iterator<Item = StateId>| -> String {
        ids.map(|s| model.name(s).to_string()).collect::<Vec<_>>().join(" ")
    };
    let agents: Vec<String> = model.agents().iter().map(|a| a.to_string()).collect();
    writeln!(out, "agents: {}", agents.join(" ")).unwrap();
    writeln!(out, "states: {}", names(&mut model.state_ids())).unwrap();
    for h in model.heights() {
        writeln!(out, "atom [{h}]: {}", names(&mut model.extension(h).iter().copied())).unwrap();
    }
    for (i, agent) in model.agents().iter().enumerate() {
        let order = model.order(i);
        let pairs: Vec<String> = order
            .pairs()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| {
                let rel = if order.less_eq(b, a) { "<=" } else { "<" };
                format!("{}{rel}{}", model.name(a), model.name(b))
            })
            .collect();
        if pairs.is_empty() {
            writeln!(out, "order {agent} closure=auto:").unwrap();
        } else {
            writeln!(out, "order {agent} closure=auto: {}", pairs.join(" ")).unwrap();
        }
    }
    let frontier = names(&mut model.frontier_states());
    if !frontier.is_empty() {
        writeln!(out, "frontier: {frontier}").unwrap();
    }
    if let Some(sel) = selection {
        let mut by_atom: BTreeMap<Atom, Vec<(StateId, StateId)>> = BTreeMap::new();
        for (atom, w, t) in sel.entries() {
            by_atom.entry(atom).or_default().push((w, t));
        }
        for (atom, rows) in by_atom {
            let uniform = rows.len() == model.len() && rows.iter().all(|&(_, t)| t == rows[0].1);
            if uniform {
                writeln!(out, "select {atom} *: {}", model.name(rows[0].1)).unwrap();
            } else {
                for (w, t) in rows {
                    writeln!(out, "select {atom} {}: {}", model.name(w), model.name(t)).unwrap();
                }
            }
        }
    }
    out
}

/// Graphviz rendering: one node per state labelled with its heights, and for
/// each agent the covering pairs of its strict order as edges pointing to the
/// more plausible state. Frontier states are dashed.
pub fn to_dot(model: &Model) -> String {
    const COLORS: [&str; 4] = ["firebrick", "royalblue", "darkgreen", "darkorange"];
    let mut out = String::from("digraph model {\n  node [shape=box];\n");
    for s in model.state_ids() {
        let heights: Vec<String> = model.heights_at(s).iter().map(|h| format!("[{h}]")).collect();
        let style = if model.is_frontier_state(s) { ", style=dashed" } else { "" };
        writeln!(out, "  \"{0}\" [label=\"{0}\\n{1}\"{style}];", model.name(s), heights.join(" ")).unwrap();
    }
    for (i, agent) in model.agents().iter().enumerate() {
        let order = model.order(i);
        let color = COLORS[i % COLORS.len()];
        for (a, b) in order.pairs().filter(|&(a, b)| order.strictly_less(a, b)) {
            let covered = model
                .state_ids()
                .any(|c| order.strictly_less(a, c) && order.strictly_less(c, b));
            if !covered {
                writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"{agent}\", color={color}];",
                    model.name(a),
                    model.name(b)
                )
                .unwrap();
            }
        }
    }
    out.push_str("}\n");
    out
}

impl Model {
    /// Whether `other` is the same model up to the order in which states are
    /// listed. States are matched by name.
    pub fn same_as(&self, other: &Model) -> bool {
        if self.agents() != other.agents() || self.len() != other.len() {
            return false;
        }
        let map = |s: StateId| other.state(self.name(s)).ok();
        let Some(mapping) = self.state_ids().map(map).collect::<Option<Vec<_>>>() else {
            return false;
        };
        for s in self.state_ids() {
            let t = mapping[s.0];
            let mut hs = self.heights_at(s).to_vec();
            let mut ht = other.heights_at(t).to_vec();
            hs.sort_unstable();
            ht.sort_unstable();
            if hs != ht || self.is_frontier(s) != other.is_frontier(t) {
                return false;
            }
        }
        (0..self.agents().len()).all(|i| {
            self.order(i).len() == other.order(i).len()
                && self
                    .order(i)
                    .pairs()
                    .all(|(a, b)| other.order(i).less_eq(mapping[a.0], mapping[b.0]))
        })
    }
}
