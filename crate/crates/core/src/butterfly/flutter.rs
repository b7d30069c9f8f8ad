//! Implicit butterfly flutters.
//!
//! A flutter state is addressed by its butterfly's center, its level (0 for
//! the center, 1 for the four body leaves, `2..=d+1` for wing states) and
//! the path of `-`/`+` choices that leads to it. Components, orders and
//! heights are computed from that address, so a depth-20 flutter costs no
//! memory up front.

use std::fmt;
use std::fs;
use std::path::Path;

use super::{build_butterfly, ButterflyError, ButterflyParams, MAX_EXPLICIT_DEPTH};
use crate::formula::{agent_list, AgentId, Atom};
use crate::model::{save_model, Model};
use crate::structure::{EpistemicStructure, Selection, SelectionError};

/// Name of the selection rule recorded in flutter manifests.
pub const SELECTION_RULE: &str = "center-of-butterfly";

/// Deepest truncation a flutter can address (one path bit per wing level).
pub const MAX_FLUTTER_DEPTH: u32 = 60;

const MANIFEST: &str = "flutter.manifest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlutterState {
    center: u64,
    level: u8,
    /// Body leaf `w1..w4` as `0..4`; zero for the center.
    branch: u8,
    /// Bit `l − 2` is set when the level-`l` step took the `−m` child.
    bits: u64,
    value: u64,
}

impl FlutterState {
    pub fn center(&self) -> u64 {
        self.center
    }

    pub fn level(&self) -> u32 {
        self.level as u32
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn is_center(&self) -> bool {
        self.level == 0
    }

    fn minus_at(&self, level: u8) -> bool {
        self.bits >> (level - 2) & 1 == 1
    }

    /// Local name inside the butterfly, matching [`build_butterfly`]'s names.
    pub fn local_name(&self) -> String {
        let mut s = format!("w{}", if self.level == 0 { 0 } else { self.branch + 1 });
        for l in 2..=self.level {
            s.push(if self.minus_at(l) { '-' } else { '+' });
        }
        s
    }
}

impl fmt::Display for FlutterState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}:{}", self.center, self.local_name())
    }
}

/// The butterflies centered on every `k` in `[lo, hi]` with `k > m`, each
/// truncated at depth `d`, plus the selection function
/// `f([k], w) = center of butterfly k`, `f(true, w) = center of butterfly
/// height(w)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flutter {
    agents: Vec<AgentId>,
    lo: u64,
    hi: u64,
    margin: u64,
    depth: u32,
}

impl Flutter {
    pub fn new(lo: u64, hi: u64, margin: u64, depth: u32, agents: &[AgentId]) -> Result<Self, ButterflyError> {
        if agents.len() != 2 {
            return Err(ButterflyError::AgentCount(agents.len()));
        }
        if margin == 0 {
            return Err(ButterflyError::ZeroMargin);
        }
        if lo > hi || hi <= margin {
            return Err(ButterflyError::EmptyRange { lo, hi });
        }
        if depth > MAX_FLUTTER_DEPTH {
            return Err(ButterflyError::DepthTooLarge {
                depth,
                max: MAX_FLUTTER_DEPTH,
            });
        }
        Ok(Self {
            agents: agents.to_vec(),
            lo,
            hi,
            margin,
            depth,
        })
    }

    pub fn range(&self) -> (u64, u64) {
        (self.lo, self.hi)
    }

    pub fn margin(&self) -> u64 {
        self.margin
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn has_butterfly(&self, k: u64) -> bool {
        self.lo <= k && k <= self.hi && k > self.margin
    }

    pub fn centers(&self) -> impl Iterator<Item = u64> {
        self.lo.max(self.margin + 1)..=self.hi
    }

    pub fn center(&self, k: u64) -> Result<FlutterState, SelectionError> {
        if !self.has_butterfly(k) {
            return Err(SelectionError::MissingButterfly(k));
        }
        Ok(FlutterState {
            center: k,
            level: 0,
            branch: 0,
            bits: 0,
            value: k,
        })
    }

    fn max_level(&self) -> u8 {
        (self.depth + 1) as u8
    }

    /// The agent relating `s` to its parent; `None` for centers.
    pub fn edge_agent(&self, s: FlutterState) -> Option<usize> {
        match s.level {
            0 => None,
            l => {
                let first = if s.branch < 2 { 0 } else { 1 };
                Some((first + l as usize - 1) % 2)
            }
        }
    }

    pub fn parent(&self, s: FlutterState) -> Option<FlutterState> {
        match s.level {
            0 => None,
            1 => Some(FlutterState {
                branch: 0,
                level: 0,
                value: s.center,
                ..s
            }),
            l => {
                let value = if s.minus_at(l) {
                    s.value + self.margin
                } else {
                    s.value - self.margin
                };
                Some(FlutterState {
                    level: l - 1,
                    bits: s.bits & ((1u64 << (l - 2)) - 1),
                    value,
                    ..s
                })
            }
        }
    }

    /// States directly below `s` for `agent`, `−m` child first.
    pub fn children(&self, agent: usize, s: FlutterState) -> Vec<FlutterState> {
        if s.level == 0 {
            let (k, m) = (s.center, self.margin);
            let first = 2 * agent as u8;
            return vec![
                FlutterState {
                    level: 1,
                    branch: first,
                    value: k - m,
                    ..s
                },
                FlutterState {
                    level: 1,
                    branch: first + 1,
                    value: k + m,
                    ..s
                },
            ];
        }
        if s.level == self.max_level() || self.edge_agent(s) == Some(agent) {
            return Vec::new();
        }
        let level = s.level + 1;
        let mut out = Vec::with_capacity(2);
        if let Some(lower) = s.value.checked_sub(self.margin) {
            out.push(FlutterState {
                level,
                bits: s.bits | 1u64 << (level - 2),
                value: lower,
                ..s
            });
        }
        out.push(FlutterState {
            level,
            value: s.value + self.margin,
            ..s
        });
        out
    }

    /// Every state of butterfly `k`, sorted.
    pub fn butterfly_states(&self, k: u64) -> Result<Vec<FlutterState>, SelectionError> {
        let mut out = Vec::new();
        let mut stack = vec![self.center(k)?];
        while let Some(s) = stack.pop() {
            out.push(s);
            for a in 0..2 {
                stack.extend(self.children(a, s));
            }
        }
        out.sort();
        Ok(out)
    }

    /// Butterfly `k` as an explicit model (state names without the `b{k}:`
    /// prefix).
    pub fn butterfly_model(&self, k: u64) -> Result<Model, ButterflyError> {
        if !self.has_butterfly(k) {
            return Err(ButterflyError::NotInFlutter(k));
        }
        build_butterfly(ButterflyParams::new(k, self.margin, self.depth)?, &self.agents)
    }

    fn manifest(&self) -> String {
        let agents: Vec<&str> = self.agents.iter().map(AgentId::as_str).collect();
        format!(
            "range: {} {}\nmargin: {}\ndepth: {}\nagents: {}\nselection: {SELECTION_RULE}\n",
            self.lo,
            self.hi,
            self.margin,
            self.depth,
            agents.join(" ")
        )
    }

    fn parse_manifest(text: &str) -> Result<Self, ButterflyError> {
        let err = |line: usize, message: String| ButterflyError::Manifest { line, message };
        let mut range = None;
        let mut margin = None;
        let mut depth = None;
        let mut agents = None;
        let mut rule = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once(':')
                .ok_or_else(|| err(line, "expected `key: value`".into()))?;
            let value = value.trim();
            let num = |v: &str| v.parse::<u64>().map_err(|_| err(line, format!("expected a number, found {v:?}")));
            match key.trim() {
                "range" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    let [lo, hi] = parts.as_slice() else {
                        return Err(err(line, "expected `range: <lo> <hi>`".into()));
                    };
                    range = Some((num(lo)?, num(hi)?));
                }
                "margin" => margin = Some(num(value)?),
                "depth" => {
                    let d = num(value)?;
                    depth = Some(u32::try_from(d).map_err(|_| err(line, format!("depth {d} too large")))?);
                }
                "agents" => agents = Some(agent_list(value).map_err(|e| err(line, e.to_string()))?),
                "selection" => rule = Some(value.to_string()),
                other => return Err(err(line, format!("unknown key {other:?}"))),
            }
        }
        let missing = |key: &str| err(0, format!("missing `{key}`"));
        let (lo, hi) = range.ok_or_else(|| missing("range"))?;
        let rule = rule.ok_or_else(|| missing("selection"))?;
        if rule != SELECTION_RULE {
            return Err(err(0, format!("unsupported selection rule {rule:?}")));
        }
        Flutter::new(
            lo,
            hi,
            margin.ok_or_else(|| missing("margin"))?,
            depth.ok_or_else(|| missing("depth"))?,
            &agents.ok_or_else(|| missing("agents"))?,
        )
    }
}

/// Writes `flutter.manifest` and one `b{k}.model` file per butterfly.
pub fn write_flutter_dir(flutter: &Flutter, dir: &Path) -> Result<(), ButterflyError> {
    if flutter.depth > MAX_EXPLICIT_DEPTH {
        return Err(ButterflyError::DepthTooLarge {
            depth: flutter.depth,
            max: MAX_EXPLICIT_DEPTH,
        });
    }
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ButterflyError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    for k in flutter.centers() {
        let path = dir.join(format!("b{k}.model"));
        let text = save_model(&flutter.butterfly_model(k)?, None);
        fs::write(&path, text).map_err(io(&path))?;
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, flutter.manifest()).map_err(io(&path))
}

/// Reads a flutter directory. The flutter is rebuilt from the manifest; the
/// per-butterfly files are for inspection.
pub fn read_flutter_dir(dir: &Path) -> Result<Flutter, ButterflyError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|source| ButterflyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Flutter::parse_manifest(&text)
}

impl EpistemicStructure for Flutter {
    type State = FlutterState;

    fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    fn component(&self, agent: usize, s: FlutterState) -> Vec<FlutterState> {
        let mut out = match (self.edge_agent(s), self.parent(s)) {
            (Some(a), Some(p)) if a == agent => {
                let mut v = vec![p];
                v.extend(self.children(agent, p));
                v
            }
            _ => {
                let mut v = vec![s];
                v.extend(self.children(agent, s));
                v
            }
        };
        out.sort();
        out
    }

    fn less_eq(&self, agent: usize, a: FlutterState, b: FlutterState) -> bool {
        a == b || (self.edge_agent(a) == Some(agent) && self.parent(a) == Some(b))
    }

    fn satisfies(&self, atom: Atom, s: FlutterState) -> bool {
        match atom {
            Atom::Top => true,
            Atom::Height(n) => s.value == n,
        }
    }

    fn component_complete(&self, agent: usize, s: FlutterState) -> bool {
        !(self.is_frontier(s) && self.edge_agent(s) != Some(agent))
    }

    fn is_frontier(&self, s: FlutterState) -> bool {
        s.level == self.max_level()
    }

    fn safe_modal_depth(&self, s: FlutterState) -> Option<usize> {
        Some((self.max_level() - s.level) as usize)
    }

    fn min_steps_to(&self, s: FlutterState, target: Atom) -> usize {
        let Atom::Height(t) = target else {
            return 0;
        };
        let m = self.margin;
        if t % m != s.center % m {
            return usize::MAX;
        }
        let needed_level = t.abs_diff(s.center) / m;
        if needed_level > self.max_level() as u64 {
            return usize::MAX;
        }
        let by_level = needed_level.saturating_sub(s.level as u64);
        let by_value = t.abs_diff(s.value).div_ceil(2 * m);
        by_level.max(by_value) as usize
    }

    fn label(&self, s: FlutterState) -> String {
        s.to_string()
    }

    fn height_of(&self, s: FlutterState) -> Option<u64> {
        Some(s.value)
    }

    fn resolve(&self, label: &str) -> Option<FlutterState> {
        let (k, local) = label.strip_prefix('b')?.split_once(':')?;
        let mut s = self.center(k.parse().ok()?).ok()?;
        let mut chars = local.strip_prefix('w')?.chars();
        let branch = chars.next()?.to_digit(10)?;
        if branch == 0 {
            return chars.next().is_none().then_some(s);
        }
        if branch > 4 {
            return None;
        }
        let agent = (branch as usize - 1) / 2;
        s = self.children(agent, s)[(branch as usize - 1) % 2];
        for c in chars {
            let kids = self.children(1 - self.edge_agent(s)?, s);
            s = match c {
                '+' => *kids.last()?,
                '-' if kids.len() == 2 => kids[0],
                _ => return None,
            };
        }
        Some(s)
    }

    /// Every state of every butterfly; only practical for shallow flutters.
    fn states(&self) -> Vec<FlutterState> {
        self.centers()
            .flat_map(|k| self.butterfly_states(k).unwrap_or_default())
            .collect()
    }

    fn max_height(&self) -> Option<u64> {
        Some(self.hi + (self.depth as u64 + 1) * self.margin)
    }
}

impl Selection<FlutterState> for Flutter {
    fn select(&self, atom: Atom, w: FlutterState) -> Result<FlutterState, SelectionError> {
        match atom {
            Atom::Height(k) => self.center(k),
            Atom::Top => self.center(w.value),
        }
    }
}
