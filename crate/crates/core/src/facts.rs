//! The five key facts about the flutter, checked mechanically.
//!
//! With `w` the center of the `k`-centered butterfly:
//!
//! 1. `K_i([k−m] ∨ [k] ∨ [k+m])` for both agents.
//! 2. `R_i([k] | true)` for both agents.
//! 3. `r^n` of that disjunction and of `[>threshold]`, with support sets
//!    stabilizing at `{w}`.
//! 4. `r^n(R_j([k']) | [k'])` for each sampled `k'` and both `j`.
//! 5. Alternating `⟨K⟩`-chains reach every height `k − l·m > 0` inside the
//!    truncation, in particular the largest height below the threshold, at
//!    depth exactly `l`, while fact 3's `r^n([>threshold])` holds.

use std::fmt;

use thiserror::Error;

use crate::butterfly::{ButterflyError, Flutter, FlutterState};
use crate::checker::{chain_formula, diamond_chain_search, eval_counterfactual_iter, eval_iter_reason, CheckError, Evaluator, Soundness};
use crate::formula::{agent_list, AgentId, Atom, Formula};
use crate::structure::EpistemicStructure;

#[derive(Debug, Error)]
pub enum FactsError {
    #[error("threshold {threshold} must be below the center {center}")]
    ThresholdNotBelowCenter { threshold: u64, center: u64 },
    #[error("depth {depth} is too shallow: minimum depth {required} required")]
    DepthTooSmall { depth: u32, required: u32 },
    #[error("no height k − l·m below the threshold is reachable (k = {center}, m = {margin})")]
    NoSubThresholdHeight { center: u64, margin: u64 },
    #[error("{0} lies outside the flutter range")]
    OutOfRange(u64),
    #[error(transparent)]
    Butterfly(#[from] ButterflyError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactsConfig {
    pub center: u64,
    pub margin: u64,
    pub threshold: u64,
    pub depth: u32,
    pub range: (u64, u64),
    /// Centers `k'` for fact 4.
    pub samples: Vec<u64>,
    /// Highest `n` evaluated for `r^n`.
    pub iter_depth: usize,
    pub agents: Vec<AgentId>,
    /// Also evaluate the expanded diamond-chain formulas for fact 5.
    pub cross_check_chains: bool,
}

impl Default for FactsConfig {
    fn default() -> Self {
        Self {
            center: 300,
            margin: 50,
            threshold: 100,
            depth: 6,
            range: (0, 600),
            samples: vec![200, 250, 350],
            iter_depth: 6,
            agents: agent_list("R C").expect("valid agent names"),
            cross_check_chains: true,
        }
    }
}

impl FactsConfig {
    /// `ceil((k − threshold) / m)`, the depth needed for a chain from the
    /// center to fall below the threshold.
    pub fn required_depth(&self) -> u32 {
        (self.center.saturating_sub(self.threshold)).div_ceil(self.margin.max(1)) as u32
    }

    /// The default configuration with margin `m` and the least admissible
    /// depth (at least the default depth).
    pub fn for_margin(margin: u64) -> Self {
        let mut cfg = Self {
            margin,
            ..Self::default()
        };
        cfg.depth = cfg.depth.max(cfg.required_depth());
        cfg
    }

    /// `(l, k − l·m)` for the least `l` with `k − l·m < threshold`.
    pub fn sub_threshold_target(&self) -> Result<(u64, u64), FactsError> {
        let l = (self.center - self.threshold) / self.margin + 1;
        let t = self
            .center
            .checked_sub(l * self.margin)
            .ok_or(FactsError::NoSubThresholdHeight {
                center: self.center,
                margin: self.margin,
            })?;
        Ok((l, t))
    }

    pub fn validate(&self) -> Result<(), FactsError> {
        if self.margin == 0 {
            return Err(ButterflyError::ZeroMargin.into());
        }
        if self.threshold >= self.center {
            return Err(FactsError::ThresholdNotBelowCenter {
                threshold: self.threshold,
                center: self.center,
            });
        }
        let required = self.required_depth();
        if self.depth < required {
            return Err(FactsError::DepthTooSmall {
                depth: self.depth,
                required,
            });
        }
        let (lo, hi) = self.range;
        for &k in std::iter::once(&self.center).chain(&self.samples) {
            if k < lo || k > hi || k <= self.margin {
                return Err(FactsError::OutOfRange(k));
            }
        }
        self.sub_threshold_target()?;
        Ok(())
    }

    pub fn flutter(&self) -> Result<Flutter, FactsError> {
        Ok(Flutter::new(self.range.0, self.range.1, self.margin, self.depth, &self.agents)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactOutcome {
    pub number: u8,
    pub passed: bool,
    pub summary: String,
    /// Supporting detail lines (witness chains, support sets).
    pub details: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactsReport {
    pub config: FactsConfig,
    pub facts: Vec<FactOutcome>,
}

impl FactsReport {
    pub fn all_pass(&self) -> bool {
        self.facts.iter().all(|f| f.passed)
    }

    /// `key=value` lines, one per fact.
    pub fn machine_lines(&self) -> Vec<String> {
        self.facts
            .iter()
            .map(|f| format!("fact{}={}", f.number, if f.passed { "pass" } else { "fail" }))
            .collect()
    }
}

impl fmt::Display for FactsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "flutter: centers [{}, {}], margin {}, depth {}; w = b{}:w0; threshold {}",
            c.range.0, c.range.1, c.margin, c.depth, c.center, c.threshold
        )?;
        for fact in &self.facts {
            let verdict = if fact.passed { "PASS" } else { "FAIL" };
            writeln!(f, "fact {} {verdict}: {}", fact.number, fact.summary)?;
            for d in &fact.details {
                writeln!(f, "    {d}")?;
            }
        }
        Ok(())
    }
}

fn labels(states: &[FlutterState]) -> String {
    let parts: Vec<String> = states.iter().map(|s| s.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

/// Runs all five facts on the flutter described by `cfg`.
pub fn run_facts(cfg: &FactsConfig) -> Result<FactsReport, FactsError> {
    cfg.validate()?;
    run_facts_on(cfg, &cfg.flutter()?)
}

/// Runs all five facts on an existing flutter. Range, margin, depth and
/// agents are taken from the flutter.
pub fn run_facts_on(cfg: &FactsConfig, fl: &Flutter) -> Result<FactsReport, FactsError> {
    let cfg = &FactsConfig {
        range: fl.range(),
        margin: fl.margin(),
        depth: fl.depth(),
        agents: fl.agents().to_vec(),
        ..cfg.clone()
    };
    cfg.validate()?;
    let mut ev = Evaluator::new(fl, fl);
    let w = fl.center(cfg.center).map_err(CheckError::from)?;
    let (k, m) = (cfg.center, cfg.margin);
    let margins = Formula::any_height([k - m, k, k + m]);
    let ceiling = fl.max_height().unwrap_or(k + m);
    let above = Formula::any_height(cfg.threshold + 1..=ceiling);
    let mut facts = Vec::new();

    // Fact 1
    let mut passed = true;
    let mut details = Vec::new();
    for a in &cfg.agents {
        let r = ev.check(&Formula::know(a.clone(), margins.clone()), w)?;
        passed &= r.value && r.soundness.is_exact();
        details.push(format!("K_{a}([{}] | [{k}] | [{}]) = {} ({})", k - m, k + m, r.value, r.soundness));
    }
    facts.push(FactOutcome {
        number: 1,
        passed,
        summary: format!("both agents know the height is {k} ± {m}"),
        details,
    });

    // Fact 2
    let mut passed = true;
    let mut details = Vec::new();
    for a in &cfg.agents {
        let r = ev.check(&Formula::reason_uncond(a.clone(), Formula::height(k)), w)?;
        passed &= r.value && r.soundness.is_exact();
        details.push(format!("R_{a}([{k}] || true) = {} ({})", r.value, r.soundness));
    }
    facts.push(FactOutcome {
        number: 2,
        passed,
        summary: format!("both agents have an unconditional reason to believe [{k}]"),
        details,
    });

    // Fact 3
    let mut passed = true;
    let mut details = Vec::new();
    let mut above_holds = false;
    for (name, body) in [(format!("[{}] | [{k}] | [{}]", k - m, k + m), &margins), (format!("[>{}]", cfg.threshold), &above)] {
        let rep = eval_iter_reason(&mut ev, w, cfg.iter_depth, body, Atom::Top)?;
        let at_center = rep.support_sets().all(|s| s == [w]);
        let ok = rep.holds_for_all_levels() && rep.exact() && at_center;
        if body == &above {
            above_holds = ok;
        }
        passed &= ok;
        details.push(format!(
            "r^n({name} || true): holds for n = 0..={}, stabilized at level {}, support {}",
            cfg.iter_depth,
            rep.stabilized_at.map_or("-".to_string(), |n| n.to_string()),
            labels(&rep.levels.last().map(|l| l.support.clone()).unwrap_or_default()),
        ));
    }
    facts.push(FactOutcome {
        number: 3,
        passed,
        summary: format!("iterated reasons to believe {k} ± {m} and [>{}], supported only by w", cfg.threshold),
        details,
    });

    // Fact 4
    let mut passed = true;
    let mut details = Vec::new();
    for &kk in &cfg.samples {
        let target = fl.center(kk).map_err(CheckError::from)?;
        for j in &cfg.agents {
            let rep = eval_counterfactual_iter(&mut ev, w, cfg.iter_depth, kk, j)?;
            let ok = rep.holds_for_all_levels() && rep.exact() && rep.support_sets().all(|s| s == [target]);
            passed &= ok;
            details.push(format!(
                "r^n(R_{j}([{kk}]) || [{kk}]): {}, support {}",
                if ok { "holds at every level" } else { "fails" },
                labels(&rep.levels[0].support)
            ));
        }
    }
    facts.push(FactOutcome {
        number: 4,
        passed,
        summary: "counterfactual iterated reasons to believe each sampled height".to_string(),
        details,
    });

    // Fact 5
    let (l, t) = cfg.sub_threshold_target()?;
    let max_steps = cfg.depth as usize + 1;
    let mut passed = above_holds;
    let mut details = Vec::new();
    for (first, a) in cfg.agents.iter().enumerate() {
        // Every positive height k − l'·m inside the truncation.
        let mut l_prime = 1;
        while l_prime as usize <= max_steps && k > l_prime * m {
            let h = k - l_prime * m;
            let found = diamond_chain_search(fl, w, first, Atom::Height(h), max_steps)?;
            passed &= found.as_ref().is_some_and(|c| c.depth as u64 == l_prime);
            l_prime += 1;
        }
        let found = diamond_chain_search(fl, w, first, Atom::Height(t), max_steps)?;
        match found {
            Some(chain) if chain.depth as u64 == l => {
                let heights: Vec<String> = chain.states.iter().map(|s| s.value().to_string()).collect();
                details.push(format!("first agent {a}: [{t}] reached at depth {l}; heights {}", heights.join(", ")));
                details.push(format!("chain {}", labels(&chain.states)));
                if cfg.cross_check_chains {
                    let yes = ev.check(&chain_formula(a, l as usize, Atom::Height(t), &cfg.agents)?, w)?;
                    let no = ev.check(&chain_formula(a, l as usize - 1, Atom::Height(t), &cfg.agents)?, w)?;
                    let agree = yes.value && !no.value && yes.soundness == Soundness::Exact && no.soundness == Soundness::Exact;
                    details.push(format!(
                        "expanded chain formula: depth {l} {}, depth {} {}",
                        yes.value,
                        l - 1,
                        no.value
                    ));
                    passed &= agree;
                }
            }
            other => {
                passed = false;
                details.push(format!(
                    "first agent {a}: [{t}] expected at depth {l}, found {}",
                    other.map_or("none".to_string(), |c| c.depth.to_string())
                ));
            }
        }
    }
    details.push(format!("r^n([>{}]) holds at w simultaneously: {above_holds}", cfg.threshold));
    facts.push(FactOutcome {
        number: 5,
        passed,
        summary: format!("[>{}] is not iterated common knowledge: ⟨K⟩-chains reach [{t}]", cfg.threshold),
        details,
    });

    Ok(FactsReport {
        config: cfg.clone(),
        facts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_guards() {
        let cfg = FactsConfig {
            margin: 10,
            depth: 10,
            ..FactsConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(FactsError::DepthTooSmall { required: 20, .. })));
        let cfg = FactsConfig {
            threshold: 400,
            ..FactsConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(FactsError::ThresholdNotBelowCenter { .. })));
        assert_eq!(FactsConfig::default().sub_threshold_target().unwrap(), (5, 50));
        assert_eq!(FactsConfig::for_margin(10).sub_threshold_target().unwrap(), (21, 90));
        assert_eq!(FactsConfig::for_margin(100).sub_threshold_target().unwrap(), (3, 0));
    }

    #[test]
    fn default_facts_pass() {
        let rep = run_facts(&FactsConfig::default()).unwrap();
        assert!(rep.all_pass(), "{rep}");
        assert!(rep.to_string().contains("heights 300, 250, 200, 150, 100, 50"));
    }
}
