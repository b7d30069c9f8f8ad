//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Every limit below is pinned here; the process exits non-zero when any
//! criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use plausibility_mc::butterfly::{build_butterfly, ButterflyError, ButterflyParams, Flutter};
use plausibility_mc::checker::{chain_formula, ck_at, diamond_chain_search, iterative_ck, Evaluator, Soundness};
use plausibility_mc::facts::{run_facts, run_facts_on, FactsConfig};
use plausibility_mc::formula::{agent_list, AgentId, Atom, Formula};
use plausibility_mc::lewis::{property_run, C4Reading};
use plausibility_mc::random::{declared_atoms, random_formula, random_model, rng, ModelShape};
use plausibility_mc::structure::EpistemicStructure;

const FACTS_LIMIT: Duration = Duration::from_secs(10);
const ORACLE_LIMIT: Duration = Duration::from_secs(60);
const LEWIS_LIMIT: Duration = Duration::from_secs(300);

const ORACLE_SEED: u64 = 0x5eed_0001;
const ORACLE_MODELS: usize = 200;
const ORACLE_FORMULAS: usize = 20;
const ORACLE_MAX_STATES: usize = 8;
const ORACLE_MAX_DEPTH: usize = 4;

const LEWIS_SEED: u64 = 0x5eed_0002;
const LEWIS_MODELS: usize = 500;
const LEWIS_MAX_STATES: usize = 6;

const CENTER: u64 = 300;
const THRESHOLD: u64 = 100;

fn agents() -> Vec<AgentId> {
    agent_list("R C").unwrap()
}

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Heights along the minus-most path from the center, computed directly:
/// `k, k − m, …` down to the first height below the threshold.
fn expected_chain(k: u64, m: u64, threshold: u64) -> Vec<u64> {
    let mut heights = vec![k];
    let mut h = k;
    while h >= threshold {
        h -= m;
        heights.push(h);
    }
    heights
}

fn key_facts() -> Outcome {
    let start = Instant::now();
    let report = match run_facts(&FactsConfig::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let text = report.to_string();
    let chain: Vec<String> = expected_chain(CENTER, 50, THRESHOLD).iter().map(u64::to_string).collect();
    let chain_ok = chain.len() == 6 && text.contains(&format!("heights {}", chain.join(", ")));
    let above_ok = text.contains("r^n([>100]) holds at w simultaneously: true");
    let passes = report.facts.iter().filter(|f| f.passed).count();
    outcome(
        passes == 5 && chain_ok && above_ok && elapsed < FACTS_LIMIT,
        format!("{passes}/5 facts, chain [{}], {elapsed:.2?} (limit {FACTS_LIMIT:?})", chain.join(",")),
    )
}

fn margin_sweep() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for m in [10, 50, 100] {
        let cfg = FactsConfig {
            cross_check_chains: false,
            ..FactsConfig::for_margin(m)
        };
        let expected_depth = (CENTER - THRESHOLD).div_ceil(m).max(6) as u32;
        ok &= cfg.depth == expected_depth;
        let fl = match cfg.flutter() {
            Ok(f) => f,
            Err(e) => return outcome(false, format!("m={m}: {e}")),
        };
        let report = match run_facts_on(&cfg, &fl) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("m={m}: {e}")),
        };
        ok &= report.all_pass();

        // largest height below the threshold reachable from the center
        let target = *expected_chain(CENTER, m, THRESHOLD).last().unwrap();
        let want = (CENTER - target).div_ceil(m) as usize;
        let w = fl.center(CENTER).unwrap();
        let mut ev = Evaluator::new(&fl, &fl);
        for (first, a) in agents().iter().enumerate() {
            let found = diamond_chain_search(&fl, w, first, Atom::Height(target), cfg.depth as usize + 1).unwrap();
            let depth = found.map(|c| c.depth);
            let at = ev.check(&chain_formula(a, want, Atom::Height(target), &agents()).unwrap(), w).unwrap();
            let below = ev.check(&chain_formula(a, want - 1, Atom::Height(target), &agents()).unwrap(), w).unwrap();
            let agree = depth == Some(want)
                && at.value
                && !below.value
                && at.soundness == Soundness::Exact
                && below.soundness == Soundness::Exact;
            ok &= agree;
            if first == 0 {
                let shown = depth.map_or("none".to_string(), |d| d.to_string());
                details.push(format!("m={m} d={}: [{target}] first reached at depth {shown}, expected {want}", cfg.depth));
            }
        }
    }
    outcome(ok, details.join("; "))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let shape = ModelShape {
        max_states: ORACLE_MAX_STATES,
        ..ModelShape::default()
    };
    let mut r = rng(ORACLE_SEED);
    let (mut checked, mut disagreements) = (0u64, 0u64);
    for _ in 0..ORACLE_MODELS {
        let (m, sel) = random_model(&mut r, &agents(), &shape);
        let atoms = declared_atoms(&m);
        let mut ev = Evaluator::new(&m, &sel);
        for _ in 0..ORACLE_FORMULAS {
            let phi = random_formula(&mut r, &atoms, &agents(), ORACLE_MAX_DEPTH);
            assert!(phi.modal_depth() <= ORACLE_MAX_DEPTH);
            for w in m.state_ids() {
                checked += 1;
                let got = ev.check(&phi, w).unwrap();
                if got.value != common::holds(&m, &sel, &phi, w) || got.soundness != Soundness::Exact {
                    disagreements += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        disagreements == 0 && elapsed < ORACLE_LIMIT,
        format!(
            "{ORACLE_MODELS} models x {ORACLE_FORMULAS} formulas, {checked} verdicts, {disagreements} disagreements, {elapsed:.2?} (limit {ORACLE_LIMIT:?})"
        ),
    )
}

fn structural_invariants() -> Outcome {
    let (mut built, mut refused, mut violations) = (0, 0, Vec::new());
    for k in [2, 150, 300] {
        for m in [1, 10, 50] {
            for d in 0..=6 {
                match build_butterfly(ButterflyParams { center: k, margin: m, depth: d }, &agents()) {
                    Ok(model) => {
                        built += 1;
                        for v in common::butterfly_violations(k, m, d, &model) {
                            violations.push(format!("k={k} m={m} d={d}: {v}"));
                        }
                    }
                    Err(ButterflyError::NonPositiveBase { .. }) if k <= m => refused += 1,
                    Err(e) => violations.push(format!("k={k} m={m} d={d}: {e}")),
                }
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "{built} butterflies, {refused} refused (k <= m), {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
        ),
    )
}

fn lewis_property_run() -> Outcome {
    let start = Instant::now();
    let shape = ModelShape {
        max_states: LEWIS_MAX_STATES,
        ..ModelShape::default()
    };
    let run = match property_run(LEWIS_SEED, LEWIS_MODELS, &shape, C4Reading::Local, LEWIS_MAX_STATES) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    outcome(
        run.passed() && run.skipped == 0 && run.premises_held > 0 && elapsed < LEWIS_LIMIT,
        format!(
            "{} models, {} pairs, {} with C1-C4, {} counterexamples, {} witnesses replayed, {} replay failures, {elapsed:.2?} (limit {LEWIS_LIMIT:?})",
            run.models,
            run.pairs,
            run.premises_held,
            run.counterexamples.len(),
            run.violations_replayed,
            run.replay_failures
        ),
    )
}

fn ck_negative_result() -> Outcome {
    let cfg = FactsConfig::default();
    let fl = Flutter::new(cfg.range.0, cfg.range.1, cfg.margin, cfg.depth, &agents()).unwrap();
    let w = fl.center(CENTER).unwrap();
    let above = Formula::any_height(THRESHOLD + 1..=fl.max_height().unwrap());
    let mut ev = Evaluator::new(&fl, &fl);
    let rep = iterative_ck(&mut ev, &[0, 1], &above).unwrap();
    let at = ck_at(&mut ev, &[0, 1], &above, w).unwrap();
    let excluded = !rep.contains(w) && rep.soundness(w) == Some(Soundness::Exact);
    let routes_agree = (at.value, at.soundness) == rep.verdicts[&w];
    let fact3 = run_facts_on(&cfg, &fl)
        .map(|r| r.facts.iter().any(|f| f.number == 3 && f.passed))
        .unwrap_or(false);
    let end = at.refutation.last().and_then(|&s| fl.height_of(s));
    outcome(
        excluded && routes_agree && fact3,
        format!(
            "center excluded: {excluded} ({}), refutation reaches height {end:?}, fact 3 on the same flutter: {}",
            rep.soundness(w).map_or("-".into(), |s| s.to_string()),
            if fact3 { "PASS" } else { "FAIL" }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("key facts", key_facts),
        ("margin sweep", margin_sweep),
        ("oracle equivalence", oracle_equivalence),
        ("structural invariants", structural_invariants),
        ("Lewis property run", lewis_property_run),
        ("CK negative result", ck_negative_result),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("{} criterion {} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, n + 1, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
