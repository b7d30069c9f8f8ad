//! Seeded random models, selection tables and formulas for property runs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formula::{AgentId, Atom, Formula};
use crate::model::{Closure, Model, ModelBuilder, StateId, TableSelection};
use crate::structure::EpistemicStructure;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct ModelShape {
    pub min_states: usize,
    pub max_states: usize,
    /// Heights are drawn from `1..=heights`.
    pub heights: u64,
    /// Probability that a given ordered pair is a generator of an order.
    pub edge_probability: f64,
    /// Probability that a state satisfies a given height.
    pub height_probability: f64,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            min_states: 1,
            max_states: 8,
            heights: 3,
            edge_probability: 0.2,
            height_probability: 0.4,
        }
    }
}

/// A random model with random preorders (closures of random generator
/// pairs) and a total selection table for `true` and every occurring height.
pub fn random_model(rng: &mut SeededRng, agents: &[AgentId], shape: &ModelShape) -> (Model, TableSelection) {
    let n = rng.random_range(shape.min_states..=shape.max_states);
    let mut b = ModelBuilder::new(agents.to_vec()).expect("agents are distinct");
    let ids: Vec<StateId> = (0..n).map(|i| b.state(format!("s{i}")).expect("fresh name")).collect();
    for &s in &ids {
        for h in 1..=shape.heights {
            if rng.random_bool(shape.height_probability) {
                b.height(h, s);
            }
        }
    }
    for agent in agents {
        b.closure(agent, Closure::Auto).expect("declared agent");
        for &x in &ids {
            for &y in &ids {
                if x != y && rng.random_bool(shape.edge_probability) {
                    b.order_pair(agent, x, y).expect("declared agent");
                }
            }
        }
    }
    let model = b.build().expect("closure always yields a preorder");

    let mut table = TableSelection::new();
    let atoms = declared_atoms(&model);
    for &atom in &atoms {
        let ext: Vec<StateId> = model.state_ids().filter(|&s| model.satisfies(atom, s)).collect();
        for w in model.state_ids() {
            let t = *ext.choose(rng).expect("declared atoms have nonempty extensions");
            table.insert(&model, atom, w, t).expect("target satisfies the atom");
        }
    }
    (model, table)
}

/// `true` followed by every height occurring in the model.
pub fn declared_atoms(model: &Model) -> Vec<Atom> {
    std::iter::once(Atom::Top).chain(model.heights().map(Atom::Height)).collect()
}

/// A random formula over `atoms` and `agents` of modal depth at most
/// `max_depth`.
pub fn random_formula(rng: &mut SeededRng, atoms: &[Atom], agents: &[AgentId], max_depth: usize) -> Formula {
    gen_formula(rng, atoms, agents, max_depth, max_depth + 3)
}

fn gen_formula(rng: &mut SeededRng, atoms: &[Atom], agents: &[AgentId], depth: usize, size: usize) -> Formula {
    let leaf = size == 0 || rng.random_bool(0.2);
    if leaf {
        return Formula::atom(*atoms.choose(rng).expect("atoms are nonempty"));
    }
    let modal = depth > 0;
    let choice = rng.random_range(0..if modal { 5 } else { 2 });
    match choice {
        0 => Formula::not(gen_formula(rng, atoms, agents, depth, size - 1)),
        1 => Formula::and(
            gen_formula(rng, atoms, agents, depth, size - 1),
            gen_formula(rng, atoms, agents, depth, size - 1),
        ),
        2 | 3 => {
            let a = agents.choose(rng).expect("agents are nonempty").clone();
            let cond = *atoms.choose(rng).expect("atoms are nonempty");
            Formula::reason(a, gen_formula(rng, atoms, agents, depth - 1, size - 1), cond)
        }
        _ => {
            let a = agents.choose(rng).expect("agents are nonempty").clone();
            Formula::know(a, gen_formula(rng, atoms, agents, depth - 1, size - 1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::agent_list;

    #[test]
    fn generation_is_seed_deterministic() {
        let agents = agent_list("R C").unwrap();
        let shape = ModelShape::default();
        let (m1, t1) = random_model(&mut rng(7), &agents, &shape);
        let (m2, t2) = random_model(&mut rng(7), &agents, &shape);
        assert!(m1.same_as(&m2));
        assert_eq!(t1, t2);
        let atoms = declared_atoms(&m1);
        let f1 = random_formula(&mut rng(9), &atoms, &agents, 4);
        let f2 = random_formula(&mut rng(9), &atoms, &agents, 4);
        assert_eq!(f1, f2);
        assert!(f1.modal_depth() <= 4);
    }
}
