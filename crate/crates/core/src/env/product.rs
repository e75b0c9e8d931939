use std::collections::VecDeque;

use super::{LabeledModel, LabeledRewardMachine, MdpModel};
use crate::{Error, Result};

/// Product of an MDP model with a labeled reward machine, restricted to the
/// (state, node) pairs accessible from the initial distribution.
#[derive(Debug, Clone)]
pub struct ProductMdp {
    mdp: MdpModel,
    machine: LabeledRewardMachine,
    /// `index[s * n_nodes + u]` is the position of `(s, u)` in `pairs`.
    index: Vec<Option<usize>>,
    pairs: Vec<(usize, usize)>,
}

impl ProductMdp {
    pub fn build(mdp: &MdpModel, machine: &LabeledRewardMachine) -> Result<Self> {
        if machine.rewards().is_none() {
            return Err(Error::InvalidModel("product needs the machine's output function".into()));
        }
        if machine.n_states() != mdp.n_states() {
            return Err(Error::InvalidModel(format!(
                "labeling covers {} states, MDP has {}",
                machine.n_states(),
                mdp.n_states()
            )));
        }
        let n_nodes = machine.n_nodes();
        let mut index = vec![None; mdp.n_states() * n_nodes];
        let mut pairs = Vec::new();
        let mut queue = VecDeque::new();
        let mut visit = |s: usize, u: usize, queue: &mut VecDeque<(usize, usize)>| {
            let slot = &mut index[s * n_nodes + u];
            if slot.is_none() {
                *slot = Some(pairs.len());
                pairs.push((s, u));
                queue.push_back((s, u));
            }
        };
        for s0 in mdp.initial_support() {
            visit(s0, machine.advance(0, s0), &mut queue);
        }
        while let Some((s, u)) = queue.pop_front() {
            for &t in mdp.successors(s) {
                visit(t, machine.advance(u, t), &mut queue);
            }
        }
        Ok(Self { mdp: mdp.clone(), machine: machine.clone(), index, pairs })
    }

    pub fn mdp(&self) -> &MdpModel {
        &self.mdp
    }

    pub fn machine(&self) -> &LabeledRewardMachine {
        &self.machine
    }

    /// Accessible pairs in discovery order.
    pub fn accessible(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn index_of(&self, state: usize, node: usize) -> Option<usize> {
        self.index.get(state * self.machine.n_nodes() + node).copied().flatten()
    }

    /// Reward `delta_r(u, L(s'))` of the product transition into `next`.
    pub fn reward(&self, node: usize, next: usize) -> f64 {
        self.machine
            .reward(node, self.machine.label(next))
            .expect("product is only built with an output function")
    }

    /// Positive-probability product successors of pair `idx` under `action`:
    /// `(successor index, probability, reward)`.
    pub fn transitions(
        &self,
        idx: usize,
        action: usize,
    ) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let (s, u) = self.pairs[idx];
        self.mdp.row(s, action).iter().enumerate().filter(|(_, &p)| p > 0.0).map(
            move |(t, &p)| {
                let v = self.machine.advance(u, t);
                let j = self.index_of(t, v).expect("accessible set is closed under transitions");
                (j, p, self.reward(u, t))
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::fixtures;

    #[test]
    fn line3_accessible_pairs() {
        let fx = fixtures::line3();
        let prod = ProductMdp::build(&fx.mdp, &fx.machine).unwrap();
        let mut got: Vec<_> = prod.accessible().to_vec();
        got.sort();
        // (state, node), 0-based: {(1,1),(2,1),(3,2),(2,2),(1,2)} in 1-based form.
        assert_eq!(got, vec![(0, 0), (0, 1), (1, 0), (1, 1), (2, 1)]);
    }

    #[test]
    fn single_node_product_matches_base() {
        let fx = fixtures::line3();
        let single = LabeledRewardMachine::trivial(vec![0, 0, 1], 2).unwrap();
        let prod = ProductMdp::build(&fx.mdp, &single).unwrap();
        assert_eq!(prod.len(), fx.mdp.n_states());
    }

    #[test]
    fn requires_output_function() {
        let fx = fixtures::line3();
        let model = fx.machine.without_rewards();
        assert!(ProductMdp::build(&fx.mdp, &model).is_err());
    }

    #[test]
    fn product_kernel_rows_sum_to_one() {
        for fx in [fixtures::line3(), fixtures::patrol_abcd(), fixtures::pick_n_drop()] {
            let prod = ProductMdp::build(&fx.mdp, &fx.machine).unwrap();
            assert!(prod.len() <= fx.mdp.n_states() * fx.machine.n_nodes());
            for idx in 0..prod.len() {
                for a in 0..fx.mdp.n_actions() {
                    let total: f64 = prod.transitions(idx, a).map(|(_, p, _)| p).sum();
                    assert!((total - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
