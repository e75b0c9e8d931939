//! Random small worlds for property tests and the acceptance suite.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmlearn::env::{LabeledRewardMachine, MdpModel};
use rmlearn::policy::{soft_value_iteration, HistoryOracle, VI_MAX_ITERS, VI_TOL};
use rmlearn::env::ProductMdp;

pub struct SmallWorld {
    pub mdp: MdpModel,
    pub truth: LabeledRewardMachine,
    pub oracle: HistoryOracle,
}

/// A random MDP with `2..=4` states and `1..=2` actions, and a random
/// machine with at most two nodes and two propositions.
pub fn small_world(seed: u64) -> SmallWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let na = rng.gen_range(1..=2);
    let rows: Vec<Vec<f64>> = (0..n * na)
        .map(|_| {
            let mut w: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { rng.gen_range(1..4) as f64 } else { 0.0 }).collect();
            if w.iter().all(|&x| x == 0.0) {
                w[rng.gen_range(0..n)] = 1.0;
            }
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| x / z).collect()
        })
        .collect();
    let mut init: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.6) { 1.0 } else { 0.0 }).collect();
    init[rng.gen_range(0..n)] = 1.0;
    let z: f64 = init.iter().sum();
    init.iter_mut().for_each(|x| *x /= z);
    let mdp = MdpModel::new(n, na, rows, init, 0.9).unwrap();

    let u = rng.gen_range(1..=2);
    let p = rng.gen_range(1..=2);
    let delta = (0..u * p).map(|_| rng.gen_range(0..u)).collect();
    let mut labeling: Vec<usize> = (0..n).map(|_| rng.gen_range(0..p)).collect();
    labeling[0] = 0;
    let rewards = (0..u * p).map(|_| rng.gen_range(0..3) as f64).collect();
    let truth = LabeledRewardMachine::new(u, p, delta, labeling, Some(rewards)).unwrap();
    let prod = ProductMdp::build(&mdp, &truth).unwrap();
    let oracle = HistoryOracle::new(soft_value_iteration(&prod, 0.5, VI_TOL, VI_MAX_ITERS).unwrap());
    SmallWorld { mdp, truth, oracle }
}

/// Largest depth `<= limit` whose prefix tree stays below `max_prefixes`.
pub fn affordable_depth(mdp: &MdpModel, limit: usize, max_prefixes: u128) -> usize {
    let counts = mdp.count_trajectories(limit, false);
    let mut total = 0u128;
    let mut best = 1;
    for (d, c) in counts.iter().enumerate() {
        total += c;
        if total > max_prefixes {
            break;
        }
        best = (d + 1).min(limit);
    }
    best
}
