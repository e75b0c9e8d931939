use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::signatures::SignaturePartition;
use crate::error::{Error, Result};
use super::tree::{PrefixId, PrefixTree};

/// Two prefixes that must reach different machine nodes, with a state/action
/// where their history-policy rows disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NegativePair {
    pub tau: PrefixId,
    pub tau_prime: PrefixId,
    pub witness: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeMode {
    /// Every cross-class pair.
    All,
    /// Group pairs by their (unordered) pair of terminal states and draw `k`
    /// uniformly without replacement from each group.
    PerTerminalSample { k: usize, seed: u64 },
}

/// One block of a terminal-state group: every pair `(a, b)` with `a` drawn
/// from `left` and `b` from `right`.
struct Block<'a> {
    left: &'a [PrefixId],
    right: &'a [PrefixId],
    witness: (usize, usize),
}

impl Block<'_> {
    fn len(&self) -> u128 {
        self.left.len() as u128 * self.right.len() as u128
    }

    fn pair(&self, i: u128) -> NegativePair {
        let w = self.right.len() as u128;
        NegativePair {
            tau: self.left[(i / w) as usize],
            tau_prime: self.right[(i % w) as usize],
            witness: self.witness,
        }
    }
}

/// Largest pair list [`checked_negatives`] will build in [`NegativeMode::All`].
pub const MAX_MATERIALIZED_PAIRS: u128 = 50_000_000;

/// [`materialize_negatives`] that refuses to build more than
/// [`MAX_MATERIALIZED_PAIRS`] pairs.
pub fn checked_negatives(
    tree: &PrefixTree,
    partition: &SignaturePartition,
    mode: NegativeMode,
) -> Result<Vec<NegativePair>> {
    let count = partition.negative_pair_count();
    if mode == NegativeMode::All && count > MAX_MATERIALIZED_PAIRS {
        return Err(Error::PairOverflow { count, cap: MAX_MATERIALIZED_PAIRS });
    }
    Ok(materialize_negatives(tree, partition, mode))
}

/// Turns the signature partition into an explicit list of negative examples.
pub fn materialize_negatives(
    tree: &PrefixTree,
    partition: &SignaturePartition,
    mode: NegativeMode,
) -> Vec<NegativePair> {
    let n = partition.n_classes();
    if n < 2 {
        return Vec::new();
    }
    match mode {
        NegativeMode::All => {
            let mut members: Vec<Vec<PrefixId>> = vec![Vec::new(); n];
            for id in tree.ids() {
                if let Some(c) = partition.class_of(id) {
                    members[c].push(id);
                }
            }
            let mut out = Vec::new();
            for c in 0..n {
                for d in (c + 1)..n {
                    if let Some(w) = partition.witness(c, d) {
                        let block = Block { left: &members[c], right: &members[d], witness: w };
                        out.extend((0..block.len()).map(|i| block.pair(i)));
                    }
                }
            }
            out
        }
        NegativeMode::PerTerminalSample { k, seed } => sample_per_terminal(tree, partition, k, seed),
    }
}

fn sample_per_terminal(
    tree: &PrefixTree,
    partition: &SignaturePartition,
    k: usize,
    seed: u64,
) -> Vec<NegativePair> {
    let n = partition.n_classes();
    // members[(terminal state, class)]
    let mut members: BTreeMap<(usize, usize), Vec<PrefixId>> = BTreeMap::new();
    for id in tree.ids() {
        if let Some(c) = partition.class_of(id) {
            members.entry((tree.state(id), c)).or_default().push(id);
        }
    }
    let terminals: Vec<usize> = {
        let mut t: Vec<usize> = members.keys().map(|&(s, _)| s).collect();
        t.dedup();
        t
    };
    let empty: Vec<PrefixId> = Vec::new();
    let get = |s: usize, c: usize| members.get(&(s, c)).unwrap_or(&empty);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (i, &s) in terminals.iter().enumerate() {
        for &t in &terminals[i..] {
            let mut blocks = Vec::new();
            for c in 0..n {
                for d in 0..n {
                    let Some(w) = partition.witness(c, d) else { continue };
                    // same terminal: unordered class pairs only
                    if s == t && d < c {
                        continue;
                    }
                    let block = Block { left: get(s, c), right: get(t, d), witness: w };
                    if block.len() > 0 {
                        blocks.push(block);
                    }
                }
            }
            let total: u128 = blocks.iter().map(Block::len).sum();
            if total == 0 {
                continue;
            }
            let locate = |mut i: u128| {
                for b in &blocks {
                    if i < b.len() {
                        return b.pair(i);
                    }
                    i -= b.len();
                }
                unreachable!("index within group total")
            };
            if total <= k as u128 {
                out.extend((0..total).map(locate));
            } else if total <= usize::MAX as u128 {
                let mut picked: Vec<usize> = index::sample(&mut rng, total as usize, k).into_vec();
                picked.sort_unstable();
                out.extend(picked.into_iter().map(|i| locate(i as u128)));
            } else {
                let mut seen = HashSet::new();
                while seen.len() < k {
                    let i = rand::Rng::gen_range(&mut rng, 0..total);
                    if seen.insert(i) {
                        out.push(locate(i));
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::fixtures;
    use crate::policy::{rows_differ, HistoryOracle, EPS_POLICY};
    use crate::traces::signatures::{compute_signatures, NO_CLASS};
    use crate::traces::tree::DEFAULT_NODE_CAP;

    fn two_classes() -> (PrefixTree, SignaturePartition) {
        let mut tree = PrefixTree::new(false, 100);
        for t in [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]] {
            tree.insert(&t).unwrap();
        }
        // ids: 1=(0) 2=(0,0) 3=(0,1) 4=(0,2) 5=(1) 6=(1,0) 7=(1,1) 8=(1,2)
        let class_of = vec![NO_CLASS, 0, 0, 0, 0, 1, 1, 1, 1];
        let row = |p: f64| Some(vec![p, 1.0 - p]);
        let part = SignaturePartition::from_class_rows(class_of, vec![vec![row(0.7)], vec![row(0.2)]], 1e-6)
            .unwrap();
        (tree, part)
    }

    #[test]
    fn all_mode_emits_every_cross_pair() {
        let (tree, part) = two_classes();
        assert_eq!(part.sizes(), &[4, 4]);
        let pairs = materialize_negatives(&tree, &part, NegativeMode::All);
        assert_eq!(pairs.len(), 16);
        assert_eq!(pairs.len() as u128, part.negative_pair_count());
        for p in &pairs {
            assert_ne!(part.class_of(p.tau), part.class_of(p.tau_prime));
        }
    }

    #[test]
    fn single_class_is_empty() {
        let mut tree = PrefixTree::new(false, 100);
        tree.insert(&[0, 1]).unwrap();
        let part = SignaturePartition::from_class_rows(vec![NO_CLASS, 0, 0], vec![vec![Some(vec![1.0])]], 1e-6)
            .unwrap();
        assert!(materialize_negatives(&tree, &part, NegativeMode::All).is_empty());
    }

    #[test]
    fn sampling_is_seeded_and_bounded() {
        let fx = fixtures::patrol_abcd();
        let oracle = HistoryOracle::for_fixture(&fx).unwrap();
        let tree = PrefixTree::enumerate(&fx.mdp, 4, false, DEFAULT_NODE_CAP).unwrap();
        let part = compute_signatures(&tree, &oracle, EPS_POLICY).unwrap();
        let mode = NegativeMode::PerTerminalSample { k: 20, seed: 7 };
        let a = materialize_negatives(&tree, &part, mode);
        let b = materialize_negatives(&tree, &part, mode);
        assert_eq!(a, b);
        let c = materialize_negatives(&tree, &part, NegativeMode::PerTerminalSample { k: 20, seed: 8 });
        assert_ne!(a, c);
        // at most k per unordered terminal pair
        let mut groups: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for p in &a {
            let (s, t) = (tree.state(p.tau), tree.state(p.tau_prime));
            *groups.entry((s.min(t), s.max(t))).or_default() += 1;
        }
        assert!(groups.values().all(|&n| n <= 20));
        let unique: HashSet<_> = a.iter().map(|p| (p.tau.min(p.tau_prime), p.tau.max(p.tau_prime))).collect();
        assert_eq!(unique.len(), a.len());
        // witnesses re-check against the oracle
        for p in a.iter().step_by(11) {
            let (s, act) = p.witness;
            let r1 = oracle.query(&tree.trajectory(p.tau), s).unwrap().unwrap();
            let r2 = oracle.query(&tree.trajectory(p.tau_prime), s).unwrap().unwrap();
            assert!(rows_differ(r1, r2, EPS_POLICY).unwrap());
            assert!((r1[act] - r2[act]).abs() > EPS_POLICY);
        }
    }

    #[test]
    fn large_sample_equals_all() {
        let (tree, part) = two_classes();
        let mut all = materialize_negatives(&tree, &part, NegativeMode::All);
        let mut sampled =
            materialize_negatives(&tree, &part, NegativeMode::PerTerminalSample { k: 1000, seed: 1 });
        let norm = |v: &mut Vec<NegativePair>| {
            for p in v.iter_mut() {
                if p.tau > p.tau_prime {
                    std::mem::swap(&mut p.tau, &mut p.tau_prime);
                }
            }
            v.sort();
        };
        norm(&mut all);
        norm(&mut sampled);
        assert_eq!(all, sampled);
    }
}
