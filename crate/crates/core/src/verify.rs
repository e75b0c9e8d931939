//! Independent brute-force checks: exhaustive hypothesis search, synchronized
//! machines, cycle removal and node-partition equivalence.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::env::{Fixture, LabeledModel, MdpModel};
use crate::policy::HistoryOracle;
use crate::satsynth::{sufficient_depth, Hypothesis, HypothesisSet};
use crate::traces::{compute_signatures_scoped, NegativePair, PrefixTree, QueryScope, SignaturePartition, ROOT};
use crate::{Error, Result};

/// Default limit on the number of candidate hypotheses a brute-force search
/// may walk.
pub const BRUTE_FORCE_CAP: u128 = 50_000_000;

/// Size of the anchored search space `u^(u*p) * p^(n-1)`.
pub fn search_space(u_max: usize, n_ap: usize, n_states: usize) -> u128 {
    let pow = |b: usize, e: usize| (b as u128).checked_pow(e as u32).unwrap_or(u128::MAX);
    pow(u_max, u_max * n_ap).saturating_mul(pow(n_ap, n_states.saturating_sub(1)))
}

fn non_stuttering(h: &Hypothesis) -> bool {
    (0..h.n_nodes()).all(|i| (0..h.n_props()).all(|p| {
        let j = h.next_node(i, p);
        h.next_node(j, p) == j
    }))
}

/// Calls `f` on every anchored hypothesis; stops early when `f` errs.
fn for_each_hypothesis(
    u_max: usize,
    n_ap: usize,
    n_states: usize,
    cap: u128,
    mut f: impl FnMut(&Hypothesis) -> Result<()>,
) -> Result<()> {
    let total = search_space(u_max, n_ap, n_states);
    if total > cap {
        return Err(Error::EnumerationCap { count: total, cap });
    }
    let mut delta = vec![0usize; u_max * n_ap];
    loop {
        let mut labeling = vec![0usize; n_states];
        loop {
            f(&Hypothesis::new(u_max, n_ap, delta.clone(), labeling.clone())?)?;
            if !odometer(&mut labeling[1..], n_ap) {
                break;
            }
        }
        if !odometer(&mut delta, u_max) {
            return Ok(());
        }
    }
}

/// Increments a base-`base` counter; false after wrapping around.
fn odometer(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Every anchored `(delta, labeling)` under which each pair of trajectories
/// ends in distinct nodes.
pub fn brute_force_feasible(
    pairs: &[(Vec<usize>, Vec<usize>)],
    u_max: usize,
    n_ap: usize,
    n_states: usize,
    require_non_stuttering: bool,
) -> Result<HypothesisSet> {
    let mut out = Vec::new();
    for_each_hypothesis(u_max, n_ap, n_states, BRUTE_FORCE_CAP, |h| {
        if (!require_non_stuttering || non_stuttering(h)) && pairs.iter().all(|(a, b)| h.run(a) != h.run(b)) {
            out.push(h.clone());
        }
        Ok(())
    })?;
    Ok(HypothesisSet::new(out, false))
}

/// Trajectories behind tree-indexed pairs.
pub fn pair_trajectories(tree: &PrefixTree, pairs: &[NegativePair]) -> Vec<(Vec<usize>, Vec<usize>)> {
    pairs.iter().map(|p| (tree.trajectory(p.tau), tree.trajectory(p.tau_prime))).collect()
}

/// Same as [`brute_force_feasible`] for the complete negative set implied by
/// a signature partition (every cross-class pair with a witness), checked
/// class by class without materializing pairs.
pub fn brute_force_partition_feasible(
    tree: &PrefixTree,
    partition: &SignaturePartition,
    u_max: usize,
    n_ap: usize,
    n_states: usize,
) -> Result<HypothesisSet> {
    let n_classes = partition.n_classes();
    let conflicts: Vec<(usize, usize)> = (0..n_classes)
        .flat_map(|c| ((c + 1)..n_classes).map(move |d| (c, d)))
        .filter(|&(c, d)| partition.witness(c, d).is_some())
        .collect();
    let mut out = Vec::new();
    let mut node = vec![0usize; tree.len()];
    let mut reached = vec![0u64; n_classes];
    if u_max > 64 {
        return Err(Error::Usage("brute force supports at most 64 nodes".into()));
    }
    for_each_hypothesis(u_max, n_ap, n_states, BRUTE_FORCE_CAP, |h| {
        reached.iter_mut().for_each(|r| *r = 0);
        node[ROOT as usize] = 0;
        for id in tree.ids() {
            let u = h.advance(node[tree.parent(id) as usize], tree.state(id));
            node[id as usize] = u;
            if let Some(c) = partition.class_of(id) {
                reached[c] |= 1 << u;
            }
        }
        if conflicts.iter().all(|&(c, d)| reached[c] & reached[d] == 0) {
            out.push(h.clone());
        }
        Ok(())
    })?;
    Ok(HypothesisSet::new(out, false))
}

/// Brute-force feasible set for the full depth-`depth` evidence of a fixture.
pub fn feasible_at_depth(
    fx: &Fixture,
    oracle: &HistoryOracle,
    depth: usize,
    u_max: usize,
    n_ap: usize,
    scope: QueryScope,
    eps: f64,
) -> Result<HypothesisSet> {
    let tree = PrefixTree::enumerate(&fx.mdp, depth, false, crate::traces::DEFAULT_NODE_CAP)?;
    let part = compute_signatures_scoped(&tree, oracle, eps, scope)?;
    brute_force_partition_feasible(&tree, &part, u_max, n_ap, fx.mdp.n_states())
}

/// Whether the feasible set at the sufficient depth equals the one a step
/// further.
pub fn check_depth_stabilization(fx: &Fixture, u_max: usize, n_ap: usize, eps: f64) -> Result<bool> {
    let oracle = HistoryOracle::for_fixture(fx)?;
    let l = sufficient_depth(fx.mdp.n_states(), u_max);
    sets_equal_at(fx, &oracle, l, u_max, n_ap, eps)
}

/// Whether the feasible sets at `depth` and `depth + 1` coincide.
pub fn sets_equal_at(
    fx: &Fixture,
    oracle: &HistoryOracle,
    depth: usize,
    u_max: usize,
    n_ap: usize,
    eps: f64,
) -> Result<bool> {
    let a = feasible_at_depth(fx, oracle, depth, u_max, n_ap, QueryScope::AllStates, eps)?;
    let b = feasible_at_depth(fx, oracle, depth + 1, u_max, n_ap, QueryScope::AllStates, eps)?;
    Ok(a.sorted() == b.sorted())
}

/// Parallel composition of two labeled models over a shared state set. Node
/// `(u1, u2)` is numbered `u1 * n2 + u2` and label `(l1, l2)` is
/// `l1 * p2 + l2`.
#[derive(Debug, Clone)]
pub struct SyncMachine {
    g1: Hypothesis,
    g2: Hypothesis,
}

pub fn build_sync<A, B>(g1: &A, g2: &B) -> Result<SyncMachine>
where
    A: LabeledModel + ?Sized,
    B: LabeledModel + ?Sized,
{
    if g1.n_states() != g2.n_states() {
        return Err(Error::LengthMismatch(g1.n_states(), g2.n_states()));
    }
    Ok(SyncMachine { g1: Hypothesis::from_model(g1), g2: Hypothesis::from_model(g2) })
}

impl SyncMachine {
    pub fn pair_of(&self, node: usize) -> (usize, usize) {
        (node / self.g2.n_nodes(), node % self.g2.n_nodes())
    }

    pub fn node_of(&self, u1: usize, u2: usize) -> usize {
        u1 * self.g2.n_nodes() + u2
    }
}

impl LabeledModel for SyncMachine {
    fn n_nodes(&self) -> usize {
        self.g1.n_nodes() * self.g2.n_nodes()
    }
    fn n_props(&self) -> usize {
        self.g1.n_props() * self.g2.n_props()
    }
    fn n_states(&self) -> usize {
        self.g1.n_states()
    }
    fn next_node(&self, node: usize, prop: usize) -> usize {
        let (u1, u2) = self.pair_of(node);
        let (l1, l2) = (prop / self.g2.n_props(), prop % self.g2.n_props());
        self.node_of(self.g1.next_node(u1, l1), self.g2.next_node(u2, l2))
    }
    fn label(&self, state: usize) -> usize {
        self.g1.label(state) * self.g2.n_props() + self.g2.label(state)
    }
}

/// Repeatedly cuts `s_{i+1..j}` out of `tau` when `s_i = s_j` and `g` is in
/// the same node after both prefixes.
pub fn remove_cycles<M: LabeledModel + ?Sized>(tau: &[usize], g: &M) -> Vec<usize> {
    let mut cur = tau.to_vec();
    'again: loop {
        let mut first: HashMap<(usize, usize), usize> = HashMap::new();
        let mut u = 0;
        for (j, &s) in cur.iter().enumerate() {
            u = g.advance(u, s);
            if let Some(&i) = first.get(&(s, u)) {
                cur.drain(i + 1..=j);
                continue 'again;
            }
            first.insert((s, u), j);
        }
        return cur;
    }
}

/// Whether the two models induce the same partition of feasible trajectories
/// (up to length `depth`) by reached node: the reachable `(u1, u2)` pairs
/// must form a bijection between the nodes either model actually visits.
pub fn node_partition_equivalent<A, B>(g1: &A, g2: &B, mdp: &MdpModel, depth: usize) -> Result<bool>
where
    A: LabeledModel + ?Sized,
    B: LabeledModel + ?Sized,
{
    let bound = mdp.n_states() * g1.n_nodes() * g2.n_nodes();
    if depth < bound {
        return Err(Error::Usage(format!("depth {depth} is below the product bound {bound}")));
    }
    let sync = build_sync(g1, g2)?;
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut queue = VecDeque::new();
    for s in mdp.initial_support() {
        let key = (s, sync.advance(0, s));
        if seen.insert(key) {
            queue.push_back((key, 1));
        }
    }
    while let Some(((s, u), d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        for &t in mdp.successors(s) {
            let key = (t, sync.advance(u, t));
            if seen.insert(key) {
                queue.push_back((key, d + 1));
            }
        }
    }
    let mut forward: HashMap<usize, usize> = HashMap::new();
    let mut backward: HashMap<usize, usize> = HashMap::new();
    for &(_, u) in &seen {
        let (a, b) = sync.pair_of(u);
        if *forward.entry(a).or_insert(b) != b || *backward.entry(b).or_insert(a) != a {
            return Ok(false);
        }
    }
    Ok(true)
}
