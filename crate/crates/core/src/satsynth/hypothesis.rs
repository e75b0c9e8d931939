use std::collections::{BTreeMap, HashSet, VecDeque};
use std::io::Write;

use itertools::Itertools;
use serde::Serialize;

use crate::env::LabeledModel;
use crate::traces::{NegativePair, PrefixTree};
use crate::{Error, Result};

/// Largest symmetry group `orbit_size` is willing to walk.
pub const MAX_GROUP_SIZE: u128 = 1_000_000;

/// A decoded labeled machine model: transition table over `n_nodes` nodes and
/// `n_props` propositions plus a labeling of the MDP states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hypothesis {
    n_nodes: usize,
    n_props: usize,
    /// `delta[u * n_props + p]`
    delta: Vec<usize>,
    labeling: Vec<usize>,
}

impl LabeledModel for Hypothesis {
    fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    fn n_props(&self) -> usize {
        self.n_props
    }
    fn n_states(&self) -> usize {
        self.labeling.len()
    }
    fn next_node(&self, node: usize, prop: usize) -> usize {
        self.delta[node * self.n_props + prop]
    }
    fn label(&self, state: usize) -> usize {
        self.labeling[state]
    }
}

impl Hypothesis {
    pub fn new(n_nodes: usize, n_props: usize, delta: Vec<usize>, labeling: Vec<usize>) -> Result<Self> {
        if n_nodes == 0 || n_props == 0 || labeling.is_empty() {
            return Err(Error::InvalidModel("empty hypothesis".into()));
        }
        if delta.len() != n_nodes * n_props {
            return Err(Error::LengthMismatch(delta.len(), n_nodes * n_props));
        }
        if delta.iter().any(|&u| u >= n_nodes) || labeling.iter().any(|&p| p >= n_props) {
            return Err(Error::InvalidModel("hypothesis index out of range".into()));
        }
        if labeling[0] != 0 {
            return Err(Error::InvalidModel("hypothesis must label the first state with the first proposition".into()));
        }
        Ok(Self { n_nodes, n_props, delta, labeling })
    }

    /// Copies the transition and labeling functions of any labeled model.
    pub fn from_model<M: LabeledModel + ?Sized>(m: &M) -> Self {
        let delta = (0..m.n_nodes())
            .flat_map(|u| (0..m.n_props()).map(move |p| (u, p)))
            .map(|(u, p)| m.next_node(u, p))
            .collect();
        let labeling = (0..m.n_states()).map(|s| m.label(s)).collect();
        Self { n_nodes: m.n_nodes(), n_props: m.n_props(), delta, labeling }
    }

    pub fn delta(&self) -> &[usize] {
        &self.delta
    }

    pub fn labeling(&self) -> &[usize] {
        &self.labeling
    }

    /// Image under a node permutation `rho` (with `rho[0] = 0`) and a label
    /// permutation `sigma` (with `sigma[0] = 0`).
    pub fn renamed(&self, rho: &[usize], sigma: &[usize]) -> Self {
        let p_n = self.n_props;
        let mut delta = vec![0; self.delta.len()];
        for u in 0..self.n_nodes {
            for p in 0..p_n {
                delta[rho[u] * p_n + sigma[p]] = rho[self.delta[u * p_n + p]];
            }
        }
        let labeling = self.labeling.iter().map(|&p| sigma[p]).collect();
        Self { n_nodes: self.n_nodes, n_props: p_n, delta, labeling }
    }

    /// Nodes reachable from node 0 using only propositions that label some
    /// state, in breadth-first order.
    pub fn reachable_nodes(&self) -> Vec<usize> {
        let used = self.used_props();
        let mut seen = vec![false; self.n_nodes];
        let mut order = vec![0];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for &p in &used {
                let v = self.next_node(u, p);
                if !seen[v] {
                    seen[v] = true;
                    order.push(v);
                    queue.push_back(v);
                }
            }
        }
        order
    }

    /// Propositions in order of first appearance in the labeling.
    pub fn used_props(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n_props];
        let mut out = Vec::new();
        for &p in &self.labeling {
            if !seen[p] {
                seen[p] = true;
                out.push(p);
            }
        }
        out
    }

    /// Restriction to reachable nodes and used propositions.
    pub fn observable_part(&self) -> Self {
        let nodes = self.reachable_nodes();
        let props = self.used_props();
        let mut node_ix = vec![usize::MAX; self.n_nodes];
        for (i, &u) in nodes.iter().enumerate() {
            node_ix[u] = i;
        }
        let mut prop_ix = vec![usize::MAX; self.n_props];
        for (i, &p) in props.iter().enumerate() {
            prop_ix[p] = i;
        }
        let mut delta = Vec::with_capacity(nodes.len() * props.len());
        for &u in &nodes {
            for &p in &props {
                delta.push(node_ix[self.next_node(u, p)]);
            }
        }
        let labeling = self.labeling.iter().map(|&p| prop_ix[p]).collect();
        Self { n_nodes: nodes.len(), n_props: props.len(), delta, labeling }
    }

    /// Whether every pair reaches distinct nodes.
    pub fn separates(&self, tree: &PrefixTree, pairs: &[NegativePair]) -> bool {
        pairs.iter().all(|p| {
            self.run(&tree.trajectory(p.tau)) != self.run(&tree.trajectory(p.tau_prime))
        })
    }

    pub fn to_record(&self, id: usize, class: usize) -> HypothesisRecord {
        let mut edges = Vec::new();
        for u in 0..self.n_nodes {
            for p in 0..self.n_props {
                edges.push([u + 1, p + 1, self.next_node(u, p) + 1]);
            }
        }
        HypothesisRecord {
            id: id + 1,
            class: class + 1,
            n_nodes: self.n_nodes,
            n_props: self.n_props,
            edges,
            labeling: self.labeling.iter().map(|p| p + 1).collect(),
        }
    }
}

/// Text export of one hypothesis (all indices 1-based).
#[derive(Debug, Serialize)]
pub struct HypothesisRecord {
    pub id: usize,
    pub class: usize,
    pub n_nodes: usize,
    pub n_props: usize,
    /// `[from, proposition, to]`
    pub edges: Vec<[usize; 3]>,
    pub labeling: Vec<usize>,
}

/// Label relabeling by first appearance; unused labels keep their relative
/// order after the used ones.
fn first_appearance(h: &Hypothesis) -> Vec<usize> {
    let mut sigma = vec![usize::MAX; h.n_props];
    let mut next = 0;
    for &p in &h.labeling {
        if sigma[p] == usize::MAX {
            sigma[p] = next;
            next += 1;
        }
    }
    for s in sigma.iter_mut() {
        if *s == usize::MAX {
            *s = next;
            next += 1;
        }
    }
    sigma
}

/// Canonical representative under renaming of nodes (fixing node 0) and
/// labels (fixing label 0): the lexicographically smallest `(labeling,
/// delta)` over the group. With `reachable_only`, unreachable nodes and
/// unused propositions are dropped first.
pub fn canonicalize(h: &Hypothesis, reachable_only: bool) -> Hypothesis {
    let h = if reachable_only { h.observable_part() } else { h.clone() };
    // The labeling comes first in the order, so the best label permutation
    // numbers used labels by first appearance. Only unused labels remain
    // free; their columns are sorted for each node permutation.
    let sigma = first_appearance(&h);
    let n_used = h.used_props().len();
    let base = h.renamed(&(0..h.n_nodes).collect::<Vec<_>>(), &sigma);
    let p_n = h.n_props;
    let mut best: Option<Hypothesis> = None;
    for tail in (1..h.n_nodes).permutations(h.n_nodes - 1) {
        let mut rho = Vec::with_capacity(h.n_nodes);
        rho.push(0);
        rho.extend(tail);
        let mut cand = base.renamed(&rho, &(0..p_n).collect::<Vec<_>>());
        if n_used < p_n {
            let mut cols: Vec<Vec<usize>> = (n_used..p_n)
                .map(|p| (0..cand.n_nodes).map(|u| cand.next_node(u, p)).collect())
                .collect();
            cols.sort();
            for (offset, col) in cols.iter().enumerate() {
                for (u, &v) in col.iter().enumerate() {
                    cand.delta[u * p_n + n_used + offset] = v;
                }
            }
        }
        if best.as_ref().is_none_or(|b| cand.delta < b.delta) {
            best = Some(cand);
        }
    }
    best.expect("at least the identity permutation")
}

/// `(n_nodes - 1)! * (n_props - 1)!`
pub fn group_size(n_nodes: usize, n_props: usize) -> u128 {
    let fact = |n: usize| (1..=n as u128).product::<u128>();
    fact(n_nodes.saturating_sub(1)) * fact(n_props.saturating_sub(1))
}

/// Number of distinct images of `h` under the full renaming group, found by
/// applying every group element.
pub fn orbit_size(h: &Hypothesis) -> Result<usize> {
    let g = group_size(h.n_nodes, h.n_props);
    if g > MAX_GROUP_SIZE {
        return Err(Error::EnumerationCap { count: g, cap: MAX_GROUP_SIZE });
    }
    let mut images = HashSet::new();
    let sigmas: Vec<Vec<usize>> = (1..h.n_props)
        .permutations(h.n_props - 1)
        .map(|t| std::iter::once(0).chain(t).collect())
        .collect();
    for tail in (1..h.n_nodes).permutations(h.n_nodes - 1) {
        let rho: Vec<usize> = std::iter::once(0).chain(tail).collect();
        for sigma in &sigmas {
            images.insert(h.renamed(&rho, sigma));
        }
    }
    Ok(images.len())
}

/// Proposition 1 style bound on the depth beyond which no new constraints
/// appear: `n_states * u_max^2`.
pub fn sufficient_depth(n_states: usize, u_max: usize) -> usize {
    n_states * u_max * u_max
}

/// Models returned by an enumeration, with the truncation flag.
#[derive(Debug, Clone, Default)]
pub struct HypothesisSet {
    raw: Vec<Hypothesis>,
    truncated: bool,
}

impl HypothesisSet {
    pub fn new(raw: Vec<Hypothesis>, truncated: bool) -> Self {
        Self { raw, truncated }
    }

    pub fn raw(&self) -> &[Hypothesis] {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Canonical class -> number of raw members.
    pub fn classes(&self) -> BTreeMap<Hypothesis, usize> {
        let mut out = BTreeMap::new();
        for h in &self.raw {
            *out.entry(canonicalize(h, false)).or_insert(0) += 1;
        }
        out
    }

    pub fn n_classes(&self) -> usize {
        self.classes().len()
    }

    /// Exactly one canonical class. Errors on truncated sets.
    pub fn converged(&self) -> Result<bool> {
        if self.truncated {
            return Err(Error::Truncated { cap: self.raw.len() });
        }
        Ok(self.n_classes() == 1)
    }

    /// Whether some member agrees with `truth` up to renaming on its
    /// observable part.
    pub fn contains_equivalent<M: LabeledModel + ?Sized>(&self, truth: &M) -> bool {
        let target = canonicalize(&Hypothesis::from_model(truth), true);
        self.raw.iter().any(|h| canonicalize(h, true) == target)
    }

    /// Keeps the members that separate every pair.
    pub fn retain_separating(&mut self, tree: &PrefixTree, pairs: &[NegativePair]) {
        if pairs.is_empty() {
            return;
        }
        let ends: Vec<(Vec<usize>, Vec<usize>)> =
            pairs.iter().map(|p| (tree.trajectory(p.tau), tree.trajectory(p.tau_prime))).collect();
        self.raw.retain(|h| ends.iter().all(|(a, b)| h.run(a) != h.run(b)));
    }

    /// Sorted copy of the raw models, for set comparisons.
    pub fn sorted(&self) -> Vec<Hypothesis> {
        let mut v = self.raw.clone();
        v.sort();
        v
    }

    /// JSON array of records, one per raw model, tagged with its class.
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let classes: Vec<Hypothesis> = self.classes().into_keys().collect();
        let records: Vec<HypothesisRecord> = self
            .raw
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let c = classes.binary_search(&canonicalize(h, false)).expect("class present");
                h.to_record(i, c)
            })
            .collect();
        serde_json::to_writer_pretty(out, &records).map_err(|e| Error::Io(e.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::fixtures;
    use proptest::prelude::*;

    fn arb_hypothesis() -> impl Strategy<Value = Hypothesis> {
        (1usize..=4, 1usize..=4, 1usize..=6).prop_flat_map(|(u, p, s)| {
            (
                proptest::collection::vec(0..u, u * p),
                proptest::collection::vec(0..p, s - 1),
            )
                .prop_map(move |(delta, rest)| {
                    let mut labeling = vec![0];
                    labeling.extend(rest);
                    Hypothesis::new(u, p, delta, labeling).unwrap()
                })
        })
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
        Just((1..n).collect::<Vec<_>>()).prop_shuffle().prop_map(|t| {
            let mut v = vec![0];
            v.extend(t);
            v
        })
    }

    proptest! {
        #[test]
        fn canonical_form_is_orbit_invariant(
            (h, rho, sigma) in arb_hypothesis().prop_flat_map(|h| {
                let (u, p) = (h.n_nodes(), h.n_props());
                (Just(h), arb_perm(u), arb_perm(p))
            })
        ) {
            let g = h.renamed(&rho, &sigma);
            prop_assert_eq!(canonicalize(&h, false), canonicalize(&g, false));
            prop_assert_eq!(canonicalize(&h, true), canonicalize(&g, true));
            // renaming preserves run structure
            let tau: Vec<usize> = (0..h.n_states()).rev().collect();
            prop_assert_eq!(rho[h.run(&tau)], g.run(&tau));
        }

        #[test]
        fn canonical_form_is_lex_min_of_orbit(h in arb_hypothesis()) {
            let c = canonicalize(&h, false);
            let sigmas: Vec<Vec<usize>> = (1..h.n_props())
                .permutations(h.n_props() - 1)
                .map(|t| std::iter::once(0).chain(t).collect())
                .collect();
            let mut min: Option<(Vec<usize>, Vec<usize>)> = None;
            for tail in (1..h.n_nodes()).permutations(h.n_nodes() - 1) {
                let rho: Vec<usize> = std::iter::once(0).chain(tail).collect();
                for sigma in &sigmas {
                    let g = h.renamed(&rho, sigma);
                    let key = (g.labeling().to_vec(), g.delta().to_vec());
                    if min.as_ref().is_none_or(|m| key < *m) {
                        min = Some(key);
                    }
                }
            }
            let (lab, delta) = min.unwrap();
            prop_assert_eq!(c.labeling(), &lab[..]);
            prop_assert_eq!(c.delta(), &delta[..]);
        }

        #[test]
        fn orbit_size_divides_group(h in arb_hypothesis()) {
            let n = orbit_size(&h).unwrap() as u128;
            prop_assert_eq!(group_size(h.n_nodes(), h.n_props()) % n, 0);
        }
    }

    #[test]
    fn truth_orbits() {
        let line = Hypothesis::from_model(&fixtures::line3().machine);
        assert_eq!(orbit_size(&line).unwrap(), 1);
        let patrol = Hypothesis::from_model(&fixtures::patrol_abcd().machine);
        assert_eq!(orbit_size(&patrol).unwrap(), 36);
        assert_eq!(group_size(4, 4), 36);
        let pnd = Hypothesis::from_model(&fixtures::pick_n_drop().machine);
        assert_eq!(orbit_size(&pnd).unwrap(), 12);
    }

    #[test]
    fn depth_formula() {
        assert_eq!(sufficient_depth(16, 3), 144);
        assert_eq!(sufficient_depth(3, 2), 12);
    }

    #[test]
    fn convergence_and_truncation() {
        let h = Hypothesis::from_model(&fixtures::patrol_abcd().machine);
        let single = HypothesisSet::new(vec![h.clone()], false);
        assert!(single.converged().unwrap());
        let orbit: Vec<Hypothesis> = (1..4)
            .permutations(3)
            .map(|t| std::iter::once(0).chain(t).collect::<Vec<_>>())
            .map(|rho| h.renamed(&rho, &[0, 2, 1, 3]))
            .collect();
        let set = HypothesisSet::new(orbit, false);
        assert!(set.converged().unwrap());
        assert!(set.contains_equivalent(&fixtures::patrol_abcd().machine));
        let trunc = HypothesisSet::new(vec![h], true);
        assert!(matches!(trunc.converged(), Err(Error::Truncated { .. })));
    }

    #[test]
    fn observable_part_drops_unreachable() {
        // node 2 unreachable, label 1 unused
        let h = Hypothesis::new(3, 2, vec![1, 2, 0, 0, 2, 2], vec![0, 0]).unwrap();
        let o = h.observable_part();
        assert_eq!(o.n_nodes(), 2);
        assert_eq!(o.n_props(), 1);
        assert_eq!(o.delta(), &[1, 0]);
    }

    #[test]
    fn json_records_are_one_based() {
        let h = Hypothesis::from_model(&fixtures::line3().machine);
        let set = HypothesisSet::new(vec![h], false);
        let mut buf = Vec::new();
        set.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v[0]["labeling"], serde_json::json!([1, 1, 2]));
        assert_eq!(v[0]["edges"][1], serde_json::json!([1, 2, 2]));
    }
}
