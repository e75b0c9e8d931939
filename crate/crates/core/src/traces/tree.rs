use std::collections::HashMap;

use crate::env::MdpModel;
use crate::{Error, Result};

/// Index of a prefix (tree node). The root is the empty prefix.
pub type PrefixId = u32;
pub const ROOT: PrefixId = 0;
pub const DEFAULT_NODE_CAP: usize = 5_000_000;

const NO_STATE: u32 = u32::MAX;

/// Deduplicated trajectory prefixes stored as a parent-pointer tree. Node ids
/// grow along every root path, so a parent always precedes its children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixTree {
    parent: Vec<PrefixId>,
    state: Vec<u32>,
    depth: Vec<u16>,
    children: HashMap<(PrefixId, u32), PrefixId>,
    compressed: bool,
    cap: usize,
}

impl PrefixTree {
    pub fn new(compressed: bool, cap: usize) -> Self {
        Self {
            parent: vec![ROOT],
            state: vec![NO_STATE],
            depth: vec![0],
            children: HashMap::new(),
            compressed,
            cap,
        }
    }

    /// All feasible prefixes of length `1..=depth`, breadth first. With
    /// `compress`, consecutive repetitions of a state are collapsed.
    pub fn enumerate(mdp: &MdpModel, depth: usize, compress: bool, cap: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidModel("prefix depth must be at least 1".into()));
        }
        let mut tree = Self::new(compress, cap);
        let mut frontier: Vec<PrefixId> = Vec::new();
        for s in mdp.initial_support() {
            frontier.push(tree.child_or_insert(ROOT, s)?);
        }
        for _ in 1..depth {
            let mut next = Vec::with_capacity(frontier.len() * 4);
            for &id in &frontier {
                let s = tree.state(id);
                for &t in mdp.successors(s) {
                    if compress && t == s {
                        continue;
                    }
                    next.push(tree.child_or_insert(id, t)?);
                }
            }
            frontier = next;
        }
        Ok(tree)
    }

    pub(crate) fn from_parts(parent: Vec<PrefixId>, state: Vec<u32>, compressed: bool, cap: usize) -> Result<Self> {
        let mut tree = Self::new(compressed, cap);
        for (i, (&p, &s)) in parent.iter().zip(&state).enumerate().skip(1) {
            if p as usize >= i {
                return Err(Error::InvalidModel("prefix tree parent does not precede child".into()));
            }
            let id = tree.child_or_insert(p, s as usize)?;
            if id as usize != i {
                return Err(Error::InvalidModel("duplicate prefix in tree data".into()));
            }
        }
        Ok(tree)
    }

    fn child_or_insert(&mut self, parent: PrefixId, s: usize) -> Result<PrefixId> {
        let key = (parent, s as u32);
        if let Some(&id) = self.children.get(&key) {
            return Ok(id);
        }
        if self.parent.len() > self.cap {
            return Err(Error::TreeOverflow { count: self.parent.len(), cap: self.cap });
        }
        let id = self.parent.len() as PrefixId;
        self.parent.push(parent);
        self.state.push(s as u32);
        self.depth.push(self.depth[parent as usize] + 1);
        self.children.insert(key, id);
        Ok(id)
    }

    /// Inserts `tau` (assumed feasible) and returns the id of its last prefix.
    pub fn insert(&mut self, tau: &[usize]) -> Result<PrefixId> {
        let mut id = ROOT;
        for (i, &s) in tau.iter().enumerate() {
            if self.compressed && i > 0 && tau[i - 1] == s {
                continue;
            }
            id = self.child_or_insert(id, s)?;
        }
        Ok(id)
    }

    /// Id of `tau` if it is stored.
    pub fn find(&self, tau: &[usize]) -> Option<PrefixId> {
        let mut id = ROOT;
        for (i, &s) in tau.iter().enumerate() {
            if self.compressed && i > 0 && tau[i - 1] == s {
                continue;
            }
            id = *self.children.get(&(id, s as u32))?;
        }
        Some(id)
    }

    pub fn is_compressed(&self) -> bool {
        self.compressed
    }

    /// Number of tree nodes including the root.
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.len() == 1
    }

    /// Number of stored (nonempty) prefixes.
    pub fn n_prefixes(&self) -> usize {
        self.parent.len() - 1
    }

    pub fn parent(&self, id: PrefixId) -> PrefixId {
        self.parent[id as usize]
    }

    /// Last state of prefix `id`. Panics on the root.
    pub fn state(&self, id: PrefixId) -> usize {
        let s = self.state[id as usize];
        assert_ne!(s, NO_STATE, "the empty prefix has no state");
        s as usize
    }

    pub fn depth(&self, id: PrefixId) -> usize {
        self.depth[id as usize] as usize
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0) as usize
    }

    /// Prefix ids excluding the root.
    pub fn ids(&self) -> impl Iterator<Item = PrefixId> {
        1..self.parent.len() as PrefixId
    }

    pub fn trajectory(&self, id: PrefixId) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.depth(id));
        let mut cur = id;
        while cur != ROOT {
            out.push(self.state(cur));
            cur = self.parent(cur);
        }
        out.reverse();
        out
    }

    /// Number of prefixes of length exactly `depth`.
    pub fn count_at_depth(&self, depth: usize) -> usize {
        self.depth.iter().filter(|&&d| d as usize == depth).count()
    }

    pub(crate) fn raw_parts(&self) -> (&[PrefixId], &[u32]) {
        (&self.parent, &self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::fixtures;
    use std::collections::BTreeSet;

    /// Brute force: every sequence over the state set, kept if feasible.
    fn brute_force_prefixes(mdp: &MdpModel, depth: usize) -> BTreeSet<Vec<usize>> {
        let n = mdp.n_states();
        let mut out = BTreeSet::new();
        let mut layer: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..depth {
            let mut next = Vec::new();
            for t in &layer {
                for s in 0..n {
                    let mut u = t.clone();
                    u.push(s);
                    if mdp.is_feasible(&u) {
                        out.insert(u.clone());
                        next.push(u);
                    }
                }
            }
            layer = next;
        }
        out
    }

    #[test]
    fn line3_counts_match_brute_force() {
        let fx = fixtures::line3();
        for (depth, expected) in [(1, 3), (2, 9), (3, 21)] {
            let tree = PrefixTree::enumerate(&fx.mdp, depth, false, DEFAULT_NODE_CAP).unwrap();
            assert_eq!(tree.n_prefixes(), expected);
            let all: BTreeSet<_> = tree.ids().map(|id| tree.trajectory(id)).collect();
            assert_eq!(all, brute_force_prefixes(&fx.mdp, depth));
        }
    }

    #[test]
    fn compression_drops_repeats() {
        let fx = fixtures::patrol_abcd();
        let tree = PrefixTree::enumerate(&fx.mdp, 4, true, DEFAULT_NODE_CAP).unwrap();
        for id in tree.ids() {
            let t = tree.trajectory(id);
            assert!(t.windows(2).all(|w| w[0] != w[1]));
        }
        let counts = fx.mdp.count_trajectories(4, true);
        assert_eq!(tree.n_prefixes() as u128, counts.iter().sum::<u128>());
        let mut t2 = tree.clone();
        let id = t2.insert(&[1, 1, 2, 2]).unwrap();
        assert_eq!(t2.trajectory(id), vec![1, 2]);
        assert_eq!(t2.len(), tree.len());
    }

    #[test]
    fn node_cap_aborts() {
        let fx = fixtures::patrol_abcd();
        assert!(matches!(
            PrefixTree::enumerate(&fx.mdp, 6, false, 1000),
            Err(Error::TreeOverflow { cap: 1000, .. })
        ));
    }

    #[test]
    fn insert_and_find() {
        let mut tree = PrefixTree::new(false, 100);
        let a = tree.insert(&[0, 1, 2]).unwrap();
        let b = tree.insert(&[0, 1]).unwrap();
        assert_eq!(tree.parent(a), b);
        assert_eq!(tree.find(&[0, 1, 2]), Some(a));
        assert_eq!(tree.find(&[0, 2]), None);
        assert_eq!(tree.n_prefixes(), 3);
        assert_eq!(tree.depth(a), 3);
    }

    #[test]
    fn patrol_branch_counts() {
        let fx = fixtures::patrol_abcd();
        let counts = fx.mdp.count_trajectories(9, false);
        assert_eq!(&counts[5..9], &[6895, 26289, 100247, 382289]);
    }
}
