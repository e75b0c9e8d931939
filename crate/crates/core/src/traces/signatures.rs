use std::collections::HashMap;
use std::io::Write;

use super::tree::{PrefixId, PrefixTree, ROOT};
use crate::policy::{row_witness, HistoryCursor, HistoryOracle};
use crate::Result;

pub const NO_CLASS: u32 = u32::MAX;

/// Oracle rows of one behavior class, one entry per MDP state.
pub type ClassRows = Vec<Option<Vec<f64>>>;

/// Prefixes grouped by behavior signature: the map `s -> pi_h(. | s, tau)`
/// over the states where it is defined, quantized by the policy tolerance.
#[derive(Debug, Clone)]
pub struct SignaturePartition {
    class_of: Vec<u32>,
    sizes: Vec<usize>,
    representatives: Vec<PrefixId>,
    rows: Vec<ClassRows>,
    /// `witness[c * n + d]`: a state/action where classes `c` and `d` disagree
    /// at a commonly defined state.
    witness: Vec<Option<(usize, usize)>>,
    eps: f64,
}

fn fingerprint(rows: &ClassRows, eps: f64) -> Vec<i64> {
    let mut key = Vec::new();
    for row in rows {
        match row {
            None => key.push(i64::MIN),
            Some(r) => key.extend(r.iter().map(|p| (p / eps).round() as i64)),
        }
    }
    key
}

impl SignaturePartition {
    /// Builds a partition from explicit class rows; used by tests and by the
    /// oracle-driven constructor.
    pub fn from_class_rows(class_of: Vec<u32>, rows: Vec<ClassRows>, eps: f64) -> Result<Self> {
        let n = rows.len();
        let mut sizes = vec![0; n];
        let mut representatives = vec![ROOT; n];
        for (id, &c) in class_of.iter().enumerate() {
            if c != NO_CLASS {
                if sizes[c as usize] == 0 {
                    representatives[c as usize] = id as PrefixId;
                }
                sizes[c as usize] += 1;
            }
        }
        let mut witness = vec![None; n * n];
        for c in 0..n {
            for d in (c + 1)..n {
                let w = class_witness(&rows[c], &rows[d], eps)?;
                witness[c * n + d] = w;
                witness[d * n + c] = w;
            }
        }
        Ok(Self { class_of, sizes, representatives, rows, witness, eps })
    }

    pub fn n_classes(&self) -> usize {
        self.sizes.len()
    }

    /// Class of prefix `id`, `None` for the root or unclassified ids.
    pub fn class_of(&self, id: PrefixId) -> Option<usize> {
        match self.class_of.get(id as usize) {
            Some(&c) if c != NO_CLASS => Some(c as usize),
            _ => None,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn representative(&self, class: usize) -> PrefixId {
        self.representatives[class]
    }

    pub fn rows(&self, class: usize) -> &ClassRows {
        &self.rows[class]
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Witness `(state, action)` if the two classes form negative examples.
    pub fn witness(&self, c: usize, d: usize) -> Option<(usize, usize)> {
        self.witness[c * self.n_classes() + d]
    }

    /// Number of unordered prefix pairs that are negative examples.
    pub fn negative_pair_count(&self) -> u128 {
        let n = self.n_classes();
        let mut total = 0u128;
        for c in 0..n {
            for d in (c + 1)..n {
                if self.witness(c, d).is_some() {
                    total += self.sizes[c] as u128 * self.sizes[d] as u128;
                }
            }
        }
        total
    }

    /// `class,size,representative` with 1-based class ids and the
    /// representative written as a space-separated 1-based trajectory.
    pub fn write_class_sizes_csv<W: Write>(&self, tree: &PrefixTree, mut out: W) -> std::io::Result<()> {
        writeln!(out, "class,size,representative")?;
        for c in 0..self.n_classes() {
            let rep: Vec<String> =
                tree.trajectory(self.representatives[c]).iter().map(|s| (s + 1).to_string()).collect();
            writeln!(out, "{},{},{}", c + 1, self.sizes[c], rep.join(" "))?;
        }
        Ok(())
    }
}

fn class_witness(a: &ClassRows, b: &ClassRows, eps: f64) -> Result<Option<(usize, usize)>> {
    for (s, (ra, rb)) in a.iter().zip(b).enumerate() {
        // undefined on either side is never a disagreement
        if let (Some(ra), Some(rb)) = (ra, rb) {
            if let Some(action) = row_witness(ra, rb, eps)? {
                return Ok(Some((s, action)));
            }
        }
    }
    Ok(None)
}

/// Rows of the prefix behind `cursor` at every state.
pub(crate) fn cursor_rows(cursor: &HistoryCursor<'_>, n_states: usize) -> ClassRows {
    (0..n_states).map(|s| cursor.row(s).map(<[f64]>::to_vec)).collect()
}

/// Which states a prefix is queried at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryScope {
    /// Every state where the row is defined.
    #[default]
    AllStates,
    /// Only the prefix's own last state, so negative pairs always share
    /// their terminal state.
    Endpoint,
}

/// Row at the cursor's last state only.
pub(crate) fn endpoint_rows(cursor: &HistoryCursor<'_>, n_states: usize) -> ClassRows {
    let last = cursor.last().expect("nonempty prefix");
    let mut rows = vec![None; n_states];
    rows[last] = cursor.row(last).map(<[f64]>::to_vec);
    rows
}

/// Queries the oracle at every state for every prefix of `tree` and groups
/// prefixes with equal quantized row maps.
pub fn compute_signatures(tree: &PrefixTree, oracle: &HistoryOracle, eps: f64) -> Result<SignaturePartition> {
    compute_signatures_scoped(tree, oracle, eps, QueryScope::AllStates)
}

pub fn compute_signatures_scoped(
    tree: &PrefixTree,
    oracle: &HistoryOracle,
    eps: f64,
    scope: QueryScope,
) -> Result<SignaturePartition> {
    let n_states = oracle.mdp().n_states();
    let mut cursors: Vec<Option<HistoryCursor<'_>>> = Vec::with_capacity(tree.len());
    cursors.push(Some(oracle.cursor()));
    let mut class_of = vec![NO_CLASS; tree.len()];
    let mut interned: HashMap<Vec<i64>, u32> = HashMap::new();
    let mut rows: Vec<ClassRows> = Vec::new();
    for id in tree.ids() {
        let parent = cursors[tree.parent(id) as usize].as_ref().expect("parent precedes child");
        let cursor = parent.extended(tree.state(id))?;
        let r = match scope {
            QueryScope::AllStates => cursor_rows(&cursor, n_states),
            QueryScope::Endpoint => endpoint_rows(&cursor, n_states),
        };
        let key = fingerprint(&r, eps);
        let next = interned.len() as u32;
        let c = *interned.entry(key).or_insert_with(|| {
            rows.push(r);
            next
        });
        class_of[id as usize] = c;
        cursors.push(Some(cursor));
    }
    SignaturePartition::from_class_rows(class_of, rows, eps)
}
