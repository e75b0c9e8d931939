use std::collections::HashSet;
use std::io::Write;
use std::time::{Duration, Instant};

use super::backend::{CadicalBackend, SatBackend};
use super::hypothesis::{Hypothesis, HypothesisSet};
use crate::env::LabeledModel;
use crate::traces::{NegativePair, PrefixId, PrefixTree, ROOT};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodingParams {
    pub u_max: usize,
    pub n_ap: usize,
    pub n_states: usize,
    pub non_stuttering: bool,
    /// Route propagation through per-state auxiliary variables
    /// `m(k,i,j) <-> trans(i, L(k), j)` instead of the direct four-literal
    /// clauses. Both encodings have the same models over `trans` and `lab`.
    pub aux_matrices: bool,
    /// Keep a copy of every clause (for DIMACS export and clause checks).
    pub record_clauses: bool,
}

impl EncodingParams {
    pub fn new(u_max: usize, n_ap: usize, n_states: usize) -> Self {
        Self { u_max, n_ap, n_states, non_stuttering: false, aux_matrices: true, record_clauses: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_max == 0 {
            return Err(Error::Usage("u_max must be at least 1".into()));
        }
        if self.n_ap == 0 || self.n_ap > self.n_states {
            return Err(Error::Usage(format!(
                "n_ap must lie in 1..={} (got {})",
                self.n_states, self.n_ap
            )));
        }
        Ok(())
    }
}

/// Semantic name of a CNF variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarName {
    Trans { from: usize, prop: usize, to: usize },
    Lab { prop: usize, state: usize },
    Aux { state: usize, from: usize, to: usize },
    Reach { prefix: PrefixId, node: usize },
    Selector,
}

/// Solver statistics accumulated over the lifetime of an instance.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub solve_calls: u64,
    pub solve_time: Duration,
}

/// Incremental CNF instance for the labeled machine inference problem.
pub struct CnfInstance {
    params: EncodingParams,
    backend: Box<dyn SatBackend>,
    n_vars: i32,
    n_clauses: usize,
    lab_base: i32,
    aux_base: i32,
    /// First reach variable of each encoded prefix (0 = not encoded).
    reach_base: Vec<i32>,
    /// `(first var, prefix)` of each reach block, in allocation order.
    reach_blocks: Vec<(i32, PrefixId)>,
    selectors: Vec<i32>,
    seen_pairs: HashSet<(PrefixId, PrefixId)>,
    n_pairs: usize,
    log: Option<Vec<Vec<i32>>>,
    /// Last complete enumeration, kept current by incremental additions.
    cached: Option<HypothesisSet>,
    stats: SolveStats,
}

impl std::fmt::Debug for CnfInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CnfInstance")
            .field("params", &self.params)
            .field("n_vars", &self.n_vars)
            .field("n_clauses", &self.n_clauses)
            .field("n_pairs", &self.n_pairs)
            .finish()
    }
}

/// Builds the instance for `pairs` over prefixes of `tree` with the default
/// backend.
pub fn encode(pairs: &[NegativePair], tree: &PrefixTree, params: EncodingParams) -> Result<CnfInstance> {
    encode_with(pairs, tree, params, Box::new(CadicalBackend::new()))
}

/// [`encode`] on a caller-supplied backend.
pub fn encode_with(
    pairs: &[NegativePair],
    tree: &PrefixTree,
    params: EncodingParams,
    backend: Box<dyn SatBackend>,
) -> Result<CnfInstance> {
    let mut inst = CnfInstance::new(params, backend)?;
    inst.add_pairs(pairs, tree)?;
    Ok(inst)
}

/// Appends `pairs` to `inst` and evicts cached models that fail them.
pub fn add_negatives_incremental(
    mut inst: CnfInstance,
    pairs: &[NegativePair],
    tree: &PrefixTree,
) -> Result<CnfInstance> {
    inst.add_pairs(pairs, tree)?;
    Ok(inst)
}

impl CnfInstance {
    /// Base constraints: functional transition table, functional labeling,
    /// anchoring, optional non-stuttering and the root reach row.
    pub fn new(params: EncodingParams, backend: Box<dyn SatBackend>) -> Result<Self> {
        params.validate()?;
        let (u, p, s) = (params.u_max as i32, params.n_ap as i32, params.n_states as i32);
        let lab_base = 1 + u * p * u;
        let aux_base = lab_base + p * s;
        let n_vars = if params.aux_matrices { aux_base + s * u * u - 1 } else { aux_base - 1 };
        let mut inst = Self {
            params,
            backend,
            n_vars,
            n_clauses: 0,
            lab_base,
            aux_base,
            reach_base: Vec::new(),
            reach_blocks: Vec::new(),
            selectors: Vec::new(),
            seen_pairs: HashSet::new(),
            n_pairs: 0,
            log: params.record_clauses.then(Vec::new),
            cached: None,
            stats: SolveStats::default(),
        };
        let (u, p, s) = (params.u_max, params.n_ap, params.n_states);
        for i in 0..u {
            for q in 0..p {
                let row: Vec<i32> = (0..u).map(|j| inst.trans(i, q, j)).collect();
                inst.exactly_one(&row);
            }
        }
        for k in 0..s {
            let col: Vec<i32> = (0..p).map(|q| inst.lab(q, k)).collect();
            inst.exactly_one(&col);
        }
        inst.clause(vec![inst.lab(0, 0)]);
        if params.non_stuttering {
            for i in 0..u {
                for q in 0..p {
                    for j in 0..u {
                        if i != j {
                            inst.clause(vec![-inst.trans(i, q, j), inst.trans(j, q, j)]);
                        }
                    }
                }
            }
        }
        if params.aux_matrices {
            for k in 0..s {
                for q in 0..p {
                    for i in 0..u {
                        for j in 0..u {
                            let (l, t, m) = (inst.lab(q, k), inst.trans(i, q, j), inst.aux(k, i, j));
                            inst.clause(vec![-l, -t, m]);
                            inst.clause(vec![-m, -l, t]);
                        }
                    }
                }
            }
        }
        inst.reach_base.push(0);
        let root = inst.alloc_reach(ROOT);
        let row: Vec<i32> = (0..u as i32).map(|i| root + i).collect();
        inst.exactly_one(&row);
        inst.clause(vec![root]);
        Ok(inst)
    }

    pub fn params(&self) -> &EncodingParams {
        &self.params
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars as usize
    }

    pub fn n_clauses(&self) -> usize {
        self.n_clauses
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn n_encoded_prefixes(&self) -> usize {
        self.reach_blocks.len()
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    pub fn clauses(&self) -> Option<&[Vec<i32>]> {
        self.log.as_deref()
    }

    pub fn n_decision_vars(&self) -> usize {
        (self.aux_base - 1) as usize
    }

    pub fn trans(&self, i: usize, p: usize, j: usize) -> i32 {
        let (u, pn) = (self.params.u_max, self.params.n_ap);
        1 + ((i * pn + p) * u + j) as i32
    }

    pub fn lab(&self, p: usize, k: usize) -> i32 {
        self.lab_base + (k * self.params.n_ap + p) as i32
    }

    fn aux(&self, k: usize, i: usize, j: usize) -> i32 {
        let u = self.params.u_max;
        self.aux_base + ((k * u + i) * u + j) as i32
    }

    /// Reach variable of an encoded prefix.
    pub fn reach(&self, prefix: PrefixId, node: usize) -> Option<i32> {
        match self.reach_base.get(prefix as usize) {
            Some(&b) if b != 0 => Some(b + node as i32),
            _ => None,
        }
    }

    pub fn var_name(&self, var: i32) -> Option<VarName> {
        let (u, p) = (self.params.u_max, self.params.n_ap);
        if var < 1 || var > self.n_vars {
            return None;
        }
        if var < self.lab_base {
            let x = (var - 1) as usize;
            return Some(VarName::Trans { from: x / (p * u), prop: (x / u) % p, to: x % u });
        }
        if var < self.aux_base {
            let x = (var - self.lab_base) as usize;
            return Some(VarName::Lab { prop: x % p, state: x / p });
        }
        let aux_end = if self.params.aux_matrices { self.aux_base + (self.params.n_states * u * u) as i32 } else { self.aux_base };
        if var < aux_end {
            let x = (var - self.aux_base) as usize;
            return Some(VarName::Aux { state: x / (u * u), from: (x / u) % u, to: x % u });
        }
        if self.selectors.binary_search(&var).is_ok() {
            return Some(VarName::Selector);
        }
        let i = self.reach_blocks.partition_point(|&(b, _)| b <= var);
        let (b, prefix) = self.reach_blocks[i.checked_sub(1)?];
        Some(VarName::Reach { prefix, node: (var - b) as usize })
    }

    fn clause(&mut self, lits: Vec<i32>) {
        self.backend.add_clause(&lits);
        self.n_clauses += 1;
        if let Some(log) = &mut self.log {
            log.push(lits);
        }
    }

    fn exactly_one(&mut self, vars: &[i32]) {
        self.clause(vars.to_vec());
        for (a, &x) in vars.iter().enumerate() {
            for &y in &vars[a + 1..] {
                self.clause(vec![-x, -y]);
            }
        }
    }

    fn fresh(&mut self, n: usize) -> i32 {
        let first = self.n_vars + 1;
        self.n_vars += n as i32;
        first
    }

    fn alloc_reach(&mut self, prefix: PrefixId) -> i32 {
        let b = self.fresh(self.params.u_max);
        if self.reach_base.len() <= prefix as usize {
            self.reach_base.resize(prefix as usize + 1, 0);
        }
        self.reach_base[prefix as usize] = b;
        self.reach_blocks.push((b, prefix));
        b
    }

    /// Encodes `id` and any missing ancestors.
    fn ensure_prefix(&mut self, tree: &PrefixTree, id: PrefixId) -> Result<()> {
        if id as usize >= tree.len() {
            return Err(Error::InvalidModel(format!("pair references prefix {id} missing from the tree")));
        }
        let mut chain = Vec::new();
        let mut cur = id;
        while self.reach(cur, 0).is_none() {
            chain.push(cur);
            cur = tree.parent(cur);
        }
        let u = self.params.u_max;
        for &n in chain.iter().rev() {
            let parent = tree.parent(n);
            let k = tree.state(n);
            if k >= self.params.n_states {
                return Err(Error::StateOutOfRange { state: k, n_states: self.params.n_states });
            }
            let b = self.alloc_reach(n);
            let pb = self.reach(parent, 0).expect("parent encoded first");
            for i in 0..u {
                for j in 0..u {
                    if self.params.aux_matrices {
                        self.clause(vec![-(pb + i as i32), -self.aux(k, i, j), b + j as i32]);
                    } else {
                        for p in 0..self.params.n_ap {
                            self.clause(vec![
                                -(pb + i as i32),
                                -self.lab(p, k),
                                -self.trans(i, p, j),
                                b + j as i32,
                            ]);
                        }
                    }
                }
            }
            let row: Vec<i32> = (0..u as i32).map(|j| b + j).collect();
            self.exactly_one(&row);
        }
        Ok(())
    }

    /// Adds the inequality constraints of `pairs` (duplicates are skipped),
    /// encoding any prefixes not seen before, and filters the cached model set.
    pub fn add_pairs(&mut self, pairs: &[NegativePair], tree: &PrefixTree) -> Result<()> {
        let mut fresh = Vec::new();
        for p in pairs {
            let key = (p.tau.min(p.tau_prime), p.tau.max(p.tau_prime));
            if !self.seen_pairs.insert(key) {
                continue;
            }
            self.ensure_prefix(tree, p.tau)?;
            self.ensure_prefix(tree, p.tau_prime)?;
            let (a, b) = (self.reach(p.tau, 0).unwrap(), self.reach(p.tau_prime, 0).unwrap());
            for i in 0..self.params.u_max as i32 {
                self.clause(vec![-(a + i), -(b + i)]);
            }
            self.n_pairs += 1;
            fresh.push(*p);
        }
        if let Some(set) = &mut self.cached {
            set.retain_separating(tree, &fresh);
        }
        Ok(())
    }

    fn timed_solve(&mut self, assumptions: &[i32]) -> Result<bool> {
        let start = Instant::now();
        let r = self.backend.solve(assumptions);
        self.stats.solve_calls += 1;
        self.stats.solve_time += start.elapsed();
        r
    }

    /// Reads the hypothesis off the backend's current model.
    fn current_model(&self) -> Result<Hypothesis> {
        let (p, s) = (self.params.n_ap, self.params.n_states);
        let values: Vec<bool> = (1..self.lab_base + (p * s) as i32).map(|v| self.backend.value(v)).collect();
        decode_model(&values, &self.params)
    }

    /// Some model, or `None` if unsatisfiable.
    pub fn solve_one(&mut self) -> Result<Option<Hypothesis>> {
        if self.timed_solve(&[])? {
            Ok(Some(self.current_model()?))
        } else {
            Ok(None)
        }
    }

    /// All models up to `cap`, distinct on the decision variables. Blocking
    /// clauses are guarded by a fresh selector that is retired afterwards, so
    /// the instance stays reusable. A cached complete enumeration (kept
    /// current by `add_pairs`) is returned without solving.
    pub fn enumerate_all(&mut self, cap: usize) -> Result<HypothesisSet> {
        if cap == 0 {
            return Err(Error::Usage("enumeration cap must be at least 1".into()));
        }
        if let Some(set) = &self.cached {
            if set.len() <= cap {
                return Ok(set.clone());
            }
        }
        let sel = self.fresh(1);
        self.selectors.push(sel);
        let mut models = Vec::new();
        let mut truncated = false;
        loop {
            if !self.timed_solve(&[sel])? {
                break;
            }
            let h = self.current_model()?;
            let mut block = vec![-sel];
            let (u, p) = (self.params.u_max, self.params.n_ap);
            for i in 0..u {
                for q in 0..p {
                    block.push(-self.trans(i, q, h.delta()[i * p + q]));
                }
            }
            for (k, &q) in h.labeling().iter().enumerate() {
                block.push(-self.lab(q, k));
            }
            self.clause(block);
            models.push(h);
            if models.len() == cap {
                // one more call decides whether the set is complete
                truncated = self.timed_solve(&[sel])?;
                break;
            }
        }
        self.clause(vec![-sel]);
        let set = HypothesisSet::new(models, truncated);
        self.cached = if truncated { None } else { Some(set.clone()) };
        Ok(set)
    }

    /// Whether `m` satisfies every stored pair (and the non-stuttering
    /// constraint when enabled), i.e. lies in the full feasible set up to
    /// renaming, regardless of any enumeration cap.
    pub fn admits<M: LabeledModel + ?Sized>(&self, m: &M, tree: &PrefixTree) -> bool {
        let stutter_ok = !self.params.non_stuttering
            || (0..m.n_nodes()).all(|i| {
                (0..m.n_props()).all(|p| {
                    let j = m.next_node(i, p);
                    m.next_node(j, p) == j
                })
            });
        stutter_ok
            && self.seen_pairs.iter().all(|&(a, b)| m.run(&tree.trajectory(a)) != m.run(&tree.trajectory(b)))
    }

    /// Installs `set` as the complete enumeration of this instance, as
    /// computed earlier by an identical instance.
    pub(crate) fn prime_cache(&mut self, set: HypothesisSet) {
        debug_assert!(!set.is_truncated());
        self.cached = Some(set);
    }

    /// Drops the cached enumeration so the next call solves again.
    pub fn forget_cache(&mut self) {
        self.cached = None;
    }

    /// DIMACS text plus a `c var <id> <name>` comment map.
    pub fn write_dimacs<W: Write>(&self, mut out: W) -> Result<()> {
        let log = self
            .log
            .as_ref()
            .ok_or_else(|| Error::Usage("clause recording was disabled for this instance".into()))?;
        for v in 1..=self.n_vars {
            let name = match self.var_name(v) {
                Some(VarName::Trans { from, prop, to }) => format!("trans({},{},{})", from + 1, prop + 1, to + 1),
                Some(VarName::Lab { prop, state }) => format!("lab({},{})", prop + 1, state + 1),
                Some(VarName::Aux { state, from, to }) => format!("m({},{},{})", state + 1, from + 1, to + 1),
                Some(VarName::Reach { prefix, node }) => format!("reach({},{})", prefix, node + 1),
                Some(VarName::Selector) | None => "selector".to_string(),
            };
            writeln!(out, "c var {v} {name}")?;
        }
        writeln!(out, "p cnf {} {}", self.n_vars, log.len())?;
        for c in log {
            for l in c {
                write!(out, "{l} ")?;
            }
            writeln!(out, "0")?;
        }
        Ok(())
    }
}

/// Decodes an assignment to the decision variables, indexed from variable 1
/// (`values[0]` is variable 1).
pub fn decode_model(values: &[bool], params: &EncodingParams) -> Result<Hypothesis> {
    let (u, p, s) = (params.u_max, params.n_ap, params.n_states);
    let need = u * p * u + p * s;
    if values.len() < need {
        return Err(Error::LengthMismatch(values.len(), need));
    }
    let mut delta = Vec::with_capacity(u * p);
    for i in 0..u {
        for q in 0..p {
            let row = &values[(i * p + q) * u..(i * p + q + 1) * u];
            delta.push(exactly_one_index(row, || format!("trans row ({},{})", i + 1, q + 1))?);
        }
    }
    let lab = &values[u * p * u..need];
    let mut labeling = Vec::with_capacity(s);
    for k in 0..s {
        labeling.push(exactly_one_index(&lab[k * p..(k + 1) * p], || format!("label of state {}", k + 1))?);
    }
    Hypothesis::new(u, p, delta, labeling)
}

fn exactly_one_index(row: &[bool], what: impl Fn() -> String) -> Result<usize> {
    let mut it = row.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i);
    match (it.next(), it.next()) {
        (Some(i), None) => Ok(i),
        _ => Err(Error::Invariant(format!("{} is not exactly-one", what()))),
    }
}

/// Decision-variable assignment that encodes `h` (inverse of `decode_model`).
pub fn encode_model(h: &Hypothesis, params: &EncodingParams) -> Vec<bool> {
    let (u, p, s) = (params.u_max, params.n_ap, params.n_states);
    let mut values = vec![false; u * p * u + p * s];
    for i in 0..u {
        for q in 0..p {
            values[(i * p + q) * u + h.delta()[i * p + q]] = true;
        }
    }
    for (k, &q) in h.labeling().iter().enumerate() {
        values[u * p * u + k * p + q] = true;
    }
    values
}
