//! Active extension: propose trajectory pairs that split the current
//! hypothesis set, query the oracle for a budget of them and refine the SAT
//! instance incrementally, one depth at a time.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::{Fixture, LabeledModel, MdpModel};
use crate::policy::{row_witness, HistoryCursor, HistoryOracle, EPS_POLICY};
use crate::satsynth::{encode, CnfInstance, EncodingParams, Hypothesis, HypothesisSet};
use crate::traces::{
    compute_signatures_scoped, checked_negatives, NegativeMode, NegativePair, PrefixTree, QueryScope,
    DEFAULT_NODE_CAP,
};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ActiveConfig {
    pub burn_in_depth: usize,
    pub max_depth: usize,
    pub n_active: usize,
    /// Pairs queried per depth.
    pub budget: usize,
    pub candidate_cap: usize,
    /// DFS steps per proposer and depth.
    pub dfs_node_budget: usize,
    /// Enumeration cap on the hypothesis set.
    pub solution_cap: usize,
    pub seed: u64,
    pub eps: f64,
    pub scope: QueryScope,
    pub burn_in_negatives: NegativeMode,
    pub u_max: usize,
    pub n_ap: usize,
    pub non_stuttering: bool,
    /// Stop as soon as one canonical class remains.
    pub stop_on_convergence: bool,
}

impl ActiveConfig {
    /// Defaults for a fixture: machine size and proposition count taken from
    /// the ground truth, 10000 candidates, 200000 DFS steps, 10000 solutions.
    pub fn for_fixture(fx: &Fixture, burn_in_depth: usize, max_depth: usize, budget: usize, n_active: usize) -> Self {
        Self {
            burn_in_depth,
            max_depth,
            n_active,
            budget,
            candidate_cap: 10_000,
            dfs_node_budget: 200_000,
            solution_cap: 10_000,
            seed: 0,
            eps: EPS_POLICY,
            scope: QueryScope::AllStates,
            burn_in_negatives: NegativeMode::PerTerminalSample { k: 5000, seed: 0 },
            u_max: fx.machine.n_nodes(),
            n_ap: fx.machine.n_props(),
            non_stuttering: false,
            stop_on_convergence: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in_depth == 0 || self.max_depth < self.burn_in_depth {
            return Err(Error::Usage("need 1 <= burn-in depth <= max depth".into()));
        }
        if self.n_active == 0 || self.candidate_cap == 0 || self.solution_cap == 0 {
            return Err(Error::Usage("n_active, candidate cap and solution cap must be positive".into()));
        }
        Ok(())
    }

    fn encoding(&self, n_states: usize) -> EncodingParams {
        EncodingParams { non_stuttering: self.non_stuttering, ..EncodingParams::new(self.u_max, self.n_ap, n_states) }
    }
}

/// Two same-length trajectories with the same last state that the proposer
/// maps to the same node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePair {
    pub tau: Vec<usize>,
    pub tau_prime: Vec<usize>,
    pub proposer: usize,
    pub target_node: usize,
}

impl CandidatePair {
    /// Checks the pair invariants without the oracle.
    pub fn is_valid(&self, h: &Hypothesis, mdp: &MdpModel) -> bool {
        self.tau.len() == self.tau_prime.len()
            && self.tau != self.tau_prime
            && self.tau.last() == self.tau_prime.last()
            && mdp.is_feasible(&self.tau)
            && mdp.is_feasible(&self.tau_prime)
            && h.run(&self.tau) == self.target_node
            && h.run(&self.tau_prime) == self.target_node
    }

    fn key(&self) -> (Vec<usize>, Vec<usize>) {
        if self.tau <= self.tau_prime {
            (self.tau.clone(), self.tau_prime.clone())
        } else {
            (self.tau_prime.clone(), self.tau.clone())
        }
    }
}

/// `n` members drawn uniformly without replacement (all of them if the set
/// is small enough).
pub fn subsample(set: &HypothesisSet, n: usize, seed: u64) -> Result<Vec<Hypothesis>> {
    if set.is_empty() {
        return Err(Error::Invariant("cannot subsample an empty hypothesis set".into()));
    }
    if set.len() <= n {
        return Ok(set.raw().to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, set.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| set.raw()[i].clone()).collect())
}

/// `ok[r][s * n_nodes + u]`: from state `s` at node `u`, some feasible
/// continuation of exactly `r` more states ends at `target`.
fn backward_reach(h: &Hypothesis, mdp: &MdpModel, target: usize, steps: usize) -> Vec<Vec<bool>> {
    let (n, u_n) = (mdp.n_states(), h.n_nodes());
    let mut ok = vec![vec![false; n * u_n]];
    for s in 0..n {
        ok[0][s * u_n + target] = true;
    }
    for r in 1..=steps {
        let prev = &ok[r - 1];
        let mut layer = vec![false; n * u_n];
        for s in 0..n {
            for u in 0..u_n {
                layer[s * u_n + u] = mdp.successors(s).iter().any(|&t| prev[t * u_n + h.advance(u, t)]);
            }
        }
        ok.push(layer);
    }
    ok
}

/// Randomized depth-first descents through the product of the MDP and `h`,
/// restarting at the root after every completed trajectory. Collects
/// distinct length-`l + 1` trajectories that `h` maps to a random target
/// node and pairs those sharing a last state, preferring pairs that some
/// hypothesis in `views` separates.
#[allow(clippy::too_many_arguments)]
pub fn generate_candidates(
    h: &Hypothesis,
    proposer: usize,
    views: &[Hypothesis],
    mdp: &MdpModel,
    l: usize,
    rng: &mut ChaCha8Rng,
    dfs_node_budget: usize,
    max_pairs: usize,
) -> Vec<CandidatePair> {
    let len = l + 1;
    let target = rng.gen_range(0..h.n_nodes());
    if dfs_node_budget == 0 || max_pairs == 0 {
        return Vec::new();
    }
    let u_n = h.n_nodes();
    let ok = backward_reach(h, mdp, target, len - 1);
    let starts: Vec<usize> = mdp
        .initial_support()
        .into_iter()
        .filter(|&s| ok[len - 1][s * u_n + h.advance(0, s)])
        .collect();
    if starts.is_empty() {
        return Vec::new();
    }
    let max_leaves = 2 * max_pairs + 16;
    let mut leaves: Vec<Vec<usize>> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut steps = 0usize;
    let mut stale = 0usize;
    'outer: while steps < dfs_node_budget && leaves.len() < max_leaves {
        let s0 = *starts.choose(rng).expect("nonempty");
        let mut tau = vec![s0];
        let mut u = h.advance(0, s0);
        steps += 1;
        while tau.len() < len {
            let s = *tau.last().expect("nonempty");
            let remaining = len - tau.len() - 1;
            let next: Vec<usize> = mdp
                .successors(s)
                .iter()
                .copied()
                .filter(|&t| ok[remaining][t * u_n + h.advance(u, t)])
                .collect();
            // pruning guarantees a continuation exists
            let t = *next.choose(rng).expect("backward reachability");
            u = h.advance(u, t);
            tau.push(t);
            steps += 1;
            if steps >= dfs_node_budget && tau.len() < len {
                break 'outer;
            }
        }
        if seen.insert(tau.clone()) {
            leaves.push(tau);
            stale = 0;
        } else {
            stale += 1;
            // the target set is exhausted
            if stale > 64 {
                break;
            }
        }
    }
    // bucket by last state, then group by the nodes `views` reach
    let mut buckets: BTreeMap<usize, BTreeMap<Vec<usize>, Vec<Vec<usize>>>> = BTreeMap::new();
    for tau in leaves {
        let view: Vec<usize> = views.iter().map(|g| g.run(&tau)).collect();
        buckets.entry(*tau.last().expect("nonempty")).or_default().entry(view).or_default().push(tau);
    }
    let pair = |a: &Vec<usize>, b: &Vec<usize>| CandidatePair {
        tau: a.clone(),
        tau_prime: b.clone(),
        proposer,
        target_node: target,
    };
    let mut out = Vec::new();
    // pairs across groups first: some view separates them
    let mut cross: Vec<Vec<(&Vec<usize>, &Vec<usize>)>> = Vec::new();
    for groups in buckets.values() {
        let groups: Vec<&Vec<Vec<usize>>> = groups.values().collect();
        for (a, ga) in groups.iter().enumerate() {
            for gb in &groups[a + 1..] {
                cross.push(ga.iter().zip(gb.iter()).collect());
            }
        }
    }
    let longest = cross.iter().map(Vec::len).max().unwrap_or(0);
    for k in 0..longest {
        for list in &cross {
            if let Some((a, b)) = list.get(k) {
                out.push(pair(a, b));
                if out.len() == max_pairs {
                    return out;
                }
            }
        }
    }
    // then pairs (i, i + d) within groups for growing offsets d, so that
    // every leaf is used early
    let groups: Vec<&Vec<Vec<usize>>> = buckets.values().flat_map(|g| g.values()).collect();
    let max_group = groups.iter().map(|g| g.len()).max().unwrap_or(0);
    for d in 1..max_group {
        for g in &groups {
            for i in 0..g.len().saturating_sub(d) {
                out.push(pair(&g[i], &g[i + d]));
                if out.len() == max_pairs {
                    return out;
                }
            }
        }
    }
    out
}

/// `min(#collapse, #separate)` over the sample.
pub fn quality(pair: &CandidatePair, sample: &[Hypothesis]) -> usize {
    let collapse = sample.iter().filter(|h| h.run(&pair.tau) == h.run(&pair.tau_prime)).count();
    collapse.min(sample.len() - collapse)
}

/// Oracle comparison of two trajectories: a witness `(state, action)` where
/// their rows differ.
pub fn compare_histories(
    oracle: &HistoryOracle,
    tau: &[usize],
    tau_prime: &[usize],
    scope: QueryScope,
    eps: f64,
) -> Result<Option<(usize, usize)>> {
    let cursor = |t: &[usize]| -> Result<HistoryCursor<'_>> {
        let mut c = oracle.cursor();
        for &s in t {
            c.push(s)?;
        }
        Ok(c)
    };
    let (a, b) = (cursor(tau)?, cursor(tau_prime)?);
    let states: Vec<usize> = match scope {
        QueryScope::AllStates => (0..oracle.mdp().n_states()).collect(),
        QueryScope::Endpoint => {
            let (x, y) = (tau.last(), tau_prime.last());
            match (x, y) {
                (Some(&x), Some(&y)) if x == y => vec![x],
                _ => Vec::new(),
            }
        }
    };
    for s in states {
        if let (Some(ra), Some(rb)) = (a.row(s), b.row(s)) {
            if let Some(act) = row_witness(ra, rb, eps)? {
                return Ok(Some((s, act)));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutcome {
    pub queried: usize,
    pub negatives: Vec<NegativePair>,
}

/// Queries the first `budget` pairs; pairs with a witness are inserted into
/// `tree` and returned as negative examples.
pub fn query_batch(
    pairs: &[CandidatePair],
    oracle: &HistoryOracle,
    budget: usize,
    scope: QueryScope,
    eps: f64,
    tree: &mut PrefixTree,
) -> Result<BatchOutcome> {
    let mut out = BatchOutcome::default();
    for pair in pairs.iter().take(budget) {
        out.queried += 1;
        if let Some(witness) = compare_histories(oracle, &pair.tau, &pair.tau_prime, scope, eps)? {
            let tau = tree.insert(&pair.tau)?;
            let tau_prime = tree.insert(&pair.tau_prime)?;
            out.negatives.push(NegativePair { tau, tau_prime, witness });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Exhaustive,
    Active,
    RandomBaseline,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Exhaustive => "exhaustive",
            RunMode::Active => "active",
            RunMode::RandomBaseline => "random_baseline",
        }
    }
}

/// One row of the per-depth report.
#[derive(Debug, Clone)]
pub struct DepthRecord {
    pub depth: usize,
    pub raw_count: usize,
    pub class_count: usize,
    pub truncated: bool,
    pub pairs_queried: usize,
    pub negatives_added: usize,
    /// Stored trajectories: burn-in prefixes plus both members of every
    /// queried pair (exhaustive mode: all prefixes).
    pub stored_prefixes: u128,
    /// Negative examples held in the SAT instance.
    pub stored_negatives: usize,
    /// Negative pairs implied by the evidence, counted from the partition in
    /// exhaustive rounds without materializing them.
    pub implied_negatives: u128,
    /// Ground-truth membership, for harnesses that score learners. For a
    /// truncated set this checks the truth against every stored pair.
    pub truth_present: bool,
    pub discovery_seconds: f64,
    pub sat_seconds: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ActiveReport {
    pub mode: RunMode,
    pub seed: u64,
    pub records: Vec<DepthRecord>,
    pub converged_at: Option<usize>,
    pub burn_in_prefixes: usize,
    pub final_set: HypothesisSet,
    /// Prefixes held at the end of the run.
    pub final_tree: PrefixTree,
}

impl ActiveReport {
    /// Record for `depth`, carrying the last one forward after an early stop.
    pub fn at_depth(&self, depth: usize) -> Option<&DepthRecord> {
        self.records.iter().rev().find(|r| r.depth <= depth)
    }

    pub fn total_sat_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.sat_seconds).sum()
    }

    pub fn converged_by(&self, depth: usize) -> bool {
        self.converged_at.is_some_and(|d| d <= depth)
    }

    pub const CSV_HEADER: &'static str = "depth,raw_count,class_count,truncated,pairs_queried,negatives_added,\
stored_prefixes,stored_negatives,implied_negatives,truth_present";

    /// Deterministic columns only; timings go to
    /// [`ActiveReport::write_timing_csv`].
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.depth,
                r.raw_count,
                r.class_count,
                r.truncated,
                r.pairs_queried,
                r.negatives_added,
                r.stored_prefixes,
                r.stored_negatives,
                r.implied_negatives,
                r.truth_present,
            )?;
        }
        Ok(())
    }

    pub fn write_timing_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "depth,discovery_seconds,sat_seconds,seconds")?;
        for r in &self.records {
            writeln!(out, "{},{:.6},{:.6},{:.6}", r.depth, r.discovery_seconds, r.sat_seconds, r.seconds)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BurnInKey {
    depth: usize,
    scope: QueryScope,
    eps: f64,
    negatives: NegativeMode,
    encoding: (usize, usize, bool),
    cap: usize,
}

impl BurnInKey {
    fn of(cfg: &ActiveConfig) -> Self {
        Self {
            depth: cfg.burn_in_depth,
            scope: cfg.scope,
            eps: cfg.eps,
            negatives: cfg.burn_in_negatives,
            encoding: (cfg.u_max, cfg.n_ap, cfg.non_stuttering),
            cap: cfg.solution_cap,
        }
    }
}

/// Exhaustive burn-in evidence and its hypothesis set. It does not depend on
/// the trial seed, so one burn-in can seed many trials.
#[derive(Debug, Clone)]
pub struct BurnIn {
    key: BurnInKey,
    pub tree: PrefixTree,
    pub pairs: Vec<NegativePair>,
    pub implied: u128,
    pub set: HypothesisSet,
    pub discovery: Duration,
    pub sat_seconds: f64,
    pub seconds: f64,
}

pub fn burn_in(cfg: &ActiveConfig, oracle: &HistoryOracle) -> Result<BurnIn> {
    cfg.validate()?;
    let start = Instant::now();
    let mdp = oracle.mdp();
    let tree = PrefixTree::enumerate(mdp, cfg.burn_in_depth, false, DEFAULT_NODE_CAP)?;
    let part = compute_signatures_scoped(&tree, oracle, cfg.eps, cfg.scope)?;
    let pairs = checked_negatives(&tree, &part, cfg.burn_in_negatives)?;
    let discovery = start.elapsed();
    let mut inst = encode(&pairs, &tree, cfg.encoding(mdp.n_states()))?;
    let set = inst.enumerate_all(cfg.solution_cap)?;
    Ok(BurnIn {
        key: BurnInKey::of(cfg),
        implied: part.negative_pair_count(),
        tree,
        pairs,
        set,
        discovery,
        sat_seconds: inst.stats().solve_time.as_secs_f64(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

struct Learner<'a> {
    cfg: &'a ActiveConfig,
    oracle: &'a HistoryOracle,
    tree: PrefixTree,
    inst: CnfInstance,
    set: HypothesisSet,
    records: Vec<DepthRecord>,
    stored: u128,
    implied: u128,
    converged_at: Option<usize>,
    sat_time: Duration,
}

impl<'a> Learner<'a> {
    fn from_burn_in(cfg: &'a ActiveConfig, oracle: &'a HistoryOracle, b: &BurnIn) -> Result<Self> {
        if b.key != BurnInKey::of(cfg) {
            return Err(Error::Usage("burn-in was prepared with a different configuration".into()));
        }
        let start = Instant::now();
        let mut inst = encode(&b.pairs, &b.tree, cfg.encoding(oracle.mdp().n_states()))?;
        let set = if b.set.is_truncated() {
            inst.enumerate_all(cfg.solution_cap)?
        } else {
            inst.prime_cache(b.set.clone());
            b.set.clone()
        };
        let mut learner = Self {
            cfg,
            oracle,
            tree: b.tree.clone(),
            inst,
            set,
            records: Vec::new(),
            stored: b.tree.n_prefixes() as u128,
            implied: b.implied,
            converged_at: None,
            sat_time: Duration::ZERO,
        };
        learner.record(cfg.burn_in_depth, 0, b.pairs.len(), b.discovery, start)?;
        let last = learner.records.last_mut().expect("just recorded");
        last.sat_seconds += b.sat_seconds;
        last.seconds += b.seconds;
        Ok(learner)
    }

    fn record(
        &mut self,
        depth: usize,
        pairs_queried: usize,
        negatives_added: usize,
        discovery: Duration,
        start: Instant,
    ) -> Result<()> {
        let sat_total = self.inst.stats().solve_time;
        let sat = sat_total - self.sat_time;
        self.sat_time = sat_total;
        let truncated = self.set.is_truncated();
        let truth = self.oracle.reveal_truth();
        let truth_present = if truncated {
            self.inst.admits(truth, &self.tree)
        } else {
            self.set.contains_equivalent(truth)
        };
        let class_count = self.set.n_classes();
        if !truncated && class_count == 1 && self.converged_at.is_none() {
            self.converged_at = Some(depth);
        }
        self.records.push(DepthRecord {
            depth,
            raw_count: self.set.len(),
            class_count,
            truncated,
            pairs_queried,
            negatives_added,
            stored_prefixes: self.stored,
            stored_negatives: self.inst.n_pairs(),
            implied_negatives: self.implied,
            truth_present,
            discovery_seconds: discovery.as_secs_f64(),
            sat_seconds: sat.as_secs_f64(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(())
    }

    fn refine(&mut self, negatives: &[NegativePair]) -> Result<()> {
        self.implied += negatives.len() as u128;
        self.inst.add_pairs(negatives, &self.tree)?;
        self.set = self.inst.enumerate_all(self.cfg.solution_cap)?;
        Ok(())
    }

    fn done(&self) -> bool {
        self.cfg.stop_on_convergence && self.converged_at.is_some()
    }

    fn finish(self, mode: RunMode, burn_in_prefixes: usize) -> ActiveReport {
        ActiveReport {
            mode,
            seed: self.cfg.seed,
            records: self.records,
            converged_at: self.converged_at,
            burn_in_prefixes,
            final_set: self.set,
            final_tree: self.tree,
        }
    }
}

fn depth_seed(seed: u64, depth: usize, salt: u64) -> u64 {
    seed ^ (depth as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Candidate pool for one depth: proposals from every sampled hypothesis,
/// deduplicated, sorted by quality (ties in seeded random order).
pub fn build_pool(
    sample: &[Hypothesis],
    mdp: &MdpModel,
    l: usize,
    cfg: &ActiveConfig,
    seed: u64,
) -> Vec<(usize, CandidatePair)> {
    let share = cfg.candidate_cap.div_ceil(sample.len().max(1));
    let proposals: Vec<Vec<CandidatePair>> = sample
        .par_iter()
        .enumerate()
        .map(|(i, h)| {
            let mut rng = ChaCha8Rng::seed_from_u64(depth_seed(seed, l, i as u64 + 1));
            generate_candidates(h, i, sample, mdp, l, &mut rng, cfg.dfs_node_budget, share)
        })
        .collect();
    let mut seen = HashSet::new();
    let mut pool = Vec::new();
    for pair in proposals.into_iter().flatten() {
        if pool.len() == cfg.candidate_cap {
            break;
        }
        if seen.insert(pair.key()) {
            pool.push(pair);
        }
    }
    let mut scored: Vec<(usize, CandidatePair)> =
        pool.into_par_iter().map(|p| (quality(&p, sample), p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(depth_seed(seed, l, 0));
    scored.shuffle(&mut rng);
    scored.sort_by_key(|p| std::cmp::Reverse(p.0));
    scored
}

/// Burn-in at `burn_in_depth`, then one round of proposals, queries and
/// refinement per depth up to `max_depth`.
pub fn run_active(cfg: &ActiveConfig, oracle: &HistoryOracle) -> Result<ActiveReport> {
    run_active_from(cfg, oracle, &burn_in(cfg, oracle)?)
}

/// [`run_active`] starting from a prepared burn-in.
pub fn run_active_from(cfg: &ActiveConfig, oracle: &HistoryOracle, b: &BurnIn) -> Result<ActiveReport> {
    cfg.validate()?;
    let mut learner = Learner::from_burn_in(cfg, oracle, b)?;
    let burn_in_prefixes = learner.tree.n_prefixes();
    let mdp = oracle.mdp();
    for l in cfg.burn_in_depth..cfg.max_depth {
        if learner.done() {
            break;
        }
        let start = Instant::now();
        let sample = subsample(&learner.set, cfg.n_active, depth_seed(cfg.seed, l, 7))?;
        let pool = build_pool(&sample, mdp, l, cfg, cfg.seed);
        let pairs: Vec<CandidatePair> = pool.into_iter().map(|(_, p)| p).collect();
        let outcome = query_batch(&pairs, oracle, cfg.budget, cfg.scope, cfg.eps, &mut learner.tree)?;
        learner.stored += 2 * outcome.queried as u128;
        let discovery = start.elapsed();
        learner.refine(&outcome.negatives)?;
        learner.record(l + 1, outcome.queried, outcome.negatives.len(), discovery, start)?;
    }
    Ok(learner.finish(RunMode::Active, burn_in_prefixes))
}

/// Uniform random walk of `len` states from the initial support.
fn random_trajectory(mdp: &MdpModel, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let starts = mdp.initial_support();
    let mut tau = vec![*starts.choose(rng).expect("initial support is nonempty")];
    while tau.len() < len {
        let s = *tau.last().expect("nonempty");
        tau.push(*mdp.successors(s).choose(rng).expect("every state has a successor"));
    }
    tau
}

/// `budget` distinct random pairs of feasible length-`len` trajectories
/// sharing their last state.
pub fn random_pairs(mdp: &MdpModel, len: usize, budget: usize, rng: &mut ChaCha8Rng) -> Vec<CandidatePair> {
    let mut buckets: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    let mut seen_pairs = HashSet::new();
    let mut out = Vec::new();
    let mut attempts = 0usize;
    while out.len() < budget && attempts < 200 * budget.max(1) {
        attempts += 1;
        let tau = random_trajectory(mdp, len, rng);
        let bucket = buckets.entry(*tau.last().expect("nonempty")).or_default();
        if let Some(other) = bucket.choose(rng) {
            let pair = CandidatePair { tau: other.clone(), tau_prime: tau.clone(), proposer: 0, target_node: 0 };
            if pair.tau != pair.tau_prime && seen_pairs.insert(pair.key()) {
                out.push(pair);
            }
        }
        if !bucket.contains(&tau) {
            bucket.push(tau);
        }
    }
    out
}

/// Same loop as [`run_active`] with proposals replaced by uniformly random
/// same-endpoint pairs.
pub fn run_random_baseline(cfg: &ActiveConfig, oracle: &HistoryOracle) -> Result<ActiveReport> {
    run_random_baseline_from(cfg, oracle, &burn_in(cfg, oracle)?)
}

pub fn run_random_baseline_from(cfg: &ActiveConfig, oracle: &HistoryOracle, b: &BurnIn) -> Result<ActiveReport> {
    cfg.validate()?;
    let mut learner = Learner::from_burn_in(cfg, oracle, b)?;
    let burn_in_prefixes = learner.tree.n_prefixes();
    let mdp = oracle.mdp();
    for l in cfg.burn_in_depth..cfg.max_depth {
        if learner.done() {
            break;
        }
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(depth_seed(cfg.seed, l, 11));
        let pairs = random_pairs(mdp, l + 1, cfg.budget, &mut rng);
        let outcome = query_batch(&pairs, oracle, cfg.budget, cfg.scope, cfg.eps, &mut learner.tree)?;
        learner.stored += 2 * outcome.queried as u128;
        let discovery = start.elapsed();
        learner.refine(&outcome.negatives)?;
        learner.record(l + 1, outcome.queried, outcome.negatives.len(), discovery, start)?;
    }
    Ok(learner.finish(RunMode::RandomBaseline, burn_in_prefixes))
}

/// Full depth-`l` evidence for every `l` in `from..=to`, each depth encoded
/// and solved from scratch.
pub fn run_exhaustive(cfg: &ActiveConfig, oracle: &HistoryOracle, from: usize, to: usize) -> Result<ActiveReport> {
    if from == 0 || to < from {
        return Err(Error::Usage("need 1 <= from <= to".into()));
    }
    let mdp = oracle.mdp();
    let mut records = Vec::new();
    let mut converged_at = None;
    let mut set = HypothesisSet::default();
    let mut first_prefixes = 0;
    let mut last_tree = PrefixTree::new(false, DEFAULT_NODE_CAP);
    for l in from..=to {
        let start = Instant::now();
        let tree = PrefixTree::enumerate(mdp, l, false, DEFAULT_NODE_CAP)?;
        if l == from {
            first_prefixes = tree.n_prefixes();
        }
        let part = compute_signatures_scoped(&tree, oracle, cfg.eps, cfg.scope)?;
        let pairs = checked_negatives(&tree, &part, cfg.burn_in_negatives)?;
        let discovery = start.elapsed();
        let mut inst = encode(&pairs, &tree, cfg.encoding(mdp.n_states()))?;
        set = inst.enumerate_all(cfg.solution_cap)?;
        let sat = inst.stats().solve_time;
        let truncated = set.is_truncated();
        let class_count = set.n_classes();
        if !truncated && class_count == 1 && converged_at.is_none() {
            converged_at = Some(l);
        }
        records.push(DepthRecord {
            depth: l,
            raw_count: set.len(),
            class_count,
            truncated,
            pairs_queried: 0,
            negatives_added: pairs.len(),
            stored_prefixes: tree.n_prefixes() as u128,
            stored_negatives: pairs.len(),
            implied_negatives: part.negative_pair_count(),
            truth_present: if truncated {
                inst.admits(oracle.reveal_truth(), &tree)
            } else {
                set.contains_equivalent(oracle.reveal_truth())
            },
            discovery_seconds: discovery.as_secs_f64(),
            sat_seconds: sat.as_secs_f64(),
            seconds: start.elapsed().as_secs_f64(),
        });
        last_tree = tree;
        if cfg.stop_on_convergence && converged_at.is_some() {
            break;
        }
    }
    Ok(ActiveReport {
        mode: RunMode::Exhaustive,
        seed: cfg.seed,
        records,
        converged_at,
        burn_in_prefixes: first_prefixes,
        final_set: set,
        final_tree: last_tree,
    })
}
