//! Experiment driver: argument parsing, multi-trial runs and report files.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use crate::active::{burn_in, run_active_from, run_exhaustive, run_random_baseline_from, ActiveConfig, ActiveReport};
use crate::env::{fixtures, Fixture, LabeledModel};
use crate::policy::{HistoryOracle, EPS_POLICY};
use crate::satsynth::{encode, sufficient_depth, EncodingParams};
use crate::traces::cache::{encode_tree, pairs_cache_len, tree_cache_len, CacheKey};
use crate::traces::{
    compute_signatures_scoped, checked_negatives, NegativeMode, PrefixTree, QueryScope, DEFAULT_NODE_CAP,
};
use crate::verify::{brute_force_feasible, pair_trajectories, search_space, BRUTE_FORCE_CAP};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Mode {
    Exhaustive,
    Active,
    RandomBaseline,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    /// Compare policy rows at every state.
    All,
    /// Compare only at the last state of each prefix.
    Endpoint,
}

impl From<Scope> for QueryScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::All => QueryScope::AllStates,
            Scope::Endpoint => QueryScope::Endpoint,
        }
    }
}

/// Learn labeled reward machine models from state trajectories.
#[derive(Debug, Clone, Parser)]
#[command(name = "rmlearn", version)]
pub struct RunSpec {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Built-in fixture (line3, pick_n_drop, patrol, patrol_tetris).
    #[arg(long, conflicts_with = "config")]
    pub fixture: Option<String>,
    /// Fixture file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Final depth (exhaustive, active, random_baseline) or largest
    /// cross-checked depth (verify).
    #[arg(long)]
    pub depth: Option<usize>,
    /// First depth solved in exhaustive mode.
    #[arg(long)]
    pub from_depth: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Pairs queried per depth.
    #[arg(long, default_value_t = 250)]
    pub budget: usize,
    #[arg(long, default_value_t = 100)]
    pub n_active: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Enumeration cap on the hypothesis set.
    #[arg(long, default_value_t = 10_000)]
    pub cap: usize,
    #[arg(long, default_value_t = EPS_POLICY)]
    pub eps_policy: f64,
    /// Add the non-stuttering constraint.
    #[arg(long)]
    pub no_stutter: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Node bound (default: ground-truth node count).
    #[arg(long)]
    pub u_max: Option<usize>,
    /// Proposition count (default: ground-truth proposition count).
    #[arg(long)]
    pub n_ap: Option<usize>,
    #[arg(long, value_enum, default_value = "all")]
    pub scope: Scope,
    /// Pairs drawn per terminal-state group; 0 materializes every pair.
    #[arg(long, default_value_t = 0)]
    pub negatives_per_terminal: usize,
    /// Keep going after one canonical class remains.
    #[arg(long)]
    pub no_early_stop: bool,
}

impl RunSpec {
    pub fn load_fixture(&self) -> Result<Fixture> {
        match (&self.fixture, &self.config) {
            (Some(name), None) => fixtures::builtin(name),
            (None, Some(path)) => Fixture::from_text(&fs::read_to_string(path)?),
            (None, None) => Err(Error::Usage("one of --fixture or --config is required".into())),
            (Some(_), Some(_)) => Err(Error::Usage("--fixture and --config are exclusive".into())),
        }
    }

    fn negatives(&self) -> NegativeMode {
        match self.negatives_per_terminal {
            0 => NegativeMode::All,
            k => NegativeMode::PerTerminalSample { k, seed: self.seed },
        }
    }

    /// Learner configuration for one trial.
    pub fn active_config(&self, fx: &Fixture, seed: u64) -> Result<ActiveConfig> {
        let depth = self.depth.ok_or_else(|| Error::Usage("--depth is required".into()))?;
        let burn_in = match self.mode {
            Mode::Exhaustive => self.from_depth.unwrap_or(depth),
            _ => self.burn_in.ok_or_else(|| Error::Usage("--burn-in is required".into()))?,
        };
        let mut cfg = ActiveConfig::for_fixture(fx, burn_in, depth, self.budget, self.n_active);
        cfg.seed = seed;
        cfg.solution_cap = self.cap;
        cfg.eps = self.eps_policy;
        cfg.scope = self.scope.into();
        cfg.burn_in_negatives = self.negatives();
        cfg.non_stuttering = self.no_stutter;
        cfg.stop_on_convergence = !self.no_early_stop;
        if let Some(u) = self.u_max {
            cfg.u_max = u;
        }
        if let Some(p) = self.n_ap {
            cfg.n_ap = p;
        }
        if self.mode != Mode::Exhaustive {
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

/// Sizes behind one run: stored prefixes, negative pairs and the byte sizes
/// of the binary caches that would hold them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryReport {
    pub stored_prefixes: u128,
    pub pair_count: u128,
    pub tree_cache_bytes: u128,
    pub pair_cache_bytes: u128,
}

pub fn emit_memory_report(report: Option<&ActiveReport>, fixture_hash: &str, eps: f64) -> MemoryReport {
    let Some(last) = report.and_then(|r| r.records.last()) else {
        return MemoryReport::default();
    };
    let key = CacheKey { fixture_hash: fixture_hash.to_string(), depth: last.depth, eps };
    let nodes = report.map_or(0, |r| r.final_tree.len());
    MemoryReport {
        stored_prefixes: last.stored_prefixes,
        pair_count: last.implied_negatives,
        tree_cache_bytes: tree_cache_len(&key, nodes),
        pair_cache_bytes: pairs_cache_len(&key, last.implied_negatives),
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-depth mean and standard deviation over trials, carrying each trial's
/// last record forward after it stops early.
pub fn write_aggregate_csv<W: Write>(reports: &[ActiveReport], mut out: W) -> std::io::Result<()> {
    writeln!(out, "depth,trials,raw_mean,raw_std,class_mean,class_std,converged_fraction")?;
    let Some(first) = reports.iter().filter_map(|r| r.records.first()).map(|r| r.depth).min() else {
        return Ok(());
    };
    let last = reports.iter().filter_map(|r| r.records.last()).map(|r| r.depth).max().unwrap_or(first);
    for depth in first..=last {
        let rows: Vec<_> = reports.iter().filter_map(|r| r.at_depth(depth).map(|rec| (r, rec))).collect();
        if rows.is_empty() {
            continue;
        }
        let raw: Vec<f64> = rows.iter().map(|(_, r)| r.raw_count as f64).collect();
        let cls: Vec<f64> = rows.iter().map(|(_, r)| r.class_count as f64).collect();
        let conv = rows.iter().filter(|(r, _)| r.converged_by(depth)).count() as f64 / rows.len() as f64;
        let (rm, rs) = mean_std(&raw);
        let (cm, cs) = mean_std(&cls);
        writeln!(out, "{depth},{},{rm:.4},{rs:.4},{cm:.4},{cs:.4},{conv:.4}", rows.len())?;
    }
    Ok(())
}

/// Plain-text table with one row per trial.
pub fn summary_table(reports: &[ActiveReport], memory: &[MemoryReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>6} {:>6} {:>12} {:>14} {:>12} {:>10} {:>10} {:>10} {:>10}",
        "mode", "seed", "depth", "prefixes", "negatives", "discovery_s", "sat_s", "total_s", "solutions", "classes"
    );
    for (r, m) in reports.iter().zip(memory) {
        let Some(last) = r.records.last() else { continue };
        let discovery: f64 = r.records.iter().map(|x| x.discovery_seconds).sum();
        let total: f64 = r.records.iter().map(|x| x.seconds).sum();
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>6} {:>12} {:>14} {:>12.3} {:>10.3} {:>10.3} {:>10} {:>10}",
            r.mode.as_str(),
            r.seed,
            last.depth,
            m.stored_prefixes,
            m.pair_count,
            discovery,
            r.total_sat_seconds(),
            total,
            last.raw_count,
            last.class_count
        );
    }
    s
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_trial(dir: &Path, index: usize, report: &ActiveReport) -> Result<()> {
    let stem = format!("trial_{index:03}");
    let mut f = create(&dir.join(format!("{stem}.csv")))?;
    writeln!(f, "# mode={} seed={}", report.mode.as_str(), report.seed)?;
    report.write_csv(&mut f)?;
    f.flush()?;
    let mut f = create(&dir.join(format!("{stem}_timing.csv")))?;
    writeln!(f, "# seed={}", report.seed)?;
    report.write_timing_csv(&mut f)?;
    f.flush()?;
    let mut f = create(&dir.join(format!("{stem}_hypotheses.json")))?;
    report.final_set.write_json(&mut f)?;
    f.flush()?;
    Ok(())
}

/// What a finished run printed and wrote.
#[derive(Debug)]
pub struct RunOutcome {
    pub reports: Vec<ActiveReport>,
    pub memory: Vec<MemoryReport>,
    pub summary: String,
}

/// Runs every trial (in parallel), writes per-trial files as each finishes
/// and then the aggregate CSV, memory CSV and summary table.
pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    let fx = spec.load_fixture()?;
    if spec.mode == Mode::Verify {
        let summary = run_verify(spec, &fx)?;
        return Ok(RunOutcome { reports: Vec::new(), memory: Vec::new(), summary });
    }
    if spec.trials == 0 {
        return Err(Error::Usage("--trials must be positive".into()));
    }
    fs::create_dir_all(&spec.out)?;
    let oracle = HistoryOracle::for_fixture(&fx)?;
    let configs: Vec<ActiveConfig> =
        (0..spec.trials).map(|i| spec.active_config(&fx, spec.seed + i as u64)).collect::<Result<_>>()?;
    // the burn-in does not depend on the trial seed
    let shared = match spec.mode {
        Mode::Active | Mode::RandomBaseline => Some(burn_in(&configs[0], &oracle)?),
        _ => None,
    };
    let results: Vec<Result<ActiveReport>> = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let report = match (spec.mode, &shared) {
                (Mode::Active, Some(b)) => run_active_from(cfg, &oracle, b),
                (Mode::RandomBaseline, Some(b)) => run_random_baseline_from(cfg, &oracle, b),
                _ => run_exhaustive(cfg, &oracle, cfg.burn_in_depth, cfg.max_depth),
            }?;
            write_trial(&spec.out, i, &report)?;
            log::info!("trial {i} (seed {}) finished", cfg.seed);
            Ok(report)
        })
        .collect();
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;

    let hash = fx.hash();
    let memory: Vec<MemoryReport> =
        reports.iter().map(|r| emit_memory_report(Some(r), &hash, spec.eps_policy)).collect();
    let mut f = create(&spec.out.join("aggregate.csv"))?;
    write_aggregate_csv(&reports, &mut f)?;
    f.flush()?;
    let mut f = create(&spec.out.join("memory.csv"))?;
    writeln!(f, "trial,seed,stored_prefixes,pair_count,tree_cache_bytes,pair_cache_bytes")?;
    for (i, (r, m)) in reports.iter().zip(&memory).enumerate() {
        writeln!(
            f,
            "{i},{},{},{},{},{}",
            r.seed, m.stored_prefixes, m.pair_count, m.tree_cache_bytes, m.pair_cache_bytes
        )?;
    }
    f.flush()?;
    if spec.mode == Mode::Exhaustive {
        let last = &reports[0];
        let depth = last.records.last().map_or(0, |r| r.depth);
        let key = CacheKey { fixture_hash: hash.clone(), depth, eps: spec.eps_policy };
        fs::write(spec.out.join(format!("tree_depth{depth}.rmc")), encode_tree(&key, &last.final_tree))?;
        let tree = &last.final_tree;
        let part = compute_signatures_scoped(tree, &oracle, spec.eps_policy, spec.scope.into())?;
        part.write_class_sizes_csv(tree, create(&spec.out.join("class_sizes.csv"))?)?;
    }
    let summary = summary_table(&reports, &memory);
    fs::write(spec.out.join("summary.txt"), &summary)?;
    Ok(RunOutcome { reports, memory, summary })
}

/// Cross-checks SAT enumeration against brute force at every depth up to
/// `--depth` (default: the smaller of the sufficient depth and 5).
pub fn run_verify(spec: &RunSpec, fx: &Fixture) -> Result<String> {
    let oracle = HistoryOracle::for_fixture(fx)?;
    let n = fx.mdp.n_states();
    let u = spec.u_max.unwrap_or(fx.machine.n_nodes());
    let p = spec.n_ap.unwrap_or(fx.machine.n_props());
    if search_space(u, p, n) > BRUTE_FORCE_CAP {
        return Err(Error::EnumerationCap { count: search_space(u, p, n), cap: BRUTE_FORCE_CAP });
    }
    let max_depth = spec.depth.unwrap_or(sufficient_depth(n, u).min(5));
    let mut lines = String::new();
    for depth in 1..=max_depth {
        let tree = PrefixTree::enumerate(&fx.mdp, depth, false, DEFAULT_NODE_CAP)?;
        let part = compute_signatures_scoped(&tree, &oracle, spec.eps_policy, spec.scope.into())?;
        let pairs = checked_negatives(&tree, &part, NegativeMode::All)?;
        let params = EncodingParams { non_stuttering: spec.no_stutter, ..EncodingParams::new(u, p, n) };
        let sat = encode(&pairs, &tree, params)?.enumerate_all(usize::MAX)?;
        let brute = brute_force_feasible(&pair_trajectories(&tree, &pairs), u, p, n, spec.no_stutter)?;
        if sat.sorted() != brute.sorted() {
            return Err(Error::Invariant(format!(
                "depth {depth}: SAT found {} models, brute force {}",
                sat.len(),
                brute.len()
            )));
        }
        if !sat.contains_equivalent(oracle.reveal_truth()) {
            return Err(Error::Invariant(format!("depth {depth}: ground truth missing")));
        }
        let _ = writeln!(lines, "depth {depth}: {} pairs, {} models", pairs.len(), sat.len());
    }
    lines.push_str("oracle cross-check passed\n");
    Ok(lines)
}

/// Entry point behind the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let spec = match RunSpec::try_parse_from(args) {
        Ok(s) => s,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&spec) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
