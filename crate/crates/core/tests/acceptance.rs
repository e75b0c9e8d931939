//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary (`cargo test --test acceptance`) and exits nonzero if any gating
//! check fails.

mod common;

use std::time::Instant;

use rmlearn::active::{
    burn_in, run_active, run_active_from, run_exhaustive, run_random_baseline, run_random_baseline_from,
    ActiveConfig, ActiveReport,
};
use rmlearn::env::{fixtures, Fixture, LabeledModel, LabeledRewardMachine, ProductMdp};
use rmlearn::policy::{soft_value_iteration, HistoryOracle, ProductPolicy, EPS_POLICY, VI_MAX_ITERS, VI_TOL};
use rmlearn::satsynth::{encode, orbit_size, sufficient_depth, EncodingParams, Hypothesis};
use rmlearn::traces::{
    compute_signatures, materialize_negatives, NegativeMode, PrefixTree, QueryScope,
    DEFAULT_NODE_CAP,
};
use rmlearn::verify::{brute_force_feasible, feasible_at_depth, pair_trajectories};

use common::{affordable_depth, small_world};

const PATROL_BURN_IN: usize = 6;
const PATROL_FINAL: usize = PATROL_BURN_IN + 7;
const BUDGET: usize = 250;
const N_ACTIVE: usize = 100;
const PATROL_TRIALS: u64 = 10;

/// Collects result lines and prints them in criterion order.
#[derive(Default)]
struct Suite {
    failures: usize,
    lines: Vec<(String, String)>,
}

impl Suite {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.lines.push((name.to_string(), format!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" })));
        if !ok {
            self.failures += 1;
        }
    }

    fn info(&mut self, name: &str, detail: String) {
        self.lines.push((name.to_string(), format!("INFO {name}: {detail}")));
    }

    fn print(&mut self) {
        // numbered criteria first
        let key = |name: &str| if name.starts_with(|c: char| c.is_ascii_digit()) { name.to_string() } else { format!("9{name}") };
        self.lines.sort_by_key(|(name, _)| key(name));
        for (_, line) in &self.lines {
            println!("{line}");
        }
    }
}

fn patrol_config(fx: &Fixture, seed: u64) -> ActiveConfig {
    let mut cfg = ActiveConfig::for_fixture(fx, PATROL_BURN_IN, PATROL_FINAL, BUDGET, N_ACTIVE);
    cfg.scope = QueryScope::Endpoint;
    cfg.seed = seed;
    cfg
}

fn truth_violations(reports: &[ActiveReport]) -> (usize, usize) {
    let records: Vec<_> = reports.iter().flat_map(|r| &r.records).collect();
    (records.iter().filter(|r| !r.truth_present).count(), records.len())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn oracle_equivalence(suite: &mut Suite) {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut at_l_star = 0;
    let mut cases = 0;
    for seed in 0..24u64 {
        let w = small_world(seed);
        let n = w.mdp.n_states();
        for u in 1..=2 {
            let l_star = sufficient_depth(n, u);
            let depth = affordable_depth(&w.mdp, l_star, 20_000);
            at_l_star += usize::from(depth == l_star);
            let tree = PrefixTree::enumerate(&w.mdp, depth, false, DEFAULT_NODE_CAP).unwrap();
            let part = compute_signatures(&tree, &w.oracle, EPS_POLICY).unwrap();
            let pairs = materialize_negatives(&tree, &part, NegativeMode::PerTerminalSample { k: 400, seed });
            let p = w.truth.n_props();
            let sat = encode(&pairs, &tree, EncodingParams::new(u, p, n)).unwrap().enumerate_all(usize::MAX).unwrap();
            let brute = brute_force_feasible(&pair_trajectories(&tree, &pairs), u, p, n, false).unwrap();
            let truth_ok = u < w.truth.n_nodes() || sat.contains_equivalent(&w.truth);
            if sat.sorted() != brute.sorted() || !truth_ok {
                mismatches += 1;
            }
            cases += 1;
        }
    }
    suite.check(
        "1 oracle equivalence",
        mismatches == 0,
        format!(
            "{cases} cases on 24 random worlds, {mismatches} mismatches, {at_l_star} solved at l*, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    );
}

fn depth_stabilization(suite: &mut Suite) {
    let fx = fixtures::line3();
    let oracle = HistoryOracle::for_fixture(&fx).unwrap();
    let l_star = sufficient_depth(fx.mdp.n_states(), 2);
    let at = |d| feasible_at_depth(&fx, &oracle, d, 2, 2, QueryScope::AllStates, EPS_POLICY).unwrap().sorted();
    let (a, b) = (at(l_star), at(l_star + 1));
    suite.check(
        "3 depth stabilization",
        l_star == 12 && a == b && !a.is_empty(),
        format!("line3 l*={l_star}: {} models at l*, {} at l*+1, equal={}", a.len(), b.len(), a == b),
    );
}

fn renaming_arithmetic(suite: &mut Suite, name: &str, reports: &[ActiveReport], target: usize) -> bool {
    let mut ok = true;
    let mut counts = Vec::new();
    for r in reports.iter().filter(|r| r.converged_at.is_some()) {
        let classes = r.final_set.classes();
        let rep = classes.keys().next().unwrap();
        let orbit = orbit_size(rep).unwrap();
        ok &= classes.len() == 1 && r.final_set.len() == classes.len() * orbit;
        counts.push(r.final_set.len());
    }
    let n = counts.len();
    ok &= n > 0;
    counts.dedup();
    suite.info(
        name,
        format!("{n}/{} runs converged, raw counts {counts:?}, calibration target {target}", reports.len()),
    );
    ok
}

fn patrol_burn_in(suite: &mut Suite, fx: &Fixture, oracle: &HistoryOracle) -> (ActiveReport, f64) {
    let mut cfg = patrol_config(fx, 0);
    cfg.burn_in_negatives = NegativeMode::All;
    cfg.stop_on_convergence = false;
    let first = run_exhaustive(&cfg, oracle, PATROL_BURN_IN, PATROL_BURN_IN).unwrap();
    let second = run_exhaustive(&cfg, oracle, PATROL_BURN_IN, PATROL_BURN_IN).unwrap();
    let count = first.final_set.len();
    let at_depth = first.final_tree.count_at_depth(PATROL_BURN_IN);
    let deterministic = first.final_set.sorted() == second.final_set.sorted();
    suite.check(
        "5 patrol burn-in",
        deterministic && (500..=2500).contains(&count),
        format!(
            "depth {PATROL_BURN_IN}: {count} solutions ({} classes, target 1152), {at_depth} length-{PATROL_BURN_IN} \
             prefixes (target 6895), repeat identical={deterministic}",
            first.final_set.n_classes()
        ),
    );
    let sat = first.total_sat_seconds();
    (first, sat)
}

fn numerics(suite: &mut Suite) {
    let mut worst_ratio: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_sum: f64 = 0.0;
    let mut check_policy = |pol: &ProductPolicy, gamma: f64| {
        // rounding floor: a few ulps of the largest value
        let v_max = pol
            .product()
            .accessible()
            .iter()
            .map(|&(s, u)| pol.value(s, u).unwrap().abs())
            .fold(0.0, f64::max);
        let ulp = f64::EPSILON * v_max.max(1.0);
        for w in pol.residuals().windows(2) {
            worst_excess = worst_excess.max((w[1] - gamma * w[0]) / ulp);
            if w[0] > 1e-12 {
                worst_ratio = worst_ratio.max(w[1] / (gamma * w[0]));
            }
        }
        for &(s, u) in pol.product().accessible() {
            let sum: f64 = pol.row(s, u).unwrap().iter().sum();
            worst_sum = worst_sum.max((sum - 1.0).abs());
        }
    };
    for name in fixtures::BUILTIN {
        let fx = fixtures::builtin(name).unwrap();
        let oracle = HistoryOracle::for_fixture(&fx).unwrap();
        check_policy(oracle.policy(), fx.mdp.discount());
    }
    let mut uniform_dev: f64 = 0.0;
    for name in ["line3", "patrol"] {
        let fx = fixtures::builtin(name).unwrap();
        let zero = LabeledRewardMachine::trivial(fx.machine.labeling().to_vec(), fx.machine.n_props()).unwrap();
        let prod = ProductMdp::build(&fx.mdp, &zero).unwrap();
        let pol = soft_value_iteration(&prod, fx.lambda(), VI_TOL, VI_MAX_ITERS).unwrap();
        check_policy(&pol, fx.mdp.discount());
        let na = fx.mdp.n_actions() as f64;
        for &(s, u) in prod.accessible() {
            for &p in pol.row(s, u).unwrap() {
                uniform_dev = uniform_dev.max((p - 1.0 / na).abs());
            }
        }
    }
    suite.check(
        "8 numerics",
        worst_excess <= 4.0 && worst_sum < 1e-9 && uniform_dev < 1e-9,
        format!(
            "max residual ratio / gamma {worst_ratio:.6}, max excess over gamma * previous \
             {worst_excess:.2} ulp of |V|, max |row sum - 1| {worst_sum:.1e}, \
             zero-reward max deviation from uniform {uniform_dev:.1e}"
        ),
    );
}

fn main() {
    let mut suite = Suite::default();
    let start = Instant::now();

    oracle_equivalence(&mut suite);
    depth_stabilization(&mut suite);

    // patrol: exhaustive burn-in, then active vs random from a shared burn-in
    let patrol = fixtures::patrol_abcd();
    let patrol_oracle = HistoryOracle::for_fixture(&patrol).unwrap();
    let (exhaustive, exhaustive_sat) = patrol_burn_in(&mut suite, &patrol, &patrol_oracle);
    let shared = burn_in(&patrol_config(&patrol, 0), &patrol_oracle).unwrap();
    let active: Vec<ActiveReport> = (1..=PATROL_TRIALS)
        .map(|s| run_active_from(&patrol_config(&patrol, s), &patrol_oracle, &shared).unwrap())
        .collect();
    let random: Vec<ActiveReport> = (1..=PATROL_TRIALS)
        .map(|s| run_random_baseline_from(&patrol_config(&patrol, s), &patrol_oracle, &shared).unwrap())
        .collect();
    let remaining =
        |rs: &[ActiveReport]| mean(&rs.iter().map(|r| r.at_depth(PATROL_FINAL).unwrap().raw_count as f64).collect::<Vec<_>>());
    let (active_mean, random_mean) = (remaining(&active), remaining(&random));
    let converged = active.iter().filter(|r| r.converged_by(PATROL_FINAL)).count();
    let random_converged = random.iter().filter(|r| r.converged_by(PATROL_FINAL)).count();
    suite.check(
        "6 active vs random",
        active_mean < random_mean && 2 * converged >= active.len(),
        format!(
            "{PATROL_TRIALS} trials each, depth {PATROL_FINAL}: mean remaining {active_mean:.1} active vs \
             {random_mean:.1} random; single class in {converged}/{} active, {random_converged}/{} random",
            active.len(),
            random.len()
        ),
    );

    // memory: stored prefixes of the active runs against the full tree
    let exhaustive_prefixes: u128 = patrol.mdp.count_trajectories(PATROL_FINAL, false).iter().sum();
    let bound = shared.tree.n_prefixes() as u128 + 2 * BUDGET as u128 * (PATROL_FINAL - PATROL_BURN_IN) as u128;
    let stored = active.iter().map(|r| r.at_depth(PATROL_FINAL).unwrap().stored_prefixes).max().unwrap();
    suite.check(
        "7 memory",
        stored <= bound && stored * 100 <= exhaustive_prefixes,
        format!(
            "active stores at most {stored} prefixes at depth {PATROL_FINAL} (bound {bound}); \
             exhaustive tree would hold {exhaustive_prefixes}"
        ),
    );

    // SAT time: exhaustive has not reached the final set at the burn-in
    // depth, so its time there is a lower bound on its total
    let active_sat = active.iter().map(ActiveReport::total_sat_seconds).fold(0.0, f64::max);
    let matched = active.iter().filter(|r| r.converged_at.is_some()).all(|r| {
        r.final_set.sorted() == active[0].final_set.sorted()
    });
    let exhaustive_done = exhaustive.final_set.n_classes() == 1;
    suite.check(
        "SAT time ratio",
        matched && !exhaustive_done && active_sat < exhaustive_sat,
        format!(
            "active total SAT {active_sat:.2}s (max over trials, shared burn-in included) vs exhaustive \
             >= {exhaustive_sat:.2}s ({} models left at depth {PATROL_BURN_IN})",
            exhaustive.final_set.len()
        ),
    );

    // pick_n_drop and line3 runs for safety and renaming arithmetic
    let pnd = fixtures::pick_n_drop();
    let pnd_oracle = HistoryOracle::for_fixture(&pnd).unwrap();
    let pnd_cfg = |seed| {
        let mut cfg = ActiveConfig::for_fixture(&pnd, 3, 20, BUDGET, N_ACTIVE);
        cfg.seed = seed;
        cfg
    };
    let pnd_active: Vec<ActiveReport> = (1..=5).map(|s| run_active(&pnd_cfg(s), &pnd_oracle).unwrap()).collect();
    let mut pnd_random_cfg = pnd_cfg(1);
    pnd_random_cfg.max_depth = 10;
    let pnd_random = run_random_baseline(&pnd_random_cfg, &pnd_oracle).unwrap();

    let line3 = fixtures::line3();
    let line3_oracle = HistoryOracle::for_fixture(&line3).unwrap();
    let line3_cfg = |seed| {
        let mut cfg = ActiveConfig::for_fixture(&line3, 2, 12, 20, 10);
        cfg.seed = seed;
        cfg.stop_on_convergence = false;
        cfg
    };
    let mut line3_runs: Vec<ActiveReport> = Vec::new();
    for s in 1..=3 {
        line3_runs.push(run_active(&line3_cfg(s), &line3_oracle).unwrap());
        line3_runs.push(run_random_baseline(&line3_cfg(s), &line3_oracle).unwrap());
    }
    let mut ex_cfg = line3_cfg(0);
    ex_cfg.burn_in_negatives = NegativeMode::PerTerminalSample { k: 200, seed: 0 };
    line3_runs.push(run_exhaustive(&ex_cfg, &line3_oracle, 1, 12).unwrap());

    let all: Vec<ActiveReport> = active
        .iter()
        .chain(&random)
        .chain(&pnd_active)
        .chain(std::iter::once(&pnd_random))
        .chain(&line3_runs)
        .chain(std::iter::once(&exhaustive))
        .cloned()
        .collect();
    let (violations, records) = truth_violations(&all);
    suite.check(
        "2 ground-truth safety",
        violations == 0 && all.len() >= 30,
        format!("{} trials over 3 fixtures and 3 modes, {records} hypothesis sets, {violations} without the truth", all.len()),
    );

    let pnd_ok = renaming_arithmetic(&mut suite, "4 pick_n_drop", &pnd_active, 12);
    let patrol_ok = renaming_arithmetic(&mut suite, "4 patrol", &active, 36);
    let truth_orbits = [&pnd, &patrol].map(|fx| orbit_size(&Hypothesis::from_model(&fx.machine)).unwrap());
    suite.check(
        "4 renaming arithmetic",
        pnd_ok && patrol_ok,
        format!("raw = classes x orbit at convergence; truth orbits {truth_orbits:?}"),
    );

    numerics(&mut suite);
    suite.info("total", format!("{:.1}s", start.elapsed().as_secs_f64()));
    suite.print();
    if suite.failures > 0 {
        println!("{} criteria failed", suite.failures);
        std::process::exit(1);
    }
}
