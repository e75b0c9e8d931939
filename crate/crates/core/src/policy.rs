//! Entropy-regularized optimal product policy and the history-policy oracle
//! built on top of it.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::env::{Fixture, LabeledModel, LabeledRewardMachine, MdpModel, ProductMdp};
use crate::{Error, Result};

/// Sup-norm tolerance under which two policy rows count as equal.
pub const EPS_POLICY: f64 = 1e-6;
pub const VI_TOL: f64 = 1e-10;
pub const VI_MAX_ITERS: usize = 100_000;

/// Softmax policy over the accessible pairs of a product MDP.
#[derive(Debug, Clone)]
pub struct ProductPolicy {
    product: ProductMdp,
    n_actions: usize,
    /// `dist[idx * n_actions + a]`, `idx` indexes `product.accessible()`.
    dist: Vec<f64>,
    values: Vec<f64>,
    lambda: f64,
    residuals: Vec<f64>,
}

impl ProductPolicy {
    pub fn product(&self) -> &ProductMdp {
        &self.product
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Final sup-norm Bellman residual.
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }

    /// Residual after every sweep.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn value(&self, state: usize, node: usize) -> Option<f64> {
        self.product.index_of(state, node).map(|i| self.values[i])
    }

    /// Action distribution at `(state, node)`, `None` outside the accessible set.
    pub fn row(&self, state: usize, node: usize) -> Option<&[f64]> {
        self.product
            .index_of(state, node)
            .map(|i| &self.dist[i * self.n_actions..(i + 1) * self.n_actions])
    }

    /// Debug dump: `state,node,action,probability` with 1-based indices.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "state,node,action,probability")?;
        let names = self.product.mdp().action_names();
        let mut pairs: Vec<_> = self.product.accessible().to_vec();
        pairs.sort_unstable();
        for (s, u) in pairs {
            let row = self.row(s, u).expect("accessible");
            for (a, p) in row.iter().enumerate() {
                writeln!(out, "{},{},{},{:.17e}", s + 1, u + 1, names[a], p)?;
            }
        }
        Ok(())
    }
}

/// `lambda * log(sum exp(q / lambda))`, shifted by the maximum.
fn soft_max(q: &[f64], lambda: f64) -> f64 {
    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + lambda * q.iter().map(|&x| ((x - m) / lambda).exp()).sum::<f64>().ln()
}

/// Synchronous soft value iteration on the product MDP.
pub fn soft_value_iteration(
    prod: &ProductMdp,
    lambda: f64,
    tol: f64,
    max_iters: usize,
) -> Result<ProductPolicy> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidModel(format!("entropy weight must be positive, got {lambda}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidModel(format!("tolerance must be positive, got {tol}")));
    }
    let n = prod.len();
    let n_actions = prod.mdp().n_actions();
    let gamma = prod.mdp().discount();
    // flattened transitions: per (idx, a) a list of (successor, prob, reward)
    let table: Vec<Vec<(usize, f64, f64)>> = (0..n)
        .flat_map(|i| (0..n_actions).map(move |a| (i, a)))
        .map(|(i, a)| prod.transitions(i, a).collect())
        .collect();
    let q_values = |values: &[f64], i: usize, q: &mut [f64]| {
        for (a, slot) in q.iter_mut().enumerate() {
            *slot = table[i * n_actions + a]
                .iter()
                .map(|&(j, p, r)| p * (r + gamma * values[j]))
                .sum();
        }
    };

    let mut values = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut q = vec![0.0; n_actions];
    let mut residuals = Vec::new();
    loop {
        let mut residual: f64 = 0.0;
        for i in 0..n {
            q_values(&values, i, &mut q);
            next[i] = soft_max(&q, lambda);
            residual = residual.max((next[i] - values[i]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        residuals.push(residual);
        if residual < tol {
            break;
        }
        if residuals.len() >= max_iters {
            return Err(Error::NotConverged { iters: residuals.len(), residual });
        }
    }

    let mut dist = vec![0.0; n * n_actions];
    for i in 0..n {
        q_values(&values, i, &mut q);
        let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let row = &mut dist[i * n_actions..(i + 1) * n_actions];
        for (slot, &x) in row.iter_mut().zip(&q) {
            *slot = ((x - m) / lambda).exp();
        }
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= z);
    }
    Ok(ProductPolicy { product: prod.clone(), n_actions, dist, values, lambda, residuals })
}

/// True iff the sup-norm distance between `p` and `q` exceeds `eps`.
pub fn rows_differ(p: &[f64], q: &[f64], eps: f64) -> Result<bool> {
    Ok(row_witness(p, q, eps)?.is_some())
}

/// Action with the largest disagreement, if that disagreement exceeds `eps`.
pub fn row_witness(p: &[f64], q: &[f64], eps: f64) -> Result<Option<usize>> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    let (best, gap) = p
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    Ok((gap > eps).then_some(best))
}

/// History policy `pi_h(a | s, tau)`. The ground-truth machine stays private;
/// callers only see action distributions.
#[derive(Debug)]
pub struct HistoryOracle {
    policy: Arc<ProductPolicy>,
    query_count: AtomicU64,
}

impl HistoryOracle {
    pub fn new(policy: ProductPolicy) -> Self {
        Self { policy: Arc::new(policy), query_count: AtomicU64::new(0) }
    }

    /// Solves the fixture's product with the default tolerances.
    pub fn for_fixture(fx: &Fixture) -> Result<Self> {
        let prod = ProductMdp::build(&fx.mdp, &fx.machine)?;
        Ok(Self::new(soft_value_iteration(&prod, fx.lambda(), VI_TOL, VI_MAX_ITERS)?))
    }

    pub fn mdp(&self) -> &MdpModel {
        self.policy.product.mdp()
    }

    pub fn query_count(&self) -> u64 {
        self.query_count.load(Ordering::Relaxed)
    }

    /// `pi_h(. | s, tau)`, or `None` when `(s, node reached by tau)` is not
    /// accessible. `tau` must be a feasible trajectory prefix.
    pub fn query(&self, tau: &[usize], s: usize) -> Result<Option<&[f64]>> {
        self.mdp().check_feasible(tau)?;
        self.mdp().check_state(s)?;
        self.query_count.fetch_add(1, Ordering::Relaxed);
        let node = self.truth().run(tau);
        Ok(self.policy.row(s, node))
    }

    /// Incremental view of a growing trajectory.
    pub fn cursor(&self) -> HistoryCursor<'_> {
        HistoryCursor { oracle: self, node: 0, last: None, len: 0 }
    }

    fn truth(&self) -> &LabeledRewardMachine {
        self.policy.product.machine()
    }

    /// Ground-truth machine, for test harnesses that score learners. Learners
    /// never receive it.
    pub fn reveal_truth(&self) -> &LabeledRewardMachine {
        self.truth()
    }

    pub fn policy(&self) -> &ProductPolicy {
        &self.policy
    }
}

/// A feasible trajectory prefix being extended one state at a time.
#[derive(Clone)]
pub struct HistoryCursor<'a> {
    oracle: &'a HistoryOracle,
    node: usize,
    last: Option<usize>,
    len: usize,
}

impl<'a> HistoryCursor<'a> {
    pub fn push(&mut self, s: usize) -> Result<()> {
        let mdp = self.oracle.mdp();
        mdp.check_state(s)?;
        let ok = match self.last {
            None => mdp.initial_dist()[s] > 0.0,
            Some(prev) => mdp.successors(prev).binary_search(&s).is_ok(),
        };
        if !ok {
            return Err(Error::InfeasibleTrajectory { position: self.len });
        }
        self.node = self.oracle.truth().advance(self.node, s);
        self.last = Some(s);
        self.len += 1;
        Ok(())
    }

    pub fn extended(&self, s: usize) -> Result<Self> {
        let mut next = self.clone();
        next.push(s)?;
        Ok(next)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn last(&self) -> Option<usize> {
        self.last
    }

    /// `pi_h(. | s, prefix)`; counts as one oracle query.
    pub fn row(&self, s: usize) -> Option<&'a [f64]> {
        self.oracle.query_count.fetch_add(1, Ordering::Relaxed);
        self.oracle.policy.row(s, self.node)
    }
}
