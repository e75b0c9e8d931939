use crate::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-9;

/// Finite MDP without a reward: states, actions, kernel, initial distribution
/// and discount factor.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    n_states: usize,
    n_actions: usize,
    /// Dense kernel, `kernel[(s * n_actions + a) * n_states + s']`.
    kernel: Vec<f64>,
    initial: Vec<f64>,
    discount: f64,
    action_names: Vec<String>,
    /// Union over actions of the positive-probability successors, sorted.
    successors: Vec<Vec<usize>>,
}

impl MdpModel {
    /// `rows[s * n_actions + a]` is the distribution over next states.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Vec<f64>>,
        initial: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidModel("empty state or action set".into()));
        }
        if rows.len() != n_states * n_actions {
            return Err(Error::InvalidModel(format!(
                "expected {} kernel rows, got {}",
                n_states * n_actions,
                rows.len()
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidModel(format!("discount {discount} not in [0,1)")));
        }
        check_distribution(&initial, n_states, "initial distribution")?;
        let mut kernel = Vec::with_capacity(n_states * n_actions * n_states);
        for (idx, row) in rows.iter().enumerate() {
            check_distribution(
                row,
                n_states,
                &format!("kernel row (s={}, a={})", idx / n_actions, idx % n_actions),
            )?;
            kernel.extend_from_slice(row);
        }
        let successors = (0..n_states)
            .map(|s| {
                (0..n_states)
                    .filter(|&t| {
                        (0..n_actions).any(|a| kernel[(s * n_actions + a) * n_states + t] > 0.0)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n_states,
            n_actions,
            kernel,
            initial,
            discount,
            action_names: (0..n_actions).map(|a| format!("a{}", a + 1)).collect(),
            successors,
        })
    }

    pub fn with_action_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.n_actions);
        self.action_names = names;
        self
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.kernel[start..start + self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.kernel[(s * self.n_actions + a) * self.n_states + next]
    }

    pub fn successors(&self, s: usize) -> &[usize] {
        &self.successors[s]
    }

    pub fn initial_support(&self) -> Vec<usize> {
        (0..self.n_states).filter(|&s| self.initial[s] > 0.0).collect()
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s < self.n_states {
            Ok(())
        } else {
            Err(Error::StateOutOfRange { state: s, n_states: self.n_states })
        }
    }

    /// Checks that `tau` starts in the support of the initial distribution and
    /// only uses positive-probability transitions.
    pub fn check_feasible(&self, tau: &[usize]) -> Result<()> {
        for &s in tau {
            self.check_state(s)?;
        }
        match tau.first() {
            None => return Ok(()),
            Some(&s0) if self.initial[s0] <= 0.0 => {
                return Err(Error::InfeasibleTrajectory { position: 0 })
            }
            _ => {}
        }
        for (i, w) in tau.windows(2).enumerate() {
            if self.successors[w[0]].binary_search(&w[1]).is_err() {
                return Err(Error::InfeasibleTrajectory { position: i + 1 });
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, tau: &[usize]) -> bool {
        self.check_feasible(tau).is_ok()
    }

    /// Number of feasible trajectories of each length `1..=depth`, computed by
    /// dynamic programming over end states (no enumeration). `compress` counts
    /// trajectories without consecutive repeated states.
    pub fn count_trajectories(&self, depth: usize, compress: bool) -> Vec<u128> {
        let mut per_state: Vec<u128> =
            self.initial.iter().map(|&p| u128::from(p > 0.0)).collect();
        let mut counts = Vec::with_capacity(depth);
        for d in 1..=depth {
            if d > 1 {
                let mut next = vec![0u128; self.n_states];
                for (s, &c) in per_state.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    for &t in &self.successors[s] {
                        if compress && t == s {
                            continue;
                        }
                        next[t] = next[t].saturating_add(c);
                    }
                }
                per_state = next;
            }
            counts.push(per_state.iter().fold(0u128, |acc, &c| acc.saturating_add(c)));
        }
        counts
    }
}

fn check_distribution(p: &[f64], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::InvalidModel(format!("{what} has length {}, expected {n}", p.len())));
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::InvalidModel(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {total}")));
    }
    Ok(())
}
