use crate::{Error, Result};

/// Anything that maps states to propositions and runs a deterministic
/// transition function over them from node 0.
pub trait LabeledModel {
    fn n_nodes(&self) -> usize;
    fn n_props(&self) -> usize;
    fn n_states(&self) -> usize;
    fn next_node(&self, node: usize, prop: usize) -> usize;
    fn label(&self, state: usize) -> usize;

    fn advance(&self, node: usize, state: usize) -> usize {
        self.next_node(node, self.label(state))
    }

    /// Node reached after consuming the labels of `tau` from `node`.
    fn run_from(&self, node: usize, tau: &[usize]) -> usize {
        tau.iter().fold(node, |u, &s| self.advance(u, s))
    }

    /// Node reached after consuming the labels of `tau` from the initial node.
    fn run(&self, tau: &[usize]) -> usize {
        self.run_from(0, tau)
    }
}

/// Reward machine with its labeling function. The initial node is node 0 and
/// the label of state 0 is proposition 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRewardMachine {
    n_nodes: usize,
    n_props: usize,
    /// `delta[u * n_props + p]`
    delta: Vec<usize>,
    labeling: Vec<usize>,
    /// Output function `delta_r[u * n_props + p]`, ground truth only.
    rewards: Option<Vec<f64>>,
    prop_names: Vec<String>,
}

impl LabeledRewardMachine {
    pub fn new(
        n_nodes: usize,
        n_props: usize,
        delta: Vec<usize>,
        labeling: Vec<usize>,
        rewards: Option<Vec<f64>>,
    ) -> Result<Self> {
        if n_nodes == 0 || n_props == 0 {
            return Err(Error::InvalidModel("machine needs at least one node and one proposition".into()));
        }
        if delta.len() != n_nodes * n_props {
            return Err(Error::InvalidModel(format!(
                "transition table has {} entries, expected {}",
                delta.len(),
                n_nodes * n_props
            )));
        }
        if let Some(bad) = delta.iter().find(|&&u| u >= n_nodes) {
            return Err(Error::InvalidModel(format!("transition target {bad} out of range")));
        }
        if labeling.is_empty() {
            return Err(Error::InvalidModel("labeling defined on no states".into()));
        }
        if let Some(bad) = labeling.iter().find(|&&p| p >= n_props) {
            return Err(Error::InvalidModel(format!("label {bad} out of range")));
        }
        if labeling[0] != 0 {
            return Err(Error::InvalidModel("label of the first state must be the first proposition".into()));
        }
        if let Some(r) = &rewards {
            if r.len() != n_nodes * n_props {
                return Err(Error::InvalidModel("output function has the wrong size".into()));
            }
        }
        Ok(Self {
            n_nodes,
            n_props,
            delta,
            labeling,
            rewards,
            prop_names: (0..n_props).map(|p| format!("p{}", p + 1)).collect(),
        })
    }

    pub fn with_prop_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.n_props);
        self.prop_names = names;
        self
    }

    /// Single-node machine with every transition a self-loop and zero reward.
    pub fn trivial(labeling: Vec<usize>, n_props: usize) -> Result<Self> {
        Self::new(1, n_props, vec![0; n_props], labeling, Some(vec![0.0; n_props]))
    }

    pub fn delta(&self) -> &[usize] {
        &self.delta
    }

    pub fn labeling(&self) -> &[usize] {
        &self.labeling
    }

    pub fn rewards(&self) -> Option<&[f64]> {
        self.rewards.as_deref()
    }

    pub fn reward(&self, node: usize, prop: usize) -> Option<f64> {
        self.rewards.as_ref().map(|r| r[node * self.n_props + prop])
    }

    pub fn prop_names(&self) -> &[String] {
        &self.prop_names
    }

    /// Drops the output function, leaving the labeled reward machine model.
    pub fn without_rewards(&self) -> Self {
        Self { rewards: None, ..self.clone() }
    }
}

impl LabeledModel for LabeledRewardMachine {
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

/// Runs `machine` over `tau` from the initial node, rejecting out-of-range
/// states.
pub fn rm_run<M: LabeledModel + ?Sized>(machine: &M, tau: &[usize]) -> Result<usize> {
    let n = machine.n_states();
    if let Some(&bad) = tau.iter().find(|&&s| s >= n) {
        return Err(Error::StateOutOfRange { state: bad, n_states: n });
    }
    Ok(machine.run(tau))
}
