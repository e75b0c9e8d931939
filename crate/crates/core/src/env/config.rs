//! Plain-text fixture format.
//!
//! ```text
//! # comments start with '#'
//! name = patrol
//!
//! [grid]
//! AABB          one character per cell, row-major; the character is the
//! AABB          cell's ground-truth proposition ('.' marks unlabeled cells)
//!
//! [params]
//! slip = 0.1
//! gamma = 0.95
//! lambda = 0.1
//! initial = unlabeled       # or `all`, or 1-based cell numbers: 1 4 13
//! moves = cardinal          # or `horizontal`
//!
//! [machine]
//! nodes = 4
//! default = self 0          # missing transitions become zero-reward self-loops
//! 1 --A/1--> 2              # node --proposition/reward--> node, 1-based nodes
//! ```
//!
//! Node 1 is the initial node. Propositions are numbered so that the character
//! of cell 1 becomes proposition 1; the others follow in order of first
//! appearance. Without a `default` line every (node, proposition) pair needs
//! an edge.

use std::collections::BTreeMap;

use super::grid::{GridConfig, Moves};
use super::LabeledRewardMachine;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MachineSpec {
    pub n_nodes: usize,
    /// `(from, proposition char, reward, to, source line)`, 0-based nodes.
    pub edges: Vec<(usize, char, f64, usize, usize)>,
    /// Reward for implicit self-loops; `None` means δ_u must be given in full.
    pub default_self_loop: Option<f64>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub name: String,
    pub grid: GridConfig,
    pub machine: MachineSpec,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Top,
    Grid,
    Params,
    Machine,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| err(line, format!("cannot parse {key} = {value:?}")))
}

pub fn parse_fixture(text: &str) -> Result<FixtureConfig> {
    let mut section = Section::Top;
    let mut name = String::from("unnamed");
    let mut layout: Vec<Vec<char>> = Vec::new();
    let mut grid_line = 0;
    let mut slip = 0.1;
    let mut gamma = 0.95;
    let mut lambda = 0.1;
    let mut initial: Option<(String, usize)> = None;
    let mut moves = Moves::Cardinal;
    let mut n_nodes: Option<usize> = None;
    let mut machine_line = 0;
    let mut default_self_loop = None;
    let mut edges = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[grid]" => {
                    grid_line = line_no;
                    Section::Grid
                }
                "[params]" => Section::Params,
                "[machine]" => {
                    machine_line = line_no;
                    Section::Machine
                }
                other => return Err(err(line_no, format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::Grid => layout.push(line.chars().filter(|c| !c.is_whitespace()).collect()),
            Section::Top | Section::Params => {
                let (key, value) = line
                    .split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| err(line_no, "expected key = value"))?;
                match (section, key) {
                    (Section::Top, "name") => name = value.to_string(),
                    (Section::Params, "slip") => slip = parse_num(line_no, key, value)?,
                    (Section::Params, "gamma") => gamma = parse_num(line_no, key, value)?,
                    (Section::Params, "lambda") => lambda = parse_num(line_no, key, value)?,
                    (Section::Params, "initial") => initial = Some((value.to_string(), line_no)),
                    (Section::Params, "moves") => {
                        moves = match value {
                            "cardinal" => Moves::Cardinal,
                            "horizontal" => Moves::Horizontal,
                            _ => return Err(err(line_no, format!("unknown moves {value:?}"))),
                        }
                    }
                    _ => return Err(err(line_no, format!("unknown key {key:?}"))),
                }
            }
            Section::Machine => {
                if let Some((key, value)) = line.split_once('=') {
                    let (key, value) = (key.trim(), value.trim());
                    match key {
                        "nodes" => n_nodes = Some(parse_num(line_no, key, value)?),
                        "default" => {
                            let mut parts = value.split_whitespace();
                            if parts.next() != Some("self") {
                                return Err(err(line_no, "default must be `self <reward>`"));
                            }
                            let r = parts.next().unwrap_or("0");
                            default_self_loop = Some(parse_num(line_no, "default reward", r)?);
                        }
                        _ => return Err(err(line_no, format!("unknown key {key:?}"))),
                    }
                } else {
                    edges.push(parse_edge(line_no, line)?);
                }
            }
        }
    }

    if layout.is_empty() {
        return Err(err(text.lines().count().max(1), "missing [grid] section"));
    }
    let cols = layout[0].len();
    if let Some(r) = layout.iter().position(|row| row.len() != cols) {
        return Err(err(grid_line + 1 + r, "grid layout is not rectangular"));
    }
    let n_cells = layout.len() * cols;
    let initial_cells = match initial {
        None => unlabeled_cells(&layout),
        Some((v, _)) if v == "unlabeled" => unlabeled_cells(&layout),
        Some((v, _)) if v == "all" => (0..n_cells).collect(),
        Some((v, l)) => v
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                let cell: usize = parse_num(l, "initial cell", t)?;
                if cell == 0 || cell > n_cells {
                    return Err(err(l, format!("initial cell {cell} outside 1..={n_cells}")));
                }
                Ok(cell - 1)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    if initial_cells.is_empty() {
        return Err(err(grid_line, "no initial cells (set `initial` in [params])"));
    }
    let grid = GridConfig { layout, slip_prob: slip, gamma, lambda, initial_cells, moves };
    grid.validate().map_err(|e| err(grid_line, e.to_string()))?;

    let n_nodes = n_nodes.ok_or_else(|| err(machine_line, "missing `nodes = <count>`"))?;
    for &(from, _, _, to, l) in &edges {
        if from >= n_nodes || to >= n_nodes {
            return Err(err(l, format!("node outside 1..={n_nodes}")));
        }
    }
    Ok(FixtureConfig {
        name,
        grid,
        machine: MachineSpec { n_nodes, edges, default_self_loop, line: machine_line },
    })
}

fn unlabeled_cells(layout: &[Vec<char>]) -> Vec<usize> {
    layout.iter().flatten().enumerate().filter(|(_, &c)| c == '.').map(|(i, _)| i).collect()
}

fn parse_edge(line_no: usize, line: &str) -> Result<(usize, char, f64, usize, usize)> {
    let bad = || err(line_no, format!("expected `u --p/r--> v`, got {line:?}"));
    let (from, rest) = line.split_once("--").ok_or_else(bad)?;
    let (label, to) = rest.rsplit_once("-->").ok_or_else(bad)?;
    let (prop, reward) = label.split_once('/').ok_or_else(bad)?;
    let mut chars = prop.trim().chars();
    let prop = match (chars.next(), chars.next()) {
        (Some(c), None) => c,
        _ => return Err(err(line_no, "proposition must be a single grid character")),
    };
    let from: usize = parse_num(line_no, "source node", from.trim())?;
    let to: usize = parse_num(line_no, "target node", to.trim())?;
    if from == 0 || to == 0 {
        return Err(err(line_no, "nodes are numbered from 1"));
    }
    let reward = parse_num(line_no, "reward", reward.trim())?;
    Ok((from - 1, prop, reward, to - 1, line_no))
}

/// Proposition characters ordered so that cell 0's character comes first,
/// then by first appearance in row-major order.
pub fn proposition_order(layout: &[Vec<char>]) -> Vec<char> {
    let mut order: Vec<char> = Vec::new();
    for &c in layout.iter().flatten() {
        if !order.contains(&c) {
            order.push(c);
        }
    }
    order
}

/// Builds the ground-truth labeled reward machine (with output function).
pub fn build_ground_truth_rm(
    spec: &MachineSpec,
    layout: &[Vec<char>],
) -> Result<LabeledRewardMachine> {
    let props = proposition_order(layout);
    let prop_index: BTreeMap<char, usize> = props.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let n_props = props.len();
    let mut delta: Vec<Option<usize>> = vec![None; spec.n_nodes * n_props];
    let mut rewards = vec![0.0; spec.n_nodes * n_props];
    for &(from, prop, reward, to, line) in &spec.edges {
        let p = *prop_index
            .get(&prop)
            .ok_or_else(|| err(line, format!("proposition {prop:?} does not occur in the grid")))?;
        let slot = &mut delta[from * n_props + p];
        if slot.is_some() {
            return Err(err(line, format!("duplicate transition for node {} on {prop:?}", from + 1)));
        }
        *slot = Some(to);
        rewards[from * n_props + p] = reward;
    }
    let mut table = Vec::with_capacity(delta.len());
    for (idx, entry) in delta.into_iter().enumerate() {
        let (u, p) = (idx / n_props, idx % n_props);
        table.push(match (entry, spec.default_self_loop) {
            (Some(v), _) => v,
            (None, Some(r)) => {
                rewards[idx] = r;
                u
            }
            (None, None) => {
                return Err(err(
                    spec.line,
                    format!("transition function is partial: node {} on {:?} missing", u + 1, props[p]),
                ))
            }
        });
    }
    let labeling = layout.iter().flatten().map(|c| prop_index[c]).collect();
    Ok(LabeledRewardMachine::new(spec.n_nodes, n_props, table, labeling, Some(rewards))?
        .with_prop_names(props.iter().map(|c| c.to_string()).collect()))
}
