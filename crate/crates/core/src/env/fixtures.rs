use sha2::{Digest, Sha256};

use super::config::{build_ground_truth_rm, parse_fixture};
use super::grid::{build_grid_mdp, GridConfig};
use super::{LabeledRewardMachine, MdpModel};
use crate::{Error, Result};

const LINE3: &str = include_str!("../../fixtures/line3.rm");
const PICK_N_DROP: &str = include_str!("../../fixtures/pick_n_drop.rm");
const PATROL: &str = include_str!("../../fixtures/patrol.rm");
const PATROL_TETRIS: &str = include_str!("../../fixtures/patrol_tetris.rm");

pub const BUILTIN: &[&str] = &["line3", "pick_n_drop", "patrol", "patrol_tetris"];

/// A complete experiment world: MDP model, ground-truth machine and the text
/// it was built from.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub grid: GridConfig,
    pub mdp: MdpModel,
    pub machine: LabeledRewardMachine,
    pub source: String,
}

impl Fixture {
    pub fn from_text(text: &str) -> Result<Self> {
        let cfg = parse_fixture(text)?;
        let mdp = build_grid_mdp(&cfg.grid)?;
        let machine = build_ground_truth_rm(&cfg.machine, &cfg.grid.layout)?;
        Ok(Self { name: cfg.name, grid: cfg.grid, mdp, machine, source: text.to_string() })
    }

    pub fn lambda(&self) -> f64 {
        self.grid.lambda
    }

    /// Hex SHA-256 of the fixture text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.source.as_bytes()))
    }
}

pub fn builtin(name: &str) -> Result<Fixture> {
    let text = match name {
        "line3" => LINE3,
        "pick_n_drop" => PICK_N_DROP,
        "patrol" | "patrolABCD" => PATROL,
        "patrol_tetris" => PATROL_TETRIS,
        other => {
            return Err(Error::Usage(format!(
                "unknown fixture {other:?}; built-in fixtures: {}",
                BUILTIN.join(", ")
            )))
        }
    };
    Fixture::from_text(text)
}

pub fn line3() -> Fixture {
    builtin("line3").expect("bundled fixture")
}

pub fn pick_n_drop() -> Fixture {
    builtin("pick_n_drop").expect("bundled fixture")
}

pub fn patrol_abcd() -> Fixture {
    builtin("patrol").expect("bundled fixture")
}

pub fn patrol_tetris() -> Fixture {
    builtin("patrol_tetris").expect("bundled fixture")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::LabeledModel;

    #[test]
    fn all_builtins_load() {
        for name in BUILTIN {
            let fx = builtin(name).unwrap();
            assert_eq!(fx.machine.label(0), 0);
            assert_eq!(fx.machine.n_states(), fx.mdp.n_states());
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn line3_shape() {
        let fx = line3();
        assert_eq!(fx.mdp.n_actions(), 2);
        assert_eq!(fx.machine.delta(), &[0, 1, 1, 1]);
        assert_eq!(fx.machine.labeling(), &[0, 0, 1]);
    }

    #[test]
    fn patrol_cycles_through_rooms() {
        let fx = patrol_abcd();
        let m = &fx.machine;
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.n_props(), 4);
        // rooms in visiting order: A (cell 0), B (cell 2), C (cell 10), D (cell 8)
        let rooms = [0, 2, 10, 8];
        let mut u = 0;
        for (k, &cell) in rooms.iter().enumerate() {
            let next = m.advance(u, cell);
            assert_eq!(next, (k + 1) % 4);
            // other rooms leave the node unchanged
            for &other in rooms.iter().filter(|&&c| c != cell) {
                assert_eq!(m.advance(u, other), u);
            }
            u = next;
        }
    }
}
