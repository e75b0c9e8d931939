use super::MdpModel;
use crate::{Error, Result};

/// Which moves the agent has on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moves {
    /// north, east, south, west
    Cardinal,
    /// left, right (slips go up or down)
    Horizontal,
}

impl Moves {
    fn directions(self) -> &'static [(isize, isize, &'static str)] {
        match self {
            Moves::Cardinal => &[(-1, 0, "north"), (0, 1, "east"), (1, 0, "south"), (0, -1, "west")],
            Moves::Horizontal => &[(0, -1, "left"), (0, 1, "right")],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// One character per cell; the character is the ground-truth proposition.
    pub layout: Vec<Vec<char>>,
    pub slip_prob: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Row-major cell indices with uniform initial mass.
    pub initial_cells: Vec<usize>,
    pub moves: Moves,
}

impl GridConfig {
    pub fn rows(&self) -> usize {
        self.layout.len()
    }

    pub fn cols(&self) -> usize {
        self.layout.first().map_or(0, Vec::len)
    }

    pub fn n_cells(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn cell_char(&self, cell: usize) -> char {
        self.layout[cell / self.cols()][cell % self.cols()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.layout.is_empty() || self.layout[0].is_empty() {
            return Err(Error::InvalidModel("grid layout is empty".into()));
        }
        let cols = self.cols();
        if let Some(r) = self.layout.iter().position(|row| row.len() != cols) {
            return Err(Error::InvalidModel(format!(
                "grid layout is not rectangular: row {} has {} cells, expected {cols}",
                r + 1,
                self.layout[r].len()
            )));
        }
        if !(0.0..1.0).contains(&self.slip_prob) {
            return Err(Error::InvalidModel(format!("slip probability {} not in [0,1)", self.slip_prob)));
        }
        if self.initial_cells.is_empty() {
            return Err(Error::InvalidModel("no initial cells".into()));
        }
        if let Some(&c) = self.initial_cells.iter().find(|&&c| c >= self.n_cells()) {
            return Err(Error::InvalidModel(format!("initial cell {} outside the grid", c + 1)));
        }
        Ok(())
    }
}

/// Grid world MDP: one state per cell (row-major). The intended move succeeds
/// with probability `1 - slip`; each perpendicular neighbor gets `slip / 2`.
/// Moves that leave the grid keep the agent in place.
pub fn build_grid_mdp(config: &GridConfig) -> Result<MdpModel> {
    config.validate()?;
    let (rows, cols) = (config.rows() as isize, config.cols() as isize);
    let n = config.n_cells();
    let dirs = config.moves.directions();
    let target = |cell: usize, (dr, dc): (isize, isize)| -> usize {
        let (r, c) = ((cell / cols as usize) as isize + dr, (cell % cols as usize) as isize + dc);
        if (0..rows).contains(&r) && (0..cols).contains(&c) {
            (r * cols + c) as usize
        } else {
            cell
        }
    };
    let mut kernel = Vec::with_capacity(n * dirs.len());
    for cell in 0..n {
        for &(dr, dc, _) in dirs {
            let mut row = vec![0.0; n];
            row[target(cell, (dr, dc))] += 1.0 - config.slip_prob;
            if config.slip_prob > 0.0 {
                // perpendicular neighbors
                for lateral in [(dc, dr), (-dc, -dr)] {
                    row[target(cell, lateral)] += config.slip_prob / 2.0;
                }
            }
            kernel.push(row);
        }
    }
    let mut initial = vec![0.0; n];
    let mass = 1.0 / config.initial_cells.len() as f64;
    for &c in &config.initial_cells {
        initial[c] = mass;
    }
    Ok(MdpModel::new(n, dirs.len(), kernel, initial, config.gamma)?
        .with_action_names(dirs.iter().map(|d| d.2.to_string()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[&str], slip: f64) -> GridConfig {
        GridConfig {
            layout: rows.iter().map(|r| r.chars().collect()).collect(),
            slip_prob: slip,
            gamma: 0.95,
            lambda: 0.1,
            initial_cells: vec![0],
            moves: Moves::Cardinal,
        }
    }

    #[test]
    fn zero_slip_is_deterministic() {
        let mdp = build_grid_mdp(&grid(&["....", "....", "....", "...."], 0.0)).unwrap();
        assert_eq!(mdp.n_states(), 16);
        for s in 0..16 {
            for a in 0..4 {
                let row = mdp.row(s, a);
                assert_eq!(row.iter().filter(|&&p| p == 1.0).count(), 1);
                assert_eq!(row.iter().filter(|&&p| p == 0.0).count(), 15);
            }
        }
    }

    #[test]
    fn boundary_clamps() {
        let mdp = build_grid_mdp(&grid(&["..."], 0.0)).unwrap();
        // action east at the third cell
        assert_eq!(mdp.prob(2, 1, 2), 1.0);
    }

    #[test]
    fn slip_row_interior() {
        let mdp = build_grid_mdp(&grid(&["....", "....", "....", "...."], 0.1)).unwrap();
        // cell (1,1) = 5, north is cell 1, east 6, west 4
        let row = mdp.row(5, 0);
        let mut expected = vec![0.0; 16];
        expected[1] = 0.9;
        expected[6] = 0.05;
        expected[4] = 0.05;
        for (p, e) in row.iter().zip(&expected) {
            assert!((p - e).abs() < 1e-12);
        }
        // corner 0, north: intended off-grid (0.9 stay), east 0.05, west off-grid (0.05 stay)
        let row = mdp.row(0, 0);
        assert!((row[0] - 0.95).abs() < 1e-12 && (row[1] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn rejects_ragged_layout_and_empty_start() {
        assert!(build_grid_mdp(&grid(&["...", ".."], 0.1)).is_err());
        let mut g = grid(&["..."], 0.1);
        g.initial_cells.clear();
        assert!(build_grid_mdp(&g).is_err());
        let g = grid(&["..."], 1.0);
        assert!(build_grid_mdp(&g).is_err());
    }
}
