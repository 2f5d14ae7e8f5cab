use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use super::{DiscreteEnv, Obs};
use crate::error::{Error, Result};

/// Rectangular grid with walls. Actions: 0 up (+y), 1 down (-y), 2 left
/// (-x), 3 right (+x). Blocked moves stay in place and still cost 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    pub walls: BTreeSet<(usize, usize)>,
}

impl GridWorldSpec {
    pub fn open(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            walls: BTreeSet::new(),
        }
    }

    pub fn is_free(&self, cell: (usize, usize)) -> bool {
        cell.0 < self.width && cell.1 < self.height && !self.walls.contains(&cell)
    }
}

pub fn gridworld_step(
    spec: &GridWorldSpec,
    cell: (usize, usize),
    action: usize,
) -> Result<((usize, usize), f64)> {
    if !spec.is_free(cell) {
        return Err(Error::InvalidState(format!("cell {cell:?} is off-grid or a wall")));
    }
    let (x, y) = cell;
    let target = match action {
        0 => (x, y + 1),
        1 => (x, y.wrapping_sub(1)),
        2 => (x.wrapping_sub(1), y),
        3 => (x + 1, y),
        _ => {
            return Err(Error::InvalidAction {
                action: action as i64,
                num_actions: 4,
            })
        }
    };
    let next = if spec.is_free(target) { target } else { cell };
    Ok((next, -1.0))
}

/// Gridworld as a [`DiscreteEnv`]; free cells are indexed in row-major
/// order and observed as `(x / width, y / height, 0)`.
#[derive(Clone, Debug)]
pub struct GridWorld {
    spec: GridWorldSpec,
    cells: Vec<(usize, usize)>,
    index: BTreeMap<(usize, usize), usize>,
}

impl GridWorld {
    pub fn new(spec: GridWorldSpec) -> Result<Self> {
        if spec.width == 0 || spec.height == 0 {
            return Err(Error::OutOfRange(format!(
                "grid must be non-empty, got {}x{}",
                spec.width, spec.height
            )));
        }
        let cells: Vec<_> = (0..spec.height)
            .flat_map(|y| (0..spec.width).map(move |x| (x, y)))
            .filter(|&c| spec.is_free(c))
            .collect();
        let index = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Ok(Self { spec, cells, index })
    }

    pub fn open(width: usize, height: usize) -> Result<Self> {
        Self::new(GridWorldSpec::open(width, height))
    }

    pub fn spec(&self) -> &GridWorldSpec {
        &self.spec
    }

    pub fn cell(&self, state: usize) -> (usize, usize) {
        self.cells[state]
    }

    pub fn state_at(&self, cell: (usize, usize)) -> Option<usize> {
        self.index.get(&cell).copied()
    }
}

impl DiscreteEnv for GridWorld {
    fn id(&self) -> &'static str {
        "gridworld"
    }

    fn resolution(&self) -> usize {
        self.spec.width
    }

    fn num_states(&self) -> usize {
        self.cells.len()
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn step(&self, state: usize, action: usize) -> Result<usize> {
        let cell = *self
            .cells
            .get(state)
            .ok_or_else(|| Error::InvalidState(format!("gridworld state {state}")))?;
        let (next, _) = gridworld_step(&self.spec, cell, action)?;
        Ok(self.index[&next])
    }

    fn observe(&self, state: usize) -> Obs {
        let (x, y) = self.cells[state];
        [
            x as f32 / self.spec.width as f32,
            y as f32 / self.spec.height as f32,
            0.0,
        ]
    }

    fn state_of(&self, obs: &Obs) -> Option<usize> {
        if obs[2] != 0.0 {
            return None;
        }
        let x = (obs[0] * self.spec.width as f32).round();
        let y = (obs[1] * self.spec.height as f32).round();
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let s = self.state_at((x as usize, y as usize))?;
        (self.observe(s) == *obs).then_some(s)
    }

    fn grid_coords(&self, state: usize) -> (usize, usize) {
        let (x, y) = self.cells[state];
        (y, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moves_and_blocking() {
        let spec = GridWorldSpec::open(3, 3);
        assert_eq!(gridworld_step(&spec, (0, 0), 3).unwrap(), ((1, 0), -1.0));
        assert_eq!(gridworld_step(&spec, (0, 0), 2).unwrap(), ((0, 0), -1.0));
        let mut walled = spec.clone();
        walled.walls.insert((1, 0));
        assert_eq!(gridworld_step(&walled, (0, 0), 3).unwrap(), ((0, 0), -1.0));
        assert!(gridworld_step(&walled, (1, 0), 3).is_err());
        assert!(gridworld_step(&spec, (5, 0), 0).is_err());
        assert!(gridworld_step(&spec, (0, 0), 4).is_err());
    }

    #[test]
    fn env_indexing() {
        let mut spec = GridWorldSpec::open(4, 3);
        spec.walls.insert((1, 1));
        let env = GridWorld::new(spec).unwrap();
        assert_eq!(env.num_states(), 11);
        for s in 0..env.num_states() {
            assert_eq!(env.state_of(&env.observe(s)), Some(s));
        }
        let s = env.state_at((0, 1)).unwrap();
        assert_eq!(env.step(s, 3).unwrap(), s);
    }
}
