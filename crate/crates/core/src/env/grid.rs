//! Slippery grid worlds. Cell `(x, y)` is state `x * d + y`; the start is
//! `(0, 0)` and the goal `(d - 1, d - 1)`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{EnvName, EnvSpec};
use crate::error::Result;
use crate::mdp::{NativeSignal, Sense, TabularCMDP};
use crate::rng::{hazard_stream, stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAction {
    /// `x - 1`
    Up = 0,
    /// `x + 1`
    Down = 1,
    /// `y - 1`
    Left = 2,
    /// `y + 1`
    Right = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right];

    fn delta(self) -> (isize, isize) {
        match self {
            GridAction::Up => (-1, 0),
            GridAction::Down => (1, 0),
            GridAction::Left => (0, -1),
            GridAction::Right => (0, 1),
        }
    }
}

/// The intended move happens with probability 1/2 and each of the other
/// three moves with 1/6. Moves that would leave the grid keep the agent in
/// place, so a corner facing a wall stays with probability 2/3.
pub fn grid_kernel(d: usize) -> DMatrix<f64> {
    let ns = d * d;
    let mut kernel = DMatrix::zeros(ns * 4, ns);
    for x in 0..d {
        for y in 0..d {
            let s = x * d + y;
            for intended in GridAction::ALL {
                let row = s * 4 + intended as usize;
                for actual in GridAction::ALL {
                    let p = if actual == intended { 0.5 } else { 1.0 / 6.0 };
                    let (dx, dy) = actual.delta();
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    let next = if (0..d as isize).contains(&nx) && (0..d as isize).contains(&ny) {
                        nx as usize * d + ny as usize
                    } else {
                        s
                    };
                    kernel[(row, next)] += p;
                }
            }
        }
    }
    kernel
}

/// Cell roles of one grid instance (sorted state indices).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridLayout {
    pub side: usize,
    /// Obstacles (frozen lake) or blockages (garbage collector).
    pub hazards: Vec<usize>,
    /// Fixed holes of the frozen lake; the classic 4x4 map has four.
    pub holes: Vec<usize>,
    pub garbage: Vec<usize>,
}

const CLASSIC_HOLES: [(usize, usize); 4] = [(1, 1), (1, 3), (2, 3), (3, 0)];

fn pick<R: Rng>(rng: &mut R, mut candidates: Vec<usize>, count: usize) -> Vec<usize> {
    let count = count.min(candidates.len());
    let (chosen, _) = candidates.partial_shuffle(rng, count);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    chosen
}

impl GridLayout {
    /// Hazards are `round(fraction * d^2)` cells other than start and goal
    /// (fewer if not enough cells remain). Garbage cells are drawn the same
    /// way from the cells left over.
    fn draw<R1: Rng, R2: Rng>(spec: &EnvSpec, hazard_rng: &mut R1, garbage_rng: &mut R2) -> Self {
        let d = spec.grid_side;
        let cells = d * d;
        let goal = cells - 1;
        let free: Vec<usize> = (1..goal).collect();
        let n_hazards = (spec.hazard_fraction * cells as f64).round() as usize;
        let hazards = pick(hazard_rng, free.clone(), n_hazards);
        let (holes, garbage) = match spec.name {
            EnvName::Frozenlake if d == 4 => (CLASSIC_HOLES.iter().map(|(x, y)| x * d + y).collect(), vec![]),
            EnvName::Garbage => {
                let rest = free.into_iter().filter(|c| !hazards.contains(c)).collect();
                let n = (spec.garbage_fraction * cells as f64).round() as usize;
                (vec![], pick(garbage_rng, rest, n))
            }
            _ => (vec![], vec![]),
        };
        GridLayout { side: d, hazards, holes, garbage }
    }

    /// Layout fixed by the seed.
    pub fn seeded(spec: &EnvSpec) -> Self {
        Self::draw(spec, &mut stream(spec.seed, Stream::Hazards), &mut stream(spec.seed, Stream::Garbage))
    }

    /// Layout redrawn for one optimizer iteration.
    pub fn resampled(spec: &EnvSpec, iteration: usize) -> Self {
        Self::draw(spec, &mut hazard_stream(spec.seed, iteration), &mut stream(spec.seed, Stream::Garbage))
    }

    fn per_state(&self, f: impl Fn(usize) -> f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.side * self.side, 4, |s, _| f(s))
    }
}

fn grid_model(spec: &EnvSpec, reward: DMatrix<f64>, cost: DMatrix<f64>) -> Result<TabularCMDP> {
    let d = spec.grid_side;
    TabularCMDP::from_native(
        grid_kernel(d),
        vec![
            NativeSignal { values: reward, sense: Sense::Maximize },
            NativeSignal { values: cost, sense: Sense::Minimize },
        ],
        &spec.native_thresholds(),
        spec.gamma,
        spec.initial_dist(d * d),
        spec.kl_radius(),
    )
}

/// Per-state reward and cost: goal 1 / 0, obstacle 0.01 / 1, hole 0 / 0.3,
/// elsewhere 0.05 / 0. Obstacles take precedence over holes.
pub(crate) fn frozenlake_from_layout(spec: &EnvSpec, layout: &GridLayout) -> Result<TabularCMDP> {
    let goal = layout.side * layout.side - 1;
    let role = |s: usize| {
        if s == goal {
            (1.0, 0.0)
        } else if layout.hazards.contains(&s) {
            (0.01, 1.0)
        } else if layout.holes.contains(&s) {
            (0.0, 0.3)
        } else {
            (0.05, 0.0)
        }
    };
    grid_model(spec, layout.per_state(|s| role(s).0), layout.per_state(|s| role(s).1))
}

/// Per-state reward and cost: goal 1 / 0.01, garbage 0.01 / 0.01, blockage
/// 0.001 / 1, elsewhere 0.001 / 0.01.
pub(crate) fn garbage_from_layout(spec: &EnvSpec, layout: &GridLayout) -> Result<TabularCMDP> {
    let goal = layout.side * layout.side - 1;
    let role = |s: usize| {
        if s == goal {
            (1.0, 0.01)
        } else if layout.hazards.contains(&s) {
            (0.001, 1.0)
        } else if layout.garbage.contains(&s) {
            (0.01, 0.01)
        } else {
            (0.001, 0.01)
        }
    };
    grid_model(spec, layout.per_state(|s| role(s).0), layout.per_state(|s| role(s).1))
}

pub fn build_frozenlake(spec: &EnvSpec) -> Result<TabularCMDP> {
    frozenlake_from_layout(spec, &GridLayout::seeded(spec))
}

pub fn build_garbage(spec: &EnvSpec) -> Result<TabularCMDP> {
    garbage_from_layout(spec, &GridLayout::seeded(spec))
}
