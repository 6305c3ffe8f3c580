//! Seeded builders for the benchmark environments.
//!
//! * `crs`: constrained river swim, 6 states and 2 actions.
//! * `garnet`: random MDP with softmax-normal kernels.
//! * `frozenlake`: slippery `d x d` grid with holes and random obstacles.
//! * `garbage`: `d x d` city grid with random blockages and garbage cells.
//!
//! Every builder returns a validated canonical model. The initial
//! distribution is a softmax of standard normal draws unless
//! `uniform_initial` is set.

mod crs;
pub mod format;
mod garnet;
mod grid;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularCMDP;
use crate::optim::ModelSource;
use crate::rng::{stream, Stream};

pub use crs::build_crs;
pub use garnet::build_garnet;
pub use grid::{build_frozenlake, build_garbage, grid_kernel, GridAction, GridLayout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvName {
    Crs,
    Garnet,
    Frozenlake,
    Garbage,
}

impl EnvName {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::Crs => "crs",
            EnvName::Garnet => "garnet",
            EnvName::Frozenlake => "frozenlake",
            EnvName::Garbage => "garbage",
        }
    }

    pub fn default_kl_radius(self) -> f64 {
        match self {
            EnvName::Crs => 0.1,
            EnvName::Garnet => 0.05,
            EnvName::Frozenlake | EnvName::Garbage => 0.02,
        }
    }

    /// Native thresholds: a cost ceiling for `crs`, `frozenlake` and
    /// `garbage`, a utility floor for `garnet`.
    pub fn default_thresholds(self) -> Vec<f64> {
        match self {
            EnvName::Crs => vec![42.5],
            EnvName::Garnet => vec![90.0],
            EnvName::Frozenlake | EnvName::Garbage => vec![52.5],
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crs" => Ok(EnvName::Crs),
            "garnet" => Ok(EnvName::Garnet),
            "frozenlake" => Ok(EnvName::Frozenlake),
            "garbage" => Ok(EnvName::Garbage),
            other => Err(Error::Config(format!("unknown environment {other:?}"))),
        }
    }
}

/// Environment description. Fields that do not apply to the chosen
/// environment are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSpec {
    pub name: EnvName,
    /// Garnet state count.
    pub n_states: usize,
    /// Garnet action count.
    pub n_actions: usize,
    /// Side of the grid worlds.
    pub grid_side: usize,
    /// Share of grid cells that are hazardous (obstacles or blockages).
    pub hazard_fraction: f64,
    /// Share of grid cells holding garbage.
    pub garbage_fraction: f64,
    pub seed: u64,
    pub gamma: f64,
    /// Defaults to the environment's own value.
    pub c_kl: Option<f64>,
    /// Native thresholds; defaults to the environment's own values.
    pub thresholds: Option<Vec<f64>>,
    pub uniform_initial: bool,
    /// Redraw grid hazards at every optimizer iteration instead of once per
    /// seed.
    pub resample_hazards: bool,
}

impl Default for EnvSpec {
    fn default() -> Self {
        EnvSpec {
            name: EnvName::Crs,
            n_states: 15,
            n_actions: 20,
            grid_side: 4,
            hazard_fraction: 0.4,
            garbage_fraction: 0.25,
            seed: 0,
            gamma: 0.99,
            c_kl: None,
            thresholds: None,
            uniform_initial: false,
            resample_hazards: false,
        }
    }
}

impl EnvSpec {
    pub fn named(name: EnvName) -> Self {
        EnvSpec { name, ..Default::default() }
    }

    pub fn kl_radius(&self) -> f64 {
        self.c_kl.unwrap_or_else(|| self.name.default_kl_radius())
    }

    pub fn native_thresholds(&self) -> Vec<f64> {
        self.thresholds.clone().unwrap_or_else(|| self.name.default_thresholds())
    }

    /// Range checks, with messages naming the offending field under `env.`.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("env.{field}: {msg}")));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma", format!("must lie in (0, 1), got {}", self.gamma));
        }
        let c_kl = self.kl_radius();
        if !(c_kl > 0.0 && c_kl.is_finite()) {
            return bad("c_kl", format!("must be > 0, got {c_kl}"));
        }
        if let Some(t) = &self.thresholds {
            if t.len() != 1 {
                return bad("thresholds", format!("{} has one constraint, got {} thresholds", self.name, t.len()));
            }
            if let Some(x) = t.iter().find(|x| !x.is_finite()) {
                return bad("thresholds", format!("non-finite value {x}"));
            }
        }
        match self.name {
            EnvName::Garnet => {
                if self.n_states == 0 {
                    return bad("n_states", "must be >= 1".into());
                }
                if self.n_actions == 0 {
                    return bad("n_actions", "must be >= 1".into());
                }
            }
            EnvName::Frozenlake | EnvName::Garbage => {
                if self.grid_side < 2 {
                    return bad("grid_side", format!("must be >= 2, got {}", self.grid_side));
                }
                if !(0.0..=1.0).contains(&self.hazard_fraction) {
                    return bad("hazard_fraction", format!("must lie in [0, 1], got {}", self.hazard_fraction));
                }
                if !(0.0..=1.0).contains(&self.garbage_fraction) {
                    return bad("garbage_fraction", format!("must lie in [0, 1], got {}", self.garbage_fraction));
                }
            }
            EnvName::Crs => {}
        }
        Ok(())
    }

    pub(crate) fn initial_dist(&self, n_states: usize) -> DVector<f64> {
        if self.uniform_initial {
            return DVector::from_element(n_states, 1.0 / n_states as f64);
        }
        let mut rng = stream(self.seed, Stream::InitialDist);
        let z: Vec<f64> = (0..n_states).map(|_| StandardNormal.sample(&mut rng)).collect();
        DVector::from_vec(softmax(&z))
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Build the model described by `spec`.
pub fn build(spec: &EnvSpec) -> Result<TabularCMDP> {
    spec.validate()?;
    match spec.name {
        EnvName::Crs => build_crs(spec),
        EnvName::Garnet => build_garnet(spec),
        EnvName::Frozenlake => build_frozenlake(spec),
        EnvName::Garbage => build_garbage(spec),
    }
}

/// A built environment, usable directly as an optimizer model source.
#[derive(Clone, Debug)]
pub struct Environment {
    pub spec: EnvSpec,
    /// Instance drawn from the seed's hazard stream.
    pub model: TabularCMDP,
}

impl Environment {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        let model = build(&spec)?;
        Ok(Environment { spec, model })
    }

    fn resamples(&self) -> bool {
        self.spec.resample_hazards && matches!(self.spec.name, EnvName::Frozenlake | EnvName::Garbage)
    }
}

impl ModelSource for Environment {
    fn model(&self, iteration: usize) -> Cow<'_, TabularCMDP> {
        if !self.resamples() {
            return Cow::Borrowed(&self.model);
        }
        let layout = GridLayout::resampled(&self.spec, iteration);
        let model = match self.spec.name {
            EnvName::Frozenlake => grid::frozenlake_from_layout(&self.spec, &layout),
            _ => grid::garbage_from_layout(&self.spec, &layout),
        };
        // the layout only moves hazards, so validation cannot fail here
        Cow::Owned(model.expect("resampled grid model"))
    }
}
