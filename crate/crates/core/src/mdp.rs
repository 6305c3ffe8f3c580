//! Finite robust constrained MDP instances.
//!
//! Internally every signal is a cost in `[0, 1]` that is minimized, and every
//! constraint reads `J_n <= b_n`. Signals that arrive as rewards, or as
//! utilities with a lower bound, are mapped into that form when the model is
//! built and the affine map is kept so results can be reported natively.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-9;

/// Native optimization direction of a signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        }
    }
}

/// Per-step affine map from a native signal to the canonical cost:
/// `canonical = offset + scale * native`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelTransform {
    pub offset: f64,
    pub scale: f64,
}

impl ChannelTransform {
    pub const IDENTITY: ChannelTransform = ChannelTransform { offset: 0.0, scale: 1.0 };

    /// Fit the map for a channel. Values already inside `[0, 1]` are left
    /// alone when minimized and mapped to `1 - x` when maximized; anything
    /// wider is rescaled using its observed range.
    pub fn fit(values: &[f64], sense: Sense) -> Self {
        let lo = values.iter().copied().fold(0.0_f64, f64::min);
        let hi = values.iter().copied().fold(1.0_f64, f64::max);
        let width = hi - lo;
        match sense {
            // adding 0.0 turns a -0.0 offset into 0.0
            Sense::Minimize => ChannelTransform { offset: -lo / width + 0.0, scale: 1.0 / width },
            Sense::Maximize => ChannelTransform { offset: hi / width, scale: -1.0 / width },
        }
    }

    pub fn apply(&self, native: f64) -> f64 {
        self.offset + self.scale * native
    }

    /// Map a discounted value (sum over an effective horizon `h`) back.
    pub fn value_to_native(&self, canonical: f64, horizon: f64) -> f64 {
        (canonical - self.offset * horizon) / self.scale
    }

    pub fn value_to_canonical(&self, native: f64, horizon: f64) -> f64 {
        self.offset * horizon + self.scale * native
    }
}

/// One native signal as produced by an environment builder.
#[derive(Clone, Debug)]
pub struct NativeSignal {
    /// `[s][a]` table.
    pub values: DMatrix<f64>,
    pub sense: Sense,
}

/// A finite RCMDP in canonical (cost-minimizing) form.
///
/// `kernel` has one row per state-action pair, indexed `s * n_actions + a`,
/// and one column per successor state.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularCMDP {
    pub n_states: usize,
    pub n_actions: usize,
    pub kernel: DMatrix<f64>,
    /// `costs[0]` is the objective; `costs[1..]` are the constraints.
    pub costs: Vec<DMatrix<f64>>,
    /// Canonical thresholds `b_1..b_K`.
    pub thresholds: Vec<f64>,
    pub senses: Vec<Sense>,
    pub transforms: Vec<ChannelTransform>,
    pub discount: f64,
    pub initial_dist: DVector<f64>,
    /// Weight of the KL penalty in the regularized worst case.
    pub kl_radius: f64,
}

impl TabularCMDP {
    /// Build a model whose costs are already canonical.
    pub fn new(
        kernel: DMatrix<f64>,
        costs: Vec<DMatrix<f64>>,
        thresholds: Vec<f64>,
        discount: f64,
        initial_dist: DVector<f64>,
        kl_radius: f64,
    ) -> Result<Self> {
        let n_states = kernel.ncols();
        let n_actions = costs.first().map(|c| c.ncols()).unwrap_or(0);
        let k = costs.len();
        let model = TabularCMDP {
            n_states,
            n_actions,
            kernel,
            costs,
            thresholds,
            senses: vec![Sense::Minimize; k],
            transforms: vec![ChannelTransform::IDENTITY; k],
            discount,
            initial_dist,
            kl_radius,
        };
        model.validate()?;
        Ok(model)
    }

    /// Build from native signals and native thresholds, canonicalizing each
    /// channel. A maximized constraint reads `J_n >= b_n` natively.
    pub fn from_native(
        kernel: DMatrix<f64>,
        signals: Vec<NativeSignal>,
        native_thresholds: &[f64],
        discount: f64,
        initial_dist: DVector<f64>,
        kl_radius: f64,
    ) -> Result<Self> {
        if signals.is_empty() {
            return Err(Error::InvalidModel("at least the objective signal is required".into()));
        }
        if native_thresholds.len() + 1 != signals.len() {
            return Err(Error::InvalidModel(format!(
                "{} signals need {} thresholds, got {}",
                signals.len(),
                signals.len() - 1,
                native_thresholds.len()
            )));
        }
        let horizon = 1.0 / (1.0 - discount);
        let mut costs = Vec::with_capacity(signals.len());
        let mut senses = Vec::with_capacity(signals.len());
        let mut transforms = Vec::with_capacity(signals.len());
        for sig in &signals {
            let t = ChannelTransform::fit(sig.values.as_slice(), sig.sense);
            costs.push(sig.values.map(|x| t.apply(x).clamp(0.0, 1.0)));
            senses.push(sig.sense);
            transforms.push(t);
        }
        let thresholds = native_thresholds
            .iter()
            .enumerate()
            .map(|(n, &b)| transforms[n + 1].value_to_canonical(b, horizon))
            .collect();
        let model = TabularCMDP {
            n_states: kernel.ncols(),
            n_actions: signals[0].values.ncols(),
            kernel,
            costs,
            thresholds,
            senses,
            transforms,
            discount,
            initial_dist,
            kl_radius,
        };
        model.validate()?;
        Ok(model)
    }

    /// Number of constraints `K`.
    pub fn n_constraints(&self) -> usize {
        self.costs.len().saturating_sub(1)
    }

    /// Effective horizon `1 / (1 - gamma)`.
    pub fn horizon(&self) -> f64 {
        1.0 / (1.0 - self.discount)
    }

    #[inline]
    pub fn sa(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// Canonical value of signal `index` mapped back to its native sense.
    pub fn to_native(&self, index: usize, canonical: f64) -> f64 {
        self.transforms[index].value_to_native(canonical, self.horizon())
    }

    /// Native thresholds (`<=` for minimized, `>=` for maximized signals).
    pub fn native_thresholds(&self) -> Vec<f64> {
        self.thresholds
            .iter()
            .enumerate()
            .map(|(n, &b)| self.to_native(n + 1, b))
            .collect()
    }

    /// Check every structural invariant; the first violation is reported.
    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 || na == 0 {
            return Err(Error::InvalidModel("empty state or action space".into()));
        }
        if self.kernel.nrows() != ns * na || self.kernel.ncols() != ns {
            return Err(Error::InvalidModel(format!(
                "kernel is {}x{}, expected {}x{}",
                self.kernel.nrows(),
                self.kernel.ncols(),
                ns * na,
                ns
            )));
        }
        for s in 0..ns {
            for a in 0..na {
                let row = self.kernel.row(self.sa(s, a));
                if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "kernel[{s}][{a}] has negative or non-finite entry {p}"
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidModel(format!(
                        "kernel[{s}][{a}] row not stochastic (sums to {total})"
                    )));
                }
            }
        }
        if self.costs.is_empty() {
            return Err(Error::InvalidModel("no cost tensors".into()));
        }
        for (i, c) in self.costs.iter().enumerate() {
            if c.nrows() != ns || c.ncols() != na {
                return Err(Error::InvalidModel(format!(
                    "cost {i} is {}x{}, expected {ns}x{na}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            for s in 0..ns {
                for a in 0..na {
                    let v = c[(s, a)];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::InvalidModel(format!(
                            "cost out of range: costs[{i}][{s}][{a}] = {v}"
                        )));
                    }
                }
            }
        }
        if self.thresholds.len() != self.costs.len() - 1 {
            return Err(Error::InvalidModel(format!(
                "{} constraints but {} thresholds",
                self.costs.len() - 1,
                self.thresholds.len()
            )));
        }
        if let Some(b) = self.thresholds.iter().find(|b| !b.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite threshold {b}")));
        }
        if self.senses.len() != self.costs.len() || self.transforms.len() != self.costs.len() {
            return Err(Error::InvalidModel("sense/transform count differs from cost count".into()));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount {} outside (0, 1)",
                self.discount
            )));
        }
        if self.initial_dist.len() != ns {
            return Err(Error::InvalidModel(format!(
                "initial distribution has {} entries, expected {ns}",
                self.initial_dist.len()
            )));
        }
        if let Some(p) = self.initial_dist.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidModel(format!(
                "initial distribution has negative or non-finite entry {p}"
            )));
        }
        let total: f64 = self.initial_dist.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidModel(format!(
                "initial distribution not stochastic (sums to {total})"
            )));
        }
        if !(self.kl_radius >= 0.0) || !self.kl_radius.is_finite() {
            return Err(Error::InvalidModel(format!("kl_radius {} must be >= 0", self.kl_radius)));
        }
        Ok(())
    }
}
