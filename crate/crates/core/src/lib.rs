//! Tabular robust constrained MDP optimization.
//!
//! The crate covers the finite model ([`mdp`]), exact evaluation on a fixed
//! kernel ([`eval`]), KL-robust evaluation ([`robust`]), the surrogate
//! objective ([`surrogate`]), the policy optimizers ([`optim`]), benchmark
//! environments ([`env`]) and the experiment harness ([`harness`]).

pub mod env;
pub mod error;
pub mod eval;
pub mod harness;
pub mod mdp;
pub mod optim;
pub mod policy;
pub mod rng;
pub mod robust;
pub mod surrogate;

pub use error::{Error, Result};
pub use mdp::{ChannelTransform, NativeSignal, Sense, TabularCMDP};
pub use policy::Policy;
pub use robust::{RobustEvaluation, RobustEvaluator, RobustSettings};
pub use surrogate::{surrogate, SurrogateState};
