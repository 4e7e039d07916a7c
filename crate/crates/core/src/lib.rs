//! Exact computation of genus-zero twisted Gromov–Witten correlators
//! with ψ and κ classes, and of their generating series.

pub mod correlators;
pub mod error;
pub mod gw;
pub mod potentials;
pub mod rational;
pub mod series;
pub mod target;
pub mod trees;
pub mod verify;

pub use error::{Error, Result};
pub use gw::{gw_potential_series, GwEngine};
pub use rational::Rational;
pub use series::{QSeries, Truncation, VarKind, VarRegistry, Variable};
pub use target::{Degree, TargetConfig, TargetModel};
pub use trees::{DecoratedTree, Decoration, TreeSum};
pub use correlators::{CorrelatorCombination, CorrelatorEngine, CorrelatorKey, MultiIndex};
pub use potentials::PotentialSpec;
