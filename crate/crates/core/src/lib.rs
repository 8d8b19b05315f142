//! Learning a small pool of context-tree experts from a corpus of symbol
//! sequences, and predicting novel sequences online with Weighted Majority.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: alphabets, encoded sequences, dataset files and splits.
//! - [`context_tree`]: sparse context trees with a depth-weighted norm.
//! - [`losses`]: multiclass log-loss, 0-1 loss and hindsight aggregates.
//! - [`online_wm`]: the Weighted Majority forecaster over a fixed pool.
//! - [`lex_train`]: alternating minimisation of the hindsight loss (LEX).
//! - [`baselines`]: mixture of Markov chains (EM) and the online PST.
//! - [`bench`]: synthetic data, online evaluation, learning curves, sweeps.

pub mod baselines;
pub mod bench;
pub mod context_tree;
pub mod corpus;
pub mod error;
pub mod lex_train;
pub mod losses;
pub mod online_wm;
pub(crate) mod rng;

pub use context_tree::{ContextTreeModel, PenaltyProfile};
pub use corpus::{Alphabet, Dataset, Sequence, Symbol};
pub use error::{Error, Result};
pub use lex_train::{ExpertPool, TrainConfig};
pub use online_wm::{WmMode, WmReport};
