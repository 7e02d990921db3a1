//! Monte-Carlo tree search guided by the policy and value heads, with a
//! KL-regularized root policy and a think-time driven budget.

mod budget;
mod mcts;
mod policy;

use thiserror::Error;

pub use budget::{adaptive_budget, calibrate_c_time, kl_strength, mean_budget};
pub use mcts::{run_mcts, RootEntry, SearchParams, SearchResult};
pub use policy::{regularized_policy, total_variation, Regularized};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no legal moves at the root")]
    NoLegalMoves,
    #[error("bad search config: {0}")]
    Config(String),
}
