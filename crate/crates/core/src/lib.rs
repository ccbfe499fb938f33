//! Match-network simulation, block-model inference and wage-gap decomposition.

pub mod cli;
pub mod decomp;
pub mod error;
pub mod ingest;
pub mod math;
pub mod network;
pub mod roygen;
pub mod sbm;

pub use error::{Error, Result};
pub use network::{
    block_stats, update_stats_on_move, BlockStats, Edge, Group, MatchNetwork, Node, Partition,
};
