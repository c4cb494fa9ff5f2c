//! Self-replicating, self-funding biomorph agents on a minimal account ledger.
//!
//! Agents are contract accounts that develop a branching phenotype from a
//! small integer genome, sell that phenotype as NFTs to externally owned
//! accounts, and clone themselves with a one-gene mutation when a keeper pokes
//! them and they can pay for it. Buyers' tastes therefore act as selection.
//!
//! * [`ledger`]: accounts, currency, gas, and the transaction dispatcher.
//! * [`agentvm`]: agent contract logic (sales, replication, token registry).
//! * [`morphogen`]: genomes, mutation, development, and SVG rendering.
//! * [`market`]: scripted buyers and keepers.
//! * [`simkernel`]: the tick loop, statistics, phylogeny, and snapshots.

pub mod agentvm;
pub mod ledger;
pub mod market;
pub mod morphogen;
pub mod rng;
pub mod scalar;
pub mod simkernel;

pub use agentvm::{AgentState, EconomicsParams, NftToken};
pub use ledger::{Address, Receipt, Transaction, Wei, WorldState};
pub use morphogen::{Drawing, Genome, SvgDocument};
pub use rng::RandomStream;
pub use scalar::Scalar;
pub use simkernel::{PhyloTree, RunStats, ScenarioConfig, Simulation};

/// Phenotype features in double precision, as used by the simulator.
pub type FeatureVector = market::FeatureVector<f64>;
/// Phenotype features in single precision.
pub type FeatureVector32 = market::FeatureVector<f32>;
