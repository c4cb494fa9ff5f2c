//! Deterministic discrete-time driver.
//!
//! One tick is one round: every buyer acts in config order with its
//! transactions applied as soon as they are emitted, then every keeper does
//! the same, then statistics are sampled and the clock advances. A single
//! random stream seeded from the config feeds the buyers' sampling draws and
//! the mutation draws inside successful pokes, in exactly that order, so a
//! config determines the whole run bit for bit.

mod config;
mod phylo;
mod stats;

pub use config::{
    BuyerSetup, ConfigError, ConfigWarning, InteractiveSettings, KeeperSetup, MutationSettings,
    ScenarioConfig, CONFIG_FORMAT,
};
pub use phylo::{export_tree_dot, export_tree_newick, NodeStatus, PhyloError, PhyloNode, PhyloTree};
pub use stats::{RunStats, TickStats};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ledger::{
    apply_transaction, init_world, Address, LedgerError, Receipt, Transaction, TxError, Wei,
    WorldState,
};
use crate::market::{buyer_act, keeper_act};
use crate::morphogen::{phenotype_svg, SvgDocument};
use crate::rng::RandomStream;

/// Current snapshot document version.
pub const SNAPSHOT_VERSION: u32 = 1;

const HASH_FOOTER: &str = "sha256:";

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    ConfigInvalid(#[from] ConfigError),
    #[error("invalid initial world: {0}")]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("snapshot version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RngPosition {
    seed: u64,
    /// Decimal word position; kept as text because it is a 128-bit value.
    position: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SnapshotDoc {
    version: u32,
    config: ScenarioConfig,
    world: WorldState,
    tree: PhyloTree,
    stats: RunStats,
    rng: RngPosition,
}

/// A run in progress.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    world: WorldState,
    stats: RunStats,
    rng: RandomStream,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let world = init_world(&config)?;
        let rng = RandomStream::from_seed(config.seed);
        Ok(Self {
            config,
            world,
            stats: RunStats::default(),
            rng,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn tree(&self) -> PhyloTree {
        PhyloTree::from_world(&self.world)
    }

    pub fn tick(&self) -> u64 {
        self.world.tick
    }

    pub fn rng_position(&self) -> u128 {
        self.rng.position()
    }

    /// Advances one tick with the scripted buyers and keepers acting.
    pub fn step(&mut self) {
        self.advance(true);
    }

    /// Advances one tick; scripted actors only act when `with_actors` is set.
    pub fn advance(&mut self, with_actors: bool) {
        if with_actors {
            for buyer in &self.config.buyers {
                let txs = buyer_act::<f64>(&self.world, &buyer.profile, &self.config.market, &mut self.rng);
                for tx in txs {
                    // emitted transactions are affordable; a rejection would change nothing
                    let _ = apply_transaction(&mut self.world, &tx, &mut self.rng);
                }
            }
            for keeper in &self.config.keepers {
                for tx in keeper_act(&self.world, &keeper.profile) {
                    let _ = apply_transaction(&mut self.world, &tx, &mut self.rng);
                }
            }
        }
        self.stats.series.push(TickStats::sample(&self.world));
        self.world.tick += 1;
    }

    /// Steps until `tick` ticks have elapsed (no-op if already there).
    pub fn run_until(&mut self, tick: u64) {
        while self.world.tick < tick {
            self.step();
        }
    }

    /// Applies an externally submitted transaction at the current tick.
    pub fn submit(&mut self, mut tx: Transaction) -> Result<Receipt, TxError> {
        tx.tick = self.world.tick;
        apply_transaction(&mut self.world, &tx, &mut self.rng)
    }

    pub fn faucet(&mut self, to: Address, amount: Wei) -> Result<(), LedgerError> {
        self.world.faucet_account(to, amount)
    }

    pub fn into_parts(self) -> (WorldState, PhyloTree, RunStats) {
        let tree = PhyloTree::from_world(&self.world);
        (self.world, tree, self.stats)
    }

    /// Rendered phenotype of every agent, in birth order.
    pub fn agent_svgs(&self) -> Vec<(Address, SvgDocument)> {
        self.world
            .birth_order
            .iter()
            .map(|a| (*a, phenotype_svg(&self.world.agents[a].genome)))
            .collect()
    }

    /// Canonical versioned document with a content-hash footer.
    pub fn snapshot(&self) -> String {
        let doc = SnapshotDoc {
            version: SNAPSHOT_VERSION,
            config: self.config.clone(),
            world: self.world.clone(),
            tree: self.tree(),
            stats: self.stats.clone(),
            rng: RngPosition {
                seed: self.rng.seed(),
                position: self.rng.position().to_string(),
            },
        };
        let value = serde_json::to_value(&doc).expect("snapshot serializes");
        let mut body = serde_json::to_string_pretty(&value).expect("value serializes");
        body.push('\n');
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        format!("{body}{HASH_FOOTER}{digest}\n")
    }

    pub fn restore(document: &str) -> Result<Self, SnapshotError> {
        let corrupt = |m: &str| SnapshotError::CorruptSnapshot(m.to_owned());
        let trimmed = document
            .strip_suffix('\n')
            .ok_or_else(|| corrupt("missing trailing newline"))?;
        let split = trimmed
            .rfind('\n')
            .ok_or_else(|| corrupt("missing hash footer"))?;
        let (body, footer) = (&document[..split + 1], &trimmed[split + 1..]);
        let expected = footer
            .strip_prefix(HASH_FOOTER)
            .ok_or_else(|| corrupt("missing hash footer"))?;
        if hex::encode(Sha256::digest(body.as_bytes())) != expected {
            return Err(corrupt("content hash mismatch"));
        }
        let value: serde_json::Value =
            serde_json::from_str(body).map_err(|e| SnapshotError::CorruptSnapshot(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| corrupt("missing version"))?;
        if version != u64::from(SNAPSHOT_VERSION) {
            return Err(SnapshotError::VersionMismatch {
                found: version,
                expected: SNAPSHOT_VERSION,
            });
        }
        let doc: SnapshotDoc =
            serde_json::from_value(value).map_err(|e| SnapshotError::CorruptSnapshot(e.to_string()))?;
        let position: u128 = doc
            .rng
            .position
            .parse()
            .map_err(|_| corrupt("bad rng position"))?;
        if doc.tree != PhyloTree::from_world(&doc.world) {
            return Err(corrupt("tree does not match world"));
        }
        if doc.stats.len() as u64 != doc.world.tick {
            return Err(corrupt("stats length does not match tick"));
        }
        Ok(Self {
            config: doc.config,
            world: doc.world,
            stats: doc.stats,
            rng: RandomStream::resume(doc.rng.seed, position),
        })
    }

    /// Hash of the full snapshot document.
    pub fn snapshot_hash(&self) -> String {
        hex::encode(Sha256::digest(self.snapshot().as_bytes()))
    }
}

/// Runs `config.ticks` ticks from genesis.
pub fn run(config: ScenarioConfig) -> Result<(WorldState, PhyloTree, RunStats), SimError> {
    let ticks = config.ticks;
    let mut sim = Simulation::new(config)?;
    sim.run_until(ticks);
    Ok(sim.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::total_supply;

    fn small() -> ScenarioConfig {
        let mut c = ScenarioConfig {
            seed: 11,
            ticks: 40,
            genesis_balance: Wei(0),
            ..Default::default()
        };
        for i in 0..3 {
            c.buyers
                .push(BuyerSetup::with_defaults(Address::derive(b"buyer", i), Wei(1_000_000)));
        }
        c.keepers
            .push(KeeperSetup::with_defaults(Address::derive(b"keeper", 0), Wei(1_000)));
        c
    }

    #[test]
    fn zero_ticks_is_genesis() {
        let mut c = small();
        c.ticks = 0;
        let (w, tree, stats) = run(c.clone()).unwrap();
        assert_eq!(w, init_world(&c).unwrap());
        assert_eq!(tree.node_count(), 1);
        assert!(stats.is_empty());
    }

    #[test]
    fn no_buyers_no_growth() {
        let mut c = small();
        c.buyers.clear();
        c.ticks = 200;
        let (w, _, stats) = run(c).unwrap();
        assert_eq!(w.agents.len(), 1);
        assert!(stats.series.iter().all(|s| s.population == 1));
    }

    #[test]
    fn economy_grows_and_conserves() {
        let mut sim = Simulation::new(small()).unwrap();
        let supply = total_supply(sim.world());
        for _ in 0..40 {
            sim.step();
            assert_eq!(total_supply(sim.world()), supply);
        }
        assert!(sim.world().agents.len() > 1);
        assert_eq!(sim.stats().len(), 40);
        let pops: Vec<u64> = sim.stats().series.iter().map(|s| s.population).collect();
        assert!(pops.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn snapshot_round_trip_is_byte_stable() {
        let mut sim = Simulation::new(small()).unwrap();
        sim.run_until(15);
        let doc = sim.snapshot();
        let back = Simulation::restore(&doc).unwrap();
        assert_eq!(back.snapshot(), doc);
    }

    #[test]
    fn damaged_snapshots_are_rejected() {
        let sim = Simulation::new(small()).unwrap();
        let doc = sim.snapshot();
        assert!(matches!(
            Simulation::restore(&doc[..doc.len() / 2]),
            Err(SnapshotError::CorruptSnapshot(_))
        ));
        let tampered = doc.replacen("\"tick\": 0", "\"tick\": 1", 1);
        assert!(matches!(
            Simulation::restore(&tampered),
            Err(SnapshotError::CorruptSnapshot(_))
        ));
    }

    #[test]
    fn other_versions_are_refused() {
        let sim = Simulation::new(small()).unwrap();
        let doc = sim.snapshot();
        let split = doc.trim_end().rfind('\n').unwrap();
        let body = doc[..split + 1].replacen("\"version\": 1", "\"version\": 2", 1);
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        let forged = format!("{body}{HASH_FOOTER}{digest}\n");
        assert_eq!(
            Simulation::restore(&forged).unwrap_err(),
            SnapshotError::VersionMismatch { found: 2, expected: SNAPSHOT_VERSION }
        );
    }

    #[test]
    fn invalid_config_is_reported() {
        let mut c = small();
        c.buyers[1].profile.address = c.buyers[0].profile.address;
        assert!(matches!(Simulation::new(c), Err(SimError::ConfigInvalid(_))));
    }
}
