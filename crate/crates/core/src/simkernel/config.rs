use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agentvm::EconomicsParams;
use crate::ledger::{genesis_address, Address, GasSchedule, Wei};
use crate::market::{BuyerProfile, KeeperProfile, MarketParams, Rational, Taste};
use crate::morphogen::{Genome, Rgb};

/// Current scenario document version.
pub const CONFIG_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("unsupported config format {found} (expected {expected})")]
    UnsupportedFormat { found: u32, expected: u32 },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Non-fatal findings; the run is still permitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigWarning {
    /// Keepers will never poke, so no agent ever replicates.
    UnprofitablePoke { poke_reward: Wei, gas_poke: Wei },
}

impl std::fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigWarning::UnprofitablePoke { poke_reward, gas_poke } => write!(
                f,
                "poke_reward ({poke_reward}) does not exceed gas_poke ({gas_poke}); keepers will never act and the economy stalls"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuyerSetup {
    #[serde(flatten)]
    pub profile: BuyerProfile,
    pub balance: Wei,
}

impl BuyerSetup {
    /// A size-loving buyer with a generous per-tick budget.
    pub fn with_defaults(address: Address, balance: Wei) -> Self {
        Self {
            profile: BuyerProfile {
                address,
                budget_per_tick: Wei(10_000),
                taste: Taste::size_only(),
                preferred_color: Rgb::BLACK,
                utility_threshold: Rational::from_integer(-100),
                sample_size: 5,
            },
            balance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeeperSetup {
    #[serde(flatten)]
    pub profile: KeeperProfile,
    pub balance: Wei,
}

impl KeeperSetup {
    pub fn with_defaults(address: Address, balance: Wei) -> Self {
        Self {
            profile: KeeperProfile {
                address,
                max_pokes_per_tick: 3,
            },
            balance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationSettings {
    /// Single-gene steps applied per replication.
    pub genes_per_replication: u32,
}

impl Default for MutationSettings {
    fn default() -> Self {
        Self {
            genes_per_replication: 1,
        }
    }
}

/// Settings used only when a world is served live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractiveSettings {
    /// Largest faucet grant a session may request.
    pub faucet_cap: Wei,
    /// Whether scripted buyers and keepers act on each tick.
    pub scripted_actors: bool,
    /// Advance one tick every this many milliseconds; operator-driven when absent.
    pub tick_interval_ms: Option<u64>,
}

impl Default for InteractiveSettings {
    fn default() -> Self {
        Self {
            faucet_cap: Wei(10_000),
            scripted_actors: true,
            tick_interval_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub format: u32,
    pub seed: u64,
    pub ticks: u64,
    pub economics: EconomicsParams,
    #[serde(default)]
    pub gas: GasSchedule,
    pub genesis_genome: Genome,
    pub genesis_balance: Wei,
    #[serde(default)]
    pub buyers: Vec<BuyerSetup>,
    #[serde(default)]
    pub keepers: Vec<KeeperSetup>,
    #[serde(default)]
    pub mutation: MutationSettings,
    #[serde(default)]
    pub market: MarketParams,
    #[serde(default)]
    pub interactive: InteractiveSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            format: CONFIG_FORMAT,
            seed: 0,
            ticks: 0,
            economics: EconomicsParams::default(),
            gas: GasSchedule::default(),
            genesis_genome: Genome::default(),
            genesis_balance: Wei(0),
            buyers: Vec::new(),
            keepers: Vec::new(),
            mutation: MutationSettings::default(),
            market: MarketParams::default(),
            interactive: InteractiveSettings::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let format = value
            .get("format")
            .and_then(|f| f.as_u64())
            .ok_or_else(|| ConfigError::Parse("missing integer `format` field".into()))?;
        if format != u64::from(CONFIG_FORMAT) {
            return Err(ConfigError::UnsupportedFormat {
                found: format.min(u64::from(u32::MAX)) as u32,
                expected: CONFIG_FORMAT,
            });
        }
        serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Canonical text: sorted keys, integers and rational strings only.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string_pretty(&value).expect("value serializes")
    }

    /// Checks the structural invariants and collects warnings.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>, ConfigError> {
        if self.format != CONFIG_FORMAT {
            return Err(ConfigError::UnsupportedFormat {
                found: self.format,
                expected: CONFIG_FORMAT,
            });
        }
        let mut seen = BTreeSet::from([Address::ZERO, genesis_address()]);
        let addresses = self
            .buyers
            .iter()
            .map(|b| b.profile.address)
            .chain(self.keepers.iter().map(|k| k.profile.address));
        for a in addresses {
            if !seen.insert(a) {
                return Err(ConfigError::Invalid(format!(
                    "address {a} is listed twice or collides with a reserved address"
                )));
            }
        }
        for b in &self.buyers {
            if b.profile.sample_size == 0 {
                return Err(ConfigError::Invalid(format!(
                    "buyer {} has sample_size 0",
                    b.profile.address
                )));
            }
        }
        for k in &self.keepers {
            if k.profile.max_pokes_per_tick == 0 {
                return Err(ConfigError::Invalid(format!(
                    "keeper {} has max_pokes_per_tick 0",
                    k.profile.address
                )));
            }
        }
        if self.mutation.genes_per_replication == 0 {
            return Err(ConfigError::Invalid(
                "mutation.genes_per_replication must be at least 1".into(),
            ));
        }
        let supply = self
            .buyers
            .iter()
            .map(|b| b.balance.0)
            .chain(self.keepers.iter().map(|k| k.balance.0))
            .try_fold(self.genesis_balance.0, u64::checked_add);
        if supply.is_none() {
            return Err(ConfigError::Invalid("initial balances overflow".into()));
        }
        if self.economics.checked_threshold().is_err() {
            return Err(ConfigError::Invalid("replication threshold overflows".into()));
        }
        let mut warnings = Vec::new();
        if self.economics.poke_reward <= self.gas.gas_poke {
            warnings.push(ConfigWarning::UnprofitablePoke {
                poke_reward: self.economics.poke_reward,
                gas_poke: self.gas.gas_poke,
            });
        }
        Ok(warnings)
    }
}
