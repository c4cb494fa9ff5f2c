//! Minimal account-model ledger.
//!
//! Two account kinds (externally owned accounts and agent contracts), one
//! integer currency, flat per-call gas fees paid into a validator sink, and a
//! single entry point, [`apply_transaction`], through which every state change
//! flows. Only EOAs originate transactions.
//!
//! Conservation is exact: gas is moved to the sink, never burned, so the sum
//! of all balances only changes through faucet issuance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agentvm::{self, AgentState, EconomicsParams, LogicRef, NftToken};
use crate::morphogen::Genome;
use crate::rng::RandomStream;
use crate::simkernel::ScenarioConfig;

/// 20-byte account identifier, rendered as `0x` + 40 lowercase hex digits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0; 20]);

    /// Deterministic address from a domain tag and an index.
    pub fn derive(tag: &[u8], index: u64) -> Address {
        let mut h = Sha256::new();
        h.update(tag);
        h.update(index.to_be_bytes());
        let digest = h.finalize();
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[12..32]);
        Address(out)
    }

    /// First 8 hex digits, without the prefix.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid address {0:?}: expected 0x followed by 40 hex digits")]
pub struct AddressParseError(pub String);

impl FromStr for Address {
    type Err = AddressParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("0x")
            .filter(|d| d.len() == 40)
            .ok_or_else(|| AddressParseError(s.to_owned()))?;
        let mut out = [0u8; 20];
        hex::decode_to_slice(digits.to_ascii_lowercase(), &mut out)
            .map_err(|_| AddressParseError(s.to_owned()))?;
        Ok(Address(out))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Integer currency amount. All arithmetic is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Wei(pub u64);

impl Wei {
    pub const ZERO: Wei = Wei(0);

    pub fn checked_add(self, rhs: Wei) -> Result<Wei, ErrorCode> {
        self.0.checked_add(rhs.0).map(Wei).ok_or(ErrorCode::Overflow)
    }

    pub fn checked_sub(self, rhs: Wei) -> Result<Wei, ErrorCode> {
        self.0.checked_sub(rhs.0).map(Wei).ok_or(ErrorCode::InsufficientFunds)
    }

    pub fn checked_mul(self, rhs: u64) -> Result<Wei, ErrorCode> {
        self.0.checked_mul(rhs).map(Wei).ok_or(ErrorCode::Overflow)
    }
}

impl fmt::Display for Wei {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::iter::Sum for Wei {
    fn sum<I: Iterator<Item = Wei>>(iter: I) -> Wei {
        Wei(iter.map(|w| w.0).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccountKind {
    Eoa,
    AgentContract,
    /// Receives every gas fee; never originates transactions.
    ValidatorSink,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub address: Address,
    pub kind: AccountKind,
    pub balance: Wei,
    /// Transactions originated (EOA) or children deployed (agent).
    pub nonce: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Call {
    BuyNft,
    Poke,
    Transfer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub origin: Address,
    pub target: Address,
    pub value: Wei,
    pub call: Call,
    pub tick: u64,
}

/// Flat per-call fees charged to the originating EOA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub gas_buy: Wei,
    pub gas_poke: Wei,
    pub gas_transfer: Wei,
}

impl Default for GasSchedule {
    fn default() -> Self {
        Self {
            gas_buy: Wei(5),
            gas_poke: Wei(7),
            gas_transfer: Wei(1),
        }
    }
}

impl GasSchedule {
    pub fn fee(&self, call: Call) -> Wei {
        match call {
            Call::BuyNft => self.gas_buy,
            Call::Poke => self.gas_poke,
            Call::Transfer => self.gas_transfer,
        }
    }
}

/// Failure of a dispatched call, reported in [`Receipt::status`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Error)]
pub enum ErrorCode {
    #[error("InsufficientFunds")]
    InsufficientFunds,
    #[error("UnknownAgent")]
    UnknownAgent,
    #[error("UnknownAccount")]
    UnknownAccount,
    #[error("UnknownToken")]
    UnknownToken,
    #[error("PriceTooLow")]
    PriceTooLow,
    #[error("InsufficientEnergy")]
    InsufficientEnergy,
    #[error("NonPayable")]
    NonPayable,
    #[error("AddressCollision")]
    AddressCollision,
    #[error("Overflow")]
    Overflow,
}

/// Rejections that happen before any gas is charged: nothing changes at all.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("unknown origin {0}")]
    UnknownOrigin(Address),
    #[error("origin {0} is not an externally owned account")]
    OriginNotEoa(Address),
    #[error("origin balance {balance} cannot cover gas fee {fee}")]
    InsufficientGasFunds { balance: Wei, fee: Wei },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("address {0} listed more than once")]
    DuplicateAddress(Address),
    #[error("initial supply overflows")]
    SupplyOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "error")]
pub enum Status {
    Ok,
    Err(ErrorCode),
}

impl Status {
    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Event {
    Sold {
        token_id: u64,
        agent: Address,
        buyer: Address,
        price: Wei,
    },
    Replicated {
        child: Address,
        parent: Address,
    },
    RewardPaid {
        keeper: Address,
        amount: Wei,
    },
    /// New currency issued to a human participant; the only sanctioned supply change.
    Faucet {
        to: Address,
        amount: Wei,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    #[serde(flatten)]
    pub status: Status,
    pub gas_charged: Wei,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Transaction {
        origin: Address,
        target: Address,
        call: Call,
        value: Wei,
        gas_charged: Wei,
        #[serde(flatten)]
        status: Status,
    },
    Event {
        event: Event,
    },
}

/// One entry of the world-level audit log. `seq` is dense and starts at 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub tick: u64,
    #[serde(flatten)]
    pub entry: LogEntry,
}

/// Full ledger state: the unit of determinism and snapshotting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    #[serde(with = "keyed_list")]
    pub accounts: BTreeMap<Address, Account>,
    #[serde(with = "keyed_list")]
    pub agents: BTreeMap<Address, AgentState>,
    /// Agent addresses in creation order.
    pub birth_order: Vec<Address>,
    /// Indexed by token id.
    pub tokens: Vec<NftToken>,
    pub log: Vec<LogRecord>,
    pub gas: GasSchedule,
    pub economics: EconomicsParams,
    pub mutation_steps: u32,
    pub logic_ref: LogicRef,
    pub sink: Address,
    pub initial_supply: Wei,
    pub faucet_issued: Wei,
}

/// Serializes an address-keyed map as a list of its values (sorted by address).
mod keyed_list {
    use super::*;

    pub trait Keyed {
        fn key(&self) -> Address;
    }

    impl Keyed for Account {
        fn key(&self) -> Address {
            self.address
        }
    }

    impl Keyed for AgentState {
        fn key(&self) -> Address {
            self.address
        }
    }

    pub fn serialize<S: Serializer, T: Serialize>(
        map: &BTreeMap<Address, T>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.values())
    }

    pub fn deserialize<'de, D, T>(d: D) -> Result<BTreeMap<Address, T>, D::Error>
    where
        D: Deserializer<'de>,
        T: Deserialize<'de> + Keyed,
    {
        let items = Vec::<T>::deserialize(d)?;
        let mut map = BTreeMap::new();
        for item in items {
            let k = item.key();
            if map.insert(k, item).is_some() {
                return Err(serde::de::Error::custom(format!("duplicate address {k}")));
            }
        }
        Ok(map)
    }
}

/// Address of the genesis agent; fixed so replays agree.
pub fn genesis_address() -> Address {
    Address::derive(b"evochain/genesis", 0)
}

/// Builds the initial world: validator sink, funded EOAs and the genesis agent.
pub fn init_world(config: &ScenarioConfig) -> Result<WorldState, LedgerError> {
    let sink = Address::ZERO;
    let genesis = genesis_address();
    let mut accounts = BTreeMap::new();
    let mut add = |address: Address, kind: AccountKind, balance: Wei| {
        let account = Account {
            address,
            kind,
            balance,
            nonce: 0,
        };
        match accounts.insert(address, account) {
            Some(_) => Err(LedgerError::DuplicateAddress(address)),
            None => Ok(()),
        }
    };
    add(sink, AccountKind::ValidatorSink, Wei::ZERO)?;
    add(genesis, AccountKind::AgentContract, config.genesis_balance)?;
    for b in &config.buyers {
        add(b.profile.address, AccountKind::Eoa, b.balance)?;
    }
    for k in &config.keepers {
        add(k.profile.address, AccountKind::Eoa, k.balance)?;
    }
    let initial_supply = accounts
        .values()
        .try_fold(Wei::ZERO, |acc, a| acc.checked_add(a.balance))
        .map_err(|_| LedgerError::SupplyOverflow)?;

    let logic_ref = LogicRef(1);
    let mut agents = BTreeMap::new();
    agents.insert(
        genesis,
        AgentState::genesis(genesis, config.genesis_genome, logic_ref),
    );

    Ok(WorldState {
        tick: 0,
        accounts,
        agents,
        birth_order: vec![genesis],
        tokens: Vec::new(),
        log: Vec::new(),
        gas: config.gas,
        economics: config.economics,
        mutation_steps: config.mutation.genes_per_replication,
        logic_ref,
        sink,
        initial_supply,
        faucet_issued: Wei::ZERO,
    })
}

/// Sum of all account balances.
pub fn total_supply(world: &WorldState) -> Wei {
    world.accounts.values().map(|a| a.balance).sum()
}

impl WorldState {
    pub fn account(&self, address: &Address) -> Option<&Account> {
        self.accounts.get(address)
    }

    pub fn balance(&self, address: &Address) -> Wei {
        self.accounts.get(address).map(|a| a.balance).unwrap_or_default()
    }

    pub fn agent(&self, address: &Address) -> Option<&AgentState> {
        self.agents.get(address)
    }

    /// Supply the world should hold: initial funding plus all faucet issuance.
    pub fn expected_supply(&self) -> Wei {
        Wei(self.initial_supply.0 + self.faucet_issued.0)
    }

    pub fn genesis_genome(&self) -> Option<Genome> {
        self.birth_order
            .first()
            .and_then(|a| self.agents.get(a))
            .map(|a| a.genome)
    }

    /// Canonical byte-stable JSON (sorted keys, integers only).
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("world serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// Lowercase hex SHA-256 of [`WorldState::canonical_json`].
    pub fn state_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Opens a new EOA funded by the faucet, recording the issuance.
    pub fn faucet_account(&mut self, address: Address, amount: Wei) -> Result<(), LedgerError> {
        if self.accounts.contains_key(&address) {
            return Err(LedgerError::DuplicateAddress(address));
        }
        let issued = self
            .faucet_issued
            .checked_add(amount)
            .and_then(|f| self.initial_supply.checked_add(f).map(|_| f))
            .map_err(|_| LedgerError::SupplyOverflow)?;
        self.accounts.insert(
            address,
            Account {
                address,
                kind: AccountKind::Eoa,
                balance: amount,
                nonce: 0,
            },
        );
        self.faucet_issued = issued;
        self.push_log(LogEntry::Event {
            event: Event::Faucet { to: address, amount },
        });
        Ok(())
    }

    pub(crate) fn push_log(&mut self, entry: LogEntry) {
        let seq = self.log.len() as u64;
        self.log.push(LogRecord {
            seq,
            tick: self.tick,
            entry,
        });
    }

    /// Sets several balances at once after every new value has been computed.
    pub(crate) fn commit_balances(&mut self, updates: &[(Address, Wei)]) {
        for (addr, balance) in updates {
            self.accounts
                .get_mut(addr)
                .expect("balance update targets a validated account")
                .balance = *balance;
        }
    }

    /// Log records with `seq >= since`, at most `limit` of them.
    pub fn events_since(&self, since: u64, limit: usize) -> &[LogRecord] {
        let start = (since as usize).min(self.log.len());
        let end = start.saturating_add(limit).min(self.log.len());
        &self.log[start..end]
    }
}

/// Applies one EOA-originated transaction.
///
/// `Err` means the transaction was rejected outright and nothing changed.
/// Otherwise gas has been charged and the origin nonce bumped; a failing call
/// reports its code in the receipt and leaves everything else untouched.
pub fn apply_transaction(
    world: &mut WorldState,
    tx: &Transaction,
    rng: &mut RandomStream,
) -> Result<Receipt, TxError> {
    let origin = world
        .accounts
        .get(&tx.origin)
        .ok_or(TxError::UnknownOrigin(tx.origin))?;
    if origin.kind != AccountKind::Eoa {
        return Err(TxError::OriginNotEoa(tx.origin));
    }
    let fee = world.gas.fee(tx.call);
    let origin_after_gas = origin
        .balance
        .checked_sub(fee)
        .map_err(|_| TxError::InsufficientGasFunds {
            balance: origin.balance,
            fee,
        })?;
    let sink_after_gas = world.balance(&world.sink).0 + fee.0;

    let sink = world.sink;
    world.commit_balances(&[(tx.origin, origin_after_gas), (sink, Wei(sink_after_gas))]);
    world
        .accounts
        .get_mut(&tx.origin)
        .expect("origin checked above")
        .nonce += 1;

    let outcome = match tx.call {
        Call::BuyNft => agentvm::buy_nft(world, tx.origin, tx.target, tx.value),
        Call::Poke => {
            if tx.value != Wei::ZERO {
                Err(ErrorCode::NonPayable)
            } else {
                agentvm::poke(world, tx.origin, tx.target, rng)
            }
        }
        Call::Transfer => transfer(world, tx.origin, tx.target, tx.value),
    };
    let (status, events) = match outcome {
        Ok(events) => (Status::Ok, events),
        Err(code) => (Status::Err(code), Vec::new()),
    };
    world.push_log(LogEntry::Transaction {
        origin: tx.origin,
        target: tx.target,
        call: tx.call,
        value: tx.value,
        gas_charged: fee,
        status,
    });
    for event in &events {
        world.push_log(LogEntry::Event {
            event: event.clone(),
        });
    }
    Ok(Receipt {
        status,
        gas_charged: fee,
        events,
    })
}

fn transfer(
    world: &mut WorldState,
    from: Address,
    to: Address,
    value: Wei,
) -> Result<Vec<Event>, ErrorCode> {
    let target = world.accounts.get(&to).ok_or(ErrorCode::UnknownAccount)?;
    if from == to {
        // self-transfer: only the affordability check applies
        world.balance(&from).checked_sub(value)?;
        return Ok(Vec::new());
    }
    let from_after = world.balance(&from).checked_sub(value)?;
    let to_after = target.balance.checked_add(value)?;
    world.commit_balances(&[(from, from_after), (to, to_after)]);
    Ok(Vec::new())
}
