//! Agent contract semantics.
//!
//! Every agent is a minimal proxy: its own storage (genome, lineage, balance)
//! plus a reference to the one shared logic contract. The logic implements
//! price-gated NFT sales and the withdraw-pattern `poke`, which pays the
//! calling keeper and clones the agent with a mutated genome once the agent
//! holds enough currency.
//!
//! Calls validate everything first and write only once every new value is
//! known, so a failing call leaves the world untouched.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ledger::{
    Account, AccountKind, Address, ErrorCode, Event, WorldState, Wei,
};
use crate::morphogen::{self, Genome};
use crate::rng::RandomStream;

/// Identifier of the shared logic contract every proxy delegates to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogicRef(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub address: Address,
    pub genome: Genome,
    pub parent: Option<Address>,
    pub generation: u32,
    pub born_at: u64,
    pub children: Vec<Address>,
    pub logic_ref: LogicRef,
    pub nfts_sold: u64,
    pub income: Wei,
    /// Phenotype content hash, filled in at the first sale.
    pub svg_hash: Option<String>,
}

impl AgentState {
    pub fn genesis(address: Address, genome: Genome, logic_ref: LogicRef) -> Self {
        Self {
            address,
            genome,
            parent: None,
            generation: 0,
            born_at: 0,
            children: Vec::new(),
            logic_ref,
            nfts_sold: 0,
            income: Wei::ZERO,
            svg_hash: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NftToken {
    pub token_id: u64,
    pub minter: Address,
    pub owner: Address,
    pub genome_snapshot: Genome,
    /// Hex SHA-256 of `render_svg(develop(genome_snapshot))`.
    pub svg_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconomicsParams {
    pub base_price: Wei,
    pub poke_reward: Wei,
    pub child_endowment: Wei,
    pub gas_clone: Wei,
}

impl Default for EconomicsParams {
    fn default() -> Self {
        Self {
            base_price: Wei(100),
            poke_reward: Wei(10),
            child_endowment: Wei(0),
            gas_clone: Wei(50),
        }
    }
}

impl EconomicsParams {
    /// Minimum balance at which a poke replicates: clone gas + keeper reward + endowment.
    pub fn replication_threshold(&self) -> Wei {
        Wei(self.gas_clone.0 + self.poke_reward.0 + self.child_endowment.0)
    }

    pub fn checked_threshold(&self) -> Result<Wei, ErrorCode> {
        self.gas_clone
            .checked_add(self.poke_reward)?
            .checked_add(self.child_endowment)
    }
}

/// `base_price * (1 + price_gene)`.
pub fn agent_price(agent: &AgentState, econ: &EconomicsParams) -> Wei {
    price_for(&agent.genome, econ)
}

pub fn price_for(genome: &Genome, econ: &EconomicsParams) -> Wei {
    Wei(econ.base_price.0 * (1 + u64::from(genome.price_gene())))
}

/// Deterministic creation address for the `nonce`-th child of `parent`.
pub fn derive_child_address(parent: &Address, nonce: u64) -> Address {
    let mut h = Sha256::new();
    h.update(parent.0);
    h.update(nonce.to_be_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 20];
    out.copy_from_slice(&digest[12..32]);
    Address(out)
}

/// Sells a freshly minted token to `buyer` if `value` covers the agent's price.
///
/// The whole attached value goes to the agent; there is no change.
pub fn buy_nft(
    world: &mut WorldState,
    buyer: Address,
    agent: Address,
    value: Wei,
) -> Result<Vec<Event>, ErrorCode> {
    let state = world.agents.get(&agent).ok_or(ErrorCode::UnknownAgent)?;
    let price = agent_price(state, &world.economics);
    let genome = state.genome;
    let buyer_after = world.balance(&buyer).checked_sub(value)?;
    if value < price {
        return Err(ErrorCode::PriceTooLow);
    }
    let agent_after = world.balance(&agent).checked_add(value)?;
    let income_after = state.income.checked_add(value)?;

    let token_id = world.tokens.len() as u64;
    world.commit_balances(&[(buyer, buyer_after), (agent, agent_after)]);
    let state = world.agents.get_mut(&agent).expect("agent checked above");
    state.nfts_sold += 1;
    state.income = income_after;
    let svg_hash = state
        .svg_hash
        .get_or_insert_with(|| morphogen::phenotype_svg(&genome).content_hash())
        .clone();
    world.tokens.push(NftToken {
        token_id,
        minter: agent,
        owner: buyer,
        genome_snapshot: genome,
        svg_hash,
    });
    Ok(vec![Event::Sold {
        token_id,
        agent,
        buyer,
        price: value,
    }])
}

/// Withdraw-pattern trigger: replicate once if the agent can pay for it.
pub fn poke(
    world: &mut WorldState,
    keeper: Address,
    agent: Address,
    rng: &mut RandomStream,
) -> Result<Vec<Event>, ErrorCode> {
    let parent = world.agents.get(&agent).ok_or(ErrorCode::UnknownAgent)?;
    let econ = world.economics;
    let threshold = econ.checked_threshold()?;
    let agent_account = world.accounts.get(&agent).ok_or(ErrorCode::UnknownAgent)?;
    if agent_account.balance < threshold {
        return Err(ErrorCode::InsufficientEnergy);
    }
    let nonce = agent_account.nonce;
    let child = derive_child_address(&agent, nonce);
    if world.accounts.contains_key(&child) {
        return Err(ErrorCode::AddressCollision);
    }
    let agent_after = agent_account.balance.checked_sub(threshold)?;
    let sink = world.sink;
    let keeper_after = world.balance(&keeper).checked_add(econ.poke_reward)?;
    let sink_after = world.balance(&sink).checked_add(econ.gas_clone)?;

    // Mutation draws happen only once the gate has passed.
    let mut genome = parent.genome;
    for _ in 0..world.mutation_steps.max(1) {
        genome = morphogen::mutate(&genome, rng);
    }
    let child_state = AgentState {
        address: child,
        genome,
        parent: Some(agent),
        generation: parent.generation + 1,
        born_at: world.tick,
        children: Vec::new(),
        logic_ref: parent.logic_ref,
        nfts_sold: 0,
        income: Wei::ZERO,
        svg_hash: None,
    };

    world.commit_balances(&[(agent, agent_after), (keeper, keeper_after), (sink, sink_after)]);
    world.accounts.insert(
        child,
        Account {
            address: child,
            kind: AccountKind::AgentContract,
            balance: econ.child_endowment,
            nonce: 0,
        },
    );
    let agent_account = world.accounts.get_mut(&agent).expect("agent checked above");
    agent_account.nonce += 1;
    world
        .agents
        .get_mut(&agent)
        .expect("agent checked above")
        .children
        .push(child);
    world.agents.insert(child, child_state);
    world.birth_order.push(child);

    Ok(vec![
        Event::Replicated {
            child,
            parent: agent,
        },
        Event::RewardPaid {
            keeper,
            amount: econ.poke_reward,
        },
    ])
}

pub fn owner_of(world: &WorldState, token_id: u64) -> Result<Address, ErrorCode> {
    world
        .tokens
        .get(token_id as usize)
        .map(|t| t.owner)
        .ok_or(ErrorCode::UnknownToken)
}

pub fn tokens_minted_by<'a>(
    world: &'a WorldState,
    minter: &'a Address,
) -> impl Iterator<Item = &'a NftToken> + 'a {
    world.tokens.iter().filter(move |t| t.minter == *minter)
}
