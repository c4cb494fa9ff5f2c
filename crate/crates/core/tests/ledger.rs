mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use evochain::agentvm::{derive_child_address, owner_of};
use evochain::ledger::{
    apply_transaction, init_world, total_supply, Address, Call, ErrorCode, Event, Status,
    Transaction, TxError, Wei, WorldState,
};
use evochain::RandomStream;
use proptest::prelude::*;

fn world() -> WorldState {
    let mut c = economy(0, 0, 3, 2);
    c.genesis_balance = Wei(150);
    for b in &mut c.buyers {
        b.balance = Wei(5_000);
    }
    init_world(&c).unwrap()
}

/// Random transaction against the current world: any origin, any target.
fn random_tx(w: &WorldState, rng: &mut RandomStream) -> Transaction {
    let accounts: Vec<Address> = w.accounts.keys().copied().collect();
    let agents: Vec<Address> = w.agents.keys().copied().collect();
    let origin = accounts[rng.below(accounts.len() as u64) as usize];
    let call = [Call::BuyNft, Call::Poke, Call::Transfer][rng.below(3) as usize];
    let target = match rng.below(4) {
        0 => accounts[rng.below(accounts.len() as u64) as usize],
        1 => Address::derive(b"nobody", rng.below(3)),
        _ => agents[rng.below(agents.len() as u64) as usize],
    };
    let value = match call {
        Call::Poke if rng.below(5) > 0 => Wei(0),
        _ => Wei(rng.below(400)),
    };
    Transaction { origin, target, value, call, tick: w.tick }
}

#[test]
fn conservation_over_many_random_transactions() {
    let mut w = world();
    let supply = total_supply(&w);
    assert_eq!(supply, w.initial_supply);
    let mut rng = RandomStream::from_seed(123);
    let mut driver = RandomStream::from_seed(456);
    let mut ok = 0;
    for i in 0..1000 {
        w.tick = i / 10;
        let tx = random_tx(&w, &mut driver);
        if let Ok(r) = apply_transaction(&mut w, &tx, &mut rng) {
            ok += r.status.is_ok() as u32;
        }
        assert_eq!(total_supply(&w), supply);
    }
    assert!(ok > 0);
}

#[test]
fn failed_calls_touch_only_gas_and_nonce() {
    let mut w = world();
    let mut rng = RandomStream::from_seed(1);
    let mut driver = RandomStream::from_seed(2);
    let mut failures = 0;
    for _ in 0..2000 {
        let tx = random_tx(&w, &mut driver);
        let before = w.clone();
        match apply_transaction(&mut w, &tx, &mut rng) {
            Err(_) => {
                assert_eq!(w, before);
            }
            Ok(r) if !r.status.is_ok() => {
                failures += 1;
                let mut expected = before.clone();
                let o = expected.accounts.get_mut(&tx.origin).unwrap();
                o.balance = Wei(o.balance.0 - r.gas_charged.0);
                o.nonce += 1;
                expected.accounts.get_mut(&Address::ZERO).unwrap().balance.0 += r.gas_charged.0;
                assert_eq!(w.accounts, expected.accounts);
                assert_eq!(w.agents, before.agents);
                assert_eq!(w.tokens, before.tokens);
                assert!(r.events.is_empty());
            }
            Ok(_) => {}
        }
    }
    assert!(failures > 100);
}

#[test]
fn contracts_never_originate() {
    let mut w = world();
    let mut rng = RandomStream::from_seed(0);
    let agent = w.birth_order[0];
    for call in [Call::BuyNft, Call::Poke, Call::Transfer] {
        let tx = Transaction { origin: agent, target: buyer_address(0), value: Wei(0), call, tick: 0 };
        assert_eq!(apply_transaction(&mut w, &tx, &mut rng), Err(TxError::OriginNotEoa(agent)));
        let tx = Transaction { origin: Address::ZERO, ..tx };
        assert_eq!(apply_transaction(&mut w, &tx, &mut rng), Err(TxError::OriginNotEoa(Address::ZERO)));
    }
}

#[test]
fn below_price_costs_exactly_gas() {
    let mut w = world();
    let agent = w.birth_order[0];
    let buyer = buyer_address(0);
    let before = w.clone();
    let tx = Transaction { origin: buyer, target: agent, value: Wei(99), call: Call::BuyNft, tick: 0 };
    let r = apply_transaction(&mut w, &tx, &mut RandomStream::from_seed(0)).unwrap();
    assert_eq!(r.status, Status::Err(ErrorCode::PriceTooLow));
    assert_eq!(before.balance(&buyer).0 - w.balance(&buyer).0, w.gas.gas_buy.0);
    assert!(w.tokens.is_empty());
}

#[test]
fn replay_is_deterministic() {
    let play = || {
        let mut w = world();
        let mut rng = RandomStream::from_seed(77);
        let mut driver = RandomStream::from_seed(78);
        for _ in 0..500 {
            let tx = random_tx(&w, &mut driver);
            let _ = apply_transaction(&mut w, &tx, &mut rng);
        }
        w.state_hash()
    };
    assert_eq!(play(), play());
}

#[test]
fn replication_gate_matches_inequality() {
    for (gas_clone, reward, endowment) in [(50, 10, 0), (3, 8, 5), (0, 1, 0), (20, 30, 40)] {
        let mut c = economy(0, 0, 0, 1);
        c.economics.gas_clone = Wei(gas_clone);
        c.economics.poke_reward = Wei(reward);
        c.economics.child_endowment = Wei(endowment);
        let threshold = gas_clone + reward + endowment;
        for b in 0..=2 * threshold {
            c.genesis_balance = Wei(b);
            let mut w = init_world(&c).unwrap();
            let tx = Transaction {
                origin: keeper_address(0),
                target: w.birth_order[0],
                value: Wei(0),
                call: Call::Poke,
                tick: 0,
            };
            let r = apply_transaction(&mut w, &tx, &mut RandomStream::from_seed(b)).unwrap();
            assert_eq!(r.status.is_ok(), b >= threshold, "balance {b} threshold {threshold}");
            if b >= threshold {
                assert_eq!(w.balance(&w.birth_order[0]), Wei(b - threshold));
                assert_eq!(w.balance(&w.birth_order[1]), Wei(endowment));
            } else {
                assert_eq!(r.status, Status::Err(ErrorCode::InsufficientEnergy));
            }
        }
    }
}

#[test]
fn derived_addresses_do_not_collide() {
    let mut rng = RandomStream::from_seed(5);
    let mut seen = BTreeSet::new();
    let mut pairs = BTreeSet::new();
    while pairs.len() < 10_000 {
        let parent = Address::derive(b"parent", rng.below(200));
        let nonce = rng.below(100);
        if pairs.insert((parent, nonce)) {
            assert!(seen.insert(derive_child_address(&parent, nonce)));
        }
    }
}

/// Lineage, registry and income invariants after a random run.
fn check_structure(w: &WorldState) {
    let mut parents_of: BTreeMap<Address, usize> = BTreeMap::new();
    for a in w.agents.values() {
        for c in &a.children {
            *parents_of.entry(*c).or_default() += 1;
            assert_eq!(w.agents[c].parent, Some(a.address));
            assert_eq!(w.agents[c].generation, a.generation + 1);
            assert_eq!(w.agents[c].logic_ref, a.logic_ref);
        }
    }
    for a in w.agents.values() {
        match a.parent {
            None => assert_eq!(a.generation, 0),
            Some(_) => assert_eq!(parents_of.get(&a.address), Some(&1)),
        }
        // walking up terminates at a root
        let mut cur = a;
        let mut steps = 0;
        while let Some(p) = cur.parent {
            cur = &w.agents[&p];
            steps += 1;
            assert!(steps <= w.agents.len());
        }
    }
    for (i, t) in w.tokens.iter().enumerate() {
        assert_eq!(t.token_id, i as u64);
        assert_eq!(owner_of(w, t.token_id), Ok(t.owner));
        assert!(w.accounts.contains_key(&t.owner));
    }
    assert_eq!(owner_of(w, w.tokens.len() as u64), Err(ErrorCode::UnknownToken));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_histories_keep_invariants(seed in any::<u64>(), n in 50usize..400) {
        let mut w = world();
        let supply = total_supply(&w);
        let mut rng = RandomStream::from_seed(seed);
        let mut driver = RandomStream::from_seed(seed ^ 0x5555);
        for _ in 0..n {
            let tx = random_tx(&w, &mut driver);
            let before = w.clone();
            if let Ok(r) = apply_transaction(&mut w, &tx, &mut rng) {
                for e in &r.events {
                    if let Event::Sold { agent, price, .. } = e {
                        let pre = before.balance(agent).0;
                        prop_assert_eq!(w.balance(agent).0, pre + price.0);
                    }
                }
            }
            prop_assert_eq!(total_supply(&w), supply);
        }
        check_structure(&w);
    }
}
