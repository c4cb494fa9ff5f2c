//! Scripted EOAs that drive the economy.
//!
//! Buyers stand in for human collectors: each tick they look at a random
//! sample of agents, score the phenotypes against a fixed taste, and buy at
//! most one token from the favourite. Keepers run the withdraw pattern,
//! poking every agent that can afford to replicate as long as the reward
//! beats the gas.

use std::sync::OnceLock;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::agentvm::price_for;
use crate::ledger::{Address, Call, Transaction, Wei, WorldState};
use crate::morphogen::{develop, Drawing, Genome, Rgb};
use crate::rng::RandomStream;
use crate::scalar::Scalar;

/// Exact rational written as `"n"` or `"n/d"` in config documents.
pub type Rational = Ratio<i64>;

pub(crate) mod rational_text {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(r)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        text.trim()
            .parse::<Rational>()
            .map_err(|_| serde::de::Error::custom(format!("invalid rational {text:?}")))
    }
}

/// Weights over the phenotype features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taste {
    #[serde(with = "rational_text")]
    pub w_size: Rational,
    #[serde(with = "rational_text")]
    pub w_fill: Rational,
    #[serde(with = "rational_text")]
    pub w_color: Rational,
}

impl Taste {
    pub fn size_only() -> Self {
        Self {
            w_size: Rational::from_integer(1),
            w_fill: Rational::from_integer(0),
            w_color: Rational::from_integer(0),
        }
    }

    pub fn indifferent() -> Self {
        Self {
            w_size: Rational::from_integer(0),
            w_fill: Rational::from_integer(0),
            w_color: Rational::from_integer(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuyerProfile {
    pub address: Address,
    pub budget_per_tick: Wei,
    pub taste: Taste,
    pub preferred_color: Rgb,
    #[serde(with = "rational_text")]
    pub utility_threshold: Rational,
    pub sample_size: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeeperProfile {
    pub address: Address,
    pub max_pokes_per_tick: u32,
}

/// Market-wide knobs shared by all buyers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Weight of the normalized price in the utility (λ).
    #[serde(with = "rational_text")]
    pub price_penalty: Rational,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            price_penalty: Rational::from_integer(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector<T> {
    /// Segment count over 255.
    pub size: T,
    /// Bounding-box area over [`fill_normalizer`], clamped to [0, 1].
    pub fill: T,
    /// Euclidean RGB distance to the preferred colour over sqrt(3 * 255^2).
    pub color_dist: T,
}

/// Largest bounding-box area among depth-8 genomes whose shape genes are all ±9.
///
/// Evaluated once per process over the 256 sign patterns.
pub fn fill_normalizer() -> i64 {
    static AREA: OnceLock<i64> = OnceLock::new();
    *AREA.get_or_init(|| {
        (0u32..256)
            .map(|mask| {
                let mut shape = [0i32; 8];
                for (i, s) in shape.iter_mut().enumerate() {
                    *s = if mask >> i & 1 == 1 { 9 } else { -9 };
                }
                let g = Genome::new(shape, 8, [0, 0, 0], 1, 0).expect("extreme genome in bounds");
                bbox_area(&develop(&g))
            })
            .max()
            .expect("non-empty range")
    })
}

fn bbox_area(drawing: &Drawing) -> i64 {
    drawing
        .bounds()
        .map(|(x0, y0, x1, y1)| (i64::from(x1) - i64::from(x0)) * (i64::from(y1) - i64::from(y0)))
        .unwrap_or(0)
}

pub fn phenotype_features<T: Scalar>(
    drawing: &Drawing,
    genome: &Genome,
    preferred: Rgb,
) -> FeatureVector<T> {
    let segments = (1u64 << genome.depth()) - 1;
    let size = T::from_count(segments) / T::from_count(255);

    let fill = T::from_i64(bbox_area(drawing)).expect("area fits")
        / T::from_i64(fill_normalizer()).expect("area fits");
    let fill = fill.max(T::zero()).min(T::one());

    let c = genome.color();
    let sq = |a: u8, b: u8| {
        let d = i64::from(a) - i64::from(b);
        d * d
    };
    let dist2 = sq(c.r(), preferred.r()) + sq(c.g(), preferred.g()) + sq(c.b(), preferred.b());
    let color_dist = T::from_i64(dist2).expect("fits").sqrt()
        / T::from_i64(3 * 255 * 255).expect("fits").sqrt();

    FeatureVector {
        size,
        fill,
        color_dist,
    }
}

/// `w_size*size + w_fill*fill - w_color*color_dist - λ*(price/base_price)`.
pub fn utility<T: Scalar>(
    features: &FeatureVector<T>,
    taste: &Taste,
    price: Wei,
    base_price: Wei,
    price_penalty: &Rational,
) -> T {
    let relative_price = if base_price.0 == 0 {
        T::zero()
    } else {
        T::from_count(price.0) / T::from_count(base_price.0)
    };
    T::from_ratio(&taste.w_size) * features.size + T::from_ratio(&taste.w_fill) * features.fill
        - T::from_ratio(&taste.w_color) * features.color_dist
        - T::from_ratio(price_penalty) * relative_price
}

/// Picks `k` distinct indices out of `0..n`, uniformly.
///
/// Partial Fisher-Yates: exactly one `below` draw per pick while `n > k`;
/// when `n <= k` every index is returned in order and nothing is drawn.
pub fn sample_indices(n: usize, k: usize, rng: &mut RandomStream) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if n <= k {
        return idx;
    }
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// One buyer's decision for the current tick: zero or one `BuyNft`.
pub fn buyer_act<T: Scalar>(
    world: &WorldState,
    profile: &BuyerProfile,
    market: &MarketParams,
    rng: &mut RandomStream,
) -> Vec<Transaction> {
    let agents: Vec<&Address> = world.agents.keys().collect();
    if agents.is_empty() {
        return Vec::new();
    }
    let picks = sample_indices(agents.len(), profile.sample_size.max(1) as usize, rng);
    let econ = &world.economics;

    let mut best: Option<(T, Address, Wei)> = None;
    for i in picks {
        let agent = &world.agents[agents[i]];
        let price = price_for(&agent.genome, econ);
        let features =
            phenotype_features::<T>(&develop(&agent.genome), &agent.genome, profile.preferred_color);
        let u = utility(&features, &profile.taste, price, econ.base_price, &market.price_penalty);
        if best.as_ref().is_none_or(|(b, _, _)| u > *b) {
            best = Some((u, agent.address, price));
        }
    }
    let Some((u, target, price)) = best else {
        return Vec::new();
    };
    if u < T::from_ratio(&profile.utility_threshold) {
        return Vec::new();
    }
    let Some(cost) = price.0.checked_add(world.gas.gas_buy.0) else {
        return Vec::new();
    };
    let spendable = world.balance(&profile.address).0.min(profile.budget_per_tick.0);
    if cost > spendable {
        return Vec::new();
    }
    vec![Transaction {
        origin: profile.address,
        target,
        value: price,
        call: Call::BuyNft,
        tick: world.tick,
    }]
}

/// Pokes for up to `max_pokes_per_tick` ripe agents, scanning in address order.
pub fn keeper_act(world: &WorldState, profile: &KeeperProfile) -> Vec<Transaction> {
    let gas = world.gas.gas_poke;
    if world.economics.poke_reward <= gas {
        return Vec::new();
    }
    let threshold = world.economics.replication_threshold();
    let balance = world.balance(&profile.address);
    // each poke is prepaid from the current balance; rewards arrive afterwards
    let affordable = balance.0.checked_div(gas.0).unwrap_or(u64::MAX);
    let limit = u64::from(profile.max_pokes_per_tick).min(affordable) as usize;
    world
        .agents
        .keys()
        .filter(|a| world.balance(a) >= threshold)
        .take(limit)
        .map(|a| Transaction {
            origin: profile.address,
            target: *a,
            value: Wei::ZERO,
            call: Call::Poke,
            tick: world.tick,
        })
        .collect()
}
