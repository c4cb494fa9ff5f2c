#![allow(dead_code)]

use evochain::ledger::{Address, Wei, WorldState};
use evochain::market::{Rational, Taste};
use evochain::morphogen::Genome;
use evochain::simkernel::{BuyerSetup, KeeperSetup, ScenarioConfig};

pub fn buyer_address(i: u64) -> Address {
    Address::derive(b"test/buyer", i)
}

pub fn keeper_address(i: u64) -> Address {
    Address::derive(b"test/keeper", i)
}

pub fn genesis_genome() -> Genome {
    Genome::new([2, -3, 4, 5, -1, 3, 2, 4], 5, [40, 90, 160], 4, 0).unwrap()
}

/// A scenario with `buyers` size-loving buyers and `keepers` keepers.
pub fn economy(seed: u64, ticks: u64, buyers: u64, keepers: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        seed,
        ticks,
        genesis_genome: genesis_genome(),
        genesis_balance: Wei(0),
        ..Default::default()
    };
    for i in 0..buyers {
        let mut b = BuyerSetup::with_defaults(buyer_address(i), Wei(1_000_000_000));
        b.profile.budget_per_tick = Wei(5_000);
        c.buyers.push(b);
    }
    for i in 0..keepers {
        c.keepers
            .push(KeeperSetup::with_defaults(keeper_address(i), Wei(10_000)));
    }
    c
}

/// Size-only taste, each buyer scoring a sample of 5 agents.
pub fn selective(seed: u64, ticks: u64) -> ScenarioConfig {
    economy(seed, ticks, 5, 2)
}

/// Uniform random purchases: no taste, one random agent per look, any price accepted.
pub fn neutral(seed: u64, ticks: u64) -> ScenarioConfig {
    let mut c = economy(seed, ticks, 5, 2);
    for b in &mut c.buyers {
        b.profile.taste = Taste::indifferent();
        b.profile.sample_size = 1;
        b.profile.utility_threshold = Rational::from_integer(-1_000_000);
    }
    c
}

/// Mean depth gene of agents born in `[from, to)`.
pub fn mean_depth_born_in(world: &WorldState, from: u64, to: u64) -> Option<f64> {
    let depths: Vec<f64> = world
        .agents
        .values()
        .filter(|a| a.born_at >= from && a.born_at < to)
        .map(|a| f64::from(a.genome.depth()))
        .collect();
    (!depths.is_empty()).then(|| depths.iter().sum::<f64>() / depths.len() as f64)
}

pub fn golden_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// The fixed golden genomes, by name, in file order of their names.
pub fn golden_genomes() -> Vec<(String, Genome)> {
    let text = std::fs::read_to_string(golden_dir().join("genomes.json")).unwrap();
    let map: std::collections::BTreeMap<String, serde_json::Value> =
        serde_json::from_str(&text).unwrap();
    map.into_iter()
        .map(|(name, v)| (name, Genome::from_json(&v.to_string()).unwrap()))
        .collect()
}

/// Compares each golden genome's rendering with its frozen file.
///
/// Set `EVOCHAIN_BLESS=1` to write missing files (never overwrites).
pub fn golden_mismatches() -> Vec<String> {
    let bless = std::env::var_os("EVOCHAIN_BLESS").is_some();
    let mut bad = Vec::new();
    for (name, genome) in golden_genomes() {
        let path = golden_dir().join(format!("{name}.svg"));
        let svg = evochain::morphogen::phenotype_svg(&genome);
        match std::fs::read(&path) {
            Ok(bytes) if bytes == svg.as_str().as_bytes() => {}
            Ok(_) => bad.push(name),
            Err(_) if bless => std::fs::write(&path, svg.as_str()).unwrap(),
            Err(_) => bad.push(format!("{name} (missing)")),
        }
    }
    bad
}

/// Minimal Newick reader, independent of the exporter: returns
/// `(name, branch_length, children)` trees.
#[derive(Debug, PartialEq)]
pub struct NewickNode {
    pub name: String,
    pub length: Option<u64>,
    pub children: Vec<NewickNode>,
}

impl NewickNode {
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(NewickNode::count).sum::<usize>()
    }
}

pub fn parse_newick(text: &str) -> Result<NewickNode, String> {
    let bytes = text.trim().as_bytes();
    if bytes.last() != Some(&b';') {
        return Err("missing terminating semicolon".into());
    }
    let mut pos = 0;
    let node = parse_subtree(&bytes[..bytes.len() - 1], &mut pos)?;
    if pos != bytes.len() - 1 {
        return Err(format!("trailing input at {pos}"));
    }
    Ok(node)
}

fn parse_subtree(b: &[u8], pos: &mut usize) -> Result<NewickNode, String> {
    let mut children = Vec::new();
    if b.get(*pos) == Some(&b'(') {
        *pos += 1;
        loop {
            children.push(parse_subtree(b, pos)?);
            match b.get(*pos) {
                Some(b',') => *pos += 1,
                Some(b')') => {
                    *pos += 1;
                    break;
                }
                other => return Err(format!("unexpected {other:?} at {pos}")),
            }
        }
    }
    let start = *pos;
    while *pos < b.len() && !matches!(b[*pos], b',' | b')' | b'(' | b':') {
        *pos += 1;
    }
    let name = String::from_utf8(b[start..*pos].to_vec()).map_err(|e| e.to_string())?;
    let mut length = None;
    if b.get(*pos) == Some(&b':') {
        *pos += 1;
        let s = *pos;
        while *pos < b.len() && b[*pos].is_ascii_digit() {
            *pos += 1;
        }
        length = Some(
            std::str::from_utf8(&b[s..*pos])
                .unwrap()
                .parse()
                .map_err(|e| format!("bad length: {e}"))?,
        );
    }
    Ok(NewickNode { name, length, children })
}

/// Node declarations in a DOT export (lines carrying a label).
pub fn dot_node_count(dot: &str) -> usize {
    dot.lines().filter(|l| l.contains("[label=")).count()
}

pub fn dot_edge_count(dot: &str) -> usize {
    dot.lines().filter(|l| l.contains("->")).count()
}
