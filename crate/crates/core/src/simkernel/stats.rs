use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ledger::WorldState;
use crate::morphogen::{Gene, GENE_COUNT};

/// One row per completed tick. Integers only; means are derived on output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickStats {
    pub tick: u64,
    pub population: u64,
    /// Agents holding at least the replication threshold.
    pub active: u64,
    pub nfts_sold: u64,
    pub volume: u64,
    pub generation_sum: u64,
    pub max_generation: u32,
    /// Per-gene population sums in gene-index order.
    pub gene_sums: Vec<i64>,
}

impl TickStats {
    pub fn sample(world: &WorldState) -> Self {
        let threshold = world.economics.replication_threshold();
        let mut gene_sums = vec![0i64; GENE_COUNT];
        let mut generation_sum = 0u64;
        let mut max_generation = 0u32;
        let mut active = 0u64;
        let mut volume = 0u64;
        for agent in world.agents.values() {
            for (sum, v) in gene_sums.iter_mut().zip(agent.genome.values()) {
                *sum += i64::from(v);
            }
            generation_sum += u64::from(agent.generation);
            max_generation = max_generation.max(agent.generation);
            volume += agent.income.0;
            if world.balance(&agent.address) >= threshold {
                active += 1;
            }
        }
        Self {
            tick: world.tick,
            population: world.agents.len() as u64,
            active,
            nfts_sold: world.tokens.len() as u64,
            volume,
            generation_sum,
            max_generation,
            gene_sums,
        }
    }

    pub fn mean_generation(&self) -> f64 {
        ratio(self.generation_sum as f64, self.population)
    }

    pub fn mean_gene(&self, gene: Gene) -> f64 {
        ratio(self.gene_sums[gene.index()] as f64, self.population)
    }
}

fn ratio(sum: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub series: Vec<TickStats>,
}

impl RunStats {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn last(&self) -> Option<&TickStats> {
        self.series.last()
    }

    pub fn csv_header() -> String {
        let mut h = String::from(
            "tick,population,active,nfts_sold,volume,mean_generation,max_generation",
        );
        for gene in Gene::ALL {
            let _ = write!(h, ",mean_{}", gene.name());
        }
        h
    }

    /// One row per tick; means printed with six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header();
        out.push('\n');
        for row in &self.series {
            let _ = write!(
                out,
                "{},{},{},{},{},{:.6},{}",
                row.tick,
                row.population,
                row.active,
                row.nfts_sold,
                row.volume,
                row.mean_generation(),
                row.max_generation
            );
            for gene in Gene::ALL {
                let _ = write!(out, ",{:.6}", row.mean_gene(gene));
            }
            out.push('\n');
        }
        out
    }
}
