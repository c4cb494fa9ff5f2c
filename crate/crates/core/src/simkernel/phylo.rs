//! Replication lineage and its DOT / Newick exports.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Address, WorldState};
use crate::morphogen::Genome;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhyloError {
    #[error("newick export needs a single root, found {0}")]
    MultiRootForest(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeStatus {
    /// Holds at least the replication threshold.
    Active,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhyloNode {
    pub address: Address,
    pub parent: Option<Address>,
    pub generation: u32,
    pub born_at: u64,
    pub genome: Genome,
    pub status: NodeStatus,
}

/// Nodes in birth order; edges are the `parent` links.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PhyloTree {
    pub nodes: Vec<PhyloNode>,
}

impl PhyloTree {
    pub fn from_world(world: &WorldState) -> Self {
        let threshold = world.economics.replication_threshold();
        let nodes = world
            .birth_order
            .iter()
            .map(|a| {
                let agent = &world.agents[a];
                PhyloNode {
                    address: *a,
                    parent: agent.parent,
                    generation: agent.generation,
                    born_at: agent.born_at,
                    genome: agent.genome,
                    status: if world.balance(a) >= threshold {
                        NodeStatus::Active
                    } else {
                        NodeStatus::Stalled
                    },
                }
            })
            .collect();
        Self { nodes }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Address, Address)> + '_ {
        self.nodes
            .iter()
            .filter_map(|n| n.parent.map(|p| (p, n.address)))
    }

    pub fn roots(&self) -> impl Iterator<Item = &PhyloNode> + '_ {
        self.nodes.iter().filter(|n| n.parent.is_none())
    }

    pub fn max_generation(&self) -> u32 {
        self.nodes.iter().map(|n| n.generation).max().unwrap_or(0)
    }

    /// Children of every node, each list in birth order.
    fn children(&self) -> HashMap<Address, Vec<usize>> {
        let mut out: HashMap<Address, Vec<usize>> = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                out.entry(p).or_default().push(i);
            }
        }
        out
    }
}

/// Graphviz digraph; nodes in birth order, then edges in the child's birth order.
pub fn export_tree_dot(tree: &PhyloTree) -> String {
    let mut out = String::from("digraph phylogeny {\n  node [shape=box];\n");
    for n in &tree.nodes {
        let _ = writeln!(
            out,
            "  \"{}\" [label=\"gen {} @tick {}\"];",
            n.address.short(),
            n.generation,
            n.born_at
        );
    }
    for (parent, child) in tree.edges() {
        let _ = writeln!(out, "  \"{}\" -> \"{}\";", parent.short(), child.short());
    }
    out.push_str("}\n");
    out
}

/// Newick string with branch lengths in ticks.
pub fn export_tree_newick(tree: &PhyloTree) -> Result<String, PhyloError> {
    let roots: Vec<usize> = tree
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.parent.is_none())
        .map(|(i, _)| i)
        .collect();
    if roots.len() != 1 {
        return Err(PhyloError::MultiRootForest(roots.len()));
    }
    let children = tree.children();
    let born: HashMap<Address, u64> = tree.nodes.iter().map(|n| (n.address, n.born_at)).collect();
    let empty = Vec::new();
    let kids = |i: usize| children.get(&tree.nodes[i].address).unwrap_or(&empty);

    // Iterative post-order so long chains cannot exhaust the stack.
    let mut out = String::new();
    let mut stack: Vec<(usize, usize)> = vec![(roots[0], 0)];
    while let Some((node, next)) = stack.pop() {
        let ks = kids(node);
        if next == 0 && !ks.is_empty() {
            out.push('(');
        }
        if next < ks.len() {
            if next > 0 {
                out.push(',');
            }
            stack.push((node, next + 1));
            stack.push((ks[next], 0));
            continue;
        }
        if !ks.is_empty() {
            out.push(')');
        }
        let n = &tree.nodes[node];
        out.push_str(&n.address.short());
        if let Some(p) = n.parent {
            let parent_born = born.get(&p).copied().unwrap_or(n.born_at);
            let _ = write!(out, ":{}", n.born_at - parent_born);
        }
    }
    out.push(';');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(tag: u64, parent: Option<Address>, generation: u32, born_at: u64) -> PhyloNode {
        PhyloNode {
            address: Address::derive(b"n", tag),
            parent,
            generation,
            born_at,
            genome: Genome::default(),
            status: NodeStatus::Stalled,
        }
    }

    #[test]
    fn single_node_exports() {
        let tree = PhyloTree { nodes: vec![node(0, None, 0, 0)] };
        let short = tree.nodes[0].address.short();
        assert_eq!(export_tree_newick(&tree).unwrap(), format!("{short};"));
        let dot = export_tree_dot(&tree);
        assert_eq!(dot.matches("[label=").count(), 1);
        assert_eq!(dot.matches("->").count(), 0);
    }

    #[test]
    fn two_children_in_birth_order() {
        let p = node(0, None, 0, 0);
        let c1 = node(1, Some(p.address), 1, 5);
        let c2 = node(2, Some(p.address), 1, 9);
        let tree = PhyloTree { nodes: vec![p.clone(), c1.clone(), c2.clone()] };
        assert_eq!(
            export_tree_newick(&tree).unwrap(),
            format!(
                "({}:5,{}:9){};",
                c1.address.short(),
                c2.address.short(),
                p.address.short()
            )
        );
    }

    #[test]
    fn chain_of_three() {
        let a = node(0, None, 0, 0);
        let b = node(1, Some(a.address), 1, 3);
        let c = node(2, Some(b.address), 2, 10);
        let tree = PhyloTree { nodes: vec![a.clone(), b.clone(), c.clone()] };
        let dot = export_tree_dot(&tree);
        let expected = format!(
            "digraph phylogeny {{\n  node [shape=box];\n  \"{a}\" [label=\"gen 0 @tick 0\"];\n  \"{b}\" [label=\"gen 1 @tick 3\"];\n  \"{c}\" [label=\"gen 2 @tick 10\"];\n  \"{a}\" -> \"{b}\";\n  \"{b}\" -> \"{c}\";\n}}\n",
            a = a.address.short(),
            b = b.address.short(),
            c = c.address.short()
        );
        assert_eq!(dot, expected);
        assert_eq!(
            export_tree_newick(&tree).unwrap(),
            format!("(({}:7){}:3){};", c.address.short(), b.address.short(), a.address.short())
        );
    }

    #[test]
    fn forests_are_rejected_for_newick() {
        let tree = PhyloTree { nodes: vec![node(0, None, 0, 0), node(1, None, 0, 0)] };
        assert_eq!(export_tree_newick(&tree), Err(PhyloError::MultiRootForest(2)));
        assert_eq!(export_tree_newick(&PhyloTree::default()), Err(PhyloError::MultiRootForest(0)));
    }

    #[test]
    fn deep_chain_does_not_recurse() {
        let mut nodes = vec![node(0, None, 0, 0)];
        for i in 1..50_000u64 {
            let parent = nodes[i as usize - 1].address;
            nodes.push(node(i, Some(parent), i as u32, i));
        }
        let tree = PhyloTree { nodes };
        let nwk = export_tree_newick(&tree).unwrap();
        assert_eq!(nwk.matches('(').count(), 49_999);
    }
}
