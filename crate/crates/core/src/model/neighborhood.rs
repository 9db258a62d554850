use std::collections::BTreeSet;

use super::Model;

/// Undirected neighbor sets over the model's sites (chain positions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodSystem {
    sites: Vec<String>,
    neighbors: Vec<BTreeSet<usize>>,
}

impl NeighborhoodSystem {
    /// A system with no edges.
    pub fn empty(sites: Vec<String>) -> Self {
        let neighbors = vec![BTreeSet::new(); sites.len()];
        Self { sites, neighbors }
    }

    /// Adds the undirected edge `a`–`b`; self-loops are ignored.
    pub fn connect(&mut self, a: usize, b: usize) {
        if a != b {
            self.neighbors[a].insert(b);
            self.neighbors[b].insert(a);
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn of(&self, site: usize) -> &BTreeSet<usize> {
        &self.neighbors[site]
    }

    /// Neighbor ids of the parameter `id`, in chain order.
    pub fn of_id(&self, id: &str) -> Option<Vec<&str>> {
        let s = self.sites.iter().position(|x| x == id)?;
        Some(self.neighbors[s].iter().map(|&t| self.sites[t].as_str()).collect())
    }

    pub fn site_ids(&self) -> &[String] {
        &self.sites
    }

    /// `s ∉ N_s` and `t ∈ N_s ⇔ s ∈ N_t`.
    pub fn is_irreflexive_and_symmetric(&self) -> bool {
        self.neighbors.iter().enumerate().all(|(s, ns)| {
            !ns.contains(&s) && ns.iter().all(|&t| self.neighbors[t].contains(&s))
        })
    }
}

/// Neighborhoods induced by the model's structure: parent–child edges of
/// every table, edges between co-parents, and edges between parameters
/// that appear together in a forbidden item.
pub fn neighborhoods(model: &Model) -> NeighborhoodSystem {
    let mut n = NeighborhoodSystem::empty(model.site_ids().map(str::to_string).collect());
    for child in 0..model.len() {
        let parents = model.parents(child);
        for (i, &p) in parents.iter().enumerate() {
            n.connect(p, child);
            for &q in &parents[i + 1..] {
                n.connect(p, q);
            }
        }
    }
    for item in model.forbidden_items() {
        for (i, &(a, _)) in item.iter().enumerate() {
            for &(b, _) in &item[i + 1..] {
                n.connect(a, b);
            }
        }
    }
    n
}
