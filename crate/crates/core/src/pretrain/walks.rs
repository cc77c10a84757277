use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{NodeId, RoadNetwork};
use crate::util::{derive_seed, par_map};

#[derive(Clone, Debug, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<NodeId>>,
    pub walk_length: usize,
    pub walks_per_node: usize,
}

impl WalkCorpus {
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }
}

/// Unbiased walks: `walks_per_node` walks of `length` nodes from every
/// start node, each step uniform over neighbors. Walks from isolated nodes
/// stop at the start node. Node-major order; every start node draws from
/// its own seeded stream, so the corpus does not depend on thread count.
pub fn random_walks(g: &RoadNetwork, walks_per_node: usize, length: usize, seed: u64) -> WalkCorpus {
    let starts: Vec<NodeId> = (0..g.n()).collect();
    let per_node = par_map(&starts, |&s| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, s as u64));
        (0..walks_per_node)
            .map(|_| {
                let mut walk = Vec::with_capacity(length);
                if length == 0 {
                    return walk;
                }
                let mut cur = s;
                walk.push(cur);
                while walk.len() < length {
                    let nb = g.neighbor_ids(cur);
                    if nb.is_empty() {
                        break;
                    }
                    cur = nb[rng.random_range(0..nb.len())];
                    walk.push(cur);
                }
                walk
            })
            .collect::<Vec<_>>()
    });
    WalkCorpus { walks: per_node.into_iter().flatten().collect(), walk_length: length, walks_per_node }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Coordinate;

    fn path(n: usize) -> RoadNetwork {
        let coords = (0..n).map(|i| Coordinate { lat: 0.0, lon: i as f64 * 1e-3 }).collect();
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        RoadNetwork::from_edges(coords, &edges).unwrap()
    }

    #[test]
    fn counts_and_validity() {
        let g = path(10);
        let c = random_walks(&g, 3, 8, 1);
        assert_eq!(c.walks.len(), 30);
        for w in &c.walks {
            assert_eq!(w.len(), 8);
            for p in w.windows(2) {
                assert!(g.neighbor_ids(p[0]).contains(&p[1]));
            }
        }
        assert_eq!(c, random_walks(&g, 3, 8, 1));
        assert_ne!(c, random_walks(&g, 3, 8, 2));
    }
}
