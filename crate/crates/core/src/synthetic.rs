//! Synthetic road-like networks for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Coordinate, NodeId, RoadNetwork};
use crate::zoo::decoder::ManhattanScale;

/// Rectangular grid with jittered coordinates and noisy edge weights.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Grid spacing in meters.
    pub spacing_m: f64,
    /// Coordinate jitter as a fraction of the spacing.
    pub jitter: f64,
    /// Edge weight = great-circle length × U(1, 1 + weight_noise).
    pub weight_noise: f64,
    /// Probability of dropping each grid edge (the result is not
    /// guaranteed connected; run the largest-component pass).
    pub drop_prob: f64,
    pub origin: Coordinate,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rows: 20,
            cols: 25,
            spacing_m: 200.0,
            jitter: 0.2,
            weight_noise: 0.3,
            drop_prob: 0.0,
            origin: Coordinate { lat: 41.85, lon: -87.65 },
        }
    }
}

pub fn perturbed_grid(spec: &GridSpec, seed: u64) -> RoadNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m_per_deg_lat = crate::graph::EARTH_RADIUS_M.to_radians();
    let m_per_deg_lon = m_per_deg_lat * spec.origin.lat.to_radians().cos();
    let dlat = spec.spacing_m / m_per_deg_lat;
    let dlon = spec.spacing_m / m_per_deg_lon;
    let id = |r: usize, c: usize| r * spec.cols + c;
    let mut coords = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let jl = (rng.random::<f64>() - 0.5) * 2.0 * spec.jitter * dlat;
            let jo = (rng.random::<f64>() - 0.5) * 2.0 * spec.jitter * dlon;
            coords.push(Coordinate {
                lat: spec.origin.lat + r as f64 * dlat + jl,
                lon: spec.origin.lon + c as f64 * dlon + jo,
            });
        }
    }
    let mut edges = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let mut link = |a: NodeId, b: NodeId, rng: &mut ChaCha8Rng| {
                if rng.random::<f64>() < spec.drop_prob {
                    return;
                }
                let len = coords[a].haversine(&coords[b]);
                let w = len * (1.0 + spec.weight_noise * rng.random::<f64>());
                edges.push((a, b, w));
            };
            if c + 1 < spec.cols {
                link(id(r, c), id(r, c + 1), &mut rng);
            }
            if r + 1 < spec.rows {
                link(id(r, c), id(r + 1, c), &mut rng);
            }
        }
    }
    RoadNetwork::from_edges(coords, &edges).expect("grid construction is valid")
}

/// Grid whose edge weights equal the local-meter L1 gap between endpoint
/// coordinates, so every shortest path length equals the L1 distance.
///
/// Coordinates are dyadic (multiples of 2^-10 degrees) and thus exactly
/// representable in 32-bit storage.
pub fn l1_grid(rows: usize, cols: usize) -> RoadNetwork {
    let step = 1.0 / 1024.0;
    let coords: Vec<_> = (0..rows)
        .flat_map(|r| {
            (0..cols).map(move |c| Coordinate {
                lat: 40.0 + r as f64 * step,
                lon: -74.0 + c as f64 * step,
            })
        })
        .collect();
    let mean_lat = coords.iter().map(|c| c.lat).sum::<f64>() / coords.len() as f64;
    let scale = ManhattanScale::at_latitude(mean_lat);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let a = r * cols + c;
            if c + 1 < cols {
                edges.push((a, a + 1, scale.distance(coords[a], coords[a + 1])));
            }
            if r + 1 < rows {
                edges.push((a, a + cols, scale.distance(coords[a], coords[a + cols])));
            }
        }
    }
    RoadNetwork::from_edges(coords, &edges).expect("grid construction is valid")
}

/// Random connected graph: a random spanning tree plus `extra` random
/// edges, weights uniform in (0, max_weight].
pub fn random_connected(n: usize, extra: usize, max_weight: f64, seed: u64) -> RoadNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n)
        .map(|_| Coordinate {
            lat: rng.random_range(40.0..40.1),
            lon: rng.random_range(-74.1..-74.0),
        })
        .collect();
    let weight = |rng: &mut ChaCha8Rng| max_weight * (1.0 - rng.random::<f64>());
    let mut edges = Vec::with_capacity(n + extra);
    for v in 1..n {
        let parent = rng.random_range(0..v);
        edges.push((parent, v, weight(&mut rng)));
    }
    if n >= 2 {
        for _ in 0..extra {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            if u != v {
                edges.push((u, v, weight(&mut rng)));
            }
        }
    }
    RoadNetwork::from_edges(coords, &edges).expect("random graph construction is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = perturbed_grid(&GridSpec { rows: 4, cols: 5, ..Default::default() }, 1);
        assert_eq!(g.n(), 20);
        assert_eq!(g.m(), 4 * 4 + 3 * 5);
        assert!(g.is_connected());
    }

    #[test]
    fn l1_grid_coords_are_f32_exact() {
        let g = l1_grid(3, 3);
        for c in g.coords() {
            assert_eq!(c.lat as f32 as f64, c.lat);
            assert_eq!(c.lon as f32 as f64, c.lon);
        }
    }

    #[test]
    fn random_connected_is_connected() {
        for seed in 0..5 {
            assert!(random_connected(30, 10, 10.0, seed).is_connected());
        }
    }
}
