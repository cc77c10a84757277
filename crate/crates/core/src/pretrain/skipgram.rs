//! Skip-gram with negative sampling over a walk corpus.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingTable, WalkCorpus};
use crate::nn::mlp::sigmoid;
use crate::nn::DenseMatrix;
use crate::util::{derive_seed, worker_count};

#[derive(Clone, Debug, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub lr: f64,
    pub epochs: usize,
    pub negatives: usize,
    pub seed: u64,
    /// Lock-free multi-threaded updates; results then depend on scheduling.
    pub parallel: bool,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig { dim: 64, window: 10, lr: 0.05, epochs: 1, negatives: 5, seed: 0, parallel: false }
    }
}

trait Weights {
    fn load(&self, i: usize) -> f64;
    fn store(&self, i: usize, v: f64);
}

struct Serial<'a>(&'a [Cell<f64>]);

impl Weights for Serial<'_> {
    #[inline]
    fn load(&self, i: usize) -> f64 {
        self.0[i].get()
    }
    #[inline]
    fn store(&self, i: usize, v: f64) {
        self.0[i].set(v)
    }
}

struct Shared<'a>(&'a [AtomicU64]);

impl Weights for Shared<'_> {
    #[inline]
    fn load(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }
    #[inline]
    fn store(&self, i: usize, v: f64) {
        self.0[i].store(v.to_bits(), Ordering::Relaxed)
    }
}

/// Row `start..start + h.len()` of `w` dotted with `h`, over four
/// independent partial sums.
#[inline]
fn dot<W: Weights>(w: &W, start: usize, h: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let body = h.len() / 4 * 4;
    for c in (0..body).step_by(4) {
        for (k, a) in acc.iter_mut().enumerate() {
            *a += w.load(start + c + k) * h[c + k];
        }
    }
    let mut f = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for c in body..h.len() {
        f += w.load(start + c) * h[c];
    }
    f
}

struct Job<'a, W: Weights> {
    input: &'a W,
    output: &'a W,
    noise: &'a WeightedIndex<f64>,
    cfg: &'a SkipGramConfig,
    total_tokens: f64,
}

impl<W: Weights> Job<'_, W> {
    /// Trains on `walks`; `done` counts tokens processed so far for the
    /// linear learning-rate decay.
    fn run(&self, walks: &[Vec<usize>], rng: &mut ChaCha8Rng, done: &mut f64) {
        let d = self.cfg.dim;
        let mut neu = vec![0.0; d];
        let mut h = vec![0.0; d];
        for walk in walks {
            for (i, &center) in walk.iter().enumerate() {
                let alpha = self.cfg.lr * (1.0 - *done / (self.total_tokens + 1.0)).max(1e-4);
                *done += 1.0;
                let lo = i.saturating_sub(self.cfg.window);
                let hi = (i + self.cfg.window + 1).min(walk.len());
                for (j, &ctx) in walk.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    neu.iter_mut().for_each(|x| *x = 0.0);
                    let cin = center * d;
                    for (c, hc) in h.iter_mut().enumerate() {
                        *hc = self.input.load(cin + c);
                    }
                    for k in 0..=self.cfg.negatives {
                        let (target, label) = if k == 0 {
                            (ctx, 1.0)
                        } else {
                            let t = self.noise.sample(rng);
                            if t == ctx {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let tout = target * d;
                        let g = (label - sigmoid(dot(self.output, tout, &h))) * alpha;
                        for (c, (nc, hc)) in neu.iter_mut().zip(&h).enumerate() {
                            let o = self.output.load(tout + c);
                            *nc += g * o;
                            self.output.store(tout + c, o + g * hc);
                        }
                    }
                    for (c, (nc, hc)) in neu.iter().zip(&h).enumerate() {
                        self.input.store(cin + c, hc + nc);
                    }
                }
            }
        }
    }
}

/// Returns the input-side table, `n × cfg.dim`. Nodes absent from the
/// corpus keep their initialization.
pub fn skipgram_train(corpus: &WalkCorpus, n: usize, cfg: &SkipGramConfig) -> EmbeddingTable {
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / d as f64;
    let mut input: Vec<f64> = (0..n * d).map(|_| rng.random_range(-bound..bound)).collect();
    let tokens = corpus.token_count();
    if cfg.epochs == 0 || tokens == 0 {
        return EmbeddingTable { values: DenseMatrix { rows: n, cols: d, data: input }, trainable: false };
    }
    let mut counts = vec![0.0f64; n];
    for w in &corpus.walks {
        for &v in w {
            counts[v] += 1.0;
        }
    }
    let noise = WeightedIndex::new(counts.iter().map(|c| c.powf(0.75))).expect("corpus has tokens");
    let total_tokens = (tokens * cfg.epochs) as f64;
    let mut output = vec![0.0f64; n * d];

    if !cfg.parallel {
        let inp = Serial(Cell::from_mut(&mut input[..]).as_slice_of_cells());
        let out = Serial(Cell::from_mut(&mut output[..]).as_slice_of_cells());
        let job = Job { input: &inp, output: &out, noise: &noise, cfg, total_tokens };
        let mut done = 0.0;
        for epoch in 0..cfg.epochs {
            let mut erng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1 + epoch as u64));
            job.run(&corpus.walks, &mut erng, &mut done);
        }
    } else {
        let inp_a: Vec<AtomicU64> = input.iter().map(|x| AtomicU64::new(x.to_bits())).collect();
        let out_a: Vec<AtomicU64> = output.iter().map(|x| AtomicU64::new(x.to_bits())).collect();
        let (inp, out) = (Shared(&inp_a), Shared(&out_a));
        let job = Job { input: &inp, output: &out, noise: &noise, cfg, total_tokens };
        let workers = worker_count().clamp(1, corpus.walks.len());
        let chunk = corpus.walks.len().div_ceil(workers);
        for epoch in 0..cfg.epochs {
            std::thread::scope(|scope| {
                for (t, part) in corpus.walks.chunks(chunk).enumerate() {
                    let job = &job;
                    scope.spawn(move || {
                        let mut trng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, ((epoch as u64) << 32) | t as u64));
                        // each worker sees its share of the global progress
                        let mut done = (epoch * tokens + t * chunk * corpus.walk_length) as f64;
                        job.run(part, &mut trng, &mut done);
                    });
                }
            });
        }
        input = inp_a.iter().map(|a| f64::from_bits(a.load(Ordering::Relaxed))).collect();
    }
    EmbeddingTable { values: DenseMatrix { rows: n, cols: d, data: input }, trainable: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Coordinate, RoadNetwork};
    use crate::nn::matrix::dot;
    use crate::pretrain::random_walks;

    fn two_cliques(k: usize) -> RoadNetwork {
        let coords = (0..2 * k).map(|i| Coordinate { lat: 0.0, lon: i as f64 * 1e-3 }).collect::<Vec<_>>();
        let mut edges = Vec::new();
        for base in [0, k] {
            for a in 0..k {
                for b in a + 1..k {
                    edges.push((base + a, base + b, 1.0));
                }
            }
        }
        RoadNetwork::from_edges(coords, &edges).unwrap()
    }

    #[test]
    fn zero_epochs_returns_init() {
        let g = two_cliques(4);
        let c = random_walks(&g, 2, 10, 0);
        let cfg = SkipGramConfig { dim: 8, epochs: 0, seed: 3, ..Default::default() };
        let a = skipgram_train(&c, g.n(), &cfg);
        let b = skipgram_train(&WalkCorpus { walks: vec![], walk_length: 0, walks_per_node: 0 }, g.n(), &cfg);
        assert_eq!(a, b);
        assert!(a.values.data.iter().all(|x| x.abs() <= 0.5 / 8.0));
    }

    #[test]
    fn serial_is_deterministic_and_shaped() {
        let g = two_cliques(5);
        let c = random_walks(&g, 5, 20, 1);
        let cfg = SkipGramConfig { dim: 16, seed: 9, ..Default::default() };
        let a = skipgram_train(&c, g.n(), &cfg);
        assert_eq!((a.n(), a.d()), (10, 16));
        assert_eq!(a, skipgram_train(&c, g.n(), &cfg));
    }

    #[test]
    fn cliques_separate() {
        let k = 8;
        let g = two_cliques(k);
        let c = random_walks(&g, 10, 40, 1);
        for parallel in [false, true] {
            let cfg = SkipGramConfig { dim: 16, window: 5, epochs: 3, seed: 4, parallel, ..Default::default() };
            let t = skipgram_train(&c, g.n(), &cfg);
            let (mut intra, mut inter) = (Vec::new(), Vec::new());
            for a in 0..2 * k {
                for b in a + 1..2 * k {
                    let s = dot(t.row(a), t.row(b));
                    if (a < k) == (b < k) {
                        intra.push(s)
                    } else {
                        inter.push(s)
                    }
                }
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            assert!(mean(&intra) > mean(&inter), "parallel={parallel}");
        }
    }
}
