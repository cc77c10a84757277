//! Inverse-dot table losses shared by Path2vec and ANEDA.

use rand::Rng;

use super::train::Labeled;
use crate::graph::{NodeId, RoadNetwork};
use crate::nn::adam::SparseRowGrad;
use crate::nn::matrix::dot;
use crate::nn::DenseMatrix;

/// One random neighbor of each endpoint, `None` for isolated nodes.
pub fn sample_neighbor_pairs<R: Rng>(
    g: &RoadNetwork,
    batch: &[Labeled],
    rng: &mut R,
) -> Vec<(Option<NodeId>, Option<NodeId>)> {
    let mut pick = |v: NodeId| {
        let nb = g.neighbor_ids(v);
        (!nb.is_empty()).then(|| nb[rng.random_range(0..nb.len())])
    };
    batch.iter().map(|s| (pick(s.u), pick(s.v))).collect()
}

/// Batch loss `(1/B) Σ [(d̂ − y)² − α(h_u·h_i + h_v·h_j)]` with
/// `d̂ = max(0, (1 − h_u·h_v)/2)`; gradients are accumulated into `grad`.
///
/// `neighbors[r]` holds the sampled neighbors `(i, j)` of row `r`; it may
/// be empty when `alpha == 0`.
pub fn path2vec_batch_loss(
    batch: &[Labeled],
    table: &DenseMatrix,
    alpha: f64,
    neighbors: &[(Option<NodeId>, Option<NodeId>)],
    grad: &mut SparseRowGrad,
) -> f64 {
    let inv = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let d = table.cols;
    let mut tmp = vec![0.0; d];
    let mut add = |grad: &mut SparseRowGrad, row: NodeId, src: &[f64], c: f64| {
        tmp.iter_mut().zip(src).for_each(|(t, s)| *t = c * s);
        for (g, t) in grad.row_mut(row).iter_mut().zip(&tmp) {
            *g += t;
        }
    };
    for (r, s) in batch.iter().enumerate() {
        let (hu, hv) = (table.row(s.u), table.row(s.v));
        let raw = (1.0 - dot(hu, hv)) / 2.0;
        let pred = raw.max(0.0);
        let res = pred - s.y;
        total += res * res;
        if raw > 0.0 {
            add(grad, s.u, hv, -res * inv);
            add(grad, s.v, hu, -res * inv);
        }
        if alpha > 0.0 {
            let (i, j) = neighbors[r];
            if let Some(i) = i {
                let hi = table.row(i);
                total -= alpha * dot(hu, hi);
                add(grad, s.u, hi, -alpha * inv);
                add(grad, i, hu, -alpha * inv);
            }
            if let Some(j) = j {
                let hj = table.row(j);
                total -= alpha * dot(hv, hj);
                add(grad, s.v, hj, -alpha * inv);
                add(grad, j, hv, -alpha * inv);
            }
        }
    }
    total * inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamped_rows_get_no_distance_gradient() {
        // h_u · h_v = 2 > 1, so d̂ is clamped at zero
        let t = DenseMatrix::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let b = [Labeled { u: 0, v: 1, y: 0.5 }];
        let mut g = SparseRowGrad::new(2, 2);
        let l = path2vec_batch_loss(&b, &t, 0.0, &[], &mut g);
        assert_eq!(l, 0.25);
        assert!(g.is_empty() || g.to_dense().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unclamped_gradient_is_minus_residual_times_partner() {
        let t = DenseMatrix::from_vec(2, 2, vec![0.5, 0.0, 0.0, 1.0]).unwrap();
        let b = [Labeled { u: 0, v: 1, y: 0.1 }];
        let mut g = SparseRowGrad::new(2, 2);
        let l = path2vec_batch_loss(&b, &t, 0.0, &[], &mut g);
        assert!((l - 0.16).abs() < 1e-15);
        let dense = g.to_dense();
        assert_eq!(&dense[..2], &[0.0, -0.4]);
        assert!((dense[2] + 0.2).abs() < 1e-15 && dense[3] == 0.0);
    }
}
