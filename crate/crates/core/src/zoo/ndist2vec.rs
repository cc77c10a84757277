//! Ndist2vec hybrid sampling: all pairs first, then node-landmark pairs
//! with landmarks redrawn every epoch.

use crate::error::{Error, Result};
use crate::graph::RoadNetwork;
use crate::util::derive_seed;
use crate::workload::{sample_all_pairs, sample_landmark_pairs, select_landmarks, LandmarkStrategy, QueryPair};

/// Training pairs for `epoch`. Epoch 0 uses every pair when at most
/// `all_pairs_budget` result, and otherwise `4·l` random landmarks.
pub fn ndist2vec_epoch_pairs(
    epoch: usize,
    g: &RoadNetwork,
    landmarks_per_epoch: usize,
    seed: u64,
    all_pairs_budget: u64,
) -> Result<Vec<QueryPair>> {
    let l = landmarks_per_epoch.min(g.n());
    if epoch == 0 {
        match sample_all_pairs(g, all_pairs_budget) {
            Ok(p) => return Ok(p),
            Err(Error::AllPairsBudget { .. }) => {
                let lm = select_landmarks(g, (4 * l).min(g.n()), LandmarkStrategy::Random, None, derive_seed(seed, 0))?;
                return Ok(sample_landmark_pairs(g, &lm));
            }
            Err(e) => return Err(e),
        }
    }
    let lm = select_landmarks(g, l, LandmarkStrategy::Random, None, derive_seed(seed, epoch as u64))?;
    Ok(sample_landmark_pairs(g, &lm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::l1_grid;

    #[test]
    fn epoch_zero_is_all_pairs_within_budget() {
        let g = l1_grid(5, 10);
        assert_eq!(ndist2vec_epoch_pairs(0, &g, 4, 1, 10_000).unwrap().len(), 1225);
        let over = ndist2vec_epoch_pairs(0, &g, 2, 1, 100).unwrap();
        assert_eq!(over.len(), 8 * 49);
    }

    #[test]
    fn later_epochs_redraw_landmarks() {
        let g = l1_grid(10, 10);
        let lms = |e| {
            let mut s: Vec<usize> = ndist2vec_epoch_pairs(e, &g, 3, 7, 0).unwrap().iter().map(|p| p.1).collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let (a, b) = (lms(1), lms(2));
        assert_eq!(a.len(), 3);
        assert_ne!(a, b);
        for &(v, l) in &ndist2vec_epoch_pairs(3, &g, 3, 7, 0).unwrap() {
            assert!(lms(3).contains(&l) && v != l);
        }
    }
}
