//! Hand-crafted pair features: landmark distances, coordinates, the
//! great-circle distance and landmark-row cosine similarity.

use serde::{Deserialize, Serialize};

use crate::graph::{Coordinate, NodeId};
use crate::zoo::model::{CoordFeatures, LandmarkTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// `|d(u,i) − d(v,i)|` per landmark: symmetric and a lower bound on
    /// the target.
    AbsDiff,
    /// Both raw landmark rows side by side.
    RawConcat,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::AbsDiff => "abs_diff",
            FeatureMode::RawConcat => "raw_concat",
        }
    }
}

/// Per-node inputs and the rule that turns two of them into a pair vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PairFeaturizer {
    pub landmarks: LandmarkTable,
    pub coords: CoordFeatures,
    pub mode: FeatureMode,
}

impl PairFeaturizer {
    pub fn new(landmarks: LandmarkTable, coords: CoordFeatures, mode: FeatureMode) -> Self {
        PairFeaturizer { landmarks, coords, mode }
    }

    pub fn l(&self) -> usize {
        self.landmarks.l()
    }

    /// `l + 6` for [`FeatureMode::AbsDiff`], `2l + 6` for raw rows.
    pub fn feature_count(&self) -> usize {
        match self.mode {
            FeatureMode::AbsDiff => self.l() + 6,
            FeatureMode::RawConcat => 2 * self.l() + 6,
        }
    }

    /// Identifies the layout; stored with fitted ensembles.
    pub fn schema(&self) -> String {
        format!("{}:l={};lat_u,lon_u,lat_v,lon_v;haversine;cosine", self.mode.as_str(), self.l())
    }

    /// Writes the pair vector of `(u, v)` into `out`.
    pub fn features_into(&self, u: NodeId, v: NodeId, out: &mut Vec<f64>) {
        out.clear();
        let (ru, rv) = (self.landmarks.rows.row(u), self.landmarks.rows.row(v));
        match self.mode {
            FeatureMode::AbsDiff => out.extend(ru.iter().zip(rv).map(|(a, b)| (a - b).abs())),
            FeatureMode::RawConcat => {
                out.extend_from_slice(ru);
                out.extend_from_slice(rv);
            }
        }
        let (a, b) = (self.coords.lat_lon(u), self.coords.lat_lon(v));
        out.extend_from_slice(&[a.0, a.1, b.0, b.1]);
        out.push(Coordinate { lat: a.0, lon: a.1 }.haversine(&Coordinate { lat: b.0, lon: b.1 }));
        out.push(cosine(ru, rv));
        crate::opcount::add(4 * self.l() as u64 + 20);
    }

    pub fn features(&self, u: NodeId, v: NodeId) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_count());
        self.features_into(u, v, &mut out);
        out
    }
}

/// Cosine similarity, 0 when either vector is all zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_distance;
    use crate::synthetic::random_connected;
    use crate::workload::{select_landmarks, LandmarkStrategy};

    fn featurizer(mode: FeatureMode) -> (crate::graph::RoadNetwork, PairFeaturizer) {
        let g = random_connected(60, 40, 9.0, 5);
        let lm = select_landmarks(&g, 7, LandmarkStrategy::Random, None, 1).unwrap();
        let f = PairFeaturizer::new(LandmarkTable::compute(&g, &lm).unwrap(), CoordFeatures::from_graph(&g), mode);
        (g, f)
    }

    #[test]
    fn self_pair_features() {
        let (_, f) = featurizer(FeatureMode::AbsDiff);
        let x = f.features(3, 3);
        assert_eq!(x.len(), 13);
        assert!(x[..7].iter().all(|&v| v == 0.0));
        assert_eq!(x[11], 0.0);
        assert!((x[12] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn landmark_features_lower_bound_distance() {
        let (g, f) = featurizer(FeatureMode::AbsDiff);
        for u in 0..g.n() {
            for v in (0..g.n()).step_by(7) {
                let d = exact_distance(&g, u, v).unwrap();
                let x = f.features(u, v);
                assert!(x[..7].iter().all(|&a| a <= d + 1e-9));
                assert_eq!(x[12], f.features(v, u)[12]);
            }
        }
    }

    #[test]
    fn raw_mode_width_and_zero_cosine() {
        let (_, f) = featurizer(FeatureMode::RawConcat);
        assert_eq!(f.feature_count(), 20);
        assert_eq!(f.features(0, 1).len(), 20);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }
}
