//! Squared-loss gradient boosting and the two-stage regressor.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::tree::{CompleteTree, FeatureMatrix, QuantileBins, RegressionTree, TreeFitter};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub max_trees: usize,
    pub bins: usize,
    pub budget_seconds: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { max_depth: 8, learning_rate: 0.3, max_trees: 12_000, bins: 64, budget_seconds: 300.0 }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!("learning rate {} outside (0, 1]", self.learning_rate)));
        }
        if !(2..=256).contains(&self.bins) {
            return Err(Error::InvalidArgument(format!("bin count {} outside 2..=256", self.bins)));
        }
        if !(self.budget_seconds >= 0.0) {
            return Err(Error::InvalidArgument("budget must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostedEnsemble {
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub base_score: f64,
    /// 1 or 2. A stage-2 ensemble starts from its last input feature (the
    /// stage-1 prediction) instead of `base_score`.
    pub stage: u8,
    pub n_features: usize,
    /// Prediction layout derived from `trees`.
    complete: Vec<CompleteTree>,
}

impl BoostedEnsemble {
    pub fn new(trees: Vec<RegressionTree>, learning_rate: f64, base_score: f64, stage: u8, n_features: usize) -> Self {
        let complete = trees.iter().map(CompleteTree::from_tree).collect();
        BoostedEnsemble { trees, learning_rate, base_score, stage, n_features, complete }
    }

    /// `base + lr · Σ tree(x)`, where `base` is `base_score` for stage 1
    /// and the appended stage-1 prediction for stage 2.
    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let base = if self.stage == 2 { x[self.n_features - 1] } else { self.base_score };
        let mut s = 0.0;
        for t in &self.complete {
            s += t.predict(x);
        }
        crate::opcount::add(self.trees.len() as u64);
        base + self.learning_rate * s
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(|t| t.nodes.len()).sum()
    }
}

/// Per-tree training MSE and elapsed seconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoostCurve {
    pub train_mse: Vec<f64>,
    pub seconds: Vec<f64>,
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len().max(1) as f64
}

/// Boosting on `x`; `init` gives per-row starting predictions (stage 2),
/// otherwise the target mean is used.
fn boost(
    x: &FeatureMatrix,
    y: &[f64],
    params: &BoostParams,
    stage: u8,
    init: Option<&[f64]>,
) -> Result<(BoostedEnsemble, BoostCurve)> {
    params.validate()?;
    if x.rows == 0 || x.rows != y.len() {
        return Err(Error::InvalidArgument(format!("{} feature rows for {} targets", x.rows, y.len())));
    }
    let start = Instant::now();
    let base_score = y.iter().sum::<f64>() / y.len() as f64;
    let mut pred: Vec<f64> = match init {
        Some(p) => p.to_vec(),
        None => vec![base_score; y.len()],
    };
    let base_score = if stage == 2 { 0.0 } else { base_score };
    let finish = |trees| BoostedEnsemble::new(trees, params.learning_rate, base_score, stage, x.cols);
    let mut curve = BoostCurve::default();
    if params.max_trees == 0 || params.budget_seconds == 0.0 {
        return Ok((finish(Vec::new()), curve));
    }
    let bins = QuantileBins::fit(x, params.bins);
    let binned = bins.transform(x);
    let fitter = TreeFitter::new(&binned, &bins, params.max_depth);
    let mut rows: Vec<u32> = (0..x.rows as u32).collect();
    let mut residual = vec![0.0; y.len()];
    let mut leaf = vec![0.0; y.len()];
    let mut trees = Vec::new();
    while trees.len() < params.max_trees && start.elapsed().as_secs_f64() < params.budget_seconds {
        for i in 0..y.len() {
            residual[i] = y[i] - pred[i];
        }
        let tree = fitter.fit(&mut rows, &residual, &mut leaf);
        if tree.is_stump_leaf() {
            // nothing left to split; later trees would be identical
            break;
        }
        for i in 0..y.len() {
            pred[i] += params.learning_rate * leaf[i];
        }
        trees.push(tree);
        curve.train_mse.push(mse(&pred, y));
        curve.seconds.push(start.elapsed().as_secs_f64());
    }
    Ok((finish(trees), curve))
}

pub fn fit_stage(x: &FeatureMatrix, y: &[f64], params: &BoostParams) -> Result<(BoostedEnsemble, BoostCurve)> {
    boost(x, y, params, 1, None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoStage {
    pub stage1: BoostedEnsemble,
    pub stage2: BoostedEnsemble,
}

impl TwoStage {
    /// Stage-1 prediction appended to `x`, then stage 2; clamped at 0.
    pub fn predict(&self, x: &[f64], buf: &mut Vec<f64>) -> Result<f64> {
        if x.len() + 1 != self.stage2.n_features || x.len() != self.stage1.n_features {
            return Err(Error::Shape(format!(
                "{} features for ensembles expecting {}",
                x.len(),
                self.stage1.n_features
            )));
        }
        Ok(self.predict_unchecked(x, buf))
    }

    #[inline]
    pub fn predict_unchecked(&self, x: &[f64], buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend_from_slice(x);
        buf.push(self.stage1.predict(x));
        self.stage2.predict(buf).max(0.0)
    }

    pub fn tree_count(&self) -> usize {
        self.stage1.trees.len() + self.stage2.trees.len()
    }
}

/// Budget and tree cap are split evenly between the stages.
pub fn fit_two_stage(x: &FeatureMatrix, y: &[f64], params: &BoostParams) -> Result<(TwoStage, [BoostCurve; 2])> {
    let half = BoostParams {
        budget_seconds: params.budget_seconds / 2.0,
        max_trees: params.max_trees.div_ceil(2),
        ..params.clone()
    };
    let (stage1, c1) = boost(x, y, &half, 1, None)?;
    let p1: Vec<f64> = (0..x.rows).map(|r| stage1.predict(x.row(r))).collect();
    let x2 = x.with_column(&p1);
    let (stage2, c2) = boost(&x2, y, &half, 2, Some(&p1))?;
    Ok((TwoStage { stage1, stage2 }, [c1, c2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = FeatureMatrix::new(3);
        let mut y = Vec::new();
        for _ in 0..n {
            let r = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            y.push(3.0 * r[0] + (6.0 * r[1]).sin() + 0.1 * r[2]);
            x.push(&r);
        }
        (x, y)
    }

    #[test]
    fn constant_target_needs_no_trees() {
        let (x, _) = data(50, 1);
        let (e, _) = fit_stage(&x, &[4.0; 50], &BoostParams { max_trees: 10, ..Default::default() }).unwrap();
        assert!(e.trees.is_empty());
        assert_eq!(e.predict(x.row(3)), 4.0);
    }

    #[test]
    fn training_mse_never_increases() {
        let (x, y) = data(400, 2);
        let p = BoostParams { max_trees: 60, max_depth: 4, ..Default::default() };
        let (e, c) = fit_stage(&x, &y, &p).unwrap();
        assert_eq!(e.trees.len(), 60);
        for w in c.train_mse.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn zero_budget_stage_two_returns_stage_one() {
        let (x, y) = data(200, 3);
        let p = BoostParams { max_trees: 20, max_depth: 3, ..Default::default() };
        let (s1, _) = fit_stage(&x, &y, &p).unwrap();
        let p1: Vec<f64> = (0..x.rows).map(|r| s1.predict(x.row(r))).collect();
        let (s2, _) = boost(&x.with_column(&p1), &y, &BoostParams { budget_seconds: 0.0, ..p }, 2, Some(&p1)).unwrap();
        let two = TwoStage { stage1: s1.clone(), stage2: s2 };
        let mut buf = Vec::new();
        for r in 0..x.rows {
            assert_eq!(two.predict(x.row(r), &mut buf).unwrap(), s1.predict(x.row(r)).max(0.0));
        }
        assert!(two.predict(&[0.0; 2], &mut buf).is_err());
    }
}
