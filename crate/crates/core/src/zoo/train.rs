//! Mini-batch training loops for every learnable model family.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gcn::BatchSubgraph;
use super::model::{edge_graph, DistanceModel, Decoder, Encoder, QueryScratch};
use super::ndist2vec::ndist2vec_epoch_pairs;
use super::path2vec::{path2vec_batch_loss, sample_neighbor_pairs};
use super::vdist2vec::{vdist2vec_adaptive_delta, ClusterTrainer};
use crate::error::{Error, Result};
use crate::graph::{NodeId, RoadNetwork};
use crate::nn::adam::{AdamState, RowAdam, SparseRowGrad};
use crate::nn::loss::{loss_and_grad, LossKind};
use crate::nn::DenseMatrix;
use crate::oracle::{batch_ground_truth, GroundTruthSample};
use crate::util::derive_seed;
use crate::workload::{canonical, SplitDataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainExtras {
    /// Neighborhood regularizer weight of the Path2vec loss.
    pub alpha: f64,
    /// Re-estimate the Huber threshold each epoch from the residual
    /// 99th percentile.
    pub adaptive_delta: bool,
    /// Opt-in cluster-based scaling with this many centers.
    pub cluster_k: Option<usize>,
    /// Fresh landmarks drawn per epoch by Ndist2vec.
    pub landmarks_per_epoch: usize,
    /// Largest pair count Ndist2vec may label for its all-pairs epoch.
    pub all_pairs_budget: u64,
}

impl Default for TrainExtras {
    fn default() -> Self {
        TrainExtras { alpha: 0.001, adaptive_delta: false, cluster_k: None, landmarks_per_epoch: 64, all_pairs_budget: 2_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub lr: f64,
    pub batch_size: usize,
    pub budget_seconds: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub keep_best_on_validation: bool,
    /// Epoch cap; with an infinite budget this makes training
    /// reproducible bit for bit.
    pub max_epochs: Option<usize>,
    pub validation_fraction: f64,
    /// Linear learning-rate decay to zero over the run.
    pub lr_decay: bool,
    pub extras: TrainExtras,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Mse,
            lr: 0.01,
            batch_size: 1024,
            budget_seconds: 300.0,
            seed: 0,
            eval_every: 1,
            keep_best_on_validation: true,
            max_epochs: None,
            validation_fraction: 0.05,
            lr_decay: true,
            extras: TrainExtras::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if !(self.budget_seconds >= 0.0) {
            return Err(Error::InvalidArgument(format!("budget {} must be nonnegative", self.budget_seconds)));
        }
        if self.budget_seconds.is_infinite() && self.max_epochs.is_none() {
            return Err(Error::InvalidArgument("an unbounded budget needs an epoch cap".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument("validation_fraction outside [0, 1)".into()));
        }
        self.loss.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub seconds: f64,
    pub train_loss: f64,
    pub val_mre: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub points: Vec<CurvePoint>,
    pub best_epoch: Option<usize>,
    pub best_val_mre: Option<f64>,
    pub epochs: usize,
}

/// A labeled pair in label units, `y = d / label_scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Labeled {
    pub u: NodeId,
    pub v: NodeId,
    pub y: f64,
}

pub fn mean_relative_error(model: &DistanceModel, samples: &[GroundTruthSample]) -> f64 {
    let mut s = QueryScratch::default();
    let mut acc = 0.0;
    let mut k = 0usize;
    for x in samples {
        if x.d > 0.0 {
            acc += (model.predict_with(x.u, x.v, &mut s) - x.d).abs() / x.d;
            k += 1;
        }
    }
    if k == 0 {
        0.0
    } else {
        acc / k as f64
    }
}

/// Per-family optimization step.
pub(crate) trait Stepper {
    /// Training samples for an epoch; defaults to the fixed train slice.
    fn epoch_samples(&mut self, _epoch: usize, _model: &DistanceModel) -> Result<Option<Vec<GroundTruthSample>>> {
        Ok(None)
    }

    /// Mean loss of one batch after the update.
    fn step(&mut self, model: &mut DistanceModel, batch: &[Labeled], rng: &mut ChaCha8Rng) -> Result<f64>;

    fn end_epoch(&mut self, _model: &mut DistanceModel) {}

    /// Multiplies every base learning rate by `scale`.
    fn set_lr_scale(&mut self, _scale: f64) {}
}

pub(crate) struct LoopSettings {
    pub budget: f64,
    pub max_epochs: Option<usize>,
    pub stream: u64,
}

/// Shared epoch loop: shuffles, batches with per-sample order swaps,
/// evaluates on the validation slice and keeps the best parameters.
pub(crate) fn fit_loop<S: Stepper>(
    model: &mut DistanceModel,
    stepper: &mut S,
    train: &[GroundTruthSample],
    val: &[GroundTruthSample],
    cfg: &TrainConfig,
    settings: &LoopSettings,
    curve: &mut TrainingCurve,
    clock: Instant,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, settings.stream));
    let start = Instant::now();
    let scale = model.label_scale;
    let mut best: Option<(f64, DistanceModel, usize)> = None;
    let epoch_base = curve.epochs;
    let mut epoch = 0;
    loop {
        if settings.max_epochs.is_some_and(|m| epoch >= m) || start.elapsed().as_secs_f64() >= settings.budget {
            break;
        }
        let fresh = stepper.epoch_samples(epoch, model)?;
        let samples = fresh.as_deref().unwrap_or(train);
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no training samples".into()));
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut out_of_time = false;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if bi > 0 && start.elapsed().as_secs_f64() >= settings.budget {
                out_of_time = true;
                break;
            }
            let batch: Vec<Labeled> = chunk
                .iter()
                .map(|&i| {
                    let s = samples[i];
                    let (u, v) = if rng.random::<bool>() { (s.v, s.u) } else { (s.u, s.v) };
                    Labeled { u, v, y: s.d / scale }
                })
                .collect();
            if cfg.lr_decay {
                stepper.set_lr_scale(1.0 - progress(settings, start, epoch, bi, order.len().div_ceil(cfg.batch_size)));
            }
            let loss = stepper.step(model, &batch, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch_base + epoch,
                    batch: bi,
                    detail: format!("{} loss {loss} on {} samples", model.name, batch.len()),
                });
            }
            loss_sum += loss;
            batches += 1;
        }
        stepper.end_epoch(model);
        epoch += 1;
        let global = epoch_base + epoch;
        let do_eval = !val.is_empty() && (epoch % cfg.eval_every.max(1) == 0 || out_of_time);
        let val_mre = if do_eval {
            model.refresh_cache()?;
            Some(mean_relative_error(model, val))
        } else {
            None
        };
        curve.points.push(CurvePoint {
            epoch: global,
            seconds: clock.elapsed().as_secs_f64(),
            train_loss: if batches > 0 { loss_sum / batches as f64 } else { f64::NAN },
            val_mre,
        });
        if let Some(m) = val_mre {
            if cfg.keep_best_on_validation && best.as_ref().is_none_or(|b| m < b.0) {
                best = Some((m, model.clone(), global));
            }
        }
        if out_of_time {
            break;
        }
    }
    curve.epochs = epoch_base + epoch;
    if let Some((m, snapshot, e)) = best {
        curve.best_val_mre = Some(m);
        curve.best_epoch = Some(e);
        *model = snapshot;
    }
    model.refresh_cache()?;
    Ok(())
}

/// Fraction of the run completed: elapsed share of the budget or of the
/// epoch cap, whichever is further along.
fn progress(settings: &LoopSettings, start: Instant, epoch: usize, batch: usize, batches: usize) -> f64 {
    let mut p: f64 = 0.0;
    if settings.budget.is_finite() && settings.budget > 0.0 {
        p = p.max(start.elapsed().as_secs_f64() / settings.budget);
    }
    if let Some(m) = settings.max_epochs {
        p = p.max((epoch as f64 + batch as f64 / batches.max(1) as f64) / m.max(1) as f64);
    }
    p.clamp(0.0, 1.0)
}

/// Holds out the validation slice, then trains `model` in place.
pub fn train_model(
    model: &mut DistanceModel,
    g: &RoadNetwork,
    split: &SplitDataset,
    cfg: &TrainConfig,
) -> Result<TrainingCurve> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut curve = TrainingCurve::default();
    model.config = cfg.clone();
    if !model.is_learnable() {
        model.trained = true;
        return Ok(curve);
    }
    let (train, val) = validation_split(&split.train.samples, cfg.validation_fraction, cfg.seed);
    if cfg.budget_seconds == 0.0 {
        model.trained = true;
        model.refresh_cache()?;
        return Ok(curve);
    }
    let settings = LoopSettings { budget: cfg.budget_seconds, max_epochs: cfg.max_epochs, stream: 0x7121 };
    match (&model.encoder, &model.decoder) {
        (Encoder::Hierarchical { .. }, _) => {
            train_rne(model, &train, &val, cfg, &mut curve, clock)?;
        }
        (Encoder::Gcn { .. }, _) => {
            let mut st = GcnStepper::new(model, g, cfg)?;
            fit_loop(model, &mut st, &train, &val, cfg, &settings, &mut curve, clock)?;
        }
        (_, Decoder::InverseDot) => {
            let mut st = InverseDotStepper::new(model, g, cfg);
            fit_loop(model, &mut st, &train, &val, cfg, &settings, &mut curve, clock)?;
        }
        (_, Decoder::MultiBranch(mb)) => {
            let learnable = mb.learnable;
            let mut st = MultiBranchStepper::new(model, cfg);
            if learnable && model.name.starts_with("ndist2vec") {
                let exclude: HashSet<(NodeId, NodeId)> = split
                    .test
                    .samples
                    .iter()
                    .chain(&val)
                    .map(|s| canonical((s.u, s.v)))
                    .collect();
                let mut nd = NdistSampler { inner: st, g: g.clone(), exclude, cfg: cfg.clone() };
                fit_loop(model, &mut nd, &train, &val, cfg, &settings, &mut curve, clock)?;
            } else {
                fit_loop(model, &mut st, &train, &val, cfg, &settings, &mut curve, clock)?;
            }
        }
        (_, Decoder::Mlp(_)) => {
            if let Some(k) = cfg.extras.cluster_k {
                let mut ct = ClusterTrainer::new(model, g, k, cfg)?;
                fit_loop(model, &mut ct, &train, &val, cfg, &settings, &mut curve, clock)?;
            } else {
                let mut st = MlpStepper::new(model, cfg);
                fit_loop(model, &mut st, &train, &val, cfg, &settings, &mut curve, clock)?;
            }
        }
        _ => {
            return Err(Error::InvalidArgument(format!("{} has no training procedure", model.name)));
        }
    }
    model.trained = true;
    model.quantize()?;
    Ok(curve)
}

/// Deterministic 5% style hold-out from the train split.
pub fn validation_split(
    train: &[GroundTruthSample],
    fraction: f64,
    seed: u64,
) -> (Vec<GroundTruthSample>, Vec<GroundTruthSample>) {
    if fraction <= 0.0 || train.len() < 2 {
        return (train.to_vec(), Vec::new());
    }
    let mut idx: Vec<usize> = (0..train.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5a11)));
    let k = ((train.len() as f64 * fraction).round() as usize).clamp(1, train.len() - 1);
    let val = idx[..k].iter().map(|&i| train[i]).collect();
    let mut rest: Vec<usize> = idx[k..].to_vec();
    rest.sort_unstable();
    (rest.into_iter().map(|i| train[i]).collect(), val)
}

/// Fused decoder inputs for `pairs`.
pub(crate) fn fused_inputs(model: &DistanceModel, pairs: &[(NodeId, NodeId)]) -> DenseMatrix {
    let op = model.fusion.expect("mlp decoder needs a fusion operator");
    let d = model.encoder.dim();
    let w = op.output_dim(d);
    let mut x = DenseMatrix::zeros(pairs.len(), w);
    let (mut hu, mut hv) = (Vec::new(), Vec::new());
    for (r, &(u, v)) in pairs.iter().enumerate() {
        model.encoder.encode_into(u, &mut hu);
        model.encoder.encode_into(v, &mut hv);
        op.fuse_into(&hu, &hv, x.row_mut(r));
    }
    x
}

/// Routes decoder input gradients back to embedding-table rows.
pub(crate) fn scatter_table_grads(
    model: &DistanceModel,
    pairs: &[(NodeId, NodeId)],
    input_grad: &DenseMatrix,
    out: &mut SparseRowGrad,
) {
    let op = model.fusion.expect("fusion");
    let Encoder::Table(t) = &model.encoder else { return };
    let d = t.d();
    let (mut gu, mut gv) = (vec![0.0; d], vec![0.0; d]);
    for (r, &(u, v)) in pairs.iter().enumerate() {
        gu.iter_mut().for_each(|x| *x = 0.0);
        gv.iter_mut().for_each(|x| *x = 0.0);
        op.backward(input_grad.row(r), t.row(u), t.row(v), &mut gu, &mut gv);
        for (a, b) in out.row_mut(u).iter_mut().zip(&gu) {
            *a += b;
        }
        for (a, b) in out.row_mut(v).iter_mut().zip(&gv) {
            *a += b;
        }
    }
}

pub(crate) struct TableOpt {
    pub adam: RowAdam,
    pub base_lr: f64,
    pub grad: SparseRowGrad,
}

impl TableOpt {
    pub fn for_model(model: &DistanceModel, lr: f64) -> Option<Self> {
        match &model.encoder {
            Encoder::Table(t) if t.trainable => {
                Some(TableOpt { adam: RowAdam::new(t.n(), t.d(), lr), base_lr: lr, grad: SparseRowGrad::new(t.n(), t.d()) })
            }
            _ => None,
        }
    }

    pub fn apply(&mut self, model: &mut DistanceModel) -> Result<()> {
        if let Encoder::Table(t) = &mut model.encoder {
            self.adam.step("embedding", &mut t.values.data, &self.grad)?;
        }
        self.grad.clear();
        Ok(())
    }
}

/// Single-MLP decoders, optionally with a learnable table and an adaptive
/// Huber threshold.
pub(crate) struct MlpStepper {
    adam: AdamState,
    base_lr: f64,
    table: Option<TableOpt>,
    loss: LossKind,
    adaptive: bool,
    residuals: Vec<f64>,
    pub delta: f64,
}

impl MlpStepper {
    pub fn new(model: &DistanceModel, cfg: &TrainConfig) -> Self {
        let Decoder::Mlp(m) = &model.decoder else { panic!("MlpStepper on a non-MLP decoder") };
        let sizes: Vec<usize> = m.params().iter().map(|p| p.len()).collect();
        let adaptive = cfg.extras.adaptive_delta;
        MlpStepper {
            adam: AdamState::new(&sizes, cfg.lr),
            base_lr: cfg.lr,
            table: TableOpt::for_model(model, cfg.lr),
            loss: if adaptive { LossKind::Huber(1.0) } else { cfg.loss },
            adaptive,
            residuals: Vec::new(),
            delta: 1.0,
        }
    }
}

impl Stepper for MlpStepper {
    fn set_lr_scale(&mut self, scale: f64) {
        self.adam.lr = self.base_lr * scale;
        if let Some(t) = &mut self.table {
            t.adam.lr = t.base_lr * scale;
        }
    }

    fn step(&mut self, model: &mut DistanceModel, batch: &[Labeled], rng: &mut ChaCha8Rng) -> Result<f64> {
        let pairs: Vec<(NodeId, NodeId)> = batch.iter().map(|s| (s.u, s.v)).collect();
        let ys: Vec<f64> = batch.iter().map(|s| s.y).collect();
        let x = fused_inputs(model, &pairs);
        let Decoder::Mlp(mlp) = &model.decoder else { unreachable!() };
        let dropout = mlp.spec.dropout > 0.0;
        let (pred, tape) = mlp.forward(&x, if dropout { Some(rng as &mut dyn RngCore) } else { None })?;
        if self.adaptive {
            self.residuals.extend(pred.iter().zip(&ys).map(|(p, y)| (p - y).abs()));
        }
        let (loss, g) = loss_and_grad(self.loss, &pred, &ys)?;
        let grads = mlp.backward(&tape, &g)?;
        if let Some(t) = &mut self.table {
            scatter_table_grads(model, &pairs, &grads.input, &mut t.grad);
        }
        let Decoder::Mlp(mlp) = &mut model.decoder else { unreachable!() };
        self.adam.step(&mut mlp.params_mut(), &grads.flat())?;
        if let Some(t) = &mut self.table {
            t.apply(model)?;
        }
        Ok(loss)
    }

    fn end_epoch(&mut self, _model: &mut DistanceModel) {
        if self.adaptive && !self.residuals.is_empty() {
            let d = vdist2vec_adaptive_delta(&self.residuals);
            if d > 0.0 {
                self.delta = d;
                self.loss = LossKind::Huber(d);
            }
            self.residuals.clear();
        }
    }
}

/// Four-branch decoders with fixed or learnable softmax aggregation.
pub(crate) struct MultiBranchStepper {
    adams: Vec<AdamState>,
    base_lr: f64,
    logits: Option<AdamState>,
    table: Option<TableOpt>,
    loss: LossKind,
}

impl MultiBranchStepper {
    pub fn new(model: &DistanceModel, cfg: &TrainConfig) -> Self {
        let Decoder::MultiBranch(mb) = &model.decoder else { panic!("MultiBranchStepper on another decoder") };
        let adams = mb
            .branches
            .iter()
            .map(|m| AdamState::new(&m.params().iter().map(|p| p.len()).collect::<Vec<_>>(), cfg.lr))
            .collect();
        MultiBranchStepper {
            adams,
            base_lr: cfg.lr,
            logits: mb.learnable.then(|| AdamState::new(&[mb.logits.len()], cfg.lr)),
            table: TableOpt::for_model(model, cfg.lr),
            loss: cfg.loss,
        }
    }
}

impl Stepper for MultiBranchStepper {
    fn set_lr_scale(&mut self, scale: f64) {
        let lr = self.base_lr * scale;
        self.adams.iter_mut().for_each(|a| a.lr = lr);
        if let Some(a) = &mut self.logits {
            a.lr = lr;
        }
        if let Some(t) = &mut self.table {
            t.adam.lr = t.base_lr * scale;
        }
    }

    fn step(&mut self, model: &mut DistanceModel, batch: &[Labeled], _rng: &mut ChaCha8Rng) -> Result<f64> {
        let pairs: Vec<(NodeId, NodeId)> = batch.iter().map(|s| (s.u, s.v)).collect();
        let ys: Vec<f64> = batch.iter().map(|s| s.y).collect();
        let x = fused_inputs(model, &pairs);
        let Decoder::MultiBranch(mb) = &model.decoder else { unreachable!() };
        let w = mb.weights();
        let mut preds = Vec::with_capacity(mb.branches.len());
        let mut tapes = Vec::with_capacity(mb.branches.len());
        for m in &mb.branches {
            let (p, t) = m.forward(&x, None)?;
            preds.push(p);
            tapes.push(t);
        }
        let b = batch.len();
        let pred: Vec<f64> = (0..b).map(|r| (0..w.len()).map(|k| w[k] * preds[k][r]).sum()).collect();
        let (loss, g) = loss_and_grad(self.loss, &pred, &ys)?;
        let mut input_grad = DenseMatrix::zeros(b, x.cols);
        let mut branch_grads = Vec::with_capacity(w.len());
        for (k, m) in mb.branches.iter().enumerate() {
            let up: Vec<f64> = g.iter().map(|gi| gi * w[k]).collect();
            let gr = m.backward(&tapes[k], &up)?;
            for (a, c) in input_grad.data.iter_mut().zip(&gr.input.data) {
                *a += c;
            }
            branch_grads.push(gr);
        }
        let logit_grad: Vec<f64> =
            (0..w.len()).map(|j| (0..b).map(|r| g[r] * w[j] * (preds[j][r] - pred[r])).sum()).collect();
        if let Some(t) = &mut self.table {
            scatter_table_grads(model, &pairs, &input_grad, &mut t.grad);
        }
        let Decoder::MultiBranch(mb) = &mut model.decoder else { unreachable!() };
        for (k, m) in mb.branches.iter_mut().enumerate() {
            self.adams[k].step(&mut m.params_mut(), &branch_grads[k].flat())?;
        }
        if let Some(a) = &mut self.logits {
            a.step(&mut [("branch_logits".into(), &mut mb.logits[..])], &[&logit_grad])?;
        }
        if let Some(t) = &mut self.table {
            t.apply(model)?;
        }
        Ok(loss)
    }
}

/// Ndist2vec: all pairs first, then fresh landmark pairs each epoch,
/// excluding held-out pairs.
struct NdistSampler {
    inner: MultiBranchStepper,
    g: RoadNetwork,
    exclude: HashSet<(NodeId, NodeId)>,
    cfg: TrainConfig,
}

impl Stepper for NdistSampler {
    fn epoch_samples(&mut self, epoch: usize, _model: &DistanceModel) -> Result<Option<Vec<GroundTruthSample>>> {
        let pairs = ndist2vec_epoch_pairs(
            epoch,
            &self.g,
            self.cfg.extras.landmarks_per_epoch,
            self.cfg.seed,
            self.cfg.extras.all_pairs_budget,
        )?;
        let keep: Vec<(NodeId, NodeId)> =
            pairs.into_iter().filter(|&p| !self.exclude.contains(&canonical(p))).collect();
        Ok(Some(batch_ground_truth(&self.g, &keep)?))
    }

    fn step(&mut self, model: &mut DistanceModel, batch: &[Labeled], rng: &mut ChaCha8Rng) -> Result<f64> {
        self.inner.step(model, batch, rng)
    }

    fn set_lr_scale(&mut self, scale: f64) {
        self.inner.set_lr_scale(scale);
    }
}

/// Inverse-dot tables: plain squared error, plus the neighborhood
/// regularizer when `alpha > 0` (Path2vec).
pub(crate) struct InverseDotStepper {
    table: TableOpt,
    alpha: f64,
    g: RoadNetwork,
}

impl InverseDotStepper {
    pub fn new(model: &DistanceModel, g: &RoadNetwork, cfg: &TrainConfig) -> Self {
        let alpha = if model.name.starts_with("path2vec") { cfg.extras.alpha } else { 0.0 };
        InverseDotStepper {
            table: TableOpt::for_model(model, cfg.lr).expect("inverse-dot models train their table"),
            alpha,
            g: g.clone(),
        }
    }
}

impl Stepper for InverseDotStepper {
    fn set_lr_scale(&mut self, scale: f64) {
        self.table.adam.lr = self.table.base_lr * scale;
    }

    fn step(&mut self, model: &mut DistanceModel, batch: &[Labeled], rng: &mut ChaCha8Rng) -> Result<f64> {
        let Encoder::Table(t) = &model.encoder else { unreachable!() };
        let nb = if self.alpha > 0.0 { sample_neighbor_pairs(&self.g, batch, rng) } else { Vec::new() };
        let loss = path2vec_batch_loss(batch, &t.values, self.alpha, &nb, &mut self.table.grad);
        self.table.apply(model)?;
        Ok(loss)
    }
}

/// Accumulates `g · ∂/∂(hu, hv) Σ|hu − hv|` into two gradient rows.
#[inline]
fn l1_backward(g: f64, hu: &[f64], hv: &[f64], gu: &mut [f64], gv: &mut [f64]) {
    for i in 0..hu.len() {
        let s = (hu[i] - hv[i]).signum() * if hu[i] == hv[i] { 0.0 } else { 1.0 };
        gu[i] += g * s;
        gv[i] -= g * s;
    }
}

/// RNE: levels are trained coarse to fine, each on an equal share of the
/// budget, with coarser levels frozen.
fn train_rne(
    model: &mut DistanceModel,
    train: &[GroundTruthSample],
    val: &[GroundTruthSample],
    cfg: &TrainConfig,
    curve: &mut TrainingCurve,
    clock: Instant,
) -> Result<()> {
    let Encoder::Hierarchical { tree, .. } = &model.encoder else { unreachable!() };
    let levels = tree.level_count();
    let share = cfg.budget_seconds / levels as f64;
    let epochs = cfg.max_epochs.map(|m| (m / levels).max(1));
    for level in 0..levels {
        let (rows, d) = {
            let Encoder::Hierarchical { tree, .. } = &model.encoder else { unreachable!() };
            (tree.counts[level], tree.dim())
        };
        let mut st = RneStepper {
            level,
            base_lr: cfg.lr,
            adam: RowAdam::new(rows, d, cfg.lr),
            grad: SparseRowGrad::new(rows, d),
            loss: cfg.loss,
            hu: vec![0.0; d],
            hv: vec![0.0; d],
        };
        let settings = LoopSettings { budget: share, max_epochs: epochs, stream: 0x2e0 + level as u64 };
        fit_loop(model, &mut st, train, val, cfg, &settings, curve, clock)?;
    }
    Ok(())
}

struct RneStepper {
    level: usize,
    base_lr: f64,
    adam: RowAdam,
    grad: SparseRowGrad,
    loss: LossKind,
    hu: Vec<f64>,
    hv: Vec<f64>,
}

impl Stepper for RneStepper {
    fn set_lr_scale(&mut self, scale: f64) {
        self.adam.lr = self.base_lr * scale;
    }

    fn step(&mut self, model: &mut DistanceModel, batch: &[Labeled], _rng: &mut ChaCha8Rng) -> Result<f64> {
        let Encoder::Hierarchical { tree, .. } = &mut model.encoder else { unreachable!() };
        let upto = self.level + 1;
        let inv = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        let assign = &tree.levels[self.level];
        for s in batch {
            tree.aggregate_into(s.u, upto, &mut self.hu);
            tree.aggregate_into(s.v, upto, &mut self.hv);
            let pred = super::decoder::decode_l1(&self.hu, &self.hv);
            let r = pred - s.y;
            total += self.loss.value(r);
            let g = self.loss.derivative(r) * inv;
            let (pu, pv) = (assign[s.u], assign[s.v]);
            if pu == pv {
                // both endpoints share this level's vector; its gradient cancels
                continue;
            }
            for i in 0..self.hu.len() {
                let diff = self.hu[i] - self.hv[i];
                self.hv[i] = if diff > 0.0 { g } else if diff < 0.0 { -g } else { 0.0 };
            }
            for (x, y) in self.grad.row_mut(pu).iter_mut().zip(&self.hv) {
                *x += y;
            }
            for (x, y) in self.grad.row_mut(pv).iter_mut().zip(&self.hv) {
                *x -= y;
            }
        }
        if !self.grad.is_empty() {
            self.adam.step(&format!("level{}.table", self.level), &mut tree.tables[self.level].data, &self.grad)?;
        }
        self.grad.clear();
        Ok(total * inv)
    }
}

/// RGCNdist2vec: GCN encoder with ℓ1 decoder on L-hop batch subgraphs.
pub(crate) struct GcnStepper {
    adam: AdamState,
    base_lr: f64,
    g: RoadNetwork,
    loss: LossKind,
}

impl GcnStepper {
    pub fn new(model: &DistanceModel, g: &RoadNetwork, cfg: &TrainConfig) -> Result<Self> {
        let Encoder::Gcn { gcn, edges, cache, .. } = &model.encoder else { unreachable!() };
        let sizes: Vec<usize> = gcn.params().iter().map(|p| p.len()).collect();
        let g = if g.n() == cache.rows { g.clone() } else { edge_graph(cache.rows, edges)? };
        Ok(GcnStepper { adam: AdamState::new(&sizes, cfg.lr), base_lr: cfg.lr, g, loss: cfg.loss })
    }
}

/// Loss and GCN gradients of one ℓ1-decoded batch on its subgraph.
pub fn gcn_batch_loss_grads(
    gcn: &super::gcn::Gcn,
    g: &RoadNetwork,
    features: &DenseMatrix,
    batch: &[Labeled],
    loss: LossKind,
) -> Result<(f64, super::gcn::GcnGrads)> {
    let endpoints: Vec<NodeId> = batch.iter().flat_map(|s| [s.u, s.v]).collect();
    let sub = BatchSubgraph::new(g, features, &endpoints, gcn.layers.len());
    let (h, tape) = gcn.forward(&sub.adj, &sub.features)?;
    let inv = 1.0 / batch.len() as f64;
    let mut up = DenseMatrix::zeros(h.rows, h.cols);
    let mut total = 0.0;
    let d = h.cols;
    let (mut gu, mut gv) = (vec![0.0; d], vec![0.0; d]);
    for (i, s) in batch.iter().enumerate() {
        let (lu, lv) = (sub.local[2 * i], sub.local[2 * i + 1]);
        let pred = super::decoder::decode_l1(h.row(lu), h.row(lv));
        let r = pred - s.y;
        total += loss.value(r);
        let gr = loss.derivative(r) * inv;
        gu.iter_mut().for_each(|x| *x = 0.0);
        gv.iter_mut().for_each(|x| *x = 0.0);
        l1_backward(gr, h.row(lu), h.row(lv), &mut gu, &mut gv);
        for (a, b) in up.row_mut(lu).iter_mut().zip(&gu) {
            *a += b;
        }
        for (a, b) in up.row_mut(lv).iter_mut().zip(&gv) {
            *a += b;
        }
    }
    Ok((total * inv, gcn.backward(&sub.adj, &tape, &up)))
}

impl Stepper for GcnStepper {
    fn set_lr_scale(&mut self, scale: f64) {
        self.adam.lr = self.base_lr * scale;
    }

    fn step(&mut self, model: &mut DistanceModel, batch: &[Labeled], _rng: &mut ChaCha8Rng) -> Result<f64> {
        let Encoder::Gcn { gcn, features, .. } = &mut model.encoder else { unreachable!() };
        let (loss, grads) = gcn_batch_loss_grads(gcn, &self.g, features, batch, self.loss)?;
        self.adam.step(&mut gcn.params_mut(), &grads.flat())?;
        Ok(loss)
    }
}
