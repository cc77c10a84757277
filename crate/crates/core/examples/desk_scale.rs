//! Trains a few models on a 500-node synthetic grid with all-pairs labels
//! and prints their test MRE.

use std::time::Instant;

use distidx::gbdt::{fit_gbdt_model, BoostParams, GbdtConfig, GbdtModel, GbdtScratch};
use distidx::oracle::{batch_ground_truth, GroundTruthSample};
use distidx::synthetic::{perturbed_grid, GridSpec};
use distidx::workload::{sample_all_pairs, split_train_test};
use distidx::zoo::train::mean_relative_error;
use distidx::zoo::{build_model, train_model, BuildContext};

fn main() -> distidx::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let budget: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(60.0);
    let names: Vec<String> = if args.len() > 1 { args[1..].to_vec() } else { vec!["manhattan".into(), "vdist2vec".into(), "rne".into()] };
    let g = perturbed_grid(&GridSpec::default(), 7);
    let pairs = sample_all_pairs(&g, 1 << 20)?;
    let samples = batch_ground_truth(&g, &pairs)?;
    let split = split_train_test(&samples, 0.8, 7)?;
    let mut ctx = BuildContext::new(&g, &split, 64, 64, 7);
    for name in &names {
        let start = Instant::now();
        if name == "gbdt" {
            let cfg = GbdtConfig { boost: BoostParams { budget_seconds: budget, ..Default::default() }, ..Default::default() };
            let (m, curves) = fit_gbdt_model(&ctx, &cfg)?;
            let mre = gbdt_mre(&m, &split.test.samples);
            println!(
                "gbdt           mre {:.4}  trees {}+{}  train mse {:?}  {:.1}s",
                mre,
                curves[0].train_mse.len(),
                curves[1].train_mse.len(),
                curves[1].train_mse.last(),
                start.elapsed().as_secs_f64()
            );
            continue;
        }
        let mut m = build_model(name, &mut ctx)?.model;
        let mut cfg = m.config.clone();
        cfg.budget_seconds = budget;
        if let Some(lr) = std::env::var("LR").ok().and_then(|s| s.parse().ok()) {
            cfg.lr = lr;
        }
        if std::env::var("NO_DECAY").is_ok() {
            cfg.lr_decay = false;
        }
        if let Some(a) = std::env::var("ALPHA").ok().and_then(|s| s.parse().ok()) {
            cfg.extras.alpha = a;
        }
        let curve = train_model(&mut m, &g, &split, &cfg)?;
        let mre = mean_relative_error(&m, &split.test.samples);
        println!(
            "{name:14} mre {:.4}  epochs {}  best {:?}  {:.1}s",
            mre,
            curve.epochs,
            curve.best_val_mre,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

fn gbdt_mre(m: &GbdtModel, samples: &[GroundTruthSample]) -> f64 {
    let mut s = GbdtScratch::default();
    let (mut sum, mut k) = (0.0, 0usize);
    for q in samples.iter().filter(|q| q.d > 0.0) {
        sum += (m.predict_with(q.u, q.v, &mut s) - q.d).abs() / q.d;
        k += 1;
    }
    sum / k.max(1) as f64
}
