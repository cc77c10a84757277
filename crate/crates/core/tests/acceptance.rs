//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 3 5`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use distidx::bench::{
    self, evaluate_mre, evaluate_mre_with, measure_query_latency, pearson, per_query_latency_ns,
    BenchConfig, GraphSource, WorkloadSpec,
};
use distidx::graph::RoadNetwork;
use distidx::nn::gradcheck::gradient_check;
use distidx::nn::{loss_and_grad, Activation, DenseMatrix, LossKind, Mlp, MlpSpec, OutputActivation, SparseRowGrad};
use distidx::oracle::{batch_ground_truth, dijkstra_sssp, GroundTruthSample};
use distidx::synthetic::{l1_grid, perturbed_grid, random_connected, GridSpec};
use distidx::workload::{sample_random_pairs, select_landmarks, split_train_test, LandmarkStrategy};
use distidx::zoo::decoder::decode_landmark_min;
use distidx::zoo::gcn::{Gcn, NormAdjacency};
use distidx::zoo::model::LandmarkTable;
use distidx::zoo::path2vec::path2vec_batch_loss;
use distidx::zoo::train::{gcn_batch_loss_grads, Labeled};
use distidx::zoo::{build_model, train_model, BuildContext};
use distidx::DistanceIndex;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// All-pairs distances by Floyd–Warshall over the edge list.
fn floyd_warshall(g: &RoadNetwork) -> Vec<Vec<f64>> {
    let n = g.n();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for (u, v, w) in g.edges() {
        if w < d[u][v] {
            d[u][v] = w;
            d[v][u] = w;
        }
    }
    for k in 0..n {
        let dk = d[k].clone();
        for row in d.iter_mut() {
            let dik = row[k];
            if dik == f64::INFINITY {
                continue;
            }
            for (j, x) in row.iter_mut().enumerate() {
                let c = dik + dk[j];
                if c < *x {
                    *x = c;
                }
            }
        }
    }
    d
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..200u64 {
        let n = 2 + (seed as usize * 7) % 59;
        let g = random_connected(n, n, 10.0, seed);
        let fw = floyd_warshall(&g);
        for s in 0..n {
            let row = dijkstra_sssp(&g, s).map_err(|e| e.to_string())?;
            for t in 0..n {
                worst = worst.max(rel(row.dist[t], fw[s][t]));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst <= 1e-9 && secs < 5.0,
        format!("200 graphs, max relative gap {worst:.1e} (limit 1e-9), {secs:.2} s (limit 5 s)"),
    )
}

fn landmark_bound() -> Check {
    let g = perturbed_grid(&GridSpec { rows: 15, cols: 20, ..GridSpec::default() }, 21);
    let fw = floyd_warshall(&g);
    let lm = select_landmarks(&g, 64, LandmarkStrategy::Random, None, 5).map_err(|e| e.to_string())?;
    let table = LandmarkTable::compute(&g, &lm).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0;
    for _ in 0..10_000 {
        let (u, v) = (rng.random_range(0..g.n()), rng.random_range(0..g.n()));
        let est = decode_landmark_min(table.rows.row(u), table.rows.row(v));
        if est < fw[u][v] * (1.0 - 1e-12) {
            violations += 1;
        }
    }
    let mut worst_exact: f64 = 0.0;
    for &l in &lm {
        for v in 0..g.n() {
            let a = decode_landmark_min(table.rows.row(l), table.rows.row(v));
            let b = decode_landmark_min(table.rows.row(v), table.rows.row(l));
            worst_exact = worst_exact.max(rel(a, fw[l][v])).max(rel(b, fw[l][v]));
        }
    }
    ensure(
        violations == 0 && worst_exact <= 1e-12,
        format!(
            "n={}, 64 landmarks: {violations} violations in 10000 pairs, landmark-endpoint gap {worst_exact:.1e}",
            g.n()
        ),
    )
}

fn set_mlp(m: &mut Mlp, flat: &[f64]) {
    let mut k = 0;
    for (_, p) in m.params_mut() {
        p.copy_from_slice(&flat[k..k + p.len()]);
        k += p.len();
    }
}

fn set_gcn(m: &mut Gcn, flat: &[f64]) {
    let mut k = 0;
    for (_, p) in m.params_mut() {
        p.copy_from_slice(&flat[k..k + p.len()]);
        k += p.len();
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn gradient_checks() -> Check {
    let start = Instant::now();
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    let mut excluded = 0;

    for (hidden, out) in [
        (Activation::Relu, OutputActivation::SigmoidScaled(1.0)),
        (Activation::LeakyRelu, OutputActivation::Softplus),
        (Activation::Tanh, OutputActivation::Identity),
    ] {
        let spec = MlpSpec::new(vec![5, 8, 6, 1], hidden, out).map_err(|e| e.to_string())?;
        let mut mlp = Mlp::new(spec, distidx::nn::Init::XavierUniform, &mut rng).map_err(|e| e.to_string())?;
        let x = random_matrix(4, 5, &mut rng);
        let up: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, tape) = mlp.forward(&x, None).map_err(|e| e.to_string())?;
        let grads = mlp.backward(&tape, &up).map_err(|e| e.to_string())?;
        let analytic: Vec<f64> = grads.flat().concat();
        let params: Vec<f64> = mlp.params().concat();
        let mut probe = mlp.clone();
        let r = gradient_check(
            |p| {
                set_mlp(&mut probe, p);
                let (y, _) = probe.forward(&x, None).unwrap();
                y.iter().zip(&up).map(|(a, b)| a * b).sum()
            },
            &params,
            &analytic,
            h,
        );
        worst = worst.max(r.max_rel_error);
        excluded += r.excluded.len();
        set_mlp(&mut mlp, &params);
    }
    parts.push(format!("mlp {worst:.1e}"));

    let g = random_connected(25, 30, 5.0, 8);
    let adj = NormAdjacency::full(&g);
    let mut gcn = Gcn::new(&[2, 6, 3], Activation::LeakyRelu, &mut rng);
    let x = random_matrix(25, 2, &mut rng);
    let up = random_matrix(25, 3, &mut rng);
    let (_, tape) = gcn.forward(&adj, &x).map_err(|e| e.to_string())?;
    let analytic: Vec<f64> = gcn.backward(&adj, &tape, &up).flat().concat();
    let params: Vec<f64> = gcn.params().concat();
    let r = gradient_check(
        |p| {
            set_gcn(&mut gcn, p);
            let (hh, _) = gcn.forward(&adj, &x).unwrap();
            hh.data.iter().zip(&up.data).map(|(a, b)| a * b).sum()
        },
        &params,
        &analytic,
        h,
    );
    parts.push(format!("gcn {:.1e}", r.max_rel_error));
    worst = worst.max(r.max_rel_error);
    excluded += r.excluded.len();

    let n = 12;
    let d = 4;
    let table = random_matrix(n, d, &mut rng);
    let batch: Vec<Labeled> =
        (0..6).map(|i| Labeled { u: i, v: (i * 5 + 3) % n, y: rng.random_range(0.0..1.0) }).collect();
    let neighbors: Vec<_> = batch.iter().map(|s| (Some((s.u + 1) % n), Some((s.v + 2) % n))).collect();
    let alpha = 0.05;
    let mut sg = SparseRowGrad::new(n, d);
    path2vec_batch_loss(&batch, &table, alpha, &neighbors, &mut sg);
    let mut analytic = vec![0.0; n * d];
    for (slot, &row) in sg.rows.iter().enumerate() {
        analytic[row * d..(row + 1) * d].copy_from_slice(sg.row(slot));
    }
    let r = gradient_check(
        |p| {
            let t = DenseMatrix::from_vec(n, d, p.to_vec()).unwrap();
            path2vec_batch_loss(&batch, &t, alpha, &neighbors, &mut SparseRowGrad::new(n, d))
        },
        &table.data,
        &analytic,
        h,
    );
    parts.push(format!("path2vec {:.1e}", r.max_rel_error));
    worst = worst.max(r.max_rel_error);
    excluded += r.excluded.len();

    let pred: Vec<f64> = (0..32).map(|_| rng.random_range(-3.0..3.0)).collect();
    let target: Vec<f64> = (0..32).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut loss_worst: f64 = 0.0;
    for kind in [LossKind::Mse, LossKind::Mae, LossKind::Huber(0.7), LossKind::SmoothL1] {
        let (_, grad) = loss_and_grad(kind, &pred, &target).map_err(|e| e.to_string())?;
        let r = gradient_check(|p| loss_and_grad(kind, p, &target).unwrap().0, &pred, &grad, h);
        loss_worst = loss_worst.max(r.max_rel_error);
        excluded += r.excluded.len();
    }
    parts.push(format!("losses {loss_worst:.1e}"));
    worst = worst.max(loss_worst);

    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst < 1e-4 && secs < 30.0,
        format!("max relative error {} (limit 1e-4), {excluded} kink coordinates skipped, {secs:.2} s", parts.join(", ")),
    )
}

fn gcn_minibatch_exactness() -> Check {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let graphs = [
        random_connected(300, 200, 10.0, 12),
        perturbed_grid(&GridSpec { rows: 12, cols: 25, ..GridSpec::default() }, 2),
        random_connected(60, 10, 3.0, 13),
    ];
    for g in &graphs {
        let gcn = Gcn::new(&distidx::zoo::registry::GCN_WIDTHS, Activation::LeakyRelu, &mut rng);
        let x = distidx::zoo::model::CoordFeatures::from_graph(g).standardized_matrix();
        let batch: Vec<Labeled> = (0..32)
            .map(|_| Labeled { u: rng.random_range(0..g.n()), v: rng.random_range(0..g.n()), y: rng.random() })
            .collect();
        let (_, mini) = gcn_batch_loss_grads(&gcn, g, &x, &batch, LossKind::Mse).map_err(|e| e.to_string())?;

        // full-graph reference: forward on every node, same loss
        let adj = NormAdjacency::full(g);
        let (h, tape) = gcn.forward(&adj, &x).map_err(|e| e.to_string())?;
        let mut up = DenseMatrix::zeros(h.rows, h.cols);
        let inv = 1.0 / batch.len() as f64;
        for s in &batch {
            let (hu, hv) = (h.row(s.u).to_vec(), h.row(s.v).to_vec());
            let pred: f64 = hu.iter().zip(&hv).map(|(a, b)| (a - b).abs()).sum();
            let gr = 2.0 * (pred - s.y) * inv;
            for k in 0..h.cols {
                let sg = if hu[k] > hv[k] {
                    1.0
                } else if hu[k] < hv[k] {
                    -1.0
                } else {
                    0.0
                };
                up.row_mut(s.u)[k] += gr * sg;
                up.row_mut(s.v)[k] -= gr * sg;
            }
        }
        let full = gcn.backward(&adj, &tape, &up);
        for (a, b) in mini.flat().concat().iter().zip(full.flat().concat()) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-10, format!("3 graphs with n ≤ 300, max per-parameter gap {worst:.1e} (limit 1e-10)"))
}

fn loss_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..1_000_000 {
        let r: f64 = rng.random_range(-4.0..4.0);
        let (a, b) = (LossKind::SmoothL1, LossKind::Huber(1.0));
        if a.value(r) != b.value(r) || a.derivative(r) != b.derivative(r) {
            mismatches += 1;
        }
    }
    let mut jump: f64 = 0.0;
    for delta in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let k = LossKind::Huber(delta);
        for side in [1.0, -1.0] {
            let eps = 1e-14 * delta;
            let (lo, hi) = (side * (delta - eps), side * (delta + eps));
            jump = jump.max((k.value(hi) - k.value(lo)).abs());
            jump = jump.max((k.derivative(hi) - k.derivative(lo)).abs());
        }
    }
    let delta = 2.5;
    let pred: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target: Vec<f64> = pred.iter().map(|p| p + rng.random_range(-delta..delta)).collect();
    let (hub, _) = loss_and_grad(LossKind::Huber(delta), &pred, &target).map_err(|e| e.to_string())?;
    let (mse, _) = loss_and_grad(LossKind::Mse, &pred, &target).map_err(|e| e.to_string())?;
    let half_gap = (hub - 0.5 * mse).abs();
    ensure(
        mismatches == 0 && jump <= 1e-12 && half_gap <= 1e-15 * mse,
        format!(
            "smooth_l1 vs huber(1): {mismatches} mismatches in 1e6; boundary jump {jump:.1e}; huber − mse/2 = {half_gap:.1e}"
        ),
    )
}

fn all_pairs_data(g: &RoadNetwork, cfg: &BenchConfig) -> Result<bench::Prepared, String> {
    bench::prepare_graph(g, cfg).map_err(|e| e.to_string())
}

fn desk_scale_learning() -> Check {
    let g = perturbed_grid(&GridSpec::default(), 7);
    let cfg = BenchConfig {
        workload: WorkloadSpec::AllPairs { budget: 200_000 },
        seed: 7,
        budget_seconds: 60.0,
        dim: 64,
        landmarks: 64,
        ..BenchConfig::default()
    };
    let data = all_pairs_data(&g, &cfg)?;
    let fw = floyd_warshall(&data.graph);
    let label_gap = data.samples.iter().map(|s| rel(s.d, fw[s.u][s.v])).fold(0.0, f64::max);
    if label_gap > 1e-9 {
        return Err(format!("labels disagree with the brute-force baseline by {label_gap:.1e}"));
    }
    let mut ctx = bench::context(&cfg, &data);
    let mut mres = Vec::new();
    for name in ["manhattan", "vdist2vec", "rne", "gbdt"] {
        let t = bench::train_index(name, &cfg, &mut ctx).map_err(|e| format!("{name}: {e}"))?;
        mres.push((name, evaluate_mre(&t.index, &data.split.test.samples).map_err(|e| e.to_string())?));
    }
    let base = mres[0].1;
    let limits = [("vdist2vec", 0.10), ("rne", 0.10), ("gbdt", 0.05)];
    let ok = limits.iter().all(|&(n, lim)| {
        let m = mres.iter().find(|x| x.0 == n).unwrap().1;
        m < lim && m < base
    });
    let text: Vec<String> = mres.iter().map(|(n, m)| format!("{n} {:.2}%", m * 100.0)).collect();
    ensure(
        ok,
        format!(
            "n={}, {} train pairs, 60 s each: {} (limits vdist2vec 10%, rne 10%, gbdt 5%, all below manhattan)",
            data.graph.n(),
            data.split.train.len(),
            text.join(", ")
        ),
    )
}

fn manhattan_exactness() -> Check {
    let g = l1_grid(12, 15);
    let cfg = BenchConfig { workload: WorkloadSpec::AllPairs { budget: 100_000 }, ..BenchConfig::default() };
    let data = all_pairs_data(&g, &cfg)?;
    let mut ctx = bench::context(&cfg, &data);
    let t = bench::train_index("manhattan", &cfg, &mut ctx).map_err(|e| e.to_string())?;
    let all = [&data.split.train.samples[..], &data.split.test.samples[..]].concat();
    let m = evaluate_mre(&t.index, &all).map_err(|e| e.to_string())?;
    ensure(m < 1e-9, format!("12×15 L1 grid, all {} pairs: MRE {m:.2e} (limit 1e-9)", all.len()))
}

fn latency_properties() -> Check {
    let g = perturbed_grid(&GridSpec::default(), 7);
    let cfg = BenchConfig {
        workload: WorkloadSpec::Random { count: 20_000 },
        seed: 3,
        budget_seconds: 2.0,
        dim: 64,
        landmarks: 64,
        trees: Some(50),
        ..BenchConfig::default()
    };
    let data = all_pairs_data(&g, &cfg)?;
    let n = data.graph.n();
    let rows: Vec<Vec<f64>> = (0..n).map(|s| dijkstra_sssp(&data.graph, s).unwrap().dist).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let queries: Vec<(usize, usize)> = (0..100_000)
        .map(|_| loop {
            let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
            if u != v {
                break (u, v);
            }
        })
        .collect();
    let truth: Vec<f64> = queries.iter().map(|&(u, v)| rows[u][v]).collect();
    let mut ctx = bench::context(&cfg, &data);
    let mut worst = ("", 0.0f64);
    let mut means = Vec::new();
    for &name in distidx::zoo::MODEL_NAMES {
        let t = bench::train_index(name, &cfg, &mut ctx).map_err(|e| format!("{name}: {e}"))?;
        if let DistanceIndex::Neural(m) = &t.index {
            if !m.is_learnable() {
                continue;
            }
        }
        let ns = per_query_latency_ns(&t.index, &queries, 2);
        let r = pearson(&ns, &truth);
        if r.abs() >= worst.1.abs() {
            worst = (name, r);
        }
        if ["landmarknn", "rne", "rgcndist2vec", "path2vec", "aneda"].contains(&name) {
            let lat = measure_query_latency(&t.index, &queries[..20_000], 1, 3).map_err(|e| e.to_string())?;
            means.push((name, lat.mean_us));
        }
    }
    let mlp = means.iter().find(|m| m.0 == "landmarknn").unwrap().1;
    let faster = means.iter().filter(|m| m.0 != "landmarknn").all(|m| m.1 < mlp);
    let text: Vec<String> = means.iter().map(|(n, m)| format!("{n} {:.3} µs", m)).collect();
    ensure(
        worst.1.abs() < 0.1 && faster,
        format!(
            "largest |r| {:.3} ({}) over 1e5 queries (limit 0.1); mean latency {}",
            worst.1.abs(),
            worst.0,
            text.join(", ")
        ),
    )
}

fn index_size_law() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for (rows, cols) in [(25, 40), (100, 100)] {
        let g = perturbed_grid(&GridSpec { rows, cols, ..GridSpec::default() }, 1);
        let n = g.n();
        let pairs = sample_random_pairs(&g, 2000, 1).map_err(|e| e.to_string())?;
        let samples = batch_ground_truth(&g, &pairs).map_err(|e| e.to_string())?;
        let split = split_train_test(&samples, 0.8, 1).map_err(|e| e.to_string())?;
        let mut sizes = Vec::new();
        for d in [16usize, 64] {
            let mut ctx = BuildContext::new(&g, &split, d, 16, 1);
            ctx.parallel_pretrain = true;
            for name in ["path2vec", "aneda"] {
                let mut m = build_model(name, &mut ctx).map_err(|e| e.to_string())?.model;
                let tc = distidx::zoo::TrainConfig { budget_seconds: 0.0, ..m.config.clone() };
                train_model(&mut m, &g, &split, &tc).map_err(|e| e.to_string())?;
                let bytes = DistanceIndex::from(m).index_bytes() as f64;
                let law = (n * d * 4) as f64;
                let ratio = bytes / law;
                ok &= (1.0..=1.1).contains(&ratio);
                lines.push(format!("{name} n={n} d={d} {ratio:.4}×"));
                if d == 64 && name == "path2vec" {
                    sizes.push(bytes);
                }
            }
        }
        let mut ctx = BuildContext::new(&g, &split, 64, 16, 1);
        let man = DistanceIndex::from(build_model("manhattan", &mut ctx).map_err(|e| e.to_string())?.model);
        let shrink = sizes[0] / man.index_bytes() as f64;
        ok &= shrink >= 20.0;
        lines.push(format!("dim-2 vs dim-64 at n={n} {shrink:.1}×"));
    }
    ensure(ok, format!("bytes / (n·d·4): {} (limits 1.0 to 1.1; shrink ≥ 20×)", lines.join(", ")))
}

fn determinism() -> Check {
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let mut bytes = Vec::new();
    for d in &dirs {
        let cfg = BenchConfig {
            graph: GraphSource::Grid { rows: 8, cols: 9, seed: 3 },
            workload: WorkloadSpec::AllPairs { budget: 10_000 },
            models: distidx::zoo::MODEL_NAMES.iter().map(|s| s.to_string()).collect(),
            seed: 17,
            budget_seconds: 10.0,
            dim: 8,
            landmarks: 8,
            serial: true,
            epochs: Some(2),
            trees: Some(10),
            latency_queries: 1000,
            latency_repeats: 1,
            out_dir: Some(d.path().to_path_buf()),
            ..BenchConfig::default()
        };
        let report = bench::run_benchmark(&cfg).map_err(|e| e.to_string())?;
        if !report.all_ok() {
            let failed: Vec<_> = report.reports.iter().filter(|r| !r.is_ok()).map(|r| (&r.model, &r.error)).collect();
            return Err(format!("failed models: {failed:?}"));
        }
        bytes.push(std::fs::read(d.path().join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure(
        bytes[0] == bytes[1],
        format!("{} models, serial mode: report.json {} bytes, identical: {}", distidx::zoo::MODEL_NAMES.len(), bytes[0].len(), bytes[0] == bytes[1]),
    )
}

fn mre_arithmetic() -> Check {
    let s = |u, v, d| GroundTruthSample { u, v, d };
    let one = [s(0, 1, 10.0)];
    let a = evaluate_mre_with(&one, |_, _| 9.0).map_err(|e| e.to_string())?;
    let exact = [s(0, 1, 3.5), s(1, 2, 7.25), s(0, 2, 10.75)];
    let b = evaluate_mre_with(&exact, |u, v| exact.iter().find(|q| q.u == u && q.v == v).unwrap().d)
        .map_err(|e| e.to_string())?;
    let two = [s(0, 1, 10.0), s(0, 2, 10.0)];
    let c = evaluate_mre_with(&two, |_, v| if v == 1 { 12.0 } else { 5.0 }).map_err(|e| e.to_string())?;
    let empty = evaluate_mre_with(&[], |_, _| 0.0).is_err();
    ensure(
        a == 0.10 && b == 0.0 && c == 0.35 && empty,
        format!("cases give {a}, {b}, {c} (expected 0.1, 0, 0.35); empty set rejected: {empty}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("landmark bound", landmark_bound),
        ("gradient checks", gradient_checks),
        ("gcn minibatch exactness", gcn_minibatch_exactness),
        ("loss identities", loss_identities),
        ("desk-scale learning", desk_scale_learning),
        ("manhattan exactness", manhattan_exactness),
        ("latency properties", latency_properties),
        ("index-size law", index_size_law),
        ("determinism", determinism),
        ("mre arithmetic", mre_arithmetic),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {id:>2} PASS  {name}: {msg} [{secs:.1} s]"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {msg} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
