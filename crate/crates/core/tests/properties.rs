use proptest::prelude::*;

use distidx::bench::mre;
use distidx::gbdt::{fit_gbdt_model, BoostParams, GbdtConfig};
use distidx::oracle::{batch_ground_truth, dijkstra_sssp};
use distidx::synthetic::{perturbed_grid, random_connected, GridSpec};
use distidx::workload::{sample_random_pairs, select_landmarks, split_train_test, LandmarkStrategy};
use distidx::zoo::decoder::decode_landmark_min;
use distidx::zoo::model::LandmarkTable;
use distidx::zoo::{build_model, train_model, BuildContext, TrainConfig};
use distidx::DistanceIndex;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_pairs_are_distinct_and_canonical(n in 2usize..40, count in 0usize..900, seed in any::<u64>()) {
        let g = random_connected(n, n, 5.0, seed);
        let pairs = sample_random_pairs(&g, count, seed).unwrap();
        prop_assert_eq!(pairs.len(), count.min(n * (n - 1) / 2));
        prop_assert!(pairs.iter().all(|&(u, v)| u < v && v < n));
        prop_assert!(pairs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mre_is_nonnegative_and_zero_on_truth(truth in prop::collection::vec(0.1f64..1e6, 1..50), noise in prop::collection::vec(-1e3f64..1e3, 50)) {
        prop_assert_eq!(mre(&truth, &truth).unwrap(), 0.0);
        let pred: Vec<f64> = truth.iter().zip(&noise).map(|(t, e)| t + e).collect();
        prop_assert!(mre(&pred, &truth).unwrap() >= 0.0);
    }

    #[test]
    fn dijkstra_is_symmetric_and_satisfies_triangle(n in 2usize..30, seed in any::<u64>()) {
        let g = random_connected(n, n / 2, 10.0, seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|s| dijkstra_sssp(&g, s).unwrap().dist).collect();
        for a in 0..n {
            prop_assert_eq!(rows[a][a], 0.0);
            for b in 0..n {
                prop_assert!((rows[a][b] - rows[b][a]).abs() <= 1e-9 * rows[a][b].max(1.0));
                for c in 0..n {
                    prop_assert!(rows[a][c] <= rows[a][b] + rows[b][c] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn landmark_estimate_never_undershoots(n in 3usize..40, l in 1usize..6, seed in any::<u64>()) {
        let g = random_connected(n, n, 10.0, seed);
        let lm = select_landmarks(&g, l.min(n), LandmarkStrategy::Random, None, seed).unwrap();
        let t = LandmarkTable::compute(&g, &lm).unwrap();
        for u in 0..n {
            let exact = dijkstra_sssp(&g, u).unwrap().dist;
            for (v, &d) in exact.iter().enumerate() {
                prop_assert!(decode_landmark_min(t.rows.row(u), t.rows.row(v)) >= d * (1.0 - 1e-12));
            }
        }
    }
}

fn small_split(seed: u64) -> (distidx::graph::RoadNetwork, distidx::workload::SplitDataset) {
    let g = perturbed_grid(&GridSpec { rows: 6, cols: 7, ..GridSpec::default() }, seed);
    let pairs = sample_random_pairs(&g, 400, seed).unwrap();
    let samples = batch_ground_truth(&g, &pairs).unwrap();
    let split = split_train_test(&samples, 0.8, seed).unwrap();
    (g, split)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), which in 0usize..5) {
        let (g, split) = small_split(seed);
        let mut ctx = BuildContext::new(&g, &split, 8, 6, seed);
        let index: DistanceIndex = match which {
            0..=3 => {
                let name = ["landmark_rn", "geodnn", "rne", "vdist2vec"][which];
                let mut m = build_model(name, &mut ctx).unwrap().model;
                let cfg = TrainConfig { budget_seconds: 10.0, max_epochs: Some(1), ..m.config.clone() };
                train_model(&mut m, &g, &split, &cfg).unwrap();
                m.into()
            }
            _ => {
                let cfg = GbdtConfig {
                    landmarks: 6,
                    boost: BoostParams { max_trees: 20, max_depth: 4, ..BoostParams::default() },
                    ..GbdtConfig::default()
                };
                fit_gbdt_model(&ctx, &cfg).unwrap().0.into()
            }
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        index.save(&path).unwrap();
        let back = DistanceIndex::load(&path, Some(&g.content_hash())).unwrap();
        prop_assert_eq!(back.name(), index.name());
        prop_assert_eq!(back.index_bytes(), index.index_bytes());
        for u in 0..g.n() {
            for v in (0..g.n()).step_by(5) {
                prop_assert_eq!(back.predict(u, v).unwrap(), index.predict(u, v).unwrap());
            }
        }
        prop_assert!(DistanceIndex::load(&path, Some("not-this-graph")).is_err());
    }
}
