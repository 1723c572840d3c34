use lrg_core::nn::{
    gradient_check, train, AdamConfig, EncoderConfig, EncoderKind, FeatureMatrix,
    MultiScaleModel, PreparedGraph, Split, Topology, TrainConfig,
};
use lrg_core::renorm::{rewire, MacroNodePartition};
use lrg_core::sbm::{generate_sbm, SbmConfig};
use lrg_core::Graph;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_features(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || rng.gen_range(-1.0..1.0))
}

fn check(kind: EncoderKind, g: &Graph, heads: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.n_nodes();
    let x = FeatureMatrix::dense(toy_features(n, 3, &mut rng));
    let cfg = EncoderConfig::new(kind, 3).with_dims(4, 3).with_heads(heads);
    let model = MultiScaleModel::new(&[cfg, cfg], 3, &mut rng).unwrap();
    let t = Topology::from_graph(g);
    let graphs = model.prepare(&[&t, &t]).unwrap();
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let rows: Vec<usize> = (0..n).collect();
    let report = gradient_check(&model, &x, &graphs, &labels, &rows).unwrap();
    for t in &report.tensors {
        assert!(t.max_abs_analytic > 0.0, "{} has a zero gradient", t.name);
    }
    report.max_rel_error()
}

#[test]
fn gcn_gradients_match_finite_differences_on_k3() {
    let k3 = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
    let err = check(EncoderKind::Gcn, &k3, 1, 1);
    assert!(err < 1e-4, "max relative error {err:e}");
}

#[test]
fn gat_gradients_match_finite_differences_on_p3() {
    let p3 = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let err = check(EncoderKind::Gat, &p3, 1, 2);
    assert!(err < 1e-4, "max relative error {err:e}");
    let err = check(EncoderKind::Gat, &p3, 2, 3);
    assert!(err < 1e-4, "two heads: max relative error {err:e}");
}

#[test]
fn gradients_match_on_random_toy_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..6 {
        let n = rng.gen_range(3..=8);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.4) {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::from_edges(n, edges).unwrap();
        for kind in [EncoderKind::Gcn, EncoderKind::Gat] {
            let err = check(kind, &g, 1 + trial % 2, trial as u64);
            assert!(err < 1e-4, "{kind:?} trial {trial}: {err:e}");
        }
    }
}

#[test]
fn gradients_through_block_topology() {
    let g = Graph::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
    let p = MacroNodePartition::from_labels(&[0, 0, 1, 1, 2, 3], 1.0);
    let r = rewire(&g, &p).unwrap();
    let t = Topology::from_renormalized(&r);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = FeatureMatrix::dense(toy_features(6, 3, &mut rng));
    let cfgs = [
        EncoderConfig::new(EncoderKind::Gcn, 3).with_dims(4, 2),
        EncoderConfig::new(EncoderKind::Gat, 3).with_dims(3, 2),
    ];
    let model = MultiScaleModel::new(&cfgs, 2, &mut rng).unwrap();
    let graphs = model.prepare(&[&t, &t]).unwrap();
    let labels = [0, 1, 0, 1, 1, 0];
    let report = gradient_check(&model, &x, &graphs, &labels, &[0, 2, 3, 5]).unwrap();
    assert!(report.max_rel_error() < 1e-4);
}

#[test]
fn zero_feature_column_gives_exact_zero_gradient() {
    let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut xs = toy_features(4, 3, &mut rng);
    xs.column_mut(1).fill(0.0);
    for (kind, x) in [
        (EncoderKind::Gcn, FeatureMatrix::dense(xs.clone())),
        (EncoderKind::Gat, FeatureMatrix::new(&xs)),
    ] {
        let cfg = EncoderConfig::new(kind, 3).with_dims(3, 2);
        let model = MultiScaleModel::new(&[cfg], 2, &mut rng).unwrap();
        let t = Topology::from_graph(&g);
        let graphs: Vec<PreparedGraph> = model.prepare(&[&t]).unwrap();
        let labels = [0, 1, 1, 0];
        let rows = [0, 1, 2, 3];
        let (_, grads) = model.loss_and_grad(&x, &graphs, &labels, &rows).unwrap();
        let w1 = model
            .params
            .names()
            .iter()
            .position(|n| n.ends_with(".w1") || n.ends_with("l1.head0.w"))
            .unwrap();
        assert!(grads.0[w1].row(1).iter().all(|&v| v == 0.0));

        let h = 1e-5;
        let mut probe = model.clone();
        probe.params.values_mut()[w1][[1, 0]] += h;
        let up = probe.loss(&x, &graphs, &labels, &rows).unwrap();
        probe.params.values_mut()[w1][[1, 0]] -= 2.0 * h;
        let down = probe.loss(&x, &graphs, &labels, &rows).unwrap();
        assert_eq!(up - down, 0.0);
    }
}

fn sbm_split(n: usize) -> Split {
    let mut split = Split {
        train: vec![],
        val: vec![],
        test: vec![],
    };
    for i in 0..n {
        match i % 5 {
            0..=2 => split.train.push(i),
            3 => split.val.push(i),
            _ => split.test.push(i),
        }
    }
    split
}

#[test]
fn gcn_fits_a_two_block_sbm() {
    let g = generate_sbm(&SbmConfig::two_block(60, 0.5, 0.02, 8), 7).unwrap();
    let split = sbm_split(60);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = EncoderConfig::new(EncoderKind::Gcn, 8);
    let mut model = MultiScaleModel::new(&[cfg], 2, &mut rng).unwrap();
    let t = Topology::from_graph(&g);
    let x = FeatureMatrix::new(g.features());
    let rec = train(&mut model, &[&t], &x, g.labels(), &split, &TrainConfig::default(), 7).unwrap();

    let losses: Vec<f64> = rec.epochs.iter().map(|m| m.train_loss).collect();
    assert!(losses.iter().all(|l| l.is_finite()));
    assert!(losses[..10].windows(2).all(|w| w[1] <= w[0]), "{:?}", &losses[..10]);
    let last = rec.epochs.last().unwrap();
    assert!(last.train_acc >= 0.9, "train accuracy {}", last.train_acc);
    assert_eq!(rec.epochs.len(), 1000);
}

#[test]
fn faster_learning_rate_is_honoured() {
    let g = generate_sbm(&SbmConfig::two_block(40, 0.6, 0.05, 4), 3).unwrap();
    let split = sbm_split(40);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = EncoderConfig::new(EncoderKind::Gat, 4).with_dims(8, 4);
    let mut model = MultiScaleModel::new(&[cfg], 2, &mut rng).unwrap();
    let t = Topology::from_graph(&g);
    let x = FeatureMatrix::new(g.features());
    let config = TrainConfig {
        epochs: 200,
        adam: AdamConfig {
            lr: 1e-2,
            ..Default::default()
        },
    };
    let rec = train(&mut model, &[&t], &x, g.labels(), &split, &config, 3).unwrap();
    assert!(rec.epochs.last().unwrap().train_loss < rec.epochs[0].train_loss);
}
