use std::collections::BTreeSet;

use lrg_core::experiment::{
    wilcoxon_signed_rank, wilcoxon_signed_rank_with, Alternative, Method, PValue,
};
use lrg_core::renorm::{macro_node_partition, propagator_matrix, rewire, MacroNodePartition};
use lrg_core::spectral::{eigendecompose, entropy_scan, von_neumann_entropy};
use lrg_core::{laplacian, Graph};
use ndarray::Array2;
use proptest::prelude::*;

/// Random spanning tree (node `k` attaches to an earlier node) plus extra edges.
fn connected_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (3..=max_n).prop_flat_map(|n| {
        let parents: Vec<BoxedStrategy<usize>> = (1..n).map(|k| (0..k).boxed()).collect();
        let extra = prop::collection::vec((0..n, 0..n), 0..2 * n);
        (Just(n), parents, extra).prop_map(|(n, parents, extra)| {
            let tree = parents.into_iter().enumerate().map(|(k, p)| (k + 1, p));
            Graph::from_edges(n, tree.chain(extra)).unwrap()
        })
    })
}

/// Any simple graph on up to `max_n` nodes, possibly disconnected.
fn any_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |mask| {
            let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
            let edges: Vec<_> = pairs.zip(mask).filter(|(_, m)| *m).map(|(e, _)| e).collect();
            Graph::from_edges(n, edges).unwrap()
        })
    })
}

/// `e^{−τL} / Tr` by scaling and squaring of a Taylor series.
fn heat_kernel_oracle(l: &Array2<f64>, tau: f64) -> Array2<f64> {
    let n = l.nrows();
    let norm = l.iter().map(|v| v.abs()).fold(0.0, f64::max) * n as f64 * tau;
    let squarings = norm.max(1.0).log2().ceil() as i32 + 4;
    let a = l * (-tau / 2f64.powi(squarings));
    let mut sum = Array2::<f64>::eye(n);
    let mut term = Array2::<f64>::eye(n);
    for k in 1..30 {
        term = term.dot(&a) / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    let tr = sum.diag().sum();
    sum / tr
}

/// Equivalence classes of the merge relation by Floyd–Warshall closure.
fn closure_partition(rho: &Array2<f64>) -> Vec<usize> {
    let n = rho.nrows();
    let mut r = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            r[i][j] = i == j || rho[[i, j]] > rho[[i, i]].min(rho[[j, j]]);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    (0..n).map(|i| (0..n).find(|&j| r[i][j]).unwrap()).collect()
}

fn same_blocks(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

fn neighbour_set(g: &Graph, u: usize) -> BTreeSet<usize> {
    g.neighbors(u).iter().copied().collect()
}

fn check_rewiring(g: &Graph, p: &MacroNodePartition) -> Result<(), TestCaseError> {
    let out = rewire(g, p).unwrap();
    let h = out.graph();
    prop_assert_eq!(h.n_nodes(), g.n_nodes());
    for &(u, v) in h.edges() {
        prop_assert_ne!(u, v);
        prop_assert_ne!(p.macro_of(u), p.macro_of(v));
    }
    for block in p.members() {
        let first = neighbour_set(h, block[0]);
        for &u in &block[1..] {
            prop_assert_eq!(&neighbour_set(h, u), &first);
        }
    }
    if p.is_all_singleton() {
        prop_assert_eq!(h.edges(), g.edges());
    }
    Ok(())
}

/// Exact one-sided p-value by enumerating all `2^n` sign patterns.
fn enumerated_p(d: &[f64]) -> f64 {
    let nz: Vec<f64> = d.iter().copied().filter(|&v| v != 0.0).collect();
    let ranks = lrg_core::experiment::mid_ranks(&nz.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let observed: f64 = nz.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = nz.len();
    let hits = (0u32..1 << n)
        .filter(|mask| {
            let w: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
            w >= observed - 1e-9
        })
        .count();
    hits as f64 / (1u64 << n) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_limits_and_monotonicity(g in connected_graph(50)) {
        let spec = eigendecompose(&laplacian(&g)).unwrap();
        let lmax = spec.lambda_max();
        let gap = spec.spectral_gap(1e-9).unwrap();
        prop_assert!(von_neumann_entropy(&spec, 1e-6 / lmax).unwrap() >= 0.999);
        prop_assert!(von_neumann_entropy(&spec, 1e6 / gap).unwrap() <= 1e-6);
        let scan = entropy_scan(&spec, 1e-2, 1e3, 300).unwrap();
        for w in scan.entropy.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        for &c in &scan.heat_capacity {
            prop_assert!(c >= -1e-6);
        }
    }

    #[test]
    fn propagator_matches_series_oracle(
        g in connected_graph(20),
        tau in prop::sample::select(vec![0.05, 0.5, 2.0, 10.0]),
    ) {
        let l = laplacian(&g);
        let spec = eigendecompose(&l).unwrap();
        let rho = propagator_matrix(&spec, tau).unwrap();
        let oracle = heat_kernel_oracle(l.values(), tau);
        let err = (rho.values() - &oracle).iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-8, "max-abs error {err:e}");
        prop_assert!((rho.values().diag().sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn partition_equals_transitive_closure(
        g in any_graph(8),
        tau in prop::sample::select(vec![0.01, 0.3, 1.0, 3.0, 30.0]),
    ) {
        let spec = eigendecompose(&laplacian(&g)).unwrap();
        let rho = propagator_matrix(&spec, tau).unwrap();
        let p = macro_node_partition(&rho);
        prop_assert!(same_blocks(p.assignment(), &closure_partition(rho.values())));
    }

    #[test]
    fn rewiring_invariants_for_scale_partitions(
        g in connected_graph(25),
        tau in prop::sample::select(vec![0.1, 0.7, 2.0, 8.0]),
    ) {
        let spec = eigendecompose(&laplacian(&g)).unwrap();
        let p = macro_node_partition(&propagator_matrix(&spec, tau).unwrap());
        check_rewiring(&g, &p)?;
        check_rewiring(&g, &MacroNodePartition::singletons(g.n_nodes(), tau))?;
    }

    #[test]
    fn rewiring_invariants_for_arbitrary_partitions(
        g in any_graph(12),
        labels in prop::collection::vec(0usize..4, 12),
    ) {
        let p = MacroNodePartition::from_labels(&labels[..g.n_nodes()], 1.0);
        check_rewiring(&g, &p)?;
    }

    #[test]
    fn exact_wilcoxon_equals_enumeration(
        d in prop::collection::vec(prop::sample::select(vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.5]), 1..=15),
    ) {
        let zeros = vec![0.0; d.len()];
        let r = wilcoxon_signed_rank(&d, &zeros, Alternative::Greater).unwrap();
        if r.n_effective == 0 {
            prop_assert_eq!(r.method, Method::AllZeroDifferences);
        } else {
            prop_assert_eq!(r.method, Method::Exact);
            prop_assert!((r.p_value - enumerated_p(&d)).abs() < 1e-12);
        }
    }
}

/// Worst `|p_normal − p_exact|` over every sign pattern of the given
/// magnitudes, both alternatives.
fn worst_normal_error(magnitudes: &[f64]) -> f64 {
    let n = magnitudes.len();
    let zeros = vec![0.0; n];
    let mut worst = 0.0f64;
    for mask in 0u32..1 << n {
        let d: Vec<f64> = (0..n)
            .map(|k| if mask >> k & 1 == 1 { magnitudes[k] } else { -magnitudes[k] })
            .collect();
        for alt in [Alternative::Greater, Alternative::Less] {
            let exact = wilcoxon_signed_rank_with(&d, &zeros, alt, PValue::Exact).unwrap();
            let normal = wilcoxon_signed_rank_with(&d, &zeros, alt, PValue::Normal).unwrap();
            assert_eq!(normal.method, Method::Normal);
            worst = worst.max((exact.p_value - normal.p_value).abs());
        }
    }
    worst
}

#[test]
fn normal_approximation_tracks_exact_at_fifteen_untied() {
    let magnitudes: Vec<f64> = (1..=15).map(f64::from).collect();
    let worst = worst_normal_error(&magnitudes);
    assert!(worst <= 0.01, "worst |dp| = {worst}");
}

#[test]
fn normal_approximation_tracks_exact_at_fifteen_binary_scores() {
    let worst = worst_normal_error(&[1.0; 15]);
    assert!(worst <= 0.01, "worst |dp| = {worst}");
}
