use indet_core::association::{chi_square_joint, jv_contingency_joint, jv_relational, relational_encode};
use indet_core::continuous::{
    cdf_eval, construct_margins, rectangle_probability, ContinuousCoupling, DensityKind, DensitySpec,
};
use indet_core::coupling::{
    generate_feasible_margins, independence_coupling, indetermination_coupling, indetermination_projection,
    is_full_monge_default,
};
use indet_core::graph_cluster::{global_score, local_weights_independence, louvain, Partition, WeightedGraph};
use indet_core::guessing::{rho_moment, GuessingInstance, Permutation, Strategy as Guess};
use indet_core::sampler::decompose;
use indet_core::task_partition::{class_size_moment, partition_moment_bound, TaskPartition};
use indet_core::{JointDistribution, Margin, Matrix};
use proptest::prelude::*;

fn margin(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Margin> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("all zero", |w| Margin::normalized(&w).ok())
}

fn feasible() -> impl Strategy<Value = (Margin, Margin)> {
    (margin(1..=7), margin(1..=7), 0.0f64..=1.0)
        .prop_map(|(r, s, alpha)| generate_feasible_margins(alpha, &r, &s).unwrap())
}

fn joint() -> impl Strategy<Value = JointDistribution> {
    (1usize..=6, 1usize..=6)
        .prop_flat_map(|(p, q)| (Just(p), Just(q), prop::collection::vec(0.01f64..1.0, p * q)))
        .prop_map(|(p, q, raw)| {
            let total: f64 = raw.iter().sum();
            JointDistribution::new(Matrix::from_vec(p, q, raw.iter().map(|x| x / total).collect()).unwrap()).unwrap()
        })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Linear density on [a, a + w] with end values proportional to `y0`, `y1`.
fn linear_on(a: f64, w: f64, y0: f64, y1: f64) -> DensitySpec {
    let scale = 2.0 / ((y0 + y1) * w);
    DensitySpec::new(DensityKind::PiecewiseLinear, [a, a + w], vec![a, a + w], vec![y0 * scale, y1 * scale]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn couplings_keep_their_margins((mu, nu) in feasible()) {
        let plus = indetermination_coupling(&mu, &nu).unwrap();
        prop_assert!(close(plus.row_margin().weights(), mu.weights(), 1e-10));
        prop_assert!(close(plus.col_margin().weights(), nu.weights(), 1e-10));
        prop_assert!(is_full_monge_default(plus.cells()));
        let times = independence_coupling(&mu, &nu);
        prop_assert!(close(&times.cells().row_sums(), mu.weights(), 1e-12));
        prop_assert!(chi_square_joint(&times).map_or(true, |c| c.abs() < 1e-10));
        prop_assert!(jv_contingency_joint(&plus).numerator < 1e-24);
    }

    #[test]
    fn projection_is_idempotent(rows in 1usize..6, cols in 1usize..6, seed in prop::collection::vec(-2.0f64..2.0, 36)) {
        let m = Matrix::from_fn(rows, cols, |u, v| seed[u * 6 + v]);
        let once = indetermination_projection(&m);
        let twice = indetermination_projection(&once);
        prop_assert!(once.max_abs_diff(&twice).unwrap() < 1e-12);
        prop_assert!(is_full_monge_default(&once));
        prop_assert!((once.total() - m.total()).abs() < 1e-10);
    }

    #[test]
    fn sampler_decomposition_rebuilds_coupling((mu, nu) in feasible()) {
        let dec = decompose(&mu, &nu).unwrap();
        let plus = indetermination_coupling(&mu, &nu).unwrap();
        prop_assert!(dec.reconstruct().max_abs_diff(plus.cells()).unwrap() < 1e-12);
        for u in 0..mu.len() {
            let cond = dec.conditional(&mu, u);
            prop_assert!((cond.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn relational_criterion_is_a_cosine(x in prop::collection::vec(0usize..3, 3..20), y in prop::collection::vec(0usize..4, 3..20)) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        let (rx, ry) = (relational_encode(x).unwrap(), relational_encode(y).unwrap());
        prop_assert!(rx.is_symmetric() && rx.is_reflexive() && rx.is_transitive());
        if let Ok(jv) = jv_relational(&rx, &ry, 3, 4) {
            prop_assert!((-1.0..=1.0).contains(&jv));
            let swapped = jv_relational(&ry, &rx, 4, 3).unwrap();
            prop_assert!((jv - swapped).abs() < 1e-12);
        }
    }

    #[test]
    fn sorted_order_beats_any_fixed_order(pi in joint(), rho in 0.2f64..3.0, shift in 0usize..6) {
        let inst = GuessingInstance::new(pi.clone(), rho).unwrap();
        let best = rho_moment(&inst, &Guess::SortedByPosterior).unwrap();
        let p = pi.rows();
        let orders = (0..pi.cols())
            .map(|v| Permutation::new((0..p).map(|u| (u + shift + v) % p).collect()).unwrap())
            .collect();
        let other = rho_moment(&inst, &Guess::Deterministic(orders)).unwrap();
        prop_assert!(best <= other + 1e-12);
        let random = rho_moment(&inst, &Guess::RandomByPosterior).unwrap();
        prop_assert!(best <= random + 1e-12);
    }

    #[test]
    fn louvain_never_loses_to_singletons(n in 2usize..9, edges in prop::collection::vec((0usize..9, 0usize..9, 0.1f64..2.0), 1..20), seed in 0u64..50) {
        let edges: Vec<_> = edges.into_iter().map(|(i, j, w)| (i % n, j % n, w)).collect();
        let g = WeightedGraph::from_edges(n, &edges).unwrap();
        let w = local_weights_independence(&g);
        let report = louvain(&w, seed, 10).unwrap();
        let found = global_score(&w, &report.partition).unwrap();
        prop_assert!(found >= global_score(&w, &Partition::singletons(n)).unwrap() - 1e-12);
        prop_assert!(found >= global_score(&w, &Partition::single_class(n)).unwrap() - 1e-12);
    }

    #[test]
    fn class_moment_dominates_bound(mu in margin(1..=8), rho in 0.3f64..3.0, raw in prop::collection::vec(0usize..8, 8)) {
        let p = mu.len();
        let q = 1 + raw[0] % p;
        let part = TaskPartition::new(raw.iter().take(p).map(|w| w % q).collect(), q).unwrap();
        let m = class_size_moment(&mu, &part, rho).unwrap();
        prop_assert!(m >= partition_moment_bound(&mu, q, rho).unwrap() - 1e-12);
    }

    #[test]
    fn continuous_cdf_is_monotone_and_affine_invariant(
        y in (0.2f64..2.0, 0.2f64..2.0, 0.2f64..2.0, 0.2f64..2.0),
        alpha in 0.0f64..=1.0,
        a in -5.0f64..5.0, w in 0.1f64..10.0, b in -5.0f64..5.0, h in 0.1f64..10.0,
        box_ in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
    ) {
        let (f, g) = construct_margins(alpha, &linear_on(0.0, 1.0, y.0, y.1), &linear_on(0.0, 1.0, y.2, y.3)).unwrap();
        let unit = ContinuousCoupling::new(f.clone(), g.clone()).unwrap();
        let wide = ContinuousCoupling::new(
            DensitySpec::new(f.kind(), [a, a + w], vec![a, a + w], f.values().iter().map(|v| v / w).collect()).unwrap(),
            DensitySpec::new(g.kind(), [b, b + h], vec![b, b + h], g.values().iter().map(|v| v / h).collect()).unwrap(),
        ).unwrap();
        let (s0, s1) = (box_.0.min(box_.1), box_.0.max(box_.1));
        let (t0, t1) = (box_.2.min(box_.3), box_.2.max(box_.3));
        let p_unit = rectangle_probability(&unit, s0, s1, t0, t1).unwrap();
        let p_wide = rectangle_probability(&wide, a + s0 * w, a + s1 * w, b + t0 * h, b + t1 * h).unwrap();
        prop_assert!((p_unit - p_wide).abs() < 1e-10);
        prop_assert!(p_unit >= -1e-12);
        prop_assert!(cdf_eval(&unit, s0, t1).unwrap() <= cdf_eval(&unit, s1, t1).unwrap() + 1e-12);
        prop_assert!(cdf_eval(&unit, s1, t0).unwrap() <= cdf_eval(&unit, s1, t1).unwrap() + 1e-12);
    }
}
