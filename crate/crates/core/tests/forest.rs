use armsearch::counter::SampleCounter;
use armsearch::data::{linear_regression, sparse_coefficients, step_classification, Matrix};
use armsearch::forest::*;
use armsearch::rng::stream;
use armsearch::Error;
use proptest::prelude::*;

fn gini(labels: &[usize], k: usize) -> f64 {
    let n = labels.len() as f64;
    let mut c = vec![0.0; k];
    for &l in labels {
        c[l] += 1.0;
    }
    1.0 - c.iter().map(|v| (v / n) * (v / n)).sum::<f64>()
}

fn variance(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let m = ys.iter().sum::<f64>() / n;
    ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / n
}

/// Best `(feature, edge, objective)` by partitioning rows directly.
fn brute_split(
    x: &Matrix,
    y: &Targets,
    cands: &[(usize, BinEdges)],
) -> Option<(usize, usize, f64)> {
    let n = x.rows();
    let mut best: Option<(usize, usize, f64)> = None;
    for (f, e) in cands {
        for edge in 1..e.n_bins() {
            let left: Vec<usize> = (0..n).filter(|&r| e.bin(x.get(r, *f)) < edge).collect();
            let right: Vec<usize> = (0..n).filter(|&r| e.bin(x.get(r, *f)) >= edge).collect();
            let side = |rows: &[usize]| -> f64 {
                if rows.is_empty() {
                    return 0.0;
                }
                let w = rows.len() as f64 / n as f64;
                w * match y {
                    Targets::Classes { labels, n_classes } => gini(
                        &rows.iter().map(|&r| labels[r]).collect::<Vec<_>>(),
                        *n_classes,
                    ),
                    Targets::Real(v) => variance(&rows.iter().map(|&r| v[r]).collect::<Vec<_>>()),
                }
            };
            let obj = side(&left) + side(&right);
            if best.is_none_or(|b| obj < b.2 - 1e-12) {
                best = Some((*f, edge, obj));
            }
        }
    }
    best
}

fn arb_classification() -> impl Strategy<Value = (Matrix, Targets)> {
    (8usize..60, 1usize..4, 2usize..4).prop_flat_map(|(n, m, k)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * m),
            prop::collection::vec(0..k, n),
        )
            .prop_map(move |(xs, ys)| {
                (
                    Matrix::new(n, m, xs).unwrap(),
                    Targets::Classes {
                        labels: ys,
                        n_classes: k,
                    },
                )
            })
    })
}

#[test]
fn impurity_hand_values() {
    assert_eq!(
        impurity(Impurity::Gini, Summary::Counts(&[1.0, 1.0, 2.0])).unwrap(),
        0.625
    );
    assert!(
        (impurity(Impurity::Entropy, Summary::Counts(&[1.0, 1.0, 2.0])).unwrap() - 1.5).abs()
            < 1e-12
    );
    let m = Moments::of(&[0.0, 2.0, 4.0]);
    assert!((impurity(Impurity::Mse, Summary::Moments(m)).unwrap() - 8.0 / 3.0).abs() < 1e-12);
    assert!(impurity(Impurity::Gini, Summary::Counts(&[0.0, 0.0])).is_err());
    assert!(impurity(Impurity::Mse, Summary::Counts(&[1.0])).is_err());
    let o = split_objective(
        Impurity::Gini,
        Summary::Counts(&[2.0, 0.0]),
        Summary::Counts(&[1.0, 1.0]),
    )
    .unwrap();
    assert_eq!(o, 0.25);
}

#[test]
fn z_value_quantiles() {
    assert!((z_value(0.05) - 1.959964).abs() < 1e-5);
    assert_eq!(z_value(0.0), f64::INFINITY);
    assert_eq!(z_value(1.0), 0.0);
}

#[test]
fn gini_gradient_matches_finite_differences() {
    let tl = [0.1, 0.3];
    let tr = [0.4, 0.2];
    let g = objective_gradient(Impurity::Gini, &tl, &tr);
    let f = |v: &[f64]| {
        split_objective(
            Impurity::Gini,
            Summary::Counts(&v[..2]),
            Summary::Counts(&v[2..]),
        )
        .unwrap()
    };
    let base = [0.1, 0.3, 0.4, 0.2];
    // The objective on proportions is scale-free, so its gradient is `g`
    // less the component along the all-ones direction.
    let shift: f64 = base.iter().zip(&g).map(|(t, gi)| t * gi).sum();
    for i in 0..4 {
        let mut p = base;
        let h = 1e-6;
        p[i] += h;
        let fd = (f(&p) - f(&base)) / h;
        assert!(
            (fd - (g[i] - shift)).abs() < 1e-4,
            "cell {i}: {fd} vs {}",
            g[i] - shift
        );
    }
}

#[test]
fn bin_edges_cover_the_range() {
    let e = BinEdges::equal_width(0.0, 1.0, 4).unwrap();
    assert_eq!(e.n_bins(), 4);
    assert_eq!(
        (
            e.bin(-1.0),
            e.bin(0.0),
            e.bin(0.25),
            e.bin(0.99),
            e.bin(1.0),
            e.bin(7.0)
        ),
        (0, 0, 1, 3, 3, 3)
    );
    assert!(BinEdges::equal_width(1.0, 1.0, 4).is_none());
    let mut rng = stream(1, 0);
    let r = BinEdges::random(0.0, 10.0, 5, &mut rng).unwrap();
    assert!(r.edges().windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn exact_split_finds_the_step() {
    let (x, y) = step_classification(2000, 5, 0.5, 0.0, 3).unwrap();
    let t = Targets::Classes {
        labels: y,
        n_classes: 2,
    };
    let rows: Vec<usize> = (0..2000).collect();
    let node = NodeView {
        x: &x,
        y: &t,
        rows: &rows,
    };
    let c = SampleCounter::new();
    let cands = node_edges(node, &[0, 1, 2, 3, 4], 10, None);
    let out = split_exact(node, &cands, Impurity::Gini, &c).unwrap();
    let ch = out.choice.unwrap();
    assert_eq!((ch.feature, ch.edge), (0, 5));
    assert_eq!(c.get(), 2000 * 5);
    assert!(ch.objective < 0.01);
}

#[test]
fn splitters_honor_the_budget() {
    let (x, y) = step_classification(500, 3, 0.5, 0.1, 3).unwrap();
    let t = Targets::Classes {
        labels: y,
        n_classes: 2,
    };
    let rows: Vec<usize> = (0..500).collect();
    let node = NodeView {
        x: &x,
        y: &t,
        rows: &rows,
    };
    let cands = node_edges(node, &[0, 1, 2], 10, None);
    let c = SampleCounter::with_budget(100);
    assert!(matches!(
        split_exact(node, &cands, Impurity::Gini, &c),
        Err(Error::BudgetExhausted { .. })
    ));
}

#[test]
fn regression_mabsplit_agrees_with_exact() {
    let (x, y) = linear_regression(50_000, &sparse_coefficients(8), 1.0, 2).unwrap();
    let t = Targets::Real(y);
    let rows: Vec<usize> = (0..50_000).collect();
    let node = NodeView {
        x: &x,
        y: &t,
        rows: &rows,
    };
    let feats: Vec<usize> = (0..8).collect();
    let cands = node_edges(node, &feats, 10, None);
    let ce = SampleCounter::new();
    let e = split_exact(node, &cands, Impurity::Mse, &ce)
        .unwrap()
        .choice
        .unwrap();
    let cm = SampleCounter::new();
    let mut rng = stream(2, 0);
    let m = mabsplit(
        node,
        &cands,
        Impurity::Mse,
        &MabConfig::default(),
        &mut rng,
        &cm,
    )
    .unwrap();
    let mc = m.choice.unwrap();
    assert_eq!((mc.feature, mc.edge), (e.feature, e.edge));
    assert!(cm.get() < ce.get() / 2);
}

fn small_forest(variant: Variant, splitter: Splitter) -> (Forest, TabularDataset) {
    let (x, y) = step_classification(3000, 4, 0.5, 0.05, 9).unwrap();
    let data = TabularDataset::classification(x, y).unwrap();
    let cfg = ForestConfig {
        variant,
        splitter,
        n_trees: 5,
        max_depth: Some(4),
        ..Default::default()
    };
    (fit_forest(&cfg, &data, 9).unwrap(), data)
}

#[test]
fn every_variant_learns_the_step() {
    for variant in [
        Variant::RandomForest,
        Variant::ExtraTrees,
        Variant::RandomPatches,
    ] {
        for splitter in [Splitter::Exact, Splitter::MabSplit] {
            let (f, data) = small_forest(variant, splitter);
            assert_eq!(f.n_trees_completed, 5);
            let acc = f.evaluate(&data).unwrap();
            assert!(acc > 0.9, "{variant:?} {splitter:?} accuracy {acc}");
            assert!(f.trees.iter().all(|t| t.depth() <= 4));
        }
    }
}

#[test]
fn importances_rank_the_informative_feature() {
    let (f, data) = small_forest(Variant::RandomForest, Splitter::MabSplit);
    let mdi = f.mdi_importances();
    // a tree that stays a single leaf adds nothing
    let s = mdi.iter().sum::<f64>();
    assert!(s > 0.0 && s <= 1.0 + 1e-9);
    assert!(mdi[0] > 0.5);
    let perm = f.permutation_importances(&data, 1).unwrap();
    assert!(perm[0] > perm[1] && perm[0] > perm[2]);
    let stab = feature_stability(&[mdi.clone(), mdi], 1).unwrap();
    assert_eq!(stab, 1.0);
}

#[test]
fn regression_forest_beats_the_mean() {
    let (x, y) = linear_regression(5000, &sparse_coefficients(5), 0.5, 4).unwrap();
    let var = variance(&y);
    let data = TabularDataset::regression(x, y).unwrap();
    let cfg = ForestConfig {
        impurity: Impurity::Mse,
        splitter: Splitter::MabSplit,
        n_trees: 5,
        max_depth: Some(6),
        ..Default::default()
    };
    let f = fit_forest(&cfg, &data, 4).unwrap();
    assert!(f.evaluate(&data).unwrap() < 0.5 * var);
    assert!(f.predict_proba(data.x.row(0)).is_err());
}

#[test]
fn budget_stops_training() {
    let (x, y) = step_classification(5000, 4, 0.5, 0.1, 1).unwrap();
    let data = TabularDataset::classification(x, y).unwrap();
    let cfg = ForestConfig {
        n_trees: 50,
        budget: Some(60_000),
        ..Default::default()
    };
    let f = fit_forest(&cfg, &data, 1).unwrap();
    assert!(f.n_trees_completed < 50);
    assert!(f.n_insertions <= 60_000);
    assert!(f.trees.iter().filter(|t| !t.complete).count() <= 1);
}

#[test]
fn forest_json_round_trip_and_rejects_bad_models() {
    let (f, data) = small_forest(Variant::RandomForest, Splitter::Exact);
    let text = f.to_json().unwrap();
    let back = Forest::from_json(&text).unwrap();
    for r in 0..50 {
        assert_eq!(
            back.predict(data.x.row(r)).unwrap(),
            f.predict(data.x.row(r)).unwrap()
        );
    }
    assert!(back.predict(&[1.0]).is_err());

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let nodes = v["trees"][0]["nodes"].as_array().unwrap().clone();
    let split = nodes
        .iter()
        .position(|n| n.get("Split").is_some() || n.get("split").is_some());
    if let Some(i) = split {
        let key = if nodes[i].get("Split").is_some() {
            "Split"
        } else {
            "split"
        };
        v["trees"][0]["nodes"][i][key]["left"] = serde_json::json!(0);
        assert!(Forest::from_json(&v.to_string()).is_err());
    }
    assert!(Forest::from_json("[]").is_err());
}

#[test]
fn config_validation() {
    let (x, y) = step_classification(100, 2, 0.5, 0.0, 1).unwrap();
    let data = TabularDataset::classification(x, y).unwrap();
    let bad = [
        ForestConfig {
            n_trees: 0,
            ..Default::default()
        },
        ForestConfig {
            bins: 1,
            ..Default::default()
        },
        ForestConfig {
            alpha_n: 0.0,
            ..Default::default()
        },
        ForestConfig {
            impurity: Impurity::Mse,
            ..Default::default()
        },
        ForestConfig {
            delta: 2.0,
            ..Default::default()
        },
    ];
    for cfg in bad {
        assert!(fit_forest(&cfg, &data, 0).is_err(), "{cfg:?}");
    }
    assert!("rf".parse::<Variant>().is_ok() && "xx".parse::<Variant>().is_err());
    assert!(TabularDataset::classification(Matrix::zeros(2, 1), vec![0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_split_matches_brute_force((x, y) in arb_classification(), bins in 2usize..6) {
        let rows: Vec<usize> = (0..x.rows()).collect();
        let feats: Vec<usize> = (0..x.cols()).collect();
        let node = NodeView { x: &x, y: &y, rows: &rows };
        let cands = node_edges(node, &feats, bins, None);
        let out = split_exact(node, &cands, Impurity::Gini, &SampleCounter::new()).unwrap();
        let brute = brute_split(&x, &y, &cands);
        match (out.choice, brute) {
            (Some(c), Some(b)) => prop_assert!((c.objective - b.2).abs() < 1e-9),
            (None, None) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn full_batch_mabsplit_is_exact((x, y) in arb_classification(), seed in any::<u64>()) {
        // One batch holding the whole node gives exact histograms.
        let rows: Vec<usize> = (0..x.rows()).collect();
        let feats: Vec<usize> = (0..x.cols()).collect();
        let node = NodeView { x: &x, y: &y, rows: &rows };
        let cands = node_edges(node, &feats, 4, None);
        let exact = split_exact(node, &cands, Impurity::Gini, &SampleCounter::new()).unwrap();
        let cfg = MabConfig { batch_size: x.rows(), ..Default::default() };
        let m = mabsplit(node, &cands, Impurity::Gini, &cfg, &mut stream(seed, 0), &SampleCounter::new()).unwrap();
        match (exact.choice, m.choice) {
            (Some(e), Some(b)) => prop_assert!((e.objective - b.objective).abs() < 1e-9),
            (e, b) => prop_assert_eq!(e.is_none(), b.is_none()),
        }
    }

    #[test]
    fn mabsplit_cost_is_capped((x, y) in arb_classification(), seed in any::<u64>(), batch in 1usize..20) {
        let rows: Vec<usize> = (0..x.rows()).collect();
        let feats: Vec<usize> = (0..x.cols()).collect();
        let node = NodeView { x: &x, y: &y, rows: &rows };
        let cands = node_edges(node, &feats, 4, None);
        for sampling in [armsearch::bandit::Sampling::WithReplacement, armsearch::bandit::Sampling::WithoutReplacement] {
            let cfg = MabConfig { batch_size: batch, sampling, ..Default::default() };
            let c = SampleCounter::new();
            let out = mabsplit(node, &cands, Impurity::Gini, &cfg, &mut stream(seed, 0), &c).unwrap();
            prop_assert!(c.get() <= 2 * (x.rows() * cands.len()) as u64);
            prop_assert_eq!(out.insertions, c.get());
        }
    }

    #[test]
    fn regression_variance_is_nonnegative(
        l in prop::collection::vec(-10.0f64..10.0, 1..20),
        r in prop::collection::vec(-10.0f64..10.0, 1..20),
    ) {
        let v = regression_variance(&Moments::of(&l), &Moments::of(&r));
        prop_assert!(v >= 0.0 && v.is_finite());
    }

    #[test]
    fn predictions_are_distributions((x, y) in arb_classification(), seed in any::<u64>()) {
        let k = y.n_classes().unwrap();
        let data = match y {
            Targets::Classes { labels, .. } => TabularDataset::classification_with(x, labels, k).unwrap(),
            _ => unreachable!(),
        };
        let cfg = ForestConfig { n_trees: 3, splitter: Splitter::MabSplit, ..Default::default() };
        let f = fit_forest(&cfg, &data, seed).unwrap();
        for r in 0..data.n_rows() {
            let p = f.predict_proba(data.x.row(r)).unwrap();
            prop_assert_eq!(p.len(), k);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
