//! Histogram decision trees and forests for classification and regression.
//!
//! Trees grow breadth first. At each node a random feature subset is
//! binned over the node's observed range and one of two splitters picks the
//! `(feature, threshold)` with the smallest weighted child impurity: the
//! exhaustive scan, which inserts every node point into every histogram,
//! or MABSplit, which inserts sampled batches and drops dominated
//! thresholds. Work is counted in histogram insertions.

mod histogram;
mod impurity;
mod split;

use std::collections::VecDeque;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use histogram::{BinEdges, FeatureHistogram};
pub use impurity::{
    delta_method_variance, impurity, objective_gradient, regression_split_ci, regression_variance,
    split_ci, split_objective, z_value, Impurity, Moments, Summary, PROB_EPS,
};
pub use split::{
    mabsplit, mabsplit_traced, node_edges, split_exact, MabConfig, NodeView, SplitCandidateTable,
    SplitChoice, SplitOutcome,
};

use crate::bandit::{CiPolicy, Sampling};
use crate::counter::SampleCounter;
use crate::data::{CsvTable, Matrix};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Classes {
        labels: Vec<usize>,
        n_classes: usize,
    },
    Real(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self {
            Targets::Classes { n_classes, .. } => Some(*n_classes),
            Targets::Real(_) => None,
        }
    }

    fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Classes { labels, n_classes } => Targets::Classes {
                labels: rows.iter().map(|&r| labels[r]).collect(),
                n_classes: *n_classes,
            },
            Targets::Real(v) => Targets::Real(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    pub x: Matrix,
    pub y: Targets,
}

impl TabularDataset {
    /// Class labels `0..K`; `K` is one more than the largest label.
    pub fn classification(x: Matrix, labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1).max(2);
        Self::classification_with(x, labels, k)
    }

    pub fn classification_with(x: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::config("classification needs at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: n_classes,
            });
        }
        Self::checked(x, Targets::Classes { labels, n_classes })
    }

    pub fn regression(x: Matrix, y: Vec<f64>) -> Result<Self> {
        Self::checked(x, Targets::Real(y))
    }

    fn checked(x: Matrix, y: Targets) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::EmptyInput("dataset has no rows or no features"));
        }
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                actual: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    /// Last CSV column as the target; class labels must be non-negative
    /// integers.
    pub fn from_table(table: CsvTable, classification: bool) -> Result<Self> {
        let labels = table
            .labels
            .ok_or_else(|| Error::config("table has no label column"))?;
        if classification {
            let mut ints = Vec::with_capacity(labels.len());
            for (i, &l) in labels.iter().enumerate() {
                if l < 0.0 || l.fract() != 0.0 || l > u32::MAX as f64 {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("class label {l} is not a non-negative integer"),
                    });
                }
                ints.push(l as usize);
            }
            Self::classification(table.features, ints)
        } else {
            Self::regression(table.features, labels)
        }
    }

    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(rows),
            y: self.y.select(rows),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    RandomForest,
    ExtraTrees,
    RandomPatches,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" | "random_forest" => Ok(Self::RandomForest),
            "et" | "extra_trees" | "extratrees" => Ok(Self::ExtraTrees),
            "rp" | "random_patches" => Ok(Self::RandomPatches),
            _ => Err(Error::Unknown {
                kind: "forest variant",
                name: s.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitter {
    Exact,
    MabSplit,
}

impl std::str::FromStr for Splitter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Self::Exact),
            "mabsplit" | "mab" => Ok(Self::MabSplit),
            _ => Err(Error::Unknown {
                kind: "splitter",
                name: s.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRule {
    Sqrt,
    All,
    Count(usize),
}

impl FeatureRule {
    fn count(self, m: usize) -> usize {
        match self {
            FeatureRule::Sqrt => ((m as f64).sqrt().floor() as usize).max(1),
            FeatureRule::All => m,
            FeatureRule::Count(c) => c.clamp(1, m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub variant: Variant,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub max_leaf_nodes: Option<usize>,
    pub min_impurity_decrease: f64,
    /// `None` picks the variant default: `Sqrt`, except `All` for
    /// ExtraTrees regression.
    pub features_per_split: Option<FeatureRule>,
    pub bins: usize,
    pub impurity: Impurity,
    pub alpha_n: f64,
    pub alpha_f: f64,
    pub splitter: Splitter,
    pub delta: f64,
    pub batch_size: usize,
    pub ci_policy: CiPolicy,
    pub sampling: Sampling,
    /// Cap on histogram insertions across the whole forest.
    pub budget: Option<u64>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            variant: Variant::RandomForest,
            n_trees: 10,
            max_depth: None,
            max_leaf_nodes: None,
            min_impurity_decrease: 0.005,
            features_per_split: None,
            bins: 10,
            impurity: Impurity::Gini,
            alpha_n: 1.0,
            alpha_f: 1.0,
            splitter: Splitter::Exact,
            delta: 0.01,
            batch_size: 100,
            ci_policy: CiPolicy::Flat,
            sampling: Sampling::WithoutReplacement,
            budget: None,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self, data: &TabularDataset) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("n_trees must be positive"));
        }
        if self.bins < 2 {
            return Err(Error::config("bins must be at least 2"));
        }
        if !(self.alpha_n > 0.0 && self.alpha_n <= 1.0 && self.alpha_f > 0.0 && self.alpha_f <= 1.0)
        {
            return Err(Error::config("alpha_n and alpha_f must be in (0, 1]"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta must be in (0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.min_impurity_decrease >= 0.0) {
            return Err(Error::config("min_impurity_decrease must be non-negative"));
        }
        if self.max_leaf_nodes == Some(0) {
            return Err(Error::config("max_leaf_nodes must be positive"));
        }
        if self.impurity.is_classification() != matches!(data.y, Targets::Classes { .. }) {
            return Err(Error::config(format!(
                "impurity {:?} does not match the target type",
                self.impurity
            )));
        }
        Ok(())
    }

    fn feature_rule(&self, regression: bool) -> FeatureRule {
        self.features_per_split
            .unwrap_or(match (self.variant, regression) {
                (Variant::ExtraTrees, true) => FeatureRule::All,
                _ => FeatureRule::Sqrt,
            })
    }

    fn mab(&self) -> MabConfig {
        MabConfig {
            delta: self.delta,
            batch_size: self.batch_size,
            ci_policy: self.ci_policy,
            sampling: self.sampling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafValue {
    Probabilities(Vec<f64>),
    Mean(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: LeafValue,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Node impurity minus weighted child impurity.
        impurity_decrease: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// False when the insertion budget ran out while this tree was growing.
    pub complete: bool,
    #[serde(skip)]
    in_bag: Option<Vec<bool>>,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> &LeafValue {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if x[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ForestConfig,
    pub n_features: usize,
    pub n_classes: Option<usize>,
    pub trees: Vec<Tree>,
    pub n_trees_completed: usize,
    pub n_insertions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub variant: Variant,
    pub splitter: Splitter,
    pub n_insertions: u64,
    pub accuracy_or_mse: f64,
    pub n_trees_completed: usize,
}

struct GrowCtx<'a> {
    data: &'a TabularDataset,
    cfg: &'a ForestConfig,
    counter: &'a SampleCounter,
    /// Features this tree may use (original indices).
    features: Vec<usize>,
    seed: u64,
}

fn leaf_value(y: &Targets, rows: &[usize]) -> (LeafValue, f64) {
    match y {
        Targets::Classes { labels, n_classes } => {
            let mut counts = vec![0.0; *n_classes];
            for &r in rows {
                counts[labels[r]] += 1.0;
            }
            let n = rows.len().max(1) as f64;
            let imp = if rows.is_empty() {
                0.0
            } else {
                impurity::class_impurity_unchecked(Impurity::Gini, &counts)
            };
            (
                LeafValue::Probabilities(counts.iter().map(|c| c / n).collect()),
                imp,
            )
        }
        Targets::Real(v) => {
            let m = Moments::of(&rows.iter().map(|&r| v[r]).collect::<Vec<_>>());
            let mean = if m.n > 0.0 { m.sum / m.n } else { 0.0 };
            (LeafValue::Mean(mean), 0.0)
        }
    }
}

fn node_impurity(metric: Impurity, y: &Targets, rows: &[usize]) -> f64 {
    match y {
        Targets::Classes { labels, n_classes } => {
            let mut counts = vec![0.0; *n_classes];
            for &r in rows {
                counts[labels[r]] += 1.0;
            }
            impurity::class_impurity_unchecked(metric, &counts)
        }
        Targets::Real(v) => impurity::mse_unchecked(&Moments::of(
            &rows.iter().map(|&r| v[r]).collect::<Vec<_>>(),
        )),
    }
}

fn grow_tree(ctx: &GrowCtx<'_>, rows: Vec<usize>) -> Tree {
    let cfg = ctx.cfg;
    let data = ctx.data;
    let mut rng = stream(ctx.seed, 0);
    let regression = matches!(data.y, Targets::Real(_));
    let per_split = cfg.feature_rule(regression).count(ctx.features.len());
    let mab = cfg.mab();

    let mut nodes = vec![Node::Leaf {
        value: leaf_value(&data.y, &rows).0,
        n_samples: rows.len(),
    }];
    let mut queue = VecDeque::from([(0usize, rows, 0usize)]);
    let mut leaves = 1usize;
    let mut complete = true;
    let mut split_id = 0u64;

    while let Some((id, rows, depth)) = queue.pop_front() {
        let (value, _) = leaf_value(&data.y, &rows);
        nodes[id] = Node::Leaf {
            value,
            n_samples: rows.len(),
        };
        if !complete
            || rows.len() < 2
            || cfg.max_depth.is_some_and(|d| depth >= d)
            || cfg.max_leaf_nodes.is_some_and(|m| leaves >= m)
        {
            continue;
        }
        let node_imp = node_impurity(cfg.impurity, &data.y, &rows);
        if node_imp <= 0.0 {
            continue;
        }
        let mut features: Vec<usize> = index::sample(&mut rng, ctx.features.len(), per_split)
            .into_iter()
            .map(|i| ctx.features[i])
            .collect();
        features.sort_unstable();
        let view = NodeView {
            x: &data.x,
            y: &data.y,
            rows: &rows,
        };
        let edge_rng = (cfg.variant == Variant::ExtraTrees).then_some(&mut rng);
        let candidates = node_edges(view, &features, cfg.bins, edge_rng);
        split_id += 1;
        let outcome = match cfg.splitter {
            Splitter::Exact => split_exact(view, &candidates, cfg.impurity, ctx.counter),
            Splitter::MabSplit => {
                let mut node_rng = stream(ctx.seed, split_id);
                mabsplit(
                    view,
                    &candidates,
                    cfg.impurity,
                    &mab,
                    &mut node_rng,
                    ctx.counter,
                )
            }
        };
        let choice = match outcome {
            Ok(SplitOutcome {
                choice: Some(c), ..
            }) => c,
            Ok(_) => continue,
            Err(_) => {
                complete = false;
                continue;
            }
        };
        let decrease = node_imp - choice.objective;
        if decrease < cfg.min_impurity_decrease {
            continue;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| data.x.get(r, choice.feature) < choice.threshold);
        if left.is_empty() || right.is_empty() {
            continue;
        }
        let (l, r) = (nodes.len(), nodes.len() + 1);
        for _ in 0..2 {
            nodes.push(Node::Leaf {
                value: LeafValue::Mean(0.0),
                n_samples: 0,
            });
        }
        nodes[id] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left: l,
            right: r,
            n_samples: rows.len(),
            impurity_decrease: decrease,
        };
        leaves += 1;
        queue.push_back((l, left, depth + 1));
        queue.push_back((r, right, depth + 1));
    }
    Tree {
        nodes,
        complete,
        in_bag: None,
    }
}

fn train_one(
    data: &TabularDataset,
    cfg: &ForestConfig,
    counter: &SampleCounter,
    patch_rows: &[usize],
    patch_features: &[usize],
    seed: u64,
    t: usize,
) -> Tree {
    let tree_seed = derive_seed(seed, t as u64 + 1);
    let mut rng = stream(tree_seed, u64::MAX);
    let rows: Vec<usize> = match cfg.variant {
        Variant::ExtraTrees => patch_rows.to_vec(),
        Variant::RandomForest | Variant::RandomPatches => (0..patch_rows.len())
            .map(|_| patch_rows[rng.random_range(0..patch_rows.len())])
            .collect(),
    };
    let in_bag = (cfg.variant == Variant::RandomForest).then(|| {
        let mut mask = vec![false; data.n_rows()];
        rows.iter().for_each(|&r| mask[r] = true);
        mask
    });
    let ctx = GrowCtx {
        data,
        cfg,
        counter,
        features: patch_features.to_vec(),
        seed: tree_seed,
    };
    let mut tree = grow_tree(&ctx, rows);
    tree.in_bag = in_bag;
    tree
}

/// Train a forest. Without a budget trees grow in parallel; with one they
/// grow in order and training stops at the first tree that runs out,
/// keeping that tree as grown so far.
pub fn fit_forest(cfg: &ForestConfig, data: &TabularDataset, seed: u64) -> Result<Forest> {
    cfg.validate(data)?;
    let mut patch_rng = stream(seed, 0);
    let (n, m) = (data.n_rows(), data.n_features());
    let (patch_rows, patch_features) = if cfg.variant == Variant::RandomPatches {
        let nr = ((cfg.alpha_n * n as f64).round() as usize).clamp(1, n);
        let nf = ((cfg.alpha_f * m as f64).round() as usize).clamp(1, m);
        let mut rows = index::sample(&mut patch_rng, n, nr).into_vec();
        let mut feats = index::sample(&mut patch_rng, m, nf).into_vec();
        rows.sort_unstable();
        feats.sort_unstable();
        (rows, feats)
    } else {
        ((0..n).collect(), (0..m).collect())
    };
    let counter = match cfg.budget {
        Some(b) => SampleCounter::with_budget(b),
        None => SampleCounter::new(),
    };
    let trees: Vec<Tree> = if cfg.budget.is_some() {
        let mut trees = Vec::new();
        for t in 0..cfg.n_trees {
            let tree = train_one(data, cfg, &counter, &patch_rows, &patch_features, seed, t);
            let done = tree.complete;
            trees.push(tree);
            if !done {
                break;
            }
        }
        trees
    } else {
        (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| train_one(data, cfg, &counter, &patch_rows, &patch_features, seed, t))
            .collect()
    };
    Ok(Forest {
        config: cfg.clone(),
        n_features: m,
        n_classes: data.y.n_classes(),
        n_trees_completed: trees.iter().filter(|t| t.complete).count(),
        trees,
        n_insertions: counter.get(),
    })
}

impl Forest {
    fn check(&self, x: &[f64]) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Untrained);
        }
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Mean of the trees' leaf class distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let k = self
            .n_classes
            .ok_or_else(|| Error::config("regression forest has no classes"))?;
        let mut acc = vec![0.0; k];
        for t in &self.trees {
            if let LeafValue::Probabilities(p) = t.leaf(x) {
                for (a, v) in acc.iter_mut().zip(p) {
                    *a += v;
                }
            }
        }
        let nt = self.trees.len() as f64;
        Ok(acc.into_iter().map(|a| a / nt).collect())
    }

    /// Class index (lowest on ties) for classification, mean leaf value
    /// for regression.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        if self.n_classes.is_some() {
            let p = self.predict_proba(x)?;
            let mut best = 0;
            for (i, v) in p.iter().enumerate() {
                if *v > p[best] {
                    best = i;
                }
            }
            return Ok(best as f64);
        }
        let sum: f64 = self
            .trees
            .iter()
            .map(|t| match t.leaf(x) {
                LeafValue::Mean(m) => *m,
                LeafValue::Probabilities(_) => 0.0,
            })
            .sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Accuracy for classification, mean squared error for regression.
    pub fn evaluate(&self, data: &TabularDataset) -> Result<f64> {
        self.evaluate_rows(data, &(0..data.n_rows()).collect::<Vec<_>>(), None)
    }

    fn evaluate_rows(
        &self,
        data: &TabularDataset,
        rows: &[usize],
        override_col: Option<(usize, &[f64])>,
    ) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("no rows to evaluate"));
        }
        let mut buf = vec![0.0; data.n_features()];
        let mut acc = 0.0;
        for (i, &r) in rows.iter().enumerate() {
            buf.copy_from_slice(data.x.row(r));
            if let Some((f, col)) = override_col {
                buf[f] = col[i];
            }
            let p = self.predict(&buf)?;
            acc += match &data.y {
                Targets::Classes { labels, .. } => f64::from(p as usize == labels[r]),
                Targets::Real(v) => (p - v[r]) * (p - v[r]),
            };
        }
        Ok(acc / rows.len() as f64)
    }

    pub fn report(&self, data: &TabularDataset) -> Result<TrainingReport> {
        Ok(TrainingReport {
            variant: self.config.variant,
            splitter: self.config.splitter,
            n_insertions: self.n_insertions,
            accuracy_or_mse: self.evaluate(data)?,
            n_trees_completed: self.n_trees_completed,
        })
    }

    /// Mean decrease in impurity: per tree, each split's decrease weighted
    /// by its share of the root's samples, normalized to sum to one, then
    /// averaged over trees.
    pub fn mdi_importances(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        for t in &self.trees {
            let mut imp = vec![0.0; self.n_features];
            let root = match &t.nodes[0] {
                Node::Leaf { n_samples, .. } | Node::Split { n_samples, .. } => *n_samples,
            };
            for node in &t.nodes {
                if let Node::Split {
                    feature,
                    n_samples,
                    impurity_decrease,
                    ..
                } = node
                {
                    imp[*feature] += *n_samples as f64 / root.max(1) as f64 * impurity_decrease;
                }
            }
            let s: f64 = imp.iter().sum();
            if s > 0.0 {
                total.iter_mut().zip(&imp).for_each(|(a, v)| *a += v / s);
            }
        }
        let nt = self.trees.len().max(1) as f64;
        total.into_iter().map(|v| v / nt).collect()
    }

    /// Out-of-bag permutation importance (Random Forest only): the mean
    /// over trees of the drop in out-of-bag score when a feature's values
    /// are shuffled among the out-of-bag rows. Scores are accuracy or
    /// negative MSE, so larger importances mean more useful features.
    pub fn permutation_importances(&self, data: &TabularDataset, seed: u64) -> Result<Vec<f64>> {
        if self.config.variant != Variant::RandomForest {
            return Err(Error::config(
                "out-of-bag importance needs bootstrap samples",
            ));
        }
        if data.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: data.n_features(),
            });
        }
        let mut total = vec![0.0; self.n_features];
        let mut used = 0usize;
        let sign = if self.n_classes.is_some() { 1.0 } else { -1.0 };
        for (ti, t) in self.trees.iter().enumerate() {
            let Some(in_bag) = &t.in_bag else {
                return Err(Error::config("forest has no bootstrap record"));
            };
            if in_bag.len() != data.n_rows() {
                return Err(Error::DimensionMismatch {
                    expected: in_bag.len(),
                    actual: data.n_rows(),
                });
            }
            let oob: Vec<usize> = (0..data.n_rows()).filter(|&r| !in_bag[r]).collect();
            if oob.is_empty() {
                continue;
            }
            let single = Forest {
                trees: vec![t.clone()],
                ..self.clone_shallow()
            };
            let base = sign * single.evaluate_rows(data, &oob, None)?;
            let mut rng = stream(seed, ti as u64);
            for (f, acc) in total.iter_mut().enumerate() {
                let mut col: Vec<f64> = oob.iter().map(|&r| data.x.get(r, f)).collect();
                col.shuffle(&mut rng);
                let permuted = sign * single.evaluate_rows(data, &oob, Some((f, &col)))?;
                *acc += base - permuted;
            }
            used += 1;
        }
        let u = used.max(1) as f64;
        Ok(total.into_iter().map(|v| v / u).collect())
    }

    fn clone_shallow(&self) -> Forest {
        Forest {
            config: self.config.clone(),
            n_features: self.n_features,
            n_classes: self.n_classes,
            trees: Vec::new(),
            n_trees_completed: 0,
            n_insertions: 0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parse and structurally validate a persisted forest.
    pub fn from_json(s: &str) -> Result<Forest> {
        let f: Forest = serde_json::from_str(s)?;
        f.validate_structure()?;
        Ok(f)
    }

    fn validate_structure(&self) -> Result<()> {
        if self.n_features == 0 {
            return Err(Error::config("forest has no features"));
        }
        if self.n_classes == Some(0) {
            return Err(Error::config("forest has no classes"));
        }
        for t in &self.trees {
            if t.nodes.is_empty() {
                return Err(Error::config("tree has no nodes"));
            }
            // every non-root node must be the child of exactly one earlier
            // split, which rules out cycles and sharing
            let mut parents = vec![0usize; t.nodes.len()];
            for (i, node) in t.nodes.iter().enumerate() {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        ..
                    } => {
                        if *feature >= self.n_features || threshold.is_nan() {
                            return Err(Error::config(format!("bad split at node {i}")));
                        }
                        for &c in [left, right] {
                            if c <= i || c >= t.nodes.len() {
                                return Err(Error::config(format!("bad child index at node {i}")));
                            }
                            parents[c] += 1;
                        }
                    }
                    Node::Leaf { value, .. } => match (value, self.n_classes) {
                        (LeafValue::Probabilities(p), Some(k)) if p.len() == k => {}
                        (LeafValue::Mean(_), None) => {}
                        _ => {
                            return Err(Error::config(format!("leaf {i} does not match the task")))
                        }
                    },
                }
            }
            if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
                return Err(Error::config("tree nodes do not form a tree"));
            }
        }
        Ok(())
    }
}

/// Mean pairwise Jaccard overlap of each run's top-`k` features (largest
/// importance first, lower index on ties).
pub fn feature_stability(importances: &[Vec<f64>], top_k: usize) -> Result<f64> {
    if importances.len() < 2 {
        return Err(Error::config("stability needs at least two runs"));
    }
    let m = importances[0].len();
    if importances.iter().any(|v| v.len() != m) {
        return Err(Error::config("importance vectors differ in length"));
    }
    if top_k == 0 || top_k > m {
        return Err(Error::config(format!("top_k must be in 1..={m}")));
    }
    let sets: Vec<Vec<usize>> = importances
        .iter()
        .map(|imp| {
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
            let mut top = idx[..top_k].to_vec();
            top.sort_unstable();
            top
        })
        .collect();
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let inter = sets[i]
                .iter()
                .filter(|f| sets[j].binary_search(f).is_ok())
                .count();
            let union = 2 * top_k - inter;
            total += inter as f64 / union as f64;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}
