//! Node splitters: the exhaustive histogram scan and MABSplit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::histogram::{BinEdges, FeatureHistogram};
use super::impurity::{
    class_impurity_unchecked, mse_unchecked, regression_split_ci, split_ci, Impurity,
};
use super::Targets;
use crate::bandit::{CiPolicy, Sampling};
use crate::counter::SampleCounter;
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// The points of one tree node.
#[derive(Debug, Clone, Copy)]
pub struct NodeView<'a> {
    pub x: &'a Matrix,
    pub y: &'a Targets,
    pub rows: &'a [usize],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitChoice {
    pub feature: usize,
    /// Edge index in `1..T` of the chosen threshold.
    pub edge: usize,
    pub threshold: f64,
    /// Weighted child impurity (estimated for MABSplit).
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub choice: Option<SplitChoice>,
    pub insertions: u64,
    pub exact_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MabConfig {
    pub delta: f64,
    pub batch_size: usize,
    pub ci_policy: CiPolicy,
    pub sampling: Sampling,
}

impl Default for MabConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            batch_size: 100,
            ci_policy: CiPolicy::Flat,
            sampling: Sampling::WithoutReplacement,
        }
    }
}

/// Bin edges per candidate feature over the node's observed range.
/// Constant features are dropped. `rng` switches to random interior edges.
pub fn node_edges(
    node: NodeView<'_>,
    features: &[usize],
    bins: usize,
    mut rng: Option<&mut Stream>,
) -> Vec<(usize, BinEdges)> {
    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();
    let mut out = Vec::with_capacity(features.len());
    for f in features {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in node.rows {
            let v = node.x.get(r, f);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let edges = match rng.as_deref_mut() {
            Some(rng) => BinEdges::random(lo, hi, bins, rng),
            None => BinEdges::equal_width(lo, hi, bins),
        };
        if let Some(e) = edges {
            out.push((f, e));
        }
    }
    out
}

fn new_hist(y: &Targets, f: usize, e: &BinEdges) -> FeatureHistogram {
    match y {
        Targets::Classes { n_classes, .. } => {
            FeatureHistogram::for_classes(f, e.clone(), *n_classes)
        }
        Targets::Real(_) => FeatureHistogram::for_regression(f, e.clone()),
    }
}

#[inline]
fn insert(h: &mut FeatureHistogram, node: &NodeView<'_>, row: usize) {
    let x = node.x.get(row, h.feature);
    match node.y {
        Targets::Classes { labels, .. } => h.insert_class(x, labels[row]),
        Targets::Real(v) => h.insert_value(x, v[row]),
    }
}

fn check_metric(metric: Impurity, y: &Targets) -> Result<()> {
    if metric.is_classification() != matches!(y, Targets::Classes { .. }) {
        return Err(Error::config(format!(
            "{metric:?} does not match the target type"
        )));
    }
    Ok(())
}

/// Objective and per-sample variance inputs for every threshold of one
/// histogram.
struct Scored {
    mu: Vec<f64>,
    ci: Vec<f64>,
}

fn score(h: &FeatureHistogram, metric: Impurity, n: u64, delta_step: Option<f64>) -> Scored {
    let t = h.edges.n_bins();
    let mut mu = Vec::with_capacity(t - 1);
    let mut ci = Vec::with_capacity(t - 1);
    let nf = n as f64;
    if metric == Impurity::Mse {
        let (lefts, total) = h.moment_scan();
        for l in &lefts {
            let r = total.minus(l);
            let mut m = 0.0;
            if l.n > 0.0 {
                m += l.n / nf * mse_unchecked(l);
            }
            if r.n > 0.0 {
                m += r.n / nf * mse_unchecked(&r);
            }
            mu.push(m);
            ci.push(delta_step.map_or(0.0, |d| regression_split_ci(l, &r, n, d)));
        }
    } else {
        let (lefts, total) = h.class_scan();
        let mut right = vec![0.0; total.len()];
        let mut tl = vec![0.0; total.len()];
        let mut tr = vec![0.0; total.len()];
        for l in &lefts {
            for k in 0..total.len() {
                right[k] = total[k] - l[k];
                tl[k] = l[k] / nf;
                tr[k] = right[k] / nf;
            }
            let (nl, nr) = (l.iter().sum::<f64>(), right.iter().sum::<f64>());
            let mut m = 0.0;
            if nl > 0.0 {
                m += nl / nf * class_impurity_unchecked(metric, l);
            }
            if nr > 0.0 {
                m += nr / nf * class_impurity_unchecked(metric, &right);
            }
            mu.push(m);
            ci.push(delta_step.map_or(0.0, |d| split_ci(metric, &tl, &tr, n, d)));
        }
    }
    Scored { mu, ci }
}

/// Insert every point of the node into every candidate histogram and
/// return the minimizing `(feature, threshold)`. Ties go to the lowest
/// feature, then the lowest edge.
pub fn split_exact(
    node: NodeView<'_>,
    candidates: &[(usize, BinEdges)],
    metric: Impurity,
    counter: &SampleCounter,
) -> Result<SplitOutcome> {
    check_metric(metric, node.y)?;
    if node.rows.len() < 2 || candidates.is_empty() {
        return Ok(SplitOutcome {
            choice: None,
            insertions: 0,
            exact_fallback: false,
        });
    }
    let cost = (node.rows.len() * candidates.len()) as u64;
    counter.try_charge(cost)?;
    let mut best: Option<SplitChoice> = None;
    for (f, e) in candidates {
        let mut h = new_hist(node.y, *f, e);
        for &r in node.rows {
            insert(&mut h, &node, r);
        }
        let s = score(&h, metric, node.rows.len() as u64, None);
        for (i, &m) in s.mu.iter().enumerate() {
            if best.is_none_or(|b| m < b.objective) {
                best = Some(SplitChoice {
                    feature: *f,
                    edge: i + 1,
                    threshold: e.threshold(i + 1),
                    objective: m,
                });
            }
        }
    }
    Ok(SplitOutcome {
        choice: best,
        insertions: cost,
        exact_fallback: false,
    })
}

/// Per-`(feature, threshold)` estimates during a MABSplit run.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidateTable {
    /// `(feature position, edge)` for each arm.
    pub arms: Vec<(usize, usize)>,
    pub mu_hat: Vec<f64>,
    pub ci: Vec<f64>,
    pub active: Vec<bool>,
}

impl SplitCandidateTable {
    fn new(candidates: &[(usize, BinEdges)]) -> Self {
        let arms: Vec<(usize, usize)> = candidates
            .iter()
            .enumerate()
            .flat_map(|(p, (_, e))| (1..e.n_bins()).map(move |i| (p, i)))
            .collect();
        let n = arms.len();
        Self {
            arms,
            mu_hat: vec![f64::INFINITY; n],
            ci: vec![f64::INFINITY; n],
            active: vec![true; n],
        }
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Adaptive split search: histograms are filled batch by batch with
/// sampled node points, and thresholds whose lower confidence bound exceeds
/// the best upper bound are dropped together with any feature that has no
/// threshold left.
pub fn mabsplit(
    node: NodeView<'_>,
    candidates: &[(usize, BinEdges)],
    metric: Impurity,
    cfg: &MabConfig,
    rng: &mut Stream,
    counter: &SampleCounter,
) -> Result<SplitOutcome> {
    mabsplit_traced(node, candidates, metric, cfg, rng, counter, &mut |_| {})
}

pub fn mabsplit_traced(
    node: NodeView<'_>,
    candidates: &[(usize, BinEdges)],
    metric: Impurity,
    cfg: &MabConfig,
    rng: &mut Stream,
    counter: &SampleCounter,
    observer: &mut dyn FnMut(&SplitCandidateTable),
) -> Result<SplitOutcome> {
    check_metric(metric, node.y)?;
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) || cfg.batch_size == 0 {
        return Err(Error::config(
            "mabsplit needs 0 < delta < 1 and batch size >= 1",
        ));
    }
    let n = node.rows.len();
    let mut table = SplitCandidateTable::new(candidates);
    if n < 2 || table.arms.is_empty() {
        return Ok(SplitOutcome {
            choice: None,
            insertions: 0,
            exact_fallback: false,
        });
    }
    let n_arms = table.arms.len();
    let mut hists: Vec<FeatureHistogram> = candidates
        .iter()
        .map(|(f, e)| new_hist(node.y, *f, e))
        .collect();
    let mut feature_live = vec![true; candidates.len()];
    let mut order: Vec<usize> = node.rows.to_vec();
    let mut used = 0usize;
    let mut insertions = 0u64;
    let mut sample = Vec::with_capacity(cfg.batch_size);

    loop {
        if cfg.sampling == Sampling::WithReplacement && used >= n {
            return exact_over_survivors(node, candidates, &table, metric, counter, insertions);
        }
        let b = match cfg.sampling {
            Sampling::WithoutReplacement => cfg.batch_size.min(n - used),
            Sampling::WithReplacement => cfg.batch_size.min(n - used).max(1),
        };
        sample.clear();
        match cfg.sampling {
            Sampling::WithoutReplacement => {
                for i in used..used + b {
                    let j = rng.random_range(i..n);
                    order.swap(i, j);
                }
                sample.extend_from_slice(&order[used..used + b]);
            }
            Sampling::WithReplacement => {
                sample.extend((0..b).map(|_| node.rows[rng.random_range(0..n)]));
            }
        }
        let live = feature_live.iter().filter(|&&l| l).count() as u64;
        counter.try_charge(b as u64 * live)?;
        insertions += b as u64 * live;
        for (h, _) in hists.iter_mut().zip(&feature_live).filter(|(_, &l)| l) {
            for &r in &sample {
                insert(h, &node, r);
            }
        }
        used += b;

        let exhausted = cfg.sampling == Sampling::WithoutReplacement && used >= n;
        let delta_step = cfg.ci_policy.delta_step(cfg.delta, n_arms, used as u64);
        let mut arm = 0;
        for (p, h) in hists.iter().enumerate() {
            let t = h.edges.n_bins() - 1;
            if feature_live[p] {
                let ds = if exhausted { None } else { Some(delta_step) };
                let s = score(h, metric, used as u64, ds);
                for i in 0..t {
                    if table.active[arm + i] {
                        table.mu_hat[arm + i] = s.mu[i];
                        table.ci[arm + i] = s.ci[i];
                    }
                }
            }
            arm += t;
        }
        observer(&table);

        if exhausted {
            let best = best_active(&table);
            return Ok(SplitOutcome {
                choice: Some(choice_of(candidates, &table, best)),
                insertions,
                exact_fallback: true,
            });
        }

        let min_ucb = (0..n_arms)
            .filter(|&a| table.active[a])
            .map(|a| table.mu_hat[a] + table.ci[a])
            .fold(f64::INFINITY, f64::min);
        for a in 0..n_arms {
            if table.active[a] && table.mu_hat[a] - table.ci[a] > min_ucb {
                table.active[a] = false;
            }
        }
        for (p, live) in feature_live.iter_mut().enumerate() {
            *live = table
                .arms
                .iter()
                .zip(&table.active)
                .any(|(&(q, _), &a)| a && q == p);
        }
        if table.n_active() == 1 {
            let best = best_active(&table);
            return Ok(SplitOutcome {
                choice: Some(choice_of(candidates, &table, best)),
                insertions,
                exact_fallback: false,
            });
        }
    }
}

fn best_active(table: &SplitCandidateTable) -> usize {
    let mut best: Option<usize> = None;
    for a in 0..table.arms.len() {
        if table.active[a] && best.is_none_or(|b| table.mu_hat[a] < table.mu_hat[b]) {
            best = Some(a);
        }
    }
    best.expect("at least one arm stays active")
}

fn choice_of(
    candidates: &[(usize, BinEdges)],
    table: &SplitCandidateTable,
    arm: usize,
) -> SplitChoice {
    let (p, edge) = table.arms[arm];
    let (feature, e) = &candidates[p];
    SplitChoice {
        feature: *feature,
        edge,
        threshold: e.threshold(edge),
        objective: table.mu_hat[arm],
    }
}

fn exact_over_survivors(
    node: NodeView<'_>,
    candidates: &[(usize, BinEdges)],
    table: &SplitCandidateTable,
    metric: Impurity,
    counter: &SampleCounter,
    mut insertions: u64,
) -> Result<SplitOutcome> {
    let mut best: Option<SplitChoice> = None;
    for (p, (f, e)) in candidates.iter().enumerate() {
        let edges: Vec<usize> = table
            .arms
            .iter()
            .zip(&table.active)
            .filter(|(&(q, _), &a)| a && q == p)
            .map(|(&(_, i), _)| i)
            .collect();
        if edges.is_empty() {
            continue;
        }
        let cost = node.rows.len() as u64;
        counter.try_charge(cost)?;
        insertions += cost;
        let mut h = new_hist(node.y, *f, e);
        for &r in node.rows {
            insert(&mut h, &node, r);
        }
        let s = score(&h, metric, node.rows.len() as u64, None);
        for i in edges {
            let m = s.mu[i - 1];
            if best.is_none_or(|b| m < b.objective) {
                best = Some(SplitChoice {
                    feature: *f,
                    edge: i,
                    threshold: e.threshold(i),
                    objective: m,
                });
            }
        }
    }
    Ok(SplitOutcome {
        choice: best,
        insertions,
        exact_fallback: true,
    })
}
