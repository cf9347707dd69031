//! k-medoids clustering: exact PAM and BanditPAM.
//!
//! Both solvers share the same BUILD/SWAP objectives and the same tie
//! rules, so with the exact fallback forced the adaptive solver walks the
//! same path as PAM. Every call to the dissimilarity is counted on the
//! [`PointSet`]'s counter; the dimension of the points does not matter.
//!
//! SWAP arms are the pairs `(medoid position p, non-medoid x)` numbered
//! `p * (n - k) + idx`, where `idx` is the position of `x` among the current
//! non-medoids in increasing index order.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{
    adaptive_search, default_delta, ArmId, CiPolicy, EliminationConfig, Sampling, SearchProblem,
    SigmaRule,
};
use crate::counter::SampleCounter;
use crate::data::Matrix;
use crate::error::{Error, Result};

pub type DissimilarityFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Metric {
    L1,
    L2,
    Cosine,
    /// Any dissimilarity; it need not be symmetric. Called as
    /// `f(medoid_or_candidate, point)`.
    Custom(Arc<DissimilarityFn>),
}

impl fmt::Debug for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::L1 => f.write_str("L1"),
            Metric::L2 => f.write_str("L2"),
            Metric::Cosine => f.write_str("Cosine"),
            Metric::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "manhattan" => Ok(Metric::L1),
            "l2" | "euclidean" => Ok(Metric::L2),
            "cosine" => Ok(Metric::Cosine),
            _ => Err(Error::Unknown {
                kind: "metric",
                name: s.to_owned(),
            }),
        }
    }
}

impl Metric {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    ab += x * y;
                    aa += x * x;
                    bb += y * y;
                }
                if aa == 0.0 || bb == 0.0 {
                    return if aa == bb { 0.0 } else { 1.0 };
                }
                1.0 - ab / (aa.sqrt() * bb.sqrt())
            }
            Metric::Custom(f) => f(a, b),
        }
    }
}

/// Points plus a counted dissimilarity.
#[derive(Debug)]
pub struct PointSet {
    points: Matrix,
    metric: Metric,
    counter: SampleCounter,
}

impl PointSet {
    pub fn new(points: Matrix, metric: Metric) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::EmptyInput("point set has no points"));
        }
        Ok(Self {
            points,
            metric,
            counter: SampleCounter::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    /// `d(a, b)` for point indices, counted as one evaluation.
    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.counter.add(1);
        self.metric.eval(self.points.row(a), self.points.row(b))
    }

    pub fn evals(&self) -> u64 {
        self.counter.get()
    }

    pub fn reset_evals(&self) {
        self.counter.reset();
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }
}

/// Medoids with nearest/second-nearest distance caches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedoidConfiguration {
    pub medoid_indices: Vec<usize>,
    pub nearest_dist: Vec<f64>,
    pub second_dist: Vec<f64>,
    /// Position in `medoid_indices` of each point's closest medoid.
    pub assignment: Vec<usize>,
}

impl MedoidConfiguration {
    fn empty(n: usize) -> Self {
        Self {
            medoid_indices: Vec::new(),
            nearest_dist: vec![f64::INFINITY; n],
            second_dist: vec![f64::INFINITY; n],
            assignment: vec![usize::MAX; n],
        }
    }

    /// Build the caches for a medoid list (`n * k` evaluations).
    pub fn from_medoids(ps: &PointSet, medoids: &[usize]) -> Result<Self> {
        if medoids.is_empty() {
            return Err(Error::EmptyInput("medoid list is empty"));
        }
        for (i, &m) in medoids.iter().enumerate() {
            ps.check_index(m)?;
            if medoids[..i].contains(&m) {
                return Err(Error::config(format!("medoid {m} listed twice")));
            }
        }
        let mut conf = Self::empty(ps.len());
        for &m in medoids {
            let row: Vec<f64> = (0..ps.len()).map(|j| ps.dist(m, j)).collect();
            conf.push(m, &row);
        }
        Ok(conf)
    }

    fn push(&mut self, m: usize, row: &[f64]) {
        let pos = self.medoid_indices.len();
        self.medoid_indices.push(m);
        for (j, &d) in row.iter().enumerate() {
            if d < self.nearest_dist[j] {
                self.second_dist[j] = self.nearest_dist[j];
                self.nearest_dist[j] = d;
                self.assignment[j] = pos;
            } else if d < self.second_dist[j] {
                self.second_dist[j] = d;
            }
        }
    }

    pub fn k(&self) -> usize {
        self.medoid_indices.len()
    }

    pub fn loss(&self) -> f64 {
        self.nearest_dist.iter().sum()
    }

    fn non_medoids(&self) -> Vec<usize> {
        let mut is_med = vec![false; self.nearest_dist.len()];
        for &m in &self.medoid_indices {
            is_med[m] = true;
        }
        (0..is_med.len()).filter(|&i| !is_med[i]).collect()
    }
}

/// `sum_i min_m d(m, x_i)`.
pub fn clustering_loss(ps: &PointSet, medoids: &[usize]) -> Result<f64> {
    Ok(MedoidConfiguration::from_medoids(ps, medoids)?.loss())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditPamConfig {
    pub k: usize,
    /// `None` uses `1 / (1000 * |targets|)` per search.
    pub delta: Option<f64>,
    pub batch_size: usize,
    pub ci_policy: CiPolicy,
    pub sampling: Sampling,
    pub sigma: SigmaRule,
    /// `None` uses `10 * k`.
    pub max_swaps: Option<usize>,
    pub use_fastpam1: bool,
    pub seed: u64,
}

impl BanditPamConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            delta: None,
            batch_size: 100,
            ci_policy: CiPolicy::Flat,
            sampling: Sampling::WithReplacement,
            sigma: SigmaRule::Estimate,
            max_swaps: None,
            use_fastpam1: true,
            seed: 0,
        }
    }

    pub fn max_swaps(&self) -> usize {
        self.max_swaps.unwrap_or(10 * self.k)
    }

    fn elimination(&self, n_targets: usize, stream_id: u64) -> EliminationConfig {
        EliminationConfig {
            delta: self.delta.unwrap_or_else(|| default_delta(n_targets)),
            batch_size: self.batch_size,
            sigma: self.sigma.clone(),
            max_pulls_per_arm: None,
            ci_policy: self.ci_policy,
            sampling: self.sampling,
            seed: self.seed,
            stream_id,
        }
    }
}

/// Result of a full BUILD + SWAP run.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub configuration: MedoidConfiguration,
    pub n_swaps: usize,
    /// SWAP searches run, including the final one that found no improvement.
    pub swap_iterations: usize,
    pub build_evals: u64,
    pub swap_evals: u64,
}

impl FitResult {
    pub fn loss(&self) -> f64 {
        self.configuration.loss()
    }

    pub fn report(&self) -> MedoidReport {
        MedoidReport {
            medoid_indices: self.configuration.medoid_indices.clone(),
            loss: self.loss(),
            n_distance_evals: self.build_evals + self.swap_evals,
            n_swaps: self.n_swaps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedoidReport {
    pub medoid_indices: Vec<usize>,
    pub loss: f64,
    pub n_distance_evals: u64,
    pub n_swaps: usize,
}

impl MedoidReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if !r.loss.is_finite() || r.loss < 0.0 {
            return Err(Error::config("loss must be finite and non-negative"));
        }
        for (i, m) in r.medoid_indices.iter().enumerate() {
            if r.medoid_indices[..i].contains(m) {
                return Err(Error::config(format!("medoid {m} listed twice")));
            }
        }
        Ok(r)
    }
}

fn check_k(ps: &PointSet, k: usize) -> Result<()> {
    if k == 0 || k >= ps.len() {
        return Err(Error::config(format!(
            "need 1 <= k < n, got k={k}, n={}",
            ps.len()
        )));
    }
    Ok(())
}

#[inline]
fn build_reward(d: f64, d1: f64) -> f64 {
    if d1.is_infinite() {
        d
    } else {
        (d - d1).min(0.0)
    }
}

/// Change in loss at reference `j` from swapping medoid position `p` for
/// a point at distance `dxj` from `x_j`.
#[inline]
fn swap_reward(conf: &MedoidConfiguration, p: usize, dxj: f64, j: usize) -> f64 {
    let d1 = conf.nearest_dist[j];
    if conf.assignment[j] != p {
        -d1 + d1.min(dxj)
    } else {
        -d1 + conf.second_dist[j].min(dxj)
    }
}

/// Swap reward for medoid position `p`, candidate point `x` and reference
/// point `j`, using one fresh evaluation `d(x, x_j)`.
pub fn fastpam1_swap_reward(
    ps: &PointSet,
    conf: &MedoidConfiguration,
    p: usize,
    x: usize,
    j: usize,
) -> f64 {
    debug_assert!(p < conf.k());
    debug_assert!(conf.assignment[j] < conf.k(), "stale caches");
    swap_reward(conf, p, ps.dist(x, j), j)
}

/// Greedy BUILD: each step adds the point that most reduces the loss.
/// Costs `n^2` evaluations for the first medoid and `(n - l) * n` for step
/// `l`; the winner's distances are kept to update the caches.
pub fn pam_build_exact(ps: &PointSet, k: usize) -> Result<MedoidConfiguration> {
    check_k(ps, k)?;
    let n = ps.len();
    let mut conf = MedoidConfiguration::empty(n);
    for _ in 0..k {
        let cands = conf.non_medoids();
        let d1 = &conf.nearest_dist;
        let scored: Vec<(f64, Vec<f64>)> = cands
            .par_iter()
            .map(|&x| {
                let row: Vec<f64> = (0..n).map(|j| ps.dist(x, j)).collect();
                let total = row
                    .iter()
                    .zip(d1)
                    .map(|(&d, &d1)| build_reward(d, d1))
                    .sum();
                (total, row)
            })
            .collect();
        let best = argmin_first(scored.iter().map(|s| s.0));
        let (_, row) = &scored[best];
        conf.push(cands[best], row);
    }
    Ok(conf)
}

fn argmin_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 || i == 0 {
            best = (i, v);
        }
    }
    best.0
}

fn accept_tolerance(conf: &MedoidConfiguration) -> f64 {
    1e-12 * conf.loss().max(1.0)
}

/// Steepest-descent SWAP. Each iteration scores all `k (n - k)` pairs with
/// one distance per (non-medoid, reference) pair and applies the best pair
/// if it lowers the loss. Returns the final configuration and swap count.
pub fn pam_swap_exact(
    ps: &PointSet,
    mut conf: MedoidConfiguration,
    max_swaps: usize,
) -> Result<(MedoidConfiguration, usize)> {
    let n = ps.len();
    let k = conf.k();
    if k == 0 || conf.nearest_dist.len() != n {
        return Err(Error::config("configuration does not match the point set"));
    }
    for &m in &conf.medoid_indices {
        ps.check_index(m)?;
    }
    let mut swaps = 0;
    while swaps < max_swaps {
        let cands = conf.non_medoids();
        let c = &conf;
        // deltas[idx][p]
        let deltas: Vec<Vec<f64>> = cands
            .par_iter()
            .map(|&x| {
                let mut acc = vec![0.0; k];
                for j in 0..n {
                    let dxj = ps.dist(x, j);
                    for (p, a) in acc.iter_mut().enumerate() {
                        *a += swap_reward(c, p, dxj, j);
                    }
                }
                acc
            })
            .collect();
        let mut best = (0, 0, f64::INFINITY);
        for p in 0..k {
            for (idx, d) in deltas.iter().enumerate() {
                if d[p] < best.2 {
                    best = (p, idx, d[p]);
                }
            }
        }
        if !(best.2 < -accept_tolerance(&conf)) {
            break;
        }
        let mut medoids = conf.medoid_indices.clone();
        medoids[best.0] = cands[best.1];
        conf = MedoidConfiguration::from_medoids(ps, &medoids)?;
        swaps += 1;
    }
    Ok((conf, swaps))
}

/// Exact PAM: BUILD followed by SWAP.
pub fn pam_fit(ps: &PointSet, k: usize, max_swaps: usize) -> Result<FitResult> {
    let start = ps.evals();
    let conf = pam_build_exact(ps, k)?;
    let build_evals = ps.evals() - start;
    let (configuration, n_swaps) = pam_swap_exact(ps, conf, max_swaps)?;
    Ok(FitResult {
        configuration,
        n_swaps,
        swap_iterations: n_swaps + usize::from(n_swaps < max_swaps),
        build_evals,
        swap_evals: ps.evals() - start - build_evals,
    })
}

struct BuildProblem<'a> {
    ps: &'a PointSet,
    cands: Vec<usize>,
    d1: &'a [f64],
}

impl SearchProblem for BuildProblem<'_> {
    fn n_arms(&self) -> usize {
        self.cands.len()
    }

    fn reference_size(&self) -> usize {
        self.ps.len()
    }

    fn reward(&self, arm: ArmId, j: usize) -> f64 {
        build_reward(self.ps.dist(self.cands[arm], j), self.d1[j])
    }

    fn exact_means(&self, arms: &[ArmId]) -> Vec<f64> {
        let n = self.ps.len();
        arms.par_iter()
            .map(|&a| (0..n).map(|j| self.reward(a, j)).sum::<f64>() / n as f64)
            .collect()
    }
}

/// SWAP search. With `fastpam1` the `k` arms sharing a candidate reuse one
/// distance per reference point; without it every arm pays its own.
pub struct SwapProblem<'a> {
    ps: &'a PointSet,
    conf: &'a MedoidConfiguration,
    cands: Vec<usize>,
    fastpam1: bool,
}

impl<'a> SwapProblem<'a> {
    pub fn new(ps: &'a PointSet, conf: &'a MedoidConfiguration, fastpam1: bool) -> Self {
        Self {
            ps,
            conf,
            cands: conf.non_medoids(),
            fastpam1,
        }
    }

    /// `(medoid position, candidate point)` of an arm.
    pub fn decode(&self, arm: ArmId) -> (usize, usize) {
        let nk = self.cands.len();
        (arm / nk, self.cands[arm % nk])
    }

    /// Distinct candidate positions among `arms`, each with the arm slots
    /// that share it.
    fn group(&self, arms: &[ArmId]) -> Vec<(usize, Vec<usize>)> {
        let nk = self.cands.len();
        let mut slots: Vec<Vec<usize>> = vec![Vec::new(); nk];
        for (slot, &a) in arms.iter().enumerate() {
            slots[a % nk].push(slot);
        }
        slots
            .into_iter()
            .enumerate()
            .filter(|(_, s)| !s.is_empty())
            .collect()
    }
}

impl SearchProblem for SwapProblem<'_> {
    fn n_arms(&self) -> usize {
        self.conf.k() * self.cands.len()
    }

    fn reference_size(&self) -> usize {
        self.ps.len()
    }

    fn reward(&self, arm: ArmId, j: usize) -> f64 {
        let (p, x) = self.decode(arm);
        swap_reward(self.conf, p, self.ps.dist(x, j), j)
    }

    fn batch_rewards(&self, arms: &[ArmId], refs: &[usize], out: &mut [f64]) {
        if !self.fastpam1 {
            let b = refs.len();
            out.par_chunks_mut(b)
                .zip(arms.par_iter())
                .for_each(|(chunk, &a)| {
                    for (o, &j) in chunk.iter_mut().zip(refs) {
                        *o = self.reward(a, j);
                    }
                });
            return;
        }
        let b = refs.len();
        let groups = self.group(arms);
        let dists: Vec<Vec<f64>> = groups
            .par_iter()
            .map(|(idx, _)| {
                refs.iter()
                    .map(|&j| self.ps.dist(self.cands[*idx], j))
                    .collect()
            })
            .collect();
        for ((_, slots), row) in groups.iter().zip(&dists) {
            for &slot in slots {
                let p = arms[slot] / self.cands.len();
                for (r, &j) in refs.iter().enumerate() {
                    out[slot * b + r] = swap_reward(self.conf, p, row[r], j);
                }
            }
        }
    }

    fn exact_means(&self, arms: &[ArmId]) -> Vec<f64> {
        let n = self.ps.len();
        let all: Vec<usize> = (0..n).collect();
        let mut out = vec![0.0; arms.len() * n];
        self.batch_rewards(arms, &all, &mut out);
        out.chunks(n)
            .map(|c| c.iter().sum::<f64>() / n as f64)
            .collect()
    }
}

/// BanditPAM: every BUILD and SWAP step is an adaptive search over its
/// candidates with all `n` points as the reference set.
pub fn banditpam_fit(ps: &PointSet, cfg: &BanditPamConfig) -> Result<FitResult> {
    check_k(ps, cfg.k)?;
    if cfg.batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    let n = ps.len();
    let start = ps.evals();
    let mut conf = MedoidConfiguration::empty(n);
    let mut search_id = 0u64;
    for _ in 0..cfg.k {
        let problem = BuildProblem {
            ps,
            cands: conf.non_medoids(),
            d1: &conf.nearest_dist,
        };
        let ecfg = cfg.elimination(problem.cands.len(), search_id);
        search_id += 1;
        let out = adaptive_search(&problem, &ecfg, true)?;
        let m = problem.cands[out.winner];
        let row: Vec<f64> = (0..n).map(|j| ps.dist(m, j)).collect();
        conf.push(m, &row);
    }
    let build_evals = ps.evals() - start;

    let mut n_swaps = 0;
    let mut swap_iterations = 0;
    while n_swaps < cfg.max_swaps() {
        swap_iterations += 1;
        let problem = SwapProblem::new(ps, &conf, cfg.use_fastpam1);
        let ecfg = cfg.elimination(problem.n_arms(), search_id);
        search_id += 1;
        let out = adaptive_search(&problem, &ecfg, true)?;
        if out.stats[out.winner].mean_estimate >= 0.0 {
            break;
        }
        let (p, x) = problem.decode(out.winner);
        let exact: f64 = (0..n)
            .map(|j| fastpam1_swap_reward(ps, &conf, p, x, j))
            .sum();
        if !(exact < -accept_tolerance(&conf)) {
            break;
        }
        let mut medoids = conf.medoid_indices.clone();
        medoids[p] = x;
        conf = MedoidConfiguration::from_medoids(ps, &medoids)?;
        n_swaps += 1;
    }
    Ok(FitResult {
        configuration: conf,
        n_swaps,
        swap_iterations,
        build_evals,
        swap_evals: ps.evals() - start - build_evals,
    })
}
