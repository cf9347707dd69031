//! Batched successive elimination.
//!
//! Arms are indexed `0..n_arms`. Each batch draws one set of reference
//! indices, evaluates every surviving arm on that same set, and drops any arm
//! whose confidence interval is dominated by the best upper (or lower) bound.
//! When the survivors have consumed as many reference draws as the reference
//! set holds, their objectives are computed exactly instead.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

pub type ArmId = usize;

/// Floor applied to an estimated sigma when the first batch is constant.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Work below this many reward evaluations per batch stays on one thread.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub mean_estimate: f64,
    pub ci_radius: f64,
    pub pulls: u64,
}

impl ArmStats {
    pub fn lower(&self) -> f64 {
        self.mean_estimate - self.ci_radius
    }

    pub fn upper(&self) -> f64 {
        self.mean_estimate + self.ci_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiPolicy {
    /// `log(1/delta)` at every step.
    #[default]
    Flat,
    /// `log(4 n t^2 / delta)` at pull count `t` over `n` arms.
    UnionBoundAnytime,
}

impl CiPolicy {
    /// Per-step failure probability after union-bound inflation.
    pub fn delta_step(self, delta: f64, n_arms: usize, pulls: u64) -> f64 {
        match self {
            CiPolicy::Flat => delta,
            CiPolicy::UnionBoundAnytime => {
                let t = pulls.max(1) as f64;
                delta / (4.0 * n_arms.max(1) as f64 * t * t)
            }
        }
    }

    pub fn radius(self, sigma: f64, pulls: u64, delta: f64, n_arms: usize) -> f64 {
        hoeffding_ci(sigma, pulls, self.delta_step(delta, n_arms, pulls))
    }
}

impl std::str::FromStr for CiPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Self::Flat),
            "union_bound_anytime" | "anytime" => Ok(Self::UnionBoundAnytime),
            _ => Err(Error::Unknown {
                kind: "ci policy",
                name: s.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    WithReplacement,
    WithoutReplacement,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRule {
    /// Per-arm sample standard deviation of the first batch.
    #[default]
    Estimate,
    Fixed(f64),
    PerArm(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationConfig {
    pub delta: f64,
    pub batch_size: usize,
    pub sigma: SigmaRule,
    /// Pull count that triggers the exact fallback. `None` means the
    /// reference set size.
    pub max_pulls_per_arm: Option<u64>,
    pub ci_policy: CiPolicy,
    pub sampling: Sampling,
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for EliminationConfig {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            batch_size: 100,
            sigma: SigmaRule::Estimate,
            max_pulls_per_arm: None,
            ci_policy: CiPolicy::Flat,
            sampling: Sampling::WithReplacement,
            seed: 0,
            stream_id: 0,
        }
    }
}

impl EliminationConfig {
    /// `delta = 1 / (1000 * n_targets)`, everything else default.
    pub fn for_targets(n_targets: usize) -> Self {
        Self {
            delta: default_delta(n_targets),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.max_pulls_per_arm == Some(0) {
            return Err(Error::config("max pulls per arm must be positive"));
        }
        match &self.sigma {
            SigmaRule::Fixed(s) if !(*s >= 0.0) => Err(Error::config("sigma must be non-negative")),
            SigmaRule::PerArm(v) if v.iter().any(|s| !(*s >= 0.0)) => {
                Err(Error::config("sigma must be non-negative"))
            }
            _ => Ok(()),
        }
    }
}

pub fn default_delta(n_targets: usize) -> f64 {
    1.0 / (1000.0 * n_targets.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub winner: ArmId,
    pub total_pulls: u64,
    /// Arms removed before the end, with their pull count at removal.
    pub eliminated_at: BTreeMap<ArmId, u64>,
    pub exact_fallback_used: bool,
    /// Final statistics per arm, in reward units (not sign-flipped).
    pub stats: Vec<ArmStats>,
    pub batches: usize,
}

/// Confidence radius `sigma * sqrt(2 ln(1/delta_step) / pulls)`.
pub fn hoeffding_ci(sigma: f64, pulls: u64, delta_step: f64) -> f64 {
    if pulls == 0 {
        return f64::INFINITY;
    }
    if sigma == 0.0 {
        return 0.0;
    }
    sigma * (2.0 * (1.0 / delta_step).ln() / pulls as f64).sqrt()
}

/// Sample standard deviation (n - 1 normalization). Fewer than two values
/// give [`SIGMA_FLOOR`].
pub fn estimate_sigma(rewards: &[f64]) -> f64 {
    if rewards.len() < 2 {
        return SIGMA_FLOOR;
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let ss: f64 = rewards.iter().map(|r| (r - mean) * (r - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// A best-arm search over a finite reference set.
///
/// The engine only ever asks for rewards of the surviving arms on one batch
/// of reference indices at a time, so implementations can share work across
/// arms (see the k-medoids SWAP problem).
pub trait SearchProblem: Sync {
    fn n_arms(&self) -> usize;

    fn reference_size(&self) -> usize;

    fn reward(&self, arm: ArmId, reference: usize) -> f64;

    /// Fill `out[a * refs.len() + r]` with `reward(arms[a], refs[r])`.
    fn batch_rewards(&self, arms: &[ArmId], refs: &[usize], out: &mut [f64]) {
        let b = refs.len();
        let fill = |(chunk, &arm): (&mut [f64], &ArmId)| {
            for (o, &j) in chunk.iter_mut().zip(refs) {
                *o = self.reward(arm, j);
            }
        };
        if arms.len() * b >= PAR_THRESHOLD {
            out.par_chunks_mut(b).zip(arms.par_iter()).for_each(fill);
        } else {
            out.chunks_mut(b).zip(arms.iter()).for_each(fill);
        }
    }

    /// Exact mean reward over the whole reference set.
    fn exact_means(&self, arms: &[ArmId]) -> Vec<f64> {
        let refs: Vec<usize> = (0..self.reference_size()).collect();
        let mut out = vec![0.0; arms.len() * refs.len()];
        self.batch_rewards(arms, &refs, &mut out);
        out.chunks(refs.len().max(1))
            .map(|c| c.iter().sum::<f64>() / refs.len() as f64)
            .collect()
    }
}

/// Adapter turning a closure `g(arm, reference)` into a [`SearchProblem`].
pub struct FnProblem<G> {
    pub n_arms: usize,
    pub reference_size: usize,
    pub g: G,
}

impl<G: Fn(ArmId, usize) -> f64 + Sync> SearchProblem for FnProblem<G> {
    fn n_arms(&self) -> usize {
        self.n_arms
    }

    fn reference_size(&self) -> usize {
        self.reference_size
    }

    fn reward(&self, arm: ArmId, reference: usize) -> f64 {
        (self.g)(arm, reference)
    }
}

/// Snapshot passed to observers after each batch's statistics are updated
/// and before pruning.
pub struct BatchView<'a> {
    pub batch: usize,
    pub active: &'a [ArmId],
    /// Indexed by arm id; only entries of `active` are current.
    pub stats: &'a [ArmStats],
}

/// Run Adaptive-Search on `problem`, returning the arm with the smallest
/// (`minimize`) or largest mean reward.
pub fn adaptive_search<P: SearchProblem + ?Sized>(
    problem: &P,
    config: &EliminationConfig,
    minimize: bool,
) -> Result<SearchOutcome> {
    adaptive_search_observed(problem, config, minimize, &mut |_| {})
}

pub fn adaptive_search_observed<P: SearchProblem + ?Sized>(
    problem: &P,
    config: &EliminationConfig,
    minimize: bool,
    observer: &mut dyn FnMut(&BatchView<'_>),
) -> Result<SearchOutcome> {
    config.validate()?;
    let n = problem.n_arms();
    if n == 0 {
        return Err(Error::EmptyInput("no arms to search"));
    }
    let ref_size = problem.reference_size();
    if ref_size == 0 {
        return Err(Error::EmptyInput("empty reference set"));
    }
    if let SigmaRule::PerArm(v) = &config.sigma {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: v.len(),
            });
        }
    }
    let unknown = ArmStats {
        mean_estimate: 0.0,
        ci_radius: f64::INFINITY,
        pulls: 0,
    };
    let mut outcome = SearchOutcome {
        winner: 0,
        total_pulls: 0,
        eliminated_at: BTreeMap::new(),
        exact_fallback_used: false,
        stats: vec![unknown; n],
        batches: 0,
    };
    if n == 1 {
        return Ok(outcome);
    }

    // Internally everything is minimized.
    let sign = if minimize { 1.0 } else { -1.0 };
    let cap = config
        .max_pulls_per_arm
        .unwrap_or(ref_size as u64)
        .min(ref_size as u64);
    let mut rng = stream(config.seed, config.stream_id);
    let mut order: Vec<usize> = match config.sampling {
        Sampling::WithoutReplacement => (0..ref_size).collect(),
        Sampling::WithReplacement => Vec::new(),
    };
    let mut active: Vec<ArmId> = (0..n).collect();
    let mut sums = vec![0.0; n];
    let mut sigma: Vec<f64> = match &config.sigma {
        SigmaRule::Fixed(s) => vec![*s; n],
        SigmaRule::PerArm(v) => v.clone(),
        SigmaRule::Estimate => vec![f64::INFINITY; n],
    };
    let mut used: u64 = 0;
    let mut refs = Vec::with_capacity(config.batch_size);
    let mut buf = Vec::new();

    loop {
        if used >= cap {
            return Ok(exact_fallback(problem, active, sign, outcome));
        }
        let b = (config.batch_size as u64).min(cap - used) as usize;
        draw_refs(
            &mut rng,
            config.sampling,
            &mut order,
            used as usize,
            b,
            ref_size,
            &mut refs,
        );
        buf.clear();
        buf.resize(active.len() * b, 0.0);
        problem.batch_rewards(&active, &refs, &mut buf);

        let first = used == 0;
        used += b as u64;
        outcome.total_pulls += (b * active.len()) as u64;
        outcome.batches += 1;
        for (chunk, &arm) in buf.chunks(b).zip(&active) {
            sums[arm] += chunk.iter().sum::<f64>();
            if first && config.sigma == SigmaRule::Estimate && b >= 2 {
                sigma[arm] = estimate_sigma(chunk).max(SIGMA_FLOOR);
            }
        }
        let exhausted =
            config.sampling == Sampling::WithoutReplacement && used as usize >= ref_size;
        for &arm in &active {
            let mean = sums[arm] / used as f64;
            outcome.stats[arm] = ArmStats {
                mean_estimate: mean,
                ci_radius: if exhausted {
                    0.0
                } else {
                    config.ci_policy.radius(sigma[arm], used, config.delta, n)
                },
                pulls: used,
            };
        }
        observer(&BatchView {
            batch: outcome.batches - 1,
            active: &active,
            stats: &outcome.stats,
        });

        if exhausted {
            // Every reference index has been seen once: the running means
            // are the exact objectives.
            outcome.exact_fallback_used = true;
            let means: Vec<f64> = active
                .iter()
                .map(|&a| outcome.stats[a].mean_estimate)
                .collect();
            outcome.winner = best_of(&active, &means, sign);
            record_losers(&mut outcome, &active);
            return Ok(outcome);
        }

        let signed = |s: &ArmStats| (sign * s.mean_estimate, s.ci_radius);
        let best_upper = active
            .iter()
            .map(|&a| {
                let (m, c) = signed(&outcome.stats[a]);
                m + c
            })
            .fold(f64::INFINITY, f64::min);
        let before = active.len();
        let stats = &outcome.stats;
        let eliminated = &mut outcome.eliminated_at;
        active.retain(|&a| {
            let (m, c) = signed(&stats[a]);
            let keep = m - c <= best_upper;
            if !keep {
                eliminated.insert(a, used);
            }
            keep
        });
        debug_assert!(!active.is_empty() && active.len() <= before);
        if active.len() == 1 {
            outcome.winner = active[0];
            return Ok(outcome);
        }
    }
}

fn draw_refs(
    rng: &mut Stream,
    sampling: Sampling,
    order: &mut [usize],
    used: usize,
    b: usize,
    ref_size: usize,
    refs: &mut Vec<usize>,
) {
    refs.clear();
    match sampling {
        Sampling::WithReplacement => refs.extend((0..b).map(|_| rng.random_range(0..ref_size))),
        Sampling::WithoutReplacement => {
            // Partial Fisher-Yates: positions `used..used + b` become the
            // next unseen indices.
            for i in used..used + b {
                let j = rng.random_range(i..ref_size);
                order.swap(i, j);
            }
            refs.extend_from_slice(&order[used..used + b]);
        }
    }
}

fn best_of(arms: &[ArmId], values: &[f64], sign: f64) -> ArmId {
    let mut best = 0;
    for i in 1..arms.len() {
        let (v, bv) = (sign * values[i], sign * values[best]);
        if v < bv || (v == bv && arms[i] < arms[best]) {
            best = i;
        }
    }
    arms[best]
}

fn record_losers(outcome: &mut SearchOutcome, active: &[ArmId]) {
    for &a in active {
        if a != outcome.winner {
            outcome.eliminated_at.insert(a, outcome.stats[a].pulls);
        }
    }
}

fn exact_fallback<P: SearchProblem + ?Sized>(
    problem: &P,
    active: Vec<ArmId>,
    sign: f64,
    mut outcome: SearchOutcome,
) -> SearchOutcome {
    let means = problem.exact_means(&active);
    let ref_size = problem.reference_size() as u64;
    outcome.total_pulls += ref_size * active.len() as u64;
    outcome.exact_fallback_used = true;
    for (&a, &m) in active.iter().zip(&means) {
        outcome.stats[a] = ArmStats {
            mean_estimate: m,
            ci_radius: 0.0,
            pulls: outcome.stats[a].pulls + ref_size,
        };
    }
    outcome.winner = best_of(&active, &means, sign);
    record_losers(&mut outcome, &active);
    outcome
}

/// Classic successive elimination over arms with an unbounded reward
/// stream: every surviving arm is pulled `batch_size` times per round with
/// independent draws from `sampler`, and the arm with the largest mean wins.
/// Reaching `max_pulls_per_arm` ends the search on the current means.
pub fn successive_elimination<S>(
    n_arms: usize,
    mut sampler: S,
    config: &EliminationConfig,
) -> Result<SearchOutcome>
where
    S: FnMut(ArmId, &mut Stream) -> f64,
{
    config.validate()?;
    if n_arms == 0 {
        return Err(Error::EmptyInput("no arms to search"));
    }
    let unknown = ArmStats {
        mean_estimate: 0.0,
        ci_radius: f64::INFINITY,
        pulls: 0,
    };
    let mut outcome = SearchOutcome {
        winner: 0,
        total_pulls: 0,
        eliminated_at: BTreeMap::new(),
        exact_fallback_used: false,
        stats: vec![unknown; n_arms],
        batches: 0,
    };
    if n_arms == 1 {
        return Ok(outcome);
    }
    let cap = config.max_pulls_per_arm.unwrap_or(u64::MAX);
    let mut rng = stream(config.seed, config.stream_id);
    let mut active: Vec<ArmId> = (0..n_arms).collect();
    let mut sums = vec![0.0; n_arms];
    let mut sigma = match &config.sigma {
        SigmaRule::Fixed(s) => vec![*s; n_arms],
        SigmaRule::PerArm(v) => v.clone(),
        SigmaRule::Estimate => vec![f64::INFINITY; n_arms],
    };
    let mut pulls: u64 = 0;
    let mut draws = Vec::with_capacity(config.batch_size);
    loop {
        let b = (config.batch_size as u64).min(cap - pulls) as usize;
        let first = pulls == 0;
        pulls += b as u64;
        outcome.batches += 1;
        for &arm in &active {
            draws.clear();
            draws.extend((0..b).map(|_| sampler(arm, &mut rng)));
            sums[arm] += draws.iter().sum::<f64>();
            if first && config.sigma == SigmaRule::Estimate && b >= 2 {
                sigma[arm] = estimate_sigma(&draws).max(SIGMA_FLOOR);
            }
            outcome.stats[arm] = ArmStats {
                mean_estimate: sums[arm] / pulls as f64,
                ci_radius: config
                    .ci_policy
                    .radius(sigma[arm], pulls, config.delta, n_arms),
                pulls,
            };
        }
        outcome.total_pulls += (b * active.len()) as u64;

        if pulls >= cap {
            let means: Vec<f64> = active
                .iter()
                .map(|&a| outcome.stats[a].mean_estimate)
                .collect();
            outcome.winner = best_of(&active, &means, -1.0);
            outcome.exact_fallback_used = true;
            record_losers(&mut outcome, &active);
            return Ok(outcome);
        }
        let best_lower = active
            .iter()
            .map(|&a| outcome.stats[a].lower())
            .fold(f64::NEG_INFINITY, f64::max);
        let stats = &outcome.stats;
        let eliminated = &mut outcome.eliminated_at;
        active.retain(|&a| {
            let keep = stats[a].upper() >= best_lower;
            if !keep {
                eliminated.insert(a, pulls);
            }
            keep
        });
        if active.len() == 1 {
            outcome.winner = active[0];
            return Ok(outcome);
        }
    }
}
