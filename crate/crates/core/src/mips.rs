//! Maximum inner product search by adaptive coordinate sampling.
//!
//! Atom `i`'s arm parameter is the normalized inner product
//! `mu_i = v_i . q / d`. Each round samples a batch of coordinates shared by
//! every surviving atom; an atom's running mean of `v_iJ * q_J` estimates
//! `mu_i`. Atoms whose upper bound falls below the best lower bound are
//! dropped. An atom that has used `d` samples is evaluated exactly, so no
//! atom ever costs more than `2d` multiplications.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{dot, Matrix};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Number of coordinates used to estimate atom norms in `bucket_ae`.
pub const NORM_SAMPLE: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct MipsInstance {
    pub query: Vec<f64>,
    pub atoms: Matrix,
}

impl MipsInstance {
    pub fn new(query: Vec<f64>, atoms: Matrix) -> Result<Self> {
        if atoms.rows() == 0 || atoms.cols() == 0 {
            return Err(Error::EmptyInput("no atoms or zero dimension"));
        }
        if query.len() != atoms.cols() {
            return Err(Error::DimensionMismatch {
                expected: atoms.cols(),
                actual: query.len(),
            });
        }
        if query.iter().chain(atoms.as_slice()).any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite entry in query or atoms"));
        }
        Ok(Self { query, atoms })
    }

    pub fn n(&self) -> usize {
        self.atoms.rows()
    }

    pub fn d(&self) -> usize {
        self.query.len()
    }

    /// Exact normalized inner product of atom `i`.
    pub fn mu(&self, i: usize) -> f64 {
        dot(self.atoms.row(i), &self.query) / self.d() as f64
    }
}

/// Sub-Gaussian scale of the coordinate products.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    Fixed(f64),
    /// Products known to lie in `[lo, hi]`; uses `(hi^2 - lo^2) / 4`.
    FromBounds {
        lo: f64,
        hi: f64,
    },
    /// Three times the pooled within-atom standard deviation of the first
    /// batch.
    Estimate,
}

impl SigmaSource {
    fn resolve(self) -> Result<Option<f64>> {
        let s = match self {
            SigmaSource::Fixed(s) => s,
            SigmaSource::FromBounds { lo, hi } => (hi * hi - lo * lo) / 4.0,
            SigmaSource::Estimate => return Ok(None),
        };
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::config(format!(
                "sigma must be positive and finite, got {s}"
            )));
        }
        Ok(Some(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipsConfig {
    pub delta: f64,
    pub batch_size: usize,
    pub sigma: SigmaSource,
    pub seed: u64,
}

impl Default for MipsConfig {
    fn default() -> Self {
        Self {
            delta: 0.001,
            batch_size: 16,
            sigma: SigmaSource::Estimate,
            seed: 0,
        }
    }
}

impl MipsConfig {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta must be in (0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if self.sigma == SigmaSource::Estimate && self.batch_size < 2 {
            return Err(Error::config(
                "estimating sigma needs a batch of at least 2",
            ));
        }
        self.sigma.resolve().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipsAnswer {
    /// Best first.
    pub winners: Vec<usize>,
    /// Estimated (or exact) normalized inner products of `winners`.
    pub mu_hats: Vec<f64>,
    pub n_multiplications: u64,
    /// Comparisons spent sorting coordinates (sorted variant only).
    pub sort_cost: u64,
    pub fallback: bool,
}

impl MipsAnswer {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Confidence radius after `samples` coordinates for one of `n` atoms.
pub fn mips_ci(sigma: f64, samples: u64, n: usize, delta: f64) -> f64 {
    if samples < 2 {
        return f64::INFINITY;
    }
    let used = (samples - 1) as f64;
    sigma * (2.0 * (4.0 * n as f64 * used * used / delta).ln() / samples as f64).sqrt()
}

fn top_k_by(values: &[(usize, f64)], k: usize) -> Vec<(usize, f64)> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

/// Full scan: `n * d` multiplications, ties to the lowest index.
pub fn naive_mips(inst: &MipsInstance) -> MipsAnswer {
    naive_topk(inst, 1)
}

fn naive_topk(inst: &MipsInstance, k: usize) -> MipsAnswer {
    let all: Vec<(usize, f64)> = (0..inst.n()).map(|i| (i, inst.mu(i))).collect();
    let top = top_k_by(&all, k);
    MipsAnswer {
        winners: top.iter().map(|t| t.0).collect(),
        mu_hats: top.iter().map(|t| t.1).collect(),
        n_multiplications: (inst.n() * inst.d()) as u64,
        sort_cost: 0,
        fallback: false,
    }
}

/// Sampling distributions over coordinates.
enum Source<'a> {
    Uniform,
    Weighted {
        dist: WeightedIndex<f64>,
        w: &'a [f64],
    },
    /// Fixed order without replacement.
    Ordered(Vec<usize>),
}

struct Elimination<'a> {
    inst: &'a MipsInstance,
    delta: f64,
    batch: usize,
    k: usize,
    sigma: Option<f64>,
    counts: Vec<u64>,
    sums: Vec<f64>,
    sumsqs: Vec<f64>,
    exact: Vec<Option<f64>>,
    active: Vec<bool>,
    mults: u64,
    fallback: bool,
    cursor: usize,
}

impl<'a> Elimination<'a> {
    fn new(inst: &'a MipsInstance, cfg: &MipsConfig, k: usize) -> Result<Self> {
        cfg.validate()?;
        let n = inst.n();
        Ok(Self {
            inst,
            delta: cfg.delta,
            batch: cfg.batch_size,
            k,
            sigma: cfg.sigma.resolve()?,
            counts: vec![0; n],
            sums: vec![0.0; n],
            sumsqs: vec![0.0; n],
            exact: vec![None; n],
            active: vec![true; n],
            mults: 0,
            fallback: false,
            cursor: 0,
        })
    }

    fn restrict(&mut self, atoms: &[usize]) {
        self.active.iter_mut().for_each(|a| *a = false);
        atoms.iter().for_each(|&i| self.active[i] = true);
    }

    fn live(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.active.len()).filter(|&i| self.active[i])
    }

    fn mean(&self, i: usize) -> f64 {
        self.exact[i].unwrap_or(self.sums[i] / self.counts[i].max(1) as f64)
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        if let Some(m) = self.exact[i] {
            return (m, m);
        }
        let r = match self.sigma {
            Some(s) => mips_ci(s, self.counts[i], self.inst.n(), self.delta),
            None => f64::INFINITY,
        };
        let m = self.mean(i);
        (m - r, m + r)
    }

    fn add_sample(&mut self, i: usize, x: f64) {
        self.counts[i] += 1;
        self.sums[i] += x;
        self.sumsqs[i] += x * x;
        self.mults += 1;
    }

    fn maybe_estimate_sigma(&mut self) {
        if self.sigma.is_some() {
            return;
        }
        let (mut ss, mut dof) = (0.0, 0.0);
        for i in self.live().collect::<Vec<_>>() {
            let c = self.counts[i] as f64;
            if self.exact[i].is_some() || c < 2.0 {
                continue;
            }
            ss += (self.sumsqs[i] - self.sums[i] * self.sums[i] / c).max(0.0);
            dof += c - 1.0;
        }
        if dof > 0.0 {
            // all-zero products give a zero scale; keep it tiny but positive
            self.sigma = Some((3.0 * (ss / dof).sqrt()).max(f64::MIN_POSITIVE));
        }
    }

    fn make_exact(&mut self, i: usize) {
        self.mults += self.inst.d() as u64;
        self.exact[i] = Some(self.inst.mu(i));
        self.fallback = true;
    }

    /// Drop atoms whose upper bound is below the k-th largest lower bound
    /// among `pool`.
    fn prune(&mut self, pool: &[usize], extra_lcb: f64) {
        let mut lcbs: Vec<f64> = pool.iter().map(|&i| self.bounds(i).0).collect();
        lcbs.sort_by(|a, b| b.total_cmp(a));
        let thr = lcbs
            .get(self.k - 1)
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
            .max(extra_lcb);
        for &i in pool {
            if self.bounds(i).1 < thr {
                self.active[i] = false;
            }
        }
    }

    fn draw(&mut self, src: &Source<'_>, rng: &mut Stream, b: usize) -> Vec<usize> {
        let d = self.inst.d();
        match src {
            Source::Uniform => (0..b).map(|_| rng.random_range(0..d)).collect(),
            Source::Weighted { dist, .. } => (0..b).map(|_| dist.sample(rng)).collect(),
            Source::Ordered(order) => {
                let out = order[self.cursor..self.cursor + b].to_vec();
                self.cursor += b;
                out
            }
        }
    }

    fn sample(&mut self, src: &Source<'_>, rng: &mut Stream, atoms: &[usize]) {
        let d = self.inst.d();
        let max_count = atoms.iter().map(|&i| self.counts[i]).max().unwrap_or(0) as usize;
        let b = self.batch.min(d - max_count);
        let coords = self.draw(src, rng, b);
        let q = &self.inst.query;
        for &i in atoms {
            let row = self.inst.atoms.row(i);
            for &j in &coords {
                let x = match src {
                    Source::Weighted { w, .. } => row[j] * q[j] / (d as f64 * w[j]),
                    _ => row[j] * q[j],
                };
                self.add_sample(i, x);
            }
        }
    }

    /// Run rounds over `pool` until at most `k` atoms survive or every
    /// survivor is exact. `extra_lcb` is a lower bound known from outside
    /// the pool (used by bucketing).
    fn run(&mut self, src: &Source<'_>, rng: &mut Stream, pool: &[usize], extra_lcb: f64) {
        let d = self.inst.d() as u64;
        loop {
            self.maybe_estimate_sigma();
            let live: Vec<usize> = pool.iter().copied().filter(|&i| self.active[i]).collect();
            self.prune(&live, extra_lcb);
            let live: Vec<usize> = live.into_iter().filter(|&i| self.active[i]).collect();
            if live.len() <= self.k {
                return;
            }
            if let Source::Ordered(_) = src {
                if self.cursor as u64 >= d {
                    for &i in &live {
                        self.exact[i] = Some(self.sums[i] / d as f64);
                    }
                    self.fallback = true;
                    continue;
                }
            } else {
                for &i in &live {
                    if self.exact[i].is_none() && self.counts[i] >= d {
                        self.make_exact(i);
                    }
                }
            }
            let sampling: Vec<usize> = live
                .iter()
                .copied()
                .filter(|&i| self.exact[i].is_none())
                .collect();
            if sampling.is_empty() {
                return;
            }
            self.sample(src, rng, &sampling);
        }
    }

    /// Top `k` survivors of `pool`; ties among survivors that could not be
    /// separated are broken by exact values.
    fn answer(mut self, pool: &[usize], sort_cost: u64) -> MipsAnswer {
        let live: Vec<usize> = pool.iter().copied().filter(|&i| self.active[i]).collect();
        let vals: Vec<(usize, f64)> = live.iter().map(|&i| (i, self.mean(i))).collect();
        let top = top_k_by(&vals, self.k);
        self.active.iter_mut().for_each(|a| *a = false);
        MipsAnswer {
            winners: top.iter().map(|t| t.0).collect(),
            mu_hats: top.iter().map(|t| t.1).collect(),
            n_multiplications: self.mults,
            sort_cost,
            fallback: self.fallback,
        }
    }
}

fn all_atoms(inst: &MipsInstance) -> Vec<usize> {
    (0..inst.n()).collect()
}

/// Uniform coordinate sampling with replacement.
pub fn banditmips(inst: &MipsInstance, cfg: &MipsConfig) -> Result<MipsAnswer> {
    topk_mips(inst, 1, cfg)
}

/// The `k` atoms with the largest inner products, best first. Sampling
/// stops once only `k` atoms survive.
pub fn topk_mips(inst: &MipsInstance, k: usize, cfg: &MipsConfig) -> Result<MipsAnswer> {
    if k == 0 || k > inst.n() {
        return Err(Error::config(format!("k must be in 1..={}", inst.n())));
    }
    let mut e = Elimination::new(inst, cfg, k)?;
    let mut rng = stream(cfg.seed, 0);
    let pool = all_atoms(inst);
    e.run(&Source::Uniform, &mut rng, &pool, f64::NEG_INFINITY);
    Ok(e.answer(&pool, 0))
}

/// Coordinates in decreasing `|q_j|` order, without replacement. The sort's
/// comparison count is reported separately.
pub fn banditmips_alpha(inst: &MipsInstance, cfg: &MipsConfig) -> Result<MipsAnswer> {
    let mut e = Elimination::new(inst, cfg, 1)?;
    let mut order: Vec<usize> = (0..inst.d()).collect();
    let mut comparisons = 0u64;
    order.sort_by(|&a, &b| {
        comparisons += 1;
        inst.query[b]
            .abs()
            .total_cmp(&inst.query[a].abs())
            .then(a.cmp(&b))
    });
    let mut rng = stream(cfg.seed, 0);
    let pool = all_atoms(inst);
    e.run(&Source::Ordered(order), &mut rng, &pool, f64::NEG_INFINITY);
    Ok(e.answer(&pool, comparisons))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateWeights {
    pub w: Vec<f64>,
    /// Temperature of the approximation `w_j ~ q_j^(2 beta)`; `None` for
    /// the variance-optimal weights.
    pub beta: Option<f64>,
}

impl CoordinateWeights {
    pub fn uniform(d: usize) -> Self {
        Self {
            w: vec![1.0 / d as f64; d],
            beta: Some(0.0),
        }
    }

    fn normalized(raw: Vec<f64>, beta: Option<f64>) -> Result<Self> {
        let s: f64 = raw.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::config("weights need a nonzero query"));
        }
        Ok(Self {
            w: raw.into_iter().map(|v| v / s).collect(),
            beta,
        })
    }
}

/// Weights minimizing the summed variance of the importance-weighted
/// estimators: `w_j ~ |q_j| * ||v_.j||`.
pub fn optimal_weights(inst: &MipsInstance) -> Result<CoordinateWeights> {
    let d = inst.d();
    let mut col = vec![0.0; d];
    for row in inst.atoms.iter_rows() {
        for (c, v) in col.iter_mut().zip(row) {
            *c += v * v;
        }
    }
    let raw = (0..d)
        .map(|j| (inst.query[j] * inst.query[j] * col[j]).sqrt())
        .collect();
    CoordinateWeights::normalized(raw, None)
}

/// Query-only approximation `w_j ~ q_j^(2 beta)`; `beta = 0` is uniform.
pub fn approximate_weights(query: &[f64], beta: f64) -> Result<CoordinateWeights> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::config("beta must be finite and non-negative"));
    }
    if query.iter().all(|&q| q == 0.0) {
        return Err(Error::config("weights need a nonzero query"));
    }
    let raw = query
        .iter()
        .map(|&q| if beta == 0.0 { 1.0 } else { (q * q).powf(beta) })
        .collect();
    CoordinateWeights::normalized(raw, Some(beta))
}

/// One importance-weighted sample of `mu_i` at coordinate `j`.
pub fn weighted_estimate(inst: &MipsInstance, w: &CoordinateWeights, i: usize, j: usize) -> f64 {
    assert!(w.w[j] > 0.0, "coordinate {j} has zero sampling weight");
    inst.atoms.get(i, j) * inst.query[j] / (inst.d() as f64 * w.w[j])
}

/// `sum_i Var(X_iJ)` for `J ~ w`, computed exactly.
pub fn combined_variance(inst: &MipsInstance, w: &CoordinateWeights) -> f64 {
    let d = inst.d() as f64;
    let mut total = 0.0;
    for i in 0..inst.n() {
        let row = inst.atoms.row(i);
        let mut second = 0.0;
        for (j, (&v, &q)) in row.iter().zip(&inst.query).enumerate() {
            let p = v * q;
            if w.w[j] > 0.0 {
                second += p * p / (d * d * w.w[j]);
            } else if p != 0.0 {
                return f64::INFINITY;
            }
        }
        let mu = inst.mu(i);
        total += second - mu * mu;
    }
    total
}

/// Importance-weighted coordinate sampling with replacement.
pub fn banditmips_weighted(
    inst: &MipsInstance,
    w: &CoordinateWeights,
    cfg: &MipsConfig,
) -> Result<MipsAnswer> {
    if w.w.len() != inst.d() {
        return Err(Error::DimensionMismatch {
            expected: inst.d(),
            actual: w.w.len(),
        });
    }
    let dist = WeightedIndex::new(&w.w).map_err(|e| Error::config(format!("bad weights: {e}")))?;
    let mut e = Elimination::new(inst, cfg, 1)?;
    let mut rng = stream(cfg.seed, 0);
    let pool = all_atoms(inst);
    e.run(
        &Source::Weighted { dist, w: &w.w },
        &mut rng,
        &pool,
        f64::NEG_INFINITY,
    );
    Ok(e.answer(&pool, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartAnswers {
    pub answers: Vec<MipsAnswer>,
    /// Multiplications each query spent on the shared coordinates; the
    /// answers' counts cover only the adaptive rounds.
    pub warm_multiplications: Vec<u64>,
    pub cached_coordinates: Vec<usize>,
}

/// Answer many queries against one atom set. A random coordinate subset is
/// drawn once and shared: every query seeds all atoms' running means with
/// that subset before its adaptive rounds.
pub fn warm_start_batch(
    queries: &[Vec<f64>],
    atoms: &Matrix,
    cache_fraction: f64,
    cfg: &MipsConfig,
) -> Result<WarmStartAnswers> {
    if queries.is_empty() {
        return Err(Error::EmptyInput("no queries"));
    }
    if !(0.0..=1.0).contains(&cache_fraction) {
        return Err(Error::config("cache fraction must be in [0, 1]"));
    }
    let d = atoms.cols();
    let m = ((cache_fraction * d as f64).round() as usize).min(d);
    let mut rng = stream(cfg.seed, u64::MAX);
    let mut cached = index::sample(&mut rng, d, m).into_vec();
    cached.sort_unstable();
    let mut answers = Vec::with_capacity(queries.len());
    let mut warm = Vec::with_capacity(queries.len());
    for (qi, q) in queries.iter().enumerate() {
        let inst = MipsInstance::new(q.clone(), atoms.clone())?;
        let mut e = Elimination::new(&inst, cfg, 1)?;
        for i in 0..inst.n() {
            let row = atoms.row(i);
            for &j in &cached {
                e.add_sample(i, row[j] * q[j]);
            }
        }
        warm.push(e.mults);
        e.mults = 0;
        let mut qrng = stream(cfg.seed, qi as u64 + 1);
        let pool = all_atoms(&inst);
        e.run(&Source::Uniform, &mut qrng, &pool, f64::NEG_INFINITY);
        answers.push(e.answer(&pool, 0));
    }
    Ok(WarmStartAnswers {
        answers,
        warm_multiplications: warm,
        cached_coordinates: cached,
    })
}

/// Atoms sorted by estimated norm (largest first) and searched bucket by
/// bucket. An atom is dropped as soon as its upper bound is below the best
/// lower bound seen in any bucket; bucket winners then compete in a final
/// round. Norm estimation multiplications are included in the count.
pub fn bucket_ae(inst: &MipsInstance, bucket_size: usize, cfg: &MipsConfig) -> Result<MipsAnswer> {
    if bucket_size == 0 {
        return Err(Error::config("bucket size must be positive"));
    }
    let (n, d) = (inst.n(), inst.d());
    let mut e = Elimination::new(inst, cfg, 1)?;
    let mut rng = stream(cfg.seed, 0);

    let s = NORM_SAMPLE.min(d);
    let coords = index::sample(&mut rng, d, s).into_vec();
    let norms: Vec<f64> = (0..n)
        .map(|i| {
            let row = inst.atoms.row(i);
            coords.iter().map(|&j| row[j] * row[j]).sum()
        })
        .collect();
    e.mults += (n * s) as u64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let mut best_lcb = f64::NEG_INFINITY;
    let mut finalists = Vec::new();
    for bucket in order.chunks(bucket_size) {
        e.restrict(&[finalists.as_slice(), bucket].concat());
        e.run(&Source::Uniform, &mut rng, bucket, best_lcb);
        for &i in bucket {
            if e.active[i] {
                best_lcb = best_lcb.max(e.bounds(i).0);
                finalists.push(i);
            }
        }
        finalists.retain(|&i| e.bounds(i).1 >= best_lcb);
    }
    e.restrict(&finalists);
    e.run(&Source::Uniform, &mut rng, &finalists, f64::NEG_INFINITY);
    Ok(e.answer(&finalists, 0))
}

/// MIPS solver used by matching pursuit.
#[derive(Debug, Clone, PartialEq)]
pub enum MpSolver {
    Naive,
    Bandit(MipsConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpComponent {
    pub atom: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpResult {
    pub components: Vec<MpComponent>,
    /// Residual norm before the first step and after each step.
    pub residual_norms: Vec<f64>,
    pub n_multiplications: u64,
}

/// Greedy decomposition: pick the atom with the largest inner product with
/// the residual, record `<r, v> / <v, v>`, subtract the projection, repeat.
/// Stops early once the residual vanishes.
pub fn matching_pursuit(
    signal: &[f64],
    atoms: &Matrix,
    n_components: usize,
    solver: &MpSolver,
) -> Result<MpResult> {
    if n_components == 0 {
        return Err(Error::config("n_components must be positive"));
    }
    let norms: Vec<f64> = atoms.iter_rows().map(|r| dot(r, r)).collect();
    if norms.contains(&0.0) {
        return Err(Error::config("dictionary contains a zero atom"));
    }
    let mut residual = signal.to_vec();
    let start = dot(&residual, &residual).sqrt();
    let mut out = MpResult {
        components: Vec::new(),
        residual_norms: vec![start],
        n_multiplications: 0,
    };
    for step in 0..n_components {
        let norm = *out.residual_norms.last().expect("seeded above");
        if norm <= 1e-12 * start.max(1.0) {
            break;
        }
        let inst = MipsInstance::new(residual.clone(), atoms.clone())?;
        let ans = match solver {
            MpSolver::Naive => naive_mips(&inst),
            MpSolver::Bandit(cfg) => {
                let cfg = MipsConfig {
                    seed: crate::rng::derive_seed(cfg.seed, step as u64),
                    ..cfg.clone()
                };
                banditmips(&inst, &cfg)?
            }
        };
        let a = ans.winners[0];
        let v = atoms.row(a);
        let coef = dot(&residual, v) / norms[a];
        out.n_multiplications += ans.n_multiplications + residual.len() as u64;
        for (r, x) in residual.iter_mut().zip(v) {
            *r -= coef * x;
        }
        out.components.push(MpComponent {
            atom: a,
            coefficient: coef,
        });
        out.residual_norms.push(dot(&residual, &residual).sqrt());
    }
    Ok(out)
}
