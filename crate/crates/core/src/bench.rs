//! Experiment harness: run an algorithm on a generated instance, count its
//! unit-cost work, compare against the exact oracle, sweep sizes and
//! confidence levels, fit slopes and persist records.
//!
//! Units: distance evaluations for k-medoids, histogram insertions for
//! node splitting, coordinate multiplications for inner product search.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::counter::SampleCounter;
use crate::data::{GeneratedData, GeneratorKind, GeneratorSpec, Matrix};
use crate::error::{Error, Result};
use crate::forest::{self, Impurity, MabConfig, NodeView, Targets};
use crate::kmedoids::{self, BanditPamConfig, Metric, PointSet};
use crate::mips::{self, MipsConfig, MipsInstance, SigmaSource};
use crate::rng::stream;

pub const SCHEMA_VERSION: u32 = 1;

/// JSON schema for [`RecordSet`] documents.
pub const RECORD_SCHEMA: &str = include_str!("../schema/experiment_records.v1.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    NaiveMips,
    Banditmips,
    BanditmipsAlpha,
    BucketAe,
    TopkMips,
    PamBuild,
    Pam,
    Banditpam,
    SplitExact,
    Mabsplit,
}

impl Algorithm {
    pub const ALL: [Algorithm; 10] = [
        Self::NaiveMips,
        Self::Banditmips,
        Self::BanditmipsAlpha,
        Self::BucketAe,
        Self::TopkMips,
        Self::PamBuild,
        Self::Pam,
        Self::Banditpam,
        Self::SplitExact,
        Self::Mabsplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::NaiveMips => "naive_mips",
            Self::Banditmips => "banditmips",
            Self::BanditmipsAlpha => "banditmips_alpha",
            Self::BucketAe => "bucket_ae",
            Self::TopkMips => "topk_mips",
            Self::PamBuild => "pam_build",
            Self::Pam => "pam",
            Self::Banditpam => "banditpam",
            Self::SplitExact => "split_exact",
            Self::Mabsplit => "mabsplit",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|a| a.name() == lower)
            .ok_or_else(|| Error::Unknown {
                kind: "algorithm",
                name: s.to_owned(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub algorithm: Algorithm,
    pub generator: GeneratorKind,
    pub n: usize,
    pub d: usize,
    /// Medoids, top-k size, or blob count; ignored elsewhere.
    pub k: usize,
    pub seed: u64,
    /// `None` uses each algorithm's default.
    pub delta: Option<f64>,
    pub batch_size: Option<usize>,
    /// Fixed sub-Gaussian scale for inner product search; `None` estimates.
    pub sigma: Option<f64>,
}

impl ExperimentSpec {
    pub fn new(algorithm: Algorithm, generator: GeneratorKind, n: usize, d: usize) -> Self {
        Self {
            algorithm,
            generator,
            n,
            d,
            k: 1,
            seed: 0,
            delta: None,
            batch_size: None,
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub algorithm: String,
    pub generator: String,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub seed: u64,
    pub delta: Option<f64>,
    pub sample_complexity: u64,
    /// Work of the exact oracle on the same instance.
    pub oracle_complexity: u64,
    /// BUILD steps plus SWAP searches for k-medoids, 1 otherwise.
    pub iterations: u64,
    pub wall_ms: f64,
    pub correct: bool,
    pub answer: String,
}

impl ExperimentRecord {
    pub fn speedup(&self) -> f64 {
        self.oracle_complexity as f64 / self.sample_complexity.max(1) as f64
    }

    pub fn per_iteration(&self) -> f64 {
        self.sample_complexity as f64 / self.iterations.max(1) as f64
    }
}

fn join(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn usage(spec: &ExperimentSpec) -> Error {
    Error::config(format!(
        "algorithm {} does not run on generator {}",
        spec.algorithm.name(),
        spec.generator.name()
    ))
}

struct Outcome {
    work: u64,
    oracle: u64,
    iterations: u64,
    correct: bool,
    answer: String,
}

fn run_mips(spec: &ExperimentSpec, query: Vec<f64>, atoms: Matrix) -> Result<Outcome> {
    let inst = MipsInstance::new(query, atoms)?;
    let mut cfg = MipsConfig {
        seed: spec.seed,
        ..Default::default()
    };
    if let Some(d) = spec.delta {
        cfg.delta = d;
    }
    if let Some(b) = spec.batch_size {
        cfg.batch_size = b;
    }
    if let Some(s) = spec.sigma {
        cfg.sigma = SigmaSource::Fixed(s);
    }
    let k = if spec.algorithm == Algorithm::TopkMips {
        spec.k
    } else {
        1
    };
    if k == 0 || k > inst.n() {
        return Err(Error::config(format!("k must be in 1..={}", inst.n())));
    }
    let oracle = naive_topk_set(&inst, k);
    let ans = match spec.algorithm {
        Algorithm::NaiveMips => mips::naive_mips(&inst),
        Algorithm::Banditmips => mips::banditmips(&inst, &cfg)?,
        Algorithm::BanditmipsAlpha => mips::banditmips_alpha(&inst, &cfg)?,
        Algorithm::BucketAe => mips::bucket_ae(&inst, 30, &cfg)?,
        Algorithm::TopkMips => mips::topk_mips(&inst, k, &cfg)?,
        _ => return Err(usage(spec)),
    };
    let mut got = ans.winners.clone();
    got.sort_unstable();
    Ok(Outcome {
        work: ans.n_multiplications,
        oracle: (inst.n() * inst.d()) as u64,
        iterations: 1,
        correct: got == oracle,
        answer: format!("winners={}", join(&ans.winners)),
    })
}

fn naive_topk_set(inst: &MipsInstance, k: usize) -> Vec<usize> {
    let mut all: Vec<(usize, f64)> = (0..inst.n()).map(|i| (i, inst.mu(i))).collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut top: Vec<usize> = all[..k].iter().map(|t| t.0).collect();
    top.sort_unstable();
    top
}

fn run_kmedoids(spec: &ExperimentSpec, points: Matrix) -> Result<Outcome> {
    let ps = PointSet::new(points, Metric::L2)?;
    let k = spec.k;
    if spec.algorithm == Algorithm::PamBuild {
        let conf = kmedoids::pam_build_exact(&ps, k)?;
        let mut set = conf.medoid_indices;
        set.sort_unstable();
        return Ok(Outcome {
            work: ps.evals(),
            oracle: ps.evals(),
            iterations: k as u64,
            correct: true,
            answer: format!("medoids={}", join(&set)),
        });
    }
    let exact = kmedoids::pam_fit(&ps, k, 10 * k)?;
    let oracle_work = exact.build_evals + exact.swap_evals;
    let mut oracle_set = exact.configuration.medoid_indices.clone();
    oracle_set.sort_unstable();
    let (work, iterations, mut set) = match spec.algorithm {
        Algorithm::Pam => (
            oracle_work,
            (k + exact.swap_iterations) as u64,
            exact.configuration.medoid_indices.clone(),
        ),
        Algorithm::Banditpam => {
            let mut cfg = BanditPamConfig::new(k);
            cfg.seed = spec.seed;
            cfg.delta = spec.delta;
            if let Some(b) = spec.batch_size {
                cfg.batch_size = b;
            }
            let fit = kmedoids::banditpam_fit(&ps, &cfg)?;
            (
                fit.build_evals + fit.swap_evals,
                (k + fit.swap_iterations) as u64,
                fit.configuration.medoid_indices,
            )
        }
        _ => return Err(usage(spec)),
    };
    set.sort_unstable();
    Ok(Outcome {
        work,
        oracle: oracle_work,
        iterations,
        correct: set == oracle_set,
        answer: format!("medoids={}", join(&set)),
    })
}

fn run_split(spec: &ExperimentSpec, x: Matrix, y: Targets) -> Result<Outcome> {
    let metric = match y {
        Targets::Classes { .. } => Impurity::Gini,
        Targets::Real(_) => Impurity::Mse,
    };
    let rows: Vec<usize> = (0..x.rows()).collect();
    let features: Vec<usize> = (0..x.cols()).collect();
    let node = NodeView {
        x: &x,
        y: &y,
        rows: &rows,
    };
    let cands = forest::node_edges(node, &features, 10, None);
    let exact_counter = SampleCounter::new();
    let exact = forest::split_exact(node, &cands, metric, &exact_counter)?;
    let key = |c: &Option<forest::SplitChoice>| c.as_ref().map(|c| (c.feature, c.edge));
    let (work, choice) = match spec.algorithm {
        Algorithm::SplitExact => (exact_counter.get(), exact.choice),
        Algorithm::Mabsplit => {
            let mut cfg = MabConfig::default();
            if let Some(d) = spec.delta {
                cfg.delta = d;
            }
            if let Some(b) = spec.batch_size {
                cfg.batch_size = b;
            }
            let counter = SampleCounter::new();
            let mut rng = stream(spec.seed, 1);
            let out = forest::mabsplit(node, &cands, metric, &cfg, &mut rng, &counter)?;
            (counter.get(), out.choice)
        }
        _ => return Err(usage(spec)),
    };
    Ok(Outcome {
        work,
        oracle: exact_counter.get(),
        iterations: 1,
        correct: key(&choice) == key(&exact.choice),
        answer: match &choice {
            Some(c) => format!("feature={};edge={}", c.feature, c.edge),
            None => "no_split".to_owned(),
        },
    })
}

/// Generate the instance, run the algorithm and its oracle.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentRecord> {
    let gen = GeneratorSpec {
        kind: spec.generator,
        n: spec.n,
        d: spec.d,
        k: spec.k.max(1),
        seed: spec.seed,
    };
    let data = gen.generate()?;
    let start = Instant::now();
    let out = match (spec.algorithm, data) {
        (
            Algorithm::NaiveMips
            | Algorithm::Banditmips
            | Algorithm::BanditmipsAlpha
            | Algorithm::BucketAe
            | Algorithm::TopkMips,
            GeneratedData::Mips { query, atoms },
        ) => run_mips(spec, query, atoms)?,
        (
            Algorithm::PamBuild | Algorithm::Pam | Algorithm::Banditpam,
            GeneratedData::Points { points, .. },
        ) => run_kmedoids(spec, points)?,
        (Algorithm::SplitExact | Algorithm::Mabsplit, GeneratedData::Points { points, labels })
            if spec.generator != GeneratorKind::GaussianBlobs =>
        {
            let k = labels.iter().max().map_or(2, |m| (m + 1).max(2));
            let y = Targets::Classes {
                labels,
                n_classes: k,
            };
            run_split(spec, points, y)?
        }
        (Algorithm::SplitExact | Algorithm::Mabsplit, GeneratedData::Regression { x, y }) => {
            run_split(spec, x, Targets::Real(y))?
        }
        _ => return Err(usage(spec)),
    };
    Ok(ExperimentRecord {
        algorithm: spec.algorithm.name().to_owned(),
        generator: spec.generator.name().to_owned(),
        n: spec.n,
        d: spec.d,
        k: spec.k,
        seed: spec.seed,
        delta: spec.delta,
        sample_complexity: out.work,
        oracle_complexity: out.oracle,
        iterations: out.iterations,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        correct: out.correct,
        answer: out.answer,
    })
}

/// Run independent cells concurrently; records come back in input order.
pub fn run_many(specs: &[ExperimentSpec]) -> Result<Vec<ExperimentRecord>> {
    specs.par_iter().map(run_experiment).collect()
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_se: f64,
    pub n: usize,
}

impl LinearFit {
    /// Two-sided 95% interval for the slope from Student's t with `n - 2`
    /// degrees of freedom.
    pub fn slope_ci95(&self) -> (f64, f64) {
        let dof = (self.n - 2) as f64;
        let t = StudentsT::new(0.0, 1.0, dof)
            .map(|s| s.inverse_cdf(0.975))
            .unwrap_or(f64::INFINITY);
        (
            self.slope - t * self.slope_se,
            self.slope + t * self.slope_se,
        )
    }
}

pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::config("a fit needs at least 3 points"));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::config("fit points must be finite"));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::config("fit needs at least two distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_se = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_se,
        n,
    })
}

/// Least-squares slope and R^2 on `(ln x, ln y)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::config("log-log fit needs positive x and y"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let fit = linear_fit(&logs)?;
    Ok((fit.slope, fit.r_squared))
}

/// Mean and the half-width `1.96 * stderr`.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N,
    D,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(Self::N),
            "d" => Ok(Self::D),
            _ => Err(Error::Unknown {
                kind: "axis",
                name: s.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub records: Vec<ExperimentRecord>,
    /// `(size, mean work per iteration)` per grid value.
    pub means: Vec<(f64, f64)>,
    pub loglog_slope: f64,
    pub loglog_r_squared: f64,
    /// Linear fit over every record, not just the means.
    pub linear: LinearFit,
}

/// Vary `n` or `d` over `values`, run every seed, and fit the work per
/// iteration against size.
pub fn scaling_sweep(
    base: &ExperimentSpec,
    axis: Axis,
    values: &[usize],
    seeds: &[u64],
) -> Result<ScalingResult> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::config("scaling needs sizes and seeds"));
    }
    let mut specs = Vec::new();
    for &v in values {
        for &s in seeds {
            let mut spec = base.clone();
            match axis {
                Axis::N => spec.n = v,
                Axis::D => spec.d = v,
            }
            spec.seed = s;
            specs.push(spec);
        }
    }
    let records = run_many(&specs)?;
    let size = |r: &ExperimentRecord| match axis {
        Axis::N => r.n as f64,
        Axis::D => r.d as f64,
    };
    let means: Vec<(f64, f64)> = records
        .chunks(seeds.len())
        .map(|c| {
            let ys: Vec<f64> = c.iter().map(ExperimentRecord::per_iteration).collect();
            (size(&c[0]), mean_ci95(&ys).0)
        })
        .collect();
    let (loglog_slope, loglog_r_squared) = loglog_slope(&means)?;
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (size(r), r.per_iteration()))
        .collect();
    Ok(ScalingResult {
        linear: linear_fit(&pts)?,
        records,
        means,
        loglog_slope,
        loglog_r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCell {
    pub delta: f64,
    pub accuracy: f64,
    pub median_speedup: f64,
    pub mean_speedup: f64,
    pub speedup_ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tradeoff {
    pub records: Vec<ExperimentRecord>,
    pub cells: Vec<TradeoffCell>,
}

/// Speedup (oracle work over algorithm work) and accuracy (fraction of
/// seeds matching the oracle) for every `delta`.
pub fn tradeoff_sweep(base: &ExperimentSpec, deltas: &[f64], seeds: &[u64]) -> Result<Tradeoff> {
    if deltas.is_empty() || seeds.is_empty() {
        return Err(Error::config("tradeoff needs deltas and seeds"));
    }
    let mut specs = Vec::new();
    for &delta in deltas {
        for &s in seeds {
            specs.push(ExperimentSpec {
                delta: Some(delta),
                seed: s,
                ..base.clone()
            });
        }
    }
    let records = run_many(&specs)?;
    let cells = records
        .chunks(seeds.len())
        .zip(deltas)
        .map(|(c, &delta)| {
            let sp: Vec<f64> = c.iter().map(ExperimentRecord::speedup).collect();
            let (mean, half) = mean_ci95(&sp);
            TradeoffCell {
                delta,
                accuracy: c.iter().filter(|r| r.correct).count() as f64 / c.len() as f64,
                median_speedup: median(&sp),
                mean_speedup: mean,
                speedup_ci95: half,
            }
        })
        .collect();
    Ok(Tradeoff { records, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Unknown {
                kind: "format",
                name: s.to_owned(),
            }),
        }
    }
}

/// Versioned JSON document of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSet {
    pub schema_version: u32,
    pub records: Vec<ExperimentRecord>,
}

const CSV_HEADER: [&str; 13] = [
    "algorithm",
    "generator",
    "n",
    "d",
    "k",
    "seed",
    "delta",
    "sample_complexity",
    "oracle_complexity",
    "iterations",
    "wall_ms",
    "correct",
    "answer",
];

pub fn write_records<W: Write>(records: &[ExperimentRecord], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in records {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| Error::io("<records>", e))?;
        }
        Format::Json => {
            let doc = RecordSet {
                schema_version: SCHEMA_VERSION,
                records: records.to_vec(),
            };
            serde_json::to_writer_pretty(out, &doc)?;
        }
    }
    Ok(())
}

pub fn read_records<R: Read>(format: Format, input: R) -> Result<Vec<ExperimentRecord>> {
    match format {
        Format::Csv => {
            let mut rd = csv::Reader::from_reader(input);
            let header = rd.headers()?.clone();
            if header.iter().ne(CSV_HEADER) {
                return Err(Error::Parse {
                    line: 1,
                    message: "unexpected record header".to_owned(),
                });
            }
            let mut out = Vec::new();
            for (i, row) in rd.deserialize().enumerate() {
                out.push(row.map_err(|e| Error::Parse {
                    line: i + 2,
                    message: e.to_string(),
                })?);
            }
            Ok(out)
        }
        Format::Json => {
            let doc: RecordSet = serde_json::from_reader(input)?;
            if doc.schema_version != SCHEMA_VERSION {
                return Err(Error::config(format!(
                    "unsupported schema version {}",
                    doc.schema_version
                )));
            }
            Ok(doc.records)
        }
    }
}

/// Write records to `path`.
pub fn emit(records: &[ExperimentRecord], format: Format, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(records, format, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_on_exact_lines() {
        let lin: Vec<(f64, f64)> = (1..=4).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let f = linear_fit(&lin).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let sq: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x| (x, x * x)).collect();
        assert!((loglog_slope(&sq).unwrap().0 - 2.0).abs() < 1e-12);
        let c: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&x| (x, 5.0)).collect();
        assert_eq!(loglog_slope(&c).unwrap().0, 0.0);
        assert!(loglog_slope(&[(1.0, 1.0), (0.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(linear_fit(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
    }

    #[test]
    fn median_and_ci() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (m, h) = mean_ci95(&[1.0, 1.0, 1.0]);
        assert_eq!((m, h), (1.0, 0.0));
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("nope".parse::<Algorithm>().is_err());
    }
}
