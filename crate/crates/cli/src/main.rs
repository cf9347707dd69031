use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use armsearch::bench::{self, Algorithm, Axis, ExperimentSpec, Format};
use armsearch::data::{
    self, load_matrix_csv, write_matrix_csv, GeneratedData, GeneratorKind, GeneratorSpec, Matrix,
};
use armsearch::forest::{self, ForestConfig, Impurity, Splitter, TabularDataset, Variant};
use armsearch::kmedoids::{self, BanditPamConfig, Metric, PointSet};
use armsearch::mips::{self, MipsConfig, MipsInstance, MpSolver, SigmaSource};
use armsearch::Error;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "armsearch",
    version,
    about = "Adaptive sampling for k-medoids, forests and inner product search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// Write results here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
    /// Also run the exact oracle and report agreement.
    #[arg(long = "oracle-check")]
    oracle_check: bool,
}

#[derive(Args, Clone)]
struct Source {
    /// Named synthetic generator.
    #[arg(long, conflicts_with = "input")]
    generator: Option<String>,
    /// CSV input file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster points into k medoids.
    Kmedoids {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// banditpam or pam
        #[arg(long, default_value = "banditpam")]
        algorithm: String,
        /// l1, l2 or cosine
        #[arg(long, default_value = "l2")]
        metric: String,
    },
    /// Train a forest and report held-out accuracy or MSE.
    Forest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        /// Treat the last CSV column as a real target.
        #[arg(long)]
        regression: bool,
        #[arg(long, default_value = "rf")]
        variant: String,
        #[arg(long, default_value = "mabsplit")]
        splitter: String,
        #[arg(long, default_value_t = 10)]
        trees: usize,
        #[arg(long = "max-depth")]
        max_depth: Option<usize>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long)]
        impurity: Option<String>,
        #[arg(long = "test-fraction", default_value_t = 0.2)]
        test_fraction: f64,
        /// Save the trained model as JSON.
        #[arg(long = "model-out")]
        model_out: Option<PathBuf>,
    },
    /// Maximum inner product search.
    Mips {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        /// Query vector CSV (one row) used with --input.
        #[arg(long)]
        query: Option<PathBuf>,
        /// naive, banditmips, alpha, bucket_ae or topk
        #[arg(long, default_value = "banditmips")]
        algorithm: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Matching pursuit on the SimpleSong signal or a CSV signal.
    Mp {
        #[command(flatten)]
        common: Common,
        /// Song repetitions.
        #[arg(long, default_value_t = 1)]
        t: usize,
        /// Signal CSV (one row); requires --atoms.
        #[arg(long)]
        signal: Option<PathBuf>,
        #[arg(long)]
        atoms: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        components: usize,
        /// naive or bandit
        #[arg(long, default_value = "bandit")]
        solver: String,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Write a synthetic dataset as CSV.
    Gen {
        #[arg(long)]
        generator: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the query of inner product instances.
        #[arg(long = "query-out")]
        query_out: Option<PathBuf>,
    },
    /// Experiment sweeps.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

#[derive(Args, Clone)]
struct BenchBase {
    #[arg(long)]
    algorithm: String,
    #[arg(long)]
    generator: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Work against problem size, with log-log and linear fits.
    Scaling {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        base: BenchBase,
        /// n or d
        #[arg(long, default_value = "n")]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
    /// Speedup and accuracy across confidence levels.
    Tradeoff {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        base: BenchBase,
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
    },
}

type Res<T> = std::result::Result<T, Error>;

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Res<T> {
    s.parse()
}

fn sink(out: &Option<PathBuf>) -> Res<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn io_err(p: &Path, e: io::Error) -> Error {
    Error::Io {
        path: p.to_owned(),
        source: e,
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(cell).collect::<Vec<_>>().join(";"),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// A report object as JSON, or as a one-row CSV of its top-level fields.
fn write_report(common: &Common, report: &Value) -> Res<()> {
    let format: Format = parse(&common.format)?;
    let mut w = sink(&common.out)?;
    let res = match format {
        Format::Json => serde_json::to_writer_pretty(&mut w, report)
            .map_err(Error::from)
            .and_then(|_| writeln!(w).map_err(|e| io_err(Path::new("<out>"), e))),
        Format::Csv => {
            let obj = report
                .as_object()
                .ok_or_else(|| Error::InvalidConfig("report is not an object".into()))?;
            let mut cw = csv::Writer::from_writer(&mut w);
            cw.write_record(obj.keys())?;
            cw.write_record(obj.values().map(cell))?;
            cw.flush().map_err(|e| io_err(Path::new("<out>"), e))
        }
    };
    res?;
    w.flush().map_err(|e| io_err(Path::new("<out>"), e))
}

fn generate(source: &Source, kind: &str, k: usize, seed: u64) -> Res<GeneratedData> {
    GeneratorSpec {
        kind: parse(kind)?,
        n: source.n,
        d: source.d,
        k,
        seed,
    }
    .generate()
}

fn need_source(source: &Source) -> Res<()> {
    if source.generator.is_none() && source.input.is_none() {
        return Err(Error::InvalidConfig("pass --generator or --input".into()));
    }
    Ok(())
}

fn run_kmedoids(
    common: &Common,
    source: &Source,
    k: usize,
    algorithm: &str,
    metric: &str,
) -> Res<()> {
    need_source(source)?;
    let points = match (&source.generator, &source.input) {
        (Some(g), _) => match generate(source, g, k, common.seed)? {
            GeneratedData::Points { points, .. } => points,
            GeneratedData::Mips { atoms, .. } => atoms,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "generator {g} has no point set"
                )))
            }
        },
        (None, Some(p)) => load_matrix_csv(p, false)?.features,
        _ => unreachable!(),
    };
    let ps = PointSet::new(points, parse::<Metric>(metric)?)?;
    let fit = match algorithm {
        "banditpam" => {
            let mut cfg = BanditPamConfig::new(k);
            cfg.seed = common.seed;
            cfg.delta = common.delta;
            if let Some(b) = common.batch_size {
                cfg.batch_size = b;
            }
            kmedoids::banditpam_fit(&ps, &cfg)?
        }
        "pam" => kmedoids::pam_fit(&ps, k, 10 * k)?,
        other => {
            return Err(Error::Unknown {
                kind: "k-medoids algorithm",
                name: other.into(),
            })
        }
    };
    let mut report = serde_json::to_value(fit.report())?;
    if common.oracle_check {
        ps.reset_evals();
        let exact = kmedoids::pam_fit(&ps, k, 10 * k)?;
        let mut a = fit.configuration.medoid_indices.clone();
        let mut b = exact.configuration.medoid_indices.clone();
        a.sort_unstable();
        b.sort_unstable();
        report["oracle_match"] = json!(a == b);
        report["oracle_loss"] = json!(exact.loss());
    }
    write_report(common, &report)
}

#[allow(clippy::too_many_arguments)]
fn run_forest(
    common: &Common,
    source: &Source,
    regression: bool,
    variant: &str,
    splitter: &str,
    trees: usize,
    max_depth: Option<usize>,
    budget: Option<u64>,
    bins: usize,
    impurity: Option<&str>,
    test_fraction: f64,
    model_out: Option<&Path>,
) -> Res<()> {
    need_source(source)?;
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidConfig(
            "test fraction must be in [0, 1)".into(),
        ));
    }
    let data = match (&source.generator, &source.input) {
        (Some(g), _) => match generate(source, g, 3, common.seed)? {
            GeneratedData::Points { points, labels } => {
                TabularDataset::classification(points, labels)?
            }
            GeneratedData::Regression { x, y } => TabularDataset::regression(x, y)?,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "generator {g} has no tabular data"
                )))
            }
        },
        (None, Some(p)) => TabularDataset::from_table(load_matrix_csv(p, true)?, !regression)?,
        _ => unreachable!(),
    };
    let n_test = (data.n_rows() as f64 * test_fraction).round() as usize;
    let n_train = data.n_rows() - n_test;
    if n_train == 0 {
        return Err(Error::InvalidConfig("no rows left for training".into()));
    }
    let train = data.select_rows(&(0..n_train).collect::<Vec<_>>());
    let test = if n_test > 0 {
        data.select_rows(&(n_train..data.n_rows()).collect::<Vec<_>>())
    } else {
        train.clone()
    };
    let is_class = matches!(data.y, forest::Targets::Classes { .. });
    let mut cfg = ForestConfig {
        variant: parse::<Variant>(variant)?,
        splitter: parse::<Splitter>(splitter)?,
        n_trees: trees,
        max_depth,
        budget,
        bins,
        impurity: match impurity {
            Some(s) => parse::<Impurity>(s)?,
            None if is_class => Impurity::Gini,
            None => Impurity::Mse,
        },
        ..Default::default()
    };
    if let Some(d) = common.delta {
        cfg.delta = d;
    }
    if let Some(b) = common.batch_size {
        cfg.batch_size = b;
    }
    let model = forest::fit_forest(&cfg, &train, common.seed)?;
    let mut report = serde_json::to_value(model.report(&test)?)?;
    if common.oracle_check {
        let exact_cfg = ForestConfig {
            splitter: Splitter::Exact,
            ..cfg.clone()
        };
        let exact = forest::fit_forest(&exact_cfg, &train, common.seed)?;
        report["oracle_accuracy_or_mse"] = json!(exact.evaluate(&test)?);
        report["oracle_n_insertions"] = json!(exact.n_insertions);
    }
    if let Some(p) = model_out {
        std::fs::write(p, model.to_json()?).map_err(|e| io_err(p, e))?;
    }
    write_report(common, &report)
}

fn mips_config(common: &Common, sigma: Option<f64>) -> MipsConfig {
    let mut cfg = MipsConfig {
        seed: common.seed,
        ..Default::default()
    };
    if let Some(d) = common.delta {
        cfg.delta = d;
    }
    if let Some(b) = common.batch_size {
        cfg.batch_size = b;
    }
    if let Some(s) = sigma {
        cfg.sigma = SigmaSource::Fixed(s);
    }
    cfg
}

fn read_row(p: &Path) -> Res<Vec<f64>> {
    let t = load_matrix_csv(p, false)?;
    if t.features.rows() != 1 {
        return Err(Error::InvalidConfig(format!(
            "{} must hold exactly one row",
            p.display()
        )));
    }
    Ok(t.features.row(0).to_vec())
}

fn run_mips(
    common: &Common,
    source: &Source,
    query: Option<&Path>,
    algorithm: &str,
    k: usize,
    sigma: Option<f64>,
) -> Res<()> {
    need_source(source)?;
    let inst = match (&source.generator, &source.input) {
        (Some(g), _) => match generate(source, g, 3, common.seed)? {
            GeneratedData::Mips { query, atoms } => MipsInstance::new(query, atoms)?,
            _ => return Err(Error::InvalidConfig(format!("generator {g} has no query"))),
        },
        (None, Some(p)) => {
            let q = query.ok_or_else(|| Error::InvalidConfig("--input needs --query".into()))?;
            MipsInstance::new(read_row(q)?, load_matrix_csv(p, false)?.features)?
        }
        _ => unreachable!(),
    };
    let cfg = mips_config(common, sigma);
    let ans = match algorithm {
        "naive" => mips::naive_mips(&inst),
        "banditmips" => mips::banditmips(&inst, &cfg)?,
        "alpha" => mips::banditmips_alpha(&inst, &cfg)?,
        "bucket_ae" => mips::bucket_ae(&inst, 30, &cfg)?,
        "topk" => mips::topk_mips(&inst, k, &cfg)?,
        other => {
            return Err(Error::Unknown {
                kind: "inner product algorithm",
                name: other.into(),
            })
        }
    };
    let mut report = serde_json::to_value(&ans)?;
    if common.oracle_check {
        let kk = ans.winners.len();
        let mut all: Vec<(usize, f64)> = (0..inst.n()).map(|i| (i, inst.mu(i))).collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut truth: Vec<usize> = all[..kk].iter().map(|t| t.0).collect();
        let mut got = ans.winners.clone();
        truth.sort_unstable();
        got.sort_unstable();
        report["oracle_match"] = json!(truth == got);
    }
    write_report(common, &report)
}

#[allow(clippy::too_many_arguments)]
fn run_mp(
    common: &Common,
    t: usize,
    signal: Option<&Path>,
    atoms: Option<&Path>,
    components: usize,
    solver: &str,
    sigma: Option<f64>,
) -> Res<()> {
    let (sig, dict, names): (Vec<f64>, Matrix, Vec<String>) = match (signal, atoms) {
        (Some(s), Some(a)) => {
            let dict = load_matrix_csv(a, false)?.features;
            let names = (0..dict.rows()).map(|i| i.to_string()).collect();
            (read_row(s)?, dict, names)
        }
        (None, None) => {
            let song = data::gen_simple_song(t, &data::SongConfig::reduced())?;
            (song.signal, song.atoms, song.atom_names)
        }
        _ => {
            return Err(Error::InvalidConfig(
                "--signal and --atoms go together".into(),
            ))
        }
    };
    let solver = match solver {
        "naive" => MpSolver::Naive,
        "bandit" => MpSolver::Bandit(mips_config(common, sigma)),
        other => {
            return Err(Error::Unknown {
                kind: "solver",
                name: other.into(),
            })
        }
    };
    let res = mips::matching_pursuit(&sig, &dict, components, &solver)?;
    let comps: Vec<Value> = res
        .components
        .iter()
        .map(|c| json!({"atom": c.atom, "name": names[c.atom], "coefficient": c.coefficient}))
        .collect();
    let report = json!({
        "components": comps,
        "residual_norms": res.residual_norms,
        "n_multiplications": res.n_multiplications,
    });
    write_report(common, &report)
}

#[allow(clippy::too_many_arguments)]
fn run_gen(
    generator: &str,
    n: usize,
    d: usize,
    k: usize,
    seed: u64,
    out: &Path,
    query_out: Option<&Path>,
) -> Res<()> {
    let spec = GeneratorSpec {
        kind: parse::<GeneratorKind>(generator)?,
        n,
        d,
        k,
        seed,
    };
    match spec.generate()? {
        GeneratedData::Mips { query, atoms } => {
            let q = query_out
                .ok_or_else(|| Error::InvalidConfig("this generator needs --query-out".into()))?;
            write_matrix_csv(out, &atoms, None)?;
            write_matrix_csv(q, &Matrix::new(1, query.len(), query)?, None)?;
        }
        GeneratedData::Points { points, labels } => {
            let l: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
            write_matrix_csv(out, &points, Some(&l))?;
        }
        GeneratedData::Regression { x, y } => write_matrix_csv(out, &x, Some(&y))?,
        GeneratedData::Song(song) => {
            let len = song.signal.len();
            write_matrix_csv(out, &Matrix::new(1, len, song.signal)?, None)?;
            if let Some(q) = query_out {
                write_matrix_csv(q, &song.atoms, None)?;
            }
        }
    }
    Ok(())
}

fn base_spec(common: &Common, base: &BenchBase) -> Res<(ExperimentSpec, Vec<u64>)> {
    if base.seeds == 0 {
        return Err(Error::InvalidConfig("--seeds must be positive".into()));
    }
    let mut spec = ExperimentSpec::new(
        parse::<Algorithm>(&base.algorithm)?,
        parse::<GeneratorKind>(&base.generator)?,
        base.n,
        base.d,
    );
    spec.k = base.k;
    spec.delta = common.delta;
    spec.batch_size = common.batch_size;
    spec.sigma = base.sigma;
    let seeds = (common.seed..common.seed + base.seeds).collect();
    Ok((spec, seeds))
}

fn write_records(common: &Common, records: &[bench::ExperimentRecord]) -> Res<()> {
    let format: Format = parse(&common.format)?;
    let mut w = sink(&common.out)?;
    bench::write_records(records, format, &mut w)?;
    w.flush().map_err(|e| io_err(Path::new("<out>"), e))
}

fn run_bench(cmd: &BenchCommand) -> Res<()> {
    match cmd {
        BenchCommand::Scaling {
            common,
            base,
            axis,
            values,
        } => {
            let (spec, seeds) = base_spec(common, base)?;
            let res = bench::scaling_sweep(&spec, parse::<Axis>(axis)?, values, &seeds)?;
            if common.oracle_check && res.records.iter().any(|r| !r.correct) {
                eprintln!("warning: some runs disagree with the oracle");
            }
            eprintln!(
                "{}",
                json!({
                    "means": res.means,
                    "loglog_slope": res.loglog_slope,
                    "loglog_r_squared": res.loglog_r_squared,
                    "linear_slope": res.linear.slope,
                    "linear_slope_ci95": res.linear.slope_ci95(),
                })
            );
            write_records(common, &res.records)
        }
        BenchCommand::Tradeoff {
            common,
            base,
            deltas,
        } => {
            let (spec, seeds) = base_spec(common, base)?;
            let res = bench::tradeoff_sweep(&spec, deltas, &seeds)?;
            eprintln!("{}", serde_json::to_string(&res.cells)?);
            write_records(common, &res.records)
        }
    }
}

fn run(cli: Cli) -> Res<()> {
    match &cli.command {
        Command::Kmedoids {
            common,
            source,
            k,
            algorithm,
            metric,
        } => run_kmedoids(common, source, *k, algorithm, metric),
        Command::Forest {
            common,
            source,
            regression,
            variant,
            splitter,
            trees,
            max_depth,
            budget,
            bins,
            impurity,
            test_fraction,
            model_out,
        } => run_forest(
            common,
            source,
            *regression,
            variant,
            splitter,
            *trees,
            *max_depth,
            *budget,
            *bins,
            impurity.as_deref(),
            *test_fraction,
            model_out.as_deref(),
        ),
        Command::Mips {
            common,
            source,
            query,
            algorithm,
            k,
            sigma,
        } => run_mips(common, source, query.as_deref(), algorithm, *k, *sigma),
        Command::Mp {
            common,
            t,
            signal,
            atoms,
            components,
            solver,
            sigma,
        } => run_mp(
            common,
            *t,
            signal.as_deref(),
            atoms.as_deref(),
            *components,
            solver,
            *sigma,
        ),
        Command::Gen {
            generator,
            n,
            d,
            k,
            seed,
            out,
            query_out,
        } => run_gen(generator, *n, *d, *k, *seed, out, query_out.as_deref()),
        Command::Bench { command } => run_bench(command),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on its own usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
