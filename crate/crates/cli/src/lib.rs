//! Command-line front end: argument parsing, dispatch and report output.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use shapestat::experiments::{
    blindness_demo, circle_means, classification_study, concentrated_sample,
    procrustes_counterexample, rank_law_check, ratio_check, replicate_rng, tetrahedron,
    MeanOptionsConfig, SimulationConfig, TestMethod,
};
use shapestat::io::{load_dataset, DatasetFile, DatasetFormat, ReportEnvelope};
use shapestat::means::{
    full_procrustes_mean, intrinsic_mean, schoenberg_mean, ziezold_mean, MeanEstimate, MeanOptions,
    Projection, Sample,
};
use shapestat::tangent::{
    default_max_components, hotelling_two_sample, tangent_coordinates, CoordKind,
};
use shapestat::{
    intrinsic_distance, procrustes_distance, ziezold_distance, ShapeError, ShapeSpace,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "shapestat",
    version,
    about = "Statistics on Kendall shape spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean shape of a dataset.
    Mean(MeanArgs),
    /// Pairwise shape distances within a dataset.
    Dist(DistArgs),
    /// Tangent-space coordinates at a mean of the dataset.
    Tangent(TangentArgs),
    /// Two-sample Hotelling T² test between two datasets.
    Test2(Test2Args),
    /// Mutual distances of intrinsic, Ziezold and Procrustes means.
    Ratio(RatioArgs),
    /// Cube versus pyramid classification study.
    SimClassify(SimArgs),
    /// Worked demonstrations.
    Demo(DemoArgs),
}

#[derive(Args, Debug, Serialize)]
struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Render a human-readable table instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
}

#[derive(Args, Debug, Serialize)]
struct InputArgs {
    /// Dataset file (JSON or CSV).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// File format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args, Debug, Serialize, Clone, Copy)]
struct IterArgs {
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
}

impl IterArgs {
    fn options(&self) -> MeanOptions {
        MeanOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
            ..MeanOptions::default()
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FormatArg {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum MeanTypeArg {
    Intrinsic,
    Ziezold,
    Procrustes,
    SchoenbergOrth,
    SchoenbergCentral,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SpaceArg {
    Kendall,
    Reflection,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MetricArg {
    Intrinsic,
    Ziezold,
    Procrustes,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum KindArg {
    Intrinsic,
    Residual,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    IntrinsicIntrinsic,
    IntrinsicResidual,
    ZiezoldResidual,
    Schoenberg,
    SchoenbergGram,
}

impl From<MethodArg> for TestMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::IntrinsicIntrinsic => TestMethod::IntrinsicIntrinsic,
            MethodArg::IntrinsicResidual => TestMethod::IntrinsicResidual,
            MethodArg::ZiezoldResidual => TestMethod::ZiezoldResidual,
            MethodArg::Schoenberg => TestMethod::Schoenberg,
            MethodArg::SchoenbergGram => TestMethod::SchoenbergGram,
        }
    }
}

impl From<KindArg> for CoordKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Intrinsic => CoordKind::IntrinsicCoords,
            KindArg::Residual => CoordKind::ResidualCoords,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct MeanArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long = "type", value_enum, default_value = "intrinsic")]
    mean_type: MeanTypeArg,
    #[arg(long, value_enum, default_value = "kendall")]
    space: SpaceArg,
    /// Target rank for Schoenberg means (defaults to m).
    #[arg(long)]
    rank: Option<usize>,
    #[command(flatten)]
    iter: IterArgs,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct DistArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "intrinsic")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "kendall")]
    space: SpaceArg,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct TangentArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "intrinsic")]
    kind: KindArg,
    /// Mean used as the base point.
    #[arg(long, value_enum, default_value = "intrinsic")]
    base: MeanTypeArg,
    #[arg(long, value_enum, default_value = "kendall")]
    space: SpaceArg,
    #[command(flatten)]
    iter: IterArgs,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct Test2Args {
    /// First sample.
    first: PathBuf,
    /// Second sample.
    second: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Principal-component cap (defaults to n1 + n2 - 3).
    #[arg(long)]
    max_components: Option<usize>,
    #[arg(long, value_enum, default_value = "residual")]
    kind: KindArg,
    /// Mean of the pooled sample used as the tangent base.
    #[arg(long, value_enum, default_value = "intrinsic")]
    base: MeanTypeArg,
    #[arg(long, value_enum, default_value = "kendall")]
    space: SpaceArg,
    #[command(flatten)]
    iter: IterArgs,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct RatioArgs {
    /// Dataset; without it a concentrated sample around the regular
    /// tetrahedron is simulated.
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, value_enum, default_value = "kendall")]
    space: SpaceArg,
    /// Tangent standard deviation of the simulated sample.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-14)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct SimArgs {
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma2: f64,
    #[arg(long, default_value_t = 10)]
    n_per_group: usize,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, default_value_t = SimulationConfig::default().seed)]
    seed: u64,
    /// Methods to run (comma separated); defaults to the four standard ones.
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
    #[arg(long)]
    max_components: Option<usize>,
    /// Worker threads (0 = automatic; SHAPESTAT_THREADS also applies).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Also write per-replicate decisions as CSV.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    replicates_csv: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[command(subcommand)]
    demo: Demo,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "demo", rename_all = "kebab-case")]
enum Demo {
    /// Weighted two-point sample whose full Procrustes mean is singular.
    Counterexample {
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Movement of intrinsic and Schoenberg means when a third triangle is added.
    Blindness {
        #[arg(long, default_value_t = 0.05)]
        phi: f64,
        #[arg(long, default_value_t = 0.3)]
        beta: f64,
    },
    /// Intrinsic, extrinsic and residual means of two weighted points on a circle.
    CircleMeans {
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
        gamma: f64,
    },
    /// Rank of averaged gram matrices of random pre-shapes.
    RankLaw {
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,100")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Failure of a command: usage problems map to exit code 2, everything else
/// to 1.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(String),
}

impl From<ShapeError> for Failure {
    fn from(e: ShapeError) -> Self {
        Failure::Domain(e.to_string())
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Reports go to `--out` or standard output.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`cli_dispatch`] with explicit output streams.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let mut text = e.render().to_string();
            if e.use_stderr() {
                if !text.contains("Usage:") {
                    text.push_str(&format!("\n{}\n", Cli::command().render_usage()));
                }
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(
                err,
                "error: {msg}\n\nUsage: shapestat <COMMAND> [OPTIONS]  (see --help)"
            );
            EXIT_USAGE
        }
        Err(Failure::Domain(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DOMAIN
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let start = Instant::now();
    match cli.command {
        Command::Mean(a) => {
            let ds = load(&a.input.input, a.input.format)?;
            let space = space_for(a.space, &ds)?;
            let est = compute_mean(
                a.mean_type,
                &ds.sample()?,
                &space,
                a.rank,
                &a.iter.options(),
            )?;
            emit("mean", &a, est, start, &a.output, out)
        }
        Command::Dist(a) => {
            let ds = load(&a.input.input, a.input.format)?;
            let space = space_for(a.space, &ds)?;
            let pts = ds.preshapes()?;
            let rho = match a.metric {
                MetricArg::Intrinsic => intrinsic_distance,
                MetricArg::Ziezold => ziezold_distance,
                MetricArg::Procrustes => procrustes_distance,
            };
            let distances: Vec<Vec<f64>> = pts
                .iter()
                .map(|x| pts.iter().map(|y| rho(x, y, &space)).collect())
                .collect();
            let payload = serde_json::json!({ "metric": a.metric, "distances": distances });
            emit("dist", &a, payload, start, &a.output, out)
        }
        Command::Tangent(a) => {
            let ds = load(&a.input.input, a.input.format)?;
            let space = space_for(a.space, &ds)?;
            let sample = ds.sample()?;
            let base = compute_mean(a.base, &sample, &space, None, &a.iter.options())?;
            let t = tangent_coordinates(&sample, &base.representative, a.kind.into(), &space)?;
            emit("tangent", &a, t, start, &a.output, out)
        }
        Command::Test2(a) => {
            let da = load(&a.first, a.format)?;
            let db = load(&a.second, a.format)?;
            if (da.m, da.k) != (db.m, db.k) {
                return Err(Failure::Domain(format!(
                    "samples have different dimensions: {}x{} and {}x{}",
                    da.m, da.k, db.m, db.k
                )));
            }
            let space = space_for(a.space, &da)?;
            let (pa, pb) = (da.preshapes()?, db.preshapes()?);
            let pooled = Sample::uniform(pa.iter().chain(&pb).cloned().collect())?;
            let base = compute_mean(a.base, &pooled, &space, None, &a.iter.options())?;
            let kind: CoordKind = a.kind.into();
            let ta =
                tangent_coordinates(&Sample::uniform(pa)?, &base.representative, kind, &space)?;
            let tb =
                tangent_coordinates(&Sample::uniform(pb)?, &base.representative, kind, &space)?;
            let cap = a
                .max_components
                .unwrap_or_else(|| default_max_components(ta.len(), tb.len()));
            let report = hotelling_two_sample(&ta, &tb, a.level, cap)?;
            emit("test2", &a, report, start, &a.output, out)
        }
        Command::Ratio(a) => {
            let opts = MeanOptions {
                tol: a.tol,
                max_iter: a.max_iter,
                ..MeanOptions::default()
            };
            let (sample, space) = match &a.input {
                Some(path) => {
                    let ds = load(path, a.format)?;
                    (ds.sample()?, space_for(a.space, &ds)?)
                }
                None => {
                    let mut rng = replicate_rng(a.seed, 0);
                    let s = concentrated_sample(&tetrahedron(), a.delta, a.n, &mut rng)?;
                    (s, space_from(a.space, 3, 4)?)
                }
            };
            let report = ratio_check(&sample, &space, &opts)?;
            emit("ratio", &a, report, start, &a.output, out)
        }
        Command::SimClassify(a) => {
            let defaults = SimulationConfig::default();
            let cfg = SimulationConfig {
                epsilon: a.epsilon,
                sigma2: a.sigma2,
                n_per_group: a.n_per_group,
                replicates: a.replicates,
                level: a.level,
                seed: a.seed,
                mean_types: if a.methods.is_empty() {
                    defaults.mean_types
                } else {
                    a.methods.iter().map(|&m| m.into()).collect()
                },
                max_components: a.max_components,
                threads: a.threads,
                mean_options: MeanOptionsConfig {
                    tol: a.tol,
                    max_iter: a.max_iter,
                },
            };
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let report = classification_study(&cfg)?;
            if let Some(path) = &a.replicates_csv {
                std::fs::write(path, report.replicates_csv())
                    .map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
            }
            let timings = report.timings();
            let echo = serde_json::to_value(&cfg).map_err(|e| Failure::Domain(e.to_string()))?;
            let mut env = ReportEnvelope::new("sim-classify", echo, report);
            env.timings_ms = timings;
            write_envelope(&env, &a.output, out)
        }
        Command::Demo(a) => {
            let echo = serde_json::to_value(&a.demo).map_err(|e| Failure::Domain(e.to_string()))?;
            let payload = match &a.demo {
                Demo::Counterexample { tol } => {
                    let opts = MeanOptions {
                        tol: *tol,
                        ..MeanOptions::default()
                    };
                    to_value(procrustes_counterexample(&opts)?)?
                }
                Demo::Blindness { phi, beta } => {
                    to_value(blindness_demo(*phi, *beta, &MeanOptions::default())?)?
                }
                Demo::CircleMeans { gamma } => {
                    to_value(circle_means(*gamma, &MeanOptions::default())?)?
                }
                Demo::RankLaw { m, k, n, seed } => {
                    let report = rank_law_check(*m, *k, n, *seed)?;
                    let all_hold = report.all_hold();
                    let mut v = to_value(report)?;
                    v["all_hold"] = Value::Bool(all_hold);
                    v
                }
            };
            let env =
                ReportEnvelope::new("demo", echo, payload).with_timing("total", elapsed(start));
            write_envelope(&env, &a.output, out)
        }
    }
}

fn to_value<T: Serialize>(v: T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Domain(e.to_string()))
}

fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn load(path: &Path, format: Option<FormatArg>) -> Result<DatasetFile, Failure> {
    let format = match format {
        Some(FormatArg::Json) => DatasetFormat::Json,
        Some(FormatArg::Csv) => DatasetFormat::Csv,
        None => DatasetFormat::from_path(path),
    };
    Ok(load_dataset(path, format)?)
}

fn space_from(space: SpaceArg, m: usize, k: usize) -> Result<ShapeSpace, Failure> {
    Ok(match space {
        SpaceArg::Kendall => ShapeSpace::kendall(m, k)?,
        SpaceArg::Reflection => ShapeSpace::reflection(m, k)?,
    })
}

fn space_for(space: SpaceArg, ds: &DatasetFile) -> Result<ShapeSpace, Failure> {
    space_from(space, ds.m, ds.k)
}

fn compute_mean(
    t: MeanTypeArg,
    sample: &Sample,
    space: &ShapeSpace,
    rank: Option<usize>,
    opts: &MeanOptions,
) -> Result<MeanEstimate, Failure> {
    let schoenberg = |projection| -> Result<MeanEstimate, Failure> {
        let reflection = space.with_group(shapestat::Group::RotationsAndReflections);
        Ok(schoenberg_mean(
            sample,
            &reflection,
            rank.unwrap_or(space.m),
            projection,
        )?)
    };
    Ok(match t {
        MeanTypeArg::Intrinsic => intrinsic_mean(sample, space, opts)?,
        MeanTypeArg::Ziezold => ziezold_mean(sample, space, opts)?,
        MeanTypeArg::Procrustes => full_procrustes_mean(sample, space, opts)?,
        MeanTypeArg::SchoenbergOrth => return schoenberg(Projection::Orthogonal),
        MeanTypeArg::SchoenbergCentral => return schoenberg(Projection::Central),
    })
}

fn emit<C: Serialize, P: Serialize>(
    command: &str,
    config: &C,
    payload: P,
    start: Instant,
    output: &OutputArgs,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let echo = serde_json::to_value(config).map_err(|e| Failure::Domain(e.to_string()))?;
    let env = ReportEnvelope::new(command, echo, payload).with_timing("total", elapsed(start));
    write_envelope(&env, output, out)
}

fn write_envelope<P: Serialize>(
    env: &ReportEnvelope<P>,
    output: &OutputArgs,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let mut text = if output.pretty {
        let value = serde_json::to_value(env).map_err(|e| Failure::Domain(e.to_string()))?;
        render_table(&value)
    } else {
        env.to_json()?
    };
    text.push('\n');
    match &output.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Domain(format!("{}: {e}", path.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Domain(e.to_string())),
    }
}

/// Flattens a JSON value into aligned `path  value` lines.
fn render_table(v: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", v, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter()
        .map(|(k, v)| format!("{k:<width$}  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let join = |key: &str| {
        if prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}.{key}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten(&join(k), child, rows);
            }
        }
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let cells: Vec<String> = items.iter().map(scalar).collect();
            rows.push((prefix.to_string(), format!("[{}]", cells.join(", "))));
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), child, rows);
            }
        }
        other => rows.push((prefix.to_string(), scalar(other))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:.6e}"),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
