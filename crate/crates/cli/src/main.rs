use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use torus_walk::fourier::{bad_set_w, CharacterCycles};
use torus_walk::hyperbolic::{stable_unstable_split, HyperbolicSystem};
use torus_walk::io::{parse_matrix, parse_measure, parse_partition, partition_to_json};
use torus_walk::lattice::{characteristic_polynomial, convergence_check, invariant_subgroup, is_hyperbolic};
use torus_walk::mixing::{fit_log_n, scan, tv_monte_carlo, NFilter, ScanMethod, ScanSpec};
use torus_walk::pipeline::{BoundOptions, BoundSetup};
use torus_walk::svg::{partition_svg, SvgOptions};
use torus_walk::symbolic::{
    build_partition_for, classify_rectangles, code_point, code_rational, rational_orbit, verify_markov,
    widest_cross_partition, MarkovPartition,
};
use torus_walk::walk::{entropy_lower_bound, Evolution, LowerBoundMode, DEFAULT_STATE_CAP};
use torus_walk::{Error, IncrementMeasure, IntMatrix};

#[derive(Parser)]
#[command(name = "torus-walk", version, about = "Affine random walks on finite tori")]
struct Cli {
    /// Seed for every Monte Carlo stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Add wall-clock time to JSON reports (makes them non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Determinant, hyperbolicity and dynamical constants of a matrix.
    Analyze(AnalyzeArgs),
    /// Whether the walk mixes for each modulus.
    Convergence(ConvergenceArgs),
    /// Distance to uniform over time, with lower and upper bounds.
    Tv(TvArgs),
    /// Mixing times over a range of moduli.
    Scan(ScanArgs),
    /// Build, verify or draw a Markov partition.
    Partition(PartitionArgs),
    /// Symbolic code of an orbit.
    Code(CodeArgs),
    /// The closed-form bound on the distance to uniform.
    Bound(BoundArgs),
}

#[derive(Args)]
struct WalkInput {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    measure: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Increment measure; `c1` then uses its invariant subgroup instead of `Z^d`.
    #[arg(long)]
    measure: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    input: WalkInput,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TvMethod {
    Exact,
    Mc,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundMode {
    Derived,
    SingleLog,
}

#[derive(Args)]
struct TvArgs {
    #[command(flatten)]
    input: WalkInput,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    t_min: usize,
    #[arg(long, default_value_t = 30)]
    t_max: usize,
    #[arg(long, value_enum, default_value = "exact")]
    method: TvMethod,
    #[arg(long, default_value_t = 100_000)]
    replicates: usize,
    #[arg(long, value_enum, default_value = "derived")]
    lower_bound_mode: BoundMode,
    /// Run even when the walk does not converge for this modulus.
    #[arg(long)]
    proceed: bool,
    /// Use Monte Carlo when the exact state space is over budget.
    #[arg(long)]
    mc_fallback: bool,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    state_cap: u128,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    All,
    CoprimeToFactors,
    Odd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanMethodArg {
    Exact,
    Mc,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    input: WalkInput,
    #[arg(long, default_value_t = 2)]
    n_min: u64,
    #[arg(long, default_value_t = 64)]
    n_max: u64,
    /// Explicit moduli, replacing the range.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<u64>>,
    #[arg(long, value_enum, default_value = "all")]
    n_filter: FilterArg,
    #[arg(long, default_value_t = 0.25)]
    target_tv: f64,
    #[arg(long, value_enum, default_value = "exact")]
    method: ScanMethodArg,
    /// Defaults to 64 log2 n for each modulus.
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    replicates: usize,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    state_cap: u128,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Verify (or draw) this partition instead of building one.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Build the partition of the bound pipeline: dynamics of the transpose,
    /// segments through the bad set of this measure.
    #[arg(long)]
    measure: Option<PathBuf>,
    /// Largest allowed diameter; defaults to the expansiveness constant.
    #[arg(long)]
    diameter: Option<f64>,
    /// Interior samples per rectangle for verification.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    labels: bool,
}

#[derive(Args)]
struct CodeArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    partition: Option<PathBuf>,
    /// A point of the continuous torus, e.g. `0.1,0.7`.
    #[arg(long, value_delimiter = ',', conflicts_with = "rho")]
    point: Option<Vec<f64>>,
    /// A point `rho/n` of the finite torus.
    #[arg(long, value_delimiter = ',', requires = "n")]
    rho: Option<Vec<u64>>,
    #[arg(long)]
    n: Option<u64>,
    /// Times `-window..=window` are coded.
    #[arg(long, default_value_t = 6)]
    window: usize,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    input: WalkInput,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    grid_step: Option<f64>,
    /// Also check the block properties exhaustively for every modulus up to this one.
    #[arg(long)]
    block_checks_up_to: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    state_cap: u128,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) => 2,
            Error::NotHyperbolic => 3,
            Error::BudgetExceeded { .. } => 4,
            Error::NotContractive { .. } => 5,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

/// Output text and the exit code to finish with.
struct Outcome {
    text: String,
    code: u8,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, code: 0 }
    }
}

struct Context {
    seed: u64,
    timing: bool,
    started: Instant,
}

impl Context {
    /// Reproducibility fields shared by the JSON reports.
    fn report(&self, command: &str, input: Value, body: Value) -> String {
        let mut map = Map::new();
        if let Value::Object(b) = body {
            map.extend(b);
        }
        map.insert("command".into(), json!(command));
        map.insert("input".into(), input);
        map.insert("seed".into(), json!(self.seed));
        map.insert("tool_version".into(), json!(env!("CARGO_PKG_VERSION")));
        if self.timing {
            map.insert("elapsed_ms".into(), json!(self.started.elapsed().as_secs_f64() * 1e3));
        }
        to_json(&Value::Object(map))
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> Result<IntMatrix, Failure> {
    Ok(parse_matrix(&read(path)?)?)
}

fn load_measure(path: &Path) -> Result<IncrementMeasure, Failure> {
    Ok(parse_measure(&read(path)?)?)
}

fn load_walk(input: &WalkInput) -> Result<(IntMatrix, IncrementMeasure), Failure> {
    let a = load_matrix(&input.matrix)?;
    let mu = load_measure(&input.measure)?;
    if mu.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: mu.dim() }.into());
    }
    Ok((a, mu))
}

fn echo(paths: &[(&str, &Path)]) -> Value {
    Value::Object(paths.iter().map(|(k, p)| (k.to_string(), json!(p.display().to_string()))).collect())
}

fn number(x: &impl ToString) -> Value {
    let s = x.to_string();
    serde_json::from_str(&s).unwrap_or(Value::String(s))
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn pick(format: Option<Format>, default: Format, allowed: &[Format]) -> Result<Format, Failure> {
    let f = format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(usage(format!("this subcommand cannot write {f:?}")))
    }
}

fn analyze(args: &AnalyzeArgs, ctx: &Context, format: Option<Format>) -> Result<Outcome, Failure> {
    pick(format, Format::Json, &[Format::Json])?;
    let a = load_matrix(&args.matrix)?;
    let input = echo(&[("matrix", &args.matrix)]);
    let det = number(&a.determinant());
    let char_poly: Vec<Value> = characteristic_polynomial(&a).coeffs().iter().map(number).collect();
    let hyperbolic = is_hyperbolic(&a)?;
    if !hyperbolic {
        let body = json!({ "det": det, "hyperbolic": false, "char_poly": char_poly, "dims": null, "lambda": null,
            "epsilon_c": null, "c1": null, "c2": null, "shortest_vector": null });
        return Ok(Outcome { text: ctx.report("analyze", input, body), code: 3 });
    }
    let d = a.dim();
    let mu = match &args.measure {
        Some(p) => load_measure(p)?,
        None => {
            let mut support = vec![vec![0i64; d]];
            support.extend((0..d).map(|i| (0..d).map(|j| i64::from(i == j)).collect()));
            IncrementMeasure::uniform(support)?
        }
    };
    let system = HyperbolicSystem::new(&a)?;
    let (ds, du) = stable_unstable_split(&a)?.dims();
    let c = system.constants(&invariant_subgroup(&a, &mu)?)?;
    let body = json!({ "det": det, "hyperbolic": true, "char_poly": char_poly, "dims": { "stable": ds, "unstable": du },
        "lambda": c.lambda, "epsilon_c": c.epsilon_c, "c1": c.c1, "c2": c.c2, "shortest_vector": c.shortest_vector,
        "forward_norm": c.forward_norm, "backward_norm": c.backward_norm });
    Ok(Outcome::ok(ctx.report("analyze", input, body)))
}

fn convergence(args: &ConvergenceArgs, ctx: &Context, format: Option<Format>) -> Result<Outcome, Failure> {
    pick(format, Format::Json, &[Format::Json])?;
    let (a, mu) = load_walk(&args.input)?;
    let h = invariant_subgroup(&a, &mu)?;
    let results: Vec<Value> = args
        .n
        .iter()
        .map(|&n| {
            let (ok, diag) = convergence_check(&h, n);
            json!({ "n": n, "convergent": ok, "diagnostic": diag.to_string() })
        })
        .collect();
    let body = json!({ "rank": h.rank, "dim": h.dim, "factors": h.factors.iter().map(number).collect::<Vec<_>>(),
        "results": results });
    Ok(Outcome::ok(ctx.report("convergence", echo(&[("matrix", &args.input.matrix), ("measure", &args.input.measure)]), body)))
}

#[derive(Serialize)]
struct TvRow {
    n: u64,
    d: usize,
    t: usize,
    tv_exact: Option<f64>,
    tv_mc: Option<f64>,
    lower_bound: f64,
    l2_bound: Option<f64>,
}

fn tv(args: &TvArgs, ctx: &Context, format: Option<Format>) -> Result<Outcome, Failure> {
    let format = pick(format, Format::Csv, &[Format::Csv, Format::Json])?;
    let (a, mu) = load_walk(&args.input)?;
    let n = args.n;
    if args.t_min > args.t_max {
        return Err(usage("--t-min exceeds --t-max"));
    }
    let (ok, diag) = convergence_check(&invariant_subgroup(&a, &mu)?, n);
    if !ok {
        if !args.proceed {
            return Err(Error::NotConvergent { n, reason: diag.to_string() }.into());
        }
        eprintln!("warning: walk mod {n} does not converge ({diag}); proceeding");
    }
    let d = a.dim();
    let (mut want_exact, mut want_mc) = match args.method {
        TvMethod::Exact => (true, false),
        TvMethod::Mc => (false, true),
        TvMethod::Both => (true, true),
    };
    let mut evo = None;
    if want_exact {
        match Evolution::with_cap(&a, &mu, n, args.state_cap) {
            Ok(e) => evo = Some(e),
            Err(Error::BudgetExceeded { .. }) if args.mc_fallback => {
                eprintln!("warning: exact state space over budget; using Monte Carlo");
                want_exact = false;
                want_mc = true;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let cycles = match CharacterCycles::with_cap(&mu, &a, n, args.state_cap) {
        Ok(c) => Some(c),
        Err(Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let mode = match args.lower_bound_mode {
        BoundMode::Derived => LowerBoundMode::Derived,
        BoundMode::SingleLog => LowerBoundMode::SingleLog,
    };
    let mut rows = Vec::new();
    for t in args.t_min..=args.t_max {
        let tv_exact = evo.as_mut().filter(|_| want_exact).map(|e| {
            e.advance_to(t);
            e.tv_to_uniform()
        });
        let tv_mc = if want_mc { Some(tv_monte_carlo(&a, &mu, n, t, args.replicates, ctx.seed)?) } else { None };
        rows.push(TvRow {
            n,
            d,
            t,
            tv_exact,
            tv_mc,
            lower_bound: entropy_lower_bound(&mu, n, d, t, mode).clamped,
            l2_bound: cycles.as_ref().map(|c| c.bound(t).sum),
        });
    }
    let text = match format {
        Format::Json => to_json(&rows),
        _ => {
            let mut s = String::from("n,d,t,tv_exact,tv_mc,lower_bound,l2_bound\n");
            for r in &rows {
                s += &format!(
                    "{},{},{},{},{},{},{}\n",
                    r.n,
                    r.d,
                    r.t,
                    cell(r.tv_exact),
                    cell(r.tv_mc),
                    r.lower_bound,
                    cell(r.l2_bound)
                );
            }
            s
        }
    };
    Ok(Outcome::ok(text))
}

fn scan_cmd(args: &ScanArgs, ctx: &Context, format: Option<Format>) -> Result<Outcome, Failure> {
    let format = pick(format, Format::Csv, &[Format::Csv, Format::Json])?;
    let (a, mu) = load_walk(&args.input)?;
    let spec = ScanSpec {
        n_min: args.n_min,
        n_max: args.n_max,
        n_filter: match args.n_filter {
            FilterArg::All => NFilter::All,
            FilterArg::CoprimeToFactors => NFilter::CoprimeToFactors,
            FilterArg::Odd => NFilter::Odd,
        },
        target_tv: args.target_tv,
        method: match args.method {
            ScanMethodArg::Exact => ScanMethod::Exact,
            ScanMethodArg::Mc => ScanMethod::Mc,
        },
        t_max: args.t_max,
        replicates: args.replicates,
        n_values: args.n_list.clone(),
        state_cap: args.state_cap,
    };
    let rows = scan(&a, &mu, &spec, ctx.seed)?;
    let text = match format {
        Format::Json => {
            let body = json!({ "spec": spec, "rows": rows, "fit": fit_log_n(&rows) });
            ctx.report("scan", echo(&[("matrix", &args.input.matrix), ("measure", &args.input.measure)]), body)
        }
        _ => {
            let mut s = String::from("n,t_mix,t_mix_over_log_n,status\n");
            for r in &rows {
                let status = serde_json::to_value(r.status).expect("status serializes");
                s += &format!(
                    "{},{},{},{}\n",
                    r.n,
                    r.t_mix.map(|t| t.to_string()).unwrap_or_default(),
                    cell(r.t_mix_over_log_n),
                    status.as_str().unwrap_or_default()
                );
            }
            s
        }
    };
    Ok(Outcome::ok(text))
}

/// The system, partition, optional classification and marked points.
type BuiltPartition = (HyperbolicSystem, MarkovPartition, Option<torus_walk::symbolic::Classification>, Vec<Vec<f64>>);

/// The default partition for the dynamics of `a`, or the pipeline
/// partition around `W` when a measure is given.
fn built_partition(
    a: &IntMatrix,
    measure: Option<&Path>,
    diameter: Option<f64>,
) -> Result<BuiltPartition, Failure> {
    if a.dim() != 2 {
        return Err(Error::DimensionUnsupported(a.dim()).into());
    }
    match measure {
        Some(path) => {
            let mu = load_measure(path)?;
            let h = invariant_subgroup(a, &mu)?;
            let system = HyperbolicSystem::new(&a.transpose())?;
            let w = bad_set_w(&h)?;
            let delta0 = system.expansiveness_constant().min(w.min_separation(&system.norm) / (1.0 + system.norm.forward_norm));
            let target = diameter.unwrap_or(delta0).min(delta0);
            let p = widest_cross_partition(&system, &w.points_f64(), target, BoundOptions::default().reach)
                .or_else(|_| build_partition_for(&system, 0.99 * target))?;
            let c = classify_rectangles(&p, &w, &system)?;
            Ok((system, p, Some(c), w.points_f64()))
        }
        None => {
            let system = HyperbolicSystem::new(a)?;
            let target = diameter.unwrap_or_else(|| system.expansiveness_constant());
            let p = build_partition_for(&system, target)?;
            Ok((system, p, None, Vec::new()))
        }
    }
}

fn partition(args: &PartitionArgs, ctx: &Context, format: Option<Format>) -> Result<Outcome, Failure> {
    let format = pick(format, Format::Json, &[Format::Json, Format::Svg])?;
    let a = load_matrix(&args.matrix)?;
    if let Some(path) = &args.input {
        let system = HyperbolicSystem::new(&a)?;
        let (rects, adjacency) = parse_partition(&read(path)?)?;
        if format == Format::Svg {
            return Ok(Outcome::ok(partition_svg(&rects, &SvgOptions { labels: args.labels, ..Default::default() })));
        }
        let report = verify_markov(&rects, &system, args.samples, ctx.seed);
        let mut body = json!({ "report": report });
        match MarkovPartition::from_parts(rects, adjacency, &system) {
            Ok(p) => {
                let root = p.perron_root();
                body["perron_root"] = json!(root);
                body["entropy"] = json!(root.estimate.ln());
            }
            Err(e) => body["adjacency_error"] = json!(e.to_string()),
        }
        let passed = report.passed;
        let input = echo(&[("matrix", &args.matrix), ("input", path)]);
        return Ok(Outcome { text: ctx.report("partition", input, body), code: if passed { 0 } else { 1 } });
    }
    let (_, p, classification, marks) = built_partition(&a, args.measure.as_deref(), args.diameter)?;
    let text = match format {
        Format::Svg => {
            partition_svg(&p.rectangles, &SvgOptions { classification: classification.as_ref(), marks, labels: args.labels, ..Default::default() })
        }
        _ => {
            let mut s = partition_to_json(&p);
            s.push('\n');
            s
        }
    };
    Ok(Outcome::ok(text))
}

fn code(args: &CodeArgs, ctx: &Context, format: Option<Format>) -> Result<Outcome, Failure> {
    let format = pick(format, Format::Json, &[Format::Json, Format::Svg])?;
    let a = load_matrix(&args.matrix)?;
    let (system, p) = match &args.partition {
        Some(path) => {
            let system = HyperbolicSystem::new(&a)?;
            let (rects, adjacency) = parse_partition(&read(path)?)?;
            let p = MarkovPartition::from_parts(rects, adjacency, &system)?;
            (system, p)
        }
        None => {
            let (system, p, _, _) = built_partition(&a, None, None)?;
            (system, p)
        }
    };
    let d = a.dim();
    let (window, orbit, point) = match (&args.point, &args.rho, args.n) {
        (Some(x), None, _) => {
            if x.len() != d {
                return Err(usage(format!("--point needs {d} coordinates")));
            }
            let mut orbit = vec![torus_walk::hyperbolic::wrap(x)];
            for _ in 0..args.window {
                orbit.push(system.step(orbit.last().expect("nonempty")));
            }
            (code_point(x, &p, &system, args.window), orbit, json!(x))
        }
        (None, Some(rho), Some(n)) => {
            if rho.len() != d || n < 2 {
                return Err(usage(format!("--rho needs {d} coordinates and --n at least 2")));
            }
            let orbit = rational_orbit(&system, rho, n, 0, args.window);
            (code_rational(rho, n, &p, &system, args.window), orbit, json!({ "rho": rho, "n": n }))
        }
        _ => return Err(usage("give either --point or --rho with --n")),
    };
    if format == Format::Svg {
        return Ok(Outcome::ok(partition_svg(&p.rectangles, &SvgOptions { orbit, labels: true, ..Default::default() })));
    }
    let body = json!({ "point": point, "window": args.window, "code": window, "forward_orbit": orbit });
    Ok(Outcome::ok(ctx.report("code", echo(&[("matrix", &args.matrix)]), body)))
}

fn bound(args: &BoundArgs, ctx: &Context, format: Option<Format>) -> Result<Outcome, Failure> {
    pick(format, Format::Json, &[Format::Json])?;
    let (a, mu) = load_walk(&args.input)?;
    let options = BoundOptions { eta: args.eta, grid_step: args.grid_step, exact_cap: args.state_cap, ..BoundOptions::default() };
    let setup = BoundSetup::new(&a, &mu, &options)?;
    let report = setup.report(args.n, args.r)?;
    let mut body = serde_json::to_value(&report).expect("report serializes");
    body["classification"] = json!(setup.classification);
    if let Some(up_to) = args.block_checks_up_to {
        let ns: Vec<u64> = (2..=up_to).collect();
        body["block_checks"] = json!(setup.block_checks(&ns)?);
    }
    let input = echo(&[("matrix", &args.input.matrix), ("measure", &args.input.measure)]);
    Ok(Outcome::ok(ctx.report("bound", input, body)))
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| usage(format!("cannot start {t} threads: {e}")))?;
    }
    let ctx = Context { seed: cli.seed, timing: cli.timing, started: Instant::now() };
    match &cli.command {
        Command::Analyze(a) => analyze(a, &ctx, cli.format),
        Command::Convergence(a) => convergence(a, &ctx, cli.format),
        Command::Tv(a) => tv(a, &ctx, cli.format),
        Command::Scan(a) => scan_cmd(a, &ctx, cli.format),
        Command::Partition(a) => partition(a, &ctx, cli.format),
        Command::Code(a) => code(a, &ctx, cli.format),
        Command::Bound(a) => bound(a, &ctx, cli.format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let written = match &cli.out {
                Some(path) => fs::write(path, &out.text).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => {
                    print!("{}", out.text);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(out.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
