//! Command-line front end: validation, orbifold data, curve pullback,
//! transition matrices, obstruction search, decomposition/combination,
//! and pullback iteration over the file formats bundled under
//! `fixtures/`.
//!
//! Exit codes: 0 success, 1 domain failure (the input parses but violates
//! an invariant), 2 I/O or parse failure.  Every JSON output carries
//! `"schema": "tk/1"` and sorted keys; iteration traces are CSV.

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use serde_json::{json, Value};

use thurston_kit::curves::MulticurveSpec;
use thurston_kit::decompose::{decompose, first_return_maps, TreeSpec};
use thurston_kit::fixtures::{normalized_json, SelfCoverFile};
use thurston_kit::matrix::{rational_to_f64, CertifyOptions};
use thurston_kit::pullback::{pullback_class, transition_data};
use thurston_kit::recursion::BranchedCoverRecursion;
use thurston_kit::search::{search_obstruction, ObstructionOutcome, SearchBudget};
use thurston_kit::spider::{
    orbit_relation_residual, Bipartition, ExternalAngle, IterationStatus,
    PullbackIterationState, SpiderConfiguration, Thresholds, Verdict,
};
use thurston_kit::words::Word;

#[derive(Parser)]
#[command(
    name = "tk",
    version,
    about = "Toolkit for postcritically finite branched self-coverings of the sphere"
)]
struct Cli {
    /// Spaces of indentation for JSON output (0 = compact).
    #[arg(long, global = true, default_value_t = 2)]
    json_indent: usize,
    /// Override the command's primary numeric tolerance: certification
    /// enclosure width for `matrix`/`obstruction`, convergence tolerance
    /// for `iterate`.  Accepts decimals, scientific notation, or `p/q`.
    #[arg(long, global = true)]
    tol: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a self-cover file against every structural invariant.
    Validate {
        /// Self-cover JSON file.
        path: PathBuf,
    },
    /// Ramification orbifold of a self-cover: signature, Euler
    /// characteristic, hyperbolicity.
    Orbifold {
        /// Self-cover JSON file.
        path: PathBuf,
    },
    /// Components of the preimage of a curve class, with mapping degrees.
    PullbackCurve {
        /// Self-cover JSON file.
        path: PathBuf,
        /// Curve word, e.g. "x1x2".
        curve: String,
    },
    /// Transition matrix of a multicurve with a certified spectral radius.
    Matrix {
        /// Self-cover JSON file.
        path: PathBuf,
        /// Multicurve JSON file (sphere labels, curve words, certificate).
        curves: PathBuf,
    },
    /// Search for an invariant multicurve with spectral radius at least 1.
    Obstruction {
        /// Self-cover JSON file.
        path: PathBuf,
        /// Optional JSON array of multicurve seed systems (defaults to
        /// single curves around contiguous puncture blocks).
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Saturation iterations per seed.
        #[arg(long, default_value_t = 10)]
        max_iter: usize,
        /// Largest accumulated system size.
        #[arg(long, default_value_t = 64)]
        max_classes: usize,
    },
    /// Cut a self-cover along an invariant multicurve into a gluing
    /// manifest plus piece and first-return reports.
    Decompose {
        /// Self-cover JSON file.
        path: PathBuf,
        /// Multicurve JSON file.
        curves: PathBuf,
        /// Optional tree JSON file naming regions and edges (inferred
        /// from the curve words when omitted).
        tree: Option<PathBuf>,
        /// Write the gluing manifest JSON here (atomically).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble a gluing manifest into a self-cover.
    Combine {
        /// Gluing manifest JSON file.
        manifest: PathBuf,
        /// Write the assembled self-cover JSON here (atomically).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pullback iteration for a quadratic external angle, or the
    /// bundled obstructed mating, reporting a verdict and optional trace.
    Iterate(IterateArgs),
}

#[derive(Args)]
struct IterateArgs {
    /// External angle p/q of the quadratic to iterate toward.
    #[arg(long, conflicts_with = "mating")]
    angle: Option<String>,
    /// Iterate the bundled obstructed self-mating instead of a
    /// polynomial angle.
    #[arg(long)]
    mating: bool,
    /// Pullback step budget.
    #[arg(long, default_value_t = 200)]
    steps: usize,
    /// Tracked curve classes as semicolon-separated bipartitions of
    /// 1-based point indices, e.g. "1,2;1,3" (default: all pairs).
    #[arg(long)]
    track: Option<String>,
    /// Write the per-iteration trace (points and proxies) as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Seed for a random admissible start (default: the standard start).
    #[arg(long)]
    seed: Option<u64>,
}

/// A command failure carrying its exit code and a JSON-able description.
struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl Failure {
    fn io(message: impl ToString) -> Self {
        Failure { code: 2, kind: "io".into(), message: message.to_string() }
    }

    fn parse(message: impl ToString) -> Self {
        Failure { code: 2, kind: "parse".into(), message: message.to_string() }
    }

    fn domain(kind: &str, message: impl ToString) -> Self {
        Failure { code: 1, kind: kind.into(), message: message.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let indent = cli.json_indent;
    match run(cli) {
        Ok(value) => {
            emit(&value, indent);
            ExitCode::SUCCESS
        }
        Err(f) => {
            let value = json!({
                "schema": "tk/1",
                "error": { "kind": f.kind, "message": f.message },
            });
            emit(&value, indent);
            ExitCode::from(f.code)
        }
    }
}

/// Prints to stdout, tolerating a closed pipe (e.g. `tk ... | head`).
fn emit(value: &Value, indent: usize) {
    use io::Write;
    let _ = writeln!(io::stdout(), "{}", render(value, indent));
}

fn run(cli: Cli) -> Result<Value, Failure> {
    let tol = cli.tol.as_deref();
    match cli.command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Orbifold { path } => cmd_orbifold(&path),
        Command::PullbackCurve { path, curve } => cmd_pullback_curve(&path, &curve),
        Command::Matrix { path, curves } => cmd_matrix(&path, &curves, tol),
        Command::Obstruction { path, seeds, max_iter, max_classes } => {
            cmd_obstruction(&path, seeds.as_deref(), max_iter, max_classes, tol)
        }
        Command::Decompose { path, curves, tree, out } => {
            cmd_decompose(&path, &curves, tree.as_deref(), out.as_deref())
        }
        Command::Combine { manifest, out } => cmd_combine(&manifest, out.as_deref()),
        Command::Iterate(args) => cmd_iterate(&args, tol),
    }
}

// ---------------------------------------------------------------------
// Output plumbing.
// ---------------------------------------------------------------------

/// Renders a JSON value with sorted keys (guaranteed by `serde_json`'s
/// map representation) and the requested indentation.
fn render(value: &Value, indent: usize) -> String {
    if indent == 0 {
        return value.to_string();
    }
    let indent_bytes = vec![b' '; indent];
    let formatter = serde_json::ser::PrettyFormatter::with_indent(&indent_bytes);
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    value.serialize(&mut ser).expect("a JSON value always serializes");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tk-tmp-{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

/// Loads and fully validates a self-cover file.  File-shape problems are
/// parse failures; content that parses but breaks an invariant is a
/// domain failure.
fn load_self_cover(path: &Path) -> Result<BranchedCoverRecursion, Failure> {
    let file: SelfCoverFile = read_json(path)?;
    let recursion = file
        .to_recursion()
        .map_err(|e| Failure::domain("malformed-cover", e))?;
    recursion.validate().map_err(|e| Failure::domain("invalid-cover", e))?;
    Ok(recursion)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Parses a nonnegative tolerance given as `p/q`, a decimal, or
/// scientific notation, exactly.
fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let negative = int_part.starts_with('-');
    let digits: String = int_part
        .trim_start_matches(['-', '+'])
        .chars()
        .chain(frac_part.chars())
        .collect();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut value = BigRational::from_integer(digits.parse::<BigInt>().ok()?);
    let shift = exponent - frac_part.len() as i64;
    let scale = BigInt::from(10u32).pow(shift.unsigned_abs() as u32);
    if shift >= 0 {
        value *= BigRational::from_integer(scale);
    } else {
        value /= BigRational::from_integer(scale);
    }
    Some(if negative { -value } else { value })
}

fn certify_options(tol: Option<&str>) -> Result<CertifyOptions, Failure> {
    let mut options = CertifyOptions::default();
    if let Some(s) = tol {
        let t = parse_rational(s)
            .filter(|t| t > &BigRational::zero())
            .ok_or_else(|| Failure::parse(format!("--tol {s:?} is not a positive number")))?;
        options = options.with_tolerance(t);
    }
    Ok(options)
}

/// JSON for an f64 that may be infinite (JSON numbers cannot be).
fn finite_or_string(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

// ---------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------

fn cmd_validate(path: &Path) -> Result<Value, Failure> {
    let file: SelfCoverFile = read_json(path)?;
    let recursion = match file.to_recursion() {
        Ok(r) => r,
        Err(e) => return Err(Failure::domain("malformed-cover", e)),
    };
    let report = recursion
        .validate()
        .map_err(|e| Failure::domain("invalid-cover", e))?;
    Ok(json!({
        "schema": "tk/1",
        "valid": true,
        "degree": report.degree,
        "punctures": recursion.target().labels(),
        "report": to_value(&report),
    }))
}

fn cmd_orbifold(path: &Path) -> Result<Value, Failure> {
    let recursion = load_self_cover(path)?;
    let report = recursion.validate().expect("validated above");
    let orbifold = report
        .portrait
        .orbifold()
        .map_err(|e| Failure::domain("orbifold", e))?;
    Ok(json!({
        "schema": "tk/1",
        "signature": to_value(&orbifold.signature),
        "chi": orbifold.euler_characteristic.to_string(),
        "hyperbolic": orbifold.is_hyperbolic(),
        "weights": to_value(&orbifold.weights),
        "orbifold_type": to_value(&orbifold.orbifold_type),
    }))
}

fn cmd_pullback_curve(path: &Path, curve: &str) -> Result<Value, Failure> {
    let recursion = load_self_cover(path)?;
    let word = Word::parse(curve).map_err(Failure::parse)?;
    let components =
        pullback_class(&recursion, &word).map_err(|e| Failure::domain("pullback", e))?;
    let degree_sum: usize = components.iter().map(|c| c.mapping_degree).sum();
    let listed: Vec<Value> = components
        .iter()
        .map(|c| {
            json!({
                "word": c.word.to_string(),
                "key": c.class.key().to_string(),
                "kind": to_value(&c.class.kind()),
                "essential": c.class.is_essential(),
                "sheets": c.sheets,
                "mapping_degree": c.mapping_degree,
            })
        })
        .collect();
    Ok(json!({
        "schema": "tk/1",
        "curve": word.to_string(),
        "degree": recursion.degree(),
        "degree_sum": degree_sum,
        "components": listed,
    }))
}

fn cmd_matrix(path: &Path, curves: &Path, tol: Option<&str>) -> Result<Value, Failure> {
    let recursion = load_self_cover(path)?;
    let spec: MulticurveSpec = read_json(curves)?;
    let multicurve = spec.build().map_err(|e| Failure::domain("multicurve", e))?;
    let data =
        transition_data(&recursion, &multicurve).map_err(|e| Failure::domain("pullback", e))?;
    let options = certify_options(tol)?;
    let spectral = data
        .matrix
        .certify_spectral_radius(&options)
        .map_err(|e| Failure::domain("certification", e))?;
    let entries: Vec<Vec<String>> = (0..data.matrix.n())
        .map(|i| (0..data.matrix.n()).map(|j| data.matrix.entry(i, j).to_string()).collect())
        .collect();
    Ok(json!({
        "schema": "tk/1",
        "classes": multicurve.classes().iter().map(|c| c.key().to_string()).collect::<Vec<_>>(),
        "entries": entries,
        "stable": data.is_stable(),
        "escaped": data.escaped.iter().map(|c| c.key().to_string()).collect::<Vec<_>>(),
        "spectral": to_value(&spectral),
    }))
}

fn cmd_obstruction(
    path: &Path,
    seeds: Option<&Path>,
    max_iter: usize,
    max_classes: usize,
    tol: Option<&str>,
) -> Result<Value, Failure> {
    let recursion = load_self_cover(path)?;
    let seeds = match seeds {
        Some(p) => {
            let specs: Vec<MulticurveSpec> = read_json(p)?;
            let mut out = Vec::with_capacity(specs.len());
            for spec in &specs {
                out.push(spec.build().map_err(|e| Failure::domain("multicurve", e))?);
            }
            Some(out)
        }
        None => None,
    };
    let budget = SearchBudget { max_iterations: max_iter, max_classes };
    let options = certify_options(tol)?;
    let outcome = search_obstruction(&recursion, seeds, &budget, &options)
        .map_err(|e| Failure::domain("search", e))?;
    let mut value = to_value(&outcome);
    if let ObstructionOutcome::Found { report } | ObstructionOutcome::CandidateUncertified { report } =
        &outcome
    {
        value["lambda"] = json!({
            "low": report.spectral.low.to_string(),
            "high": report.spectral.high.to_string(),
            "low_approx": rational_to_f64(&report.spectral.low),
            "high_approx": rational_to_f64(&report.spectral.high),
        });
    }
    value["schema"] = json!("tk/1");
    Ok(value)
}

fn cmd_decompose(
    path: &Path,
    curves: &Path,
    tree: Option<&Path>,
    out: Option<&Path>,
) -> Result<Value, Failure> {
    let recursion = load_self_cover(path)?;
    let spec: MulticurveSpec = read_json(curves)?;
    let multicurve = spec.build().map_err(|e| Failure::domain("multicurve", e))?;
    let tree_spec = match tree {
        Some(p) => read_json::<TreeSpec>(p)?,
        None => TreeSpec::infer(recursion.target(), &multicurve)
            .map_err(|e| Failure::domain("decompose", e))?,
    };
    let dec = decompose(&recursion, &multicurve, &tree_spec)
        .map_err(|e| Failure::domain("decompose", e))?;
    let returns = first_return_maps(&dec).map_err(|e| Failure::domain("decompose", e))?;
    let pieces: Vec<Value> = dec
        .pieces
        .iter()
        .map(|p| {
            json!({
                "name": p.name,
                "map_to": p.map_to,
                "degree": p.degree,
                "punctures": p.recursion.source().labels(),
            })
        })
        .collect();
    let first_returns: Vec<Value> = returns
        .iter()
        .map(|fr| {
            let orbifold = fr.report.portrait.orbifold().ok();
            json!({
                "node": fr.node,
                "period": fr.period,
                "degree": fr.report.degree,
                "signature": orbifold.as_ref().map(|o| to_value(&o.signature)),
                "chi": orbifold.as_ref().map(|o| o.euler_characteristic.to_string()),
                "hyperbolic": orbifold.as_ref().map(|o| o.is_hyperbolic()),
            })
        })
        .collect();
    if let Some(out_path) = out {
        write_atomic(out_path, &normalized_json(&dec.manifest))
            .map_err(|e| Failure::io(format!("{}: {e}", out_path.display())))?;
    }
    Ok(json!({
        "schema": "tk/1",
        "manifest": to_value(&dec.manifest),
        "pieces": pieces,
        "cycles": to_value(&dec.cycles),
        "caps": to_value(&dec.caps),
        "decorations": dec.decorations,
        "first_returns": first_returns,
    }))
}

fn cmd_combine(manifest: &Path, out: Option<&Path>) -> Result<Value, Failure> {
    let manifest: thurston_kit::combine::CombineManifest = read_json(manifest)?;
    let combined =
        thurston_kit::combine::combine(&manifest).map_err(|e| Failure::domain("combine", e))?;
    let file = SelfCoverFile::from_recursion(&combined.recursion)
        .expect("an assembled cover is a self-cover");
    if let Some(out_path) = out {
        write_atomic(out_path, &normalized_json(&file))
            .map_err(|e| Failure::io(format!("{}: {e}", out_path.display())))?;
    }
    let curves: Vec<Value> = combined
        .curves
        .iter()
        .map(|c| {
            json!({
                "edge": c.edge,
                "word": c.word.to_string(),
                "image_edge": c.image_edge,
                "degree": c.degree,
            })
        })
        .collect();
    let n = combined.predicted_matrix.n();
    let predicted: Vec<Vec<String>> = (0..n)
        .map(|i| (0..n).map(|j| combined.predicted_matrix.entry(i, j).to_string()).collect())
        .collect();
    Ok(json!({
        "schema": "tk/1",
        "degree": combined.recursion.degree(),
        "punctures": combined.recursion.target().labels(),
        "phantom_count": combined.phantom_count,
        "curves": curves,
        "predicted_matrix": predicted,
        "cover": to_value(&file),
    }))
}

// ---------------------------------------------------------------------
// Iteration.
// ---------------------------------------------------------------------

fn parse_tracked(track: Option<&str>, n_points: usize) -> Result<Vec<Bipartition>, Failure> {
    match track {
        None => Ok(Bipartition::all_pairs(n_points)),
        Some(s) if s.trim().is_empty() => Ok(Vec::new()),
        Some(s) => {
            let mut out = Vec::new();
            for part in s.split(';') {
                let indices: Result<Vec<usize>, _> =
                    part.split(',').map(|t| t.trim().parse::<usize>()).collect();
                let indices = indices
                    .map_err(|_| Failure::parse(format!("--track component {part:?}")))?;
                out.push(
                    Bipartition::new(indices, n_points)
                        .map_err(|e| Failure::domain("bipartition", e))?,
                );
            }
            Ok(out)
        }
    }
}

fn f64_tolerance(tol: Option<&str>) -> Result<Option<f64>, Failure> {
    match tol {
        None => Ok(None),
        Some(s) => s
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0)
            .map(Some)
            .ok_or_else(|| Failure::parse(format!("--tol {s:?} is not a positive number"))),
    }
}

fn complex_json(z: num_complex::Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

/// CSV trace: one row per iteration with every point and tracked proxy.
fn trace_csv(
    point_count: usize,
    points_at: impl Fn(usize) -> Vec<num_complex::Complex64>,
    iterations: usize,
    tracked: &[Bipartition],
    proxies: &[Vec<f64>],
) -> String {
    let mut header = vec!["iteration".to_string()];
    for k in 1..=point_count {
        header.push(format!("p{k}_re"));
        header.push(format!("p{k}_im"));
    }
    for class in tracked {
        header.push(format!("proxy_{}", class.label().replace(',', "_")));
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..iterations {
        let mut row = vec![i.to_string()];
        for p in points_at(i) {
            row.push(format!("{:e}", p.re));
            row.push(format!("{:e}", p.im));
        }
        for seq in proxies {
            row.push(format!("{:e}", seq[i]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Shared verdict JSON for the spider and mating runs.
#[allow(clippy::too_many_arguments)]
fn verdict_json(
    mode: &str,
    manifest: Value,
    steps: usize,
    status: &IterationStatus,
    fallback: Verdict,
    tracked: &[Bipartition],
    empirical_floor: Option<f64>,
    extra: Value,
) -> Value {
    let (status_str, detail) = match status {
        IterationStatus::Converged { c } => {
            ("converged", json!({ "c": complex_json(*c) }))
        }
        IterationStatus::Degenerate { shrinking, collision } => (
            "degenerate",
            json!({
                "shrinking": shrinking.iter().map(Bipartition::label).collect::<Vec<_>>(),
                "collision": collision.map(|(i, j)| json!([i, j])),
            }),
        ),
        IterationStatus::Indeterminate { reason } => {
            ("indeterminate", json!({ "reason": reason }))
        }
        IterationStatus::Running => match fallback {
            Verdict::Converged => ("converged", json!({})),
            Verdict::Degenerate => ("degenerate", json!({})),
            Verdict::Indeterminate => (
                "indeterminate",
                json!({ "reason": "step budget exhausted without a verdict" }),
            ),
        },
    };
    let mut value = json!({
        "schema": "tk/1",
        "mode": mode,
        "run": manifest,
        "steps": steps,
        "status": status_str,
        "tracked": tracked.iter().map(Bipartition::label).collect::<Vec<_>>(),
        "empirical_floor": empirical_floor.map(finite_or_string),
    });
    merge(&mut value, detail);
    merge(&mut value, extra);
    value
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(into), Value::Object(from)) = (into, from) {
        for (k, v) in from {
            into.insert(k, v);
        }
    }
}

fn cmd_iterate(args: &IterateArgs, tol: Option<&str>) -> Result<Value, Failure> {
    let mut thresholds = Thresholds::default();
    if let Some(t) = f64_tolerance(tol)? {
        thresholds.converge_tol = t;
    }
    if args.mating {
        return iterate_mating(args, &thresholds);
    }
    let angle_text = args
        .angle
        .as_deref()
        .ok_or_else(|| Failure::parse("one of --angle or --mating is required"))?;
    let angle = ExternalAngle::parse(angle_text).map_err(Failure::parse)?;
    let orbit_len = angle.orbit().len();
    let tracked = parse_tracked(args.track.as_deref(), orbit_len)?;

    let start = match args.seed {
        Some(seed) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            SpiderConfiguration::admissible_start(angle, &mut rng)
        }
        None => SpiderConfiguration::standard_start(angle),
    };
    let start_points: Vec<Value> = start.points().iter().copied().map(complex_json).collect();

    let mut state = PullbackIterationState::new(start, tracked, &thresholds)
        .map_err(|e| Failure::domain("iterate", e))?;
    state.run(args.steps, &thresholds).map_err(|e| Failure::domain("iterate", e))?;
    let classification = state.classification(&thresholds);

    if let Some(csv_path) = &args.csv {
        let csv = trace_csv(
            orbit_len,
            |i| state.history()[i].points().to_vec(),
            state.history().len(),
            state.tracked(),
            state.proxies(),
        );
        write_atomic(csv_path, &csv)
            .map_err(|e| Failure::io(format!("{}: {e}", csv_path.display())))?;
    }

    let manifest = json!({
        "angle": angle.to_string(),
        "seed": args.seed,
        "start": start_points,
        "steps": args.steps,
        "track": state.tracked().iter().map(Bipartition::label).collect::<Vec<_>>(),
        "thresholds": thresholds_json(&thresholds),
    });
    let extra = match state.status() {
        IterationStatus::Converged { c } => {
            json!({ "residual": orbit_relation_residual(angle, *c) })
        }
        _ => json!({}),
    };
    Ok(verdict_json(
        "spider",
        manifest,
        state.steps(),
        state.status(),
        classification.verdict,
        state.tracked(),
        classification.empirical_floor,
        extra,
    ))
}

fn thresholds_json(t: &Thresholds) -> Value {
    json!({
        "converge_tol": t.converge_tol,
        "degenerate_threshold": t.degenerate_threshold,
        "window": t.window,
        "collision_tol": t.collision_tol,
        "collision_margin": t.collision_margin,
        "branch_tol": t.branch_tol,
    })
}

#[cfg(feature = "mating")]
fn iterate_mating(args: &IterateArgs, thresholds: &Thresholds) -> Result<Value, Failure> {
    use thurston_kit::mating::BasilicaSelfMating;
    let tracked = parse_tracked(args.track.as_deref(), 3)?;
    let start = match args.seed {
        Some(seed) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            BasilicaSelfMating::admissible_start(&mut rng)
        }
        None => num_complex::Complex64::new(0.4, 0.3),
    };
    let mut run = BasilicaSelfMating::new(start, tracked, thresholds)
        .map_err(|e| Failure::domain("iterate", e))?;
    run.run(args.steps, thresholds).map_err(|e| Failure::domain("iterate", e))?;
    let classification = run.classification(thresholds);

    if let Some(csv_path) = &args.csv {
        let history: Vec<_> = run.history().to_vec();
        let csv = trace_csv(
            3,
            |i| {
                vec![
                    history[i],
                    num_complex::Complex64::new(0.0, 0.0),
                    num_complex::Complex64::new(1.0, 0.0),
                ]
            },
            history.len(),
            run.tracked(),
            run.proxies(),
        );
        write_atomic(csv_path, &csv)
            .map_err(|e| Failure::io(format!("{}: {e}", csv_path.display())))?;
    }

    let manifest = json!({
        "mating": "basilica-self",
        "seed": args.seed,
        "start": complex_json(start),
        "steps": args.steps,
        "track": run.tracked().iter().map(Bipartition::label).collect::<Vec<_>>(),
        "thresholds": thresholds_json(thresholds),
    });
    Ok(verdict_json(
        "mating",
        manifest,
        run.steps(),
        run.status(),
        classification.verdict,
        run.tracked(),
        classification.empirical_floor,
        json!({}),
    ))
}

#[cfg(not(feature = "mating"))]
fn iterate_mating(_args: &IterateArgs, _thresholds: &Thresholds) -> Result<Value, Failure> {
    Err(Failure::parse("this build does not include mating support"))
}
