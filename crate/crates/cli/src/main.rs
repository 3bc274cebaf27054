use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::{json, Value};

use seb_core::io::{parse_instance, Diagnostics, SolutionReport, VerifyReport};
use seb_core::jnr::{self, ProbeOptions, QuadraticMap};
use seb_core::sampler::{self, SampleMethod};
use seb_core::simplex_qp::{self, QpOptions};
use seb_core::solver::{self, SolveOptions};
use seb_core::{Ball, Instance, SebError, Status};

const IDENTITY_PROBES: usize = 1000;
const CLOUD_MEB_ITERATIONS: usize = 2000;

#[derive(Parser)]
#[command(name = "seb", version, about = "Smallest enclosing ball of an intersection of balls")]
struct Cli {
    /// Single-line JSON instead of pretty-printed.
    #[arg(long, global = true)]
    compact: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the smallest enclosing ball and print a certificate.
    Solve(SolveArgs),
    /// Joint numerical range tools for the map (-g, g_1, ..., g_m).
    Jnr {
        file: PathBuf,
        #[command(subcommand)]
        action: JnrAction,
    },
    /// Compare the solver against the brute-force oracles.
    Oracle(OracleArgs),
    /// Rank of the centers and the resulting regime.
    Rank { file: PathBuf },
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    /// Absolute Frank-Wolfe gap tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check containment on this many hit-and-run samples.
    #[arg(long, value_name = "N")]
    verify: Option<usize>,
}

#[derive(Subcommand)]
enum JnrAction {
    /// CSV of sampled range points (or of the sampled x with --domain).
    Sample {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        domain: bool,
    },
    /// Exact membership of a point in G(R^n) and G(R^n)•.
    Member {
        #[arg(long, value_name = "z0,z1,...", allow_hyphen_values = true)]
        point: String,
    },
    /// Convexity and separation probes.
    Probe {
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct OracleArgs {
    file: PathBuf,
    /// Simplex grid resolution for the enumeration oracle.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Sample count for the point-cloud ball.
    #[arg(long, default_value_t = 10_000)]
    cloud: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points per axis for the max g_i grid; defaults by dimension.
    #[arg(long)]
    resolution: Option<usize>,
}

struct Failure {
    code: u8,
    body: Value,
}

impl From<SebError> for Failure {
    fn from(e: SebError) -> Self {
        let code = match e {
            SebError::EmptyInterior => 2,
            SebError::UnsupportedRegime => 3,
            _ => 1,
        };
        Failure {
            code,
            body: json!({ "error": e.to_string(), "kind": error_kind(&e) }),
        }
    }
}

fn error_kind(e: &SebError) -> &'static str {
    match e {
        SebError::InvalidRadius(_) => "InvalidRadius",
        SebError::NonFinite(_) => "NonFinite",
        SebError::DimensionMismatch { .. } => "DimensionMismatch",
        SebError::NoBalls => "NoBalls",
        SebError::ZeroDimension => "ZeroDimension",
        SebError::NotABall(_) => "NotABall",
        SebError::InvalidGram => "InvalidGram",
        SebError::InconsistentSystem(_) => "InconsistentSystem",
        SebError::NonConvergence(_) => "NonConvergence",
        SebError::CombinatorialBlowup(_) => "CombinatorialBlowup",
        SebError::SingularA { .. } => "SingularA",
        SebError::UnsupportedRegime => "UnsupportedRegime",
        SebError::SingularTransform => "SingularTransform",
        SebError::LambdaOutOfRange(_) => "LambdaOutOfRange",
        SebError::ValidationFailure(_) => "ValidationFailure",
        SebError::EmptyInterior => "EmptyInterior",
        SebError::RejectionStall => "RejectionStall",
        SebError::EmptyCloud => "EmptyCloud",
        SebError::DimensionTooLarge(_) => "DimensionTooLarge",
        SebError::InvalidArgument(_) => "InvalidArgument",
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        body: json!({ "error": format!("{}: {e}", path.display()), "kind": "Io" }),
    }
}

/// Successful output: either a JSON document or raw text (CSV).
enum Output {
    Json(Value, u8),
    Text(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads() {
        return finish(Err(f), cli.compact);
    }
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Jnr { file, action } => cmd_jnr(&file, &action),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Rank { file } => cmd_rank(&file),
    };
    finish(result, cli.compact)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| Failure {
        code: 1,
        body: json!({ "error": format!("THREADS must be a positive integer, got {raw:?}"), "kind": "InvalidArgument" }),
    })?;
    // a second initialization only happens in-process and is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn render(value: &Value, compact: bool) -> String {
    if compact {
        value.to_string()
    } else {
        serde_json::to_string_pretty(value).expect("json value serializes")
    }
}

fn finish(result: Result<Output, Failure>, compact: bool) -> ExitCode {
    match result {
        Ok(Output::Json(v, code)) => {
            println!("{}", render(&v, compact));
            ExitCode::from(code)
        }
        Ok(Output::Text(t)) => {
            print!("{t}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            println!("{}", render(&f.body, compact));
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<(Instance, Option<Ball>), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Ok(parse_instance(&text)?)
}

fn vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn cmd_solve(args: &SolveArgs) -> Result<Output, Failure> {
    let (instance, _) = load(&args.file)?;
    let opts = SolveOptions {
        qp: QpOptions {
            tol_gap: args.tol,
            max_iter: args.max_iter,
            ..QpOptions::default()
        },
        ..SolveOptions::default()
    };
    let solution = solver::solve_seb(&instance, &opts)?;
    let certificate = match solution.status {
        Status::EmptyInterior => None,
        _ => Some(solver::build_certificate(&instance, &solution)?),
    };
    let verify = match (args.verify, solution.status) {
        (Some(n), Status::CertifiedOptimal | Status::UpperBoundOnly) => {
            let cloud = sampler::sample_intersection(&instance, n, args.seed, SampleMethod::HitAndRun)?;
            let max_violation = cloud
                .points
                .iter()
                .map(|x| (x - &solution.center).norm() - solution.radius)
                .fold(0.0, f64::max);
            Some(VerifyReport {
                samples: n,
                seed: args.seed,
                max_violation,
            })
        }
        _ => None,
    };
    let diagnostics = Diagnostics {
        fw_gap: solution.fw_gap,
        iterations: solution.iterations,
        identity_residual_max: solver::max_identity_residual(&instance, &solution, IDENTITY_PROBES, args.seed)?,
        verify,
    };
    let report = SolutionReport::new(&solution, certificate.as_ref(), diagnostics);
    let mut value = serde_json::to_value(&report).expect("report serializes");
    value["seed"] = json!(args.seed);
    let code = if solution.status == Status::EmptyInterior { 2 } else { 0 };
    Ok(Output::Json(value, code))
}

/// The map for the file's target ball, or for the solved enclosing ball.
fn jnr_map(instance: &Instance, target: Option<Ball>) -> Result<QuadraticMap, Failure> {
    Ok(match target {
        Some(t) => QuadraticMap::from_instance(instance, &t)?,
        None => {
            let solution = solver::solve_seb(instance, &SolveOptions::default())?;
            if solution.status == Status::EmptyInterior {
                return Err(SebError::EmptyInterior.into());
            }
            QuadraticMap::from_solution(instance, &solution)?
        }
    })
}

fn cmd_jnr(path: &Path, action: &JnrAction) -> Result<Output, Failure> {
    let (instance, target) = load(path)?;
    let map = jnr_map(&instance, target)?;
    match action {
        JnrAction::Sample {
            count,
            seed,
            out,
            domain,
        } => {
            let hits = jnr::sample_range(&map, &ProbeOptions::new(*count, *seed))?;
            let (prefix, start, width) = if *domain {
                ("x", 1, map.dimension())
            } else {
                ("g", 0, map.len() + 1)
            };
            let mut writer = csv::Writer::from_writer(Vec::new());
            let header: Vec<String> = (start..start + width).map(|i| format!("{prefix}{i}")).collect();
            writer.write_record(&header).map_err(csv_failure)?;
            for h in &hits {
                let row = if *domain { &h.x } else { &h.z };
                writer
                    .write_record(row.iter().map(|v| v.to_string()))
                    .map_err(csv_failure)?;
            }
            let bytes = writer.into_inner().map_err(|e| csv_failure(e.into_error().into()))?;
            let text = String::from_utf8(bytes).expect("csv output is utf-8");
            match out {
                Some(p) => {
                    std::fs::write(p, &text).map_err(|e| io_failure(p, e))?;
                    Ok(Output::Json(
                        json!({ "seed": seed, "rows": hits.len(), "columns": header, "out": p.display().to_string() }),
                        0,
                    ))
                }
                None => {
                    eprintln!("seed {seed}");
                    Ok(Output::Text(text))
                }
            }
        }
        JnrAction::Member { point } => {
            let z = parse_point(point)?;
            let g = jnr::membership_g(&map, &z)?;
            let bullet = match jnr::membership_g_bullet(&map, &z) {
                Ok(v) => Some(v),
                Err(SebError::UnsupportedRegime) => None,
                Err(e) => return Err(e.into()),
            };
            let verdict = |v: &jnr::MembershipVerdict| {
                json!({ "member": v.member, "margin": v.margin, "witness": v.witness.as_ref().map(vec) })
            };
            Ok(Output::Json(
                json!({
                    "point": vec(&z),
                    "regime": map.regime(),
                    "G": g.member,
                    "G_bullet": bullet.as_ref().map(|v| v.member),
                    "detail": {
                        "G": verdict(&g),
                        "G_bullet": bullet.as_ref().map(verdict),
                    },
                }),
                0,
            ))
        }
        JnrAction::Probe { count, seed } => {
            let opts = ProbeOptions::new(*count, *seed);
            let separation = jnr::separation_probe(&map, &opts)?;
            let convexity = jnr::convexity_probe(&map, &opts)?;
            let first = convexity.counterexamples.first().map(|c| {
                json!({ "x": vec(&c.x), "y": vec(&c.y), "lambda": c.lambda, "z": vec(&c.z) })
            });
            Ok(Output::Json(
                json!({
                    "seed": seed,
                    "samples": count,
                    "regime": map.regime(),
                    "sampling_radius": convexity.radius,
                    "convexity": {
                        "counterexamples": convexity.counterexamples.len(),
                        "first": first,
                    },
                    "separation": {
                        "g_hits_lambda": separation.g_hits_lambda.len(),
                        "bullet_hits_lambda": separation.bullet_hits_lambda.len(),
                        "implication_holds": separation.implication_holds(),
                    },
                }),
                0,
            ))
        }
    }
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure {
        code: 1,
        body: json!({ "error": e.to_string(), "kind": "Io" }),
    }
}

fn parse_point(text: &str) -> Result<DVector<f64>, Failure> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| SebError::InvalidArgument(format!("bad --point {text:?}: {e}")))?;
    Ok(DVector::from_vec(values))
}

fn cmd_oracle(args: &OracleArgs) -> Result<Output, Failure> {
    let (instance, _) = load(&args.file)?;
    let solution = solver::solve_seb(&instance, &SolveOptions::default())?;
    let mut warnings: Vec<String> = Vec::new();

    let qp = simplex_qp::build_qp(&instance);
    let grid = match simplex_qp::grid_oracle(&qp, args.grid) {
        Ok((value, minimizer)) => json!({
            "k": args.grid,
            "value": value,
            "minimizer": vec(&minimizer),
            "abs_diff": (value - solution.qp_value).abs(),
        }),
        Err(e) => {
            warnings.push(format!("grid_oracle skipped: {e}"));
            Value::Null
        }
    };

    let cloud = match sampler::sample_intersection(&instance, args.cloud, args.seed, SampleMethod::HitAndRun)
        .and_then(|c| Ok((sampler::cloud_meb(&c, CLOUD_MEB_ITERATIONS)?, sampler::farthest_distance(&c, &solution.center)?)))
    {
        Ok((ball, farthest)) => json!({
            "samples": args.cloud,
            "radius": ball.radius,
            "lower_bound": ball.lower_bound,
            "center": vec(&ball.center),
            "farthest_from_solver_center": farthest,
        }),
        Err(e) => {
            warnings.push(format!("cloud_meb skipped: {e}"));
            Value::Null
        }
    };

    let n = instance.dimension();
    let resolution = args.resolution.unwrap_or(match n {
        1 => 20_001,
        2 => 601,
        _ => 81,
    });
    let (lo, hi) = center_box(&instance);
    let slater = match sampler::grid_min_maxg(&instance, resolution, &lo, &hi) {
        Ok(g) => json!({
            "resolution": resolution,
            "value": g.value,
            "argmin": vec(&g.argmin),
            "error_bound": g.error_bound,
            "minus_qp_value": -solution.qp_value,
        }),
        Err(e) => {
            warnings.push(format!("grid_min_maxg skipped: {e}"));
            Value::Null
        }
    };

    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(Output::Json(
        json!({
            "seed": args.seed,
            "solver": {
                "qp_value": solution.qp_value,
                "radius": solution.radius,
                "center": vec(&solution.center),
                "status": solution.status,
            },
            "grid_oracle": grid,
            "cloud_meb": cloud,
            "grid_min_maxg": slater,
            "warnings": warnings,
        }),
        0,
    ))
}

/// Bounding box of the centers, padded. The minimizer of `max_i g_i` is a
/// convex combination of the centers, so it lies inside.
fn center_box(instance: &Instance) -> (DVector<f64>, DVector<f64>) {
    let centers = instance.centers();
    let n = instance.dimension();
    let mut lo = DVector::from_element(n, f64::INFINITY);
    let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
    for c in &centers {
        lo = lo.inf(c);
        hi = hi.sup(c);
    }
    let pad = 0.05 * (1.0 + (&hi - &lo).amax());
    (lo.add_scalar(-pad), hi.add_scalar(pad))
}

fn cmd_rank(path: &Path) -> Result<Output, Failure> {
    let (instance, _) = load(path)?;
    let regime = solver::classify(&instance);
    let rank_shifted = solver::solve_seb(&instance, &SolveOptions::default())
        .ok()
        .and_then(|s| s.regime.rank_shifted);
    Ok(Output::Json(
        json!({
            "dimension": instance.dimension(),
            "balls": instance.len(),
            "rank_centers": regime.rank_centers,
            "rank_shifted": rank_shifted,
            "regime": regime.regime,
        }),
        0,
    ))
}
