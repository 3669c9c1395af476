//! Command-line front end: polytope file I/O, potential descriptors, and the
//! subcommand dispatch behind the `toric` binary.
//!
//! Every JSON output embeds `schema_version`; rational values are serialized
//! as `p/q` strings. Exit codes: 0 on success, 2 on validation errors, 3 on
//! numerical failures.

use crate::asymptotics::{self, CoefficientVector};
use crate::curvature::{curvature_field, FieldKind};
use crate::exact::{self, parse_rat};
use crate::functional::{self, AffineData};
use crate::polytope::DelzantPolytope;
use crate::potential::{
    legendre_to_kahler, GridCorrection, GridFunction, PolyCorrection, SymplecticPotential,
    ZeroCorrection,
};
use crate::soliton::{self, FanoContext};
use crate::solver::{self, SolveStatus};
use crate::{builtin, potential::Correction};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const SCHEMA_VERSION: u32 = 1;

/// Default seed for randomized test functions; fixed for reproducibility.
pub const DEFAULT_SEED: u64 = 271828;

#[derive(Parser, Debug)]
#[command(
    name = "toric",
    about = "Kahler geometry on toric manifolds: Delzant polytopes, curvature, stability, solitons",
    after_help = "POLYTOPE is a JSON file {\"dim\": n, \"facets\": [{\"normal\": [int,..], \"offset\": \"p/q\"}, ..], \"label\": \"..\"}\nor a builtin name: interval, fano-interval, square, fano-square, simplex, cp2, bl1cp2, pdelta:<rational>."
)]
pub struct Cli {
    /// worker thread cap (or env TORIC_THREADS)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// seed for randomized test functions
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Verify the Delzant conditions and report the vertex structure
    CheckDelzant { polytope: String },
    /// Lattice points of the dilate k P
    Lattice {
        polytope: String,
        #[arg(long, default_value_t = 1)]
        k: u64,
    },
    /// The toric Futaki invariant (exact rational)
    Futaki { polytope: String },
    /// The extremal affine target A (exact rational)
    ExtremalA { polytope: String },
    /// Single-crease stability scan with exact certificates
    StabilityProbe {
        polytope: String,
        /// per-edge subdivision budget of the crease family
        #[arg(long, default_value_t = 8)]
        budget: usize,
        /// optional affine A as JSON {"constant": "p/q", "gradient": ["p/q",..]};
        /// defaults to the extremal affine target
        #[arg(long)]
        a: Option<String>,
    },
    /// Evaluate a curvature field on a grid and emit CSV
    Curvature {
        polytope: String,
        #[command(flatten)]
        potential: PotentialArgs,
        /// which scalar field: S, L, or normF2
        #[arg(long, default_value = "S")]
        field: String,
        #[arg(long, default_value_t = 33)]
        grid: usize,
        /// output CSV path (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// emit the gnuplot nonuniform-matrix variant
        #[arg(long)]
        matrix: bool,
    },
    /// Solve the extremal (1d), prescribed-curvature, or soliton equation
    Solve {
        polytope: String,
        #[arg(long, value_parser = ["extremal", "prescribed", "soliton"])]
        equation: String,
        /// affine target JSON {"constant": .., "gradient": [..]}; defaults to
        /// the extremal affine target
        #[arg(long = "A")]
        a: Option<String>,
        #[arg(long, default_value_t = 33)]
        grid: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 60)]
        max_iter: usize,
        /// output directory for the report and field CSVs
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kahler-Ricci soliton constants of a Fano polytope
    SolitonConstants {
        polytope: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Integral-identity suite for the soliton operator
    SolitonIdentities {
        polytope: String,
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Large-degree asymptotics of algebraic metrics; emits CSV
    Asymptotics {
        polytope: String,
        #[command(flatten)]
        potential: PotentialArgs,
        /// comma-separated degrees
        #[arg(long, default_value = "8,16,32")]
        k: String,
        #[arg(long, value_parser = ["l2", "veronese", "roundtrip"], default_value = "l2")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the Legendre-dual Kahler potential on a dual-space grid
    Legendre {
        polytope: String,
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value_t = 6.0)]
        radius: f64,
        #[arg(long, default_value_t = 33)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct PotentialArgs {
    /// potential descriptor JSON, e.g.
    /// {"reference":"guillemin","correction":{"kind":"zero"}}, or a path to
    /// such a file
    #[arg(long, default_value = r#"{"reference":"guillemin","correction":{"kind":"zero"}}"#)]
    pub potential: String,
}

/// Errors are split by exit code: validation problems exit 2, numerical
/// failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Resolve a polytope argument: builtin name or JSON file path.
pub fn load_polytope(spec: &str) -> Result<DelzantPolytope, CliError> {
    if let Some(p) = builtin::by_name(spec) {
        return Ok(p);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "no builtin polytope or file named {spec:?}; builtins: {}",
            builtin::BUILTIN_NAMES.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(validation)?;
    DelzantPolytope::from_json(&text).map_err(validation)
}

/// Build a potential from its descriptor JSON (inline or a file path).
pub fn load_potential(
    p: &Arc<DelzantPolytope>,
    descriptor: &str,
) -> Result<SymplecticPotential, CliError> {
    let text = if descriptor.trim_start().starts_with('{') {
        descriptor.to_string()
    } else {
        std::fs::read_to_string(descriptor).map_err(validation)?
    };
    let desc: serde_json::Value = serde_json::from_str(&text).map_err(validation)?;
    let reference = desc
        .get("reference")
        .and_then(|v| v.as_str())
        .unwrap_or("guillemin");
    if reference != "guillemin" {
        return Err(CliError::Validation(format!(
            "unknown reference {reference:?}; only \"guillemin\" is supported"
        )));
    }
    let correction = desc.get("correction").cloned().unwrap_or(json!({"kind": "zero"}));
    let kind = correction
        .get("kind")
        .and_then(|v| v.as_str())
        .unwrap_or("zero");
    let corr: Arc<dyn Correction> = match kind {
        "zero" => Arc::new(ZeroCorrection::new(p.dim())),
        "poly" => {
            let terms = correction
                .get("terms")
                .and_then(|v| v.as_array())
                .ok_or_else(|| CliError::Validation("poly correction needs terms".into()))?;
            let mut parsed = Vec::new();
            for t in terms {
                let coeff = t
                    .get("coeff")
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| CliError::Validation("poly term needs coeff".into()))?;
                let exps: Vec<u32> = t
                    .get("exps")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| CliError::Validation("poly term needs exps".into()))?
                    .iter()
                    .map(|e| e.as_u64().unwrap_or(0) as u32)
                    .collect();
                if exps.len() != p.dim() {
                    return Err(CliError::Validation(format!(
                        "poly exponent arity {} != dim {}",
                        exps.len(),
                        p.dim()
                    )));
                }
                parsed.push((coeff, exps));
            }
            Arc::new(PolyCorrection::new(p.dim(), parsed))
        }
        "grid" => {
            let path = correction
                .get("path")
                .and_then(|v| v.as_str())
                .ok_or_else(|| CliError::Validation("grid correction needs path".into()))?;
            let file = std::fs::File::open(path).map_err(validation)?;
            let gf = GridFunction::read_csv(std::io::BufReader::new(file)).map_err(validation)?;
            Arc::new(GridCorrection::new(&gf))
        }
        other => {
            return Err(CliError::Validation(format!(
                "unknown correction kind {other:?} (expected zero | poly | grid)"
            )))
        }
    };
    Ok(SymplecticPotential::with_correction(Arc::clone(p), corr))
}

fn parse_affine(p: &DelzantPolytope, text: &str) -> Result<AffineData, CliError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(validation)?;
    let parse_entry = |v: &serde_json::Value| -> Result<exact::Rat, CliError> {
        match v {
            serde_json::Value::String(s) => {
                parse_rat(s).ok_or_else(|| CliError::Validation(format!("bad rational {s:?}")))
            }
            serde_json::Value::Number(n) => {
                let f = n.as_f64().unwrap();
                if f.fract() == 0.0 && f.abs() < 1e15 {
                    Ok(exact::rat(f as i64))
                } else {
                    // decimal literals become exact via a power-of-ten denominator
                    let s = format!("{f}");
                    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
                    let denom = 10i64.pow(frac.len() as u32);
                    let numer: i64 = format!("{int}{frac}")
                        .parse()
                        .map_err(|e| CliError::Validation(format!("bad number {s}: {e}")))?;
                    Ok(exact::ratio(numer, denom))
                }
            }
            other => Err(CliError::Validation(format!("bad affine entry {other}"))),
        }
    };
    let constant = v
        .get("constant")
        .map(&parse_entry)
        .transpose()?
        .unwrap_or_else(|| exact::rat(0));
    let gradient = match v.get("gradient") {
        Some(serde_json::Value::Array(items)) => {
            if items.len() != p.dim() {
                return Err(CliError::Validation(format!(
                    "gradient arity {} != dim {}",
                    items.len(),
                    p.dim()
                )));
            }
            items.iter().map(&parse_entry).collect::<Result<Vec<_>, _>>()?
        }
        None => vec![exact::rat(0); p.dim()],
        Some(other) => {
            return Err(CliError::Validation(format!("bad gradient {other}")));
        }
    };
    Ok(AffineData { constant, gradient })
}

fn write_output(path: &Option<PathBuf>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir).map_err(numerical)?;
                }
            }
            std::fs::write(p, contents).map_err(numerical)
        }
        None => {
            print!("{contents}");
            std::io::stdout().flush().map_err(numerical)
        }
    }
}

/// Emit a grid function in the CSV format, or the gnuplot matrix variant.
pub fn emit_plot_data(
    field: &GridFunction,
    path: &Option<PathBuf>,
    matrix: bool,
) -> Result<(), CliError> {
    let mut buf: Vec<u8> = Vec::new();
    if matrix {
        field.write_matrix(&mut buf).map_err(numerical)?;
    } else {
        field.write_csv(&mut buf).map_err(numerical)?;
    }
    write_output(path, std::str::from_utf8(&buf).unwrap())
}

/// Run a parsed command; returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    if let Some(threads) = cli
        .threads
        .or_else(|| std::env::var("TORIC_THREADS").ok().and_then(|s| s.parse().ok()))
    {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::CheckDelzant { polytope } => {
            // report failures as structured JSON but exit 2
            match load_polytope(&polytope) {
                Ok(p) => {
                    let out = json!({
                        "schema_version": SCHEMA_VERSION,
                        "delzant": true,
                        "label": p.label(),
                        "dim": p.dim(),
                        "facets": p.facets().len(),
                        "vertices": p.vertices().len(),
                        "vertex_coordinates": p.vertices().iter().map(|v| {
                            v.iter().map(exact::format_rat).collect::<Vec<_>>()
                        }).collect::<Vec<_>>(),
                    });
                    println!("{}", serde_json::to_string_pretty(&out).unwrap());
                    Ok(())
                }
                Err(e) => {
                    let out = json!({
                        "schema_version": SCHEMA_VERSION,
                        "delzant": false,
                        "error": e.message(),
                    });
                    println!("{}", serde_json::to_string_pretty(&out).unwrap());
                    Err(e)
                }
            }
        }
        Command::Lattice { polytope, k } => {
            let p = load_polytope(&polytope)?;
            if k == 0 {
                return Err(CliError::Validation("k must be positive".into()));
            }
            let points = p.lattice_points(k);
            let out = json!({
                "schema_version": SCHEMA_VERSION,
                "k": k,
                "count": points.len(),
                "points": points,
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            Ok(())
        }
        Command::Futaki { polytope } => {
            let p = load_polytope(&polytope)?;
            let f = functional::futaki(&p);
            let out = json!({
                "schema_version": SCHEMA_VERSION,
                "futaki": f.iter().map(exact::format_rat).collect::<Vec<_>>(),
                "constant_a": exact::format_rat(&functional::constant_a(&p)),
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            Ok(())
        }
        Command::ExtremalA { polytope } => {
            let p = load_polytope(&polytope)?;
            let a = functional::extremal_affine(&p);
            let out = json!({
                "schema_version": SCHEMA_VERSION,
                "constant": exact::format_rat(&a.constant),
                "gradient": a.gradient.iter().map(exact::format_rat).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            Ok(())
        }
        Command::StabilityProbe {
            polytope,
            budget,
            a,
        } => {
            let p = load_polytope(&polytope)?;
            let affine = match a {
                Some(text) => parse_affine(&p, &text)?,
                None => functional::extremal_affine(&p),
            };
            let report = functional::stability_probe(&p, &affine, budget);
            let out = json!({
                "schema_version": SCHEMA_VERSION,
                "value": report.value,
                "value_exact": report.value_exact,
                "crease": report.crease,
                "crease_normal": report.crease_normal,
                "crease_offset": report.crease_offset,
                "certificate": report.certificate,
                "creases_scanned": report.creases_scanned,
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            Ok(())
        }
        Command::Curvature {
            polytope,
            potential,
            field,
            grid,
            out,
            matrix,
        } => {
            let p = Arc::new(load_polytope(&polytope)?);
            if grid < 3 {
                return Err(CliError::Validation("grid must be at least 3".into()));
            }
            let kind = FieldKind::parse(&field).ok_or_else(|| {
                CliError::Validation(format!("unknown field {field:?}; expected S, L, or normF2"))
            })?;
            let u = load_potential(&p, &potential.potential)?;
            let template = GridFunction::sample(&p, grid, |_| 0.0);
            let result = curvature_field(&u, &template, kind).map_err(numerical)?;
            emit_plot_data(&result, &out, matrix)
        }
        Command::Solve {
            polytope,
            equation,
            a,
            grid,
            tol,
            max_iter,
            out,
        } => {
            let p = Arc::new(load_polytope(&polytope)?);
            let outdir = out.unwrap_or_else(|| PathBuf::from("run"));
            solve_command(&p, &equation, a.as_deref(), grid, tol, max_iter, &outdir)
        }
        Command::SolitonConstants { polytope, tol } => {
            let p = Arc::new(load_polytope(&polytope)?);
            let fano = p.fano_structure().map_err(validation)?;
            let ctx = FanoContext::new(&fano);
            let result = soliton::soliton_constants(&ctx, tol, 100).map_err(numerical)?;
            let out = json!({
                "schema_version": SCHEMA_VERSION,
                "c": result.c,
                "gradF_norm": result.grad_norm,
                "iterations": result.iterations,
                "center": fano.center().iter().map(exact::format_rat).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            Ok(())
        }
        Command::SolitonIdentities {
            polytope,
            potential,
            tol,
        } => {
            let p = Arc::new(load_polytope(&polytope)?);
            let fano = p.fano_structure().map_err(validation)?;
            let ctx = FanoContext::new(&fano);
            // the descriptor's correction is applied on the centered polytope
            let u = load_potential(ctx.polytope(), &potential.potential)?;
            let fns = soliton::standard_test_functions(p.dim(), 4, 6, cli.seed);
            let report = soliton::identity_suite(&u, &fns, tol).map_err(numerical)?;
            let out = json!({
                "schema_version": SCHEMA_VERSION,
                "pass": report.pass,
                "checks": report.checks,
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            if report.pass {
                Ok(())
            } else {
                Err(CliError::Numerical("identity suite reported gaps".into()))
            }
        }
        Command::Asymptotics {
            polytope,
            potential,
            k,
            mode,
            out,
        } => {
            let p = Arc::new(load_polytope(&polytope)?);
            let u = load_potential(&p, &potential.potential)?;
            let ks: Vec<u64> = k
                .split(',')
                .map(|s| s.trim().parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(validation)?;
            asymptotics_command(&p, &u, &ks, &mode, &out)
        }
        Command::Legendre {
            polytope,
            potential,
            radius,
            samples,
            out,
        } => {
            let p = Arc::new(load_polytope(&polytope)?);
            let u = load_potential(&p, &potential.potential)?;
            let phi = legendre_to_kahler(&u);
            let n = p.dim();
            let axis: Vec<f64> = (0..samples)
                .map(|i| -radius + 2.0 * radius * i as f64 / (samples - 1).max(1) as f64)
                .collect();
            let mut rows = String::new();
            let mut header: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
            header.extend(["phi".into(), "grad".repeat(1)]);
            rows.push_str(&format!(
                "{},phi,{}\n",
                (0..n).map(|i| format!("t{i}")).collect::<Vec<_>>().join(","),
                (0..n).map(|i| format!("dphi{i}")).collect::<Vec<_>>().join(",")
            ));
            let mut idx = vec![0usize; n];
            'outer: loop {
                let t: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
                let jet = phi.jet(&t).map_err(numerical)?;
                rows.push_str(&format!(
                    "{},{},{}\n",
                    t.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(","),
                    jet.value,
                    jet.grad.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
                ));
                for i in (0..n).rev() {
                    idx[i] += 1;
                    if idx[i] < axis.len() {
                        continue 'outer;
                    }
                    idx[i] = 0;
                    if i == 0 {
                        break 'outer;
                    }
                }
            }
            write_output(&out, &rows)
        }
    }
}

fn solve_command(
    p: &Arc<DelzantPolytope>,
    equation: &str,
    a: Option<&str>,
    grid: usize,
    tol: f64,
    max_iter: usize,
    outdir: &Path,
) -> Result<(), CliError> {
    std::fs::create_dir_all(outdir).map_err(numerical)?;
    match equation {
        "extremal" => {
            if p.dim() != 1 {
                return Err(CliError::Validation(
                    "the closed-form extremal solve needs a 1d interval".into(),
                ));
            }
            let affine = match a {
                Some(text) => parse_affine(p, text)?,
                None => functional::extremal_affine(p),
            };
            let u = solver::solve_extremal_1d(p, &affine).map_err(numerical)?;
            let template = GridFunction::sample(p, grid.max(9), |_| 0.0);
            let ufield = GridFunction::sample(p, grid.max(9), |x| {
                u.value(x).unwrap_or(f64::NAN)
            });
            let sfield = curvature_field(&u, &template, FieldKind::Scalar).map_err(numerical)?;
            write_grid(outdir.join("u.csv"), &ufield)?;
            write_grid(outdir.join("S.csv"), &sfield)?;
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "equation": "extremal",
                "status": "Converged",
                "a": {"constant": exact::format_rat(&affine.constant),
                       "gradient": affine.gradient.iter().map(exact::format_rat).collect::<Vec<_>>()},
                "descriptor": u.descriptor(),
                "fields": ["u.csv", "S.csv"],
            });
            std::fs::write(
                outdir.join("report.json"),
                serde_json::to_string_pretty(&report).unwrap(),
            )
            .map_err(numerical)?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(())
        }
        "prescribed" => {
            if p.dim() != 2 {
                return Err(CliError::Validation(
                    "the prescribed-curvature solver needs a 2d polygon".into(),
                ));
            }
            let affine = match a {
                Some(text) => parse_affine(p, text)?,
                None => functional::extremal_affine(p),
            };
            let report =
                solver::solve_prescribed_2d(p, &affine, grid, tol, max_iter, None)
                    .map_err(numerical)?;
            finish_2d_solve(p, "prescribed", report, outdir)
        }
        "soliton" => {
            if p.dim() != 2 {
                return Err(CliError::Validation(
                    "the soliton solver needs a 2d Fano polygon".into(),
                ));
            }
            let fano = p.fano_structure().map_err(validation)?;
            let ctx = FanoContext::new(&fano);
            let report =
                solver::solve_soliton_2d(&ctx, grid, tol, max_iter).map_err(numerical)?;
            finish_2d_solve(ctx.polytope(), "soliton", report, outdir)
        }
        other => Err(CliError::Validation(format!("unknown equation {other:?}"))),
    }
}

fn finish_2d_solve(
    p: &Arc<DelzantPolytope>,
    equation: &str,
    report: solver::SolveReport,
    outdir: &Path,
) -> Result<(), CliError> {
    write_grid(outdir.join("v.csv"), &report.correction)?;
    let per_axis = report.correction.axes()[0].len();
    let ufield = GridFunction::sample(p, per_axis, |x| {
        report.potential.value(x).unwrap_or(f64::NAN)
    });
    write_grid(outdir.join("u.csv"), &ufield)?;
    // scalar field of the solution, or rho for soliton solves
    let field_name = if equation == "soliton" { "rho.csv" } else { "S.csv" };
    let template = GridFunction::sample(p, per_axis, |_| 0.0);
    if equation == "soliton" {
        let rho = GridFunction::sample(p, report.correction.axes()[0].len(), |x| {
            soliton::h_and_rho(&report.potential, x)
                .map(|(_, _, r)| r)
                .unwrap_or(f64::NAN)
        });
        write_grid(outdir.join(field_name), &rho)?;
    } else {
        match curvature_field(&report.potential, &template, FieldKind::Scalar) {
            Ok(s) => write_grid(outdir.join(field_name), &s)?,
            Err(_) => {
                // near-boundary stencils on a collapsed iterate may fail;
                // the report is still written
            }
        }
    }
    let out = json!({
        "schema_version": SCHEMA_VERSION,
        "equation": equation,
        "status": report.status,
        "iterations": report.iterations,
        "residual_history": report.residual_history,
        "final_residual": report.residual_history.last(),
        "v_max_norm": report.v_max_norm,
        "collapse_witness": report.collapse_witness,
        "fitted_affine": report.fitted_affine,
        "warnings": report.warnings,
        "fields": ["v.csv", "u.csv", field_name],
    });
    std::fs::write(
        outdir.join("report.json"),
        serde_json::to_string_pretty(&out).unwrap(),
    )
    .map_err(numerical)?;
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    match report.status {
        SolveStatus::Converged | SolveStatus::CollapseSuspected => Ok(()),
        SolveStatus::Stalled | SolveStatus::MaxIterations => Err(CliError::Numerical(
            format!("solver finished with status {:?}", report.status),
        )),
    }
}

fn write_grid(path: PathBuf, field: &GridFunction) -> Result<(), CliError> {
    let mut buf = Vec::new();
    field.write_csv(&mut buf).map_err(numerical)?;
    std::fs::write(path, buf).map_err(numerical)
}

fn asymptotics_command(
    p: &Arc<DelzantPolytope>,
    u: &SymplecticPotential,
    ks: &[u64],
    mode: &str,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    let n = p.dim();
    let nu_cols: Vec<String> = (0..n).map(|i| format!("nu{i}")).collect();
    let mut csv = format!("k,{},value,reference,gap\n", nu_cols.join(","));
    match mode {
        "l2" | "veronese" => {
            let base = if mode == "veronese" {
                let weights = vec![1.0; p.lattice_points(1).len()];
                Some(
                    CoefficientVector::new(Arc::clone(p), 1, &weights)
                        .map_err(validation)?,
                )
            } else {
                None
            };
            for &k in ks {
                let coeffs = match (mode, &base) {
                    ("l2", _) => asymptotics::l2_coefficients(u, k).map_err(numerical)?,
                    (_, Some(b)) => {
                        asymptotics::veronese_convolution(b, k).map_err(numerical)?
                    }
                    _ => unreachable!(),
                };
                for idx in 0..coeffs.points().len() {
                    let (point, norm_log) = coeffs.normalized_log(idx);
                    // reference: -u at the rescaled lattice point (interior only)
                    let reference = u.value(&point).map(|v| -v).unwrap_or(f64::NAN);
                    let gap = norm_log - reference;
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        k,
                        point
                            .iter()
                            .map(|x| format!("{x}"))
                            .collect::<Vec<_>>()
                            .join(","),
                        norm_log,
                        reference,
                        gap
                    ));
                }
            }
        }
        "roundtrip" => {
            for &k in ks {
                let err = asymptotics::density_roundtrip(u, k).map_err(numerical)?;
                let zeros = vec!["0"; n].join(",");
                csv.push_str(&format!("{k},{zeros},{err},0,{err}\n"));
            }
        }
        other => {
            return Err(CliError::Validation(format!("unknown mode {other:?}")));
        }
    }
    write_output(out, &csv)
}
