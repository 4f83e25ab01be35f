//! Batch front-end for the calculators: every subcommand reads JSON (inline
//! arguments or a file), writes JSON (or a key/value table) to stdout, and
//! exits 0 on success, 1 on a domain error, 2 on a parse error.

use clap::{Parser, Subcommand, ValueEnum};
use hsi_core::cerf::{normalize, CobWord};
use hsi_core::corresp::{compose, lens_intersection, Correspondence};
use hsi_core::homology::{
    euler_hsi, h1_order, kunneth, lens_hsi, plumbing_minimal, qa_verify, s2s1_hsi, GradedGroup,
    Matrix, PlumbingTree, PlumbingVerdict, QACert,
};
use hsi_core::moduli::{flow, glue, unglue, CutModuliPoint, ModuliPoint};
use hsi_core::su2::Su2;
use hsi_core::tol::Tol;
use hsi_core::twist::{
    fiber_intersection, fiber_intersection_clusters, model_twist_inverse, sphere_distance,
    AngleProfile,
};
use hsi_core::words::{evaluate, twist_substitution, StandardCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hsi",
    about = "Holonomy-model calculators for 3-manifold homology families",
    version
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for sampling subcommands (identical seeds give identical output).
    #[arg(long, global = true, env = "HSI_SEED", default_value_t = 0)]
    seed: u64,
    /// Arithmetic tolerance.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol_arith: f64,
    /// Relation-residual tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_rel: f64,
    /// Solver tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_solver: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Rank table of a lens space L(p, q) with a mod-2 class.
    Lens {
        p: u64,
        q: i64,
        #[arg(long, default_value_t = 0)]
        class: u8,
    },
    /// Rank table of the product of a 2-sphere and a circle.
    S2s1 {
        #[arg(long, default_value_t = 0)]
        class: u8,
    },
    /// Graded group of a connected sum; input JSON is a list of summands:
    /// [{"family":"lens","p":2,"q":1,"class":0},{"family":"s2s1","class":0}].
    Connsum { input: PathBuf },
    /// Euler characteristic from a presentation matrix (row-major JSON).
    Euler { input: PathBuf },
    /// Minimality test of a plumbing forest {"weights":[...],"edges":[[a,b],...]}.
    Plumbing { input: PathBuf },
    /// Verifies a quasi-alternating certificate.
    Qa { input: PathBuf },
    /// Normalizes a cobordism word.
    CerfNormalize { input: PathBuf },
    /// Clean-intersection census of the genus-1 family.
    Intersect {
        p: u64,
        q: i64,
        #[arg(allow_negative_numbers = true)]
        eps0: i8,
        #[arg(allow_negative_numbers = true)]
        eps1: i8,
    },
    /// Sampled diagnostics of the twist calculus (flow identities and the
    /// fiber-intersection solver).
    TwistCheck {
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Support radius of the built-in quadratic profile.
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Angle profile JSON file; overrides --lambda.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Composes two correspondence files symbolically.
    Compose { first: PathBuf, second: PathBuf },
}

enum CliError {
    Parse(String),
    Domain(String),
}

impl CliError {
    fn report(&self) -> (&'static str, &String) {
        match self {
            CliError::Parse(m) => ("parse", m),
            CliError::Domain(m) => ("domain", m),
        }
    }
}

fn parse_err(e: impl std::fmt::Display) -> CliError {
    CliError::Parse(e.to_string())
}

fn domain_err(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn group_json(g: &GradedGroup) -> Value {
    let degrees: Vec<Value> = (0..8)
        .map(|d| {
            let part = g.part(d);
            json!({"degree": d, "rank": part.rank, "torsion": part.torsion})
        })
        .collect();
    json!({"total_rank": g.total_rank(), "degrees": degrees})
}

fn run(cli: &Cli) -> Result<Value, CliError> {
    let tol = Tol::new(cli.tol_arith, cli.tol_rel, cli.tol_solver);
    match &cli.command {
        Command::Lens { p, q, class } => {
            if *class != 0 && p % 2 != 0 {
                return Err(CliError::Domain(format!(
                    "lens space with odd p = {p} has no nonzero mod-2 class"
                )));
            }
            let group = lens_hsi(*p, *q, *class).map_err(domain_err)?;
            let eps1 = if *class != 0 { -1 } else { 1 };
            let census = lens_intersection(*p, *q, 1, eps1).map_err(domain_err)?;
            Ok(json!({
                "p": p,
                "q": q,
                "class": class,
                "total_rank": group.total_rank(),
                "single_parity_degrees": *class != 0,
                "census": {
                    "n_central": census.n_central,
                    "n_spheres": census.n_spheres,
                    "perturbed_count": census.perturbed_count,
                },
            }))
        }
        Command::S2s1 { class } => {
            let group = s2s1_hsi(*class);
            Ok(json!({
                "class": class,
                "group": group_json(&group),
                "total_rank": group.total_rank(),
            }))
        }
        Command::Connsum { input } => {
            let summands: Vec<Value> = read_json(input)?;
            let mut acc: Option<GradedGroup> = None;
            for (i, s) in summands.iter().enumerate() {
                let family = s
                    .get("family")
                    .and_then(Value::as_str)
                    .ok_or_else(|| CliError::Parse(format!("summand {i}: missing \"family\"")))?;
                let class = s.get("class").and_then(Value::as_u64).unwrap_or(0) as u8;
                let g = match family {
                    "lens" => {
                        let p = s.get("p").and_then(Value::as_u64).ok_or_else(|| {
                            CliError::Parse(format!("summand {i}: missing \"p\""))
                        })?;
                        let q = s.get("q").and_then(Value::as_i64).ok_or_else(|| {
                            CliError::Parse(format!("summand {i}: missing \"q\""))
                        })?;
                        lens_hsi(p, q, class).map_err(domain_err)?
                    }
                    "s2s1" => s2s1_hsi(class),
                    other => {
                        return Err(CliError::Parse(format!(
                            "summand {i}: unknown family \"{other}\""
                        )))
                    }
                };
                acc = Some(match acc {
                    None => g,
                    Some(prev) => kunneth(&prev, &g),
                });
            }
            let group = acc.ok_or_else(|| CliError::Parse("empty summand list".into()))?;
            Ok(json!({
                "summands": summands.len(),
                "group": group_json(&group),
                "total_rank": group.total_rank(),
            }))
        }
        Command::Euler { input } => {
            let m: Matrix = read_json(input)?;
            let euler = euler_hsi(&m).map_err(domain_err)?;
            let order = h1_order(&m).map_err(domain_err)?;
            Ok(json!({
                "euler": euler,
                "h1_order": match order {
                    hsi_core::homology::H1Order::Finite(n) => json!(n),
                    hsi_core::homology::H1Order::Infinite => json!("infinite"),
                },
            }))
        }
        Command::Plumbing { input } => {
            let tree: PlumbingTree = read_json(input)?;
            match plumbing_minimal(&tree).map_err(domain_err)? {
                PlumbingVerdict::Minimal { h1 } => Ok(json!({"minimal": true, "h1": h1})),
                PlumbingVerdict::NotApplicable { reason } => {
                    Ok(json!({"minimal": false, "reason": reason}))
                }
            }
        }
        Command::Qa { input } => {
            let cert: QACert = read_json(input)?;
            let verdict = qa_verify(&cert);
            Ok(json!({"verified": verdict.verified, "trace": verdict.trace}))
        }
        Command::CerfNormalize { input } => {
            let word: CobWord = read_json(input)?;
            word.validate().map_err(domain_err)?;
            let normalized = normalize(&word);
            serde_json::to_value(&normalized).map_err(parse_err)
        }
        Command::Intersect { p, q, eps0, eps1 } => {
            let census = lens_intersection(*p, *q, *eps0, *eps1).map_err(domain_err)?;
            Ok(json!({
                "n_central": census.n_central,
                "n_spheres": census.n_spheres,
                "perturbed_count": census.perturbed_count,
            }))
        }
        Command::TwistCheck {
            samples,
            lambda,
            profile,
        } => {
            let prof = match profile {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
                    AngleProfile::from_json_str(&text).map_err(parse_err)?
                }
                None => AngleProfile::quadratic(*lambda).map_err(domain_err)?,
            };
            twist_check(*samples, prof, cli.seed, &tol)
        }
        Command::Compose { first, second } => {
            let c1: Correspondence = read_json(first)?;
            let c2: Correspondence = read_json(second)?;
            let composed = compose(&c1, &c2).map_err(domain_err)?;
            serde_json::to_value(&composed).map_err(parse_err)
        }
    }
}

/// Seeded sampling diagnostics over the flow formulas and the model twist.
fn twist_check(
    samples: usize,
    prof: AngleProfile,
    seed: u64,
    tol: &Tol,
) -> Result<Value, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if !prof.is_concave(256) {
        return Err(CliError::Domain(
            "profile is not strictly concave and decreasing on its support".into(),
        ));
    }

    let mut worst_flow: f64 = 0.0;
    let mut worst_twist: f64 = 0.0;
    let subst = twist_substitution(StandardCurve::Beta(0), 1).map_err(domain_err)?;
    let mut done = 0;
    while done < samples {
        let pt = CutModuliPoint::random(1, &mut rng);
        worst_flow = worst_flow.max(flow(&pt, rng.gen_range(-2.0..2.0)).relation_residual());
        let m = ModuliPoint::random(1, &mut rng);
        if m.holonomies().beta(0).dist(Su2::MINUS_IDENTITY) < 1e-3 {
            continue;
        }
        done += 1;
        let twisted =
            glue(&flow(&unglue(&m).map_err(domain_err)?, 1.0), tol).map_err(domain_err)?;
        for (gen, image) in subst.images().iter().enumerate() {
            let expected = evaluate(image, m.holonomies()).map_err(domain_err)?;
            worst_twist = worst_twist.max(twisted.holonomies().holonomies()[gen].dist(expected));
        }
    }

    let mut worst_angle: f64 = 0.0;
    let mut clusters_ok = true;
    let fiber_trials = (samples / 10).max(5);
    let mut trial = 0;
    while trial < fiber_trials {
        let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (ny, nz) = (hsi_core::twist::norm(&y), hsi_core::twist::norm(&z));
        if ny < 1e-2 || nz < 1e-2 {
            continue;
        }
        let y0: Vec<f64> = y.iter().map(|a| a / ny).collect();
        let y1: Vec<f64> = z.iter().map(|a| a / nz).collect();
        let d = sphere_distance(&y0, &y1);
        if d < 0.15 || d > std::f64::consts::PI - 0.15 {
            continue;
        }
        trial += 1;
        let point = fiber_intersection(&y0, &y1, &prof, tol).map_err(domain_err)?;
        let angle = 2.0 * std::f64::consts::PI * prof.r_prime(point.covector_norm());
        worst_angle = worst_angle.max((angle - d).abs());
        let back = model_twist_inverse(&point, &prof);
        worst_angle = worst_angle.max(
            back.v
                .iter()
                .zip(&y0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        );
        clusters_ok &= fiber_intersection_clusters(&y0, &y1, &prof, 400, 0.2, 0.6) == 1;
    }

    let passed = worst_flow < tol.relation
        && worst_twist < tol.relation
        && worst_angle < tol.solver
        && clusters_ok;
    Ok(json!({
        "samples": samples,
        "seed": seed,
        "max_flow_residual": worst_flow,
        "max_twist_defect": worst_twist,
        "max_fiber_defect": worst_angle,
        "unique_intersection": clusters_ok,
        "passed": passed,
    }))
}

fn print_table(value: &Value, indent: usize) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                match v {
                    Value::Object(_) | Value::Array(_) => {
                        println!("{:indent$}{k}:", "", indent = indent);
                        print_table(v, indent + 2);
                    }
                    _ => println!("{:indent$}{k}: {v}", "", indent = indent),
                }
            }
        }
        Value::Array(items) => {
            for v in items {
                match v {
                    Value::Object(_) | Value::Array(_) => {
                        println!("{:indent$}-", "", indent = indent);
                        print_table(v, indent + 2);
                    }
                    _ => println!("{:indent$}- {v}", "", indent = indent),
                }
            }
        }
        _ => println!("{:indent$}{value}", "", indent = indent),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(value) => {
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&value).unwrap()),
                Format::Table => print_table(&value, 0),
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let (kind, message) = err.report();
            eprintln!("error ({kind}): {message}");
            match err {
                CliError::Parse(_) => ExitCode::from(2),
                CliError::Domain(_) => ExitCode::from(1),
            }
        }
    }
}
