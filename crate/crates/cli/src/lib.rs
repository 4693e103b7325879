//! Command implementations behind the `nodal-lab` binary.

pub mod error;
pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nodal_lab::chain::{ChainSummary, CHAIN_SUMMARY_HEADER};
use nodal_lab::experiments::{
    chain_for_pair, concentric_capacity, fit_constants, scaling_fit, scaling_rows, square_in_square_capacity,
    CapacityReport, FitConfig,
};
use nodal_lab::grid::DomainKind;
use nodal_lab::harmonic::{harmonic_measure_with, ObstacleSet, WosOptions};
use nodal_lab::io::{nodal_csv, read_bundle, read_capacity_mask, read_constants, write_bundle, write_constants, SCALING_HEADER};
use nodal_lab::nodal::extract_nodal_domains;
use nodal_lab::poincare::{capacity, CapacityProblem};
use nodal_lab::svg::{loglog_svg, nodal_svg};

pub use error::Failure;

pub const CONSTANTS_ENV: &str = "NODAL_LAB_CONSTANTS";
pub const DEFAULT_CONSTANTS: &str = "constants.json";

#[derive(Debug, Parser)]
#[command(name = "nodal-lab", version, about = "Nodal-domain inner-radius experiments")]
pub struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Constants file (default: $NODAL_LAB_CONSTANTS, then ./constants.json).
    #[arg(long, global = true)]
    pub constants: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lowest Dirichlet eigenpairs of a named domain, written as a bundle.
    Spectrum(SpectrumArgs),
    /// Inner radius against eigenvalue over one or more bundles.
    Scaling(ScalingArgs),
    /// Cube-cover chain report for one eigenfunction.
    Chain(ChainArgs),
    /// Condenser capacity of a concentric or custom configuration.
    Capacity(CapacityArgs),
    /// Harmonic measure of an obstacle at the centre of the unit disk.
    Harmonic(HarmonicArgs),
    /// Nodal domains of one eigenfunction as CSV and SVG.
    Nodal(NodalArgs),
    /// Full acceptance suite against the frozen constants.
    VerifyAll,
    /// Refit every suite constant and write the constants file.
    FitConstants(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Square,
    Rectangle,
    Box,
    Disk,
    Lshape,
    SlitSquare,
    Torus,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, value_enum)]
    pub domain: DomainArg,
    #[arg(long, default_value_t = 65)]
    pub resolution: usize,
    #[arg(long)]
    pub k: usize,
    /// Physical edge length (diameter for the disk).
    #[arg(long, default_value_t = 1.0)]
    pub size: f64,
    /// Long-to-short side ratio of the rectangle.
    #[arg(long, default_value_t = 2.0)]
    pub aspect: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "eig.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long, required = true)]
    pub bundle: Vec<PathBuf>,
    #[arg(long, default_value = "scaling.csv")]
    pub csv: PathBuf,
    #[arg(long, default_value = "scaling.svg")]
    pub svg: PathBuf,
    /// Lower constant `c` in `r ≥ c/√λ` (default: frozen `scaling_c_lower`, else 0.5).
    #[arg(long)]
    pub c_lower: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// 1-based eigenpair index.
    #[arg(long)]
    pub index: usize,
    /// Restrict to one nodal domain.
    #[arg(long)]
    pub domain_id: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the one-row summary CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CapacityShape {
    Annulus,
    SquareInSquare,
    CustomMaskFile,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[arg(long, value_enum)]
    pub shape: CapacityShape,
    #[arg(long = "r", default_value_t = 0.25)]
    pub r: f64,
    #[arg(long = "R", default_value_t = 0.5)]
    pub big_r: f64,
    #[arg(long, default_value_t = 257)]
    pub resolution: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// JSON `{grid, f}` for `custom-mask-file`.
    #[arg(long)]
    pub mask_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObstacleArg {
    Slit,
    Circle,
}

#[derive(Debug, Args)]
pub struct HarmonicArgs {
    #[arg(long, value_enum)]
    pub obstacle: ObstacleArg,
    #[arg(long)]
    pub r0: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct NodalArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub index: usize,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Output path (default: the constants path).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 257)]
    pub resolution: usize,
    #[arg(long, default_value_t = 60)]
    pub scaling_k: usize,
    #[arg(long, default_value_t = 10)]
    pub chain_count: usize,
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Flag, then environment variable, then `./constants.json`.
pub fn constants_path(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONSTANTS_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CONSTANTS))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn domain_kind(arg: DomainArg, aspect: f64) -> DomainKind {
    match arg {
        DomainArg::Square => DomainKind::Square,
        DomainArg::Rectangle => DomainKind::Rectangle { aspect },
        DomainArg::Box => DomainKind::Box,
        DomainArg::Disk => DomainKind::Disk,
        DomainArg::Lshape => DomainKind::LShape,
        DomainArg::SlitSquare => DomainKind::SlitSquare,
        DomainArg::Torus => DomainKind::Torus,
    }
}

fn pick<T>(items: Vec<T>, index: usize) -> Result<T, Failure> {
    let n = items.len();
    if index == 0 || index > n {
        return Err(Failure::Input(format!("index {index} outside 1..={n}")));
    }
    Ok(items.into_iter().nth(index - 1).expect("index checked"))
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let constants = constants_path(cli.constants.as_deref());
    match &cli.command {
        Command::Spectrum(a) => spectrum(a, out),
        Command::Scaling(a) => scaling(a, &constants, out),
        Command::Chain(a) => chain(a, out),
        Command::Capacity(a) => capacity_cmd(a, out),
        Command::Harmonic(a) => harmonic(a, out),
        Command::Nodal(a) => nodal(a, out),
        Command::VerifyAll => {
            let c = read_constants(&constants)?;
            let results = verify::run_all(&c, out)?;
            let failed: Vec<String> = results.iter().filter(|r| !r.pass).map(|r| r.id.to_string()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Falsified { message: format!("criteria {} failed", failed.join(", ")), finding: json(&results) })
            }
        }
        Command::FitConstants(a) => {
            let cfg = FitConfig { resolution: a.resolution, scaling_k: a.scaling_k, chain_count: a.chain_count, samples: a.samples, seed: a.seed };
            let c = fit_constants(&cfg)?;
            let path = a.out.clone().unwrap_or(constants);
            write_constants(&path, &c)?;
            out.write_all(json(&c).as_bytes())?;
            Ok(())
        }
    }
}

fn spectrum(a: &SpectrumArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if a.k == 0 {
        return Err(Failure::Input("--k must be at least 1".into()));
    }
    let d = nodal_lab::grid::build_domain(domain_kind(a.domain, a.aspect), a.resolution, a.size)?;
    let pairs = nodal_lab::eigen::smallest_eigenpairs(&nodal_lab::grid::assemble_laplacian(&d), a.k, a.tol, a.seed)?;
    write_bundle(&a.out, &d, &pairs)?;
    writeln!(out, "index,lambda,residual")?;
    for (i, p) in pairs.iter().enumerate() {
        writeln!(out, "{},{:.12e},{:.3e}", i + 1, p.lambda, p.residual)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScalingOutput {
    rows: usize,
    slope: f64,
    intercept: f64,
    r_min_sqrt_lambda_floor: f64,
    c_lower: f64,
}

fn scaling(a: &ScalingArgs, constants: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let c_lower = match a.c_lower {
        Some(c) => c,
        None => read_constants(constants).ok().and_then(|c| c.get("scaling_c_lower").map(|e| e.value)).unwrap_or(0.5),
    };
    let mut rows = Vec::new();
    for path in &a.bundle {
        let (d, pairs) = read_bundle(path)?;
        rows.extend(scaling_rows(&d, &pairs, 1, c_lower)?);
    }
    let mut csv = format!("{SCALING_HEADER}\n");
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    std::fs::write(&a.csv, csv)?;
    let (slope, intercept) = scaling_fit(&rows);
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.r_min)).collect();
    std::fs::write(&a.svg, loglog_svg(&points, slope, intercept, "min inner radius against eigenvalue", "lambda", "r_min"))?;
    let floor = rows.iter().map(|r| r.r_min_sqrt_lambda).fold(f64::INFINITY, f64::min);
    let report = ScalingOutput { rows: rows.len(), slope, intercept, r_min_sqrt_lambda_floor: floor, c_lower };
    out.write_all(json(&report).as_bytes())?;
    let below: Vec<_> = rows.iter().filter(|r| r.lambda > 0.0 && r.r_min < r.r_bound).collect();
    if below.is_empty() {
        Ok(())
    } else {
        Err(Failure::Falsified {
            message: format!("{} eigenfunctions have r_min < c/sqrt(lambda)", below.len()),
            finding: below.iter().map(|r| r.csv_row()).collect::<Vec<_>>().join("\n"),
        })
    }
}

#[derive(Serialize)]
struct ChainOutput<'a> {
    summary: &'a ChainSummary,
    reports: &'a [nodal_lab::ChainReport],
}

fn chain(a: &ChainArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let (d, pairs) = read_bundle(&a.bundle)?;
    let pair = pick(pairs, a.index)?;
    let (summary, reports) = chain_for_pair(&pair, &d)?;
    let (text, ok) = match a.domain_id {
        Some(id) => {
            let r = reports.get(id).ok_or_else(|| Failure::Input(format!("no nodal domain {id}")))?;
            (json(r), r.all_ok)
        }
        None => (json(&ChainOutput { summary: &summary, reports: &reports }), summary.all_ok),
    };
    match &a.out {
        Some(p) => std::fs::write(p, &text)?,
        None => out.write_all(text.as_bytes())?,
    }
    if let Some(p) = &a.summary {
        std::fs::write(p, format!("{CHAIN_SUMMARY_HEADER}\n{}\n", summary.csv_row()))?;
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Falsified { message: "chain report has failing checks".into(), finding: json(&summary) })
    }
}

fn capacity_cmd(a: &CapacityArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if !(2..=3).contains(&a.dim) {
        return Err(Failure::Input(format!("--dim {} not in {{2, 3}}", a.dim)));
    }
    let report = match a.shape {
        CapacityShape::Annulus => concentric_capacity(a.dim, a.r, a.big_r, a.resolution, a.tol)?,
        CapacityShape::SquareInSquare => square_in_square_capacity(a.dim, a.r, a.big_r, a.resolution, a.tol)?,
        CapacityShape::CustomMaskFile => {
            let path = a.mask_file.as_ref().ok_or_else(|| Failure::Input("custom-mask-file needs --mask-file".into()))?;
            let (g, f, omega) = read_capacity_mask(path)?;
            let sol = capacity(&CapacityProblem::new(g, f, omega)?, a.tol)?;
            CapacityReport { capacity: sol.capacity, closed_form: None, rel_error: None }
        }
    };
    out.write_all(json(&report).as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct HarmonicOutput {
    omega0: f64,
    stderr: f64,
    #[serde(rename = "implied_C")]
    implied_c: f64,
}

fn harmonic(a: &HarmonicArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let e = match a.obstacle {
        ObstacleArg::Slit => ObstacleSet::radial_slit(a.r0)?,
        ObstacleArg::Circle => ObstacleSet::circle(a.r0)?,
    };
    let est = harmonic_measure_with(&e, a.samples, a.seed, &WosOptions { eps: a.eps, ..WosOptions::default() })?;
    let report = HarmonicOutput { omega0: est.omega0, stderr: est.stderr, implied_c: (1.0 - est.omega0) / a.r0.sqrt() };
    out.write_all(json(&report).as_bytes())?;
    if a.obstacle == ObstacleArg::Circle && est.omega0 < 1.0 - 3.0 * est.stderr {
        return Err(Failure::Falsified { message: "a circle around the origin must carry all harmonic measure".into(), finding: json(&report) });
    }
    Ok(())
}

fn nodal(a: &NodalArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let (d, pairs) = read_bundle(&a.bundle)?;
    let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
    let pair = pick(pairs, a.index)?;
    let dec = extract_nodal_domains(&pair.phi, &d)?.with_lambda(pair.lambda);
    let csv = nodal_csv(&dec, &d)?;
    match &a.csv {
        Some(p) => std::fs::write(p, &csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    if let Some(p) = &a.svg {
        std::fs::write(p, nodal_svg(&dec, &d)?)?;
    }
    // Discrete Courant bound: at most k + r − 1 strong nodal domains, r the
    // multiplicity of the eigenvalue among the computed ones.
    let close = |x: f64| (x - pair.lambda).abs() <= 1e-6 * pair.lambda.abs().max(1.0);
    let multiplicity = lambdas.iter().filter(|&&x| close(x)).count().max(1);
    let first = lambdas.iter().position(|&x| close(x)).map_or(a.index, |p| p + 1);
    let bound = first + multiplicity - 1;
    if dec.domain_count() > bound {
        return Err(Failure::Falsified {
            message: format!("{} nodal domains exceed the Courant bound {bound}", dec.domain_count()),
            finding: csv,
        });
    }
    Ok(())
}
