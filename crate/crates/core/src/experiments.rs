//! Reproducible experiment suites composed from the library modules.
//!
//! Everything here is deterministic for a fixed seed: random trials draw from
//! ChaCha8 streams indexed by trial number.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::chain::{exponents, verify_all_domains, ChainError, ChainReport, ChainSummary};
use crate::eigen::{smallest_eigenpairs, EigenError, EigenPair, DEFAULT_TOL};
use crate::grid::{assemble_laplacian, build_domain, BoundaryCondition, DomainKind, GridDomain, GridError};
use crate::harmonic::{beurling_nevanlinna_check, HarmonicError};
use crate::io::{ConstantEntry, Constants};
use crate::nodal::{extract_nodal_domains, inner_radius, inner_radius_of_mask, squared_distance_transform, NodalError};
use crate::poincare::{
    capacity, capacity_volume_lower, linear_fit, mazya_bound, mixed_poincare_beta, poincare_1d, poincare_2d_projection, BetaPoint,
    CapacityProblem, NodeCube, PoincareError,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Nodal(#[from] NodalError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Poincare(#[from] PoincareError),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fully active Dirichlet lattice of `res` nodes per axis over `[0, size]ⁿ`.
pub fn full_grid(dim: usize, res: usize, size: f64) -> Result<GridDomain, GridError> {
    if res < 2 {
        return Err(GridError::InvalidDomain("need at least 2 nodes per axis".into()));
    }
    GridDomain::from_mask(vec![res; dim], size / (res - 1) as f64, vec![true; res.pow(dim as u32)], BoundaryCondition::Dirichlet)
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub domain: GridDomain,
    pub pairs: Vec<EigenPair>,
}

pub fn compute_spectrum(kind: DomainKind, resolution: usize, size: f64, k: usize, seed: u64) -> Result<Spectrum, ExperimentError> {
    if k == 0 {
        return Err(ExperimentError::InvalidArgument("k must be at least 1".into()));
    }
    let domain = build_domain(kind, resolution, size)?;
    let pairs = smallest_eigenpairs(&assemble_laplacian(&domain), k, DEFAULT_TOL, seed)?;
    Ok(Spectrum { domain, pairs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    /// 1-based position in the spectrum.
    pub index: usize,
    pub lambda: f64,
    pub n_domains: usize,
    pub r_min: f64,
    pub r_min_sqrt_lambda: f64,
    pub r_max: f64,
    /// `c / √λ` for the supplied lower constant `c`.
    pub r_bound: f64,
}

impl ScalingRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.12e},{},{:.12e},{:.12e},{:.12e}",
            self.index, self.lambda, self.n_domains, self.r_min, self.r_min_sqrt_lambda, self.r_bound
        )
    }
}

/// Inner radii of all nodal domains for each eigenpair.
pub fn scaling_rows(d: &GridDomain, pairs: &[EigenPair], first_index: usize, c_lower: f64) -> Result<Vec<ScalingRow>, ExperimentError> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let dec = extract_nodal_domains(&p.phi, d)?;
            let mut r_min = f64::INFINITY;
            let mut r_max = 0.0f64;
            for id in 0..dec.domain_count() {
                let r = inner_radius(&dec, id, d)?.radius;
                r_min = r_min.min(r);
                r_max = r_max.max(r);
            }
            let s = p.lambda.max(0.0).sqrt();
            Ok(ScalingRow {
                index: first_index + i,
                lambda: p.lambda,
                n_domains: dec.domain_count(),
                r_min,
                r_min_sqrt_lambda: r_min * s,
                r_max,
                r_bound: if s > 0.0 { c_lower / s } else { f64::INFINITY },
            })
        })
        .collect()
}

/// Slope and intercept of `log r_min` against `log λ` over rows with `λ > 0`.
pub fn scaling_fit(rows: &[ScalingRow]) -> (f64, f64) {
    let (x, y): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.lambda > 0.0 && r.r_min > 0.0).map(|r| (r.lambda.ln(), r.r_min.ln())).unzip();
    linear_fit(&x, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PureMode {
    pub index: usize,
    pub j: usize,
    pub k: usize,
    pub measured: f64,
    /// `π √(j² + k²) / (2 max(j, k))`.
    pub closed_form: f64,
    pub rel_error: f64,
}

/// The simple eigenvalues of the discrete unit square (only `j = k` modes
/// are simple) matched against the closed-form `r√λ`.
pub fn square_pure_modes(d: &GridDomain, rows: &[ScalingRow]) -> Vec<PureMode> {
    let interior = d.shape()[0] - 2;
    let h = d.spacing();
    let f = |j: usize| 4.0 / (h * h) * (j as f64 * PI * h / 2.0).sin().powi(2);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs());
    let mut out = Vec::new();
    for (pos, row) in rows.iter().enumerate() {
        let simple = rows
            .iter()
            .enumerate()
            .all(|(other, r)| other == pos || !close(r.lambda, row.lambda));
        if !simple {
            continue;
        }
        if let Some(j) = (1..=interior).find(|&j| close(2.0 * f(j), row.lambda)) {
            let closed_form = PI * 2f64.sqrt() / 2.0;
            out.push(PureMode {
                index: row.index,
                j,
                k: j,
                measured: row.r_min_sqrt_lambda,
                closed_form,
                rel_error: (row.r_min_sqrt_lambda - closed_form).abs() / closed_form,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyRow {
    pub name: String,
    pub lambda1: f64,
    pub inrad: f64,
    /// `λ₁ · inrad²`.
    pub inrad_product: f64,
    pub area: f64,
    /// `λ₁ · Area`.
    pub fk_product: f64,
}

/// The test shapes: unit square, unit disk, 1×10 rectangle, L-shape and slit square.
pub fn shape_family_kinds() -> Vec<(DomainKind, f64)> {
    vec![
        (DomainKind::Square, 1.0),
        (DomainKind::Disk, 2.0),
        (DomainKind::Rectangle { aspect: 10.0 }, 1.0),
        (DomainKind::LShape, 1.0),
        (DomainKind::SlitSquare, 1.0),
    ]
}

pub fn family_row(kind: DomainKind, resolution: usize, size: f64) -> Result<FamilyRow, ExperimentError> {
    let d = build_domain(kind, resolution, size)?;
    let lambda1 = smallest_eigenpairs(&assemble_laplacian(&d), 1, DEFAULT_TOL, 0)?[0].lambda;
    let inrad = inner_radius_of_mask(&d, d.mask()).radius;
    let area = d.active_count() as f64 * d.cell_volume();
    Ok(FamilyRow { name: kind.name().into(), lambda1, inrad, inrad_product: lambda1 * inrad * inrad, area, fk_product: lambda1 * area })
}

/// Resolution used for a family member: the 1×10 rectangle gets a quarter of
/// the nodes along its short side so that its node count stays comparable.
pub fn family_resolution(kind: DomainKind, resolution: usize) -> usize {
    match kind {
        DomainKind::Rectangle { .. } => ((resolution - 1) / 4 + 1).max(9),
        _ => resolution,
    }
}

pub fn shape_family(resolution: usize) -> Result<Vec<FamilyRow>, ExperimentError> {
    shape_family_kinds().into_iter().map(|(k, s)| family_row(k, family_resolution(k, resolution), s)).collect()
}

/// Chain verification over every nodal domain of one eigenpair.
pub fn chain_for_pair(pair: &EigenPair, d: &GridDomain) -> Result<(ChainSummary, Vec<ChainReport>), ExperimentError> {
    let dec = extract_nodal_domains(&pair.phi, d)?.with_lambda(pair.lambda);
    let reports = verify_all_domains(pair, &dec, d)?;
    Ok((ChainSummary::from_reports(pair.lambda, &reports), reports))
}

/// Connected monotone staircase of vanishing nodes whose projection on the
/// second axis covers `⌈γ m⌉` rows of an `m × m` block.
pub fn random_staircase(rng: &mut impl Rng, m: usize, gamma: f64) -> Vec<bool> {
    let need = ((gamma * m as f64).ceil() as usize).clamp(1, m);
    let mut i = rng.random_range(0..m);
    let mut j = rng.random_range(0..=m - need);
    let start = j;
    let mut vanish = vec![false; m * m];
    vanish[i * m + j] = true;
    while j + 1 - start < need {
        if rng.random_bool(0.5) && i + 1 < m {
            i += 1;
        } else {
            j += 1;
        }
        vanish[i * m + j] = true;
    }
    vanish
}

/// Test-function families for inequalities over functions vanishing on a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FunctionFamily {
    /// Scaled distance-to-set ramp.
    Ramp,
    /// Random tensor tents times a distance cut-off.
    BilinearBumps,
    /// Neumann eigenfunctions of the block times a distance cut-off.
    EigenRestriction,
}

pub const FAMILIES: [FunctionFamily; 3] = [FunctionFamily::Ramp, FunctionFamily::BilinearBumps, FunctionFamily::EigenRestriction];

/// Random function on an `m × m` block (row-major) vanishing exactly on `vanish`.
pub fn random_vanishing_function(rng: &mut impl Rng, m: usize, vanish: &[bool], family: FunctionFamily) -> Vec<f64> {
    let dist: Vec<f64> = squared_distance_transform(&[m, m], vanish, false).into_iter().map(f64::sqrt).collect();
    let delta = rng.random_range(1.0..(m as f64 / 2.0).max(1.5));
    let cutoff = |k: usize| (dist[k] / delta).min(1.0);
    let xy = |k: usize| ((k / m) as f64 / (m - 1) as f64, (k % m) as f64 / (m - 1) as f64);
    let mut u: Vec<f64> = match family {
        FunctionFamily::Ramp => {
            let amp = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (0..m * m).map(|k| amp * cutoff(k)).collect()
        }
        FunctionFamily::BilinearBumps => {
            let base = rng.random_range(-1.0..1.0);
            let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.05..0.5), rng.random_range(-2.0..2.0)))
                .collect();
            (0..m * m)
                .map(|k| {
                    let (x, y) = xy(k);
                    let v = base
                        + bumps
                            .iter()
                            .map(|&(cx, cy, w, c)| c * (1.0 - (x - cx).abs() / w).max(0.0) * (1.0 - (y - cy).abs() / w).max(0.0))
                            .sum::<f64>();
                    v * cutoff(k)
                })
                .collect()
        }
        FunctionFamily::EigenRestriction => {
            let (j, l) = (rng.random_range(0..4u32), rng.random_range(0..4u32));
            let shift = rng.random_range(-0.5..0.5);
            (0..m * m)
                .map(|k| {
                    let (x, y) = xy(k);
                    ((j as f64 * PI * x).cos() * (l as f64 * PI * y).cos() + shift) * cutoff(k)
                })
                .collect()
        }
    };
    for (v, &z) in u.iter_mut().zip(vanish) {
        if z {
            *v = 0.0;
        }
    }
    u
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSuite {
    pub trials: usize,
    pub gamma: f64,
    /// Trials violating the final bound with constant `2/γ + 2`.
    pub falsified: usize,
    /// Trials violating one of the intermediate inequalities.
    pub intermediate_failures: usize,
    pub c_required_max: f64,
    pub c_tracked: f64,
}

pub fn projection_suite(trials: usize, m: usize, gamma: f64, seed: u64) -> Result<ProjectionSuite, ExperimentError> {
    if m < 4 {
        return Err(ExperimentError::InvalidArgument("block needs at least 4 nodes per side".into()));
    }
    let spacing = 1.0 / m as f64;
    let mut out = ProjectionSuite { trials, gamma, falsified: 0, intermediate_failures: 0, c_required_max: 0.0, c_tracked: 2.0 / gamma + 2.0 };
    for t in 0..trials {
        let mut rng = rng_for(seed, t as u64);
        let vanish = random_staircase(&mut rng, m, gamma);
        let u = random_vanishing_function(&mut rng, m, &vanish, FAMILIES[t % 3]);
        let r = poincare_2d_projection(&u, m, spacing, gamma, &vanish)?;
        out.falsified += usize::from(!r.final_ok);
        out.intermediate_failures += usize::from(!(r.e_q_ok && r.avg_ok && r.mid_ok));
        out.c_required_max = out.c_required_max.max(r.c_required);
    }
    Ok(out)
}

/// Uniform samples of a random continuous piecewise-linear function on
/// `nodes` grid points, with one knot set to zero. Returns the samples and
/// the zero node.
pub fn random_piecewise_linear(rng: &mut impl Rng, nodes: usize) -> (Vec<f64>, usize) {
    let n_knots = rng.random_range(2..=10usize.min(nodes));
    let mut knots: Vec<usize> = vec![0, nodes - 1];
    while knots.len() < n_knots {
        let k = rng.random_range(0..nodes);
        if !knots.contains(&k) {
            knots.push(k);
        }
    }
    knots.sort_unstable();
    let mut values: Vec<f64> = (0..knots.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let zero = rng.random_range(0..knots.len());
    values[zero] = 0.0;
    let mut u = vec![0.0; nodes];
    for w in 0..knots.len() - 1 {
        let (p, q) = (knots[w], knots[w + 1]);
        for (i, slot) in u.iter_mut().enumerate().take(q + 1).skip(p) {
            let t = (i - p) as f64 / (q - p) as f64;
            *slot = values[w] * (1.0 - t) + values[w + 1] * t;
        }
    }
    u[knots[zero]] = 0.0;
    (u, knots[zero])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaSuite {
    pub trials: usize,
    pub falsified: usize,
    /// Largest `lhs / rhs` seen.
    pub max_ratio: f64,
}

pub fn lemma_1d_suite(trials: usize, seed: u64, rel_tol: f64) -> Result<LemmaSuite, ExperimentError> {
    let mut out = LemmaSuite { trials, falsified: 0, max_ratio: 0.0 };
    for t in 0..trials {
        let mut rng = rng_for(seed, t as u64);
        let nodes = rng.random_range(17..=1025);
        let a = rng.random_range(-2.0..2.0);
        let b = a + rng.random_range(0.1..5.0);
        let (u, z) = random_piecewise_linear(&mut rng, nodes);
        let r = poincare_1d(&u, a, b, z)?;
        out.falsified += usize::from(!r.holds(rel_tol));
        if r.rhs > 0.0 {
            out.max_ratio = out.max_ratio.max(r.lhs / r.rhs);
        }
    }
    Ok(out)
}

pub const BETA_GAMMAS: [f64; 7] = [0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaShape {
    pub n: usize,
    pub m: usize,
    pub points: Vec<BetaPoint>,
    /// Fitted slope of `β` against `log(1/γ)` (2D) or `γ^{−1/3}` (3D).
    pub slope: f64,
    pub intercept: f64,
    /// `1/(4π)` in 2D, `(4π/3)^{1/3}/(4π)` in 3D.
    pub target_slope: f64,
    pub rel_error: f64,
}

pub fn beta_shape_variable(n: usize, gamma: f64) -> f64 {
    if n == 2 {
        (1.0 / gamma).ln()
    } else {
        gamma.powf(-1.0 / 3.0)
    }
}

pub fn beta_shape(n: usize, m: usize) -> Result<BetaShape, ExperimentError> {
    let points = BETA_GAMMAS.iter().map(|&g| mixed_poincare_beta(n, m, g)).collect::<Result<Vec<_>, _>>()?;
    let x: Vec<f64> = points.iter().map(|p| beta_shape_variable(n, p.gamma)).collect();
    let y: Vec<f64> = points.iter().map(|p| p.beta).collect();
    let (slope, intercept) = linear_fit(&x, &y);
    let target_slope = if n == 2 { 1.0 / (4.0 * PI) } else { (4.0 * PI / 3.0f64).cbrt() / (4.0 * PI) };
    Ok(BetaShape { n, m, points, slope, intercept, target_slope, rel_error: (slope - target_slope).abs() / target_slope })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityReport {
    pub capacity: f64,
    pub closed_form: Option<f64>,
    pub rel_error: Option<f64>,
}

impl CapacityReport {
    fn new(capacity: f64, closed_form: Option<f64>) -> Self {
        Self { capacity, closed_form, rel_error: closed_form.map(|c| (capacity - c).abs() / c) }
    }
}

/// Concentric balls of radii `r < R` on a lattice covering `[0, 2R]ⁿ`.
pub fn concentric_capacity(dim: usize, r: f64, big_r: f64, resolution: usize, tol: f64) -> Result<CapacityReport, ExperimentError> {
    let g = full_grid(dim, resolution, 2.0 * big_r)?;
    let cap = capacity(&CapacityProblem::concentric(g, r, big_r)?, tol)?.capacity;
    let closed = if dim == 2 { 2.0 * PI / (big_r / r).ln() } else { 4.0 * PI / (1.0 / r - 1.0 / big_r) };
    Ok(CapacityReport::new(cap, Some(closed)))
}

/// Concentric squares (cubes) of half-widths `r < R`; no closed form.
pub fn square_in_square_capacity(dim: usize, r: f64, big_r: f64, resolution: usize, tol: f64) -> Result<CapacityReport, ExperimentError> {
    let g = full_grid(dim, resolution, 2.0 * big_r)?;
    Ok(CapacityReport::new(capacity(&CapacityProblem::square_in_square(g, r, big_r)?, tol)?.capacity, None))
}

/// Minimum over shapes (disk/ball, square/cube, L-shaped `F`) of the capacity
/// to volume-bound ratio.
pub fn capacity_volume_family(dim: usize, resolution: usize) -> Result<f64, ExperimentError> {
    let g = full_grid(dim, resolution, 1.0)?;
    let mut problems = Vec::new();
    for (r, big_r) in [(0.05, 0.45), (0.1, 0.45), (0.2, 0.4)] {
        problems.push(CapacityProblem::concentric(g.clone(), r, big_r)?);
        problems.push(CapacityProblem::square_in_square(g.clone(), r, big_r)?);
    }
    // L-shaped F: a square minus its upper quadrant, inside a centred ball.
    let c = 0.5;
    let f: Vec<bool> = (0..g.node_count())
        .map(|n| {
            let p = g.position(n);
            let inside = (0..dim).all(|a| (p[a] - c).abs() <= 0.15);
            inside && !(p[0] > c && p[1] > c)
        })
        .collect();
    let omega: Vec<bool> = (0..g.node_count())
        .map(|n| {
            let p = g.position(n);
            (0..dim).map(|a| (p[a] - c).powi(2)).sum::<f64>().sqrt() < 0.45
        })
        .collect();
    problems.push(CapacityProblem::new(g, f, omega)?);
    let mut best = f64::INFINITY;
    for p in &problems {
        best = best.min(capacity_volume_lower(p)?.ratio);
    }
    Ok(best)
}

/// Largest `C₁` required over random functions vanishing on a disk in the
/// middle of a cube `Q` whose double fits on the grid.
pub fn mazya_suite(trials: usize, seed: u64) -> Result<f64, ExperimentError> {
    let g = full_grid(2, 65, 1.0)?;
    let q = NodeCube { origin: vec![16, 16], side: 32 };
    let centre = g.position(g.node_at(&[32, 32]));
    let mut worst = 0.0f64;
    for t in 0..trials {
        let mut rng = rng_for(seed, t as u64);
        let rho = rng.random_range(0.02..0.2);
        let f: Vec<bool> = (0..g.node_count())
            .map(|n| {
                let p = g.position(n);
                (p[0] - centre[0]).hypot(p[1] - centre[1]) <= rho
            })
            .collect();
        let u = random_vanishing_function(&mut rng, 65, &f, FAMILIES[t % 3]);
        worst = worst.max(mazya_bound(&g, &f, &q, &u)?.c_required);
    }
    Ok(worst)
}

/// Slit starting radii used for the Beurling–Nevanlinna sweep.
pub const SLIT_R0: [f64; 5] = [0.4, 0.2, 0.1, 0.05, 0.025];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig {
    pub resolution: usize,
    pub scaling_k: usize,
    pub chain_count: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { resolution: 257, scaling_k: 60, chain_count: 10, samples: 200_000, seed: 0 }
    }
}

fn entry(c: &mut Constants, name: &str, value: f64, note: String) {
    c.insert(name.into(), ConstantEntry { value, note });
}

/// Fits every suite constant (extremal empirical values) with provenance notes.
pub fn fit_constants(cfg: &FitConfig) -> Result<Constants, ExperimentError> {
    let mut c = Constants::new();
    let res = cfg.resolution;

    let family = shape_family(res)?;
    let names: Vec<&str> = family.iter().map(|f| f.name.as_str()).collect();
    let worst = family.iter().map(|f| f.inrad_product).fold(0.0, f64::max);
    entry(&mut c, "inrad_upper", worst, format!("max lambda1*inrad^2 over {names:?} at resolution {res}"));
    let fk = family.iter().map(|f| f.fk_product).fold(f64::INFINITY, f64::min);
    entry(&mut c, "faber_krahn_min", fk, format!("min lambda1*area over {names:?} at resolution {res}"));

    let mut rows = Vec::new();
    let mut c_gamma = f64::INFINITY;
    let mut beta_max = 0.0f64;
    for (kind, size) in [(DomainKind::Square, 1.0), (DomainKind::Disk, 2.0)] {
        let spec = compute_spectrum(kind, res, size, cfg.scaling_k, cfg.seed)?;
        rows.extend(scaling_rows(&spec.domain, &spec.pairs, 1, 0.0)?);
        for pair in spec.pairs.iter().filter(|p| p.lambda > 1.0).take(cfg.chain_count) {
            let (summary, _) = chain_for_pair(pair, &spec.domain)?;
            beta_max = beta_max.max(summary.beta_max);
            let e = exponents(2)?;
            c_gamma = c_gamma.min(summary.gamma_min * pair.lambda.powf(e.alpha) * pair.lambda.ln().powi(8));
        }
    }
    let kinds = format!("square and unit disk, first {} modes each, resolution {res}", cfg.scaling_k);
    let floor = rows.iter().map(|r| r.r_min_sqrt_lambda).fold(f64::INFINITY, f64::min);
    let ceil = rows.iter().map(|r| r.r_max * r.lambda.sqrt()).fold(0.0, f64::max);
    entry(&mut c, "scaling_c_lower", floor, format!("min r_min*sqrt(lambda); {kinds}"));
    entry(&mut c, "scaling_c_upper", ceil, format!("max r_max*sqrt(lambda); {kinds}"));
    entry(&mut c, "scaling_slope", scaling_fit(&rows).0, format!("log-log slope of r_min against lambda; {kinds}"));
    entry(&mut c, "chain_beta_max", beta_max, format!("max per-cube beta over chain runs; first {} modes with lambda > 1 of each shape", cfg.chain_count));
    entry(&mut c, "gamma_envelope_c", c_gamma, "min gamma_min*lambda^alpha*(log lambda)^(4n) over the same chain runs".into());

    let b2 = beta_shape(2, 256)?;
    let b3 = beta_shape(3, 32)?;
    entry(&mut c, "beta_slope_2d", b2.slope, "slope of beta against log(1/gamma), 2D mixed problem, m = 256".into());
    entry(&mut c, "beta_slope_3d", b3.slope, "slope of beta against gamma^(-1/3), 3D mixed problem, m = 32".into());

    let proj = projection_suite(100, 64, 0.25, cfg.seed)?;
    entry(&mut c, "projection_c_required_max", proj.c_required_max, "max required constant over 100 projection trials, gamma = 1/4, m = 64".into());
    entry(&mut c, "mazya_c1", mazya_suite(30, cfg.seed)?, "max required C1 over 30 random functions vanishing on a disk, grid 65".into());
    entry(&mut c, "capacity_volume_c2", capacity_volume_family(2, 129)?, "min cap/(1/log(vol ratio)) over disks, squares, L-shape; 2D grid 129".into());
    entry(&mut c, "capacity_volume_c3", capacity_volume_family(3, 41)?, "min cap/vol(F)^(1/3) over balls, cubes, L-shape; 3D grid 41".into());

    let table = beurling_nevanlinna_check(&SLIT_R0, cfg.samples, cfg.seed)?;
    let cs: Vec<f64> = table.rows.iter().map(|r| r.implied_c).collect();
    let note = format!("implied (1 - omega(0))/sqrt(r0) over slits r0 in {SLIT_R0:?}, {} samples", cfg.samples);
    entry(&mut c, "beurling_c_min", cs.iter().cloned().fold(f64::INFINITY, f64::min), note.clone());
    entry(&mut c, "beurling_c_max", cs.iter().cloned().fold(0.0, f64::max), note);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_linear_generator_is_exact() {
        let mut rng = rng_for(3, 0);
        for _ in 0..50 {
            let n = rng.random_range(17..200);
            let (u, z) = random_piecewise_linear(&mut rng, n);
            assert_eq!(u.len(), n);
            assert_eq!(u[z], 0.0);
            assert!(u.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn lemma_suite_small() {
        let s = lemma_1d_suite(200, 1, 1e-6).unwrap();
        assert_eq!(s.falsified, 0);
        assert!(s.max_ratio > 0.0 && s.max_ratio <= 1.0);
    }

    #[test]
    fn staircase_projection_and_families() {
        let mut rng = rng_for(9, 0);
        for t in 0..30 {
            let v = random_staircase(&mut rng, 32, 0.25);
            let cols: std::collections::BTreeSet<usize> = (0..32 * 32).filter(|&k| v[k]).map(|k| k % 32).collect();
            assert!(cols.len() >= 8);
            let u = random_vanishing_function(&mut rng, 32, &v, FAMILIES[t % 3]);
            assert!((0..32 * 32).all(|k| !v[k] || u[k] == 0.0));
            assert!(u.iter().any(|&x| x != 0.0));
        }
    }

    #[test]
    fn projection_suite_small() {
        let s = projection_suite(12, 32, 0.25, 0).unwrap();
        assert_eq!((s.falsified, s.intermediate_failures), (0, 0));
        assert!(s.c_required_max <= s.c_tracked);
        assert_eq!(s, projection_suite(12, 32, 0.25, 0).unwrap());
    }

    #[test]
    fn scaling_rows_on_square_modes() {
        let spec = compute_spectrum(DomainKind::Square, 65, 1.0, 8, 0).unwrap();
        let rows = scaling_rows(&spec.domain, &spec.pairs, 1, 0.5).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].n_domains, 1);
        let pure = square_pure_modes(&spec.domain, &rows);
        // (1,1) and (2,2) are the simple eigenvalues among the first 8.
        assert_eq!(pure.iter().map(|p| p.j).collect::<Vec<_>>(), vec![1, 2]);
        for p in &pure {
            assert!(p.rel_error < 0.1, "{p:?}");
        }
        assert_eq!(rows[0].csv_row().split(',').count(), 6);
        assert!(compute_spectrum(DomainKind::Square, 65, 1.0, 0, 0).is_err());
    }

    #[test]
    fn concentric_capacities() {
        let a = concentric_capacity(2, 0.25, 0.5, 129, 1e-10).unwrap();
        assert!(a.rel_error.unwrap() < 0.05);
        let s = square_in_square_capacity(2, 0.25, 0.5, 65, 1e-10).unwrap();
        assert!(s.closed_form.is_none() && s.capacity > a.capacity);
    }

    #[test]
    fn beta_shape_small() {
        let b = beta_shape(2, 32).unwrap();
        assert!(b.slope > 0.0);
        assert!(b.points.windows(2).all(|w| w[1].beta > w[0].beta));
    }
}
