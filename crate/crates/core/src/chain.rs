//! The cube-cover argument bounding the inner radius of a nodal domain from
//! below, executed on a computed eigenfunction.
//!
//! A cover of cubes of edge `4h` with `r_e < h < 2 r_e` is laid over the grid.
//! Every inner cube `Q′` must then contain a node outside the nodal domain
//! `U`, so each cube carries a hole on which `φ̃ = χ_U φ` vanishes. This gives
//! a local Poincaré constant per cube, and summing the local inequalities
//! bounds `r_e` from below by `1/(4√(λ β_max))`.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::eigen::{smallest_eigenpairs, EigenError, EigenPair, DEFAULT_TOL};
use crate::grid::{assemble_laplacian, GridDomain, Neighbor};
use crate::nodal::{inner_radius, inner_radius_of_mask, NodalDecomposition, NodalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resolution too coarse: inner radius {r_e} has no grid-aligned h in (r_e, 2 r_e) at spacing {spacing}")]
    ResolutionTooCoarse { r_e: f64, spacing: f64 },
    #[error("unsupported domain: {0}")]
    Unsupported(String),
    #[error("hole is empty")]
    EmptyHole,
    #[error(transparent)]
    Nodal(#[from] NodalError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub k: f64,
    pub alpha: f64,
}

/// `k(n) = n² − 15n/8 + 1/4` and `α(n) = 2n² + n/4`.
pub fn exponents(n: usize) -> Result<Exponents, ChainError> {
    if n < 2 {
        return Err(ChainError::InvalidArgument(format!("dimension {n} < 2")));
    }
    let n = n as f64;
    Ok(Exponents { k: n * n - 15.0 * n / 8.0 + 0.25, alpha: 2.0 * n * n + n / 4.0 })
}

/// `C₂ log(1/γ)` for `n = 2`, `Cₙ γ^{−(n−2)/n}` for `n ≥ 3`.
pub fn beta_of_gamma(gamma: f64, n: usize, c2d: f64, cnd: f64) -> Result<f64, ChainError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ChainError::InvalidArgument(format!("gamma {gamma} not in (0, 1)")));
    }
    if n < 2 {
        return Err(ChainError::InvalidArgument(format!("dimension {n} < 2")));
    }
    if !(c2d > 0.0 && cnd > 0.0) {
        return Err(ChainError::InvalidArgument("constants must be positive".into()));
    }
    Ok(if n == 2 {
        c2d * (1.0 / gamma).ln()
    } else {
        cnd / gamma.powf((n as f64 - 2.0) / n as f64)
    })
}

/// Lower envelope `C / (λ^α (log λ)^{4n})` for the hole volume ratio.
pub fn gamma_envelope(lambda: f64, n: usize, c: f64) -> Result<f64, ChainError> {
    let e = exponents(n)?;
    if !(lambda > 1.0) {
        return Err(ChainError::InvalidArgument(format!("lambda {lambda} must exceed 1")));
    }
    Ok(c / (lambda.powf(e.alpha) * lambda.ln().powi(4 * n as i32)))
}

/// The connected piece of `Q ∖ U` selected for one cube.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoleRecord {
    pub node_count: usize,
    pub volume: f64,
    /// `Vol_e(hole) / Vol_e(Q)`.
    pub volume_ratio: f64,
    /// Per axis: number of distinct coordinates hit, times spacing.
    pub extents: Vec<f64>,
    pub touches_boundary: bool,
}

impl HoleRecord {
    /// `|pr(hole)|`: the largest projection extent over the axes.
    pub fn max_extent(&self) -> f64 {
        self.extents.iter().cloned().fold(0.0, f64::max)
    }
}

/// Length of the projection of a hole on one axis.
pub fn projection_extent(hole: &HoleRecord, axis: usize) -> Result<f64, ChainError> {
    if hole.node_count == 0 {
        return Err(ChainError::EmptyHole);
    }
    hole.extents
        .get(axis)
        .copied()
        .ok_or_else(|| ChainError::InvalidArgument(format!("axis {axis} out of range")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cube {
    pub index: usize,
    /// Lowest node coordinates.
    pub origin: [usize; 3],
    /// Nodes per axis inside the grid (less than the full edge when clipped).
    pub len: [usize; 3],
    pub clipped: bool,
    /// Whether the inner cube has at least one node on the grid.
    pub inner_on_grid: bool,
    pub hole: Option<HoleRecord>,
    /// The inner cube lies inside the grid and contains no node outside `U`.
    pub step2_violation: bool,
}

impl Cube {
    pub fn node_count(&self, dim: usize) -> usize {
        self.len[..dim].iter().product()
    }

    fn contains(&self, c: &[usize; 3], dim: usize) -> bool {
        (0..dim).all(|a| c[a] >= self.origin[a] && c[a] < self.origin[a] + self.len[a])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeCover {
    pub h: f64,
    /// `h` in grid steps.
    pub h_steps: usize,
    /// Cube edge `4h` in grid steps.
    pub edge_steps: usize,
    /// Cubes per axis.
    pub counts: [usize; 3],
    pub cubes: Vec<Cube>,
    dim: usize,
}

impl CubeCover {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn edge(&self) -> f64 {
        4.0 * self.h
    }

    /// Index of the cube holding a grid node.
    pub fn cube_of(&self, d: &GridDomain, node: usize) -> usize {
        let c = d.coords(node);
        (0..self.dim).fold(0, |acc, a| acc * self.counts[a] + c[a] / self.edge_steps)
    }
}

/// Picks `h` on the grid with `r_e < h < 2 r_e` and tiles the grid with
/// half-open cubes of edge `4h`, starting at node 0 on every axis.
pub fn build_cover(d: &GridDomain, r_e: f64) -> Result<CubeCover, ChainError> {
    if d.is_periodic() {
        return Err(ChainError::Unsupported("cube covers need a Dirichlet grid".into()));
    }
    let s = d.spacing();
    let coarse = ChainError::ResolutionTooCoarse { r_e, spacing: s };
    if !(r_e > s) {
        return Err(coarse);
    }
    let ratio = r_e / s;
    let mut h_steps = ratio.floor() as usize + 1;
    if !((h_steps as f64) < 2.0 * ratio) {
        h_steps = (2.0 * ratio).ceil() as usize - 1;
    }
    if h_steps == 0 || !((h_steps as f64) > ratio && (h_steps as f64) < 2.0 * ratio) {
        return Err(coarse);
    }
    let edge = 4 * h_steps;
    let dim = d.dim();
    let shape = d.shape();
    let mut counts = [1usize; 3];
    for a in 0..dim {
        counts[a] = shape[a].div_ceil(edge);
    }
    let total: usize = counts[..dim].iter().product();
    let mut cubes = Vec::with_capacity(total);
    for index in 0..total {
        let mut rem = index;
        let mut cidx = [0usize; 3];
        for a in (0..dim).rev() {
            cidx[a] = rem % counts[a];
            rem /= counts[a];
        }
        let mut origin = [0usize; 3];
        let mut len = [1usize; 3];
        let mut clipped = false;
        let mut inner_on_grid = true;
        for a in 0..dim {
            origin[a] = cidx[a] * edge;
            len[a] = edge.min(shape[a] - origin[a]);
            clipped |= len[a] < edge;
            inner_on_grid &= origin[a] + h_steps < shape[a];
        }
        cubes.push(Cube { index, origin, len, clipped, inner_on_grid, hole: None, step2_violation: false });
    }
    Ok(CubeCover { h: h_steps as f64 * s, h_steps, edge_steps: edge, counts, cubes, dim })
}

/// Iterates the grid nodes of a box given by origin and per-axis length.
fn box_nodes(d: &GridDomain, origin: &[usize; 3], len: &[usize; 3]) -> Vec<usize> {
    let dim = d.dim();
    let count: usize = len[..dim].iter().product();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rem = i;
        let mut c = [0usize; 3];
        for a in (0..dim).rev() {
            c[a] = origin[a] + rem % len[a];
            rem /= len[a];
        }
        out.push(d.node_at(&c[..dim]));
    }
    out
}

/// Records for every cube the largest connected component of `Q ∖ U` that
/// meets the inner cube `Q′` (the closed node range `[o+h, o+3h]`), and flags
/// cubes whose on-grid inner cube lies entirely in `U`.
pub fn find_holes(mut cover: CubeCover, dec: &NodalDecomposition, domain_id: usize, d: &GridDomain) -> Result<CubeCover, ChainError> {
    let in_u = dec.domain_mask(d, domain_id)?;
    let dim = d.dim();
    let s = d.spacing();
    let h = cover.h_steps;
    let shape = d.shape().to_vec();
    let mut comp = vec![u32::MAX; d.node_count()];
    for cube in cover.cubes.iter_mut() {
        cube.hole = None;
        cube.step2_violation = false;
        if !cube.inner_on_grid {
            continue;
        }
        let mut q_origin = [0usize; 3];
        let mut q_len = [1usize; 3];
        let mut inner_full = true;
        for a in 0..dim {
            q_origin[a] = cube.origin[a] + h;
            let hi = (cube.origin[a] + 3 * h).min(shape[a] - 1);
            inner_full &= cube.origin[a] + 3 * h < shape[a];
            q_len[a] = hi - q_origin[a] + 1;
        }
        let seeds: Vec<usize> = box_nodes(d, &q_origin, &q_len).into_iter().filter(|&n| !in_u[n]).collect();
        if seeds.is_empty() {
            cube.step2_violation = inner_full;
            continue;
        }
        let cube_nodes = box_nodes(d, &cube.origin, &cube.len);
        let tag = cube.index as u32;
        let mut best: Option<Vec<usize>> = None;
        // Component labels are tagged by cube index; `comp` doubles as the visited set.
        for &seed in &seeds {
            if comp[seed] == tag {
                continue;
            }
            comp[seed] = tag;
            let mut nodes = vec![seed];
            let mut queue = VecDeque::from([seed]);
            while let Some(n) = queue.pop_front() {
                d.for_each_neighbor(n, |nb| {
                    if let Neighbor::Node(m) = nb {
                        if comp[m] != tag && !in_u[m] && cube.contains(&d.coords(m), dim) {
                            comp[m] = tag;
                            nodes.push(m);
                            queue.push_back(m);
                        }
                    }
                });
            }
            if best.as_ref().map_or(true, |b| nodes.len() > b.len()) {
                best = Some(nodes);
            }
        }
        let nodes = best.expect("at least one seed");
        let mut seen_coord: Vec<Vec<bool>> = (0..dim).map(|a| vec![false; cube.len[a]]).collect();
        let mut touches = false;
        for &n in &nodes {
            let c = d.coords(n);
            for a in 0..dim {
                let local = c[a] - cube.origin[a];
                seen_coord[a][local] = true;
                touches |= local == 0 || local + 1 == cube.len[a];
            }
        }
        let extents = seen_coord.iter().map(|v| v.iter().filter(|&&x| x).count() as f64 * s).collect();
        let cell = d.cell_volume();
        cube.hole = Some(HoleRecord {
            node_count: nodes.len(),
            volume: nodes.len() as f64 * cell,
            volume_ratio: nodes.len() as f64 / cube_nodes.len() as f64,
            extents,
            touches_boundary: touches,
        });
    }
    Ok(cover)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalPoincare {
    /// `∫_Q φ̃²`.
    pub mass: f64,
    /// `∫_Q |∇φ̃|²` with the face-edge assignment of the cover.
    pub energy: f64,
    /// `mass / (h² energy)`; 0 when `φ̃` vanishes on `Q`, infinite when only the gradient vanishes.
    pub beta: f64,
    pub degenerate: bool,
}

impl LocalPoincare {
    fn from_parts(mass: f64, energy: f64, h: f64) -> Self {
        let (beta, degenerate) = if mass == 0.0 {
            (0.0, false)
        } else if energy == 0.0 {
            (f64::INFINITY, true)
        } else {
            (mass / (h * h * energy), false)
        };
        LocalPoincare { mass, energy, beta, degenerate }
    }
}

/// Per-cube `(mass, energy)` of a grid function `phi_tilde` given over all
/// grid nodes (zero outside the active set). Each edge is charged to the
/// lower-indexed of the two cubes it touches; edges leaving the grid are
/// charged to the cube of their inner node.
fn cube_integrals(cover: &CubeCover, phi_tilde: &[f64], d: &GridDomain) -> Vec<(f64, f64)> {
    let mut acc = vec![(0.0, 0.0); cover.cubes.len()];
    let w = d.edge_weight();
    for node in 0..d.node_count() {
        let v = phi_tilde[node];
        let q = cover.cube_of(d, node);
        if v != 0.0 {
            acc[q].0 += v * v * d.node_volume(node);
        }
        for axis in 0..d.dim() {
            match d.neighbor(node, axis, true) {
                Neighbor::Node(m) => {
                    let diff = v - phi_tilde[m];
                    if diff != 0.0 {
                        let target = q.min(cover.cube_of(d, m));
                        acc[target].1 += w * diff * diff;
                    }
                }
                Neighbor::OffGrid => acc[q].1 += w * v * v,
            }
            if d.neighbor(node, axis, false) == Neighbor::OffGrid {
                acc[q].1 += w * v * v;
            }
        }
    }
    acc
}

/// Smallest `β` with `∫_Q φ̃² ≤ β h² ∫_Q |∇φ̃|²` on one cube of the cover.
pub fn verify_local_poincare(cover: &CubeCover, cube_index: usize, phi_tilde: &[f64], d: &GridDomain) -> Result<LocalPoincare, ChainError> {
    if phi_tilde.len() != d.node_count() {
        return Err(ChainError::InvalidArgument(format!(
            "phi_tilde has {} entries, grid has {}",
            phi_tilde.len(),
            d.node_count()
        )));
    }
    let cube = cover
        .cubes
        .get(cube_index)
        .ok_or_else(|| ChainError::InvalidArgument(format!("no cube {cube_index}")))?;
    let w = d.edge_weight();
    let (mut mass, mut energy) = (0.0, 0.0);
    for node in box_nodes(d, &cube.origin, &cube.len) {
        let v = phi_tilde[node];
        mass += v * v * d.node_volume(node);
        for axis in 0..d.dim() {
            for forward in [true, false] {
                match d.neighbor(node, axis, forward) {
                    Neighbor::OffGrid => energy += w * v * v,
                    Neighbor::Node(m) => {
                        let other = cover.cube_of(d, m);
                        let counted = if other == cube_index { forward } else { cube_index < other };
                        if counted {
                            let diff = v - phi_tilde[m];
                            energy += w * diff * diff;
                        }
                    }
                }
            }
        }
    }
    Ok(LocalPoincare::from_parts(mass, energy, cover.h))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeReport {
    pub index: usize,
    pub origin: Vec<usize>,
    pub clipped: bool,
    pub hole_ratio: Option<f64>,
    pub hole_extent: Option<f64>,
    pub hole_touches_boundary: Option<bool>,
    /// Projection property: extent ≥ h when touching ∂Q, ≥ √Area otherwise.
    pub projection_ok: Option<bool>,
    pub mass: f64,
    pub energy: f64,
    pub beta: f64,
    pub step2_violation: bool,
    pub local_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub lambda: f64,
    pub domain_id: usize,
    pub r_measured: f64,
    pub h: f64,
    pub cubes: Vec<CubeReport>,
    pub beta_max: f64,
    pub gamma_min: f64,
    pub r_bound: f64,
    pub total_mass: f64,
    pub total_energy: f64,
    /// `energy / mass` of `φ̃`; at most `λ` for a nodal domain.
    pub rayleigh: f64,
    pub step2_violations: usize,
    pub local_ok: bool,
    pub global_ok: bool,
    pub final_ok: bool,
    pub projection_ok: bool,
    pub all_ok: bool,
}

/// Runs the cover, hole, local and global steps for one nodal domain of one
/// eigenpair (`dec` must decompose `pair.phi`).
pub fn verify_global_chain(pair: &EigenPair, dec: &NodalDecomposition, domain_id: usize, d: &GridDomain) -> Result<ChainReport, ChainError> {
    if pair.phi.len() != d.active_count() {
        return Err(ChainError::InvalidArgument("eigenvector does not match the grid".into()));
    }
    let lambda = pair.lambda;
    let r = inner_radius(dec, domain_id, d)?.euclidean_radius;
    let cover = build_cover(d, r)?;
    let cover = find_holes(cover, dec, domain_id, d)?;
    let mut phi_tilde = vec![0.0; d.node_count()];
    for &n in &dec.domain(domain_id)?.nodes {
        phi_tilde[n] = pair.phi[d.active_index(n).expect("domain nodes are active")];
    }
    let integrals = cube_integrals(&cover, &phi_tilde, d);
    let locals: Vec<LocalPoincare> = integrals.iter().map(|&(m, e)| LocalPoincare::from_parts(m, e, cover.h)).collect();
    let beta_max = locals.iter().map(|l| l.beta).fold(0.0, f64::max);
    let h = cover.h;
    let tol = 1e-12;
    let mut cubes = Vec::with_capacity(cover.cubes.len());
    let mut gamma_min = f64::INFINITY;
    let mut projection_all = true;
    for (cube, local) in cover.cubes.iter().zip(&locals) {
        let projection_ok = cube.hole.as_ref().map(|hole| {
            let ext = hole.max_extent();
            if hole.touches_boundary {
                ext >= h * (1.0 - tol)
            } else {
                ext >= hole.volume.powf(1.0 / d.dim() as f64) * (1.0 - tol)
            }
        });
        if let Some(hole) = &cube.hole {
            if local.mass > 0.0 {
                gamma_min = gamma_min.min(hole.volume_ratio);
            }
        }
        projection_all &= projection_ok.unwrap_or(true);
        let local_ok = local.mass <= beta_max * h * h * local.energy * (1.0 + tol) + f64::MIN_POSITIVE;
        cubes.push(CubeReport {
            index: cube.index,
            origin: cube.origin[..d.dim()].to_vec(),
            clipped: cube.clipped,
            hole_ratio: cube.hole.as_ref().map(|x| x.volume_ratio),
            hole_extent: cube.hole.as_ref().map(|x| x.max_extent()),
            hole_touches_boundary: cube.hole.as_ref().map(|x| x.touches_boundary),
            projection_ok,
            mass: local.mass,
            energy: local.energy,
            beta: local.beta,
            step2_violation: cube.step2_violation,
            local_ok,
        });
    }
    let total_mass: f64 = integrals.iter().map(|x| x.0).sum();
    let total_energy: f64 = integrals.iter().map(|x| x.1).sum();
    let step2_violations = cover.cubes.iter().filter(|c| c.step2_violation).count();
    let local_ok = cubes.iter().all(|c| c.local_ok);
    let global_ok = total_mass <= 16.0 * beta_max * r * r * total_energy * (1.0 + tol);
    let r_bound = if beta_max > 0.0 && lambda > 0.0 { 1.0 / (4.0 * (lambda * beta_max).sqrt()) } else { 0.0 };
    let final_ok = r >= r_bound;
    let all_ok = step2_violations == 0 && local_ok && global_ok && final_ok && projection_all;
    Ok(ChainReport {
        lambda,
        domain_id,
        r_measured: r,
        h,
        cubes,
        beta_max,
        gamma_min: if gamma_min.is_finite() { gamma_min } else { 1.0 },
        r_bound,
        total_mass,
        total_energy,
        rayleigh: if total_mass > 0.0 { total_energy / total_mass } else { 0.0 },
        step2_violations,
        local_ok,
        global_ok,
        final_ok,
        projection_ok: projection_all,
        all_ok,
    })
}

/// One summary row per eigenfunction, aggregated over all of its nodal domains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub lambda: f64,
    pub n_domains: usize,
    pub r_min: f64,
    pub r_bound: f64,
    pub beta_max: f64,
    pub gamma_min: f64,
    pub all_ok: bool,
}

pub const CHAIN_SUMMARY_HEADER: &str = "lambda,n_domains,r_min,r_bound,beta_max,gamma_min,all_ok";

impl ChainSummary {
    pub fn from_reports(lambda: f64, reports: &[ChainReport]) -> Self {
        let beta_max = reports.iter().map(|r| r.beta_max).fold(0.0, f64::max);
        ChainSummary {
            lambda,
            n_domains: reports.len(),
            r_min: reports.iter().map(|r| r.r_measured).fold(f64::INFINITY, f64::min),
            r_bound: if beta_max > 0.0 { 1.0 / (4.0 * (lambda * beta_max).sqrt()) } else { 0.0 },
            beta_max,
            gamma_min: reports.iter().map(|r| r.gamma_min).fold(1.0, f64::min),
            all_ok: reports.iter().all(|r| r.all_ok),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            self.lambda, self.n_domains, self.r_min, self.r_bound, self.beta_max, self.gamma_min, self.all_ok
        )
    }
}

/// Chain reports for every nodal domain of an eigenpair.
pub fn verify_all_domains(pair: &EigenPair, dec: &NodalDecomposition, d: &GridDomain) -> Result<Vec<ChainReport>, ChainError> {
    (0..dec.domain_count()).map(|id| verify_global_chain(pair, dec, id, d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InradCheck {
    pub lambda1: f64,
    pub inrad: f64,
    pub product: f64,
}

fn first_eigenvalue(d: &GridDomain) -> Result<f64, ChainError> {
    if d.is_periodic() {
        return Err(ChainError::Unsupported("needs a Dirichlet domain".into()));
    }
    let op = assemble_laplacian(d);
    Ok(smallest_eigenpairs(&op, 1, DEFAULT_TOL, 0)?[0].lambda)
}

/// `λ₁ · inrad²` for a Dirichlet domain.
pub fn inrad_upper_check(d: &GridDomain) -> Result<InradCheck, ChainError> {
    let lambda1 = first_eigenvalue(d)?;
    let inrad = inner_radius_of_mask(d, d.mask()).radius;
    Ok(InradCheck { lambda1, inrad, product: lambda1 * inrad * inrad })
}

/// `λ₁ · Vol^{2/n}` for a Euclidean Dirichlet domain.
pub fn faber_krahn_check(d: &GridDomain) -> Result<f64, ChainError> {
    if d.conformal_factor().is_some() {
        return Err(ChainError::Unsupported("needs the Euclidean metric".into()));
    }
    let lambda1 = first_eigenvalue(d)?;
    let vol = d.active_count() as f64 * d.cell_volume();
    Ok(lambda1 * vol.powf(2.0 / d.dim() as f64))
}
