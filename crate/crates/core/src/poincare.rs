//! Discrete capacities and Poincaré-type inequalities for functions that
//! vanish on a prescribed set.

use serde::Serialize;
use thiserror::Error;

use crate::eigen::{smallest_eigenpairs, EigenError};
use crate::grid::{GridDomain, GridError, Neighbor, SparseSymOp};
use crate::linalg::pcg;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoincareError {
    #[error("invalid capacity problem: {0}")]
    InvalidProblem(String),
    #[error("conjugate gradients did not converge: relative residual {relative_residual:.3e} after {iterations} iterations")]
    NonConvergence { iterations: usize, relative_residual: f64 },
    #[error("maximum principle violated: solution range [{min}, {max}]")]
    MaxPrincipleViolated { min: f64, max: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("projection of the vanishing set is {extent} < γ·a = {required}")]
    ProjectionTooSmall { extent: f64, required: f64 },
    #[error("function does not vanish at the given point")]
    NoZeroPoint,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// `u = 1` on `F`, `u = 0` off `Ω`; both are masks over all grid nodes.
/// Only the lattice geometry of `grid` is used, not its active mask.
#[derive(Debug, Clone)]
pub struct CapacityProblem {
    pub grid: GridDomain,
    pub f: Vec<bool>,
    pub omega: Vec<bool>,
}

impl CapacityProblem {
    pub fn new(grid: GridDomain, f: Vec<bool>, omega: Vec<bool>) -> Result<Self, PoincareError> {
        let n = grid.node_count();
        if f.len() != n || omega.len() != n {
            return Err(PoincareError::InvalidProblem("mask sizes differ from the grid".into()));
        }
        if !f.iter().any(|&x| x) {
            return Err(PoincareError::InvalidProblem("F is empty".into()));
        }
        for node in 0..n {
            if !f[node] {
                continue;
            }
            if !omega[node] {
                return Err(PoincareError::InvalidProblem("F is not contained in Omega".into()));
            }
            let mut touches = false;
            grid.for_each_neighbor(node, |nb| match nb {
                Neighbor::Node(m) => touches |= !omega[m],
                Neighbor::OffGrid => touches = true,
            });
            if touches {
                return Err(PoincareError::InvalidProblem("F touches the boundary of Omega".into()));
            }
        }
        Ok(Self { grid, f, omega })
    }

    /// Concentric balls (disks in 2D) of radii `r < big_r` around the grid centre.
    pub fn concentric(grid: GridDomain, r: f64, big_r: f64) -> Result<Self, PoincareError> {
        if !(r > 0.0 && r < big_r) {
            return Err(PoincareError::InvalidProblem(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
        }
        let centre = grid_centre(&grid);
        let dist = |n: usize| distance(&grid.position(n), &centre);
        let f = (0..grid.node_count()).map(|n| dist(n) <= r).collect();
        let omega = (0..grid.node_count()).map(|n| dist(n) < big_r).collect();
        Self::new(grid, f, omega)
    }

    /// Concentric axis-aligned squares (cubes in 3D) of half-widths `r < big_r`.
    pub fn square_in_square(grid: GridDomain, r: f64, big_r: f64) -> Result<Self, PoincareError> {
        if !(r > 0.0 && r < big_r) {
            return Err(PoincareError::InvalidProblem(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
        }
        let centre = grid_centre(&grid);
        let cheb = |n: usize| {
            let p = grid.position(n);
            (0..grid.dim()).map(|a| (p[a] - centre[a]).abs()).fold(0.0, f64::max)
        };
        let f = (0..grid.node_count()).map(|n| cheb(n) <= r + 1e-12).collect();
        let omega = (0..grid.node_count()).map(|n| cheb(n) < big_r - 1e-12).collect();
        Self::new(grid, f, omega)
    }

    pub fn volume_f(&self) -> f64 {
        self.f.iter().filter(|&&x| x).count() as f64 * self.grid.cell_volume()
    }

    pub fn volume_omega(&self) -> f64 {
        self.omega.iter().filter(|&&x| x).count() as f64 * self.grid.cell_volume()
    }
}

fn grid_centre(grid: &GridDomain) -> [f64; 3] {
    let mut c = [0.0; 3];
    for (a, &n) in grid.shape().iter().enumerate() {
        c[a] = (n - 1) as f64 * grid.spacing() / 2.0;
    }
    c
}

fn distance(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacitySolution {
    pub capacity: f64,
    pub iterations: usize,
    pub min_u: f64,
    pub max_u: f64,
    /// Equilibrium potential over all grid nodes.
    #[serde(skip)]
    pub u: Vec<f64>,
}

/// Discrete capacity: the minimum of the edge energy over grid functions equal
/// to 1 on `F` and 0 off `Ω`, found by Jacobi-preconditioned CG.
pub fn capacity(p: &CapacityProblem, tol: f64) -> Result<CapacitySolution, PoincareError> {
    if !(tol > 0.0) {
        return Err(PoincareError::InvalidProblem(format!("tol {tol} must be positive")));
    }
    let g = &p.grid;
    let w = g.edge_weight();
    let mut index = vec![u32::MAX; g.node_count()];
    let mut free = Vec::new();
    for node in 0..g.node_count() {
        if p.omega[node] && !p.f[node] {
            index[node] = free.len() as u32;
            free.push(node);
        }
    }
    let n = free.len();
    let mut edges = Vec::new();
    let mut boundary = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for (i, &node) in free.iter().enumerate() {
        for axis in 0..g.dim() {
            for forward in [false, true] {
                match g.neighbor(node, axis, forward) {
                    Neighbor::Node(m) if index[m] != u32::MAX => {
                        if index[m] as usize > i {
                            edges.push((i as u32, index[m], w));
                        }
                    }
                    Neighbor::Node(m) => {
                        boundary[i] += w;
                        if p.f[m] {
                            rhs[i] += w;
                        }
                    }
                    Neighbor::OffGrid => boundary[i] += w,
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    let mut iterations = 0;
    if n > 0 {
        let op = SparseSymOp::from_edges(n, &edges, boundary, vec![1.0; n])?;
        let stats = pcg(|v, out| op.apply_stiffness(v, out), op.stiffness_diag(), &rhs, &mut x, tol, 50 * n.max(100));
        if !stats.converged {
            return Err(PoincareError::NonConvergence { iterations: stats.iterations, relative_residual: stats.relative_residual });
        }
        iterations = stats.iterations;
    }
    let mut u = vec![0.0; g.node_count()];
    for (node, val) in u.iter_mut().enumerate() {
        if p.f[node] {
            *val = 1.0;
        } else if index[node] != u32::MAX {
            *val = x[index[node] as usize];
        }
    }
    let (min_u, max_u) = x.iter().fold((0.0f64, 1.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let slack = 1e-6;
    if min_u < -slack || max_u > 1.0 + slack {
        return Err(PoincareError::MaxPrincipleViolated { min: min_u, max: max_u });
    }
    let capacity = grid_energy(g, &u, |n| p.omega[n]);
    Ok(CapacitySolution { capacity, iterations, min_u, max_u, u })
}

/// Edge energy of `u` (given on all grid nodes) over edges with at least one
/// endpoint in `region`; values outside `region` and off the grid count as 0.
fn grid_energy(g: &GridDomain, u: &[f64], region: impl Fn(usize) -> bool) -> f64 {
    let w = g.edge_weight();
    let value = |n: usize| if region(n) { u[n] } else { 0.0 };
    let mut e = 0.0;
    for node in 0..g.node_count() {
        let inside = region(node);
        for axis in 0..g.dim() {
            match g.neighbor(node, axis, true) {
                Neighbor::Node(m) if inside || region(m) => e += w * (value(node) - value(m)).powi(2),
                Neighbor::Node(_) => {}
                Neighbor::OffGrid if inside => e += w * u[node] * u[node],
                Neighbor::OffGrid => {}
            }
            if inside && g.neighbor(node, axis, false) == Neighbor::OffGrid {
                e += w * u[node] * u[node];
            }
        }
    }
    e
}

/// An axis-aligned block of `side` nodes per axis starting at `origin`,
/// read as a cube of edge `side · spacing` (one cell per node).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeCube {
    pub origin: Vec<usize>,
    pub side: usize,
}

impl NodeCube {
    pub fn edge(&self, g: &GridDomain) -> f64 {
        self.side as f64 * g.spacing()
    }

    pub fn contains(&self, g: &GridDomain, node: usize) -> bool {
        let c = g.coords(node);
        (0..g.dim()).all(|a| c[a] >= self.origin[a] && c[a] < self.origin[a] + self.side)
    }

    /// The concentric cube with twice the edge, if it fits on the grid.
    pub fn doubled(&self, g: &GridDomain) -> Option<NodeCube> {
        if self.side % 2 != 0 {
            return None;
        }
        let half = self.side / 2;
        let mut origin = Vec::with_capacity(g.dim());
        for a in 0..g.dim() {
            let o = self.origin[a].checked_sub(half)?;
            if o + 2 * self.side > g.shape()[a] {
                return None;
            }
            origin.push(o);
        }
        Some(NodeCube { origin, side: 2 * self.side })
    }

    pub fn mask(&self, g: &GridDomain) -> Vec<bool> {
        (0..g.node_count()).map(|n| self.contains(g, n)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MazyaBound {
    /// `∫_Q u²`.
    pub lhs: f64,
    /// `aⁿ/cap(F, 2Q) · ∫_Q |∇u|²`, i.e. the bound with `C₁ = 1`.
    pub rhs: f64,
    /// Smallest `C₁` for which the bound holds.
    pub c_required: f64,
    pub capacity: f64,
}

/// Both sides of `∫_Q u² ≤ C₁ aⁿ / cap(F, 2Q) ∫_Q |∇u|²` for `u` vanishing on `F`.
/// `u` and `f` are given over all grid nodes; the gradient integral uses the
/// edges with both endpoints in `Q`.
pub fn mazya_bound(g: &GridDomain, f: &[bool], q: &NodeCube, u: &[f64]) -> Result<MazyaBound, PoincareError> {
    if f.len() != g.node_count() || u.len() != g.node_count() {
        return Err(PoincareError::InvalidProblem("mask or function size differs from the grid".into()));
    }
    if (0..g.node_count()).any(|n| f[n] && !q.contains(g, n)) {
        return Err(PoincareError::InvalidProblem("F must lie inside Q".into()));
    }
    if (0..g.node_count()).any(|n| f[n] && u[n] != 0.0) {
        return Err(PoincareError::PreconditionViolation("u does not vanish on F".into()));
    }
    let two_q = q
        .doubled(g)
        .ok_or_else(|| PoincareError::InvalidProblem("the doubled cube 2Q does not fit on the grid".into()))?;
    let problem = CapacityProblem::new(g.clone(), f.to_vec(), two_q.mask(g))?;
    let cap = capacity(&problem, 1e-10)?.capacity;
    let (lhs, grad) = cube_integrals(g, q, u);
    let a_n = q.edge(g).powi(g.dim() as i32);
    let rhs = a_n / cap * grad;
    let c_required = if lhs == 0.0 { 0.0 } else if grad == 0.0 { f64::INFINITY } else { lhs / rhs };
    Ok(MazyaBound { lhs, rhs, c_required, capacity: cap })
}

/// `(∫_Q u², ∫_Q |∇u|²)` with the gradient over edges inside `Q`.
fn cube_integrals(g: &GridDomain, q: &NodeCube, u: &[f64]) -> (f64, f64) {
    let w = g.edge_weight();
    let (mut mass, mut grad) = (0.0, 0.0);
    for node in 0..g.node_count() {
        if !q.contains(g, node) {
            continue;
        }
        mass += u[node] * u[node] * g.cell_volume();
        for axis in 0..g.dim() {
            if let Neighbor::Node(m) = g.neighbor(node, axis, true) {
                if q.contains(g, m) {
                    let d = u[node] - u[m];
                    grad += w * d * d;
                }
            }
        }
    }
    (mass, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityVolume {
    pub cap_measured: f64,
    /// `1/log(Vol(Ω)/Vol(F))` in 2D, `Vol(F)^{(n−2)/n}` for `n ≥ 3` (constant 1).
    pub lower_bound: f64,
    /// `cap / lower_bound`: the largest admissible constant for this pair.
    pub ratio: f64,
}

pub fn capacity_volume_lower(p: &CapacityProblem) -> Result<CapacityVolume, PoincareError> {
    let cap = capacity(p, 1e-10)?.capacity;
    let n = p.grid.dim() as f64;
    let (vf, vo) = (p.volume_f(), p.volume_omega());
    let lower_bound = if p.grid.dim() == 2 { 1.0 / (vo / vf).ln() } else { vf.powf((n - 2.0) / n) };
    Ok(CapacityVolume { cap_measured: cap, lower_bound, ratio: cap / lower_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionPoincare {
    /// `∫_Q u²`.
    pub lhs: f64,
    /// `(2/γ + 2) a² ∫_Q |∇u|²`.
    pub rhs: f64,
    pub c_required: f64,
    /// Measured `|pr(Z)| / a ≥ γ`.
    pub gamma_measured: f64,
    /// `∫_E u² ≤ a² ∫_Q |∇u|²`.
    pub e_q_ok: bool,
    /// `∫_{E_{t₀}} u² ≤ (1/(γa)) ∫_E u²` at the minimizing row.
    pub avg_ok: bool,
    /// `∫_Q u² ≤ 2a ∫_{E_{t₀}} u² + 2a² ∫_Q |∂u|²`.
    pub mid_ok: bool,
    pub final_ok: bool,
}

/// Projection Poincaré on an `m × m` node square (`u[i·m + j]`, one cell of
/// side `spacing` per node, `a = m · spacing`). `vanish[k]` marks nodes where
/// `u` is zero. The edge receiving the projection is chosen as the one with
/// the larger projection of the vanishing set.
pub fn poincare_2d_projection(u: &[f64], m: usize, spacing: f64, gamma: f64, vanish: &[bool]) -> Result<ProjectionPoincare, PoincareError> {
    if u.len() != m * m || vanish.len() != m * m {
        return Err(PoincareError::InvalidProblem(format!("expected {} samples", m * m)));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(PoincareError::InvalidProblem(format!("gamma {gamma} not in (0, 1]")));
    }
    if (0..m * m).any(|k| vanish[k] && u[k] != 0.0) {
        return Err(PoincareError::PreconditionViolation("u does not vanish on the given set".into()));
    }
    // rows_hit[axis][t]: some vanishing node has coordinate t along `axis`.
    let mut hit = [vec![false; m], vec![false; m]];
    for i in 0..m {
        for j in 0..m {
            if vanish[i * m + j] {
                hit[0][i] = true;
                hit[1][j] = true;
            }
        }
    }
    let counts = [hit[0].iter().filter(|&&x| x).count(), hit[1].iter().filter(|&&x| x).count()];
    // `line_axis` is the coordinate that is constant along the lines of E.
    let line_axis = if counts[1] >= counts[0] { 1 } else { 0 };
    let a = m as f64 * spacing;
    let extent = counts[line_axis] as f64 * spacing;
    if extent < gamma * a * (1.0 - 1e-12) {
        return Err(PoincareError::ProjectionTooSmall { extent, required: gamma * a });
    }
    let at = |t: usize, x: usize| if line_axis == 1 { u[x * m + t] } else { u[t * m + x] };
    let s2 = spacing * spacing;
    let mut total = 0.0;
    let mut along = 0.0; // ∫ |∂ along lines|²
    let mut across = 0.0; // ∫ |∂ across lines|²
    for t in 0..m {
        for x in 0..m {
            let v = at(t, x);
            total += v * v * s2;
            if x + 1 < m {
                along += (at(t, x + 1) - v).powi(2);
            }
            if t + 1 < m {
                across += (at(t + 1, x) - v).powi(2);
            }
        }
    }
    let grad = along + across;
    let line_integral = |t: usize| (0..m).map(|x| at(t, x).powi(2)).sum::<f64>() * spacing;
    let e_rows: Vec<usize> = (0..m).filter(|&t| hit[line_axis][t]).collect();
    let int_e: f64 = e_rows.iter().map(|&t| line_integral(t) * spacing).sum();
    let t0 = *e_rows
        .iter()
        .min_by(|&&p, &&q| line_integral(p).total_cmp(&line_integral(q)).then(p.cmp(&q)))
        .expect("nonempty projection");
    let int_t0 = line_integral(t0);
    let rel = 1e-12;
    let e_q_ok = int_e <= a * a * grad * (1.0 + rel) + f64::MIN_POSITIVE;
    let avg_ok = int_t0 <= int_e / (gamma * a) * (1.0 + rel) + f64::MIN_POSITIVE;
    let mid_ok = total <= (2.0 * a * int_t0 + 2.0 * a * a * across) * (1.0 + rel) + f64::MIN_POSITIVE;
    let c = 2.0 / gamma + 2.0;
    let rhs = c * a * a * grad;
    let final_ok = total <= rhs * (1.0 + rel) + f64::MIN_POSITIVE;
    let c_required = if total == 0.0 { 0.0 } else if grad == 0.0 { f64::INFINITY } else { total / (a * a * grad) };
    Ok(ProjectionPoincare {
        lhs: total,
        rhs,
        c_required,
        gamma_measured: extent / a,
        e_q_ok,
        avg_ok,
        mid_ok,
        final_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Poincare1d {
    pub lhs: f64,
    pub rhs: f64,
}

impl Poincare1d {
    /// `lhs ≤ rhs` up to a relative quadrature tolerance.
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + rel_tol) + f64::MIN_POSITIVE
    }
}

/// Trapezoid `∫_a^b u²` against `(b − a)² ∫_a^b u′²` for samples on a uniform
/// grid of `[a, b]` with `u[zero_point] = 0`.
pub fn poincare_1d(u: &[f64], a: f64, b: f64, zero_point: usize) -> Result<Poincare1d, PoincareError> {
    if u.len() < 2 || !(b > a) {
        return Err(PoincareError::InvalidProblem("need at least two samples on a nonempty interval".into()));
    }
    if u.get(zero_point).map_or(true, |&v| v != 0.0) {
        return Err(PoincareError::NoZeroPoint);
    }
    let h = (b - a) / (u.len() - 1) as f64;
    let lhs: f64 = u.windows(2).map(|w| 0.5 * h * (w[0] * w[0] + w[1] * w[1])).sum();
    let deriv: f64 = u.windows(2).map(|w| (w[1] - w[0]).powi(2) / h).sum();
    Ok(Poincare1d { lhs, rhs: (b - a).powi(2) * deriv })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaPoint {
    /// Requested volume fraction.
    pub gamma_target: f64,
    /// Realized `Vol(F)/Vol(Q)`.
    pub gamma: f64,
    /// `1/(a² μ₁)`: the best constant in `∫_Q u² ≤ β a² ∫_Q |∇u|²` over `u` vanishing on `F`.
    pub beta: f64,
    pub mu1: f64,
}

/// Best Poincaré constant on a cube of `m` cells per axis (`m` even) for
/// functions vanishing on the `≈ γ mⁿ` cells nearest the centre.
///
/// The first eigenfunction of the mixed problem (Dirichlet on `F`, Neumann on
/// `∂Q`) is invariant under the reflections of the cube, so it is computed on
/// one orthant with Neumann conditions on the symmetry planes.
pub fn mixed_poincare_beta(n: usize, m: usize, gamma: f64) -> Result<BetaPoint, PoincareError> {
    if !(2..=3).contains(&n) {
        return Err(PoincareError::InvalidProblem(format!("dimension {n} not in {{2, 3}}")));
    }
    if m < 4 || m % 2 != 0 {
        return Err(PoincareError::InvalidProblem(format!("cells per axis {m} must be even and ≥ 4")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(PoincareError::InvalidProblem(format!("gamma {gamma} not in (0, 1)")));
    }
    let k = m / 2;
    let total = k.pow(n as u32);
    let spacing = 1.0 / m as f64;
    let coord = |node: usize| -> [usize; 3] {
        let mut c = [0usize; 3];
        let mut rem = node;
        for a in (0..n).rev() {
            c[a] = rem % k;
            rem /= k;
        }
        c
    };
    let radius2 = |node: usize| -> f64 { coord(node)[..n].iter().map(|&c| (c as f64 + 0.5).powi(2)).sum() };
    let want = ((gamma * (m as f64).powi(n as i32) / (1usize << n) as f64).round() as usize).clamp(1, total - 1);
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&p, &q| radius2(p).total_cmp(&radius2(q)).then(p.cmp(&q)));
    let mut in_f = vec![false; total];
    for &node in order.iter().take(want) {
        in_f[node] = true;
    }
    let mut index = vec![u32::MAX; total];
    let mut free = 0u32;
    for node in 0..total {
        if !in_f[node] {
            index[node] = free;
            free += 1;
        }
    }
    let w = spacing.powi(n as i32 - 2);
    let mut edges = Vec::new();
    let mut boundary = vec![0.0; free as usize];
    for node in 0..total {
        let c = coord(node);
        for a in 0..n {
            if c[a] + 1 >= k {
                continue;
            }
            let stride = k.pow((n - 1 - a) as u32);
            let other = node + stride;
            match (in_f[node], in_f[other]) {
                (false, false) => edges.push((index[node], index[other], w)),
                (false, true) => boundary[index[node] as usize] += w,
                (true, false) => boundary[index[other] as usize] += w,
                (true, true) => {}
            }
        }
    }
    let mass = vec![spacing.powi(n as i32); free as usize];
    let op = SparseSymOp::from_edges(free as usize, &edges, boundary, mass)?;
    let mu1 = smallest_eigenpairs(&op, 1, 1e-9, 0)?[0].lambda;
    Ok(BetaPoint {
        gamma_target: gamma,
        gamma: want as f64 / total as f64,
        beta: 1.0 / mu1,
        mu1,
    })
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryCondition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn plain_grid(dim: usize, res: usize, size: f64) -> GridDomain {
        let shape = vec![res; dim];
        let total = res.pow(dim as u32);
        GridDomain::from_mask(shape, size / (res - 1) as f64, vec![true; total], BoundaryCondition::Dirichlet).unwrap()
    }

    #[test]
    fn annulus_capacity_matches_log_formula() {
        let g = plain_grid(2, 257, 1.0);
        let p = CapacityProblem::concentric(g, 0.25, 0.5).unwrap();
        let sol = capacity(&p, 1e-10).unwrap();
        let exact = 2.0 * PI / 2f64.ln();
        assert!((sol.capacity - exact).abs() / exact < 0.05, "{}", sol.capacity);
        assert!(sol.min_u >= 0.0 && sol.max_u <= 1.0 + 1e-9);
    }

    #[test]
    fn energy_matches_quadratic_form_identity() {
        // At the minimizer, energy = Σ_{free i} rhs_i (1 − u_i): compare with a direct recomputation.
        let g = plain_grid(2, 41, 1.0);
        let p = CapacityProblem::square_in_square(g.clone(), 0.1, 0.4).unwrap();
        let sol = capacity(&p, 1e-12).unwrap();
        let w = g.edge_weight();
        let mut flux = 0.0;
        for n in 0..g.node_count() {
            if !p.f[n] {
                continue;
            }
            g.for_each_neighbor(n, |nb| {
                if let Neighbor::Node(m) = nb {
                    if !p.f[m] {
                        flux += w * (1.0 - sol.u[m]);
                    }
                }
            });
        }
        assert!((flux - sol.capacity).abs() < 1e-8 * sol.capacity);
    }

    #[test]
    fn point_capacity_is_small_and_decreasing() {
        let mut last = f64::INFINITY;
        for res in [17, 33, 65, 129] {
            let g = plain_grid(2, res, 1.0);
            let c = (res - 1) / 2;
            let centre = g.node_at(&[c, c]);
            let f: Vec<bool> = (0..g.node_count()).map(|n| n == centre).collect();
            let omega: Vec<bool> = (0..g.node_count())
                .map(|n| {
                    let q = g.coords(n);
                    q[0] > 0 && q[1] > 0 && q[0] + 1 < res && q[1] + 1 < res
                })
                .collect();
            let cap = capacity(&CapacityProblem::new(g, f, omega).unwrap(), 1e-10).unwrap().capacity;
            assert!(cap > 0.0 && cap < last);
            last = cap;
        }
    }

    #[test]
    fn capacity_monotonicity() {
        let g = plain_grid(2, 65, 1.0);
        let small = CapacityProblem::concentric(g.clone(), 0.1, 0.4).unwrap();
        let big_f = CapacityProblem::concentric(g.clone(), 0.2, 0.4).unwrap();
        let big_omega = CapacityProblem::concentric(g, 0.1, 0.49).unwrap();
        let c0 = capacity(&small, 1e-10).unwrap().capacity;
        assert!(capacity(&big_f, 1e-10).unwrap().capacity >= c0);
        assert!(capacity(&big_omega, 1e-10).unwrap().capacity <= c0);
    }

    #[test]
    fn dilation_invariance_in_two_dimensions() {
        let a = capacity(&CapacityProblem::concentric(plain_grid(2, 129, 1.0), 0.1, 0.4).unwrap(), 1e-10).unwrap().capacity;
        let b = capacity(&CapacityProblem::concentric(plain_grid(2, 129, 2.0), 0.2, 0.8).unwrap(), 1e-10).unwrap().capacity;
        assert!((a - b).abs() / a < 1e-9);
        let c = capacity(&CapacityProblem::concentric(plain_grid(2, 257, 2.0), 0.2, 0.8).unwrap(), 1e-10).unwrap().capacity;
        assert!((a - c).abs() / a < 0.02);
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let g = plain_grid(2, 17, 1.0);
        let n = g.node_count();
        assert!(CapacityProblem::new(g.clone(), vec![false; n], vec![true; n]).is_err());
        // F touching the edge of Omega.
        let f: Vec<bool> = (0..n).map(|k| k == g.node_at(&[1, 5])).collect();
        let omega: Vec<bool> = (0..n).map(|k| g.coords(k)[0] >= 1).collect();
        assert!(CapacityProblem::new(g.clone(), f, omega).is_err());
        assert!(CapacityProblem::concentric(g, 0.5, 0.2).is_err());
    }

    #[test]
    fn capacity_volume_two_dimensional_sharp_family() {
        for (r, big_r) in [(0.05, 0.45), (0.15, 0.45), (0.3, 0.45)] {
            let p = CapacityProblem::concentric(plain_grid(2, 257, 1.0), r, big_r).unwrap();
            let cv = capacity_volume_lower(&p).unwrap();
            // cap · log(R²/r²) = 4π in the continuum.
            assert!((cv.ratio - 4.0 * PI).abs() / (4.0 * PI) < 0.08, "{r}: {}", cv.ratio);
        }
    }

    #[test]
    fn mazya_ramp_matches_quadrature() {
        let g = plain_grid(2, 129, 1.0);
        let q = NodeCube { origin: vec![32, 32], side: 64 };
        let s = g.spacing();
        let strip = 8;
        let f: Vec<bool> = (0..g.node_count())
            .map(|n| q.contains(&g, n) && g.coords(n)[0] < 32 + strip)
            .collect();
        let u: Vec<f64> = (0..g.node_count())
            .map(|n| {
                let c = g.coords(n);
                if q.contains(&g, n) { (c[0] as f64 - (32 + strip - 1) as f64).max(0.0) * s } else { 0.0 }
            })
            .collect();
        let mb = mazya_bound(&g, &f, &q, &u).unwrap();
        let a = q.edge(&g);
        let len = (64 - strip) as f64 * s;
        let lhs = a * len.powi(3) / 3.0;
        let grad = a * len;
        let expect = lhs * mb.capacity / (a * a * grad);
        assert!((mb.c_required - expect).abs() / expect < 0.05, "{} vs {expect}", mb.c_required);
        let zero = mazya_bound(&g, &f, &q, &vec![0.0; g.node_count()]).unwrap();
        assert_eq!(zero.lhs, 0.0);
        assert_eq!(zero.c_required, 0.0);
        let bad: Vec<f64> = vec![1.0; g.node_count()];
        assert!(matches!(mazya_bound(&g, &f, &q, &bad), Err(PoincareError::PreconditionViolation(_))));
    }

    #[test]
    fn projection_poincare_ramp_and_zero() {
        let m = 64;
        let s = 1.0 / m as f64;
        let vanish: Vec<bool> = (0..m * m).map(|k| k / m == 0).collect();
        let u: Vec<f64> = (0..m * m).map(|k| (k / m) as f64 * s).collect();
        let r = poincare_2d_projection(&u, m, s, 1.0, &vanish).unwrap();
        assert!(r.e_q_ok && r.avg_ok && r.mid_ok && r.final_ok);
        assert!(r.c_required <= 4.0);
        assert!((r.c_required - 1.0 / 3.0).abs() < 0.03, "{}", r.c_required);
        let z = poincare_2d_projection(&vec![0.0; m * m], m, s, 1.0, &vanish).unwrap();
        assert!(z.final_ok && z.lhs == 0.0);
        let small: Vec<bool> = (0..m * m).map(|k| k == 0).collect();
        assert!(matches!(
            poincare_2d_projection(&vec![0.0; m * m], m, s, 0.25, &small),
            Err(PoincareError::ProjectionTooSmall { .. })
        ));
    }

    #[test]
    fn projection_poincare_random_staircases() {
        let m = 48;
        let s = 1.0 / m as f64;
        let gamma = 0.25;
        for trial in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(trial);
            let (vanish, u) = random_staircase_function(&mut rng, m, gamma);
            let r = poincare_2d_projection(&u, m, s, gamma, &vanish).unwrap();
            assert!(r.e_q_ok && r.avg_ok && r.mid_ok && r.final_ok, "trial {trial}");
            assert!(r.c_required <= 2.0 / gamma + 2.0);
        }
    }

    pub(crate) fn random_staircase_function(rng: &mut ChaCha8Rng, m: usize, gamma: f64) -> (Vec<bool>, Vec<f64>) {
        let need = (gamma * m as f64).ceil() as usize;
        let mut i = rng.random_range(0..m);
        let mut j = rng.random_range(0..m - need);
        let mut vanish = vec![false; m * m];
        let start_j = j;
        vanish[i * m + j] = true;
        while j + 1 - start_j < need {
            if rng.random_bool(0.5) && i + 1 < m {
                i += 1;
            } else {
                j += 1;
            }
            vanish[i * m + j] = true;
        }
        let coef: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = (0..m * m)
            .map(|k| {
                if vanish[k] {
                    return 0.0;
                }
                let (x, y) = ((k / m) as f64 / m as f64, (k % m) as f64 / m as f64);
                coef[0] + coef[1] * (PI * x).cos() + coef[2] * (PI * y).sin() + coef[3] * (2.0 * PI * x * y).cos()
                    + coef[4] * x + coef[5] * y * y
            })
            .collect();
        (vanish, u)
    }

    #[test]
    fn one_dimensional_lemma_examples() {
        let n = 1025;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let lin: Vec<f64> = xs.clone();
        let r = poincare_1d(&lin, 0.0, 1.0, 0).unwrap();
        assert!((r.lhs - 1.0 / 3.0).abs() < 1e-6 && (r.rhs - 1.0).abs() < 1e-12);
        let r = poincare_1d(&vec![0.0; n], 0.0, 1.0, 3).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        let sine: Vec<f64> = xs.iter().map(|&x| if x == 0.0 { 0.0 } else { (PI * x).sin() }).collect();
        let r = poincare_1d(&sine, 0.0, 1.0, 0).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-5 && (r.rhs - PI * PI / 2.0).abs() < 1e-4);
        assert!(r.holds(1e-6));
        assert_eq!(poincare_1d(&lin, 0.0, 1.0, 5), Err(PoincareError::NoZeroPoint));
    }

    #[test]
    fn mixed_beta_grows_as_the_obstacle_shrinks() {
        let a = mixed_poincare_beta(2, 64, 0.25).unwrap();
        let b = mixed_poincare_beta(2, 64, 1.0 / 64.0).unwrap();
        assert!(b.beta > a.beta);
        assert!((a.gamma - 0.25).abs() < 0.01);
        assert!(mixed_poincare_beta(2, 63, 0.25).is_err());
        assert!(mixed_poincare_beta(4, 8, 0.25).is_err());
    }

    #[test]
    fn mixed_beta_orthant_matches_full_cube() {
        // Full-cube mixed problem assembled directly, same F.
        let m = 16;
        let gamma = 1.0 / 16.0;
        let reduced = mixed_poincare_beta(2, m, gamma).unwrap();
        let s = 1.0 / m as f64;
        let k = m / 2;
        let want = (gamma * (m * m) as f64 / 4.0).round() as usize;
        let r2 = |i: usize, j: usize| (i as f64 + 0.5).powi(2) + (j as f64 + 0.5).powi(2);
        let mut order: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
        order.sort_by(|p, q| r2(p.0, p.1).total_cmp(&r2(q.0, q.1)).then((p.0 * k + p.1).cmp(&(q.0 * k + q.1))));
        let mut in_f = vec![false; m * m];
        for &(i, j) in order.iter().take(want) {
            for (a, b) in [(k + i, k + j), (k - 1 - i, k + j), (k + i, k - 1 - j), (k - 1 - i, k - 1 - j)] {
                in_f[a * m + b] = true;
            }
        }
        let mut index = vec![u32::MAX; m * m];
        let mut free = 0;
        for node in 0..m * m {
            if !in_f[node] {
                index[node] = free;
                free += 1;
            }
        }
        let mut edges = Vec::new();
        let mut boundary = vec![0.0; free as usize];
        for i in 0..m {
            for j in 0..m {
                let node = i * m + j;
                for other in [(i + 1 < m).then(|| node + m), (j + 1 < m).then(|| node + 1)].into_iter().flatten() {
                    match (in_f[node], in_f[other]) {
                        (false, false) => edges.push((index[node], index[other], 1.0)),
                        (false, true) => boundary[index[node] as usize] += 1.0,
                        (true, false) => boundary[index[other] as usize] += 1.0,
                        _ => {}
                    }
                }
            }
        }
        let op = SparseSymOp::from_edges(free as usize, &edges, boundary, vec![s * s; free as usize]).unwrap();
        let mu = smallest_eigenpairs(&op, 1, 1e-10, 0).unwrap()[0].lambda;
        assert!((mu - reduced.mu1).abs() / mu < 1e-8, "{mu} vs {}", reduced.mu1);
    }
}
