//! Structured-grid domains and the discrete Laplace–Beltrami operator.
//!
//! A [`GridDomain`] is a uniform lattice in two or three dimensions with a
//! boolean mask selecting the active (interior) nodes. Dirichlet conditions are
//! realized by removing nodes: couplings to inactive or off-grid neighbours are
//! dropped while the diagonal keeps the full stencil degree. Periodic domains
//! wrap every axis and carry no boundary at all.
//!
//! In two dimensions a positive conformal factor `q` may be attached; the metric
//! is then `q |dz|^2` and the Laplacian is `q^{-1} Δ_e`, which is symmetrized by
//! putting `q · spacing^2` on the mass diagonal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel for "not an active node" in the node → active-index map.
pub const INACTIVE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("dimension mismatch: expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Periodic,
}

/// Named domain shapes understood by [`build_domain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    /// `[0, L]^2`, boundary nodes removed.
    Square,
    /// `[0, aspect·L] × [0, L]`; the resolution counts nodes along the short side.
    Rectangle { aspect: f64 },
    /// `[0, L]^3`, boundary nodes removed.
    Box,
    /// Disk of diameter `L`; nodes with centre distance `< L/2` are active.
    Disk,
    /// `[0, L]^2` minus the closed upper-right quadrant.
    LShape,
    /// `[0, L]^2` with a slit along the horizontal midline from the left edge to the centre.
    SlitSquare,
    /// Flat torus `(R / L Z)^2`.
    Torus,
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::Square => "square",
            DomainKind::Rectangle { .. } => "rectangle",
            DomainKind::Box => "box",
            DomainKind::Disk => "disk",
            DomainKind::LShape => "lshape",
            DomainKind::SlitSquare => "slit-square",
            DomainKind::Torus => "torus",
        }
    }
}

/// One neighbour of a grid node along an axis direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Node(usize),
    OffGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    dim: usize,
    shape: Vec<usize>,
    spacing: f64,
    mask: Vec<bool>,
    conformal: Option<Vec<f64>>,
    q_bounds: (f64, f64),
    boundary: BoundaryCondition,
    active: Vec<usize>,
    index: Vec<u32>,
}

impl GridDomain {
    /// Builds a domain from an explicit mask (row-major, last axis fastest).
    pub fn from_mask(
        shape: Vec<usize>,
        spacing: f64,
        mask: Vec<bool>,
        boundary: BoundaryCondition,
    ) -> Result<Self, GridError> {
        let dim = shape.len();
        if !(2..=3).contains(&dim) {
            return Err(GridError::InvalidDomain(format!("dimension {dim} not in {{2, 3}}")));
        }
        if shape.iter().any(|&n| n == 0) {
            return Err(GridError::InvalidDomain("empty axis".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(GridError::InvalidDomain(format!("spacing {spacing} must be positive")));
        }
        let total: usize = shape.iter().product();
        if mask.len() != total {
            return Err(GridError::DimensionMismatch { expected: total, got: mask.len() });
        }
        if boundary == BoundaryCondition::Periodic {
            if mask.iter().any(|&m| !m) {
                return Err(GridError::InvalidDomain("periodic domains must be fully active".into()));
            }
            if shape.iter().any(|&n| n < 3) {
                return Err(GridError::InvalidDomain("periodic axes need at least 3 nodes".into()));
            }
        }
        let mut active = Vec::new();
        let mut index = vec![INACTIVE; total];
        for (node, &m) in mask.iter().enumerate() {
            if m {
                index[node] = active.len() as u32;
                active.push(node);
            }
        }
        if active.is_empty() {
            return Err(GridError::InvalidDomain("no active nodes".into()));
        }
        Ok(Self {
            dim,
            shape,
            spacing,
            mask,
            conformal: None,
            q_bounds: (1.0, 1.0),
            boundary,
            active,
            index,
        })
    }

    /// Attaches a conformal factor sampled at every grid node (2D only).
    pub fn with_conformal_factor(mut self, q: Vec<f64>) -> Result<Self, GridError> {
        if self.dim != 2 {
            return Err(GridError::InvalidDomain("conformal factor requires dim = 2".into()));
        }
        if q.len() != self.node_count() {
            return Err(GridError::DimensionMismatch { expected: self.node_count(), got: q.len() });
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &node in &self.active {
            let v = q[node];
            if !(v > 0.0 && v.is_finite()) {
                return Err(GridError::InvalidDomain(format!("conformal factor {v} at node {node}")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        self.q_bounds = (lo, hi);
        self.conformal = Some(q);
        Ok(self)
    }

    /// Samples `q(x, y)` at node positions and attaches it.
    pub fn with_conformal_fn(self, q: impl Fn(f64, f64) -> f64) -> Result<Self, GridError> {
        let samples = (0..self.node_count())
            .map(|node| {
                let p = self.position(node);
                q(p[0], p[1])
            })
            .collect();
        self.with_conformal_factor(samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == BoundaryCondition::Periodic
    }

    pub fn conformal_factor(&self) -> Option<&[f64]> {
        self.conformal.as_deref()
    }

    /// `(q_-, q_+)` over active nodes; `(1, 1)` for the Euclidean metric.
    pub fn q_bounds(&self) -> (f64, f64) {
        self.q_bounds
    }

    pub fn node_count(&self) -> usize {
        self.mask.len()
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// Active index → grid node.
    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    /// Grid node → active index.
    pub fn active_index(&self, node: usize) -> Option<usize> {
        match self.index[node] {
            INACTIVE => None,
            i => Some(i as usize),
        }
    }

    pub fn is_active(&self, node: usize) -> bool {
        self.mask[node]
    }

    /// Conformal factor at a node (1 for the Euclidean metric).
    pub fn q_at(&self, node: usize) -> f64 {
        self.conformal.as_ref().map_or(1.0, |q| q[node])
    }

    /// Volume element carried by one node.
    pub fn node_volume(&self, node: usize) -> f64 {
        self.q_at(node) * self.spacing.powi(self.dim as i32)
    }

    /// Euclidean volume of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coupling weight of one lattice edge in the stiffness form, `spacing^(dim-2)`.
    pub fn edge_weight(&self) -> f64 {
        self.spacing.powi(self.dim as i32 - 2)
    }

    pub fn total_active_volume(&self) -> f64 {
        self.active.iter().map(|&n| self.node_volume(n)).sum()
    }

    pub fn coords(&self, node: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        let mut rem = node;
        for axis in (0..self.dim).rev() {
            c[axis] = rem % self.shape[axis];
            rem /= self.shape[axis];
        }
        c
    }

    pub fn node_at(&self, coords: &[usize]) -> usize {
        coords[..self.dim]
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&c, &n)| acc * n + c)
    }

    /// Physical position with node 0 at the origin.
    pub fn position(&self, node: usize) -> [f64; 3] {
        let c = self.coords(node);
        [
            c[0] as f64 * self.spacing,
            c[1] as f64 * self.spacing,
            c[2] as f64 * self.spacing,
        ]
    }

    /// Node stride along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..self.dim].iter().product()
    }

    /// Neighbour of `node` one step along `axis` in direction `forward`.
    pub fn neighbor(&self, node: usize, axis: usize, forward: bool) -> Neighbor {
        let c = self.coords(node)[axis];
        let n = self.shape[axis];
        let stride = self.stride(axis);
        if forward {
            if c + 1 < n {
                Neighbor::Node(node + stride)
            } else if self.is_periodic() {
                Neighbor::Node(node + stride - n * stride)
            } else {
                Neighbor::OffGrid
            }
        } else if c > 0 {
            Neighbor::Node(node - stride)
        } else if self.is_periodic() {
            Neighbor::Node(node + (n - 1) * stride)
        } else {
            Neighbor::OffGrid
        }
    }

    /// Calls `f` for each of the `2·dim` stencil neighbours of `node`.
    pub fn for_each_neighbor(&self, node: usize, mut f: impl FnMut(Neighbor)) {
        for axis in 0..self.dim {
            f(self.neighbor(node, axis, false));
            f(self.neighbor(node, axis, true));
        }
    }

    /// Physical extent of the grid along each axis (node span).
    pub fn extent(&self) -> Vec<f64> {
        self.shape
            .iter()
            .map(|&n| {
                if self.is_periodic() {
                    n as f64 * self.spacing
                } else {
                    (n - 1) as f64 * self.spacing
                }
            })
            .collect()
    }
}

fn check_build(resolution: usize, physical_size: f64) -> Result<(), GridError> {
    if resolution < 8 {
        return Err(GridError::InvalidDomain(format!("resolution {resolution} < 8")));
    }
    if !(physical_size > 0.0 && physical_size.is_finite()) {
        return Err(GridError::InvalidDomain(format!("physical size {physical_size} must be positive")));
    }
    Ok(())
}

fn interior_mask(shape: &[usize], keep: impl Fn(&[usize]) -> bool) -> Vec<bool> {
    let total: usize = shape.iter().product();
    let mut mask = vec![false; total];
    let mut c = vec![0usize; shape.len()];
    for (node, m) in mask.iter_mut().enumerate() {
        let mut rem = node;
        for axis in (0..shape.len()).rev() {
            c[axis] = rem % shape[axis];
            rem /= shape[axis];
        }
        let interior = c.iter().zip(shape).all(|(&ci, &n)| ci > 0 && ci + 1 < n);
        *m = interior && keep(&c);
    }
    mask
}

/// Builds one of the named domains.
///
/// `resolution` counts nodes per axis including the (removed) boundary layer,
/// so `Square` with resolution 9 has 7×7 active nodes. `Torus` uses
/// `spacing = L / resolution` and has no boundary.
pub fn build_domain(kind: DomainKind, resolution: usize, physical_size: f64) -> Result<GridDomain, GridError> {
    check_build(resolution, physical_size)?;
    let n = resolution;
    let l = physical_size;
    let s = l / (n - 1) as f64;
    match kind {
        DomainKind::Square => {
            let shape = vec![n, n];
            let mask = interior_mask(&shape, |_| true);
            GridDomain::from_mask(shape, s, mask, BoundaryCondition::Dirichlet)
        }
        DomainKind::Rectangle { aspect } => {
            if !(aspect > 0.0 && aspect.is_finite()) {
                return Err(GridError::InvalidDomain(format!("aspect {aspect} must be positive")));
            }
            let long = ((aspect * (n - 1) as f64).round() as usize + 1).max(3);
            let shape = vec![long, n];
            let mask = interior_mask(&shape, |_| true);
            GridDomain::from_mask(shape, s, mask, BoundaryCondition::Dirichlet)
        }
        DomainKind::Box => {
            let shape = vec![n, n, n];
            let mask = interior_mask(&shape, |_| true);
            GridDomain::from_mask(shape, s, mask, BoundaryCondition::Dirichlet)
        }
        DomainKind::Disk => {
            let shape = vec![n, n];
            let centre = (n - 1) as f64 / 2.0;
            let radius = l / 2.0;
            let mask = interior_mask(&shape, |c| {
                let dx = (c[0] as f64 - centre) * s;
                let dy = (c[1] as f64 - centre) * s;
                (dx * dx + dy * dy).sqrt() < radius
            });
            GridDomain::from_mask(shape, s, mask, BoundaryCondition::Dirichlet)
        }
        DomainKind::LShape => {
            let shape = vec![n, n];
            let half = l / 2.0;
            let mask = interior_mask(&shape, |c| {
                !(c[0] as f64 * s >= half - 1e-12 && c[1] as f64 * s >= half - 1e-12)
            });
            GridDomain::from_mask(shape, s, mask, BoundaryCondition::Dirichlet)
        }
        DomainKind::SlitSquare => {
            let shape = vec![n, n];
            let mid = (n - 1) / 2;
            let mask = interior_mask(&shape, |c| !(c[1] == mid && c[0] <= mid));
            GridDomain::from_mask(shape, s, mask, BoundaryCondition::Dirichlet)
        }
        DomainKind::Torus => {
            let shape = vec![n, n];
            let total = n * n;
            GridDomain::from_mask(shape, l / n as f64, vec![true; total], BoundaryCondition::Periodic)
        }
    }
}

/// Symmetric positive semidefinite operator `A = M^{-1} K` over the active
/// nodes, with `K` the (symmetric) stiffness matrix and `M` a positive diagonal.
///
/// `K` is stored as a diagonal plus compressed off-diagonal rows. `boundary[i]`
/// is the part of `K_ii` that comes from couplings to removed neighbours, so
/// `uᵀ K u = Σ_edges w (u_i - u_j)^2 + Σ_i boundary[i] u_i^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymOp {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    boundary: Vec<f64>,
    mass: Vec<f64>,
}

impl SparseSymOp {
    /// Assembles from an undirected edge list `(i, j, w)` with `w > 0` (each
    /// edge listed once), per-node boundary weights and masses.
    pub fn from_edges(
        n: usize,
        edges: &[(u32, u32, f64)],
        boundary: Vec<f64>,
        mass: Vec<f64>,
    ) -> Result<Self, GridError> {
        if boundary.len() != n {
            return Err(GridError::DimensionMismatch { expected: n, got: boundary.len() });
        }
        if mass.len() != n {
            return Err(GridError::DimensionMismatch { expected: n, got: mass.len() });
        }
        if n == 0 {
            return Err(GridError::InvalidDomain("empty operator".into()));
        }
        if let Some(m) = mass.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
            return Err(GridError::InvalidDomain(format!("mass {m} must be positive")));
        }
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in edges {
            counts[i as usize + 1] += 1;
            counts[j as usize + 1] += 1;
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let mut cols = vec![0u32; row_ptr[n]];
        let mut vals = vec![0.0; row_ptr[n]];
        let mut diag = boundary.clone();
        for &(i, j, w) in edges {
            let (iu, ju) = (i as usize, j as usize);
            cols[fill[iu]] = j;
            vals[fill[iu]] = -w;
            fill[iu] += 1;
            cols[fill[ju]] = i;
            vals[fill[ju]] = -w;
            fill[ju] += 1;
            diag[iu] += w;
            diag[ju] += w;
        }
        // Sort each row by column for a deterministic, cache-friendly layout.
        for r in 0..n {
            let (a, b) = (row_ptr[r], row_ptr[r + 1]);
            let mut row: Vec<(u32, f64)> = cols[a..b].iter().copied().zip(vals[a..b].iter().copied()).collect();
            row.sort_by_key(|e| e.0);
            for (k, (c, v)) in row.into_iter().enumerate() {
                cols[a + k] = c;
                vals[a + k] = v;
            }
        }
        Ok(Self { row_ptr, cols, vals, diag, boundary, mass })
    }

    /// Number of unknowns (active nodes).
    pub fn n_active(&self) -> usize {
        self.diag.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Diagonal of the stiffness matrix `K`.
    pub fn stiffness_diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary
    }

    /// Off-diagonal entries `(j, K_ij)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&c, &v)| (c as usize, v))
    }

    /// Lowest column index present in row `i` (including the diagonal).
    pub(crate) fn first_col(&self, i: usize) -> usize {
        let a = self.row_ptr[i];
        if a < self.row_ptr[i + 1] {
            (self.cols[a] as usize).min(i)
        } else {
            i
        }
    }

    /// Undirected edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_active()).flat_map(move |i| self.row(i).filter(move |&(j, _)| j > i).map(move |(j, v)| (i, j, -v)))
    }

    /// `out = K u`.
    pub fn apply_stiffness(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.n_active() {
            let mut acc = self.diag[i] * u[i];
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for k in a..b {
                acc += self.vals[k] * u[self.cols[k] as usize];
            }
            out[i] = acc;
        }
    }

    /// `out = A u = M^{-1} K u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.apply_stiffness(u, out);
        for (o, m) in out.iter_mut().zip(&self.mass) {
            *o /= m;
        }
    }

    /// Mass inner product `Σ m_i u_i v_i`.
    pub fn mass_dot(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    pub fn mass_norm(&self, u: &[f64]) -> f64 {
        self.mass_dot(u, u).sqrt()
    }

    fn check_len(&self, u: &[f64]) -> Result<(), GridError> {
        if u.len() != self.n_active() {
            return Err(GridError::DimensionMismatch { expected: self.n_active(), got: u.len() });
        }
        Ok(())
    }

    /// Quadratic form `⟨A u, u⟩_mass = uᵀ K u`.
    pub fn dirichlet_energy(&self, u: &[f64]) -> Result<f64, GridError> {
        self.check_len(u)?;
        let mut ku = vec![0.0; u.len()];
        self.apply_stiffness(u, &mut ku);
        Ok(ku.iter().zip(u).map(|(a, b)| a * b).sum::<f64>().max(0.0))
    }

    /// The same quantity summed edge by edge; every term is non-negative.
    pub fn edge_energy(&self, u: &[f64]) -> Result<f64, GridError> {
        self.check_len(u)?;
        let interior: f64 = self.edges().map(|(i, j, w)| w * (u[i] - u[j]).powi(2)).sum();
        let boundary: f64 = self.boundary.iter().zip(u).map(|(w, x)| w * x * x).sum();
        Ok(interior + boundary)
    }
}

/// Assembles the 5-point (2D) or 7-point (3D) operator with the sign
/// convention `A ≈ -Δ_g`.
pub fn assemble_laplacian(d: &GridDomain) -> SparseSymOp {
    let n = d.active_count();
    let w = d.edge_weight();
    let mut edges = Vec::with_capacity(n * d.dim());
    let mut boundary = vec![0.0; n];
    for (i, &node) in d.active_nodes().iter().enumerate() {
        for axis in 0..d.dim() {
            for forward in [false, true] {
                match d.neighbor(node, axis, forward) {
                    Neighbor::Node(m) => match d.active_index(m) {
                        Some(j) if j == i => {}
                        // Each undirected edge once, from its lower endpoint.
                        Some(j) if j > i => edges.push((i as u32, j as u32, w)),
                        Some(_) => {}
                        None => boundary[i] += w,
                    },
                    Neighbor::OffGrid => boundary[i] += w,
                }
            }
        }
    }
    // Periodic axes with exactly two nodes would list an edge twice; the
    // domain constructor rules that out by requiring >= 3 nodes.
    let mass = d.active_nodes().iter().map(|&node| d.node_volume(node)).collect();
    SparseSymOp::from_edges(n, &edges, boundary, mass).expect("grid assembly produces a valid operator")
}

/// `⟨A u, u⟩_mass`, the discrete Dirichlet energy `∫ |∇u|^2`.
pub fn dirichlet_energy(op: &SparseSymOp, u: &[f64]) -> Result<f64, GridError> {
    op.dirichlet_energy(u)
}
