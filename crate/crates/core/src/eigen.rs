//! Smallest eigenpairs of a [`SparseSymOp`] with certified residuals.
//!
//! Small operators are diagonalized densely. Larger ones use block inverse
//! iteration: a block Krylov space of `T = (K + σM)^{-1} M` is grown from a
//! seeded random block, projected onto `K` (Rayleigh–Ritz in the mass inner
//! product) and thick-restarted from the best Ritz vectors when it reaches its
//! size cap. The inner solve is a skyline Cholesky factorization when the
//! profile fits in memory, and Jacobi-preconditioned CG otherwise. Every
//! returned pair carries its explicitly recomputed residual.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::SparseSymOp;
use crate::linalg::{pcg, SkylineCholesky};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 5000;

const DENSE_LIMIT: usize = 600;
const CHOLESKY_MAX_ENTRIES: usize = 40_000_000;
const CHOLESKY_MAX_COST: f64 = 8e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no convergence after {iterations} iterations (worst relative residual {worst_residual:.3e})")]
    NonConvergence { iterations: usize, worst_residual: f64 },
    #[error("zero vector has no Rayleigh quotient")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// An eigenvalue with its mass-normalized eigenvector and residual `‖Aφ − λφ‖_mass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub phi: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub tol: f64,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, seed: 0, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

/// The `k` smallest eigenpairs in ascending order.
pub fn smallest_eigenpairs(op: &SparseSymOp, k: usize, tol: f64, seed: u64) -> Result<Vec<EigenPair>, EigenError> {
    smallest_eigenpairs_with(op, k, &EigenOptions { tol, seed, ..EigenOptions::default() })
}

pub fn smallest_eigenpairs_with(op: &SparseSymOp, k: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>, EigenError> {
    let n = op.n_active();
    if k == 0 || k > n {
        return Err(EigenError::InvalidRequest(format!("k = {k} must be in 1..={n}")));
    }
    if !(opts.tol > 0.0) {
        return Err(EigenError::InvalidRequest(format!("tol = {} must be positive", opts.tol)));
    }
    let mut pairs = if n <= DENSE_LIMIT { dense(op, k) } else { BlockKrylov::new(op, k, opts).run()? };
    for p in &mut pairs {
        orient(&mut p.phi);
        p.residual = residual(op, p.lambda, &p.phi);
    }
    let worst = pairs.iter().map(|p| p.residual / p.lambda.max(1.0)).fold(0.0, f64::max);
    if worst > opts.tol {
        return Err(EigenError::NonConvergence { iterations: 0, worst_residual: worst });
    }
    Ok(pairs)
}

/// `⟨A u, u⟩_mass / ‖u‖²_mass`.
pub fn rayleigh_quotient(op: &SparseSymOp, u: &[f64]) -> Result<f64, EigenError> {
    if u.len() != op.n_active() {
        return Err(EigenError::DimensionMismatch { expected: op.n_active(), got: u.len() });
    }
    let mass = op.mass_dot(u, u);
    if mass == 0.0 {
        return Err(EigenError::ZeroVector);
    }
    let energy = op.dirichlet_energy(u).expect("length checked");
    Ok(energy / mass)
}

/// `‖A φ − λ φ‖_mass`.
pub fn residual(op: &SparseSymOp, lambda: f64, phi: &[f64]) -> f64 {
    let mut ku = vec![0.0; phi.len()];
    op.apply_stiffness(phi, &mut ku);
    ku.iter()
        .zip(phi)
        .zip(op.mass())
        .map(|((k, p), m)| {
            let r = k - lambda * m * p;
            r * r / m
        })
        .sum::<f64>()
        .sqrt()
}

/// Fixes the sign so that the first entry of significant size is positive.
fn orient(phi: &mut [f64]) {
    let max = phi.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if let Some(&v) = phi.iter().find(|v| v.abs() > 1e-3 * max) {
        if v < 0.0 {
            phi.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn normalize(op: &SparseSymOp, phi: &mut [f64]) {
    let nrm = op.mass_norm(phi);
    if nrm > 0.0 {
        phi.iter_mut().for_each(|x| *x /= nrm);
    }
}

fn dense(op: &SparseSymOp, k: usize) -> Vec<EigenPair> {
    let n = op.n_active();
    let sq: Vec<f64> = op.mass().iter().map(|m| m.sqrt()).collect();
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        b[(i, i)] = op.stiffness_diag()[i] / op.mass()[i];
        for (j, v) in op.row(i) {
            b[(i, j)] = v / (sq[i] * sq[j]);
        }
    }
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]).then(a.cmp(&c)));
    order
        .into_iter()
        .take(k)
        .map(|idx| {
            let lambda = eig.eigenvalues[idx].max(0.0);
            let mut phi: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, idx)] / sq[i]).collect();
            normalize(op, &mut phi);
            EigenPair { lambda, phi, residual: 0.0 }
        })
        .collect()
}

enum InnerSolver {
    Cholesky(SkylineCholesky),
    Cg { diag: Vec<f64> },
}

struct BlockKrylov<'a> {
    op: &'a SparseSymOp,
    k: usize,
    nev: usize,
    block: usize,
    max_basis: usize,
    opts: EigenOptions,
    shift: f64,
    solver: InnerSolver,
    basis: Vec<Vec<f64>>,
    gram: Vec<Vec<f64>>,
}

impl<'a> BlockKrylov<'a> {
    fn new(op: &'a SparseSymOp, k: usize, opts: &EigenOptions) -> Self {
        let n = op.n_active();
        let guard = (k / 5).max(3).min(n - k);
        let nev = k + guard;
        let block = nev.min(6);
        let max_basis = (2 * nev + 3 * block).max(nev + 2 * block).min(n);
        let scale = op
            .stiffness_diag()
            .iter()
            .zip(op.mass())
            .map(|(d, m)| d / m)
            .fold(0.0f64, f64::max);
        let shift = 1e-6 * scale;
        let use_cholesky = SkylineCholesky::profile_size(op) <= CHOLESKY_MAX_ENTRIES
            && SkylineCholesky::factor_cost(op) <= CHOLESKY_MAX_COST;
        let solver = use_cholesky
            .then(|| SkylineCholesky::factor(op, shift))
            .flatten()
            .map(InnerSolver::Cholesky)
            .unwrap_or_else(|| InnerSolver::Cg {
                diag: op
                    .stiffness_diag()
                    .iter()
                    .zip(op.mass())
                    .map(|(d, m)| d + shift * m)
                    .collect(),
            });
        Self {
            op,
            k,
            nev,
            block,
            max_basis,
            opts: *opts,
            shift,
            solver,
            basis: Vec::new(),
            gram: Vec::new(),
        }
    }

    /// `w = (K + σM)^{-1} M v` for each column.
    fn apply_inverse(&self, vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let op = self.op;
        let n = op.n_active();
        let rhs: Vec<Vec<f64>> = vs
            .iter()
            .map(|v| v.iter().zip(op.mass()).map(|(x, m)| x * m).collect())
            .collect();
        match &self.solver {
            InnerSolver::Cholesky(chol) => {
                let nrhs = rhs.len();
                let mut inter = vec![0.0; n * nrhs];
                for (c, col) in rhs.iter().enumerate() {
                    for i in 0..n {
                        inter[i * nrhs + c] = col[i];
                    }
                }
                chol.solve_interleaved(&mut inter, nrhs);
                (0..nrhs).map(|c| (0..n).map(|i| inter[i * nrhs + c]).collect()).collect()
            }
            InnerSolver::Cg { diag } => {
                let shift = self.shift;
                let apply = |v: &[f64], out: &mut [f64]| {
                    op.apply_stiffness(v, out);
                    for ((o, m), x) in out.iter_mut().zip(op.mass()).zip(v) {
                        *o += shift * m * x;
                    }
                };
                rhs.iter()
                    .map(|b| {
                        let mut x: Vec<f64> = b.iter().zip(diag).map(|(bi, di)| bi / di).collect();
                        pcg(&apply, diag, b, &mut x, 1e-12, 20 * n.max(1000));
                        x
                    })
                    .collect()
            }
        }
    }

    /// Orthogonalizes candidates against the basis (twice, mass inner
    /// product), appends the independent ones and extends the projected
    /// stiffness matrix. Returns the indices of the appended vectors.
    fn extend(&mut self, candidates: Vec<Vec<f64>>) -> Vec<usize> {
        let op = self.op;
        let mut added = Vec::new();
        for mut c in candidates {
            if self.basis.len() >= self.max_basis {
                break;
            }
            let before = op.mass_norm(&c);
            if before == 0.0 || !before.is_finite() {
                continue;
            }
            let mut after = before;
            for _ in 0..3 {
                let mc: Vec<f64> = c.iter().zip(op.mass()).map(|(x, m)| x * m).collect();
                for v in &self.basis {
                    let coef: f64 = v.iter().zip(&mc).map(|(a, b)| a * b).sum();
                    for (ci, vi) in c.iter_mut().zip(v) {
                        *ci -= coef * vi;
                    }
                }
                let prev = after;
                after = op.mass_norm(&c);
                if after > 0.5 * prev {
                    break;
                }
            }
            if after < 1e-12 * before {
                continue;
            }
            c.iter_mut().for_each(|x| *x /= after);
            let mut kc = vec![0.0; c.len()];
            op.apply_stiffness(&c, &mut kc);
            let mut row: Vec<f64> = self.basis.iter().map(|v| v.iter().zip(&kc).map(|(a, b)| a * b).sum()).collect();
            row.push(c.iter().zip(&kc).map(|(a, b)| a * b).sum());
            for (g, &val) in self.gram.iter_mut().zip(&row) {
                g.push(val);
            }
            self.gram.push(row);
            self.basis.push(c);
            added.push(self.basis.len() - 1);
        }
        added
    }

    fn random_block(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let n = self.op.n_active();
        (0..count).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    /// Rayleigh–Ritz: the `nev` lowest Ritz values with their vectors.
    fn ritz(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let m = self.basis.len();
        let g = DMatrix::from_fn(m, m, |i, j| 0.5 * (self.gram[i][j] + self.gram[j][i]));
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        let take = self.nev.min(m);
        let n = self.op.n_active();
        let mut values = Vec::with_capacity(take);
        let mut vectors = Vec::with_capacity(take);
        for &idx in order.iter().take(take) {
            values.push(eig.eigenvalues[idx]);
            let mut x = vec![0.0; n];
            for (j, v) in self.basis.iter().enumerate() {
                let c = eig.eigenvectors[(j, idx)];
                if c != 0.0 {
                    for (xi, vi) in x.iter_mut().zip(v) {
                        *xi += c * vi;
                    }
                }
            }
            vectors.push(x);
        }
        (values, vectors)
    }

    fn run(mut self) -> Result<Vec<EigenPair>, EigenError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        let start = self.random_block(self.block, &mut rng);
        let start = self.apply_inverse(&start);
        let mut frontier = self.extend(start);
        let mut since_check = 0usize;
        let mut worst = f64::INFINITY;
        let check_every = (self.nev / 2).max(self.block);
        for _ in 0..self.opts.max_iterations {
            let vs: Vec<Vec<f64>> = frontier.iter().map(|&i| self.basis[i].clone()).collect();
            let next = self.apply_inverse(&vs);
            let added = self.extend(next);
            since_check += added.len();
            let full = self.basis.len() + self.block > self.max_basis;
            let ready = self.basis.len() >= self.nev && (since_check >= check_every || full || added.is_empty());
            if !ready {
                if added.is_empty() {
                    // Krylov space exhausted before reaching nev vectors.
                    let extra = self.random_block(self.block, &mut rng);
                    frontier = self.extend(extra);
                } else {
                    frontier = added;
                }
                continue;
            }
            since_check = 0;
            let (values, vectors) = self.ritz();
            let mut unconverged = Vec::new();
            worst = 0.0;
            for (j, (theta, x)) in values.iter().zip(&vectors).enumerate().take(self.k) {
                let rel = residual(self.op, *theta, x) / theta.max(1.0);
                worst = worst.max(rel);
                if rel > 0.5 * self.opts.tol {
                    unconverged.push(j);
                }
            }
            if unconverged.is_empty() {
                return Ok(values
                    .into_iter()
                    .zip(vectors)
                    .take(self.k)
                    .map(|(lambda, mut phi)| {
                        normalize(self.op, &mut phi);
                        EigenPair { lambda: lambda.max(0.0), phi, residual: 0.0 }
                    })
                    .collect());
            }
            if full || added.is_empty() {
                // Thick restart from the Ritz vectors; continue from the
                // lowest unconverged ones.
                self.basis.clear();
                self.gram.clear();
                let restart_ids = self.extend(vectors.clone());
                let residuals: Vec<Vec<f64>> = unconverged
                    .iter()
                    .take(self.block)
                    .map(|&j| {
                        let mut r = vec![0.0; vectors[j].len()];
                        self.op.apply_stiffness(&vectors[j], &mut r);
                        for ((ri, m), x) in r.iter_mut().zip(self.op.mass()).zip(&vectors[j]) {
                            *ri = (*ri - values[j] * m * x) / m;
                        }
                        r
                    })
                    .collect();
                let mut seeds = self.apply_inverse(&residuals);
                if restart_ids.len() < self.nev.min(vectors.len()) {
                    seeds.extend(self.random_block(self.block, &mut rng));
                }
                frontier = self.extend(seeds);
                if frontier.is_empty() {
                    frontier = unconverged
                        .iter()
                        .take(self.block)
                        .filter_map(|&j| restart_ids.get(j).copied())
                        .collect();
                }
            } else {
                frontier = added;
            }
        }
        Err(EigenError::NonConvergence { iterations: self.opts.max_iterations, worst_residual: worst })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_laplacian, build_domain, DomainKind, GridDomain, BoundaryCondition};
    use std::f64::consts::PI;

    fn square_eigenvalues(count: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (1..40)
            .flat_map(|j| (1..40).map(move |k| PI * PI * (j * j + k * k) as f64))
            .collect();
        v.sort_by(f64::total_cmp);
        v.truncate(count);
        v
    }

    #[test]
    fn dense_and_krylov_paths_agree() {
        let d = build_domain(DomainKind::LShape, 41, 1.0).unwrap();
        let op = assemble_laplacian(&d);
        assert!(op.n_active() > DENSE_LIMIT);
        let krylov = smallest_eigenpairs(&op, 8, 1e-10, 3).unwrap();
        let reference = dense(&op, 8);
        for (a, b) in krylov.iter().zip(&reference) {
            assert!((a.lambda - b.lambda).abs() < 1e-8 * b.lambda);
        }
    }

    #[test]
    fn unit_square_first_eigenvalue() {
        let d = build_domain(DomainKind::Square, 129, 1.0).unwrap();
        let op = assemble_laplacian(&d);
        let pairs = smallest_eigenpairs(&op, 1, DEFAULT_TOL, 0).unwrap();
        assert!((pairs[0].lambda - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 0.01);
        assert!(pairs[0].phi.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn unit_square_ratios_and_certificates() {
        let d = build_domain(DomainKind::Square, 65, 1.0).unwrap();
        let op = assemble_laplacian(&d);
        let pairs = smallest_eigenpairs(&op, 4, DEFAULT_TOL, 11).unwrap();
        let l1 = pairs[0].lambda;
        for (p, expect) in pairs[1..].iter().zip([2.5, 2.5, 4.0]) {
            assert!((p.lambda / l1 - expect).abs() / expect < 0.02);
        }
        for (i, p) in pairs.iter().enumerate() {
            assert!(p.residual <= DEFAULT_TOL * p.lambda.max(1.0));
            assert!((op.mass_norm(&p.phi) - 1.0).abs() < 1e-10);
            for q in &pairs[i + 1..] {
                assert!(op.mass_dot(&p.phi, &q.phi).abs() < 1e-8);
            }
        }
        let exact = square_eigenvalues(4);
        assert!((pairs[3].lambda - exact[3]).abs() / exact[3] < 0.01);
    }

    #[test]
    fn torus_ground_state_is_constant() {
        let d = build_domain(DomainKind::Torus, 32, 1.0).unwrap();
        let op = assemble_laplacian(&d);
        let pairs = smallest_eigenpairs(&op, 1, DEFAULT_TOL, 0).unwrap();
        assert!(pairs[0].lambda.abs() < 1e-8);
        let first = pairs[0].phi[0];
        assert!(pairs[0].phi.iter().all(|v| (v - first).abs() < 1e-8));
    }

    #[test]
    fn deterministic_given_seed() {
        let d = build_domain(DomainKind::Disk, 49, 2.0).unwrap();
        let op = assemble_laplacian(&d);
        let a = smallest_eigenpairs(&op, 5, DEFAULT_TOL, 42).unwrap();
        let b = smallest_eigenpairs(&op, 5, DEFAULT_TOL, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_requests() {
        let d = build_domain(DomainKind::Square, 9, 1.0).unwrap();
        let op = assemble_laplacian(&d);
        assert!(matches!(smallest_eigenpairs(&op, 0, 1e-8, 0), Err(EigenError::InvalidRequest(_))));
        assert!(matches!(smallest_eigenpairs(&op, 50, 1e-8, 0), Err(EigenError::InvalidRequest(_))));
        assert!(matches!(smallest_eigenpairs(&op, 1, 0.0, 0), Err(EigenError::InvalidRequest(_))));
        assert_eq!(rayleigh_quotient(&op, &vec![0.0; 49]), Err(EigenError::ZeroVector));
        assert!(matches!(rayleigh_quotient(&op, &[1.0]), Err(EigenError::DimensionMismatch { .. })));
    }

    #[test]
    fn rayleigh_quotient_of_eigenvector_combinations() {
        let d = build_domain(DomainKind::Square, 33, 1.0).unwrap();
        let op = assemble_laplacian(&d);
        let pairs = smallest_eigenpairs(&op, 2, 1e-10, 0).unwrap();
        let rq1 = rayleigh_quotient(&op, &pairs[0].phi).unwrap();
        assert!((rq1 - pairs[0].lambda).abs() < 1e-8 * pairs[0].lambda);
        let sum: Vec<f64> = pairs[0].phi.iter().zip(&pairs[1].phi).map(|(a, b)| a + b).collect();
        let rq = rayleigh_quotient(&op, &sum).unwrap();
        assert!((rq - 0.5 * (pairs[0].lambda + pairs[1].lambda)).abs() < 1e-8 * rq);
    }

    #[test]
    fn first_eigenvalue_decreases_under_domain_inclusion() {
        let outer = build_domain(DomainKind::Square, 41, 1.0).unwrap();
        let mut mask = outer.mask().to_vec();
        for node in 0..mask.len() {
            let c = outer.coords(node);
            if c[0] > 30 || c[1] < 6 {
                mask[node] = false;
            }
        }
        let inner = GridDomain::from_mask(outer.shape().to_vec(), outer.spacing(), mask, BoundaryCondition::Dirichlet).unwrap();
        let l_outer = smallest_eigenpairs(&assemble_laplacian(&outer), 1, 1e-9, 0).unwrap()[0].lambda;
        let l_inner = smallest_eigenpairs(&assemble_laplacian(&inner), 1, 1e-9, 0).unwrap()[0].lambda;
        assert!(l_inner >= l_outer);
    }
}
