//! Dense-vector kernels, preconditioned conjugate gradients and a skyline
//! (variable-band) Cholesky factorization for the shifted stiffness matrix.

use crate::grid::SparseSymOp;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned CG for `S x = b`, where `apply(v, out)` computes
/// `out = S v` for a symmetric positive definite `S` with diagonal `diag`.
/// `x` holds the initial guess on entry.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgStats {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgStats { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = norm(&r) / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        axpy(alpha, &p, x);
        axpy(-alpha, &q, &mut r);
        it += 1;
        rel = norm(&r) / bnorm;
        if rel <= tol {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgStats { iterations: it, relative_residual: rel, converged: rel <= tol }
}

/// Lower-triangular Cholesky factor stored row by row over each row's
/// envelope `first[i]..=i`.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    /// Number of stored entries the factor of `op` would need.
    pub fn profile_size(op: &SparseSymOp) -> usize {
        (0..op.n_active()).map(|i| i - op.first_col(i) + 1).sum()
    }

    /// Rough multiply-add count of the factorization.
    pub fn factor_cost(op: &SparseSymOp) -> f64 {
        (0..op.n_active())
            .map(|i| {
                let w = (i - op.first_col(i)) as f64;
                0.5 * w * w
            })
            .sum()
    }

    /// Factors `K + shift · M`. Returns `None` if a pivot is not positive.
    pub fn factor(op: &SparseSymOp, shift: f64) -> Option<Self> {
        let n = op.n_active();
        let first: Vec<usize> = (0..n).map(|i| op.first_col(i)).collect();
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut values = vec![0.0; total];
        for i in 0..n {
            let base = start[i];
            let fi = first[i];
            values[base + (i - fi)] = op.stiffness_diag()[i] + shift * op.mass()[i];
            for (j, v) in op.row(i) {
                if j < i {
                    values[base + (j - fi)] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let bi = start[i];
            for j in fi..i {
                let fj = first[j];
                let bj = start[j];
                let lo = fi.max(fj);
                let (ri, rj) = (&values[bi + (lo - fi)..bi + (j - fi)], &values[bj + (lo - fj)..bj + (j - fj)]);
                let s = dot(ri, rj);
                let ljj = values[bj + (j - fj)];
                let idx = bi + (j - fi);
                values[idx] = (values[idx] - s) / ljj;
            }
            let row = &values[bi..bi + (i - fi)];
            let d = values[bi + (i - fi)] - dot(row, row);
            if !(d > 0.0) {
                return None;
            }
            values[bi + (i - fi)] = d.sqrt();
        }
        Some(Self { first, start, values })
    }

    pub fn n(&self) -> usize {
        self.first.len()
    }

    /// Solves `L Lᵀ X = B` in place for `nrhs` right-hand sides stored
    /// interleaved (`b[i * nrhs + k]` is entry `i` of column `k`).
    pub fn solve_interleaved(&self, b: &mut [f64], nrhs: usize) {
        let n = self.n();
        let mut acc = vec![0.0; nrhs];
        for i in 0..n {
            let fi = self.first[i];
            let bi = self.start[i];
            acc.copy_from_slice(&b[i * nrhs..(i + 1) * nrhs]);
            for (off, &l) in self.values[bi..bi + (i - fi)].iter().enumerate() {
                let j = fi + off;
                let bj = &b[j * nrhs..(j + 1) * nrhs];
                for k in 0..nrhs {
                    acc[k] -= l * bj[k];
                }
            }
            let d = self.values[bi + (i - fi)];
            for k in 0..nrhs {
                b[i * nrhs + k] = acc[k] / d;
            }
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let bi = self.start[i];
            let d = self.values[bi + (i - fi)];
            for k in 0..nrhs {
                acc[k] = b[i * nrhs + k] / d;
                b[i * nrhs + k] = acc[k];
            }
            for (off, &l) in self.values[bi..bi + (i - fi)].iter().enumerate() {
                let j = fi + off;
                let bj = &mut b[j * nrhs..(j + 1) * nrhs];
                for k in 0..nrhs {
                    bj[k] -= l * acc[k];
                }
            }
        }
    }

    pub fn solve(&self, b: &mut [f64]) {
        self.solve_interleaved(b, 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_laplacian, build_domain, DomainKind};

    #[test]
    fn cholesky_matches_cg() {
        let d = build_domain(DomainKind::LShape, 21, 1.0).unwrap();
        let op = assemble_laplacian(&d);
        let n = op.n_active();
        let shift = 3.0;
        let chol = SkylineCholesky::factor(&op, shift).unwrap();
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let mut x1 = b.clone();
        chol.solve(&mut x1);
        let mut x2 = vec![0.0; n];
        let diag: Vec<f64> = (0..n).map(|i| op.stiffness_diag()[i] + shift * op.mass()[i]).collect();
        let apply = |v: &[f64], out: &mut [f64]| {
            op.apply_stiffness(v, out);
            for i in 0..n {
                out[i] += shift * op.mass()[i] * v[i];
            }
        };
        let stats = pcg(apply, &diag, &b, &mut x2, 1e-13, 10_000);
        assert!(stats.converged);
        for (a, c) in x1.iter().zip(&x2) {
            assert!((a - c).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn interleaved_solve_matches_columnwise() {
        let d = build_domain(DomainKind::Disk, 19, 1.0).unwrap();
        let op = assemble_laplacian(&d);
        let n = op.n_active();
        let chol = SkylineCholesky::factor(&op, 0.5).unwrap();
        let cols: Vec<Vec<f64>> = (0..3).map(|k| (0..n).map(|i| ((i + k) as f64).cos()).collect()).collect();
        let mut inter = vec![0.0; n * 3];
        for i in 0..n {
            for k in 0..3 {
                inter[i * 3 + k] = cols[k][i];
            }
        }
        chol.solve_interleaved(&mut inter, 3);
        for k in 0..3 {
            let mut single = cols[k].clone();
            chol.solve(&mut single);
            for i in 0..n {
                assert!((single[i] - inter[i * 3 + k]).abs() < 1e-12 * (1.0 + single[i].abs()));
            }
        }
    }

    #[test]
    fn cg_zero_rhs() {
        let mut x = vec![1.0; 4];
        let stats = pcg(|v, o| o.copy_from_slice(v), &[1.0; 4], &[0.0; 4], &mut x, 1e-10, 10);
        assert!(stats.converged);
        assert_eq!(x, vec![0.0; 4]);
    }
}
