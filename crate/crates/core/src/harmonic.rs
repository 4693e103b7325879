//! Harmonic measure of obstacles in the unit disk by walk-on-spheres, and the
//! inequalities built on it.
//!
//! Every sample owns a ChaCha8 stream selected by its index, so estimates do
//! not depend on how samples are scheduled across threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::GridDomain;
use crate::nodal::{argmax_node, distance_to_complement_node, squared_distance_transform, NodalDecomposition, NodalError};

pub const DEFAULT_EPS: f64 = 1e-4;
pub const DEFAULT_MAX_STEPS: usize = 100_000;
const CHUNK: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarmonicError {
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("u is not positive: {0}")]
    NotPositive(String),
    #[error(transparent)]
    Nodal(#[from] NodalError),
}

/// Obstacle given by a boolean raster of `[-1, 1]²` (`n × n` nodes, row-major in x).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskObstacle {
    n: usize,
    mask: Vec<bool>,
    dist: Vec<f64>,
}

impl MaskObstacle {
    pub fn new(n: usize, mask: Vec<bool>) -> Result<Self, HarmonicError> {
        if n < 2 || mask.len() != n * n {
            return Err(HarmonicError::InvalidObstacle("mask must be n × n with n ≥ 2".into()));
        }
        let h = 2.0 / (n - 1) as f64;
        let dist = squared_distance_transform(&[n, n], &mask, false).into_iter().map(|v| v.sqrt() * h).collect();
        Ok(Self { n, mask, dist })
    }

    fn spacing(&self) -> f64 {
        2.0 / (self.n - 1) as f64
    }

    fn point(&self, k: usize) -> (f64, f64) {
        let h = self.spacing();
        ((k / self.n) as f64 * h - 1.0, (k % self.n) as f64 * h - 1.0)
    }

    /// Bilinear interpolation of the nodal distance field, lowered by half a
    /// cell diagonal so it never overestimates the distance to the mask.
    fn distance(&self, x: f64, y: f64) -> f64 {
        let h = self.spacing();
        let fx = ((x + 1.0) / h).clamp(0.0, (self.n - 1) as f64);
        let fy = ((y + 1.0) / h).clamp(0.0, (self.n - 1) as f64);
        let (i, j) = ((fx.floor() as usize).min(self.n - 2), (fy.floor() as usize).min(self.n - 2));
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let at = |a: usize, b: usize| self.dist[a * self.n + b];
        let v = (1.0 - tx) * (1.0 - ty) * at(i, j)
            + tx * (1.0 - ty) * at(i + 1, j)
            + (1.0 - tx) * ty * at(i, j + 1)
            + tx * ty * at(i + 1, j + 1);
        (v - 0.5 * std::f64::consts::SQRT_2 * h).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObstacleKind {
    Empty,
    /// The segment `[r0, 1]` on the positive real axis.
    RadialSlit { r0: f64 },
    /// The circle `|z| = r0`.
    Circle { r0: f64 },
    /// Closed disks `(cx, cy, radius)`.
    Disks(Vec<(f64, f64, f64)>),
    Mask(MaskObstacle),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSet {
    kind: ObstacleKind,
    r0: Option<f64>,
}

impl ObstacleSet {
    pub fn new(kind: ObstacleKind) -> Result<Self, HarmonicError> {
        let bad = |msg: String| Err(HarmonicError::InvalidObstacle(msg));
        let r0 = match &kind {
            ObstacleKind::Empty => None,
            ObstacleKind::RadialSlit { r0 } => {
                if !(0.0..=1.0).contains(r0) {
                    return bad(format!("slit start {r0} not in [0, 1]"));
                }
                Some(*r0)
            }
            ObstacleKind::Circle { r0 } => {
                if !(*r0 > 0.0 && *r0 <= 1.0) {
                    return bad(format!("circle radius {r0} not in (0, 1]"));
                }
                Some(*r0)
            }
            ObstacleKind::Disks(list) => {
                let mut best = None::<f64>;
                for &(cx, cy, r) in list {
                    let c = cx.hypot(cy);
                    if !(r > 0.0) || c + r > 1.0 + 1e-12 {
                        return bad(format!("disk ({cx}, {cy}; {r}) must have positive radius inside the unit disk"));
                    }
                    let near = (c - r).max(0.0);
                    best = Some(best.map_or(near, |b| b.min(near)));
                }
                best
            }
            ObstacleKind::Mask(m) => {
                let mut best = None::<f64>;
                for k in 0..m.mask.len() {
                    if m.mask[k] {
                        let (x, y) = m.point(k);
                        let rho = x.hypot(y);
                        if rho > 1.0 + 1e-12 {
                            return bad("mask extends outside the unit disk".into());
                        }
                        best = Some(best.map_or(rho, |b| b.min(rho)));
                    }
                }
                best
            }
        };
        Ok(Self { kind, r0 })
    }

    pub fn empty() -> Self {
        Self { kind: ObstacleKind::Empty, r0: None }
    }

    pub fn radial_slit(r0: f64) -> Result<Self, HarmonicError> {
        Self::new(ObstacleKind::RadialSlit { r0 })
    }

    pub fn circle(r0: f64) -> Result<Self, HarmonicError> {
        Self::new(ObstacleKind::Circle { r0 })
    }

    pub fn kind(&self) -> &ObstacleKind {
        &self.kind
    }

    /// `inf{|z| : z ∈ E}`, recomputed from the geometry; `None` for `E = ∅`.
    pub fn r0(&self) -> Option<f64> {
        self.r0
    }

    /// Euclidean distance from `(x, y)` to `E` (a lower bound for masks).
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            ObstacleKind::Empty => f64::INFINITY,
            ObstacleKind::RadialSlit { r0 } => {
                if x < *r0 {
                    (x - r0).hypot(y)
                } else if x > 1.0 {
                    (x - 1.0).hypot(y)
                } else {
                    y.abs()
                }
            }
            ObstacleKind::Circle { r0 } => (x.hypot(y) - r0).abs(),
            ObstacleKind::Disks(list) => list
                .iter()
                .map(|&(cx, cy, r)| ((x - cx).hypot(y - cy) - r).max(0.0))
                .fold(f64::INFINITY, f64::min),
            ObstacleKind::Mask(m) => m.distance(x, y),
        }
    }
}

/// Closed form `ω(0) = (2/π) arcsin((1 − r0)/(1 + r0))` for the slit `[r0, 1]`.
pub fn slit_harmonic_measure(r0: f64) -> f64 {
    (2.0 / PI) * ((1.0 - r0) / (1.0 + r0)).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WosOptions {
    pub eps: f64,
    pub max_steps: usize,
}

impl Default for WosOptions {
    fn default() -> Self {
        Self { eps: DEFAULT_EPS, max_steps: DEFAULT_MAX_STEPS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Exit {
    Obstacle,
    Circle(f64, f64),
}

/// One absorbed walk from the origin. Returns the exit and whether it needed
/// to be restarted after hitting the step cap.
fn walk(e: &ObstacleSet, opts: &WosOptions, rng: &mut ChaCha8Rng) -> (Exit, usize) {
    let mut restarts = 0;
    loop {
        let (mut x, mut y) = (0.0f64, 0.0f64);
        for _ in 0..opts.max_steps {
            let de = e.distance(x, y);
            if de < opts.eps {
                return (Exit::Obstacle, restarts);
            }
            let rho = x.hypot(y);
            let db = 1.0 - rho;
            if db < opts.eps {
                let scale = if rho > 0.0 { 1.0 / rho } else { 1.0 };
                return (Exit::Circle(x * scale, y * scale), restarts);
            }
            let r = de.min(db);
            let theta = rng.random::<f64>() * 2.0 * PI;
            let (s, c) = theta.sin_cos();
            x += r * c;
            y += r * s;
        }
        if e.distance(x, y) < opts.eps.sqrt() {
            return (Exit::Obstacle, restarts);
        }
        restarts += 1;
    }
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `n` walks and folds each chunk of exits with `f`, returning the chunk
/// results in order.
fn run_walks<T: Send>(
    e: &ObstacleSet,
    n: usize,
    seed: u64,
    opts: &WosOptions,
    f: impl Fn(&[(Exit, usize)]) -> T + Sync,
) -> Vec<T> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let exits: Vec<(Exit, usize)> = (lo..hi).map(|i| walk(e, opts, &mut sample_rng(seed, i))).collect();
            f(&exits)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub omega0: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Walks restarted after reaching the step cap away from `E`.
    pub restarts: usize,
}

pub fn harmonic_measure_at_zero(e: &ObstacleSet, n_samples: usize, seed: u64) -> Result<MeasureEstimate, HarmonicError> {
    harmonic_measure_with(e, n_samples, seed, &WosOptions::default())
}

pub fn harmonic_measure_with(e: &ObstacleSet, n_samples: usize, seed: u64, opts: &WosOptions) -> Result<MeasureEstimate, HarmonicError> {
    if n_samples == 0 {
        return Err(HarmonicError::InvalidArgument("n_samples must be at least 1".into()));
    }
    if !(opts.eps > 0.0 && opts.eps < 1.0) || opts.max_steps == 0 {
        return Err(HarmonicError::InvalidArgument("eps must be in (0, 1) and max_steps positive".into()));
    }
    if matches!(e.kind, ObstacleKind::Empty) {
        return Ok(MeasureEstimate { omega0: 0.0, stderr: 0.0, n_samples, seed, restarts: 0 });
    }
    let parts = run_walks(e, n_samples, seed, opts, |exits| {
        let hits = exits.iter().filter(|x| x.0 == Exit::Obstacle).count();
        let restarts: usize = exits.iter().map(|x| x.1).sum();
        (hits, restarts)
    });
    let hits: usize = parts.iter().map(|p| p.0).sum();
    let restarts: usize = parts.iter().map(|p| p.1).sum();
    let omega0 = hits as f64 / n_samples as f64;
    Ok(MeasureEstimate { omega0, stderr: (omega0 * (1.0 - omega0) / n_samples as f64).sqrt(), n_samples, seed, restarts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeurlingRow {
    pub r0: f64,
    pub omega0: f64,
    pub stderr: f64,
    /// `(1 − ω(0)) / √r0`.
    pub implied_c: f64,
    pub closed_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeurlingTable {
    pub rows: Vec<BeurlingRow>,
    /// `(max C − min C) / min C` over the rows.
    pub variation: f64,
    /// `ω(0)` strictly decreasing in `r0` with 3-stderr separation.
    pub monotone: bool,
}

pub const BEURLING_HEADER: &str = "r0,omega0,stderr,implied_c,closed_form";

impl BeurlingRow {
    pub fn csv_row(&self) -> String {
        format!("{:.6e},{:.12e},{:.12e},{:.12e},{:.12e}", self.r0, self.omega0, self.stderr, self.implied_c, self.closed_form)
    }
}

/// Radial-slit sweep: `ω(0)` and the implied Beurling–Nevanlinna constant.
pub fn beurling_nevanlinna_check(r0_list: &[f64], n_samples: usize, seed: u64) -> Result<BeurlingTable, HarmonicError> {
    if r0_list.is_empty() || r0_list.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(HarmonicError::InvalidArgument("r0 values must lie in (0, 1)".into()));
    }
    let mut rows = Vec::with_capacity(r0_list.len());
    for &r0 in r0_list {
        let est = harmonic_measure_at_zero(&ObstacleSet::radial_slit(r0)?, n_samples, seed)?;
        rows.push(BeurlingRow {
            r0,
            omega0: est.omega0,
            stderr: est.stderr,
            implied_c: (1.0 - est.omega0) / r0.sqrt(),
            closed_form: slit_harmonic_measure(r0),
        });
    }
    let cs: Vec<f64> = rows.iter().map(|r| r.implied_c).collect();
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.r0.total_cmp(&b.r0));
    let monotone = sorted.windows(2).all(|w| {
        let sep = 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[0].omega0 - w[1].omega0 > sep
    });
    Ok(BeurlingTable { rows, variation: (hi - lo) / lo, monotone })
}

/// Boundary data `c + Σ wₖ (|ζₖ|² − 1)/|ζₖ − e^{iθ}|²` on the unit circle:
/// the trace of the positive harmonic function `c + Σ wₖ Re((ζₖ + z)/(ζₖ − z))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonMixture {
    pub constant: f64,
    /// `(weight, pole_x, pole_y)` with `|pole| > 1`.
    pub poles: Vec<(f64, f64, f64)>,
}

impl PoissonMixture {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, poles: Vec::new() }
    }

    fn validate(&self) -> Result<(), HarmonicError> {
        if !(self.constant >= 0.0) || self.poles.iter().any(|p| !(p.0 >= 0.0)) {
            return Err(HarmonicError::NotPositive("weights must be non-negative".into()));
        }
        if self.constant == 0.0 && self.poles.iter().all(|p| p.0 == 0.0) {
            return Err(HarmonicError::NotPositive("all weights vanish".into()));
        }
        if let Some(p) = self.poles.iter().find(|p| !(p.1.hypot(p.2) > 1.0)) {
            return Err(HarmonicError::InvalidArgument(format!("pole ({}, {}) must lie outside the closed disk", p.1, p.2)));
        }
        Ok(())
    }

    /// Value of the harmonic extension at `(x, y)` in the closed disk.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        self.constant
            + self
                .poles
                .iter()
                .map(|&(w, px, py)| w * (px * px + py * py - r2) / ((px - x).powi(2) + (py - y).powi(2)))
                .sum::<f64>()
    }

    /// Maximum on the unit circle: a fine scan refined by golden-section search.
    pub fn max_on_circle(&self) -> f64 {
        let g = |t: f64| self.eval(t.cos(), t.sin());
        let n = 8192;
        let step = 2.0 * PI / n as f64;
        let mut best = (0usize, f64::NEG_INFINITY);
        for k in 0..n {
            let v = g(k as f64 * step);
            if v > best.1 {
                best = (k, v);
            }
        }
        let (mut a, mut b) = ((best.0 as f64 - 1.0) * step, (best.0 as f64 + 1.0) * step);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if g(c) > g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let mut top = best.1.max(g(0.5 * (a + b)));
        for &(_, px, py) in &self.poles {
            top = top.max(g(py.atan2(px)));
        }
        top
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Majorization {
    /// `u(0) / max u`.
    pub lhs: f64,
    /// `1 − ω(0)`.
    pub rhs: f64,
    pub u0: f64,
    pub max_u: f64,
    pub stderr: f64,
    pub holds: bool,
}

/// `u(0)/max u ≤ 1 − ω(0)` for `u` harmonic off `E`, equal to `g` on the unit
/// circle and to 0 on `E`. Both sides come from the same walks.
pub fn majorization_check(u: &PoissonMixture, e: &ObstacleSet, n_samples: usize, seed: u64) -> Result<Majorization, HarmonicError> {
    u.validate()?;
    if n_samples == 0 {
        return Err(HarmonicError::InvalidArgument("n_samples must be at least 1".into()));
    }
    let opts = WosOptions::default();
    let parts = run_walks(e, n_samples, seed, &opts, |exits| {
        let mut sum = 0.0;
        let mut escapes = 0usize;
        let mut top = f64::NEG_INFINITY;
        for (exit, _) in exits {
            if let Exit::Circle(x, y) = *exit {
                let v = u.eval(x, y);
                sum += v;
                escapes += 1;
                top = top.max(v);
            }
        }
        (sum, escapes, top)
    });
    let sum: f64 = parts.iter().map(|p| p.0).sum();
    let escapes: usize = parts.iter().map(|p| p.1).sum();
    let exit_max = parts.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    let max_u = u.max_on_circle().max(exit_max);
    let n = n_samples as f64;
    let u0 = sum / n;
    let rhs = escapes as f64 / n;
    let lhs = u0 / max_u;
    let stderr = (rhs * (1.0 - rhs) / n).sqrt();
    Ok(Majorization { lhs, rhs, u0, max_u, stderr, holds: lhs <= rhs + 3.0 * stderr })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CenterGap {
    pub argmax: usize,
    /// Distance from the maximum of `|φ|` to the domain boundary (half a cell
    /// short of the nearest non-domain node).
    pub distance: f64,
    pub lambda: f64,
    /// `distance · √λ`.
    pub gap: f64,
}

/// How deep inside its nodal domain the maximum of `|φ|` sits, in wavelengths.
pub fn center_maximality_gap(dec: &NodalDecomposition, domain_id: usize, d: &GridDomain) -> Result<CenterGap, HarmonicError> {
    let lambda = dec
        .lambda()
        .ok_or_else(|| HarmonicError::InvalidArgument("decomposition carries no eigenvalue".into()))?;
    let x0 = argmax_node(dec, domain_id, d)?;
    let mask = dec.domain_mask(d, domain_id)?;
    let raw = distance_to_complement_node(d, &mask, x0);
    let distance = if raw.is_finite() { (raw - 0.5 * d.spacing()).max(0.0) } else { raw };
    Ok(CenterGap { argmax: x0, distance, lambda, gap: distance * lambda.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainKind};
    use crate::nodal::{extract_nodal_domains, inner_radius};

    #[test]
    fn empty_and_circle_are_exact() {
        let est = harmonic_measure_at_zero(&ObstacleSet::empty(), 1000, 1).unwrap();
        assert_eq!(est.omega0, 0.0);
        for seed in 0..20 {
            let est = harmonic_measure_at_zero(&ObstacleSet::circle(0.3).unwrap(), 2000, seed).unwrap();
            assert!(est.omega0 >= 1.0 - 3.0 * est.stderr);
            assert_eq!(est.omega0, 1.0);
        }
    }

    #[test]
    fn slit_matches_closed_form() {
        let r0 = 0.1;
        let est = harmonic_measure_at_zero(&ObstacleSet::radial_slit(r0).unwrap(), 200_000, 7).unwrap();
        let exact = slit_harmonic_measure(r0);
        assert!((est.omega0 - exact).abs() < 3.0 * est.stderr + 1e-3, "{} vs {exact}", est.omega0);
    }

    #[test]
    fn closed_form_limits() {
        assert!((slit_harmonic_measure(0.0) - 1.0).abs() < 1e-15);
        assert!(slit_harmonic_measure(1.0).abs() < 1e-15);
        // Small r0: 1 − ω ≈ (4/π) √r0.
        let r0 = 1e-8;
        assert!(((1.0 - slit_harmonic_measure(r0)) / r0.sqrt() - 4.0 / PI).abs() < 1e-3);
    }

    #[test]
    fn obstacle_geometry_and_r0() {
        let s = ObstacleSet::radial_slit(0.4).unwrap();
        assert_eq!(s.r0(), Some(0.4));
        assert!((s.distance(0.0, 0.0) - 0.4).abs() < 1e-15);
        assert!((s.distance(0.5, -0.2) - 0.2).abs() < 1e-15);
        let disks = ObstacleSet::new(ObstacleKind::Disks(vec![(0.5, 0.0, 0.1), (0.0, -0.7, 0.2)])).unwrap();
        assert!((disks.r0().unwrap() - 0.4).abs() < 1e-12);
        assert!(ObstacleSet::new(ObstacleKind::Disks(vec![(0.95, 0.0, 0.1)])).is_err());
        assert!(ObstacleSet::radial_slit(1.5).is_err());
        assert!(ObstacleSet::circle(0.0).is_err());
        assert_eq!(ObstacleSet::empty().r0(), None);
    }

    #[test]
    fn mask_obstacle_approximates_circle() {
        let n = 401;
        let h = 2.0 / (n - 1) as f64;
        let mask: Vec<bool> = (0..n * n)
            .map(|k| {
                let (x, y) = ((k / n) as f64 * h - 1.0, (k % n) as f64 * h - 1.0);
                (x.hypot(y) - 0.5).abs() <= 0.6 * h
            })
            .collect();
        let e = ObstacleSet::new(ObstacleKind::Mask(MaskObstacle::new(n, mask).unwrap())).unwrap();
        assert!((e.r0().unwrap() - 0.5).abs() < h);
        // A lower bound for the distance, never far below the truth.
        let d = e.distance(0.0, 0.0);
        assert!(d <= 0.5 && d > 0.5 - 2.0 * h);
        let est = harmonic_measure_at_zero(&e, 2000, 3).unwrap();
        assert_eq!(est.omega0, 1.0);
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let e = ObstacleSet::radial_slit(0.2).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| harmonic_measure_at_zero(&e, 20_000, 11).unwrap());
        let b = three.install(|| harmonic_measure_at_zero(&e, 20_000, 11).unwrap());
        assert_eq!(a, b);
        let u = PoissonMixture { constant: 0.5, poles: vec![(1.0, -1.2, 0.0)] };
        let ma = one.install(|| majorization_check(&u, &e, 20_000, 5).unwrap());
        let mb = three.install(|| majorization_check(&u, &e, 20_000, 5).unwrap());
        assert_eq!(ma, mb);
    }

    #[test]
    fn nested_slits_are_monotone() {
        let t = beurling_nevanlinna_check(&[0.4, 0.2, 0.1, 0.05, 0.025], 50_000, 2).unwrap();
        assert!(t.monotone);
        assert!(t.variation < 0.3, "{}", t.variation);
        for row in &t.rows {
            assert!((row.omega0 - row.closed_form).abs() < 4.0 * row.stderr + 1e-3);
        }
        assert!(beurling_nevanlinna_check(&[0.0], 10, 0).is_err());
    }

    #[test]
    fn majorization_cases() {
        let one = PoissonMixture::constant(1.0);
        let m = majorization_check(&one, &ObstacleSet::empty(), 1000, 0).unwrap();
        assert_eq!((m.lhs, m.rhs), (1.0, 1.0));

        // u = 1 − ω: equality up to MC error.
        let slit = ObstacleSet::radial_slit(0.3).unwrap();
        let m = majorization_check(&PoissonMixture::constant(2.0), &slit, 20_000, 1).unwrap();
        assert!((m.lhs - m.rhs).abs() < 1e-12);

        let poisson = PoissonMixture { constant: 0.0, poles: vec![(1.0, -1.05, 0.0)] };
        let m = majorization_check(&poisson, &slit, 20_000, 1).unwrap();
        assert!(m.holds && m.lhs < m.rhs - 0.1);
        assert!((m.max_u - 2.05 / 0.05).abs() / 41.0 < 1e-9);

        let neg = PoissonMixture { constant: -1.0, poles: vec![] };
        assert!(matches!(majorization_check(&neg, &slit, 10, 0), Err(HarmonicError::NotPositive(_))));
        let on_circle = PoissonMixture { constant: 0.0, poles: vec![(1.0, -1.0, 0.0)] };
        assert!(majorization_check(&on_circle, &slit, 10, 0).is_err());
    }

    #[test]
    fn halving_eps_moves_estimate_less_than_stderr_scale() {
        let e = ObstacleSet::radial_slit(0.1).unwrap();
        let a = harmonic_measure_with(&e, 100_000, 4, &WosOptions { eps: 1e-4, max_steps: DEFAULT_MAX_STEPS }).unwrap();
        let b = harmonic_measure_with(&e, 100_000, 4, &WosOptions { eps: 5e-5, max_steps: DEFAULT_MAX_STEPS }).unwrap();
        assert!((a.omega0 - b.omega0).abs() < 3.0 * a.stderr);
    }

    #[test]
    fn centre_gap_of_square_modes() {
        let d = build_domain(DomainKind::Square, 257, 1.0).unwrap();
        for (j, k) in [(1usize, 1usize), (2, 1), (3, 2)] {
            let phi: Vec<f64> = d
                .active_nodes()
                .iter()
                .map(|&n| {
                    let p = d.position(n);
                    (j as f64 * PI * p[0]).sin() * (k as f64 * PI * p[1]).sin()
                })
                .collect();
            let lambda = PI * PI * (j * j + k * k) as f64;
            let dec = extract_nodal_domains(&phi, &d).unwrap().with_lambda(lambda);
            let expect = PI * ((j * j + k * k) as f64).sqrt() / (2.0 * j.max(k) as f64);
            for id in 0..dec.domain_count() {
                let g = center_maximality_gap(&dec, id, &d).unwrap();
                assert!((g.gap - expect).abs() <= 2.0 * d.spacing() * lambda.sqrt(), "{} vs {expect}", g.gap);
                let r = inner_radius(&dec, id, &d).unwrap();
                assert!(g.gap <= (r.radius + d.spacing()) * lambda.sqrt() + 1e-12);
            }
        }
        let dec = extract_nodal_domains(&vec![1.0; d.active_count()], &d).unwrap();
        assert!(center_maximality_gap(&dec, 0, &d).is_err());
    }
}
