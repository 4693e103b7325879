//! Nodal domains of a grid function and their geometry.
//!
//! Domains are the connected components of `{φ > 0}` and `{φ < 0}` under 4/6
//! neighbour adjacency; nodes with `φ` exactly zero are left unlabeled. Inner
//! radii come from an exact squared Euclidean distance transform
//! (lower-envelope algorithm, one pass per axis).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridDomain, Neighbor};

pub const UNLABELED: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NodalError {
    #[error("eigenfunction vanishes identically")]
    EmptyDecomposition,
    #[error("dimension mismatch: expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no nodal domain with id {0}")]
    UnknownDomain(usize),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Sign {
    pub fn of(v: f64) -> Option<Sign> {
        if v > 0.0 {
            Some(Sign::Positive)
        } else if v < 0.0 {
            Some(Sign::Negative)
        } else {
            None
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Positive => '+',
            Sign::Negative => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalDomain {
    pub id: usize,
    pub sign: Sign,
    /// Volume in the metric of the domain (mass-weighted when conformal).
    pub volume: f64,
    /// Grid nodes in first-visit order.
    pub nodes: Vec<usize>,
}

impl NodalDomain {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalDecomposition {
    labels: Vec<u32>,
    domains: Vec<NodalDomain>,
    phi: Vec<f64>,
    lambda: Option<f64>,
}

impl NodalDecomposition {
    /// Per active node, the domain id or `None` for exact zeros.
    pub fn label(&self, active: usize) -> Option<usize> {
        match self.labels[active] {
            UNLABELED => None,
            l => Some(l as usize),
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Domain id of a grid node, `None` for inactive nodes and zeros.
    pub fn label_of_node(&self, d: &GridDomain, node: usize) -> Option<usize> {
        d.active_index(node).and_then(|a| self.label(a))
    }

    pub fn domain_count(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[NodalDomain] {
        &self.domains
    }

    pub fn domain(&self, id: usize) -> Result<&NodalDomain, NodalError> {
        self.domains.get(id).ok_or(NodalError::UnknownDomain(id))
    }

    /// The decomposed function, indexed by active node.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    /// Membership mask over grid nodes for one domain.
    pub fn domain_mask(&self, d: &GridDomain, id: usize) -> Result<Vec<bool>, NodalError> {
        let dom = self.domain(id)?;
        let mut mask = vec![false; d.node_count()];
        for &n in &dom.nodes {
            mask[n] = true;
        }
        Ok(mask)
    }

    /// Courant's theorem: the `index`-th (1-based) eigenfunction has at most `index` domains.
    pub fn satisfies_courant(&self, index: usize) -> bool {
        self.domain_count() <= index
    }
}

/// Splits `phi` (indexed by active node) into nodal domains.
pub fn extract_nodal_domains(phi: &[f64], d: &GridDomain) -> Result<NodalDecomposition, NodalError> {
    if phi.len() != d.active_count() {
        return Err(NodalError::DimensionMismatch { expected: d.active_count(), got: phi.len() });
    }
    if phi.iter().all(|&v| v == 0.0) {
        return Err(NodalError::EmptyDecomposition);
    }
    let mut labels = vec![UNLABELED; phi.len()];
    let mut domains = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..phi.len() {
        if labels[start] != UNLABELED {
            continue;
        }
        let Some(sign) = Sign::of(phi[start]) else { continue };
        let id = domains.len() as u32;
        labels[start] = id;
        queue.push_back(start);
        let mut nodes = Vec::new();
        let mut volume = 0.0;
        while let Some(a) = queue.pop_front() {
            let node = d.active_nodes()[a];
            nodes.push(node);
            volume += d.node_volume(node);
            d.for_each_neighbor(node, |nb| {
                if let Neighbor::Node(m) = nb {
                    if let Some(b) = d.active_index(m) {
                        if labels[b] == UNLABELED && Sign::of(phi[b]) == Some(sign) {
                            labels[b] = id;
                            queue.push_back(b);
                        }
                    }
                }
            });
        }
        domains.push(NodalDomain { id: id as usize, sign, volume, nodes });
    }
    Ok(NodalDecomposition { labels, domains, phi: phi.to_vec(), lambda: None })
}

/// Squared distance (in lattice steps) from every cell of a `shape` array to
/// the nearest feature cell; `f64::INFINITY` where there is none. With
/// `periodic`, distances wrap around every axis.
pub fn squared_distance_transform(shape: &[usize], features: &[bool], periodic: bool) -> Vec<f64> {
    let total: usize = shape.iter().product();
    assert_eq!(features.len(), total);
    let mut dist: Vec<f64> = features.iter().map(|&f| if f { 0.0 } else { f64::INFINITY }).collect();
    let longest = *shape.iter().max().unwrap_or(&1);
    let cap = if periodic { 3 * longest } else { longest };
    let mut line = vec![0.0; cap];
    let mut out = vec![0.0; cap];
    let mut v = vec![0usize; cap];
    let mut z = vec![0.0; cap + 1];
    for axis in 0..shape.len() {
        let n = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let lines = total / n;
        for l in 0..lines {
            let outer = l / stride;
            let inner = l % stride;
            let base = outer * n * stride + inner;
            if periodic {
                for rep in 0..3 {
                    for q in 0..n {
                        line[rep * n + q] = dist[base + q * stride];
                    }
                }
                lower_envelope(&line[..3 * n], &mut out[..3 * n], &mut v, &mut z);
                for q in 0..n {
                    dist[base + q * stride] = out[n + q];
                }
            } else {
                for q in 0..n {
                    line[q] = dist[base + q * stride];
                }
                lower_envelope(&line[..n], &mut out[..n], &mut v, &mut z);
                for q in 0..n {
                    dist[base + q * stride] = out[q];
                }
            }
        }
    }
    dist
}

/// `d(q) = min_p (q - p)^2 + f(p)` by the lower envelope of parabolas.
fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    };
    let meet = |q: usize, p: usize| {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s = meet(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = meet(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let diff = q as f64 - v[k] as f64;
        d[q] = diff * diff + f[v[k]];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerRadiusResult {
    /// Inner radius in the domain metric (Euclidean radius scaled by `√q` at the centre).
    pub radius: f64,
    pub euclidean_radius: f64,
    /// Grid node attaining the radius.
    pub center: usize,
}

/// Per-node Euclidean distance (physical units) from each node of `member`
/// to the nearest grid node outside it; off-grid space counts as outside
/// unless the grid is periodic. Infinite when there is no outside node.
fn distance_to_complement(d: &GridDomain, member: &[bool]) -> Vec<(usize, f64)> {
    let dim = d.dim();
    let shape = d.shape();
    let nodes: Vec<usize> = member.iter().enumerate().filter(|(_, &m)| m).map(|(n, _)| n).collect();
    if nodes.is_empty() {
        return Vec::new();
    }
    if d.is_periodic() {
        let features: Vec<bool> = member.iter().map(|&m| !m).collect();
        let sq = squared_distance_transform(shape, &features, true);
        return nodes.into_iter().map(|n| (n, sq[n].sqrt() * d.spacing())).collect();
    }
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for &n in &nodes {
        let c = d.coords(n);
        for a in 0..dim {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    // Box padded by one layer; padding cells are features (outside `member`).
    let bshape: Vec<usize> = (0..dim).map(|a| hi[a] - lo[a] + 3).collect();
    let btotal: usize = bshape.iter().product();
    let mut features = vec![true; btotal];
    let to_box = |c: [usize; 3]| -> usize {
        (0..dim).fold(0, |acc, a| acc * bshape[a] + (c[a] + 1 - lo[a]))
    };
    for &n in &nodes {
        features[to_box(d.coords(n))] = false;
    }
    let sq = squared_distance_transform(&bshape, &features, false);
    nodes
        .into_iter()
        .map(|n| (n, sq[to_box(d.coords(n))].sqrt() * d.spacing()))
        .collect()
}

/// Inner radius of one nodal domain: the largest distance from a domain node
/// to the nearest non-domain node, minus one spacing (half a cell to reach the
/// nearest non-domain cell, half a cell of conservative slack).
pub fn inner_radius(dec: &NodalDecomposition, domain_id: usize, d: &GridDomain) -> Result<InnerRadiusResult, NodalError> {
    let mask = dec.domain_mask(d, domain_id)?;
    Ok(inner_radius_of_mask(d, &mask))
}

/// Inner radius of an arbitrary node set (e.g. the whole active domain).
pub fn inner_radius_of_mask(d: &GridDomain, member: &[bool]) -> InnerRadiusResult {
    let dists = distance_to_complement(d, member);
    let (center, best) = dists
        .iter()
        .fold((usize::MAX, f64::NEG_INFINITY), |acc, &(n, v)| if v > acc.1 { (n, v) } else { acc });
    if center == usize::MAX {
        return InnerRadiusResult { radius: 0.0, euclidean_radius: 0.0, center: 0 };
    }
    let euclidean = if best.is_finite() {
        (best - d.spacing()).max(0.0)
    } else {
        // No complement at all (a fully active periodic grid).
        d.extent().iter().cloned().fold(f64::INFINITY, f64::min) / 2.0
    };
    InnerRadiusResult { radius: euclidean * d.q_at(center).sqrt(), euclidean_radius: euclidean, center }
}

/// Distance from one node of a set to the nearest grid node outside it
/// (infinite when there is none); 0 for nodes not in the set.
pub fn distance_to_complement_node(d: &GridDomain, member: &[bool], node: usize) -> f64 {
    distance_to_complement(d, member)
        .into_iter()
        .find(|&(n, _)| n == node)
        .map_or(0.0, |(_, v)| v)
}

/// Length of the nodal set `{φ = 0}` by marching squares (2D only).
///
/// Each lattice cell contributes the segments joining the linear-interpolation
/// zero crossings on its edges; saddles are split according to the sign of
/// the average of the four corners. Inactive nodes carry the value 0.
pub fn nodal_set_length(dec: &NodalDecomposition, d: &GridDomain) -> Result<f64, NodalError> {
    if d.dim() != 2 {
        return Err(NodalError::Unsupported(format!("nodal set length needs dim = 2, got {}", d.dim())));
    }
    let shape = d.shape();
    let (nx, ny) = (shape[0], shape[1]);
    let value = |i: usize, j: usize| -> f64 {
        let node = d.node_at(&[i % nx, j % ny]);
        d.active_index(node).map_or(0.0, |a| dec.phi()[a])
    };
    let (cx, cy) = if d.is_periodic() { (nx, ny) } else { (nx - 1, ny - 1) };
    let mut total = 0.0;
    for i in 0..cx {
        for j in 0..cy {
            let c = [value(i, j), value(i + 1, j), value(i + 1, j + 1), value(i, j + 1)];
            let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let mut pts: [Option<(f64, f64)>; 4] = [None; 4];
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if a * b < 0.0 {
                    let t = a / (a - b);
                    let (p, q) = (corners[e], corners[(e + 1) % 4]);
                    pts[e] = Some((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
                }
            }
            let seg = |a: Option<(f64, f64)>, b: Option<(f64, f64)>| match (a, b) {
                (Some(p), Some(q)) => ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt(),
                _ => 0.0,
            };
            let count = pts.iter().filter(|p| p.is_some()).count();
            let cell = match count {
                2 => {
                    let found: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
                    seg(Some(found[0]), Some(found[1]))
                }
                4 => {
                    let centre = 0.25 * (c[0] + c[1] + c[2] + c[3]);
                    if Sign::of(centre) == Sign::of(c[0]) {
                        // Corners 0 and 2 connect through the centre; cut off 1 and 3.
                        seg(pts[0], pts[1]) + seg(pts[2], pts[3])
                    } else {
                        seg(pts[3], pts[0]) + seg(pts[1], pts[2])
                    }
                }
                _ => 0.0,
            };
            if cell > 0.0 {
                let q = if d.conformal_factor().is_some() {
                    let qs = [
                        d.q_at(d.node_at(&[i % nx, j % ny])),
                        d.q_at(d.node_at(&[(i + 1) % nx, j % ny])),
                        d.q_at(d.node_at(&[(i + 1) % nx, (j + 1) % ny])),
                        d.q_at(d.node_at(&[i % nx, (j + 1) % ny])),
                    ];
                    (0.25 * qs.iter().sum::<f64>()).sqrt()
                } else {
                    1.0
                };
                total += cell * q;
            }
        }
    }
    Ok(total * d.spacing())
}

/// Number of lattice points within `radius` (physical) of a lattice point.
fn lattice_ball_count(dim: usize, radius_steps: f64) -> usize {
    let r = radius_steps.floor() as i64;
    let r2 = radius_steps * radius_steps;
    let mut count = 0;
    for a in -r..=r {
        for b in -r..=r {
            if dim == 2 {
                if ((a * a + b * b) as f64) <= r2 {
                    count += 1;
                }
            } else {
                for c in -r..=r {
                    if ((a * a + b * b + c * c) as f64) <= r2 {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// Smallest volume fraction `Vol(component)/Vol(B)` over the connected
/// components of `domain ∩ B`, where `B` is the ball of `ball_radius` around
/// grid node `ball_center`. Requires the domain to meet the half-radius ball.
pub fn local_courant_ratio(
    dec: &NodalDecomposition,
    domain_id: usize,
    ball_center: usize,
    ball_radius: f64,
    d: &GridDomain,
) -> Result<f64, NodalError> {
    let dom = dec.domain(domain_id)?;
    if !(ball_radius > 0.0) {
        return Err(NodalError::NotApplicable(format!("ball radius {ball_radius}")));
    }
    let centre = d.position(ball_center);
    let dist = |node: usize| {
        let p = d.position(node);
        ((p[0] - centre[0]).powi(2) + (p[1] - centre[1]).powi(2) + (p[2] - centre[2]).powi(2)).sqrt()
    };
    let eps = 1e-9 * d.spacing();
    if !dom.nodes.iter().any(|&n| dist(n) <= 0.5 * ball_radius + eps) {
        return Err(NodalError::NotApplicable("domain does not meet the half-radius ball".into()));
    }
    let mut inside = vec![false; d.node_count()];
    for &n in &dom.nodes {
        if dist(n) <= ball_radius + eps {
            inside[n] = true;
        }
    }
    let ball = lattice_ball_count(d.dim(), ball_radius / d.spacing() + 1e-9) as f64;
    let mut seen = vec![false; d.node_count()];
    let mut best = f64::INFINITY;
    let mut queue = VecDeque::new();
    for &start in &dom.nodes {
        if !inside[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut count = 0usize;
        while let Some(n) = queue.pop_front() {
            count += 1;
            d.for_each_neighbor(n, |nb| {
                if let Neighbor::Node(m) = nb {
                    if inside[m] && !seen[m] {
                        seen[m] = true;
                        queue.push_back(m);
                    }
                }
            });
        }
        best = best.min(count as f64 / ball);
    }
    Ok(best)
}

/// Node of a domain where `|φ|` is largest (first in row-major order on ties).
pub fn argmax_node(dec: &NodalDecomposition, domain_id: usize, d: &GridDomain) -> Result<usize, NodalError> {
    let dom = dec.domain(domain_id)?;
    let mut best = (dom.nodes[0], f64::NEG_INFINITY);
    let mut sorted = dom.nodes.clone();
    sorted.sort_unstable();
    for n in sorted {
        let v = dec.phi()[d.active_index(n).expect("domain nodes are active")].abs();
        if v > best.1 {
            best = (n, v);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, BoundaryCondition, DomainKind};
    use std::f64::consts::PI;

    fn sample(d: &GridDomain, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        d.active_nodes()
            .iter()
            .map(|&n| {
                let p = d.position(n);
                f(p[0], p[1])
            })
            .collect()
    }

    #[test]
    fn six_rectangles_of_mode_3_2() {
        let d = build_domain(DomainKind::Square, 257, 1.0).unwrap();
        let phi = sample(&d, |x, y| (3.0 * PI * x).sin() * (2.0 * PI * y).sin());
        let dec = extract_nodal_domains(&phi, &d).unwrap();
        assert_eq!(dec.domain_count(), 6);
        for dom in dec.domains() {
            assert!((dom.volume - 1.0 / 6.0).abs() / (1.0 / 6.0) < 0.02);
            let r = inner_radius(&dec, dom.id, &d).unwrap();
            assert!((r.radius - 1.0 / 6.0).abs() <= 2.0 * d.spacing(), "{}", r.radius);
        }
        let len = nodal_set_length(&dec, &d).unwrap();
        assert!((len - 3.0).abs() / 3.0 < 0.05, "{len}");
    }

    #[test]
    fn constant_and_ground_state_have_one_domain() {
        let t = build_domain(DomainKind::Torus, 16, 1.0).unwrap();
        let dec = extract_nodal_domains(&vec![1.0; 256], &t).unwrap();
        assert_eq!(dec.domain_count(), 1);
        let r = inner_radius(&dec, 0, &t).unwrap();
        assert_eq!(r.radius, 0.5);

        let d = build_domain(DomainKind::Square, 65, 1.0).unwrap();
        let phi = sample(&d, |x, y| (PI * x).sin() * (PI * y).sin());
        let dec = extract_nodal_domains(&phi, &d).unwrap();
        assert_eq!(dec.domain_count(), 1);
        assert_eq!(dec.domains()[0].sign, Sign::Positive);
        assert_eq!(nodal_set_length(&dec, &d).unwrap(), 0.0);
    }

    #[test]
    fn zero_vector_is_rejected() {
        let d = build_domain(DomainKind::Square, 9, 1.0).unwrap();
        assert_eq!(extract_nodal_domains(&[0.0; 49], &d), Err(NodalError::EmptyDecomposition));
        assert!(matches!(extract_nodal_domains(&[1.0; 3], &d), Err(NodalError::DimensionMismatch { .. })));
    }

    #[test]
    fn exact_zeros_stay_unlabeled() {
        let d = build_domain(DomainKind::Square, 9, 1.0).unwrap();
        let mut phi = vec![1.0; 49];
        phi[10] = 0.0;
        let dec = extract_nodal_domains(&phi, &d).unwrap();
        assert_eq!(dec.label(10), None);
        assert_eq!(dec.domain_count(), 1);
        assert_eq!(dec.domains()[0].node_count(), 48);
    }

    #[test]
    fn full_square_block_radius() {
        let d = build_domain(DomainKind::Square, 101, 1.0).unwrap();
        let dec = extract_nodal_domains(&vec![1.0; d.active_count()], &d).unwrap();
        let r = inner_radius(&dec, 0, &d).unwrap();
        assert!((r.radius - (0.5 - d.spacing() / 2.0)).abs() <= d.spacing());
        assert_eq!(d.coords(r.center)[..2], [50, 50]);
    }

    #[test]
    fn single_node_domain_has_zero_radius() {
        let d = build_domain(DomainKind::Square, 9, 1.0).unwrap();
        let mut phi = vec![-1.0; 49];
        phi[24] = 2.0;
        let dec = extract_nodal_domains(&phi, &d).unwrap();
        let id = dec.label(24).unwrap();
        assert_eq!(inner_radius(&dec, id, &d).unwrap().radius, 0.0);
        assert!(inner_radius(&dec, 99, &d).is_err());
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let shape = [13usize, 9];
        let features: Vec<bool> = (0..117).map(|i| (i * 37 + 11) % 17 == 0).collect();
        for periodic in [false, true] {
            let fast = squared_distance_transform(&shape, &features, periodic);
            for n in 0..117 {
                let (a, b) = ((n / 9) as i64, (n % 9) as i64);
                let mut best = f64::INFINITY;
                for m in 0..117 {
                    if !features[m] {
                        continue;
                    }
                    let (c, e) = ((m / 9) as i64, (m % 9) as i64);
                    let (mut dx, mut dy) = ((a - c).abs(), (b - e).abs());
                    if periodic {
                        dx = dx.min(13 - dx);
                        dy = dy.min(9 - dy);
                    }
                    best = best.min((dx * dx + dy * dy) as f64);
                }
                assert_eq!(fast[n], best);
            }
        }
    }

    #[test]
    fn nodal_line_of_mode_2_1() {
        let d = build_domain(DomainKind::Square, 257, 1.0).unwrap();
        let phi = sample(&d, |x, y| (2.0 * PI * x).sin() * (PI * y).sin());
        let dec = extract_nodal_domains(&phi, &d).unwrap();
        let len = nodal_set_length(&dec, &d).unwrap();
        assert!((len - 1.0).abs() < 0.05, "{len}");
    }

    #[test]
    fn nodal_length_requires_2d() {
        let d = build_domain(DomainKind::Box, 9, 1.0).unwrap();
        let dec = extract_nodal_domains(&vec![1.0; d.active_count()], &d).unwrap();
        assert!(matches!(nodal_set_length(&dec, &d), Err(NodalError::Unsupported(_))));
    }

    #[test]
    fn saddle_cells_split_by_centre_sign() {
        // A 4x4 grid with a single interior saddle cell.
        let d = GridDomain::from_mask(vec![4, 4], 1.0, vec![true; 16], BoundaryCondition::Dirichlet).unwrap();
        let mut phi = vec![0.0; 16];
        // corners of cell (1,1): (1,1)+ (2,1)- (2,2)+ (1,2)-
        phi[d.node_at(&[1, 1])] = 1.0;
        phi[d.node_at(&[2, 1])] = -1.0;
        phi[d.node_at(&[2, 2])] = 1.0;
        phi[d.node_at(&[1, 2])] = -1.0;
        let dec = extract_nodal_domains(&phi, &d).unwrap();
        let len = nodal_set_length(&dec, &d).unwrap();
        // Two segments joining edge midpoints, each of length √2/2.
        assert!((len - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn courant_ratio_of_full_and_half_domains() {
        let d = build_domain(DomainKind::Square, 129, 1.0).unwrap();
        let full = extract_nodal_domains(&vec![1.0; d.active_count()], &d).unwrap();
        let centre = d.node_at(&[64, 64]);
        let r = 20.0 * d.spacing();
        assert!((local_courant_ratio(&full, 0, centre, r, &d).unwrap() - 1.0).abs() < 1e-12);

        let phi = sample(&d, |x, _| if x < 0.5 { 1.0 } else { -1.0 });
        let dec = extract_nodal_domains(&phi, &d).unwrap();
        let left = dec.label(d.active_index(d.node_at(&[10, 64])).unwrap()).unwrap();
        let ratio = local_courant_ratio(&dec, left, centre, r, &d).unwrap();
        assert!((ratio - 0.5).abs() / 0.5 < 0.05, "{ratio}");

        let far = d.node_at(&[120, 64]);
        assert!(matches!(
            local_courant_ratio(&dec, left, far, 10.0 * d.spacing(), &d),
            Err(NodalError::NotApplicable(_))
        ));
    }

    #[test]
    fn product_modes_count_and_radius() {
        let d = build_domain(DomainKind::Square, 257, 1.0).unwrap();
        for (j, k) in [(1usize, 1usize), (2, 3), (4, 1), (5, 5)] {
            let phi = sample(&d, |x, y| (j as f64 * PI * x).sin() * (k as f64 * PI * y).sin());
            let dec = extract_nodal_domains(&phi, &d).unwrap();
            assert_eq!(dec.domain_count(), j * k);
            let rmin = (0..dec.domain_count())
                .map(|id| inner_radius(&dec, id, &d).unwrap().radius)
                .fold(f64::INFINITY, f64::min);
            let expect = 1.0 / (2.0 * j.max(k) as f64);
            assert!((rmin - expect).abs() <= 2.0 * d.spacing());
        }
    }

    #[test]
    fn labels_are_deterministic_row_major() {
        let d = build_domain(DomainKind::Square, 33, 1.0).unwrap();
        let phi = sample(&d, |x, y| (2.0 * PI * x).sin() * (3.0 * PI * y).sin());
        let a = extract_nodal_domains(&phi, &d).unwrap();
        let b = extract_nodal_domains(&phi, &d).unwrap();
        assert_eq!(a, b);
        // The first active node belongs to domain 0.
        assert_eq!(a.label(0), Some(0));
        // Equal-sign domains never touch.
        for (i, &node) in d.active_nodes().iter().enumerate() {
            let Some(l) = a.label(i) else { continue };
            d.for_each_neighbor(node, |nb| {
                if let Neighbor::Node(m) = nb {
                    if let Some(l2) = a.label_of_node(&d, m) {
                        if l2 != l {
                            assert_ne!(a.domains()[l].sign, a.domains()[l2].sign);
                        }
                    }
                }
            });
        }
    }
}
