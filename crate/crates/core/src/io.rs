//! File formats: grid JSON, eigenpair bundles with binary sidecars, the
//! constants file and the fixed CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eigen::EigenPair;
use crate::grid::{BoundaryCondition, GridDomain, GridError};
use crate::nodal::{inner_radius, NodalDecomposition, NodalError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("format error: {0}")]
    Format(String),
    #[error("domain hash mismatch: bundle says {expected}, domain file hashes to {found}")]
    HashMismatch { expected: String, found: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Nodal(#[from] NodalError),
}

fn read(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|source| IoError::Io { path: path.to_owned(), source })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, bytes: &[u8]) -> Result<T, IoError> {
    serde_json::from_slice(bytes).map_err(|source| IoError::Json { path: path.to_owned(), source })
}

/// On-disk grid description. `mask` is a base64 bitset, node `k` at bit
/// `k % 8` of byte `k / 8`, nodes in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub mask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    pub bc: BoundaryCondition,
}

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (k, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        out[k / 8] |= 1 << (k % 8);
    }
    out
}

pub fn unpack_bits(bytes: &[u8], n: usize) -> Result<Vec<bool>, IoError> {
    if bytes.len() != n.div_ceil(8) {
        return Err(IoError::Format(format!("bitset holds {} bytes, {n} nodes need {}", bytes.len(), n.div_ceil(8))));
    }
    Ok((0..n).map(|k| bytes[k / 8] >> (k % 8) & 1 == 1).collect())
}

impl GridFile {
    pub fn from_domain(d: &GridDomain) -> Self {
        Self {
            dim: d.dim(),
            shape: d.shape().to_vec(),
            spacing: d.spacing(),
            mask: B64.encode(pack_bits(d.mask())),
            q: d.conformal_factor().map(<[f64]>::to_vec),
            bc: d.boundary(),
        }
    }

    pub fn to_domain(&self) -> Result<GridDomain, IoError> {
        if self.dim != self.shape.len() {
            return Err(IoError::Format(format!("dim {} but shape has {} axes", self.dim, self.shape.len())));
        }
        let n: usize = self.shape.iter().product();
        let bytes = B64.decode(&self.mask).map_err(|e| IoError::Format(format!("mask is not base64: {e}")))?;
        let d = GridDomain::from_mask(self.shape.clone(), self.spacing, unpack_bits(&bytes, n)?, self.bc)?;
        Ok(match &self.q {
            Some(q) => d.with_conformal_factor(q.clone())?,
            None => d,
        })
    }
}

pub fn grid_to_json(d: &GridDomain) -> String {
    serde_json::to_string(&GridFile::from_domain(d)).expect("grid file serializes")
}

/// SHA-256 (hex) of the canonical grid JSON.
pub fn domain_hash(d: &GridDomain) -> String {
    hex::encode(Sha256::digest(grid_to_json(d).as_bytes()))
}

pub fn write_grid(path: &Path, d: &GridDomain) -> Result<(), IoError> {
    write(path, grid_to_json(d).as_bytes())
}

pub fn read_grid(path: &Path) -> Result<GridDomain, IoError> {
    let bytes = read(path)?;
    parse::<GridFile>(path, &bytes)?.to_domain()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundlePair {
    pub lambda: f64,
    pub residual: f64,
    /// Sidecar path relative to the bundle; raw little-endian `f64` over the active nodes.
    pub phi_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenBundle {
    pub domain_hash: String,
    /// Grid JSON path relative to the bundle.
    pub domain_file: String,
    pub pairs: Vec<BundlePair>,
}

pub fn f64s_to_le_bytes(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn f64s_from_le_bytes(b: &[u8]) -> Result<Vec<f64>, IoError> {
    if b.len() % 8 != 0 {
        return Err(IoError::Format(format!("sidecar length {} is not a multiple of 8", b.len())));
    }
    Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Writes `<stem>.json`, `<stem>.grid.json` and `<stem>.phi<i>.bin` into the
/// directory of `bundle_path` and returns the bundle record.
pub fn write_bundle(bundle_path: &Path, d: &GridDomain, pairs: &[EigenPair]) -> Result<EigenBundle, IoError> {
    let dir = bundle_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = bundle_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| IoError::Format(format!("bad bundle path {}", bundle_path.display())))?;
    let domain_file = format!("{stem}.grid.json");
    write_grid(&dir.join(&domain_file), d)?;
    let mut records = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let phi_file = format!("{stem}.phi{i}.bin");
        write(&dir.join(&phi_file), &f64s_to_le_bytes(&p.phi))?;
        records.push(BundlePair { lambda: p.lambda, residual: p.residual, phi_file });
    }
    let bundle = EigenBundle { domain_hash: domain_hash(d), domain_file, pairs: records };
    let mut json = serde_json::to_string_pretty(&bundle).expect("bundle serializes");
    json.push('\n');
    write(bundle_path, json.as_bytes())?;
    Ok(bundle)
}

/// Reads a bundle, checks the domain hash and loads every sidecar.
pub fn read_bundle(bundle_path: &Path) -> Result<(GridDomain, Vec<EigenPair>), IoError> {
    let dir = bundle_path.parent().unwrap_or(Path::new("."));
    let bundle: EigenBundle = parse(bundle_path, &read(bundle_path)?)?;
    let d = read_grid(&dir.join(&bundle.domain_file))?;
    let found = domain_hash(&d);
    if found != bundle.domain_hash {
        return Err(IoError::HashMismatch { expected: bundle.domain_hash, found });
    }
    let mut pairs = Vec::with_capacity(bundle.pairs.len());
    for rec in &bundle.pairs {
        let phi = f64s_from_le_bytes(&read(&dir.join(&rec.phi_file))?)?;
        if phi.len() != d.active_count() {
            return Err(IoError::Format(format!("{} holds {} values, domain has {} active nodes", rec.phi_file, phi.len(), d.active_count())));
        }
        pairs.push(EigenPair { lambda: rec.lambda, phi, residual: rec.residual });
    }
    Ok((d, pairs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEntry {
    pub value: f64,
    pub note: String,
}

/// Fitted constants by name, serialized in name order.
pub type Constants = BTreeMap<String, ConstantEntry>;

pub fn read_constants(path: &Path) -> Result<Constants, IoError> {
    parse(path, &read(path)?)
}

pub fn write_constants(path: &Path, c: &Constants) -> Result<(), IoError> {
    let mut json = serde_json::to_string_pretty(c).expect("constants serialize");
    json.push('\n');
    write(path, json.as_bytes())
}

/// Custom capacity problem: the grid's mask is `Ω`, `f` a base64 bitset for `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityMaskFile {
    pub grid: GridFile,
    pub f: String,
}

impl CapacityMaskFile {
    /// Returns the lattice (fully active), `F` and `Ω` as node masks.
    pub fn masks(&self) -> Result<(GridDomain, Vec<bool>, Vec<bool>), IoError> {
        let omega_domain = self.grid.to_domain()?;
        let n = omega_domain.node_count();
        let bytes = B64.decode(&self.f).map_err(|e| IoError::Format(format!("f is not base64: {e}")))?;
        let f = unpack_bits(&bytes, n)?;
        let lattice = GridDomain::from_mask(self.grid.shape.clone(), self.grid.spacing, vec![true; n], BoundaryCondition::Dirichlet)?;
        Ok((lattice, f, omega_domain.mask().to_vec()))
    }
}

pub fn read_capacity_mask(path: &Path) -> Result<(GridDomain, Vec<bool>, Vec<bool>), IoError> {
    parse::<CapacityMaskFile>(path, &read(path)?)?.masks()
}

pub fn nodal_csv_header(dim: usize) -> &'static str {
    if dim == 3 {
        "domain_id,sign,volume,inner_radius,center_i,center_j,center_k"
    } else {
        "domain_id,sign,volume,inner_radius,center_i,center_j"
    }
}

/// One row per nodal domain; the centre is the grid index of the inscribed-ball centre.
pub fn nodal_csv(dec: &NodalDecomposition, d: &GridDomain) -> Result<String, IoError> {
    let mut out = String::from(nodal_csv_header(d.dim()));
    out.push('\n');
    for dom in dec.domains() {
        let ir = inner_radius(dec, dom.id, d)?;
        let c = d.coords(ir.center);
        out.push_str(&format!("{},{},{},{},{},{}", dom.id, dom.sign.symbol(), dom.volume, ir.radius, c[0], c[1]));
        if d.dim() == 3 {
            out.push_str(&format!(",{}", c[2]));
        }
        out.push('\n');
    }
    Ok(out)
}

pub const SCALING_HEADER: &str = "index,lambda,n_domains,r_min,r_min_sqrt_lambda,r_bound";
