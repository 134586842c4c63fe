//! Argument parsing and TOML experiment configs.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use catlab::arithmetic::CatMatrix;
use catlab::hilbert::SpaceParams;
use catlab::propagator::auto_kappa;
use catlab::stats::experiment::{kappa_or_auto, BasisKind, QeConfig};
use serde::{Deserialize, Serialize};

pub fn parse_map(s: &str) -> Result<CatMatrix> {
    let v: Vec<i64> = s
        .split(',')
        .map(|x| x.trim().parse::<i64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| anyhow!("map: {e} in {s:?}"))?;
    let [a, b, c, d] = v[..] else { bail!("map: expected four comma-separated integers, got {s:?}") };
    Ok(CatMatrix::new(a, b, c, d).context("map")?)
}

pub fn parse_list<T: std::str::FromStr>(field: &str, s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',').map(|x| x.trim().parse::<T>().map_err(|e| anyhow!("{field}: {e} in {s:?}"))).collect()
}

pub fn parse_range(s: &str) -> Result<(u64, u64)> {
    let (a, b) = s.split_once(':').ok_or_else(|| anyhow!("range: expected lo:hi, got {s:?}"))?;
    let lo = a.trim().parse().map_err(|e| anyhow!("range: {e}"))?;
    let hi = b.trim().parse().map_err(|e| anyhow!("range: {e}"))?;
    if lo < 1 || lo > hi {
        bail!("range: need 1 ≤ lo ≤ hi, got {lo}:{hi}");
    }
    Ok((lo, hi))
}

pub fn parse_kappa(s: &str) -> Result<Option<[f64; 2]>> {
    if s == "auto" {
        return Ok(None);
    }
    let v: Vec<f64> = parse_list("kappa", s)?;
    let [a, b] = v[..] else { bail!("kappa: expected \"auto\" or k1,k2, got {s:?}") };
    Ok(Some([a, b]))
}

pub fn parse_basis(s: &str) -> Result<BasisKind> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.parse::<u64>().map_err(|e| anyhow!("basis: {e} in {s:?}"));
    Ok(match parts[..] {
        ["generic"] => BasisKind::Generic,
        ["rotated", seed] => BasisKind::Rotated { seed: num(seed)? },
        ["hecke", g, cap, seed] => BasisKind::Hecke { generators: num(g)? as usize, cap: num(cap)? as usize, seed: num(seed)? },
        _ => bail!("basis: expected generic, rotated:SEED or hecke:GENERATORS:CAP:SEED, got {s:?}"),
    })
}

/// Resolve `kappa` for `(m, N)`; `None` means the first admissible candidate.
pub fn space(m: &CatMatrix, n: usize, kappa: Option<[f64; 2]>) -> Result<SpaceParams> {
    if n < 2 {
        bail!("n: {n} < 2");
    }
    let k = match kappa {
        Some(k) => k,
        None => auto_kappa(m, n).ok_or_else(|| anyhow!("kappa: no admissible offset for N = {n}"))?,
    };
    Ok(SpaceParams::new(n, k)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QeFile {
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    pub experiment: QeConfig,
}

fn default_q_points() -> usize {
    256
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysConfig {
    pub map: [i64; 4],
    pub n: usize,
    #[serde(default, deserialize_with = "kappa_or_auto")]
    pub kappa: Option<[f64; 2]>,
    pub radius: f64,
    pub degree: usize,
    #[serde(default = "default_q_points")]
    pub q_points: usize,
    pub basis: BasisKind,
    #[serde(default)]
    pub build_seed: u64,
}

impl PhysConfig {
    pub fn validate(&self) -> Result<CatMatrix> {
        let [a, b, c, d] = self.map;
        let m = CatMatrix::new(a, b, c, d).context("map")?;
        if self.n < 2 {
            bail!("n: {} < 2", self.n);
        }
        if !(self.radius > 0.0 && self.radius <= 0.5) {
            bail!("radius: {} outside (0, 1/2]", self.radius);
        }
        if self.degree == 0 {
            bail!("degree: must be positive");
        }
        if self.q_points == 0 {
            bail!("q_points: must be positive");
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysFile {
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    pub experiment: PhysConfig,
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).map_err(|e| anyhow!("config {}: {e}", path.display()))
}
