//! On-disk propagator cache keyed by a hash of the canonical build key.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use catlab::arithmetic::CatMatrix;
use catlab::hilbert::SpaceParams;
use catlab::propagator::{build_propagator, Propagator};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const MAGIC: &[u8; 8] = b"CATLABU1";
pub const CODE_VERSION: &str = concat!("catlab-propagator/", env!("CARGO_PKG_VERSION"), "/1");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub map: [i64; 4],
    pub n: usize,
    pub kappa: [f64; 2],
    pub build_seed: u64,
    pub version: String,
}

impl CacheKey {
    pub fn new(params: &SpaceParams, m: &CatMatrix, seed: u64) -> Self {
        CacheKey { map: [m.a, m.b, m.c, m.d], n: params.n(), kappa: params.kappa(), build_seed: seed, version: CODE_VERSION.into() }
    }

    /// JSON with sorted keys.
    pub fn canonical(&self) -> String {
        let v: serde_json::Value = serde_json::to_value(self).expect("key serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn digest(&self) -> String {
        let h = Sha256::digest(self.canonical().as_bytes());
        h.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    key: CacheKey,
    unitarity_residual: f64,
    egorov_residual: f64,
}

/// Where a propagator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Built,
    Cached,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Built => "built",
            Origin::Cached => "cached",
        }
    }
}

pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn disabled() -> Self {
        Cache { dir: None }
    }

    pub fn at(dir: PathBuf) -> Self {
        Cache { dir: Some(dir) }
    }

    /// `--cache-dir`, then `CATLAB_CACHE_DIR`, then the user cache directory.
    pub fn resolve(flag: Option<PathBuf>, no_cache: bool) -> Self {
        if no_cache {
            return Cache::disabled();
        }
        let dir = flag
            .or_else(|| std::env::var_os("CATLAB_CACHE_DIR").map(PathBuf::from))
            .or_else(|| std::env::var_os("XDG_CACHE_HOME").map(|d| PathBuf::from(d).join("catlab")))
            .or_else(|| std::env::var_os("HOME").map(|d| PathBuf::from(d).join(".cache").join("catlab")))
            .unwrap_or_else(|| PathBuf::from(".catlab-cache"));
        Cache::at(dir)
    }

    pub fn propagator(&self, params: &SpaceParams, m: &CatMatrix, seed: u64) -> Result<(Propagator, Origin)> {
        let Some(dir) = &self.dir else {
            return Ok((build_propagator(params, m, seed)?, Origin::Built));
        };
        fs::create_dir_all(dir).with_context(|| format!("creating cache directory {}", dir.display()))?;
        let key = CacheKey::new(params, m, seed);
        let stem = key.digest();
        let path = dir.join(format!("{stem}.bin"));
        if let Some(p) = load(&path, &key, params, m)? {
            return Ok((p, Origin::Cached));
        }
        let _lock = Lock::acquire(&dir.join(format!("{stem}.lock")))?;
        // another process may have finished while we waited
        if let Some(p) = load(&path, &key, params, m)? {
            return Ok((p, Origin::Cached));
        }
        let p = build_propagator(params, m, seed)?;
        store(&path, &key, &p)?;
        Ok((p, Origin::Built))
    }
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(path: &Path) -> Result<Lock> {
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(path) {
                Ok(_) => return Ok(Lock(path.to_path_buf())),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if start.elapsed() > Duration::from_secs(1800) {
                        bail!("cache lock {} held for over 30 minutes", path.display());
                    }
                    std::thread::sleep(Duration::from_millis(100));
                }
                Err(e) => return Err(e).with_context(|| format!("creating lock {}", path.display())),
            }
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn load(path: &Path, key: &CacheKey, params: &SpaceParams, m: &CatMatrix) -> Result<Option<Propagator>> {
    let mut f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e).with_context(|| format!("opening {}", path.display())),
    };
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    let Some(rest) = bytes.strip_prefix(MAGIC) else { return Ok(None) };
    if rest.len() < 8 {
        return Ok(None);
    }
    let hlen = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
    let rest = &rest[8..];
    if rest.len() < hlen {
        return Ok(None);
    }
    let Ok(header) = serde_json::from_slice::<Header>(&rest[..hlen]) else { return Ok(None) };
    if header.key != *key {
        return Ok(None);
    }
    let n = key.n;
    let data = &rest[hlen..];
    if data.len() != 16 * n * n {
        return Ok(None);
    }
    let f64_at = |i: usize| f64::from_le_bytes(data[8 * i..8 * i + 8].try_into().unwrap());
    let u = Mat::from_fn(n, n, |i, j| {
        let k = 2 * (j * n + i);
        Complex64::new(f64_at(k), f64_at(k + 1))
    });
    Ok(Some(Propagator {
        params: *params,
        map: *m,
        u,
        unitarity_residual: header.unitarity_residual,
        egorov_residual: header.egorov_residual,
        build_seed: key.build_seed,
    }))
}

fn store(path: &Path, key: &CacheKey, p: &Propagator) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        key: key.clone(),
        unitarity_residual: p.unitarity_residual,
        egorov_residual: p.egorov_residual,
    })?;
    let n = p.n();
    let mut buf = Vec::with_capacity(16 + header.len() + 16 * n * n);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for j in 0..n {
        for i in 0..n {
            let z = p.u[(i, j)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&buf)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
