//! Scaled-down quantum ergodicity experiments and 4-moment scaling fits.

use serde::{Deserialize, Serialize};

use super::scan::{exceptional_sets, sup_deviation, ScanReport};
use super::{ehrenfest_time, matrix_elements, matrix_elements_for, moment, position_modes, MatrixElementTable};
use crate::arithmetic::{lyapunov, period, CatMatrix};
use crate::bsapprox::{ball_pair_2d, interval_pair};
use crate::error::{CatError, Result};
use crate::hilbert::{SpaceParams, TranslationIndex};
use crate::propagator::{
    auto_kappa, eigendecompose, hecke_basis, hecke_generators, quantize_commutant, EigenData, Propagator,
    DEFAULT_CLUSTER_TOL,
};

/// Scale-exponent thresholds of the theorems being scaled down.
pub const LOG_PHYSICAL_ALPHA_MAX: f64 = 1.0 / 2.0;
pub const LOG_QE_ALPHA_MAX: f64 = 1.0 / 4.0;
pub const POLY_PHYSICAL_ALPHA_MAX: f64 = 1.0 / 12.0;
pub const POLY_QE_ALPHA_MAX: f64 = 1.0 / 16.0;
pub const HECKE_PHYSICAL_ALPHA_MAX: f64 = 1.0 / 10.0;
pub const HECKE_QE_ALPHA_MAX: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    LogPhysical,
    LogQe,
    PolyPhysical,
    PolyQe,
    HeckePhysical,
    HeckeQe,
}

impl Theorem {
    pub fn alpha_max(self) -> f64 {
        match self {
            Theorem::LogPhysical => LOG_PHYSICAL_ALPHA_MAX,
            Theorem::LogQe => LOG_QE_ALPHA_MAX,
            Theorem::PolyPhysical => POLY_PHYSICAL_ALPHA_MAX,
            Theorem::PolyQe => POLY_QE_ALPHA_MAX,
            Theorem::HeckePhysical => HECKE_PHYSICAL_ALPHA_MAX,
            Theorem::HeckeQe => HECKE_QE_ALPHA_MAX,
        }
    }

    /// 1 for position balls, 2 for phase-space balls.
    pub fn dim(self) -> usize {
        match self {
            Theorem::LogPhysical | Theorem::PolyPhysical | Theorem::HeckePhysical => 1,
            _ => 2,
        }
    }

    pub fn logarithmic(self) -> bool {
        matches!(self, Theorem::LogPhysical | Theorem::LogQe)
    }

    /// Threshold exponent for `D = c·(scale)^β`, with `L = scale^{−γ}`.
    pub fn gamma(self, beta: f64, eps: f64) -> f64 {
        match self {
            Theorem::LogPhysical => (1.0 - 2.0 * beta) / 3.0,
            Theorem::LogQe => (1.0 - 4.0 * beta) / 3.0,
            Theorem::PolyPhysical => (1.0 - (12.0 + eps) * beta) / 4.0,
            Theorem::PolyQe => (1.0 - (16.0 + eps) * beta) / 4.0,
            Theorem::HeckePhysical => (2.0 - eps - 20.0 * beta) / 8.0,
            Theorem::HeckeQe => (2.0 - eps - 24.0 * beta) / 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisKind {
    Generic,
    Rotated { seed: u64 },
    Hecke { generators: usize, cap: usize, seed: u64 },
}

impl BasisKind {
    pub fn id(&self) -> String {
        match self {
            BasisKind::Generic => "generic".into(),
            BasisKind::Rotated { seed } => format!("rotated:{seed}"),
            BasisKind::Hecke { generators, cap, seed } => format!("hecke:{generators}:{cap}:{seed}"),
        }
    }
}

fn default_cap() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QeConfig {
    pub map: [i64; 4],
    pub n_values: Vec<usize>,
    /// `None` (or `"auto"`) resolves through the admissible-κ preference order.
    #[serde(default, deserialize_with = "kappa_or_auto")]
    pub kappa: Option<[f64; 2]>,
    pub theorem: Theorem,
    pub alpha: f64,
    #[serde(default = "default_cap")]
    pub radius_cap: f64,
    pub degree_prefactor: f64,
    pub beta: f64,
    /// Overrides the theorem's γ formula.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub threshold_prefactor: f64,
    pub p: f64,
    #[serde(default)]
    pub grid: Option<usize>,
    pub basis: BasisKind,
    #[serde(default)]
    pub build_seed: u64,
    /// Allowed rise in density between consecutive N for the trend flag.
    #[serde(default = "trend_tol")]
    pub trend_tolerance: f64,
}

fn trend_tol() -> f64 {
    0.05
}

pub fn kappa_or_auto<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<[f64; 2]>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum K {
        Tag(String),
        Fixed([f64; 2]),
    }
    match Option::<K>::deserialize(d)? {
        None => Ok(None),
        Some(K::Fixed(k)) => Ok(Some(k)),
        Some(K::Tag(t)) if t == "auto" => Ok(None),
        Some(K::Tag(t)) => Err(serde::de::Error::custom(format!("kappa: expected \"auto\" or [k1, k2], got {t:?}"))),
    }
}

impl QeConfig {
    pub fn cat_matrix(&self) -> Result<CatMatrix> {
        let [a, b, c, d] = self.map;
        CatMatrix::new(a, b, c, d)
    }

    pub fn validate(&self) -> Result<()> {
        self.cat_matrix()?;
        let bad = |f: &str, why: String| Err(CatError::OutOfRange(format!("{f}: {why}")));
        if self.n_values.is_empty() {
            return bad("n_values", "empty".into());
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < 2) {
            return bad("n_values", format!("{n} < 2"));
        }
        if !(self.alpha >= 0.0 && self.alpha < self.theorem.alpha_max()) {
            return bad("alpha", format!("{} outside [0, {})", self.alpha, self.theorem.alpha_max()));
        }
        if !(self.radius_cap > 0.0 && self.radius_cap <= 0.5) {
            return bad("radius_cap", format!("{} outside (0, 1/2]", self.radius_cap));
        }
        if !(self.beta > 0.0 && self.degree_prefactor > 0.0) {
            return bad("beta", "degree law must be increasing".into());
        }
        if ![1.0, 2.0, 4.0].contains(&self.p) {
            return bad("p", format!("{} not in {{1, 2, 4}}", self.p));
        }
        if !(self.threshold_prefactor > 0.0) {
            return bad("threshold_prefactor", "must be positive".into());
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon", "must be nonnegative".into());
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or_else(|| self.theorem.gamma(self.beta, self.epsilon))
    }

    fn scale(&self, n: usize) -> f64 {
        if self.theorem.logarithmic() {
            (n as f64).ln()
        } else {
            n as f64
        }
    }

    pub fn radius(&self, n: usize) -> f64 {
        self.scale(n).powf(-self.alpha).min(self.radius_cap)
    }

    pub fn degree(&self, n: usize) -> usize {
        (self.degree_prefactor * self.scale(n).powf(self.beta)).ceil() as usize
    }

    pub fn threshold(&self, n: usize) -> f64 {
        self.threshold_prefactor * self.scale(n).powf(-self.gamma())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QeRow {
    pub n: usize,
    pub kappa: [f64; 2],
    pub radius: f64,
    pub degree: usize,
    pub threshold: f64,
    pub period: u64,
    pub ehrenfest_time: f64,
    pub density_minus: f64,
    pub density_plus: f64,
    pub union_density: f64,
    pub bound_minus: f64,
    pub bound_plus: f64,
    pub max_sup_minus: f64,
    pub max_sup_plus: f64,
    pub holder_chain_ok: bool,
    pub unitarity_residual: f64,
    pub egorov_residual: f64,
    pub clusters: usize,
    pub max_cluster: usize,
    pub basis_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QeReport {
    pub config: QeConfig,
    pub gamma: f64,
    pub alpha_max: f64,
    pub rows: Vec<QeRow>,
    pub scans: Vec<ScanReport>,
    /// Union density never rises by more than the trend tolerance.
    pub non_increasing: bool,
    pub final_density: f64,
    /// Every density is within its analytic bound.
    pub bounds_hold: bool,
}

/// Source of propagators; lets callers cache builds.
pub type Provider<'a> = dyn FnMut(&SpaceParams, &CatMatrix, u64) -> Result<Propagator> + 'a;

/// Eigenbasis of the requested kind.
pub fn basis_for(p: &Propagator, kind: &BasisKind) -> Result<EigenData> {
    match *kind {
        BasisKind::Generic => eigendecompose(p, None, DEFAULT_CLUSTER_TOL),
        BasisKind::Rotated { seed } => eigendecompose(p, Some(seed), DEFAULT_CLUSTER_TOL),
        BasisKind::Hecke { generators, cap, seed } => {
            let n = p.n();
            let family = hecke_generators(&p.map, n, generators, cap)
                .iter()
                .map(|b| quantize_commutant(&p.params, b, p))
                .collect::<Result<Vec<_>>>()?;
            Ok(hecke_basis(p, family, seed, 8, DEFAULT_CLUSTER_TOL)?.joint_basis)
        }
    }
}

pub fn qe_experiment(config: &QeConfig, provider: &mut Provider<'_>) -> Result<QeReport> {
    config.validate()?;
    let m = config.cat_matrix()?;
    let lambda = lyapunov(&m)?;
    let dim = config.theorem.dim();
    let mut rows = Vec::new();
    let mut scans = Vec::new();
    for &n in &config.n_values {
        let kappa = match config.kappa {
            Some(k) => k,
            None => auto_kappa(&m, n).ok_or(CatError::ZeroProjection(0.0, 0.0))?,
        };
        let params = SpaceParams::new(n, kappa)?;
        let prop = provider(&params, &m, config.build_seed)?;
        let e = basis_for(&prop, &config.basis)?;
        let r = config.radius(n);
        let d = config.degree(n);
        let pair = if dim == 1 { interval_pair(r, d)? } else { ball_pair_2d(r, d)? };
        let table = if dim == 1 {
            matrix_elements_for(&e, position_modes(d), d, &config.basis.id())
        } else {
            matrix_elements(&e, d, &config.basis.id())
        };
        let sups = sup_deviation(&table, &pair, config.grid)?;
        let scan = exceptional_sets(&table, &sups, config.threshold(n), config.p)?;
        rows.push(QeRow {
            n,
            kappa: params.kappa(),
            radius: r,
            degree: d,
            threshold: scan.threshold,
            period: period(&m, n as u64),
            ehrenfest_time: ehrenfest_time(n, lambda),
            density_minus: scan.minus.density,
            density_plus: scan.plus.density,
            union_density: scan.union_density,
            bound_minus: scan.minus.bound,
            bound_plus: scan.plus.bound,
            max_sup_minus: scan.minus.upper.iter().copied().fold(0.0, f64::max),
            max_sup_plus: scan.plus.upper.iter().copied().fold(0.0, f64::max),
            holder_chain_ok: scan.holder_chain_ok(),
            unitarity_residual: prop.unitarity_residual,
            egorov_residual: prop.egorov_residual,
            clusters: e.clusters.len(),
            max_cluster: e.max_cluster_size(),
            basis_seed: e.basis_seed,
        });
        scans.push(scan);
    }
    let non_increasing = rows.windows(2).all(|w| w[1].union_density <= w[0].union_density + config.trend_tolerance);
    let bounds_hold = rows.iter().all(|r| {
        r.holder_chain_ok
            && r.density_minus <= r.bound_minus + 1e-12
            && r.density_plus <= r.bound_plus + 1e-12
    });
    Ok(QeReport {
        gamma: config.gamma(),
        alpha_max: config.theorem.alpha_max(),
        final_density: rows.last().map(|r| r.union_density).unwrap_or(0.0),
        non_increasing,
        bounds_hold,
        rows,
        scans,
        config: config.clone(),
    })
}

/// One `(N, V₄)` observation with the sanity data of its table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct V4Row {
    pub n: usize,
    pub mode: (i64, i64),
    pub v2: f64,
    pub v4: f64,
    /// `max_j |c[n][j]|²`.
    pub max_c2: f64,
}

impl V4Row {
    pub fn from_table(t: &MatrixElementTable, mode: TranslationIndex) -> Result<Self> {
        let row = t.row(mode).ok_or_else(|| CatError::OutOfRange(format!("mode {mode:?} not in table")))?;
        Ok(V4Row {
            n: t.params.n(),
            mode: (mode.0, mode.1),
            v2: moment(t, mode, 2.0)?,
            v4: moment(t, mode, 4.0)?,
            max_c2: row.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max),
        })
    }

    /// Power-mean ceiling `V₄ ≤ V₂ · max|c|²`.
    pub fn sane(&self) -> bool {
        self.v4 <= self.v2 * self.max_c2 * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum V4Model {
    /// `V₄ ≈ C / (N e^{(log N)^δ})`.
    Kr2,
    /// `V₄ ≈ C / N^{2−ε}`.
    Hecke,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct V4Fit {
    pub model: V4Model,
    /// Least-squares slope of `log V₄` against `log N`.
    pub slope: f64,
    /// Intercept `log C`.
    pub intercept: f64,
    pub residuals: Vec<f64>,
    /// Model slope: −2 for Hecke, −1 before the sub-power correction.
    pub reference_slope: f64,
    /// Best δ of the corrected model on a grid over (0, 1]; KR2 only.
    pub correction_exponent: Option<f64>,
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn v4_scaling_fit(rows: &[V4Row], model: V4Model) -> Result<V4Fit> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 5 {
        return Err(CatError::InsufficientData(format!("{} distinct N, need 5", ns.len())));
    }
    if let Some(r) = rows.iter().find(|r| !(r.v4 > 0.0)) {
        return Err(CatError::InsufficientData(format!("nonpositive V4 at N = {}", r.n)));
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.v4.ln()).collect();
    let (slope, intercept) = linear_fit(&x, &y);
    let residuals = x.iter().zip(&y).map(|(a, b)| b - (intercept + slope * a)).collect();
    let correction_exponent = match model {
        V4Model::Hecke => None,
        V4Model::Kr2 => {
            // log V₄ + log N = log C − (log N)^δ, linear in log C for fixed δ
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b + a).collect();
            let mut best = (f64::INFINITY, 0.0);
            for i in 1..=1000 {
                let delta = i as f64 / 1000.0;
                let c = z.iter().zip(&x).map(|(zi, xi)| zi + xi.powf(delta)).sum::<f64>() / z.len() as f64;
                let sse: f64 = z.iter().zip(&x).map(|(zi, xi)| (zi - c + xi.powf(delta)).powi(2)).sum();
                if sse < best.0 {
                    best = (sse, delta);
                }
            }
            Some(best.1)
        }
    };
    Ok(V4Fit {
        model,
        slope,
        intercept,
        residuals,
        reference_slope: if model == V4Model::Hecke { -2.0 } else { -1.0 },
        correction_exponent,
    })
}

/// V₄ rows over several N for one basis kind.
pub fn v4_scan(
    m: &CatMatrix,
    ns: &[usize],
    mode: TranslationIndex,
    basis: &BasisKind,
    build_seed: u64,
    provider: &mut Provider<'_>,
) -> Result<Vec<V4Row>> {
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let kappa = auto_kappa(m, n).ok_or(CatError::ZeroProjection(0.0, 0.0))?;
        let params = SpaceParams::new(n, kappa)?;
        let p = provider(&params, m, build_seed)?;
        let e = basis_for(&p, basis)?;
        let t = matrix_elements_for(&e, vec![mode], mode.norm().ceil() as usize, &basis.id());
        out.push(V4Row::from_table(&t, mode)?);
    }
    Ok(out)
}
