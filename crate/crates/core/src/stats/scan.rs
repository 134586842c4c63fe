//! Sup deviations over translated sandwich members and exceptional sets.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{moment, MatrixElementTable};
use crate::bsapprox::{Pairing, SandwichPair, TrigPolynomial};
use crate::error::{CatError, Result};
use crate::fft::Inverse2d;
use crate::hilbert::{QuantumState, TranslationIndex};

/// Sup-deviation estimate for one state and one member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSup {
    /// Largest deviation over the evaluation grid.
    pub grid_max: f64,
    /// Lipschitz allowance between grid points.
    pub margin: f64,
}

impl StateSup {
    pub fn grid_upper(&self) -> f64 {
        self.grid_max + self.margin
    }
}

/// Per-member data shared by all states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberDeviations {
    pub mean: f64,
    /// `|b̃(n)/b̃(0)|` aligned with the table modes.
    pub ratios: Vec<f64>,
    pub states: Vec<StateSup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupDeviations {
    pub n_dim: usize,
    pub basis_id: String,
    pub dim: usize,
    pub radius: f64,
    pub degree: usize,
    pub grid: usize,
    pub minus: MemberDeviations,
    pub plus: MemberDeviations,
}

/// Table mode paired with a polynomial coefficient index.
fn table_mode(dim: usize, n: (i64, i64)) -> TranslationIndex {
    if dim == 1 {
        TranslationIndex(0, n.0)
    } else {
        TranslationIndex(n.0, n.1)
    }
}

/// `sup_x |⟨Op(b^±_x) φ_j, φ_j⟩ / b̃^±(0) − 1|` for all states, where
/// `b_x = b(· − x)`.
///
/// The deviation is a trigonometric polynomial in `x`; it is evaluated on a
/// `G^d` grid by FFT and the grid maximum is padded by its Lipschitz bound
/// times the covering radius.
pub fn sup_deviation(t: &MatrixElementTable, pair: &SandwichPair, grid: Option<usize>) -> Result<SupDeviations> {
    let g = grid.unwrap_or(4 * (2 * pair.degree + 1));
    if g < 2 * pair.degree + 1 {
        return Err(CatError::OutOfRange(format!("grid {g} aliases degree {}", pair.degree)));
    }
    let minus = member(t, &pair.minorant, pair.dim, g)?;
    let plus = member(t, &pair.majorant, pair.dim, g)?;
    Ok(SupDeviations {
        n_dim: t.params.n(),
        basis_id: t.basis_id.clone(),
        dim: pair.dim,
        radius: pair.radius,
        degree: pair.degree,
        grid: g,
        minus,
        plus,
    })
}

fn member(t: &MatrixElementTable, b: &TrigPolynomial, dim: usize, g: usize) -> Result<MemberDeviations> {
    let b = b.with_pairing(Pairing::Symplectic);
    let mean = b.mean().re;
    let mut ratios = vec![0.0; t.modes().len()];
    // (table index, bin, ratio, |n|)
    let mut terms = Vec::new();
    for (n, c) in b.iter() {
        if n == (0, 0) {
            continue;
        }
        let mode = table_mode(dim, n);
        let idx = t
            .mode_index(mode)
            .ok_or_else(|| CatError::OutOfRange(format!("mode {mode:?} missing from matrix-element table")))?;
        let r = c / mean;
        ratios[idx] = r.norm();
        let bin = if dim == 1 {
            (-mode.1).rem_euclid(g as i64) as usize
        } else {
            (-mode.1).rem_euclid(g as i64) as usize * g + mode.0.rem_euclid(g as i64) as usize
        };
        terms.push((idx, bin, r, mode.norm()));
    }
    let rho = if dim == 1 { 0.5 / g as f64 } else { std::f64::consts::SQRT_2 / (2.0 * g as f64) };
    let size = if dim == 1 { g } else { g * g };
    let mut buf = vec![C64::new(0.0, 0.0); size];
    let mut plan2 = (dim == 2).then(|| Inverse2d::new(g));
    let plan1 = rustfft::FftPlanner::new().plan_fft_inverse(g);
    let mut states = Vec::with_capacity(t.states());
    for j in 0..t.states() {
        buf.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        let mut lip = 0.0;
        for &(idx, bin, r, norm) in &terms {
            let c = t.row_at(idx)[j];
            buf[bin] += r * c;
            lip += norm * r.norm() * c.norm();
        }
        match plan2.as_mut() {
            Some(p) => p.process(&mut buf),
            None => plan1.process(&mut buf),
        }
        let grid_max = buf.iter().map(|z| z.norm()).fold(0.0, f64::max);
        states.push(StateSup { grid_max, margin: 2.0 * PI * lip * rho });
    }
    Ok(MemberDeviations { mean, ratios, states })
}

/// One member's exceptional set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalSet {
    pub grid_max: Vec<f64>,
    pub margin: Vec<f64>,
    /// `(Σ |b̃(n)/b̃(0)|^{p'})^{p/p'}`.
    pub holder_constant: f64,
    /// Per-state `(holder_constant · Σ_n |c[n][j]|^p)^{1/p}`.
    pub holder_sup: Vec<f64>,
    /// `min(grid upper bound, holder_sup)`.
    pub upper: Vec<f64>,
    pub members: Vec<usize>,
    pub density: f64,
    /// `holder_constant · Σ_n V_p(n) / L^p`.
    pub bound: f64,
    /// Smallest `1 − grid_max^p / holder_sup^p`.
    pub min_holder_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub n_dim: usize,
    pub basis_id: String,
    pub dim: usize,
    pub radius: f64,
    pub degree: usize,
    pub threshold: f64,
    pub p: f64,
    pub grid: usize,
    pub minus: ExceptionalSet,
    pub plus: ExceptionalSet,
    pub union_density: f64,
    /// Indices outside both exceptional sets.
    pub good_states: Vec<usize>,
}

impl ScanReport {
    /// Every state obeys the Hölder chain up to relative slack `−1e−12`.
    pub fn holder_chain_ok(&self) -> bool {
        self.minus.min_holder_slack >= -1e-12 && self.plus.min_holder_slack >= -1e-12
    }
}

/// Classify states whose sup deviation reaches `threshold`.
///
/// The Hölder sums run over the table modes with `1 ≤ |n| ≤ D`.
pub fn exceptional_sets(t: &MatrixElementTable, sups: &SupDeviations, threshold: f64, p: f64) -> Result<ScanReport> {
    if p < 1.0 {
        return Err(CatError::OutOfRange(format!("p = {p} < 1")));
    }
    if !(threshold > 0.0) {
        return Err(CatError::OutOfRange(format!("threshold {threshold} must be positive")));
    }
    if sups.n_dim != t.params.n() || sups.minus.ratios.len() != t.modes().len() {
        return Err(CatError::MismatchedParams(sups.n_dim, t.params.n()));
    }
    let d = sups.degree as f64;
    let in_range: Vec<usize> = t
        .modes()
        .iter()
        .enumerate()
        .filter(|(_, m)| {
            let ok_dim = sups.dim == 2 || m.0 == 0;
            ok_dim && !m.is_zero() && m.norm() <= d
        })
        .map(|(i, _)| i)
        .collect();
    let mut vsum = 0.0;
    for &i in &in_range {
        vsum += moment(t, t.modes()[i], p)?;
    }
    let cpow: Vec<f64> = (0..t.states())
        .map(|j| in_range.iter().map(|&i| t.row_at(i)[j].norm().powf(p)).sum())
        .collect();
    let classify = |m: &MemberDeviations| -> ExceptionalSet {
        let hc = holder_constant(&in_range.iter().map(|&i| m.ratios[i]).collect::<Vec<_>>(), p);
        let mut holder_sup = Vec::with_capacity(m.states.len());
        let mut upper = Vec::with_capacity(m.states.len());
        let mut members = Vec::new();
        let mut slack = f64::INFINITY;
        for (j, s) in m.states.iter().enumerate() {
            let h = hc * cpow[j];
            let hs = h.powf(1.0 / p);
            if h > 0.0 {
                slack = slack.min(1.0 - s.grid_max.powf(p) / h);
            } else if s.grid_max > 1e-14 {
                slack = slack.min(-1.0);
            }
            let u = s.grid_upper().min(hs);
            if u >= threshold {
                members.push(j);
            }
            holder_sup.push(hs);
            upper.push(u);
        }
        let n = m.states.len() as f64;
        ExceptionalSet {
            grid_max: m.states.iter().map(|s| s.grid_max).collect(),
            margin: m.states.iter().map(|s| s.margin).collect(),
            holder_constant: hc,
            holder_sup,
            upper,
            density: members.len() as f64 / n,
            members,
            bound: hc * vsum / threshold.powf(p),
            min_holder_slack: if slack.is_finite() { slack } else { 1.0 },
        }
    };
    let minus = classify(&sups.minus);
    let plus = classify(&sups.plus);
    let mut bad = vec![false; t.states()];
    for &j in minus.members.iter().chain(&plus.members) {
        bad[j] = true;
    }
    let good_states: Vec<usize> = (0..t.states()).filter(|&j| !bad[j]).collect();
    Ok(ScanReport {
        n_dim: sups.n_dim,
        basis_id: sups.basis_id.clone(),
        dim: sups.dim,
        radius: sups.radius,
        degree: sups.degree,
        threshold,
        p,
        grid: sups.grid,
        union_density: 1.0 - good_states.len() as f64 / t.states() as f64,
        minus,
        plus,
        good_states,
    })
}

/// `(Σ |r|^{p'})^{p/p'}` with `1/p + 1/p' = 1`.
fn holder_constant(r: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        return r.iter().copied().fold(0.0, f64::max);
    }
    let q = p / (p - 1.0);
    r.iter().map(|x| x.powf(q)).sum::<f64>().powf(p / q)
}

/// `(1/N) Σ_{k : d(q_k, q) ≤ r} |Ψ(k)|²` with `d` the circle distance.
pub fn physical_mass(psi: &QuantumState, q: f64, r: f64) -> f64 {
    let params = psi.params();
    let n = params.n();
    psi.amplitudes()
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let d = (params.position(*k) - q).rem_euclid(1.0);
            d.min(1.0 - d) <= r
        })
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        / n as f64
}

/// `⟨Op(a) Ψ, Ψ⟩ = (1/N) Σ_k a(q_k) |Ψ(k)|²` for a 1D polynomial in position.
pub fn position_expectation(a: &TrigPolynomial, psi: &QuantumState) -> Result<f64> {
    if a.dim() != 1 {
        return Err(CatError::OutOfRange("position observable must be one-dimensional".into()));
    }
    let params = psi.params();
    Ok(psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, z)| a.eval([params.position(k), 0.0]).re * z.norm_sqr())
        .sum::<f64>()
        / params.n() as f64)
}

/// Physical-space sandwich `⟨Op(b⁻_q)Ψ,Ψ⟩ ≤ mass ≤ ⟨Op(b⁺_q)Ψ,Ψ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSandwich {
    pub lower: f64,
    pub mass: f64,
    pub upper: f64,
}

impl MassSandwich {
    pub fn holds(&self, tol: f64) -> bool {
        self.lower <= self.mass + tol && self.mass <= self.upper + tol
    }
}

pub fn mass_sandwich(pair: &SandwichPair, psi: &QuantumState, q: f64) -> Result<MassSandwich> {
    Ok(MassProfile::new(pair, psi.params(), q)?.apply(psi))
}

/// Per-site weights of both translated members and of the ball indicator.
#[derive(Debug, Clone)]
pub struct MassProfile {
    lower: Vec<f64>,
    upper: Vec<f64>,
    inside: Vec<bool>,
}

impl MassProfile {
    pub fn new(pair: &SandwichPair, params: &crate::hilbert::SpaceParams, q: f64) -> Result<Self> {
        if pair.dim != 1 {
            return Err(CatError::OutOfRange("mass sandwich needs a 1D pair".into()));
        }
        let p = pair.translate([q, 0.0]);
        let sites: Vec<f64> = (0..params.n()).map(|k| params.position(k)).collect();
        Ok(MassProfile {
            lower: sites.iter().map(|&x| p.minorant.eval([x, 0.0]).re).collect(),
            upper: sites.iter().map(|&x| p.majorant.eval([x, 0.0]).re).collect(),
            inside: sites
                .iter()
                .map(|&x| {
                    let d = (x - q).rem_euclid(1.0);
                    d.min(1.0 - d) <= pair.radius
                })
                .collect(),
        })
    }

    pub fn apply(&self, psi: &QuantumState) -> MassSandwich {
        let n = self.lower.len() as f64;
        let (mut lower, mut mass, mut upper) = (0.0, 0.0, 0.0);
        for (k, z) in psi.amplitudes().iter().enumerate() {
            let w = z.norm_sqr();
            lower += self.lower[k] * w;
            upper += self.upper[k] * w;
            if self.inside[k] {
                mass += w;
            }
        }
        MassSandwich { lower: lower / n, mass: mass / n, upper: upper / n }
    }
}
