//! The quantized cat map as the intertwiner `U⁻¹ T_N(n) U = T_N(nM)`.
//!
//! `U` spans the fixed space of the twisted action
//! `g_n(X) = T_N(n) X T_N(nM)*`, which is a genuine action of `Z²`
//! because `M` preserves the symplectic product. It descends to
//! `(Z/N)²` exactly when `T_N(N e_i)` and `T_N(N e_i M)` carry the same
//! scalar, and then the average over `[0, N)²` is the orthogonal
//! projection onto a one-dimensional space.

use faer::{Mat, MatRef, Side};
use faer::linalg::solvers::Solve;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arithmetic::{commutant_mod, sl2_lifts, CatMatrix, ModMatrix};
use crate::error::{CatError, Result};
use crate::hilbert::{QuantumState, SpaceParams, Translation, TranslationIndex};
use crate::linalg;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Default degeneracy tolerance on eigenphases.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8 * 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct Propagator {
    pub params: SpaceParams,
    pub map: CatMatrix,
    pub u: Mat<C64>,
    pub unitarity_residual: f64,
    pub egorov_residual: f64,
    pub build_seed: u64,
}

/// Whether `T_N(N e_i)` and `T_N(N e_i M)` agree for both unit vectors.
pub fn characters_match(params: &SpaceParams, m: &CatMatrix) -> bool {
    let n = params.n() as i64;
    [(1i64, 0i64), (0, 1)].iter().all(|&(x, y)| {
        let v = TranslationIndex(n * x, n * y);
        let s0 = Translation::new(params, v).scalar();
        let s1 = Translation::new(params, v.act(m)).scalar();
        match (s0, s1) {
            (Some(a), Some(b)) => (a - b).norm() < 1e-9,
            _ => false,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaVerdict {
    pub kappa: [f64; 2],
    pub admissible: bool,
}

pub const KAPPA_CANDIDATES: [[f64; 2]; 4] = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]];

/// Verdicts for `κ ∈ {0, 1/2}²` in the preferred order.
pub fn admissible_kappa(m: &CatMatrix, n: usize) -> Vec<KappaVerdict> {
    KAPPA_CANDIDATES
        .iter()
        .map(|&kappa| {
            let p = SpaceParams::new(n, kappa).expect("N >= 1");
            KappaVerdict { kappa, admissible: characters_match(&p, m) }
        })
        .collect()
}

/// First admissible candidate.
pub fn auto_kappa(m: &CatMatrix, n: usize) -> Option<[f64; 2]> {
    admissible_kappa(m, n).into_iter().find(|v| v.admissible).map(|v| v.kappa)
}

// Column-major N×N buffer.
struct Buf {
    n: usize,
    data: Vec<C64>,
}

impl Buf {
    fn zeros(n: usize) -> Self {
        Buf { n, data: vec![ZERO; n * n] }
    }
    fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }
}

// acc += g_n(x) with g_n(X)[i][j] = α_n(i) conj(α_m(j)) X[i − s_n][j − s_m].
fn accumulate_twisted(acc: &mut Buf, x: &Buf, tn: &Translation, tm: &Translation) {
    let n = x.n;
    let (sn, sm) = (tn.shift, tm.shift);
    for j in 0..n {
        let beta = tm.alpha[j].conj();
        let src = x.col((j + n - sm) % n);
        let dst = &mut acc.data[j * n..(j + 1) * n];
        // rows i ≥ sn read src[i − sn]; rows i < sn wrap to src[i + n − sn]
        for i in 0..sn {
            dst[i] += tn.alpha[i] * beta * src[i + n - sn];
        }
        for i in sn..n {
            dst[i] += tn.alpha[i] * beta * src[i - sn];
        }
    }
}

fn project(params: &SpaceParams, lift: &CatMatrix, x: Buf) -> Buf {
    let n = params.n();
    let mut stage = Buf::zeros(n);
    for k in 0..n as i64 {
        let v = TranslationIndex(k, 0);
        accumulate_twisted(&mut stage, &x, &Translation::new(params, v), &Translation::new(params, v.act(lift)));
    }
    let mut out = Buf::zeros(n);
    for k in 0..n as i64 {
        let v = TranslationIndex(0, k);
        accumulate_twisted(&mut out, &stage, &Translation::new(params, v), &Translation::new(params, v.act(lift)));
    }
    out
}

fn fix_global_phase(u: &mut Mat<C64>) {
    let n = u.nrows();
    let mut maxv = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            maxv = maxv.max(u[(i, j)].norm());
        }
    }
    'outer: for j in 0..n {
        for i in 0..n {
            let z = u[(i, j)];
            if z.norm() >= (1.0 - 1e-6) * maxv {
                let ph = z.conj() / z.norm();
                for jj in 0..n {
                    for ii in 0..n {
                        u[(ii, jj)] *= ph;
                    }
                }
                break 'outer;
            }
        }
    }
}

// Newton–Schulz steps toward the polar factor; the averaging sums O(N²)
// terms with heavy cancellation, so the raw projection is only unitary to
// about eps·N².
fn polish_unitary(u: &mut Mat<C64>) {
    let n = u.nrows();
    for _ in 0..3 {
        let mut g = u.adjoint() * &*u;
        for i in 0..n {
            g[(i, i)] -= ONE;
        }
        if g.norm_l2() < 1e-14 * (n as f64).sqrt() {
            break;
        }
        // U (3I − U*U)/2 = U (I − (U*U − I)/2)
        let mut corr = g * faer::Scale(C64::new(-0.5, 0.0));
        for i in 0..n {
            corr[(i, i)] += ONE;
        }
        *u = &*u * &corr;
    }
}

const MAX_ATTEMPTS: usize = 4;

/// The unitary intertwiner for any integer matrix of determinant 1.
pub(crate) fn build_intertwiner(params: &SpaceParams, lift: &CatMatrix, seed: u64) -> Result<Mat<C64>> {
    if lift.det() != 1 {
        return Err(CatError::NotCat(lift.a, lift.b, lift.c, lift.d));
    }
    if !characters_match(params, lift) {
        let k = params.kappa();
        return Err(CatError::ZeroProjection(k[0], k[1]));
    }
    let n = params.n();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let x = linalg::gaussian_matrix(n, n, &mut rng);
        let mut buf = Buf::zeros(n);
        for j in 0..n {
            for i in 0..n {
                buf.data[j * n + i] = x[(i, j)];
            }
        }
        let xnorm = buf.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let p = project(params, lift, buf);
        let pnorm = p.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if pnorm <= 1e-10 * xnorm {
            continue;
        }
        let scale = (n as f64).sqrt() / pnorm;
        let mut u = Mat::from_fn(n, n, |i, j| p.data[j * n + i] * scale);
        polish_unitary(&mut u);
        fix_global_phase(&mut u);
        return Ok(u);
    }
    Err(CatError::NonUnitaryResult(MAX_ATTEMPTS))
}

/// `‖T_N(n) U − U T_N(nM)‖_F`, equal to `‖U⁻¹T_N(n)U − T_N(nM)‖_F` for unitary `U`.
pub fn egorov_residual(params: &SpaceParams, m: &CatMatrix, u: MatRef<'_, C64>, n: TranslationIndex) -> f64 {
    let nn = params.n();
    let tn = Translation::new(params, n);
    let tm = Translation::new(params, n.act(m));
    let mut s = 0.0;
    for j in 0..nn {
        let k = (j + tm.shift) % nn;
        let b = tm.alpha[k];
        for i in 0..nn {
            let lhs = tn.alpha[i] * u[((i + nn - tn.shift) % nn, j)];
            let rhs = u[(i, k)] * b;
            s += (lhs - rhs).norm_sqr();
        }
    }
    s.sqrt()
}

/// Largest Egorov residual over `1 ≤ |n| ≤ d`.
pub fn verify_egorov(p: &Propagator, d: usize) -> f64 {
    TranslationIndex::ball(1.0, d as f64)
        .into_iter()
        .map(|n| egorov_residual(&p.params, &p.map, p.u.as_ref(), n))
        .fold(0.0, f64::max)
}

pub fn build_propagator(params: &SpaceParams, m: &CatMatrix, seed: u64) -> Result<Propagator> {
    if !crate::arithmetic::is_cat(m.entries()) {
        return Err(CatError::NotCat(m.a, m.b, m.c, m.d));
    }
    let u = build_intertwiner(params, m, seed)?;
    Ok(Propagator::from_parts(*params, *m, u, seed))
}

impl Propagator {
    /// Wraps a matrix and measures its residuals.
    pub fn from_parts(params: SpaceParams, map: CatMatrix, u: Mat<C64>, build_seed: u64) -> Self {
        let unitarity_residual = linalg::unitarity_residual(u.as_ref());
        let egorov_residual = generator_egorov_residual(&params, &map, u.as_ref());
        Propagator { params, map, u, unitarity_residual, egorov_residual, build_seed }
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    /// `U^t ψ` by repeated multiplication (`U*` for negative `t`).
    pub fn power_apply(&self, psi: &QuantumState, t: i64) -> QuantumState {
        let n = self.n();
        let mut v = Mat::from_fn(n, 1, |i, _| psi.amplitudes()[i]);
        for _ in 0..t.unsigned_abs() {
            v = if t > 0 { &self.u * &v } else { self.u.adjoint() * &v };
        }
        QuantumState::new(self.params, (0..n).map(|i| v[(i, 0)]).collect()).expect("dimension preserved")
    }

    /// `U^t ψ`; uses the spectral path when `|t|` exceeds `cfg.direct_limit` and eigendata is supplied.
    pub fn propagate(&self, psi: &QuantumState, t: i64, eig: Option<&EigenData>, cfg: &PropagateConfig) -> Result<QuantumState> {
        if t.unsigned_abs() > cfg.max_abs_t {
            return Err(CatError::OutOfRange(format!("|t| = {} exceeds the configured maximum {}", t.unsigned_abs(), cfg.max_abs_t)));
        }
        match eig {
            Some(e) if t.unsigned_abs() > cfg.direct_limit => Ok(e.evolve(psi, t)),
            _ => Ok(self.power_apply(psi, t)),
        }
    }
}

fn generator_egorov_residual(params: &SpaceParams, m: &CatMatrix, u: MatRef<'_, C64>) -> f64 {
    [TranslationIndex(1, 0), TranslationIndex(0, 1), TranslationIndex(1, 1)]
        .into_iter()
        .map(|n| egorov_residual(params, m, u, n))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagateConfig {
    pub max_abs_t: u64,
    pub direct_limit: u64,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        PropagateConfig { max_abs_t: 1_000_000, direct_limit: 64 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenData {
    pub params: SpaceParams,
    /// Ascending, in `[0, 2π)`.
    pub eigenphases: Vec<f64>,
    /// Columns `φ_j` with `(1/N) Σ_k |φ_j(k)|² = 1`.
    pub eigenvectors: Mat<C64>,
    pub clusters: Vec<Vec<usize>>,
    /// Seed of the in-cluster rotations, `None` when they are off.
    pub basis_seed: Option<u64>,
}

impl EigenData {
    pub fn len(&self) -> usize {
        self.eigenphases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenphases.is_empty()
    }

    pub fn state(&self, j: usize) -> QuantumState {
        let n = self.eigenvectors.nrows();
        QuantumState::new(self.params, (0..n).map(|i| self.eigenvectors[(i, j)]).collect()).expect("column length")
    }

    /// Column `j` as a slice-friendly vector.
    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.eigenvectors.nrows()).map(|i| self.eigenvectors[(i, j)]).collect()
    }

    pub fn max_cluster_size(&self) -> usize {
        self.clusters.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `Σ_j e^{itθ_j} ⟨ψ, φ_j⟩ φ_j`.
    pub fn evolve(&self, psi: &QuantumState, t: i64) -> QuantumState {
        let n = self.eigenvectors.nrows();
        let mut out = vec![ZERO; n];
        for j in 0..self.len() {
            let mut c = ZERO;
            for i in 0..n {
                c += psi.amplitudes()[i] * self.eigenvectors[(i, j)].conj();
            }
            c /= n as f64;
            let ph = C64::from_polar(1.0, ((t as f64) * self.eigenphases[j]).rem_euclid(2.0 * std::f64::consts::PI));
            for i in 0..n {
                out[i] += c * ph * self.eigenvectors[(i, j)];
            }
        }
        QuantumState::new(self.params, out).expect("dimension preserved")
    }

    /// `‖U − V diag(e^{iθ}) V⁺‖_F` with `V⁺ = V*/N`.
    pub fn reconstruction_residual(&self, u: MatRef<'_, C64>) -> f64 {
        let n = u.nrows();
        let scaled = Mat::from_fn(n, n, |i, j| self.eigenvectors[(i, j)] * C64::from_polar(1.0, self.eigenphases[j]));
        let r = &scaled * self.eigenvectors.adjoint() * faer::Scale(C64::new(1.0 / n as f64, 0.0));
        linalg::frobenius((r - u).as_ref())
    }

    /// Largest `‖U φ_j − e^{iθ_j} φ_j‖` in the weighted norm.
    pub fn eigen_residual(&self, u: MatRef<'_, C64>) -> f64 {
        let n = u.nrows();
        let uv = u * &self.eigenvectors;
        (0..self.len())
            .map(|j| {
                let z = C64::from_polar(1.0, self.eigenphases[j]);
                ((0..n).map(|i| (uv[(i, j)] - z * self.eigenvectors[(i, j)]).norm_sqr()).sum::<f64>() / n as f64).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

// Cayley transform eigenvectors of a unitary; returns unit columns and Rayleigh phases.
fn cayley_eigen(u: MatRef<'_, C64>, phi: f64) -> Result<(Mat<C64>, Vec<f64>, f64)> {
    let n = u.nrows();
    let w = Mat::from_fn(n, n, |i, j| u[(i, j)] * C64::from_polar(1.0, -phi));
    let plus = Mat::from_fn(n, n, |i, j| if i == j { ONE + w[(i, j)] } else { w[(i, j)] });
    let minus = Mat::from_fn(n, n, |i, j| if i == j { ONE - w[(i, j)] } else { -w[(i, j)] });
    let x = plus.partial_piv_lu().solve(&minus);
    let iu = C64::new(0.0, 1.0);
    let h = Mat::from_fn(n, n, |i, j| (iu * x[(i, j)] + (iu * x[(j, i)]).conj()) * 0.5);
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|e| CatError::Decomposition(format!("{e:?}")))?;
    let q = evd.U().to_owned();
    let uq = u * &q;
    let mut phases = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for j in 0..n {
        let mut z = ZERO;
        for i in 0..n {
            z += q[(i, j)].conj() * uq[(i, j)];
        }
        let mut r = 0.0;
        for i in 0..n {
            r += (uq[(i, j)] - z * q[(i, j)]).norm_sqr();
        }
        worst = worst.max(r.sqrt());
        phases.push(z.arg().rem_euclid(2.0 * std::f64::consts::PI));
    }
    Ok((q, phases, worst))
}

fn largest_gap_center(sorted: &[f64]) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let n = sorted.len();
    let mut best = (sorted[0] + two_pi - sorted[n - 1], sorted[n - 1]);
    for k in 1..n {
        let g = sorted[k] - sorted[k - 1];
        if g > best.0 {
            best = (g, sorted[k - 1]);
        }
    }
    best.1 + best.0 / 2.0
}

/// Groups sorted phases whose neighbours lie within `tol`, joining across `2π`.
pub fn cluster_phases(sorted: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &th) in sorted.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if th - sorted[*c.last().unwrap()] <= tol => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    if clusters.len() > 1 {
        let first = sorted[0];
        let last = *sorted.last().unwrap();
        if first + 2.0 * std::f64::consts::PI - last <= tol {
            let tail = clusters.pop().unwrap();
            clusters[0].splice(0..0, tail);
        }
    }
    clusters
}

/// Spectral decomposition of a unitary matrix.
pub fn eigendecompose_unitary(params: &SpaceParams, u: MatRef<'_, C64>, basis_seed: Option<u64>, cluster_tol: f64) -> Result<EigenData> {
    let n = u.nrows();
    let res = linalg::unitarity_residual(u);
    if res > 1e-6 {
        return Err(CatError::NotUnitary(res));
    }
    let mut phi = 0.4142135623730951;
    let (mut q, mut phases, mut worst) = cayley_eigen(u, phi)?;
    for _ in 0..2 {
        let mut sorted = phases.clone();
        sorted.sort_by(f64::total_cmp);
        let pole = (phi + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI);
        let near = sorted.iter().map(|t| {
            let d = (t - pole).rem_euclid(2.0 * std::f64::consts::PI);
            d.min(2.0 * std::f64::consts::PI - d)
        });
        let dist = near.fold(f64::INFINITY, f64::min);
        if worst <= 1e-11 && dist > 1e-3 / n as f64 {
            break;
        }
        phi = largest_gap_center(&sorted) - std::f64::consts::PI;
        (q, phases, worst) = cayley_eigen(u, phi)?;
    }
    if worst > 1e-9 {
        return Err(CatError::Decomposition(format!("eigenvector residual {worst:e}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    let eigenphases: Vec<f64> = order.iter().map(|&j| phases[j]).collect();
    let root_n = (n as f64).sqrt();
    let mut v = Mat::from_fn(n, n, |i, j| q[(i, order[j])] * root_n);
    let clusters = cluster_phases(&eigenphases, cluster_tol);
    if let Some(seed) = basis_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in clusters.iter().filter(|c| c.len() > 1) {
            let r = linalg::random_unitary(c.len(), &mut rng);
            let block = Mat::from_fn(n, c.len(), |i, k| v[(i, c[k])]);
            let mixed = &block * &r;
            for (k, &j) in c.iter().enumerate() {
                for i in 0..n {
                    v[(i, j)] = mixed[(i, k)];
                }
            }
        }
    }
    Ok(EigenData { params: *params, eigenphases, eigenvectors: v, clusters, basis_seed })
}

/// Eigenphases, eigenvectors and degeneracy clusters of `p.u`.
pub fn eigendecompose(p: &Propagator, basis_seed: Option<u64>, cluster_tol: f64) -> Result<EigenData> {
    eigendecompose_unitary(&p.params, p.u.as_ref(), basis_seed, cluster_tol)
}

/// A quantized commutant element.
#[derive(Debug, Clone)]
pub struct CommutantOperator {
    pub element: ModMatrix,
    /// Integer lift in SL(2, Z), not necessarily hyperbolic.
    pub lift: CatMatrix,
    pub u: Mat<C64>,
    /// `‖U_B U − U U_B‖_F`.
    pub commutation_residual: f64,
}

fn commutator_norm(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    let ab = a * b;
    let ba = b * a;
    linalg::frobenius((ab - ba).as_ref())
}

/// Intertwiner of a lift of `b`, chosen so that it preserves H_{N,κ}.
pub fn quantize_commutant(params: &SpaceParams, b: &ModMatrix, p: &Propagator) -> Result<CommutantOperator> {
    if b.modulus != params.n() as u64 {
        return Err(CatError::MismatchedParams(b.modulus as usize, params.n()));
    }
    let lift = sl2_lifts(b, 256)
        .into_iter()
        .find(|l| characters_match(params, l))
        .ok_or(CatError::NoAdmissibleLift)?;
    let u = build_intertwiner(params, &lift, p.build_seed)?;
    let commutation_residual = commutator_norm(u.as_ref(), p.u.as_ref());
    Ok(CommutantOperator { element: *b, lift, u, commutation_residual })
}

/// Commutant elements of largest order mod `N`, excluding ±Id and `M`.
pub fn hecke_generators(m: &CatMatrix, n: usize, count: usize, cap: usize) -> Vec<ModMatrix> {
    let nn = n as u64;
    let minus_id = ModMatrix::new(-1, 0, 0, -1, nn);
    let mm = m.reduce(nn);
    let mut cands: Vec<(u64, usize, ModMatrix)> = commutant_mod(m, nn, cap)
        .into_iter()
        .enumerate()
        .filter(|(_, b)| !b.is_identity() && *b != minus_id && *b != mm)
        .map(|(i, b)| (b.order(), i, b))
        .collect();
    cands.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
    cands.into_iter().take(count).map(|c| c.2).collect()
}

#[derive(Debug, Clone)]
pub struct HeckeFamily {
    pub generators: Vec<CommutantOperator>,
    pub joint_basis: EigenData,
    /// `joint_eigenvalues[g][j]`: eigenvalue of generator `g` on column `j`.
    pub joint_eigenvalues: Vec<Vec<C64>>,
    /// Generator commutators with `U` followed by pairwise generator commutators.
    pub commutation_residuals: Vec<f64>,
    /// Largest simultaneous-eigenvector residual over all columns and members.
    pub joint_residual: f64,
}

/// Joint eigenbasis of `p.u` and the family, via a random Hermitian combination.
pub fn hecke_basis(p: &Propagator, family: Vec<CommutantOperator>, seed: u64, retries: usize, cluster_tol: f64) -> Result<HeckeFamily> {
    let n = p.n();
    let mut residuals: Vec<f64> = family.iter().map(|g| g.commutation_residual).collect();
    for a in 0..family.len() {
        for b in a + 1..family.len() {
            residuals.push(commutator_norm(family[a].u.as_ref(), family[b].u.as_ref()));
        }
    }
    if let Some(r) = residuals.iter().copied().find(|r| *r > 1e-8) {
        return Err(CatError::Decomposition(format!("family does not commute (residual {r:e})")));
    }
    let members: Vec<MatRef<'_, C64>> = std::iter::once(p.u.as_ref()).chain(family.iter().map(|g| g.u.as_ref())).collect();
    let iu = C64::new(0.0, 1.0);
    for attempt in 0..=retries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let mut h = Mat::<C64>::zeros(n, n);
        for x in &members {
            let (al, be): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            for j in 0..n {
                for i in 0..n {
                    let (xij, xji) = (x[(i, j)], x[(j, i)].conj());
                    h[(i, j)] += (xij + xji) * (0.5 * al) + (xij - xji) * (be * 0.5) / iu;
                }
            }
        }
        let Ok(evd) = h.self_adjoint_eigen(Side::Lower) else { continue };
        let q = evd.U().to_owned();
        let mut worst = 0.0f64;
        let mut values = Vec::with_capacity(members.len());
        for x in &members {
            let xq = *x * &q;
            let mut vals = Vec::with_capacity(n);
            for j in 0..n {
                let mut z = ZERO;
                for i in 0..n {
                    z += q[(i, j)].conj() * xq[(i, j)];
                }
                let r: f64 = (0..n).map(|i| (xq[(i, j)] - z * q[(i, j)]).norm_sqr()).sum();
                worst = worst.max(r.sqrt());
                vals.push(z);
            }
            values.push(vals);
        }
        if worst > 1e-8 {
            continue;
        }
        let phases: Vec<f64> = values[0].iter().map(|z| z.arg().rem_euclid(2.0 * std::f64::consts::PI)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
        let root_n = (n as f64).sqrt();
        let v = Mat::from_fn(n, n, |i, j| q[(i, order[j])] * root_n);
        let eigenphases: Vec<f64> = order.iter().map(|&j| phases[j]).collect();
        let clusters = cluster_phases(&eigenphases, cluster_tol);
        let joint_eigenvalues = values[1..].iter().map(|vals| order.iter().map(|&j| vals[j]).collect()).collect();
        return Ok(HeckeFamily {
            generators: family,
            joint_basis: EigenData { params: p.params, eigenphases, eigenvectors: v, clusters, basis_seed: Some(seed.wrapping_add(attempt as u64)) },
            joint_eigenvalues,
            commutation_residuals: residuals,
            joint_residual: worst,
        });
    }
    Err(CatError::DegenerateCombination(retries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::period;
    use crate::hilbert::translation_matrix;

    fn m2132() -> CatMatrix {
        CatMatrix::new(2, 1, 3, 2).unwrap()
    }

    #[test]
    fn checkerboard_admissible_at_zero() {
        let m = m2132();
        for n in 2..=64 {
            assert!(admissible_kappa(&m, n)[0].admissible, "N={n}");
        }
    }

    #[test]
    fn arnold_has_some_kappa() {
        let m = CatMatrix::arnold();
        for n in 2..=64 {
            let v = admissible_kappa(&m, n);
            assert!(v.iter().any(|k| k.admissible), "N={n}");
            assert_eq!(v[0].admissible, n % 2 == 0);
            assert_eq!(v[3].admissible, n % 2 == 1);
        }
    }

    #[test]
    fn inadmissible_kappa_is_reported() {
        let p = SpaceParams::new(5, [0.0, 0.0]).unwrap();
        assert!(matches!(build_propagator(&p, &CatMatrix::arnold(), 0), Err(CatError::ZeroProjection(..))));
        assert!(build_propagator(&p, &CatMatrix { a: 1, b: 1, c: 0, d: 1 }, 0).is_err());
    }

    #[test]
    fn intertwiner_relation_small() {
        for (n, kappa, m) in [(7usize, [0.5, 0.5], CatMatrix::arnold()), (8, [0.0, 0.0], m2132()), (9, [0.0, 0.0], CatMatrix::new(5, 8, 8, 13).unwrap())] {
            let p = build_propagator(&SpaceParams::new(n, kappa).unwrap(), &m, 3).unwrap();
            assert!(p.unitarity_residual < 1e-12);
            assert!(verify_egorov(&p, 6) < 1e-11, "N={n}");
            // the relation with dense matrices
            let tn = translation_matrix(&p.params, TranslationIndex(1, 2));
            let tm = translation_matrix(&p.params, TranslationIndex(1, 2).act(&m));
            let lhs = p.u.adjoint() * &tn * &p.u;
            assert!(linalg::frobenius((lhs - tm).as_ref()) < 1e-11);
        }
    }

    #[test]
    fn verify_egorov_at_zero_degree() {
        let p = build_propagator(&SpaceParams::periodic(6), &m2132(), 0).unwrap();
        assert_eq!(verify_egorov(&p, 0), 0.0);
    }

    #[test]
    fn second_iterate_relation() {
        let m = m2132();
        let p = build_propagator(&SpaceParams::periodic(16), &m, 1).unwrap();
        let u2 = &p.u * &p.u;
        let m2 = m.compose(&m);
        for n in TranslationIndex::ball(1.0, 4.0) {
            assert!(egorov_residual(&p.params, &m2, u2.as_ref(), n) < 1e-8);
        }
    }

    fn scalar_part(a: &Mat<C64>) -> Option<C64> {
        let n = a.nrows();
        let s = a[(0, 0)];
        let diff = Mat::from_fn(n, n, |i, j| a[(i, j)] - if i == j { s } else { ZERO });
        (linalg::frobenius(diff.as_ref()) < 1e-9).then_some(s)
    }

    #[test]
    fn period_power_is_scalar() {
        // U^P intertwines T(n) with T(n + N k) = ±T(n), so U^P is a scalar or
        // a half-lattice translation and U^{2P} is always scalar
        for (m, kappa, ns) in [(m2132(), [0.0, 0.0], vec![4usize, 10, 16, 25, 32]), (CatMatrix::arnold(), [0.5, 0.5], vec![5, 11, 21, 29])] {
            for n in ns {
                let p = build_propagator(&SpaceParams::new(n, kappa).unwrap(), &m, 2).unwrap();
                let per = period(&m, n as u64) as usize;
                let mut acc = Mat::<C64>::identity(n, n);
                for _ in 0..per {
                    acc = &acc * &p.u;
                }
                let s = scalar_part(&acc).or_else(|| scalar_part(&(&acc * &acc)));
                let s = s.unwrap_or_else(|| panic!("U^2P not scalar at N={n}"));
                assert!((s.norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn propagation_paths() {
        let m = CatMatrix::arnold();
        let params = SpaceParams::new(13, [0.5, 0.5]).unwrap();
        let p = build_propagator(&params, &m, 5).unwrap();
        let e = eigendecompose(&p, None, DEFAULT_CLUSTER_TOL).unwrap();
        let psi = QuantumState::random(params, 8);
        let cfg = PropagateConfig::default();
        assert_eq!(p.propagate(&psi, 0, None, &cfg).unwrap(), psi);
        for t in [-40i64, -3, 1, 7, 33] {
            let a = p.power_apply(&psi, t);
            let b = e.evolve(&psi, t);
            let d: f64 = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm_sqr()).sum();
            assert!((d / 13.0).sqrt() < 1e-8, "t={t}");
        }
        let fwd = p.propagate(&psi, 200, Some(&e), &cfg).unwrap();
        let back = p.propagate(&fwd, -200, Some(&e), &cfg).unwrap();
        let d: f64 = back.amplitudes().iter().zip(psi.amplitudes()).map(|(x, y)| (x - y).norm_sqr()).sum();
        assert!((d / 13.0).sqrt() < 1e-9);
        let tight = PropagateConfig { max_abs_t: 10, direct_limit: 4 };
        assert!(p.propagate(&psi, 11, Some(&e), &tight).is_err());
    }

    #[test]
    fn eigendata_invariants() {
        let m = m2132();
        for (n, seed) in [(16usize, None), (30, Some(4u64)), (32, None)] {
            let p = build_propagator(&SpaceParams::periodic(n), &m, 0).unwrap();
            let e = eigendecompose(&p, seed, DEFAULT_CLUSTER_TOL).unwrap();
            assert_eq!(e.len(), n);
            assert!(e.eigenphases.windows(2).all(|w| w[0] <= w[1]));
            assert!(e.eigen_residual(p.u.as_ref()) < 1e-9);
            assert!(e.reconstruction_residual(p.u.as_ref()) < 1e-9);
            let g = e.eigenvectors.adjoint() * &e.eigenvectors * faer::Scale(C64::new(1.0 / n as f64, 0.0));
            assert!(linalg::unitarity_residual(g.as_ref()).max(linalg::frobenius((g - Mat::<C64>::identity(n, n)).as_ref())) < 1e-10);
            assert_eq!(e.clusters.iter().map(Vec::len).sum::<usize>(), n);
        }
    }

    #[test]
    fn clusters_wrap_around() {
        let c = cluster_phases(&[0.0, 1e-12, 1.0, 1.0 + 1e-10, 2.0 * std::f64::consts::PI - 1e-12], 1e-8);
        assert_eq!(c, vec![vec![4, 0, 1], vec![2, 3]]);
    }

    #[test]
    fn commutant_quantization() {
        let m = CatMatrix::new(5, 8, 8, 13).unwrap();
        let params = SpaceParams::periodic(13);
        let p = build_propagator(&params, &m, 0).unwrap();
        let id = quantize_commutant(&params, &ModMatrix::identity(13), &p).unwrap();
        assert!(linalg::phase_distance(id.u.as_ref(), Mat::<C64>::identity(13, 13).as_ref()) < 1e-10);
        let other = build_propagator(&params, &m, 99).unwrap();
        let um = quantize_commutant(&params, &m.reduce(13), &other).unwrap();
        assert!(linalg::phase_distance(um.u.as_ref(), p.u.as_ref()) < 1e-10);
        for b in hecke_generators(&m, 13, 3, usize::MAX) {
            let q = quantize_commutant(&params, &b, &p).unwrap();
            assert!(q.commutation_residual < 1e-9, "{b:?}");
        }
    }

    #[test]
    fn hecke_basis_is_rigid_at_inert_prime() {
        let m = CatMatrix::new(5, 8, 8, 13).unwrap();
        let params = SpaceParams::periodic(13);
        let p = build_propagator(&params, &m, 0).unwrap();
        let fam: Vec<_> = hecke_generators(&m, 13, 2, usize::MAX).iter().map(|b| quantize_commutant(&params, b, &p).unwrap()).collect();
        let a = hecke_basis(&p, fam.clone(), 1, 5, DEFAULT_CLUSTER_TOL).unwrap();
        let b = hecke_basis(&p, fam, 77, 5, DEFAULT_CLUSTER_TOL).unwrap();
        assert!(a.joint_residual < 1e-8);
        let (va, vb) = (&a.joint_basis.eigenvectors, &b.joint_basis.eigenvectors);
        for j in 0..13 {
            let best = (0..13)
                .map(|k| ((0..13).map(|i| va[(i, j)].conj() * vb[(i, k)]).sum::<C64>() / 13.0).norm())
                .fold(0.0, f64::max);
            assert!((best - 1.0).abs() < 1e-8, "column {j}");
        }
    }

    #[test]
    fn hecke_of_u_alone_matches_spectrum() {
        let m = m2132();
        let p = build_propagator(&SpaceParams::periodic(10), &m, 0).unwrap();
        let h = hecke_basis(&p, vec![], 3, 5, DEFAULT_CLUSTER_TOL).unwrap();
        let e = eigendecompose(&p, None, DEFAULT_CLUSTER_TOL).unwrap();
        for (x, y) in h.joint_basis.eigenphases.iter().zip(&e.eigenphases) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(h.joint_basis.eigen_residual(p.u.as_ref()) < 1e-9);
    }
}
