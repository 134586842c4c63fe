//! The state space H_{N,κ}, translation operators and Weyl quantization.
//!
//! A state is a vector of `N` amplitudes `Ψ(k)` with inner product
//! `⟨Ψ, Φ⟩ = (1/N) Σ_k Ψ(k) conj Φ(k)`. The translation `T_N(n)` acts by
//!
//! ```text
//! (T_N(n)Ψ)(k) = e^{−iπ n₁n₂/N} e^{2πi n₂(k+κ₂)/N} Ψ(k − n₁),
//! Ψ(k + sN) = e^{−2πiκ₁ s} Ψ(k),
//! ```
//!
//! so `T_N(N,0) = e^{2πiκ₁}`, `T_N(0,N) = e^{2πiκ₂}` and
//! `T_N(n)T_N(m) = e^{iπ(n∧m)/N} T_N(n+m)`. Positions sit at `(k+κ₂)/N`.

use std::ops::{Add, Neg, Sub};

use faer::{Mat, MatRef};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arithmetic::CatMatrix;
use crate::bsapprox::poly::{cis_turns, Pairing, TrigPolynomial};
use crate::error::{CatError, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    n: usize,
    kappa: [f64; 2],
}

fn reduce_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl SpaceParams {
    pub fn new(n: usize, kappa: [f64; 2]) -> Result<Self> {
        if n == 0 {
            return Err(CatError::OutOfRange("N must be positive".into()));
        }
        Ok(SpaceParams { n, kappa: [reduce_unit(kappa[0]), reduce_unit(kappa[1])] })
    }

    pub fn periodic(n: usize) -> Self {
        SpaceParams { n, kappa: [0.0, 0.0] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> [f64; 2] {
        self.kappa
    }

    /// Position of lattice site `k`.
    pub fn position(&self, k: usize) -> f64 {
        (k as f64 + self.kappa[1]) / self.n as f64
    }
}

/// `u∧v = u₂v₁ − u₁v₂`.
pub fn symplectic_product(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[1] * v[0] - u[0] * v[1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TranslationIndex(pub i64, pub i64);

impl TranslationIndex {
    pub fn wedge(self, o: TranslationIndex) -> i64 {
        self.1 * o.0 - self.0 * o.1
    }

    /// Row action `nM`.
    pub fn act(self, m: &CatMatrix) -> TranslationIndex {
        let (a, b) = m.act((self.0, self.1));
        TranslationIndex(a, b)
    }

    pub fn norm(self) -> f64 {
        (self.0 as f64).hypot(self.1 as f64)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0 && self.1 == 0
    }

    /// All `n` with `lo ≤ |n| ≤ hi` in lexicographic order.
    pub fn ball(lo: f64, hi: f64) -> Vec<TranslationIndex> {
        let r = hi.floor() as i64;
        let mut out = Vec::new();
        for a in -r..=r {
            for b in -r..=r {
                let n = TranslationIndex(a, b);
                let s = n.norm();
                if s >= lo && s <= hi {
                    out.push(n);
                }
            }
        }
        out
    }
}

impl Add for TranslationIndex {
    type Output = TranslationIndex;
    fn add(self, o: Self) -> Self {
        TranslationIndex(self.0 + o.0, self.1 + o.1)
    }
}

impl Sub for TranslationIndex {
    type Output = TranslationIndex;
    fn sub(self, o: Self) -> Self {
        TranslationIndex(self.0 - o.0, self.1 - o.1)
    }
}

impl Neg for TranslationIndex {
    type Output = TranslationIndex;
    fn neg(self) -> Self {
        TranslationIndex(-self.0, -self.1)
    }
}

impl From<(i64, i64)> for TranslationIndex {
    fn from(n: (i64, i64)) -> Self {
        TranslationIndex(n.0, n.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    params: SpaceParams,
    amps: Vec<C64>,
}

impl QuantumState {
    pub fn new(params: SpaceParams, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != params.n {
            return Err(CatError::MismatchedParams(params.n, amps.len()));
        }
        Ok(QuantumState { params, amps })
    }

    pub fn zeros(params: SpaceParams) -> Self {
        QuantumState { params, amps: vec![ZERO; params.n] }
    }

    /// `Ψ(j) = √N δ_{jk}`, a unit vector.
    pub fn basis(params: SpaceParams, k: usize) -> Self {
        let mut s = QuantumState::zeros(params);
        s.amps[k % params.n] = C64::new((params.n as f64).sqrt(), 0.0);
        s
    }

    /// Seeded Gaussian state, normalized.
    pub fn random(params: SpaceParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..params.n)
            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        QuantumState { params, amps }.normalized()
    }

    pub fn params(&self) -> &SpaceParams {
        &self.params
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    /// `sqrt((1/N) Σ |Ψ(k)|²)`.
    pub fn norm(&self) -> f64 {
        (self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() / self.params.n as f64).sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let s = self.norm();
        if s > 0.0 {
            for a in &mut self.amps {
                *a /= s;
            }
        }
        self
    }
}

fn same_space(a: &SpaceParams, b: &SpaceParams) -> bool {
    a.n == b.n && a.kappa == b.kappa
}

/// `(1/N) Σ_k Ψ(k) conj Φ(k)`.
pub fn inner(psi: &QuantumState, phi: &QuantumState) -> Result<C64> {
    if !same_space(&psi.params, &phi.params) {
        return Err(CatError::MismatchedParams(psi.params.n, phi.params.n));
    }
    Ok(inner_slices(&psi.amps, &phi.amps))
}

pub(crate) fn inner_slices(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C64>() / a.len() as f64
}

/// `T_N(n)` as a generalized permutation: `(TΨ)(i) = alpha[i] Ψ((i − shift) mod N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub shift: usize,
    pub alpha: Vec<C64>,
}

impl Translation {
    pub fn new(params: &SpaceParams, n: TranslationIndex) -> Self {
        let nn = params.n as i64;
        let [k1, k2] = params.kappa;
        let (n1, n2) = (n.0, n.1);
        let global = -((n1 as i128 * n2 as i128).rem_euclid(2 * nn as i128) as f64) / (2.0 * nn as f64);
        let mod_k2 = (n2 as f64 * k2 / nn as f64).rem_euclid(1.0);
        let n2r = n2.rem_euclid(nn);
        let alpha = (0..nn)
            .map(|i| {
                let wrap = (i - n1).div_euclid(nn);
                let lin = ((n2r as i128 * i as i128) % nn as i128) as f64 / nn as f64;
                let wrap_phase = -(k1 * wrap as f64).rem_euclid(1.0);
                cis_turns(global + lin + mod_k2 + wrap_phase)
            })
            .collect();
        Translation { shift: n1.rem_euclid(nn) as usize, alpha }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn apply(&self, psi: &[C64], out: &mut [C64]) {
        let n = self.alpha.len();
        for i in 0..n {
            out[i] = self.alpha[i] * psi[(i + n - self.shift) % n];
        }
    }

    /// Result on `psi` under the adjoint `T_N(n)*`.
    pub fn apply_adjoint(&self, psi: &[C64], out: &mut [C64]) {
        let n = self.alpha.len();
        for j in 0..n {
            // T*_{j,i} = conj T_{i,j} with i = j + shift
            let i = (j + self.shift) % n;
            out[j] = self.alpha[i].conj() * psi[i];
        }
    }

    /// `T X` for a dense `X`.
    pub fn left_mul(&self, x: MatRef<'_, C64>) -> Mat<C64> {
        let n = self.alpha.len();
        Mat::from_fn(n, x.ncols(), |i, j| self.alpha[i] * x[((i + n - self.shift) % n, j)])
    }

    /// `X T` for a dense `X`.
    pub fn right_mul(&self, x: MatRef<'_, C64>) -> Mat<C64> {
        let n = self.alpha.len();
        Mat::from_fn(x.nrows(), n, |i, j| {
            let k = (j + self.shift) % n;
            x[(i, k)] * self.alpha[k]
        })
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let n = self.alpha.len();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, (i + n - self.shift) % n)] = self.alpha[i];
        }
        m
    }

    pub fn trace(&self) -> C64 {
        if self.shift == 0 {
            self.alpha.iter().sum()
        } else {
            ZERO
        }
    }

    /// The scalar when `T` is a multiple of the identity.
    pub fn scalar(&self) -> Option<C64> {
        let a0 = self.alpha[0];
        (self.shift == 0 && self.alpha.iter().all(|a| (a - a0).norm() < 1e-12)).then_some(a0)
    }
}

pub fn translation_apply(params: &SpaceParams, n: TranslationIndex, psi: &QuantumState) -> Result<QuantumState> {
    if !same_space(params, &psi.params) {
        return Err(CatError::MismatchedParams(params.n, psi.params.n));
    }
    let t = Translation::new(params, n);
    let mut out = vec![ZERO; params.n];
    t.apply(&psi.amps, &mut out);
    Ok(QuantumState { params: *params, amps: out })
}

pub fn translation_matrix(params: &SpaceParams, n: TranslationIndex) -> Mat<C64> {
    Translation::new(params, n).to_dense()
}

/// `Op_N(a) = Σ ã(n) T_N(n)` for a two-dimensional polynomial.
pub fn weyl_quantize(params: &SpaceParams, a: &TrigPolynomial) -> Mat<C64> {
    assert_eq!(a.dim(), 2, "weyl_quantize needs a polynomial on T²; use embed_position for d = 1");
    let a = a.with_pairing(Pairing::Symplectic);
    let n = params.n;
    let mut m = Mat::zeros(n, n);
    for (idx, c) in a.iter() {
        let t = Translation::new(params, idx.into());
        for i in 0..n {
            m[(i, (i + n - t.shift) % n)] += c * t.alpha[i];
        }
    }
    m
}

pub fn trace_op(a: MatRef<'_, C64>) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `|Tr Op_N(a) − N ã(0)|`, valid when no nonzero support index is ≡ 0 mod N.
pub fn trace_formula_check(params: &SpaceParams, a: &TrigPolynomial) -> Result<f64> {
    if a.degree() > params.n {
        return Err(CatError::DegreeTooLarge { degree: a.degree(), n: params.n });
    }
    let op = weyl_quantize(params, a);
    Ok((trace_op(op.as_ref()) - a.mean() * params.n as f64).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frob(a: MatRef<'_, C64>) -> f64 {
        a.norm_l2()
    }

    fn composition_residual(p: &SpaceParams, n: TranslationIndex, m: TranslationIndex) -> f64 {
        let lhs = Translation::new(p, n).left_mul(translation_matrix(p, m).as_ref());
        let phase = cis_turns(n.wedge(m) as f64 / (2.0 * p.n as f64));
        let rhs = translation_matrix(p, n + m);
        let mut worst = 0.0f64;
        for i in 0..p.n {
            for j in 0..p.n {
                worst = worst.max((lhs[(i, j)] - phase * rhs[(i, j)]).norm());
            }
        }
        worst
    }

    #[test]
    fn identity_and_anchors() {
        let p = SpaceParams::new(7, [0.25, 0.6]).unwrap();
        let id = translation_matrix(&p, TranslationIndex(0, 0));
        assert!(frob((&id - Mat::<C64>::identity(7, 7)).as_ref()) < 1e-15);
        let k1 = Translation::new(&p, TranslationIndex(7, 0)).scalar().unwrap();
        let k2 = Translation::new(&p, TranslationIndex(0, 7)).scalar().unwrap();
        assert!((k1 - cis_turns(0.25)).norm() < 1e-13);
        assert!((k2 - cis_turns(0.6)).norm() < 1e-13);
    }

    #[test]
    fn generator_composition_phase() {
        let p = SpaceParams::periodic(9);
        let lhs = Translation::new(&p, TranslationIndex(1, 0)).left_mul(translation_matrix(&p, TranslationIndex(0, 1)).as_ref());
        let rhs = translation_matrix(&p, TranslationIndex(1, 1));
        let phase = C64::from_polar(1.0, -std::f64::consts::PI / 9.0);
        assert!(frob((&lhs - &rhs * faer::Scale(phase)).as_ref()) < 1e-13);
    }

    #[test]
    fn composition_law_with_phases() {
        for (nn, kappa) in [(4usize, [0.0, 0.0]), (5, [0.5, 0.5]), (6, [0.3, 0.85])] {
            let p = SpaceParams::new(nn, kappa).unwrap();
            for n in TranslationIndex::ball(0.0, 3.0) {
                for m in TranslationIndex::ball(0.0, 3.0) {
                    assert!(composition_residual(&p, n, m) < 1e-12, "N={nn} n={n:?} m={m:?}");
                }
            }
        }
    }

    #[test]
    fn adjoint_is_negation() {
        let p = SpaceParams::new(8, [0.5, 0.0]).unwrap();
        for n in TranslationIndex::ball(0.0, 4.0) {
            let t = translation_matrix(&p, n);
            let tm = translation_matrix(&p, -n);
            assert!(frob((t.adjoint() - &tm).as_ref()) < 1e-13);
            let u = t.adjoint() * &t;
            assert!(frob((&u - Mat::<C64>::identity(8, 8)).as_ref()) < 1e-13);
        }
    }

    #[test]
    fn dense_and_structured_agree() {
        let p = SpaceParams::new(11, [0.5, 0.5]).unwrap();
        let tr = Translation::new(&p, TranslationIndex(3, -5));
        let dense = tr.to_dense();
        for s in 0..100 {
            let psi = QuantumState::random(p, s);
            let a = translation_apply(&p, TranslationIndex(3, -5), &psi).unwrap();
            let mut adj = vec![ZERO; 11];
            tr.apply_adjoint(psi.amplitudes(), &mut adj);
            for i in 0..11 {
                let d: C64 = (0..11).map(|j| dense[(i, j)] * psi.amplitudes()[j]).sum();
                let da: C64 = (0..11).map(|j| dense[(j, i)].conj() * psi.amplitudes()[j]).sum();
                assert!((d - a.amplitudes()[i]).norm() < 1e-13);
                assert!((da - adj[i]).norm() < 1e-13);
            }
        }
        let x = Mat::<C64>::from_fn(11, 11, |i, j| C64::new(i as f64 - j as f64, (i * j % 4) as f64));
        assert!(frob((tr.left_mul(x.as_ref()) - &dense * &x).as_ref()) < 1e-12);
        assert!(frob((tr.right_mul(x.as_ref()) - &x * &dense).as_ref()) < 1e-12);
    }

    #[test]
    fn inner_product_basics() {
        let p = SpaceParams::periodic(6);
        let e0 = QuantumState::basis(p, 0);
        let e1 = QuantumState::basis(p, 1);
        assert!((inner(&e0, &e0).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(inner(&e0, &e1).unwrap(), ZERO);
        let a = QuantumState::random(p, 1);
        let b = QuantumState::random(p, 2);
        assert!((inner(&a, &b).unwrap() - inner(&b, &a).unwrap().conj()).norm() < 1e-14);
        assert!((a.norm() - 1.0).abs() < 1e-14);
        let q = SpaceParams::periodic(5);
        assert!(inner(&a, &QuantumState::random(q, 3)).is_err());
    }

    #[test]
    fn weyl_basics() {
        let p = SpaceParams::new(10, [0.0, 0.5]).unwrap();
        let one = weyl_quantize(&p, &TrigPolynomial::constant(2, 1.0));
        assert!(frob((&one - Mat::<C64>::identity(10, 10)).as_ref()) < 1e-15);
        let n = TranslationIndex(2, -3);
        let op = weyl_quantize(&p, &TrigPolynomial::mode((2, -3)));
        assert!(frob((&op - translation_matrix(&p, n)).as_ref()) < 1e-15);
    }

    #[test]
    fn position_observables_are_diagonal() {
        let p = SpaceParams::new(12, [0.3, 0.5]).unwrap();
        let mut a = TrigPolynomial::new(1, 4, Pairing::Standard);
        a.set((0, 0), C64::new(0.5, 0.0)).unwrap();
        a.set((1, 0), C64::new(0.2, 0.1)).unwrap();
        a.set((-1, 0), C64::new(0.2, -0.1)).unwrap();
        a.set((3, 0), C64::new(-0.3, 0.05)).unwrap();
        a.set((-3, 0), C64::new(-0.3, -0.05)).unwrap();
        let op = weyl_quantize(&p, &a.embed_position());
        let mut off = 0.0;
        for i in 0..12 {
            for j in 0..12 {
                if i != j {
                    off += op[(i, j)].norm_sqr();
                }
            }
            let want = a.eval([p.position(i), 0.0]);
            assert!((op[(i, i)] - want).norm() < 1e-13);
        }
        assert!(off.sqrt() < 1e-12);
        assert!(frob((op.adjoint() - &op).as_ref()) < 1e-13);
    }

    #[test]
    fn traces() {
        let p = SpaceParams::new(16, [0.5, 0.0]).unwrap();
        assert!((trace_op(translation_matrix(&p, TranslationIndex(0, 0)).as_ref()) - C64::new(16.0, 0.0)).norm() < 1e-13);
        for n in TranslationIndex::ball(0.5, 15.9) {
            assert!(Translation::new(&p, n).trace().norm() < 1e-10);
            assert!(trace_op(translation_matrix(&p, n).as_ref()).norm() < 1e-10);
        }
        let bad = TrigPolynomial::new(2, 17, Pairing::Symplectic);
        assert!(trace_formula_check(&p, &bad).is_err());
    }

    #[test]
    fn symplectic_pairing_values() {
        assert_eq!(symplectic_product([1.0, 0.0], [0.0, 1.0]), -1.0);
        assert_eq!(TranslationIndex(1, 0).wedge(TranslationIndex(0, 1)), -1);
    }

    proptest! {
        #[test]
        fn wedge_is_map_invariant(u in (-20i64..20, -20i64..20), v in (-20i64..20, -20i64..20), k in 0usize..3) {
            let m = [CatMatrix::arnold(), CatMatrix::new(2, 1, 3, 2).unwrap(), CatMatrix::new(5, 8, 8, 13).unwrap()][k];
            let (u, v) = (TranslationIndex::from(u), TranslationIndex::from(v));
            prop_assert_eq!(u.act(&m).wedge(v.act(&m)), u.wedge(v));
            prop_assert_eq!(u.wedge(v), -v.wedge(u));
        }

        #[test]
        fn composition_law_random(n in (-8i64..=8, -8i64..=8), m in (-8i64..=8, -8i64..=8), nn in 4usize..24, k1 in 0.0f64..1.0, k2 in 0.0f64..1.0) {
            let p = SpaceParams::new(nn, [k1, k2]).unwrap();
            prop_assert!(composition_residual(&p, n.into(), m.into()) < 1e-12);
        }

        #[test]
        fn weyl_is_linear(seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = SpaceParams::new(9, [0.5, 0.5]).unwrap();
            let mut a = TrigPolynomial::new(2, 4, Pairing::Symplectic);
            let mut b = TrigPolynomial::new(2, 4, Pairing::Symplectic);
            for n in TranslationIndex::ball(0.0, 3.9) {
                a.set((n.0, n.1), C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap();
                b.set((n.0, n.1), C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap();
            }
            let (s, t) = (C64::new(0.7, -0.2), C64::new(-1.3, 0.4));
            let lhs = weyl_quantize(&p, &a.combine(s, &b, t));
            let rhs = weyl_quantize(&p, &a) * faer::Scale(s) + weyl_quantize(&p, &b) * faer::Scale(t);
            prop_assert!(frob((&lhs - &rhs).as_ref()) < 1e-13 * 9.0);
        }
    }
}
