//! Finitely supported trigonometric polynomials on T¹ and T².

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CatError, Result};
use crate::fft;

/// How a two-dimensional coefficient index pairs with a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pairing {
    /// `e^{2πi(n∧x)}` with `n∧x = n₂x₁ − n₁x₂`.
    Symplectic,
    /// `e^{2πi(n·x)}`.
    Standard,
}

/// `a(x) = Σ ã(n) e(n, x)` with `ã(n) = 0` for `|n| ≥ degree`.
///
/// One-dimensional polynomials store index `n` as `(n, 0)` and always use
/// `e^{2πi n x}`; the pairing flag only matters for `dim == 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    dim: usize,
    degree: usize,
    pairing: Pairing,
    coeffs: BTreeMap<(i64, i64), Complex64>,
}

pub(crate) fn cis_turns(t: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * (t - t.round())).sin_cos();
    Complex64::new(c, s)
}

fn in_support(dim: usize, degree: usize, n: (i64, i64)) -> bool {
    let r2 = (n.0 as i128).pow(2) + (n.1 as i128).pow(2);
    (dim == 2 || n.1 == 0) && r2 < (degree as i128).pow(2)
}

impl TrigPolynomial {
    pub fn new(dim: usize, degree: usize, pairing: Pairing) -> Self {
        assert!(dim == 1 || dim == 2, "dimension must be 1 or 2");
        TrigPolynomial { dim, degree, pairing, coeffs: BTreeMap::new() }
    }

    pub fn from_coeffs(
        dim: usize,
        degree: usize,
        pairing: Pairing,
        coeffs: impl IntoIterator<Item = ((i64, i64), Complex64)>,
    ) -> Result<Self> {
        let mut p = TrigPolynomial::new(dim, degree, pairing);
        for (n, c) in coeffs {
            p.set(n, c)?;
        }
        Ok(p)
    }

    /// The constant polynomial.
    pub fn constant(dim: usize, value: f64) -> Self {
        let mut p = TrigPolynomial::new(dim, 1, Pairing::Symplectic);
        p.coeffs.insert((0, 0), Complex64::new(value, 0.0));
        p
    }

    /// `e^{2πi(n∧x)}` in two dimensions.
    pub fn mode(n: (i64, i64)) -> Self {
        let deg = ((n.0 as f64).hypot(n.1 as f64)).floor() as usize + 1;
        let mut p = TrigPolynomial::new(2, deg, Pairing::Symplectic);
        p.coeffs.insert(n, Complex64::new(1.0, 0.0));
        p
    }

    pub fn set(&mut self, n: (i64, i64), c: Complex64) -> Result<()> {
        if !in_support(self.dim, self.degree, n) {
            return Err(CatError::OutOfRange(format!("index {n:?} outside degree {} support", self.degree)));
        }
        if c == Complex64::new(0.0, 0.0) {
            self.coeffs.remove(&n);
        } else {
            self.coeffs.insert(n, c);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pairing(&self) -> Pairing {
        self.pairing
    }

    pub fn coeff(&self, n: (i64, i64)) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or_default()
    }

    pub fn mean(&self) -> Complex64 {
        self.coeff((0, 0))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), Complex64)> + '_ {
        self.coeffs.iter().map(|(k, v)| (*k, *v))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Bound `2π Σ |n| |ã(n)|` on the Euclidean gradient norm.
    pub fn lipschitz_bound(&self) -> f64 {
        2.0 * PI * self.iter().map(|(n, c)| (n.0 as f64).hypot(n.1 as f64) * c.norm()).sum::<f64>()
    }

    /// Largest `|ã(−n) − conj ã(n)|`.
    pub fn hermitian_defect(&self) -> f64 {
        self.iter().map(|(n, c)| (self.coeff((-n.0, -n.1)) - c.conj()).norm()).fold(0.0, f64::max)
    }

    /// Same polynomial with coefficients re-indexed for the other pairing.
    pub fn with_pairing(&self, target: Pairing) -> TrigPolynomial {
        if self.dim == 1 || self.pairing == target {
            let mut p = self.clone();
            p.pairing = target;
            return p;
        }
        // symplectic n and standard k pair identically when k = (n₂, −n₁)
        let map = |n: (i64, i64)| match target {
            Pairing::Standard => (n.1, -n.0),
            Pairing::Symplectic => (-n.1, n.0),
        };
        TrigPolynomial {
            dim: 2,
            degree: self.degree,
            pairing: target,
            coeffs: self.coeffs.iter().map(|(n, c)| (map(*n), *c)).collect(),
        }
    }

    fn standard_freq(&self, n: (i64, i64)) -> (i64, i64) {
        match (self.dim, self.pairing) {
            (1, _) | (_, Pairing::Standard) => n,
            (_, Pairing::Symplectic) => (n.1, -n.0),
        }
    }

    /// Point evaluation; `y[1]` is ignored in one dimension.
    pub fn eval(&self, y: [f64; 2]) -> Complex64 {
        self.iter()
            .map(|(n, c)| {
                let k = self.standard_freq(n);
                c * cis_turns(k.0 as f64 * y[0] + k.1 as f64 * y[1])
            })
            .sum()
    }

    /// `b(y) = a(y − x)`.
    pub fn translate(&self, x: [f64; 2]) -> TrigPolynomial {
        let mut p = self.clone();
        for (n, c) in p.coeffs.iter_mut() {
            let k = self.standard_freq(*n);
            *c *= cis_turns(-(k.0 as f64 * x[0] + k.1 as f64 * x[1]));
        }
        p
    }

    /// Values on the regular grid `y = (i/g, j/g)` by FFT.
    ///
    /// Row-major `g × g` in two dimensions (`i` indexes `y₁`), length `g` in one.
    pub fn eval_grid(&self, g: usize) -> Vec<Complex64> {
        assert!(g >= 1);
        let gi = g as i64;
        if self.dim == 1 {
            let mut buf = vec![Complex64::new(0.0, 0.0); g];
            for (n, c) in self.iter() {
                buf[n.0.rem_euclid(gi) as usize] += c;
            }
            fft::inverse_1d(&mut buf);
            buf
        } else {
            let mut buf = vec![Complex64::new(0.0, 0.0); g * g];
            for (n, c) in self.iter() {
                let k = self.standard_freq(n);
                buf[k.0.rem_euclid(gi) as usize * g + k.1.rem_euclid(gi) as usize] += c;
            }
            fft::inverse_2d(&mut buf, g);
            buf
        }
    }

    /// Linear combination `alpha·self + beta·other` (same dim and pairing).
    pub fn combine(&self, alpha: Complex64, other: &TrigPolynomial, beta: Complex64) -> TrigPolynomial {
        assert_eq!(self.dim, other.dim);
        let other = other.with_pairing(self.pairing);
        let mut p = TrigPolynomial::new(self.dim, self.degree.max(other.degree), self.pairing);
        for (n, c) in self.iter() {
            *p.coeffs.entry(n).or_default() += alpha * c;
        }
        for (n, c) in other.iter() {
            *p.coeffs.entry(n).or_default() += beta * c;
        }
        p
    }

    /// A one-dimensional polynomial `a(q)` seen as a position observable on T².
    pub fn embed_position(&self) -> TrigPolynomial {
        assert_eq!(self.dim, 1);
        // e^{2πi m q} = e^{2πi ((0,m)∧x)} with q = x₁
        TrigPolynomial {
            dim: 2,
            degree: self.degree,
            pairing: Pairing::Symplectic,
            coeffs: self.coeffs.iter().map(|(n, c)| ((0, n.0), *c)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_poly(dim: usize, degree: usize, pairing: Pairing, rng: &mut ChaCha8Rng) -> TrigPolynomial {
        let d = degree as i64;
        let mut p = TrigPolynomial::new(dim, degree, pairing);
        for n1 in -d..=d {
            for n2 in if dim == 2 { -d..=d } else { 0..=0 } {
                if in_support(dim, degree, (n1, n2)) {
                    p.set((n1, n2), Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap();
                }
            }
        }
        p
    }

    #[test]
    fn support_is_enforced() {
        let mut p = TrigPolynomial::new(2, 3, Pairing::Symplectic);
        assert!(p.set((2, 2), Complex64::new(1.0, 0.0)).is_ok());
        assert!(p.set((3, 0), Complex64::new(1.0, 0.0)).is_err());
        let mut q = TrigPolynomial::new(1, 3, Pairing::Standard);
        assert!(q.set((0, 1), Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn constant_and_single_mode() {
        let p = TrigPolynomial::constant(2, 0.7);
        assert!((p.eval([0.3, 0.9]) - Complex64::new(0.7, 0.0)).norm() < 1e-15);
        let mut q = TrigPolynomial::new(2, 5, Pairing::Symplectic);
        q.set((2, -3), Complex64::new(0.25, -1.5)).unwrap();
        assert!((q.eval([0.0, 0.0]) - Complex64::new(0.25, -1.5)).norm() < 1e-15);
    }

    #[test]
    fn symplectic_mode_evaluation() {
        let q = TrigPolynomial::mode((1, 0));
        // (1,0)∧x = −x₂
        let y = [0.21, 0.37];
        assert!((q.eval(y) - cis_turns(-0.37)).norm() < 1e-14);
    }

    #[test]
    fn pairing_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_poly(2, 4, Pairing::Symplectic, &mut rng);
        let s = p.with_pairing(Pairing::Standard);
        let back = s.with_pairing(Pairing::Symplectic);
        assert_eq!(p, back);
        for _ in 0..20 {
            let y = [rng.random::<f64>(), rng.random::<f64>()];
            assert!((p.eval(y) - s.eval(y)).norm() < 1e-12);
        }
    }

    #[test]
    fn fft_grid_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (dim, pairing) in [(1, Pairing::Standard), (2, Pairing::Symplectic), (2, Pairing::Standard)] {
            let p = random_poly(dim, 6, pairing, &mut rng);
            // grid smaller than the bandwidth exercises aliasing
            for g in [7usize, 16, 25] {
                let vals = p.eval_grid(g);
                for (idx, v) in vals.iter().enumerate() {
                    let y = if dim == 1 {
                        [idx as f64 / g as f64, 0.0]
                    } else {
                        [(idx / g) as f64 / g as f64, (idx % g) as f64 / g as f64]
                    };
                    assert!((p.eval(y) - v).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn translation_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [1usize, 2] {
            let p = random_poly(dim, 5, Pairing::Symplectic, &mut rng);
            assert_eq!(p.translate([0.0, 0.0]), p);
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let b = p.translate(x);
            assert_eq!(b.mean(), p.mean());
            assert!((b.eval(x) - p.eval([0.0, 0.0])).norm() < 1e-12);
            let y = [rng.random::<f64>(), rng.random::<f64>()];
            assert!((b.eval(y) - p.eval([y[0] - x[0], y[1] - x[1]])).norm() < 1e-12);
        }
    }

    #[test]
    fn position_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_poly(1, 4, Pairing::Standard, &mut rng);
        let e = p.embed_position();
        let y = [0.3141, 0.777];
        assert!((e.eval(y) - p.eval([y[0], 0.0])).norm() < 1e-12);
    }
}
