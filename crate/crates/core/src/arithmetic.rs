//! Integer and modular arithmetic of hyperbolic toral automorphisms.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{CatError, Result};

/// A 2×2 integer matrix acting on row vectors, `x -> xM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CatMatrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

/// True iff `det m = 1` and `|tr m| > 2`.
pub fn is_cat(m: [[i64; 2]; 2]) -> bool {
    let det = m[0][0] as i128 * m[1][1] as i128 - m[0][1] as i128 * m[1][0] as i128;
    let tr = m[0][0] as i128 + m[1][1] as i128;
    det == 1 && tr.abs() > 2
}

impl CatMatrix {
    /// Validating constructor.
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if is_cat([[a, b], [c, d]]) {
            Ok(CatMatrix { a, b, c, d })
        } else {
            Err(CatError::NotCat(a, b, c, d))
        }
    }

    /// The Arnold map `[[2,1],[1,1]]`.
    pub fn arnold() -> Self {
        CatMatrix { a: 2, b: 1, c: 1, d: 1 }
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    /// Row vector times matrix: `(n1, n2) M`.
    pub fn act(&self, n: (i64, i64)) -> (i64, i64) {
        (n.0 * self.a + n.1 * self.c, n.0 * self.b + n.1 * self.d)
    }

    /// Matrix product `self * other` over the integers.
    pub fn compose(&self, other: &CatMatrix) -> CatMatrix {
        CatMatrix {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> CatMatrix {
        CatMatrix { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn reduce(&self, n: u64) -> ModMatrix {
        ModMatrix::new(self.a, self.b, self.c, self.d, n)
    }
}

impl std::fmt::Display for CatMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Natural log of the spectral radius, `ln((|t| + sqrt(t² − 4))/2)`.
pub fn lyapunov(m: &CatMatrix) -> Result<f64> {
    if !is_cat(m.entries()) {
        return Err(CatError::NotCat(m.a, m.b, m.c, m.d));
    }
    let t = m.trace().unsigned_abs() as f64;
    Ok(((t + (t * t - 4.0).sqrt()) / 2.0).ln())
}

/// A 2×2 matrix with entries in `[0, modulus)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModMatrix {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub modulus: u64,
}

fn rem(x: i64, n: u64) -> u64 {
    (x as i128).rem_euclid(n as i128) as u64
}

impl ModMatrix {
    pub fn new(a: i64, b: i64, c: i64, d: i64, modulus: u64) -> Self {
        assert!(modulus >= 1, "modulus must be positive");
        ModMatrix { a: rem(a, modulus), b: rem(b, modulus), c: rem(c, modulus), d: rem(d, modulus), modulus }
    }

    pub fn identity(modulus: u64) -> Self {
        ModMatrix::new(1, 0, 0, 1, modulus)
    }

    pub fn mul(&self, o: &ModMatrix) -> ModMatrix {
        debug_assert_eq!(self.modulus, o.modulus);
        let n = self.modulus as u128;
        let f = |x: u64, y: u64, z: u64, w: u64| ((x as u128 * y as u128 + z as u128 * w as u128) % n) as u64;
        ModMatrix {
            a: f(self.a, o.a, self.b, o.c),
            b: f(self.a, o.b, self.b, o.d),
            c: f(self.c, o.a, self.d, o.c),
            d: f(self.c, o.b, self.d, o.d),
            modulus: self.modulus,
        }
    }

    pub fn det(&self) -> u64 {
        let n = self.modulus as u128;
        let ad = self.a as u128 * self.d as u128 % n;
        let bc = self.b as u128 * self.c as u128 % n;
        ((ad + n - bc) % n) as u64
    }

    pub fn is_identity(&self) -> bool {
        *self == ModMatrix::identity(self.modulus)
    }

    pub fn pow(&self, mut k: u64) -> ModMatrix {
        let mut base = *self;
        let mut acc = ModMatrix::identity(self.modulus);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        acc
    }

    /// Multiplicative order by repeated multiplication.
    pub fn order(&self) -> u64 {
        let id = ModMatrix::identity(self.modulus);
        let mut acc = *self;
        let mut k = 1;
        while acc != id {
            acc = acc.mul(self);
            k += 1;
        }
        k
    }
}

/// Smallest `k ≥ 1` with `m^k ≡ Id (mod n)`.
pub fn period(m: &CatMatrix, n: u64) -> u64 {
    m.reduce(n).order()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub modulus: u64,
    pub period: u64,
    /// `P(N)·λ / (2 log N)`; infinite at `N = 1`.
    pub ratio: f64,
    pub short: bool,
}

/// Default short-period threshold `2/λ + 1`.
pub fn default_short_threshold(m: &CatMatrix) -> Result<f64> {
    Ok(2.0 / lyapunov(m)? + 1.0)
}

/// One record per modulus in `n_min..=n_max`; `short` flags `P(N) ≤ threshold·log N`.
pub fn period_sweep(m: &CatMatrix, n_min: u64, n_max: u64, short_threshold: Option<f64>) -> Result<Vec<PeriodRecord>> {
    let lambda = lyapunov(m)?;
    if n_min == 0 || n_min > n_max {
        return Err(CatError::OutOfRange(format!("sweep range {n_min}..={n_max}")));
    }
    let thr = short_threshold.unwrap_or(2.0 / lambda + 1.0);
    Ok((n_min..=n_max)
        .map(|n| {
            let p = period(m, n);
            let logn = (n as f64).ln();
            let ratio = if n == 1 { f64::INFINITY } else { p as f64 * lambda / (2.0 * logn) };
            PeriodRecord { modulus: n, period: p, ratio, short: p as f64 <= thr * logn }
        })
        .collect())
}

/// True iff `ab` and `cd` are both even.
pub fn checkerboard(m: &CatMatrix) -> bool {
    (m.a * m.b) % 2 == 0 && (m.c * m.d) % 2 == 0
}

const BRUTE_FORCE_MAX: u64 = 97;

/// Invertible matrices mod `n` commuting with `m`, truncated to `cap`.
///
/// Id and `m mod n` come first, followed by the remaining elements in
/// lexicographic order of `(a, b, c, d)` (brute force, `n ≤ 97`) or of the
/// coefficients `(x, y)` of `xI + yM` (larger `n`).
pub fn commutant_mod(m: &CatMatrix, n: u64, cap: usize) -> Vec<ModMatrix> {
    assert!(n >= 2, "commutant_mod needs N >= 2");
    let body = if n <= BRUTE_FORCE_MAX { commutant_brute_force(m, n) } else { commutant_centralizer(m, n) };
    let id = ModMatrix::identity(n);
    let mm = m.reduce(n);
    let mut out = vec![id];
    if mm != id {
        out.push(mm);
    }
    out.extend(body.into_iter().filter(|b| *b != id && *b != mm));
    out.truncate(cap.max(2).min(out.len()));
    out
}

pub(crate) fn commutant_brute_force(m: &CatMatrix, n: u64) -> Vec<ModMatrix> {
    let mm = m.reduce(n);
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let x = ModMatrix { a, b, c, d, modulus: n };
                    if x.det() == 1 % n && x.mul(&mm) == mm.mul(&x) {
                        out.push(x);
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn commutant_centralizer(m: &CatMatrix, n: u64) -> Vec<ModMatrix> {
    let mm = m.reduce(n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let nn = n as u128;
    for x in 0..n {
        for y in 0..n {
            let lin = |s: u64, e: u64| ((s as u128 + y as u128 * e as u128) % nn) as u64;
            let b = ModMatrix { a: lin(x, mm.a), b: lin(0, mm.b), c: lin(0, mm.c), d: lin(x, mm.d), modulus: n };
            if b.det() == 1 % n && seen.insert(b) {
                out.push(b);
            }
        }
    }
    out
}

/// Greatest common divisor with Bezout coefficients: `a·x + b·y = g`.
pub(crate) fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - (a.div_euclid(b)) * y)
    }
}

/// Integer lifts of `b` in SL(2, Z), smallest entries first.
///
/// Yields at most `limit` candidates; the first column is searched over
/// shifts by multiples of `N` in symmetric order and the second column is
/// fixed by Bezout and then shifted along the first column.
pub fn sl2_lifts(b: &ModMatrix, limit: usize) -> Vec<CatMatrix> {
    let n = b.modulus as i128;
    let sym = |x: u64| {
        let x = x as i128;
        if 2 * x > n {
            x - n
        } else {
            x
        }
    };
    let shifts: Vec<i128> = {
        let mut v = vec![0i128];
        for k in 1..=4 {
            v.push(k);
            v.push(-k);
        }
        v
    };
    let mut out = Vec::new();
    let (a0, b0, c0, d0) = (sym(b.a), sym(b.b), sym(b.c), sym(b.d));
    // exact lift first when the symmetric residues already have det 1
    if a0 * d0 - b0 * c0 == 1 {
        out.push(CatMatrix { a: a0 as i64, b: b0 as i64, c: c0 as i64, d: d0 as i64 });
    }
    for &i in &shifts {
        for &k in &shifts {
            let a = a0 + i * n;
            let c = c0 + k * n;
            let (g, x, y) = ext_gcd(a, c);
            if g != 1 {
                continue;
            }
            // a·x + c·y = 1 gives d1 = x, b1 = -y with a·d1 - b1·c = 1
            let (d1, b1) = (x, -y);
            // general solution (b1 + t a, d1 + t c); need b1 + t a ≡ b0, d1 + t c ≡ d0 mod n
            let t = match solve_shift(a, c, b1, d1, b0, d0, n) {
                Some(t) => t,
                None => continue,
            };
            for &u in &shifts {
                let tt = t + u * n;
                let cand = (a, b1 + tt * a, c, d1 + tt * c);
                if cand.0 * cand.3 - cand.1 * cand.2 != 1 {
                    continue;
                }
                let lim = i64::MAX as i128 / 4;
                if [cand.0, cand.1, cand.2, cand.3].iter().any(|v| v.abs() > lim) {
                    continue;
                }
                let cm = CatMatrix { a: cand.0 as i64, b: cand.1 as i64, c: cand.2 as i64, d: cand.3 as i64 };
                if !out.contains(&cm) {
                    out.push(cm);
                }
                if out.len() >= limit {
                    return out;
                }
            }
        }
    }
    out
}

// Find t mod n with b1 + t a ≡ bt and d1 + t c ≡ dt (mod n).
fn solve_shift(a: i128, c: i128, b1: i128, d1: i128, bt: i128, dt: i128, n: i128) -> Option<i128> {
    // gcd(a, c) = 1 so some combination u a + v c = 1; then t ≡ u (bt - b1) + v (dt - d1)
    let (_, u, v) = ext_gcd(a, c);
    let t = (u * (bt - b1) + v * (dt - d1)).rem_euclid(n);
    let ok = (b1 + t * a - bt).rem_euclid(n) == 0 && (d1 + t * c - dt).rem_euclid(n) == 0;
    ok.then_some(t)
}
