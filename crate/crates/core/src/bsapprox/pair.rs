//! Sandwich pairs `minorant ≤ χ_{B(0,r)} ≤ majorant` of degree `< D`.
//!
//! With `K ≥ 0` a unit-mass kernel and `T(δ)` a bound on its mass outside
//! the ball of radius `δ`:
//!
//! ```text
//! majorant = K ∗ χ_{B(r+δ)} / (1 − T(δ)) + η
//! minorant = K ∗ χ_{B(r−δ)} − T(δ) − η
//! ```
//!
//! `η` absorbs floating-point rounding in the coefficients. The kernel power
//! and `δ` are chosen per member to minimize `|coeff(0) − Vol|`; the constant
//! polynomials `1` and `0` are used when they are closer.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::kernel::{interval_coeff, DiskCoefficients, Jackson};
use super::poly::{Pairing, TrigPolynomial};
use crate::error::{CatError, Result};

const ETA: f64 = 1e-12;
const MAX_POWER: usize = 10;
const DELTA_STEPS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberInfo {
    /// Constant member (`1` for the majorant, `0` for the minorant).
    pub trivial: bool,
    pub kernel_power: usize,
    /// Per-axis half-width of the kernel's frequency support.
    pub half_width: usize,
    pub delta: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichPair {
    pub minorant: TrigPolynomial,
    pub majorant: TrigPolynomial,
    pub radius: f64,
    pub dim: usize,
    pub degree: usize,
    pub minorant_info: MemberInfo,
    pub majorant_info: MemberInfo,
    /// Analytic certificate holds and the grid check found no violation.
    pub certified: bool,
    /// Lipschitz constant of the pair times the grid covering radius.
    pub grid_margin: f64,
    pub grid_size: usize,
    pub grid_violations: usize,
    /// Fraction of grid cells on which the Lipschitz margin alone certifies both inequalities.
    pub lipschitz_certified_fraction: f64,
}

pub fn ball_volume(dim: usize, r: f64) -> f64 {
    if dim == 1 {
        2.0 * r
    } else {
        PI * r * r
    }
}

/// Default certification grid: `10⁴` points on T¹, `200 × 200` on T².
pub fn default_grid(dim: usize) -> usize {
    if dim == 1 {
        10_000
    } else {
        200
    }
}

fn max_half_width(dim: usize, degree: usize) -> usize {
    if dim == 1 {
        degree - 1
    } else {
        // w√2 < D
        let mut w = (degree as f64 / 2f64.sqrt()).floor() as usize;
        while w > 0 && 2 * w * w >= degree * degree {
            w -= 1;
        }
        w
    }
}

fn total_tail(dim: usize, kern: &Jackson, delta: f64) -> f64 {
    if dim == 1 {
        kern.tail(delta)
    } else {
        let t1 = kern.tail(delta / 2f64.sqrt());
        (1.0 - (1.0 - t1).powi(2)).min(1.0)
    }
}

#[derive(Clone, Copy)]
struct Choice {
    power: usize,
    m: usize,
    delta: f64,
    tail: f64,
    mean: f64,
}

fn optimize(dim: usize, r: f64, degree: usize) -> (Option<Choice>, Option<Choice>) {
    let wmax = max_half_width(dim, degree);
    let mut best_major: Option<Choice> = None;
    let mut best_minor: Option<Choice> = None;
    for power in 1..=MAX_POWER {
        let m = wmax / power + 1;
        if m < 2 {
            continue;
        }
        let kern = Jackson::new(m, power);
        let lo: f64 = 1e-4_f64.min(r / 2.0);
        for s in 0..DELTA_STEPS {
            let delta = lo * (r / lo).powf(s as f64 / (DELTA_STEPS - 1) as f64);
            let tail = total_tail(dim, &kern, delta);
            if tail >= 1.0 {
                continue;
            }
            if r + delta < 0.5 {
                let mean = ball_volume(dim, r + delta) / (1.0 - tail) + ETA;
                if best_major.is_none_or(|b| mean < b.mean) {
                    best_major = Some(Choice { power, m, delta, tail, mean });
                }
            }
            if delta < r {
                let mean = ball_volume(dim, r - delta) - tail - ETA;
                if best_minor.is_none_or(|b| mean > b.mean) {
                    best_minor = Some(Choice { power, m, delta, tail, mean });
                }
            }
        }
    }
    // constant members win when they are closer to the volume
    let vol = ball_volume(dim, r);
    let major = best_major.filter(|c| c.mean - vol < 1.0 - vol);
    let minor = best_minor.filter(|c| vol - c.mean < vol);
    (major, minor)
}

fn smoothed_indicator(dim: usize, degree: usize, kern: &Jackson, radius: f64, scale: f64, shift: f64) -> TrigPolynomial {
    let w = kern.half_width() as i64;
    let mut coeffs = Vec::new();
    if dim == 1 {
        for j in -w..=w {
            let mut c = kern.coeff(j) * interval_coeff(radius, j) * scale;
            if j == 0 {
                c += shift;
            }
            coeffs.push(((j, 0), Complex64::new(c, 0.0)));
        }
    } else {
        let mut disk = DiskCoefficients::new(radius);
        for a in -w..=w {
            for b in -w..=w {
                let mut c = kern.coeff(a) * kern.coeff(b) * disk.get((a, b)) * scale;
                if a == 0 && b == 0 {
                    c += shift;
                }
                coeffs.push(((a, b), Complex64::new(c, 0.0)));
            }
        }
    }
    // standard-pairing coefficients, re-indexed to the symplectic convention
    TrigPolynomial::from_coeffs(dim, degree, Pairing::Standard, coeffs)
        .expect("kernel support lies inside the degree bound")
        .with_pairing(Pairing::Symplectic)
}

fn construct(dim: usize, r: f64, degree: usize) -> Result<SandwichPair> {
    if !(r > 0.0 && r <= 0.5) {
        return Err(CatError::Infeasible(format!("radius {r} outside (0, 1/2]")));
    }
    if r * (degree as f64) < 1.0 {
        return Err(CatError::Infeasible(format!("r·D = {} < 1", r * degree as f64)));
    }
    let (major, minor) = optimize(dim, r, degree);
    let trivial = MemberInfo { trivial: true, kernel_power: 0, half_width: 0, delta: 0.0, tail: 0.0 };
    let (majorant, majorant_info) = match major {
        Some(c) => {
            let kern = Jackson::new(c.m, c.power);
            let p = smoothed_indicator(dim, degree, &kern, r + c.delta, 1.0 / (1.0 - c.tail), ETA);
            (p, MemberInfo { trivial: false, kernel_power: c.power, half_width: kern.half_width(), delta: c.delta, tail: c.tail })
        }
        None => (with_degree(TrigPolynomial::constant(dim, 1.0), degree), trivial),
    };
    let (minorant, minorant_info) = match minor {
        Some(c) => {
            let kern = Jackson::new(c.m, c.power);
            let p = smoothed_indicator(dim, degree, &kern, r - c.delta, 1.0, -c.tail - ETA);
            (p, MemberInfo { trivial: false, kernel_power: c.power, half_width: kern.half_width(), delta: c.delta, tail: c.tail })
        }
        None => (with_degree(TrigPolynomial::constant(dim, -ETA), degree), trivial),
    };
    Ok(SandwichPair {
        minorant,
        majorant,
        radius: r,
        dim,
        degree,
        minorant_info,
        majorant_info,
        certified: false,
        grid_margin: f64::NAN,
        grid_size: 0,
        grid_violations: 0,
        lipschitz_certified_fraction: 0.0,
    })
}

fn with_degree(p: TrigPolynomial, degree: usize) -> TrigPolynomial {
    TrigPolynomial::from_coeffs(p.dim(), degree, Pairing::Symplectic, p.iter()).expect("constant fits any degree")
}

/// Pair for the interval `(−r, r)` on T¹, certified on the default grid.
pub fn interval_pair(r: f64, degree: usize) -> Result<SandwichPair> {
    let mut p = construct(1, r, degree)?;
    certify(&mut p, default_grid(1));
    Ok(p)
}

/// Pair for the disk of radius `r` on T², certified on the default grid.
pub fn ball_pair_2d(r: f64, degree: usize) -> Result<SandwichPair> {
    let mut p = construct(2, r, degree)?;
    certify(&mut p, default_grid(2));
    Ok(p)
}

/// Uncertified construction, for callers that run their own checks.
pub fn sandwich_pair(dim: usize, r: f64, degree: usize) -> Result<SandwichPair> {
    if dim != 1 && dim != 2 {
        return Err(CatError::Infeasible(format!("dimension {dim}")));
    }
    construct(dim, r, degree)
}

/// Quotient distance to the origin on T^d.
pub fn torus_norm(y: [f64; 2], dim: usize) -> f64 {
    let f = |t: f64| (t - t.round()).abs();
    if dim == 1 {
        f(y[0])
    } else {
        f(y[0]).hypot(f(y[1]))
    }
}

/// Grid evaluation of both members against the closed-ball indicator.
pub fn certify(p: &mut SandwichPair, grid: usize) {
    let dim = p.dim;
    let lo = p.minorant.eval_grid(grid);
    let hi = p.majorant.eval_grid(grid);
    let rho = if dim == 1 { 0.5 / grid as f64 } else { 2f64.sqrt() * 0.5 / grid as f64 };
    let margin = p.minorant.lipschitz_bound().max(p.majorant.lipschitz_bound()) * rho;
    let mut violations = 0usize;
    let mut lipschitz_ok = 0usize;
    let pts = lo.len();
    for idx in 0..pts {
        let y = if dim == 1 {
            [idx as f64 / grid as f64, 0.0]
        } else {
            [(idx / grid) as f64 / grid as f64, (idx % grid) as f64 / grid as f64]
        };
        let d = torus_norm(y, dim);
        let chi = if d <= p.radius { 1.0 } else { 0.0 };
        let (a, b) = (lo[idx].re, hi[idx].re);
        if a > chi || b < chi {
            violations += 1;
        }
        // the indicator is constant on the cell unless the boundary passes through it
        let (chi_lo, chi_hi) = if d + rho <= p.radius {
            (1.0, 1.0)
        } else if d - rho > p.radius {
            (0.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        if a + margin <= chi_lo && b - margin >= chi_hi {
            lipschitz_ok += 1;
        }
    }
    let analytic = p.minorant.hermitian_defect() < 1e-13 && p.majorant.hermitian_defect() < 1e-13;
    p.certified = analytic && violations == 0;
    p.grid_margin = margin;
    p.grid_size = grid;
    p.grid_violations = violations;
    p.lipschitz_certified_fraction = lipschitz_ok as f64 / pts as f64;
}

impl SandwichPair {
    pub fn volume(&self) -> f64 {
        ball_volume(self.dim, self.radius)
    }

    /// Larger of `|coeff(0) − Vol|` over the two members.
    pub fn mean_error(&self) -> f64 {
        let v = self.volume();
        (self.majorant.mean().re - v).abs().max((self.minorant.mean().re - v).abs())
    }

    /// `mean_error · D / r^{d−1}`.
    pub fn mean_error_constant(&self) -> f64 {
        self.mean_error() * self.degree as f64 / self.radius.powi(self.dim as i32 - 1)
    }

    /// `max_n |coeff(n)| / r^d` over both members.
    pub fn coefficient_constant(&self) -> f64 {
        self.minorant.max_abs_coeff().max(self.majorant.max_abs_coeff()) / self.radius.powi(self.dim as i32)
    }

    /// Both members translated to centre `x`.
    pub fn translate(&self, x: [f64; 2]) -> SandwichPair {
        let mut p = self.clone();
        p.minorant = self.minorant.translate(x);
        p.majorant = self.majorant.translate(x);
        p
    }
}

/// `b(y) = a(y − x)`.
pub fn translate_poly(a: &TrigPolynomial, x: [f64; 2]) -> TrigPolynomial {
    a.translate(x)
}

/// `Σ ã(n) e(n, y)` at one point.
pub fn eval_poly(a: &TrigPolynomial, y: [f64; 2]) -> Complex64 {
    a.eval(y)
}
