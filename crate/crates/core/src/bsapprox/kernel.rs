//! Jackson-type kernels and indicator Fourier coefficients.

use std::collections::HashMap;
use std::f64::consts::PI;

/// Nonnegative kernel `J(t) ∝ (sin πmt / sin πt)^{2k}` with unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Jackson {
    pub m: usize,
    pub k: usize,
    /// `coeffs[j + w]` for `|j| ≤ w = k(m − 1)`, with `coeffs[w] = 1`.
    pub coeffs: Vec<f64>,
    raw_mass: f64,
}

impl Jackson {
    pub fn new(m: usize, k: usize) -> Self {
        assert!(m >= 1 && k >= 1);
        let tri: Vec<f64> = (0..2 * m - 1).map(|i| (m as f64) - (i as f64 - (m as f64 - 1.0)).abs()).collect();
        let mut c = vec![1.0];
        for _ in 0..k {
            let mut next = vec![0.0; c.len() + tri.len() - 1];
            for (i, a) in c.iter().enumerate() {
                for (j, b) in tri.iter().enumerate() {
                    next[i + j] += a * b;
                }
            }
            c = next;
        }
        let w = (c.len() - 1) / 2;
        let raw_mass = c[w];
        for x in &mut c {
            *x /= raw_mass;
        }
        Jackson { m, k, coeffs: c, raw_mass }
    }

    pub fn half_width(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn coeff(&self, j: i64) -> f64 {
        let w = self.half_width() as i64;
        if j.abs() > w {
            0.0
        } else {
            self.coeffs[(j + w) as usize]
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let w = self.half_width() as i64;
        (-w..=w).map(|j| self.coeff(j) * (2.0 * PI * j as f64 * t).cos()).sum()
    }

    /// Upper bound for the mass of `J` outside `[−s, s]`, `0 < s ≤ 1/2`.
    pub fn tail(&self, s: f64) -> f64 {
        if s >= 0.5 {
            return 0.0;
        }
        let w = self.half_width() as i64;
        let inside = 2.0 * s + (1..=w).map(|j| 2.0 * self.coeff(j) * (2.0 * PI * j as f64 * s).sin() / (PI * j as f64)).sum::<f64>();
        let exact = (1.0 - inside).max(0.0) + 1e-13;
        // |sin πt| ≥ 2|t| on [−1/2, 1/2] bounds the density by (2t)^{−2k}/Z
        let k = self.k as f64;
        let envelope = if self.k == 1 {
            (1.0 / s - 2.0) / (2.0 * self.raw_mass)
        } else {
            2.0 / (self.raw_mass * (2.0 * k - 1.0) * 4f64.powf(k)) * (s.powf(1.0 - 2.0 * k) - 2f64.powf(2.0 * k - 1.0))
        };
        exact.min(envelope.max(0.0) + 1e-13).min(1.0)
    }
}

/// Fourier coefficient of the indicator of `(−R, R)` on T¹.
pub fn interval_coeff(radius: f64, m: i64) -> f64 {
    if m == 0 {
        2.0 * radius
    } else {
        (2.0 * PI * m as f64 * radius).sin() / (PI * m as f64)
    }
}

/// `J₁(x)` by the trapezoid rule on `(1/2π)∫₀^{2π} cos(θ − x sin θ) dθ`,
/// refined by doubling until two successive values agree.
pub fn bessel_j1(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let rule = |m: usize| -> f64 {
        let h = 2.0 * PI / m as f64;
        (0..m).map(|i| {
            let th = i as f64 * h;
            (th - x * th.sin()).cos()
        })
        .sum::<f64>()
            / m as f64
    };
    let mut m = ((x.abs().ceil() as usize) + 32).next_power_of_two();
    let mut prev = rule(m);
    loop {
        m *= 2;
        let cur = rule(m);
        if (cur - prev).abs() <= 1e-15 || m > 1 << 22 {
            return cur;
        }
        prev = cur;
    }
}

/// Fourier coefficients of disk indicators, cached by `|k|²`.
#[derive(Debug, Default)]
pub struct DiskCoefficients {
    radius: f64,
    cache: HashMap<i64, f64>,
}

impl DiskCoefficients {
    pub fn new(radius: f64) -> Self {
        DiskCoefficients { radius, cache: HashMap::new() }
    }

    /// `∫_{|y| ≤ R} e^{−2πi k·y} dy = R J₁(2πR|k|)/|k|`.
    pub fn get(&mut self, k: (i64, i64)) -> f64 {
        let q = k.0 * k.0 + k.1 * k.1;
        let r = self.radius;
        *self.cache.entry(q).or_insert_with(|| {
            if q == 0 {
                PI * r * r
            } else {
                let kn = (q as f64).sqrt();
                r * bessel_j1(2.0 * PI * r * kn) / kn
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fejer_square_is_triangle() {
        let j = Jackson::new(4, 1);
        assert_eq!(j.half_width(), 3);
        assert!((j.coeff(1) - 0.75).abs() < 1e-15);
        assert!((j.coeff(3) - 0.25).abs() < 1e-15);
        assert_eq!(j.coeff(4), 0.0);
    }

    #[test]
    fn jackson_is_nonnegative_with_unit_mass() {
        let j = Jackson::new(6, 3);
        let g = 2000;
        let mut mass = 0.0;
        for i in 0..g {
            let v = j.eval(i as f64 / g as f64 - 0.5);
            assert!(v >= -1e-12);
            mass += v / g as f64;
        }
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_bounds_the_numerical_tail() {
        for (m, k) in [(10usize, 1usize), (8, 2), (5, 4)] {
            let j = Jackson::new(m, k);
            for s in [0.01, 0.05, 0.1, 0.3] {
                // midpoint quadrature of the mass outside [−s, s]
                let g = 200_000;
                let mut out = 0.0;
                for i in 0..g {
                    let t = (i as f64 + 0.5) / g as f64 - 0.5;
                    if t.abs() > s {
                        out += j.eval(t) / g as f64;
                    }
                }
                assert!(j.tail(s) + 1e-9 >= out, "m={m} k={k} s={s}: {} < {out}", j.tail(s));
            }
        }
    }

    #[test]
    fn bessel_values() {
        // J₁ zeros and reference values
        assert!(bessel_j1(3.831705970207512).abs() < 1e-14);
        assert!((bessel_j1(1.0) - 0.4400505857449335).abs() < 1e-15);
        assert!((bessel_j1(10.0) - 0.04347274616886144).abs() < 1e-14);
        assert!((bessel_j1(100.0) - (-0.07714535201411216)).abs() < 1e-14);
        assert!((bessel_j1(-1.0) + 0.4400505857449335).abs() < 1e-15);
    }

    #[test]
    fn disk_coefficient_matches_quadrature() {
        let r = 0.2;
        let mut dc = DiskCoefficients::new(r);
        let g = 800;
        for k in [(0i64, 0i64), (1, 0), (2, 3), (-4, 1)] {
            let mut s = 0.0;
            for i in 0..g {
                for j in 0..g {
                    let y = ((i as f64 + 0.5) / g as f64 - 0.5, (j as f64 + 0.5) / g as f64 - 0.5);
                    if y.0.hypot(y.1) <= r {
                        s += (2.0 * PI * (k.0 as f64 * y.0 + k.1 as f64 * y.1)).cos();
                    }
                }
            }
            s /= (g * g) as f64;
            assert!((s - dc.get(k)).abs() < 2e-4, "{k:?}");
        }
    }
}
