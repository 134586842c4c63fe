//! Dense helpers on top of faer.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Frobenius norm; an upper bound for the operator norm.
pub fn frobenius(a: MatRef<'_, C64>) -> f64 {
    a.norm_l2()
}

/// `‖A*A − I‖_F`.
pub fn unitarity_residual(a: MatRef<'_, C64>) -> f64 {
    let mut g = a.adjoint() * a;
    for i in 0..g.nrows() {
        g[(i, i)] -= C64::new(1.0, 0.0);
    }
    g.norm_l2()
}

/// `⟨A, B⟩_HS = Tr(A* B)`.
pub fn hs_inner(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].conj() * b[(i, j)];
        }
    }
    s
}

/// `|⟨A, B⟩_HS| / (‖A‖ ‖B‖)`, equal to 1 iff `B` is a phase times `A`.
pub fn phase_overlap(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    hs_inner(a, b).norm() / (a.norm_l2() * b.norm_l2())
}

/// `min_θ ‖A − e^{iθ}B‖_F / ‖A‖_F`.
pub fn phase_distance(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    let ip = hs_inner(b, a);
    let ph = if ip.norm() > 0.0 { ip / ip.norm() } else { C64::new(1.0, 0.0) };
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += (a[(i, j)] - ph * b[(i, j)]).norm_sqr();
        }
    }
    s.sqrt() / a.norm_l2()
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Mat<C64> {
    Mat::from_fn(rows, cols, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Haar-distributed unitary from the QR factorization of a Gaussian matrix.
pub fn random_unitary<R: Rng>(k: usize, rng: &mut R) -> Mat<C64> {
    let g = gaussian_matrix(k, k, rng);
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..k {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..k {
            q[(i, j)] *= ph;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in [1usize, 2, 5, 17] {
            let q = random_unitary(k, &mut rng);
            assert!(unitarity_residual(q.as_ref()) < 1e-13);
        }
    }

    #[test]
    fn phase_measures() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = gaussian_matrix(6, 6, &mut rng);
        let b = &a * faer::Scale(C64::from_polar(1.0, 0.7));
        assert!((phase_overlap(a.as_ref(), b.as_ref()) - 1.0).abs() < 1e-14);
        assert!(phase_distance(a.as_ref(), b.as_ref()) < 1e-14);
        let c = gaussian_matrix(6, 6, &mut rng);
        assert!(phase_overlap(a.as_ref(), c.as_ref()) < 0.9);
    }
}
