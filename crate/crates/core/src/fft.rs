//! Thin wrappers over rustfft for unnormalized inverse transforms.

use num_complex::Complex64;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

/// In-place `x[k] <- Σ_j x[j] e^{+2πi jk/n}`.
pub fn inverse_1d(x: &mut [Complex64]) {
    if x.len() <= 1 {
        return;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(x.len()).process(x);
}

/// In-place 2D inverse transform of a row-major `g × g` array.
pub fn inverse_2d(x: &mut [Complex64], g: usize) {
    Inverse2d::new(g).process(x);
}

/// Reusable plan for repeated `g × g` inverse transforms.
pub struct Inverse2d {
    g: usize,
    plan: Arc<dyn Fft<f64>>,
    col: Vec<Complex64>,
}

impl Inverse2d {
    pub fn new(g: usize) -> Self {
        let plan = FftPlanner::new().plan_fft_inverse(g.max(1));
        Inverse2d { g, plan, col: vec![Complex64::new(0.0, 0.0); g] }
    }

    pub fn process(&mut self, x: &mut [Complex64]) {
        let g = self.g;
        assert_eq!(x.len(), g * g);
        if g <= 1 {
            return;
        }
        for row in x.chunks_mut(g) {
            self.plan.process(row);
        }
        for j in 0..g {
            for i in 0..g {
                self.col[i] = x[i * g + j];
            }
            self.plan.process(&mut self.col);
            for i in 0..g {
                x[i * g + j] = self.col[i];
            }
        }
    }
}
