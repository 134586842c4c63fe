//! Eigenstate matrix elements, p-moments and exceptional-set scans.

pub mod experiment;
pub mod scan;

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::arithmetic::CatMatrix;
use crate::error::{CatError, Result};
use crate::hilbert::{SpaceParams, Translation, TranslationIndex};
use crate::bsapprox::poly::cis_turns;
use crate::propagator::EigenData;

pub use experiment::{qe_experiment, v4_scaling_fit, QeConfig, QeReport, V4Fit, V4Model};
pub use scan::{exceptional_sets, physical_mass, sup_deviation, ScanReport, SupDeviations};

/// `c[n][j] = ⟨T_N(n) φ_j, φ_j⟩` for a list of modes.
#[derive(Debug, Clone)]
pub struct MatrixElementTable {
    pub params: SpaceParams,
    pub basis_id: String,
    pub degree: usize,
    modes: Vec<TranslationIndex>,
    index: HashMap<TranslationIndex, usize>,
    states: usize,
    values: Vec<C64>,
}

impl MatrixElementTable {
    /// Table from raw values laid out as `values[mode * states + j]`.
    pub fn from_values(
        params: SpaceParams,
        basis_id: &str,
        degree: usize,
        modes: Vec<TranslationIndex>,
        states: usize,
        values: Vec<C64>,
    ) -> Result<Self> {
        if values.len() != modes.len() * states {
            return Err(CatError::OutOfRange(format!("{} values for {} modes x {states} states", values.len(), modes.len())));
        }
        let index: HashMap<_, _> = modes.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        if index.len() != modes.len() {
            return Err(CatError::OutOfRange("duplicate modes".into()));
        }
        Ok(MatrixElementTable { params, basis_id: basis_id.to_string(), degree, modes, index, states, values })
    }

    pub fn modes(&self) -> &[TranslationIndex] {
        &self.modes
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn contains(&self, n: TranslationIndex) -> bool {
        self.index.contains_key(&n)
    }

    pub fn mode_index(&self, n: TranslationIndex) -> Option<usize> {
        self.index.get(&n).copied()
    }

    /// All states for mode `n`.
    pub fn row(&self, n: TranslationIndex) -> Option<&[C64]> {
        self.index.get(&n).map(|&i| &self.values[i * self.states..(i + 1) * self.states])
    }

    pub fn row_at(&self, idx: usize) -> &[C64] {
        &self.values[idx * self.states..(idx + 1) * self.states]
    }

    pub fn get(&self, n: TranslationIndex, j: usize) -> Option<C64> {
        self.row(n).map(|r| r[j])
    }
}

/// Modes `1 ≤ |n| ≤ D`.
pub fn modes_in_disk(degree: usize) -> Vec<TranslationIndex> {
    TranslationIndex::ball(1.0, degree as f64)
}

/// Position modes `(0, m)`, `1 ≤ |m| ≤ D`.
pub fn position_modes(degree: usize) -> Vec<TranslationIndex> {
    let d = degree as i64;
    (-d..=d).filter(|&m| m != 0).map(|m| TranslationIndex(0, m)).collect()
}

/// Table over `1 ≤ |n| ≤ D`.
pub fn matrix_elements(e: &EigenData, degree: usize, basis_id: &str) -> MatrixElementTable {
    matrix_elements_for(e, modes_in_disk(degree), degree, basis_id)
}

/// Table for an explicit mode list, by one FFT over `n₂` per `(n₁, j)`.
///
/// For fixed `n₁`, `Σ_i α_n(i) φ(i − n₁) conj φ(i)` is a discrete Fourier
/// sum in `n₂` of `w(i) = wrap(i) φ((i − n₁) mod N) conj φ(i)`.
pub fn matrix_elements_for(e: &EigenData, modes: Vec<TranslationIndex>, degree: usize, basis_id: &str) -> MatrixElementTable {
    let params = e.params;
    let n = params.n();
    let nn = n as i64;
    let [k1, k2] = params.kappa();
    let states = e.len();
    let index: HashMap<_, _> = modes.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let mut values = vec![C64::new(0.0, 0.0); modes.len() * states];
    let mut by_row: HashMap<i64, Vec<usize>> = HashMap::new();
    for (i, m) in modes.iter().enumerate() {
        by_row.entry(m.0).or_default().push(i);
    }
    let mut rows: Vec<_> = by_row.into_iter().collect();
    rows.sort_by_key(|r| r.0);
    let mut planner = rustfft::FftPlanner::new();
    let plan = planner.plan_fft_inverse(n);
    let mut w = vec![C64::new(0.0, 0.0); n];
    for (n1, idxs) in rows {
        let shift = n1.rem_euclid(nn) as usize;
        let wraps: Vec<C64> = (0..nn).map(|i| cis_turns(-(k1 * (i - n1).div_euclid(nn) as f64).rem_euclid(1.0))).collect();
        let phases: Vec<C64> = idxs
            .iter()
            .map(|&mi| {
                let n2 = modes[mi].1;
                let global = -((n1 as i128 * n2 as i128).rem_euclid(2 * nn as i128) as f64) / (2.0 * nn as f64);
                cis_turns(global + (n2 as f64 * k2 / nn as f64).rem_euclid(1.0)) / nn as f64
            })
            .collect();
        for j in 0..states {
            let col = e.eigenvectors.col(j);
            for i in 0..n {
                w[i] = wraps[i] * col[(i + n - shift) % n] * col[i].conj();
            }
            if n > 1 {
                plan.process(&mut w);
            }
            for (&mi, ph) in idxs.iter().zip(&phases) {
                let n2 = modes[mi].1.rem_euclid(nn) as usize;
                values[mi * states + j] = ph * w[n2];
            }
        }
    }
    MatrixElementTable { params, basis_id: basis_id.to_string(), degree, modes, index, states, values }
}

/// Same table by applying `T_N(n)` to every state; `O(#modes · N²)`.
pub fn matrix_elements_direct(e: &EigenData, modes: Vec<TranslationIndex>, degree: usize, basis_id: &str) -> MatrixElementTable {
    let params = e.params;
    let n = params.n();
    let states = e.len();
    let index: HashMap<_, _> = modes.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let mut values = vec![C64::new(0.0, 0.0); modes.len() * states];
    let cols: Vec<Vec<C64>> = (0..states).map(|j| e.column(j)).collect();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (mi, m) in modes.iter().enumerate() {
        let t = Translation::new(&params, *m);
        for j in 0..states {
            t.apply(&cols[j], &mut out);
            values[mi * states + j] = crate::hilbert::inner_slices(&out, &cols[j]);
        }
    }
    MatrixElementTable { params, basis_id: basis_id.to_string(), degree, modes, index, states, values }
}

/// `V_p = (1/N) Σ_j |c[n][j] − μ(n)|^p` with `μ(0) = 1`, `μ(n) = 0` otherwise.
pub fn moment(t: &MatrixElementTable, n: TranslationIndex, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(CatError::OutOfRange(format!("p = {p} < 1")));
    }
    if n.is_zero() {
        return Ok(0.0);
    }
    let row = t.row(n).ok_or_else(|| CatError::OutOfRange(format!("mode {n:?} not in table")))?;
    Ok(row.iter().map(|c| c.norm().powf(p)).sum::<f64>() / t.states as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub n_dim: usize,
    pub mode: (i64, i64),
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub basis_id: String,
    pub rows: Vec<MomentRow>,
}

pub fn moment_table(t: &MatrixElementTable, modes: &[TranslationIndex], ps: &[f64]) -> Result<MomentTable> {
    let mut rows = Vec::new();
    for &n in modes {
        for &p in ps {
            rows.push(MomentRow { n_dim: t.params.n(), mode: (n.0, n.1), p, value: moment(t, n, p)? });
        }
    }
    Ok(MomentTable { basis_id: t.basis_id.clone(), rows })
}

/// Ehrenfest time `log N / λ`.
pub fn ehrenfest_time(n: usize, lambda: f64) -> f64 {
    (n as f64).ln() / lambda
}

/// Midpoint of the admissible interval `(0, 1 − log|n|/log N)`.
pub fn default_delta(n: TranslationIndex, dim: usize) -> f64 {
    0.5 * (1.0 - n.norm().ln() / (dim as f64).ln())
}

/// `1/(δ T_E)`.
pub fn v2_bound(dim: usize, lambda: f64, delta: f64) -> f64 {
    1.0 / (delta * ehrenfest_time(dim, lambda))
}

/// `(1/(N T²)) ‖Σ_{t<T} T_N(nM^t)‖_F²`, an upper bound for `V₂(N, T_N(n))`.
pub fn cauchy_schwarz_average(params: &SpaceParams, m: &CatMatrix, n: TranslationIndex, steps: usize) -> f64 {
    let dim = params.n();
    let mut orbit = Vec::with_capacity(steps);
    let mut v = n;
    for _ in 0..steps {
        orbit.push(Translation::new(params, v));
        v = v.act(m);
    }
    // Tr(A*B) for monomials vanishes unless the shifts agree
    let mut total = 0.0;
    for a in &orbit {
        for b in &orbit {
            if a.shift == b.shift {
                let tr: C64 = a.alpha.iter().zip(&b.alpha).map(|(x, y)| x.conj() * y).sum();
                total += tr.re;
            }
        }
    }
    total / (dim as f64 * (steps * steps) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::translation_matrix;
    use crate::propagator::{build_propagator, eigendecompose, DEFAULT_CLUSTER_TOL};

    fn setup(n: usize, seed: Option<u64>) -> (crate::propagator::Propagator, EigenData) {
        let m = CatMatrix::new(2, 1, 3, 2).unwrap();
        let p = build_propagator(&SpaceParams::periodic(n), &m, 0).unwrap();
        let e = eigendecompose(&p, seed, DEFAULT_CLUSTER_TOL).unwrap();
        (p, e)
    }

    #[test]
    fn fft_table_matches_direct() {
        let m = CatMatrix::arnold();
        let params = SpaceParams::new(15, [0.5, 0.5]).unwrap();
        let p = build_propagator(&params, &m, 1).unwrap();
        let e = eigendecompose(&p, Some(3), DEFAULT_CLUSTER_TOL).unwrap();
        let modes = modes_in_disk(20);
        let a = matrix_elements_for(&e, modes.clone(), 20, "g");
        let b = matrix_elements_direct(&e, modes.clone(), 20, "g");
        for (i, _) in modes.iter().enumerate() {
            for j in 0..15 {
                assert!((a.row_at(i)[j] - b.row_at(i)[j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn table_invariants() {
        let (p, e) = setup(32, None);
        let t = matrix_elements(&e, 40, "generic");
        for &n in t.modes() {
            let row = t.row(n).unwrap();
            let neg = t.row(-n).unwrap();
            for j in 0..32 {
                assert!(row[j].norm() <= 1.0 + 1e-10);
                assert!((neg[j] - row[j].conj()).norm() < 1e-10);
            }
            // modes ≡ 0 mod N are scalars
            if n.0 % 32 == 0 && n.1 % 32 == 0 {
                let s = Translation::new(&p.params, n).scalar().unwrap();
                assert!(row.iter().all(|c| (c - s).norm() < 1e-10));
            }
            let nm = n.act(&p.map);
            if let Some(r2) = t.row(nm) {
                for j in 0..32 {
                    assert!((r2[j] - row[j]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn orbit_invariance_of_matrix_elements() {
        let (p, e) = setup(64, Some(7));
        let mut modes = Vec::new();
        for n in TranslationIndex::ball(1.0, 8.0) {
            let mut v = n;
            for _ in 0..=5 {
                modes.push(v);
                v = v.act(&p.map);
            }
            let mut v = n;
            for _ in 0..5 {
                v = v.act(&p.map.inverse());
                modes.push(v);
            }
        }
        modes.sort();
        modes.dedup();
        let t = matrix_elements_for(&e, modes, 8, "rotated");
        for n in TranslationIndex::ball(1.0, 8.0) {
            let base = t.row(n).unwrap().to_vec();
            let mut fwd = n;
            let mut bwd = n;
            for _ in 0..5 {
                fwd = fwd.act(&p.map);
                bwd = bwd.act(&p.map.inverse());
                for j in 0..64 {
                    assert!((t.get(fwd, j).unwrap() - base[j]).norm() < 1e-9);
                    assert!((t.get(bwd, j).unwrap() - base[j]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn moments_match_dense_definition() {
        for n in [2usize, 4, 6, 8] {
            let (p, e) = setup(n, None);
            let t = matrix_elements(&e, 5, "generic");
            for &mode in t.modes() {
                let tm = translation_matrix(&p.params, mode);
                for pw in [1.0, 2.0, 4.0] {
                    let mut want = 0.0;
                    for j in 0..n {
                        let mut c = C64::new(0.0, 0.0);
                        for a in 0..n {
                            for b in 0..n {
                                c += e.eigenvectors[(b, j)].conj() * tm[(b, a)] * e.eigenvectors[(a, j)];
                            }
                        }
                        want += (c / n as f64).norm().powf(pw);
                    }
                    want /= n as f64;
                    assert!((moment(&t, mode, pw).unwrap() - want).abs() < 1e-12);
                }
            }
            assert_eq!(moment(&t, TranslationIndex(0, 0), 2.0).unwrap(), 0.0);
            assert!(moment(&t, TranslationIndex(9, 9), 2.0).is_err());
        }
    }

    #[test]
    fn second_moment_bound_and_averaging() {
        let (p, e) = setup(64, None);
        let lambda = crate::arithmetic::lyapunov(&p.map).unwrap();
        let t = matrix_elements(&e, 3, "generic");
        for n in [TranslationIndex(1, 0), TranslationIndex(0, 1), TranslationIndex(1, 1), TranslationIndex(2, 1)] {
            let v2 = moment(&t, n, 2.0).unwrap();
            let delta = default_delta(n, 64);
            assert!(v2 <= v2_bound(64, lambda, delta) + 1e-9);
            let steps = (delta * ehrenfest_time(64, lambda)).ceil() as usize;
            let cs = cauchy_schwarz_average(&p.params, &p.map, n, steps.max(1));
            assert!(v2 <= cs + 1e-12);
            assert!(v2 <= 1.0);
        }
    }
}
