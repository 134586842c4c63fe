use catlab::arithmetic::{lyapunov, period, CatMatrix};
use catlab::bsapprox::{ball_pair_2d, interval_pair};
use catlab::hilbert::{QuantumState, SpaceParams, TranslationIndex};
use catlab::propagator::{build_propagator, eigendecompose, EigenData, DEFAULT_CLUSTER_TOL};
use catlab::stats::experiment::V4Row;
use catlab::stats::scan::{mass_sandwich, MassProfile};
use catlab::stats::{
    cauchy_schwarz_average, default_delta, ehrenfest_time, exceptional_sets, matrix_elements, matrix_elements_for,
    modes_in_disk, moment, physical_mass, sup_deviation, v2_bound, MatrixElementTable,
};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn checkerboard() -> CatMatrix {
    CatMatrix::new(2, 1, 3, 2).unwrap()
}

fn eig(n: usize, seed: Option<u64>) -> EigenData {
    let p = build_propagator(&SpaceParams::periodic(n), &checkerboard(), 0).unwrap();
    eigendecompose(&p, seed, DEFAULT_CLUSTER_TOL).unwrap()
}

#[test]
fn vanishing_matrix_elements_give_zero_deviation() {
    let params = SpaceParams::periodic(50);
    let modes = modes_in_disk(12);
    let zeros = vec![C64::new(0.0, 0.0); modes.len() * 3];
    let t = MatrixElementTable::from_values(params, "toy", 12, modes, 3, zeros).unwrap();
    let pair = ball_pair_2d(0.2, 12).unwrap();
    let s = sup_deviation(&t, &pair, None).unwrap();
    for st in s.minus.states.iter().chain(&s.plus.states) {
        assert_eq!(st.grid_max, 0.0);
        assert_eq!(st.margin, 0.0);
    }
    let r = exceptional_sets(&t, &s, 1e-9, 2.0).unwrap();
    assert_eq!(r.union_density, 0.0);
    assert_eq!(r.good_states, vec![0, 1, 2]);
}

#[test]
fn refining_the_grid_stays_within_the_margin() {
    let e = eig(40, None);
    let pair = ball_pair_2d(0.3, 9).unwrap();
    let t = matrix_elements(&e, 9, "generic");
    let coarse = sup_deviation(&t, &pair, None).unwrap();
    let fine = sup_deviation(&t, &pair, Some(2 * coarse.grid)).unwrap();
    for (c, f) in coarse.plus.states.iter().zip(&fine.plus.states) {
        assert!(f.grid_max >= c.grid_max - 1e-13);
        assert!(f.grid_max - c.grid_max <= c.margin);
    }
    assert!(sup_deviation(&t, &pair, Some(10)).is_err());
}

#[test]
fn thresholds_at_the_extremes() {
    let e = eig(48, None);
    let pair = ball_pair_2d(0.25, 10).unwrap();
    let t = matrix_elements(&e, 10, "generic");
    let s = sup_deviation(&t, &pair, None).unwrap();
    let big = exceptional_sets(&t, &s, 1e6, 2.0).unwrap();
    assert!(big.minus.members.is_empty() && big.plus.members.is_empty());
    assert_eq!(big.good_states.len(), 48);
    let tiny = exceptional_sets(&t, &s, 1e-300, 2.0).unwrap();
    assert_eq!(tiny.union_density, 1.0);
    for l in [1e-3, 0.05, 0.3] {
        let r = exceptional_sets(&t, &s, l, 4.0).unwrap();
        assert!(r.minus.members.len() + r.plus.members.len() + r.good_states.len() >= 48);
    }
}

#[test]
fn physical_mass_of_uniform_and_full_balls() {
    let params = SpaceParams::new(37, [0.0, 0.5]).unwrap();
    let flat = QuantumState::new(params, vec![C64::new(1.0, 0.0); 37]).unwrap();
    for (q, r) in [(0.1, 0.2), (0.5, 0.05), (0.93, 0.31)] {
        let count = (0..37)
            .filter(|&k| {
                let d = (params.position(k) - q).rem_euclid(1.0);
                d.min(1.0 - d) <= r
            })
            .count();
        let m = physical_mass(&flat, q, r);
        assert!((m - count as f64 / 37.0).abs() < 1e-15);
        assert!((m - 2.0 * r).abs() <= 2.0 / 37.0);
    }
    let psi = QuantumState::random(params, 11);
    assert!((physical_mass(&psi, 0.2, 0.5) - 1.0).abs() < 1e-12);
}

#[test]
fn mass_sandwich_on_a_fine_centre_grid() {
    let e = eig(64, Some(2));
    let pair = interval_pair(0.12, 60).unwrap();
    let states: Vec<_> = (0..64).map(|j| e.state(j)).collect();
    for i in 0..256 {
        let q = i as f64 / 256.0;
        let prof = MassProfile::new(&pair, &e.params, q).unwrap();
        for psi in &states {
            assert!(prof.apply(psi).holds(1e-10));
        }
    }
    let s = mass_sandwich(&pair, &states[3], 0.42).unwrap();
    assert_eq!(s, MassProfile::new(&pair, &e.params, 0.42).unwrap().apply(&states[3]));
}

#[test]
fn short_period_rotated_bases_report_sup_deviation() {
    // reported, not asserted beyond sanity: in-cluster rotations at a short period
    let m = CatMatrix::arnold();
    let n = 199;
    let params = SpaceParams::new(n, [0.5, 0.5]).unwrap();
    let p = build_propagator(&params, &m, 0).unwrap();
    let pair = ball_pair_2d(0.25, 12).unwrap();
    for seed in [1u64, 2] {
        let e = eigendecompose(&p, Some(seed), DEFAULT_CLUSTER_TOL).unwrap();
        assert!(e.clusters.len() as u64 <= 2 * period(&m, n as u64));
        let t = matrix_elements(&e, 12, "rotated");
        let s = sup_deviation(&t, &pair, None).unwrap();
        let worst = s.plus.states.iter().map(|x| x.grid_max).fold(0.0, f64::max);
        println!("N={n} seed={seed}: max_j grid sup {worst:.4}");
        assert!(worst.is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn second_moment_theorem_holds(n in 16usize..72, a in -3i64..=3, b in -3i64..=3, seed in 0u64..4) {
        let mode = TranslationIndex(a, b);
        prop_assume!(!mode.is_zero());
        let m = checkerboard();
        let lambda = lyapunov(&m).unwrap();
        let p = build_propagator(&SpaceParams::periodic(n), &m, seed).unwrap();
        let e = eigendecompose(&p, Some(seed), DEFAULT_CLUSTER_TOL).unwrap();
        let t = matrix_elements_for(&e, vec![mode], 5, "rotated");
        let v2 = moment(&t, mode, 2.0).unwrap();
        let delta = default_delta(mode, n);
        prop_assert!(v2 <= v2_bound(n, lambda, delta) + 1e-9);
        prop_assert!(v2 <= 1.0 + 1e-12);
        let steps = ((delta * ehrenfest_time(n, lambda)).ceil() as usize).max(1);
        prop_assert!(v2 <= cauchy_schwarz_average(&p.params, &m, mode, steps) + 1e-12);
        let row = V4Row::from_table(&t, mode).unwrap();
        prop_assert!(row.sane());
    }
}
