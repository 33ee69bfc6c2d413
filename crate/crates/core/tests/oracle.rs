//! Exact-chain values cross-checked against an independent rational
//! enumeration (separate implementation, exact fractions), and simulator
//! agreement with the exact one-round law.

use rbb::exact::*;
use rbb::observables::Observable;
use rbb::validation::chi_square_step;
use rbb::{LoadVector, RandomSource};

fn stationary(n: usize, m: u64) -> (TransitionKernel, Vec<f64>) {
    let k = transition_kernel(enumerate_states(n, m, DEFAULT_STATE_CAP).unwrap(), DEFAULT_TUPLE_CAP).unwrap();
    let start = rbb::InitialConfig::Uniform.build(n, m).unwrap();
    let pi = stationary_dense(&k, start.loads()).unwrap();
    (k, pi)
}

fn expect(n: usize, m: u64, g: Observable) -> f64 {
    let (k, pi) = stationary(n, m);
    expected_observable(stationary_pairs(&k.space, &pi), &g)
}

#[test]
fn two_bins_two_balls() {
    let (k, pi) = stationary(2, 2);
    assert_eq!(k.space.states, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
    for (p, want) in pi.iter().zip([0.25, 0.5, 0.25]) {
        assert!((p - want).abs() < 1e-14);
    }
    assert!((expect(2, 2, Observable::EmptyBins) - 0.5).abs() < 1e-14);
}

#[test]
fn frozen_stationary_means() {
    // (n, m, E[F], E[sum x^2], E[max])
    let cases = [
        (2, 1, 1.0, 1.0, 1.0),
        (2, 3, 1.0 / 3.0, 19.0 / 3.0, 7.0 / 3.0),
        (3, 2, 4.0 / 3.0, 8.0 / 3.0, 4.0 / 3.0),
        (3, 3, 20.0 / 21.0, 109.0 / 21.0, 41.0 / 21.0),
        (3, 4, 100.0 / 137.0, 1188.0 / 137.0, 346.0 / 137.0),
    ];
    for (n, m, f, q, mx) in cases {
        assert!((expect(n, m, Observable::EmptyBins) - f).abs() < 1e-12, "F at ({n},{m})");
        assert!((expect(n, m, Observable::Quadratic) - q).abs() < 1e-12, "Q at ({n},{m})");
        assert!((expect(n, m, Observable::MaxLoad) - mx).abs() < 1e-12, "max at ({n},{m})");
    }
}

#[test]
fn frozen_two_bins_three_balls_law() {
    let (_, pi) = stationary(2, 3);
    for (p, want) in pi.iter().zip([1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]) {
        assert!((p - want).abs() < 1e-14);
    }
}

#[test]
fn dense_and_power_iteration_agree() {
    for (n, m) in [(3, 4), (4, 5), (5, 3)] {
        let (k, dense) = stationary(n, m);
        let start = rbb::InitialConfig::Uniform.build(n, m).unwrap();
        let power = stationary_distribution(&k, start.loads(), 1e-13, 200_000).unwrap();
        let gap: f64 = dense.iter().zip(&power).map(|(a, b)| (a - b).abs()).sum();
        assert!(gap < 1e-9, "({n},{m}) gap {gap}");
        assert!(l1_residual(&k, &dense) < 1e-12);
    }
}

#[test]
fn one_step_laws_from_small_states() {
    let law = one_step_distribution(&LoadVector::new(vec![1, 1]).unwrap(), DEFAULT_TUPLE_CAP).unwrap();
    assert_eq!(law.probability(&[2, 0]), 0.25);
    assert_eq!(law.probability(&[1, 1]), 0.5);
    assert_eq!(law.expectation(&Observable::Quadratic), 3.0);
    let law = one_step_distribution(&LoadVector::new(vec![5]).unwrap(), DEFAULT_TUPLE_CAP).unwrap();
    assert_eq!(law.probability(&[5]), 1.0);
}

#[test]
fn simulator_matches_law_on_small_states() {
    // A lighter sweep than the acceptance run: n <= 3, m <= 3, 2 * 10^4 samples each.
    let mut rng = RandomSource::new(11, 0);
    for n in 1..=3 {
        for m in 0..=3 {
            for s in enumerate_states(n, m, DEFAULT_STATE_CAP).unwrap().states {
                let x = LoadVector::new(s).unwrap();
                let r = chi_square_step(&x, 20_000, &mut rng).unwrap();
                assert!(r.passed(), "{x}: {r:?}");
            }
        }
    }
}

#[test]
fn csv_export() {
    let (k, pi) = stationary(2, 2);
    let mut buf = Vec::new();
    write_distribution_csv(&mut buf, stationary_pairs(&k.space, &pi)).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "state,probability\n2 0,0.25\n1 1,0.5\n0 2,0.25\n");
    let mut buf = Vec::new();
    write_kernel_csv(&mut buf, &k).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().count() > 3);
}
