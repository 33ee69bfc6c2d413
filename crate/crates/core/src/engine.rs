//! Step semantics for the repeated balls-into-bins process, the idealized
//! `n`-throw process that dominates it, their shared-sample coupling, and the
//! one-shot OneChoice baseline.
//!
//! Within a round removals and arrivals are simultaneous. Destinations are
//! drawn for non-empty bins in ascending bin order, so the `j`-th draw of a
//! round belongs to the `j`-th non-empty bin. Bin indices are 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{RbbError, Result};
use crate::load::{InitialConfig, LoadVector};
use crate::observables::{Observable, ObservationRow};
use crate::rng::Sampler;

/// Destinations drawn in one round, in draw order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub round: u64,
    pub destinations: Vec<usize>,
}

impl SampleBatch {
    pub fn new(round: u64) -> Self {
        Self {
            round,
            destinations: Vec::new(),
        }
    }
}

/// One RBB round in place: every non-empty bin sends one ball to a uniform bin.
pub fn rbb_step<S: Sampler>(state: &mut LoadVector, rng: &mut S, batch: &mut SampleBatch) {
    let n = state.bins();
    batch.destinations.clear();
    let loads = state.loads_mut();
    for load in loads.iter_mut() {
        if *load > 0 {
            *load -= 1;
            batch.destinations.push(rng.sample_bin(n));
        }
    }
    for &d in &batch.destinations {
        loads[d] += 1;
    }
}

/// One idealized round in place: non-empty bins lose a ball, then exactly
/// `n` balls are thrown. The total grows by the number of empty bins.
pub fn idealized_step<S: Sampler>(state: &mut LoadVector, rng: &mut S, batch: &mut SampleBatch) {
    let n = state.bins();
    batch.destinations.clear();
    batch.destinations.extend((0..n).map(|_| rng.sample_bin(n)));
    apply_idealized(state, &batch.destinations);
}

fn apply_idealized(state: &mut LoadVector, destinations: &[usize]) {
    let n = state.bins() as u64;
    let loads = state.loads_mut();
    let mut removed = 0u64;
    for load in loads.iter_mut() {
        if *load > 0 {
            *load -= 1;
            removed += 1;
        }
    }
    for &d in destinations {
        loads[d] += 1;
    }
    let balls = state.balls() - removed + n;
    state.set_balls(balls);
}

/// Advances an RBB copy `x` and an idealized copy `y` on one shared batch of
/// `n` destinations: `y` uses all of them, `x` the first `kappa(x)`.
/// Requires and preserves `x_i <= y_i` for all `i`.
pub fn coupled_step<S: Sampler>(
    x: &mut LoadVector,
    y: &mut LoadVector,
    rng: &mut S,
    batch: &mut SampleBatch,
) -> Result<()> {
    if x.bins() != y.bins() {
        return Err(RbbError::Precondition(format!(
            "coupled copies have {} and {} bins",
            x.bins(),
            y.bins()
        )));
    }
    if let Some(bin) = x.first_dominance_violation(y) {
        return Err(RbbError::DominanceViolated {
            bin,
            x: x.loads()[bin],
            y: y.loads()[bin],
        });
    }
    let n = x.bins();
    batch.destinations.clear();
    batch.destinations.extend((0..n).map(|_| rng.sample_bin(n)));

    let xl = x.loads_mut();
    let mut used = 0;
    for load in xl.iter_mut() {
        if *load > 0 {
            *load -= 1;
            used += 1;
        }
    }
    for &d in &batch.destinations[..used] {
        xl[d] += 1;
    }
    apply_idealized(y, &batch.destinations);
    Ok(())
}

/// Throws `balls` balls into `n` empty bins independently and uniformly.
pub fn one_choice_run<S: Sampler>(n: usize, balls: u64, rng: &mut S) -> Result<LoadVector> {
    let mut v = LoadVector::empty(n)?;
    let loads = v.loads_mut();
    for _ in 0..balls {
        loads[rng.sample_bin(n)] += 1;
    }
    v.set_balls(balls);
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Rbb,
    Idealized,
}

/// A running process: current loads, round counter and the last batch.
#[derive(Clone, Debug)]
pub struct Simulation<S> {
    process: Process,
    state: LoadVector,
    round: u64,
    batch: SampleBatch,
    rng: S,
}

impl<S: Sampler> Simulation<S> {
    pub fn new(process: Process, state: LoadVector, rng: S) -> Self {
        Self {
            process,
            state,
            round: 0,
            batch: SampleBatch::new(0),
            rng,
        }
    }

    pub fn state(&self) -> &LoadVector {
        &self.state
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Batch drawn by the most recent step; its `round` is the round it
    /// moved the state away from.
    pub fn last_batch(&self) -> &SampleBatch {
        &self.batch
    }

    pub fn rng_mut(&mut self) -> &mut S {
        &mut self.rng
    }

    pub fn step(&mut self) {
        self.batch.round = self.round;
        match self.process {
            Process::Rbb => rbb_step(&mut self.state, &mut self.rng, &mut self.batch),
            Process::Idealized => idealized_step(&mut self.state, &mut self.rng, &mut self.batch),
        }
        self.round += 1;
    }

    pub fn into_parts(self) -> (LoadVector, S) {
        (self.state, self.rng)
    }
}

/// Runs `rounds` steps from `init` and returns one row per round, round 0 included.
pub fn run_trace<S: Sampler>(
    process: Process,
    init: &InitialConfig,
    n: usize,
    m: u64,
    rounds: u64,
    rng: S,
    observers: &[Observable],
) -> Result<Vec<ObservationRow>> {
    let state = init.build(n, m)?;
    let mut sim = Simulation::new(process, state, rng);
    let mut rows = Vec::with_capacity(rounds as usize + 1);
    rows.push(ObservationRow::observe(0, sim.state(), observers));
    for _ in 0..rounds {
        sim.step();
        rows.push(ObservationRow::observe(sim.round(), sim.state(), observers));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;

    fn lv(v: &[u64]) -> LoadVector {
        LoadVector::new(v.to_vec()).unwrap()
    }

    /// Replays a fixed list of bins.
    struct Scripted(Vec<usize>, usize);

    impl Sampler for Scripted {
        fn next_u64(&mut self) -> u64 {
            unreachable!()
        }
        fn seed(&self) -> u64 {
            0
        }
        fn sample_bin(&mut self, _n: usize) -> usize {
            let d = self.0[self.1];
            self.1 += 1;
            d
        }
    }

    #[test]
    fn single_bin_is_fixed() {
        let mut x = lv(&[5]);
        let mut rng = RandomSource::new(1, 0);
        let mut b = SampleBatch::default();
        for _ in 0..10 {
            rbb_step(&mut x, &mut rng, &mut b);
            assert_eq!(x.loads(), &[5]);
        }
    }

    #[test]
    fn figure_one_configuration_moves_four_balls() {
        let mut x = lv(&[2, 3, 0, 1, 2, 0]);
        let mut rng = RandomSource::new(3, 0);
        let mut b = SampleBatch::default();
        rbb_step(&mut x, &mut rng, &mut b);
        assert_eq!(b.destinations.len(), 4);
        assert_eq!(x.balls(), 8);
        assert_eq!(x.loads().iter().sum::<u64>(), 8);
    }

    #[test]
    fn arrivals_and_removals_are_simultaneous() {
        // bins 0 and 1 non-empty; both balls land in bin 0.
        let mut x = lv(&[1, 1, 0]);
        let mut b = SampleBatch::default();
        rbb_step(&mut x, &mut Scripted(vec![0, 0], 0), &mut b);
        assert_eq!(x.loads(), &[2, 0, 0]);
        assert_eq!(b.destinations, vec![0, 0]);
    }

    #[test]
    fn two_bin_outcomes_by_script() {
        for (dest, expected) in [(0, [2, 0]), (1, [1, 1])] {
            let mut x = lv(&[2, 0]);
            rbb_step(&mut x, &mut Scripted(vec![dest], 0), &mut SampleBatch::default());
            assert_eq!(x.loads(), &expected);
        }
    }

    #[test]
    fn idealized_totals() {
        let mut y = lv(&[3]);
        idealized_step(&mut y, &mut RandomSource::new(1, 1), &mut SampleBatch::default());
        assert_eq!(y.loads(), &[3]);

        let mut y = lv(&[1, 0]);
        let mut b = SampleBatch::default();
        idealized_step(&mut y, &mut Scripted(vec![1, 1], 0), &mut b);
        assert_eq!(y.loads(), &[0, 2]);
        assert_eq!(y.balls(), 2);
        assert_eq!(b.destinations.len(), 2);
    }

    #[test]
    fn coupled_prefix_rule() {
        // x has one non-empty bin, so it uses only the first shared draw.
        let mut x = lv(&[1, 0, 0]);
        let mut y = lv(&[1, 1, 0]);
        let mut b = SampleBatch::default();
        coupled_step(&mut x, &mut y, &mut Scripted(vec![2, 1, 1], 0), &mut b).unwrap();
        assert_eq!(x.loads(), &[0, 0, 1]);
        assert_eq!(y.loads(), &[0, 2, 1]);
        assert_eq!(y.balls(), 3);
    }

    #[test]
    fn coupled_rejects_violation() {
        let mut x = lv(&[2, 0]);
        let mut y = lv(&[1, 1]);
        let err = coupled_step(&mut x, &mut y, &mut RandomSource::new(0, 0), &mut SampleBatch::default())
            .unwrap_err();
        assert!(matches!(err, RbbError::DominanceViolated { bin: 0, x: 2, y: 1 }));
    }

    #[test]
    fn coupled_single_bin_fixed() {
        let mut x = lv(&[1]);
        let mut y = lv(&[4]);
        let mut rng = RandomSource::new(0, 0);
        let mut b = SampleBatch::default();
        for _ in 0..5 {
            coupled_step(&mut x, &mut y, &mut rng, &mut b).unwrap();
        }
        assert_eq!((x.loads()[0], y.loads()[0]), (1, 4));
    }

    #[test]
    fn coupled_dominance_sweep_small() {
        let mut rng = RandomSource::new(11, 0);
        let mut b = SampleBatch::default();
        for rep in 0..10u64 {
            let m = rng.sample_bin(33) as u64;
            let base = one_choice_run(8, m, &mut rng).unwrap();
            let extra = one_choice_run(8, rep, &mut rng).unwrap();
            let mut x = base.clone();
            let mut y = LoadVector::new(
                base.loads().iter().zip(extra.loads()).map(|(a, b)| a + b).collect(),
            )
            .unwrap();
            for _ in 0..1_000 {
                coupled_step(&mut x, &mut y, &mut rng, &mut b).unwrap();
                assert!(x.first_dominance_violation(&y).is_none());
                assert_eq!(x.loads().iter().sum::<u64>(), m);
            }
        }
    }

    #[test]
    fn one_choice_basics() {
        let mut rng = RandomSource::new(2, 0);
        assert_eq!(one_choice_run(4, 0, &mut rng).unwrap().loads(), &[0, 0, 0, 0]);
        let v = one_choice_run(10, 1234, &mut rng).unwrap();
        assert_eq!(v.balls(), 1234);
        assert_eq!(v.loads().iter().sum::<u64>(), 1234);
    }

    #[test]
    fn trace_round_zero_and_determinism() {
        let obs = [Observable::EmptyBins, Observable::MaxLoad];
        let rows = run_trace(Process::Rbb, &InitialConfig::Uniform, 4, 8, 0, RandomSource::new(1, 0), &obs)
            .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].max_load, Some(2));

        let a = run_trace(Process::Rbb, &InitialConfig::SingleBin, 5, 9, 200, RandomSource::new(4, 2), &obs)
            .unwrap();
        let b = run_trace(Process::Rbb, &InitialConfig::SingleBin, 5, 9, 200, RandomSource::new(4, 2), &obs)
            .unwrap();
        assert_eq!(a.len(), 201);
        let render = |rows: &[ObservationRow]| rows.iter().map(|r| r.csv_line()).collect::<Vec<_>>().join("\n");
        assert_eq!(render(&a), render(&b));
    }

    #[test]
    fn trace_rejects_bad_explicit() {
        let err = run_trace(
            Process::Rbb,
            &InitialConfig::Explicit(vec![1, 1]),
            2,
            3,
            5,
            RandomSource::new(0, 0),
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, RbbError::BallsMismatch { .. }));
    }

    #[test]
    fn zero_balls_is_a_fixed_point() {
        let mut x = lv(&[0, 0, 0]);
        let mut b = SampleBatch::default();
        rbb_step(&mut x, &mut RandomSource::new(0, 0), &mut b);
        assert!(b.destinations.is_empty());
        assert_eq!(x.loads(), &[0, 0, 0]);
    }
}
