//! Ball identities on top of the RBB dynamics: each bin is a FIFO queue and
//! only the ball at the front of a queue is re-allocated in a round.
//!
//! Ball ids are `0..m`; the initial placement assigns ids in ascending bin
//! order, so the lowest id in a bin sits at its front. A ball's starting bin
//! counts as visited.

use std::collections::VecDeque;

use crate::error::{RbbError, Result};
use crate::load::{InitialConfig, LoadVector};
use crate::rng::{RandomSource, Sampler};

pub type BallId = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueueSystem {
    queues: Vec<VecDeque<BallId>>,
    balls: usize,
}

impl QueueSystem {
    pub fn from_loads(loads: &LoadVector) -> Result<Self> {
        let balls = usize::try_from(loads.balls())
            .ok()
            .filter(|&b| b <= BallId::MAX as usize)
            .ok_or_else(|| RbbError::InvalidConfig("too many balls to track identities".into()))?;
        let mut next: BallId = 0;
        let queues = loads
            .loads()
            .iter()
            .map(|&l| {
                let q: VecDeque<BallId> = (next..next + l as BallId).collect();
                next += l as BallId;
                q
            })
            .collect();
        Ok(Self { queues, balls })
    }

    pub fn bins(&self) -> usize {
        self.queues.len()
    }

    pub fn balls(&self) -> usize {
        self.balls
    }

    pub fn queue(&self, bin: usize) -> &VecDeque<BallId> {
        &self.queues[bin]
    }

    /// Queue lengths, i.e. the identity-free load vector.
    pub fn loads(&self) -> Vec<u64> {
        self.queues.iter().map(|q| q.len() as u64).collect()
    }
}

/// Per-ball visit sets and counters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageTracker {
    bins: usize,
    words: usize,
    visited: Vec<u64>,
    visited_count: Vec<u32>,
    pub switch_count: Vec<u64>,
    pub delay_count: Vec<u64>,
    pub cover_round: Vec<Option<u64>>,
    round: u64,
    uncovered: usize,
}

impl CoverageTracker {
    pub fn new(q: &QueueSystem) -> Self {
        let bins = q.bins();
        let words = bins.div_ceil(64);
        let m = q.balls();
        let mut t = Self {
            bins,
            words,
            visited: vec![0; m * words],
            visited_count: vec![0; m],
            switch_count: vec![0; m],
            delay_count: vec![0; m],
            cover_round: vec![None; m],
            round: 0,
            uncovered: m,
        };
        for (bin, queue) in q.queues.iter().enumerate() {
            for &ball in queue {
                t.visit(ball, bin);
            }
        }
        t
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn has_visited(&self, ball: BallId, bin: usize) -> bool {
        let w = self.visited[ball as usize * self.words + bin / 64];
        w >> (bin % 64) & 1 == 1
    }

    pub fn visited_bins(&self, ball: BallId) -> u32 {
        self.visited_count[ball as usize]
    }

    pub fn all_covered(&self) -> bool {
        self.uncovered == 0
    }

    fn visit(&mut self, ball: BallId, bin: usize) {
        let b = ball as usize;
        let word = &mut self.visited[b * self.words + bin / 64];
        let mask = 1u64 << (bin % 64);
        if *word & mask == 0 {
            *word |= mask;
            self.visited_count[b] += 1;
            if self.visited_count[b] as usize == self.bins {
                self.cover_round[b] = Some(self.round);
                self.uncovered -= 1;
            }
        }
    }
}

/// Order of same-round arrivals into one bin.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum TieBreakPolicy {
    ByBallId,
    /// Uniform permutation drawn from a stream of its own, so the load
    /// dynamics never depend on the policy.
    Random(RandomSource),
}

/// One FIFO round. Destinations are drawn for front balls in ascending
/// source-bin order, the same draws `rbb_step` would make.
pub fn traversal_step<S: Sampler>(
    q: &mut QueueSystem,
    cov: &mut CoverageTracker,
    policy: &mut TieBreakPolicy,
    rng: &mut S,
    moves: &mut Vec<(usize, BallId)>,
) {
    let n = q.bins();
    moves.clear();
    for queue in q.queues.iter_mut() {
        let Some(front) = queue.pop_front() else { continue };
        for &waiting in queue.iter() {
            cov.delay_count[waiting as usize] += 1;
        }
        moves.push((rng.sample_bin(n), front));
    }
    match policy {
        TieBreakPolicy::ByBallId => moves.sort_unstable(),
        TieBreakPolicy::Random(tie) => {
            tie.shuffle(moves);
            moves.sort_by_key(|&(dest, _)| dest);
        }
    }
    cov.round += 1;
    for &(dest, ball) in moves.iter() {
        q.queues[dest].push_back(ball);
        cov.switch_count[ball as usize] += 1;
        cov.visit(ball, dest);
    }
}

/// Domain tag of the tie-breaking stream forked from the main one.
pub const TIE_STREAM_DOMAIN: u64 = 0x7469_6562_7265_616b;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieBreak {
    ByBallId,
    Random,
}

/// Runs FIFO rounds until every ball has visited every bin or `cap` rounds
/// have elapsed. `None` marks a ball still uncovered at the cap.
pub fn cover_times(
    n: usize,
    m: u64,
    init: &InitialConfig,
    tie: TieBreak,
    cap: u64,
    rng: &mut RandomSource,
) -> Result<(Vec<Option<u64>>, CoverageTracker)> {
    let loads = init.build(n, m)?;
    let mut q = QueueSystem::from_loads(&loads)?;
    let mut cov = CoverageTracker::new(&q);
    let mut policy = match tie {
        TieBreak::ByBallId => TieBreakPolicy::ByBallId,
        TieBreak::Random => TieBreakPolicy::Random(rng.fork(TIE_STREAM_DOMAIN)),
    };
    let mut moves = Vec::with_capacity(n);
    while !cov.all_covered() && cov.round() < cap {
        traversal_step(&mut q, &mut cov, &mut policy, rng, &mut moves);
    }
    Ok((cov.cover_round.clone(), cov))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchSummary {
    pub switch_count: Vec<u64>,
    pub delay_count: Vec<u64>,
    /// Fraction of the `n` bins each ball has visited.
    pub coverage: Vec<f64>,
    pub covered_fraction: f64,
}

pub fn switch_stats(cov: &CoverageTracker) -> SwitchSummary {
    let m = cov.switch_count.len();
    let covered = cov.cover_round.iter().filter(|c| c.is_some()).count();
    SwitchSummary {
        switch_count: cov.switch_count.clone(),
        delay_count: cov.delay_count.clone(),
        coverage: cov
            .visited_count
            .iter()
            .map(|&v| f64::from(v) / cov.bins as f64)
            .collect(),
        covered_fraction: if m == 0 { 1.0 } else { covered as f64 / m as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{rbb_step, SampleBatch};

    fn system(loads: &[u64]) -> (QueueSystem, CoverageTracker) {
        let q = QueueSystem::from_loads(&LoadVector::new(loads.to_vec()).unwrap()).unwrap();
        let c = CoverageTracker::new(&q);
        (q, c)
    }

    #[test]
    fn fifo_front_moves_and_second_waits() {
        let (mut q, mut cov) = system(&[2, 0]);
        assert_eq!(q.queue(0), &VecDeque::from([0, 1]));
        let mut rng = RandomSource::new(1, 0);
        traversal_step(&mut q, &mut cov, &mut TieBreakPolicy::ByBallId, &mut rng, &mut Vec::new());
        assert_eq!(q.queue(0).front(), Some(&1));
        assert_eq!(cov.delay_count, vec![0, 1]);
        assert_eq!(cov.switch_count, vec![1, 0]);
        assert_eq!(q.balls(), 2);
    }

    #[test]
    fn single_bin_covered_at_start() {
        let (mut q, mut cov) = system(&[1]);
        assert_eq!(cov.cover_round, vec![Some(0)]);
        let mut rng = RandomSource::new(1, 0);
        for _ in 0..3 {
            traversal_step(&mut q, &mut cov, &mut TieBreakPolicy::ByBallId, &mut rng, &mut Vec::new());
        }
        assert_eq!(cov.cover_round, vec![Some(0)]);
        assert_eq!(cov.switch_count, vec![3]);
        let (times, _) = cover_times(1, 7, &InitialConfig::Uniform, TieBreak::Random, 10, &mut rng).unwrap();
        assert!(times.iter().all(|t| *t == Some(0)));
    }

    #[test]
    fn fresh_tracker_has_no_switches() {
        let (_, cov) = system(&[3, 1, 0]);
        let s = switch_stats(&cov);
        assert!(s.switch_count.iter().all(|&c| c == 0));
        assert_eq!(s.coverage, vec![1.0 / 3.0; 4]);
    }

    #[test]
    fn one_step_switches_kappa_balls() {
        let (mut q, mut cov) = system(&[3, 0, 2, 1, 0]);
        let mut rng = RandomSource::new(5, 0);
        traversal_step(&mut q, &mut cov, &mut TieBreakPolicy::ByBallId, &mut rng, &mut Vec::new());
        let s = switch_stats(&cov);
        assert_eq!(s.switch_count.iter().filter(|&&c| c == 1).count(), 3);
        assert_eq!(s.switch_count.iter().sum::<u64>(), 3);
    }

    #[test]
    fn ball_id_ties_enter_in_id_order() {
        struct AllToZero;
        impl Sampler for AllToZero {
            fn next_u64(&mut self) -> u64 {
                0
            }
            fn seed(&self) -> u64 {
                0
            }
        }
        let (mut q, mut cov) = system(&[0, 1, 1, 1]);
        traversal_step(&mut q, &mut cov, &mut TieBreakPolicy::ByBallId, &mut AllToZero, &mut Vec::new());
        assert_eq!(q.queue(0), &VecDeque::from([0, 1, 2]));
    }

    #[test]
    fn loads_match_rbb_under_shared_draws() {
        let init = LoadVector::new(vec![4, 0, 1, 3, 0, 2, 0, 0]).unwrap();
        let mut q = QueueSystem::from_loads(&init).unwrap();
        let mut cov = CoverageTracker::new(&q);
        let mut x = init.clone();
        let mut rng_a = RandomSource::new(9, 1);
        let mut rng_b = RandomSource::new(9, 1);
        let mut policy = TieBreakPolicy::Random(RandomSource::new(123, 0));
        let mut batch = SampleBatch::default();
        let mut moves = Vec::new();
        for _ in 0..10_000 {
            traversal_step(&mut q, &mut cov, &mut policy, &mut rng_a, &mut moves);
            rbb_step(&mut x, &mut rng_b, &mut batch);
            assert_eq!(q.loads(), x.loads());
        }
    }

    #[test]
    fn coverage_is_monotone() {
        let (mut q, mut cov) = system(&[2, 2, 2, 2]);
        let mut rng = RandomSource::new(8, 0);
        let mut prev = cov.clone();
        for _ in 0..200 {
            traversal_step(&mut q, &mut cov, &mut TieBreakPolicy::ByBallId, &mut rng, &mut Vec::new());
            for ball in 0..8 {
                for bin in 0..4 {
                    if prev.has_visited(ball, bin) {
                        assert!(cov.has_visited(ball, bin));
                    }
                }
                if let Some(r) = prev.cover_round[ball as usize] {
                    assert_eq!(cov.cover_round[ball as usize], Some(r));
                }
            }
            prev = cov.clone();
        }
    }
}
