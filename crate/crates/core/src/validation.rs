//! Runnable checks of the process's drift inequalities, coupling, tail bounds
//! and baseline facts.
//!
//! Mean-bound checks pass when the sample mean is at most the bound plus three
//! standard errors; goodness-of-fit checks use significance 0.001; statements
//! that hold with high probability are checked as success frequencies.
//! Configurations small enough for the exact oracle (`n <= 3`, `m <= 4`) are
//! checked exactly instead.

use std::collections::HashMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::engine::{coupled_step, one_choice_run, rbb_step, Process, SampleBatch, Simulation};
use crate::error::{RbbError, Result};
use crate::exact::{enumerate_states, one_step_distribution, DEFAULT_STATE_CAP, DEFAULT_TUPLE_CAP};
use crate::load::{InitialConfig, LoadVector};
use crate::observables::{
    adjusted_potential_series, empty_stats, exponential_drift_bound, log_exponential_drift_bound,
    log_exponential_potential, quadratic_drift_bound, quadratic_potential, Observable,
    ObservationRow, PotentialParams,
};
use crate::rng::{RandomSource, Sampler};
use crate::stats::{chi_square_critical, Estimate, Moments};

/// Goodness-of-fit significance.
pub const CHI_SQUARE_SIGNIFICANCE: f64 = 0.001;
/// Standard errors of slack granted to Monte Carlo mean bounds.
pub const SE_MARGIN: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Which side of the threshold the statistic must land on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub verdict: Verdict,
    pub statistic: f64,
    pub threshold: f64,
    pub direction: Direction,
    pub seed: u64,
    pub estimate: Option<Estimate>,
    pub detail: String,
}

impl CheckReport {
    pub fn new(
        name: impl Into<String>,
        statistic: f64,
        direction: Direction,
        threshold: f64,
        seed: u64,
    ) -> Self {
        let ok = match direction {
            Direction::AtMost => statistic <= threshold,
            Direction::AtLeast => statistic >= threshold,
        };
        Self {
            name: name.into(),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            statistic,
            threshold,
            direction,
            seed,
            estimate: None,
            detail: String::new(),
        }
    }

    pub fn with_estimate(mut self, est: Estimate) -> Self {
        self.estimate = Some(est);
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub const CSV_HEADER: &'static str = "name,verdict,statistic,threshold,seed";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.name, self.verdict, self.statistic, self.threshold, self.seed
        )
    }
}

fn exact_regime(x: &LoadVector) -> bool {
    x.bins() <= 3 && x.balls() <= 4
}

fn require_samples(samples: u64) -> Result<()> {
    if samples < 10_000 {
        return Err(RbbError::Precondition(format!(
            "Monte Carlo checks need at least 10^4 samples, got {samples}"
        )));
    }
    Ok(())
}

/// The bound a drift check compares against. `NegativeControl` drops the
/// additive slack of the true bound, which the process is known to exceed;
/// a check that still passes against it is vacuous.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundVariant {
    Lemma,
    NegativeControl,
}

fn quadratic_bound_for(x: &LoadVector, variant: BoundVariant) -> f64 {
    let e = empty_stats(x);
    let n = x.bins() as u64;
    let bound = quadratic_drift_bound(quadratic_potential(x), x.balls(), n, e.empty);
    match variant {
        BoundVariant::Lemma => bound,
        BoundVariant::NegativeControl => bound - 2.0 * n as f64,
    }
}

/// Draws `samples` independent one-round successors of `x` and feeds each to `f`.
fn branch<S: Sampler>(x: &LoadVector, samples: u64, rng: &mut S, mut f: impl FnMut(&LoadVector)) {
    let mut scratch = x.clone();
    let mut batch = SampleBatch::default();
    for _ in 0..samples {
        scratch.copy_from(x);
        rbb_step(&mut scratch, rng, &mut batch);
        f(&scratch);
    }
}

pub fn check_quadratic_drift<S: Sampler>(x: &LoadVector, samples: u64, rng: &mut S) -> Result<CheckReport> {
    check_quadratic_drift_variant(x, samples, rng, BoundVariant::Lemma)
}

pub fn check_quadratic_drift_variant<S: Sampler>(
    x: &LoadVector,
    samples: u64,
    rng: &mut S,
    variant: BoundVariant,
) -> Result<CheckReport> {
    let bound = quadratic_bound_for(x, variant);
    let name = match variant {
        BoundVariant::Lemma => "quadratic_drift",
        BoundVariant::NegativeControl => "negative_control_quadratic_drift",
    };
    if exact_regime(x) {
        let law = one_step_distribution(x, DEFAULT_TUPLE_CAP)?;
        let mean = law.expectation(&Observable::Quadratic);
        return Ok(CheckReport::new(name, mean, Direction::AtMost, bound, rng.seed())
            .with_detail(format!("exact conditional mean from {x}")));
    }
    require_samples(samples)?;
    let mut moments = Moments::default();
    branch(x, samples, rng, |next| moments.push(quadratic_potential(next) as f64));
    let est = moments.estimate();
    Ok(CheckReport::new(
        name,
        est.mean,
        Direction::AtMost,
        bound + SE_MARGIN * est.std_error,
        rng.seed(),
    )
    .with_estimate(est)
    .with_detail(format!("bound {bound}")))
}

pub fn check_exponential_drift<S: Sampler>(
    x: &LoadVector,
    alpha: f64,
    samples: u64,
    rng: &mut S,
) -> Result<CheckReport> {
    check_exponential_drift_variant(x, alpha, samples, rng, BoundVariant::Lemma)
}

/// Works with `Phi' / Phi` so that large potentials never leave log space.
pub fn check_exponential_drift_variant<S: Sampler>(
    x: &LoadVector,
    alpha: f64,
    samples: u64,
    rng: &mut S,
    variant: BoundVariant,
) -> Result<CheckReport> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(RbbError::Precondition("alpha must be positive".into()));
    }
    let n = x.bins() as u64;
    let kappa = empty_stats(x).nonempty;
    let log_phi = log_exponential_potential(x.loads(), alpha);
    let bound_ratio = match variant {
        BoundVariant::Lemma => (log_exponential_drift_bound(log_phi, alpha, n, kappa) - log_phi).exp(),
        BoundVariant::NegativeControl => {
            (-alpha).exp() + (n - kappa) as f64 * (-log_phi).exp()
        }
    };
    let name = match variant {
        BoundVariant::Lemma => "exponential_drift",
        BoundVariant::NegativeControl => "negative_control_exponential_drift",
    };
    if exact_regime(x) {
        let law = one_step_distribution(x, DEFAULT_TUPLE_CAP)?;
        let ratio: f64 = law
            .iter()
            .map(|(s, p)| p * (log_exponential_potential(s, alpha) - log_phi).exp())
            .sum();
        return Ok(CheckReport::new(name, ratio, Direction::AtMost, bound_ratio, rng.seed())
            .with_detail(format!("exact E[Phi'] / Phi from {x}, alpha {alpha}")));
    }
    require_samples(samples)?;
    let mut moments = Moments::default();
    branch(x, samples, rng, |next| {
        moments.push((log_exponential_potential(next.loads(), alpha) - log_phi).exp())
    });
    let est = moments.estimate();
    Ok(CheckReport::new(
        name,
        est.mean,
        Direction::AtMost,
        bound_ratio + SE_MARGIN * est.std_error,
        rng.seed(),
    )
    .with_estimate(est)
    .with_detail(format!("ratio to current Phi; bound ratio {bound_ratio}")))
}

/// Every state with `n <= max_n` bins and `m <= max_m` balls: the exact
/// conditional mean of the quadratic potential minus its drift bound. Passes
/// when the largest difference is at most 0.
pub fn exact_quadratic_drift_sweep(max_n: usize, max_m: u64) -> Result<CheckReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut states = 0;
    for n in 1..=max_n {
        for m in 0..=max_m {
            for s in enumerate_states(n, m, DEFAULT_STATE_CAP)?.states {
                let x = LoadVector::new(s)?;
                let law = one_step_distribution(&x, DEFAULT_TUPLE_CAP)?;
                let gap = law.expectation(&Observable::Quadratic) - quadratic_bound_for(&x, BoundVariant::Lemma);
                worst = worst.max(gap);
                states += 1;
            }
        }
    }
    Ok(CheckReport::new("quadratic_drift_exact", worst, Direction::AtMost, 0.0, 0)
        .with_detail(format!("{states} states, n <= {max_n}, m <= {max_m}")))
}

/// As [`exact_quadratic_drift_sweep`] for the exponential bound; the
/// statistic is the largest relative excess `E[Phi'] / bound - 1`.
pub fn exact_exponential_drift_sweep(max_n: usize, max_m: u64, alphas: &[f64]) -> Result<CheckReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut states = 0;
    for &alpha in alphas {
        for n in 1..=max_n {
            for m in 0..=max_m {
                for s in enumerate_states(n, m, DEFAULT_STATE_CAP)?.states {
                    let x = LoadVector::new(s)?;
                    let law = one_step_distribution(&x, DEFAULT_TUPLE_CAP)?;
                    let mean = law.expectation(&Observable::Exponential { alpha });
                    let phi = Observable::Exponential { alpha }.evaluate(x.loads());
                    let bound = exponential_drift_bound(phi, alpha, n as u64, empty_stats(&x).nonempty);
                    worst = worst.max(mean / bound - 1.0);
                    states += 1;
                }
            }
        }
    }
    Ok(CheckReport::new("exponential_drift_exact", worst, Direction::AtMost, 0.0, 0)
        .with_detail(format!("{states} (state, alpha) pairs, alphas {alphas:?}")))
}

/// Trace whose adjusted potential is checked.
#[derive(Clone, Debug)]
pub struct SupermartingaleSpec {
    pub process: Process,
    pub n: usize,
    pub m: u64,
    pub init: InitialConfig,
    pub rounds: u64,
    /// Number of evenly spaced rounds in `[t0, rounds)` that are branched.
    pub sampled_rounds: u64,
}

/// Domain tag of the branching stream, kept apart from the trace stream.
const BRANCH_DOMAIN: u64 = 0x6272_616e_6368;

/// Estimates `E[adjusted^{s+1} | state at s]` by branching `samples`
/// one-round successors from the frozen state at each sampled round, and
/// requires it to be at most the current value plus three standard errors.
///
/// Stopped entries (value 0) pass trivially, as do rounds where the threshold
/// event holds, since the next value is then exactly 0. For the remaining
/// rounds the comparison is carried out on the ratio to the current value,
/// `E[Phi^{s+1}] * exp(alpha f^s - 1.5 alpha^2) / Phi^s <= 1`, which is the
/// same inequality divided by a positive factor.
pub fn check_supermartingale(
    spec: &SupermartingaleSpec,
    t0: u64,
    params: &PotentialParams,
    samples: u64,
    rng: &RandomSource,
) -> Result<CheckReport> {
    if t0 >= spec.rounds {
        return Err(RbbError::RangeViolation { t0, t1: spec.rounds });
    }
    let alpha = params.alpha;
    let observers = [Observable::EmptyBins, Observable::Exponential { alpha }];
    let span = spec.rounds - t0;
    let count = spec.sampled_rounds.clamp(1, span);
    let picks: Vec<u64> = (0..count).map(|j| t0 + j * span / count).collect();

    let mut sim = Simulation::new(spec.process, spec.init.build(spec.n, spec.m)?, rng.clone());
    let mut rows: Vec<ObservationRow> = Vec::with_capacity(spec.rounds as usize + 1);
    let mut frozen = Vec::with_capacity(picks.len());
    let mut next_pick = picks.iter().peekable();
    loop {
        rows.push(ObservationRow::observe(sim.round(), sim.state(), &observers));
        if next_pick.peek() == Some(&&sim.round()) {
            frozen.push((sim.round(), sim.state().clone()));
            next_pick.next();
        }
        if sim.round() == spec.rounds {
            break;
        }
        sim.step();
    }
    let series = adjusted_potential_series(&rows, t0, params)?;

    let mut branch_rng = rng.fork(BRANCH_DOMAIN);
    let log_threshold = params.log_threshold();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_est = None;
    let mut nontrivial = 0;
    let mut stopped = 0;
    let mut event = 0;
    for (s, state) in &frozen {
        let idx = (s - t0) as usize;
        if series.stopped[idx] {
            stopped += 1;
            continue;
        }
        let row = &rows[*s as usize - rows[0].round as usize];
        let exp = row.exponential.expect("observed");
        if exp.log_phi <= log_threshold {
            event += 1;
            continue;
        }
        nontrivial += 1;
        let f = row.empty.expect("observed").fraction();
        let weight = alpha * f - 1.5 * alpha * alpha;
        let mut moments = Moments::default();
        let mut scratch = state.clone();
        let mut batch = SampleBatch::default();
        for _ in 0..samples {
            scratch.copy_from(state);
            match spec.process {
                Process::Rbb => rbb_step(&mut scratch, &mut branch_rng, &mut batch),
                Process::Idealized => {
                    crate::engine::idealized_step(&mut scratch, &mut branch_rng, &mut batch)
                }
            }
            let log_next = log_exponential_potential(scratch.loads(), alpha);
            moments.push((log_next + weight - exp.log_phi).exp());
        }
        let est = moments.estimate();
        let margin = est.mean - SE_MARGIN * est.std_error;
        if margin > worst {
            worst = margin;
            worst_est = Some(est);
        }
    }
    let statistic = if nontrivial == 0 { 0.0 } else { worst };
    let mut report = CheckReport::new("supermartingale", statistic, Direction::AtMost, 1.0, rng.seed())
        .with_detail(format!(
            "{} sampled rounds: {nontrivial} branched, {stopped} stopped, {event} at threshold; alpha {alpha}",
            frozen.len()
        ));
    report.estimate = worst_est;
    Ok(report)
}

/// Runs `reps` coupled traces from `x = y` (a random OneChoice placement of
/// `m` balls) and stops at the first dominance violation.
pub fn check_coupling_dominance<S: Sampler>(
    n: usize,
    m: u64,
    rounds: u64,
    reps: u64,
    rng: &mut S,
) -> Result<CheckReport> {
    let mut batch = SampleBatch::default();
    for rep in 0..reps {
        let mut x = one_choice_run(n, m, rng)?;
        let mut y = x.clone();
        for round in 0..rounds {
            coupled_step(&mut x, &mut y, rng, &mut batch)?;
            if let Some(bin) = x.first_dominance_violation(&y) {
                return Ok(CheckReport::new("coupling_dominance", 1.0, Direction::AtMost, 0.0, rng.seed())
                    .with_detail(format!("rep {rep}, round {round}, bin {bin}")));
            }
        }
    }
    Ok(CheckReport::new("coupling_dominance", 0.0, Direction::AtMost, 0.0, rng.seed())
        .with_detail(format!("{reps} reps x {rounds} rounds, n {n}, m {m}")))
}

/// Natural log of a big integer, accurate to f64 precision.
fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_string().parse::<f64>().map_or(f64::NAN, f64::ln);
    }
    let shift = bits - 64;
    let top: BigUint = x >> shift;
    let top = top.to_u64_digits().first().copied().unwrap_or(0) as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `P[Bin(n, 1/n) = g] <= 2^-g` for all `n` in the range and `g` in `1..=n`,
/// decided in exact integer arithmetic as
/// `C(n, g) (n-1)^(n-g) 2^g <= n^n`.
/// The statistic is the largest ratio `pmf / 2^-g` found.
pub fn check_binomial_bound(n_lo: u64, n_hi: u64) -> Result<CheckReport> {
    if n_lo < 8 || n_hi > 10_000 || n_lo > n_hi {
        return Err(RbbError::Precondition(format!(
            "n range [{n_lo}, {n_hi}] must lie within [8, 10^4]"
        )));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0u64;
    let mut worst_at = (0, 0);
    for n in n_lo..=n_hi {
        let big_n = BigUint::from(n);
        let rhs = big_n.pow(n as u32);
        let ln_rhs = ln_big(&rhs);
        let n1 = BigUint::from(n - 1);
        // terms for g = 1: C(n,1) = n, (n-1)^(n-1)
        let mut binom = big_n.clone();
        let mut power = n1.pow((n - 1) as u32);
        let mut two = BigUint::from(2u32);
        for g in 1..=n {
            let lhs = &binom * &power * &two;
            if lhs > rhs {
                violations += 1;
            }
            let ratio = (ln_big(&lhs) - ln_rhs).exp();
            if ratio > worst {
                worst = ratio;
                worst_at = (n, g);
            }
            if g < n {
                binom = binom * BigUint::from(n - g) / BigUint::from(g + 1);
                power /= &n1;
                two <<= 1;
            }
        }
    }
    let mut report = CheckReport::new("binomial_bound", worst, Direction::AtMost, 1.0, 0).with_detail(
        format!("{violations} violations over n in [{n_lo}, {n_hi}]; max ratio at n={}, g={}", worst_at.0, worst_at.1),
    );
    if violations > 0 {
        report.verdict = Verdict::Fail;
    }
    Ok(report)
}

/// Fraction of one-round successors whose quadratic potential moves by more
/// than `2 m ln n + 3n`; passes when at most `10^-3`. The starting
/// configuration must satisfy `m >= n` and `max_load <= (m / n) ln n`
/// (waived for `n = 1`, where the potential cannot change).
pub fn check_quadratic_change<S: Sampler>(x: &LoadVector, samples: u64, rng: &mut S) -> Result<CheckReport> {
    let n = x.bins() as f64;
    let m = x.balls() as f64;
    if x.bins() > 1 {
        if m < n {
            return Err(RbbError::Precondition(format!("needs m >= n, got m={m}, n={n}")));
        }
        let cap = m / n * n.ln();
        if x.max_load() as f64 > cap {
            return Err(RbbError::Precondition(format!(
                "max load {} exceeds (m/n) ln n = {cap:.3}",
                x.max_load()
            )));
        }
    }
    let bound = 2.0 * m * n.ln() + 3.0 * n;
    let before = quadratic_potential(x) as f64;
    let mut violations = 0u64;
    let mut largest = 0.0f64;
    branch(x, samples, rng, |next| {
        let change = (quadratic_potential(next) as f64 - before).abs();
        largest = largest.max(change);
        if change > bound {
            violations += 1;
        }
    });
    let fraction = if samples == 0 { 0.0 } else { violations as f64 / samples as f64 };
    Ok(CheckReport::new("quadratic_change", fraction, Direction::AtMost, 1e-3, rng.seed())
        .with_detail(format!("bound {bound:.1}, largest change {largest}, {samples} samples")))
}

/// Step laws with verifiable drift and variance properties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkLaw {
    /// `+1` or `-1` with probability 1/2 each.
    SymmetricPm1,
    /// One bin of the idealized process: `X - 1{X > 0} + Bin(n, 1/n)`.
    IdealizedSingleBin { n: u32 },
}

impl WalkLaw {
    fn step<S: Sampler>(&self, x: u64, rng: &mut S) -> i64 {
        match *self {
            WalkLaw::SymmetricPm1 => {
                if rng.next_u64() & 1 == 0 {
                    x as i64 + 1
                } else {
                    x as i64 - 1
                }
            }
            WalkLaw::IdealizedSingleBin { n } => {
                let hits = (0..n).filter(|_| rng.sample_bin(n as usize) == 0).count() as i64;
                x as i64 - i64::from(x > 0) + hits
            }
        }
    }

    /// Smallest `E[D^2]` over positive states.
    pub fn second_moment_floor(&self) -> f64 {
        match *self {
            WalkLaw::SymmetricPm1 => 1.0,
            WalkLaw::IdealizedSingleBin { n } => 1.0 - 1.0 / f64::from(n),
        }
    }

    /// Whether `E[D] >= 0` holds in every state, including 0.
    fn non_negative_drift_everywhere(&self) -> bool {
        matches!(self, WalkLaw::IdealizedSingleBin { .. })
    }
}

/// Walk parameters: state cap `M`, start `s`, upper target `k` and variance
/// floor `sigma^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftWalkConfig {
    pub max_state: u64,
    pub start: u64,
    pub target: u64,
    pub sigma2: f64,
    pub law: WalkLaw,
}

impl DriftWalkConfig {
    fn validate(&self) -> Result<()> {
        if !(0 < self.start && self.start < self.target && self.target <= self.max_state) {
            return Err(RbbError::Precondition(format!(
                "need 0 < s < k <= M, got s={}, k={}, M={}",
                self.start, self.target, self.max_state
            )));
        }
        if self.sigma2.is_nan() || self.sigma2 <= 0.0 || self.sigma2 > self.law.second_moment_floor() {
            return Err(RbbError::Precondition(format!(
                "sigma^2 = {} must be positive and at most the law's floor {}",
                self.sigma2,
                self.law.second_moment_floor()
            )));
        }
        Ok(())
    }

    /// Runs until `X = 0` or `X >= upper` (or only `X >= upper` when
    /// `absorb_at_zero` is false); returns `(tau, X_tau)`.
    fn run<S: Sampler>(&self, upper: u64, absorb_at_zero: bool, rng: &mut S) -> Result<(u64, u64)> {
        let mut x = self.start;
        let mut t = 0u64;
        loop {
            if x >= upper || (absorb_at_zero && x == 0) {
                return Ok((t, x));
            }
            let next = self.law.step(x, rng);
            if next < 0 || next as u64 > self.max_state {
                return Err(RbbError::Precondition(format!(
                    "walk left the state space {{0..{}}}: {next}",
                    self.max_state
                )));
            }
            x = next as u64;
            t += 1;
        }
    }
}

/// Optional-stopping consequences for bounded walks:
///
/// * `drift_ruin`: `P[X_tau = 0] >= 1 - s/k` for `tau` the first hit of 0 or `k`.
/// * `drift_hitting_time`: `E[tau] <= 5 s^2 / sigma^2` for `tau` the first hit of 0 or `2s`.
/// * `drift_upward`: for laws with non-negative drift everywhere,
///   `E[tau] <= (E[X_tau^2] - s^2) / sigma^2` for `tau` the first time `X >= k`.
pub fn check_drift_lemmas<S: Sampler>(cfg: &DriftWalkConfig, reps: u64, rng: &mut S) -> Result<Vec<CheckReport>> {
    cfg.validate()?;
    let s = cfg.start as f64;
    let k = cfg.target as f64;

    let ruin: Moments = (0..reps)
        .map(|_| cfg.run(cfg.target, true, rng).map(|(_, x)| f64::from(x == 0)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let est = ruin.estimate();
    let floor = 1.0 - s / k;
    let mut reports = vec![CheckReport::new(
        "drift_ruin",
        est.mean,
        Direction::AtLeast,
        floor - SE_MARGIN * est.std_error,
        rng.seed(),
    )
    .with_estimate(est)
    .with_detail(format!("1 - s/k = {floor}"))];

    let taus: Moments = (0..reps)
        .map(|_| cfg.run(2 * cfg.start, true, rng).map(|(t, _)| t as f64))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let est = taus.estimate();
    let limit = 5.0 * s * s / cfg.sigma2;
    reports.push(
        CheckReport::new("drift_hitting_time", est.mean, Direction::AtMost, limit, rng.seed())
            .with_estimate(est)
            .with_detail(format!("5 s^2 / sigma^2 with sigma^2 = {}", cfg.sigma2)),
    );

    if cfg.law.non_negative_drift_everywhere() {
        let slack: Moments = (0..reps)
            .map(|_| {
                cfg.run(cfg.target, false, rng).map(|(t, x)| {
                    let x = x as f64;
                    t as f64 - (x * x - s * s) / cfg.sigma2
                })
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .collect();
        let est = slack.estimate();
        reports.push(
            CheckReport::new(
                "drift_upward",
                est.mean,
                Direction::AtMost,
                SE_MARGIN * est.std_error,
                rng.seed(),
            )
            .with_estimate(est)
            .with_detail("mean of tau - (X_tau^2 - s^2) / sigma^2"),
        );
    }
    Ok(reports)
}

/// OneChoice facts: with `ceil(c n ln n)` balls the maximum load reaches
/// `(c + sqrt(c)/10) ln n` in at least 95% of runs, and with `n` balls the
/// quadratic potential stays at most `3n` in at least 99% of runs.
pub fn check_one_choice<S: Sampler>(n: usize, c: f64, reps: u64, rng: &mut S) -> Result<Vec<CheckReport>> {
    let ln_n = (n as f64).ln();
    if n < 2 || c < 1.0 / ln_n {
        return Err(RbbError::Precondition(format!("needs n >= 2 and c >= 1/ln n, got c={c}")));
    }
    let balls = (c * n as f64 * ln_n).ceil() as u64;
    let level = (c + c.sqrt() / 10.0) * ln_n;
    if level > balls as f64 {
        return Err(RbbError::Precondition(format!(
            "target max load {level:.2} exceeds the {balls} balls thrown"
        )));
    }
    let mut hits = 0u64;
    let mut quad_ok = 0u64;
    for _ in 0..reps {
        if one_choice_run(n, balls, rng)?.max_load() as f64 >= level {
            hits += 1;
        }
        if quadratic_potential(&one_choice_run(n, n as u64, rng)?) <= 3 * n as u128 {
            quad_ok += 1;
        }
    }
    let reps_f = reps.max(1) as f64;
    Ok(vec![
        CheckReport::new("one_choice_max_load", hits as f64 / reps_f, Direction::AtLeast, 0.95, rng.seed())
            .with_detail(format!("{hits}/{reps} runs reached {level:.3} with {balls} balls")),
        CheckReport::new("one_choice_quadratic", quad_ok as f64 / reps_f, Direction::AtLeast, 0.99, rng.seed())
            .with_detail(format!("{quad_ok}/{reps} runs had quadratic potential <= {}", 3 * n)),
    ])
}

/// Chi-square statistic of `samples` simulated successors of `x` against the
/// exact one-round law; passes at significance 0.001.
pub fn chi_square_step<S: Sampler>(x: &LoadVector, samples: u64, rng: &mut S) -> Result<CheckReport> {
    let law = one_step_distribution(x, DEFAULT_TUPLE_CAP)?;
    let outcomes: Vec<(&Vec<u64>, u64)> = law.outcomes.iter().map(|(s, &c)| (s, c)).collect();
    let radix = x.balls() + 1;
    let encodable = (radix as u128).checked_pow(x.bins() as u32).is_some_and(|v| v <= u64::MAX as u128);
    let encode = |s: &[u64]| s.iter().rev().fold(0u64, |acc, &l| acc * radix + l);
    let mut keyed: HashMap<u64, usize> = HashMap::new();
    let mut by_state: HashMap<&[u64], usize> = HashMap::new();
    for (i, (s, _)) in outcomes.iter().enumerate() {
        if encodable {
            keyed.insert(encode(s), i);
        } else {
            by_state.insert(s.as_slice(), i);
        }
    }
    let mut counts = vec![0u64; outcomes.len()];
    let mut stray = 0u64;
    branch(x, samples, rng, |next| {
        let hit = if encodable {
            keyed.get(&encode(next.loads()))
        } else {
            by_state.get(next.loads())
        };
        match hit {
            Some(&i) => counts[i] += 1,
            None => stray += 1,
        }
    });
    let df = outcomes.len() as u64 - 1;
    let critical = chi_square_critical(df, CHI_SQUARE_SIGNIFICANCE);
    if stray > 0 {
        return Ok(CheckReport::new("chi_square_step", f64::INFINITY, Direction::AtMost, critical, rng.seed())
            .with_detail(format!("{stray} samples outside the exact support of {x}")));
    }
    let statistic: f64 = outcomes
        .iter()
        .zip(&counts)
        .map(|(&(_, c), &obs)| {
            let expected = samples as f64 * c as f64 / law.total as f64;
            (obs as f64 - expected).powi(2) / expected
        })
        .sum();
    Ok(CheckReport::new("chi_square_step", statistic, Direction::AtMost, critical, rng.seed())
        .with_detail(format!("{x}: {} outcomes, df {df}, {samples} samples", outcomes.len())))
}
