//! Experiment grids: configuration, per-repetition records and summaries.
//!
//! Every repetition draws from its own stream, keyed by `(n, m, rep)`, so a
//! record depends only on the master seed and its grid coordinates. Jobs run
//! on a rayon pool and are gathered and sorted before anything is written.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Process, Simulation};
use crate::error::{RbbError, Result};
use crate::load::{InitialConfig, MAX_BALLS};
use crate::observables::{default_params, practical_alpha};
use crate::rng::{stream_for, RandomSource};
use crate::stats::{batch_means, ConfidenceInterval, Moments};
use crate::traversal::{cover_times, TieBreak};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MaxLoad,
    EmptyFraction,
    Convergence,
    Traversal,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "max_load" | "max-load" => Self::MaxLoad,
            "empty_fraction" | "empty-fraction" => Self::EmptyFraction,
            "convergence" => Self::Convergence,
            "traversal" => Self::Traversal,
            other => return Err(RbbError::InvalidConfig(format!("unknown experiment '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MaxLoad => "max_load",
            Self::EmptyFraction => "empty_fraction",
            Self::Convergence => "convergence",
            Self::Traversal => "traversal",
        }
    }

    pub fn csv_header(&self) -> &'static str {
        match self {
            Self::MaxLoad => MaxLoadRow::HEADER,
            Self::EmptyFraction => EmptyFractionRow::HEADER,
            Self::Convergence => ConvergenceRow::HEADER,
            Self::Traversal => TraversalRow::HEADER,
        }
    }
}

/// Ball count for each `n`: a multiple of `n` or an absolute count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MSpec {
    Multiple(u64),
    Absolute(u64),
}

impl MSpec {
    pub fn resolve(&self, n: usize) -> Result<u64> {
        let m = match *self {
            MSpec::Multiple(k) => k
                .checked_mul(n as u64)
                .ok_or_else(|| RbbError::InvalidConfig(format!("{k} * {n} balls overflows")))?,
            MSpec::Absolute(m) => m,
        };
        if m > MAX_BALLS {
            return Err(RbbError::TooManyBalls(m));
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPreset {
    Paper,
    Practical,
    Custom(f64),
}

impl AlphaPreset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "practical" => Ok(Self::Practical),
            v => match v.parse::<f64>() {
                Ok(a) if a > 0.0 && a.is_finite() => Ok(Self::Custom(a)),
                _ => Err(RbbError::InvalidConfig(format!(
                    "alpha must be 'paper', 'practical' or a positive number, got '{v}'"
                ))),
            },
        }
    }

    pub fn resolve(&self, n: u64, m: u64) -> Result<f64> {
        match *self {
            AlphaPreset::Paper => default_params(n, m, 1).map(|p| p.alpha),
            AlphaPreset::Practical if n > 0 && m > 0 => Ok(practical_alpha(n, m)),
            AlphaPreset::Practical => Err(RbbError::Precondition("n and m must be positive".into())),
            AlphaPreset::Custom(a) => Ok(a),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_list: Vec<usize>,
    pub m_spec: Vec<MSpec>,
    /// Rounds per repetition; for `convergence` and `traversal` this is the cap.
    pub rounds: u64,
    pub reps: u64,
    pub seed: u64,
    pub init: InitialConfig,
    pub alpha_preset: AlphaPreset,
    /// Convergence target as a multiple of `(m/n) ln n`.
    pub threshold_factor: f64,
    /// First round of the empty-fraction average; defaults to `rounds / 10`.
    pub burn_in: Option<u64>,
    pub tie: TieBreakChoice,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    pub plot: bool,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

/// Serializable mirror of [`TieBreak`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakChoice {
    BallId,
    Random,
}

impl From<TieBreakChoice> for TieBreak {
    fn from(t: TieBreakChoice) -> Self {
        match t {
            TieBreakChoice::BallId => TieBreak::ByBallId,
            TieBreakChoice::Random => TieBreak::Random,
        }
    }
}

/// Default cover cap `60 m ln m` (at least `60 n` so tiny systems can finish).
pub fn traversal_cap(n: usize, m: u64) -> u64 {
    let mf = m as f64;
    let cap = if m >= 2 { (60.0 * mf * mf.ln()).ceil() as u64 } else { 0 };
    cap.max(60 * n as u64)
}

impl ExperimentConfig {
    /// Desk-scale defaults.
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let (m_spec, rounds, reps, init) = match experiment {
            ExperimentKind::MaxLoad => (vec![1, 2, 5, 10, 20, 50], 100_000, 25, InitialConfig::Uniform),
            ExperimentKind::EmptyFraction => (vec![1, 2, 5, 10, 20, 40], 100_000, 25, InitialConfig::Uniform),
            ExperimentKind::Convergence => (vec![1, 2, 5, 10], 1_000_000, 100, InitialConfig::SingleBin),
            ExperimentKind::Traversal => (vec![1], 0, 25, InitialConfig::Uniform),
        };
        Self {
            experiment,
            n_list: vec![100, 1000],
            m_spec: m_spec.into_iter().map(MSpec::Multiple).collect(),
            rounds,
            reps,
            seed: 42,
            init,
            alpha_preset: AlphaPreset::Practical,
            threshold_factor: 1.5,
            burn_in: None,
            tie: TieBreakChoice::Random,
            output_path: None,
            format: OutputFormat::Csv,
            plot: false,
            threads: None,
        }
    }

    /// The full grids of the original figures: `n` up to `10^4`, `10^6` rounds.
    pub fn paper_scale(experiment: ExperimentKind) -> Self {
        let mut cfg = Self::defaults(experiment);
        cfg.n_list = vec![100, 1000, 10_000];
        match experiment {
            ExperimentKind::MaxLoad => {
                cfg.m_spec = (1..=50).map(MSpec::Multiple).collect();
                cfg.rounds = 1_000_000;
            }
            ExperimentKind::EmptyFraction => {
                cfg.m_spec = (1..=50).map(MSpec::Multiple).collect();
                cfg.rounds = 1_000_000;
            }
            ExperimentKind::Convergence => {
                cfg.m_spec = (1..=10).map(MSpec::Multiple).collect();
                cfg.rounds = 10_000_000;
            }
            ExperimentKind::Traversal => {
                cfg.m_spec = vec![MSpec::Multiple(1), MSpec::Multiple(2), MSpec::Multiple(5)];
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RbbError::InvalidConfig(msg));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.threshold_factor.is_nan() || self.threshold_factor <= 0.0 {
            return bad(format!("threshold factor must be positive, got {}", self.threshold_factor));
        }
        if self.n_list.is_empty() || self.m_spec.is_empty() {
            return bad("the (n, m) grid is empty".into());
        }
        if self.n_list.contains(&0) {
            return bad("n must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if self.experiment == ExperimentKind::EmptyFraction && self.rounds <= self.burn_in() {
            return bad(format!("rounds {} must exceed burn-in {}", self.rounds, self.burn_in()));
        }
        self.grid().map(|_| ())
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in.unwrap_or(self.rounds / 10)
    }

    /// `(n, m)` pairs sorted by `n` then `m`, duplicates removed.
    pub fn grid(&self) -> Result<Vec<(usize, u64)>> {
        let mut out = Vec::new();
        for &n in &self.n_list {
            for spec in &self.m_spec {
                out.push((n, spec.resolve(n)?));
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn jobs(&self) -> Result<Vec<(usize, u64, u64)>> {
        Ok(self
            .grid()?
            .into_iter()
            .flat_map(|(n, m)| (0..self.reps).map(move |rep| (n, m, rep)))
            .collect())
    }

    /// Stream of repetition `rep` at grid point `(n, m)`.
    pub fn rng_for(&self, n: usize, m: u64, rep: u64) -> RandomSource {
        RandomSource::new(self.seed, stream_for(&[n as u64, m, rep]))
    }

    /// Runs `job` for every `(n, m, rep)` and returns the results in grid order.
    fn fan_out<R, F>(&self, job: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(usize, u64, u64, RandomSource) -> Result<R> + Sync,
    {
        self.validate()?;
        let jobs = self.jobs()?;
        let run = || {
            jobs.par_iter()
                .map(|&(n, m, rep)| job(n, m, rep, self.rng_for(n, m, rep)))
                .collect::<Result<Vec<R>>>()
        };
        match self.threads {
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| RbbError::InvalidConfig(e.to_string()))?
                .install(run),
            None => run(),
        }
    }
}

/// A per-repetition record with a fixed CSV column set.
pub trait ResultRow: Serialize {
    const HEADER: &'static str;
    fn csv_line(&self) -> String;
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxLoadRow {
    pub n: usize,
    pub m: u64,
    pub rounds: u64,
    pub rep: u64,
    pub seed: u64,
    pub max_load: u64,
    /// `max_load / ((m/n) ln n)`; absent when the denominator is 0.
    pub normalized: Option<f64>,
}

impl ResultRow for MaxLoadRow {
    const HEADER: &'static str = "n,m,rounds,rep,seed,max_load,normalized";
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.n, self.m, self.rounds, self.rep, self.seed, self.max_load, opt(self.normalized)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmptyFractionRow {
    pub n: usize,
    pub m: u64,
    pub rounds: u64,
    pub burn_in: u64,
    pub rep: u64,
    pub seed: u64,
    pub mean_f: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ResultRow for EmptyFractionRow {
    const HEADER: &'static str = "n,m,rounds,burn_in,rep,seed,mean_f,ci_low,ci_high";
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n, self.m, self.rounds, self.burn_in, self.rep, self.seed, self.mean_f, self.ci_low, self.ci_high
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub m: u64,
    pub threshold: f64,
    pub rep: u64,
    pub seed: u64,
    /// First round whose max load is at most the threshold; absent if capped.
    pub rounds_to_converge: Option<u64>,
    pub capped: bool,
}

impl ResultRow for ConvergenceRow {
    const HEADER: &'static str = "n,m,threshold,rep,seed,rounds_to_converge,capped";
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.n, self.m, self.threshold, self.rep, self.seed, opt(self.rounds_to_converge), self.capped
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraversalRow {
    pub n: usize,
    pub m: u64,
    pub rep: u64,
    pub seed: u64,
    /// Round by which every ball had visited every bin; absent if some ball
    /// was still uncovered at the cap.
    pub max_cover: Option<u64>,
    /// Earliest per-ball cover round; absent if no ball was covered.
    pub min_cover: Option<u64>,
    pub covered_fraction: f64,
}

impl ResultRow for TraversalRow {
    const HEADER: &'static str = "n,m,rep,seed,max_cover,min_cover,covered_fraction";
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.n, self.m, self.rep, self.seed, opt(self.max_cover), opt(self.min_cover), self.covered_fraction
        )
    }
}

/// `(m/n) ln n`, the scale of the stationary maximum load.
pub fn load_scale(n: usize, m: u64) -> f64 {
    m as f64 / n as f64 * (n as f64).ln()
}

pub fn experiment_max_load(cfg: &ExperimentConfig) -> Result<Vec<MaxLoadRow>> {
    cfg.fan_out(|n, m, rep, rng| {
        let mut sim = Simulation::new(Process::Rbb, cfg.init.build(n, m)?, rng);
        for _ in 0..cfg.rounds {
            sim.step();
        }
        let max_load = sim.state().max_load();
        let scale = load_scale(n, m);
        Ok(MaxLoadRow {
            n,
            m,
            rounds: cfg.rounds,
            rep,
            seed: cfg.seed,
            max_load,
            normalized: (scale > 0.0).then(|| max_load as f64 / scale),
        })
    })
}

/// Number of batches behind each empty-fraction confidence interval.
pub const EMPTY_FRACTION_BATCHES: usize = 20;

pub fn experiment_empty_fraction(cfg: &ExperimentConfig) -> Result<Vec<EmptyFractionRow>> {
    let burn_in = cfg.burn_in();
    cfg.fan_out(|n, m, rep, rng| {
        let mut sim = Simulation::new(Process::Rbb, cfg.init.build(n, m)?, rng);
        let mut fractions = Vec::with_capacity((cfg.rounds - burn_in + 1) as usize);
        loop {
            if sim.round() >= burn_in {
                fractions.push(sim.state().empty_bins() as f64 / n as f64);
            }
            if sim.round() == cfg.rounds {
                break;
            }
            sim.step();
        }
        let ci = ConfidenceInterval::normal(batch_means(&fractions, EMPTY_FRACTION_BATCHES), 0.95);
        Ok(EmptyFractionRow {
            n,
            m,
            rounds: cfg.rounds,
            burn_in,
            rep,
            seed: cfg.seed,
            mean_f: ci.mean,
            ci_low: ci.low(),
            ci_high: ci.high(),
        })
    })
}

pub fn experiment_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.fan_out(|n, m, rep, rng| {
        let threshold = cfg.threshold_factor * load_scale(n, m);
        let mut sim = Simulation::new(Process::Rbb, cfg.init.build(n, m)?, rng);
        let reached = loop {
            if sim.state().max_load() as f64 <= threshold {
                break Some(sim.round());
            }
            if sim.round() >= cfg.rounds {
                break None;
            }
            sim.step();
        };
        Ok(ConvergenceRow {
            n,
            m,
            threshold,
            rep,
            seed: cfg.seed,
            rounds_to_converge: reached,
            capped: reached.is_none(),
        })
    })
}

pub fn experiment_traversal(cfg: &ExperimentConfig) -> Result<Vec<TraversalRow>> {
    cfg.fan_out(|n, m, rep, mut rng| {
        let cap = if cfg.rounds > 0 { cfg.rounds } else { traversal_cap(n, m) };
        let (covers, _) = cover_times(n, m, &cfg.init, cfg.tie.into(), cap, &mut rng)?;
        let covered: Vec<u64> = covers.iter().flatten().copied().collect();
        let all = covered.len() == covers.len();
        Ok(TraversalRow {
            n,
            m,
            rep,
            seed: cfg.seed,
            max_cover: if all { Some(covered.iter().copied().max().unwrap_or(0)) } else { None },
            min_cover: covered.iter().copied().min(),
            covered_fraction: if covers.is_empty() { 1.0 } else { covered.len() as f64 / covers.len() as f64 },
        })
    })
}

/// Rows of any experiment, for uniform writing and plotting.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentRows {
    MaxLoad(Vec<MaxLoadRow>),
    EmptyFraction(Vec<EmptyFractionRow>),
    Convergence(Vec<ConvergenceRow>),
    Traversal(Vec<TraversalRow>),
}

impl ExperimentRows {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::MaxLoad(_) => ExperimentKind::MaxLoad,
            Self::EmptyFraction(_) => ExperimentKind::EmptyFraction,
            Self::Convergence(_) => ExperimentKind::Convergence,
            Self::Traversal(_) => ExperimentKind::Traversal,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::MaxLoad(r) => r.len(),
            Self::EmptyFraction(r) => r.len(),
            Self::Convergence(r) => r.len(),
            Self::Traversal(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn csv_lines(&self) -> Vec<String> {
        fn lines<R: ResultRow>(rows: &[R]) -> Vec<String> {
            rows.iter().map(ResultRow::csv_line).collect()
        }
        match self {
            Self::MaxLoad(r) => lines(r),
            Self::EmptyFraction(r) => lines(r),
            Self::Convergence(r) => lines(r),
            Self::Traversal(r) => lines(r),
        }
    }

    pub fn write<W: Write>(&self, mut w: W, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Csv => {
                writeln!(w, "{}", self.kind().csv_header())?;
                for line in self.csv_lines() {
                    writeln!(w, "{line}")?;
                }
            }
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut w, self).map_err(|e| RbbError::Io(e.into()))?;
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// Per-`(n, m)` means across repetitions.
    pub fn summary(&self) -> Vec<SummaryRow> {
        fn group<R>(rows: &[R], key: impl Fn(&R) -> (usize, u64), value: impl Fn(&R) -> Option<f64>) -> Vec<SummaryRow> {
            let mut out: Vec<SummaryRow> = Vec::new();
            let mut acc = Moments::default();
            let mut missing = 0;
            let mut current: Option<(usize, u64)> = None;
            let flush = |k: (usize, u64), acc: &mut Moments, missing: &mut u64, out: &mut Vec<SummaryRow>| {
                out.push(SummaryRow { n: k.0, m: k.1, mean: acc.mean(), std_error: acc.std_error(), reps: acc.count(), missing: *missing });
                *acc = Moments::default();
                *missing = 0;
            };
            for r in rows {
                let k = key(r);
                if current.is_some_and(|c| c != k) {
                    flush(current.unwrap(), &mut acc, &mut missing, &mut out);
                }
                current = Some(k);
                match value(r) {
                    Some(v) => acc.push(v),
                    None => missing += 1,
                }
            }
            if let Some(k) = current {
                flush(k, &mut acc, &mut missing, &mut out);
            }
            out
        }
        match self {
            Self::MaxLoad(r) => group(r, |r| (r.n, r.m), |r| Some(r.max_load as f64)),
            Self::EmptyFraction(r) => group(r, |r| (r.n, r.m), |r| Some(r.mean_f)),
            Self::Convergence(r) => group(r, |r| (r.n, r.m), |r| r.rounds_to_converge.map(|t| t as f64)),
            Self::Traversal(r) => group(r, |r| (r.n, r.m), |r| r.max_cover.map(|t| t as f64)),
        }
    }
}

/// Mean of the headline quantity at one grid point. `missing` counts
/// repetitions without a value (capped runs), which are left out of the mean.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub m: u64,
    pub mean: f64,
    pub std_error: f64,
    pub reps: u64,
    pub missing: u64,
}

/// Parses CSV written by [`ExperimentRows::write`]; the header selects the experiment.
pub fn parse_csv(text: &str) -> Result<ExperimentRows> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(RbbError::EmptyInput)?.trim();
    let kind = [
        ExperimentKind::MaxLoad,
        ExperimentKind::EmptyFraction,
        ExperimentKind::Convergence,
        ExperimentKind::Traversal,
    ]
    .into_iter()
    .find(|k| k.csv_header() == header)
    .ok_or_else(|| RbbError::InvalidConfig(format!("unrecognized CSV header '{header}'")))?;
    let bad = |line: &str| RbbError::InvalidConfig(format!("malformed row '{line}'"));
    fn num<T: std::str::FromStr>(field: &str) -> Option<T> {
        field.parse().ok()
    }
    fn maybe<T: std::str::FromStr>(field: &str) -> Option<Option<T>> {
        if field.is_empty() { Some(None) } else { field.parse().ok().map(Some) }
    }
    let mut rows = match kind {
        ExperimentKind::MaxLoad => ExperimentRows::MaxLoad(Vec::new()),
        ExperimentKind::EmptyFraction => ExperimentRows::EmptyFraction(Vec::new()),
        ExperimentKind::Convergence => ExperimentRows::Convergence(Vec::new()),
        ExperimentKind::Traversal => ExperimentRows::Traversal(Vec::new()),
    };
    let width = header.split(',').count();
    for line in lines {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != width {
            return Err(bad(line));
        }
        let parsed = match &mut rows {
            ExperimentRows::MaxLoad(v) => (|| {
                v.push(MaxLoadRow {
                    n: num(f[0])?, m: num(f[1])?, rounds: num(f[2])?, rep: num(f[3])?,
                    seed: num(f[4])?, max_load: num(f[5])?, normalized: maybe(f[6])?,
                });
                Some(())
            })(),
            ExperimentRows::EmptyFraction(v) => (|| {
                v.push(EmptyFractionRow {
                    n: num(f[0])?, m: num(f[1])?, rounds: num(f[2])?, burn_in: num(f[3])?, rep: num(f[4])?,
                    seed: num(f[5])?, mean_f: num(f[6])?, ci_low: num(f[7])?, ci_high: num(f[8])?,
                });
                Some(())
            })(),
            ExperimentRows::Convergence(v) => (|| {
                v.push(ConvergenceRow {
                    n: num(f[0])?, m: num(f[1])?, threshold: num(f[2])?, rep: num(f[3])?,
                    seed: num(f[4])?, rounds_to_converge: maybe(f[5])?, capped: num(f[6])?,
                });
                Some(())
            })(),
            ExperimentRows::Traversal(v) => (|| {
                v.push(TraversalRow {
                    n: num(f[0])?, m: num(f[1])?, rep: num(f[2])?, seed: num(f[3])?,
                    max_cover: maybe(f[4])?, min_cover: maybe(f[5])?, covered_fraction: num(f[6])?,
                });
                Some(())
            })(),
        };
        parsed.ok_or_else(|| bad(line))?;
    }
    Ok(rows)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRows> {
    Ok(match cfg.experiment {
        ExperimentKind::MaxLoad => ExperimentRows::MaxLoad(experiment_max_load(cfg)?),
        ExperimentKind::EmptyFraction => ExperimentRows::EmptyFraction(experiment_empty_fraction(cfg)?),
        ExperimentKind::Convergence => ExperimentRows::Convergence(experiment_convergence(cfg)?),
        ExperimentKind::Traversal => ExperimentRows::Traversal(experiment_traversal(cfg)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::defaults(kind);
        cfg.n_list = vec![4, 2];
        cfg.m_spec = vec![MSpec::Multiple(2), MSpec::Absolute(3)];
        cfg.reps = 3;
        cfg.rounds = 200;
        cfg
    }

    #[test]
    fn rows_are_sorted_and_complete() {
        let rows = experiment_max_load(&small(ExperimentKind::MaxLoad)).unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.n, r.m, r.rep)).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(keys, sorted);
        // (2,3), (2,4), (4,3), (4,8)
        assert_eq!(keys.len(), 4 * 3);
    }

    #[test]
    fn zero_rounds_uniform() {
        let mut cfg = small(ExperimentKind::MaxLoad);
        cfg.rounds = 0;
        cfg.m_spec = vec![MSpec::Multiple(3)];
        for r in experiment_max_load(&cfg).unwrap() {
            assert_eq!(r.max_load, 3);
        }
    }

    #[test]
    fn one_ball_two_bins() {
        let mut cfg = small(ExperimentKind::EmptyFraction);
        cfg.n_list = vec![2];
        cfg.m_spec = vec![MSpec::Absolute(1)];
        for r in experiment_empty_fraction(&cfg).unwrap() {
            assert_eq!(r.mean_f, 0.5);
            assert_eq!((r.ci_low, r.ci_high), (0.5, 0.5));
        }
    }

    #[test]
    fn huge_threshold_converges_at_zero() {
        let mut cfg = small(ExperimentKind::Convergence);
        cfg.n_list = vec![5];
        cfg.m_spec = vec![MSpec::Absolute(7)];
        cfg.threshold_factor = 7.0;
        for r in experiment_convergence(&cfg).unwrap() {
            assert_eq!(r.rounds_to_converge, Some(0));
        }
    }

    #[test]
    fn capped_convergence_is_marked() {
        let mut cfg = small(ExperimentKind::Convergence);
        cfg.n_list = vec![1];
        cfg.m_spec = vec![MSpec::Absolute(5)];
        let rows = experiment_convergence(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.capped && r.rounds_to_converge.is_none()));
        assert!(rows[0].csv_line().ends_with(",,true"));
    }

    #[test]
    fn single_bin_traversal() {
        let mut cfg = small(ExperimentKind::Traversal);
        cfg.n_list = vec![1];
        cfg.rounds = 0;
        for r in experiment_traversal(&cfg).unwrap() {
            assert_eq!((r.max_cover, r.min_cover, r.covered_fraction), (Some(0), Some(0), 1.0));
        }
    }

    #[test]
    fn validation_errors() {
        let mut cfg = small(ExperimentKind::EmptyFraction);
        cfg.reps = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small(ExperimentKind::EmptyFraction);
        cfg.burn_in = Some(500);
        assert!(cfg.validate().is_err());
        let mut cfg = small(ExperimentKind::Convergence);
        cfg.threshold_factor = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn summary_groups() {
        let rows = ExperimentRows::MaxLoad(experiment_max_load(&small(ExperimentKind::MaxLoad)).unwrap());
        let s = rows.summary();
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|r| r.reps == 3));
    }

    #[test]
    fn csv_round_trip() {
        let rows = ExperimentRows::Convergence(experiment_convergence(&small(ExperimentKind::Convergence)).unwrap());
        let mut buf = Vec::new();
        rows.write(&mut buf, OutputFormat::Csv).unwrap();
        let back = parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, rows);
        assert!(parse_csv("a,b\n1,2\n").is_err());
        assert!(matches!(parse_csv(""), Err(RbbError::EmptyInput)));
    }

    #[test]
    fn alpha_presets() {
        assert_eq!(AlphaPreset::parse("practical").unwrap().resolve(10, 80).unwrap(), 10.0 / 640.0);
        assert!(AlphaPreset::parse("-1").is_err());
        assert!(AlphaPreset::parse("x").is_err());
    }
}
