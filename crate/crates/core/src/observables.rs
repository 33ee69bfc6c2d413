//! Potentials, empty-bin statistics and the one-round drift bounds they obey.

use serde::{Deserialize, Serialize};

use crate::error::{RbbError, Result};
use crate::load::LoadVector;

/// Empty-bin count `F`, non-empty count `kappa`, and `f = F / n` kept as an
/// exact ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmptyStats {
    pub empty: u64,
    pub nonempty: u64,
    pub bins: u64,
}

impl EmptyStats {
    pub fn fraction(&self) -> f64 {
        self.empty as f64 / self.bins as f64
    }
}

pub fn empty_stats(x: &LoadVector) -> EmptyStats {
    let empty = x.empty_bins() as u64;
    let bins = x.bins() as u64;
    EmptyStats {
        empty,
        nonempty: bins - empty,
        bins,
    }
}

/// `sum_i x_i^2`, exact.
pub fn quadratic_potential(x: &LoadVector) -> u128 {
    x.loads().iter().map(|&l| u128::from(l) * u128::from(l)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialMode {
    Linear,
    LogDomain,
}

/// `ln(f64::MAX)`; larger exponents overflow in linear mode.
const MAX_EXPONENT: f64 = 709.782_712_893_384;

/// `sum_i e^{alpha x_i}` in linear mode, or its natural log in log mode.
pub fn exponential_potential(x: &LoadVector, alpha: f64, mode: PotentialMode) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(RbbError::Precondition(format!("alpha must be positive, got {alpha}")));
    }
    match mode {
        PotentialMode::LogDomain => Ok(log_exponential_potential(x.loads(), alpha)),
        PotentialMode::Linear => {
            let top = alpha * x.max_load() as f64;
            if top > MAX_EXPONENT {
                return Err(RbbError::Overflow(top));
            }
            let sum: f64 = x.loads().iter().map(|&l| (alpha * l as f64).exp()).sum();
            if sum.is_finite() {
                Ok(sum)
            } else {
                Err(RbbError::Overflow(top))
            }
        }
    }
}

/// Max-shifted log-sum-exp of `alpha * loads`.
pub fn log_exponential_potential(loads: &[u64], alpha: f64) -> f64 {
    let top = loads.iter().copied().max().unwrap_or(0) as f64 * alpha;
    let rest: f64 = loads
        .iter()
        .map(|&l| (alpha * l as f64 - top).exp())
        .sum();
    top + rest.ln()
}

/// Right-hand side of the one-round quadratic drift bound
/// `E[Y'] <= Y - 2 (m/n) F + 2n`.
pub fn quadratic_drift_bound(upsilon: u128, m: u64, n: u64, empty: u64) -> f64 {
    upsilon as f64 - 2.0 * (m as f64 / n as f64) * empty as f64 + 2.0 * n as f64
}

/// Right-hand side of the one-round exponential drift bound
/// `E[Phi'] <= Phi e^{-alpha} e^{(e^alpha - 1) kappa / n} + (n - kappa) e^{(e^alpha - 1) kappa / n}`.
pub fn exponential_drift_bound(phi: f64, alpha: f64, n: u64, kappa: u64) -> f64 {
    let growth = (alpha.exp_m1() * kappa as f64 / n as f64).exp();
    phi * (-alpha).exp() * growth + (n - kappa) as f64 * growth
}

/// Log of [`exponential_drift_bound`], for potentials that only exist in log form.
pub fn log_exponential_drift_bound(log_phi: f64, alpha: f64, n: u64, kappa: u64) -> f64 {
    let log_growth = alpha.exp_m1() * kappa as f64 / n as f64;
    let a = log_phi - alpha + log_growth;
    if kappa == n {
        return a;
    }
    let b = ((n - kappa) as f64).ln() + log_growth;
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Largest load certified by a potential value: `max_i x_i <= ln(Phi) / alpha`.
pub fn max_load_certificate(log_phi: f64, alpha: f64) -> f64 {
    log_phi / alpha
}

/// Smoothing parameter and the constants tied to it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub alpha: f64,
    /// Stabilization level `48 / alpha^2 * n`.
    pub threshold: f64,
    pub c_r: f64,
    pub c_s: f64,
    /// Lower-bound constant `n / (4m)`.
    pub gamma: f64,
}

/// `16 * 384^2 * 744^2`.
pub const C_R: f64 = 16.0 * 384.0 * 384.0 * 744.0 * 744.0;

impl PotentialParams {
    pub fn with_alpha(n: u64, m: u64, k: u64, alpha: f64) -> Self {
        Self {
            alpha,
            threshold: 48.0 / (alpha * alpha) * n as f64,
            c_r: C_R,
            c_s: 8.0 * k as f64 * C_R,
            gamma: n as f64 / (4.0 * m as f64),
        }
    }

    pub fn log_threshold(&self) -> f64 {
        self.threshold.ln()
    }
}

/// Constants exactly as the convergence analysis fixes them:
/// `alpha = n / (2 * 384 * 744 * m)`.
pub fn default_params(n: u64, m: u64, k: u64) -> Result<PotentialParams> {
    if n == 0 || m == 0 || k == 0 {
        return Err(RbbError::Precondition("n, m and k must be positive".into()));
    }
    let alpha = n as f64 / (2.0 * 384.0 * 744.0 * m as f64);
    Ok(PotentialParams::with_alpha(n, m, k, alpha))
}

/// Desk-scale smoothing parameter `n / (8m)` used by the statistical checks;
/// the analysis constant is so small that its event thresholds are vacuous
/// at simulable sizes.
pub fn practical_alpha(n: u64, m: u64) -> f64 {
    n as f64 / (8.0 * m as f64)
}

pub fn practical_params(n: u64, m: u64, k: u64) -> Result<PotentialParams> {
    if n == 0 || m == 0 || k == 0 {
        return Err(RbbError::Precondition("n, m and k must be positive".into()));
    }
    Ok(PotentialParams::with_alpha(n, m, k, practical_alpha(n, m)))
}

/// What a trace records each round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    EmptyBins,
    Quadratic,
    Exponential { alpha: f64 },
    MaxLoad,
}

impl Observable {
    /// `g(state)` for the selector, with the exponential potential in linear form.
    pub fn evaluate(&self, loads: &[u64]) -> f64 {
        match *self {
            Observable::EmptyBins => loads.iter().filter(|&&l| l == 0).count() as f64,
            Observable::Quadratic => loads.iter().map(|&l| (l as f64) * (l as f64)).sum(),
            Observable::Exponential { alpha } => {
                loads.iter().map(|&l| (alpha * l as f64).exp()).sum()
            }
            Observable::MaxLoad => loads.iter().copied().max().unwrap_or(0) as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpSample {
    pub alpha: f64,
    pub log_phi: f64,
}

/// Snapshot of one round. Fields not requested by the trace's observers are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub round: u64,
    pub empty: Option<EmptyStats>,
    pub quadratic: Option<u128>,
    pub exponential: Option<ExpSample>,
    pub max_load: Option<u64>,
}

impl ObservationRow {
    pub fn observe(round: u64, x: &LoadVector, observers: &[Observable]) -> Self {
        let mut row = ObservationRow {
            round,
            empty: None,
            quadratic: None,
            exponential: None,
            max_load: None,
        };
        for obs in observers {
            match *obs {
                Observable::EmptyBins => row.empty = Some(empty_stats(x)),
                Observable::Quadratic => row.quadratic = Some(quadratic_potential(x)),
                Observable::Exponential { alpha } => {
                    row.exponential = Some(ExpSample {
                        alpha,
                        log_phi: log_exponential_potential(x.loads(), alpha),
                    })
                }
                Observable::MaxLoad => row.max_load = Some(x.max_load()),
            }
        }
        row
    }

    pub const CSV_HEADER: &'static str = "round,empty,fraction,kappa,quadratic,log_phi,max_load";

    pub fn csv_line(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.round,
            opt(self.empty.map(|e| e.empty.to_string())),
            opt(self.empty.map(|e| e.fraction().to_string())),
            opt(self.empty.map(|e| e.nonempty.to_string())),
            opt(self.quadratic.map(|q| q.to_string())),
            opt(self.exponential.map(|e| e.log_phi.to_string())),
            opt(self.max_load.map(|l| l.to_string())),
        )
    }
}

/// Index of the row holding round `t` in a contiguous trace.
fn row_index(trace: &[ObservationRow], t: u64) -> Option<usize> {
    let first = trace.first()?.round;
    let idx = t.checked_sub(first)? as usize;
    (idx < trace.len() && trace[idx].round == t).then_some(idx)
}

/// Inclusive sum of `F^t` over `[t0, t1]`.
pub fn aggregate_empty(trace: &[ObservationRow], t0: u64, t1: u64) -> Result<u64> {
    let range = RbbError::RangeViolation { t0, t1 };
    if t0 > t1 {
        return Err(range);
    }
    let (Some(a), Some(b)) = (row_index(trace, t0), row_index(trace, t1)) else {
        return Err(range);
    };
    trace[a..=b]
        .iter()
        .map(|r| {
            r.empty
                .map(|e| e.empty)
                .ok_or_else(|| RbbError::Precondition("trace lacks empty-bin observations".into()))
        })
        .sum()
}

/// Exponential potential reweighted by `exp(sum (alpha f^t - 1.5 alpha^2))`
/// and zeroed from the round after the potential first drops to the threshold.
///
/// Entry `i` describes round `t0 + i`. Values are kept as logs; a stopped
/// entry has log value `-inf`, i.e. value exactly 0.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjustedSeries {
    pub t0: u64,
    pub log_values: Vec<f64>,
    /// `stopped[i]` is true when the threshold event held at some round in
    /// `[t0, t0 + i)`.
    pub stopped: Vec<bool>,
    /// Running aggregate `F_{t0}^{t0 + i - 1}` (0 for the anchor entry).
    pub empty_aggregate: Vec<u64>,
}

impl AdjustedSeries {
    pub fn value(&self, i: usize) -> f64 {
        self.log_values[i].exp()
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_values.is_empty()
    }
}

pub fn adjusted_potential_series(
    trace: &[ObservationRow],
    t0: u64,
    params: &PotentialParams,
) -> Result<AdjustedSeries> {
    let start = row_index(trace, t0).ok_or(RbbError::RangeViolation { t0, t1: t0 })?;
    let alpha = params.alpha;
    let log_threshold = params.log_threshold();
    let mut series = AdjustedSeries {
        t0,
        log_values: Vec::with_capacity(trace.len() - start),
        stopped: Vec::with_capacity(trace.len() - start),
        empty_aggregate: Vec::with_capacity(trace.len() - start),
    };
    let n = trace[start].empty.map_or(1, |e| e.bins.max(1)) as f64;
    let mut aggregate = 0u64;
    // sum over elapsed rounds of (alpha f^t - 1.5 alpha^2), from the exact
    // integer aggregate of empty bins
    let exponent = |agg: u64, rounds: u64| alpha * agg as f64 / n - 1.5 * alpha * alpha * rounds as f64;
    let mut stopped = false;
    for (elapsed, row) in trace[start..].iter().enumerate() {
        let (Some(exp), Some(empty)) = (row.exponential, row.empty) else {
            return Err(RbbError::Precondition(
                "adjusted series needs empty-bin and exponential observations".into(),
            ));
        };
        if exp.alpha != alpha {
            return Err(RbbError::Precondition(format!(
                "trace observed alpha {} but params use {alpha}",
                exp.alpha
            )));
        }
        series.stopped.push(stopped);
        series.empty_aggregate.push(aggregate);
        series
            .log_values
            .push(if stopped { f64::NEG_INFINITY } else { exp.log_phi + exponent(aggregate, elapsed as u64) });
        if exp.log_phi <= log_threshold {
            stopped = true;
        }
        aggregate += empty.empty;
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[u64]) -> LoadVector {
        LoadVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn empty_stats_examples() {
        let s = empty_stats(&lv(&[0, 3, 0, 1]));
        assert_eq!((s.empty, s.nonempty, s.bins), (2, 2, 4));
        assert_eq!(s.fraction(), 0.5);
        let s = empty_stats(&lv(&[0, 0, 0]));
        assert_eq!((s.empty, s.nonempty), (3, 0));
        assert_eq!(empty_stats(&lv(&[1, 1, 1, 1])).empty, 0);
    }

    #[test]
    fn quadratic_examples() {
        assert_eq!(quadratic_potential(&lv(&[0, 0, 0])), 0);
        assert_eq!(quadratic_potential(&lv(&[2, 1, 1])), 6);
        assert_eq!(quadratic_potential(&lv(&[9, 0, 0, 0])), 81);
        let big = crate::load::MAX_BALLS;
        assert_eq!(quadratic_potential(&lv(&[big, 0])), u128::from(big) * u128::from(big));
    }

    #[test]
    fn exponential_examples() {
        let x = lv(&[1, 1]);
        let phi = exponential_potential(&x, 2f64.ln(), PotentialMode::Linear).unwrap();
        assert!((phi - 4.0).abs() < 1e-12);
        let x = lv(&[3, 1, 4, 1, 5]);
        let tiny = exponential_potential(&x, 1e-12, PotentialMode::Linear).unwrap();
        assert!((tiny - 5.0).abs() < 1e-9);
        let x = lv(&[7, 0, 0, 0]);
        let phi = exponential_potential(&x, 0.3, PotentialMode::Linear).unwrap();
        assert!((phi - ((0.3f64 * 7.0).exp() + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn linear_overflow_is_reported() {
        let x = lv(&[1000, 0]);
        assert!(matches!(
            exponential_potential(&x, 1.0, PotentialMode::Linear),
            Err(RbbError::Overflow(_))
        ));
        let log = exponential_potential(&x, 1.0, PotentialMode::LogDomain).unwrap();
        assert!((log - 1000.0).abs() < 1e-9);
        assert!(exponential_potential(&x, 0.0, PotentialMode::LogDomain).is_err());
    }

    #[test]
    fn quadratic_bound_arithmetic() {
        assert_eq!(quadratic_drift_bound(2, 2, 2, 0), 6.0);
        let (m, n) = (10u64, 4u64);
        assert_eq!(
            quadratic_drift_bound(u128::from(m * m), m, n, n),
            (m * m) as f64 - 2.0 * m as f64 + 2.0 * n as f64
        );
    }

    #[test]
    fn exponential_bound_limits() {
        // kappa = 0: Phi e^{-alpha} + n
        let b = exponential_drift_bound(3.0, 0.2, 3, 0);
        assert!((b - (3.0 * (-0.2f64).exp() + 3.0)).abs() < 1e-12);
        // alpha -> 0: Phi + (n - kappa)
        let b = exponential_drift_bound(5.0, 1e-12, 5, 3);
        assert!((b - 7.0).abs() < 1e-9);
        let lb = log_exponential_drift_bound(5f64.ln(), 0.4, 5, 3);
        assert!((lb.exp() - exponential_drift_bound(5.0, 0.4, 5, 3)).abs() < 1e-12);
        let lb = log_exponential_drift_bound(5f64.ln(), 0.4, 5, 5);
        assert!((lb.exp() - exponential_drift_bound(5.0, 0.4, 5, 5)).abs() < 1e-12);
    }

    #[test]
    fn paper_constants() {
        let p = default_params(100, 100, 1).unwrap();
        assert!((p.alpha - 1.0 / 571_392.0).abs() < 1e-18);
        assert!((p.alpha - 1.7501e-6).abs() < 1e-10);
        assert_eq!(p.c_r, 16.0 * 147_456.0 * 553_536.0);
        assert_eq!(p.c_s, 8.0 * p.c_r);
        assert_eq!(p.gamma, 0.25);
        let q = practical_params(100, 400, 1).unwrap();
        assert_eq!(q.alpha, 1.0 / 32.0);
        assert_eq!(q.threshold, 48.0 * 1024.0 * 100.0);
        assert!(default_params(0, 1, 1).is_err());
    }

    fn row(round: u64, loads: &[u64], alpha: f64) -> ObservationRow {
        ObservationRow::observe(
            round,
            &lv(loads),
            &[Observable::EmptyBins, Observable::Exponential { alpha }],
        )
    }

    #[test]
    fn adjusted_series_anchor_and_zeroing() {
        let alpha = 0.5;
        let params = PotentialParams::with_alpha(2, 20, 1, alpha);
        let trace = vec![row(0, &[20, 0], alpha), row(1, &[19, 1], alpha), row(2, &[18, 2], alpha)];
        let s = adjusted_potential_series(&trace, 0, &params).unwrap();
        assert_eq!(s.log_values[0], trace[0].exponential.unwrap().log_phi);
        assert!(!s.stopped[1]);
        let expected = trace[1].exponential.unwrap().log_phi + alpha * 0.5 - 1.5 * alpha * alpha;
        assert!((s.log_values[1] - expected).abs() < 1e-12);
        assert_eq!(s.empty_aggregate, vec![0, 1, 1]);

        // Anchor already below the threshold: everything after is exactly 0.
        let params = PotentialParams::with_alpha(2, 20, 1, alpha);
        let low = vec![row(0, &[1, 1], alpha), row(1, &[2, 0], alpha), row(2, &[0, 2], alpha)];
        let s = adjusted_potential_series(&low, 0, &params).unwrap();
        assert!(s.value(0) > 0.0);
        assert_eq!(s.value(1), 0.0);
        assert_eq!(s.value(2), 0.0);
        assert!(s.stopped[1] && s.stopped[2]);
    }

    #[test]
    fn adjusted_series_rejects_mismatched_alpha() {
        let params = PotentialParams::with_alpha(2, 2, 1, 0.1);
        let trace = vec![row(0, &[1, 1], 0.2)];
        assert!(adjusted_potential_series(&trace, 0, &params).is_err());
        assert!(adjusted_potential_series(&trace, 5, &params).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let trace: Vec<_> = (0..5).map(|t| row(t, &[0, 0, 0], 0.1)).collect();
        assert_eq!(aggregate_empty(&trace, 1, 1).unwrap(), 3);
        assert_eq!(aggregate_empty(&trace, 0, 4).unwrap(), 15);
        assert!(aggregate_empty(&trace, 3, 2).is_err());
        assert!(aggregate_empty(&trace, 0, 5).is_err());
    }
}
