use serde::{Deserialize, Serialize};

use crate::error::{RbbError, Result};

/// Largest supported ball count; keeps the quadratic potential inside `u128`
/// with room to spare and every load inside `u64`.
pub const MAX_BALLS: u64 = 1 << 40;

/// Occupancy of `n` bins holding `m` balls in total.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoadVector {
    loads: Vec<u64>,
    balls: u64,
}

impl LoadVector {
    pub fn new(loads: Vec<u64>) -> Result<Self> {
        if loads.is_empty() {
            return Err(RbbError::InvalidConfig("at least one bin is required".into()));
        }
        let balls = loads
            .iter()
            .try_fold(0u64, |acc, &l| acc.checked_add(l))
            .ok_or(RbbError::TooManyBalls(u64::MAX))?;
        if balls > MAX_BALLS {
            return Err(RbbError::TooManyBalls(balls));
        }
        Ok(Self { loads, balls })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(vec![0; n])
    }

    pub fn bins(&self) -> usize {
        self.loads.len()
    }

    pub fn balls(&self) -> u64 {
        self.balls
    }

    pub fn loads(&self) -> &[u64] {
        &self.loads
    }

    pub fn max_load(&self) -> u64 {
        self.loads.iter().copied().max().unwrap_or(0)
    }

    pub fn empty_bins(&self) -> usize {
        self.loads.iter().filter(|&&l| l == 0).count()
    }

    /// `self[i] <= other[i]` for every bin; `None` when it holds, otherwise
    /// the first offending bin.
    pub fn first_dominance_violation(&self, other: &LoadVector) -> Option<usize> {
        self.loads
            .iter()
            .zip(&other.loads)
            .position(|(x, y)| x > y)
    }

    pub(crate) fn loads_mut(&mut self) -> &mut [u64] {
        &mut self.loads
    }

    pub(crate) fn set_balls(&mut self, balls: u64) {
        self.balls = balls;
    }

    pub(crate) fn copy_from(&mut self, other: &LoadVector) {
        self.loads.copy_from_slice(&other.loads);
        self.balls = other.balls;
    }
}

impl std::fmt::Display for LoadVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("(")?;
        for (i, l) in self.loads.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str(")")
    }
}

/// How the `m` balls are placed before round 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialConfig {
    /// `m / n` per bin, the remainder one each to the lowest-indexed bins.
    Uniform,
    /// Every ball in the first bin.
    SingleBin,
    Explicit(Vec<u64>),
}

impl InitialConfig {
    pub fn build(&self, n: usize, m: u64) -> Result<LoadVector> {
        if n == 0 {
            return Err(RbbError::InvalidConfig("n must be positive".into()));
        }
        if m > MAX_BALLS {
            return Err(RbbError::TooManyBalls(m));
        }
        match self {
            InitialConfig::Uniform => {
                let base = m / n as u64;
                let extra = (m % n as u64) as usize;
                let loads = (0..n).map(|i| base + u64::from(i < extra)).collect();
                LoadVector::new(loads)
            }
            InitialConfig::SingleBin => {
                let mut loads = vec![0; n];
                loads[0] = m;
                LoadVector::new(loads)
            }
            InitialConfig::Explicit(loads) => {
                if loads.len() != n {
                    return Err(RbbError::InvalidConfig(format!(
                        "explicit loads have {} bins, expected {n}",
                        loads.len()
                    )));
                }
                let v = LoadVector::new(loads.clone())?;
                if v.balls() != m {
                    return Err(RbbError::BallsMismatch {
                        expected: m,
                        got: v.balls(),
                    });
                }
                Ok(v)
            }
        }
    }

    /// Parses the `--init` flag forms `uniform`, `single` and `file:<path>`;
    /// a file holds whitespace- or comma-separated loads.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec {
            "uniform" => Ok(InitialConfig::Uniform),
            "single" | "single_bin" => Ok(InitialConfig::SingleBin),
            other => {
                let path = other.strip_prefix("file:").ok_or_else(|| {
                    RbbError::InvalidConfig(format!("unknown init `{other}`"))
                })?;
                let text = std::fs::read_to_string(path)?;
                let loads = text
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<u64>()
                            .map_err(|e| RbbError::InvalidConfig(format!("bad load `{t}`: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(InitialConfig::Explicit(loads))
            }
        }
    }
}
