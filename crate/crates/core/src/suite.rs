//! Named registry of the validation checks behind `rbb check`.

use crate::engine::{one_choice_run, Process};
use crate::error::{RbbError, Result};
use crate::load::{InitialConfig, LoadVector};
use crate::observables::{practical_params, PotentialParams};
use crate::rng::{mix64, RandomSource, Sampler};
use crate::validation::*;

/// Checks run when no selection is given.
pub const DEFAULT_CHECKS: &[&str] = &[
    "binomial_bound",
    "quadratic_drift_exact",
    "exponential_drift_exact",
    "quadratic_drift",
    "exponential_drift",
    "supermartingale",
    "supermartingale_large_alpha",
    "coupling_dominance",
    "quadratic_change",
    "drift_lemmas",
    "one_choice",
    "chi_square_step",
];

/// Checks that must fail; they guard against vacuous passes and are only
/// run when named explicitly.
pub const NEGATIVE_CONTROLS: &[&str] = &[
    "negative_control_quadratic_drift",
    "negative_control_exponential_drift",
    "negative_control_chi_square",
];

pub fn all_check_names() -> impl Iterator<Item = &'static str> {
    DEFAULT_CHECKS.iter().chain(NEGATIVE_CONTROLS).copied()
}

/// Stream reserved for a named check, so adding or reordering checks never
/// changes another check's draws.
pub fn check_rng(name: &str, seed: u64) -> RandomSource {
    let stream = name.bytes().fold(0u64, |h, b| mix64(h ^ u64::from(b)));
    RandomSource::new(seed, stream)
}

/// Sends every ball to bin 0.
struct Stuck(u64);

impl Sampler for Stuck {
    fn next_u64(&mut self) -> u64 {
        0
    }
    fn seed(&self) -> u64 {
        self.0
    }
}

fn random_config(n: usize, m: u64, rng: &mut RandomSource) -> Result<LoadVector> {
    one_choice_run(n, m, rng)
}

/// Runs one named check; checks with several sub-statements return several reports.
pub fn run_check(name: &str, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = check_rng(name, seed);
    let one = |r: Result<CheckReport>| r.map(|r| vec![r]);
    match name {
        "binomial_bound" => one(check_binomial_bound(8, 128)),
        "quadratic_drift_exact" => one(exact_quadratic_drift_sweep(3, 4)),
        "exponential_drift_exact" => one(exact_exponential_drift_sweep(3, 4, &[0.05, 0.1, 0.5])),
        "quadratic_drift" => {
            let x = random_config(50, 200, &mut rng)?;
            one(check_quadratic_drift(&x, 100_000, &mut rng))
        }
        "exponential_drift" => {
            let x = random_config(50, 200, &mut rng)?;
            let alpha = practical_params(50, 200, 1)?.alpha;
            one(check_exponential_drift(&x, alpha, 100_000, &mut rng))
        }
        "supermartingale" | "supermartingale_large_alpha" => {
            let spec = SupermartingaleSpec {
                process: Process::Rbb,
                n: 20,
                m: 100,
                init: InitialConfig::SingleBin,
                rounds: 80,
                sampled_rounds: 20,
            };
            let params = if name == "supermartingale" {
                practical_params(20, 100, 1)?
            } else {
                PotentialParams::with_alpha(20, 100, 1, 0.5)
            };
            let mut r = check_supermartingale(&spec, 0, &params, 10_000, &rng)?;
            r.name = name.to_string();
            Ok(vec![r])
        }
        "coupling_dominance" => one(check_coupling_dominance(64, 256, 1000, 1000, &mut rng)),
        "quadratic_change" => {
            let x = InitialConfig::Uniform.build(100, 1000)?;
            one(check_quadratic_change(&x, 100_000, &mut rng))
        }
        "drift_lemmas" => {
            let mut out = Vec::new();
            let walks = [
                DriftWalkConfig { max_state: 2, start: 1, target: 2, sigma2: 1.0, law: WalkLaw::SymmetricPm1 },
                DriftWalkConfig { max_state: 6, start: 3, target: 6, sigma2: 1.0, law: WalkLaw::SymmetricPm1 },
                DriftWalkConfig {
                    max_state: 64,
                    start: 2,
                    target: 4,
                    sigma2: (-2.0f64).exp(),
                    law: WalkLaw::IdealizedSingleBin { n: 10 },
                },
            ];
            for cfg in &walks {
                for mut r in check_drift_lemmas(cfg, 10_000, &mut rng)? {
                    r.name = format!("{}[s={},k={}]", r.name, cfg.start, cfg.target);
                    out.push(r);
                }
            }
            Ok(out)
        }
        "one_choice" => check_one_choice(1000, 1.0, 100, &mut rng),
        "chi_square_step" => {
            let x = LoadVector::new(vec![2, 1])?;
            one(chi_square_step(&x, 1_000_000, &mut rng))
        }
        "negative_control_quadratic_drift" => {
            let x = random_config(50, 200, &mut rng)?;
            one(check_quadratic_drift_variant(&x, 100_000, &mut rng, BoundVariant::NegativeControl))
        }
        "negative_control_exponential_drift" => {
            let x = random_config(50, 200, &mut rng)?;
            let alpha = practical_params(50, 200, 1)?.alpha;
            one(check_exponential_drift_variant(&x, alpha, 100_000, &mut rng, BoundVariant::NegativeControl))
        }
        "negative_control_chi_square" => {
            let x = LoadVector::new(vec![2, 1])?;
            let mut r = chi_square_step(&x, 100_000, &mut Stuck(seed))?;
            r.name = name.to_string();
            Ok(vec![r])
        }
        other => Err(RbbError::UnknownCheck(other.to_string())),
    }
}

/// Runs the selection (the default suite when empty). Names are resolved
/// before anything runs, so an unknown name fails fast.
pub fn run_checks(selection: &[String], seed: u64) -> Result<Vec<CheckReport>> {
    let names: Vec<&str> = if selection.is_empty() {
        DEFAULT_CHECKS.to_vec()
    } else {
        selection.iter().map(String::as_str).collect()
    };
    if let Some(bad) = names.iter().find(|n| !all_check_names().any(|k| k == **n)) {
        return Err(RbbError::UnknownCheck(bad.to_string()));
    }
    let mut out = Vec::new();
    for name in names {
        out.extend(run_check(name, seed)?);
    }
    Ok(out)
}
