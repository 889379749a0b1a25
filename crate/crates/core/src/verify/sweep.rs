//! Randomized exercise of the characterization, positivity and locality
//! checks over generated domains and forms. Trials are independent, carry
//! hash-derived seeds and may run in parallel; the report depends only on
//! the seed and the parameters.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bdl::bdl_reconstruct;
use crate::bdl::BdlParts;
use crate::domain::{build_interval, build_rectangle, Domain};
use crate::error::{Error, Result};
use crate::forms::{neumann_form, robin_form, BoundaryMeasure, FormMatrix};
use crate::semigroup::{dominates, is_positivity_preserving};
use crate::verify::{
    add_offstencil_jump, locality_from_domination, verify_characterization, LocalityVerdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepGenerator {
    /// Plant a Robin measure and require the characterization round trip.
    PlantedMeasure,
    /// Random Markovian forms: positivity equivalence must hold and, when
    /// the Neumann semigroup dominates, locality must follow.
    MarkovianRandom,
    /// Planted measure plus one off-stencil jump of size 0.1: at least one
    /// premise must be falsified.
    OffStencilPerturbed,
}

impl std::str::FromStr for SweepGenerator {
    type Err = Error;
    fn from_str(s: &str) -> Result<SweepGenerator> {
        match s {
            "planted-measure" => Ok(SweepGenerator::PlantedMeasure),
            "markovian-random" => Ok(SweepGenerator::MarkovianRandom),
            "off-stencil-perturbed" => Ok(SweepGenerator::OffStencilPerturbed),
            other => Err(Error::InvalidArgument(format!(
                "unknown generator '{other}'"
            ))),
        }
    }
}

/// Ranges for the sampled domains: 1D grids up to `max_interval` nodes and,
/// when enabled, 2D grids up to `max_side` nodes per side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepDomains {
    pub max_interval: usize,
    pub max_side: usize,
    pub include_2d: bool,
}

impl Default for SweepDomains {
    fn default() -> Self {
        SweepDomains {
            max_interval: 65,
            max_side: 15,
            include_2d: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub trials: usize,
    pub seed: u64,
    pub generator: SweepGenerator,
    #[serde(default)]
    pub domains: SweepDomains,
    pub times: Vec<f64>,
}

impl SweepConfig {
    pub fn new(trials: usize, seed: u64, generator: SweepGenerator) -> SweepConfig {
        SweepConfig {
            trials,
            seed,
            generator,
            domains: SweepDomains::default(),
            times: vec![0.001, 0.01, 0.1, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepFailure {
    pub trial: usize,
    pub stage: String,
    pub witness: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepReport {
    pub seed: u64,
    pub trials: usize,
    pub passes: usize,
    pub failures: Vec<SweepFailure>,
}

impl SweepReport {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// splitmix64 finalizer over the seed and trial index.
fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed
        .wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_domain(rng: &mut ChaCha8Rng, ranges: &SweepDomains) -> Result<Arc<Domain>> {
    let two_d = ranges.include_2d && rng.gen_bool(0.5);
    let domain = if two_d {
        let nx = rng.gen_range(3..=ranges.max_side.max(3));
        let ny = rng.gen_range(3..=ranges.max_side.max(3));
        build_rectangle(nx, ny, 1.0, 1.0)?
    } else {
        let n = rng.gen_range(3..=ranges.max_interval.max(3));
        build_interval(n, 1.0)?
    };
    Ok(Arc::new(domain))
}

fn sample_measure(rng: &mut ChaCha8Rng, len: usize, allow_infinite: bool) -> BoundaryMeasure {
    let values = (0..len)
        .map(|_| {
            if allow_infinite && rng.gen_bool(0.15) {
                f64::INFINITY
            } else {
                rng.gen_range(0.0..2.0)
            }
        })
        .collect();
    BoundaryMeasure::new(values).expect("sampled values are admissible")
}

fn non_edge_pairs(domain: &Domain, skip_pinned: &FormMatrix) -> Vec<(usize, usize)> {
    let n = domain.n_nodes();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !domain.is_edge(i, j) && !skip_pinned.is_pinned(i) && !skip_pinned.is_pinned(j) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Random Markovian form per the sampling recipe: nonnegative stencil jumps
/// uniform on [0, 1), boundary killing uniform on [0, 2), and with
/// probability one half an extra off-stencil jump.
fn sample_markovian_form(rng: &mut ChaCha8Rng, domain: &Arc<Domain>) -> Result<FormMatrix> {
    let stencil_jump = domain.edges().iter().map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut killing = vec![0.0; domain.n_nodes()];
    for &b in domain.boundary() {
        killing[b] = rng.gen_range(0.0..2.0);
    }
    let mut nonlocal_jump = BTreeMap::new();
    if rng.gen_bool(0.5) {
        let neumann = neumann_form(domain);
        let pairs = non_edge_pairs(domain, &neumann);
        if !pairs.is_empty() {
            let (i, j) = pairs[rng.gen_range(0..pairs.len())];
            // bounded away from zero so the jump is visible to every
            // tolerance-based check
            nonlocal_jump.insert((i, j), rng.gen_range(0.1..1.1));
        }
    }
    let parts = BdlParts {
        stencil_jump,
        nonlocal_jump,
        killing,
        markovian: true,
    };
    bdl_reconstruct(&parts, domain)
}

fn run_trial(config: &SweepConfig, trial: usize) -> Option<SweepFailure> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, trial as u64));
    let fail = |stage: &str, witness: String| {
        Some(SweepFailure {
            trial,
            stage: stage.to_string(),
            witness,
        })
    };
    let domain = match sample_domain(&mut rng, &config.domains) {
        Ok(d) => d,
        Err(e) => return fail("domain", e.to_string()),
    };
    match config.generator {
        SweepGenerator::PlantedMeasure => {
            let mu = sample_measure(&mut rng, domain.boundary().len(), true);
            match verify_characterization(&domain, &mu, &config.times) {
                Ok(rep) if rep.passed() => None,
                Ok(rep) => {
                    if !rep.forward_sandwich {
                        let w = rep
                            .sandwich
                            .lower
                            .worst
                            .or(rep.sandwich.upper.worst)
                            .map(|w| format!("t={} entry=({},{}) excess={}", w.t, w.i, w.j, w.value))
                            .unwrap_or_default();
                        fail("sandwich", w)
                    } else {
                        fail(
                            "extraction",
                            format!(
                                "max_error={} pinned_match={}",
                                rep.max_measure_error, rep.pinned_match
                            ),
                        )
                    }
                }
                Err(e) => fail("characterization", e.to_string()),
            }
        }
        SweepGenerator::MarkovianRandom => {
            let form = match sample_markovian_form(&mut rng, &domain) {
                Ok(f) => f,
                Err(e) => return fail("generation", e.to_string()),
            };
            match is_positivity_preserving(&form, &config.times) {
                Ok(rep) if !rep.consistent => {
                    return fail(
                        "positivity-equivalence",
                        format!("algebraic={} numerical={}", rep.algebraic, rep.numerical),
                    )
                }
                Ok(_) => {}
                Err(e) => return fail("positivity", e.to_string()),
            }
            match locality_from_domination(&form, &config.times) {
                Ok(rep) => match rep.verdict {
                    LocalityVerdict::TheoremViolation { i, j, jump } => fail(
                        "locality",
                        format!("off-stencil pair ({i}, {j}) with jump {jump}"),
                    ),
                    _ => None,
                },
                Err(e) => fail("locality", e.to_string()),
            }
        }
        SweepGenerator::OffStencilPerturbed => {
            let mu = sample_measure(&mut rng, domain.boundary().len(), false);
            let form = match robin_form(&domain, &mu) {
                Ok(f) => f,
                Err(e) => return fail("generation", e.to_string()),
            };
            let pairs = non_edge_pairs(&domain, &form);
            if pairs.is_empty() {
                return fail("generation", "no off-stencil pair available".into());
            }
            let (i, j) = pairs[rng.gen_range(0..pairs.len())];
            let weight = if rng.gen_bool(0.5) { 0.1 } else { -0.1 };
            let perturbed = match add_offstencil_jump(&form, i, j, weight) {
                Ok(f) => f,
                Err(e) => return fail("perturbation", e.to_string()),
            };
            let markovian = crate::forms::is_markovian(&perturbed).is_markovian();
            let dominated = match dominates(
                &perturbed,
                &neumann_form(&domain),
                &config.times,
                None,
            ) {
                Ok(rep) => rep.verdict,
                Err(e) => return fail("domination", e.to_string()),
            };
            if markovian && dominated {
                fail(
                    "perturbation-undetected",
                    format!("pair ({i}, {j}) weight {weight} kept both premises"),
                )
            } else {
                None
            }
        }
    }
}

/// Runs the trials (in parallel) and assembles the deterministic report.
pub fn sweep_random(config: &SweepConfig) -> Result<SweepReport> {
    if config.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if config.times.is_empty() {
        return Err(Error::InvalidArgument("time grid is empty".into()));
    }
    let failures: Vec<SweepFailure> = (0..config.trials)
        .into_par_iter()
        .filter_map(|trial| run_trial(config, trial))
        .collect();
    Ok(SweepReport {
        seed: config.seed,
        trials: config.trials,
        passes: config.trials - failures.len(),
        failures,
    })
}
