//! Arbitration over classification logs.
//!
//! The arguing-machines rule sends every top-1 disagreement to an oracle
//! supervisor, who always answers correctly; on agreement the primary
//! system's answer stands. Baselines: each system alone, a probability
//! ensemble, and a random arbitrator that reviews the same number of items
//! chosen uniformly at random.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disagreement::categorical_disagree;
use crate::par::Execution;
use crate::streams::{ClassLog, ClassRecord};

#[derive(Debug, Error, PartialEq)]
pub enum ArbitrationError {
    #[error("empty log")]
    EmptyLog,
    #[error("record {0} has no ground truth")]
    MissingTruth(String),
    #[error("k = {k} out of range (1..={max})")]
    KOutOfRange { k: usize, max: usize },
    #[error("budget fraction {0} outside [0, 1]")]
    InvalidBudget(f64),
    #[error("record {item_id} has no {which} probability vector")]
    MissingProbs { item_id: String, which: &'static str },
    #[error("record {0}: empty prediction list")]
    EmptyPredictions(String),
    #[error("invalid ensemble weight {0}")]
    InvalidWeight(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Primary,
    Secondary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PrimaryOnly,
    SecondaryOnly,
    Ensemble,
    RandomArbitrator,
    ArguingMachines,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::PrimaryOnly => "primary_only",
            Method::SecondaryOnly => "secondary_only",
            Method::Ensemble => "ensemble",
            Method::RandomArbitrator => "random_arbitrator",
            Method::ArguingMachines => "arguing_machines",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One Table-1 style row: error percentages per k and the share of items
/// reviewed by the supervisor.
#[derive(Clone, Debug, PartialEq)]
pub struct ArbitrationReport {
    pub method: Method,
    pub error_pct: BTreeMap<usize, f64>,
    pub review_fraction: f64,
}

/// Disagreement viewed as a detector of primary top-k failures. Percentages
/// are `None` when their denominator is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorMetrics {
    pub k: usize,
    pub precision_pct: Option<f64>,
    pub recall_pct: Option<f64>,
    pub true_positives: usize,
    pub disagreements: usize,
    pub failures: usize,
}

fn percent(count: usize, total: usize) -> f64 {
    100.0 * count as f64 / total as f64
}

fn ratio_pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| percent(num, den))
}

fn list(record: &ClassRecord, system: System) -> &[u32] {
    match system {
        System::Primary => &record.primary_topk,
        System::Secondary => &record.secondary_topk,
    }
}

/// Truth labels in record order; rejects the first truth-less record.
fn truths(log: &ClassLog) -> Result<Vec<u32>, ArbitrationError> {
    if log.is_empty() {
        return Err(ArbitrationError::EmptyLog);
    }
    log.records()
        .iter()
        .map(|r| {
            r.truth
                .ok_or_else(|| ArbitrationError::MissingTruth(r.item_id.clone()))
        })
        .collect()
}

fn check_k(log: &ClassLog, k: usize) -> Result<(), ArbitrationError> {
    let max = log
        .records()
        .iter()
        .map(|r| r.primary_topk.len().min(r.secondary_topk.len()))
        .min()
        .unwrap_or(0);
    if k == 0 || k > max {
        return Err(ArbitrationError::KOutOfRange { k, max });
    }
    Ok(())
}

fn fails(record: &ClassRecord, truth: u32, system: System, k: usize) -> bool {
    !list(record, system)[..k].contains(&truth)
}

fn disagreements(log: &ClassLog) -> Result<Vec<bool>, ArbitrationError> {
    log.records()
        .iter()
        .map(|r| {
            categorical_disagree(r).map_err(|_| ArbitrationError::EmptyPredictions(r.item_id.clone()))
        })
        .collect()
}

/// Per-record primary failure flags at `k`.
fn primary_failures(
    log: &ClassLog,
    truth: &[u32],
    k: usize,
    exec: Execution,
) -> Vec<bool> {
    let records = log.records();
    exec.map_range(records.len(), |i| {
        fails(&records[i], truth[i], System::Primary, k)
    })
}

pub fn topk_error(log: &ClassLog, system: System, k: usize) -> Result<f64, ArbitrationError> {
    topk_error_with(log, system, k, Execution::default())
}

pub fn topk_error_with(
    log: &ClassLog,
    system: System,
    k: usize,
    exec: Execution,
) -> Result<f64, ArbitrationError> {
    let truth = truths(log)?;
    check_k(log, k)?;
    let records = log.records();
    let failures = exec
        .map_range(records.len(), |i| fails(&records[i], truth[i], system, k))
        .into_iter()
        .filter(|&f| f)
        .count();
    Ok(percent(failures, records.len()))
}

/// Error percent and review fraction under oracle supervision of every
/// top-1 disagreement.
pub fn arguing_machines_error(log: &ClassLog, k: usize) -> Result<(f64, f64), ArbitrationError> {
    let truth = truths(log)?;
    check_k(log, k)?;
    let disagree = disagreements(log)?;
    let failed = primary_failures(log, &truth, k, Execution::default());
    let residual = failed
        .iter()
        .zip(&disagree)
        .filter(|(&f, &d)| f && !d)
        .count();
    let reviewed = disagree.iter().filter(|&&d| d).count();
    let n = log.len();
    Ok((percent(residual, n), reviewed as f64 / n as f64))
}

pub fn detector_metrics(log: &ClassLog, k: usize) -> Result<DetectorMetrics, ArbitrationError> {
    let truth = truths(log)?;
    check_k(log, k)?;
    let disagree = disagreements(log)?;
    let failed = primary_failures(log, &truth, k, Execution::default());
    let true_positives = failed.iter().zip(&disagree).filter(|(&f, &d)| f && d).count();
    let disagreements = disagree.iter().filter(|&&d| d).count();
    let failures = failed.iter().filter(|&&f| f).count();
    Ok(DetectorMetrics {
        k,
        precision_pct: ratio_pct(true_positives, disagreements),
        recall_pct: ratio_pct(true_positives, failures),
        true_positives,
        disagreements,
        failures,
    })
}

/// Number of items a random arbitrator reviews: `floor(budget * n)`, with a
/// 1e-9 allowance so that e.g. `0.233 * 50000` yields 11650.
pub fn review_budget(budget_fraction: f64, n: usize) -> Result<usize, ArbitrationError> {
    if !(budget_fraction.is_finite() && (0.0..=1.0).contains(&budget_fraction)) {
        return Err(ArbitrationError::InvalidBudget(budget_fraction));
    }
    Ok(((budget_fraction * n as f64 + 1e-9).floor() as usize).min(n))
}

/// Selects `m` of `n` indices uniformly without replacement: a partial
/// Fisher-Yates shuffle driven by ChaCha8 seeded from `seed`.
pub fn sample_review_set(n: usize, m: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<u32> = (0..n as u32).collect();
    let (chosen, _) = idx.partial_shuffle(&mut rng, m);
    chosen.to_vec()
}

fn random_draw(failed: &[Vec<bool>], n: usize, m: usize, seed: u64) -> Vec<f64> {
    let chosen = sample_review_set(n, m, seed);
    failed
        .iter()
        .map(|flags| {
            let total = flags.iter().filter(|&&f| f).count();
            let caught = chosen.iter().filter(|&&i| flags[i as usize]).count();
            percent(total - caught, n)
        })
        .collect()
}

/// One random-arbitrator realization: reviewed records are scored correct,
/// the rest by the primary top-k.
pub fn random_arbitrator_error(
    log: &ClassLog,
    budget_fraction: f64,
    k: usize,
    seed: u64,
) -> Result<f64, ArbitrationError> {
    let truth = truths(log)?;
    check_k(log, k)?;
    let m = review_budget(budget_fraction, log.len())?;
    let failed = primary_failures(log, &truth, k, Execution::Sequential);
    Ok(random_draw(&[failed], log.len(), m, seed)[0])
}

/// Monte Carlo summary of the random arbitrator for one k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomArbitratorStats {
    pub k: usize,
    pub budget_fraction: f64,
    pub reviewed: usize,
    pub draws: usize,
    pub base_seed: u64,
    /// The realization drawn with `base_seed` itself.
    pub single_draw_pct: f64,
    pub mean_pct: f64,
    pub stderr_pct: f64,
    /// Empirical 0.5% and 99.5% quantiles of the per-draw error.
    pub q005_pct: f64,
    pub q995_pct: f64,
    /// Closed form `primary_error * (1 - reviewed / n)`.
    pub expected_pct: f64,
    /// Closed-form per-draw standard deviation (hypergeometric).
    pub draw_sd_pct: f64,
}

/// Runs `draws` random-arbitrator realizations with seeds `base_seed`,
/// `base_seed + 1`, ... and summarizes each k. Every draw's review set is
/// shared across the requested ks.
pub fn random_arbitrator_monte_carlo(
    log: &ClassLog,
    budget_fraction: f64,
    ks: &[usize],
    base_seed: u64,
    draws: usize,
    exec: Execution,
) -> Result<Vec<RandomArbitratorStats>, ArbitrationError> {
    let truth = truths(log)?;
    for &k in ks {
        check_k(log, k)?;
    }
    let n = log.len();
    let m = review_budget(budget_fraction, n)?;
    let failed: Vec<Vec<bool>> = ks
        .iter()
        .map(|&k| primary_failures(log, &truth, k, exec))
        .collect();
    let per_draw = exec.map_range(draws.max(1), |i| {
        random_draw(&failed, n, m, base_seed.wrapping_add(i as u64))
    });

    Ok(ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let mut values: Vec<f64> = per_draw.iter().map(|d| d[j]).collect();
            let count = values.len() as f64;
            let mean = values.iter().sum::<f64>() / count;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            let single = values[0];
            values.sort_by(f64::total_cmp);
            let fail_count = failed[j].iter().filter(|&&f| f).count() as f64;
            let nf = n as f64;
            let mf = m as f64;
            let p = fail_count / nf;
            let draw_var = if n > 1 {
                mf * p * (1.0 - p) * (nf - mf) / (nf - 1.0)
            } else {
                0.0
            };
            RandomArbitratorStats {
                k,
                budget_fraction,
                reviewed: m,
                draws: values.len(),
                base_seed,
                single_draw_pct: single,
                mean_pct: mean,
                stderr_pct: (var / count).sqrt(),
                q005_pct: quantile(&values, 0.005),
                q995_pct: quantile(&values, 0.995),
                expected_pct: 100.0 * p * (1.0 - mf / nf),
                draw_sd_pct: 100.0 * draw_var.sqrt() / nf,
            }
        })
        .collect())
}

/// Nearest-rank quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// How two probability vectors are fused: `w * primary + (1 - w) * secondary`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFusion {
    pub primary_weight: f64,
}

impl Default for EnsembleFusion {
    /// Unweighted mean.
    fn default() -> Self {
        EnsembleFusion {
            primary_weight: 0.5,
        }
    }
}

impl EnsembleFusion {
    pub fn fuse(&self, primary: &[f64], secondary: &[f64]) -> Vec<f64> {
        let w = self.primary_weight;
        primary
            .iter()
            .zip(secondary)
            .map(|(p, s)| w * p + (1.0 - w) * s)
            .collect()
    }
}

/// Rank of `class` in a score vector: the number of classes ranked ahead of
/// it. Ties go to the lower class index.
pub fn rank_of(scores: &[f64], class: u32) -> usize {
    let c = class as usize;
    let v = scores[c];
    scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| s > v || (s == v && i < c))
        .count()
}

pub fn ensemble_error(log: &ClassLog, k: usize) -> Result<f64, ArbitrationError> {
    ensemble_error_with(log, k, EnsembleFusion::default(), Execution::default())
}

pub fn ensemble_error_with(
    log: &ClassLog,
    k: usize,
    fusion: EnsembleFusion,
    exec: Execution,
) -> Result<f64, ArbitrationError> {
    if !(fusion.primary_weight.is_finite() && (0.0..=1.0).contains(&fusion.primary_weight)) {
        return Err(ArbitrationError::InvalidWeight(fusion.primary_weight));
    }
    let truth = truths(log)?;
    if k == 0 || k > log.num_classes() as usize {
        return Err(ArbitrationError::KOutOfRange {
            k,
            max: log.num_classes() as usize,
        });
    }
    let mut pairs = Vec::with_capacity(log.len());
    for r in log.records() {
        let p = r.primary_probs.as_deref().ok_or_else(|| ArbitrationError::MissingProbs {
            item_id: r.item_id.clone(),
            which: "primary",
        })?;
        let s = r.secondary_probs.as_deref().ok_or_else(|| ArbitrationError::MissingProbs {
            item_id: r.item_id.clone(),
            which: "secondary",
        })?;
        pairs.push((p, s));
    }
    let failures = exec
        .map_range(pairs.len(), |i| {
            let (p, s) = pairs[i];
            rank_of(&fusion.fuse(p, s), truth[i]) >= k
        })
        .into_iter()
        .filter(|&f| f)
        .count();
    Ok(percent(failures, log.len()))
}

#[derive(Clone, Debug)]
pub struct ArbitrationOptions {
    pub ks: Vec<usize>,
    pub seed: u64,
    pub draws: usize,
    /// Random-arbitrator budget; defaults to the observed review fraction.
    pub budget_fraction: Option<f64>,
    pub ensemble: Option<EnsembleFusion>,
    pub exec: Execution,
}

impl Default for ArbitrationOptions {
    fn default() -> Self {
        ArbitrationOptions {
            ks: vec![1, 5],
            seed: 0,
            draws: 1000,
            budget_fraction: None,
            ensemble: None,
            exec: Execution::default(),
        }
    }
}

/// Everything needed for the Table-1 and Table-2 style reports.
#[derive(Clone, Debug)]
pub struct ArbitrationSummary {
    pub num_records: usize,
    pub methods: Vec<ArbitrationReport>,
    pub detectors: Vec<DetectorMetrics>,
    pub random: Vec<RandomArbitratorStats>,
}

pub fn evaluate(log: &ClassLog, opts: &ArbitrationOptions) -> Result<ArbitrationSummary, ArbitrationError> {
    truths(log)?;
    if opts.ks.is_empty() {
        check_k(log, 0)?;
    }
    for &k in &opts.ks {
        check_k(log, k)?;
    }
    let exec = opts.exec;
    let per_k = |f: &dyn Fn(usize) -> Result<f64, ArbitrationError>| {
        opts.ks
            .iter()
            .map(|&k| f(k).map(|e| (k, e)))
            .collect::<Result<BTreeMap<_, _>, _>>()
    };

    let mut methods = vec![
        ArbitrationReport {
            method: Method::PrimaryOnly,
            error_pct: per_k(&|k| topk_error_with(log, System::Primary, k, exec))?,
            review_fraction: 0.0,
        },
        ArbitrationReport {
            method: Method::SecondaryOnly,
            error_pct: per_k(&|k| topk_error_with(log, System::Secondary, k, exec))?,
            review_fraction: 0.0,
        },
    ];
    if let Some(fusion) = opts.ensemble {
        methods.push(ArbitrationReport {
            method: Method::Ensemble,
            error_pct: per_k(&|k| ensemble_error_with(log, k, fusion, exec))?,
            review_fraction: 0.0,
        });
    }

    let (_, review_fraction) = arguing_machines_error(log, opts.ks[0])?;
    let budget = opts.budget_fraction.unwrap_or(review_fraction);
    let random = random_arbitrator_monte_carlo(log, budget, &opts.ks, opts.seed, opts.draws, exec)?;
    methods.push(ArbitrationReport {
        method: Method::RandomArbitrator,
        error_pct: random.iter().map(|s| (s.k, s.mean_pct)).collect(),
        review_fraction: random
            .first()
            .map(|s| s.reviewed as f64 / log.len() as f64)
            .unwrap_or(0.0),
    });
    methods.push(ArbitrationReport {
        method: Method::ArguingMachines,
        error_pct: per_k(&|k| arguing_machines_error(log, k).map(|(e, _)| e))?,
        review_fraction,
    });

    let detectors = opts
        .ks
        .iter()
        .map(|&k| detector_metrics(log, k))
        .collect::<Result<_, _>>()?;

    Ok(ArbitrationSummary {
        num_records: log.len(),
        methods,
        detectors,
        random,
    })
}
