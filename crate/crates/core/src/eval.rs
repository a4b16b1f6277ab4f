//! Experiment harness: train/test splits, binned error metrics, model
//! comparison reports and parameter-recovery statistics.
//!
//! The benchmark protocol fits every competing model on the first part of
//! each record (default the first half), forecasts the remainder on
//! hourly bins, and scores mean and median absolute error per bin plus
//! AIC. Per-cascade fit failures are recorded as losses for the failing
//! model rather than aborting the run.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{rpp_fit_with_min_events, DEFAULT_RPP_EPSILON};
use crate::error::{Error, Result};
use crate::fit::{fit_tideh, fit_two_stage, FitConfig, FittedModel};
use crate::forecast::{bin_count, forecast_for, ForecastBin, ForecastSeries, DEFAULT_BIN_WIDTH};
use crate::io::{load_set_cascades, Manifest};
use crate::model::{Cascade, TwoStageParams};

/// The model families the harness can race against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    TwoStage,
    Tideh,
    Rpp,
    Lr,
}

impl ModelId {
    pub fn name(&self) -> &'static str {
        match self {
            ModelId::TwoStage => "two-stage",
            ModelId::Tideh => "tideh",
            ModelId::Rpp => "rpp",
            ModelId::Lr => "lr",
        }
    }

    pub const ALL: [ModelId; 4] = [ModelId::TwoStage, ModelId::Tideh, ModelId::Rpp, ModelId::Lr];
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-stage" | "proposed" => Ok(ModelId::TwoStage),
            "tideh" => Ok(ModelId::Tideh),
            "rpp" => Ok(ModelId::Rpp),
            "lr" => Ok(ModelId::Lr),
            other => Err(Error::invalid(
                "model id",
                format!("`{other}` (expected two-stage, tideh, rpp or lr)"),
            )),
        }
    }
}

/// Actual cumulative reaction counts on the forecast bin grid:
/// `counts[k-1]` is the number of events in `(0, t_obs + k * width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCounts {
    pub t_obs: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

/// Bin the observed cascade over the test window.
pub fn bin_counts(cascade: &Cascade, t_obs: f64, t_max: f64, width: f64) -> Result<BinnedCounts> {
    if !(t_obs < t_max) {
        return Err(Error::Precondition(format!(
            "t_obs = {t_obs} must precede t_max = {t_max}"
        )));
    }
    if !(width > 0.0) {
        return Err(Error::invalid("bin width", format!("{width}")));
    }
    let n_b = bin_count(t_obs, t_max, width);
    let counts = (1..=n_b)
        .map(|k| cascade.reactions_through(t_obs + k as f64 * width) as u64)
        .collect();
    Ok(BinnedCounts {
        t_obs,
        width,
        counts,
    })
}

/// Mean and median absolute error between a forecast and the actual bins.
/// The grids must agree exactly.
pub fn absolute_errors(predicted: &ForecastSeries, actual: &BinnedCounts) -> Result<(f64, f64)> {
    let grids_match = predicted.bins.len() == actual.counts.len()
        && (predicted.t_obs - actual.t_obs).abs() < 1e-9
        && (predicted.bin_width - actual.width).abs() < 1e-9;
    if !grids_match {
        return Err(Error::Precondition(format!(
            "bin grids differ: {} bins from t_obs {} vs {} bins from t_obs {}",
            predicted.bins.len(),
            predicted.t_obs,
            actual.counts.len(),
            actual.t_obs
        )));
    }
    let mut errors: Vec<f64> = predicted
        .bins
        .iter()
        .zip(&actual.counts)
        .map(|(b, &n)| (b.cumulative - n as f64).abs())
        .collect();
    if errors.is_empty() {
        return Err(Error::Precondition("empty bin grid".into()));
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = median_of_sorted(&errors);
    Ok((mean, median))
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_of_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeRow {
    pub cascade_id: String,
    pub model: String,
    pub mean_ae: Option<f64>,
    pub median_ae: Option<f64>,
    pub aic: Option<f64>,
    pub win_mean: bool,
    pub win_median: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub model: String,
    pub mean_of_mean_ae: Option<f64>,
    pub mean_of_median_ae: Option<f64>,
    pub win_fraction_mean: f64,
    pub win_fraction_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCascade {
    pub cascade_id: String,
    pub reason: String,
}

/// Actual and predicted cumulative series for one cascade, for overlay
/// plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlaySeries {
    pub cascade_id: String,
    pub t_obs: f64,
    pub bin_ends: Vec<f64>,
    pub actual: Vec<u64>,
    pub predictions: Vec<(String, Vec<f64>)>,
}

/// One two-stage fit inside a recovery experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEstimate {
    pub cascade_id: String,
    pub t_obs: f64,
    pub a1: f64,
    pub tau1: f64,
    pub a2: f64,
    pub tau2: f64,
    pub tc: f64,
    pub loglik: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub param: String,
    pub truth: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub median_abs_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryStats {
    pub t_obs: f64,
    pub n_fits: usize,
    pub n_failed: usize,
    pub params: Vec<ParamStats>,
}

/// Parameter-recovery experiment: per-fit estimates plus per-window
/// quantile summaries against the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub truth: TwoStageParams,
    pub t_obs_grid: Vec<f64>,
    pub estimates: Vec<RecoveryEstimate>,
    pub stats: Vec<RecoveryStats>,
}

/// Full evaluation report: per-cascade rows, aggregates, exclusions,
/// optional overlays and an optional recovery section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<CascadeRow>,
    pub aggregates: Vec<AggregateRow>,
    pub skipped: Vec<SkippedCascade>,
    #[serde(default)]
    pub overlays: Vec<OverlaySeries>,
    #[serde(default)]
    pub recovery: Option<RecoveryReport>,
}

// ---------------------------------------------------------------------------
// Benchmark runner
// ---------------------------------------------------------------------------

/// Benchmark configuration. Inclusion thresholds default to the standard
/// criteria for observed datasets (at least 300 posts and a 36-hour
/// record) and can be relaxed for synthetic suites.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub models: Vec<ModelId>,
    /// Training fraction of each record.
    pub split: f64,
    pub min_posts: usize,
    pub min_t_max: f64,
    /// Minimum reaction events required by the point-process fitters.
    pub fit_min_events: usize,
    pub rpp_epsilon: f64,
    /// How many cascades get full overlay series in the report.
    pub overlay_limit: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            models: ModelId::ALL.to_vec(),
            split: 0.5,
            min_posts: 300,
            min_t_max: 36.0,
            fit_min_events: 30,
            rpp_epsilon: DEFAULT_RPP_EPSILON,
            overlay_limit: 4,
        }
    }
}

/// Model priority for tie-breaking "best model" flags.
const PRIORITY: [ModelId; 4] = [ModelId::TwoStage, ModelId::Tideh, ModelId::Rpp, ModelId::Lr];

struct ModelOutcome {
    model: ModelId,
    result: std::result::Result<(f64, f64, Option<f64>, Vec<f64>), String>,
}

/// Run the full comparison protocol over every cascade in the manifest.
pub fn run_benchmark(
    manifest: &Manifest,
    base: &Path,
    cfg: &BenchmarkConfig,
) -> Result<EvalReport> {
    if !(cfg.split > 0.0 && cfg.split < 1.0) {
        return Err(Error::invalid("split", format!("{}", cfg.split)));
    }
    let mut cascades: Vec<Cascade> = Vec::new();
    for set in &manifest.sets {
        cascades.extend(load_set_cascades(set, base)?);
    }
    run_benchmark_on(&cascades, cfg)
}

/// Same protocol on in-memory cascades.
pub fn run_benchmark_on(cascades: &[Cascade], cfg: &BenchmarkConfig) -> Result<EvalReport> {
    let mut included = Vec::new();
    let mut skipped = Vec::new();
    for c in cascades {
        let posts = c.posts_through(c.t_max);
        if posts < cfg.min_posts {
            skipped.push(SkippedCascade {
                cascade_id: c.id.clone(),
                reason: format!("{posts} posts < required {}", cfg.min_posts),
            });
        } else if c.t_max < cfg.min_t_max {
            skipped.push(SkippedCascade {
                cascade_id: c.id.clone(),
                reason: format!("record of {} h < required {} h", c.t_max, cfg.min_t_max),
            });
        } else {
            included.push(c);
        }
    }

    let per_cascade: Vec<(String, BinnedCounts, Vec<ModelOutcome>)> = included
        .par_iter()
        .enumerate()
        .map(|(idx, c)| {
            let t_obs = cfg.split * c.t_max;
            let actual = bin_counts(c, t_obs, c.t_max, DEFAULT_BIN_WIDTH)
                .expect("split < 1 guarantees a test window");
            let outcomes = cfg
                .models
                .iter()
                .map(|&m| ModelOutcome {
                    model: m,
                    result: score_model(c, m, t_obs, &actual, &included, idx, cfg),
                })
                .collect();
            (c.id.clone(), actual, outcomes)
        })
        .collect();

    let mut rows = Vec::new();
    let mut overlays = Vec::new();
    for (cascade_id, actual, outcomes) in &per_cascade {
        let win_mean = pick_winner(outcomes, |r| r.0);
        let win_median = pick_winner(outcomes, |r| r.1);
        for o in outcomes {
            let (mean_ae, median_ae, aic, error) = match &o.result {
                Ok((mean, median, aic, _)) => (Some(*mean), Some(*median), *aic, None),
                Err(e) => (None, None, None, Some(e.clone())),
            };
            rows.push(CascadeRow {
                cascade_id: cascade_id.clone(),
                model: o.model.name().to_string(),
                mean_ae,
                median_ae,
                aic,
                win_mean: win_mean == Some(o.model),
                win_median: win_median == Some(o.model),
                error,
            });
        }
        if overlays.len() < cfg.overlay_limit {
            let bin_ends: Vec<f64> = (1..=actual.counts.len())
                .map(|k| actual.t_obs + k as f64 * actual.width)
                .collect();
            overlays.push(OverlaySeries {
                cascade_id: cascade_id.clone(),
                t_obs: actual.t_obs,
                bin_ends,
                actual: actual.counts.clone(),
                predictions: outcomes
                    .iter()
                    .filter_map(|o| {
                        o.result
                            .as_ref()
                            .ok()
                            .map(|(_, _, _, series)| (o.model.name().to_string(), series.clone()))
                    })
                    .collect(),
            });
        }
    }

    let aggregates = aggregate_rows(&rows, &cfg.models, included.len());
    Ok(EvalReport {
        rows,
        aggregates,
        skipped,
        overlays,
        recovery: None,
    })
}

fn pick_winner<F>(outcomes: &[ModelOutcome], key: F) -> Option<ModelId>
where
    F: Fn(&(f64, f64, Option<f64>, Vec<f64>)) -> f64,
{
    let best = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().map(&key))
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    PRIORITY.iter().copied().find(|m| {
        outcomes
            .iter()
            .any(|o| o.model == *m && o.result.as_ref().map(&key) == Ok(best))
    })
}

fn aggregate_rows(rows: &[CascadeRow], models: &[ModelId], n_cascades: usize) -> Vec<AggregateRow> {
    models
        .iter()
        .map(|m| {
            let mine: Vec<&CascadeRow> = rows.iter().filter(|r| r.model == m.name()).collect();
            let means: Vec<f64> = mine.iter().filter_map(|r| r.mean_ae).collect();
            let medians: Vec<f64> = mine.iter().filter_map(|r| r.median_ae).collect();
            let avg = |v: &[f64]| {
                if v.is_empty() {
                    None
                } else {
                    Some(v.iter().sum::<f64>() / v.len() as f64)
                }
            };
            let frac = |wins: usize| {
                if n_cascades == 0 {
                    0.0
                } else {
                    wins as f64 / n_cascades as f64
                }
            };
            AggregateRow {
                model: m.name().to_string(),
                mean_of_mean_ae: avg(&means),
                mean_of_median_ae: avg(&medians),
                win_fraction_mean: frac(mine.iter().filter(|r| r.win_mean).count()),
                win_fraction_median: frac(mine.iter().filter(|r| r.win_median).count()),
            }
        })
        .collect()
}

type Score = std::result::Result<(f64, f64, Option<f64>, Vec<f64>), String>;

fn score_model(
    cascade: &Cascade,
    model: ModelId,
    t_obs: f64,
    actual: &BinnedCounts,
    corpus: &[&Cascade],
    self_idx: usize,
    cfg: &BenchmarkConfig,
) -> Score {
    let fit_and_forecast = || -> Result<(ForecastSeries, Option<f64>)> {
        match model {
            ModelId::TwoStage => {
                let mut fc = FitConfig::new(t_obs)?;
                fc.min_events = cfg.fit_min_events;
                let fit = fit_two_stage(cascade, &fc)?;
                let series = forecast_for(cascade, &fit, cascade.t_max)?;
                Ok((series, Some(fit.aic)))
            }
            ModelId::Tideh => {
                let mut fc = FitConfig::new(t_obs)?;
                fc.min_events = cfg.fit_min_events;
                let fit = fit_tideh(cascade, &fc)?;
                let series = forecast_for(cascade, &fit, cascade.t_max)?;
                Ok((series, Some(fit.aic)))
            }
            ModelId::Rpp => {
                let fit = rpp_fit_with_min_events(
                    cascade,
                    t_obs,
                    cfg.rpp_epsilon,
                    cfg.fit_min_events.min(10),
                )?;
                let series = forecast_for(cascade, &fit, cascade.t_max)?;
                Ok((series, Some(fit.aic)))
            }
            ModelId::Lr => {
                let series = lr_forecast_loo(cascade, t_obs, actual, corpus, self_idx)?;
                Ok((series, None))
            }
        }
    };
    match fit_and_forecast() {
        Ok((series, aic)) => match absolute_errors(&series, actual) {
            Ok((mean, median)) => Ok((
                mean,
                median,
                aic,
                series.bins.iter().map(|b| b.cumulative).collect(),
            )),
            Err(e) => Err(e.to_string()),
        },
        Err(e) => Err(e.to_string()),
    }
}

/// Leave-one-out LR forecast. Horizons are treated as offsets from each
/// cascade's own observation end, so records of different lengths can
/// train each other; a training cascade contributes to an offset only if
/// its record reaches it.
fn lr_forecast_loo(
    cascade: &Cascade,
    t_obs: f64,
    actual: &BinnedCounts,
    corpus: &[&Cascade],
    self_idx: usize,
) -> Result<ForecastSeries> {
    let width = actual.width;
    let n_b = actual.counts.len();
    let r_obs = cascade.posts_through(t_obs) as f64;
    if r_obs < 1.0 {
        return Err(Error::Precondition(
            "no observed posts before the split".into(),
        ));
    }
    let seed_posts = cascade.posts_through(0.0) as f64;
    let split = t_obs / cascade.t_max;

    let mut bins = Vec::with_capacity(n_b);
    for kbin in 1..=n_b {
        let offset = kbin as f64 * width;
        let mut ratios = Vec::new();
        for (j, other) in corpus.iter().enumerate() {
            if j == self_idx {
                continue;
            }
            let o_obs = split * other.t_max;
            if o_obs + offset > other.t_max + 1e-9 {
                continue;
            }
            let r0 = other.posts_through(o_obs) as f64;
            if r0 < 1.0 {
                continue;
            }
            let rt = other.posts_through(o_obs + offset) as f64;
            ratios.push((rt / r0).ln());
        }
        if ratios.len() < 2 {
            return Err(Error::Precondition(format!(
                "LR training corpus has {} usable cascades at offset {offset} h (need 2)",
                ratios.len()
            )));
        }
        let n = ratios.len() as f64;
        let alpha = ratios.iter().sum::<f64>() / n;
        let sigma2 = ratios.iter().map(|x| (x - alpha) * (x - alpha)).sum::<f64>() / n;
        let r_hat = r_obs * (alpha + sigma2 / 2.0).exp();
        bins.push(ForecastBin {
            t_end: t_obs + offset,
            cumulative: (r_hat - seed_posts).max(0.0),
        });
    }
    Ok(ForecastSeries {
        model_id: "lr".into(),
        t_obs,
        bin_width: width,
        d_p: cascade.mean_followers(t_obs),
        bins,
    })
}

// ---------------------------------------------------------------------------
// Recovery experiment
// ---------------------------------------------------------------------------

/// Fit the two-stage model at each observation window of a synthetic
/// suite and summarize estimate quantiles against the truth.
pub fn recovery_benchmark(
    manifest: &Manifest,
    base: &Path,
    min_events: usize,
) -> Result<RecoveryReport> {
    let set = manifest
        .sets
        .iter()
        .find(|s| s.truth.is_some())
        .ok_or_else(|| Error::Precondition("manifest has no synthetic set with truth".into()))?;
    let truth = set.truth.unwrap();
    let grid = manifest
        .t_obs_grid
        .clone()
        .ok_or_else(|| Error::Precondition("manifest has no t_obs grid".into()))?;
    let cascades = load_set_cascades(set, base)?;
    recovery_benchmark_on(&cascades, &truth, &grid, min_events)
}

pub fn recovery_benchmark_on(
    cascades: &[Cascade],
    truth: &TwoStageParams,
    t_obs_grid: &[f64],
    min_events: usize,
) -> Result<RecoveryReport> {
    let jobs: Vec<(usize, f64)> = (0..cascades.len())
        .flat_map(|i| t_obs_grid.iter().map(move |&t| (i, t)))
        .collect();
    let fitted: Vec<std::result::Result<RecoveryEstimate, (f64, String)>> = jobs
        .par_iter()
        .map(|&(i, t_obs)| {
            let c = &cascades[i];
            let mut cfg = FitConfig::new(t_obs).map_err(|e| (t_obs, e.to_string()))?;
            cfg.min_events = min_events;
            match fit_two_stage(c, &cfg) {
                Ok(fit) => {
                    let p = match fit.model {
                        FittedModel::TwoStage(p) => p,
                        _ => unreachable!(),
                    };
                    Ok(RecoveryEstimate {
                        cascade_id: c.id.clone(),
                        t_obs,
                        a1: p.a1,
                        tau1: p.tau1,
                        a2: p.a2,
                        tau2: p.tau2,
                        tc: p.tc,
                        loglik: fit.loglik,
                        converged: fit.diagnostics.converged,
                    })
                }
                Err(e) => Err((t_obs, e.to_string())),
            }
        })
        .collect();

    let mut estimates = Vec::new();
    let mut failures: Vec<f64> = Vec::new();
    for r in fitted {
        match r {
            Ok(e) => estimates.push(e),
            Err((t_obs, _)) => failures.push(t_obs),
        }
    }

    let stats = t_obs_grid
        .iter()
        .map(|&t_obs| {
            let mine: Vec<&RecoveryEstimate> = estimates
                .iter()
                .filter(|e| (e.t_obs - t_obs).abs() < 1e-9)
                .collect();
            let n_failed = failures.iter().filter(|&&t| (t - t_obs).abs() < 1e-9).count();
            let params = [
                ("a1", truth.a1, mine.iter().map(|e| e.a1).collect::<Vec<_>>()),
                ("tau1", truth.tau1, mine.iter().map(|e| e.tau1).collect()),
                ("a2", truth.a2, mine.iter().map(|e| e.a2).collect()),
                ("tau2", truth.tau2, mine.iter().map(|e| e.tau2).collect()),
                ("tc", truth.tc, mine.iter().map(|e| e.tc).collect()),
            ]
            .into_iter()
            .map(|(name, tv, mut vals)| {
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut rel: Vec<f64> = vals.iter().map(|v| (v - tv).abs() / tv.abs()).collect();
                rel.sort_by(|a, b| a.partial_cmp(b).unwrap());
                ParamStats {
                    param: name.to_string(),
                    truth: tv,
                    q25: quantile_of_sorted(&vals, 0.25),
                    median: quantile_of_sorted(&vals, 0.5),
                    q75: quantile_of_sorted(&vals, 0.75),
                    median_abs_rel_err: if rel.is_empty() {
                        f64::NAN
                    } else {
                        median_of_sorted(&rel)
                    },
                }
            })
            .collect();
            RecoveryStats {
                t_obs,
                n_fits: mine.len(),
                n_failed,
                params,
            }
        })
        .collect();

    Ok(RecoveryReport {
        truth: *truth,
        t_obs_grid: t_obs_grid.to_vec(),
        estimates,
        stats,
    })
}
