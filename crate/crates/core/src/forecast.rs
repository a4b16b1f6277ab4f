//! Intensity and cumulative-count forecasts over a test window.
//!
//! After a fit on `[0, T_obs]`, the future intensity splits into a
//! deterministic part driven by observed first-stage events,
//!
//! ```text
//! lambda1(t) = p1(t) sum over observed t_i < tc of d_i phi(t - t_i)
//! ```
//!
//! and a self-consistent second-stage part solving a Volterra equation of
//! the second kind,
//!
//! ```text
//! lambda2(t) = f(t) + d_p p2(t) integral from T_obs to t of lambda2(s) phi(t - s) ds
//! f(t) = p2(t) sum over observed tc < t_i < T_obs of d_i phi(t - t_i)
//! ```
//!
//! with `d_p` the average follower count over the observation window. The
//! equation is marched forward on a uniform grid with trapezoidal weights;
//! `phi(0)` is finite so the implicit diagonal term is a benign division.
//! The single-stage forecast uses the same machinery with every observed
//! event feeding `f`.
//!
//! Cumulative forecasts integrate the predicted intensity and report it on
//! hourly bins, anchored at the observed count `N(T_obs)`.

use serde::{Deserialize, Serialize};

use crate::baselines::rpp_predict;
use crate::error::{Error, Result};
use crate::fit::{FitResult, FittedModel};
use crate::model::{
    infection_rate, Cascade, KernelParams, TiDeHParams, TwoStageParams,
};

/// Default Volterra time step, hours.
pub const DEFAULT_VOLTERRA_STEP: f64 = 0.05;

/// Default forecast bin width, hours.
pub const DEFAULT_BIN_WIDTH: f64 = 1.0;

/// One forecast bin: predicted cumulative reaction count at the bin end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastBin {
    pub t_end: f64,
    pub cumulative: f64,
}

/// Predicted cumulative-count series over `(T_obs, T_max]`.
///
/// Counts follow the reaction convention (events in `(0, t]`, seed
/// excluded), matching the binning of actual cascades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub model_id: String,
    pub t_obs: f64,
    pub bin_width: f64,
    /// Average follower count used by the feedback term.
    pub d_p: f64,
    pub bins: Vec<ForecastBin>,
}

/// Dense grid of a solved second-stage intensity.
#[derive(Debug, Clone)]
pub struct IntensityGrid {
    pub t0: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl IntensityGrid {
    /// Linear interpolation inside the grid.
    pub fn at(&self, t: f64) -> f64 {
        let x = (t - self.t0) / self.step;
        if x <= 0.0 {
            return self.values[0];
        }
        let n = self.values.len() - 1;
        if x >= n as f64 {
            return self.values[n];
        }
        let i = x.floor() as usize;
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

fn two_stage_fit_parts(fit: &FitResult) -> Result<&TwoStageParams> {
    match &fit.model {
        FittedModel::TwoStage(p) => Ok(p),
        other => Err(Error::invalid(
            "fit",
            format!("expected a two-stage fit, got {}", other.id()),
        )),
    }
}

fn guard_tc(params: &TwoStageParams, t_obs: f64) -> Result<()> {
    if params.tc >= t_obs {
        return Err(Error::invalid(
            "correction time",
            format!(
                "tc = {} is not inside the observation window (t_obs = {t_obs})",
                params.tc
            ),
        ));
    }
    Ok(())
}

/// First-stage forecast intensity at `t >= T_obs`: deterministic in the
/// observed pre-correction events.
pub fn forecast_intensity_stage1(t: f64, cascade: &Cascade, fit: &FitResult) -> Result<f64> {
    let p = two_stage_fit_parts(fit)?;
    guard_tc(p, fit.t_obs)?;
    if t < fit.t_obs {
        return Err(Error::Precondition(format!(
            "forecast time {t} is before t_obs = {}",
            fit.t_obs
        )));
    }
    Ok(stage1_intensity(t, cascade, p, fit.t_obs, &KernelParams::default()))
}

fn stage1_intensity(
    t: f64,
    cascade: &Cascade,
    p: &TwoStageParams,
    t_obs: f64,
    k: &KernelParams,
) -> f64 {
    let mut mem = 0.0;
    for e in &cascade.events {
        if e.time >= p.tc || e.time > t_obs {
            break;
        }
        mem += e.followers as f64 * k.density_unchecked(t - e.time);
    }
    infection_rate(t, p.a1, p.tau1, 0.0, &p.circadian) * mem
}

/// Observed events feeding the forcing term: `(time, followers)` pairs
/// with `lo < t_i < hi`.
fn sources_between(cascade: &Cascade, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    cascade
        .events
        .iter()
        .filter(|e| e.time > lo && e.time < hi)
        .map(|e| (e.time, e.followers as f64))
        .collect()
}

/// Forward-marched solution of
/// `y(t) = f(t) + d_p rate(t) integral from t0 of y(s) phi(t - s) ds`
/// with trapezoidal weights and `y(t0) = f(t0)`.
fn solve_volterra<F, R>(
    f: F,
    rate: R,
    d_p: f64,
    t0: f64,
    n_steps: usize,
    step: f64,
    k: &KernelParams,
) -> Result<IntensityGrid>
where
    F: Fn(f64) -> f64,
    R: Fn(f64) -> f64,
{
    let mut values = Vec::with_capacity(n_steps + 1);
    values.push(f(t0));
    let phi0 = k.density_unchecked(0.0);
    for i in 1..=n_steps {
        let t = t0 + i as f64 * step;
        let mut conv = 0.5 * k.density_unchecked(t - t0) * values[0];
        for (j, v) in values.iter().enumerate().skip(1) {
            let s = t0 + j as f64 * step;
            conv += k.density_unchecked(t - s) * v;
        }
        let coeff = d_p * rate(t) * step;
        let denom = 1.0 - coeff * 0.5 * phi0;
        if denom <= 0.1 {
            return Err(Error::Numerical(format!(
                "Volterra step {step} h is unstable for feedback scale {:.3e}; reduce the step",
                d_p * rate(t)
            )));
        }
        values.push((f(t) + coeff * conv) / denom);
    }
    Ok(IntensityGrid {
        t0,
        step,
        values,
    })
}

/// Second-stage solution on `[T_obs, t_end]` at the given step.
pub fn stage2_solution(
    cascade: &Cascade,
    fit: &FitResult,
    d_p: f64,
    t_end: f64,
    step: f64,
) -> Result<IntensityGrid> {
    let p = *two_stage_fit_parts(fit)?;
    guard_tc(&p, fit.t_obs)?;
    let t_obs = fit.t_obs;
    let sources = sources_between(cascade, p.tc, t_obs);
    let k = KernelParams::default();
    let circ = p.circadian;
    let forcing = move |t: f64| {
        let mem: f64 = sources
            .iter()
            .map(|&(ti, d)| d * k.density_unchecked(t - ti))
            .sum();
        infection_rate(t, p.a2, p.tau2, p.tc, &circ) * mem
    };
    let rate = move |t: f64| infection_rate(t, p.a2, p.tau2, p.tc, &circ);
    let n_steps = ((t_end - t_obs) / step).round().max(0.0) as usize;
    solve_volterra(forcing, rate, d_p, t_obs, n_steps, step, &k)
}

/// Second-stage forecast intensity at a single time (solves up to `t`).
pub fn forecast_intensity_stage2(
    t: f64,
    cascade: &Cascade,
    fit: &FitResult,
    d_p: f64,
) -> Result<f64> {
    if t < fit.t_obs {
        return Err(Error::Precondition(format!(
            "forecast time {t} is before t_obs = {}",
            fit.t_obs
        )));
    }
    let step = DEFAULT_VOLTERRA_STEP;
    let grid = stage2_solution(cascade, fit, d_p, t + step, step)?;
    Ok(grid.at(t))
}

/// Cumulative forecast for the two-stage model on hourly bins up to
/// `t_max`.
pub fn forecast_cumulative(cascade: &Cascade, fit: &FitResult, t_max: f64) -> Result<ForecastSeries> {
    let p = *two_stage_fit_parts(fit)?;
    guard_tc(&p, fit.t_obs)?;
    let t_obs = fit.t_obs;
    if !(t_max > t_obs) {
        return Err(Error::Precondition(format!(
            "t_max = {t_max} must exceed t_obs = {t_obs}"
        )));
    }
    let d_p = cascade.mean_followers(t_obs);
    let k = KernelParams::default();
    build_series(
        "two-stage",
        cascade,
        fit,
        t_max,
        d_p,
        |grid_end, step| {
            let lam2 = stage2_solution(cascade, fit, d_p, grid_end, step)?;
            let values = lam2
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let t = t_obs + i as f64 * step;
                    stage1_intensity(t, cascade, &p, t_obs, &k) + v
                })
                .collect();
            Ok(IntensityGrid {
                t0: t_obs,
                step,
                values,
            })
        },
    )
}

/// Cumulative forecast for the single-stage model: every observed event
/// feeds the forcing term and the feedback runs at the fitted rate.
pub fn forecast_tideh(cascade: &Cascade, fit: &FitResult, t_max: f64) -> Result<ForecastSeries> {
    let p: TiDeHParams = match &fit.model {
        FittedModel::Tideh(p) => *p,
        other => {
            return Err(Error::invalid(
                "fit",
                format!("expected a single-stage fit, got {}", other.id()),
            ))
        }
    };
    let t_obs = fit.t_obs;
    if !(t_max > t_obs) {
        return Err(Error::Precondition(format!(
            "t_max = {t_max} must exceed t_obs = {t_obs}"
        )));
    }
    let d_p = cascade.mean_followers(t_obs);
    let k = KernelParams::default();
    let circ = p.circadian;
    let sources = sources_between(cascade, -1.0, t_obs);
    build_series("tideh", cascade, fit, t_max, d_p, |grid_end, step| {
        let forcing = |t: f64| {
            let mem: f64 = sources
                .iter()
                .map(|&(ti, d)| d * k.density_unchecked(t - ti))
                .sum();
            infection_rate(t, p.a, p.tau, 0.0, &circ) * mem
        };
        let rate = |t: f64| infection_rate(t, p.a, p.tau, 0.0, &circ);
        let n_steps = ((grid_end - t_obs) / step).round().max(0.0) as usize;
        solve_volterra(forcing, rate, d_p, t_obs, n_steps, step, &k)
    })
}

/// Forecast with whichever model the fit carries.
pub fn forecast_for(cascade: &Cascade, fit: &FitResult, t_max: f64) -> Result<ForecastSeries> {
    match &fit.model {
        FittedModel::TwoStage(_) => forecast_cumulative(cascade, fit, t_max),
        FittedModel::Tideh(_) => forecast_tideh(cascade, fit, t_max),
        FittedModel::Rpp(model) => {
            let t_obs = fit.t_obs;
            if !(t_max > t_obs) {
                return Err(Error::Precondition(format!(
                    "t_max = {t_max} must exceed t_obs = {t_obs}"
                )));
            }
            let n_b = bin_count(t_obs, t_max, DEFAULT_BIN_WIDTH);
            let horizons: Vec<f64> = (1..=n_b)
                .map(|k| t_obs + k as f64 * DEFAULT_BIN_WIDTH)
                .collect();
            let r_obs = cascade.posts_through(t_obs) as f64;
            let seed_posts = cascade.posts_through(0.0) as f64;
            let predicted = rpp_predict(model, r_obs, t_obs, &horizons)?;
            Ok(ForecastSeries {
                model_id: "rpp".into(),
                t_obs,
                bin_width: DEFAULT_BIN_WIDTH,
                d_p: cascade.mean_followers(t_obs),
                bins: horizons
                    .iter()
                    .zip(predicted)
                    .map(|(&t_end, r)| ForecastBin {
                        t_end,
                        cumulative: (r - seed_posts).max(0.0),
                    })
                    .collect(),
            })
        }
    }
}

pub(crate) fn bin_count(t_obs: f64, t_max: f64, width: f64) -> usize {
    (((t_max - t_obs) / width) + 1e-9).floor().max(0.0) as usize
}

fn build_series<G>(
    model_id: &str,
    cascade: &Cascade,
    fit: &FitResult,
    t_max: f64,
    d_p: f64,
    solve: G,
) -> Result<ForecastSeries>
where
    G: Fn(f64, f64) -> Result<IntensityGrid>,
{
    let t_obs = fit.t_obs;
    let width = DEFAULT_BIN_WIDTH;
    let n_b = bin_count(t_obs, t_max, width);
    let n_obs = cascade.reactions_through(t_obs) as f64;
    if n_b == 0 {
        return Ok(ForecastSeries {
            model_id: model_id.into(),
            t_obs,
            bin_width: width,
            d_p,
            bins: Vec::new(),
        });
    }
    // Step chosen to land bin ends exactly on grid nodes.
    let steps_per_bin = (width / DEFAULT_VOLTERRA_STEP).round().max(1.0) as usize;
    let step = width / steps_per_bin as f64;
    let grid_end = t_obs + n_b as f64 * width;
    let grid = solve(grid_end, step)?;

    let mut bins = Vec::with_capacity(n_b);
    let mut cum = 0.0;
    let mut node = 0usize;
    for b in 1..=n_b {
        for _ in 0..steps_per_bin {
            cum += 0.5 * (grid.values[node] + grid.values[node + 1]) * step;
            node += 1;
        }
        bins.push(ForecastBin {
            t_end: t_obs + b as f64 * width,
            cumulative: n_obs + cum,
        });
    }
    Ok(ForecastSeries {
        model_id: model_id.into(),
        t_obs,
        bin_width: width,
        d_p,
        bins,
    })
}

/// Relative step-halving error of the second-stage solution: solutions at
/// `step` and `step / 4` compared in time-averaged L1 on the coarse nodes.
pub fn stage2_refinement_error(
    cascade: &Cascade,
    fit: &FitResult,
    t_end: f64,
    step: f64,
) -> Result<f64> {
    let d_p = cascade.mean_followers(fit.t_obs);
    let coarse = stage2_solution(cascade, fit, d_p, t_end, step)?;
    let fine = stage2_solution(cascade, fit, d_p, t_end, step / 4.0)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, v) in coarse.values.iter().enumerate() {
        let f = fine.values[i * 4];
        num += (v - f).abs();
        den += f.abs();
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// Back-substitution residual of a solved second-stage grid, measured with
/// composite Simpson weights (a different rule than the solver's
/// trapezoid, so discretization error shows up instead of cancelling).
/// Returns the maximum residual relative to the solution's sup-norm,
/// evaluated at even nodes.
pub fn stage2_residual(cascade: &Cascade, fit: &FitResult, t_end: f64, step: f64) -> Result<f64> {
    let p = *two_stage_fit_parts(fit)?;
    let t_obs = fit.t_obs;
    let d_p = cascade.mean_followers(t_obs);
    let grid = stage2_solution(cascade, fit, d_p, t_end, step)?;
    let k = KernelParams::default();
    let circ = p.circadian;
    let sources = sources_between(cascade, p.tc, t_obs);
    let forcing = |t: f64| {
        let mem: f64 = sources
            .iter()
            .map(|&(ti, d)| d * k.density_unchecked(t - ti))
            .sum();
        infection_rate(t, p.a2, p.tau2, p.tc, &circ) * mem
    };
    let sup = grid
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let mut worst = 0.0f64;
    for i in (2..grid.values.len()).step_by(2) {
        let t = t_obs + i as f64 * step;
        // Simpson over the i (even) intervals.
        let mut integral = 0.0;
        for j in (0..i).step_by(2) {
            let s0 = t_obs + j as f64 * step;
            let s1 = s0 + step;
            let s2 = s1 + step;
            integral += step / 3.0
                * (k.density_unchecked(t - s0) * grid.values[j]
                    + 4.0 * k.density_unchecked(t - s1) * grid.values[j + 1]
                    + k.density_unchecked(t - s2) * grid.values[j + 2]);
        }
        let rhs = forcing(t) + d_p * infection_rate(t, p.a2, p.tau2, p.tc, &circ) * integral;
        worst = worst.max((grid.values[i] - rhs).abs() / sup);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::FitResult;
    use crate::model::{CircadianParams, Event};

    fn circ() -> CircadianParams {
        CircadianParams::new(0.3, 2.0).unwrap()
    }

    fn fitted(params: TwoStageParams, t_obs: f64) -> FitResult {
        FitResult::new(FittedModel::TwoStage(params), -1.0, 10, t_obs)
    }

    fn busy_cascade() -> Cascade {
        let mut events = vec![Event::new(0.0, 900)];
        let mut t = 0.0;
        for i in 0..180 {
            t += 0.07 + 0.05 * ((i % 9) as f64);
            events.push(Event::new(t, 80 + (i % 3) as u64 * 40));
        }
        Cascade::new("busy", events, 60.0).unwrap()
    }

    #[test]
    fn stage1_empty_cascade_is_zero() {
        let c = Cascade::new("empty", vec![], 40.0).unwrap();
        let p = TwoStageParams::new(0.001, 12.0, 0.002, 16.0, circ(), 8.0).unwrap();
        let fit = fitted(p, 30.0);
        assert_eq!(forecast_intensity_stage1(35.0, &c, &fit).unwrap(), 0.0);
    }

    #[test]
    fn stage1_single_source_is_hand_checkable() {
        let k = KernelParams::default();
        let c = Cascade::new("seed", vec![Event::new(0.0, 250)], 40.0).unwrap();
        let p = TwoStageParams::new(0.001, 14.0, 0.002, 16.0, circ(), 8.0).unwrap();
        let fit = fitted(p, 30.0);
        let t = 33.0;
        let expected =
            infection_rate(t, p.a1, p.tau1, 0.0, &p.circadian) * 250.0 * k.density(t).unwrap();
        let got = forecast_intensity_stage1(t, &c, &fit).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn stage1_slow_decay_tracks_kernel_shape() {
        let k = KernelParams::default();
        let c = Cascade::new("seed", vec![Event::new(0.0, 100)], 200.0).unwrap();
        let p = TwoStageParams::new(
            0.001,
            1e9,
            0.0001,
            16.0,
            CircadianParams::flat(),
            8.0,
        )
        .unwrap();
        let fit = fitted(p, 30.0);
        let ratio_a = forecast_intensity_stage1(40.0, &c, &fit).unwrap()
            / k.density(40.0).unwrap();
        let ratio_b = forecast_intensity_stage1(90.0, &c, &fit).unwrap()
            / k.density(90.0).unwrap();
        assert!((ratio_a - ratio_b).abs() <= 1e-6 * ratio_a);
    }

    #[test]
    fn stage2_without_post_correction_events_is_identically_zero() {
        // All observed events sit before tc, so the forcing vanishes and
        // zero is the unique solution of the homogeneous forward equation.
        let c = Cascade::new(
            "pre-only",
            vec![Event::new(0.0, 500), Event::new(1.0, 50), Event::new(2.0, 40)],
            60.0,
        )
        .unwrap();
        let p = TwoStageParams::new(0.001, 12.0, 0.003, 16.0, circ(), 10.0).unwrap();
        let fit = fitted(p, 30.0);
        let grid = stage2_solution(&c, &fit, 200.0, 54.0, 0.05).unwrap();
        assert!(grid.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stage2_refinement_converges() {
        let c = busy_cascade();
        let p = TwoStageParams::new(0.0008, 12.0, 0.002, 16.0, circ(), 7.0).unwrap();
        let fit = fitted(p, 20.0);
        let err = stage2_refinement_error(&c, &fit, 44.0, DEFAULT_VOLTERRA_STEP).unwrap();
        assert!(err < 0.005, "refinement error {err}");
    }

    #[test]
    fn stage2_residual_is_small() {
        let c = busy_cascade();
        let p = TwoStageParams::new(0.0008, 12.0, 0.002, 16.0, circ(), 7.0).unwrap();
        let fit = fitted(p, 20.0);
        let res = stage2_residual(&c, &fit, 44.0, DEFAULT_VOLTERRA_STEP).unwrap();
        assert!(res < 1e-3, "residual {res}");
    }

    #[test]
    fn stage2_is_linear_in_the_forcing_marks() {
        // Scaling every post-correction mark scales the full solution:
        // the equation is linear in lambda2 and f scales with the marks
        // while d_p is held fixed here.
        let p = TwoStageParams::new(0.0008, 12.0, 0.002, 16.0, circ(), 5.0).unwrap();
        let mk = |scale: u64| {
            let mut events = vec![Event::new(0.0, 500)];
            for i in 0..30 {
                events.push(Event::new(6.0 + 0.4 * i as f64, 20 * scale));
            }
            Cascade::new("lin", events, 60.0).unwrap()
        };
        let fit = fitted(p, 20.0);
        let base = stage2_solution(&mk(1), &fit, 150.0, 40.0, 0.05).unwrap();
        let scaled = stage2_solution(&mk(3), &fit, 150.0, 40.0, 0.05).unwrap();
        for (a, b) in base.values.iter().zip(&scaled.values) {
            if *a > 1e-12 {
                assert!((b / a - 3.0).abs() < 1e-9, "{b} vs 3 x {a}");
            }
        }
    }

    #[test]
    fn cumulative_forecast_is_flat_when_silent() {
        let c = Cascade::new(
            "flat",
            vec![Event::new(0.0, 100), Event::new(1.0, 5), Event::new(2.0, 5)],
            60.0,
        )
        .unwrap();
        let p = TwoStageParams::new(0.0, 12.0, 0.0, 16.0, circ(), 5.0).unwrap();
        let fit = fitted(p, 20.0);
        let series = forecast_cumulative(&c, &fit, 44.0).unwrap();
        assert_eq!(series.bins.len(), 24);
        for b in &series.bins {
            assert_eq!(b.cumulative, 2.0); // N(t_obs): two reactions
        }
    }

    #[test]
    fn cumulative_forecast_is_monotone() {
        let c = busy_cascade();
        let p = TwoStageParams::new(0.0008, 12.0, 0.002, 16.0, circ(), 7.0).unwrap();
        let fit = fitted(p, 20.0);
        let series = forecast_cumulative(&c, &fit, 50.0).unwrap();
        assert!(!series.bins.is_empty());
        assert!(series.bins[0].t_end > fit.t_obs);
        let mut prev = 0.0;
        for b in &series.bins {
            assert!(b.cumulative >= prev - 1e-12);
            prev = b.cumulative;
        }
    }

    #[test]
    fn tideh_forecast_on_empty_suffix_is_flat() {
        let c = Cascade::new("empty", vec![], 40.0).unwrap();
        let p = TiDeHParams::new(0.001, 12.0, circ()).unwrap();
        let fit = FitResult::new(FittedModel::Tideh(p), -1.0, 0, 20.0);
        let series = forecast_tideh(&c, &fit, 40.0).unwrap();
        for b in &series.bins {
            assert_eq!(b.cumulative, 0.0);
        }
    }

    #[test]
    fn embedded_two_stage_forecast_matches_tideh_forecast() {
        // Modest marks keep the printed feedback asymmetry (only the
        // second-stage intensity feeds back) well inside the solver
        // tolerance.
        let mut events = vec![Event::new(0.0, 60)];
        for i in 0..160 {
            events.push(Event::new(0.1 + 0.17 * i as f64, 25));
        }
        let c = Cascade::new("embed", events, 60.0).unwrap();
        let single = TiDeHParams::new(0.0012, 18.0, circ()).unwrap();
        let tc = 6.0;
        let embedded = crate::model::tideh_embedding(&single, tc).unwrap();
        let t_obs = 30.0;
        let fit_one = FitResult::new(FittedModel::Tideh(single), -1.0, 10, t_obs);
        let fit_two = FitResult::new(FittedModel::TwoStage(embedded), -1.0, 10, t_obs);
        let a = forecast_tideh(&c, &fit_one, 54.0).unwrap();
        let b = forecast_cumulative(&c, &fit_two, 54.0).unwrap();
        for (x, y) in a.bins.iter().zip(&b.bins) {
            let rel = (x.cumulative - y.cumulative).abs() / x.cumulative.max(1.0);
            assert!(rel < 0.005, "bin {}: {} vs {}", x.t_end, x.cumulative, y.cumulative);
        }
    }

    #[test]
    fn tc_outside_window_is_rejected() {
        let c = busy_cascade();
        let p = TwoStageParams::new(0.001, 12.0, 0.002, 16.0, circ(), 25.0).unwrap();
        let fit = fitted(p, 20.0);
        assert!(forecast_cumulative(&c, &fit, 40.0).is_err());
    }
}
