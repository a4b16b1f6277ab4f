//! Maximum-likelihood fitting of the two-stage and single-stage models.
//!
//! The log-likelihood of an observed prefix is
//!
//! ```text
//! l = sum_i log lambda(t_i) - integral of lambda over [0, T_obs]
//! ```
//!
//! The integral decomposes into per-event terms
//! `d_j * integral of p(s) phi(s - t_j) over [t_j, T_obs]`; the reference
//! path evaluates each term with adaptive quadrature split at the kernel
//! plateau edge, while the fitting path shares cumulative kernel-moment
//! tables across events (see [`crate::quad::KernelMomentTable`]) and
//! carries analytic gradients.
//!
//! Fitting is a profile strategy: at fixed correction time `tc`, the six
//! remaining parameters are optimized with BFGS in a transformed space
//! (log amplitudes, decay constants squashed into their bounds on the log
//! scale, `r = tanh`, free phase); the profile likelihood over `tc` is
//! maximized by a coarse grid followed by Brent refinement.

use serde::{Deserialize, Serialize};

use crate::baselines::RppModel;
use crate::error::{Error, Result};
use crate::model::{
    infection_rate, intensity_two_stage, Cascade, CircadianParams, KernelParams, TiDeHParams,
    TwoStageParams,
};
use crate::optim::{bfgs_min, brent_min};
use crate::quad::{adaptive_simpson, KernelMomentTable};

/// Default quadrature tolerance for likelihood integrals.
pub const DEFAULT_QUAD_TOL: f64 = 1e-9;

/// Fitting configuration. Bounds default to the standard windows relative
/// to the observation time: decay constants in `(12, 2 T_obs)` hours and
/// the correction time in `(0.1 T_obs, 0.9 T_obs)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    /// End of the observation window, hours.
    pub t_obs: f64,
    /// Bounds for tau1/tau2 (hours).
    pub tau_bounds: (f64, f64),
    /// Bounds for the correction time (hours).
    pub tc_bounds: (f64, f64),
    /// Coarse grid size for seeding the Brent refinement over tc.
    pub tc_grid_points: usize,
    /// Number of optimization starts per tc.
    pub restarts: usize,
    /// Relative tolerance for likelihood integrals.
    pub quad_tol: f64,
    /// Gradient-norm tolerance (transformed space) for the inner optimizer.
    pub convergence_tol: f64,
    /// Minimum number of reaction events required in the window.
    pub min_events: usize,
    /// Iteration cap for the inner optimizer.
    pub max_iterations: usize,
}

impl FitConfig {
    pub fn new(t_obs: f64) -> Result<Self> {
        let cfg = FitConfig {
            t_obs,
            tau_bounds: (12.0, 2.0 * t_obs),
            tc_bounds: (0.1 * t_obs, 0.9 * t_obs),
            tc_grid_points: 9,
            restarts: 3,
            quad_tol: DEFAULT_QUAD_TOL,
            convergence_tol: 1e-3,
            min_events: 30,
            max_iterations: 150,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_obs > 0.0) {
            return Err(Error::invalid("t_obs", format!("{}", self.t_obs)));
        }
        let (lo, hi) = self.tc_bounds;
        if !(0.0 < lo && lo < hi && hi < self.t_obs) {
            return Err(Error::invalid(
                "tc bounds",
                format!("({lo}, {hi}) for t_obs = {}", self.t_obs),
            ));
        }
        if !(self.tau_bounds.0 > 0.0 && self.tau_bounds.0 < self.tau_bounds.1) {
            return Err(Error::invalid(
                "tau bounds",
                format!("{:?}", self.tau_bounds),
            ));
        }
        if self.tc_grid_points < 1 || self.restarts < 1 {
            return Err(Error::invalid(
                "fit config",
                "tc_grid_points and restarts must be >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Fitted parameters, tagged by model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum FittedModel {
    #[serde(rename = "two-stage")]
    TwoStage(TwoStageParams),
    #[serde(rename = "tideh")]
    Tideh(TiDeHParams),
    #[serde(rename = "rpp")]
    Rpp(RppModel),
}

impl FittedModel {
    /// Number of free parameters, for information criteria.
    pub fn n_params(&self) -> usize {
        match self {
            FittedModel::TwoStage(_) => 7,
            FittedModel::Tideh(_) => 4,
            FittedModel::Rpp(_) => 3,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            FittedModel::TwoStage(_) => "two-stage",
            FittedModel::Tideh(_) => "tideh",
            FittedModel::Rpp(_) => "rpp",
        }
    }
}

/// One point of the profile-likelihood curve over tc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub tc: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub restarts_used: usize,
    /// Profile likelihood over tc (grid and refinement probes), sorted by tc.
    pub tc_profile: Vec<ProfilePoint>,
}

/// Result of a maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub model: FittedModel,
    pub loglik: f64,
    pub n_events_used: usize,
    /// `2 k - 2 loglik` with `k` the number of free parameters.
    pub aic: f64,
    pub t_obs: f64,
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    pub fn new(model: FittedModel, loglik: f64, n_events_used: usize, t_obs: f64) -> Self {
        let aic = 2.0 * model.n_params() as f64 - 2.0 * loglik;
        FitResult {
            model,
            loglik,
            n_events_used,
            aic,
            t_obs,
            diagnostics: FitDiagnostics::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Likelihood evaluation
// ---------------------------------------------------------------------------

/// Natural-space parameter vector used by the likelihood engine.
#[derive(Debug, Clone, Copy)]
struct NatParams {
    a1: f64,
    tau1: f64,
    a2: f64,
    tau2: f64,
    r: f64,
    theta0: f64,
}

impl NatParams {
    fn from_two_stage(p: &TwoStageParams) -> Self {
        NatParams {
            a1: p.a1,
            tau1: p.tau1,
            a2: p.a2,
            tau2: p.tau2,
            r: p.circadian.r,
            theta0: p.circadian.theta0,
        }
    }
}

struct CountedEvent {
    t: f64,
    h1: f64,
    h2: f64,
    sin_wt: f64,
    cos_wt: f64,
}

struct SourceEvent {
    t: f64,
    d: f64,
    /// Remaining window `t_obs - t`.
    x: f64,
    sin_wt: f64,
    cos_wt: f64,
}

/// Event data preprocessed for one `(cascade prefix, tc)` pair. Memory
/// values at event times do not depend on the continuous parameters, so
/// they are computed once here.
struct TcContext {
    t_obs: f64,
    tc: f64,
    omega: f64,
    counted: Vec<CountedEvent>,
    src1: Vec<SourceEvent>,
    src2: Vec<SourceEvent>,
}

impl TcContext {
    fn build(events: &[(f64, f64)], h_all: &[f64], t_obs: f64, tc: f64, k: &KernelParams) -> Self {
        let omega = std::f64::consts::TAU / crate::model::CIRCADIAN_PERIOD;
        let n = events.len();

        let mut counted = Vec::with_capacity(n);
        for i in 0..n {
            let (t, _) = events[i];
            if t <= 0.0 || t > t_obs {
                continue;
            }
            // Events with no strict predecessor have zero intensity under
            // any parameters and stay out of the log-sum.
            if events[..i].iter().all(|&(tj, _)| tj >= t) {
                continue;
            }
            let (h1, h2) = if t <= tc {
                (h_all[i], 0.0)
            } else {
                let mut h1 = 0.0;
                let mut at_tc = 0.0;
                for &(tj, dj) in &events[..i] {
                    if tj < tc {
                        h1 += dj * k.density_unchecked(t - tj);
                    } else if tj == tc {
                        at_tc += dj * k.density_unchecked(t - tj);
                    } else {
                        break;
                    }
                }
                (h1, (h_all[i] - h1 - at_tc).max(0.0))
            };
            counted.push(CountedEvent {
                t,
                h1,
                h2,
                sin_wt: (omega * t).sin(),
                cos_wt: (omega * t).cos(),
            });
        }

        let mut src1 = Vec::new();
        let mut src2 = Vec::new();
        for &(t, d) in events {
            if t > t_obs {
                break;
            }
            let src = SourceEvent {
                t,
                d,
                x: t_obs - t,
                sin_wt: (omega * t).sin(),
                cos_wt: (omega * t).cos(),
            };
            if t < tc {
                src1.push(src);
            } else if t > tc {
                src2.push(src);
            }
        }

        TcContext {
            t_obs,
            tc,
            omega,
            counted,
            src1,
            src2,
        }
    }

    /// Log-likelihood and its gradient with respect to the natural
    /// parameters `(a1, tau1, a2, tau2, r, theta0)`. Returns `None` when
    /// some counted event has non-positive intensity.
    fn eval(&self, p: &NatParams, k: &KernelParams) -> Option<(f64, [f64; 6])> {
        let omega = self.omega;
        let sin_th = (omega * p.theta0).sin();
        let cos_th = (omega * p.theta0).cos();

        let mut ll = 0.0;
        let mut grad = [0.0; 6];

        // Log-sum over counted events.
        for e in &self.counted {
            // sin/cos(omega (t + theta0)) from cached sin/cos(omega t).
            let sin_i = e.sin_wt * cos_th + e.cos_wt * sin_th;
            let cos_i = e.cos_wt * cos_th - e.sin_wt * sin_th;
            let modulation = 1.0 + p.r * sin_i;
            let base1 = (-e.t / p.tau1).exp() * e.h1;
            let base2 = if e.h2 > 0.0 {
                (-(e.t - self.tc) / p.tau2).exp() * e.h2
            } else {
                0.0
            };
            let core = p.a1 * base1 + p.a2 * base2;
            let lambda = modulation * core;
            if !(lambda > 0.0) || !lambda.is_finite() {
                return None;
            }
            ll += lambda.ln();
            let inv = 1.0 / lambda;
            grad[0] += modulation * base1 * inv;
            grad[1] += modulation * p.a1 * base1 * e.t / (p.tau1 * p.tau1) * inv;
            grad[2] += modulation * base2 * inv;
            grad[3] += modulation * p.a2 * base2 * (e.t - self.tc) / (p.tau2 * p.tau2) * inv;
            grad[4] += sin_i * core * inv;
            grad[5] += p.r * omega * cos_i * core * inv;
        }

        // Integral terms via the shared moment tables.
        let table1 = KernelMomentTable::build(k, p.tau1, omega, self.t_obs);
        let (i1, d_a1, d_tau1, d_r1, d_th1) =
            integral_stage(&self.src1, &table1, p.a1, p.tau1, 0.0, p.r, sin_th, cos_th);
        let mut total = i1;
        grad[0] -= d_a1;
        grad[1] -= d_tau1;
        let mut d_r = d_r1;
        let mut d_th = d_th1;

        if !self.src2.is_empty() {
            let table2 = KernelMomentTable::build(k, p.tau2, omega, self.t_obs);
            let (i2, d_a2, d_tau2, d_r2, d_th2) = integral_stage(
                &self.src2, &table2, p.a2, p.tau2, self.tc, p.r, sin_th, cos_th,
            );
            total += i2;
            grad[2] -= d_a2;
            grad[3] -= d_tau2;
            d_r += d_r2;
            d_th += d_th2;
        }
        grad[4] -= d_r;
        grad[5] -= d_th;

        ll -= total;
        if !ll.is_finite() {
            return None;
        }
        Some((ll, grad))
    }
}

/// Stage contribution to the likelihood integral and its derivatives:
/// returns `(I, dI/da, dI/dtau, dI/dr, dI/dtheta0)`.
#[allow(clippy::too_many_arguments)]
fn integral_stage(
    sources: &[SourceEvent],
    table: &KernelMomentTable,
    a: f64,
    tau: f64,
    onset: f64,
    r: f64,
    sin_th: f64,
    cos_th: f64,
) -> (f64, f64, f64, f64, f64) {
    let omega_scale = std::f64::consts::TAU / crate::model::CIRCADIAN_PERIOD;
    let inv_tau2 = 1.0 / (tau * tau);
    let mut w = 0.0; // sum d e^{-(t-onset)/tau} K
    let mut w_r = 0.0; // d/dr of w (per unit r)
    let mut w_th = 0.0; // d/dtheta0 of w (per unit a)
    let mut w_tau = 0.0; // d/dtau of (w) including exp factor
    for s in sources {
        let m = table.query(s.x);
        let sin_j = s.sin_wt * cos_th + s.cos_wt * sin_th;
        let cos_j = s.cos_wt * cos_th - s.sin_wt * sin_th;
        let trig = sin_j * m[1] + cos_j * m[2];
        let kern = m[0] + r * trig;
        let decay = (-(s.t - onset) / tau).exp();
        let dk = s.d * decay;
        w += dk * kern;
        w_r += dk * trig;
        w_th += dk * r * omega_scale * (cos_j * m[1] - sin_j * m[2]);
        let dkern_dtau = inv_tau2 * (m[3] + r * (sin_j * m[4] + cos_j * m[5]));
        w_tau += dk * ((s.t - onset) * inv_tau2 * kern + dkern_dtau);
    }
    (a * w, w, a * w_tau, a * w_r, a * w_th)
}

/// Memory values `h_all[i]` = sum over strictly earlier events of
/// `d_j phi(t_i - t_j)`.
fn all_memory(events: &[(f64, f64)], k: &KernelParams) -> Vec<f64> {
    let n = events.len();
    let mut h = vec![0.0; n];
    for i in 0..n {
        let (t, _) = events[i];
        let mut s = 0.0;
        for &(tj, dj) in &events[..i] {
            if tj < t {
                s += dj * k.density_unchecked(t - tj);
            }
        }
        h[i] = s;
    }
    h
}

fn event_pairs(cascade: &Cascade, t_obs: f64) -> Vec<(f64, f64)> {
    cascade
        .events
        .iter()
        .take_while(|e| e.time <= t_obs)
        .map(|e| (e.time, e.followers as f64))
        .collect()
}

/// Log-likelihood of the two-stage model over `[0, t_obs]`, reference path.
///
/// The log-sum runs over events in `(0, t_obs]` that have at least one
/// strict predecessor (the seed has empty history and zero intensity, so
/// it is conditioned on rather than counted). A non-positive intensity at
/// a counted event yields `-inf`, signaling an inadmissible parameter
/// point. Each per-event integral uses adaptive quadrature split at the
/// kernel plateau edge.
pub fn log_likelihood(
    cascade: &Cascade,
    params: &TwoStageParams,
    k: &KernelParams,
    t_obs: f64,
) -> Result<f64> {
    let prefix = cascade.prefix(t_obs);
    let mut ll = 0.0;
    for (i, e) in prefix.events.iter().enumerate() {
        if e.time <= 0.0 {
            continue;
        }
        if prefix.events[..i].iter().all(|p| p.time >= e.time) {
            continue;
        }
        let lambda = intensity_two_stage(e.time, &prefix, params, k);
        if !(lambda > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        ll += lambda.ln();
    }
    ll -= integral_adaptive(&prefix, params, k, t_obs, DEFAULT_QUAD_TOL)?;
    Ok(ll)
}

/// Compensator `integral of lambda over [0, t_obs]` by per-event adaptive
/// quadrature with breakpoints at each event time and the plateau edge.
fn integral_adaptive(
    prefix: &Cascade,
    params: &TwoStageParams,
    k: &KernelParams,
    t_obs: f64,
    tol: f64,
) -> Result<f64> {
    let circ = params.circadian;
    let mut total = 0.0;
    for e in &prefix.events {
        if e.time > t_obs {
            break;
        }
        let d = e.followers as f64;
        if d == 0.0 {
            continue;
        }
        let (a, tau, onset) = if e.time < params.tc {
            (params.a1, params.tau1, 0.0)
        } else if e.time > params.tc {
            (params.a2, params.tau2, params.tc)
        } else {
            continue; // an event exactly at tc feeds neither stage
        };
        if a == 0.0 {
            continue;
        }
        let x = t_obs - e.time;
        if x <= 0.0 {
            continue;
        }
        let t_j = e.time;
        let f = |u: f64| {
            infection_rate(t_j + u, a, tau, onset, &circ) * k.density_unchecked(u)
        };
        let split = k.s0.min(x);
        let mut term = adaptive_simpson(&f, 0.0, split, tol)?;
        if x > k.s0 {
            term += adaptive_simpson(&f, k.s0, x, tol)?;
        }
        total += d * term;
    }
    Ok(total)
}

/// Log-likelihood and its gradient with respect to
/// `(a1, tau1, a2, tau2, r, theta0)`, computed on the shared-table path
/// used by the fitters.
pub fn log_likelihood_grad(
    cascade: &Cascade,
    params: &TwoStageParams,
    k: &KernelParams,
    t_obs: f64,
) -> Result<(f64, [f64; 6])> {
    let events = event_pairs(cascade, t_obs);
    let h_all = all_memory(&events, k);
    let ctx = TcContext::build(&events, &h_all, t_obs, params.tc, k);
    ctx.eval(&NatParams::from_two_stage(params), k)
        .ok_or_else(|| Error::Numerical("non-positive intensity at a counted event".into()))
}

// ---------------------------------------------------------------------------
// Parameter transforms
// ---------------------------------------------------------------------------

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Decay constants live on a log scale squashed into their bounds; the
/// squashing keeps the optimizer unconstrained while honoring the window.
#[derive(Debug, Clone, Copy)]
struct TauTransform {
    ln_lo: f64,
    span: f64,
}

impl TauTransform {
    fn new(bounds: (f64, f64)) -> Self {
        TauTransform {
            ln_lo: bounds.0.ln(),
            span: bounds.1.ln() - bounds.0.ln(),
        }
    }

    fn to_tau(&self, x: f64) -> f64 {
        (self.ln_lo + self.span * sigmoid(x)).exp()
    }

    /// d tau / d x.
    fn dtau(&self, x: f64) -> f64 {
        let s = sigmoid(x);
        self.to_tau(x) * self.span * s * (1.0 - s)
    }

    fn from_tau(&self, tau: f64) -> f64 {
        let frac = ((tau.ln() - self.ln_lo) / self.span).clamp(1e-4, 1.0 - 1e-4);
        (frac / (1.0 - frac)).ln()
    }
}

const LN_A_CLAMP: f64 = 60.0;

fn nat_from_x(x: &[f64], tt: &TauTransform) -> NatParams {
    NatParams {
        a1: x[0].clamp(-LN_A_CLAMP, LN_A_CLAMP).exp(),
        tau1: tt.to_tau(x[1]),
        a2: x[2].clamp(-LN_A_CLAMP, LN_A_CLAMP).exp(),
        tau2: tt.to_tau(x[3]),
        r: x[4].tanh(),
        theta0: x[5],
    }
}

/// Chain rule from natural-space gradient to transformed coordinates.
fn chain_grad(g: &[f64; 6], x: &[f64], p: &NatParams, tt: &TauTransform) -> Vec<f64> {
    vec![
        g[0] * p.a1,
        g[1] * tt.dtau(x[1]),
        g[2] * p.a2,
        g[3] * tt.dtau(x[3]),
        g[4] * (1.0 - p.r * p.r),
        g[5],
    ]
}

// ---------------------------------------------------------------------------
// Inner optimization at fixed tc
// ---------------------------------------------------------------------------

struct InnerFit {
    nat: NatParams,
    loglik: f64,
    converged: bool,
}

/// Moment-matched starting point: amplitudes from event counts against
/// kernel mass, decay constants from the half-life of the binned reaction
/// rate.
fn moment_init(
    events: &[(f64, f64)],
    ctx: &TcContext,
    k: &KernelParams,
    tau_bounds: (f64, f64),
) -> NatParams {
    let tc = ctx.tc;
    let t_obs = ctx.t_obs;
    let n1 = events
        .iter()
        .filter(|&&(t, _)| t > 0.0 && t < tc.min(t_obs))
        .count() as f64;
    let n2 = events.iter().filter(|&&(t, _)| t > tc && t <= t_obs).count() as f64;
    let denom1: f64 = ctx.src1.iter().map(|s| s.d * k.mass_up_to(s.x)).sum();
    let denom2: f64 = ctx.src2.iter().map(|s| s.d * k.mass_up_to(s.x)).sum();
    let a1 = (n1.max(1.0) / denom1.max(1e-9)).clamp(1e-8, 1e3);
    let a2 = (n2.max(0.5) / denom2.max(1e-9)).clamp(1e-8, 1e3);

    let tau1 = rate_half_life(events, 0.0, tc.min(t_obs)).unwrap_or(t_obs / 3.0);
    let tau2 = rate_half_life(events, tc.min(t_obs), t_obs).unwrap_or(16.0);
    let clamp_tau =
        |t: f64| t.clamp(tau_bounds.0 * 1.02, tau_bounds.1 * 0.98);
    NatParams {
        a1,
        tau1: clamp_tau(tau1),
        a2,
        tau2: clamp_tau(tau2),
        r: 0.2,
        theta0: 0.0,
    }
}

/// Half-life of the hourly-binned reaction rate after its peak, scaled to
/// an exponential decay constant. `None` when the window is too sparse.
fn rate_half_life(events: &[(f64, f64)], from: f64, to: f64) -> Option<f64> {
    if to - from < 2.0 {
        return None;
    }
    let n_bins = ((to - from).ceil() as usize).max(2);
    let mut bins = vec![0usize; n_bins];
    for &(t, _) in events {
        if t > from && t <= to {
            let idx = (((t - from).ceil() as usize).max(1) - 1).min(n_bins - 1);
            bins[idx] += 1;
        }
    }
    let (peak_idx, &peak) = bins.iter().enumerate().max_by_key(|&(_, c)| *c)?;
    if peak < 4 {
        return None;
    }
    for (j, &c) in bins.iter().enumerate().skip(peak_idx + 1) {
        if (c as f64) <= peak as f64 / 2.0 {
            let dt = (j - peak_idx) as f64;
            return Some(dt / std::f64::consts::LN_2);
        }
    }
    None
}

/// Deterministic perturbations applied to the moment start for restarts.
/// The first variant pulls both decay constants toward their lower bound,
/// where fast-aging cascades live; later ones scale the amplitudes.
fn jitter(nat: &NatParams, idx: usize, tau_bounds: (f64, f64)) -> NatParams {
    let clamp_tau = |t: f64| t.clamp(tau_bounds.0 * 1.02, tau_bounds.1 * 0.98);
    if idx == 1 {
        return NatParams {
            a1: nat.a1,
            tau1: clamp_tau(tau_bounds.0 * 1.05),
            a2: nat.a2,
            tau2: clamp_tau(tau_bounds.0 * 1.4),
            r: nat.r,
            theta0: nat.theta0,
        };
    }
    let table: [(f64, f64, f64, f64); 4] = [
        (1.0, 1.0, 1.0, 1.0),
        (std::f64::consts::E, 0.5, std::f64::consts::E, 0.5),
        (1.0 / std::f64::consts::E, 2.0, 1.0 / std::f64::consts::E, 2.0),
        (3.0, 1.0, 1.0 / 3.0, 1.5),
    ];
    let (ja1, jt1, ja2, jt2) = table[idx % table.len()];
    NatParams {
        a1: (nat.a1 * ja1).clamp(1e-9, 1e4),
        tau1: clamp_tau(nat.tau1 * jt1),
        a2: (nat.a2 * ja2).clamp(1e-9, 1e4),
        tau2: clamp_tau(nat.tau2 * jt2),
        r: (nat.r + 0.25 * idx as f64).clamp(-0.8, 0.8),
        theta0: nat.theta0 + 5.0 * idx as f64,
    }
}

fn x_from_nat(nat: &NatParams, tt: &TauTransform) -> Vec<f64> {
    vec![
        nat.a1.max(1e-12).ln(),
        tt.from_tau(nat.tau1),
        nat.a2.max(1e-12).ln(),
        tt.from_tau(nat.tau2),
        nat.r.clamp(-0.999, 0.999).atanh(),
        nat.theta0,
    ]
}

fn inner_fit(
    events: &[(f64, f64)],
    ctx: &TcContext,
    k: &KernelParams,
    cfg: &FitConfig,
    warm: Option<&NatParams>,
    full_restarts: bool,
) -> Option<InnerFit> {
    let tt = TauTransform::new(cfg.tau_bounds);
    let mut starts: Vec<NatParams> = Vec::new();
    let base = moment_init(events, ctx, k, cfg.tau_bounds);
    if let Some(w) = warm {
        starts.push(*w);
    }
    if full_restarts || warm.is_none() {
        for i in 0..cfg.restarts {
            starts.push(jitter(&base, i, cfg.tau_bounds));
        }
    } else {
        starts.push(base);
    }

    let mut best: Option<InnerFit> = None;
    for start in &starts {
        let x0 = x_from_nat(start, &tt);
        let objective = |x: &[f64]| {
            let nat = nat_from_x(x, &tt);
            match ctx.eval(&nat, k) {
                Some((ll, g)) => {
                    let tg = chain_grad(&g, x, &nat, &tt);
                    (-ll, tg.iter().map(|v| -v).collect())
                }
                None => (f64::INFINITY, vec![0.0; 6]),
            }
        };
        let res = bfgs_min(objective, &x0, cfg.convergence_tol, cfg.max_iterations);
        if !res.f.is_finite() {
            continue;
        }
        let cand = InnerFit {
            nat: nat_from_x(&res.x, &tt),
            loglik: -res.f,
            converged: res.converged,
        };
        if best.as_ref().map_or(true, |b| cand.loglik > b.loglik) {
            best = Some(cand);
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Public fitters
// ---------------------------------------------------------------------------

/// Fit the seven-parameter two-stage model by profile likelihood over the
/// correction time.
pub fn fit_two_stage(cascade: &Cascade, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let events = event_pairs(cascade, cfg.t_obs);
    let n_reactions = events.iter().filter(|&&(t, _)| t > 0.0).count();
    if n_reactions < cfg.min_events {
        return Err(Error::Precondition(format!(
            "{} reaction events in (0, {}] but at least {} required",
            n_reactions, cfg.t_obs, cfg.min_events
        )));
    }
    let k = KernelParams::default();
    let h_all = all_memory(&events, &k);

    let (lo, hi) = cfg.tc_bounds;
    let g = cfg.tc_grid_points;
    let grid: Vec<f64> = if g == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..g)
            .map(|i| lo + (hi - lo) * i as f64 / (g - 1) as f64)
            .collect()
    };

    // Sequential scan with warm-start chaining: the best parameters found
    // so far seed the next grid point, which keeps the profile on the
    // dominant mode. Suites parallelize across cascades instead.
    let mut profile: Vec<ProfilePoint> = Vec::new();
    let mut best: Option<(f64, InnerFit)> = None;
    for &tc in &grid {
        let ctx = TcContext::build(&events, &h_all, cfg.t_obs, tc, &k);
        let chain = best.as_ref().map(|(_, b)| b.nat);
        if let Some(f) = inner_fit(&events, &ctx, &k, cfg, chain.as_ref(), true) {
            profile.push(ProfilePoint {
                tc,
                loglik: f.loglik,
            });
            if best.as_ref().map_or(true, |(_, b)| f.loglik > b.loglik) {
                best = Some((tc, f));
            }
        }
    }
    let (mut best_tc, mut best_fit) = best.ok_or_else(|| {
        Error::Numerical("all restarts diverged across the tc grid".into())
    })?;

    // Brent refinement between the grid neighbors of the best point,
    // warm-started from the best inner parameters.
    let idx = grid
        .iter()
        .position(|&t| t == best_tc)
        .unwrap_or(grid.len() / 2);
    let bl = if idx == 0 { lo } else { grid[idx - 1] };
    let bh = if idx + 1 >= grid.len() { hi } else { grid[idx + 1] };
    if bh > bl {
        let warm = best_fit.nat;
        let mut probes: Vec<(f64, InnerFit)> = Vec::new();
        let evaluate = |tc: f64| -> f64 {
            let ctx = TcContext::build(&events, &h_all, cfg.t_obs, tc, &k);
            match inner_fit(&events, &ctx, &k, cfg, Some(&warm), false) {
                Some(f) => {
                    let ll = f.loglik;
                    probes.push((tc, f));
                    -ll
                }
                None => f64::INFINITY,
            }
        };
        brent_min(evaluate, bl, bh, 1e-4, 18);
        for (tc, f) in probes {
            profile.push(ProfilePoint {
                tc,
                loglik: f.loglik,
            });
            if f.loglik > best_fit.loglik {
                best_tc = tc;
                best_fit = f;
            }
        }
    }

    profile.sort_by(|a, b| a.tc.partial_cmp(&b.tc).unwrap());

    let nat = best_fit.nat;
    let circ = CircadianParams::new(nat.r, nat.theta0)?;
    let params = TwoStageParams::new(nat.a1, nat.tau1, nat.a2, nat.tau2, circ, best_tc)?;
    let mut result = FitResult::new(
        FittedModel::TwoStage(params),
        best_fit.loglik,
        count_counted(&events, cfg.t_obs),
        cfg.t_obs,
    );
    result.diagnostics = FitDiagnostics {
        converged: best_fit.converged,
        restarts_used: cfg.restarts,
        tc_profile: profile,
    };
    Ok(result)
}

fn count_counted(events: &[(f64, f64)], t_obs: f64) -> usize {
    events
        .iter()
        .enumerate()
        .filter(|(i, &(t, _))| {
            t > 0.0 && t <= t_obs && events[..*i].iter().any(|&(tj, _)| tj < t)
        })
        .count()
}

/// Fit the four-parameter single-stage model (no correction-time profile).
pub fn fit_tideh(cascade: &Cascade, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let events = event_pairs(cascade, cfg.t_obs);
    let n_reactions = events.iter().filter(|&&(t, _)| t > 0.0).count();
    if n_reactions < cfg.min_events {
        return Err(Error::Precondition(format!(
            "{} reaction events in (0, {}] but at least {} required",
            n_reactions, cfg.t_obs, cfg.min_events
        )));
    }
    let k = KernelParams::default();
    let h_all = all_memory(&events, &k);
    let ctx = TcContext::build(&events, &h_all, cfg.t_obs, f64::INFINITY, &k);

    let tt = TauTransform::new(cfg.tau_bounds);
    let base = moment_init(&events, &ctx, &k, cfg.tau_bounds);
    let mut best: Option<InnerFit> = None;
    for i in 0..cfg.restarts {
        let start = jitter(&base, i, cfg.tau_bounds);
        // Single-stage: optimize (ln a, q(tau), atanh r, theta0).
        let x0 = vec![
            start.a1.max(1e-12).ln(),
            tt.from_tau(start.tau1),
            start.r.clamp(-0.999, 0.999).atanh(),
            start.theta0,
        ];
        let objective = |x: &[f64]| {
            let nat = NatParams {
                a1: x[0].clamp(-LN_A_CLAMP, LN_A_CLAMP).exp(),
                tau1: tt.to_tau(x[1]),
                a2: 0.0,
                tau2: 1.0,
                r: x[2].tanh(),
                theta0: x[3],
            };
            match ctx.eval(&nat, &k) {
                Some((ll, g)) => (
                    -ll,
                    vec![
                        -g[0] * nat.a1,
                        -g[1] * tt.dtau(x[1]),
                        -g[4] * (1.0 - nat.r * nat.r),
                        -g[5],
                    ],
                ),
                None => (f64::INFINITY, vec![0.0; 4]),
            }
        };
        let res = bfgs_min(objective, &x0, cfg.convergence_tol, cfg.max_iterations);
        if !res.f.is_finite() {
            continue;
        }
        let cand = InnerFit {
            nat: NatParams {
                a1: res.x[0].clamp(-LN_A_CLAMP, LN_A_CLAMP).exp(),
                tau1: tt.to_tau(res.x[1]),
                a2: 0.0,
                tau2: 1.0,
                r: res.x[2].tanh(),
                theta0: res.x[3],
            },
            loglik: -res.f,
            converged: res.converged,
        };
        if best.as_ref().map_or(true, |b| cand.loglik > b.loglik) {
            best = Some(cand);
        }
    }
    let best = best.ok_or_else(|| Error::Numerical("all restarts diverged".into()))?;
    let circ = CircadianParams::new(best.nat.r, best.nat.theta0)?;
    let params = TiDeHParams::new(best.nat.a1, best.nat.tau1, circ)?;
    let mut result = FitResult::new(
        FittedModel::Tideh(params),
        best.loglik,
        count_counted(&events, cfg.t_obs),
        cfg.t_obs,
    );
    result.diagnostics = FitDiagnostics {
        converged: best.converged,
        restarts_used: cfg.restarts,
        tc_profile: Vec::new(),
    };
    Ok(result)
}

/// Single-stage log-likelihood on the shared-table path (used by tests and
/// the evaluation harness for AIC re-checks).
pub fn log_likelihood_tideh(
    cascade: &Cascade,
    params: &TiDeHParams,
    k: &KernelParams,
    t_obs: f64,
) -> Result<f64> {
    let events = event_pairs(cascade, t_obs);
    let h_all = all_memory(&events, k);
    let ctx = TcContext::build(&events, &h_all, t_obs, f64::INFINITY, k);
    let nat = NatParams {
        a1: params.a,
        tau1: params.tau,
        a2: 0.0,
        tau2: 1.0,
        r: params.circadian.r,
        theta0: params.circadian.theta0,
    };
    ctx.eval(&nat, k)
        .map(|(ll, _)| ll)
        .ok_or_else(|| Error::Numerical("non-positive intensity at a counted event".into()))
}
