//! Core model types and pure intensity evaluations.
//!
//! An information cascade is modeled as a marked point process whose
//! intensity is the product of a time-varying infection rate and a memory
//! sum over past posts. The two-stage variant splits the history at a
//! correction time `tc`:
//!
//! ```text
//! lambda(t) = p1(t) h1(t) + p2(t) h2(t)
//!
//! p1(t) = a1 {1 + r sin(2 pi (t + theta0) / Tm)} exp(-t / tau1)
//! p2(t) = a2 {1 + r sin(2 pi (t + theta0) / Tm)} exp(-(t - tc) / tau2)
//! h1(t) = sum over events with t_i < min(t, tc) of d_i phi(t - t_i)
//! h2(t) = sum over events with tc < t_i < t   of d_i phi(t - t_i)
//! ```
//!
//! where `phi` is a heavy-tailed reaction-delay kernel (constant up to
//! `s0`, power-law beyond) and `d_i` is the follower count of post `i`.
//! The single-stage model drops the split: `lambda(t) = p(t) h(t)` with
//! `h` summing every earlier post.
//!
//! Everything in this module is a pure function of immutable inputs and
//! safe to call concurrently. Canonical time unit is hours.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Oscillation period of the daily activity rhythm, in hours.
pub const CIRCADIAN_PERIOD: f64 = 24.0;

/// A single post: time in hours since the original post, and the number of
/// followers of the posting account.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub followers: u64,
}

impl Event {
    pub fn new(time: f64, followers: u64) -> Self {
        Event { time, followers }
    }
}

/// Free-form provenance carried by cascade files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CascadeMeta {
    pub title: Option<String>,
    pub origin_date: Option<String>,
    pub source: Option<String>,
}

/// An ordered marked event sequence for one news item.
///
/// The original post is the first event, at time 0; its follower count is
/// exposed through [`Cascade::origin_followers`]. Event times are
/// non-decreasing and within `[0, t_max]`. The simulator always produces
/// strictly increasing times; loaded files may contain duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub id: String,
    pub events: Vec<Event>,
    /// End of the total record, hours.
    pub t_max: f64,
    #[serde(default)]
    pub meta: CascadeMeta,
}

impl Cascade {
    /// Build a validated cascade. Events must be sorted (ties allowed),
    /// non-negative in time and mark, and within `[0, t_max]`.
    pub fn new(id: impl Into<String>, events: Vec<Event>, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::invalid("t_max", format!("{t_max} (want finite > 0)")));
        }
        for (i, e) in events.iter().enumerate() {
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(Error::invalid(
                    "event time",
                    format!("event {i} at t = {}", e.time),
                ));
            }
            if e.time > t_max {
                return Err(Error::invalid(
                    "event time",
                    format!("event {i} at t = {} exceeds t_max = {t_max}", e.time),
                ));
            }
            if i > 0 && e.time < events[i - 1].time {
                return Err(Error::invalid(
                    "event order",
                    format!("event {i} at t = {} before its predecessor", e.time),
                ));
            }
        }
        Ok(Cascade {
            id: id.into(),
            events,
            t_max,
            meta: CascadeMeta::default(),
        })
    }

    /// Follower count of the seed post (first event at time 0), if present.
    pub fn origin_followers(&self) -> Option<u64> {
        self.events
            .first()
            .filter(|e| e.time == 0.0)
            .map(|e| e.followers)
    }

    /// Copy of this cascade truncated to events at or before `t_obs`.
    pub fn prefix(&self, t_obs: f64) -> Cascade {
        Cascade {
            id: self.id.clone(),
            events: self
                .events
                .iter()
                .copied()
                .take_while(|e| e.time <= t_obs)
                .collect(),
            t_max: self.t_max.min(t_obs),
            meta: self.meta.clone(),
        }
    }

    /// Number of reaction posts in `(0, t]` (the seed at t = 0 is not a
    /// reaction).
    pub fn reactions_through(&self, t: f64) -> usize {
        self.events
            .iter()
            .filter(|e| e.time > 0.0 && e.time <= t)
            .count()
    }

    /// Total posts in `[0, t]`, seed included.
    pub fn posts_through(&self, t: f64) -> usize {
        self.events.iter().filter(|e| e.time <= t).count()
    }

    /// Mean follower count over events up to `t_obs`, seed included.
    /// This is the `d_p` used by the forecast feedback term.
    pub fn mean_followers(&self, t_obs: f64) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for e in &self.events {
            if e.time > t_obs {
                break;
            }
            sum += e.followers as f64;
            n += 1;
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Reaction-delay kernel constants. The kernel is flat at `c0` up to `s0`
/// and decays as `(s/s0)^-(1+gamma)` beyond, so its total mass
/// `c0 s0 (1 + 1/gamma)` is finite for `gamma > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Plateau height, per hour.
    pub c0: f64,
    /// Plateau length, hours.
    pub s0: f64,
    /// Tail exponent (dimensionless).
    pub gamma: f64,
}

impl KernelParams {
    pub fn new(c0: f64, s0: f64, gamma: f64) -> Result<Self> {
        if !(c0 > 0.0) || !(s0 > 0.0) || !(gamma > 0.0) {
            return Err(Error::invalid(
                "kernel params",
                format!("c0 = {c0}, s0 = {s0}, gamma = {gamma} (all must be > 0)"),
            ));
        }
        Ok(KernelParams { c0, s0, gamma })
    }

    /// Convenience constructor for constants quoted per second.
    pub fn from_seconds(c0_per_sec: f64, s0_sec: f64, gamma: f64) -> Result<Self> {
        Self::new(c0_per_sec * 3600.0, s0_sec / 3600.0, gamma)
    }

    /// Kernel value at delay `s >= 0` hours.
    pub fn density(&self, s: f64) -> Result<f64> {
        if s < 0.0 || s.is_nan() {
            return Err(Error::invalid("kernel delay", format!("s = {s} (want >= 0)")));
        }
        Ok(self.density_unchecked(s))
    }

    #[inline]
    pub(crate) fn density_unchecked(&self, s: f64) -> f64 {
        if s <= self.s0 {
            self.c0
        } else {
            self.c0 * (s / self.s0).powf(-(1.0 + self.gamma))
        }
    }

    /// Closed-form total mass of the kernel.
    pub fn total_mass(&self) -> f64 {
        self.c0 * self.s0 * (1.0 + 1.0 / self.gamma)
    }

    /// Closed-form mass on `[0, x]`.
    pub fn mass_up_to(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x <= self.s0 {
            self.c0 * x
        } else {
            self.c0 * self.s0
                + self.c0 * self.s0 / self.gamma * (1.0 - (x / self.s0).powf(-self.gamma))
        }
    }
}

impl Default for KernelParams {
    /// Production constants, converted from per-second units:
    /// `c0 = 6.94e-4 /s`, `s0 = 300 s`, `gamma = 0.242`.
    fn default() -> Self {
        KernelParams {
            c0: 6.94e-4 * 3600.0,
            s0: 300.0 / 3600.0,
            gamma: 0.242,
        }
    }
}

/// Daily modulation of the infection rate.
///
/// The canonical sign convention is `1 + r sin(...)`; a model written with
/// `1 - r sin(...)` is represented here by negating `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircadianParams {
    /// Relative amplitude, `|r| <= 1`.
    pub r: f64,
    /// Phase offset in hours, normalized into `[0, period)`.
    pub theta0: f64,
    /// Oscillation period in hours; fixed at 24.
    pub t_m: f64,
}

impl CircadianParams {
    pub fn new(r: f64, theta0: f64) -> Result<Self> {
        if !(r.abs() <= 1.0) {
            return Err(Error::invalid("circadian amplitude", format!("r = {r}")));
        }
        if !theta0.is_finite() {
            return Err(Error::invalid("circadian phase", format!("theta0 = {theta0}")));
        }
        Ok(CircadianParams {
            r,
            theta0: theta0.rem_euclid(CIRCADIAN_PERIOD),
            t_m: CIRCADIAN_PERIOD,
        })
    }

    /// No modulation at all.
    pub fn flat() -> Self {
        CircadianParams {
            r: 0.0,
            theta0: 0.0,
            t_m: CIRCADIAN_PERIOD,
        }
    }

    /// Angular frequency `2 pi / period`, per hour.
    #[inline]
    pub fn omega(&self) -> f64 {
        std::f64::consts::TAU / self.t_m
    }

    /// Modulation factor `1 + r sin(omega (t + theta0))`.
    #[inline]
    pub fn modulation(&self, t: f64) -> f64 {
        1.0 + self.r * (self.omega() * (t + self.theta0)).sin()
    }
}

/// Parameters of the two-stage model: per-stage amplitude and decay,
/// shared circadian modulation, and the correction time `tc` splitting the
/// history. Setting `a2 = 0` (or pushing `tc` past the observation window)
/// degenerates to the single-stage model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStageParams {
    pub a1: f64,
    pub tau1: f64,
    pub a2: f64,
    pub tau2: f64,
    pub circadian: CircadianParams,
    pub tc: f64,
}

impl TwoStageParams {
    /// Validated constructor. `a1 = 0` is accepted as the degenerate
    /// "nothing ever spreads" model so that null configurations can be
    /// simulated; fitted results always carry `a1 > 0`.
    pub fn new(
        a1: f64,
        tau1: f64,
        a2: f64,
        tau2: f64,
        circadian: CircadianParams,
        tc: f64,
    ) -> Result<Self> {
        if !(a1 >= 0.0) || !(a2 >= 0.0) {
            return Err(Error::invalid(
                "stage amplitudes",
                format!("a1 = {a1}, a2 = {a2} (want >= 0)"),
            ));
        }
        if !(tau1 > 0.0) || !(tau2 > 0.0) {
            return Err(Error::invalid(
                "decay constants",
                format!("tau1 = {tau1}, tau2 = {tau2} (want > 0)"),
            ));
        }
        if !(tc > 0.0) {
            return Err(Error::invalid("correction time", format!("tc = {tc}")));
        }
        Ok(TwoStageParams {
            a1,
            tau1,
            a2,
            tau2,
            circadian,
            tc,
        })
    }
}

/// Parameters of the single-stage model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiDeHParams {
    pub a: f64,
    pub tau: f64,
    pub circadian: CircadianParams,
}

impl TiDeHParams {
    pub fn new(a: f64, tau: f64, circadian: CircadianParams) -> Result<Self> {
        if !(a >= 0.0) {
            return Err(Error::invalid("amplitude", format!("a = {a}")));
        }
        if !(tau > 0.0) {
            return Err(Error::invalid("decay constant", format!("tau = {tau}")));
        }
        Ok(TiDeHParams { a, tau, circadian })
    }
}

/// Which side of the correction time a memory sum collects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Events with `t_i < min(t, cutoff)`.
    First,
    /// Events with `cutoff < t_i < t`.
    Second,
}

/// Infection rate `a {1 + r sin(2 pi (t + theta0) / Tm)} exp(-(t - onset) / tau)`.
///
/// Stage 1 uses `onset = 0`, stage 2 uses `onset = tc`.
#[inline]
pub fn infection_rate(t: f64, a: f64, tau: f64, onset: f64, c: &CircadianParams) -> f64 {
    a * c.modulation(t) * (-(t - onset) / tau).exp()
}

/// Memory sum `sum d_i phi(t - t_i)` over the events selected by `stage`
/// relative to `cutoff`. Empty sums return 0. An event exactly at the
/// cutoff belongs to neither stage.
pub fn memory(t: f64, cascade: &Cascade, cutoff: f64, stage: Stage, k: &KernelParams) -> f64 {
    memory_slice(t, &cascade.events, cutoff, stage, k)
}

pub(crate) fn memory_slice(
    t: f64,
    events: &[Event],
    cutoff: f64,
    stage: Stage,
    k: &KernelParams,
) -> f64 {
    debug_assert!(t >= 0.0);
    let mut sum = 0.0;
    for e in events {
        if e.time >= t {
            break;
        }
        let selected = match stage {
            Stage::First => e.time < cutoff,
            Stage::Second => e.time > cutoff,
        };
        if selected {
            sum += e.followers as f64 * k.density_unchecked(t - e.time);
        }
    }
    sum
}

/// Two-stage intensity `p1(t) h1(t) + p2(t) h2(t)`.
pub fn intensity_two_stage(
    t: f64,
    cascade: &Cascade,
    p: &TwoStageParams,
    k: &KernelParams,
) -> f64 {
    intensity_two_stage_slice(t, &cascade.events, p, k)
}

pub(crate) fn intensity_two_stage_slice(
    t: f64,
    events: &[Event],
    p: &TwoStageParams,
    k: &KernelParams,
) -> f64 {
    let h1 = memory_slice(t, events, p.tc, Stage::First, k);
    let mut lambda = infection_rate(t, p.a1, p.tau1, 0.0, &p.circadian) * h1;
    if p.a2 > 0.0 {
        let h2 = memory_slice(t, events, p.tc, Stage::Second, k);
        if h2 > 0.0 {
            lambda += infection_rate(t, p.a2, p.tau2, p.tc, &p.circadian) * h2;
        }
    }
    lambda
}

/// Single-stage intensity `p(t) h(t)` with `h` summing every earlier post.
pub fn intensity_tideh(t: f64, cascade: &Cascade, p: &TiDeHParams, k: &KernelParams) -> f64 {
    infection_rate(t, p.a, p.tau, 0.0, &p.circadian)
        * memory(t, cascade, f64::INFINITY, Stage::First, k)
}

/// Embed a single-stage model into the two-stage parameter space so that
/// the intensities agree pointwise for any history.
///
/// Uses the continuity convention `a2 = a1 exp(-tc / tau)` with
/// `tau1 = tau2 = tau`: the second-stage rate picks up exactly where the
/// first-stage rate sits at the boundary, so
/// `p2(t) = a1 exp(-tc/tau) exp(-(t-tc)/tau) (...) = p1(t)` for all `t`
/// and the stage split becomes invisible. (The inverted relation
/// `a1 = a2 exp(-tc / tau)` would leave a jump of `exp(2 tc / tau)` in the
/// combined rate at `tc` and does not reproduce the single-stage model.)
pub fn tideh_embedding(p: &TiDeHParams, tc: f64) -> Result<TwoStageParams> {
    if !(tc > 0.0) {
        return Err(Error::invalid("correction time", format!("tc = {tc}")));
    }
    TwoStageParams::new(
        p.a,
        p.tau,
        p.a * (-tc / p.tau).exp(),
        p.tau,
        p.circadian,
        tc,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, rel: f64) {
        let scale = a.abs().max(b.abs()).max(1e-300);
        assert!(
            (a - b).abs() <= rel * scale,
            "expected {a} ~ {b} within rel {rel}"
        );
    }

    fn defaults() -> KernelParams {
        KernelParams::default()
    }

    #[test]
    fn kernel_plateau_value_matches_unit_conversion() {
        // 6.94e-4 per second is 2.4984 per hour.
        let k = defaults();
        assert_close(k.density(0.0).unwrap(), 2.4984, 1e-12);
    }

    #[test]
    fn kernel_continuous_at_plateau_edge() {
        let k = defaults();
        let at_edge = k.density(k.s0).unwrap();
        assert_close(at_edge, 2.4984, 1e-12);
        assert_close(k.density(k.s0 * (1.0 + 1e-12)).unwrap(), at_edge, 1e-9);
    }

    #[test]
    fn kernel_tail_power_law() {
        // 3000 seconds = 5/6 h: value is c0 * 10^-(1+gamma).
        let k = defaults();
        let expected = 2.4984 * 10f64.powf(-1.242);
        assert_close(k.density(5.0 / 6.0).unwrap(), expected, 1e-12);
        assert!((expected - 0.1431).abs() < 1e-4);
    }

    #[test]
    fn kernel_rejects_negative_delay() {
        assert!(defaults().density(-1e-9).is_err());
    }

    #[test]
    fn kernel_total_mass_closed_form() {
        let k = defaults();
        assert_close(k.total_mass(), 1.0685, 1e-3);
        // The tail index is shallow, so convergence to the total mass is
        // slow; probe far out.
        assert_close(k.mass_up_to(1e38), k.total_mass(), 1e-9);
    }

    #[test]
    fn infection_rate_pure_decay() {
        let c = CircadianParams::flat();
        let got = infection_rate(12.0, 0.0006, 12.0, 0.0, &c);
        assert_close(got, 0.0006 * (-1.0f64).exp(), 1e-12);
        assert!((got - 2.2073e-4).abs() < 1e-8);
    }

    #[test]
    fn infection_rate_at_onset_is_amplitude() {
        let c = CircadianParams::flat();
        assert_close(infection_rate(5.0, 0.3, 7.0, 5.0, &c), 0.3, 1e-15);
        // sin(0) = 0 regardless of r.
        let c = CircadianParams::new(0.8, 0.0).unwrap();
        assert_close(infection_rate(0.0, 0.3, 7.0, 0.0, &c), 0.3, 1e-15);
    }

    #[test]
    fn memory_empty_history_is_zero() {
        let c = Cascade::new("m", vec![Event::new(3.0, 5)], 10.0).unwrap();
        assert_eq!(memory(2.0, &c, f64::INFINITY, Stage::First, &defaults()), 0.0);
        assert_eq!(memory(2.0, &c, 1.0, Stage::Second, &defaults()), 0.0);
    }

    #[test]
    fn memory_single_event_reduces_to_kernel() {
        let k = defaults();
        let c = Cascade::new("m", vec![Event::new(0.0, 1)], 10.0).unwrap();
        let got = memory(0.05, &c, f64::INFINITY, Stage::First, &k);
        assert_close(got, k.density(0.05).unwrap(), 1e-15);
        assert_close(got, 2.4984, 1e-12);
    }

    #[test]
    fn memory_cutoff_excludes_later_events() {
        let k = defaults();
        let c = Cascade::new(
            "m",
            vec![Event::new(0.0, 2), Event::new(1.0, 3)],
            10.0,
        )
        .unwrap();
        let got = memory(2.0, &c, 0.5, Stage::First, &k);
        assert_close(got, 2.0 * k.density(2.0).unwrap(), 1e-15);
        let second = memory(2.0, &c, 0.5, Stage::Second, &k);
        assert_close(second, 3.0 * k.density(1.0).unwrap(), 1e-15);
    }

    #[test]
    fn intensity_empty_cascade_is_zero() {
        let c = Cascade::new("e", vec![], 10.0).unwrap();
        let p = TwoStageParams::new(
            0.001,
            12.0,
            0.002,
            16.0,
            CircadianParams::new(0.3, 2.0).unwrap(),
            5.0,
        )
        .unwrap();
        for t in [0.0, 1.0, 7.5] {
            assert_eq!(intensity_two_stage(t, &c, &p, &defaults()), 0.0);
        }
        let tp = TiDeHParams::new(0.001, 12.0, CircadianParams::flat()).unwrap();
        assert_eq!(intensity_tideh(3.0, &c, &tp, &defaults()), 0.0);
    }

    #[test]
    fn intensity_second_stage_vanishes_with_zero_amplitude() {
        let k = defaults();
        let circ = CircadianParams::new(0.4, 3.0).unwrap();
        let c = Cascade::new(
            "z",
            vec![Event::new(0.0, 10), Event::new(2.0, 4), Event::new(6.0, 7)],
            24.0,
        )
        .unwrap();
        let p = TwoStageParams::new(0.001, 12.0, 0.0, 16.0, circ, 4.0).unwrap();
        for t in [1.0, 3.0, 5.0, 10.0, 23.0] {
            let lhs = intensity_two_stage(t, &c, &p, &k);
            let rhs = infection_rate(t, p.a1, p.tau1, 0.0, &p.circadian)
                * memory(t, &c, p.tc, Stage::First, &k);
            assert_close(lhs, rhs, 1e-15);
        }
    }

    #[test]
    fn tideh_single_event_slow_decay_tracks_kernel() {
        let k = defaults();
        let c = Cascade::new("s", vec![Event::new(0.0, 1)], 50.0).unwrap();
        let p = TiDeHParams::new(1.0, 1e9, CircadianParams::flat()).unwrap();
        for t in [0.01, 0.5, 3.0, 40.0] {
            assert_close(intensity_tideh(t, &c, &p, &k), k.density(t).unwrap(), 1e-6);
        }
    }

    #[test]
    fn tideh_composition_of_scalar_pieces() {
        let k = defaults();
        let circ = CircadianParams::new(0.25, 4.0).unwrap();
        let p = TiDeHParams::new(0.002, 9.0, circ).unwrap();
        let c = Cascade::new("one", vec![Event::new(0.0, 3)], 10.0).unwrap();
        let t = 1.0;
        let expected = p.a
            * (1.0 + circ.r * (circ.omega() * (t + circ.theta0)).sin())
            * (-t / p.tau).exp()
            * 3.0
            * k.density(t).unwrap();
        assert_close(intensity_tideh(t, &c, &p, &k), expected, 1e-14);
    }

    #[test]
    fn embedding_reproduces_fig_style_values() {
        let p = TiDeHParams::new(0.0024, 16.0, CircadianParams::flat()).unwrap();
        let two = tideh_embedding(&p, 16.0).unwrap();
        assert_close(two.a1, 0.0024, 1e-15);
        assert_close(two.a2, 0.0024 * (-1.0f64).exp(), 1e-15);
        assert!((two.a2 - 8.829e-4).abs() < 1e-6);
        assert_eq!(two.tau1, 16.0);
        assert_eq!(two.tau2, 16.0);
    }

    #[test]
    fn embedding_amplitudes_meet_as_tc_shrinks() {
        let p = TiDeHParams::new(0.01, 8.0, CircadianParams::flat()).unwrap();
        let two = tideh_embedding(&p, 1e-12).unwrap();
        assert_close(two.a2, two.a1, 1e-12);
    }

    #[test]
    fn embedding_matches_tideh_at_random_times() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let k = defaults();
        let circ = CircadianParams::new(-0.45, 7.3).unwrap();
        let p = TiDeHParams::new(0.0031, 14.0, circ).unwrap();
        let tc = 9.0;
        let two = tideh_embedding(&p, tc).unwrap();

        let mut events = vec![Event::new(0.0, 120)];
        let mut t = 0.0;
        for _ in 0..200 {
            t += rng.gen::<f64>() * 0.4;
            events.push(Event::new(t, rng.gen_range(0..50)));
        }
        let cascade = Cascade::new("rand", events, t + 1.0).unwrap();

        for _ in 0..1000 {
            let q = rng.gen::<f64>() * cascade.t_max;
            let a = intensity_two_stage(q, &cascade, &two, &k);
            let b = intensity_tideh(q, &cascade, &p, &k);
            let scale = a.abs().max(b.abs()).max(1e-300);
            assert!(
                (a - b).abs() <= 1e-9 * scale,
                "mismatch at t = {q}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn circadian_phase_wraps() {
        let c = CircadianParams::new(0.2, -1.0).unwrap();
        assert_close(c.theta0, 23.0, 1e-12);
        let c = CircadianParams::new(0.2, 49.0).unwrap();
        assert_close(c.theta0, 1.0, 1e-12);
    }

    #[test]
    fn cascade_validation_catches_bad_input() {
        assert!(Cascade::new("x", vec![Event::new(-0.1, 1)], 10.0).is_err());
        assert!(Cascade::new("x", vec![Event::new(11.0, 1)], 10.0).is_err());
        assert!(
            Cascade::new("x", vec![Event::new(2.0, 1), Event::new(1.0, 1)], 10.0).is_err()
        );
        assert!(Cascade::new("x", vec![], 0.0).is_err());
        // Ties are allowed.
        assert!(
            Cascade::new("x", vec![Event::new(1.0, 1), Event::new(1.0, 2)], 10.0).is_ok()
        );
    }

    #[test]
    fn prefix_and_counts() {
        let c = Cascade::new(
            "p",
            vec![
                Event::new(0.0, 100),
                Event::new(0.5, 1),
                Event::new(2.0, 2),
                Event::new(9.0, 3),
            ],
            12.0,
        )
        .unwrap();
        let pre = c.prefix(2.0);
        assert_eq!(pre.events.len(), 3);
        assert_eq!(pre.t_max, 2.0);
        assert_eq!(c.reactions_through(2.0), 2);
        assert_eq!(c.posts_through(2.0), 3);
        assert_eq!(c.origin_followers(), Some(100));
        assert_close(c.mean_followers(2.0), (100.0 + 1.0 + 2.0) / 3.0, 1e-15);
    }
}
