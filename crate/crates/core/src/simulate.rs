//! Synthetic cascade generation by Ogata-style thinning.
//!
//! Between accepted events both memory sums can only decay (the kernel is
//! non-increasing), so on any window with no new events the intensity is
//! dominated by
//!
//! ```text
//! B = max over window of p1 * h1(now) + max over window of p2 * h2(now)
//! ```
//!
//! where the infection-rate maxima account for the circadian oscillation.
//! Windows advance in steps of at most one hour and never across a
//! circadian extremum, which keeps the envelope tight without
//! root-finding. Candidates drawn at rate `B` are accepted with
//! probability `lambda / B`; in debug builds the bound is asserted for
//! every candidate.
//!
//! Runs are deterministic given the seed; suites derive one RNG stream per
//! run index from the shared seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, CascadeSet, Manifest};
use crate::model::{
    infection_rate, intensity_two_stage_slice, Cascade, CircadianParams, Event, KernelParams,
    TwoStageParams,
};

/// How follower counts are drawn for simulated reactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarkModel {
    /// Every reaction has the same follower count.
    Constant { followers: u64 },
    /// Uniform draw from an observed list.
    Empirical { values: Vec<u64> },
    /// Log-normal draw rounded to the nearest integer.
    LogNormal { mu: f64, sigma: f64 },
}

impl MarkModel {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            MarkModel::Constant { followers } => *followers,
            MarkModel::Empirical { values } => values[rng.gen_range(0..values.len())],
            MarkModel::LogNormal { mu, sigma } => {
                let d = rand_distr::LogNormal::new(*mu, *sigma).expect("valid lognormal");
                d.sample(rng).round().max(0.0) as u64
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            MarkModel::Empirical { values } if values.is_empty() => Err(Error::invalid(
                "mark model",
                "empirical mark list is empty".to_string(),
            )),
            MarkModel::LogNormal { sigma, .. } if !(*sigma >= 0.0) => Err(Error::invalid(
                "mark model",
                format!("lognormal sigma = {sigma}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: TwoStageParams,
    pub kernel: KernelParams,
    /// End of the simulated record, hours.
    pub t_end: f64,
    /// Follower count of the seed post.
    pub seed_followers: u64,
    pub mark_model: MarkModel,
    pub rng_seed: u64,
    /// Hard cap guarding against supercritical configurations.
    pub max_events: usize,
}

impl SimConfig {
    /// Defaults: production kernel, unit marks with a thousand-follower
    /// seed, one-million event cap.
    pub fn new(params: TwoStageParams, t_end: f64) -> Self {
        SimConfig {
            params,
            kernel: KernelParams::default(),
            t_end,
            seed_followers: 1000,
            mark_model: MarkModel::Constant { followers: 1 },
            rng_seed: 0,
            max_events: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) {
            return Err(Error::invalid("t_end", format!("{}", self.t_end)));
        }
        if self.max_events == 0 {
            return Err(Error::invalid("max_events", "0".to_string()));
        }
        self.mark_model.validate()
    }
}

/// Simulate one cascade from scratch: a seed event at time 0 followed by
/// thinned reactions on `(0, t_end]`.
pub fn simulate(cfg: &SimConfig) -> Result<Cascade> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let events = vec![Event::new(0.0, cfg.seed_followers)];
    let events = thinning_loop(cfg, events, 0.0, &mut rng)?;
    Cascade::new(format!("sim-{}", cfg.rng_seed), events, cfg.t_end)
}

/// Simulate run `run_index` of a suite: same configuration, independent
/// RNG stream derived from `(rng_seed, run_index)`.
pub fn simulate_run(cfg: &SimConfig, run_index: u64) -> Result<Cascade> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(run_index);
    let events = vec![Event::new(0.0, cfg.seed_followers)];
    let events = thinning_loop(cfg, events, 0.0, &mut rng)?;
    Cascade::new(
        format!("sim-{}-{run_index:03}", cfg.rng_seed),
        events,
        cfg.t_end,
    )
}

/// Continue an observed prefix forward in time: thinning starts at
/// `t_from` with the prefix as history. Used by forecasting oracles.
pub fn simulate_continuation(cfg: &SimConfig, prefix: &Cascade, t_from: f64) -> Result<Cascade> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let events: Vec<Event> = prefix
        .events
        .iter()
        .copied()
        .take_while(|e| e.time <= t_from)
        .collect();
    let events = thinning_loop(cfg, events, t_from, &mut rng)?;
    Cascade::new(format!("{}-cont", prefix.id), events, cfg.t_end)
}

fn thinning_loop(
    cfg: &SimConfig,
    mut events: Vec<Event>,
    t_start: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Event>> {
    let p = &cfg.params;
    let k = &cfg.kernel;
    let mut t = t_start;

    while t < cfg.t_end {
        let window = window_length(&p.circadian, t).min(cfg.t_end - t);
        let bound = envelope(&events, t, window, p, k);
        if !(bound > 0.0) {
            t += window;
            continue;
        }
        let u: f64 = rng.gen();
        let dt = (-(1.0 - u).ln() / bound).max(1e-12);
        if dt > window {
            t += window;
            continue;
        }
        t += dt;
        let lambda = intensity_two_stage_slice(t, &events, p, k);
        debug_assert!(
            lambda <= bound * (1.0 + 1e-9),
            "thinning envelope violated at t = {t}: lambda = {lambda}, bound = {bound}"
        );
        if rng.gen::<f64>() < lambda / bound {
            let mark = cfg.mark_model.sample(rng);
            events.push(Event::new(t, mark));
            if events.len() > cfg.max_events {
                return Err(Error::Runaway {
                    max_events: cfg.max_events,
                    t,
                });
            }
        }
    }
    Ok(events)
}

/// Step length: at most one hour and never across a circadian extremum,
/// so the modulation is monotone inside the window.
fn window_length(circ: &CircadianParams, t: f64) -> f64 {
    let period = circ.t_m;
    let half = period / 2.0;
    // Extrema of sin(omega (t + theta0)) sit at t = period/4 - theta0 + k * period/2.
    let first = period / 4.0 - circ.theta0;
    let k = ((t - first) / half).floor() + 1.0;
    let next = first + k * half;
    let gap = (next - t).max(1e-6);
    gap.min(1.0)
}

/// Largest modulation factor `1 + r sin(...)` on `[t, t + w]`.
fn max_modulation(circ: &CircadianParams, t: f64, w: f64) -> f64 {
    if circ.r == 0.0 {
        return 1.0;
    }
    let mut best = circ.modulation(t).max(circ.modulation(t + w));
    // A maximizing extremum inside the window pushes it to 1 + |r|.
    let period = circ.t_m;
    let quarter = if circ.r > 0.0 {
        period / 4.0
    } else {
        3.0 * period / 4.0
    };
    let first = quarter - circ.theta0;
    let k = ((t - first) / period).ceil();
    let ext = first + k * period;
    if ext >= t && ext <= t + w {
        best = best.max(1.0 + circ.r.abs());
    }
    best
}

/// Intensity envelope on `(t, t + w]` given no new events: decayed memory
/// values times per-stage infection-rate maxima.
fn envelope(events: &[Event], t: f64, w: f64, p: &TwoStageParams, k: &KernelParams) -> f64 {
    let eps = 1e-12;
    // Memory value "just after" t: events at exactly t contribute phi(0).
    let h1: f64 = events
        .iter()
        .take_while(|e| e.time <= t)
        .filter(|e| e.time < p.tc)
        .map(|e| e.followers as f64 * k.density_unchecked((t - e.time).max(0.0)))
        .sum();
    let h2: f64 = events
        .iter()
        .take_while(|e| e.time <= t)
        .filter(|e| e.time > p.tc)
        .map(|e| e.followers as f64 * k.density_unchecked((t - e.time).max(0.0)))
        .sum();
    let maxmod = max_modulation(&p.circadian, t, w);
    let mut bound = 0.0;
    if h1 > 0.0 && p.a1 > 0.0 {
        bound += p.a1 * maxmod * (-t / p.tau1).exp() * h1 * (1.0 + eps);
    }
    if h2 > 0.0 && p.a2 > 0.0 {
        bound += p.a2 * maxmod * (-(t - p.tc) / p.tau2).exp() * h2 * (1.0 + eps);
    }
    bound
}

// ---------------------------------------------------------------------------
// Suite generation
// ---------------------------------------------------------------------------

/// Simulate `n` cascades at the truth parameters, write them plus a
/// manifest recording the truth and the observation-time grid.
pub fn generate_recovery_suite(
    truth: &TwoStageParams,
    n: usize,
    t_obs_grid: &[f64],
    cfg: &SimConfig,
    out_dir: &std::path::Path,
) -> Result<Manifest> {
    if n < 1 {
        return Err(Error::invalid("suite size", format!("n = {n}")));
    }
    let mut cfg = cfg.clone();
    cfg.params = *truth;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut paths = Vec::with_capacity(n);
    for run in 0..n {
        let cascade = simulate_run(&cfg, run as u64)?;
        let name = format!("cascade_{run:03}.cascade");
        io::save_cascade(&cascade, &out_dir.join(&name))?;
        paths.push(name);
    }
    let manifest = Manifest {
        schema_version: io::SCHEMA_VERSION,
        split_fraction: None,
        t_obs_grid: Some(t_obs_grid.to_vec()),
        sets: vec![CascadeSet {
            label: "recovery".into(),
            truth: Some(*truth),
            cascades: paths,
        }],
    };
    io::save_manifest(&manifest, &out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// One cascade set per second-stage amplitude, for sweeps across the
/// non-identifiable ridge.
pub fn generate_sweep_suite(
    base: &TwoStageParams,
    a2_values: &[f64],
    n: usize,
    cfg: &SimConfig,
    out_dir: &std::path::Path,
) -> Result<Manifest> {
    if n < 1 || a2_values.is_empty() {
        return Err(Error::invalid(
            "sweep",
            format!("n = {n}, {} amplitude values", a2_values.len()),
        ));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut sets = Vec::with_capacity(a2_values.len());
    for (vi, &a2) in a2_values.iter().enumerate() {
        let mut truth = *base;
        truth.a2 = a2;
        let mut cfg = cfg.clone();
        cfg.params = truth;
        let mut paths = Vec::with_capacity(n);
        for run in 0..n {
            let cascade = simulate_run(&cfg, (vi * n + run) as u64)?;
            let name = format!("cascade_a2{vi}_{run:03}.cascade");
            io::save_cascade(&cascade, &out_dir.join(&name))?;
            paths.push(name);
        }
        sets.push(CascadeSet {
            label: format!("a2={a2}"),
            truth: Some(truth),
            cascades: paths,
        });
    }
    let manifest = Manifest {
        schema_version: io::SCHEMA_VERSION,
        split_fraction: None,
        t_obs_grid: None,
        sets,
    };
    io::save_manifest(&manifest, &out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Expected event count over `[0, t_end]` from a fine-grid branching
/// recursion: the mean intensity satisfies a renewal-type equation with
/// the seed as source and the mean mark scaling the feedback. Serves as
/// an independent oracle for the thinning simulator.
pub fn expected_count_oracle(cfg: &SimConfig, mean_mark: f64, step: f64) -> f64 {
    let p = &cfg.params;
    let k = &cfg.kernel;
    let d0 = cfg.seed_followers as f64;
    let n = (cfg.t_end / step).ceil() as usize;
    let mut mu = vec![0.0; n + 1]; // mean intensity at grid nodes
    let mut total = 0.0;
    for i in 1..=n {
        let t = i as f64 * step;
        let p1 = infection_rate(t, p.a1, p.tau1, 0.0, &p.circadian);
        let p2 = infection_rate(t, p.a2, p.tau2, p.tc, &p.circadian);
        // Seed contribution.
        let mut h1 = d0 * k.density_unchecked(t);
        let mut h2 = 0.0;
        // Feedback from expected earlier reactions (trapezoid weights).
        for j in 1..i {
            let s = j as f64 * step;
            let w = mean_mark * mu[j] * k.density_unchecked(t - s) * step;
            if s < p.tc.min(t) {
                h1 += w;
            } else if s > p.tc {
                h2 += w;
            }
        }
        mu[i] = p1 * h1 + p2 * h2;
        total += mu[i] * step;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_params() -> TwoStageParams {
        TwoStageParams::new(
            0.0006,
            12.0,
            0.0018,
            16.0,
            CircadianParams::new(0.3, 0.0).unwrap(),
            16.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_amplitudes_give_seed_only() {
        let p = TwoStageParams::new(
            0.0,
            12.0,
            0.0,
            16.0,
            CircadianParams::flat(),
            16.0,
        )
        .unwrap();
        let mut cfg = SimConfig::new(p, 48.0);
        cfg.seed_followers = 100_000;
        let c = simulate(&cfg).unwrap();
        assert_eq!(c.events.len(), 1);
        assert_eq!(c.events[0].time, 0.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mut cfg = SimConfig::new(quiet_params(), 48.0);
        cfg.seed_followers = 20_000;
        cfg.mark_model = MarkModel::Constant { followers: 500 };
        cfg.rng_seed = 7;
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.events.len() > 1, "expected some reactions");
    }

    #[test]
    fn distinct_streams_differ() {
        let mut cfg = SimConfig::new(quiet_params(), 48.0);
        cfg.seed_followers = 20_000;
        cfg.mark_model = MarkModel::Constant { followers: 500 };
        let a = simulate_run(&cfg, 0).unwrap();
        let b = simulate_run(&cfg, 1).unwrap();
        assert_ne!(a.events, b.events);
    }

    #[test]
    fn times_strictly_increase_within_record() {
        let mut cfg = SimConfig::new(quiet_params(), 72.0);
        cfg.seed_followers = 30_000;
        cfg.mark_model = MarkModel::Constant { followers: 600 };
        for seed in 0..4 {
            cfg.rng_seed = seed;
            let c = simulate(&cfg).unwrap();
            for w in c.events.windows(2) {
                assert!(w[1].time > w[0].time);
            }
            assert!(c.events.last().unwrap().time <= 72.0);
        }
    }

    #[test]
    fn runaway_cap_fires() {
        let p = TwoStageParams::new(
            0.01,
            50.0,
            0.01,
            50.0,
            CircadianParams::flat(),
            16.0,
        )
        .unwrap();
        let mut cfg = SimConfig::new(p, 200.0);
        cfg.seed_followers = 1_000_000;
        cfg.mark_model = MarkModel::Constant { followers: 1000 };
        cfg.max_events = 50;
        match simulate(&cfg) {
            Err(Error::Runaway { max_events: 50, .. }) => {}
            other => panic!("expected runaway, got {other:?}"),
        }
    }

    #[test]
    fn continuation_keeps_prefix() {
        let mut cfg = SimConfig::new(quiet_params(), 48.0);
        cfg.seed_followers = 30_000;
        cfg.mark_model = MarkModel::Constant { followers: 500 };
        let full = simulate(&cfg).unwrap();
        let prefix = full.prefix(24.0);
        let cont = simulate_continuation(&cfg, &full, 24.0).unwrap();
        assert!(cont.events.len() >= prefix.events.len());
        assert_eq!(
            &cont.events[..prefix.events.len()],
            &prefix.events[..],
            "prefix must be preserved verbatim"
        );
    }

    #[test]
    fn empirical_and_lognormal_marks_draw() {
        let mut cfg = SimConfig::new(quiet_params(), 36.0);
        cfg.seed_followers = 30_000;
        cfg.mark_model = MarkModel::Empirical {
            values: vec![1, 10, 100],
        };
        simulate(&cfg).unwrap();
        cfg.mark_model = MarkModel::LogNormal { mu: 3.0, sigma: 1.0 };
        simulate(&cfg).unwrap();
        cfg.mark_model = MarkModel::Empirical { values: vec![] };
        assert!(simulate(&cfg).is_err());
    }
}
