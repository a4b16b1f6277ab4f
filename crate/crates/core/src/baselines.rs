//! Baseline predictors: log-linear regression on growth ratios (LR) and
//! the reinforced Poisson process (RPP).
//!
//! LR models the log of the cumulative count ratio per horizon as a
//! Gaussian and predicts with the unbiased estimator
//! `R_hat(t) = R(T_obs) exp(alpha_t + sigma_t^2 / 2)`.
//!
//! RPP is a point process with aging and count reinforcement:
//!
//! ```text
//! lambda(t) = c t^-gamma r_alpha(R(t))
//! r_alpha(R) = eps + (1 - exp(-alpha (R + 1))) / (1 - exp(-alpha))
//! ```
//!
//! where `R(t)` is the running post count (seed included). The expected
//! trajectory solves `dR/dt = lambda(t)` in closed form, which is what
//! [`rpp_predict`] evaluates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{FitDiagnostics, FitResult, FittedModel};
use crate::model::Cascade;
use crate::optim::bfgs_min;

// ---------------------------------------------------------------------------
// Log-linear regression
// ---------------------------------------------------------------------------

/// Per-horizon Gaussian growth model on log count ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    /// Prediction horizons, hours, all beyond the observation time.
    pub horizons: Vec<f64>,
    /// Mean log growth ratio per horizon.
    pub alpha: Vec<f64>,
    /// Population variance of the log growth ratio per horizon.
    pub sigma2: Vec<f64>,
}

/// Gaussian MLE of the per-horizon growth ratios over a corpus of fully
/// observed cascades: `alpha_t` is the mean of `log(R_c(t) / R_c(t_obs))`
/// and `sigma2_t` its population variance (divide by n).
pub fn lr_fit(corpus: &[&Cascade], t_obs: f64, horizons: &[f64]) -> Result<LrModel> {
    if corpus.len() < 2 {
        return Err(Error::Precondition(format!(
            "LR needs at least 2 training cascades, got {}",
            corpus.len()
        )));
    }
    for h in horizons {
        if *h <= t_obs {
            return Err(Error::invalid(
                "LR horizon",
                format!("{h} is not beyond t_obs = {t_obs}"),
            ));
        }
    }
    let mut alpha = Vec::with_capacity(horizons.len());
    let mut sigma2 = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let ratios: Vec<f64> = corpus
            .iter()
            .map(|c| {
                let r_obs = c.posts_through(t_obs) as f64;
                let r_t = c.posts_through(h) as f64;
                if r_obs < 1.0 {
                    Err(Error::Precondition(format!(
                        "cascade {} has no posts by t_obs = {t_obs}",
                        c.id
                    )))
                } else {
                    Ok((r_t / r_obs).ln())
                }
            })
            .collect::<Result<_>>()?;
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let var = ratios.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        alpha.push(mean);
        sigma2.push(var);
    }
    Ok(LrModel {
        horizons: horizons.to_vec(),
        alpha,
        sigma2,
    })
}

/// Predicted cumulative posts per horizon given the count at the end of
/// the observation window.
pub fn lr_predict(model: &LrModel, r_obs: f64) -> Vec<f64> {
    model
        .alpha
        .iter()
        .zip(&model.sigma2)
        .map(|(a, s2)| r_obs * (a + s2 / 2.0).exp())
        .collect()
}

// ---------------------------------------------------------------------------
// Reinforced Poisson process
// ---------------------------------------------------------------------------

/// RPP parameters. `epsilon` is a fixed hyperparameter, not fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RppModel {
    /// Intensity scale.
    pub c: f64,
    /// Aging exponent (distinct from the reaction kernel's tail exponent).
    pub gamma_rpp: f64,
    /// Reinforcement decay.
    pub alpha: f64,
    /// Reinforcement floor.
    pub epsilon: f64,
}

/// Default reinforcement floor when none is configured.
pub const DEFAULT_RPP_EPSILON: f64 = 0.1;

impl RppModel {
    pub fn new(c: f64, gamma_rpp: f64, alpha: f64, epsilon: f64) -> Result<Self> {
        if !(c > 0.0) || !(alpha > 0.0) || !(epsilon > 0.0) {
            return Err(Error::invalid(
                "rpp params",
                format!("c = {c}, alpha = {alpha}, epsilon = {epsilon}"),
            ));
        }
        if !gamma_rpp.is_finite() {
            return Err(Error::invalid("rpp aging exponent", format!("{gamma_rpp}")));
        }
        Ok(RppModel {
            c,
            gamma_rpp,
            alpha,
            epsilon,
        })
    }

    /// Reinforcement factor `r_alpha(R)`; `r_alpha(0) = epsilon + 1`.
    pub fn reinforcement(&self, count: f64) -> f64 {
        self.epsilon
            + (1.0 - (-self.alpha * (count + 1.0)).exp()) / (1.0 - (-self.alpha).exp())
    }

    /// Intensity at time `t > 0` given the running count just before `t`.
    pub fn intensity(&self, t: f64, count: f64) -> f64 {
        self.c * t.powf(-self.gamma_rpp) * self.reinforcement(count)
    }
}

/// Point-process log-likelihood of an RPP on the reaction events in
/// `(0, t_obs]`. The running count is piecewise constant, so the
/// compensator integrates in closed form segment by segment; it starts at
/// the first reaction time, avoiding the aging singularity at zero.
pub fn rpp_log_likelihood(cascade: &Cascade, model: &RppModel, t_obs: f64) -> Result<f64> {
    let reactions: Vec<f64> = cascade
        .events
        .iter()
        .filter(|e| e.time > 0.0 && e.time <= t_obs)
        .map(|e| e.time)
        .collect();
    if reactions.is_empty() {
        return Err(Error::Precondition(
            "RPP likelihood needs at least one reaction event".into(),
        ));
    }
    let g = model.gamma_rpp;
    if (g - 1.0).abs() < 1e-12 {
        return Err(Error::Unsupported(
            "RPP with aging exponent gamma = 1 (log-time branch not available)".into(),
        ));
    }
    let seed_posts = cascade.events.iter().filter(|e| e.time == 0.0).count() as f64;

    let mut ll = 0.0;
    // Log-sum: count just before the i-th reaction is seed + i earlier
    // reactions.
    for (i, &t) in reactions.iter().enumerate() {
        let count = seed_posts + i as f64;
        let lam = model.intensity(t, count);
        if !(lam > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        ll += lam.ln();
    }
    // Compensator from the first reaction to t_obs.
    let pow = |t: f64| t.powf(1.0 - g) / (1.0 - g);
    let mut integral = 0.0;
    for (i, &t) in reactions.iter().enumerate() {
        let t_next = reactions.get(i + 1).copied().unwrap_or(t_obs);
        if t_next > t {
            let count = seed_posts + (i + 1) as f64;
            integral += model.reinforcement(count) * (pow(t_next) - pow(t));
        }
    }
    ll -= model.c * integral;
    Ok(ll)
}

/// Maximum-likelihood RPP fit: `c` is profiled out in closed form; the
/// remaining `(gamma, alpha)` pair is optimized with BFGS on finite
/// differences, with deterministic restarts.
pub fn rpp_fit(cascade: &Cascade, t_obs: f64, epsilon: f64) -> Result<FitResult> {
    rpp_fit_with_min_events(cascade, t_obs, epsilon, 10)
}

pub fn rpp_fit_with_min_events(
    cascade: &Cascade,
    t_obs: f64,
    epsilon: f64,
    min_events: usize,
) -> Result<FitResult> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", format!("{epsilon}")));
    }
    let reactions: Vec<f64> = cascade
        .events
        .iter()
        .filter(|e| e.time > 0.0 && e.time <= t_obs)
        .map(|e| e.time)
        .collect();
    if reactions.len() < min_events {
        return Err(Error::Precondition(format!(
            "{} reaction events in (0, {t_obs}] but at least {min_events} required",
            reactions.len()
        )));
    }

    // gamma in (lo, hi) via logistic, alpha on a log scale.
    let (g_lo, g_hi) = (1e-3, 0.995);
    let to_gamma =
        |x: f64| g_lo + (g_hi - g_lo) / (1.0 + (-x).exp());
    let from_gamma = |g: f64| {
        let f = ((g - g_lo) / (g_hi - g_lo)).clamp(1e-6, 1.0 - 1e-6);
        (f / (1.0 - f)).ln()
    };

    let profile_ll = |gamma: f64, alpha: f64| -> Option<(f64, f64)> {
        let model = RppModel {
            c: 1.0,
            gamma_rpp: gamma,
            alpha,
            epsilon,
        };
        // With c profiled: l(c) = n ln c + const - c * I, maximized at
        // c = n / I.
        let pow = |t: f64| t.powf(1.0 - gamma) / (1.0 - gamma);
        let seed_posts = cascade.events.iter().filter(|e| e.time == 0.0).count() as f64;
        let mut integral = 0.0;
        for (i, &t) in reactions.iter().enumerate() {
            let t_next = reactions.get(i + 1).copied().unwrap_or(t_obs);
            if t_next > t {
                integral += model.reinforcement(seed_posts + (i + 1) as f64) * (pow(t_next) - pow(t));
            }
        }
        if !(integral > 0.0) || !integral.is_finite() {
            return None;
        }
        let n = reactions.len() as f64;
        let c_hat = n / integral;
        let mut ll = n * c_hat.ln() - c_hat * integral;
        for (i, &t) in reactions.iter().enumerate() {
            let lam = model.intensity(t, seed_posts + i as f64);
            if !(lam > 0.0) {
                return None;
            }
            ll += lam.ln();
        }
        ll.is_finite().then_some((ll, c_hat))
    };

    let starts: [(f64, f64); 3] = [(0.3, 0.5), (0.7, 0.05), (0.1, 2.0)];
    let mut best: Option<(f64, RppModel, bool)> = None;
    for (g0, a0) in starts {
        let x0 = vec![from_gamma(g0), a0.ln()];
        let objective = |x: &[f64]| {
            let gamma = to_gamma(x[0]);
            let alpha = x[1].clamp(-9.0, 4.0).exp();
            let f = match profile_ll(gamma, alpha) {
                Some((ll, _)) => -ll,
                None => f64::INFINITY,
            };
            // Central finite differences; the 2-D profile is cheap.
            let mut grad = vec![0.0; 2];
            if f.is_finite() {
                for (j, g_slot) in grad.iter_mut().enumerate() {
                    let h = 1e-5;
                    let mut xp = x.to_vec();
                    xp[j] += h;
                    let mut xm = x.to_vec();
                    xm[j] -= h;
                    let fp = profile_ll(to_gamma(xp[0]), xp[1].clamp(-9.0, 4.0).exp())
                        .map_or(f64::INFINITY, |(ll, _)| -ll);
                    let fm = profile_ll(to_gamma(xm[0]), xm[1].clamp(-9.0, 4.0).exp())
                        .map_or(f64::INFINITY, |(ll, _)| -ll);
                    *g_slot = if fp.is_finite() && fm.is_finite() {
                        (fp - fm) / (2.0 * h)
                    } else {
                        0.0
                    };
                }
            }
            (f, grad)
        };
        let res = bfgs_min(objective, &x0, 1e-6, 120);
        if !res.f.is_finite() {
            continue;
        }
        let gamma = to_gamma(res.x[0]);
        let alpha = res.x[1].clamp(-9.0, 4.0).exp();
        if let Some((ll, c_hat)) = profile_ll(gamma, alpha) {
            let model = RppModel {
                c: c_hat,
                gamma_rpp: gamma,
                alpha,
                epsilon,
            };
            if best.as_ref().map_or(true, |(b, _, _)| ll > *b) {
                best = Some((ll, model, res.converged));
            }
        }
    }
    let (ll, model, converged) =
        best.ok_or_else(|| Error::Numerical("all RPP restarts diverged".into()))?;
    let mut result = FitResult::new(
        FittedModel::Rpp(model),
        ll,
        reactions.len(),
        t_obs,
    );
    result.diagnostics = FitDiagnostics {
        converged,
        restarts_used: starts.len(),
        tc_profile: Vec::new(),
    };
    Ok(result)
}

/// Closed-form mean trajectory of the RPP from `(t_obs, r_obs)`:
///
/// ```text
/// R(t) = (log(1 + e^x) - x - log eps~ - alpha) / alpha
/// x(t) = eps~ c alpha (T_obs^(1-g) - t^(1-g)) / ((1-g)(1 - e^-alpha))
///        - (R(T_obs) + 1) alpha - log(eps~ - e^(-alpha (R(T_obs)+1)))
/// eps~  = 1 + eps (1 - e^-alpha)
/// ```
///
/// `log(1 + e^x) - x` is evaluated as `softplus(-x)` so large `|x|` cannot
/// overflow.
pub fn rpp_predict(
    model: &RppModel,
    r_obs: f64,
    t_obs: f64,
    horizons: &[f64],
) -> Result<Vec<f64>> {
    let g = model.gamma_rpp;
    if (g - 1.0).abs() < 1e-12 {
        return Err(Error::Unsupported(
            "RPP with aging exponent gamma = 1 (log-time branch not available)".into(),
        ));
    }
    if !(r_obs >= 1.0) {
        return Err(Error::Precondition(format!(
            "RPP prediction needs R(T_obs) >= 1, got {r_obs}"
        )));
    }
    for h in horizons {
        if *h < t_obs {
            return Err(Error::invalid(
                "rpp horizon",
                format!("{h} is before t_obs = {t_obs}"),
            ));
        }
    }
    let alpha = model.alpha;
    let eps_t = 1.0 + model.epsilon * (1.0 - (-alpha).exp());
    let log_floor = {
        let v = eps_t - (-alpha * (r_obs + 1.0)).exp();
        if !(v > 0.0) {
            return Err(Error::Numerical(
                "RPP closed form: eps~ <= exp(-alpha (R+1))".into(),
            ));
        }
        v.ln()
    };
    let softplus = |x: f64| {
        if x > 30.0 {
            x + (-x).exp().ln_1p()
        } else {
            x.exp().ln_1p()
        }
    };
    let base = eps_t * model.c * alpha / ((1.0 - g) * (1.0 - (-alpha).exp()));
    let t_obs_pow = t_obs.powf(1.0 - g);
    Ok(horizons
        .iter()
        .map(|&t| {
            let x = base * (t_obs_pow - t.powf(1.0 - g)) - (r_obs + 1.0) * alpha - log_floor;
            (softplus(-x) - eps_t.ln() - alpha) / alpha
        })
        .collect())
}

/// Thin an RPP into a synthetic cascade on `(0, t_end]`: between events the
/// intensity only decreases (pure aging), so the value just after the last
/// event bounds the next proposal. The returned cascade has a unit seed at
/// time 0 that participates in the running count.
pub fn rpp_simulate(
    model: &RppModel,
    t_end: f64,
    rng_seed: u64,
    max_events: usize,
) -> Result<Cascade> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
    let mut times: Vec<f64> = Vec::new();
    let t_start = 1e-3;
    let mut t = t_start;
    let mut count = 1.0; // seed post
    while t < t_end {
        let bound = model.intensity(t, count);
        if !(bound > 0.0) {
            break;
        }
        let u: f64 = rng.gen();
        let dt = -(1.0 - u).ln() / bound;
        t += dt;
        if t >= t_end {
            break;
        }
        let lam = model.intensity(t, count);
        debug_assert!(lam <= bound * (1.0 + 1e-9));
        if rng.gen::<f64>() < lam / bound {
            times.push(t);
            count += 1.0;
            if times.len() >= max_events {
                return Err(Error::Runaway {
                    max_events,
                    t,
                });
            }
        }
    }
    let mut events = vec![crate::model::Event::new(0.0, 1)];
    events.extend(times.into_iter().map(|t| crate::model::Event::new(t, 1)));
    Cascade::new(format!("rpp-sim-{rng_seed}"), events, t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Event;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {a} ~ {b} within {tol}");
    }

    fn ramp_cascade(id: &str, factor: usize) -> Cascade {
        // 10 posts by t = 10 (seed + 9), then (factor-1)*10 more by t = 20.
        let mut events = vec![Event::new(0.0, 1)];
        for i in 1..10 {
            events.push(Event::new(i as f64, 1));
        }
        let extra = (factor - 1) * 10;
        for j in 0..extra {
            events.push(Event::new(10.0 + 10.0 * (j as f64 + 1.0) / (extra as f64 + 1.0), 1));
        }
        Cascade::new(id, events, 24.0).unwrap()
    }

    #[test]
    fn lr_identical_doubling_has_zero_variance() {
        let a = ramp_cascade("a", 2);
        let b = ramp_cascade("b", 2);
        let m = lr_fit(&[&a, &b], 10.0, &[20.0]).unwrap();
        assert_close(m.alpha[0], std::f64::consts::LN_2, 1e-12);
        assert_close(m.sigma2[0], 0.0, 1e-12);
    }

    #[test]
    fn lr_two_point_hand_computation() {
        let a = ramp_cascade("x2", 2);
        let b = ramp_cascade("x4", 4);
        let m = lr_fit(&[&a, &b], 10.0, &[20.0]).unwrap();
        let l2 = std::f64::consts::LN_2;
        let l4 = 4.0f64.ln();
        let mean = (l2 + l4) / 2.0;
        let var = ((l2 - mean).powi(2) + (l4 - mean).powi(2)) / 2.0;
        assert_close(m.alpha[0], mean, 1e-12);
        assert_close(m.sigma2[0], var, 1e-12);
    }

    #[test]
    fn lr_invariant_under_corpus_duplication() {
        let a = ramp_cascade("a", 2);
        let b = ramp_cascade("b", 4);
        let once = lr_fit(&[&a, &b], 10.0, &[20.0]).unwrap();
        let twice = lr_fit(&[&a, &b, &a, &b], 10.0, &[20.0]).unwrap();
        assert_close(once.alpha[0], twice.alpha[0], 1e-12);
        assert_close(once.sigma2[0], twice.sigma2[0], 1e-12);
    }

    #[test]
    fn lr_small_corpus_rejected() {
        let a = ramp_cascade("a", 2);
        assert!(lr_fit(&[&a], 10.0, &[20.0]).is_err());
    }

    #[test]
    fn lr_predict_identity_and_scaling() {
        let m = LrModel {
            horizons: vec![20.0],
            alpha: vec![0.0],
            sigma2: vec![0.0],
        };
        assert_close(lr_predict(&m, 100.0)[0], 100.0, 1e-12);
        let m = LrModel {
            horizons: vec![20.0],
            alpha: vec![std::f64::consts::LN_2],
            sigma2: vec![0.0],
        };
        assert_close(lr_predict(&m, 100.0)[0], 200.0, 1e-10);
        let m = LrModel {
            horizons: vec![20.0],
            alpha: vec![0.0],
            sigma2: vec![2.0],
        };
        assert_close(lr_predict(&m, 10.0)[0], 10.0 * std::f64::consts::E, 1e-9);
    }

    #[test]
    fn reinforcement_at_zero_count() {
        let m = RppModel::new(1.0, 0.4, 0.7, 0.1).unwrap();
        assert_close(m.reinforcement(0.0), 0.1 + 1.0, 1e-12);
    }

    #[test]
    fn rpp_closed_form_left_endpoint() {
        let m = RppModel::new(3.0, 0.45, 0.12, 0.1).unwrap();
        let got = rpp_predict(&m, 57.0, 12.0, &[12.0]).unwrap()[0];
        assert_close(got, 57.0, 1e-9);
    }

    #[test]
    fn rpp_closed_form_matches_ode_integration() {
        // RK4 on dR/dt = lambda(t) from (t_obs, r_obs).
        let rk4 = |m: &RppModel, r_obs: f64, t_obs: f64, t_end: f64| -> f64 {
            let n = 20_000;
            let h = (t_end - t_obs) / n as f64;
            let mut r = r_obs;
            let mut t = t_obs;
            let f = |t: f64, r: f64| m.intensity(t, r);
            for _ in 0..n {
                let k1 = f(t, r);
                let k2 = f(t + h / 2.0, r + h / 2.0 * k1);
                let k3 = f(t + h / 2.0, r + h / 2.0 * k2);
                let k4 = f(t + h, r + h * k3);
                r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                t += h;
            }
            r
        };
        let m = RppModel::new(5.0, 0.6, 0.08, 0.1).unwrap();
        let (r_obs, t_obs) = (40.0, 10.0);
        for t_end in [14.0, 24.0, 48.0] {
            let closed = rpp_predict(&m, r_obs, t_obs, &[t_end]).unwrap()[0];
            let ode = rk4(&m, r_obs, t_obs, t_end);
            let rel = (closed - ode).abs() / ode.abs();
            assert!(rel < 1e-6, "t_end {t_end}: closed {closed} vs ode {ode}");
        }
    }

    #[test]
    fn rpp_large_alpha_approaches_floor_growth() {
        let eps = 0.1;
        let m = RppModel::new(2.0, 0.5, 50.0, eps).unwrap();
        let (r_obs, t_obs, t_end) = (30.0, 8.0, 32.0);
        let got = rpp_predict(&m, r_obs, t_obs, &[t_end]).unwrap()[0];
        // Floor regime: dR/dt = c (eps + 1) t^-gamma.
        let expect = r_obs
            + m.c * (eps + 1.0) * (t_end.powf(0.5) - t_obs.powf(0.5)) / 0.5;
        assert!(
            (got - expect).abs() / expect < 1e-3,
            "{got} vs {expect}"
        );
    }

    #[test]
    fn rpp_gamma_one_is_unsupported() {
        let m = RppModel::new(1.0, 1.0, 0.5, 0.1).unwrap();
        match rpp_predict(&m, 10.0, 5.0, &[8.0]) {
            Err(crate::error::Error::Unsupported(_)) => {}
            other => panic!("expected unsupported branch, got {other:?}"),
        }
    }

    #[test]
    fn rpp_trajectory_is_non_decreasing() {
        let m = RppModel::new(4.0, 0.7, 0.2, 0.1).unwrap();
        let horizons: Vec<f64> = (0..40).map(|k| 10.0 + k as f64).collect();
        let pred = rpp_predict(&m, 25.0, 10.0, &horizons).unwrap();
        for w in pred.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn rpp_fit_is_a_local_max_in_c() {
        let m = RppModel::new(6.0, 0.5, 0.15, 0.1).unwrap();
        let cascade = rpp_simulate(&m, 36.0, 99, 100_000).unwrap();
        let fit = rpp_fit(&cascade, 36.0, 0.1).unwrap();
        let fitted = match fit.model {
            FittedModel::Rpp(m) => m,
            _ => unreachable!(),
        };
        let ll = rpp_log_likelihood(&cascade, &fitted, 36.0).unwrap();
        assert_close(ll, fit.loglik, 1e-6 * ll.abs().max(1.0));
        for scale in [0.5, 2.0] {
            let mut perturbed = fitted;
            perturbed.c *= scale;
            let ll_p = rpp_log_likelihood(&cascade, &perturbed, 36.0).unwrap();
            assert!(
                ll_p < ll,
                "perturbed c x{scale} should lower the likelihood: {ll_p} vs {ll}"
            );
        }
    }

    #[test]
    fn rpp_simulate_is_deterministic() {
        let m = RppModel::new(5.0, 0.5, 0.2, 0.1).unwrap();
        let a = rpp_simulate(&m, 24.0, 7, 100_000).unwrap();
        let b = rpp_simulate(&m, 24.0, 7, 100_000).unwrap();
        assert_eq!(a, b);
    }
}
