// Temporary calibration scratchpad (deleted before release).
use cascade_core::fit::{fit_two_stage, FitConfig};
use cascade_core::model::{CircadianParams, TwoStageParams};
use cascade_core::simulate::{simulate_run, MarkModel, SimConfig};

#[test]
#[ignore]
fn calibrate_suite() {
    for (a2, d0, d) in [
        (1.8e-3, 1_500_000u64, 1100u64),
        (1.8e-3, 2_000_000, 1100),
        (1.8e-3, 1_500_000, 1200),
    ] {
        let truth = TwoStageParams::new(
            0.0006,
            12.0,
            a2,
            16.0,
            CircadianParams::flat(),
            16.0,
        )
        .unwrap();
        let mut cfg = SimConfig::new(truth, 96.0);
        cfg.seed_followers = d0;
        cfg.mark_model = MarkModel::Constant { followers: d };
        let mut counts = Vec::new();
        let mut pre_tc = Vec::new();
        let mut post_tc = Vec::new();
        for run in 0..20 {
            match simulate_run(&cfg, run) {
                Ok(c) => {
                    pre_tc.push(c.events.iter().filter(|e| e.time > 0.0 && e.time < 16.0).count());
                    post_tc.push(c.events.iter().filter(|e| e.time > 16.0).count());
                    counts.push(c.events.len() - 1);
                }
                Err(e) => println!("run {run} failed: {e}"),
            }
        }
        counts.sort();
        pre_tc.sort();
        post_tc.sort();
        println!(
            "a2={a2} d0={d0} d={d}: total min/med/max = {}/{}/{} | pre-tc med {} | post-tc min/med/max {}/{}/{}",
            counts.first().unwrap_or(&0),
            counts.get(counts.len() / 2).unwrap_or(&0),
            counts.last().unwrap_or(&0),
            pre_tc.get(pre_tc.len() / 2).unwrap_or(&0),
            post_tc.first().unwrap_or(&0),
            post_tc.get(post_tc.len() / 2).unwrap_or(&0),
            post_tc.last().unwrap_or(&0),
        );
    }
}

#[test]
#[ignore]
fn recovery_medians() {
    for r in [0.0] {
        let truth = TwoStageParams::new(
            0.0006,
            12.0,
            0.0018,
            16.0,
            CircadianParams::new(r, 0.0).unwrap(),
            16.0,
        )
        .unwrap();
        let mut cfg = SimConfig::new(truth, 96.0);
        cfg.seed_followers = 1_500_000;
        cfg.mark_model = MarkModel::Constant { followers: 1100 };
        let mut errs: Vec<[f64; 5]> = Vec::new();
        let t0 = std::time::Instant::now();
        for run in 0..16 {
            let c = simulate_run(&cfg, run).unwrap();
            let fit = fit_two_stage(&c, &FitConfig::new(36.0).unwrap()).unwrap();
            if let cascade_core::fit::FittedModel::TwoStage(p) = fit.model {
                errs.push([
                    (p.a1 - truth.a1).abs() / truth.a1,
                    (p.tau1 - truth.tau1).abs() / truth.tau1,
                    (p.a2 - truth.a2).abs() / truth.a2,
                    (p.tau2 - truth.tau2).abs() / truth.tau2,
                    (p.tc - truth.tc).abs() / truth.tc,
                ]);
            }
        }
        let med = |idx: usize| {
            let mut v: Vec<f64> = errs.iter().map(|e| e[idx]).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        println!(
            "truth r={r}: medians a1={:.1}% tau1={:.1}% a2={:.1}% tau2={:.1}% tc={:.1}%  ({:?} for 16 fits)",
            100.0 * med(0),
            100.0 * med(1),
            100.0 * med(2),
            100.0 * med(3),
            100.0 * med(4),
            t0.elapsed(),
        );
    }
}

#[test]
#[ignore]
fn sweep_intensity_l1() {
    use cascade_core::model::{intensity_two_stage, KernelParams};
    let kernel = KernelParams::default();
    for a2 in [2.2e-4, 8.83e-4, 3.5e-3] {
        let truth =
            TwoStageParams::new(0.0024, 16.0, a2, 16.0, CircadianParams::flat(), 16.0).unwrap();
        let mut cfg = SimConfig::new(truth, 96.0);
        cfg.seed_followers = 150_000;
        cfg.mark_model = MarkModel::Constant { followers: 400 };
        let mut l1s = Vec::new();
        for run in 0..6 {
            let c = simulate_run(&cfg, run).unwrap();
            let fit = fit_two_stage(&c, &FitConfig::new(36.0).unwrap()).unwrap();
            let p = match fit.model {
                cascade_core::fit::FittedModel::TwoStage(p) => p,
                _ => unreachable!(),
            };
            let mut num = 0.0;
            let mut den = 0.0;
            let mut t = 0.025;
            while t <= 36.0 {
                let lt = intensity_two_stage(t, &c, &truth, &kernel);
                let lf = intensity_two_stage(t, &c, &p, &kernel);
                num += (lt - lf).abs();
                den += lt;
                t += 0.05;
            }
            l1s.push(num / den);
        }
        l1s.sort_by(|x, y| x.partial_cmp(y).unwrap());
        println!(
            "a2={a2}: intensity L1 min/med/max = {:.3}/{:.3}/{:.3}",
            l1s[0],
            l1s[l1s.len() / 2],
            l1s[l1s.len() - 1]
        );
    }
}

#[test]
#[ignore]
fn benchmark_smoke() {
    use cascade_core::eval::{run_benchmark_on, BenchmarkConfig};
    use rand::{Rng, SeedableRng};
    let cascades: Vec<_> = (0..16)
        .map(|run| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
            rng.set_stream(1000 + run);
            let a1 = 6e-4 * rng.gen_range(0.8..1.25);
            let tau1 = rng.gen_range(10.0..16.0);
            let a2 = 1.8e-3 * rng.gen_range(0.85..1.3);
            let tau2 = rng.gen_range(13.0..22.0);
            let tc = rng.gen_range(12.0..26.0);
            let r = rng.gen_range(-0.35..0.35);
            let th = rng.gen_range(0.0..24.0);
            let d0 = (1.5e6 * rng.gen_range(0.6..2.2)) as u64;
            let truth = TwoStageParams::new(
                a1,
                tau1,
                a2,
                tau2,
                CircadianParams::new(r, th).unwrap(),
                tc,
            )
            .unwrap();
            let mut cfg = SimConfig::new(truth, 96.0);
            cfg.seed_followers = d0;
            cfg.mark_model = MarkModel::Constant { followers: 1100 };
            cfg.rng_seed = 4242;
            simulate_run(&cfg, run).unwrap()
        })
        .collect();
    let sizes: Vec<usize> = cascades.iter().map(|c| c.events.len()).collect();
    println!("sizes: {sizes:?}");
    let mut bcfg = BenchmarkConfig::default();
    bcfg.min_posts = 30;
    let t0 = std::time::Instant::now();
    let report = run_benchmark_on(&cascades, &bcfg).unwrap();
    println!("benchmark took {:?}", t0.elapsed());
    for agg in &report.aggregates {
        println!(
            "{:>9}: mean-of-mean-AE {:?} win_mean {:.2}",
            agg.model, agg.mean_of_mean_ae, agg.win_fraction_mean
        );
    }
    // Pairwise comparisons per cascade.
    let mut aic_wins = 0;
    let mut pair = [(0, 0); 3]; // vs tideh, rpp, lr
    for chunk in report.rows.chunks(4) {
        let get = |m: &str| chunk.iter().find(|r| r.model == m);
        let p = get("two-stage");
        if let (Some(pa), Some(ta)) = (p.and_then(|r| r.aic), get("tideh").and_then(|r| r.aic)) {
            if pa < ta {
                aic_wins += 1;
            }
        }
        for (slot, other) in ["tideh", "rpp", "lr"].iter().enumerate() {
            let pm = p.and_then(|r| r.mean_ae);
            let om = get(other).and_then(|r| r.mean_ae);
            pair[slot].1 += 1;
            match (pm, om) {
                (Some(a), Some(b)) if a < b => pair[slot].0 += 1,
                (Some(_), None) => pair[slot].0 += 1, // other model failed
                _ => {}
            }
        }
    }
    println!("AIC two-stage < tideh: {aic_wins}");
    println!(
        "pairwise mean-AE wins: vs tideh {}/{}  vs rpp {}/{}  vs lr {}/{}",
        pair[0].0, pair[0].1, pair[1].0, pair[1].1, pair[2].0, pair[2].1
    );
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        println!("  FAILED {} {}: {:?}", row.cascade_id, row.model, row.error);
    }
}

#[test]
#[ignore]
fn time_one_fit() {
    let truth = TwoStageParams::new(
        0.0006,
        12.0,
        0.0018,
        16.0,
        CircadianParams::new(0.3, 0.0).unwrap(),
        16.0,
    )
    .unwrap();
    let mut cfg = SimConfig::new(truth, 72.0);
    cfg.seed_followers = 1_000_000;
    cfg.mark_model = MarkModel::Constant { followers: 1300 };
    for run in [3u64, 5, 11] {
        let c = simulate_run(&cfg, run).unwrap();
        println!("run {run}: {} events", c.events.len());
        let t0 = std::time::Instant::now();
        let fit = fit_two_stage(&c, &FitConfig::new(36.0).unwrap()).unwrap();
        println!(
            "  fit took {:?} (converged {})",
            t0.elapsed(),
            fit.diagnostics.converged
        );
        if let cascade_core::fit::FittedModel::TwoStage(p) = fit.model {
            println!(
                "  est: a1={:.5e} tau1={:.3} a2={:.5e} tau2={:.3} tc={:.3} r={:.3} th={:.2} ll={:.2}",
                p.a1, p.tau1, p.a2, p.tau2, p.tc, p.circadian.r, p.circadian.theta0, fit.loglik
            );
        }
    }
    println!(
        "truth: a1={:.5e} tau1={} a2={:.5e} tau2={} tc={} r=0.3 th=0",
        truth.a1, truth.tau1, truth.a2, truth.tau2, truth.tc
    );
    // Likelihood at the exact truth for each run, for comparison.
    for run in [3u64, 5, 11] {
        let c = simulate_run(&cfg, run).unwrap();
        let ll = cascade_core::fit::log_likelihood(
            &c,
            &truth,
            &cascade_core::model::KernelParams::default(),
            36.0,
        )
        .unwrap();
        println!("run {run}: ll(truth) = {ll:.2}");
    }
}
