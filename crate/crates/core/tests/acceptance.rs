//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line (written
//! straight to stderr so it shows without `--nocapture`); the test fails if
//! any criterion does.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use sketchreg::dense::{fwht_in_place, pinv, Matrix};
use sketchreg::diagnostics::{aips_check, gaussian_norm_identity, neumann_validate};
use sketchreg::harness::{csv_body, run_experiment, summarize, Experiment, ExperimentConfig, SketchSpec};
use sketchreg::sketch::{rng_from_seed, Family, SketchOperator};
use sketchreg::Error;

struct Report {
    failures: Vec<String>,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String, started: Instant) {
        let status = if pass { "PASS" } else { "FAIL" };
        let text = format!(
            "[acceptance] {status} criterion {id}: {detail} ({:.1}s)\n",
            started.elapsed().as_secs_f64()
        );
        let _ = std::io::stderr().write_all(text.as_bytes());
        if !pass {
            self.failures.push(format!("criterion {id}"));
        }
    }
}

fn config(exp: Experiment) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(exp);
    c.seed = 20240601;
    c
}

fn gauss(n: usize, k: usize, seed: u64) -> Matrix<f64> {
    let mut rng = rng_from_seed(seed);
    Matrix::from_fn(n, k, |_, _| rng.sample(StandardNormal))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len().div_ceil(2) - 1]
}

fn linf_positive(family: Family) -> ExperimentConfig {
    let mut c = config(Experiment::LinfPositive);
    (c.n, c.d, c.m, c.trials) = (Some(2048), Some(32), Some(512), 200);
    c.noise = Some(1.0);
    c.slack_c = 10.0;
    c.sketch = Some(SketchSpec::Single(family));
    c
}

fn criterion_1(rep: &mut Report) {
    let t = Instant::now();
    let r = run_experiment(&linf_positive(Family::Gaussian)).unwrap();
    let s = r.summary.unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let pass = s.exceedance_rate <= 0.05 && elapsed < 120.0;
    rep.line(
        "1 (Gaussian l-inf guarantee)",
        pass,
        format!(
            "exceedance {:.3} <= 0.05 at C=10, eps={:.3}; median normalized_linf {:.3}; runtime {elapsed:.1}s < 120s",
            s.exceedance_rate, r.config.eps, s.normalized_linf.median
        ),
        t,
    );
}

fn criterion_2(rep: &mut Report) {
    let t = Instant::now();
    let r = run_experiment(&linf_positive(Family::Srht)).unwrap();
    let s = r.summary.as_ref().unwrap();
    let d = 32f64;
    let ratio = median(r.outcomes.iter().map(|o| o.row.linf_err / o.row.l2_err).collect());
    let bound = 4.0 * (d.ln() / d).sqrt();
    let pass = s.exceedance_rate <= 0.05 && ratio <= bound && r.config.n_eff == 2048;
    rep.line(
        "2 (SRHT l-inf guarantee)",
        pass,
        format!(
            "exceedance {:.3} <= 0.05 at C=10; median linf/l2 {ratio:.3} <= 4*sqrt(ln d/d) = {bound:.3} \
             (1.32/sqrt(32) = {:.3} for reference)",
            s.exceedance_rate,
            1.32 / d.sqrt()
        ),
        t,
    );
}

fn criterion_3(rep: &mut Report) {
    let t = Instant::now();
    let mut c = config(Experiment::CsCounterexample);
    (c.d, c.m, c.s, c.alpha, c.trials) = (Some(256), Some(4096), Some(4), Some(4), 200);
    c.slack_c = 1.0;
    let (d, m, s_par, alpha) = (256f64, 4096f64, 4f64, 4f64);
    assert!(s_par * s_par * d <= m && m <= (d * d * d * s_par).sqrt());
    let r = run_experiment(&c).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let summary = r.summary.as_ref().unwrap();
    let event_rate = summary.event_rate.unwrap();
    let want = 1.0 / (s_par * alpha.sqrt());
    let detected: Vec<_> = r.outcomes.iter().filter(|o| o.witness_err.is_some()).collect();
    let worst = detected
        .iter()
        .map(|o| (o.witness_err.unwrap() - want).abs())
        .fold(0.0, f64::max);
    let failing = detected.iter().filter(|o| !o.check.linf_pass).count() as f64 / detected.len().max(1) as f64;
    let pass = event_rate >= 0.30 && !detected.is_empty() && worst <= 1e-9 && failing >= 0.90 && elapsed < 180.0;
    rep.line(
        "3 (Count-Sketch l-inf failure)",
        pass,
        format!(
            "event rate {event_rate:.3} >= 0.30; witness error = 1/(s sqrt(alpha)) = {want} within {worst:.1e} <= 1e-9 \
             (2/sqrt(d) = {:.3}); {:.1}% of event trials fail the C=1 check (>= 90%); runtime {elapsed:.1}s < 180s",
            2.0 / d.sqrt(),
            100.0 * failing
        ),
        t,
    );
}

fn criterion_4(rep: &mut Report) {
    let t = Instant::now();
    let mut c = config(Experiment::LevCounterexample);
    (c.d, c.alpha, c.beta, c.m, c.trials) = (Some(64), Some(64), Some(8), Some(256), 200);
    assert!(64 * 8 >= 64 && 256.0 <= 64f64.powf(1.5));
    c.sketch = Some(SketchSpec::Single(Family::LeverageScore));
    let lev = run_experiment(&c).unwrap();
    c.sketch = Some(SketchSpec::Single(Family::Srht));
    let srht = run_experiment(&c).unwrap();
    let ml = lev.summary.as_ref().unwrap().normalized_linf.median;
    let ms = srht.summary.as_ref().unwrap().normalized_linf.median;
    let ratio = ml / ms;
    rep.line(
        "4 (leverage-score l-inf failure)",
        ratio >= 4.0,
        format!(
            "median normalized_linf leverage {ml:.4} vs SRHT {ms:.4} (n padded {} -> {}): ratio {ratio:.3} >= 4; \
             median linf_err leverage {:.4e} vs SRHT {:.4e}",
            srht.config.n,
            srht.config.n_eff,
            lev.summary.as_ref().unwrap().linf_err.median,
            srht.summary.as_ref().unwrap().linf_err.median
        ),
        t,
    );
}

fn criterion_5(rep: &mut Report) {
    let t = Instant::now();
    let d = 16f64;
    let mut medians = Vec::new();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [64usize, 256, 1024] {
        let mut c = config(Experiment::LowerBoundL2);
        (c.n, c.d, c.m, c.trials) = (Some(2048), Some(16), Some(m), 100);
        c.sketch = Some(SketchSpec::Single(Family::Gaussian));
        let med = run_experiment(&c).unwrap().summary.unwrap().l2_err.median;
        let ideal = (d / m as f64).sqrt();
        let within = med <= 3.0 * ideal && med >= ideal / 3.0;
        pass &= within;
        parts.push(format!("m={m}: median {med:.4} vs sqrt(d/m) {ideal:.4}"));
        medians.push(med);
    }
    let ratios: Vec<f64> = medians.windows(2).map(|w| w[0] / w[1]).collect();
    pass &= ratios.iter().all(|r| (1.4..=2.9).contains(r));
    let elapsed = t.elapsed().as_secs_f64();
    pass &= elapsed < 120.0;
    rep.line(
        "5 (l2 lower bound)",
        pass,
        format!(
            "{}; successive ratios {:.3}, {:.3} in [1.4, 2.9]; runtime {elapsed:.1}s < 120s",
            parts.join(", "),
            ratios[0],
            ratios[1]
        ),
        t,
    );
}

fn criterion_6(rep: &mut Report) {
    let t = Instant::now();
    let (n, d, m) = (1024, 8, 512);
    let mut pairs = 0;
    let mut rejected = 0;
    let mut worst_rel = 0.0f64;
    let mut worst_step = 0.0f64;
    let mut violations = 0;
    let mut seed = 0u64;
    while pairs < 20 {
        let a = gauss(n, d, 1000 + seed);
        let s = SketchOperator::srht(m, n, seed).unwrap();
        seed += 1;
        let r = match neumann_validate(&s, &a, 12) {
            Ok(r) => r,
            Err(Error::TNormTooLarge { .. }) => {
                rejected += 1;
                continue;
            }
            Err(e) => panic!("{e}"),
        };
        pairs += 1;
        let e = &r.truncation_errors;
        worst_rel = worst_rel.max(e[12] / e[0]);
        for w in e.windows(2) {
            worst_step = worst_step.max(w[1] / w[0] - r.t_norm);
        }
        violations += r.ratio_violations(1e-6, f64::INFINITY).len();
    }
    rep.line(
        "6 (Neumann series)",
        violations == 0 && worst_rel <= 1e-6,
        format!(
            "20 SRHT pairs (n={n}, d={d}, m={m}; {rejected} draws with ||T|| > 1/2 skipped): \
             step-ratio violations {violations} (largest ratio - t_norm {worst_step:.2e}, rounding allowance applied); \
             max errors[12]/errors[0] {worst_rel:.2e} <= 1e-6"
        ),
        t,
    );
}

fn criterion_7(rep: &mut Report) {
    let t = Instant::now();
    let mut checks: Vec<(String, bool)> = Vec::new();

    let mut fwht_worst = 0.0f64;
    for k in 0..=12u32 {
        let n = 1usize << k;
        let x: Vec<f64> = gauss(n, 1, k as u64).into_vec();
        let mut y = x.clone();
        fwht_in_place(&mut y).unwrap();
        fwht_in_place(&mut y).unwrap();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (n as f64 * a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        fwht_worst = fwht_worst.max(err / (n as f64 * norm));
    }
    checks.push((
        format!("fwht involution rel err {fwht_worst:.1e} <= 1e-9"),
        fwht_worst <= 1e-9,
    ));

    let mut mp = 0.0f64;
    for seed in 0..20 {
        let a = gauss(6, 3, seed);
        let p = pinv(&a).unwrap();
        let apa = a.matmul(&p).unwrap().matmul(&a).unwrap();
        let pap = p.matmul(&a).unwrap().matmul(&p).unwrap();
        let ap = a.matmul(&p).unwrap();
        let pa = p.matmul(&a).unwrap();
        for e in [
            apa.sub(&a).unwrap().max_abs(),
            pap.sub(&p).unwrap().max_abs(),
            ap.sub(&ap.transpose()).unwrap().max_abs(),
            pa.sub(&pa.transpose()).unwrap().max_abs(),
        ] {
            mp = mp.max(e);
        }
    }
    checks.push((format!("Moore-Penrose {mp:.1e} <= 1e-9"), mp <= 1e-9));

    let mut unit = 0.0f64;
    let mut agree = 0.0f64;
    for seed in 0..30u64 {
        let n = 64;
        let m = 8 + (seed as usize % 8) * 4;
        let mat = gauss(n, 3, seed);
        for s in [
            SketchOperator::srht(m, n, seed).unwrap(),
            SketchOperator::countsketch(m, n, 1 + seed as usize % 4, seed).unwrap(),
            SketchOperator::gaussian(m, n, seed).unwrap(),
        ] {
            let dense: Matrix<f64> = s.materialize().unwrap();
            if s.family() != Family::Gaussian {
                for c in dense.column_norms() {
                    unit = unit.max((c - 1.0f64).abs());
                }
            }
            let diff = s
                .apply(&mat)
                .unwrap()
                .sub(&dense.matmul(&mat).unwrap())
                .unwrap()
                .max_abs();
            agree = agree.max(diff);
        }
    }
    checks.push((format!("unit columns {unit:.1e} <= 1e-12"), unit <= 1e-12));
    checks.push((
        format!("matrix-free vs materialized {agree:.1e} <= 1e-10"),
        agree <= 1e-10,
    ));

    let g = gaussian_norm_identity(&gauss(8, 4, 77), 1.0, 100_000, 3).unwrap();
    checks.push((
        format!("Gaussian norm identity rel err {:.4} <= 0.03", g.rel_err),
        g.rel_err <= 0.03,
    ));

    let mut aips_pass = 0;
    let mut aips_max = 0.0f64;
    let mut aips_bound = 0.0;
    for seed in 0..100 {
        let r = aips_check(&SketchOperator::<f64>::srht(256, 1024, seed).unwrap(), 4.0).unwrap();
        aips_pass += r.pass as usize;
        aips_max = aips_max.max(r.max_offdiag);
        aips_bound = r.bound;
    }
    checks.push((
        format!("AIPS pass {aips_pass}/100 >= 99 (max offdiag {aips_max:.3}, bound {aips_bound:.3})"),
        aips_pass >= 99,
    ));

    let mut c = config(Experiment::LinfPositive);
    (c.n, c.d, c.m, c.trials) = (Some(256), Some(4), Some(32), 30);
    let first = run_experiment(&c).unwrap();
    let mut rev = first.outcomes.clone();
    rev.reverse();
    let perm_ok = summarize(&rev).unwrap() == summarize(&first.outcomes).unwrap();
    checks.push(("summarize permutation invariance".into(), perm_ok));
    c.threads = Some(3);
    let again = run_experiment(&c).unwrap();
    let same = csv_body(&first) == csv_body(&again);
    checks.push(("byte-identical CSV bodies on rerun (1 vs 3 threads)".into(), same));

    let pass = checks.iter().all(|(_, ok)| *ok);
    let detail = checks
        .iter()
        .map(|(s, ok)| format!("{}{s}", if *ok { "" } else { "FAILED " }))
        .collect::<Vec<_>>()
        .join("; ");
    rep.line("7 (property suites)", pass, detail, t);
}

#[test]
fn acceptance() {
    let mut rep = Report { failures: Vec::new() };
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep);
    criterion_5(&mut rep);
    criterion_6(&mut rep);
    criterion_7(&mut rep);
    assert!(rep.failures.is_empty(), "failed: {}", rep.failures.join(", "));
}
