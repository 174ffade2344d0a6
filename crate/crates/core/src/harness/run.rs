use std::sync::atomic::{AtomicBool, Ordering};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::orthonormalize_columns;
use crate::diagnostics::{
    aips_check, amp_error, embedding_distortion, gaussian_norm_identity, neumann_validate, AipsReport,
    DistortionReport, NeumannReport, NormIdentityReport, AIPS_DEFAULT_C, AIPS_MAX_N,
};
use crate::error::{Error, Result};
use crate::harness::config::{Distribution, Experiment, ExperimentConfig, Resolved, SketchSpec};
use crate::harness::summary::{quantile_sorted, summarize, TrialSummary};
use crate::instances::{
    detect_events, gen_cs_adversarial, gen_lev_adversarial, gen_lower_bound_d1, gen_lower_bound_d2,
    gen_random_wellcond, CsAdversarialParams, EventReport, LevAdversarialParams,
};
use crate::regress::{guarantee_check, sketch_and_solve, GuaranteeCheck, RegressionInstance, ReportRow};
use crate::sketch::{rng_from_seed, trial_seeds, Family, LeverageScores, SeedStream, SketchOperator};

/// Truncation order for the Neumann series in the diagnostics suite.
pub const NEUMANN_K_MAX: usize = 12;
/// Random probes per distortion measurement in the diagnostics suite.
pub const DISTORTION_PROBES: usize = 32;
/// Monte-Carlo draws for the Gaussian norm identity in the diagnostics suite.
pub const NORM_IDENTITY_TRIALS: usize = 1000;

/// Result of one regression trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub row: ReportRow,
    pub check: GuaranteeCheck,
    /// Count-Sketch support events; set only for the Count-Sketch counterexample
    /// under a plain Count-Sketch.
    pub events: Option<EventReport>,
    /// `|x'_j − x*_j|` at the witness column, when one was detected.
    pub witness_err: Option<f64>,
    /// Which lower-bound distribution the trial drew from (`"d1"` or `"d2"`).
    pub instance: Option<String>,
}

/// Result of one diagnostics-suite trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticTrial {
    pub trial: u64,
    pub distortion: DistortionReport,
    pub amp_error: f64,
    pub aips: Option<AipsReport>,
    /// Error text when the series preconditions fail for this sketch.
    pub neumann: std::result::Result<NeumannReport, String>,
    pub norm_identity: NormIdentityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub trials_run: usize,
    pub median_certified_eps: f64,
    pub max_certified_eps: f64,
    pub max_amp_error: f64,
    pub aips_pass_rate: Option<f64>,
    pub max_aips_offdiag: Option<f64>,
    pub neumann_completed: usize,
    pub neumann_rejected: usize,
    pub max_norm_identity_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: Resolved,
    /// Completed regression trials in trial order.
    pub outcomes: Vec<TrialOutcome>,
    pub summary: Option<TrialSummary>,
    pub diagnostics: Vec<DiagnosticTrial>,
    pub diagnostics_summary: Option<DiagnosticsSummary>,
    /// Some trials were skipped because of an interrupt.
    pub truncated: bool,
}

/// Runs every trial of `cfg`. Equivalent to [`run_experiment_with`] without
/// an interrupt flag.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(cfg, None)
}

/// Runs the trials of `cfg` in parallel. Trials that have not started when
/// `cancel` becomes true are skipped and the result is marked truncated.
/// Any trial error, including an invariant violation, aborts the run.
pub fn run_experiment_with(cfg: &ExperimentConfig, cancel: Option<&AtomicBool>) -> Result<ExperimentResult> {
    let resolved = cfg.resolve()?;
    match resolved.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(|| execute(resolved, cancel)),
        None => execute(resolved, cancel),
    }
}

fn execute(cfg: Resolved, cancel: Option<&AtomicBool>) -> Result<ExperimentResult> {
    let stopped = || cancel.is_some_and(|c| c.load(Ordering::SeqCst));
    if cfg.experiment == Experiment::DiagnosticsSuite {
        let done: Vec<Option<DiagnosticTrial>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| {
                if stopped() {
                    Ok(None)
                } else {
                    diagnostic_trial(&cfg, t).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        let truncated = done.iter().any(Option::is_none);
        let diagnostics: Vec<DiagnosticTrial> = done.into_iter().flatten().collect();
        let diagnostics_summary = summarize_diagnostics(&diagnostics);
        return Ok(ExperimentResult {
            config: cfg,
            outcomes: Vec::new(),
            summary: None,
            diagnostics,
            diagnostics_summary,
            truncated,
        });
    }

    let ctx = Context::new(&cfg)?;
    let done: Vec<Option<TrialOutcome>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| if stopped() { Ok(None) } else { ctx.trial(t).map(Some) })
        .collect::<Result<_>>()?;
    let truncated = done.iter().any(Option::is_none);
    let outcomes: Vec<TrialOutcome> = done.into_iter().flatten().collect();
    let summary = if outcomes.is_empty() {
        None
    } else {
        Some(summarize(&outcomes)?)
    };
    Ok(ExperimentResult {
        config: cfg,
        outcomes,
        summary,
        diagnostics: Vec::new(),
        diagnostics_summary: None,
        truncated,
    })
}

/// Per-run state shared by all trials.
struct Context<'a> {
    cfg: &'a Resolved,
    shared: Option<RegressionInstance<f64>>,
    scores: Option<LeverageScores<f64>>,
    cs: Option<CsAdversarialParams>,
}

fn fit(inst: RegressionInstance<f64>, n_eff: usize) -> RegressionInstance<f64> {
    if inst.n() == n_eff {
        inst
    } else {
        inst.padded(n_eff)
    }
}

impl<'a> Context<'a> {
    fn new(cfg: &'a Resolved) -> Result<Self> {
        let mut ctx = Context {
            cfg,
            shared: None,
            scores: None,
            cs: None,
        };
        match cfg.experiment {
            Experiment::CsCounterexample => {
                let p = CsAdversarialParams::new(cfg.d, cfg.alpha.expect("resolved"), cfg.n)?;
                ctx.shared = Some(fit(gen_cs_adversarial(&p)?, cfg.n_eff));
                ctx.cs = Some(p);
            }
            Experiment::LevCounterexample => {
                let p = LevAdversarialParams::new(cfg.d, cfg.alpha.expect("resolved"), cfg.beta.expect("resolved"))?;
                ctx.shared = Some(fit(gen_lev_adversarial(&p)?, cfg.n_eff));
            }
            _ => {}
        }
        if let (Some(inst), true) = (&ctx.shared, cfg.sketch.uses(Family::LeverageScore)) {
            ctx.scores = Some(LeverageScores::from_matrix(&inst.a)?);
        }
        Ok(ctx)
    }

    fn trial(&self, t: u64) -> Result<TrialOutcome> {
        let cfg = self.cfg;
        let (inst_seed, sketch_seed) = trial_seeds(cfg.seed, t);
        let mut label = None;
        let owned;
        let inst = match &self.shared {
            Some(inst) => inst,
            None => {
                owned = fit(
                    match cfg.experiment {
                        Experiment::LinfPositive => gen_random_wellcond(cfg.n, cfg.d, cfg.noise, inst_seed)?,
                        Experiment::LowerBoundL2 => {
                            let (inst, which) = lower_bound_instance(cfg, inst_seed)?;
                            label = Some(which.to_string());
                            inst
                        }
                        _ => unreachable!("shared instance experiments"),
                    },
                    cfg.n_eff,
                );
                &owned
            }
        };
        let s = build_sketch(cfg, inst, self.scores.as_ref(), sketch_seed)?;
        let report = sketch_and_solve(inst, &s)?;
        report.check_invariants()?;
        let check = guarantee_check(&report, cfg.eps, cfg.slack_c)?;
        let (events, witness_err) = match (&self.cs, s.family()) {
            (Some(p), Family::CountSketch) => {
                let ev = detect_events(&s, p)?;
                let err = ev.witness_column.map(|j| {
                    let x = inst.x_star.as_ref().expect("instance carries its optimum");
                    (report.x_prime[j] - x[j]).abs()
                });
                (Some(ev), err)
            }
            _ => (None, None),
        };
        Ok(TrialOutcome {
            row: ReportRow::from_report(t, &report),
            check,
            events,
            witness_err,
            instance: label,
        })
    }
}

fn lower_bound_instance(cfg: &Resolved, seed: u64) -> Result<(RegressionInstance<f64>, &'static str)> {
    let dist = cfg.distribution.unwrap_or_default();
    let which = match dist {
        Distribution::D1 => "d1",
        Distribution::D2 => "d2",
        Distribution::Hard => {
            if rng_from_seed(seed).random::<bool>() {
                "d1"
            } else {
                "d2"
            }
        }
    };
    let seed = match dist {
        Distribution::Hard => SeedStream::new(seed, 1).seed(),
        _ => seed,
    };
    let inst = if which == "d1" {
        gen_lower_bound_d1(cfg.n, cfg.d, seed)?
    } else {
        gen_lower_bound_d2(cfg.n, cfg.d, seed)?
    };
    Ok((inst, which))
}

/// Builds the configured sketch for one trial. Factors of a composed sketch
/// take seeds from sub-streams `0, 1, …` of the trial's sketch seed,
/// outermost first.
pub fn build_sketch(
    cfg: &Resolved,
    inst: &RegressionInstance<f64>,
    scores: Option<&LeverageScores<f64>>,
    seed: u64,
) -> Result<SketchOperator<f64>> {
    let n = inst.n();
    match &cfg.sketch {
        SketchSpec::Single(Family::Gaussian) => SketchOperator::gaussian(cfg.m, n, seed),
        SketchSpec::Single(Family::Srht) => SketchOperator::srht(cfg.m, n, seed),
        SketchSpec::Single(Family::CountSketch) => {
            SketchOperator::countsketch(cfg.m, n, cfg.s.expect("resolved"), seed)
        }
        SketchSpec::Single(Family::LeverageScore) => match scores {
            Some(sc) => SketchOperator::leverage_from_scores(sc, cfg.m, seed),
            None => SketchOperator::leverage(&inst.a, cfg.m, seed),
        },
        SketchSpec::Single(Family::Composed) => Err(Error::config("sketch", "use composed:<factors>")),
        SketchSpec::Composed(children) => {
            let k = children.len();
            let mut acc: Option<SketchOperator<f64>> = None;
            for i in (0..k).rev() {
                let c = children[i];
                let input = if i + 1 < k { children[i + 1].m } else { n };
                let child_seed = SeedStream::new(seed, i as u64).seed();
                let op = match c.family {
                    Family::Gaussian => SketchOperator::gaussian(c.m, input, child_seed)?,
                    Family::Srht => SketchOperator::srht(c.m, input, child_seed)?,
                    Family::CountSketch => SketchOperator::countsketch(c.m, input, c.s.expect("parsed"), child_seed)?,
                    _ => return Err(Error::config("sketch", "unsupported composed factor")),
                };
                acc = Some(match acc {
                    None => op,
                    Some(inner) => SketchOperator::compose(op, inner)?,
                });
            }
            Ok(acc.expect("at least one factor"))
        }
    }
}

fn diagnostic_trial(cfg: &Resolved, t: u64) -> Result<DiagnosticTrial> {
    let (inst_seed, sketch_seed) = trial_seeds(cfg.seed, t);
    let inst = gen_random_wellcond(cfg.n_eff, cfg.d, cfg.noise, inst_seed)?;
    let basis = orthonormalize_columns(&inst.a)?;
    let s = build_sketch(cfg, &inst, None, sketch_seed)?;
    let distortion = embedding_distortion(&s, &basis, DISTORTION_PROBES, sketch_seed)?;
    let amp = amp_error(&s, &inst.a, &inst.b.to_matrix())?;
    let aips = if cfg.n_eff <= AIPS_MAX_N {
        Some(aips_check(&s, AIPS_DEFAULT_C)?)
    } else {
        None
    };
    let neumann = match neumann_validate(&s, &inst.a, NEUMANN_K_MAX) {
        Ok(r) => Ok(r),
        Err(e @ (Error::TNormTooLarge { .. } | Error::RankDeficient { .. })) => Err(e.to_string()),
        Err(e) => return Err(e),
    };
    let norm_identity = gaussian_norm_identity(&inst.a, 1.0, NORM_IDENTITY_TRIALS, inst_seed)?;
    Ok(DiagnosticTrial {
        trial: t,
        distortion,
        amp_error: amp,
        aips,
        neumann,
        norm_identity,
    })
}

fn summarize_diagnostics(trials: &[DiagnosticTrial]) -> Option<DiagnosticsSummary> {
    if trials.is_empty() {
        return None;
    }
    let mut eps: Vec<f64> = trials.iter().map(|t| t.distortion.certified_eps).collect();
    eps.sort_by(f64::total_cmp);
    let aips: Vec<&AipsReport> = trials.iter().filter_map(|t| t.aips.as_ref()).collect();
    let fmax = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
    Some(DiagnosticsSummary {
        trials_run: trials.len(),
        median_certified_eps: quantile_sorted(&eps, 0.5),
        max_certified_eps: eps[eps.len() - 1],
        max_amp_error: fmax(&mut trials.iter().map(|t| t.amp_error)),
        aips_pass_rate: (!aips.is_empty()).then(|| aips.iter().filter(|a| a.pass).count() as f64 / aips.len() as f64),
        max_aips_offdiag: (!aips.is_empty()).then(|| fmax(&mut aips.iter().map(|a| a.max_offdiag))),
        neumann_completed: trials.iter().filter(|t| t.neumann.is_ok()).count(),
        neumann_rejected: trials.iter().filter(|t| t.neumann.is_err()).count(),
        max_norm_identity_rel_err: fmax(&mut trials.iter().map(|t| t.norm_identity.rel_err)),
    })
}
