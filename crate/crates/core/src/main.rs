use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sketchreg::harness::{
    preset, preset_names, run_experiment_with, write_result, Distribution, Experiment, ExperimentConfig, Format,
    SketchSpec,
};
use sketchreg::instances::{
    gen_cs_adversarial, gen_lev_adversarial, gen_lower_bound_d1, gen_lower_bound_d2, gen_random_wellcond,
    write_instance, CsAdversarialParams, LevAdversarialParams,
};
use sketchreg::Error;

#[derive(Parser)]
#[command(name = "sketchreg", version, about = "Sketch-and-solve least-squares experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// l2 and l-infinity error of a sketched solve on benign random instances.
    LinfPositive(ExpArgs),
    /// Count-Sketch counterexample with witness-event detection.
    CsCounterexample(ExpArgs),
    /// Leverage-score sampling counterexample.
    LevCounterexample(ExpArgs),
    /// l2 error on the lower-bound instance distributions.
    LowerBoundL2(ExpArgs),
    /// Embedding, matrix-product, AIPS, Neumann and norm-identity checks.
    DiagnosticsSuite(ExpArgs),
    /// Same as diagnostics-suite.
    Diag(ExpArgs),
    /// Run a shipped preset.
    Run(RunArgs),
    /// List shipped presets.
    Presets,
    /// Write an instance as plain-text matrices plus a JSON sidecar.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
struct ExpArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    alpha: Option<usize>,
    #[arg(long)]
    beta: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "slack-C", default_value_t = 10.0)]
    slack_c: f64,
    /// Noise level of the random well-conditioned instances.
    #[arg(long)]
    noise: Option<f64>,
    /// Lower-bound distribution: d1, d2 or hard (a fair mixture).
    #[arg(long)]
    distribution: Option<Distribution>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// gaussian | srht | countsketch | leverage | composed:<f1>*<f2>*...
    #[arg(long)]
    sketch: Option<SketchSpec>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    threads: Option<usize>,
}

impl ExpArgs {
    fn into_config(self, experiment: Experiment) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            n: self.n,
            d: self.d,
            m: self.m,
            s: self.s,
            alpha: self.alpha,
            beta: self.beta,
            eps: self.eps,
            slack_c: self.slack_c,
            noise: self.noise,
            distribution: self.distribution,
            trials: self.trials,
            seed: self.seed,
            sketch: self.sketch,
            out: self.out,
            format: self.format,
            threads: self.threads,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    preset: String,
    /// Directory for `<preset>-<run>.<ext>` files; stdout when absent.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    /// cs-adversarial | lev-adversarial | lower-bound-d1 | lower-bound-d2 | random-wellcond
    family: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    alpha: Option<usize>,
    #[arg(long)]
    beta: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Path stem: writes `<stem>.A.txt`, `<stem>.b.txt`, `<stem>.xstar.txt`, `<stem>.json`.
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConfigInvalid { .. } | Error::InvalidParams(_) => 2,
        _ => 1,
    }
}

fn run_one(cfg: ExperimentConfig, out: Option<&Path>, cancel: &AtomicBool) -> Result<bool, Error> {
    let format = cfg.resolve()?.format;
    if let Some(path) = out {
        ensure_parent(path)?;
    }
    let result = run_experiment_with(&cfg, Some(cancel))?;
    write_result(&result, format, out)?;
    if let (Some(path), Some(s)) = (out, &result.summary) {
        eprintln!(
            "{}: {} trials, median linf_err {:.4e}, exceedance {:.3}{}",
            path.display(),
            s.trials_run,
            s.linf_err.median,
            s.exceedance_rate,
            s.event_rate.map(|r| format!(", event rate {r:.3}")).unwrap_or_default()
        );
    }
    Ok(result.truncated)
}

fn ensure_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => Ok(std::fs::create_dir_all(dir)?),
        _ => Ok(()),
    }
}

fn gen(args: GenArgs) -> Result<(), Error> {
    let need =
        |v: Option<usize>, name: &str| v.ok_or_else(|| Error::InvalidParams(format!("{} needs --{name}", args.family)));
    let (inst, params, seed) = match args.family.as_str() {
        "cs-adversarial" => {
            let alpha = need(args.alpha, "alpha")?;
            let n = args.n.unwrap_or((args.d + alpha).next_power_of_two());
            let p = CsAdversarialParams::new(args.d, alpha, n)?;
            (gen_cs_adversarial::<f64>(&p)?, serde_json::to_value(p)?, None)
        }
        "lev-adversarial" => {
            let p = LevAdversarialParams::new(args.d, need(args.alpha, "alpha")?, need(args.beta, "beta")?)?;
            let params = json!({"d": p.d, "alpha": p.alpha, "beta": p.beta, "blocks": p.blocks(),
                                "n": p.n(), "operative_regime": p.in_operative_regime()});
            (gen_lev_adversarial::<f64>(&p)?, params, None)
        }
        "lower-bound-d1" => {
            let n = need(args.n, "n")?;
            (
                gen_lower_bound_d1::<f64>(n, args.d, args.seed)?,
                json!({"n": n, "d": args.d}),
                Some(args.seed),
            )
        }
        "lower-bound-d2" => {
            let n = need(args.n, "n")?;
            (
                gen_lower_bound_d2::<f64>(n, args.d, args.seed)?,
                json!({"n": n, "d": args.d}),
                Some(args.seed),
            )
        }
        "random-wellcond" => {
            let n = need(args.n, "n")?;
            (
                gen_random_wellcond::<f64>(n, args.d, args.noise, args.seed)?,
                json!({"n": n, "d": args.d, "noise": args.noise}),
                Some(args.seed),
            )
        }
        other => return Err(Error::InvalidParams(format!("unknown instance family '{other}'"))),
    };
    ensure_parent(&args.out)?;
    let meta = write_instance(&inst, params, seed, &args.out)?;
    println!("{}", serde_json::to_string(&meta)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let flag = Arc::clone(&cancel);
        // Best effort: without a handler an interrupt simply kills the process.
        let _ = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst));
    }

    let outcome = match cli.command {
        Command::LinfPositive(a) => experiment(a, Experiment::LinfPositive, &cancel),
        Command::CsCounterexample(a) => experiment(a, Experiment::CsCounterexample, &cancel),
        Command::LevCounterexample(a) => experiment(a, Experiment::LevCounterexample, &cancel),
        Command::LowerBoundL2(a) => experiment(a, Experiment::LowerBoundL2, &cancel),
        Command::DiagnosticsSuite(a) | Command::Diag(a) => experiment(a, Experiment::DiagnosticsSuite, &cancel),
        Command::Run(a) => run_preset(a, &cancel),
        Command::Presets => {
            for name in preset_names() {
                match preset(name) {
                    Ok(p) => println!("{name}\t{}", p.description),
                    Err(e) => println!("{name}\t<{e}>"),
                }
            }
            Ok(false)
        }
        Command::Gen(a) => gen(a).map(|_| false),
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("interrupted; partial results written");
            ExitCode::from(130)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn experiment(args: ExpArgs, exp: Experiment, cancel: &AtomicBool) -> Result<bool, Error> {
    let out = args.out.clone();
    run_one(args.into_config(exp), out.as_deref(), cancel)
}

fn run_preset(args: RunArgs, cancel: &AtomicBool) -> Result<bool, Error> {
    let p = preset(&args.preset)?;
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    for run in p.runs {
        let mut cfg = run.config;
        if args.format.is_some() {
            cfg.format = args.format;
        }
        if args.threads.is_some() {
            cfg.threads = args.threads;
        }
        let format = cfg.resolve()?.format;
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "jsonl",
        };
        let out = args
            .out_dir
            .as_ref()
            .map(|d| d.join(format!("{}-{}.{ext}", p.name, run.name)));
        if run_one(cfg, out.as_deref(), cancel)? {
            return Ok(true);
        }
    }
    Ok(false)
}
