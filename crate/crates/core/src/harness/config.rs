use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{CsAdversarialParams, LevAdversarialParams};
use crate::sketch::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LinfPositive,
    CsCounterexample,
    LevCounterexample,
    LowerBoundL2,
    DiagnosticsSuite,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::LinfPositive,
        Experiment::CsCounterexample,
        Experiment::LevCounterexample,
        Experiment::LowerBoundL2,
        Experiment::DiagnosticsSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::LinfPositive => "linf-positive",
            Experiment::CsCounterexample => "cs-counterexample",
            Experiment::LevCounterexample => "lev-counterexample",
            Experiment::LowerBoundL2 => "lower-bound-l2",
            Experiment::DiagnosticsSuite => "diagnostics-suite",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::config("experiment", format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::config("format", format!("expected csv or json, got '{s}'"))),
        }
    }
}

/// Instance distribution for `lower-bound-l2`. `Hard` flips a fair coin per
/// trial between the other two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    D1,
    D2,
    Hard,
}

impl FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d1" => Ok(Distribution::D1),
            "d2" => Ok(Distribution::D2),
            "hard" => Ok(Distribution::Hard),
            _ => Err(Error::config(
                "distribution",
                format!("expected d1, d2 or hard, got '{s}'"),
            )),
        }
    }
}

/// One factor of a composed sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChildSpec {
    pub family: Family,
    pub m: usize,
    pub s: Option<usize>,
}

/// Sketch selection as written on the command line:
/// `gaussian`, `srht`, `countsketch`, `leverage`, or
/// `composed:gaussian(128)*srht(512)*countsketch(2048,4)` (outermost first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SketchSpec {
    Single(Family),
    Composed(Vec<ChildSpec>),
}

impl SketchSpec {
    /// Family that touches the instance rows directly.
    pub fn innermost(&self) -> Family {
        match self {
            SketchSpec::Single(f) => *f,
            SketchSpec::Composed(c) => c.last().expect("nonempty").family,
        }
    }

    pub fn uses(&self, family: Family) -> bool {
        match self {
            SketchSpec::Single(f) => *f == family,
            SketchSpec::Composed(c) => c.iter().any(|x| x.family == family),
        }
    }
}

fn family_from_name(name: &str) -> Result<Family> {
    match name {
        "gaussian" => Ok(Family::Gaussian),
        "srht" => Ok(Family::Srht),
        "countsketch" => Ok(Family::CountSketch),
        "leverage" => Ok(Family::LeverageScore),
        _ => Err(Error::config("sketch", format!("unknown sketch family '{name}'"))),
    }
}

fn parse_child(text: &str) -> Result<ChildSpec> {
    let bad = || Error::config("sketch", format!("cannot parse composed factor '{text}'"));
    let (name, rest) = text.split_once('(').ok_or_else(bad)?;
    let args = rest.strip_suffix(')').ok_or_else(bad)?;
    let family = family_from_name(name.trim())?;
    let nums: Vec<usize> = args
        .split(',')
        .map(|a| a.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match (family, nums.as_slice()) {
        (Family::CountSketch, [m, s]) => Ok(ChildSpec {
            family,
            m: *m,
            s: Some(*s),
        }),
        (Family::CountSketch, _) => Err(Error::config("sketch", "countsketch factor needs (m,s)")),
        (Family::LeverageScore, _) => Err(Error::config("sketch", "leverage sampling cannot be a composed factor")),
        (_, [m]) => Ok(ChildSpec { family, m: *m, s: None }),
        _ => Err(bad()),
    }
}

impl FromStr for SketchSpec {
    type Err = Error;
    fn from_str(text: &str) -> Result<Self> {
        if let Some(chain) = text.strip_prefix("composed:") {
            let children = chain.split('*').map(parse_child).collect::<Result<Vec<_>>>()?;
            if children.is_empty() {
                return Err(Error::config("sketch", "composed sketch has no factors"));
            }
            for c in &children {
                if c.m == 0 || c.s == Some(0) {
                    return Err(Error::config("sketch", "composed factors need positive sizes"));
                }
            }
            return Ok(SketchSpec::Composed(children));
        }
        family_from_name(text).map(SketchSpec::Single)
    }
}

impl fmt::Display for SketchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SketchSpec::Single(fam) => f.write_str(fam.name()),
            SketchSpec::Composed(children) => {
                f.write_str("composed:")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    match c.s {
                        Some(s) => write!(f, "{}({},{})", c.family.name(), c.m, s)?,
                        None => write!(f, "{}({})", c.family.name(), c.m)?,
                    }
                }
                Ok(())
            }
        }
    }
}

impl TryFrom<String> for SketchSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SketchSpec> for String {
    fn from(s: SketchSpec) -> String {
        s.to_string()
    }
}

/// Experiment description as read from a preset file or the command line.
/// Unset optional fields take per-experiment defaults in [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(rename = "slack_C", default = "default_slack")]
    pub slack_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Distribution>,
    pub trials: usize,
    #[serde(default, alias = "master_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sketch: Option<SketchSpec>,
    #[serde(default, alias = "out_path", skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Worker threads; `None` uses rayon's default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Default slack constant in the guarantee check.
pub const DEFAULT_SLACK_C: f64 = 10.0;

fn default_slack() -> f64 {
    DEFAULT_SLACK_C
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            n: None,
            d: None,
            m: None,
            s: None,
            alpha: None,
            beta: None,
            eps: None,
            slack_c: DEFAULT_SLACK_C,
            noise: None,
            distribution: None,
            trials: 1,
            seed: 0,
            sketch: None,
            out: None,
            format: None,
            threads: None,
        }
    }

    /// Checks applicability and ranges and fills defaults.
    pub fn resolve(&self) -> Result<Resolved> {
        use Experiment::*;
        let exp = self.experiment;
        let forbid = |field: &'static str, present: bool| -> Result<()> {
            if present {
                Err(Error::config(field, format!("not applicable to {exp}")))
            } else {
                Ok(())
            }
        };
        let need = |field: &'static str, v: Option<usize>| -> Result<usize> {
            match v {
                Some(0) => Err(Error::config(field, "must be at least 1")),
                Some(x) => Ok(x),
                None => Err(Error::config(field, format!("required for {exp}"))),
            }
        };

        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        if !(self.slack_c > 0.0) || !self.slack_c.is_finite() {
            return Err(Error::config("slack_C", "must be a positive number"));
        }
        forbid(
            "alpha",
            self.alpha.is_some() && !matches!(exp, CsCounterexample | LevCounterexample),
        )?;
        forbid("beta", self.beta.is_some() && exp != LevCounterexample)?;
        forbid(
            "noise",
            self.noise.is_some() && !matches!(exp, LinfPositive | DiagnosticsSuite),
        )?;
        forbid("distribution", self.distribution.is_some() && exp != LowerBoundL2)?;

        let sketch = match &self.sketch {
            Some(s) => s.clone(),
            None => SketchSpec::Single(match exp {
                CsCounterexample => Family::CountSketch,
                LevCounterexample => Family::LeverageScore,
                DiagnosticsSuite => Family::Srht,
                _ => Family::Gaussian,
            }),
        };
        if exp == DiagnosticsSuite && sketch.uses(Family::LeverageScore) {
            return Err(Error::config("sketch", "leverage sampling needs a regression instance"));
        }

        let d = need("d", self.d)?;
        let m = match (&sketch, self.m) {
            (SketchSpec::Composed(c), Some(m)) if m != c[0].m => {
                return Err(Error::config("m", format!("composed sketch outputs {} rows", c[0].m)))
            }
            (SketchSpec::Composed(c), _) => c[0].m,
            (_, m) => need("m", m)?,
        };
        let s = match (&sketch, self.s) {
            (SketchSpec::Single(Family::CountSketch), s) => {
                let s = need("s", s)?;
                if s > m {
                    return Err(Error::config("s", format!("s = {s} exceeds m = {m}")));
                }
                Some(s)
            }
            (_, Some(_)) => {
                return Err(Error::config("s", "only applies to a plain countsketch"));
            }
            _ => None,
        };

        let mut alpha = None;
        let mut beta = None;
        let n = match exp {
            CsCounterexample => {
                let a = need("alpha", self.alpha)?;
                alpha = Some(a);
                let n = self.n.unwrap_or_else(|| m.max(d + a).next_power_of_two());
                CsAdversarialParams::new(d, a, n).map_err(|e| Error::config("alpha", e.to_string()))?;
                n
            }
            LevCounterexample => {
                let a = need("alpha", self.alpha)?;
                let b = need("beta", self.beta)?;
                alpha = Some(a);
                beta = Some(b);
                let p = LevAdversarialParams::new(d, a, b).map_err(|e| Error::config("beta", e.to_string()))?;
                if let Some(n) = self.n {
                    if n != p.n() {
                        return Err(Error::config("n", format!("fixed at d(α(d−1)+1) = {}", p.n())));
                    }
                }
                p.n()
            }
            LowerBoundL2 => {
                let n = need("n", self.n)?;
                if n <= d {
                    return Err(Error::config("n", "must exceed d"));
                }
                n
            }
            _ => {
                let n = need("n", self.n)?;
                if n < d {
                    return Err(Error::config("n", "must be at least d"));
                }
                n
            }
        };
        // SRHT as the innermost factor pads the instance to a power of two.
        let n_eff = if sketch.innermost() == Family::Srht {
            n.next_power_of_two()
        } else {
            n
        };
        let inner_m = match &sketch {
            SketchSpec::Composed(c) => c.last().expect("nonempty").m,
            SketchSpec::Single(_) => m,
        };
        if inner_m > n_eff {
            return Err(Error::config("m", format!("sketch rows {inner_m} exceed n = {n_eff}")));
        }
        if let SketchSpec::Composed(c) = &sketch {
            for (outer, inner) in c.iter().zip(&c[1..]) {
                if outer.m > inner.m {
                    return Err(Error::config("sketch", "factor output sizes must not grow inward"));
                }
                if outer.family == Family::Srht && !inner.m.is_power_of_two() {
                    return Err(Error::config("sketch", "an srht factor needs a power-of-two input"));
                }
            }
            for c in c {
                if let Some(s) = c.s {
                    if s > c.m {
                        return Err(Error::config("sketch", "countsketch factor has s > m"));
                    }
                }
            }
        }
        let eps = match self.eps {
            Some(e) if !(e > 0.0) || !e.is_finite() => return Err(Error::config("eps", "must be a positive number")),
            Some(e) => e,
            None => (d as f64 / m as f64).sqrt(),
        };
        let noise = self.noise.unwrap_or(1.0);
        if !(noise >= 0.0) || !noise.is_finite() {
            return Err(Error::config("noise", "must be finite and >= 0"));
        }
        let format = self.format.unwrap_or(if exp == DiagnosticsSuite {
            Format::Json
        } else {
            Format::Csv
        });
        if exp == DiagnosticsSuite && format == Format::Csv {
            return Err(Error::config("format", "diagnostics-suite writes JSON lines only"));
        }
        Ok(Resolved {
            experiment: exp,
            n,
            n_eff,
            d,
            m,
            s,
            alpha,
            beta,
            eps,
            slack_c: self.slack_c,
            noise,
            distribution: (exp == LowerBoundL2).then(|| self.distribution.unwrap_or_default()),
            trials: self.trials,
            seed: self.seed,
            sketch,
            format,
            threads: self.threads,
        })
    }
}

/// Validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub experiment: Experiment,
    pub n: usize,
    /// Row count after padding for an SRHT.
    pub n_eff: usize,
    pub d: usize,
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<usize>,
    pub eps: f64,
    #[serde(rename = "slack_C")]
    pub slack_c: f64,
    pub noise: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Distribution>,
    pub trials: usize,
    pub seed: u64,
    pub sketch: SketchSpec,
    pub format: Format,
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(exp: Experiment) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(exp);
        c.n = Some(256);
        c.d = Some(8);
        c.m = Some(64);
        c
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::ConfigInvalid { field, .. } => field,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn sketch_spec_round_trip() {
        for text in [
            "gaussian",
            "srht",
            "countsketch",
            "leverage",
            "composed:gaussian(128)*srht(512)*countsketch(2048,4)",
        ] {
            let s: SketchSpec = text.parse().unwrap();
            assert_eq!(s.to_string(), text);
        }
        let s: SketchSpec = "composed:gaussian(128)*srht(512)*countsketch(2048,4)".parse().unwrap();
        assert_eq!(s.innermost(), Family::CountSketch);
        assert!(s.uses(Family::Srht));
        for bad in [
            "gauss",
            "composed:",
            "composed:srht",
            "composed:countsketch(8)",
            "composed:leverage(4)",
            "composed:gaussian(0)",
        ] {
            assert!(bad.parse::<SketchSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn defaults() {
        let r = base(Experiment::LinfPositive).resolve().unwrap();
        assert_eq!(r.sketch, SketchSpec::Single(Family::Gaussian));
        assert!((r.eps - 0.125f64.sqrt()).abs() < 1e-15);
        assert_eq!((r.format, r.noise, r.n_eff), (Format::Csv, 1.0, 256));

        let mut c = ExperimentConfig::new(Experiment::CsCounterexample);
        c.d = Some(256);
        c.m = Some(4096);
        c.s = Some(4);
        c.alpha = Some(4);
        let r = c.resolve().unwrap();
        assert_eq!(r.n, 4096);

        let mut c = ExperimentConfig::new(Experiment::LevCounterexample);
        (c.d, c.m, c.alpha, c.beta) = (Some(64), Some(256), Some(64), Some(8));
        c.sketch = Some(SketchSpec::Single(Family::Srht));
        let r = c.resolve().unwrap();
        assert_eq!((r.n, r.n_eff), (258112, 262144));

        let r = base(Experiment::DiagnosticsSuite).resolve().unwrap();
        assert_eq!(r.format, Format::Json);
    }

    #[test]
    fn field_level_errors() {
        let mut c = base(Experiment::LinfPositive);
        c.trials = 0;
        assert_eq!(field_of(c.resolve().unwrap_err()), "trials");

        let mut c = base(Experiment::LinfPositive);
        c.s = Some(2);
        assert_eq!(field_of(c.resolve().unwrap_err()), "s");

        let mut c = base(Experiment::LinfPositive);
        c.sketch = Some(SketchSpec::Single(Family::CountSketch));
        assert_eq!(field_of(c.resolve().unwrap_err()), "s");

        let mut c = base(Experiment::LinfPositive);
        c.alpha = Some(2);
        assert_eq!(field_of(c.resolve().unwrap_err()), "alpha");

        let mut c = base(Experiment::LinfPositive);
        c.m = Some(512);
        assert_eq!(field_of(c.resolve().unwrap_err()), "m");

        let mut c = base(Experiment::LinfPositive);
        c.d = None;
        assert_eq!(field_of(c.resolve().unwrap_err()), "d");

        let mut c = base(Experiment::LinfPositive);
        c.eps = Some(-1.0);
        assert_eq!(field_of(c.resolve().unwrap_err()), "eps");

        let mut c = base(Experiment::LinfPositive);
        c.slack_c = 0.0;
        assert_eq!(field_of(c.resolve().unwrap_err()), "slack_C");

        let mut c = base(Experiment::LinfPositive);
        c.sketch = Some("composed:gaussian(32)*srht(64)".parse().unwrap());
        assert_eq!(field_of(c.resolve().unwrap_err()), "m");
        c.m = None;
        assert_eq!(c.resolve().unwrap().m, 32);
        c.sketch = Some("composed:srht(32)*gaussian(48)".parse().unwrap());
        assert_eq!(field_of(c.resolve().unwrap_err()), "sketch");

        let mut c = base(Experiment::DiagnosticsSuite);
        c.format = Some(Format::Csv);
        assert_eq!(field_of(c.resolve().unwrap_err()), "format");

        let mut c = base(Experiment::LowerBoundL2);
        c.distribution = Some(Distribution::Hard);
        assert!(c.resolve().is_ok());
        let mut c = base(Experiment::LinfPositive);
        c.distribution = Some(Distribution::Hard);
        assert_eq!(field_of(c.resolve().unwrap_err()), "distribution");
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            experiment = "cs-counterexample"
            d = 256
            m = 4096
            s = 4
            alpha = 4
            slack_C = 1.0
            trials = 200
            seed = 7
            sketch = "countsketch"
        "#;
        let c: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(c.experiment, Experiment::CsCounterexample);
        assert_eq!(c.sketch, Some(SketchSpec::Single(Family::CountSketch)));
        let back: ExperimentConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let aliased: ExperimentConfig =
            toml::from_str("experiment = \"linf-positive\"\ntrials = 1\nmaster_seed = 5\nout_path = \"r.csv\"")
                .unwrap();
        assert_eq!((aliased.seed, aliased.slack_c), (5, DEFAULT_SLACK_C));
        assert_eq!(aliased.out.as_deref(), Some(std::path::Path::new("r.csv")));
        assert!(toml::from_str::<ExperimentConfig>("experiment = \"x\"\ntrials = 1").is_err());
        assert!(toml::from_str::<ExperimentConfig>("experiment = \"linf-positive\"\ntrials = 1\nbogus = 2").is_err());
    }
}
