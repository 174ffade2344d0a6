//! Regression instance families: the Count-Sketch and leverage-score
//! counterexamples, the two lower-bound distributions, and a benign random
//! baseline. Every generator is a pure function of its parameters and seed.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::{io, orthonormalize_columns, Matrix, Svd, Vector};
use crate::error::{Error, Result};
use crate::regress::RegressionInstance;
use crate::scalar::Real;
use crate::sketch::{rng_from_seed, SketchOperator};

fn normal<T: Real>(rng: &mut impl Rng) -> T {
    T::of(rng.sample::<f64, _>(StandardNormal))
}

/// `A = [I_d; 0]`, `b` = `1/√d` on the first `d` rows, `1/√α` on the next `α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsAdversarialParams {
    pub d: usize,
    pub alpha: usize,
    pub n: usize,
}

impl CsAdversarialParams {
    pub fn new(d: usize, alpha: usize, n: usize) -> Result<Self> {
        let p = Self { d, alpha, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 1 || self.alpha >= self.d {
            return Err(Error::InvalidParams(format!(
                "need 1 <= alpha < d, got alpha = {}, d = {}",
                self.alpha, self.d
            )));
        }
        if self.n < self.d + self.alpha {
            return Err(Error::InvalidParams(format!(
                "need n >= d + alpha = {}, got n = {}",
                self.d + self.alpha,
                self.n
            )));
        }
        Ok(())
    }
}

pub fn gen_cs_adversarial<T: Real>(p: &CsAdversarialParams) -> Result<RegressionInstance<T>> {
    p.validate()?;
    let CsAdversarialParams { d, alpha, n } = *p;
    let a = Matrix::from_fn(n, d, |i, j| if i == j { T::one() } else { T::zero() });
    let top = T::one() / T::of_usize(d).sqrt();
    let next = T::one() / T::of_usize(alpha).sqrt();
    let b = Vector::new(
        (0..n)
            .map(|i| {
                if i < d {
                    top
                } else if i < d + alpha {
                    next
                } else {
                    T::zero()
                }
            })
            .collect(),
    )?;
    let label = format!("cs-adversarial(d={d},alpha={alpha},n={n})");
    Ok(RegressionInstance::new(a, b, label)?
        .with_optimum(Vector::filled(d, top))?
        .with_pinv_norm(T::one()))
}

/// Column-normalized stack of `(1/√d)·I_d` over `L = α(d−1)` copies of
/// `(1/√(αd))·I_d`; `b` = `1/√d` on the first `d` rows, `1/√β` on the next `β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevAdversarialParams {
    pub d: usize,
    pub alpha: usize,
    pub beta: usize,
}

impl LevAdversarialParams {
    pub fn new(d: usize, alpha: usize, beta: usize) -> Result<Self> {
        let p = Self { d, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.alpha < 1 {
            return Err(Error::InvalidParams(format!(
                "need d >= 2 and alpha >= 1, got d = {}, alpha = {}",
                self.d, self.alpha
            )));
        }
        if self.beta < 1 || self.beta >= self.d {
            return Err(Error::InvalidParams(format!(
                "need 1 <= beta < d, got beta = {}, d = {}",
                self.beta, self.d
            )));
        }
        Ok(())
    }

    /// Number of scaled identity blocks, `α(d−1)`.
    pub fn blocks(&self) -> usize {
        self.alpha * (self.d - 1)
    }

    pub fn n(&self) -> usize {
        self.d * (self.blocks() + 1)
    }

    /// `αβ ≥ d`, the regime where the construction separates leverage
    /// sampling from oblivious sketches.
    pub fn in_operative_regime(&self) -> bool {
        self.alpha * self.beta >= self.d
    }
}

pub fn gen_lev_adversarial<T: Real>(p: &LevAdversarialParams) -> Result<RegressionInstance<T>> {
    p.validate()?;
    let LevAdversarialParams { d, alpha, beta } = *p;
    let n = p.n();
    let top = T::one() / T::of_usize(d).sqrt();
    let tail = T::one() / T::of_usize(alpha * d).sqrt();
    let a = Matrix::from_fn(n, d, |i, j| {
        if i % d != j {
            T::zero()
        } else if i < d {
            top
        } else {
            tail
        }
    });
    let spike = T::one() / T::of_usize(beta).sqrt();
    let b = Vector::new(
        (0..n)
            .map(|i| {
                if i < d {
                    top
                } else if i < d + beta {
                    spike
                } else {
                    T::zero()
                }
            })
            .collect(),
    )?;
    let label = format!("lev-adversarial(d={d},alpha={alpha},beta={beta})");
    Ok(RegressionInstance::new(a, b, label)?.solved()?.with_pinv_norm(T::one()))
}

/// `A` = `d` Haar-distributed orthonormal columns, `b` a further unit
/// column orthogonal to them. `x* = 0`, residual 1.
pub fn gen_lower_bound_d1<T: Real>(n: usize, d: usize, seed: u64) -> Result<RegressionInstance<T>> {
    if d == 0 || n < d + 1 {
        return Err(Error::InvalidParams(format!(
            "need n >= d + 1 >= 2, got n = {n}, d = {d}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let g = Matrix::from_fn(n, d + 1, |_, _| normal::<T>(&mut rng));
    let q = orthonormalize_columns(&g)?;
    let a = Matrix::from_fn(n, d, |i, j| q[(i, j)]);
    let b = q.col(d);
    RegressionInstance::new(a, b, format!("lower-bound-d1(n={n},d={d})"))?
        .with_optimum(Vector::zeros(d))
        .map(|inst| inst.with_pinv_norm(T::one()))
}

/// `A = [I_d; 0]` and `b` a uniformly random unit vector; `x*` is the top
/// `d` coordinates of `b`.
pub fn gen_lower_bound_d2<T: Real>(n: usize, d: usize, seed: u64) -> Result<RegressionInstance<T>> {
    if d == 0 || n < d {
        return Err(Error::InvalidParams(format!("need n >= d >= 1, got n = {n}, d = {d}")));
    }
    let mut rng = rng_from_seed(seed);
    let g: Vec<T> = (0..n).map(|_| normal::<T>(&mut rng)).collect();
    let norm = Vector::from_raw(g.clone()).norm2();
    let b = Vector::new(g.into_iter().map(|x| x / norm).collect())?;
    let a = Matrix::from_fn(n, d, |i, j| if i == j { T::one() } else { T::zero() });
    let x = Vector::new(b.as_slice()[..d].to_vec())?;
    Ok(RegressionInstance::new(a, b, format!("lower-bound-d2(n={n},d={d})"))?
        .with_optimum(x)?
        .with_pinv_norm(T::one()))
}

/// Gaussian design, planted Gaussian `x₀`, and `b = A x₀ + noise · g`.
/// Draw order: `A` row-major, then `x₀`, then `g`.
pub fn gen_random_wellcond<T: Real>(n: usize, d: usize, noise: T, seed: u64) -> Result<RegressionInstance<T>> {
    if d == 0 || n < d {
        return Err(Error::InvalidParams(format!("need n >= d >= 1, got n = {n}, d = {d}")));
    }
    if !(noise >= T::zero()) || !noise.is_finite() {
        return Err(Error::InvalidParams(format!(
            "noise must be finite and >= 0, got {noise}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let a = Matrix::from_fn(n, d, |_, _| normal::<T>(&mut rng));
    let x0 = Vector::new((0..d).map(|_| normal::<T>(&mut rng)).collect())?;
    let mut b = a.matvec(&x0)?.into_vec();
    for bi in b.iter_mut() {
        *bi += noise * normal::<T>(&mut rng);
    }
    let b = Vector::new(b)?;
    let svd = Svd::new(&a)?;
    if svd.rank() < d {
        return Err(Error::RankDeficient {
            rank: svd.rank(),
            required: d,
        });
    }
    let x = svd.solve(&b)?;
    let sigma_min = svd.singular_values()[d - 1];
    Ok(RegressionInstance::new(a, b, format!("random-wellcond(n={n},d={d})"))?
        .with_optimum(x)?
        .with_pinv_norm(T::one() / sigma_min))
}

/// Count-Sketch support configuration relative to the Count-Sketch
/// counterexample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventReport {
    /// First column `j < d` for which both events hold.
    pub witness_column: Option<usize>,
    /// Some column `j < d` has support disjoint from every other of the first `d` columns.
    pub event1: bool,
    /// Some column `j < d` meets exactly one of columns `d..d+α`, in exactly one row,
    /// and misses the rest.
    pub event2: bool,
    /// Row shared by the witness column and its partner.
    pub intersect_row: Option<usize>,
    /// Product of the two entry signs in `intersect_row`; the sketched
    /// solution moves by `intersect_sign / (s√α)` at the witness column.
    pub intersect_sign: Option<i8>,
}

/// Per-column evaluation of both events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnEvents {
    pub event1: bool,
    pub event2: bool,
    /// `(row, sign product)` of the single intersection when event II holds.
    pub intersection: Option<(usize, i8)>,
}

fn cs_columns<'a, T: Real>(s: &'a SketchOperator<T>, p: &CsAdversarialParams) -> Result<Vec<(&'a [u32], &'a [bool])>> {
    p.validate()?;
    if s.n() < p.d + p.alpha {
        return Err(Error::DimensionMismatch {
            context: "event detection",
            expected: p.d + p.alpha,
            got: s.n(),
        });
    }
    (0..p.d + p.alpha)
        .map(|j| {
            s.countsketch_column(j)
                .ok_or_else(|| Error::InvalidParams("event detection needs a Count-Sketch".into()))
        })
        .collect()
}

fn events_for(cols: &[(&[u32], &[bool])], hits: &[u16], d: usize, j: usize) -> ColumnEvents {
    let (rows_j, neg_j) = cols[j];
    let event1 = rows_j.iter().all(|&r| hits[r as usize] == 1);
    let mut partners = 0;
    let mut clean = true;
    let mut intersection = None;
    for &(rows_k, neg_k) in &cols[d..] {
        let mut shared = Vec::new();
        for (a, &r) in rows_j.iter().enumerate() {
            if let Some(b) = rows_k.iter().position(|&q| q == r) {
                shared.push((r as usize, if neg_j[a] == neg_k[b] { 1i8 } else { -1 }));
            }
        }
        match shared.len() {
            0 => {}
            1 => {
                partners += 1;
                intersection = Some(shared[0]);
            }
            _ => clean = false,
        }
    }
    let event2 = clean && partners == 1;
    ColumnEvents {
        event1,
        event2,
        intersection: if event2 { intersection } else { None },
    }
}

fn first_block_hits(cols: &[(&[u32], &[bool])], d: usize, m: usize) -> Vec<u16> {
    let mut hits = vec![0u16; m];
    for (rows, _) in &cols[..d] {
        for &r in *rows {
            hits[r as usize] += 1;
        }
    }
    hits
}

/// Events I and II for column `j` alone.
pub fn column_events<T: Real>(s: &SketchOperator<T>, p: &CsAdversarialParams, j: usize) -> Result<ColumnEvents> {
    if j >= p.d {
        return Err(Error::InvalidParams(format!(
            "column {j} is outside the first d = {}",
            p.d
        )));
    }
    let cols = cs_columns(s, p)?;
    let hits = first_block_hits(&cols, p.d, s.m());
    Ok(events_for(&cols, &hits, p.d, j))
}

/// Scans the first `d` columns in ascending order and reports the first one
/// satisfying both events.
pub fn detect_events<T: Real>(s: &SketchOperator<T>, p: &CsAdversarialParams) -> Result<EventReport> {
    let cols = cs_columns(s, p)?;
    let hits = first_block_hits(&cols, p.d, s.m());
    let mut report = EventReport {
        witness_column: None,
        event1: false,
        event2: false,
        intersect_row: None,
        intersect_sign: None,
    };
    for j in 0..p.d {
        let ev = events_for(&cols, &hits, p.d, j);
        report.event1 |= ev.event1;
        report.event2 |= ev.event2;
        if ev.event1 && ev.event2 && report.witness_column.is_none() {
            let (row, sign) = ev.intersection.expect("event II records its row");
            report.witness_column = Some(j);
            report.intersect_row = Some(row);
            report.intersect_sign = Some(sign);
        }
    }
    Ok(report)
}

/// JSON sidecar written next to an instance's matrix files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub label: String,
    pub n: usize,
    pub d: usize,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub residual_norm: Option<f64>,
    pub pinv_norm: Option<f64>,
}

/// Paths written by [`write_instance`] for a given stem.
pub fn instance_paths(stem: &Path) -> [PathBuf; 4] {
    let with = |suffix: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    [with(".A.txt"), with(".b.txt"), with(".xstar.txt"), with(".json")]
}

/// Writes `A`, `b`, (`x*` when known) in the plain-text matrix format and
/// the JSON sidecar.
pub fn write_instance<T: Real>(
    inst: &RegressionInstance<T>,
    params: serde_json::Value,
    seed: Option<u64>,
    stem: &Path,
) -> Result<InstanceMeta> {
    let [pa, pb, px, pj] = instance_paths(stem);
    fs::write(&pa, io::format_matrix(&inst.a))?;
    fs::write(&pb, io::format_matrix(&inst.b.to_matrix()))?;
    if let Some(x) = &inst.x_star {
        fs::write(&px, io::format_matrix(&x.to_matrix()))?;
    }
    let meta = InstanceMeta {
        label: inst.label.clone(),
        n: inst.n(),
        d: inst.d(),
        params,
        seed,
        residual_norm: inst.residual_norm.map(Real::as_f64),
        pinv_norm: inst.pinv_norm.map(Real::as_f64),
    };
    fs::write(&pj, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(meta)
}

/// Reads an instance written by [`write_instance`]; the optimum, when
/// present, is re-validated.
pub fn read_instance<T: Real>(stem: &Path) -> Result<(RegressionInstance<T>, InstanceMeta)> {
    let [pa, pb, px, pj] = instance_paths(stem);
    let meta: InstanceMeta = serde_json::from_str(&fs::read_to_string(&pj)?)?;
    let a = io::parse_matrix::<T>(&fs::read_to_string(&pa)?)?;
    let b: Vector<T> = io::parse_matrix::<T>(&fs::read_to_string(&pb)?)?.into();
    let mut inst = RegressionInstance::new(a, b, meta.label.clone())?;
    if px.exists() {
        let x: Vector<T> = io::parse_matrix::<T>(&fs::read_to_string(&px)?)?.into();
        inst = inst.with_optimum(x)?;
    }
    inst.pinv_norm = meta.pinv_norm.map(T::of);
    Ok((inst, meta))
}
