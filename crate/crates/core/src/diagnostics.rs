//! Numerical checks of the structural facts behind the sketching guarantees.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{operator_norm, pinv, singular_values, Matrix, Svd, Vector};
use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Real};
use crate::sketch::{rng_from_seed, SeedStream, SketchOperator};

/// Largest `n` for which [`aips_check`] materializes a sketch.
pub const AIPS_MAX_N: usize = 1 << 14;

/// Default constant in the AIPS bound `c·√(ln n)/√m`.
pub const AIPS_DEFAULT_C: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// `max ‖S B y‖/‖y‖ − 1` over the probe set.
    pub max_overshoot: f64,
    /// `1 − min ‖S B y‖/‖y‖` over the probe set.
    pub max_undershoot: f64,
    pub probes: usize,
    /// `σ_max(SB) − 1`.
    pub exact_overshoot: f64,
    /// `1 − σ_min(SB)`, with `σ_min = 0` when `m < k`.
    pub exact_undershoot: f64,
    /// Larger of the two exact distortions, floored at 0.
    pub certified_eps: f64,
}

fn check_orthonormal<T: Real>(basis: &Matrix<T>) -> Result<()> {
    let k = basis.cols();
    let g = basis.tr_matmul(basis)?;
    let mut dev = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)].as_f64() - want).abs());
        }
    }
    if dev > 1e-8 {
        return Err(Error::NotOrthonormal { deviation: dev });
    }
    Ok(())
}

/// Distortion of `S` on the column span of an orthonormal `basis`.
///
/// Probes are `probes` random unit coefficient vectors, the `k` basis
/// directions, and `e_i ± e_j` for every `i < j`.
pub fn embedding_distortion<T: Real>(
    s: &SketchOperator<T>,
    basis: &Matrix<T>,
    probes: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if probes == 0 {
        return Err(Error::InvalidParams("need at least one probe".into()));
    }
    check_orthonormal(basis)?;
    let k = basis.cols();
    let sb = s.apply(basis)?;

    let mut ys: Vec<Vec<T>> = Vec::with_capacity(probes + k * k);
    let mut rng = rng_from_seed(seed);
    for _ in 0..probes {
        ys.push((0..k).map(|_| T::of(rng.sample::<f64, _>(StandardNormal))).collect());
    }
    for i in 0..k {
        ys.push(Vector::<T>::basis(k, i).into_vec());
        for j in i + 1..k {
            for sign in [T::one(), -T::one()] {
                let mut y = vec![T::zero(); k];
                y[i] = T::one();
                y[j] = sign;
                ys.push(y);
            }
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut used = 0;
    for y in ys {
        let y = Vector::new(y)?;
        let norm = y.norm2();
        if norm == T::zero() {
            continue;
        }
        let r = (sb.matvec(&y)?.norm2() / norm).as_f64();
        lo = lo.min(r);
        hi = hi.max(r);
        used += 1;
    }
    let sv = singular_values(&sb)?;
    let smax = sv.first().map_or(0.0, |x| x.as_f64());
    let smin = if sb.rows() < k {
        0.0
    } else {
        sv.last().map_or(0.0, |x| x.as_f64())
    };
    let exact_overshoot = smax - 1.0;
    let exact_undershoot = 1.0 - smin;
    Ok(DistortionReport {
        max_overshoot: hi - 1.0,
        max_undershoot: 1.0 - lo,
        probes: used,
        exact_overshoot,
        exact_undershoot,
        certified_eps: exact_overshoot.max(exact_undershoot).max(0.0),
    })
}

/// Relative approximate-matrix-product error
/// `‖(SA)ᵀ(SB) − AᵀB‖_F / (‖A‖_F ‖B‖_F)`, or 0 when either factor is 0.
pub fn amp_error<T: Real>(s: &SketchOperator<T>, a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            context: "amp_error row counts",
            expected: a.rows(),
            got: b.rows(),
        });
    }
    let denom = a.frobenius_norm() * b.frobenius_norm();
    if denom == T::zero() {
        // still validates S against the row count
        s.apply(a)?;
        return Ok(T::zero());
    }
    let approx = s.apply(a)?.tr_matmul(&s.apply(b)?)?;
    let exact = a.tr_matmul(b)?;
    Ok(approx.sub(&exact)?.frobenius_norm() / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AipsReport {
    /// `max_{i≠j} |⟨S_i, S_j⟩|` over columns of `S`.
    pub max_offdiag: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Largest off-diagonal column inner product of `S` against
/// `c·√(ln n)/√m`. Materializes `S`; rejects `n > 2¹⁴`.
pub fn aips_check<T: Real>(s: &SketchOperator<T>, c: f64) -> Result<AipsReport> {
    let (m, n) = (s.m(), s.n());
    if n > AIPS_MAX_N {
        return Err(Error::TooLarge {
            entries: n,
            cap: AIPS_MAX_N,
        });
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParams(format!("AIPS constant must be positive, got {c}")));
    }
    // columns of S as contiguous rows
    let cols = s.materialize()?.transpose();
    let max_offdiag = (0..n)
        .into_par_iter()
        .map(|i| {
            let ci = cols.row(i);
            (i + 1..n).fold(0.0f64, |acc, j| {
                acc.max(crate::dense::dot(ci, cols.row(j)).as_f64().abs())
            })
        })
        .reduce(|| 0.0, f64::max);
    let bound = c * (n as f64).ln().sqrt() / (m as f64).sqrt();
    Ok(AipsReport {
        max_offdiag,
        bound,
        pass: max_offdiag <= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannReport {
    /// `‖I − UᵀSᵀSU‖₂` for the left singular factor `U` of `A`.
    pub t_norm: f64,
    /// `‖(SA)†S − VΣ⁻¹(Σ_{j≤k} Tʲ)UᵀSᵀS‖₂` for `k = 0..=k_max`.
    pub truncation_errors: Vec<f64>,
    /// Absolute rounding allowance for a single error value,
    /// `64·ε_mach·‖(SA)†S‖₂`.
    pub rounding_floor: f64,
}

impl NeumannReport {
    /// Indices `k` where `errors[k+1] > (t_norm + slack)·errors[k] + rounding_floor`
    /// while `errors[k]` is at most `below`.
    pub fn ratio_violations(&self, slack: f64, below: f64) -> Vec<usize> {
        self.truncation_errors
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] <= below && w[1] > (self.t_norm + slack) * w[0] + self.rounding_floor)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Compares the truncated series `VΣ⁻¹(Σ_{j≤k} Tʲ)UᵀSᵀS` with the exact
/// `(SA)†S` computed from the materialized sketch.
pub fn neumann_validate<T: Real>(s: &SketchOperator<T>, a: &Matrix<T>, k_max: usize) -> Result<NeumannReport> {
    let d = a.cols();
    let f = Svd::new(a)?;
    if f.rank() < d {
        return Err(Error::RankDeficient {
            rank: f.rank(),
            required: d,
        });
    }
    let thin = f.thin();
    let su = s.apply(&thin.u)?;
    let t = Matrix::identity(d).sub(&su.tr_matmul(&su)?)?;
    let t_norm = operator_norm(&t)?;
    if t_norm.as_f64() > 0.5 {
        return Err(Error::TNormTooLarge {
            t_norm: t_norm.as_f64(),
        });
    }
    let sa = s.apply(a)?;
    let sa_svd = Svd::new(&sa)?;
    if sa_svd.rank() < d {
        return Err(Error::RankDeficient {
            rank: sa_svd.rank(),
            required: d,
        });
    }
    let sm = s.materialize()?;
    let exact = pinv(&sa)?.matmul(&sm)?;
    let rounding_floor = 64.0 * T::epsilon().as_f64() * operator_norm(&exact)?.as_f64();
    // (SU)ᵀS, then scaled row-wise by Σ⁻¹ after the series factor.
    let w = su.tr_matmul(&sm)?;
    let v = &thin.v;
    let inv_sigma: Vec<T> = thin.singular_values.iter().map(|&x| T::one() / x).collect();

    let mut power = Matrix::identity(d);
    let mut partial = Matrix::identity(d);
    let mut errors = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            power = power.matmul(&t)?;
            partial = partial.add(&power)?;
        }
        let mut middle = partial.matmul(&w)?;
        for (i, &g) in inv_sigma.iter().enumerate() {
            for x in middle.row_mut(i) {
                *x *= g;
            }
        }
        let approx = v.matmul(&middle)?;
        errors.push(operator_norm(&exact.sub(&approx)?)?.as_f64());
    }
    Ok(NeumannReport {
        t_norm: t_norm.as_f64(),
        truncation_errors: errors,
        rounding_floor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormIdentityReport {
    pub empirical_mean: f64,
    pub predicted: f64,
    pub rel_err: f64,
}

/// Monte-Carlo mean of `‖Ag‖₂²` for `g ~ N(0, σ²I)` against `σ²‖A‖_F²`.
/// Trial `t` draws from stream `(seed, t)`; the mean is a pairwise sum, so
/// the result does not depend on scheduling.
pub fn gaussian_norm_identity<T: Real>(
    a: &Matrix<T>,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<NormIdentityReport> {
    if trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParams(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    let d = a.cols();
    let samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = SeedStream::new(seed, t).rng();
            let g: Vec<T> = (0..d)
                .map(|_| T::of(sigma * rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let ag = a.matvec(&Vector::from_raw(g)).expect("shape checked");
            ag.norm2().as_f64().powi(2)
        })
        .collect();
    let empirical_mean = pairwise_sum(&samples) / trials as f64;
    let squares: Vec<f64> = a.as_slice().iter().map(|x| x.as_f64().powi(2)).collect();
    let predicted = sigma * sigma * pairwise_sum(&squares);
    let rel_err = if predicted > 0.0 {
        (empirical_mean - predicted).abs() / predicted
    } else if empirical_mean == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(NormIdentityReport {
        empirical_mean,
        predicted,
        rel_err,
    })
}

#[derive(Serialize)]
struct Tagged<'a, R> {
    diagnostic: &'a str,
    #[serde(flatten)]
    report: &'a R,
}

/// One-line JSON record `{"diagnostic": name, ...fields}`.
pub fn json_line<R: Serialize>(name: &str, report: &R) -> Result<String> {
    Ok(serde_json::to_string(&Tagged {
        diagnostic: name,
        report,
    })?)
}
