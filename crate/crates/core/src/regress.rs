//! Sketch-and-solve regression and the error measures behind the l2 and
//! l-infinity guarantees.

use serde::{Deserialize, Serialize};

use crate::dense::{exact_lsq, operator_norm, pinv, Matrix, Svd, Vector};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sketch::SketchOperator;

/// `min_x ‖Ax − b‖₂` together with whatever is known about its optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionInstance<T> {
    pub a: Matrix<T>,
    pub b: Vector<T>,
    pub x_star: Option<Vector<T>>,
    /// `‖A x* − b‖₂`
    pub residual_norm: Option<T>,
    /// `‖A†‖₂`
    pub pinv_norm: Option<T>,
    pub label: String,
}

impl<T: Real> RegressionInstance<T> {
    pub fn new(a: Matrix<T>, b: Vector<T>, label: impl Into<String>) -> Result<Self> {
        let (n, d) = a.shape();
        if d == 0 || n < d {
            return Err(Error::InvalidDimensions(format!(
                "regression needs n >= d >= 1, got n = {n}, d = {d}"
            )));
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "regression target",
                expected: n,
                got: b.len(),
            });
        }
        Ok(Self {
            a,
            b,
            x_star: None,
            residual_norm: None,
            pinv_norm: None,
            label: label.into(),
        })
    }

    /// Attaches a claimed optimum after checking `‖Aᵀ(Ax* − b)‖₂ ≤ tol·‖A‖_F·‖b‖₂`.
    pub fn with_optimum(mut self, x_star: Vector<T>) -> Result<Self> {
        if x_star.len() != self.d() {
            return Err(Error::DimensionMismatch {
                context: "optimum",
                expected: self.d(),
                got: x_star.len(),
            });
        }
        let res = self.a.matvec(&x_star)?.sub(&self.b);
        let grad = self.a.tr_matvec(&res)?.norm2();
        let bound = T::lsq_rtol() * self.a.frobenius_norm() * self.b.norm2();
        if grad > bound {
            return Err(Error::InvariantViolation(format!(
                "{}: normal-equation residual {grad:e} exceeds {bound:e}",
                self.label
            )));
        }
        self.residual_norm = Some(res.norm2());
        self.x_star = Some(x_star);
        Ok(self)
    }

    /// Solves the instance exactly and records `x*` and `‖A x* − b‖₂`.
    pub fn solved(self) -> Result<Self> {
        let x = exact_lsq(&self.a, &self.b)?;
        self.with_optimum(x)
    }

    pub fn with_pinv_norm(mut self, value: T) -> Self {
        self.pinv_norm = Some(value);
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.a.cols()
    }

    /// Copy with zero rows appended up to `n` rows. The optimum, residual
    /// and `‖A†‖₂` are unchanged by zero padding.
    pub fn padded(&self, n: usize) -> RegressionInstance<T> {
        RegressionInstance {
            a: self.a.pad_rows(n),
            b: self.b.pad(n),
            x_star: self.x_star.clone(),
            residual_norm: self.residual_norm,
            pinv_norm: self.pinv_norm,
            label: self.label.clone(),
        }
    }

    /// Padded to the next power of two rows (what SRHT needs).
    pub fn padded_pow2(&self) -> RegressionInstance<T> {
        self.padded(self.n().next_power_of_two())
    }
}

/// Outcome of one sketched solve against the exact optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport<T> {
    pub x_prime: Vector<T>,
    /// `‖x' − x*‖₂`
    pub l2_err: T,
    /// `‖x' − x*‖∞`
    pub linf_err: T,
    /// `‖Ax' − b‖₂ / ‖Ax* − b‖₂`
    pub cost_ratio: T,
    /// `linf_err · √d / (‖b − Ax*‖₂ · ‖A†‖₂)`
    pub normalized_linf: T,
    /// `l2_err / (‖b − Ax*‖₂ · ‖A†‖₂)`
    pub normalized_l2: T,
    /// Numerical rank of `SA` equals `d`.
    pub sketched_rank_ok: bool,
    /// The bound scale `‖b − Ax*‖₂ · ‖A†‖₂` vanished while the error did not;
    /// the normalized errors are then `+∞`.
    pub degenerate: bool,
}

impl<T: Real> SolveReport<T> {
    /// `linf ≤ l2 ≤ √d·linf` and `cost_ratio ≥ 1 − 1e-9`, with a relative
    /// allowance of a few ulps for the norm chain.
    pub fn check_invariants(&self) -> Result<()> {
        let d = T::of_usize(self.x_prime.len());
        let slack = T::one() + T::of(1e-12).max(T::epsilon() * T::of(16.0));
        let ok_chain = self.linf_err <= self.l2_err * slack && self.l2_err <= d.sqrt() * self.linf_err * slack;
        if !ok_chain {
            return Err(Error::InvariantViolation(format!(
                "norm chain broken: linf {} l2 {} d {}",
                self.linf_err, self.l2_err, d
            )));
        }
        if self.cost_ratio.is_nan() || self.cost_ratio < T::one() - T::of(1e-9) {
            return Err(Error::InvariantViolation(format!(
                "cost ratio {} below 1",
                self.cost_ratio
            )));
        }
        Ok(())
    }
}

/// Row of the per-trial output tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub trial: u64,
    pub l2_err: f64,
    pub linf_err: f64,
    pub cost_ratio: f64,
    pub normalized_l2: f64,
    pub normalized_linf: f64,
    pub rank_ok: bool,
}

impl ReportRow {
    pub const CSV_HEADER: &'static str = "trial,l2_err,linf_err,cost_ratio,normalized_l2,normalized_linf,rank_ok";

    pub fn from_report<T: Real>(trial: u64, r: &SolveReport<T>) -> Self {
        Self {
            trial,
            l2_err: r.l2_err.as_f64(),
            linf_err: r.linf_err.as_f64(),
            cost_ratio: r.cost_ratio.as_f64(),
            normalized_l2: r.normalized_l2.as_f64(),
            normalized_linf: r.normalized_linf.as_f64(),
            rank_ok: r.sketched_rank_ok,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.trial,
            self.l2_err,
            self.linf_err,
            self.cost_ratio,
            self.normalized_l2,
            self.normalized_linf,
            self.rank_ok
        )
    }
}

fn normalize<T: Real>(err: T, scale: T) -> (T, bool) {
    if scale > T::zero() {
        (err / scale, false)
    } else if err == T::zero() {
        (T::zero(), false)
    } else {
        (T::infinity(), true)
    }
}

/// Solves `min ‖SAx − Sb‖₂` as `x' = (SA)†(Sb)` and measures it against
/// the instance's optimum (computed on the spot if the instance lacks it).
pub fn sketch_and_solve<T: Real>(inst: &RegressionInstance<T>, s: &SketchOperator<T>) -> Result<SolveReport<T>> {
    if s.n() != inst.n() {
        return Err(Error::DimensionMismatch {
            context: "sketch and instance rows",
            expected: inst.n(),
            got: s.n(),
        });
    }
    let sa = s.apply(&inst.a)?;
    let sb: Vector<T> = s.apply(&inst.b.to_matrix())?.into();
    let svd = Svd::new(&sa)?;
    let x_prime = svd.solve(&sb)?;
    let sketched_rank_ok = svd.rank() == inst.d();

    let solved;
    let inst = if inst.x_star.is_some() && inst.residual_norm.is_some() {
        inst
    } else {
        solved = inst.clone().solved()?;
        &solved
    };
    let x_star = inst.x_star.as_ref().expect("optimum present");
    let residual = inst.residual_norm.expect("residual present");
    let pinv_norm = match inst.pinv_norm {
        Some(p) => p,
        None => operator_norm(&pinv(&inst.a)?)?,
    };

    let diff = x_prime.sub(x_star);
    let l2_err = diff.norm2();
    let linf_err = diff.norm_inf();
    let cost = inst.a.matvec(&x_prime)?.sub(&inst.b).norm2();
    // A residual at rounding level is a consistent system.
    let floor = T::of(64.0) * T::epsilon() * inst.b.norm2().max(inst.a.frobenius_norm() * x_star.norm2());
    let residual = if residual <= floor { T::zero() } else { residual };
    let cost = if cost <= floor { T::zero() } else { cost };
    let cost_ratio = if residual > T::zero() {
        cost / residual
    } else if cost > T::zero() {
        T::infinity()
    } else {
        T::one()
    };
    let scale = residual * pinv_norm;
    let (normalized_l2, deg_l2) = normalize(l2_err, scale);
    let (normalized_linf, deg_linf) = normalize(linf_err * T::of_usize(inst.d()).sqrt(), scale);
    Ok(SolveReport {
        x_prime,
        l2_err,
        linf_err,
        cost_ratio,
        normalized_linf,
        normalized_l2,
        sketched_rank_ok,
        degenerate: deg_l2 || deg_linf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuaranteeCheck {
    pub l2_pass: bool,
    pub linf_pass: bool,
}

/// `l2_pass ⟺ normalized_l2 ≤ C·ε`, `linf_pass ⟺ normalized_linf ≤ C·ε`.
pub fn guarantee_check<T: Real>(report: &SolveReport<T>, eps: T, slack_c: T) -> Result<GuaranteeCheck> {
    if !(eps > T::zero()) || !(slack_c > T::zero()) {
        return Err(Error::InvalidParams(format!(
            "eps and C must be positive, got eps = {eps}, C = {slack_c}"
        )));
    }
    let bound = slack_c * eps;
    Ok(GuaranteeCheck {
        l2_pass: report.normalized_l2 <= bound,
        linf_pass: report.normalized_linf <= bound,
    })
}

/// `|⟨a, x' − x*⟩| / ‖a‖₂`
pub fn directional_error<T: Real>(x_prime: &Vector<T>, x_star: &Vector<T>, a: &Vector<T>) -> Result<T> {
    if a.len() != x_prime.len() || x_star.len() != x_prime.len() {
        return Err(Error::DimensionMismatch {
            context: "directional error",
            expected: x_prime.len(),
            got: a.len(),
        });
    }
    let norm = a.norm2();
    if norm == T::zero() {
        return Err(Error::ZeroDirection);
    }
    Ok(a.dot(&x_prime.sub(x_star)).abs() / norm)
}
