//! Oblivious sketch families and their matrix-free application.
//!
//! Every operator draws all of its randomness when it is built, so applying
//! it is a pure function of the operator and the input.

mod seed;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::{axpy, fwht_in_place, hadamard_entry, thin_svd, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub use seed::{rng_from_seed, trial_seeds, SeedStream};

/// Largest number of entries `materialize_sketch` will allocate by default.
pub const MATERIALIZE_CAP: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Srht,
    CountSketch,
    #[serde(rename = "leverage")]
    LeverageScore,
    Composed,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Srht => "srht",
            Family::CountSketch => "countsketch",
            Family::LeverageScore => "leverage",
            Family::Composed => "composed",
        }
    }
}

/// Serializable description of a sketch. Rebuilding from it reproduces the
/// operator exactly (leverage sampling also needs its reference scores).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchDescriptor {
    pub family: Family,
    pub m: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<SketchDescriptor>>,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind<T> {
    Gaussian {
        entries: Matrix<T>,
    },
    Srht {
        /// Diagonal of `D`, entries ±1.
        signs: Vec<T>,
        /// Coordinates kept by `P`, in draw order.
        rows: Vec<usize>,
    },
    CountSketch {
        s: usize,
        /// Column `j` occupies `support[j*s..(j+1)*s]`.
        support: Vec<u32>,
        negative: Vec<bool>,
    },
    Leverage {
        rows: Vec<usize>,
        scales: Vec<T>,
    },
    /// Product `children[0] · children[1] · …`; applied right to left.
    Composed {
        children: Vec<SketchOperator<T>>,
    },
}

/// A realized `m × n` sketching matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchOperator<T> {
    m: usize,
    n: usize,
    seed: u64,
    kind: Kind<T>,
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::InvalidDimensions(format!(
            "sketch needs 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }
    Ok(())
}

/// Leverage scores `ℓ_i = ‖U_(i)‖²` of a full-column-rank matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LeverageScores<T> {
    scores: Vec<T>,
    d: usize,
}

impl<T: Real> LeverageScores<T> {
    pub fn from_matrix(a: &Matrix<T>) -> Result<Self> {
        let d = a.cols();
        let f = thin_svd(a)?;
        if f.rank < d {
            return Err(Error::RankDeficient {
                rank: f.rank,
                required: d,
            });
        }
        let scores = (0..a.rows())
            .map(|i| f.u.row(i).iter().map(|x| *x * *x).sum())
            .collect();
        Ok(Self { scores, d })
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    pub fn rank(&self) -> usize {
        self.d
    }

    /// Sampling probabilities `ℓ_i / d`.
    pub fn probabilities(&self) -> Vec<T> {
        let d = T::of_usize(self.d);
        self.scores.iter().map(|l| *l / d).collect()
    }
}

impl<T: Real> SketchOperator<T> {
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn family(&self) -> Family {
        match self.kind {
            Kind::Gaussian { .. } => Family::Gaussian,
            Kind::Srht { .. } => Family::Srht,
            Kind::CountSketch { .. } => Family::CountSketch,
            Kind::Leverage { .. } => Family::LeverageScore,
            Kind::Composed { .. } => Family::Composed,
        }
    }

    /// Dense sketch with i.i.d. `N(0, 1/m)` entries.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        check_dims(m, n)?;
        let mut rng = rng_from_seed(seed);
        let sd = 1.0 / (m as f64).sqrt();
        let entries = Matrix::from_fn(m, n, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            T::of(z * sd)
        });
        Ok(Self {
            m,
            n,
            seed,
            kind: Kind::Gaussian { entries },
        })
    }

    /// Dense operator with caller-supplied entries (replay and fixtures).
    pub fn from_dense(entries: Matrix<T>, seed: u64) -> Self {
        let (m, n) = entries.shape();
        Self {
            m,
            n,
            seed,
            kind: Kind::Gaussian { entries },
        }
    }

    /// Subsampled randomized Hadamard transform
    /// `S = √(n/m) · P · (H_n/√n) · D`, so every column has unit norm.
    ///
    /// The `n` signs of `D` are drawn first, then `m` distinct coordinates by
    /// a partial Fisher–Yates shuffle.
    pub fn srht(m: usize, n: usize, seed: u64) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::NonPowerOfTwoN { n });
        }
        check_dims(m, n)?;
        let mut rng = rng_from_seed(seed);
        let signs: Vec<T> = (0..n)
            .map(|_| if rng.random::<bool>() { -T::one() } else { T::one() })
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = rng.random_range(i..n);
            perm.swap(i, j);
        }
        perm.truncate(m);
        Ok(Self {
            m,
            n,
            seed,
            kind: Kind::Srht { signs, rows: perm },
        })
    }

    /// SRHT with explicit `D` (signs `±1`) and sampled coordinates.
    pub fn srht_from_parts(n: usize, signs: Vec<i8>, rows: Vec<usize>) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::NonPowerOfTwoN { n });
        }
        let m = rows.len();
        check_dims(m, n)?;
        if signs.len() != n || signs.iter().any(|s| s.abs() != 1) {
            return Err(Error::InvalidParams("SRHT needs n signs of ±1".into()));
        }
        let mut seen = vec![false; n];
        for &r in &rows {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::InvalidParams(format!("bad or repeated SRHT row {r}")));
            }
        }
        let signs = signs.into_iter().map(|s| T::of(s as f64)).collect();
        Ok(Self {
            m,
            n,
            seed: 0,
            kind: Kind::Srht { signs, rows },
        })
    }

    /// Count-Sketch with `s` nonzeros `±1/√s` per column at distinct rows.
    /// Per column, positions are drawn first (Floyd's algorithm), then signs.
    pub fn countsketch(m: usize, n: usize, s: usize, seed: u64) -> Result<Self> {
        check_dims(m, n)?;
        if s == 0 {
            return Err(Error::InvalidParams("column sparsity must be at least 1".into()));
        }
        if s > m {
            return Err(Error::SparsityExceedsRows { s, m });
        }
        let mut rng = rng_from_seed(seed);
        let mut support = Vec::with_capacity(n * s);
        let mut negative = Vec::with_capacity(n * s);
        let mut chosen: Vec<u32> = Vec::with_capacity(s);
        for _ in 0..n {
            chosen.clear();
            for j in (m - s)..m {
                let t = rng.random_range(0..=j) as u32;
                if chosen.contains(&t) {
                    chosen.push(j as u32);
                } else {
                    chosen.push(t);
                }
            }
            support.extend_from_slice(&chosen);
            negative.extend((0..s).map(|_| rng.random::<bool>()));
        }
        Ok(Self {
            m,
            n,
            seed,
            kind: Kind::CountSketch { s, support, negative },
        })
    }

    /// Count-Sketch with an explicit support pattern: column `j` uses rows
    /// `support[j*s..(j+1)*s]` with the matching signs.
    pub fn countsketch_from_parts(
        m: usize,
        n: usize,
        s: usize,
        support: Vec<u32>,
        negative: Vec<bool>,
    ) -> Result<Self> {
        check_dims(m, n)?;
        if s == 0 || s > m {
            return Err(Error::SparsityExceedsRows { s, m });
        }
        if support.len() != n * s || negative.len() != n * s {
            return Err(Error::InvalidParams("support and signs need n*s entries".into()));
        }
        for col in support.chunks(s) {
            for (i, &r) in col.iter().enumerate() {
                if r as usize >= m || col[..i].contains(&r) {
                    return Err(Error::InvalidParams(format!("bad or repeated row {r}")));
                }
            }
        }
        Ok(Self {
            m,
            n,
            seed: 0,
            kind: Kind::CountSketch { s, support, negative },
        })
    }

    /// Leverage-score row sampler: `m` rows i.i.d. with probability
    /// `ℓ_i / d`, each rescaled by `1/√(m·p_i)`.
    pub fn leverage(a: &Matrix<T>, m: usize, seed: u64) -> Result<Self> {
        let scores = LeverageScores::from_matrix(a)?;
        Self::leverage_from_scores(&scores, m, seed)
    }

    pub fn leverage_from_scores(scores: &LeverageScores<T>, m: usize, seed: u64) -> Result<Self> {
        let n = scores.scores.len();
        check_dims(m, n)?;
        let p: Vec<f64> = scores.probabilities().iter().map(|x| x.as_f64().max(0.0)).collect();
        let dist = WeightedIndex::new(&p).map_err(|e| Error::InvalidParams(format!("leverage distribution: {e}")))?;
        let mut rng = rng_from_seed(seed);
        let rows: Vec<usize> = (0..m).map(|_| dist.sample(&mut rng)).collect();
        let scales = rows
            .iter()
            .map(|&i| T::one() / (T::of_usize(m) * T::of(p[i])).sqrt())
            .collect();
        Ok(Self {
            m,
            n,
            seed,
            kind: Kind::Leverage { rows, scales },
        })
    }

    /// `outer · inner`: applies `inner` first.
    pub fn compose(outer: SketchOperator<T>, inner: SketchOperator<T>) -> Result<Self> {
        if outer.n != inner.m {
            return Err(Error::DimensionMismatch {
                context: "sketch composition",
                expected: inner.m,
                got: outer.n,
            });
        }
        let (m, n, seed) = (outer.m, inner.n, outer.seed);
        let mut children = Vec::new();
        for op in [outer, inner] {
            match op.kind {
                Kind::Composed { children: c } => children.extend(c),
                _ => children.push(op),
            }
        }
        Ok(Self {
            m,
            n,
            seed,
            kind: Kind::Composed { children },
        })
    }

    /// Rows hit by column `j` of a Count-Sketch, with `true` marking a
    /// negative entry. `None` for other families.
    pub fn countsketch_column(&self, j: usize) -> Option<(&[u32], &[bool])> {
        match &self.kind {
            Kind::CountSketch { s, support, negative } => {
                Some((&support[j * s..(j + 1) * s], &negative[j * s..(j + 1) * s]))
            }
            _ => None,
        }
    }

    pub fn sparsity(&self) -> Option<usize> {
        match self.kind {
            Kind::CountSketch { s, .. } => Some(s),
            _ => None,
        }
    }

    /// Children of a composed operator, outermost first.
    pub fn children(&self) -> &[SketchOperator<T>] {
        match &self.kind {
            Kind::Composed { children } => children,
            _ => &[],
        }
    }

    /// Row indices selected by a leverage sampler.
    pub fn sampled_rows(&self) -> Option<&[usize]> {
        match &self.kind {
            Kind::Leverage { rows, .. } | Kind::Srht { rows, .. } => Some(rows),
            _ => None,
        }
    }

    pub fn descriptor(&self) -> SketchDescriptor {
        SketchDescriptor {
            family: self.family(),
            m: self.m,
            n: self.n,
            s: self.sparsity(),
            seed: self.seed,
            children: match &self.kind {
                Kind::Composed { children } => Some(children.iter().map(SketchOperator::descriptor).collect()),
                _ => None,
            },
        }
    }

    /// Rebuilds an operator from its descriptor. Leverage samplers need the
    /// scores they were drawn from.
    pub fn from_descriptor(desc: &SketchDescriptor, leverage: Option<&LeverageScores<T>>) -> Result<Self> {
        match desc.family {
            Family::Gaussian => Self::gaussian(desc.m, desc.n, desc.seed),
            Family::Srht => Self::srht(desc.m, desc.n, desc.seed),
            Family::CountSketch => {
                let s = desc
                    .s
                    .ok_or_else(|| Error::InvalidParams("countsketch descriptor lacks s".into()))?;
                Self::countsketch(desc.m, desc.n, s, desc.seed)
            }
            Family::LeverageScore => {
                let scores = leverage
                    .ok_or_else(|| Error::InvalidParams("leverage descriptor needs reference scores".into()))?;
                if scores.scores.len() != desc.n {
                    return Err(Error::DimensionMismatch {
                        context: "leverage scores",
                        expected: desc.n,
                        got: scores.scores.len(),
                    });
                }
                Self::leverage_from_scores(scores, desc.m, desc.seed)
            }
            Family::Composed => {
                let children = desc
                    .children
                    .as_ref()
                    .filter(|c| !c.is_empty())
                    .ok_or_else(|| Error::InvalidParams("composed descriptor lacks children".into()))?;
                let mut ops = children
                    .iter()
                    .map(|c| Self::from_descriptor(c, leverage))
                    .collect::<Result<Vec<_>>>()?;
                let mut acc = ops.pop().expect("nonempty");
                while let Some(outer) = ops.pop() {
                    acc = Self::compose(outer, acc)?;
                }
                if acc.m != desc.m || acc.n != desc.n {
                    return Err(Error::InvalidParams(format!(
                        "composed descriptor claims {}x{}, children give {}x{}",
                        desc.m, desc.n, acc.m, acc.n
                    )));
                }
                acc.seed = desc.seed;
                Ok(acc)
            }
        }
    }

    /// `S · M` without forming `S`.
    pub fn apply(&self, mat: &Matrix<T>) -> Result<Matrix<T>> {
        if mat.rows() != self.n {
            return Err(Error::DimensionMismatch {
                context: "sketch application",
                expected: self.n,
                got: mat.rows(),
            });
        }
        let k = mat.cols();
        match &self.kind {
            Kind::Gaussian { entries } => entries.matmul(mat),
            Kind::Srht { signs, rows } => Ok(apply_srht(signs, rows, mat)),
            Kind::CountSketch { s, support, negative } => {
                let mut out = Matrix::zeros(self.m, k);
                let w = T::one() / T::of_usize(*s).sqrt();
                for j in 0..self.n {
                    let src = mat.row(j);
                    if src.iter().all(|x| *x == T::zero()) {
                        continue;
                    }
                    for t in j * s..(j + 1) * s {
                        let coef = if negative[t] { -w } else { w };
                        axpy(coef, src, out.row_mut(support[t] as usize));
                    }
                }
                Ok(out)
            }
            Kind::Leverage { rows, scales } => {
                let mut out = Matrix::zeros(self.m, k);
                for (t, (&r, &c)) in rows.iter().zip(scales).enumerate() {
                    for (o, x) in out.row_mut(t).iter_mut().zip(mat.row(r)) {
                        *o = c * *x;
                    }
                }
                Ok(out)
            }
            Kind::Composed { children } => {
                let mut acc = children.last().expect("composed is nonempty").apply(mat)?;
                for child in children.iter().rev().skip(1) {
                    acc = child.apply(&acc)?;
                }
                Ok(acc)
            }
        }
    }

    /// Explicit `m × n` matrix, refused above [`MATERIALIZE_CAP`] entries.
    pub fn materialize(&self) -> Result<Matrix<T>> {
        self.materialize_with_cap(MATERIALIZE_CAP)
    }

    pub fn materialize_with_cap(&self, cap: usize) -> Result<Matrix<T>> {
        let entries = self.m.saturating_mul(self.n);
        if entries > cap {
            return Err(Error::TooLarge { entries, cap });
        }
        let (m, n) = (self.m, self.n);
        Ok(match &self.kind {
            Kind::Gaussian { entries } => entries.clone(),
            Kind::Srht { signs, rows } => {
                let scale = T::one() / T::of_usize(m).sqrt();
                Matrix::from_fn(m, n, |r, j| {
                    let h = if hadamard_entry(rows[r], j) > 0 { scale } else { -scale };
                    h * signs[j]
                })
            }
            Kind::CountSketch { s, support, negative } => {
                let w = T::one() / T::of_usize(*s).sqrt();
                let mut out = Matrix::zeros(m, n);
                for j in 0..n {
                    for t in j * s..(j + 1) * s {
                        out[(support[t] as usize, j)] = if negative[t] { -w } else { w };
                    }
                }
                out
            }
            Kind::Leverage { rows, scales } => {
                let mut out = Matrix::zeros(m, n);
                for (t, (&r, &c)) in rows.iter().zip(scales).enumerate() {
                    out[(t, r)] = c;
                }
                out
            }
            Kind::Composed { children } => {
                let mut acc = children[0].materialize_with_cap(cap)?;
                for child in &children[1..] {
                    acc = acc.matmul(&child.materialize_with_cap(cap)?)?;
                }
                acc
            }
        })
    }
}

/// `√(n/m) · P · (H/√n) · D · M`, column blocks at a time so the transform
/// runs on contiguous buffers.
fn apply_srht<T: Real>(signs: &[T], rows: &[usize], mat: &Matrix<T>) -> Matrix<T> {
    const BLOCK: usize = 8;
    let (n, k) = mat.shape();
    let m = rows.len();
    let scale = T::one() / T::of_usize(m).sqrt();
    let mut out = Matrix::zeros(m, k);
    let width = BLOCK.min(k.max(1));
    let mut buf = vec![T::zero(); width * n];
    for c0 in (0..k).step_by(BLOCK) {
        let w = BLOCK.min(k - c0);
        for (i, &sg) in signs.iter().enumerate() {
            for (c, x) in mat.row(i)[c0..c0 + w].iter().enumerate() {
                buf[c * n + i] = *x * sg;
            }
        }
        for c in 0..w {
            fwht_in_place(&mut buf[c * n..(c + 1) * n]).expect("n is a power of two");
        }
        for (r, &p) in rows.iter().enumerate() {
            let dst = &mut out.row_mut(r)[c0..c0 + w];
            for (c, o) in dst.iter_mut().enumerate() {
                *o = buf[c * n + p] * scale;
            }
        }
    }
    out
}

/// `S · M`
pub fn apply_sketch<T: Real>(s: &SketchOperator<T>, m: &Matrix<T>) -> Result<Matrix<T>> {
    s.apply(m)
}

pub fn materialize_sketch<T: Real>(s: &SketchOperator<T>) -> Result<Matrix<T>> {
    s.materialize()
}

pub fn compose<T: Real>(outer: SketchOperator<T>, inner: SketchOperator<T>) -> Result<SketchOperator<T>> {
    SketchOperator::compose(outer, inner)
}

pub fn make_gaussian<T: Real>(m: usize, n: usize, seed: u64) -> Result<SketchOperator<T>> {
    SketchOperator::gaussian(m, n, seed)
}

pub fn make_srht<T: Real>(m: usize, n: usize, seed: u64) -> Result<SketchOperator<T>> {
    SketchOperator::srht(m, n, seed)
}

pub fn make_countsketch<T: Real>(m: usize, n: usize, s: usize, seed: u64) -> Result<SketchOperator<T>> {
    SketchOperator::countsketch(m, n, s, seed)
}

pub fn make_leverage_sampler<T: Real>(a: &Matrix<T>, m: usize, seed: u64) -> Result<SketchOperator<T>> {
    SketchOperator::leverage(a, m, seed)
}

#[cfg(test)]
mod tests;
