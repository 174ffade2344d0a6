use crate::dense::Vector;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// In-place unnormalized Walsh–Hadamard transform: `x <- H_n x`, where
/// `H_1 = [1]` and `H_{2k} = [[H_k, H_k], [H_k, -H_k]]`.
///
/// Scaling is left to the caller.
pub fn fwht_in_place<T: Real>(x: &mut [T]) -> Result<()> {
    let n = x.len();
    if !n.is_power_of_two() {
        return Err(Error::NonPowerOfTwoLength { len: n });
    }
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// `H_n · x` for a vector whose length is a power of two.
pub fn fwht<T: Real>(x: &Vector<T>) -> Result<Vector<T>> {
    let mut out = x.clone();
    fwht_in_place(out.as_mut_slice())?;
    Ok(out)
}

/// Entry `(i, j)` of the Sylvester-ordered Hadamard matrix, `(-1)^{popcount(i & j)}`.
#[inline]
pub fn hadamard_entry(i: usize, j: usize) -> i8 {
    if (i & j).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn small_cases() {
        assert_eq!(fwht(&v(&[1.0, 0.0, 0.0, 0.0])).unwrap(), v(&[1.0, 1.0, 1.0, 1.0]));
        assert_eq!(fwht(&v(&[1.0, 1.0, 1.0, 1.0])).unwrap(), v(&[4.0, 0.0, 0.0, 0.0]));
        assert_eq!(fwht(&v(&[7.5])).unwrap(), v(&[7.5]));
        let x = v(&[0.3, -1.2, 2.5, 4.0]);
        let back = fwht(&fwht(&x).unwrap()).unwrap();
        assert!(back.sub(&x.scale(4.0)).norm_inf() < 1e-14);
    }

    #[test]
    fn rejects_other_lengths() {
        assert!(matches!(
            fwht(&v(&[1.0, 2.0, 3.0])),
            Err(Error::NonPowerOfTwoLength { len: 3 })
        ));
        assert!(fwht(&v(&[])).is_err());
    }

    #[test]
    fn matches_explicit_hadamard() {
        let n = 16;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = x.clone();
        fwht_in_place(&mut y).unwrap();
        for (i, yi) in y.iter().enumerate() {
            let direct: f64 = (0..n).map(|j| hadamard_entry(i, j) as f64 * x[j]).sum();
            assert!((yi - direct).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn involution_up_to_scale(k in 0u32..=14, seed in any::<u64>()) {
            let n = 1usize << k;
            let mut s = seed;
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
                })
                .collect();
            let mut y = x.clone();
            fwht_in_place(&mut y).unwrap();
            fwht_in_place(&mut y).unwrap();
            let scale = n as f64;
            let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let err = x.iter().zip(&y).map(|(a, b)| (scale * a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-9 * scale * norm);
        }
    }
}
