use super::*;
use proptest::prelude::*;
use rand::Rng;

fn rand_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn max_rel(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.sub(b).unwrap().max_abs() / b.max_abs().max(1.0)
}

#[test]
fn gaussian_scalar_variance() {
    let trials = 100_000u64;
    let xs: Vec<f64> = (0..trials)
        .map(|s| SketchOperator::<f64>::gaussian(1, 1, s).unwrap().materialize().unwrap()[(0, 0)])
        .collect();
    let mean = xs.iter().sum::<f64>() / trials as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    assert!((var - 1.0).abs() < 0.03, "variance {var}");
}

#[test]
fn gaussian_column_second_moment() {
    let e1 = Matrix::from_fn(16, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let trials = 10_000u64;
    let mean = (0..trials)
        .map(|s| {
            let y = SketchOperator::<f64>::gaussian(8, 16, s).unwrap().apply(&e1).unwrap();
            y.frobenius_norm().powi(2)
        })
        .sum::<f64>()
        / trials as f64;
    assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
}

#[test]
fn construction_is_deterministic() {
    let a = SketchOperator::<f64>::gaussian(3, 5, 9).unwrap();
    assert_eq!(a, SketchOperator::gaussian(3, 5, 9).unwrap());
    assert_ne!(a, SketchOperator::gaussian(3, 5, 10).unwrap());
    let c = SketchOperator::<f64>::countsketch(8, 32, 3, 4).unwrap();
    assert_eq!(c, SketchOperator::countsketch(8, 32, 3, 4).unwrap());
    let h = SketchOperator::<f64>::srht(8, 32, 4).unwrap();
    let x = rand_matrix(32, 3, 1);
    assert_eq!(
        h.apply(&x).unwrap(),
        SketchOperator::srht(8, 32, 4).unwrap().apply(&x).unwrap()
    );
}

#[test]
fn dimension_errors() {
    assert!(matches!(
        SketchOperator::<f64>::gaussian(0, 4, 0),
        Err(Error::InvalidDimensions(_))
    ));
    assert!(matches!(
        SketchOperator::<f64>::gaussian(5, 4, 0),
        Err(Error::InvalidDimensions(_))
    ));
    assert!(matches!(
        SketchOperator::<f64>::srht(2, 6, 0),
        Err(Error::NonPowerOfTwoN { n: 6 })
    ));
    assert!(matches!(
        SketchOperator::<f64>::countsketch(4, 8, 5, 0),
        Err(Error::SparsityExceedsRows { s: 5, m: 4 })
    ));
    let g = SketchOperator::<f64>::gaussian(2, 4, 0).unwrap();
    assert!(matches!(
        g.apply(&Matrix::zeros(3, 1)),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn srht_fixed_randomness_closed_form() {
    let s = SketchOperator::<f64>::srht_from_parts(2, vec![1, 1], vec![0, 1]).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let expect = Matrix::from_rows(&[vec![r, r], vec![r, -r]]).unwrap();
    assert!(max_rel(&s.materialize().unwrap(), &expect) < 1e-15);
    let y = s.apply(&Matrix::new(2, 1, vec![1.0, 0.0]).unwrap()).unwrap();
    assert!((y[(0, 0)] - r).abs() < 1e-15 && (y[(1, 0)] - r).abs() < 1e-15);
}

#[test]
fn srht_columns_have_unit_norm() {
    let mut rng = rng_from_seed(77);
    for _ in 0..100 {
        let n = 1usize << rng.random_range(0..8);
        let m = rng.random_range(1..=n);
        let seed = rng.random::<u64>();
        let s = SketchOperator::<f64>::srht(m, n, seed).unwrap();
        let cols = s.apply(&Matrix::identity(n)).unwrap().column_norms();
        for c in cols {
            assert!((c - 1.0).abs() <= 1e-12, "m={m} n={n} norm={c}");
        }
    }
}

#[test]
fn full_srht_is_orthonormal() {
    for seed in 0..10 {
        let s = SketchOperator::<f64>::srht(4, 4, seed).unwrap().materialize().unwrap();
        let sts = s.tr_matmul(&s).unwrap();
        for i in 0..4 {
            assert!((sts[(i, i)] - 1.0).abs() < 1e-15);
        }
        let s = SketchOperator::<f64>::srht(64, 64, seed)
            .unwrap()
            .materialize()
            .unwrap();
        assert!(s.tr_matmul(&s).unwrap().sub(&Matrix::identity(64)).unwrap().max_abs() < 1e-10);
    }
}

#[test]
fn countsketch_column_structure() {
    for (m, n, s) in [(16, 40, 4), (5, 5, 5), (30, 100, 1)] {
        let op = SketchOperator::<f64>::countsketch(m, n, s, 3).unwrap();
        let dense = op.materialize().unwrap();
        let w = 1.0 / (s as f64).sqrt();
        for j in 0..n {
            let col = dense.col(j);
            let nz: Vec<f64> = col.as_slice().iter().copied().filter(|x| *x != 0.0).collect();
            assert_eq!(nz.len(), s);
            assert!(nz.iter().all(|x| (x.abs() - w).abs() < 1e-15));
            assert!((col.norm2() - 1.0).abs() < 1e-12);
        }
    }
    let one = SketchOperator::<f64>::countsketch(1, 1, 1, 5).unwrap();
    let v = one.materialize().unwrap()[(0, 0)];
    assert!(v == 1.0 || v == -1.0);
    let y = one.apply(&Matrix::new(1, 1, vec![5.0]).unwrap()).unwrap()[(0, 0)];
    assert_eq!(y, 5.0 * v);
}

#[test]
fn countsketch_columns_uncorrelated() {
    let trials = 10_000u64;
    let ips: Vec<f64> = (0..trials)
        .map(|seed| {
            let s = SketchOperator::<f64>::countsketch(16, 16, 4, seed)
                .unwrap()
                .materialize()
                .unwrap();
            s.col(0).dot(&s.col(1))
        })
        .collect();
    let mean = ips.iter().sum::<f64>() / trials as f64;
    let sd = (ips.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    assert!(mean.abs() <= 3.0 * sd / (trials as f64).sqrt(), "mean {mean} sd {sd}");
}

/// Hat-matrix diagonal `A (AᵀA)⁻¹ Aᵀ` for a 3-column matrix, with the 3x3
/// inverse formed by cofactors.
fn hat_diagonal_3(a: &Matrix<f64>) -> Vec<f64> {
    let g = a.tr_matmul(a).unwrap();
    let c = |i: usize, j: usize| g[(i % 3, j % 3)];
    let det = g[(0, 0)] * (g[(1, 1)] * g[(2, 2)] - g[(1, 2)] * g[(2, 1)])
        - g[(0, 1)] * (g[(1, 0)] * g[(2, 2)] - g[(1, 2)] * g[(2, 0)])
        + g[(0, 2)] * (g[(1, 0)] * g[(2, 1)] - g[(1, 1)] * g[(2, 0)]);
    let inv = Matrix::from_fn(3, 3, |i, j| {
        (c(j + 1, i + 1) * c(j + 2, i + 2) - c(j + 1, i + 2) * c(j + 2, i + 1)) / det
    });
    (0..a.rows())
        .map(|r| {
            let row = a.row(r);
            (0..3)
                .map(|i| (0..3).map(|j| row[i] * inv[(i, j)] * row[j]).sum::<f64>())
                .sum()
        })
        .collect()
}

#[test]
fn leverage_scores() {
    let a = Matrix::<f64>::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let l = LeverageScores::from_matrix(&a).unwrap();
    let want = [1.0, 1.0, 0.0];
    for (x, w) in l.scores().iter().zip(want) {
        assert!((x - w).abs() < 1e-12);
    }
    for (x, w) in l.probabilities().iter().zip([0.5, 0.5, 0.0]) {
        assert!((x - w).abs() < 1e-12);
    }
    // zero-score row is never sampled
    for seed in 0..50 {
        let s = SketchOperator::leverage_from_scores(&l, 3, seed).unwrap();
        assert!(s.sampled_rows().unwrap().iter().all(|&r| r < 2));
    }

    for seed in 0..5 {
        let a = rand_matrix(8, 3, seed);
        let l = LeverageScores::from_matrix(&a).unwrap();
        assert!((l.scores().iter().sum::<f64>() - 3.0).abs() < 1e-9);
        for (x, h) in l.scores().iter().zip(hat_diagonal_3(&a)) {
            assert!((x - h).abs() < 1e-9);
        }
    }
    let deficient = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
    assert!(matches!(
        LeverageScores::from_matrix(&deficient),
        Err(Error::RankDeficient { rank: 1, required: 2 })
    ));
}

#[test]
fn leverage_rescaling() {
    let a = rand_matrix(10, 2, 3);
    let s = SketchOperator::leverage(&a, 6, 8).unwrap();
    let l = LeverageScores::from_matrix(&a).unwrap();
    let dense = s.materialize().unwrap();
    for (t, &r) in s.sampled_rows().unwrap().iter().enumerate() {
        let p = l.scores()[r] / 2.0;
        assert!((dense[(t, r)] - 1.0 / (6.0 * p).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn gaussian_times_identity_is_itself() {
    let g = SketchOperator::<f64>::gaussian(2, 2, 31).unwrap();
    assert_eq!(g.apply(&Matrix::identity(2)).unwrap(), g.materialize().unwrap());
}

#[test]
fn composition() {
    let g = SketchOperator::<f64>::gaussian(4, 16, 1).unwrap();
    let c = SketchOperator::<f64>::countsketch(16, 64, 2, 2).unwrap();
    let bad = SketchOperator::<f64>::countsketch(8, 64, 1, 2).unwrap();
    assert!(matches!(
        SketchOperator::compose(g.clone(), bad),
        Err(Error::DimensionMismatch { .. })
    ));
    let gc = SketchOperator::compose(g.clone(), c.clone()).unwrap();
    assert_eq!((gc.m(), gc.n()), (4, 64));
    let prod = g.materialize().unwrap().matmul(&c.materialize().unwrap()).unwrap();
    assert!(max_rel(&gc.materialize().unwrap(), &prod) < 1e-12);

    // Gaussian ∘ SRHT ∘ CountSketch on a 64x4 input
    let g = SketchOperator::<f64>::gaussian(8, 32, 3).unwrap();
    let h = SketchOperator::<f64>::srht(32, 64, 4).unwrap();
    let c = SketchOperator::<f64>::countsketch(64, 64, 3, 5).unwrap();
    let chain = SketchOperator::compose(g.clone(), SketchOperator::compose(h.clone(), c.clone()).unwrap()).unwrap();
    assert_eq!(chain.children().len(), 3);
    let x = rand_matrix(64, 4, 6);
    let explicit = g
        .materialize()
        .unwrap()
        .matmul(&h.materialize().unwrap())
        .unwrap()
        .matmul(&c.materialize().unwrap())
        .unwrap()
        .matmul(&x)
        .unwrap();
    assert!(max_rel(&chain.apply(&x).unwrap(), &explicit) < 1e-10);
}

#[test]
fn materialize_cap() {
    let s = SketchOperator::<f64>::countsketch(64, 1024, 1, 0).unwrap();
    assert!(matches!(
        s.materialize_with_cap(1000),
        Err(Error::TooLarge {
            entries: 65536,
            cap: 1000
        })
    ));
}

#[test]
fn descriptor_round_trip() {
    let g = SketchOperator::<f64>::gaussian(8, 32, 3).unwrap();
    let h = SketchOperator::<f64>::srht(32, 64, 4).unwrap();
    let c = SketchOperator::<f64>::countsketch(64, 128, 3, 5).unwrap();
    let chain = SketchOperator::compose(g, SketchOperator::compose(h, c).unwrap()).unwrap();
    let json = serde_json::to_string(&chain.descriptor()).unwrap();
    assert!(json.contains("\"family\":\"composed\""));
    assert!(json.contains("\"s\":3"));
    let back: SketchDescriptor = serde_json::from_str(&json).unwrap();
    assert_eq!(SketchOperator::from_descriptor(&back, None).unwrap(), chain);

    let a = rand_matrix(40, 3, 2);
    let l = LeverageScores::from_matrix(&a).unwrap();
    let lev = SketchOperator::leverage_from_scores(&l, 12, 9).unwrap();
    let d = lev.descriptor();
    assert_eq!(serde_json::to_value(&d).unwrap()["family"], "leverage");
    assert!(SketchOperator::<f64>::from_descriptor(&d, None).is_err());
    assert_eq!(SketchOperator::from_descriptor(&d, Some(&l)).unwrap(), lev);
}

/// Orthonormal 16x4 basis with every row of squared norm 1/4: uniform
/// leverage, so every row has positive sampling probability.
fn uniform_leverage_basis() -> Matrix<f64> {
    Matrix::from_fn(16, 4, |i, j| hadamard_entry(i, j) as f64 / 4.0)
}

#[test]
fn unbiased_gram_for_every_family() {
    let seeds = 2000u64;
    let n = 16;
    let l = LeverageScores::from_matrix(&uniform_leverage_basis()).unwrap();
    type Builder<'a> = Box<dyn Fn(u64) -> SketchOperator<f64> + 'a>;
    let builders: Vec<(&str, Builder)> = vec![
        ("gaussian", Box::new(|s| SketchOperator::gaussian(4, n, s).unwrap())),
        ("srht", Box::new(|s| SketchOperator::srht(4, n, s).unwrap())),
        (
            "countsketch",
            Box::new(|s| SketchOperator::countsketch(4, n, 2, s).unwrap()),
        ),
        (
            "leverage",
            Box::new(move |s| SketchOperator::leverage_from_scores(&l, 8, s).unwrap()),
        ),
    ];
    for (name, build) in builders {
        let mut acc = Matrix::<f64>::zeros(n, n);
        for seed in 0..seeds {
            let s = build(seed).materialize().unwrap();
            let g = s.tr_matmul(&s).unwrap();
            acc = acc.add(&g).unwrap();
        }
        let mean = acc.scale(1.0 / seeds as f64);
        let dev = mean.sub(&Matrix::identity(n)).unwrap().max_abs();
        assert!(dev <= 5.0 / (seeds as f64).sqrt(), "{name}: {dev}");
    }
}

fn arb_operator() -> impl Strategy<Value = SketchOperator<f64>> {
    (0u8..5, 0u32..=8, any::<u64>(), 1usize..=16).prop_flat_map(|(fam, logn, seed, frac)| {
        let n = 1usize << logn;
        let m = ((n * frac) / 16).max(1);
        Just(match fam {
            0 => SketchOperator::gaussian(m, n, seed).unwrap(),
            1 => SketchOperator::srht(m, n, seed).unwrap(),
            2 => SketchOperator::countsketch(m, n, 1 + (seed as usize % m), seed).unwrap(),
            3 => {
                let a = rand_matrix(n.max(2), 1, seed);
                let l = LeverageScores::from_matrix(&a).unwrap();
                SketchOperator::leverage_from_scores(&l, m.min(n.max(2)), seed).unwrap()
            }
            _ => {
                let inner = SketchOperator::srht(n.max(2) / 2, n.max(2), seed).unwrap();
                let outer = SketchOperator::gaussian(1, n.max(2) / 2, seed ^ 1).unwrap();
                SketchOperator::compose(outer, inner).unwrap()
            }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn matrix_free_matches_materialized(op in arb_operator(), k in 1usize..5, seed in any::<u64>()) {
        let x = rand_matrix(op.n(), k, seed);
        let fast = op.apply(&x).unwrap();
        let slow = op.materialize().unwrap().matmul(&x).unwrap();
        let scale = slow.frobenius_norm().max(1e-300);
        prop_assert!(fast.sub(&slow).unwrap().frobenius_norm() <= 1e-10 * scale);
    }

    #[test]
    fn unit_columns(logn in 0u32..=7, frac in 1usize..=8, s_pick in any::<usize>(), seed in any::<u64>()) {
        let n = 1usize << logn;
        let m = ((n * frac) / 8).max(1);
        let s = 1 + s_pick % m;
        for op in [SketchOperator::<f64>::srht(m, n, seed).unwrap(),
                   SketchOperator::<f64>::countsketch(m, n, s, seed).unwrap()] {
            for c in op.materialize().unwrap().column_norms() {
                prop_assert!((c - 1.0).abs() <= 1e-12);
            }
        }
    }
}
