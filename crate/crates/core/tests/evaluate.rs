use proptest::prelude::*;
use pyroseason::evaluate::*;
use pyroseason::forecast::Method;
use pyroseason::hexgrid::CellId;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-50.0..150.0)).collect()
}

/// Direct loops over the metric definitions.
fn oracle_mae(y: &[f64], f: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        s += (y[i] - f[i]).abs();
    }
    s / y.len() as f64
}

fn oracle_mase(y: &[f64], f: &[f64], train: &[f64], m: usize) -> f64 {
    let mut denom = 0.0;
    for t in m..train.len() {
        denom += (train[t] - train[t - m]).abs();
    }
    denom /= (train.len() - m) as f64;
    let mut q = 0.0;
    for i in 0..y.len() {
        q += ((y[i] - f[i]) / denom).abs();
    }
    q / y.len() as f64
}

#[test]
fn metrics_match_direct_summation_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let m = rng.random_range(1..12);
        let len = m + rng.random_range(1..60);
        let train = random_vec(&mut rng, len);
        let y = random_vec(&mut rng, n);
        let f = random_vec(&mut rng, n);
        assert!(rel_close(mae(&y, &f).unwrap(), oracle_mae(&y, &f), 1e-12));
        assert!(rel_close(mase_nonseasonal(&y, &f, &train).unwrap(), oracle_mase(&y, &f, &train, 1), 1e-12));
        assert!(rel_close(mase_seasonal(&y, &f, &train, m).unwrap(), oracle_mase(&y, &f, &train, m), 1e-12));
    }
}

#[test]
fn snaive_on_periodic_series_has_zero_mase() {
    let season = [4.0, 9.0, 1.0, 0.0, 7.0, 3.0, 5.0];
    let train: Vec<f64> = (0..70).map(|t| season[t % 7] + if t < 7 { 1.0 } else { 0.0 }).collect();
    let test: Vec<f64> = (0..21).map(|t| season[t % 7]).collect();
    let snaive: Vec<f64> = (0..21).map(|t| train[63 + t % 7]).collect();
    assert_eq!(mase_seasonal(&test, &snaive, &train, 7).unwrap(), 0.0);
}

#[test]
fn mase_below_one_iff_better_than_in_sample_seasonal_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let train = random_vec(&mut rng, 30);
        let y = random_vec(&mut rng, 7);
        let f: Vec<f64> = y.iter().map(|v| v + rng.random_range(-200.0..200.0)).collect();
        let test_mae: f64 = y.iter().zip(&f).map(|(a, b)| (a - b).abs()).sum::<f64>() / 7.0;
        let naive_mae: f64 = (7..30).map(|t| (train[t] - train[t - 7]).abs()).sum::<f64>() / 23.0;
        let m = mase_seasonal(&y, &f, &train, 7).unwrap();
        assert_eq!(m < 1.0, test_mae < naive_mae);
    }
}

#[test]
fn undefined_mase_is_flagged() {
    assert_eq!(mase_seasonal(&[1.0], &[2.0], &[5.0; 14], 7), Err(EvaluateError::UndefinedScale));
    assert_eq!(mase_nonseasonal(&[1.0], &[2.0], &[3.0, 3.0]), Err(EvaluateError::UndefinedScale));
}

proptest! {
    #[test]
    fn mase_is_scale_free(seed in 0u64..10_000, c in 0.001f64..1000.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train = random_vec(&mut rng, 40);
        let y = random_vec(&mut rng, 14);
        let f = random_vec(&mut rng, 14);
        let s = |v: &[f64]| v.iter().map(|x| x * c).collect::<Vec<_>>();
        let base = mase_seasonal(&y, &f, &train, 7).unwrap();
        let scaled = mase_seasonal(&s(&y), &s(&f), &s(&train), 7).unwrap();
        prop_assert!(rel_close(base, scaled, 1e-12));
        let base = mase_nonseasonal(&y, &f, &train).unwrap();
        let scaled = mase_nonseasonal(&s(&y), &s(&f), &s(&train)).unwrap();
        prop_assert!(rel_close(base, scaled, 1e-12));
        prop_assert!(rel_close(mae(&s(&y), &s(&f)).unwrap(), c * mae(&y, &f).unwrap(), 1e-12));
    }

    #[test]
    fn selection_ignores_common_rescaling(errs in prop::collection::vec(0.0f64..100.0, 1..7), c in 0.01f64..100.0) {
        let methods = [Method::Arima, Method::Ets, Method::Mlp, Method::Snaive, Method::Stlf, Method::Tsglm];
        let reports = |k: f64| -> Vec<ErrorReport> {
            errs.iter().zip(methods).map(|(e, m)| report(m, Some(e * k))).collect()
        };
        prop_assert_eq!(select_best(&reports(1.0), SelectionMetric::Mae).unwrap(), select_best(&reports(c), SelectionMetric::Mae).unwrap());
    }

    #[test]
    fn friedman_depends_only_on_within_cell_ranks(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<Vec<f64>> = (0..15).map(|_| (0..4).map(|_| rng.random_range(0.01..10.0)).collect()).collect();
        let transformed: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v: &f64| v.ln() * 3.0 + v.powi(3)).collect()).collect();
        let a = friedman_test(&m).unwrap();
        let b = friedman_test(&transformed).unwrap();
        prop_assert_eq!(a.statistic, b.statistic);
        prop_assert_eq!(a.mean_ranks, b.mean_ranks);
    }

    #[test]
    fn wilcoxon_ignores_positive_scaling(seed in 0u64..1000, c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_vec(&mut rng, 25);
        let b = random_vec(&mut rng, 25);
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let scaled: Vec<f64> = d.iter().map(|v| v * c).collect();
        let zeros = vec![0.0; 25];
        let r1 = wilcoxon_signed_rank(&d, &zeros).unwrap();
        let r2 = wilcoxon_signed_rank(&scaled, &zeros).unwrap();
        prop_assert_eq!(r1.statistic, r2.statistic);
        prop_assert!(rel_close(r1.p_value, r2.p_value, 1e-12));
    }
}

fn report(method: Method, mae: Option<f64>) -> ErrorReport {
    ErrorReport {
        cell: CellId::new(1, 0).unwrap(),
        method,
        mae_monthly: mae,
        mase_monthly: mae.map(|v| v / 2.0),
        mae_fss: 0.0,
        nmae_fss: None,
        mase_fss: None,
    }
}

#[test]
fn selection_examples() {
    let r = [report(Method::Snaive, Some(5.0)), report(Method::Ets, Some(3.0))];
    assert_eq!(select_best(&r, SelectionMetric::Mae).unwrap(), Method::Ets);
    let tie = [report(Method::Stlf, Some(3.0)), report(Method::Ets, Some(3.0))];
    assert_eq!(select_best(&tie, SelectionMetric::Mae).unwrap(), Method::Ets);
    assert_eq!(select_best(&tie, SelectionMetric::Mase).unwrap(), Method::Ets);
    assert_eq!(select_best(&[report(Method::Mlp, Some(9.0))], SelectionMetric::Mae).unwrap(), Method::Mlp);
    // Undefined MASE keeps the method eligible through MAE.
    let mut undefined = report(Method::Arima, Some(1.0));
    undefined.mase_monthly = None;
    let r = [undefined, report(Method::Ets, Some(3.0))];
    assert_eq!(select_best(&r, SelectionMetric::Mase).unwrap(), Method::Arima);
    // Linreg has no monthly error and never wins the monthly selection.
    let r = [report(Method::Linreg, None), report(Method::Snaive, Some(30.0))];
    assert_eq!(select_best(&r, SelectionMetric::Mae).unwrap(), Method::Snaive);
    assert!(select_best(&[report(Method::Linreg, None)], SelectionMetric::Mae).is_err());
}

#[test]
fn friedman_identical_methods() {
    let m = vec![vec![2.0, 2.0, 2.0]; 12];
    let r = friedman_test(&m).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.p_value, 1.0);
    assert_eq!(r.mean_ranks, vec![2.0; 3]);
}

fn friedman_stat(m: &[Vec<f64>]) -> f64 {
    friedman_test(m).unwrap().statistic
}

#[test]
fn friedman_against_permutation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m: Vec<Vec<f64>> = (0..20)
        .map(|_| {
            let best = rng.random_range(0.0..1.0);
            vec![best, 1.0 + rng.random_range(0.0..2.0), 1.0 + rng.random_range(0.0..2.0)]
        })
        .collect();
    let r = friedman_test(&m).unwrap();
    assert!(r.p_value < 0.01, "{}", r.p_value);
    assert_eq!(r.mean_ranks[0], 1.0);
    let observed = r.statistic;
    let mut shuffled = m.clone();
    let mut at_least = 0usize;
    let trials = 100_000;
    for _ in 0..trials {
        for (row, orig) in shuffled.iter_mut().zip(&m) {
            row.copy_from_slice(orig);
            row.shuffle(&mut rng);
        }
        if friedman_stat(&shuffled) >= observed - 1e-9 {
            at_least += 1;
        }
    }
    let p_perm = (at_least + 1) as f64 / (trials + 1) as f64;
    assert!(p_perm < 0.01, "{p_perm}");
}

/// Two-sided exact sign-test p-value.
fn sign_test(wins: usize, n: usize) -> f64 {
    let k = wins.min(n - wins);
    let mut tail = 0.0;
    for i in 0..=k {
        let mut c = 1.0;
        for j in 0..i {
            c *= (n - j) as f64 / (j + 1) as f64;
        }
        tail += c;
    }
    (2.0 * tail / 2f64.powi(n as i32)).min(1.0)
}

#[test]
fn two_method_friedman_orders_like_the_sign_test() {
    let n = 20;
    let mut pairs = Vec::new();
    for wins in 0..=n {
        let m: Vec<Vec<f64>> = (0..n).map(|i| if i < wins { vec![1.0, 2.0] } else { vec![2.0, 1.0] }).collect();
        let r = friedman_test(&m).unwrap();
        let b = n - wins;
        assert!((r.statistic - (wins as f64 - b as f64).powi(2) / n as f64).abs() < 1e-12);
        pairs.push((r.p_value, sign_test(wins, n)));
    }
    for a in &pairs {
        for b in &pairs {
            if a.1 < b.1 - 1e-15 {
                assert!(a.0 < b.0, "{a:?} {b:?}");
            }
        }
    }
}

#[test]
fn nemenyi_critical_difference() {
    for alpha in [0.05, 0.001] {
        for k in 2..=10 {
            let q = nemenyi_q(k, alpha).unwrap();
            let cd = nemenyi_cd(k, 30, alpha).unwrap();
            let kf = k as f64;
            assert!((cd - q * (kf * (kf + 1.0) / (6.0 * 30.0)).sqrt()).abs() < 1e-12);
            let quarter = nemenyi_cd(k, 120, alpha).unwrap();
            assert!((quarter - cd / 2.0).abs() < 1e-12);
            assert!(cd >= 0.0, "zero gap is never significant");
        }
    }
    // k = 2: q = z_{0.025}, CD = 1.960·√(1/N).
    assert!((nemenyi_cd(2, 25, 0.05).unwrap() - 1.960 / 5.0).abs() < 1e-12);
}

#[test]
fn critical_value_tables_match_the_studentized_range() {
    let published = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
    for k in 2..=10 {
        let q05 = studentized_range_quantile(0.05, k) / 2f64.sqrt();
        assert!((q05 - published[k - 2]).abs() <= 1.1e-3, "k={k} {q05}");
        assert!((q05 - Q_005[k - 2]).abs() <= 1.1e-3);
        let q001 = studentized_range_quantile(0.001, k) / 2f64.sqrt();
        assert!((q001 - Q_0001[k - 2]).abs() <= 1e-3, "k={k} {q001}");
    }
}

#[test]
fn wilcoxon_degenerate_when_equal() {
    let a: Vec<f64> = (0..15).map(f64::from).collect();
    let r = wilcoxon_signed_rank(&a, &a).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.p_value, 1.0);
}

/// Exact two-sided p-value of W⁺ for n untied ranks by counting subsets.
fn exact_wilcoxon(w_plus: f64, n: usize) -> f64 {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for r in 1..=n {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(n as i32);
    let mean = max as f64 / 2.0;
    let dev = (w_plus - mean).abs();
    let tail: f64 = (0..=max).filter(|&s| (s as f64 - mean).abs() >= dev - 1e-9).map(|s| counts[s]).sum();
    (tail / total).min(1.0)
}

#[test]
fn wilcoxon_shift_of_ten() {
    let b: Vec<f64> = (0..30).map(|i| f64::from(i) * 1.7).collect();
    let a: Vec<f64> = b.iter().map(|v| v + 10.0).collect();
    let r = wilcoxon_signed_rank(&a, &b).unwrap();
    assert!(r.p_value < 0.001);
    // All differences tie: under the null only the 2 all-same-sign outcomes
    // reach W⁺ = 465, so the exact p-value is 2/2³⁰.
    assert_eq!(r.statistic, 465.0);
    assert!(2.0 / 2f64.powi(30) < 0.001);
}

#[test]
fn wilcoxon_normal_approximation_tracks_exact_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let shift = rng.random_range(-0.5..0.5);
        let d: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0) + shift).collect();
        let zeros = vec![0.0; 30];
        let r = wilcoxon_signed_rank(&d, &zeros).unwrap();
        let exact = exact_wilcoxon(r.statistic, 30);
        // Without continuity correction the approximation is off by up to
        // about half a rank step in z (1/(2·48) at n = 30).
        assert!((r.p_value - exact).abs() < 0.02, "{} vs {exact}", r.p_value);
    }
    let strong: Vec<f64> = (1..=30).map(|i| f64::from(i) + 0.5).collect();
    let r = wilcoxon_signed_rank(&strong, &[0.0; 30]).unwrap();
    assert!(r.p_value < 0.001 && exact_wilcoxon(r.statistic, 30) < 0.001);
}

#[test]
fn wilcoxon_needs_ten_differences() {
    let a = [1.0, 2.0, 3.0];
    assert!(wilcoxon_signed_rank(&a, &[0.0; 3]).is_err());
}

#[test]
fn summaries_use_type7_quartiles() {
    let v: Vec<f64> = (1..=9).map(f64::from).collect();
    let s = summarize(&v).unwrap();
    assert_eq!((s.q1, s.median, s.q3), (3.0, 5.0, 7.0));
    assert_eq!(s.removed, 0);
}
