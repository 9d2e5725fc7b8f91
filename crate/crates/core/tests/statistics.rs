use proptest::prelude::*;
use pulsepair::skystats::{
    analyze_ra, binomial_pmf, binomial_tail, cohens_d, false_alarm_tail_check, finite_segment_rate, null_max_abs_d,
    RaBins,
};
use pulsepair::SnrConvention;

/// `P(X >= k)` by summing the probability of every one of the `2^n`
/// Bernoulli outcome sequences.
fn enumerate_tail(n: u32, p: f64, k: u32) -> f64 {
    let mut by_count = vec![0.0f64; n as usize + 1];
    for mask in 0u32..(1 << n) {
        let ones = mask.count_ones();
        by_count[ones as usize] += p.powi(ones as i32) * (1.0 - p).powi((n - ones) as i32);
    }
    by_count[k as usize..].iter().rev().sum()
}

#[test]
fn tail_matches_brute_force_enumeration() {
    for &n in &[1u32, 5, 12, 20] {
        for &p in &[0.025, 0.3, 0.5, 0.91] {
            for k in 0..=n {
                let exact = binomial_tail(n as u64, p, k as u64, false).unwrap();
                let brute = enumerate_tail(n, p, k);
                assert!((exact - brute).abs() <= 1e-12, "n={n} p={p} k={k}: {exact} vs {brute}");
            }
        }
    }
}

#[test]
fn pmf_sums_to_one() {
    for &(n, p) in &[(328u64, 0.025), (246, 6.1 / 246.0), (10_000, 0.001), (50, 0.5)] {
        let total: f64 = (0..=n).map(|k| binomial_pmf(n, p, k)).sum();
        assert!((total - 1.0).abs() < 1e-12, "n={n}: {total}");
    }
}

proptest! {
    #[test]
    fn tail_identities(n in 1u64..2000, p in 0.001f64..0.999, frac in 0.0f64..1.0) {
        let k = ((n as f64) * frac) as u64;
        let ge = binomial_tail(n, p, k, false).unwrap();
        let gt = binomial_tail(n, p, k, true).unwrap();
        let pmf = binomial_pmf(n, p, k);
        prop_assert!((ge - (gt + pmf)).abs() <= 1e-12 * ge.max(1e-300) + 1e-15);
        prop_assert!(gt <= ge);
        if k < n {
            prop_assert!(binomial_tail(n, p, k + 1, false).unwrap() <= ge);
        }
        let p2 = (p * 1.1).min(0.999);
        prop_assert!(binomial_tail(n, p2, k, false).unwrap() >= ge - 1e-13);
    }

    #[test]
    fn cohens_d_follows_its_definition(n in 1u64..5000, p in 0.001f64..0.999, frac in 0.0f64..1.0) {
        let obs = ((n as f64) * frac) as u64;
        let d = cohens_d(obs, n, p).unwrap();
        let mean = n as f64 * p;
        let sd = (mean * (1.0 - p)).sqrt();
        prop_assert!((d * sd - (obs as f64 - mean)).abs() < 1e-9 * (1.0 + mean));
    }

    #[test]
    fn relabelling_bins_permutes_statistics(seed in 0u64..1000) {
        let bins = RaBins::new(0.0, 1.0, 0.1).unwrap();
        let ra: Vec<f64> = (0..200).map(|i| (((i as u64 * 2654435761 + seed * 97) % 1000) as f64 + 0.5) / 1000.0).collect();
        // Reflect every RA about the window centre; bins swap i <-> 9 - i.
        let mirrored: Vec<f64> = ra.iter().map(|&x| 1.0 - x).collect();
        let p = vec![0.1; 10];
        let a = analyze_ra(&ra, &bins, &p).unwrap();
        let b = analyze_ra(&mirrored, &bins, &p).unwrap();
        let total: u64 = a.bins.iter().map(|s| s.observed_count).sum();
        prop_assert_eq!(total, 200);
        for i in 0..10 {
            prop_assert_eq!(a.bins[i].observed_count, b.bins[9 - i].observed_count);
            prop_assert_eq!(a.bins[i].cohens_d, b.bins[9 - i].cohens_d);
        }
    }
}

#[test]
fn null_max_d_exceeds_three_point_three_rarely_with_many_trials() {
    // With 40 bins the largest of 40 correlated |d| values stays below
    // 3.3 about 96% of the time once the binomial is close to normal.
    let runs = 2000;
    let maxima = null_max_abs_d(3000, &[0.025; 40], runs, 11).unwrap();
    let quiet = maxima.iter().filter(|&&d| d < 3.3).count() as f64 / runs as f64;
    assert!(quiet >= 0.95, "only {quiet} of null runs stay below 3.3");
}

#[test]
fn noise_crossing_rate_matches_finite_segment_prediction() {
    let check = false_alarm_tail_check(8.5, 20_000_000, 256, SnrConvention::IncludeTestBin, 3).unwrap();
    let expected = finite_segment_rate(8.5, 256, SnrConvention::IncludeTestBin);
    let sd = (expected / check.trials as f64).sqrt();
    assert!((check.empirical_rate - expected).abs() < 4.0 * sd, "{check:?}");
    let excl = false_alarm_tail_check(8.5, 20_000_000, 256, SnrConvention::ExcludeTestBin, 3).unwrap();
    let expected = finite_segment_rate(8.5, 256, SnrConvention::ExcludeTestBin);
    assert!((excl.empirical_rate - expected).abs() < 4.0 * (expected / excl.trials as f64).sqrt(), "{excl:?}");
    assert!(!check.low_count_warning);
}
