mod common;

use std::f64::consts::TAU;

use common::random_events;
use proptest::prelude::*;
use pulsepair::channelizer::wrap_phase;
use pulsepair::pairdetect::{form_pairs, quantize_event, read_level1_archive, write_level1_archive, PairCandidate};
use pulsepair::phasefilter::{phase_metric, second_level_filter};
use pulsepair::FilterParams;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

#[test]
fn archive_round_trip_is_exact_after_quantization() {
    let events = random_events(10_000, 5000, 7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("level1.csv");
    write_level1_archive(&path, &events).unwrap();
    let back = read_level1_archive(&path).unwrap();
    assert_eq!(back.len(), events.len());
    for (a, b) in events.iter().zip(&back) {
        assert_eq!(&quantize_event(a), b);
    }
    // A second pass through the archive changes nothing.
    let again = dir.path().join("again.csv");
    write_level1_archive(&again, &back).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn widening_filters_never_loses_candidates() {
    let events = random_events(10_000, 400, 21);
    let pairs = form_pairs(&events, 2, false);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let narrow = FilterParams {
            tau_int_s: rng.random_range(-20e-9..20e-9),
            filter_halfwidth_rad: rng.random_range(0.01..0.5),
            log_delta_f_low: rng.random_range(-5.5..-2.0),
            log_delta_f_high: rng.random_range(-2.0..0.5),
            ..FilterParams::default()
        };
        let mut wide = narrow.clone();
        match rng.random_range(0..4) {
            0 => wide.filter_halfwidth_rad += rng.random_range(0.0..0.5),
            1 => wide.log_delta_f_low -= rng.random_range(0.0..1.0),
            2 => wide.log_delta_f_high += rng.random_range(0.0..1.0),
            _ => {
                wide.filter_halfwidth_rad += rng.random_range(0.0..0.5);
                wide.log_delta_f_low -= rng.random_range(0.0..1.0);
                wide.log_delta_f_high += rng.random_range(0.0..1.0);
            }
        }
        let n = second_level_filter(&pairs, &narrow).unwrap().passed.len();
        let w = second_level_filter(&pairs, &wide).unwrap().passed.len();
        assert!(w >= n, "{narrow:?} -> {wide:?}: {n} then {w}");
    }
}

#[test]
fn pairing_ignores_arrival_order() {
    let events = random_events(3000, 200, 4);
    let reference = form_pairs(&events, 1, false);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let mut shuffled = events.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(form_pairs(&shuffled, 1, false), reference);
    }
    // Every event is the successor of at most one pair and the predecessor
    // of at most one pair.
    let mut succ = std::collections::HashSet::new();
    let mut pred = std::collections::HashSet::new();
    for c in &reference {
        assert!(succ.insert((c.event_b.frame_index, c.event_b.bin_index)));
        assert!(pred.insert((c.event_a.frame_index, c.event_a.bin_index)));
    }
}

fn candidate(events: &[pulsepair::pairdetect::PulseEvent], i: usize) -> PairCandidate {
    PairCandidate::new(events[i].clone(), events[i + 1].clone())
}

proptest! {
    #[test]
    fn metric_is_additive_in_tau(seed in 0u64..500, t1 in -1e-7f64..1e-7, t2 in -1e-7f64..1e-7) {
        let events = random_events(4, 1, seed);
        let c = candidate(&events, 0);
        prop_assume!(c.delta_f_hz != 0.0);
        let lhs = phase_metric(&c, t1 + t2, false).unwrap();
        let rhs = wrap_phase(phase_metric(&c, t1, false).unwrap() + TAU * c.delta_f_hz * t2);
        let diff = wrap_phase(lhs - rhs);
        prop_assert!(diff.abs() < 1e-6, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn swapping_events_negates_uncorrected_metric(seed in 0u64..500) {
        let events = random_events(4, 1, seed);
        let ab = candidate(&events, 0);
        let ba = PairCandidate::new(ab.event_b.clone(), ab.event_a.clone());
        prop_assert_eq!(ba.delta_f_hz, -ab.delta_f_hz);
        let m1 = phase_metric(&ab, 0.0, false).unwrap();
        let m2 = phase_metric(&ba, 0.0, false).unwrap();
        prop_assert!(wrap_phase(m1 + m2).abs() < 1e-12);
        // The corrected metric flips too, since the correction is odd in delta f.
        let c1 = phase_metric(&ab, 3e-8, false).unwrap();
        let c2 = phase_metric(&ba, 3e-8, false).unwrap();
        prop_assert!(wrap_phase(c1 + c2).abs() < 1e-9);
    }
}
