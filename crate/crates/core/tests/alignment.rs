use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxalign::align::{cross_correlate_all_shifts, ncc, search_alignment, Correlator, SearchConfig};
use voxalign::annotation::{rasterize_voice_sequence, VoiceSequence};
use voxalign::svd::PredictionSequence;
use voxalign::synth::{noisy_predictions, random_annotation, uniform_predictions};

const HOP: f64 = 315.0 / 22050.0;

fn random_pair(rng: &mut ChaCha8Rng, la: usize, lp: usize) -> (VoiceSequence, PredictionSequence) {
    let mut a: Vec<u8> = (0..la).map(|_| rng.random_bool(0.4) as u8).collect();
    a[rng.random_range(0..la)] = 1;
    let p = (0..lp).map(|_| rng.random_range(0.0..1.0)).collect();
    (VoiceSequence::new(a, HOP), PredictionSequence::new(p, HOP))
}

#[test]
fn fft_matches_direct_sum_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let (a, p) = random_pair(&mut rng, 1000, 1000);
        let scores = cross_correlate_all_shifts(&a, &p).unwrap();
        assert_eq!(scores.scores.len(), 1999);
        for (s, v) in scores.iter() {
            assert!((v - ncc(&a, &p, s).unwrap()).abs() < 1e-6, "shift {s}");
        }
    }
}

#[test]
fn fft_handles_unequal_lengths() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (la, lp) in [(1, 50), (50, 1), (333, 1024), (1025, 77)] {
        let (a, p) = random_pair(&mut rng, la, lp);
        let scores = cross_correlate_all_shifts(&a, &p).unwrap();
        assert_eq!(scores.min_shift, -(la as i64 - 1));
        assert_eq!(scores.max_shift(), lp as i64 - 1);
        for (s, v) in scores.iter() {
            assert!((v - ncc(&a, &p, s).unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn right_shift_by_seven_scores_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a: Vec<u8> = (0..300).map(|_| rng.random_bool(0.5) as u8).collect();
    // padded so nothing falls off the end
    let mut p = vec![0.0; 7];
    p.extend(a.iter().map(|&v| v as f64));
    let scores = cross_correlate_all_shifts(&VoiceSequence::new(a, HOP), &PredictionSequence::new(p, HOP)).unwrap();
    let (best, value) = scores.iter().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
    assert_eq!(best, 7);
    assert!((value - 1.0).abs() < 1e-9);
}

#[test]
fn recovers_stretch_and_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let file = random_annotation(&mut rng, "song", "artist", 60.0);
    let fr = file.timing.frame_rate;
    let cfg = SearchConfig::new(HOP);
    let avs = rasterize_voice_sequence(&file, 1.03 * fr, 2.3, HOP, 5000);
    let pred = PredictionSequence::new(avs.to_f64(), HOP);
    let r = search_alignment(&file, &pred, &cfg).unwrap();
    assert!((r.fr_hat - 1.03 * fr).abs() <= cfg.fr_step(fr) + 1e-12, "{r:?}");
    assert!((r.o_hat - 2.3).abs() <= HOP, "{r:?}");
    assert!(r.score >= 0.99, "{r:?}");
}

#[test]
fn identity_alignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let file = random_annotation(&mut rng, "song", "artist", 40.0);
    let avs = rasterize_voice_sequence(&file, file.timing.frame_rate, 0.0, HOP, 3000);
    let pred = PredictionSequence::new(avs.to_f64(), HOP);
    let r = search_alignment(&file, &pred, &SearchConfig::new(HOP)).unwrap();
    assert_eq!(r.o_hat, 0.0);
    assert_eq!(r.fr_hat, file.timing.frame_rate);
    assert!((r.score - 1.0).abs() < 1e-12);
}

#[test]
fn whole_hop_shifts_are_recovered_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let file = random_annotation(&mut rng, "song", "artist", 30.0);
    let fr = file.timing.frame_rate;
    for k in [-40i64, -3, 1, 25, 170] {
        let avs = rasterize_voice_sequence(&file, fr, k as f64 * HOP, HOP, 2500);
        let pred = PredictionSequence::new(avs.to_f64(), HOP);
        let r = search_alignment(&file, &pred, &SearchConfig::new(HOP)).unwrap();
        assert_eq!(r.fr_hat, fr);
        assert!((r.o_hat - k as f64 * HOP).abs() < 1e-9, "k={k} {r:?}");
    }
}

#[test]
fn noise_stays_below_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let file = random_annotation(&mut rng, "song", "artist", 60.0);
    let cfg = SearchConfig::new(HOP);
    let mut below = 0;
    for _ in 0..100 {
        let pred = uniform_predictions(&mut rng, HOP, 4200);
        if search_alignment(&file, &pred, &cfg).unwrap().score < cfg.t_corr {
            below += 1;
        }
    }
    assert!(below >= 99, "{below}/100 below threshold");
}

#[test]
fn noisy_rasterization_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let cfg = SearchConfig::new(HOP);
    for _ in 0..5 {
        let file = random_annotation(&mut rng, "song", "artist", 110.0);
        let fr = file.timing.frame_rate;
        let stretch = rng.random_range(0.96..1.04);
        let shift = rng.random_range(-5.0..5.0);
        let pred = noisy_predictions(&mut rng, &file, stretch * fr, shift, HOP, 10_000, 0.1);
        let r = search_alignment(&file, &pred, &cfg).unwrap();
        assert!((r.fr_hat - stretch * fr).abs() <= cfg.fr_step(fr), "{r:?}");
        assert!((r.o_hat - shift).abs() <= HOP, "{r:?} vs {shift}");
    }
}

#[test]
fn offset_window_limits_the_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let file = random_annotation(&mut rng, "song", "artist", 30.0);
    let avs = rasterize_voice_sequence(&file, file.timing.frame_rate, 3.0, HOP, 3000);
    let pred = PredictionSequence::new(avs.to_f64(), HOP);
    let cfg = SearchConfig {
        max_abs_offset_seconds: Some(1.0),
        ..SearchConfig::new(HOP)
    };
    let r = search_alignment(&file, &pred, &cfg).unwrap();
    assert!(r.o_hat.abs() <= 1.0);
    assert!(r.score < 0.99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_predictions_changes_nothing(
        a in prop::collection::vec(0u8..=1, 1..200),
        p in prop::collection::vec(0.0f64..1.0, 1..200),
        c in 0.01f64..100.0,
    ) {
        prop_assume!(a.contains(&1) && p.iter().any(|&v| v > 0.0));
        let a: Vec<f64> = a.iter().map(|&v| v as f64).collect();
        let scaled: Vec<f64> = p.iter().map(|v| v * c).collect();
        let base = Correlator::new(&p, a.len()).correlate(&a);
        let other = Correlator::new(&scaled, a.len()).correlate(&a);
        for ((_, x), (_, y)) in base.iter().zip(other.iter()) {
            prop_assert!((x - y).abs() < 1e-9);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x));
        }
    }
}
