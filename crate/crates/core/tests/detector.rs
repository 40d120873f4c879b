use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strain_tc::degrade::{add_noise, FrameLabel, FrameQualityMask, NoiseSpec};
use strain_tc::eval::{detect_bad_frames, DetectConfig};
use strain_tc::phantom::{synth_incremental, PhantomSpec, Sample};

#[test]
fn single_zero_db_frame_is_detected() {
    let spec = PhantomSpec::preset(Sample::A).with_resolution(32, 32);
    let clean = synth_incremental(&spec).unwrap();
    let n = clean.n_frames();
    let cfg = DetectConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut hits, mut false_alarms) = (0, 0);
    let trials = 100;
    for trial in 0..trials {
        // The first and last frames have no two-sided reference.
        let bad = rng.random_range(1..n - 1);
        let mut mask = FrameQualityMask::all_good(n, 60.0);
        mask.labels[bad] = FrameLabel::Bad;
        mask.applied_snr_db[bad] = 0.0;
        let noisy = add_noise(&clean, &mask, &NoiseSpec::new(60.0, 1.0, trial as u64)).unwrap();
        let found = detect_bad_frames(&noisy, &cfg).unwrap();
        if !found.is_good(bad) {
            hits += 1;
        }
        false_alarms += found.bad_indices().iter().filter(|&&f| f != bad).count();
    }
    let rate = hits as f64 / trials as f64;
    assert!(rate > 0.99, "detection rate {rate}");
    assert!(false_alarms <= trials, "{false_alarms} false alarms over {trials} trials");
}
