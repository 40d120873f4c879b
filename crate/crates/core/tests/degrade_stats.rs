//! Monte-Carlo checks of the injected noise against its nominal statistics.

use strain_tc::degrade::{add_noise, rms, FrameQualityMask, NoiseSpec};
use strain_tc::{StackKind, StrainStack};

/// 100 x 100 frames of a smooth non-constant field, 4 frames.
fn clean_stack() -> StrainStack {
    let (n, h, w) = (4, 100, 100);
    let data = (0..n * h * w)
        .map(|i| {
            let (f, p) = (i / (h * w), i % (h * w));
            (1.0 + 0.5 * ((p % w) as f64 / 7.0).sin()) * 1e-3 / (f + 1) as f64
        })
        .collect();
    StrainStack::new(n, h, w, 0.5, StackKind::Incremental, data).unwrap()
}

fn noise_fields(snrs: &[f64], seed: u64) -> (StrainStack, Vec<Vec<f64>>) {
    let clean = clean_stack();
    let mask = FrameQualityMask {
        labels: vec![strain_tc::degrade::FrameLabel::Good; snrs.len()],
        applied_snr_db: snrs.to_vec(),
    };
    let noisy = add_noise(&clean, &mask, &NoiseSpec::new(60.0, 1.0, seed)).unwrap();
    let noise = (0..snrs.len())
        .map(|n| noisy.frame(n).iter().zip(clean.frame(n)).map(|(a, b)| a - b).collect())
        .collect();
    (clean, noise)
}

#[test]
fn empirical_snr_matches_target() {
    let snrs = [0.0, 30.0, 40.0, 60.0];
    for seed in 0..5 {
        let (clean, noise) = noise_fields(&snrs, seed);
        for (n, &target) in snrs.iter().enumerate() {
            let measured = 20.0 * (rms(clean.frame(n)) / rms(&noise[n])).log10();
            assert!((measured - target).abs() < 0.5, "frame {n}: {measured} dB vs {target} dB");
        }
    }
}

#[test]
fn noise_is_zero_mean() {
    let snrs = [0.0, 30.0, 40.0, 60.0];
    let (_, noise) = noise_fields(&snrs, 11);
    for field in &noise {
        let len = field.len() as f64;
        let mean = field.iter().sum::<f64>() / len;
        let sigma = rms(field);
        assert!(mean.abs() < 4.0 * sigma / len.sqrt(), "mean {mean}, sigma {sigma}");
    }
}

#[test]
fn frames_get_uncorrelated_noise() {
    let (_, noise) = noise_fields(&[0.0; 4], 3);
    for a in 0..noise.len() {
        for b in a + 1..noise.len() {
            let dot: f64 = noise[a].iter().zip(&noise[b]).map(|(x, y)| x * y).sum();
            let corr = dot / (noise[a].len() as f64 * rms(&noise[a]) * rms(&noise[b]));
            assert!(corr.abs() < 0.05, "frames {a},{b}: correlation {corr}");
        }
    }
}
