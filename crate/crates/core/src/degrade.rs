//! SNR-controlled Gaussian corruption of incremental strain stacks.
//!
//! SNR is measured per frame as `20 log10(rms(frame) / sigma)`. Good frames are
//! degraded at the base SNR, bad frames (placed uniformly at random without
//! replacement) at the bad-frame SNR. Each frame's noise comes from its own
//! ChaCha stream keyed by `(seed, frame index)`, so frames can be processed in
//! any order.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stack::{StackKind, StrainStack};

/// Fewest good frames the spline reconstruction can work with.
pub const MIN_GOOD_FRAMES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub base_snr_db: f64,
    pub bad_frame_snr_db: f64,
    pub good_frame_fraction: f64,
    pub rng_seed: u64,
}

impl NoiseSpec {
    pub fn new(base_snr_db: f64, good_frame_fraction: f64, rng_seed: u64) -> Self {
        Self { base_snr_db, bad_frame_snr_db: 0.0, good_frame_fraction, rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.good_frame_fraction > 0.0 && self.good_frame_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "good_frame_fraction must lie in (0, 1], got {}",
                self.good_frame_fraction
            )));
        }
        if !(self.base_snr_db > self.bad_frame_snr_db) {
            return Err(Error::InvalidParameter(format!(
                "base SNR ({} dB) must exceed bad-frame SNR ({} dB)",
                self.base_snr_db, self.bad_frame_snr_db
            )));
        }
        Ok(())
    }

    pub fn good_count(&self, n_frames: usize) -> usize {
        (self.good_frame_fraction * n_frames as f64).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameLabel {
    Good,
    Bad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameQualityMask {
    pub labels: Vec<FrameLabel>,
    /// SNR each frame was degraded at; NaN when unknown (detected masks).
    pub applied_snr_db: Vec<f64>,
}

impl FrameQualityMask {
    pub fn all_good(n_frames: usize, snr_db: f64) -> Self {
        Self { labels: vec![FrameLabel::Good; n_frames], applied_snr_db: vec![snr_db; n_frames] }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_good(&self, n: usize) -> bool {
        self.labels[n] == FrameLabel::Good
    }

    pub fn good_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == FrameLabel::Good).count()
    }

    pub fn good_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.is_good(n)).collect()
    }

    pub fn bad_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| !self.is_good(n)).collect()
    }
}

fn frame_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Choose which frames are bad: `N - round(f N)` distinct indices, uniform
/// without replacement.
pub fn place_bad_frames(n_frames: usize, spec: &NoiseSpec) -> Result<FrameQualityMask> {
    spec.validate()?;
    if n_frames < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 frames, got {n_frames}")));
    }
    let good = spec.good_count(n_frames);
    if good < MIN_GOOD_FRAMES {
        return Err(Error::InsufficientGoodFrames { good, total: n_frames, min: MIN_GOOD_FRAMES });
    }
    let mut labels = vec![FrameLabel::Good; n_frames];
    let mut snr = vec![spec.base_snr_db; n_frames];
    let mut rng = frame_rng(spec.rng_seed, 0);
    for n in index::sample(&mut rng, n_frames, n_frames - good) {
        labels[n] = FrameLabel::Bad;
        snr[n] = spec.bad_frame_snr_db;
    }
    Ok(FrameQualityMask { labels, applied_snr_db: snr })
}

/// Unit-variance noise field for one frame; `add_noise` scales this by the
/// frame's sigma.
pub fn standard_noise(seed: u64, frame: usize, len: usize) -> Vec<f64> {
    let mut rng = frame_rng(seed, frame as u64 + 1);
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Noise standard deviation giving `snr_db` against a signal of RMS `signal_rms`.
pub fn noise_sigma(signal_rms: f64, snr_db: f64) -> f64 {
    signal_rms * 10f64.powf(-snr_db / 20.0)
}

/// Add zero-mean Gaussian noise to every frame at the SNR recorded in `mask`.
pub fn add_noise(
    stack: &StrainStack,
    mask: &FrameQualityMask,
    spec: &NoiseSpec,
) -> Result<StrainStack> {
    stack.require_kind(StackKind::Incremental)?;
    if mask.len() != stack.n_frames() {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} frames, stack has {}",
            mask.len(),
            stack.n_frames()
        )));
    }
    let mut out = stack.clone();
    let seed = spec.rng_seed;
    out.par_frames_mut().enumerate().for_each(|(n, frame)| {
        let sigma = noise_sigma(rms(frame), mask.applied_snr_db[n]);
        let z = standard_noise(seed, n, frame.len());
        for (v, e) in frame.iter_mut().zip(z) {
            *v += sigma * e;
        }
    });
    Ok(out)
}
