use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StackKind {
    /// Strain between successive frames.
    Incremental,
    /// Running sum of incremental strain.
    Cumulative,
}

impl StackKind {
    pub fn name(self) -> &'static str {
        match self {
            StackKind::Incremental => "incremental",
            StackKind::Cumulative => "cumulative",
        }
    }
}

/// N temporal frames of H x W axial strain sampled every `sample_time_s`.
///
/// Storage is frame-major then row-major: value `(n, row, col)` lives at
/// `n * H * W + row * W + col`. Frame `n` (0-based) is acquired at time
/// `(n + 1) * sample_time_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainStack {
    n_frames: usize,
    height: usize,
    width: usize,
    sample_time_s: f64,
    kind: StackKind,
    data: Vec<f64>,
}

impl StrainStack {
    pub fn new(
        n_frames: usize,
        height: usize,
        width: usize,
        sample_time_s: f64,
        kind: StackKind,
        data: Vec<f64>,
    ) -> Result<Self> {
        if n_frames == 0 || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "stack dimensions must be non-zero, got {n_frames}x{height}x{width}"
            )));
        }
        if data.len() != n_frames * height * width {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {n_frames}x{height}x{width}, got {}",
                n_frames * height * width,
                data.len()
            )));
        }
        if !(sample_time_s.is_finite() && sample_time_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample_time_s must be positive, got {sample_time_s}"
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite strain value at index {i}")));
        }
        Ok(Self { n_frames, height, width, sample_time_s, kind, data })
    }

    /// Build a stack from per-pixel time series (pixel-major input).
    pub fn from_pixel_series(
        height: usize,
        width: usize,
        sample_time_s: f64,
        kind: StackKind,
        series: &[Vec<f64>],
    ) -> Result<Self> {
        let n_pixels = height * width;
        if series.len() != n_pixels {
            return Err(Error::ShapeMismatch(format!(
                "expected {n_pixels} pixel series, got {}",
                series.len()
            )));
        }
        let n_frames = series.first().map_or(0, Vec::len);
        if let Some(bad) = series.iter().position(|s| s.len() != n_frames) {
            return Err(Error::ShapeMismatch(format!("pixel {bad} has a different series length")));
        }
        let mut data = vec![0.0; n_frames * n_pixels];
        for (p, s) in series.iter().enumerate() {
            for (n, &v) in s.iter().enumerate() {
                data[n * n_pixels + p] = v;
            }
        }
        Self::new(n_frames, height, width, sample_time_s, kind, data)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn sample_time_s(&self) -> f64 {
        self.sample_time_s
    }

    pub fn kind(&self) -> StackKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        let len = self.n_pixels();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn frames(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n_pixels())
    }

    pub(crate) fn frames_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        let len = self.n_pixels();
        self.data.chunks_exact_mut(len)
    }

    pub(crate) fn par_frames_mut(&mut self) -> rayon::slice::ChunksExactMut<'_, f64> {
        let len = self.n_pixels();
        self.data.par_chunks_exact_mut(len)
    }

    /// Acquisition time of every frame, `(n + 1) * T_s`.
    pub fn times(&self) -> Vec<f64> {
        frame_times(self.n_frames, self.sample_time_s)
    }

    /// Temporal curve of one pixel (flat row-major index).
    pub fn pixel_series(&self, pixel: usize) -> Vec<f64> {
        let stride = self.n_pixels();
        self.data[pixel..].iter().step_by(stride).copied().collect()
    }

    /// Apply `f` to every pixel's temporal curve in parallel and reassemble.
    /// `f` must return a series of the same length.
    pub fn map_pixel_series<F>(&self, kind: StackKind, f: F) -> Result<Self>
    where
        F: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync,
    {
        let series = (0..self.n_pixels())
            .into_par_iter()
            .map(|p| {
                let s = self.pixel_series(p);
                f(p, &s)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pixel_series(self.height, self.width, self.sample_time_s, kind, &series)
    }

    pub fn with_kind(mut self, kind: StackKind) -> Self {
        self.kind = kind;
        self
    }

    pub(crate) fn require_kind(&self, expected: StackKind) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(Error::WrongKind { expected: expected.name(), found: self.kind.name() })
        }
    }
}

pub fn frame_times(n_frames: usize, sample_time_s: f64) -> Vec<f64> {
    (1..=n_frames).map(|n| n as f64 * sample_time_s).collect()
}
