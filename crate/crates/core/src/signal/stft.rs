use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{window, MultichannelSignal, WindowKind};
use crate::{Complex, Error, Result};

/// Analysis parameters. `frame_len` is also the DFT length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftParams {
    pub frame_len: usize,
    pub hop: usize,
    #[serde(default)]
    pub window: WindowKind,
}

impl StftParams {
    /// Hann window with 50% overlap.
    pub fn half_overlap(frame_len: usize) -> Self {
        Self { frame_len, hop: frame_len / 2, window: WindowKind::Hann }
    }

    pub fn num_bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }

    /// Signal length that yields exactly `frames` frames.
    pub fn samples_for_frames(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            self.frame_len + (frames - 1) * self.hop
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_len < 2 || !self.frame_len.is_power_of_two() {
            return Err(Error::invalid(format!("frame length {} is not a power of two", self.frame_len)));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(Error::invalid(format!("hop {} outside 1..={}", self.hop, self.frame_len)));
        }
        Ok(())
    }
}

/// One-sided multichannel STFT, indexed `(channel, frame, bin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<Complex>,
    channels: usize,
    frames: usize,
    bins: usize,
    frame_len: usize,
    hop: usize,
    sample_rate: u32,
}

impl Spectrogram {
    pub fn from_parts(
        data: Vec<Complex>,
        channels: usize,
        frames: usize,
        params: StftParams,
        sample_rate: u32,
    ) -> Result<Self> {
        let bins = params.num_bins();
        if data.len() != channels * frames * bins {
            return Err(Error::shape(format!("{} values for {channels}x{frames}x{bins}", data.len())));
        }
        Ok(Self { data, channels, frames, bins, frame_len: params.frame_len, hop: params.hop, sample_rate })
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn num_bins(&self) -> usize {
        self.bins
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn params(&self) -> StftParams {
        StftParams { frame_len: self.frame_len, hop: self.hop, window: WindowKind::Hann }
    }

    /// Centre frequency of bin `k` in Hz.
    pub fn bin_freq(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.frame_len as f64
    }

    #[inline]
    fn index(&self, m: usize, n: usize, k: usize) -> usize {
        (m * self.frames + n) * self.bins + k
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, k: usize) -> Complex {
        self.data[self.index(m, n, k)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, k: usize, value: Complex) {
        let i = self.index(m, n, k);
        self.data[i] = value;
    }

    /// All bins of one channel and frame.
    pub fn frame(&self, m: usize, n: usize) -> &[Complex] {
        let start = self.index(m, n, 0);
        &self.data[start..start + self.bins]
    }

    pub fn frame_mut(&mut self, m: usize, n: usize) -> &mut [Complex] {
        let start = self.index(m, n, 0);
        &mut self.data[start..start + self.bins]
    }

    pub fn data(&self) -> &[Complex] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex] {
        &mut self.data
    }

    /// The M-channel column at `(frame, bin)`.
    pub fn column(&self, n: usize, k: usize) -> Vec<Complex> {
        (0..self.channels).map(|m| self.get(m, n, k)).collect()
    }

    /// Frames `range` of every channel.
    pub fn frames_range(&self, start: usize, count: usize) -> Result<Spectrogram> {
        if start + count > self.frames || count == 0 {
            return Err(Error::invalid(format!("frames {start}..{} outside 0..{}", start + count, self.frames)));
        }
        let mut data = Vec::with_capacity(self.channels * count * self.bins);
        for m in 0..self.channels {
            let a = self.index(m, start, 0);
            data.extend_from_slice(&self.data[a..a + count * self.bins]);
        }
        Ok(Spectrogram { data, frames: count, ..*self })
    }

    /// Keeps only the listed channels.
    pub fn select_channels(&self, indices: &[usize]) -> Result<Spectrogram> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.channels) {
            return Err(Error::invalid(format!("channel {bad} out of range")));
        }
        let per = self.frames * self.bins;
        let mut data = Vec::with_capacity(indices.len() * per);
        for &m in indices {
            data.extend_from_slice(&self.data[m * per..(m + 1) * per]);
        }
        Ok(Spectrogram { data, channels: indices.len(), ..*self })
    }
}

/// Short-time Fourier transform. The trailing partial frame is dropped.
pub fn stft(signal: &MultichannelSignal, params: StftParams) -> Result<Spectrogram> {
    params.validate()?;
    let len = signal.len();
    if len < params.frame_len {
        return Err(Error::InsufficientSamples { needed: params.frame_len, got: len });
    }
    let frames = params.num_frames(len);
    let bins = params.num_bins();
    let win = window(params.window, params.frame_len)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(params.frame_len);
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::new(0.0, 0.0); params.frame_len];
    let mut data = Vec::with_capacity(signal.num_channels() * frames * bins);
    for ch in signal.channels() {
        for n in 0..frames {
            let seg = &ch[n * params.hop..n * params.hop + params.frame_len];
            for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&win) {
                *b = Complex::new(x * w, 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            data.extend_from_slice(&buf[..bins]);
        }
    }
    Spectrogram::from_parts(data, signal.num_channels(), frames, params, signal.sample_rate())
}
