//! Deterministic DSP primitives: windows, STFT analysis, noise synthesis,
//! SNR mixing, FFT convolution and WAV I/O.

mod conv;
mod mix;
mod noise;
mod stft;
mod wav;
mod window;

pub use conv::{convolve, convolve_direct, convolve_many};
pub use mix::{mean_power, mix_at_snr, snr_db};
pub use noise::white_noise;
pub use stft::{stft, Spectrogram, StftParams};
pub use wav::{read_wav, write_wav, WavFormat};
pub use window::{hann_window, window, WindowKind};

use crate::{Error, Result};

/// Time-domain samples for M equally long channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSignal {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl MultichannelSignal {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if channels.is_empty() {
            return Err(Error::invalid("signal needs at least one channel"));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::shape("channels have unequal lengths"));
        }
        Ok(Self { channels, sample_rate })
    }

    pub fn zeros(num_channels: usize, len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![vec![0.0; len]; num_channels], sample_rate)
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel(&self, m: usize) -> &[f64] {
        &self.channels[m]
    }

    pub fn channel_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.channels[m]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn scale(&mut self, gain: f64) {
        self.channels.iter_mut().flatten().for_each(|x| *x *= gain);
    }

    /// Element-wise sum; shapes and rates must agree.
    pub fn add(&mut self, other: &MultichannelSignal) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.channels.iter_mut().zip(&other.channels) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    /// Samples `start..start + len` of every channel.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::InsufficientSamples { needed: start + len, got: self.len() });
        }
        Self::new(self.channels.iter().map(|c| c[start..start + len].to_vec()).collect(), self.sample_rate)
    }

    /// Keeps only the listed channels, in the given order.
    pub fn select_channels(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.num_channels()) {
            return Err(Error::invalid(format!("channel {bad} out of range")));
        }
        Self::new(indices.iter().map(|&i| self.channels[i].clone()).collect(), self.sample_rate)
    }

    pub(crate) fn check_compatible(&self, other: &MultichannelSignal) -> Result<()> {
        if self.num_channels() != other.num_channels() || self.len() != other.len() {
            return Err(Error::shape(format!(
                "{}x{} vs {}x{}",
                self.num_channels(),
                self.len(),
                other.num_channels(),
                other.len()
            )));
        }
        if self.sample_rate != other.sample_rate {
            return Err(Error::shape(format!("sample rate {} vs {}", self.sample_rate, other.sample_rate)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_channels() {
        assert!(MultichannelSignal::new(vec![vec![0.0; 3], vec![0.0; 4]], 16000).is_err());
        assert!(MultichannelSignal::new(vec![vec![0.0; 3]], 0).is_err());
    }

    #[test]
    fn add_and_slice() {
        let mut a = MultichannelSignal::new(vec![vec![1.0, 2.0, 3.0]], 8000).unwrap();
        let b = MultichannelSignal::new(vec![vec![1.0, 1.0, 1.0]], 8000).unwrap();
        a.add(&b).unwrap();
        assert_eq!(a.slice(1, 2).unwrap().channel(0), &[3.0, 4.0]);
        assert!(a.slice(2, 2).is_err());
    }
}
