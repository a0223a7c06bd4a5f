use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::MultichannelSignal;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Reads a PCM16 or IEEE float32 WAV file into samples scaled to [-1, 1].
pub fn read_wav(path: impl AsRef<Path>) -> Result<MultichannelSignal> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Format("zero channels".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => {
            reader.into_samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(Error::Unsupported(format!("{bits}-bit {fmt:?} samples")));
        }
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::Format("sample count not a multiple of channel count".into()));
    }
    let frames = interleaved.len() / channels;
    let mut chans = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (c, &v) in chans.iter_mut().zip(frame) {
            c.push(v);
        }
    }
    MultichannelSignal::new(chans, spec.sample_rate)
}

/// Writes interleaved samples; PCM16 values are rounded and clipped.
pub fn write_wav(path: impl AsRef<Path>, signal: &MultichannelSignal, format: WavFormat) -> Result<()> {
    let channels = u16::try_from(signal.num_channels()).map_err(|_| Error::invalid("too many channels for WAV"))?;
    let spec = match format {
        WavFormat::Pcm16 => WavSpec {
            channels,
            sample_rate: signal.sample_rate(),
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
        WavFormat::Float32 => WavSpec {
            channels,
            sample_rate: signal.sample_rate(),
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for i in 0..signal.len() {
        for ch in signal.channels() {
            match format {
                WavFormat::Pcm16 => {
                    let v = (ch[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(v)?;
                }
                WavFormat::Float32 => writer.write_sample(ch[i] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_signal() -> MultichannelSignal {
        let a: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.05).sin() * 0.9).collect();
        let b: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.011).cos() * 0.4).collect();
        MultichannelSignal::new(vec![a, b], 16000).unwrap()
    }

    #[test]
    fn float32_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let sig = test_signal();
        write_wav(&path, &sig, WavFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.num_channels(), 2);
        assert_eq!(back.sample_rate(), 16000);
        for (x, y) in sig.channels().iter().flatten().zip(back.channels().iter().flatten()) {
            assert_eq!(*x as f32 as f64, *y);
        }
        // a second pass is bit-exact in the file's own precision
        let path2 = dir.path().join("g.wav");
        write_wav(&path2, &back, WavFormat::Float32).unwrap();
        assert_eq!(read_wav(&path2).unwrap(), back);
    }

    #[test]
    fn pcm16_quantization_bound() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.wav");
        let sig = test_signal();
        write_wav(&path, &sig, WavFormat::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        let max_err = sig
            .channels()
            .iter()
            .flatten()
            .zip(back.channels().iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 1.0 / 32768.0);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        write_wav(&path, &test_signal(), WavFormat::Pcm16).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [10, 30, 44 + 7, bytes.len() - 3] {
            std::fs::write(&path, &bytes[..cut]).unwrap();
            assert!(read_wav(&path).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn garbage_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        std::fs::write(&path, b"RIFX1234WAVEfmt garbage").unwrap();
        assert!(read_wav(&path).is_err());
    }
}
