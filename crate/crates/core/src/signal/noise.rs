use super::MultichannelSignal;
use crate::rng::{derive_seed, CounterRng};

/// Zero-mean, unit-variance Gaussian white noise. Each channel draws from its
/// own counter stream, so the same `(seed, channel)` always yields the same
/// samples regardless of the channel count requested.
pub fn white_noise(len: usize, channels: usize, sample_rate: u32, seed: u64) -> MultichannelSignal {
    let chans = (0..channels.max(1))
        .map(|m| {
            let mut rng = CounterRng::new(derive_seed(seed, &[m as u64]));
            (0..len).map(|_| rng.normal()).collect()
        })
        .collect();
    MultichannelSignal::new(chans, sample_rate).expect("valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{stft, StftParams};

    #[test]
    fn deterministic_per_seed() {
        let a = white_noise(1000, 1, 16000, 5);
        let b = white_noise(1000, 1, 16000, 5);
        let c = white_noise(1000, 1, 16000, 6);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn moments_at_two_to_sixteen() {
        let len = 1 << 16;
        let x = white_noise(len, 1, 16000, 99);
        let s = x.channel(0);
        let mean = s.iter().sum::<f64>() / len as f64;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len as f64;
        assert!(mean.abs() < 4.0 / (len as f64).sqrt());
        assert!((var - 1.0).abs() < 0.1);
    }

    #[test]
    fn spectrally_flat() {
        let len = 1 << 16;
        let x = white_noise(len, 1, 16000, 7);
        let spec = stft(&x, StftParams::half_overlap(512)).unwrap();
        let k = spec.num_bins();
        let mut low = 0.0;
        let mut high = 0.0;
        for n in 0..spec.num_frames() {
            let f = spec.frame(0, n);
            low += f[1..k / 2].iter().map(|c| c.norm()).sum::<f64>() / (k / 2 - 1) as f64;
            high += f[k / 2..k - 1].iter().map(|c| c.norm()).sum::<f64>() / (k - 1 - k / 2) as f64;
        }
        let diff_db = 20.0 * (low / high).log10();
        assert!(diff_db.abs() < 1.0, "{diff_db} dB");
    }
}
