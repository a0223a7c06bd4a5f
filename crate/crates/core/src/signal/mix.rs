use super::MultichannelSignal;
use crate::{Error, Result};

/// Mean-square power averaged across channels.
pub fn mean_power(signal: &MultichannelSignal) -> f64 {
    let total: f64 = signal.channels().iter().flatten().map(|x| x * x).sum();
    total / (signal.num_channels() * signal.len()).max(1) as f64
}

/// Segment-level SNR in dB between a clean signal and a noise signal.
pub fn snr_db(signal: &MultichannelSignal, noise: &MultichannelSignal) -> f64 {
    10.0 * (mean_power(signal) / mean_power(noise)).log10()
}

/// Adds `noise`, rescaled so the whole-segment SNR equals `snr_db`.
pub fn mix_at_snr(signal: &MultichannelSignal, noise: &MultichannelSignal, snr_db: f64) -> Result<MultichannelSignal> {
    signal.check_compatible(noise)?;
    let ps = mean_power(signal);
    if ps <= 0.0 {
        return Err(Error::UndefinedSnr);
    }
    let pn = mean_power(noise);
    if pn <= 0.0 {
        return Err(Error::invalid("noise has zero power"));
    }
    let gain = (ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    let mut out = signal.clone();
    for (o, n) in out.channels.iter_mut().zip(noise.channels()) {
        o.iter_mut().zip(n).for_each(|(x, &v)| *x += gain * v);
    }
    Ok(out)
}
