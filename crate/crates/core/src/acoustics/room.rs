use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{norm, sub, Point3};
use crate::signal::{read_wav, MultichannelSignal};
use crate::{Error, Result, SPEED_OF_SOUND};

/// Half-width of the windowed-sinc fractional-delay kernel (81 taps total).
const SINC_HALF: i64 = 40;

fn default_c() -> f64 {
    SPEED_OF_SOUND
}

/// Shoebox room with uniform, frequency-independent wall absorption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub name: String,
    /// (Lx, Ly, Lz) in metres.
    pub dims: Point3,
    /// Reverberation time in seconds; 0 is anechoic.
    pub rt60: f64,
    #[serde(default = "default_c")]
    pub speed_of_sound: f64,
}

impl RoomConfig {
    pub fn new(name: impl Into<String>, dims: Point3, rt60: f64) -> Result<Self> {
        let room = Self { name: name.into(), dims, rt60, speed_of_sound: SPEED_OF_SOUND };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::invalid(format!("room {} has non-positive dimensions", self.name)));
        }
        if !(self.rt60 >= 0.0) {
            return Err(Error::invalid(format!("room {} has negative RT60", self.name)));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::invalid("speed of sound must be positive"));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn check_inside(&self, p: Point3) -> Result<()> {
        if (0..3).all(|i| p[i] > 0.0 && p[i] < self.dims[i]) {
            Ok(())
        } else {
            Err(Error::OutsideRoom(format!(
                "({:.3}, {:.3}, {:.3}) not inside room {} {:?}",
                p[0], p[1], p[2], self.name, self.dims
            )))
        }
    }

    /// Default RIR length: 1.2·RT60 rounded up, capped at one second.
    pub fn default_rir_len(&self, fs: u32) -> usize {
        ((1.2 * self.rt60 * fs as f64).ceil() as usize).min(fs as usize)
    }
}

/// Wall reflection coefficient from Eyring's reverberation formula,
/// `β = exp(-12 ln10 V / (c S T60))`. Anechoic rooms give 0.
pub fn reflection_coefficient(room: &RoomConfig) -> f64 {
    if room.rt60 <= 0.0 {
        return 0.0;
    }
    (-12.0 * std::f64::consts::LN_10 * room.volume() / (room.speed_of_sound * room.surface() * room.rt60)).exp()
}

/// Sampled impulse responses, one per microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    taps: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl Rir {
    pub fn new(taps: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if taps.is_empty() || taps[0].is_empty() {
            return Err(Error::invalid("empty RIR"));
        }
        let len = taps[0].len();
        if taps.iter().any(|t| t.len() != len) {
            return Err(Error::shape("RIR channels differ in length"));
        }
        if taps.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite RIR tap"));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Ok(Self { taps, sample_rate })
    }

    /// Loads a measured multichannel RIR stored as a WAV file.
    pub fn from_wav(path: impl AsRef<Path>) -> Result<Self> {
        let sig = read_wav(path)?;
        let fs = sig.sample_rate();
        Self::new(sig.into_channels(), fs)
    }

    pub fn num_mics(&self) -> usize {
        self.taps.len()
    }

    pub fn len(&self) -> usize {
        self.taps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn taps(&self) -> &[Vec<f64>] {
        &self.taps
    }

    pub fn channel(&self, m: usize) -> &[f64] {
        &self.taps[m]
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().flatten().map(|v| v * v).sum()
    }

    /// Keeps only the listed microphones.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let taps = indices
            .iter()
            .map(|&i| self.taps.get(i).cloned().ok_or_else(|| Error::invalid(format!("RIR channel {i} out of range"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(taps, self.sample_rate)
    }

    /// Joins single-microphone responses into one multichannel RIR.
    pub fn stack(parts: Vec<Rir>) -> Result<Self> {
        let fs = parts.first().map(|r| r.sample_rate).ok_or_else(|| Error::invalid("no parts"))?;
        let len = parts.iter().map(Rir::len).max().unwrap_or(0);
        let mut taps = Vec::new();
        for p in parts {
            if p.sample_rate != fs {
                return Err(Error::shape("sample rates differ"));
            }
            for mut t in p.taps {
                t.resize(len, 0.0);
                taps.push(t);
            }
        }
        Self::new(taps, fs)
    }

    pub fn into_signal(self) -> MultichannelSignal {
        MultichannelSignal::new(self.taps, self.sample_rate).expect("validated")
    }
}

/// Image-method impulse response from `source` to `mic` (Allen & Berkley),
/// with uniform reflection coefficients and 81-tap windowed-sinc fractional
/// delays. `max_len` defaults to [`RoomConfig::default_rir_len`], extended so
/// the direct path always fits.
pub fn image_method_rir(
    room: &RoomConfig,
    source: Point3,
    mic: Point3,
    fs: u32,
    max_len: Option<usize>,
) -> Result<Rir> {
    room.validate()?;
    room.check_inside(source)?;
    room.check_inside(mic)?;
    let direct = norm(sub(source, mic));
    if direct < 1e-6 {
        return Err(Error::invalid("source and microphone coincide"));
    }
    if fs == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let fs_f = fs as f64;
    let c = room.speed_of_sound;
    let direct_delay = direct / c * fs_f;
    let min_len = direct_delay.ceil() as usize + SINC_HALF as usize + 1;
    let len = max_len.unwrap_or_else(|| room.default_rir_len(fs)).max(min_len);
    let mut h = vec![0.0; len];

    let beta = reflection_coefficient(room);
    let kernel_window: Vec<f64> =
        (-SINC_HALF..=SINC_HALF).map(|t| 0.5 * (1.0 + (PI * t as f64 / (SINC_HALF + 1) as f64).cos())).collect();

    let mut add_pulse = |delay: f64, amp: f64| {
        let centre = delay.round() as i64;
        let frac = delay - centre as f64;
        let sin_pf = (PI * frac).sin();
        for t in -SINC_HALF..=SINC_HALF {
            let idx = centre + t;
            if idx < 0 || idx as usize >= len {
                continue;
            }
            let x = t as f64 - frac;
            let sinc = if x.abs() < 1e-12 {
                1.0
            } else {
                // sin(π(t - f)) = -(-1)^t sin(πf)
                let sign = if t.rem_euclid(2) == 0 { -1.0 } else { 1.0 };
                sign * sin_pf / (PI * x)
            };
            h[idx as usize] += amp * kernel_window[(t + SINC_HALF) as usize] * sinc;
        }
    };

    if beta == 0.0 {
        add_pulse(direct_delay, 1.0 / (4.0 * PI * direct));
        return Rir::new(vec![h], fs);
    }

    let max_dist = (len as f64 + SINC_HALF as f64) / fs_f * c;
    let l = room.dims;
    let ranges: Vec<i64> = (0..3).map(|i| (max_dist / (2.0 * l[i])).ceil() as i64 + 1).collect();
    let log_beta = beta.ln();

    for nx in -ranges[0]..=ranges[0] {
        for px in 0..2i64 {
            let dx = 2.0 * nx as f64 * l[0] + (1 - 2 * px) as f64 * source[0] - mic[0];
            let ox = (nx - px).abs() + nx.abs();
            if dx.abs() > max_dist {
                continue;
            }
            for ny in -ranges[1]..=ranges[1] {
                for py in 0..2i64 {
                    let dy = 2.0 * ny as f64 * l[1] + (1 - 2 * py) as f64 * source[1] - mic[1];
                    let oy = (ny - py).abs() + ny.abs();
                    let dxy2 = dx * dx + dy * dy;
                    if dxy2 > max_dist * max_dist {
                        continue;
                    }
                    for nz in -ranges[2]..=ranges[2] {
                        for pz in 0..2i64 {
                            let dz = 2.0 * nz as f64 * l[2] + (1 - 2 * pz) as f64 * source[2] - mic[2];
                            let dist = (dxy2 + dz * dz).sqrt();
                            let delay = dist / c * fs_f;
                            if delay.round() as i64 - SINC_HALF >= len as i64 {
                                continue;
                            }
                            let order = ox + oy + (nz - pz).abs() + nz.abs();
                            let amp = (order as f64 * log_beta).exp() / (4.0 * PI * dist);
                            add_pulse(delay, amp);
                        }
                    }
                }
            }
        }
    }
    Rir::new(vec![h], fs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room(rt60: f64) -> RoomConfig {
        RoomConfig::new("test", [6.0, 6.0, 2.7], rt60).unwrap()
    }

    fn peak_index(h: &[f64]) -> usize {
        h.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0
    }

    #[test]
    fn anechoic_one_metre() {
        let src = [3.0, 4.0, 1.5];
        let mic = [3.0, 3.0, 1.5];
        let rir = image_method_rir(&room(0.0), src, mic, 16000, None).unwrap();
        let h = rir.channel(0);
        let expected_delay: f64 = 16000.0 / 343.0;
        assert!((expected_delay - 46.647).abs() < 1e-3);
        assert!((peak_index(h) as f64 - expected_delay).abs() <= 1.0);
        // band-limited pulse: the taps sum to the free-field amplitude
        let dc: f64 = h.iter().sum();
        let amp = 1.0 / (4.0 * PI);
        assert!((dc - amp).abs() / amp < 0.02, "{dc} vs {amp}");
        // nothing far from the direct path
        assert!(h.iter().enumerate().all(|(i, v)| (i as f64 - expected_delay).abs() < 42.0 || *v == 0.0));
    }

    #[test]
    fn direct_path_within_two_samples() {
        for rt60 in [0.2, 0.6] {
            for (src, mic) in [([1.0, 1.0, 1.2], [3.0, 2.5, 1.5]), ([5.0, 4.0, 2.0], [2.0, 2.0, 1.0])] {
                let rir = image_method_rir(&room(rt60), src, mic, 16000, None).unwrap();
                let h = rir.channel(0);
                let d = norm(sub(src, mic)) / 343.0 * 16000.0;
                let onset = h.iter().position(|v| *v != 0.0).unwrap();
                assert!((onset as f64) >= d - SINC_HALF as f64 - 1.0, "{onset} vs {d}");
                let lo = d.round() as usize - 2;
                let peak = (lo..lo + 5).max_by(|&a, &b| h[a].abs().total_cmp(&h[b].abs())).unwrap();
                assert!((peak as f64 - d).abs() <= 2.0, "{peak} vs {d}");
                let x = PI * (peak as f64 - d);
                let sinc = if x.abs() < 1e-12 { 1.0 } else { x.sin() / x };
                let amp = sinc / (4.0 * PI * norm(sub(src, mic)));
                assert!((h[peak] - amp).abs() < 0.25 * amp.abs(), "{} vs {amp}", h[peak]);
            }
        }
    }

    #[test]
    fn longer_rt60_more_energy() {
        let src = [2.0, 4.0, 1.5];
        let mic = [3.0, 3.0, 1.5];
        let a = image_method_rir(&room(0.2), src, mic, 16000, Some(8000)).unwrap();
        let b = image_method_rir(&room(0.6), src, mic, 16000, Some(8000)).unwrap();
        assert!(b.energy() > a.energy());
    }

    #[test]
    fn outside_room_is_error() {
        let err = image_method_rir(&room(0.3), [7.0, 1.0, 1.0], [1.0, 1.0, 1.0], 16000, None);
        assert!(matches!(err, Err(Error::OutsideRoom(_))));
        assert!(image_method_rir(&room(0.3), [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 16000, None).is_err());
    }

    #[test]
    fn deterministic() {
        let src = [2.0, 4.0, 1.5];
        let mic = [3.0, 3.0, 1.5];
        let a = image_method_rir(&room(0.4), src, mic, 16000, None).unwrap();
        let b = image_method_rir(&room(0.4), src, mic, 16000, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_length() {
        assert_eq!(room(0.5).default_rir_len(16000), 9600);
        assert_eq!(room(2.0).default_rir_len(16000), 16000);
    }

    #[test]
    fn eyring_coefficient_in_range() {
        let b1 = reflection_coefficient(&room(0.2));
        let b2 = reflection_coefficient(&room(0.8));
        assert!(0.0 < b1 && b1 < b2 && b2 < 1.0);
        assert_eq!(reflection_coefficient(&room(0.0)), 0.0);
    }
}
