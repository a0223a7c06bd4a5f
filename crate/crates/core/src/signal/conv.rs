use rustfft::FftPlanner;

use crate::Complex;

/// Full linear convolution via FFT; output length `signal.len() + rir.len() - 1`.
pub fn convolve(signal: &[f64], rir: &[f64]) -> Vec<f64> {
    convolve_many(signal, std::slice::from_ref(&rir.to_vec())).pop().unwrap_or_default()
}

/// Convolves one signal with several impulse responses, sharing the signal's
/// transform.
pub fn convolve_many(signal: &[f64], rirs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if signal.is_empty() || rirs.iter().any(|r| r.is_empty()) {
        return rirs.iter().map(|_| Vec::new()).collect();
    }
    let max_rir = rirs.iter().map(Vec::len).max().unwrap_or(0);
    let n = (signal.len() + max_rir - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut sig_spec: Vec<Complex> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    sig_spec.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut sig_spec);

    rirs.iter()
        .map(|rir| {
            let mut h: Vec<Complex> = rir.iter().map(|&x| Complex::new(x, 0.0)).collect();
            h.resize(n, Complex::new(0.0, 0.0));
            fwd.process(&mut h);
            h.iter_mut().zip(&sig_spec).for_each(|(a, b)| *a *= b);
            inv.process(&mut h);
            let scale = 1.0 / n as f64;
            h[..signal.len() + rir.len() - 1].iter().map(|c| c.re * scale).collect()
        })
        .collect()
}

/// Direct O(nm) convolution.
pub fn convolve_direct(signal: &[f64], rir: &[f64]) -> Vec<f64> {
    if signal.is_empty() || rir.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; signal.len() + rir.len() - 1];
    for (i, &x) in signal.iter().enumerate() {
        for (j, &h) in rir.iter().enumerate() {
            out[i + j] += x * h;
        }
    }
    out
}
