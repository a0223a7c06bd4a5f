use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann, `0.5 - 0.5 cos(2πi/n)`.
    #[default]
    Hann,
    Rectangular,
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid(format!("window length {n} < 2")));
    }
    Ok((0..n).map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()).collect())
}

pub fn window(kind: WindowKind, n: usize) -> Result<Vec<f64>> {
    match kind {
        WindowKind::Hann => hann_window(n),
        WindowKind::Rectangular if n >= 1 => Ok(vec![1.0; n]),
        WindowKind::Rectangular => Err(Error::invalid("empty window")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hann_four() {
        let w = hann_window(4).unwrap();
        let expected = [0.0, 0.5, 1.0, 0.5];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hann_two() {
        let w = hann_window(2).unwrap();
        assert!(w[0].abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hann_periodic_symmetry() {
        for n in [8, 33, 256] {
            let w = hann_window(n).unwrap();
            for i in 1..n {
                assert!((w[i] - w[n - i]).abs() < 1e-12);
                assert!((0.0..=1.0).contains(&w[i]));
            }
        }
    }

    #[test]
    fn hann_too_short() {
        assert!(hann_window(1).is_err());
        assert!(hann_window(0).is_err());
    }
}
