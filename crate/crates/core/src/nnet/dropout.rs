use super::Scalar;
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout mask: each entry is 0 with probability `rate`, else
/// `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar>(len: usize, rate: f64, rng: &mut CounterRng) -> Vec<T> {
    let keep = T::from_f64(1.0 / (1.0 - rate));
    (0..len).map(|_| if rng.uniform() < rate { T::zero() } else { keep }).collect()
}

/// Applies dropout in place; returns the mask used (None in eval mode or when
/// `rate` is 0).
pub fn dropout<T: Scalar>(activations: &mut [T], rate: f64, mode: Mode, seed: u64) -> Option<Vec<T>> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if mode == Mode::Eval || rate == 0.0 {
        return None;
    }
    let mask = dropout_mask(activations.len(), rate, &mut CounterRng::new(seed));
    activations.iter_mut().zip(&mask).for_each(|(a, &m)| *a = *a * m);
    Some(mask)
}
