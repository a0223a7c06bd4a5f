use super::Scalar;

/// Probability clamp applied before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

/// Binary cross-entropy of one prediction vector, averaged over its `I`
/// entries, together with the gradient with respect to the pre-sigmoid
/// logits, `(p - t) / I`.
pub fn bce_loss<T: Scalar>(probs: &[T], targets: &[T]) -> (T, Vec<T>) {
    assert_eq!(probs.len(), targets.len(), "prediction/target length mismatch");
    let n = T::from_f64(probs.len() as f64);
    let eps = T::from_f64(BCE_EPS);
    let one = T::one();
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &t) in probs.iter().zip(targets) {
        let pc = p.max(eps).min(one - eps);
        loss += -(t * pc.ln() + (one - t) * (one - pc).ln());
        grad.push((p - t) / n);
    }
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::layers::sigmoid;

    #[test]
    fn perfect_prediction_is_nearly_free() {
        let t = [1.0, 0.0, 0.0, 1.0, 0.0];
        let (loss, _) = bce_loss(&t, &t);
        assert!(loss <= 5.0 * -(1.0f64 - 1e-7).ln());
        assert!(loss < 1.1e-7);
    }

    #[test]
    fn half_everywhere_is_ln2() {
        let p = [0.5f64; 13];
        let t = [1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let (loss, _) = bce_loss(&p, &t);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let z = [0.3, -1.2, 2.0, 0.0, -0.4];
        let t = [1.0, 0.0, 1.0, 1.0, 0.0];
        let loss_at = |z: &[f64]| {
            let p: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
            bce_loss(&p, &t).0
        };
        let p: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
        let (_, grad) = bce_loss(&p, &t);
        let h = 1e-5;
        for i in 0..z.len() {
            let mut zp = z;
            let mut zm = z;
            zp[i] += h;
            zm[i] -= h;
            let fd = (loss_at(&zp) - loss_at(&zm)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-9, "{i}: {fd} vs {}", grad[i]);
            assert!((grad[i] - (p[i] - t[i]) / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn clamping_keeps_loss_finite() {
        let (loss, _) = bce_loss(&[0.0f32, 1.0], &[1.0, 0.0]);
        assert!(loss.is_finite());
    }
}
