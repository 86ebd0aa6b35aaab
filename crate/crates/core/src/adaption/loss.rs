//! Logistic and binary cross-entropy helpers shared by the judge and the
//! synchronizing loss.

/// Probability clamp applied before taking logarithms.
pub const PROB_EPSILON: f64 = 1e-7;

pub const DEFAULT_SYNC_WEIGHT: f64 = 10.0;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn clamp_prob(p: f64) -> (f64, bool) {
    let c = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    (c, c != p)
}

/// `-t ln p - (1 - t) ln(1 - p)` with `p` clamped to `[eps, 1 - eps]`.
pub fn bce(p: f64, target: f64) -> f64 {
    let (p, _) = clamp_prob(p);
    -target * p.ln() - (1.0 - target) * (1.0 - p).ln()
}

/// BCE of `sigmoid(z)` and its derivative with respect to `z`. The
/// derivative is zero where the clamp is active.
pub fn bce_with_logit(z: f64, target: f64) -> (f64, f64) {
    let p = sigmoid(z);
    let (pc, clamped) = clamp_prob(p);
    let loss = -target * pc.ln() - (1.0 - target) * (1.0 - pc).ln();
    (loss, if clamped { 0.0 } else { p - target })
}

/// `weight * max(0, BCE(sigmoid(d0 - d1), J))`.
pub fn sync_loss_weighted(d0: f64, d1: f64, judgement: f64, weight: f64) -> f64 {
    weight * bce(sigmoid(d0 - d1), judgement).max(0.0)
}

pub fn sync_loss(d0: f64, d1: f64, judgement: f64) -> f64 {
    sync_loss_weighted(d0, d1, judgement, DEFAULT_SYNC_WEIGHT)
}

/// Synchronizing loss and its derivative with respect to `d0 - d1`.
pub(crate) fn sync_loss_with_grad(d0: f64, d1: f64, judgement: f64, weight: f64) -> (f64, f64) {
    let (l, g) = bce_with_logit(d0 - d1, judgement);
    if l > 0.0 {
        (weight * l, weight * g)
    } else {
        (0.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
    }

    #[test]
    fn bce_is_clamped() {
        assert!(bce(0.0, 1.0).is_finite());
        assert!((bce(0.0, 1.0) + PROB_EPSILON.ln()).abs() < 1e-12);
        assert_eq!(bce_with_logit(100.0, 0.0).1, 0.0);
    }

    #[test]
    fn logit_gradient() {
        let (_, g) = bce_with_logit(0.3, 1.0);
        assert!((g - (sigmoid(0.3) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn sync_examples() {
        assert!((sync_loss(0.7, 0.7, 1.0) - 10.0 * 2f64.ln()).abs() < 1e-12);
        assert!((sync_loss(3.0, 1.0, 0.0) - 21.269_280_110_429_71).abs() < 1e-9);
        assert!(sync_loss(60.0, 0.0, 1.0) < 1e-5);
    }
}
