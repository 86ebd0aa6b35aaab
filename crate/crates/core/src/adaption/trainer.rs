use serde::{Deserialize, Serialize};

use super::judge::{JudgeInput, JudgeNet};
use super::loss::{bce_with_logit, sync_loss_with_grad, DEFAULT_SYNC_WEIGHT};
use super::optimizer::Adam;
use crate::distortions::TripletRecord;
use crate::error::{Error, Result};
use crate::evaluation::two_afc_from_distances;
use crate::similarity::{DistanceTerms, ScalarWeights};

/// A triplet reduced to what training needs: distance coefficients of both
/// pairs and the judgement.
#[derive(Clone, Debug)]
pub struct PreparedTriplet {
    pub terms: (DistanceTerms, DistanceTerms),
    pub judgement: f64,
    pub record: Option<TripletRecord>,
}

impl PreparedTriplet {
    pub fn new(terms: (DistanceTerms, DistanceTerms), judgement: f64) -> Self {
        Self {
            terms,
            judgement,
            record: None,
        }
    }

    pub fn with_record(mut self, record: TripletRecord) -> Self {
        self.record = Some(record);
        self
    }

    pub fn distances(&self, w: &ScalarWeights) -> (f64, f64) {
        (self.terms.0.distance_unchecked(w), self.terms.1.distance_unchecked(w))
    }
}

/// Batch-averaged losses of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub judge: f64,
    pub sync: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub judge: Vec<f64>,
}

/// Linear decay to zero over the last `decay_epochs` of `epochs`;
/// `progress` counts completed epochs and may be fractional.
pub fn learning_rate(base_lr: f64, epochs: usize, decay_epochs: usize, progress: f64) -> f64 {
    if decay_epochs == 0 {
        return base_lr;
    }
    let remaining = epochs as f64 - progress;
    base_lr * (remaining / decay_epochs as f64).clamp(0.0, 1.0)
}

/// Owns the scalars, the judge and both optimizers.
#[derive(Clone, Debug)]
pub struct Trainer {
    weights: ScalarWeights,
    judge: JudgeNet,
    weight_opt: Adam,
    judge_opt: Adam,
    sync_weight: f64,
}

impl Trainer {
    pub fn new(weights: ScalarWeights, judge: JudgeNet) -> Self {
        Self {
            weight_opt: Adam::new(weights.len()),
            judge_opt: Adam::new(judge.params().len()),
            weights,
            judge,
            sync_weight: DEFAULT_SYNC_WEIGHT,
        }
    }

    pub fn with_sync_weight(mut self, sync_weight: f64) -> Self {
        self.sync_weight = sync_weight;
        self
    }

    pub fn weights(&self) -> &ScalarWeights {
        &self.weights
    }

    pub fn judge(&self) -> &JudgeNet {
        &self.judge
    }

    pub fn into_parts(self) -> (ScalarWeights, JudgeNet) {
        (self.weights, self.judge)
    }

    fn check_batch(&self, batch: &[PreparedTriplet]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptySamples);
        }
        let channels = self.weights.channel_counts();
        for t in batch {
            if t.terms.0.channel_counts() != channels || t.terms.1.channel_counts() != channels {
                return Err(Error::ShapeMismatch(format!(
                    "triplet features have channels {:?}, scalars have {channels:?}",
                    t.terms.0.channel_counts()
                )));
            }
        }
        Ok(())
    }

    /// Losses and their gradients with respect to every scalar and every
    /// judge parameter. Per-triplet losses are returned for diagnostics.
    pub fn loss_and_gradients(
        &self,
        batch: &[PreparedTriplet],
        sync_active: bool,
    ) -> Result<(StepLosses, Gradients, Vec<f64>)> {
        self.check_batch(batch)?;
        let w = &self.weights;
        let scale = 1.0 / batch.len() as f64;
        let mut gw: Vec<Vec<f64>> = w.layers().iter().map(|l| vec![0.0; l.len()]).collect();
        let mut gj = vec![0.0; self.judge.params().len()];
        let mut losses = StepLosses::default();
        let mut per_triplet = Vec::with_capacity(batch.len());

        for t in batch {
            let (d0, d1) = t.distances(w);
            let trace = self.judge.trace(&JudgeInput::new(d0, d1));
            let (lj, dz) = bce_with_logit(trace.logit, t.judgement);
            let dx = self.judge.backward(&trace, dz * scale, &mut gj);
            let (j0, j1) = JudgeInput::jacobian(d0, d1);
            let mut gd0: f64 = dx.iter().zip(j0).map(|(a, b)| a * b).sum();
            let mut gd1: f64 = dx.iter().zip(j1).map(|(a, b)| a * b).sum();
            let mut ls = 0.0;
            if sync_active {
                let (l, g) = sync_loss_with_grad(d0, d1, t.judgement, self.sync_weight);
                ls = l;
                gd0 += g * scale;
                gd1 -= g * scale;
            }
            t.terms.0.accumulate_grad(w, gd0, &mut gw);
            t.terms.1.accumulate_grad(w, gd1, &mut gw);
            losses.judge += lj * scale;
            losses.sync += ls * scale;
            per_triplet.push(lj + ls);
        }
        losses.total = losses.judge + losses.sync;
        Ok((losses, Gradients { weights: gw, judge: gj }, per_triplet))
    }

    /// Losses only.
    pub fn losses(&self, batch: &[PreparedTriplet], sync_active: bool) -> Result<StepLosses> {
        Ok(self.loss_and_gradients(batch, sync_active)?.0)
    }

    /// One optimizer step on `batch`, then clamps every scalar to `>= 0`.
    /// A non-finite loss leaves the state untouched and reports the first
    /// offending triplet.
    pub fn train_step(&mut self, batch: &[PreparedTriplet], lr: f64, sync_active: bool) -> Result<StepLosses> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {lr} must be finite and >= 0")));
        }
        let (losses, grads, per_triplet) = self.loss_and_gradients(batch, sync_active)?;
        if let Some(i) = per_triplet.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch: 0,
                batch: 0,
                loss: per_triplet[i],
                triplet: batch[i]
                    .record
                    .as_ref()
                    .map(TripletRecord::to_json_line)
                    .unwrap_or_default(),
            });
        }
        if lr == 0.0 {
            return Ok(losses);
        }
        let mut flat: Vec<f64> = self.weights.iter().collect();
        let flat_grad: Vec<f64> = grads.weights.into_iter().flatten().collect();
        self.weight_opt.step(&mut flat, &flat_grad, lr);
        self.weights.assign_clamped(&flat);
        self.judge_opt.step(self.judge.params_mut(), &grads.judge, lr);
        Ok(losses)
    }

    /// 2AFC of the raw metric (not the judge) with the current scalars.
    pub fn two_afc(&self, triplets: &[PreparedTriplet]) -> Result<f64> {
        let triples: Vec<(f64, f64, f64)> = triplets
            .iter()
            .map(|t| {
                let (d0, d1) = t.distances(&self.weights);
                (d0, d1, t.judgement)
            })
            .collect();
        two_afc_from_distances(&triples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::ComparisonMethod;
    use crate::tensor_net::{FeatureStack, Tensor3};

    fn stack(v: &[f32]) -> FeatureStack {
        FeatureStack::new(vec![Tensor3::from_vec(v.len(), 1, 1, v.to_vec()).unwrap()])
    }

    fn prepared(j: f64) -> PreparedTriplet {
        let r = stack(&[0.0, 0.0]);
        let near = stack(&[0.1, 0.0]);
        let far = stack(&[1.0, 1.0]);
        let t0 = DistanceTerms::new(ComparisonMethod::Spatial, &r, &near).unwrap();
        let t1 = DistanceTerms::new(ComparisonMethod::Spatial, &r, &far).unwrap();
        PreparedTriplet::new((t0, t1), j)
    }

    #[test]
    fn schedule() {
        assert_eq!(learning_rate(1.0, 10, 5, 0.0), 1.0);
        assert_eq!(learning_rate(1.0, 10, 5, 5.0), 1.0);
        assert!((learning_rate(1.0, 10, 5, 8.0) - 0.4).abs() < 1e-15);
        assert_eq!(learning_rate(1.0, 10, 5, 10.0), 0.0);
        assert_eq!(learning_rate(2.0, 10, 0, 9.5), 2.0);
    }

    #[test]
    fn zero_lr_leaves_state() {
        let mut tr = Trainer::new(ScalarWeights::ones(&[2]), JudgeNet::random(&mut crate::seed::rng(0)));
        let before = tr.clone();
        let l = tr.train_step(&[prepared(0.0)], 0.0, true).unwrap();
        assert!(l.total > 0.0);
        assert_eq!(tr.weights(), before.weights());
        assert_eq!(tr.judge(), before.judge());
    }

    #[test]
    fn raw_two_afc() {
        let tr = Trainer::new(ScalarWeights::ones(&[2]), JudgeNet::zeros());
        // d0 < d1, so J = 0 scores 1 and J = 1 scores 0
        assert_eq!(tr.two_afc(&[prepared(0.0)]).unwrap(), 1.0);
        assert_eq!(tr.two_afc(&[prepared(1.0)]).unwrap(), 0.0);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let tr = Trainer::new(ScalarWeights::ones(&[3]), JudgeNet::zeros());
        assert!(tr.losses(&[prepared(0.0)], false).is_err());
    }
}
