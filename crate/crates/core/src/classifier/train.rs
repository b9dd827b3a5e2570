use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, MlpModel};
use crate::{Error, Result};

/// Piecewise-constant learning rate: `(epochs, rate)` phases in order. Epochs
/// past the last phase keep its rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub phases: Vec<(usize, f64)>,
}

impl LrSchedule {
    pub fn constant(rate: f64) -> Self {
        Self {
            phases: vec![(1, rate)],
        }
    }

    /// 500 epochs at 1e-2, 100 at 1e-3, then 200 at 1e-4.
    pub fn reference() -> Self {
        Self {
            phases: vec![(500, 1e-2), (100, 1e-3), (100, 1e-4), (100, 1e-4)],
        }
    }

    /// Same as [`reference`](Self::reference) but with the last 100 epochs at 1e-6.
    pub fn reference_strict() -> Self {
        Self {
            phases: vec![(500, 1e-2), (100, 1e-3), (100, 1e-4), (100, 1e-6)],
        }
    }

    /// The phases of `self` rescaled to span `epochs` in total, keeping at
    /// least one epoch per phase.
    pub fn compressed(&self, epochs: usize) -> Self {
        let total: usize = self.phases.iter().map(|p| p.0).sum();
        let mut acc = 0;
        let mut prev_end = 0;
        let phases = self
            .phases
            .iter()
            .map(|&(len, rate)| {
                acc += len;
                let end = (acc * epochs).div_ceil(total).max(prev_end + 1);
                let n = end - prev_end;
                prev_end = end;
                (n, rate)
            })
            .collect();
        Self { phases }
    }

    /// Rate for a 1-based epoch number.
    pub fn rate(&self, epoch: usize) -> f64 {
        let mut end = 0;
        for &(len, rate) in &self.phases {
            end += len;
            if epoch <= end {
                return rate;
            }
        }
        self.phases.last().map_or(0.0, |p| p.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub schedule: LrSchedule,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 800,
            schedule: LrSchedule::reference(),
            batch_size: 64,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Gradients,
    v: Gradients,
    step: i32,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(model: &MlpModel, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros = || Gradients {
            weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        };
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn update(&mut self, model: &mut MlpModel, grads: &Gradients, lr: f64) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let apply = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for l in 0..model.weights.len() {
            Zip::from(&mut model.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .and(&grads.weights[l])
                .for_each(|p, m, v, &g| apply(p, m, v, g));
            Zip::from(&mut model.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .and(&grads.biases[l])
                .for_each(|p, m, v, &g| apply(p, m, v, g));
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Mean training loss of every epoch.
    pub loss_curve: Vec<f64>,
}

/// Mini-batch training with cross-entropy loss and Adam. Batches are
/// reshuffled every epoch from a generator seeded with `cfg.seed`; the
/// sequence of parameter updates depends only on the inputs and the seed.
pub fn train(
    mut model: MlpModel,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if features.ncols() != model.input_dim() {
        return Err(Error::DimMismatch {
            expected: model.input_dim(),
            actual: features.ncols(),
        });
    }
    if labels.len() != features.nrows() {
        return Err(Error::LengthMismatch {
            predictions: features.nrows(),
            truths: labels.len(),
        });
    }
    let classes = model.class_count();
    let mut seen = vec![false; classes];
    for &y in labels {
        if y >= classes {
            return Err(Error::Config(format!("label {y} outside {classes} classes")));
        }
        seen[y] = true;
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(Error::Config(format!("class {c} has no training samples")));
    }

    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&model, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let lr = cfg.schedule.rate(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = features.select(Axis(0), idx);
            let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = model.loss_and_gradients(x.view(), &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            total += loss * idx.len() as f64;
            adam.update(&mut model, &grads, lr);
        }
        if !model.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        let mean = total / n as f64;
        log::debug!("epoch {epoch}: lr {lr:e} loss {mean:.6}");
        curve.push(mean);
    }
    Ok(TrainOutcome {
        model,
        loss_curve: curve,
    })
}
