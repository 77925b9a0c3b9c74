//! Mini-batch Adam training with early stopping on validation MAE.

use nalgebra::DVector;
use rand::seq::SliceRandom;

use super::backward::{backward_batch, Gradients};
use super::forward::forward_sequence;
use super::params::{Arch, ModelParams, Normalization, Tensor, TensorMut};
use crate::seed::rng_from_seed;
use crate::{Error, Result};

/// A set of (input window, target) pairs in raw (unnormalized) units.
#[derive(Debug, Clone, Default)]
pub struct WindowSet {
    pub inputs: Vec<Vec<DVector<f64>>>,
    pub targets: Vec<DVector<f64>>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, window: Vec<DVector<f64>>, target: DVector<f64>) {
        self.inputs.push(window);
        self.targets.push(target);
    }

    fn normalized(&self, norm: &Normalization) -> WindowSet {
        WindowSet {
            inputs: self
                .inputs
                .iter()
                .map(|w| w.iter().map(|x| norm.normalize_input(x)).collect())
                .collect(),
            targets: self.targets.iter().map(|y| norm.normalize_output(y)).collect(),
        }
    }
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 1500,
            early_stop_patience: 10,
        }
    }
}

impl TrainConfig {
    /// Shorter schedule for desk-scale runs and CI.
    pub fn desk_scale() -> Self {
        TrainConfig {
            max_epochs: 200,
            ..Default::default()
        }
    }
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_mae: f64,
}

/// Adam with bias correction over the flat parameter vector.
pub struct Adam {
    cfg: TrainConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl Adam {
    pub fn new(cfg: TrainConfig, parameter_count: usize) -> Self {
        Adam {
            cfg,
            m: vec![0.0; parameter_count],
            v: vec![0.0; parameter_count],
            t: 0,
        }
    }

    pub fn step(&mut self, model: &mut ModelParams, grads: &Gradients) {
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        let lr = self.cfg.learning_rate;
        let eps = self.cfg.epsilon;

        let mut gslices: Vec<&[f64]> = Vec::new();
        grads.for_each_tensor(&mut |t: Tensor<'_>| gslices.push(t.as_slice()));

        let mut tensor_idx = 0;
        let mut offset = 0;
        let m = &mut self.m;
        let v = &mut self.v;
        model.for_each_tensor_mut(&mut |t: TensorMut<'_>| {
            let ps = t.into_slice();
            let gs = gslices[tensor_idx];
            for k in 0..ps.len() {
                let g = gs[k];
                let mk = &mut m[offset + k];
                let vk = &mut v[offset + k];
                *mk = b1 * *mk + (1.0 - b1) * g;
                *vk = b2 * *vk + (1.0 - b2) * g * g;
                let m_hat = *mk / bc1;
                let v_hat = *vk / bc2;
                ps[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            offset += ps.len();
            tensor_idx += 1;
        });
    }
}

/// Mean loss (`0.5 |y - t|^2`) and mean absolute error over a normalized
/// set.
pub fn evaluate(model: &ModelParams, set: &WindowSet) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::invalid_argument("empty evaluation set"));
    }
    let mut loss = 0.0;
    let mut abs = 0.0;
    let mut count = 0usize;
    for (seq, target) in set.inputs.iter().zip(set.targets.iter()) {
        let out = forward_sequence(model, seq)?;
        let r = out - target;
        loss += 0.5 * r.norm_squared();
        abs += r.iter().map(|x| x.abs()).sum::<f64>();
        count += r.len();
    }
    Ok((loss / set.len() as f64, abs / count as f64))
}

/// Train with shuffled mini-batches and Adam; early-stops on validation
/// MAE with the configured patience and returns the best-validation
/// snapshot plus the per-epoch loss history. Deterministic for a fixed
/// seed. Normalization statistics are fitted on the training split only
/// and stored in the returned model.
pub fn train(
    mut model: ModelParams,
    train_set: &WindowSet,
    val_set: &WindowSet,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, Vec<EpochStats>)> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid_argument("training and validation sets must be non-empty"));
    }
    let input_refs: Vec<&DVector<f64>> = train_set.inputs.iter().flatten().collect();
    let target_refs: Vec<&DVector<f64>> = train_set.targets.iter().collect();
    model.norm = Normalization::fit(&input_refs, &target_refs)?;
    model.meta.seed = seed;

    let train_n = train_set.normalized(&model.norm);
    let val_n = val_set.normalized(&model.norm);

    if cfg.max_epochs == 0 {
        // Nothing to do; hand back the initialized model unchanged.
        return Ok((model, Vec::new()));
    }

    let mut rng = rng_from_seed(seed);
    let mut adam = Adam::new(*cfg, model.parameter_count());
    let mut history = Vec::new();
    let mut best = model.clone();
    let mut best_mae = f64::INFINITY;
    let mut best_epoch = 0;
    let mut patience_left = cfg.early_stop_patience;
    let mut indices: Vec<usize> = (0..train_n.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in indices.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<(&[DVector<f64>], &DVector<f64>)> = chunk
                .iter()
                .map(|&i| (train_n.inputs[i].as_slice(), &train_n.targets[i]))
                .collect();
            let (grads, batch_loss) = backward_batch(&model, &batch)?;
            adam.step(&mut model, &grads);
            epoch_loss += batch_loss * chunk.len() as f64;
        }
        let train_loss = epoch_loss / train_n.len() as f64;
        let (val_loss, val_mae) = evaluate(&model, &val_n)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_mae,
        });

        if val_mae < best_mae {
            best_mae = val_mae;
            best = model.clone();
            best_epoch = epoch;
            patience_left = cfg.early_stop_patience;
        } else {
            patience_left = patience_left.saturating_sub(1);
            if patience_left == 0 {
                break;
            }
        }
    }

    let last = history.last().expect("at least one epoch");
    best.meta = super::params::TrainMeta {
        seed,
        epochs_run: history.len(),
        best_epoch,
        final_train_loss: last.train_loss,
        final_val_loss: history
            .iter()
            .find(|e| e.epoch == best_epoch)
            .map(|e| e.val_loss)
            .unwrap_or(last.val_loss),
        final_val_mae: best_mae,
    };
    Ok((best, history))
}

/// One cell of the architecture ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationSpec {
    pub arch: Arch,
    pub layers: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AblationRow {
    pub arch: String,
    pub layers: usize,
    pub hidden: usize,
    pub val_loss: f64,
    pub secs_per_epoch: f64,
    pub parameter_count: usize,
    pub epochs_run: usize,
}

/// Train every configuration on the same data with the same settings and
/// report final validation loss and training time per epoch.
pub fn ablation_grid(
    specs: &[AblationSpec],
    train_set: &WindowSet,
    val_set: &WindowSet,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<AblationRow>> {
    if train_set.is_empty() {
        return Err(Error::invalid_argument("empty training set"));
    }
    let input = train_set.inputs[0][0].len();
    let output = train_set.targets[0].len();
    let seq_len = train_set.inputs[0].len();
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let model = ModelParams::init(spec.arch, spec.layers, spec.hidden, input, output, seq_len, seed);
        let parameter_count = model.parameter_count();
        let start = std::time::Instant::now();
        let (trained, history) = train(model, train_set, val_set, cfg, seed)?;
        let secs_per_epoch = start.elapsed().as_secs_f64() / history.len().max(1) as f64;
        rows.push(AblationRow {
            arch: spec.arch.as_str().to_string(),
            layers: spec.layers,
            hidden: spec.hidden,
            val_loss: trained.meta.final_val_loss,
            secs_per_epoch,
            parameter_count,
            epochs_run: history.len(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn linear_dataset(n: usize, seed: u64) -> WindowSet {
        // y = 2x, one-dimensional.
        let mut rng = rng_from_seed(seed);
        let mut set = WindowSet::default();
        for _ in 0..n {
            let x = rng.gen_range(-1.0..1.0);
            set.push(
                vec![DVector::from_vec(vec![x])],
                DVector::from_vec(vec![2.0 * x]),
            );
        }
        set
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let model = ModelParams::init(Arch::Fnn, 2, 4, 1, 1, 1, 3);
        let before = model.to_flat();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 5,
            ..Default::default()
        };
        let train_set = linear_dataset(32, 1);
        let val_set = linear_dataset(8, 2);
        let (after, history) = train(model, &train_set, &val_set, &cfg, 7).unwrap();
        assert_eq!(before, after.to_flat());
        let first = history[0].train_loss;
        for e in &history {
            assert_relative_eq!(e.val_loss, history[0].val_loss, epsilon = 1e-12);
            assert!((e.train_loss - first).abs() < 1e-9);
        }
    }

    #[test]
    fn tiny_fnn_learns_linear_map() {
        let model = ModelParams::init(Arch::Fnn, 1, 32, 1, 1, 1, 11);
        // Full-batch descent with stopping disabled: constant-rate Adam
        // needs the longer schedule to push the tanh approximation error
        // below 1e-3 on the z-scored domain.
        let cfg = TrainConfig {
            max_epochs: 1200,
            batch_size: 128,
            learning_rate: 0.05,
            early_stop_patience: 1200,
            ..Default::default()
        };
        let train_set = linear_dataset(128, 21);
        let val_set = linear_dataset(32, 22);
        let (trained, _) = train(model, &train_set, &val_set, &cfg, 13).unwrap();
        assert!(
            trained.meta.final_val_mae < 1e-3,
            "val mae {}",
            trained.meta.final_val_mae
        );
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let model = ModelParams::init(Arch::Gru, 1, 4, 2, 1, 3, 17);
            let mut rng = rng_from_seed(31);
            let mut train_set = WindowSet::default();
            let mut val_set = WindowSet::default();
            for i in 0..40 {
                let seq: Vec<DVector<f64>> = (0..3)
                    .map(|_| DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0)))
                    .collect();
                let target = DVector::from_vec(vec![seq[2][0] - 0.5 * seq[1][1]]);
                if i % 5 == 0 {
                    val_set.push(seq, target);
                } else {
                    train_set.push(seq, target);
                }
            }
            let cfg = TrainConfig {
                max_epochs: 20,
                ..Default::default()
            };
            train(model, &train_set, &val_set, &cfg, 23).unwrap()
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(a.to_flat(), b.to_flat());
        assert_eq!(ha, hb);
    }

    #[test]
    fn empty_dataset_rejected() {
        let model = ModelParams::init(Arch::Fnn, 1, 2, 1, 1, 1, 1);
        let empty = WindowSet::default();
        let val = linear_dataset(4, 1);
        assert!(train(model, &empty, &val, &TrainConfig::default(), 1).is_err());
    }

    #[test]
    fn single_config_grid_matches_direct_train() {
        let train_set = linear_dataset(64, 41);
        let val_set = linear_dataset(16, 42);
        let cfg = TrainConfig {
            max_epochs: 30,
            ..Default::default()
        };
        let rows = ablation_grid(
            &[AblationSpec {
                arch: Arch::Fnn,
                layers: 2,
                hidden: 4,
            }],
            &train_set,
            &val_set,
            &cfg,
            5,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        let model = ModelParams::init(Arch::Fnn, 2, 4, 1, 1, 1, 5);
        let (direct, _) = train(model, &train_set, &val_set, &cfg, 5).unwrap();
        assert_relative_eq!(rows[0].val_loss, direct.meta.final_val_loss, epsilon = 1e-12);
    }
}
