//! Mini-batch Adam training with a fixed three-way split and early stopping.
//!
//! Everything random is seeded: the row permutation that defines the split,
//! the per-epoch batch shuffles (a second stream derived from the same seed),
//! and the weight initialization. Two calls with equal inputs return
//! bit-identical models.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::mlp::{Activation, Mlp};
use super::scaler::AffineScaler;
use super::MappingError;
use crate::sensor::tendon_index;

/// Salt that separates the epoch-shuffle stream from the split stream.
const SHUFFLE_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Which way the map runs: joint angles to sensor deltas, or back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn default_hidden(&self) -> usize {
        match self {
            Direction::Forward => 8,
            Direction::Inverse => 25,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

/// Training hyperparameters. The default block is tuned for inverse models;
/// [`TrainConfig::forward_defaults`] adjusts the handful that differ for the
/// forward direction, and [`TrainConfig::ablation_defaults`] shortens the
/// schedule for subset sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Train/validation/test fractions; must sum to 1.
    pub split: [f64; 3],
    pub shuffle_seed: u64,
    pub init_seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub activation: Activation,
    pub optimizer: Optimizer,
    /// Hidden width override; `None` picks the per-direction default.
    pub hidden_units: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            split: [0.65, 0.15, 0.20],
            shuffle_seed: 1234,
            init_seed: 11,
            learning_rate: 1e-3,
            batch_size: 128,
            max_epochs: 9000,
            early_stop_patience: 1200,
            activation: Activation::Relu,
            optimizer: Optimizer::Adam,
            hidden_units: None,
        }
    }
}

impl TrainConfig {
    pub fn forward_defaults() -> Self {
        Self {
            learning_rate: 3e-3,
            max_epochs: 3000,
            early_stop_patience: 200,
            activation: Activation::Tanh,
            ..Self::default()
        }
    }

    /// Shorter schedule for running many subset models in one sweep.
    pub fn ablation_defaults() -> Self {
        Self {
            max_epochs: 3000,
            early_stop_patience: 300,
            ..Self::default()
        }
    }

    pub fn resolved_hidden(&self, direction: Direction) -> usize {
        self.hidden_units.unwrap_or(direction.default_hidden())
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        let sum: f64 = self.split.iter().sum();
        if self.split.iter().any(|&s| !(0.0..=1.0).contains(&s)) || (sum - 1.0).abs() > 1e-9 {
            return Err(MappingError::BadConfig(format!(
                "split fractions {:?} must lie in [0, 1] and sum to 1",
                self.split
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(MappingError::BadConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(MappingError::BadConfig(
                "batch_size must be at least 1".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(MappingError::BadConfig(
                "max_epochs must be at least 1".into(),
            ));
        }
        if self.hidden_units == Some(0) {
            return Err(MappingError::BadConfig(
                "hidden_units must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Row indices of the three splits, in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with a seeded permutation and cuts it at
/// `floor(split[0] n)` and `floor(split[1] n)`; the remainder is the test set.
pub fn split_indices(n: usize, split: [f64; 3], shuffle_seed: u64) -> SplitIndices {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(shuffle_seed);
    perm.shuffle(&mut rng);
    let n_train = (split[0] * n as f64).floor() as usize;
    let n_val = (split[1] * n as f64).floor() as usize;
    let val_end = (n_train + n_val).min(n);
    SplitIndices {
        train: perm[..n_train.min(n)].to_vec(),
        val: perm[n_train.min(n)..val_end].to_vec(),
        test: perm[val_end..].to_vec(),
    }
}

/// A trained map plus the scalers that bracket it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub direction: Direction,
    /// Sensor channel names, in the column order the model was trained with.
    pub sensors: Vec<String>,
    pub mlp: Mlp,
    pub input_scaler: AffineScaler,
    pub output_scaler: AffineScaler,
    pub epochs_run: usize,
    pub best_val_mse: f64,
}

impl TrainedModel {
    /// Predicts in raw units; `x_raw` must have the model's input width.
    pub fn predict(&self, x_raw: &Mat) -> Result<Mat, MappingError> {
        if x_raw.cols != self.mlp.n_in() {
            return Err(MappingError::DimensionMismatch {
                expected: self.mlp.n_in(),
                got: x_raw.cols,
            });
        }
        let xs = self.input_scaler.transform(x_raw);
        let ps = self.mlp.forward(&xs);
        Ok(self.output_scaler.inverse(&ps))
    }
}

/// Result of [`train`]: the model and the split it was fitted on.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub split: SplitIndices,
}

/// Root-mean-square error per column between two equal-shaped matrices.
pub fn rmse_columns(pred: &Mat, target: &Mat) -> Vec<f64> {
    assert_eq!(pred.rows, target.rows);
    assert_eq!(pred.cols, target.cols);
    let mut acc = vec![0.0; pred.cols];
    for r in 0..pred.rows {
        for (c, (p, t)) in pred.row(r).iter().zip(target.row(r)).enumerate() {
            acc[c] += (p - t) * (p - t);
        }
    }
    acc.iter().map(|s| (s / pred.rows as f64).sqrt()).collect()
}

fn check_sensors(sensors: &[String]) -> Result<(), MappingError> {
    for (i, name) in sensors.iter().enumerate() {
        if tendon_index(name).is_none() {
            return Err(MappingError::UnknownSensor(name.clone()));
        }
        if sensors[..i].contains(name) {
            return Err(MappingError::DuplicateSensor(name.clone()));
        }
    }
    Ok(())
}

/// Fits a map from `x_raw` to `y_raw`. For inverse models the inputs are
/// sensor columns (at least two) and the outputs the two joint angles; for
/// forward models the roles swap.
pub fn train(
    x_raw: &Mat,
    y_raw: &Mat,
    direction: Direction,
    sensors: &[String],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, MappingError> {
    cfg.validate()?;
    if x_raw.rows != y_raw.rows {
        return Err(MappingError::RowMismatch {
            x_rows: x_raw.rows,
            y_rows: y_raw.rows,
        });
    }
    check_sensors(sensors)?;
    let (sensor_cols, pose_cols) = match direction {
        Direction::Inverse => (x_raw.cols, y_raw.cols),
        Direction::Forward => (y_raw.cols, x_raw.cols),
    };
    if direction == Direction::Inverse && sensors.len() < 2 {
        return Err(MappingError::TooFewSensors(sensors.len()));
    }
    if sensor_cols != sensors.len() {
        return Err(MappingError::SensorArity {
            names: sensors.len(),
            cols: sensor_cols,
        });
    }
    if pose_cols != 2 {
        return Err(MappingError::DimensionMismatch {
            expected: 2,
            got: pose_cols,
        });
    }

    let split = split_indices(x_raw.rows, cfg.split, cfg.shuffle_seed);
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(MappingError::TooFewRows { rows: x_raw.rows });
    }

    let input_scaler = AffineScaler::fit(x_raw, &split.train);
    let output_scaler = AffineScaler::fit(y_raw, &split.train);
    let xs = input_scaler.transform(x_raw);
    let ys = output_scaler.transform(y_raw);
    let x_train = xs.gather_rows(&split.train);
    let y_train = ys.gather_rows(&split.train);
    let x_val = xs.gather_rows(&split.val);
    let y_val = ys.gather_rows(&split.val);

    let hidden = cfg.resolved_hidden(direction);
    let mut mlp = Mlp::new(
        x_raw.cols,
        hidden,
        y_raw.cols,
        cfg.activation,
        cfg.init_seed,
    );

    let n_params = mlp.param_count();
    let mut params = mlp.param_vector();
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut t: u64 = 0;

    let mut epoch_rng = ChaCha20Rng::seed_from_u64(cfg.shuffle_seed ^ SHUFFLE_STREAM_SALT);
    let mut order: Vec<usize> = (0..x_train.rows).collect();

    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut bad_epochs = 0usize;
    let mut epochs_run = 0usize;

    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut epoch_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x_train.gather_rows(chunk);
            let yb = y_train.gather_rows(chunk);
            let (_, grads) = mlp.loss_and_gradients(&xb, &yb);
            let g = grads.to_vec();
            t += 1;
            match cfg.optimizer {
                Optimizer::Adam => {
                    let bc1 = 1.0 - 0.9f64.powi(t as i32);
                    let bc2 = 1.0 - 0.999f64.powi(t as i32);
                    for k in 0..n_params {
                        m[k] = 0.9 * m[k] + 0.1 * g[k];
                        v[k] = 0.999 * v[k] + 0.001 * g[k] * g[k];
                        params[k] -=
                            cfg.learning_rate * (m[k] / bc1) / ((v[k] / bc2).sqrt() + 1e-8);
                    }
                }
                Optimizer::Sgd => {
                    for k in 0..n_params {
                        params[k] -= cfg.learning_rate * g[k];
                    }
                }
            }
            mlp.set_param_vector(&params);
        }
        epochs_run += 1;

        let val_mse = mlp.loss(&x_val, &y_val) / y_val.cols as f64;
        if val_mse < best_val - 1e-12 {
            best_val = val_mse;
            best_params.copy_from_slice(&params);
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= cfg.early_stop_patience {
                break;
            }
        }
    }

    mlp.set_param_vector(&best_params);
    Ok(TrainOutcome {
        model: TrainedModel {
            direction,
            sensors: sensors.to_vec(),
            mlp,
            input_scaler,
            output_scaler,
            epochs_run,
            best_val_mse: best_val,
        },
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sensor_names(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    /// A smooth synthetic stand-in for the shoulder data: 4 pseudo-sensor
    /// channels that are linear in the two angles.
    fn linear_dataset(n: usize, seed: u64) -> (Mat, Mat) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let poses = Mat::from_fn(n, 2, |_, c| {
            if c == 0 {
                rng.random_range(-40.0..90.0)
            } else {
                rng.random_range(0.0..90.0)
            }
        });
        let gains = [[-0.8, -0.5], [-0.3, -0.9], [0.3, -0.9], [0.8, -0.5]];
        let sensors = Mat::from_fn(n, 4, |r, c| {
            gains[c][0] * poses.at(r, 0) + gains[c][1] * poses.at(r, 1)
        });
        (poses, sensors)
    }

    #[test]
    fn split_counts_and_disjointness() {
        let s = split_indices(1000, [0.65, 0.15, 0.20], 7);
        assert_eq!(s.train.len(), 650);
        assert_eq!(s.val.len(), 150);
        assert_eq!(s.test.len(), 200);
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(s, split_indices(1000, [0.65, 0.15, 0.20], 7));
        assert_ne!(s.train, split_indices(1000, [0.65, 0.15, 0.20], 8).train);
    }

    #[test]
    fn linear_problem_trains_below_half_degree() {
        let (poses, sensors) = linear_dataset(600, 3);
        let cfg = TrainConfig {
            max_epochs: 2500,
            early_stop_patience: 2500,
            learning_rate: 3e-3,
            activation: Activation::Tanh,
            hidden_units: Some(8),
            ..TrainConfig::default()
        };
        let out = train(
            &sensors,
            &poses,
            Direction::Inverse,
            &sensor_names(&["F", "SF", "SR", "R"]),
            &cfg,
        )
        .unwrap();
        let x_test = sensors.gather_rows(&out.split.test);
        let y_test = poses.gather_rows(&out.split.test);
        let pred = out.model.predict(&x_test).unwrap();
        let rmse = rmse_columns(&pred, &y_test);
        assert!(rmse[0] < 0.5 && rmse[1] < 0.5, "rmse {rmse:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let (poses, sensors) = linear_dataset(200, 5);
        let cfg = TrainConfig {
            max_epochs: 30,
            ..TrainConfig::default()
        };
        let names = sensor_names(&["F", "SF", "SR", "R"]);
        let a = train(&sensors, &poses, Direction::Inverse, &names, &cfg).unwrap();
        let b = train(&sensors, &poses, Direction::Inverse, &names, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        let other_seed = TrainConfig {
            init_seed: 99,
            ..cfg
        };
        let c = train(&sensors, &poses, Direction::Inverse, &names, &other_seed).unwrap();
        assert_ne!(a.model.mlp, c.model.mlp);
    }

    #[test]
    fn sgd_on_a_linear_model_reduces_the_loss() {
        let (poses, sensors) = linear_dataset(300, 8);
        let base = TrainConfig {
            learning_rate: 1e-2,
            activation: Activation::Linear,
            optimizer: Optimizer::Sgd,
            hidden_units: Some(4),
            early_stop_patience: 1000,
            ..TrainConfig::default()
        };
        let names = sensor_names(&["F", "SF", "SR", "R"]);
        let short = train(
            &sensors,
            &poses,
            Direction::Inverse,
            &names,
            &TrainConfig {
                max_epochs: 5,
                ..base
            },
        )
        .unwrap();
        let long = train(
            &sensors,
            &poses,
            Direction::Inverse,
            &names,
            &TrainConfig {
                max_epochs: 200,
                ..base
            },
        )
        .unwrap();
        assert!(long.model.best_val_mse < short.model.best_val_mse);
    }

    #[test]
    fn forward_direction_swaps_the_roles() {
        let (poses, sensors) = linear_dataset(400, 12);
        let cfg = TrainConfig {
            max_epochs: 800,
            ..TrainConfig::forward_defaults()
        };
        let names = sensor_names(&["F", "SF", "SR", "R"]);
        let out = train(&poses, &sensors, Direction::Forward, &names, &cfg).unwrap();
        assert_eq!(out.model.mlp.n_in(), 2);
        assert_eq!(out.model.mlp.n_out(), 4);
        assert_eq!(out.model.mlp.n_hidden(), 8);
        let pred = out
            .model
            .predict(&poses.gather_rows(&out.split.test))
            .unwrap();
        let rmse = rmse_columns(&pred, &sensors.gather_rows(&out.split.test));
        assert!(rmse.iter().all(|&e| e < 2.0), "rmse {rmse:?}");
    }

    #[test]
    fn sensor_list_rules_are_enforced() {
        let (poses, sensors) = linear_dataset(100, 1);
        let cfg = TrainConfig {
            max_epochs: 2,
            ..TrainConfig::default()
        };
        let one = train(
            &sensors.gather_rows(&(0..100).collect::<Vec<_>>()),
            &poses,
            Direction::Inverse,
            &sensor_names(&["F"]),
            &cfg,
        );
        assert!(matches!(one, Err(MappingError::TooFewSensors(1))));
        let dup = train(
            &sensors,
            &poses,
            Direction::Inverse,
            &sensor_names(&["F", "F", "SR", "R"]),
            &cfg,
        );
        assert!(matches!(dup, Err(MappingError::DuplicateSensor(_))));
        let unknown = train(
            &sensors,
            &poses,
            Direction::Inverse,
            &sensor_names(&["F", "SF", "SR", "Q"]),
            &cfg,
        );
        assert!(matches!(unknown, Err(MappingError::UnknownSensor(_))));
        let arity = train(
            &sensors,
            &poses,
            Direction::Inverse,
            &sensor_names(&["F", "SF"]),
            &cfg,
        );
        assert!(matches!(arity, Err(MappingError::SensorArity { .. })));
    }

    #[test]
    fn prediction_rejects_wrong_width() {
        let (poses, sensors) = linear_dataset(100, 2);
        let cfg = TrainConfig {
            max_epochs: 2,
            ..TrainConfig::default()
        };
        let out = train(
            &sensors,
            &poses,
            Direction::Inverse,
            &sensor_names(&["F", "SF", "SR", "R"]),
            &cfg,
        )
        .unwrap();
        let narrow = Mat::zeros(3, 2);
        assert!(matches!(
            out.model.predict(&narrow),
            Err(MappingError::DimensionMismatch {
                expected: 4,
                got: 2
            })
        ));
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad_split = TrainConfig {
            split: [0.9, 0.2, -0.1],
            ..TrainConfig::default()
        };
        assert!(bad_split.validate().is_err());
        let bad_lr = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad_lr.validate().is_err());
        let bad_batch = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad_batch.validate().is_err());
    }
}
