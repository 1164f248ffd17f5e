//! Loss, optimizer, the fit loop and evaluation.
//!
//! Stateless models train on shuffled single frames; recurrent models train
//! on sliding windows with zero initial state (truncated BPTT). A batch is
//! cut into fixed-size shards; each shard's gradient is computed on its own
//! graph (in parallel when enabled) and shards are summed in order, so
//! results do not depend on the number of worker threads.

use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamStore};
use crate::data::{preprocess, split_episodes, windows, AugmentConfig, AugmentParams, Episode};
use crate::models::Model;
use crate::tensor::par::map_ordered;
use crate::{Error, Result, Rng, Scalar, Tensor};

/// Mean of squared differences.
pub fn mse<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("mse", pred.shape(), target.shape()));
    }
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p.as_f64() - t.as_f64()).powi(2))
        .sum();
    Ok(total / pred.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Moment estimates for every parameter, in store order.
#[derive(Clone, Debug)]
pub struct AdamState<T: Scalar = f32> {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, params: &ParamStore<T>) -> Self {
        let zeros = || params.iter().map(|e| vec![T::zero(); e.value.len()]).collect();
        Self {
            config,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update from `grads` (aligned with `params`' order), followed by
    /// the parameters' lower-bound clamps. A non-finite gradient leaves
    /// parameters and state untouched.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &[Tensor<T>]) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::InvalidConfig(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for (e, g) in params.iter().zip(grads) {
            if g.shape() != e.value.shape() {
                return Err(Error::shape("adam", e.value.shape(), g.shape()));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(e.name.clone()));
            }
        }
        self.t += 1;
        let c = self.config;
        let (b1, b2) = (T::cast(c.beta1), T::cast(c.beta2));
        let (one, lr, eps) = (T::one(), T::cast(c.lr), T::cast(c.epsilon));
        let bc1 = T::cast(1.0 - c.beta1.powi(self.t as i32));
        let bc2 = T::cast(1.0 - c.beta2.powi(self.t as i32));
        for (((e, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let theta = e.value.data_mut();
            for i in 0..theta.len() {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] = theta[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        params.apply_bounds();
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Frames per batch for the stateless baseline.
    pub batch_frames: usize,
    /// Windows per batch for recurrent models.
    pub batch_windows: usize,
    pub window_len: usize,
    pub window_stride: usize,
    /// Fraction of segments held out for validation; 0 trains on all data.
    pub val_fraction: f64,
    /// Episodes are cut into segments of this many frames before splitting.
    pub segment_len: usize,
    pub augment: bool,
    pub augmentation: AugmentConfig,
    /// Items per gradient shard.
    pub shard_size: usize,
    /// Shuffle, augmentation and dropout seed; set by the caller rather
    /// than read from config files.
    #[serde(skip)]
    pub seed: u64,
    /// Stop after this many optimizer steps.
    pub max_steps: Option<usize>,
    /// Stop once an epoch's training MSE falls below this.
    pub target_train_mse: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            batch_frames: 32,
            batch_windows: 8,
            window_len: 16,
            window_stride: 8,
            val_fraction: 0.2,
            segment_len: 100,
            augment: true,
            augmentation: AugmentConfig::default(),
            shard_size: 4,
            seed: 0,
            max_steps: None,
            target_train_mse: None,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_frames", self.batch_frames),
            ("batch_windows", self.batch_windows),
            ("window_len", self.window_len),
            ("window_stride", self.window_stride),
            ("segment_len", self.segment_len),
            ("shard_size", self.shard_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidConfig(format!(
                "val_fraction {} not in [0, 1)",
                self.val_fraction
            )));
        }
        let a = self.adam();
        if !(a.lr >= 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid Adam settings {a:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (best validation MSE, or best
    /// training MSE without a validation set).
    pub best_epoch: Option<usize>,
    pub total_steps: usize,
    /// Excluded from serialized output so reports stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// One `epoch train_mse val_mse` line per epoch (`-` when there is no
    /// validation set).
    pub fn to_lines(&self) -> String {
        let mut out = String::from("epoch train_mse val_mse\n");
        for r in &self.epochs {
            let val = r.val_mse.map_or_else(|| "-".to_string(), |v| v.to_string());
            out.push_str(&format!("{} {} {}\n", r.epoch, r.train_mse, val));
        }
        out
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.and_then(|b| self.epochs.iter().find(|r| r.epoch == b))
    }
}

/// Preprocessed frames and labels of one episode.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub frames: Vec<Tensor<f32>>,
    pub labels: Vec<f32>,
}

impl Prepared {
    pub fn new(episode: &Episode) -> Self {
        Self {
            frames: map_ordered(&episode.samples, |_, s| preprocess(&s.center)),
            labels: episode.steering(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn prepare_all(episodes: &[Episode]) -> Vec<Prepared> {
    episodes.iter().map(Prepared::new).collect()
}

/// Stateful inference over each episode from a zero state, dropout off;
/// MSE over all frames.
pub fn evaluate(model: &Model, episodes: &[Episode]) -> Result<f64> {
    evaluate_prepared(model, &prepare_all(episodes))
}

pub fn evaluate_prepared(model: &Model, episodes: &[Prepared]) -> Result<f64> {
    let (sum, n) = squared_errors(model, episodes)?;
    Ok(sum / n as f64)
}

/// Per-episode predictions from a zero state.
pub fn predict_prepared(model: &Model, episodes: &[Prepared]) -> Result<Vec<Vec<f32>>> {
    map_ordered(episodes, |_, ep| {
        let mut m = model.clone();
        m.reset_state();
        ep.frames.iter().map(|f| m.step(f)).collect::<Result<Vec<f32>>>()
    })
    .into_iter()
    .collect()
}

fn squared_errors(model: &Model, episodes: &[Prepared]) -> Result<(f64, usize)> {
    let n: usize = episodes.iter().map(Prepared::len).sum();
    if n == 0 {
        return Err(Error::Empty("evaluation episodes"));
    }
    let preds = predict_prepared(model, episodes)?;
    let mut sum = 0.0;
    for (p, ep) in preds.iter().zip(episodes) {
        for (&a, &b) in p.iter().zip(&ep.labels) {
            sum += (a as f64 - b as f64).powi(2);
        }
    }
    Ok((sum, n))
}

/// A training item: one frame, or one window of consecutive frames.
#[derive(Clone, Debug)]
struct Item {
    episode: usize,
    range: Range<usize>,
}

struct TrainSet<'a> {
    raw: &'a [Episode],
    prepared: Vec<Prepared>,
    items: Vec<Item>,
}

impl<'a> TrainSet<'a> {
    fn new(raw: &'a [Episode], recurrent: bool, cfg: &TrainConfig) -> Result<Self> {
        let mut items = Vec::new();
        for (e, ep) in raw.iter().enumerate() {
            if !recurrent {
                items.extend((0..ep.len()).map(|i| Item {
                    episode: e,
                    range: i..i + 1,
                }));
            } else if ep.len() < cfg.window_len {
                items.push(Item {
                    episode: e,
                    range: 0..ep.len(),
                });
            } else {
                items.extend(
                    windows(ep.len(), cfg.window_len, cfg.window_stride)?
                        .into_iter()
                        .map(|range| Item { episode: e, range }),
                );
            }
        }
        if items.is_empty() {
            return Err(Error::Empty("training set"));
        }
        Ok(Self {
            raw,
            prepared: prepare_all(raw),
            items,
        })
    }

    /// Frames and labels of an item; augmentation parameters are drawn once
    /// per item so a window stays temporally consistent.
    fn load(&self, item: &Item, cfg: &TrainConfig, rng: &mut Rng) -> (Vec<Tensor<f32>>, Vec<f32>) {
        let range = item.range.clone();
        if !cfg.augment {
            let p = &self.prepared[item.episode];
            return (p.frames[range.clone()].to_vec(), p.labels[range].to_vec());
        }
        let samples = &self.raw[item.episode].samples[range];
        let first = &samples[0];
        let params = AugmentParams::sample(
            &cfg.augmentation,
            rng,
            samples.iter().all(|s| s.has_side_cameras()),
            first.center.width(),
        );
        samples
            .iter()
            .map(|s| {
                let (img, label) = params.apply(&cfg.augmentation, s);
                (preprocess(&img), label)
            })
            .unzip()
    }
}

/// Mean-squared-error gradient of one batch, summed over shards in order.
fn batch_gradient(
    model: &Model,
    set: &TrainSet<'_>,
    batch: &[usize],
    cfg: &TrainConfig,
    stream: &[u64],
) -> Result<(f64, Vec<Tensor<f32>>)> {
    let arch = model.architecture();
    let frames_in_batch: usize = batch.iter().map(|&i| set.items[i].range.len()).sum();
    let scale = 1.0 / frames_in_batch as f64;
    let shards: Vec<&[usize]> = batch.chunks(cfg.shard_size).collect();
    let results = map_ordered(&shards, |_, shard| -> Result<(f64, Vec<Tensor<f32>>)> {
        let mut g = Graph::new();
        g.bind(model.params())?;
        let mut loss = None;
        for &i in shard.iter() {
            let mut words = stream.to_vec();
            words.push(i as u64);
            let mut rng = Rng::new(Rng::mix(&words));
            let (frames, labels) = set.load(&set.items[i], cfg, &mut rng);
            let ids: Vec<_> = frames.into_iter().map(|f| g.constant(f)).collect();
            let (preds, _) = arch.unroll(&mut g, &ids, None, Some(&mut rng))?;
            for (p, y) in preds.into_iter().zip(labels) {
                let e = g.sum_squared_error(p, &Tensor::vector(vec![y]))?;
                loss = Some(match loss {
                    None => e,
                    Some(l) => g.add(l, e)?,
                });
            }
        }
        let loss = g.scale(loss.ok_or(Error::Empty("gradient shard"))?, scale);
        g.backward(loss)?;
        let value = g.value(loss).item()? as f64;
        let grads = g.param_grads().into_iter().map(|(_, t)| t).collect();
        Ok((value, grads))
    });
    let mut total_loss = 0.0;
    let mut total: Option<Vec<Tensor<f32>>> = None;
    for r in results {
        let (l, grads) = r?;
        total_loss += l;
        total = Some(match total {
            None => grads,
            Some(acc) => acc.iter().zip(&grads).map(|(a, b)| a.add(b)).collect::<Result<_>>()?,
        });
    }
    Ok((total_loss, total.ok_or(Error::Empty("batch"))?))
}

/// Trains `model` on `episodes` and leaves it holding the best-epoch
/// parameters.
pub fn fit(model: &mut Model, episodes: &[Episode], cfg: &TrainConfig) -> Result<TrainReport> {
    fit_with(model, episodes, cfg, |_| {})
}

/// [`fit`] with a callback after every epoch.
pub fn fit_with(
    model: &mut Model,
    episodes: &[Episode],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    if episodes.iter().all(Episode::is_empty) {
        return Err(Error::Empty("training episodes"));
    }
    let start = Instant::now();
    let recurrent = model.spec().variant.is_recurrent();
    let (train_eps, val_eps) = if cfg.val_fraction > 0.0 {
        split_episodes(episodes, 1.0 - cfg.val_fraction, cfg.segment_len, cfg.seed)?
    } else {
        (episodes.to_vec(), Vec::new())
    };
    let set = TrainSet::new(&train_eps, recurrent, cfg)?;
    let val = prepare_all(&val_eps);
    let batch_size = if recurrent { cfg.batch_windows } else { cfg.batch_frames };

    let mut adam = AdamState::new(cfg.adam(), model.params());
    let mut report = TrainReport {
        model: model.spec().variant.to_string(),
        seed: model.spec().seed,
        config: cfg.clone(),
        epochs: Vec::new(),
        best_epoch: None,
        total_steps: 0,
        wall_time_secs: 0.0,
    };
    let mut best: Option<(f64, ParamStore<f32>)> = None;
    let diverged = |mut report: TrainReport, start: Instant| {
        report.wall_time_secs = start.elapsed().as_secs_f64();
        Err(Error::Diverged(Box::new(report)))
    };

    'epochs: for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..set.items.len()).collect();
        Rng::derive(cfg.seed, epoch as u64).shuffle(&mut order);
        let mut steps = 0;
        let mut stop = false;
        for (b, batch) in order.chunks(batch_size).enumerate() {
            let stream = [cfg.seed, epoch as u64, b as u64];
            let (loss, grads) = batch_gradient(model, &set, batch, cfg, &stream)?;
            if !loss.is_finite() {
                return diverged(report, start);
            }
            match adam.step(model.params_mut(), &grads) {
                Err(Error::NonFiniteGradient(_)) => return diverged(report, start),
                other => other?,
            }
            steps += 1;
            report.total_steps += 1;
            if cfg.max_steps.is_some_and(|m| report.total_steps >= m) {
                stop = true;
                break;
            }
        }
        let train_mse = evaluate_prepared(model, &set.prepared)?;
        let val_mse = if val.is_empty() {
            None
        } else {
            Some(evaluate_prepared(model, &val)?)
        };
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            steps,
        };
        on_epoch(&record);
        report.epochs.push(record);
        let score = val_mse.unwrap_or(train_mse);
        if !score.is_finite() {
            return diverged(report, start);
        }
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, model.params().clone()));
            report.best_epoch = Some(epoch);
        }
        if stop || cfg.target_train_mse.is_some_and(|t| train_mse < t) {
            break 'epochs;
        }
    }
    if let Some((_, params)) = best {
        *model.params_mut() = params;
    }
    model.reset_state();
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
