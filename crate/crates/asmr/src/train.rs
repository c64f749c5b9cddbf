//! Fitting loop: MSE objective, Adam, cosine-annealed learning rate,
//! full-grid or sampled-coordinate batching, per-step metric logging.
//!
//! Targets are normalized to [-1, 1] before fitting; PSNR is reported for the
//! native dynamic range of the target grid.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataio::Grid;
use crate::metrics::psnr;
use crate::model::{AsmrModel, ModelError, SirenModel};
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("target extents {target:?} do not match the model grid {model:?}")]
    ExtentMismatch {
        target: Vec<usize>,
        model: Vec<usize>,
    },
    #[error("numeric failure (non-finite loss) at iteration {iter}")]
    NumericFailure { iter: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Batching strategy: the whole grid every step, or a fresh random
/// coordinate sample per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Batch {
    Full,
    Sampled(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr: f64,
    pub lr_min: f64,
    pub batch: Batch,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            lr: 1e-4,
            lr_min: 1e-6,
            batch: Batch::Full,
            seed: 0,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.iterations == 0 {
            return Err(TrainError::BadConfig("iterations must be >= 1".into()));
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr) {
            return Err(TrainError::BadConfig(format!(
                "need 0 < lr_min <= lr, got lr_min {} lr {}",
                self.lr_min, self.lr
            )));
        }
        if self.log_every == 0 {
            return Err(TrainError::BadConfig("log_every must be >= 1".into()));
        }
        if let Batch::Sampled(0) = self.batch {
            return Err(TrainError::BadConfig("sample count must be >= 1".into()));
        }
        Ok(())
    }
}

/// One logged training step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub iter: usize,
    pub loss: f64,
    pub psnr: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub records: Vec<LogRecord>,
    pub wall_time: Duration,
}

/// Adam first/second-moment state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// Standard Adam update with bias correction, in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainError::ShapeMismatch(format!(
            "params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
    Ok(())
}

/// Cosine annealing: `lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi t / T))`.
pub fn cosine_lr(t: usize, total: usize, lr_max: f64, lr_min: f64) -> f64 {
    assert!(t <= total && total > 0);
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * t as f64 / total as f64).cos())
}

fn check_finite(loss: f64, iter: usize) -> Result<(), TrainError> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(TrainError::NumericFailure { iter })
    }
}

/// Shared driver: `step(lr)` must run one forward/backward pass, apply
/// nothing, and return `(loss, psnr, flat grads)`; `apply` folds the Adam
/// update back into the model.
fn run_loop(
    cfg: &TrainConfig,
    param_len: usize,
    mut read_params: impl FnMut() -> Vec<f64>,
    mut write_params: impl FnMut(&[f64]),
    mut step: impl FnMut(usize) -> Result<(f64, f64, Vec<f64>), TrainError>,
) -> Result<FitResult, TrainError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut state = AdamState::new(param_len);
    let mut records = Vec::new();
    for iter in 1..=cfg.iterations {
        let lr = cosine_lr(iter - 1, cfg.iterations, cfg.lr, cfg.lr_min);
        let (loss, quality, grads) = step(iter)?;
        check_finite(loss, iter)?;
        let mut flat = read_params();
        adam_step(&mut flat, &grads, &mut state, lr)?;
        write_params(&flat);
        if iter % cfg.log_every == 0 || iter == cfg.iterations {
            records.push(LogRecord {
                iter,
                loss,
                psnr: quality,
                lr,
            });
        }
    }
    Ok(FitResult {
        records,
        wall_time: start.elapsed(),
    })
}

fn flatten(tensors: &[&Tensor]) -> Vec<f64> {
    tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
}

fn unflatten(model_params: Vec<&mut Tensor>, flat: &[f64]) {
    let mut pos = 0;
    for p in model_params {
        let n = p.len();
        p.data_mut().copy_from_slice(&flat[pos..pos + n]);
        pos += n;
    }
}

fn grid_target(target: &Grid) -> Vec<f64> {
    target.normalized()
}

/// Fits the multi-resolution model to `target`. Full batches run the
/// activation-sharing forward over the whole grid; sampled batches run the
/// per-coordinate forward on a fresh random subset each step.
pub fn fit_asmr(
    model: &mut AsmrModel,
    target: &Grid,
    cfg: &TrainConfig,
) -> Result<FitResult, TrainError> {
    cfg.validate()?;
    if target.extents != model.scheme().extents() {
        return Err(TrainError::ExtentMismatch {
            target: target.extents.clone(),
            model: model.scheme().extents().to_vec(),
        });
    }
    let out_width = *model.widths().last().unwrap();
    if target.channels != out_width {
        return Err(TrainError::ShapeMismatch(format!(
            "target has {} channels but the model outputs {out_width}",
            target.channels
        )));
    }
    let norm = grid_target(target);
    let param_len: usize = model.params().iter().map(|t| t.len()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let extents = model.scheme().extents().to_vec();
    let channels = target.channels;

    // the borrow of `model` has to thread through every closure, so the loop
    // is inlined here rather than dispatched through run_loop
    let start = Instant::now();
    let mut state = AdamState::new(param_len);
    let mut records = Vec::new();
    for iter in 1..=cfg.iterations {
        let lr = cosine_lr(iter - 1, cfg.iterations, cfg.lr, cfg.lr_min);
        let mut tape = Tape::new();
        let (params, out, targets) = match cfg.batch {
            Batch::Full => {
                let (params, out) = model.build_shared(&mut tape, None)?;
                let shape = tape.value(out).shape().to_vec();
                (params, out, Tensor::new(shape, norm.clone()))
            }
            Batch::Sampled(k) => {
                let mut xs = Vec::with_capacity(k);
                let mut rows = Vec::with_capacity(k * channels);
                for _ in 0..k {
                    let x: Vec<usize> =
                        extents.iter().map(|&e| rng.gen_range(0..e)).collect();
                    let mut flat = 0usize;
                    for (c, e) in x.iter().zip(&extents) {
                        flat = flat * e + c;
                    }
                    rows.extend_from_slice(&norm[flat * channels..(flat + 1) * channels]);
                    xs.push(x);
                }
                let (params, out) = model.build_naive(&mut tape, &xs, None)?;
                (params, out, Tensor::new(vec![k, channels], rows))
            }
        };
        let pred = tape.value(out).data().to_vec();
        let quality = psnr(&pred, targets.data(), 2.0).expect("matching shapes");
        let t_leaf = tape.leaf(targets);
        let loss_node = tape.mse(out, t_leaf).map_err(ModelError::from)?;
        let loss = tape.value(loss_node).data()[0];
        check_finite(loss, iter)?;
        tape.backward(loss_node);
        let grads: Vec<f64> = params
            .iter()
            .flat_map(|&v| tape.grad(v).expect("all params reached").data().iter().copied())
            .collect();
        let mut flat = flatten(&model.params());
        adam_step(&mut flat, &grads, &mut state, lr)?;
        unflatten(model.params_mut(), &flat);
        if iter % cfg.log_every == 0 || iter == cfg.iterations {
            records.push(LogRecord {
                iter,
                loss,
                psnr: quality,
                lr,
            });
        }
    }
    Ok(FitResult {
        records,
        wall_time: start.elapsed(),
    })
}

/// Normalized coordinate lattice of a grid: each axis mapped linearly to
/// [-1, 1], row-major, shape `[N, d]`.
pub fn normalized_coords(extents: &[usize]) -> Tensor {
    let n: usize = extents.iter().product();
    let d = extents.len();
    let mut data = Vec::with_capacity(n * d);
    let mut idx = vec![0usize; d];
    for _ in 0..n {
        for (i, &c) in idx.iter().enumerate() {
            data.push(axis_norm(c, extents[i]));
        }
        for i in (0..d).rev() {
            idx[i] += 1;
            if idx[i] < extents[i] {
                break;
            }
            idx[i] = 0;
        }
    }
    Tensor::new(vec![n, d], data)
}

fn axis_norm(c: usize, extent: usize) -> f64 {
    if extent <= 1 {
        0.0
    } else {
        2.0 * c as f64 / (extent - 1) as f64 - 1.0
    }
}

/// Fits a plain sinusoidal MLP to `target` over normalized coordinates.
pub fn fit_siren(
    model: &mut SirenModel,
    target: &Grid,
    cfg: &TrainConfig,
) -> Result<FitResult, TrainError> {
    cfg.validate()?;
    if model.widths()[0] != target.extents.len() {
        return Err(TrainError::ShapeMismatch(format!(
            "model takes {} coordinates but the target is {}-D",
            model.widths()[0],
            target.extents.len()
        )));
    }
    let out_width = *model.widths().last().unwrap();
    if target.channels != out_width {
        return Err(TrainError::ShapeMismatch(format!(
            "target has {} channels but the model outputs {out_width}",
            target.channels
        )));
    }
    let norm = grid_target(target);
    let coords = normalized_coords(&target.extents);
    let n = target.total_points();
    let d = target.extents.len();
    let channels = target.channels;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let param_len: usize = model.params().iter().map(|t| t.len()).sum();

    let model_cell = std::cell::RefCell::new(model);
    run_loop(
        cfg,
        param_len,
        || flatten(&model_cell.borrow().params()),
        |flat| unflatten(model_cell.borrow_mut().params_mut(), flat),
        |_iter| {
            let mut tape = Tape::new();
            let (batch_coords, batch_targets) = match cfg.batch {
                Batch::Full => (
                    coords.clone(),
                    Tensor::new(vec![n, channels], norm.clone()),
                ),
                Batch::Sampled(k) => {
                    let mut cs = Vec::with_capacity(k * d);
                    let mut ts = Vec::with_capacity(k * channels);
                    for _ in 0..k {
                        let flat = rng.gen_range(0..n);
                        cs.extend_from_slice(&coords.data()[flat * d..(flat + 1) * d]);
                        ts.extend_from_slice(&norm[flat * channels..(flat + 1) * channels]);
                    }
                    (Tensor::new(vec![k, d], cs), Tensor::new(vec![k, channels], ts))
                }
            };
            let (params, out) = model_cell.borrow().build_forward(&mut tape, batch_coords)?;
            let pred = tape.value(out).data().to_vec();
            let quality = psnr(&pred, batch_targets.data(), 2.0).expect("matching shapes");
            let t_leaf = tape.leaf(batch_targets);
            let loss_node = tape.mse(out, t_leaf).map_err(ModelError::from)?;
            let loss = tape.value(loss_node).data()[0];
            tape.backward(loss_node);
            let grads = params
                .iter()
                .flat_map(|&v| tape.grad(v).expect("all params reached").data().iter().copied())
                .collect();
            Ok((loss, quality, grads))
        },
    )
}

/// Writes fit records as CSV with header `iter,loss,psnr,lr`.
pub fn records_to_csv(records: &[LogRecord]) -> String {
    let mut out = String::from("iter,loss,psnr,lr\n");
    for r in records {
        out.push_str(&format!("{},{:.10e},{:.4},{:.6e}\n", r.iter, r.loss, r.psnr, r.lr));
    }
    out
}
