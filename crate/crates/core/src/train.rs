//! The end-to-end training loop: fit g, then minibatch updates combining
//! the supervised gradient with the Sinkhorn balancing gradient on uniform
//! counter-action batches, with early stopping and alpha selection on the
//! validation nmCG@1.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{all_actions, ObservationalDataset, OracleTable};
use crate::eval::{nmcg, EvalError};
use crate::models::{
    action_index, combined_loss, concat_features_actions, fit_g, take_rows, GModel,
    MultiHeadModel, RMNetModel, Scorer,
};
use crate::nn::{adam_step, backward, forward, l2_penalty, AdamState, NetworkParams, NnError};
use crate::sinkhorn::{sinkhorn_distance, sinkhorn_grad, SinkhornError, TransportProblem};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("bad training configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sinkhorn(#[from] SinkhornError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha_grid: Vec<f64>,
    pub beta: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Batch size for the pairwise-IPM baseline, which needs enough rows
    /// per factual action to form transport problems.
    pub ipm_batch_size: usize,
    pub l2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Warm-up epochs excluded from the early-stopping window. The
    /// validation nmCG@1 fluctuates wildly at the start and a lucky early
    /// peak would otherwise starve the patience counter; hard draws also
    /// improve slowly late, so patience counts improvements relative to
    /// the post-warm-up portion of the history only. The best checkpoint
    /// is still tracked over every epoch, warm-up included.
    pub min_epochs: usize,
    /// Independent re-initializations per training run; the restart with
    /// the best validation nmCG@1 wins. Occasional inits plateau far below
    /// par within the epoch budget, and the validation score exposes them.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha_grid: vec![0.1, 0.3, 1.0, 3.0, 10.0],
            beta: 0.5,
            lr: 1e-4,
            batch_size: 64,
            ipm_batch_size: 512,
            l2: 1e-4,
            max_epochs: 300,
            patience: 30,
            min_epochs: 100,
            restarts: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.alpha_grid.is_empty() {
            return Err(TrainError::Config("alpha grid is empty".into()));
        }
        if self.batch_size < 2 || self.ipm_batch_size < 2 {
            return Err(TrainError::Config("batch size must be at least 2".into()));
        }
        if self.patience >= self.max_epochs {
            return Err(TrainError::Config(format!(
                "patience ({}) must be smaller than max_epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if self.min_epochs > self.max_epochs {
            return Err(TrainError::Config(format!(
                "min_epochs ({}) must not exceed max_epochs ({})",
                self.min_epochs, self.max_epochs
            )));
        }
        if self.restarts == 0 {
            return Err(TrainError::Config("restarts must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(TrainError::Config("beta must lie in [0, 1]".into()));
        }
        if !(self.lr >= 0.0) || !(self.l2 >= 0.0) {
            return Err(TrainError::Config("lr and l2 must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub xe: f64,
    pub mse: f64,
    pub ipm: f64,
    pub val_nmcg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_nmcg: f64,
    pub selected_alpha: f64,
    pub log: Vec<EpochRecord>,
    pub wall_secs: f64,
}

/// Stop when the best value in `history` is more than `patience` entries
/// old. Higher is better.
pub fn convergence_check(history: &[f64], patience: usize) -> bool {
    if history.is_empty() {
        return false;
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0;
    for (i, &v) in history.iter().enumerate() {
        if v > best {
            best = v;
            best_idx = i;
        }
    }
    history.len() - 1 - best_idx >= patience
}

fn val_score(model: &impl Scorer, val: &ObservationalDataset, oracle: &OracleTable) -> Result<f64, TrainError> {
    let actions = all_actions(val.a_obs.ncols());
    let scores = model.score_all(&val.x, &actions);
    Ok(nmcg(&scores, oracle, 1)?.unwrap_or(f64::NEG_INFINITY))
}

/// Seed for restart `r` of a run configured with `seed`. Restart 0 uses the
/// configured seed unchanged so single-restart runs match older trajectories.
fn restart_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add((r as u64).wrapping_mul(0x9e3779b97f4a7c15))
}

/// The minibatch loop at a fixed alpha: several independent inits, each
/// trained to early stopping, best validation nmCG@1 wins. The
/// conditional-mean model g is frozen throughout; pass None when beta = 0
/// (no soft-XE term).
pub fn train_rmnet(
    train: &ObservationalDataset,
    val: &ObservationalDataset,
    val_oracle: &OracleTable,
    g: Option<&GModel>,
    alpha: f64,
    cfg: &TrainConfig,
) -> Result<(RMNetModel, TrainReport), TrainError> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let mut best: Option<(RMNetModel, TrainReport)> = None;
    for r in 0..cfg.restarts {
        let (model, report) =
            train_rmnet_once(train, val, val_oracle, g, alpha, cfg, restart_seed(cfg.seed, r))?;
        if best
            .as_ref()
            .map_or(true, |(_, b)| report.best_val_nmcg > b.best_val_nmcg)
        {
            best = Some((model, report));
        }
    }
    let (model, mut report) = best.expect("at least one restart ran");
    report.wall_secs = start.elapsed().as_secs_f64();
    Ok((model, report))
}

fn train_rmnet_once(
    train: &ObservationalDataset,
    val: &ObservationalDataset,
    val_oracle: &OracleTable,
    g: Option<&GModel>,
    alpha: f64,
    cfg: &TrainConfig,
    run_seed: u64,
) -> Result<(RMNetModel, TrainReport), TrainError> {
    if cfg.beta > 0.0 && g.is_none() {
        return Err(TrainError::Config(
            "beta > 0 requires a fitted g model".into(),
        ));
    }
    let start = std::time::Instant::now();
    let d = train.x.ncols();
    let m = train.a_obs.ncols();
    let actions = all_actions(m);
    let g_values = match g {
        Some(g) => g.predict(&train.x)?,
        None => Array1::zeros(train.len()),
    };

    let mut model = RMNetModel::new(d, m, run_seed);
    let mut adam_e = AdamState::new(&model.extractor, cfg.lr);
    let mut adam_h = AdamState::new(&model.hypothesis, cfg.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(run_seed.wrapping_mul(0x9e3779b9).wrapping_add(1));
    let mut counter_rng = ChaCha8Rng::seed_from_u64(run_seed.wrapping_mul(0x9e3779b9).wrapping_add(2));
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut log = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, RMNetModel)> = None;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut sum_xe, mut sum_mse, mut sum_ipm, mut sum_l2) = (0.0, 0.0, 0.0, 0.0);
        let mut rows = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xb = take_rows(&train.x, chunk);
            let ab = take_rows(&train.a_obs, chunk);
            let yb: Array1<f64> = chunk.iter().map(|&i| train.y[i]).collect();
            let gb: Array1<f64> = chunk.iter().map(|&i| g_values[i]).collect();

            let input_f = concat_features_actions(&xb, &ab);
            let (phi_f, cache_f) = forward(&model.extractor, &input_f)?;
            let (f_out, cache_h) = forward(&model.hypothesis, &phi_f)?;
            let f_vals = f_out.column(0).to_owned();
            let cl = combined_loss(&f_vals, &yb, &gb, cfg.beta)?;
            if !cl.total.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            let df = if let Ok(s) = std::env::var("XE_SCALE") { // TEMP experiment knob
                let s: f64 = s.parse().unwrap();
                let xe_part = combined_loss(&f_vals, &yb, &gb, 1.0)?.df;
                let mse_part = combined_loss(&f_vals, &yb, &gb, 0.0)?.df;
                (xe_part * (cfg.beta * s) + &(mse_part * (1.0 - cfg.beta))).insert_axis(Axis(1))
            } else {
                cl.df.clone().insert_axis(Axis(1))
            };
            let (mut grads_h, mut dphi) = backward(&model.hypothesis, &cache_h, &df)?;

            let mut batch_ipm = 0.0;
            let mut grads_e;
            if alpha != 0.0 && chunk.len() >= 2 {
                let mut au: Array2<f64> = Array2::zeros((chunk.len(), m));
                for i in 0..chunk.len() {
                    let idx = counter_rng.gen_range(0..actions.nrows());
                    au.row_mut(i).assign(&actions.row(idx));
                }
                let input_u = concat_features_actions(&xb, &au);
                let (phi_u, cache_u) = forward(&model.extractor, &input_u)?;
                let problem = TransportProblem::new(&phi_f, &phi_u)?;
                if problem.epsilon > 0.0 {
                    let res = sinkhorn_distance(&problem)?;
                    batch_ipm = res.distance;
                    let (ga, gbu) = sinkhorn_grad(&problem, &res.plan)?;
                    dphi.scaled_add(alpha, &ga);
                    let (ge_u, _) = backward(&model.extractor, &cache_u, &(gbu * alpha))?;
                    let (ge_f, _) = backward(&model.extractor, &cache_f, &dphi)?;
                    grads_e = ge_f;
                    grads_e.axpy(1.0, &ge_u);
                } else {
                    let (ge_f, _) = backward(&model.extractor, &cache_f, &dphi)?;
                    grads_e = ge_f;
                }
            } else {
                let (ge_f, _) = backward(&model.extractor, &cache_f, &dphi)?;
                grads_e = ge_f;
            }

            let (l2_e, l2_grad_e) = l2_penalty(&model.extractor, cfg.l2);
            let (l2_h, l2_grad_h) = l2_penalty(&model.hypothesis, cfg.l2);
            grads_e.axpy(1.0, &l2_grad_e);
            grads_h.axpy(1.0, &l2_grad_h);
            adam_step(&mut model.extractor, &grads_e, &mut adam_e)?;
            adam_step(&mut model.hypothesis, &grads_h, &mut adam_h)?;

            let w = chunk.len() as f64;
            // With beta = 0 the XE term is eliminated (and would otherwise
            // be reported against a meaningless zero g).
            if cfg.beta > 0.0 {
                sum_xe += cl.xe * w;
            }
            sum_mse += cl.mse * w;
            sum_ipm += batch_ipm * w;
            sum_l2 += (l2_e + l2_h) * w;
            rows += chunk.len();
        }
        let n = rows as f64;
        let (xe, mse, ipm, l2) = (sum_xe / n, sum_mse / n, sum_ipm / n, sum_l2 / n);
        let loss = cfg.beta * xe + (1.0 - cfg.beta) * mse + alpha * ipm + l2;
        let score = val_score(&model, val, val_oracle)?;
        log.push(EpochRecord {
            epoch,
            loss,
            xe,
            mse,
            ipm,
            val_nmcg: score,
        });
        history.push(score);
        if best.as_ref().map_or(true, |(_, b, _)| score > *b) {
            best = Some((epoch, score, model.clone()));
        }
        let window = &history[cfg.min_epochs.min(history.len())..];
        if convergence_check(window, cfg.patience) {
            break;
        }
    }

    let (best_epoch, best_val, best_model) = best.expect("at least one epoch ran");
    Ok((
        best_model,
        TrainReport {
            epochs_run: log.len(),
            best_epoch,
            best_val_nmcg: best_val,
            selected_alpha: alpha,
            log,
            wall_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Algorithm 1 with model selection: fit g once, train one model per alpha
/// in the grid, return the one with the best validation nmCG@1 (ties go to
/// the smaller alpha).
pub fn select_alpha(
    train: &ObservationalDataset,
    val: &ObservationalDataset,
    val_oracle: &OracleTable,
    cfg: &TrainConfig,
) -> Result<(RMNetModel, TrainReport), TrainError> {
    cfg.validate()?;
    let g = if cfg.beta > 0.0 {
        Some(fit_g(train, val, cfg.seed)?)
    } else {
        None
    };
    let mut grid = cfg.alpha_grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best: Option<(RMNetModel, TrainReport)> = None;
    for &alpha in &grid {
        let (model, report) = train_rmnet(train, val, val_oracle, g.as_ref(), alpha, cfg)?;
        let better = best
            .as_ref()
            .map_or(true, |(_, b)| report.best_val_nmcg > b.best_val_nmcg);
        if better {
            best = Some((model, report));
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// Multi-head training: factual MSE per head, optionally plus the pairwise
/// Sinkhorn balancing term over actions co-present in the batch (the
/// alpha > 0 case is the CFRNet-style baseline, using the larger batch).
/// Restarts follow the same best-validation rule as `train_rmnet`.
pub fn train_multihead(
    train: &ObservationalDataset,
    val: &ObservationalDataset,
    val_oracle: &OracleTable,
    alpha: f64,
    cfg: &TrainConfig,
) -> Result<(MultiHeadModel, TrainReport), TrainError> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let mut best: Option<(MultiHeadModel, TrainReport)> = None;
    for r in 0..cfg.restarts {
        let (model, report) =
            train_multihead_once(train, val, val_oracle, alpha, cfg, restart_seed(cfg.seed, r))?;
        if best
            .as_ref()
            .map_or(true, |(_, b)| report.best_val_nmcg > b.best_val_nmcg)
        {
            best = Some((model, report));
        }
    }
    let (model, mut report) = best.expect("at least one restart ran");
    report.wall_secs = start.elapsed().as_secs_f64();
    Ok((model, report))
}

fn train_multihead_once(
    train: &ObservationalDataset,
    val: &ObservationalDataset,
    val_oracle: &OracleTable,
    alpha: f64,
    cfg: &TrainConfig,
    run_seed: u64,
) -> Result<(MultiHeadModel, TrainReport), TrainError> {
    let start = std::time::Instant::now();
    let d = train.x.ncols();
    let m = train.a_obs.ncols();
    let batch_size = if alpha != 0.0 {
        cfg.ipm_batch_size
    } else {
        cfg.batch_size
    };

    let mut model = MultiHeadModel::new(d, m, run_seed);
    let mut adam_e = AdamState::new(&model.extractor, cfg.lr);
    let mut adam_heads: Vec<AdamState> = model
        .heads
        .iter()
        .map(|h| AdamState::new(h, cfg.lr))
        .collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(run_seed.wrapping_mul(0x9e3779b9).wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut log = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, MultiHeadModel)> = None;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut sum_mse, mut sum_ipm, mut sum_l2) = (0.0, 0.0, 0.0);
        let mut rows = 0usize;
        for (batch_idx, chunk) in order.chunks(batch_size).enumerate() {
            let xb = take_rows(&train.x, chunk);
            let yb: Array1<f64> = chunk.iter().map(|&i| train.y[i]).collect();
            let (phi, cache_e) = forward(&model.extractor, &xb)?;
            let n = chunk.len() as f64;

            // Group batch rows by their factual action.
            let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for (pos, &i) in chunk.iter().enumerate() {
                groups
                    .entry(action_index(train.a_obs.row(i)))
                    .or_default()
                    .push(pos);
            }

            let mut dphi: Array2<f64> = Array2::zeros(phi.raw_dim());
            let mut batch_mse = 0.0;
            let mut batch_l2 = l2_penalty(&model.extractor, cfg.l2).0;
            let mut head_updates: Vec<(usize, NetworkParams)> = Vec::new();
            for (&head_idx, members) in &groups {
                let phi_g = take_rows(&phi, members);
                let (out, cache_h) = forward(&model.heads[head_idx], &phi_g)?;
                let dloss = Array2::from_shape_fn((members.len(), 1), |(r, _)| {
                    let err = out[[r, 0]] - yb[members[r]];
                    2.0 * err / n
                });
                for (r, &pos) in members.iter().enumerate() {
                    batch_mse += (out[[r, 0]] - yb[pos]).powi(2);
                }
                let (mut grads_h, dphi_g) = backward(&model.heads[head_idx], &cache_h, &dloss)?;
                for (r, &pos) in members.iter().enumerate() {
                    for c in 0..dphi.ncols() {
                        dphi[[pos, c]] += dphi_g[[r, c]];
                    }
                }
                let (l2_h, l2_grad_h) = l2_penalty(&model.heads[head_idx], cfg.l2);
                batch_l2 += l2_h;
                grads_h.axpy(1.0, &l2_grad_h);
                head_updates.push((head_idx, grads_h));
            }
            batch_mse /= n;
            if !batch_mse.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }

            // Pairwise representation balancing between co-present actions.
            let mut batch_ipm = 0.0;
            if alpha != 0.0 {
                let present: Vec<(&usize, &Vec<usize>)> =
                    groups.iter().filter(|(_, v)| v.len() >= 2).collect();
                let mut pair_count = 0usize;
                let mut pair_grads: Array2<f64> = Array2::zeros(phi.raw_dim());
                for i in 0..present.len() {
                    for j in i + 1..present.len() {
                        let (ma, mb) = (present[i].1, present[j].1);
                        let pa = take_rows(&phi, ma);
                        let pb = take_rows(&phi, mb);
                        let problem = TransportProblem::new(&pa, &pb)?;
                        if problem.epsilon <= 0.0 {
                            continue;
                        }
                        let res = sinkhorn_distance(&problem)?;
                        let (ga, gb) = sinkhorn_grad(&problem, &res.plan)?;
                        batch_ipm += res.distance;
                        for (r, &pos) in ma.iter().enumerate() {
                            for c in 0..pair_grads.ncols() {
                                pair_grads[[pos, c]] += ga[[r, c]];
                            }
                        }
                        for (r, &pos) in mb.iter().enumerate() {
                            for c in 0..pair_grads.ncols() {
                                pair_grads[[pos, c]] += gb[[r, c]];
                            }
                        }
                        pair_count += 1;
                    }
                }
                if pair_count > 0 {
                    batch_ipm /= pair_count as f64;
                    dphi.scaled_add(alpha / pair_count as f64, &pair_grads);
                }
            }

            let (mut grads_e, _) = backward(&model.extractor, &cache_e, &dphi)?;
            let (_, l2_grad_e) = l2_penalty(&model.extractor, cfg.l2);
            grads_e.axpy(1.0, &l2_grad_e);
            adam_step(&mut model.extractor, &grads_e, &mut adam_e)?;
            for (head_idx, grads_h) in head_updates {
                adam_step(&mut model.heads[head_idx], &grads_h, &mut adam_heads[head_idx])?;
            }

            let w = chunk.len() as f64;
            sum_mse += batch_mse * w;
            sum_ipm += batch_ipm * w;
            sum_l2 += batch_l2 * w;
            rows += chunk.len();
        }
        let n = rows as f64;
        let (mse, ipm, l2) = (sum_mse / n, sum_ipm / n, sum_l2 / n);
        let loss = mse + alpha * ipm + l2;
        let score = val_score(&model, val, val_oracle)?;
        log.push(EpochRecord {
            epoch,
            loss,
            xe: 0.0,
            mse,
            ipm,
            val_nmcg: score,
        });
        history.push(score);
        if best.as_ref().map_or(true, |(_, b, _)| score > *b) {
            best = Some((epoch, score, model.clone()));
        }
        let window = &history[cfg.min_epochs.min(history.len())..];
        if convergence_check(window, cfg.patience) {
            break;
        }
    }

    let (best_epoch, best_val, best_model) = best.expect("at least one epoch ran");
    Ok((
        best_model,
        TrainReport {
            epochs_run: log.len(),
            best_epoch,
            best_val_nmcg: best_val,
            selected_alpha: alpha,
            log,
            wall_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

/// CFRNet-style alpha selection for the multi-head baseline.
pub fn select_alpha_multihead(
    train: &ObservationalDataset,
    val: &ObservationalDataset,
    val_oracle: &OracleTable,
    cfg: &TrainConfig,
) -> Result<(MultiHeadModel, TrainReport), TrainError> {
    cfg.validate()?;
    let mut grid = cfg.alpha_grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best: Option<(MultiHeadModel, TrainReport)> = None;
    for &alpha in &grid {
        let (model, report) = train_multihead(train, val, val_oracle, alpha, cfg)?;
        let better = best
            .as_ref()
            .map_or(true, |(_, b)| report.best_val_nmcg > b.best_val_nmcg);
        if better {
            best = Some((model, report));
        }
    }
    Ok(best.expect("non-empty grid"))
}
