//! Training loops: contrastive pre-training, semi-supervised fine-tuning,
//! and the supervised-only baseline.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::losses::{contrastive_loss, mse_loss, total_loss, ContrastiveBatch};
use crate::neuralnet::{ForwardCache, GradientSet};
use crate::rng::{substream, tag};
use crate::tinaug::make_pair;
use crate::{Dataset, MlpModel, PowerVector};

/// Trained model plus the per-epoch mean loss trace.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub epoch_losses: Vec<f64>,
}

fn shuffled(indices: &mut Vec<usize>, rng: &mut ChaCha8Rng) {
    indices.shuffle(rng);
}

/// Forward both augmented views of every sample in `batch`, compute the
/// contrastive loss, and accumulate backbone gradients scaled by `weight`.
/// Returns the (unweighted) loss value.
fn contrastive_batch_pass(
    model: &MlpModel,
    ds: &Dataset,
    batch: &[usize],
    cfg: &RunConfig,
    aug_rng: &mut ChaCha8Rng,
    weight: f64,
    grads: &mut GradientSet,
) -> Result<f64> {
    let mut anchors = Vec::with_capacity(batch.len());
    let mut positives = Vec::with_capacity(batch.len());
    let mut caches_a: Vec<ForwardCache> = Vec::with_capacity(batch.len());
    let mut caches_p: Vec<ForwardCache> = Vec::with_capacity(batch.len());
    for &idx in batch {
        let (view_a, view_b) = make_pair(ds.channel(idx), &ds.config, aug_rng, cfg.keep_prob)?;
        let cache_a = model.forward_backbone(&view_a)?;
        let cache_b = model.forward_backbone(&view_b)?;
        anchors.push(cache_a.embedding().to_vec());
        positives.push(cache_b.embedding().to_vec());
        caches_a.push(cache_a);
        caches_p.push(cache_b);
    }
    let result = contrastive_loss(&ContrastiveBatch::new(
        &anchors,
        &positives,
        cfg.temperature,
    )?)?;
    for i in 0..batch.len() {
        let da: Vec<f64> = result.d_anchors[i].iter().map(|g| g * weight).collect();
        let dp: Vec<f64> = result.d_positives[i].iter().map(|g| g * weight).collect();
        model.backbone_backward_into(&caches_a[i], &da, grads)?;
        model.backbone_backward_into(&caches_p[i], &dp, grads)?;
    }
    Ok(result.loss)
}

/// MSE pass over a labeled batch; accumulates gradients for the whole
/// network and returns the loss.
fn supervised_batch_pass(
    model: &MlpModel,
    ds: &Dataset,
    batch: &[usize],
    grads: &mut GradientSet,
) -> Result<f64> {
    let mut preds: Vec<PowerVector> = Vec::with_capacity(batch.len());
    let mut targets: Vec<PowerVector> = Vec::with_capacity(batch.len());
    let mut caches: Vec<ForwardCache> = Vec::with_capacity(batch.len());
    for &idx in batch {
        let target = ds
            .label(idx)
            .ok_or_else(|| Error::Config(format!("sample {idx} has no label")))?;
        let (pred, cache) = model.forward(ds.channel(idx))?;
        preds.push(pred);
        targets.push(target.clone());
        caches.push(cache);
    }
    let result = mse_loss(&preds, &targets)?;
    for (cache, d_pred) in caches.iter().zip(&result.d_preds) {
        let g = model.backward(cache, d_pred)?;
        grads.add_assign(&g);
    }
    Ok(result.loss)
}

/// Split a shuffled index list into training batches. A trailing batch
/// smaller than `min_size` is dropped.
fn batches(order: &[usize], batch_size: usize, min_size: usize) -> Vec<Vec<usize>> {
    order
        .chunks(batch_size)
        .filter(|c| c.len() >= min_size)
        .map(|c| c.to_vec())
        .collect()
}

/// Contrastive pre-training of the backbone over all samples, labeled or
/// not. The head is never updated here.
pub fn pretrain(ds: &Dataset, cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::Config("cannot pretrain on an empty dataset".into()));
    }
    let mut model = MlpModel::init(&cfg.mlp, cfg.seed)?;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs_pretrain);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for epoch in 0..cfg.epochs_pretrain {
        let mut shuffle_rng = substream(cfg.seed, tag::SHUFFLE, epoch as u64);
        shuffled(&mut order, &mut shuffle_rng);
        let mut aug_rng = substream(cfg.seed, tag::AUGMENT, epoch as u64);
        let mut loss_sum = 0.0;
        let mut batch_count = 0usize;
        for batch in batches(&order, cfg.batch_size, 2) {
            let mut grads = GradientSet::zeros_like(&model);
            let loss =
                contrastive_batch_pass(&model, ds, &batch, cfg, &mut aug_rng, 1.0, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("pretraining loss".into()));
            }
            model.sgd_step(&grads, cfg.lr_pretrain)?;
            loss_sum += loss;
            batch_count += 1;
        }
        if batch_count > 0 {
            epoch_losses.push(loss_sum / batch_count as f64);
        }
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

/// Kind of batch in the fine-tuning schedule.
enum Slot {
    Labeled(Vec<usize>),
    Unlabeled(Vec<usize>),
}

/// Merge labeled and unlabeled batch lists by proportional alternation:
/// batch k of a pool with B batches sits at fractional position (k+0.5)/B,
/// and the merged order sorts by position with labeled winning ties.
fn interleave(labeled: Vec<Vec<usize>>, unlabeled: Vec<Vec<usize>>) -> Vec<Slot> {
    let nl = labeled.len();
    let nu = unlabeled.len();
    let mut slots = Vec::with_capacity(nl + nu);
    let mut il = 0usize;
    let mut iu = 0usize;
    let mut labeled = labeled.into_iter();
    let mut unlabeled = unlabeled.into_iter();
    while il < nl || iu < nu {
        let take_labeled = if il >= nl {
            false
        } else if iu >= nu {
            true
        } else {
            // (il + 0.5)/nl <= (iu + 0.5)/nu, in integers.
            (2 * il + 1) * nu <= (2 * iu + 1) * nl
        };
        if take_labeled {
            slots.push(Slot::Labeled(labeled.next().expect("counted")));
            il += 1;
        } else {
            slots.push(Slot::Unlabeled(unlabeled.next().expect("counted")));
            iu += 1;
        }
    }
    slots
}

/// Fine-tune backbone and head. Labeled batches minimize
/// `MSE + alpha * contrastive`; unlabeled batches minimize the contrastive
/// loss alone.
pub fn finetune(model: &MlpModel, ds: &Dataset, cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let m_labeled = ds.labeled_count();
    if m_labeled < 1 {
        return Err(Error::Config(
            "fine-tuning requires at least one labeled sample".into(),
        ));
    }
    let mut model = model.clone();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs_train);
    let mut order_l: Vec<usize> = (0..m_labeled).collect();
    let mut order_u: Vec<usize> = (m_labeled..ds.len()).collect();
    for epoch in 0..cfg.epochs_train {
        let mut rng_l = substream(cfg.seed, tag::SHUFFLE_LABELED, epoch as u64);
        let mut rng_u = substream(cfg.seed, tag::SHUFFLE_UNLABELED, epoch as u64);
        shuffled(&mut order_l, &mut rng_l);
        shuffled(&mut order_u, &mut rng_u);
        let mut aug_rng = substream(cfg.seed, tag::AUGMENT_FINETUNE, epoch as u64);
        let batches_l = batches(&order_l, cfg.batch_size, 2);
        let batches_u = batches(&order_u, cfg.batch_size, 2);
        let mut loss_sum = 0.0;
        let mut batch_count = 0usize;
        for slot in interleave(batches_l, batches_u) {
            let mut grads = GradientSet::zeros_like(&model);
            let loss = match slot {
                Slot::Labeled(batch) => {
                    let sup = supervised_batch_pass(&model, ds, &batch, &mut grads)?;
                    let con = contrastive_batch_pass(
                        &model,
                        ds,
                        &batch,
                        cfg,
                        &mut aug_rng,
                        cfg.alpha_contrastive,
                        &mut grads,
                    )?;
                    total_loss(sup, con, cfg.alpha_contrastive)?
                }
                Slot::Unlabeled(batch) => contrastive_batch_pass(
                    &model,
                    ds,
                    &batch,
                    cfg,
                    &mut aug_rng,
                    1.0,
                    &mut grads,
                )?,
            };
            if !loss.is_finite() {
                return Err(Error::NonFinite("fine-tuning loss".into()));
            }
            model.sgd_step(&grads, cfg.lr_finetune)?;
            loss_sum += loss;
            batch_count += 1;
        }
        if batch_count > 0 {
            epoch_losses.push(loss_sum / batch_count as f64);
        }
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

/// Supervised baseline: fresh init, MSE on the labeled prefix only, at the
/// (lower) supervised-only learning rate.
pub fn train_supervised_only(ds: &Dataset, cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let m_labeled = ds.labeled_count();
    if m_labeled < 1 {
        return Err(Error::Config(
            "supervised training requires at least one labeled sample".into(),
        ));
    }
    let mut model = MlpModel::init(&cfg.mlp, cfg.seed)?;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs_train);
    let mut order: Vec<usize> = (0..m_labeled).collect();
    for epoch in 0..cfg.epochs_train {
        let mut shuffle_rng = substream(cfg.seed, tag::SHUFFLE_LABELED, epoch as u64);
        shuffled(&mut order, &mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut batch_count = 0usize;
        for batch in batches(&order, cfg.batch_size, 1) {
            let mut grads = GradientSet::zeros_like(&model);
            let loss = supervised_batch_pass(&model, ds, &batch, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("supervised loss".into()));
            }
            model.sgd_step(&grads, cfg.lr_supervised_only)?;
            loss_sum += loss;
            batch_count += 1;
        }
        if batch_count > 0 {
            epoch_losses.push(loss_sum / batch_count as f64);
        }
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}
