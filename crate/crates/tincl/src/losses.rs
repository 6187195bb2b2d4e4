//! Contrastive and supervised losses with analytic gradients.
//!
//! The contrastive loss is the InfoNCE form over augmentation pairs: the
//! positive for anchor i is its paired view, and the negatives are exactly
//! the paired views of the other batch items (not the symmetric two-sided
//! variant). Natural logs throughout.

use crate::error::{Error, Result};
use crate::netsim::PowerVector;
use crate::real::Real;

/// B anchor embeddings, B positive embeddings, and a temperature.
#[derive(Debug, Clone)]
pub struct ContrastiveBatch<'a, F: Real = f64> {
    pub anchors: &'a [Vec<F>],
    pub positives: &'a [Vec<F>],
    pub temperature: F,
}

impl<'a, F: Real> ContrastiveBatch<'a, F> {
    pub fn new(anchors: &'a [Vec<F>], positives: &'a [Vec<F>], temperature: F) -> Result<Self> {
        if anchors.len() != positives.len() {
            return Err(Error::Dimension(format!(
                "{} anchors vs {} positives",
                anchors.len(),
                positives.len()
            )));
        }
        if anchors.len() < 2 {
            return Err(Error::Config(
                "contrastive batch needs at least 2 items (no negatives otherwise)".into(),
            ));
        }
        let dim = anchors[0].len();
        if anchors
            .iter()
            .chain(positives.iter())
            .any(|e| e.len() != dim)
        {
            return Err(Error::Dimension(
                "embeddings in a batch must share one dimension".into(),
            ));
        }
        if !(temperature > F::zero()) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        Ok(ContrastiveBatch {
            anchors,
            positives,
            temperature,
        })
    }
}

/// Loss value plus gradients wrt every anchor and every positive embedding.
#[derive(Debug, Clone)]
pub struct ContrastiveResult<F: Real = f64> {
    pub loss: F,
    pub d_anchors: Vec<Vec<F>>,
    pub d_positives: Vec<Vec<F>>,
}

/// `(1/B) sum_i -ln( exp(s_ii/t) / sum_j exp(s_ij/t) )` with
/// `s_ij = anchor_i . positive_j`. Log-sum-exp is max-stabilized.
pub fn contrastive_loss<F: Real>(batch: &ContrastiveBatch<F>) -> Result<ContrastiveResult<F>> {
    let b = batch.anchors.len();
    let dim = batch.anchors[0].len();
    let inv_tau = F::one() / batch.temperature;
    let inv_b = F::one() / F::from_f64(b as f64);

    let mut loss = F::zero();
    let mut d_anchors = vec![vec![F::zero(); dim]; b];
    let mut d_positives = vec![vec![F::zero(); dim]; b];

    for i in 0..b {
        let logits: Vec<F> = (0..b)
            .map(|j| {
                batch.anchors[i]
                    .iter()
                    .zip(&batch.positives[j])
                    .map(|(a, p)| *a * *p)
                    .sum::<F>()
                    * inv_tau
            })
            .collect();
        let max = logits
            .iter()
            .copied()
            .fold(F::neg_infinity(), |m, v| m.max(v));
        let exps: Vec<F> = logits.iter().map(|z| (*z - max).exp()).collect();
        let total: F = exps.iter().copied().sum();
        loss += total.ln() + max - logits[i];

        // d loss_i / d s_ij = (softmax_ij - [i == j]) / B, all through 1/tau.
        for j in 0..b {
            let mut coeff = exps[j] / total;
            if j == i {
                coeff -= F::one();
            }
            let scale = coeff * inv_b * inv_tau;
            for k in 0..dim {
                d_anchors[i][k] += scale * batch.positives[j][k];
                d_positives[j][k] += scale * batch.anchors[i][k];
            }
        }
    }

    loss *= inv_b;
    if !loss.is_finite() {
        return Err(Error::NonFinite("contrastive loss".into()));
    }
    Ok(ContrastiveResult {
        loss,
        d_anchors,
        d_positives,
    })
}

/// Loss value plus gradients wrt every prediction.
#[derive(Debug, Clone)]
pub struct MseResult<F: Real = f64> {
    pub loss: F,
    pub d_preds: Vec<Vec<F>>,
}

/// Mean over the batch of squared l2 distances between prediction and target.
pub fn mse_loss<F: Real>(
    preds: &[PowerVector<F>],
    targets: &[PowerVector<F>],
) -> Result<MseResult<F>> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let inv_b = F::one() / F::from_f64(preds.len() as f64);
    let mut loss = F::zero();
    let mut d_preds = Vec::with_capacity(preds.len());
    for (p, t) in preds.iter().zip(targets) {
        if p.n() != t.n() {
            return Err(Error::Dimension(format!(
                "prediction length {} vs target length {}",
                p.n(),
                t.n()
            )));
        }
        let mut d = Vec::with_capacity(p.n());
        for (pi, ti) in p.gamma().iter().zip(t.gamma()) {
            let diff = *pi - *ti;
            loss += diff * diff * inv_b;
            d.push(F::two() * diff * inv_b);
        }
        d_preds.push(d);
    }
    Ok(MseResult { loss, d_preds })
}

/// `L_supervised + alpha * L_contrastive`; gradient sets are combined by the
/// caller with the same weights.
pub fn total_loss<F: Real>(supervised: F, contrastive: F, alpha: F) -> Result<F> {
    if alpha < F::zero() {
        return Err(Error::Config("alpha must be nonnegative".into()));
    }
    Ok(supervised + alpha * contrastive)
}
