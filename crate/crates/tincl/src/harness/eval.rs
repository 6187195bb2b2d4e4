//! Evaluation against the WMMSE oracle, metrics/embedding CSV output, and
//! the embedding cluster score.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::io::fmt_f64;
use crate::netsim::{full_reuse, generate_dataset, sum_rate};
use crate::rng::TEST_SEED_XOR;
use crate::wmmse::{binarize, wmmse, WmmseSettings};
use crate::{Dataset, MlpModel, PowerVector};

/// Power-control policy under evaluation.
pub enum Policy<'a> {
    Model(&'a MlpModel),
    FullReuse,
    Wmmse,
    AllZeros,
}

impl Policy<'_> {
    pub fn method_name(&self, model_method: &str) -> String {
        match self {
            Policy::Model(_) => model_method.to_string(),
            Policy::FullReuse => "full_reuse".to_string(),
            Policy::Wmmse => "wmmse".to_string(),
            Policy::AllZeros => "all_zeros".to_string(),
        }
    }
}

/// One metrics CSV row. `seed` is the seed number or the literal
/// `aggregate` for rows that average per-seed means.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: String,
    pub n: usize,
    pub m_labeled: usize,
    pub method: String,
    pub normalized_sum_rate_mean: f64,
    pub normalized_sum_rate_std: f64,
}

pub const METRICS_HEADER: &str =
    "run_id,seed,n,m_labeled,method,normalized_sum_rate_mean,normalized_sum_rate_std";

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.run_id,
            r.seed,
            r.n,
            r.m_labeled,
            r.method,
            fmt_f64(r.normalized_sum_rate_mean),
            fmt_f64(r.normalized_sum_rate_std)
        ));
    }
    out
}

pub fn write_metrics(rows: &[MetricsRow], path: &Path) -> Result<()> {
    fs::write(path, metrics_to_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Test set for a run: same channel statistics, seed displaced by a fixed
/// XOR constant so it is disjoint from every training stream.
pub fn test_dataset(cfg: &RunConfig) -> Dataset {
    generate_dataset(cfg.seed ^ TEST_SEED_XOR, cfg.eval_count, &cfg.network)
}

/// Mean and population standard deviation of
/// `sum_rate(policy(H)) / sum_rate(wmmse(H))` over the test set.
pub fn evaluate(
    policy: &Policy,
    test_ds: &Dataset,
    cfg: &RunConfig,
    run_id: &str,
    model_method: &str,
) -> Result<MetricsRow> {
    cfg.validate()?;
    let settings = WmmseSettings::default();
    let n = cfg.network.n();
    let mut ratios = Vec::with_capacity(test_ds.len());
    for i in 0..test_ds.len() {
        let h = test_ds.channel(i);
        let oracle = wmmse(h, &cfg.network, &settings)?;
        let oracle_sr = sum_rate(h, &oracle, &cfg.network)?;
        let gamma = match policy {
            Policy::Model(m) => m.forward(h)?.0,
            Policy::FullReuse => full_reuse(n),
            Policy::Wmmse => oracle.clone(),
            Policy::AllZeros => PowerVector::new(vec![0.0; n])?,
        };
        let sr = sum_rate(h, &gamma, &cfg.network)?;
        ratios.push(sr / oracle_sr);
    }
    let (mean, std) = mean_std(&ratios);
    Ok(MetricsRow {
        run_id: run_id.to_string(),
        seed: cfg.seed.to_string(),
        n,
        m_labeled: cfg.m_labeled,
        method: policy.method_name(model_method),
        normalized_sum_rate_mean: mean,
        normalized_sum_rate_std: std,
    })
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Combine per-seed rows for one (run_id, method, m_labeled) into an
/// `aggregate` row: mean and std are taken over the per-seed means.
pub fn aggregate_rows(rows: &[MetricsRow], run_id: &str) -> Vec<MetricsRow> {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    methods
        .iter()
        .map(|m| {
            let means: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == *m)
                .map(|r| r.normalized_sum_rate_mean)
                .collect();
            let template = rows.iter().find(|r| r.method == *m).expect("nonempty");
            let (mean, std) = mean_std(&means);
            MetricsRow {
                run_id: run_id.to_string(),
                seed: "aggregate".to_string(),
                n: template.n,
                m_labeled: template.m_labeled,
                method: m.to_string(),
                normalized_sum_rate_mean: mean,
                normalized_sum_rate_std: std,
            }
        })
        .collect()
}

pub const EMBEDDINGS_HEADER_PREFIX: &str = "sample_id,label_bits";

/// Embedding CSV: one row per sample with the binarized WMMSE label bits and
/// the backbone embedding coordinates. Every exported sample must be
/// labeled.
pub fn embeddings_to_csv(model: &MlpModel, ds: &Dataset) -> Result<String> {
    let l = model.spec.embedding_dim;
    let mut out = String::from(EMBEDDINGS_HEADER_PREFIX);
    for k in 1..=l {
        out.push_str(&format!(",e{k}"));
    }
    out.push('\n');
    if ds.labeled_count() == 0 {
        return Err(Error::Config(
            "embedding export needs at least one labeled sample".into(),
        ));
    }
    for i in 0..ds.labeled_count() {
        let label = ds.label(i).expect("labeled prefix");
        let bits: String = binarize(label).iter().map(|b| b.to_string()).collect();
        let cache = model.forward_backbone(ds.channel(i))?;
        out.push_str(&format!("{i},{bits}"));
        for e in cache.embedding() {
            out.push(',');
            out.push_str(&fmt_f64(*e));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_embeddings(model: &MlpModel, ds: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, embeddings_to_csv(model, ds)?).map_err(|e| Error::io(path, e))
}

/// Mean intra-label cosine similarity minus mean inter-label cosine
/// similarity, in [-2, 2]. Uses per-group sums of the normalized
/// embeddings, so it is O(samples * dim) rather than quadratic.
pub fn cluster_score(embeddings: &[Vec<f64>], labels: &[Vec<u8>]) -> Result<f64> {
    if embeddings.len() != labels.len() || embeddings.is_empty() {
        return Err(Error::Dimension(format!(
            "{} embeddings vs {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    let dim = embeddings[0].len();
    let normalized: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| {
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                e.clone()
            } else {
                e.iter().map(|x| x / norm).collect()
            }
        })
        .collect();

    let mut groups: Vec<(&Vec<u8>, Vec<f64>, usize, f64)> = Vec::new();
    for (e, label) in normalized.iter().zip(labels) {
        match groups.iter_mut().find(|(l, _, _, _)| *l == label) {
            Some((_, sum, count, sq)) => {
                for (s, x) in sum.iter_mut().zip(e) {
                    *s += x;
                }
                *count += 1;
                *sq += e.iter().map(|x| x * x).sum::<f64>();
            }
            None => {
                groups.push((label, e.clone(), 1, e.iter().map(|x| x * x).sum()));
            }
        }
    }
    if groups.len() < 2 {
        return Err(Error::Config(
            "cluster score needs at least two distinct labels".into(),
        ));
    }

    let m = normalized.len() as f64;
    let mut total_sum = vec![0.0; dim];
    for e in &normalized {
        for (t, x) in total_sum.iter_mut().zip(e) {
            *t += x;
        }
    }
    let total_sq: f64 = total_sum.iter().map(|x| x * x).sum();

    // sum over ordered pairs i != j within each group of e_i . e_j
    let mut intra_pairs = 0.0;
    let mut intra_sum = 0.0;
    let mut group_sq_total = 0.0;
    for (_, sum, count, sq) in &groups {
        let group_sq: f64 = sum.iter().map(|x| x * x).sum();
        intra_sum += group_sq - sq;
        intra_pairs += (*count as f64) * (*count as f64 - 1.0);
        group_sq_total += group_sq;
    }
    let inter_sum = total_sq - group_sq_total;
    let inter_pairs = m * m
        - groups
            .iter()
            .map(|(_, _, c, _)| (*c as f64) * (*c as f64))
            .sum::<f64>();
    if intra_pairs == 0.0 || inter_pairs == 0.0 {
        return Err(Error::Config(
            "cluster score needs both intra- and inter-label pairs".into(),
        ));
    }
    Ok(intra_sum / intra_pairs - inter_sum / inter_pairs)
}

/// Cluster score under random label permutations; returns (mean, std) of
/// the null distribution.
pub fn permutation_null(
    embeddings: &[Vec<f64>],
    labels: &[Vec<u8>],
    permutations: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let mut scores = Vec::with_capacity(permutations);
    let mut permuted: Vec<Vec<u8>> = labels.to_vec();
    for _ in 0..permutations {
        // Fisher-Yates
        for i in (1..permuted.len()).rev() {
            let j = rng.gen_range(0..=i);
            permuted.swap(i, j);
        }
        scores.push(cluster_score(embeddings, &permuted)?);
    }
    Ok(mean_std(&scores))
}
