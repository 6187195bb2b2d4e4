//! End-to-end acceptance checks. Each test prints a single
//! `criterion N: PASS` / `criterion N: FAIL` line.

use std::process::Command;

use rand::Rng;
use tincl::harness::{
    cluster_score, evaluate, finetune, permutation_null, pretrain, test_dataset,
    train_supervised_only, Policy, RunConfig,
};
use tincl::io::{checkpoint_to_string, dataset_to_string, read_checkpoint, read_dataset};
use tincl::losses::{contrastive_loss, mse_loss, ContrastiveBatch};
use tincl::netsim::{full_reuse, generate_dataset, sample_channel, sum_rate};
use tincl::neuralnet::{GradientSet, MlpSpec};
use tincl::rng::substream;
use tincl::tinaug::{augment, weak_link_mask};
use tincl::wmmse::{binarize, exhaustive_binary_oracle, label_dataset, wmmse_with_trace};
use tincl::{ChannelMatrix, MlpModel, NetworkConfig, PowerVector, WmmseSettings};

fn report(criterion: usize, pass: bool) {
    println!("criterion {criterion}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed");
}

// ---------------------------------------------------------------- criterion 1

const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-4;

fn grads_match(analytic: &[f64], numeric: &[f64]) -> bool {
    let ok = analytic.iter().zip(numeric).all(|(a, f)| {
        let scale = a.abs().max(f.abs()).max(1.0);
        (a - f).abs() <= FD_REL_TOL * scale
    });
    if !ok {
        let worst = analytic
            .iter()
            .zip(numeric)
            .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1.0))
            .fold(0.0f64, f64::max);
        eprintln!("grads_match: worst rel err {worst:.3e} ({analytic:?} vs {numeric:?})");
    }
    ok
}

fn numeric_param_grad(model: &MlpModel, loss: impl Fn(&MlpModel) -> f64) -> Vec<f64> {
    let base = model.flatten();
    let mut perturbed = model.clone();
    let mut grad = Vec::with_capacity(base.len());
    for k in 0..base.len() {
        let mut theta = base.clone();
        theta[k] = base[k] + FD_STEP;
        perturbed.set_from_flat(&theta).unwrap();
        let up = loss(&perturbed);
        theta[k] = base[k] - FD_STEP;
        perturbed.set_from_flat(&theta).unwrap();
        let down = loss(&perturbed);
        grad.push((up - down) / (2.0 * FD_STEP));
    }
    grad
}

#[test]
fn criterion_1_gradients_match_finite_differences() {
    let mut pass = true;
    for case in 0..20u64 {
        let mut rng = substream(1_000 + case, 0, 0);
        let n = rng.gen_range(2..=3usize);
        let depth = rng.gen_range(1..=2usize);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(3..=8)).collect();
        let spec = MlpSpec {
            input_dim: n * n,
            hidden_dims: hidden,
            embedding_dim: rng.gen_range(2..=4),
            output_dim: n,
            leaky_slope: 0.01,
            normalize_embedding: case % 2 == 0,
        };
        let model = MlpModel::init(&spec, case).unwrap();
        let config = NetworkConfig::new(n, 1.0).unwrap();

        // Supervised path: MSE through head and backbone.
        let x = sample_channel(&mut rng, &config);
        let target =
            PowerVector::new((0..n).map(|_| rng.gen_range(0.1..0.9)).collect()).unwrap();
        let (pred, cache) = model.forward(&x).unwrap();
        let mse = mse_loss(&[pred], &[target.clone()]).unwrap();
        let analytic = model.backward(&cache, &mse.d_preds[0]).unwrap().flatten();
        let numeric = numeric_param_grad(&model, |m| {
            let (p, _) = m.forward(&x).unwrap();
            mse_loss(&[p], &[target.clone()]).unwrap().loss
        });
        pass &= grads_match(&analytic, &numeric);

        // Contrastive path: InfoNCE through the backbone for both views.
        let views: Vec<(ChannelMatrix, ChannelMatrix)> = (0..3)
            .map(|_| (sample_channel(&mut rng, &config), sample_channel(&mut rng, &config)))
            .collect();
        let con_loss = |m: &MlpModel| -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>, GradientSet) {
            let caches_a: Vec<_> = views
                .iter()
                .map(|(a, _)| m.forward_backbone(a).unwrap())
                .collect();
            let caches_p: Vec<_> = views
                .iter()
                .map(|(_, p)| m.forward_backbone(p).unwrap())
                .collect();
            let anchors: Vec<Vec<f64>> =
                caches_a.iter().map(|c| c.embedding().to_vec()).collect();
            let positives: Vec<Vec<f64>> =
                caches_p.iter().map(|c| c.embedding().to_vec()).collect();
            // Temperature 1 keeps the loss curvature small enough for the
            // finite-difference step; unnormalized embeddings can be large.
            let batch = ContrastiveBatch::new(&anchors, &positives, 1.0).unwrap();
            let res = contrastive_loss(&batch).unwrap();
            let mut grad = GradientSet::zeros_like(m);
            for (cache, d) in caches_a.iter().zip(&res.d_anchors) {
                m.backbone_backward_into(cache, d, &mut grad).unwrap();
            }
            for (cache, d) in caches_p.iter().zip(&res.d_positives) {
                m.backbone_backward_into(cache, d, &mut grad).unwrap();
            }
            (res.loss, res.d_anchors, res.d_positives, grad)
        };
        let (_, _, _, analytic) = con_loss(&model);
        let numeric = numeric_param_grad(&model, |m| con_loss(m).0);
        pass &= grads_match(&analytic.flatten(), &numeric);

        // Embedding gradients of the contrastive loss, checked directly.
        let dim = 3;
        let b = 4;
        let anchors: Vec<Vec<f64>> = (0..b)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let positives: Vec<Vec<f64>> = (0..b)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let eval_loss = |a: &[Vec<f64>], p: &[Vec<f64>]| {
            contrastive_loss(&ContrastiveBatch::new(a, p, 0.1).unwrap())
                .unwrap()
                .loss
        };
        let res =
            contrastive_loss(&ContrastiveBatch::new(&anchors, &positives, 0.1).unwrap()).unwrap();
        for i in 0..b {
            for k in 0..dim {
                let mut up = anchors.clone();
                up[i][k] += FD_STEP;
                let mut down = anchors.clone();
                down[i][k] -= FD_STEP;
                let fd = (eval_loss(&up, &positives) - eval_loss(&down, &positives))
                    / (2.0 * FD_STEP);
                pass &= grads_match(&[res.d_anchors[i][k]], &[fd]);

                let mut up = positives.clone();
                up[i][k] += FD_STEP;
                let mut down = positives.clone();
                down[i][k] -= FD_STEP;
                let fd = (eval_loss(&anchors, &up) - eval_loss(&anchors, &down))
                    / (2.0 * FD_STEP);
                pass &= grads_match(&[res.d_positives[i][k]], &[fd]);
            }
        }
    }
    report(1, pass);
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_wmmse_monotone_and_beats_full_reuse() {
    let settings = WmmseSettings::default();
    let mut pass = true;
    for n in [3usize, 8] {
        let config = NetworkConfig::new(n, 1.0).unwrap();
        let ds = generate_dataset(2_000 + n as u64, 100, &config);
        for h in ds.channels() {
            let (_, trace) = wmmse_with_trace(h, &config, &settings).unwrap();
            pass &= trace.windows(2).all(|w| w[1] >= w[0] - 1e-9);
            let baseline = sum_rate(h, &full_reuse(n), &config).unwrap();
            pass &= *trace.last().unwrap() >= baseline - 1e-9;
        }
    }
    report(2, pass);
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_wmmse_near_binary_oracle() {
    let settings = WmmseSettings::default();
    let config = NetworkConfig::new(3, 1.0).unwrap();
    let ds = generate_dataset(3_000, 200, &config);
    let mut ratio_sum = 0.0;
    for h in ds.channels() {
        let gamma = tincl::wmmse::wmmse(h, &config, &settings).unwrap();
        let sr = sum_rate(h, &gamma, &config).unwrap();
        let (_, best) = exhaustive_binary_oracle(h, &config).unwrap();
        ratio_sum += sr / best;
    }
    let mean = ratio_sum / 200.0;
    report(3, mean >= 0.95);
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_contrastive_loss_anchors() {
    let b = 64;
    let same = vec![vec![0.6, 0.8]; b];
    let res = contrastive_loss(&ContrastiveBatch::new(&same, &same, 0.1).unwrap()).unwrap();
    let mut pass = (res.loss - (b as f64).ln()).abs() <= 1e-9;

    // One-hot anchors against +/-1 positives: s_ii = 1, s_ij = -1 for i != j.
    let anchors: Vec<Vec<f64>> = (0..b)
        .map(|i| (0..b).map(|k| if k == i { 1.0 } else { 0.0 }).collect())
        .collect();
    let positives: Vec<Vec<f64>> = (0..b)
        .map(|j| (0..b).map(|k| if k == j { 1.0 } else { -1.0 }).collect())
        .collect();
    let res =
        contrastive_loss(&ContrastiveBatch::new(&anchors, &positives, 0.1).unwrap()).unwrap();
    pass &= res.loss <= 1e-6;
    report(4, pass);
}

// ---------------------------------------------------------------- criterion 5

fn labeled_embeddings(model: &MlpModel, ds: &tincl::Dataset) -> (Vec<Vec<f64>>, Vec<Vec<u8>>) {
    let m = ds.labeled_count();
    let mut embeddings = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        embeddings.push(model.forward_backbone(ds.channel(i)).unwrap().embedding().to_vec());
        labels.push(binarize(ds.label(i).unwrap()));
    }
    (embeddings, labels)
}

#[test]
fn criterion_5_pretraining_clusters_embeddings() {
    let mut cfg = RunConfig::default();
    cfg.set("n", "3").unwrap();
    cfg.mlp = MlpSpec::demo(3);
    cfg.m_total = 10_000;
    cfg.m_labeled = 500;
    cfg.validate().unwrap();

    let mut pass = true;
    for seed in [1u64, 2, 3] {
        cfg.seed = seed;
        let ds = generate_dataset(seed, cfg.m_total, &cfg.network);
        let ds = label_dataset(&ds, cfg.m_labeled, &WmmseSettings::default()).unwrap();

        let init = MlpModel::init(&cfg.mlp, seed).unwrap();
        let (emb_before, labels) = labeled_embeddings(&init, &ds);
        let before = cluster_score(&emb_before, &labels).unwrap();

        let trained = pretrain(&ds, &cfg).unwrap().model;
        let (emb_after, _) = labeled_embeddings(&trained, &ds);
        let after = cluster_score(&emb_after, &labels).unwrap();

        let mut null_rng = substream(seed, 0, 5);
        let (null_mean, null_std) =
            permutation_null(&emb_after, &labels, 200, &mut null_rng).unwrap();
        println!(
            "  seed {seed}: before {before:.4} after {after:.4} null {null_mean:.4} +- {null_std:.4}"
        );
        pass &= after > before;
        pass &= after >= null_mean + 5.0 * null_std;
    }
    report(5, pass);
}

// ---------------------------------------------------------------- criterion 6

/// Mean normalized sum-rate of full reuse on the seeded n=8 test sets,
/// computed via `evaluate` and pinned; see the matching regression assert.
const FULL_REUSE_PINNED: [(u64, f64); 3] = [
    (1, 5.4358606506860307e-1),
    (2, 5.4873797944752623e-1),
    (3, 5.4387467043996007e-1),
];

#[test]
fn criterion_6_ssl_beats_baselines_in_low_label_regime() {
    let base = RunConfig::default(); // n=8, M=1000, hidden [512,512], alpha=1
    let settings = WmmseSettings::default();
    let mut pass = true;

    let mut ssl50 = Vec::new();
    let mut sl50 = Vec::new();
    let mut ssl800 = Vec::new();
    let mut reuse = Vec::new();
    for (k, seed) in [1u64, 2, 3].into_iter().enumerate() {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let ds = generate_dataset(seed, cfg.m_total, &cfg.network);
        let pre = pretrain(&ds, &cfg).unwrap().model;
        let test = test_dataset(&cfg);

        let reuse_row = evaluate(&Policy::FullReuse, &test, &cfg, "c6", "").unwrap();
        println!(
            "  seed {seed}: full_reuse {}",
            tincl::io::fmt_f64(reuse_row.normalized_sum_rate_mean)
        );
        let (pin_seed, pinned) = FULL_REUSE_PINNED[k];
        pass &= pin_seed == seed && (reuse_row.normalized_sum_rate_mean - pinned).abs() <= 1e-12;
        reuse.push(reuse_row.normalized_sum_rate_mean);

        for m in [50usize, 800] {
            cfg.m_labeled = m;
            let labeled = label_dataset(&ds, m, &settings).unwrap();
            let ssl = finetune(&pre, &labeled, &cfg).unwrap().model;
            let row = evaluate(&Policy::Model(&ssl), &test, &cfg, "c6", "ssl").unwrap();
            println!("  seed {seed}: ssl m={m} {:.6}", row.normalized_sum_rate_mean);
            if m == 50 {
                let sl = train_supervised_only(&labeled, &cfg).unwrap().model;
                let sl_row = evaluate(&Policy::Model(&sl), &test, &cfg, "c6", "sl_only").unwrap();
                println!("  seed {seed}: sl_only m={m} {:.6}", sl_row.normalized_sum_rate_mean);
                ssl50.push(row.normalized_sum_rate_mean);
                sl50.push(sl_row.normalized_sum_rate_mean);
            } else {
                ssl800.push(row.normalized_sum_rate_mean);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "  means: ssl50 {:.6} sl50 {:.6} ssl800 {:.6} full_reuse {:.6}",
        mean(&ssl50),
        mean(&sl50),
        mean(&ssl800),
        mean(&reuse)
    );
    pass &= mean(&ssl50) >= mean(&sl50);
    pass &= mean(&ssl800) > mean(&reuse);
    report(6, pass);
}

// ---------------------------------------------------------------- criterion 7

fn run_cli(dir: &std::path::Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_tincl"))
        .current_dir(dir)
        .args(args)
        .status()
        .unwrap();
    assert!(status.success(), "tincl {args:?} failed");
}

fn pipeline(dir: &std::path::Path) {
    let cfg = [
        "--n", "3", "--m-total", "60", "--m-labeled", "12", "--hidden-dims", "16",
        "--embedding-dim", "2", "--batch-size", "8", "--epochs-pretrain", "2",
        "--epochs-train", "2", "--eval-count", "20", "--seed", "9",
    ];
    let with = |extra: &[&'static str]| -> Vec<&'static str> {
        let mut v = extra.to_vec();
        v.extend_from_slice(&cfg);
        v
    };
    run_cli(dir, &with(&["gen", "--out", "ds.txt"]));
    run_cli(dir, &with(&["label", "--dataset", "ds.txt"]));
    run_cli(dir, &with(&["pretrain", "--dataset", "ds.txt", "--out", "pre.ckpt"]));
    run_cli(
        dir,
        &with(&[
            "train", "--dataset", "ds.txt", "--method", "ssl", "--model-in", "pre.ckpt",
            "--out", "ssl.ckpt",
        ]),
    );
    run_cli(
        dir,
        &with(&["train", "--dataset", "ds.txt", "--method", "sl_only", "--out", "sl.ckpt"]),
    );
    run_cli(
        dir,
        &with(&[
            "eval", "--method", "ssl", "--model", "ssl.ckpt", "--out", "metrics.csv",
            "--run-id", "det",
        ]),
    );
    run_cli(
        dir,
        &with(&["embed", "--dataset", "ds.txt", "--model", "ssl.ckpt", "--out", "emb.csv"]),
    );
}

#[test]
fn criterion_7_cli_runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let mut pass = true;
    for name in ["ds.txt", "pre.ckpt", "ssl.ckpt", "sl.ckpt", "metrics.csv", "emb.csv"] {
        let left = std::fs::read(a.path().join(name)).unwrap();
        let right = std::fs::read(b.path().join(name)).unwrap();
        pass &= left == right;
    }
    report(7, pass);
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_augmentation_invariants() {
    let mut rng = substream(8_000, 0, 0);
    let mut kept = 0u64;
    let mut masked = 0u64;
    let mut pass = true;
    for _ in 0..10_000 {
        let n = rng.gen_range(2..=6usize);
        let snr = *[0.5, 1.0, 10.0].get(rng.gen_range(0..3)).unwrap();
        let config = NetworkConfig::new(n, snr).unwrap();
        let h = sample_channel(&mut rng, &config);
        let mask = weak_link_mask(&h, &config);
        let aug = augment(&h, &mask, &mut rng, 0.5).unwrap();
        for rx in 0..n {
            for tx in 0..n {
                let original = h.gain(rx, tx);
                let value = aug.gain(rx, tx);
                if rx == tx || !mask.is_weak(rx, tx) {
                    pass &= value == original;
                } else {
                    pass &= value == original || value == 0.0;
                    masked += 1;
                    if value == original {
                        kept += 1;
                    }
                }
            }
        }
    }
    let freq = kept as f64 / masked as f64;
    println!("  keep frequency {freq:.4} over {masked} weak links");
    pass &= (freq - 0.5).abs() <= 0.02;
    report(8, pass);
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_file_round_trips_are_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let config = NetworkConfig::new(4, 2.5).unwrap();
    let ds = generate_dataset(42, 25, &config);
    let ds = label_dataset(&ds, 7, &WmmseSettings::default()).unwrap();
    let ds_path = dir.path().join("ds.txt");
    tincl::io::write_dataset(&ds, &ds_path).unwrap();
    let reread = read_dataset(&ds_path).unwrap();
    let mut pass = dataset_to_string(&ds) == dataset_to_string(&reread);

    let spec = MlpSpec {
        input_dim: 16,
        hidden_dims: vec![5, 3],
        embedding_dim: 2,
        output_dim: 4,
        leaky_slope: 0.01,
        normalize_embedding: true,
    };
    let model = MlpModel::init(&spec, 42).unwrap();
    let ckpt_path = dir.path().join("model.ckpt");
    tincl::io::write_checkpoint(&model, &ckpt_path).unwrap();
    let reread = read_checkpoint(&ckpt_path).unwrap();
    pass &= checkpoint_to_string(&model) == checkpoint_to_string(&reread);
    report(9, pass);
}
