use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tincl::harness::{
    evaluate, finetune, pretrain, sweep, test_dataset, train_supervised_only, write_embeddings,
    write_metrics, Policy, RunConfig, DEFAULT_M_LABELED_GRID,
};
use tincl::io::{read_checkpoint, read_dataset, write_checkpoint, write_dataset};
use tincl::netsim::generate_dataset;
use tincl::wmmse::{label_dataset, WmmseSettings};
use tincl::{Dataset, Error};

#[derive(Parser)]
#[command(
    name = "tincl",
    about = "Contrastive self-supervised power control for interference networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags mirroring the run-configuration fields. Values from `--config`
/// apply first; explicit flags override them.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// UTF-8 `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    m_total: Option<usize>,
    #[arg(long)]
    m_labeled: Option<usize>,
    /// Comma-separated hidden layer widths, e.g. 512,512.
    #[arg(long)]
    hidden_dims: Option<String>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    leaky_slope: Option<f64>,
    #[arg(long)]
    normalize_embedding: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_pretrain: Option<f64>,
    #[arg(long)]
    lr_finetune: Option<f64>,
    #[arg(long)]
    lr_supervised_only: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    alpha_contrastive: Option<f64>,
    #[arg(long)]
    epochs_pretrain: Option<usize>,
    #[arg(long)]
    epochs_train: Option<usize>,
    #[arg(long)]
    keep_prob: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eval_count: Option<usize>,
}

impl ConfigArgs {
    fn build(&self) -> tincl::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let mut set = |key: &str, value: Option<String>| -> tincl::Result<()> {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
            Ok(())
        };
        set("n", self.n.map(|v| v.to_string()))?;
        set("snr", self.snr.map(|v| v.to_string()))?;
        set("m_total", self.m_total.map(|v| v.to_string()))?;
        set("m_labeled", self.m_labeled.map(|v| v.to_string()))?;
        set("hidden_dims", self.hidden_dims.clone())?;
        set("embedding_dim", self.embedding_dim.map(|v| v.to_string()))?;
        set("leaky_slope", self.leaky_slope.map(|v| v.to_string()))?;
        set("normalize_embedding", self.normalize_embedding.clone())?;
        set("batch_size", self.batch_size.map(|v| v.to_string()))?;
        set("lr_pretrain", self.lr_pretrain.map(|v| v.to_string()))?;
        set("lr_finetune", self.lr_finetune.map(|v| v.to_string()))?;
        set(
            "lr_supervised_only",
            self.lr_supervised_only.map(|v| v.to_string()),
        )?;
        set("temperature", self.temperature.map(|v| v.to_string()))?;
        set(
            "alpha_contrastive",
            self.alpha_contrastive.map(|v| v.to_string()),
        )?;
        set(
            "epochs_pretrain",
            self.epochs_pretrain.map(|v| v.to_string()),
        )?;
        set("epochs_train", self.epochs_train.map(|v| v.to_string()))?;
        set("keep_prob", self.keep_prob.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("eval_count", self.eval_count.map(|v| v.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an unlabeled channel dataset file.
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add WMMSE labels to the first m_labeled samples of a dataset file.
    Label {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        /// Output path; defaults to rewriting the input file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Contrastive pre-training of the backbone; writes a checkpoint.
    Pretrain {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train via fine-tuning (ssl) or the supervised-only baseline.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = ["ssl", "sl_only"])]
        method: String,
        /// Pretrained checkpoint to start from (required for ssl).
        #[arg(long)]
        model_in: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a policy on a fresh test set; writes metrics CSV.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_parser = ["ssl", "sl_only", "full_reuse", "wmmse"])]
        method: String,
        /// Checkpoint to evaluate (required for ssl / sl_only).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "run")]
        run_id: String,
    },
    /// Export backbone embeddings with binarized WMMSE label bits.
    Embed {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full label-budget sweep; writes per-seed and aggregate metrics rows.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated seed list.
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        /// Comma-separated label budgets.
        #[arg(long)]
        m_labeled_grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Align the run config with the network parameters stored in a dataset
/// file; a dataset generated for a different n/snr is a config error unless
/// the flags agree.
fn adopt_dataset_config(cfg: &mut RunConfig, ds: &Dataset) -> tincl::Result<()> {
    if cfg.network != ds.config {
        cfg.set("n", &ds.config.n().to_string())?;
        cfg.set("snr", &tincl::io::fmt_f64(ds.config.snr()))?;
        cfg.validate()?;
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> tincl::Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad {what} entry {p:?}")))
        })
        .collect()
}

fn load_model(path: &Path, cfg: &RunConfig) -> tincl::Result<tincl::MlpModel> {
    let model = read_checkpoint(path)?;
    if model.spec.input_dim != cfg.mlp.input_dim || model.spec.output_dim != cfg.mlp.output_dim {
        return Err(Error::Config(format!(
            "checkpoint dimensions ({} -> {}) do not match configured network",
            model.spec.input_dim, model.spec.output_dim
        )));
    }
    Ok(model)
}

fn run(cli: Cli) -> tincl::Result<()> {
    match cli.cmd {
        Cmd::Gen { cfg, out } => {
            let cfg = cfg.build()?;
            let ds = generate_dataset(cfg.seed, cfg.m_total, &cfg.network);
            write_dataset(&ds, &out)?;
            eprintln!(
                "wrote {} samples (n={}, seed={}) to {}",
                ds.len(),
                cfg.network.n(),
                cfg.seed,
                out.display()
            );
        }
        Cmd::Label { cfg, dataset, out } => {
            let mut cfg = cfg.build()?;
            let ds = read_dataset(&dataset)?;
            adopt_dataset_config(&mut cfg, &ds)?;
            let labeled = label_dataset(&ds, cfg.m_labeled, &WmmseSettings::default())?;
            let out = out.unwrap_or(dataset);
            write_dataset(&labeled, &out)?;
            eprintln!(
                "labeled {} of {} samples in {}",
                labeled.labeled_count(),
                labeled.len(),
                out.display()
            );
        }
        Cmd::Pretrain { cfg, dataset, out } => {
            let mut cfg = cfg.build()?;
            let ds = read_dataset(&dataset)?;
            adopt_dataset_config(&mut cfg, &ds)?;
            let outcome = pretrain(&ds, &cfg)?;
            write_checkpoint(&outcome.model, &out)?;
            eprintln!(
                "pretrained {} epochs, final contrastive loss {:?}",
                cfg.epochs_pretrain,
                outcome.epoch_losses.last()
            );
        }
        Cmd::Train {
            cfg,
            dataset,
            method,
            model_in,
            out,
        } => {
            let mut cfg = cfg.build()?;
            let ds = read_dataset(&dataset)?;
            adopt_dataset_config(&mut cfg, &ds)?;
            let outcome = match method.as_str() {
                "ssl" => {
                    let path = model_in.ok_or_else(|| {
                        Error::Config("--method ssl requires --model-in".into())
                    })?;
                    let model = load_model(&path, &cfg)?;
                    finetune(&model, &ds, &cfg)?
                }
                _ => train_supervised_only(&ds, &cfg)?,
            };
            write_checkpoint(&outcome.model, &out)?;
            eprintln!(
                "trained {} epochs ({method}), final loss {:?}",
                cfg.epochs_train,
                outcome.epoch_losses.last()
            );
        }
        Cmd::Eval {
            cfg,
            method,
            model,
            out,
            run_id,
        } => {
            let cfg = cfg.build()?;
            let test = test_dataset(&cfg);
            let loaded;
            let policy = match method.as_str() {
                "full_reuse" => Policy::FullReuse,
                "wmmse" => Policy::Wmmse,
                _ => {
                    let path = model.ok_or_else(|| {
                        Error::Config(format!("--method {method} requires --model"))
                    })?;
                    loaded = load_model(&path, &cfg)?;
                    Policy::Model(&loaded)
                }
            };
            let row = evaluate(&policy, &test, &cfg, &run_id, &method)?;
            write_metrics(&[row], &out)?;
            eprintln!("wrote metrics to {}", out.display());
        }
        Cmd::Embed {
            cfg,
            dataset,
            model,
            out,
        } => {
            let mut cfg = cfg.build()?;
            let ds = read_dataset(&dataset)?;
            adopt_dataset_config(&mut cfg, &ds)?;
            let model = load_model(&model, &cfg)?;
            write_embeddings(&model, &ds, &out)?;
            eprintln!(
                "wrote {} embeddings to {}",
                ds.labeled_count(),
                out.display()
            );
        }
        Cmd::Sweep {
            cfg,
            seeds,
            m_labeled_grid,
            out,
        } => {
            let cfg = cfg.build()?;
            let seeds: Vec<u64> = parse_list(&seeds, "seed")?;
            let grid: Vec<usize> = match m_labeled_grid {
                Some(g) => parse_list(&g, "m_labeled_grid")?,
                None => DEFAULT_M_LABELED_GRID.to_vec(),
            };
            if seeds.is_empty() || grid.is_empty() {
                return Err(Error::Config("empty sweep grid".into()));
            }
            let rows = sweep(&cfg, &seeds, &grid)?;
            write_metrics(&rows, &out)?;
            eprintln!("wrote {} metrics rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonFinite(_) | Error::ZeroNormEmbedding => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
