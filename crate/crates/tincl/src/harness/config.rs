//! Run configuration and the `key = value` config file format.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::neuralnet::MlpSpec;
use crate::NetworkConfig;

/// Every knob of one end-to-end run. The config file and the CLI flags both
/// map one-to-one onto these fields (`network` and `mlp` are flattened into
/// their scalar parts).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub m_total: usize,
    pub m_labeled: usize,
    pub mlp: MlpSpec,
    pub batch_size: usize,
    pub lr_pretrain: f64,
    pub lr_finetune: f64,
    pub lr_supervised_only: f64,
    pub temperature: f64,
    pub alpha_contrastive: f64,
    pub epochs_pretrain: usize,
    pub epochs_train: usize,
    pub keep_prob: f64,
    pub seed: u64,
    pub eval_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let n = 8;
        RunConfig {
            network: NetworkConfig::new(n, 1.0).expect("valid default"),
            m_total: 1000,
            m_labeled: 50,
            mlp: MlpSpec::evaluation(n),
            batch_size: 64,
            lr_pretrain: 0.05,
            lr_finetune: 0.05,
            lr_supervised_only: 0.01,
            temperature: 0.1,
            alpha_contrastive: 1.0,
            epochs_pretrain: 20,
            epochs_train: 100,
            keep_prob: 0.5,
            seed: 1,
            eval_count: 1000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_labeled > self.m_total {
            return Err(Error::Config(format!(
                "m_labeled = {} exceeds m_total = {}",
                self.m_labeled, self.m_total
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be >= 2".into()));
        }
        if !(self.lr_pretrain > 0.0 && self.lr_finetune > 0.0 && self.lr_supervised_only > 0.0)
        {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if self.alpha_contrastive < 0.0 {
            return Err(Error::Config("alpha_contrastive must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.keep_prob) {
            return Err(Error::Config("keep_prob must lie in [0, 1]".into()));
        }
        if self.eval_count < 1 {
            return Err(Error::Config("eval_count must be >= 1".into()));
        }
        if self.mlp.input_dim != self.network.n() * self.network.n()
            || self.mlp.output_dim != self.network.n()
        {
            return Err(Error::Config(format!(
                "mlp dimensions ({} -> {}) do not match network size n = {}",
                self.mlp.input_dim,
                self.mlp.output_dim,
                self.network.n()
            )));
        }
        self.mlp.validate()
    }

    /// Apply one `key = value` setting. Keys are the flattened field names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("bad value {value:?} for {what}"));
        match key {
            "n" => {
                let n: usize = value.parse().map_err(|_| bad("n"))?;
                self.network = NetworkConfig::new(n, self.network.snr())?;
                self.mlp.input_dim = n * n;
                self.mlp.output_dim = n;
            }
            "snr" => {
                let snr: f64 = value.parse().map_err(|_| bad("snr"))?;
                self.network = NetworkConfig::new(self.network.n(), snr)?;
            }
            "m_total" => self.m_total = value.parse().map_err(|_| bad("m_total"))?,
            "m_labeled" => self.m_labeled = value.parse().map_err(|_| bad("m_labeled"))?,
            "hidden_dims" => {
                self.mlp.hidden_dims = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>().map_err(|_| bad("hidden_dims")))
                        .collect::<Result<_>>()?
                };
            }
            "embedding_dim" => {
                self.mlp.embedding_dim = value.parse().map_err(|_| bad("embedding_dim"))?
            }
            "leaky_slope" => {
                self.mlp.leaky_slope = value.parse().map_err(|_| bad("leaky_slope"))?
            }
            "normalize_embedding" => {
                self.mlp.normalize_embedding = parse_bool(value)
                    .ok_or_else(|| bad("normalize_embedding"))?
            }
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "lr_pretrain" => self.lr_pretrain = value.parse().map_err(|_| bad("lr_pretrain"))?,
            "lr_finetune" => self.lr_finetune = value.parse().map_err(|_| bad("lr_finetune"))?,
            "lr_supervised_only" => {
                self.lr_supervised_only =
                    value.parse().map_err(|_| bad("lr_supervised_only"))?
            }
            "temperature" => self.temperature = value.parse().map_err(|_| bad("temperature"))?,
            "alpha_contrastive" => {
                self.alpha_contrastive = value.parse().map_err(|_| bad("alpha_contrastive"))?
            }
            "epochs_pretrain" => {
                self.epochs_pretrain = value.parse().map_err(|_| bad("epochs_pretrain"))?
            }
            "epochs_train" => {
                self.epochs_train = value.parse().map_err(|_| bad("epochs_train"))?
            }
            "keep_prob" => self.keep_prob = value.parse().map_err(|_| bad("keep_prob"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "eval_count" => self.eval_count = value.parse().map_err(|_| bad("eval_count"))?,
            other => {
                return Err(Error::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Overlay settings from a UTF-8 `key = value` file. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(path, format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}
