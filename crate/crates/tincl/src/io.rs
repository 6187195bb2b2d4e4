//! Text file formats: datasets, model checkpoints, and the float encoding
//! they share.
//!
//! Floats are written with 17 significant decimal digits, enough for exact
//! f64 round-trips, and the writers are deterministic, so write -> read ->
//! write is byte-identical.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::netsim::{ChannelMatrix, Dataset, NetworkConfig, PowerVector};
use crate::neuralnet::{MlpModel, MlpSpec};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, format!("bad float {s:?}")))
}

fn parse_usize(path: &Path, s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(path, format!("bad integer {s:?}")))
}

fn header_field<'a>(path: &Path, token: Option<&'a str>, key: &str) -> Result<&'a str> {
    let token = token.ok_or_else(|| Error::parse(path, format!("missing field {key}=")))?;
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::parse(path, format!("expected {key}=..., got {token:?}")))
}

pub fn dataset_to_string(ds: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "TINCL v1 n={} snr={} count={} labeled={} seed={}\n",
        ds.config.n(),
        fmt_f64(ds.config.snr()),
        ds.len(),
        ds.labeled_count(),
        ds.seed
    ));
    for i in 0..ds.len() {
        let gains: Vec<String> = ds.channel(i).gains().iter().map(|g| fmt_f64(*g)).collect();
        out.push_str(&gains.join(","));
        if let Some(label) = ds.label(i) {
            let gamma: Vec<String> = label.gamma().iter().map(|g| fmt_f64(*g)).collect();
            out.push_str(" | ");
            out.push_str(&gamma.join(","));
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, dataset_to_string(ds)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty file"))?;
    let mut tokens = header.split_whitespace();
    match (tokens.next(), tokens.next()) {
        (Some("TINCL"), Some("v1")) => {}
        _ => return Err(Error::parse(path, "expected header `TINCL v1 ...`")),
    }
    let n = parse_usize(path, header_field(path, tokens.next(), "n")?)?;
    let snr = parse_f64(path, header_field(path, tokens.next(), "snr")?)?;
    let count = parse_usize(path, header_field(path, tokens.next(), "count")?)?;
    let labeled = parse_usize(path, header_field(path, tokens.next(), "labeled")?)?;
    let seed = header_field(path, tokens.next(), "seed")?
        .parse::<u64>()
        .map_err(|_| Error::parse(path, "bad seed"))?;
    let config = NetworkConfig::new(n, snr)
        .map_err(|e| Error::parse(path, format!("bad header config: {e}")))?;

    let mut channels = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(labeled);
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (gains_part, label_part) = match line.split_once(" | ") {
            Some((g, l)) => (g, Some(l)),
            None => (line, None),
        };
        let gains = gains_part
            .split(',')
            .map(|s| parse_f64(path, s))
            .collect::<Result<Vec<f64>>>()?;
        let channel = ChannelMatrix::from_gains(n, gains)
            .map_err(|e| Error::parse(path, format!("sample {lineno}: {e}")))?;
        channels.push(channel);
        match label_part {
            Some(l) => {
                if labels.len() != channels.len() - 1 {
                    return Err(Error::parse(
                        path,
                        format!("labeled sample {lineno} after an unlabeled one"),
                    ));
                }
                let gamma = l
                    .split(',')
                    .map(|s| parse_f64(path, s))
                    .collect::<Result<Vec<f64>>>()?;
                let pv = PowerVector::new(gamma)
                    .map_err(|e| Error::parse(path, format!("label {lineno}: {e}")))?;
                labels.push(pv);
            }
            None => {}
        }
    }
    if channels.len() != count {
        return Err(Error::parse(
            path,
            format!("header says count={count}, found {}", channels.len()),
        ));
    }
    if labels.len() != labeled {
        return Err(Error::parse(
            path,
            format!("header says labeled={labeled}, found {}", labels.len()),
        ));
    }
    Dataset::new(config, seed, channels, labels)
        .map_err(|e| Error::parse(path, format!("invalid dataset: {e}")))
}

pub fn checkpoint_to_string(model: &MlpModel) -> String {
    let spec = &model.spec;
    let hidden = spec
        .hidden_dims
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let mut out = format!(
        "TINCL-MLP v1 input={} hidden={} l={} output={} slope={} normalize={}\n",
        spec.input_dim,
        hidden,
        spec.embedding_dim,
        spec.output_dim,
        fmt_f64(spec.leaky_slope),
        if spec.normalize_embedding { 1 } else { 0 }
    );
    for p in model.flatten() {
        out.push_str(&fmt_f64(p));
        out.push('\n');
    }
    out
}

pub fn write_checkpoint(model: &MlpModel, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<MlpModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty file"))?;
    let mut tokens = header.split_whitespace();
    match (tokens.next(), tokens.next()) {
        (Some("TINCL-MLP"), Some("v1")) => {}
        _ => return Err(Error::parse(path, "expected header `TINCL-MLP v1 ...`")),
    }
    let input_dim = parse_usize(path, header_field(path, tokens.next(), "input")?)?;
    let hidden_str = header_field(path, tokens.next(), "hidden")?;
    let hidden_dims = if hidden_str.is_empty() {
        Vec::new()
    } else {
        hidden_str
            .split(',')
            .map(|s| parse_usize(path, s))
            .collect::<Result<Vec<usize>>>()?
    };
    let embedding_dim = parse_usize(path, header_field(path, tokens.next(), "l")?)?;
    let output_dim = parse_usize(path, header_field(path, tokens.next(), "output")?)?;
    let leaky_slope = parse_f64(path, header_field(path, tokens.next(), "slope")?)?;
    let normalize = match header_field(path, tokens.next(), "normalize")? {
        "1" => true,
        "0" => false,
        other => return Err(Error::parse(path, format!("bad normalize flag {other:?}"))),
    };
    let spec = MlpSpec {
        input_dim,
        hidden_dims,
        embedding_dim,
        output_dim,
        leaky_slope,
        normalize_embedding: normalize,
    };
    let mut model = MlpModel::init(&spec, 0)
        .map_err(|e| Error::parse(path, format!("invalid spec: {e}")))?;
    let params = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse_f64(path, l))
        .collect::<Result<Vec<f64>>>()?;
    model
        .set_from_flat(&params)
        .map_err(|e| Error::parse(path, format!("{e}")))?;
    Ok(model)
}
