//! N-pair Gaussian interference network: channel generation, Shannon rates,
//! and baseline power policies.
//!
//! Channel gains are stored as squared magnitudes `|h_ij|^2` with the row
//! index naming the receiver and the column index the transmitter. Fading
//! coefficients are CN(0,1), so each stored gain is Exponential(mean 1).

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{self, tag};

/// Network size and the single dimensionless ratio `P_max / sigma^2` shared
/// by the rate formula and the TIN condition. Absolute powers never appear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig<F: Real = f64> {
    n: usize,
    snr: F,
}

impl<F: Real> NetworkConfig<F> {
    pub fn new(n: usize, snr: F) -> Result<Self> {
        if n < 1 {
            return Err(Error::Config("network size n must be >= 1".into()));
        }
        if !(snr > F::zero()) || !snr.is_finite() {
            return Err(Error::Config(format!(
                "snr must be positive and finite, got {snr}"
            )));
        }
        Ok(NetworkConfig { n, snr })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn snr(&self) -> F {
        self.snr
    }
}

/// Row-major n x n matrix of squared channel magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix<F: Real = f64> {
    n: usize,
    gains: Vec<F>,
}

impl<F: Real> ChannelMatrix<F> {
    pub fn from_gains(n: usize, gains: Vec<F>) -> Result<Self> {
        if gains.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} gains for n={}, got {}",
                n * n,
                n,
                gains.len()
            )));
        }
        if gains.iter().any(|g| !g.is_finite() || *g < F::zero()) {
            return Err(Error::Config(
                "channel gains must be finite and nonnegative".into(),
            ));
        }
        Ok(ChannelMatrix { n, gains })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Gain from transmitter `tx` at receiver `rx`.
    pub fn gain(&self, rx: usize, tx: usize) -> F {
        self.gains[rx * self.n + tx]
    }

    pub fn gains(&self) -> &[F] {
        &self.gains
    }

    pub(crate) fn set_gain(&mut self, rx: usize, tx: usize, value: F) {
        self.gains[rx * self.n + tx] = value;
    }
}

/// Per-transmitter fraction of maximum power, each entry in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector<F: Real = f64> {
    gamma: Vec<F>,
}

impl<F: Real> PowerVector<F> {
    pub fn new(gamma: Vec<F>) -> Result<Self> {
        if gamma
            .iter()
            .any(|g| !g.is_finite() || *g < F::zero() || *g > F::one())
        {
            return Err(Error::Config(
                "power fractions must lie in [0, 1]".into(),
            ));
        }
        Ok(PowerVector { gamma })
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[F] {
        &self.gamma
    }
}

/// All transmitters at full power.
pub fn full_reuse<F: Real>(n: usize) -> PowerVector<F> {
    PowerVector {
        gamma: vec![F::one(); n],
    }
}

/// Per-link Shannon rates in bits/channel use, treating interference as
/// noise: `R_i = log2(1 + h_ii g_i / (sum_{j != i} h_ij g_j + 1/snr))`.
pub fn rates<F: Real>(
    h: &ChannelMatrix<F>,
    gamma: &PowerVector<F>,
    config: &NetworkConfig<F>,
) -> Result<Vec<F>> {
    let n = config.n();
    if h.n() != n || gamma.n() != n {
        return Err(Error::Dimension(format!(
            "rates: h is {}x{}, gamma has {}, config n={}",
            h.n(),
            h.n(),
            gamma.n(),
            n
        )));
    }
    let g = gamma.gamma();
    let inv_snr = F::one() / config.snr();
    Ok((0..n)
        .map(|i| {
            let mut interference = F::zero();
            for j in 0..n {
                if j != i {
                    interference += h.gain(i, j) * g[j];
                }
            }
            let sinr = h.gain(i, i) * g[i] / (interference + inv_snr);
            (F::one() + sinr).log2()
        })
        .collect())
}

pub fn sum_rate<F: Real>(
    h: &ChannelMatrix<F>,
    gamma: &PowerVector<F>,
    config: &NetworkConfig<F>,
) -> Result<F> {
    Ok(rates(h, gamma, config)?.into_iter().sum())
}

/// Draw one channel matrix: every gain is an independent Exponential(1)
/// variate (squared magnitude of a CN(0,1) fading coefficient).
pub fn sample_channel<F: Real, R: Rng + ?Sized>(
    rng: &mut R,
    config: &NetworkConfig<F>,
) -> ChannelMatrix<F> {
    let n = config.n();
    let gains = (0..n * n).map(|_| F::sample_exp1(rng)).collect();
    ChannelMatrix { n, gains }
}

/// Ordered channel samples; the first `labeled_count` carry power labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F: Real = f64> {
    pub config: NetworkConfig<F>,
    pub seed: u64,
    channels: Vec<ChannelMatrix<F>>,
    labels: Vec<PowerVector<F>>,
}

impl<F: Real> Dataset<F> {
    pub fn new(
        config: NetworkConfig<F>,
        seed: u64,
        channels: Vec<ChannelMatrix<F>>,
        labels: Vec<PowerVector<F>>,
    ) -> Result<Self> {
        if labels.len() > channels.len() {
            return Err(Error::Config(format!(
                "{} labels for {} samples",
                labels.len(),
                channels.len()
            )));
        }
        for (i, ch) in channels.iter().enumerate() {
            if ch.n() != config.n() {
                return Err(Error::Dimension(format!(
                    "sample {i} has n={}, config n={}",
                    ch.n(),
                    config.n()
                )));
            }
        }
        for (i, l) in labels.iter().enumerate() {
            if l.n() != config.n() {
                return Err(Error::Dimension(format!(
                    "label {i} has length {}, config n={}",
                    l.n(),
                    config.n()
                )));
            }
        }
        Ok(Dataset {
            config,
            seed,
            channels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.len()
    }

    pub fn channel(&self, i: usize) -> &ChannelMatrix<F> {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[ChannelMatrix<F>] {
        &self.channels
    }

    /// Label for sample `i`, present only for the labeled prefix.
    pub fn label(&self, i: usize) -> Option<&PowerVector<F>> {
        self.labels.get(i)
    }

    pub fn labels(&self) -> &[PowerVector<F>] {
        &self.labels
    }

    pub(crate) fn set_labels(&mut self, labels: Vec<PowerVector<F>>) {
        debug_assert!(labels.len() <= self.channels.len());
        self.labels = labels;
    }
}

/// Generate `count` unlabeled channel samples. Sample `k` comes from its own
/// substream keyed by (seed, k), which gives both exact reproducibility and
/// the prefix property: shorter runs are prefixes of longer ones.
pub fn generate_dataset<F: Real>(
    seed: u64,
    count: usize,
    config: &NetworkConfig<F>,
) -> Dataset<F> {
    let channels: Vec<ChannelMatrix<F>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::substream(seed, tag::CHANNEL_SAMPLE, k as u64);
            sample_channel(&mut rng, config)
        })
        .collect();
    Dataset {
        config: *config,
        seed,
        channels,
        labels: Vec::new(),
    }
}
