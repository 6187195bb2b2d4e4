//! Channel augmentations driven by the sufficient condition for treating
//! interference as noise.
//!
//! An off-diagonal link (rx i, tx j) is "weak" when
//! `snr * h_ij <= sqrt(snr * min(h_ii, h_jj))`. Augmentations keep each weak
//! link independently with probability `keep_prob` and zero it otherwise;
//! signal links and strong interference links are never touched.

use rand::Rng;

use crate::error::{Error, Result};
use crate::netsim::{ChannelMatrix, NetworkConfig};
use crate::real::Real;

/// Boolean mask marking the weak interference links of one channel matrix.
/// The diagonal is always false.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeakLinkMask {
    n: usize,
    mask: Vec<bool>,
}

impl WeakLinkMask {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_weak(&self, rx: usize, tx: usize) -> bool {
        self.mask[rx * self.n + tx]
    }

    /// Weak positions as (receiver, transmitter) pairs, row-major order.
    pub fn weak_links(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for rx in 0..self.n {
            for tx in 0..self.n {
                if self.is_weak(rx, tx) {
                    out.push((rx, tx));
                }
            }
        }
        out
    }
}

/// Boundary equality counts as weak.
pub fn weak_link_mask<F: Real>(h: &ChannelMatrix<F>, config: &NetworkConfig<F>) -> WeakLinkMask {
    let n = h.n();
    let snr = config.snr();
    let mut mask = vec![false; n * n];
    for rx in 0..n {
        for tx in 0..n {
            if rx == tx {
                continue;
            }
            let bound = (snr * h.gain(rx, rx).min(h.gain(tx, tx))).sqrt();
            mask[rx * n + tx] = snr * h.gain(rx, tx) <= bound;
        }
    }
    WeakLinkMask { n, mask }
}

pub fn augment<F: Real, R: Rng + ?Sized>(
    h: &ChannelMatrix<F>,
    mask: &WeakLinkMask,
    rng: &mut R,
    keep_prob: f64,
) -> Result<ChannelMatrix<F>> {
    if mask.n() != h.n() {
        return Err(Error::Dimension(format!(
            "augment: mask is {}x{}, channel is {}x{}",
            mask.n(),
            mask.n(),
            h.n(),
            h.n()
        )));
    }
    if !(0.0..=1.0).contains(&keep_prob) {
        return Err(Error::Config(format!(
            "keep_prob must lie in [0, 1], got {keep_prob}"
        )));
    }
    let mut out = h.clone();
    for rx in 0..h.n() {
        for tx in 0..h.n() {
            if mask.is_weak(rx, tx) && rng.gen::<f64>() >= keep_prob {
                out.set_gain(rx, tx, F::zero());
            }
        }
    }
    Ok(out)
}

/// Two independent augmentations of `h` sharing one mask computation.
pub fn make_pair<F: Real, R: Rng + ?Sized>(
    h: &ChannelMatrix<F>,
    config: &NetworkConfig<F>,
    rng: &mut R,
    keep_prob: f64,
) -> Result<(ChannelMatrix<F>, ChannelMatrix<F>)> {
    let mask = weak_link_mask(h, config);
    let a = augment(h, &mask, rng, keep_prob)?;
    let b = augment(h, &mask, rng, keep_prob)?;
    Ok((a, b))
}
