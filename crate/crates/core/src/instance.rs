//! Quenched disorder for one experiment: measurement matrix, signal, noise.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::params::ModelParams;
use crate::prior::Prior;
use crate::rng::{self, purpose};

/// Address of one instance's random streams. Two equal keys always reproduce
/// bit-identical draws, regardless of thread count or call order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub base_seed: u64,
    /// Hashed common-random-number tag; instances sharing it see the same
    /// disorder across estimators and parameter values.
    pub tag: u64,
    /// Instance index within a sampling plan.
    pub index: u64,
}

impl StreamKey {
    pub fn new(base_seed: u64, tag: u64, index: u64) -> Self {
        Self { base_seed, tag, index }
    }

    pub(crate) fn rng(&self, purpose: u64) -> rand_chacha::ChaCha12Rng {
        rng::stream([self.base_seed, self.tag, self.index, purpose])
    }
}

/// One draw of the disorder. `phi` holds the `M` ordinary measurement rows
/// followed by the `|S|` sub-group rows; `z` holds one noise value per row;
/// `zhat` is the side-channel noise, one value per signal component. `zhat`
/// is drawn even when `h = 0` (where it is inert) so that instances keyed the
/// same way line up across `h` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub phi: Mat,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub zhat: Vec<f64>,
    /// The generator key that produced this draw.
    pub seed: StreamKey,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.phi.cols()
    }

    pub fn rows(&self) -> usize {
        self.phi.rows()
    }

    /// Stable FNV digest of every draw in this instance. Used to verify that
    /// runs which are supposed to share disorder actually do.
    pub fn digest(&self) -> u64 {
        let mut bytes = Vec::with_capacity(
            8 * (self.phi.data().len() + self.s.len() + self.z.len() + self.zhat.len()) + 16,
        );
        bytes.extend_from_slice(&(self.rows() as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.n() as u64).to_le_bytes());
        for v in self.phi.data().iter().chain(&self.s).chain(&self.z).chain(&self.zhat) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        rng::fnv1a64(&bytes)
    }
}

/// Draws one instance. Matrix entries are `N(0, 1/L)`; all noise is standard
/// normal. Each matrix row (entries, then its noise value) comes from a
/// stream keyed by the row index, so enlarging `M` with a fixed key leaves
/// the existing rows untouched; signal and side noise have streams of their
/// own.
pub fn sample_instance(params: &ModelParams, prior: &Prior, key: StreamKey) -> Result<Instance> {
    params.validate()?;
    if prior.b() != params.b {
        return Err(Error::DimensionMismatch(format!(
            "prior section dimension {} != params.b {}",
            prior.b(),
            params.b
        )));
    }
    let n = params.n();
    let rows = params.rows();

    let mut s = Vec::with_capacity(n);
    let mut signal_rng = key.rng(purpose::SIGNAL);
    for _ in 0..params.l {
        let u: f64 = signal_rng.gen();
        let mut acc = 0.0;
        let mut chosen = prior.k() - 1;
        for k in 0..prior.k() {
            acc += prior.weight(k);
            if u < acc {
                chosen = k;
                break;
            }
        }
        s.extend_from_slice(prior.atom(chosen));
    }

    let scale = (1.0 / params.l as f64).sqrt();
    let mut phi = Mat::zeros(rows, n);
    let mut z = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut row_rng = key.rng(purpose::row(r));
        for e in phi.row_mut(r) {
            let g: f64 = row_rng.sample(StandardNormal);
            *e = scale * g;
        }
        z.push(row_rng.sample(StandardNormal));
    }

    let mut side_rng = key.rng(purpose::SIDE);
    let zhat = (0..n).map(|_| side_rng.sample(StandardNormal)).collect();

    Ok(Instance { phi, s, z, zhat, seed: key })
}
