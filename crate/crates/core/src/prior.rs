//! Discrete section prior: each of the `L` sections of the signal is drawn
//! independently from `K` weighted atoms in `R^B`.

use crate::error::{Error, Result};

/// Largest tolerated deviation of the weight sum from one. Anything within
/// this is treated as rounding noise and renormalized; anything beyond it is
/// rejected as a malformed prior.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Prior {
    /// `K` atoms, each of dimension `B`.
    atoms: Vec<Vec<f64>>,
    /// Normalized weights, strictly positive.
    weights: Vec<f64>,
    /// Cached `ln(weights)`.
    ln_weights: Vec<f64>,
    /// Largest absolute atom component; bounds every signal entry.
    s_max: f64,
}

impl Prior {
    /// Builds a prior from `K` atoms in `R^B` and their weights. The weight
    /// sum may deviate from one by at most [`WEIGHT_SUM_TOL`]; within that it
    /// is renormalized exactly.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidPrior("at least one atom required".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidPrior(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let b = atoms[0].len();
        if b == 0 {
            return Err(Error::InvalidPrior("atoms must have dimension >= 1".into()));
        }
        for (k, atom) in atoms.iter().enumerate() {
            if atom.len() != b {
                return Err(Error::InvalidPrior(format!(
                    "atom {k} has dimension {} != {b}",
                    atom.len()
                )));
            }
            if atom.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidPrior(format!("atom {k} has a non-finite entry")));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidPrior("weights must be finite and positive".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidPrior(format!(
                "weights sum to {sum}, which is further than {WEIGHT_SUM_TOL} from 1"
            )));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        let ln_weights = weights.iter().map(|w| w.ln()).collect();
        let s_max = atoms.iter().flat_map(|a| a.iter()).fold(0.0f64, |acc, a| acc.max(a.abs()));
        Ok(Self { atoms, weights, ln_weights, s_max })
    }

    /// Equiprobable `{+1, -1}` scalar sections. The workhorse prior in tests
    /// and default experiment configurations.
    pub fn rademacher() -> Self {
        Self::new(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5]).expect("static prior is valid")
    }

    pub fn k(&self) -> usize {
        self.atoms.len()
    }

    pub fn b(&self) -> usize {
        self.atoms[0].len()
    }

    #[inline]
    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k]
    }

    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    #[inline]
    pub fn ln_weight(&self, k: usize) -> f64 {
        self.ln_weights[k]
    }

    /// Largest absolute component over all atoms.
    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// Component-wise prior mean of one section.
    pub fn section_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.b()];
        for (atom, w) in self.atoms.iter().zip(&self.weights) {
            for (m, a) in mean.iter_mut().zip(atom) {
                *m += w * a;
            }
        }
        mean
    }

    /// Component-wise prior variance of one section.
    pub fn section_var(&self) -> Vec<f64> {
        let mean = self.section_mean();
        let mut var = vec![0.0; self.b()];
        for (atom, w) in self.atoms.iter().zip(&self.weights) {
            for ((v, a), m) in var.iter_mut().zip(atom).zip(&mean) {
                *v += w * (a - m) * (a - m);
            }
        }
        var
    }
}
