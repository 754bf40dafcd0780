//! Quenched Monte Carlo: averages over instances of the disorder.
//!
//! Every estimator here draws `n_samples` independent instances from
//! deterministic counter-based streams, evaluates an exact posterior summary
//! on each, and reports the sample mean with its standard error. Because an
//! instance is a pure function of `(base_seed, crn_tag, index)`, two
//! estimators that share a plan see exactly the same disorder; this is the
//! common-random-number coupling that the finite-difference and
//! nested-parameter checks rely on. Results are bit-reproducible for a given
//! plan regardless of how many worker threads carry the map: samples are
//! collected in index order and reduced with a fixed pairwise tree.

use rayon::prelude::*;

use crate::energy;
use crate::error::{Error, Result};
use crate::instance::{sample_instance, Instance, StreamKey};
use crate::params::ModelParams;
use crate::posterior::enumerate_posterior;
use crate::prior::Prior;
use crate::rng::fnv1a64;
use crate::stats::mean_and_se;

/// How a quenched average is sampled. Plans sharing `(n_samples, base_seed,
/// crn_tag)` see identical disorder, sample by sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingPlan {
    pub n_samples: usize,
    pub base_seed: u64,
    /// Label hashed into the stream key; estimates that must be coupled use
    /// the same tag, estimates that must be independent use different tags.
    pub crn_tag: String,
}

impl SamplingPlan {
    pub fn new(n_samples: usize, base_seed: u64, crn_tag: &str) -> Self {
        SamplingPlan { n_samples, base_seed, crn_tag: crn_tag.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidPlan("n_samples must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn key(&self, index: u64) -> StreamKey {
        StreamKey::new(self.base_seed, fnv1a64(self.crn_tag.as_bytes()), index)
    }
}

/// A Monte Carlo estimate with its standard error and provenance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub base_seed: u64,
}

impl EstimateWithError {
    pub(crate) fn from_values(plan: &SamplingPlan, values: &[f64]) -> Self {
        let (mean, std_error) = mean_and_se(values);
        EstimateWithError { mean, std_error, n_samples: values.len(), base_seed: plan.base_seed }
    }
}

/// Evaluates `f` on every instance key of `plan`, in parallel, preserving
/// index order. The first error aborts the map.
pub(crate) fn map_samples<T, F>(plan: &SamplingPlan, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(StreamKey) -> Result<T> + Sync,
{
    plan.validate()?;
    (0..plan.n_samples as u64).into_par_iter().map(|i| f(plan.key(i))).collect()
}

/// The constant part of the per-sample information value: the expectation of
/// the side-channel magnitude term, `sqrt(h) * s_max * B * E|zhat|` per
/// section with `E|zhat| = sqrt(2/pi)`.
pub(crate) fn info_offset(prior: &Prior, params: &ModelParams) -> f64 {
    params.h.sqrt() * prior.s_max() * params.b as f64 * (2.0 / std::f64::consts::PI).sqrt()
}

/// One sample of the mutual information estimator on an already enumerated
/// instance. `log_z` is converted back to the signal-dependent partition
/// value `ln W` so the realized noise constants cancel sample by sample.
pub(crate) fn sample_info(inst: &Instance, prior: &Prior, params: &ModelParams, log_z: f64) -> f64 {
    let ln_w = log_z + energy::constant_term(inst, prior, params);
    -ln_w / params.l as f64 + info_offset(prior, params)
}

/// Per-section mutual information between the signal and the observations.
///
/// The normalized mutual information is `-c - E[ln Z] / L` for a constant
/// `c` fixed by the channel. Folding the realized noise constants of each
/// instance into its own sample instead of subtracting their expectation
/// once leaves the per-sample value
///
/// ```text
///   i_k = -ln W_k / L + sqrt(h) * s_max * B * sqrt(2 / pi),
/// ```
///
/// where `ln W_k` keeps only the signal-dependent part of `ln Z_k`. The
/// realized constants cancel exactly sample by sample, which removes the
/// dominant noise term from the estimator; with a single-atom prior and
/// `h = 0` every sample is exactly zero.
pub fn mutual_info(
    prior: &Prior,
    params: &ModelParams,
    plan: &SamplingPlan,
) -> Result<EstimateWithError> {
    let values = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        let summary = enumerate_posterior(&inst, prior, params)?;
        Ok(sample_info(&inst, prior, params, summary.log_z))
    })?;
    Ok(EstimateWithError::from_values(plan, &values))
}

/// Signal estimation error `E || S - <X> ||^2 / L`.
pub fn mmse(prior: &Prior, params: &ModelParams, plan: &SamplingPlan) -> Result<EstimateWithError> {
    let values = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        Ok(enumerate_posterior(&inst, prior, params)?.section_mmse_term)
    })?;
    Ok(EstimateWithError::from_values(plan, &values))
}

/// Measurement estimation error over the ordinary rows,
/// `(1/M) sum_mu E < [phi (X - s)]_mu >^2`.
pub fn measurement_mmse(
    prior: &Prior,
    params: &ModelParams,
    plan: &SamplingPlan,
) -> Result<EstimateWithError> {
    if params.m == 0 {
        return Err(Error::InvalidParams("measurement_mmse requires m >= 1".into()));
    }
    let m = params.m;
    let values = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        let summary = enumerate_posterior(&inst, prior, params)?;
        Ok(summary.row_mean[..m].iter().map(|r| r * r).sum::<f64>() / m as f64)
    })?;
    Ok(EstimateWithError::from_values(plan, &values))
}

/// Measurement estimation error over the sub-group rows,
/// `(1/|S|) sum_nu E < [phi (X - s)]_nu >^2`.
pub fn sub_measurement_mmse(
    prior: &Prior,
    params: &ModelParams,
    plan: &SamplingPlan,
) -> Result<EstimateWithError> {
    let m = params.m;
    let sub = params.sub_rows();
    if sub == 0 {
        return Err(Error::InvalidParams(
            "sub_measurement_mmse requires a nonempty sub-group".into(),
        ));
    }
    let values = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        let summary = enumerate_posterior(&inst, prior, params)?;
        Ok(summary.row_mean[m..m + sub].iter().map(|r| r * r).sum::<f64>() / sub as f64)
    })?;
    Ok(EstimateWithError::from_values(plan, &values))
}

/// Moments of the normalized overlap `q(X) = sum_i (X_i - s_i) X_i / L`.
#[derive(Clone, Copy, Debug)]
pub struct OverlapStats {
    /// `E < q >`.
    pub mean: EstimateWithError,
    /// The overlap fluctuation `E < (q - E*)^2 >` around the estimated MMSE
    /// `E* = E[ |s - <X>|^2 / L ]`, expanded as
    /// `E<q^2> - 2 E* E<q> + E*^2` with `E*` a plug-in from the same sample
    /// (bias `O(1/n)`). The standard error accounts for the shared samples
    /// through the influence function of the plug-in.
    pub fluctuation: EstimateWithError,
}

/// Per-sample exact moments feeding [`overlap_stats`] and the concentration
/// checks: `(<q>, <q^2>, |s - <X>|^2 / L)`.
pub(crate) fn overlap_triple(
    inst: &Instance,
    prior: &Prior,
    params: &ModelParams,
) -> Result<(f64, f64, f64)> {
    let summary = enumerate_posterior(inst, prior, params)?;
    Ok((summary.overlap_mean, summary.overlap_sq, summary.section_mmse_term))
}

/// Plug-in fluctuation from per-sample `(<q>, <q^2>, mmse)` triples together
/// with the per-sample influence values its standard error is built from.
/// Exposed separately so quadratures over a parameter can combine influences
/// pointwise before taking the error.
pub(crate) fn fluctuation_influences(triples: &[(f64, f64, f64)]) -> (f64, Vec<f64>) {
    let b: Vec<f64> = triples.iter().map(|t| t.0).collect();
    let a: Vec<f64> = triples.iter().map(|t| t.1).collect();
    let e: Vec<f64> = triples.iter().map(|t| t.2).collect();
    let (b_mean, _) = mean_and_se(&b);
    let (a_mean, _) = mean_and_se(&a);
    let (e_mean, _) = mean_and_se(&e);
    let value = a_mean - 2.0 * e_mean * b_mean + e_mean * e_mean;
    // Influence function of (A, B, E) -> A - 2EB + E^2 at the sample means.
    let influences: Vec<f64> = triples
        .iter()
        .map(|&(bk, ak, ek)| {
            (ak - a_mean) - 2.0 * e_mean * (bk - b_mean) + 2.0 * (e_mean - b_mean) * (ek - e_mean)
        })
        .collect();
    (value, influences)
}

/// Combines per-sample `(<q>, <q^2>, mmse)` triples into the plug-in
/// fluctuation estimate with its delta-method standard error.
pub(crate) fn fluctuation_from_triples(
    plan: &SamplingPlan,
    triples: &[(f64, f64, f64)],
) -> EstimateWithError {
    let (value, influences) = fluctuation_influences(triples);
    let (_, se) = mean_and_se(&influences);
    EstimateWithError {
        mean: value,
        std_error: se,
        n_samples: triples.len(),
        base_seed: plan.base_seed,
    }
}

/// Estimates the mean overlap and its fluctuation around the estimated MMSE.
pub fn overlap_stats(
    prior: &Prior,
    params: &ModelParams,
    plan: &SamplingPlan,
) -> Result<OverlapStats> {
    let triples = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        overlap_triple(&inst, prior, params)
    })?;
    let firsts: Vec<f64> = triples.iter().map(|t| t.0).collect();
    let mean = EstimateWithError::from_values(plan, &firsts);
    let fluctuation = fluctuation_from_triples(plan, &triples);
    Ok(OverlapStats { mean, fluctuation })
}

/// Order-independent digest of every instance a plan would draw. Two plans
/// with equal digests saw bit-identical disorder.
pub fn instance_digest(prior: &Prior, params: &ModelParams, plan: &SamplingPlan) -> Result<u64> {
    let digests = map_samples(plan, |key| Ok(sample_instance(params, prior, key)?.digest()))?;
    Ok(digests.into_iter().fold(0u64, |acc, d| acc.wrapping_add(d)))
}
