//! Statistical verification of the model's identities.
//!
//! Two kinds of statements are checked. Identities that are exact in
//! quenched expectation at finite size (the canonical information
//! derivative, the Nishimori symmetries, the two derivative forms in `t`)
//! become [`RelationReport`]s: both sides are estimated, usually on common
//! random numbers, and the report passes when the residual is within
//! `Z_THRESHOLD` combined standard errors. Asymptotic statements (the
//! measurement-error limits, the insensitivity of the error to `t`, overlap
//! concentration) become [`ScalingReport`]s: the residual is measured on a
//! grid of sizes `L` and must decay, either monotonically within error bars
//! or with a negative fitted log-log slope.

use crate::error::{Error, Result};
use crate::instance::sample_instance;
use crate::mat::dot;
use crate::params::ModelParams;
use crate::posterior::{enumerate_posterior, PosteriorSummary};
use crate::prior::Prior;
use crate::quenched::{
    fluctuation_influences, map_samples, sample_info, EstimateWithError, SamplingPlan,
};
use crate::stats::mean_and_se;

/// Acceptance threshold on z-scores. At 4 sigma a suite of dozens of exact
/// identity checks has a negligible false-failure rate under normality.
pub const Z_THRESHOLD: f64 = 4.0;

/// Outcome of checking one identity at one parameter point. Carries the
/// parameter point and plan it was produced under, so a report is
/// self-describing when serialized.
#[derive(Clone, Debug)]
pub struct RelationReport {
    pub name: String,
    pub lhs: EstimateWithError,
    pub rhs: EstimateWithError,
    /// `lhs.mean - rhs.mean`.
    pub residual: f64,
    /// `sqrt(lhs.se^2 + rhs.se^2) + fd_bias`.
    pub combined_error: f64,
    pub z_score: f64,
    pub pass: bool,
    /// When true the check is an upper bound: it fails only for
    /// `z_score > Z_THRESHOLD`, never for a very negative residual.
    pub one_sided: bool,
    /// Finite-difference bias bound included in `combined_error` (zero when
    /// no derivative is estimated by differencing).
    pub fd_bias: f64,
    pub params: ModelParams,
    pub plan: SamplingPlan,
    pub notes: Vec<String>,
}

impl RelationReport {
    #[allow(clippy::too_many_arguments)]
    fn build(
        name: &str,
        params: &ModelParams,
        plan: &SamplingPlan,
        lhs: EstimateWithError,
        rhs: EstimateWithError,
        fd_bias: f64,
        one_sided: bool,
    ) -> Self {
        let residual = lhs.mean - rhs.mean;
        let combined_error =
            (lhs.std_error * lhs.std_error + rhs.std_error * rhs.std_error).sqrt() + fd_bias;
        let z_score = if residual == 0.0 { 0.0 } else { residual / combined_error };
        let pass = if one_sided { z_score <= Z_THRESHOLD } else { z_score.abs() <= Z_THRESHOLD };
        RelationReport {
            name: name.into(),
            lhs,
            rhs,
            residual,
            combined_error,
            z_score,
            pass,
            one_sided,
            fd_bias,
            params: params.clone(),
            plan: plan.clone(),
            notes: Vec::new(),
        }
    }

    /// Two-sided check: both signs of the residual count against it.
    pub fn two_sided(
        name: &str,
        params: &ModelParams,
        plan: &SamplingPlan,
        lhs: EstimateWithError,
        rhs: EstimateWithError,
        fd_bias: f64,
    ) -> Self {
        Self::build(name, params, plan, lhs, rhs, fd_bias, false)
    }

    /// One-sided check of `lhs <= rhs`.
    pub fn upper_bound(
        name: &str,
        params: &ModelParams,
        plan: &SamplingPlan,
        lhs: EstimateWithError,
        rhs: EstimateWithError,
        fd_bias: f64,
    ) -> Self {
        Self::build(name, params, plan, lhs, rhs, fd_bias, true)
    }

    pub fn with_note(mut self, note: String) -> Self {
        self.notes.push(note);
        self
    }
}

/// Decay of a residual over a grid of sizes.
#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub name: String,
    pub sizes: Vec<usize>,
    /// Residual magnitude at each size.
    pub residuals: Vec<f64>,
    /// Standard error of each residual.
    pub errors: Vec<f64>,
    /// Weighted least-squares slope of `ln residual` against `ln L`, over
    /// the sizes with positive residual and error.
    pub slope: f64,
    pub slope_se: f64,
    /// Non-increasing within two combined standard errors at every step.
    pub monotone: bool,
    /// `monotone` or the 95% upper confidence bound of the slope below zero.
    pub pass: bool,
    pub notes: Vec<String>,
}

impl ScalingReport {
    pub fn from_residuals(
        name: &str,
        sizes: Vec<usize>,
        residuals: Vec<f64>,
        errors: Vec<f64>,
    ) -> Result<Self> {
        if sizes.len() < 3 {
            return Err(Error::InvalidArgument("scaling grid needs at least 3 sizes".into()));
        }
        if sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("scaling grid must be strictly increasing".into()));
        }
        if residuals.len() != sizes.len() || errors.len() != sizes.len() {
            return Err(Error::DimensionMismatch("scaling inputs differ in length".into()));
        }

        let monotone = residuals
            .windows(2)
            .zip(errors.windows(2))
            .all(|(r, e)| r[1] <= r[0] + 2.0 * (e[0] * e[0] + e[1] * e[1]).sqrt());

        let mut notes = Vec::new();
        // Weighted fit with variances from the delta method on ln(residual).
        let pts: Vec<(f64, f64, f64)> = sizes
            .iter()
            .zip(residuals.iter().zip(&errors))
            .filter(|(_, (r, e))| **r > 0.0 && **e > 0.0 && r.is_finite() && e.is_finite())
            .map(|(l, (r, e))| {
                let w = (r / e) * (r / e);
                ((*l as f64).ln(), r.ln(), w)
            })
            .collect();
        let (slope, slope_se) = if pts.len() < 2 {
            notes.push("slope fit skipped: fewer than 2 positive residuals".into());
            (0.0, f64::INFINITY)
        } else {
            let w_sum: f64 = pts.iter().map(|p| p.2).sum();
            let x_bar: f64 = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / w_sum;
            let y_bar: f64 = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / w_sum;
            let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - x_bar) * (p.0 - x_bar)).sum();
            let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - x_bar) * (p.1 - y_bar)).sum();
            (sxy / sxx, 1.0 / sxx.sqrt())
        };

        let pass = monotone || slope + 1.96 * slope_se < 0.0;
        Ok(ScalingReport {
            name: name.into(),
            sizes,
            residuals,
            errors,
            slope,
            slope_se,
            monotone,
            pass,
            notes,
        })
    }

    /// 95% upper confidence bound on the fitted slope.
    pub fn slope_upper(&self) -> f64 {
        self.slope + 1.96 * self.slope_se
    }

    pub fn with_note(mut self, note: String) -> Self {
        self.notes.push(note);
        self
    }
}

fn base_row_mmse(summary: &PosteriorSummary, m: usize) -> f64 {
    summary.row_mean[..m].iter().map(|r| r * r).sum::<f64>() / m as f64
}

fn sub_row_mmse(summary: &PosteriorSummary, m: usize, sub: usize) -> f64 {
    summary.row_mean[m..m + sub].iter().map(|r| r * r).sum::<f64>() / sub as f64
}

/// Per-size sampling plan: a distinct tag per `L` keeps the size runs on
/// independent streams while staying reproducible. Every grid check in this
/// module draws the instances for size `l` from this plan, so callers can
/// reproduce or fingerprint the exact disorder a grid run consumed.
pub fn size_plan(plan: &SamplingPlan, l: usize) -> SamplingPlan {
    SamplingPlan::new(plan.n_samples, plan.base_seed, &format!("{}/L{}", plan.crn_tag, l))
}

fn require_base_model(params: &ModelParams, what: &str) -> Result<()> {
    if params.t != 0.0 || params.h != 0.0 {
        return Err(Error::InvalidParams(format!("{what} requires the base model (t = h = 0)")));
    }
    Ok(())
}

/// Exact finite-size identity between the information derivative in the
/// inverse noise and the measurement error:
///
/// ```text
///   d i / d(1/delta) = (alpha B / 2) * Y_M.
/// ```
///
/// The left side is a central finite difference in `1/delta` on common
/// random numbers (instances do not depend on `delta`), evaluated at half
/// the requested step with a step-halving bias bound; the right side is
/// estimated at the center point.
pub fn check_canonical_immse(
    prior: &Prior,
    params: &ModelParams,
    plan: &SamplingPlan,
    fd_step: f64,
) -> Result<RelationReport> {
    params.validate()?;
    require_base_model(params, "check_canonical_immse")?;
    if params.m == 0 {
        return Err(Error::InvalidParams("check_canonical_immse requires m >= 1".into()));
    }
    if fd_step <= 0.0 || !fd_step.is_finite() {
        return Err(Error::InvalidArgument("fd step must be positive and finite".into()));
    }
    let inv = 1.0 / params.delta;
    if inv - fd_step <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "fd stencil reaches 1/delta = {} <= 0",
            inv - fd_step
        )));
    }

    let m = params.m;
    let half_rhs = 0.5 * params.alpha() * params.b as f64;
    let offsets = [-fd_step, -0.5 * fd_step, 0.5 * fd_step, fd_step];
    let rows = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        let center = enumerate_posterior(&inst, prior, params)?;
        let i_center = sample_info(&inst, prior, params, center.log_z);
        let y = base_row_mmse(&center, m);
        let mut info = [0.0; 4];
        for (slot, off) in info.iter_mut().zip(offsets) {
            let mut shifted = params.clone();
            shifted.delta = 1.0 / (inv + off);
            let summary = enumerate_posterior(&inst, prior, &shifted)?;
            *slot = sample_info(&inst, prior, &shifted, summary.log_z);
        }
        let half = (info[2] - info[1]) / fd_step;
        let full = (info[3] - info[0]) / (2.0 * fd_step);
        let curv = (info[3] - 2.0 * i_center + info[0]) / (fd_step * fd_step);
        Ok((half, full, half_rhs * y, curv))
    })?;

    let halves: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let fulls: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let rhs_vals: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let curvs: Vec<f64> = rows.iter().map(|r| r.3).collect();

    let lhs = EstimateWithError::from_values(plan, &halves);
    let rhs = EstimateWithError::from_values(plan, &rhs_vals);
    let (full_mean, _) = mean_and_se(&fulls);
    let fd_bias = (full_mean - lhs.mean).abs() / 3.0;
    let (curv_mean, _) = mean_and_se(&curvs);
    Ok(RelationReport::two_sided("canonical-immse", params, plan, lhs, rhs, fd_bias)
        .with_note(format!("second difference in 1/delta: {curv_mean:.3e}")))
}

/// Asymptotic form of the measurement error,
/// `Y_M = E_L / (1 + E_L / delta) + o_L(1)`, as a residual decay test over
/// a grid of sizes with `M = N`.
pub fn check_snr_immse(
    prior: &Prior,
    template: &ModelParams,
    l_grid: &[usize],
    plan: &SamplingPlan,
) -> Result<ScalingReport> {
    require_base_model(template, "check_snr_immse")?;
    let mut residuals = Vec::with_capacity(l_grid.len());
    let mut errors = Vec::with_capacity(l_grid.len());
    for &l in l_grid {
        let mut params = template.clone();
        params.l = l;
        params.m = l * params.b;
        params.validate()?;
        let m = params.m;
        let delta = params.delta;
        let pairs = map_samples(&size_plan(plan, l), |key| {
            let inst = sample_instance(&params, prior, key)?;
            let summary = enumerate_posterior(&inst, prior, &params)?;
            Ok((base_row_mmse(&summary, m), summary.section_mmse_term))
        })?;
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let e: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (y_mean, _) = mean_and_se(&y);
        let (e_mean, _) = mean_and_se(&e);
        let predicted = e_mean / (1.0 + e_mean / delta);
        let slope = 1.0 / ((1.0 + e_mean / delta) * (1.0 + e_mean / delta));
        let influences: Vec<f64> =
            pairs.iter().map(|&(yk, ek)| (yk - y_mean) - slope * (ek - e_mean)).collect();
        let (_, se) = mean_and_se(&influences);
        residuals.push((y_mean - predicted).abs());
        errors.push(se);
    }
    ScalingReport::from_residuals("snr-immse", l_grid.to_vec(), residuals, errors)
}

/// Discrete information increment per measurement against the logarithmic
/// law `di/d alpha = (B/2) ln(1 + E_L / delta)`.
///
/// The left side is the forward difference `(i(M + dm) - i(M)) / (dm / N)`
/// on nested instances (extra rows extend, never redraw); the bias bound
/// comes from the second difference over `{M, M+dm, M+2dm}`. One report per
/// grid size plus the residual decay.
pub fn check_alpha_immse(
    prior: &Prior,
    template: &ModelParams,
    l_grid: &[usize],
    dm: usize,
    plan: &SamplingPlan,
) -> Result<(Vec<RelationReport>, ScalingReport)> {
    require_base_model(template, "check_alpha_immse")?;
    if dm == 0 {
        return Err(Error::InvalidArgument("dm must be at least 1".into()));
    }
    let mut reports = Vec::with_capacity(l_grid.len());
    let mut residuals = Vec::with_capacity(l_grid.len());
    let mut errors = Vec::with_capacity(l_grid.len());
    for &l in l_grid {
        let mut params = template.clone();
        params.l = l;
        params.m = l * params.b;
        params.validate()?;
        let n = params.n() as f64;
        let m = params.m;
        let d_alpha = dm as f64 / n;
        let half_b = 0.5 * params.b as f64;
        let delta = params.delta;

        // One instance with m + 2 dm rows serves all three nested models.
        let mut widest = params.clone();
        widest.m = m + 2 * dm;
        let sub_plan = size_plan(plan, l);
        let rows = map_samples(&sub_plan, |key| {
            let inst = sample_instance(&widest, prior, key)?;
            let mut info = [0.0; 3];
            let mut e_center = 0.0;
            for (j, slot) in info.iter_mut().enumerate() {
                let mut nested = params.clone();
                nested.m = m + j * dm;
                let summary = enumerate_posterior(&inst, prior, &nested)?;
                *slot = sample_info(&inst, prior, &nested, summary.log_z);
                if j == 0 {
                    e_center = summary.section_mmse_term;
                }
            }
            let fwd = (info[1] - info[0]) / d_alpha;
            let curv = (info[2] - 2.0 * info[1] + info[0]) / (d_alpha * d_alpha);
            Ok((fwd, curv, e_center))
        })?;

        let fwd: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let curv: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let e: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let lhs = EstimateWithError::from_values(&sub_plan, &fwd);
        let (curv_mean, _) = mean_and_se(&curv);
        let (e_mean, e_se) = mean_and_se(&e);
        let rhs = EstimateWithError {
            mean: half_b * (1.0 + e_mean / delta).ln(),
            std_error: half_b * e_se / (delta + e_mean),
            n_samples: rows.len(),
            base_seed: sub_plan.base_seed,
        };
        let fd_bias = curv_mean.abs() * d_alpha / 2.0;
        reports.push(
            RelationReport::two_sided(
                &format!("alpha-immse L={l}"),
                &params,
                &sub_plan,
                lhs,
                rhs,
                fd_bias,
            )
            .with_note(format!("forward difference step 1/N = {d_alpha:.4e}")),
        );

        // Covariance-aware residual error for the decay test.
        let g_slope = half_b / (delta + e_mean);
        let influences: Vec<f64> =
            rows.iter().map(|r| (r.0 - lhs.mean) - g_slope * (r.2 - e_mean)).collect();
        let (_, res_se) = mean_and_se(&influences);
        residuals.push((lhs.mean - rhs.mean).abs());
        errors.push(res_se);
    }
    let scaling = ScalingReport::from_residuals("alpha-immse", l_grid.to_vec(), residuals, errors)?;
    Ok((reports, scaling))
}

/// Combined logarithmic identity linking the two information derivatives:
///
/// ```text
///   (2 / alpha B) * (1/delta) * di/d(1/delta) = 1 - exp(-(2/B) di/d alpha).
/// ```
///
/// Both derivatives are estimated as in their parent checks (central
/// difference in `1/delta`, forward difference in `alpha`), on the same
/// instances. Exact only asymptotically; one report per size plus decay.
pub fn check_log_identity(
    prior: &Prior,
    template: &ModelParams,
    l_grid: &[usize],
    fd_step: f64,
    dm: usize,
    plan: &SamplingPlan,
) -> Result<(Vec<RelationReport>, ScalingReport)> {
    require_base_model(template, "check_log_identity")?;
    if dm == 0 || fd_step <= 0.0 || !fd_step.is_finite() {
        return Err(Error::InvalidArgument("need dm >= 1 and a positive fd step".into()));
    }
    let inv = 1.0 / template.delta;
    if inv - fd_step <= 0.0 {
        return Err(Error::InvalidArgument("fd stencil leaves 1/delta positive".into()));
    }

    let mut reports = Vec::with_capacity(l_grid.len());
    let mut residuals = Vec::with_capacity(l_grid.len());
    let mut errors = Vec::with_capacity(l_grid.len());
    for &l in l_grid {
        let mut params = template.clone();
        params.l = l;
        params.m = l * params.b;
        params.validate()?;
        let n = params.n() as f64;
        let m = params.m;
        let d_alpha = dm as f64 / n;
        let alpha = params.alpha();
        let c = 2.0 / params.b as f64;
        let lhs_scale = c / alpha * inv;
        let offsets = [-fd_step, -0.5 * fd_step, 0.5 * fd_step, fd_step];

        let mut widest = params.clone();
        widest.m = m + 2 * dm;
        let sub_plan = size_plan(plan, l);
        let rows = map_samples(&sub_plan, |key| {
            let inst = sample_instance(&widest, prior, key)?;
            let mut noise_info = [0.0; 4];
            for (slot, off) in noise_info.iter_mut().zip(offsets) {
                let mut shifted = params.clone();
                shifted.delta = 1.0 / (inv + off);
                let summary = enumerate_posterior(&inst, prior, &shifted)?;
                *slot = sample_info(&inst, prior, &shifted, summary.log_z);
            }
            let mut alpha_info = [0.0; 3];
            for (j, slot) in alpha_info.iter_mut().enumerate() {
                let mut nested = params.clone();
                nested.m = m + j * dm;
                let summary = enumerate_posterior(&inst, prior, &nested)?;
                *slot = sample_info(&inst, prior, &nested, summary.log_z);
            }
            let half = (noise_info[2] - noise_info[1]) / fd_step;
            let full = (noise_info[3] - noise_info[0]) / (2.0 * fd_step);
            let fwd = (alpha_info[1] - alpha_info[0]) / d_alpha;
            let curv = (alpha_info[2] - 2.0 * alpha_info[1] + alpha_info[0]) / (d_alpha * d_alpha);
            Ok((half, full, fwd, curv))
        })?;

        let lhs_vals: Vec<f64> = rows.iter().map(|r| lhs_scale * r.0).collect();
        let lhs = EstimateWithError::from_values(&sub_plan, &lhs_vals);
        let fulls: Vec<f64> = rows.iter().map(|r| lhs_scale * r.1).collect();
        let (full_mean, _) = mean_and_se(&fulls);
        let lhs_bias = (full_mean - lhs.mean).abs() / 3.0;

        let fwd: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let (fwd_mean, fwd_se) = mean_and_se(&fwd);
        let curvs: Vec<f64> = rows.iter().map(|r| r.3).collect();
        let (curv_mean, _) = mean_and_se(&curvs);
        let damp = (-c * fwd_mean).exp();
        let rhs = EstimateWithError {
            mean: 1.0 - damp,
            std_error: c * damp * fwd_se,
            n_samples: rows.len(),
            base_seed: sub_plan.base_seed,
        };
        let rhs_bias = c * damp * (curv_mean.abs() * d_alpha / 2.0);

        reports.push(
            RelationReport::two_sided(
                &format!("log-identity L={l}"),
                &params,
                &sub_plan,
                lhs,
                rhs,
                lhs_bias + rhs_bias,
            )
            .with_note("rhs is a plug-in exponential of the mean increment".into()),
        );

        let influences: Vec<f64> = rows
            .iter()
            .map(|r| (lhs_scale * r.0 - lhs.mean) - c * damp * (r.2 - fwd_mean))
            .collect();
        let (_, res_se) = mean_and_se(&influences);
        residuals.push((lhs.mean - rhs.mean).abs());
        errors.push(res_se);
    }
    let scaling =
        ScalingReport::from_residuals("log-identity", l_grid.to_vec(), residuals, errors)?;
    Ok((reports, scaling))
}

/// Asymptotic sub-group analogue of the measurement-error limit,
/// `Y_sub = E / (1 + E t / delta) + o_L(1)`, with `t`, `h` and the group
/// size taken from the template.
pub fn check_sub_mmse_relation(
    prior: &Prior,
    template: &ModelParams,
    l_grid: &[usize],
    plan: &SamplingPlan,
) -> Result<ScalingReport> {
    if template.h <= 0.0 {
        return Err(Error::InvalidParams(
            "check_sub_mmse_relation requires h > 0 (the statement holds for a.e. h)".into(),
        ));
    }
    let mut residuals = Vec::with_capacity(l_grid.len());
    let mut errors = Vec::with_capacity(l_grid.len());
    for &l in l_grid {
        let mut params = template.clone();
        params.l = l;
        params.m = l * params.b;
        params.validate()?;
        let m = params.m;
        let sub = params.sub_rows();
        if sub == 0 {
            return Err(Error::InvalidParams("sub-group must be nonempty".into()));
        }
        let ratio = params.t / params.delta;
        let pairs = map_samples(&size_plan(plan, l), |key| {
            let inst = sample_instance(&params, prior, key)?;
            let summary = enumerate_posterior(&inst, prior, &params)?;
            Ok((sub_row_mmse(&summary, m, sub), summary.section_mmse_term))
        })?;
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let e: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (y_mean, _) = mean_and_se(&y);
        let (e_mean, _) = mean_and_se(&e);
        let predicted = e_mean / (1.0 + e_mean * ratio);
        let slope = 1.0 / ((1.0 + e_mean * ratio) * (1.0 + e_mean * ratio));
        let influences: Vec<f64> =
            pairs.iter().map(|&(yk, ek)| (yk - y_mean) - slope * (ek - e_mean)).collect();
        let (_, se) = mean_and_se(&influences);
        residuals.push((y_mean - predicted).abs());
        errors.push(se);
    }
    ScalingReport::from_residuals("sub-mmse-relation", l_grid.to_vec(), residuals, errors)
}

/// Insensitivity of the estimation error to the interpolation parameter:
/// `E at t=1` minus `E at t=0` vanishes as `L` grows. Evaluations at the two
/// `t` values share instances, so the difference is paired per sample. A
/// Gibbs covariance diagnostic (the integrand behind the statement) is
/// reported per size.
pub fn check_mmse_variation(
    prior: &Prior,
    template: &ModelParams,
    l_grid: &[usize],
    plan: &SamplingPlan,
) -> Result<ScalingReport> {
    if template.h <= 0.0 {
        return Err(Error::InvalidParams("check_mmse_variation requires h > 0".into()));
    }
    let mut residuals = Vec::with_capacity(l_grid.len());
    let mut errors = Vec::with_capacity(l_grid.len());
    let mut notes = Vec::new();
    if !(template.u > 0.0 && template.u < 1.0 / 20.0) {
        notes.push(format!(
            "u = {} outside (0, 1/20): the sub-group stays sub-extensive only below 1/20",
            template.u
        ));
    }
    for &l in l_grid {
        let mut params = template.clone();
        params.l = l;
        params.m = l * params.b;
        params.validate()?;
        let m = params.m;
        let sub = params.sub_rows();
        let root = params.delta.sqrt();
        let scale = 0.5 / params.delta;
        let rows = map_samples(&size_plan(plan, l), |key| {
            let inst = sample_instance(&params, prior, key)?;
            let mut at_one = params.clone();
            at_one.t = 1.0;
            let s1 = enumerate_posterior(&inst, prior, &at_one)?;
            let mut at_zero = params.clone();
            at_zero.t = 0.0;
            let s0 = enumerate_posterior(&inst, prior, &at_zero)?;
            // Covariance of the overlap with the per-row energy observable
            // at t = 1, assembled from single-replica joint moments.
            let mut cov = 0.0;
            for v in 0..sub {
                let z = inst.z[m + v];
                let joint = s1.sub_sq_overlap_cross[v] - root * z * s1.sub_overlap_cross[v];
                let split = s1.overlap_mean * (s1.row_sq[m + v] - root * z * s1.row_mean[m + v]);
                cov += scale * (joint - split);
            }
            Ok((s1.section_mmse_term - s0.section_mmse_term, cov))
        })?;
        let diffs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let covs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let (diff_mean, diff_se) = mean_and_se(&diffs);
        let (cov_mean, cov_se) = mean_and_se(&covs);
        residuals.push(diff_mean.abs());
        errors.push(diff_se);
        notes.push(format!(
            "L={l}: overlap/energy covariance at t=1 is {cov_mean:.4e} +- {cov_se:.1e}"
        ));
    }
    let mut report =
        ScalingReport::from_residuals("mmse-variation", l_grid.to_vec(), residuals, errors)?;
    report.notes.extend(notes);
    Ok(report)
}

/// The Nishimori symmetries of the Bayes-optimal posterior, checked as
/// exact-in-expectation identities on one plan:
///
/// 1. overlap vs replica variance: `E<q> = E[sum_i (<X_i^2> - <X_i>^2)] / L`;
/// 2. row moments: `2 E<[phi xbar]_r>^2 = E<[phi xbar]_r^2>`, averaged over
///    every row;
/// 3. overlap vs error: `E<q> = E[|s - <X>|^2] / L`;
/// 4. sub-row noise coupling (needs `t > 0` and a nonempty sub-group): the
///    mixed moment of the row residual, the noise, and the replica signal
///    error, in the two equivalent arrangements produced by Gaussian
///    integration by parts.
pub fn nishimori_suite(
    prior: &Prior,
    params: &ModelParams,
    plan: &SamplingPlan,
) -> Result<Vec<RelationReport>> {
    params.validate()?;
    let m = params.m;
    let rows = params.rows();
    let sub = params.sub_rows();
    let n = params.n();
    let l = params.l as f64;
    let with_coupling = params.t > 0.0 && sub > 0;
    let coupling_root = (params.t / params.delta).sqrt();

    struct Row {
        overlap: f64,
        replica_var: f64,
        row_lhs: f64,
        row_rhs: f64,
        mmse: f64,
        coupling_lhs: f64,
        coupling_rhs: f64,
    }
    let samples = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        let s = enumerate_posterior(&inst, prior, params)?;
        let replica_var = (0..n).map(|i| s.mean_sq[i] - s.mean[i] * s.mean[i]).sum::<f64>() / l;
        let row_lhs = 2.0 * s.row_mean.iter().map(|r| r * r).sum::<f64>() / rows as f64;
        let row_rhs = s.row_sq.iter().sum::<f64>() / rows as f64;
        let (mut coupling_lhs, mut coupling_rhs) = (0.0, 0.0);
        if with_coupling {
            for v in 0..sub {
                let z = inst.z[m + v];
                for i in 0..n {
                    let xm = s.mean[i] - inst.s[i];
                    let cross = s.sub_cross_mean[v][i];
                    coupling_lhs += z * (coupling_root * cross - z * xm) * xm;
                    coupling_rhs += z * z * inst.s[i] * xm - coupling_root * z * inst.s[i] * cross;
                }
            }
            let scale = 1.0 / (sub as f64 * l);
            coupling_lhs *= scale;
            coupling_rhs *= scale;
        }
        Ok(Row {
            overlap: s.overlap_mean,
            replica_var,
            row_lhs,
            row_rhs,
            mmse: s.section_mmse_term,
            coupling_lhs,
            coupling_rhs,
        })
    })?;

    let collect = |f: &dyn Fn(&Row) -> f64| -> Vec<f64> { samples.iter().map(f).collect() };
    let est = |values: &[f64]| EstimateWithError::from_values(plan, values);

    let mut reports = vec![
        RelationReport::two_sided(
            "nishimori-overlap",
            params,
            plan,
            est(&collect(&|r| r.overlap)),
            est(&collect(&|r| r.replica_var)),
            0.0,
        ),
        RelationReport::two_sided(
            "nishimori-row-moments",
            params,
            plan,
            est(&collect(&|r| r.row_lhs)),
            est(&collect(&|r| r.row_rhs)),
            0.0,
        ),
        RelationReport::two_sided(
            "nishimori-mmse",
            params,
            plan,
            est(&collect(&|r| r.overlap)),
            est(&collect(&|r| r.mmse)),
            0.0,
        ),
    ];
    if with_coupling {
        reports.push(RelationReport::two_sided(
            "nishimori-sub-row-coupling",
            params,
            plan,
            est(&collect(&|r| r.coupling_lhs)),
            est(&collect(&|r| r.coupling_rhs)),
            0.0,
        ));
    }
    Ok(reports)
}

/// Concentration of the overlap: the `h`-integrated total fluctuation
/// `E<(q - E*)^2>` decays with `L`. The integral runs over `h_window` on a
/// uniform grid with trapezoidal weights; all `h` points share instances,
/// and the plug-in centering bias is `O(1/n)`.
pub fn concentration_scan(
    prior: &Prior,
    template: &ModelParams,
    l_grid: &[usize],
    h_window: (f64, f64),
    h_points: usize,
    plan: &SamplingPlan,
) -> Result<ScalingReport> {
    let (a, eps) = h_window;
    if !(a > 0.0 && eps > a) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "h window must satisfy 0 < a < eps, got [{a}, {eps}]"
        )));
    }
    if h_points < 2 {
        return Err(Error::InvalidArgument("h quadrature needs at least 2 points".into()));
    }
    let h_grid: Vec<f64> =
        (0..h_points).map(|j| a + (eps - a) * j as f64 / (h_points - 1) as f64).collect();
    let step = (eps - a) / (h_points - 1) as f64;
    let mut weights = vec![step; h_points];
    weights[0] = 0.5 * step;
    weights[h_points - 1] = 0.5 * step;

    let mut residuals = Vec::with_capacity(l_grid.len());
    let mut errors = Vec::with_capacity(l_grid.len());
    for &l in l_grid {
        let mut params = template.clone();
        params.l = l;
        params.m = l * params.b;
        params.validate()?;
        let triples_per_sample = map_samples(&size_plan(plan, l), |key| {
            let inst = sample_instance(&params, prior, key)?;
            let mut row = Vec::with_capacity(h_points);
            for &h in &h_grid {
                let mut at_h = params.clone();
                at_h.h = h;
                let summary = enumerate_posterior(&inst, prior, &at_h)?;
                row.push((summary.overlap_mean, summary.overlap_sq, summary.section_mmse_term));
            }
            Ok(row)
        })?;
        let n_samples = triples_per_sample.len();
        let mut integral = 0.0;
        let mut influences = vec![0.0; n_samples];
        for (j, &w) in weights.iter().enumerate() {
            let column: Vec<(f64, f64, f64)> =
                triples_per_sample.iter().map(|row| row[j]).collect();
            let (value, point_influences) = fluctuation_influences(&column);
            integral += w * value;
            for (acc, inf) in influences.iter_mut().zip(&point_influences) {
                *acc += w * inf;
            }
        }
        let (_, se) = mean_and_se(&influences);
        residuals.push(integral);
        errors.push(se);
    }
    ScalingReport::from_residuals("overlap-concentration", l_grid.to_vec(), residuals, errors)
        .map(|r| r.with_note("plug-in centering at the estimated MMSE; bias O(1/n)".into()))
}

/// Even moments of the signal projection `[phi s]_r` against the closed-form
/// Gaussian envelope: conditionally on `s` the projection is
/// `N(0, |s|^2 / L)` with `|s|^2 / L <= B s_max^2`, so
/// `E[(phi s)_r^{2p}] <= (2p-1)!! (B s_max^2)^p`. One one-sided report per
/// power `p = 1..=max_power`. Needs no enumeration.
pub fn boundedness_moments(
    prior: &Prior,
    params: &ModelParams,
    plan: &SamplingPlan,
    max_power: usize,
) -> Result<Vec<RelationReport>> {
    params.validate()?;
    if max_power == 0 || max_power > 8 {
        return Err(Error::InvalidArgument("max_power must be in 1..=8".into()));
    }
    let rows = params.rows();
    if rows == 0 {
        return Err(Error::InvalidParams("boundedness_moments needs at least one row".into()));
    }
    let n = params.n();
    let samples = map_samples(plan, |key| {
        let inst = sample_instance(params, prior, key)?;
        let mut moments = vec![0.0; max_power];
        for r in 0..rows {
            let u = dot(&inst.phi.row(r)[..n], &inst.s);
            let u2 = u * u;
            let mut p = 1.0;
            for slot in moments.iter_mut() {
                p *= u2;
                *slot += p;
            }
        }
        for slot in moments.iter_mut() {
            *slot /= rows as f64;
        }
        Ok(moments)
    })?;

    let variance_cap = params.b as f64 * prior.s_max() * prior.s_max();
    let mut double_factorial = 1.0;
    let mut envelope = 1.0;
    let mut reports = Vec::with_capacity(max_power);
    for p in 1..=max_power {
        double_factorial *= (2 * p - 1) as f64;
        envelope *= variance_cap;
        let values: Vec<f64> = samples.iter().map(|m| m[p - 1]).collect();
        let lhs = EstimateWithError::from_values(plan, &values);
        let rhs = EstimateWithError {
            mean: double_factorial * envelope,
            std_error: 0.0,
            n_samples: lhs.n_samples,
            base_seed: plan.base_seed,
        };
        reports.push(RelationReport::upper_bound(
            &format!("signal-projection-moment p={p}"),
            params,
            plan,
            lhs,
            rhs,
            0.0,
        ));
    }
    Ok(reports)
}
